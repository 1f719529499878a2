//! Symmetric quadrature rules on triangles and Gauss-Legendre rules on segments.

/// Rule on the reference triangle in barycentric coordinates. Weights sum to 1,
/// so an integral over a cell is `area * sum(w_q f(x_q))`.
#[derive(Debug, Clone)]
pub struct TriangleRule {
    pub points: Vec<[f64; 3]>,
    pub weights: Vec<f64>,
    pub degree: usize,
}

impl TriangleRule {
    /// Six-point rule exact for polynomials of degree 4.
    pub fn degree4() -> Self {
        let s10 = 10f64.sqrt();
        let r = (38.0 - 44.0 * (2.0f64 / 5.0).sqrt()).sqrt();
        let a1 = (8.0 - s10 + r) / 18.0;
        let a2 = (8.0 - s10 - r) / 18.0;
        let q = (213125.0 - 53320.0 * s10).sqrt();
        let w1 = (620.0 + q) / 3720.0;
        let w2 = (620.0 - q) / 3720.0;
        let mut rule = Self {
            points: Vec::new(),
            weights: Vec::new(),
            degree: 4,
        };
        rule.push_orbit(a1, w1);
        rule.push_orbit(a2, w2);
        rule
    }

    /// Seven-point Radon rule exact for polynomials of degree 5.
    pub fn degree5() -> Self {
        let s15 = 15f64.sqrt();
        let mut rule = Self {
            points: vec![[1.0 / 3.0; 3]],
            weights: vec![9.0 / 40.0],
            degree: 5,
        };
        rule.push_orbit((6.0 - s15) / 21.0, (155.0 - s15) / 1200.0);
        rule.push_orbit((6.0 + s15) / 21.0, (155.0 + s15) / 1200.0);
        rule
    }

    fn push_orbit(&mut self, a: f64, w: f64) {
        let b = 1.0 - 2.0 * a;
        for p in [[b, a, a], [a, b, a], [a, a, b]] {
            self.points.push(p);
            self.weights.push(w);
        }
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    /// Physical coordinates of the quadrature points of a triangle.
    pub fn map(&self, tri: &[[f64; 2]; 3]) -> Vec<[f64; 2]> {
        self.points
            .iter()
            .map(|l| {
                [
                    l[0] * tri[0][0] + l[1] * tri[1][0] + l[2] * tri[2][0],
                    l[0] * tri[0][1] + l[1] * tri[1][1] + l[2] * tri[2][1],
                ]
            })
            .collect()
    }
}

/// Three-point Gauss-Legendre rule on `[0, 1]`, exact for degree 5.
pub fn gauss3_unit() -> [(f64, f64); 3] {
    let d = (3.0f64 / 5.0).sqrt() / 2.0;
    [(0.5 - d, 5.0 / 18.0), (0.5, 8.0 / 18.0), (0.5 + d, 5.0 / 18.0)]
}
