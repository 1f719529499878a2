//! The four discrete spaces and their degree-of-freedom maps.
//!
//! * Stress: matrix fields whose rows are BDM1 vector fields. Each edge carries
//!   two normal-moment functionals (against the degree-0 and degree-1 Legendre
//!   polynomials along the edge) for each of the two rows, so global stress dof
//!   `4 e + 2 r + j` is moment `j` of row `r` on edge `e`.
//! * Displacement: piecewise constant vectors, dof `2 c + comp`.
//! * Rotation: piecewise constant skew tensors `[[0, q], [-q, 0]]`, dof `c`.
//! * Pressure: continuous P1, dof = vertex index.

use serde::{Deserialize, Serialize};

use crate::error::{BiotError, Result};
use crate::mesh::{build_unit_square_mesh, classify_boundary, BcMode, BoundaryTags, Point, TriMesh};
use crate::quadrature::gauss3_unit;
use crate::sparsela::DenseMatrix;

pub type Tensor = [[f64; 2]; 2];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SpaceKind {
    Stress,
    Displacement,
    Rotation,
    Pressure,
}

/// Degree-of-freedom layout of one space, with essential boundary data.
#[derive(Debug, Clone)]
pub struct DofMap {
    kind: SpaceKind,
    ndof: usize,
    constrained: Vec<bool>,
    pinned_dof: Option<usize>,
}

impl DofMap {
    pub fn kind(&self) -> SpaceKind {
        self.kind
    }

    pub fn ndof(&self) -> usize {
        self.ndof
    }

    pub fn constrained(&self) -> &[bool] {
        &self.constrained
    }

    pub fn num_constrained(&self) -> usize {
        self.constrained.iter().filter(|&&c| c).count()
    }

    /// Pressure dof fixed to zero when no Dirichlet pressure boundary exists.
    pub fn pinned_dof(&self) -> Option<usize> {
        self.pinned_dof
    }

    /// Unconstrained dofs in increasing order.
    pub fn free_dofs(&self) -> Vec<usize> {
        (0..self.ndof).filter(|&i| !self.constrained[i]).collect()
    }

    pub fn num_free(&self) -> usize {
        self.ndof - self.num_constrained()
    }

    pub fn stress_dof(edge: usize, row: usize, moment: usize) -> usize {
        4 * edge + 2 * row + moment
    }

    /// Global dofs of a cell in the local ordering used by element matrices.
    pub fn cell_dofs(&self, mesh: &TriMesh, cell: usize) -> Vec<usize> {
        match self.kind {
            SpaceKind::Stress => {
                let edges = &mesh.cell_edges()[cell];
                (0..12)
                    .map(|a| {
                        let (row, i) = (a / 6, a % 6);
                        Self::stress_dof(edges[i / 2].0, row, i % 2)
                    })
                    .collect()
            }
            SpaceKind::Displacement => vec![2 * cell, 2 * cell + 1],
            SpaceKind::Rotation => vec![cell],
            SpaceKind::Pressure => mesh.cells()[cell].to_vec(),
        }
    }
}

/// Builds the dof map of one space on a tagged mesh.
pub fn build_space(mesh: &TriMesh, tags: &BoundaryTags, kind: SpaceKind) -> DofMap {
    let (ndof, constrained, pinned_dof) = match kind {
        SpaceKind::Stress => {
            let ndof = 4 * mesh.num_edges();
            let mut constrained = vec![false; ndof];
            for &e in &tags.gamma_t {
                for row in 0..2 {
                    for moment in 0..2 {
                        constrained[DofMap::stress_dof(e, row, moment)] = true;
                    }
                }
            }
            (ndof, constrained, None)
        }
        SpaceKind::Displacement => (2 * mesh.num_cells(), vec![false; 2 * mesh.num_cells()], None),
        SpaceKind::Rotation => (mesh.num_cells(), vec![false; mesh.num_cells()], None),
        SpaceKind::Pressure => {
            let ndof = mesh.num_vertices();
            let mut constrained = vec![false; ndof];
            let mut pinned = None;
            if tags.gamma_p.is_empty() {
                // Vertex 0 is the corner (0, 0).
                pinned = Some(0);
            } else {
                for &e in &tags.gamma_p {
                    for &v in &mesh.edges()[e] {
                        constrained[v] = true;
                    }
                }
            }
            (ndof, constrained, pinned)
        }
    };
    DofMap {
        kind,
        ndof,
        constrained,
        pinned_dof,
    }
}

/// The two BDM1 moments of `field · n` on an edge, using the global normal and
/// the parametrization from the low-index to the high-index vertex:
/// `(∫_e v·n ds, ∫_e v·n (2s - 1) ds)`.
pub fn bdm1_edge_moments(mesh: &TriMesh, edge: usize, field: impl Fn(Point) -> [f64; 2]) -> Result<[f64; 2]> {
    let n = mesh.edge_normal(edge)?;
    let [a, b] = mesh.edges()[edge];
    let (pa, pb) = (mesh.vertices()[a], mesh.vertices()[b]);
    let len = mesh.edge_length(edge);
    let mut out = [0.0; 2];
    for (s, w) in gauss3_unit() {
        let x = [pa[0] + s * (pb[0] - pa[0]), pa[1] + s * (pb[1] - pa[1])];
        let v = field(x);
        let vn = v[0] * n[0] + v[1] * n[1];
        out[0] += w * len * vn;
        out[1] += w * len * vn * (2.0 * s - 1.0);
    }
    Ok(out)
}

/// Linear vector field `v(x) = c0 + c1 ξ + c2 η` per component, with
/// `(ξ, η) = (x - center) / scale`.
#[derive(Debug, Clone, Copy, Default)]
pub struct LinearVector {
    pub coef: [[f64; 3]; 2],
}

impl LinearVector {
    pub fn eval(&self, center: Point, scale: f64, x: Point) -> [f64; 2] {
        let (xi, eta) = ((x[0] - center[0]) / scale, (x[1] - center[1]) / scale);
        [
            self.coef[0][0] + self.coef[0][1] * xi + self.coef[0][2] * eta,
            self.coef[1][0] + self.coef[1][1] * xi + self.coef[1][2] * eta,
        ]
    }

    pub fn div(&self, scale: f64) -> f64 {
        (self.coef[0][1] + self.coef[1][2]) / scale
    }
}

/// Per-cell BDM1 vector shape functions dual to the global-orientation edge
/// moments. Local shape `i = 2 k + j` belongs to moment `j` of local edge `k`.
#[derive(Debug, Clone)]
pub struct StressBasisTable {
    centers: Vec<Point>,
    scales: Vec<f64>,
    shapes: Vec<[LinearVector; 6]>,
}

impl StressBasisTable {
    pub fn new(mesh: &TriMesh) -> Self {
        let ncells = mesh.num_cells();
        let mut centers = Vec::with_capacity(ncells);
        let mut scales = Vec::with_capacity(ncells);
        let mut shapes = Vec::with_capacity(ncells);
        for c in 0..ncells {
            let center = mesh.centroid(c);
            let scale = (2.0 * mesh.area(c)).sqrt();
            // Monomial basis: component-major (1, ξ, η).
            let monomial = |m: usize| {
                let mut lv = LinearVector::default();
                lv.coef[m / 3][m % 3] = 1.0;
                lv
            };
            let mut vandermonde = DenseMatrix::zeros(6, 6);
            for (k, &(e, _)) in mesh.cell_edges()[c].iter().enumerate() {
                for m in 0..6 {
                    let p = monomial(m);
                    let mom = bdm1_edge_moments(mesh, e, |x| p.eval(center, scale, x)).expect("edge of mesh");
                    vandermonde[(2 * k, m)] = mom[0];
                    vandermonde[(2 * k + 1, m)] = mom[1];
                }
            }
            let inv = vandermonde.inverse().expect("BDM1 moments are unisolvent");
            let mut local = [LinearVector::default(); 6];
            for (i, shape) in local.iter_mut().enumerate() {
                for m in 0..6 {
                    shape.coef[m / 3][m % 3] = inv[(m, i)];
                }
            }
            centers.push(center);
            scales.push(scale);
            shapes.push(local);
        }
        Self {
            centers,
            scales,
            shapes,
        }
    }

    pub fn vector_shape(&self, cell: usize, i: usize) -> &LinearVector {
        &self.shapes[cell][i]
    }

    pub fn eval_vector(&self, cell: usize, i: usize, x: Point) -> [f64; 2] {
        self.shapes[cell][i].eval(self.centers[cell], self.scales[cell], x)
    }

    pub fn div_vector(&self, cell: usize, i: usize) -> f64 {
        self.shapes[cell][i].div(self.scales[cell])
    }

    /// Local matrix shape `a` (0..12): row `a / 6` is vector shape `a % 6`.
    pub fn eval_matrix(&self, cell: usize, a: usize, x: Point) -> Tensor {
        let v = self.eval_vector(cell, a % 6, x);
        let mut t = [[0.0; 2]; 2];
        t[a / 6] = v;
        t
    }

    /// Row-wise divergence of local matrix shape `a`.
    pub fn div_matrix(&self, cell: usize, a: usize) -> [f64; 2] {
        let mut d = [0.0; 2];
        d[a / 6] = self.div_vector(cell, a % 6);
        d
    }

    /// Evaluates `Σ x_i φ_i` inside a cell.
    pub fn eval_field(&self, mesh: &TriMesh, stress: &DofMap, coeffs: &[f64], cell: usize, x: Point) -> Tensor {
        let dofs = stress.cell_dofs(mesh, cell);
        let mut t = [[0.0; 2]; 2];
        for (a, &g) in dofs.iter().enumerate() {
            let v = self.eval_vector(cell, a % 6, x);
            t[a / 6][0] += coeffs[g] * v[0];
            t[a / 6][1] += coeffs[g] * v[1];
        }
        t
    }
}

/// Stress-space interpolant of a matrix field via its edge moments. Exact for
/// fields whose rows are linear.
pub fn interpolate_stress(mesh: &TriMesh, stress: &DofMap, field: impl Fn(Point) -> Tensor) -> Result<Vec<f64>> {
    let mut w = vec![0.0; stress.ndof()];
    for e in 0..mesh.num_edges() {
        for row in 0..2 {
            let mom = bdm1_edge_moments(mesh, e, |x| field(x)[row])?;
            w[DofMap::stress_dof(e, row, 0)] = mom[0];
            w[DofMap::stress_dof(e, row, 1)] = mom[1];
        }
    }
    Ok(w)
}

/// Coefficients `w` with `Σ w_i φ_i = I`. Only meaningful without traction
/// constraints, since the identity has nonzero normal trace everywhere.
pub fn interpolate_identity(stress: &DofMap, mesh: &TriMesh) -> Result<Vec<f64>> {
    if stress.kind() != SpaceKind::Stress {
        return Err(BiotError::InvalidArgument(
            "identity interpolant needs the stress space".into(),
        ));
    }
    if stress.num_constrained() > 0 {
        return Err(BiotError::InvalidState(
            "identity tensor is not in the stress space when traction is constrained".into(),
        ));
    }
    interpolate_stress(mesh, stress, |_| [[1.0, 0.0], [0.0, 1.0]])
}

/// Mesh, boundary tags, the four dof maps and the stress basis for one grid.
#[derive(Debug, Clone)]
pub struct Discretization {
    pub mesh: TriMesh,
    pub mode: BcMode,
    pub tags: BoundaryTags,
    pub stress: DofMap,
    pub pressure: DofMap,
    pub displacement: DofMap,
    pub rotation: DofMap,
    pub table: StressBasisTable,
    free_stress: Vec<usize>,
}

impl Discretization {
    pub fn new(n: usize, mode: BcMode) -> Result<Self> {
        let mesh = build_unit_square_mesh(n)?;
        let tags = classify_boundary(&mesh, mode);
        let stress = build_space(&mesh, &tags, SpaceKind::Stress);
        let pressure = build_space(&mesh, &tags, SpaceKind::Pressure);
        let displacement = build_space(&mesh, &tags, SpaceKind::Displacement);
        let rotation = build_space(&mesh, &tags, SpaceKind::Rotation);
        let table = StressBasisTable::new(&mesh);
        let free_stress = stress.free_dofs();
        Ok(Self {
            mesh,
            mode,
            tags,
            stress,
            pressure,
            displacement,
            rotation,
            table,
            free_stress,
        })
    }

    pub fn n(&self) -> usize {
        self.mesh.n()
    }

    /// Stress dofs not removed by the traction condition.
    pub fn free_stress(&self) -> &[usize] {
        &self.free_stress
    }

    /// Restricts a full-length stress vector to the free dofs.
    pub fn restrict_stress(&self, x: &[f64]) -> Vec<f64> {
        self.free_stress.iter().map(|&i| x[i]).collect()
    }

    /// Extends a free-dof stress vector by zeros.
    pub fn extend_stress(&self, x: &[f64]) -> Vec<f64> {
        let mut full = vec![0.0; self.stress.ndof()];
        for (&i, &v) in self.free_stress.iter().zip(x) {
            full[i] = v;
        }
        full
    }
}
