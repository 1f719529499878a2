//! Bilinear forms of the coupled system and of the preconditioner inner products.
//!
//! Stress matrices are assembled over all stress dofs; [`assemble_system`]
//! restricts them to the dofs left free by the traction condition.

use serde::{Deserialize, Serialize};

use crate::error::{check_dim, BiotError, Result};
use crate::mesh::Point;
use crate::par_map;
use crate::quadrature::TriangleRule;
use crate::spaces::{Discretization, Tensor};
use crate::sparsela::{CsrMatrix, DenseMatrix, LinearOperator};
use crate::DIM;

const ND: f64 = DIM as f64;

/// Hydraulic conductivity.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "value", rename_all = "lowercase")]
pub enum Conductivity {
    Constant(f64),
    /// `kappa` in the horizontal band `1/4 < y < 3/4`, 1 elsewhere.
    Layered(f64),
}

impl Conductivity {
    pub fn at(&self, x: Point) -> f64 {
        match *self {
            Conductivity::Constant(k) => k,
            Conductivity::Layered(k) => {
                if x[1] > 0.25 && x[1] < 0.75 {
                    k
                } else {
                    1.0
                }
            }
        }
    }

    /// The parameter value (the band value for a layered field).
    pub fn value(&self) -> f64 {
        match *self {
            Conductivity::Constant(k) | Conductivity::Layered(k) => k,
        }
    }
}

/// Material parameters. `mu` defaults to 1/2 and `s0` to `alpha² / lambda`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ParameterSet {
    pub mu: f64,
    pub lambda: f64,
    pub alpha: f64,
    pub kappa: Conductivity,
    pub s0: f64,
}

impl ParameterSet {
    pub fn new(lambda: f64, alpha: f64, kappa: Conductivity) -> Result<Self> {
        Self::with_mu(0.5, lambda, alpha, kappa)
    }

    pub fn with_mu(mu: f64, lambda: f64, alpha: f64, kappa: Conductivity) -> Result<Self> {
        if !(mu > 0.0 && mu.is_finite()) {
            return Err(BiotError::InvalidArgument(format!("mu must be positive, got {mu}")));
        }
        if !(lambda >= 0.0 && lambda.is_finite()) {
            return Err(BiotError::InvalidArgument(format!(
                "lambda must be in [0, inf), got {lambda}"
            )));
        }
        if !(alpha > 0.0 && alpha <= 1.0) {
            return Err(BiotError::InvalidArgument(format!(
                "alpha must be in (0, 1], got {alpha}"
            )));
        }
        let k = kappa.value();
        if !(k > 0.0 && k <= 1.0) {
            return Err(BiotError::InvalidArgument(format!("kappa must be in (0, 1], got {k}")));
        }
        Ok(Self {
            mu,
            lambda,
            alpha,
            kappa,
            s0: alpha * alpha / lambda,
        })
    }

    /// Elasticity-only parameters (alpha = kappa = 1; pressure unused).
    pub fn elasticity(lambda: f64) -> Result<Self> {
        Self::new(lambda, 1.0, Conductivity::Constant(1.0))
    }

    pub fn with_s0(mut self, s0: f64) -> Self {
        self.s0 = s0;
        self
    }

    /// `2 mu + n lambda`.
    pub fn bulk_denominator(&self) -> f64 {
        2.0 * self.mu + ND * self.lambda
    }

    /// `rho = n lambda / (2 mu + n lambda)`.
    pub fn rho(&self) -> f64 {
        ND * self.lambda / self.bulk_denominator()
    }

    /// `1 - rho`, evaluated without subtraction.
    pub fn one_minus_rho(&self) -> f64 {
        2.0 * self.mu / self.bulk_denominator()
    }

    /// Coefficient of the pressure mass term, `s0 + n alpha² / (2 mu + n lambda)`.
    pub fn c_coefficient(&self) -> f64 {
        self.s0 + ND * self.alpha * self.alpha / self.bulk_denominator()
    }
}

/// Compliance tensor applied to a matrix: `(σ - λ/(2μ+nλ) tr σ I) / 2μ`.
pub fn apply_a_pointwise(sigma: Tensor, params: &ParameterSet) -> Tensor {
    let tr = sigma[0][0] + sigma[1][1];
    let shift = params.lambda / params.bulk_denominator() * tr;
    let s = 1.0 / (2.0 * params.mu);
    [
        [s * (sigma[0][0] - shift), s * sigma[0][1]],
        [s * sigma[1][0], s * (sigma[1][1] - shift)],
    ]
}

/// `A σ : τ` in split form, `dev σ : dev τ / 2μ + tr σ tr τ / (n(2μ+nλ))`,
/// which stays accurate when `λ` is large.
pub fn a_inner_pointwise(sigma: Tensor, tau: Tensor, params: &ParameterSet) -> f64 {
    let ts = sigma[0][0] + sigma[1][1];
    let tt = tau[0][0] + tau[1][1];
    let dev_inner = frob(&sigma, &tau) - ts * tt / ND;
    dev_inner / (2.0 * params.mu) + ts * tt / (ND * params.bulk_denominator())
}

struct StressCell {
    dofs: Vec<usize>,
    area: f64,
    div: [[f64; 2]; 12],
    mass: [[f64; 12]; 12],
    dev: [[f64; 12]; 12],
    trtr: [[f64; 12]; 12],
    tr: [f64; 12],
    skw: [f64; 12],
    tr_p1: [[f64; 12]; 3],
}

fn stress_cell(disc: &Discretization, rule: &TriangleRule, c: usize) -> StressCell {
    let mesh = &disc.mesh;
    let table = &disc.table;
    let area = mesh.area(c);
    let pts = rule.map(&mesh.cell_points(c));
    let mut cell = StressCell {
        dofs: disc.stress.cell_dofs(mesh, c),
        area,
        div: [[0.0; 2]; 12],
        mass: [[0.0; 12]; 12],
        dev: [[0.0; 12]; 12],
        trtr: [[0.0; 12]; 12],
        tr: [0.0; 12],
        skw: [0.0; 12],
        tr_p1: [[0.0; 12]; 3],
    };
    for a in 0..12 {
        cell.div[a] = table.div_matrix(c, a);
    }
    for (q, x) in pts.iter().enumerate() {
        let wq = rule.weights[q] * area;
        let bary = rule.points[q];
        let phi: Vec<Tensor> = (0..12).map(|a| table.eval_matrix(c, a, *x)).collect();
        let trs: Vec<f64> = phi.iter().map(|t| t[0][0] + t[1][1]).collect();
        let devs: Vec<Tensor> = phi
            .iter()
            .zip(&trs)
            .map(|(t, &tr)| [[t[0][0] - tr / ND, t[0][1]], [t[1][0], t[1][1] - tr / ND]])
            .collect();
        for a in 0..12 {
            cell.tr[a] += wq * trs[a];
            cell.skw[a] += wq * (phi[a][0][1] - phi[a][1][0]);
            for k in 0..3 {
                cell.tr_p1[k][a] += wq * trs[a] * bary[k];
            }
            for b in 0..12 {
                cell.mass[a][b] += wq * frob(&phi[a], &phi[b]);
                cell.dev[a][b] += wq * frob(&devs[a], &devs[b]);
                cell.trtr[a][b] += wq * trs[a] * trs[b];
            }
        }
    }
    cell
}

fn frob(a: &Tensor, b: &Tensor) -> f64 {
    a[0][0] * b[0][0] + a[0][1] * b[0][1] + a[1][0] * b[1][0] + a[1][1] * b[1][1]
}

/// Parameter-free stress matrices, from which every stress form is a linear
/// combination. All are over the full stress dof set.
#[derive(Debug, Clone)]
pub struct StressForms {
    /// `(φ_j, φ_i)`
    pub mass: CsrMatrix,
    /// `(P_D φ_j, P_D φ_i)`
    pub dev: CsrMatrix,
    /// `(tr φ_j, tr φ_i)`
    pub trtr: CsrMatrix,
    /// `(div φ_j, div φ_i)`
    pub divdiv: CsrMatrix,
    /// `(div φ_j, v_i)` over the displacement space.
    pub div: CsrMatrix,
    /// `(φ_j, η_i)` over the rotation space.
    pub skw: CsrMatrix,
    /// `(tr φ_j, ψ_i)` over the pressure space.
    pub trace_p1: CsrMatrix,
    /// `∫ tr φ_i`
    pub trace: Vec<f64>,
}

impl StressForms {
    pub fn new(disc: &Discretization) -> Self {
        Self::with_rule(disc, &TriangleRule::degree4())
    }

    pub fn with_rule(disc: &Discretization, rule: &TriangleRule) -> Self {
        let mesh = &disc.mesh;
        let cells = par_map(mesh.num_cells(), |c| stress_cell(disc, rule, c));
        let ns = disc.stress.ndof();
        let cap = 144 * cells.len();
        let (mut mass, mut dev, mut trtr, mut dd) = (
            Vec::with_capacity(cap),
            Vec::with_capacity(cap),
            Vec::with_capacity(cap),
            Vec::with_capacity(cap),
        );
        let (mut div, mut skw, mut tp) = (Vec::new(), Vec::new(), Vec::new());
        let mut trace = vec![0.0; ns];
        for (c, cell) in cells.iter().enumerate() {
            let verts = mesh.cells()[c];
            for a in 0..12 {
                let ga = cell.dofs[a];
                trace[ga] += cell.tr[a];
                skw.push((c, ga, cell.skw[a]));
                for r in 0..2 {
                    if cell.div[a][r] != 0.0 {
                        div.push((2 * c + r, ga, cell.area * cell.div[a][r]));
                    }
                }
                for k in 0..3 {
                    tp.push((verts[k], ga, cell.tr_p1[k][a]));
                }
                for b in 0..12 {
                    let gb = cell.dofs[b];
                    mass.push((ga, gb, cell.mass[a][b]));
                    dev.push((ga, gb, cell.dev[a][b]));
                    trtr.push((ga, gb, cell.trtr[a][b]));
                    let d = cell.div[a][0] * cell.div[b][0] + cell.div[a][1] * cell.div[b][1];
                    dd.push((ga, gb, cell.area * d));
                }
            }
        }
        Self {
            mass: CsrMatrix::from_triplets(ns, ns, &mass),
            dev: CsrMatrix::from_triplets(ns, ns, &dev),
            trtr: CsrMatrix::from_triplets(ns, ns, &trtr),
            divdiv: CsrMatrix::from_triplets(ns, ns, &dd),
            div: CsrMatrix::from_triplets(disc.displacement.ndof(), ns, &div),
            skw: CsrMatrix::from_triplets(disc.rotation.ndof(), ns, &skw),
            trace_p1: CsrMatrix::from_triplets(disc.pressure.ndof(), ns, &tp),
            trace,
        }
    }

    /// `(A φ_j, φ_i)`, assembled as `(1/2μ)(P_D·, P_D·) + (1/(n(2μ+nλ)))(tr·, tr·)`
    /// so the trace part keeps full relative accuracy for large `lambda`.
    pub fn a(&self, params: &ParameterSet) -> CsrMatrix {
        let c_tr = 1.0 / (ND * params.bulk_denominator());
        self.dev
            .lin_comb(1.0 / (2.0 * params.mu), &self.trtr, c_tr)
            .expect("same pattern size")
    }

    /// `(K φ_j, ψ_i) = α/(2μ+nλ) (tr φ_j, ψ_i)`.
    pub fn bulk_coupling(&self, params: &ParameterSet) -> CsrMatrix {
        self.trace_p1.scaled(params.alpha / params.bulk_denominator())
    }

    /// `(φ_j, φ_i)/2μ + (div φ_j, div φ_i)`.
    pub fn sigma_riesz(&self, mu: f64) -> CsrMatrix {
        self.mass
            .lin_comb(1.0 / (2.0 * mu), &self.divdiv, 1.0)
            .expect("same size")
    }

    /// `m_i = ∫ tr φ_i / √(n|Ω|)`.
    pub fn m_vector(&self, domain_area: f64) -> Vec<f64> {
        let s = (ND * domain_area).sqrt();
        self.trace.iter().map(|t| t / s).collect()
    }
}

/// Matrix of the auxiliary stress inner product
/// `(1/2μ)(P_0 σ, P_0 τ) + (1/(2μ+nλ))((I-P_0)σ, (I-P_0)τ) + (div σ, div τ)`,
/// where `I - P_0` projects onto constant multiples of the identity. Stored as
/// a sparse part plus the rank-one term `coef · t tᵀ` with `t_i = ∫ tr φ_i`.
#[derive(Debug, Clone)]
pub struct AuxRiesz {
    pub base: CsrMatrix,
    pub t: Vec<f64>,
    pub coef: f64,
}

impl AuxRiesz {
    pub fn to_dense(&self) -> DenseMatrix {
        let mut d = self.base.to_dense();
        d.add_outer(self.coef, &self.t, &self.t);
        d
    }

    /// Restriction to a subset of dofs.
    pub fn restrict(&self, dofs: &[usize]) -> Self {
        Self {
            base: self.base.submatrix(dofs, dofs),
            t: dofs.iter().map(|&i| self.t[i]).collect(),
            coef: self.coef,
        }
    }
}

impl LinearOperator for AuxRiesz {
    fn dim(&self) -> usize {
        self.base.nrows()
    }

    fn apply(&self, x: &[f64], y: &mut [f64]) {
        self.base.spmv_into(x, y);
        let s = self.coef * crate::sparsela::dot(&self.t, x);
        crate::sparsela::axpy(s, &self.t, y);
    }
}

pub fn assemble_a(disc: &Discretization, params: &ParameterSet) -> CsrMatrix {
    StressForms::new(disc).a(params)
}

pub fn assemble_bulk_coupling(disc: &Discretization, params: &ParameterSet) -> CsrMatrix {
    StressForms::new(disc).bulk_coupling(params)
}

pub fn assemble_div(disc: &Discretization) -> CsrMatrix {
    StressForms::new(disc).div
}

pub fn assemble_skw(disc: &Discretization) -> CsrMatrix {
    StressForms::new(disc).skw
}

pub fn assemble_sigma_riesz(disc: &Discretization, params: &ParameterSet) -> CsrMatrix {
    StressForms::new(disc).sigma_riesz(params.mu)
}

pub fn assemble_m_vector(disc: &Discretization) -> Vec<f64> {
    StressForms::new(disc).m_vector(disc.mesh.domain_area())
}

/// Independent assembly of the auxiliary inner product (no use of `m` or `rho`).
pub fn assemble_aux_riesz(disc: &Discretization, params: &ParameterSet) -> AuxRiesz {
    aux_riesz_from(&StressForms::new(disc), params, disc.mesh.domain_area())
}

pub fn aux_riesz_from(forms: &StressForms, params: &ParameterSet, domain_area: f64) -> AuxRiesz {
    let two_mu = 2.0 * params.mu;
    // 1/(2μ+nλ) - 1/2μ = -nλ / (2μ (2μ+nλ))
    let diff = -ND * params.lambda / (two_mu * params.bulk_denominator());
    AuxRiesz {
        base: forms.sigma_riesz(params.mu),
        t: forms.trace.clone(),
        coef: diff / (ND * domain_area),
    }
}

/// Continuous P1 matrices: `(ψ_j, ψ_i)` and `(κ ∇ψ_j, ∇ψ_i)`.
pub fn assemble_p1_mass_stiffness(disc: &Discretization, kappa: &Conductivity) -> (CsrMatrix, CsrMatrix) {
    let mesh = &disc.mesh;
    let rule = TriangleRule::degree4();
    let locals = par_map(mesh.num_cells(), |c| {
        let p = mesh.cell_points(c);
        let area = mesh.area(c);
        let two_a = 2.0 * mesh.signed_area(c);
        let grads = [
            [(p[1][1] - p[2][1]) / two_a, (p[2][0] - p[1][0]) / two_a],
            [(p[2][1] - p[0][1]) / two_a, (p[0][0] - p[2][0]) / two_a],
            [(p[0][1] - p[1][1]) / two_a, (p[1][0] - p[0][0]) / two_a],
        ];
        let mut mass = [[0.0; 3]; 3];
        let mut kint = 0.0;
        for (q, x) in rule.map(&p).iter().enumerate() {
            let wq = rule.weights[q] * area;
            kint += wq * kappa.at(*x);
            let l = rule.points[q];
            for i in 0..3 {
                for j in 0..3 {
                    mass[i][j] += wq * l[i] * l[j];
                }
            }
        }
        let mut stiff = [[0.0; 3]; 3];
        for i in 0..3 {
            for j in 0..3 {
                stiff[i][j] = kint * (grads[i][0] * grads[j][0] + grads[i][1] * grads[j][1]);
            }
        }
        (mass, stiff)
    });
    let nv = mesh.num_vertices();
    let (mut mt, mut st) = (Vec::new(), Vec::new());
    for (c, (mass, stiff)) in locals.iter().enumerate() {
        let v = mesh.cells()[c];
        for i in 0..3 {
            for j in 0..3 {
                mt.push((v[i], v[j], mass[i][j]));
                st.push((v[i], v[j], stiff[i][j]));
            }
        }
    }
    (
        CsrMatrix::from_triplets(nv, nv, &mt),
        CsrMatrix::from_triplets(nv, nv, &st),
    )
}

/// `(C ψ_j, ψ_i) + (κ ∇ψ_j, ∇ψ_i)`, with the pinned dof replaced by an identity row.
pub fn assemble_pressure_block(disc: &Discretization, params: &ParameterSet) -> Result<CsrMatrix> {
    let c = params.c_coefficient();
    if !c.is_finite() {
        return Err(BiotError::InvalidArgument(
            "pressure block needs a finite storage coefficient (lambda > 0 or explicit s0)".into(),
        ));
    }
    let (mass, stiff) = assemble_p1_mass_stiffness(disc, &params.kappa);
    let block = mass.lin_comb(c, &stiff, 1.0)?;
    Ok(match disc.pressure.pinned_dof() {
        Some(p) => block.pin_symmetric(p),
        None => block,
    })
}

/// Diagonal of the displacement mass matrix (`|T|` for both components).
pub fn displacement_mass(disc: &Discretization) -> Vec<f64> {
    (0..disc.displacement.ndof()).map(|i| disc.mesh.area(i / 2)).collect()
}

/// Diagonal of the rotation mass matrix: `(η, η) = 2 |T|` for `η = [[0,1],[-1,0]]`.
pub fn rotation_mass(disc: &Discretization) -> Vec<f64> {
    (0..disc.rotation.ndof()).map(|c| 2.0 * disc.mesh.area(c)).collect()
}

/// Symmetric saddle-point system in block order (σ, p, u, γ). Stress blocks are
/// restricted to the free stress dofs; the pressure block is empty for pure
/// elasticity.
#[derive(Debug, Clone)]
pub struct BlockSystem {
    pub sizes: [usize; 4],
    pub a: CsrMatrix,
    pub k: CsrMatrix,
    pub pressure: CsrMatrix,
    pub div: CsrMatrix,
    pub skw: CsrMatrix,
    pub matrix: CsrMatrix,
    pub rhs: Vec<f64>,
}

impl BlockSystem {
    pub fn offsets(&self) -> [usize; 5] {
        let s = self.sizes;
        [0, s[0], s[0] + s[1], s[0] + s[1] + s[2], s[0] + s[1] + s[2] + s[3]]
    }

    pub fn dim(&self) -> usize {
        self.sizes.iter().sum()
    }
}

impl LinearOperator for BlockSystem {
    fn dim(&self) -> usize {
        BlockSystem::dim(self)
    }

    fn apply(&self, x: &[f64], y: &mut [f64]) {
        self.matrix.apply(x, y)
    }
}

/// Assembles the coupled system with load vectors `f` (displacement dofs) and
/// `g` (pressure dofs); rhs = (0, g, -f, 0). With `include_pressure = false`
/// the pressure block is dropped and `g` must be empty.
pub fn assemble_system(
    disc: &Discretization,
    params: &ParameterSet,
    include_pressure: bool,
    f: &[f64],
    g: &[f64],
) -> Result<BlockSystem> {
    let forms = StressForms::new(disc);
    assemble_system_from(disc, &forms, params, include_pressure, f, g)
}

pub fn assemble_system_from(
    disc: &Discretization,
    forms: &StressForms,
    params: &ParameterSet,
    include_pressure: bool,
    f: &[f64],
    g: &[f64],
) -> Result<BlockSystem> {
    let free = disc.free_stress();
    let all_u: Vec<usize> = (0..disc.displacement.ndof()).collect();
    let all_g: Vec<usize> = (0..disc.rotation.ndof()).collect();
    let ns = free.len();
    let nu = all_u.len();
    let ng = all_g.len();
    check_dim(nu, f.len(), "displacement load")?;
    let np = if include_pressure { disc.pressure.ndof() } else { 0 };
    check_dim(np, g.len(), "pressure load")?;

    let a = forms.a(params).submatrix(free, free);
    let div = forms.div.submatrix(&all_u, free);
    let skw = forms.skw.submatrix(&all_g, free);
    let (k, pressure) = if include_pressure {
        let all_p: Vec<usize> = (0..np).collect();
        let mut k = forms.bulk_coupling(params).submatrix(&all_p, free);
        if let Some(p) = disc.pressure.pinned_dof() {
            k = k.zero_row(p);
        }
        (k, assemble_pressure_block(disc, params)?)
    } else {
        (CsrMatrix::zeros(0, ns), CsrMatrix::zeros(0, 0))
    };

    let sizes = [ns, np, nu, ng];
    let off = [0, ns, ns + np, ns + np + nu];
    let mut trip = Vec::with_capacity(a.nnz() + pressure.nnz() + 2 * (k.nnz() + div.nnz() + skw.nnz()));
    let mut put = |m: &CsrMatrix, r0: usize, c0: usize, transpose: bool| {
        for (r, c, v) in m.triplets() {
            if transpose {
                trip.push((c0 + c, r0 + r, v));
            } else {
                trip.push((r0 + r, c0 + c, v));
            }
        }
    };
    put(&a, 0, 0, false);
    put(&k, off[1], 0, false);
    put(&k, off[1], 0, true);
    put(&pressure, off[1], off[1], false);
    put(&div, off[2], 0, false);
    put(&div, off[2], 0, true);
    put(&skw, off[3], 0, false);
    put(&skw, off[3], 0, true);
    let n = ns + np + nu + ng;
    let matrix = CsrMatrix::from_triplets(n, n, &trip);

    let mut rhs = vec![0.0; n];
    rhs[off[1]..off[1] + np].copy_from_slice(g);
    if include_pressure {
        if let Some(p) = disc.pressure.pinned_dof() {
            rhs[off[1] + p] = 0.0;
        }
    }
    for (i, fi) in f.iter().enumerate() {
        rhs[off[2] + i] = -fi;
    }
    Ok(BlockSystem {
        sizes,
        a,
        k,
        pressure,
        div,
        skw,
        matrix,
        rhs,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::BcMode;
    use crate::spaces::interpolate_identity;
    use crate::sparsela::{dense_sym_geig, dot};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn params(lambda: f64) -> ParameterSet {
        ParameterSet::new(lambda, 1.0, Conductivity::Constant(1.0)).unwrap()
    }

    fn quad(x: &[f64], m: &CsrMatrix) -> f64 {
        dot(x, &m.spmv(x).unwrap())
    }

    fn random_vec(n: usize, seed: u64) -> Vec<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..n).map(|_| rng.random_range(-1.0..1.0)).collect()
    }

    #[test]
    fn pointwise_compliance_examples() {
        let id = [[1.0, 0.0], [0.0, 1.0]];
        let p0 = ParameterSet::with_mu(0.5, 0.0, 1.0, Conductivity::Constant(1.0)).unwrap();
        assert_eq!(apply_a_pointwise(id, &p0), id);
        let a = apply_a_pointwise(id, &params(1.0));
        let oracle = 1.0 - 2.0 * 1.0 / (1.0 + 2.0 * 1.0);
        assert!((a[0][0] - oracle).abs() < 1e-15 && (a[1][1] - 1.0 / 3.0).abs() < 1e-15);
        let dev = [[0.3, -1.2], [2.0, -0.3]];
        for lambda in [0.0, 1.0, 1e8] {
            let p = ParameterSet::with_mu(0.5, lambda, 1.0, Conductivity::Constant(1.0)).unwrap();
            assert_eq!(apply_a_pointwise(dev, &p), dev);
        }
        // tr(Aσ) = tr σ / (2μ + nλ)
        let s = [[1.5, 0.2], [0.7, -0.4]];
        let p = params(3.0);
        let a = apply_a_pointwise(s, &p);
        assert!((a[0][0] + a[1][1] - 1.1 / p.bulk_denominator()).abs() < 1e-14);
    }

    #[test]
    fn split_inner_matches_pointwise() {
        let s = [[0.7, -1.1], [0.4, 2.3]];
        let t = [[-0.2, 0.5], [1.6, 0.9]];
        for lambda in [0.0, 1e-3, 1.0, 1e3] {
            let p = params(lambda);
            let direct = frob(&apply_a_pointwise(s, &p), &t);
            assert!((a_inner_pointwise(s, t, &p) - direct).abs() <= 1e-14 * direct.abs().max(1.0));
        }
        let p = params(1e12);
        let id = [[1.0, 0.0], [0.0, 1.0]];
        let expect = 2.0 / p.bulk_denominator();
        assert!((a_inner_pointwise(id, id, &p) - expect).abs() <= 1e-15 * expect);
    }

    #[test]
    fn a_matrix_properties() {
        let disc = Discretization::new(3, BcMode::Clamped).unwrap();
        let forms = StressForms::new(&disc);
        let w = interpolate_identity(&disc.stress, &disc.mesh).unwrap();
        for lambda in [0.0, 1.0, 1e4, 1e12] {
            let p = ParameterSet::with_mu(0.5, lambda, 1.0, Conductivity::Constant(1.0)).unwrap();
            let a = forms.a(&p);
            assert!(a.symmetry_defect() <= 1e-14);
            let expect = 2.0 / (1.0 + 2.0 * lambda);
            let got = quad(&w, &a);
            // absolute tolerance: the deviatoric part of w is zero only up to rounding
            assert!(
                (got - expect).abs() <= 1e-12 * expect.max(1e-2),
                "lambda {lambda}: {got} vs {expect}"
            );
        }
        let p0 = ParameterSet::with_mu(0.5, 0.0, 1.0, Conductivity::Constant(1.0)).unwrap();
        let diff = forms.a(&p0).lin_comb(1.0, &forms.mass, -1.0).unwrap();
        assert!(diff.max_abs() <= 1e-13);
    }

    #[test]
    fn a_matches_pointwise_compliance() {
        // Oracle: integrate (A φ_b, φ_a) with the pointwise formula directly.
        let disc = Discretization::new(1, BcMode::Clamped).unwrap();
        let p = params(2.5);
        let a = assemble_a(&disc, &p);
        let rule = TriangleRule::degree4();
        let mut oracle = DenseMatrix::zeros(disc.stress.ndof(), disc.stress.ndof());
        for c in 0..disc.mesh.num_cells() {
            let dofs = disc.stress.cell_dofs(&disc.mesh, c);
            for (q, x) in rule.map(&disc.mesh.cell_points(c)).iter().enumerate() {
                let wq = rule.weights[q] * disc.mesh.area(c);
                for i in 0..12 {
                    for j in 0..12 {
                        let aphi = apply_a_pointwise(disc.table.eval_matrix(c, j, *x), &p);
                        oracle[(dofs[i], dofs[j])] += wq * frob(&aphi, &disc.table.eval_matrix(c, i, *x));
                    }
                }
            }
        }
        let mut d = a.to_dense();
        d.add_scaled(-1.0, &oracle);
        assert!(d.max_abs() <= 1e-13 * oracle.max_abs());
    }

    #[test]
    fn a_two_sided_bound() {
        let disc = Discretization::new(2, BcMode::Clamped).unwrap();
        let forms = StressForms::new(&disc);
        for lambda in [1e-2, 1.0, 1e6] {
            let p = params(lambda);
            let a = forms.a(&p);
            for seed in 0..20 {
                let x = random_vec(disc.stress.ndof(), seed);
                let xa = quad(&x, &a);
                let lo = quad(&x, &forms.dev) / (2.0 * p.mu);
                let hi = quad(&x, &forms.mass) / (2.0 * p.mu);
                assert!(lo <= xa * (1.0 + 1e-13) && xa <= hi * (1.0 + 1e-13));
            }
        }
    }

    #[test]
    fn two_quadrature_rules_agree() {
        let disc = Discretization::new(4, BcMode::Mixed).unwrap();
        let f4 = StressForms::with_rule(&disc, &TriangleRule::degree4());
        let f5 = StressForms::with_rule(&disc, &TriangleRule::degree5());
        for (a, b) in [
            (&f4.mass, &f5.mass),
            (&f4.dev, &f5.dev),
            (&f4.trtr, &f5.trtr),
            (&f4.skw, &f5.skw),
            (&f4.trace_p1, &f5.trace_p1),
        ] {
            let d = a.lin_comb(1.0, b, -1.0).unwrap();
            assert!(d.max_abs() <= 1e-13 * a.max_abs());
        }
    }

    #[test]
    fn riesz_identities() {
        for n in [1, 2, 4, 8] {
            let disc = Discretization::new(n, BcMode::Clamped).unwrap();
            let forms = StressForms::new(&disc);
            let b = forms.sigma_riesz(0.5);
            let m = forms.m_vector(1.0);
            let w = interpolate_identity(&disc.stress, &disc.mesh).unwrap();
            assert!((dot(&w, &m) - 2f64.sqrt()).abs() <= 1e-12);
            let bw = b.spmv(&w).unwrap();
            let err: f64 = bw
                .iter()
                .zip(&m)
                .map(|(x, y)| (x - 2f64.sqrt() * y).powi(2))
                .sum::<f64>()
                .sqrt();
            assert!(err <= 1e-12 * crate::sparsela::norm2(&m));
            assert!(b.symmetry_defect() <= 1e-14);
        }
    }

    #[test]
    fn riesz_equals_mass_on_divergence_free_fields() {
        let disc = Discretization::new(2, BcMode::Clamped).unwrap();
        let forms = StressForms::new(&disc);
        let b = forms.sigma_riesz(0.5);
        // Oracle null space of div from a dense eigen-decomposition of Divᵀ Div.
        let dd = forms.divdiv.to_dense();
        let (vals, vecs) = crate::sparsela::dense::jacobi_eigen(&dd, true);
        let vecs = vecs.unwrap();
        let tol = 1e-10 * vals.last().unwrap();
        let mut checked = 0;
        for (k, &v) in vals.iter().enumerate() {
            if v.abs() > tol {
                continue;
            }
            let x: Vec<f64> = (0..dd.nrows()).map(|i| vecs[(i, k)]).collect();
            assert!((quad(&x, &b) - quad(&x, &forms.mass)).abs() <= 1e-12);
            checked += 1;
        }
        assert!(checked > 0);
    }

    #[test]
    fn aux_riesz_identity() {
        for n in [1, 2, 4] {
            let disc = Discretization::new(n, BcMode::Clamped).unwrap();
            let forms = StressForms::new(&disc);
            let m = forms.m_vector(1.0);
            for lambda in [1e-4, 1.0, 1e4, 1e12] {
                let p = params(lambda);
                let aux = aux_riesz_from(&forms, &p, 1.0).to_dense();
                let mut other = forms.sigma_riesz(p.mu).to_dense();
                other.add_outer(-p.rho() / (2.0 * p.mu), &m, &m);
                let mut d = aux.clone();
                d.add_scaled(-1.0, &other);
                assert!(d.frobenius_norm() <= 1e-12 * aux.frobenius_norm());
            }
        }
    }

    #[test]
    fn bulk_coupling_column_sums() {
        let disc = Discretization::new(3, BcMode::Clamped).unwrap();
        let forms = StressForms::new(&disc);
        let p = params(7.0);
        let k = forms.bulk_coupling(&p);
        let m = forms.m_vector(1.0);
        let ones = vec![1.0; disc.pressure.ndof()];
        let mut colsum = vec![0.0; disc.stress.ndof()];
        k.spmv_transpose_add(&ones, &mut colsum);
        for (cs, mi) in colsum.iter().zip(&m) {
            let expect = p.alpha / p.bulk_denominator() * 2f64.sqrt() * mi;
            assert!((cs - expect).abs() <= 1e-14);
        }
    }

    #[test]
    fn pressure_block_properties() {
        let disc = Discretization::new(4, BcMode::Clamped).unwrap();
        let p = params(1.0);
        assert!((p.c_coefficient() - 5.0 / 3.0).abs() < 1e-15);
        let (_, stiff1) = assemble_p1_mass_stiffness(&disc, &Conductivity::Constant(1.0));
        let (_, stiff3) = assemble_p1_mass_stiffness(&disc, &Conductivity::Constant(0.3));
        assert!(stiff3.lin_comb(1.0, &stiff1, -0.3).unwrap().max_abs() <= 1e-15);
        let ones = vec![1.0; disc.pressure.ndof()];
        assert!(stiff1.spmv(&ones).unwrap().iter().all(|r| r.abs() <= 1e-14));
        let (mass, _) = assemble_p1_mass_stiffness(&disc, &Conductivity::Constant(1.0));
        assert!((quad(&ones, &mass) - 1.0).abs() <= 1e-14);
        let block = assemble_pressure_block(&disc, &p).unwrap();
        assert_eq!(block.get(0, 0), 1.0);
        assert!(block.symmetry_defect() == 0.0);
        crate::sparsela::ldlt_factor(&block).unwrap();
    }

    #[test]
    fn layered_conductivity_stiffness() {
        // With N divisible by 4 the band is cell aligned; compare against a
        // cellwise-constant oracle.
        let disc = Discretization::new(4, BcMode::Clamped).unwrap();
        let (_, st) = assemble_p1_mass_stiffness(&disc, &Conductivity::Layered(1e-3));
        let (_, st1) = assemble_p1_mass_stiffness(&disc, &Conductivity::Constant(1.0));
        // Vertex on y=0 only touches cells with κ=1.
        assert!((st.get(0, 0) - st1.get(0, 0)).abs() < 1e-15);
        // Vertex (0.5, 0.5) = index 12 touches only band cells.
        assert!((st.get(12, 12) - 1e-3 * st1.get(12, 12)).abs() < 1e-15);
    }

    #[test]
    fn div_and_skw_annihilate_identity() {
        let disc = Discretization::new(3, BcMode::Clamped).unwrap();
        let forms = StressForms::new(&disc);
        let w = interpolate_identity(&disc.stress, &disc.mesh).unwrap();
        assert!(forms.div.spmv(&w).unwrap().iter().all(|v| v.abs() <= 1e-14));
        assert!(forms.skw.spmv(&w).unwrap().iter().all(|v| v.abs() <= 1e-14));
    }

    #[test]
    fn div_block_has_full_rank() {
        for n in [1, 2] {
            for mode in [BcMode::Clamped, BcMode::Mixed] {
                let disc = Discretization::new(n, mode).unwrap();
                let free = disc.free_stress().to_vec();
                let rows: Vec<usize> = (0..disc.displacement.ndof()).collect();
                let div = StressForms::new(&disc).div.submatrix(&rows, &free).to_dense();
                assert_eq!(div.rank(1e-10), disc.displacement.ndof());
            }
        }
    }

    #[test]
    fn system_symmetry_and_dimensions() {
        let disc = Discretization::new(1, BcMode::Clamped).unwrap();
        let p = params(1.0);
        let sys = assemble_system(&disc, &p, true, &[0.0; 4], &[0.0; 4]).unwrap();
        assert_eq!(sys.sizes, [20, 4, 4, 2]);
        assert_eq!(sys.dim(), 30);
        for mode in [BcMode::Clamped, BcMode::Mixed] {
            let disc = Discretization::new(4, mode).unwrap();
            let f = random_vec(disc.displacement.ndof(), 1);
            let g = random_vec(disc.pressure.ndof(), 2);
            let sys = assemble_system(&disc, &p, true, &f, &g).unwrap();
            let scale = sys.matrix.max_abs();
            assert!(sys.matrix.symmetry_defect() <= 1e-13 * scale);
            assert_eq!(sys.rhs[sys.offsets()[1]], 0.0);
        }
    }

    #[test]
    fn system_is_nonsingular() {
        // Zero data gives zero solution iff the matrix is nonsingular.
        let disc = Discretization::new(1, BcMode::Clamped).unwrap();
        let sys = assemble_system(&disc, &params(1.0), true, &[0.0; 4], &[0.0; 4]).unwrap();
        let d = sys.matrix.to_dense();
        assert_eq!(d.rank(1e-12), sys.dim());
        let sys = assemble_system(&disc, &params(1.0), false, &[0.0; 4], &[]).unwrap();
        assert_eq!(sys.matrix.to_dense().rank(1e-12), sys.dim());
    }

    #[test]
    fn a_is_spd_and_degenerates_with_lambda() {
        let disc = Discretization::new(2, BcMode::Clamped).unwrap();
        let forms = StressForms::new(&disc);
        let mass = forms.mass.to_dense();
        let small = |lambda: f64| dense_sym_geig(&forms.a(&params(lambda)).to_dense(), &mass).unwrap()[0];
        let (s1, s2) = (small(1.0), small(1e6));
        assert!(s1 > 0.0 && s2 > 0.0 && s2 < 1e-5 * s1);
    }

    #[test]
    fn parameter_validation() {
        assert!(ParameterSet::new(-1.0, 1.0, Conductivity::Constant(1.0)).is_err());
        assert!(ParameterSet::new(1.0, 0.0, Conductivity::Constant(1.0)).is_err());
        assert!(ParameterSet::new(1.0, 1.0, Conductivity::Constant(2.0)).is_err());
        let p = ParameterSet::new(4.0, 0.5, Conductivity::Layered(1e-8)).unwrap();
        assert!((p.s0 - 0.0625).abs() < 1e-16);
        let p = ParameterSet::new(1e12, 1.0, Conductivity::Constant(1.0)).unwrap();
        assert!((p.one_minus_rho() - 1.0 / (1.0 + 2e12)).abs() <= 1e-28);
    }
}
