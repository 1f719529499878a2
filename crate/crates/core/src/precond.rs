//! Block-diagonal Riesz-map preconditioners.
//!
//! The stress block is the exact inverse of the weighted `H(div)` matrix 𝗕,
//! computed by sparse LDLᵀ. For clamped boundaries the auxiliary matrix
//! `𝗣 = 𝗕 - (ρ/2μ) m mᵀ` is needed instead; it satisfies `𝗩ᵀ 𝗕 𝗩 = 𝗣` with
//! `𝗩 = I + a w mᵀ`, so `𝗣⁻¹ = 𝗩⁻¹ 𝗕⁻¹ 𝗩⁻ᵀ` with `𝗩⁻¹ = I + b w mᵀ`.
//! Pressure is solved exactly as well; displacement and rotation use the
//! (diagonal) inverse mass matrices.

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::assembly::{displacement_mass, rotation_mass, ParameterSet, StressForms};
use crate::error::{check_dim, BiotError, Result};
use crate::krylov::seeded_random_vector;
use crate::mesh::BcMode;
use crate::spaces::{interpolate_identity, Discretization};
use crate::sparsela::dense::symmetric_eigenvalues;
use crate::sparsela::{axpy, dot, ldlt_factor, DenseMatrix, LinearOperator, SymFactor};
use crate::DIM;

/// Scalars and vectors of the rank-one congruence.
#[derive(Debug, Clone)]
pub struct RankOneData {
    pub rho: f64,
    pub a: f64,
    pub b: f64,
    pub w: Vec<f64>,
    pub m: Vec<f64>,
}

/// `a = -ρ / ((1 + √(1-ρ)) √(n|Ω|))`, `b = ρ / ((1 + √(1-ρ)) √(1-ρ) √(n|Ω|))`,
/// the cancellation-free forms of `(√(1-ρ) - 1)/√(n|Ω|)` and
/// `(1 - √(1-ρ)) / (√(1-ρ) √(n|Ω|))`.
pub fn build_rank_one(params: &ParameterSet, w: Vec<f64>, m: Vec<f64>, domain_area: f64) -> Result<RankOneData> {
    check_dim(w.len(), m.len(), "rank-one vectors")?;
    let rho = params.rho();
    let sq = params.one_minus_rho().sqrt();
    let s = (DIM as f64 * domain_area).sqrt();
    Ok(RankOneData {
        rho,
        a: -rho / ((1.0 + sq) * s),
        b: rho / ((1.0 + sq) * sq * s),
        w,
        m,
    })
}

impl RankOneData {
    pub fn dim(&self) -> usize {
        self.w.len()
    }

    /// `x + c u (vᵀ x)`
    fn update(c: f64, u: &[f64], v: &[f64], x: &[f64]) -> Vec<f64> {
        let mut y = x.to_vec();
        axpy(c * dot(v, x), u, &mut y);
        y
    }

    /// `𝗩 x = x + a w (mᵀ x)`
    pub fn apply_v(&self, x: &[f64]) -> Vec<f64> {
        Self::update(self.a, &self.w, &self.m, x)
    }

    /// `𝗩⁻¹ x = x + b w (mᵀ x)`
    pub fn apply_v_inv(&self, x: &[f64]) -> Vec<f64> {
        Self::update(self.b, &self.w, &self.m, x)
    }

    /// `𝗩ᵀ x = x + a m (wᵀ x)`
    pub fn apply_v_transpose(&self, x: &[f64]) -> Vec<f64> {
        Self::update(self.a, &self.m, &self.w, x)
    }

    /// `𝗩⁻ᵀ x = x + b m (wᵀ x)`
    pub fn apply_v_inv_transpose(&self, x: &[f64]) -> Vec<f64> {
        Self::update(self.b, &self.m, &self.w, x)
    }

    /// Dense `𝗩` for small verification problems.
    pub fn v_dense(&self) -> DenseMatrix {
        let mut v = DenseMatrix::identity(self.dim());
        v.add_outer(self.a, &self.w, &self.m);
        v
    }
}

/// Stress block of the preconditioner.
#[derive(Debug, Clone)]
pub enum StressPrecond {
    /// `𝗕⁻¹`
    Riesz(Arc<SymFactor>),
    /// `𝗩⁻¹ 𝗕⁻¹ 𝗩⁻ᵀ`
    Corrected {
        factor: Arc<SymFactor>,
        rank_one: RankOneData,
    },
}

impl StressPrecond {
    pub fn is_corrected(&self) -> bool {
        matches!(self, StressPrecond::Corrected { .. })
    }
}

impl LinearOperator for StressPrecond {
    fn dim(&self) -> usize {
        match self {
            StressPrecond::Riesz(f) => f.dim(),
            StressPrecond::Corrected { factor, .. } => factor.dim(),
        }
    }

    fn apply(&self, x: &[f64], y: &mut [f64]) {
        match self {
            StressPrecond::Riesz(f) => f.solve_into(x, y),
            StressPrecond::Corrected { factor, rank_one } => {
                let t = rank_one.apply_v_inv_transpose(x);
                factor.solve_into(&t, y);
                let c = rank_one.b * dot(&rank_one.m, y);
                axpy(c, &rank_one.w, y);
            }
        }
    }
}

/// Factors 𝗕 restricted to the free stress dofs.
pub fn factor_sigma_riesz(disc: &Discretization, forms: &StressForms, mu: f64) -> Result<SymFactor> {
    let free = disc.free_stress();
    ldlt_factor(&forms.sigma_riesz(mu).submatrix(free, free))
}

/// Builds the stress block for the boundary regime of `disc`: plain 𝗕⁻¹ with a
/// traction boundary, the rank-one corrected inverse when clamped.
pub fn stress_precond(
    disc: &Discretization,
    forms: &StressForms,
    params: &ParameterSet,
    factor: Arc<SymFactor>,
) -> Result<StressPrecond> {
    check_dim(disc.free_stress().len(), factor.dim(), "stress factor")?;
    match disc.mode {
        BcMode::Mixed => Ok(StressPrecond::Riesz(factor)),
        BcMode::Clamped => {
            let w = interpolate_identity(&disc.stress, &disc.mesh)?;
            let m = forms.m_vector(disc.mesh.domain_area());
            let rank_one = build_rank_one(params, w, m, disc.mesh.domain_area())?;
            Ok(StressPrecond::Corrected { factor, rank_one })
        }
    }
}

/// `diag(stress, pressure⁻¹, M_u⁻¹, M_γ⁻¹)` in block order (σ, p, u, γ).
#[derive(Debug, Clone)]
pub struct BlockPrecond {
    pub sizes: [usize; 4],
    pub stress: StressPrecond,
    pub pressure: Option<Arc<SymFactor>>,
    pub displacement_inv: Vec<f64>,
    pub rotation_inv: Vec<f64>,
}

impl BlockPrecond {
    /// `pressure` is the factored pressure block, or `None` for pure elasticity.
    pub fn new(disc: &Discretization, stress: StressPrecond, pressure: Option<Arc<SymFactor>>) -> Self {
        let displacement_inv: Vec<f64> = displacement_mass(disc).iter().map(|m| 1.0 / m).collect();
        let rotation_inv: Vec<f64> = rotation_mass(disc).iter().map(|m| 1.0 / m).collect();
        let sizes = [
            stress.dim(),
            pressure.as_ref().map_or(0, |p| p.dim()),
            displacement_inv.len(),
            rotation_inv.len(),
        ];
        Self {
            sizes,
            stress,
            pressure,
            displacement_inv,
            rotation_inv,
        }
    }

    pub fn mode(&self) -> BcMode {
        if self.stress.is_corrected() {
            BcMode::Clamped
        } else {
            BcMode::Mixed
        }
    }

    /// Checked application.
    pub fn apply_checked(&self, r: &[f64]) -> Result<Vec<f64>> {
        check_dim(self.dim(), r.len(), "block residual")?;
        Ok(self.apply_vec(r))
    }
}

impl LinearOperator for BlockPrecond {
    fn dim(&self) -> usize {
        self.sizes.iter().sum()
    }

    fn apply(&self, x: &[f64], y: &mut [f64]) {
        let s = self.sizes;
        let o = [0, s[0], s[0] + s[1], s[0] + s[1] + s[2], s[0] + s[1] + s[2] + s[3]];
        self.stress.apply(&x[..o[1]], &mut y[..o[1]]);
        if let Some(p) = &self.pressure {
            p.solve_into(&x[o[1]..o[2]], &mut y[o[1]..o[2]]);
        }
        for i in 0..s[2] {
            y[o[2] + i] = self.displacement_inv[i] * x[o[2] + i];
        }
        for i in 0..s[3] {
            y[o[3] + i] = self.rotation_inv[i] * x[o[3] + i];
        }
    }
}

/// Lanczos estimate of the spectrum of `B A`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConditionEstimate {
    /// Smallest Ritz value (signed).
    pub lo: f64,
    /// Largest Ritz value (signed).
    pub hi: f64,
    /// `max |θ| / min |θ|` over the Ritz values.
    pub condition: f64,
    pub steps: usize,
    /// The Krylov space became invariant before `iters` steps.
    pub breakdown: bool,
}

/// Runs `iters` steps of preconditioned Lanczos (in the `B⁻¹` inner product) from
/// a seeded random start and returns the extreme Ritz values of `B A`.
pub fn condition_estimate(
    op: &dyn LinearOperator,
    precond: &dyn LinearOperator,
    iters: usize,
    seed: u64,
) -> Result<ConditionEstimate> {
    let n = op.dim();
    check_dim(n, precond.dim(), "preconditioner")?;
    if iters == 0 || n == 0 {
        return Err(BiotError::InvalidArgument(
            "condition estimate needs iters > 0 and a nonempty operator".into(),
        ));
    }
    let mut v = seeded_random_vector(n, seed);
    let mut z = precond.apply_vec(&v);
    let beta0 = dot(&v, &z).sqrt();
    for (vi, zi) in v.iter_mut().zip(z.iter_mut()) {
        *vi /= beta0;
        *zi /= beta0;
    }
    let mut v_old = vec![0.0; n];
    let mut beta = 0.0;
    let mut alphas = Vec::new();
    let mut betas = Vec::new();
    let mut breakdown = false;
    let mut az = vec![0.0; n];
    for _ in 0..iters.min(n) {
        op.apply(&z, &mut az);
        let alpha = dot(&az, &z);
        axpy(-alpha, &v, &mut az);
        axpy(-beta, &v_old, &mut az);
        alphas.push(alpha);
        let z_new = precond.apply_vec(&az);
        let b2 = dot(&az, &z_new);
        let scale = alphas.iter().fold(0.0f64, |m, a| m.max(a.abs())).max(beta);
        if !(b2 > (1e-10 * scale).powi(2)) {
            breakdown = true;
            break;
        }
        if alphas.len() == iters.min(n) {
            break;
        }
        beta = b2.sqrt();
        betas.push(beta);
        v_old = std::mem::replace(&mut v, az.iter().map(|x| x / beta).collect());
        z = z_new.iter().map(|x| x / beta).collect();
    }
    let k = alphas.len();
    let mut t = DenseMatrix::zeros(k, k);
    for i in 0..k {
        t[(i, i)] = alphas[i];
        if i + 1 < k {
            t[(i, i + 1)] = betas[i];
            t[(i + 1, i)] = betas[i];
        }
    }
    let theta = symmetric_eigenvalues(&t);
    let amin = theta.iter().fold(f64::INFINITY, |m, x| m.min(x.abs()));
    let amax = theta.iter().fold(0.0f64, |m, x| m.max(x.abs()));
    Ok(ConditionEstimate {
        lo: theta[0],
        hi: theta[k - 1],
        condition: amax / amin,
        steps: k,
        breakdown,
    })
}
