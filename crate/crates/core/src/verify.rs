//! Dense eigenvalue checks of the stability theory on small meshes.
//!
//! Stress pencils compare a norm `⟨τ, τ⟩` (𝗕 or 𝗣) with the energy
//! `(Aτ, τ) + ‖div τ‖²`. Ratios are reported as norm / energy, so the lower
//! extreme is at least 1 by construction of the forms.

use serde::{Deserialize, Serialize};

use crate::assembly::{
    a_inner_pointwise, assemble_system_from, aux_riesz_from, displacement_mass, rotation_mass, Conductivity,
    ParameterSet, StressForms,
};
use crate::error::Result;
use crate::mesh::BcMode;
use crate::quadrature::TriangleRule;
use crate::spaces::{interpolate_identity, Discretization};
use crate::sparsela::dense::{householder_for, reflect_symmetric};
use crate::sparsela::{dense_sym_geig, CsrMatrix, DenseMatrix};
use crate::DIM;

/// Extreme generalized eigenvalues at one `lambda`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SpectralRow {
    pub lambda: f64,
    pub eig_min: f64,
    pub eig_max: f64,
}

/// One machine-readable verification result.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckRow {
    pub check: String,
    pub point: String,
    pub value: f64,
    pub pass: bool,
}

impl CheckRow {
    fn new(check: &str, point: String, value: f64, pass: bool) -> Self {
        Self {
            check: check.to_string(),
            point,
            value,
            pass,
        }
    }
}

pub fn rows_to_csv(rows: &[CheckRow]) -> String {
    let mut out = String::from("check,point,value,pass\n");
    for r in rows {
        out.push_str(&format!(
            "{},{},{:.6e},{}\n",
            r.check,
            r.point,
            r.value,
            if r.pass { "pass" } else { "fail" }
        ));
    }
    out
}

fn energy(forms: &StressForms, params: &ParameterSet) -> CsrMatrix {
    forms.a(params).lin_comb(1.0, &forms.divdiv, 1.0).expect("same size")
}

fn params_for(lambda: f64) -> Result<ParameterSet> {
    ParameterSet::new(lambda, 1.0, Conductivity::Constant(1.0))
}

/// Ratio extremes of `⟨τ,τ⟩_Σ / ((Aτ,τ) + ‖div τ‖²)` over the free stress dofs
/// of a mesh with a traction boundary.
pub fn check_spectral_equivalence_nonclamped(n: usize, lambdas: &[f64]) -> Result<Vec<SpectralRow>> {
    let disc = Discretization::new(n, BcMode::Mixed)?;
    let forms = StressForms::new(&disc);
    let free = disc.free_stress();
    let b = forms.sigma_riesz(0.5).submatrix(free, free).to_dense();
    lambdas
        .iter()
        .map(|&lambda| {
            let e = energy(&forms, &params_for(lambda)?).submatrix(free, free).to_dense();
            let mu = dense_sym_geig(&e, &b)?;
            Ok(SpectralRow {
                lambda,
                eig_min: 1.0 / mu[mu.len() - 1],
                eig_max: 1.0 / mu[0],
            })
        })
        .collect()
}

/// `(AI, I)` and `⟨I, I⟩` in the auxiliary norm, integrated directly from the
/// identity field. `P_0 I = 0` and `div I = 0`, so only the compliance and the
/// mean-trace terms survive.
pub fn identity_field_forms(disc: &Discretization, params: &ParameterSet) -> (f64, f64) {
    let rule = TriangleRule::degree4();
    let id = [[1.0, 0.0], [0.0, 1.0]];
    let mut a_form = 0.0;
    let mut trace_int = 0.0;
    for c in 0..disc.mesh.num_cells() {
        let area = disc.mesh.area(c);
        for &wq in &rule.weights {
            a_form += wq * area * a_inner_pointwise(id, id, params);
            trace_int += wq * area * 2.0;
        }
    }
    let omega = disc.mesh.domain_area();
    // (I - P_0) I = (∫ tr I / (n|Ω|)) I
    let mean = trace_int / (DIM as f64 * omega);
    let aux = mean * mean * DIM as f64 * omega / params.bulk_denominator();
    (a_form, aux)
}

/// Ratio extremes of `⟨τ,τ⟩_Σ̃ / ((Aτ,τ) + ‖div τ‖²)` on a clamped mesh.
///
/// Both forms map `w` (the identity) onto a multiple of `m`, so the pencil
/// splits into span{w} and the complement `mᵀτ = 0`. On the complement the
/// auxiliary matrix equals 𝗕, which stays well conditioned for any `lambda`.
/// The ratio on span{w} is taken from the identity field itself.
pub fn check_spectral_equivalence_clamped(n: usize, lambdas: &[f64]) -> Result<Vec<SpectralRow>> {
    let disc = Discretization::new(n, BcMode::Clamped)?;
    let forms = StressForms::new(&disc);
    let m = forms.m_vector(disc.mesh.domain_area());
    let v = householder_for(&m);
    let rest: Vec<usize> = (1..m.len()).collect();
    let b_perp = reflect_symmetric(&forms.sigma_riesz(0.5).to_dense(), &v).principal(&rest);
    lambdas
        .iter()
        .map(|&lambda| {
            let p = params_for(lambda)?;
            let e_perp = reflect_symmetric(&energy(&forms, &p).to_dense(), &v).principal(&rest);
            let mu = dense_sym_geig(&e_perp, &b_perp)?;
            let (a_id, aux_id) = identity_field_forms(&disc, &p);
            let ratio_w = aux_id / a_id;
            Ok(SpectralRow {
                lambda,
                eig_min: (1.0 / mu[mu.len() - 1]).min(ratio_w),
                eig_max: (1.0 / mu[0]).max(ratio_w),
            })
        })
        .collect()
}

/// Negative control: eigenvalues of `((Aτ,τ) + ‖div τ‖²) / ⟨τ,τ⟩_Σ` on a clamped
/// mesh, i.e. the energy measured in the plain norm. The minimum collapses like
/// `2μ / (2μ + nλ)` along the identity.
pub fn clamped_plain_pencil(n: usize, lambdas: &[f64]) -> Result<Vec<SpectralRow>> {
    let disc = Discretization::new(n, BcMode::Clamped)?;
    let forms = StressForms::new(&disc);
    let b = forms.sigma_riesz(0.5).to_dense();
    lambdas
        .iter()
        .map(|&lambda| {
            let e = energy(&forms, &params_for(lambda)?).to_dense();
            let mu = dense_sym_geig(&e, &b)?;
            Ok(SpectralRow {
                lambda,
                eig_min: mu[0],
                eig_max: mu[mu.len() - 1],
            })
        })
        .collect()
}

/// `Tᵀ X T`
fn congruence(x: &DenseMatrix, t: &DenseMatrix) -> DenseMatrix {
    let mut out = t.transpose().matmul(&x.matmul(t).expect("square")).expect("square");
    out.symmetrize();
    out
}

/// Discrete inf-sup constant: smallest `|θ|` of `𝓐 x = θ 𝓝 x`, with 𝓝 the
/// block-diagonal norm matrix (𝗣 or 𝗕, the pressure block, and the two mass
/// matrices). The pinned pressure dof is removed.
pub fn check_infsup(n: usize, params: &ParameterSet, mode: BcMode) -> Result<f64> {
    let disc = Discretization::new(n, mode)?;
    let forms = StressForms::new(&disc);
    let f = vec![0.0; disc.displacement.ndof()];
    let g = vec![0.0; disc.pressure.ndof()];
    let sys = assemble_system_from(&disc, &forms, params, true, &f, &g)?;
    let off = sys.offsets();
    let ns = sys.sizes[0];

    let mut norm = DenseMatrix::zeros(sys.dim(), sys.dim());
    let stress_norm = match mode {
        BcMode::Mixed => {
            let free = disc.free_stress();
            forms.sigma_riesz(params.mu).submatrix(free, free).to_dense()
        }
        BcMode::Clamped => aux_riesz_from(&forms, params, disc.mesh.domain_area()).to_dense(),
    };
    let pressure = sys.pressure.to_dense();
    let mu_mass = displacement_mass(&disc);
    let rot_mass = rotation_mass(&disc);
    for i in 0..ns {
        for j in 0..ns {
            norm[(i, j)] = stress_norm[(i, j)];
        }
    }
    for i in 0..sys.sizes[1] {
        for j in 0..sys.sizes[1] {
            norm[(off[1] + i, off[1] + j)] = pressure[(i, j)];
        }
    }
    for (i, v) in mu_mass.iter().enumerate() {
        norm[(off[2] + i, off[2] + i)] = *v;
    }
    for (i, v) in rot_mass.iter().enumerate() {
        norm[(off[3] + i, off[3] + i)] = *v;
    }
    let mut op = sys.matrix.to_dense();

    if mode == BcMode::Clamped {
        // Basis [ŵ | complement of m] for the stress block keeps 𝓝 well
        // conditioned: ŵ is the identity scaled to unit auxiliary norm.
        let w = interpolate_identity(&disc.stress, &disc.mesh)?;
        let m = forms.m_vector(disc.mesh.domain_area());
        let (_, aux_id) = identity_field_forms(&disc, params);
        let scale = 1.0 / aux_id.sqrt();
        let v = householder_for(&m);
        let mut t = DenseMatrix::identity(sys.dim());
        for i in 0..ns {
            t[(i, 0)] = scale * w[i];
            for j in 1..ns {
                let h = if i == j { 1.0 } else { 0.0 } - 2.0 * v[i] * v[j];
                t[(i, j)] = h;
            }
        }
        op = congruence(&op, &t);
        norm = congruence(&norm, &t);
    }

    let keep: Vec<usize> = match disc.pressure.pinned_dof() {
        Some(p) => (0..sys.dim()).filter(|&i| i != off[1] + p).collect(),
        None => (0..sys.dim()).collect(),
    };
    let theta = dense_sym_geig(&op.principal(&keep), &norm.principal(&keep))?;
    Ok(theta.iter().fold(f64::INFINITY, |acc, t| acc.min(t.abs())))
}

/// Elasticity-stability constant: the smallest `C` with `‖τ‖_div ≤ C ‖(u, γ)‖`
/// for the least-norm `τ` solving `(div τ, v) = (u, v)` and `(τ, η) = (γ, η)`.
/// Equals `1 / √(min eig(G H⁻¹ Gᵀ, M))` where `G` stacks div and skew, `H` is the
/// `H(div)` Gram matrix and `M` the mass matrix of `(u, γ)`.
pub fn elasticity_stability_constant(n: usize, mode: BcMode) -> Result<f64> {
    let (g, h, mass) = elasticity_operators(n, mode)?;
    let hinv_gt = h.solve_many(&g.transpose())?;
    let mut s = g.matmul(&hinv_gt)?;
    s.symmetrize();
    let eig = dense_sym_geig(&s, &DenseMatrix::from_diagonal(&mass))?;
    Ok(1.0 / eig[0].sqrt())
}

/// `(G, H, diag M)` for [`elasticity_stability_constant`].
pub fn elasticity_operators(n: usize, mode: BcMode) -> Result<(DenseMatrix, DenseMatrix, Vec<f64>)> {
    let disc = Discretization::new(n, mode)?;
    let forms = StressForms::new(&disc);
    let free = disc.free_stress();
    let nu = disc.displacement.ndof();
    let ng = disc.rotation.ndof();
    let div = forms.div.submatrix(&(0..nu).collect::<Vec<_>>(), free).to_dense();
    let skw = forms.skw.submatrix(&(0..ng).collect::<Vec<_>>(), free).to_dense();
    let mut g = DenseMatrix::zeros(nu + ng, free.len());
    for j in 0..free.len() {
        for i in 0..nu {
            g[(i, j)] = div[(i, j)];
        }
        for i in 0..ng {
            g[(nu + i, j)] = skw[(i, j)];
        }
    }
    let h = forms
        .mass
        .lin_comb(1.0, &forms.divdiv, 1.0)?
        .submatrix(free, free)
        .to_dense();
    let mut mass = displacement_mass(&disc);
    mass.extend(rotation_mass(&disc));
    Ok((g, h, mass))
}

fn spread(values: impl Iterator<Item = f64>) -> f64 {
    let (lo, hi) = values.fold((f64::INFINITY, 0.0f64), |(lo, hi), v| (lo.min(v), hi.max(v)));
    hi / lo
}

/// Default sweeps for the command-line verification run.
#[derive(Debug, Clone)]
pub struct VerifyConfig {
    pub spectral_n: usize,
    pub spectral_lambdas: Vec<f64>,
    pub infsup_n: Vec<usize>,
    pub infsup_lambdas: Vec<f64>,
    pub infsup_alphas: Vec<f64>,
    pub infsup_kappas: Vec<f64>,
    pub stability_n: Vec<usize>,
}

impl Default for VerifyConfig {
    fn default() -> Self {
        Self {
            spectral_n: 4,
            spectral_lambdas: vec![1e-4, 1e-2, 1.0, 1e2, 1e4, 1e8, 1e12],
            infsup_n: vec![2, 4],
            infsup_lambdas: vec![1.0, 1e4, 1e8],
            infsup_alphas: vec![1.0, 1e-4],
            infsup_kappas: vec![1.0, 1e-4],
            stability_n: vec![1, 2, 4],
        }
    }
}

/// Inf-sup constants over the full parameter grid, in grid order
/// `(n, lambda, alpha, kappa)`.
pub fn infsup_sweep(config: &VerifyConfig, mode: BcMode) -> Result<Vec<(usize, ParameterSet, f64)>> {
    let mut points = Vec::new();
    for &n in &config.infsup_n {
        for &lambda in &config.infsup_lambdas {
            for &alpha in &config.infsup_alphas {
                for &kappa in &config.infsup_kappas {
                    points.push((n, ParameterSet::new(lambda, alpha, Conductivity::Constant(kappa))?));
                }
            }
        }
    }
    let betas = crate::par_map(points.len(), |i| check_infsup(points[i].0, &points[i].1, mode));
    points
        .into_iter()
        .zip(betas)
        .map(|((n, p), b)| Ok((n, p, b?)))
        .collect()
}

/// Runs every check and returns one row per parameter point plus one summary
/// row per robustness property.
pub fn run_verification(config: &VerifyConfig) -> Result<Vec<CheckRow>> {
    let mut rows = Vec::new();
    let n = config.spectral_n;
    for (name, table) in [
        (
            "spectral_nonclamped",
            check_spectral_equivalence_nonclamped(n, &config.spectral_lambdas)?,
        ),
        (
            "spectral_clamped",
            check_spectral_equivalence_clamped(n, &config.spectral_lambdas)?,
        ),
    ] {
        for r in &table {
            rows.push(CheckRow::new(
                &format!("{name}_lower"),
                format!("N={n};lambda={:e}", r.lambda),
                r.eig_min,
                r.eig_min >= 1.0 - 1e-10,
            ));
        }
        let s = spread(table.iter().map(|r| r.eig_max));
        rows.push(CheckRow::new(
            &format!("{name}_upper_spread"),
            format!("N={n}"),
            s,
            s <= 2.0,
        ));
    }
    let control = clamped_plain_pencil(n, &config.spectral_lambdas)?;
    if let Some(last) = control.iter().max_by(|a, b| a.lambda.total_cmp(&b.lambda)) {
        rows.push(CheckRow::new(
            "plain_norm_clamped_min",
            format!("N={n};lambda={:e}", last.lambda),
            last.eig_min,
            last.eig_min < 1e-8,
        ));
    }
    for mode in [BcMode::Clamped, BcMode::Mixed] {
        let sweep = infsup_sweep(config, mode)?;
        for (n, p, beta) in &sweep {
            rows.push(CheckRow::new(
                &format!("infsup_{}", mode.as_str()),
                format!(
                    "N={n};lambda={:e};alpha={:e};kappa={:e}",
                    p.lambda,
                    p.alpha,
                    p.kappa.value()
                ),
                *beta,
                *beta > 0.0,
            ));
        }
        let s = spread(sweep.iter().map(|x| x.2));
        rows.push(CheckRow::new(
            &format!("infsup_{}_spread", mode.as_str()),
            "all".into(),
            s,
            s <= 2.0,
        ));
    }
    for mode in [BcMode::Clamped, BcMode::Mixed] {
        let consts: Vec<f64> = config
            .stability_n
            .iter()
            .map(|&n| elasticity_stability_constant(n, mode))
            .collect::<Result<_>>()?;
        for (&n, c) in config.stability_n.iter().zip(&consts) {
            rows.push(CheckRow::new(
                &format!("elasticity_stable_{}", mode.as_str()),
                format!("N={n}"),
                *c,
                c.is_finite(),
            ));
        }
        let s = spread(consts.iter().copied());
        rows.push(CheckRow::new(
            &format!("elasticity_stable_{}_spread", mode.as_str()),
            "all".into(),
            s,
            s <= 2.0,
        ));
    }
    Ok(rows)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sparsela::{dot, DenseMatrix};

    #[test]
    fn nonclamped_lower_extreme_is_one() {
        let rows = check_spectral_equivalence_nonclamped(2, &[1e-4, 1.0, 1e8]).unwrap();
        for r in &rows {
            assert!(r.eig_min >= 1.0 - 1e-10);
        }
        // Nearly incompressible-free: λ → 0 makes both forms coincide.
        let r0 = check_spectral_equivalence_nonclamped(2, &[1e-12]).unwrap()[0];
        assert!((r0.eig_max - 1.0).abs() < 1e-9 && (r0.eig_min - 1.0).abs() < 1e-9);
    }

    #[test]
    fn clamped_split_matches_direct_pencil_at_moderate_lambda() {
        // Oracle: the unsplit pencil with the dense auxiliary matrix.
        let disc = Discretization::new(2, BcMode::Clamped).unwrap();
        let forms = StressForms::new(&disc);
        for lambda in [1e-2, 1.0, 1e2] {
            let p = params_for(lambda).unwrap();
            let aux = aux_riesz_from(&forms, &p, 1.0).to_dense();
            let e = energy(&forms, &p).to_dense();
            let mu = dense_sym_geig(&e, &aux).unwrap();
            let row = check_spectral_equivalence_clamped(2, &[lambda]).unwrap()[0];
            assert!((row.eig_max - 1.0 / mu[0]).abs() <= 1e-9 * row.eig_max);
            assert!((row.eig_min - 1.0 / mu[mu.len() - 1]).abs() <= 1e-9);
        }
    }

    #[test]
    fn identity_direction_has_unit_ratio() {
        let disc = Discretization::new(3, BcMode::Clamped).unwrap();
        let forms = StressForms::new(&disc);
        let w = interpolate_identity(&disc.stress, &disc.mesh).unwrap();
        let m = forms.m_vector(1.0);
        for lambda in [1e-4, 1.0, 1e3] {
            let p = params_for(lambda).unwrap();
            let expect = 2.0 / p.bulk_denominator();
            let (a_id, aux_id) = identity_field_forms(&disc, &p);
            assert!(
                (a_id - expect).abs() <= 1e-12 * expect && (aux_id - expect).abs() <= 1e-12 * expect,
                "{a_id} {aux_id} {expect}"
            );
            let ew = energy(&forms, &p).spmv(&w).unwrap();
            let pw = aux_riesz_from(&forms, &p, 1.0).to_dense().matvec(&w).unwrap();
            assert!((dot(&w, &ew) - expect).abs() <= 1e-10 * expect);
            assert!((dot(&w, &pw) - expect).abs() <= 1e-10 * expect);
            // Both images are parallel to m.
            let c = expect / 2f64.sqrt();
            for i in 0..m.len() {
                assert!((ew[i] - c * m[i]).abs() <= 1e-12);
                assert!((pw[i] - c * m[i]).abs() <= 1e-12);
            }
        }
    }

    #[test]
    fn negative_control_collapses() {
        let rows = clamped_plain_pencil(2, &[1.0, 1e6, 1e12]).unwrap();
        for r in &rows {
            let expect = 1.0 / (1.0 + 2.0 * r.lambda);
            assert!((r.eig_min - expect).abs() <= 1e-6 * expect + 1e-14, "{r:?}");
        }
    }

    #[test]
    fn infsup_positive() {
        let p = ParameterSet::new(1.0, 1.0, Conductivity::Constant(1.0)).unwrap();
        for mode in [BcMode::Clamped, BcMode::Mixed] {
            let b = check_infsup(1, &p, mode).unwrap();
            assert!(b > 0.0 && b <= 1.0 + 1e-12, "{mode:?}: {b}");
        }
    }

    #[test]
    fn infsup_transform_is_a_congruence() {
        // At moderate λ the clamped estimate must agree with the untransformed
        // dense generalized eigenproblem.
        let n = 1;
        let p = ParameterSet::new(3.0, 0.5, Conductivity::Constant(0.2)).unwrap();
        let disc = Discretization::new(n, BcMode::Clamped).unwrap();
        let forms = StressForms::new(&disc);
        let sys = assemble_system_from(&disc, &forms, &p, true, &[0.0; 4], &[0.0; 4]).unwrap();
        let off = sys.offsets();
        let mut norm = DenseMatrix::zeros(sys.dim(), sys.dim());
        let aux = aux_riesz_from(&forms, &p, 1.0).to_dense();
        for i in 0..sys.sizes[0] {
            for j in 0..sys.sizes[0] {
                norm[(i, j)] = aux[(i, j)];
            }
        }
        let pb = sys.pressure.to_dense();
        for i in 0..4 {
            for j in 0..4 {
                norm[(off[1] + i, off[1] + j)] = pb[(i, j)];
            }
        }
        for i in 0..4 {
            norm[(off[2] + i, off[2] + i)] = 0.5;
        }
        for i in 0..2 {
            norm[(off[3] + i, off[3] + i)] = 1.0;
        }
        let keep: Vec<usize> = (0..sys.dim()).filter(|&i| i != off[1]).collect();
        let theta = dense_sym_geig(&sys.matrix.to_dense().principal(&keep), &norm.principal(&keep)).unwrap();
        let direct = theta.iter().fold(f64::INFINITY, |a, t| a.min(t.abs()));
        let beta = check_infsup(n, &p, BcMode::Clamped).unwrap();
        assert!((beta - direct).abs() <= 1e-9 * direct);
    }

    #[test]
    fn least_norm_lift_respects_constant() {
        use crate::krylov::seeded_random_vector;
        let (g, h, mass) = elasticity_operators(2, BcMode::Clamped).unwrap();
        let c = elasticity_stability_constant(2, BcMode::Clamped).unwrap();
        let s = {
            let mut s = g.matmul(&h.solve_many(&g.transpose()).unwrap()).unwrap();
            s.symmetrize();
            s
        };
        for seed in 0..10 {
            let x = seeded_random_vector(mass.len(), seed);
            let r: Vec<f64> = x.iter().zip(&mass).map(|(a, b)| a * b).collect();
            let y = s.solve(&r).unwrap();
            let tau = h.solve(&g.transpose().matvec(&y).unwrap()).unwrap();
            // constraints hold
            let gt = g.matvec(&tau).unwrap();
            assert!(gt.iter().zip(&r).all(|(a, b)| (a - b).abs() < 1e-10));
            let tau_norm = dot(&tau, &h.matvec(&tau).unwrap()).sqrt();
            let data_norm = x.iter().zip(&mass).map(|(a, m)| a * a * m).sum::<f64>().sqrt();
            assert!(tau_norm <= c * data_norm * (1.0 + 1e-10));
        }
    }

    #[test]
    fn csv_layout() {
        let rows = vec![CheckRow::new("a", "N=1".into(), 1.5, true)];
        assert_eq!(rows_to_csv(&rows), "check,point,value,pass\na,N=1,1.500000e0,pass\n");
        assert_eq!(rows_to_csv(&[]), "check,point,value,pass\n");
    }
}
