//! Preconditioned conjugate gradients and MINRES, stopping on the relative
//! preconditioned residual `√((B r_k, r_k) / (B r_0, r_0))`.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{check_dim, BiotError, Result};
use crate::sparsela::{axpy, dot, LinearOperator};

/// How often MINRES recomputes the true residual.
pub const TRUE_RESIDUAL_INTERVAL: usize = 25;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KrylovReport {
    pub iterations: usize,
    /// Relative preconditioned residual per iteration; entry 0 is 1.
    pub residual_history: Vec<f64>,
    pub converged: bool,
    pub tolerance: f64,
    /// Relative preconditioned norm of `b - A x` for the returned `x`.
    pub true_residual: f64,
    /// `(iteration, true relative residual)` pairs recorded along the way.
    pub true_residual_checks: Vec<(usize, f64)>,
}

impl KrylovReport {
    pub fn final_residual(&self) -> f64 {
        *self.residual_history.last().unwrap_or(&0.0)
    }
}

/// Deterministic uniform(-1, 1) entries.
pub fn seeded_random_vector(ndof: usize, seed: u64) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..ndof).map(|_| rng.random_range(-1.0..1.0)).collect()
}

fn check_inputs(op: &dyn LinearOperator, precond: &dyn LinearOperator, rhs: &[f64], x0: &[f64]) -> Result<()> {
    let n = op.dim();
    check_dim(n, precond.dim(), "preconditioner")?;
    check_dim(n, rhs.len(), "right-hand side")?;
    check_dim(n, x0.len(), "initial guess")
}

fn preconditioned_norm(precond: &dyn LinearOperator, r: &[f64]) -> f64 {
    dot(&precond.apply_vec(r), r).max(0.0).sqrt()
}

fn residual(op: &dyn LinearOperator, rhs: &[f64], x: &[f64]) -> Vec<f64> {
    let mut r = op.apply_vec(x);
    for (ri, bi) in r.iter_mut().zip(rhs) {
        *ri = bi - *ri;
    }
    r
}

/// Preconditioned CG. Negative or zero curvature is reported as an error.
pub fn pcg(
    op: &dyn LinearOperator,
    precond: &dyn LinearOperator,
    rhs: &[f64],
    x0: &[f64],
    tol: f64,
    maxiter: usize,
) -> Result<(Vec<f64>, KrylovReport)> {
    check_inputs(op, precond, rhs, x0)?;
    let n = op.dim();
    let mut x = x0.to_vec();
    let mut r = residual(op, rhs, &x);
    let mut z = precond.apply_vec(&r);
    let mut rz = dot(&r, &z);
    let rz0 = rz;
    let mut history = vec![1.0];
    let mut converged = rz0 <= 0.0;
    let mut p = z.clone();
    let mut q = vec![0.0; n];
    let mut it = 0;
    while !converged && it < maxiter {
        it += 1;
        op.apply(&p, &mut q);
        let curvature = dot(&p, &q);
        if !(curvature > 0.0) {
            return Err(BiotError::NegativeCurvature {
                iteration: it,
                curvature,
            });
        }
        let alpha = rz / curvature;
        axpy(alpha, &p, &mut x);
        axpy(-alpha, &q, &mut r);
        precond.apply(&r, &mut z);
        let rz_new = dot(&r, &z);
        let rel = (rz_new.max(0.0) / rz0).sqrt();
        history.push(rel);
        converged = rel <= tol;
        let beta = rz_new / rz;
        rz = rz_new;
        for (pi, zi) in p.iter_mut().zip(&z) {
            *pi = zi + beta * *pi;
        }
    }
    let true_residual = if rz0 > 0.0 {
        preconditioned_norm(precond, &residual(op, rhs, &x)) / rz0.sqrt()
    } else {
        0.0
    };
    Ok((
        x,
        KrylovReport {
            iterations: it,
            residual_history: history,
            converged,
            tolerance: tol,
            true_residual,
            true_residual_checks: vec![(it, true_residual)],
        },
    ))
}

/// Preconditioned MINRES for symmetric, possibly indefinite operators with an
/// SPD preconditioner. Lanczos vectors are kept unnormalized in the dual space
/// and the residual norm is tracked through the Givens recurrence.
pub fn pminres(
    op: &dyn LinearOperator,
    precond: &dyn LinearOperator,
    rhs: &[f64],
    x0: &[f64],
    tol: f64,
    maxiter: usize,
) -> Result<(Vec<f64>, KrylovReport)> {
    check_inputs(op, precond, rhs, x0)?;
    let n = op.dim();
    let mut x = x0.to_vec();
    let mut v = residual(op, rhs, &x);
    let mut z = precond.apply_vec(&v);
    let gamma1 = dot(&z, &v);
    if gamma1 < 0.0 {
        return Err(BiotError::InvalidState(
            "preconditioner is not positive definite".into(),
        ));
    }
    let gamma1 = gamma1.sqrt();
    let mut history = vec![1.0];
    let mut checks = Vec::new();
    if gamma1 == 0.0 {
        return Ok((
            x,
            KrylovReport {
                iterations: 0,
                residual_history: history,
                converged: true,
                tolerance: tol,
                true_residual: 0.0,
                true_residual_checks: checks,
            },
        ));
    }
    let mut v_old = vec![0.0; n];
    let mut w = vec![0.0; n];
    let mut w_old = vec![0.0; n];
    let mut az = vec![0.0; n];
    let (mut gamma, mut gamma_old) = (gamma1, 1.0);
    let mut eta = gamma1;
    let (mut c, mut c_old, mut s, mut s_old) = (1.0, 1.0, 0.0, 0.0);
    let mut converged = false;
    let mut it = 0;
    while it < maxiter {
        it += 1;
        for zi in z.iter_mut() {
            *zi /= gamma;
        }
        op.apply(&z, &mut az);
        let delta = dot(&az, &z);
        let mut v_new = az.clone();
        axpy(-delta / gamma, &v, &mut v_new);
        axpy(-gamma / gamma_old, &v_old, &mut v_new);
        let z_new = precond.apply_vec(&v_new);
        let gnew2 = dot(&z_new, &v_new);
        if gnew2 < 0.0 {
            return Err(BiotError::InvalidState(
                "preconditioner is not positive definite".into(),
            ));
        }
        let gamma_new = gnew2.sqrt();

        let alpha0 = c * delta - c_old * s * gamma;
        let alpha1 = (alpha0 * alpha0 + gamma_new * gamma_new).sqrt();
        let alpha2 = s * delta + c_old * c * gamma;
        let alpha3 = s_old * gamma;
        let c_new = alpha0 / alpha1;
        let s_new = gamma_new / alpha1;
        let mut w_new = z.clone();
        axpy(-alpha3, &w_old, &mut w_new);
        axpy(-alpha2, &w, &mut w_new);
        for wi in w_new.iter_mut() {
            *wi /= alpha1;
        }
        axpy(c_new * eta, &w_new, &mut x);
        eta *= -s_new;

        let rel = eta.abs() / gamma1;
        history.push(rel);
        converged = rel <= tol;
        if it % TRUE_RESIDUAL_INTERVAL == 0 || converged {
            checks.push((it, preconditioned_norm(precond, &residual(op, rhs, &x)) / gamma1));
        }
        if converged || gamma_new == 0.0 {
            converged = converged || gamma_new == 0.0;
            break;
        }

        v_old = std::mem::replace(&mut v, v_new);
        z = z_new;
        w_old = std::mem::replace(&mut w, w_new);
        gamma_old = gamma;
        gamma = gamma_new;
        c_old = c;
        c = c_new;
        s_old = s;
        s = s_new;
    }
    let true_residual = preconditioned_norm(precond, &residual(op, rhs, &x)) / gamma1;
    if checks.last().map(|&(i, _)| i) != Some(it) {
        checks.push((it, true_residual));
    }
    Ok((
        x,
        KrylovReport {
            iterations: it,
            residual_history: history,
            converged,
            tolerance: tol,
            true_residual,
            true_residual_checks: checks,
        },
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sparsela::{CsrMatrix, Diagonal, Identity};
    use proptest::prelude::*;

    fn diag_op(d: &[f64]) -> CsrMatrix {
        CsrMatrix::from_diagonal(d)
    }

    #[test]
    fn random_vectors_are_seeded() {
        assert_eq!(seeded_random_vector(50, 3), seeded_random_vector(50, 3));
        assert_ne!(seeded_random_vector(50, 3), seeded_random_vector(50, 4));
        let v = seeded_random_vector(100_000, 0);
        assert!(v.iter().all(|x| (-1.0..1.0).contains(x)));
        let mean = v.iter().sum::<f64>() / v.len() as f64;
        // σ of the sample mean = √(1/3) / √n
        assert!(mean.abs() < 3.0 * (1.0f64 / 3.0).sqrt() / (v.len() as f64).sqrt());
    }

    #[test]
    fn pcg_identity_takes_one_step() {
        let b = seeded_random_vector(10, 1);
        let (x, rep) = pcg(&Identity(10), &Identity(10), &b, &[0.0; 10], 1e-9, 50).unwrap();
        assert_eq!(rep.iterations, 1);
        assert!(rep.converged);
        assert!(x.iter().zip(&b).all(|(a, b)| (a - b).abs() < 1e-14));
    }

    #[test]
    fn pcg_exact_preconditioner_takes_one_step() {
        let d: Vec<f64> = (1..=20).map(|i| i as f64 * 0.7).collect();
        let inv = Diagonal(d.iter().map(|v| 1.0 / v).collect());
        let b = seeded_random_vector(20, 2);
        let x0 = seeded_random_vector(20, 3);
        let (_, rep) = pcg(&diag_op(&d), &inv, &b, &x0, 1e-9, 50).unwrap();
        assert_eq!(rep.iterations, 1);
    }

    #[test]
    fn pcg_distinct_eigenvalue_termination() {
        for k in [1usize, 2, 5] {
            let d: Vec<f64> = (0..40).map(|i| 1.0 + (i % k) as f64).collect();
            let b = seeded_random_vector(40, k as u64);
            let (_, rep) = pcg(&diag_op(&d), &Identity(40), &b, &[0.0; 40], 1e-10, 100).unwrap();
            assert!(rep.iterations <= k, "k={k}: {}", rep.iterations);
        }
    }

    #[test]
    fn pcg_detects_indefinite_operator() {
        let d = [1.0, -1.0, 2.0];
        let err = pcg(&diag_op(&d), &Identity(3), &[1.0, 1.0, 0.0], &[0.0; 3], 1e-9, 10).unwrap_err();
        assert!(matches!(err, BiotError::NegativeCurvature { .. }));
    }

    #[test]
    fn pcg_dimension_checks() {
        assert!(pcg(&Identity(3), &Identity(4), &[0.0; 3], &[0.0; 3], 1e-9, 5).is_err());
        assert!(pminres(&Identity(3), &Identity(3), &[0.0; 2], &[0.0; 3], 1e-9, 5).is_err());
    }

    #[test]
    fn minres_two_point_spectrum() {
        let d: Vec<f64> = (0..10).map(|i| if i % 2 == 0 { 1.0 } else { -1.0 }).collect();
        let b = seeded_random_vector(10, 5);
        let (x, rep) = pminres(&diag_op(&d), &Identity(10), &b, &[0.0; 10], 1e-12, 20).unwrap();
        assert!(rep.converged && rep.iterations <= 2);
        for i in 0..10 {
            assert!((x[i] - b[i] * d[i]).abs() < 1e-12);
        }
    }

    #[test]
    fn minres_matches_direct_solution_on_indefinite_system() {
        // Saddle point [[I, Bᵀ], [B, 0]] with B = [1 1 0 0; 0 0 1 -1].
        let trip = vec![
            (0, 0, 2.0),
            (1, 1, 1.0),
            (2, 2, 3.0),
            (3, 3, 1.5),
            (4, 0, 1.0),
            (4, 1, 1.0),
            (0, 4, 1.0),
            (1, 4, 1.0),
            (5, 2, 1.0),
            (5, 3, -1.0),
            (2, 5, 1.0),
            (3, 5, -1.0),
        ];
        let m = CsrMatrix::from_triplets(6, 6, &trip);
        let b = seeded_random_vector(6, 9);
        let x0 = seeded_random_vector(6, 10);
        let pre = Diagonal(vec![0.5, 1.0, 1.0 / 3.0, 1.0 / 1.5, 1.0, 1.0]);
        let (x, rep) = pminres(&m, &pre, &b, &x0, 1e-12, 50).unwrap();
        assert!(rep.converged);
        let exact = m.to_dense().solve(&b).unwrap();
        for i in 0..6 {
            assert!((x[i] - exact[i]).abs() < 1e-9);
        }
        assert!(rep.true_residual <= 10.0 * 1e-12);
    }

    #[test]
    fn minres_history_is_monotone() {
        let d: Vec<f64> = (0..60)
            .map(|i| if i % 3 == 0 { -(i as f64) - 1.0 } else { i as f64 + 0.5 })
            .collect();
        let b = seeded_random_vector(60, 1);
        let (_, rep) = pminres(&diag_op(&d), &Identity(60), &b, &[0.0; 60], 1e-10, 200).unwrap();
        assert!(rep.converged);
        assert!(rep.residual_history.windows(2).all(|w| w[1] <= w[0] * (1.0 + 1e-12)));
        assert!(rep.true_residual <= 10.0 * 1e-10);
    }

    #[test]
    fn minres_spd_is_comparable_to_pcg() {
        let d: Vec<f64> = (0..80).map(|i| 1.0 + (i as f64).sqrt()).collect();
        let b = seeded_random_vector(80, 4);
        let (_, cg) = pcg(&diag_op(&d), &Identity(80), &b, &[0.0; 80], 1e-9, 200).unwrap();
        let (_, mr) = pminres(&diag_op(&d), &Identity(80), &b, &[0.0; 80], 1e-9, 200).unwrap();
        assert!(mr.converged && cg.converged);
        assert!(mr.iterations + 3 >= cg.iterations);
    }

    #[test]
    fn maxiter_reports_nonconvergence() {
        let d: Vec<f64> = (1..=50).map(|i| i as f64).collect();
        let b = seeded_random_vector(50, 2);
        let (_, rep) = pminres(&diag_op(&d), &Identity(50), &b, &[0.0; 50], 1e-14, 3).unwrap();
        assert!(!rep.converged);
        assert_eq!(rep.iterations, 3);
    }

    #[test]
    fn zero_residual_start() {
        let b = vec![1.0; 4];
        let (_, rep) = pminres(&Identity(4), &Identity(4), &b, &b, 1e-9, 10).unwrap();
        assert_eq!(rep.iterations, 0);
        assert!(rep.converged);
        let (_, rep) = pcg(&Identity(4), &Identity(4), &b, &b, 1e-9, 10).unwrap();
        assert_eq!(rep.iterations, 0);
    }

    proptest! {
        #[test]
        fn iteration_counts_are_scale_invariant(scale in 1e-6f64..1e6, seed in 0u64..1000) {
            // Six clustered eigenvalues: convergence is abrupt, far from the tolerance.
            let vals = [-3.0, -1.0, 1.0, 2.0, 5.0, 8.0];
            let d: Vec<f64> = (0..30).map(|i| vals[i % 6]).collect();
            let op = diag_op(&d);
            let b = seeded_random_vector(30, seed);
            let bs: Vec<f64> = b.iter().map(|v| v * scale).collect();
            let (_, r1) = pminres(&op, &Identity(30), &b, &[0.0; 30], 1e-9, 100).unwrap();
            let (_, r2) = pminres(&op, &Identity(30), &bs, &[0.0; 30], 1e-9, 100).unwrap();
            prop_assert_eq!(r1.iterations, r2.iterations);
            let dp: Vec<f64> = d.iter().map(|v| v.abs()).collect();
            let op = diag_op(&dp);
            let (_, r1) = pcg(&op, &Identity(30), &b, &[0.0; 30], 1e-9, 100).unwrap();
            let (_, r2) = pcg(&op, &Identity(30), &bs, &[0.0; 30], 1e-9, 100).unwrap();
            prop_assert_eq!(r1.iterations, r2.iterations);
        }
    }
}
