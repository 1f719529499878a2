//! Browser bindings. Every export returns a JSON string; errors come back as a
//! thrown string.

use biot_core::assembly::ParameterSet;
use biot_core::experiments::{build_block_problem, Case, Level, Sweep};
use biot_core::krylov::{pminres, seeded_random_vector};
use biot_core::mesh::{build_unit_square_mesh, BcMode};
use biot_core::verify::{check_spectral_equivalence_clamped, check_spectral_equivalence_nonclamped};
use serde_json::json;
use wasm_bindgen::prelude::*;

const MAX_SOLVE_N: usize = 32;
const MAX_DENSE_N: usize = 4;

fn parse_bc(bc: &str) -> Result<BcMode, String> {
    bc.parse().map_err(|e: biot_core::BiotError| e.to_string())
}

fn case_from(number: u8) -> Result<Case, String> {
    match number {
        1 => Ok(Case::One),
        2 => Ok(Case::Two),
        3 => Ok(Case::Three),
        4 => Ok(Case::Four),
        other => Err(format!("unknown case {other}")),
    }
}

pub fn mesh_json(n: usize) -> Result<String, String> {
    let mesh = build_unit_square_mesh(n).map_err(|e| e.to_string())?;
    Ok(json!({ "vertices": mesh.vertices(), "cells": mesh.cells() }).to_string())
}

/// Solves one parameter point. Cases 2–4 also return the cellwise displacement.
pub fn solve_json(
    case: u8,
    bc: &str,
    n: usize,
    lambda: f64,
    alpha: f64,
    kappa: f64,
    seed: u64,
) -> Result<String, String> {
    if n == 0 || n > MAX_SOLVE_N {
        return Err(format!("N must be in 1..={MAX_SOLVE_N}"));
    }
    let case = case_from(case)?;
    let bc = parse_bc(bc)?;
    let sweep = Sweep {
        bc,
        ns: vec![n],
        lambdas: vec![lambda],
        alphas: vec![alpha],
        kappas: vec![kappa],
        seed,
        ..Sweep::default_for(case)
    };
    if case == Case::One {
        let rows = biot_core::experiments::run_sweep(&sweep).map_err(|e| e.to_string())?;
        let row = &rows[0];
        if let Some(err) = &row.error {
            return Err(err.clone());
        }
        return Ok(json!({ "report": row.report, "displacement": null }).to_string());
    }
    if bc != BcMode::Clamped {
        return Err(format!("case {} is defined for clamped boundaries only", case.number()));
    }
    let params = match case {
        Case::Two => ParameterSet::elasticity(lambda),
        Case::Three => ParameterSet::new(lambda, alpha, biot_core::assembly::Conductivity::Constant(kappa)),
        _ => ParameterSet::new(lambda, alpha, biot_core::assembly::Conductivity::Layered(kappa)),
    }
    .map_err(|e| e.to_string())?;
    let level = Level::new(n, bc).map_err(|e| e.to_string())?;
    let (sys, precond) = build_block_problem(&level, &params, case != Case::Two, seed).map_err(|e| e.to_string())?;
    let x0 = seeded_random_vector(sys.dim(), seed.wrapping_add(1));
    let (x, report) = pminres(&sys, &precond, &sys.rhs, &x0, sweep.tol, sweep.maxiter).map_err(|e| e.to_string())?;
    let off = sys.offsets()[2];
    let u: Vec<[f64; 2]> = (0..level.disc.mesh.num_cells())
        .map(|c| [x[off + 2 * c], x[off + 2 * c + 1]])
        .collect();
    Ok(json!({ "report": report, "displacement": u }).to_string())
}

/// Extremes of the stress-norm pencil over a list of `lambda`.
pub fn spectral_json(bc: &str, n: usize, lambdas: &[f64]) -> Result<String, String> {
    if n == 0 || n > MAX_DENSE_N {
        return Err(format!("N must be in 1..={MAX_DENSE_N} for dense eigenvalues"));
    }
    let rows = match parse_bc(bc)? {
        BcMode::Mixed => check_spectral_equivalence_nonclamped(n, lambdas),
        BcMode::Clamped => check_spectral_equivalence_clamped(n, lambdas),
    }
    .map_err(|e| e.to_string())?;
    Ok(json!(rows).to_string())
}

#[wasm_bindgen]
pub fn mesh(n: usize) -> Result<String, JsValue> {
    mesh_json(n).map_err(|e| JsValue::from_str(&e))
}

#[wasm_bindgen]
pub fn solve(case: u8, bc: &str, n: usize, lambda: f64, alpha: f64, kappa: f64, seed: u32) -> Result<String, JsValue> {
    solve_json(case, bc, n, lambda, alpha, kappa, seed as u64).map_err(|e| JsValue::from_str(&e))
}

#[wasm_bindgen]
pub fn spectral(bc: &str, n: usize, lambdas: Vec<f64>) -> Result<String, JsValue> {
    spectral_json(bc, n, &lambdas).map_err(|e| JsValue::from_str(&e))
}
