//! Iteration-count sweeps for the four model problems and their tables.
//!
//! * Case 1: stress-only Riesz problem `(Aσ, τ) + (div σ, div τ)`, PCG.
//! * Case 2: mixed elasticity with weak symmetry, clamped, PMINRES.
//! * Case 3: the full Biot system, clamped displacement, pinned pressure.
//! * Case 4: as Case 3 with a layered conductivity.
//!
//! Right-hand sides and initial guesses are seeded uniform(-1, 1) vectors; the
//! initial guess uses `seed + 1`. 𝗕 does not depend on the parameters, so it is
//! factored once per mesh and shared across the sweep.

use std::fmt::Write as _;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::assembly::{assemble_system_from, BlockSystem, Conductivity, ParameterSet, StressForms};
use crate::error::{BiotError, Result};
use crate::krylov::{pcg, pminres, seeded_random_vector, KrylovReport};
use crate::mesh::BcMode;
use crate::precond::{factor_sigma_riesz, stress_precond, BlockPrecond};
use crate::spaces::Discretization;
use crate::sparsela::{ldlt_factor, CsrMatrix, SymFactor};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Case {
    One,
    Two,
    Three,
    Four,
}

impl Case {
    pub fn number(self) -> u8 {
        match self {
            Case::One => 1,
            Case::Two => 2,
            Case::Three => 3,
            Case::Four => 4,
        }
    }

    fn grouped(self) -> bool {
        matches!(self, Case::Three | Case::Four)
    }
}

/// A full parameter sweep.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Sweep {
    pub case: Case,
    pub bc: BcMode,
    pub ns: Vec<usize>,
    pub lambdas: Vec<f64>,
    pub alphas: Vec<f64>,
    pub kappas: Vec<f64>,
    pub tol: f64,
    pub maxiter: usize,
    pub seed: u64,
}

fn decades(from: i32, to: i32, step: usize) -> Vec<f64> {
    (from..=to).step_by(step).map(|e| 10f64.powi(e)).collect()
}

impl Sweep {
    /// Desk-scale defaults: `N ∈ {4, 8, 16}`.
    pub fn default_for(case: Case) -> Self {
        let (bc, lambdas, alphas, kappas) = match case {
            Case::One => (BcMode::Mixed, decades(-4, 12, 2), vec![1.0], vec![1.0]),
            Case::Two => (BcMode::Clamped, decades(-4, 10, 2), vec![1.0], vec![1.0]),
            Case::Three | Case::Four => (
                BcMode::Clamped,
                vec![1.0, 1e4, 1e8],
                vec![1.0, 1e-4],
                vec![1.0, 1e-4, 1e-8],
            ),
        };
        Self {
            case,
            bc,
            ns: vec![4, 8, 16],
            lambdas,
            alphas,
            kappas,
            tol: 1e-9,
            maxiter: 500,
            seed: 0,
        }
    }

    fn validate(&self) -> Result<()> {
        if self.case != Case::One && self.bc != BcMode::Clamped {
            return Err(BiotError::InvalidArgument(format!(
                "case {} is defined for clamped boundaries only",
                self.case.number()
            )));
        }
        if !(self.tol > 0.0) || self.maxiter == 0 {
            return Err(BiotError::InvalidArgument(
                "tol must be positive and maxiter nonzero".into(),
            ));
        }
        if self.ns.contains(&0) {
            return Err(BiotError::InvalidArgument("N must be at least 1".into()));
        }
        Ok(())
    }

    /// Parameter points in table order: `kappa`, `alpha`, `lambda`, then `N`.
    fn points(&self) -> Vec<(usize, f64, f64, f64)> {
        let (alphas, kappas) = if self.case.grouped() {
            (self.alphas.clone(), self.kappas.clone())
        } else {
            (vec![1.0], vec![1.0])
        };
        let mut out = Vec::new();
        for &kappa in &kappas {
            for &alpha in &alphas {
                for &lambda in &self.lambdas {
                    for &n in &self.ns {
                        out.push((n, lambda, alpha, kappa));
                    }
                }
            }
        }
        out
    }
}

/// One table cell. `report` is `None` when the point could not be set up, in
/// which case `error` says why.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentRow {
    pub case: u8,
    pub bc: BcMode,
    pub n: usize,
    pub lambda: f64,
    pub alpha: f64,
    pub kappa: f64,
    pub report: Option<KrylovReport>,
    pub error: Option<String>,
}

impl ExperimentRow {
    pub fn iterations(&self) -> Option<usize> {
        self.report.as_ref().map(|r| r.iterations)
    }

    pub fn converged(&self) -> bool {
        self.report.as_ref().is_some_and(|r| r.converged)
    }
}

/// Mesh-level data shared by all parameter points of one `N`.
pub struct Level {
    pub disc: Discretization,
    pub forms: StressForms,
    pub factor: Arc<SymFactor>,
}

impl Level {
    pub fn new(n: usize, bc: BcMode) -> Result<Self> {
        let disc = Discretization::new(n, bc)?;
        let forms = StressForms::new(&disc);
        let factor = Arc::new(factor_sigma_riesz(&disc, &forms, 0.5)?);
        Ok(Self { disc, forms, factor })
    }
}

/// Builds the assembled system and its block preconditioner for one point of
/// Cases 2–4.
pub fn build_block_problem(
    level: &Level,
    params: &ParameterSet,
    include_pressure: bool,
    seed: u64,
) -> Result<(BlockSystem, BlockPrecond)> {
    let disc = &level.disc;
    let f = seeded_random_vector(disc.displacement.ndof(), seed);
    let g = if include_pressure {
        seeded_random_vector(disc.pressure.ndof(), seed.wrapping_add(2))
    } else {
        Vec::new()
    };
    let sys = assemble_system_from(disc, &level.forms, params, include_pressure, &f, &g)?;
    let stress = stress_precond(disc, &level.forms, params, level.factor.clone())?;
    let pressure = if include_pressure {
        Some(Arc::new(ldlt_factor(&sys.pressure)?))
    } else {
        None
    };
    Ok((sys, BlockPrecond::new(disc, stress, pressure)))
}

fn params_for(case: Case, lambda: f64, alpha: f64, kappa: f64) -> Result<ParameterSet> {
    match case {
        Case::One | Case::Two => ParameterSet::elasticity(lambda),
        Case::Three => ParameterSet::new(lambda, alpha, Conductivity::Constant(kappa)),
        Case::Four => ParameterSet::new(lambda, alpha, Conductivity::Layered(kappa)),
    }
}

fn solve_point(sweep: &Sweep, level: &Level, lambda: f64, alpha: f64, kappa: f64) -> Result<KrylovReport> {
    let params = params_for(sweep.case, lambda, alpha, kappa)?;
    let disc = &level.disc;
    match sweep.case {
        Case::One => {
            let free = disc.free_stress();
            let op = level
                .forms
                .a(&params)
                .lin_comb(1.0, &level.forms.divdiv, 1.0)?
                .submatrix(free, free);
            let precond = stress_precond(disc, &level.forms, &params, level.factor.clone())?;
            let rhs = seeded_random_vector(free.len(), sweep.seed);
            let x0 = seeded_random_vector(free.len(), sweep.seed.wrapping_add(1));
            Ok(pcg(&op, &precond, &rhs, &x0, sweep.tol, sweep.maxiter)?.1)
        }
        Case::Two | Case::Three | Case::Four => {
            let (sys, precond) = build_block_problem(level, &params, sweep.case != Case::Two, sweep.seed)?;
            let x0 = seeded_random_vector(sys.dim(), sweep.seed.wrapping_add(1));
            Ok(pminres(&sys, &precond, &sys.rhs, &x0, sweep.tol, sweep.maxiter)?.1)
        }
    }
}

/// The operator solved at one parameter point: `A + DD` on the free stress dofs
/// for Case 1, the assembled block matrix otherwise.
pub fn point_operator(case: Case, bc: BcMode, n: usize, lambda: f64, alpha: f64, kappa: f64) -> Result<CsrMatrix> {
    let params = params_for(case, lambda, alpha, kappa)?;
    let disc = Discretization::new(n, bc)?;
    let forms = StressForms::new(&disc);
    match case {
        Case::One => {
            let free = disc.free_stress();
            Ok(forms
                .a(&params)
                .lin_comb(1.0, &forms.divdiv, 1.0)?
                .submatrix(free, free))
        }
        _ => {
            let f = vec![0.0; disc.displacement.ndof()];
            let g = if case == Case::Two {
                Vec::new()
            } else {
                vec![0.0; disc.pressure.ndof()]
            };
            Ok(assemble_system_from(&disc, &forms, &params, case != Case::Two, &f, &g)?.matrix)
        }
    }
}

/// Runs every point of `sweep`. Solver failures are recorded in the row; only
/// invalid sweeps and mesh-level failures are errors.
pub fn run_sweep(sweep: &Sweep) -> Result<Vec<ExperimentRow>> {
    sweep.validate()?;
    let mut ns = sweep.ns.clone();
    ns.sort_unstable();
    ns.dedup();
    let levels: Vec<Level> = crate::par_map(ns.len(), |i| Level::new(ns[i], sweep.bc))
        .into_iter()
        .collect::<Result<_>>()?;
    let points = sweep.points();
    let rows = crate::par_map(points.len(), |i| {
        let (n, lambda, alpha, kappa) = points[i];
        let level = &levels[ns.binary_search(&n).expect("level exists")];
        let outcome = solve_point(sweep, level, lambda, alpha, kappa);
        let params = params_for(sweep.case, lambda, alpha, kappa).ok();
        ExperimentRow {
            case: sweep.case.number(),
            bc: sweep.bc,
            n,
            lambda,
            alpha: params.as_ref().map_or(alpha, |p| p.alpha),
            kappa: params.as_ref().map_or(kappa, |p| p.kappa.value()),
            error: outcome.as_ref().err().map(|e| e.to_string()),
            report: outcome.ok(),
        }
    });
    Ok(rows)
}

pub fn run_case1(bc: BcMode, ns: &[usize], lambdas: &[f64], tol: f64, seed: u64) -> Result<Vec<ExperimentRow>> {
    run_sweep(&Sweep {
        bc,
        ns: ns.to_vec(),
        lambdas: lambdas.to_vec(),
        tol,
        seed,
        ..Sweep::default_for(Case::One)
    })
}

pub fn run_case2(ns: &[usize], lambdas: &[f64], tol: f64, seed: u64) -> Result<Vec<ExperimentRow>> {
    run_sweep(&Sweep {
        ns: ns.to_vec(),
        lambdas: lambdas.to_vec(),
        tol,
        seed,
        ..Sweep::default_for(Case::Two)
    })
}

fn run_biot(
    case: Case,
    ns: &[usize],
    lambdas: &[f64],
    alphas: &[f64],
    kappas: &[f64],
    tol: f64,
    seed: u64,
) -> Result<Vec<ExperimentRow>> {
    run_sweep(&Sweep {
        ns: ns.to_vec(),
        lambdas: lambdas.to_vec(),
        alphas: alphas.to_vec(),
        kappas: kappas.to_vec(),
        tol,
        seed,
        ..Sweep::default_for(case)
    })
}

pub fn run_case3(
    ns: &[usize],
    lambdas: &[f64],
    alphas: &[f64],
    kappas: &[f64],
    tol: f64,
    seed: u64,
) -> Result<Vec<ExperimentRow>> {
    run_biot(Case::Three, ns, lambdas, alphas, kappas, tol, seed)
}

pub fn run_case4(
    ns: &[usize],
    lambdas: &[f64],
    alphas: &[f64],
    kappas: &[f64],
    tol: f64,
    seed: u64,
) -> Result<Vec<ExperimentRow>> {
    run_biot(Case::Four, ns, lambdas, alphas, kappas, tol, seed)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TableFormat {
    Csv,
    Markdown,
}

impl std::str::FromStr for TableFormat {
    type Err = BiotError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "csv" => Ok(TableFormat::Csv),
            "markdown" | "md" => Ok(TableFormat::Markdown),
            other => Err(BiotError::Parse(format!("unknown table format '{other}'"))),
        }
    }
}

pub fn emit_table(rows: &[ExperimentRow], format: TableFormat) -> String {
    match format {
        TableFormat::Csv => to_csv(rows),
        TableFormat::Markdown => to_markdown(rows),
    }
}

fn to_csv(rows: &[ExperimentRow]) -> String {
    let mut out = String::from("case,bc,N,lambda,alpha,kappa,iterations,converged,final_residual\n");
    for r in rows {
        let (iters, res) = match &r.report {
            Some(rep) => (rep.iterations.to_string(), format!("{:.6e}", rep.final_residual())),
            None => (String::new(), String::new()),
        };
        let _ = writeln!(
            out,
            "{},{},{},{:e},{:e},{:e},{},{},{}",
            r.case,
            r.bc.as_str(),
            r.n,
            r.lambda,
            r.alpha,
            r.kappa,
            iters,
            r.converged(),
            res
        );
    }
    out
}

fn cell_text(row: Option<&ExperimentRow>) -> String {
    match row {
        None => String::new(),
        Some(r) => match &r.report {
            None => "err".into(),
            Some(rep) if rep.converged => rep.iterations.to_string(),
            Some(rep) => format!("{}*", rep.iterations),
        },
    }
}

/// Rows are `lambda` (grouped by `kappa`, `alpha` when the case has them),
/// columns are `N`. Unconverged cells carry a `*`.
fn to_markdown(rows: &[ExperimentRow]) -> String {
    let grouped = rows.iter().any(|r| r.case >= 3);
    let mut ns: Vec<usize> = rows.iter().map(|r| r.n).collect();
    ns.sort_unstable();
    ns.dedup();
    let mut keys: Vec<(f64, f64, f64)> = Vec::new();
    for r in rows {
        let k = (r.kappa, r.alpha, r.lambda);
        if !keys.contains(&k) {
            keys.push(k);
        }
    }
    let mut out = String::new();
    let lead = if grouped {
        "| κ | α | λ \\ N |"
    } else {
        "| λ \\ N |"
    };
    out.push_str(lead);
    for n in &ns {
        let _ = write!(out, " {n} |");
    }
    out.push('\n');
    let lead_cols = if grouped { 3 } else { 1 };
    out.push('|');
    for _ in 0..lead_cols + ns.len() {
        out.push_str("---|");
    }
    out.push('\n');
    for (kappa, alpha, lambda) in keys {
        out.push('|');
        if grouped {
            let _ = write!(out, " {kappa:e} | {alpha:e} |");
        }
        let _ = write!(out, " {lambda:e} |");
        for &n in &ns {
            let cell = rows
                .iter()
                .find(|r| r.n == n && r.kappa == kappa && r.alpha == alpha && r.lambda == lambda);
            let _ = write!(out, " {} |", cell_text(cell));
        }
        out.push('\n');
    }
    out
}
