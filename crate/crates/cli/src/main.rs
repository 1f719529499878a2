use std::fs;
use std::path::PathBuf;
use std::process::ExitCode;

use biot_core::experiments::{emit_table, point_operator, run_sweep, Case, ExperimentRow, Sweep, TableFormat};
use biot_core::mesh::{build_unit_square_mesh, BcMode};
use biot_core::sparsela::mtx::{to_matrix_market, MtxSymmetry};
use biot_core::verify::{rows_to_csv, run_verification, CheckRow, VerifyConfig};
use clap::{Args, Parser, Subcommand};

#[derive(Parser)]
#[command(
    name = "biot",
    version,
    about = "Iteration-count experiments and stability checks for the four-field Biot system"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Stress Riesz problem solved by PCG.
    Case1(SweepArgs),
    /// Clamped mixed elasticity solved by PMINRES.
    Case2(SweepArgs),
    /// Full Biot system, constant conductivity.
    Case3(SweepArgs),
    /// Full Biot system, layered conductivity.
    Case4(SweepArgs),
    /// Dense eigenvalue checks on small meshes.
    Verify(VerifyArgs),
}

#[derive(Args)]
struct SweepArgs {
    /// Mesh sizes, comma separated.
    #[arg(long = "N", value_delimiter = ',')]
    n: Option<Vec<usize>>,
    #[arg(long, value_delimiter = ',')]
    lambda: Option<Vec<f64>>,
    #[arg(long, value_delimiter = ',')]
    alpha: Option<Vec<f64>>,
    #[arg(long, value_delimiter = ',')]
    kappa: Option<Vec<f64>>,
    /// clamped or mixed (Case 1 only; the other cases are clamped).
    #[arg(long)]
    bc: Option<BcMode>,
    #[arg(long, default_value_t = 1e-9)]
    tol: f64,
    #[arg(long, default_value_t = 500)]
    maxiter: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// csv or markdown.
    #[arg(long, default_value = "markdown")]
    format: TableFormat,
    /// Write every row with its full Krylov report as JSON.
    #[arg(long)]
    dump: Option<PathBuf>,
    /// Write the operator of the first parameter point in Matrix Market format.
    #[arg(long)]
    export_matrix: Option<PathBuf>,
    /// Write the mesh of the first N as plain text.
    #[arg(long)]
    dump_mesh: Option<PathBuf>,
}

#[derive(Args)]
struct VerifyArgs {
    /// Mesh size for the spectral checks.
    #[arg(long = "N", default_value_t = 4)]
    n: usize,
    /// Mesh sizes for the inf-sup sweep.
    #[arg(long, value_delimiter = ',', default_values_t = [2, 4])]
    infsup_n: Vec<usize>,
    /// csv or markdown.
    #[arg(long, default_value = "csv")]
    format: TableFormat,
    /// Exit with a failure status if any check fails.
    #[arg(long)]
    strict: bool,
}

fn build_sweep(case: Case, args: &SweepArgs) -> Sweep {
    let mut sweep = Sweep::default_for(case);
    if let Some(n) = &args.n {
        sweep.ns = n.clone();
    }
    if let Some(l) = &args.lambda {
        sweep.lambdas = l.clone();
    }
    if let Some(a) = &args.alpha {
        sweep.alphas = a.clone();
    }
    if let Some(k) = &args.kappa {
        sweep.kappas = k.clone();
    }
    if let Some(bc) = args.bc {
        sweep.bc = bc;
    }
    sweep.tol = args.tol;
    sweep.maxiter = args.maxiter;
    sweep.seed = args.seed;
    sweep
}

fn run_case(case: Case, args: &SweepArgs) -> Result<(), String> {
    let sweep = build_sweep(case, args);
    if let Some(path) = &args.dump_mesh {
        let n = *sweep.ns.first().ok_or("no mesh size given")?;
        let mesh = build_unit_square_mesh(n).map_err(|e| e.to_string())?;
        fs::write(path, mesh.to_text()).map_err(|e| format!("{}: {e}", path.display()))?;
    }
    if let Some(path) = &args.export_matrix {
        let (n, lambda) = (
            *sweep.ns.first().ok_or("no mesh size given")?,
            *sweep.lambdas.first().ok_or("no lambda given")?,
        );
        let alpha = sweep.alphas.first().copied().unwrap_or(1.0);
        let kappa = sweep.kappas.first().copied().unwrap_or(1.0);
        let op = point_operator(case, sweep.bc, n, lambda, alpha, kappa).map_err(|e| e.to_string())?;
        fs::write(path, to_matrix_market(&op, MtxSymmetry::Symmetric))
            .map_err(|e| format!("{}: {e}", path.display()))?;
    }
    let rows = run_sweep(&sweep).map_err(|e| e.to_string())?;
    if let Some(path) = &args.dump {
        let json = serde_json::to_string_pretty(&rows).map_err(|e| e.to_string())?;
        fs::write(path, json).map_err(|e| format!("{}: {e}", path.display()))?;
    }
    print!("{}", emit_table(&rows, args.format));
    report_failures(&rows);
    Ok(())
}

fn report_failures(rows: &[ExperimentRow]) {
    for r in rows.iter().filter(|r| !r.converged()) {
        let why = r.error.clone().unwrap_or_else(|| "not converged".into());
        eprintln!(
            "N={} lambda={:e} alpha={:e} kappa={:e}: {why}",
            r.n, r.lambda, r.alpha, r.kappa
        );
    }
}

fn checks_markdown(rows: &[CheckRow]) -> String {
    let mut out = String::from("| check | point | value | pass |\n|---|---|---|---|\n");
    for r in rows {
        out.push_str(&format!(
            "| {} | {} | {:.6e} | {} |\n",
            r.check,
            r.point,
            r.value,
            if r.pass { "pass" } else { "fail" }
        ));
    }
    out
}

fn run_verify(args: &VerifyArgs) -> Result<bool, String> {
    if args.n == 0 || args.infsup_n.contains(&0) {
        return Err("N must be at least 1".into());
    }
    let config = VerifyConfig {
        spectral_n: args.n,
        infsup_n: args.infsup_n.clone(),
        ..VerifyConfig::default()
    };
    let rows = run_verification(&config).map_err(|e| e.to_string())?;
    match args.format {
        TableFormat::Csv => print!("{}", rows_to_csv(&rows)),
        TableFormat::Markdown => print!("{}", checks_markdown(&rows)),
    }
    let failed = rows.iter().filter(|r| !r.pass).count();
    eprintln!("{} checks, {failed} failed", rows.len());
    Ok(failed == 0)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let outcome = match &cli.command {
        Command::Case1(a) => run_case(Case::One, a).map(|_| true),
        Command::Case2(a) => run_case(Case::Two, a).map(|_| true),
        Command::Case3(a) => run_case(Case::Three, a).map(|_| true),
        Command::Case4(a) => run_case(Case::Four, a).map(|_| true),
        Command::Verify(a) => run_verify(a).map(|ok| ok || !a.strict),
    };
    match outcome {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::FAILURE,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}
