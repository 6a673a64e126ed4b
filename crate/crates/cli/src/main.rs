//! `nperiodic` -- config-driven solver for N-periodic waves of coupled
//! KdV-type bilinear equations.

mod config;
mod pipeline;
mod report;
mod table;

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};

use nperiodic::field::{export_grid, reconstruct, AxisSpec, GridFormat, GridSpec};
use nperiodic::residual::{GivenParams, ResidualSystem};
use nperiodic::theta::{LatticeTruncation, SymMatrix, ThetaParams};

use config::RunConfig;
use pipeline::{
    build_report, converged_params, execute, grid_spec, oracle_max_residual, resolve,
    solve_exit_code, Overrides,
};
use report::RunReport;

#[derive(Parser)]
#[command(
    name = "nperiodic",
    version,
    about = "N-periodic wave solver for coupled KdV-type bilinear systems"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Solve one parameter set: seed, Gauss-Newton, pointwise check.
    Solve(SolveArgs),
    /// Solve a batch of rows and print an aligned 4-decimal table.
    Table(TableArgs),
    /// Re-check a previously written report.
    Verify(VerifyArgs),
    /// Export a sampled (x, t) grid of the wave fields.
    Sample(SampleArgs),
}

#[derive(Args, Clone)]
struct CommonArgs {
    /// Run configuration (TOML).
    #[arg(long)]
    config: PathBuf,
    /// Output directory for artifacts.
    #[arg(long, default_value = "out")]
    out_dir: PathBuf,
    /// Override the seed mode (dispersion | warm-start | explicit).
    #[arg(long)]
    seed_mode: Option<String>,
    /// Override the RNG stream for seed ladders and check points.
    #[arg(long)]
    rng_seed: Option<u64>,
    /// Override the iteration cap.
    #[arg(long)]
    max_iter: Option<usize>,
    /// Override the lattice truncation bound.
    #[arg(long)]
    trunc_m: Option<usize>,
    /// Pick an alternative dispersion root (sorted by |omega|).
    #[arg(long)]
    root_index: Option<usize>,
}

impl CommonArgs {
    fn overrides(&self) -> Overrides {
        Overrides {
            seed_mode: self.seed_mode.clone(),
            rng_seed: self.rng_seed,
            max_iter: self.max_iter,
            trunc_m: self.trunc_m,
            root_index: self.root_index,
        }
    }
}

#[derive(Args)]
struct SolveArgs {
    #[command(flatten)]
    common: CommonArgs,
    /// Also write the sampled grid next to the report.
    #[arg(long)]
    write_grid: bool,
}

#[derive(Args)]
struct TableArgs {
    #[command(flatten)]
    common: CommonArgs,
}

#[derive(Args)]
struct VerifyArgs {
    /// Report written by `solve`.
    #[arg(long)]
    report: PathBuf,
}

#[derive(Args)]
struct SampleArgs {
    /// Report written by `solve` (alternative to --config).
    #[arg(long)]
    report: Option<PathBuf>,
    /// Run configuration to solve first (alternative to --report).
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long, default_value = "out")]
    out_dir: PathBuf,
    /// Grid file name (defaults to the basename plus `.grid.csv`).
    #[arg(long)]
    out: Option<PathBuf>,
    /// Layout: csv (long) or matrix (wide).
    #[arg(long, default_value = "csv")]
    format: String,
    #[arg(long)]
    x_min: Option<f64>,
    #[arg(long)]
    x_max: Option<f64>,
    #[arg(long)]
    x_count: Option<usize>,
    #[arg(long)]
    t_min: Option<f64>,
    #[arg(long)]
    t_max: Option<f64>,
    #[arg(long)]
    t_count: Option<usize>,
    #[arg(long)]
    z: Option<f64>,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Solve(args) => cmd_solve(args),
        Command::Table(args) => cmd_table(args),
        Command::Verify(args) => cmd_verify(args),
        Command::Sample(args) => cmd_sample(args),
    };
    match result {
        Ok(code) => ExitCode::from(code),
        Err(err) => {
            eprintln!("error: {err:#}");
            ExitCode::from(1)
        }
    }
}

fn basename(config_path: &Path, config: &RunConfig) -> String {
    config.output.basename.clone().unwrap_or_else(|| {
        config_path
            .file_stem()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_else(|| "run".to_string())
    })
}

fn cmd_solve(args: SolveArgs) -> Result<u8> {
    let config = RunConfig::load(&args.common.config)?;
    if !config.rows.is_empty() {
        bail!(
            "{} defines [[rows]]; use the `table` subcommand for batches",
            args.common.config.display()
        );
    }
    let name = basename(&args.common.config, &config);
    let write_grid = args.write_grid || config.output.write_grid;
    let run = resolve(config, &args.common.overrides())?;
    let outcome = execute(&run)?;

    std::fs::create_dir_all(&args.common.out_dir)
        .with_context(|| format!("creating {}", args.common.out_dir.display()))?;
    let report_path = args.common.out_dir.join(format!("{name}.report.json"));
    let run_report = build_report(&run, &outcome);
    run_report.save(&report_path)?;

    println!("status:      {:?}", outcome.report.status);
    println!("iterations:  {}", outcome.report.iterations);
    println!("|H|:         {:.3e}", outcome.report.h_norm);
    let x = &outcome.report.x_final;
    println!("omega:       {}", join4(&x.omega));
    println!("l:           {}", join4(&x.l));
    if !x.tau_off.is_empty() {
        println!("tau_off:     {}", join4(&x.tau_off));
    }
    println!("c1, c2:      {}, {}", table::fmt4(x.c1), table::fmt4(x.c2));
    if outcome.report.degenerate_l_zero {
        println!("flags:       l=0 (z-independent branch)");
    }
    match &outcome.oracle {
        Some(o) => println!(
            "pointwise:   max |F theta.theta| / theta^2 = {:.3e} over {} points ({})",
            o.max_normalized_residual,
            o.points,
            if o.pass { "pass" } else { "FAIL" }
        ),
        None => println!("pointwise:   skipped (status {:?})", outcome.report.status),
    }
    println!("report:      {}", report_path.display());

    if write_grid {
        if let Some(params) = converged_params(&run, &outcome.report) {
            let spec = grid_spec(&run.config.grid);
            let grid_path = args.common.out_dir.join(format!("{name}.grid.csv"));
            let meta_path = args.common.out_dir.join(format!("{name}.grid.json"));
            write_grid_files(
                &params,
                &run.given,
                &spec,
                &grid_path,
                &meta_path,
                GridFormat::Csv,
            )?;
            println!("grid:        {}", grid_path.display());
        } else {
            println!("grid:        skipped (tau not positive definite)");
        }
    }

    Ok(solve_exit_code(&outcome.report, &outcome.oracle))
}

fn cmd_table(args: TableArgs) -> Result<u8> {
    let config = RunConfig::load(&args.common.config)?;
    let name = basename(&args.common.config, &config);
    let rendered = table::run_batch(&config, &args.common.overrides())?;
    let text = table::render_text(&rendered);
    print!("{text}");

    std::fs::create_dir_all(&args.common.out_dir)
        .with_context(|| format!("creating {}", args.common.out_dir.display()))?;
    let txt_path = args.common.out_dir.join(format!("{name}.table.txt"));
    let csv_path = args.common.out_dir.join(format!("{name}.table.csv"));
    std::fs::write(&txt_path, &text).with_context(|| format!("writing {}", txt_path.display()))?;
    std::fs::write(&csv_path, table::render_csv(&rendered))
        .with_context(|| format!("writing {}", csv_path.display()))?;
    eprintln!("wrote {} and {}", txt_path.display(), csv_path.display());

    let any_unconverged = rendered
        .rows
        .iter()
        .any(|r| r.error.is_some() || r.status != nperiodic::solver::SolveStatus::Converged);
    let any_oracle_fail = rendered.rows.iter().any(|r| r.oracle_pass == Some(false));
    Ok(if any_unconverged {
        3
    } else if any_oracle_fail {
        2
    } else {
        0
    })
}

fn cmd_verify(args: VerifyArgs) -> Result<u8> {
    let report = RunReport::load(&args.report)?;
    let system = report.equation.build_system()?;
    let given = GivenParams::new(
        report.given.k.clone(),
        report.given.tau_diag.clone(),
        report.equation.v0,
        report.equation.u0,
    )
    .map_err(|e| anyhow::anyhow!("invalid given parameters in report: {e}"))?;
    let trunc = LatticeTruncation::new(report.truncation.m_max, report.truncation.tail_tol)
        .map_err(|e| anyhow::anyhow!("invalid truncation in report: {e}"))?;
    let rs = ResidualSystem::new(system.clone(), given.clone(), trunc);

    let h_norm = rs
        .residuals(&report.solve.x)
        .map_err(|e| anyhow::anyhow!("re-evaluating the conditions: {e}"))?
        .norm();
    let h_tol = report.solver.residual_tol;
    println!(
        "|H| at stored solution: {h_norm:.3e} (stored {:.3e}, tolerance {h_tol:.1e})",
        report.solve.h_norm
    );

    let oracle_ok = match &report.oracle {
        Some(stored) => {
            let x = &report.solve.x;
            let tau = SymMatrix::from_parts(&given.tau_diag, &x.tau_off)
                .map_err(|e| anyhow::anyhow!("assembling tau: {e}"))?;
            let params = ThetaParams::new(
                given.k.clone(),
                x.omega.clone(),
                x.l.clone(),
                vec![0.0; given.n()],
                tau,
            )
            .map_err(|e| anyhow::anyhow!("stored solution has invalid tau: {e}"))?;
            let worst = oracle_max_residual(
                &system,
                &params,
                x.c1,
                x.c2,
                stored.points,
                report.seed.rng_seed,
            );
            println!(
                "pointwise residual: {worst:.3e} over {} points (stored {:.3e}, tolerance {:.1e})",
                stored.points, stored.max_normalized_residual, stored.tol
            );
            worst < stored.tol
        }
        None => {
            println!("pointwise residual: skipped at solve time (run was not converged)");
            false
        }
    };

    let pass = h_norm <= h_tol && oracle_ok;
    println!("verify: {}", if pass { "PASS" } else { "FAIL" });
    Ok(if pass { 0 } else { 2 })
}

fn cmd_sample(args: SampleArgs) -> Result<u8> {
    let (params, given, name) = match (&args.report, &args.config) {
        (Some(report_path), None) => {
            let report = RunReport::load(report_path)?;
            let x = &report.solve.x;
            let given = GivenParams::new(
                report.given.k.clone(),
                report.given.tau_diag.clone(),
                report.equation.v0,
                report.equation.u0,
            )
            .map_err(|e| anyhow::anyhow!("invalid given parameters in report: {e}"))?;
            let tau = SymMatrix::from_parts(&given.tau_diag, &x.tau_off)
                .map_err(|e| anyhow::anyhow!("assembling tau: {e}"))?;
            let params = ThetaParams::new(
                given.k.clone(),
                x.omega.clone(),
                x.l.clone(),
                vec![0.0; given.n()],
                tau,
            )
            .map_err(|e| anyhow::anyhow!("stored solution has invalid tau: {e}"))?;
            let name = report_path
                .file_stem()
                .map(|s| s.to_string_lossy().trim_end_matches(".report").to_string())
                .unwrap_or_else(|| "sample".into());
            (params, given, name)
        }
        (None, Some(config_path)) => {
            let config = RunConfig::load(config_path)?;
            if !config.rows.is_empty() {
                bail!("sample takes a single parameter set, not a [[rows]] batch");
            }
            let name = basename(config_path, &config);
            let run = resolve(config, &Overrides::default())?;
            let outcome = execute(&run)?;
            if outcome.report.status != nperiodic::solver::SolveStatus::Converged {
                bail!(
                    "solve did not converge (status {:?}); nothing to sample",
                    outcome.report.status
                );
            }
            let params = converged_params(&run, &outcome.report)
                .context("converged tau is not positive definite")?;
            (params, run.given.clone(), name)
        }
        _ => bail!("pass exactly one of --report or --config"),
    };

    let mut spec = GridSpec::<f64>::default();
    if let (Some(min), Some(max)) = (args.x_min, args.x_max) {
        spec.x = AxisSpec::new(min, max, spec.x.count);
    }
    if let Some(count) = args.x_count {
        spec.x.count = count;
    }
    if let (Some(min), Some(max)) = (args.t_min, args.t_max) {
        spec.t = AxisSpec::new(min, max, spec.t.count);
    }
    if let Some(count) = args.t_count {
        spec.t.count = count;
    }
    if let Some(z) = args.z {
        spec.z = z;
    }
    let format = match args.format.as_str() {
        "csv" => GridFormat::Csv,
        "matrix" => GridFormat::MatrixCsv,
        other => bail!("unknown grid format `{other}` (csv, matrix)"),
    };

    std::fs::create_dir_all(&args.out_dir)
        .with_context(|| format!("creating {}", args.out_dir.display()))?;
    let grid_path = match args.out {
        Some(p) => args.out_dir.join(p),
        None => args.out_dir.join(format!("{name}.grid.csv")),
    };
    let meta_path = grid_path.with_extension("json");
    write_grid_files(&params, &given, &spec, &grid_path, &meta_path, format)?;
    println!("grid: {}", grid_path.display());
    println!("meta: {}", meta_path.display());
    Ok(0)
}

fn write_grid_files(
    params: &ThetaParams<f64>,
    given: &GivenParams<f64>,
    spec: &GridSpec<f64>,
    grid_path: &Path,
    meta_path: &Path,
    format: GridFormat,
) -> Result<()> {
    let grid = reconstruct(
        params,
        given,
        spec,
        &nperiodic::theta::choose_truncation(&params.tau, 1e-20, false)
            .map_err(|e| anyhow::anyhow!("choosing truncation: {e}"))?,
    )
    .map_err(|e| anyhow::anyhow!("reconstructing fields: {e}"))?;
    export_grid(&grid, format, grid_path).map_err(|e| anyhow::anyhow!("{e}"))?;

    #[derive(serde::Serialize)]
    struct GridMeta<'a> {
        params: &'a ThetaParams<f64>,
        given: &'a GivenParams<f64>,
        spec: &'a GridSpec<f64>,
    }
    let meta = serde_json::to_string_pretty(&GridMeta {
        params,
        given,
        spec,
    })?;
    std::fs::write(meta_path, meta).with_context(|| format!("writing {}", meta_path.display()))?;
    Ok(())
}

fn join4(values: &[f64]) -> String {
    values
        .iter()
        .map(|&v| table::fmt4(v))
        .collect::<Vec<_>>()
        .join(", ")
}
