//! Seed -> solve -> verify pipeline shared by the subcommands.

use anyhow::{bail, Context, Result};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use nperiodic::bilinear::BilinearSystem;
use nperiodic::field::{bilinear_residual, AxisSpec, GridSpec};
use nperiodic::residual::{GivenParams, ResidualSystem};
use nperiodic::seed::{initial_guess, DispersionSeed, SeedConfig, SeedMode};
use nperiodic::solver::{gauss_newton, SolveStatus, SolverConfig};
use nperiodic::theta::{choose_truncation, LatticeTruncation, Point, SymMatrix, ThetaParams};
use nperiodic::{GivenParams64, SeedConfig64, SolveReport64, ThetaParams64};

use crate::config::{GridSection, RunConfig, SeedSection};
use crate::report::{GivenSpec, OracleSpec, RunReport, SeedSpec, SolveSpec, TruncationSpec};

/// Sampling window for the pointwise verification draws.
const ORACLE_T_RANGE: std::ops::Range<f64> = 0.0..50.0;
const ORACLE_X_RANGE: std::ops::Range<f64> = 0.0..10.0;

/// Command-line overrides applied on top of the config file.
#[derive(Clone, Debug, Default)]
pub struct Overrides {
    pub seed_mode: Option<String>,
    pub rng_seed: Option<u64>,
    pub max_iter: Option<usize>,
    pub trunc_m: Option<usize>,
    pub root_index: Option<usize>,
}

pub struct ResolvedRun {
    pub config: RunConfig,
    pub system: BilinearSystem,
    pub given: GivenParams64,
    pub seed_cfg: SeedConfig64,
    pub solver_cfg: SolverConfig<f64>,
    pub trunc: LatticeTruncation<f64>,
}

pub struct RunOutcome {
    pub report: SolveReport64,
    pub seed_info: DispersionSeed<f64>,
    pub x0: nperiodic::UnknownVector64,
    pub oracle: Option<OracleSpec>,
}

fn seed_config(seed: &SeedSection, n: usize) -> Result<SeedConfig64> {
    let tau_off_0 = match &seed.tau_off {
        Some(v) => {
            if v.len() != n * (n - 1) / 2 {
                bail!(
                    "[seed] tau_off has {} entries, expected {}",
                    v.len(),
                    n * (n - 1) / 2
                );
            }
            v.clone()
        }
        None => vec![0.0; n * (n - 1) / 2],
    };
    let mode = match seed.mode.as_str() {
        "dispersion" => SeedMode::Dispersion,
        "warm-start" => {
            let ws = seed
                .warm_start
                .as_ref()
                .context("seed mode `warm-start` needs a [seed.warm_start] section")?;
            SeedMode::WarmStart(ws.to_unknowns())
        }
        "explicit" => {
            let ex = seed
                .explicit
                .as_ref()
                .context("seed mode `explicit` needs a [seed.explicit] section")?;
            SeedMode::Explicit(ex.to_unknowns())
        }
        other => bail!("unknown seed mode `{other}` (dispersion, warm-start, explicit)"),
    };
    Ok(SeedConfig {
        c1_0: seed.c1,
        c2_0: seed.c2,
        tau_off_0,
        mode,
        root_index: seed.root_index,
        rng_seed: seed.rng_seed,
    })
}

pub fn resolve(mut config: RunConfig, overrides: &Overrides) -> Result<ResolvedRun> {
    if let Some(mode) = &overrides.seed_mode {
        config.seed.mode = mode.clone();
    }
    if let Some(seed) = overrides.rng_seed {
        config.seed.rng_seed = seed;
    }
    if let Some(max_iter) = overrides.max_iter {
        config.solver.max_iter = max_iter;
    }
    if let Some(m) = overrides.trunc_m {
        config.truncation.m_max = Some(m);
    }
    if let Some(idx) = overrides.root_index {
        config.seed.root_index = idx;
    }

    let system = config.equation.build_system()?;
    let k = config
        .given
        .k
        .iter()
        .map(|v| v.resolve())
        .collect::<Result<Vec<_>>>()?;
    let tau_diag = config
        .given
        .tau_diag
        .iter()
        .map(|v| v.resolve())
        .collect::<Result<Vec<_>>>()?;
    let given = GivenParams::new(k, tau_diag, config.equation.v0, config.equation.u0)
        .map_err(|e| anyhow::anyhow!("invalid [given] parameters: {e}"))?;
    let seed_cfg = seed_config(&config.seed, given.n())?;

    let s = &config.solver;
    let solver_cfg = SolverConfig {
        step_tol: s.step_tol,
        residual_tol: s.residual_tol,
        max_iter: s.max_iter,
        singular_shift: s.singular_shift,
        near_singular_rel: s.near_singular_rel,
        divergence_cap: s.divergence_cap,
        damping: s.damping,
    };

    // Truncation is fixed before iterating, from the seed-assembled tau.
    let seed_tau_off = match &seed_cfg.mode {
        SeedMode::Explicit(x) | SeedMode::WarmStart(x) => x.tau_off.clone(),
        SeedMode::Dispersion => seed_cfg.tau_off_0.clone(),
    };
    let tau0 = SymMatrix::from_parts(&given.tau_diag, &seed_tau_off)
        .map_err(|e| anyhow::anyhow!("assembling tau: {e}"))?;
    let trunc = match config.truncation.m_max {
        Some(m) => LatticeTruncation::new(m, config.truncation.tail_tol)
            .map_err(|e| anyhow::anyhow!("invalid truncation override: {e}"))?,
        None => choose_truncation(&tau0, config.truncation.tail_tol, true)
            .map_err(|e| anyhow::anyhow!("choosing truncation: {e}"))?,
    };

    Ok(ResolvedRun {
        config,
        system,
        given,
        seed_cfg,
        solver_cfg,
        trunc,
    })
}

/// Theta parameters at the converged unknowns; `None` when tau is not
/// positive definite (nothing to reconstruct from).
pub fn converged_params(run: &ResolvedRun, outcome: &SolveReport64) -> Option<ThetaParams64> {
    let x = &outcome.x_final;
    let tau = SymMatrix::from_parts(&run.given.tau_diag, &x.tau_off).ok()?;
    ThetaParams::new(
        run.given.k.clone(),
        x.omega.clone(),
        x.l.clone(),
        vec![0.0; run.given.n()],
        tau,
    )
    .ok()
}

pub fn execute(run: &ResolvedRun) -> Result<RunOutcome> {
    let (x0, seed_info) = initial_guess(&run.system, &run.given, &run.seed_cfg);
    let rs = ResidualSystem::new(run.system.clone(), run.given.clone(), run.trunc);
    let report = gauss_newton(&rs, &x0, &run.solver_cfg);

    // The pointwise check validates converged solutions; on stalled or
    // divergent runs it would only restate the failure (and the stalled
    // l=0 branches have wide lattices that make it very expensive).
    let params = (report.status == SolveStatus::Converged)
        .then(|| converged_params(run, &report))
        .flatten();
    let oracle = params.map(|params| {
        let x = &report.x_final;
        let spec = run.config.oracle;
        let worst = oracle_max_residual(
            &run.system,
            &params,
            x.c1,
            x.c2,
            spec.points,
            run.seed_cfg.rng_seed,
        );
        OracleSpec {
            points: spec.points,
            tol: spec.tol,
            max_normalized_residual: worst,
            pass: worst < spec.tol,
        }
    });

    Ok(RunOutcome {
        report,
        seed_info,
        x0,
        oracle,
    })
}

/// Worst pointwise bilinear residual normalized by theta^2 over random
/// draws in the standard window (t in [0,50], z = 0, x in [0,10]).
pub fn oracle_max_residual(
    system: &BilinearSystem,
    params: &ThetaParams64,
    c1: f64,
    c2: f64,
    points: usize,
    rng_seed: u64,
) -> f64 {
    let trunc =
        choose_truncation(&params.tau, 1e-20, false).expect("converged tau is positive definite");
    let mut rng = ChaCha8Rng::seed_from_u64(rng_seed);
    let pts: Vec<Point<f64>> = (0..points)
        .map(|_| {
            Point::new(
                rng.gen_range(ORACLE_T_RANGE),
                0.0,
                rng.gen_range(ORACLE_X_RANGE),
            )
        })
        .collect();
    pts.par_iter()
        .map(|&pt| {
            let (r1, r2) = bilinear_residual(system, params, c1, c2, pt, &trunc);
            let th = params.eval(pt, &trunc);
            r1.abs().max(r2.abs()) / (th * th)
        })
        .reduce(|| 0.0, f64::max)
}

pub fn grid_spec(section: &Option<GridSection>) -> GridSpec<f64> {
    match section {
        Some(g) => GridSpec {
            x: AxisSpec::new(g.x.min, g.x.max, g.x.count),
            t: AxisSpec::new(g.t.min, g.t.max, g.t.count),
            z: g.z,
        },
        None => GridSpec::default(),
    }
}

pub fn build_report(run: &ResolvedRun, outcome: &RunOutcome) -> RunReport {
    RunReport {
        schema: crate::report::REPORT_SCHEMA.to_string(),
        equation: run.config.equation.clone(),
        given: GivenSpec {
            n: run.given.n(),
            k: run.given.k.clone(),
            tau_diag: run.given.tau_diag.clone(),
        },
        truncation: TruncationSpec {
            m_max: run.trunc.m_max(),
            tail_tol: run.trunc.tail_tol(),
        },
        solver: run.config.solver,
        seed: SeedSpec {
            mode: run.config.seed.mode.clone(),
            c1_0: run.seed_cfg.c1_0,
            c2_0: run.seed_cfg.c2_0,
            root_index: run.seed_cfg.root_index,
            rng_seed: run.seed_cfg.rng_seed,
            fallback: outcome.seed_info.fallback.clone(),
            x0: outcome.x0.clone(),
        },
        solve: SolveSpec {
            status: outcome.report.status,
            iterations: outcome.report.iterations,
            h_norm: outcome.report.h_norm,
            degenerate_l_zero: outcome.report.degenerate_l_zero,
            x: outcome.report.x_final.clone(),
            trace: outcome.report.trace.clone(),
        },
        oracle: outcome.oracle.clone(),
    }
}

/// Exit taxonomy for `solve`: 0 converged and verified, 2 converged but
/// the pointwise check failed, 3 not converged.
pub fn solve_exit_code(report: &SolveReport64, oracle: &Option<OracleSpec>) -> u8 {
    if report.status != SolveStatus::Converged {
        return 3;
    }
    match oracle {
        Some(o) if o.pass => 0,
        Some(_) => 2,
        None => 2,
    }
}
