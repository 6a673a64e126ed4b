//! Regularized Gauss-Newton iteration on the condition system.
//!
//! The update is `x <- x - (J'J)^-1 J'H`, solved through the normal
//! equations; when `J'J` is near singular (smallest eigenvalue below
//! `near_singular_rel` times the largest) a `singular_shift * I` ridge is
//! added before factorizing. Iteration stops when both the step norm and
//! the residual norm fall below their tolerances. There is no line search
//! or trust region: divergence is reported, not repaired.

use nalgebra::{Cholesky, DMatrix, DVector, LU};
use serde::{Deserialize, Serialize};

use crate::residual::{ResidualError, ResidualSystem, UnknownVector};
use crate::scalar::{real, Real};

/// `l` entries below this magnitude classify a solution as z-independent.
pub const DEGENERATE_L_TOL: f64 = 1e-8;

#[derive(Debug, thiserror::Error)]
pub enum SolveError {
    #[error("square Newton needs as many conditions as unknowns, got {rows}x{cols}")]
    NotSquare { rows: usize, cols: usize },
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SolverConfig<T> {
    /// Termination bound on the step 2-norm.
    pub step_tol: T,
    /// Termination bound on the residual 2-norm.
    pub residual_tol: T,
    pub max_iter: usize,
    /// Ridge added to the normal matrix near singularity.
    pub singular_shift: T,
    /// Relative eigenvalue threshold that declares `J'J` near singular.
    pub near_singular_rel: T,
    /// Abort bound on the iterate 2-norm.
    pub divergence_cap: T,
    /// Step scaling; 1 is the plain method.
    pub damping: T,
}

impl<T: Real> Default for SolverConfig<T> {
    fn default() -> Self {
        Self {
            step_tol: real(1e-14),
            residual_tol: real(1e-14),
            max_iter: 200,
            singular_shift: real(1e-6),
            near_singular_rel: real(1e-10),
            divergence_cap: real(1e8),
            damping: T::one(),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SolveStatus {
    Converged,
    MaxIter,
    Diverged,
    SingularTau,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct IterationRecord<T> {
    pub iteration: usize,
    pub h_norm: T,
    pub step_norm: T,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SolveReport<T> {
    /// Best-residual iterate seen, not necessarily the last one.
    pub x_final: UnknownVector<T>,
    /// Residual 2-norm at `x_final`.
    pub h_norm: T,
    pub iterations: usize,
    pub trace: Vec<IterationRecord<T>>,
    pub status: SolveStatus,
    /// All `|l_j|` below [`DEGENERATE_L_TOL`]: the wave does not depend on
    /// the auxiliary variable.
    pub degenerate_l_zero: bool,
}

/// One Gauss-Newton step: solves the (possibly ridged) normal equations.
/// Returns the step in flattened coordinates and whether the ridge fired.
pub fn gauss_newton_step<T: Real>(
    j: &DMatrix<T>,
    h: &DVector<T>,
    cfg: &SolverConfig<T>,
) -> (DVector<T>, bool) {
    let mut normal = j.transpose() * j;
    let grad = j.transpose() * h;
    let eig = nalgebra::SymmetricEigen::new(normal.clone());
    let mut lambda_min = eig.eigenvalues[0];
    let mut lambda_max = eig.eigenvalues[0];
    for &e in eig.eigenvalues.iter().skip(1) {
        lambda_min = lambda_min.min(e);
        lambda_max = lambda_max.max(e);
    }
    let near_singular = lambda_min < cfg.near_singular_rel * lambda_max;
    if near_singular {
        for i in 0..normal.nrows() {
            normal[(i, i)] += cfg.singular_shift;
        }
    }
    let delta = match Cholesky::new(normal.clone()) {
        Some(chol) => chol.solve(&grad),
        // The ridged normal matrix is symmetric positive definite unless
        // inputs are non-finite; fall back to LU and let the driver's
        // finiteness check catch the rest.
        None => LU::new(normal).solve(&grad).unwrap_or_else(|| grad.clone()),
    };
    (delta, near_singular)
}

/// One square-Newton step, `J dx = H` solved directly by LU.
/// `None` when the Jacobian is singular to working precision.
pub fn newton_step<T: Real>(j: &DMatrix<T>, h: &DVector<T>) -> Option<DVector<T>> {
    LU::new(j.clone()).solve(h)
}

enum StepKind {
    GaussNewton,
    NewtonSquare,
}

/// Gauss-Newton driver for the over-determined condition system.
pub fn gauss_newton<T: Real>(
    rs: &ResidualSystem<T>,
    x0: &UnknownVector<T>,
    cfg: &SolverConfig<T>,
) -> SolveReport<T> {
    drive(rs, x0, cfg, StepKind::GaussNewton)
}

/// Newton iteration on the square N=1 system; rejects non-square systems.
/// Follows the same trajectory as [`gauss_newton`] while the Jacobian is
/// well conditioned.
pub fn newton_square<T: Real>(
    rs: &ResidualSystem<T>,
    x0: &UnknownVector<T>,
    cfg: &SolverConfig<T>,
) -> Result<SolveReport<T>, SolveError> {
    let (rows, cols) = (rs.num_conditions(), rs.num_unknowns());
    if rows != cols {
        return Err(SolveError::NotSquare { rows, cols });
    }
    Ok(drive(rs, x0, cfg, StepKind::NewtonSquare))
}

fn drive<T: Real>(
    rs: &ResidualSystem<T>,
    x0: &UnknownVector<T>,
    cfg: &SolverConfig<T>,
    kind: StepKind,
) -> SolveReport<T> {
    let n = rs.n();
    let mut trace = Vec::new();
    let mut x = x0.flatten();

    let mut h = match rs.residuals(x0) {
        Ok(h) => h,
        Err(err) => return abort_report(x0, err, trace),
    };
    let mut best_x = x.clone();
    let mut best_h = h.norm();
    let mut status = SolveStatus::MaxIter;

    for iteration in 1..=cfg.max_iter {
        let current = UnknownVector::from_flat(n, &x);
        let jac = match rs.jacobian(&current) {
            Ok(j) => j,
            Err(err) => {
                status = classify(&err);
                break;
            }
        };
        let delta = match kind {
            StepKind::GaussNewton => gauss_newton_step(&jac, &h, cfg).0,
            StepKind::NewtonSquare => match newton_step(&jac, &h) {
                Some(d) => d,
                None => {
                    // A singular square Jacobian leaves the plain Newton
                    // update undefined; stop and report the best iterate.
                    status = SolveStatus::Diverged;
                    break;
                }
            },
        };
        let step = delta.map(|d| d * cfg.damping);
        let step_norm = step.norm();
        let x_next = &x - &step;
        if !x_next.iter().all(|v| v.is_finite()) || x_next.norm() > cfg.divergence_cap {
            status = SolveStatus::Diverged;
            break;
        }
        let h_next = match rs.residuals(&UnknownVector::from_flat(n, &x_next)) {
            Ok(h) => h,
            Err(err) => {
                status = classify(&err);
                break;
            }
        };
        let h_norm = h_next.norm();
        trace.push(IterationRecord {
            iteration,
            h_norm,
            step_norm,
        });
        if !h_norm.is_finite() {
            status = SolveStatus::Diverged;
            break;
        }
        if h_norm < best_h {
            best_h = h_norm;
            best_x = x_next.clone();
        }
        x = x_next;
        h = h_next;
        if step_norm < cfg.step_tol && h_norm < cfg.residual_tol {
            status = SolveStatus::Converged;
            break;
        }
    }

    let x_final = UnknownVector::from_flat(n, &best_x);
    let degenerate = is_degenerate(&x_final);
    SolveReport {
        x_final,
        h_norm: best_h,
        iterations: trace.len(),
        trace,
        status,
        degenerate_l_zero: degenerate,
    }
}

fn classify<T>(err: &ResidualError<T>) -> SolveStatus {
    match err {
        ResidualError::TauNotPositiveDefinite { .. } => SolveStatus::SingularTau,
        _ => SolveStatus::Diverged,
    }
}

fn abort_report<T: Real>(
    x0: &UnknownVector<T>,
    err: ResidualError<T>,
    trace: Vec<IterationRecord<T>>,
) -> SolveReport<T> {
    SolveReport {
        x_final: x0.clone(),
        h_norm: real(f64::NAN),
        iterations: trace.len(),
        trace,
        status: classify(&err),
        degenerate_l_zero: is_degenerate(x0),
    }
}

fn is_degenerate<T: Real>(x: &UnknownVector<T>) -> bool {
    x.l.iter().all(|v| v.abs() < real(DEGENERATE_L_TOL))
}
