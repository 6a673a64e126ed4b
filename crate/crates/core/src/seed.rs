//! Initial guesses for the Gauss-Newton solve.
//!
//! The dispersion seed solves, for each phase independently, the pair
//! `F1(i w, i l, i k_j; c1) = 0`, `F2(i w, i l, i k_j; c2) = 0` for
//! `(w, l)` with the constants fixed at their starting signs (usually
//! +/-1). Starting the nonlinear solve from such a pair gives the
//! objective a much smaller initial value than a naive zero guess.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::bilinear::BilinearSystem;
use crate::residual::{GivenParams, UnknownVector};
use crate::scalar::{real, Real};

/// Seeds satisfying the dispersion pair must reach this residual.
pub const DISPERSION_TOL: f64 = 1e-12;

/// How many Newton starts to try per phase before falling back.
const MAX_STARTS: usize = 100;

/// Default stream for the random part of the start ladder.
pub const DEFAULT_RNG_SEED: u64 = 20_260_809;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub enum SeedMode<T> {
    /// Solve the per-phase dispersion pair.
    Dispersion,
    /// Caller-provided full unknown vector.
    Explicit(UnknownVector<T>),
    /// Known solution values used to re-converge a specific root.
    WarmStart(UnknownVector<T>),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SeedConfig<T> {
    pub c1_0: T,
    pub c2_0: T,
    /// Off-diagonal tau starting values; zero keeps the seed matrix
    /// positive definite for any positive diagonal.
    pub tau_off_0: Vec<T>,
    pub mode: SeedMode<T>,
    /// Which dispersion root to take, indexing the roots sorted by
    /// increasing `|omega|`; out-of-range indices clamp to the last root.
    pub root_index: usize,
    pub rng_seed: u64,
}

impl<T: Real> SeedConfig<T> {
    pub fn dispersion(n: usize, c1_0: T, c2_0: T) -> Self {
        Self {
            c1_0,
            c2_0,
            tau_off_0: vec![T::zero(); n * (n - 1) / 2],
            mode: SeedMode::Dispersion,
            root_index: 0,
            rng_seed: DEFAULT_RNG_SEED,
        }
    }
}

/// Per-phase dispersion result.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DispersionSeed<T> {
    pub omega: Vec<T>,
    pub l: Vec<T>,
    /// Set for phases where no root was found within the start budget and
    /// the `(k^3, k)` fallback was used instead.
    pub fallback: Vec<bool>,
}

/// Solves the decoupled dispersion pairs for every phase.
///
/// Each phase runs a damped two-variable Newton from a deterministic
/// ladder of starting points: the four sign combinations of
/// `(+-k^3, +-k)`, then uniform draws in `[-10, 10]^2` from a fixed-seed
/// stream. All distinct roots found over the ladder are collected and the
/// requested `root_index` (sorted by `|omega|`) is returned.
pub fn dispersion_seed<T: Real>(
    system: &BilinearSystem,
    k: &[T],
    c1_0: T,
    c2_0: T,
    root_index: usize,
    rng_seed: u64,
) -> DispersionSeed<T> {
    let mut omega = Vec::with_capacity(k.len());
    let mut l = Vec::with_capacity(k.len());
    let mut fallback = Vec::with_capacity(k.len());
    let mut rng = ChaCha8Rng::seed_from_u64(rng_seed);
    for &kj in k {
        let roots = phase_roots(system, kj, c1_0, c2_0, &mut rng);
        if roots.is_empty() {
            omega.push(kj.powi(3));
            l.push(kj);
            fallback.push(true);
        } else {
            let pick = roots[root_index.min(roots.len() - 1)];
            omega.push(pick.0);
            l.push(pick.1);
            fallback.push(false);
        }
    }
    DispersionSeed { omega, l, fallback }
}

/// Assembles the full starting vector for a solve.
pub fn initial_guess<T: Real>(
    system: &BilinearSystem,
    given: &GivenParams<T>,
    cfg: &SeedConfig<T>,
) -> (UnknownVector<T>, DispersionSeed<T>) {
    match &cfg.mode {
        SeedMode::Explicit(x0) | SeedMode::WarmStart(x0) => {
            let n = given.n();
            let info = DispersionSeed {
                omega: x0.omega.clone(),
                l: x0.l.clone(),
                fallback: vec![false; n],
            };
            (x0.clone(), info)
        }
        SeedMode::Dispersion => {
            let seed = dispersion_seed(
                system,
                &given.k,
                cfg.c1_0,
                cfg.c2_0,
                cfg.root_index,
                cfg.rng_seed,
            );
            let x0 = UnknownVector {
                omega: seed.omega.clone(),
                l: seed.l.clone(),
                tau_off: cfg.tau_off_0.clone(),
                c1: cfg.c1_0,
                c2: cfg.c2_0,
            };
            (x0, seed)
        }
    }
}

/// All distinct dispersion roots for one phase, sorted by `|omega|`.
fn phase_roots<T: Real>(
    system: &BilinearSystem,
    kj: T,
    c1_0: T,
    c2_0: T,
    rng: &mut ChaCha8Rng,
) -> Vec<(T, T)> {
    let k3 = kj.powi(3);
    let mut starts: Vec<(T, T)> = vec![(k3, kj), (-k3, kj), (k3, -kj), (-k3, -kj)];
    while starts.len() < MAX_STARTS {
        let w = real::<T>(rng.gen_range(-10.0..10.0));
        let l = real::<T>(rng.gen_range(-10.0..10.0));
        starts.push((w, l));
    }
    let mut roots: Vec<(T, T)> = Vec::new();
    for start in starts {
        if let Some(root) = newton2(system, kj, c1_0, c2_0, start) {
            let close = |a: T, b: T| (a - b).abs() < real::<T>(1e-7) * (T::one() + a.abs());
            if !roots
                .iter()
                .any(|&(w, l)| close(w, root.0) && close(l, root.1))
            {
                roots.push(root);
            }
        }
    }
    roots.sort_by(|a, b| {
        (a.0.abs(), a.0, a.1)
            .partial_cmp(&(b.0.abs(), b.0, b.1))
            .expect("roots are finite")
    });
    roots
}

/// Damped Newton on the 2x2 dispersion pair. Returns a root with residual
/// below [`DISPERSION_TOL`], or `None`.
fn newton2<T: Real>(
    system: &BilinearSystem,
    kj: T,
    c1_0: T,
    c2_0: T,
    start: (T, T),
) -> Option<(T, T)> {
    let tol = real::<T>(DISPERSION_TOL);
    let eval = |w: T, l: T| -> (T, T) {
        let d = [w, l, kj];
        (
            system.f1.eval_imag(&d, c1_0).expect("3 arguments"),
            system.f2.eval_imag(&d, c2_0).expect("3 arguments"),
        )
    };
    let (mut w, mut l) = start;
    for _ in 0..80 {
        let (f1, f2) = eval(w, l);
        let norm = f1.abs().max(f2.abs());
        if norm < tol {
            return Some((w, l));
        }
        if !norm.is_finite() {
            return None;
        }
        let d = [w, l, kj];
        let j11 = system.f1.eval_imag_partial(&d, 0).expect("3 arguments");
        let j12 = system.f1.eval_imag_partial(&d, 1).expect("3 arguments");
        let j21 = system.f2.eval_imag_partial(&d, 0).expect("3 arguments");
        let j22 = system.f2.eval_imag_partial(&d, 1).expect("3 arguments");
        let det = j11 * j22 - j12 * j21;
        if det.abs() < real::<T>(1e-300) {
            return None;
        }
        let dw = (f1 * j22 - f2 * j12) / det;
        let dl = (f2 * j11 - f1 * j21) / det;
        // Backtrack until the residual decreases.
        let mut damp = T::one();
        let mut accepted = false;
        for _ in 0..30 {
            let (g1, g2) = eval(w - damp * dw, l - damp * dl);
            if g1.abs().max(g2.abs()) < norm {
                w -= damp * dw;
                l -= damp * dl;
                accepted = true;
                break;
            }
            damp *= real::<T>(0.5);
        }
        if !accepted {
            return None;
        }
    }
    let (f1, f2) = eval(w, l);
    (f1.abs().max(f2.abs()) < tol).then_some((w, l))
}
