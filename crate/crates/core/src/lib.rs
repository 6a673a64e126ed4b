//! N-periodic wave solutions of coupled KdV-type equations in Hirota
//! bilinear form.
//!
//! A coupled pair of even bilinear forms
//! `F1(D_t, D_z, D_x; c1) f.f = 0`, `F2(D_t, D_z, D_x; c2) f.f = 0`
//! admits N-phase quasi-periodic solutions with `f` an N-dimensional
//! Riemann theta function. Substituting the theta ansatz reduces the PDE
//! pair to `2^(N+1)` algebraic conditions on the wave parameters; this
//! crate assembles those conditions as truncated lattice sums, solves them
//! with a regularized Gauss-Newton iteration seeded from per-phase
//! dispersion relations, reconstructs the physical fields from the
//! converged theta function, and re-verifies the bilinear equations
//! pointwise as an independent check.
//!
//! The numeric kernels are generic over the scalar type through
//! [`scalar::Real`]; the `*64` aliases below fix `f64`, which every
//! shipped tolerance assumes.
//!
//! Pipeline: [`bilinear`] (equation registry and D-polynomial evaluation)
//! -> [`seed`] (initial guesses) -> [`residual`] (condition system and
//! Jacobian) -> [`solver`] (Gauss-Newton driver) -> [`field`]
//! (reconstruction, verification, export). [`reference`] carries known
//! converged parameter sets for the built-in coupled Ramani system.

pub mod bilinear;
pub mod field;
pub mod reference;
pub mod residual;
pub mod scalar;
pub mod seed;
pub mod solver;
pub mod theta;
pub mod util;

pub use scalar::Real;

/// f64 concrete types; the tolerances shipped in configs and defaults are
/// calibrated for these.
pub type ThetaParams64 = theta::ThetaParams<f64>;
pub type SymMatrix64 = theta::SymMatrix<f64>;
pub type LatticeTruncation64 = theta::LatticeTruncation<f64>;
pub type Point64 = theta::Point<f64>;
pub type UnknownVector64 = residual::UnknownVector<f64>;
pub type GivenParams64 = residual::GivenParams<f64>;
pub type ResidualSystem64 = residual::ResidualSystem<f64>;
pub type SolverConfig64 = solver::SolverConfig<f64>;
pub type SolveReport64 = solver::SolveReport<f64>;
pub type SeedConfig64 = seed::SeedConfig<f64>;
pub type GridSpec64 = field::GridSpec<f64>;
pub type WaveGrid64 = field::WaveGrid<f64>;
