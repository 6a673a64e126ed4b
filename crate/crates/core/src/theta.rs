//! N-dimensional Riemann theta series and its partial derivatives.
//!
//! The series is `theta(eta | tau) = sum_m exp(i m.eta - 1/2 m' tau m)`
//! over the integer lattice, with phases
//! `eta_j = omega_j t + l_j z + k_j x + eta0_j`. The `+m`/`-m` pairs are
//! complex conjugates, so the value is real and is computed here as the
//! cosine series; derivatives are taken term by term.

use nalgebra::{Cholesky, DMatrix, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::scalar::{real, Real};
use crate::util::{for_each_lattice_point, KahanSum};

#[derive(Debug, thiserror::Error)]
pub enum ThetaError {
    #[error("tau matrix is not positive definite")]
    NotPositiveDefinite,
    #[error("parameter vector `{name}` has length {got}, expected {expected}")]
    LengthMismatch {
        name: &'static str,
        expected: usize,
        got: usize,
    },
    #[error("derivative total order {total} exceeds the supported maximum {max}")]
    OrderTooHigh { total: u32, max: u32 },
    #[error("non-finite entry in `{0}`")]
    NonFinite(&'static str),
    #[error("lattice bound must be >= 1 and tail tolerance > 0")]
    InvalidTruncation,
}

/// Symmetric matrix stored as its upper triangle, row-major.
///
/// Off-diagonal entries appear exactly once, in the same
/// `(1,2), (1,3), ..., (N-1,N)` order the solver's unknown vector uses.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SymMatrix<T> {
    n: usize,
    upper: Vec<T>,
}

impl<T: Real> SymMatrix<T> {
    pub fn zeros(n: usize) -> Self {
        Self {
            n,
            upper: vec![T::zero(); n * (n + 1) / 2],
        }
    }

    /// Assembles from a diagonal and the row-major strict upper triangle.
    pub fn from_parts(diag: &[T], off: &[T]) -> Result<Self, ThetaError> {
        let n = diag.len();
        if off.len() != n * (n - 1) / 2 {
            return Err(ThetaError::LengthMismatch {
                name: "tau_off",
                expected: n * (n - 1) / 2,
                got: off.len(),
            });
        }
        let mut m = Self::zeros(n);
        for (i, &d) in diag.iter().enumerate() {
            m.set(i, i, d);
        }
        let mut it = off.iter();
        for i in 0..n {
            for j in (i + 1)..n {
                m.set(i, j, *it.next().expect("length checked above"));
            }
        }
        Ok(m)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    #[inline]
    fn idx(&self, i: usize, j: usize) -> usize {
        let (a, b) = if i <= j { (i, j) } else { (j, i) };
        a * self.n - a * (a + 1) / 2 + b
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> T {
        self.upper[self.idx(i, j)]
    }

    pub fn set(&mut self, i: usize, j: usize, v: T) {
        let idx = self.idx(i, j);
        self.upper[idx] = v;
    }

    pub fn diag(&self) -> Vec<T> {
        (0..self.n).map(|i| self.get(i, i)).collect()
    }

    /// Strict upper triangle in row-major order.
    pub fn off_diagonal(&self) -> Vec<T> {
        let mut out = Vec::with_capacity(self.n * (self.n - 1) / 2);
        for i in 0..self.n {
            for j in (i + 1)..self.n {
                out.push(self.get(i, j));
            }
        }
        out
    }

    pub fn to_dmatrix(&self) -> DMatrix<T> {
        DMatrix::from_fn(self.n, self.n, |i, j| self.get(i, j))
    }

    pub fn min_eigenvalue(&self) -> T {
        let eig = SymmetricEigen::new(self.to_dmatrix());
        let mut min = eig.eigenvalues[0];
        for &e in eig.eigenvalues.iter().skip(1) {
            min = min.min(e);
        }
        min
    }

    /// Positive definiteness via a Cholesky factorization attempt.
    pub fn is_positive_definite(&self) -> bool {
        Cholesky::new(self.to_dmatrix()).is_some()
    }

    /// `d' A d`.
    #[inline]
    pub fn quadratic_form(&self, d: &[T]) -> T {
        debug_assert_eq!(d.len(), self.n);
        let two = real::<T>(2.0);
        let mut acc = T::zero();
        for i in 0..self.n {
            acc += self.get(i, i) * d[i] * d[i];
            for j in (i + 1)..self.n {
                acc += two * self.get(i, j) * d[i] * d[j];
            }
        }
        acc
    }

    pub fn all_finite(&self) -> bool {
        self.upper.iter().all(|v| v.is_finite())
    }
}

/// Evaluation point in the canonical `(t, z, x)` order.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Point<T> {
    pub t: T,
    pub z: T,
    pub x: T,
}

impl<T: Real> Point<T> {
    pub fn new(t: T, z: T, x: T) -> Self {
        Self { t, z, x }
    }
}

/// Full parameterization of an N-phase theta function.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ThetaParams<T> {
    n: usize,
    pub k: Vec<T>,
    pub omega: Vec<T>,
    pub l: Vec<T>,
    pub eta0: Vec<T>,
    pub tau: SymMatrix<T>,
}

impl<T: Real> ThetaParams<T> {
    /// Validates lengths, finiteness and positive definiteness of `tau`
    /// (by symmetric factorization) before any evaluation is possible.
    pub fn new(
        k: Vec<T>,
        omega: Vec<T>,
        l: Vec<T>,
        eta0: Vec<T>,
        tau: SymMatrix<T>,
    ) -> Result<Self, ThetaError> {
        let n = tau.n();
        for (name, v) in [("k", &k), ("omega", &omega), ("l", &l), ("eta0", &eta0)] {
            if v.len() != n {
                return Err(ThetaError::LengthMismatch {
                    name,
                    expected: n,
                    got: v.len(),
                });
            }
            if v.iter().any(|x| !x.is_finite()) {
                return Err(ThetaError::NonFinite(name));
            }
        }
        if !tau.all_finite() {
            return Err(ThetaError::NonFinite("tau"));
        }
        if !tau.is_positive_definite() {
            return Err(ThetaError::NotPositiveDefinite);
        }
        Ok(Self {
            n,
            k,
            omega,
            l,
            eta0,
            tau,
        })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    /// Phase vector `eta_j = omega_j t + l_j z + k_j x + eta0_j`.
    pub fn phases(&self, point: Point<T>) -> Vec<T> {
        (0..self.n)
            .map(|j| {
                self.omega[j] * point.t + self.l[j] * point.z + self.k[j] * point.x + self.eta0[j]
            })
            .collect()
    }

    /// Truncated theta value at a point.
    pub fn eval(&self, point: Point<T>, trunc: &LatticeTruncation<T>) -> T {
        self.series_sum(point, [0, 0, 0], trunc)
    }

    /// Partial derivative of the series with the multi-index `orders`
    /// over `(t, z, x)`; total order at most 4.
    pub fn partial(
        &self,
        point: Point<T>,
        orders: [u32; 3],
        trunc: &LatticeTruncation<T>,
    ) -> Result<T, ThetaError> {
        let total: u32 = orders.iter().sum();
        if total > 4 {
            return Err(ThetaError::OrderTooHigh { total, max: 4 });
        }
        Ok(self.series_sum(point, orders, trunc))
    }

    /// Term-wise differentiated cosine series. Each derivative in a
    /// variable multiplies the lattice term by the corresponding dot
    /// product (`m.omega`, `m.l` or `m.k`) and advances the cosine by a
    /// quarter turn.
    fn series_sum(&self, point: Point<T>, orders: [u32; 3], trunc: &LatticeTruncation<T>) -> T {
        let eta = self.phases(point);
        let m_max = trunc.m_max() as i64;
        let lo = vec![-m_max; self.n];
        let hi = vec![m_max; self.n];
        let half = real::<T>(0.5);
        let total: u32 = orders.iter().sum();
        let mut acc = KahanSum::new();
        let mut mf: Vec<T> = vec![T::zero(); self.n];
        for_each_lattice_point(&lo, &hi, |m| {
            for (slot, &mj) in mf.iter_mut().zip(m) {
                *slot = real::<T>(mj as f64);
            }
            let mut phi = T::zero();
            let mut m_omega = T::zero();
            let mut m_l = T::zero();
            let mut m_k = T::zero();
            for j in 0..self.n {
                phi += mf[j] * eta[j];
                m_omega += mf[j] * self.omega[j];
                m_l += mf[j] * self.l[j];
                m_k += mf[j] * self.k[j];
            }
            let weight = (-half * self.tau.quadratic_form(&mf)).exp();
            let mut factor = T::one();
            for (dot, &ord) in [m_omega, m_l, m_k].into_iter().zip(&orders) {
                if ord > 0 {
                    factor *= dot.powi(ord as i32);
                }
            }
            acc.add(factor * cos_shift(phi, total) * weight);
        });
        acc.value()
    }
}

/// `d^p/dphi^p cos(phi)` = `cos(phi + p*pi/2)`, evaluated exactly.
#[inline]
fn cos_shift<T: Real>(phi: T, quarter_turns: u32) -> T {
    match quarter_turns % 4 {
        0 => phi.cos(),
        1 => -phi.sin(),
        2 => -phi.cos(),
        _ => phi.sin(),
    }
}

/// Symmetric truncation bound for lattice sums: every index runs over
/// `[-m_max, m_max]` (shifted sums extend one slot on the right).
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LatticeTruncation<T> {
    m_max: usize,
    tail_tol: T,
}

impl<T: Real> LatticeTruncation<T> {
    // negated so a NaN tolerance is also rejected
    #[allow(clippy::neg_cmp_op_on_partial_ord)]
    pub fn new(m_max: usize, tail_tol: T) -> Result<Self, ThetaError> {
        if m_max < 1 || !(tail_tol > T::zero()) {
            return Err(ThetaError::InvalidTruncation);
        }
        Ok(Self { m_max, tail_tol })
    }

    pub fn m_max(&self) -> usize {
        self.m_max
    }

    pub fn tail_tol(&self) -> T {
        self.tail_tol
    }

    /// Same tolerance with a different bound; used by truncation-stability
    /// checks and CLI overrides.
    pub fn with_m_max(&self, m_max: usize) -> Result<Self, ThetaError> {
        Self::new(m_max, self.tail_tol)
    }
}

/// Smallest bound `M >= 1` whose first omitted lattice shell has a
/// Gaussian weight below `tail_tol`.
///
/// The first omitted index sits at distance `M + 1/2` from the origin for
/// the half-integer-shifted sums of the residual conditions (`shifted`),
/// and at `M + 1` for the plain theta series; the decay rate is bounded by
/// the smallest eigenvalue of `tau`. The bound uses the theta-series
/// weight `exp(-1/2 m' tau m)`, which is conservative for the shifted
/// condition sums (their Gaussian decays twice as fast).
#[allow(clippy::neg_cmp_op_on_partial_ord)] // negated comparisons also reject NaN
pub fn choose_truncation<T: Real>(
    tau: &SymMatrix<T>,
    tail_tol: T,
    shifted: bool,
) -> Result<LatticeTruncation<T>, ThetaError> {
    if !(tail_tol > T::zero()) {
        return Err(ThetaError::InvalidTruncation);
    }
    let lambda_min = tau.min_eigenvalue();
    if !(lambda_min > T::zero()) {
        return Err(ThetaError::NotPositiveDefinite);
    }
    let offset = if shifted { real::<T>(0.5) } else { T::one() };
    let half = real::<T>(0.5);
    let mut m = 1usize;
    loop {
        let dist = real::<T>(m as f64) + offset;
        if (-half * lambda_min * dist * dist).exp() < tail_tol {
            break;
        }
        m += 1;
        assert!(m < 1_000_000, "unreachable: lambda_min > 0 guarantees exit");
    }
    LatticeTruncation::new(m, tail_tol)
}
