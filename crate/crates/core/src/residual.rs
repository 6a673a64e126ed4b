//! The nonlinear condition system for N-periodic waves.
//!
//! Substituting an N-phase theta ansatz into a coupled bilinear system
//! leaves, for each form and each half-period shift `mu` in {0,1}^N, one
//! scalar condition: a lattice sum of the form evaluated at the purely
//! imaginary argument `2i sum_j (m_j - mu_j/2) (omega_j, l_j, k_j)` and
//! weighted by `exp(-d' tau d)` with `d_j = m_j - mu_j/2`. Note the weight
//! carries no 1/2 factor, unlike the theta series itself.
//!
//! With the wave numbers and the tau diagonal given, the free parameters
//! are `omega`, `l`, the strict upper triangle of tau and the two integral
//! constants: `2^(N+1)` equations in `N + 2 + N(N+1)/2` unknowns, square
//! only for N = 1.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::bilinear::{BilinearError, BilinearForm, BilinearSystem};
use crate::scalar::{real, Real};
use crate::theta::{LatticeTruncation, SymMatrix, ThetaError};
use crate::util::{for_each_lattice_point, KahanSum};

#[derive(Debug, thiserror::Error)]
pub enum ResidualError<T> {
    #[error("assembled tau matrix is not positive definite")]
    TauNotPositiveDefinite { tau: SymMatrix<T> },
    #[error("unknown vector sized for {got} phases, system has {expected}")]
    PhaseCountMismatch { expected: usize, got: usize },
    #[error(transparent)]
    Bilinear(#[from] BilinearError),
    #[error(transparent)]
    Theta(ThetaError),
}

/// The solver's free parameters in canonical flattened order
/// `(omega_1..omega_N, l_1..l_N, tau_12, tau_13, ..., tau_{N-1,N}, c1, c2)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct UnknownVector<T> {
    pub omega: Vec<T>,
    pub l: Vec<T>,
    pub tau_off: Vec<T>,
    pub c1: T,
    pub c2: T,
}

impl<T: Real> UnknownVector<T> {
    pub fn zeros(n: usize) -> Self {
        Self {
            omega: vec![T::zero(); n],
            l: vec![T::zero(); n],
            tau_off: vec![T::zero(); n * (n - 1) / 2],
            c1: T::zero(),
            c2: T::zero(),
        }
    }

    pub fn n(&self) -> usize {
        self.omega.len()
    }

    /// `N + 2 + N(N+1)/2`.
    pub fn dim(&self) -> usize {
        let n = self.n();
        2 * n + n * (n - 1) / 2 + 2
    }

    pub fn flatten(&self) -> DVector<T> {
        let mut out = Vec::with_capacity(self.dim());
        out.extend_from_slice(&self.omega);
        out.extend_from_slice(&self.l);
        out.extend_from_slice(&self.tau_off);
        out.push(self.c1);
        out.push(self.c2);
        DVector::from_vec(out)
    }

    pub fn from_flat(n: usize, flat: &DVector<T>) -> Self {
        let p = n * (n - 1) / 2;
        assert_eq!(flat.len(), 2 * n + p + 2, "flattened length mismatch");
        Self {
            omega: flat.as_slice()[0..n].to_vec(),
            l: flat.as_slice()[n..2 * n].to_vec(),
            tau_off: flat.as_slice()[2 * n..2 * n + p].to_vec(),
            c1: flat[2 * n + p],
            c2: flat[2 * n + p + 1],
        }
    }
}

/// The fixed parameters of a solve: wave numbers, tau diagonal, and the
/// two transformation offsets. `v0` must match the value baked into the
/// bilinear system's registry entry; `u0` only offsets the reconstructed
/// `u` field.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GivenParams<T> {
    pub k: Vec<T>,
    pub tau_diag: Vec<T>,
    pub v0: T,
    pub u0: T,
}

impl<T: Real> GivenParams<T> {
    pub fn new(k: Vec<T>, tau_diag: Vec<T>, v0: T, u0: T) -> Result<Self, ThetaError> {
        if k.len() != tau_diag.len() || k.is_empty() {
            return Err(ThetaError::LengthMismatch {
                name: "tau_diag",
                expected: k.len().max(1),
                got: tau_diag.len(),
            });
        }
        if k.iter().chain(&tau_diag).any(|v| !v.is_finite()) || !v0.is_finite() || !u0.is_finite() {
            return Err(ThetaError::NonFinite("given parameters"));
        }
        // negated so NaN entries are also rejected
        #[allow(clippy::neg_cmp_op_on_partial_ord)]
        if tau_diag.iter().any(|&d| !(d > T::zero())) {
            return Err(ThetaError::NotPositiveDefinite);
        }
        Ok(Self {
            k,
            tau_diag,
            v0,
            u0,
        })
    }

    pub fn n(&self) -> usize {
        self.k.len()
    }
}

/// The assembled condition system: one bilinear system, the given
/// parameters, a lattice truncation and the fixed `mu` enumeration.
#[derive(Clone, Debug)]
pub struct ResidualSystem<T> {
    system: BilinearSystem,
    given: GivenParams<T>,
    trunc: LatticeTruncation<T>,
    mu_list: Vec<Vec<u8>>,
}

impl<T: Real> ResidualSystem<T> {
    pub fn new(system: BilinearSystem, given: GivenParams<T>, trunc: LatticeTruncation<T>) -> Self {
        let n = given.n();
        // Binary counting order: mu_1 is the most significant bit.
        let mu_list = (0..1usize << n)
            .map(|b| (0..n).map(|j| ((b >> (n - 1 - j)) & 1) as u8).collect())
            .collect();
        Self {
            system,
            given,
            trunc,
            mu_list,
        }
    }

    pub fn n(&self) -> usize {
        self.given.n()
    }

    /// `2^(N+1)` conditions: the F1 block, then the F2 block, `mu` in
    /// binary counting order within each block.
    pub fn num_conditions(&self) -> usize {
        2 << self.n()
    }

    pub fn num_unknowns(&self) -> usize {
        let n = self.n();
        2 * n + n * (n - 1) / 2 + 2
    }

    pub fn system(&self) -> &BilinearSystem {
        &self.system
    }

    pub fn given(&self) -> &GivenParams<T> {
        &self.given
    }

    pub fn trunc(&self) -> &LatticeTruncation<T> {
        &self.trunc
    }

    pub fn mu_list(&self) -> &[Vec<u8>] {
        &self.mu_list
    }

    /// Evaluations with a different lattice bound (truncation checks).
    pub fn with_m_max(&self, m_max: usize) -> Result<Self, ThetaError> {
        Ok(Self {
            system: self.system.clone(),
            given: self.given.clone(),
            trunc: self.trunc.with_m_max(m_max)?,
            mu_list: self.mu_list.clone(),
        })
    }

    /// Full tau from the given diagonal and the unknown off-diagonal,
    /// verified positive definite.
    pub fn assemble_tau(&self, x: &UnknownVector<T>) -> Result<SymMatrix<T>, ResidualError<T>> {
        if x.n() != self.n() {
            return Err(ResidualError::PhaseCountMismatch {
                expected: self.n(),
                got: x.n(),
            });
        }
        let tau = SymMatrix::from_parts(&self.given.tau_diag, &x.tau_off)
            .map_err(ResidualError::Theta)?;
        if !tau.is_positive_definite() {
            return Err(ResidualError::TauNotPositiveDefinite { tau });
        }
        Ok(tau)
    }

    /// The residual vector H.
    pub fn residuals(&self, x: &UnknownVector<T>) -> Result<DVector<T>, ResidualError<T>> {
        Ok(self.eval(x, false)?.0)
    }

    /// The analytic Jacobian of H with respect to the flattened unknowns.
    pub fn jacobian(&self, x: &UnknownVector<T>) -> Result<DMatrix<T>, ResidualError<T>> {
        Ok(self.eval(x, true)?.1.expect("jacobian requested"))
    }

    /// Residuals and Jacobian from one shared lattice traversal.
    pub fn residuals_and_jacobian(
        &self,
        x: &UnknownVector<T>,
    ) -> Result<(DVector<T>, DMatrix<T>), ResidualError<T>> {
        let (h, j) = self.eval(x, true)?;
        Ok((h, j.expect("jacobian requested")))
    }

    /// Shared kernel. Column layout of the Jacobian follows the canonical
    /// flattened order; per-column derivations:
    /// d/omega_j and d/l_j chain through the first and second imaginary
    /// argument with factor `2 d_j`, d/tau_pq multiplies the term by
    /// `-2 d_p d_q` (both symmetric slots), d/c_i is a pure weight sum on
    /// the matching block.
    fn eval(
        &self,
        x: &UnknownVector<T>,
        with_jacobian: bool,
    ) -> Result<(DVector<T>, Option<DMatrix<T>>), ResidualError<T>> {
        let n = self.n();
        let tau = self.assemble_tau(x)?;
        let rows = self.num_conditions();
        let cols = self.num_unknowns();
        let half = real::<T>(0.5);
        let two = real::<T>(2.0);
        let m_max = self.trunc.m_max() as i64;

        let forms: [&BilinearForm; 2] = [&self.system.f1, &self.system.f2];
        let consts = [x.c1, x.c2];

        let mut h_acc: Vec<KahanSum<T>> = vec![KahanSum::new(); rows];
        let mut j_acc: Vec<KahanSum<T>> = if with_jacobian {
            vec![KahanSum::new(); rows * cols]
        } else {
            Vec::new()
        };

        let mut d = vec![T::zero(); n];
        for (b, mu) in self.mu_list.iter().enumerate() {
            // For mu_j = 1 the summand is centered at m_j = 1/2, so the box
            // extends one slot to the right to stay symmetric in d.
            let lo = vec![-m_max; n];
            let hi: Vec<i64> = mu.iter().map(|&u| m_max + i64::from(u)).collect();
            for_each_lattice_point(&lo, &hi, |m| {
                let mut arg_omega = T::zero();
                let mut arg_l = T::zero();
                let mut arg_k = T::zero();
                for j in 0..n {
                    d[j] = real::<T>(m[j] as f64) - half * real::<T>(f64::from(mu[j]));
                    arg_omega += d[j] * x.omega[j];
                    arg_l += d[j] * x.l[j];
                    arg_k += d[j] * self.given.k[j];
                }
                let args = [two * arg_omega, two * arg_l, two * arg_k];
                let weight = (-tau.quadratic_form(&d)).exp();
                for (fi, form) in forms.iter().enumerate() {
                    let row = fi * (rows / 2) + b;
                    let g = form
                        .eval_imag(&args, consts[fi])
                        .expect("canonical 3-argument evaluation");
                    h_acc[row].add(g * weight);
                    if with_jacobian {
                        let g_t = form
                            .eval_imag_partial(&args, 0)
                            .expect("canonical 3-argument evaluation");
                        let g_z = form
                            .eval_imag_partial(&args, 1)
                            .expect("canonical 3-argument evaluation");
                        for j in 0..n {
                            let chain = two * d[j] * weight;
                            j_acc[row * cols + j].add(g_t * chain);
                            j_acc[row * cols + n + j].add(g_z * chain);
                        }
                        let mut col = 2 * n;
                        for p in 0..n {
                            for q in (p + 1)..n {
                                j_acc[row * cols + col].add(-two * d[p] * d[q] * g * weight);
                                col += 1;
                            }
                        }
                        if form.has_constant() {
                            j_acc[row * cols + cols - 2 + fi].add(weight);
                        }
                    }
                }
            });
        }

        let h = DVector::from_iterator(rows, h_acc.iter().map(|a| a.value()));
        let j =
            with_jacobian.then(|| DMatrix::from_fn(rows, cols, |r, c| j_acc[r * cols + c].value()));
        Ok((h, j))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bilinear::builtin_system;
    use crate::theta::choose_truncation;
    use num_complex::Complex64;

    fn two_pi() -> f64 {
        std::f64::consts::TAU
    }

    /// N=1 system at the converged single-phase parameters.
    fn n1_system() -> (ResidualSystem<f64>, UnknownVector<f64>) {
        let system = builtin_system("coupled-ramani", 0.0).unwrap();
        let given =
            GivenParams::new(vec![two_pi() / 10.0], vec![0.46 * two_pi()], 0.0, 0.0).unwrap();
        let tau = SymMatrix::from_parts(&given.tau_diag, &[]).unwrap();
        let trunc = choose_truncation(&tau, 1e-20, true).unwrap();
        let rs = ResidualSystem::new(system, given, trunc);
        let x = UnknownVector {
            omega: vec![0.1424],
            l: vec![0.0921],
            tau_off: vec![],
            c1: 0.8494,
            c2: 0.0419,
        };
        (rs, x)
    }

    /// N=2 system near the first two-phase example.
    fn n2_system() -> (ResidualSystem<f64>, UnknownVector<f64>) {
        let system = builtin_system("coupled-ramani", 0.0).unwrap();
        let given = GivenParams::new(
            vec![two_pi() / 10.0, 2.0 * two_pi() / 10.0],
            vec![0.96 * two_pi(), 1.23 * two_pi()],
            0.0,
            0.0,
        )
        .unwrap();
        let x = UnknownVector {
            omega: vec![0.3556, -1.9620],
            l: vec![0.0313, 3.0793],
            tau_off: vec![0.9060],
            c1: 0.0460,
            c2: 0.0651,
        };
        let tau = SymMatrix::from_parts(&given.tau_diag, &x.tau_off).unwrap();
        let trunc = choose_truncation(&tau, 1e-20, true).unwrap();
        (ResidualSystem::new(system, given, trunc), x)
    }

    #[test]
    fn dimensions_match_phase_count() {
        let (rs1, x1) = n1_system();
        assert_eq!(rs1.num_conditions(), 4);
        assert_eq!(rs1.num_unknowns(), 4);
        assert_eq!(x1.dim(), 4);
        let (rs2, x2) = n2_system();
        assert_eq!(rs2.num_conditions(), 8);
        assert_eq!(rs2.num_unknowns(), 7);
        assert_eq!(x2.dim(), 7);
        let system = builtin_system("coupled-ramani", 0.0).unwrap();
        let given = GivenParams::new(vec![0.1, 0.2, 0.3], vec![1.0, 1.0, 1.0], 0.0, 0.0).unwrap();
        let tau = SymMatrix::from_parts(&given.tau_diag, &[0.0, 0.0, 0.0]).unwrap();
        let trunc = choose_truncation(&tau, 1e-20, true).unwrap();
        let rs3 = ResidualSystem::new(system, given, trunc);
        assert_eq!(rs3.num_conditions(), 16);
        assert_eq!(rs3.num_unknowns(), 11);
    }

    #[test]
    fn mu_enumeration_is_binary_counting() {
        let (rs, _) = n2_system();
        assert_eq!(
            rs.mu_list(),
            &[vec![0, 0], vec![0, 1], vec![1, 0], vec![1, 1]]
        );
    }

    #[test]
    fn published_single_phase_values_nearly_solve_the_system() {
        let (rs, x) = n1_system();
        let h = rs.residuals(&x).unwrap();
        assert!(h.norm() <= 1e-3, "|H| = {}", h.norm());
    }

    #[test]
    fn constant_only_form_with_zero_constant_gives_zero_rows() {
        let f1 = BilinearForm::new(std::iter::empty(), true).unwrap();
        let f2 = BilinearForm::new(std::iter::empty(), true).unwrap();
        let system = BilinearSystem::new("constants", f1, f2);
        let given = GivenParams::new(vec![0.5], vec![3.0], 0.0, 0.0).unwrap();
        let tau = SymMatrix::from_parts(&[3.0], &[]).unwrap();
        let trunc = choose_truncation(&tau, 1e-20, true).unwrap();
        let rs = ResidualSystem::new(system, given, trunc);
        let mut x = UnknownVector::zeros(1);
        x.omega[0] = 0.7;
        x.l[0] = -0.2;
        let h = rs.residuals(&x).unwrap();
        assert!(h.iter().all(|&v| v == 0.0), "H = {h:?}");
    }

    /// Half-lattice oracle for N=1: pair m with -m (mu=0, center term
    /// alone) or with 1-m (mu=1, no center), using form evenness.
    #[test]
    fn shifted_sum_matches_symmetry_reduction() {
        let (rs, x) = n1_system();
        let m_max = rs.trunc().m_max() as i64;
        let tau = rs.assemble_tau(&x).unwrap();
        for mu in [0u8, 1] {
            for (fi, c) in [(0usize, x.c1), (1, x.c2)] {
                let form = rs.system().form(fi);
                let term = |m: i64| -> f64 {
                    let d = m as f64 - 0.5 * f64::from(mu);
                    let args = [
                        2.0 * d * x.omega[0],
                        2.0 * d * x.l[0],
                        2.0 * d * rs.given().k[0],
                    ];
                    form.eval_imag(&args, c).unwrap() * (-tau.quadratic_form(&[d])).exp()
                };
                let full: f64 = (-m_max..=m_max + i64::from(mu)).map(term).sum();
                // For mu=0 the pairs are (m, -m), m >= 1, plus the self-paired
                // center; for mu=1 they are (m, 1-m), m >= 1, with no center.
                let reduced = if mu == 0 {
                    term(0) + 2.0 * (1..=m_max).map(term).sum::<f64>()
                } else {
                    2.0 * (1..=m_max + 1).map(term).sum::<f64>()
                };
                assert!(
                    (full - reduced).abs() <= 1e-15 * (1.0 + full.abs()),
                    "mu={mu} form={fi}: {full} vs {reduced}"
                );
            }
        }
    }

    /// Complex re-evaluation of the conditions: F evaluated at the complex
    /// argument with num-complex, weight unchanged.
    #[test]
    fn residuals_are_real_against_complex_reference() {
        let (rs, x) = n2_system();
        let tau = rs.assemble_tau(&x).unwrap();
        let m_max = rs.trunc().m_max() as i64;
        let h = rs.residuals(&x).unwrap();
        for (b, mu) in rs.mu_list().iter().enumerate() {
            for (fi, c) in [(0usize, x.c1), (1, x.c2)] {
                let form = rs.system().form(fi);
                let lo = vec![-m_max; 2];
                let hi: Vec<i64> = mu.iter().map(|&u| m_max + i64::from(u)).collect();
                let mut acc = Complex64::new(0.0, 0.0);
                for_each_lattice_point(&lo, &hi, |m| {
                    let d: Vec<f64> = m
                        .iter()
                        .zip(mu)
                        .map(|(&mj, &uj)| mj as f64 - 0.5 * f64::from(uj))
                        .collect();
                    let dot = |v: &[f64]| -> f64 { d.iter().zip(v).map(|(a, b)| a * b).sum() };
                    let args = [
                        Complex64::new(0.0, 2.0 * dot(&x.omega)),
                        Complex64::new(0.0, 2.0 * dot(&x.l)),
                        Complex64::new(0.0, 2.0 * dot(&rs.given().k)),
                    ];
                    let mut val = Complex64::new(c, 0.0);
                    for t in form.terms() {
                        let coeff = *t.coeff.numer() as f64 / *t.coeff.denom() as f64;
                        let mut prod = Complex64::new(coeff, 0.0);
                        for (v, &e) in t.exps.iter().enumerate() {
                            prod *= args[v].powu(e);
                        }
                        val += prod;
                    }
                    acc += val * (-tau.quadratic_form(&d)).exp();
                });
                let row = fi * 4 + b;
                assert!(acc.im.abs() < 1e-13, "imag part {}", acc.im);
                assert!((acc.re - h[row]).abs() < 1e-12 * (1.0 + acc.re.abs()));
            }
        }
    }

    #[test]
    fn jacobian_matches_finite_differences() {
        let (rs, x0) = n2_system();
        let j = rs.jacobian(&x0).unwrap();
        let flat = x0.flatten();
        let dim = flat.len();
        let mut max_rel: f64 = 0.0;
        for c in 0..dim {
            let scale = 1e-6 * (1.0 + flat[c].abs());
            let mut plus = flat.clone();
            let mut minus = flat.clone();
            plus[c] += scale;
            minus[c] -= scale;
            let hp = rs.residuals(&UnknownVector::from_flat(2, &plus)).unwrap();
            let hm = rs.residuals(&UnknownVector::from_flat(2, &minus)).unwrap();
            for r in 0..rs.num_conditions() {
                let fd = (hp[r] - hm[r]) / (2.0 * scale);
                let rel = (j[(r, c)] - fd).abs() / (1.0 + fd.abs());
                max_rel = max_rel.max(rel);
            }
        }
        assert!(max_rel < 1e-6, "max relative error {max_rel}");
    }

    #[test]
    fn constant_columns_have_block_structure() {
        let (rs, x) = n2_system();
        let j = rs.jacobian(&x).unwrap();
        let tau = rs.assemble_tau(&x).unwrap();
        let m_max = rs.trunc().m_max() as i64;
        let cols = rs.num_unknowns();
        for (b, mu) in rs.mu_list().iter().enumerate() {
            // Pure weight sum over the F1 block, zeros over the F2 block
            // (and symmetrically for c2).
            let lo = vec![-m_max; 2];
            let hi: Vec<i64> = mu.iter().map(|&u| m_max + i64::from(u)).collect();
            let mut wsum = KahanSum::new();
            for_each_lattice_point(&lo, &hi, |m| {
                let d: Vec<f64> = m
                    .iter()
                    .zip(mu)
                    .map(|(&mj, &uj)| mj as f64 - 0.5 * f64::from(uj))
                    .collect();
                wsum.add((-tau.quadratic_form(&d)).exp());
            });
            assert!((j[(b, cols - 2)] - wsum.value()).abs() < 1e-14 * wsum.value());
            assert_eq!(j[(b, cols - 1)], 0.0);
            assert_eq!(j[(4 + b, cols - 2)], 0.0);
            assert!((j[(4 + b, cols - 1)] - wsum.value()).abs() < 1e-14 * wsum.value());
        }
    }

    #[test]
    fn doubling_the_lattice_bound_is_inert() {
        let (rs, x) = n1_system();
        let h = rs.residuals(&x).unwrap();
        let rs2 = rs.with_m_max(rs.trunc().m_max() * 2).unwrap();
        let h2 = rs2.residuals(&x).unwrap();
        let diff = (h - h2).amax();
        assert!(diff < 1e-16, "inf-norm change {diff}");
    }

    #[test]
    fn indefinite_tau_is_reported_with_the_matrix() {
        let (rs, mut x) = n2_system();
        x.tau_off[0] = 100.0;
        match rs.residuals(&x) {
            Err(ResidualError::TauNotPositiveDefinite { tau }) => {
                assert_eq!(tau.get(0, 1), 100.0);
            }
            other => panic!("expected TauNotPositiveDefinite, got {other:?}"),
        }
    }

    #[test]
    fn phase_count_mismatch_is_rejected() {
        let (rs, _) = n2_system();
        let x = UnknownVector::<f64>::zeros(3);
        assert!(matches!(
            rs.residuals(&x),
            Err(ResidualError::PhaseCountMismatch {
                expected: 2,
                got: 3
            })
        ));
    }

    #[test]
    fn flatten_round_trip() {
        let (_, x) = n2_system();
        let rt = UnknownVector::from_flat(2, &x.flatten());
        assert_eq!(x, rt);
    }
}
