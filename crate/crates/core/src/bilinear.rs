//! Coupled KdV-type Hirota bilinear forms.
//!
//! A bilinear form is an even multivariate polynomial in the D-operator
//! symbols, kept in the canonical variable order `(D_t, D_z, D_x)`, plus an
//! optional additive integral constant. Coefficients are stored as exact
//! rationals and converted to the working scalar at evaluation, so the
//! built-in registry never drifts across scalar types.
//!
//! Evenness of every term is enforced at construction: it is what makes
//! the form real-valued on purely imaginary arguments, which the whole
//! residual machinery relies on.

use num_rational::Ratio;

use crate::scalar::{real, Real};

/// Number of D-operator variables; canonical order is `(t, z, x)`.
pub const VARS: usize = 3;

/// Index of `D_t` in the canonical argument order.
pub const VAR_T: usize = 0;
/// Index of `D_z` in the canonical argument order.
pub const VAR_Z: usize = 1;
/// Index of `D_x` in the canonical argument order.
pub const VAR_X: usize = 2;

/// Exact rational coefficient of a D-monomial.
pub type Coeff = Ratio<i64>;

#[derive(Debug, thiserror::Error)]
pub enum BilinearError {
    #[error("term {index} has odd total degree {degree}; bilinear forms must be even")]
    OddDegree { index: usize, degree: u32 },
    #[error("duplicate exponent tuple {exps:?}")]
    DuplicateExponents { exps: [u32; VARS] },
    #[error("expected {expected} arguments, got {got}")]
    ArityMismatch { expected: usize, got: usize },
    #[error("unknown bilinear system `{0}` (built-in: coupled-ramani, hirota-satsuma)")]
    UnknownSystem(String),
    #[error("coefficient {0} has no exact rational representation in i64")]
    UnrepresentableCoefficient(f64),
}

/// One D-monomial: `coeff * D_t^e0 D_z^e1 D_x^e2`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Term {
    pub coeff: Coeff,
    pub exps: [u32; VARS],
}

impl Term {
    fn total_degree(&self) -> u32 {
        self.exps.iter().sum()
    }
}

/// Even polynomial in the D-operator symbols with an optional integral
/// constant slot. The constant's value is supplied at evaluation time; the
/// form only records whether the slot exists.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct BilinearForm {
    terms: Vec<Term>,
    has_constant: bool,
}

impl BilinearForm {
    /// Builds a form from `(coefficient, exponent tuple)` pairs.
    ///
    /// Zero-coefficient terms are dropped; odd-degree or duplicated
    /// monomials are hard errors since they would silently corrupt every
    /// downstream evaluation.
    pub fn new(
        terms: impl IntoIterator<Item = (Coeff, [u32; VARS])>,
        has_constant: bool,
    ) -> Result<Self, BilinearError> {
        let mut out: Vec<Term> = Vec::new();
        for (index, (coeff, exps)) in terms.into_iter().enumerate() {
            let term = Term { coeff, exps };
            let degree = term.total_degree();
            if degree % 2 != 0 {
                return Err(BilinearError::OddDegree { index, degree });
            }
            if coeff == Coeff::from_integer(0) {
                continue;
            }
            if out.iter().any(|t| t.exps == exps) {
                return Err(BilinearError::DuplicateExponents { exps });
            }
            out.push(term);
        }
        Ok(Self {
            terms: out,
            has_constant,
        })
    }

    pub fn terms(&self) -> &[Term] {
        &self.terms
    }

    pub fn has_constant(&self) -> bool {
        self.has_constant
    }

    /// Evaluates the polynomial at a real argument vector, adding `c` when
    /// the constant slot is present.
    pub fn eval_real<T: Real>(&self, args: &[T], c: T) -> Result<T, BilinearError> {
        if args.len() != VARS {
            return Err(BilinearError::ArityMismatch {
                expected: VARS,
                got: args.len(),
            });
        }
        let mut acc = if self.has_constant { c } else { T::zero() };
        for term in &self.terms {
            let mut prod: T = coeff_to(term.coeff);
            for (v, &e) in term.exps.iter().enumerate() {
                if e > 0 {
                    prod *= args[v].powi(e as i32);
                }
            }
            acc += prod;
        }
        Ok(acc)
    }

    /// Evaluates the polynomial at the purely imaginary vector `i * d`.
    ///
    /// Every term has even total degree `|e|`, so `i^|e| = (-1)^(|e|/2)`
    /// and the value is real: each monomial contributes
    /// `coeff * (-1)^(|e|/2) * prod_v d_v^(e_v)`.
    pub fn eval_imag<T: Real>(&self, d: &[T], c: T) -> Result<T, BilinearError> {
        if d.len() != VARS {
            return Err(BilinearError::ArityMismatch {
                expected: VARS,
                got: d.len(),
            });
        }
        let mut acc = if self.has_constant { c } else { T::zero() };
        for term in &self.terms {
            let mut prod: T = signed_coeff(term);
            for (v, &e) in term.exps.iter().enumerate() {
                if e > 0 {
                    prod *= d[v].powi(e as i32);
                }
            }
            acc += prod;
        }
        Ok(acc)
    }

    /// Partial derivative of [`eval_imag`](Self::eval_imag) with respect to
    /// `d[var]`, at constant slot 0.
    pub fn eval_imag_partial<T: Real>(&self, d: &[T], var: usize) -> Result<T, BilinearError> {
        if d.len() != VARS {
            return Err(BilinearError::ArityMismatch {
                expected: VARS,
                got: d.len(),
            });
        }
        assert!(var < VARS, "variable index out of range");
        let mut acc = T::zero();
        for term in &self.terms {
            let e_var = term.exps[var];
            if e_var == 0 {
                continue;
            }
            let mut prod: T = signed_coeff::<T>(term) * real::<T>(f64::from(e_var));
            for (v, &e) in term.exps.iter().enumerate() {
                let e_eff = if v == var { e - 1 } else { e };
                if e_eff > 0 {
                    prod *= d[v].powi(e_eff as i32);
                }
            }
            acc += prod;
        }
        Ok(acc)
    }
}

#[inline]
fn coeff_to<T: Real>(q: Coeff) -> T {
    real::<T>(*q.numer() as f64) / real::<T>(*q.denom() as f64)
}

#[inline]
fn signed_coeff<T: Real>(term: &Term) -> T {
    let c: T = coeff_to(term.coeff);
    if (term.total_degree() / 2) % 2 == 0 {
        c
    } else {
        -c
    }
}

/// Exact conversion of a finite binary float into a rational.
///
/// Every finite `f64` is a dyadic rational; the conversion fails only when
/// numerator or denominator overflows `i64` (enormous or subnormal inputs),
/// which no sane equation coefficient does.
pub fn coeff_from_f64(x: f64) -> Result<Coeff, BilinearError> {
    if !x.is_finite() {
        return Err(BilinearError::UnrepresentableCoefficient(x));
    }
    if x == 0.0 {
        return Ok(Coeff::from_integer(0));
    }
    let bits = x.to_bits();
    let negative = bits >> 63 == 1;
    let biased = ((bits >> 52) & 0x7ff) as i64;
    let frac = (bits & ((1u64 << 52) - 1)) as i64;
    let (mut mant, mut exp) = if biased == 0 {
        (frac, -1074i64)
    } else {
        (frac | (1i64 << 52), biased - 1075)
    };
    while mant & 1 == 0 && exp < 0 {
        mant >>= 1;
        exp += 1;
    }
    let q = if exp >= 0 {
        if exp > 62 {
            return Err(BilinearError::UnrepresentableCoefficient(x));
        }
        mant.checked_mul(1i64 << exp)
            .map(Coeff::from_integer)
            .ok_or(BilinearError::UnrepresentableCoefficient(x))?
    } else {
        if exp < -62 {
            return Err(BilinearError::UnrepresentableCoefficient(x));
        }
        Coeff::new(mant, 1i64 << (-exp))
    };
    Ok(if negative { -q } else { q })
}

/// A coupled pair of bilinear forms, the equation being solved.
#[derive(Clone, Debug, PartialEq)]
pub struct BilinearSystem {
    pub name: String,
    pub f1: BilinearForm,
    pub f2: BilinearForm,
    pub variable_names: [&'static str; VARS],
}

impl BilinearSystem {
    pub fn new(name: impl Into<String>, f1: BilinearForm, f2: BilinearForm) -> Self {
        Self {
            name: name.into(),
            f1,
            f2,
            variable_names: ["t", "z", "x"],
        }
    }

    pub fn form(&self, index: usize) -> &BilinearForm {
        match index {
            0 => &self.f1,
            1 => &self.f2,
            _ => panic!("a coupled system has exactly two forms"),
        }
    }
}

/// Names accepted by [`builtin_system`].
pub const BUILTIN_SYSTEMS: [&str; 2] = ["coupled-ramani", "hirota-satsuma"];

/// Returns a registered coupled bilinear system.
///
/// `coupled-ramani`:
///   F1 = D_x^6 - 5 D_x^3 D_t - 5 D_t^2 + 9 D_x D_z + c1,
///   F2 = D_z D_t - D_z D_x^3 - 6 v0 D_x^2 + c2.
///
/// `hirota-satsuma` (v0 ignored):
///   F1 = D_x D_t - 1/4 D_x^4 - 3/4 D_z^2 + c1,
///   F2 = D_z D_t + 1/2 D_z D_x^3 + c2.
///
/// The Hirota-Satsuma bilinear pair has no integral constants of its own;
/// constant slots are added here because the periodic-wave conditions need
/// them as free parameters. `v0` must be exactly representable as a dyadic
/// rational (any short decimal is).
pub fn builtin_system(name: &str, v0: f64) -> Result<BilinearSystem, BilinearError> {
    let int = Coeff::from_integer;
    match name {
        "coupled-ramani" => {
            let f1 = BilinearForm::new(
                [
                    (int(1), [0, 0, 6]),
                    (int(-5), [1, 0, 3]),
                    (int(-5), [2, 0, 0]),
                    (int(9), [0, 1, 1]),
                ],
                true,
            )?;
            let f2 = BilinearForm::new(
                [
                    (int(1), [1, 1, 0]),
                    (int(-1), [0, 1, 3]),
                    (int(-6) * coeff_from_f64(v0)?, [0, 0, 2]),
                ],
                true,
            )?;
            Ok(BilinearSystem::new(name, f1, f2))
        }
        "hirota-satsuma" => {
            let f1 = BilinearForm::new(
                [
                    (int(1), [1, 0, 1]),
                    (Coeff::new(-1, 4), [0, 0, 4]),
                    (Coeff::new(-3, 4), [0, 2, 0]),
                ],
                true,
            )?;
            let f2 = BilinearForm::new([(int(1), [1, 1, 0]), (Coeff::new(1, 2), [0, 1, 3])], true)?;
            Ok(BilinearSystem::new(name, f1, f2))
        }
        other => Err(BilinearError::UnknownSystem(other.to_string())),
    }
}
