//! Physical field reconstruction and pointwise verification.
//!
//! A converged theta function yields the wave fields through the
//! logarithmic-derivative transformation
//! `u = u0 + (ln theta)_xx`, `v = v0 + (ln theta)_xz`.
//!
//! [`bilinear_residual`] is the independent check that a parameter set
//! actually solves the PDE pair and not merely the truncated algebraic
//! conditions: it evaluates `F(D) theta . theta` at a point as the raw
//! double lattice sum in complex arithmetic, where each D-monomial acts on
//! an exponential pair `(m, n)` as `prod_v (i (m - n).coef_v)^(e_v)`.

use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::io::{BufRead, Write};
use std::path::{Path, PathBuf};

use crate::bilinear::{BilinearForm, BilinearSystem};
use crate::residual::GivenParams;
use crate::scalar::{real, Real};
use crate::theta::{LatticeTruncation, Point, ThetaError, ThetaParams};
use crate::util::{for_each_lattice_point, Cplx, KahanSum};

#[derive(Debug, thiserror::Error)]
pub enum FieldError<T> {
    #[error("theta is not positive at (t={t}, z={z}, x={x}): {value}")]
    NonPositiveTheta { t: T, z: T, x: T, value: T },
    #[error(transparent)]
    Theta(#[from] ThetaError),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("{path}: line {line}: {message}")]
    Parse {
        path: PathBuf,
        line: usize,
        message: String,
    },
}

/// Uniformly sampled axis.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct AxisSpec<T> {
    pub min: T,
    pub max: T,
    pub count: usize,
}

impl<T: Real> AxisSpec<T> {
    pub fn new(min: T, max: T, count: usize) -> Self {
        Self { min, max, count }
    }

    pub fn samples(&self) -> Vec<T> {
        if self.count <= 1 {
            return vec![self.min];
        }
        let step = (self.max - self.min) / real::<T>((self.count - 1) as f64);
        (0..self.count)
            .map(|i| self.min + step * real::<T>(i as f64))
            .collect()
    }
}

/// Sampling window for field reconstruction; `z` is held fixed.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GridSpec<T> {
    pub x: AxisSpec<T>,
    pub t: AxisSpec<T>,
    pub z: T,
}

impl<T: Real> Default for GridSpec<T> {
    /// The window used by the shipped profiles: x in [0, 20], t in
    /// [0, 50], 201 x 201 points at z = 0.
    fn default() -> Self {
        Self {
            x: AxisSpec::new(T::zero(), real(20.0), 201),
            t: AxisSpec::new(T::zero(), real(50.0), 201),
            z: T::zero(),
        }
    }
}

/// Sampled wave fields plus the parameters that produced them.
/// Rows index `t`, columns index `x`.
#[derive(Clone, Debug, PartialEq)]
pub struct WaveGrid<T> {
    pub spec: GridSpec<T>,
    pub xs: Vec<T>,
    pub ts: Vec<T>,
    pub u: DMatrix<T>,
    pub v: DMatrix<T>,
    pub params: ThetaParams<T>,
    pub given: GivenParams<T>,
}

/// The five theta quantities entering the transformation at one point.
struct ThetaBundle<T> {
    value: T,
    dx: T,
    dxx: T,
    dz: T,
    dxz: T,
}

fn theta_bundle<T: Real>(
    p: &ThetaParams<T>,
    point: Point<T>,
    trunc: &LatticeTruncation<T>,
) -> ThetaBundle<T> {
    let eta = p.phases(point);
    let n = p.n();
    let m_max = trunc.m_max() as i64;
    let lo = vec![-m_max; n];
    let hi = vec![m_max; n];
    let half = real::<T>(0.5);
    let mut acc = [
        KahanSum::new(),
        KahanSum::new(),
        KahanSum::new(),
        KahanSum::new(),
        KahanSum::new(),
    ];
    let mut mf = vec![T::zero(); n];
    for_each_lattice_point(&lo, &hi, |m| {
        for (slot, &mj) in mf.iter_mut().zip(m) {
            *slot = real::<T>(mj as f64);
        }
        let mut phi = T::zero();
        let mut mk = T::zero();
        let mut ml = T::zero();
        for j in 0..n {
            phi += mf[j] * eta[j];
            mk += mf[j] * p.k[j];
            ml += mf[j] * p.l[j];
        }
        let w = (-half * p.tau.quadratic_form(&mf)).exp();
        let (sin, cos) = (phi.sin(), phi.cos());
        acc[0].add(cos * w);
        acc[1].add(-mk * sin * w);
        acc[2].add(-mk * mk * cos * w);
        acc[3].add(-ml * sin * w);
        acc[4].add(-mk * ml * cos * w);
    });
    ThetaBundle {
        value: acc[0].value(),
        dx: acc[1].value(),
        dxx: acc[2].value(),
        dz: acc[3].value(),
        dxz: acc[4].value(),
    }
}

/// `(u, v)` at a single point.
pub fn reconstruct_point<T: Real>(
    p: &ThetaParams<T>,
    given: &GivenParams<T>,
    point: Point<T>,
    trunc: &LatticeTruncation<T>,
) -> Result<(T, T), FieldError<T>> {
    let b = theta_bundle(p, point, trunc);
    // negated so a NaN value is also rejected
    #[allow(clippy::neg_cmp_op_on_partial_ord)]
    if !(b.value > T::zero()) {
        return Err(FieldError::NonPositiveTheta {
            t: point.t,
            z: point.z,
            x: point.x,
            value: b.value,
        });
    }
    let th2 = b.value * b.value;
    let u = given.u0 + (b.dxx * b.value - b.dx * b.dx) / th2;
    let v = given.v0 + (b.dxz * b.value - b.dx * b.dz) / th2;
    Ok((u, v))
}

/// Samples `u` and `v` over a grid; fails on the first grid point where
/// theta is not positive (scanning rows in t order).
pub fn reconstruct<T: Real>(
    p: &ThetaParams<T>,
    given: &GivenParams<T>,
    spec: &GridSpec<T>,
    trunc: &LatticeTruncation<T>,
) -> Result<WaveGrid<T>, FieldError<T>> {
    let xs = spec.x.samples();
    let ts = spec.t.samples();
    let rows: Vec<Result<Vec<(T, T)>, FieldError<T>>> = ts
        .par_iter()
        .map(|&t| {
            xs.iter()
                .map(|&x| reconstruct_point(p, given, Point::new(t, spec.z, x), trunc))
                .collect()
        })
        .collect();
    let mut u = DMatrix::zeros(ts.len(), xs.len());
    let mut v = DMatrix::zeros(ts.len(), xs.len());
    for (it, row) in rows.into_iter().enumerate() {
        for (ix, (uu, vv)) in row?.into_iter().enumerate() {
            u[(it, ix)] = uu;
            v[(it, ix)] = vv;
        }
    }
    Ok(WaveGrid {
        spec: *spec,
        xs,
        ts,
        u,
        v,
        params: p.clone(),
        given: given.clone(),
    })
}

/// Smallest theta value over a sampling grid, with its location. The
/// transformation needs theta > 0; this reports rather than asserts.
pub fn theta_minimum<T: Real>(
    p: &ThetaParams<T>,
    spec: &GridSpec<T>,
    trunc: &LatticeTruncation<T>,
) -> (T, Point<T>) {
    let xs = spec.x.samples();
    let ts = spec.t.samples();
    let mut min = (
        T::max_value().unwrap_or_else(T::one),
        Point::new(T::zero(), spec.z, T::zero()),
    );
    for &t in &ts {
        for &x in &xs {
            let point = Point::new(t, spec.z, x);
            let value = p.eval(point, trunc);
            if value < min.0 {
                min = (value, point);
            }
        }
    }
    min
}

/// Per-pair Hirota weight: `prod_v (i dv)^(e_v)` times the coefficient,
/// in complex arithmetic on purpose -- the result being real is part of
/// what the oracle checks.
fn hirota_monomial_sum<T: Real>(form: &BilinearForm, delta: [T; 3]) -> Cplx<T> {
    let mut acc = Cplx::zero();
    for term in form.terms() {
        let coeff = real::<T>(*term.coeff.numer() as f64) / real::<T>(*term.coeff.denom() as f64);
        let mut prod = Cplx::from_re(coeff);
        for (v, &e) in term.exps.iter().enumerate() {
            if e > 0 {
                prod = prod * Cplx::i_times(delta[v]).powu(e);
            }
        }
        acc = acc + prod;
    }
    acc
}

struct PairTables<T> {
    phase: Vec<Cplx<T>>,
    m_omega: Vec<T>,
    m_l: Vec<T>,
    m_k: Vec<T>,
}

fn pair_tables<T: Real>(
    p: &ThetaParams<T>,
    point: Point<T>,
    trunc: &LatticeTruncation<T>,
) -> PairTables<T> {
    let eta = p.phases(point);
    let n = p.n();
    let m_max = trunc.m_max() as i64;
    let lo = vec![-m_max; n];
    let hi = vec![m_max; n];
    let half = real::<T>(0.5);
    let mut tables = PairTables {
        phase: Vec::new(),
        m_omega: Vec::new(),
        m_l: Vec::new(),
        m_k: Vec::new(),
    };
    let mut mf = vec![T::zero(); n];
    for_each_lattice_point(&lo, &hi, |m| {
        for (slot, &mj) in mf.iter_mut().zip(m) {
            *slot = real::<T>(mj as f64);
        }
        let mut phi = T::zero();
        let mut mw = T::zero();
        let mut ml = T::zero();
        let mut mk = T::zero();
        for j in 0..n {
            phi += mf[j] * eta[j];
            mw += mf[j] * p.omega[j];
            ml += mf[j] * p.l[j];
            mk += mf[j] * p.k[j];
        }
        let q = p.tau.quadratic_form(&mf);
        tables.phase.push(Cplx::new(-half * q, phi).exp());
        tables.m_omega.push(mw);
        tables.m_l.push(ml);
        tables.m_k.push(mk);
    });
    tables
}

/// `F(D) theta . theta + c theta^2` at one point for a single form, via
/// the double lattice sum. At a true solution this vanishes identically.
pub fn bilinear_residual_form<T: Real>(
    form: &BilinearForm,
    p: &ThetaParams<T>,
    c: T,
    point: Point<T>,
    trunc: &LatticeTruncation<T>,
) -> T {
    let tables = pair_tables(p, point, trunc);
    residual_from_tables(form, c, &tables)
}

/// Both coupled residuals `(r1, r2)` at one point, sharing the per-point
/// lattice tables.
pub fn bilinear_residual<T: Real>(
    system: &BilinearSystem,
    p: &ThetaParams<T>,
    c1: T,
    c2: T,
    point: Point<T>,
    trunc: &LatticeTruncation<T>,
) -> (T, T) {
    let tables = pair_tables(p, point, trunc);
    (
        residual_from_tables(&system.f1, c1, &tables),
        residual_from_tables(&system.f2, c2, &tables),
    )
}

fn residual_from_tables<T: Real>(form: &BilinearForm, c: T, tables: &PairTables<T>) -> T {
    let len = tables.phase.len();
    let mut re = KahanSum::new();
    let mut im = KahanSum::new();
    for a in 0..len {
        for b in 0..len {
            let delta = [
                tables.m_omega[a] - tables.m_omega[b],
                tables.m_l[a] - tables.m_l[b],
                tables.m_k[a] - tables.m_k[b],
            ];
            let mut weight = hirota_monomial_sum(form, delta);
            if form.has_constant() {
                weight.re += c;
            }
            let term = weight * (tables.phase[a] * tables.phase[b]);
            re.add(term.re);
            im.add(term.im);
        }
    }
    // The double sum is conjugation-symmetric under (m, n) -> (-m, -n).
    debug_assert!(
        im.value().abs() <= real::<T>(1e-8) * (T::one() + re.value().abs()),
        "imaginary part failed to cancel"
    );
    re.value()
}

/// On-disk layouts for [`export_grid`].
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum GridFormat {
    /// Long format: header `x,t,u,v`, one sample per row, t-major order.
    Csv,
    /// Wide format: an `x` header row, then per-t rows of `u`, a `# v`
    /// separator, and per-t rows of `v`.
    MatrixCsv,
}

/// Writes a sampled grid with 17 significant digits (value-preserving for
/// f64 round trips).
pub fn export_grid<T: Real>(
    grid: &WaveGrid<T>,
    format: GridFormat,
    path: &Path,
) -> Result<(), FieldError<T>> {
    let io_err = |source| FieldError::Io {
        path: path.to_path_buf(),
        source,
    };
    let file = std::fs::File::create(path).map_err(io_err)?;
    let mut out = std::io::BufWriter::new(file);
    let r = |v: T| format!("{v:.16e}");
    match format {
        GridFormat::Csv => {
            writeln!(out, "x,t,u,v").map_err(io_err)?;
            for (it, &t) in grid.ts.iter().enumerate() {
                for (ix, &x) in grid.xs.iter().enumerate() {
                    writeln!(
                        out,
                        "{},{},{},{}",
                        r(x),
                        r(t),
                        r(grid.u[(it, ix)]),
                        r(grid.v[(it, ix)])
                    )
                    .map_err(io_err)?;
                }
            }
        }
        GridFormat::MatrixCsv => {
            let xs: Vec<String> = grid.xs.iter().map(|&x| r(x)).collect();
            writeln!(out, "t\\x,{}", xs.join(",")).map_err(io_err)?;
            for block in ["u", "v"] {
                if block == "v" {
                    writeln!(out, "# v").map_err(io_err)?;
                }
                let m = if block == "u" { &grid.u } else { &grid.v };
                for (it, &t) in grid.ts.iter().enumerate() {
                    let row: Vec<String> = (0..grid.xs.len()).map(|ix| r(m[(it, ix)])).collect();
                    writeln!(out, "{},{}", r(t), row.join(",")).map_err(io_err)?;
                }
            }
        }
    }
    out.flush().map_err(io_err)
}

/// Reads back a long-format CSV written by [`export_grid`]; the inverse
/// used by round-trip checks and external tooling.
pub fn parse_grid_csv(path: &Path) -> Result<Vec<(f64, f64, f64, f64)>, FieldError<f64>> {
    let io_err = |source| FieldError::Io {
        path: path.to_path_buf(),
        source,
    };
    let file = std::fs::File::open(path).map_err(io_err)?;
    let reader = std::io::BufReader::new(file);
    let mut rows = Vec::new();
    for (index, line) in reader.lines().enumerate() {
        let line = line.map_err(io_err)?;
        if index == 0 {
            if line.trim() != "x,t,u,v" {
                return Err(FieldError::Parse {
                    path: path.to_path_buf(),
                    line: 1,
                    message: format!("unexpected header `{line}`"),
                });
            }
            continue;
        }
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != 4 {
            return Err(FieldError::Parse {
                path: path.to_path_buf(),
                line: index + 1,
                message: format!("expected 4 fields, got {}", fields.len()),
            });
        }
        let mut parsed = [0.0f64; 4];
        for (slot, field) in parsed.iter_mut().zip(&fields) {
            *slot = field.trim().parse().map_err(|e| FieldError::Parse {
                path: path.to_path_buf(),
                line: index + 1,
                message: format!("bad float `{field}`: {e}"),
            })?;
        }
        rows.push((parsed[0], parsed[1], parsed[2], parsed[3]));
    }
    Ok(rows)
}
