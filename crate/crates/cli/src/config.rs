//! Run configuration: TOML schema and value conventions.
//!
//! Wave numbers and tau diagonals follow the table convention: a bare
//! number means a multiple of 2pi, while a string like `"1*2pi/10"` or
//! `"0.46*2pi"` (or a plain `"0.9060"`) is evaluated literally. All other
//! numeric fields are plain absolute values.

use anyhow::{bail, Context, Result};
use serde::{Deserialize, Serialize};
use std::path::Path;

use nperiodic::bilinear::{builtin_system, coeff_from_f64, BilinearForm, BilinearSystem, Coeff};
use nperiodic::residual::UnknownVector;
use nperiodic::seed::DEFAULT_RNG_SEED;
use nperiodic::UnknownVector64;

/// A `k` / `tau_diag` entry: bare number (multiple of 2pi) or literal
/// expression string.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(untagged)]
pub enum AngleValue {
    Num(f64),
    Expr(String),
}

impl AngleValue {
    /// Resolved absolute value.
    pub fn resolve(&self) -> Result<f64> {
        match self {
            AngleValue::Num(x) => Ok(x * std::f64::consts::TAU),
            AngleValue::Expr(s) => parse_expr(s),
        }
    }

    /// Display form for table headers.
    pub fn display(&self) -> String {
        match self {
            AngleValue::Num(x) => format!("{x}*2pi"),
            AngleValue::Expr(s) => s.clone(),
        }
    }
}

/// Evaluates `a`, `a/b`, `a*2pi`, `a*2pi/b` or `2pi/b` with `a`, `b`
/// decimal numbers or integer ratios.
pub fn parse_expr(input: &str) -> Result<f64> {
    let s: String = input.chars().filter(|c| !c.is_whitespace()).collect();
    let lower = s.to_ascii_lowercase();
    let (pre, post, has_tau) = match lower.find("2pi") {
        Some(pos) => (&lower[..pos], &lower[pos + 3..], true),
        None => (lower.as_str(), "", false),
    };
    let pre_val = match pre.strip_suffix('*') {
        Some(num) => parse_number(num).with_context(|| format!("bad multiplier in `{input}`"))?,
        None if pre.is_empty() => 1.0,
        None if pre == "-" => -1.0,
        None if has_tau => bail!("expected `*` before `2pi` in `{input}`"),
        None => parse_number(pre).with_context(|| format!("bad number `{input}`"))?,
    };
    let post_val = match post.strip_prefix('/') {
        Some(den) => parse_number(den).with_context(|| format!("bad divisor in `{input}`"))?,
        None if post.is_empty() => 1.0,
        None => bail!("unexpected trailing `{post}` in `{input}`"),
    };
    if post_val == 0.0 {
        bail!("division by zero in `{input}`");
    }
    let tau = if has_tau { std::f64::consts::TAU } else { 1.0 };
    Ok(pre_val * tau / post_val)
}

fn parse_number(s: &str) -> Result<f64> {
    if let Some((num, den)) = s.split_once('/') {
        let n: f64 = num.trim().parse()?;
        let d: f64 = den.trim().parse()?;
        if d == 0.0 {
            bail!("division by zero");
        }
        return Ok(n / d);
    }
    Ok(s.trim().parse()?)
}

/// Coefficient of a custom equation term: number or `"p/q"` text.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(untagged)]
pub enum CoeffValue {
    Num(f64),
    Text(String),
}

impl CoeffValue {
    pub fn to_coeff(&self) -> Result<Coeff> {
        match self {
            CoeffValue::Num(x) => Ok(coeff_from_f64(*x)?),
            CoeffValue::Text(s) => {
                if let Some((num, den)) = s.split_once('/') {
                    let n: i64 = num.trim().parse().context("rational numerator")?;
                    let d: i64 = den.trim().parse().context("rational denominator")?;
                    if d == 0 {
                        bail!("zero denominator in `{s}`");
                    }
                    Ok(Coeff::new(n, d))
                } else {
                    let x: f64 = s
                        .trim()
                        .parse()
                        .with_context(|| format!("bad coefficient `{s}`"))?;
                    Ok(coeff_from_f64(x)?)
                }
            }
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct TermSpec {
    pub c: CoeffValue,
    pub e: [u32; 3],
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CustomEquationSpec {
    pub f1: Vec<TermSpec>,
    #[serde(default = "default_true")]
    pub f1_constant: bool,
    pub f2: Vec<TermSpec>,
    #[serde(default = "default_true")]
    pub f2_constant: bool,
}

fn default_true() -> bool {
    true
}

/// Which coupled bilinear system to solve: a registry name or inline
/// custom forms. Carried verbatim inside run reports so `verify` can
/// rebuild the system.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EquationSection {
    #[serde(default)]
    pub name: Option<String>,
    #[serde(default)]
    pub custom: Option<CustomEquationSpec>,
    #[serde(default)]
    pub v0: f64,
    #[serde(default)]
    pub u0: f64,
}

impl EquationSection {
    pub fn build_system(&self) -> Result<BilinearSystem> {
        match (&self.name, &self.custom) {
            (Some(name), None) => Ok(builtin_system(name, self.v0)?),
            (None, Some(custom)) => {
                let build = |terms: &[TermSpec], has_constant: bool| -> Result<BilinearForm> {
                    let pairs = terms
                        .iter()
                        .map(|t| Ok((t.c.to_coeff()?, t.e)))
                        .collect::<Result<Vec<_>>>()?;
                    Ok(BilinearForm::new(pairs, has_constant)?)
                };
                Ok(BilinearSystem::new(
                    "custom",
                    build(&custom.f1, custom.f1_constant)?,
                    build(&custom.f2, custom.f2_constant)?,
                ))
            }
            (Some(_), Some(_)) => bail!("[equation] sets both `name` and `custom`; pick one"),
            (None, None) => bail!("[equation] needs `name` or `custom`"),
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GivenSection {
    pub n: usize,
    pub k: Vec<AngleValue>,
    pub tau_diag: Vec<AngleValue>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WarmStartSection {
    pub omega: Vec<f64>,
    pub l: Vec<f64>,
    #[serde(default)]
    pub tau_off: Vec<f64>,
    pub c1: f64,
    pub c2: f64,
}

impl WarmStartSection {
    pub fn to_unknowns(&self) -> UnknownVector64 {
        UnknownVector {
            omega: self.omega.clone(),
            l: self.l.clone(),
            tau_off: self.tau_off.clone(),
            c1: self.c1,
            c2: self.c2,
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SeedSection {
    #[serde(default = "default_seed_mode")]
    pub mode: String,
    #[serde(default = "default_one")]
    pub c1: f64,
    #[serde(default = "default_one")]
    pub c2: f64,
    #[serde(default)]
    pub tau_off: Option<Vec<f64>>,
    #[serde(default)]
    pub root_index: usize,
    #[serde(default = "default_rng_seed")]
    pub rng_seed: u64,
    #[serde(default)]
    pub warm_start: Option<WarmStartSection>,
    #[serde(default)]
    pub explicit: Option<WarmStartSection>,
}

impl Default for SeedSection {
    fn default() -> Self {
        Self {
            mode: default_seed_mode(),
            c1: 1.0,
            c2: 1.0,
            tau_off: None,
            root_index: 0,
            rng_seed: DEFAULT_RNG_SEED,
            warm_start: None,
            explicit: None,
        }
    }
}

fn default_seed_mode() -> String {
    "dispersion".into()
}

fn default_one() -> f64 {
    1.0
}

fn default_rng_seed() -> u64 {
    DEFAULT_RNG_SEED
}

#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolverSection {
    #[serde(default = "d_step_tol")]
    pub step_tol: f64,
    #[serde(default = "d_step_tol")]
    pub residual_tol: f64,
    #[serde(default = "d_max_iter")]
    pub max_iter: usize,
    #[serde(default = "d_shift")]
    pub singular_shift: f64,
    #[serde(default = "d_near_singular")]
    pub near_singular_rel: f64,
    #[serde(default = "d_cap")]
    pub divergence_cap: f64,
    #[serde(default = "default_one")]
    pub damping: f64,
}

impl Default for SolverSection {
    fn default() -> Self {
        Self {
            step_tol: d_step_tol(),
            residual_tol: d_step_tol(),
            max_iter: d_max_iter(),
            singular_shift: d_shift(),
            near_singular_rel: d_near_singular(),
            divergence_cap: d_cap(),
            damping: 1.0,
        }
    }
}

fn d_step_tol() -> f64 {
    1e-14
}
fn d_max_iter() -> usize {
    200
}
fn d_shift() -> f64 {
    1e-6
}
fn d_near_singular() -> f64 {
    1e-10
}
fn d_cap() -> f64 {
    1e8
}

#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TruncationSection {
    #[serde(default = "d_tail_tol")]
    pub tail_tol: f64,
    #[serde(default)]
    pub m_max: Option<usize>,
}

impl Default for TruncationSection {
    fn default() -> Self {
        Self {
            tail_tol: d_tail_tol(),
            m_max: None,
        }
    }
}

fn d_tail_tol() -> f64 {
    1e-20
}

#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OracleSection {
    #[serde(default = "d_oracle_points")]
    pub points: usize,
    #[serde(default = "d_oracle_tol")]
    pub tol: f64,
}

impl Default for OracleSection {
    fn default() -> Self {
        Self {
            points: d_oracle_points(),
            tol: d_oracle_tol(),
        }
    }
}

fn d_oracle_points() -> usize {
    100
}
fn d_oracle_tol() -> f64 {
    1e-10
}

#[derive(Clone, Debug, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputSection {
    #[serde(default)]
    pub basename: Option<String>,
    #[serde(default)]
    pub write_grid: bool,
}

#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AxisSection {
    pub min: f64,
    pub max: f64,
    pub count: usize,
}

#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSection {
    pub x: AxisSection,
    pub t: AxisSection,
    #[serde(default)]
    pub z: f64,
}

/// Per-row overrides for the `table` command.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RowSpec {
    #[serde(default)]
    pub label: Option<String>,
    #[serde(default)]
    pub k: Option<Vec<AngleValue>>,
    #[serde(default)]
    pub tau_diag: Option<Vec<AngleValue>>,
    #[serde(default)]
    pub c1: Option<f64>,
    #[serde(default)]
    pub c2: Option<f64>,
    #[serde(default)]
    pub v0: Option<f64>,
    #[serde(default)]
    pub seed_mode: Option<String>,
    #[serde(default)]
    pub root_index: Option<usize>,
    #[serde(default)]
    pub warm_start: Option<WarmStartSection>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub equation: EquationSection,
    pub given: GivenSection,
    #[serde(default)]
    pub seed: SeedSection,
    #[serde(default)]
    pub solver: SolverSection,
    #[serde(default)]
    pub truncation: TruncationSection,
    #[serde(default)]
    pub oracle: OracleSection,
    #[serde(default)]
    pub output: OutputSection,
    #[serde(default)]
    pub grid: Option<GridSection>,
    #[serde(default)]
    pub rows: Vec<RowSpec>,
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .with_context(|| format!("reading config {}", path.display()))?;
        let config: RunConfig =
            toml::from_str(&text).with_context(|| format!("parsing config {}", path.display()))?;
        config.validate()?;
        Ok(config)
    }

    fn validate(&self) -> Result<()> {
        let n = self.given.n;
        if n == 0 {
            bail!("[given] n must be at least 1");
        }
        if self.given.k.len() != n {
            bail!(
                "[given] k has {} entries, expected n = {n}",
                self.given.k.len()
            );
        }
        if self.given.tau_diag.len() != n {
            bail!(
                "[given] tau_diag has {} entries, expected n = {n}",
                self.given.tau_diag.len()
            );
        }
        Ok(())
    }

    /// A new config with one row's overrides applied.
    pub fn with_row(&self, row: &RowSpec) -> Self {
        let mut out = self.clone();
        out.rows = Vec::new();
        if let Some(k) = &row.k {
            out.given.k = k.clone();
        }
        if let Some(tau) = &row.tau_diag {
            out.given.tau_diag = tau.clone();
        }
        if let Some(c1) = row.c1 {
            out.seed.c1 = c1;
        }
        if let Some(c2) = row.c2 {
            out.seed.c2 = c2;
        }
        if let Some(v0) = row.v0 {
            out.equation.v0 = v0;
        }
        if let Some(mode) = &row.seed_mode {
            out.seed.mode = mode.clone();
        }
        if let Some(idx) = row.root_index {
            out.seed.root_index = idx;
        }
        if let Some(ws) = &row.warm_start {
            out.seed.warm_start = Some(ws.clone());
        }
        out
    }
}
