//! Command implementations behind the `localdep` binary: CSV/generator
//! ingestion, estimator dispatch, rho-sweeps, eps/delta/n convergence
//! studies, benchmarks, and the self-test.
//!
//! Everything here is a library function returning data, so the whole CLI
//! surface is testable without spawning processes. Replicates inside a sweep
//! run in parallel; each owns a seed derived from the master seed by
//! replicate index, and rows are assembled in grid order, so output is
//! bit-identical regardless of worker count.

use std::path::{Path, PathBuf};
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::chatterjee::{chatterjee_xi, chatterjee_xi_large};
use crate::epsresid::{zeta_hat, zeta_limit};
use crate::error::Error;
use crate::localdelta::{adjacent_l1, deviation_matrix, row_means, scalar_mean};
use crate::moment::{
    cond_mean_binned_raw, cond_mean_knn_raw, default_bins, default_knn_k, l2_report_raw,
    r_squared_ols,
};
use crate::oracle::{self, QUADRATIC_GUARD};
use crate::report::{
    BenchReport, BenchRow, EstimatorReport, ScalingCheck, SelftestLine, SweepRow,
};
use crate::sample::{empirical_pit, PairedSample, UnitSquareSample};
use crate::synth::{derive_seed, gen, Family, GeneratedSample, GeneratorSpec};

/// CLI failure, split by exit code: usage/config -> 1, data -> 2,
/// estimator precondition -> 3.
#[derive(Debug, Clone, PartialEq)]
pub enum CliError {
    Usage(String),
    Data(String),
    Estimator(Error),
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Usage(m) => write!(f, "usage error: {m}"),
            CliError::Data(m) => write!(f, "data error: {m}"),
            CliError::Estimator(e) => write!(f, "{e}"),
        }
    }
}

impl std::error::Error for CliError {}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => 1,
            CliError::Data(_) => 2,
            CliError::Estimator(_) => 3,
        }
    }
}

pub type CliResult<T> = Result<T, CliError>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CommandKind {
    Compute,
    Sweep,
    Converge,
    Bench,
    Selftest,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OutputFormat {
    #[default]
    Json,
    Csv,
}

impl std::str::FromStr for OutputFormat {
    type Err = CliError;

    fn from_str(s: &str) -> CliResult<Self> {
        match s {
            "json" => Ok(OutputFormat::Json),
            "csv" => Ok(OutputFormat::Csv),
            other => Err(CliError::Usage(format!(
                "unknown format {other:?}; expected json|csv"
            ))),
        }
    }
}

/// Estimator identifiers accepted by `--estimators`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EstimatorKind {
    AdjacentL1,
    ZetaEps,
    ZetaLimit,
    Xi,
    XiLarge,
    Eta2Knn,
    Eta2Binned,
    R2,
    /// Scalar mean of the delta-window pipeline (requires `--delta`).
    DeltaMean,
    /// Quadratic reference implementations, guarded by n <= 5000.
    XiBruteforce,
    ZetaBruteforce,
}

impl EstimatorKind {
    pub fn as_str(self) -> &'static str {
        match self {
            EstimatorKind::AdjacentL1 => "adjacent_l1",
            EstimatorKind::ZetaEps => "zeta_eps",
            EstimatorKind::ZetaLimit => "zeta_limit",
            EstimatorKind::Xi => "xi",
            EstimatorKind::XiLarge => "xi_large",
            EstimatorKind::Eta2Knn => "eta2_knn",
            EstimatorKind::Eta2Binned => "eta2_binned",
            EstimatorKind::R2 => "r2",
            EstimatorKind::DeltaMean => "delta_mean",
            EstimatorKind::XiBruteforce => "xi_bruteforce",
            EstimatorKind::ZetaBruteforce => "zeta_bruteforce",
        }
    }
}

impl std::str::FromStr for EstimatorKind {
    type Err = CliError;

    fn from_str(s: &str) -> CliResult<Self> {
        match s {
            "adjacent_l1" => Ok(EstimatorKind::AdjacentL1),
            "zeta_eps" => Ok(EstimatorKind::ZetaEps),
            "zeta_limit" => Ok(EstimatorKind::ZetaLimit),
            "xi" => Ok(EstimatorKind::Xi),
            "xi_large" => Ok(EstimatorKind::XiLarge),
            "eta2_knn" => Ok(EstimatorKind::Eta2Knn),
            "eta2_binned" => Ok(EstimatorKind::Eta2Binned),
            "r2" => Ok(EstimatorKind::R2),
            "delta_mean" => Ok(EstimatorKind::DeltaMean),
            "xi_bruteforce" => Ok(EstimatorKind::XiBruteforce),
            "zeta_bruteforce" => Ok(EstimatorKind::ZetaBruteforce),
            other => Err(CliError::Usage(format!("unknown estimator {other:?}"))),
        }
    }
}

/// Where the data comes from: a CSV file or a seeded generator.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum InputSource {
    File { path: PathBuf },
    Gen { gen: GeneratorSpec },
}

fn default_reps() -> usize {
    1
}

/// Numeric knobs shared by the commands.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Params {
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub eps: Vec<f64>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub delta: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub k: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub bins: Option<usize>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub rho_grid: Vec<f64>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub n_grid: Vec<usize>,
    #[serde(default = "default_reps")]
    pub reps: usize,
    #[serde(default)]
    pub seed: u64,
}

impl Default for Params {
    fn default() -> Self {
        Self {
            eps: Vec::new(),
            delta: Vec::new(),
            k: None,
            bins: None,
            rho_grid: Vec::new(),
            n_grid: Vec::new(),
            reps: 1,
            seed: 0,
        }
    }
}

/// A fully resolved run; serializing it into every output makes reports
/// self-describing and reruns bit-reproducible.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub command: CommandKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub input: Option<InputSource>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub estimators: Vec<EstimatorKind>,
    #[serde(default)]
    pub params: Params,
    #[serde(default)]
    pub format: OutputFormat,
    #[serde(default)]
    pub force_quadratic: bool,
}

/// Top-level emission shape: `{config, results, version}` with stable key
/// order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Output<T> {
    pub config: RunConfig,
    pub results: T,
    pub version: String,
}

pub fn wrap_output<T>(config: &RunConfig, results: T) -> Output<T> {
    Output {
        config: config.clone(),
        results,
        version: env!("CARGO_PKG_VERSION").to_string(),
    }
}

/// Parses the two-column CSV contract: optional single header line
/// (auto-detected: first line non-numeric), comma delimiter, `.` decimal
/// point. Any later malformed row is a hard error with its 1-based line
/// number.
pub fn parse_csv(text: &str) -> CliResult<PairedSample> {
    let mut rows: Vec<(f64, f64)> = Vec::new();
    for (idx, line) in text.lines().enumerate() {
        let lineno = idx + 1;
        let trimmed = line.trim();
        if trimmed.is_empty() {
            continue;
        }
        let fields: Vec<&str> = trimmed.split(',').collect();
        if fields.len() != 2 {
            return Err(CliError::Data(format!(
                "line {lineno}: expected 2 comma-separated columns, got {}",
                fields.len()
            )));
        }
        let parsed: Option<(f64, f64)> = match (
            fields[0].trim().parse::<f64>(),
            fields[1].trim().parse::<f64>(),
        ) {
            (Ok(x), Ok(y)) => Some((x, y)),
            _ => None,
        };
        match parsed {
            Some((x, y)) => {
                if !x.is_finite() || !y.is_finite() {
                    return Err(CliError::Data(format!(
                        "line {lineno}: non-finite value"
                    )));
                }
                rows.push((x, y));
            }
            None => {
                if idx == 0 {
                    // Header line.
                    continue;
                }
                return Err(CliError::Data(format!(
                    "line {lineno}: cannot parse row {trimmed:?} as two numbers"
                )));
            }
        }
    }
    PairedSample::from_rows(&rows).map_err(|e| CliError::Data(e.to_string()))
}

pub fn read_csv(path: &Path) -> CliResult<PairedSample> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::Data(format!("{}: {e}", path.display())))?;
    parse_csv(&text)
}

/// The two views estimators consume: raw pairs and the unit square.
struct DataViews {
    paired: PairedSample,
    unit: UnitSquareSample,
}

impl DataViews {
    fn from_generated(sample: GeneratedSample) -> Self {
        match sample {
            GeneratedSample::Paired(p) => {
                let unit = empirical_pit(&p);
                Self { paired: p, unit }
            }
            GeneratedSample::Unit(u) => Self {
                paired: u.to_paired(),
                unit: u,
            },
        }
    }

    fn from_paired(p: PairedSample) -> Self {
        let unit = empirical_pit(&p);
        Self { paired: p, unit }
    }
}

fn load_views(config: &RunConfig) -> CliResult<DataViews> {
    match &config.input {
        None => Err(CliError::Usage("no input source given".into())),
        Some(InputSource::File { path }) => Ok(DataViews::from_paired(read_csv(path)?)),
        Some(InputSource::Gen { gen: spec }) => {
            let sample = gen(spec).map_err(CliError::Estimator)?;
            Ok(DataViews::from_generated(sample))
        }
    }
}

fn json_num(v: f64) -> serde_json::Value {
    serde_json::Number::from_f64(v)
        .map(serde_json::Value::Number)
        .unwrap_or(serde_json::Value::Null)
}

fn non_calibrated_warning(unit: &UnitSquareSample) -> Option<String> {
    if unit.has_uniform_margins() {
        None
    } else {
        Some(
            "xi normalization is non-calibrated: the v-marginal is not known to be uniform"
                .to_string(),
        )
    }
}

fn make_report(
    estimator: EstimatorKind,
    value: f64,
    params: serde_json::Map<String, serde_json::Value>,
    n: usize,
    seed: u64,
    warnings: Vec<String>,
) -> EstimatorReport {
    EstimatorReport {
        estimator: estimator.as_str().to_string(),
        value,
        params,
        n,
        seed,
        warnings,
    }
}

/// Runs one estimator against the data views, producing one report per
/// parameter point (eps/delta lists fan out).
fn run_estimator(
    est: EstimatorKind,
    views: &DataViews,
    config: &RunConfig,
) -> CliResult<Vec<EstimatorReport>> {
    let seed = config.params.seed;
    let n = views.paired.len();
    let mut out = Vec::new();
    match est {
        EstimatorKind::AdjacentL1 => {
            let value = adjacent_l1(&views.paired, seed);
            out.push(make_report(est, value, Default::default(), n, seed, vec![]));
        }
        EstimatorKind::ZetaEps => {
            if config.params.eps.is_empty() {
                return Err(CliError::Usage("zeta_eps requires --eps".into()));
            }
            for &eps in &config.params.eps {
                let r = zeta_hat(&views.unit, eps).map_err(CliError::Estimator)?;
                let mut params = serde_json::Map::new();
                params.insert("eps".into(), json_num(eps));
                let warnings = non_calibrated_warning(&views.unit).into_iter().collect();
                out.push(make_report(est, r.zeta, params, n, seed, warnings));
            }
        }
        EstimatorKind::ZetaLimit => {
            let r = zeta_limit(&views.unit);
            let mut params = serde_json::Map::new();
            params.insert("eps".into(), serde_json::Value::String("limit".into()));
            let warnings = non_calibrated_warning(&views.unit).into_iter().collect();
            out.push(make_report(est, r.zeta, params, n, seed, warnings));
        }
        EstimatorKind::Xi | EstimatorKind::XiLarge => {
            let r = if est == EstimatorKind::Xi {
                chatterjee_xi(&views.paired, seed)
            } else {
                chatterjee_xi_large(&views.paired, seed)
            }
            .map_err(CliError::Estimator)?;
            let mut params = serde_json::Map::new();
            params.insert("numerator".into(), json_num(r.numerator));
            params.insert(
                "denominator_form".into(),
                serde_json::to_value(r.denominator_form).unwrap(),
            );
            out.push(make_report(est, r.xi, params, n, seed, vec![]));
        }
        EstimatorKind::Eta2Knn => {
            let k = config.params.k.unwrap_or_else(|| default_knn_k(n));
            let fit = cond_mean_knn_raw(&views.paired, k).map_err(CliError::Estimator)?;
            let rep = l2_report_raw(&views.paired, &fit).map_err(CliError::Estimator)?;
            let mut params = serde_json::Map::new();
            params.insert("k".into(), (k as u64).into());
            out.push(make_report(est, rep.eta2, params, n, seed, vec![]));
        }
        EstimatorKind::Eta2Binned => {
            let bins = config.params.bins.unwrap_or_else(|| default_bins(n));
            let fit = cond_mean_binned_raw(&views.paired, bins).map_err(CliError::Estimator)?;
            let rep = l2_report_raw(&views.paired, &fit).map_err(CliError::Estimator)?;
            let mut params = serde_json::Map::new();
            params.insert("bins".into(), (bins as u64).into());
            out.push(make_report(est, rep.eta2, params, n, seed, vec![]));
        }
        EstimatorKind::R2 => {
            let value = r_squared_ols(&views.paired).map_err(CliError::Estimator)?;
            out.push(make_report(est, value, Default::default(), n, seed, vec![]));
        }
        EstimatorKind::DeltaMean => {
            if config.params.delta.is_empty() {
                return Err(CliError::Usage("delta_mean requires --delta".into()));
            }
            if n > QUADRATIC_GUARD && !config.force_quadratic {
                return Err(CliError::Estimator(Error::QuadraticGuard {
                    n,
                    guard: QUADRATIC_GUARD,
                }));
            }
            for &delta in &config.params.delta {
                let matrix = deviation_matrix(&views.paired, delta).map_err(CliError::Estimator)?;
                let value = scalar_mean(&row_means(&matrix)).map_err(CliError::Estimator)?;
                let mut params = serde_json::Map::new();
                params.insert("delta".into(), json_num(delta));
                out.push(make_report(est, value, params, n, seed, vec![]));
            }
        }
        EstimatorKind::XiBruteforce => {
            let value = if config.force_quadratic {
                oracle::xi_bruteforce_unguarded(&views.paired, seed)
            } else {
                oracle::xi_bruteforce(&views.paired, seed)
            }
            .map_err(CliError::Estimator)?;
            out.push(make_report(est, value, Default::default(), n, seed, vec![]));
        }
        EstimatorKind::ZetaBruteforce => {
            if config.params.eps.is_empty() {
                return Err(CliError::Usage("zeta_bruteforce requires --eps".into()));
            }
            for &eps in &config.params.eps {
                let value = if config.force_quadratic {
                    oracle::zeta_bruteforce_unguarded(&views.unit, eps)
                } else {
                    oracle::zeta_bruteforce(&views.unit, eps)
                }
                .map_err(CliError::Estimator)?;
                let mut params = serde_json::Map::new();
                params.insert("eps".into(), json_num(eps));
                out.push(make_report(est, value, params, n, seed, vec![]));
            }
        }
    }
    Ok(out)
}

/// `compute`: run the requested estimators on one dataset.
pub fn cmd_compute(config: &RunConfig) -> CliResult<Vec<EstimatorReport>> {
    if config.estimators.is_empty() {
        return Err(CliError::Usage(
            "compute requires at least one estimator".into(),
        ));
    }
    let views = load_views(config)?;
    let mut reports = Vec::new();
    for &est in &config.estimators {
        reports.extend(run_estimator(est, &views, config)?);
    }
    Ok(reports)
}

/// Scalar value of one estimator on one generated sample; used by sweeps.
fn sweep_value(est: EstimatorKind, sample: &GeneratedSample, config: &RunConfig) -> Result<f64, Error> {
    match est {
        EstimatorKind::Xi => {
            chatterjee_xi(&sample.to_paired(), config.params.seed).map(|r| r.xi)
        }
        EstimatorKind::XiLarge => {
            chatterjee_xi_large(&sample.to_paired(), config.params.seed).map(|r| r.xi)
        }
        EstimatorKind::ZetaLimit => {
            let unit = match sample {
                GeneratedSample::Unit(u) => u.clone(),
                GeneratedSample::Paired(p) => empirical_pit(p),
            };
            Ok(zeta_limit(&unit).zeta)
        }
        EstimatorKind::ZetaEps => {
            let eps = *config
                .params
                .eps
                .first()
                .ok_or(Error::NonPositiveEpsilon { value: 0.0 })?;
            let unit = match sample {
                GeneratedSample::Unit(u) => u.clone(),
                GeneratedSample::Paired(p) => empirical_pit(p),
            };
            zeta_hat(&unit, eps).map(|r| r.zeta)
        }
        EstimatorKind::Eta2Knn => {
            let paired = sample.to_paired();
            let k = config.params.k.unwrap_or_else(|| default_knn_k(paired.len()));
            let fit = cond_mean_knn_raw(&paired, k)?;
            l2_report_raw(&paired, &fit).map(|r| r.eta2)
        }
        EstimatorKind::Eta2Binned => {
            let paired = sample.to_paired();
            let bins = config
                .params
                .bins
                .unwrap_or_else(|| default_bins(paired.len()));
            let fit = cond_mean_binned_raw(&paired, bins)?;
            l2_report_raw(&paired, &fit).map(|r| r.eta2)
        }
        EstimatorKind::R2 => r_squared_ols(&sample.to_paired()),
        EstimatorKind::AdjacentL1 => Ok(adjacent_l1(&sample.to_paired(), config.params.seed)),
        EstimatorKind::XiBruteforce => {
            oracle::xi_bruteforce(&sample.to_paired(), config.params.seed)
        }
        EstimatorKind::ZetaBruteforce | EstimatorKind::DeltaMean => {
            Err(Error::InvalidGeneratorSpec(format!(
                "{} is not available in sweeps",
                est.as_str()
            )))
        }
    }
}

/// Population reference for a sweep row, when one is defined.
fn sweep_reference(est: EstimatorKind, family: Family, rho: f64) -> Option<f64> {
    match (est, family) {
        // The normalized rank coefficient is compared against rho^2 (the
        // claim under audit); deviations are recorded, not asserted.
        (EstimatorKind::Xi | EstimatorKind::XiLarge | EstimatorKind::XiBruteforce, _) => {
            Some(rho * rho)
        }
        // eta2 = R^2 = rho^2 holds for the jointly Gaussian pair only.
        (
            EstimatorKind::Eta2Knn | EstimatorKind::Eta2Binned | EstimatorKind::R2,
            Family::BivariateNormal,
        ) => Some(rho * rho),
        _ => None,
    }
}

fn mean_and_sd(values: &[f64]) -> (f64, Option<f64>) {
    let n = values.len();
    let mean = values.iter().sum::<f64>() / n as f64;
    if n < 2 {
        return (mean, None);
    }
    let ss = values.iter().map(|&v| (v - mean) * (v - mean)).sum::<f64>();
    (mean, Some((ss / (n - 1) as f64).sqrt()))
}

fn replicate_values<F>(reps: usize, eval: F) -> Vec<Result<f64, Error>>
where
    F: Fn(usize) -> Result<f64, Error> + Sync + Send,
{
    (0..reps)
        .into_par_iter()
        .map(eval)
        .collect::<Vec<_>>()
}

fn assemble_row(
    param: &str,
    param_value: f64,
    est: EstimatorKind,
    n: usize,
    reps: usize,
    values: Vec<Result<f64, Error>>,
    reference: Option<f64>,
) -> SweepRow {
    let mut ok = Vec::with_capacity(values.len());
    let mut first_error = None;
    for v in values {
        match v {
            Ok(x) => ok.push(x),
            Err(e) => {
                if first_error.is_none() {
                    first_error = Some(e.to_string());
                }
            }
        }
    }
    if let Some(error) = first_error {
        return SweepRow {
            param: param.into(),
            param_value,
            estimator: est.as_str().into(),
            n,
            reps,
            mean: None,
            sd: None,
            reference,
            error: Some(error),
        };
    }
    let (mean, sd) = mean_and_sd(&ok);
    SweepRow {
        param: param.into(),
        param_value,
        estimator: est.as_str().into(),
        n,
        reps,
        mean: Some(mean),
        sd,
        reference,
        error: None,
    }
}

fn gen_spec_of(config: &RunConfig) -> CliResult<GeneratorSpec> {
    match &config.input {
        Some(InputSource::Gen { gen }) => Ok(gen.clone()),
        _ => Err(CliError::Usage(
            "this command needs a generator input (--gen)".into(),
        )),
    }
}

/// `sweep`: estimates across a rho grid with replicates, against the rho^2
/// reference columns.
pub fn cmd_sweep(config: &RunConfig) -> CliResult<Vec<SweepRow>> {
    let spec = gen_spec_of(config)?;
    if !matches!(spec.family, Family::BivariateNormal | Family::GaussianCopula) {
        return Err(CliError::Usage(
            "sweep requires a bivariate_normal or gaussian_copula generator".into(),
        ));
    }
    if config.params.rho_grid.is_empty() {
        return Err(CliError::Usage("sweep requires --rho-grid".into()));
    }
    if config.params.reps == 0 {
        return Err(CliError::Usage("reps must be at least 1".into()));
    }
    let estimators = if config.estimators.is_empty() {
        vec![EstimatorKind::XiLarge]
    } else {
        config.estimators.clone()
    };
    let reps = config.params.reps;
    let master = config.params.seed;

    let mut rows = Vec::new();
    for (rho_idx, &rho) in config.params.rho_grid.iter().enumerate() {
        let spec_here = spec.clone().with_rho(rho);
        // One generated sample per replicate, shared by all estimators.
        let samples: Vec<Result<GeneratedSample, Error>> = (0..reps)
            .into_par_iter()
            .map(|rep| {
                let seed = derive_seed(master, (rho_idx * reps + rep) as u64);
                gen(&spec_here.clone().with_seed(seed))
            })
            .collect();
        for &est in &estimators {
            let values: Vec<Result<f64, Error>> = samples
                .par_iter()
                .map(|s| match s {
                    Ok(sample) => sweep_value(est, sample, config),
                    Err(e) => Err(e.clone()),
                })
                .collect();
            rows.push(assemble_row(
                "rho",
                rho,
                est,
                spec.n,
                reps,
                values,
                sweep_reference(est, spec.family, rho),
            ));
        }
    }
    Ok(rows)
}

/// Reference value of the L1 residual under the generator, when known.
///
/// Functional dependence drives both residual forms to 0. Under
/// independence the windowed residual converges to `E|V - 1/2| = 1/4`,
/// while the two-neighbor shrinking-window form converges to
/// `E|(V1+V2)/2 - V3| = 7/24` (the fixed-window-size bias).
fn zeta_reference(family: Family, est: EstimatorKind) -> Option<f64> {
    match (family, est) {
        (Family::Functional, _) => Some(0.0),
        (Family::Independent, EstimatorKind::ZetaEps) => Some(0.25),
        (Family::Independent, EstimatorKind::ZetaLimit) => Some(7.0 / 24.0),
        _ => None,
    }
}

/// `converge`: the L1 residual across an eps grid at fixed n, the
/// shrinking-window residual across an n grid, and the delta pipeline across
/// a delta grid.
pub fn cmd_converge(config: &RunConfig) -> CliResult<Vec<SweepRow>> {
    let spec = gen_spec_of(config)?;
    if config.params.eps.is_empty()
        && config.params.n_grid.is_empty()
        && config.params.delta.is_empty()
    {
        return Err(CliError::Usage(
            "converge requires --eps, --n-grid, or --delta".into(),
        ));
    }
    if config.params.reps == 0 {
        return Err(CliError::Usage("reps must be at least 1".into()));
    }
    let reps = config.params.reps;
    let master = config.params.seed;
    let mut rows = Vec::new();
    let mut block = 0usize;

    for &eps in &config.params.eps {
        let spec_here = spec.clone();
        let values = replicate_values(reps, |rep| {
            let seed = derive_seed(master, (block * reps + rep) as u64);
            let sample = gen(&spec_here.clone().with_seed(seed))?;
            let unit = match sample {
                GeneratedSample::Unit(u) => u,
                GeneratedSample::Paired(p) => empirical_pit(&p),
            };
            zeta_hat(&unit, eps).map(|r| r.zeta)
        });
        rows.push(assemble_row(
            "eps",
            eps,
            EstimatorKind::ZetaEps,
            spec.n,
            reps,
            values,
            zeta_reference(spec.family, EstimatorKind::ZetaEps),
        ));
        block += 1;
    }

    for &n in &config.params.n_grid {
        let spec_here = GeneratorSpec { n, ..spec.clone() };
        let values = replicate_values(reps, |rep| {
            let seed = derive_seed(master, (block * reps + rep) as u64);
            let sample = gen(&spec_here.clone().with_seed(seed))?;
            let unit = match sample {
                GeneratedSample::Unit(u) => u,
                GeneratedSample::Paired(p) => empirical_pit(&p),
            };
            Ok(zeta_limit(&unit).zeta)
        });
        rows.push(assemble_row(
            "n",
            n as f64,
            EstimatorKind::ZetaLimit,
            n,
            reps,
            values,
            zeta_reference(spec.family, EstimatorKind::ZetaLimit),
        ));
        block += 1;
    }

    for &delta in &config.params.delta {
        if spec.n > QUADRATIC_GUARD && !config.force_quadratic {
            return Err(CliError::Estimator(Error::QuadraticGuard {
                n: spec.n,
                guard: QUADRATIC_GUARD,
            }));
        }
        let spec_here = spec.clone();
        let values = replicate_values(reps, |rep| {
            let seed = derive_seed(master, (block * reps + rep) as u64);
            let sample = gen(&spec_here.clone().with_seed(seed))?;
            let paired = sample.to_paired();
            let matrix = deviation_matrix(&paired, delta)?;
            scalar_mean(&row_means(&matrix))
        });
        rows.push(assemble_row(
            "delta",
            delta,
            EstimatorKind::DeltaMean,
            spec.n,
            reps,
            values,
            None,
        ));
        block += 1;
    }

    Ok(rows)
}

/// `bench`: wall time per estimator per n, plus the sub-quadratic scaling
/// check for the sort-based path when the grid brackets 1e5..1e6.
pub fn cmd_bench(config: &RunConfig) -> CliResult<BenchReport> {
    let spec = gen_spec_of(config)?;
    if config.params.n_grid.is_empty() {
        return Err(CliError::Usage("bench requires --n-grid".into()));
    }
    let estimators = if config.estimators.is_empty() {
        vec![EstimatorKind::XiLarge]
    } else {
        config.estimators.clone()
    };

    let mut rows = Vec::new();
    for (n_idx, &n) in config.params.n_grid.iter().enumerate() {
        let spec_here = GeneratorSpec { n, ..spec.clone() };
        let seed = derive_seed(config.params.seed, n_idx as u64);
        let sample = gen(&spec_here.with_seed(seed)).map_err(CliError::Estimator)?;
        for &est in &estimators {
            let start = Instant::now();
            let value = sweep_value(est, &sample, config).map_err(CliError::Estimator)?;
            let seconds = start.elapsed().as_secs_f64();
            rows.push(BenchRow {
                estimator: est.as_str().into(),
                n,
                seconds,
                value,
            });
        }
    }

    let scaling = scaling_check(&rows, EstimatorKind::XiLarge, 100_000, 1_000_000, 15.0);
    Ok(BenchReport { rows, scaling })
}

fn scaling_check(
    rows: &[BenchRow],
    est: EstimatorKind,
    n_small: usize,
    n_large: usize,
    max_ratio: f64,
) -> Option<ScalingCheck> {
    let name = est.as_str();
    let t_small = rows
        .iter()
        .find(|r| r.estimator == name && r.n == n_small)?
        .seconds;
    let t_large = rows
        .iter()
        .find(|r| r.estimator == name && r.n == n_large)?
        .seconds;
    let ratio = t_large / t_small;
    Some(ScalingCheck {
        estimator: name.into(),
        n_small,
        n_large,
        seconds_small: t_small,
        seconds_large: t_large,
        ratio,
        max_ratio,
        ok: ratio <= max_ratio,
    })
}

/// `selftest`: quick oracle-equivalence and identity checks; returns the
/// pass/fail lines plus an overall flag.
pub fn cmd_selftest() -> (Vec<SelftestLine>, bool) {
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    let mut lines = Vec::new();
    let mut push = |name: &str, passed: bool, detail: Option<String>| {
        lines.push(SelftestLine {
            name: name.into(),
            passed,
            detail,
        });
    };

    // Hand examples.
    {
        let s = PairedSample::from_rows(&[(1.0, 10.0), (2.0, 20.0), (3.0, 30.0)]).unwrap();
        let ok = chatterjee_xi(&s, 0).map(|r| r.xi) == Ok(0.25);
        push("hand_example_xi_monotone3", ok, None);
    }

    // Randomized oracle equivalence for xi.
    {
        let mut rng = ChaCha8Rng::seed_from_u64(101);
        let mut failures = 0;
        for case in 0..50 {
            let n = rng.gen_range(2..120usize);
            let ties = case % 2 == 0;
            let rows: Vec<(f64, f64)> = (0..n)
                .map(|_| {
                    if ties {
                        (rng.gen_range(0..5) as f64, rng.gen_range(0..5) as f64)
                    } else {
                        (rng.gen::<f64>(), rng.gen::<f64>())
                    }
                })
                .collect();
            let s = PairedSample::from_rows(&rows).unwrap();
            let seed = rng.gen();
            let brute = oracle::xi_bruteforce(&s, seed);
            if brute != chatterjee_xi(&s, seed).map(|r| r.xi)
                || brute != chatterjee_xi_large(&s, seed).map(|r| r.xi)
            {
                failures += 1;
            }
        }
        push(
            "oracle_equivalence_xi",
            failures == 0,
            (failures > 0).then(|| format!("{failures} mismatches")),
        );
    }

    // Randomized oracle equivalence for zeta.
    {
        let mut rng = ChaCha8Rng::seed_from_u64(102);
        let mut failures = 0;
        for _ in 0..50 {
            let n = rng.gen_range(2..120usize);
            let us: Vec<f64> = (0..n).map(|_| 1.0 - rng.gen::<f64>()).collect();
            let vs: Vec<f64> = (0..n).map(|_| 1.0 - rng.gen::<f64>()).collect();
            let s = UnitSquareSample::new(us, vs).unwrap();
            let eps = rng.gen_range(0.001..1.1);
            if oracle::zeta_bruteforce(&s, eps) != zeta_hat(&s, eps).map(|r| r.zeta) {
                failures += 1;
            }
        }
        push(
            "oracle_equivalence_zeta",
            failures == 0,
            (failures > 0).then(|| format!("{failures} mismatches")),
        );
    }

    // Epsilon-collapse identity.
    {
        let mut rng = ChaCha8Rng::seed_from_u64(103);
        let mut failures = 0;
        for _ in 0..30 {
            let n = rng.gen_range(2..200usize);
            let rows: Vec<(f64, f64)> =
                (0..n).map(|_| (rng.gen::<f64>(), rng.gen::<f64>())).collect();
            let u = empirical_pit(&PairedSample::from_rows(&rows).unwrap());
            let eps = 1.5 / n as f64;
            if zeta_hat(&u, eps).map(|r| r.zeta) != Ok(zeta_limit(&u).zeta) {
                failures += 1;
            }
        }
        push(
            "epsilon_collapse",
            failures == 0,
            (failures > 0).then(|| format!("{failures} mismatches")),
        );
    }

    // Variance decomposition identity.
    {
        let mut rng = ChaCha8Rng::seed_from_u64(104);
        let mut failures = 0;
        for _ in 0..30 {
            let n = rng.gen_range(2..300usize);
            let rows: Vec<(f64, f64)> =
                (0..n).map(|_| (rng.gen::<f64>(), rng.gen::<f64>())).collect();
            let s = PairedSample::from_rows(&rows).unwrap();
            let bins = default_bins(n);
            let fit = cond_mean_binned_raw(&s, bins).unwrap();
            match l2_report_raw(&s, &fit) {
                Ok(rep) => {
                    if (rep.between + rep.within - rep.var_v).abs() > 1e-12 * rep.var_v.max(1.0) {
                        failures += 1;
                    }
                }
                Err(Error::ConstantV) => {}
                Err(_) => failures += 1,
            }
        }
        push(
            "variance_decomposition",
            failures == 0,
            (failures > 0).then(|| format!("{failures} mismatches")),
        );
    }

    let all = lines.iter().all(|l| l.passed);
    (lines, all)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn compute_config(input: InputSource, estimators: Vec<EstimatorKind>) -> RunConfig {
        RunConfig {
            command: CommandKind::Compute,
            input: Some(input),
            estimators,
            params: Params::default(),
            format: OutputFormat::Json,
            force_quadratic: false,
        }
    }

    #[test]
    fn csv_header_autodetect_and_line_errors() {
        let s = parse_csv("x,y\n1.0,2.0\n3.0,4.0\n").unwrap();
        assert_eq!(s.len(), 2);
        let s = parse_csv("1.0,2.0\n3.0,4.0\n").unwrap();
        assert_eq!(s.len(), 2);

        let err = parse_csv("x,y\n1.0,2.0\nbad,4.0\n").unwrap_err();
        assert_eq!(
            err,
            CliError::Data("line 3: cannot parse row \"bad,4.0\" as two numbers".into())
        );
        let err = parse_csv("1.0,2.0,3.0\n").unwrap_err();
        assert!(matches!(err, CliError::Data(m) if m.contains("line 1")));
        let err = parse_csv("x,y\n1.0,NaN\n2.0,3.0\n").unwrap_err();
        assert_eq!(err, CliError::Data("line 2: non-finite value".into()));
    }

    #[test]
    fn csv_single_row_is_insufficient() {
        let err = parse_csv("x,y\n1.0,2.0\n").unwrap_err();
        assert!(matches!(&err, CliError::Data(m) if m.contains("insufficient data")));
        assert_eq!(err.exit_code(), 2);
    }

    #[test]
    fn compute_xi_on_monotone_fixture() {
        let cfg = compute_config(
            InputSource::Gen {
                gen: GeneratorSpec::functional(crate::synth::FuncKind::Identity, 3, 1),
            },
            vec![EstimatorKind::Xi],
        );
        let reports = cmd_compute(&cfg).unwrap();
        assert_eq!(reports.len(), 1);
        assert_eq!(reports[0].value, 0.25);
    }

    #[test]
    fn compute_zeta_eps_zero_is_precondition_failure() {
        let mut cfg = compute_config(
            InputSource::Gen {
                gen: GeneratorSpec::independent(16, 0),
            },
            vec![EstimatorKind::ZetaEps],
        );
        cfg.params.eps = vec![0.0];
        let err = cmd_compute(&cfg).unwrap_err();
        assert_eq!(err.exit_code(), 3);
        assert!(err.to_string().contains("epsilon must be positive"));
    }

    #[test]
    fn compute_requires_estimators_and_input() {
        let cfg = compute_config(
            InputSource::Gen {
                gen: GeneratorSpec::independent(16, 0),
            },
            vec![],
        );
        assert_eq!(cmd_compute(&cfg).unwrap_err().exit_code(), 1);

        let mut cfg = compute_config(
            InputSource::Gen {
                gen: GeneratorSpec::independent(16, 0),
            },
            vec![EstimatorKind::Xi],
        );
        cfg.input = None;
        assert_eq!(cmd_compute(&cfg).unwrap_err().exit_code(), 1);
    }

    #[test]
    fn compute_non_calibrated_warning_on_functional_square() {
        let cfg = {
            let mut c = compute_config(
                InputSource::Gen {
                    gen: GeneratorSpec::functional(crate::synth::FuncKind::Square, 64, 5),
                },
                vec![EstimatorKind::ZetaLimit],
            );
            c.params.eps = vec![0.2];
            c
        };
        let reports = cmd_compute(&cfg).unwrap();
        assert_eq!(reports[0].warnings.len(), 1);

        let cfg = compute_config(
            InputSource::Gen {
                gen: GeneratorSpec::independent(64, 5),
            },
            vec![EstimatorKind::ZetaLimit],
        );
        let reports = cmd_compute(&cfg).unwrap();
        assert!(reports[0].warnings.is_empty());
    }

    #[test]
    fn sweep_rows_fail_independently() {
        // rho = 2 is an invalid correlation: that row reports the error, the
        // remaining rows succeed.
        let mut cfg = compute_config(
            InputSource::Gen {
                gen: GeneratorSpec::gaussian_copula(0.0, 64, 3),
            },
            vec![EstimatorKind::Xi],
        );
        cfg.command = CommandKind::Sweep;
        cfg.params.rho_grid = vec![0.0, 2.0, 0.5];
        cfg.params.reps = 2;
        let rows = cmd_sweep(&cfg).unwrap();
        assert_eq!(rows.len(), 3);
        assert!(rows[0].error.is_none() && rows[0].mean.is_some());
        assert!(rows[1].error.is_some() && rows[1].mean.is_none());
        assert!(rows[2].error.is_none());
        assert_eq!(rows[1].reference, Some(4.0));
    }

    #[test]
    fn sweep_is_deterministic() {
        let mut cfg = compute_config(
            InputSource::Gen {
                gen: GeneratorSpec::gaussian_copula(0.0, 128, 9),
            },
            vec![EstimatorKind::Xi, EstimatorKind::ZetaLimit],
        );
        cfg.command = CommandKind::Sweep;
        cfg.params.rho_grid = vec![0.0, 0.4, 0.8];
        cfg.params.reps = 4;
        let a = cmd_sweep(&cfg).unwrap();
        let b = cmd_sweep(&cfg).unwrap();
        assert_eq!(a, b);
        // Serialized form identical too.
        assert_eq!(
            serde_json::to_string(&a).unwrap(),
            serde_json::to_string(&b).unwrap()
        );
    }

    #[test]
    fn converge_has_references() {
        let mut cfg = compute_config(
            InputSource::Gen {
                gen: GeneratorSpec::independent(256, 2),
            },
            vec![],
        );
        cfg.command = CommandKind::Converge;
        cfg.params.eps = vec![0.2, 0.1];
        cfg.params.n_grid = vec![64, 256];
        cfg.params.reps = 2;
        let rows = cmd_converge(&cfg).unwrap();
        assert_eq!(rows.len(), 4);
        assert_eq!(rows[0].param, "eps");
        assert_eq!(rows[0].reference, Some(0.25));
        assert_eq!(rows[2].param, "n");
        assert_eq!(rows[2].reference, Some(7.0 / 24.0));
        assert!(rows.iter().all(|r| r.sd.is_some()));
    }

    #[test]
    fn bench_guard_and_values() {
        let mut cfg = compute_config(
            InputSource::Gen {
                gen: GeneratorSpec::independent(0, 7),
            },
            vec![EstimatorKind::XiBruteforce],
        );
        cfg.command = CommandKind::Bench;
        cfg.params.n_grid = vec![6000];
        let err = cmd_bench(&cfg).unwrap_err();
        assert_eq!(err.exit_code(), 3);
        assert!(err.to_string().contains("quadratic-cost guard"));

        cfg.estimators = vec![EstimatorKind::XiLarge];
        cfg.params.n_grid = vec![2000, 4000];
        let a = cmd_bench(&cfg).unwrap();
        let b = cmd_bench(&cfg).unwrap();
        let values = |r: &BenchReport| r.rows.iter().map(|x| x.value).collect::<Vec<_>>();
        assert_eq!(values(&a), values(&b));
        assert!(a.scaling.is_none());
    }

    #[test]
    fn selftest_passes() {
        let (lines, ok) = cmd_selftest();
        assert!(ok, "selftest failures: {lines:?}");
        assert!(lines.len() >= 5);
    }

    #[test]
    fn run_config_round_trips() {
        let mut cfg = compute_config(
            InputSource::Gen {
                gen: GeneratorSpec::gaussian_copula(0.25, 100, 7),
            },
            vec![EstimatorKind::XiLarge, EstimatorKind::R2],
        );
        cfg.params.eps = vec![0.1];
        let json = serde_json::to_string(&cfg).unwrap();
        let back: RunConfig = serde_json::from_str(&json).unwrap();
        assert_eq!(cfg, back);

        let cfg2 = compute_config(
            InputSource::File {
                path: PathBuf::from("data.csv"),
            },
            vec![EstimatorKind::Xi],
        );
        let json = serde_json::to_string(&cfg2).unwrap();
        let back: RunConfig = serde_json::from_str(&json).unwrap();
        assert_eq!(cfg2, back);
    }
}
