//! Seeded Monte Carlo studies: univariate convergence, FX dependence recovery and the
//! sector correlation experiment.
//!
//! Every replication draws from its own ChaCha stream keyed by `(seed, stream id)`, rows are
//! collected in replication order and summaries are computed from sorted buffers, so a
//! configuration and seed fully determine the output bytes regardless of thread count.

use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::cm_estimator::{cm_estimate, cm_payoff, CmInputs};
use crate::error::{domain, validation, Error, Result};
use crate::fx::{fx_analyze, simulate_fx_market, FxDesign, FxJointModel};
use crate::grid_basis::{StateGrid, StrikeSet};
use crate::models::{
    bs_quotes, path_rng, sample_quotes, svcj_simulate, true_moment, BsParams, MomentFn, MomentModel, SortedSample,
    SvcjParams, TimeUnit,
};
use crate::multi_asset::{
    addition_residual, correlation_from_cov, equicorrelation, BoxDomain, IndexWeights, MomentInputs, QuarticProjector,
};
use crate::projector::{tent_fit_continuous, tent_fit_grid, MarketQuotes};
use crate::quad::GaussLegendre;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Study {
    UnivariateConvergence,
    FxRecovery,
    SectorMse,
}

impl Study {
    pub fn name(&self) -> &'static str {
        match self {
            Study::UnivariateConvergence => "univariate_convergence",
            Study::FxRecovery => "fx_recovery",
            Study::SectorMse => "sector_mse",
        }
    }

    pub fn default_replications(&self) -> usize {
        match self {
            Study::UnivariateConvergence => 500,
            Study::FxRecovery | Study::SectorMse => 1000,
        }
    }
}

impl fmt::Display for Study {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Study {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "univariate_convergence" | "univariate" => Ok(Study::UnivariateConvergence),
            "fx_recovery" | "fx" => Ok(Study::FxRecovery),
            "sector_mse" | "sector" => Ok(Study::SectorMse),
            _ => validation(format!("unknown study '{s}' (univariate_convergence, fx_recovery, sector_mse)")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum ModelKind {
    #[default]
    #[serde(alias = "BS")]
    Bs,
    #[serde(alias = "SVCJ")]
    Svcj,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum StrikeDesign {
    #[default]
    EqualSpaced,
    UniformRandom,
}

impl StrikeDesign {
    pub fn name(&self) -> &'static str {
        match self {
            StrikeDesign::EqualSpaced => "equal_spaced",
            StrikeDesign::UniformRandom => "uniform_random",
        }
    }
}

/// Strike range as a central probability mass of the terminal distribution.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RangeMode {
    FixedFraction(f64),
    VaryingRange { n_k: usize, fractions: Vec<f64> },
}

impl Default for RangeMode {
    fn default() -> Self {
        RangeMode::FixedFraction(0.9)
    }
}

impl RangeMode {
    pub fn varying_default() -> Self {
        RangeMode::VaryingRange { n_k: 30, fractions: vec![0.5, 0.6, 0.7, 0.8, 0.9, 0.95, 0.98, 0.99] }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SvcjSetup {
    pub params: SvcjParams,
    pub time_unit: TimeUnit,
    pub spot: f64,
    pub maturity: f64,
    /// Initial variance in annual units; `None` starts at θ.
    pub v0: Option<f64>,
    pub n_paths: usize,
    pub n_steps: usize,
}

impl Default for SvcjSetup {
    fn default() -> Self {
        SvcjSetup {
            params: SvcjParams::reference(),
            time_unit: TimeUnit::Annual,
            spot: 1.0,
            maturity: 1.0,
            v0: None,
            n_paths: 2_000_000,
            n_steps: 252,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FxVariant {
    Normal,
    Nonlinear,
}

impl FxVariant {
    pub fn name(&self) -> &'static str {
        match self {
            FxVariant::Normal => "normal",
            FxVariant::Nonlinear => "nonlinear",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct FxSetup {
    pub variants: Vec<FxVariant>,
    pub sigma1: f64,
    pub sigma2: f64,
    /// Loading on `S₁³` in the nonlinear variant.
    pub cubic: f64,
    pub design: FxDesign,
    /// Joint tail event `{S₁ ≤ c F₁, S₂ ≤ c F₂}`.
    pub tail_level: f64,
    /// Acceptance thresholds, fixed from an oracle run before the build.
    pub corr_mae_max: f64,
    pub tail_mae_max: f64,
}

impl Default for FxSetup {
    fn default() -> Self {
        FxSetup {
            variants: vec![FxVariant::Normal, FxVariant::Nonlinear],
            sigma1: 0.1,
            sigma2: 0.05,
            cubic: 0.1,
            design: FxDesign::default(),
            tail_level: 0.95,
            corr_mae_max: 0.05,
            tail_mae_max: 0.01,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SectorSetup {
    pub n_assets: usize,
    /// Factor volatilities; calibrated, see the README.
    pub sigma_f: [f64; 2],
    pub sigma_idio: f64,
    /// Loadings are drawn from U[lo, hi].
    pub loadings: [f64; 2],
    /// Gross returns are winsorized to this interval.
    pub clip: [f64; 2],
    /// Unnormalized value weights; the equal-weighted index is added automatically.
    pub value_weights: Vec<f64>,
    /// Box half-width in standard deviations of each excess return.
    pub box_multiplier: f64,
    /// Draws per replication for the winsorized population.
    pub n_oracle: usize,
}

impl Default for SectorSetup {
    fn default() -> Self {
        SectorSetup {
            n_assets: 11,
            sigma_f: [0.25, 0.15],
            sigma_idio: 0.10,
            loadings: [-0.4, 1.0],
            clip: [0.4, 1.5],
            value_weights: vec![0.29, 0.13, 0.12, 0.10, 0.09, 0.085, 0.06, 0.04, 0.025, 0.023, 0.022],
            box_multiplier: 6.0,
            n_oracle: 100_000,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ExperimentConfig {
    pub study: Study,
    pub model: ModelKind,
    pub strike_design: StrikeDesign,
    pub n_k: Vec<usize>,
    pub range: RangeMode,
    /// Replications per cell; `None` uses the study default.
    pub n_mc: Option<usize>,
    pub seed: u64,
    pub output: Option<PathBuf>,
    /// Probability mass of the state domain A.
    pub support: f64,
    pub n_grid: usize,
    pub bs: BsParams,
    pub svcj: SvcjSetup,
    pub fx: FxSetup,
    pub sector: SectorSetup,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            study: Study::UnivariateConvergence,
            model: ModelKind::Bs,
            strike_design: StrikeDesign::EqualSpaced,
            n_k: (1..=13).map(|i| 10 * i).collect(),
            range: RangeMode::default(),
            n_mc: None,
            seed: 20240101,
            output: None,
            support: 0.998,
            n_grid: 2001,
            bs: BsParams::reference(),
            svcj: SvcjSetup::default(),
            fx: FxSetup::default(),
            sector: SectorSetup::default(),
        }
    }
}

impl ExperimentConfig {
    pub fn for_study(study: Study) -> Self {
        ExperimentConfig { study, ..Default::default() }
    }

    pub fn replications(&self) -> usize {
        self.n_mc.unwrap_or_else(|| self.study.default_replications())
    }

    pub fn validate(&self) -> Result<()> {
        if self.replications() < 1 {
            return validation("n_mc must be at least 1");
        }
        match self.study {
            Study::UnivariateConvergence => {
                let nks: Vec<usize> = match &self.range {
                    RangeMode::FixedFraction(_) => self.n_k.clone(),
                    RangeMode::VaryingRange { n_k, .. } => vec![*n_k],
                };
                if nks.is_empty() {
                    return validation("n_k list is empty");
                }
                if let Some(n) = nks.iter().find(|&&n| n < 3) {
                    return validation(format!("n_k values must be at least 3, got {n}"));
                }
                if !(self.support > 0.0 && self.support < 1.0) {
                    return domain("support must lie in (0, 1)");
                }
                let fr: Vec<f64> = match &self.range {
                    RangeMode::FixedFraction(f) => vec![*f],
                    RangeMode::VaryingRange { fractions, .. } => fractions.clone(),
                };
                if fr.is_empty() {
                    return validation("fractions list is empty");
                }
                if let Some(f) = fr.iter().find(|&&f| !(f > 0.0 && f < self.support)) {
                    return domain(format!("strike fraction {f} must lie in (0, support)"));
                }
                if self.n_grid < 2 {
                    return domain("n_grid must be at least 2");
                }
                self.bs.validate()?;
                if self.model == ModelKind::Svcj {
                    self.svcj.params.validate()?;
                    if self.svcj.n_paths < 2 || self.svcj.n_steps < 1 {
                        return domain("SVCJ oracle needs at least two paths and one step");
                    }
                }
            }
            Study::FxRecovery => {
                let f = &self.fx;
                if f.variants.is_empty() {
                    return validation("no FX variants selected");
                }
                if !(f.sigma1 > 0.0 && f.sigma2 > 0.0) {
                    return domain("FX volatilities must be positive");
                }
                if f.design.n_strikes < 2 || f.design.n_grid < 2 {
                    return domain("FX design needs two strikes and two grid points per leg");
                }
            }
            Study::SectorMse => {
                let s = &self.sector;
                if s.n_assets < 2 || s.value_weights.len() != s.n_assets {
                    return validation("sector study needs n_assets >= 2 and one value weight per asset");
                }
                if s.value_weights.iter().any(|w| !(*w > 0.0)) {
                    return domain("value weights must be positive");
                }
                if !(s.clip[0] < 1.0 && 1.0 < s.clip[1] && s.clip[0] > 0.0) {
                    return domain("clip interval must contain one");
                }
                if !(s.box_multiplier > 0.0) || s.n_oracle < 2 {
                    return domain("box multiplier must be positive and n_oracle at least 2");
                }
                if !(s.loadings[0] < s.loadings[1]) {
                    return domain("loading interval is empty");
                }
            }
        }
        Ok(())
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let c: ExperimentConfig = serde_json::from_str(text)?;
        Ok(c)
    }
}

/// Mean, median, extremes and sample standard deviation of a batch.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub n: usize,
    pub mean: f64,
    pub median: f64,
    pub min: f64,
    pub max: f64,
    pub std: f64,
}

impl Summary {
    pub fn of(values: &[f64]) -> Summary {
        let mut v = values.to_vec();
        v.sort_by(|a, b| a.total_cmp(b));
        let n = v.len();
        if n == 0 {
            return Summary { n, mean: f64::NAN, median: f64::NAN, min: f64::NAN, max: f64::NAN, std: f64::NAN };
        }
        let mean = v.iter().sum::<f64>() / n as f64;
        let median = if n % 2 == 1 { v[n / 2] } else { 0.5 * (v[n / 2 - 1] + v[n / 2]) };
        let std = if n > 1 { (v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1) as f64).sqrt() } else { 0.0 };
        Summary { n, mean, median, min: v[0], max: v[n - 1], std }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummaryRow {
    pub study: String,
    pub group: String,
    pub metric: String,
    pub n: usize,
    pub mean: f64,
    pub median: f64,
    pub min: f64,
    pub max: f64,
    pub std: f64,
}

impl SummaryRow {
    fn new(study: Study, group: String, metric: &str, values: &[f64]) -> Self {
        let s = Summary::of(values);
        SummaryRow {
            study: study.name().into(),
            group,
            metric: metric.into(),
            n: s.n,
            mean: s.mean,
            median: s.median,
            min: s.min,
            max: s.max,
            std: s.std,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UnivariateRow {
    pub study: String,
    pub model: String,
    pub design: String,
    pub range: String,
    pub n_k: usize,
    pub fraction: f64,
    pub replication: usize,
    /// `svix` or `vix`.
    pub quantity: String,
    /// `projection` or `cm`.
    pub estimator: String,
    pub estimate: f64,
    pub truth: f64,
    pub rel_error: f64,
    /// Strikes left out of the projection because no grid state supports their hinge.
    pub dropped_strikes: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FxRow {
    pub study: String,
    pub variant: String,
    pub draw: usize,
    pub rho: f64,
    pub true_corr: f64,
    pub est_corr: f64,
    pub est_corr_raw: f64,
    pub true_tail: f64,
    pub est_tail: f64,
    pub est_tail_raw: f64,
    pub cross_call_alt_price: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SectorRow {
    pub study: String,
    pub replication: usize,
    pub mse_equicorrelation: f64,
    /// Raw projection correlations, which may leave [-1, 1].
    pub mse_projection: f64,
    /// Pearson correlation between the true and raw projected pairwise correlations.
    pub within_run_corr: f64,
    pub mse_projection_clipped: f64,
    pub within_run_corr_clipped: f64,
    pub equicorrelation: f64,
    pub mean_true_corr: f64,
    pub max_addition_residual: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Rows {
    Univariate(Vec<UnivariateRow>),
    Fx(Vec<FxRow>),
    Sector(Vec<SectorRow>),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultTable {
    pub study: Study,
    pub rows: Rows,
    pub summary: Vec<SummaryRow>,
    /// Derived run facts for `meta.json` (oracle forward, thresholds, and so on).
    pub meta: serde_json::Map<String, serde_json::Value>,
}

impl ResultTable {
    pub fn summary_for(&self, group: &str, metric: &str) -> Option<&SummaryRow> {
        self.summary.iter().find(|r| r.group == group && r.metric == metric)
    }

    pub fn results_csv(&self) -> Result<Vec<u8>> {
        let mut w = csv::Writer::from_writer(Vec::new());
        match &self.rows {
            Rows::Univariate(r) => r.iter().try_for_each(|x| w.serialize(x))?,
            Rows::Fx(r) => r.iter().try_for_each(|x| w.serialize(x))?,
            Rows::Sector(r) => r.iter().try_for_each(|x| w.serialize(x))?,
        }
        w.into_inner().map_err(|e| Error::Internal(e.to_string()))
    }

    pub fn summary_csv(&self) -> Result<Vec<u8>> {
        let mut w = csv::Writer::from_writer(Vec::new());
        for r in &self.summary {
            w.serialize(r)?;
        }
        w.into_inner().map_err(|e| Error::Internal(e.to_string()))
    }
}

/// Writes `results.csv`, `summary.csv` and `meta.json` into `dir`.
pub fn write_outputs(table: &ResultTable, config: &ExperimentConfig, dir: &Path) -> Result<()> {
    fs::create_dir_all(dir)?;
    fs::write(dir.join("results.csv"), table.results_csv()?)?;
    fs::write(dir.join("summary.csv"), table.summary_csv()?)?;
    let meta = serde_json::json!({
        "study": table.study.name(),
        "package": env!("CARGO_PKG_NAME"),
        "version": env!("CARGO_PKG_VERSION"),
        "seed": config.seed,
        "replications": config.replications(),
        "config": config,
        "derived": table.meta,
    });
    fs::write(dir.join("meta.json"), serde_json::to_string_pretty(&meta)? + "\n")?;
    Ok(())
}

/// Dispatches on `config.study`.
pub fn run(config: &ExperimentConfig) -> Result<ResultTable> {
    match config.study {
        Study::UnivariateConvergence => run_univariate_convergence(config),
        Study::FxRecovery => run_fx_recovery(config),
        Study::SectorMse => run_sector_mse(config),
    }
}

fn linspace(a: f64, b: f64, n: usize) -> Vec<f64> {
    (0..n).map(|i| if i + 1 == n { b } else { a + (b - a) * i as f64 / (n - 1) as f64 }).collect()
}

// Stream ids: the top bits separate the oracle, cells and variants.
const ORACLE_SEED_SALT: u64 = 0x5EED_0AC1E;

fn stream_id(cell: usize, rep: usize) -> u64 {
    ((cell as u64) << 32) | rep as u64
}

/// Terminal distribution used to quote options and define the true moments.
#[derive(Debug, Clone)]
pub enum Oracle {
    Bs(BsParams),
    Sample {
        sorted: SortedSample,
        gross_rate: f64,
        maturity: f64,
        e_square: f64,
        e_log: f64,
    },
}

impl Oracle {
    pub fn quantile(&self, p: f64) -> f64 {
        match self {
            Oracle::Bs(b) => b.quantile(p),
            Oracle::Sample { sorted, .. } => sorted.quantile(p),
        }
    }

    pub fn forward(&self) -> f64 {
        match self {
            Oracle::Bs(b) => b.forward(),
            Oracle::Sample { sorted, .. } => sorted.mean(),
        }
    }

    pub fn maturity(&self) -> f64 {
        match self {
            Oracle::Bs(b) => b.maturity,
            Oracle::Sample { maturity, .. } => *maturity,
        }
    }

    pub fn quotes(&self, strikes: &StrikeSet) -> MarketQuotes {
        match self {
            Oracle::Bs(b) => bs_quotes(b, strikes),
            Oracle::Sample { sorted, gross_rate, .. } => sample_quotes(sorted, *gross_rate, strikes),
        }
    }

    /// `(E[S²], E[log S])`.
    pub fn moments(&self) -> Result<(f64, f64)> {
        match self {
            Oracle::Bs(b) => Ok((
                true_moment(&MomentModel::Bs(*b), &MomentFn::Square)?.value,
                true_moment(&MomentModel::Bs(*b), &MomentFn::Log)?.value,
            )),
            Oracle::Sample { e_square, e_log, .. } => Ok((*e_square, *e_log)),
        }
    }
}

/// `√((E[S²]/F² − 1)/T)`, floored at zero.
pub fn svix_from(e_square: f64, forward: f64, maturity: f64) -> f64 {
    ((e_square / (forward * forward) - 1.0).max(0.0) / maturity).sqrt()
}

/// `√((2/T)(log F − E[log S]))`, floored at zero.
pub fn vix_from(e_log: f64, forward: f64, maturity: f64) -> f64 {
    (2.0 / maturity * (forward.ln() - e_log)).max(0.0).sqrt()
}

/// Builds the quoting model; for SVCJ this simulates the shared oracle sample.
pub fn build_oracle(config: &ExperimentConfig) -> Result<Oracle> {
    match config.model {
        ModelKind::Bs => {
            config.bs.validate()?;
            Ok(Oracle::Bs(config.bs))
        }
        ModelKind::Svcj => {
            let s = &config.svcj;
            let p = s.params.annualized(s.time_unit);
            let v0 = s.v0.unwrap_or(p.theta);
            let sample = svcj_simulate(&p, s.spot, v0, s.maturity, s.n_paths, s.n_steps, config.seed ^ ORACLE_SEED_SALT)?;
            let n = sample.values.len() as f64;
            let e_square = sample.values.iter().map(|x| x * x).sum::<f64>() / n;
            let e_log = sample.values.iter().map(|x| x.ln()).sum::<f64>() / n;
            Ok(Oracle::Sample {
                sorted: SortedSample::new(&sample.values),
                gross_rate: (p.r * s.maturity).exp(),
                maturity: s.maturity,
                e_square,
                e_log,
            })
        }
    }
}

/// Smallest tent value a grid state needs to count as support.
pub const TENT_SUPPORT_MIN: f64 = 1e-3;

/// Removes strikes until the tent design on the grid is well identified. Tents in knot order
/// must each claim their own grid state where the tent is at least [`TENT_SUPPORT_MIN`], taken
/// greedily from the left; the first strike whose tent cannot is dropped and the scan restarts.
pub fn drop_unsupported(strikes: &[f64], grid: &StateGrid) -> Vec<f64> {
    let pts = grid.points();
    let mut ks = strikes.to_vec();
    'scan: loop {
        let n = ks.len();
        let mut knots = Vec::with_capacity(n + 2);
        knots.push(grid.a_min());
        knots.extend_from_slice(&ks);
        knots.push(grid.a_max());
        let mut next = 0;
        for i in 0..knots.len() {
            let tent = |s: f64| {
                let up = if i == 0 { 1.0 } else { (s - knots[i - 1]) / (knots[i] - knots[i - 1]) };
                let down = if i == n + 1 { 1.0 } else { (knots[i + 1] - s) / (knots[i + 1] - knots[i]) };
                up.min(down)
            };
            let lo = if i == 0 { f64::NEG_INFINITY } else { knots[i - 1] };
            let hi = if i == n + 1 { f64::INFINITY } else { knots[i + 1] };
            let start = next.max(pts.partition_point(|&s| s <= lo));
            let claim = pts[start.min(pts.len())..]
                .iter()
                .take_while(|&&s| s < hi)
                .position(|&s| tent(s) >= TENT_SUPPORT_MIN);
            match claim {
                Some(j) => next = start + j + 1,
                None if n == 0 => return ks,
                None => {
                    ks.remove(i.clamp(1, n) - 1);
                    continue 'scan;
                }
            }
        }
        return ks;
    }
}

struct Cell {
    n_k: usize,
    fraction: f64,
}

struct RepEstimates {
    proj_sq: f64,
    proj_log: f64,
    cm_sq: f64,
    cm_log: f64,
    forward: f64,
    dropped: usize,
}

fn univariate_rep(
    oracle: &Oracle,
    grid: &StateGrid,
    y_sq: &[f64],
    y_log: &[f64],
    strikes: &[f64],
) -> Result<RepEstimates> {
    let f = oracle.forward();
    let full = StrikeSet::split(strikes, f)?;
    let quotes = oracle.quotes(&full);
    let forward = quotes.forwards[0];
    let kept = drop_unsupported(strikes, grid);
    let proj_set = StrikeSet::split(&kept, forward)?;
    let fit_sq = tent_fit_grid(&proj_set, grid, y_sq, None)?;
    let fit_log = tent_fit_grid(&proj_set, grid, y_log, None)?;
    let proj_sq = fit_sq.price(&proj_set, &quotes)?;
    let proj_log = fit_log.price(&proj_set, &quotes)?;
    let two = |_: f64| 2.0;
    let inv_sq = |k: f64| -1.0 / (k * k);
    let cm = |g0: f64, g1: f64, g2: &dyn Fn(f64) -> f64| {
        cm_estimate(&CmInputs {
            g_at_forward: g0,
            g_prime_at_forward: g1,
            g_double_prime: g2,
            strikes: &full,
            quotes: &quotes,
            fallback_gap: None,
        })
        .map(|e| e.estimate)
    };
    let cm_sq = cm(forward * forward, 2.0 * forward, &two)?;
    let cm_log = cm(forward.ln(), 1.0 / forward, &inv_sq)?;
    Ok(RepEstimates { proj_sq, proj_log, cm_sq, cm_log, forward, dropped: strikes.len() - kept.len() })
}

/// Univariate convergence study: SVIX and VIX by projection and by Carr-Madan across strike counts or
/// strike ranges.
pub fn run_univariate_convergence(config: &ExperimentConfig) -> Result<ResultTable> {
    config.validate()?;
    let oracle = build_oracle(config)?;
    run_univariate_with(config, &oracle)
}

/// As [`run_univariate_convergence`] with a prebuilt oracle, so several designs can share one
/// simulated sample.
pub fn run_univariate_with(config: &ExperimentConfig, oracle: &Oracle) -> Result<ResultTable> {
    config.validate()?;
    let tail = 0.5 * (1.0 - config.support);
    let grid = StateGrid::uniform(oracle.quantile(tail), oracle.quantile(1.0 - tail), config.n_grid)?;
    let y_sq: Vec<f64> = grid.points().iter().map(|s| s * s).collect();
    let y_log: Vec<f64> = grid.points().iter().map(|s| s.ln()).collect();
    let t = oracle.maturity();
    let (e_sq, e_log) = oracle.moments()?;
    let (range_name, cells): (&str, Vec<Cell>) = match &config.range {
        RangeMode::FixedFraction(f) => ("fixed", config.n_k.iter().map(|&n_k| Cell { n_k, fraction: *f }).collect()),
        RangeMode::VaryingRange { n_k, fractions } => {
            ("varying", fractions.iter().map(|&fraction| Cell { n_k: *n_k, fraction }).collect())
        }
    };
    let model = match config.model {
        ModelKind::Bs => "bs",
        ModelKind::Svcj => "svcj",
    };
    let design = config.strike_design;
    let n_mc = config.replications();
    let jobs: Vec<(usize, usize)> = (0..cells.len()).flat_map(|c| (0..n_mc).map(move |r| (c, r))).collect();
    let reps: Vec<Result<RepEstimates>> = jobs
        .par_iter()
        .map(|&(c, r)| {
            let cell = &cells[c];
            let lo = oracle.quantile(0.5 * (1.0 - cell.fraction));
            let hi = oracle.quantile(1.0 - 0.5 * (1.0 - cell.fraction));
            let ks = match design {
                StrikeDesign::EqualSpaced => linspace(lo, hi, cell.n_k),
                StrikeDesign::UniformRandom => {
                    let mut rng = path_rng(config.seed, stream_id(c, r));
                    let mut v: Vec<f64> = (0..cell.n_k).map(|_| lo + (hi - lo) * rng.random::<f64>()).collect();
                    v.sort_by(|a, b| a.total_cmp(b));
                    v.dedup();
                    v
                }
            };
            univariate_rep(oracle, &grid, &y_sq, &y_log, &ks)
        })
        .collect();
    let mut rows = Vec::with_capacity(4 * jobs.len());
    for (&(c, r), est) in jobs.iter().zip(reps) {
        let e = est?;
        let cell = &cells[c];
        let sv_true = svix_from(e_sq, e.forward, t);
        let vx_true = vix_from(e_log, e.forward, t);
        let mut push = |quantity: &str, estimator: &str, estimate: f64, truth: f64, dropped: usize| {
            rows.push(UnivariateRow {
                study: Study::UnivariateConvergence.name().into(),
                model: model.into(),
                design: design.name().into(),
                range: range_name.into(),
                n_k: cell.n_k,
                fraction: cell.fraction,
                replication: r,
                quantity: quantity.into(),
                estimator: estimator.into(),
                estimate,
                truth,
                rel_error: (estimate - truth).abs() / truth,
                dropped_strikes: dropped,
            })
        };
        push("svix", "projection", svix_from(e.proj_sq, e.forward, t), sv_true, e.dropped);
        push("svix", "cm", svix_from(e.cm_sq, e.forward, t), sv_true, 0);
        push("vix", "projection", vix_from(e.proj_log, e.forward, t), vx_true, e.dropped);
        push("vix", "cm", vix_from(e.cm_log, e.forward, t), vx_true, 0);
    }
    let mut summary = Vec::new();
    for cell in &cells {
        for quantity in ["svix", "vix"] {
            for estimator in ["projection", "cm"] {
                let vals: Vec<f64> = rows
                    .iter()
                    .filter(|x| {
                        x.n_k == cell.n_k && x.fraction == cell.fraction && x.quantity == quantity && x.estimator == estimator
                    })
                    .map(|x| x.rel_error)
                    .collect();
                let group = univariate_group(model, design, range_name, cell.n_k, cell.fraction, quantity, estimator);
                summary.push(SummaryRow::new(Study::UnivariateConvergence, group, "rel_error", &vals));
            }
        }
    }
    let mut meta = serde_json::Map::new();
    meta.insert("grid".into(), serde_json::json!({"a_min": grid.a_min(), "a_max": grid.a_max(), "n": grid.len()}));
    meta.insert("forward".into(), oracle.forward().into());
    meta.insert("true_svix".into(), svix_from(e_sq, oracle.forward(), t).into());
    meta.insert("true_vix".into(), vix_from(e_log, oracle.forward(), t).into());
    if let Oracle::Sample { sorted, .. } = oracle {
        let p = config.svcj.params.annualized(config.svcj.time_unit);
        meta.insert("oracle_paths".into(), sorted.len().into());
        meta.insert("oracle_seed".into(), (config.seed ^ ORACLE_SEED_SALT).into());
        meta.insert("svcj_annual_params".into(), serde_json::to_value(p)?);
        meta.insert("svcj_v0".into(), config.svcj.v0.unwrap_or(p.theta).into());
    }
    Ok(ResultTable { study: Study::UnivariateConvergence, rows: Rows::Univariate(rows), summary, meta })
}

/// Summary group label for one univariate cell.
pub fn univariate_group(
    model: &str,
    design: StrikeDesign,
    range: &str,
    n_k: usize,
    fraction: f64,
    quantity: &str,
    estimator: &str,
) -> String {
    format!("{model}/{}/{range}/n_k={n_k}/fraction={fraction}/{quantity}/{estimator}", design.name())
}

fn fx_model(setup: &FxSetup, variant: FxVariant, rho: f64) -> FxJointModel {
    FxJointModel {
        forward1: 1.0,
        forward2: 1.0,
        sigma1: setup.sigma1,
        sigma2: setup.sigma2,
        rho,
        cubic: match variant {
            FxVariant::Normal => 0.0,
            FxVariant::Nonlinear => setup.cubic,
        },
    }
}

/// FX recovery study: implied correlation and joint tail probability from the FX basis,
/// against the simulated truth.
pub fn run_fx_recovery(config: &ExperimentConfig) -> Result<ResultTable> {
    config.validate()?;
    let setup = &config.fx;
    let n = config.replications();
    let jobs: Vec<(usize, usize)> = (0..setup.variants.len()).flat_map(|v| (0..n).map(move |d| (v, d))).collect();
    let out: Vec<Result<FxRow>> = jobs
        .par_iter()
        .map(|&(v, d)| {
            let variant = setup.variants[v];
            let mut rng = path_rng(config.seed, stream_id(v, d));
            let rho = 2.0 * rng.random::<f64>() - 1.0;
            let model = fx_model(setup, variant, rho);
            let mut sim = simulate_fx_market(&model, &setup.design)?;
            let q = (setup.tail_level * model.forward1, setup.tail_level * model.forward2);
            // a compressed S₂ leg can put the threshold below the 2% quantile
            sim.cover(q.0, q.1)?;
            let a = fx_analyze(&sim.market, &sim.basis, &sim.grids, Some(q))?;
            let tail = a.tail.ok_or_else(|| Error::Internal("tail estimate missing".into()))?;
            Ok(FxRow {
                study: Study::FxRecovery.name().into(),
                variant: variant.name().into(),
                draw: d,
                rho,
                true_corr: model.correlation(),
                est_corr: a.corr_clipped,
                est_corr_raw: a.corr,
                true_tail: model.tail(q.0, q.1),
                est_tail: tail.probability,
                est_tail_raw: tail.raw,
                cross_call_alt_price: a.cross_gbp_rate_variant.iter().sum(),
            })
        })
        .collect();
    let rows: Vec<FxRow> = out.into_iter().collect::<Result<_>>()?;
    let mut summary = Vec::new();
    for variant in &setup.variants {
        let sel: Vec<&FxRow> = rows.iter().filter(|r| r.variant == variant.name()).collect();
        let ec: Vec<f64> = sel.iter().map(|r| (r.est_corr - r.true_corr).abs()).collect();
        let et: Vec<f64> = sel.iter().map(|r| (r.est_tail - r.true_tail).abs()).collect();
        summary.push(SummaryRow::new(Study::FxRecovery, variant.name().into(), "abs_error_corr", &ec));
        summary.push(SummaryRow::new(Study::FxRecovery, variant.name().into(), "abs_error_tail", &et));
    }
    let mut meta = serde_json::Map::new();
    meta.insert(
        "thresholds".into(),
        serde_json::json!({"corr_mae_max": setup.corr_mae_max, "tail_mae_max": setup.tail_mae_max}),
    );
    meta.insert("tail_event".into(), serde_json::json!({"level": setup.tail_level, "relative_to": "forward", "grid_stretched_to_cover": true}));
    Ok(ResultTable { study: Study::FxRecovery, rows: Rows::Fx(rows), summary, meta })
}

fn pearson(a: &[f64], b: &[f64]) -> f64 {
    let n = a.len() as f64;
    let ma = a.iter().sum::<f64>() / n;
    let mb = b.iter().sum::<f64>() / n;
    let (mut sab, mut saa, mut sbb) = (0.0, 0.0, 0.0);
    for (x, y) in a.iter().zip(b) {
        sab += (x - ma) * (y - mb);
        saa += (x - ma) * (x - ma);
        sbb += (y - mb) * (y - mb);
    }
    sab / (saa * sbb).sqrt()
}

/// One sector replication: draws loadings and the winsorized population, then compares
/// equicorrelation and quartic projection against the population correlations.
pub fn sector_replication(setup: &SectorSetup, seed: u64, replication: usize) -> Result<SectorRow> {
    let d = setup.n_assets;
    let mut rng = path_rng(seed, replication as u64);
    let (blo, bhi) = (setup.loadings[0], setup.loadings[1]);
    let load: Vec<[f64; 2]> =
        (0..d).map(|_| [blo + (bhi - blo) * rng.random::<f64>(), blo + (bhi - blo) * rng.random::<f64>()]).collect();
    let [sf0, sf1] = setup.sigma_f;
    let si = setup.sigma_idio;
    let half_var: Vec<f64> =
        load.iter().map(|b| 0.5 * (b[0] * b[0] * sf0 * sf0 + b[1] * b[1] * sf1 * sf1 + si * si)).collect();
    let vsum: f64 = setup.value_weights.iter().sum();
    let vw: Vec<f64> = setup.value_weights.iter().map(|w| w / vsum).collect();
    let ew = vec![1.0 / d as f64; d];
    let idx = [&vw, &ew];

    let mut s1 = vec![0.0; d];
    let mut s2 = vec![0.0; d * d];
    let mut s4 = vec![0.0; d];
    let mut m2 = [0.0; 2];
    let mut m4 = [0.0; 2];
    let mut x = vec![0.0; d];
    for _ in 0..setup.n_oracle {
        let z0: f64 = StandardNormal.sample(&mut rng);
        let z1: f64 = StandardNormal.sample(&mut rng);
        let f0 = sf0 * z0;
        let f1 = sf1 * z1;
        for k in 0..d {
            let e: f64 = StandardNormal.sample(&mut rng);
            let xk = load[k][0] * f0 + load[k][1] * f1 + si * e;
            x[k] = (xk - half_var[k]).exp().clamp(setup.clip[0], setup.clip[1]) - 1.0;
        }
        for k in 0..d {
            s1[k] += x[k];
            let xk2 = x[k] * x[k];
            s4[k] += xk2 * xk2;
            for l in k..d {
                s2[k * d + l] += x[k] * x[l];
            }
        }
        for (l, w) in idx.iter().enumerate() {
            let xm: f64 = w.iter().zip(&x).map(|(a, b)| a * b).sum();
            let xm2 = xm * xm;
            m2[l] += xm2;
            m4[l] += xm2 * xm2;
        }
    }
    let nf = setup.n_oracle as f64;
    let mean: Vec<f64> = s1.iter().map(|v| v / nf).collect();
    let var: Vec<f64> = (0..d).map(|k| s2[k * d + k] / nf).collect();
    let sd: Vec<f64> = (0..d).map(|k| (var[k] - mean[k] * mean[k]).sqrt()).collect();
    let moments = MomentInputs {
        var: var.clone(),
        m4: s4.iter().map(|v| v / nf).collect(),
        index_var: m2.iter().map(|v| v / nf).collect(),
        index_m4: m4.iter().map(|v| v / nf).collect(),
        gross_rate: 1.0,
    };
    let weights = IndexWeights::new(vec![vw.clone(), ew])?;
    let rho_eq = equicorrelation(&moments, &weights, 0)?;
    let half: Vec<f64> = sd.iter().map(|s| setup.box_multiplier * s).collect();
    let proj = QuarticProjector::new(&BoxDomain::symmetric(&half)?, &weights)?;
    let cov = proj.covariance(&moments)?;
    let clipped = correlation_from_cov(&cov);
    let resid = addition_residual(&cov, &moments, &weights);
    let mut truth = Vec::new();
    let mut est = Vec::new();
    let mut est_clipped = Vec::new();
    for i in 0..d {
        for j in i + 1..d {
            let c = s2[i * d + j] / nf - mean[i] * mean[j];
            truth.push(c / (sd[i] * sd[j]));
            est.push(cov[(i, j)] / (cov[(i, i)] * cov[(j, j)]).sqrt());
            est_clipped.push(clipped[(i, j)]);
        }
    }
    let np = truth.len() as f64;
    let mse = |e: &[f64]| truth.iter().zip(e).map(|(t, e)| (e - t).powi(2)).sum::<f64>() / np;
    Ok(SectorRow {
        study: Study::SectorMse.name().into(),
        replication,
        mse_equicorrelation: truth.iter().map(|t| (rho_eq - t).powi(2)).sum::<f64>() / np,
        mse_projection: mse(&est),
        within_run_corr: pearson(&truth, &est),
        mse_projection_clipped: mse(&est_clipped),
        within_run_corr_clipped: pearson(&truth, &est_clipped),
        equicorrelation: rho_eq,
        mean_true_corr: truth.iter().sum::<f64>() / np,
        max_addition_residual: resid.iter().fold(0.0f64, |m, r| m.max(r.abs())),
    })
}

/// Sector MSE study.
pub fn run_sector_mse(config: &ExperimentConfig) -> Result<ResultTable> {
    config.validate()?;
    let n = config.replications();
    let out: Vec<Result<SectorRow>> =
        (0..n).into_par_iter().map(|r| sector_replication(&config.sector, config.seed, r)).collect();
    let rows: Vec<SectorRow> = out.into_iter().collect::<Result<_>>()?;
    let col = |f: fn(&SectorRow) -> f64| rows.iter().map(f).collect::<Vec<f64>>();
    let summary = vec![
        SummaryRow::new(Study::SectorMse, "equicorrelation".into(), "mse", &col(|r| r.mse_equicorrelation)),
        SummaryRow::new(Study::SectorMse, "projection".into(), "mse", &col(|r| r.mse_projection)),
        SummaryRow::new(Study::SectorMse, "projection".into(), "within_run_corr", &col(|r| r.within_run_corr)),
        SummaryRow::new(Study::SectorMse, "projection_clipped".into(), "mse", &col(|r| r.mse_projection_clipped)),
        SummaryRow::new(
            Study::SectorMse,
            "projection_clipped".into(),
            "within_run_corr",
            &col(|r| r.within_run_corr_clipped),
        ),
        SummaryRow::new(Study::SectorMse, "projection".into(), "max_addition_residual", &col(|r| r.max_addition_residual)),
    ];
    let mut meta = serde_json::Map::new();
    meta.insert("indices".into(), serde_json::json!(["value_weighted", "equal_weighted"]));
    meta.insert("equicorrelation_index".into(), "value_weighted".into());
    Ok(ResultTable { study: Study::SectorMse, rows: Rows::Sector(rows), summary, meta })
}

/// Errors of the projection and Carr-Madan approximations of `S²` under Black-Scholes as the
/// strike count grows with the boundary gap `c (a_max − a_min) n^{−0.8}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SlopeStudy {
    pub gap_constant: f64,
    pub n_k: Vec<usize>,
    pub projection_errors: Vec<f64>,
    pub cm_errors: Vec<f64>,
    pub projection_slope: f64,
    pub cm_slope: f64,
}

/// Least-squares slope of `log y` on `log x`.
pub fn log_log_slope(x: &[f64], y: &[f64]) -> f64 {
    let lx: Vec<f64> = x.iter().map(|v| v.ln()).collect();
    let ly: Vec<f64> = y.iter().map(|v| v.ln()).collect();
    let n = lx.len() as f64;
    let mx = lx.iter().sum::<f64>() / n;
    let my = ly.iter().sum::<f64>() / n;
    let sxy: f64 = lx.iter().zip(&ly).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = lx.iter().map(|a| (a - mx).powi(2)).sum();
    sxy / sxx
}

/// The truncated pricing error `|∫_A (ĝ − g) q|` with A the central `support` mass, for the
/// continuous-state projection and for the Carr-Madan payoff.
pub fn convergence_slopes(bs: &BsParams, support: f64, gap_constant: f64, n_k: &[usize]) -> Result<SlopeStudy> {
    bs.validate()?;
    let tail = 0.5 * (1.0 - support);
    let (a, b) = (bs.quantile(tail), bs.quantile(1.0 - tail));
    let f = bs.forward();
    let g = |s: f64| s * s;
    let gl = GaussLegendre::new(16);
    let mut pe = Vec::new();
    let mut ce = Vec::new();
    for &n in n_k {
        if n < 3 {
            return domain("slope study needs at least three strikes");
        }
        let gap = gap_constant * (b - a) * (n as f64).powf(-0.8);
        let ks = linspace(a + gap, b - gap, n);
        let strikes = StrikeSet::split(&ks, f)?;
        let fit = tent_fit_continuous(&strikes, a, b, &g, &gl)?;
        let mut breaks = ks.clone();
        breaks.push(f);
        breaks.sort_by(|x, y| x.total_cmp(y));
        let p_err = gl.integrate_pieces(a, b, &breaks, |s| (fit.eval(s) - g(s)) * bs.pdf(s));
        let quotes = bs_quotes(bs, &strikes);
        let two = |_: f64| 2.0;
        let inputs = CmInputs {
            g_at_forward: f * f,
            g_prime_at_forward: 2.0 * f,
            g_double_prime: &two,
            strikes: &strikes,
            quotes: &quotes,
            fallback_gap: None,
        };
        let est = cm_estimate(&inputs)?;
        let c_err = gl.integrate_pieces(a, b, &breaks, |s| (cm_payoff(&inputs, &est, s) - g(s)) * bs.pdf(s));
        pe.push(p_err.abs());
        ce.push(c_err.abs());
    }
    let xs: Vec<f64> = n_k.iter().map(|&n| n as f64).collect();
    Ok(SlopeStudy {
        gap_constant,
        n_k: n_k.to_vec(),
        projection_slope: log_log_slope(&xs, &pe),
        cm_slope: log_log_slope(&xs, &ce),
        projection_errors: pe,
        cm_errors: ce,
    })
}

/// Continuous projection of `g` on `{1, x, (x − K_i)+}` with `K_i = a + i h`,
/// `h = (b − a)/(n + 1)`, and the deviations `|γ_i − h g''(K_i)|`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WeightEquivalence {
    pub n: usize,
    pub h: f64,
    pub deviations: Vec<f64>,
}

impl WeightEquivalence {
    /// Maximum over `i = 2..n−1` (one strike in from each end).
    pub fn interior_max(&self) -> f64 {
        let n = self.deviations.len();
        self.deviations[1..n - 1].iter().fold(0.0, |m, v| m.max(*v))
    }

    /// Maximum over the middle half of the strikes.
    pub fn middle_half_max(&self) -> f64 {
        let n = self.deviations.len();
        self.deviations[n / 4..3 * n / 4].iter().fold(0.0, |m, v| m.max(*v))
    }
}

pub fn weight_equivalence(
    g: &dyn Fn(f64) -> f64,
    g2: &dyn Fn(f64) -> f64,
    a: f64,
    b: f64,
    n: usize,
) -> Result<WeightEquivalence> {
    if n < 3 || !(a < b) {
        return domain("weight equivalence needs n >= 3 and a < b");
    }
    let h = (b - a) / (n + 1) as f64;
    let ks: Vec<f64> = (1..=n).map(|i| a + h * i as f64).collect();
    let strikes = StrikeSet::new(vec![], ks.clone(), a)?;
    let gl = GaussLegendre::new(8);
    let fit = tent_fit_continuous(&strikes, a, b, g, &gl)?;
    let coef = fit.hinge_coefficients(&strikes);
    let deviations = ks.iter().zip(&coef[2..]).map(|(k, c)| (c - h * g2(*k)).abs()).collect();
    Ok(WeightEquivalence { n, h, deviations })
}
