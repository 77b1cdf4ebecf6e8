use std::fs::{self, File};
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{anyhow, bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use serde_json::{json, Value};

use rnproj::experiments::{self, ExperimentConfig, Study};
use rnproj::fx::{build_fx_basis, fx_analyze, FxMarket, JointGrid};
use rnproj::grid_basis::{BasisSet, StateGrid, StrikeSet};
use rnproj::ingest::{clean_chain, read_chain_csv, read_quotes_csv, write_chain_csv, QuoteFile};
use rnproj::projector::{cauchy_weights, estimate_moment, FitMethod, MarketQuotes};
use rnproj::rn_distribution::{default_eval_points, estimate_cdf, rearrange_monotone, write_csv};

#[derive(Parser)]
#[command(name = "rnp", version, about = "Risk-neutral moments and distributions by payoff projection")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Estimate E^Q[g(S_T)] from option quotes.
    EstimateMoment(MomentArgs),
    /// Estimate the risk-neutral CDF and density on evaluation points (CSV).
    EstimateDistribution(DistributionArgs),
    /// Covariance, correlation and joint tail probability of two dollar exchange rates.
    FxCorr(FxArgs),
    /// Clean a raw option chain (CSV in, CSV out).
    Clean(CleanArgs),
    /// Run a simulation study; same as `experiments run`.
    Simulate(RunArgs),
    /// Simulation studies.
    Experiments {
        #[command(subcommand)]
        action: ExperimentsCommand,
    },
}

#[derive(Subcommand)]
enum ExperimentsCommand {
    Run(RunArgs),
}

#[derive(Args, Clone)]
struct QuoteArgs {
    /// CSV with columns strike, side and either price or bid and ask; forward optional.
    #[arg(long)]
    quotes: PathBuf,
    /// Overrides the forward column.
    #[arg(long)]
    forward: Option<f64>,
    /// Continuously compounded risk-free rate per year.
    #[arg(long, default_value_t = 0.0)]
    rate: f64,
    /// Time to maturity in years.
    #[arg(long)]
    maturity: Option<f64>,
    /// Lower grid bound; default 0.5 times the smallest strike.
    #[arg(long)]
    grid_min: Option<f64>,
    /// Upper grid bound; default 1.5 times the largest strike.
    #[arg(long)]
    grid_max: Option<f64>,
}

#[derive(Args)]
struct MomentArgs {
    /// svix, vix, power:<n>, indicator:<x> or file:<csv with columns x,g>.
    #[arg(long)]
    payoff: String,
    #[command(flatten)]
    quotes: QuoteArgs,
    #[arg(long, default_value_t = 1001)]
    grid_points: usize,
    /// Weighted least squares with Cauchy weights of this scale (price units) around the forward.
    #[arg(long)]
    wls_scale: Option<f64>,
    /// Constrain the replicating payoff to be nonnegative on the grid.
    #[arg(long)]
    nonneg: bool,
    /// Lower bound -c on every portfolio weight.
    #[arg(long)]
    weight_floor: Option<f64>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct DistributionArgs {
    #[command(flatten)]
    quotes: QuoteArgs,
    #[arg(long, default_value_t = 501)]
    eval_points: usize,
    /// Sort the CDF into a monotone one.
    #[arg(long)]
    rearrange: bool,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct FxArgs {
    /// JSON with spot1, spot2, gross_usd, gross_gbp, gross_eur, calls1, calls2, cross_calls.
    #[arg(long)]
    market: PathBuf,
    #[arg(long, default_value_t = 201)]
    grid_points: usize,
    /// Grid bounds `lo,hi` for the first rate; default 0.5 and 1.5 times its extreme strikes.
    #[arg(long, value_delimiter = ',')]
    grid1: Option<Vec<f64>>,
    /// Grid bounds `lo,hi` for the second rate.
    #[arg(long, value_delimiter = ',')]
    grid2: Option<Vec<f64>>,
    /// Joint tail event {S1 <= c F1, S2 <= c F2}.
    #[arg(long, default_value_t = 0.95)]
    tail_level: f64,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct CleanArgs {
    /// Raw chain CSV: date, expiry, strike, side, bid, ask, underlying, forward (optional).
    #[arg(long)]
    input: PathBuf,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct RunArgs {
    /// univariate_convergence, fx_recovery or sector_mse.
    #[arg(long)]
    study: Option<Study>,
    /// JSON mirroring the experiment configuration; missing fields take defaults.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory for results.csv, summary.csv and meta.json.
    #[arg(long)]
    out: Option<PathBuf>,
}

fn sink(out: &Option<PathBuf>) -> Result<Box<dyn Write>> {
    Ok(match out {
        Some(p) => Box::new(BufWriter::new(File::create(p).with_context(|| format!("creating {}", p.display()))?)),
        None => Box::new(io::stdout().lock()),
    })
}

fn read_text(path: &Path) -> Result<String> {
    fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))
}

fn write_json(v: &Value, out: &Option<PathBuf>) -> Result<()> {
    let mut w = sink(out)?;
    serde_json::to_writer_pretty(&mut w, v)?;
    writeln!(w)?;
    w.flush()?;
    Ok(())
}

/// Quotes, strikes and grid bounds shared by the univariate commands.
struct Market {
    quotes: MarketQuotes,
    strikes: StrikeSet,
    forward: f64,
    gross_rate: f64,
    a_min: f64,
    a_max: f64,
}

fn load_market(a: &QuoteArgs) -> Result<Market> {
    let file: QuoteFile = read_quotes_csv(File::open(&a.quotes).with_context(|| format!("opening {}", a.quotes.display()))?)
        .with_context(|| format!("parsing {}", a.quotes.display()))?;
    let forward = a
        .forward
        .or(file.forward)
        .ok_or_else(|| rnproj::Error::Validation("no forward: pass --forward or add a forward column".into()))?;
    if a.rate != 0.0 && a.maturity.is_none() {
        return Err(rnproj::Error::Validation("--rate needs --maturity".into()).into());
    }
    let gross_rate = (a.rate * a.maturity.unwrap_or(0.0)).exp();
    let strikes = StrikeSet::new(file.puts.strikes(), file.calls.strikes(), forward)?;
    let all = strikes.all();
    let (kmin, kmax) = match (all.first(), all.last()) {
        (Some(&lo), Some(&hi)) => (lo, hi),
        _ => return Err(rnproj::Error::Validation("quote file has no quotes".into()).into()),
    };
    let quotes = MarketQuotes::single(gross_rate, forward, file.puts, file.calls);
    quotes.validate()?;
    Ok(Market {
        quotes,
        strikes,
        forward,
        gross_rate,
        a_min: a.grid_min.unwrap_or(0.5 * kmin),
        a_max: a.grid_max.unwrap_or(1.5 * kmax),
    })
}

enum Target {
    Svix,
    Vix,
    Power(f64),
    Indicator(f64),
    Table(Vec<[f64; 2]>),
}

impl Target {
    fn parse(spec: &str) -> Result<Target> {
        let bad = || rnproj::Error::Validation(format!("unrecognized payoff {spec:?}"));
        Ok(match spec.split_once(':') {
            None if spec == "svix" => Target::Svix,
            None if spec == "vix" => Target::Vix,
            Some(("power", n)) => Target::Power(n.parse().map_err(|_| bad())?),
            Some(("indicator", x)) => Target::Indicator(x.parse().map_err(|_| bad())?),
            Some(("file", p)) => Target::Table(read_table(Path::new(p))?),
            _ => return Err(bad().into()),
        })
    }

    /// Linear interpolation in the table, extended linearly beyond its ends.
    fn eval(&self, x: f64) -> f64 {
        match self {
            Target::Svix => x * x,
            Target::Vix => x.ln(),
            Target::Power(n) => x.powf(*n),
            Target::Indicator(k) => f64::from(x <= *k),
            Target::Table(t) => {
                let i = t.partition_point(|p| p[0] < x).clamp(1, t.len() - 1);
                let (a, b) = (t[i - 1], t[i]);
                a[1] + (b[1] - a[1]) * (x - a[0]) / (b[0] - a[0])
            }
        }
    }
}

fn read_table(path: &Path) -> Result<Vec<[f64; 2]>> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_path(path)?;
    let mut t = Vec::new();
    for rec in rdr.deserialize::<(f64, f64)>() {
        let (x, g) = rec.map_err(|e| match e.position() {
            Some(p) => rnproj::Error::Validation(format!("{}: line {}: {e}", path.display(), p.line())),
            None => rnproj::Error::Csv(e),
        })?;
        t.push([x, g]);
    }
    if t.len() < 2 || t.windows(2).any(|w| w[1][0] <= w[0][0]) {
        return Err(rnproj::Error::Validation(format!(
            "{}: payoff table needs at least two rows with increasing x",
            path.display()
        ))
        .into());
    }
    Ok(t)
}

fn estimate_moment_cmd(a: &MomentArgs) -> Result<()> {
    let target = Target::parse(&a.payoff)?;
    let m = load_market(&a.quotes)?;
    let grid = StateGrid::uniform(m.a_min, m.a_max, a.grid_points)?;
    let basis = BasisSet::univariate(&m.strikes)?;
    let method = match (a.wls_scale, a.nonneg, a.weight_floor) {
        (Some(c), false, None) => FitMethod::Wls(cauchy_weights(&grid, m.forward, c)?),
        (Some(_), _, _) => {
            return Err(rnproj::Error::Validation("--wls-scale cannot be combined with constraints".into()).into())
        }
        (None, false, None) => FitMethod::Ols,
        (None, nonneg, floor) => FitMethod::Constrained { payoff_nonneg: nonneg, weight_floor: floor },
    };
    let est = estimate_moment(&|x| target.eval(x), &basis, &grid, &m.quotes, &method)?;
    let index = match (&target, a.quotes.maturity) {
        (Target::Svix, Some(t)) => Some(experiments::svix_from(est.estimate, m.forward, t)),
        (Target::Vix, Some(t)) => Some(experiments::vix_from(est.estimate, m.forward, t)),
        _ => None,
    };
    let method_name = match &method {
        FitMethod::Ols => "ols",
        FitMethod::Wls(_) => "wls",
        FitMethod::Constrained { .. } => "constrained",
    };
    let out = json!({
        "estimate": est.estimate,
        "index": index,
        "portfolio": {
            "basis": est.portfolio.basis,
            "coefficients": est.portfolio.coefficients,
        },
        "diagnostics": est.portfolio.diagnostics,
        "config": {
            "payoff": a.payoff,
            "quotes": a.quotes.quotes,
            "forward": m.forward,
            "rate": a.quotes.rate,
            "maturity": a.quotes.maturity,
            "gross_rate": m.gross_rate,
            "grid": {"a_min": m.a_min, "a_max": m.a_max, "n_s": a.grid_points, "spacing": "uniform"},
            "method": {
                "name": method_name,
                "wls_scale": a.wls_scale,
                "nonneg": a.nonneg,
                "weight_floor": a.weight_floor,
            },
            "version": env!("CARGO_PKG_VERSION"),
        },
    });
    write_json(&out, &a.out)
}

fn estimate_distribution_cmd(a: &DistributionArgs) -> Result<()> {
    let m = load_market(&a.quotes)?;
    let basis = BasisSet::univariate(&m.strikes)?;
    let xs = default_eval_points(m.a_min, m.a_max, a.eval_points);
    let mut dist = estimate_cdf(&basis, m.a_min, m.a_max, &m.quotes, &xs)?;
    if a.rearrange {
        dist = rearrange_monotone(&dist);
    }
    let mut w = sink(&a.out)?;
    write_csv(&dist, &mut w)?;
    w.flush()?;
    Ok(())
}

fn fx_corr_cmd(a: &FxArgs) -> Result<()> {
    let text = read_text(&a.market)?;
    let market: FxMarket =
        serde_json::from_str(&text).with_context(|| format!("parsing {}", a.market.display()))?;
    market.validate()?;
    let (k1, k2, k3) = (market.calls1.strikes(), market.calls2.strikes(), market.cross_calls.strikes());
    let basis = build_fx_basis(&k1, &k2, &k3)?;
    let bounds = |k: &[f64], given: &Option<Vec<f64>>| -> Result<(f64, f64)> {
        match given.as_deref() {
            Some([lo, hi]) => Ok((*lo, *hi)),
            Some(_) => Err(rnproj::Error::Validation("grid bounds take two values, lo,hi".into()).into()),
            None => Ok((0.5 * k[0], 1.5 * k[k.len() - 1])),
        }
    };
    let (b1, b2) = (bounds(&k1, &a.grid1)?, bounds(&k2, &a.grid2)?);
    let grids =
        JointGrid { g1: StateGrid::uniform(b1.0, b1.1, a.grid_points)?, g2: StateGrid::uniform(b2.0, b2.1, a.grid_points)? };
    let q = (a.tail_level * market.forward1(), a.tail_level * market.forward2());
    let r = fx_analyze(&market, &basis, &grids, Some(q))?;
    let out = json!({
        "cov": r.cov,
        "var1": r.var1,
        "var2": r.var2,
        "corr": r.corr_clipped,
        "corr_raw": r.corr,
        "tail": {
            "level": a.tail_level,
            "thresholds": [q.0, q.1],
            "probability": r.tail.map(|t| t.probability),
            "raw": r.tail.map(|t| t.raw),
        },
        "config": {
            "market": a.market,
            "grid1": {"a_min": b1.0, "a_max": b1.1, "n_s": a.grid_points},
            "grid2": {"a_min": b2.0, "a_max": b2.1, "n_s": a.grid_points},
            "version": env!("CARGO_PKG_VERSION"),
        },
    });
    write_json(&out, &a.out)
}

fn clean_cmd(a: &CleanArgs) -> Result<()> {
    let rows = read_chain_csv(File::open(&a.input).with_context(|| format!("opening {}", a.input.display()))?)
        .with_context(|| format!("parsing {}", a.input.display()))?;
    let cleaned: Vec<_> = clean_chain(&rows)?.iter().flat_map(|c| c.to_rows()).collect();
    write_chain_csv(&cleaned, sink(&a.out)?)?;
    Ok(())
}

fn run_cmd(a: &RunArgs) -> Result<()> {
    let mut config = match &a.config {
        Some(p) => ExperimentConfig::from_json(&read_text(p)?).with_context(|| format!("parsing {}", p.display()))?,
        None => ExperimentConfig::for_study(a.study.ok_or_else(|| anyhow!("pass --study or --config"))?),
    };
    if let Some(s) = a.study {
        config.study = s;
    }
    if let Some(s) = a.seed {
        config.seed = s;
    }
    if let Some(o) = &a.out {
        config.output = Some(o.clone());
    }
    let dir = match &config.output {
        Some(d) => d.clone(),
        None => bail!("pass --out or set output in the config"),
    };
    let table = experiments::run(&config)?;
    experiments::write_outputs(&table, &config, &dir)?;
    for s in &table.summary {
        eprintln!("{} {} {}: mean {:.6} median {:.6} (n = {})", s.study, s.group, s.metric, s.mean, s.median, s.n);
    }
    Ok(())
}

fn init_threads() -> Result<()> {
    if let Ok(v) = std::env::var("RNP_THREADS") {
        let n: usize = v
            .parse()
            .ok()
            .filter(|&n| n > 0)
            .ok_or_else(|| rnproj::Error::Validation(format!("RNP_THREADS must be a positive integer, got {v:?}")))?;
        rayon::ThreadPoolBuilder::new().num_threads(n).build_global()?;
    }
    Ok(())
}

fn dispatch(cli: Cli) -> Result<()> {
    init_threads()?;
    match cli.command {
        Command::EstimateMoment(a) => estimate_moment_cmd(&a),
        Command::EstimateDistribution(a) => estimate_distribution_cmd(&a),
        Command::FxCorr(a) => fx_corr_cmd(&a),
        Command::Clean(a) => clean_cmd(&a),
        Command::Simulate(a) | Command::Experiments { action: ExperimentsCommand::Run(a) } => run_cmd(&a),
    }
}

/// 3 for numerical failures, 2 for everything else.
fn exit_code(e: &anyhow::Error) -> u8 {
    e.chain()
        .find_map(|c| c.downcast_ref::<rnproj::Error>())
        .map_or(2, |r| r.exit_code() as u8)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match dispatch(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}
