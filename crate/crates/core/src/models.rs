//! Synthetic markets: Black-Scholes, Garman-Kohlhagen with premium-adjusted deltas, and an
//! SVCJ jump-diffusion simulator used as a ground-truth oracle.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use statrs::distribution::{Continuous, ContinuousCDF, Normal};

use crate::error::{domain, Error, Result};
use crate::grid_basis::StrikeSet;
use crate::projector::{MarketQuotes, PriceCurve};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Side {
    Call,
    Put,
}

fn std_normal() -> Normal {
    Normal::new(0.0, 1.0).expect("unit normal")
}

pub fn norm_cdf(x: f64) -> f64 {
    std_normal().cdf(x)
}

pub fn norm_pdf(x: f64) -> f64 {
    std_normal().pdf(x)
}

pub fn norm_inv(p: f64) -> f64 {
    std_normal().inverse_cdf(p)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BsParams {
    pub spot: f64,
    /// Continuously compounded, per annum.
    pub rate: f64,
    pub vol: f64,
    pub maturity: f64,
}

impl BsParams {
    /// The simulation market: one year, r = 5%, σ = 20%.
    pub fn reference() -> Self {
        BsParams { spot: 1.0, rate: 0.05, vol: 0.2, maturity: 1.0 }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.vol > 0.0 && self.maturity > 0.0 && self.spot > 0.0) {
            return domain("Black-Scholes needs positive spot, vol and maturity");
        }
        Ok(())
    }

    pub fn forward(&self) -> f64 {
        self.spot * (self.rate * self.maturity).exp()
    }

    pub fn gross_rate(&self) -> f64 {
        (self.rate * self.maturity).exp()
    }

    /// Quantile of the terminal price.
    pub fn quantile(&self, p: f64) -> f64 {
        let s = self.vol * self.maturity.sqrt();
        self.forward() * (-0.5 * s * s + s * norm_inv(p)).exp()
    }

    /// Terminal price distribution function.
    pub fn cdf(&self, x: f64) -> f64 {
        let s = self.vol * self.maturity.sqrt();
        norm_cdf(((x / self.forward()).ln() + 0.5 * s * s) / s)
    }

    pub fn pdf(&self, x: f64) -> f64 {
        let s = self.vol * self.maturity.sqrt();
        norm_pdf(((x / self.forward()).ln() + 0.5 * s * s) / s) / (x * s)
    }
}

/// Black-76 style price on a forward with discount factor `df`.
fn black(forward: f64, strike: f64, total_vol: f64, df: f64, side: Side) -> f64 {
    let d1 = ((forward / strike).ln() + 0.5 * total_vol * total_vol) / total_vol;
    let d2 = d1 - total_vol;
    match side {
        Side::Call => df * (forward * norm_cdf(d1) - strike * norm_cdf(d2)),
        Side::Put => df * (strike * norm_cdf(-d2) - forward * norm_cdf(-d1)),
    }
}

pub fn bs_price(p: &BsParams, strike: f64, side: Side) -> f64 {
    let df = (-p.rate * p.maturity).exp();
    black(p.forward(), strike, p.vol * p.maturity.sqrt(), df, side)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GkParams {
    pub spot: f64,
    pub rate_domestic: f64,
    pub rate_foreign: f64,
    pub vol: f64,
    pub maturity: f64,
}

impl GkParams {
    pub fn forward(&self) -> f64 {
        self.spot * ((self.rate_domestic - self.rate_foreign) * self.maturity).exp()
    }

    fn total_vol(&self) -> f64 {
        self.vol * self.maturity.sqrt()
    }

    fn d2(&self, strike: f64) -> f64 {
        let s = self.total_vol();
        ((self.forward() / strike).ln() - 0.5 * s * s) / s
    }
}

pub fn gk_price(p: &GkParams, strike: f64, side: Side) -> f64 {
    let df = (-p.rate_domestic * p.maturity).exp();
    black(p.forward(), strike, p.total_vol(), df, side)
}

/// Premium-included spot delta: `e^{-r_f T} (K/F) Φ(d2)` for calls and
/// `-e^{-r_f T} (K/F) Φ(-d2)` for puts.
pub fn premium_adjusted_delta(p: &GkParams, strike: f64, side: Side) -> f64 {
    let dff = (-p.rate_foreign * p.maturity).exp();
    let d2 = p.d2(strike);
    let m = strike / p.forward();
    match side {
        Side::Call => dff * m * norm_cdf(d2),
        Side::Put => -dff * m * norm_cdf(-d2),
    }
}

fn bisect(mut lo: f64, mut hi: f64, f: impl Fn(f64) -> f64) -> f64 {
    let flo = f(lo);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        let fm = f(mid);
        if (fm > 0.0) == (flo > 0.0) {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo <= 1e-15 * hi {
            break;
        }
    }
    0.5 * (lo + hi)
}

/// Strike at which the premium-adjusted call delta peaks.
pub fn call_delta_peak(p: &GkParams) -> f64 {
    let s = p.total_vol();
    let f = p.forward();
    let (lo, hi) = (f * (-5.0 * s).exp(), f * (5.0 * s).exp());
    // d/dK [K Φ(d2)] = Φ(d2) - φ(d2)/s, decreasing in K on the bracket
    let g = |k: f64| {
        let d2 = p.d2(k);
        norm_cdf(d2) - norm_pdf(d2) / s
    };
    if g(lo) <= 0.0 {
        return lo;
    }
    bisect(lo, hi, g)
}

/// Strike with the given premium-included spot delta (signed: negative for puts). Calls are
/// solved on the branch right of the delta peak. The search is bracketed on
/// `[F e^{-5σ√T}, F e^{5σ√T}]`.
pub fn delta_to_strike(p: &GkParams, delta: f64, side: Side) -> Result<f64> {
    if !(p.vol > 0.0 && p.maturity > 0.0 && p.spot > 0.0) {
        return domain("Garman-Kohlhagen needs positive spot, vol and maturity");
    }
    let s = p.total_vol();
    let f = p.forward();
    let hi = f * (5.0 * s).exp();
    let lo = match side {
        Side::Call => call_delta_peak(p),
        Side::Put => f * (-5.0 * s).exp(),
    };
    let d_lo = premium_adjusted_delta(p, lo, side);
    let d_hi = premium_adjusted_delta(p, hi, side);
    let (dmin, dmax) = (d_lo.min(d_hi), d_lo.max(d_hi));
    if !(delta > dmin && delta < dmax) {
        return domain(format!(
            "delta {delta} is not attainable for the {side:?} branch; attainable range ({dmin:.6}, {dmax:.6})"
        ));
    }
    let k = bisect(lo, hi, |k| premium_adjusted_delta(p, k, side) - delta);
    if (premium_adjusted_delta(p, k, side) - delta).abs() > 1e-10 {
        return Err(Error::Numerical(format!("delta root search stalled at strike {k}")));
    }
    Ok(k)
}

/// Delta-neutral straddle strike under the premium-adjusted convention, `F e^{-σ²T/2}`.
pub fn atm_dns_strike(p: &GkParams) -> f64 {
    p.forward() * (-0.5 * p.vol * p.vol * p.maturity).exp()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum TimeUnit {
    /// Rates, intensities and variances per year.
    #[default]
    Annual,
    /// Rates, intensities and variances per trading day (252 per year); `r` stays annual.
    Daily,
}

/// SVCJ risk-neutral parameters. Field names match the JSON calibration files.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[allow(non_snake_case)]
pub struct SvcjParams {
    pub kappa: f64,
    pub theta: f64,
    pub rho: f64,
    pub sigma_v: f64,
    pub mu_v: f64,
    pub mu_y: f64,
    pub rho_J: f64,
    pub sigma_y: f64,
    pub lambda: f64,
    pub r: f64,
}

pub const REFERENCE_JSON: &str = include_str!("../data/svcj_reference.json");

impl SvcjParams {
    /// Shipped default calibration.
    pub fn reference() -> Self {
        serde_json::from_str(REFERENCE_JSON).expect("bundled calibration parses")
    }

    pub fn validate(&self) -> Result<()> {
        let nonneg = [self.kappa, self.theta, self.sigma_v, self.mu_v, self.sigma_y, self.lambda];
        if nonneg.iter().any(|v| !(*v >= 0.0)) {
            return domain("kappa, theta, sigma_v, mu_v, sigma_y and lambda must be nonnegative");
        }
        if !(self.rho.abs() <= 1.0) {
            return domain("|rho| must not exceed one");
        }
        if self.rho_J * self.mu_v >= 1.0 {
            return domain("rho_J * mu_v must be below one for the jump compensator to exist");
        }
        Ok(())
    }

    /// Parameters in annual units.
    pub fn annualized(&self, unit: TimeUnit) -> Self {
        match unit {
            TimeUnit::Annual => *self,
            TimeUnit::Daily => {
                let d = 252.0;
                SvcjParams {
                    kappa: self.kappa * d,
                    theta: self.theta * d,
                    sigma_v: self.sigma_v * d,
                    mu_v: self.mu_v * d,
                    lambda: self.lambda * d,
                    rho_J: self.rho_J / d,
                    ..*self
                }
            }
        }
    }

    /// `E[e^{ξ^y}] - 1`.
    pub fn jump_compensator(&self) -> f64 {
        (self.mu_y + 0.5 * self.sigma_y * self.sigma_y).exp() / (1.0 - self.rho_J * self.mu_v) - 1.0
    }

    /// Long-run mean of V including jumps, `θ + λ μ_v / κ`.
    pub fn stationary_variance(&self) -> f64 {
        self.theta + self.lambda * self.mu_v / self.kappa
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TerminalSample {
    pub values: Vec<f64>,
    pub seed: u64,
    pub n_paths: usize,
    pub n_steps: usize,
}

/// Path `i` draws from stream `i` of a ChaCha generator keyed by `seed`.
pub fn path_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

fn poisson_small(rng: &mut ChaCha8Rng, mean: f64) -> u32 {
    // inverse transform; the per-step mean is small
    let u: f64 = rng.random();
    let mut k = 0u32;
    let mut p = (-mean).exp();
    let mut c = p;
    while u > c && k < 1000 {
        k += 1;
        p *= mean / k as f64;
        c += p;
    }
    k
}

/// Euler scheme on `(log S, V)` with full truncation of V.
pub fn svcj_simulate(
    params: &SvcjParams,
    s0: f64,
    v0: f64,
    maturity: f64,
    n_paths: usize,
    n_steps: usize,
    seed: u64,
) -> Result<TerminalSample> {
    params.validate()?;
    if n_paths == 0 || n_steps == 0 || !(v0 >= 0.0) || !(s0 > 0.0) || !(maturity > 0.0) {
        return domain("svcj_simulate needs n_paths, n_steps >= 1, v0 >= 0, s0 > 0, maturity > 0");
    }
    let p = *params;
    let dt = maturity / n_steps as f64;
    let sdt = dt.sqrt();
    let comp = p.jump_compensator();
    let rho_c = (1.0 - p.rho * p.rho).sqrt();
    let exp_v = if p.mu_v > 0.0 { Some(Exp::new(1.0 / p.mu_v).expect("rate")) } else { None };
    let values: Vec<f64> = (0..n_paths)
        .into_par_iter()
        .map(|i| {
            let mut rng = path_rng(seed, i as u64);
            let mut x = s0.ln();
            let mut v = v0;
            for _ in 0..n_steps {
                let vp = v.max(0.0);
                let z1: f64 = StandardNormal.sample(&mut rng);
                let z2: f64 = StandardNormal.sample(&mut rng);
                let sv = vp.sqrt() * sdt;
                x += (p.r - p.lambda * comp - 0.5 * vp) * dt + sv * z1;
                v += p.kappa * (p.theta - vp) * dt + p.sigma_v * sv * (p.rho * z1 + rho_c * z2);
                if p.lambda > 0.0 {
                    let nj = poisson_small(&mut rng, p.lambda * dt);
                    for _ in 0..nj {
                        let xv = exp_v.map_or(0.0, |e| e.sample(&mut rng));
                        let zy: f64 = StandardNormal.sample(&mut rng);
                        x += p.mu_y + p.rho_J * xv + p.sigma_y * zy;
                        v += xv;
                    }
                }
            }
            x.exp()
        })
        .collect();
    Ok(TerminalSample { values, seed, n_paths, n_steps })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct McPrice {
    pub price: f64,
    pub standard_error: f64,
}

/// Discounted sample mean of the option payoff.
pub fn mc_price(sample: &TerminalSample, rate: f64, maturity: f64, strike: f64, side: Side) -> Result<McPrice> {
    let n = sample.values.len();
    if n == 0 {
        return domain("empty sample");
    }
    let df = (-rate * maturity).exp();
    let pay = |s: f64| match side {
        Side::Call => (s - strike).max(0.0),
        Side::Put => (strike - s).max(0.0),
    };
    let (mut m, mut q) = (0.0, 0.0);
    for &s in &sample.values {
        let v = pay(s);
        m += v;
        q += v * v;
    }
    let nf = n as f64;
    m /= nf;
    let var = if n > 1 { (q / nf - m * m).max(0.0) * nf / (nf - 1.0) } else { 0.0 };
    Ok(McPrice { price: df * m, standard_error: df * (var / nf).sqrt() })
}

/// Sorted terminal sample with prefix sums, giving O(log N) option prices.
#[derive(Debug, Clone)]
pub struct SortedSample {
    sorted: Vec<f64>,
    prefix: Vec<f64>,
}

impl SortedSample {
    pub fn new(values: &[f64]) -> Self {
        let mut sorted = values.to_vec();
        sorted.sort_by(|a, b| a.total_cmp(b));
        let mut prefix = Vec::with_capacity(sorted.len() + 1);
        let mut acc = 0.0;
        prefix.push(0.0);
        for v in &sorted {
            acc += v;
            prefix.push(acc);
        }
        SortedSample { sorted, prefix }
    }

    pub fn len(&self) -> usize {
        self.sorted.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sorted.is_empty()
    }

    pub fn mean(&self) -> f64 {
        self.prefix[self.len()] / self.len() as f64
    }

    /// Undiscounted `E[(S - K)+]` or `E[(K - S)+]` under the empirical measure.
    pub fn expected_payoff(&self, strike: f64, side: Side) -> f64 {
        let n = self.len();
        let i = self.sorted.partition_point(|&s| s <= strike);
        let below = self.prefix[i];
        let above = self.prefix[n] - below;
        let nf = n as f64;
        match side {
            Side::Call => (above - strike * (n - i) as f64) / nf,
            Side::Put => (strike * i as f64 - below) / nf,
        }
    }

    /// Empirical quantile (lower order statistic).
    pub fn quantile(&self, p: f64) -> f64 {
        let n = self.len();
        let i = ((p * n as f64).floor() as usize).min(n - 1);
        self.sorted[i]
    }

    pub fn values(&self) -> &[f64] {
        &self.sorted
    }
}

/// Quotes for a strike menu under Black-Scholes.
pub fn bs_quotes(p: &BsParams, strikes: &StrikeSet) -> MarketQuotes {
    let puts: Vec<f64> = strikes.put_strikes.iter().map(|&k| bs_price(p, k, Side::Put)).collect();
    let calls: Vec<f64> = strikes.call_strikes.iter().map(|&k| bs_price(p, k, Side::Call)).collect();
    MarketQuotes::single(
        p.gross_rate(),
        p.forward(),
        PriceCurve::new(&strikes.put_strikes, &puts),
        PriceCurve::new(&strikes.call_strikes, &calls),
    )
}

/// Quotes from an empirical terminal distribution. The forward is the sample mean, so put-call
/// parity holds exactly within the quote set.
pub fn sample_quotes(sample: &SortedSample, gross_rate: f64, strikes: &StrikeSet) -> MarketQuotes {
    let df = 1.0 / gross_rate;
    let puts: Vec<f64> = strikes.put_strikes.iter().map(|&k| df * sample.expected_payoff(k, Side::Put)).collect();
    let calls: Vec<f64> = strikes.call_strikes.iter().map(|&k| df * sample.expected_payoff(k, Side::Call)).collect();
    MarketQuotes::single(
        gross_rate,
        sample.mean(),
        PriceCurve::new(&strikes.put_strikes, &puts),
        PriceCurve::new(&strikes.call_strikes, &calls),
    )
}

pub enum MomentModel<'a> {
    Bs(BsParams),
    Sample(&'a TerminalSample),
}

pub enum MomentFn<'a> {
    Square,
    Log,
    Custom(&'a (dyn Fn(f64) -> f64 + Sync)),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrueMoment {
    pub value: f64,
    /// Monte Carlo standard error; zero for closed forms.
    pub standard_error: f64,
}

/// `E^Q[g(S_T)]` by closed form (Black-Scholes square and log) or sample mean.
pub fn true_moment(model: &MomentModel, g: &MomentFn) -> Result<TrueMoment> {
    match (model, g) {
        (MomentModel::Bs(p), MomentFn::Square) => Ok(TrueMoment {
            value: p.forward().powi(2) * (p.vol * p.vol * p.maturity).exp(),
            standard_error: 0.0,
        }),
        (MomentModel::Bs(p), MomentFn::Log) => Ok(TrueMoment {
            value: p.spot.ln() + (p.rate - 0.5 * p.vol * p.vol) * p.maturity,
            standard_error: 0.0,
        }),
        (MomentModel::Bs(_), MomentFn::Custom(_)) => {
            domain("custom payoffs under Black-Scholes need a sample or quadrature")
        }
        (MomentModel::Sample(s), g) => {
            let f = |x: f64| match g {
                MomentFn::Square => x * x,
                MomentFn::Log => x.ln(),
                MomentFn::Custom(h) => h(x),
            };
            let n = s.values.len();
            if n == 0 {
                return domain("empty sample");
            }
            let nf = n as f64;
            let m = s.values.iter().map(|&x| f(x)).sum::<f64>() / nf;
            let v = s.values.iter().map(|&x| (f(x) - m).powi(2)).sum::<f64>() / (nf - 1.0).max(1.0);
            Ok(TrueMoment { value: m, standard_error: (v / nf).sqrt() })
        }
    }
}
