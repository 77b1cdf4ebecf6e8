//! Dependence between two dollar exchange rates from options on both rates and on their cross.
//!
//! Asset 0 is EUR/USD (`S₁`), asset 1 is GBP/USD (`S₂`); the cross `S₃ = S₁/S₂` is EUR/GBP.
//! A GBP call on the cross pays `S₂(S₁/S₂ - K)+` dollars, so under the dollar measure its
//! expectation is `R_f S₂,t C^£(K)`.

use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use crate::error::{domain, validation, Result};
use crate::grid_basis::{eval_design, eval_design_tensor, BasisSet, Payoff, StateGrid};
use crate::models::{norm_cdf, norm_inv, norm_pdf};
use crate::projector::{expectation_vector, fit_ols_many, CrossQuotes, MarketQuotes, PriceCurve};
use crate::quad::GaussLegendre;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FxMarket {
    /// EUR/USD.
    pub spot1: f64,
    /// GBP/USD.
    pub spot2: f64,
    /// Gross rates to maturity.
    pub gross_usd: f64,
    pub gross_gbp: f64,
    pub gross_eur: f64,
    /// USD prices of calls on EUR/USD.
    pub calls1: PriceCurve,
    /// USD prices of calls on GBP/USD.
    pub calls2: PriceCurve,
    /// GBP prices of calls on EUR/GBP.
    pub cross_calls: PriceCurve,
}

impl FxMarket {
    pub fn validate(&self) -> Result<()> {
        let pos = [self.spot1, self.spot2, self.gross_usd, self.gross_gbp, self.gross_eur];
        if pos.iter().any(|v| !(*v > 0.0)) {
            return domain("spots and gross rates must be positive");
        }
        let f3 = self.spot1 / self.spot2 * self.gross_gbp / self.gross_eur;
        if ((self.forward1() / self.forward2()) - f3).abs() > 1e-10 * f3 {
            return domain("forwards violate triangular parity");
        }
        Ok(())
    }

    /// Covered interest parity.
    pub fn forward1(&self) -> f64 {
        self.spot1 * self.gross_usd / self.gross_eur
    }

    pub fn forward2(&self) -> f64 {
        self.spot2 * self.gross_usd / self.gross_gbp
    }

    pub fn forward_cross(&self) -> f64 {
        self.forward1() / self.forward2()
    }

    pub fn quotes(&self) -> MarketQuotes {
        MarketQuotes {
            gross_rate: self.gross_usd,
            forwards: vec![self.forward1(), self.forward2()],
            puts: vec![PriceCurve::default(), PriceCurve::default()],
            calls: vec![self.calls1.clone(), self.calls2.clone()],
            cross: Some(CrossQuotes { gross_rate_den: self.gross_gbp, spot_den: self.spot2, calls: self.cross_calls.clone() }),
        }
    }
}

/// `[Bond, S₁, calls on S₁, S₂, calls on S₂, cross calls]`.
pub fn build_fx_basis(strikes1: &[f64], strikes2: &[f64], strikes_cross: &[f64]) -> Result<BasisSet> {
    if strikes1.is_empty() || strikes2.is_empty() {
        return validation("each leg needs at least one strike");
    }
    let mut el = vec![Payoff::Bond, Payoff::Underlying { asset: 0 }];
    el.extend(strikes1.iter().map(|&k| Payoff::Call { asset: 0, strike: k }));
    el.push(Payoff::Underlying { asset: 1 });
    el.extend(strikes2.iter().map(|&k| Payoff::Call { asset: 1, strike: k }));
    el.extend(strikes_cross.iter().map(|&k| Payoff::CrossCall { num: 0, den: 1, strike: k }));
    BasisSet::new(el)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FxExpectations {
    pub values: Vec<f64>,
    /// Cross-call entries priced with `R_f^£` in place of `R_f`, for comparison only.
    pub cross_gbp_rate_variant: Vec<f64>,
}

/// Dollar-measure expectations of every basis element.
pub fn price_fx_basis_expectations(market: &FxMarket, basis: &BasisSet) -> Result<FxExpectations> {
    let v = expectation_vector(basis, &market.quotes())?;
    let alt = basis
        .elements()
        .iter()
        .zip(v.iter())
        .filter(|(e, _)| matches!(e, Payoff::CrossCall { .. }))
        .map(|(_, x)| x * market.gross_gbp / market.gross_usd)
        .collect();
    Ok(FxExpectations { values: v.iter().copied().collect(), cross_gbp_rate_variant: alt })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JointGrid {
    pub g1: StateGrid,
    pub g2: StateGrid,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TailEstimate {
    /// Clipped to [0, 1].
    pub probability: f64,
    pub raw: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FxAnalysis {
    pub cov: f64,
    pub var1: f64,
    pub var2: f64,
    /// Unclipped.
    pub corr: f64,
    pub corr_clipped: f64,
    pub tail: Option<TailEstimate>,
    pub cross_gbp_rate_variant: Vec<f64>,
}

fn leg_basis(basis: &BasisSet, asset: usize) -> Result<BasisSet> {
    let mut el = vec![Payoff::Bond, Payoff::Underlying { asset: 0 }];
    el.extend(basis.elements().iter().filter_map(|e| match *e {
        Payoff::Call { asset: a, strike } if a == asset => Some(Payoff::Call { asset: 0, strike }),
        _ => None,
    }));
    BasisSet::new(el)
}

fn leg_quotes(market: &FxMarket, asset: usize) -> MarketQuotes {
    let q = market.quotes();
    MarketQuotes::single(q.gross_rate, q.forwards[asset], PriceCurve::default(), q.calls[asset].clone())
}

/// `E[(S_i - F_i)²]` by univariate projection on the leg's own calls.
fn leg_variance(market: &FxMarket, basis: &BasisSet, grid: &StateGrid, asset: usize) -> Result<f64> {
    let b = leg_basis(basis, asset)?;
    let q = leg_quotes(market, asset);
    let f = q.forwards[0];
    let design = eval_design(&b, grid)?;
    let y: Vec<f64> = grid.points().iter().map(|s| (s - f).powi(2)).collect();
    let p = fit_ols_many(&design, &[&y])?.remove(0);
    let e = expectation_vector(&b, &q)?;
    Ok(p.coefficients.iter().zip(e.iter()).map(|(c, v)| c * v).sum())
}

/// Covariance, correlation and optionally the joint left-tail probability, sharing one
/// factorization of the tensor design.
pub fn fx_analyze(market: &FxMarket, basis: &BasisSet, grids: &JointGrid, tail: Option<(f64, f64)>) -> Result<FxAnalysis> {
    market.validate()?;
    if let Some((q1, q2)) = tail {
        let inside = |q: f64, g: &StateGrid| q >= g.a_min() && q <= g.a_max();
        if !inside(q1, &grids.g1) || !inside(q2, &grids.g2) {
            return domain(format!("tail thresholds ({q1}, {q2}) outside the grid bounds"));
        }
    }
    let pricing = price_fx_basis_expectations(market, basis)?;
    let e = DVector::from_vec(pricing.values.clone());
    let design = eval_design_tensor(basis, &[grids.g1.clone(), grids.g2.clone()])?;
    let (f1, f2) = (market.forward1(), market.forward2());
    let mut ycov = Vec::with_capacity(design.nrows());
    let mut yind = Vec::with_capacity(design.nrows());
    let (q1, q2) = tail.unwrap_or((f64::NAN, f64::NAN));
    for &s1 in grids.g1.points() {
        for &s2 in grids.g2.points() {
            ycov.push((s1 - f1) * (s2 - f2));
            yind.push(if s1 <= q1 && s2 <= q2 { 1.0 } else { 0.0 });
        }
    }
    let targets: Vec<&[f64]> = if tail.is_some() { vec![&ycov, &yind] } else { vec![&ycov] };
    let fits = fit_ols_many(&design, &targets)?;
    let priced: Vec<f64> = fits.iter().map(|p| p.coefficients.iter().zip(e.iter()).map(|(c, v)| c * v).sum()).collect();
    let var1 = leg_variance(market, basis, &grids.g1, 0)?;
    let var2 = leg_variance(market, basis, &grids.g2, 1)?;
    let cov = priced[0];
    let corr = cov / (var1 * var2).sqrt();
    let tail = tail.map(|_| TailEstimate { probability: priced[1].clamp(0.0, 1.0), raw: priced[1] });
    Ok(FxAnalysis {
        cov,
        var1,
        var2,
        corr,
        corr_clipped: corr.clamp(-1.0, 1.0),
        tail,
        cross_gbp_rate_variant: pricing.cross_gbp_rate_variant,
    })
}

pub fn fx_covariance(market: &FxMarket, basis: &BasisSet, grids: &JointGrid) -> Result<FxAnalysis> {
    fx_analyze(market, basis, grids, None)
}

pub fn joint_tail_probability(market: &FxMarket, basis: &BasisSet, grids: &JointGrid, q1: f64, q2: f64) -> Result<TailEstimate> {
    Ok(fx_analyze(market, basis, grids, Some((q1, q2)))?.tail.expect("tail requested"))
}

/// Simulated dollar-measure law of `(S₁, S₂)`: `S₁ = F₁(1 + σ₁z₁)` and
/// `S₂ ∝ F₂(1 + σ₂(ρz₁ + √(1-ρ²)z₂)) + a S₁³`, rescaled to mean `F₂`.
/// `a = 0` gives the bivariate normal design, `a = 0.1` the nonlinear one.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FxJointModel {
    pub forward1: f64,
    pub forward2: f64,
    pub sigma1: f64,
    pub sigma2: f64,
    pub rho: f64,
    pub cubic: f64,
}

const Z_MAX: f64 = 9.0;
const PANELS: usize = 200;

impl FxJointModel {
    pub fn normal(rho: f64) -> Self {
        FxJointModel { forward1: 1.0, forward2: 1.0, sigma1: 0.1, sigma2: 0.05, rho, cubic: 0.0 }
    }

    pub fn nonlinear(rho: f64) -> Self {
        FxJointModel { cubic: 0.1, ..FxJointModel::normal(rho) }
    }

    fn s1(&self, z1: f64) -> f64 {
        self.forward1 * (1.0 + self.sigma1 * z1)
    }

    fn norm_const(&self) -> f64 {
        // E[S₁³] for a normal S₁
        let (m, s) = (self.forward1, self.forward1 * self.sigma1);
        1.0 + self.cubic * (m.powi(3) + 3.0 * m * s * s) / self.forward2
    }

    /// Conditional mean and standard deviation of `S₂` given `z₁`.
    fn s2_given(&self, z1: f64) -> (f64, f64) {
        let c = self.norm_const();
        let mean = (self.forward2 * (1.0 + self.sigma2 * self.rho * z1) + self.cubic * self.s1(z1).powi(3)) / c;
        let sd = self.forward2 * self.sigma2 * (1.0 - self.rho * self.rho).max(0.0).sqrt() / c;
        (mean, sd)
    }

    /// `∫ h(z₁) φ(z₁) dz₁` over `[lo, hi] ∩ [-9, 9]`.
    fn outer(&self, lo: f64, hi: f64, h: impl Fn(f64) -> f64) -> f64 {
        let (lo, hi) = (lo.max(-Z_MAX), hi.min(Z_MAX));
        if hi <= lo {
            return 0.0;
        }
        let gl = gl10();
        let w = (hi - lo) / PANELS as f64;
        (0..PANELS)
            .map(|p| {
                let a = lo + p as f64 * w;
                gl.integrate(a, a + w, |z| h(z) * norm_pdf(z))
            })
            .sum()
    }

    fn z1_of(&self, s1: f64) -> f64 {
        (s1 / self.forward1 - 1.0) / self.sigma1
    }

    /// `E[(S₁ - K)+]`.
    pub fn call1(&self, k: f64) -> f64 {
        let s = self.forward1 * self.sigma1;
        normal_call(self.forward1, s, k)
    }

    /// `E[(S₂ - K)+]`.
    pub fn call2(&self, k: f64) -> f64 {
        self.outer(-Z_MAX, Z_MAX, |z| {
            let (m, s) = self.s2_given(z);
            normal_call(m, s, k)
        })
    }

    /// `E[S₂ (S₁/S₂ - K)+] = E[(S₁ - K S₂)+]`.
    pub fn cross_payoff(&self, k: f64) -> f64 {
        self.outer(-Z_MAX, Z_MAX, |z| {
            let (m, s) = self.s2_given(z);
            normal_call(self.s1(z), k * s, k * m)
        })
    }

    pub fn cdf1(&self, x: f64) -> f64 {
        norm_cdf(self.z1_of(x))
    }

    pub fn cdf2(&self, x: f64) -> f64 {
        self.outer(-Z_MAX, Z_MAX, |z| {
            let (m, s) = self.s2_given(z);
            normal_cdf_ms(x, m, s)
        })
    }

    /// `P(S₁/S₂ <= x)`, treating `S₂ > 0` as sure.
    pub fn cdf_cross(&self, x: f64) -> f64 {
        self.outer(-Z_MAX, Z_MAX, |z| {
            // S₁ - x S₂ <= 0  <=>  S₂ >= S₁/x
            let (m, s) = self.s2_given(z);
            1.0 - normal_cdf_ms(self.s1(z) / x, m, s)
        })
    }

    pub fn quantile1(&self, p: f64) -> f64 {
        self.forward1 * (1.0 + self.sigma1 * norm_inv(p))
    }

    pub fn quantile2(&self, p: f64) -> f64 {
        let c = self.forward2 * self.sigma2 * 12.0;
        invert(|x| self.cdf2(x), p, self.forward2 - c, self.forward2 + c + 2.0 * self.cubic * self.forward1.powi(3))
    }

    pub fn quantile_cross(&self, p: f64) -> f64 {
        let f = self.forward1 / self.forward2;
        invert(|x| self.cdf_cross(x), p, f * 0.2, f * 5.0)
    }

    /// `P(S₁ <= q₁, S₂ <= q₂)`.
    pub fn tail(&self, q1: f64, q2: f64) -> f64 {
        self.outer(-Z_MAX, self.z1_of(q1), |z| {
            let (m, s) = self.s2_given(z);
            normal_cdf_ms(q2, m, s)
        })
    }

    pub fn correlation(&self) -> f64 {
        let e = |f: &dyn Fn(f64, f64, f64) -> f64| self.outer(-Z_MAX, Z_MAX, |z| {
            let (m, s) = self.s2_given(z);
            f(self.s1(z), m, s)
        });
        let m1 = e(&|a, _, _| a);
        let m2 = e(&|_, m, _| m);
        let v1 = e(&|a, _, _| a * a) - m1 * m1;
        let v2 = e(&|_, m, s| m * m + s * s) - m2 * m2;
        let c = e(&|a, m, _| a * m) - m1 * m2;
        c / (v1 * v2).sqrt()
    }

    /// `E[h(S₁, S₂)]` by tensor Gauss-Legendre in `(z₁, z₂)`, splitting the inner integral at
    /// `z₂ = kink(z₁)` when given.
    pub fn expect_2d(&self, h: &dyn Fn(f64, f64) -> f64, kink: Option<&dyn Fn(f64) -> f64>) -> f64 {
        let c = self.norm_const();
        let s2 = |z1: f64, z2: f64| {
            let raw = self.forward2 * (1.0 + self.sigma2 * (self.rho * z1 + (1.0 - self.rho * self.rho).max(0.0).sqrt() * z2));
            (raw + self.cubic * self.s1(z1).powi(3)) / c
        };
        let gl = gl10();
        let inner = |z1: f64| {
            let mut cuts = vec![-Z_MAX, Z_MAX];
            if let Some(k) = kink {
                let zk = k(z1);
                if zk > -Z_MAX && zk < Z_MAX {
                    cuts.insert(1, zk);
                }
            }
            let mut acc = 0.0;
            for w in cuts.windows(2) {
                let panels = 100;
                let width = (w[1] - w[0]) / panels as f64;
                for p in 0..panels {
                    let a = w[0] + p as f64 * width;
                    acc += gl.integrate(a, a + width, |z2| h(self.s1(z1), s2(z1, z2)) * norm_pdf(z2));
                }
            }
            acc
        };
        self.outer(-Z_MAX, Z_MAX, inner)
    }

    /// The `z₂` at which `S₁ = K S₂` for given `z₁`.
    pub fn cross_kink(&self, k: f64, z1: f64) -> f64 {
        let c = self.norm_const();
        let r = (1.0 - self.rho * self.rho).max(0.0).sqrt();
        let target = (self.s1(z1) * c / k - self.cubic * self.s1(z1).powi(3)) / self.forward2 - 1.0;
        (target / self.sigma2 - self.rho * z1) / r
    }
}

fn gl10() -> &'static GaussLegendre {
    use std::sync::OnceLock;
    static GL: OnceLock<GaussLegendre> = OnceLock::new();
    GL.get_or_init(|| GaussLegendre::new(10))
}

/// `E[(X - K)+]` for `X ~ N(m, s²)`.
fn normal_call(m: f64, s: f64, k: f64) -> f64 {
    if s <= 1e-300 {
        return (m - k).max(0.0);
    }
    let d = (m - k) / s;
    (m - k) * norm_cdf(d) + s * norm_pdf(d)
}

fn normal_cdf_ms(x: f64, m: f64, s: f64) -> f64 {
    if s <= 1e-300 {
        return if m <= x { 1.0 } else { 0.0 };
    }
    norm_cdf((x - m) / s)
}

fn invert(f: impl Fn(f64) -> f64, p: f64, mut lo: f64, mut hi: f64) -> f64 {
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if f(mid) < p {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo < 1e-13 * hi.abs().max(1.0) {
            break;
        }
    }
    0.5 * (lo + hi)
}

fn linspace(a: f64, b: f64, n: usize) -> Vec<f64> {
    (0..n).map(|i| if i + 1 == n { b } else { a + (b - a) * i as f64 / (n - 1) as f64 }).collect()
}

/// Strikes, grids and quotes for one simulated market.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FxSimMarket {
    pub market: FxMarket,
    pub basis: BasisSet,
    pub grids: JointGrid,
    pub strikes1: Vec<f64>,
    pub strikes2: Vec<f64>,
    pub strikes_cross: Vec<f64>,
}

impl FxSimMarket {
    /// Stretches each leg's grid so that it contains the given point, keeping the point count.
    pub fn cover(&mut self, q1: f64, q2: f64) -> Result<()> {
        let stretch = |g: &StateGrid, q: f64| -> Result<StateGrid> {
            if q >= g.a_min() && q <= g.a_max() {
                return Ok(g.clone());
            }
            StateGrid::uniform(g.a_min().min(q), g.a_max().max(q), g.len())
        };
        self.grids = JointGrid { g1: stretch(&self.grids.g1, q1)?, g2: stretch(&self.grids.g2, q2)? };
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FxDesign {
    pub n_strikes: usize,
    /// Strikes on the `[p, 1-p]` quantiles of each marginal.
    pub strike_tail: f64,
    /// Grid on the `[p, 1-p]` quantiles.
    pub grid_tail: f64,
    pub n_grid: usize,
}

impl Default for FxDesign {
    fn default() -> Self {
        FxDesign { n_strikes: 5, strike_tail: 0.05, grid_tail: 0.02, n_grid: 201 }
    }
}

/// Builds the quoted market with unit gross rates (spots equal forwards).
pub fn simulate_fx_market(model: &FxJointModel, design: &FxDesign) -> Result<FxSimMarket> {
    let (ps, pg) = (design.strike_tail, design.grid_tail);
    let n = design.n_strikes;
    let strikes1 = linspace(model.quantile1(ps), model.quantile1(1.0 - ps), n);
    let strikes2 = linspace(model.quantile2(ps), model.quantile2(1.0 - ps), n);
    let strikes_cross = linspace(model.quantile_cross(ps), model.quantile_cross(1.0 - ps), n);
    let g1 = StateGrid::uniform(model.quantile1(pg), model.quantile1(1.0 - pg), design.n_grid)?;
    let g2 = StateGrid::uniform(model.quantile2(pg), model.quantile2(1.0 - pg), design.n_grid)?;
    let c1: Vec<f64> = strikes1.iter().map(|&k| model.call1(k)).collect();
    let c2: Vec<f64> = strikes2.iter().map(|&k| model.call2(k)).collect();
    // GBP price with S₂,t = F₂ and unit rates
    let c3: Vec<f64> = strikes_cross.iter().map(|&k| model.cross_payoff(k) / model.forward2).collect();
    let market = FxMarket {
        spot1: model.forward1,
        spot2: model.forward2,
        gross_usd: 1.0,
        gross_gbp: 1.0,
        gross_eur: 1.0,
        calls1: PriceCurve::new(&strikes1, &c1),
        calls2: PriceCurve::new(&strikes2, &c2),
        cross_calls: PriceCurve::new(&strikes_cross, &c3),
    };
    let basis = build_fx_basis(&strikes1, &strikes2, &strikes_cross)?;
    Ok(FxSimMarket { market, basis, grids: JointGrid { g1, g2 }, strikes1, strikes2, strikes_cross })
}
