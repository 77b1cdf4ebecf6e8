//! Least-squares replicating portfolios and their prices.
//!
//! A target payoff sampled on a state grid is projected onto the span of the traded basis,
//! and the fitted portfolio is priced with observed quotes.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{domain, validation, Error, Result};
use crate::grid_basis::{
    eval_design, gram_analytic, inner_with, singular_element, BasisSet, DesignMatrix, Payoff, StateGrid,
    StrikeSet,
};
use crate::quad::GaussLegendre;

/// Relative pivot size below which a column is treated as linearly dependent.
const RANK_TOL: f64 = 1e-12;
/// Tolerance on the KKT conditions of the constrained fit.
pub const KKT_TOL: f64 = 1e-8;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum FitMethod {
    Ols,
    /// Weighted least squares with one nonnegative weight per grid state.
    Wls(Vec<f64>),
    /// `payoff_nonneg` imposes `Xβ >= 0` on the grid, `weight_floor = Some(c)` imposes `β >= -c`.
    Constrained { payoff_nonneg: bool, weight_floor: Option<f64> },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitDiagnostics {
    pub l2_residual: f64,
    pub sup_residual: f64,
    /// Condition estimate of the normal equations.
    pub condition: f64,
    /// Largest KKT violation for constrained fits, zero otherwise.
    pub kkt_residual: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReplicatingPortfolio {
    pub coefficients: Vec<f64>,
    pub basis: BasisSet,
    pub diagnostics: FitDiagnostics,
}

impl ReplicatingPortfolio {
    /// Portfolio payoff at a univariate price.
    pub fn payoff1(&self, x: f64) -> f64 {
        self.basis.elements().iter().zip(&self.coefficients).map(|(e, b)| b * e.eval1(x)).sum()
    }

    /// Portfolio payoff at a state vector.
    pub fn payoff(&self, s: &[f64]) -> f64 {
        self.basis.elements().iter().zip(&self.coefficients).map(|(e, b)| b * e.eval(s)).sum()
    }
}

/// Option prices on one asset keyed by strike, stored as `[strike, price]` pairs.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct PriceCurve {
    pub quotes: Vec<[f64; 2]>,
}

impl PriceCurve {
    pub fn new(strikes: &[f64], prices: &[f64]) -> Self {
        let mut quotes: Vec<[f64; 2]> = strikes.iter().zip(prices).map(|(&k, &p)| [k, p]).collect();
        quotes.sort_by(|a, b| a[0].total_cmp(&b[0]));
        PriceCurve { quotes }
    }

    pub fn get(&self, strike: f64) -> Option<f64> {
        let tol = 1e-12 * strike.abs().max(1.0);
        let i = self.quotes.partition_point(|q| q[0] < strike - tol);
        self.quotes.get(i).filter(|q| (q[0] - strike).abs() <= tol).map(|q| q[1])
    }

    pub fn strikes(&self) -> Vec<f64> {
        self.quotes.iter().map(|q| q[0]).collect()
    }
}

/// Calls on a cross rate quoted in the denominator currency.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CrossQuotes {
    /// Gross risk-free rate of the denominator currency.
    pub gross_rate_den: f64,
    /// Spot of the denominator currency in pricing-currency units.
    pub spot_den: f64,
    pub calls: PriceCurve,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MarketQuotes {
    pub gross_rate: f64,
    pub forwards: Vec<f64>,
    pub puts: Vec<PriceCurve>,
    pub calls: Vec<PriceCurve>,
    #[serde(default)]
    pub cross: Option<CrossQuotes>,
}

impl MarketQuotes {
    pub fn single(gross_rate: f64, forward: f64, puts: PriceCurve, calls: PriceCurve) -> Self {
        MarketQuotes { gross_rate, forwards: vec![forward], puts: vec![puts], calls: vec![calls], cross: None }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.gross_rate > 0.0) {
            return domain("gross rate must be positive");
        }
        if self.forwards.iter().any(|f| !(*f > 0.0)) {
            return domain("forwards must be positive");
        }
        let negative = self
            .puts
            .iter()
            .chain(&self.calls)
            .chain(self.cross.iter().map(|c| &c.calls))
            .flat_map(|c| c.quotes.iter())
            .find(|q| !(q[1] >= 0.0) || !(q[0] > 0.0));
        if let Some(q) = negative {
            return validation(format!("invalid quote at strike {}: price {}", q[0], q[1]));
        }
        Ok(())
    }
}

/// Risk-neutral expectation of every basis element implied by the quotes.
pub fn expectation_vector(basis: &BasisSet, quotes: &MarketQuotes) -> Result<DVector<f64>> {
    let rf = quotes.gross_rate;
    let mut missing = Vec::new();
    let mut v = DVector::zeros(basis.len());
    let fwd = |a: usize| quotes.forwards.get(a).copied();
    for (j, e) in basis.elements().iter().enumerate() {
        let val = match *e {
            Payoff::Bond => Some(1.0),
            Payoff::Underlying { asset } => fwd(asset),
            Payoff::Put { asset, strike } => quotes.puts.get(asset).and_then(|c| c.get(strike)).map(|p| rf * p),
            Payoff::Call { asset, strike } => quotes.calls.get(asset).and_then(|c| c.get(strike)).map(|p| rf * p),
            Payoff::CrossCall { strike, .. } => quotes
                .cross
                .as_ref()
                .and_then(|c| c.calls.get(strike).map(|p| rf * c.spot_den * p)),
        };
        match val {
            Some(x) => v[j] = x,
            None => missing.push(e.to_string()),
        }
    }
    if !missing.is_empty() {
        return validation(format!("missing quotes for: {}", missing.join(", ")));
    }
    Ok(v)
}

/// Fits a replicating portfolio for `target` sampled on the rows of `design`.
pub fn fit(design: &DesignMatrix, target: &[f64], method: &FitMethod) -> Result<ReplicatingPortfolio> {
    let x = &design.values;
    let (n, m) = x.shape();
    if target.len() != n {
        return validation(format!("target has {} values for {} grid states", target.len(), n));
    }
    if target.iter().any(|v| !v.is_finite()) {
        return domain("target payoff is not finite on the grid");
    }
    if n < m {
        return Err(Error::Singular(format!("{n} grid states cannot identify {m} coefficients")));
    }
    let y = DVector::from_column_slice(target);
    let (beta, condition, kkt) = match method {
        FitMethod::Ols => {
            let (b, c) = qr_solve(x, &y, &design.basis)?;
            (b, c, 0.0)
        }
        FitMethod::Wls(w) => {
            if w.len() != n {
                return validation(format!("{} weights for {} grid states", w.len(), n));
            }
            if w.iter().any(|v| !(*v >= 0.0)) || w.iter().all(|v| *v == 0.0) {
                return validation("WLS weights must be nonnegative and not all zero");
            }
            let sw: Vec<f64> = w.iter().map(|v| v.sqrt()).collect();
            let xw = DMatrix::from_fn(n, m, |i, j| x[(i, j)] * sw[i]);
            let yw = DVector::from_fn(n, |i, _| y[i] * sw[i]);
            let (b, c) = qr_solve(&xw, &yw, &design.basis)?;
            (b, c, 0.0)
        }
        FitMethod::Constrained { payoff_nonneg, weight_floor } => {
            if let Some(c) = weight_floor {
                if !(*c > 0.0) {
                    return domain("weight floor c must be positive");
                }
            }
            constrained_fit(x, &y, &design.basis, *payoff_nonneg, *weight_floor)?
        }
    };
    let fitted = x * &beta;
    let r = &y - fitted;
    Ok(ReplicatingPortfolio {
        coefficients: beta.iter().copied().collect(),
        basis: design.basis.clone(),
        diagnostics: FitDiagnostics {
            l2_residual: r.norm(),
            sup_residual: r.amax(),
            condition,
            kkt_residual: kkt,
        },
    })
}

/// OLS fits of several targets against one design, sharing a single QR factorization.
pub fn fit_ols_many(design: &DesignMatrix, targets: &[&[f64]]) -> Result<Vec<ReplicatingPortfolio>> {
    let x = &design.values;
    let (n, m) = x.shape();
    if n < m {
        return Err(Error::Singular(format!("{n} grid states cannot identify {m} coefficients")));
    }
    if let Some(t) = targets.iter().find(|t| t.len() != n) {
        return validation(format!("target has {} values for {} grid states", t.len(), n));
    }
    if targets.iter().any(|t| t.iter().any(|v| !v.is_finite())) {
        return domain("target payoff is not finite on the grid");
    }
    let qr = x.clone().qr();
    let r = qr.r();
    let diag: Vec<f64> = (0..m).map(|i| r[(i, i)].abs()).collect();
    let scale = diag.iter().cloned().fold(0.0, f64::max).max(x.amax());
    if let Some(i) = diag.iter().position(|d| *d <= RANK_TOL * scale) {
        return Err(singular_element(&design.basis, i));
    }
    let sv = r.singular_values();
    let condition = (sv.max() / sv.min()).powi(2);
    let mut qty = DMatrix::from_fn(n, targets.len(), |i, j| targets[j][i]);
    qr.q_tr_mul(&mut qty);
    let top = qty.rows(0, m).into_owned();
    let beta = r
        .solve_upper_triangular(&top)
        .ok_or_else(|| Error::Singular("triangular factor is singular".into()))?;
    Ok(targets
        .iter()
        .enumerate()
        .map(|(j, t)| {
            let b = beta.column(j).into_owned();
            let res = DVector::from_column_slice(t) - x * &b;
            ReplicatingPortfolio {
                coefficients: b.iter().copied().collect(),
                basis: design.basis.clone(),
                diagnostics: FitDiagnostics { l2_residual: res.norm(), sup_residual: res.amax(), condition, kkt_residual: 0.0 },
            }
        })
        .collect())
}

struct Triangular {
    r: DMatrix<f64>,
    qty: DVector<f64>,
    condition: f64,
}

fn qr_factor(x: &DMatrix<f64>, y: &DVector<f64>, basis: &BasisSet) -> Result<Triangular> {
    let m = x.ncols();
    let qr = x.clone().qr();
    let mut qty = y.clone();
    qr.q_tr_mul(&mut qty);
    let r = qr.r();
    let diag: Vec<f64> = (0..m).map(|i| r[(i, i)].abs()).collect();
    let scale = diag.iter().cloned().fold(0.0, f64::max).max(x.amax());
    if let Some(i) = diag.iter().position(|d| *d <= RANK_TOL * scale) {
        return Err(singular_element(basis, i));
    }
    let sv = r.singular_values();
    let condition = (sv.max() / sv.min()).powi(2);
    Ok(Triangular { r, qty: qty.rows(0, m).into_owned(), condition })
}

fn qr_solve(x: &DMatrix<f64>, y: &DVector<f64>, basis: &BasisSet) -> Result<(DVector<f64>, f64)> {
    let t = qr_factor(x, y, basis)?;
    let beta = t
        .r
        .solve_upper_triangular(&t.qty)
        .ok_or_else(|| Error::Singular("triangular factor is singular".into()))?;
    Ok((beta, t.condition))
}

/// Solves `min ||y - Xβ||²` subject to `Xβ >= 0` and/or `β >= -c`.
///
/// In the rotated coordinates `z = Rβ` the problem is the Euclidean projection of `Qᵀy` onto
/// a polyhedron, a least-distance program. Its dual is a nonnegative least-squares problem,
/// solved with the Lawson-Hanson active-set method.
fn constrained_fit(
    x: &DMatrix<f64>,
    y: &DVector<f64>,
    basis: &BasisSet,
    payoff_nonneg: bool,
    floor: Option<f64>,
) -> Result<(DVector<f64>, f64, f64)> {
    let (n, m) = x.shape();
    let t = qr_factor(x, y, basis)?;
    let rinv = t
        .r
        .clone()
        .try_inverse()
        .ok_or_else(|| Error::Singular("triangular factor is singular".into()))?;
    // constraint rows a_i with a_i z >= b_i
    let mut a_rows: Vec<DVector<f64>> = Vec::new();
    let mut b: Vec<f64> = Vec::new();
    if payoff_nonneg {
        let xr = x * &rinv;
        for i in 0..n {
            a_rows.push(xr.row(i).transpose());
            b.push(0.0);
        }
    }
    if let Some(c) = floor {
        for j in 0..m {
            a_rows.push(rinv.row(j).transpose());
            b.push(-c);
        }
    }
    let fz = t.qty.clone();
    let scale = 1.0 + fz.amax();
    // least-distance program: min |w| s.t. a_i w >= h_i with w = z - fz
    let h: Vec<f64> = a_rows.iter().zip(&b).map(|(a, bi)| bi - a.dot(&fz)).collect();
    if h.iter().all(|v| *v <= 1e-14 * scale) {
        return Ok((&rinv * &fz, t.condition, 0.0));
    }
    let nc = a_rows.len();
    let e = DMatrix::from_fn(m + 1, nc, |i, j| if i < m { a_rows[j][i] } else { h[j] });
    let mut target = DVector::zeros(m + 1);
    target[m] = 1.0;
    let u = nnls(&e, &target)?;
    let r = &e * &u - &target;
    if r[m].abs() < 1e-14 {
        return Err(Error::Internal("constraints are infeasible".into()));
    }
    let w = -r.rows(0, m) / r[m];
    let mut z = &fz + w;
    let lambda: Vec<f64> = u.iter().map(|v| -v / r[m]).collect();
    // polish: re-solve the equality-constrained projection on the active set
    let active: Vec<usize> = (0..nc).filter(|&i| lambda[i] > 0.0).collect();
    if !active.is_empty() && active.len() <= m {
        let at = DMatrix::from_fn(m, active.len(), |i, j| a_rows[active[j]][i]);
        let ba = DVector::from_iterator(active.len(), active.iter().map(|&i| b[i]));
        let gram = at.transpose() * &at;
        if let Some(ch) = gram.cholesky() {
            // z = fz + Aᵀμ with A z = b on the active rows
            let mu = ch.solve(&(ba - at.transpose() * &fz));
            if mu.iter().all(|v| *v >= 0.0) {
                let zp = &fz + &at * &mu;
                let feasible = a_rows.iter().zip(&b).all(|(a, bi)| a.dot(&zp) >= bi - 1e-12 * scale);
                if feasible {
                    z = zp;
                }
            }
        }
    }
    let lam_full = multipliers(&a_rows, &z, &fz, &b, scale);
    let kkt = kkt_residual(&a_rows, &b, &lam_full, &z, &fz) / scale;
    if kkt > KKT_TOL {
        return Err(Error::Numerical(format!("constrained fit KKT residual {kkt:.3e}")));
    }
    Ok((&rinv * &z, t.condition, kkt))
}

/// Lawson-Hanson nonnegative least squares: `min |E u - f|` subject to `u >= 0`.
pub fn nnls(e: &DMatrix<f64>, f: &DVector<f64>) -> Result<DVector<f64>> {
    let (p, n) = e.shape();
    let mut u = DVector::zeros(n);
    let mut passive = vec![false; n];
    let tol = 1e-13 * e.amax().max(1.0) * f.amax().max(1.0) * (p.max(n) as f64);
    let max_outer = 3 * n + 100;
    for _ in 0..max_outer {
        let resid = f - e * &u;
        let w = e.transpose() * resid;
        let cand = (0..n)
            .filter(|&j| !passive[j])
            .max_by(|&a, &b| w[a].total_cmp(&w[b]));
        let Some(t) = cand else { return Ok(u) };
        if w[t] <= tol {
            return Ok(u);
        }
        passive[t] = true;
        loop {
            let idx: Vec<usize> = (0..n).filter(|&j| passive[j]).collect();
            let ep = DMatrix::from_fn(p, idx.len(), |i, j| e[(i, idx[j])]);
            let s = ep
                .clone()
                .svd(true, true)
                .solve(f, 1e-14)
                .map_err(|m| Error::Numerical(format!("nnls subproblem: {m}")))?;
            if s.iter().all(|v| *v > 0.0) {
                u.fill(0.0);
                for (k, &j) in idx.iter().enumerate() {
                    u[j] = s[k];
                }
                break;
            }
            let mut alpha = f64::INFINITY;
            for (k, &j) in idx.iter().enumerate() {
                if s[k] <= 0.0 {
                    let a = u[j] / (u[j] - s[k]);
                    alpha = alpha.min(a);
                }
            }
            for (k, &j) in idx.iter().enumerate() {
                u[j] += alpha * (s[k] - u[j]);
                if u[j] <= 1e-15 {
                    u[j] = 0.0;
                    passive[j] = false;
                }
            }
            if !passive.iter().any(|&v| v) {
                break;
            }
        }
    }
    Err(Error::Numerical("nnls iteration limit reached".into()))
}

/// Multipliers for the constraints active at `z`, from a nonnegative fit of `z - fz` on
/// their normals.
fn multipliers(rows: &[DVector<f64>], z: &DVector<f64>, fz: &DVector<f64>, b: &[f64], scale: f64) -> Vec<f64> {
    let active: Vec<usize> = (0..rows.len())
        .filter(|&i| (rows[i].dot(z) - b[i]).abs() <= 1e-10 * scale)
        .collect();
    let mut lam = vec![0.0; rows.len()];
    if active.is_empty() {
        return lam;
    }
    let at = DMatrix::from_fn(z.len(), active.len(), |i, j| rows[active[j]][i]);
    if let Ok(mu) = nnls(&at, &(z - fz)) {
        for (k, &i) in active.iter().enumerate() {
            lam[i] = mu[k];
        }
    }
    lam
}

fn kkt_residual(rows: &[DVector<f64>], b: &[f64], lambda: &[f64], z: &DVector<f64>, fz: &DVector<f64>) -> f64 {
    let mut grad = z - fz;
    for (a, l) in rows.iter().zip(lambda) {
        if *l != 0.0 {
            grad -= *l * a;
        }
    }
    let stat = grad.amax();
    let primal = rows.iter().zip(b).map(|(a, bi)| (bi - a.dot(z)).max(0.0)).fold(0.0, f64::max);
    let dual = lambda.iter().map(|l| (-l).max(0.0)).fold(0.0, f64::max);
    let comp = rows
        .iter()
        .zip(b)
        .zip(lambda)
        .map(|((a, bi), l)| (l * (a.dot(z) - bi)).abs())
        .fold(0.0, f64::max);
    stat.max(primal).max(dual).max(comp)
}

/// Prices a fitted portfolio: `Σ β_j E^Q[φ_j]`.
pub fn price(portfolio: &ReplicatingPortfolio, quotes: &MarketQuotes) -> Result<f64> {
    let v = expectation_vector(&portfolio.basis, quotes)?;
    Ok(portfolio.coefficients.iter().zip(v.iter()).map(|(b, e)| b * e).sum())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MomentEstimate {
    pub estimate: f64,
    pub portfolio: ReplicatingPortfolio,
}

/// Projection estimate of `E^Q[g(S_T)]` on a univariate grid.
pub fn estimate_moment(
    g: &dyn Fn(f64) -> f64,
    basis: &BasisSet,
    grid: &StateGrid,
    quotes: &MarketQuotes,
    method: &FitMethod,
) -> Result<MomentEstimate> {
    let design = eval_design(basis, grid)?;
    let y: Vec<f64> = grid.points().iter().map(|&s| g(s)).collect();
    let portfolio = fit(&design, &y, method)?;
    let estimate = price(&portfolio, quotes)?;
    Ok(MomentEstimate { estimate, portfolio })
}

/// Continuous-state projection estimate: the Gram matrix and right-hand side are integrals
/// over [a_min, a_max] instead of grid sums. `g_kinks` lists points where `g` is not smooth.
pub fn estimate_moment_continuous(
    g: &dyn Fn(f64) -> f64,
    g_kinks: &[f64],
    basis: &BasisSet,
    a_min: f64,
    a_max: f64,
    quotes: &MarketQuotes,
) -> Result<MomentEstimate> {
    let gram = gram_analytic(basis, a_min, a_max)?;
    let gl = GaussLegendre::new(16);
    let rhs = inner_with(basis, a_min, a_max, g, g_kinks, &gl);
    let sv = gram.clone().singular_values();
    let chol = gram
        .cholesky()
        .ok_or_else(|| Error::Singular("Gram matrix is not positive definite".into()))?;
    let beta = chol.solve(&rhs);
    let portfolio = ReplicatingPortfolio {
        coefficients: beta.iter().copied().collect(),
        basis: basis.clone(),
        diagnostics: FitDiagnostics {
            l2_residual: f64::NAN,
            sup_residual: f64::NAN,
            condition: sv.max() / sv.min(),
            kkt_residual: 0.0,
        },
    };
    let estimate = price(&portfolio, quotes)?;
    Ok(MomentEstimate { estimate, portfolio })
}

/// Weights proportional to a Cauchy density centred at the forward, normalised to sum one.
pub fn cauchy_weights(grid: &StateGrid, forward: f64, scale: f64) -> Result<Vec<f64>> {
    if !(scale > 0.0) {
        return domain(format!("Cauchy scale must be positive, got {scale}"));
    }
    let w: Vec<f64> = grid.points().iter().map(|&s| 1.0 / (1.0 + ((s - forward) / scale).powi(2))).collect();
    let tot: f64 = w.iter().sum();
    Ok(w.into_iter().map(|v| v / tot).collect())
}

/// Piecewise-linear fit on knots `a_min < K_1 < … < K_n < a_max` in the tent basis.
///
/// The span of `{Bond, Underlying, puts, calls}` is the set of continuous piecewise-linear
/// functions with kinks at the strikes, so the least-squares problem can be solved with a
/// tridiagonal system in the tent (hat) basis and mapped back to option positions.
#[derive(Debug, Clone)]
pub struct TentFit {
    /// `a_min`, strikes, `a_max`.
    pub knots: Vec<f64>,
    /// Fitted payoff at each knot.
    pub values: Vec<f64>,
    pub condition: f64,
}

impl TentFit {
    pub fn eval(&self, x: f64) -> f64 {
        let t = &self.knots;
        let k = t.partition_point(|&v| v <= x).clamp(1, t.len() - 1) - 1;
        let w = (x - t[k]) / (t[k + 1] - t[k]);
        self.values[k] * (1.0 - w) + self.values[k + 1] * w
    }

    /// Coefficients in the order of `BasisSet::univariate(strikes)`.
    pub fn hinge_coefficients(&self, strikes: &StrikeSet) -> Vec<f64> {
        let t = &self.knots;
        let a = &self.values;
        let slopes: Vec<f64> = (0..t.len() - 1).map(|k| (a[k + 1] - a[k]) / (t[k + 1] - t[k])).collect();
        let np = strikes.put_strikes.len();
        let b2 = slopes[np];
        let b1 = a[np] - b2 * t[np];
        let mut out = vec![b1, b2];
        out.extend((1..t.len() - 1).map(|k| slopes[k] - slopes[k - 1]));
        out
    }

    pub fn into_portfolio(self, strikes: &StrikeSet, grid: Option<(&StateGrid, &[f64])>) -> Result<ReplicatingPortfolio> {
        let basis = BasisSet::univariate(strikes)?;
        let (l2, sup) = match grid {
            Some((g, y)) => {
                let r: Vec<f64> = g.points().iter().zip(y).map(|(&s, &v)| v - self.eval(s)).collect();
                (r.iter().map(|v| v * v).sum::<f64>().sqrt(), r.iter().fold(0.0f64, |m, v| m.max(v.abs())))
            }
            None => (f64::NAN, f64::NAN),
        };
        Ok(ReplicatingPortfolio {
            coefficients: self.hinge_coefficients(strikes),
            basis,
            diagnostics: FitDiagnostics { l2_residual: l2, sup_residual: sup, condition: self.condition, kkt_residual: 0.0 },
        })
    }

    /// `E^Q[ĝ]` priced directly from knot values and quotes.
    pub fn price(&self, strikes: &StrikeSet, quotes: &MarketQuotes) -> Result<f64> {
        let basis = BasisSet::univariate(strikes)?;
        let v = expectation_vector(&basis, quotes)?;
        Ok(self.hinge_coefficients(strikes).iter().zip(v.iter()).map(|(b, e)| b * e).sum())
    }
}

fn tent_knots(strikes: &StrikeSet, a_min: f64, a_max: f64) -> Result<Vec<f64>> {
    let ks = strikes.all();
    if ks.is_empty() {
        return validation("tent fit needs at least one strike");
    }
    if ks[0] <= a_min || ks[ks.len() - 1] >= a_max {
        return domain(format!("strikes must lie strictly inside ({a_min}, {a_max})"));
    }
    let mut t = vec![a_min];
    t.extend(ks);
    t.push(a_max);
    Ok(t)
}

/// Solves an SPD tridiagonal system in place; returns the pivot ratio as a condition proxy.
fn solve_tridiagonal(diag: &mut [f64], off: &[f64], rhs: &mut [f64], knots: &[f64]) -> Result<f64> {
    let n = diag.len();
    let scale = diag.iter().cloned().fold(0.0, f64::max);
    let (mut pmax, mut pmin) = (0.0f64, f64::INFINITY);
    for i in 0..n {
        if i > 0 {
            let l = off[i - 1] / diag[i - 1];
            diag[i] -= l * off[i - 1];
            rhs[i] -= l * rhs[i - 1];
        }
        if !(diag[i] > RANK_TOL * scale) {
            return Err(Error::Singular(format!(
                "no grid states support the tent at {}; strikes are too close for the grid",
                knots[i]
            )));
        }
        pmax = pmax.max(diag[i]);
        pmin = pmin.min(diag[i]);
    }
    for i in (0..n).rev() {
        let next = if i + 1 < n { off[i] * rhs[i + 1] } else { 0.0 };
        rhs[i] = (rhs[i] - next) / diag[i];
    }
    Ok(pmax / pmin)
}

/// Discrete (weighted) least-squares fit of `y` on the grid with kinks at the strikes.
/// Grid bounds define the outer knots.
pub fn tent_fit_grid(strikes: &StrikeSet, grid: &StateGrid, y: &[f64], weights: Option<&[f64]>) -> Result<TentFit> {
    if y.len() != grid.len() {
        return validation("target length does not match the grid");
    }
    let knots = tent_knots(strikes, grid.a_min(), grid.a_max())?;
    let m = knots.len();
    let mut diag = vec![0.0; m];
    let mut off = vec![0.0; m - 1];
    let mut rhs = vec![0.0; m];
    let mut k = 0;
    for (i, &s) in grid.points().iter().enumerate() {
        while k + 2 < m && s > knots[k + 1] {
            k += 1;
        }
        let w = weights.map_or(1.0, |w| w[i]);
        let u = (s - knots[k]) / (knots[k + 1] - knots[k]);
        let (l, r) = (1.0 - u, u);
        diag[k] += w * l * l;
        diag[k + 1] += w * r * r;
        off[k] += w * l * r;
        rhs[k] += w * l * y[i];
        rhs[k + 1] += w * r * y[i];
    }
    let condition = solve_tridiagonal(&mut diag, &off, &mut rhs, &knots)?;
    Ok(TentFit { knots, values: rhs, condition })
}

/// Continuous L²([a_min, a_max]) projection of `g` with kinks at the strikes.
pub fn tent_fit_continuous(
    strikes: &StrikeSet,
    a_min: f64,
    a_max: f64,
    g: &dyn Fn(f64) -> f64,
    gl: &GaussLegendre,
) -> Result<TentFit> {
    let knots = tent_knots(strikes, a_min, a_max)?;
    let m = knots.len();
    let mut diag = vec![0.0; m];
    let mut off = vec![0.0; m - 1];
    let mut rhs = vec![0.0; m];
    for k in 0..m - 1 {
        let (lo, hi) = (knots[k], knots[k + 1]);
        let h = hi - lo;
        diag[k] += h / 3.0;
        diag[k + 1] += h / 3.0;
        off[k] += h / 6.0;
        rhs[k] += gl.integrate(lo, hi, |s| g(s) * (hi - s) / h);
        rhs[k + 1] += gl.integrate(lo, hi, |s| g(s) * (s - lo) / h);
    }
    let condition = solve_tridiagonal(&mut diag, &off, &mut rhs, &knots)?;
    Ok(TentFit { knots, values: rhs, condition })
}
