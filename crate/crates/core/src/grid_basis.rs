//! Strike menus, state grids, payoff bases and their design and Gram matrices.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{domain, validation, Error, Result};
use crate::quad::GaussLegendre;

pub type AssetId = usize;

/// Out-of-the-money put and call strikes around a forward.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StrikeSet {
    pub put_strikes: Vec<f64>,
    pub call_strikes: Vec<f64>,
    pub forward: f64,
}

impl StrikeSet {
    pub fn new(put_strikes: Vec<f64>, call_strikes: Vec<f64>, forward: f64) -> Result<Self> {
        if !(forward > 0.0 && forward.is_finite()) {
            return domain(format!("forward must be positive, got {forward}"));
        }
        for (name, side) in [("put", &put_strikes), ("call", &call_strikes)] {
            if let Some(k) = side.iter().find(|k| !(**k > 0.0 && k.is_finite())) {
                return domain(format!("{name} strike {k} is not positive"));
            }
            if let Some(w) = side.windows(2).find(|w| w[1] <= w[0]) {
                return validation(format!(
                    "{name} strikes must be strictly increasing ({} then {})",
                    w[0], w[1]
                ));
            }
        }
        if let Some(&kp) = put_strikes.last() {
            if kp > forward {
                return validation(format!("put strike {kp} lies above the forward {forward}"));
            }
        }
        if let Some(&kc) = call_strikes.first() {
            if kc <= forward {
                return validation(format!("call strike {kc} does not lie above the forward {forward}"));
            }
        }
        Ok(StrikeSet { put_strikes, call_strikes, forward })
    }

    /// Splits a strike list at the forward: puts at K <= F, calls above.
    pub fn split(strikes: &[f64], forward: f64) -> Result<Self> {
        let mut ks = strikes.to_vec();
        ks.sort_by(|a, b| a.total_cmp(b));
        if let Some(w) = ks.windows(2).find(|w| w[0] == w[1]) {
            return validation(format!("duplicate strike {}", w[0]));
        }
        let (puts, calls): (Vec<f64>, Vec<f64>) = ks.iter().partition(|&&k| k <= forward);
        StrikeSet::new(puts, calls, forward)
    }

    /// All strikes in ascending order.
    pub fn all(&self) -> Vec<f64> {
        self.put_strikes.iter().chain(&self.call_strikes).copied().collect()
    }

    pub fn len(&self) -> usize {
        self.put_strikes.len() + self.call_strikes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// Terminal-state grid on which replication errors are measured.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StateGrid {
    points: Vec<f64>,
}

#[derive(Debug, Clone)]
pub enum Spacing {
    Uniform,
    Explicit(Vec<f64>),
}

/// Builds a grid on [a_min, a_max]. With explicit points the bounds must match the first and
/// last point.
pub fn build_state_grid(a_min: f64, a_max: f64, n_s: usize, spacing: Spacing) -> Result<StateGrid> {
    if !(a_min > 0.0) || !a_min.is_finite() || !a_max.is_finite() {
        return domain(format!("grid bounds must be positive and finite, got [{a_min}, {a_max}]"));
    }
    if a_max <= a_min {
        return domain(format!("grid bounds are not increasing: [{a_min}, {a_max}]"));
    }
    match spacing {
        Spacing::Uniform => {
            if n_s < 2 {
                return domain("a state grid needs at least two points");
            }
            let h = (a_max - a_min) / (n_s - 1) as f64;
            let mut points: Vec<f64> = (0..n_s).map(|i| a_min + h * i as f64).collect();
            points[n_s - 1] = a_max;
            Ok(StateGrid { points })
        }
        Spacing::Explicit(points) => {
            let g = StateGrid::from_points(points)?;
            if g.a_min() != a_min || g.a_max() != a_max {
                return validation("explicit grid points do not match the stated bounds");
            }
            Ok(g)
        }
    }
}

impl StateGrid {
    pub fn uniform(a_min: f64, a_max: f64, n_s: usize) -> Result<Self> {
        build_state_grid(a_min, a_max, n_s, Spacing::Uniform)
    }

    pub fn from_points(points: Vec<f64>) -> Result<Self> {
        if points.len() < 2 {
            return domain("a state grid needs at least two points");
        }
        if !(points[0] > 0.0) || points.iter().any(|p| !p.is_finite()) {
            return domain("grid points must be positive and finite");
        }
        if let Some(i) = points.windows(2).position(|w| w[1] <= w[0]) {
            return validation(format!("grid points not strictly increasing at index {}", i + 1));
        }
        Ok(StateGrid { points })
    }

    pub fn points(&self) -> &[f64] {
        &self.points
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn a_min(&self) -> f64 {
        self.points[0]
    }

    pub fn a_max(&self) -> f64 {
        self.points[self.points.len() - 1]
    }

    /// Largest gap between neighbouring points.
    pub fn mesh(&self) -> f64 {
        self.points.windows(2).map(|w| w[1] - w[0]).fold(0.0, f64::max)
    }
}

/// One traded payoff.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Payoff {
    Bond,
    Underlying { asset: AssetId },
    Put { asset: AssetId, strike: f64 },
    Call { asset: AssetId, strike: f64 },
    /// Pays `S_den * max(S_num / S_den - K, 0)`.
    CrossCall { num: AssetId, den: AssetId, strike: f64 },
}

/// Linear function `slope * x + intercept`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Lin {
    pub slope: f64,
    pub intercept: f64,
}

impl Lin {
    const ZERO: Lin = Lin { slope: 0.0, intercept: 0.0 };

    fn at(&self, x: f64) -> f64 {
        self.slope * x + self.intercept
    }
}

impl Payoff {
    pub fn underlying(asset: AssetId) -> Self {
        Payoff::Underlying { asset }
    }

    pub fn put(strike: f64) -> Self {
        Payoff::Put { asset: 0, strike }
    }

    pub fn call(strike: f64) -> Self {
        Payoff::Call { asset: 0, strike }
    }

    pub fn strike(&self) -> Option<f64> {
        match *self {
            Payoff::Put { strike, .. } | Payoff::Call { strike, .. } | Payoff::CrossCall { strike, .. } => {
                Some(strike)
            }
            _ => None,
        }
    }

    /// Asset ids the payoff depends on.
    pub fn assets(&self) -> Vec<AssetId> {
        match *self {
            Payoff::Bond => vec![],
            Payoff::Underlying { asset } | Payoff::Put { asset, .. } | Payoff::Call { asset, .. } => vec![asset],
            Payoff::CrossCall { num, den, .. } => vec![num, den],
        }
    }

    /// Payoff at the state vector `s` (indexed by asset id).
    pub fn eval(&self, s: &[f64]) -> f64 {
        match *self {
            Payoff::Bond => 1.0,
            Payoff::Underlying { asset } => s[asset],
            Payoff::Put { asset, strike } => (strike - s[asset]).max(0.0),
            Payoff::Call { asset, strike } => (s[asset] - strike).max(0.0),
            Payoff::CrossCall { num, den, strike } => s[den] * (s[num] / s[den] - strike).max(0.0),
        }
    }

    /// Payoff of a single-asset element at price `x`.
    pub fn eval1(&self, x: f64) -> f64 {
        match *self {
            Payoff::Bond => 1.0,
            Payoff::Underlying { .. } => x,
            Payoff::Put { strike, .. } => (strike - x).max(0.0),
            Payoff::Call { strike, .. } => (x - strike).max(0.0),
            Payoff::CrossCall { .. } => f64::NAN,
        }
    }

    /// Left and right linear pieces around the kink (if any) of a single-asset element.
    pub fn pieces(&self) -> Option<(Option<f64>, Lin, Lin)> {
        let one = Lin { slope: 0.0, intercept: 1.0 };
        let id = Lin { slope: 1.0, intercept: 0.0 };
        match *self {
            Payoff::Bond => Some((None, one, one)),
            Payoff::Underlying { .. } => Some((None, id, id)),
            Payoff::Put { strike, .. } => Some((Some(strike), Lin { slope: -1.0, intercept: strike }, Lin::ZERO)),
            Payoff::Call { strike, .. } => Some((Some(strike), Lin::ZERO, Lin { slope: 1.0, intercept: -strike })),
            Payoff::CrossCall { .. } => None,
        }
    }

    fn piece_at(&self, x: f64) -> Lin {
        let (k, l, r) = self.pieces().expect("univariate payoff");
        match k {
            Some(k) if x >= k => r,
            Some(_) => l,
            None => l,
        }
    }

    fn same_slot(&self, other: &Payoff) -> bool {
        match (*self, *other) {
            (Payoff::Put { asset: a, strike: k }, Payoff::Call { asset: b, strike: j })
            | (Payoff::Call { asset: a, strike: k }, Payoff::Put { asset: b, strike: j }) => a == b && k == j,
            _ => self == other,
        }
    }
}

/// Ordered payoff basis. Bond comes first when present and no element repeats.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BasisSet {
    elements: Vec<Payoff>,
}

impl BasisSet {
    pub fn new(elements: Vec<Payoff>) -> Result<Self> {
        if elements.is_empty() {
            return validation("basis is empty");
        }
        if let Some(i) = elements.iter().position(|e| *e == Payoff::Bond) {
            if i != 0 {
                return validation("Bond must be the first basis element");
            }
        }
        for e in &elements {
            if let Some(k) = e.strike() {
                if !(k > 0.0) || !k.is_finite() {
                    return domain(format!("strike {k} is not positive"));
                }
            }
        }
        for i in 0..elements.len() {
            for j in 0..i {
                if elements[i].same_slot(&elements[j]) {
                    return validation(format!(
                        "duplicate basis element: {:?} and {:?} (put-call parity makes one redundant)",
                        elements[j], elements[i]
                    ));
                }
            }
        }
        Ok(BasisSet { elements })
    }

    /// `[Bond, Underlying, puts ascending, calls ascending]` on asset 0.
    pub fn univariate(strikes: &StrikeSet) -> Result<Self> {
        let mut el = vec![Payoff::Bond, Payoff::underlying(0)];
        el.extend(strikes.put_strikes.iter().map(|&k| Payoff::put(k)));
        el.extend(strikes.call_strikes.iter().map(|&k| Payoff::call(k)));
        BasisSet::new(el)
    }

    /// `[Bond, Underlying, calls ascending]` on asset 0.
    pub fn calls_only(strikes: &[f64]) -> Result<Self> {
        let mut el = vec![Payoff::Bond, Payoff::underlying(0)];
        el.extend(strikes.iter().map(|&k| Payoff::call(k)));
        BasisSet::new(el)
    }

    pub fn elements(&self) -> &[Payoff] {
        &self.elements
    }

    pub fn len(&self) -> usize {
        self.elements.len()
    }

    pub fn is_empty(&self) -> bool {
        self.elements.is_empty()
    }

    /// True when every element depends on asset 0 only.
    pub fn is_univariate(&self) -> bool {
        self.elements.iter().all(|e| e.assets().iter().all(|&a| a == 0) && e.pieces().is_some())
    }

    pub fn n_assets(&self) -> usize {
        self.elements.iter().flat_map(|e| e.assets()).max().map_or(1, |m| m + 1)
    }

    /// Kinks of the single-asset elements, ascending.
    pub fn kinks(&self) -> Vec<f64> {
        let mut k: Vec<f64> = self
            .elements
            .iter()
            .filter_map(|e| e.pieces().and_then(|p| p.0))
            .collect();
        k.sort_by(|a, b| a.total_cmp(b));
        k.dedup();
        k
    }

    /// Row of basis values at the univariate price `x`.
    pub fn row1(&self, x: f64) -> DVector<f64> {
        DVector::from_iterator(self.len(), self.elements.iter().map(|e| e.eval1(x)))
    }
}

/// State-by-state payoff matrix, one row per grid state and one column per basis element.
#[derive(Debug, Clone)]
pub struct DesignMatrix {
    pub values: DMatrix<f64>,
    pub basis: BasisSet,
}

impl DesignMatrix {
    pub fn nrows(&self) -> usize {
        self.values.nrows()
    }

    pub fn ncols(&self) -> usize {
        self.values.ncols()
    }
}

/// Evaluates a single-asset basis on a grid.
pub fn eval_design(basis: &BasisSet, grid: &StateGrid) -> Result<DesignMatrix> {
    eval_design_tensor(basis, std::slice::from_ref(grid))
}

/// Evaluates a basis on the tensor product of per-asset grids. Rows run over asset 0
/// outermost, the last asset innermost.
pub fn eval_design_tensor(basis: &BasisSet, grids: &[StateGrid]) -> Result<DesignMatrix> {
    let d = grids.len();
    if let Some(e) = basis.elements().iter().find(|e| e.assets().iter().any(|&a| a >= d)) {
        return validation(format!("no grid supplied for an asset used by {e:?}"));
    }
    let sizes: Vec<usize> = grids.iter().map(|g| g.len()).collect();
    let n: usize = sizes.iter().product();
    let m = basis.len();
    let mut values = DMatrix::zeros(n, m);
    let mut idx = vec![0usize; d];
    let mut s = vec![0.0; d];
    for row in 0..n {
        for a in 0..d {
            s[a] = grids[a].points()[idx[a]];
        }
        for (j, e) in basis.elements().iter().enumerate() {
            values[(row, j)] = e.eval(&s);
        }
        for a in (0..d).rev() {
            idx[a] += 1;
            if idx[a] < sizes[a] {
                break;
            }
            idx[a] = 0;
        }
    }
    Ok(DesignMatrix { values, basis: basis.clone() })
}

/// Exact integral of the product of two linear functions over [lo, hi].
fn int_lin_lin(p: Lin, q: Lin, lo: f64, hi: f64) -> f64 {
    let len = hi - lo;
    let (dp, dq) = (p.at(lo), q.at(lo));
    p.slope * q.slope * len.powi(3) / 3.0 + (p.slope * dq + q.slope * dp) * len * len / 2.0 + dp * dq * len
}

/// Exact integral of a linear function over [lo, hi].
fn int_lin(p: Lin, lo: f64, hi: f64) -> f64 {
    let len = hi - lo;
    p.at(lo) * len + p.slope * len * len / 2.0
}

fn check_inside(basis: &BasisSet, a_min: f64, a_max: f64) -> Result<()> {
    if !basis.is_univariate() {
        return validation("analytic Gram matrices need a single-asset basis");
    }
    if !(a_max > a_min) {
        return domain(format!("bounds are not increasing: [{a_min}, {a_max}]"));
    }
    if let Some(k) = basis.kinks().into_iter().find(|&k| k <= a_min || k >= a_max) {
        return domain(format!("strike {k} is outside the open interval ({a_min}, {a_max})"));
    }
    Ok(())
}

fn segments(lo: f64, hi: f64, kinks: &[f64]) -> Vec<(f64, f64)> {
    let mut pts = vec![lo];
    pts.extend(kinks.iter().copied().filter(|&k| k > lo && k < hi));
    pts.push(hi);
    pts.windows(2).map(|w| (w[0], w[1])).collect()
}

/// Continuous inner products `∫_A φ_i φ_j dS` in closed form.
pub fn gram_analytic(basis: &BasisSet, a_min: f64, a_max: f64) -> Result<DMatrix<f64>> {
    check_inside(basis, a_min, a_max)?;
    let el = basis.elements();
    let m = el.len();
    let mut g = DMatrix::zeros(m, m);
    for i in 0..m {
        for j in 0..=i {
            let mut ks: Vec<f64> = [el[i].strike(), el[j].strike()].into_iter().flatten().collect();
            ks.sort_by(|a, b| a.total_cmp(b));
            let v: f64 = segments(a_min, a_max, &ks)
                .into_iter()
                .map(|(lo, hi)| {
                    let mid = 0.5 * (lo + hi);
                    int_lin_lin(el[i].piece_at(mid), el[j].piece_at(mid), lo, hi)
                })
                .sum();
            g[(i, j)] = v;
            g[(j, i)] = v;
        }
    }
    Ok(g)
}

/// `∫_{a_min}^{x} φ_j dS` for every element, the right-hand side for indicator targets.
pub fn indicator_rhs(basis: &BasisSet, a_min: f64, x: f64) -> DVector<f64> {
    DVector::from_iterator(
        basis.len(),
        basis.elements().iter().map(|e| {
            let ks: Vec<f64> = e.strike().into_iter().collect();
            segments(a_min, x, &ks)
                .into_iter()
                .map(|(lo, hi)| int_lin(e.piece_at(0.5 * (lo + hi)), lo, hi))
                .sum()
        }),
    )
}

/// `∫_A g φ_j dS` by Gauss-Legendre on the pieces between basis kinks and the kinks of `g`.
pub fn inner_with(
    basis: &BasisSet,
    a_min: f64,
    a_max: f64,
    g: &dyn Fn(f64) -> f64,
    g_kinks: &[f64],
    gl: &GaussLegendre,
) -> DVector<f64> {
    let mut breaks = basis.kinks();
    breaks.extend_from_slice(g_kinks);
    breaks.sort_by(|a, b| a.total_cmp(b));
    let mut out = DVector::zeros(basis.len());
    let mut pts = vec![a_min];
    pts.extend(breaks.into_iter().filter(|&k| k > a_min && k < a_max));
    pts.push(a_max);
    pts.dedup();
    for w in pts.windows(2) {
        let (lo, hi) = (w[0], w[1]);
        let h = 0.5 * (hi - lo);
        let c = 0.5 * (hi + lo);
        for (x, wt) in gl.nodes.iter().zip(&gl.weights) {
            let s = c + h * x;
            let gv = g(s) * wt * h;
            for (j, e) in basis.elements().iter().enumerate() {
                out[j] += gv * e.eval1(s);
            }
        }
    }
    out
}

impl std::fmt::Display for Payoff {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Payoff::Bond => write!(f, "bond"),
            Payoff::Underlying { asset } => write!(f, "underlying[{asset}]"),
            Payoff::Put { asset, strike } => write!(f, "put[{asset}]@{strike}"),
            Payoff::Call { asset, strike } => write!(f, "call[{asset}]@{strike}"),
            Payoff::CrossCall { num, den, strike } => write!(f, "cross[{num}/{den}]@{strike}"),
        }
    }
}

pub(crate) fn singular_element(basis: &BasisSet, col: usize) -> Error {
    let e = basis.elements().get(col).copied();
    match e {
        Some(p) => Error::Singular(format!(
            "design matrix is rank deficient at column {col} ({p}); duplicate strike or no grid states beyond it"
        )),
        None => Error::Singular(format!("design matrix is rank deficient at column {col}")),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn uniform_grid_examples() {
        let g = build_state_grid(1.0, 3.0, 3, Spacing::Uniform).unwrap();
        assert_eq!(g.points(), &[1.0, 2.0, 3.0]);
        let g = build_state_grid(0.5, 1.5, 1001, Spacing::Uniform).unwrap();
        assert!((g.mesh() - 0.001).abs() < 1e-12);
        assert!(matches!(build_state_grid(2.0, 1.0, 3, Spacing::Uniform), Err(Error::Domain(_))));
        assert!(matches!(build_state_grid(0.0, 1.0, 3, Spacing::Uniform), Err(Error::Domain(_))));
        assert!(matches!(
            build_state_grid(1.0, 3.0, 3, Spacing::Explicit(vec![1.0, 2.5, 2.0, 3.0])),
            Err(Error::Validation(_))
        ));
    }

    #[test]
    fn design_examples() {
        let grid = StateGrid::from_points(vec![10.0, 11.0, 12.0, 13.0]).unwrap();
        let b = BasisSet::new(vec![Payoff::call(12.0), Payoff::put(13.0)]).unwrap();
        let x = eval_design(&b, &grid).unwrap();
        assert_eq!(x.values.column(0).as_slice(), &[0.0, 0.0, 0.0, 1.0]);
        assert_eq!(Payoff::put(12.0).eval1(10.0), 2.0);
        let cc = Payoff::CrossCall { num: 0, den: 1, strike: 1.0 };
        assert!((cc.eval(&[1.1, 1.0]) - 0.1).abs() < 1e-15);
    }

    #[test]
    fn tensor_order_is_row_major() {
        let g1 = StateGrid::from_points(vec![1.0, 2.0]).unwrap();
        let g2 = StateGrid::from_points(vec![10.0, 20.0, 30.0]).unwrap();
        let b = BasisSet::new(vec![Payoff::underlying(0), Payoff::underlying(1)]).unwrap();
        let x = eval_design_tensor(&b, &[g1.clone(), g2]).unwrap();
        assert_eq!(x.values.column(0).as_slice(), &[1.0, 1.0, 1.0, 2.0, 2.0, 2.0]);
        assert_eq!(x.values.column(1).as_slice(), &[10.0, 20.0, 30.0, 10.0, 20.0, 30.0]);
        assert!(matches!(eval_design(&b, &g1), Err(Error::Validation(_))));
    }

    #[test]
    fn basis_validation() {
        assert!(BasisSet::new(vec![Payoff::underlying(0), Payoff::Bond]).is_err());
        assert!(BasisSet::new(vec![Payoff::Bond, Payoff::call(1.0), Payoff::put(1.0)]).is_err());
        assert!(BasisSet::new(vec![Payoff::Bond, Payoff::call(1.0), Payoff::call(1.0)]).is_err());
        assert!(StrikeSet::new(vec![90.0, 95.0], vec![105.0], 100.0).is_ok());
        assert!(StrikeSet::new(vec![90.0, 101.0], vec![105.0], 100.0).is_err());
        let s = StrikeSet::split(&[110.0, 90.0, 100.0], 100.0).unwrap();
        assert_eq!(s.put_strikes, vec![90.0, 100.0]);
        assert_eq!(s.call_strikes, vec![110.0]);
    }

    #[test]
    fn gram_examples() {
        let b = BasisSet::new(vec![Payoff::Bond, Payoff::underlying(0)]).unwrap();
        let g = gram_analytic(&b, 0.0, 1.0).unwrap();
        assert!((g[(0, 0)] - 1.0).abs() < 1e-15);
        assert!((g[(0, 1)] - 0.5).abs() < 1e-15);
        assert!((g[(1, 1)] - 1.0 / 3.0).abs() < 1e-15);
        let b = BasisSet::new(vec![Payoff::Bond, Payoff::call(0.5)]).unwrap();
        let g = gram_analytic(&b, 0.0, 1.0).unwrap();
        assert!((g[(0, 1)] - 0.125).abs() < 1e-15);
        assert!((g[(1, 1)] - 1.0 / 24.0).abs() < 1e-15);
        let b = BasisSet::new(vec![Payoff::Bond, Payoff::call(1.5)]).unwrap();
        assert!(matches!(gram_analytic(&b, 0.5, 1.2), Err(Error::Domain(_))));
    }

    #[test]
    fn discrete_gram_converges_to_analytic() {
        let strikes = StrikeSet::new(vec![0.8, 0.9], vec![1.1, 1.25], 1.0).unwrap();
        let b = BasisSet::univariate(&strikes).unwrap();
        let g = gram_analytic(&b, 0.5, 1.5).unwrap();
        let n = 100_000;
        let grid = StateGrid::uniform(0.5, 1.5, n).unwrap();
        // trapezoid weights so that the discrete sum is a consistent quadrature
        let x = eval_design(&b, &grid).unwrap().values;
        let h = grid.mesh();
        let mut w = DVector::from_element(n, h);
        w[0] *= 0.5;
        w[n - 1] *= 0.5;
        let xw = DMatrix::from_fn(n, b.len(), |i, j| x[(i, j)] * w[i]);
        let gd = x.transpose() * xw;
        assert!((gd - &g).abs().max() < 1e-6);
        // plain mesh-scaled sum as well
        let gs = x.transpose() * &x * h;
        assert!((gs - g).abs().max() < 1e-4);
    }

    #[test]
    fn indicator_rhs_matches_quadrature() {
        let b = BasisSet::new(vec![Payoff::Bond, Payoff::underlying(0), Payoff::put(0.9), Payoff::call(1.2)]).unwrap();
        let gl = GaussLegendre::new(4);
        let x = 1.05;
        let r = indicator_rhs(&b, 0.5, x);
        let q = inner_with(&b, 0.5, 1.5, &|s| if s <= x { 1.0 } else { 0.0 }, &[x], &gl);
        assert!((r - q).abs().max() < 1e-13);
    }

    proptest! {
        #[test]
        fn gram_symmetric_and_positive(mut ks in proptest::collection::vec(0.6f64..1.4, 1..12)) {
            ks.sort_by(|a, b| a.total_cmp(b));
            ks.dedup_by(|a, b| (*a - *b).abs() < 1e-3);
            let b = BasisSet::calls_only(&ks).unwrap();
            let g = gram_analytic(&b, 0.5, 1.5).unwrap();
            prop_assert_eq!(g.clone(), g.transpose());
            let eig = g.symmetric_eigenvalues();
            prop_assert!(eig.min() > 0.0);
        }

        #[test]
        fn hinge_columns_piecewise_linear(k in 0.7f64..1.3, n in 20usize..200) {
            let grid = StateGrid::uniform(0.5, 1.5, n).unwrap();
            let b = BasisSet::new(vec![Payoff::call(k), Payoff::put(k + 0.01)]).unwrap();
            let x = eval_design(&b, &grid).unwrap().values;
            let h = grid.mesh();
            for c in 0..2 {
                let kink = if c == 0 { k } else { k + 0.01 };
                for i in 1..n - 1 {
                    let (a, m, z) = (x[(i - 1, c)], x[(i, c)], x[(i + 1, c)]);
                    let s = grid.points()[i];
                    // second difference vanishes away from the kink
                    if (s - kink).abs() > 1.01 * h {
                        prop_assert!((a - 2.0 * m + z).abs() < 1e-12);
                    }
                    prop_assert!(m >= 0.0);
                }
            }
        }
    }
}
