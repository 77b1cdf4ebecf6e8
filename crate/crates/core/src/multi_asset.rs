//! Dependence between assets from single-asset and index option information.

use std::io::Write;

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{domain, validation, Error, Result};
use crate::grid_basis::{eval_design_tensor, BasisSet, Payoff, StateGrid, StrikeSet};
use crate::projector::{fit, price, FitMethod, MarketQuotes, ReplicatingPortfolio};

/// Product of per-asset intervals.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoxDomain {
    pub lo: Vec<f64>,
    pub hi: Vec<f64>,
}

impl BoxDomain {
    pub fn new(lo: Vec<f64>, hi: Vec<f64>) -> Result<Self> {
        if lo.len() != hi.len() || lo.is_empty() {
            return validation("box bounds must be nonempty and of equal length");
        }
        if let Some(k) = (0..lo.len()).find(|&k| !(lo[k] < hi[k])) {
            return domain(format!("interval {k} is empty: [{}, {}]", lo[k], hi[k]));
        }
        Ok(BoxDomain { lo, hi })
    }

    pub fn symmetric(half_widths: &[f64]) -> Result<Self> {
        BoxDomain::new(half_widths.iter().map(|h| -h).collect(), half_widths.to_vec())
    }

    pub fn dim(&self) -> usize {
        self.lo.len()
    }

    pub fn is_symmetric(&self) -> bool {
        self.lo.iter().zip(&self.hi).all(|(l, h)| *l == -*h)
    }

    pub fn midpoint(&self, k: usize) -> f64 {
        0.5 * (self.lo[k] + self.hi[k])
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IndexWeights {
    pub weights: Vec<Vec<f64>>,
}

impl IndexWeights {
    pub fn new(weights: Vec<Vec<f64>>) -> Result<Self> {
        let d = weights.first().map_or(0, |w| w.len());
        for (l, w) in weights.iter().enumerate() {
            if w.len() != d {
                return validation(format!("index {l} has {} weights, expected {d}", w.len()));
            }
            let s: f64 = w.iter().sum();
            if (s - 1.0).abs() > 1e-12 {
                return validation(format!("index {l} weights sum to {s}, not 1"));
            }
        }
        Ok(IndexWeights { weights })
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }
}

/// Risk-neutral second and fourth moments of excess returns `x = R - R_f`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MomentInputs {
    pub var: Vec<f64>,
    pub m4: Vec<f64>,
    pub index_var: Vec<f64>,
    pub index_m4: Vec<f64>,
    pub gross_rate: f64,
}

impl MomentInputs {
    pub fn validate(&self) -> Result<()> {
        if self.var.len() != self.m4.len() || self.index_var.len() != self.index_m4.len() {
            return validation("moment vectors have mismatched lengths");
        }
        let pairs = self.var.iter().zip(&self.m4).chain(self.index_var.iter().zip(&self.index_m4));
        for (i, (v, m)) in pairs.enumerate() {
            if !(*v > 0.0) {
                return domain(format!("variance {i} must be positive, got {v}"));
            }
            if *m < v * v * (1.0 - 1e-9) {
                return domain(format!("fourth moment {i} is below its variance squared"));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CovEstimate {
    pub cov: Vec<Vec<f64>>,
    pub corr: Vec<Vec<f64>>,
    pub shrinkage: f64,
    pub addition_residual: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeparableEstimate {
    pub estimate: f64,
    pub portfolio: ReplicatingPortfolio,
}

/// Prices the projection of `S₁S₂` on `{1, S₁, hinges on S₁, S₂, hinges on S₂}` over a
/// uniform `n × n` grid on the box. With box midpoints at the forwards the result is `F₁F₂`.
pub fn separable_cross_estimate(
    domains: &BoxDomain,
    strikes: [&StrikeSet; 2],
    quotes: &MarketQuotes,
    n_grid: usize,
) -> Result<SeparableEstimate> {
    if domains.dim() != 2 {
        return validation("separable cross estimate needs a two-asset box");
    }
    for k in 0..2 {
        let f = quotes.forwards.get(k).copied().unwrap_or(f64::NAN);
        if (domains.midpoint(k) - f).abs() > 1e-12 * f.abs().max(1.0) {
            return domain(format!("box midpoint {} differs from forward {f} for asset {k}", domains.midpoint(k)));
        }
    }
    let mut el = vec![Payoff::Bond];
    for (a, s) in strikes.iter().enumerate() {
        el.push(Payoff::Underlying { asset: a });
        el.extend(s.put_strikes.iter().map(|&k| Payoff::Put { asset: a, strike: k }));
        el.extend(s.call_strikes.iter().map(|&k| Payoff::Call { asset: a, strike: k }));
    }
    let basis = BasisSet::new(el)?;
    let grids = [
        StateGrid::uniform(domains.lo[0], domains.hi[0], n_grid)?,
        StateGrid::uniform(domains.lo[1], domains.hi[1], n_grid)?,
    ];
    let design = eval_design_tensor(&basis, &grids)?;
    let mut y = Vec::with_capacity(n_grid * n_grid);
    for &s1 in grids[0].points() {
        for &s2 in grids[1].points() {
            y.push(s1 * s2);
        }
    }
    let portfolio = fit(&design, &y, &FitMethod::Ols)?;
    let estimate = price(&portfolio, quotes)?;
    Ok(SeparableEstimate { estimate, portfolio })
}

/// `(Var_M - Σ w²Var) / (2 Σ_{i<j} w_i w_j σ_i σ_j)` for index `index`.
pub fn equicorrelation(moments: &MomentInputs, weights: &IndexWeights, index: usize) -> Result<f64> {
    let w = weights
        .weights
        .get(index)
        .ok_or_else(|| Error::Validation(format!("no index {index}")))?;
    let d = w.len();
    if d < 2 || moments.var.len() != d {
        return validation("equicorrelation needs d >= 2 and one variance per asset");
    }
    let vm = moments.index_var[index];
    let sd: Vec<f64> = moments.var.iter().map(|v| v.sqrt()).collect();
    let num = vm - (0..d).map(|k| w[k] * w[k] * moments.var[k]).sum::<f64>();
    let s: f64 = (0..d).map(|k| w[k] * sd[k]).sum();
    let sq: f64 = (0..d).map(|k| (w[k] * sd[k]).powi(2)).sum();
    let den = s * s - sq;
    if den.abs() < 1e-300 {
        return domain("equicorrelation denominator is zero (fewer than two nonzero weights)");
    }
    Ok(num / den)
}

/// A basis function of the quartic projection space.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Term {
    Const,
    Asset { k: usize, power: u32 },
    Index { l: usize, power: u32 },
}

impl std::fmt::Display for Term {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Term::Const => write!(f, "1"),
            Term::Asset { k, power } => write!(f, "x{k}^{power}"),
            Term::Index { l, power } => write!(f, "xM{l}^{power}"),
        }
    }
}

/// `{1, x_k², x_k⁴, x_{M,ℓ}², x_{M,ℓ}⁴}`.
pub fn quartic_layout(d: usize, n_index: usize) -> Vec<Term> {
    let mut t = vec![Term::Const];
    t.extend((0..d).map(|k| Term::Asset { k, power: 2 }));
    t.extend((0..d).map(|k| Term::Asset { k, power: 4 }));
    for l in 0..n_index {
        t.push(Term::Index { l, power: 2 });
        t.push(Term::Index { l, power: 4 });
    }
    t
}

const MAX_DEG: usize = 16;

/// Uniform-measure expectations of products of powers of linear forms.
struct MomentTable {
    /// `m[k][n] = E[x_k^n]` under the uniform law on `[lo_k, hi_k]`.
    m: Vec<[f64; MAX_DEG + 1]>,
    binom: [[f64; MAX_DEG + 1]; MAX_DEG + 1],
}

impl MomentTable {
    fn new(b: &BoxDomain) -> Self {
        let m = (0..b.dim())
            .map(|k| {
                let (lo, hi) = (b.lo[k], b.hi[k]);
                let mut row = [0.0; MAX_DEG + 1];
                for (n, r) in row.iter_mut().enumerate() {
                    let p = (n + 1) as i32;
                    *r = (hi.powi(p) - lo.powi(p)) / (p as f64 * (hi - lo));
                }
                row
            })
            .collect();
        let mut binom = [[0.0; MAX_DEG + 1]; MAX_DEG + 1];
        for n in 0..=MAX_DEG {
            binom[n][0] = 1.0;
            for r in 1..=n {
                binom[n][r] = binom[n - 1][r - 1] + if r < n { binom[n - 1][r] } else { 0.0 };
            }
        }
        MomentTable { m, binom }
    }

    /// `E[Π_f (a_f·x)^{p_f}]`, accumulated one coordinate at a time. Coordinates loaded by a
    /// single form are first collapsed into one pseudo-coordinate per form.
    fn expect(&self, forms: &[(&[f64], u32)]) -> f64 {
        let nf = forms.len();
        let dims: Vec<usize> = forms.iter().map(|(_, p)| *p as usize + 1).collect();
        let strides: Vec<usize> = dims
            .iter()
            .scan(1usize, |acc, d| {
                let s = *acc;
                *acc *= d;
                Some(s)
            })
            .collect();
        let size: usize = dims.iter().product();
        let mut t = vec![0.0; size];
        t[0] = 1.0;
        let mut next = vec![0.0; size];
        let decode = |mut idx: usize, out: &mut [usize]| {
            for (o, d) in out.iter_mut().zip(&dims) {
                *o = idx % d;
                idx /= d;
            }
        };
        let mut single: Vec<Vec<usize>> = vec![Vec::new(); nf];
        let mut joint = Vec::new();
        for k in 0..self.m.len() {
            let loaded: Vec<usize> = (0..nf).filter(|&f| forms[f].0[k] != 0.0).collect();
            match loaded.len() {
                0 => {}
                1 => single[loaded[0]].push(k),
                _ => joint.push(k),
            }
        }
        let mut pi = vec![0usize; nf];
        let mut ri = vec![0usize; nf];
        for &k in &joint {
            let mk = &self.m[k];
            for (p_idx, nv) in next.iter_mut().enumerate() {
                decode(p_idx, &mut pi);
                let mut acc = 0.0;
                for r_idx in 0..size {
                    decode(r_idx, &mut ri);
                    if ri.iter().zip(&pi).any(|(r, p)| r > p) {
                        continue;
                    }
                    let mut c = 1.0;
                    let mut deg = 0;
                    let mut rest = 0;
                    for (f, (a, _)) in forms.iter().enumerate() {
                        let (p, r) = (pi[f], ri[f]);
                        if r > 0 {
                            c *= self.binom[p][r] * a[k].powi(r as i32);
                        }
                        deg += r;
                        rest += (p - r) * strides[f];
                    }
                    if c != 0.0 {
                        acc += c * mk[deg] * t[rest];
                    }
                }
                *nv = acc;
            }
            std::mem::swap(&mut t, &mut next);
        }
        for f in 0..nf {
            if single[f].is_empty() {
                continue;
            }
            // moments of the partial sum Σ_{k in single[f]} a_k x_k
            let pf = dims[f] - 1;
            let mut u = vec![0.0; pf + 1];
            u[0] = 1.0;
            for &k in &single[f] {
                let a = forms[f].0[k];
                let mk = &self.m[k];
                let prev = u.clone();
                for n in 0..=pf {
                    u[n] = (0..=n).map(|r| self.binom[n][r] * a.powi(r as i32) * mk[r] * prev[n - r]).sum();
                }
            }
            for (p_idx, nv) in next.iter_mut().enumerate() {
                decode(p_idx, &mut pi);
                let p = pi[f];
                *nv = (0..=p).map(|r| self.binom[p][r] * u[r] * t[p_idx - r * strides[f]]).sum();
            }
            std::mem::swap(&mut t, &mut next);
        }
        t[size - 1]
    }
}

/// Quartic projection space on a box with a Gram matrix factored once for all pairs.
pub struct QuarticProjector {
    terms: Vec<Term>,
    table: MomentTable,
    weights: IndexWeights,
    unit: Vec<Vec<f64>>,
    scale: DVector<f64>,
    chol: nalgebra::Cholesky<f64, nalgebra::Dyn>,
    gram: DMatrix<f64>,
    scaled: DMatrix<f64>,
}

impl QuarticProjector {
    pub fn new(domains: &BoxDomain, weights: &IndexWeights) -> Result<Self> {
        Self::with_terms(domains, weights, quartic_layout(domains.dim(), weights.len()))
    }

    pub fn with_terms(domains: &BoxDomain, weights: &IndexWeights, terms: Vec<Term>) -> Result<Self> {
        let d = domains.dim();
        if weights.weights.iter().any(|w| w.len() != d) {
            return validation("index weights do not match the box dimension");
        }
        for l in 0..weights.len() {
            for m in 0..l {
                let diff = weights.weights[l].iter().zip(&weights.weights[m]).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
                if diff < 1e-12 {
                    return Err(Error::Singular(format!("indices {m} and {l} have identical weights")));
                }
            }
            if let Some(k) = (0..d).find(|&k| (weights.weights[l][k] - 1.0).abs() < 1e-12) {
                return Err(Error::Singular(format!("index {l} coincides with asset {k}")));
            }
        }
        let unit: Vec<Vec<f64>> = (0..d)
            .map(|k| {
                let mut e = vec![0.0; d];
                e[k] = 1.0;
                e
            })
            .collect();
        let table = MomentTable::new(domains);
        let n = terms.len();
        let mut gram = DMatrix::zeros(n, n);
        let forms_of = |t: &Term| -> Option<(&[f64], u32)> {
            match *t {
                Term::Const => None,
                Term::Asset { k, power } => Some((&unit[k][..], power)),
                Term::Index { l, power } => Some((&weights.weights[l][..], power)),
            }
        };
        for a in 0..n {
            for b in 0..=a {
                let v = table.expect(&merge(forms_of(&terms[a]).into_iter().chain(forms_of(&terms[b])).collect()));
                gram[(a, b)] = v;
                gram[(b, a)] = v;
            }
        }
        let scale = DVector::from_iterator(n, (0..n).map(|i| 1.0 / gram[(i, i)].sqrt()));
        let mut scaled = gram.clone();
        for i in 0..n {
            for j in 0..n {
                scaled[(i, j)] *= scale[i] * scale[j];
            }
        }
        let chol = scaled
            .clone()
            .cholesky()
            .ok_or_else(|| Error::Singular("quartic Gram matrix is not positive definite".into()))?;
        Ok(QuarticProjector { terms, table, weights: weights.clone(), unit, scale, chol, gram, scaled })
    }

    pub fn terms(&self) -> &[Term] {
        &self.terms
    }

    pub fn gram(&self) -> &DMatrix<f64> {
        &self.gram
    }

    fn form(&self, t: &Term) -> Option<(&[f64], u32)> {
        match *t {
            Term::Const => None,
            Term::Asset { k, power } => Some((&self.unit[k][..], power)),
            Term::Index { l, power } => Some((&self.weights.weights[l][..], power)),
        }
    }

    fn solve(&self, rhs: &DVector<f64>) -> DVector<f64> {
        let b = rhs.component_mul(&self.scale);
        let mut z = self.chol.solve(&b);
        // one step of refinement
        let r = &b - &self.scaled * &z;
        z += self.chol.solve(&r);
        z.component_mul(&self.scale)
    }

    /// Projection coefficients of `x_i x_j`.
    pub fn coeffs(&self, i: usize, j: usize) -> Result<DVector<f64>> {
        let d = self.unit.len();
        if i == j || i >= d || j >= d {
            return validation(format!("pair ({i}, {j}) is not a pair of distinct assets"));
        }
        let rhs = DVector::from_iterator(
            self.terms.len(),
            self.terms.iter().map(|t| {
                let mut f = vec![(&self.unit[i][..], 1), (&self.unit[j][..], 1)];
                f.extend(self.form(t));
                self.table.expect(&merge(f))
            }),
        );
        Ok(self.solve(&rhs))
    }

    /// `E[x^e]` monomial projection, for test columns and general targets.
    pub fn coeffs_for(&self, forms: &[(&[f64], u32)]) -> DVector<f64> {
        let rhs = DVector::from_iterator(
            self.terms.len(),
            self.terms.iter().map(|t| {
                let mut f = forms.to_vec();
                f.extend(self.form(t));
                self.table.expect(&merge(f))
            }),
        );
        self.solve(&rhs)
    }

    /// Covariance matrix for all pairs; the diagonal holds the input variances.
    pub fn covariance(&self, moments: &MomentInputs) -> Result<DMatrix<f64>> {
        let d = self.unit.len();
        let pairs: Vec<(usize, usize)> = (0..d).flat_map(|i| (i + 1..d).map(move |j| (i, j))).collect();
        let vals: Vec<Result<f64>> = pairs
            .par_iter()
            .map(|&(i, j)| covariance_from_moments(&self.terms, self.coeffs(i, j)?.as_slice(), moments))
            .collect();
        let mut c = DMatrix::zeros(d, d);
        for (k, &(i, j)) in pairs.iter().enumerate() {
            let v = vals[k].as_ref().map_err(|e| Error::Internal(e.to_string()))?;
            c[(i, j)] = *v;
            c[(j, i)] = *v;
        }
        for k in 0..d {
            c[(k, k)] = moments.var[k];
        }
        Ok(c)
    }
}

/// Collapses repeated linear forms (same slice) into one power.
fn merge(forms: Vec<(&[f64], u32)>) -> Vec<(&[f64], u32)> {
    let mut out: Vec<(&[f64], u32)> = Vec::with_capacity(forms.len());
    for (a, p) in forms {
        if p == 0 {
            continue;
        }
        match out.iter_mut().find(|(b, _)| std::ptr::eq(*b, a)) {
            Some(e) => e.1 += p,
            None => out.push((a, p)),
        }
    }
    out
}

/// Coefficients of `x_i x_j` on the quartic space under the uniform law on the box.
pub fn quartic_projection_coeffs(i: usize, j: usize, domains: &BoxDomain, weights: &IndexWeights) -> Result<DVector<f64>> {
    QuarticProjector::new(domains, weights)?.coeffs(i, j)
}

/// `β̂₀ + Σ_k (β̂_k Var_k + γ̂_k M4_k) + Σ_ℓ (β̂_{M,ℓ} Var_{M,ℓ} + γ̂_{M,ℓ} M4_{M,ℓ})`.
pub fn covariance_from_moments(terms: &[Term], coeffs: &[f64], moments: &MomentInputs) -> Result<f64> {
    if terms.len() != coeffs.len() {
        return validation("coefficient layout does not match the term list");
    }
    let mut s = 0.0;
    for (t, c) in terms.iter().zip(coeffs) {
        let e = match *t {
            Term::Const => Some(1.0),
            Term::Asset { k, power: 2 } => moments.var.get(k).copied(),
            Term::Asset { k, power: 4 } => moments.m4.get(k).copied(),
            Term::Index { l, power: 2 } => moments.index_var.get(l).copied(),
            Term::Index { l, power: 4 } => moments.index_m4.get(l).copied(),
            _ => None,
        };
        match e {
            Some(v) => s += c * v,
            None => return validation(format!("no moment input prices term {t}")),
        }
    }
    Ok(s)
}

/// `Var_M - wᵀ Σ w` per index, with the diagonal of Σ taken from the moment inputs.
pub fn addition_residual(cov: &DMatrix<f64>, moments: &MomentInputs, weights: &IndexWeights) -> Vec<f64> {
    let d = cov.nrows();
    weights
        .weights
        .iter()
        .zip(&moments.index_var)
        .map(|(w, vm)| {
            let mut q = 0.0;
            for i in 0..d {
                q += w[i] * w[i] * moments.var[i];
                for j in 0..i {
                    q += 2.0 * w[i] * w[j] * cov[(i, j)];
                }
            }
            vm - q
        })
        .collect()
}

/// Correlation from covariance, off-diagonals clipped to [-1, 1].
pub fn correlation_from_cov(cov: &DMatrix<f64>) -> DMatrix<f64> {
    let d = cov.nrows();
    DMatrix::from_fn(d, d, |i, j| {
        if i == j {
            1.0
        } else {
            (cov[(i, j)] / (cov[(i, i)] * cov[(j, j)]).sqrt()).clamp(-1.0, 1.0)
        }
    })
}

pub fn equicorrelation_matrix(d: usize, rho: f64) -> DMatrix<f64> {
    DMatrix::from_fn(d, d, |i, j| if i == j { 1.0 } else { rho })
}

fn min_eigenvalue(m: &DMatrix<f64>) -> f64 {
    SymmetricEigen::new(m.clone()).eigenvalues.min()
}

#[derive(Debug, Clone, PartialEq)]
pub struct Shrunk {
    pub corr: DMatrix<f64>,
    pub alpha: f64,
}

/// Smallest `α` with `λ_min((1-α)C + α C_equi) >= min_eig`, by bisection to 1e-6.
pub fn shrink_to_equicorrelation(corr: &DMatrix<f64>, rho: f64, min_eig: f64) -> Result<Shrunk> {
    let d = corr.nrows();
    let mut c = corr.clone();
    for i in 0..d {
        for j in 0..d {
            c[(i, j)] = if i == j { 1.0 } else { c[(i, j)].clamp(-1.0, 1.0) };
        }
    }
    let target = equicorrelation_matrix(d, rho);
    let mix = |a: f64| &c * (1.0 - a) + &target * a;
    if min_eigenvalue(&c) >= min_eig {
        return Ok(Shrunk { corr: c, alpha: 0.0 });
    }
    if min_eigenvalue(&target) < min_eig {
        return domain(format!("equicorrelation target with rho = {rho} has an eigenvalue below {min_eig}"));
    }
    let (mut lo, mut hi) = (0.0, 1.0);
    while hi - lo > 1e-6 {
        let mid = 0.5 * (lo + hi);
        if min_eigenvalue(&mix(mid)) >= min_eig {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Ok(Shrunk { corr: mix(hi), alpha: hi })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BiasBound {
    /// The estimate lies below the true value (b₁b₂ < 0).
    Lower,
    /// The estimate lies above the true value (b₁b₂ > 0).
    Upper,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SpanningEstimate {
    pub value: f64,
    pub bound: BiasBound,
}

/// `(Var₃ - b₁²Var₁ - b₂²Var₂) / (2b₁b₂)` for `R₃ ≈ b₁R₁ + b₂R₂`.
pub fn spanning_covariance(b1: f64, b2: f64, var1: f64, var2: f64, var3: f64) -> Result<SpanningEstimate> {
    if b1 * b2 == 0.0 {
        return domain("spanning estimator needs b1 * b2 != 0");
    }
    if !(var1 > 0.0 && var2 > 0.0 && var3 > 0.0) {
        return domain("variances must be positive");
    }
    let value = (var3 - b1 * b1 * var1 - b2 * b2 * var2) / (2.0 * b1 * b2);
    let bound = if b1 * b2 > 0.0 { BiasBound::Upper } else { BiasBound::Lower };
    Ok(SpanningEstimate { value, bound })
}

pub fn spanning_correlation(b1: f64, b2: f64, var1: f64, var2: f64, var3: f64) -> Result<SpanningEstimate> {
    let c = spanning_covariance(b1, b2, var1, var2, var3)?;
    Ok(SpanningEstimate { value: c.value / (var1 * var2).sqrt(), bound: c.bound })
}

/// Covariance and correlation matrices followed by `# key,value` metadata rows.
pub fn write_cov_csv<W: Write>(est: &CovEstimate, out: W) -> Result<()> {
    let mut w = csv::WriterBuilder::new().flexible(true).from_writer(out);
    let d = est.cov.len();
    let mut header = vec!["matrix".to_string(), "row".to_string()];
    header.extend((0..d).map(|j| format!("c{j}")));
    w.write_record(&header)?;
    for (name, m) in [("cov", &est.cov), ("corr", &est.corr)] {
        for (i, row) in m.iter().enumerate() {
            let mut r = vec![name.to_string(), i.to_string()];
            r.extend(row.iter().map(|v| v.to_string()));
            w.write_record(&r)?;
        }
    }
    w.write_record(["# shrinkage".to_string(), est.shrinkage.to_string()])?;
    for (l, r) in est.addition_residual.iter().enumerate() {
        w.write_record([format!("# addition_residual_{l}"), r.to_string()])?;
    }
    w.flush()?;
    Ok(())
}

pub fn to_rows(m: &DMatrix<f64>) -> Vec<Vec<f64>> {
    (0..m.nrows()).map(|i| m.row(i).iter().copied().collect()).collect()
}
