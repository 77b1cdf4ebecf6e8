//! Risk-neutral CDF and density by projecting indicator payoffs.
//!
//! With continuous inner products the coefficients for `1{S <= x}` are `G⁻¹ p(x)` where
//! `p_j(x) = ∫_{a_min}^x φ_j`. Pricing gives `F̂(x) = p(x)ᵀ c` with `c = G⁻¹ E`, so
//! `f̂(x) = φ(x)ᵀ c` is a continuous piecewise-linear density with kinks at the strikes.

use std::io::Write;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{domain, validation, Error, Result};
use crate::grid_basis::{gram_analytic, indicator_rhs, inner_with, BasisSet};
use crate::projector::{expectation_vector, MarketQuotes};
use crate::quad::GaussLegendre;

/// Density `φ(x)ᵀ c` on `[a_min, a_max]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DensityRep {
    pub basis: BasisSet,
    pub coefficients: Vec<f64>,
    pub a_min: f64,
    pub a_max: f64,
}

impl DensityRep {
    pub fn pdf(&self, x: f64) -> f64 {
        self.basis.elements().iter().zip(&self.coefficients).map(|(e, c)| c * e.eval1(x)).sum()
    }

    pub fn cdf(&self, x: f64) -> f64 {
        let p = indicator_rhs(&self.basis, self.a_min, x);
        p.iter().zip(&self.coefficients).map(|(a, c)| a * c).sum()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RnDistribution {
    pub eval_points: Vec<f64>,
    pub cdf: Vec<f64>,
    pub pdf: Vec<f64>,
    pub monotonized: bool,
    /// Present for the raw estimate; dropped by rearrangement.
    pub density: Option<DensityRep>,
}

/// `n` uniform points on `[a_min, a_max]`.
pub fn default_eval_points(a_min: f64, a_max: f64, n: usize) -> Vec<f64> {
    let n = n.max(2);
    (0..n)
        .map(|i| if i == n - 1 { a_max } else { a_min + (a_max - a_min) * i as f64 / (n - 1) as f64 })
        .collect()
}

pub fn estimate_cdf(
    basis: &BasisSet,
    a_min: f64,
    a_max: f64,
    quotes: &MarketQuotes,
    eval_points: &[f64],
) -> Result<RnDistribution> {
    if !basis.is_univariate() {
        return validation("distribution estimation needs a univariate basis");
    }
    if let Some(x) = eval_points.iter().find(|&&x| !(x >= a_min && x <= a_max)) {
        return domain(format!("evaluation point {x} outside [{a_min}, {a_max}]"));
    }
    let gram = gram_analytic(basis, a_min, a_max)?;
    let e = expectation_vector(basis, quotes)?;
    let chol = gram
        .cholesky()
        .ok_or_else(|| Error::Singular("Gram matrix is not positive definite".into()))?;
    let c: DVector<f64> = chol.solve(&e);
    let density = DensityRep { basis: basis.clone(), coefficients: c.iter().copied().collect(), a_min, a_max };
    let cdf = eval_points.iter().map(|&x| density.cdf(x)).collect();
    let pdf = eval_points.iter().map(|&x| density.pdf(x)).collect();
    Ok(RnDistribution { eval_points: eval_points.to_vec(), cdf, pdf, monotonized: false, density: Some(density) })
}

/// Coefficients `β̂(x)` of the indicator projection for each `x`, one column per point.
pub fn indicator_coefficients(basis: &BasisSet, a_min: f64, a_max: f64, xs: &[f64]) -> Result<DMatrix<f64>> {
    let gram = gram_analytic(basis, a_min, a_max)?;
    let chol = gram
        .cholesky()
        .ok_or_else(|| Error::Singular("Gram matrix is not positive definite".into()))?;
    let mut rhs = DMatrix::zeros(basis.len(), xs.len());
    for (j, &x) in xs.iter().enumerate() {
        rhs.set_column(j, &indicator_rhs(basis, a_min, x));
    }
    Ok(chol.solve(&rhs))
}

/// Sorts the CDF values, clips them to [0, 1] and differentiates numerically.
pub fn rearrange_monotone(dist: &RnDistribution) -> RnDistribution {
    let mut cdf: Vec<f64> = dist.cdf.iter().map(|v| v.clamp(0.0, 1.0)).collect();
    cdf.sort_by(|a, b| a.total_cmp(b));
    let x = &dist.eval_points;
    let n = x.len();
    let pdf = (0..n)
        .map(|i| match n {
            0 | 1 => 0.0,
            _ => {
                let (lo, hi) = (i.saturating_sub(1), (i + 1).min(n - 1));
                (cdf[hi] - cdf[lo]) / (x[hi] - x[lo])
            }
        })
        .collect();
    RnDistribution { eval_points: x.clone(), cdf, pdf, monotonized: true, density: None }
}

/// `∫ g dF̂`. Exact piecewise Gauss-Legendre against the fitted density when available
/// (`g_kinks` lists points where `g` is not smooth), trapezoid on the evaluation grid otherwise.
pub fn moment_from_distribution(g: &dyn Fn(f64) -> f64, g_kinks: &[f64], dist: &RnDistribution) -> f64 {
    match &dist.density {
        Some(d) => {
            let gl = GaussLegendre::new(16);
            let v = inner_with(&d.basis, d.a_min, d.a_max, g, g_kinks, &gl);
            v.iter().zip(&d.coefficients).map(|(a, c)| a * c).sum()
        }
        None => {
            let x = &dist.eval_points;
            (1..x.len())
                .map(|i| 0.5 * (x[i] - x[i - 1]) * (g(x[i]) * dist.pdf[i] + g(x[i - 1]) * dist.pdf[i - 1]))
                .sum()
        }
    }
}

/// Columns `x, cdf, pdf, monotonized`.
pub fn write_csv<W: Write>(dist: &RnDistribution, out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["x", "cdf", "pdf", "monotonized"])?;
    for ((x, c), p) in dist.eval_points.iter().zip(&dist.cdf).zip(&dist.pdf) {
        w.write_record([x.to_string(), c.to_string(), p.to_string(), dist.monotonized.to_string()])?;
    }
    w.flush()?;
    Ok(())
}
