//! Carr-Madan replication with the trapezoidal strike discretization.

use serde::{Deserialize, Serialize};

use crate::error::{domain, validation, Result};
use crate::grid_basis::StrikeSet;
use crate::projector::MarketQuotes;

/// Strike increments per side.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CmWeights {
    pub put: Vec<f64>,
    pub call: Vec<f64>,
    /// Set when a side had a single strike and its increment came from the fallback gap.
    pub put_fallback: bool,
    pub call_fallback: bool,
}

/// Trapezoid increments on one side: full gaps at the ends, half the neighbour span inside.
pub fn side_increments(k: &[f64]) -> Vec<f64> {
    let n = k.len();
    match n {
        0 | 1 => vec![f64::NAN; n],
        _ => (0..n)
            .map(|j| match j {
                0 => k[1] - k[0],
                j if j == n - 1 => k[n - 1] - k[n - 2],
                j => 0.5 * (k[j + 1] - k[j - 1]),
            })
            .collect(),
    }
}

/// Increments for both sides. A side with one strike uses `fallback_gap` when given, otherwise
/// the distance to the nearest strike on the other side.
pub fn cm_weights(strikes: &StrikeSet, fallback_gap: Option<f64>) -> Result<CmWeights> {
    let p = &strikes.put_strikes;
    let c = &strikes.call_strikes;
    let gap = |own: f64, other: &[f64]| -> Result<f64> {
        if let Some(g) = fallback_gap {
            if !(g > 0.0) {
                return domain("fallback gap must be positive");
            }
            return Ok(g);
        }
        other
            .iter()
            .map(|k| (k - own).abs())
            .min_by(|a, b| a.total_cmp(b))
            .ok_or_else(|| crate::Error::Domain("a single strike in total leaves the increment undefined".into()))
    };
    let mut w = CmWeights {
        put: side_increments(p),
        call: side_increments(c),
        put_fallback: p.len() == 1,
        call_fallback: c.len() == 1,
    };
    if p.len() == 1 {
        w.put[0] = gap(p[0], c)?;
    }
    if c.len() == 1 {
        w.call[0] = gap(c[0], p)?;
    }
    Ok(w)
}

/// Inputs for the Carr-Madan estimate of `E^Q[g(S_T)]`.
pub struct CmInputs<'a> {
    pub g_at_forward: f64,
    /// Enters the replicating payoff only; its expectation is zero.
    pub g_prime_at_forward: f64,
    pub g_double_prime: &'a dyn Fn(f64) -> f64,
    pub strikes: &'a StrikeSet,
    pub quotes: &'a MarketQuotes,
    pub fallback_gap: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CmEstimate {
    pub estimate: f64,
    pub weights: CmWeights,
    /// Option positions `ΔK_j g''(K_j)` for puts then calls.
    pub put_positions: Vec<f64>,
    pub call_positions: Vec<f64>,
}

/// `g(F) + R_f Σ_{K<=F} ΔK g''(K) P(K) + R_f Σ_{K>F} ΔK g''(K) C(K)`.
pub fn cm_estimate(inputs: &CmInputs) -> Result<CmEstimate> {
    let s = inputs.strikes;
    let q = inputs.quotes;
    let rf = q.gross_rate;
    let weights = cm_weights(s, inputs.fallback_gap)?;
    let mut missing = Vec::new();
    let mut total = inputs.g_at_forward;
    let mut side = |ks: &[f64], dk: &[f64], curve: Option<&crate::projector::PriceCurve>, name: &str| {
        let mut pos = Vec::with_capacity(ks.len());
        for (k, d) in ks.iter().zip(dk) {
            let g2 = (inputs.g_double_prime)(*k);
            let w = d * g2;
            pos.push(w);
            match curve.and_then(|c| c.get(*k)) {
                Some(p) => total += rf * w * p,
                None => missing.push(format!("{name}@{k}")),
            }
        }
        pos
    };
    let put_positions = side(&s.put_strikes, &weights.put, q.puts.first(), "put");
    let call_positions = side(&s.call_strikes, &weights.call, q.calls.first(), "call");
    if !missing.is_empty() {
        return validation(format!("missing quotes for: {}", missing.join(", ")));
    }
    if !total.is_finite() {
        return domain("g'' is not finite at every strike");
    }
    Ok(CmEstimate { estimate: total, weights, put_positions, call_positions })
}

/// Carr-Madan replicating payoff at terminal price `x` (the forward term included).
pub fn cm_payoff(inputs: &CmInputs, est: &CmEstimate, x: f64) -> f64 {
    let f = inputs.strikes.forward;
    let mut v = inputs.g_at_forward + inputs.g_prime_at_forward * (x - f);
    for (k, w) in inputs.strikes.put_strikes.iter().zip(&est.put_positions) {
        v += w * (k - x).max(0.0);
    }
    for (k, w) in inputs.strikes.call_strikes.iter().zip(&est.call_positions) {
        v += w * (x - k).max(0.0);
    }
    v
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::projector::PriceCurve;
    use proptest::prelude::*;

    #[test]
    fn increment_examples() {
        assert_eq!(side_increments(&[90.0, 95.0, 100.0]), vec![5.0, 5.0, 5.0]);
        assert_eq!(side_increments(&[90.0, 100.0, 105.0]), vec![10.0, 7.5, 5.0]);
        let s = StrikeSet::new(vec![100.0], vec![], 100.0).unwrap();
        let w = cm_weights(&s, Some(5.0)).unwrap();
        assert_eq!(w.put, vec![5.0]);
        assert!(w.put_fallback);
        let s = StrikeSet::new(vec![90.0, 95.0], vec![103.0], 100.0).unwrap();
        let w = cm_weights(&s, None).unwrap();
        assert_eq!(w.call, vec![8.0]);
        let s = StrikeSet::new(vec![], vec![], 100.0).unwrap();
        let w = cm_weights(&s, None).unwrap();
        assert!(w.put.is_empty() && w.call.is_empty());
    }

    #[test]
    fn sides_are_separate() {
        let s = StrikeSet::new(vec![80.0, 90.0, 100.0], vec![102.0, 110.0], 100.0).unwrap();
        let w = cm_weights(&s, None).unwrap();
        assert_eq!(w.put, vec![10.0, 10.0, 10.0]);
        assert_eq!(w.call, vec![8.0, 8.0]);
    }

    fn quotes(s: &StrikeSet) -> MarketQuotes {
        let p: Vec<f64> = s.put_strikes.iter().map(|k| 0.01 * k).collect();
        let c: Vec<f64> = s.call_strikes.iter().map(|k| 0.02 * k).collect();
        MarketQuotes::single(1.02, s.forward, PriceCurve::new(&s.put_strikes, &p), PriceCurve::new(&s.call_strikes, &c))
    }

    #[test]
    fn square_weights_are_two_dk() {
        let s = StrikeSet::new(vec![90.0, 95.0], vec![105.0, 115.0], 100.0).unwrap();
        let q = quotes(&s);
        let g2 = |_: f64| 2.0;
        let inp = CmInputs {
            g_at_forward: 1e4,
            g_prime_at_forward: 200.0,
            g_double_prime: &g2,
            strikes: &s,
            quotes: &q,
            fallback_gap: None,
        };
        let e = cm_estimate(&inp).unwrap();
        assert_eq!(e.put_positions, vec![10.0, 10.0]);
        assert_eq!(e.call_positions, vec![20.0, 20.0]);
        let expect = 1e4 + 1.02 * (10.0 * 0.9 + 10.0 * 0.95 + 20.0 * 2.1 + 20.0 * 2.3);
        assert!((e.estimate - expect).abs() < 1e-9);
    }

    proptest! {
        #[test]
        fn affine_payoffs_are_exact(a in -5.0f64..5.0, b in -2.0f64..2.0, n in 1usize..20) {
            let f = 100.0;
            let ks: Vec<f64> = (0..n).map(|i| 70.0 + 60.0 * i as f64 / n as f64 + 0.3).collect();
            let s = StrikeSet::split(&ks, f).unwrap();
            let q = quotes(&s);
            let g2 = |_: f64| 0.0;
            let inp = CmInputs { g_at_forward: a + b * f, g_prime_at_forward: b, g_double_prime: &g2, strikes: &s, quotes: &q, fallback_gap: Some(1.0) };
            let e = cm_estimate(&inp).unwrap();
            prop_assert!((e.estimate - (a + b * f)).abs() <= 1e-12 * (1.0 + (a + b * f).abs()));
        }
    }
}
