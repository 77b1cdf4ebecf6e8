//! Acceptance run: one PASS/FAIL line per criterion.
//!
//! `cargo test -p rnproj --test acceptance` runs everything; pass criterion numbers as
//! arguments (`-- 1 4 7`) to run a subset. The process exits 0 so failing criteria stay
//! visible without breaking the test suite; set `RNP_ACCEPTANCE_STRICT=1` to exit 1 instead.

use std::time::Instant;

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use rnproj::experiments::{
    build_oracle, convergence_slopes, run_fx_recovery, run_sector_mse, run_univariate_with, weight_equivalence,
    ExperimentConfig, ModelKind, RangeMode, ResultTable, Rows, SectorSetup, StrikeDesign, Study, SvcjSetup,
    UnivariateRow,
};
use rnproj::fx::{build_fx_basis, price_fx_basis_expectations, FxJointModel, FxMarket};
use rnproj::grid_basis::{eval_design, BasisSet, Payoff, StateGrid, StrikeSet};
use rnproj::models::{bs_price, bs_quotes, BsParams, Side};
use rnproj::multi_asset::{
    addition_residual, quartic_layout, separable_cross_estimate, BoxDomain, IndexWeights, MomentInputs,
    QuarticProjector, Term,
};
use rnproj::projector::{estimate_moment_continuous, fit, price, FitMethod, MarketQuotes, PriceCurve};
use rnproj::quad::GaussLegendre;
use rnproj::rn_distribution::{estimate_cdf, moment_from_distribution, rearrange_monotone};

// Pinned tolerances.
const C1_TOL: f64 = 1e-9;
const C2_PROJ_MAX: f64 = 0.04;
const C2_CM_BAND: (f64, f64) = (0.05, 0.20);
const C2_DOMINANCE: f64 = 0.90;
const C3_RATIO_MIN: f64 = 20.0;
const C4_SLOPE_BAND: (f64, f64) = (-2.6, -1.4);
const C5_FACTOR_MIN: f64 = 6.0;
const C6_BOUNDARY_TOL: f64 = 1e-8;
const C6_LINEAR_TOL: f64 = 1e-9;
const C6_MOMENT_TOL: f64 = 1e-6;
const C7_TOL: f64 = 1e-8;
const C8_ODD_TOL: f64 = 1e-10;
const C8_ADD_TOL: f64 = 1e-10;
const C8_IDENT_TOL: f64 = 1e-6;
const C8_TENSOR_TOL: f64 = 1e-6;
const C9_TARGET_PROJ: f64 = 0.1284;
const C9_TARGET_EQ: f64 = 0.1436;
const C9_REL_BAND: f64 = 0.20;
const C9_CORR_BAND: (f64, f64) = (0.10, 0.30);
const C11_TOL: f64 = 1e-5;

// Runtime budgets in seconds.
const BUDGET: [f64; 13] = [0.0, 1.0, 600.0, 300.0, 60.0, 60.0, 60.0, 60.0, 60.0, 600.0, 600.0, 60.0, 600.0];

struct Outcome {
    pass: bool,
    detail: String,
}

fn report(id: usize, name: &str, start: Instant, out: Outcome) -> bool {
    let secs = start.elapsed().as_secs_f64();
    let in_time = secs <= BUDGET[id];
    let pass = out.pass && in_time;
    let tag = if pass { "PASS" } else { "FAIL" };
    let late = if in_time { String::new() } else { format!(" over budget {}s", BUDGET[id]) };
    println!("CRIT {id:>2} {tag} {name}: {} [{secs:.1}s{late}]", out.detail);
    pass
}

fn sci(v: &[f64]) -> String {
    let parts: Vec<String> = v.iter().map(|x| format!("{x:.2e}")).collect();
    format!("[{}]", parts.join(", "))
}

fn info(msg: impl AsRef<str>) {
    println!("        INFO {}", msg.as_ref());
}

fn crit1() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let mut worst = 0.0f64;
    for _ in 0..100 {
        let p = BsParams {
            spot: rng.random_range(20.0..200.0),
            rate: rng.random_range(-0.01..0.08),
            vol: rng.random_range(0.05..0.6),
            maturity: rng.random_range(0.05..2.0),
        };
        let k = p.forward() * rng.random_range(0.7..1.3);
        let basis = BasisSet::new(vec![Payoff::Bond, Payoff::underlying(0), Payoff::call(k)]).unwrap();
        let grid = StateGrid::uniform(0.3 * k, 2.0 * k, 257).unwrap();
        let design = eval_design(&basis, &grid).unwrap();
        let y: Vec<f64> = grid.points().iter().map(|s| (k - s).max(0.0)).collect();
        let port = fit(&design, &y, &FitMethod::Ols).unwrap();
        let q = MarketQuotes::single(
            p.gross_rate(),
            p.forward(),
            PriceCurve::default(),
            PriceCurve::new(&[k], &[bs_price(&p, k, Side::Call)]),
        );
        let got = price(&port, &q).unwrap() / p.gross_rate();
        worst = worst.max((got - bs_price(&p, k, Side::Put)).abs());
    }
    Outcome { pass: worst <= C1_TOL, detail: format!("max |put error| = {worst:.2e} over 100 markets (tol {C1_TOL:.0e})") }
}

fn mean_rel(rows: &[UnivariateRow], pred: impl Fn(&UnivariateRow) -> bool) -> f64 {
    let v: Vec<f64> = rows.iter().filter(|r| pred(r)).map(|r| r.rel_error).collect();
    v.iter().sum::<f64>() / v.len() as f64
}

fn univariate_rows(t: &ResultTable) -> &[UnivariateRow] {
    match &t.rows {
        Rows::Univariate(r) => r,
        _ => panic!("expected univariate rows"),
    }
}

/// Fraction of (cell, replication, quantity) triples where projection is no worse than CM.
fn dominance(rows: &[UnivariateRow]) -> f64 {
    let mut wins = 0usize;
    let mut total = 0usize;
    for p in rows.iter().filter(|r| r.estimator == "projection") {
        let c = rows
            .iter()
            .find(|c| {
                c.estimator == "cm"
                    && c.n_k == p.n_k
                    && c.fraction == p.fraction
                    && c.replication == p.replication
                    && c.quantity == p.quantity
            })
            .expect("paired CM row");
        total += 1;
        if p.rel_error <= c.rel_error {
            wins += 1;
        }
    }
    wins as f64 / total as f64
}

fn fig2_configs() -> Vec<(ModelKind, StrikeDesign)> {
    vec![
        (ModelKind::Bs, StrikeDesign::EqualSpaced),
        (ModelKind::Bs, StrikeDesign::UniformRandom),
        (ModelKind::Svcj, StrikeDesign::EqualSpaced),
        (ModelKind::Svcj, StrikeDesign::UniformRandom),
    ]
}

fn crit2(oracles: &Oracles) -> Outcome {
    let mut pass = true;
    let mut parts = Vec::new();
    for (model, design) in fig2_configs() {
        let cfg = ExperimentConfig { model, strike_design: design, ..ExperimentConfig::default() };
        let t = run_univariate_with(&cfg, oracles.get(model)).unwrap();
        let rows = univariate_rows(&t);
        let at = |q: &str, e: &str| mean_rel(rows, |r| r.n_k == 130 && r.quantity == q && r.estimator == e);
        let (ps, pv, cs, cv) = (at("svix", "projection"), at("vix", "projection"), at("svix", "cm"), at("vix", "cm"));
        let dom = dominance(rows);
        let in_band = |v: f64| v >= C2_CM_BAND.0 && v <= C2_CM_BAND.1;
        let ok = ps <= C2_PROJ_MAX && pv <= C2_PROJ_MAX && in_band(cs) && in_band(cv) && dom >= C2_DOMINANCE;
        pass &= ok;
        let dropped: usize = rows.iter().filter(|r| r.estimator == "projection").map(|r| r.dropped_strikes).sum();
        info(format!(
            "{:?}/{}: n_k=130 proj svix {ps:.4} vix {pv:.4}; cm svix {cs:.4} vix {cv:.4}; proj<=cm in {:.1}% of cells; \
             n_k=10 proj svix {:.4} cm svix {:.4}; strikes dropped {dropped}",
            model,
            design.name(),
            100.0 * dom,
            mean_rel(rows, |r| r.n_k == 10 && r.quantity == "svix" && r.estimator == "projection"),
            mean_rel(rows, |r| r.n_k == 10 && r.quantity == "svix" && r.estimator == "cm"),
        ));
        parts.push(format!("{:?}/{} {}", model, design.name(), if ok { "ok" } else { "miss" }));
    }
    Outcome {
        pass,
        detail: format!(
            "proj <= {C2_PROJ_MAX}, cm in [{}, {}], dominance >= {C2_DOMINANCE}: {}",
            C2_CM_BAND.0,
            C2_CM_BAND.1,
            parts.join(", ")
        ),
    }
}

fn crit3(oracles: &Oracles) -> Outcome {
    let mut pass = true;
    let mut parts = Vec::new();
    for (model, design) in fig2_configs() {
        let cfg = ExperimentConfig {
            model,
            strike_design: design,
            range: RangeMode::varying_default(),
            ..ExperimentConfig::default()
        };
        let t = run_univariate_with(&cfg, oracles.get(model)).unwrap();
        let rows = univariate_rows(&t);
        let widest = rows.iter().map(|r| r.fraction).fold(0.0, f64::max);
        for q in ["svix", "vix"] {
            let p = mean_rel(rows, |r| r.fraction == widest && r.quantity == q && r.estimator == "projection");
            let c = mean_rel(rows, |r| r.fraction == widest && r.quantity == q && r.estimator == "cm");
            let ratio = c / p;
            pass &= ratio >= C3_RATIO_MIN;
            parts.push(format!("{:?}/{}/{q} {ratio:.1}", model, design.name()));
        }
        let fr: Vec<String> = t
            .summary
            .iter()
            .filter(|s| s.group.ends_with("/svix/projection") || s.group.ends_with("/svix/cm"))
            .map(|s| format!("{}={:.4}", s.group.rsplit('/').next().unwrap_or(""), s.mean))
            .collect();
        info(format!("{:?}/{} svix by fraction (proj, cm pairs): {}", model, design.name(), fr.join(" ")));
    }
    Outcome { pass, detail: format!("CM/projection at widest range >= {C3_RATIO_MIN}: {}", parts.join(", ")) }
}

fn crit4() -> Outcome {
    let ns = [20, 40, 80, 160, 320];
    let mut pass = true;
    let mut parts = Vec::new();
    for c in [0.5, 1.0] {
        let s = convergence_slopes(&BsParams::reference(), 0.998, c, &ns).unwrap();
        let inb = |v: f64| v >= C4_SLOPE_BAND.0 && v <= C4_SLOPE_BAND.1;
        pass &= inb(s.projection_slope) && inb(s.cm_slope);
        parts.push(format!("c={c}: proj {:.2} cm {:.2}", s.projection_slope, s.cm_slope));
        info(format!("c={c} projection errors {}", sci(&s.projection_errors)));
        info(format!("c={c} cm errors {}", sci(&s.cm_errors)));
    }
    Outcome {
        pass,
        detail: format!("slopes in [{}, {}]: {}", C4_SLOPE_BAND.0, C4_SLOPE_BAND.1, parts.join("; ")),
    }
}

fn crit5() -> Outcome {
    let g = |x: f64| x.ln();
    let g2 = |x: f64| -1.0 / (x * x);
    let ns = [9, 19, 39, 79, 159, 319];
    let w: Vec<_> = ns.iter().map(|&n| weight_equivalence(&g, &g2, 0.5, 2.0, n).unwrap()).collect();
    let interior: Vec<f64> = w.iter().map(|x| x.interior_max()).collect();
    let middle: Vec<f64> = w.iter().map(|x| x.middle_half_max()).collect();
    let ratios: Vec<f64> = interior.windows(2).map(|p| p[0] / p[1]).collect();
    let mid_ratios: Vec<f64> = middle.windows(2).map(|p| p[0] / p[1]).collect();
    info(format!("h = {:?}", w.iter().map(|x| x.h).collect::<Vec<_>>()));
    info(format!("max interior deviation {}, ratios {ratios:.2?}", sci(&interior)));
    info(format!("middle-half deviation {}, ratios {mid_ratios:.2?}", sci(&middle)));
    let first3 = &ratios[..3];
    Outcome {
        pass: first3.iter().all(|r| *r >= C5_FACTOR_MIN),
        detail: format!("interior reduction per halving {first3:.2?} (need >= {C5_FACTOR_MIN})"),
    }
}

fn crit6() -> Outcome {
    let p = BsParams::reference();
    let (a, b) = (p.quantile(0.001), p.quantile(0.999));
    let ks: Vec<f64> = (0..25).map(|i| p.quantile(0.03 + 0.94 * i as f64 / 24.0)).collect();
    let s = StrikeSet::split(&ks, p.forward()).unwrap();
    let basis = BasisSet::univariate(&s).unwrap();
    let q = bs_quotes(&p, &s);
    let xs: Vec<f64> = (0..401).map(|i| a + (b - a) * i as f64 / 400.0).collect();
    let d = estimate_cdf(&basis, a, b, &q, &xs).unwrap();
    let boundary = d.cdf[0].abs().max((d.cdf[400] - 1.0).abs());

    let dens = d.density.clone().unwrap();
    let knots: Vec<f64> = [vec![a], s.all(), vec![b]].concat();
    let mut lin = 0.0f64;
    for w in knots.windows(2) {
        let (x0, x1) = (w[0], w[1]);
        for t in [0.25, 0.5, 0.75] {
            let x = x0 + t * (x1 - x0);
            let interp = (1.0 - t) * dens.pdf(x0 + 1e-12 * (x1 - x0)) + t * dens.pdf(x1 - 1e-12 * (x1 - x0));
            lin = lin.max((dens.pdf(x) - interp).abs());
        }
    }
    let kinked = s.all().into_iter().filter(|&k| {
        let h = 1e-4 * (b - a);
        (dens.pdf(k + h) - 2.0 * dens.pdf(k) + dens.pdf(k - h)).abs() > 1e-9
    });
    let n_kinks = kinked.count();

    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let mut worst = 0.0f64;
    for _ in 0..20 {
        let k = rng.random_range(a..b);
        let (c0, c1, c2, c3) = (rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0), rng.random_range(-2.0..2.0));
        let g = move |x: f64| c0 + c1 * x + c2 * x * x + c3 * (x - k).max(0.0) + (c1 * x).sin();
        let m = moment_from_distribution(&g, &[k], &d);
        let e = estimate_moment_continuous(&g, &[k], &basis, a, b, &q).unwrap().estimate;
        worst = worst.max((m - e).abs() / (1.0 + e.abs()));
    }
    let r = rearrange_monotone(&d);
    let monotone = r.cdf.windows(2).all(|w| w[1] >= w[0]) && r.cdf.iter().all(|c| (0.0..=1.0).contains(c));
    let pass = boundary <= C6_BOUNDARY_TOL && lin <= C6_LINEAR_TOL && worst <= C6_MOMENT_TOL && monotone;
    Outcome {
        pass,
        detail: format!(
            "boundary {boundary:.1e}; pdf linearity off strikes {lin:.1e} (kinks seen at {n_kinks}/{} strikes); moment consistency {worst:.1e}; rearranged monotone {monotone}",
            s.len()
        ),
    }
}

fn crit7() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let mut worst = 0.0f64;
    for _ in 0..50 {
        let f = [rng.random_range(0.5..2.0), rng.random_range(20.0..150.0)];
        let half = [f[0] * rng.random_range(0.3..0.8), f[1] * rng.random_range(0.3..0.8)];
        let sets: Vec<StrikeSet> = (0..2)
            .map(|a| {
                let n = rng.random_range(2..8);
                // one strike per stratum keeps them apart on the grid
                let ks: Vec<f64> = (0..n)
                    .map(|i| f[a] + half[a] * (-0.85 + 1.7 * (i as f64 + rng.random_range(0.2..0.8)) / n as f64))
                    .collect();
                StrikeSet::split(&ks, f[a]).unwrap()
            })
            .collect();
        let mut q = MarketQuotes::single(1.0, f[0], PriceCurve::default(), PriceCurve::default());
        q.forwards = f.to_vec();
        q.puts = sets.iter().map(|s| PriceCurve::new(&s.put_strikes, &vec![0.1; s.put_strikes.len()])).collect();
        q.calls = sets.iter().map(|s| PriceCurve::new(&s.call_strikes, &vec![0.1; s.call_strikes.len()])).collect();
        let b = BoxDomain::new(vec![f[0] - half[0], f[1] - half[1]], vec![f[0] + half[0], f[1] + half[1]]).unwrap();
        let e = separable_cross_estimate(&b, [&sets[0], &sets[1]], &q, 201).unwrap();
        worst = worst.max((e.estimate - f[0] * f[1]).abs() / (f[0] * f[1]).max(1.0));
    }
    Outcome { pass: worst <= C7_TOL, detail: format!("max |E[S1 S2] - F1 F2| = {worst:.2e} over 50 configs (tol {C7_TOL:.0e})") }
}

/// Weighted least squares on a Gauss-Legendre product grid; exact for the quartic moments.
fn tensor_oracle(b: &BoxDomain, w: &IndexWeights, i: usize, j: usize, n: usize) -> DVector<f64> {
    let gl = GaussLegendre::new(n);
    let d = b.dim();
    let terms = quartic_layout(d, w.len());
    let total = n.pow(d as u32);
    let mut x = DMatrix::zeros(total, terms.len());
    let mut y = DVector::zeros(total);
    for r in 0..total {
        let mut rem = r;
        let mut pt = vec![0.0; d];
        let mut wt = 1.0;
        for k in 0..d {
            let idx = rem % n;
            rem /= n;
            pt[k] = 0.5 * (b.lo[k] + b.hi[k]) + 0.5 * (b.hi[k] - b.lo[k]) * gl.nodes[idx];
            wt *= gl.weights[idx];
        }
        let sw = wt.sqrt();
        for (c, t) in terms.iter().enumerate() {
            let v = match *t {
                Term::Const => 1.0,
                Term::Asset { k, power } => pt[k].powi(power as i32),
                Term::Index { l, power } => w.weights[l].iter().zip(&pt).map(|(a, b)| a * b).sum::<f64>().powi(power as i32),
            };
            x[(r, c)] = sw * v;
        }
        y[r] = sw * pt[i] * pt[j];
    }
    x.svd(true, true).solve(&y, 1e-14).unwrap()
}

fn crit8() -> Outcome {
    // odd monomials on symmetric boxes
    let b = BoxDomain::symmetric(&[0.3, 0.5, 0.4, 0.35]).unwrap();
    let w = IndexWeights::new(vec![vec![0.4, 0.3, 0.2, 0.1], vec![0.25; 4]]).unwrap();
    let mut terms = quartic_layout(4, 2);
    let odd = [
        Term::Asset { k: 0, power: 1 },
        Term::Asset { k: 1, power: 3 },
        Term::Index { l: 0, power: 1 },
        Term::Index { l: 1, power: 3 },
    ];
    terms.extend(odd);
    let p = QuarticProjector::with_terms(&b, &w, terms).unwrap();
    let mut odd_max = 0.0f64;
    for i in 0..4 {
        for j in i + 1..4 {
            let c = p.coeffs(i, j).unwrap();
            let n = c.len();
            odd_max = c.rows(n - odd.len(), odd.len()).iter().fold(odd_max, |m, v| m.max(v.abs()));
        }
    }

    // addition formula on Gaussian moments
    let sd = [0.2, 0.25, 0.3, 0.15];
    let cov = DMatrix::from_fn(4, 4, |i, j| if i == j { sd[i] * sd[i] } else { (0.2 + 0.05 * (i + j) as f64) * sd[i] * sd[j] });
    let index_var: Vec<f64> = w
        .weights
        .iter()
        .map(|wl| {
            let v = DVector::from_column_slice(wl);
            (v.transpose() * &cov * &v)[(0, 0)]
        })
        .collect();
    let m = MomentInputs {
        var: sd.iter().map(|s| s * s).collect(),
        m4: sd.iter().map(|s| 3.0 * s.powi(4)).collect(),
        index_m4: index_var.iter().map(|v| 3.0 * v * v).collect(),
        index_var,
        gross_rate: 1.0,
    };
    let q = QuarticProjector::new(&BoxDomain::symmetric(&sd.map(|s| 3.0 * s)).unwrap(), &w).unwrap();
    let est = q.covariance(&m).unwrap();
    let add = addition_residual(&est, &m, &w).iter().fold(0.0f64, |a, r| a.max(r.abs()));

    // identified two-asset case: x1 x2 = (x_M² - w1² x1² - w2² x2²) / (2 w1 w2)
    let (w1, w2) = (0.4, 0.6);
    let w2d = IndexWeights::new(vec![vec![w1, w2]]).unwrap();
    let b2 = BoxDomain::symmetric(&[0.5, 0.7]).unwrap();
    let p2 = QuarticProjector::new(&b2, &w2d).unwrap();
    let c = p2.coeffs(0, 1).unwrap();
    let mut expect = vec![0.0; p2.terms().len()];
    for (t, e) in p2.terms().iter().zip(expect.iter_mut()) {
        *e = match *t {
            Term::Asset { k: 0, power: 2 } => -w1 * w1 / (2.0 * w1 * w2),
            Term::Asset { k: 1, power: 2 } => -w2 * w2 / (2.0 * w1 * w2),
            Term::Index { l: 0, power: 2 } => 1.0 / (2.0 * w1 * w2),
            _ => 0.0,
        };
    }
    let ident = c.iter().zip(&expect).fold(0.0f64, |m, (a, e)| m.max((a - e).abs()));

    // closed-form two-step moments against a brute-force tensor fit, d = 2 and 3
    let mut tensor = 0.0f64;
    let cases = [
        (
            BoxDomain::new(vec![-0.3, -0.45], vec![0.4, 0.35]).unwrap(),
            IndexWeights::new(vec![vec![0.3, 0.7]]).unwrap(),
        ),
        (
            BoxDomain::new(vec![-0.3, -0.4, -0.2], vec![0.35, 0.3, 0.25]).unwrap(),
            IndexWeights::new(vec![vec![0.5, 0.3, 0.2], vec![1.0 / 3.0; 3]]).unwrap(),
        ),
    ];
    for (bx, wx) in &cases {
        let pr = QuarticProjector::new(bx, wx).unwrap();
        let d = bx.dim();
        for i in 0..d {
            for j in i + 1..d {
                let got = pr.coeffs(i, j).unwrap();
                let oracle = tensor_oracle(bx, wx, i, j, 8);
                tensor = tensor.max((got - &oracle).amax() / oracle.amax().max(1.0));
            }
        }
    }
    let pass = odd_max <= C8_ODD_TOL && add <= C8_ADD_TOL && ident <= C8_IDENT_TOL && tensor <= C8_TENSOR_TOL;
    Outcome {
        pass,
        detail: format!("odd coefficients {odd_max:.1e}; addition residual {add:.1e}; identified case {ident:.1e}; tensor agreement {tensor:.1e}"),
    }
}

fn crit9() -> Outcome {
    let cfg = ExperimentConfig::for_study(Study::SectorMse);
    let t = run_sector_mse(&cfg).unwrap();
    let eq = t.summary_for("equicorrelation", "mse").unwrap();
    let pr = t.summary_for("projection", "mse").unwrap();
    let wc = t.summary_for("projection", "within_run_corr").unwrap();
    let near = |v: f64, target: f64| (v - target).abs() <= C9_REL_BAND * target;
    let pass = pr.mean < eq.mean
        && near(pr.mean, C9_TARGET_PROJ)
        && near(eq.mean, C9_TARGET_EQ)
        && wc.mean >= C9_CORR_BAND.0
        && wc.mean <= C9_CORR_BAND.1;
    info(format!(
        "equicorrelation MSE mean {:.4} median {:.4}; projection mean {:.4} median {:.4}; addition residual max {:.1e}",
        eq.mean,
        eq.median,
        pr.mean,
        pr.median,
        t.summary_for("projection", "max_addition_residual").unwrap().max
    ));
    info(format!(
        "clipped to [-1, 1]: projection MSE mean {:.4}, within-run corr {:.3}",
        t.summary_for("projection_clipped", "mse").unwrap().mean,
        t.summary_for("projection_clipped", "within_run_corr").unwrap().mean
    ));
    Outcome {
        pass,
        detail: format!(
            "{} runs: proj MSE {:.4} (target {C9_TARGET_PROJ}), eq MSE {:.4} (target {C9_TARGET_EQ}), within-run corr {:.3}",
            pr.n, pr.mean, eq.mean, wc.mean
        ),
    }
}

fn crit10() -> Outcome {
    let cfg = ExperimentConfig::for_study(Study::FxRecovery);
    let t = run_fx_recovery(&cfg).unwrap();
    let mut pass = true;
    let mut parts = Vec::new();
    for v in ["normal", "nonlinear"] {
        let c = t.summary_for(v, "abs_error_corr").unwrap();
        let tl = t.summary_for(v, "abs_error_tail").unwrap();
        pass &= c.mean <= cfg.fx.corr_mae_max && tl.mean <= cfg.fx.tail_mae_max;
        parts.push(format!("{v}: corr MAE {:.4} tail MAE {:.4}", c.mean, tl.mean));
        info(format!("{v}: max corr error {:.4}, max tail error {:.4}", c.max, tl.max));
    }
    Outcome {
        pass,
        detail: format!(
            "{} (limits {}, {}) over {} draws",
            parts.join("; "),
            cfg.fx.corr_mae_max,
            cfg.fx.tail_mae_max,
            cfg.replications()
        ),
    }
}

fn crit11() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let mut worst = 0.0f64;
    for _ in 0..20 {
        let (spot1, spot2) = (rng.random_range(0.9..1.3), rng.random_range(1.1..1.5));
        let (ru, rg, re) = (rng.random_range(1.0..1.06), rng.random_range(1.0..1.06), rng.random_range(0.99..1.04));
        let mut market = FxMarket {
            spot1,
            spot2,
            gross_usd: ru,
            gross_gbp: rg,
            gross_eur: re,
            calls1: PriceCurve::default(),
            calls2: PriceCurve::default(),
            cross_calls: PriceCurve::default(),
        };
        let model = FxJointModel {
            forward1: market.forward1(),
            forward2: market.forward2(),
            sigma1: rng.random_range(0.05..0.15),
            sigma2: rng.random_range(0.03..0.1),
            rho: rng.random_range(-0.9..0.9),
            cubic: if rng.random::<bool>() { 0.1 } else { 0.0 },
        };
        let k = market.forward_cross() * rng.random_range(0.9..1.1);
        // GBP price through the pound measure, dQ£/dQ = S₂/F₂, discounted at the pound rate
        let c_gbp = model.cross_payoff(k) / (model.forward2 * rg);
        market.cross_calls = PriceCurve::new(&[k], &[c_gbp]);
        let basis = build_fx_basis(&[model.forward1], &[model.forward2], &[k]).unwrap();
        market.calls1 = PriceCurve::new(&[model.forward1], &[0.0]);
        market.calls2 = PriceCurve::new(&[model.forward2], &[0.0]);
        let e = price_fx_basis_expectations(&market, &basis).unwrap();
        let priced = *e.values.last().unwrap();
        let h = move |a: f64, b: f64| b * (a / b - k).max(0.0);
        let kink = move |z1: f64| model.cross_kink(k, z1);
        let direct = model.expect_2d(&h, Some(&kink));
        worst = worst.max((priced - direct).abs());
    }
    Outcome { pass: worst <= C11_TOL, detail: format!("max |priced - quadrature| = {worst:.2e} over 20 configs (tol {C11_TOL:.0e})") }
}

fn crit12() -> Outcome {
    let small_uni = |model, design| ExperimentConfig {
        model,
        strike_design: design,
        n_k: vec![10, 50, 130],
        n_mc: Some(20),
        svcj: SvcjSetup { n_paths: 20_000, n_steps: 50, ..SvcjSetup::default() },
        ..ExperimentConfig::default()
    };
    let configs = vec![
        small_uni(ModelKind::Bs, StrikeDesign::UniformRandom),
        small_uni(ModelKind::Svcj, StrikeDesign::UniformRandom),
        ExperimentConfig { range: RangeMode::varying_default(), ..small_uni(ModelKind::Bs, StrikeDesign::UniformRandom) },
        ExperimentConfig { n_mc: Some(30), ..ExperimentConfig::for_study(Study::FxRecovery) },
        ExperimentConfig {
            n_mc: Some(6),
            sector: SectorSetup { n_oracle: 20_000, ..SectorSetup::default() },
            ..ExperimentConfig::for_study(Study::SectorMse)
        },
    ];
    let single = rayon::ThreadPoolBuilder::new().num_threads(1).build().unwrap();
    let mut pass = true;
    let mut parts = Vec::new();
    for cfg in &configs {
        let bytes = |t: ResultTable| (t.results_csv().unwrap(), t.summary_csv().unwrap());
        let a = bytes(rnproj::experiments::run(cfg).unwrap());
        let b = bytes(rnproj::experiments::run(cfg).unwrap());
        let c = bytes(single.install(|| rnproj::experiments::run(cfg).unwrap()));
        let same = a == b && a == c;
        pass &= same;
        parts.push(format!("{}{}", cfg.study, if same { "" } else { " DIFFERS" }));
    }
    Outcome { pass, detail: format!("re-runs (parallel, parallel, one thread) byte-identical: {}", parts.join(", ")) }
}

struct Oracles {
    bs: rnproj::experiments::Oracle,
    svcj: Option<rnproj::experiments::Oracle>,
}

impl Oracles {
    fn get(&self, m: ModelKind) -> &rnproj::experiments::Oracle {
        match m {
            ModelKind::Bs => &self.bs,
            ModelKind::Svcj => self.svcj.as_ref().expect("SVCJ oracle built"),
        }
    }
}

fn main() {
    let args: Vec<usize> = std::env::args().skip(1).filter_map(|a| a.parse().ok()).collect();
    let want = |i: usize| args.is_empty() || args.contains(&i);
    let mut all = true;
    let mut passed = 0;
    let mut ran = 0;
    let mut oracles = None;
    if want(2) || want(3) {
        let t = Instant::now();
        let bs = build_oracle(&ExperimentConfig::default()).unwrap();
        let svcj = build_oracle(&ExperimentConfig { model: ModelKind::Svcj, ..ExperimentConfig::default() }).unwrap();
        info(format!("SVCJ oracle sample (2e6 paths, 252 steps) built in {:.1}s", t.elapsed().as_secs_f64()));
        oracles = Some(Oracles { bs, svcj: Some(svcj) });
    }
    type Crit<'a> = (usize, &'a str, Box<dyn Fn() -> Outcome + 'a>);
    let o = oracles.as_ref();
    let crits: Vec<Crit> = vec![
        (1, "put-call parity", Box::new(crit1)),
        (2, "fixed-range convergence", Box::new(move || crit2(o.unwrap()))),
        (3, "varying-range convergence", Box::new(move || crit3(o.unwrap()))),
        (4, "convergence slopes", Box::new(crit4)),
        (5, "weight equivalence", Box::new(crit5)),
        (6, "distribution suite", Box::new(crit6)),
        (7, "zero-correlation impossibility", Box::new(crit7)),
        (8, "quartic projection suite", Box::new(crit8)),
        (9, "sector MSE table", Box::new(crit9)),
        (10, "FX recovery", Box::new(crit10)),
        (11, "numeraire identity", Box::new(crit11)),
        (12, "determinism", Box::new(crit12)),
    ];
    for (id, name, f) in crits {
        if want(id) {
            let t = Instant::now();
            let ok = report(id, name, t, f());
            all &= ok;
            ran += 1;
            passed += ok as usize;
        }
    }
    println!("ACCEPTANCE {} ({passed}/{ran} criteria pass)", if all { "PASS" } else { "FAIL" });
    if !all && std::env::var("RNP_ACCEPTANCE_STRICT").is_ok_and(|v| v == "1") {
        std::process::exit(1);
    }
}
