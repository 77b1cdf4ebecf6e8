//! Real-data ingestion: option-chain cleaning and FX smile-pillar expansion.

use std::collections::BTreeMap;
use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use crate::error::{validation, Error, Result};
use crate::models::{atm_dns_strike, delta_to_strike, gk_price, GkParams, Side};
use crate::projector::{MarketQuotes, PriceCurve};

/// One quoted option as it appears in a raw chain file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RawChainRow {
    pub date: String,
    pub expiry: String,
    pub strike: f64,
    pub side: Side,
    pub bid: f64,
    pub ask: f64,
    pub underlying: f64,
    #[serde(default)]
    pub forward: Option<f64>,
}

impl RawChainRow {
    pub fn validate(&self) -> Result<()> {
        if !(self.strike > 0.0) {
            return validation(format!("strike must be positive, got {}", self.strike));
        }
        if !(self.bid >= 0.0) || !(self.bid <= self.ask) {
            return validation(format!("need 0 <= bid <= ask, got bid {} ask {}", self.bid, self.ask));
        }
        if let Some(f) = self.forward {
            if !(f > 0.0) {
                return validation(format!("forward must be positive, got {f}"));
            }
        }
        Ok(())
    }

    fn mid(&self) -> f64 {
        0.5 * (self.bid + self.ask)
    }
}

/// Cleaned out-of-the-money quotes for one (date, expiry).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CleanChain {
    pub date: String,
    pub expiry: String,
    pub underlying: f64,
    pub forward: f64,
    /// Discount factor from put-call parity, when the forward was derived that way.
    pub discount: Option<f64>,
    pub puts: PriceCurve,
    pub calls: PriceCurve,
}

impl CleanChain {
    pub fn to_quotes(&self, gross_rate: f64) -> MarketQuotes {
        MarketQuotes::single(gross_rate, self.forward, self.puts.clone(), self.calls.clone())
    }

    /// Rows with bid = ask = mid and the forward filled in, so that cleaning them again is a no-op.
    pub fn to_rows(&self) -> Vec<RawChainRow> {
        let row = |side: Side, q: &[f64; 2]| RawChainRow {
            date: self.date.clone(),
            expiry: self.expiry.clone(),
            strike: q[0],
            side,
            bid: q[1],
            ask: q[1],
            underlying: self.underlying,
            forward: Some(self.forward),
        };
        let mut rows: Vec<RawChainRow> = self.puts.quotes.iter().map(|q| row(Side::Put, q)).collect();
        rows.extend(self.calls.quotes.iter().map(|q| row(Side::Call, q)));
        rows
    }
}

/// Forward and discount factor from `C - P = D F - D K` fitted over strikes quoted on both sides.
fn parity_forward(rows: &[&RawChainRow]) -> Option<(f64, f64)> {
    let mut calls = BTreeMap::new();
    let mut puts = BTreeMap::new();
    for r in rows.iter().filter(|r| r.bid > 0.0) {
        let key = r.strike.to_bits();
        match r.side {
            Side::Call => calls.insert(key, r.mid()),
            Side::Put => puts.insert(key, r.mid()),
        };
    }
    let pts: Vec<(f64, f64)> =
        calls.iter().filter_map(|(k, c)| puts.get(k).map(|p| (f64::from_bits(*k), c - p))).collect();
    if pts.len() < 2 {
        return None;
    }
    let n = pts.len() as f64;
    let mk = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxy: f64 = pts.iter().map(|p| (p.0 - mk) * (p.1 - my)).sum();
    let sxx: f64 = pts.iter().map(|p| (p.0 - mk).powi(2)).sum();
    if sxx <= 0.0 {
        return None;
    }
    let d = -sxy / sxx;
    let f = (my + d * mk) / d;
    (d > 0.0 && f > 0.0).then_some((f, d))
}

/// Keeps quotes scanning outward from the forward until two consecutive zero bids.
fn scan_outward<'a>(side: impl Iterator<Item = &'a RawChainRow>) -> Vec<[f64; 2]> {
    let mut out = Vec::new();
    let mut zeros = 0;
    for r in side {
        if r.bid > 0.0 {
            zeros = 0;
            out.push([r.strike, r.mid()]);
        } else {
            zeros += 1;
            if zeros == 2 {
                break;
            }
        }
    }
    out
}

fn clean_group(date: &str, expiry: &str, rows: &[&RawChainRow]) -> Result<CleanChain> {
    let given: Vec<f64> = rows.iter().filter_map(|r| r.forward).collect();
    let (forward, discount) = match given.first() {
        Some(&f) => {
            if given.iter().any(|g| (g - f).abs() > 1e-12 * f) {
                return validation(format!("{date} {expiry}: conflicting forward values"));
            }
            (f, None)
        }
        None => match parity_forward(rows) {
            Some((f, d)) => (f, Some(d)),
            None => {
                return validation(format!(
                    "{date} {expiry}: no forward derivable (fewer than two strikes quoted as both put and call); \
                     supply a forward column"
                ))
            }
        },
    };
    let underlying = rows[0].underlying;
    let mut calls: Vec<&RawChainRow> =
        rows.iter().copied().filter(|r| r.side == Side::Call && r.strike > forward).collect();
    let mut puts: Vec<&RawChainRow> =
        rows.iter().copied().filter(|r| r.side == Side::Put && r.strike <= forward).collect();
    calls.sort_by(|a, b| a.strike.total_cmp(&b.strike));
    puts.sort_by(|a, b| b.strike.total_cmp(&a.strike));
    for w in calls.windows(2).chain(puts.windows(2)) {
        if w[0].strike == w[1].strike {
            return validation(format!("{date} {expiry}: duplicate {:?} at strike {}", w[0].side, w[0].strike));
        }
    }
    let mut put_quotes = scan_outward(puts.into_iter());
    put_quotes.reverse();
    Ok(CleanChain {
        date: date.to_string(),
        expiry: expiry.to_string(),
        underlying,
        forward,
        discount,
        puts: PriceCurve { quotes: put_quotes },
        calls: PriceCurve { quotes: scan_outward(calls.into_iter()) },
    })
}

/// Drops in-the-money and zero-bid options, truncates after two consecutive zero bids and
/// emits mid prices. One result per (date, expiry), in sorted order. A strike equal to the
/// forward keeps only its put.
///
/// The forward comes from the `forward` column when present, otherwise from put-call parity.
pub fn clean_chain(rows: &[RawChainRow]) -> Result<Vec<CleanChain>> {
    let mut groups: BTreeMap<(&str, &str), Vec<&RawChainRow>> = BTreeMap::new();
    for r in rows {
        r.validate()?;
        groups.entry((r.date.as_str(), r.expiry.as_str())).or_default().push(r);
    }
    groups.iter().map(|((d, e), g)| clean_group(d, e, g)).collect()
}

/// Prefixes a csv error with its line number.
fn with_line(e: csv::Error) -> Error {
    match e.position() {
        Some(p) => Error::Validation(format!("line {}: {e}", p.line())),
        None => Error::Csv(e),
    }
}

fn read_rows<T: for<'de> Deserialize<'de>>(reader: impl Read, check: impl Fn(&T) -> Result<()>) -> Result<Vec<T>> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
    let mut out = Vec::new();
    for rec in rdr.deserialize::<T>() {
        let row = rec.map_err(with_line)?;
        let line = out.len() + 2;
        check(&row).map_err(|e| Error::Validation(format!("line {line}: {e}")))?;
        out.push(row);
    }
    Ok(out)
}

pub fn read_chain_csv(reader: impl Read) -> Result<Vec<RawChainRow>> {
    read_rows(reader, RawChainRow::validate)
}

pub fn write_chain_csv(rows: &[RawChainRow], writer: impl Write) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    for r in rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

/// Row of a quote file: `strike, side` and either `price` or `bid, ask`; `forward` optional.
/// Cleaned chain files have this shape.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QuoteRow {
    pub strike: f64,
    pub side: Side,
    #[serde(default)]
    pub price: Option<f64>,
    #[serde(default)]
    pub bid: Option<f64>,
    #[serde(default)]
    pub ask: Option<f64>,
    #[serde(default)]
    pub forward: Option<f64>,
}

impl QuoteRow {
    fn value(&self) -> Result<f64> {
        match (self.price, self.bid, self.ask) {
            (Some(p), _, _) => Ok(p),
            (None, Some(b), Some(a)) if b <= a => Ok(0.5 * (b + a)),
            (None, Some(_), Some(_)) => validation("bid exceeds ask"),
            _ => validation("need a price column or both bid and ask"),
        }
    }

    fn validate(&self) -> Result<()> {
        if !(self.strike > 0.0) {
            return validation(format!("strike must be positive, got {}", self.strike));
        }
        let v = self.value()?;
        if !(v >= 0.0) {
            return validation(format!("price must be nonnegative, got {v}"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct QuoteFile {
    pub puts: PriceCurve,
    pub calls: PriceCurve,
    /// Common value of the `forward` column, if present.
    pub forward: Option<f64>,
}

pub fn read_quotes_csv(reader: impl Read) -> Result<QuoteFile> {
    let rows = read_rows(reader, QuoteRow::validate)?;
    let mut forward = None;
    for (i, r) in rows.iter().enumerate() {
        if let Some(f) = r.forward {
            match forward {
                None => forward = Some(f),
                Some(g) if (f - g).abs() > 1e-12 * g => {
                    return validation(format!("line {}: forward {f} differs from {g}", i + 2))
                }
                _ => {}
            }
        }
    }
    let curve = |side: Side| -> Result<PriceCurve> {
        let sel: Vec<&QuoteRow> = rows.iter().filter(|r| r.side == side).collect();
        let k: Vec<f64> = sel.iter().map(|r| r.strike).collect();
        let v = sel.iter().map(|r| r.value()).collect::<Result<Vec<f64>>>()?;
        let c = PriceCurve::new(&k, &v);
        if let Some(w) = c.quotes.windows(2).find(|w| w[0][0] == w[1][0]) {
            return validation(format!("duplicate {side:?} quote at strike {}", w[0][0]));
        }
        Ok(c)
    };
    Ok(QuoteFile { puts: curve(Side::Put)?, calls: curve(Side::Call)?, forward })
}

/// One day of FX smile pillars for a currency pair. Vols and rates are decimals; rates are
/// continuously compounded.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FxPillarRow {
    pub date: String,
    pub tenor: String,
    pub pair: String,
    pub atm_vol: f64,
    pub rr_10: f64,
    pub rr_25: f64,
    pub bf_10: f64,
    pub bf_25: f64,
    pub spot: f64,
    pub rate_domestic: f64,
    pub rate_foreign: f64,
}

/// Year fraction for tenors such as `1W`, `1M`, `3M`, `1Y`.
pub fn tenor_years(tenor: &str) -> Result<f64> {
    let t = tenor.trim().to_ascii_uppercase();
    let (num, unit) = t.split_at(t.len().saturating_sub(1));
    let n: f64 = num.parse().map_err(|_| Error::Validation(format!("unrecognized tenor {tenor:?}")))?;
    let per_year = match unit {
        "D" => 365.0,
        "W" => 52.0,
        "M" => 12.0,
        "Y" => 1.0,
        _ => return validation(format!("unrecognized tenor {tenor:?}")),
    };
    if !(n > 0.0) {
        return validation(format!("tenor must be positive, got {tenor:?}"));
    }
    Ok(n / per_year)
}

impl FxPillarRow {
    pub fn validate(&self) -> Result<()> {
        if !(self.atm_vol > 0.0) || !(self.spot > 0.0) {
            return validation(format!("{} {}: ATM vol and spot must be positive", self.date, self.pair));
        }
        tenor_years(&self.tenor)?;
        for (name, v) in self.pillar_vols() {
            if !(v > 0.0) {
                return validation(format!("{} {}: {name} vol {v} is not positive", self.date, self.pair));
            }
        }
        Ok(())
    }

    /// Fixed-delta vols: `σ_call = ATM + BF + RR/2`, `σ_put = ATM + BF - RR/2`.
    fn pillar_vols(&self) -> [(&'static str, f64); 5] {
        let (a, b10, b25, r10, r25) = (self.atm_vol, self.bf_10, self.bf_25, self.rr_10, self.rr_25);
        [
            ("10d put", a + b10 - 0.5 * r10),
            ("25d put", a + b25 - 0.5 * r25),
            ("atm", a),
            ("25d call", a + b25 + 0.5 * r25),
            ("10d call", a + b10 + 0.5 * r10),
        ]
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SmileQuote {
    pub label: String,
    pub strike: f64,
    pub vol: f64,
    pub side: Side,
    /// Price of the quoted option in domestic currency per unit of foreign.
    pub price: f64,
    /// Call price at the same strike via put-call parity.
    pub call_price: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FxSmile {
    pub date: String,
    pub pair: String,
    pub tenor: String,
    pub maturity: f64,
    pub spot: f64,
    pub forward: f64,
    pub gross_domestic: f64,
    pub quotes: Vec<SmileQuote>,
}

impl FxSmile {
    pub fn call_curve(&self) -> PriceCurve {
        let k: Vec<f64> = self.quotes.iter().map(|q| q.strike).collect();
        let c: Vec<f64> = self.quotes.iter().map(|q| q.call_price).collect();
        PriceCurve::new(&k, &c)
    }
}

/// Five strikes and prices from ATM/RR/BF pillars: 10Δ and 25Δ puts and calls under the
/// premium-included spot-delta convention, and the delta-neutral straddle ATM strike.
pub fn expand_fx_smile(p: &FxPillarRow) -> Result<FxSmile> {
    p.validate()?;
    let maturity = tenor_years(&p.tenor)?;
    let gk = |vol: f64| GkParams {
        spot: p.spot,
        rate_domestic: p.rate_domestic,
        rate_foreign: p.rate_foreign,
        vol,
        maturity,
    };
    let targets = [(-0.10, Side::Put), (-0.25, Side::Put), (0.0, Side::Call), (0.25, Side::Call), (0.10, Side::Call)];
    let mut quotes = Vec::with_capacity(5);
    for ((label, vol), (delta, side)) in p.pillar_vols().into_iter().zip(targets) {
        let params = gk(vol);
        let strike = if label == "atm" {
            atm_dns_strike(&params)
        } else {
            delta_to_strike(&params, delta, side).map_err(|e| match e {
                Error::Domain(m) => Error::Domain(format!("{} {} {label} at vol {vol}: {m}", p.date, p.pair)),
                e => e,
            })?
        };
        let price = gk_price(&params, strike, side);
        let call_price = gk_price(&params, strike, Side::Call);
        quotes.push(SmileQuote { label: label.to_string(), strike, vol, side, price, call_price });
    }
    if let Some(w) = quotes.windows(2).find(|w| w[0].strike >= w[1].strike) {
        return Err(Error::Numerical(format!(
            "{} {}: strikes not increasing ({} at {} vs {} at {})",
            p.date, p.pair, w[0].label, w[0].strike, w[1].label, w[1].strike
        )));
    }
    let g = gk(p.atm_vol);
    Ok(FxSmile {
        date: p.date.clone(),
        pair: p.pair.clone(),
        tenor: p.tenor.clone(),
        maturity,
        spot: p.spot,
        forward: g.forward(),
        gross_domestic: (p.rate_domestic * maturity).exp(),
        quotes,
    })
}

pub fn read_fx_pillars_csv(reader: impl Read) -> Result<Vec<FxPillarRow>> {
    read_rows(reader, FxPillarRow::validate)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::premium_adjusted_delta;

    fn row(strike: f64, side: Side, bid: f64, ask: f64) -> RawChainRow {
        RawChainRow {
            date: "2020-01-02".into(),
            expiry: "2020-02-21".into(),
            strike,
            side,
            bid,
            ask,
            underlying: 100.0,
            forward: Some(99.5),
        }
    }

    #[test]
    fn zero_bid_call_is_dropped() {
        let rows = vec![row(100.0, Side::Call, 2.0, 2.2), row(105.0, Side::Call, 0.0, 0.1), row(110.0, Side::Call, 0.3, 0.4)];
        let c = clean_chain(&rows).unwrap();
        assert_eq!(c[0].calls.strikes(), vec![100.0, 110.0]);
    }

    #[test]
    fn two_zero_bids_truncate() {
        let rows = vec![
            row(100.0, Side::Call, 2.0, 2.2),
            row(105.0, Side::Call, 0.0, 0.1),
            row(110.0, Side::Call, 0.0, 0.1),
            row(115.0, Side::Call, 0.2, 0.3),
            row(95.0, Side::Put, 1.0, 1.2),
            row(90.0, Side::Put, 0.0, 0.05),
            row(85.0, Side::Put, 0.0, 0.05),
            row(80.0, Side::Put, 0.1, 0.15),
        ];
        let c = clean_chain(&rows).unwrap();
        assert_eq!(c[0].calls.strikes(), vec![100.0]);
        assert_eq!(c[0].puts.strikes(), vec![95.0]);
    }

    #[test]
    fn mid_price() {
        let c = clean_chain(&[row(100.0, Side::Call, 1.0, 1.2)]).unwrap();
        assert!((c[0].calls.quotes[0][1] - 1.1).abs() < 1e-15);
    }

    #[test]
    fn in_the_money_dropped() {
        let rows = vec![row(90.0, Side::Call, 10.0, 10.5), row(110.0, Side::Put, 10.0, 10.5), row(110.0, Side::Call, 0.5, 0.6)];
        let c = clean_chain(&rows).unwrap();
        assert!(c[0].puts.quotes.is_empty());
        assert_eq!(c[0].calls.strikes(), vec![110.0]);
    }

    #[test]
    fn forward_from_parity() {
        // C - P = D (F - K) with D = 0.99, F = 101
        let (d, f) = (0.99, 101.0);
        let mut rows = Vec::new();
        for k in [95.0, 100.0, 105.0] {
            let p = 5.0 + 0.01 * k;
            let c = p + d * (f - k);
            let mut rc = row(k, Side::Call, c - 0.05, c + 0.05);
            let mut rp = row(k, Side::Put, p - 0.05, p + 0.05);
            rc.forward = None;
            rp.forward = None;
            rows.push(rc);
            rows.push(rp);
        }
        let c = clean_chain(&rows).unwrap();
        assert!((c[0].forward - f).abs() < 1e-10);
        assert!((c[0].discount.unwrap() - d).abs() < 1e-12);
        assert_eq!(c[0].calls.strikes(), vec![105.0]);
        assert_eq!(c[0].puts.strikes(), vec![95.0, 100.0]);
    }

    #[test]
    fn missing_forward_is_an_error() {
        let mut r = row(100.0, Side::Call, 1.0, 1.2);
        r.forward = None;
        let e = clean_chain(&[r]).unwrap_err();
        assert!(e.to_string().contains("forward column"));
    }

    #[test]
    fn invalid_rows_rejected() {
        assert!(clean_chain(&[row(100.0, Side::Call, 1.3, 1.2)]).is_err());
        assert!(clean_chain(&[row(-1.0, Side::Call, 1.0, 1.2)]).is_err());
    }

    #[test]
    fn csv_errors_carry_line_numbers() {
        let text = "date,expiry,strike,side,bid,ask,underlying,forward\n\
                    2020-01-02,2020-02-21,100,call,1,1.2,100,100\n\
                    2020-01-02,2020-02-21,abc,call,1,1.2,100,100\n";
        let e = read_chain_csv(text.as_bytes()).unwrap_err();
        assert!(e.to_string().contains("line 3"), "{e}");
        let text = "date,expiry,strike,side,bid,ask,underlying,forward\n\
                    2020-01-02,2020-02-21,100,call,1.5,1.2,100,\n";
        let e = read_chain_csv(text.as_bytes()).unwrap_err();
        assert!(e.to_string().contains("line 2"), "{e}");
    }

    fn pillars(rr: f64, bf: f64) -> FxPillarRow {
        FxPillarRow {
            date: "2020-01-02".into(),
            tenor: "3M".into(),
            pair: "EURUSD".into(),
            atm_vol: 0.08,
            rr_10: 1.8 * rr,
            rr_25: rr,
            bf_10: 3.0 * bf,
            bf_25: bf,
            spot: 1.12,
            rate_domestic: 0.015,
            rate_foreign: -0.005,
        }
    }

    #[test]
    fn flat_smile_uses_atm_vol() {
        let s = expand_fx_smile(&pillars(0.0, 0.0)).unwrap();
        assert!(s.quotes.iter().all(|q| q.vol == 0.08));
    }

    #[test]
    fn pillar_identities() {
        let s = expand_fx_smile(&pillars(0.01, 0.002)).unwrap();
        let v: Vec<f64> = s.quotes.iter().map(|q| q.vol).collect();
        let expect = [0.08 + 0.006 - 0.009, 0.08 + 0.002 - 0.005, 0.08, 0.08 + 0.002 + 0.005, 0.08 + 0.006 + 0.009];
        for (a, b) in v.iter().zip(expect) {
            assert!((a - b).abs() < 1e-15);
        }
    }

    #[test]
    fn deltas_round_trip() {
        let p = pillars(-0.012, 0.003);
        let s = expand_fx_smile(&p).unwrap();
        let targets = [-0.10, -0.25, f64::NAN, 0.25, 0.10];
        for (q, t) in s.quotes.iter().zip(targets) {
            if t.is_nan() {
                continue;
            }
            let g = GkParams { spot: p.spot, rate_domestic: p.rate_domestic, rate_foreign: p.rate_foreign, vol: q.vol, maturity: 0.25 };
            assert!((premium_adjusted_delta(&g, q.strike, q.side) - t).abs() < 1e-6);
        }
    }

    #[test]
    fn call_prices_satisfy_parity() {
        let s = expand_fx_smile(&pillars(0.01, 0.002)).unwrap();
        let df = 1.0 / s.gross_domestic;
        for q in s.quotes.iter().filter(|q| q.side == Side::Put) {
            assert!((q.call_price - q.price - df * (s.forward - q.strike)).abs() < 1e-12);
        }
    }

    #[test]
    fn unattainable_delta_reports_pillar() {
        let mut p = pillars(0.0, 0.0);
        p.atm_vol = 3.0;
        p.tenor = "5Y".into();
        match expand_fx_smile(&p) {
            Err(Error::Domain(m)) => assert!(m.contains("call"), "{m}"),
            other => panic!("expected a domain error, got {other:?}"),
        }
    }

    #[test]
    fn quote_files_accept_price_or_bid_ask() {
        let text = "strike,side,price,bid,ask,forward\n90,put,1.5,,,100\n110,call,,2,2.2,100\n";
        let q = read_quotes_csv(text.as_bytes()).unwrap();
        assert_eq!(q.forward, Some(100.0));
        assert_eq!(q.puts.quotes, vec![[90.0, 1.5]]);
        assert!((q.calls.quotes[0][1] - 2.1).abs() < 1e-15);
        let bad = "strike,side,price\n90,put,1.5\n95,put,\n";
        let e = read_quotes_csv(bad.as_bytes()).unwrap_err();
        assert!(e.to_string().contains("line 3"), "{e}");
    }

    #[test]
    fn cleaned_rows_read_back_as_quotes() {
        let rows = vec![row(95.0, Side::Put, 1.0, 1.2), row(105.0, Side::Call, 0.8, 1.0)];
        let c = clean_chain(&rows).unwrap();
        let mut buf = Vec::new();
        write_chain_csv(&c[0].to_rows(), &mut buf).unwrap();
        let q = read_quotes_csv(buf.as_slice()).unwrap();
        assert_eq!(q.forward, Some(99.5));
        assert_eq!(q.puts, c[0].puts);
        assert_eq!(q.calls, c[0].calls);
    }

    #[test]
    fn tenors() {
        assert_eq!(tenor_years("3M").unwrap(), 0.25);
        assert_eq!(tenor_years("1y").unwrap(), 1.0);
        assert!(tenor_years("3Q").is_err());
        assert!(tenor_years("M").is_err());
    }
}
