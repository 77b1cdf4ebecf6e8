use proptest::prelude::*;
use rnproj::ingest::{clean_chain, expand_fx_smile, FxPillarRow, RawChainRow};
use rnproj::models::Side;

fn chain() -> impl Strategy<Value = Vec<RawChainRow>> {
    let quote = (60u32..140, any::<bool>(), prop_oneof![Just(0.0), 0.01f64..5.0], 0.0f64..0.5);
    (prop::collection::vec(quote, 1..40), 80.0f64..120.0, 0usize..3).prop_map(|(qs, fwd, n_exp)| {
        let mut seen = std::collections::HashSet::new();
        qs.into_iter()
            .enumerate()
            .filter(|(_, (k, call, _, _))| seen.insert((*k, *call)))
            .map(|(i, (k, call, bid, spread))| RawChainRow {
                date: "2021-03-01".into(),
                expiry: format!("2021-0{}-19", 4 + (i % (n_exp + 1))),
                strike: k as f64,
                side: if call { Side::Call } else { Side::Put },
                bid,
                ask: bid + spread,
                underlying: 100.0,
                forward: Some(fwd),
            })
            .collect()
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn cleaning_is_idempotent(rows in chain()) {
        let once = clean_chain(&rows).unwrap();
        let flat: Vec<RawChainRow> = once.iter().flat_map(|c| c.to_rows()).collect();
        let twice = clean_chain(&flat).unwrap();
        // groups left empty by the first pass have no rows to reappear from
        let nonempty: Vec<_> = once.into_iter().filter(|c| !c.puts.quotes.is_empty() || !c.calls.quotes.is_empty()).collect();
        prop_assert_eq!(twice, nonempty);
    }

    #[test]
    fn cleaned_quotes_are_out_of_the_money_with_positive_bids(rows in chain()) {
        for c in clean_chain(&rows).unwrap() {
            prop_assert!(c.puts.quotes.iter().all(|q| q[0] <= c.forward && q[1] > 0.0));
            prop_assert!(c.calls.quotes.iter().all(|q| q[0] > c.forward && q[1] > 0.0));
        }
    }

    #[test]
    fn smile_strikes_increase(
        atm in 0.03f64..0.3,
        rr25 in -0.25f64..0.25,
        bf25 in 0.0f64..0.08,
        tenor in prop::sample::select(vec!["1W", "1M", "3M", "6M", "1Y"]),
        rd in -0.01f64..0.06,
        rf in -0.01f64..0.06,
    ) {
        let p = FxPillarRow {
            date: "2021-03-01".into(),
            tenor: tenor.into(),
            pair: "EURUSD".into(),
            atm_vol: atm,
            rr_25: rr25 * atm,
            rr_10: 1.8 * rr25 * atm,
            bf_25: bf25 * atm,
            bf_10: 3.0 * bf25 * atm,
            spot: 1.2,
            rate_domestic: rd,
            rate_foreign: rf,
        };
        let s = expand_fx_smile(&p).unwrap();
        prop_assert!(s.quotes.windows(2).all(|w| w[0].strike < w[1].strike));
        prop_assert!(s.quotes.iter().all(|q| q.price > 0.0 && q.call_price > 0.0));
    }
}
