#![no_main]

use hypermatch_core::{CostFn, MatchResult};
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    let cost = CostFn::Power { p: 2.0 };
    if let Ok(m) = MatchResult::from_csv(text, &cost) {
        let again = MatchResult::from_csv(&m.to_csv(), &cost).expect("re-parse");
        assert_eq!(again.pairs, m.pairs);
        assert_eq!(again.len(), m.len());
    }
});
