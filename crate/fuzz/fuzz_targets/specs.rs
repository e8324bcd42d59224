#![no_main]

use hypermatch_core::fmt::parse_f64;
use hypermatch_core::{CostFn, ProcessSpec};
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    if let Ok(p) = text.parse::<ProcessSpec>() {
        assert_eq!(p.to_string().parse::<ProcessSpec>().ok(), Some(p));
    }
    if let Ok(c) = text.parse::<CostFn>() {
        let _ = c.eval(1.5);
    }
    let _ = parse_f64(text);
});
