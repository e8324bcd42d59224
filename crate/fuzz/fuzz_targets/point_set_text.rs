#![no_main]

use hypermatch_core::PointSet;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    if let Ok(p) = PointSet::from_text(text) {
        // Printed coordinates round-trip exactly.
        let again = PointSet::from_text(&p.to_text()).expect("re-parse");
        assert_eq!(again.coords(), p.coords());
        assert_eq!(again.window(), p.window());
    }
});
