#![no_main]

use hypermatch::plot::emit_plots;
use hypermatch::RunRecord;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    if let Ok(r) = RunRecord::from_json(text) {
        for t in &r.tables {
            let _ = t.to_csv();
        }
        let _ = emit_plots(&r);
    }
});
