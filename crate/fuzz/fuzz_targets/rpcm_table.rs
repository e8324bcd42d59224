#![no_main]

use hypermatch_core::RpcmModel;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    if let Ok(m) = RpcmModel::parse_table(text) {
        let x = vec![0.5; m.dim()];
        let _ = m.density(&x);
        let _ = m.structure_factor(&x);
    }
});
