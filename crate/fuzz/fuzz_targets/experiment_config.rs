#![no_main]

use hypermatch::ExperimentConfig;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    // Configurations are validated on load; none should panic.
    if let Ok(cfg) = ExperimentConfig::from_toml(text, &[]) {
        let _ = cfg.hash();
        let _ = cfg.windows();
    }
});
