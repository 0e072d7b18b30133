#![no_main]

use dualbasis::bench::ExperimentConfig;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    if let Ok(cfg) = ExperimentConfig::from_toml_str(text) {
        assert!(!cfg.sweep.is_empty());
        assert!(cfg.n > 0 && cfg.dim > 0);
    }
});
