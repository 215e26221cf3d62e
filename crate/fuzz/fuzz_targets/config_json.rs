#![no_main]
use libfuzzer_sys::fuzz_target;

use timoshenko_core::harness::{EvolveConfig, ExperimentConfig};

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else {
        return;
    };
    if let Ok(cfg) = ExperimentConfig::from_json(text) {
        assert!(cfg.validate().is_ok());
        let _ = cfg.tolerances();
    }
    if let Ok(cfg) = EvolveConfig::from_json(text) {
        let _ = cfg.times_from_zero();
    }
});
