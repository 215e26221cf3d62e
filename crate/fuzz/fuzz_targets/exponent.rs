#![no_main]
use libfuzzer_sys::fuzz_target;

use timoshenko_core::littlewood_paley::parse_exponent;

fuzz_target!(|data: &str| {
    if let Ok(p) = parse_exponent(data) {
        assert!(p >= 1.0);
        let text = if p.is_infinite() { "inf".to_string() } else { p.to_string() };
        assert_eq!(parse_exponent(&text).unwrap(), p);
    }
});
