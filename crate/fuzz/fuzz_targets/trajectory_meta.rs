#![no_main]
use libfuzzer_sys::fuzz_target;

use timoshenko_core::io::TrajectoryMeta;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else {
        return;
    };
    if let Ok(meta) = TrajectoryMeta::from_json(text) {
        assert_eq!(meta.times.len(), meta.files.len());
        assert!(meta.files.iter().all(|f| !f.contains('/')));
        let again = serde_json::to_string(&meta).unwrap();
        assert_eq!(TrajectoryMeta::from_json(&again).unwrap(), meta);
    }
});
