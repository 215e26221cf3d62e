#![no_main]
use libfuzzer_sys::fuzz_target;

use timoshenko_core::io::{read_field_csv, read_field_csv_infer, write_field_csv};

fuzz_target!(|data: &[u8]| {
    if let Ok(field) = read_field_csv_infer(data) {
        let mut buf = Vec::new();
        write_field_csv(&mut buf, &field).expect("writing a parsed field");
        let back = read_field_csv(buf.as_slice(), field.grid()).expect("re-reading a written field");
        assert_eq!(back, field);
    }
});
