#![no_main]

use libfuzzer_sys::fuzz_target;
use svm_robust::io::parse_csv;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    if let Ok(rows) = parse_csv(text) {
        assert!(!rows.is_empty());
        let d = rows[0].x.len();
        assert!(rows.iter().all(|a| a.x.len() == d && a.y.is_finite()));
    }
});
