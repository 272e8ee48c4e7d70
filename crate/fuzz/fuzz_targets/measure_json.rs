#![no_main]

use libfuzzer_sys::fuzz_target;
use svm_robust::io::parse_measure;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    if let Ok(m) = parse_measure(text) {
        let s = serde_json::to_string(&m).unwrap();
        assert_eq!(parse_measure(&s).unwrap(), m);
        let _ = m.merged();
    }
});
