#![no_main]

use libfuzzer_sys::fuzz_target;
use svm_robust::io::parse_line_measure;
use svm_robust::prokhorov::prokhorov_1d_weighted;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    if let Ok(m) = parse_line_measure(text) {
        let d = prokhorov_1d_weighted(&m.points, &m.weights, &m.points, &m.weights);
        assert_eq!(d, 0.0);
    }
});
