#![no_main]

use libfuzzer_sys::fuzz_target;
use svm_robust::io::{parse_report, report_to_csv};

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    if let Ok(report) = parse_report(text) {
        let csv = report_to_csv(&report);
        assert_eq!(csv.lines().count(), 1 + report.cells.len());
    }
});
