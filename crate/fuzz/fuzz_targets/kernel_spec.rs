#![no_main]

use libfuzzer_sys::fuzz_target;
use svm_robust::Kernel;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    if let Ok(kernel) = text.parse::<Kernel>() {
        let again: Kernel = kernel.to_string().parse().expect("display output must parse");
        assert_eq!(again, kernel);
        let _ = kernel.eval(&[0.5, -0.25], &[0.0, 1.0]);
    }
});
