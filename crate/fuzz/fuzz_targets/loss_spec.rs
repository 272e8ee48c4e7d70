#![no_main]

use libfuzzer_sys::fuzz_target;
use svm_robust::Loss;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    if let Ok(loss) = text.parse::<Loss>() {
        let again: Loss = loss.to_string().parse().expect("display output must parse");
        assert_eq!(again, loss);
        assert!(loss.lipschitz().is_finite());
    }
});
