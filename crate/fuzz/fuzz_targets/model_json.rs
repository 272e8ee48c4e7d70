#![no_main]

use libfuzzer_sys::fuzz_target;
use svm_robust::io::parse_model;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    if let Ok(model) = parse_model(text) {
        let s = serde_json::to_string(&model).unwrap();
        let again = parse_model(&s).unwrap();
        assert_eq!(serde_json::to_string(&again).unwrap(), s);
        if let Some(x) = model.function.support().first() {
            let _ = model.predict(x);
        }
    }
});
