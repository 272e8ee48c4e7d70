#![no_main]

use libfuzzer_sys::fuzz_target;
use svm_robust::config::{config_to_toml, parse_config_str};

fuzz_target!(|data: &[u8]| {
    let input = String::from_utf8_lossy(data);
    if let Ok(cfg) = parse_config_str(&input) {
        let text = config_to_toml(&cfg).expect("validated config must serialize");
        let again = parse_config_str(&text).expect("serialized config must parse");
        assert_eq!(again, cfg);
    }
});
