#![no_main]

use ckn_lab::config::parse_config;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    if let Ok(text) = std::str::from_utf8(data) {
        if let Ok(cfg) = parse_config(text) {
            // a parsed file overlaid on itself is unchanged
            assert_eq!(cfg.clone().overlay(cfg.clone()), cfg);
        }
    }
});
