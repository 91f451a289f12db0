#![no_main]

use ckn_lab::params::ParamSet;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    if let Ok(text) = std::str::from_utf8(data) {
        if let Ok(ps) = ParamSet::from_json(text) {
            assert_eq!(ParamSet::from_json(&ps.to_json()).unwrap(), ps);
        }
    }
});
