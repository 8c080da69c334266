#![no_main]

use libfuzzer_sys::fuzz_target;
use xapp_core::pipeline::TrustCriteria;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    if let Ok(c) = TrustCriteria::from_json(text) {
        c.validate().expect("from_json only returns valid criteria");
    }
});
