#![no_main]

use libfuzzer_sys::fuzz_target;
use xapp_core::store::ArtifactUri;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    if let Ok(uri) = ArtifactUri::parse(text) {
        assert_eq!(uri.to_string(), text);
    }
});
