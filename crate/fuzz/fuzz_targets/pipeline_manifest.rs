#![no_main]

use libfuzzer_sys::fuzz_target;
use xapp_core::aiplane::PipelineManifest;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    if let Ok(m) = PipelineManifest::from_json(text) {
        let order = m.execution_order();
        assert_eq!(order.len(), m.vertices.len());
    }
});
