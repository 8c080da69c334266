#![no_main]

use libfuzzer_sys::fuzz_target;
use xapp_core::aiplane::{PoolConfig, ResourcePool};

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    if let Ok(cfg) = PoolConfig::from_json(text) {
        assert!(ResourcePool::from_config(&cfg).is_conserved());
    }
});
