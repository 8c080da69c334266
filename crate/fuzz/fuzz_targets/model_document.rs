#![no_main]

use libfuzzer_sys::fuzz_target;
use xapp_core::model::{load_model, save_model};

fuzz_target!(|data: &[u8]| {
    if let Ok((model, norm, meta)) = load_model(data) {
        let bytes = save_model(&model, &norm, meta.clone());
        let (m2, n2, _) = load_model(&bytes).expect("saved document loads");
        assert_eq!(m2, model);
        assert_eq!(n2, norm);
    }
});
