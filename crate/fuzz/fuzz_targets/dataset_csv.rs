#![no_main]

use libfuzzer_sys::fuzz_target;
use xapp_core::Dataset;

fuzz_target!(|data: &[u8]| {
    if let Ok(ds) = Dataset::read_csv(data) {
        let canonical = ds.to_csv_bytes();
        let again = Dataset::read_csv(canonical.as_slice()).expect("canonical CSV parses");
        assert_eq!(again.to_csv_bytes(), canonical);
    }
});
