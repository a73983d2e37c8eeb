#![no_main]

use libfuzzer_sys::fuzz_target;
use pvafd_core::models::ModelDocument;

fuzz_target!(|data: &[u8]| {
    if let Ok(text) = std::str::from_utf8(data) {
        if let Ok(doc) = ModelDocument::from_toml_str(text) {
            assert_eq!(ModelDocument::from_toml_str(&doc.to_toml_string()).unwrap(), doc);
        }
    }
});
