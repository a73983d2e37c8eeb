#![no_main]

use libfuzzer_sys::fuzz_target;
use pvafd::RunManifest;

fuzz_target!(|data: &[u8]| {
    if let Ok(text) = std::str::from_utf8(data) {
        if let Ok(manifest) = RunManifest::from_toml_str(text) {
            RunManifest::from_toml_str(&manifest.to_toml_string()).unwrap();
        }
    }
});
