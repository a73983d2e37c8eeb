#![no_main]

use libfuzzer_sys::fuzz_target;
use pvafd_core::ingestion::PlantConfig;

fuzz_target!(|data: &[u8]| {
    if let Ok(text) = std::str::from_utf8(data) {
        if let Ok(config) = PlantConfig::from_toml_str(text) {
            assert_eq!(PlantConfig::from_toml_str(&config.to_toml_string()).unwrap(), config);
        }
    }
});
