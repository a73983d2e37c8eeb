#![no_main]

use libfuzzer_sys::fuzz_target;
use pvafd_core::synthetic::PortfolioSpec;

fuzz_target!(|data: &[u8]| {
    if let Ok(text) = std::str::from_utf8(data) {
        let _ = PortfolioSpec::from_toml_str(text);
    }
});
