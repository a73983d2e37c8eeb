#![no_main]

use libfuzzer_sys::fuzz_target;
use pvafd_core::ingestion::{format_timestamp, parse_timestamp};

fuzz_target!(|data: &[u8]| {
    if let Ok(text) = std::str::from_utf8(data) {
        if let Some(ts) = parse_timestamp(text) {
            assert_eq!(parse_timestamp(&format_timestamp(&ts)), Some(ts));
        }
    }
});
