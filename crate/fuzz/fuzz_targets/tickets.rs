#![no_main]

use libfuzzer_sys::fuzz_target;
use pvafd_core::ingestion::{parse_tickets_reader, write_tickets};

fuzz_target!(|data: &[u8]| {
    if let Ok(book) = parse_tickets_reader(data) {
        let mut out = Vec::new();
        write_tickets(&mut out, &book).unwrap();
        assert_eq!(parse_tickets_reader(out.as_slice()).unwrap(), book);
    }
});
