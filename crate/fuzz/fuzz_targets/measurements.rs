#![no_main]

use libfuzzer_sys::fuzz_target;
use pvafd_core::ingestion::{parse_measurements_reader, write_measurements, PlantConfig};

fuzz_target!(|data: &[u8]| {
    let config = PlantConfig::new("fuzz", 100.0);
    if let Ok(ingested) = parse_measurements_reader(data, &config) {
        let series = &ingested.series;
        assert!(series.records.windows(2).all(|w| w[0].timestamp < w[1].timestamp));
        let mut out = Vec::new();
        write_measurements(&mut out, series).unwrap();
        let again = parse_measurements_reader(out.as_slice(), &config).unwrap();
        assert_eq!(again.series.len(), series.len());
    }
});
