use std::fs;
use std::path::Path;
use std::process::Command;

use pvafd::{generate, run_manifest_file, Overrides, REPORT_JSON, RUN_LOG, RUN_MANIFEST, TABLE_CSV};
use pvafd_core::synthetic::{FaultSpec, PortfolioSpec};

fn small_spec(seed: u64) -> PortfolioSpec {
    PortfolioSpec {
        seed,
        plants: 3,
        days: 400,
        faults: FaultSpec {
            episodes_per_plant: 2,
            ..Default::default()
        },
        ..Default::default()
    }
}

fn listing(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut files: Vec<_> = fs::read_dir(dir)
        .unwrap()
        .map(|e| e.unwrap().path())
        .filter(|p| p.is_file())
        .map(|p| (p.file_name().unwrap().to_string_lossy().into_owned(), fs::read(&p).unwrap()))
        .collect();
    files.sort();
    files
}

#[test]
fn generate_is_reproducible() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    generate(&small_spec(5), a.path(), Some(1)).unwrap();
    generate(&small_spec(5), b.path(), Some(3)).unwrap();
    let (la, lb) = (listing(a.path()), listing(b.path()));
    assert_eq!(la.len(), 3 * 2 + 2);
    assert_eq!(la, lb);

    let c = tempfile::tempdir().unwrap();
    generate(&small_spec(6), c.path(), None).unwrap();
    assert_ne!(listing(c.path()), la);
}

#[test]
fn broken_plant_is_isolated() {
    let dir = tempfile::tempdir().unwrap();
    let ids = generate(&small_spec(9), dir.path(), None).unwrap();
    fs::write(dir.path().join(format!("{}.csv", ids[1])), "when,what\n1,2\n").unwrap();

    let output = run_manifest_file(&dir.path().join(RUN_MANIFEST), None, &Overrides::default()).unwrap();
    assert_eq!(output.reports.len(), 9);
    let failed: Vec<_> = output.log.plants.iter().filter(|p| p.error.is_some()).map(|p| p.plant_id.as_str()).collect();
    assert_eq!(failed, [ids[1].as_str()]);
    assert_eq!(output.log.plants.len(), 3);
    for report in &output.reports {
        assert!(report.specificity.is_some(), "{report:?}");
    }
    let results = dir.path().join("results");
    for f in [REPORT_JSON, TABLE_CSV, RUN_LOG] {
        assert!(results.join(f).is_file(), "{f}");
    }
}

#[test]
fn binary_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let spec_path = dir.path().join("portfolio.toml");
    fs::write(&spec_path, "seed = 4\nplants = 2\ndays = 400\n\n[faults]\nepisodes_per_plant = 2\n").unwrap();
    let exe = env!("CARGO_BIN_EXE_pvafd");
    let data = dir.path().join("data");

    let status = Command::new(exe)
        .env("RUST_LOG", "warn")
        .args(["generate", "--manifest"])
        .arg(&spec_path)
        .arg("--out")
        .arg(&data)
        .status()
        .unwrap();
    assert!(status.success());

    let status = Command::new(exe)
        .env("RUST_LOG", "warn")
        .args(["run", "--manifest"])
        .arg(data.join(RUN_MANIFEST))
        .args(["--lambda", "0.3", "--workers", "2"])
        .status()
        .unwrap();
    assert!(status.success());

    let out = Command::new(exe)
        .args(["report", "--format", "csv", "--out"])
        .arg(data.join("results"))
        .output()
        .unwrap();
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    assert_eq!(text.lines().count(), 10);

    let bad = dir.path().join("bad.toml");
    fs::write(&bad, "[[detectors]]\nanalysis = \"nope\"\n").unwrap();
    let out = Command::new(exe).args(["run", "--manifest"]).arg(&bad).output().unwrap();
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("detectors[0].analysis"));
}
