#![allow(dead_code)]

pub mod oracle;
pub mod scenarios;
pub mod sessions;

use std::path::PathBuf;

use twin_core::ScenarioDefinition;

pub fn fixtures_dir() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../fixtures")
}

pub fn fixture() -> ScenarioDefinition {
    let bytes =
        std::fs::read(fixtures_dir().join("electrical_lab.twin.json")).expect("fixture present");
    twin_core::load(&bytes).expect("fixture loads")
}

pub fn fixture_csv() -> String {
    std::fs::read_to_string(fixtures_dir().join("electrical_lab/run_data.csv"))
        .expect("fixture csv")
}

/// Column of the fixture CSV, parsed by hand.
pub fn csv_column(name: &str) -> Vec<f64> {
    let text = fixture_csv();
    let mut lines = text.lines();
    let header: Vec<&str> = lines.next().unwrap().split(',').collect();
    let idx = header.iter().position(|h| *h == name).expect("column");
    lines
        .filter(|l| !l.is_empty())
        .map(|l| l.split(',').nth(idx).unwrap().parse().unwrap())
        .collect()
}
