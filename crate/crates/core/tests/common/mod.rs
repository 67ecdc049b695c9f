#![allow(dead_code)]

use agq::corpus::ItemBank;
use agq::gateway::MockScript;

pub const BANK: &str = include_str!("../../fixtures/bank.json");
pub const SCRIPT: &str = include_str!("../../fixtures/mock_script.json");

pub fn bank() -> ItemBank {
    ItemBank::from_json(BANK, "fixtures/bank.json").unwrap()
}

pub fn script() -> MockScript {
    serde_json::from_str(SCRIPT).unwrap()
}

pub fn fixture(name: &str) -> std::path::PathBuf {
    std::path::Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("fixtures")
        .join(name)
}
