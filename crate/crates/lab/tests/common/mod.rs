#![allow(dead_code)]

use std::path::{Path, PathBuf};

use chnls_lab::RunConfig;

pub fn fixture(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("tests/fixtures")
        .join(name)
}

/// Short single-soliton run on a 2048-point grid, writing into `dir`.
pub fn small_single(dir: &Path) -> RunConfig {
    let mut config = RunConfig::load(&fixture("small_single.json")).unwrap();
    config.output_dir = dir.to_path_buf();
    config
}
