//! Shared setup for the criterion benchmarks in benches/.

use std::path::PathBuf;

use lumen_core::driver::config::RunConfig;

/// Loads a configuration from the repository's fixtures directory.
pub fn fixture(name: &str) -> RunConfig {
    let path = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../fixtures").join(name);
    RunConfig::load(&path).expect("fixture")
}
