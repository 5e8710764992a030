//! Experiment drivers: configuration, the integrated scenario, benchmarks
//! and output files.

pub mod bench;
pub mod config;
pub mod emit;
pub mod metrics;
pub mod scenario;

use std::path::{Path, PathBuf};

pub use config::{AllocScheme, Config, PredictorKind, ScenarioConfig, TrafficSpec};
pub use emit::Format;
pub use scenario::{run_scenario, CycleRecord, RunReport, RunSummary};

use crate::error::Result;
use crate::estimation::cache::cache_file_name;
use crate::estimation::{single_slot_n_max, whole_cycle_n_max, ModelVariant, TableStore};

/// Version of every JSON document the harness writes.
pub const SCHEMA_VERSION: u32 = 1;

/// Builds every table listed in `cfg` into `dir` (reusing valid files) and
/// returns their paths.
pub fn build_table_cache(cfg: &config::TableCacheConfig, dir: &Path) -> Result<Vec<PathBuf>> {
    let store = TableStore::with_dir(dir);
    let mut paths = Vec::new();
    for &w in &cfg.single_slot_w {
        let n_max = single_slot_n_max(w);
        store.single_slot(w, n_max)?;
        paths.push(dir.join(cache_file_name(ModelVariant::SingleSlot { w }, n_max)));
    }
    for &(w, t, k) in &cfg.whole_cycle {
        let n_max = whole_cycle_n_max(w, t, k);
        store.whole_cycle(w, t, k, n_max)?;
        paths.push(dir.join(cache_file_name(ModelVariant::WholeCycle { w, t, k }, n_max)));
    }
    Ok(paths)
}
