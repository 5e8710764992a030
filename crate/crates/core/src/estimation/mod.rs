//! Load estimation from the RB states of one scheduling cycle.

pub mod baselines;
pub mod cache;
pub mod markov;
pub mod ml;
pub mod starts;

use serde::{Deserialize, Serialize};

pub use baselines::{isce, isce_with_cap, msem, MsemWindow};
pub use cache::TableStore;
pub use markov::{
    build_single_slot_model, build_whole_cycle_model, MarkovModel, ModelVariant, RbState, StepProbTable,
};
pub use ml::{ml_slot_count, ms_mld, ms_mli, ms_mli_with_cap, ss_ml_ls, MlPoint};
pub use starts::{
    design_matrix, enumerate_start_vectors, load_from_starts, solve_starts, start_vector_pmf, LoadVector,
    StartVector,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Scheme {
    SsMlLs,
    MsMli,
    MsMld,
    Msem,
    Isce,
}

impl Scheme {
    pub const ALL: [Scheme; 5] = [Scheme::SsMlLs, Scheme::MsMli, Scheme::MsMld, Scheme::Msem, Scheme::Isce];

    pub fn name(&self) -> &'static str {
        match self {
            Scheme::SsMlLs => "ss-ml-ls",
            Scheme::MsMli => "ms-mli",
            Scheme::MsMld => "ms-mld",
            Scheme::Msem => "msem",
            Scheme::Isce => "isce",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EstimateReport {
    pub scheme: Scheme,
    pub n_hat: u32,
    /// Unrounded estimate (equal to `n_hat` for the ML schemes).
    pub n_hat_real: f64,
    pub per_slot: Option<Vec<f64>>,
    pub start_vector: Option<Vec<f64>>,
    pub windows: Vec<MsemWindow>,
    pub log_likelihood: Option<f64>,
}

/// Default upper end of an `N` scan over `w` RBs with lower bound `lo`.
pub fn default_upper(w: u32, lo: u32) -> u32 {
    (3 * w).max(2 * lo)
}

/// Table size that covers every single-slot observation on `w` RBs.
pub fn single_slot_n_max(w: u32) -> u32 {
    4 * w
}

/// Table size that covers every whole-cycle observation.
pub fn whole_cycle_n_max(w: u32, t: u32, k: u32) -> u32 {
    default_upper(w, (2 * w * t).div_ceil(k.max(1)))
}

/// Runs `scheme` on one cycle, fetching the Markov table it needs from
/// `tables`.
pub fn estimate(
    scheme: Scheme,
    obs: &crate::sim::CycleObservation,
    cfg: &crate::sim::GfConfig,
    tables: &TableStore,
) -> crate::Result<EstimateReport> {
    match scheme {
        Scheme::SsMlLs => ss_ml_ls(obs, cfg, &*tables.single_slot(cfg.w, single_slot_n_max(cfg.w))?),
        Scheme::MsMli => ms_mli(obs, cfg, &*tables.single_slot(cfg.w, single_slot_n_max(cfg.w))?, None),
        Scheme::MsMld => {
            let n_max = whole_cycle_n_max(cfg.w, cfg.t_slots, cfg.k);
            ms_mld(obs, cfg, &*tables.whole_cycle(cfg.w, cfg.t_slots, cfg.k, n_max)?, None)
        }
        Scheme::Msem => msem(obs, cfg),
        Scheme::Isce => isce(obs, cfg),
    }
}
