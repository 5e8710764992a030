//! TOML configuration.
//!
//! One file may carry a `[scenario]` table for the integrated run and one
//! table per benchmark; anything missing takes its default. See
//! `configs/` for annotated examples.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::allocation::QosContract;
use crate::error::{Error, Result};
use crate::estimation::Scheme;
use crate::prediction::TrainingSpec;
use crate::sim::{GfConfig, Occupation};
use crate::traffic::{BetaBurstSpec, UniformSpec};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum TrafficSpec {
    Beta(BetaBurstSpec),
    Uniform(UniformSpec),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum AllocScheme {
    Adaptive,
    Fap,
    FipMin,
    FipIde,
}

impl AllocScheme {
    pub const ALL: [AllocScheme; 4] = [AllocScheme::Adaptive, AllocScheme::Fap, AllocScheme::FipMin, AllocScheme::FipIde];

    pub fn name(&self) -> &'static str {
        match self {
            AllocScheme::Adaptive => "adaptive",
            AllocScheme::Fap => "fap",
            AllocScheme::FipMin => "fip-min",
            AllocScheme::FipIde => "fip-ide",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PredictorKind {
    Arima,
    Masw,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Contracts {
    pub a: QosContract,
    pub b: QosContract,
}

impl Default for Contracts {
    /// Bursty: 99.999 %. Uniform: 99 % minimum, 99.999 % ideal.
    fn default() -> Self {
        Self {
            a: QosContract::new(0.99999),
            b: QosContract::new(0.99).with_ideal(0.99999).with_priority(1),
        }
    }
}

/// Model order and training data of the deployed ARIMA predictor.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ArimaConfig {
    pub p: usize,
    pub d: usize,
    pub q: usize,
    pub training: TrainingSpec,
    pub training_seed: u64,
}

impl Default for ArimaConfig {
    fn default() -> Self {
        Self {
            p: 0,
            d: 2,
            q: 3,
            training: TrainingSpec::default(),
            training_seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ScenarioConfig {
    pub name: String,
    /// `w` is ignored; the allocator splits `w_all` every cycle.
    pub gf: GfConfig,
    pub w_all: u32,
    pub traffic_a: TrafficSpec,
    /// Cycle in which the first burst arrivals appear.
    pub burst_start_cycle: usize,
    pub traffic_b: UniformSpec,
    pub contracts: Contracts,
    pub scheme: AllocScheme,
    pub estimator: Scheme,
    pub predictor: PredictorKind,
    pub masw_window: usize,
    pub arima: ArimaConfig,
    /// Refit ARIMA on each event's own history every this many cycles;
    /// coefficients stay frozen when unset.
    pub refit_every: Option<usize>,
    pub seed: u64,
    pub trials: usize,
    /// Cycles with uniform arrivals; the run then drains both backlogs.
    pub cycles: usize,
    pub delay_truncation_ms: f64,
    pub idle_floor: u32,
    pub ccdf_max_ms: f64,
    pub ccdf_step_ms: f64,
}

impl Default for ScenarioConfig {
    /// Setup 1 of the integrated experiment.
    fn default() -> Self {
        let gf = GfConfig::reference();
        Self {
            name: "setup1".into(),
            gf,
            w_all: 48,
            traffic_a: TrafficSpec::Beta(BetaBurstSpec::standard(50, 12.5, gf.scheduling_cycle_ms())),
            burst_start_cycle: 5,
            traffic_b: UniformSpec { users_per_cycle: 10 },
            contracts: Contracts::default(),
            scheme: AllocScheme::Adaptive,
            estimator: Scheme::SsMlLs,
            predictor: PredictorKind::Arima,
            masw_window: 3,
            arima: ArimaConfig::default(),
            refit_every: None,
            seed: 1,
            trials: 200,
            cycles: 20,
            delay_truncation_ms: 10.0,
            idle_floor: crate::allocation::DEFAULT_IDLE_FLOOR,
            ccdf_max_ms: 5.0,
            ccdf_step_ms: 0.0625,
        }
    }
}

impl ScenarioConfig {
    /// Setup 2: 18 uniform users per cycle, 25 bursty users over 10 cycles.
    pub fn setup2() -> Self {
        let base = Self::default();
        Self {
            name: "setup2".into(),
            traffic_a: TrafficSpec::Beta(BetaBurstSpec::standard(25, 12.5, base.gf.scheduling_cycle_ms())),
            traffic_b: UniformSpec { users_per_cycle: 18 },
            ..base
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.gf.validate_shape()?;
        if self.w_all == 0 {
            return Err(Error::InvalidConfig("w_all must be at least 1".into()));
        }
        if self.trials == 0 {
            return Err(Error::InvalidConfig("trials must be at least 1".into()));
        }
        if !(self.delay_truncation_ms.is_finite() && self.delay_truncation_ms > 0.0) {
            return Err(Error::InvalidConfig("delay_truncation_ms must be positive".into()));
        }
        if !(self.ccdf_step_ms > 0.0 && self.ccdf_max_ms >= 0.0) {
            return Err(Error::InvalidConfig("CCDF grid needs a positive step".into()));
        }
        if self.refit_every == Some(0) {
            return Err(Error::InvalidConfig("refit_every must be at least 1".into()));
        }
        if self.masw_window == 0 {
            return Err(Error::InvalidConfig("masw_window must be at least 1".into()));
        }
        if let TrafficSpec::Beta(b) = &self.traffic_a {
            b.validate()?;
        }
        self.contracts.a.validate()?;
        self.contracts.b.validate()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EstimationBenchConfig {
    pub w: u32,
    pub t_slots: u32,
    pub k: u32,
    pub n_min: u32,
    pub n_max: u32,
    pub trials: usize,
    pub schemes: Vec<Scheme>,
    pub seed: u64,
}

impl Default for EstimationBenchConfig {
    fn default() -> Self {
        Self {
            w: 20,
            t_slots: 8,
            k: 8,
            n_min: 8,
            n_max: 18,
            trials: 10_000,
            schemes: Scheme::ALL.to_vec(),
            seed: 1,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct FailprobBenchConfig {
    pub n: u32,
    pub t_slots: u32,
    pub ks: Vec<u32>,
    pub w_min: u32,
    pub w_max: u32,
    /// Monte Carlo cycles per grid point.
    pub cycles: usize,
    pub variants: Vec<Occupation>,
    pub seed: u64,
}

impl Default for FailprobBenchConfig {
    fn default() -> Self {
        Self {
            n: 10,
            t_slots: 8,
            ks: vec![2, 4, 8],
            w_min: 7,
            w_max: 33,
            cycles: 1_000_000,
            variants: vec![Occupation::Adjacent, Occupation::Arbitrary],
            seed: 1,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PredictionBenchConfig {
    pub gf: GfConfig,
    pub uniform: UniformSpec,
    pub burst: BetaBurstSpec,
    pub burst_start_ms: f64,
    pub horizon_ms: f64,
    pub replications: usize,
    pub masw_window: usize,
    pub estimator: Scheme,
    pub arima: ArimaConfig,
    pub seed: u64,
}

impl Default for PredictionBenchConfig {
    fn default() -> Self {
        let gf = GfConfig::reference();
        Self {
            gf,
            uniform: UniformSpec { users_per_cycle: 10 },
            burst: BetaBurstSpec::standard(80, 15.0, gf.scheduling_cycle_ms()),
            burst_start_ms: 10.0,
            horizon_ms: 40.0,
            replications: 50,
            masw_window: 3,
            estimator: Scheme::SsMlLs,
            arima: ArimaConfig::default(),
            seed: 1,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DiagnosticsBenchConfig {
    pub training: TrainingSpec,
    pub regenerations: usize,
    pub p_max: usize,
    pub q_max: usize,
    pub d: usize,
    pub seed: u64,
}

impl Default for DiagnosticsBenchConfig {
    fn default() -> Self {
        Self {
            training: TrainingSpec::default(),
            regenerations: 20,
            p_max: 3,
            q_max: 3,
            d: 2,
            seed: 1,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct NegotiationConfig {
    pub gf: GfConfig,
    pub w_a: u32,
    pub w_b: u32,
    pub pred_a: f64,
    pub pred_b: f64,
    pub contracts: Contracts,
    /// Second pair of floors evaluated on the same curve.
    pub strict_contracts: Contracts,
    /// Calibration scan: budget split between the two events, largest
    /// user count tried and the δ searched for.
    pub scan_w_all: u32,
    pub scan_n_max: u32,
    pub target_delta: f64,
}

impl Default for NegotiationConfig {
    fn default() -> Self {
        Self {
            gf: GfConfig::reference(),
            w_a: 30,
            w_b: 18,
            pred_a: 6.0,
            pred_b: 10.0,
            contracts: Contracts {
                a: QosContract::new(0.99),
                b: QosContract::new(0.99999),
            },
            strict_contracts: Contracts {
                a: QosContract::new(0.9999),
                b: QosContract::new(0.99999),
            },
            scan_w_all: 48,
            scan_n_max: 20,
            target_delta: 0.55,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TableCacheConfig {
    /// Single-slot tables are built to `4W` users.
    pub single_slot_w: Vec<u32>,
    /// `(w, t, k)` of whole-cycle tables, built to `max(3W, 2⌈2WT/K⌉)`.
    pub whole_cycle: Vec<(u32, u32, u32)>,
}

impl Default for TableCacheConfig {
    fn default() -> Self {
        Self {
            single_slot_w: vec![20],
            whole_cycle: vec![(20, 8, 8)],
        }
    }
}

/// Everything a config file may contain.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default)]
pub struct Config {
    /// Directory of prebuilt Markov tables; tables are built in memory
    /// when unset.
    pub cache_dir: Option<PathBuf>,
    pub scenario: ScenarioConfig,
    pub estimation: EstimationBenchConfig,
    pub failprob: FailprobBenchConfig,
    pub prediction: PredictionBenchConfig,
    pub diagnostics: DiagnosticsBenchConfig,
    pub negotiation: NegotiationConfig,
    pub tables: TableCacheConfig,
}

impl Config {
    pub fn from_toml_str(text: &str, path: &Path) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Parse {
            path: path.to_path_buf(),
            reason: e.to_string(),
        })
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml_str(&text, path)
    }
}
