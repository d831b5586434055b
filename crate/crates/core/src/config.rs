//! Simulation configuration.
//!
//! Configs are flat TOML documents with one table per concern:
//!
//! ```toml
//! [network]
//! num_aps = 50
//! num_users = 15
//! # ...
//! [network.path_loss]
//! d0 = 10.0
//! d1 = 50.0
//! l_const_db = 140.7
//!
//! [clustering]
//! threshold = 0.9
//! linkage = "average"
//!
//! [solver]
//! lambda = 20.0
//!
//! [sinr]
//! denominator = "serving"
//! ```
//!
//! Every field has a default, so an empty file is a valid config. `SimConfig::to_toml`
//! prints the fully resolved form.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Boltzmann constant times 290 K, in dBm/Hz.
const THERMAL_NOISE_DBM_PER_HZ: f64 = -174.0;

/// Thermal noise power in watts for a receiver bandwidth and noise figure.
pub fn thermal_noise_power(bandwidth_hz: f64, noise_figure_db: f64) -> f64 {
    let dbm = THERMAL_NOISE_DBM_PER_HZ + 10.0 * bandwidth_hz.log10() + noise_figure_db;
    10f64.powf((dbm - 30.0) / 10.0)
}

/// Three-slope path-loss constants.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PathLossParams {
    /// First breakpoint (m). Path loss is flat below it.
    pub d0: f64,
    /// Second breakpoint (m). Shadowing only applies beyond it.
    pub d1: f64,
    /// Loss constant in dB.
    pub l_const_db: f64,
}

impl Default for PathLossParams {
    fn default() -> Self {
        Self {
            d0: 10.0,
            d1: 50.0,
            l_const_db: 140.7,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PilotMode {
    /// Each user draws a pilot uniformly with replacement.
    Random,
    /// Each user draws uniformly among the least-used pilots so far; no reuse when K <= tau_p.
    Distinct,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NetworkConfig {
    pub num_aps: usize,
    pub num_users: usize,
    pub antennas_per_ap: usize,
    /// Side of the square deployment area (m).
    pub area_side: f64,
    /// Coherence block length in symbols.
    pub coherence_block: usize,
    /// Pilot length in symbols; also the number of orthogonal pilots.
    pub pilot_length: usize,
    /// Receiver noise power (W).
    pub noise_power: f64,
    /// Log-normal shadowing standard deviation (dB).
    pub shadowing_std_db: f64,
    pub path_loss: PathLossParams,
    /// Per-user pilot power budget (W).
    pub max_pilot_power: f64,
    /// Per-user data power (W).
    pub max_data_power: f64,
    /// Pilot power floor (W).
    pub min_pilot_power: f64,
    pub pilot_assignment: PilotMode,
}

impl Default for NetworkConfig {
    fn default() -> Self {
        Self {
            num_aps: 50,
            num_users: 15,
            antennas_per_ap: 1,
            area_side: 500.0,
            coherence_block: 200,
            pilot_length: 10,
            noise_power: thermal_noise_power(20e6, 9.0),
            shadowing_std_db: 8.0,
            path_loss: PathLossParams::default(),
            max_pilot_power: 0.1,
            max_data_power: 0.1,
            min_pilot_power: 1e-3,
            pilot_assignment: PilotMode::Random,
        }
    }
}

impl NetworkConfig {
    pub fn validate(&self) -> Result<()> {
        let fail = |msg: String| Err(Error::InvalidConfig(msg));
        if self.num_aps == 0 || self.num_users == 0 || self.antennas_per_ap == 0 {
            return fail("num_aps, num_users and antennas_per_ap must be >= 1".into());
        }
        if self.pilot_length == 0 || self.pilot_length > self.coherence_block {
            return fail(format!(
                "need 1 <= pilot_length <= coherence_block, got {} and {}",
                self.pilot_length, self.coherence_block
            ));
        }
        if !(self.min_pilot_power > 0.0 && self.min_pilot_power <= self.max_pilot_power) {
            return fail(format!(
                "need 0 < min_pilot_power <= max_pilot_power, got {} and {}",
                self.min_pilot_power, self.max_pilot_power
            ));
        }
        if !(self.max_data_power >= 0.0 && self.max_data_power.is_finite()) {
            return fail(format!("max_data_power must be finite and >= 0, got {}", self.max_data_power));
        }
        let pl = &self.path_loss;
        if !(pl.d0 > 0.0 && pl.d0 < pl.d1 && pl.d1 < self.area_side) {
            return fail(format!(
                "need 0 < d0 < d1 < area_side, got {} / {} / {}",
                pl.d0, pl.d1, self.area_side
            ));
        }
        if !(self.noise_power >= 0.0 && self.noise_power.is_finite()) {
            return fail(format!("noise_power must be finite and >= 0, got {}", self.noise_power));
        }
        if self.shadowing_std_db.is_nan() || self.shadowing_std_db < 0.0 {
            return fail(format!("shadowing_std_db must be >= 0, got {}", self.shadowing_std_db));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Linkage {
    Average,
    Single,
    Complete,
}

/// How a cluster is ranked for a given user.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ClusterScore {
    /// Strongest large-scale coefficient among the cluster's APs.
    Max,
    /// Sum of the cluster's large-scale coefficients.
    Sum,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ClusteringConfig {
    /// Dendrogram cut height in correlation distance, within [0, 1].
    pub threshold: f64,
    pub linkage: Linkage,
    pub score: ClusterScore,
}

impl Default for ClusteringConfig {
    fn default() -> Self {
        Self {
            threshold: 0.9,
            linkage: Linkage::Average,
            score: ClusterScore::Max,
        }
    }
}

/// Which APs contribute interference and noise to a user's SINR denominator.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DenominatorScope {
    /// Only the user's serving APs.
    Serving,
    /// Every AP in the network.
    AllAps,
}

/// Which users contribute to the coherent (pilot-contamination) interference term.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ContaminationScope {
    /// Users sharing the pilot, weighted by |ψ_kᴴψ_j|².
    CoPilot,
    /// Every other user, with no pilot-overlap weighting.
    AllUsers,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SinrConfig {
    pub denominator: DenominatorScope,
    pub contamination: ContaminationScope,
}

impl Default for SinrConfig {
    fn default() -> Self {
        Self {
            denominator: DenominatorScope::Serving,
            contamination: ContaminationScope::CoPilot,
        }
    }
}

/// Tunables for the pilot power solvers. Power bounds come from [`NetworkConfig`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SolverConfig {
    /// LSE sharpness.
    pub lambda: f64,
    /// Stop once the projected gradient norm falls below `kappa` times its initial value.
    pub kappa: f64,
    /// Absolute floor on the stopping tolerance.
    pub kappa_abs: f64,
    pub max_iters: usize,
    /// Step halvings tried before declaring the line search stalled.
    pub max_backtracks: usize,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            lambda: 20.0,
            kappa: 1e-6,
            kappa_abs: 1e-12,
            max_iters: 500,
            max_backtracks: 60,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimConfig {
    pub network: NetworkConfig,
    pub clustering: ClusteringConfig,
    pub solver: SolverConfig,
    pub sinr: SinrConfig,
}

impl SimConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: SimConfig = toml::from_str(text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: impl AsRef<std::path::Path>) -> Result<Self> {
        Self::from_toml(&std::fs::read_to_string(path)?)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config is always representable as TOML")
    }

    pub fn validate(&self) -> Result<()> {
        self.network.validate()?;
        let c = &self.clustering;
        if !(0.0..=1.0).contains(&c.threshold) {
            return Err(Error::InvalidConfig(format!(
                "clustering threshold must be in [0, 1], got {}",
                c.threshold
            )));
        }
        let s = &self.solver;
        if !(s.lambda > 0.0 && s.kappa > 0.0 && s.kappa_abs >= 0.0 && s.max_iters >= 1) {
            return Err(Error::InvalidConfig(
                "solver needs lambda > 0, kappa > 0, kappa_abs >= 0, max_iters >= 1".into(),
            ));
        }
        Ok(())
    }
}
