//! Monte Carlo experiments: per-realization pipelines, sample collection,
//! empirical CDFs and the named experiment presets.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::clustering::{cluster_and_associate, AssociationMatrix, Dendrogram};
use crate::config::{PilotMode, SimConfig};
use crate::error::{Error, Result};
use crate::geometry::{draw_channel, draw_large_scale, place_entities, LargeScaleMatrix};
use crate::pilot::{assign_pilots, PilotAssignment, PilotPowerVector};
use crate::power::{spectral_efficiency_all, SinrContext};
use crate::solver::{f_ppc, mse_ppc, wsrm_ppc, SolverSettings, SolverTrace};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Controller {
    Wsrm,
    Mse,
    Full,
}

impl Controller {
    pub fn label(self) -> &'static str {
        match self {
            Controller::Wsrm => "wsrm-ppc",
            Controller::Mse => "mse-ppc",
            Controller::Full => "f-ppc",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ClusteringMode {
    /// Correlation-based hierarchical clustering.
    Proposed,
    /// Every AP serves every user.
    AllAps,
}

impl ClusteringMode {
    pub fn label(self) -> &'static str {
        match self {
            ClusteringMode::Proposed => "clustered",
            ClusteringMode::AllAps => "all-aps",
        }
    }
}

/// One curve of an experiment.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Variant {
    pub controller: Controller,
    pub clustering: ClusteringMode,
    pub antennas: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentSpec {
    pub id: String,
    pub config: SimConfig,
    pub clustering_modes: Vec<ClusteringMode>,
    pub controllers: Vec<Controller>,
    /// Antenna counts to sweep; empty means the config's `antennas_per_ap`.
    pub antenna_sweep: Vec<usize>,
    pub realizations: usize,
    pub base_seed: u64,
}

impl ExperimentSpec {
    pub fn new(id: impl Into<String>, config: SimConfig) -> Self {
        Self {
            id: id.into(),
            config,
            clustering_modes: vec![ClusteringMode::Proposed],
            controllers: vec![Controller::Wsrm, Controller::Mse, Controller::Full],
            antenna_sweep: Vec::new(),
            realizations: 300,
            base_seed: 1,
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.config.validate()?;
        if self.realizations == 0 {
            return Err(Error::InvalidConfig("realizations must be >= 1".into()));
        }
        if self.controllers.is_empty() || self.clustering_modes.is_empty() {
            return Err(Error::InvalidConfig(
                "need at least one controller and one clustering mode".into(),
            ));
        }
        if self.antenna_sweep.contains(&0) {
            return Err(Error::InvalidConfig("antenna counts must be >= 1".into()));
        }
        Ok(())
    }

    pub fn antenna_counts(&self) -> Vec<usize> {
        if self.antenna_sweep.is_empty() {
            vec![self.config.network.antennas_per_ap]
        } else {
            self.antenna_sweep.clone()
        }
    }

    /// Curves in output order: antennas, then clustering mode, then controller.
    pub fn variants(&self) -> Vec<Variant> {
        let mut out = Vec::new();
        for antennas in self.antenna_counts() {
            for &clustering in &self.clustering_modes {
                for &controller in &self.controllers {
                    out.push(Variant {
                        controller,
                        clustering,
                        antennas,
                    });
                }
            }
        }
        out
    }

    /// Curve label; dimensions with a single value are omitted.
    pub fn label(&self, v: &Variant) -> String {
        let mut label = v.controller.label().to_string();
        if self.clustering_modes.len() > 1 {
            label.push(':');
            label.push_str(v.clustering.label());
        }
        if self.antenna_counts().len() > 1 {
            label.push_str(&format!(":L{}", v.antennas));
        }
        label
    }

    /// Short hex digest of the serialized spec.
    pub fn hash(&self) -> String {
        let bytes = serde_json::to_vec(self).expect("spec serializes");
        let digest = Sha256::digest(&bytes);
        digest.iter().take(8).map(|b| format!("{b:02x}")).collect()
    }
}

/// Independent random stream for one purpose within one realization.
pub fn substream(base_seed: u64, index: usize, tag: &str) -> ChaCha8Rng {
    let mut h = Sha256::new();
    h.update(base_seed.to_le_bytes());
    h.update((index as u64).to_le_bytes());
    h.update(tag.as_bytes());
    let mut seed = [0u8; 32];
    seed.copy_from_slice(&h.finalize());
    ChaCha8Rng::from_seed(seed)
}

/// Draws shared by every variant of a realization.
#[derive(Debug, Clone)]
pub struct RealizationDraw {
    pub beta: LargeScaleMatrix,
    pub assignment: PilotAssignment,
}

pub fn draw_realization(spec: &ExperimentSpec, index: usize) -> RealizationDraw {
    let net = &spec.config.network;
    let layout = place_entities(net, &mut substream(spec.base_seed, index, "layout"));
    let beta = draw_large_scale(&layout, net, &mut substream(spec.base_seed, index, "shadowing"));
    let assignment = assign_pilots(
        net.pilot_assignment,
        net.num_users,
        net.pilot_length,
        &mut substream(spec.base_seed, index, "pilots"),
    );
    RealizationDraw { beta, assignment }
}

#[derive(Debug, Clone)]
pub struct RealizationOutput {
    pub index: usize,
    /// Per variant (in [`ExperimentSpec::variants`] order), per user SE in bit/s/Hz.
    pub se: Vec<Vec<f64>>,
    /// Per variant, the optimized pilot powers.
    pub pilot_powers: Vec<PilotPowerVector>,
    /// Per variant, the solver trace when the controller iterates.
    pub traces: Vec<Option<SolverTrace>>,
    /// Dendrogram per swept antenna count, when clustering ran.
    pub dendrograms: Vec<(usize, Dendrogram)>,
}

pub fn run_realization(spec: &ExperimentSpec, index: usize) -> Result<RealizationOutput> {
    run_realization_inner(spec, index).map_err(|e| Error::Realization {
        index,
        source: Box::new(e),
    })
}

fn run_realization_inner(spec: &ExperimentSpec, index: usize) -> Result<RealizationOutput> {
    let cfg = &spec.config;
    let net = &cfg.network;
    let settings = SolverSettings::new(&cfg.solver, net);
    let draw = draw_realization(spec, index);
    let (m_count, k_count) = (net.num_aps, net.num_users);

    let mut se = Vec::new();
    let mut pilot_powers = Vec::new();
    let mut traces = Vec::new();
    let mut dendrograms = Vec::new();

    for antennas in spec.antenna_counts() {
        let mut assoc_for = |mode: ClusteringMode| -> Result<AssociationMatrix> {
            match mode {
                ClusteringMode::AllAps => Ok(AssociationMatrix::full(m_count, k_count)),
                ClusteringMode::Proposed => {
                    let tag = format!("channel-L{antennas}");
                    let channel = draw_channel(&draw.beta, antennas, &mut substream(spec.base_seed, index, &tag));
                    let (clustering, assoc) = cluster_and_associate(
                        &channel,
                        &draw.beta,
                        cfg.clustering.threshold,
                        cfg.clustering.linkage,
                        cfg.clustering.score,
                    )?;
                    dendrograms.push((antennas, clustering.dendrogram));
                    Ok(assoc)
                }
            }
        };
        let mut contexts = Vec::new();
        for &mode in &spec.clustering_modes {
            let assoc = assoc_for(mode)?;
            let ctx = SinrContext::new(
                draw.beta.clone(),
                assoc,
                draw.assignment.clone(),
                vec![net.max_data_power; k_count],
                net.pilot_length,
                net.coherence_block,
                antennas,
                net.noise_power,
                cfg.sinr,
            )?;
            contexts.push(ctx);
        }
        for ctx in &contexts {
            for &controller in &spec.controllers {
                let (q, trace) = match controller {
                    Controller::Full => (f_ppc(ctx, &settings), None),
                    Controller::Wsrm => {
                        let start = PilotPowerVector::constant(k_count, settings.max_power);
                        let (q, t) = wsrm_ppc(ctx, &settings, &start)?;
                        (q, Some(t))
                    }
                    Controller::Mse => {
                        let (q, t) = mse_ppc(ctx, &settings)?;
                        (q, Some(t))
                    }
                };
                se.push(spectral_efficiency_all(q.as_slice(), ctx));
                pilot_powers.push(q);
                traces.push(trace);
            }
        }
    }
    Ok(RealizationOutput {
        index,
        se,
        pilot_powers,
        traces,
        dendrograms,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SeSample {
    pub realization: usize,
    pub user: usize,
    pub se: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Series {
    pub label: String,
    pub variant: Variant,
    pub samples: Vec<SeSample>,
}

impl Series {
    pub fn values(&self) -> Vec<f64> {
        self.samples.iter().map(|s| s.se).collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeSampleSet {
    pub experiment_id: String,
    pub spec_hash: String,
    pub base_seed: u64,
    pub realizations: usize,
    pub series: Vec<Series>,
    /// Realization indices that aborted and were left out.
    pub failed: Vec<usize>,
}

impl SeSampleSet {
    pub fn series(&self, label: &str) -> Option<&Series> {
        self.series.iter().find(|s| s.label == label)
    }
}

/// Runs every realization, in parallel when `workers` allows it.
///
/// `workers = None` uses rayon's global pool; `Some(1)` runs serially.
pub fn monte_carlo(spec: &ExperimentSpec, workers: Option<usize>) -> Result<SeSampleSet> {
    spec.validate()?;
    let indices: Vec<usize> = (0..spec.realizations).collect();
    let outputs: Vec<Result<RealizationOutput>> = match workers {
        Some(1) => indices.iter().map(|&i| run_realization(spec, i)).collect(),
        Some(n) => {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(n)
                .build()
                .map_err(|e| Error::InvalidConfig(format!("thread pool: {e}")))?;
            pool.install(|| indices.par_iter().map(|&i| run_realization(spec, i)).collect())
        }
        None => indices.par_iter().map(|&i| run_realization(spec, i)).collect(),
    };
    collect_samples(spec, outputs)
}

fn collect_samples(spec: &ExperimentSpec, outputs: Vec<Result<RealizationOutput>>) -> Result<SeSampleSet> {
    let variants = spec.variants();
    let mut series: Vec<Series> = variants
        .iter()
        .map(|v| Series {
            label: spec.label(v),
            variant: *v,
            samples: Vec::new(),
        })
        .collect();
    let mut failed = Vec::new();
    let mut first_error = None;
    for (index, out) in outputs.into_iter().enumerate() {
        match out {
            Ok(out) => {
                for (s, values) in series.iter_mut().zip(out.se) {
                    s.samples.extend(values.into_iter().enumerate().map(|(user, se)| SeSample {
                        realization: index,
                        user,
                        se,
                    }));
                }
            }
            Err(e) => {
                log::warn!("{e}");
                failed.push(index);
                first_error.get_or_insert_with(|| e.to_string());
            }
        }
    }
    if failed.len() * 100 > spec.realizations {
        return Err(Error::TooManyFailures {
            failed: failed.len(),
            total: spec.realizations,
            first: first_error.unwrap_or_default(),
        });
    }
    Ok(SeSampleSet {
        experiment_id: spec.id.clone(),
        spec_hash: spec.hash(),
        base_seed: spec.base_seed,
        realizations: spec.realizations,
        series,
        failed,
    })
}

/// Empirical CDF: sorted values with probabilities i/n.
#[derive(Debug, Clone, PartialEq)]
pub struct CdfCurve {
    pub values: Vec<f64>,
    pub probs: Vec<f64>,
}

impl CdfCurve {
    /// Smallest sample value whose cumulative probability reaches `p`.
    pub fn quantile(&self, p: f64) -> f64 {
        let n = self.values.len();
        let idx = ((p * n as f64).ceil() as usize).clamp(1, n) - 1;
        self.values[idx]
    }

    pub fn median(&self) -> f64 {
        self.quantile(0.5)
    }

    /// F(x): fraction of samples ≤ x.
    pub fn eval(&self, x: f64) -> f64 {
        self.values.partition_point(|v| *v <= x) as f64 / self.values.len() as f64
    }
}

pub fn cdf(samples: &[f64]) -> Result<CdfCurve> {
    if samples.is_empty() {
        return Err(Error::EmptySamples);
    }
    let mut values = samples.to_vec();
    values.sort_by(f64::total_cmp);
    let n = values.len() as f64;
    let probs = (1..=values.len()).map(|i| i as f64 / n).collect();
    Ok(CdfCurve { values, probs })
}

pub const PRESET_NAMES: [&str; 4] = ["fig2-k15", "fig2-k30", "fig3a", "fig3b"];

/// All named experiments: 50 APs on a 500 m square, 300 realizations each.
pub fn experiment_presets() -> Vec<ExperimentSpec> {
    let base = SimConfig::default();
    let fig2 = |id: &str, users: usize| {
        let mut cfg = base.clone();
        cfg.network.num_users = users;
        cfg.network.pilot_length = 10;
        cfg.network.antennas_per_ap = 1;
        ExperimentSpec::new(id, cfg)
    };
    let fig3 = |id: &str, tau_p: usize, mode: PilotMode| {
        let mut cfg = base.clone();
        cfg.network.num_users = 15;
        cfg.network.pilot_length = tau_p;
        cfg.network.pilot_assignment = mode;
        let mut spec = ExperimentSpec::new(id, cfg);
        spec.clustering_modes = vec![ClusteringMode::Proposed, ClusteringMode::AllAps];
        spec.controllers = vec![Controller::Wsrm];
        spec.antenna_sweep = vec![1, 2, 4];
        spec
    };
    vec![
        fig2("fig2-k15", 15),
        fig2("fig2-k30", 30),
        fig3("fig3a", 5, PilotMode::Random),
        fig3("fig3b", 15, PilotMode::Distinct),
    ]
}

pub fn preset(name: &str) -> Result<ExperimentSpec> {
    experiment_presets()
        .into_iter()
        .find(|p| p.id == name)
        .ok_or_else(|| Error::UnknownPreset {
            name: name.to_string(),
            valid: PRESET_NAMES.join(", "),
        })
}
