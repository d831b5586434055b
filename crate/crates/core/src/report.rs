//! CSV and JSON artifacts for sample sets.
//!
//! Every CSV starts with one `#` metadata line (experiment id, spec hash,
//! seed) followed by the column header.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use serde::Serialize;

use crate::error::Result;
use crate::harness::{cdf, SeSampleSet};

pub const SAMPLES_HEADER: &str = "controller,user,realization,se_bits_per_hz";
pub const CDF_HEADER: &str = "controller,se_value,cdf_prob";

/// The `#` line that opens every artifact.
pub fn metadata_line(experiment_id: &str, spec_hash: &str, seed: u64) -> String {
    format!("# experiment={experiment_id} spec_hash={spec_hash} seed={seed}\n")
}

fn set_metadata(set: &SeSampleSet) -> String {
    metadata_line(&set.experiment_id, &set.spec_hash, set.base_seed)
}

pub fn samples_csv(set: &SeSampleSet) -> String {
    let mut out = set_metadata(set);
    out.push_str(SAMPLES_HEADER);
    out.push('\n');
    for series in &set.series {
        for s in &series.samples {
            let _ = writeln!(out, "{},{},{},{}", series.label, s.user, s.realization, s.se);
        }
    }
    out
}

pub fn cdf_csv(set: &SeSampleSet) -> Result<String> {
    let mut out = set_metadata(set);
    out.push_str(CDF_HEADER);
    out.push('\n');
    for series in &set.series {
        let curve = cdf(&series.values())?;
        for (v, p) in curve.values.iter().zip(&curve.probs) {
            let _ = writeln!(out, "{},{},{}", series.label, v, p);
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SeriesSummary {
    pub median: f64,
    pub mean: f64,
    pub p05: f64,
    pub count: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Summary {
    pub experiment: String,
    pub spec_hash: String,
    pub seed: u64,
    pub realizations: usize,
    pub failed_realizations: Vec<usize>,
    pub controllers: BTreeMap<String, SeriesSummary>,
}

pub fn summarize(set: &SeSampleSet) -> Result<Summary> {
    let mut controllers = BTreeMap::new();
    for series in &set.series {
        let values = series.values();
        let curve = cdf(&values)?;
        controllers.insert(
            series.label.clone(),
            SeriesSummary {
                median: curve.median(),
                mean: values.iter().sum::<f64>() / values.len() as f64,
                p05: curve.quantile(0.05),
                count: values.len(),
            },
        );
    }
    Ok(Summary {
        experiment: set.experiment_id.clone(),
        spec_hash: set.spec_hash.clone(),
        seed: set.base_seed,
        realizations: set.realizations,
        failed_realizations: set.failed.clone(),
        controllers,
    })
}

pub fn summary_json(set: &SeSampleSet) -> Result<String> {
    Ok(serde_json::to_string_pretty(&summarize(set)?)?)
}

/// Writes `<id>_samples.csv`, `<id>_cdf.csv` and `<id>_summary.json` under `dir`.
pub fn write_artifacts(set: &SeSampleSet, dir: &Path) -> Result<Vec<PathBuf>> {
    std::fs::create_dir_all(dir)?;
    let id = &set.experiment_id;
    let files = [
        (format!("{id}_samples.csv"), samples_csv(set)),
        (format!("{id}_cdf.csv"), cdf_csv(set)?),
        (format!("{id}_summary.json"), summary_json(set)?),
    ];
    let mut written = Vec::new();
    for (name, body) in files {
        let path = dir.join(name);
        std::fs::write(&path, body)?;
        written.push(path);
    }
    Ok(written)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::harness::{ClusteringMode, Controller, SeSample, Series, Variant};

    fn tiny() -> SeSampleSet {
        let variant = Variant {
            controller: Controller::Full,
            clustering: ClusteringMode::Proposed,
            antennas: 1,
        };
        SeSampleSet {
            experiment_id: "t".into(),
            spec_hash: "abc".into(),
            base_seed: 7,
            realizations: 1,
            series: vec![Series {
                label: "f-ppc".into(),
                variant,
                samples: vec![
                    SeSample { realization: 0, user: 0, se: 1.5 },
                    SeSample { realization: 0, user: 1, se: 0.5 },
                ],
            }],
            failed: vec![],
        }
    }

    #[test]
    fn golden_samples_csv() {
        assert_eq!(
            samples_csv(&tiny()),
            "# experiment=t spec_hash=abc seed=7\n\
             controller,user,realization,se_bits_per_hz\n\
             f-ppc,0,0,1.5\n\
             f-ppc,1,0,0.5\n"
        );
    }

    #[test]
    fn golden_cdf_csv() {
        assert_eq!(
            cdf_csv(&tiny()).unwrap(),
            "# experiment=t spec_hash=abc seed=7\n\
             controller,se_value,cdf_prob\n\
             f-ppc,0.5,0.5\n\
             f-ppc,1.5,1\n"
        );
    }

    #[test]
    fn summary_keys() {
        let v: serde_json::Value = serde_json::from_str(&summary_json(&tiny()).unwrap()).unwrap();
        let f = &v["controllers"]["f-ppc"];
        assert_eq!(f["median"], 0.5);
        assert_eq!(f["mean"], 1.0);
        assert_eq!(f["p05"], 0.5);
        assert_eq!(v["seed"], 7);
        assert_eq!(v["spec_hash"], "abc");
    }
}
