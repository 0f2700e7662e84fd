//! Synthetic corpora from cluster specifications.
//!
//! Each cluster contributes `n` recordings with evenly spaced years. A
//! recording's mean tempo is `mean_bpm + slope * (year - midpoint)` plus
//! Gaussian noise of `sd_bpm`; each bar then adds Gaussian noise of
//! `bar_noise_sd`. Tempi are floored at 1 BPM.

use std::collections::BTreeMap;

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::corpus::{Corpus, Movement, Recording};
use crate::error::{Error, Result};
use crate::rng;
use crate::traditions::Label;

/// Floor applied to generated tempi.
pub const MIN_BPM: f64 = 1.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClusterSpec {
    #[serde(default)]
    pub label_hint: Option<Label>,
    pub n: usize,
    pub mean_bpm: f64,
    pub sd_bpm: f64,
    pub year_min: i32,
    pub year_max: i32,
    #[serde(default)]
    pub slope_bpm_per_year: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthSpec {
    pub movement: Movement,
    pub clusters: Vec<ClusterSpec>,
    pub bars_per_recording: usize,
    pub bar_noise_sd: f64,
    #[serde(default)]
    pub seed: u64,
    /// Background categories; every recording draws one value per category
    /// uniformly, independent of its cluster.
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub background: BTreeMap<String, Vec<String>>,
}

fn invalid(path: String, message: impl Into<String>) -> Error {
    Error::InvalidField {
        path,
        message: message.into(),
    }
}

impl SynthSpec {
    /// Check field invariants; errors name the offending field path, prefixed
    /// with `prefix`.
    pub fn validate(&self, prefix: &str) -> Result<()> {
        let m = &self.movement;
        if m.movement_id.is_empty() {
            return Err(invalid(
                format!("{prefix}movement.movement_id"),
                "must not be empty",
            ));
        }
        if m.beats_per_bar == 0 {
            return Err(invalid(
                format!("{prefix}movement.beats_per_bar"),
                "must be >= 1",
            ));
        }
        if m.feature_spec == crate::FeatureSpec::MeanAndCv && m.character != crate::Character::Slow
        {
            return Err(invalid(
                format!("{prefix}movement.feature_spec"),
                "mean_and_cv requires character slow",
            ));
        }
        if self.clusters.is_empty() {
            return Err(invalid(
                format!("{prefix}clusters"),
                "at least one cluster is required",
            ));
        }
        for (i, c) in self.clusters.iter().enumerate() {
            let at = |f: &str| format!("{prefix}clusters[{i}].{f}");
            if c.n == 0 {
                return Err(invalid(at("n"), "must be >= 1"));
            }
            if !(c.mean_bpm.is_finite() && c.mean_bpm > 0.0) {
                return Err(invalid(at("mean_bpm"), "must be positive"));
            }
            if !(c.sd_bpm.is_finite() && c.sd_bpm >= 0.0) {
                return Err(invalid(at("sd_bpm"), "must be non-negative"));
            }
            if c.year_min > c.year_max {
                return Err(invalid(at("year_min"), "must not exceed year_max"));
            }
            if !c.slope_bpm_per_year.is_finite() {
                return Err(invalid(at("slope_bpm_per_year"), "must be finite"));
            }
        }
        if self.bars_per_recording == 0 {
            return Err(invalid(
                format!("{prefix}bars_per_recording"),
                "must be >= 1",
            ));
        }
        if self.movement.feature_spec == crate::FeatureSpec::MeanAndCv
            && self.bars_per_recording < 2
        {
            return Err(invalid(
                format!("{prefix}bars_per_recording"),
                "mean_and_cv needs at least 2 bars",
            ));
        }
        if !(self.bar_noise_sd.is_finite() && self.bar_noise_sd >= 0.0) {
            return Err(invalid(
                format!("{prefix}bar_noise_sd"),
                "must be non-negative",
            ));
        }
        for (name, values) in &self.background {
            if values.is_empty() {
                return Err(invalid(
                    format!("{prefix}background.{name}"),
                    "needs at least one value",
                ));
            }
        }
        Ok(())
    }

    pub fn total_recordings(&self) -> usize {
        self.clusters.iter().map(|c| c.n).sum()
    }
}

fn cluster_years(c: &ClusterSpec) -> Vec<i32> {
    if c.n == 1 {
        return vec![(c.year_min + c.year_max).div_euclid(2)];
    }
    let span = f64::from(c.year_max - c.year_min);
    (0..c.n)
        .map(|i| c.year_min + (span * i as f64 / (c.n - 1) as f64).round() as i32)
        .collect()
}

fn generate(spec: &SynthSpec) -> Result<Vec<Recording>> {
    spec.validate("")?;
    let mut tempo_rng = rng::stream(spec.seed, 0);
    let mut background_rng = rng::stream(spec.seed, 1);
    let id = &spec.movement.movement_id;
    let mut out = Vec::with_capacity(spec.total_recordings());
    for (ci, cluster) in spec.clusters.iter().enumerate() {
        let midpoint = 0.5 * f64::from(cluster.year_min + cluster.year_max);
        for year in cluster_years(cluster) {
            let idx = out.len();
            let z: f64 = tempo_rng.sample(StandardNormal);
            let mean = (cluster.mean_bpm
                + cluster.slope_bpm_per_year * (f64::from(year) - midpoint)
                + cluster.sd_bpm * z)
                .max(MIN_BPM);
            let bar_bpm = (0..spec.bars_per_recording)
                .map(|_| {
                    let z: f64 = tempo_rng.sample(StandardNormal);
                    (mean + spec.bar_noise_sd * z).max(MIN_BPM)
                })
                .collect();
            let background = spec
                .background
                .iter()
                .map(|(name, values)| {
                    let v = &values[background_rng.random_range(0..values.len())];
                    (name.clone(), v.clone())
                })
                .collect();
            let hint = cluster
                .label_hint
                .map_or_else(|| format!("c{ci}"), |l| l.as_str().to_string());
            out.push(Recording {
                recording_id: format!("{id}-{idx:03}"),
                performer: format!("{hint} performer {idx:03}"),
                year,
                movement_id: id.clone(),
                bar_bpm,
                background,
            });
        }
    }
    Ok(out)
}

/// Materialise one spec as a single-movement corpus.
pub fn synth_corpus(spec: &SynthSpec) -> Result<Corpus> {
    spec.validate("")?;
    synth_corpus_many(std::slice::from_ref(spec))
}

/// Materialise several specs into one corpus.
pub fn synth_corpus_many(specs: &[SynthSpec]) -> Result<Corpus> {
    let mut movements = Vec::with_capacity(specs.len());
    let mut recordings = Vec::new();
    for (i, spec) in specs.iter().enumerate() {
        spec.validate(&format!("movements[{i}]."))?;
        movements.push(spec.movement.clone());
        recordings.extend(generate(spec)?);
    }
    Corpus::new(movements, recordings)
}

/// One row of a cluster-summary table: label, N, mean BPM and BPM range.
/// Empty traditions have `n = 0`; singletons have no range.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TableRow {
    pub label: Label,
    pub n: usize,
    pub mean_bpm: Option<f64>,
    pub range: Option<(f64, f64)>,
}

fn dash(s: &str) -> bool {
    s.chars().all(|c| c == '-' || c == '\u{2014}') && !s.is_empty()
}

impl std::str::FromStr for TableRow {
    type Err = Error;

    /// Parses rows like `Mid 13 83.1 80--86` or `Slow 0 --- ---`.
    fn from_str(s: &str) -> Result<Self> {
        let bad = |m: String| Error::Domain(format!("table row `{s}`: {m}"));
        let tokens: Vec<&str> = s.split_whitespace().collect();
        if tokens.len() < 2 {
            return Err(bad("expected `<label> <N> [mean] [range]`".into()));
        }
        let label: Label = tokens[0].parse().map_err(bad)?;
        let n: usize = tokens[1].parse().map_err(|e| bad(format!("bad N: {e}")))?;
        let mean_bpm = match tokens.get(2) {
            None => None,
            Some(t) if dash(t) => None,
            Some(t) => Some(
                t.parse::<f64>()
                    .map_err(|e| bad(format!("bad mean: {e}")))?,
            ),
        };
        let range = match tokens.get(3) {
            None => None,
            Some(t) if dash(t) => None,
            Some(t) => {
                let t = t.replace('\u{2013}', "--");
                let (lo, hi) = t
                    .split_once("--")
                    .or_else(|| t.split_once('-'))
                    .ok_or_else(|| bad(format!("bad range `{t}`")))?;
                let lo: f64 = lo
                    .parse()
                    .map_err(|e| bad(format!("bad range start: {e}")))?;
                let hi: f64 = hi.parse().map_err(|e| bad(format!("bad range end: {e}")))?;
                Some((lo, hi))
            }
        };
        Ok(TableRow {
            label,
            n,
            mean_bpm,
            range,
        })
    }
}

/// Settings for turning table rows into a [`SynthSpec`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TableOptions {
    /// `sd_bpm = (range_max - range_min) / sd_divisor`.
    pub sd_divisor: f64,
    pub year_min: i32,
    pub year_max: i32,
    pub bars_per_recording: usize,
    pub bar_noise_sd: f64,
    pub seed: u64,
}

impl Default for TableOptions {
    fn default() -> Self {
        TableOptions {
            sd_divisor: 4.0,
            year_min: 1930,
            year_max: 2012,
            bars_per_recording: 32,
            bar_noise_sd: 0.0,
            seed: 0,
        }
    }
}

/// Build a spec from cluster-summary rows. Rows with `n = 0` are dropped;
/// rows without a range become zero-spread clusters.
pub fn spec_from_table_rows(
    movement: Movement,
    rows: &[TableRow],
    opts: &TableOptions,
) -> Result<SynthSpec> {
    if !(opts.sd_divisor.is_finite() && opts.sd_divisor > 0.0) {
        return Err(Error::Domain("sd_divisor must be positive".into()));
    }
    let mut clusters = Vec::new();
    for row in rows {
        if row.n == 0 {
            continue;
        }
        let Some(mean_bpm) = row.mean_bpm else {
            return Err(Error::Domain(format!(
                "{} row has N = {} but no mean",
                row.label.title(),
                row.n
            )));
        };
        let sd_bpm = match row.range {
            Some((lo, hi)) if lo > hi => {
                return Err(Error::Domain(format!(
                    "{} row has inverted range {lo}--{hi}",
                    row.label.title()
                )))
            }
            Some((lo, hi)) => (hi - lo) / opts.sd_divisor,
            None => 0.0,
        };
        clusters.push(ClusterSpec {
            label_hint: Some(row.label),
            n: row.n,
            mean_bpm,
            sd_bpm,
            year_min: opts.year_min,
            year_max: opts.year_max,
            slope_bpm_per_year: 0.0,
        });
    }
    let spec = SynthSpec {
        movement,
        clusters,
        bars_per_recording: opts.bars_per_recording,
        bar_noise_sd: opts.bar_noise_sd,
        seed: opts.seed,
        background: BTreeMap::new(),
    };
    spec.validate("")?;
    Ok(spec)
}
