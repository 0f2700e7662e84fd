//! End-to-end movement analysis: cluster, label, regress within clusters,
//! aggregate period changes and background association.

use std::collections::{BTreeMap, BTreeSet};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::corpus::{duration_minutes, Character, Corpus};
use crate::error::{domain, Result};
use crate::features::{build_feature_matrix, sample_sd, z_standardize, Feature};
use crate::kmeans::ClusterModel;
use crate::regress::{chi_square_sf, ols_fit, pearson_r, RegressionFit};
use crate::validity::{validity_report, ValidityPolicy, ValidityReport};

/// Smallest cluster that gets a regression fit.
pub const MIN_FIT_SIZE: usize = 3;
/// Smallest movement that can be analysed.
pub const MIN_RECORDINGS: usize = 4;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Label {
    Slow,
    Mid,
    Fast,
}

impl Label {
    pub const ALL: [Label; 3] = [Label::Slow, Label::Mid, Label::Fast];

    pub fn as_str(self) -> &'static str {
        match self {
            Label::Slow => "slow",
            Label::Mid => "mid",
            Label::Fast => "fast",
        }
    }

    pub fn title(self) -> &'static str {
        match self {
            Label::Slow => "Slow",
            Label::Mid => "Mid",
            Label::Fast => "Fast",
        }
    }
}

impl std::str::FromStr for Label {
    type Err = String;
    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s.to_ascii_lowercase().as_str() {
            "slow" => Ok(Label::Slow),
            "mid" | "mid-range" => Ok(Label::Mid),
            "fast" => Ok(Label::Fast),
            other => Err(format!("unknown label `{other}`")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LabeledCluster {
    pub label: Label,
    pub member_ids: Vec<String>,
    pub n: usize,
    pub mean_bpm: f64,
    #[serde(rename = "range")]
    pub bpm_range: (f64, f64),
    #[serde(rename = "sd")]
    pub sd_bpm: f64,
    pub fit: Option<RegressionFit>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MovementReport {
    pub movement_id: String,
    pub movement_name: String,
    pub character: Character,
    pub features: Vec<Feature>,
    pub degenerate_columns: Vec<Feature>,
    pub validity: ValidityReport,
    pub model: ClusterModel,
    /// Ordered slow, mid, fast; absent labels are listed in `empty_labels`.
    pub clusters: Vec<LabeledCluster>,
    pub empty_labels: Vec<Label>,
    pub dominant_label: Label,
    pub dominant_share: f64,
}

impl MovementReport {
    pub fn cluster(&self, label: Label) -> Option<&LabeledCluster> {
        self.clusters.iter().find(|c| c.label == label)
    }

    pub fn label_of(&self, recording_id: &str) -> Option<Label> {
        self.clusters
            .iter()
            .find(|c| c.member_ids.iter().any(|m| m == recording_id))
            .map(|c| c.label)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AnalysisOptions {
    /// Upper bound on the number of traditions (2 or 3).
    pub k_target: usize,
    pub restarts: usize,
    pub seed: u64,
    pub policy: ValidityPolicy,
}

impl Default for AnalysisOptions {
    fn default() -> Self {
        AnalysisOptions {
            k_target: 3,
            restarts: 100,
            seed: 0,
            policy: ValidityPolicy::default(),
        }
    }
}

/// Cluster one movement and describe its traditions.
pub fn analyze_movement(
    corpus: &Corpus,
    movement_id: &str,
    opts: &AnalysisOptions,
) -> Result<MovementReport> {
    if !(2..=3).contains(&opts.k_target) {
        return domain(format!("k_target must be 2 or 3, got {}", opts.k_target));
    }
    let Some(movement) = corpus.movement(movement_id) else {
        return domain(format!("unknown movement `{movement_id}`"));
    };
    let matrix = build_feature_matrix(corpus, movement_id)?;
    if matrix.n_rows() < MIN_RECORDINGS {
        return domain(format!(
            "movement `{movement_id}` has {} recordings; at least {MIN_RECORDINGS} are needed",
            matrix.n_rows()
        ));
    }
    let standardized = z_standardize(&matrix)?;
    let (validity, mut models) = validity_report(
        movement_id,
        &standardized.values,
        2,
        3,
        opts.restarts,
        opts.seed,
        opts.policy,
    )?;
    let supported_k = validity.supported_k.min(opts.k_target);
    let mut model = models
        .remove(&supported_k)
        .expect("k = 2 and 3 are always fitted");
    model.map_to_raw(&standardized)?;

    let sizes = model.cluster_sizes();
    let centroid_bpm: Vec<f64> = model.centroids_raw.iter().map(|c| c[0]).collect();
    let labels = label_clusters(&centroid_bpm, &sizes, supported_k)?;

    let mut clusters = Vec::new();
    for (cluster, label) in labels.iter().enumerate() {
        let rows: Vec<usize> = (0..matrix.n_rows())
            .filter(|&i| model.assignments[i] == cluster)
            .collect();
        if rows.is_empty() {
            continue;
        }
        let member_ids: Vec<String> = rows.iter().map(|&i| matrix.row_ids[i].clone()).collect();
        let bpm: Vec<f64> = rows.iter().map(|&i| matrix.values[i][0]).collect();
        let pairs: Vec<(f64, f64)> = member_ids
            .iter()
            .zip(&bpm)
            .map(|(id, b)| {
                (
                    f64::from(corpus.recording(id).expect("row ids come from corpus").year),
                    *b,
                )
            })
            .collect();
        let n = bpm.len();
        clusters.push(LabeledCluster {
            label: *label,
            n,
            mean_bpm: bpm.iter().sum::<f64>() / n as f64,
            bpm_range: (
                bpm.iter().copied().fold(f64::INFINITY, f64::min),
                bpm.iter().copied().fold(f64::NEG_INFINITY, f64::max),
            ),
            sd_bpm: if n > 1 { sample_sd(&bpm)? } else { 0.0 },
            fit: intra_cluster_fit(&pairs),
            member_ids,
        });
    }
    clusters.sort_by_key(|c| c.label);
    let present: BTreeSet<Label> = clusters.iter().map(|c| c.label).collect();
    let empty_labels: Vec<Label> = Label::ALL
        .into_iter()
        .filter(|l| !present.contains(l))
        .collect();

    // ties prefer mid, then slow, then fast
    let dominant = [Label::Mid, Label::Slow, Label::Fast]
        .into_iter()
        .filter_map(|l| clusters.iter().find(|c| c.label == l))
        .fold(None::<&LabeledCluster>, |best, c| match best {
            Some(b) if b.n >= c.n => Some(b),
            _ => Some(c),
        })
        .expect("at least one cluster");

    Ok(MovementReport {
        movement_id: movement_id.to_string(),
        movement_name: movement.display_name(),
        character: movement.character,
        features: matrix.columns.clone(),
        degenerate_columns: standardized.degenerate_columns.clone(),
        validity,
        dominant_label: dominant.label,
        dominant_share: dominant.n as f64 / matrix.n_rows() as f64,
        model,
        clusters,
        empty_labels,
    })
}

/// Analyse every movement of the corpus, in movement order. Movements run on
/// the current rayon pool.
pub fn analyze_all(corpus: &Corpus, opts: &AnalysisOptions) -> Result<Vec<MovementReport>> {
    let ids: Vec<&str> = corpus.movements().map(|m| m.movement_id.as_str()).collect();
    ids.par_iter()
        .map(|id| analyze_movement(corpus, id, opts))
        .collect()
}

/// Assign slow/mid/fast to cluster indices.
///
/// With three clusters, ascending centroid BPM gives slow, mid, fast. With two,
/// the more populous cluster is mid and the other is fast if its centroid is
/// higher, slow otherwise. Equal centroids fall back to cluster index; equal
/// populations make the lower centroid mid.
pub fn label_clusters(
    centroid_bpm: &[f64],
    sizes: &[usize],
    supported_k: usize,
) -> Result<Vec<Label>> {
    if centroid_bpm.len() != supported_k || sizes.len() != supported_k {
        return domain(format!(
            "expected {supported_k} centroids and sizes, got {} and {}",
            centroid_bpm.len(),
            sizes.len()
        ));
    }
    let ascending =
        |a: &usize, b: &usize| centroid_bpm[*a].total_cmp(&centroid_bpm[*b]).then(a.cmp(b));
    match supported_k {
        3 => {
            let mut order = [0, 1, 2];
            order.sort_by(ascending);
            let mut labels = vec![Label::Mid; 3];
            for (idx, label) in order.into_iter().zip(Label::ALL) {
                labels[idx] = label;
            }
            Ok(labels)
        }
        2 => {
            let mut order = [0, 1];
            order.sort_by(ascending);
            let (low, high) = (order[0], order[1]);
            let mid = if sizes[high] > sizes[low] { high } else { low };
            let mut labels = vec![Label::Mid; 2];
            if mid == low {
                labels[high] = Label::Fast;
            } else {
                labels[low] = Label::Slow;
            }
            Ok(labels)
        }
        k => domain(format!("labelling needs 2 or 3 clusters, got {k}")),
    }
}

/// BPM-on-year regression within one cluster; absent below three members or
/// when every year is the same.
pub fn intra_cluster_fit(members: &[(f64, f64)]) -> Option<RegressionFit> {
    if members.len() < MIN_FIT_SIZE {
        return None;
    }
    let years: Vec<f64> = members.iter().map(|m| m.0).collect();
    let bpm: Vec<f64> = members.iter().map(|m| m.1).collect();
    ols_fit(&years, &bpm).ok()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AggregateChange {
    pub movement_id: String,
    pub movement_name: String,
    pub split_year: i32,
    pub tempo_pct: f64,
    pub duration_pct: f64,
    pub n_early: usize,
    pub n_late: usize,
}

/// Percentage change of mean tempo and mean duration from recordings before
/// `split_year` to those from `split_year` on.
pub fn aggregate_period_change(
    corpus: &Corpus,
    movement_id: &str,
    split_year: i32,
) -> Result<AggregateChange> {
    let Some(movement) = corpus.movement(movement_id) else {
        return domain(format!("unknown movement `{movement_id}`"));
    };
    let mut early = (0usize, 0.0, 0.0);
    let mut late = (0usize, 0.0, 0.0);
    for r in corpus.recordings_of(movement_id) {
        let tempo = r.bar_bpm.iter().sum::<f64>() / r.bar_bpm.len() as f64;
        let duration = duration_minutes(r, movement);
        let bucket = if r.year < split_year {
            &mut early
        } else {
            &mut late
        };
        bucket.0 += 1;
        bucket.1 += tempo;
        bucket.2 += duration;
    }
    if early.0 == 0 {
        return domain(format!(
            "movement `{movement_id}`: early period (before {split_year}) is empty"
        ));
    }
    if late.0 == 0 {
        return domain(format!(
            "movement `{movement_id}`: late period ({split_year} on) is empty"
        ));
    }
    let pct = |before: f64, after: f64| 100.0 * (after - before) / before;
    Ok(AggregateChange {
        movement_id: movement_id.to_string(),
        movement_name: movement.display_name(),
        split_year,
        tempo_pct: pct(early.1 / early.0 as f64, late.1 / late.0 as f64),
        duration_pct: pct(early.2 / early.0 as f64, late.2 / late.0 as f64),
        n_early: early.0,
        n_late: late.0,
    })
}

/// Pearson r between tempo and duration changes across movements.
pub fn tempo_duration_correlation(changes: &[AggregateChange]) -> Result<f64> {
    if changes.len() < 2 {
        return domain("correlation needs at least 2 movements");
    }
    let tempo: Vec<f64> = changes.iter().map(|c| c.tempo_pct).collect();
    let duration: Vec<f64> = changes.iter().map(|c| c.duration_pct).collect();
    pearson_r(&tempo, &duration)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ContingencyStats {
    pub chi_square: f64,
    pub df: u32,
    pub p_value: f64,
    pub cramers_v: f64,
}

/// Pearson chi-square independence test and Cramér's V for a count table.
pub fn contingency_stats(table: &[Vec<u64>]) -> Result<ContingencyStats> {
    let rows = table.len();
    let cols = table.first().map_or(0, Vec::len);
    if rows < 2 || cols < 2 {
        return domain(format!(
            "contingency table is {rows}x{cols}; both dimensions must be >= 2"
        ));
    }
    if table.iter().any(|r| r.len() != cols) {
        return domain("ragged contingency table");
    }
    let row_sums: Vec<f64> = table.iter().map(|r| r.iter().sum::<u64>() as f64).collect();
    let col_sums: Vec<f64> = (0..cols)
        .map(|j| table.iter().map(|r| r[j]).sum::<u64>() as f64)
        .collect();
    let n: f64 = row_sums.iter().sum();
    if row_sums.iter().chain(&col_sums).any(|s| *s == 0.0) {
        return domain("contingency table has an empty row or column");
    }
    let mut chi_square = 0.0;
    for (i, row) in table.iter().enumerate() {
        for (j, &observed) in row.iter().enumerate() {
            let expected = row_sums[i] * col_sums[j] / n;
            let diff = observed as f64 - expected;
            chi_square += diff * diff / expected;
        }
    }
    let df = ((rows - 1) * (cols - 1)) as u32;
    let p_value = chi_square_sf(chi_square, df)?.max(f64::MIN_POSITIVE);
    let cramers_v = (chi_square / (n * (rows.min(cols) - 1) as f64))
        .sqrt()
        .clamp(0.0, 1.0);
    Ok(ContingencyStats {
        chi_square,
        df,
        p_value,
        cramers_v,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AssociationResult {
    pub category_name: String,
    pub movements: Vec<String>,
    pub row_labels: Vec<Label>,
    pub column_values: Vec<String>,
    pub contingency: Vec<Vec<u64>>,
    pub n: u64,
    pub chi_square: f64,
    pub df: u32,
    pub p_value: f64,
    pub cramers_v: f64,
}

/// Cross-tabulate tradition label against a background category, pooling the
/// given movement reports. Recordings without the category are skipped.
pub fn background_association(
    reports: &[&MovementReport],
    corpus: &Corpus,
    category_name: &str,
) -> Result<AssociationResult> {
    let mut counts: BTreeMap<Label, BTreeMap<&str, u64>> = BTreeMap::new();
    let mut values: BTreeSet<&str> = BTreeSet::new();
    for report in reports {
        for cluster in &report.clusters {
            for id in &cluster.member_ids {
                let Some(rec) = corpus.recording(id) else {
                    return domain(format!("recording `{id}` is not in the corpus"));
                };
                if let Some(v) = rec.background.get(category_name) {
                    *counts
                        .entry(cluster.label)
                        .or_default()
                        .entry(v.as_str())
                        .or_default() += 1;
                    values.insert(v.as_str());
                }
            }
        }
    }
    let row_labels: Vec<Label> = counts.keys().copied().collect();
    let column_values: Vec<String> = values.iter().map(|v| v.to_string()).collect();
    let contingency: Vec<Vec<u64>> = row_labels
        .iter()
        .map(|l| {
            values
                .iter()
                .map(|v| counts[l].get(v).copied().unwrap_or(0))
                .collect()
        })
        .collect();
    if row_labels.len() < 2 || column_values.len() < 2 {
        return domain(format!(
            "category `{category_name}`: table is {}x{}; need at least 2 labels and 2 values",
            row_labels.len(),
            column_values.len()
        ));
    }
    let stats = contingency_stats(&contingency)?;
    Ok(AssociationResult {
        category_name: category_name.to_string(),
        movements: reports.iter().map(|r| r.movement_id.clone()).collect(),
        n: contingency.iter().flatten().sum(),
        row_labels,
        column_values,
        contingency,
        chi_square: stats.chi_square,
        df: stats.df,
        p_value: stats.p_value,
        cramers_v: stats.cramers_v,
    })
}
