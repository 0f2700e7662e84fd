//! Per-recording tempo features and z-standardisation.

use serde::{Deserialize, Serialize};

use crate::corpus::{Corpus, FeatureSpec};
use crate::error::{domain, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Feature {
    MeanBpm,
    Cv,
}

impl Feature {
    pub fn as_str(self) -> &'static str {
        match self {
            Feature::MeanBpm => "mean_bpm",
            Feature::Cv => "cv",
        }
    }
}

/// One row per recording, sorted by recording_id.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureMatrix {
    pub movement_id: String,
    pub row_ids: Vec<String>,
    pub columns: Vec<Feature>,
    pub values: Vec<Vec<f64>>,
}

impl FeatureMatrix {
    pub fn n_rows(&self) -> usize {
        self.values.len()
    }

    pub fn n_cols(&self) -> usize {
        self.columns.len()
    }

    pub fn column(&self, j: usize) -> impl Iterator<Item = f64> + '_ {
        self.values.iter().map(move |row| row[j])
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StandardizedMatrix {
    pub base: FeatureMatrix,
    pub values: Vec<Vec<f64>>,
    pub column_means: Vec<f64>,
    pub column_sds: Vec<f64>,
    /// Zero-variance columns; their standardised values are all zero.
    pub degenerate_columns: Vec<Feature>,
}

impl StandardizedMatrix {
    fn is_degenerate(&self, j: usize) -> bool {
        self.degenerate_columns.contains(&self.base.columns[j])
    }
}

pub fn mean_bpm(bar_bpm: &[f64]) -> Result<f64> {
    if bar_bpm.is_empty() {
        return domain("mean_bpm of an empty series");
    }
    Ok(bar_bpm.iter().sum::<f64>() / bar_bpm.len() as f64)
}

/// Sample (n - 1) standard deviation.
pub fn sample_sd(values: &[f64]) -> Result<f64> {
    if values.len() < 2 {
        return domain(format!(
            "sample SD needs at least 2 values, got {}",
            values.len()
        ));
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let ss: f64 = values.iter().map(|v| (v - mean) * (v - mean)).sum();
    Ok((ss / (n - 1.0)).sqrt())
}

/// Coefficient of variation: sample SD over mean.
pub fn cv_bpm(bar_bpm: &[f64]) -> Result<f64> {
    if bar_bpm.len() < 2 {
        return domain(format!(
            "cv_bpm needs at least 2 bars, got {}",
            bar_bpm.len()
        ));
    }
    Ok(sample_sd(bar_bpm)? / mean_bpm(bar_bpm)?)
}

pub fn build_feature_matrix(corpus: &Corpus, movement_id: &str) -> Result<FeatureMatrix> {
    let Some(movement) = corpus.movement(movement_id) else {
        return domain(format!("unknown movement `{movement_id}`"));
    };
    let columns = match movement.feature_spec {
        FeatureSpec::MeanOnly => vec![Feature::MeanBpm],
        FeatureSpec::MeanAndCv => vec![Feature::MeanBpm, Feature::Cv],
    };
    let mut row_ids = Vec::new();
    let mut values = Vec::new();
    for rec in corpus.recordings_of(movement_id) {
        let mut row = Vec::with_capacity(columns.len());
        for col in &columns {
            let v = match col {
                Feature::MeanBpm => mean_bpm(&rec.bar_bpm)?,
                Feature::Cv => cv_bpm(&rec.bar_bpm).map_err(|_| {
                    crate::Error::Domain(format!(
                        "recording `{}` has a single bar; CV needs at least 2",
                        rec.recording_id
                    ))
                })?,
            };
            row.push(v);
        }
        row_ids.push(rec.recording_id.clone());
        values.push(row);
    }
    if values.is_empty() {
        return domain(format!("movement `{movement_id}` has no recordings"));
    }
    Ok(FeatureMatrix {
        movement_id: movement_id.to_string(),
        row_ids,
        columns,
        values,
    })
}

pub fn z_standardize(m: &FeatureMatrix) -> Result<StandardizedMatrix> {
    let n = m.n_rows();
    if n < 2 {
        return domain(format!("standardisation needs at least 2 rows, got {n}"));
    }
    let mut values = vec![vec![0.0; m.n_cols()]; n];
    let mut column_means = Vec::with_capacity(m.n_cols());
    let mut column_sds = Vec::with_capacity(m.n_cols());
    let mut degenerate_columns = Vec::new();
    for (j, feature) in m.columns.iter().enumerate() {
        let col: Vec<f64> = m.column(j).collect();
        let mut mean = col.iter().sum::<f64>() / n as f64;
        let mut sd = sample_sd(&col)?;
        if sd > 0.0 && col.iter().any(|v| *v != col[0]) {
            let mut z: Vec<f64> = col.iter().map(|v| (v - mean) / sd).collect();
            // When the spread is tiny next to the magnitude the raw mean is
            // off by up to half an ulp; re-centre in standardised units.
            let z_mean = z.iter().sum::<f64>() / n as f64;
            z.iter_mut().for_each(|v| *v -= z_mean);
            let z_sd = sample_sd(&z)?;
            for (row, v) in values.iter_mut().zip(&z) {
                row[j] = v / z_sd;
            }
            mean += sd * z_mean;
            sd *= z_sd;
        } else {
            degenerate_columns.push(*feature);
        }
        column_means.push(mean);
        column_sds.push(sd);
    }
    Ok(StandardizedMatrix {
        base: m.clone(),
        values,
        column_means,
        column_sds,
        degenerate_columns,
    })
}

/// Map a point in standardised space back to raw feature units.
pub fn de_standardize(point: &[f64], s: &StandardizedMatrix) -> Result<Vec<f64>> {
    if point.len() != s.column_means.len() {
        return domain(format!(
            "point has {} coordinates, matrix has {} columns",
            point.len(),
            s.column_means.len()
        ));
    }
    Ok(point
        .iter()
        .enumerate()
        .map(|(j, z)| {
            if s.is_degenerate(j) {
                s.column_means[j]
            } else {
                z * s.column_sds[j] + s.column_means[j]
            }
        })
        .collect())
}
