//! How many clusters does a movement support? WCSS (elbow) curves and
//! silhouette scores, plus the policy that decides between two and three.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::error::{domain, Result};
use crate::kmeans::{kmeans_fit, ClusterModel};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ValidityPolicy {
    pub min_silhouette: f64,
    pub min_cluster_size: usize,
    /// How far the k = 3 silhouette may trail k = 2 and still be accepted.
    pub silhouette_slack: f64,
}

impl Default for ValidityPolicy {
    fn default() -> Self {
        ValidityPolicy {
            min_silhouette: 0.40,
            min_cluster_size: 1,
            silhouette_slack: 0.02,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ValidityReport {
    pub movement_id: String,
    pub k_min: usize,
    pub k_max: usize,
    pub wcss_by_k: BTreeMap<usize, f64>,
    pub mean_silhouette_by_k: BTreeMap<usize, f64>,
    pub cluster_sizes_by_k: BTreeMap<usize, Vec<usize>>,
    /// `(W(k-1) - W(k)) / (W(k) - W(k+1))` for interior k.
    pub drop_ratios: BTreeMap<usize, f64>,
    pub elbow_k: Option<usize>,
    pub supported_k: usize,
    pub three_way_supported: bool,
    pub policy: ValidityPolicy,
}

/// Winning inertia of [`kmeans_fit`] for every k in `k_min..=k_max`.
pub fn wcss_curve(
    points: &[Vec<f64>],
    k_min: usize,
    k_max: usize,
    restarts: usize,
    seed: u64,
) -> Result<BTreeMap<usize, f64>> {
    Ok(
        fit_range(points, (k_min..=k_max).collect(), restarts, seed)?
            .into_iter()
            .map(|(k, m)| (k, m.inertia))
            .collect(),
    )
}

fn fit_range(
    points: &[Vec<f64>],
    ks: BTreeSet<usize>,
    restarts: usize,
    seed: u64,
) -> Result<BTreeMap<usize, ClusterModel>> {
    if ks.is_empty() {
        return domain("empty k range");
    }
    if let Some(&k) = ks.iter().next_back() {
        if k > points.len() {
            return domain(format!("k = {k} exceeds the {} points", points.len()));
        }
    }
    ks.into_iter()
        .map(|k| kmeans_fit(points, k, restarts, seed).map(|m| (k, m)))
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct Silhouette {
    pub scores: Vec<f64>,
    pub mean: f64,
}

fn dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y) * (x - y))
        .sum::<f64>()
        .sqrt()
}

/// Silhouette coefficients. Members of singleton clusters score 0.
pub fn silhouette(points: &[Vec<f64>], assignments: &[usize]) -> Result<Silhouette> {
    let n = points.len();
    if assignments.len() != n {
        return domain(format!("{n} points but {} assignments", assignments.len()));
    }
    if n < 3 {
        return domain(format!("silhouette needs at least 3 points, got {n}"));
    }
    let k = assignments.iter().max().map_or(0, |m| m + 1);
    let mut sizes = vec![0usize; k];
    for &a in assignments {
        sizes[a] += 1;
    }
    let occupied = sizes.iter().filter(|&&s| s > 0).count();
    if occupied < 2 {
        return domain("silhouette needs at least 2 non-empty clusters");
    }
    if points.iter().all(|p| dist(p, &points[0]) == 0.0) {
        return domain("silhouette undefined: all points coincide");
    }

    let mut scores = Vec::with_capacity(n);
    let mut sums = vec![0.0; k];
    for i in 0..n {
        let own = assignments[i];
        if sizes[own] == 1 {
            scores.push(0.0);
            continue;
        }
        sums.iter_mut().for_each(|s| *s = 0.0);
        for j in 0..n {
            if j != i {
                sums[assignments[j]] += dist(&points[i], &points[j]);
            }
        }
        let a = sums[own] / (sizes[own] - 1) as f64;
        let b = (0..k)
            .filter(|&c| c != own && sizes[c] > 0)
            .map(|c| sums[c] / sizes[c] as f64)
            .fold(f64::INFINITY, f64::min);
        let denom = a.max(b);
        scores.push(if denom > 0.0 { (b - a) / denom } else { 0.0 });
    }
    let mean = scores.iter().sum::<f64>() / n as f64;
    Ok(Silhouette { scores, mean })
}

/// Decide between two and three clusters. Returns
/// `(supported_k, three_way_supported)`.
pub fn choose_k(
    mean_silhouette_by_k: &BTreeMap<usize, f64>,
    cluster_sizes_by_k: &BTreeMap<usize, Vec<usize>>,
    policy: &ValidityPolicy,
) -> Result<(usize, bool)> {
    let (Some(&s2), Some(&s3)) = (mean_silhouette_by_k.get(&2), mean_silhouette_by_k.get(&3))
    else {
        return domain("choose_k needs silhouettes for k = 2 and k = 3");
    };
    let Some(sizes3) = cluster_sizes_by_k.get(&3) else {
        return domain("choose_k needs cluster sizes for k = 3");
    };
    let three = s3 >= s2 - policy.silhouette_slack
        && s3 >= policy.min_silhouette
        && sizes3.len() == 3
        && sizes3.iter().all(|&s| s >= policy.min_cluster_size.max(1));
    Ok((if three { 3 } else { 2 }, three))
}

/// Drop ratios of a WCSS curve and the k with the sharpest bend.
pub fn elbow(wcss_by_k: &BTreeMap<usize, f64>) -> (BTreeMap<usize, f64>, Option<usize>) {
    let ks: Vec<usize> = wcss_by_k.keys().copied().collect();
    let scale = wcss_by_k.values().copied().fold(0.0, f64::max);
    let floor = (scale * 1e-12).max(f64::MIN_POSITIVE);
    let mut ratios = BTreeMap::new();
    for w in ks.windows(3) {
        let (prev, k, next) = (w[0], w[1], w[2]);
        if prev + 1 != k || k + 1 != next {
            continue;
        }
        let before = wcss_by_k[&prev] - wcss_by_k[&k];
        let after = (wcss_by_k[&k] - wcss_by_k[&next]).max(floor);
        ratios.insert(k, before.max(0.0) / after);
    }
    let best = ratios
        .iter()
        .fold(None::<(usize, f64)>, |acc, (&k, &r)| match acc {
            Some((_, br)) if br >= r => acc,
            _ => Some((k, r)),
        })
        .map(|(k, _)| k);
    (ratios, best)
}

/// Full validity evaluation over `k_min..=k_max` (k = 2 and 3 are always
/// included). Also returns the fitted model for every evaluated k.
pub fn validity_report(
    movement_id: &str,
    points: &[Vec<f64>],
    k_min: usize,
    k_max: usize,
    restarts: usize,
    seed: u64,
    policy: ValidityPolicy,
) -> Result<(ValidityReport, BTreeMap<usize, ClusterModel>)> {
    if k_min == 0 || k_min > k_max {
        return domain(format!("bad k range {k_min}..={k_max}"));
    }
    let mut ks: BTreeSet<usize> = (k_min..=k_max).collect();
    ks.extend([2, 3]);
    let models = fit_range(points, ks, restarts, seed)?;

    let mut wcss_by_k = BTreeMap::new();
    let mut mean_silhouette_by_k = BTreeMap::new();
    let mut cluster_sizes_by_k = BTreeMap::new();
    for (&k, model) in &models {
        wcss_by_k.insert(k, model.inertia);
        cluster_sizes_by_k.insert(k, model.cluster_sizes());
        if k >= 2 {
            match silhouette(points, &model.assignments) {
                Ok(s) => {
                    mean_silhouette_by_k.insert(k, s.mean);
                }
                Err(e) if k == 2 || k == 3 => return Err(e),
                Err(_) => {}
            }
        }
    }
    let (supported_k, three_way_supported) =
        choose_k(&mean_silhouette_by_k, &cluster_sizes_by_k, &policy)?;
    let (drop_ratios, elbow_k) = elbow(&wcss_by_k);
    Ok((
        ValidityReport {
            movement_id: movement_id.to_string(),
            k_min: k_min.min(2),
            k_max: k_max.max(3),
            wcss_by_k,
            mean_silhouette_by_k,
            cluster_sizes_by_k,
            drop_ratios,
            elbow_k,
            supported_k,
            three_way_supported,
            policy,
        },
        models,
    ))
}
