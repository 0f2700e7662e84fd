//! Seeded k-means with k-means++ initialisation and best-of-N restarts.

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{domain, Result};
use crate::features::{de_standardize, StandardizedMatrix};
use crate::rng;

/// Lloyd iteration cap per restart.
pub const MAX_ITERATIONS: usize = 300;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClusterModel {
    pub k: usize,
    pub centroids_std: Vec<Vec<f64>>,
    /// Centroids in raw feature units. Equal to `centroids_std` until
    /// [`ClusterModel::map_to_raw`] is applied.
    pub centroids_raw: Vec<Vec<f64>>,
    pub assignments: Vec<usize>,
    pub inertia: f64,
    pub seed: u64,
    pub restarts: usize,
    pub winning_restart: usize,
    pub iterations: usize,
    pub converged: bool,
    /// Cluster indices with no members. Non-empty means the model effectively
    /// has fewer than `k` clusters.
    pub empty_clusters: Vec<usize>,
}

impl ClusterModel {
    pub fn cluster_sizes(&self) -> Vec<usize> {
        let mut sizes = vec![0; self.k];
        for &a in &self.assignments {
            sizes[a] += 1;
        }
        sizes
    }

    pub fn effective_k(&self) -> usize {
        self.k - self.empty_clusters.len()
    }

    pub fn map_to_raw(&mut self, s: &StandardizedMatrix) -> Result<()> {
        self.centroids_raw = self
            .centroids_std
            .iter()
            .map(|c| de_standardize(c, s))
            .collect::<Result<_>>()?;
        Ok(())
    }
}

pub(crate) fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

fn check_points(points: &[Vec<f64>]) -> Result<usize> {
    let Some(first) = points.first() else {
        return domain("no points");
    };
    let dim = first.len();
    if dim == 0 {
        return domain("points have zero dimensions");
    }
    for (i, p) in points.iter().enumerate() {
        if p.len() != dim {
            return domain(format!(
                "point {i} has {} coordinates, expected {dim}",
                p.len()
            ));
        }
        if p.iter().any(|v| !v.is_finite()) {
            return domain(format!("point {i} has a non-finite coordinate"));
        }
    }
    Ok(dim)
}

/// Index of the nearest centroid (lowest index on ties) and its squared distance.
pub fn nearest(point: &[f64], centroids: &[Vec<f64>]) -> (usize, f64) {
    let mut best = (0, f64::INFINITY);
    for (j, c) in centroids.iter().enumerate() {
        let d = sq_dist(point, c);
        if d < best.1 {
            best = (j, d);
        }
    }
    best
}

/// k-means++ seeding: the first centroid uniformly, each further one with
/// probability proportional to the squared distance to its nearest chosen
/// centroid (uniformly when every distance is zero).
pub fn kmeans_pp_init<R: Rng + ?Sized>(
    points: &[Vec<f64>],
    k: usize,
    rng: &mut R,
) -> Result<Vec<Vec<f64>>> {
    check_points(points)?;
    let n = points.len();
    if k == 0 || k > n {
        return domain(format!("k = {k} must lie in 1..={n}"));
    }
    let mut centroids = Vec::with_capacity(k);
    centroids.push(points[rng.random_range(0..n)].clone());
    let mut d2: Vec<f64> = points.iter().map(|p| sq_dist(p, &centroids[0])).collect();
    while centroids.len() < k {
        let total: f64 = d2.iter().sum();
        let pick = if total > 0.0 {
            let target = rng.random::<f64>() * total;
            let mut acc = 0.0;
            let mut chosen = None;
            for (i, w) in d2.iter().enumerate() {
                acc += w;
                if *w > 0.0 && acc > target {
                    chosen = Some(i);
                    break;
                }
            }
            // rounding can leave `target` just above the final partial sum
            chosen.unwrap_or_else(|| d2.iter().rposition(|w| *w > 0.0).expect("total > 0"))
        } else {
            rng.random_range(0..n)
        };
        let c = points[pick].clone();
        for (d, p) in d2.iter_mut().zip(points) {
            *d = d.min(sq_dist(p, &c));
        }
        centroids.push(c);
    }
    Ok(centroids)
}

/// Outcome of one Lloyd iteration.
#[derive(Debug, Clone, PartialEq)]
pub struct LloydStep {
    pub assignments: Vec<usize>,
    /// Centroids after the mean update (and any empty-cluster re-seeding).
    pub centroids: Vec<Vec<f64>>,
    /// Inertia of `assignments` against the centroids passed in.
    pub inertia: f64,
    /// Clusters that emptied and were re-seeded.
    pub reseeded: Vec<usize>,
}

/// One assignment + update pass. An emptied cluster is moved onto the point
/// farthest from its assigned centroid; several empties take successive
/// farthest points.
pub fn lloyd_step(points: &[Vec<f64>], centroids: &[Vec<f64>]) -> Result<LloydStep> {
    let dim = check_points(points)?;
    if centroids.is_empty() {
        return domain("no centroids");
    }
    if let Some(c) = centroids.iter().find(|c| c.len() != dim) {
        return domain(format!(
            "centroid has {} coordinates, points have {dim}",
            c.len()
        ));
    }
    let k = centroids.len();
    let mut assignments = Vec::with_capacity(points.len());
    let mut dists = Vec::with_capacity(points.len());
    for p in points {
        let (j, d) = nearest(p, centroids);
        assignments.push(j);
        dists.push(d);
    }
    let inertia = dists.iter().sum();

    let mut sums = vec![vec![0.0; dim]; k];
    let mut counts = vec![0usize; k];
    for (p, &a) in points.iter().zip(&assignments) {
        counts[a] += 1;
        for (s, v) in sums[a].iter_mut().zip(p) {
            *s += v;
        }
    }
    let mut updated: Vec<Vec<f64>> = sums
        .into_iter()
        .zip(&counts)
        .zip(centroids)
        .map(|((s, &c), old)| {
            if c == 0 {
                old.clone()
            } else {
                s.into_iter().map(|v| v / c as f64).collect()
            }
        })
        .collect();

    let reseeded: Vec<usize> = (0..k).filter(|&j| counts[j] == 0).collect();
    if !reseeded.is_empty() {
        let mut order: Vec<usize> = (0..points.len()).collect();
        // farthest first, lowest index on ties
        order.sort_by(|&a, &b| dists[b].total_cmp(&dists[a]).then(a.cmp(&b)));
        for (&j, &i) in reseeded.iter().zip(order.iter().cycle()) {
            updated[j] = points[i].clone();
        }
    }

    Ok(LloydStep {
        assignments,
        centroids: updated,
        inertia,
        reseeded,
    })
}

/// A full Lloyd descent from given initial centroids.
#[derive(Debug, Clone, PartialEq)]
pub struct Descent {
    pub assignments: Vec<usize>,
    /// Centroids the final assignment was computed against.
    pub centroids: Vec<Vec<f64>>,
    pub inertia: f64,
    pub iterations: usize,
    pub converged: bool,
    /// Assignment inertia of every iteration, in order.
    pub trace: Vec<f64>,
}

/// Iterate [`lloyd_step`] until the assignment repeats or `max_iter` passes.
pub fn lloyd_descent(points: &[Vec<f64>], init: Vec<Vec<f64>>, max_iter: usize) -> Result<Descent> {
    let mut centroids = init;
    let mut previous: Option<Vec<usize>> = None;
    let mut trace = Vec::new();
    for iteration in 1..=max_iter.max(1) {
        let step = lloyd_step(points, &centroids)?;
        trace.push(step.inertia);
        if previous.as_ref() == Some(&step.assignments) {
            return Ok(Descent {
                assignments: step.assignments,
                centroids,
                inertia: step.inertia,
                iterations: iteration,
                converged: true,
                trace,
            });
        }
        centroids = step.centroids;
        previous = Some(step.assignments);
    }
    // cap reached: assign against the last update so centroids and labels agree
    let final_step = lloyd_step(points, &centroids)?;
    trace.push(final_step.inertia);
    Ok(Descent {
        assignments: final_step.assignments,
        centroids,
        inertia: final_step.inertia,
        iterations: trace.len(),
        converged: false,
        trace,
    })
}

/// Best of `restarts` k-means++/Lloyd runs. Restart `i` draws from
/// `rng::stream(seed, i)`; the lowest inertia wins, lowest restart on ties.
pub fn kmeans_fit(
    points: &[Vec<f64>],
    k: usize,
    restarts: usize,
    seed: u64,
) -> Result<ClusterModel> {
    check_points(points)?;
    let n = points.len();
    if k == 0 || k > n {
        return domain(format!("k = {k} must lie in 1..={n}"));
    }
    if restarts == 0 {
        return domain("restarts must be >= 1");
    }
    let runs: Vec<Descent> = (0..restarts)
        .into_par_iter()
        .map(|r| {
            let mut rng = rng::stream(seed, r as u64);
            let init = kmeans_pp_init(points, k, &mut rng)?;
            lloyd_descent(points, init, MAX_ITERATIONS)
        })
        .collect::<Result<_>>()?;

    let mut best = 0;
    for (i, run) in runs.iter().enumerate().skip(1) {
        if run.inertia < runs[best].inertia {
            best = i;
        }
    }
    let run = runs.into_iter().nth(best).expect("restarts >= 1");
    let mut sizes = vec![0usize; k];
    for &a in &run.assignments {
        sizes[a] += 1;
    }
    Ok(ClusterModel {
        k,
        centroids_raw: run.centroids.clone(),
        centroids_std: run.centroids,
        assignments: run.assignments,
        inertia: run.inertia,
        seed,
        restarts,
        winning_restart: best,
        iterations: run.iterations,
        converged: run.converged,
        empty_clusters: (0..k).filter(|&j| sizes[j] == 0).collect(),
    })
}

/// Total within-cluster sum of squared distances.
pub fn inertia(points: &[Vec<f64>], assignments: &[usize], centroids: &[Vec<f64>]) -> Result<f64> {
    if points.len() != assignments.len() {
        return domain(format!(
            "{} points but {} assignments",
            points.len(),
            assignments.len()
        ));
    }
    let mut total = 0.0;
    for (i, (p, &a)) in points.iter().zip(assignments).enumerate() {
        let Some(c) = centroids.get(a) else {
            return domain(format!(
                "point {i} assigned to cluster {a} of {}",
                centroids.len()
            ));
        };
        if c.len() != p.len() {
            return domain(format!("point {i} and centroid {a} differ in dimension"));
        }
        total += sq_dist(p, c);
    }
    Ok(total)
}
