//! Independent reference implementations and fixture data shared by the
//! integration tests and the acceptance runner.

#![allow(dead_code)]

use std::collections::BTreeMap;

use tempo_core::corpus::{Character, Corpus, FeatureSpec, Movement, Recording};

// ---------------------------------------------------------------- k-means

fn sse(points: &[&[f64]]) -> f64 {
    if points.is_empty() {
        return 0.0;
    }
    let dim = points[0].len();
    let mut total = 0.0;
    for d in 0..dim {
        let mean = points.iter().map(|p| p[d]).sum::<f64>() / points.len() as f64;
        total += points.iter().map(|p| (p[d] - mean).powi(2)).sum::<f64>();
    }
    total
}

/// Optimal 1-D k-means inertia by trying every split of the sorted values
/// into `k` contiguous runs.
pub fn kmeans_opt_1d(values: &[f64], k: usize) -> f64 {
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let pts: Vec<Vec<f64>> = sorted.iter().map(|&v| vec![v]).collect();
    let n = pts.len();
    let mut best = f64::INFINITY;
    // cut positions 0 < c1 < c2 < ... < n
    fn rec(pts: &[Vec<f64>], start: usize, parts_left: usize, acc: f64, best: &mut f64) {
        let n = pts.len();
        if parts_left == 1 {
            let run: Vec<&[f64]> = pts[start..].iter().map(|p| p.as_slice()).collect();
            *best = best.min(acc + sse(&run));
            return;
        }
        for end in start + 1..=n - (parts_left - 1) {
            let run: Vec<&[f64]> = pts[start..end].iter().map(|p| p.as_slice()).collect();
            rec(pts, end, parts_left - 1, acc + sse(&run), best);
        }
    }
    rec(&pts, 0, k.min(n), 0.0, &mut best);
    best
}

/// Optimal k-means inertia over all k-colourings of the points.
pub fn kmeans_opt_colorings(points: &[Vec<f64>], k: usize) -> f64 {
    let n = points.len();
    let total = k.pow(n as u32);
    let mut best = f64::INFINITY;
    let mut labels = vec![0usize; n];
    for code in 0..total {
        let mut c = code;
        for l in labels.iter_mut() {
            *l = c % k;
            c /= k;
        }
        let mut cost = 0.0;
        for j in 0..k {
            let members: Vec<&[f64]> = (0..n)
                .filter(|&i| labels[i] == j)
                .map(|i| points[i].as_slice())
                .collect();
            cost += sse(&members);
        }
        best = best.min(cost);
    }
    best
}

// ---------------------------------------------------------------- silhouette

pub fn silhouette_brute(points: &[Vec<f64>], assignments: &[usize]) -> (Vec<f64>, f64) {
    let dist = |a: &[f64], b: &[f64]| {
        a.iter()
            .zip(b)
            .map(|(x, y)| (x - y).powi(2))
            .sum::<f64>()
            .sqrt()
    };
    let labels: std::collections::BTreeSet<usize> = assignments.iter().copied().collect();
    let n = points.len();
    let mut scores = Vec::with_capacity(n);
    for i in 0..n {
        let own = assignments[i];
        let own_size = assignments.iter().filter(|&&a| a == own).count();
        if own_size == 1 {
            scores.push(0.0);
            continue;
        }
        let mean_to = |label: usize| {
            let (mut s, mut c) = (0.0, 0usize);
            for j in 0..n {
                if j != i && assignments[j] == label {
                    s += dist(&points[i], &points[j]);
                    c += 1;
                }
            }
            s / c as f64
        };
        let a = mean_to(own);
        let b = labels
            .iter()
            .filter(|&&l| l != own)
            .map(|&l| mean_to(l))
            .fold(f64::INFINITY, f64::min);
        let m = a.max(b);
        scores.push(if m == 0.0 { 0.0 } else { (b - a) / m });
    }
    let mean = scores.iter().sum::<f64>() / n as f64;
    (scores, mean)
}

// ---------------------------------------------------------------- regression

pub struct OlsOracle {
    pub slope: f64,
    pub intercept: f64,
    pub r_squared: f64,
    pub slope_se: f64,
    pub t: f64,
}

/// Solves the 2x2 normal equations by Cramer's rule.
pub fn ols_normal_equations(x: &[f64], y: &[f64]) -> OlsOracle {
    let n = x.len() as f64;
    let sx: f64 = x.iter().sum();
    let sxx: f64 = x.iter().map(|v| v * v).sum();
    let sy: f64 = y.iter().sum();
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| a * b).sum();
    let det = n * sxx - sx * sx;
    let intercept = (sy * sxx - sx * sxy) / det;
    let slope = (n * sxy - sx * sy) / det;
    let ybar = sy / n;
    let ss_res: f64 = x
        .iter()
        .zip(y)
        .map(|(a, b)| (b - intercept - slope * a).powi(2))
        .sum();
    let ss_tot: f64 = y.iter().map(|b| (b - ybar).powi(2)).sum();
    let sigma2 = ss_res / (n - 2.0);
    // Var(slope) = sigma^2 * n / det, the (2,2) entry of sigma^2 (X'X)^-1.
    let slope_se = (sigma2 * n / det).sqrt();
    OlsOracle {
        slope,
        intercept,
        r_squared: 1.0 - ss_res / ss_tot,
        slope_se,
        t: slope / slope_se,
    }
}

/// Gamma((nu+1)/2) / Gamma(nu/2) by the recursion r(nu+1) = (nu/2) / r(nu).
fn gamma_ratio(df: u32) -> f64 {
    let mut r = 1.0 / std::f64::consts::PI.sqrt();
    for nu in 1..df {
        r = (nu as f64 / 2.0) / r;
    }
    r
}

pub fn t_density(x: f64, df: u32) -> f64 {
    let nu = df as f64;
    gamma_ratio(df) / (nu * std::f64::consts::PI).sqrt()
        * (1.0 + x * x / nu).powf(-(nu + 1.0) / 2.0)
}

fn simpson(a: f64, b: f64, fa: f64, fm: f64, fb: f64) -> f64 {
    (b - a) / 6.0 * (fa + 4.0 * fm + fb)
}

#[allow(clippy::too_many_arguments)]
fn adaptive(
    f: &dyn Fn(f64) -> f64,
    a: f64,
    b: f64,
    fa: f64,
    fm: f64,
    fb: f64,
    whole: f64,
    eps: f64,
    depth: u32,
) -> f64 {
    let m = 0.5 * (a + b);
    let (lm, rm) = (0.5 * (a + m), 0.5 * (m + b));
    let (flm, frm) = (f(lm), f(rm));
    let left = simpson(a, m, fa, flm, fm);
    let right = simpson(m, b, fm, frm, fb);
    let diff = left + right - whole;
    if depth == 0 || diff.abs() <= 15.0 * eps {
        return left + right + diff / 15.0;
    }
    adaptive(f, a, m, fa, flm, fm, left, eps / 2.0, depth - 1)
        + adaptive(f, m, b, fm, frm, fb, right, eps / 2.0, depth - 1)
}

pub fn integrate(f: &dyn Fn(f64) -> f64, a: f64, b: f64, eps: f64) -> f64 {
    if a == b {
        return 0.0;
    }
    let (fa, fm, fb) = (f(a), f(0.5 * (a + b)), f(b));
    let whole = simpson(a, b, fa, fm, fb);
    adaptive(f, a, b, fa, fm, fb, whole, eps, 60)
}

/// Student t CDF by adaptive Simpson quadrature of the density on [0, |t|].
pub fn t_cdf_quadrature(t: f64, df: u32) -> f64 {
    let half = integrate(&|x| t_density(x, df), 0.0, t.abs(), 1e-14);
    if t >= 0.0 {
        0.5 + half
    } else {
        0.5 - half
    }
}

/// Standard normal CDF from the Maclaurin series of erf.
pub fn normal_cdf(x: f64) -> f64 {
    let z = x / std::f64::consts::SQRT_2;
    let mut term = z;
    let mut sum = z;
    for n in 1..200 {
        term *= -z * z / n as f64;
        let add = term / (2 * n + 1) as f64;
        sum += add;
        if add.abs() < 1e-18 {
            break;
        }
    }
    0.5 * (1.0 + 2.0 / std::f64::consts::PI.sqrt() * sum)
}

// ---------------------------------------------------------------- contingency

/// Pearson chi-square from expected counts, and Cramér's V.
pub fn chi_square_oracle(table: &[Vec<u64>]) -> (f64, f64) {
    let rows: Vec<f64> = table.iter().map(|r| r.iter().sum::<u64>() as f64).collect();
    let cols: Vec<f64> = (0..table[0].len())
        .map(|j| table.iter().map(|r| r[j]).sum::<u64>() as f64)
        .collect();
    let n: f64 = rows.iter().sum();
    let mut chi = 0.0;
    for (i, row) in table.iter().enumerate() {
        for (j, &o) in row.iter().enumerate() {
            let e = rows[i] * cols[j] / n;
            chi += (o as f64 - e).powi(2) / e;
        }
    }
    let m = rows.len().min(cols.len()) as f64 - 1.0;
    (chi, (chi / (n * m)).sqrt())
}

// ---------------------------------------------------------------- fixtures

pub struct TableMovement {
    pub id: &'static str,
    pub sonata: &'static str,
    pub name: &'static str,
    pub character: Character,
    pub beats_per_bar: u32,
    pub rows: &'static [&'static str],
}

impl TableMovement {
    pub fn movement(&self) -> Movement {
        Movement {
            movement_id: self.id.to_string(),
            sonata_label: self.sonata.to_string(),
            movement_name: self.name.to_string(),
            character: self.character,
            beats_per_bar: self.beats_per_bar,
            feature_spec: FeatureSpec::MeanOnly,
        }
    }
}

/// Cluster summaries for the nine analysed movements, fast-character first.
pub const TABLES: &[TableMovement] = &[
    TableMovement {
        id: "op5-1-rondo",
        sonata: "Op.5/1",
        name: "Rondo",
        character: Character::Fast,
        beats_per_bar: 2,
        rows: &[
            "Slow 3 78.0 75--82",
            "Mid 13 83.1 80--86",
            "Fast 4 90.2 88--92",
        ],
    },
    TableMovement {
        id: "op5-2-rondo",
        sonata: "Op.5/2",
        name: "Rondo",
        character: Character::Fast,
        beats_per_bar: 2,
        rows: &["Mid 14 66.5 61--71", "Fast 5 76.7 73--81", "Slow 0 --- ---"],
    },
    TableMovement {
        id: "op69-scherzo",
        sonata: "Op.69",
        name: "Scherzo",
        character: Character::Fast,
        beats_per_bar: 1,
        rows: &[
            "Mid 14 92.3 88--98",
            "Fast 8 115.0 105--161",
            "Slow 0 --- ---",
        ],
    },
    TableMovement {
        id: "op69-allegro",
        sonata: "Op.69",
        name: "Allegro",
        character: Character::Fast,
        beats_per_bar: 2,
        rows: &[
            "Slow 6 145.0 142--148",
            "Mid 7 148.6 147--151",
            "Fast 9 156.0 152--161",
        ],
    },
    TableMovement {
        id: "op102-1-allegro",
        sonata: "Op.102/1",
        name: "Allegro",
        character: Character::Fast,
        beats_per_bar: 2,
        rows: &[
            "Slow 6 98.8 97--103",
            "Mid 8 110.5 110--118",
            "Fast 7 121.4 116--161",
        ],
    },
    TableMovement {
        id: "op102-2-allegro",
        sonata: "Op.102/2",
        name: "Allegro",
        character: Character::Fast,
        beats_per_bar: 4,
        rows: &[
            "Slow 6 52.2 30--57",
            "Mid 14 56.6 53--60",
            "Fast 1 65.7 ---",
        ],
    },
    TableMovement {
        id: "op69-adagio",
        sonata: "Op.69",
        name: "Adagio",
        character: Character::Slow,
        beats_per_bar: 2,
        rows: &[
            "Slow 6 36.3 31--39",
            "Mid 10 42.7 42--46",
            "Fast 4 48.3 48--53",
        ],
    },
    TableMovement {
        id: "op102-1-adagio",
        sonata: "Op.102/1",
        name: "Adagio",
        character: Character::Slow,
        beats_per_bar: 4,
        rows: &[
            "Slow 3 37.3 36--39",
            "Mid 11 43.0 42--46",
            "Fast 6 49.2 48--53",
        ],
    },
    TableMovement {
        id: "op102-2-adagio",
        sonata: "Op.102/2",
        name: "Adagio",
        character: Character::Slow,
        beats_per_bar: 4,
        rows: &["Mid 14 33.8 30--37", "Fast 9 42.3 39--53", "Slow 0 --- ---"],
    },
];

/// Reference (tempo %, duration %) pairs of the aggregate-change table.
pub const CHANGE_PAIRS: [(f64, f64); 9] = [
    (10.0, -9.1),
    (5.1, -5.0),
    (-40.4, 67.9),
    (13.9, -12.5),
    (1.2, 5.3),
    (-2.3, 2.1),
    (4.1, -4.0),
    (14.0, -12.5),
    (9.4, -8.7),
];

pub fn plain_movement(id: &str, character: Character, beats_per_bar: u32) -> Movement {
    Movement {
        movement_id: id.to_string(),
        sonata_label: String::new(),
        movement_name: id.to_string(),
        character,
        beats_per_bar,
        feature_spec: FeatureSpec::MeanOnly,
    }
}

/// A recording whose bars all play at `bpm`.
pub fn uniform_recording(
    movement_id: &str,
    index: usize,
    year: i32,
    bpm: f64,
    bars: usize,
) -> Recording {
    Recording {
        recording_id: format!("{movement_id}-{index:03}"),
        performer: format!("performer {index}"),
        year,
        movement_id: movement_id.to_string(),
        bar_bpm: vec![bpm; bars],
        background: BTreeMap::new(),
    }
}

/// A single-movement corpus of uniform recordings from `(year, bpm)` pairs.
pub fn uniform_corpus(movement: Movement, recordings: &[(i32, f64)], bars: usize) -> Corpus {
    let id = movement.movement_id.clone();
    let recs: Vec<Recording> = recordings
        .iter()
        .enumerate()
        .map(|(i, &(y, b))| uniform_recording(&id, i, y, b, bars))
        .collect();
    Corpus::new([movement], recs).expect("fixture corpus is valid")
}

use tempo_core::synth::{
    spec_from_table_rows, synth_corpus, ClusterSpec, SynthSpec, TableOptions, TableRow,
};
use tempo_core::traditions::{analyze_movement, AnalysisOptions, Label, MovementReport};

pub fn table_rows(tm: &TableMovement) -> Vec<TableRow> {
    tm.rows
        .iter()
        .map(|r| r.parse().expect("fixture row parses"))
        .collect()
}

/// Synthetic corpus for one table movement with the default range/4 convention.
pub fn table_spec(tm: &TableMovement, seed: u64) -> SynthSpec {
    let opts = TableOptions {
        seed,
        ..TableOptions::default()
    };
    spec_from_table_rows(tm.movement(), &table_rows(tm), &opts).expect("fixture spec is valid")
}

/// Synthesize a table movement and analyse it with the default options and
/// `analysis_seed`.
pub fn reconstruct(
    tm: &TableMovement,
    synth_seed: u64,
    analysis_seed: u64,
) -> (Corpus, MovementReport) {
    let corpus = synth_corpus(&table_spec(tm, synth_seed)).expect("synth succeeds");
    let opts = AnalysisOptions {
        seed: analysis_seed,
        ..AnalysisOptions::default()
    };
    let report = analyze_movement(&corpus, tm.id, &opts).expect("analysis succeeds");
    (corpus, report)
}

/// Mismatches between a reconstruction and the table it was built from:
/// cluster count, labelled means within `tol` BPM, and empty traditions.
pub fn table_mismatches(tm: &TableMovement, report: &MovementReport, tol: f64) -> Vec<String> {
    let rows = table_rows(tm);
    let mut out = Vec::new();
    let expected_k = rows.iter().filter(|r| r.n > 0).count();
    if report.clusters.len() != expected_k {
        out.push(format!(
            "{} clusters, expected {expected_k}",
            report.clusters.len()
        ));
    }
    for row in &rows {
        match (row.n, report.cluster(row.label)) {
            (0, Some(c)) => out.push(format!(
                "{} should be empty, has {} members",
                row.label.as_str(),
                c.n
            )),
            (0, None) => {
                if !report.empty_labels.contains(&row.label) {
                    out.push(format!("{} not reported empty", row.label.as_str()));
                }
            }
            (_, None) => out.push(format!("{} missing", row.label.as_str())),
            (_, Some(c)) => {
                let want = row.mean_bpm.expect("non-empty row has a mean");
                if (c.mean_bpm - want).abs() > tol {
                    out.push(format!(
                        "{} mean {:.2} vs {want:.1}",
                        row.label.as_str(),
                        c.mean_bpm
                    ));
                }
            }
        }
    }
    out
}

/// A mid-range cluster drifting at `slope` BPM per year, eight recordings
/// over 1937-2004, with Gaussian noise `noise_sd`.
pub fn drift_spec(slope: f64, noise_sd: f64, seed: u64) -> SynthSpec {
    SynthSpec {
        movement: plain_movement("drift", Character::Fast, 2),
        clusters: vec![ClusterSpec {
            label_hint: Some(Label::Mid),
            n: 8,
            mean_bpm: 110.5,
            sd_bpm: noise_sd,
            year_min: 1937,
            year_max: 2004,
            slope_bpm_per_year: slope,
        }],
        bars_per_recording: 16,
        bar_noise_sd: 0.0,
        seed,
        background: BTreeMap::new(),
    }
}

/// Noise SD at which a line of `slope` over the drift design explains a
/// population share `r2` of the variance.
pub fn drift_noise_for_r2(slope: f64, r2: f64) -> f64 {
    let spec = drift_spec(slope, 0.0, 0);
    let corpus = synth_corpus(&spec).expect("drift spec is valid");
    let years: Vec<f64> = corpus.recordings().map(|r| f64::from(r.year)).collect();
    let mean = years.iter().sum::<f64>() / years.len() as f64;
    let var_x = years.iter().map(|y| (y - mean).powi(2)).sum::<f64>() / years.len() as f64;
    slope.abs() * var_x.sqrt() * ((1.0 - r2) / r2).sqrt()
}

pub fn median(values: &mut [f64]) -> f64 {
    values.sort_by(f64::total_cmp);
    let n = values.len();
    if n % 2 == 1 {
        values[n / 2]
    } else {
        0.5 * (values[n / 2 - 1] + values[n / 2])
    }
}

/// Noise SD whose median sample R² over `calibration_seeds` hits `target_r2`,
/// found by bisection. Small samples inflate R², so the population formula of
/// [`drift_noise_for_r2`] only brackets the answer.
pub fn calibrate_drift_noise(
    slope: f64,
    target_r2: f64,
    calibration_seeds: std::ops::Range<u64>,
) -> f64 {
    let median_r2 = |noise: f64| {
        let mut r2: Vec<f64> = calibration_seeds
            .clone()
            .map(|s| drift_fit(slope, noise, s).r_squared)
            .collect();
        median(&mut r2)
    };
    let guess = drift_noise_for_r2(slope, target_r2);
    let (mut lo, mut hi) = (guess / 4.0, guess * 4.0);
    for _ in 0..60 {
        let mid = 0.5 * (lo + hi);
        if median_r2(mid) > target_r2 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

/// OLS fit of recording mean BPM on year for one drift corpus.
pub fn drift_fit(slope: f64, noise_sd: f64, seed: u64) -> tempo_core::RegressionFit {
    let corpus = synth_corpus(&drift_spec(slope, noise_sd, seed)).expect("drift spec is valid");
    let x: Vec<f64> = corpus.recordings().map(|r| f64::from(r.year)).collect();
    let y: Vec<f64> = corpus
        .recordings()
        .map(|r| r.bar_bpm.iter().sum::<f64>() / r.bar_bpm.len() as f64)
        .collect();
    tempo_core::regress::ols_fit(&x, &y).expect("years vary")
}
