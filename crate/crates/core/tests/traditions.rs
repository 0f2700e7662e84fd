mod common;

use std::collections::BTreeMap;

use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use tempo_core::corpus::{Character, Corpus, Recording};
use tempo_core::synth::{spec_from_table_rows, synth_corpus, ClusterSpec, SynthSpec, TableOptions};
use tempo_core::traditions::{
    aggregate_period_change, analyze_movement, background_association, contingency_stats,
    intra_cluster_fit, label_clusters, tempo_duration_correlation, AggregateChange,
    AnalysisOptions, Label,
};

fn cluster(label: Label, n: usize, mean: f64, sd: f64) -> ClusterSpec {
    ClusterSpec {
        label_hint: Some(label),
        n,
        mean_bpm: mean,
        sd_bpm: sd,
        year_min: 1930,
        year_max: 2012,
        slope_bpm_per_year: 0.0,
    }
}

fn spec(id: &str, clusters: Vec<ClusterSpec>, seed: u64) -> SynthSpec {
    SynthSpec {
        movement: common::plain_movement(id, Character::Fast, 2),
        clusters,
        bars_per_recording: 24,
        bar_noise_sd: 0.0,
        seed,
        background: BTreeMap::new(),
    }
}

fn hint_of(r: &Recording) -> &str {
    r.performer.split(' ').next().unwrap()
}

#[test]
fn op5_1_rondo_shape_is_recovered() {
    let s = spec(
        "op5-1",
        vec![
            cluster(Label::Slow, 3, 78.0, 1.0),
            cluster(Label::Mid, 13, 83.1, 1.0),
            cluster(Label::Fast, 4, 90.2, 1.0),
        ],
        0,
    );
    let corpus = synth_corpus(&s).unwrap();
    let report = analyze_movement(&corpus, "op5-1", &AnalysisOptions::default()).unwrap();
    assert_eq!(report.clusters.len(), 3);
    for (label, mean) in [(Label::Slow, 78.0), (Label::Mid, 83.1), (Label::Fast, 90.2)] {
        let c = report.cluster(label).unwrap();
        assert!(
            (c.mean_bpm - mean).abs() <= 1.0,
            "{label:?}: {}",
            c.mean_bpm
        );
    }
    for r in corpus.recordings() {
        assert_eq!(
            report.label_of(&r.recording_id).unwrap().as_str(),
            hint_of(r)
        );
    }
    assert_eq!(report.dominant_label, Label::Mid);
}

#[test]
fn two_mode_movement_reports_empty_slow() {
    let s = spec(
        "op5-2",
        vec![
            cluster(Label::Mid, 14, 66.5, 1.0),
            cluster(Label::Fast, 5, 76.7, 1.0),
        ],
        0,
    );
    let corpus = synth_corpus(&s).unwrap();
    let report = analyze_movement(&corpus, "op5-2", &AnalysisOptions::default()).unwrap();
    assert_eq!(report.validity.supported_k, 2);
    assert_eq!(report.empty_labels, vec![Label::Slow]);
    assert_eq!(report.cluster(Label::Mid).unwrap().n, 14);
    assert_eq!(report.cluster(Label::Fast).unwrap().n, 5);
}

#[test]
fn too_few_recordings_is_an_error() {
    let corpus = common::uniform_corpus(
        common::plain_movement("m", Character::Fast, 2),
        &[(1950, 80.0), (1960, 90.0), (1970, 100.0)],
        8,
    );
    assert!(analyze_movement(&corpus, "m", &AnalysisOptions::default()).is_err());
}

#[test]
fn labeling_examples() {
    assert_eq!(
        label_clusters(&[90.2, 78.0, 83.1], &[4, 3, 13], 3).unwrap(),
        vec![Label::Fast, Label::Slow, Label::Mid]
    );
    assert_eq!(
        label_clusters(&[66.5, 76.7], &[14, 5], 2).unwrap(),
        vec![Label::Mid, Label::Fast]
    );
    assert_eq!(
        label_clusters(&[42.3, 33.8], &[9, 14], 2).unwrap(),
        vec![Label::Fast, Label::Mid]
    );
    assert_eq!(
        label_clusters(&[60.0, 50.0], &[9, 3], 2).unwrap(),
        vec![Label::Mid, Label::Slow]
    );
    assert_eq!(
        label_clusters(&[60.0, 50.0], &[5, 5], 2).unwrap(),
        vec![Label::Fast, Label::Mid]
    );
    assert!(label_clusters(&[1.0, 2.0, 3.0, 4.0], &[1, 1, 1, 1], 4).is_err());
}

#[test]
fn small_clusters_have_no_fit() {
    assert!(intra_cluster_fit(&[(2004.0, 65.7)]).is_none());
    let fit = intra_cluster_fit(&[(1950.0, 80.0), (1960.0, 81.0), (1970.0, 82.0)]).unwrap();
    assert!((fit.r_squared - 1.0).abs() < 1e-12);
    assert!(fit.degenerate);
}

#[test]
fn drift_slope_is_recovered() {
    let noise = common::calibrate_drift_noise(-0.032, 0.246, 1000..1200);
    let fits: Vec<_> = (0..50)
        .map(|s| common::drift_fit(-0.032, noise, s))
        .collect();
    let mut slopes: Vec<f64> = fits.iter().map(|f| f.slope).collect();
    let mut r2: Vec<f64> = fits.iter().map(|f| f.r_squared).collect();
    let slope = common::median(&mut slopes);
    let r2 = common::median(&mut r2);
    assert!((slope + 0.032).abs() <= 0.010, "median slope {slope}");
    assert!((r2 - 0.246).abs() <= 0.10, "median R2 {r2}");
    // each fit agrees with the normal equations on its own sample
    let corpus = synth_corpus(&common::drift_spec(-0.032, noise, 0)).unwrap();
    let x: Vec<f64> = corpus.recordings().map(|r| f64::from(r.year)).collect();
    let y: Vec<f64> = corpus.recordings().map(|r| r.bar_bpm[0]).collect();
    let o = common::ols_normal_equations(&x, &y);
    assert!((fits[0].slope - o.slope).abs() < 1e-9);
}

#[test]
fn aggregate_change_examples() {
    let m = || common::plain_movement("m", Character::Fast, 3);
    let same = common::uniform_corpus(
        m(),
        &[(1940, 80.0), (1950, 90.0), (1980, 80.0), (1990, 90.0)],
        10,
    );
    let c = aggregate_period_change(&same, "m", 1970).unwrap();
    assert_eq!((c.tempo_pct, c.duration_pct), (0.0, 0.0));

    let doubled = common::uniform_corpus(
        m(),
        &[(1940, 60.0), (1950, 60.0), (1980, 120.0), (1990, 120.0)],
        10,
    );
    let c = aggregate_period_change(&doubled, "m", 1970).unwrap();
    assert!((c.tempo_pct - 100.0).abs() < 1e-9 && (c.duration_pct + 50.0).abs() < 1e-9);

    // early and late period means solved for a +10 % tempo target
    let early = 80.0;
    let late = early * 1.10;
    let table = common::uniform_corpus(
        common::plain_movement("op5-1", Character::Fast, 2),
        &[
            (1935, early),
            (1950, early),
            (1965, early),
            (1975, late),
            (1990, late),
            (2005, late),
        ],
        100,
    );
    let c = aggregate_period_change(&table, "op5-1", 1970).unwrap();
    assert!(
        (c.tempo_pct - 10.0).abs() <= 0.5 && (c.duration_pct + 9.1).abs() <= 0.5,
        "{c:?}"
    );

    let boundary = common::uniform_corpus(m(), &[(1969, 80.0), (1970, 80.0)], 4);
    let c = aggregate_period_change(&boundary, "m", 1970).unwrap();
    assert_eq!((c.n_early, c.n_late), (1, 1));
    let empty = common::uniform_corpus(m(), &[(1980, 80.0), (1990, 80.0)], 4);
    assert!(aggregate_period_change(&empty, "m", 1970)
        .unwrap_err()
        .to_string()
        .contains("early"));
}

fn change(t: f64, d: f64) -> AggregateChange {
    AggregateChange {
        movement_id: String::new(),
        movement_name: String::new(),
        split_year: 1970,
        tempo_pct: t,
        duration_pct: d,
        n_early: 1,
        n_late: 1,
    }
}

#[test]
fn correlation_examples() {
    let inverse: Vec<_> = [1.0, 2.0, 5.0].iter().map(|&t| change(t, -t)).collect();
    assert!((tempo_duration_correlation(&inverse).unwrap() + 1.0).abs() < 1e-12);
    let table: Vec<_> = common::CHANGE_PAIRS
        .iter()
        .map(|&(t, d)| change(t, d))
        .collect();
    let r = tempo_duration_correlation(&table).unwrap();
    assert!((0.96..=1.0).contains(&r.abs()));
    assert!(tempo_duration_correlation(&table[..1]).is_err());
}

#[test]
fn contingency_examples() {
    let s = contingency_stats(&[vec![3, 3, 3], vec![5, 5, 5]]).unwrap();
    assert_eq!(s.chi_square, 0.0);
    assert_eq!(s.cramers_v, 0.0);
    assert!((s.p_value - 1.0).abs() < 1e-12);
    let s = contingency_stats(&[vec![7, 0], vec![0, 4]]).unwrap();
    assert!((s.cramers_v - 1.0).abs() < 1e-12);
    assert!(contingency_stats(&[vec![1, 2, 3]]).is_err());

    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for _ in 0..100 {
        let mut table = vec![vec![1u64; 3]; 3];
        for _ in 0..21 {
            table[rng.random_range(0..3)][rng.random_range(0..3)] += 1;
        }
        let s = contingency_stats(&table).unwrap();
        let (chi, v) = common::chi_square_oracle(&table);
        assert!((s.chi_square - chi).abs() <= 1e-9 * chi.max(1.0));
        assert!((s.cramers_v - v).abs() <= 1e-9);
        assert_eq!(s.df, 4);
    }
}

#[test]
fn background_association_counts_members() {
    let mut s = spec(
        "m",
        vec![
            cluster(Label::Mid, 12, 80.0, 0.5),
            cluster(Label::Fast, 6, 95.0, 0.5),
        ],
        2,
    );
    s.background
        .insert("nation".into(), vec!["A".into(), "B".into(), "C".into()]);
    let corpus = synth_corpus(&s).unwrap();
    let report = analyze_movement(&corpus, "m", &AnalysisOptions::default()).unwrap();
    let a = background_association(&[&report], &corpus, "nation").unwrap();
    assert_eq!(a.n, 18);
    let row_sums: Vec<u64> = a.contingency.iter().map(|r| r.iter().sum()).collect();
    let sizes: Vec<u64> = a
        .row_labels
        .iter()
        .map(|&l| report.cluster(l).unwrap().n as u64)
        .collect();
    assert_eq!(row_sums, sizes);
    assert!((0.0..=1.0).contains(&a.cramers_v));
    let (chi, _) = common::chi_square_oracle(&a.contingency);
    assert!((a.chi_square - chi).abs() < 1e-9);
    assert!(background_association(&[&report], &corpus, "school").is_err());
}

#[test]
fn pipeline_is_deterministic() {
    let tm = &common::TABLES[0];
    let (_, a) = common::reconstruct(tm, 5, 7);
    let (_, b) = common::reconstruct(tm, 5, 7);
    assert_eq!(
        serde_json::to_string(&a).unwrap(),
        serde_json::to_string(&b).unwrap()
    );
}

#[test]
fn reconstructions_partition_and_order() {
    for tm in common::TABLES {
        let (corpus, report) = common::reconstruct(tm, 0, 0);
        let mut seen: Vec<&str> = report
            .clusters
            .iter()
            .flat_map(|c| c.member_ids.iter().map(String::as_str))
            .collect();
        seen.sort_unstable();
        let all: Vec<&str> = corpus
            .recordings_of(tm.id)
            .map(|r| r.recording_id.as_str())
            .collect();
        assert_eq!(seen, all, "{}", tm.id);
        for pair in report.clusters.windows(2) {
            assert!(pair[0].mean_bpm < pair[1].mean_bpm, "{}", tm.id);
        }
        for c in &report.clusters {
            assert!(c.bpm_range.0 <= c.mean_bpm && c.mean_bpm <= c.bpm_range.1);
            assert!(!report.empty_labels.contains(&c.label));
        }
    }
}

/// With tight clusters the recovered populations are the table's, so the
/// dominant tradition and its share follow from the table counts.
#[test]
fn dominance_follows_table_populations() {
    let opts = TableOptions {
        sd_divisor: 40.0,
        ..TableOptions::default()
    };
    let mut in_band = Vec::new();
    for tm in common::TABLES {
        let rows = common::table_rows(tm);
        let corpus =
            synth_corpus(&spec_from_table_rows(tm.movement(), &rows, &opts).unwrap()).unwrap();
        let report = analyze_movement(&corpus, tm.id, &AnalysisOptions::default()).unwrap();
        let total: usize = rows.iter().map(|r| r.n).sum();
        let top = rows.iter().max_by_key(|r| r.n).unwrap();
        assert_eq!(report.dominant_label, top.label, "{}", tm.id);
        assert!((report.dominant_share - top.n as f64 / total as f64).abs() < 1e-12);
        if report.dominant_label == Label::Mid && (0.5..=0.8).contains(&report.dominant_share) {
            in_band.push(tm.id);
        }
    }
    // Op.69 Allegro (6/7/9) is fast-dominated and Op.102/1 Allegro (6/8/7)
    // has a mid plurality of only 38 %; every other table has a mid majority.
    assert_eq!(in_band.len(), 7, "{in_band:?}");
    assert!(!in_band.contains(&"op69-allegro") && !in_band.contains(&"op102-1-allegro"));
}

fn uniform_two_period(early: &[f64], late: &[f64]) -> Corpus {
    let mut rec: Vec<(i32, f64)> = early
        .iter()
        .enumerate()
        .map(|(i, &b)| (1931 + i as i32, b))
        .collect();
    rec.extend(late.iter().enumerate().map(|(i, &b)| (1971 + i as i32, b)));
    common::uniform_corpus(common::plain_movement("m", Character::Slow, 4), &rec, 12)
}

proptest! {
    #[test]
    fn duration_moves_against_tempo(
        early in prop::collection::vec(20.0f64..200.0, 1..6),
        late in prop::collection::vec(20.0f64..200.0, 1..6),
    ) {
        let c = aggregate_period_change(&uniform_two_period(&early, &late), "m", 1970).unwrap();
        if early.len() == 1 && late.len() == 1 {
            prop_assert!(((1.0 + c.tempo_pct / 100.0) * (1.0 + c.duration_pct / 100.0) - 1.0).abs() < 1e-9);
        }
        if c.tempo_pct.abs() > 1e-9 && early.len() == 1 && late.len() == 1 {
            prop_assert_eq!(c.duration_pct.signum(), -c.tempo_pct.signum());
        }
    }
}
