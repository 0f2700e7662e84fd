//! Fixtures shared by the criterion benches.

use tempo_core::corpus::{Character, FeatureSpec, Movement};
use tempo_core::synth::{ClusterSpec, SynthSpec};

/// A three-tradition movement with `n` recordings split roughly 1:3:1.
pub fn three_mode_spec(n: usize, seed: u64) -> SynthSpec {
    let slow = (n / 5).max(1);
    let fast = (n / 5).max(1);
    let mid = n.saturating_sub(slow + fast).max(1);
    let cluster = |n, mean_bpm| ClusterSpec {
        label_hint: None,
        n,
        mean_bpm,
        sd_bpm: 1.0,
        year_min: 1930,
        year_max: 2012,
        slope_bpm_per_year: 0.0,
    };
    SynthSpec {
        movement: Movement {
            movement_id: "bench".into(),
            sonata_label: "Bench".into(),
            movement_name: "Allegro".into(),
            character: Character::Fast,
            beats_per_bar: 2,
            feature_spec: FeatureSpec::MeanOnly,
        },
        clusters: vec![cluster(slow, 78.0), cluster(mid, 83.1), cluster(fast, 90.2)],
        bars_per_recording: 64,
        bar_noise_sd: 2.0,
        seed,
        background: Default::default(),
    }
}

/// `n` one-dimensional points around three modes.
pub fn three_mode_points(n: usize) -> Vec<Vec<f64>> {
    (0..n)
        .map(|i| {
            let mode = (i % 3) as f64 * 10.0;
            let jitter = ((i * 7919) % 101) as f64 / 100.0 - 0.5;
            vec![mode + jitter]
        })
        .collect()
}
