use std::collections::BTreeSet;
use std::fs;
use std::path::{Path, PathBuf};

use serde_json::Value;
use tempo_core::corpus::{self, emit_corpus, parse_corpus, validate_corpus, Character, Corpus};
use tempo_core::features::{build_feature_matrix, z_standardize};
use tempo_core::report::{
    emit_assignments_csv, emit_change_table, emit_cluster_table, emit_json, emit_scatter_svg,
    parse_json, to_rounded_json, Palette, ReportBundle, ReportMeta,
};
use tempo_core::rng::derive_seed;
use tempo_core::synth::{synth_corpus_many, SynthSpec};
use tempo_core::traditions::{
    aggregate_period_change, analyze_all, background_association, tempo_duration_correlation,
    AnalysisOptions, MovementReport,
};
use tempo_core::validity::{validity_report, ValidityPolicy, ValidityReport};
use tempo_core::Error;

use crate::config::{Format, RunConfig};
use crate::output::{mark_failed, Staged};

/// A failed command and its process exit code.
#[derive(Debug)]
pub struct Failure {
    pub code: u8,
    pub message: String,
}

impl Failure {
    pub fn usage(message: impl Into<String>) -> Self {
        Failure {
            code: 2,
            message: message.into(),
        }
    }

    pub fn invalid(message: impl Into<String>) -> Self {
        Failure {
            code: 1,
            message: message.into(),
        }
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::invalid(e.to_string())
    }
}

fn read_file(path: &Path) -> Result<String, Failure> {
    fs::read_to_string(path)
        .map_err(|e| Failure::usage(format!("cannot read {}: {e}", path.display())))
}

pub fn load_corpus(dir: &Path) -> Result<Corpus, Failure> {
    let movements = read_file(&dir.join(corpus::MOVEMENTS_FILE))?;
    let recordings = read_file(&dir.join(corpus::RECORDINGS_FILE))?;
    let bars = read_file(&dir.join(corpus::BARS_FILE))?;
    Ok(parse_corpus(&movements, &recordings, &bars)?)
}

fn load_and_validate(dir: &Path) -> Result<Corpus, Failure> {
    let corpus = load_corpus(dir)?;
    let report = validate_corpus(&corpus);
    for finding in &report.findings {
        eprintln!("{finding}");
    }
    if report.has_errors() {
        return Err(Failure::invalid(format!(
            "corpus in {} failed validation ({} errors)",
            dir.display(),
            report.errors().count()
        )));
    }
    Ok(corpus)
}

fn with_pool<T: Send>(jobs: usize, f: impl FnOnce() -> T + Send) -> Result<T, Failure> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs)
        .build()
        .map_err(|e| Failure::usage(format!("cannot start worker pool: {e}")))?;
    Ok(pool.install(f))
}

fn file_stem(id: &str) -> String {
    id.chars()
        .map(|c| {
            if c.is_ascii_alphanumeric() || matches!(c, '.' | '_' | '-') {
                c
            } else {
                '_'
            }
        })
        .collect()
}

fn summary_line(r: &MovementReport) -> String {
    let mut parts = vec![format!(
        "{:<16} k={}",
        r.movement_id, r.validity.supported_k
    )];
    for c in &r.clusters {
        parts.push(format!("{} {} ({:.1})", c.label.as_str(), c.n, c.mean_bpm));
    }
    for l in &r.empty_labels {
        parts.push(format!("{} 0", l.as_str()));
    }
    if let Some(fit) = r
        .cluster(tempo_core::Label::Mid)
        .and_then(|c| c.fit.as_ref())
    {
        parts.push(format!("mid R2={:.3}", fit.r_squared));
    }
    parts.join("  ")
}

fn stage_outputs(
    staged: &mut Staged,
    bundle: &ReportBundle,
    corpus: &Corpus,
    formats: &BTreeSet<Format>,
    palette: &Palette,
) -> Result<(), Failure> {
    for format in formats {
        match format {
            Format::Json => staged.add("report.json", emit_json(bundle)),
            Format::Text => {
                for (character, name) in [
                    (Character::Fast, "tables_fast.txt"),
                    (Character::Slow, "tables_slow.txt"),
                ] {
                    if bundle.movements.iter().any(|m| m.character == character) {
                        staged.add(name, emit_cluster_table(&bundle.movements, character)?);
                    }
                }
                if !bundle.changes.is_empty() {
                    staged.add(
                        "changes.txt",
                        emit_change_table(&bundle.changes, bundle.correlation)?,
                    );
                }
            }
            Format::Csv => staged.add(
                "assignments.csv",
                emit_assignments_csv(&bundle.movements, corpus),
            ),
            Format::Svg => {
                for m in &bundle.movements {
                    staged.add(
                        format!("{}.svg", file_stem(&m.movement_id)),
                        emit_scatter_svg(m, corpus, palette)?,
                    );
                }
            }
        }
    }
    Ok(())
}

fn palette(colorblind: bool) -> Palette {
    if colorblind {
        Palette::colorblind()
    } else {
        Palette::default()
    }
}

pub fn build_bundle(
    corpus: &Corpus,
    opts: &AnalysisOptions,
    split_year: i32,
    jobs: usize,
) -> Result<ReportBundle, Failure> {
    let movements = with_pool(jobs, || analyze_all(corpus, opts))??;
    let mut changes = Vec::new();
    for m in &movements {
        match aggregate_period_change(corpus, &m.movement_id, split_year) {
            Ok(c) => changes.push(c),
            Err(e) => eprintln!("note: no period change for {}: {e}", m.movement_id),
        }
    }
    let correlation = if changes.len() >= 2 {
        tempo_duration_correlation(&changes).ok()
    } else {
        None
    };
    let refs: Vec<&MovementReport> = movements.iter().collect();
    let mut associations = Vec::new();
    for category in corpus.background_categories() {
        match background_association(&refs, corpus, category) {
            Ok(a) => associations.push(a),
            Err(e) => eprintln!("note: no association for `{category}`: {e}"),
        }
    }
    Ok(ReportBundle {
        meta: ReportMeta::new(opts, split_year),
        movements,
        changes,
        correlation,
        associations,
    })
}

pub fn cmd_analyze(cfg: &RunConfig) -> Result<(), Failure> {
    cfg.check().map_err(Failure::usage)?;
    let corpus = load_and_validate(&cfg.corpus_dir)?;
    let opts = AnalysisOptions {
        k_target: cfg.k_target,
        restarts: cfg.restarts,
        seed: cfg.seed,
        policy: cfg.policy,
    };
    let result = (|| -> Result<ReportBundle, Failure> {
        let bundle = build_bundle(&corpus, &opts, cfg.split_year, cfg.jobs)?;
        let mut staged = Staged::new(&cfg.out_dir);
        stage_outputs(
            &mut staged,
            &bundle,
            &corpus,
            &cfg.formats,
            &palette(cfg.colorblind),
        )?;
        staged.commit().map_err(|e| {
            Failure::usage(format!("cannot write to {}: {e}", cfg.out_dir.display()))
        })?;
        Ok(bundle)
    })();
    match result {
        Ok(bundle) => {
            for m in &bundle.movements {
                println!("{}", summary_line(m));
            }
            Ok(())
        }
        Err(f) => {
            mark_failed(&cfg.out_dir, &f.message);
            Err(f)
        }
    }
}

pub struct ValidateKArgs {
    pub corpus_dir: PathBuf,
    pub out_dir: PathBuf,
    pub k_min: usize,
    pub k_max: usize,
    pub restarts: usize,
    pub seed: u64,
    pub policy: ValidityPolicy,
}

fn print_validity(report: &ValidityReport, n: usize) {
    println!("movement {} (n = {n})", report.movement_id);
    println!(
        "  {:>2}  {:>12}  {:>10}  {:>10}",
        "k", "wcss", "silhouette", "drop ratio"
    );
    for (k, w) in &report.wcss_by_k {
        let sil = report
            .mean_silhouette_by_k
            .get(k)
            .map_or("---".to_string(), |s| format!("{s:.4}"));
        let ratio = report
            .drop_ratios
            .get(k)
            .map_or("---".to_string(), |r| format!("{r:.3}"));
        println!("  {k:>2}  {w:>12.6}  {sil:>10}  {ratio:>10}");
    }
    let elbow = report.elbow_k.map_or("---".to_string(), |k| k.to_string());
    println!(
        "  elbow at k = {elbow}; supported k = {}{}",
        report.supported_k,
        if report.three_way_supported {
            ""
        } else {
            " (fewer than three meaningful clusters)"
        }
    );
}

pub fn cmd_validate_k(args: &ValidateKArgs) -> Result<(), Failure> {
    if args.restarts == 0 {
        return Err(Failure::usage("--restarts must be >= 1"));
    }
    let corpus = load_and_validate(&args.corpus_dir)?;
    let smallest = corpus
        .movements()
        .map(|m| corpus.recordings_of(&m.movement_id).count())
        .min()
        .unwrap_or(0);
    if !(1 <= args.k_min && args.k_min < args.k_max && args.k_max <= smallest) {
        return Err(Failure::usage(format!(
            "k range must satisfy 1 <= k_min < k_max <= {smallest} (smallest movement size); got {}..{}",
            args.k_min, args.k_max
        )));
    }
    let result = (|| -> Result<(), Failure> {
        let mut reports = Vec::new();
        for m in corpus.movements() {
            let matrix = build_feature_matrix(&corpus, &m.movement_id)?;
            let standardized = z_standardize(&matrix)?;
            let (report, _) = validity_report(
                &m.movement_id,
                &standardized.values,
                args.k_min,
                args.k_max,
                args.restarts,
                args.seed,
                args.policy,
            )?;
            print_validity(&report, matrix.n_rows());
            reports.push(report);
        }
        let mut staged = Staged::new(&args.out_dir);
        staged.add("validity.json", to_rounded_json(&reports));
        staged.commit().map_err(|e| {
            Failure::usage(format!("cannot write to {}: {e}", args.out_dir.display()))
        })?;
        Ok(())
    })();
    if let Err(f) = &result {
        mark_failed(&args.out_dir, &f.message);
    }
    result
}

fn parse_specs(text: &str) -> Result<Vec<SynthSpec>, Failure> {
    let value: Value = serde_json::from_str(text)
        .map_err(|e| Failure::usage(format!("malformed spec JSON: {e}")))?;
    let specs = if value.get("movements").is_some() {
        #[derive(serde::Deserialize)]
        struct Many {
            movements: Vec<SynthSpec>,
        }
        serde_path_to_error::deserialize::<_, Many>(value)
            .map(|m| m.movements)
            .map_err(|e| Failure::usage(format!("invalid spec at `{}`: {}", e.path(), e.inner())))?
    } else {
        vec![
            serde_path_to_error::deserialize::<_, SynthSpec>(value).map_err(|e| {
                Failure::usage(format!("invalid spec at `{}`: {}", e.path(), e.inner()))
            })?,
        ]
    };
    Ok(specs)
}

pub fn cmd_synth(spec_path: &Path, out_dir: &Path, seed: Option<u64>) -> Result<(), Failure> {
    let text = read_file(spec_path)?;
    let mut specs = parse_specs(&text)?;
    if let Some(seed) = seed {
        for (i, spec) in specs.iter_mut().enumerate() {
            spec.seed = derive_seed(seed, i as u64);
        }
    }
    let single = specs.len() == 1;
    for (i, spec) in specs.iter().enumerate() {
        let prefix = if single {
            String::new()
        } else {
            format!("movements[{i}].")
        };
        spec.validate(&prefix)
            .map_err(|e| Failure::usage(e.to_string()))?;
    }
    let corpus = synth_corpus_many(&specs).map_err(|e| Failure::usage(e.to_string()))?;
    let csv = emit_corpus(&corpus);
    let mut staged = Staged::new(out_dir);
    staged.add(corpus::MOVEMENTS_FILE, csv.movements);
    staged.add(corpus::RECORDINGS_FILE, csv.recordings);
    staged.add(corpus::BARS_FILE, csv.bars);
    staged.add(
        "synth.json",
        to_rounded_json(&serde_json::json!({
            "dispersion": "gaussian",
            "movements": specs,
        })),
    );
    staged
        .commit()
        .map_err(|e| Failure::usage(format!("cannot write to {}: {e}", out_dir.display())))?;
    println!(
        "wrote {} movements, {} recordings to {}",
        specs.len(),
        corpus.recordings().count(),
        out_dir.display()
    );
    Ok(())
}

pub fn cmd_report(
    from: &Path,
    corpus_dir: &Path,
    out_dir: &Path,
    formats: &BTreeSet<Format>,
    colorblind: bool,
) -> Result<(), Failure> {
    let bundle = parse_json(&read_file(from)?)?;
    let corpus = load_corpus(corpus_dir)?;
    for m in &bundle.movements {
        if corpus.movement(&m.movement_id).is_none() {
            return Err(Failure::invalid(format!(
                "report movement `{}` is not in the corpus at {}",
                m.movement_id,
                corpus_dir.display()
            )));
        }
    }
    let mut staged = Staged::new(out_dir);
    let result = stage_outputs(&mut staged, &bundle, &corpus, formats, &palette(colorblind))
        .and_then(|_| {
            staged
                .commit()
                .map_err(|e| Failure::usage(format!("cannot write to {}: {e}", out_dir.display())))
        });
    if let Err(f) = &result {
        mark_failed(out_dir, &f.message);
    }
    result.map(|_| ())
}
