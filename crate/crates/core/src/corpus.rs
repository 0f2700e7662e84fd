//! Recording corpus: CSV ingestion, cross-reference checks and validation.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::error::{domain, Error, Result};

pub const MOVEMENTS_FILE: &str = "movements.csv";
pub const RECORDINGS_FILE: &str = "recordings.csv";
pub const BARS_FILE: &str = "bars.csv";

const BACKGROUND_PREFIX: &str = "background.";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Character {
    Fast,
    Slow,
}

impl Character {
    pub fn as_str(self) -> &'static str {
        match self {
            Character::Fast => "fast",
            Character::Slow => "slow",
        }
    }
}

impl std::str::FromStr for Character {
    type Err = String;
    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "fast" => Ok(Character::Fast),
            "slow" => Ok(Character::Slow),
            other => Err(format!("unknown character `{other}` (expected fast|slow)")),
        }
    }
}

/// Which per-recording features feed the clustering.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FeatureSpec {
    MeanOnly,
    MeanAndCv,
}

impl FeatureSpec {
    pub fn as_str(self) -> &'static str {
        match self {
            FeatureSpec::MeanOnly => "mean_only",
            FeatureSpec::MeanAndCv => "mean_and_cv",
        }
    }
}

impl std::str::FromStr for FeatureSpec {
    type Err = String;
    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "mean_only" => Ok(FeatureSpec::MeanOnly),
            "mean_and_cv" => Ok(FeatureSpec::MeanAndCv),
            other => Err(format!(
                "unknown feature_spec `{other}` (expected mean_only|mean_and_cv)"
            )),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Movement {
    pub movement_id: String,
    pub sonata_label: String,
    pub movement_name: String,
    pub character: Character,
    pub beats_per_bar: u32,
    pub feature_spec: FeatureSpec,
}

impl Movement {
    /// Human-readable name, e.g. "Op.5/1 Rondo".
    pub fn display_name(&self) -> String {
        match (self.sonata_label.is_empty(), self.movement_name.is_empty()) {
            (false, false) => format!("{} {}", self.sonata_label, self.movement_name),
            (false, true) => self.sonata_label.clone(),
            (true, false) => self.movement_name.clone(),
            (true, true) => self.movement_id.clone(),
        }
    }

    fn check(&self) -> std::result::Result<(), String> {
        if self.movement_id.is_empty() {
            return Err("empty movement_id".into());
        }
        if self.beats_per_bar == 0 {
            return Err(format!(
                "movement {}: beats_per_bar must be >= 1",
                self.movement_id
            ));
        }
        if self.feature_spec == FeatureSpec::MeanAndCv && self.character != Character::Slow {
            return Err(format!(
                "movement {}: feature_spec mean_and_cv requires character slow",
                self.movement_id
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Recording {
    pub recording_id: String,
    pub performer: String,
    pub year: i32,
    pub movement_id: String,
    /// BPM per bar, in bar order.
    pub bar_bpm: Vec<f64>,
    /// Free-form background categories, e.g. `"nation" -> "French"`.
    #[serde(default)]
    pub background: BTreeMap<String, String>,
}

impl Recording {
    fn check(&self) -> std::result::Result<(), String> {
        if self.recording_id.is_empty() {
            return Err("empty recording_id".into());
        }
        if self.bar_bpm.is_empty() {
            return Err(format!("recording {} has no bars", self.recording_id));
        }
        if let Some((i, bpm)) = self
            .bar_bpm
            .iter()
            .enumerate()
            .find(|(_, b)| !(b.is_finite() && **b > 0.0))
        {
            return Err(format!(
                "recording {} bar {i}: bpm {bpm} must be positive and finite",
                self.recording_id
            ));
        }
        Ok(())
    }
}

/// Cross-referenced set of movements and recordings. Immutable once built.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Corpus {
    movements: BTreeMap<String, Movement>,
    recordings: BTreeMap<String, Recording>,
}

impl Corpus {
    pub fn new(
        movements: impl IntoIterator<Item = Movement>,
        recordings: impl IntoIterator<Item = Recording>,
    ) -> Result<Self> {
        let mut m = BTreeMap::new();
        for mv in movements {
            mv.check().map_err(Error::Domain)?;
            let id = mv.movement_id.clone();
            if m.insert(id.clone(), mv).is_some() {
                return domain(format!("duplicate movement_id {id}"));
            }
        }
        let mut r = BTreeMap::new();
        for rec in recordings {
            rec.check().map_err(Error::Domain)?;
            if !m.contains_key(&rec.movement_id) {
                return domain(format!(
                    "recording {} references unknown movement {}",
                    rec.recording_id, rec.movement_id
                ));
            }
            let id = rec.recording_id.clone();
            if r.insert(id.clone(), rec).is_some() {
                return domain(format!("duplicate recording_id {id}"));
            }
        }
        Ok(Corpus {
            movements: m,
            recordings: r,
        })
    }

    pub fn movements(&self) -> impl Iterator<Item = &Movement> {
        self.movements.values()
    }

    pub fn recordings(&self) -> impl Iterator<Item = &Recording> {
        self.recordings.values()
    }

    pub fn movement(&self, movement_id: &str) -> Option<&Movement> {
        self.movements.get(movement_id)
    }

    pub fn recording(&self, recording_id: &str) -> Option<&Recording> {
        self.recordings.get(recording_id)
    }

    /// Recordings of one movement, sorted by recording_id.
    pub fn recordings_of<'a>(
        &'a self,
        movement_id: &'a str,
    ) -> impl Iterator<Item = &'a Recording> + 'a {
        self.recordings
            .values()
            .filter(move |r| r.movement_id == movement_id)
    }

    pub fn background_categories(&self) -> BTreeSet<&str> {
        self.recordings
            .values()
            .flat_map(|r| r.background.keys().map(String::as_str))
            .collect()
    }
}

/// Total playing time in minutes: the sum over bars of `beats_per_bar / bpm`.
pub fn duration_minutes(recording: &Recording, movement: &Movement) -> f64 {
    let beats = f64::from(movement.beats_per_bar);
    recording.bar_bpm.iter().map(|bpm| beats / bpm).sum()
}

// ---------------------------------------------------------------------------
// CSV ingestion

fn parse_err(file: &str, line: u64, message: impl Into<String>) -> Error {
    Error::Parse {
        file: file.to_string(),
        line,
        message: message.into(),
    }
}

struct Table {
    file: &'static str,
    headers: Vec<String>,
    rows: Vec<(u64, csv::StringRecord)>,
}

impl Table {
    fn read(file: &'static str, text: &str, required: &[&str]) -> Result<Self> {
        let mut reader = csv::ReaderBuilder::new()
            .trim(csv::Trim::All)
            .from_reader(text.as_bytes());
        let headers: Vec<String> = reader
            .headers()
            .map_err(|e| parse_err(file, 1, e.to_string()))?
            .iter()
            .map(str::to_string)
            .collect();
        for col in required {
            if !headers.iter().any(|h| h == col) {
                return Err(parse_err(file, 1, format!("missing column `{col}`")));
            }
        }
        let mut rows = Vec::new();
        for rec in reader.records() {
            let rec = rec.map_err(|e| {
                let line = e.position().map_or(0, |p| p.line());
                parse_err(file, line, e.to_string())
            })?;
            let line = rec.position().map_or(0, |p| p.line());
            rows.push((line, rec));
        }
        Ok(Table {
            file,
            headers,
            rows,
        })
    }

    fn col(&self, name: &str) -> usize {
        self.headers
            .iter()
            .position(|h| h == name)
            .expect("checked in read")
    }

    fn key<'r>(
        &self,
        line: u64,
        rec: &'r csv::StringRecord,
        col: usize,
        name: &str,
    ) -> Result<&'r str> {
        match rec.get(col) {
            Some(v) if !v.is_empty() => Ok(v),
            _ => Err(parse_err(self.file, line, format!("missing key `{name}`"))),
        }
    }

    fn field<T: std::str::FromStr>(
        &self,
        line: u64,
        rec: &csv::StringRecord,
        col: usize,
        name: &str,
    ) -> Result<T>
    where
        T::Err: std::fmt::Display,
    {
        let raw = rec.get(col).unwrap_or("");
        raw.parse::<T>()
            .map_err(|e| parse_err(self.file, line, format!("bad `{name}` value `{raw}`: {e}")))
    }
}

/// Parse the three corpus CSV documents into a cross-referenced [`Corpus`].
pub fn parse_corpus(movements_csv: &str, recordings_csv: &str, bars_csv: &str) -> Result<Corpus> {
    let mt = Table::read(
        MOVEMENTS_FILE,
        movements_csv,
        &[
            "movement_id",
            "sonata_label",
            "movement_name",
            "character",
            "beats_per_bar",
            "feature_spec",
        ],
    )?;
    let (c_id, c_son, c_name, c_char, c_beats, c_feat) = (
        mt.col("movement_id"),
        mt.col("sonata_label"),
        mt.col("movement_name"),
        mt.col("character"),
        mt.col("beats_per_bar"),
        mt.col("feature_spec"),
    );
    let mut movements: BTreeMap<String, Movement> = BTreeMap::new();
    for (line, rec) in &mt.rows {
        let line = *line;
        let id = mt.key(line, rec, c_id, "movement_id")?.to_string();
        let mv = Movement {
            movement_id: id.clone(),
            sonata_label: rec.get(c_son).unwrap_or("").to_string(),
            movement_name: rec.get(c_name).unwrap_or("").to_string(),
            character: mt.field(line, rec, c_char, "character")?,
            beats_per_bar: mt.field(line, rec, c_beats, "beats_per_bar")?,
            feature_spec: mt.field(line, rec, c_feat, "feature_spec")?,
        };
        mv.check().map_err(|m| parse_err(MOVEMENTS_FILE, line, m))?;
        if movements.insert(id.clone(), mv).is_some() {
            return Err(parse_err(
                MOVEMENTS_FILE,
                line,
                format!("duplicate movement_id `{id}`"),
            ));
        }
    }

    let rt = Table::read(
        RECORDINGS_FILE,
        recordings_csv,
        &["recording_id", "performer", "year", "movement_id"],
    )?;
    let (r_id, r_perf, r_year, r_mov) = (
        rt.col("recording_id"),
        rt.col("performer"),
        rt.col("year"),
        rt.col("movement_id"),
    );
    let background_cols: Vec<(usize, String)> = rt
        .headers
        .iter()
        .enumerate()
        .filter_map(|(i, h)| {
            h.strip_prefix(BACKGROUND_PREFIX)
                .map(|n| (i, n.to_string()))
        })
        .collect();
    let mut recordings: BTreeMap<String, Recording> = BTreeMap::new();
    for (line, rec) in &rt.rows {
        let line = *line;
        let id = rt.key(line, rec, r_id, "recording_id")?.to_string();
        let movement_id = rt.key(line, rec, r_mov, "movement_id")?.to_string();
        if !movements.contains_key(&movement_id) {
            return Err(parse_err(
                RECORDINGS_FILE,
                line,
                format!("recording `{id}` references unknown movement_id `{movement_id}`"),
            ));
        }
        let background = background_cols
            .iter()
            .filter_map(|(col, name)| {
                rec.get(*col)
                    .filter(|v| !v.is_empty())
                    .map(|v| (name.clone(), v.to_string()))
            })
            .collect();
        let r = Recording {
            recording_id: id.clone(),
            performer: rec.get(r_perf).unwrap_or("").to_string(),
            year: rt.field(line, rec, r_year, "year")?,
            movement_id,
            bar_bpm: Vec::new(),
            background,
        };
        if recordings.insert(id.clone(), r).is_some() {
            return Err(parse_err(
                RECORDINGS_FILE,
                line,
                format!("duplicate recording_id `{id}`"),
            ));
        }
    }

    let bt = Table::read(BARS_FILE, bars_csv, &["recording_id", "bar_index", "bpm"])?;
    let (b_id, b_idx, b_bpm) = (bt.col("recording_id"), bt.col("bar_index"), bt.col("bpm"));
    let mut bars: BTreeMap<String, BTreeMap<usize, (u64, f64)>> = BTreeMap::new();
    for (line, rec) in &bt.rows {
        let line = *line;
        let id = bt.key(line, rec, b_id, "recording_id")?;
        if !recordings.contains_key(id) {
            return Err(parse_err(
                BARS_FILE,
                line,
                format!("unknown recording_id `{id}`"),
            ));
        }
        let index: usize = bt.field(line, rec, b_idx, "bar_index")?;
        let raw = rec.get(b_bpm).unwrap_or("");
        let bpm = raw
            .parse::<f64>()
            .ok()
            .filter(|b| b.is_finite() && *b > 0.0)
            .ok_or_else(|| {
                parse_err(
                    BARS_FILE,
                    line,
                    format!("recording `{id}` bar {index}: bpm `{raw}` is not a positive number"),
                )
            })?;
        let series = bars.entry(id.to_string()).or_default();
        if series.insert(index, (line, bpm)).is_some() {
            return Err(parse_err(
                BARS_FILE,
                line,
                format!("duplicate bar_index {index} for recording `{id}`"),
            ));
        }
    }

    for (id, series) in bars {
        let mut values = Vec::with_capacity(series.len());
        for (expected, (index, (line, bpm))) in series.into_iter().enumerate() {
            if index != expected {
                return Err(parse_err(
                    BARS_FILE,
                    line,
                    format!("recording `{id}`: bar_index {index} breaks contiguity (expected {expected})"),
                ));
            }
            values.push(bpm);
        }
        recordings.get_mut(&id).expect("checked above").bar_bpm = values;
    }
    if let Some(empty) = recordings.values().find(|r| r.bar_bpm.is_empty()) {
        return Err(parse_err(
            BARS_FILE,
            0,
            format!("recording `{}` has no bar rows", empty.recording_id),
        ));
    }

    Ok(Corpus {
        movements,
        recordings,
    })
}

/// The three CSV documents of a corpus.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CorpusCsv {
    pub movements: String,
    pub recordings: String,
    pub bars: String,
}

fn csv_cell(s: &str) -> String {
    if s.contains([',', '"', '\n', '\r']) || s.trim() != s {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

/// Serialise a corpus to the CSV layout read by [`parse_corpus`]. BPM values
/// are written with six decimals.
pub fn emit_corpus(corpus: &Corpus) -> CorpusCsv {
    let mut movements = String::from(
        "movement_id,sonata_label,movement_name,character,beats_per_bar,feature_spec\n",
    );
    for m in corpus.movements() {
        let _ = writeln!(
            movements,
            "{},{},{},{},{},{}",
            csv_cell(&m.movement_id),
            csv_cell(&m.sonata_label),
            csv_cell(&m.movement_name),
            m.character.as_str(),
            m.beats_per_bar,
            m.feature_spec.as_str()
        );
    }

    let categories: Vec<&str> = corpus.background_categories().into_iter().collect();
    let mut recordings = String::from("recording_id,performer,year,movement_id");
    for c in &categories {
        recordings.push(',');
        recordings.push_str(&csv_cell(&format!("{BACKGROUND_PREFIX}{c}")));
    }
    recordings.push('\n');
    let mut bars = String::from("recording_id,bar_index,bpm\n");
    for r in corpus.recordings() {
        let _ = write!(
            recordings,
            "{},{},{},{}",
            csv_cell(&r.recording_id),
            csv_cell(&r.performer),
            r.year,
            csv_cell(&r.movement_id)
        );
        for c in &categories {
            recordings.push(',');
            recordings.push_str(&csv_cell(r.background.get(*c).map_or("", String::as_str)));
        }
        recordings.push('\n');
        let id = csv_cell(&r.recording_id);
        for (i, bpm) in r.bar_bpm.iter().enumerate() {
            let _ = writeln!(bars, "{id},{i},{bpm:.6}");
        }
    }
    CorpusCsv {
        movements,
        recordings,
        bars,
    }
}

// ---------------------------------------------------------------------------
// Validation

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Severity {
    Warning,
    Error,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Finding {
    pub severity: Severity,
    pub location: String,
    pub message: String,
}

impl std::fmt::Display for Finding {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let tag = match self.severity {
            Severity::Warning => "warning",
            Severity::Error => "error",
        };
        write!(f, "{tag}: {}: {}", self.location, self.message)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct ValidationReport {
    pub findings: Vec<Finding>,
}

impl ValidationReport {
    pub fn is_empty(&self) -> bool {
        self.findings.is_empty()
    }

    pub fn has_errors(&self) -> bool {
        self.findings.iter().any(|f| f.severity == Severity::Error)
    }

    pub fn warnings(&self) -> impl Iterator<Item = &Finding> {
        self.findings
            .iter()
            .filter(|f| f.severity == Severity::Warning)
    }

    pub fn errors(&self) -> impl Iterator<Item = &Finding> {
        self.findings
            .iter()
            .filter(|f| f.severity == Severity::Error)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ValidationOptions {
    /// Years outside this window are errors.
    pub validity_window: (i32, i32),
    /// Years outside this window are warnings.
    pub study_window: (i32, i32),
    pub min_recordings: usize,
    pub max_recordings: usize,
}

impl Default for ValidationOptions {
    fn default() -> Self {
        ValidationOptions {
            validity_window: (1900, 2100),
            study_window: (1930, 2012),
            min_recordings: 5,
            max_recordings: 100,
        }
    }
}

pub fn validate_corpus(corpus: &Corpus) -> ValidationReport {
    validate_corpus_with(corpus, &ValidationOptions::default())
}

pub fn validate_corpus_with(corpus: &Corpus, opts: &ValidationOptions) -> ValidationReport {
    let mut findings = Vec::new();
    let mut push = |severity, location: String, message: String| {
        findings.push(Finding {
            severity,
            location,
            message,
        })
    };

    for m in corpus.movements() {
        let loc = format!("movement {}", m.movement_id);
        if let Err(msg) = m.check() {
            push(Severity::Error, loc.clone(), msg);
        }
        let count = corpus.recordings_of(&m.movement_id).count();
        if count < opts.min_recordings {
            push(
                Severity::Warning,
                loc,
                format!(
                    "{count} recordings: movement count below {}",
                    opts.min_recordings
                ),
            );
        } else if count > opts.max_recordings {
            push(
                Severity::Warning,
                loc,
                format!(
                    "{count} recordings: movement count above {}",
                    opts.max_recordings
                ),
            );
        }
    }

    let mut seen: BTreeMap<(&str, i32, &str), &str> = BTreeMap::new();
    for r in corpus.recordings() {
        let loc = format!("recording {}", r.recording_id);
        if let Err(msg) = r.check() {
            push(Severity::Error, loc.clone(), msg);
        }
        if corpus.movement(&r.movement_id).is_none() {
            push(
                Severity::Error,
                loc.clone(),
                format!("unknown movement_id {}", r.movement_id),
            );
        }
        let (lo, hi) = opts.validity_window;
        if r.year < lo || r.year > hi {
            push(
                Severity::Error,
                loc.clone(),
                format!("year {} outside validity window {lo}-{hi}", r.year),
            );
        }
        let (lo, hi) = opts.study_window;
        if r.year < lo || r.year > hi {
            push(
                Severity::Warning,
                loc.clone(),
                format!("year {} outside study window {lo}-{hi}", r.year),
            );
        }
        let key = (r.performer.as_str(), r.year, r.movement_id.as_str());
        if let Some(first) = seen.insert(key, &r.recording_id) {
            push(
                Severity::Warning,
                loc,
                format!(
                    "duplicate (performer, year, movement) with recording {first}: {} {} {}",
                    r.performer, r.year, r.movement_id
                ),
            );
        }
    }
    ValidationReport { findings }
}
