use std::collections::BTreeSet;
use std::path::PathBuf;
use std::str::FromStr;

use tempo_core::validity::ValidityPolicy;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum Format {
    Text,
    Json,
    Csv,
    Svg,
}

impl FromStr for Format {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s.trim() {
            "text" => Ok(Format::Text),
            "json" => Ok(Format::Json),
            "csv" => Ok(Format::Csv),
            "svg" => Ok(Format::Svg),
            other => Err(format!(
                "unknown format `{other}` (expected text, json, csv or svg)"
            )),
        }
    }
}

pub fn parse_formats(s: &str) -> Result<BTreeSet<Format>, String> {
    let set: BTreeSet<Format> = s
        .split(',')
        .filter(|p| !p.trim().is_empty())
        .map(str::parse)
        .collect::<Result<_, _>>()?;
    if set.is_empty() {
        return Err("at least one output format is required".into());
    }
    Ok(set)
}

/// Everything an `analyze` run depends on.
#[derive(Debug, Clone)]
pub struct RunConfig {
    pub corpus_dir: PathBuf,
    pub out_dir: PathBuf,
    pub k_target: usize,
    pub restarts: usize,
    pub seed: u64,
    pub split_year: i32,
    pub policy: ValidityPolicy,
    pub formats: BTreeSet<Format>,
    pub jobs: usize,
    pub colorblind: bool,
}

impl RunConfig {
    pub fn check(&self) -> Result<(), String> {
        if self.restarts == 0 {
            return Err("--restarts must be >= 1".into());
        }
        if !(2..=3).contains(&self.k_target) {
            return Err(format!("--k must be 2 or 3, got {}", self.k_target));
        }
        if self.formats.is_empty() {
            return Err("--formats must name at least one format".into());
        }
        Ok(())
    }
}
