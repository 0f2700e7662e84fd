//! All-or-nothing output: files are staged in a hidden directory and moved
//! into place only once every document has been produced.

use std::fs;
use std::path::{Path, PathBuf};

pub const FAILURE_SENTINEL: &str = "FAILED";

pub struct Staged {
    out_dir: PathBuf,
    files: Vec<(String, String)>,
}

impl Staged {
    pub fn new(out_dir: &Path) -> Self {
        Staged {
            out_dir: out_dir.to_path_buf(),
            files: Vec::new(),
        }
    }

    pub fn add(&mut self, name: impl Into<String>, contents: String) {
        self.files.push((name.into(), contents));
    }

    pub fn commit(self) -> std::io::Result<Vec<PathBuf>> {
        fs::create_dir_all(&self.out_dir)?;
        let staging = self
            .out_dir
            .join(format!(".staging-{}", std::process::id()));
        let result = (|| {
            fs::create_dir_all(&staging)?;
            for (name, contents) in &self.files {
                fs::write(staging.join(name), contents)?;
            }
            let mut written = Vec::with_capacity(self.files.len());
            for (name, _) in &self.files {
                let dest = self.out_dir.join(name);
                fs::rename(staging.join(name), &dest)?;
                written.push(dest);
            }
            let _ = fs::remove_file(self.out_dir.join(FAILURE_SENTINEL));
            Ok(written)
        })();
        let _ = fs::remove_dir_all(&staging);
        result
    }
}

/// Leave a marker explaining why `out_dir` holds no fresh results.
pub fn mark_failed(out_dir: &Path, message: &str) {
    if fs::create_dir_all(out_dir).is_ok() {
        let _ = fs::write(out_dir.join(FAILURE_SENTINEL), format!("{message}\n"));
    }
}
