use std::collections::BTreeSet;
use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use terank_core::embeddings::{load_csv, load_emb1};
use terank_core::EmbeddingSet;

use crate::args::InputArgs;
use crate::manifest::{file_digest, RunManifest};
use crate::UsageError;

fn extension(path: &Path) -> Option<String> {
    path.extension().map(|e| e.to_string_lossy().to_ascii_lowercase())
}

fn csv_has_column(path: &Path, column: &str) -> bool {
    csv::Reader::from_path(path)
        .and_then(|mut r| r.headers().map(|h| h.iter().any(|c| c.trim() == column)))
        .unwrap_or(false)
}

/// Embedding files named by `paths`, sorted by file name. Directories
/// contribute their `.emb1` files and every `.csv` carrying `label_col`.
pub fn discover(paths: &[PathBuf], label_col: &str) -> Result<Vec<PathBuf>> {
    let mut found = BTreeSet::new();
    for path in paths {
        if path.is_dir() {
            let entries = fs::read_dir(path).with_context(|| format!("listing {}", path.display()))?;
            for entry in entries {
                let p = entry?.path();
                match extension(&p).as_deref() {
                    Some("emb1") => {
                        found.insert(p);
                    }
                    Some("csv") if csv_has_column(&p, label_col) => {
                        found.insert(p);
                    }
                    _ => {}
                }
            }
        } else if path.is_file() {
            found.insert(path.clone());
        } else {
            bail!(UsageError(format!("--input {} does not exist", path.display())));
        }
    }
    let mut files: Vec<PathBuf> = found.into_iter().collect();
    files.sort_by(|a, b| a.file_name().cmp(&b.file_name()).then_with(|| a.cmp(b)));
    if files.is_empty() {
        bail!(UsageError("no embedding files found under --input".into()));
    }
    Ok(files)
}

pub fn load(path: &Path, label_col: &str) -> Result<EmbeddingSet> {
    let set = match extension(path).as_deref() {
        Some("emb1") => load_emb1(path)?,
        Some("csv") => load_csv(path, label_col)?,
        _ => bail!(UsageError(format!(
            "{}: expected a .emb1 or .csv file",
            path.display()
        ))),
    };
    Ok(set)
}

/// Loads every input in name order, records digests in `manifest`, and
/// rejects duplicate model ids.
pub fn load_all(args: &InputArgs, manifest: &mut RunManifest) -> Result<Vec<EmbeddingSet>> {
    let files = discover(&args.input, &args.label_col)?;
    let mut sets = Vec::with_capacity(files.len());
    let mut ids = BTreeSet::new();
    for path in &files {
        let set = load(path, &args.label_col)?.with_dataset_id(args.dataset.clone());
        if !ids.insert(set.model_id().to_string()) {
            return Err(terank_core::Error::DuplicateKey(format!("model {}", set.model_id())).into());
        }
        let name = path.file_name().unwrap_or_default().to_string_lossy().into_owned();
        manifest.add_input(name, file_digest(path)?);
        sets.push(set);
    }
    Ok(sets)
}
