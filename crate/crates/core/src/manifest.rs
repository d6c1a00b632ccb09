//! JSON-lines dataset manifest.

use std::collections::HashSet;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Train,
    Test,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct AttentionFiles {
    pub tensor: PathBuf,
    pub meta: PathBuf,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ManifestRow {
    pub id: String,
    pub text: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub normalized_text: Option<String>,
    pub image: PathBuf,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub blurred: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mask: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub attention: Option<AttentionFiles>,
    pub split: Split,
}

impl ManifestRow {
    pub fn has_truth(&self) -> bool {
        self.mask.is_some() || self.blurred.is_some()
    }
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Manifest {
    pub rows: Vec<ManifestRow>,
    /// Directory relative paths in rows are resolved against.
    pub root: PathBuf,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize)]
pub struct SplitCounts {
    pub train: usize,
    pub test: usize,
    pub total: usize,
}

impl Manifest {
    pub fn resolve(&self, p: &Path) -> PathBuf {
        if p.is_absolute() {
            p.to_path_buf()
        } else {
            self.root.join(p)
        }
    }

    pub fn counts(&self) -> SplitCounts {
        let train = self.rows.iter().filter(|r| r.split == Split::Train).count();
        SplitCounts {
            train,
            test: self.rows.len() - train,
            total: self.rows.len(),
        }
    }

    /// Checks that every test row carries a ground-truth mask or blurred image.
    pub fn validate(&self) -> Result<SplitCounts> {
        for (i, row) in self.rows.iter().enumerate() {
            if row.split == Split::Test && !row.has_truth() {
                return Err(Error::Manifest {
                    line: i + 1,
                    detail: format!("test row `{}` has neither mask nor blurred", row.id),
                });
            }
        }
        Ok(self.counts())
    }

    pub fn split(&self, split: Split) -> impl Iterator<Item = &ManifestRow> {
        self.rows.iter().filter(move |r| r.split == split)
    }
}

pub fn parse_manifest(text: &str) -> Result<Vec<ManifestRow>> {
    let mut rows: Vec<ManifestRow> = Vec::new();
    let mut seen = HashSet::new();
    for (i, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let row: ManifestRow = serde_json::from_str(line).map_err(|e| Error::Manifest {
            line: i + 1,
            detail: e.to_string(),
        })?;
        if !seen.insert(row.id.clone()) {
            return Err(Error::Manifest {
                line: i + 1,
                detail: format!("duplicate id `{}`", row.id),
            });
        }
        rows.push(row);
    }
    Ok(rows)
}

pub fn load_manifest(path: impl AsRef<Path>) -> Result<Manifest> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|source| Error::Read {
        path: path.to_path_buf(),
        source,
    })?;
    let rows = parse_manifest(&text)?;
    let root = path
        .parent()
        .map(Path::to_path_buf)
        .unwrap_or_default();
    Ok(Manifest { rows, root })
}

pub fn write_manifest(rows: &[ManifestRow], path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let to_err = |source| Error::Write {
        path: path.to_path_buf(),
        source,
    };
    let mut f = std::io::BufWriter::new(fs::File::create(path).map_err(to_err)?);
    for row in rows {
        let line = serde_json::to_string(row).expect("manifest rows serialize");
        writeln!(f, "{line}").map_err(to_err)?;
    }
    f.flush().map_err(to_err)
}
