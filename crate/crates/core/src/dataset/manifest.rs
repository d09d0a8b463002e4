use std::collections::{BTreeMap, HashSet};
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::DatasetError;
use crate::classify::TaxonLabel;
use crate::env::EnvSnapshot;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Train,
    Test,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ParseKind {
    Empty,
    Syntax,
    DuplicateId,
    NoModality,
    InvalidRecord,
}

/// One labelled event. Paths are relative to the manifest's directory
/// unless absolute.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ManifestRecord {
    pub event_id: String,
    pub taxon: TaxonLabel,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub trigger_time: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub wav_path: Option<String>,
    /// Embedding file (CSV or JSONL) holding this event's frame descriptors.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub image_descriptor_ref: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub env: Option<EnvSnapshot>,
    pub split: Split,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DatasetManifest {
    pub records: Vec<ManifestRecord>,
    /// Directory relative paths are resolved against.
    pub base_dir: PathBuf,
}

impl DatasetManifest {
    pub fn resolve(&self, path: &str) -> PathBuf {
        let p = Path::new(path);
        if p.is_absolute() {
            p.to_path_buf()
        } else {
            self.base_dir.join(p)
        }
    }

    /// Number of records per class key.
    pub fn supports(&self) -> BTreeMap<String, usize> {
        let mut out = BTreeMap::new();
        for r in &self.records {
            *out.entry(r.taxon.key()).or_insert(0) += 1;
        }
        out
    }

    pub fn to_jsonl(&self) -> Result<String, DatasetError> {
        let mut out = String::new();
        for r in &self.records {
            writeln!(out, "{}", serde_json::to_string(r)?).expect("write to String");
        }
        Ok(out)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<(), DatasetError> {
        let path = path.as_ref();
        std::fs::write(path, self.to_jsonl()?).map_err(DatasetError::io(path))
    }

    /// Parses and validates JSONL text. File references are not checked.
    pub fn parse(text: &str, base_dir: impl Into<PathBuf>) -> Result<Self, DatasetError> {
        let parse_err = |line, kind, message: String| DatasetError::Parse { line, kind, message };
        let mut records = Vec::new();
        let mut seen = HashSet::new();
        for (i, raw) in text.lines().enumerate() {
            let line = i + 1;
            if raw.trim().is_empty() {
                continue;
            }
            let record: ManifestRecord =
                serde_json::from_str(raw).map_err(|e| parse_err(line, ParseKind::Syntax, e.to_string()))?;
            if !seen.insert(record.event_id.clone()) {
                return Err(parse_err(line, ParseKind::DuplicateId, record.event_id));
            }
            if record.wav_path.is_none() && record.image_descriptor_ref.is_none() {
                return Err(parse_err(line, ParseKind::NoModality, record.event_id));
            }
            if let Some(env) = &record.env {
                env.validate()
                    .map_err(|e| parse_err(line, ParseKind::InvalidRecord, e.to_string()))?;
            }
            records.push(record);
        }
        if records.is_empty() {
            return Err(parse_err(0, ParseKind::Empty, "manifest has no records".into()));
        }
        Ok(Self {
            records,
            base_dir: base_dir.into(),
        })
    }

    /// Every referenced file that does not exist.
    pub fn missing_files(&self) -> Vec<PathBuf> {
        let mut missing: Vec<PathBuf> = self
            .records
            .iter()
            .flat_map(|r| r.wav_path.iter().chain(&r.image_descriptor_ref))
            .map(|p| self.resolve(p))
            .filter(|p| !p.is_file())
            .collect();
        missing.sort();
        missing.dedup();
        missing
    }
}

/// Loads a JSONL manifest and checks that every referenced file exists.
pub fn load_manifest(path: impl AsRef<Path>) -> Result<DatasetManifest, DatasetError> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(DatasetError::io(path))?;
    let base = path.parent().map(Path::to_path_buf).unwrap_or_default();
    let manifest = DatasetManifest::parse(&text, base)?;
    let missing = manifest.missing_files();
    if !missing.is_empty() {
        return Err(DatasetError::MissingFile(missing));
    }
    Ok(manifest)
}
