//! Dataset packaging in the LJ Speech and Common Voice layouts, and the
//! deterministic train/valid split both use.

mod common_voice;
mod lj;

pub use common_voice::{read_common_voice, write_common_voice, CV_COLUMNS, CV_HEADER};
pub use lj::{read_lj, write_lj};

use std::collections::{BTreeMap, HashSet};
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::preprocess::{AudioFormat, EncodedAudio};

pub const DEFAULT_VALID_FRACTION: f64 = 0.1;
/// Vote counts written for generated clips so that "validated" filters keep them.
pub const DEFAULT_UP_VOTES: u32 = 2;
pub const DEFAULT_DOWN_VOTES: u32 = 0;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CorpusEntry {
    pub clip_id: String,
    /// Relative to the dataset root, forward slashes. Left empty, writers fill in
    /// the layout's canonical path.
    pub relative_audio_path: String,
    pub sentence: String,
    pub client_id: String,
    pub up_votes: u32,
    pub down_votes: u32,
    pub age: Option<String>,
    pub gender: Option<String>,
    pub accents: Option<String>,
    pub locale: Option<String>,
    pub segment: Option<String>,
    /// Columns we don't model, carried through untouched.
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub extra: BTreeMap<String, String>,
}

impl CorpusEntry {
    pub fn new(clip_id: impl Into<String>, sentence: impl Into<String>) -> Self {
        Self {
            clip_id: clip_id.into(),
            relative_audio_path: String::new(),
            sentence: sentence.into(),
            client_id: String::new(),
            up_votes: DEFAULT_UP_VOTES,
            down_votes: DEFAULT_DOWN_VOTES,
            age: None,
            gender: None,
            accents: None,
            locale: None,
            segment: None,
            extra: BTreeMap::new(),
        }
    }
}

/// `<source_id>_<6-digit index>`.
pub fn make_clip_id(source_id: &str, index: usize) -> String {
    format!("{source_id}_{index:06}")
}

/// Anonymized speaker id derived from a prompt or model identifier.
pub fn make_client_id(voice_identifier: &str) -> String {
    hex::encode(Sha256::digest(voice_identifier.as_bytes()))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SplitSpec {
    pub valid_fraction: f64,
    #[serde(default)]
    pub seed: u64,
}

impl Default for SplitSpec {
    fn default() -> Self {
        Self {
            valid_fraction: DEFAULT_VALID_FRACTION,
            seed: 0,
        }
    }
}

impl SplitSpec {
    pub fn validate(&self) -> Result<()> {
        if !(self.valid_fraction > 0.0 && self.valid_fraction < 1.0) {
            return Err(Error::Validation(format!(
                "valid_fraction {} outside (0, 1)",
                self.valid_fraction
            )));
        }
        Ok(())
    }

    pub fn valid_count(&self, n: usize) -> usize {
        ((self.valid_fraction * n as f64).round() as usize).min(n)
    }
}

/// Rank key for an entry: `SHA-256(seed as 8 little-endian bytes ‖ clip_id)`.
pub fn split_rank_key(seed: u64, clip_id: &str) -> [u8; 32] {
    let mut h = Sha256::new();
    h.update(seed.to_le_bytes());
    h.update(clip_id.as_bytes());
    h.finalize().into()
}

/// Deterministic partition: entries ranked by [`split_rank_key`], the first
/// `round(valid_fraction · N)` go to valid. Both halves keep input order.
pub fn split_train_valid(entries: &[CorpusEntry], split: &SplitSpec) -> Result<(Vec<CorpusEntry>, Vec<CorpusEntry>)> {
    split.validate()?;
    let mut ranked: Vec<(usize, [u8; 32])> = entries
        .iter()
        .enumerate()
        .map(|(i, e)| (i, split_rank_key(split.seed, &e.clip_id)))
        .collect();
    ranked.sort_by(|a, b| a.1.cmp(&b.1).then(a.0.cmp(&b.0)));
    let valid_idx: HashSet<usize> = ranked
        .iter()
        .take(split.valid_count(entries.len()))
        .map(|(i, _)| *i)
        .collect();
    let (mut train, mut valid) = (Vec::new(), Vec::new());
    for (i, e) in entries.iter().enumerate() {
        if valid_idx.contains(&i) {
            valid.push(e.clone());
        } else {
            train.push(e.clone());
        }
    }
    Ok((train, valid))
}

/// A dataset read back from disk.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct LoadedCorpus {
    pub train: Vec<CorpusEntry>,
    pub valid: Vec<CorpusEntry>,
    /// Integrity findings: manifest rows without audio, audio without rows.
    pub warnings: Vec<String>,
}

impl LoadedCorpus {
    pub fn entries(&self) -> impl Iterator<Item = &CorpusEntry> {
        self.train.iter().chain(self.valid.iter())
    }

    pub fn len(&self) -> usize {
        self.train.len() + self.valid.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

fn check_clip_id(id: &str) -> Result<()> {
    if id.is_empty() || id.contains(['/', '\\', '|', '\t', '\n', '\r']) || id == "." || id == ".." {
        return Err(Error::Validation(format!("clip id {id:?} is not a safe file name")));
    }
    Ok(())
}

/// Shared writer preflight: ids unique and safe, sentences non-empty, audio
/// present in `format`, paths canonical. Runs before anything touches disk.
fn preflight(
    entries: &[CorpusEntry],
    audio: &BTreeMap<String, EncodedAudio>,
    format: AudioFormat,
    canonical: impl Fn(&str) -> String,
) -> Result<Vec<CorpusEntry>> {
    let mut seen = HashSet::new();
    let mut out = Vec::with_capacity(entries.len());
    for e in entries {
        check_clip_id(&e.clip_id)?;
        if !seen.insert(e.clip_id.as_str()) {
            return Err(Error::Validation(format!("duplicate clip id {:?}", e.clip_id)));
        }
        if e.sentence.trim().is_empty() {
            return Err(Error::Validation(format!("entry {:?} has an empty sentence", e.clip_id)));
        }
        let a = audio
            .get(&e.clip_id)
            .ok_or_else(|| Error::Validation(format!("no audio for entry {:?}", e.clip_id)))?;
        if a.format() != format {
            return Err(Error::Validation(format!(
                "entry {:?} has {:?} audio, layout requires {format:?}",
                e.clip_id,
                a.format()
            )));
        }
        let path = canonical(&e.clip_id);
        if !e.relative_audio_path.is_empty() && e.relative_audio_path != path {
            return Err(Error::Validation(format!(
                "entry {:?} path {:?} does not match layout path {path:?}",
                e.clip_id, e.relative_audio_path
            )));
        }
        let mut e = e.clone();
        e.relative_audio_path = path;
        out.push(e);
    }
    Ok(out)
}

fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let tmp = path.with_extension("partial");
    fs::write(&tmp, bytes)?;
    fs::rename(&tmp, path)?;
    Ok(())
}

/// Compares the files in `dir` with extension `ext` against the referenced
/// names; returns one warning per discrepancy.
fn verify_audio_dir(dir: &Path, ext: &str, referenced: &[&CorpusEntry], label: &str) -> Vec<String> {
    let mut warnings = Vec::new();
    let wanted: HashSet<String> = referenced.iter().map(|e| format!("{}.{ext}", e.clip_id)).collect();
    for e in referenced {
        let name = format!("{}.{ext}", e.clip_id);
        if !dir.join(&name).is_file() {
            warnings.push(format!("{label}: {} is listed but {name} is missing", e.clip_id));
        }
    }
    if let Ok(rd) = fs::read_dir(dir) {
        let mut extra: Vec<String> = rd
            .filter_map(|d| d.ok())
            .filter_map(|d| d.file_name().into_string().ok())
            .filter(|n| n.ends_with(&format!(".{ext}")) && !wanted.contains(n))
            .collect();
        extra.sort();
        warnings.extend(extra.into_iter().map(|n| format!("{label}: {n} is not referenced by any manifest")));
    }
    warnings
}

#[cfg(test)]
mod tests {
    use super::*;

    fn entries(n: usize) -> Vec<CorpusEntry> {
        (0..n).map(|i| CorpusEntry::new(make_clip_id("src", i), format!("s{i}"))).collect()
    }

    #[test]
    fn ten_entries_two_valid() {
        let (train, valid) = split_train_valid(&entries(10), &SplitSpec { valid_fraction: 0.2, seed: 1 }).unwrap();
        assert_eq!((train.len(), valid.len()), (8, 2));
        let t: HashSet<_> = train.iter().map(|e| &e.clip_id).collect();
        assert!(valid.iter().all(|e| !t.contains(&e.clip_id)));
    }

    #[test]
    fn deterministic() {
        let s = SplitSpec { valid_fraction: 0.3, seed: 9 };
        assert_eq!(split_train_valid(&entries(20), &s).unwrap(), split_train_valid(&entries(20), &s).unwrap());
    }

    #[test]
    fn rounding_to_zero_valid() {
        let (train, valid) = split_train_valid(&entries(4), &SplitSpec { valid_fraction: 0.1, seed: 0 }).unwrap();
        assert!(valid.is_empty());
        assert_eq!(train.len(), 4);
    }

    #[test]
    fn seed_changes_partition() {
        let a = split_train_valid(&entries(50), &SplitSpec { valid_fraction: 0.5, seed: 0 }).unwrap();
        let b = split_train_valid(&entries(50), &SplitSpec { valid_fraction: 0.5, seed: 1 }).unwrap();
        assert_ne!(a.1, b.1);
    }

    #[test]
    fn rank_key_layout() {
        // SHA-256 over 8 zero bytes followed by "a"
        let mut h = Sha256::new();
        h.update([0u8; 8]);
        h.update(b"a");
        let expect: [u8; 32] = h.finalize().into();
        assert_eq!(split_rank_key(0, "a"), expect);
    }

    #[test]
    fn clip_id_format() {
        assert_eq!(make_clip_id("abc", 7), "abc_000007");
        assert_eq!(make_client_id("x").len(), 64);
    }

    #[test]
    fn bad_fraction() {
        assert!(split_train_valid(&entries(3), &SplitSpec { valid_fraction: 1.0, seed: 0 }).is_err());
    }
}
