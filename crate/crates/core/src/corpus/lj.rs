//! LJ Speech layout: `wavs/<clip_id>.wav` plus `train.txt` / `valid.txt`
//! with one `wavs/<clip_id>.wav|<sentence>` line per clip.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use super::{preflight, split_train_valid, verify_audio_dir, write_atomic, CorpusEntry, LoadedCorpus, SplitSpec};
use crate::error::{Error, Result};
use crate::preprocess::{AudioFormat, EncodedAudio};

fn lj_path(clip_id: &str) -> String {
    format!("wavs/{clip_id}.wav")
}

pub fn write_lj(
    entries: &[CorpusEntry],
    audio: &BTreeMap<String, EncodedAudio>,
    root: &Path,
    split: &SplitSpec,
) -> Result<()> {
    let entries = preflight(entries, audio, AudioFormat::WavPcm16, lj_path)?;
    if let Some(e) = entries.iter().find(|e| e.sentence.contains(['|', '\n', '\r'])) {
        return Err(Error::Writer(format!(
            "sentence of {:?} contains the `|` delimiter or a line break",
            e.clip_id
        )));
    }
    let (train, valid) = split_train_valid(&entries, split)?;

    let wavs = root.join("wavs");
    fs::create_dir_all(&wavs)?;
    for e in &entries {
        write_atomic(&root.join(&e.relative_audio_path), audio[&e.clip_id].payload())?;
    }
    let manifest = |part: &[CorpusEntry]| -> String {
        part.iter()
            .map(|e| format!("{}|{}\n", e.relative_audio_path, e.sentence))
            .collect()
    };
    write_atomic(&root.join("train.txt"), manifest(&train).as_bytes())?;
    write_atomic(&root.join("valid.txt"), manifest(&valid).as_bytes())?;
    Ok(())
}

fn read_manifest(path: &Path) -> Result<Vec<CorpusEntry>> {
    let text = fs::read_to_string(path)?;
    let mut out = Vec::new();
    for (n, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let parse = |message: String| Error::Parse {
            file: path.to_path_buf(),
            line: n + 1,
            message,
        };
        let fields: Vec<&str> = line.split('|').collect();
        let [rel, sentence] = fields.as_slice() else {
            return Err(parse(format!("expected 2 `|`-separated fields, found {}", fields.len())));
        };
        let clip_id = rel
            .strip_prefix("wavs/")
            .and_then(|r| r.strip_suffix(".wav"))
            .filter(|id| !id.is_empty() && !id.contains('/'))
            .ok_or_else(|| parse(format!("audio path {rel:?} is not wavs/<id>.wav")))?;
        let mut e = CorpusEntry::new(clip_id, *sentence);
        e.relative_audio_path = rel.to_string();
        out.push(e);
    }
    Ok(out)
}

pub fn read_lj(root: &Path) -> Result<LoadedCorpus> {
    let train = read_manifest(&root.join("train.txt"))?;
    let valid = read_manifest(&root.join("valid.txt"))?;
    let all: Vec<&CorpusEntry> = train.iter().chain(valid.iter()).collect();
    let warnings = verify_audio_dir(&root.join("wavs"), "wav", &all, "lj");
    Ok(LoadedCorpus { train, valid, warnings })
}
