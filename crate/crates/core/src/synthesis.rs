//! Prompted text-to-audio generation, single and batched with a resumable
//! journal.

use std::collections::HashMap;
use std::fs::{self, File, OpenOptions};
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};
use std::sync::Mutex;
use std::time::SystemTime;

use serde::{Deserialize, Serialize};

use crate::adapters::TtsBackend;
use crate::audio::AudioClip;
use crate::error::{AdapterError, Error, Result};
use crate::ingest::sha256_hex;
use crate::voiceprompt::SpeakerPrompt;
use crate::wav;

pub const DEFAULT_TEXT_TEMP: f64 = 0.85;
pub const DEFAULT_WAVEFORM_TEMP: f64 = 0.7;
pub const DEFAULT_RETRIES: u32 = 2;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GenerationParams {
    pub text_temp: f64,
    pub waveform_temp: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
}

impl Default for GenerationParams {
    fn default() -> Self {
        default_generation_params()
    }
}

impl GenerationParams {
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [("text_temp", self.text_temp), ("waveform_temp", self.waveform_temp)] {
            if !(v.is_finite() && v > 0.0 && v <= 2.0) {
                return Err(Error::Validation(format!("{name} = {v} outside (0, 2]")));
            }
        }
        Ok(())
    }
}

/// Sampling temperatures that gave the most faithful clones: 0.85 for the
/// semantic (text) stage, 0.7 for the waveform stages. No seed.
pub fn default_generation_params() -> GenerationParams {
    GenerationParams {
        text_temp: DEFAULT_TEXT_TEMP,
        waveform_temp: DEFAULT_WAVEFORM_TEMP,
        seed: None,
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GenerationRecord {
    pub sentence: String,
    pub clip: AudioClip,
    pub params: GenerationParams,
    pub prompt_id: String,
    pub created_at: SystemTime,
}

pub fn synthesize(
    text: &str,
    prompt: &SpeakerPrompt,
    params: &GenerationParams,
    backend: &dyn TtsBackend,
) -> Result<AudioClip> {
    let text = text.trim();
    if text.is_empty() {
        return Err(Error::Precondition("cannot synthesize empty text".into()));
    }
    params.validate()?;
    let prompt_id = prompt.id();
    let samples = backend
        .generate(text, prompt, params)
        .map_err(|e| Error::stage("synthesize", format!("{text:?}"), e))?;
    if samples.is_empty() {
        return Err(Error::stage(
            "synthesize",
            format!("{text:?}"),
            AdapterError::new("backend returned no audio"),
        ));
    }
    AudioClip::from_clamped(samples, backend.native_rate_hz(), format!("tts-{prompt_id}"))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum JournalStatus {
    Ok,
    Failed,
}

/// One line of the synthesis journal.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct JournalLine {
    pub sentence_sha256: String,
    /// Relative to the journal's directory; empty for failures.
    pub output_path: String,
    pub status: JournalStatus,
}

/// Append-only, line-per-record checkpoint of a batch run.
#[derive(Debug)]
pub struct Journal {
    path: PathBuf,
    file: Mutex<File>,
}

impl Journal {
    /// Opens (creating if needed) the journal at `path`. With `fresh`, any
    /// existing content is discarded.
    pub fn open(path: &Path, fresh: bool) -> Result<Self> {
        if let Some(dir) = path.parent() {
            fs::create_dir_all(dir)?;
        }
        if fresh && path.exists() {
            fs::remove_file(path)?;
        }
        let file = OpenOptions::new().create(true).append(true).open(path)?;
        Ok(Self {
            path: path.to_path_buf(),
            file: Mutex::new(file),
        })
    }

    pub fn dir(&self) -> &Path {
        self.path.parent().unwrap_or(Path::new("."))
    }

    /// Every line; a torn final line from a crash is ignored.
    pub fn read_lines(&self) -> Result<Vec<JournalLine>> {
        let f = File::open(&self.path)?;
        let mut out = Vec::new();
        for line in BufReader::new(f).lines() {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            if let Ok(rec) = serde_json::from_str::<JournalLine>(&line) {
                out.push(rec);
            }
        }
        Ok(out)
    }

    /// Latest status per sentence hash.
    pub fn completed(&self) -> Result<HashMap<String, PathBuf>> {
        let mut map = HashMap::new();
        for line in self.read_lines()? {
            match line.status {
                JournalStatus::Ok => {
                    map.insert(line.sentence_sha256, self.dir().join(line.output_path));
                }
                JournalStatus::Failed => {
                    map.remove(&line.sentence_sha256);
                }
            }
        }
        Ok(map)
    }

    pub fn append(&self, line: &JournalLine) -> Result<()> {
        let mut text = serde_json::to_string(line)?;
        text.push('\n');
        let mut f = self.file.lock().expect("journal lock poisoned");
        f.write_all(text.as_bytes())?;
        f.flush()?;
        Ok(())
    }
}

#[derive(Debug)]
pub struct BatchOptions<'a> {
    /// Extra attempts per sentence after the first failure.
    pub retries: u32,
    pub workers: usize,
    /// Checkpoint journal; audio is written next to it under `synth/`.
    pub journal: Option<&'a Journal>,
}

impl Default for BatchOptions<'_> {
    fn default() -> Self {
        Self {
            retries: DEFAULT_RETRIES,
            workers: 1,
            journal: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum BatchItem {
    Done(GenerationRecord),
    Failed { sentence: String, cause: String },
}

#[derive(Debug, Clone, PartialEq)]
pub struct BatchOutcome {
    /// One item per input sentence, in input order.
    pub items: Vec<BatchItem>,
    /// Sentences restored from the journal instead of being regenerated.
    pub resumed: usize,
}

impl BatchOutcome {
    pub fn records(&self) -> impl Iterator<Item = &GenerationRecord> {
        self.items.iter().filter_map(|i| match i {
            BatchItem::Done(r) => Some(r),
            BatchItem::Failed { .. } => None,
        })
    }

    pub fn failures(&self) -> impl Iterator<Item = (usize, &str, &str)> {
        self.items.iter().enumerate().filter_map(|(k, i)| match i {
            BatchItem::Failed { sentence, cause } => Some((k, sentence.as_str(), cause.as_str())),
            BatchItem::Done(_) => None,
        })
    }

    pub fn is_partial(&self) -> bool {
        self.failures().next().is_some()
    }
}

pub fn sentence_key(sentence: &str) -> String {
    sha256_hex(sentence.trim().as_bytes())
}

fn load_journaled(path: &Path, sentence: &str, params: &GenerationParams, prompt_id: &str) -> Option<GenerationRecord> {
    let data = wav::decode_file(path).ok()?;
    let samples = data.channels.into_iter().next()?;
    let clip = AudioClip::from_clamped(samples, data.sample_rate_hz, format!("tts-{prompt_id}")).ok()?;
    if clip.is_empty() {
        return None;
    }
    let created_at = fs::metadata(path).and_then(|m| m.modified()).unwrap_or_else(|_| SystemTime::now());
    Some(GenerationRecord {
        sentence: sentence.to_string(),
        clip,
        params: *params,
        prompt_id: prompt_id.to_string(),
        created_at,
    })
}

fn generate_one(
    sentence: &str,
    prompt: &SpeakerPrompt,
    prompt_id: &str,
    params: &GenerationParams,
    backend: &dyn TtsBackend,
    opts: &BatchOptions<'_>,
) -> BatchItem {
    let mut last_err = String::new();
    for _ in 0..=opts.retries {
        match synthesize(sentence, prompt, params, backend) {
            Ok(clip) => {
                let Some(journal) = opts.journal else {
                    return BatchItem::Done(GenerationRecord {
                        sentence: sentence.to_string(),
                        clip,
                        params: *params,
                        prompt_id: prompt_id.to_string(),
                        created_at: SystemTime::now(),
                    });
                };
                return match persist(journal, sentence, &clip) {
                    Ok(path) => match load_journaled(&path, sentence, params, prompt_id) {
                        Some(rec) => BatchItem::Done(rec),
                        None => BatchItem::Failed {
                            sentence: sentence.to_string(),
                            cause: format!("could not read back {}", path.display()),
                        },
                    },
                    Err(e) => BatchItem::Failed {
                        sentence: sentence.to_string(),
                        cause: e.to_string(),
                    },
                };
            }
            Err(e @ (Error::Precondition(_) | Error::Validation(_))) => {
                last_err = e.to_string();
                break;
            }
            Err(e) => last_err = e.to_string(),
        }
    }
    if let Some(journal) = opts.journal {
        let _ = journal.append(&JournalLine {
            sentence_sha256: sentence_key(sentence),
            output_path: String::new(),
            status: JournalStatus::Failed,
        });
    }
    BatchItem::Failed {
        sentence: sentence.to_string(),
        cause: last_err,
    }
}

fn persist(journal: &Journal, sentence: &str, clip: &AudioClip) -> Result<PathBuf> {
    let key = sentence_key(sentence);
    let rel = format!("synth/{key}.wav");
    let path = journal.dir().join(&rel);
    fs::create_dir_all(path.parent().unwrap())?;
    let tmp = path.with_extension("wav.tmp");
    fs::write(&tmp, wav::encode_pcm16(clip.samples(), clip.sample_rate_hz()))?;
    fs::rename(&tmp, &path)?;
    journal.append(&JournalLine {
        sentence_sha256: key,
        output_path: rel,
        status: JournalStatus::Ok,
    })?;
    Ok(path)
}

/// Generates one clip per sentence.
///
/// Failures are isolated per sentence (after `retries` extra attempts) and
/// reported in the outcome; only a batch where every sentence fails is an
/// error. With a journal, sentences already recorded as done are restored
/// from disk instead of regenerated.
pub fn batch_synthesize(
    sentences: &[String],
    prompt: &SpeakerPrompt,
    params: &GenerationParams,
    backend: &dyn TtsBackend,
    opts: &BatchOptions<'_>,
) -> Result<BatchOutcome> {
    if let Some(k) = sentences.iter().position(|s| s.trim().is_empty()) {
        return Err(Error::Precondition(format!("sentence {k} is empty")));
    }
    params.validate()?;
    let prompt_id = prompt.id();
    let done = match opts.journal {
        Some(j) => j.completed()?,
        None => HashMap::new(),
    };

    let mut items: Vec<Option<BatchItem>> = vec![None; sentences.len()];
    let mut pending = Vec::new();
    let mut resumed = 0;
    for (k, s) in sentences.iter().enumerate() {
        let restored = done
            .get(&sentence_key(s))
            .and_then(|p| load_journaled(p, s, params, &prompt_id));
        match restored {
            Some(rec) => {
                items[k] = Some(BatchItem::Done(rec));
                resumed += 1;
            }
            None => pending.push(k),
        }
    }

    let workers = opts.workers.max(1).min(pending.len().max(1));
    if workers == 1 {
        for k in pending {
            items[k] = Some(generate_one(&sentences[k], prompt, &prompt_id, params, backend, opts));
        }
    } else {
        let results = Mutex::new(Vec::new());
        std::thread::scope(|scope| {
            for w in 0..workers {
                let mine: Vec<usize> = pending.iter().copied().skip(w).step_by(workers).collect();
                let results = &results;
                let prompt_id = &prompt_id;
                scope.spawn(move || {
                    for k in mine {
                        let item = generate_one(&sentences[k], prompt, prompt_id, params, backend, opts);
                        results.lock().unwrap().push((k, item));
                    }
                });
            }
        });
        for (k, item) in results.into_inner().unwrap() {
            items[k] = Some(item);
        }
    }

    let items: Vec<BatchItem> = items.into_iter().map(|i| i.expect("every sentence handled")).collect();
    let outcome = BatchOutcome { items, resumed };
    if !sentences.is_empty() && outcome.records().next().is_none() {
        return Err(Error::BatchFailed(
            outcome
                .failures()
                .map(|(k, s, c)| format!("#{k} {s:?}: {c}"))
                .collect(),
        ));
    }
    Ok(outcome)
}
