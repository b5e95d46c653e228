//! Stage orchestration for both workflows.
//!
//! [`Pipeline`] binds a validated [`PipelineConfig`] to the adapters it names.
//! Each stage is a method so it can be run on its own; [`Pipeline::run`]
//! composes them per methodology. Configuration and adapter lookups are
//! checked in [`Pipeline::new`], before anything touches the filesystem.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use serde::Serialize;

use crate::adapters::{AdapterRegistry, AdapterRole, Transcoder};
use crate::audio::AudioClip;
use crate::config::{Methodology, OutputFormat, PipelineConfig};
use crate::conversion::{convert_voice, validate_training_data, write_training_config};
use crate::corpus::{
    make_clip_id, make_client_id, read_common_voice, read_lj, write_common_voice, write_lj, CorpusEntry,
    LoadedCorpus,
};
use crate::error::{Error, Result};
use crate::ingest::{acquire_source, decode_to_audio, sha256_hex, RawMediaHandle};
use crate::preprocess::{denoise, segment, separate_vocals, transcode, AudioFormat, EncodedAudio};
use crate::quality::{character_error_rate, speaker_similarity, ClipConstraints, QualityReport, REPORT_FILE_NAME};
use crate::synthesis::{batch_synthesize, BatchItem, BatchOptions, BatchOutcome, Journal};
use crate::transcribe::{diarize, multi_speaker_warning, slice_by_segments, transcribe};
use crate::voiceprompt::{
    build_prompt, extract_codebooks, extract_semantic_tokens, load_prompt, save_prompt, SpeakerPrompt,
};
use crate::wav;

/// Rate the semantic encoder is fed at.
pub const SEMANTIC_INPUT_RATE_HZ: u32 = 16_000;
/// Trainer config written next to a voice-conversion training set.
pub const TRAINER_CONFIG_FILE: &str = "rvc_train_config.txt";
const PROMPT_FILE: &str = "prompt.npz";
const SUMMARY_FILE: &str = "run_summary.json";

/// A manifest entry with its audio.
pub type LabeledClip = (CorpusEntry, AudioClip);

#[derive(Debug, Clone, Default)]
pub struct RunOptions {
    /// Reuse the synthesis journal instead of starting over.
    pub resume: bool,
    /// Overrides `run.workers`.
    pub workers: Option<usize>,
    /// Validate and plan only.
    pub dry_run: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunSummary {
    pub methodology: Methodology,
    pub dry_run: bool,
    pub plan: Vec<String>,
    /// Segments (methodology 1) or transcribed utterances (methodology 2).
    pub clips_in: usize,
    pub prompts_built: usize,
    pub sentences_generated: usize,
    pub sentences_resumed: usize,
    pub entries_written: usize,
    pub quality: QualityReport,
    pub warnings: Vec<String>,
    /// Items that failed after retries; non-empty means a partial run.
    pub failures: Vec<String>,
    pub next_step: Option<String>,
    pub output_root: PathBuf,
}

impl RunSummary {
    fn new(cfg: &PipelineConfig) -> Self {
        Self {
            methodology: cfg.methodology,
            dry_run: false,
            plan: Vec::new(),
            clips_in: 0,
            prompts_built: 0,
            sentences_generated: 0,
            sentences_resumed: 0,
            entries_written: 0,
            quality: QualityReport::default(),
            warnings: Vec::new(),
            failures: Vec::new(),
            next_step: None,
            output_root: cfg.output.root.clone(),
        }
    }

    pub fn is_partial(&self) -> bool {
        !self.failures.is_empty()
    }

    /// 0, or 3 for a partial batch.
    pub fn exit_code(&self) -> i32 {
        if self.is_partial() {
            3
        } else {
            0
        }
    }
}

/// Maps `f` over `items` on up to `workers` scoped threads, keeping order.
pub fn par_map<T: Sync, R: Send>(items: &[T], workers: usize, f: impl Fn(&T) -> R + Sync) -> Vec<R> {
    let workers = workers.max(1).min(items.len().max(1));
    if workers == 1 {
        return items.iter().map(f).collect();
    }
    let chunk = items.len().div_ceil(workers);
    let f = &f;
    std::thread::scope(|s| {
        let handles: Vec<_> = items
            .chunks(chunk)
            .map(|c| s.spawn(move || c.iter().map(f).collect::<Vec<R>>()))
            .collect();
        handles
            .into_iter()
            .flat_map(|h| h.join().expect("worker panicked"))
            .collect()
    })
}

pub fn audio_format(format: OutputFormat) -> AudioFormat {
    match format {
        OutputFormat::Lj => AudioFormat::WavPcm16,
        OutputFormat::CommonVoice => AudioFormat::Mp3,
    }
}

/// Recognizes a dataset root by its manifests.
pub fn detect_format(root: &Path) -> Result<OutputFormat> {
    if root.join("train.tsv").is_file() {
        Ok(OutputFormat::CommonVoice)
    } else if root.join("train.txt").is_file() {
        Ok(OutputFormat::Lj)
    } else {
        Err(Error::Format(format!(
            "{} has neither train.tsv nor train.txt",
            root.display()
        )))
    }
}

pub fn read_dataset(root: &Path, format: OutputFormat) -> Result<LoadedCorpus> {
    match format {
        OutputFormat::Lj => read_lj(root),
        OutputFormat::CommonVoice => read_common_voice(root),
    }
}

/// Decodes one dataset clip from disk.
pub fn load_entry_audio(root: &Path, entry: &CorpusEntry, transcoder: &dyn Transcoder) -> Result<AudioClip> {
    let path = root.join(&entry.relative_audio_path);
    let format = match path.extension().and_then(|e| e.to_str()) {
        Some("mp3") => AudioFormat::Mp3,
        Some("wav") => AudioFormat::WavPcm16,
        _ => return Err(Error::Format(format!("{} has no known audio extension", path.display()))),
    };
    let payload = fs::read(&path)?;
    let (samples, rate) = transcoder
        .decode(&payload, format)
        .map_err(|e| Error::Decode {
            path: path.clone(),
            reason: e.to_string(),
        })?;
    AudioClip::from_clamped(samples, rate, entry.clip_id.clone())
}

/// Reads a dataset back and validates every clip. Clips that can't be
/// decoded are reported as `unreadable` failures.
pub fn validate_dataset(
    root: &Path,
    format: Option<OutputFormat>,
    constraints: &ClipConstraints,
    transcoder: &dyn Transcoder,
    workers: usize,
) -> Result<(LoadedCorpus, QualityReport, Vec<Option<AudioClip>>)> {
    let format = match format {
        Some(f) => f,
        None => detect_format(root)?,
    };
    let corpus = read_dataset(root, format)?;
    let entries: Vec<&CorpusEntry> = corpus.entries().collect();
    let clips: Vec<Result<AudioClip>> = par_map(&entries, workers, |e| load_entry_audio(root, e, transcoder));
    let ok: Vec<(&str, &AudioClip)> = entries
        .iter()
        .zip(&clips)
        .filter_map(|(e, c)| c.as_ref().ok().map(|c| (e.clip_id.as_str(), c)))
        .collect();
    let mut report = QualityReport::for_clips(ok, constraints);
    for (e, c) in entries.iter().zip(&clips) {
        if let Err(err) = c {
            report.add_issue(
                &e.clip_id,
                crate::quality::Issue::new("unreadable", crate::quality::Severity::Fail, err.to_string()),
            );
        }
    }
    report.set_metric("failing_clips", report.failing_clips().len() as f64);
    report.notes.extend(corpus.warnings.iter().cloned());
    let clips = clips.into_iter().map(Result::ok).collect();
    Ok((corpus, report, clips))
}

/// Deletes the files a dataset writer owns under `root` so a rerun leaves no
/// stale clips behind. Nothing else in `root` is touched.
fn clear_dataset(root: &Path) -> Result<()> {
    for dir in ["clips", "wavs"] {
        let p = root.join(dir);
        if p.is_dir() {
            fs::remove_dir_all(&p)?;
        }
    }
    for f in ["train.tsv", "dev.tsv", "README.md", "train.txt", "valid.txt", REPORT_FILE_NAME, TRAINER_CONFIG_FILE] {
        let p = root.join(f);
        if p.is_file() {
            fs::remove_file(&p)?;
        }
    }
    Ok(())
}

fn comparable(entries: &[CorpusEntry], format: OutputFormat) -> Vec<CorpusEntry> {
    let mut v: Vec<CorpusEntry> = entries
        .iter()
        .map(|e| match format {
            // LJ keeps only the path and the sentence.
            OutputFormat::Lj => {
                let mut c = CorpusEntry::new(e.clip_id.clone(), e.sentence.clone());
                c.relative_audio_path = format!("wavs/{}.wav", e.clip_id);
                c
            }
            OutputFormat::CommonVoice => {
                let mut c = e.clone();
                c.relative_audio_path = format!("clips/{}.mp3", e.clip_id);
                c
            }
        })
        .collect();
    v.sort_by(|a, b| a.clip_id.cmp(&b.clip_id));
    v
}

pub struct Pipeline<'a> {
    cfg: &'a PipelineConfig,
    reg: &'a AdapterRegistry,
    opts: RunOptions,
    transcoder: Arc<dyn Transcoder>,
}

impl<'a> Pipeline<'a> {
    /// Fails with a config or lookup error if any adapter is missing.
    pub fn new(cfg: &'a PipelineConfig, reg: &'a AdapterRegistry, opts: RunOptions) -> Result<Self> {
        cfg.validate()?;
        cfg.check_adapters(reg)?;
        if opts.workers == Some(0) {
            return Err(Error::Config("--workers must be at least 1".into()));
        }
        let transcoder = reg.transcoder(cfg.adapter_id(AdapterRole::Transcode)?)?;
        Ok(Self {
            cfg,
            reg,
            opts,
            transcoder,
        })
    }

    pub fn config(&self) -> &PipelineConfig {
        self.cfg
    }

    fn workers(&self) -> usize {
        self.opts.workers.unwrap_or(self.cfg.run.workers).max(1)
    }

    fn id(&self, role: AdapterRole) -> Result<&str> {
        self.cfg.adapter_id(role)
    }

    /// Human-readable list of the stages a run would execute.
    pub fn plan(&self) -> Vec<String> {
        let c = self.cfg;
        let mut p = vec![
            format!("preprocessing preset {:?}", c.preprocessing.preset),
            format!("acquire {} ({:?})", c.source.uri, c.source.kind),
        ];
        let rate = match c.methodology {
            Methodology::BarkPrompt => self.codec_rate().unwrap_or_default(),
            Methodology::RvcConvert => c.training.target_sample_rate_hz,
        };
        p.push(format!("decode to mono {rate} Hz"));
        if let Some(s) = c.preprocessing.denoise {
            p.push(format!("denoise (strength {s})"));
        }
        if let Some(m) = c.preprocessing.stems {
            p.push(format!("isolate vocals ({m:?})"));
        }
        match c.methodology {
            Methodology::BarkPrompt => {
                p.push(format!("segment into {} s pieces", c.preprocessing.segmentation.target_len_s));
                p.push(format!("build speaker prompt from segment {}", c.prompt.segment_index));
                let n = c.sentences().map(|s| s.len()).unwrap_or(0);
                p.push(format!(
                    "synthesize {n} sentences (text_temp {}, waveform_temp {}, {} worker(s){})",
                    c.generation.text_temp,
                    c.generation.waveform_temp,
                    self.workers(),
                    if self.opts.resume { ", resuming" } else { "" }
                ));
            }
            Methodology::RvcConvert => {
                p.push(format!("transcribe ({}, {:?}) and diarize", c.asr.language, c.asr.task));
                p.push("slice into utterances".into());
                match &c.conversion.model_ref {
                    None => p.push(format!("write LJ training set and {TRAINER_CONFIG_FILE}; stop")),
                    Some(m) => p.push(format!("convert {:?} with {}", c.conversion.input_corpus, m.display())),
                }
            }
        }
        p.push(format!("package {:?} dataset at {}", c.output.format, c.output.root.display()));
        p.push("read back and validate".into());
        p
    }

    fn codec_rate(&self) -> Result<u32> {
        Ok(self.reg.codec(self.id(AdapterRole::Codec)?)?.native_rate_hz())
    }

    pub fn acquire(&self) -> Result<RawMediaHandle> {
        let downloader = match self.cfg.optional_adapter_id(AdapterRole::Downloader) {
            Some(id) => Some(self.reg.downloader(id)?),
            None => None,
        };
        let decoder = self.reg.decoder(self.id(AdapterRole::Decoder)?)?;
        acquire_source(&self.cfg.source, downloader.as_deref(), decoder.as_ref(), &self.cfg.cache_dir())
    }

    /// Acquire, decode at `rate`, then the optional cleanup passes.
    pub fn load_source(&self, rate: u32) -> Result<AudioClip> {
        let handle = self.acquire()?;
        let decoder = self.reg.decoder(self.id(AdapterRole::Decoder)?)?;
        let mut clip = decode_to_audio(&handle, rate, decoder.as_ref())?;
        if let Some(strength) = self.cfg.preprocessing.denoise {
            clip = denoise(&clip, strength, self.reg.denoiser(self.id(AdapterRole::Denoise)?)?.as_ref())?;
        }
        if let Some(model) = self.cfg.preprocessing.stems {
            clip = separate_vocals(&clip, model, self.reg.stems(self.id(AdapterRole::Stems)?)?.as_ref())?;
        }
        Ok(clip)
    }

    /// Fixed-length segments at the codec's native rate.
    pub fn segments(&self) -> Result<Vec<AudioClip>> {
        let clip = self.load_source(self.codec_rate()?)?;
        segment(&clip, &self.cfg.preprocessing.segmentation)
    }

    pub fn prompt_path(&self) -> PathBuf {
        self.cfg.work_dir().join(PROMPT_FILE)
    }

    /// Builds the speaker prompt from the configured segment and saves it.
    pub fn build_prompt(&self, segments: &[AudioClip]) -> Result<SpeakerPrompt> {
        let k = self.cfg.prompt.segment_index;
        let seg = segments.get(k).ok_or_else(|| {
            Error::Precondition(format!(
                "prompt.segment_index {k} but the source yields {} segment(s)",
                segments.len()
            ))
        })?;
        let codec = self.reg.codec(self.id(AdapterRole::Codec)?)?;
        let (fine, _coarse) = extract_codebooks(seg, codec.as_ref(), self.cfg.prompt.n_coarse)?;
        let semantic = extract_semantic_tokens(
            &seg.resampled(SEMANTIC_INPUT_RATE_HZ)?,
            self.reg.semantic_encoder(self.id(AdapterRole::SemanticEncoder)?)?.as_ref(),
            self.reg.token_quantizer(self.id(AdapterRole::TokenQuantizer)?)?.as_ref(),
        )?;
        let prompt = build_prompt(semantic, fine, self.cfg.prompt.n_coarse, seg.source_id())?;
        save_prompt(&prompt, &self.prompt_path())?;
        Ok(prompt)
    }

    /// The saved prompt if there is one, else a freshly built one.
    pub fn prompt(&self) -> Result<(SpeakerPrompt, Option<AudioClip>)> {
        let path = self.prompt_path();
        if self.opts.resume && path.is_file() {
            return Ok((load_prompt(&path)?, None));
        }
        let segments = self.segments()?;
        let prompt = self.build_prompt(&segments)?;
        Ok((prompt, segments.into_iter().nth(self.cfg.prompt.segment_index)))
    }

    /// Runs the sentence batch against a journal under the work directory.
    pub fn synthesize(&self, prompt: &SpeakerPrompt, sentences: &[String]) -> Result<BatchOutcome> {
        let tts_id = self.id(AdapterRole::Tts)?;
        let tts = self.reg.tts(tts_id)?;
        let workers = if self.reg.descriptor(AdapterRole::Tts, tts_id)?.thread_safe {
            self.workers()
        } else {
            1
        };
        let journal_path = self.cfg.work_dir().join("synth").join(prompt.id()).join("journal.jsonl");
        let journal = Journal::open(&journal_path, !self.opts.resume)?;
        let opts = BatchOptions {
            retries: self.cfg.run.retries,
            workers,
            journal: Some(&journal),
        };
        batch_synthesize(sentences, prompt, &self.cfg.generation, tts.as_ref(), &opts)
    }

    /// Transcodes and writes `items` as a dataset at `root` in `format`.
    pub fn write_dataset(&self, items: &[(CorpusEntry, AudioClip)], root: &Path, format: OutputFormat) -> Result<()> {
        let af = audio_format(format);
        let encoded: Vec<Result<EncodedAudio>> =
            par_map(items, self.workers(), |(_, clip)| transcode(clip, af, self.transcoder.as_ref()));
        let mut audio = BTreeMap::new();
        for ((entry, _), enc) in items.iter().zip(encoded) {
            audio.insert(entry.clip_id.clone(), enc?);
        }
        let entries: Vec<CorpusEntry> = items.iter().map(|(e, _)| e.clone()).collect();
        fs::create_dir_all(root)?;
        clear_dataset(root)?;
        match format {
            OutputFormat::Lj => write_lj(&entries, &audio, root, &self.cfg.output.split),
            OutputFormat::CommonVoice => write_common_voice(&entries, &audio, root, &self.cfg.output.split),
        }
    }

    /// Reads the dataset back, checks it matches what was written, validates
    /// each clip and writes the report into `root`.
    pub fn verify_dataset(
        &self,
        root: &Path,
        format: OutputFormat,
        required_rate_hz: u32,
        written: &[CorpusEntry],
        reference: Option<&AudioClip>,
    ) -> Result<(QualityReport, Vec<(CorpusEntry, AudioClip)>)> {
        let constraints = self.cfg.clip_constraints(required_rate_hz);
        let (corpus, mut report, clips) =
            validate_dataset(root, Some(format), &constraints, self.transcoder.as_ref(), self.workers())?;
        let read: Vec<CorpusEntry> = corpus.entries().cloned().collect();
        if comparable(&read, format) != comparable(written, format) {
            return Err(Error::Integrity(format!(
                "dataset at {} does not read back as written",
                root.display()
            )));
        }
        let pairs: Vec<(CorpusEntry, AudioClip)> = read
            .into_iter()
            .zip(clips)
            .filter_map(|(e, c)| c.map(|c| (e, c)))
            .collect();
        if let (Some(reference), Some(id)) = (reference, self.cfg.optional_adapter_id(AdapterRole::SpeakerEmbedding)) {
            let embedder = self.reg.speaker_embedder(id)?;
            let embed = |c: &AudioClip| {
                embedder
                    .embed(c)
                    .map_err(|e| Error::stage("speaker_embedding", c.source_id().to_string(), e))
            };
            let sims: Vec<Result<f64>> = par_map(&pairs, self.workers(), |(_, clip)| {
                let r = embed(&reference.resampled(clip.sample_rate_hz())?)?;
                speaker_similarity(&r, &embed(clip)?)
            });
            let sims: Vec<f64> = sims.into_iter().collect::<Result<_>>()?;
            if !sims.is_empty() {
                report.set_metric("speaker_similarity_mean", sims.iter().sum::<f64>() / sims.len() as f64);
            }
        }
        report.write(&root.join(REPORT_FILE_NAME))?;
        Ok((report, pairs))
    }

    fn finish(&self, summary: RunSummary) -> Result<RunSummary> {
        let dir = self.cfg.work_dir();
        fs::create_dir_all(&dir)?;
        fs::write(dir.join(SUMMARY_FILE), serde_json::to_string_pretty(&summary)? + "\n")?;
        Ok(summary)
    }

    fn dry(&self) -> RunSummary {
        let mut s = RunSummary::new(self.cfg);
        s.dry_run = true;
        s.plan = self.plan();
        s
    }

    pub fn run(&self) -> Result<RunSummary> {
        match self.cfg.methodology {
            Methodology::BarkPrompt => self.run_methodology_1(),
            Methodology::RvcConvert => self.run_methodology_2(),
        }
    }

    /// Acquire, preprocess, segment, build the prompt, synthesize, package.
    pub fn run_methodology_1(&self) -> Result<RunSummary> {
        if self.cfg.methodology != Methodology::BarkPrompt {
            return Err(Error::Config("methodology 1 needs methodology = \"bark_prompt\"".into()));
        }
        let sentences = self.cfg.sentences()?;
        if sentences.is_empty() {
            return Err(Error::Config("no sentences to synthesize".into()));
        }
        if self.opts.dry_run {
            return Ok(self.dry());
        }
        let mut summary = RunSummary::new(self.cfg);
        summary.plan = self.plan();

        let segments = self.segments()?;
        summary.clips_in = segments.len();
        let prompt = self.build_prompt(&segments)?;
        summary.prompts_built = 1;
        let reference = &segments[self.cfg.prompt.segment_index];

        let outcome = self.synthesize(&prompt, &sentences)?;
        summary.sentences_resumed = outcome.resumed;
        summary.sentences_generated = outcome.records().count();
        summary.failures = outcome.failures().map(|(k, s, c)| format!("#{k} {s:?}: {c}")).collect();

        let prompt_id = prompt.id();
        let client_id = make_client_id(&prompt_id);
        let items: Vec<(CorpusEntry, AudioClip)> = outcome
            .items
            .iter()
            .enumerate()
            .filter_map(|(k, item)| match item {
                BatchItem::Done(rec) => {
                    let mut e = CorpusEntry::new(make_clip_id(&prompt_id, k), rec.sentence.trim());
                    e.client_id = client_id.clone();
                    e.locale = Some(self.cfg.output.locale.clone());
                    Some((e, rec.clip.clone()))
                }
                BatchItem::Failed { .. } => None,
            })
            .collect();
        let root = &self.cfg.output.root;
        self.write_dataset(&items, root, self.cfg.output.format)?;
        summary.entries_written = items.len();

        let rate = self.reg.tts(self.id(AdapterRole::Tts)?)?.native_rate_hz();
        let written: Vec<CorpusEntry> = items.into_iter().map(|(e, _)| e).collect();
        let (report, _) = self.verify_dataset(root, self.cfg.output.format, rate, &written, Some(reference))?;
        summary.quality = report;
        self.finish(summary)
    }

    /// Transcribed, diarized, sliced utterances at the training rate, with
    /// clips outside the duration bounds dropped.
    pub fn utterances(&self) -> Result<(Vec<LabeledClip>, Vec<String>)> {
        let cfg = self.cfg;
        let clip = self.load_source(cfg.training.target_sample_rate_hz)?;
        let mut warnings = Vec::new();
        let turns = diarize(&clip, self.reg.diarizer(self.id(AdapterRole::Diarization)?)?.as_ref())?;
        if let Some(w) = multi_speaker_warning(&turns, clip.duration_s()) {
            warnings.push(w);
        }
        let segs = transcribe(&clip, &cfg.asr, self.reg.asr(self.id(AdapterRole::Asr)?)?.as_ref())?;
        let sliced = slice_by_segments(&clip, &segs)?;
        let q = &cfg.quality;
        let mut out = Vec::new();
        for (k, (utt, text)) in sliced.into_iter().enumerate() {
            let id = make_clip_id(clip.source_id(), k);
            let d = utt.duration_s();
            if d < q.min_duration_s || d > q.max_duration_s {
                warnings.push(format!(
                    "dropped {id}: {d:.2} s outside [{}, {}] s",
                    q.min_duration_s, q.max_duration_s
                ));
                continue;
            }
            let mut e = CorpusEntry::new(id, text);
            e.locale = Some(cfg.output.locale.clone());
            out.push((e, utt));
        }
        Ok((out, warnings))
    }

    /// Writes the LJ training set and the trainer config beside it.
    pub fn write_training_set(&self, items: &[(CorpusEntry, AudioClip)], root: &Path) -> Result<Vec<String>> {
        self.write_dataset(items, root, OutputFormat::Lj)?;
        let clips: Vec<AudioClip> = items.iter().map(|(_, c)| c.clone()).collect();
        let warnings = validate_training_data(&clips, &self.cfg.training)
            .into_iter()
            .map(|w| w.to_string())
            .collect();
        // The trainer reads `trainset_dir` relative to the dataset root.
        write_training_config(
            &self.cfg.training,
            &self.cfg.conversion.experiment,
            Path::new("wavs"),
            &root.join(TRAINER_CONFIG_FILE),
        )?;
        Ok(warnings)
    }

    /// Converts every clip of the configured input corpus.
    pub fn convert_corpus(&self) -> Result<Vec<(CorpusEntry, AudioClip)>> {
        let c = &self.cfg.conversion;
        let (Some(model), Some(index), Some(input)) = (&c.model_ref, &c.index_ref, &c.input_corpus) else {
            return Err(Error::Config(
                "conversion needs model_ref, index_ref and input_corpus".into(),
            ));
        };
        let vc = self.reg.vc(self.id(AdapterRole::Vc)?)?;
        let (model_s, index_s) = (model.to_string_lossy(), index.to_string_lossy());
        vc.resolve(&model_s, &index_s)
            .map_err(|e| Error::Config(format!("voice model {}: {e}", model.display())))?;
        let corpus = read_dataset(input, detect_format(input)?)?;
        if let Some(w) = corpus.warnings.first() {
            return Err(Error::Integrity(format!("input corpus {}: {w}", input.display())));
        }
        let voice = fs::read(model).map(|b| sha256_hex(&b)).unwrap_or_else(|_| model_s.to_string());
        let client_id = make_client_id(&voice);
        let params = c.params();
        let entries: Vec<&CorpusEntry> = corpus.entries().collect();
        let converted: Vec<Result<(CorpusEntry, AudioClip)>> = par_map(&entries, self.workers(), |e| {
            let clip = load_entry_audio(input, e, self.transcoder.as_ref())?;
            let out = convert_voice(&clip, &model_s, &index_s, &params, vc.as_ref())?;
            let mut n = CorpusEntry::new(e.clip_id.clone(), e.sentence.clone());
            n.client_id = client_id.clone();
            n.locale = Some(self.cfg.output.locale.clone());
            n.segment = e.segment.clone();
            Ok((n, out))
        });
        converted.into_iter().collect()
    }

    /// Transcribe and slice the source into an LJ training set. Without a
    /// trained model, that set (plus trainer config) is the output; with
    /// one, the input corpus is converted and packaged instead.
    pub fn run_methodology_2(&self) -> Result<RunSummary> {
        if self.cfg.methodology != Methodology::RvcConvert {
            return Err(Error::Config("methodology 2 needs methodology = \"rvc_convert\"".into()));
        }
        if self.opts.dry_run {
            return Ok(self.dry());
        }
        let cfg = self.cfg;
        let mut summary = RunSummary::new(cfg);
        summary.plan = self.plan();
        let (utterances, warnings) = self.utterances()?;
        summary.warnings = warnings;
        summary.clips_in = utterances.len();
        let rate = cfg.training.target_sample_rate_hz;

        let Some(model) = &cfg.conversion.model_ref else {
            let root = &cfg.output.root;
            let w = self.write_training_set(&utterances, root)?;
            summary.warnings.extend(w);
            summary.entries_written = utterances.len();
            let written: Vec<CorpusEntry> = utterances.iter().map(|(e, _)| e.clone()).collect();
            let (mut report, pairs) = self.verify_dataset(root, OutputFormat::Lj, rate, &written, None)?;
            self.label_cer(&mut report, &pairs)?;
            report.write(&root.join(REPORT_FILE_NAME))?;
            summary.quality = report;
            summary.next_step = Some(format!(
                "train a voice model on {} using {}, then set conversion.model_ref, conversion.index_ref and conversion.input_corpus and run again",
                root.display(),
                root.join(TRAINER_CONFIG_FILE).display()
            ));
            return self.finish(summary);
        };

        let training_root = cfg.work_dir().join("training");
        let w = self.write_training_set(&utterances, &training_root)?;
        summary.warnings.extend(w);
        let converted = self.convert_corpus()?;
        let root = &cfg.output.root;
        self.write_dataset(&converted, root, cfg.output.format)?;
        summary.entries_written = converted.len();
        let vc_rate = self.reg.vc(self.id(AdapterRole::Vc)?)?.native_rate_hz();
        let written: Vec<CorpusEntry> = converted.into_iter().map(|(e, _)| e).collect();
        let (report, _) = self.verify_dataset(root, cfg.output.format, vc_rate, &written, None)?;
        summary.quality = report;
        summary.warnings.push(format!("converted with {}", model.display()));
        self.finish(summary)
    }

    /// Re-transcribes each training clip and records the mean CER against its label.
    fn label_cer(&self, report: &mut QualityReport, pairs: &[(CorpusEntry, AudioClip)]) -> Result<()> {
        let asr = self.reg.asr(self.id(AdapterRole::Asr)?)?;
        let cers: Vec<Result<f64>> = par_map(pairs, self.workers(), |(e, clip)| {
            let segs = transcribe(clip, &self.cfg.asr, asr.as_ref())?;
            let hyp = segs.iter().map(|s| s.text.as_str()).collect::<Vec<_>>().join(" ");
            character_error_rate(&e.sentence, &hyp)
        });
        let cers: Vec<f64> = cers.into_iter().collect::<Result<_>>()?;
        if !cers.is_empty() {
            report.set_metric("label_cer_mean", cers.iter().sum::<f64>() / cers.len() as f64);
        }
        Ok(())
    }

    /// `prep` subcommand: writes segments (or utterances with their text)
    /// as WAV files under `<work_dir>/segments`.
    pub fn prep(&self) -> Result<PathBuf> {
        let dir = self.cfg.work_dir().join("segments");
        let items: Vec<(String, AudioClip, Option<String>)> = match self.cfg.methodology {
            Methodology::BarkPrompt => self
                .segments()?
                .into_iter()
                .enumerate()
                .map(|(k, c)| (make_clip_id(c.source_id(), k), c, None))
                .collect(),
            Methodology::RvcConvert => self
                .utterances()?
                .0
                .into_iter()
                .map(|(e, c)| (e.clip_id, c, Some(e.sentence)))
                .collect(),
        };
        if dir.is_dir() {
            fs::remove_dir_all(&dir)?;
        }
        fs::create_dir_all(&dir)?;
        let mut listing = String::new();
        for (id, clip, text) in &items {
            fs::write(dir.join(format!("{id}.wav")), wav::encode_pcm16(clip.samples(), clip.sample_rate_hz()))?;
            listing.push_str(&format!("{id}.wav|{}|{:.3}\n", text.as_deref().unwrap_or(""), clip.duration_s()));
        }
        fs::write(dir.join("segments.txt"), listing)?;
        Ok(dir)
    }

    /// Sample rate the packaged clips are expected to have.
    pub fn output_rate(&self) -> Result<u32> {
        Ok(match self.cfg.methodology {
            Methodology::BarkPrompt => self.reg.tts(self.id(AdapterRole::Tts)?)?.native_rate_hz(),
            Methodology::RvcConvert if self.cfg.conversion.model_ref.is_some() => {
                self.reg.vc(self.id(AdapterRole::Vc)?)?.native_rate_hz()
            }
            Methodology::RvcConvert => self.cfg.training.target_sample_rate_hz,
        })
    }

    /// `validate` subcommand: re-checks an existing dataset (the configured
    /// output root unless `root` is given) and rewrites its report.
    pub fn validate_output(&self, root: Option<&Path>) -> Result<(LoadedCorpus, QualityReport)> {
        let root = root.unwrap_or(&self.cfg.output.root);
        let constraints = self.cfg.clip_constraints(self.output_rate()?);
        let (corpus, report, _) = validate_dataset(root, None, &constraints, self.transcoder.as_ref(), self.workers())?;
        report.write(&root.join(REPORT_FILE_NAME))?;
        Ok((corpus, report))
    }

    /// `train-config` subcommand: the trainer config alone, into the output root.
    pub fn emit_training_config(&self) -> Result<PathBuf> {
        let out = self.cfg.output.root.join(TRAINER_CONFIG_FILE);
        write_training_config(&self.cfg.training, &self.cfg.conversion.experiment, Path::new("wavs"), &out)?;
        Ok(out)
    }

    /// `convert` subcommand: convert and package without rebuilding the training set.
    pub fn convert_and_package(&self) -> Result<RunSummary> {
        let mut summary = RunSummary::new(self.cfg);
        let converted = self.convert_corpus()?;
        let root = &self.cfg.output.root;
        self.write_dataset(&converted, root, self.cfg.output.format)?;
        summary.entries_written = converted.len();
        let rate = self.reg.vc(self.id(AdapterRole::Vc)?)?.native_rate_hz();
        let written: Vec<CorpusEntry> = converted.into_iter().map(|(e, _)| e).collect();
        summary.quality = self.verify_dataset(root, self.cfg.output.format, rate, &written, None)?.0;
        self.finish(summary)
    }
}

/// Validates `cfg` against `reg` and runs methodology 1.
pub fn run_methodology_1(cfg: &PipelineConfig, reg: &AdapterRegistry, opts: RunOptions) -> Result<RunSummary> {
    Pipeline::new(cfg, reg, opts)?.run_methodology_1()
}

/// Validates `cfg` against `reg` and runs methodology 2.
pub fn run_methodology_2(cfg: &PipelineConfig, reg: &AdapterRegistry, opts: RunOptions) -> Result<RunSummary> {
    Pipeline::new(cfg, reg, opts)?.run_methodology_2()
}
