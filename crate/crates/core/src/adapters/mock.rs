//! Deterministic stand-ins for every adapter role.
//!
//! None of these model anything real. They produce outputs with the right
//! shapes, rates and durations, and identical inputs (plus seed) always give
//! bit-identical outputs.

mod mp3;

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::*;
use crate::audio::{downmix_mean, resample_linear};
use crate::wav;

/// Container format written by [`MockMedia`].
pub const MOCK_MEDIA_EXT: &str = "vfmock";
const MOCK_MEDIA_MAGIC: &str = "VFMOCK1";

/// 64-bit FNV-1a.
pub(crate) fn fnv1a(seed: u64, bytes: &[u8]) -> u64 {
    let mut h = 0xcbf2_9ce4_8422_2325u64 ^ seed;
    for b in bytes {
        h ^= *b as u64;
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    h
}

fn hash_samples(seed: u64, samples: &[f32]) -> u64 {
    let mut h = 0xcbf2_9ce4_8422_2325u64 ^ seed;
    for s in samples {
        for b in wav::quantize(*s).to_le_bytes() {
            h ^= b as u64;
            h = h.wrapping_mul(0x0000_0100_0000_01b3);
        }
    }
    h
}

/// Raw speech-like samples: voiced bursts of 1.5 to 5 s separated by 0.3 to
/// 0.7 s of digital silence.
fn speech_like_samples(duration_s: f64, rate: u32, seed: u64) -> Vec<f32> {
    let n = (duration_s * rate as f64).round().max(0.0) as usize;
    let mut out = vec![0.0f32; n];
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let f0: f64 = rng.random_range(95.0..220.0);
    let mut pos = 0usize;
    while pos < n {
        let burst = (rng.random_range(1.5..5.0) * rate as f64) as usize;
        let end = (pos + burst).min(n);
        let syllable = (0.18 * rate as f64) as usize;
        let mut phase = 0.0f64;
        for (k, s) in out[pos..end].iter_mut().enumerate() {
            let t = k as f64 / rate as f64;
            let pitch = f0 * (1.0 + 0.08 * (2.0 * std::f64::consts::PI * 0.7 * t).sin());
            phase += 2.0 * std::f64::consts::PI * pitch / rate as f64;
            let env = 0.25 + 0.2 * ((k % syllable.max(1)) as f64 / syllable.max(1) as f64 * std::f64::consts::PI).sin();
            let v = 0.55 * phase.sin() + 0.3 * (2.0 * phase).sin() + 0.15 * (3.0 * phase).sin();
            // Keep voiced samples clear of the silence threshold.
            let v = if v.abs() < 0.01 { 0.01f64.copysign(v) } else { v };
            *s = (env * v) as f32;
        }
        pos = end + (rng.random_range(0.3..0.7) * rate as f64) as usize;
    }
    out
}

/// A mono speech-like clip with source id `mock-<seed>`.
pub fn speech_like(duration_s: f64, sample_rate_hz: u32, seed: u64) -> AudioClip {
    AudioClip::new(
        speech_like_samples(duration_s, sample_rate_hz, seed),
        sample_rate_hz,
        format!("mock-{seed}"),
    )
    .expect("generated samples are in range")
}

/// Descriptor for a synthetic recording, stored as a small text file.
#[derive(Debug, Clone, PartialEq)]
pub struct MockMedia {
    pub duration_s: f64,
    pub sample_rate_hz: u32,
    /// 0 models a container without an audio stream.
    pub channels: u16,
    pub seed: u64,
}

impl MockMedia {
    pub fn speech(duration_s: f64, sample_rate_hz: u32, channels: u16, seed: u64) -> Self {
        Self {
            duration_s,
            sample_rate_hz,
            channels,
            seed,
        }
    }

    pub fn to_text(&self) -> String {
        format!(
            "{MOCK_MEDIA_MAGIC}\nduration_s={}\nsample_rate_hz={}\nchannels={}\nseed={}\n",
            self.duration_s, self.sample_rate_hz, self.channels, self.seed
        )
    }

    pub fn write(&self, path: &Path) -> std::io::Result<()> {
        fs::write(path, self.to_text())
    }

    pub fn parse(text: &str) -> AdapterResult<Self> {
        let mut lines = text.lines();
        if lines.next() != Some(MOCK_MEDIA_MAGIC) {
            return Err(AdapterError::new("not a mock media file"));
        }
        let mut kv = BTreeMap::new();
        for l in lines.filter(|l| !l.trim().is_empty()) {
            let (k, v) = l.split_once('=').ok_or_else(|| AdapterError::new(format!("bad line {l:?}")))?;
            kv.insert(k.trim(), v.trim());
        }
        let get = |k: &str| kv.get(k).copied().ok_or_else(|| AdapterError::new(format!("missing {k}")));
        let bad = |k: &str| AdapterError::new(format!("bad {k}"));
        let m = Self {
            duration_s: get("duration_s")?.parse().map_err(|_| bad("duration_s"))?,
            sample_rate_hz: get("sample_rate_hz")?.parse().map_err(|_| bad("sample_rate_hz"))?,
            channels: get("channels")?.parse().map_err(|_| bad("channels"))?,
            seed: get("seed")?.parse().map_err(|_| bad("seed"))?,
        };
        if !(m.duration_s.is_finite() && m.duration_s >= 0.0) || m.sample_rate_hz == 0 {
            return Err(AdapterError::new("mock media has invalid duration or rate"));
        }
        Ok(m)
    }

    fn render(&self) -> DecodedMedia {
        let base = speech_like_samples(self.duration_s, self.sample_rate_hz, self.seed);
        let channels = (0..self.channels)
            .map(|c| {
                let gain = 1.0 - 0.1 * c as f32;
                base.iter().map(|s| s * gain).collect()
            })
            .collect();
        DecodedMedia {
            sample_rate_hz: self.sample_rate_hz,
            channels,
        }
    }
}

/// Serves `mock://<name>?duration=..&rate=..&channels=..&seed=..` by writing a
/// [`MockMedia`] file. Missing query keys default to 60 s, 44.1 kHz stereo,
/// seed derived from the URI.
#[derive(Debug, Clone, Copy, Default)]
pub struct MockDownloader;

impl Downloader for MockDownloader {
    fn download(&self, uri: &str, dest: &Path) -> AdapterResult<String> {
        let rest = uri
            .strip_prefix("mock://")
            .ok_or_else(|| AdapterError::new(format!("mock downloader cannot fetch {uri:?}")))?;
        let mut media = MockMedia::speech(60.0, 44_100, 2, fnv1a(0, uri.as_bytes()));
        if let Some((_, query)) = rest.split_once('?') {
            for pair in query.split('&').filter(|p| !p.is_empty()) {
                let (k, v) = pair.split_once('=').unwrap_or((pair, ""));
                let bad = || AdapterError::new(format!("bad query value {pair:?}"));
                match k {
                    "duration" => media.duration_s = v.parse().map_err(|_| bad())?,
                    "rate" => media.sample_rate_hz = v.parse().map_err(|_| bad())?,
                    "channels" => media.channels = v.parse().map_err(|_| bad())?,
                    "seed" => media.seed = v.parse().map_err(|_| bad())?,
                    _ => return Err(AdapterError::new(format!("unknown query key {k:?}"))),
                }
            }
        }
        fs::write(dest, media.to_text())?;
        Ok(MOCK_MEDIA_EXT.into())
    }
}

/// Decodes [`MockMedia`] descriptors and real WAV files.
#[derive(Debug, Clone, Copy, Default)]
pub struct MockDecoder;

enum Loaded {
    Media(MockMedia),
    Wav(Vec<u8>),
}

fn load(path: &Path) -> AdapterResult<Loaded> {
    let bytes = fs::read(path)?;
    if wav::has_wav_magic(&bytes) {
        return Ok(Loaded::Wav(bytes));
    }
    let text = std::str::from_utf8(&bytes).map_err(|_| AdapterError::new("unrecognized container"))?;
    Ok(Loaded::Media(MockMedia::parse(text)?))
}

impl Decoder for MockDecoder {
    fn probe(&self, path: &Path) -> AdapterResult<MediaInfo> {
        match load(path)? {
            Loaded::Media(m) => Ok(MediaInfo {
                container_format: MOCK_MEDIA_EXT.into(),
                duration_s: m.duration_s,
            }),
            Loaded::Wav(_) => Ok(MediaInfo {
                container_format: "wav".into(),
                duration_s: wav::probe_duration(path).map_err(AdapterError::new)?,
            }),
        }
    }

    fn decode(&self, path: &Path) -> AdapterResult<DecodedMedia> {
        match load(path)? {
            Loaded::Media(m) => Ok(m.render()),
            Loaded::Wav(bytes) => {
                let w = wav::decode(&bytes).map_err(AdapterError::new)?;
                Ok(DecodedMedia {
                    sample_rate_hz: w.sample_rate_hz,
                    channels: w.channels,
                })
            }
        }
    }
}

/// Blends each sample with a 5-tap moving average; `strength` is the blend weight.
#[derive(Debug, Clone, Copy, Default)]
pub struct MockDenoiser;

fn moving_average(x: &[f32], radius: usize) -> Vec<f32> {
    let n = x.len();
    let mut prefix = vec![0.0f64; n + 1];
    for (i, v) in x.iter().enumerate() {
        prefix[i + 1] = prefix[i] + *v as f64;
    }
    (0..n)
        .map(|i| {
            let a = i.saturating_sub(radius);
            let b = (i + radius + 1).min(n);
            ((prefix[b] - prefix[a]) / (b - a) as f64) as f32
        })
        .collect()
}

impl Denoiser for MockDenoiser {
    fn denoise(&self, clip: &AudioClip, strength: f32) -> AdapterResult<AudioClip> {
        if strength == 0.0 {
            return Ok(clip.clone());
        }
        let smooth = moving_average(clip.samples(), 2);
        let out = clip
            .samples()
            .iter()
            .zip(&smooth)
            .map(|(x, s)| (1.0 - strength) * x + strength * s)
            .collect();
        clip.replace_samples(out, clip.sample_rate_hz())
            .map_err(|e| AdapterError::new(e.to_string()))
    }
}

/// Treats the leading `keep_fraction` of the input as the vocal stem.
#[derive(Debug, Clone)]
pub struct MockStems {
    pub keep_fraction: f64,
    pub models: Vec<StemModel>,
}

impl Default for MockStems {
    fn default() -> Self {
        Self {
            keep_fraction: 1.0,
            models: vec![StemModel::TwoStems, StemModel::FourStems, StemModel::FiveStems],
        }
    }
}

impl StemSeparator for MockStems {
    fn supports(&self, model: StemModel) -> bool {
        self.models.contains(&model)
    }

    fn vocals(&self, clip: &AudioClip, _model: StemModel) -> AdapterResult<AudioClip> {
        let keep = ((clip.len() as f64) * self.keep_fraction).round() as usize;
        Ok(clip.slice(0, keep.min(clip.len())))
    }
}

/// Codes are a salted FNV hash of each frame's PCM16 block, modulo the
/// codebook size.
#[derive(Debug, Clone)]
pub struct MockCodec {
    pub native_rate_hz: u32,
    pub codebook_count: usize,
    pub frame_rate_hz: f64,
    pub codebook_size: u32,
}

impl Default for MockCodec {
    fn default() -> Self {
        Self {
            native_rate_hz: crate::ingest::DEFAULT_PROMPT_RATE_HZ,
            codebook_count: 8,
            frame_rate_hz: crate::voiceprompt::DEFAULT_FRAME_RATE_HZ,
            codebook_size: crate::voiceprompt::DEFAULT_CODEBOOK_SIZE,
        }
    }
}

impl Codec for MockCodec {
    fn native_rate_hz(&self) -> u32 {
        self.native_rate_hz
    }
    fn codebook_count(&self) -> usize {
        self.codebook_count
    }
    fn frame_rate_hz(&self) -> f64 {
        self.frame_rate_hz
    }
    fn codebook_size(&self) -> u32 {
        self.codebook_size
    }

    fn encode(&self, clip: &AudioClip) -> AdapterResult<Vec<Vec<u32>>> {
        let hop = self.native_rate_hz as f64 / self.frame_rate_hz;
        let s = clip.samples();
        let frames = ((s.len() as f64 / hop).round() as usize).max(1);
        let bounds = |f: usize| ((f as f64 * hop).round() as usize).min(s.len());
        Ok((0..self.codebook_count)
            .map(|q| {
                (0..frames)
                    .map(|f| (hash_samples(q as u64 + 1, &s[bounds(f)..bounds(f + 1)]) % self.codebook_size as u64) as u32)
                    .collect()
            })
            .collect())
    }
}

/// 4-d frame features (RMS, zero-crossing rate, mean magnitude, peak) at a
/// fixed token rate, regardless of the input sample rate.
#[derive(Debug, Clone)]
pub struct MockSemanticEncoder {
    pub token_rate_hz: f64,
}

impl Default for MockSemanticEncoder {
    fn default() -> Self {
        Self { token_rate_hz: 50.0 }
    }
}

pub const MOCK_EMBEDDING_DIM: usize = 4;

impl SemanticEncoder for MockSemanticEncoder {
    fn embedding_dim(&self) -> usize {
        MOCK_EMBEDDING_DIM
    }
    fn token_rate_hz(&self) -> f64 {
        self.token_rate_hz
    }

    fn encode(&self, clip: &AudioClip) -> AdapterResult<Vec<Vec<f32>>> {
        let s = clip.samples();
        let hop = clip.sample_rate_hz() as f64 / self.token_rate_hz;
        let frames = ((s.len() as f64 / hop).round() as usize).max(1);
        let bounds = |f: usize| ((f as f64 * hop).round() as usize).min(s.len());
        Ok((0..frames)
            .map(|f| {
                let b = &s[bounds(f)..bounds(f + 1)];
                if b.is_empty() {
                    return vec![0.0; MOCK_EMBEDDING_DIM];
                }
                let n = b.len() as f32;
                let rms = (b.iter().map(|x| x * x).sum::<f32>() / n).sqrt();
                let zcr = b.windows(2).filter(|w| (w[0] < 0.0) != (w[1] < 0.0)).count() as f32 / n;
                let mean = b.iter().map(|x| x.abs()).sum::<f32>() / n;
                let peak = b.iter().fold(0.0f32, |m, x| m.max(x.abs()));
                vec![rms, zcr, mean, peak]
            })
            .collect())
    }
}

/// Silent frames map to token 0; everything else hashes into `1..vocab_size`.
#[derive(Debug, Clone)]
pub struct MockTokenQuantizer {
    pub input_dim: usize,
    pub vocab_size: u32,
}

impl Default for MockTokenQuantizer {
    fn default() -> Self {
        Self {
            input_dim: MOCK_EMBEDDING_DIM,
            vocab_size: crate::voiceprompt::DEFAULT_SEMANTIC_VOCAB,
        }
    }
}

impl TokenQuantizer for MockTokenQuantizer {
    fn input_dim(&self) -> usize {
        self.input_dim
    }
    fn vocab_size(&self) -> u32 {
        self.vocab_size
    }

    fn quantize(&self, frames: &[Vec<f32>]) -> AdapterResult<Vec<u32>> {
        Ok(frames
            .iter()
            .map(|f| {
                if f.iter().all(|v| v.abs() < 1e-6) {
                    return 0;
                }
                let bytes: Vec<u8> = f.iter().flat_map(|v| ((v * 1000.0).round() as i32).to_le_bytes()).collect();
                1 + (fnv1a(0, &bytes) % (self.vocab_size as u64 - 1)) as u32
            })
            .collect())
    }
}

/// Prompted TTS stand-in: one second of voiced audio per started ten
/// characters, pitch taken from the prompt, texture from the seed.
///
/// `crash_after` terminates the process (exit status 137) when generation
/// number `crash_after + 1` starts, simulating a killed batch. Text containing
/// [`MockTts::FAIL_MARKER`] always fails, for exercising partial batches.
#[derive(Debug, Default)]
pub struct MockTts {
    pub crash_after: Option<usize>,
    calls: AtomicUsize,
}

impl MockTts {
    pub const FAIL_MARKER: &'static str = "[[fail]]";

    pub fn crashing_after(n: usize) -> Self {
        Self {
            crash_after: Some(n),
            calls: AtomicUsize::new(0),
        }
    }
}

fn prompt_hash(prompt: &SpeakerPrompt) -> u64 {
    let mut bytes: Vec<u8> = prompt.semantic_tokens().iter().flat_map(|t| t.to_le_bytes()).collect();
    for row in prompt.fine().rows() {
        bytes.extend(row.iter().flat_map(|t| t.to_le_bytes()));
    }
    fnv1a(0, &bytes)
}

impl TtsBackend for MockTts {
    fn native_rate_hz(&self) -> u32 {
        crate::ingest::DEFAULT_PROMPT_RATE_HZ
    }

    fn generate(&self, text: &str, prompt: &SpeakerPrompt, params: &GenerationParams) -> AdapterResult<Vec<f32>> {
        let call = self.calls.fetch_add(1, Ordering::SeqCst);
        if self.crash_after.is_some_and(|n| call >= n) {
            eprintln!("mock tts: simulated crash at generation {}", call + 1);
            std::process::exit(137);
        }
        if text.contains(Self::FAIL_MARKER) {
            return Err(AdapterError::new("mock tts: refused marked sentence"));
        }
        let rate = self.native_rate_hz();
        let seconds = text.chars().count().div_ceil(10).max(1);
        let n = seconds * rate as usize;
        let voice = prompt_hash(prompt);
        let seed = params.seed.unwrap_or(0) ^ fnv1a(voice, text.as_bytes());
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let f0 = 90.0 + (voice % 140) as f64;
        let syllable = (0.2 * rate as f64) as usize;
        let mut env = 0.3;
        let mut phase = 0.0f64;
        let mut out = Vec::with_capacity(n);
        for k in 0..n {
            if k % syllable == 0 {
                env = 0.3 + 0.15 * params.text_temp * (rng.random::<f64>() - 0.5);
            }
            let vibrato = 1.0 + 0.05 * (2.0 * std::f64::consts::PI * 5.0 * k as f64 / rate as f64).sin();
            phase += 2.0 * std::f64::consts::PI * f0 * vibrato / rate as f64;
            let tone = 0.6 * phase.sin() + 0.25 * (2.0 * phase).sin() + 0.15 * (3.0 * phase).sin();
            let noise = 0.02 * params.waveform_temp * (rng.random::<f64>() * 2.0 - 1.0);
            let mut v = env * tone + noise;
            if v.abs() < 0.002 {
                v = 0.002f64.copysign(v);
            }
            out.push(v as f32);
        }
        Ok(out)
    }
}

/// Voice conversion stand-in at 32 kHz. Resolves a model only if both files
/// exist; converting resamples to 32 kHz and blends with a moving average
/// whose radius and weight come from the conversion parameters.
#[derive(Debug, Clone, Default)]
pub struct MockVc {
    identity: bool,
}

impl MockVc {
    /// Returns its input unchanged.
    pub fn identity() -> Self {
        Self { identity: true }
    }
}

impl VcBackend for MockVc {
    fn native_rate_hz(&self) -> u32 {
        crate::ingest::DEFAULT_CONVERSION_RATE_HZ
    }

    fn resolve(&self, model_ref: &str, index_ref: &str) -> AdapterResult<()> {
        for (what, p) in [("model", model_ref), ("index", index_ref)] {
            if !Path::new(p).is_file() {
                return Err(AdapterError::new(format!("{what} file {p:?} not found")));
            }
        }
        Ok(())
    }

    fn convert(
        &self,
        clip: &AudioClip,
        model_ref: &str,
        _index_ref: &str,
        params: &ConversionParams,
    ) -> AdapterResult<AudioClip> {
        if self.identity {
            return Ok(clip.clone());
        }
        let rate = self.native_rate_hz();
        let x = resample_linear(clip.samples(), clip.sample_rate_hz(), rate);
        let timbre = fnv1a(0, &fs::read(model_ref)?);
        let gain = 0.9 + 0.1 * ((timbre % 1000) as f64 / 1000.0);
        let smooth = moving_average(&x, params.filter_radius as usize + 1);
        let w = params.index_ratio as f32;
        let out = x
            .iter()
            .zip(&smooth)
            .map(|(a, s)| (((1.0 - w) * a + w * s) as f64 * gain) as f32)
            .collect();
        AudioClip::from_clamped(out, rate, clip.source_id().to_string())
            .map_err(|e| AdapterError::new(e.to_string()))
    }
}

/// Energy-based segmentation with placeholder Devanagari text.
#[derive(Debug, Clone)]
pub struct MockAsr {
    pub frame_s: f64,
    pub rms_threshold: f32,
    /// Voiced runs separated by less than this are merged.
    pub min_pause_s: f64,
}

impl Default for MockAsr {
    fn default() -> Self {
        Self {
            frame_s: 0.02,
            rms_threshold: 1e-3,
            min_pause_s: 0.25,
        }
    }
}

const MOCK_WORDS: [&str; 16] = [
    "नमस्ते", "भारत", "भाषा", "आवाज़", "पानी", "किताब", "समय", "दुनिया", "घर", "बच्चे", "सुबह", "रात",
    "गाना", "रास्ता", "शहर", "मौसम",
];

impl Asr for MockAsr {
    fn transcribe(&self, clip: &AudioClip, _config: &AsrConfig) -> AdapterResult<Vec<TranscriptSegment>> {
        let rate = clip.sample_rate_hz() as f64;
        let hop = ((self.frame_s * rate).round() as usize).max(1);
        let s = clip.samples();
        let voiced: Vec<bool> = s
            .chunks(hop)
            .map(|c| (c.iter().map(|x| x * x).sum::<f32>() / c.len() as f32).sqrt() > self.rms_threshold)
            .collect();
        let mut runs: Vec<(usize, usize)> = Vec::new();
        let gap = (self.min_pause_s / self.frame_s).ceil() as usize;
        for (i, v) in voiced.iter().enumerate() {
            if !v {
                continue;
            }
            match runs.last_mut() {
                Some((_, end)) if i - *end <= gap => *end = i + 1,
                _ => runs.push((i, i + 1)),
            }
        }
        Ok(runs
            .into_iter()
            .map(|(a, b)| {
                let (start, end) = (a * hop, (b * hop).min(s.len()));
                let h = hash_samples(0, &s[start..end]);
                let dur = (end - start) as f64 / rate;
                let words = ((dur * 2.0).round() as usize).max(1);
                let text = (0..words)
                    .map(|k| MOCK_WORDS[((h >> (k % 16 * 4)) as usize + k) % MOCK_WORDS.len()])
                    .collect::<Vec<_>>()
                    .join(" ");
                TranscriptSegment {
                    start_s: start as f64 / rate,
                    end_s: end as f64 / rate,
                    text,
                }
            })
            .collect())
    }
}

/// Splits the clip into `speakers` equal turns labeled `S0`, `S1`, ...
#[derive(Debug, Clone)]
pub struct MockDiarizer {
    pub speakers: usize,
}

impl MockDiarizer {
    pub fn new(speakers: usize) -> Self {
        Self { speakers }
    }
}

impl Default for MockDiarizer {
    fn default() -> Self {
        Self::new(1)
    }
}

impl Diarizer for MockDiarizer {
    fn diarize(&self, clip: &AudioClip) -> AdapterResult<Vec<SpeakerTurn>> {
        let n = self.speakers.max(1);
        let d = clip.duration_s();
        Ok((0..n)
            .map(|i| SpeakerTurn {
                start_s: d * i as f64 / n as f64,
                end_s: d * (i + 1) as f64 / n as f64,
                speaker_label: format!("S{i}"),
            })
            .collect())
    }
}

/// Normalized autocorrelation at lags 1..=dim.
#[derive(Debug, Clone)]
pub struct MockSpeakerEmbedder {
    pub dim: usize,
}

impl Default for MockSpeakerEmbedder {
    fn default() -> Self {
        Self { dim: 16 }
    }
}

impl SpeakerEmbedder for MockSpeakerEmbedder {
    fn embed(&self, clip: &AudioClip) -> AdapterResult<Vec<f32>> {
        let s = clip.samples();
        let energy: f64 = s.iter().map(|x| (*x as f64).powi(2)).sum();
        if energy == 0.0 {
            return Ok(vec![0.0; self.dim]);
        }
        Ok((1..=self.dim)
            .map(|lag| {
                let r: f64 = s.iter().zip(s.iter().skip(lag)).map(|(a, b)| *a as f64 * *b as f64).sum();
                (r / energy) as f32
            })
            .collect())
    }
}

/// Real PCM16 WAV, plus the mock MP3 container (see the `mp3` submodule).
#[derive(Debug, Clone, Copy, Default)]
pub struct MockTranscoder;

impl Transcoder for MockTranscoder {
    fn encode(&self, samples: &[f32], sample_rate_hz: u32, format: AudioFormat) -> AdapterResult<Vec<u8>> {
        match format {
            AudioFormat::WavPcm16 => Ok(wav::encode_pcm16(samples, sample_rate_hz)),
            AudioFormat::Mp3 => {
                let pcm: Vec<i16> = samples.iter().map(|s| wav::quantize(*s)).collect();
                mp3::encode(&pcm, sample_rate_hz).map_err(AdapterError::new)
            }
        }
    }

    fn decode(&self, payload: &[u8], format: AudioFormat) -> AdapterResult<(Vec<f32>, u32)> {
        match format {
            AudioFormat::WavPcm16 => {
                let w = wav::decode(payload).map_err(AdapterError::new)?;
                Ok((downmix_mean(&w.channels), w.sample_rate_hz))
            }
            AudioFormat::Mp3 => {
                let (pcm, rate) = mp3::decode(payload).map_err(AdapterError::new)?;
                Ok((pcm.into_iter().map(wav::dequantize).collect(), rate))
            }
        }
    }
}

/// Registers every mock under id `mock`, plus the variants tests rely on:
/// `mock-crash-after-1` (tts), `mock-identity` (vc), `mock-two-speakers`
/// (diarization).
pub fn register_all(reg: &mut AdapterRegistry) -> Result<()> {
    use AdapterRole as R;
    let d = AdapterDescriptor::new;
    let codec = MockCodec::default();
    reg.register(d(R::Downloader, "mock"), Adapter::Downloader(Arc::new(MockDownloader)))?;
    reg.register(d(R::Decoder, "mock"), Adapter::Decoder(Arc::new(MockDecoder)))?;
    reg.register(d(R::Denoise, "mock"), Adapter::Denoise(Arc::new(MockDenoiser)))?;
    reg.register(d(R::Stems, "mock"), Adapter::Stems(Arc::new(MockStems::default())))?;
    reg.register(
        d(R::Codec, "mock")
            .native_rate(codec.native_rate_hz)
            .meta("codebook_count", codec.codebook_count)
            .meta("frame_rate", codec.frame_rate_hz)
            .meta("codebook_size", codec.codebook_size),
        Adapter::Codec(Arc::new(codec)),
    )?;
    reg.register(
        d(R::SemanticEncoder, "mock").meta("token_rate", 50).meta("embedding_dim", MOCK_EMBEDDING_DIM),
        Adapter::SemanticEncoder(Arc::new(MockSemanticEncoder::default())),
    )?;
    reg.register(
        d(R::TokenQuantizer, "mock").meta("vocab_size", crate::voiceprompt::DEFAULT_SEMANTIC_VOCAB),
        Adapter::TokenQuantizer(Arc::new(MockTokenQuantizer::default())),
    )?;
    let tts_rate = crate::ingest::DEFAULT_PROMPT_RATE_HZ;
    reg.register(d(R::Tts, "mock").native_rate(tts_rate), Adapter::Tts(Arc::new(MockTts::default())))?;
    reg.register(
        d(R::Tts, "mock-crash-after-1").native_rate(tts_rate).single_threaded(),
        Adapter::Tts(Arc::new(MockTts::crashing_after(1))),
    )?;
    let vc_rate = crate::ingest::DEFAULT_CONVERSION_RATE_HZ;
    reg.register(d(R::Vc, "mock").native_rate(vc_rate), Adapter::Vc(Arc::new(MockVc::default())))?;
    reg.register(d(R::Vc, "mock-identity").native_rate(vc_rate), Adapter::Vc(Arc::new(MockVc::identity())))?;
    reg.register(d(R::Asr, "mock"), Adapter::Asr(Arc::new(MockAsr::default())))?;
    reg.register(d(R::Diarization, "mock"), Adapter::Diarization(Arc::new(MockDiarizer::new(1))))?;
    reg.register(
        d(R::Diarization, "mock-two-speakers"),
        Adapter::Diarization(Arc::new(MockDiarizer::new(2))),
    )?;
    reg.register(
        d(R::SpeakerEmbedding, "mock").meta("dim", 16),
        Adapter::SpeakerEmbedding(Arc::new(MockSpeakerEmbedder::default())),
    )?;
    reg.register(d(R::Transcode, "mock"), Adapter::Transcode(Arc::new(MockTranscoder)))?;
    Ok(())
}
