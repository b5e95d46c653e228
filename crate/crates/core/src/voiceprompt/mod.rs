//! Speaker prompts: codec codebooks (fine and coarse tiers) plus semantic
//! tokens, and their keyed-array archive format.
//!
//! A prompt is what makes a prompted TTS backend speak in the cloned voice.
//! The fine tier holds every codebook the codec emits; the coarse tier is the
//! first `n_coarse` rows of it. That row-prefix relationship is enforced by
//! construction: [`build_prompt`] derives coarse from fine and never accepts
//! one from the caller.

pub mod npy;

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use crate::adapters::{Codec, SemanticEncoder, TokenQuantizer};
use crate::audio::AudioClip;
use crate::error::{AdapterError, Error, Result};

use npy::{NpyArray, NpyData};

pub const SEMANTIC_KEY: &str = "semantic_prompt";
pub const COARSE_KEY: &str = "coarse_prompt";
pub const FINE_KEY: &str = "fine_prompt";

// Extra members. The TTS backend only reads the three keys above and ignores these.
const SEMANTIC_VOCAB_KEY: &str = "semantic_vocab_size";
const CODEBOOK_SIZE_KEY: &str = "codebook_size";
const FRAME_RATE_KEY: &str = "frame_rate_hz";
const SOURCE_ID_KEY: &str = "source_id";

/// Assumed when an archive written by another tool lacks our metadata.
pub const DEFAULT_SEMANTIC_VOCAB: u32 = 10_000;
pub const DEFAULT_CODEBOOK_SIZE: u32 = 1024;
pub const DEFAULT_FRAME_RATE_HZ: f64 = 75.0;
pub const DEFAULT_N_COARSE: usize = 2;

/// `[n_codebooks × n_frames]` codes from a residual-quantizing codec.
#[derive(Debug, Clone, PartialEq)]
pub struct CodebookMatrix {
    rows: Vec<Vec<u32>>,
    frame_rate_hz: f64,
    codebook_size: u32,
}

impl CodebookMatrix {
    pub fn new(rows: Vec<Vec<u32>>, frame_rate_hz: f64, codebook_size: u32) -> Result<Self> {
        if rows.is_empty() {
            return Err(Error::Validation("codebook matrix has no rows".into()));
        }
        if codebook_size == 0 || !(frame_rate_hz.is_finite() && frame_rate_hz > 0.0) {
            return Err(Error::Validation(format!(
                "invalid codebook size {codebook_size} or frame rate {frame_rate_hz}"
            )));
        }
        let n_frames = rows[0].len();
        if let Some(r) = rows.iter().position(|r| r.len() != n_frames) {
            return Err(Error::Validation(format!(
                "codebook row {r} has {} frames, row 0 has {n_frames}",
                rows[r].len()
            )));
        }
        for (r, row) in rows.iter().enumerate() {
            if let Some(f) = row.iter().position(|&c| c >= codebook_size) {
                return Err(Error::Validation(format!(
                    "code {} at row {r} frame {f} is outside [0, {codebook_size})",
                    row[f]
                )));
            }
        }
        Ok(Self {
            rows,
            frame_rate_hz,
            codebook_size,
        })
    }

    pub fn rows(&self) -> &[Vec<u32>] {
        &self.rows
    }

    pub fn n_codebooks(&self) -> usize {
        self.rows.len()
    }

    pub fn n_frames(&self) -> usize {
        self.rows[0].len()
    }

    pub fn frame_rate_hz(&self) -> f64 {
        self.frame_rate_hz
    }

    pub fn codebook_size(&self) -> u32 {
        self.codebook_size
    }

    /// The first `n` rows.
    pub fn leading_rows(&self, n: usize) -> Result<CodebookMatrix> {
        if n == 0 || n > self.rows.len() {
            return Err(Error::Validation(format!(
                "cannot take {n} rows of a {}-row matrix",
                self.rows.len()
            )));
        }
        Ok(CodebookMatrix {
            rows: self.rows[..n].to_vec(),
            frame_rate_hz: self.frame_rate_hz,
            codebook_size: self.codebook_size,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SemanticEncoderSpec {
    pub vocab_size: u32,
    pub token_rate_hz: f64,
}

/// Semantic token sequence with the vocabulary it was drawn from.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SemanticTokens {
    pub tokens: Vec<u32>,
    pub vocab_size: u32,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SpeakerPrompt {
    semantic: SemanticTokens,
    coarse: CodebookMatrix,
    fine: CodebookMatrix,
    source_id: String,
}

impl SpeakerPrompt {
    pub fn semantic_tokens(&self) -> &[u32] {
        &self.semantic.tokens
    }

    pub fn semantic_vocab_size(&self) -> u32 {
        self.semantic.vocab_size
    }

    pub fn coarse(&self) -> &CodebookMatrix {
        &self.coarse
    }

    pub fn fine(&self) -> &CodebookMatrix {
        &self.fine
    }

    pub fn n_coarse(&self) -> usize {
        self.coarse.n_codebooks()
    }

    pub fn source_id(&self) -> &str {
        &self.source_id
    }

    /// Content hash, used as the prompt's identity in journals and manifests.
    pub fn id(&self) -> String {
        let bytes = save_prompt_bytes(self).expect("valid prompt serializes");
        crate::ingest::sha256_hex(&bytes)[..16].to_string()
    }
}

/// Runs the codec over `clip`; returns `(fine, coarse)`.
pub fn extract_codebooks(
    clip: &AudioClip,
    codec: &dyn Codec,
    n_coarse: usize,
) -> Result<(CodebookMatrix, CodebookMatrix)> {
    if clip.sample_rate_hz() != codec.native_rate_hz() {
        return Err(Error::Precondition(format!(
            "clip is {} Hz, codec expects {} Hz",
            clip.sample_rate_hz(),
            codec.native_rate_hz()
        )));
    }
    let total = codec.codebook_count();
    if n_coarse == 0 || n_coarse >= total {
        return Err(Error::Precondition(format!(
            "n_coarse must be in [1, {total}), got {n_coarse}"
        )));
    }
    if clip.is_empty() {
        return Err(Error::Precondition("cannot extract codebooks from an empty clip".into()));
    }
    let context = clip.source_id().to_string();
    let rows = codec
        .encode(clip)
        .map_err(|e| Error::stage("extract_codebooks", context.clone(), e))?;
    if rows.len() != total {
        return Err(Error::stage(
            "extract_codebooks",
            context,
            AdapterError::new(format!("codec returned {} codebooks, declared {total}", rows.len())),
        ));
    }
    let fine = CodebookMatrix::new(rows, codec.frame_rate_hz(), codec.codebook_size())
        .map_err(|e| Error::stage("extract_codebooks", context.clone(), AdapterError::new(e.to_string())))?;
    let expected = (clip.duration_s() * codec.frame_rate_hz()).round();
    if (fine.n_frames() as f64 - expected).abs() > 1.0 {
        return Err(Error::stage(
            "extract_codebooks",
            context,
            AdapterError::new(format!(
                "codec produced {} frames, expected {expected} ± 1",
                fine.n_frames()
            )),
        ));
    }
    let coarse = fine.leading_rows(n_coarse)?;
    Ok((fine, coarse))
}

pub fn extract_semantic_tokens(
    clip: &AudioClip,
    encoder: &dyn SemanticEncoder,
    quantizer: &dyn TokenQuantizer,
) -> Result<SemanticTokens> {
    if clip.is_empty() {
        return Err(Error::Precondition("cannot extract semantic tokens from an empty clip".into()));
    }
    if encoder.embedding_dim() != quantizer.input_dim() {
        return Err(Error::Config(format!(
            "semantic encoder emits {}-d embeddings but quantizer expects {}-d",
            encoder.embedding_dim(),
            quantizer.input_dim()
        )));
    }
    let context = clip.source_id().to_string();
    let frames = encoder
        .encode(clip)
        .map_err(|e| Error::stage("semantic_encode", context.clone(), e))?;
    if let Some(bad) = frames.iter().find(|f| f.len() != encoder.embedding_dim()) {
        return Err(Error::stage(
            "semantic_encode",
            context,
            AdapterError::new(format!("frame of dimension {}", bad.len())),
        ));
    }
    let tokens = quantizer
        .quantize(&frames)
        .map_err(|e| Error::stage("semantic_quantize", context.clone(), e))?;
    let vocab_size = quantizer.vocab_size();
    if let Some(t) = tokens.iter().find(|&&t| t >= vocab_size) {
        return Err(Error::stage(
            "semantic_quantize",
            context,
            AdapterError::new(format!("token {t} outside vocabulary of {vocab_size}")),
        ));
    }
    Ok(SemanticTokens { tokens, vocab_size })
}

pub fn build_prompt(
    semantic: SemanticTokens,
    fine: CodebookMatrix,
    n_coarse: usize,
    source_id: impl Into<String>,
) -> Result<SpeakerPrompt> {
    if semantic.tokens.is_empty() {
        return Err(Error::Validation("semantic token sequence is empty".into()));
    }
    if semantic.vocab_size == 0 {
        return Err(Error::Validation("semantic vocabulary is empty".into()));
    }
    if let Some(t) = semantic.tokens.iter().find(|&&t| t >= semantic.vocab_size) {
        return Err(Error::Validation(format!(
            "semantic token {t} outside vocabulary of {}",
            semantic.vocab_size
        )));
    }
    // Re-validate fine: a matrix may have been assembled elsewhere.
    let fine = CodebookMatrix::new(fine.rows, fine.frame_rate_hz, fine.codebook_size)?;
    if n_coarse == 0 || n_coarse >= fine.n_codebooks() {
        return Err(Error::Validation(format!(
            "n_coarse must be in [1, {}), got {n_coarse}",
            fine.n_codebooks()
        )));
    }
    let coarse = fine.leading_rows(n_coarse)?;
    Ok(SpeakerPrompt {
        semantic,
        coarse,
        fine,
        source_id: source_id.into(),
    })
}

fn matrix_array(m: &CodebookMatrix) -> NpyArray {
    NpyArray::int(
        vec![m.n_codebooks(), m.n_frames()],
        m.rows.iter().flatten().map(|&c| c as i64).collect(),
    )
}

pub fn save_prompt_bytes(prompt: &SpeakerPrompt) -> Result<Vec<u8>> {
    let mut arrays = BTreeMap::new();
    arrays.insert(
        SEMANTIC_KEY.to_string(),
        NpyArray::int(
            vec![prompt.semantic.tokens.len()],
            prompt.semantic.tokens.iter().map(|&t| t as i64).collect(),
        ),
    );
    arrays.insert(COARSE_KEY.to_string(), matrix_array(&prompt.coarse));
    arrays.insert(FINE_KEY.to_string(), matrix_array(&prompt.fine));
    arrays.insert(
        SEMANTIC_VOCAB_KEY.to_string(),
        NpyArray::scalar_int(prompt.semantic.vocab_size as i64),
    );
    arrays.insert(
        CODEBOOK_SIZE_KEY.to_string(),
        NpyArray::scalar_int(prompt.fine.codebook_size as i64),
    );
    arrays.insert(FRAME_RATE_KEY.to_string(), NpyArray::scalar_float(prompt.fine.frame_rate_hz));
    arrays.insert(SOURCE_ID_KEY.to_string(), NpyArray::scalar_str(&prompt.source_id));
    npy::write_npz(&arrays).map_err(Error::Format)
}

/// Writes the prompt as an `.npz` archive (`semantic_prompt`, `coarse_prompt`,
/// `fine_prompt`, all int64) via a temporary file and rename.
pub fn save_prompt(prompt: &SpeakerPrompt, path: &Path) -> Result<()> {
    let bytes = save_prompt_bytes(prompt)?;
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir)?;
    }
    let tmp = path.with_extension("npz.tmp");
    fs::write(&tmp, bytes)?;
    fs::rename(&tmp, path)?;
    Ok(())
}

pub fn load_prompt(path: &Path) -> Result<SpeakerPrompt> {
    let bytes = fs::read(path)?;
    load_prompt_bytes(&bytes)
}

fn int_array<'a>(arrays: &'a BTreeMap<String, NpyArray>, key: &str) -> Result<(&'a [usize], &'a [i64])> {
    let arr = arrays
        .get(key)
        .ok_or_else(|| Error::Format(format!("archive is missing `{key}`")))?;
    match &arr.data {
        NpyData::Int(v) => Ok((&arr.shape, v)),
        _ => Err(Error::Format(format!(
            "`{key}` has {} dtype, integer dtype required",
            arr.dtype_name()
        ))),
    }
}

fn to_u32(key: &str, v: &[i64]) -> Result<Vec<u32>> {
    v.iter()
        .map(|&x| u32::try_from(x).map_err(|_| Error::Format(format!("`{key}` holds out-of-range value {x}"))))
        .collect()
}

fn matrix_from(key: &str, shape: &[usize], data: &[i64], frame_rate_hz: f64, codebook_size: u32) -> Result<CodebookMatrix> {
    let [rows, cols] = shape else {
        return Err(Error::Format(format!("`{key}` must be 2-D, has shape {shape:?}")));
    };
    let flat = to_u32(key, data)?;
    let matrix_rows: Vec<Vec<u32>> = if *cols == 0 {
        vec![Vec::new(); *rows]
    } else {
        flat.chunks(*cols).map(<[u32]>::to_vec).collect()
    };
    CodebookMatrix::new(matrix_rows, frame_rate_hz, codebook_size).map_err(|e| Error::Format(format!("`{key}`: {e}")))
}

pub fn load_prompt_bytes(bytes: &[u8]) -> Result<SpeakerPrompt> {
    let arrays = npy::read_npz(bytes).map_err(Error::Format)?;
    let (sem_shape, sem) = int_array(&arrays, SEMANTIC_KEY)?;
    let (coarse_shape, coarse) = int_array(&arrays, COARSE_KEY)?;
    let (fine_shape, fine) = int_array(&arrays, FINE_KEY)?;
    if sem_shape.len() != 1 {
        return Err(Error::Format(format!("`{SEMANTIC_KEY}` must be 1-D, has shape {sem_shape:?}")));
    }
    let scalar_int = |key: &str, default: u32| -> Result<u32> {
        match arrays.get(key) {
            None => Ok(default),
            Some(_) => {
                let (_, v) = int_array(&arrays, key)?;
                let v = to_u32(key, v)?;
                v.first().copied().ok_or_else(|| Error::Format(format!("`{key}` is empty")))
            }
        }
    };
    let vocab_size = scalar_int(SEMANTIC_VOCAB_KEY, DEFAULT_SEMANTIC_VOCAB)?;
    let codebook_size = scalar_int(CODEBOOK_SIZE_KEY, DEFAULT_CODEBOOK_SIZE)?;
    let frame_rate_hz = match arrays.get(FRAME_RATE_KEY).map(|a| &a.data) {
        None => DEFAULT_FRAME_RATE_HZ,
        Some(NpyData::Float(v)) if !v.is_empty() => v[0],
        Some(_) => return Err(Error::Format(format!("`{FRAME_RATE_KEY}` must be a float scalar"))),
    };
    let source_id = match arrays.get(SOURCE_ID_KEY).map(|a| &a.data) {
        None => String::new(),
        Some(NpyData::Str(v)) if !v.is_empty() => v[0].clone(),
        Some(_) => return Err(Error::Format(format!("`{SOURCE_ID_KEY}` must be a string scalar"))),
    };

    let fine = matrix_from(FINE_KEY, fine_shape, fine, frame_rate_hz, codebook_size)?;
    let coarse = matrix_from(COARSE_KEY, coarse_shape, coarse, frame_rate_hz, codebook_size)?;
    let n_coarse = coarse.n_codebooks();
    let semantic = SemanticTokens {
        tokens: to_u32(SEMANTIC_KEY, sem)?,
        vocab_size,
    };
    let prompt = build_prompt(semantic, fine, n_coarse, source_id).map_err(|e| Error::Format(e.to_string()))?;
    if prompt.coarse != coarse {
        return Err(Error::Format(format!(
            "`{COARSE_KEY}` is not the leading {n_coarse} rows of `{FINE_KEY}`"
        )));
    }
    Ok(prompt)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::adapters::mock::{MockCodec, MockSemanticEncoder, MockTokenQuantizer};

    fn tone(duration_s: f64, rate: u32) -> AudioClip {
        let n = (duration_s * rate as f64).round() as usize;
        let s = (0..n).map(|i| 0.3 * (i as f32 * 0.05).sin()).collect();
        AudioClip::new(s, rate, "spk").unwrap()
    }

    fn sample_prompt() -> SpeakerPrompt {
        let fine = CodebookMatrix::new((0..8).map(|r| (0..5).map(|f| (r * 7 + f) as u32).collect()).collect(), 75.0, 1024).unwrap();
        build_prompt(
            SemanticTokens {
                tokens: vec![1, 2, 3],
                vocab_size: 10_000,
            },
            fine,
            2,
            "spk",
        )
        .unwrap()
    }

    #[test]
    fn codebooks_ten_seconds() {
        let (fine, coarse) = extract_codebooks(&tone(10.0, 24_000), &MockCodec::default(), 2).unwrap();
        assert_eq!((fine.n_codebooks(), fine.n_frames()), (8, 750));
        assert_eq!((coarse.n_codebooks(), coarse.n_frames()), (2, 750));
        assert_eq!(coarse.rows(), &fine.rows()[0..2]);
    }

    #[test]
    fn n_coarse_equal_total_rejected() {
        let err = extract_codebooks(&tone(1.0, 24_000), &MockCodec::default(), 8).unwrap_err();
        assert!(matches!(err, Error::Precondition(_)));
    }

    #[test]
    fn rate_mismatch_rejected() {
        let err = extract_codebooks(&tone(1.0, 16_000), &MockCodec::default(), 2).unwrap_err();
        assert!(matches!(err, Error::Precondition(_)));
    }

    #[test]
    fn semantic_fifty_per_second() {
        let toks =
            extract_semantic_tokens(&tone(10.0, 16_000), &MockSemanticEncoder::default(), &MockTokenQuantizer::default())
                .unwrap();
        assert_eq!(toks.tokens.len(), 500);
        assert!(toks.tokens.iter().all(|&t| t < toks.vocab_size));
    }

    #[test]
    fn silence_maps_to_token_zero() {
        let clip = AudioClip::silence(2.0, 16_000, "z").unwrap();
        let toks =
            extract_semantic_tokens(&clip, &MockSemanticEncoder::default(), &MockTokenQuantizer::default()).unwrap();
        assert_eq!(toks.tokens, vec![0; 100]);
    }

    #[test]
    fn semantic_empty_clip_rejected() {
        let clip = AudioClip::new(vec![], 16_000, "z").unwrap();
        let err =
            extract_semantic_tokens(&clip, &MockSemanticEncoder::default(), &MockTokenQuantizer::default()).unwrap_err();
        assert!(matches!(err, Error::Precondition(_)));
    }

    #[test]
    fn dimension_mismatch_is_config_error() {
        let q = MockTokenQuantizer {
            input_dim: 768,
            ..MockTokenQuantizer::default()
        };
        let err = extract_semantic_tokens(&tone(1.0, 16_000), &MockSemanticEncoder::default(), &q).unwrap_err();
        assert!(matches!(err, Error::Config(_)));
    }

    #[test]
    fn build_prompt_row_prefix() {
        let p = sample_prompt();
        assert_eq!(p.coarse().rows(), &p.fine().rows()[..2]);
        assert_eq!(p.coarse().n_frames(), p.fine().n_frames());
    }

    #[test]
    fn build_prompt_rejects_bad_inputs() {
        let fine = CodebookMatrix::new(vec![vec![1, 2]; 8], 75.0, 1024).unwrap();
        let empty = SemanticTokens {
            tokens: vec![],
            vocab_size: 10,
        };
        assert!(matches!(build_prompt(empty, fine.clone(), 2, "s"), Err(Error::Validation(_))));
        let over = CodebookMatrix {
            rows: vec![vec![1024, 0]; 8],
            frame_rate_hz: 75.0,
            codebook_size: 1024,
        };
        let sem = SemanticTokens {
            tokens: vec![1],
            vocab_size: 10,
        };
        assert!(matches!(build_prompt(sem, over, 2, "s"), Err(Error::Validation(_))));
        assert!(CodebookMatrix::new(vec![vec![1024]], 75.0, 1024).is_err());
    }

    #[test]
    fn save_load_identity() {
        let dir = tempfile::tempdir().unwrap();
        let p = sample_prompt();
        let path = dir.path().join("voice.npz");
        save_prompt(&p, &path).unwrap();
        assert_eq!(load_prompt(&path).unwrap(), p);
    }

    fn archive_with(mutate: impl FnOnce(&mut BTreeMap<String, NpyArray>)) -> Vec<u8> {
        let bytes = save_prompt_bytes(&sample_prompt()).unwrap();
        let mut arrays = npy::read_npz(&bytes).unwrap();
        mutate(&mut arrays);
        npy::write_npz(&arrays).unwrap()
    }

    #[test]
    fn missing_fine_names_key() {
        let bytes = archive_with(|a| {
            a.remove(FINE_KEY);
        });
        let err = load_prompt_bytes(&bytes).unwrap_err();
        assert!(matches!(err, Error::Format(_)));
        assert!(err.to_string().contains("fine_prompt"));
    }

    #[test]
    fn float_semantic_rejected() {
        let bytes = archive_with(|a| {
            a.insert(
                SEMANTIC_KEY.into(),
                NpyArray {
                    shape: vec![3],
                    data: NpyData::Float(vec![1.0, 2.0, 3.0]),
                },
            );
        });
        let err = load_prompt_bytes(&bytes).unwrap_err();
        assert!(err.to_string().contains("integer dtype"), "{err}");
    }

    #[test]
    fn inconsistent_coarse_rejected() {
        let bytes = archive_with(|a| {
            a.insert(COARSE_KEY.into(), NpyArray::int(vec![2, 5], vec![0; 10]));
        });
        assert!(matches!(load_prompt_bytes(&bytes), Err(Error::Format(_))));
    }

    #[test]
    fn corrupted_archive_rejected() {
        let mut bytes = save_prompt_bytes(&sample_prompt()).unwrap();
        bytes.truncate(bytes.len() / 2);
        assert!(matches!(load_prompt_bytes(&bytes), Err(Error::Format(_))));
    }

    #[test]
    fn foreign_archive_uses_defaults() {
        let bytes = archive_with(|a| {
            a.retain(|k, _| [SEMANTIC_KEY, COARSE_KEY, FINE_KEY].contains(&k.as_str()));
        });
        let p = load_prompt_bytes(&bytes).unwrap();
        assert_eq!(p.semantic_vocab_size(), DEFAULT_SEMANTIC_VOCAB);
        assert_eq!(p.fine().codebook_size(), DEFAULT_CODEBOOK_SIZE);
        assert_eq!(p.source_id(), "");
    }
}
