//! Source acquisition (local passthrough or cached download) and decoding to
//! a canonical mono [`AudioClip`].

use std::fs;
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicU64, Ordering};
use std::time::UNIX_EPOCH;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::adapters::{Decoder, Downloader};
use crate::audio::{downmix_mean, AudioClip};
use crate::error::{Error, Result};

/// Rate used for the prompt/TTS pipeline (the codec's native rate).
pub const DEFAULT_PROMPT_RATE_HZ: u32 = 24_000;
/// Rate used for the voice-conversion pipeline.
pub const DEFAULT_CONVERSION_RATE_HZ: u32 = 32_000;

pub const MIN_DECODE_RATE_HZ: u32 = 8_000;
pub const MAX_DECODE_RATE_HZ: u32 = 48_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SourceKind {
    Local,
    Remote,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SourceSpec {
    pub uri: String,
    pub kind: SourceKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub expected_duration_s: Option<f64>,
}

impl SourceSpec {
    pub fn local(path: impl Into<String>) -> Self {
        Self {
            uri: path.into(),
            kind: SourceKind::Local,
            expected_duration_s: None,
        }
    }

    pub fn remote(uri: impl Into<String>) -> Self {
        Self {
            uri: uri.into(),
            kind: SourceKind::Remote,
            expected_duration_s: None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.uri.trim().is_empty() {
            return Err(Error::Validation("source uri is empty".into()));
        }
        if self.kind == SourceKind::Remote && uri_scheme(&self.uri).is_none() {
            return Err(Error::Validation(format!(
                "remote source {:?} has no scheme prefix",
                self.uri
            )));
        }
        if let Some(d) = self.expected_duration_s {
            if !(d.is_finite() && d > 0.0) {
                return Err(Error::Validation(format!("expected duration {d} must be positive")));
            }
        }
        Ok(())
    }
}

fn uri_scheme(uri: &str) -> Option<&str> {
    let (scheme, rest) = uri.split_once("://")?;
    let valid = !scheme.is_empty()
        && scheme.chars().next().is_some_and(|c| c.is_ascii_alphabetic())
        && scheme
            .chars()
            .all(|c| c.is_ascii_alphanumeric() || matches!(c, '+' | '-' | '.'));
    (valid && !rest.is_empty()).then_some(scheme)
}

/// A local media file ready for decoding.
#[derive(Debug, Clone, PartialEq)]
pub struct RawMediaHandle {
    pub path: PathBuf,
    pub container_format: String,
    pub duration_s: f64,
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

/// Where a remote uri lands in the content cache, minus the extension:
/// `cache/<2-char prefix>/<sha256>`.
pub fn cache_stem(cache_root: &Path, uri: &str) -> PathBuf {
    let digest = sha256_hex(uri.as_bytes());
    cache_root.join(&digest[..2]).join(digest)
}

fn find_cached(stem: &Path) -> Option<PathBuf> {
    let dir = stem.parent()?;
    let name = stem.file_name()?.to_str()?;
    let prefix = format!("{name}.");
    let mut hits: Vec<PathBuf> = fs::read_dir(dir)
        .ok()?
        .filter_map(|e| e.ok())
        .filter(|e| {
            e.file_name().to_str().is_some_and(|n| n.starts_with(&prefix) && !n.ends_with(".tmp"))
                && e.metadata().map(|m| m.len() > 0).unwrap_or(false)
        })
        .map(|e| e.path())
        .collect();
    hits.sort();
    hits.into_iter().next()
}

fn extension_of(path: &Path) -> String {
    path.extension()
        .and_then(|e| e.to_str())
        .map(|e| e.to_ascii_lowercase())
        .unwrap_or_else(|| "bin".to_string())
}

fn sanitize_ext(ext: &str) -> String {
    let clean: String = ext
        .trim_start_matches('.')
        .chars()
        .filter(|c| c.is_ascii_alphanumeric())
        .collect::<String>()
        .to_ascii_lowercase();
    if clean.is_empty() {
        "bin".into()
    } else {
        clean
    }
}

static TMP_COUNTER: AtomicU64 = AtomicU64::new(0);

/// Resolves `spec` to a local media file.
///
/// Local sources are passed through. Remote sources are downloaded once into
/// the content cache at `cache_root`; later calls with the same uri return
/// the cached file without touching the downloader. Downloads land in a
/// temporary file and are renamed into place so concurrent acquisitions of
/// the same uri never expose a partial file.
pub fn acquire_source(
    spec: &SourceSpec,
    downloader: Option<&dyn Downloader>,
    prober: &dyn Decoder,
    cache_root: &Path,
) -> Result<RawMediaHandle> {
    spec.validate()?;
    let path = match spec.kind {
        SourceKind::Local => {
            let path = PathBuf::from(&spec.uri);
            let meta = fs::metadata(&path).map_err(|e| Error::Acquisition {
                uri: spec.uri.clone(),
                reason: e.to_string(),
            })?;
            if meta.len() == 0 {
                return Err(Error::Integrity(format!("{} is empty", spec.uri)));
            }
            path
        }
        SourceKind::Remote => {
            let stem = cache_stem(cache_root, &spec.uri);
            match find_cached(&stem) {
                Some(hit) => hit,
                None => download_into_cache(spec, downloader, &stem)?,
            }
        }
    };
    let container_format = extension_of(&path);
    let duration_s = match prober.probe(&path) {
        Ok(info) => info.duration_s,
        Err(e) => spec.expected_duration_s.ok_or_else(|| Error::Decode {
            path: path.clone(),
            reason: format!("probe failed: {e}"),
        })?,
    };
    if !(duration_s.is_finite() && duration_s > 0.0) {
        return Err(Error::EmptyAudio(path));
    }
    Ok(RawMediaHandle {
        path,
        container_format,
        duration_s,
    })
}

fn download_into_cache(
    spec: &SourceSpec,
    downloader: Option<&dyn Downloader>,
    stem: &Path,
) -> Result<PathBuf> {
    let downloader = downloader.ok_or_else(|| {
        Error::Config(format!("remote source {:?} needs a downloader adapter", spec.uri))
    })?;
    let dir = stem.parent().expect("cache stem has a parent");
    fs::create_dir_all(dir)?;
    let tmp = dir.join(format!(
        ".{}.{}.{}.tmp",
        stem.file_name().unwrap().to_string_lossy(),
        std::process::id(),
        TMP_COUNTER.fetch_add(1, Ordering::Relaxed)
    ));
    let result = downloader.download(&spec.uri, &tmp);
    let ext = match result {
        Ok(ext) => sanitize_ext(&ext),
        Err(e) => {
            let _ = fs::remove_file(&tmp);
            return Err(Error::Acquisition {
                uri: spec.uri.clone(),
                reason: e.to_string(),
            });
        }
    };
    let len = fs::metadata(&tmp).map(|m| m.len()).unwrap_or(0);
    if len == 0 {
        let _ = fs::remove_file(&tmp);
        return Err(Error::Integrity(format!("download of {} produced zero bytes", spec.uri)));
    }
    let final_path = stem.with_extension(ext);
    fs::rename(&tmp, &final_path)?;
    Ok(final_path)
}

/// Stable identifier for a media file: hash of its path and modification time.
pub fn source_id_for(path: &Path) -> Result<String> {
    let mtime = fs::metadata(path)?
        .modified()?
        .duration_since(UNIX_EPOCH)
        .map(|d| d.as_nanos())
        .unwrap_or(0);
    let mut h = Sha256::new();
    h.update(path.to_string_lossy().as_bytes());
    h.update(b"\0");
    h.update(mtime.to_le_bytes());
    Ok(hex::encode(h.finalize())[..16].to_string())
}

/// Decodes `media` to mono at exactly `target_rate_hz` (channel mean downmix).
pub fn decode_to_audio(media: &RawMediaHandle, target_rate_hz: u32, decoder: &dyn Decoder) -> Result<AudioClip> {
    if !(MIN_DECODE_RATE_HZ..=MAX_DECODE_RATE_HZ).contains(&target_rate_hz) {
        return Err(Error::Precondition(format!(
            "target rate {target_rate_hz} Hz outside [{MIN_DECODE_RATE_HZ}, {MAX_DECODE_RATE_HZ}]"
        )));
    }
    if !media.path.exists() {
        return Err(Error::Precondition(format!("{} does not exist", media.path.display())));
    }
    let decoded = decoder.decode(&media.path).map_err(|e| Error::Decode {
        path: media.path.clone(),
        reason: e.to_string(),
    })?;
    if decoded.channels.iter().all(Vec::is_empty) {
        return Err(Error::EmptyAudio(media.path.clone()));
    }
    if decoded.sample_rate_hz == 0 {
        return Err(Error::Decode {
            path: media.path.clone(),
            reason: "decoder reported a zero sample rate".into(),
        });
    }
    let mono = downmix_mean(&decoded.channels);
    let clip = AudioClip::from_clamped(mono, decoded.sample_rate_hz, source_id_for(&media.path)?)?;
    clip.resampled(target_rate_hz)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::adapters::mock::{MockDecoder, MockDownloader, MockMedia};
    use crate::adapters::{AdapterResult, DecodedMedia, MediaInfo};
    use std::sync::atomic::AtomicUsize;

    struct TenBytes(AtomicUsize);
    impl Downloader for TenBytes {
        fn download(&self, _uri: &str, dest: &Path) -> AdapterResult<String> {
            self.0.fetch_add(1, Ordering::SeqCst);
            fs::write(dest, b"0123456789")?;
            Ok("webm".into())
        }
    }

    struct FixedProbe(f64);
    impl Decoder for FixedProbe {
        fn probe(&self, _: &Path) -> AdapterResult<MediaInfo> {
            Ok(MediaInfo {
                container_format: "webm".into(),
                duration_s: self.0,
            })
        }
        fn decode(&self, _: &Path) -> AdapterResult<DecodedMedia> {
            unimplemented!()
        }
    }

    struct Unreachable;
    impl Downloader for Unreachable {
        fn download(&self, uri: &str, _: &Path) -> AdapterResult<String> {
            Err(crate::error::AdapterError::new(format!("host unreachable for {uri}")))
        }
    }

    struct Empty;
    impl Downloader for Empty {
        fn download(&self, _: &str, dest: &Path) -> AdapterResult<String> {
            fs::write(dest, b"")?;
            Ok("mp4".into())
        }
    }

    #[test]
    fn spec_validation() {
        assert!(SourceSpec::local("").validate().is_err());
        assert!(SourceSpec::remote("youtube.com/watch").validate().is_err());
        assert!(SourceSpec::remote("https://youtube.com/watch?v=x").validate().is_ok());
        let mut s = SourceSpec::local("a.wav");
        s.expected_duration_s = Some(0.0);
        assert!(s.validate().is_err());
    }

    #[test]
    fn local_passthrough() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("talk.mp4");
        fs::write(&p, b"not really mp4").unwrap();
        let h = acquire_source(
            &SourceSpec::local(p.to_str().unwrap()),
            None,
            &FixedProbe(12.0),
            dir.path(),
        )
        .unwrap();
        assert_eq!(h.path, p);
        assert_eq!(h.container_format, "mp4");
        assert_eq!(h.duration_s, 12.0);
    }

    #[test]
    fn remote_duration_from_probe_and_cache_hit() {
        let dir = tempfile::tempdir().unwrap();
        let dl = TenBytes(AtomicUsize::new(0));
        let spec = SourceSpec::remote("https://example.org/v/abc");
        let a = acquire_source(&spec, Some(&dl), &FixedProbe(42.5), dir.path()).unwrap();
        assert_eq!(a.duration_s, 42.5);
        assert_eq!(a.container_format, "webm");
        let digest = sha256_hex(spec.uri.as_bytes());
        assert_eq!(a.path, dir.path().join(&digest[..2]).join(format!("{digest}.webm")));
        let b = acquire_source(&spec, Some(&dl), &FixedProbe(42.5), dir.path()).unwrap();
        assert_eq!(a, b);
        assert_eq!(dl.0.load(Ordering::SeqCst), 1, "second call must hit the cache");
        assert_eq!(fs::read(&a.path).unwrap(), fs::read(&b.path).unwrap());
    }

    #[test]
    fn downloader_failure_carries_uri() {
        let dir = tempfile::tempdir().unwrap();
        let err = acquire_source(
            &SourceSpec::remote("https://nowhere.invalid/x"),
            Some(&Unreachable),
            &FixedProbe(1.0),
            dir.path(),
        )
        .unwrap_err();
        assert!(matches!(err, Error::Acquisition { .. }));
        assert!(err.to_string().contains("https://nowhere.invalid/x"));
    }

    #[test]
    fn zero_byte_download_is_integrity_error() {
        let dir = tempfile::tempdir().unwrap();
        let err = acquire_source(
            &SourceSpec::remote("https://example.org/empty"),
            Some(&Empty),
            &FixedProbe(1.0),
            dir.path(),
        )
        .unwrap_err();
        assert!(matches!(err, Error::Integrity(_)));
    }

    #[test]
    fn remote_without_downloader_is_config_error() {
        let dir = tempfile::tempdir().unwrap();
        let err = acquire_source(
            &SourceSpec::remote("https://example.org/x"),
            None,
            &FixedProbe(1.0),
            dir.path(),
        )
        .unwrap_err();
        assert!(matches!(err, Error::Config(_)));
    }

    #[test]
    fn stereo_44k_to_24k_mono_preserves_duration() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("src.vfmock");
        MockMedia::speech(60.0, 44_100, 2, 7).write(&p).unwrap();
        let dec = MockDecoder;
        let h = acquire_source(&SourceSpec::local(p.to_str().unwrap()), None, &dec, dir.path()).unwrap();
        let clip = decode_to_audio(&h, 24_000, &dec).unwrap();
        assert_eq!(clip.sample_rate_hz(), 24_000);
        assert_eq!(clip.offset_s(), 0.0);
        assert!((clip.duration_s() - h.duration_s).abs() <= 0.05);
        assert!((clip.duration_s() - 60.0).abs() <= 0.05);
    }

    #[test]
    fn wav_at_target_rate_is_bit_identical() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("in.wav");
        let q: Vec<i16> = (0..2400).map(|i| ((i * 37) % 2000 - 1000) as i16).collect();
        let samples: Vec<f32> = q.iter().map(|&v| crate::wav::dequantize(v)).collect();
        fs::write(&p, crate::wav::encode_pcm16(&samples, 24_000)).unwrap();
        let dec = MockDecoder;
        let h = acquire_source(&SourceSpec::local(p.to_str().unwrap()), None, &dec, dir.path()).unwrap();
        let clip = decode_to_audio(&h, 24_000, &dec).unwrap();
        assert_eq!(clip.samples(), &samples[..]);
    }

    #[test]
    fn no_audio_stream_is_empty_audio_error() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("silent.vfmock");
        MockMedia::speech(10.0, 16_000, 0, 1).write(&p).unwrap();
        let h = RawMediaHandle {
            path: p,
            container_format: "vfmock".into(),
            duration_s: 10.0,
        };
        let err = decode_to_audio(&h, 24_000, &MockDecoder).unwrap_err();
        assert!(matches!(err, Error::EmptyAudio(_)), "{err}");
    }

    #[test]
    fn rate_out_of_range() {
        let h = RawMediaHandle {
            path: PathBuf::from("x"),
            container_format: "wav".into(),
            duration_s: 1.0,
        };
        assert!(matches!(
            decode_to_audio(&h, 96_000, &MockDecoder),
            Err(Error::Precondition(_))
        ));
    }

    #[test]
    fn source_id_is_stable() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("a.bin");
        fs::write(&p, b"x").unwrap();
        assert_eq!(source_id_for(&p).unwrap(), source_id_for(&p).unwrap());
        assert_eq!(source_id_for(&p).unwrap().len(), 16);
    }

    #[test]
    fn mock_downloader_roundtrip_through_cache() {
        let dir = tempfile::tempdir().unwrap();
        let spec = SourceSpec::remote("mock://lecture?duration=5&rate=16000&channels=1");
        let h = acquire_source(&spec, Some(&MockDownloader), &MockDecoder, dir.path()).unwrap();
        assert!((h.duration_s - 5.0).abs() < 1e-9);
        let clip = decode_to_audio(&h, 16_000, &MockDecoder).unwrap();
        assert_eq!(clip.len(), 80_000);
    }
}
