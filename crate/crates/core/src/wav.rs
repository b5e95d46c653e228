//! RIFF/WAVE PCM16 with the canonical 44-byte header.
//!
//! Writing is done by hand so the byte layout is exact. Reading goes through
//! `hound`, which accepts any WAVE variant (extensible headers, other bit
//! depths, float payloads).

use std::io::Cursor;

pub const HEADER_LEN: usize = 44;

/// Full-scale value used for both quantization and dequantization.
const SCALE: f32 = 32767.0;

pub fn quantize(sample: f32) -> i16 {
    (sample.clamp(-1.0, 1.0) * SCALE).round() as i16
}

pub fn dequantize(q: i16) -> f32 {
    (q as f32 / SCALE).clamp(-1.0, 1.0)
}

/// Encodes mono PCM16 little-endian.
pub fn encode_pcm16(samples: &[f32], sample_rate_hz: u32) -> Vec<u8> {
    let data_len = (samples.len() * 2) as u32;
    let mut out = Vec::with_capacity(HEADER_LEN + samples.len() * 2);
    out.extend_from_slice(b"RIFF");
    out.extend_from_slice(&(36 + data_len).to_le_bytes());
    out.extend_from_slice(b"WAVE");
    out.extend_from_slice(b"fmt ");
    out.extend_from_slice(&16u32.to_le_bytes());
    out.extend_from_slice(&1u16.to_le_bytes()); // PCM
    out.extend_from_slice(&1u16.to_le_bytes()); // mono
    out.extend_from_slice(&sample_rate_hz.to_le_bytes());
    out.extend_from_slice(&(sample_rate_hz * 2).to_le_bytes()); // byte rate
    out.extend_from_slice(&2u16.to_le_bytes()); // block align
    out.extend_from_slice(&16u16.to_le_bytes());
    out.extend_from_slice(b"data");
    out.extend_from_slice(&data_len.to_le_bytes());
    for &s in samples {
        out.extend_from_slice(&quantize(s).to_le_bytes());
    }
    out
}

pub fn has_wav_magic(bytes: &[u8]) -> bool {
    bytes.len() >= 12 && &bytes[0..4] == b"RIFF" && &bytes[8..12] == b"WAVE"
}

/// Decoded WAVE payload, one vector per channel.
#[derive(Debug, Clone)]
pub struct WavData {
    pub sample_rate_hz: u32,
    pub channels: Vec<Vec<f32>>,
}

pub fn decode(bytes: &[u8]) -> Result<WavData, String> {
    let reader = hound::WavReader::new(Cursor::new(bytes)).map_err(|e| e.to_string())?;
    read_all(reader)
}

pub fn decode_file(path: &std::path::Path) -> Result<WavData, String> {
    let reader = hound::WavReader::open(path).map_err(|e| e.to_string())?;
    read_all(reader)
}

/// Header-only duration, no sample decoding.
pub fn probe_duration(path: &std::path::Path) -> Result<f64, String> {
    let reader = hound::WavReader::open(path).map_err(|e| e.to_string())?;
    let spec = reader.spec();
    Ok(reader.duration() as f64 / spec.sample_rate as f64)
}

fn read_all<R: std::io::Read>(mut reader: hound::WavReader<R>) -> Result<WavData, String> {
    let spec = reader.spec();
    let n_ch = spec.channels as usize;
    if n_ch == 0 {
        return Err("zero channels".into());
    }
    let interleaved: Vec<f32> = match (spec.sample_format, spec.bits_per_sample) {
        (hound::SampleFormat::Int, 16) => reader
            .samples::<i16>()
            .map(|s| s.map(dequantize))
            .collect::<Result<_, _>>()
            .map_err(|e| e.to_string())?,
        (hound::SampleFormat::Int, bits) => {
            let full = (1i64 << (bits - 1)) as f32;
            reader
                .samples::<i32>()
                .map(|s| s.map(|v| (v as f32 / full).clamp(-1.0, 1.0)))
                .collect::<Result<_, _>>()
                .map_err(|e| e.to_string())?
        }
        (hound::SampleFormat::Float, _) => reader
            .samples::<f32>()
            .map(|s| s.map(|v| if v.is_nan() { 0.0 } else { v.clamp(-1.0, 1.0) }))
            .collect::<Result<_, _>>()
            .map_err(|e| e.to_string())?,
    };
    let mut channels = vec![Vec::with_capacity(interleaved.len() / n_ch); n_ch];
    for (i, s) in interleaved.into_iter().enumerate() {
        channels[i % n_ch].push(s);
    }
    Ok(WavData {
        sample_rate_hz: spec.sample_rate,
        channels,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn one_second_silence_size() {
        let bytes = encode_pcm16(&vec![0.0; 16000], 16000);
        assert_eq!(bytes.len(), HEADER_LEN + 2 * 16000);
        assert!(has_wav_magic(&bytes));
    }

    #[test]
    fn header_fields() {
        let bytes = encode_pcm16(&[0.5, -0.5], 24000);
        assert_eq!(&bytes[36..40], b"data");
        assert_eq!(u32::from_le_bytes(bytes[24..28].try_into().unwrap()), 24000);
        assert_eq!(u32::from_le_bytes(bytes[40..44].try_into().unwrap()), 4);
        assert_eq!(u32::from_le_bytes(bytes[4..8].try_into().unwrap()), 40);
    }

    #[test]
    fn round_trip_within_quantization() {
        let x: Vec<f32> = (0..1000).map(|i| ((i as f32) * 0.37).sin()).collect();
        let d = decode(&encode_pcm16(&x, 8000)).unwrap();
        assert_eq!(d.sample_rate_hz, 8000);
        assert_eq!(d.channels.len(), 1);
        for (a, b) in x.iter().zip(&d.channels[0]) {
            assert!((a - b).abs() <= 1.0 / 32768.0);
        }
    }

    #[test]
    fn extremes_stay_in_range() {
        let d = decode(&encode_pcm16(&[1.0, -1.0], 8000)).unwrap();
        assert_eq!(d.channels[0], vec![1.0, -1.0]);
    }
}
