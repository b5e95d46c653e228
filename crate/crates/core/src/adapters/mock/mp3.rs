//! Container for the mock transcoder's "MP3" output.
//!
//! The file is an ID3v2.4 tag whose PRIV frame holds the PCM16 samples,
//! followed by silent MPEG Layer III frames covering the same duration. Real
//! players see a valid, silent MP3 of the right length; the mock decoder
//! reads the samples back from the tag.

const OWNER: &[u8] = b"voiceforge-mock\0";
/// Bitrate of the padding frames, kbps.
const BITRATE_KBPS: u32 = 48;

struct FrameLayout {
    header: [u8; 2],
    bitrate_index: u8,
    rate_index: u8,
    samples_per_frame: u32,
    /// Numerator of the frame length formula `k · bitrate / rate`.
    k: u32,
}

fn layout(rate: u32) -> Option<FrameLayout> {
    // (sync bytes, bitrate index for 48 kbps, rate index, samples/frame, k)
    let (header, bitrate_index, rate_index, spf, k) = match rate {
        44_100 => ([0xFF, 0xFB], 3, 0, 1152, 144),
        48_000 => ([0xFF, 0xFB], 3, 1, 1152, 144),
        32_000 => ([0xFF, 0xFB], 3, 2, 1152, 144),
        22_050 => ([0xFF, 0xF3], 6, 0, 576, 72),
        24_000 => ([0xFF, 0xF3], 6, 1, 576, 72),
        16_000 => ([0xFF, 0xF3], 6, 2, 576, 72),
        11_025 => ([0xFF, 0xE3], 6, 0, 576, 72),
        12_000 => ([0xFF, 0xE3], 6, 1, 576, 72),
        8_000 => ([0xFF, 0xE3], 6, 2, 576, 72),
        _ => return None,
    };
    Some(FrameLayout {
        header,
        bitrate_index,
        rate_index,
        samples_per_frame: spf,
        k,
    })
}

fn syncsafe(n: usize) -> [u8; 4] {
    [
        ((n >> 21) & 0x7F) as u8,
        ((n >> 14) & 0x7F) as u8,
        ((n >> 7) & 0x7F) as u8,
        (n & 0x7F) as u8,
    ]
}

fn unsyncsafe(b: &[u8]) -> usize {
    b.iter().fold(0usize, |acc, &x| (acc << 7) | (x & 0x7F) as usize)
}

pub(super) fn encode(pcm: &[i16], rate: u32) -> Result<Vec<u8>, String> {
    let l = layout(rate).ok_or_else(|| format!("{rate} Hz is not an MPEG audio sample rate"))?;

    let mut body = Vec::with_capacity(OWNER.len() + 4 + 2 * pcm.len());
    body.extend_from_slice(OWNER);
    body.extend_from_slice(&rate.to_le_bytes());
    for s in pcm {
        body.extend_from_slice(&s.to_le_bytes());
    }
    if body.len() >= 1 << 28 {
        return Err("clip too long for the mock container".into());
    }
    let mut out = Vec::new();
    out.extend_from_slice(b"ID3\x04\x00\x00");
    out.extend_from_slice(&syncsafe(10 + body.len()));
    out.extend_from_slice(b"PRIV");
    out.extend_from_slice(&syncsafe(body.len()));
    out.extend_from_slice(&[0, 0]);
    out.extend_from_slice(&body);

    let frames = (pcm.len() as u64).div_ceil(l.samples_per_frame as u64);
    let bytes_num = l.k as u64 * BITRATE_KBPS as u64 * 1000;
    let mut acc = 0u64;
    for _ in 0..frames {
        // Padding slots keep the average frame length exact for 44.1 kHz families.
        let base = bytes_num / rate as u64;
        acc += bytes_num % rate as u64;
        let pad = if acc >= rate as u64 {
            acc -= rate as u64;
            1
        } else {
            0
        };
        let len = (base + pad) as usize;
        let start = out.len();
        out.extend_from_slice(&l.header);
        out.push((l.bitrate_index << 4) | (l.rate_index << 2) | ((pad as u8) << 1));
        out.push(0xC0); // mono
        out.resize(start + len, 0);
    }
    Ok(out)
}

pub(super) fn decode(payload: &[u8]) -> Result<(Vec<i16>, u32), String> {
    if payload.len() < 10 || &payload[..3] != b"ID3" {
        return Err("payload has no ID3 tag".into());
    }
    let tag_end = 10 + unsyncsafe(&payload[6..10]);
    let mut pos = 10;
    while pos + 10 <= tag_end.min(payload.len()) {
        let id = &payload[pos..pos + 4];
        let size = unsyncsafe(&payload[pos + 4..pos + 8]);
        let data = payload
            .get(pos + 10..pos + 10 + size)
            .ok_or("truncated ID3 frame")?;
        if id == b"PRIV" && data.starts_with(OWNER) {
            let rest = &data[OWNER.len()..];
            if rest.len() < 4 || (rest.len() - 4) % 2 != 0 {
                return Err("malformed sample frame".into());
            }
            let rate = u32::from_le_bytes(rest[..4].try_into().unwrap());
            let pcm = rest[4..]
                .chunks_exact(2)
                .map(|c| i16::from_le_bytes([c[0], c[1]]))
                .collect();
            return Ok((pcm, rate));
        }
        pos += 10 + size;
    }
    Err("not a payload written by the mock transcoder".into())
}
