//! Minimal reader/writer for the NumPy `.npy` array format (versions 1.0–3.0)
//! and `.npz` archives of such arrays.
//!
//! Only what speaker prompts need: integer, float64 and fixed-width unicode
//! dtypes, C or Fortran order, no pickled objects.

use std::collections::BTreeMap;
use std::io::{Cursor, Read, Write};

use zip::write::SimpleFileOptions;
use zip::{CompressionMethod, ZipArchive, ZipWriter};

const MAGIC: &[u8] = b"\x93NUMPY";

#[derive(Debug, Clone, PartialEq)]
pub enum NpyData {
    Int(Vec<i64>),
    Float(Vec<f64>),
    Str(Vec<String>),
}

#[derive(Debug, Clone, PartialEq)]
pub struct NpyArray {
    pub shape: Vec<usize>,
    pub data: NpyData,
}

impl NpyArray {
    pub fn int(shape: Vec<usize>, data: Vec<i64>) -> Self {
        Self {
            shape,
            data: NpyData::Int(data),
        }
    }

    pub fn scalar_int(v: i64) -> Self {
        Self::int(vec![], vec![v])
    }

    pub fn scalar_float(v: f64) -> Self {
        Self {
            shape: vec![],
            data: NpyData::Float(vec![v]),
        }
    }

    pub fn scalar_str(s: &str) -> Self {
        Self {
            shape: vec![],
            data: NpyData::Str(vec![s.to_string()]),
        }
    }

    pub fn dtype_name(&self) -> &'static str {
        match self.data {
            NpyData::Int(_) => "integer",
            NpyData::Float(_) => "float",
            NpyData::Str(_) => "unicode",
        }
    }

    fn descr(&self) -> String {
        match &self.data {
            NpyData::Int(_) => "<i8".into(),
            NpyData::Float(_) => "<f8".into(),
            NpyData::Str(v) => {
                let width = v.iter().map(|s| s.chars().count()).max().unwrap_or(0).max(1);
                format!("<U{width}")
            }
        }
    }
}

pub fn write_npy(array: &NpyArray) -> Vec<u8> {
    let shape = match array.shape.as_slice() {
        [] => "()".to_string(),
        [n] => format!("({n},)"),
        dims => format!(
            "({})",
            dims.iter().map(|d| d.to_string()).collect::<Vec<_>>().join(", ")
        ),
    };
    let descr = array.descr();
    let mut header = format!("{{'descr': '{descr}', 'fortran_order': False, 'shape': {shape}, }}");
    // Pad so the data starts on a 64-byte boundary; header ends with '\n'.
    let unpadded = MAGIC.len() + 2 + 2 + header.len() + 1;
    header.push_str(&" ".repeat((64 - unpadded % 64) % 64));
    header.push('\n');

    let mut out = Vec::new();
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&[1, 0]);
    out.extend_from_slice(&(header.len() as u16).to_le_bytes());
    out.extend_from_slice(header.as_bytes());
    match &array.data {
        NpyData::Int(v) => v.iter().for_each(|x| out.extend_from_slice(&x.to_le_bytes())),
        NpyData::Float(v) => v.iter().for_each(|x| out.extend_from_slice(&x.to_le_bytes())),
        NpyData::Str(v) => {
            let width = descr[2..].parse::<usize>().expect("descr width");
            for s in v {
                let mut n = 0;
                for c in s.chars() {
                    out.extend_from_slice(&(c as u32).to_le_bytes());
                    n += 1;
                }
                for _ in n..width {
                    out.extend_from_slice(&0u32.to_le_bytes());
                }
            }
        }
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum Kind {
    Int { signed: bool },
    Float,
    Unicode,
    Bool,
}

struct Header {
    kind: Kind,
    little_endian: bool,
    item_size: usize,
    fortran_order: bool,
    shape: Vec<usize>,
}

fn dict_value<'a>(header: &'a str, key: &str) -> Result<&'a str, String> {
    let pat = format!("'{key}':");
    let start = header
        .find(&pat)
        .ok_or_else(|| format!("npy header missing {key:?}"))?
        + pat.len();
    let rest = header[start..].trim_start();
    let end = if rest.starts_with('(') {
        rest.find(')').map(|i| i + 1)
    } else if let Some(quoted) = rest.strip_prefix('\'') {
        quoted.find('\'').map(|i| i + 2)
    } else {
        rest.find([',', '}'])
    }
    .ok_or_else(|| format!("npy header value for {key:?} unterminated"))?;
    Ok(rest[..end].trim())
}

fn parse_header(text: &str) -> Result<Header, String> {
    let descr = dict_value(text, "descr")?.trim_matches('\'');
    let mut chars = descr.chars();
    let order = chars.next().ok_or("empty descr")?;
    let little_endian = match order {
        '<' | '|' | '=' => true,
        '>' => false,
        _ => return Err(format!("unsupported dtype {descr:?}")),
    };
    let code = chars.next().ok_or("truncated descr")?;
    let size: usize = chars
        .as_str()
        .parse()
        .map_err(|_| format!("unsupported dtype {descr:?}"))?;
    let (kind, item_size) = match code {
        'i' => (Kind::Int { signed: true }, size),
        'u' => (Kind::Int { signed: false }, size),
        'f' => (Kind::Float, size),
        'b' => (Kind::Bool, size),
        'U' => (Kind::Unicode, size * 4),
        _ => return Err(format!("unsupported dtype {descr:?}")),
    };
    if matches!(kind, Kind::Int { .. }) && ![1, 2, 4, 8].contains(&size) {
        return Err(format!("unsupported integer width in {descr:?}"));
    }
    if kind == Kind::Float && ![4, 8].contains(&size) {
        return Err(format!("unsupported float width in {descr:?}"));
    }
    let fortran_order = match dict_value(text, "fortran_order")? {
        "True" => true,
        "False" => false,
        other => return Err(format!("bad fortran_order {other:?}")),
    };
    let shape_txt = dict_value(text, "shape")?;
    let shape = shape_txt
        .trim_start_matches('(')
        .trim_end_matches(')')
        .split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|s| s.trim_end_matches('L').parse::<usize>())
        .collect::<Result<Vec<_>, _>>()
        .map_err(|_| format!("bad shape {shape_txt:?}"))?;
    Ok(Header {
        kind,
        little_endian,
        item_size,
        fortran_order,
        shape,
    })
}

fn read_uint(bytes: &[u8], little_endian: bool) -> u64 {
    let mut buf = [0u8; 8];
    if little_endian {
        buf[..bytes.len()].copy_from_slice(bytes);
        u64::from_le_bytes(buf)
    } else {
        buf[8 - bytes.len()..].copy_from_slice(bytes);
        u64::from_be_bytes(buf)
    }
}

/// Converts Fortran (column-major) element order to C order.
fn to_c_order<T: Clone>(data: Vec<T>, shape: &[usize]) -> Vec<T> {
    if shape.len() < 2 {
        return data;
    }
    let n = data.len();
    let mut out = data.clone();
    for (c_idx, slot) in out.iter_mut().enumerate().take(n) {
        // decompose c_idx in row-major, recompose column-major
        let mut rem = c_idx;
        let mut f_idx = 0;
        let mut stride_f = 1;
        let mut idx = vec![0; shape.len()];
        for d in (0..shape.len()).rev() {
            idx[d] = rem % shape[d];
            rem /= shape[d];
        }
        for d in 0..shape.len() {
            f_idx += idx[d] * stride_f;
            stride_f *= shape[d];
        }
        *slot = data[f_idx].clone();
    }
    out
}

fn in_c_order<T: Clone>(data: Vec<T>, header: &Header) -> Vec<T> {
    if header.fortran_order {
        to_c_order(data, &header.shape)
    } else {
        data
    }
}

pub fn read_npy(bytes: &[u8]) -> Result<NpyArray, String> {
    if bytes.len() < 10 || &bytes[..6] != MAGIC {
        return Err("not an npy array (bad magic)".into());
    }
    let major = bytes[6];
    let (header_len, header_start) = match major {
        1 => (u16::from_le_bytes([bytes[8], bytes[9]]) as usize, 10),
        2 | 3 => {
            if bytes.len() < 12 {
                return Err("truncated npy header".into());
            }
            (u32::from_le_bytes(bytes[8..12].try_into().unwrap()) as usize, 12)
        }
        v => return Err(format!("unsupported npy version {v}")),
    };
    let data_start = header_start + header_len;
    let header_text = std::str::from_utf8(bytes.get(header_start..data_start).ok_or("truncated npy header")?)
        .map_err(|_| "npy header is not text")?;
    let header = parse_header(header_text)?;
    let count: usize = header.shape.iter().product();
    let payload = &bytes[data_start..];
    let needed = count * header.item_size;
    if payload.len() < needed {
        return Err(format!(
            "npy payload truncated: need {needed} bytes, have {}",
            payload.len()
        ));
    }
    let chunks = payload[..needed].chunks_exact(header.item_size.max(1));
    let data = match header.kind {
        Kind::Int { signed } => {
            let w = header.item_size;
            let v: Vec<i64> = chunks
                .map(|c| {
                    let raw = read_uint(c, header.little_endian);
                    if signed && w < 8 {
                        let shift = 64 - 8 * w as u32;
                        ((raw << shift) as i64) >> shift
                    } else {
                        raw as i64
                    }
                })
                .collect();
            NpyData::Int(in_c_order(v, &header))
        }
        Kind::Bool => NpyData::Int(in_c_order(chunks.map(|c| (c[0] != 0) as i64).collect(), &header)),
        Kind::Float => {
            let v: Vec<f64> = chunks
                .map(|c| {
                    let raw = read_uint(c, header.little_endian);
                    if header.item_size == 4 {
                        f32::from_bits(raw as u32) as f64
                    } else {
                        f64::from_bits(raw)
                    }
                })
                .collect();
            NpyData::Float(in_c_order(v, &header))
        }
        Kind::Unicode => {
            let v = chunks
                .map(|c| {
                    c.chunks_exact(4)
                        .map(|u| read_uint(u, header.little_endian) as u32)
                        .take_while(|&u| u != 0)
                        .map(|u| char::from_u32(u).ok_or_else(|| format!("invalid code point {u:#x}")))
                        .collect::<Result<String, String>>()
                })
                .collect::<Result<Vec<_>, _>>()?;
            NpyData::Str(in_c_order(v, &header))
        }
    };
    Ok(NpyArray {
        shape: header.shape,
        data,
    })
}

/// Writes a stored (uncompressed) `.npz` archive with fixed timestamps, so
/// identical inputs give identical bytes.
pub fn write_npz(arrays: &BTreeMap<String, NpyArray>) -> Result<Vec<u8>, String> {
    let mut zip = ZipWriter::new(Cursor::new(Vec::new()));
    let opts = SimpleFileOptions::default()
        .compression_method(CompressionMethod::Stored)
        .last_modified_time(zip::DateTime::DEFAULT)
        .unix_permissions(0o644);
    for (name, array) in arrays {
        zip.start_file(format!("{name}.npy"), opts).map_err(|e| e.to_string())?;
        zip.write_all(&write_npy(array)).map_err(|e| e.to_string())?;
    }
    Ok(zip.finish().map_err(|e| e.to_string())?.into_inner())
}

/// Reads every `*.npy` member of an `.npz` archive, keyed by name without extension.
pub fn read_npz(bytes: &[u8]) -> Result<BTreeMap<String, NpyArray>, String> {
    let mut archive = ZipArchive::new(Cursor::new(bytes)).map_err(|e| format!("corrupted archive: {e}"))?;
    let mut out = BTreeMap::new();
    for i in 0..archive.len() {
        let mut f = archive.by_index(i).map_err(|e| format!("corrupted archive: {e}"))?;
        let name = f.name().map_err(|e| format!("corrupted archive: {e}"))?.to_string();
        let Some(key) = name.strip_suffix(".npy") else {
            continue;
        };
        let mut buf = Vec::new();
        f.read_to_end(&mut buf)
            .map_err(|e| format!("corrupted member {name}: {e}"))?;
        let arr = read_npy(&buf).map_err(|e| format!("member {name}: {e}"))?;
        out.insert(key.to_string(), arr);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn header_is_64_aligned() {
        let bytes = write_npy(&NpyArray::int(vec![2, 3], vec![1, 2, 3, 4, 5, 6]));
        let hl = u16::from_le_bytes([bytes[8], bytes[9]]) as usize;
        assert_eq!((10 + hl) % 64, 0);
        assert_eq!(bytes[10 + hl - 1], b'\n');
        assert_eq!(bytes.len(), 10 + hl + 48);
    }

    #[test]
    fn round_trips() {
        for a in [
            NpyArray::int(vec![3], vec![-1, 0, 7]),
            NpyArray::int(vec![2, 2], vec![1, 2, 3, 4]),
            NpyArray::scalar_int(10_000),
            NpyArray::scalar_float(75.0),
            NpyArray::scalar_str("स्रोत_01"),
            NpyArray::int(vec![0], vec![]),
        ] {
            assert_eq!(read_npy(&write_npy(&a)).unwrap(), a);
        }
    }

    #[test]
    fn reads_numpy_written_int16_fortran() {
        // np.save of np.asfortranarray([[1,2,3],[4,5,6]], dtype='>i2')
        let header = "{'descr': '>i2', 'fortran_order': True, 'shape': (2, 3), }";
        let mut bytes = MAGIC.to_vec();
        bytes.extend_from_slice(&[1, 0]);
        bytes.extend_from_slice(&(header.len() as u16).to_le_bytes());
        bytes.extend_from_slice(header.as_bytes());
        for v in [1i16, 4, 2, 5, 3, 6] {
            bytes.extend_from_slice(&v.to_be_bytes());
        }
        let a = read_npy(&bytes).unwrap();
        assert_eq!(a, NpyArray::int(vec![2, 3], vec![1, 2, 3, 4, 5, 6]));
    }

    #[test]
    fn negative_narrow_ints_sign_extend() {
        let header = "{'descr': '<i1', 'fortran_order': False, 'shape': (2,), }";
        let mut bytes = MAGIC.to_vec();
        bytes.extend_from_slice(&[1, 0]);
        bytes.extend_from_slice(&(header.len() as u16).to_le_bytes());
        bytes.extend_from_slice(header.as_bytes());
        bytes.extend_from_slice(&[0xFF, 0x05]);
        assert_eq!(read_npy(&bytes).unwrap().data, NpyData::Int(vec![-1, 5]));
    }

    #[test]
    fn rejects_garbage() {
        assert!(read_npy(b"hello world").is_err());
        assert!(read_npz(b"PK\x03\x04garbage").is_err());
    }

    #[test]
    fn npz_is_deterministic() {
        let mut m = BTreeMap::new();
        m.insert("a".to_string(), NpyArray::int(vec![2], vec![1, 2]));
        assert_eq!(write_npz(&m).unwrap(), write_npz(&m).unwrap());
        assert_eq!(read_npz(&write_npz(&m).unwrap()).unwrap(), m);
    }
}
