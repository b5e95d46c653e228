//! Common Voice release layout: `clips/<clip_id>.mp3` plus `train.tsv` and
//! `dev.tsv` manifests with the 10-column header of the 11.0 release.

use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::path::Path;

use super::{preflight, split_train_valid, verify_audio_dir, write_atomic, CorpusEntry, LoadedCorpus, SplitSpec};
use crate::error::{Error, Result};
use crate::preprocess::{AudioFormat, EncodedAudio};

pub const CV_COLUMNS: [&str; 10] = [
    "client_id",
    "path",
    "sentence",
    "up_votes",
    "down_votes",
    "age",
    "gender",
    "accents",
    "locale",
    "segment",
];

pub const CV_HEADER: &str = "client_id\tpath\tsentence\tup_votes\tdown_votes\tage\tgender\taccents\tlocale\tsegment";

const DATASET_README: &str = "\
# Generated Common Voice-style corpus

Every clip in this directory was produced by voice cloning or voice
conversion, not recorded by a contributor.

The `up_votes` and `down_votes` columns are constant placeholders
(2 and 0) so that tools filtering on validation status accept the rows.
They do not reflect any human review.

`client_id` is the SHA-256 of the voice prompt or conversion model that
produced the clip.
";

fn cv_path(clip_id: &str) -> String {
    format!("clips/{clip_id}.mp3")
}

fn opt(v: &Option<String>) -> &str {
    v.as_deref().unwrap_or("")
}

/// Writes `root/clips/*.mp3`, `root/train.tsv`, `root/dev.tsv` and a README
/// noting that votes are placeholders. Columns the entries carry in `extra`
/// are appended after the standard ten, sorted by name.
pub fn write_common_voice(
    entries: &[CorpusEntry],
    audio: &BTreeMap<String, EncodedAudio>,
    root: &Path,
    split: &SplitSpec,
) -> Result<()> {
    let entries = preflight(entries, audio, AudioFormat::Mp3, cv_path)?;
    let extra_cols: BTreeSet<&str> = entries.iter().flat_map(|e| e.extra.keys().map(String::as_str)).collect();
    if let Some(c) = extra_cols.iter().find(|c| CV_COLUMNS.contains(c)) {
        return Err(Error::Validation(format!("extra column {c:?} shadows a standard column")));
    }

    let mut rows = BTreeMap::new();
    for e in &entries {
        let mut fields: Vec<String> = vec![
            e.client_id.clone(),
            format!("{}.mp3", e.clip_id),
            e.sentence.clone(),
            e.up_votes.to_string(),
            e.down_votes.to_string(),
            opt(&e.age).to_string(),
            opt(&e.gender).to_string(),
            opt(&e.accents).to_string(),
            opt(&e.locale).to_string(),
            opt(&e.segment).to_string(),
        ];
        fields.extend(extra_cols.iter().map(|c| e.extra.get(*c).cloned().unwrap_or_default()));
        if let Some((i, _)) = fields.iter().enumerate().find(|(_, f)| f.contains(['\t', '\n', '\r'])) {
            let col = CV_COLUMNS.get(i).copied().unwrap_or("extra");
            return Err(Error::Writer(format!(
                "{col} of {:?} contains a tab or line break",
                e.clip_id
            )));
        }
        rows.insert(e.clip_id.clone(), fields.join("\t"));
    }

    let (train, valid) = split_train_valid(&entries, split)?;
    let mut header = CV_HEADER.to_string();
    for c in &extra_cols {
        header.push('\t');
        header.push_str(c);
    }
    let manifest = |part: &[CorpusEntry]| {
        let mut s = format!("{header}\n");
        for e in part {
            s.push_str(&rows[&e.clip_id]);
            s.push('\n');
        }
        s
    };

    fs::create_dir_all(root.join("clips"))?;
    for e in &entries {
        write_atomic(&root.join(&e.relative_audio_path), audio[&e.clip_id].payload())?;
    }
    write_atomic(&root.join("train.tsv"), manifest(&train).as_bytes())?;
    write_atomic(&root.join("dev.tsv"), manifest(&valid).as_bytes())?;
    write_atomic(&root.join("README.md"), DATASET_README.as_bytes())?;
    Ok(())
}

fn read_tsv(path: &Path) -> Result<Vec<CorpusEntry>> {
    let text = fs::read_to_string(path)?;
    let mut lines = text.lines().enumerate();
    let parse = |line: usize, message: String| Error::Parse {
        file: path.to_path_buf(),
        line,
        message,
    };
    let header: Vec<&str> = match lines.next() {
        Some((_, h)) => h.split('\t').collect(),
        None => return Err(parse(1, "missing header".into())),
    };
    let mut index = BTreeMap::new();
    for (i, col) in header.iter().enumerate() {
        index.insert(*col, i);
    }
    let missing: Vec<&str> = CV_COLUMNS.iter().copied().filter(|c| !index.contains_key(c)).collect();
    if !missing.is_empty() {
        return Err(parse(1, format!("missing header (columns {missing:?} not found)")));
    }

    let mut out = Vec::new();
    for (n, line) in lines {
        if line.is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split('\t').collect();
        if fields.len() != header.len() {
            return Err(parse(
                n + 1,
                format!("expected {} columns, found {}", header.len(), fields.len()),
            ));
        }
        let get = |c: &str| fields[index[c]];
        let optional = |c: &str| Some(get(c)).filter(|v| !v.is_empty()).map(str::to_string);
        let votes = |c: &str| -> Result<u32> {
            let v = get(c);
            if v.is_empty() {
                return Ok(0);
            }
            v.parse().map_err(|_| parse(n + 1, format!("{c} {v:?} is not a count")))
        };
        let file = get("path");
        let clip_id = file
            .strip_suffix(".mp3")
            .filter(|s| !s.is_empty())
            .ok_or_else(|| parse(n + 1, format!("path {file:?} is not <id>.mp3")))?;
        let extra = header
            .iter()
            .enumerate()
            .filter(|(_, c)| !CV_COLUMNS.contains(c))
            .map(|(i, c)| (c.to_string(), fields[i].to_string()))
            .collect();
        out.push(CorpusEntry {
            clip_id: clip_id.to_string(),
            relative_audio_path: format!("clips/{file}"),
            sentence: get("sentence").to_string(),
            client_id: get("client_id").to_string(),
            up_votes: votes("up_votes")?,
            down_votes: votes("down_votes")?,
            age: optional("age"),
            gender: optional("gender"),
            accents: optional("accents"),
            locale: optional("locale"),
            segment: optional("segment"),
            extra,
        });
    }
    Ok(out)
}

pub fn read_common_voice(root: &Path) -> Result<LoadedCorpus> {
    let train = read_tsv(&root.join("train.tsv"))?;
    let valid = read_tsv(&root.join("dev.tsv"))?;
    let all: Vec<&CorpusEntry> = train.iter().chain(valid.iter()).collect();
    let warnings = verify_audio_dir(&root.join("clips"), "mp3", &all, "common_voice");
    Ok(LoadedCorpus { train, valid, warnings })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::adapters::mock::MockTranscoder;
    use crate::adapters::Transcoder;
    use crate::corpus::{make_clip_id, make_client_id};

    fn fixture(n: usize) -> (Vec<CorpusEntry>, BTreeMap<String, EncodedAudio>) {
        let payload = MockTranscoder.encode(&[0.1; 2400], 24_000, AudioFormat::Mp3).unwrap();
        let entries: Vec<CorpusEntry> = (0..n)
            .map(|i| {
                let mut e = CorpusEntry::new(make_clip_id("voice", i), format!("यह वाक्य संख्या {i} है"));
                e.client_id = make_client_id("prompt");
                e.locale = Some("hi".into());
                e
            })
            .collect();
        let audio = entries
            .iter()
            .map(|e| {
                (
                    e.clip_id.clone(),
                    EncodedAudio::new(payload.clone(), AudioFormat::Mp3, 24_000, 0.1).unwrap(),
                )
            })
            .collect();
        (entries, audio)
    }

    fn sorted(mut v: Vec<CorpusEntry>) -> Vec<CorpusEntry> {
        v.sort_by(|a, b| a.clip_id.cmp(&b.clip_id));
        v
    }

    #[test]
    fn five_entries_layout_and_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let (e, a) = fixture(5);
        write_common_voice(&e, &a, dir.path(), &SplitSpec { valid_fraction: 0.4, seed: 0 }).unwrap();
        let train = fs::read_to_string(dir.path().join("train.tsv")).unwrap();
        let dev = fs::read_to_string(dir.path().join("dev.tsv")).unwrap();
        assert!(train.starts_with(&format!("{CV_HEADER}\n")));
        assert!(dev.starts_with(&format!("{CV_HEADER}\n")));
        assert_eq!(train.lines().count() - 1 + dev.lines().count() - 1, 5);
        assert_eq!(fs::read_dir(dir.path().join("clips")).unwrap().count(), 5);

        let back = read_common_voice(dir.path()).unwrap();
        assert!(back.warnings.is_empty());
        let mut want = e.clone();
        for w in &mut want {
            w.relative_audio_path = format!("clips/{}.mp3", w.clip_id);
        }
        assert_eq!(sorted(back.entries().cloned().collect()), sorted(want));
    }

    #[test]
    fn tab_in_sentence_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let (mut e, a) = fixture(2);
        e[0].sentence = "a\tb".into();
        assert!(matches!(
            write_common_voice(&e, &a, dir.path(), &SplitSpec::default()),
            Err(Error::Writer(_))
        ));
    }

    #[test]
    fn wav_audio_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let (e, mut a) = fixture(1);
        a.insert(
            e[0].clip_id.clone(),
            EncodedAudio::new(crate::wav::encode_pcm16(&[0.0; 10], 8000), AudioFormat::WavPcm16, 8000, 0.00125).unwrap(),
        );
        assert!(matches!(
            write_common_voice(&e, &a, dir.path(), &SplitSpec::default()),
            Err(Error::Validation(_))
        ));
    }

    #[test]
    fn missing_header() {
        let dir = tempfile::tempdir().unwrap();
        fs::write(dir.path().join("train.tsv"), "abc\tx.mp3\thello\t2\t0\t\t\t\thi\t\n").unwrap();
        fs::write(dir.path().join("dev.tsv"), format!("{CV_HEADER}\n")).unwrap();
        assert!(matches!(read_common_voice(dir.path()), Err(Error::Parse { line: 1, .. })));
        fs::write(dir.path().join("train.tsv"), "").unwrap();
        assert!(matches!(read_common_voice(dir.path()), Err(Error::Parse { .. })));
    }

    #[test]
    fn wrong_column_count_cites_row() {
        let dir = tempfile::tempdir().unwrap();
        fs::write(
            dir.path().join("train.tsv"),
            format!("{CV_HEADER}\nabc\tx.mp3\thello\t2\t0\t\t\t\thi\t\nabc\ty.mp3\thello\n"),
        )
        .unwrap();
        fs::write(dir.path().join("dev.tsv"), format!("{CV_HEADER}\n")).unwrap();
        match read_common_voice(dir.path()).unwrap_err() {
            Error::Parse { line, .. } => assert_eq!(line, 3),
            other => panic!("unexpected {other}"),
        }
    }

    #[test]
    fn extra_columns_preserved() {
        let dir = tempfile::tempdir().unwrap();
        fs::write(
            dir.path().join("train.tsv"),
            format!("{CV_HEADER}\tvariant\nabc\tx.mp3\thello\t3\t1\ttwenties\t\t\thi\t\tstandard\n"),
        )
        .unwrap();
        fs::write(dir.path().join("dev.tsv"), format!("{CV_HEADER}\tvariant\n")).unwrap();
        let back = read_common_voice(dir.path()).unwrap();
        let e = &back.train[0];
        assert_eq!(e.extra.get("variant").map(String::as_str), Some("standard"));
        assert_eq!(e.age.as_deref(), Some("twenties"));
        assert_eq!(e.gender, None);
        assert_eq!((e.up_votes, e.down_votes), (3, 1));
        // missing clip file is reported
        assert_eq!(back.warnings.len(), 1);
    }

    #[test]
    fn extras_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let (mut e, a) = fixture(3);
        e[1].extra.insert("variant".into(), "x".into());
        write_common_voice(&e, &a, dir.path(), &SplitSpec::default()).unwrap();
        let back = read_common_voice(dir.path()).unwrap();
        let got = sorted(back.entries().cloned().collect());
        assert_eq!(got[1].extra.get("variant").map(String::as_str), Some("x"));
        assert_eq!(got[0].extra.get("variant").map(String::as_str), Some(""));
    }
}
