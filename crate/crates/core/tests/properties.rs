use std::collections::HashSet;

use proptest::prelude::*;
use voiceforge::adapters::mock::MockTranscoder;
use voiceforge::adapters::Transcoder;
use voiceforge::corpus::{make_clip_id, split_train_valid, CorpusEntry, SplitSpec};
use voiceforge::preprocess::{segment, AudioFormat, SegmentationPolicy};
use voiceforge::quality::{character_error_rate, edit_distance, speaker_similarity};
use voiceforge::transcribe::normalize_text;
use voiceforge::{wav, AudioClip};

proptest! {
    #[test]
    fn split_partitions_and_keeps_order(n in 0usize..60, f in 0.01f64..0.99, seed: u64) {
        let entries: Vec<CorpusEntry> = (0..n).map(|i| CorpusEntry::new(make_clip_id("p", i), "s")).collect();
        let spec = SplitSpec { valid_fraction: f, seed };
        let (train, valid) = split_train_valid(&entries, &spec).unwrap();
        prop_assert_eq!(train.len() + valid.len(), n);
        prop_assert_eq!(valid.len(), spec.valid_count(n));
        let pos = |e: &CorpusEntry| entries.iter().position(|x| x.clip_id == e.clip_id).unwrap();
        prop_assert!(train.windows(2).all(|w| pos(&w[0]) < pos(&w[1])));
        prop_assert!(valid.windows(2).all(|w| pos(&w[0]) < pos(&w[1])));

        // membership does not depend on input order
        let mut reversed = entries.clone();
        reversed.reverse();
        let (_, valid_rev) = split_train_valid(&reversed, &spec).unwrap();
        let ids = |v: &[CorpusEntry]| v.iter().map(|e| e.clip_id.clone()).collect::<HashSet<_>>();
        prop_assert_eq!(ids(&valid), ids(&valid_rev));
    }

    #[test]
    fn edit_distance_is_a_metric(a in "[ab ]{0,10}", b in "[ab ]{0,10}", c in "[ab ]{0,10}") {
        let (a, b, c): (Vec<char>, Vec<char>, Vec<char>) = (a.chars().collect(), b.chars().collect(), c.chars().collect());
        prop_assert_eq!(edit_distance(&a, &b), edit_distance(&b, &a));
        prop_assert_eq!(edit_distance(&a, &a), 0);
        prop_assert!(edit_distance(&a, &c) <= edit_distance(&a, &b) + edit_distance(&b, &c));
        prop_assert!(edit_distance(&a, &b) <= a.len().max(b.len()));
    }

    #[test]
    fn cer_of_identical_text_is_zero(s in "\\PC{1,30}") {
        prop_assert_eq!(character_error_rate(&s, &s).unwrap(), 0.0);
    }

    #[test]
    fn similarity_is_bounded(v in prop::collection::vec(-1.0f32..1.0, 4), w in prop::collection::vec(-1.0f32..1.0, 4)) {
        prop_assume!(v.iter().any(|x| x.abs() > 1e-3) && w.iter().any(|x| x.abs() > 1e-3));
        let s = speaker_similarity(&v, &w).unwrap();
        prop_assert!((-1.0 - 1e-9..=1.0 + 1e-9).contains(&s));
        prop_assert!((speaker_similarity(&v, &v).unwrap() - 1.0).abs() < 1e-6);
    }

    #[test]
    fn segments_never_exceed_input(n in 0usize..40_000, target in 0.05f64..2.0, keep: bool) {
        let clip = AudioClip::new(vec![0.1; n], 8_000, "p").unwrap();
        let policy = if keep { SegmentationPolicy::keep_last(target, 0.0) } else { SegmentationPolicy::drop_last(target) };
        let segs = segment(&clip, &policy).unwrap();
        let total: usize = segs.iter().map(AudioClip::len).sum();
        prop_assert!(total <= n);
        if keep {
            prop_assert_eq!(total, n);
        }
    }

    #[test]
    fn mock_mp3_round_trip(samples in prop::collection::vec(-1.0f32..=1.0, 0..3000), r in 0usize..4) {
        let rate = [8_000, 16_000, 24_000, 44_100][r];
        let tc = MockTranscoder;
        let bytes = tc.encode(&samples, rate, AudioFormat::Mp3).unwrap();
        prop_assert!(AudioFormat::Mp3.has_magic(&bytes));
        let (back, back_rate) = tc.decode(&bytes, AudioFormat::Mp3).unwrap();
        prop_assert_eq!(back_rate, rate);
        let quantized: Vec<f32> = samples.iter().map(|&s| wav::dequantize(wav::quantize(s))).collect();
        prop_assert_eq!(back, quantized);
    }

    #[test]
    fn normalization_is_idempotent(s in "\\PC{0,40}") {
        let once = normalize_text(&s);
        prop_assert_eq!(normalize_text(&once), once);
    }
}
