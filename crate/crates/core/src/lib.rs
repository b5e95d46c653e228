//! Build speech corpora from a single speaker's recordings, in the Common
//! Voice and LJ Speech layouts.
//!
//! Two workflows are supported. The first extracts a speaker prompt from a
//! source recording and drives a prompted TTS backend over a sentence list.
//! The second transcribes and slices the recording into an LJ training set
//! for a voice conversion model, then converts existing speech with it.
//!
//! All neural systems sit behind the traits in [`adapters`]. The crate ships
//! deterministic mocks for each of them, so every stage runs without model
//! weights:
//!
//! ```
//! use voiceforge::adapters::mock::{speech_like, MockCodec};
//! use voiceforge::voiceprompt::extract_codebooks;
//!
//! let clip = speech_like(10.0, 24_000, 1);
//! let (fine, coarse) = extract_codebooks(&clip, &MockCodec::default(), 2).unwrap();
//! assert_eq!((fine.n_codebooks(), fine.n_frames()), (8, 750));
//! assert_eq!(coarse.rows(), &fine.rows()[..2]);
//! ```

pub mod adapters;
pub mod audio;
pub mod config;
pub mod conversion;
pub mod corpus;
pub mod error;
pub mod ingest;
pub mod pipeline;
pub mod preprocess;
pub mod quality;
pub mod synthesis;
pub mod transcribe;
pub mod voiceprompt;
pub mod wav;

pub use audio::AudioClip;
pub use error::{AdapterError, Error, Result};

/// Environment variable that overrides the download cache root.
pub const CACHE_DIR_ENV: &str = "VOICEFORGE_CACHE_DIR";

#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../book/src/introduction.md")]
    mod introduction {}
    #[doc = include_str!("../../../book/src/configuration.md")]
    mod configuration {}
    #[doc = include_str!("../../../book/src/adapters.md")]
    mod adapters {}
    #[doc = include_str!("../../../book/src/preprocessing.md")]
    mod preprocessing {}
    #[doc = include_str!("../../../book/src/voice-prompts.md")]
    mod voice_prompts {}
    #[doc = include_str!("../../../book/src/synthesis.md")]
    mod synthesis {}
    #[doc = include_str!("../../../book/src/conversion.md")]
    mod conversion {}
    #[doc = include_str!("../../../book/src/datasets.md")]
    mod datasets {}
    #[doc = include_str!("../../../book/src/quality.md")]
    mod quality {}
    #[doc = include_str!("../../../book/src/cli.md")]
    mod cli {}
}
