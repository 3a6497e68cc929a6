//! Speaker-dependent phoneme-to-viseme mapping toolkit.
//!
//! Derives phoneme-to-viseme (P2V) maps of every size from phoneme confusion
//! matrices by constrained greedy clustering, transcodes pronunciation
//! dictionaries through those maps, reports visual homophones, scores
//! recognition transcripts by correctness and accuracy, and runs a simulated
//! confusion-channel sweep of word correctness against viseme class count.

pub mod clustering;
pub mod confusion;
pub mod inventory;
pub mod lexicon;
pub mod scoring;
pub mod simulator;

/// Bundled fixture data: a sample BEEP-style dictionary and a toy
/// vocabulary / transcript / confusion set for the simulated sweep.
pub mod fixtures {
    pub const SAMPLE_DICT: &str = include_str!("../assets/sample_beep.dict");
    pub const TOY_DICT: &str = include_str!("../assets/toy.dict");
    pub const TOY_TRANSCRIPT: &str = include_str!("../assets/toy_transcript.txt");
    pub const TOY_CONFUSION: &str = include_str!("../assets/toy_confusion.csv");
}

/// Silence models from HTK output; never treated as phoneme classes.
pub(crate) fn is_silence(label: &str) -> bool {
    label.eq_ignore_ascii_case("sil") || label.eq_ignore_ascii_case("sp")
}
