//! Parametric confusion-channel recognizer: a desk-scale stand-in for HMM
//! phoneme and viseme recognition.
//!
//! Reference tokens pass through a discrete memoryless channel; each symbol
//! is independently replaced by a sample from the channel distribution
//! conditioned on it. The `sweep` runs the whole pipeline per hierarchy
//! level: transcode the dictionary, corrupt the viseme strings, decode back
//! to words by nearest match, and score correctness and accuracy per fold.
//!
//! Per-class error mass is scaled by `(M / m0)^dilution_exponent`, a model
//! hook for training data thinning out as class counts grow. The functional
//! form is a modelling choice, not a measured quantity.

use std::collections::BTreeSet;

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::clustering::{self, ClusterError, MapHierarchy};
use crate::confusion::{ConfusionCounts, ConfusionError};
use crate::inventory::PhonemeInventory;
use crate::lexicon::{self, LexiconError, P2VMap, PronunciationDictionary, VisemeLexicon};
use crate::scoring::{self, AlignCosts, ScoringError, Transcript};

#[derive(Debug, Error)]
pub enum SimError {
    #[error("word {0:?} is not in the dictionary")]
    UnknownWord(String),
    #[error("viseme lexicon is empty")]
    EmptyLexicon,
    #[error("channel does not cover phoneme {0:?}")]
    UncoveredPhoneme(String),
    #[error(transparent)]
    Cluster(#[from] ClusterError),
    #[error(transparent)]
    Confusion(#[from] ConfusionError),
    #[error(transparent)]
    Lexicon(#[from] LexiconError),
    #[error(transparent)]
    Scoring(#[from] ScoringError),
}

/// Column-stochastic symbol channel: `matrix[i][j]` is the probability of
/// recognizing symbol i given reference symbol j.
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelModel {
    labels: Vec<String>,
    matrix: Vec<f64>, // row-major, columns conditioned on the reference
    pub noise_scale: f64,
    pub dilution_exponent: f64,
}

impl ChannelModel {
    /// Noiseless channel: every symbol passes through unchanged.
    pub fn identity(labels: Vec<String>) -> Self {
        let m = labels.len();
        let mut matrix = vec![0.0; m * m];
        for i in 0..m {
            matrix[i * m + i] = 1.0;
        }
        ChannelModel {
            labels,
            matrix,
            noise_scale: 0.0,
            dilution_exponent: 0.0,
        }
    }

    /// Identity mixed with uniform confusion: each symbol survives with
    /// probability `1 - error_rate`, otherwise becomes one of the other
    /// symbols uniformly.
    pub fn uniform_noise(labels: Vec<String>, error_rate: f64) -> Self {
        let m = labels.len();
        let e = error_rate.clamp(0.0, 1.0);
        let off = if m > 1 { e / (m - 1) as f64 } else { 0.0 };
        let mut matrix = vec![off; m * m];
        for i in 0..m {
            matrix[i * m + i] = 1.0 - e;
        }
        ChannelModel {
            labels,
            matrix,
            noise_scale: e,
            dilution_exponent: 0.0,
        }
    }

    /// Channel whose column for reference j is the row-normalized row j of
    /// `counts` (empirical recognition behaviour). Reference classes with an
    /// all-zero row fall back to identity.
    pub fn from_counts(counts: &ConfusionCounts) -> Self {
        let m = counts.size();
        let mut matrix = vec![0.0; m * m];
        for j in 0..m {
            let total = counts.row_sum(j);
            if total == 0 {
                matrix[j * m + j] = 1.0;
                continue;
            }
            for i in 0..m {
                matrix[i * m + j] = counts.get(j, i) as f64 / total as f64;
            }
        }
        ChannelModel {
            labels: counts.labels().to_vec(),
            matrix,
            noise_scale: 0.0,
            dilution_exponent: 0.0,
        }
    }

    pub fn with_noise(mut self, noise_scale: f64, dilution_exponent: f64) -> Self {
        self.noise_scale = noise_scale;
        self.dilution_exponent = dilution_exponent;
        self
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn position(&self, label: &str) -> Option<usize> {
        self.labels.iter().position(|l| l == label)
    }

    fn column(&self, j: usize) -> impl Iterator<Item = f64> + '_ {
        let m = self.labels.len();
        (0..m).map(move |i| self.matrix[i * m + j])
    }

    /// Sample a recognized symbol for reference symbol index `j`.
    fn sample(&self, j: usize, rng: &mut impl Rng) -> usize {
        sample_index(self.column(j), j, rng)
    }
}

/// Sample from a discrete distribution given by `weights`; falls back to
/// `default` when the mass is zero or rounding leaves the draw unplaced.
fn sample_index(weights: impl Iterator<Item = f64>, default: usize, rng: &mut impl Rng) -> usize {
    let w: Vec<f64> = weights.collect();
    let total: f64 = w.iter().sum();
    if total <= 0.0 {
        return default;
    }
    let mut draw = rng.gen::<f64>() * total;
    for (i, &p) in w.iter().enumerate() {
        draw -= p;
        if draw < 0.0 {
            return i;
        }
    }
    default
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SimulationConfig {
    pub seed: u64,
    pub folds: usize,
    /// Test utterances drawn (with replacement) per fold.
    pub test_utterances: usize,
}

impl Default for SimulationConfig {
    fn default() -> Self {
        SimulationConfig {
            seed: 0,
            folds: 10,
            test_utterances: 20,
        }
    }
}

/// Independent deterministic RNG stream per (seed, stream id).
fn derive_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Expand a word transcript to phoneme strings via the first pronunciation
/// of each word.
fn phoneme_reference(
    dict: &PronunciationDictionary,
    transcript: &Transcript,
) -> Result<Transcript, SimError> {
    let mut out = Transcript::new();
    for (id, words) in transcript.utterances() {
        let mut phones = Vec::new();
        for word in words {
            let prons = dict
                .pronunciations(word)
                .ok_or_else(|| SimError::UnknownWord(word.clone()))?;
            phones.extend(prons[0].iter().cloned());
        }
        out.push(id.to_string(), phones)?;
    }
    Ok(out)
}

/// Simulated phoneme recognition (pipeline step one). Returns the corrupted
/// phoneme transcript plus one confusion matrix per fold; fold matrices
/// accumulate (reference row, sampled column) over utterances drawn with
/// replacement from the transcript.
pub fn simulate_phoneme_recognition(
    dict: &PronunciationDictionary,
    transcript: &Transcript,
    channel: &ChannelModel,
    config: &SimulationConfig,
) -> Result<(Transcript, Vec<ConfusionCounts>), SimError> {
    let reference = phoneme_reference(dict, transcript)?;
    let utterances: Vec<(&str, &[String])> = reference.utterances().collect();

    let corrupt = |tokens: &[String], rng: &mut ChaCha8Rng, counts: Option<&mut ConfusionCounts>| {
        let mut fold_counts = counts;
        let mut out = Vec::with_capacity(tokens.len());
        for tok in tokens {
            let j = channel
                .position(tok)
                .ok_or_else(|| SimError::UncoveredPhoneme(tok.clone()))?;
            let i = channel.sample(j, rng);
            if let Some(counts) = fold_counts.as_deref_mut() {
                counts.add(j, i, 1);
            }
            out.push(channel.labels()[i].clone());
        }
        Ok::<_, SimError>(out)
    };

    // One corruption of every utterance forms the hypothesis transcript.
    let mut hypothesis = Transcript::new();
    let mut rng = derive_rng(config.seed, 0);
    for (id, tokens) in &utterances {
        hypothesis.push(id.to_string(), corrupt(tokens, &mut rng, None)?)?;
    }

    // Fold matrices come from independent streams, sampling with replacement.
    let mut folds = Vec::with_capacity(config.folds);
    for f in 0..config.folds {
        let mut rng = derive_rng(config.seed, 1 + f as u64);
        let mut counts = ConfusionCounts::zeros(channel.labels().to_vec())?;
        for _ in 0..config.test_utterances {
            let (_, tokens) = utterances[rng.gen_range(0..utterances.len())];
            corrupt(tokens, &mut rng, Some(&mut counts))?;
        }
        folds.push(counts);
    }
    Ok((hypothesis, folds))
}

/// Decode each utterance's viseme string to the nearest lexicon word by
/// unit-cost edit distance. Exact ties pick uniformly at random with `rng`.
pub fn decode_words(
    observed: &Transcript,
    lexicon: &VisemeLexicon,
    rng: &mut impl Rng,
) -> Result<Transcript, SimError> {
    if lexicon.is_empty() {
        return Err(SimError::EmptyLexicon);
    }
    let mut out = Transcript::new();
    for (id, sequence) in observed.utterances() {
        out.push(id.to_string(), vec![decode_one(sequence, lexicon, rng)])?;
    }
    Ok(out)
}

fn decode_one(sequence: &[String], lexicon: &VisemeLexicon, rng: &mut impl Rng) -> String {
    let mut best = usize::MAX;
    let mut candidates: BTreeSet<&str> = BTreeSet::new();
    for (word, images) in lexicon.entries() {
        for image in images {
            let d = scoring::align(image, sequence, AlignCosts::UNIT);
            let dist = d.s + d.d + d.i;
            if dist < best {
                best = dist;
                candidates.clear();
            }
            if dist == best {
                candidates.insert(word);
            }
        }
    }
    let candidates: Vec<&str> = candidates.into_iter().collect();
    candidates[rng.gen_range(0..candidates.len())].to_string()
}

/// Class-level channel for one hierarchy level: the phoneme channel counts
/// are contracted through the map, then error mass is set to
/// `noise_scale * (M / m0)^dilution_exponent` per class and distributed over
/// the contracted confusion pattern (uniform fallback).
fn level_channel(
    phoneme_counts: &ConfusionCounts,
    map: &P2VMap,
    noise_scale: f64,
    dilution_exponent: f64,
    m0: usize,
) -> Result<ChannelModel, SimError> {
    let class_ids: Vec<String> = map.classes().iter().map(|c| c.id.clone()).collect();
    let m = class_ids.len();
    let mut contracted = ConfusionCounts::zeros(class_ids.clone())?;
    for (r, rl) in phoneme_counts.labels().iter().enumerate() {
        let Some(rc) = map.class_of(rl) else { continue };
        let ri = class_ids.iter().position(|c| c == rc).unwrap();
        for (c, cl) in phoneme_counts.labels().iter().enumerate() {
            let Some(cc) = map.class_of(cl) else { continue };
            let ci = class_ids.iter().position(|x| x == cc).unwrap();
            contracted.add(ri, ci, phoneme_counts.get(r, c));
        }
    }
    let eps = (noise_scale * (m as f64 / m0 as f64).powf(dilution_exponent)).clamp(0.0, 1.0);
    let mut matrix = vec![0.0; m * m];
    for j in 0..m {
        // Off-diagonal recognition pattern for reference class j.
        let mut spread: Vec<f64> = (0..m)
            .map(|i| if i == j { 0.0 } else { contracted.get(j, i) as f64 })
            .collect();
        let total: f64 = spread.iter().sum();
        if total > 0.0 {
            for v in &mut spread {
                *v /= total;
            }
        } else if m > 1 {
            let u = 1.0 / (m - 1) as f64;
            for (i, v) in spread.iter_mut().enumerate() {
                if i != j {
                    *v = u;
                }
            }
        }
        for i in 0..m {
            matrix[i * m + j] = if i == j {
                1.0 - eps
            } else {
                eps * spread[i]
            };
        }
    }
    Ok(ChannelModel {
        labels: class_ids,
        matrix,
        noise_scale,
        dilution_exponent,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow {
    pub m: usize,
    pub correctness: f64,
    pub accuracy: f64,
    pub homophone_groups: usize,
    pub stderr_c: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepResult {
    pub speaker: String,
    pub seed: u64,
    pub rows: Vec<SweepRow>,
}

impl SweepResult {
    pub fn to_csv(&self) -> String {
        let mut out = format!("# speaker={} seed={}\n", self.speaker, self.seed);
        out.push_str("M,C,A,homophone_groups,stderr_C\n");
        for row in &self.rows {
            out.push_str(&format!(
                "{},{:.6},{:.6},{},{:.6}\n",
                row.m, row.correctness, row.accuracy, row.homophone_groups, row.stderr_c
            ));
        }
        out
    }
}

/// What drives the sweep: measured phoneme confusion counts, or a channel to
/// simulate the phoneme recognition stage with.
pub enum SweepInput<'a> {
    Counts(&'a ConfusionCounts),
    Channel(&'a ChannelModel),
}

/// Full pipeline: build the hierarchy, then per level transcode, corrupt,
/// decode and score. One row per level, standard error of C across folds.
#[allow(clippy::too_many_arguments)]
pub fn sweep(
    input: SweepInput<'_>,
    inv: &PhonemeInventory,
    dict: &PronunciationDictionary,
    transcript: &Transcript,
    config: &SimulationConfig,
    noise_scale: f64,
    dilution_exponent: f64,
    speaker: &str,
) -> Result<(MapHierarchy, SweepResult), SimError> {
    let phoneme_counts = match input {
        SweepInput::Counts(k) => k.clone(),
        SweepInput::Channel(channel) => {
            let (_, folds) = simulate_phoneme_recognition(dict, transcript, channel, config)?;
            crate::confusion::sum_folds(&folds)?
        }
    };
    let hierarchy = clustering::build_hierarchy(&phoneme_counts, inv, config.seed, speaker)?;
    let m0 = hierarchy.initial_classes;

    let mut rows = Vec::with_capacity(hierarchy.maps.len());
    for map in &hierarchy.maps {
        let m = map.level();
        let lex = lexicon::transcode(dict, map, false)?;
        let homophone_groups = lexicon::find_homophones(&lex).groups.len();
        let channel = level_channel(&phoneme_counts, map, noise_scale, dilution_exponent, m0)?;

        let mut fold_c = Vec::with_capacity(config.folds);
        let mut fold_a = Vec::with_capacity(config.folds);
        let utterances: Vec<(&str, &[String])> = transcript.utterances().collect();
        for f in 0..config.folds {
            let mut rng = derive_rng(config.seed, (m as u64) << 32 | f as u64);
            let mut reference = Transcript::new();
            let mut hypothesis = Transcript::new();
            for t in 0..config.test_utterances {
                let (_, words) = utterances[rng.gen_range(0..utterances.len())];
                let mut decoded = Vec::with_capacity(words.len());
                for word in words {
                    let images = lex
                        .images(word)
                        .ok_or_else(|| SimError::UnknownWord(word.clone()))?;
                    let mut observed = Vec::with_capacity(images[0].len());
                    for viseme in &images[0] {
                        match channel.position(viseme) {
                            Some(j) => {
                                observed.push(channel.labels()[channel.sample(j, &mut rng)].clone())
                            }
                            // V00 (unmapped) passes through unchanged.
                            None => observed.push(viseme.clone()),
                        }
                    }
                    decoded.push(decode_one(&observed, &lex, &mut rng));
                }
                let id = format!("t{}", t);
                reference.push(id.clone(), words.to_vec())?;
                hypothesis.push(id, decoded)?;
            }
            let report =
                scoring::score_transcripts(&reference, &hypothesis, AlignCosts::default())?;
            fold_c.push(report.correctness);
            fold_a.push(report.accuracy);
        }
        let mean = |v: &[f64]| v.iter().sum::<f64>() / v.len() as f64;
        let c_mean = mean(&fold_c);
        let a_mean = mean(&fold_a);
        let stderr_c = if fold_c.len() > 1 {
            let var = fold_c.iter().map(|c| (c - c_mean).powi(2)).sum::<f64>()
                / (fold_c.len() - 1) as f64;
            (var / fold_c.len() as f64).sqrt()
        } else {
            0.0
        };
        rows.push(SweepRow {
            m,
            correctness: c_mean,
            accuracy: a_mean,
            homophone_groups,
            stderr_c,
        });
    }
    Ok((
        hierarchy,
        SweepResult {
            speaker: speaker.to_string(),
            seed: config.seed,
            rows,
        },
    ))
}
