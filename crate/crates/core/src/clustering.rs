//! Greedy confusion-driven clustering of phonemes into viseme classes.
//!
//! Starting from a summed phoneme confusion matrix, the most-confused pair of
//! same-category classes (score `q = P[r][s] + P[s][r]` on the
//! column-normalized matrix) is merged, the matrix is contracted and
//! re-normalized, and the process repeats until only one vowel class and one
//! consonant class remain. Every intermediate class count yields a P2V map;
//! the whole nested family plus its merge trace forms a [`MapHierarchy`].

use std::collections::HashMap;
use std::fs;
use std::io::Write as _;
use std::path::Path;

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::confusion::{ConfusionCounts, ConfusionError, NormalizedConfusion};
use crate::inventory::{Category, PhonemeInventory};
use crate::lexicon::P2VMap;

/// One viseme class: a set of same-category phonemes under a display id.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct VisemeClass {
    pub id: String,
    pub members: Vec<String>,
    pub category: Option<Category>,
}

/// One greedy merge, recorded for the trace.
#[derive(Debug, Clone, PartialEq)]
pub struct MergeStep {
    /// Class count before this merge.
    pub level_before: usize,
    /// Ids (at `level_before`) of the merged classes, lexicographic order.
    pub merged_pair: (String, String),
    pub score: f64,
    pub tie_broken: bool,
}

/// The nested family of P2V maps for one speaker, largest level first.
#[derive(Debug, Clone, PartialEq)]
pub struct MapHierarchy {
    pub speaker_id: String,
    pub initial_classes: usize,
    pub maps: Vec<P2VMap>,
    pub trace: Vec<MergeStep>,
    pub seed: u64,
    /// Phonemes with all-zero row and column, excluded before clustering.
    pub dropped: Vec<String>,
}

impl MapHierarchy {
    /// The map with exactly `m` classes, if that level exists.
    pub fn map_at(&self, m: usize) -> Option<&P2VMap> {
        if m > self.initial_classes || m == 0 {
            return None;
        }
        let idx = self.initial_classes - m;
        self.maps.get(idx).filter(|map| map.classes().len() == m)
    }
}

#[derive(Debug, Error)]
pub enum ClusterError {
    #[error("unknown class label {0:?}")]
    UnknownLabel(String),
    #[error("no legal pair: every remaining same-category pair is exhausted")]
    NoLegalPair,
    #[error("fewer than 2 mergeable classes at start")]
    NothingToCluster,
    #[error(transparent)]
    Confusion(#[from] ConfusionError),
}

/// Symmetric pair confusability: `P[r][s] + P[s][r]`.
pub fn pair_score(p: &NormalizedConfusion, r: &str, s: &str) -> Result<f64, ClusterError> {
    let ri = p
        .position(r)
        .ok_or_else(|| ClusterError::UnknownLabel(r.to_string()))?;
    let si = p
        .position(s)
        .ok_or_else(|| ClusterError::UnknownLabel(s.to_string()))?;
    Ok(p.get(ri, si) + p.get(si, ri))
}

/// Scores compared after rounding to 12 decimals; q values are ratios of
/// small integers, so real ties come from identical count patterns.
fn round_score(q: f64) -> i64 {
    (q * 1e12).round() as i64
}

#[derive(Debug, Clone, PartialEq)]
pub struct BestPair {
    pub a: String,
    pub b: String,
    pub score: f64,
    pub tie_broken: bool,
}

/// Pick the same-category pair with maximal score. Exact ties are broken
/// uniformly at random with `rng`; vowels never pair with consonants.
pub fn best_pair(
    p: &NormalizedConfusion,
    categories: &HashMap<String, Category>,
    rng: &mut impl Rng,
) -> Result<BestPair, ClusterError> {
    let labels = p.labels();
    let mut best: Option<(i64, Vec<(usize, usize)>)> = None;
    for i in 0..labels.len() {
        let ci = categories
            .get(&labels[i])
            .ok_or_else(|| ClusterError::UnknownLabel(labels[i].clone()))?;
        for (j, lj) in labels.iter().enumerate().skip(i + 1) {
            let cj = categories
                .get(lj)
                .ok_or_else(|| ClusterError::UnknownLabel(lj.clone()))?;
            if ci != cj {
                continue;
            }
            let q = round_score(p.get(i, j) + p.get(j, i));
            match &mut best {
                None => best = Some((q, vec![(i, j)])),
                Some((bq, ties)) => {
                    if q > *bq {
                        best = Some((q, vec![(i, j)]));
                    } else if q == *bq {
                        ties.push((i, j));
                    }
                }
            }
        }
    }
    let (_, ties) = best.ok_or(ClusterError::NoLegalPair)?;
    let tie_broken = ties.len() > 1;
    let (i, j) = ties[rng.gen_range(0..ties.len())];
    let (mut a, mut b) = (labels[i].clone(), labels[j].clone());
    if b < a {
        std::mem::swap(&mut a, &mut b);
    }
    Ok(BestPair {
        score: pair_score(p, &a, &b)?,
        a,
        b,
        tie_broken,
    })
}

#[derive(Debug, Clone)]
struct ClassState {
    members: Vec<String>, // inventory order
    category: Category,
}

/// Assign display ids to classes: vowel classes first, then consonants, each
/// ordered by the inventory position of their leading member. Returns ids
/// aligned with `classes` positions. Ids are presentation only.
fn assign_ids(classes: &[ClassState], inv: &PhonemeInventory) -> Vec<String> {
    let key = |c: &ClassState| {
        let cat = match c.category {
            Category::Vowel => 0usize,
            Category::Consonant => 1,
        };
        let pos = c
            .members
            .iter()
            .filter_map(|m| inv.position(m))
            .min()
            .unwrap_or(usize::MAX);
        (cat, pos)
    };
    let mut order: Vec<usize> = (0..classes.len()).collect();
    order.sort_by_key(|&i| key(&classes[i]));
    let mut ids = vec![String::new(); classes.len()];
    for (rank, &i) in order.iter().enumerate() {
        ids[i] = format!("V{:02}", rank + 1);
    }
    ids
}

fn level_map(classes: &[ClassState], ids: &[String]) -> P2VMap {
    let mut vcs: Vec<VisemeClass> = classes
        .iter()
        .zip(ids)
        .map(|(c, id)| VisemeClass {
            id: id.clone(),
            members: c.members.clone(),
            category: Some(c.category),
        })
        .collect();
    vcs.sort_by(|a, b| a.id.cmp(&b.id));
    P2VMap::from_classes(vcs).expect("clustering emits disjoint classes")
}

/// Run the full greedy merge from the initial class count down to the last
/// legal pair. Deterministic given `(k, inv, seed)`.
pub fn build_hierarchy(
    k: &ConfusionCounts,
    inv: &PhonemeInventory,
    seed: u64,
    speaker_id: &str,
) -> Result<MapHierarchy, ClusterError> {
    for label in k.labels() {
        if !inv.contains(label) {
            return Err(ClusterError::UnknownLabel(label.clone()));
        }
    }
    // Phonemes never observed in recognition output carry no confusion
    // evidence; they are excluded here and transcode to V00 downstream.
    let mut dropped = Vec::new();
    let mut kept = Vec::new();
    for (i, label) in k.labels().iter().enumerate() {
        if k.row_sum(i) == 0 && k.col_sum(i) == 0 {
            dropped.push(label.clone());
        } else {
            kept.push(i);
        }
    }
    let m0 = kept.len();
    let mut classes: Vec<ClassState> = kept
        .iter()
        .map(|&i| {
            let label = k.labels()[i].clone();
            let category = inv.category(&label).expect("validated above");
            ClassState {
                members: vec![label],
                category,
            }
        })
        .collect();
    let vowels = classes
        .iter()
        .filter(|c| c.category == Category::Vowel)
        .count();
    if m0 < 2 || (vowels < 2 && m0 - vowels < 2) {
        return Err(ClusterError::NothingToCluster);
    }

    // Submatrix over kept labels, positions aligned with `classes`.
    let mut cells = Vec::with_capacity(m0 * m0);
    for &r in &kept {
        for &c in &kept {
            cells.push(k.get(r, c));
        }
    }
    let mut working =
        ConfusionCounts::new(kept.iter().map(|&i| k.labels()[i].clone()).collect(), cells)?;

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut maps = Vec::with_capacity(m0.saturating_sub(1));
    let mut trace = Vec::new();
    loop {
        let ids = assign_ids(&classes, inv);
        maps.push(level_map(&classes, &ids));
        working = working.relabel(ids.clone())?;

        let categories: HashMap<String, Category> = classes
            .iter()
            .zip(&ids)
            .map(|(c, id)| (id.clone(), c.category))
            .collect();
        let p = working.column_normalize();
        let pick = match best_pair(&p, &categories, &mut rng) {
            Ok(pick) => pick,
            Err(ClusterError::NoLegalPair) => break,
            Err(e) => return Err(e),
        };
        trace.push(MergeStep {
            level_before: classes.len(),
            merged_pair: (pick.a.clone(), pick.b.clone()),
            score: pick.score,
            tie_broken: pick.tie_broken,
        });

        let pa = working.position(&pick.a).expect("id present");
        let pb = working.position(&pick.b).expect("id present");
        let (lo, hi) = if pa < pb { (pa, pb) } else { (pb, pa) };
        working = working.merge_classes(&pick.a, &pick.b, "merged")?;
        let absorbed = classes.remove(hi);
        classes[lo].members.extend(absorbed.members);
        classes[lo]
            .members
            .sort_by_key(|m| inv.position(m).unwrap_or(usize::MAX));
    }

    Ok(MapHierarchy {
        speaker_id: speaker_id.to_string(),
        initial_classes: m0,
        maps,
        trace,
        seed,
        dropped,
    })
}

/// Serialize a hierarchy as a directory: one map file per level plus
/// `trace.csv` and `meta.txt`.
pub fn write_hierarchy(
    dir: &Path,
    h: &MapHierarchy,
    fold_count: usize,
) -> std::io::Result<()> {
    fs::create_dir_all(dir)?;
    for map in &h.maps {
        let m = map.classes().len();
        fs::write(dir.join(format!("map_{:02}.txt", m)), map.serialize())?;
    }
    let mut trace = String::from("level_before,class_a,class_b,q,tie_broken\n");
    for step in &h.trace {
        trace.push_str(&format!(
            "{},{},{},{:.12},{}\n",
            step.level_before, step.merged_pair.0, step.merged_pair.1, step.score, step.tie_broken
        ));
    }
    fs::write(dir.join("trace.csv"), trace)?;
    let mut meta = fs::File::create(dir.join("meta.txt"))?;
    writeln!(meta, "speaker {}", h.speaker_id)?;
    writeln!(meta, "seed {}", h.seed)?;
    writeln!(meta, "initial_classes {}", h.initial_classes)?;
    writeln!(meta, "folds {}", fold_count)?;
    writeln!(
        meta,
        "dropped {}",
        if h.dropped.is_empty() {
            "-".to_string()
        } else {
            h.dropped.join(" ")
        }
    )?;
    Ok(())
}
