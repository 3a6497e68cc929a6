//! Transcript alignment and the correctness / accuracy measures.
//!
//! Alignment is minimal-cost dynamic programming with the HTK cost
//! convention (substitution 10, deletion 7, insertion 7). Correctness is
//! `(N - D - S) / N`; accuracy additionally charges insertions,
//! `(N - D - S - I) / N`, and can go negative.

use std::collections::HashSet;

use thiserror::Error;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum ScoringError {
    #[error("duplicate utterance id {0:?}")]
    DuplicateUtterance(String),
    #[error("malformed line {line}: expected `<utt-id> <tok> ...`")]
    MalformedLine { line: usize },
    #[error("hypothesis utterance {0:?} does not appear in the reference")]
    UnknownUtterance(String),
    #[error("score undefined: reference has no tokens")]
    UndefinedScore,
}

/// Ordered utterances of whitespace tokens (words or viseme ids).
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct Transcript {
    utterances: Vec<(String, Vec<String>)>,
}

impl Transcript {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn push(&mut self, id: String, tokens: Vec<String>) -> Result<(), ScoringError> {
        if self.utterances.iter().any(|(i, _)| *i == id) {
            return Err(ScoringError::DuplicateUtterance(id));
        }
        self.utterances.push((id, tokens));
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.utterances.len()
    }

    pub fn is_empty(&self) -> bool {
        self.utterances.is_empty()
    }

    pub fn utterances(&self) -> impl Iterator<Item = (&str, &[String])> {
        self.utterances.iter().map(|(i, t)| (i.as_str(), t.as_slice()))
    }

    pub fn tokens(&self, id: &str) -> Option<&[String]> {
        self.utterances
            .iter()
            .find(|(i, _)| i == id)
            .map(|(_, t)| t.as_slice())
    }

    /// Parse either the simple line format (`<utt-id> <tok> ...`) or the HTK
    /// MLF subset (`#!MLF!#` header, `"*/id.lab"` blocks, one token per line,
    /// `.` terminator). Both yield identical transcripts for equal content.
    pub fn parse(text: &str) -> Result<Self, ScoringError> {
        if text.trim_start().starts_with("#!MLF!#") {
            Self::parse_mlf(text)
        } else {
            Self::parse_simple(text)
        }
    }

    fn parse_simple(text: &str) -> Result<Self, ScoringError> {
        let mut t = Transcript::new();
        for (i, raw) in text.lines().enumerate() {
            let content = raw.split('#').next().unwrap_or("").trim();
            if content.is_empty() {
                continue;
            }
            let mut toks = content.split_whitespace();
            let id = toks.next().unwrap().to_string();
            let tokens: Vec<String> = toks.map(str::to_string).collect();
            if tokens.is_empty() {
                return Err(ScoringError::MalformedLine { line: i + 1 });
            }
            t.push(id, tokens)?;
        }
        Ok(t)
    }

    fn parse_mlf(text: &str) -> Result<Self, ScoringError> {
        let mut t = Transcript::new();
        let mut current: Option<(String, Vec<String>)> = None;
        for (i, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line == "#!MLF!#" {
                continue;
            }
            if line.starts_with('"') {
                if current.is_some() {
                    return Err(ScoringError::MalformedLine { line: i + 1 });
                }
                let name = line.trim_matches('"');
                // "*/u1.lab" -> u1
                let stem = name
                    .rsplit('/')
                    .next()
                    .unwrap_or(name)
                    .trim_end_matches(".lab")
                    .trim_end_matches(".rec");
                current = Some((stem.to_string(), Vec::new()));
            } else if line == "." {
                let (id, tokens) = current
                    .take()
                    .ok_or(ScoringError::MalformedLine { line: i + 1 })?;
                t.push(id, tokens)?;
            } else {
                match &mut current {
                    // HTK label lines may carry times/scores; the label is the
                    // last alphabetic field for plain `word` lines we take the
                    // whole line, otherwise the third field.
                    Some((_, tokens)) => {
                        let fields: Vec<&str> = line.split_whitespace().collect();
                        let tok = if fields.len() >= 3 { fields[2] } else { fields[0] };
                        tokens.push(tok.to_string());
                    }
                    None => return Err(ScoringError::MalformedLine { line: i + 1 }),
                }
            }
        }
        if current.is_some() {
            return Err(ScoringError::MalformedLine { line: text.lines().count() });
        }
        Ok(t)
    }

    pub fn serialize(&self) -> String {
        let mut out = String::new();
        for (id, tokens) in self.utterances() {
            out.push_str(id);
            for tok in tokens {
                out.push(' ');
                out.push_str(tok);
            }
            out.push('\n');
        }
        out
    }
}

/// Alignment edit costs; all strictly positive.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct AlignCosts {
    pub sub: u32,
    pub del: u32,
    pub ins: u32,
}

impl Default for AlignCosts {
    /// The HTK convention: substitution 10, deletion 7, insertion 7.
    fn default() -> Self {
        AlignCosts {
            sub: 10,
            del: 7,
            ins: 7,
        }
    }
}

impl AlignCosts {
    pub const UNIT: AlignCosts = AlignCosts {
        sub: 1,
        del: 1,
        ins: 1,
    };
}

/// Hit / substitution / deletion / insertion counts from one alignment.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct AlignmentCounts {
    pub n: usize,
    pub h: usize,
    pub s: usize,
    pub d: usize,
    pub i: usize,
}

impl AlignmentCounts {
    pub fn add(&mut self, other: &AlignmentCounts) {
        self.n += other.n;
        self.h += other.h;
        self.s += other.s;
        self.d += other.d;
        self.i += other.i;
    }
}

/// Minimal-cost alignment of `hyp` against `ref_seq`. Counts come from one
/// optimal path; equal-cost choices prefer diagonal over deletion over
/// insertion, so results are deterministic.
pub fn align<T: PartialEq>(ref_seq: &[T], hyp: &[T], costs: AlignCosts) -> AlignmentCounts {
    assert!(costs.sub > 0 && costs.del > 0 && costs.ins > 0);
    let n = ref_seq.len();
    let m = hyp.len();
    let idx = |i: usize, j: usize| i * (m + 1) + j;
    let mut cost = vec![0u64; (n + 1) * (m + 1)];
    for i in 1..=n {
        cost[idx(i, 0)] = i as u64 * costs.del as u64;
    }
    for j in 1..=m {
        cost[idx(0, j)] = j as u64 * costs.ins as u64;
    }
    for i in 1..=n {
        for j in 1..=m {
            let diag = cost[idx(i - 1, j - 1)]
                + if ref_seq[i - 1] == hyp[j - 1] {
                    0
                } else {
                    costs.sub as u64
                };
            let del = cost[idx(i - 1, j)] + costs.del as u64;
            let ins = cost[idx(i, j - 1)] + costs.ins as u64;
            cost[idx(i, j)] = diag.min(del).min(ins);
        }
    }
    let mut counts = AlignmentCounts {
        n,
        ..Default::default()
    };
    let (mut i, mut j) = (n, m);
    while i > 0 || j > 0 {
        let here = cost[idx(i, j)];
        if i > 0 && j > 0 {
            let hit = ref_seq[i - 1] == hyp[j - 1];
            let step = if hit { 0 } else { costs.sub as u64 };
            if cost[idx(i - 1, j - 1)] + step == here {
                if hit {
                    counts.h += 1;
                } else {
                    counts.s += 1;
                }
                i -= 1;
                j -= 1;
                continue;
            }
        }
        if i > 0 && cost[idx(i - 1, j)] + costs.del as u64 == here {
            counts.d += 1;
            i -= 1;
            continue;
        }
        counts.i += 1;
        j -= 1;
    }
    debug_assert_eq!(counts.n, counts.h + counts.s + counts.d);
    counts
}

/// `C = (N - D - S) / N`
pub fn correctness(counts: &AlignmentCounts) -> Result<f64, ScoringError> {
    if counts.n == 0 {
        return Err(ScoringError::UndefinedScore);
    }
    Ok((counts.n as f64 - counts.d as f64 - counts.s as f64) / counts.n as f64)
}

/// `A = (N - D - S - I) / N`, correctness penalized by insertions.
pub fn accuracy(counts: &AlignmentCounts) -> Result<f64, ScoringError> {
    if counts.n == 0 {
        return Err(ScoringError::UndefinedScore);
    }
    Ok((counts.n as f64 - counts.d as f64 - counts.s as f64 - counts.i as f64) / counts.n as f64)
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScoreReport {
    pub counts: AlignmentCounts,
    pub correctness: f64,
    pub accuracy: f64,
    pub per_utterance: Vec<(String, AlignmentCounts)>,
}

impl ScoreReport {
    pub fn summary_line(&self) -> String {
        let c = &self.counts;
        format!(
            "N={} H={} S={} D={} I={} C={:.6} A={:.6}",
            c.n, c.h, c.s, c.d, c.i, self.correctness, self.accuracy
        )
    }

    pub fn to_csv(&self) -> String {
        let c = &self.counts;
        format!(
            "n,h,s,d,i,C,A\n{},{},{},{},{},{:.6},{:.6}\n",
            c.n, c.h, c.s, c.d, c.i, self.correctness, self.accuracy
        )
    }

    pub fn per_utterance_csv(&self) -> String {
        let mut out = String::from("utt,n,h,s,d,i\n");
        for (id, c) in &self.per_utterance {
            out.push_str(&format!("{},{},{},{},{},{}\n", id, c.n, c.h, c.s, c.d, c.i));
        }
        out
    }
}

/// Align every reference utterance against the hypothesis and pool the counts
/// before computing C and A (one global N, not a per-utterance average).
/// Missing hypothesis utterances count as empty (all deletions).
pub fn score_transcripts(
    reference: &Transcript,
    hypothesis: &Transcript,
    costs: AlignCosts,
) -> Result<ScoreReport, ScoringError> {
    let ref_ids: HashSet<&str> = reference.utterances().map(|(id, _)| id).collect();
    for (id, _) in hypothesis.utterances() {
        if !ref_ids.contains(id) {
            return Err(ScoringError::UnknownUtterance(id.to_string()));
        }
    }
    let mut pooled = AlignmentCounts::default();
    let mut per_utterance = Vec::with_capacity(reference.len());
    let empty: Vec<String> = Vec::new();
    for (id, ref_tokens) in reference.utterances() {
        let hyp_tokens = hypothesis.tokens(id).unwrap_or(&empty);
        let counts = align(ref_tokens, hyp_tokens, costs);
        pooled.add(&counts);
        per_utterance.push((id.to_string(), counts));
    }
    Ok(ScoreReport {
        correctness: correctness(&pooled)?,
        accuracy: accuracy(&pooled)?,
        counts: pooled,
        per_utterance,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn toks(s: &str) -> Vec<String> {
        s.split_whitespace().map(str::to_string).collect()
    }

    #[test]
    fn parse_simple_line() {
        let t = Transcript::parse("u1 the cat").unwrap();
        assert_eq!(t.len(), 1);
        assert_eq!(t.tokens("u1").unwrap(), &["the", "cat"]);
    }

    #[test]
    fn parse_mlf_equivalent_to_simple() {
        let simple = Transcript::parse("u1 the cat").unwrap();
        let mlf = Transcript::parse("#!MLF!#\n\"*/u1.lab\"\nthe\ncat\n.\n").unwrap();
        assert_eq!(simple, mlf);
    }

    #[test]
    fn duplicate_utterance_rejected() {
        let err = Transcript::parse("u1 a\nu1 b").unwrap_err();
        assert_eq!(err, ScoringError::DuplicateUtterance("u1".to_string()));
    }

    #[test]
    fn empty_token_line_rejected() {
        let err = Transcript::parse("u1").unwrap_err();
        assert!(matches!(err, ScoringError::MalformedLine { .. }));
    }

    #[test]
    fn align_identical() {
        let a = toks("a b c");
        let c = align(&a, &a, AlignCosts::default());
        assert_eq!((c.n, c.h, c.s, c.d, c.i), (3, 3, 0, 0, 0));
    }

    #[test]
    fn align_forced_deletion() {
        let c = align(&toks("a b c"), &toks("a c"), AlignCosts::default());
        assert_eq!((c.h, c.s, c.d, c.i), (2, 0, 1, 0));
    }

    #[test]
    fn align_empty_reference() {
        let c = align(&toks(""), &toks("x y"), AlignCosts::default());
        assert_eq!((c.n, c.i), (0, 2));
    }

    #[test]
    fn align_empty_hypothesis() {
        let c = align(&toks("x y"), &toks(""), AlignCosts::default());
        assert_eq!((c.n, c.d, c.h), (2, 2, 0));
    }

    #[test]
    fn correctness_example() {
        let c = AlignmentCounts {
            n: 10,
            h: 7,
            s: 2,
            d: 1,
            i: 0,
        };
        assert_eq!(correctness(&c).unwrap(), 0.7);
    }

    #[test]
    fn accuracy_example() {
        let c = AlignmentCounts {
            n: 10,
            h: 7,
            s: 2,
            d: 1,
            i: 1,
        };
        assert_eq!(accuracy(&c).unwrap(), 0.6);
    }

    #[test]
    fn accuracy_can_go_negative() {
        let c = AlignmentCounts {
            n: 2,
            h: 2,
            s: 0,
            d: 0,
            i: 5,
        };
        assert!(accuracy(&c).unwrap() < 0.0);
    }

    #[test]
    fn zero_reference_undefined() {
        let c = AlignmentCounts::default();
        assert_eq!(correctness(&c).unwrap_err(), ScoringError::UndefinedScore);
        assert_eq!(accuracy(&c).unwrap_err(), ScoringError::UndefinedScore);
    }

    #[test]
    fn scores_pool_counts_across_utterances() {
        let r = Transcript::parse("u1 a b c d\nu2 e f g h i j").unwrap();
        let h = Transcript::parse("u1 a b c d").unwrap(); // u2 hypothesis missing
        let report = score_transcripts(&r, &h, AlignCosts::default()).unwrap();
        assert_eq!(report.counts.n, 10);
        assert_eq!(report.counts.d, 6);
        assert!((report.correctness - 0.4).abs() < 1e-12);
    }

    #[test]
    fn unknown_hypothesis_utterance_rejected() {
        let r = Transcript::parse("u1 a").unwrap();
        let h = Transcript::parse("u2 a").unwrap();
        assert_eq!(
            score_transcripts(&r, &h, AlignCosts::default()).unwrap_err(),
            ScoringError::UnknownUtterance("u2".to_string())
        );
    }

    #[test]
    fn swapping_ref_and_hyp_swaps_d_and_i() {
        let a = toks("a b c d e");
        let b = toks("a x c");
        let fwd = align(&a, &b, AlignCosts::default());
        let rev = align(&b, &a, AlignCosts::default());
        assert_eq!(fwd.h, rev.h);
        assert_eq!(fwd.s, rev.s);
        assert_eq!(fwd.d, rev.i);
        assert_eq!(fwd.i, rev.d);
    }
}
