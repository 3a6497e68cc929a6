//! Confusion matrices over phoneme or viseme classes.
//!
//! `ConfusionCounts` is the raw count matrix: entry (i, j) counts the number
//! of times reference class i was recognized as class j. Counts stay integral
//! through fold summation and class merging; `NormalizedConfusion` is the
//! column-normalized probability form the clustering score works on.

use thiserror::Error;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum ConfusionError {
    #[error("label sets do not match: {0}")]
    LabelMismatch(String),
    #[error("invalid count {value:?} at row {row}, column {col}")]
    InvalidCount {
        value: String,
        row: usize,
        col: usize,
    },
    #[error("no fold matrices given")]
    EmptyFoldSet,
    #[error("unknown label {0:?}")]
    UnknownLabel(String),
    #[error("cannot merge a class with itself ({0:?})")]
    SelfMerge(String),
    #[error("malformed CSV at line {line}: {reason}")]
    MalformedCsv { line: usize, reason: String },
}

/// Square matrix of recognition counts: rows are reference classes, columns
/// are hypothesis classes.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ConfusionCounts {
    labels: Vec<String>,
    counts: Vec<u64>, // row-major, len = labels.len()^2
}

impl ConfusionCounts {
    pub fn new(labels: Vec<String>, counts: Vec<u64>) -> Result<Self, ConfusionError> {
        let m = labels.len();
        if counts.len() != m * m {
            return Err(ConfusionError::LabelMismatch(format!(
                "{} labels but {} cells",
                m,
                counts.len()
            )));
        }
        let mut seen = labels.clone();
        seen.sort_unstable();
        seen.dedup();
        if seen.len() != m {
            return Err(ConfusionError::LabelMismatch(
                "duplicate class labels".to_string(),
            ));
        }
        Ok(ConfusionCounts { labels, counts })
    }

    pub fn zeros(labels: Vec<String>) -> Result<Self, ConfusionError> {
        let m = labels.len();
        Self::new(labels, vec![0; m * m])
    }

    pub fn size(&self) -> usize {
        self.labels.len()
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn get(&self, row: usize, col: usize) -> u64 {
        self.counts[row * self.size() + col]
    }

    pub fn add(&mut self, row: usize, col: usize, n: u64) {
        let m = self.size();
        self.counts[row * m + col] += n;
    }

    pub fn position(&self, label: &str) -> Option<usize> {
        self.labels.iter().position(|l| l == label)
    }

    /// Row-major cell slice.
    pub fn cells(&self) -> &[u64] {
        &self.counts
    }

    /// Same counts under a fresh label list.
    pub fn relabel(&self, labels: Vec<String>) -> Result<ConfusionCounts, ConfusionError> {
        Self::new(labels, self.counts.clone())
    }

    pub fn grand_total(&self) -> u64 {
        self.counts.iter().sum()
    }

    pub fn row_sum(&self, row: usize) -> u64 {
        (0..self.size()).map(|c| self.get(row, c)).sum()
    }

    pub fn col_sum(&self, col: usize) -> u64 {
        (0..self.size()).map(|r| self.get(r, col)).sum()
    }

    /// Parse the CSV interchange format: header row of hypothesis labels,
    /// first column of reference labels, integer cells. Row and header label
    /// sets must be identical and in the same order.
    pub fn parse_csv(text: &str) -> Result<Self, ConfusionError> {
        let mut lines = text
            .lines()
            .enumerate()
            .filter(|(_, l)| !l.trim().is_empty());
        let (hline, header) = lines.next().ok_or(ConfusionError::MalformedCsv {
            line: 1,
            reason: "empty input".to_string(),
        })?;
        let mut cols = header.split(',').map(str::trim);
        // Leading cell of the header is a corner placeholder and may be blank.
        cols.next();
        let col_labels: Vec<String> = cols.map(|s| s.to_lowercase()).collect();
        if col_labels.is_empty() || col_labels.iter().any(|l| l.is_empty()) {
            return Err(ConfusionError::MalformedCsv {
                line: hline + 1,
                reason: "missing hypothesis labels in header".to_string(),
            });
        }
        let m = col_labels.len();
        let mut row_labels = Vec::with_capacity(m);
        let mut counts = Vec::with_capacity(m * m);
        for (i, line) in lines {
            let mut cells = line.split(',').map(str::trim);
            let label = cells
                .next()
                .filter(|s| !s.is_empty())
                .ok_or(ConfusionError::MalformedCsv {
                    line: i + 1,
                    reason: "missing reference label".to_string(),
                })?
                .to_lowercase();
            let row_idx = row_labels.len();
            let mut ncells = 0;
            for cell in cells {
                let v: u64 = cell.parse().map_err(|_| ConfusionError::InvalidCount {
                    value: cell.to_string(),
                    row: row_idx,
                    col: ncells,
                })?;
                counts.push(v);
                ncells += 1;
            }
            if ncells != m {
                return Err(ConfusionError::MalformedCsv {
                    line: i + 1,
                    reason: format!("expected {} cells, found {}", m, ncells),
                });
            }
            row_labels.push(label);
        }
        if row_labels != col_labels {
            return Err(ConfusionError::LabelMismatch(format!(
                "row labels {:?} differ from header labels {:?}",
                row_labels, col_labels
            )));
        }
        Self::new(row_labels, counts)
    }

    /// Serialize to the CSV interchange format parsed by [`parse_csv`].
    ///
    /// [`parse_csv`]: ConfusionCounts::parse_csv
    pub fn to_csv(&self) -> String {
        let mut out = String::new();
        out.push(',');
        out.push_str(&self.labels.join(","));
        out.push('\n');
        for r in 0..self.size() {
            out.push_str(&self.labels[r]);
            for c in 0..self.size() {
                out.push(',');
                out.push_str(&self.get(r, c).to_string());
            }
            out.push('\n');
        }
        out
    }

    /// Best-effort importer for HTK `HResults -p` confusion tables. Finds the
    /// header line of hypothesis labels, then reads one row per reference
    /// label, ignoring the trailing Del column, `%c`/`%e` annotations and the
    /// final Ins row. Silence symbols (`sil`, `sp`) are dropped entirely.
    pub fn parse_hresults(text: &str) -> Result<Self, ConfusionError> {
        let mut lines = text.lines().enumerate().peekable();
        // Skip to the first line after a "Confusion Matrix" banner, if any.
        let mut header: Option<(usize, Vec<String>)> = None;
        for (i, line) in lines.by_ref() {
            let t = line.trim();
            if t.is_empty() || t.starts_with('-') || t.starts_with('=') {
                continue;
            }
            if t.contains("Confusion Matrix") {
                continue;
            }
            let t = t.split('[').next().unwrap_or("").trim();
            let toks: Vec<&str> = t.split_whitespace().collect();
            if !toks.is_empty() && toks.iter().all(|w| w.chars().all(|c| c.is_alphabetic())) {
                header = Some((
                    i,
                    toks.iter()
                        .filter(|w| !w.eq_ignore_ascii_case("del"))
                        .map(|w| w.to_lowercase())
                        .collect(),
                ));
                break;
            }
        }
        let (hline, labels) = header.ok_or(ConfusionError::MalformedCsv {
            line: 1,
            reason: "no label header found".to_string(),
        })?;
        let keep: Vec<usize> = labels
            .iter()
            .enumerate()
            .filter(|(_, l)| !crate::is_silence(l))
            .map(|(i, _)| i)
            .collect();
        let kept_labels: Vec<String> = keep.iter().map(|&i| labels[i].clone()).collect();
        let m = kept_labels.len();
        let mut counts = vec![0u64; m * m];
        let mut row = 0usize;
        for (i, line) in lines {
            let t = line.trim();
            if t.is_empty() {
                continue;
            }
            let mut toks = t.split_whitespace();
            let label = match toks.next() {
                Some(l) => l.to_lowercase(),
                None => continue,
            };
            if label.eq_ignore_ascii_case("ins") {
                break;
            }
            let cells: Vec<&str> = toks.take_while(|w| !w.starts_with('[')).collect();
            if cells.len() < labels.len() {
                return Err(ConfusionError::MalformedCsv {
                    line: i + 1,
                    reason: format!(
                        "row {:?} has {} cells, expected at least {}",
                        label,
                        cells.len(),
                        labels.len()
                    ),
                });
            }
            if crate::is_silence(&label) {
                continue;
            }
            if row >= m || label != kept_labels[row] {
                return Err(ConfusionError::LabelMismatch(format!(
                    "row label {:?} out of order near line {}",
                    label,
                    i + 1
                )));
            }
            for (k, &src) in keep.iter().enumerate() {
                let cell = cells[src];
                counts[row * m + k] = cell.parse().map_err(|_| ConfusionError::InvalidCount {
                    value: cell.to_string(),
                    row,
                    col: k,
                })?;
            }
            row += 1;
        }
        if row != m {
            return Err(ConfusionError::MalformedCsv {
                line: hline + 1,
                reason: format!("expected {} rows, found {}", m, row),
            });
        }
        Self::new(kept_labels, counts)
    }

    /// Merge classes `r` and `s` into one class named `new_label`: their rows
    /// are summed and their columns are summed. The grand total is preserved.
    pub fn merge_classes(
        &self,
        r: &str,
        s: &str,
        new_label: &str,
    ) -> Result<ConfusionCounts, ConfusionError> {
        if r == s {
            return Err(ConfusionError::SelfMerge(r.to_string()));
        }
        let ri = self
            .position(r)
            .ok_or_else(|| ConfusionError::UnknownLabel(r.to_string()))?;
        let si = self
            .position(s)
            .ok_or_else(|| ConfusionError::UnknownLabel(s.to_string()))?;
        let (lo, hi) = if ri < si { (ri, si) } else { (si, ri) };
        let m = self.size();
        // New index layout: old order with `hi` removed and `lo` renamed.
        let old_of_new: Vec<usize> = (0..m).filter(|&i| i != hi).collect();
        let n = m - 1;
        let mut labels = Vec::with_capacity(n);
        for &old in &old_of_new {
            if old == lo {
                labels.push(new_label.to_string());
            } else {
                labels.push(self.labels[old].clone());
            }
        }
        let mut counts = vec![0u64; n * n];
        for (ni, &oi) in old_of_new.iter().enumerate() {
            for (nj, &oj) in old_of_new.iter().enumerate() {
                let mut v = self.get(oi, oj);
                if oi == lo {
                    v += self.get(hi, oj);
                }
                if oj == lo {
                    v += self.get(oi, hi);
                }
                if oi == lo && oj == lo {
                    v += self.get(hi, hi);
                }
                counts[ni * n + nj] = v;
            }
        }
        ConfusionCounts::new(labels, counts)
    }

    /// Column-normalize into probabilities (conditional on the hypothesis).
    /// All-zero columns stay all-zero: a never-hypothesized class carries no
    /// evidence, and uniform smoothing would fabricate confusions.
    pub fn column_normalize(&self) -> NormalizedConfusion {
        let m = self.size();
        let mut probs = vec![0.0f64; m * m];
        for c in 0..m {
            let total = self.col_sum(c);
            if total == 0 {
                continue;
            }
            for r in 0..m {
                probs[r * m + c] = self.get(r, c) as f64 / total as f64;
            }
        }
        NormalizedConfusion {
            labels: self.labels.clone(),
            probs,
        }
    }
}

/// Element-wise sum of fold matrices. All folds must share one label list in
/// the same order.
pub fn sum_folds(folds: &[ConfusionCounts]) -> Result<ConfusionCounts, ConfusionError> {
    let first = folds.first().ok_or(ConfusionError::EmptyFoldSet)?;
    let mut total = first.clone();
    for fold in &folds[1..] {
        if fold.labels != total.labels {
            return Err(ConfusionError::LabelMismatch(format!(
                "fold labels {:?} differ from {:?}",
                fold.labels, total.labels
            )));
        }
        for (acc, v) in total.counts.iter_mut().zip(&fold.counts) {
            *acc += v;
        }
    }
    Ok(total)
}

/// Column-stochastic probability matrix: entry (i, j) is the probability that
/// the reference class was i given a hypothesis of j.
#[derive(Debug, Clone, PartialEq)]
pub struct NormalizedConfusion {
    labels: Vec<String>,
    probs: Vec<f64>,
}

impl NormalizedConfusion {
    pub fn size(&self) -> usize {
        self.labels.len()
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.probs[row * self.size() + col]
    }

    pub fn position(&self, label: &str) -> Option<usize> {
        self.labels.iter().position(|l| l == label)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn counts(labels: &[&str], cells: &[u64]) -> ConfusionCounts {
        ConfusionCounts::new(labels.iter().map(|s| s.to_string()).collect(), cells.to_vec())
            .unwrap()
    }

    #[test]
    fn parse_2x2_csv() {
        let k = ConfusionCounts::parse_csv(",a,b\na,5,1\nb,0,4\n").unwrap();
        assert_eq!(k.labels(), &["a", "b"]);
        assert_eq!(k.get(0, 0), 5);
        assert_eq!(k.get(0, 1), 1);
        assert_eq!(k.get(1, 0), 0);
        assert_eq!(k.get(1, 1), 4);
    }

    #[test]
    fn parse_label_mismatch() {
        let err = ConfusionCounts::parse_csv(",a,b\na,5,1\nc,0,4\n").unwrap_err();
        assert!(matches!(err, ConfusionError::LabelMismatch(_)));
    }

    #[test]
    fn parse_negative_cell() {
        let err = ConfusionCounts::parse_csv(",a,b\na,5,-1\nb,0,4\n").unwrap_err();
        assert!(matches!(err, ConfusionError::InvalidCount { .. }));
    }

    #[test]
    fn all_zero_matrix_parses() {
        let k = ConfusionCounts::parse_csv(",a,b\na,0,0\nb,0,0\n").unwrap();
        assert_eq!(k.grand_total(), 0);
    }

    #[test]
    fn csv_round_trip() {
        let k = counts(&["a", "b", "c"], &[1, 2, 0, 3, 4, 0, 0, 0, 9]);
        assert_eq!(ConfusionCounts::parse_csv(&k.to_csv()).unwrap(), k);
    }

    #[test]
    fn sum_two_identity_folds() {
        let i2 = counts(&["a", "b"], &[1, 0, 0, 1]);
        let total = sum_folds(&[i2.clone(), i2]).unwrap();
        assert_eq!(total.get(0, 0), 2);
        assert_eq!(total.get(1, 1), 2);
    }

    #[test]
    fn sum_ten_folds_is_scalar_multiple() {
        let m = counts(&["a", "b", "c"], &[1, 2, 3, 4, 5, 6, 7, 8, 9]);
        let total = sum_folds(&vec![m.clone(); 10]).unwrap();
        for r in 0..3 {
            for c in 0..3 {
                assert_eq!(total.get(r, c), 10 * m.get(r, c));
            }
        }
    }

    #[test]
    fn sum_rejects_shuffled_labels() {
        let a = counts(&["a", "b"], &[1, 0, 0, 1]);
        let b = counts(&["b", "a"], &[1, 0, 0, 1]);
        assert!(matches!(
            sum_folds(&[a, b]).unwrap_err(),
            ConfusionError::LabelMismatch(_)
        ));
    }

    #[test]
    fn sum_rejects_empty() {
        assert_eq!(sum_folds(&[]).unwrap_err(), ConfusionError::EmptyFoldSet);
    }

    #[test]
    fn normalize_identity() {
        let k = counts(&["a", "b"], &[7, 0, 0, 7]);
        let p = k.column_normalize();
        assert_eq!(p.get(0, 0), 1.0);
        assert_eq!(p.get(1, 1), 1.0);
        assert_eq!(p.get(0, 1), 0.0);
    }

    #[test]
    fn normalize_column() {
        // column 0 is (5, 0, 5)^T
        let k = counts(&["a", "b", "c"], &[5, 0, 0, 0, 1, 0, 5, 0, 1]);
        let p = k.column_normalize();
        assert_eq!(p.get(0, 0), 0.5);
        assert_eq!(p.get(1, 0), 0.0);
        assert_eq!(p.get(2, 0), 0.5);
    }

    #[test]
    fn normalize_zero_column() {
        let k = counts(&["a", "b"], &[3, 0, 1, 0]);
        let p = k.column_normalize();
        assert_eq!(p.get(0, 1), 0.0);
        assert_eq!(p.get(1, 1), 0.0);
        assert_eq!(p.get(0, 0), 0.75);
    }

    #[test]
    fn merge_hand_example() {
        let k = counts(&["a", "b", "c"], &[1, 2, 0, 3, 4, 0, 0, 0, 9]);
        let merged = k.merge_classes("a", "b", "ab").unwrap();
        assert_eq!(merged.labels(), &["ab", "c"]);
        assert_eq!(merged.get(0, 0), 10);
        assert_eq!(merged.get(0, 1), 0);
        assert_eq!(merged.get(1, 0), 0);
        assert_eq!(merged.get(1, 1), 9);
    }

    #[test]
    fn merge_errors() {
        let k = counts(&["a", "b"], &[1, 0, 0, 1]);
        assert!(matches!(
            k.merge_classes("a", "a", "x").unwrap_err(),
            ConfusionError::SelfMerge(_)
        ));
        assert!(matches!(
            k.merge_classes("a", "z", "x").unwrap_err(),
            ConfusionError::UnknownLabel(_)
        ));
    }

    #[test]
    fn hresults_import() {
        let text = "\
====================== HTK Results Analysis =======================
------------------------ Confusion Matrix -------------------------
       a    b    c  Del [ %c / %e]
   a   5    1    0    0 [83.3/2.1]
   b   0    4    1    0
   c   2    0    7    1
 Ins   1    0    0
";
        let k = ConfusionCounts::parse_hresults(text).unwrap();
        assert_eq!(k.labels(), &["a", "b", "c"]);
        assert_eq!(k.get(0, 0), 5);
        assert_eq!(k.get(2, 0), 2);
        assert_eq!(k.get(2, 2), 7);
    }

    #[test]
    fn hresults_drops_silence() {
        let text = "\
       a  sil    b  Del
   a   5    0    1    0
 sil   0    9    0    0
   b   2    0    4    0
 Ins   0    0    0
";
        let k = ConfusionCounts::parse_hresults(text).unwrap();
        assert_eq!(k.labels(), &["a", "b"]);
        assert_eq!(k.get(1, 0), 2);
        assert_eq!(k.get(1, 1), 4);
    }
}
