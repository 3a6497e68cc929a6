//! Phoneme inventory: the phoneme alphabet and its vowel/consonant partition.
//!
//! The inventory is loaded from a line-oriented category file (`<label> <V|C>`,
//! `#` comments). A default 46-phoneme British English (BEEP) inventory ships
//! with the crate as [`BEEP46`].

use std::collections::HashMap;
use std::fmt;

use thiserror::Error;

/// Bundled default category file: the 46-phoneme BEEP set.
pub const BEEP46: &str = include_str!("../assets/phonemes_beep46.txt");

/// Symbols that are silence models in HTK output, not phonemes. The parser
/// rejects them so they cannot end up as clusterable classes.
const RESERVED: &[&str] = &["sil", "sp"];

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Category {
    Vowel,
    Consonant,
}

impl fmt::Display for Category {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Category::Vowel => write!(f, "V"),
            Category::Consonant => write!(f, "C"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Phoneme {
    pub label: String,
    pub category: Category,
}

/// Ordered phoneme alphabet with a label index. Immutable after construction.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PhonemeInventory {
    phonemes: Vec<Phoneme>,
    index: HashMap<String, usize>,
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum InventoryError {
    #[error("duplicate phoneme {label:?} at line {line}")]
    DuplicatePhoneme { label: String, line: usize },
    #[error("invalid category token {token:?} at line {line} (expected V or C)")]
    InvalidCategory { token: String, line: usize },
    #[error("category file contains no phonemes")]
    EmptyInventory,
    #[error("reserved silence symbol {label:?} at line {line} is not a phoneme")]
    ReservedSymbol { label: String, line: usize },
    #[error("malformed line {line}: expected `<label> <V|C>`")]
    MalformedLine { line: usize },
}

impl PhonemeInventory {
    /// Parse a category file. Labels are case-normalized to lowercase and must
    /// be unique; `sil`/`sp` are rejected as silence models.
    pub fn parse(text: &str) -> Result<Self, InventoryError> {
        let mut phonemes = Vec::new();
        let mut index = HashMap::new();
        for (i, raw) in text.lines().enumerate() {
            let line = i + 1;
            let content = raw.split('#').next().unwrap_or("").trim();
            if content.is_empty() {
                continue;
            }
            let mut parts = content.split_whitespace();
            let (label, cat) = match (parts.next(), parts.next(), parts.next()) {
                (Some(l), Some(c), None) => (l.to_lowercase(), c),
                _ => return Err(InventoryError::MalformedLine { line }),
            };
            if RESERVED.contains(&label.as_str()) {
                return Err(InventoryError::ReservedSymbol { label, line });
            }
            let category = match cat {
                "V" | "v" => Category::Vowel,
                "C" | "c" => Category::Consonant,
                other => {
                    return Err(InventoryError::InvalidCategory {
                        token: other.to_string(),
                        line,
                    })
                }
            };
            if index.contains_key(&label) {
                return Err(InventoryError::DuplicatePhoneme { label, line });
            }
            index.insert(label.clone(), phonemes.len());
            phonemes.push(Phoneme { label, category });
        }
        if phonemes.is_empty() {
            return Err(InventoryError::EmptyInventory);
        }
        Ok(PhonemeInventory { phonemes, index })
    }

    /// The default 46-phoneme BEEP inventory.
    pub fn beep46() -> Self {
        Self::parse(BEEP46).expect("bundled BEEP46 asset is valid")
    }

    pub fn len(&self) -> usize {
        self.phonemes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.phonemes.is_empty()
    }

    pub fn phonemes(&self) -> &[Phoneme] {
        &self.phonemes
    }

    pub fn position(&self, label: &str) -> Option<usize> {
        self.index.get(label).copied()
    }

    pub fn contains(&self, label: &str) -> bool {
        self.index.contains_key(label)
    }

    pub fn category(&self, label: &str) -> Option<Category> {
        self.position(label).map(|i| self.phonemes[i].category)
    }

    pub fn vowel_count(&self) -> usize {
        self.phonemes
            .iter()
            .filter(|p| p.category == Category::Vowel)
            .count()
    }

    pub fn consonant_count(&self) -> usize {
        self.len() - self.vowel_count()
    }

    /// Serialize back to category-file form. `parse(serialize(inv)) == inv`.
    pub fn serialize(&self) -> String {
        let mut out = String::new();
        for p in &self.phonemes {
            out.push_str(&p.label);
            out.push(' ');
            out.push_str(&p.category.to_string());
            out.push('\n');
        }
        out
    }
}

/// Result of checking a pronunciation dictionary against an inventory.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CoverageReport {
    /// Phonemes the dictionary uses that the inventory lacks.
    pub unknown: Vec<String>,
    /// Inventory phonemes no dictionary entry uses.
    pub unused: Vec<String>,
}

impl CoverageReport {
    pub fn is_fully_covered(&self) -> bool {
        self.unknown.is_empty()
    }
}

/// Compare the phonemes used by `dict` against `inv`. Unknown phonemes are
/// fatal under strict mode (the caller decides); unused ones are informational.
pub fn validate_dictionary_coverage(
    inv: &PhonemeInventory,
    dict: &crate::lexicon::PronunciationDictionary,
) -> CoverageReport {
    let mut used: Vec<&str> = dict
        .entries()
        .flat_map(|(_, prons)| prons.iter().flat_map(|p| p.iter().map(String::as_str)))
        .collect();
    used.sort_unstable();
    used.dedup();

    let unknown: Vec<String> = used
        .iter()
        .filter(|p| !inv.contains(p))
        .map(|p| p.to_string())
        .collect();
    let unused: Vec<String> = inv
        .phonemes
        .iter()
        .filter(|p| used.binary_search(&p.label.as_str()).is_err())
        .map(|p| p.label.clone())
        .collect();
    CoverageReport { unknown, unused }
}
