//! Pronunciation dictionaries, P2V map files, viseme transcoding and
//! homophone detection.
//!
//! Dictionary format is BEEP-style: `WORD  ph ph ph`, repeated lines for a
//! word add alternate pronunciations. Map files carry one class per line,
//! `V04 f zh w`. Transcoding replaces each phoneme with its class id,
//! position for position; words whose viseme strings collide are visual
//! homophones.

use std::collections::{BTreeMap, BTreeSet, HashMap};

use thiserror::Error;

use crate::clustering::VisemeClass;
use crate::inventory::Category;

/// Class id used in lenient mode for phonemes the map does not cover.
pub const UNMAPPED_CLASS: &str = "V00";

/// Bundled example map: the published ten-viseme P2V map for Speaker 01.
pub const SP01_M10: &str = include_str!("../assets/sp01_m10.map");

#[derive(Debug, Error, PartialEq, Eq)]
pub enum LexiconError {
    #[error("word {word:?} at line {line} has an empty pronunciation")]
    EmptyPronunciation { word: String, line: usize },
    #[error("phoneme {0:?} appears in more than one viseme class")]
    OverlappingClasses(String),
    #[error("duplicate viseme class id {0:?}")]
    DuplicateClass(String),
    #[error("class {0:?} has no members")]
    EmptyClass(String),
    #[error("phoneme {phoneme:?} (word {word:?}) is not covered by the map")]
    UnmappedPhoneme { phoneme: String, word: String },
    #[error("malformed line {line}")]
    MalformedLine { line: usize },
}

/// Word to pronunciations, order-preserving. Words are uppercase, phonemes
/// lowercase (BEEP convention).
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct PronunciationDictionary {
    words: Vec<String>,
    prons: HashMap<String, Vec<Vec<String>>>,
}

impl PronunciationDictionary {
    pub fn parse(text: &str) -> Result<Self, LexiconError> {
        let mut dict = PronunciationDictionary::default();
        for (i, raw) in text.lines().enumerate() {
            let line = i + 1;
            let content = raw.split('#').next().unwrap_or("").trim();
            if content.is_empty() {
                continue;
            }
            let mut toks = content.split_whitespace();
            let word = toks.next().unwrap().to_uppercase();
            let pron: Vec<String> = toks.map(|t| t.to_lowercase()).collect();
            if pron.is_empty() {
                return Err(LexiconError::EmptyPronunciation { word, line });
            }
            dict.push(word, pron);
        }
        Ok(dict)
    }

    pub fn push(&mut self, word: String, pron: Vec<String>) {
        match self.prons.get_mut(&word) {
            Some(existing) => existing.push(pron),
            None => {
                self.prons.insert(word.clone(), vec![pron]);
                self.words.push(word);
            }
        }
    }

    pub fn len(&self) -> usize {
        self.words.len()
    }

    pub fn is_empty(&self) -> bool {
        self.words.is_empty()
    }

    pub fn pronunciations(&self, word: &str) -> Option<&[Vec<String>]> {
        self.prons.get(word).map(Vec::as_slice)
    }

    pub fn entries(&self) -> impl Iterator<Item = (&str, &[Vec<String>])> {
        self.words
            .iter()
            .map(move |w| (w.as_str(), self.prons[w].as_slice()))
    }

    pub fn serialize(&self) -> String {
        let mut out = String::new();
        for (word, prons) in self.entries() {
            for pron in prons {
                out.push_str(word);
                out.push_str("  ");
                out.push_str(&pron.join(" "));
                out.push('\n');
            }
        }
        out
    }
}

/// A partition of (part of) the phoneme inventory into viseme classes.
#[derive(Debug, Clone, PartialEq)]
pub struct P2VMap {
    classes: Vec<VisemeClass>,
    phoneme_index: HashMap<String, String>,
}

/// Normalize a class id: case-insensitive on input, emitted `V05`-style.
fn normalize_class_id(raw: &str) -> String {
    let upper = raw.to_uppercase();
    if let Some(digits) = upper.strip_prefix('V') {
        if !digits.is_empty() && digits.chars().all(|c| c.is_ascii_digit()) {
            let n: u64 = digits.parse().unwrap_or(0);
            return format!("V{:02}", n);
        }
    }
    upper
}

impl P2VMap {
    pub fn from_classes(classes: Vec<VisemeClass>) -> Result<Self, LexiconError> {
        let mut phoneme_index = HashMap::new();
        let mut ids = BTreeSet::new();
        for class in &classes {
            if class.members.is_empty() {
                return Err(LexiconError::EmptyClass(class.id.clone()));
            }
            if !ids.insert(class.id.clone()) {
                return Err(LexiconError::DuplicateClass(class.id.clone()));
            }
            for member in &class.members {
                if phoneme_index
                    .insert(member.clone(), class.id.clone())
                    .is_some()
                {
                    return Err(LexiconError::OverlappingClasses(member.clone()));
                }
            }
        }
        Ok(P2VMap {
            classes,
            phoneme_index,
        })
    }

    /// Parse map-file lines `V04 f zh w`. Slashes are presentation in the
    /// source tables and are stripped if present.
    pub fn parse(text: &str) -> Result<Self, LexiconError> {
        let mut classes = Vec::new();
        for (i, raw) in text.lines().enumerate() {
            let content = raw.split('#').next().unwrap_or("").trim();
            if content.is_empty() {
                continue;
            }
            let mut toks = content.split_whitespace();
            let id = normalize_class_id(toks.next().unwrap());
            let members: Vec<String> = toks
                .map(|t| t.trim_matches('/').to_lowercase())
                .filter(|t| !t.is_empty())
                .collect();
            if members.is_empty() {
                return Err(LexiconError::MalformedLine { line: i + 1 });
            }
            classes.push(VisemeClass {
                id,
                members,
                category: None,
            });
        }
        Self::from_classes(classes)
    }

    pub fn serialize(&self) -> String {
        let mut out = String::new();
        for class in &self.classes {
            out.push_str(&class.id);
            for member in &class.members {
                out.push(' ');
                out.push_str(member);
            }
            out.push('\n');
        }
        out
    }

    pub fn classes(&self) -> &[VisemeClass] {
        &self.classes
    }

    /// Class count (the hierarchy level M of this map).
    pub fn level(&self) -> usize {
        self.classes.len()
    }

    pub fn class_of(&self, phoneme: &str) -> Option<&str> {
        self.phoneme_index.get(phoneme).map(String::as_str)
    }

    /// Fill in class categories from an inventory, checking purity.
    /// Returns the label of the first mixed class, if any.
    pub fn check_categories(&self, inv: &crate::inventory::PhonemeInventory) -> Option<String> {
        for class in &self.classes {
            let cats: BTreeSet<Option<Category>> =
                class.members.iter().map(|m| inv.category(m)).collect();
            if cats.len() > 1 {
                return Some(class.id.clone());
            }
        }
        None
    }
}

/// Word to viseme-string images under one P2V map.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct VisemeLexicon {
    entries: Vec<(String, Vec<Vec<String>>)>,
    /// Class count of the source map.
    pub level: usize,
}

impl VisemeLexicon {
    pub fn entries(&self) -> impl Iterator<Item = (&str, &[Vec<String>])> {
        self.entries.iter().map(|(w, v)| (w.as_str(), v.as_slice()))
    }

    pub fn images(&self, word: &str) -> Option<&[Vec<String>]> {
        self.entries
            .iter()
            .find(|(w, _)| w == word)
            .map(|(_, v)| v.as_slice())
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn serialize(&self) -> String {
        let mut out = String::new();
        for (word, images) in self.entries() {
            for image in images {
                out.push_str(word);
                out.push_str("  ");
                out.push_str(&image.join(" "));
                out.push('\n');
            }
        }
        out
    }
}

/// Replace each phoneme with its class id, position for position; adjacent
/// identical visemes are kept, never collapsed. Lenient mode sends uncovered
/// phonemes to [`UNMAPPED_CLASS`].
pub fn transcode(
    dict: &PronunciationDictionary,
    map: &P2VMap,
    strict: bool,
) -> Result<VisemeLexicon, LexiconError> {
    let mut entries = Vec::with_capacity(dict.len());
    for (word, prons) in dict.entries() {
        let mut images = Vec::with_capacity(prons.len());
        for pron in prons {
            let mut image = Vec::with_capacity(pron.len());
            for phoneme in pron {
                match map.class_of(phoneme) {
                    Some(id) => image.push(id.to_string()),
                    None if strict => {
                        return Err(LexiconError::UnmappedPhoneme {
                            phoneme: phoneme.clone(),
                            word: word.to_string(),
                        })
                    }
                    None => image.push(UNMAPPED_CLASS.to_string()),
                }
            }
            images.push(image);
        }
        entries.push((word.to_string(), images));
    }
    Ok(VisemeLexicon {
        entries,
        level: map.level(),
    })
}

/// Words sharing one viseme string.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct HomophoneGroup {
    pub sequence: Vec<String>,
    pub words: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct HomophoneReport {
    pub groups: Vec<HomophoneGroup>,
    /// Word memberships summed over groups (a word counts once per shared image).
    pub total_homophonous_words: usize,
    /// Distinct words appearing in at least one group.
    pub distinct_words: usize,
}

impl HomophoneReport {
    pub fn to_csv(&self) -> String {
        let mut out = String::from("viseme_seq,words,count\n");
        for g in &self.groups {
            out.push_str(&format!(
                "{},{},{}\n",
                g.sequence.join(" "),
                g.words.join(" "),
                g.words.len()
            ));
        }
        out
    }

    pub fn to_text(&self) -> String {
        let mut out = format!(
            "{} homophone group(s), {} distinct word(s) involved\n",
            self.groups.len(),
            self.distinct_words
        );
        for g in &self.groups {
            out.push_str(&format!(
                "  [{}] <- {}\n",
                g.sequence.join(" "),
                g.words.join(", ")
            ));
        }
        out
    }
}

/// Group distinct words whose viseme strings are exactly equal (length
/// sensitive). Alternate pronunciations of one word never form a group on
/// their own.
pub fn find_homophones(lex: &VisemeLexicon) -> HomophoneReport {
    let mut by_sequence: BTreeMap<Vec<String>, BTreeSet<String>> = BTreeMap::new();
    for (word, images) in lex.entries() {
        for image in images {
            by_sequence
                .entry(image.clone())
                .or_default()
                .insert(word.to_string());
        }
    }
    let mut groups = Vec::new();
    let mut distinct = BTreeSet::new();
    let mut total = 0;
    for (sequence, words) in by_sequence {
        if words.len() < 2 {
            continue;
        }
        total += words.len();
        distinct.extend(words.iter().cloned());
        groups.push(HomophoneGroup {
            sequence,
            words: words.into_iter().collect(),
        });
    }
    HomophoneReport {
        groups,
        total_homophonous_words: total,
        distinct_words: distinct.len(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parse_single_entry() {
        let d = PronunciationDictionary::parse("PORT  p ao t").unwrap();
        assert_eq!(d.len(), 1);
        assert_eq!(
            d.pronunciations("PORT").unwrap(),
            &[vec!["p".to_string(), "ao".to_string(), "t".to_string()]]
        );
    }

    #[test]
    fn repeated_word_adds_pronunciation() {
        let d = PronunciationDictionary::parse("PORT  p ao t\nPORT  p ao r t").unwrap();
        assert_eq!(d.pronunciations("PORT").unwrap().len(), 2);
    }

    #[test]
    fn empty_pronunciation_rejected() {
        let err = PronunciationDictionary::parse("PORT").unwrap_err();
        assert!(matches!(err, LexiconError::EmptyPronunciation { .. }));
    }

    #[test]
    fn word_and_phoneme_case_normalized() {
        let d = PronunciationDictionary::parse("port  P AO T").unwrap();
        assert!(d.pronunciations("PORT").is_some());
        assert_eq!(d.pronunciations("PORT").unwrap()[0][0], "p");
    }

    #[test]
    fn sp01_map_parses_to_ten_classes() {
        let map = P2VMap::parse(SP01_M10).unwrap();
        assert_eq!(map.level(), 10);
        let v07 = map.classes().iter().find(|c| c.id == "V07").unwrap();
        assert_eq!(v07.members.len(), 10);
        assert_eq!(map.class_of("zh"), Some("V04"));
    }

    #[test]
    fn map_round_trip() {
        let map = P2VMap::parse(SP01_M10).unwrap();
        let again = P2VMap::parse(&map.serialize()).unwrap();
        assert_eq!(map, again);
    }

    #[test]
    fn map_parse_accepts_slashes_and_lowercase_ids() {
        let map = P2VMap::parse("v4 /f/ /zh/ /w/").unwrap();
        assert_eq!(map.classes()[0].id, "V04");
        assert_eq!(map.class_of("zh"), Some("V04"));
    }

    #[test]
    fn overlapping_classes_rejected() {
        let err = P2VMap::parse("V01 f\nV02 f").unwrap_err();
        assert_eq!(err, LexiconError::OverlappingClasses("f".to_string()));
    }

    #[test]
    fn duplicate_class_id_rejected() {
        let err = P2VMap::parse("V01 f\nV01 g").unwrap_err();
        assert_eq!(err, LexiconError::DuplicateClass("V01".to_string()));
    }

    #[test]
    fn port_and_bass_collide_under_sp01_map() {
        let map = P2VMap::parse(SP01_M10).unwrap();
        let dict = PronunciationDictionary::parse("PORT  p ao t\nBASS  b ae s").unwrap();
        let lex = transcode(&dict, &map, true).unwrap();
        let port = &lex.images("PORT").unwrap()[0];
        let bass = &lex.images("BASS").unwrap()[0];
        assert_eq!(port, &vec!["V05", "V09", "V07"]);
        assert_eq!(port, bass);
        let report = find_homophones(&lex);
        assert_eq!(report.groups.len(), 1);
        assert_eq!(report.groups[0].words, vec!["BASS", "PORT"]);
    }

    #[test]
    fn identity_map_lexicon_is_isomorphic() {
        let map = P2VMap::parse("V01 p\nV02 ao\nV03 t\nV04 b").unwrap();
        let dict = PronunciationDictionary::parse("PORT  p ao t\nTAB  t ao b").unwrap();
        let lex = transcode(&dict, &map, true).unwrap();
        assert_eq!(lex.images("PORT").unwrap()[0].len(), 3);
        assert!(find_homophones(&lex).groups.is_empty());
    }

    #[test]
    fn single_class_map_forces_homophones() {
        let map = P2VMap::parse("V01 p b").unwrap();
        let dict = PronunciationDictionary::parse("A  p\nB  b").unwrap();
        let lex = transcode(&dict, &map, true).unwrap();
        assert_eq!(lex.images("A").unwrap()[0], vec!["V01"]);
        assert_eq!(find_homophones(&lex).groups.len(), 1);
    }

    #[test]
    fn strict_mode_rejects_uncovered_phoneme() {
        let map = P2VMap::parse("V01 p").unwrap();
        let dict = PronunciationDictionary::parse("AT  ae t").unwrap();
        let err = transcode(&dict, &map, true).unwrap_err();
        assert!(matches!(err, LexiconError::UnmappedPhoneme { .. }));
    }

    #[test]
    fn lenient_mode_uses_v00() {
        let map = P2VMap::parse("V01 p").unwrap();
        let dict = PronunciationDictionary::parse("PAT  p ae t").unwrap();
        let lex = transcode(&dict, &map, false).unwrap();
        assert_eq!(lex.images("PAT").unwrap()[0], vec!["V01", "V00", "V00"]);
    }

    #[test]
    fn transcoding_preserves_length_no_collapsing() {
        let map = P2VMap::parse("V01 p t\nV02 ao").unwrap();
        let dict = PronunciationDictionary::parse("POTT  p ao t t").unwrap();
        let lex = transcode(&dict, &map, true).unwrap();
        assert_eq!(
            lex.images("POTT").unwrap()[0],
            vec!["V01", "V02", "V01", "V01"]
        );
    }

    #[test]
    fn alternate_pronunciations_of_one_word_do_not_group() {
        let map = P2VMap::parse("V01 p b\nV02 ao").unwrap();
        let dict = PronunciationDictionary::parse("PA  p ao\nPA  b ao").unwrap();
        let lex = transcode(&dict, &map, true).unwrap();
        assert!(find_homophones(&lex).groups.is_empty());
    }
}
