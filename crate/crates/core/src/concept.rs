//! CUI lexicon, token-aligned concept matching and mention-set merging.

use std::cmp::Reverse;
use std::collections::{BTreeSet, HashMap};
use std::fmt;
use std::path::Path;
use std::str::FromStr;

use crate::error::{read_file, Error, Result};
use crate::finding::Finding;
use crate::report::{tokenize, Corpus, SectionTag, Sentence, SentenceRef};

const BUILTIN_LEXICON: &str = include_str!("../data/lexicon.tsv");

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Category {
    Disease(Finding),
    NormalConcept,
    OtherDisease,
}

impl Category {
    pub fn is_disease(self) -> bool {
        !matches!(self, Category::NormalConcept)
    }
}

impl fmt::Display for Category {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Category::Disease(d) => f.write_str(d.name()),
            Category::NormalConcept => f.write_str("NORMAL_CONCEPT"),
            Category::OtherDisease => f.write_str("OTHER_DISEASE"),
        }
    }
}

impl FromStr for Category {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s.trim() {
            "NORMAL_CONCEPT" => Ok(Category::NormalConcept),
            "OTHER_DISEASE" => Ok(Category::OtherDisease),
            other => other.parse().map(Category::Disease),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum SemanticType {
    /// Disease or syndrome.
    Dsyn,
    /// Finding.
    Fndg,
}

impl FromStr for SemanticType {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s.trim() {
            "dsyn" => Ok(SemanticType::Dsyn),
            "fndg" => Ok(SemanticType::Fndg),
            other => Err(format!("unknown semantic type `{other}`")),
        }
    }
}

/// `C` followed by exactly seven digits.
pub fn is_valid_cui(cui: &str) -> bool {
    cui.len() == 8 && cui.starts_with('C') && cui[1..].bytes().all(|b| b.is_ascii_digit())
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct LexiconEntry {
    pub cui: String,
    pub phrase: Vec<String>,
    pub category: Category,
    pub semantic_type: SemanticType,
}

/// Phrase lexicon indexed by first token. Candidates under one key are kept
/// longest first, then in load order.
#[derive(Clone, Debug, Default)]
pub struct Lexicon {
    entries: Vec<LexiconEntry>,
    index: HashMap<String, Vec<usize>>,
    keys: BTreeSet<(String, Vec<String>)>,
}

impl Lexicon {
    pub fn new() -> Self {
        Self::default()
    }

    /// The seed lexicon shipped with the crate.
    pub fn builtin() -> Self {
        parse_lexicon(BUILTIN_LEXICON).expect("builtin lexicon is well formed")
    }

    pub fn push(&mut self, entry: LexiconEntry) -> Result<()> {
        if entry.phrase.is_empty() {
            return Err(Error::InvalidReport("empty lexicon phrase".into()));
        }
        if !self.keys.insert((entry.cui.clone(), entry.phrase.clone())) {
            return Err(Error::DuplicateEntry {
                cui: entry.cui,
                phrase: entry.phrase.join(" "),
            });
        }
        let idx = self.entries.len();
        let bucket = self.index.entry(entry.phrase[0].clone()).or_default();
        bucket.push(idx);
        self.entries.push(entry);
        let entries = &self.entries;
        bucket.sort_by_key(|&i| (Reverse(entries[i].phrase.len()), i));
        Ok(())
    }

    pub fn entries(&self) -> &[LexiconEntry] {
        &self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Target findings that have at least one phrase.
    pub fn covered_findings(&self) -> BTreeSet<Finding> {
        self.entries
            .iter()
            .filter_map(|e| match e.category {
                Category::Disease(f) => Some(f),
                _ => None,
            })
            .collect()
    }

    fn candidates(&self, first: &str) -> &[usize] {
        self.index.get(first).map(Vec::as_slice).unwrap_or(&[])
    }
}

/// Parses `cui<TAB>category<TAB>semantic_type<TAB>phrase` rows; `#` lines
/// and blank lines are skipped.
pub fn parse_lexicon(text: &str) -> Result<Lexicon> {
    let mut lex = Lexicon::new();
    for (i, line) in text.lines().enumerate() {
        let line_no = i + 1;
        if line.trim().is_empty() || line.starts_with('#') {
            continue;
        }
        let fields: Vec<&str> = line.split('\t').collect();
        if fields.len() != 4 {
            return Err(Error::row(line_no, "lexicon row needs 4 fields"));
        }
        let cui = fields[0].trim();
        if !is_valid_cui(cui) {
            return Err(Error::BadCui {
                line: line_no,
                cui: cui.to_string(),
            });
        }
        let category = fields[1].parse().map_err(|e: String| Error::row(line_no, e))?;
        let semantic_type = fields[2].parse().map_err(|e: String| Error::row(line_no, e))?;
        let phrase: Vec<String> = tokenize(fields[3]).into_iter().map(|t| t.to_lowercase()).collect();
        if phrase.is_empty() {
            return Err(Error::row(line_no, "empty phrase"));
        }
        lex.push(LexiconEntry {
            cui: cui.to_string(),
            phrase,
            category,
            semantic_type,
        })?;
    }
    Ok(lex)
}

pub fn load_lexicon(path: impl AsRef<Path>) -> Result<Lexicon> {
    parse_lexicon(&read_file(path.as_ref())?)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Source {
    Internal,
    External,
}

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct ConceptMention {
    pub sentence: SentenceRef,
    /// First token, 1-based inclusive.
    pub start: usize,
    /// Last token, inclusive.
    pub end: usize,
    pub cui: String,
    pub category: Category,
    pub source: Source,
}

impl ConceptMention {
    pub fn len(&self) -> usize {
        self.end + 1 - self.start
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn overlaps(&self, other: &ConceptMention) -> bool {
        self.sentence == other.sentence && self.start <= other.end && other.start <= self.end
    }

    pub fn positions(&self) -> std::ops::RangeInclusive<usize> {
        self.start..=self.end
    }
}

/// Greedy left-to-right, longest-phrase-first matching on lowered tokens.
pub fn match_concepts(sentence: &Sentence, lexicon: &Lexicon) -> Vec<ConceptMention> {
    let toks: Vec<&str> = sentence.tokens.iter().map(|t| t.lowered.as_str()).collect();
    let mut out = Vec::new();
    let mut i = 0;
    while i < toks.len() {
        let hit = lexicon.candidates(toks[i]).iter().find(|&&e| {
            let phrase = &lexicon.entries[e].phrase;
            toks.len() - i >= phrase.len() && phrase.iter().zip(&toks[i..]).all(|(p, t)| p == t)
        });
        match hit {
            Some(&e) => {
                let entry = &lexicon.entries[e];
                let len = entry.phrase.len();
                out.push(ConceptMention {
                    sentence: sentence.id.clone(),
                    start: i + 1,
                    end: i + len,
                    cui: entry.cui.clone(),
                    category: entry.category,
                    source: Source::Internal,
                });
                i += len;
            }
            None => i += 1,
        }
    }
    out
}

/// Union of two mention sets.
///
/// Exact duplicates (same sentence, span and CUI) collapse, preferring the
/// internal copy. Overlapping mentions of one category keep the longer span,
/// then the earlier start, then the smaller CUI, so the result does not
/// depend on argument order. Output is sorted by sentence and span.
pub fn merge_mention_sets(a: &[ConceptMention], b: &[ConceptMention]) -> Vec<ConceptMention> {
    let mut all: Vec<&ConceptMention> = a.iter().chain(b).collect();
    all.sort_by(|x, y| {
        (&x.sentence, x.category, Reverse(x.len()), x.start, &x.cui, x.source).cmp(&(
            &y.sentence,
            y.category,
            Reverse(y.len()),
            y.start,
            &y.cui,
            y.source,
        ))
    });
    let mut kept: Vec<ConceptMention> = Vec::new();
    for m in all {
        let clash = kept
            .iter()
            .rev()
            .take_while(|k| k.sentence == m.sentence && k.category == m.category)
            .any(|k| k.overlaps(m));
        if !clash {
            kept.push(m.clone());
        }
    }
    kept.sort_by(|x, y| {
        (&x.sentence, x.start, x.end, &x.cui).cmp(&(&y.sentence, y.start, y.end, &y.cui))
    });
    kept
}

/// Parses `report_id<TAB>section<TAB>sentence_index<TAB>start<TAB>end<TAB>cui<TAB>category`.
pub fn parse_external_mentions(text: &str) -> Result<Vec<ConceptMention>> {
    let mut out = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line_no = i + 1;
        if line.trim().is_empty() || line.starts_with('#') {
            continue;
        }
        let f: Vec<&str> = line.split('\t').collect();
        if f.len() != 7 {
            return Err(Error::row(line_no, "mention row needs 7 fields"));
        }
        let num = |s: &str, what: &str| -> Result<usize> {
            s.trim()
                .parse()
                .map_err(|_| Error::row(line_no, format!("bad {what}")))
        };
        let section: SectionTag = f[1].parse().map_err(|e: String| Error::row(line_no, e))?;
        let index = num(f[2], "sentence index")?;
        let start = num(f[3], "start")?;
        let end = num(f[4], "end")?;
        if start == 0 || end < start {
            return Err(Error::row(line_no, "span must satisfy 1 <= start <= end"));
        }
        let cui = f[5].trim();
        if !is_valid_cui(cui) {
            return Err(Error::row(line_no, format!("bad CUI `{cui}`")));
        }
        let category = f[6].parse().map_err(|e: String| Error::row(line_no, e))?;
        out.push(ConceptMention {
            sentence: SentenceRef::new(f[0].trim(), section, index),
            start,
            end,
            cui: cui.to_string(),
            category,
            source: Source::External,
        });
    }
    Ok(out)
}

pub fn load_external_mentions(path: impl AsRef<Path>) -> Result<Vec<ConceptMention>> {
    parse_external_mentions(&read_file(path.as_ref())?)
}

/// Checks every mention span against the corpus sentences it names.
pub fn validate_mentions(corpus: &Corpus, mentions: &[ConceptMention]) -> Result<()> {
    for m in mentions {
        let ok = corpus
            .sentence(&m.sentence)
            .is_some_and(|s| m.start >= 1 && m.end <= s.len() && m.start <= m.end);
        if !ok {
            return Err(Error::SpanOutOfRange {
                sentence: m.sentence.clone(),
                start: m.start,
                end: m.end,
            });
        }
    }
    Ok(())
}
