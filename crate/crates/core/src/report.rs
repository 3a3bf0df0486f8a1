//! Report, sentence and dependency-graph types plus their file formats.
//!
//! Reports are kept as an ordered list of `(section, text)` pairs. Sentences
//! are produced by a deterministic rule-based splitter and tokenizer so that
//! externally produced dependency files can be attached by
//! `(report_id, section, index)` and token count.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt;
use std::path::Path;
use std::str::FromStr;

use crate::error::{read_file, Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum SectionTag {
    Comparison,
    Indication,
    Findings,
    Impression,
    Other,
}

impl SectionTag {
    pub const ALL: [SectionTag; 5] = [
        SectionTag::Comparison,
        SectionTag::Indication,
        SectionTag::Findings,
        SectionTag::Impression,
        SectionTag::Other,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            SectionTag::Comparison => "comparison",
            SectionTag::Indication => "indication",
            SectionTag::Findings => "findings",
            SectionTag::Impression => "impression",
            SectionTag::Other => "other",
        }
    }
}

impl fmt::Display for SectionTag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for SectionTag {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        SectionTag::ALL
            .into_iter()
            .find(|t| t.as_str().eq_ignore_ascii_case(s.trim()))
            .ok_or_else(|| format!("unknown section tag `{s}`"))
    }
}

/// Header spellings recognized in free text, longest first.
const HEADERS: [(&str, SectionTag); 5] = [
    ("findings include", SectionTag::Findings),
    ("comparison", SectionTag::Comparison),
    ("indication", SectionTag::Indication),
    ("impression", SectionTag::Impression),
    ("findings", SectionTag::Findings),
];

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct RadiologyReport {
    report_id: String,
    patient_id: String,
    sections: Vec<(SectionTag, String)>,
}

impl RadiologyReport {
    pub fn new(
        report_id: impl Into<String>,
        patient_id: impl Into<String>,
        sections: Vec<(SectionTag, String)>,
    ) -> Result<Self> {
        let report_id = report_id.into();
        if report_id.trim().is_empty() {
            return Err(Error::InvalidReport("empty report id".into()));
        }
        if sections.is_empty() {
            return Err(Error::InvalidReport(format!(
                "report `{report_id}` has no sections"
            )));
        }
        let mut seen = BTreeSet::new();
        for (tag, _) in &sections {
            if !seen.insert(*tag) {
                return Err(Error::InvalidReport(format!(
                    "report `{report_id}` repeats section `{tag}`"
                )));
            }
        }
        Ok(Self {
            report_id,
            patient_id: patient_id.into(),
            sections,
        })
    }

    pub fn report_id(&self) -> &str {
        &self.report_id
    }

    pub fn patient_id(&self) -> &str {
        &self.patient_id
    }

    pub fn sections(&self) -> &[(SectionTag, String)] {
        &self.sections
    }

    pub fn section(&self, tag: SectionTag) -> Option<&str> {
        self.sections
            .iter()
            .find(|(t, _)| *t == tag)
            .map(|(_, s)| s.as_str())
    }

    pub fn has_section(&self, tag: SectionTag) -> bool {
        self.section(tag).is_some()
    }

    /// Renders the report back to header-delimited text. Text in `other`
    /// comes first without a header; every other section is written as
    /// `tag: text` on its own line.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        if let Some(other) = self.section(SectionTag::Other) {
            out.push_str(other);
            out.push('\n');
        }
        for (tag, text) in &self.sections {
            if *tag == SectionTag::Other {
                continue;
            }
            out.push_str(tag.as_str());
            out.push_str(": ");
            out.push_str(text);
            out.push('\n');
        }
        out
    }
}

fn normalize_ws(s: &str) -> String {
    s.split_whitespace().collect::<Vec<_>>().join(" ")
}

/// If a section header starts at byte `at` of `line`, returns its tag and
/// the byte offset just past the colon.
fn header_at(line: &str, at: usize) -> Option<(SectionTag, usize)> {
    let rest = &line[at..];
    for (name, tag) in HEADERS {
        let Some(head) = rest.get(..name.len()) else {
            continue;
        };
        if !head.eq_ignore_ascii_case(name) {
            continue;
        }
        let after = &rest[name.len()..];
        let trimmed = after.trim_start();
        if trimmed.starts_with(':') {
            let colon = at + name.len() + (after.len() - trimmed.len());
            return Some((tag, colon + 1));
        }
    }
    None
}

/// Splits raw report text into sections.
///
/// A header is recognized case-insensitively when followed by `:` and found
/// at the start of a line, right after a sentence terminator (`.`, `!`,
/// `?`) and whitespace, or right after another header. Text before the first header goes to
/// [`SectionTag::Other`]. Repeated headers are concatenated.
pub fn parse_report_text(report_id: &str, patient_id: &str, raw: &str) -> Result<RadiologyReport> {
    if raw.trim().is_empty() {
        return Err(Error::EmptyReport);
    }
    let mut chunks: Vec<(SectionTag, String)> = vec![(SectionTag::Other, String::new())];

    for line in raw.lines() {
        let mut start = 0;
        let mut boundary = true;
        let mut prev_terminal = false;
        for (i, ch) in line.char_indices() {
            if i < start {
                continue;
            }
            if ch.is_whitespace() {
                if prev_terminal {
                    boundary = true;
                }
                prev_terminal = false;
                continue;
            }
            if boundary {
                if let Some((tag, next)) = header_at(line, i) {
                    chunks.last_mut().unwrap().1.push_str(&line[start..i]);
                    chunks.last_mut().unwrap().1.push(' ');
                    chunks.push((tag, String::new()));
                    start = next;
                    // a header may follow another header directly
                    continue;
                }
            }
            boundary = false;
            prev_terminal = matches!(ch, '.' | '!' | '?');
        }
        let tail = line.get(start..).unwrap_or("");
        let chunk = &mut chunks.last_mut().unwrap().1;
        chunk.push_str(tail);
        chunk.push(' ');
    }

    let mut sections: Vec<(SectionTag, String)> = Vec::new();
    for (tag, text) in chunks {
        let text = normalize_ws(&text);
        if tag == SectionTag::Other && text.is_empty() {
            continue;
        }
        match sections.iter_mut().find(|(t, _)| *t == tag) {
            Some((_, existing)) => {
                if !text.is_empty() {
                    if !existing.is_empty() {
                        existing.push(' ');
                    }
                    existing.push_str(&text);
                }
            }
            None => sections.push((tag, text)),
        }
    }
    RadiologyReport::new(report_id, patient_id, sections)
}

/// Identifies a sentence by report, section and 0-based index within the
/// section.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct SentenceRef {
    pub report_id: String,
    pub section: SectionTag,
    pub index: usize,
}

impl SentenceRef {
    pub fn new(report_id: impl Into<String>, section: SectionTag, index: usize) -> Self {
        Self {
            report_id: report_id.into(),
            section,
            index,
        }
    }
}

impl fmt::Display for SentenceRef {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}/{}/{}", self.report_id, self.section, self.index)
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Token {
    pub position: usize,
    pub surface: String,
    pub lowered: String,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Sentence {
    pub id: SentenceRef,
    pub tokens: Vec<Token>,
}

impl Sentence {
    /// Builds a sentence from surface tokens, numbering them from 1.
    pub fn from_words<S: AsRef<str>>(id: SentenceRef, words: &[S]) -> Self {
        let tokens = words
            .iter()
            .enumerate()
            .map(|(i, w)| Token {
                position: i + 1,
                surface: w.as_ref().to_string(),
                lowered: w.as_ref().to_lowercase(),
            })
            .collect();
        Self { id, tokens }
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    /// Lowered surface of the token at 1-based `position`.
    pub fn lowered(&self, position: usize) -> &str {
        &self.tokens[position - 1].lowered
    }
}

const PUNCT: [char; 6] = ['/', ',', '(', ')', ':', ';'];

/// Tokenizes one sentence worth of text: whitespace split, `/ , ( ) : ;`
/// isolated, and a trailing sentence terminator emitted as its own token.
pub fn tokenize(text: &str) -> Vec<String> {
    let mut out = Vec::new();
    let words: Vec<&str> = text.split_whitespace().collect();
    let n = words.len();
    for (wi, word) in words.into_iter().enumerate() {
        let mut word = word;
        let mut terminal = None;
        if wi + 1 == n {
            if let Some(last) = word.chars().last() {
                if matches!(last, '.' | '!' | '?') && word.len() > 1 {
                    terminal = Some(last);
                    word = &word[..word.len() - 1];
                }
            }
        }
        let mut cur = String::new();
        for ch in word.chars() {
            if PUNCT.contains(&ch) {
                if !cur.is_empty() {
                    out.push(std::mem::take(&mut cur));
                }
                out.push(ch.to_string());
            } else {
                cur.push(ch);
            }
        }
        if !cur.is_empty() {
            out.push(cur);
        }
        if let Some(t) = terminal {
            out.push(t.to_string());
        }
    }
    out
}

/// Splits section text at `.`, `!` or `?` followed by whitespace or end of
/// text. A period between digits (`2.2`) never splits because it is not
/// followed by whitespace.
pub fn split_text(text: &str) -> Vec<&str> {
    let mut out = Vec::new();
    let mut start = 0;
    let mut iter = text.char_indices().peekable();
    while let Some((i, ch)) = iter.next() {
        if !matches!(ch, '.' | '!' | '?') {
            continue;
        }
        let at_break = match iter.peek() {
            None => true,
            Some((_, next)) => next.is_whitespace(),
        };
        if at_break {
            let end = i + ch.len_utf8();
            let piece = text[start..end].trim();
            if !piece.is_empty() {
                out.push(piece);
            }
            start = end;
        }
    }
    let piece = text[start..].trim();
    if !piece.is_empty() {
        out.push(piece);
    }
    out
}

pub fn split_sentences(report: &RadiologyReport) -> Vec<Sentence> {
    let mut out = Vec::new();
    for (tag, text) in report.sections() {
        for (index, piece) in split_text(text).into_iter().enumerate() {
            let words = tokenize(piece);
            let id = SentenceRef::new(report.report_id(), *tag, index);
            out.push(Sentence::from_words(id, &words));
        }
    }
    out
}

#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Edge {
    /// Governor token position; 0 is the virtual root.
    pub head: usize,
    pub dependent: usize,
    pub label: String,
}

impl Edge {
    pub fn new(head: usize, dependent: usize, label: impl Into<String>) -> Self {
        Self {
            head,
            dependent,
            label: label.into(),
        }
    }
}

/// Labeled dependency edges over one sentence's tokens. A token may have
/// several heads.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct DependencyGraph {
    pub id: SentenceRef,
    tokens: Vec<String>,
    edges: BTreeSet<Edge>,
}

impl DependencyGraph {
    pub fn new(
        id: SentenceRef,
        tokens: Vec<String>,
        edges: impl IntoIterator<Item = Edge>,
    ) -> Result<Self> {
        let n = tokens.len();
        let mut set = BTreeSet::new();
        for e in edges {
            if e.dependent == 0 || e.dependent > n || e.head > n {
                return Err(Error::InvalidEdge {
                    head: e.head,
                    dependent: e.dependent,
                    reason: "endpoint outside sentence",
                });
            }
            if e.head == e.dependent {
                return Err(Error::InvalidEdge {
                    head: e.head,
                    dependent: e.dependent,
                    reason: "self-loop",
                });
            }
            set.insert(e);
        }
        Ok(Self {
            id,
            tokens,
            edges: set,
        })
    }

    /// Convenience for fixtures: `words` plus `(head, dependent, label)`.
    pub fn from_triples(id: SentenceRef, words: &[&str], triples: &[(usize, usize, &str)]) -> Result<Self> {
        Self::new(
            id,
            words.iter().map(|w| w.to_string()).collect(),
            triples.iter().map(|&(h, d, l)| Edge::new(h, d, l)),
        )
    }

    pub fn n_tokens(&self) -> usize {
        self.tokens.len()
    }

    pub fn tokens(&self) -> &[String] {
        &self.tokens
    }

    /// Surface of the token at 1-based `position`.
    pub fn surface(&self, position: usize) -> &str {
        &self.tokens[position - 1]
    }

    pub fn edges(&self) -> &BTreeSet<Edge> {
        &self.edges
    }

    pub fn children(&self, head: usize) -> impl Iterator<Item = &Edge> {
        self.edges.iter().filter(move |e| e.head == head)
    }

    pub fn parents(&self, dependent: usize) -> impl Iterator<Item = &Edge> {
        self.edges.iter().filter(move |e| e.dependent == dependent)
    }

    pub fn with_edges(&self, edges: BTreeSet<Edge>) -> Self {
        Self {
            id: self.id.clone(),
            tokens: self.tokens.clone(),
            edges,
        }
    }
}

/// Reports plus any dependency graphs attached to their sentences.
#[derive(Clone, Debug, Default)]
pub struct Corpus {
    reports: Vec<RadiologyReport>,
    sentences: HashMap<String, Vec<Sentence>>,
    graphs: BTreeMap<SentenceRef, DependencyGraph>,
}

impl Corpus {
    pub fn new(reports: Vec<RadiologyReport>) -> Result<Self> {
        let mut sentences = HashMap::with_capacity(reports.len());
        for r in &reports {
            if sentences
                .insert(r.report_id().to_string(), split_sentences(r))
                .is_some()
            {
                return Err(Error::DuplicateReportId(r.report_id().to_string()));
            }
        }
        Ok(Self {
            reports,
            sentences,
            graphs: BTreeMap::new(),
        })
    }

    pub fn reports(&self) -> &[RadiologyReport] {
        &self.reports
    }

    pub fn report(&self, report_id: &str) -> Option<&RadiologyReport> {
        self.reports.iter().find(|r| r.report_id() == report_id)
    }

    pub fn sentences(&self, report_id: &str) -> &[Sentence] {
        self.sentences
            .get(report_id)
            .map(Vec::as_slice)
            .unwrap_or(&[])
    }

    pub fn sentence(&self, id: &SentenceRef) -> Option<&Sentence> {
        self.sentences(&id.report_id).iter().find(|s| s.id == *id)
    }

    pub fn graphs(&self) -> &BTreeMap<SentenceRef, DependencyGraph> {
        &self.graphs
    }

    /// Attaches graphs after checking each one names an existing sentence
    /// with the same token count.
    pub fn attach_graphs(
        &mut self,
        graphs: impl IntoIterator<Item = (SentenceRef, DependencyGraph)>,
    ) -> Result<()> {
        for (id, graph) in graphs {
            let sentence = self
                .sentence(&id)
                .ok_or_else(|| Error::UnknownSentence(id.clone()))?;
            if sentence.len() != graph.n_tokens() {
                return Err(Error::TokenCountMismatch(id));
            }
            self.graphs.insert(id, graph);
        }
        Ok(())
    }
}

/// Parses the corpus format: one record per line,
/// `report_id<TAB>patient_id<TAB>tag=text[<TAB>tag=text...]`.
/// Blank lines and `#` comments are skipped.
pub fn parse_corpus(text: &str) -> Result<Corpus> {
    let mut reports = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line_no = i + 1;
        if line.trim().is_empty() || line.starts_with('#') {
            continue;
        }
        let bad = |reason: &str| Error::MalformedRecord {
            line: line_no,
            reason: reason.to_string(),
        };
        let fields: Vec<&str> = line.split('\t').collect();
        if fields.len() < 3 {
            return Err(bad("expected report_id, patient_id and at least one section"));
        }
        let report_id = fields[0].trim();
        if report_id.is_empty() {
            return Err(bad("missing report_id"));
        }
        let mut sections = Vec::new();
        for field in &fields[2..] {
            let (tag, body) = field
                .split_once('=')
                .ok_or_else(|| bad("section field must be tag=text"))?;
            let tag: SectionTag = tag.parse().map_err(|e: String| bad(&e))?;
            sections.push((tag, normalize_ws(body)));
        }
        let report = RadiologyReport::new(report_id, fields[1].trim(), sections).map_err(|e| {
            bad(&e.to_string())
        })?;
        reports.push(report);
    }
    Corpus::new(reports)
}

pub fn load_corpus(path: impl AsRef<Path>) -> Result<Corpus> {
    parse_corpus(&read_file(path.as_ref())?)
}

pub fn write_corpus(reports: &[RadiologyReport]) -> String {
    let mut out = String::new();
    for r in reports {
        out.push_str(r.report_id());
        out.push('\t');
        out.push_str(r.patient_id());
        for (tag, text) in r.sections() {
            out.push('\t');
            out.push_str(tag.as_str());
            out.push('=');
            out.push_str(text);
        }
        out.push('\n');
    }
    out
}

/// Parses the dependency format.
///
/// ```text
/// #sent<TAB>report_id<TAB>section<TAB>index<TAB>n_tokens
/// position<TAB>surface<TAB>head<TAB>deprel
/// ```
///
/// `head` and `deprel` may hold parallel `|`-separated lists for tokens with
/// several governors, or `_` for none. Blocks are separated by blank lines.
pub fn parse_dependencies(text: &str) -> Result<BTreeMap<SentenceRef, DependencyGraph>> {
    struct Pending {
        id: SentenceRef,
        declared: usize,
        tokens: Vec<String>,
        edges: Vec<Edge>,
    }

    fn finish(p: Pending, out: &mut BTreeMap<SentenceRef, DependencyGraph>) -> Result<()> {
        if p.tokens.len() != p.declared {
            return Err(Error::TokenCountMismatch(p.id));
        }
        let id = p.id.clone();
        let graph = DependencyGraph::new(p.id, p.tokens, p.edges)?;
        if out.insert(id.clone(), graph).is_some() {
            return Err(Error::DuplicateSentence(id));
        }
        Ok(())
    }

    let mut out = BTreeMap::new();
    let mut pending: Option<Pending> = None;
    for (i, line) in text.lines().enumerate() {
        let line_no = i + 1;
        if line.trim().is_empty() {
            if let Some(p) = pending.take() {
                finish(p, &mut out)?;
            }
            continue;
        }
        let fields: Vec<&str> = line.split('\t').collect();
        if fields[0] == "#sent" {
            if let Some(p) = pending.take() {
                finish(p, &mut out)?;
            }
            if fields.len() != 5 {
                return Err(Error::row(line_no, "sentence header needs 5 fields"));
            }
            let section: SectionTag = fields[2].parse().map_err(|e: String| Error::row(line_no, e))?;
            let index = fields[3]
                .parse()
                .map_err(|_| Error::row(line_no, "bad sentence index"))?;
            let declared = fields[4]
                .parse()
                .map_err(|_| Error::row(line_no, "bad token count"))?;
            pending = Some(Pending {
                id: SentenceRef::new(fields[1], section, index),
                declared,
                tokens: Vec::new(),
                edges: Vec::new(),
            });
            continue;
        }
        if line.starts_with('#') {
            continue;
        }
        let p = pending
            .as_mut()
            .ok_or_else(|| Error::row(line_no, "token row before sentence header"))?;
        if fields.len() != 4 {
            return Err(Error::row(line_no, "token row needs 4 fields"));
        }
        let position: usize = fields[0]
            .parse()
            .map_err(|_| Error::row(line_no, "bad token position"))?;
        if position != p.tokens.len() + 1 || position > p.declared {
            return Err(Error::TokenCountMismatch(p.id.clone()));
        }
        p.tokens.push(fields[1].to_string());
        if fields[2] == "_" {
            continue;
        }
        let heads: Vec<&str> = fields[2].split('|').collect();
        let labels: Vec<&str> = fields[3].split('|').collect();
        if heads.len() != labels.len() {
            return Err(Error::row(line_no, "head and deprel lists differ in length"));
        }
        for (h, l) in heads.into_iter().zip(labels) {
            let head: usize = h.parse().map_err(|_| Error::BadHeadIndex(line_no))?;
            if head > p.declared || head == position {
                return Err(Error::BadHeadIndex(line_no));
            }
            p.edges.push(Edge::new(head, position, l));
        }
    }
    if let Some(p) = pending.take() {
        finish(p, &mut out)?;
    }
    Ok(out)
}

pub fn load_dependency_file(path: impl AsRef<Path>) -> Result<BTreeMap<SentenceRef, DependencyGraph>> {
    parse_dependencies(&read_file(path.as_ref())?)
}

pub fn write_dependencies<'a>(graphs: impl IntoIterator<Item = &'a DependencyGraph>) -> String {
    let mut out = String::new();
    for g in graphs {
        out.push_str(&format!(
            "#sent\t{}\t{}\t{}\t{}\n",
            g.id.report_id,
            g.id.section,
            g.id.index,
            g.n_tokens()
        ));
        for pos in 1..=g.n_tokens() {
            let parents: Vec<&Edge> = g.parents(pos).collect();
            let (heads, labels) = if parents.is_empty() {
                ("_".to_string(), "_".to_string())
            } else {
                (
                    parents.iter().map(|e| e.head.to_string()).collect::<Vec<_>>().join("|"),
                    parents.iter().map(|e| e.label.as_str()).collect::<Vec<_>>().join("|"),
                )
            };
            out.push_str(&format!("{pos}\t{}\t{heads}\t{labels}\n", g.surface(pos)));
        }
        out.push('\n');
    }
    out
}
