//! Report-level multi-label vectors and Normal coding.

use std::collections::{BTreeMap, HashMap};
use std::fmt;
use std::path::Path;
use std::str::FromStr;

use rayon::prelude::*;

use crate::concept::{match_concepts, merge_mention_sets, Category, ConceptMention, Lexicon};
use crate::error::{read_file, Error, Result};
use crate::finding::{Finding, LabelSet};
use crate::negation::{apply_rules, propagate_conjuncts, PolarizedMention, RuleSet};
use crate::report::{Corpus, DependencyGraph, RadiologyReport, SectionTag, SentenceRef};

/// CUIs of the "normal" and "normal size" concepts.
pub const NORMAL_CUIS: [&str; 2] = ["C0205307", "C0332506"];

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Status {
    TargetFindings,
    OtherFindingsOnly,
    Normal,
}

impl Status {
    pub fn as_str(self) -> &'static str {
        match self {
            Status::TargetFindings => "TARGET_FINDINGS",
            Status::OtherFindingsOnly => "OTHER_FINDINGS_ONLY",
            Status::Normal => "NORMAL",
        }
    }
}

impl fmt::Display for Status {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Status {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s.trim() {
            "TARGET_FINDINGS" => Ok(Status::TargetFindings),
            "OTHER_FINDINGS_ONLY" => Ok(Status::OtherFindingsOnly),
            "NORMAL" => Ok(Status::Normal),
            other => Err(format!("unknown status `{other}`")),
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct LabelConfig {
    pub label_set: LabelSet,
    /// Close dependency graphs under conjunct propagation before applying
    /// rules. Off when the input graphs are already collapsed.
    pub propagate_conjuncts: bool,
}

impl LabelConfig {
    pub fn new(label_set: LabelSet) -> Self {
        Self {
            label_set,
            propagate_conjuncts: false,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ReportLabels {
    pub report_id: String,
    pub y: Vec<u8>,
    pub status: Status,
}

impl ReportLabels {
    pub fn has(&self, label_set: LabelSet, finding: Finding) -> bool {
        label_set.index_of(finding).is_some_and(|i| self.y[i] == 1)
    }

    pub fn positives(&self, label_set: LabelSet) -> Vec<Finding> {
        label_set
            .classes()
            .iter()
            .zip(&self.y)
            .filter(|(_, &v)| v == 1)
            .map(|(&f, _)| f)
            .collect()
    }
}

/// Labels one report from its polarized mentions.
///
/// Target classes are read from Findings and Impression sentences when either
/// section exists, otherwise from the whole report. The Normal check always
/// looks at the whole report, and any positive disease mention (target or
/// not) rules Normal out.
pub fn label_report(
    report: &RadiologyReport,
    graphs: &BTreeMap<SentenceRef, DependencyGraph>,
    mentions: &[PolarizedMention],
    config: &LabelConfig,
) -> Result<ReportLabels> {
    let set = config.label_set;
    let sectioned =
        report.has_section(SectionTag::Findings) || report.has_section(SectionTag::Impression);
    let in_scope = |s: &SentenceRef| {
        !sectioned || matches!(s.section, SectionTag::Findings | SectionTag::Impression)
    };

    for m in mentions {
        let s = &m.mention.sentence;
        if in_scope(s) && !graphs.contains_key(s) {
            return Err(Error::MissingGraph(s.clone()));
        }
    }

    let mut y = vec![0u8; set.len()];
    let mut any_disease = false;
    for m in mentions.iter().filter(|m| m.is_positive()) {
        match m.mention.category {
            Category::Disease(f) => {
                any_disease = true;
                if let Some(i) = set.index_of(f) {
                    if in_scope(&m.mention.sentence) {
                        y[i] = 1;
                    }
                }
            }
            Category::OtherDisease => any_disease = true,
            Category::NormalConcept => {}
        }
    }

    // A positive "normal"/"normal size" concept only codes Normal when no
    // disease is asserted, which the no-disease criterion already covers.
    let status = if y.contains(&1) {
        Status::TargetFindings
    } else if !any_disease {
        Status::Normal
    } else {
        Status::OtherFindingsOnly
    };
    Ok(ReportLabels {
        report_id: report.report_id().to_string(),
        y,
        status,
    })
}

/// Concept matching plus negation/uncertainty for every sentence of one
/// report. Sentences without a graph keep their mentions positive.
pub fn polarize_report(
    corpus: &Corpus,
    report: &RadiologyReport,
    external: &[ConceptMention],
    lexicon: &Lexicon,
    rules: &RuleSet,
    config: &LabelConfig,
) -> Vec<PolarizedMention> {
    let internal: Vec<ConceptMention> = corpus
        .sentences(report.report_id())
        .iter()
        .flat_map(|s| match_concepts(s, lexicon))
        .collect();
    let merged = merge_mention_sets(&internal, external);

    let mut by_sentence: BTreeMap<&SentenceRef, Vec<ConceptMention>> = BTreeMap::new();
    for m in &merged {
        by_sentence.entry(&m.sentence).or_default().push(m.clone());
    }
    let mut out = Vec::with_capacity(merged.len());
    for (sref, ms) in by_sentence {
        match corpus.graphs().get(sref) {
            Some(g) if config.propagate_conjuncts => {
                out.extend(apply_rules(&propagate_conjuncts(g), &ms, rules))
            }
            Some(g) => out.extend(apply_rules(g, &ms, rules)),
            None => out.extend(ms.into_iter().map(PolarizedMention::positive)),
        }
    }
    out
}

/// Labels every report, in corpus order.
pub fn label_corpus(
    corpus: &Corpus,
    external: &[ConceptMention],
    lexicon: &Lexicon,
    rules: &RuleSet,
    config: &LabelConfig,
) -> Result<Vec<ReportLabels>> {
    let mut by_report: HashMap<&str, Vec<ConceptMention>> = HashMap::new();
    for m in external {
        by_report
            .entry(m.sentence.report_id.as_str())
            .or_default()
            .push(m.clone());
    }
    corpus
        .reports()
        .par_iter()
        .map(|report| {
            let ext = by_report
                .get(report.report_id())
                .map(Vec::as_slice)
                .unwrap_or(&[]);
            let polarized = polarize_report(corpus, report, ext, lexicon, rules, config);
            label_report(report, corpus.graphs(), &polarized, config).map_err(|e| Error::Report {
                report_id: report.report_id().to_string(),
                source: Box::new(e),
            })
        })
        .collect()
}

/// `report_id<TAB>status<TAB>Class|Class`, one row per report.
pub fn write_label_tsv(labels: &[ReportLabels], label_set: LabelSet) -> String {
    let mut out = String::new();
    for l in labels {
        let names: Vec<&str> = l.positives(label_set).iter().map(|f| f.name()).collect();
        out.push_str(&format!("{}\t{}\t{}\n", l.report_id, l.status, names.join("|")));
    }
    out
}

/// Wide CSV: `report_id` followed by one 0/1 column per class.
pub fn write_label_csv(labels: &[ReportLabels], label_set: LabelSet) -> String {
    let mut out = String::from("report_id");
    for f in label_set.classes() {
        out.push(',');
        out.push_str(f.name());
    }
    out.push('\n');
    for l in labels {
        out.push_str(&l.report_id);
        for v in &l.y {
            out.push(',');
            out.push_str(if *v == 1 { "1" } else { "0" });
        }
        out.push('\n');
    }
    out
}

pub fn parse_label_tsv(text: &str, label_set: LabelSet) -> Result<Vec<ReportLabels>> {
    let mut out = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line_no = i + 1;
        if line.trim().is_empty() || line.starts_with('#') {
            continue;
        }
        let f: Vec<&str> = line.split('\t').collect();
        if f.len() < 2 || f.len() > 3 {
            return Err(Error::row(line_no, "label row needs report_id, status, labels"));
        }
        let status: Status = f[1].parse().map_err(|e: String| Error::row(line_no, e))?;
        let mut y = vec![0u8; label_set.len()];
        for name in f.get(2).copied().unwrap_or("").split('|').filter(|s| !s.trim().is_empty()) {
            let finding: Finding = name.parse().map_err(|e: String| Error::row(line_no, e))?;
            let idx = label_set
                .index_of(finding)
                .ok_or_else(|| Error::row(line_no, format!("{finding} not in label set {label_set}")))?;
            y[idx] = 1;
        }
        if (status == Status::TargetFindings) != y.contains(&1) {
            return Err(Error::row(line_no, "status disagrees with label vector"));
        }
        out.push(ReportLabels {
            report_id: f[0].trim().to_string(),
            y,
            status,
        });
    }
    Ok(out)
}

pub fn load_label_tsv(path: impl AsRef<Path>, label_set: LabelSet) -> Result<Vec<ReportLabels>> {
    parse_label_tsv(&read_file(path.as_ref())?, label_set)
}
