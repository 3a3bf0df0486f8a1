//! Negation and uncertainty detection over dependency graphs.
//!
//! A [`Rule`] starts at a trigger token and walks a fixed sequence of
//! labeled edge steps. Rules ending in `DISEASE` must land on the head token
//! of a concept mention; open-ended rules mark every mention inside their
//! scope.

use std::collections::{BTreeSet, HashMap, VecDeque};
use std::fmt;
use std::path::Path;

use crate::concept::ConceptMention;
use crate::error::{read_file, Error, Result};
use crate::report::{DependencyGraph, Edge};

const BUILTIN_RULES: &str = include_str!("../data/rules.tsv");

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Direction {
    /// Governor to dependent.
    Down,
    /// Dependent to governor.
    Up,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum LabelPattern {
    Any,
    Exact(String),
    OneOf(BTreeSet<String>),
}

impl LabelPattern {
    pub fn matches(&self, label: &str) -> bool {
        match self {
            LabelPattern::Any => true,
            LabelPattern::Exact(l) => l == label,
            LabelPattern::OneOf(set) => set.contains(label),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct EdgeStep {
    pub direction: Direction,
    pub label: LabelPattern,
    /// Lemmas the token reached by this step must have; empty means any.
    pub target: BTreeSet<String>,
}

impl EdgeStep {
    pub fn new(direction: Direction, label: LabelPattern) -> Self {
        Self {
            direction,
            label,
            target: BTreeSet::new(),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum RuleKind {
    Negation,
    Uncertainty,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Endpoint {
    Disease,
    Any,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Scope {
    Endpoint,
    Subtree,
    Sentence,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Rule {
    pub id: String,
    pub kind: RuleKind,
    /// Lowercase trigger words or space-separated phrases; empty matches any
    /// token.
    pub triggers: BTreeSet<String>,
    pub path: Vec<EdgeStep>,
    pub endpoint: Endpoint,
    pub scope: Scope,
}

impl Rule {
    pub fn is_lexical(&self) -> bool {
        self.path.is_empty()
    }

    fn polarity(&self) -> Polarity {
        match self.kind {
            RuleKind::Negation => Polarity::Negated,
            RuleKind::Uncertainty => Polarity::Uncertain,
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct RuleSet {
    rules: Vec<Rule>,
}

impl RuleSet {
    pub fn new(rules: Vec<Rule>) -> Self {
        Self { rules }
    }

    /// The eleven built-in negation and uncertainty rules.
    pub fn builtin() -> Self {
        parse_rules(BUILTIN_RULES).expect("builtin rules are well formed")
    }

    pub fn rules(&self) -> &[Rule] {
        &self.rules
    }

    pub fn get(&self, id: &str) -> Option<&Rule> {
        self.rules.iter().find(|r| r.id == id)
    }

    pub fn without(&self, id: &str) -> Self {
        Self {
            rules: self.rules.iter().filter(|r| r.id != id).cloned().collect(),
        }
    }
}

fn parse_step(line: usize, text: &str) -> Result<EdgeStep> {
    let (dir, rest) = text.split_once(':').ok_or_else(|| Error::ParseError {
        line,
        reason: format!("step `{text}` is not dir:label"),
    })?;
    let direction = match dir {
        "down" => Direction::Down,
        "up" => Direction::Up,
        other => {
            return Err(Error::UnknownDirection {
                line,
                direction: other.to_string(),
            })
        }
    };
    let (label, target) = match rest.split_once('@') {
        Some((l, t)) => (l, t),
        None => (rest, ""),
    };
    let labels: Vec<&str> = label.split('|').filter(|l| !l.is_empty()).collect();
    let label = match labels.as_slice() {
        [] => {
            return Err(Error::ParseError {
                line,
                reason: format!("step `{text}` has an empty label"),
            })
        }
        ["*"] => LabelPattern::Any,
        [one] => LabelPattern::Exact(one.to_string()),
        many => LabelPattern::OneOf(many.iter().map(|s| s.to_string()).collect()),
    };
    let target = target
        .split('|')
        .filter(|t| !t.is_empty())
        .map(|t| t.to_lowercase())
        .collect();
    Ok(EdgeStep {
        direction,
        label,
        target,
    })
}

/// Parses the rule file: `id<TAB>polarity<TAB>triggers<TAB>path<TAB>endpoint<TAB>scope`.
///
/// Triggers are `|`-separated (`*` for any token); the path is
/// space-separated `dir:label[@lemma|lemma]` steps or `-` for a purely
/// lexical rule.
pub fn parse_rules(text: &str) -> Result<RuleSet> {
    let mut rules = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = i + 1;
        if raw.trim().is_empty() || raw.starts_with('#') {
            continue;
        }
        let bad = |reason: String| Error::ParseError { line, reason };
        let f: Vec<&str> = raw.split('\t').collect();
        if f.len() != 6 {
            return Err(bad(format!("expected 6 fields, found {}", f.len())));
        }
        let kind = match f[1].trim() {
            "negation" => RuleKind::Negation,
            "uncertainty" => RuleKind::Uncertainty,
            other => return Err(bad(format!("unknown polarity `{other}`"))),
        };
        let triggers: BTreeSet<String> = match f[2].trim() {
            "*" | "" => BTreeSet::new(),
            t => t
                .split('|')
                .map(|s| s.split_whitespace().collect::<Vec<_>>().join(" ").to_lowercase())
                .filter(|s| !s.is_empty())
                .collect(),
        };
        let path = match f[3].trim() {
            "-" | "" => Vec::new(),
            p => p
                .split_whitespace()
                .map(|s| parse_step(line, s))
                .collect::<Result<Vec<_>>>()?,
        };
        let endpoint = match f[4].trim() {
            "DISEASE" => Endpoint::Disease,
            "ANY" | "*" => Endpoint::Any,
            other => return Err(bad(format!("unknown endpoint `{other}`"))),
        };
        let scope = match f[5].trim() {
            "endpoint" => Scope::Endpoint,
            "subtree" => Scope::Subtree,
            "sentence" => Scope::Sentence,
            other => return Err(bad(format!("unknown scope `{other}`"))),
        };
        if path.is_empty() && (triggers.is_empty() || endpoint == Endpoint::Disease) {
            return Err(bad("a lexical rule needs triggers and an ANY endpoint".into()));
        }
        if endpoint == Endpoint::Disease && scope != Scope::Endpoint {
            return Err(bad("DISEASE endpoint requires endpoint scope".into()));
        }
        rules.push(Rule {
            id: f[0].trim().to_string(),
            kind,
            triggers,
            path,
            endpoint,
            scope,
        });
    }
    Ok(RuleSet::new(rules))
}

pub fn load_rules(path: impl AsRef<Path>) -> Result<RuleSet> {
    parse_rules(&read_file(path.as_ref())?)
}

const INFLECTIONS: &[(&str, &str)] = &[
    ("suggests", "suggest"),
    ("suggested", "suggest"),
    ("suggesting", "suggest"),
    ("suggestive", "suggest"),
    ("suspects", "suspect"),
    ("suspected", "suspect"),
    ("suspecting", "suspect"),
    ("excludes", "exclude"),
    ("excluded", "exclude"),
    ("excluding", "exclude"),
    ("represents", "represent"),
    ("represented", "represent"),
    ("representing", "represent"),
    ("concerns", "concern"),
    ("concerning", "concern"),
    ("concerned", "concern"),
    ("clears", "clear"),
    ("cleared", "clear"),
    ("clearing", "clear"),
    ("disappearances", "disappearance"),
];

/// Lowercased surface with a small inflection table standing in for a
/// lemmatizer.
pub fn lemma(word: &str) -> String {
    let lower = word.to_lowercase();
    INFLECTIONS
        .iter()
        .find(|(w, _)| *w == lower)
        .map(|(_, l)| l.to_string())
        .unwrap_or(lower)
}

fn is_conj(label: &str) -> bool {
    label == "conj" || label.starts_with("conj_")
}

/// Closes the graph under conjunct propagation: whenever `h -L-> a` (with
/// `L` not a conjunction) and `a -conj_*-> b`, adds `h -L-> b`.
pub fn propagate_conjuncts(graph: &DependencyGraph) -> DependencyGraph {
    let mut edges: BTreeSet<Edge> = graph.edges().clone();
    // non-conj edges by dependent, conj edges by head
    let mut governing: HashMap<usize, Vec<(usize, String)>> = HashMap::new();
    let mut conjuncts: HashMap<usize, Vec<usize>> = HashMap::new();
    let mut queue: VecDeque<Edge> = edges.iter().cloned().collect();
    for e in &edges {
        if is_conj(&e.label) {
            conjuncts.entry(e.head).or_default().push(e.dependent);
        } else {
            governing
                .entry(e.dependent)
                .or_default()
                .push((e.head, e.label.clone()));
        }
    }
    while let Some(e) = queue.pop_front() {
        let derived: Vec<Edge> = if is_conj(&e.label) {
            governing
                .get(&e.head)
                .into_iter()
                .flatten()
                .map(|(h, l)| Edge::new(*h, e.dependent, l.clone()))
                .collect()
        } else {
            conjuncts
                .get(&e.dependent)
                .into_iter()
                .flatten()
                .map(|&b| Edge::new(e.head, b, e.label.clone()))
                .collect()
        };
        for d in derived {
            if d.head == d.dependent || edges.contains(&d) {
                continue;
            }
            governing
                .entry(d.dependent)
                .or_default()
                .push((d.head, d.label.clone()));
            edges.insert(d.clone());
            queue.push_back(d);
        }
    }
    graph.with_edges(edges)
}

fn reachable_within(graph: &DependencyGraph, from: usize, within: &BTreeSet<usize>) -> BTreeSet<usize> {
    let mut seen = BTreeSet::from([from]);
    let mut stack = vec![from];
    while let Some(n) = stack.pop() {
        for e in graph.children(n) {
            if within.contains(&e.dependent) && seen.insert(e.dependent) {
                stack.push(e.dependent);
            }
        }
    }
    seen
}

/// The span token that governs every other span token through edges inside
/// the span, or the last span token when none does.
pub fn mention_head(graph: &DependencyGraph, mention: &ConceptMention) -> usize {
    let span: BTreeSet<usize> = mention.positions().collect();
    for t in mention.positions().rev() {
        if reachable_within(graph, t, &span).len() == span.len() {
            return t;
        }
    }
    mention.end
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Polarity {
    Positive,
    Uncertain,
    Negated,
}

impl Polarity {
    pub fn as_str(self) -> &'static str {
        match self {
            Polarity::Positive => "positive",
            Polarity::Uncertain => "uncertain",
            Polarity::Negated => "negated",
        }
    }
}

impl fmt::Display for Polarity {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PolarizedMention {
    pub mention: ConceptMention,
    pub polarity: Polarity,
    pub matched_rule: Option<String>,
}

impl PolarizedMention {
    pub fn positive(mention: ConceptMention) -> Self {
        Self {
            mention,
            polarity: Polarity::Positive,
            matched_rule: None,
        }
    }

    pub fn is_positive(&self) -> bool {
        self.polarity == Polarity::Positive
    }
}

/// Start positions (last token of the trigger phrase) of `rule`'s triggers.
fn trigger_positions(graph: &DependencyGraph, rule: &Rule) -> Vec<usize> {
    let n = graph.n_tokens();
    if rule.triggers.is_empty() {
        return (1..=n).collect();
    }
    let lemmas: Vec<String> = graph.tokens().iter().map(|t| lemma(t)).collect();
    let mut out = BTreeSet::new();
    for trig in &rule.triggers {
        let words: Vec<String> = trig.split(' ').map(lemma).collect();
        if words.len() > n {
            continue;
        }
        for start in 0..=n - words.len() {
            if words.iter().zip(&lemmas[start..]).all(|(w, l)| w == l) {
                out.insert(start + words.len());
            }
        }
    }
    out.into_iter().collect()
}

fn step_targets(graph: &DependencyGraph, from: usize, step: &EdgeStep) -> Vec<usize> {
    let next: Vec<usize> = match step.direction {
        Direction::Down => graph
            .children(from)
            .filter(|e| step.label.matches(&e.label))
            .map(|e| e.dependent)
            .collect(),
        Direction::Up => graph
            .parents(from)
            .filter(|e| e.head != 0 && step.label.matches(&e.label))
            .map(|e| e.head)
            .collect(),
    };
    next.into_iter()
        .filter(|&t| step.target.is_empty() || step.target.contains(&lemma(graph.surface(t))))
        .collect()
}

/// Every complete walk of `rule.path` from every trigger, as token paths.
fn matched_walks(graph: &DependencyGraph, rule: &Rule) -> Vec<Vec<usize>> {
    let mut walks: Vec<Vec<usize>> = trigger_positions(graph, rule)
        .into_iter()
        .map(|t| vec![t])
        .collect();
    for step in &rule.path {
        walks = walks
            .into_iter()
            .flat_map(|w| {
                let last = *w.last().unwrap();
                step_targets(graph, last, step).into_iter().map(move |t| {
                    let mut w = w.clone();
                    w.push(t);
                    w
                })
            })
            .collect();
    }
    walks
}

/// Root of a subtree scope: the highest token on the walk (first one at the
/// minimum depth when up steps climb and down steps descend), lifted through
/// `amod` attachments so a post-nominal adjective phrase scopes over the
/// noun it modifies.
fn scope_root(graph: &DependencyGraph, rule: &Rule, walk: &[usize]) -> usize {
    let mut depth = 0i32;
    let mut best = (0i32, walk[0]);
    for (step, &node) in rule.path.iter().zip(&walk[1..]) {
        depth += match step.direction {
            Direction::Up => -1,
            Direction::Down => 1,
        };
        if depth < best.0 {
            best = (depth, node);
        }
    }
    let mut root = best.1;
    let mut seen = BTreeSet::from([root]);
    while let Some(e) = graph.parents(root).find(|e| e.label == "amod" && e.head != 0) {
        if !seen.insert(e.head) {
            break;
        }
        root = e.head;
    }
    root
}

fn descendants(graph: &DependencyGraph, root: usize) -> BTreeSet<usize> {
    let mut seen = BTreeSet::from([root]);
    let mut stack = vec![root];
    while let Some(n) = stack.pop() {
        for e in graph.children(n) {
            if seen.insert(e.dependent) {
                stack.push(e.dependent);
            }
        }
    }
    seen
}

/// Indices into `heads` of the mentions `rule` fires on.
fn rule_hits(graph: &DependencyGraph, rule: &Rule, heads: &[usize]) -> BTreeSet<usize> {
    let walks = matched_walks(graph, rule);
    let mut covered: BTreeSet<usize> = BTreeSet::new();
    let mut whole_sentence = false;
    for walk in &walks {
        match (rule.endpoint, rule.scope) {
            (_, Scope::Sentence) => whole_sentence = true,
            (_, Scope::Endpoint) => {
                covered.insert(*walk.last().unwrap());
            }
            (_, Scope::Subtree) => {
                covered.extend(descendants(graph, scope_root(graph, rule, walk)));
            }
        }
    }
    heads
        .iter()
        .enumerate()
        .filter(|(_, h)| whole_sentence || covered.contains(h))
        .map(|(i, _)| i)
        .collect()
}

/// Assigns a polarity to each mention of one sentence. When several rules
/// fire, negation outranks uncertainty; the reported rule is the first one in
/// rule-set order with the winning polarity.
pub fn apply_rules(
    graph: &DependencyGraph,
    mentions: &[ConceptMention],
    rules: &RuleSet,
) -> Vec<PolarizedMention> {
    let heads: Vec<usize> = mentions.iter().map(|m| mention_head(graph, m)).collect();
    let mut out: Vec<PolarizedMention> = mentions.iter().cloned().map(PolarizedMention::positive).collect();
    for rule in rules.rules() {
        let polarity = rule.polarity();
        for i in rule_hits(graph, rule, &heads) {
            if polarity > out[i].polarity {
                out[i].polarity = polarity;
                out[i].matched_rule = Some(rule.id.clone());
            }
        }
    }
    out
}
