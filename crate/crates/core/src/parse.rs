//! Tolerant parsers for model answers.
//!
//! Answers look like Python dict literals, e.g.
//! `{'bundle 1': ['product 1','product 2']}`, `{'bundle 1':'tablet setup'}`
//! or `{'intent 1': ['Naturalness':3,'Coverage':2,'Motivation':2]}`. The
//! first `{` starts the structure; text before it and after its closing
//! brace is ignored. Single, double, curly and back quotes are accepted;
//! a quote only closes a string when followed by `:`, `,`, `]`, `}` or the
//! end of input, so apostrophes inside intents survive.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

pub type BundleLabel = u32;

const MAX_DEPTH: usize = 32;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ParseError {
    #[error("no answer structure found")]
    NoStructure,
    #[error("syntax error at byte {pos}: {message}")]
    Syntax { pos: usize, message: String },
    #[error("expected a mapping at the top level")]
    NotAMap,
    #[error("intent for bundle {0} is empty")]
    EmptyIntent(BundleLabel),
    #[error("entry {label}: {message}")]
    BadValue { label: String, message: String },
    #[error("intent {label}: missing metric {metric}")]
    MissingMetric { label: BundleLabel, metric: Metric },
    #[error("intent {label}: {metric} score {score} outside its scale")]
    OutOfScale {
        label: BundleLabel,
        metric: Metric,
        score: f64,
    },
}

/// A parsed value plus the tolerance warnings raised while reading it.
#[derive(Debug, Clone, PartialEq)]
pub struct Parsed<T> {
    pub value: T,
    pub warnings: Vec<String>,
}

/// Bundle label -> 1-based product indices.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct BundleMap(pub BTreeMap<BundleLabel, BTreeSet<usize>>);

impl BundleMap {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn insert(&mut self, label: BundleLabel, products: impl IntoIterator<Item = usize>) {
        self.0.insert(label, products.into_iter().collect());
    }

    pub fn iter(&self) -> impl Iterator<Item = (&BundleLabel, &BTreeSet<usize>)> {
        self.0.iter()
    }

    pub fn get(&self, label: BundleLabel) -> Option<&BTreeSet<usize>> {
        self.0.get(&label)
    }

    /// Bundles as a set, ignoring labels.
    pub fn set_of_sets(&self) -> BTreeSet<BTreeSet<usize>> {
        self.0.values().cloned().collect()
    }

    /// Canonical answer text, e.g. `{'bundle 1': ['product 1', 'product 2']}`.
    pub fn to_answer(&self) -> String {
        let entries: Vec<String> = self
            .0
            .iter()
            .map(|(l, ps)| {
                let items: Vec<String> = ps.iter().map(|p| format!("'product {p}'")).collect();
                format!("'bundle {l}': [{}]", items.join(", "))
            })
            .collect();
        format!("{{{}}}", entries.join(", "))
    }
}

/// Bundle label -> intent text.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct IntentMap(pub BTreeMap<BundleLabel, String>);

impl IntentMap {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn get(&self, label: BundleLabel) -> Option<&str> {
        self.0.get(&label).map(String::as_str)
    }

    pub fn insert(&mut self, label: BundleLabel, intent: impl Into<String>) {
        self.0.insert(label, intent.into());
    }

    pub fn to_answer(&self) -> String {
        let entries: Vec<String> = self
            .0
            .iter()
            .map(|(l, t)| format!("'bundle {l}': '{}'", escape(t)))
            .collect();
        format!("{{{}}}", entries.join(", "))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Metric {
    Naturalness,
    Coverage,
    Motivation,
}

impl Metric {
    pub const ALL: [Metric; 3] = [Metric::Naturalness, Metric::Coverage, Metric::Motivation];

    pub fn max_score(self) -> f64 {
        match self {
            Metric::Naturalness | Metric::Coverage => 3.0,
            Metric::Motivation => 2.0,
        }
    }

    /// Intent supervision signal type number.
    pub fn signal_type(self) -> u8 {
        match self {
            Metric::Naturalness => 1,
            Metric::Coverage => 2,
            Metric::Motivation => 3,
        }
    }
}

impl std::fmt::Display for Metric {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Metric::Naturalness => "Naturalness",
            Metric::Coverage => "Coverage",
            Metric::Motivation => "Motivation",
        })
    }
}

/// Scores on the rater scales; fractional after averaging.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RatingTriple {
    pub naturalness: f64,
    pub coverage: f64,
    pub motivation: f64,
}

impl RatingTriple {
    pub fn new(naturalness: f64, coverage: f64, motivation: f64) -> Self {
        Self {
            naturalness,
            coverage,
            motivation,
        }
    }

    pub fn get(&self, m: Metric) -> f64 {
        match m {
            Metric::Naturalness => self.naturalness,
            Metric::Coverage => self.coverage,
            Metric::Motivation => self.motivation,
        }
    }

    pub fn mean(triples: &[RatingTriple]) -> Option<RatingTriple> {
        if triples.is_empty() {
            return None;
        }
        let n = triples.len() as f64;
        let sum = |m: Metric| triples.iter().map(|t| t.get(m)).sum::<f64>() / n;
        Some(RatingTriple::new(
            sum(Metric::Naturalness),
            sum(Metric::Coverage),
            sum(Metric::Motivation),
        ))
    }
}

/// Canonical rater answer for a set of triples.
pub fn ratings_to_answer(ratings: &BTreeMap<BundleLabel, RatingTriple>) -> String {
    let entries: Vec<String> = ratings
        .iter()
        .map(|(l, r)| {
            format!(
                "'intent {l}': ['Naturalness': {}, 'Coverage': {}, 'Motivation': {}]",
                r.naturalness, r.coverage, r.motivation
            )
        })
        .collect();
    format!("{{{}}}", entries.join(", "))
}

fn escape(s: &str) -> String {
    let mut out = String::with_capacity(s.len());
    for c in s.chars() {
        if c == '\\' || is_single_quote(c) || is_double_quote(c) {
            out.push('\\');
        }
        out.push(c);
    }
    out
}

// ---------------------------------------------------------------------------
// tokenizer and value tree

#[derive(Debug, Clone, PartialEq)]
enum Value {
    Map(Vec<(String, Value)>),
    List(Vec<Value>),
    Pair(String, Box<Value>),
    Scalar(String),
}

fn is_single_quote(c: char) -> bool {
    matches!(c, '\'' | '\u{2018}' | '\u{2019}' | '`')
}

fn is_double_quote(c: char) -> bool {
    matches!(c, '"' | '\u{201c}' | '\u{201d}')
}

fn is_punct(c: char) -> bool {
    matches!(c, '{' | '}' | '[' | ']' | ':' | ',')
}

struct Parser<'a> {
    src: &'a str,
    pos: usize,
}

impl<'a> Parser<'a> {
    fn peek(&self) -> Option<char> {
        self.src[self.pos..].chars().next()
    }

    fn bump(&mut self) -> Option<char> {
        let c = self.peek()?;
        self.pos += c.len_utf8();
        Some(c)
    }

    fn skip_ws(&mut self) {
        while self.peek().is_some_and(char::is_whitespace) {
            self.bump();
        }
    }

    fn err<T>(&self, message: &str) -> Result<T, ParseError> {
        Err(ParseError::Syntax {
            pos: self.pos,
            message: message.to_owned(),
        })
    }

    fn expect(&mut self, c: char) -> Result<(), ParseError> {
        self.skip_ws();
        if self.peek() == Some(c) {
            self.bump();
            Ok(())
        } else {
            self.err(&format!("expected '{c}'"))
        }
    }

    fn value(&mut self, depth: usize) -> Result<Value, ParseError> {
        if depth > MAX_DEPTH {
            return self.err("nesting too deep");
        }
        self.skip_ws();
        match self.peek() {
            Some('{') => self.map(depth),
            Some('[') => self.list(depth),
            Some(_) => Ok(Value::Scalar(self.scalar()?)),
            None => self.err("unexpected end of input"),
        }
    }

    fn map(&mut self, depth: usize) -> Result<Value, ParseError> {
        self.expect('{')?;
        let mut entries = Vec::new();
        loop {
            self.skip_ws();
            match self.peek() {
                Some('}') => {
                    self.bump();
                    return Ok(Value::Map(entries));
                }
                Some(',') => {
                    self.bump();
                }
                Some(_) => {
                    let key = self.scalar()?;
                    self.expect(':')?;
                    let v = self.value(depth + 1)?;
                    entries.push((key, v));
                    self.skip_ws();
                    match self.peek() {
                        Some(',') | Some('}') => {}
                        _ => return self.err("expected ',' or '}'"),
                    }
                }
                None => return self.err("unterminated '{'"),
            }
        }
    }

    fn list(&mut self, depth: usize) -> Result<Value, ParseError> {
        self.expect('[')?;
        let mut items = Vec::new();
        loop {
            self.skip_ws();
            match self.peek() {
                Some(']') => {
                    self.bump();
                    return Ok(Value::List(items));
                }
                Some(',') => {
                    self.bump();
                }
                Some(_) => {
                    let v = self.value(depth + 1)?;
                    self.skip_ws();
                    let item = if self.peek() == Some(':') {
                        self.bump();
                        let rhs = self.value(depth + 1)?;
                        match v {
                            Value::Scalar(k) => Value::Pair(k, Box::new(rhs)),
                            _ => return self.err("pair key must be a scalar"),
                        }
                    } else {
                        v
                    };
                    items.push(item);
                    self.skip_ws();
                    match self.peek() {
                        Some(',') | Some(']') => {}
                        _ => return self.err("expected ',' or ']'"),
                    }
                }
                None => return self.err("unterminated '['"),
            }
        }
    }

    fn scalar(&mut self) -> Result<String, ParseError> {
        self.skip_ws();
        match self.peek() {
            Some(q) if is_single_quote(q) || is_double_quote(q) => self.quoted(is_single_quote(q)),
            Some(c) if is_punct(c) => self.err(&format!("unexpected '{c}'")),
            Some(_) => {
                let start = self.pos;
                while self.peek().is_some_and(|c| !is_punct(c)) {
                    self.bump();
                }
                Ok(self.src[start..self.pos].trim().to_owned())
            }
            None => self.err("unexpected end of input"),
        }
    }

    fn quoted(&mut self, single: bool) -> Result<String, ParseError> {
        let closes = |c: char| {
            if single {
                is_single_quote(c)
            } else {
                is_double_quote(c)
            }
        };
        self.bump();
        let mut out = String::new();
        loop {
            match self.bump() {
                None => return self.err("unterminated string"),
                Some('\\') => match self.bump() {
                    Some(c) => out.push(c),
                    None => return self.err("dangling escape"),
                },
                Some(c) if closes(c) => {
                    let rest = self.src[self.pos..].trim_start();
                    match rest.chars().next() {
                        None | Some(':' | ',' | ']' | '}') => return Ok(out),
                        Some(_) => out.push(c),
                    }
                }
                Some(c) => out.push(c),
            }
        }
    }
}

fn parse_structure(text: &str) -> Result<Value, ParseError> {
    let start = text.find('{').ok_or(ParseError::NoStructure)?;
    let mut p = Parser {
        src: text,
        pos: start,
    };
    p.value(0)
}

fn top_map(text: &str) -> Result<Vec<(String, Value)>, ParseError> {
    match parse_structure(text)? {
        Value::Map(entries) => Ok(entries),
        _ => Err(ParseError::NotAMap),
    }
}

/// First run of ASCII digits, e.g. "bundle 12" -> 12.
fn leading_number(s: &str) -> Option<u64> {
    let start = s.find(|c: char| c.is_ascii_digit())?;
    let digits: String = s[start..].chars().take_while(char::is_ascii_digit).collect();
    digits.parse().ok()
}

fn label_of(key: &str, position: usize, warnings: &mut Vec<String>) -> BundleLabel {
    match leading_number(key).and_then(|n| u32::try_from(n).ok()) {
        Some(n) => n,
        None => {
            warnings.push(format!("label {key:?} has no number; using position {position}"));
            position as BundleLabel
        }
    }
}

fn scalars(v: &Value) -> Vec<String> {
    match v {
        Value::Scalar(s) => s.split(',').map(|p| p.trim().to_owned()).collect(),
        Value::List(items) => items.iter().flat_map(scalars).collect(),
        Value::Pair(k, _) => vec![k.clone()],
        Value::Map(_) => Vec::new(),
    }
}

pub fn parse_bundle_answer(text: &str, session_length: usize) -> Result<Parsed<BundleMap>, ParseError> {
    let mut warnings = Vec::new();
    let mut map = BundleMap::new();
    for (n, (key, value)) in top_map(text)?.into_iter().enumerate() {
        let label = label_of(&key, n + 1, &mut warnings);
        let mut products = BTreeSet::new();
        for s in scalars(&value) {
            match leading_number(&s).and_then(|x| usize::try_from(x).ok()) {
                Some(i) if (1..=session_length).contains(&i) => {
                    products.insert(i);
                }
                Some(i) => warnings.push(format!(
                    "bundle {label}: product {i} out of range 1..={session_length}; dropped"
                )),
                None if s.is_empty() => {}
                None => warnings.push(format!("bundle {label}: unreadable product {s:?}; dropped")),
            }
        }
        if products.is_empty() {
            warnings.push(format!("bundle {label}: no valid products; dropped"));
            continue;
        }
        if let Some(prev) = map.0.get_mut(&label) {
            warnings.push(format!("bundle {label} listed twice; merged"));
            prev.extend(products);
        } else {
            map.0.insert(label, products);
        }
    }
    Ok(Parsed {
        value: map,
        warnings,
    })
}

pub fn parse_intent_answer(text: &str) -> Result<Parsed<IntentMap>, ParseError> {
    let mut warnings = Vec::new();
    let mut map = IntentMap::new();
    for (n, (key, value)) in top_map(text)?.into_iter().enumerate() {
        let label = label_of(&key, n + 1, &mut warnings);
        let intent = match value {
            Value::Scalar(s) => s,
            Value::List(items) if items.len() == 1 => match &items[0] {
                Value::Scalar(s) => s.clone(),
                _ => {
                    return Err(ParseError::BadValue {
                        label: key,
                        message: "intent must be text".into(),
                    })
                }
            },
            _ => {
                return Err(ParseError::BadValue {
                    label: key,
                    message: "intent must be text".into(),
                })
            }
        };
        let intent = intent.trim();
        if intent.is_empty() {
            return Err(ParseError::EmptyIntent(label));
        }
        if map.0.insert(label, intent.to_owned()).is_some() {
            warnings.push(format!("intent {label} listed twice; kept the last"));
        }
    }
    Ok(Parsed {
        value: map,
        warnings,
    })
}

fn metric_of(name: &str) -> Option<Metric> {
    match name.trim().to_ascii_lowercase().as_str() {
        "naturalness" => Some(Metric::Naturalness),
        "coverage" => Some(Metric::Coverage),
        "motivation" => Some(Metric::Motivation),
        _ => None,
    }
}

pub fn parse_rating_answer(
    text: &str,
) -> Result<Parsed<BTreeMap<BundleLabel, RatingTriple>>, ParseError> {
    let mut warnings = Vec::new();
    let mut out = BTreeMap::new();
    for (n, (key, value)) in top_map(text)?.into_iter().enumerate() {
        let label = label_of(&key, n + 1, &mut warnings);
        let pairs: Vec<(String, Value)> = match value {
            Value::List(items) => items
                .into_iter()
                .filter_map(|it| match it {
                    Value::Pair(k, v) => Some((k, *v)),
                    _ => None,
                })
                .collect(),
            Value::Map(entries) => entries,
            _ => {
                return Err(ParseError::BadValue {
                    label: key,
                    message: "expected metric:score pairs".into(),
                })
            }
        };
        let mut scores: BTreeMap<Metric, f64> = BTreeMap::new();
        for (name, v) in pairs {
            let Some(metric) = metric_of(&name) else {
                warnings.push(format!("intent {label}: unknown metric {name:?} ignored"));
                continue;
            };
            let raw = match &v {
                Value::Scalar(s) => s.trim().to_owned(),
                _ => String::new(),
            };
            let score: f64 = raw.parse().map_err(|_| ParseError::BadValue {
                label: key.clone(),
                message: format!("{metric} score {raw:?} is not a number"),
            })?;
            if !(1.0..=metric.max_score()).contains(&score) {
                return Err(ParseError::OutOfScale {
                    label,
                    metric,
                    score,
                });
            }
            scores.insert(metric, score);
        }
        let get = |m: Metric| {
            scores
                .get(&m)
                .copied()
                .ok_or(ParseError::MissingMetric { label, metric: m })
        };
        let triple = RatingTriple::new(
            get(Metric::Naturalness)?,
            get(Metric::Coverage)?,
            get(Metric::Motivation)?,
        );
        out.insert(label, triple);
    }
    Ok(Parsed {
        value: out,
        warnings,
    })
}

/// Human-readable dump of a parse tree, for debugging odd answers.
pub fn debug_structure(text: &str) -> Result<String, ParseError> {
    fn walk(v: &Value, out: &mut String, indent: usize) {
        let pad = " ".repeat(indent);
        match v {
            Value::Map(es) => {
                let _ = writeln!(out, "{pad}map");
                for (k, v) in es {
                    let _ = writeln!(out, "{pad}  {k:?} =>");
                    walk(v, out, indent + 4);
                }
            }
            Value::List(items) => {
                let _ = writeln!(out, "{pad}list");
                for it in items {
                    walk(it, out, indent + 2);
                }
            }
            Value::Pair(k, v) => {
                let _ = writeln!(out, "{pad}{k:?} :");
                walk(v, out, indent + 2);
            }
            Value::Scalar(s) => {
                let _ = writeln!(out, "{pad}{s:?}");
            }
        }
    }
    let mut out = String::new();
    walk(&parse_structure(text)?, &mut out, 0);
    Ok(out)
}
