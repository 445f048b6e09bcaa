//! Prompt templates.
//!
//! Each template is a text file under `templates/`: a first line
//! `placeholders: a, b` naming the required bindings, then the body. Bodies
//! use straight quotes throughout. Markers look like `{name}`; any other
//! brace text (the answer-format examples) is left alone.

use std::collections::BTreeMap;
use std::fmt;
use std::path::Path;

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TemplateId {
    System,
    InitialBundles,
    InitialIntents,
    SelfCorrectBundles,
    SelfCorrectIntents,
    BundleFeedback,
    IntentFeedback,
    Rules,
    Rater,
    TargetInference,
    FormatReminder,
}

impl TemplateId {
    pub const ALL: [TemplateId; 11] = [
        TemplateId::System,
        TemplateId::InitialBundles,
        TemplateId::InitialIntents,
        TemplateId::SelfCorrectBundles,
        TemplateId::SelfCorrectIntents,
        TemplateId::BundleFeedback,
        TemplateId::IntentFeedback,
        TemplateId::Rules,
        TemplateId::Rater,
        TemplateId::TargetInference,
        TemplateId::FormatReminder,
    ];

    pub fn name(self) -> &'static str {
        match self {
            TemplateId::System => "system",
            TemplateId::InitialBundles => "initial_bundles",
            TemplateId::InitialIntents => "initial_intents",
            TemplateId::SelfCorrectBundles => "self_correct_bundles",
            TemplateId::SelfCorrectIntents => "self_correct_intents",
            TemplateId::BundleFeedback => "bundle_feedback",
            TemplateId::IntentFeedback => "intent_feedback",
            TemplateId::Rules => "rules",
            TemplateId::Rater => "rater",
            TemplateId::TargetInference => "target_inference",
            TemplateId::FormatReminder => "format_reminder",
        }
    }

    pub fn from_name(name: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|t| t.name() == name)
    }

    fn builtin(self) -> &'static str {
        match self {
            TemplateId::System => include_str!("../templates/system.txt"),
            TemplateId::InitialBundles => include_str!("../templates/initial_bundles.txt"),
            TemplateId::InitialIntents => include_str!("../templates/initial_intents.txt"),
            TemplateId::SelfCorrectBundles => include_str!("../templates/self_correct_bundles.txt"),
            TemplateId::SelfCorrectIntents => include_str!("../templates/self_correct_intents.txt"),
            TemplateId::BundleFeedback => include_str!("../templates/bundle_feedback.txt"),
            TemplateId::IntentFeedback => include_str!("../templates/intent_feedback.txt"),
            TemplateId::Rules => include_str!("../templates/rules.txt"),
            TemplateId::Rater => include_str!("../templates/rater.txt"),
            TemplateId::TargetInference => include_str!("../templates/target_inference.txt"),
            TemplateId::FormatReminder => include_str!("../templates/format_reminder.txt"),
        }
    }
}

impl fmt::Display for TemplateId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum PromptError {
    #[error("template {template}: missing binding {{{placeholder}}}")]
    MissingBinding {
        template: TemplateId,
        placeholder: String,
    },
    #[error("template {template}: binding {{{placeholder}}} is empty")]
    EmptyBinding {
        template: TemplateId,
        placeholder: String,
    },
    #[error("unknown template {0}")]
    UnknownTemplate(String),
    #[error("template {0}: first line must be `placeholders: ...`")]
    BadFrontMatter(String),
    #[error("template {template}: body does not use declared placeholder {{{placeholder}}}")]
    UnusedPlaceholder {
        template: String,
        placeholder: String,
    },
    #[error("reading template: {0}")]
    Io(String),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PromptTemplate {
    pub id: TemplateId,
    pub placeholders: Vec<String>,
    pub body: String,
}

impl PromptTemplate {
    pub fn parse(id: TemplateId, text: &str) -> Result<Self, PromptError> {
        let (head, body) = text.split_once('\n').unwrap_or((text, ""));
        let list = head
            .strip_prefix("placeholders:")
            .ok_or_else(|| PromptError::BadFrontMatter(id.name().into()))?;
        let placeholders: Vec<String> = list
            .split(',')
            .map(str::trim)
            .filter(|s| !s.is_empty())
            .map(str::to_owned)
            .collect();
        let body = body.strip_suffix('\n').unwrap_or(body).to_owned();
        for p in &placeholders {
            if !body.contains(&format!("{{{p}}}")) {
                return Err(PromptError::UnusedPlaceholder {
                    template: id.name().into(),
                    placeholder: p.clone(),
                });
            }
        }
        Ok(Self {
            id,
            placeholders,
            body,
        })
    }

    /// Single-pass substitution, so bound values are never re-scanned.
    pub fn render(&self, bindings: &Bindings) -> Result<String, PromptError> {
        for p in &self.placeholders {
            match bindings.0.get(p.as_str()) {
                None => {
                    return Err(PromptError::MissingBinding {
                        template: self.id,
                        placeholder: p.clone(),
                    })
                }
                Some(v) if v.trim().is_empty() => {
                    return Err(PromptError::EmptyBinding {
                        template: self.id,
                        placeholder: p.clone(),
                    })
                }
                _ => {}
            }
        }
        let mut out = String::with_capacity(self.body.len() + 256);
        let mut rest = self.body.as_str();
        'scan: while let Some(open) = rest.find('{') {
            for p in &self.placeholders {
                let marker = format!("{{{p}}}");
                if rest[open..].starts_with(&marker) {
                    out.push_str(&rest[..open]);
                    out.push_str(&bindings.0[p.as_str()]);
                    rest = &rest[open + marker.len()..];
                    continue 'scan;
                }
            }
            out.push_str(&rest[..=open]);
            rest = &rest[open + 1..];
        }
        out.push_str(rest);
        Ok(out)
    }
}

#[derive(Debug, Clone, Default)]
pub struct Bindings(BTreeMap<String, String>);

impl Bindings {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn with(mut self, key: &str, value: impl Into<String>) -> Self {
        self.0.insert(key.to_owned(), value.into());
        self
    }
}

/// Renders `product N: <title>` lines, numbering from 1.
pub fn product_lines<S: AsRef<str>>(titles: &[S]) -> String {
    numbered_lines(titles.iter().enumerate().map(|(n, t)| (n + 1, t.as_ref())))
}

/// Renders `product N: <title>` lines with explicit positions.
pub fn numbered_lines<'a>(entries: impl IntoIterator<Item = (usize, &'a str)>) -> String {
    entries
        .into_iter()
        .map(|(n, t)| format!("product {n}: {t}"))
        .collect::<Vec<_>>()
        .join("\n")
}

/// Immutable set of templates.
#[derive(Debug, Clone)]
pub struct PromptRegistry {
    templates: BTreeMap<TemplateId, PromptTemplate>,
}

impl Default for PromptRegistry {
    fn default() -> Self {
        Self::builtin()
    }
}

impl PromptRegistry {
    pub fn builtin() -> Self {
        let templates = TemplateId::ALL
            .into_iter()
            .map(|id| {
                let t = PromptTemplate::parse(id, id.builtin()).expect("builtin template is valid");
                (id, t)
            })
            .collect();
        Self { templates }
    }

    /// Builtins overridden by any `<name>.txt` present in `dir`.
    pub fn with_overrides(dir: &Path) -> Result<Self, PromptError> {
        let mut reg = Self::builtin();
        for id in TemplateId::ALL {
            let path = dir.join(format!("{}.txt", id.name()));
            if path.exists() {
                let text =
                    std::fs::read_to_string(&path).map_err(|e| PromptError::Io(e.to_string()))?;
                reg.templates.insert(id, PromptTemplate::parse(id, &text)?);
            }
        }
        Ok(reg)
    }

    pub fn template(&self, id: TemplateId) -> &PromptTemplate {
        &self.templates[&id]
    }

    pub fn render(&self, id: TemplateId, bindings: &Bindings) -> Result<String, PromptError> {
        self.template(id).render(bindings)
    }

    pub fn render_named(&self, name: &str, bindings: &Bindings) -> Result<String, PromptError> {
        let id = TemplateId::from_name(name).ok_or_else(|| PromptError::UnknownTemplate(name.into()))?;
        self.render(id, bindings)
    }

    pub fn fixed(&self, id: TemplateId) -> String {
        self.render(id, &Bindings::new())
            .expect("template without placeholders")
    }

    pub fn initial_bundles<S: AsRef<str>>(&self, titles: &[S]) -> Result<String, PromptError> {
        self.render(
            TemplateId::InitialBundles,
            &Bindings::new().with("products", product_lines(titles)),
        )
    }

    pub fn target_inference<S: AsRef<str>>(&self, titles: &[S]) -> Result<String, PromptError> {
        self.render(
            TemplateId::TargetInference,
            &Bindings::new().with("products", product_lines(titles)),
        )
    }

    pub fn bundle_feedback(&self, tips: &str) -> Result<String, PromptError> {
        self.render(TemplateId::BundleFeedback, &Bindings::new().with("tips", tips))
    }

    pub fn intent_feedback(&self, tips: &str) -> Result<String, PromptError> {
        self.render(TemplateId::IntentFeedback, &Bindings::new().with("tips", tips))
    }

    /// Rater prompt; `products` are `(session position, title)` pairs and
    /// the two intents are presented as intent 1 and intent 2.
    pub fn rater(
        &self,
        products: &[(usize, &str)],
        first_intent: &str,
        second_intent: &str,
    ) -> Result<String, PromptError> {
        let intents = format!("intent 1: {first_intent}\nintent 2: {second_intent}");
        self.render(
            TemplateId::Rater,
            &Bindings::new()
                .with("bundles_block", numbered_lines(products.iter().copied()))
                .with("intents_block", intents),
        )
    }
}
