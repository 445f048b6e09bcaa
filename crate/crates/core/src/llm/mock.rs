use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::{ChatProvider, ChatRequest, LlmError, ProviderError};

/// One scripted answer. `tag` matches the step tag exactly; a single `*`
/// in it matches any run of characters (`bundle_feedback_round_*`,
/// `*intents`). `session` matches the conversation subject and
/// `contains` is a substring test on the newest user message.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MockRule {
    pub tag: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub session: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub contains: Option<String>,
    /// Answers cycled by the request's repetition index.
    pub responses: Vec<String>,
}

impl MockRule {
    pub fn new(tag: &str, response: &str) -> Self {
        Self {
            tag: tag.to_owned(),
            session: None,
            contains: None,
            responses: vec![response.to_owned()],
        }
    }

    pub fn for_session(mut self, session: &str) -> Self {
        self.session = Some(session.to_owned());
        self
    }

    pub fn containing(mut self, needle: &str) -> Self {
        self.contains = Some(needle.to_owned());
        self
    }

    pub fn cycling(tag: &str, responses: &[&str]) -> Self {
        Self {
            tag: tag.to_owned(),
            session: None,
            contains: None,
            responses: responses.iter().map(|s| s.to_string()).collect(),
        }
    }

    fn matches(&self, req: &ChatRequest) -> bool {
        let tag_ok = match self.tag.split_once('*') {
            Some((pre, post)) => {
                req.tag.len() >= pre.len() + post.len()
                    && req.tag.starts_with(pre)
                    && req.tag.ends_with(post)
            }
            None => req.tag == self.tag,
        };
        tag_ok
            && self
                .session
                .as_ref()
                .map_or(true, |s| req.subject.as_deref() == Some(s.as_str()))
            && self
                .contains
                .as_ref()
                .map_or(true, |c| req.last_user().contains(c.as_str()))
    }
}

/// First-match rule list with an optional fallback answer.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct MockScript {
    pub rules: Vec<MockRule>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub fallback: Option<String>,
}

impl MockScript {
    pub fn load(path: &Path) -> Result<Self, LlmError> {
        let text = std::fs::read_to_string(path)?;
        serde_json::from_str(&text)
            .map_err(|e| LlmError::Config(format!("mock script {}: {e}", path.display())))
    }

    pub fn save(&self, path: &Path) -> std::io::Result<()> {
        std::fs::write(path, serde_json::to_string_pretty(self)? + "\n")
    }

    pub fn respond(&self, req: &ChatRequest) -> Result<String, ProviderError> {
        for rule in &self.rules {
            if rule.matches(req) && !rule.responses.is_empty() {
                let n = req.repetition as usize % rule.responses.len();
                return Ok(rule.responses[n].clone());
            }
        }
        self.fallback
            .clone()
            .ok_or_else(|| ProviderError::ScriptMiss {
                tag: req.tag.clone(),
            })
    }
}

pub struct MockProvider {
    script: MockScript,
    id: String,
}

impl MockProvider {
    pub fn new(script: MockScript) -> Self {
        let id = format!("mock:{}", Self::digest(&script));
        Self { script, id }
    }

    /// Like [`new`](Self::new) with a role in the id, so one script can back
    /// several distinct providers (`mock:rater1:<digest>`).
    pub fn for_role(script: MockScript, role: &str) -> Self {
        let id = format!("mock:{role}:{}", Self::digest(&script));
        Self { script, id }
    }

    fn digest(script: &MockScript) -> String {
        let digest = Sha256::digest(serde_json::to_vec(script).expect("serializable"));
        hex::encode(digest)[..12].to_owned()
    }

    /// Same script under a different id, e.g. for a second rater.
    pub fn named(script: MockScript, name: &str) -> Self {
        Self {
            script,
            id: format!("mock:{name}"),
        }
    }
}

impl ChatProvider for MockProvider {
    fn id(&self) -> String {
        self.id.clone()
    }

    fn complete(&self, request: &ChatRequest) -> Result<String, ProviderError> {
        self.script.respond(request)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::llm::{Message, Role};

    fn req(tag: &str, subject: Option<&str>, user: &str, repetition: u32) -> ChatRequest {
        ChatRequest {
            messages: vec![Message::new(Role::User, user)],
            tag: tag.into(),
            subject: subject.map(String::from),
            repetition,
        }
    }

    #[test]
    fn first_match_wins_with_wildcards_and_predicates() {
        let s = MockScript {
            rules: vec![
                MockRule::new("bundle_feedback_round_2", "second"),
                MockRule::new("bundle_feedback_round_*", "any round"),
                MockRule::new("initial_bundles", "for s2").for_session("s2"),
                MockRule::new("initial_bundles", "tab").containing("Galaxy"),
            ],
            fallback: Some("fb".into()),
        };
        assert_eq!(s.respond(&req("bundle_feedback_round_2", None, "", 0)).unwrap(), "second");
        assert_eq!(s.respond(&req("bundle_feedback_round_3", None, "", 0)).unwrap(), "any round");
        assert_eq!(s.respond(&req("initial_bundles", Some("s2"), "", 0)).unwrap(), "for s2");
        assert_eq!(
            s.respond(&req("initial_bundles", Some("s1"), "product 1: Galaxy Tab", 0)).unwrap(),
            "tab"
        );
        assert_eq!(s.respond(&req("initial_bundles", Some("s1"), "Kindle", 0)).unwrap(), "fb");
    }

    #[test]
    fn leading_and_inner_wildcards() {
        let s = MockScript {
            rules: vec![MockRule::new("*intents", "i"), MockRule::new("format*bundles", "f")],
            fallback: None,
        };
        assert_eq!(s.respond(&req("reinfer_intents", None, "", 0)).unwrap(), "i");
        assert_eq!(s.respond(&req("format_reminder:target_bundles", None, "", 0)).unwrap(), "f");
        assert!(s.respond(&req("intents_x", None, "", 0)).is_err());
        // prefix and suffix may not overlap
        let s = MockScript {
            rules: vec![MockRule::new("ab*ba", "x")],
            fallback: None,
        };
        assert!(s.respond(&req("aba", None, "", 0)).is_err());
    }

    #[test]
    fn repetitions_cycle() {
        let s = MockScript {
            rules: vec![MockRule::cycling("rate_intent", &["a", "b", "c"])],
            fallback: None,
        };
        let got: Vec<_> = (0..4)
            .map(|r| s.respond(&req("rate_intent", None, "", r)).unwrap())
            .collect();
        assert_eq!(got, ["a", "b", "c", "a"]);
        assert!(matches!(
            s.respond(&req("rules", None, "", 0)),
            Err(ProviderError::ScriptMiss { .. })
        ));
    }

    #[test]
    fn script_file_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("m.json");
        let s = MockScript {
            rules: vec![MockRule::new("rules", "1. keep bundles small").for_session("s1")],
            fallback: Some("{}".into()),
        };
        s.save(&p).unwrap();
        assert_eq!(MockScript::load(&p).unwrap(), s);
    }
}
