//! A scripted chat provider: rules match on the request tag, the
//! conversation subject or a substring, and every call lands in a run log.

use std::sync::Arc;

use dicl::llm::{ChatClient, Conversation, MockProvider, MockRule, MockScript, RunLog};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let script = MockScript {
        rules: vec![
            MockRule::new("initial_bundles", "{'bundle 1': ['product 1', 'product 2']}").for_session("s1"),
            MockRule::cycling("rate_intent", &["first", "second", "third"]),
            MockRule::new("*_intents", "{'bundle 1': 'cozy winter outfit'}"),
        ],
        fallback: Some("I am not sure.".into()),
    };
    let dir = tempfile::tempdir()?;
    let log = Arc::new(RunLog::open(&dir.path().join("log.jsonl"))?);
    let client = ChatClient::bare(Arc::new(MockProvider::new(script))).with_log(log);

    let mut conv = Conversation::new(Some("s1"), None);
    println!("{}", client.send(&mut conv, "detect bundles", "initial_bundles")?);
    println!("{}", client.send(&mut conv, "infer intents", "initial_intents")?);
    println!("{}", client.send(&mut conv, "anything else", "rules")?);
    for rep in 0..3 {
        let mut fresh = Conversation::new(Some("s1"), None);
        println!("rating {rep}: {}", client.send_repeat(&mut fresh, "rate", "rate_intent", rep)?);
    }

    for e in RunLog::read(&dir.path().join("log.jsonl"))? {
        println!("log: {} rep={} hash={}", e.tag, e.repetition, &e.history_hash[..12]);
    }
    Ok(())
}
