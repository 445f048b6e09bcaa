//! Build one demonstration with a mock that starts wrong and is corrected
//! by the bundle feedback loop.

use std::path::Path;
use std::sync::Arc;

use dicl::dataset::load_dataset;
use dicl::demo::{DemoBuilder, LoopConfig, RaterPanel};
use dicl::llm::{ChatClient, MockProvider, MockRule, MockScript};
use dicl::prompts::PromptRegistry;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let ds = load_dataset(&Path::new(env!("CARGO_MANIFEST_DIR")).join("fixtures/sessions12.jsonl"))?;
    // s01: jeans, belt, notebook, t-shirt; the GT bundle is products 1, 2, 4
    let session = ds.session("s01").unwrap();
    let titles: Vec<String> = session
        .item_ids
        .iter()
        .map(|id| ds.title(id).unwrap().to_owned())
        .collect();

    let good = "{'bundle 1': ['product 1', 'product 2', 'product 4']}";
    let script = MockScript {
        rules: vec![
            MockRule::new("initial_bundles", "{'bundle 1': ['product 1', 'product 2', 'product 3']}"),
            MockRule::new("self_correct_bundles", "{'bundle 1': ['product 1', 'product 2', 'product 3']}"),
            MockRule::new("bundle_feedback_round_*", good),
            MockRule::new("*_intents", "{'bundle 1': 'casual everyday outfit'}"),
            MockRule::new("intent_feedback_round_*", "{'bundle 1': 'casual everyday outfit'}"),
            MockRule::new(
                "rate_intent",
                "{'intent 1': ['Naturalness':3, 'Coverage':3, 'Motivation':2], 'intent 2': ['Naturalness':3, 'Coverage':3, 'Motivation':2]}",
            ),
            MockRule::new("rules", "1. clothing worn together forms a bundle\n2. stationery is unrelated to outfits"),
        ],
        fallback: None,
    };
    let generator = ChatClient::bare(Arc::new(MockProvider::new(script.clone())));
    let panel = RaterPanel::new(
        ChatClient::bare(Arc::new(MockProvider::for_role(script.clone(), "rater1"))),
        ChatClient::bare(Arc::new(MockProvider::for_role(script, "rater2"))),
    );
    let prompts = PromptRegistry::builtin();
    let builder = DemoBuilder::new(&generator, &panel, &prompts, LoopConfig::default());
    let demo = builder.build(session, &titles, ds.ground_truth.get("s01"))?;

    println!("rounds used: {:?}", demo.rounds);
    println!("final bundles: {:?}", demo.bundles.0);
    println!("final intents: {:?}", demo.intents.0);
    println!("rules:\n{}", demo.rules);
    println!("transcript:");
    for t in &demo.conversation.turns {
        println!("  [{}] {}", t.tag, t.assistant.replace('\n', " "));
    }
    Ok(())
}
