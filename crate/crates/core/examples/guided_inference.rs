//! Infer bundles for a target session with an oracle demonstration as
//! context, then compare the three prompting modes.

use std::path::Path;
use std::sync::Arc;

use dicl::dataset::load_dataset;
use dicl::infer::{assemble_context, ideal_transcript, infer_target, Ablation, InferenceMode};
use dicl::llm::{ChatClient, MockProvider};
use dicl::prompts::PromptRegistry;
use dicl::run::oracle_script;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let ds = load_dataset(&Path::new(env!("CARGO_MANIFEST_DIR")).join("fixtures/sessions12.jsonl"))?;
    let titles = |id: &str| -> Vec<String> {
        ds.session(id)
            .unwrap()
            .item_ids
            .iter()
            .map(|i| ds.title(i).unwrap().to_owned())
            .collect()
    };
    let prompts = PromptRegistry::builtin();
    let client = ChatClient::bare(Arc::new(MockProvider::new(oracle_script(&ds))));

    // s04 mixes workout clothing with a breakfast pair, as does target s12
    let neighbor = ds.session("s04").unwrap();
    let demo = ideal_transcript(neighbor, &titles("s04"), &ds.ground_truth["s04"], &prompts)?;
    let target = ds.session("s12").unwrap();

    for mode in [InferenceMode::Dicl, InferenceMode::FewShotRandom, InferenceMode::ZeroShot] {
        let ctx = assemble_context(&[&demo], mode, &Ablation::default(), &prompts)?;
        let r = infer_target(target, &titles("s12"), &ctx, vec!["s04".into()], mode, &client, &prompts)?;
        println!("{mode:?}: {} context turns", ctx.turns.len());
        for b in &r.bundles {
            println!("    bundle {} {:?} -> {:?}", b.label, b.items, b.intent);
        }
    }
    Ok(())
}
