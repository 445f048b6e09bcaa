//! Describe sessions by their product titles, embed them with the hash
//! embedder and find each test session's nearest training session.

use std::path::Path;

use dicl::dataset::load_dataset;
use dicl::retrieval::{
    describe_catalog, embed_sessions, session_description, HashEmbedder, NeighborIndex, StopWords,
};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let ds = load_dataset(&Path::new(env!("CARGO_MANIFEST_DIR")).join("fixtures/sessions12.jsonl"))?;
    let split = ds.split([0.7, 0.1, 0.2])?;
    let descs = describe_catalog(&ds.catalog, &StopWords::english());
    let describe = |ss: &[dicl::dataset::Session]| {
        ss.iter()
            .map(|s| session_description(s, &descs))
            .collect::<Result<Vec<_>, _>>()
    };
    let embedder = HashEmbedder::default();
    let index = NeighborIndex::new(embed_sessions(&describe(&split.train)?, &embedder, None)?)?;
    let test = describe(&split.test)?;
    for (d, q) in test.iter().zip(embed_sessions(&test, &embedder, None)?) {
        let top = index.query(&q, 2)?;
        println!("{}: \"{}\"", d.session_id, d.text);
        for n in top {
            println!("    {} cos={:.3}", n.session_id, n.score);
        }
    }
    Ok(())
}
