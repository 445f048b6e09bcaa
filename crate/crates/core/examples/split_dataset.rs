//! Chronological 7:1:2 split of a synthetic dataset sized like the
//! Electronic domain.

use dicl::dataset::DEFAULT_SPLIT;
use dicl::synthetic::{generate, SyntheticSpec};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let ds = generate(SyntheticSpec::electronic());
    let stats = ds.stats();
    println!(
        "{} users, {} items, {} sessions, {} bundles",
        stats.users, stats.items, stats.sessions, stats.bundles
    );
    let split = ds.split(DEFAULT_SPLIT)?;
    println!(
        "train {} / validation {} / test {}",
        split.train.len(),
        split.validation.len(),
        split.test.len()
    );
    let last_train = split.train.last().unwrap();
    let first_test = &split.test[0];
    println!(
        "last train session {} at t={}, first test session {} at t={}",
        last_train.session_id, last_train.timestamp, first_test.session_id, first_test.timestamp
    );
    Ok(())
}
