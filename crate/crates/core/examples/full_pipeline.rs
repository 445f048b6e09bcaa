//! Every stage on the shipped fixture with a ground-truth mock, a replay of
//! the same run from its log, and a comparison table.
//!
//! Also writes `fixtures/oracle_script.json` so that
//! `dicl --config fixtures/oracle.toml --run-dir <dir> run` works.

use std::path::Path;

use dicl::dataset::load_dataset;
use dicl::infer::InferenceMode;
use dicl::run::{oracle_script, report, Pipeline, RunConfig};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let fixtures = Path::new(env!("CARGO_MANIFEST_DIR")).join("fixtures");
    let dataset = fixtures.join("sessions12.jsonl");
    let script = fixtures.join("oracle_script.json");
    oracle_script(&load_dataset(&dataset)?).save(&script)?;

    let work = tempfile::tempdir()?;
    let base = RunConfig {
        dataset,
        seed: 7,
        ..RunConfig::default()
    }
    .with_mock_script(&script);

    let mut dirs = Vec::new();
    for mode in [InferenceMode::Dicl, InferenceMode::FewShotRandom, InferenceMode::ZeroShot] {
        let mut cfg = base.clone();
        cfg.inference.mode = mode;
        let dir = work.path().join(format!("{mode:?}").to_lowercase());
        let p = Pipeline::open(cfg, &dir, 4)?;
        let r = p.run_all()?;
        println!("{mode:?}: P={:.3} R={:.3} C={:.3}", r.precision, r.recall, r.coverage);
        dirs.push(dir);
    }

    let first = Pipeline::open(base.clone(), &dirs[0], 1)?;
    let replay_dir = work.path().join("replayed");
    let replayed = Pipeline::open(first.replay_config()?, &replay_dir, 1)?.run_all()?;
    println!("replayed: P={:.3} R={:.3} C={:.3}", replayed.precision, replayed.recall, replayed.coverage);
    dirs.push(replay_dir);

    print!("\n{}", report(&dirs)?);
    Ok(())
}
