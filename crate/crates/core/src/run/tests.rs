use super::*;
use crate::demo::LoopConfig;
use crate::llm::RunLog;

fn fixture() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("fixtures/sessions12.jsonl")
}

fn setup(script: impl Fn(&Dataset) -> MockScript) -> (tempfile::TempDir, RunConfig) {
    let dir = tempfile::tempdir().unwrap();
    let ds = load_dataset(&fixture()).unwrap();
    let sp = dir.path().join("script.json");
    script(&ds).save(&sp).unwrap();
    let cfg = RunConfig {
        dataset: fixture(),
        ..RunConfig::default()
    }
    .with_mock_script(&sp);
    (dir, cfg)
}

fn log_len(p: &Pipeline) -> usize {
    RunLog::read(&p.path("run_log.jsonl")).map_or(0, |v| v.len())
}

#[test]
fn oracle_run_is_perfect() {
    let (dir, cfg) = setup(oracle_script);
    let p = Pipeline::open(cfg, &dir.path().join("run"), 2).unwrap();
    let r = p.run_all().unwrap();
    assert_eq!((r.precision, r.recall, r.coverage), (1.0, 1.0, 1.0));
    assert_eq!(r.sessions, 3);
    for id in p.retrieve().unwrap().demo_sessions() {
        let d: Demonstration = read_json(&p.demo_path(&id)).unwrap();
        assert_eq!((d.rounds.bundle_feedback, d.rounds.intent_feedback), (0, 0));
    }
    assert!(p.path("eval/report.txt").exists());
}

#[test]
fn stages_need_their_inputs() {
    let (dir, cfg) = setup(oracle_script);
    let p = Pipeline::open(cfg, dir.path(), 1).unwrap();
    for res in [p.embed().map(|_| ()), p.retrieve().map(|_| ())] {
        let e = res.unwrap_err();
        assert!(matches!(e, RunError::MissingArtifact { .. }), "{e}");
        assert_eq!(e.exit_code(), 4);
    }
    p.ingest().unwrap();
    let e = p.eval().unwrap_err();
    assert!(matches!(e, RunError::MissingArtifact { stage: "infer", .. }), "{e}");
    p.embed().unwrap();
    p.retrieve().unwrap();
    assert!(matches!(
        p.infer().unwrap_err(),
        RunError::MissingArtifact { stage: "demo", .. }
    ));
}

#[test]
fn changed_config_is_refused() {
    let (dir, cfg) = setup(oracle_script);
    Pipeline::open(cfg.clone(), dir.path(), 1).unwrap();
    Pipeline::open(cfg.clone(), dir.path(), 8).unwrap();
    let mut other = cfg;
    other.retrieval.k = 3;
    let e = Pipeline::open(other, dir.path(), 1).err().unwrap();
    assert!(matches!(e, RunError::ConfigMismatch { .. }), "{e}");
}

#[test]
fn one_writer_at_a_time() {
    let (dir, cfg) = setup(oracle_script);
    let p = Pipeline::open(cfg, dir.path(), 1).unwrap();
    let held = p.lock().unwrap();
    assert!(matches!(p.ingest().unwrap_err(), RunError::Locked(_)));
    drop(held);
    p.ingest().unwrap();
    assert!(!p.path("run.lock").exists());
}

#[test]
fn rerunning_a_stage_makes_no_calls_and_keeps_files() {
    let (dir, cfg) = setup(oracle_script);
    let p = Pipeline::open(cfg, dir.path(), 1).unwrap();
    p.run_all().unwrap();
    let calls = log_len(&p);
    let split = fs::read(p.path("split.json")).unwrap();
    let demo_ids = p.retrieve().unwrap().demo_sessions();
    let demos: Vec<Vec<u8>> = demo_ids.iter().map(|id| fs::read(p.demo_path(id)).unwrap()).collect();
    let s = p.demo().unwrap();
    assert_eq!((s.produced, s.skipped), (0, demo_ids.len()));
    p.infer().unwrap();
    p.ingest().unwrap();
    assert_eq!(log_len(&p), calls);
    assert_eq!(fs::read(p.path("split.json")).unwrap(), split);
    let again: Vec<Vec<u8>> = demo_ids.iter().map(|id| fs::read(p.demo_path(id)).unwrap()).collect();
    assert_eq!(demos, again);
}

#[test]
fn interrupted_demo_stage_resumes() {
    let (dir, cfg) = setup(oracle_script);
    let p = Pipeline::open(cfg, dir.path(), 1).unwrap();
    p.run_all().unwrap();
    let ids: Vec<String> = p.retrieve().unwrap().demo_sessions().into_iter().collect();
    fs::remove_file(p.demo_path(&ids[0])).unwrap();
    let s = p.demo().unwrap();
    assert_eq!((s.produced, s.skipped), (1, ids.len() - 1));
}

#[test]
fn edited_dataset_is_detected() {
    let (dir, mut cfg) = setup(oracle_script);
    let copy = dir.path().join("data.jsonl");
    fs::copy(fixture(), &copy).unwrap();
    cfg.dataset = copy.clone();
    let p = Pipeline::open(cfg, &dir.path().join("run"), 1).unwrap();
    p.ingest().unwrap();
    let mut text = fs::read_to_string(&copy).unwrap();
    text.push('\n');
    fs::write(&copy, text).unwrap();
    assert!(matches!(p.embed().unwrap_err(), RunError::DatasetChanged { .. }));
}

#[test]
fn replayed_run_matches_the_original() {
    let (dir, cfg) = setup(stubborn_script);
    let a = Pipeline::open(cfg, &dir.path().join("a"), 2).unwrap();
    a.run_all().unwrap();
    let replay = a.replay_config().unwrap();
    let b = Pipeline::open(replay, &dir.path().join("b"), 2).unwrap();
    b.run_all().unwrap();
    for id in a.retrieve().unwrap().demo_sessions() {
        assert_eq!(fs::read(a.demo_path(&id)).unwrap(), fs::read(b.demo_path(&id)).unwrap());
    }
    for id in a.load_results().unwrap().keys() {
        assert_eq!(fs::read(a.result_path(id)).unwrap(), fs::read(b.result_path(id)).unwrap());
    }
    assert_eq!(
        fs::read(a.path("eval/report.json")).unwrap(),
        fs::read(b.path("eval/report.json")).unwrap()
    );
}

#[test]
fn stubborn_script_spends_every_round() {
    let (dir, mut cfg) = setup(stubborn_script);
    cfg.loops = LoopConfig::new(1, 4, 1);
    let p = Pipeline::open(cfg, dir.path(), 1).unwrap();
    p.run_all().unwrap();
    for id in p.retrieve().unwrap().demo_sessions() {
        let d: Demonstration = read_json(&p.demo_path(&id)).unwrap();
        assert_eq!(
            (d.rounds.self_correct, d.rounds.bundle_feedback, d.rounds.intent_feedback),
            (1, 4, 1),
            "{id}"
        );
    }
}

#[test]
fn baselines_run() {
    for mode in [InferenceMode::FewShotRandom, InferenceMode::ZeroShot] {
        let (dir, mut cfg) = setup(oracle_script);
        cfg.inference.mode = mode;
        cfg.retrieval.k = 2;
        let p = Pipeline::open(cfg, dir.path(), 1).unwrap();
        let r = p.run_all().unwrap();
        assert_eq!(r.sessions, 3);
        let plan = p.retrieve().unwrap();
        let want = if mode == InferenceMode::ZeroShot { 0 } else { 2 };
        assert!(plan.plan.values().all(|v| v.len() == want));
        if mode == InferenceMode::FewShotRandom {
            // ideal transcripts need no model calls
            let tags: BTreeSet<String> = RunLog::read(&p.path("run_log.jsonl"))
                .unwrap()
                .into_iter()
                .map(|e| e.tag)
                .collect();
            assert!(tags.iter().all(|t| t.starts_with("target_")), "{tags:?}");
        }
    }
}

#[test]
fn random_plans_are_seeded() {
    let (dir, mut cfg) = setup(oracle_script);
    cfg.inference.mode = InferenceMode::FewShotRandom;
    cfg.retrieval.k = 3;
    let plan = |sub: &str, seed: u64| {
        let mut c = cfg.clone();
        c.seed = seed;
        let p = Pipeline::open(c, &dir.path().join(sub), 1).unwrap();
        p.ingest().unwrap();
        p.embed().unwrap();
        p.retrieve().unwrap().plan
    };
    assert_eq!(plan("a", 1), plan("b", 1));
    assert_ne!(plan("c", 1), plan("d", 2));
}

#[test]
fn report_compares_runs() {
    let (dir, cfg) = setup(oracle_script);
    let a = dir.path().join("dicl");
    Pipeline::open(cfg, &a, 1).unwrap().run_all().unwrap();
    let t = report(&[a.clone()]).unwrap();
    assert!(t.contains("dicl"), "{t}");
    assert!(matches!(
        report(&[dir.path().join("nope")]).unwrap_err(),
        RunError::MissingArtifact { .. }
    ));
}
