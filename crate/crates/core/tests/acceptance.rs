//! Acceptance checks. Prints one `[PASS]` / `[FAIL]` line per criterion and
//! exits nonzero if any fails.

use std::collections::{BTreeMap, BTreeSet};
use std::path::{Path, PathBuf};
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use dicl::dataset::{chronological_split, load_dataset};
use dicl::demo::{bundle_signals, classify_bundle_signal, match_bundles, BundleSignalType, LoopConfig};
use dicl::eval::{evaluate, EvalSession, HitCounting};
use dicl::llm::RunLog;
use dicl::parse::{
    parse_bundle_answer, parse_intent_answer, parse_rating_answer, ratings_to_answer, BundleMap,
    IntentMap, RatingTriple,
};
use dicl::retrieval::{top_k_neighbors, SessionEmbedding};
use dicl::run::{oracle_script, stubborn_script, EmbedderKind, Pipeline, RunConfig};
use dicl::synthetic::{generate, SyntheticSpec};

type Outcome = Result<String, String>;

fn check(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn within(limit: Duration, start: Instant) -> Result<(), String> {
    let took = start.elapsed();
    check(took < limit, || format!("took {took:?}, limit {limit:?}"))
}

fn fixture() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("fixtures/sessions12.jsonl")
}

// ------------------------------------------------------------ metric oracle

/// Nonnegative fraction kept in lowest terms.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
struct Frac(u128, u128);

fn gcd(a: u128, b: u128) -> u128 {
    if b == 0 {
        a
    } else {
        gcd(b, a % b)
    }
}

impl Frac {
    fn new(n: u128, d: u128) -> Self {
        if n == 0 {
            return Frac(0, 1);
        }
        let g = gcd(n, d);
        Frac(n / g, d / g)
    }
    fn add(self, o: Frac) -> Frac {
        Frac::new(self.0 * o.1 + o.0 * self.1, self.1 * o.1)
    }
    fn div(self, k: u128) -> Frac {
        Frac::new(self.0, self.1 * k)
    }
    fn parse(s: &str) -> Frac {
        match s.split_once('/') {
            Some((n, d)) => Frac::new(n.parse().unwrap(), d.parse().unwrap()),
            None => Frac::new(s.parse().unwrap(), 1),
        }
    }
}

/// Matched GT of a predicted bundle, from the hit definition: at least two
/// items, contained in a GT bundle; the tightest container wins (highest
/// |p|/|g|, then smaller |g|, then earlier), which for supersets is the
/// highest Jaccard.
fn oracle_hit(p: &BTreeSet<u32>, gts: &[BTreeSet<u32>]) -> Option<usize> {
    if p.len() < 2 {
        return None;
    }
    let mut containers: Vec<(usize, usize)> = gts
        .iter()
        .enumerate()
        .filter(|(_, g)| p.iter().all(|x| g.contains(x)))
        .map(|(i, g)| (g.len(), i))
        .collect();
    // same |p| for every container, so Jaccard |p|/|g| is highest for the
    // smallest |g|
    containers.sort();
    containers.first().map(|&(_, i)| i)
}

/// (precision, recall, coverage, hits per session) straight from the
/// definitions: per-session hit ratios averaged over sessions, coverage
/// averaged over all hit bundles. Recall is clipped to 1 in literal mode.
fn oracle_metrics(
    sessions: &[(Vec<BTreeSet<u32>>, Vec<BTreeSet<u32>>)],
    distinct: bool,
) -> (Frac, Frac, Frac, Vec<usize>) {
    let mut p_sum = Frac(0, 1);
    let mut r_sum = Frac(0, 1);
    let mut c_sum = Frac(0, 1);
    let mut recall_n = 0u128;
    let mut hit_n = 0u128;
    let mut per = Vec::new();
    for (preds, gts) in sessions {
        let mut hits = 0usize;
        let mut gts_hit = BTreeSet::new();
        for p in preds {
            if let Some(g) = oracle_hit(p, gts) {
                hits += 1;
                gts_hit.insert(g);
                hit_n += 1;
                c_sum = c_sum.add(Frac::new(p.len() as u128, gts[g].len() as u128));
            }
        }
        let counted = if distinct { gts_hit.len() } else { hits };
        per.push(counted);
        if !preds.is_empty() {
            p_sum = p_sum.add(Frac::new(counted as u128, preds.len() as u128));
        }
        if !gts.is_empty() {
            recall_n += 1;
            let num = counted.min(gts.len());
            r_sum = r_sum.add(Frac::new(num as u128, gts.len() as u128));
        }
    }
    let avg = |s: Frac, n: u128| if n == 0 { Frac(0, 1) } else { s.div(n) };
    (
        avg(p_sum, sessions.len() as u128),
        avg(r_sum, recall_n),
        avg(c_sum, hit_n),
        per,
    )
}

fn random_subset(rng: &mut ChaCha8Rng, universe: u32, min: usize) -> BTreeSet<u32> {
    loop {
        let size = rng.gen_range(min.max(1)..=universe as usize);
        let mut s = BTreeSet::new();
        while s.len() < size {
            s.insert(rng.gen_range(1..=universe));
        }
        if s.len() >= min {
            return s;
        }
    }
}

fn metric_oracle() -> Outcome {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let instances = 300;
    let mut hit_total = 0;
    for inst in 0..instances {
        let n_sessions = rng.gen_range(1..=6);
        let mut raw = Vec::new();
        for _ in 0..n_sessions {
            let universe = rng.gen_range(2..=10u32);
            let n_gt = rng.gen_range(0..=4);
            let n_pred = rng.gen_range(0..=5);
            let gts: Vec<_> = (0..n_gt).map(|_| random_subset(&mut rng, universe, 2)).collect();
            let mut preds = Vec::new();
            for _ in 0..n_pred {
                // half the predictions are drawn inside a GT bundle to get hits
                let p = match gts.get(rng.gen_range(0..gts.len().max(1))) {
                    Some(g) if rng.gen_bool(0.5) => {
                        let items: Vec<u32> = g.iter().copied().collect();
                        let k = rng.gen_range(1..=items.len());
                        items[..k].iter().copied().collect()
                    }
                    _ => random_subset(&mut rng, universe, 1),
                };
                preds.push(p);
            }
            raw.push((preds, gts));
        }
        let to_str = |v: &Vec<BTreeSet<u32>>| -> Vec<BTreeSet<String>> {
            v.iter().map(|s| s.iter().map(|x| format!("i{x:02}")).collect()).collect()
        };
        let sessions: Vec<EvalSession> = raw
            .iter()
            .enumerate()
            .map(|(i, (p, g))| EvalSession {
                session_id: format!("s{i}"),
                predictions: to_str(p),
                ground_truth: to_str(g),
                failed: false,
            })
            .collect();
        for (counting, distinct) in [(HitCounting::Literal, false), (HitCounting::DistinctGt, true)] {
            let (report, _) = evaluate(&sessions, counting);
            let (p, r, c, per) = oracle_metrics(&raw, distinct);
            let got = (
                Frac::parse(&report.exact["precision"]),
                Frac::parse(&report.exact["recall"]),
                Frac::parse(&report.exact["coverage"]),
            );
            check(got == (p, r, c), || {
                format!("instance {inst} ({counting:?}): got {got:?}, oracle {:?}", (p, r, c))
            })?;
            let got_per: Vec<usize> = report.per_session.iter().map(|m| m.hits).collect();
            check(got_per == per, || format!("instance {inst}: per-session hits {got_per:?} vs {per:?}"))?;
            for h in &report.hits {
                let idx: usize = h.session_id[1..].parse().unwrap();
                let (preds, gts) = &raw[idx];
                let want = oracle_hit(&preds[h.index], gts);
                check(want == Some(h.matched_gt), || {
                    format!("instance {inst}: hit {h:?} matched {want:?} by the oracle")
                })?;
            }
            hit_total += report.hit_bundles;
        }
    }
    within(Duration::from_secs(5), start)?;
    Ok(format!("{instances} instances, {hit_total} hit bundles, both counting modes"))
}

// ------------------------------------------------------------- signal types

fn subsets(n: usize, min: usize) -> Vec<BTreeSet<usize>> {
    (1u32..(1 << n))
        .map(|mask| (0..n).filter(|i| mask & (1 << i) != 0).map(|i| i + 1).collect::<BTreeSet<_>>())
        .filter(|s| s.len() >= min)
        .collect()
}

/// Type number restated from the signal definitions, given the GT bundle the
/// prediction is compared with.
fn restated_type(p: &BTreeSet<usize>, g: Option<&BTreeSet<usize>>) -> u8 {
    let Some(g) = g else { return 2 };
    let shared = p.iter().filter(|x| g.contains(x)).count();
    let extra = p.len() - shared;
    let missing = g.len() - shared;
    match (shared, extra, missing) {
        (0, _, _) => 2,
        (_, 0, 0) => 1,
        (_, e, _) if e > 0 => 3,
        _ if p.len() == 1 => 5,
        _ => 4,
    }
}

/// GT index with the highest Jaccard against `p`, earliest on ties; none if
/// nothing overlaps. With a single prediction the greedy matching reduces
/// to this.
fn restated_match(p: &BTreeSet<usize>, gts: &[BTreeSet<usize>]) -> Option<usize> {
    let mut best: Option<(usize, usize, usize)> = None;
    for (i, g) in gts.iter().enumerate() {
        let inter = p.intersection(g).count();
        let union = p.union(g).count();
        if inter == 0 {
            continue;
        }
        match best {
            Some((_, bi, bu)) if inter * bu <= bi * union => {}
            _ => best = Some((i, inter, union)),
        }
    }
    best.map(|(i, _, _)| i)
}

fn signal_typing() -> Outcome {
    let start = Instant::now();
    let preds = subsets(6, 1);
    let gt_bundles = subsets(6, 2);
    let mut lists: Vec<Vec<BTreeSet<usize>>> = vec![Vec::new()];
    for a in &gt_bundles {
        lists.push(vec![a.clone()]);
        for b in &gt_bundles {
            lists.push(vec![a.clone(), b.clone()]);
        }
    }
    let mut seen = BTreeMap::new();
    let mut checked = 0usize;
    for gts in &lists {
        for p in &preds {
            let mut map = BundleMap::new();
            map.insert(1, p.iter().copied());
            let m = match_bundles(&map, gts).gt_of(1);
            let want_m = restated_match(p, gts);
            check(m == want_m, || format!("{p:?} vs {gts:?}: matched {m:?}, expected {want_m:?}"))?;
            let t = classify_bundle_signal(p, m.map(|i| &gts[i]));
            let want = restated_type(p, want_m.map(|i| &gts[i]));
            check(t.number() == want, || {
                format!("{p:?} vs {gts:?}: Type {}, expected Type {want}", t.number())
            })?;
            check(BundleSignalType::ALL.iter().filter(|x| **x == t).count() == 1, || "not one type".into())?;
            // declared invariants
            let g = m.map(|i| &gts[i]);
            if t == BundleSignalType::Keep {
                check(g == Some(p), || format!("Keep without exact match: {p:?}"))?;
            }
            if t == BundleSignalType::Invalid {
                check(gts.iter().all(|g| g.is_disjoint(p)), || format!("Invalid with overlap: {p:?} {gts:?}"))?;
            }
            if t == BundleSignalType::ExpandSingleton {
                check(p.len() == 1, || format!("ExpandSingleton for {p:?}"))?;
            }
            let full = bundle_signals(&map, gts);
            check(full.len() == 1 && full[0].signal_type == t, || format!("bundle_signals disagrees: {full:?}"))?;
            *seen.entry(t.number()).or_insert(0usize) += 1;
            checked += 1;
        }
    }
    check(seen.len() == 5, || format!("not every type occurred: {seen:?}"))?;
    within(Duration::from_secs(10), start)?;
    Ok(format!("{checked} configurations, type counts {seen:?}"))
}

// ---------------------------------------------------------------- retrieval

fn retrieval() -> Outcome {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(99);
    let mut corpus: Vec<SessionEmbedding> = (0..1000)
        .map(|i| SessionEmbedding {
            session_id: format!("s{i:04}"),
            vector: (0..64).map(|_| rng.gen_range(-1.0f32..1.0)).collect(),
        })
        .collect();
    // exact duplicates and a zero vector force score ties
    for i in 0..50 {
        let src = corpus[rng.gen_range(0..1000)].vector.clone();
        corpus[900 + i].vector = src;
    }
    corpus[17].vector = vec![0.0; 64];
    let cos = |a: &[f32], b: &[f32]| -> f64 {
        let dot: f64 = a.iter().zip(b).map(|(x, y)| f64::from(*x) * f64::from(*y)).sum();
        let na: f64 = a.iter().map(|x| f64::from(*x) * f64::from(*x)).sum::<f64>().sqrt();
        let nb: f64 = b.iter().map(|x| f64::from(*x) * f64::from(*x)).sum::<f64>().sqrt();
        if na == 0.0 || nb == 0.0 {
            0.0
        } else {
            dot / (na * nb)
        }
    };
    let queries: Vec<usize> = (0..20).map(|_| rng.gen_range(0..1000)).chain([17, 905]).collect();
    let mut checked = 0;
    for &q in &queries {
        let query = &corpus[q];
        let rest: Vec<SessionEmbedding> = corpus.iter().filter(|c| c.session_id != query.session_id).cloned().collect();
        // exhaustive ranking by repeated selection of the best remaining
        let scores: Vec<(f64, &str)> = rest.iter().map(|c| (cos(&query.vector, &c.vector), c.session_id.as_str())).collect();
        for k in [1, 5, 50] {
            let got = top_k_neighbors(query, &rest, k).map_err(|e| e.to_string())?;
            let mut taken = vec![false; scores.len()];
            let mut want = Vec::new();
            for _ in 0..k {
                let mut best: Option<usize> = None;
                for (i, s) in scores.iter().enumerate() {
                    if taken[i] {
                        continue;
                    }
                    let better = match best {
                        None => true,
                        Some(b) => s.0 > scores[b].0 || (s.0 == scores[b].0 && s.1 < scores[b].1),
                    };
                    if better {
                        best = Some(i);
                    }
                }
                let b = best.unwrap();
                taken[b] = true;
                want.push(scores[b]);
            }
            let got_ids: Vec<&str> = got.iter().map(|n| n.session_id.as_str()).collect();
            let want_ids: Vec<&str> = want.iter().map(|w| w.1).collect();
            check(got_ids == want_ids, || format!("query {q} k {k}: {got_ids:?} vs {want_ids:?}"))?;
            for (n, w) in got.iter().zip(&want) {
                check(n.score == w.0, || format!("score {} vs {}", n.score, w.0))?;
            }
            checked += 1;
        }
    }
    within(Duration::from_secs(2), start)?;
    Ok(format!("{checked} rankings over 1000 vectors of dim 64"))
}

// ----------------------------------------------------------- pipeline runs

fn pipeline_config(dir: &Path, script: dicl::llm::MockScript) -> RunConfig {
    let sp = dir.join("script.json");
    script.save(&sp).unwrap();
    RunConfig {
        dataset: fixture(),
        ..RunConfig::default()
    }
    .with_mock_script(&sp)
}

fn perfect_oracle() -> Outcome {
    let start = Instant::now();
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let ds = load_dataset(&fixture()).map_err(|e| e.to_string())?;
    let mut cfg = pipeline_config(dir.path(), oracle_script(&ds));
    // an embedding service that is not running: the hash embedder takes over
    cfg.embedder.kind = EmbedderKind::Remote;
    cfg.embedder.url = "http://127.0.0.1:9".into();
    cfg.embedder.timeout_secs = 1.0;
    let run = dir.path().join("run");
    let p = Pipeline::open(cfg, &run, 1).map_err(|e| e.to_string())?;
    let report = p.run_all().map_err(|e| e.to_string())?;
    let embed: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(run.join("embed.json")).unwrap()).unwrap();
    check(embed["fell_back"] == true, || format!("embedder did not fall back: {embed}"))?;
    check(
        (report.precision, report.recall, report.coverage) == (1.0, 1.0, 1.0),
        || format!("P/R/C = {}/{}/{}", report.precision, report.recall, report.coverage),
    )?;
    let log = RunLog::read(&run.join("run_log.jsonl")).map_err(|e| e.to_string())?;
    let feedback = log.iter().filter(|e| e.tag.contains("feedback_round_")).count();
    check(feedback == 0, || format!("{feedback} feedback prompts sent"))?;
    within(Duration::from_secs(10), start)?;
    Ok(format!(
        "P = R = C = 1 over {} test sessions, {} model calls, 0 feedback rounds",
        report.sessions,
        log.len()
    ))
}

fn loop_budgets() -> Outcome {
    let ds = load_dataset(&fixture()).map_err(|e| e.to_string())?;
    let mut notes = Vec::new();
    for (ts, tb, ti) in [(1, 4, 1), (0, 0, 0)] {
        let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
        let mut cfg = pipeline_config(dir.path(), stubborn_script(&ds));
        cfg.loops = LoopConfig::new(ts, tb, ti);
        let run = dir.path().join("run");
        let p = Pipeline::open(cfg, &run, 1).map_err(|e| e.to_string())?;
        p.run_all().map_err(|e| e.to_string())?;
        let demos: BTreeSet<String> = p.retrieve().map_err(|e| e.to_string())?.demo_sessions();
        let log = RunLog::read(&run.join("run_log.jsonl")).map_err(|e| e.to_string())?;
        for id in &demos {
            let count = |pred: &dyn Fn(&str) -> bool| {
                log.iter()
                    .filter(|e| e.subject.as_deref() == Some(id.as_str()) && pred(&e.tag))
                    .count() as u32
            };
            let got = (
                count(&|t| t == "self_correct_bundles"),
                count(&|t| t.starts_with("bundle_feedback_round_")),
                count(&|t| t.starts_with("intent_feedback_round_")),
            );
            check(got == (ts, tb, ti), || {
                format!("config ({ts},{tb},{ti}), session {id}: log shows {got:?}")
            })?;
        }
        notes.push(format!("({ts},{tb},{ti}) on {} demos", demos.len()));
    }
    Ok(notes.join(", "))
}

fn artifact_files(run: &Path) -> BTreeMap<String, Vec<u8>> {
    let mut out = BTreeMap::new();
    for sub in ["demos", "results"] {
        for e in std::fs::read_dir(run.join(sub)).unwrap() {
            let p = e.unwrap().path();
            out.insert(format!("{sub}/{}", p.file_name().unwrap().to_string_lossy()), std::fs::read(&p).unwrap());
        }
    }
    for f in ["eval/report.json", "eval/report.txt"] {
        out.insert(f.into(), std::fs::read(run.join(f)).unwrap());
    }
    out
}

fn determinism() -> Outcome {
    let ds = load_dataset(&fixture()).map_err(|e| e.to_string())?;
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    // the stubborn script exercises every loop, so transcripts are long
    let cfg = pipeline_config(dir.path(), stubborn_script(&ds));
    let mut runs = Vec::new();
    for name in ["first", "second"] {
        let run = dir.path().join(name);
        Pipeline::open(cfg.clone(), &run, 3)
            .and_then(|p| p.run_all())
            .map_err(|e| e.to_string())?;
        runs.push(run);
    }
    let a = artifact_files(&runs[0]);
    let b = artifact_files(&runs[1]);
    check(a == b, || {
        let diff: Vec<&String> = a.keys().filter(|k| a.get(*k) != b.get(*k)).collect();
        format!("runs differ in {diff:?}")
    })?;
    let first = Pipeline::open(cfg, &runs[0], 1).map_err(|e| e.to_string())?;
    let replay_cfg = first.replay_config().map_err(|e| e.to_string())?;
    let replay = dir.path().join("replay");
    Pipeline::open(replay_cfg, &replay, 2)
        .and_then(|p| p.run_all())
        .map_err(|e| e.to_string())?;
    let c = artifact_files(&replay);
    check(c == b, || {
        let diff: Vec<&String> = b.keys().filter(|k| b.get(*k) != c.get(*k)).collect();
        format!("replay differs in {diff:?}")
    })?;
    Ok(format!("{} files identical across two runs and a replay", a.len()))
}

// -------------------------------------------------------------------- split

fn split() -> Outcome {
    let ds = generate(SyntheticSpec::electronic());
    check(ds.sessions.len() == 1145, || format!("{} sessions", ds.sessions.len()))?;
    let (train, val, test) = chronological_split(&ds.sessions, [0.7, 0.1, 0.2]).map_err(|e| e.to_string())?;
    let sizes = (train.len(), val.len(), test.len());
    check(sizes == (801, 114, 230), || format!("sizes {sizes:?}"))?;
    let key = |s: &dicl::dataset::Session| (s.timestamp, s.session_id.clone());
    let all: Vec<_> = train.iter().chain(&val).chain(&test).map(key).collect();
    check(all.windows(2).all(|w| w[0] < w[1]), || "splits are not in (timestamp, id) order".into())?;
    let ids: BTreeSet<&str> = train.iter().chain(&val).chain(&test).map(|s| s.session_id.as_str()).collect();
    let orig: BTreeSet<&str> = ds.sessions.iter().map(|s| s.session_id.as_str()).collect();
    check(ids == orig && ids.len() == 1145, || "splits are not a partition".into())?;
    Ok(format!("{sizes:?}, chronological and disjoint"))
}

// ------------------------------------------------------------------ parsers

fn parser_fuzz() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(31337);
    let alphabet = b"{}[]:,'\"` bundle product intent 0123456789Naturalness\n\\";
    let mut accepted = [0usize; 3];
    for n in 0..10_000 {
        let len = rng.gen_range(0..120);
        // alternate raw bytes with bytes biased toward the answer syntax
        let bytes: Vec<u8> = (0..len)
            .map(|_| if n % 2 == 0 { rng.gen() } else { alphabet[rng.gen_range(0..alphabet.len())] })
            .collect();
        let text = String::from_utf8_lossy(&bytes);
        let outcome = std::panic::catch_unwind(|| {
            [
                parse_bundle_answer(&text, 10).is_ok(),
                parse_intent_answer(&text).is_ok(),
                parse_rating_answer(&text).is_ok(),
            ]
        })
        .map_err(|_| format!("parser panicked on {bytes:?}"))?;
        for (a, ok) in accepted.iter_mut().zip(outcome) {
            *a += ok as usize;
        }
    }
    let words = ["home", "office", "setup", "gift", "John's", "\"quoted\"", "back\\slash", "it’s"];
    for _ in 0..1000 {
        let mut b = BundleMap::new();
        let mut i = IntentMap::new();
        let mut r = BTreeMap::new();
        for label in 1..=rng.gen_range(1..=5u32) {
            let products: BTreeSet<usize> = (0..rng.gen_range(1..=4)).map(|_| rng.gen_range(1..=12)).collect();
            b.insert(label, products);
            let intent: Vec<&str> = (0..rng.gen_range(1..=5)).map(|_| words[rng.gen_range(0..words.len())]).collect();
            i.insert(label, intent.join(" "));
            r.insert(
                label,
                RatingTriple::new(
                    rng.gen_range(1..=3) as f64,
                    rng.gen_range(1..=3) as f64,
                    rng.gen_range(1..=2) as f64,
                ),
            );
        }
        let pb = parse_bundle_answer(&b.to_answer(), 12).map_err(|e| e.to_string())?;
        check(pb.value == b && pb.warnings.is_empty(), || format!("bundles {} -> {:?}", b.to_answer(), pb))?;
        let pi = parse_intent_answer(&i.to_answer()).map_err(|e| e.to_string())?;
        check(pi.value == i, || format!("intents {} -> {:?}", i.to_answer(), pi.value))?;
        let text = ratings_to_answer(&r);
        let pr = parse_rating_answer(&text).map_err(|e| e.to_string())?;
        check(pr.value == r, || format!("ratings {text} -> {:?}", pr.value))?;
    }
    Ok(format!(
        "10000 inputs per parser without a crash (accepted {accepted:?}); 1000 canonical answers round-trip"
    ))
}

fn main() {
    let criteria: [(&str, fn() -> Outcome); 8] = [
        ("metric oracle equivalence", metric_oracle),
        ("signal typing exhaustiveness", signal_typing),
        ("retrieval correctness", retrieval),
        ("perfect-oracle end-to-end", perfect_oracle),
        ("loop-budget conformance", loop_budgets),
        ("determinism and replay", determinism),
        ("split conformance", split),
        ("parser fuzz", parser_fuzz),
    ];
    std::panic::set_hook(Box::new(|_| {}));
    let mut failed = 0;
    for (name, f) in criteria {
        let start = Instant::now();
        let outcome = std::panic::catch_unwind(f).unwrap_or_else(|_| Err("panicked".into()));
        let took = start.elapsed();
        match outcome {
            Ok(msg) => println!("[PASS] {name}: {msg} ({took:.2?})"),
            Err(msg) => {
                failed += 1;
                println!("[FAIL] {name}: {msg} ({took:.2?})");
            }
        }
    }
    if failed > 0 {
        std::process::exit(1);
    }
}
