//! Precision, recall and coverage on a hand-made example, under both hit
//! counting rules.

use std::collections::BTreeSet;

use dicl::eval::{evaluate, is_hit, jaccard, EvalSession, HitCounting};

fn set(items: &[&str]) -> BTreeSet<String> {
    items.iter().map(|s| s.to_string()).collect()
}

fn main() {
    println!("jaccard({{1,2}}, {{1,2,3}}) = {:.4}", jaccard(&set(&["1", "2"]), &set(&["1", "2", "3"])));
    let gts = [set(&["1", "2", "5"]), set(&["3", "4"])];
    println!("{{1,2}} hits GT {:?}", is_hit(&set(&["1", "2"]), &gts));
    println!("{{1,3}} hits GT {:?}", is_hit(&set(&["1", "3"]), &gts));

    let sessions = vec![
        EvalSession {
            session_id: "a".into(),
            predictions: vec![set(&["1", "2"]), set(&["3", "4"])],
            ground_truth: gts.to_vec(),
            failed: false,
        },
        EvalSession {
            session_id: "b".into(),
            // two predictions inside the same GT bundle
            predictions: vec![set(&["x", "y"]), set(&["y", "z"]), set(&["q"])],
            ground_truth: vec![set(&["x", "y", "z"])],
            failed: false,
        },
        EvalSession {
            session_id: "c".into(),
            predictions: vec![],
            ground_truth: vec![set(&["m", "n"])],
            failed: true,
        },
    ];
    for counting in [HitCounting::Literal, HitCounting::DistinctGt] {
        let (report, exact) = evaluate(&sessions, counting);
        println!("\n{counting:?}: P={} R={} C={}", exact.precision, exact.recall, exact.coverage);
        print!("{}", report.to_table());
    }
}
