//! Export blinded intent pairs for human raters from hit bundles.

use std::collections::BTreeMap;

use dicl::eval::{export_human_eval, IntentCandidate};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let mut domains = BTreeMap::new();
    for (domain, gt) in [("clothing", "winter outfit"), ("electronic", "desk setup"), ("food", "pasta dinner")] {
        let cands: Vec<IntentCandidate> = (0..25)
            .map(|i| IntentCandidate {
                session_id: format!("{domain}-{i:02}"),
                label: 1,
                products: vec![format!("{domain} item {i}a"), format!("{domain} item {i}b")],
                generated: format!("getting ready for {gt} {i}"),
                ground_truth: format!("{gt} {i}"),
            })
            .collect();
        domains.insert(domain.to_string(), cands);
    }
    let out = tempfile::tempdir()?;
    let summary = export_human_eval(&domains, 20, 3, 42, out.path())?;
    println!("{} records", summary.records);
    let rater = std::fs::read_to_string(&summary.rater_files[0])?;
    for line in rater.lines().take(3) {
        println!("{line}");
    }
    let key = std::fs::read_to_string(&summary.answer_key)?;
    for line in key.lines().take(3) {
        println!("{line}");
    }
    println!("asking for 30 per domain: {}", export_human_eval(&domains, 30, 1, 0, out.path()).unwrap_err());
    Ok(())
}
