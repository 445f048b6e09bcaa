//! Tolerant parsing of model answers: smart quotes, unquoted keys, stray
//! prose and out-of-range products are all handled with warnings.

use dicl::parse::{parse_bundle_answer, parse_intent_answer, parse_rating_answer};

fn main() {
    let bundles = "Sure! Here you go: {‘bundle 1’: [‘product 1’, ‘product 3’], bundle 2: ['product 2', 'product 9']}";
    match parse_bundle_answer(bundles, 4) {
        Ok(p) => println!("bundles {:?} warnings {:?}", p.value.0, p.warnings),
        Err(e) => println!("bundles: {e}"),
    }

    let intents = "{'bundle 1': \"Kid's birthday party\", 'bundle 2': 'home office upgrade'}";
    println!("intents {:?}", parse_intent_answer(intents).map(|p| p.value.0));

    let ratings = "{'intent 1': ['Naturalness':3, 'Coverage':2, 'Motivation':1], \
                   'intent 2': {'naturalness': 2, 'coverage': 3, 'motivation': 2}}";
    match parse_rating_answer(ratings) {
        Ok(p) => {
            for (label, t) in p.value {
                println!("intent {label}: N={} C={} M={}", t.naturalness, t.coverage, t.motivation);
            }
        }
        Err(e) => println!("ratings: {e}"),
    }

    println!("{:?}", parse_bundle_answer("no structure here", 3).unwrap_err().to_string());
}
