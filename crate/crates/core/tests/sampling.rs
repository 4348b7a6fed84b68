use conner_core::extrinsic::sample_negatives;
use conner_core::{Knowledge, Provenance};

#[test]
fn negative_inclusion_frequencies_match_expectation() {
    let pool: Vec<Knowledge> = (0..10)
        .map(|i| Knowledge::new(&format!("Passage number {i}."), Provenance::Retrieved))
        .collect();
    let target = pool[0].clone();
    let u = 5;
    let trials = 10_000u64;
    let mut counts = vec![0u64; pool.len()];
    for seed in 0..trials {
        for n in sample_negatives(&pool, &target, u, seed).unwrap().negatives {
            let idx = pool.iter().position(|p| p.text() == n.text()).unwrap();
            counts[idx] += 1;
        }
    }
    assert_eq!(counts[0], 0);
    // Each of the 9 eligible entries appears with probability u / 9 per draw.
    let p = u as f64 / 9.0;
    let expected = trials as f64 * p;
    let sigma = (trials as f64 * p * (1.0 - p)).sqrt();
    for (i, &c) in counts.iter().enumerate().skip(1) {
        assert!(
            (c as f64 - expected).abs() <= 3.0 * sigma,
            "entry {i}: {c} draws, expected {expected:.1} ± {:.1}",
            3.0 * sigma
        );
    }
}

#[test]
fn forced_set_when_pool_is_exactly_large_enough() {
    let pool: Vec<Knowledge> = ["A.", "B.", "C."]
        .iter()
        .map(|t| Knowledge::new(t, Provenance::Retrieved))
        .collect();
    let mut got: Vec<String> = sample_negatives(&pool, &pool[1], 2, 99)
        .unwrap()
        .negatives
        .iter()
        .map(|k| k.text().to_string())
        .collect();
    got.sort();
    assert_eq!(got, ["A.", "C."]);
}
