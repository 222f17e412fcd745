use nomad_core::triplet::{
    easy_negative_candidates, generate_triplets, pick_positive, sample_hard_negative, SampleEntry, SampleSet,
    SamplerConfig,
};
use nomad_core::Error;
use proptest::prelude::*;

fn set_from(qs: &[f64]) -> SampleSet {
    SampleSet {
        source_id: "src".into(),
        entries: qs.iter().enumerate().map(|(i, &q)| SampleEntry { clip: format!("c{i}.wav"), q }).collect(),
    }
}

fn brute_positive(qs: &[f64], a: usize) -> usize {
    let mut best = usize::MAX;
    for i in 0..qs.len() {
        if i == a {
            continue;
        }
        if best == usize::MAX || (qs[i] - qs[a]).abs() < (qs[best] - qs[a]).abs() {
            best = i;
        }
    }
    best
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(1000))]

    #[test]
    fn selection_matches_brute_force(
        qs in prop::collection::vec(prop_oneof![0.0f64..1.0, (0u32..10).prop_map(|k| k as f64 / 10.0)], 2..=12),
        s in 0.0f64..0.2,
    ) {
        let set = set_from(&qs);
        for a in 0..qs.len() {
            let p = pick_positive(&set, a).unwrap();
            prop_assert_eq!(p, brute_positive(&qs, a));
            let dp = (qs[p] - qs[a]).abs();

            let easy: Vec<usize> = (0..qs.len())
                .filter(|&i| i != a && i != p && (qs[i] - qs[a]).abs() > dp + s)
                .collect();
            prop_assert_eq!(easy_negative_candidates(&set, a, p, s), easy);

            let hard = (0..qs.len())
                .filter(|&i| i != a && i != p && (qs[i] - qs[a]).abs() > dp)
                .min_by(|&i, &j| (qs[i] - qs[a]).abs().partial_cmp(&(qs[j] - qs[a]).abs()).unwrap().then(i.cmp(&j)));
            match (sample_hard_negative(&set, a, p), hard) {
                (Ok(got), Some(want)) => prop_assert_eq!(got, want),
                (Err(Error::EmptyNegativeSet), None) => {}
                (got, want) => prop_assert!(false, "got {:?}, want {:?}", got, want),
            }
        }
    }

    #[test]
    fn generated_triplets_respect_ordering(
        qs in prop::collection::vec(0.0f64..1.0, 5..=12),
        seed in any::<u64>(),
    ) {
        let cfg = SamplerConfig { rng_seed: seed, ..SamplerConfig::default() };
        if let Ok(ts) = generate_triplets(&[set_from(&qs)], &cfg, 20) {
            prop_assert_eq!(ts.len(), 20);
            for t in &ts {
                prop_assert!(t.satisfies_ordering(cfg.s));
                prop_assert!((t.q_p - t.q_a).abs() < (t.q_n - t.q_a).abs());
            }
        }
    }
}

#[test]
fn generation_is_deterministic() {
    let sets = vec![set_from(&[0.9, 0.7, 0.5, 0.3, 0.1]), set_from(&[0.95, 0.6, 0.2, 0.05])];
    let cfg = SamplerConfig { rng_seed: 42, ..SamplerConfig::default() };
    let a = generate_triplets(&sets, &cfg, 50).unwrap();
    let b = generate_triplets(&sets, &cfg, 50).unwrap();
    assert_eq!(a, b);
}

#[test]
fn equal_scores_exhaust_the_sampler() {
    let sets = vec![set_from(&[0.5, 0.5, 0.5, 0.5])];
    match generate_triplets(&sets, &SamplerConfig::default(), 3) {
        Err(Error::ExhaustedSampler { found: 0, requested: 3 }) => {}
        other => panic!("unexpected {other:?}"),
    }
}
