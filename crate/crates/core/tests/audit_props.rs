//! Properties of the plug-in DP estimator, the fair-set geometry on
//! finite audit sets, and the minimal-flip search, checked against
//! exhaustive enumeration.

use fairaudit_core::audit::*;
use fairaudit_core::strategies::{generate_task, population_label_dp, SyntheticTask};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn build_set(groups: &[bool]) -> AuditSet {
    let samples = groups
        .iter()
        .enumerate()
        .map(|(id, &group)| AuditSample {
            id,
            features: vec![id as f64],
            group,
            label: None,
        })
        .collect();
    AuditSet::new(samples).unwrap()
}

fn brute_min_flips(answers: &AnswerVector, s: &AuditSet, epsilon: f64) -> usize {
    let n = s.len();
    let mut best = usize::MAX;
    for mask in 0u32..(1 << n) {
        let bits: Vec<bool> = (0..n).map(|i| mask >> i & 1 == 1).collect();
        let candidate = AnswerVector::new(bits);
        if dp_estimate(&candidate, s).unwrap().abs() <= epsilon + 1e-12 {
            best = best.min(candidate.hamming(answers));
        }
    }
    best
}

fn groups_strategy(max_len: usize) -> impl Strategy<Value = Vec<bool>> {
    prop::collection::vec(any::<bool>(), 2..=max_len)
        .prop_filter("both groups present", |g| {
            g.iter().any(|&x| x) && g.iter().any(|&x| !x)
        })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn minimal_flips_matches_brute_force(
        groups in groups_strategy(12),
        seed in any::<u64>(),
        eps_choice in 0usize..3,
    ) {
        let s = build_set(&groups);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let answers = AnswerVector::new((0..s.len()).map(|_| rng.gen()).collect());
        let epsilon = [0.0, 0.05, 0.25][eps_choice];
        let fast = minimal_flips_to_fair(&answers, &s, epsilon).unwrap();
        let brute = brute_min_flips(&answers, &s, epsilon);
        prop_assert_eq!(fast, brute, "groups={:?} eps={}", &groups, epsilon);
    }

    #[test]
    fn count_targets_reach_fairness(
        groups in groups_strategy(40),
        seed in any::<u64>(),
    ) {
        let s = build_set(&groups);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let answers = AnswerVector::new((0..s.len()).map(|_| rng.gen()).collect());
        let epsilon = 0.02;
        let (d0, d1) = fair_count_targets(&answers, &s, epsilon).unwrap();
        // apply the deltas in index order and recheck the constraint
        let mut bits = answers.bits().to_vec();
        for (group, delta) in [(false, d0), (true, d1)] {
            let target = delta > 0;
            let mut remaining = delta.unsigned_abs();
            for i in s.group_positions(group) {
                if remaining == 0 { break; }
                if bits[i] != target {
                    bits[i] = target;
                    remaining -= 1;
                }
            }
            prop_assert_eq!(remaining, 0, "delta exceeds available flips");
        }
        let fixed = AnswerVector::new(bits);
        prop_assert!(dp_estimate(&fixed, &s).unwrap().abs() <= epsilon + 1e-12);
        prop_assert_eq!(
            fixed.hamming(&answers),
            (d0.unsigned_abs() + d1.unsigned_abs()) as usize
        );
    }

    #[test]
    fn hyperplane_dot_equals_dp(groups in groups_strategy(40), seed in any::<u64>()) {
        let s = build_set(&groups);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let answers = AnswerVector::new((0..s.len()).map(|_| rng.gen()).collect());
        let hyperplane = fair_hyperplane(&s).unwrap();
        let dp = dp_estimate(&answers, &s).unwrap();
        prop_assert!((hyperplane.dot(&answers) - dp).abs() <= 1e-12);
    }

    #[test]
    fn l2_and_hamming_bridge(groups in groups_strategy(40), seed in any::<u64>()) {
        // for binary vectors the squared Euclidean distance equals the
        // flip count, so detection_score * |S| is a squared distance
        let s = build_set(&groups);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let labels: Vec<bool> = (0..s.len()).map(|_| rng.gen()).collect();
        let answers = AnswerVector::new((0..s.len()).map(|_| rng.gen()).collect());
        let labeled = AuditSet::new(
            s.samples()
                .iter()
                .zip(&labels)
                .map(|(sample, &label)| AuditSample {
                    label: Some(label),
                    ..sample.clone()
                })
                .collect(),
        )
        .unwrap();
        let prior = DatasetPrior::new(labeled.clone(), 1.0).unwrap();
        let score = detection_score(&answers, &prior, &labeled).unwrap();
        let l2_sq: f64 = answers
            .bits()
            .iter()
            .zip(&labels)
            .map(|(&a, &b)| {
                let d = a as u8 as f64 - b as u8 as f64;
                d * d
            })
            .sum();
        prop_assert!((score * s.len() as f64 - l2_sq).abs() <= 1e-9);
    }

    #[test]
    fn audit_set_csv_round_trip(
        groups in groups_strategy(12),
        seed in any::<u64>(),
        labeled in any::<bool>(),
    ) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let samples: Vec<AuditSample> = groups
            .iter()
            .enumerate()
            .map(|(id, &group)| AuditSample {
                id,
                features: (0..3).map(|_| rng.gen::<f64>() * 200.0 - 100.0).collect(),
                group,
                label: labeled.then(|| rng.gen()),
            })
            .collect();
        let set = AuditSet::new(samples).unwrap();
        let mut buf = Vec::new();
        write_audit_set(&set, &mut buf).unwrap();
        let back = read_audit_set(&buf[..]).unwrap();
        prop_assert_eq!(set, back);
    }

    #[test]
    fn float_format_round_trips_exactly(v in any::<f64>().prop_filter("finite", |v| v.is_finite())) {
        let text = fmt_f64(v);
        let back: f64 = text.parse().unwrap();
        prop_assert_eq!(v.to_bits(), back.to_bits(), "{}", text);
    }
}

#[test]
fn minimal_flips_matches_brute_force_on_100_fixed_instances() {
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    for instance in 0..100 {
        let n = rng.gen_range(4..=14);
        let mut groups: Vec<bool> = (0..n).map(|_| rng.gen()).collect();
        groups[0] = false;
        groups[1] = true;
        let s = build_set(&groups);
        let answers = AnswerVector::new((0..n).map(|_| rng.gen()).collect());
        let epsilon = [0.0, 0.02, 0.1][instance % 3];
        assert_eq!(
            minimal_flips_to_fair(&answers, &s, epsilon).unwrap(),
            brute_min_flips(&answers, &s, epsilon),
            "instance {} groups {:?}",
            instance,
            groups
        );
    }
}

#[test]
fn dp_estimator_is_consistent_for_generator_labels() {
    let task = SyntheticTask::default_hard();
    let population = population_label_dp(&task, 400_000, 7);
    let mut sum = 0.0;
    let sets = 300;
    for i in 0..sets {
        let set = generate_task(&task, 200, 1000 + i).unwrap();
        sum += dp_estimate(&set.labels().unwrap(), &set).unwrap();
    }
    let mean = sum / sets as f64;
    assert!(
        (mean - population).abs() <= 0.02,
        "mean {} vs population {}",
        mean,
        population
    );
}
