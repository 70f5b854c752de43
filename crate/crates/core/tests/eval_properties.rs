use proptest::prelude::*;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use wogan::eval::{
    cluster, compare_generators, diversity_score, quantile_scores, rank_generators, Relation,
    ScoreSummary, Similarity,
};
use wogan::Test;

fn tests_strategy(dim: usize, max: usize) -> impl Strategy<Value = Vec<Test>> {
    prop::collection::vec(prop::collection::vec(-1.0f64..=1.0, dim), 1..max)
}

fn summary_strategy() -> impl Strategy<Value = ScoreSummary> {
    (0.0f64..1.0, 0.0f64..0.2, 0.0f64..1.0, 0.0f64..0.2).prop_map(|(q_l, s_l, q_u, s_u)| ScoreSummary {
        q_l,
        q_u,
        s_l,
        s_u,
        diversity: 0.0,
        n: 10,
    })
}

fn multiset(tests: &[Test], clusters: &[Vec<usize>]) -> Vec<Vec<Vec<u64>>> {
    let mut out: Vec<Vec<Vec<u64>>> = clusters
        .iter()
        .map(|c| {
            let mut m: Vec<Vec<u64>> = c.iter().map(|&i| tests[i].iter().map(|v| v.to_bits()).collect()).collect();
            m.sort();
            m
        })
        .collect();
    out.sort();
    out
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn clusters_partition_and_are_pairwise_similar(tests in tests_strategy(3, 60), bound in 0.5f64..0.99) {
        let sim = Similarity::Maxnorm;
        let clusters = cluster(&tests, &sim, bound).unwrap();
        let mut seen: Vec<usize> = clusters.iter().flatten().copied().collect();
        seen.sort_unstable();
        prop_assert_eq!(seen, (0..tests.len()).collect::<Vec<_>>());
        for c in &clusters {
            for &i in c {
                for &j in c {
                    prop_assert!(sim.eval(&tests[i], &tests[j]).unwrap() >= bound);
                }
            }
        }
        let d = diversity_score(&tests, &sim, bound).unwrap();
        prop_assert!(d > 0.0 && d <= 1.0);
    }

    #[test]
    fn clustering_ignores_input_order(tests in tests_strategy(2, 40), seed in any::<u64>()) {
        let sim = Similarity::Maxnorm;
        let reference = cluster(&tests, &sim, 0.9).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for _ in 0..100 {
            let mut shuffled = tests.clone();
            shuffled.shuffle(&mut rng);
            let c = cluster(&shuffled, &sim, 0.9).unwrap();
            prop_assert_eq!(multiset(&shuffled, &c), multiset(&tests, &reference));
        }
    }

    #[test]
    fn duplicates_collapse_to_one_cluster(t in prop::collection::vec(-1.0f64..=1.0, 5), n in 1usize..50) {
        let tests = vec![t; n];
        let d = diversity_score(&tests, &Similarity::Maxnorm, 0.95).unwrap();
        prop_assert_eq!(d, 1.0 / n as f64);
    }

    #[test]
    fn path_clusters_are_pairwise_similar(tests in tests_strategy(5, 30)) {
        let sim = Similarity::Path { segments: 5 };
        for c in cluster(&tests, &sim, 0.9).unwrap() {
            for &i in &c {
                for &j in &c {
                    prop_assert!(sim.eval(&tests[i], &tests[j]).unwrap() >= 0.9);
                }
            }
        }
    }

    #[test]
    fn lower_quantile_not_above_upper(v in prop::collection::vec(0.0f64..=1.0, 1..200), q in 0.01f64..=0.5) {
        let (l, u) = quantile_scores(&v, q).unwrap();
        prop_assert!(l <= u);
        prop_assert!(v.contains(&l) && v.contains(&u));
    }

    #[test]
    fn adding_zero_never_raises_lower_quantile(v in prop::collection::vec(0.0f64..=1.0, 1..200)) {
        let (l, _) = quantile_scores(&v, 0.25).unwrap();
        let mut w = v.clone();
        w.push(0.0);
        let (l2, _) = quantile_scores(&w, 0.25).unwrap();
        prop_assert!(l2 <= l);
    }

    #[test]
    fn comparison_is_antisymmetric(a in summary_strategy(), b in summary_strategy()) {
        let ab = compare_generators(&a, &b);
        let ba = compare_generators(&b, &a);
        let flipped = match ab {
            Relation::Better => Relation::Worse,
            Relation::Worse => Relation::Better,
            Relation::Tie => Relation::Tie,
        };
        prop_assert_eq!(ba, flipped);
        prop_assert_eq!(compare_generators(&a, &a), Relation::Tie);
    }

    #[test]
    fn ranks_follow_counts(s in prop::collection::vec(summary_strategy(), 1..8)) {
        let (counts, ranks) = rank_generators(&s);
        prop_assert!(counts.iter().all(|&c| c >= 1 && c <= s.len()));
        prop_assert!(ranks.contains(&1));
        for i in 0..s.len() {
            for j in 0..s.len() {
                prop_assert_eq!(counts[i] > counts[j], ranks[i] < ranks[j]);
            }
        }
    }
}
