use std::collections::BTreeSet;
use std::sync::Arc;

use proptest::prelude::*;
use quadsub::instance::{random_diversity_instance, BaseKind};
use quadsub::ipe::{distance_to_inner, lift_p, lift_q};
use quadsub::linalg::{dot, norm, quadratic_form, squared_distance};
use quadsub::lsh::LshQuadraticSearch;
use quadsub::maximizers::{
    greedy, greedy_batch, greedy_naive, perturbed_greedy_bound, BackendKind, GreedyConfig, PerturbPattern,
};
use quadsub::oracle::brute_force_opt;
use quadsub::qfs::{flatten, vectorize, CandidateSet, QfsVariant};
use quadsub::sketch::SketchEnsemble;
use quadsub::{evaluate_f, marginal_gain, Constraint, DiversityFamily, GroundVectors, Instance, Matrix};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn diversity(n: usize, d: usize, lambda_scale: f64, seed: u64) -> (GroundVectors, DiversityFamily) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    random_diversity_instance(n, d, 1.0, lambda_scale, BaseKind::RandomDiagonal, &mut rng).unwrap()
}

fn vector(len: usize) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(-1.0f64..1.0, len)
}

fn ball_vector(len: usize) -> impl Strategy<Value = Vec<f64>> {
    vector(len).prop_map(|v| {
        let n = norm(&v);
        if n > 1.0 {
            v.iter().map(|x| x / n).collect()
        } else {
            v
        }
    })
}

fn square(d: usize) -> impl Strategy<Value = Matrix> {
    vector(d * d).prop_map(move |v| Matrix::from_vec(d, d, v).unwrap())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(100))]

    #[test]
    fn evaluate_f_is_permutation_invariant(seed in any::<u64>(), n in 2usize..10, d in 1usize..5) {
        let (gv, fam) = diversity(n, d, 0.8, seed);
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 1);
        let mut chain: Vec<usize> = (0..n).collect();
        chain.shuffle(&mut rng);
        chain.truncate(n / 2 + 1);
        let base = evaluate_f(&gv, &fam, &chain).unwrap();
        for _ in 0..5 {
            chain.shuffle(&mut rng);
            let other = evaluate_f(&gv, &fam, &chain).unwrap();
            prop_assert!((base - other).abs() <= 1e-9 * base.abs().max(1e-12));
        }
        let closed = fam.value(&gv, &chain);
        prop_assert!((base - closed).abs() <= 1e-9 * base.abs().max(1.0));
    }

    #[test]
    fn marginal_gain_is_a_difference_of_values(seed in any::<u64>(), n in 2usize..10, d in 1usize..5) {
        let (gv, fam) = diversity(n, d, 1.0, seed);
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 2);
        let mut order: Vec<usize> = (0..n).collect();
        order.shuffle(&mut rng);
        let (i, set) = (order[0], &order[1..n / 2 + 1]);
        let gain = marginal_gain(&gv, &fam, set, i).unwrap();
        let mut with = set.to_vec();
        with.push(i);
        let diff = evaluate_f(&gv, &fam, &with).unwrap() - evaluate_f(&gv, &fam, set).unwrap();
        prop_assert!((gain - diff).abs() <= 1e-9 * gain.abs().max(1.0));
    }

    #[test]
    fn diversity_family_is_submodular(seed in any::<u64>(), n in 3usize..10, d in 1usize..5, scale in 0.0f64..1.0) {
        let (gv, fam) = diversity(n, d, scale, seed);
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 3);
        let mut order: Vec<usize> = (0..n).collect();
        order.shuffle(&mut rng);
        let i = order[0];
        let t = &order[1..];
        let s = &t[..t.len() / 2];
        let small = marginal_gain(&gv, &fam, s, i).unwrap();
        let large = marginal_gain(&gv, &fam, t, i).unwrap();
        prop_assert!(large <= small + 1e-10);
    }

    #[test]
    fn flattening_turns_quadratic_forms_into_inner_products(u in vector(5), m in square(5)) {
        let lhs = dot(&flatten(&u), &vectorize(&m));
        let rhs = quadratic_form(&m, &u);
        prop_assert!((lhs - rhs).abs() <= 1e-10 * rhs.abs().max(1.0));
        prop_assert!((norm(&flatten(&u)) - dot(&u, &u)).abs() <= 1e-12);
    }

    #[test]
    fn lifts_are_unit_and_preserve_inner_products(a in ball_vector(6), b in ball_vector(6), bound in 0.5f64..4.0) {
        let (qa, pb) = (lift_q(&a), lift_p(&b));
        prop_assert!((norm(&qa) - 1.0).abs() <= 1e-12);
        prop_assert!((norm(&pb) - 1.0).abs() <= 1e-12);
        prop_assert!((dot(&qa, &pb) - dot(&a, &b)).abs() <= 1e-12);
        let x: Vec<f64> = a.iter().map(|v| v * bound).collect();
        let dist = squared_distance(&qa, &pb).sqrt();
        prop_assert!((distance_to_inner(dist, bound) - dot(&x, &b)).abs() <= 1e-10 * bound);
    }

    #[test]
    fn sketches_are_linear(x in vector(6), q in vector(6), seed in any::<u64>()) {
        let pts = Matrix::from_rows(std::slice::from_ref(&x)).unwrap();
        let ens = SketchEnsemble::new(&pts, 0.4, 0.2, seed).unwrap();
        let diff: Vec<f64> = x.iter().zip(&q).map(|(a, b)| a - b).collect();
        let s = ens.sketch_dim();
        for l in [0, ens.params().sketches - 1] {
            let map = ens.map(l);
            let (mut pd, mut pq) = (vec![0.0; s], vec![0.0; s]);
            map.apply(&diff, &mut pd);
            map.apply(&q, &mut pq);
            for r in 0..s {
                let rebuilt = ens.sketched(l, 0)[r] - pq[r];
                prop_assert!((pd[r] - rebuilt).abs() <= 1e-12 * (1.0 + pq[r].abs() + pd[r].abs()));
            }
        }
    }

    #[test]
    fn candidate_deletes_shrink_by_one(n in 1usize..40, picks in prop::collection::vec(any::<prop::sample::Index>(), 0..60)) {
        let mut live = CandidateSet::full(n);
        let mut shadow: BTreeSet<usize> = (0..n).collect();
        for p in picks {
            let i = p.index(n);
            let before = live.len();
            if shadow.remove(&i) {
                live.delete(i).unwrap();
                prop_assert_eq!(live.len(), before - 1);
            } else {
                prop_assert!(live.delete(i).is_err());
                prop_assert_eq!(live.len(), before);
            }
        }
        prop_assert!(live.iter().eq(shadow.iter().copied()));
    }

    #[test]
    fn batch_chain_equals_naive_chain(seed in any::<u64>(), n in 1usize..60, d in 1usize..9, k in 0usize..8) {
        let (gv, fam) = diversity(n, d, 0.9, seed);
        let inst = Instance::new(gv, Arc::new(fam)).unwrap();
        let k = k.min(n);
        let a = greedy_naive(&inst, k).unwrap();
        let b = greedy_batch(&inst, k).unwrap();
        prop_assert_eq!(&a.chain, &b.chain);
        prop_assert_eq!(&a.gains, &b.gains);
    }

    #[test]
    fn chains_never_repeat_and_exact_gains_are_nonnegative(seed in any::<u64>(), n in 2usize..20, d in 1usize..5) {
        let (gv, fam) = diversity(n, d, 1.0, seed);
        let inst = Instance::new(gv, Arc::new(fam)).unwrap();
        let k = n / 2;
        for backend in [
            BackendKind::Exact,
            BackendKind::Sketch(QfsVariant::Flat),
            BackendKind::Lsh { c: 0.9, tau: 0.5 },
            BackendKind::Perturbed(PerturbPattern::ByParity),
        ] {
            let cfg = GreedyConfig::new(k, backend).with_seed(seed).with_eps(0.1);
            let run = greedy(&inst, &cfg).unwrap();
            let unique: BTreeSet<_> = run.chain.iter().collect();
            prop_assert_eq!(unique.len(), run.chain.len());
            prop_assert!(run.is_consistent());
            if backend == BackendKind::Exact {
                prop_assert!(run.gains.iter().all(|&g| g >= -1e-12));
            }
        }
    }

    #[test]
    fn lsh_delete_clears_every_table(seed in any::<u64>(), n in 2usize..30, victim in any::<prop::sample::Index>()) {
        let (gv, _) = diversity(n, 3, 0.0, seed);
        let mut search = LshQuadraticSearch::new(&gv, 0.9, 0.6, 0.1, seed).unwrap();
        let i = victim.index(n);
        prop_assert_eq!(search.ensemble().occurrences(i), search.ensemble().params().tables);
        search.delete(i).unwrap();
        prop_assert_eq!(search.ensemble().occurrences(i), 0);
        prop_assert!(search.delete(i).is_err());
    }

    #[test]
    fn worst_case_oracle_meets_perturbed_bound(seed in any::<u64>(), n in 2usize..10, d in 1usize..4, k in 1usize..4) {
        let (gv, fam) = diversity(n, d, 1.0, seed);
        let inst = Instance::new(gv, Arc::new(fam)).unwrap();
        let k = k.min(n);
        let opt = brute_force_opt(&inst.vectors, inst.oracle.as_ref(), &Constraint::Cardinality(k)).unwrap();
        for pattern in [PerturbPattern::DemoteBest, PerturbPattern::ByParity] {
            let cfg = GreedyConfig::new(k, BackendKind::Perturbed(pattern)).with_eps(0.05);
            let run = greedy(&inst, &cfg).unwrap();
            prop_assert!(run.value >= perturbed_greedy_bound(opt.best_value, k, 0.05) - 1e-12);
        }
    }
}
