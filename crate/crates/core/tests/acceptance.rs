//! Acceptance battery. Runs every criterion, prints one status line each and
//! exits non-zero if any criterion fails. FLAG marks a criterion that could
//! not be established on this machine and is reported without failing.

use std::fmt::Write as _;
use std::process::ExitCode;
use std::sync::Arc;
use std::time::{Duration, Instant};

use quadsub::instance::{random_diversity_instance, BaseKind};
use quadsub::ipe::{distance_to_inner, lift_p, lift_q, IpeState};
use quadsub::linalg::{dot, gemm_naive, norm, quadratic_form, squared_distance};
use quadsub::lsh::{HashEnsemble, LshParams};
use quadsub::maximizers::{
    greedy, greedy_batch, greedy_fast, greedy_matroid, greedy_naive, knapsack_two_pass, perturbed_greedy_bound,
    semi_online_run, BackendKind, GreedyConfig, NullAdversary, PerturbPattern, GREEDY_RATIO, KNAPSACK_RATIO,
    MATROID_RATIO,
};
use quadsub::oracle::{brute_force_opt, exact_inner_products, exact_qf_argmax};
use quadsub::qfs::{flatten, vectorize, QfsVariant, QuadraticFormSearch};
use quadsub::sketch::{EnsembleParams, SketchOptions};
use quadsub::{Constraint, Error, GroundVectors, Instance, Matrix, PartitionMatroid};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Status {
    Pass,
    Fail,
    Flag,
}

struct Outcome {
    status: Status,
    detail: String,
}

impl Outcome {
    fn check(ok: bool, detail: String) -> Self {
        Self {
            status: if ok { Status::Pass } else { Status::Fail },
            detail,
        }
    }
}

fn unit(d: usize, rng: &mut ChaCha8Rng) -> Vec<f64> {
    let g: Vec<f64> = (0..d).map(|_| rng.sample(StandardNormal)).collect();
    let n = norm(&g);
    g.iter().map(|v| v / n).collect()
}

fn in_ball(d: usize, radius: f64, rng: &mut ChaCha8Rng) -> Vec<f64> {
    let r = radius * rng.random_range(0.0..=1.0);
    unit(d, rng).iter().map(|v| v * r).collect()
}

fn random_psd(d: usize, rng: &mut ChaCha8Rng) -> Matrix {
    let data = (0..d * d).map(|_| rng.sample(StandardNormal)).collect();
    let b = Matrix::from_vec(d, d, data).unwrap();
    let psd = gemm_naive(&b.transpose(), &b);
    let f = psd.frobenius_norm();
    psd.scaled(1.0 / f)
}

fn small_instance(rng: &mut ChaCha8Rng, n_range: std::ops::RangeInclusive<usize>) -> Instance {
    let n = rng.random_range(n_range);
    let d = rng.random_range(2..=6);
    let scale = rng.random_range(0.0..=1.0);
    let base = if rng.random_bool(0.5) {
        BaseKind::Identity
    } else {
        BaseKind::RandomDiagonal
    };
    let (gv, fam) = random_diversity_instance(n, d, 1.0, scale, base, rng).unwrap();
    Instance::new(gv, Arc::new(fam)).unwrap()
}

fn rel_err(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs().max(1.0)
}

fn criterion_1() -> Outcome {
    let started = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let mut worst: f64 = 0.0;
    let cases = 2000;
    for _ in 0..cases {
        let d = rng.random_range(1..=12);
        let u: Vec<f64> = (0..d).map(|_| rng.random_range(-2.0..2.0)).collect();
        let data = (0..d * d).map(|_| rng.random_range(-1.0..1.0)).collect();
        let m = Matrix::from_vec(d, d, data).unwrap();
        worst = worst.max(rel_err(dot(&flatten(&u), &vectorize(&m)), quadratic_form(&m, &u)));

        let a = in_ball(d, 1.0, &mut rng);
        let b = in_ball(d, 1.0, &mut rng);
        let (qa, pb) = (lift_q(&a), lift_p(&b));
        worst = worst.max((norm(&qa) - 1.0).abs()).max((norm(&pb) - 1.0).abs());
        worst = worst.max(rel_err(dot(&qa, &pb), dot(&a, &b)));

        let bound = rng.random_range(0.1..10.0);
        let x: Vec<f64> = a.iter().map(|v| v * bound).collect();
        let dist = squared_distance(&qa, &pb).sqrt();
        worst = worst.max(rel_err(distance_to_inner(dist, bound), dot(&x, &b)));
    }
    let elapsed = started.elapsed();
    Outcome::check(
        worst <= 1e-10 && elapsed < Duration::from_secs(5),
        format!("max relative error {worst:.2e} over {cases}x3 cases, {:.2?} (limit 1e-10, 5 s)", elapsed),
    )
}

fn criterion_2() -> Outcome {
    let started = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let mut violations = 0;
    let mut worst_ratio = f64::INFINITY;
    for _ in 0..200 {
        let inst = small_instance(&mut rng, 4..=12);
        let k = rng.random_range(1..=4).min(inst.n());
        let opt = brute_force_opt(&inst.vectors, inst.oracle.as_ref(), &Constraint::Cardinality(k)).unwrap();
        let run = greedy_naive(&inst, k).unwrap();
        if opt.best_value > 0.0 {
            worst_ratio = worst_ratio.min(run.value / opt.best_value);
        }
        if run.value < GREEDY_RATIO * opt.best_value - 1e-12 {
            violations += 1;
        }
    }
    let elapsed = started.elapsed();
    Outcome::check(
        violations == 0 && elapsed < Duration::from_secs(60),
        format!("{violations} violations of f >= (1-1/e) OPT on 200 instances, worst ratio {worst_ratio:.4}, {elapsed:.2?}"),
    )
}

fn criterion_3() -> Outcome {
    let eps = 0.05;
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut violations = 0;
    let mut tightest = f64::INFINITY;
    for _ in 0..200 {
        let inst = small_instance(&mut rng, 4..=12);
        let k = rng.random_range(1..=4).min(inst.n());
        let opt = brute_force_opt(&inst.vectors, inst.oracle.as_ref(), &Constraint::Cardinality(k)).unwrap();
        let bound = perturbed_greedy_bound(opt.best_value, k, eps);
        for pattern in [PerturbPattern::DemoteBest, PerturbPattern::ByParity] {
            let cfg = GreedyConfig::new(k, BackendKind::Perturbed(pattern)).with_eps(eps);
            let run = greedy(&inst, &cfg).unwrap();
            tightest = tightest.min(run.value - bound);
            if run.value < bound - 1e-12 {
                violations += 1;
            }
        }
    }
    Outcome::check(
        violations == 0,
        format!("{violations} violations over 200 instances x 2 error patterns (eps = {eps}), min slack {tightest:.4}"),
    )
}

fn criterion_4() -> Outcome {
    let started = Instant::now();
    let (n, d, eps, delta) = (200, 16, 0.1, 0.05);
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let queries: Vec<Vec<f64>> = (0..20).map(|_| unit(d, &mut rng)).collect();
    let builds = 100;
    let mut failed_builds = 0;
    let mut worst: f64 = 0.0;
    for b in 0..builds {
        let rows: Vec<Vec<f64>> = (0..n).map(|_| in_ball(d, 1.0, &mut rng)).collect();
        let pts = Matrix::from_rows(&rows).unwrap();
        let ipe = IpeState::new(&pts, 1.0, eps, delta, 1000 + b).unwrap();
        let mut bad = false;
        for q in &queries {
            let est = ipe.query(q).unwrap();
            let truth = exact_inner_products(&pts, q).unwrap();
            for (e, t) in est.iter().zip(&truth) {
                worst = worst.max((e - t).abs());
                bad |= (e - t).abs() > eps;
            }
        }
        failed_builds += usize::from(bad);
    }
    let rate = failed_builds as f64 / builds as f64;
    let elapsed = started.elapsed();
    Outcome::check(
        rate <= delta + 0.03 && elapsed < Duration::from_secs(120),
        format!(
            "{failed_builds}/{builds} builds with a violation (rate {rate:.3}, limit {:.2}), max |error| {worst:.4}, {elapsed:.2?}",
            delta + 0.03
        ),
    )
}

fn criterion_5() -> Outcome {
    let (eps, delta) = (0.05, 0.05);
    let mut details = String::new();
    let mut ok = true;
    for (v, variant) in [QfsVariant::Flat, QfsVariant::Columns].into_iter().enumerate() {
        let mut rng = ChaCha8Rng::seed_from_u64(50 + v as u64);
        let mut violations = 0;
        for trial in 0..100 {
            let d = rng.random_range(2..=5);
            let rows: Vec<Vec<f64>> = (0..60).map(|_| in_ball(d, 1.0, &mut rng)).collect();
            let gv = GroundVectors::from_rows(&rows, Some(1.0)).unwrap();
            let m = random_psd(d, &mut rng);
            let qfs = QuadraticFormSearch::new(&gv, eps, delta, variant, trial).unwrap();
            let j = qfs.query(&m).unwrap();
            let (_, best) = exact_qf_argmax(&gv, &m, 0..gv.n()).unwrap();
            if quadratic_form(&m, gv.row(j)) < best - 2.0 * eps {
                violations += 1;
            }
        }
        let rate = violations as f64 / 100.0;
        ok &= rate <= delta + 0.03;
        let _ = write!(details, "{}: {violations}/100 ", variant.name());
    }
    Outcome::check(ok, format!("2-eps violations {details}(limit rate {:.2})", delta + 0.03))
}

fn criterion_6() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let shapes = [(10, 4), (10, 32), (100, 4), (100, 32), (1000, 4), (1000, 32)];
    let mut mismatches = 0;
    let mut indivisible = 0;
    for t in 0..100 {
        let (n, d) = shapes[t % shapes.len()];
        indivisible += usize::from(n % d != 0);
        let (gv, fam) = random_diversity_instance(n, d, 1.0, rng.random_range(0.0..=1.0), BaseKind::RandomDiagonal, &mut rng).unwrap();
        let inst = Instance::new(gv, Arc::new(fam)).unwrap();
        let k = n.min(10);
        let a = greedy_naive(&inst, k).unwrap();
        let b = greedy_batch(&inst, k).unwrap();
        if a.chain != b.chain || a.gains != b.gains {
            mismatches += 1;
        }
    }
    Outcome::check(
        mismatches == 0,
        format!("{mismatches}/100 instances where batch differs from naive ({indivisible} with n not divisible by d)"),
    )
}

fn criterion_7() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let mut violations = 0;
    let mut worst_ratio = f64::INFINITY;
    for _ in 0..100 {
        let inst = small_instance(&mut rng, 4..=12);
        let n = inst.n();
        let blocks = rng.random_range(2..=4);
        let block_of: Vec<usize> = (0..n).map(|_| rng.random_range(0..blocks)).collect();
        let capacity: Vec<usize> = (0..blocks).map(|_| rng.random_range(1..=2)).collect();
        let matroid = Arc::new(PartitionMatroid::new(block_of, capacity).unwrap());
        let opt = brute_force_opt(&inst.vectors, inst.oracle.as_ref(), &Constraint::Matroid(matroid.clone())).unwrap();
        let run = greedy_matroid(&inst, matroid.as_ref(), &GreedyConfig::new(0, BackendKind::Exact)).unwrap();
        if opt.best_value > 0.0 {
            worst_ratio = worst_ratio.min(run.value / opt.best_value);
        }
        if run.value < MATROID_RATIO * opt.best_value - 1e-12 {
            violations += 1;
        }
    }
    Outcome::check(
        violations == 0,
        format!("{violations} violations of f >= OPT/2 on 100 partition-matroid instances, worst ratio {worst_ratio:.4}"),
    )
}

fn criterion_8() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let mut violations = 0;
    let mut worst_ratio = f64::INFINITY;
    for _ in 0..100 {
        let inst = small_instance(&mut rng, 4..=12);
        let n = inst.n();
        let weights: Vec<f64> = (0..n).map(|_| rng.random_range(0.2..1.5)).collect();
        let budget = rng.random_range(1.0..3.0);
        let constraint = Constraint::knapsack(weights.clone(), budget).unwrap();
        let opt = brute_force_opt(&inst.vectors, inst.oracle.as_ref(), &constraint).unwrap();
        let run = knapsack_two_pass(&inst, &weights, budget, &GreedyConfig::new(0, BackendKind::Exact)).unwrap();
        let best = run.best();
        assert!(constraint.admits(&best.chain));
        if opt.best_value > 0.0 {
            worst_ratio = worst_ratio.min(best.value / opt.best_value);
        }
        if best.value < KNAPSACK_RATIO * opt.best_value - 1e-12 {
            violations += 1;
        }
    }
    Outcome::check(
        violations == 0,
        format!("{violations} violations of f >= (1/2 - 1/(2e)) OPT on 100 knapsack instances, worst ratio {worst_ratio:.4}"),
    )
}

/// `a·q + √(1 − a²)·w` for a random unit `w ⊥ q`.
fn at_inner_product(q: &[f64], a: f64, rng: &mut ChaCha8Rng) -> Vec<f64> {
    let mut w = unit(q.len(), rng);
    let proj = dot(&w, q);
    w.iter_mut().zip(q).for_each(|(x, y)| *x -= proj * y);
    let wn = norm(&w);
    let b = (1.0 - a * a).sqrt();
    q.iter().zip(&w).map(|(y, x)| a * y + b * x / wn).collect()
}

fn criterion_9() -> Outcome {
    let (n, d, c, tau, delta) = (500, 32, 0.9, 0.8, 0.1);
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let params = LshParams::for_recall(n, c, tau, delta).unwrap();
    let mut hits = 0;
    let mut leaked = 0;
    for trial in 0..200 {
        let q = unit(d, &mut rng);
        let planted = rng.random_range(0..n);
        let rows: Vec<Vec<f64>> = (0..n)
            .map(|i| {
                let a = if i == planted { 0.9 } else { rng.random_range(-0.1..=0.1) };
                at_inner_product(&q, a, &mut rng)
            })
            .collect();
        let pts = Matrix::from_rows(&rows).unwrap();
        let mut ens = HashEnsemble::new(&pts, params, 9000 + trial).unwrap();
        if let Some(i) = ens.query(&q).unwrap() {
            if dot(&rows[i], &q) >= c * tau {
                hits += 1;
            }
        }
        let mut deleted = vec![planted];
        deleted.extend((0..5).map(|_| rng.random_range(0..n)).filter(|&i| i != planted));
        deleted.sort();
        deleted.dedup();
        for &i in &deleted {
            ens.delete(i).unwrap();
        }
        for probe in [q.clone(), rows[planted].clone(), rows[deleted[deleted.len() - 1]].clone()] {
            if let Some(i) = ens.query(&probe).unwrap() {
                leaked += usize::from(deleted.contains(&i));
            }
            if let Some((i, _)) = ens.probe(&probe).unwrap().best {
                leaked += usize::from(deleted.contains(&i));
            }
        }
    }
    let recall = hits as f64 / 200.0;
    Outcome::check(
        recall >= (1.0 - delta) - 0.05 && leaked == 0,
        format!(
            "recall {recall:.3} over 200 planted trials (T = {}, K = {}, limit {:.2}); {leaked} deleted indices returned",
            params.tables,
            params.bits,
            1.0 - delta - 0.05
        ),
    )
}

fn median_step(run_timings: &[Duration]) -> Duration {
    let mut t = run_timings.to_vec();
    t.sort();
    t[t.len() / 2]
}

fn criterion_10() -> Outcome {
    let (n, k, eps, delta) = (5000, 10, 0.2, 0.1);
    let mut rng = ChaCha8Rng::seed_from_u64(10);
    let mut naive_steps = Vec::new();
    let mut lines = String::new();
    let mut crossover = None;
    let opts = SketchOptions::default();
    for d in [32usize, 64, 128] {
        let (gv, fam) = random_diversity_instance(n, d, 1.0, 0.5, BaseKind::Identity, &mut rng).unwrap();
        let inst = Instance::new(gv, Arc::new(fam)).unwrap();
        let naive = greedy_naive(&inst, k).unwrap();
        let naive_step = median_step(&naive.timings);
        naive_steps.push(naive_step);

        let cfg = GreedyConfig::new(k, BackendKind::Sketch(QfsVariant::Flat)).with_eps(eps).with_delta(delta);
        let flat_dim = d * d + 2;
        let (eps_prime, _) = quadsub::ipe::error_budget(eps, 1.0);
        let params = EnsembleParams::for_accuracy(n, eps_prime, delta / k as f64).unwrap();
        let fast_step_flops = params.query_flops(n, flat_dim);
        let naive_step_flops = (n * d * d) as u128;
        let status = match greedy_fast(&inst, &cfg) {
            Ok(run) => {
                let fast_step = median_step(&run.timings);
                if fast_step < naive_step && crossover.is_none() {
                    crossover = Some(d);
                }
                format!("fast {fast_step:.2?}/step")
            }
            Err(Error::Capacity { required, .. }) => format!(
                "fast infeasible: sketches need {:.1} GiB (limit {:.1} GiB)",
                required as f64 / (1u128 << 30) as f64,
                opts.memory_limit as f64 / (1u128 << 30) as f64
            ),
            Err(e) => format!("fast error: {e}"),
        };
        let _ = write!(
            lines,
            "[d={d}: naive {naive_step:.2?}/step; {status}; modeled fast/naive flops per step {:.0}x] ",
            fast_step_flops as f64 / naive_step_flops as f64
        );
    }
    // d = 256 is not run; its model ratio shows whether a crossover could appear later
    let (eps_prime, _) = quadsub::ipe::error_budget(eps, 1.0);
    let params = EnsembleParams::for_accuracy(n, eps_prime, delta / k as f64).unwrap();
    let _ = write!(
        lines,
        "[d=256 model: fast/naive flops per step {:.0}x, storage {:.0} GiB]",
        params.query_flops(n, 256 * 256 + 2) as f64 / (n * 256 * 256) as f64,
        params.storage_bytes(n, 256 * 256 + 2) as f64 / (1u128 << 30) as f64
    );
    let growth = naive_steps[2].as_secs_f64() / naive_steps[0].as_secs_f64().max(1e-12);
    let naive_ok = growth >= 3.0;
    let detail = format!(
        "naive step growth d=32->128 {growth:.1}x (need >= 3x); crossover {}; {lines}",
        crossover.map_or("none found".to_string(), |d| format!("at d={d}"))
    );
    let status = match (naive_ok, crossover) {
        (false, _) => Status::Fail,
        (true, Some(_)) => Status::Pass,
        (true, None) => Status::Flag,
    };
    Outcome { status, detail }
}

fn criterion_11() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let mut replay_mismatches = 0;
    for t in 0..20 {
        let inst = small_instance(&mut rng, 8..=30);
        let k = rng.random_range(1..=5).min(inst.n());
        let variant = if t % 2 == 0 { QfsVariant::Flat } else { QfsVariant::Columns };
        let cfg = GreedyConfig::new(k, BackendKind::Sketch(variant)).with_eps(0.1).with_seed(t);
        let fast = greedy_fast(&inst, &cfg).unwrap();
        let online = semi_online_run(&inst, &cfg, &mut NullAdversary).unwrap();
        if fast.chain != online.run.chain || fast.gains != online.run.gains {
            replay_mismatches += 1;
        }
    }

    let (n, d, eps, delta) = (200, 16, 0.1, 0.05);
    let queries: Vec<Vec<f64>> = (0..20).map(|_| unit(d, &mut rng)).collect();
    let builds = 100;
    let mut failed_builds = 0;
    for b in 0..builds {
        let mut rows: Vec<Vec<f64>> = (0..n).map(|_| in_ball(d, 1.0, &mut rng)).collect();
        let pts = Matrix::from_rows(&rows).unwrap();
        let mut ipe = IpeState::new(&pts, 1.0, eps, delta, 5000 + b).unwrap();
        let target = rng.random_range(0..n);
        rows[target] = in_ball(d, 1.0, &mut rng);
        quadsub::ipe::InnerProductEstimator::update(&mut ipe, target, &rows[target]).unwrap();
        let mut bad = false;
        for q in &queries {
            let est = ipe.query(q).unwrap();
            bad |= (est[target] - dot(&rows[target], q)).abs() > eps;
        }
        failed_builds += usize::from(bad);
    }
    let rate = failed_builds as f64 / builds as f64;
    Outcome::check(
        replay_mismatches == 0 && rate <= delta + 0.03,
        format!(
            "null-adversary replay mismatches {replay_mismatches}/20; mutated-index violations in {failed_builds}/{builds} builds (limit rate {:.2})",
            delta + 0.03
        ),
    )
}

fn main() -> ExitCode {
    type Criterion = (&'static str, fn() -> Outcome);
    let criteria: [Criterion; 11] = [
        ("exact identities", criterion_1),
        ("greedy ratio", criterion_2),
        ("perturbed-oracle bound", criterion_3),
        ("inner product estimation", criterion_4),
        ("quadratic form search", criterion_5),
        ("batch chain equality", criterion_6),
        ("matroid bound", criterion_7),
        ("knapsack bound", criterion_8),
        ("LSH recall and deletes", criterion_9),
        ("scaling sanity", criterion_10),
        ("semi-online", criterion_11),
    ];
    let mut failures = 0;
    for (i, (name, run)) in criteria.iter().enumerate() {
        let started = Instant::now();
        let outcome = run();
        let tag = match outcome.status {
            Status::Pass => "PASS",
            Status::Fail => "FAIL",
            Status::Flag => "FLAG",
        };
        failures += usize::from(outcome.status == Status::Fail);
        println!(
            "criterion {:>2} {tag} {name}: {} ({:.1?})",
            i + 1,
            outcome.detail,
            started.elapsed()
        );
    }
    if failures == 0 {
        ExitCode::SUCCESS
    } else {
        println!("{failures} criteria failed");
        ExitCode::FAILURE
    }
}
