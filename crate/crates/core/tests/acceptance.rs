//! Acceptance criteria A1 to A10. Runs as a plain binary and prints one
//! PASS/FAIL line per criterion; exits non-zero if any criterion fails.

mod common;

use std::process::ExitCode;
use std::sync::Arc;
use std::time::{Duration, Instant};

use cosml::domains::{
    make_domain, sample_mixed_task, sample_novel_task, sample_pure_task, DomainGenerator,
    DomainSpec, GeneratorKind, SeedStreams, Stream, TaskShape,
};
use cosml::harness::{run_suite, ExperimentConfig, Method, SuiteRun};
use cosml::metalearn::{
    meta_test, task_manifest, AlphaChainRule, MetaState, MetaTrainer, TrainLoopConfig, WeightRule,
};
use cosml::ndcore::{
    backward, blend, features_batch, finite_diff_grad, max_relative_error, mean_loss, Activation,
    ParamVector, ShapeManifest,
};
use cosml::prototypes::{dist_to_domain, weights_from_distances, EmbeddedEpisode, PrototypeStore};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

struct Verdict {
    pass: bool,
    detail: String,
}

fn verdict(pass: bool, detail: impl Into<String>) -> Verdict {
    Verdict {
        pass,
        detail: detail.into(),
    }
}

fn gens(m: usize) -> Vec<DomainGenerator> {
    (0..m)
        .map(|i| make_domain(DomainSpec::new(i, GeneratorKind::ALL[i], 1000 + i as u64)).unwrap())
        .collect()
}

fn random_phi(input: usize, width: usize, split: usize, seed: u64) -> ParamVector<f64> {
    let hidden = vec![width; split + 1];
    let m = Arc::new(ShapeManifest::mlp(input, &hidden, 20, Activation::Relu, split).unwrap());
    ParamVector::glorot(m, 0..split, &mut ChaCha8Rng::seed_from_u64(seed)).unwrap()
}

fn a1() -> Verdict {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let (mut checked, mut redrawn, mut worst) = (0, 0, 0.0f64);
    while checked < 200 {
        let (p, batch) = common::random_net(&mut rng);
        if common::closest_kink(&p, &batch) < 1e-4 {
            redrawn += 1;
            continue;
        }
        let (_, g) = backward(&p, &batch, 0).unwrap();
        let fd = finite_diff_grad(&p, &batch, 1e-5).unwrap();
        worst = worst.max(max_relative_error(g.as_slice(), fd.as_slice()));
        checked += 1;
    }
    verdict(
        worst < 1e-5,
        format!("{checked} nets, max relative error {worst:.2e} ({redrawn} redrawn with a ReLU unit within 1e-4 of its kink)"),
    )
}

fn a2() -> Verdict {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let mut failures = 0;
    let mut worst_sum = 0.0f64;
    for _ in 0..1000 {
        let m = rng.random_range(1..=8);
        let d: Vec<f64> = (0..m)
            .map(|_| 10f64.powf(rng.random_range(-3.0..3.0)))
            .collect();
        let w = weights_from_distances(&d).unwrap().alphas;
        worst_sum = worst_sum.max((w.iter().sum::<f64>() - 1.0).abs());
        let positive = w.iter().all(|&a| a > 0.0);
        let ordered = (0..m).all(|i| (0..m).all(|j| d[i] >= d[j] || w[i] > w[j]));
        if !positive || !ordered {
            failures += 1;
        }
    }
    verdict(
        worst_sum < 1e-12 && failures == 0,
        format!("1000 vectors, max |sum - 1| {worst_sum:.1e}, {failures} order/sign violations"),
    )
}

fn a3() -> Verdict {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let manifest = Arc::new(ShapeManifest::mlp(6, &[7, 5], 4, Activation::Relu, 1).unwrap());
    let mut ok = true;
    let mut worst = 0.0f64;
    for _ in 0..200 {
        let k = rng.random_range(2..6);
        let list: Vec<ParamVector<f64>> = (0..k)
            .map(|_| {
                let len = manifest.param_count(0..3);
                ParamVector::from_values(
                    manifest.clone(),
                    0..3,
                    (0..len).map(|_| rng.random_range(-5.0..5.0)).collect(),
                )
                .unwrap()
            })
            .collect();
        let pick = rng.random_range(0..k);
        let mut hot = vec![0.0; k];
        hot[pick] = 1.0;
        ok &= blend(&list, &hot).unwrap() == list[pick];

        let w: Vec<f64> = (0..k).map(|_| rng.random_range(0.0..1.0)).collect();
        let total: f64 = w.iter().sum();
        let w: Vec<f64> = w.iter().map(|v| v / total).collect();
        let same = vec![list[0].clone(); k];
        let fixed = blend(&same, &w).unwrap();
        for (a, b) in fixed.as_slice().iter().zip(list[0].as_slice()) {
            worst = worst.max((a - b).abs());
        }

        let w1: Vec<f64> = (0..k).map(|_| rng.random_range(-1.0..1.0)).collect();
        let w2: Vec<f64> = (0..k).map(|_| rng.random_range(-1.0..1.0)).collect();
        let (s, t) = (rng.random_range(-2.0..2.0), rng.random_range(-2.0..2.0));
        let combo: Vec<f64> = w1.iter().zip(&w2).map(|(a, b)| s * a + t * b).collect();
        let lhs = blend(&list, &combo).unwrap();
        let (p1, p2) = (blend(&list, &w1).unwrap(), blend(&list, &w2).unwrap());
        for ((l, a), b) in lhs.as_slice().iter().zip(p1.as_slice()).zip(p2.as_slice()) {
            worst = worst.max((l - (s * a + t * b)).abs());
        }
    }
    verdict(
        ok && worst < 1e-12,
        format!("200 cases, one-hot exact: {ok}, max fixed-point/linearity deviation {worst:.1e}"),
    )
}

/// Plain MAML written out from scratch: SGD inner loop, summed first-order
/// query gradients, Adam outer step.
fn a4() -> Verdict {
    let g = gens(1);
    let shape = TaskShape::new(5, 5, 16);
    let phi = random_phi(8, 64, 2, 4);
    let cfg = TrainLoopConfig {
        mixed_tasks_enabled: false,
        iterations: 100,
        ..TrainLoopConfig::default()
    };
    let streams = SeedStreams::new(44);
    let mut trainer = MetaTrainer::new(&g, shape, phi.clone(), &cfg, &streams).unwrap();

    let manifest = Arc::new(task_manifest(&phi, shape.n_way).unwrap());
    let first = manifest.split_index();
    let mut theta: Vec<f64> = ParamVector::<f64>::glorot(
        manifest.clone(),
        manifest.task_layers(),
        &mut streams.stream(Stream::ThetaInit),
    )
    .unwrap()
    .into_values();
    let as_params = |v: &[f64]| {
        ParamVector::from_values(manifest.clone(), manifest.task_layers(), v.to_vec()).unwrap()
    };
    let mut tasks = streams.stream(Stream::Pure(0));
    let (mut m, mut v) = (vec![0.0; theta.len()], vec![0.0; theta.len()]);
    let (lr, b1, b2, eps) = (0.001, 0.9, 0.999, 1e-8);

    let mut worst = 0.0f64;
    for t in 1..=100 {
        let mut meta_grad = vec![0.0; theta.len()];
        for _ in 0..cfg.meta_batch {
            let ep = sample_pure_task::<f64, _>(&g[0], shape, &mut tasks).unwrap();
            let support = features_batch(&phi, &ep.support_batch().unwrap()).unwrap();
            let query = features_batch(&phi, &ep.query_batch().unwrap()).unwrap();
            let mut fast = theta.clone();
            for _ in 0..cfg.inner_steps {
                let (_, grad) = backward(&as_params(&fast), &support, first).unwrap();
                for (w, gi) in fast.iter_mut().zip(grad.as_slice()) {
                    *w -= cfg.gamma * gi;
                }
            }
            let (_, grad) = backward(&as_params(&fast), &query, first).unwrap();
            for (acc, gi) in meta_grad.iter_mut().zip(grad.as_slice()) {
                *acc += gi;
            }
        }
        for i in 0..theta.len() {
            m[i] = b1 * m[i] + (1.0 - b1) * meta_grad[i];
            v[i] = b2 * v[i] + (1.0 - b2) * meta_grad[i] * meta_grad[i];
            let mhat = m[i] / (1.0 - b1.powi(t));
            let vhat = v[i] / (1.0 - b2.powi(t));
            theta[i] -= lr * mhat / (vhat.sqrt() + eps);
        }
        trainer.step().unwrap();
        for (a, b) in trainer.state().thetas[0].as_slice().iter().zip(&theta) {
            worst = worst.max((a - b).abs());
        }
    }
    verdict(
        worst <= 1e-9,
        format!("100 iterations, max trajectory deviation {worst:.1e}"),
    )
}

fn a5() -> Verdict {
    let g = gens(2);
    let phi = random_phi(8, 12, 1, 5);
    let mut rng = ChaCha8Rng::seed_from_u64(5);

    let mut store = PrototypeStore::new(0, 12);
    let mut all: Vec<Vec<f64>> = Vec::new();
    for t in 0..50 {
        let shape = TaskShape::new(2 + t % 4, 1 + t % 3, 1 + t % 5);
        let ep = sample_pure_task(&g[0], shape, &mut rng).unwrap();
        let e = EmbeddedEpisode::new(&ep, &phi).unwrap();
        all.extend(e.support.rows().chain(e.query.rows()).map(<[f64]>::to_vec));
        store.fold_task(&ep, &phi).unwrap();
    }
    let mean_err = (0..12)
        .map(|j| {
            (store.domain_prototype()[j] - all.iter().map(|f| f[j]).sum::<f64>() / all.len() as f64)
                .abs()
        })
        .fold(0.0, f64::max);

    let mut dist_err = 0.0f64;
    for s in 0..100 {
        let mut store = PrototypeStore::new(0, 12);
        for _ in 0..rng.random_range(1..20) {
            store
                .fold_task(
                    &sample_pure_task(&g[0], TaskShape::new(5, 2, 3), &mut rng).unwrap(),
                    &phi,
                )
                .unwrap();
        }
        let probe = sample_novel_task(&g[s % 2], TaskShape::new(5, 5, 1), &mut rng).unwrap();
        let support: Vec<Vec<f64>> = features_batch(&phi, &probe.support_batch().unwrap())
            .unwrap()
            .rows()
            .map(<[f64]>::to_vec)
            .collect();
        let naive = common::naive_dist(&support, store.domain_prototype(), store.task_prototypes());
        dist_err = dist_err.max((dist_to_domain(&probe, &store, &phi).unwrap() - naive).abs());
    }
    verdict(
        mean_err < 1e-9 && dist_err < 1e-12,
        format!("running mean error {mean_err:.1e} after 50 folds; distance error {dist_err:.1e} over 100 stores"),
    )
}

fn a6() -> Verdict {
    let g = gens(3);
    let shape = TaskShape::new(3, 2, 2);
    let phi = random_phi(8, 4, 1, 6);
    let mut worst = 0.0f64;
    for rule in [AlphaChainRule::SingleAlpha, AlphaChainRule::DoubleAlpha] {
        let cfg = TrainLoopConfig {
            inner_steps: 0,
            alpha_chain_rule: rule,
            shared_init: false,
            ..TrainLoopConfig::default()
        };
        let mut rng = ChaCha8Rng::seed_from_u64(66);
        let state =
            MetaState::init(phi.clone(), vec![0, 1, 2], shape.n_way, &cfg, &mut rng).unwrap();
        let mut stores: Vec<PrototypeStore<f64>> =
            (0..3).map(|k| PrototypeStore::new(k, 4)).collect();
        for (k, s) in stores.iter_mut().enumerate() {
            for _ in 0..3 {
                s.fold_task(&sample_pure_task(&g[k], shape, &mut rng).unwrap(), &phi)
                    .unwrap();
            }
        }
        let ep = sample_mixed_task(&g, shape, &mut rng).unwrap();
        let task = EmbeddedEpisode::new(&ep, &phi).unwrap();
        let contributions = state
            .mixed_task_contributions(&stores, std::slice::from_ref(&task), &cfg)
            .unwrap();

        let support: Vec<Vec<f64>> = task.support.rows().map(<[f64]>::to_vec).collect();
        let d: Vec<f64> = stores
            .iter()
            .map(|s| common::naive_dist(&support, s.domain_prototype(), s.task_prototypes()))
            .collect();
        let inv: Vec<f64> = d.iter().map(|x| 1.0 / x).collect();
        let alpha: Vec<f64> = inv.iter().map(|x| x / inv.iter().sum::<f64>()).collect();

        for k in 0..3 {
            let objective = |values: &[f64]| {
                let mut thetas = state.thetas.clone();
                thetas[k] = thetas[k].with_values(values.to_vec()).unwrap();
                let loss = mean_loss(&blend(&thetas, &alpha).unwrap(), &task.query).unwrap();
                match rule {
                    AlphaChainRule::SingleAlpha => loss,
                    AlphaChainRule::DoubleAlpha => alpha[k] * loss,
                }
            };
            let mut point = state.thetas[k].as_slice().to_vec();
            let h = 1e-5;
            let fd: Vec<f64> = (0..point.len())
                .map(|i| {
                    let orig = point[i];
                    point[i] = orig + h;
                    let up = objective(&point);
                    point[i] = orig - h;
                    let down = objective(&point);
                    point[i] = orig;
                    (up - down) / (2.0 * h)
                })
                .collect();
            worst = worst.max(max_relative_error(contributions[k].as_slice(), &fd));
        }
    }
    verdict(
        worst < 1e-5,
        format!("3 domains, both chain rules, max relative error {worst:.1e}"),
    )
}

struct Sweep {
    runs: Vec<SuiteRun>,
    elapsed: Duration,
    seeds: Vec<u64>,
}

fn sweep() -> Sweep {
    let base = ExperimentConfig {
        hidden_width: 32,
        eval_tasks: 200,
        seeds: (0..5).collect(),
        ..ExperimentConfig::default()
    };
    let started = Instant::now();
    let runs = run_suite(
        &base,
        &[0, 1, 2, 3, 4],
        &[Method::Cosml, Method::MamlPooled, Method::CosmlNoMixed],
    );
    Sweep {
        runs,
        elapsed: started.elapsed(),
        seeds: base.seeds,
    }
}

fn accuracy(sweep: &Sweep, method: Method, holdout: usize, seed: u64) -> Option<f64> {
    sweep
        .runs
        .iter()
        .filter_map(SuiteRun::result)
        .find(|r| r.method == method && r.holdout_id == holdout && r.seed == seed)
        .map(|r| r.mean_accuracy)
}

/// Holdouts on which `better` holds for at least 4 of the 5 seeds.
fn seed_wins(
    sweep: &Sweep,
    better: impl Fn(f64, f64) -> bool,
    rival: Method,
) -> (usize, Vec<String>) {
    let mut holdouts = 0;
    let mut lines = Vec::new();
    for h in 0..5 {
        let mut wins = 0;
        let mut cells = Vec::new();
        for &s in &sweep.seeds {
            match (
                accuracy(sweep, Method::Cosml, h, s),
                accuracy(sweep, rival, h, s),
            ) {
                (Some(c), Some(r)) => {
                    wins += usize::from(better(c, r));
                    cells.push(format!("{:+.3}", c - r));
                }
                _ => cells.push("  n/a ".into()),
            }
        }
        holdouts += usize::from(wins >= 4);
        lines.push(format!(
            "      holdout {h}: cosml - {rival} per seed [{}], {wins}/5",
            cells.join(" ")
        ));
    }
    (holdouts, lines)
}

fn a7(sweep: &Sweep) -> Verdict {
    let (holdouts, lines) = seed_wins(sweep, |c, m| c - m >= 0.02, Method::MamlPooled);
    let fast = sweep.elapsed < Duration::from_secs(15 * 60);
    verdict(
        holdouts >= 3 && fast,
        format!(
            "{holdouts}/5 holdouts with a 2-point margin on 4+ seeds; sweep took {:.0}s\n{}",
            sweep.elapsed.as_secs_f64(),
            lines.join("\n")
        ),
    )
}

fn a8(sweep: &Sweep) -> Verdict {
    let (holdouts, lines) = seed_wins(sweep, |c, n| n < c, Method::CosmlNoMixed);
    verdict(
        holdouts >= 3,
        format!(
            "{holdouts}/5 holdouts where removing mixed tasks hurts on 4+ seeds\n{}",
            lines.join("\n")
        ),
    )
}

fn a9(sweep: &Sweep) -> Verdict {
    let failed = sweep.runs.iter().filter(|r| r.outcome.is_err()).count();
    let leaked: u64 = sweep
        .runs
        .iter()
        .filter_map(SuiteRun::result)
        .map(|r| r.holdout_examples_before_test)
        .sum();
    verdict(
        failed == 0 && leaked == 0,
        format!(
            "{} runs, {failed} failed, {leaked} holdout examples seen before meta-test",
            sweep.runs.len()
        ),
    )
}

fn a10() -> Verdict {
    let g = gens(5);
    let shape = TaskShape::new(5, 5, 16);
    let phi = random_phi(8, 64, 2, 10);
    let manifest = Arc::new(task_manifest(&phi, shape.n_way).unwrap());
    let zeros = ParamVector::zeros(manifest.clone(), manifest.task_layers()).unwrap();
    let state =
        MetaState::from_thetas(phi.clone(), vec![0, 1, 2, 3], vec![zeros; 4], 0.001).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(10);
    let mut stores: Vec<PrototypeStore<f64>> = (0..4).map(|k| PrototypeStore::new(k, 64)).collect();
    for (k, s) in stores.iter_mut().enumerate() {
        for _ in 0..5 {
            s.fold_task(&sample_pure_task(&g[k], shape, &mut rng).unwrap(), &phi)
                .unwrap();
        }
    }
    let mean = (0..1000)
        .map(|_| {
            let novel = sample_novel_task(&g[4], shape, &mut rng).unwrap();
            meta_test(&state, &stores, &novel, WeightRule::Similarity, 0.01, 0)
                .unwrap()
                .accuracy
        })
        .sum::<f64>()
        / 1000.0;
    verdict(
        (mean - 0.2).abs() <= 0.03,
        format!("mean accuracy {mean:.4} over 1000 novel 5-way tasks"),
    )
}

fn main() -> ExitCode {
    let mut all_pass = true;
    let mut report = |id: &str, name: &str, budget: Duration, f: &mut dyn FnMut() -> Verdict| {
        let started = Instant::now();
        let v = f();
        let took = started.elapsed();
        let pass = v.pass && took <= budget;
        all_pass &= pass;
        println!(
            "{id} {} {name}: {} [{:.1}s, budget {}s]",
            if pass { "PASS" } else { "FAIL" },
            v.detail,
            took.as_secs_f64(),
            budget.as_secs()
        );
    };
    let secs = Duration::from_secs;
    report("A1", "gradient exactness", secs(30), &mut a1);
    report("A2", "weight law", secs(5), &mut a2);
    report("A3", "blend identities", secs(5), &mut a3);
    report("A4", "MAML reduction", secs(120), &mut a4);
    report("A5", "prototype oracle", secs(30), &mut a5);
    report("A6", "mixed-update gradient oracle", secs(60), &mut a6);
    let sweep = sweep();
    let shared = secs(15 * 60);
    report(
        "A7",
        "cross-domain trend vs pooled MAML",
        shared,
        &mut || a7(&sweep),
    );
    report("A8", "mixed-task ablation direction", shared, &mut || {
        a8(&sweep)
    });
    report("A9", "no holdout leakage", shared, &mut || a9(&sweep));
    report("A10", "chance level", secs(60), &mut a10);
    if all_pass {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
