//! Acceptance criteria. Runs without the libtest harness so each criterion
//! prints exactly one PASS/FAIL line; the process exits nonzero if any fail.

mod common;

use std::sync::Mutex;
use std::time::{Duration, Instant};

use common::{experiment, untimed};
use fedagg::aggregation::{avg_difference, server_objective, AggregationConfig, ClientUpdate, StrategyKind};
use fedagg::metrics::auroc;
use fedagg::model::{gradcheck, ModelKind, ParameterVector};
use fedagg::orchestration::{
    mean_sd, run_cross_validation, run_experiment, run_experiment_with, run_rounds, ClientPool, ExperimentConfig,
    FaultInjection, RoundOptions, RunOptions,
};
use fedagg::rng::SeededRng;
use fedagg::Result;

type Verdict = std::result::Result<String, String>;
type Criterion = (&'static str, fn() -> Verdict, Duration);

fn check(ok: bool, detail: String) -> Verdict {
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn fail<E: std::fmt::Display>(e: E) -> String {
    e.to_string()
}

fn gradient_oracle() -> Verdict {
    let mut worst: f64 = 0.0;
    for kind in ModelKind::ALL {
        for seed in 1..=3 {
            let (spec, params, batch) = gradcheck::instance(kind, seed, 5).map_err(fail)?;
            let report = gradcheck::check(&spec, &params, &batch, 1e-5).map_err(fail)?;
            worst = worst.max(report.max_rel_error);
            if report.max_rel_error >= 1e-4 {
                return Err(format!(
                    "{} seed {seed}: rel error {:.3e} at coordinate {}",
                    kind.name(),
                    report.max_rel_error,
                    report.worst_index
                ));
            }
        }
    }
    Ok(format!("4 kinds x 3 seeds, max rel error {worst:.2e} < 1e-4"))
}

fn theta_trace(config: &ExperimentConfig) -> Result<Vec<ParameterVector>> {
    let mut trace = Vec::new();
    run_experiment_with(config, RunOptions::default(), |_, theta| trace.push(theta.clone()))?;
    Ok(trace)
}

fn unit_step_identity() -> Verdict {
    let avgdiff = experiment(ModelKind::Mlp, StrategyKind::Avgdiff, 2, 10, 10);
    let mut average = avgdiff.clone();
    average.aggregation.strategy = StrategyKind::Average;
    let a = theta_trace(&avgdiff).map_err(fail)?;
    let b = theta_trace(&average).map_err(fail)?;
    if a.len() != 10 || b.len() != 10 {
        return Err(format!("expected 10 rounds, got {} and {}", a.len(), b.len()));
    }
    let mut worst: f64 = 0.0;
    for (x, y) in a.iter().zip(&b) {
        worst = worst.max(x.max_abs_diff(y).map_err(fail)?);
    }
    check(worst <= 1e-12, format!("10 rounds, max |diff| {worst:.2e} <= 1e-12"))
}

fn fullbatch_special_case() -> Verdict {
    let mut fullbatch = experiment(ModelKind::Textcnn, StrategyKind::Fullbatch, 2, 10, 5);
    fullbatch.aggregation.fraction = 1.0;
    fullbatch.aggregation.local_epochs = 1;
    let mut average = fullbatch.clone();
    average.aggregation.strategy = StrategyKind::Average;
    let a = run_experiment_with(&fullbatch, RunOptions::default(), |_, _| {}).map_err(fail)?;
    let b = run_experiment_with(&average, RunOptions::default(), |_, _| {}).map_err(fail)?;
    let logs_equal = untimed(&a.logs) == untimed(&b.logs);
    let bits_equal = a
        .final_params
        .as_slice()
        .iter()
        .zip(b.final_params.as_slice())
        .all(|(x, y)| x.to_bits() == y.to_bits());
    check(
        logs_equal && bits_equal,
        format!("logs identical: {logs_equal}, final parameters bit-identical: {bits_equal}"),
    )
}

struct ConstantClients(Vec<ParameterVector>);

impl ClientPool for ConstantClients {
    fn num_clients(&self) -> usize {
        self.0.len()
    }

    fn train(&self, client_id: usize, _: &ParameterVector, _: usize) -> Result<ClientUpdate> {
        Ok(ClientUpdate {
            client_id,
            params: self.0[client_id].clone(),
            num_examples: 10,
            train_loss: 0.0,
        })
    }
}

fn distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
}

fn analytic_convergence() -> Verdict {
    let mut rng = SeededRng::new(17);
    let (k, dim, rounds) = (6, 8, 20);
    let targets: Vec<ParameterVector> = (0..k)
        .map(|_| (0..dim).map(|_| rng.uniform(-2.0, 2.0)).collect::<Vec<_>>().into())
        .collect();
    let mut mean = vec![0.0; dim];
    for t in &targets {
        for (m, v) in mean.iter_mut().zip(t.as_slice()) {
            *m += v / k as f64;
        }
    }
    let theta0: ParameterVector = (0..dim).map(|_| rng.uniform(-5.0, 5.0)).collect::<Vec<_>>().into();
    let d0 = distance(theta0.as_slice(), &mean);
    let pool = ConstantClients(targets);
    let mut worst: f64 = 0.0;
    for eps in [0.25, 0.5, 1.0] {
        let config = AggregationConfig {
            strategy: StrategyKind::Avgdiff,
            epsilon: eps,
            fraction: 1.0,
            total_clients: k,
            local_epochs: 1,
            local_batch: 1,
            rounds,
            local_lr: 0.1,
            sampling_seed: 0,
        };
        let theta =
            run_rounds(&config, theta0.clone(), &pool, &RoundOptions::default(), |_, _| Ok(())).map_err(fail)?;
        let expected = (1.0 - eps).powi(rounds as i32) * d0;
        let err = (distance(theta.as_slice(), &mean) - expected).abs();
        worst = worst.max(err);
    }
    check(
        worst <= 1e-10,
        format!("eps in {{0.25, 0.5, 1}}, T=20, max error {worst:.2e} <= 1e-10"),
    )
}

fn objective_gradient() -> Verdict {
    let mut rng = SeededRng::new(99);
    let h = 1e-5;
    let mut worst: f64 = 0.0;
    for _ in 0..20 {
        let dim = 1 + rng.below_usize(10);
        let n = 1 + rng.below_usize(8);
        let mut draw = || -> ParameterVector { (0..dim).map(|_| rng.uniform(-3.0, 3.0)).collect::<Vec<_>>().into() };
        let theta = draw();
        let clients: Vec<ParameterVector> = (0..n).map(|_| draw()).collect();
        let g = avg_difference(&theta, &clients).map_err(fail)?;
        for i in 0..dim {
            let mut plus = theta.clone();
            plus.as_mut_slice()[i] += h;
            let mut minus = theta.clone();
            minus.as_mut_slice()[i] -= h;
            let fd = (server_objective(&plus, &clients).map_err(fail)?
                - server_objective(&minus, &clients).map_err(fail)?)
                / (2.0 * h);
            worst = worst.max(gradcheck::relative_error(g.as_slice()[i], fd));
        }
    }
    check(worst < 1e-6, format!("20 instances, max rel error {worst:.2e} < 1e-6"))
}

fn desk_scale_learning() -> Verdict {
    let config = experiment(ModelKind::Textcnn, StrategyKind::Avgdiff, 2, 20, 30);
    assert_eq!(config.model.embed_dim, 16);
    let logs = run_experiment(&config).map_err(fail)?;
    let acc = logs.last().and_then(|l| l.test_accuracy).ok_or("no final evaluation")?;
    check(acc >= 0.85, format!("final test accuracy {acc:.4} >= 0.85"))
}

fn five_class(strategy: StrategyKind) -> ExperimentConfig {
    let mut c = experiment(ModelKind::Textcnn, strategy, 5, 20, 30);
    c.aggregation.local_lr = 0.3;
    match strategy {
        StrategyKind::Fullbatch => {
            c.aggregation.fraction = 1.0;
            c.aggregation.local_epochs = 1;
        }
        StrategyKind::Average => c.aggregation.fraction = 0.1,
        StrategyKind::Avgdiff => {
            c.aggregation.fraction = 0.1;
            c.aggregation.epsilon = 0.5;
        }
    }
    c
}

fn mean_final_accuracy(base: &ExperimentConfig, trials: usize) -> Result<f64> {
    let mut finals = Vec::with_capacity(trials);
    for t in 0..trials {
        let logs = run_experiment_with(&base.for_trial(t), RunOptions { workers: 4 }, |_, _| {})?.logs;
        finals.push(logs.last().and_then(|l| l.test_accuracy).unwrap_or(f64::NAN));
    }
    Ok(mean_sd(&finals).0)
}

fn qualitative_ordering() -> Verdict {
    let fullbatch = mean_final_accuracy(&five_class(StrategyKind::Fullbatch), 10).map_err(fail)?;
    let average = mean_final_accuracy(&five_class(StrategyKind::Average), 10).map_err(fail)?;
    let avgdiff = mean_final_accuracy(&five_class(StrategyKind::Avgdiff), 10).map_err(fail)?;
    let central = run_cross_validation(&five_class(StrategyKind::Average), 10)
        .map_err(fail)?
        .mean_accuracy;
    let ok = central >= avgdiff && avgdiff >= fullbatch && avgdiff >= average - 0.01;
    check(
        ok,
        format!("centralized {central:.4} >= avgdiff {avgdiff:.4} >= fullbatch {fullbatch:.4}; average {average:.4}"),
    )
}

fn brute_force_auroc(scores: &[f64], labels: &[usize]) -> f64 {
    let mut twice = 0u64;
    let (mut pos, mut neg) = (0u64, 0u64);
    for (i, &li) in labels.iter().enumerate() {
        if li == 1 {
            pos += 1;
        } else {
            neg += 1;
            continue;
        }
        for (j, &lj) in labels.iter().enumerate() {
            if lj == 0 {
                twice += if scores[i] > scores[j] {
                    2
                } else if scores[i] == scores[j] {
                    1
                } else {
                    0
                };
            }
        }
    }
    twice as f64 / (2 * pos * neg) as f64
}

fn auroc_oracle() -> Verdict {
    let mut rng = SeededRng::new(2024);
    let mut tied = 0;
    for case in 0..100 {
        let n = 2 + rng.below_usize(60);
        let levels = 1 + rng.below_usize(8);
        let scores: Vec<f64> = (0..n).map(|_| rng.below_usize(levels) as f64 / levels as f64).collect();
        let mut labels: Vec<usize> = (0..n).map(|_| usize::from(rng.bernoulli(0.4))).collect();
        labels[0] = 0;
        labels[1] = 1;
        let fast = auroc(&scores, &labels).map_err(fail)?;
        let slow = brute_force_auroc(&scores, &labels);
        if fast.to_bits() != slow.to_bits() {
            return Err(format!("instance {case}: sort-based {fast} vs brute force {slow}"));
        }
        let mut sorted = scores.clone();
        sorted.sort_by(f64::total_cmp);
        tied += usize::from(sorted.windows(2).any(|w| w[0] == w[1]));
    }
    check(
        tied > 50,
        format!("100 instances ({tied} with tied scores) match exactly"),
    )
}

fn determinism() -> Verdict {
    let config = experiment(ModelKind::Textcnn, StrategyKind::Avgdiff, 2, 20, 10);
    let run = |workers| -> std::result::Result<String, String> {
        let logs = run_experiment_with(&config, RunOptions { workers }, |_, _| {})
            .map_err(fail)?
            .logs;
        Ok(untimed(&logs).join("\n"))
    };
    let first = run(1)?;
    let second = run(1)?;
    let parallel = run(4)?;
    check(
        first == second && first == parallel,
        format!(
            "repeat identical: {}, workers 1 vs 4 identical: {}",
            first == second,
            first == parallel
        ),
    )
}

/// Records which clients actually trained in each round.
struct Recording<'a> {
    inner: ConstantClients,
    trained: &'a Mutex<Vec<(usize, usize)>>,
}

impl ClientPool for Recording<'_> {
    fn num_clients(&self) -> usize {
        self.inner.num_clients()
    }

    fn train(&self, client_id: usize, theta: &ParameterVector, round: usize) -> Result<ClientUpdate> {
        self.trained.lock().unwrap().push((round, client_id));
        self.inner.train(client_id, theta, round)
    }
}

fn disconnections() -> Verdict {
    let faults = FaultInjection { rate: 0.2, seed: 9 };
    let mut config = experiment(ModelKind::Textcnn, StrategyKind::Avgdiff, 2, 20, 10);
    config.faults = Some(faults);
    let a = run_experiment_with(&config, RunOptions { workers: 4 }, |_, _| {})
        .map_err(fail)?
        .logs;
    let b = run_experiment_with(&config, RunOptions { workers: 1 }, |_, _| {})
        .map_err(fail)?
        .logs;
    let completed = a.len() == 10;
    let deterministic = untimed(&a) == untimed(&b);
    let dropped: usize = a.iter().map(|l| l.dropped_clients.len()).sum();
    let sampled: usize = a.iter().map(|l| l.sampled_clients.len()).sum();

    // dropped clients must never reach local training
    let trained = Mutex::new(Vec::new());
    let pool = Recording {
        inner: ConstantClients((0..20).map(|i| vec![i as f64; 3].into()).collect()),
        trained: &trained,
    };
    let mut excluded = true;
    run_rounds(
        &config.aggregation,
        vec![0.0; 3].into(),
        &pool,
        &RoundOptions {
            workers: 1,
            faults: Some(faults),
        },
        |outcome, _| {
            let ran = trained.lock().unwrap();
            excluded &= outcome.dropped.iter().all(|d| !ran.contains(&(outcome.round, *d)));
            excluded &= outcome.updates.iter().all(|u| !outcome.dropped.contains(&u.client_id));
            Ok(())
        },
    )
    .map_err(fail)?;
    check(
        completed && deterministic && dropped > 0 && excluded,
        format!(
            "{} rounds, {dropped}/{sampled} sampled clients dropped, excluded: {excluded}, deterministic: {deterministic}",
            a.len()
        ),
    )
}

fn main() {
    let criteria: [Criterion; 10] = [
        ("1 gradient oracle", gradient_oracle, Duration::from_secs(30)),
        ("2 unit-step identity", unit_step_identity, Duration::from_secs(10)),
        (
            "3 fullbatch special case",
            fullbatch_special_case,
            Duration::from_secs(10),
        ),
        ("4 analytic convergence", analytic_convergence, Duration::from_secs(1)),
        ("5 objective gradient", objective_gradient, Duration::from_secs(5)),
        ("6 desk-scale learning", desk_scale_learning, Duration::from_secs(300)),
        ("7 qualitative ordering", qualitative_ordering, Duration::from_secs(900)),
        ("8 auroc oracle", auroc_oracle, Duration::from_secs(5)),
        ("9 determinism", determinism, Duration::from_secs(120)),
        ("10 disconnections", disconnections, Duration::from_secs(120)),
    ];
    let mut failures = 0;
    for (name, run, budget) in criteria {
        let start = Instant::now();
        let verdict = run();
        let elapsed = start.elapsed();
        let (ok, detail) = match verdict {
            Ok(d) if elapsed <= budget => (true, d),
            Ok(d) => (false, format!("{d}; over time budget {budget:?}")),
            Err(d) => (false, d),
        };
        failures += usize::from(!ok);
        println!(
            "{} criterion {name}: {detail} [{:.2}s]",
            if ok { "PASS" } else { "FAIL" },
            elapsed.as_secs_f64()
        );
    }
    println!("acceptance: {} passed, {failures} failed", 10 - failures);
    if failures > 0 {
        std::process::exit(1);
    }
}
