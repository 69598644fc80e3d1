//! Acceptance suite. Runs every criterion, prints one PASS/FAIL line per
//! criterion, and exits non-zero if any failed.

use std::path::Path;
use std::time::{Duration, Instant};

use ftrl_cli::config::{AlgorithmName, AlgorithmSpec, ExperimentConfig, ExperimentKind};
use ftrl_cli::experiments::{lowerbound_rows, quantile_rows, run};
use ftrl_core::domain::{weights_from_densities, Prior, WeightVector};
use ftrl_core::engine::{play, Learner, Schedule, Session};
use ftrl_core::environments::{semiadv_losses, LossSource, RngStream, SemiAdvVariant};
use ftrl_core::metrics::{
    bound_abnormal, bound_carl, bound_lower_quantile, entropy_a, entropy_b, f_divergence,
    kl_divergence,
};
use ftrl_core::regularizers::{make_carl, make_root_log, make_shannon};
use ftrl_core::solver::{normalized_densities, DEFAULT_TOL};
use ftrl_core::special::normal_tail;

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome {
        pass,
        detail: detail.into(),
    }
}

/// Residuals of every FTRL normalization seen by the suite.
#[derive(Default)]
struct Residuals {
    max: f64,
    count: u64,
}

impl Residuals {
    fn record(&mut self, r: f64) {
        self.max = self.max.max(r);
        self.count += 1;
    }
}

fn uniform01(rng: &mut RngStream) -> f64 {
    rng.next_f64()
}

fn below(rng: &mut RngStream, n: usize) -> usize {
    (rng.next_f64() * n as f64) as usize % n
}

// ---------------------------------------------------------------------------
// 1. Shannon solver against closed-form exponential weights.

fn criterion_1(res: &mut Residuals) -> Outcome {
    let gen = make_shannon();
    let mut rng = RngStream::new(101);
    let mut worst = 0.0f64;
    for k in 0..1000 {
        let n = 1 + below(&mut rng, 64);
        let eta = 10.0 * (1.0 - uniform01(&mut rng));
        let rounds = 1 + below(&mut rng, 500);
        let prior = if k % 2 == 0 {
            Prior::uniform(n).unwrap()
        } else {
            let raw: Vec<f64> = (0..n).map(|_| 1e-3 + uniform01(&mut rng)).collect();
            let s: f64 = raw.iter().sum();
            Prior::new(raw.iter().map(|m| m / s).collect()).unwrap()
        };
        let losses: Vec<f64> = (0..n)
            .map(|_| (0..rounds).map(|_| uniform01(&mut rng)).sum())
            .collect();
        let scaled: Vec<f64> = losses.iter().map(|l| eta * l).collect();
        let (x, report) = match normalized_densities(&gen, &prior, &scaled, DEFAULT_TOL) {
            Ok(v) => v,
            Err(e) => return outcome(false, format!("instance {k}: {e}")),
        };
        res.record(report.residual);
        let w = weights_from_densities(&prior, &x).unwrap();
        let min = scaled.iter().copied().fold(f64::INFINITY, f64::min);
        let raw: Vec<f64> = scaled
            .iter()
            .zip(prior.masses())
            .map(|(s, m)| m * (min - s).exp())
            .collect();
        let z: f64 = raw.iter().sum();
        for (a, b) in w.as_slice().iter().zip(&raw) {
            worst = worst.max((a - b / z).abs());
        }
    }
    outcome(worst <= 1e-8, format!("1000 instances, max coordinate error {worst:.2e}"))
}

// ---------------------------------------------------------------------------
// Random loss sequences shared by criteria 3 to 5.

#[derive(Clone, Copy, Debug)]
enum Family {
    /// i.i.d. uniform losses.
    Uniform,
    /// Bernoulli losses with expert-specific means.
    Biased,
    /// A planted best expert that changes every block.
    Switching,
    /// Loss 1 for experts weighted at least uniformly, 0 otherwise.
    Adaptive,
}

const FAMILIES: [Family; 4] = [Family::Uniform, Family::Biased, Family::Switching, Family::Adaptive];

/// Plays `learner` on a random sequence. `check(t, w_t, L_{t−1}, ℓ_t)` runs every round.
fn random_run<L: Learner>(
    learner: &mut L,
    n: usize,
    rounds: usize,
    family: Family,
    rng: &mut RngStream,
    mut check: impl FnMut(usize, &WeightVector, &[f64], &L),
) -> Vec<f64> {
    let means: Vec<f64> = (0..n).map(|_| uniform01(rng)).collect();
    let block = 16 + below(rng, 256);
    let mut leader = below(rng, n);
    let mut cumulative = vec![0.0; n];
    let mut player = 0.0;
    let mut regret = Vec::with_capacity(rounds);
    let mut loss = vec![0.0; n];
    for t in 1..=rounds {
        let w = learner.predict().unwrap();
        check(t, &w, &cumulative, learner);
        match family {
            Family::Uniform => loss.iter_mut().for_each(|l| *l = uniform01(rng)),
            Family::Biased => {
                for (l, m) in loss.iter_mut().zip(&means) {
                    *l = if uniform01(rng) < *m { 1.0 } else { 0.0 };
                }
            }
            Family::Switching => {
                if t % block == 0 {
                    leader = below(rng, n);
                }
                for (i, l) in loss.iter_mut().enumerate() {
                    *l = if i == leader { 0.3 * uniform01(rng) } else { 0.2 + 0.8 * uniform01(rng) };
                }
            }
            Family::Adaptive => {
                let avg = 1.0 / n as f64;
                for (l, wi) in loss.iter_mut().zip(w.as_slice()) {
                    *l = if *wi >= avg { 1.0 } else { 0.0 };
                }
            }
        }
        player += learner.update(&loss).unwrap();
        for (c, l) in cumulative.iter_mut().zip(&loss) {
            *c += l;
        }
        let best = cumulative.iter().copied().fold(f64::INFINITY, f64::min);
        regret.push(player - best);
    }
    regret
}

// ---------------------------------------------------------------------------
// 3. Root-log FTRL against its regret bound.

fn criterion_3(res: &mut Residuals) -> Outcome {
    let (n, rounds) = (32, 2048);
    let mut rng = RngStream::new(303);
    let mut worst_margin = f64::INFINITY;
    for k in 0..50 {
        let mut s = Session::new(make_root_log(), Prior::uniform(n).unwrap(), Schedule::abnormal()).unwrap();
        let regret = random_run(&mut s, n, rounds, FAMILIES[k % 4], &mut rng, |_, _, _, l| {
            res.record(l.last_report().unwrap().residual);
        });
        for (t, r) in regret.iter().enumerate() {
            // Point masses have KL = log N against the uniform prior.
            let bound = bound_abnormal(t + 1, (n as f64).ln());
            worst_margin = worst_margin.min(bound - r);
        }
    }
    outcome(
        worst_margin >= 0.0,
        format!("50 sequences, N = {n}, T = {rounds}, min slack {worst_margin:.3}"),
    )
}

// ---------------------------------------------------------------------------
// 4 and 5. CARL worst-case bound and weight tail.

struct CarlRuns {
    min_bound_slack: f64,
    max_tail_excess: f64,
    final_regret: Vec<(SemiAdvVariant, f64, f64)>,
    elapsed: Duration,
}

/// Checks `w_t(i) ≤ exp(−4(L_{t−1}(i) − min L_{t−1})²/(2t)) + 1e-9`.
fn tail_excess(t: usize, w: &WeightVector, prev: &[f64]) -> f64 {
    let min = prev.iter().copied().fold(f64::INFINITY, f64::min);
    w.as_slice()
        .iter()
        .zip(prev)
        .map(|(wi, l)| {
            let gap = l - min;
            wi - ((-4.0 * gap * gap) / (2.0 * t as f64)).exp()
        })
        .fold(f64::NEG_INFINITY, f64::max)
}

fn carl_runs(res: &mut Residuals) -> CarlRuns {
    let start = Instant::now();
    let mut min_bound_slack = f64::INFINITY;
    let mut max_tail_excess = f64::NEG_INFINITY;
    let mut final_regret = Vec::new();

    for variant in [
        SemiAdvVariant::OneEffective,
        SemiAdvVariant::TwoEffective,
        SemiAdvVariant::AllEffective,
    ] {
        let source = semiadv_losses(variant, 10_000).unwrap();
        let n = source.experts();
        let mut s = Session::new(make_carl(n).unwrap(), Prior::counting(n).unwrap(), Schedule::carl()).unwrap();
        let mut prev = vec![0.0; n];
        let traj = play(&mut s, &source, |t, w, loss, l| {
            res.record(l.last_report().unwrap().residual);
            max_tail_excess = max_tail_excess.max(tail_excess(t, w, &prev));
            for (c, x) in prev.iter_mut().zip(loss) {
                *c += x;
            }
            Ok(())
        })
        .unwrap();
        for (t, r) in traj.best_expert_regret().iter().enumerate() {
            min_bound_slack = min_bound_slack.min(bound_carl(t + 1, n).unwrap() - r);
        }
        final_regret.push((variant, traj.best_expert_regret_at(5_000).unwrap(), traj.best_expert_regret_at(10_000).unwrap()));
    }

    let (n, rounds) = (64, 2048);
    let mut rng = RngStream::new(404);
    for k in 0..20 {
        let mut s = Session::new(make_carl(n).unwrap(), Prior::counting(n).unwrap(), Schedule::carl()).unwrap();
        let regret = random_run(&mut s, n, rounds, FAMILIES[k % 4], &mut rng, |t, w, prev, l| {
            res.record(l.last_report().unwrap().residual);
            max_tail_excess = max_tail_excess.max(tail_excess(t, w, prev));
        });
        for (t, r) in regret.iter().enumerate() {
            min_bound_slack = min_bound_slack.min(bound_carl(t + 1, n).unwrap() - r);
        }
    }
    CarlRuns {
        min_bound_slack,
        max_tail_excess,
        final_regret,
        elapsed: start.elapsed(),
    }
}

// ---------------------------------------------------------------------------
// 6. Replication invariance on the Hadamard environment.

fn criterion_6(res: &mut Residuals) -> Outcome {
    let start = Instant::now();
    let mut cfg = ExperimentConfig::new(ExperimentKind::Quantile);
    cfg.algorithms = vec![
        AlgorithmSpec::new(AlgorithmName::Abnormal),
        AlgorithmSpec::new(AlgorithmName::Normalhedge),
        AlgorithmSpec::new(AlgorithmName::Hedge),
    ];
    cfg.environment.good_rows = Some(10);
    cfg.environment.replications = Some(vec![1, 2, 4, 8]);
    cfg.environment.rounds = Some(4096);
    let (rows, stats) = match quantile_rows(&cfg) {
        Ok(v) => v,
        Err(e) => return outcome(false, e.to_string()),
    };
    res.max = res.max.max(stats.max_residual);
    res.count += stats.solves;
    let series = |name: &str| -> Vec<f64> {
        rows.iter()
            .filter(|r| r.algorithm == name)
            .map(|r| r.quantile_regret)
            .collect()
    };
    let spread = |v: &[f64]| {
        let lo = v.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        hi - lo
    };
    let (ab, nh, hedge) = (series("abnormal"), series("normalhedge"), series("hedge"));
    let increasing = hedge.windows(2).all(|w| w[1] > w[0]);
    let elapsed = start.elapsed();
    outcome(
        spread(&ab) <= 1e-6 && spread(&nh) <= 1e-6 && increasing && elapsed < Duration::from_secs(60),
        format!(
            "abnormal spread {:.1e}, normalhedge spread {:.1e}, hedge {:?}, {:.1}s",
            spread(&ab),
            spread(&nh),
            hedge.iter().map(|v| (v * 100.0).round() / 100.0).collect::<Vec<_>>(),
            elapsed.as_secs_f64()
        ),
    )
}

// ---------------------------------------------------------------------------
// 7. Semi-adversarial adaptivity against Hedge.

fn criterion_7(carl: &CarlRuns, res: &mut Residuals) -> Outcome {
    let source = semiadv_losses(SemiAdvVariant::TwoEffective, 10_000).unwrap();
    let mut hedge = Session::new(make_shannon(), Prior::uniform(source.experts()).unwrap(), Schedule::hedge()).unwrap();
    let traj = play(&mut hedge, &source, |_, _, _, l| {
        res.record(l.last_report().unwrap().residual);
        Ok(())
    })
    .unwrap();
    let hedge_final = traj.best_expert_regret_at(10_000).unwrap();
    let get = |v: SemiAdvVariant| carl.final_regret.iter().find(|r| r.0 == v).unwrap();
    let two = get(SemiAdvVariant::TwoEffective).2;
    let one = get(SemiAdvVariant::OneEffective);
    let growth = one.2 - one.1;
    outcome(
        two < hedge_final && growth <= 1.0,
        format!(
            "two_effective CARL {two:.3} vs Hedge {hedge_final:.3}; one_effective growth over [5000, 10000] {growth:.2e}"
        ),
    )
}

// ---------------------------------------------------------------------------
// 8. Lower-bound Monte-Carlo.

fn criterion_8(res: &mut Residuals) -> Outcome {
    let start = Instant::now();
    let mut cfg = ExperimentConfig::new(ExperimentKind::Lowerbound);
    cfg.algorithms = vec![AlgorithmSpec::new(AlgorithmName::Hedge)];
    cfg.environment.experts = Some(64);
    cfg.environment.i_eps = Some(4);
    cfg.environment.rounds = Some(4096);
    cfg.environment.repetitions = Some(200);
    cfg.seed = 7;
    let (rows, stats) = match lowerbound_rows(&cfg) {
        Ok(v) => v,
        Err(e) => return outcome(false, e.to_string()),
    };
    res.max = res.max.max(stats.max_residual);
    res.count += stats.solves;
    let row = &rows[0];
    let bound = bound_lower_quantile(4096, 64, 4).unwrap();
    let elapsed = start.elapsed();
    outcome(
        row.mean_regret >= bound - 3.0 * row.stderr && elapsed < Duration::from_secs(180),
        format!(
            "mean {:.3} ± {:.3} (stderr) vs bound {:.3}, {:.1}s",
            row.mean_regret,
            row.stderr,
            bound,
            elapsed.as_secs_f64()
        ),
    )
}

// ---------------------------------------------------------------------------
// 9. Numeric lemma suites.

fn random_simplex(rng: &mut RngStream, n: usize) -> Vec<f64> {
    // Exponential spacings give a flat Dirichlet; a random power sharpens some samples.
    let sharpness = 1.0 + 6.0 * uniform01(rng);
    let raw: Vec<f64> = (0..n)
        .map(|_| (-(1.0 - uniform01(rng)).ln()).powf(sharpness))
        .collect();
    let s: f64 = raw.iter().sum();
    raw.iter().map(|x| x / s).collect()
}

fn criterion_9() -> Outcome {
    let start = Instant::now();
    let mut failures = Vec::new();

    // Normal tail lower bound.
    let c = (2.0 / std::f64::consts::PI).sqrt();
    let lower = |x: f64| std::f64::consts::FRAC_1_PI.exp() * (-(x + c) * (x + c) / 2.0).exp() / 2.0;
    let margin = (0..=500)
        .map(|k| {
            let x = 0.01 * k as f64;
            normal_tail(x) - lower(x)
        })
        .fold(f64::INFINITY, f64::min);
    if margin < -1e-12 || (normal_tail(0.0) - lower(0.0)).abs() > 1e-12 {
        failures.push(format!("normal tail margin {margin:.2e}"));
    }

    // Root-log divergence against KL.
    let mut rng = RngStream::new(909);
    let gen = make_root_log();
    let mut kl_slack = f64::INFINITY;
    for _ in 0..1000 {
        let n = 2 + below(&mut rng, 63);
        // Keep every prior mass positive so each q is absolutely continuous.
        let raw: Vec<f64> = random_simplex(&mut rng, n).iter().map(|m| m + 1e-9).collect();
        let s: f64 = raw.iter().sum();
        let prior = Prior::new(raw.iter().map(|m| m / s).collect()).unwrap();
        let q = WeightVector::new(random_simplex(&mut rng, n)).unwrap();
        let d = f_divergence(&gen, &q, &prior).unwrap();
        let kl = kl_divergence(&q, &prior).unwrap();
        kl_slack = kl_slack.min(2f64.sqrt() * (1.0 + kl).sqrt() + 1e-9 - d);
    }
    if kl_slack < 0.0 {
        failures.push(format!("root-log vs KL slack {kl_slack:.2e}"));
    }

    // Entropy chain.
    let mut chain_slack = f64::INFINITY;
    for _ in 0..1000 {
        let n = 2 + below(&mut rng, 99);
        let w = WeightVector::new(random_simplex(&mut rng, n)).unwrap();
        let n0 = 1 + below(&mut rng, n);
        let mut idx: Vec<usize> = (0..n).collect();
        for i in (1..n).rev() {
            idx.swap(i, below(&mut rng, i + 1));
        }
        let outside = &idx[n0..];
        let (ha, hb) = (entropy_a(&w), entropy_b(&w));
        for p in [0.25, 0.5, 0.75] {
            let sum_p: f64 = outside.iter().map(|&i| w[i].powf(p)).sum();
            let sum_sqrt: f64 = outside.iter().map(|&i| w[i].sqrt()).sum();
            let indicator = if n0 == 1 { 1.0 } else { 0.0 };
            let rhs = (2.0 * (n0 as f64).ln()).sqrt()
                + sum_p / (std::f64::consts::E * (1.0 - p)).sqrt()
                + indicator * 2f64.sqrt() * sum_sqrt;
            let slack = [hb + 1e-9, ha - hb + 1e-9, rhs - ha + 1e-9]
                .into_iter()
                .fold(f64::INFINITY, f64::min);
            chain_slack = chain_slack.min(slack);
        }
    }
    if chain_slack < 0.0 {
        failures.push(format!("entropy chain slack {chain_slack:.2e}"));
    }

    // Root-log generator premise.
    let premise = (0..=2000)
        .map(|k| {
            let x = 10f64.powf(-8.0 + 16.0 * k as f64 / 2000.0);
            2f64.sqrt() * x * x.ln_1p().sqrt() + 1e-9 - gen.value(x)
        })
        .fold(f64::INFINITY, f64::min);
    if premise < 0.0 {
        failures.push(format!("root-log premise slack {premise:.2e}"));
    }

    let elapsed = start.elapsed();
    if elapsed >= Duration::from_secs(10) {
        failures.push(format!("took {:.1}s", elapsed.as_secs_f64()));
    }
    if failures.is_empty() {
        outcome(
            true,
            format!(
                "tail margin {margin:.2e}, KL slack {kl_slack:.3}, chain slack {chain_slack:.2e}, premise slack {premise:.2e}, {:.1}s",
                elapsed.as_secs_f64()
            ),
        )
    } else {
        outcome(false, failures.join("; "))
    }
}

// ---------------------------------------------------------------------------
// 10. Byte-identical re-runs.

fn small_configs(csv: &Path) -> Vec<(ExperimentKind, ExperimentConfig)> {
    let mut q = ExperimentConfig::new(ExperimentKind::Quantile);
    q.environment.good_rows = Some(5);
    q.environment.replications = Some(vec![1, 2]);
    q.environment.rounds = Some(256);

    let mut s = ExperimentConfig::new(ExperimentKind::Semiadv);
    s.environment.experts = Some(200);
    s.environment.rounds = Some(500);

    let mut l = ExperimentConfig::new(ExperimentKind::Lowerbound);
    l.environment.experts = Some(16);
    l.environment.i_eps = Some(2);
    l.environment.rounds = Some(256);
    l.environment.repetitions = Some(12);
    l.environment.checkpoints = Some(vec![64, 128, 256]);
    l.seed = 11;

    let mut c = ExperimentConfig::new(ExperimentKind::Custom);
    c.algorithms = [AlgorithmName::Hedge, AlgorithmName::Abnormal, AlgorithmName::Normalhedge]
        .into_iter()
        .map(AlgorithmSpec::new)
        .collect();
    c.environment.path = Some(csv.to_path_buf());
    c.environment.snapshot_every = Some(1);

    vec![
        (ExperimentKind::Quantile, q),
        (ExperimentKind::Semiadv, s),
        (ExperimentKind::Lowerbound, l),
        (ExperimentKind::Custom, c),
    ]
}

fn criterion_10(res: &mut Residuals) -> Outcome {
    let dir = tempfile::tempdir().unwrap();
    let csv = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs/losses.csv");
    let mut compared = 0;
    for (kind, cfg) in small_configs(&csv) {
        let a = dir.path().join(format!("{}-a", kind.as_str()));
        let b = dir.path().join(format!("{}-b", kind.as_str()));
        let mut threaded = cfg.clone();
        threaded.threads = Some(3);
        let (ra, rb) = match (run(kind, &cfg, &a), run(kind, &threaded, &b)) {
            (Ok(x), Ok(y)) => (x, y),
            (Err(e), _) | (_, Err(e)) => return outcome(false, format!("{}: {e}", kind.as_str())),
        };
        res.max = res.max.max(ra.stats.max_residual).max(rb.stats.max_residual);
        res.count += ra.stats.solves + rb.stats.solves;
        for (fa, fb) in ra.files.iter().zip(&rb.files) {
            if fa.extension().and_then(|e| e.to_str()) != Some("csv") {
                continue;
            }
            let (x, y) = (std::fs::read(fa).unwrap(), std::fs::read(fb).unwrap());
            if x != y {
                return outcome(false, format!("{} differs between runs", fa.display()));
            }
            compared += 1;
        }
    }
    outcome(compared >= 5, format!("{compared} CSV files byte-identical across reruns and thread counts"))
}

// ---------------------------------------------------------------------------

fn main() {
    let mut res = Residuals::default();
    let mut lines: Vec<(usize, &str, Outcome)> = Vec::new();

    let start = Instant::now();
    let mut c1 = criterion_1(&mut res);
    if start.elapsed() >= Duration::from_secs(5) {
        c1.pass = false;
    }
    c1.detail = format!("{}, {:.1}s", c1.detail, start.elapsed().as_secs_f64());
    lines.push((1, "solver matches closed-form exponential weights", c1));

    let start = Instant::now();
    let mut c3 = criterion_3(&mut res);
    if start.elapsed() >= Duration::from_secs(30) {
        c3.pass = false;
    }
    c3.detail = format!("{}, {:.1}s", c3.detail, start.elapsed().as_secs_f64());
    let c3_line = (3, "root-log FTRL within its regret bound", c3);

    let carl = carl_runs(&mut res);
    let c4 = outcome(
        carl.min_bound_slack >= 0.0 && carl.elapsed < Duration::from_secs(60),
        format!(
            "3 semiadv variants and 20 random sequences, min slack {:.3}, {:.1}s",
            carl.min_bound_slack,
            carl.elapsed.as_secs_f64()
        ),
    );
    let c5 = outcome(
        carl.max_tail_excess <= 1e-9,
        format!("max w − tail bound {:.2e}", carl.max_tail_excess),
    );
    let c6 = criterion_6(&mut res);
    let c7 = criterion_7(&carl, &mut res);
    let c8 = criterion_8(&mut res);
    let c9 = criterion_9();
    let c10 = criterion_10(&mut res);
    let c2 = outcome(
        res.max <= 1e-10 && res.count > 0,
        format!("{} normalization solves, max residual {:.2e}", res.count, res.max),
    );

    lines.push((2, "normalization residual within 1e-10", c2));
    lines.push(c3_line);
    lines.push((4, "CARL within sqrt(2 t log N) at every round", c4));
    lines.push((5, "CARL weight tail bound", c5));
    lines.push((6, "replication invariance on Hadamard losses", c6));
    lines.push((7, "semi-adversarial adaptivity", c7));
    lines.push((8, "lower-bound Monte-Carlo", c8));
    lines.push((9, "numeric lemma suites", c9));
    lines.push((10, "deterministic CSV output", c10));

    let mut failed = 0;
    for (k, name, o) in &lines {
        let tag = if o.pass { "PASS" } else { "FAIL" };
        println!("acceptance {k:>2} [{tag}] {name}: {}", o.detail);
        if !o.pass {
            failed += 1;
        }
    }
    println!("acceptance: {} of {} criteria passed", lines.len() - failed, lines.len());
    if failed > 0 {
        std::process::exit(1);
    }
}
