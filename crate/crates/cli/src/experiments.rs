//! Experiment runners. Each `*_rows` function computes the result table;
//! each `run_*` function also writes CSV (and optionally SVG) files.
//!
//! Cells (algorithm × environment × repetition) run on the rayon pool.
//! Results are collected in cell order, so output does not depend on the
//! number of threads.

use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::Serialize;

use ftrl_core::baselines::NormalHedgeState;
use ftrl_core::domain::{rank_experts, Prior, WeightVector};
use ftrl_core::engine::{play, Learner, Schedule, Session};
use ftrl_core::environments::{
    load_csv, BernoulliLosses, CsvMode, HadamardLosses, LossSource, RngStream, SemiAdvLosses,
    SemiAdvVariant, HADAMARD_ROUNDS, SEMIADV_EXPERTS,
};
use ftrl_core::metrics::{
    bound_abnormal, bound_carl, bound_carl_refined, bound_lower_quantile, quantile_regret,
    RegretTrajectory, SemiAdvProfile,
};
use ftrl_core::regularizers::{make_carl, make_chi_squared, make_root_log, make_shannon};
use ftrl_core::solver::DEFAULT_TOL;

use crate::config::{
    AlgorithmName, AlgorithmSpec, ComparatorSpec, ExperimentConfig, ExperimentKind,
};
use crate::error::CliError;
use crate::plot::{LineChart, Series};

/// Solver diagnostics aggregated over a run.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct RunStats {
    /// Largest `|Σ ν_i x_i − 1|` over every FTRL step.
    pub max_residual: f64,
    /// Number of FTRL normalization solves.
    pub solves: u64,
}

impl RunStats {
    fn merge(self, other: RunStats) -> RunStats {
        RunStats {
            max_residual: self.max_residual.max(other.max_residual),
            solves: self.solves + other.solves,
        }
    }
}

/// Files written by a run and its solver diagnostics.
#[derive(Debug, Clone, PartialEq)]
pub struct Outcome {
    pub files: Vec<PathBuf>,
    pub stats: RunStats,
}

pub type BoxedLearner = Box<dyn Learner + Send>;

/// Instantiates the learner described by `spec` over `n` experts.
pub fn build_learner(spec: &AlgorithmSpec, n: usize, tol: f64) -> Result<BoxedLearner, CliError> {
    let schedule = |default: Schedule| match spec.schedule {
        Some(kind) => Schedule::new(kind).map_err(CliError::config),
        None => Ok(default),
    };
    let uniform = || Prior::uniform(n).map_err(CliError::config);
    let session = match spec.name {
        AlgorithmName::Normalhedge => {
            return Ok(Box::new(NormalHedgeState::new(n).map_err(CliError::config)?));
        }
        AlgorithmName::Abnormal => Session::new(make_root_log(), uniform()?, schedule(Schedule::abnormal())?),
        AlgorithmName::Hedge => Session::new(make_shannon(), uniform()?, schedule(Schedule::hedge())?),
        AlgorithmName::ChiSquared => Session::new(
            make_chi_squared(),
            uniform()?,
            schedule(Schedule::inverse_root(std::f64::consts::SQRT_2).map_err(CliError::config)?)?,
        ),
        AlgorithmName::Carl => Session::new(
            make_carl(n).map_err(CliError::config)?,
            Prior::counting(n).map_err(CliError::config)?,
            schedule(Schedule::carl())?,
        ),
    }
    .map_err(CliError::config)?;
    Ok(Box::new(session.with_tolerance(tol).map_err(CliError::config)?))
}

fn tolerance(cfg: &ExperimentConfig) -> Result<f64, CliError> {
    let tol = cfg.solver_tolerance.unwrap_or(DEFAULT_TOL);
    if !(tol > 0.0 && tol.is_finite()) {
        return Err(CliError::Config(format!("solver_tolerance must be positive, got {tol}")));
    }
    Ok(tol)
}

/// Plays `learner` through `source`, calling `observe` after every round.
fn run_cell<S, F>(learner: &mut BoxedLearner, source: &S, mut observe: F) -> Result<(RegretTrajectory, RunStats), CliError>
where
    S: LossSource + ?Sized,
    F: FnMut(usize, &WeightVector, &[f64]),
{
    let mut stats = RunStats::default();
    let traj = play(learner.as_mut(), source, |t, w, loss, l| {
        if let Some(r) = l.solve_report() {
            stats.max_residual = stats.max_residual.max(r.residual);
            stats.solves += 1;
        }
        observe(t, w, loss);
        Ok(())
    })
    .map_err(CliError::Numeric)?;
    Ok((traj, stats))
}

/// `1, 2, 5, 10, 20, 50, …` up to `rounds`, plus `rounds`.
pub fn default_checkpoints(rounds: usize) -> Vec<usize> {
    let mut out = Vec::new();
    let mut scale = 1usize;
    'outer: loop {
        for m in [1, 2, 5] {
            let c = m * scale;
            if c > rounds {
                break 'outer;
            }
            out.push(c);
        }
        scale *= 10;
    }
    if out.last() != Some(&rounds) {
        out.push(rounds);
    }
    out
}

fn checkpoints(cfg: &ExperimentConfig, rounds: usize, default: Vec<usize>) -> Result<Vec<usize>, CliError> {
    let mut cps = match &cfg.environment.checkpoints {
        Some(c) => c.clone(),
        None => return Ok(default),
    };
    if let Some(bad) = cps.iter().find(|&&c| c == 0 || c > rounds) {
        return Err(CliError::Config(format!("checkpoint {bad} outside 1..={rounds}")));
    }
    cps.sort_unstable();
    cps.dedup();
    if cps.is_empty() {
        return Err(CliError::Config("checkpoints must not be empty".into()));
    }
    Ok(cps)
}

fn positive(name: &str, v: Option<usize>, default: usize) -> Result<usize, CliError> {
    let v = v.unwrap_or(default);
    if v == 0 {
        return Err(CliError::Config(format!("{name} must be positive")));
    }
    Ok(v)
}

fn write_rows<T: Serialize>(path: &Path, rows: &[T]) -> Result<(), CliError> {
    let mut w = csv::Writer::from_path(path)?;
    for row in rows {
        w.serialize(row)?;
    }
    w.flush()?;
    Ok(())
}

fn write_chart(path: &Path, chart: &LineChart) -> Result<(), CliError> {
    std::fs::write(path, chart.to_svg())?;
    Ok(())
}

/// Groups `(label, x, y)` triples into series, keeping first-seen label order.
fn series_by_label<'a>(points: impl Iterator<Item = (&'a str, f64, f64)>) -> Vec<Series> {
    let mut series: Vec<Series> = Vec::new();
    for (name, x, y) in points {
        match series.iter_mut().find(|s| s.name == name) {
            Some(s) => s.points.push((x, y)),
            None => series.push(Series {
                name: name.to_owned(),
                points: vec![(x, y)],
            }),
        }
    }
    series
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct QuantileRow {
    #[serde(rename = "N")]
    pub n: usize,
    pub algorithm: String,
    #[serde(rename = "K")]
    pub k: usize,
    pub r: usize,
    pub quantile_regret: f64,
    pub abnormal_bound: f64,
}

/// Hadamard environment for every replication factor: quantile regret at
/// `i_ε = K·r` and the root-log bound with `KL = log(N/i_ε)`.
pub fn quantile_rows(cfg: &ExperimentConfig) -> Result<(Vec<QuantileRow>, RunStats), CliError> {
    let env = &cfg.environment;
    let k = env.good_rows.unwrap_or(10);
    let reps = env
        .replications
        .clone()
        .unwrap_or_else(|| vec![1, 2, 4, 8, 16, 32, 64]);
    let rounds = positive("rounds", env.rounds, HADAMARD_ROUNDS)?;
    let tol = tolerance(cfg)?;
    let algorithms = cfg.algorithms_or(&[AlgorithmName::Abnormal, AlgorithmName::Hedge, AlgorithmName::Normalhedge]);

    let mut cells = Vec::new();
    for alg in &algorithms {
        for &r in &reps {
            let source = HadamardLosses::new(k, r, rounds).map_err(CliError::config)?;
            let learner = build_learner(alg, source.experts(), tol)?;
            cells.push((alg.label(), source, learner));
        }
    }
    let results: Vec<Result<(QuantileRow, RunStats), CliError>> = cells
        .into_par_iter()
        .map(|(label, source, mut learner)| {
            let (traj, stats) = run_cell(&mut learner, &source, |_, _, _| {})?;
            let n = source.experts();
            let i_eps = source.good_experts();
            let q = quantile_regret(&traj, i_eps).map_err(CliError::Numeric)?;
            let kl = (n as f64 / i_eps as f64).ln();
            Ok((
                QuantileRow {
                    n,
                    algorithm: label,
                    k,
                    r: source.replication(),
                    quantile_regret: q,
                    abnormal_bound: bound_abnormal(rounds, kl),
                },
                stats,
            ))
        })
        .collect();
    collect_rows(results)
}

fn collect_rows<R>(results: Vec<Result<(R, RunStats), CliError>>) -> Result<(Vec<R>, RunStats), CliError> {
    let mut rows = Vec::with_capacity(results.len());
    let mut stats = RunStats::default();
    for r in results {
        let (row, s) = r?;
        rows.push(row);
        stats = stats.merge(s);
    }
    Ok((rows, stats))
}

pub fn run_quantile_experiment(cfg: &ExperimentConfig, out_dir: &Path) -> Result<Outcome, CliError> {
    let (rows, stats) = quantile_rows(cfg)?;
    std::fs::create_dir_all(out_dir)?;
    let csv = out_dir.join("quantile.csv");
    write_rows(&csv, &rows)?;
    let mut files = vec![csv];
    if cfg.plots {
        let chart = LineChart {
            title: "Quantile regret on the Hadamard environment".into(),
            x_label: "number of experts N".into(),
            y_label: "quantile regret".into(),
            log_x: true,
            series: series_by_label(rows.iter().map(|r| (r.algorithm.as_str(), r.n as f64, r.quantile_regret))),
        };
        let svg = out_dir.join("quantile.svg");
        write_chart(&svg, &chart)?;
        files.push(svg);
    }
    Ok(Outcome { files, stats })
}

pub fn variant_name(v: SemiAdvVariant) -> &'static str {
    match v {
        SemiAdvVariant::OneEffective => "one_effective",
        SemiAdvVariant::TwoEffective => "two_effective",
        SemiAdvVariant::AllEffective => "all_effective",
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SemiAdvRow {
    pub variant: SemiAdvVariant,
    pub algorithm: String,
    pub t: usize,
    pub regret: f64,
    pub carl_bound: f64,
    pub carl_refined_bound: f64,
}

/// Best-expert regret at each checkpoint for every variant and algorithm.
pub fn semiadv_rows(cfg: &ExperimentConfig) -> Result<(Vec<SemiAdvRow>, RunStats), CliError> {
    let env = &cfg.environment;
    let rounds = positive("rounds", env.rounds, 10_000)?;
    let n = positive("experts", env.experts, SEMIADV_EXPERTS)?;
    let variants = env.variants.clone().unwrap_or_else(|| {
        vec![
            SemiAdvVariant::OneEffective,
            SemiAdvVariant::TwoEffective,
            SemiAdvVariant::AllEffective,
        ]
    });
    let cps = checkpoints(cfg, rounds, default_checkpoints(rounds))?;
    let tol = tolerance(cfg)?;
    let algorithms = cfg.algorithms_or(&[AlgorithmName::Carl, AlgorithmName::Hedge]);

    let mut cells = Vec::new();
    for &variant in &variants {
        let source = SemiAdvLosses::new(variant, n, rounds).map_err(CliError::config)?;
        let profile =
            SemiAdvProfile::new(n, source.effective_experts(), source.gaps()).map_err(CliError::config)?;
        for alg in &algorithms {
            let learner = build_learner(alg, n, tol)?;
            cells.push((variant, alg.label(), source.clone(), profile.clone(), learner));
        }
    }
    let results: Vec<Result<(Vec<SemiAdvRow>, RunStats), CliError>> = cells
        .into_par_iter()
        .map(|(variant, label, source, profile, mut learner)| {
            let (traj, stats) = run_cell(&mut learner, &source, |_, _, _| {})?;
            let rows = cps
                .iter()
                .map(|&t| {
                    Ok(SemiAdvRow {
                        variant,
                        algorithm: label.clone(),
                        t,
                        regret: traj.best_expert_regret_at(t).expect("checkpoint within horizon"),
                        carl_bound: bound_carl(t, n).map_err(CliError::config)?,
                        carl_refined_bound: bound_carl_refined(t, &profile),
                    })
                })
                .collect::<Result<Vec<_>, CliError>>()?;
            Ok((rows, stats))
        })
        .collect();
    let (nested, stats) = collect_rows(results)?;
    Ok((nested.into_iter().flatten().collect(), stats))
}

pub fn run_semiadv_experiment(cfg: &ExperimentConfig, out_dir: &Path) -> Result<Outcome, CliError> {
    let (rows, stats) = semiadv_rows(cfg)?;
    std::fs::create_dir_all(out_dir)?;
    let csv = out_dir.join("semiadv.csv");
    write_rows(&csv, &rows)?;
    let mut files = vec![csv];
    if cfg.plots {
        let mut variants: Vec<SemiAdvVariant> = Vec::new();
        for r in &rows {
            if !variants.contains(&r.variant) {
                variants.push(r.variant);
            }
        }
        for v in variants {
            let rows: Vec<&SemiAdvRow> = rows.iter().filter(|r| r.variant == v).collect();
            let mut series = series_by_label(rows.iter().map(|r| (r.algorithm.as_str(), r.t as f64, r.regret)));
            if let Some(first) = rows.first() {
                let bound: Vec<(f64, f64)> = rows
                    .iter()
                    .filter(|r| r.algorithm == first.algorithm)
                    .map(|r| (r.t as f64, r.carl_bound))
                    .collect();
                series.push(Series {
                    name: "sqrt(2 t log N)".into(),
                    points: bound,
                });
            }
            let chart = LineChart {
                title: format!("Best-expert regret, {}", variant_name(v)),
                x_label: "round t".into(),
                y_label: "regret".into(),
                log_x: true,
                series,
            };
            let svg = out_dir.join(format!("semiadv_{}.svg", variant_name(v)));
            write_chart(&svg, &chart)?;
            files.push(svg);
        }
    }
    Ok(Outcome { files, stats })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LowerBoundRow {
    #[serde(rename = "N")]
    pub n: usize,
    pub i_eps: usize,
    #[serde(rename = "T")]
    pub t: usize,
    pub reps: usize,
    pub mean_regret: f64,
    pub stderr: f64,
    pub lower_bound: f64,
}

/// Monte-Carlo quantile regret on i.i.d. Bernoulli losses, one row per checkpoint.
///
/// Repetition `j` draws its losses from `RngStream::new(seed).substream(j)`.
pub fn lowerbound_rows(cfg: &ExperimentConfig) -> Result<(Vec<LowerBoundRow>, RunStats), CliError> {
    let env = &cfg.environment;
    let n = positive("experts", env.experts, 64)?;
    let i_eps = positive("i_eps", env.i_eps, 4)?;
    let rounds = positive("rounds", env.rounds, 4096)?;
    let reps = env.repetitions.unwrap_or(200);
    if reps < 2 {
        return Err(CliError::Config("repetitions must be at least 2".into()));
    }
    let p = env.p.unwrap_or(0.5);
    if 4 * i_eps > n {
        return Err(CliError::Config(format!("i_eps = {i_eps} exceeds N/4 = {}", n / 4)));
    }
    let cps = checkpoints(cfg, rounds, vec![rounds])?;
    let tol = tolerance(cfg)?;
    let algorithms = cfg.algorithms_or(&[AlgorithmName::Hedge]);
    if algorithms.len() != 1 {
        return Err(CliError::Config(format!(
            "the lower-bound experiment runs one player, got {}",
            algorithms.len()
        )));
    }
    let alg = &algorithms[0];
    build_learner(alg, n, tol)?;
    let base = RngStream::new(cfg.seed);
    let mut sources = Vec::with_capacity(reps);
    for j in 0..reps {
        sources.push(BernoulliLosses::new(n, rounds, base.substream(j as u64), p).map_err(CliError::config)?);
    }

    let results: Vec<Result<(Vec<f64>, RunStats), CliError>> = sources
        .into_par_iter()
        .map(|source| {
            let mut learner = build_learner(alg, n, tol)?;
            let mut player = 0.0;
            let mut cumulative = vec![0.0; n];
            let mut at = Vec::with_capacity(cps.len());
            let mut next = 0;
            let (_, stats) = run_cell(&mut learner, &source, |t, w, loss| {
                player += w.as_slice().iter().zip(loss).map(|(a, b)| a * b).sum::<f64>();
                for (c, l) in cumulative.iter_mut().zip(loss) {
                    *c += l;
                }
                if next < cps.len() && cps[next] == t {
                    let order = rank_experts(&cumulative);
                    at.push(player - cumulative[order[i_eps - 1]]);
                    next += 1;
                }
            })?;
            Ok((at, stats))
        })
        .collect();
    let (samples, stats) = collect_rows(results)?;

    let rows = cps
        .iter()
        .enumerate()
        .map(|(k, &t)| {
            let values: Vec<f64> = samples.iter().map(|s| s[k]).collect();
            let m = reps as f64;
            let mean = values.iter().sum::<f64>() / m;
            let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (m - 1.0);
            Ok(LowerBoundRow {
                n,
                i_eps,
                t,
                reps,
                mean_regret: mean,
                stderr: (var / m).sqrt(),
                lower_bound: bound_lower_quantile(t, n, i_eps).map_err(CliError::config)?,
            })
        })
        .collect::<Result<Vec<_>, CliError>>()?;
    Ok((rows, stats))
}

pub fn run_lowerbound_experiment(cfg: &ExperimentConfig, out_dir: &Path) -> Result<Outcome, CliError> {
    let (rows, stats) = lowerbound_rows(cfg)?;
    std::fs::create_dir_all(out_dir)?;
    let csv = out_dir.join("lowerbound.csv");
    write_rows(&csv, &rows)?;
    let mut files = vec![csv];
    if cfg.plots && rows.len() > 1 {
        let chart = LineChart {
            title: "Quantile regret on Bernoulli(1/2) losses".into(),
            x_label: "horizon T".into(),
            y_label: "regret".into(),
            log_x: true,
            series: vec![
                Series {
                    name: "mean regret".into(),
                    points: rows.iter().map(|r| (r.t as f64, r.mean_regret)).collect(),
                },
                Series {
                    name: "lower bound".into(),
                    points: rows.iter().map(|r| (r.t as f64, r.lower_bound)).collect(),
                },
            ],
        };
        let svg = out_dir.join("lowerbound.svg");
        write_chart(&svg, &chart)?;
        files.push(svg);
    }
    Ok(Outcome { files, stats })
}

/// Per-round trajectory of one algorithm on a CSV loss sequence.
#[derive(Debug, Clone, PartialEq)]
pub struct CustomTrajectory {
    pub algorithm: String,
    pub mixture_loss: Vec<f64>,
    /// One column per comparator, one entry per round.
    pub regret: Vec<Vec<f64>>,
    /// `(t, w_t)` every `snapshot_every` rounds.
    pub snapshots: Vec<(usize, Vec<f64>)>,
}

fn resolve_comparator(spec: &ComparatorSpec, final_cumulative: &[f64]) -> Result<Vec<f64>, CliError> {
    let n = final_cumulative.len();
    let point = |i: usize| {
        let mut q = vec![0.0; n];
        q[i] = 1.0;
        q
    };
    let rank = |i: usize| -> Result<usize, CliError> {
        if i == 0 || i > n {
            return Err(CliError::Config(format!("comparator rank {i} outside 1..={n}")));
        }
        Ok(rank_experts(final_cumulative)[i - 1])
    };
    match spec {
        ComparatorSpec::Best => Ok(point(rank(1)?)),
        ComparatorSpec::Quantile(i) => Ok(point(rank(*i)?)),
        ComparatorSpec::Expert(i) => {
            if *i >= n {
                return Err(CliError::Config(format!("expert {i} outside 0..{n}")));
            }
            Ok(point(*i))
        }
        ComparatorSpec::UniformTop(i) => Ok(ftrl_core::metrics::uniform_top(final_cumulative, *i)
            .map_err(CliError::config)?
            .into_inner()),
        ComparatorSpec::Distribution(q) => {
            if q.len() != n {
                return Err(CliError::Config(format!(
                    "comparator distribution has {} entries for {n} experts",
                    q.len()
                )));
            }
            Ok(WeightVector::new(q.clone()).map_err(CliError::config)?.into_inner())
        }
    }
}

pub fn custom_trajectories(cfg: &ExperimentConfig) -> Result<(Vec<CustomTrajectory>, RunStats), CliError> {
    let env = &cfg.environment;
    let path = env
        .path
        .as_ref()
        .ok_or_else(|| CliError::Config("custom experiments need environment.path".into()))?;
    let mode = if env.lenient.unwrap_or(false) {
        CsvMode::Lenient
    } else {
        CsvMode::Strict
    };
    let losses = load_csv(path, mode).map_err(CliError::config)?;
    let n = losses.experts();
    if env.snapshot_every == Some(0) {
        return Err(CliError::Config("snapshot_every must be positive".into()));
    }
    let tol = tolerance(cfg)?;
    let algorithms = cfg.algorithms_or(&[AlgorithmName::Hedge]);
    let comparators = if cfg.comparators.is_empty() {
        vec![ComparatorSpec::Best]
    } else {
        cfg.comparators.clone()
    };
    let final_cumulative = losses.cumulative();
    let qs = comparators
        .iter()
        .map(|c| resolve_comparator(c, &final_cumulative))
        .collect::<Result<Vec<_>, _>>()?;

    let mut cells = Vec::new();
    for alg in &algorithms {
        cells.push((alg.label(), build_learner(alg, n, tol)?));
    }
    let results: Vec<Result<(CustomTrajectory, RunStats), CliError>> = cells
        .into_par_iter()
        .map(|(label, mut learner)| {
            let mut mixture = Vec::with_capacity(losses.rounds());
            let mut snapshots = Vec::new();
            let mut regret: Vec<Vec<f64>> = vec![Vec::with_capacity(losses.rounds()); qs.len()];
            let mut comparator_loss = vec![0.0; qs.len()];
            let mut player = 0.0;
            let (_, stats) = run_cell(&mut learner, &losses, |t, w, loss| {
                let m: f64 = w.as_slice().iter().zip(loss).map(|(a, b)| a * b).sum();
                mixture.push(m);
                player += m;
                for ((q, acc), col) in qs.iter().zip(comparator_loss.iter_mut()).zip(regret.iter_mut()) {
                    *acc += q.iter().zip(loss).map(|(a, b)| a * b).sum::<f64>();
                    col.push(player - *acc);
                }
                if let Some(k) = env.snapshot_every {
                    if t % k == 0 {
                        snapshots.push((t, w.as_slice().to_vec()));
                    }
                }
            })?;
            Ok((
                CustomTrajectory {
                    algorithm: label,
                    mixture_loss: mixture,
                    regret,
                    snapshots,
                },
                stats,
            ))
        })
        .collect();
    collect_rows(results)
}

pub fn run_custom(cfg: &ExperimentConfig, out_dir: &Path) -> Result<Outcome, CliError> {
    let (trajs, stats) = custom_trajectories(cfg)?;
    let comparators = if cfg.comparators.is_empty() {
        vec![ComparatorSpec::Best]
    } else {
        cfg.comparators.clone()
    };
    std::fs::create_dir_all(out_dir)?;
    let csv_path = out_dir.join("custom.csv");
    let mut w = csv::Writer::from_path(&csv_path)?;
    let mut header = vec!["algorithm".to_owned(), "t".into(), "mixture_loss".into()];
    header.extend(comparators.iter().map(ComparatorSpec::column_name));
    w.write_record(&header)?;
    for tr in &trajs {
        for (k, m) in tr.mixture_loss.iter().enumerate() {
            let mut rec = vec![tr.algorithm.clone(), (k + 1).to_string(), m.to_string()];
            rec.extend(tr.regret.iter().map(|col| col[k].to_string()));
            w.write_record(&rec)?;
        }
    }
    w.flush()?;
    let mut files = vec![csv_path];

    if cfg.environment.snapshot_every.is_some() {
        let path = out_dir.join("weights.csv");
        let mut w = csv::Writer::from_path(&path)?;
        let n = trajs
            .iter()
            .flat_map(|t| t.snapshots.first())
            .map(|s| s.1.len())
            .next()
            .unwrap_or(0);
        let mut header = vec!["algorithm".to_owned(), "t".into()];
        header.extend((0..n).map(|i| format!("w_{i}")));
        w.write_record(&header)?;
        for tr in &trajs {
            for (t, ws) in &tr.snapshots {
                let mut rec = vec![tr.algorithm.clone(), t.to_string()];
                rec.extend(ws.iter().map(f64::to_string));
                w.write_record(&rec)?;
            }
        }
        w.flush()?;
        files.push(path);
    }

    if cfg.plots && !trajs.is_empty() {
        let chart = LineChart {
            title: format!("Cumulative {}", comparators[0].column_name().replace('_', " ")),
            x_label: "round t".into(),
            y_label: "regret".into(),
            log_x: false,
            series: trajs
                .iter()
                .map(|tr| Series {
                    name: tr.algorithm.clone(),
                    points: tr.regret[0]
                        .iter()
                        .enumerate()
                        .map(|(k, r)| ((k + 1) as f64, *r))
                        .collect(),
                })
                .collect(),
        };
        let svg = out_dir.join("custom.svg");
        write_chart(&svg, &chart)?;
        files.push(svg);
    }
    Ok(Outcome { files, stats })
}

/// Runs experiment `kind` on the configured (or global) rayon pool.
pub fn run(kind: ExperimentKind, cfg: &ExperimentConfig, out_dir: &Path) -> Result<Outcome, CliError> {
    cfg.check_kind(kind)?;
    let go = || match kind {
        ExperimentKind::Quantile => run_quantile_experiment(cfg, out_dir),
        ExperimentKind::Semiadv => run_semiadv_experiment(cfg, out_dir),
        ExperimentKind::Lowerbound => run_lowerbound_experiment(cfg, out_dir),
        ExperimentKind::Custom => run_custom(cfg, out_dir),
    };
    match cfg.threads {
        Some(0) => Err(CliError::Config("threads must be positive".into())),
        Some(t) => rayon::ThreadPoolBuilder::new()
            .num_threads(t)
            .build()
            .map_err(CliError::config)?
            .install(go),
        None => go(),
    }
}
