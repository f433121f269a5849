//! Experiment drivers behind the `toll-lab` CLI.
//!
//! Every driver takes an [`ExperimentSpec`], runs one job per seed (seeds are
//! independent and run concurrently) and writes plot-ready files into an
//! output directory. Outputs contain no timestamps, so a rerun with the same
//! spec reproduces them byte for byte.

pub mod emit;
pub mod policy;
pub mod spec;

use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

pub use emit::{write_csv, write_json, write_ndjson, BoHistoryRow, CurveRow, DayRow, MetricsRow, Row};
pub use policy::{evaluate_policy, train_policy, PolicyEvaluation, TrainedPolicy};
pub use spec::{build_scenario, ExperimentKind, ExperimentSpec, SweepCell, SweepGrid};

use crate::bo::{no_toll_days, random_toll_days, run_bo, EquilibriumObjective, SearchSpace};
use crate::env::{reward, EpisodeConfig, TraceRecord};
use crate::error::{config_err, Result};
use crate::metrics::{average_reports, window_metrics, MetricsReport, WINDOW_DAYS};
use crate::ppo::{load_checkpoint, save_checkpoint, PolicyParams, TrainConfig};
use crate::sim::{DaySummary, ScenarioConfig};

/// Per-seed window metrics plus their mean.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SeedReports {
    pub policy: String,
    pub seeds: Vec<u64>,
    pub per_seed: Vec<MetricsReport>,
    pub mean: MetricsReport,
}

impl SeedReports {
    pub fn new(policy: &str, seeds: &[u64], per_seed: Vec<MetricsReport>) -> Result<Self> {
        let mean = average_reports(&per_seed)?;
        Ok(Self { policy: policy.to_string(), seeds: seeds.to_vec(), per_seed, mean })
    }

    pub fn rows(&self, config_hash: &str) -> Vec<MetricsRow> {
        let mut rows: Vec<MetricsRow> = self
            .seeds
            .iter()
            .zip(&self.per_seed)
            .map(|(s, m)| MetricsRow::new(config_hash, &s.to_string(), &self.policy, m))
            .collect();
        rows.push(MetricsRow::new(config_hash, "mean", &self.policy, &self.mean));
        rows
    }
}

/// Result document written as `<kind>_report.json`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExperimentReport {
    pub kind: ExperimentKind,
    pub config_hash: String,
    pub scenario_hash: String,
    pub reports: Vec<SeedReports>,
    /// Files written next to the report, relative to the output directory.
    pub files: Vec<String>,
}

/// Daily rewards of a series under the MDP reward.
pub fn day_rewards(days: &[DaySummary], scenario: &ScenarioConfig, pt_target: f64) -> Vec<f64> {
    days.iter().map(|d| reward(d.aitt, d.pt_share, scenario.free_flow_time(), pt_target)).collect()
}

fn metrics_of(days: &[DaySummary], scenario: &ScenarioConfig, pt_target: f64, market: bool) -> Result<MetricsReport> {
    window_metrics(days, WINDOW_DAYS, scenario.free_flow_time(), pt_target, market)
}

fn day_rows(hash: &str, seed: u64, policy: &str, days: &[DaySummary], scenario: &ScenarioConfig, pt_target: f64) -> Vec<DayRow> {
    days.iter()
        .zip(day_rewards(days, scenario, pt_target))
        .map(|(d, r)| DayRow::new(hash, seed, policy, d, r))
        .collect()
}

/// Day series of a baseline for every seed.
pub fn baseline_series(kind: ExperimentKind, scenario: &ScenarioConfig, episode: &EpisodeConfig, seeds: &[u64]) -> Result<Vec<Vec<DaySummary>>> {
    let days = episode.horizon_days as u32;
    seeds
        .par_iter()
        .map(|&seed| {
            let sc = scenario.clone().with_seed(seed);
            match kind {
                ExperimentKind::Nt => no_toll_days(&sc, days),
                ExperimentKind::Random => random_toll_days(&sc, days, episode.fixed_center, episode.fixed_width, seed),
                other => Err(config_err(format!("{other:?} is not a baseline"))),
            }
        })
        .collect()
}

/// Outcome of a transfer comparison.
#[derive(Clone, Debug)]
pub struct TransferOutcome {
    pub transferred: SeedReports,
    pub scratch: SeedReports,
    pub transferred_eval: Vec<PolicyEvaluation>,
    pub scratch_eval: Vec<PolicyEvaluation>,
    pub scratch_policies: Vec<TrainedPolicy>,
}

/// Evaluates `policy` on `target` without retraining and compares it with
/// policies trained from scratch on `target`, one per seed.
pub fn run_transfer(
    policy: &PolicyParams,
    target: &ScenarioConfig,
    episode: &EpisodeConfig,
    train: &TrainConfig,
    iterations: usize,
    seeds: &[u64],
) -> Result<TransferOutcome> {
    let pt = episode.pt_target;
    let transferred_eval: Vec<PolicyEvaluation> =
        seeds.par_iter().map(|&s| evaluate_policy(policy, target, episode, s)).collect::<Result<_>>()?;
    let scratch_policies: Vec<TrainedPolicy> =
        seeds.par_iter().map(|&s| train_policy(target, episode, train, iterations, s, None)).collect::<Result<_>>()?;
    let scratch_eval: Vec<PolicyEvaluation> = scratch_policies
        .par_iter()
        .map(|p| evaluate_policy(&p.params, target, episode, p.seed))
        .collect::<Result<_>>()?;
    let market = target.market.enabled;
    let report = |evals: &[PolicyEvaluation], name: &str| -> Result<SeedReports> {
        let per_seed = evals.iter().map(|e| metrics_of(&e.days, target, pt, market)).collect::<Result<Vec<_>>>()?;
        SeedReports::new(name, seeds, per_seed)
    };
    Ok(TransferOutcome {
        transferred: report(&transferred_eval, "transferred")?,
        scratch: report(&scratch_eval, "scratch")?,
        transferred_eval,
        scratch_eval,
        scratch_policies,
    })
}

/// Trained policy and its evaluation for one sweep cell and seed.
#[derive(Clone, Debug)]
pub struct SweepRun {
    pub cell: SweepCell,
    pub policy: TrainedPolicy,
    pub evaluation: PolicyEvaluation,
}

/// Trains every grid cell for every seed.
pub fn run_sweep(
    scenario: &ScenarioConfig,
    episode: &EpisodeConfig,
    base: &TrainConfig,
    grid: &SweepGrid,
    iterations: usize,
    seeds: &[u64],
) -> Result<Vec<SweepRun>> {
    let jobs: Vec<(SweepCell, u64)> = grid.cells().into_iter().flat_map(|c| seeds.iter().map(move |&s| (c, s))).collect();
    jobs.par_iter()
        .map(|&(cell, seed)| {
            let cfg = TrainConfig { batch_size: cell.batch_size, n_epochs: cell.epochs, caps_mode: cell.caps_mode, ..base.clone() };
            let policy = train_policy(scenario, episode, &cfg, iterations, seed, None)?;
            let evaluation = evaluate_policy(&policy.params, scenario, episode, seed)?;
            Ok(SweepRun { cell, policy, evaluation })
        })
        .collect()
}

struct Emitter<'a> {
    dir: &'a Path,
    files: Vec<String>,
}

impl Emitter<'_> {
    fn path(&mut self, name: String) -> PathBuf {
        self.files.push(name.clone());
        self.dir.join(name)
    }

    fn csv<R: Row>(&mut self, name: String, rows: &[R]) -> Result<()> {
        let p = self.path(name);
        write_csv(&p, rows)
    }

    fn ndjson(&mut self, name: String, records: &[TraceRecord]) -> Result<()> {
        let p = self.path(name);
        write_ndjson(&p, records)
    }
}

/// Runs `spec` and writes its result files into `out_dir`.
pub fn run_experiment(spec: &ExperimentSpec, out_dir: &Path) -> Result<ExperimentReport> {
    spec.validate()?;
    std::fs::create_dir_all(out_dir)?;
    let hash = spec.hash();
    let scenario = spec.scenario()?;
    let episode = spec.episode();
    let pt = episode.pt_target;
    let seeds = &spec.seeds;
    let stem = spec.kind.file_stem();
    let mut out = Emitter { dir: out_dir, files: Vec::new() };
    let mut reports = Vec::new();

    match spec.kind {
        ExperimentKind::Nt | ExperimentKind::Random => {
            let series = baseline_series(spec.kind, &scenario, &episode, seeds)?;
            let market = spec.kind != ExperimentKind::Nt && scenario.market.enabled;
            let per_seed = series.iter().map(|d| metrics_of(d, &scenario, pt, market)).collect::<Result<Vec<_>>>()?;
            let rows: Vec<DayRow> =
                seeds.iter().zip(&series).flat_map(|(&s, d)| day_rows(&hash, s, stem, d, &scenario, pt)).collect();
            out.csv(format!("{stem}_days.csv"), &rows)?;
            reports.push(SeedReports::new(stem, seeds, per_seed)?);
        }
        ExperimentKind::Bo => {
            let space = SearchSpace::from_dims(spec.bo_dims)?;
            let space = match space {
                SearchSpace::OneD { .. } => SearchSpace::OneD { center: episode.fixed_center, width: episode.fixed_width },
                s => s,
            };
            let runs = seeds
                .par_iter()
                .map(|&seed| {
                    let obj = EquilibriumObjective {
                        horizon_days: episode.horizon_days as u32,
                        pt_target: pt,
                        ..EquilibriumObjective::new(scenario.clone().with_seed(seed))
                    };
                    run_bo(&obj, space, &spec.bo, seed).and_then(|r| Ok((obj.metrics(&r.best_days)?, r)))
                })
                .collect::<Result<Vec<_>>>()?;
            let history: Vec<BoHistoryRow> = seeds
                .iter()
                .zip(&runs)
                .flat_map(|(&seed, (_, run))| {
                    let hash = hash.clone();
                    run.history_rows().into_iter().map(move |h| BoHistoryRow {
                        config_hash: hash.clone(),
                        seed,
                        iteration: h.iteration,
                        amplitude: h.amplitude,
                        center: h.center,
                        width: h.width,
                        objective: h.objective,
                        running_best: h.running_best,
                    })
                })
                .collect();
            out.csv(format!("{stem}_history.csv"), &history)?;
            let rows: Vec<DayRow> = seeds
                .iter()
                .zip(&runs)
                .flat_map(|(&s, (_, r))| day_rows(&hash, s, stem, &r.best_days, &scenario, pt))
                .collect();
            out.csv(format!("{stem}_days.csv"), &rows)?;
            reports.push(SeedReports::new(stem, seeds, runs.into_iter().map(|(m, _)| m).collect())?);
        }
        ExperimentKind::Train1d | ExperimentKind::Train3d => {
            let train = spec.train_config();
            let trained = seeds
                .par_iter()
                .map(|&s| {
                    let p = train_policy(&scenario, &episode, &train, spec.iterations, s, None)?;
                    let e = evaluate_policy(&p.params, &scenario, &episode, s)?;
                    Ok((p, e))
                })
                .collect::<Result<Vec<_>>>()?;
            let mut curves = Vec::new();
            let mut days = Vec::new();
            let mut trace = Vec::new();
            let mut per_seed = Vec::new();
            for (p, e) in &trained {
                let ckpt = out.path(format!("{stem}_policy_seed{}.ckpt", p.seed));
                save_checkpoint(&ckpt, &p.params, &p.header())?;
                curves.extend(p.curve.iter().map(|c| CurveRow::new(&hash, p.seed, stem, c)));
                days.extend(day_rows(&hash, e.seed, "ppo", &e.days, &scenario, pt));
                trace.extend(e.trace.iter().cloned().map(|mut t| {
                    t.episode = e.seed as usize;
                    t
                }));
                per_seed.push(metrics_of(&e.days, &scenario, pt, scenario.market.enabled)?);
            }
            out.csv(format!("{stem}_curves.csv"), &curves)?;
            out.csv(format!("{stem}_days.csv"), &days)?;
            out.ndjson(format!("{stem}_trace.ndjson"), &trace)?;
            reports.push(SeedReports::new("ppo", seeds, per_seed)?);
        }
        ExperimentKind::Transfer => {
            let path = spec.checkpoint.as_ref().ok_or_else(|| config_err("transfer needs a checkpoint"))?;
            let (params, _) = load_checkpoint(path)?;
            let t = run_transfer(&params, &scenario, &episode, &spec.train_config(), spec.iterations, seeds)?;
            let mut days = Vec::new();
            for e in &t.transferred_eval {
                days.extend(day_rows(&hash, e.seed, "transferred", &e.days, &scenario, pt));
            }
            for e in &t.scratch_eval {
                days.extend(day_rows(&hash, e.seed, "scratch", &e.days, &scenario, pt));
            }
            let curves: Vec<CurveRow> = t
                .scratch_policies
                .iter()
                .flat_map(|p| p.curve.iter().map(|c| CurveRow::new(&hash, p.seed, "scratch", c)).collect::<Vec<_>>())
                .collect();
            out.csv(format!("{stem}_days.csv"), &days)?;
            out.csv(format!("{stem}_curves.csv"), &curves)?;
            reports.push(t.transferred);
            reports.push(t.scratch);
        }
        ExperimentKind::Sweep => {
            let runs = run_sweep(&scenario, &episode, &spec.train_config(), &spec.sweep, spec.iterations, seeds)?;
            let mut curves = Vec::new();
            let mut days = Vec::new();
            for run in &runs {
                let label = run.cell.label();
                curves.extend(run.policy.curve.iter().map(|c| CurveRow::new(&hash, run.policy.seed, &label, c)));
                days.extend(day_rows(&hash, run.evaluation.seed, &label, &run.evaluation.days, &scenario, pt));
            }
            for cell in spec.sweep.cells() {
                let per_seed = runs
                    .iter()
                    .filter(|r| r.cell == cell)
                    .map(|r| metrics_of(&r.evaluation.days, &scenario, pt, scenario.market.enabled))
                    .collect::<Result<Vec<_>>>()?;
                reports.push(SeedReports::new(&cell.label(), seeds, per_seed)?);
            }
            out.csv(format!("{stem}_curves.csv"), &curves)?;
            out.csv(format!("{stem}_days.csv"), &days)?;
        }
    }

    let rows: Vec<MetricsRow> = reports.iter().flat_map(|r| r.rows(&hash)).collect();
    out.csv(format!("{stem}_metrics.csv"), &rows)?;
    let report_name = format!("{stem}_report.json");
    out.files.push(report_name.clone());
    let report = ExperimentReport {
        kind: spec.kind,
        config_hash: hash,
        scenario_hash: scenario.hash(),
        reports,
        files: out.files.clone(),
    };
    write_json(&out_dir.join(report_name), &report)?;
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tiny_spec(kind: ExperimentKind) -> ExperimentSpec {
        ExperimentSpec {
            kind,
            scenario: Some(ScenarioConfig { population: 60, jam_accumulation: 56.0, ..ScenarioConfig::desk() }),
            seeds: vec![1, 2],
            episode: EpisodeConfig { horizon_days: 8, ..EpisodeConfig::default() },
            ..ExperimentSpec::default()
        }
    }

    #[test]
    fn nt_rows_and_na_price() {
        let dir = tempfile::tempdir().unwrap();
        let report = run_experiment(&tiny_spec(ExperimentKind::Nt), dir.path()).unwrap();
        let days = std::fs::read_to_string(dir.path().join("nt_days.csv")).unwrap();
        assert_eq!(days.lines().count(), 1 + 8 * 2);
        assert_eq!(report.reports[0].mean.token_price, None);
        let text = std::fs::read_to_string(dir.path().join("nt_report.json")).unwrap();
        assert_eq!(serde_json::from_str::<ExperimentReport>(&text).unwrap(), report);
    }

    #[test]
    fn rerun_is_byte_identical() {
        let spec = tiny_spec(ExperimentKind::Random);
        let a = tempfile::tempdir().unwrap();
        let b = tempfile::tempdir().unwrap();
        let ra = run_experiment(&spec, a.path()).unwrap();
        run_experiment(&spec, b.path()).unwrap();
        for f in &ra.files {
            assert_eq!(std::fs::read(a.path().join(f)).unwrap(), std::fs::read(b.path().join(f)).unwrap(), "{f}");
        }
    }

    #[test]
    fn identity_transfer_matches_source_evaluation() {
        let spec = tiny_spec(ExperimentKind::Train1d);
        let cfg = TrainConfig { n_envs: 2, n_steps: 8, batch_size: 8, n_epochs: 1, ..TrainConfig::one_d() };
        let sc = spec.scenario().unwrap();
        let ep = spec.episode();
        let p = train_policy(&sc, &ep, &cfg, 1, 1, None).unwrap();
        let source = evaluate_policy(&p.params, &sc, &ep, 1).unwrap();
        let t = run_transfer(&p.params, &sc, &ep, &cfg, 1, &[1]).unwrap();
        assert_eq!(t.transferred_eval[0], source);
        assert_eq!(t.transferred.per_seed.len(), 1);
        assert_eq!(t.scratch_eval[0].days.len(), t.transferred_eval[0].days.len());
    }
}
