//! Trial setup and execution.

use rand::seq::index;
use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use rayon::ThreadPool;
use serde::Serialize;

use super::spec::{Algorithm, Cell, CheckpointUnits, ConstantsSource, ExperimentSpec, OracleKind};
use crate::algorithms::{
    sagd_batch, sagd_eta, sagd_run, sge_batch, sge_eta, sge_run, OracleAccounting, Progress, RunOptions, SagdSchedule, SagdVariant,
    SgeSchedule,
};
use crate::error::{Error, Result};
use crate::geometry::{l2_norm, Geometry, GeometryKind};
use crate::multistage::{run_stages, smd_stages, StageConfig, StageEvent, StagePlan};
use crate::oracle::{estimate_constants_with, quadratic_oracle, GlrModel, ProbeConfig, ProblemConstants, StochasticOracle, WishartOracle};
use crate::rng::Streams;

/// Everything a trial needs before its first oracle call.
#[derive(Clone, Debug)]
pub struct TrialSetup {
    pub trial: u32,
    pub model: GlrModel,
    pub x0: Vec<f64>,
    pub constants: ProblemConstants,
    pub r0: f64,
    /// One plan with `stage = 0` for single-stage methods.
    pub stages: Vec<StagePlan>,
    pub planned_calls: u64,
    pub planned_iterations: u64,
}

impl TrialSetup {
    pub fn xstar(&self) -> &[f64] {
        self.model.xstar()
    }
}

/// `‖x − x*‖₂` of the latest iterate at each checkpoint.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct TraceRow {
    pub checkpoint_index: usize,
    /// Grid value for call-unit grids, calls actually spent otherwise.
    pub oracle_calls: u64,
    pub l2: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ErrorTrace {
    pub trial: u32,
    pub rows: Vec<TraceRow>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct TrialFailure {
    pub trial: u32,
    pub message: String,
}

/// Outcome of every trial of one cell.
#[derive(Debug)]
pub struct CellRun {
    pub cell: Cell,
    pub units: CheckpointUnits,
    pub budget: u64,
    pub grid: Vec<u64>,
    pub setups: Vec<TrialSetup>,
    pub traces: Vec<ErrorTrace>,
    pub failures: Vec<TrialFailure>,
}

/// `⌈budget·j/count⌉` for `j = 1..=count`, with repeats dropped.
pub fn checkpoint_grid(budget: u64, count: usize) -> Vec<u64> {
    let mut grid: Vec<u64> = (1..=count as u128)
        .map(|j| (budget as u128 * j).div_ceil(count as u128) as u64)
        .filter(|&g| g > 0)
        .collect();
    grid.dedup();
    grid
}

fn draw_xstar<R: Rng + ?Sized>(n: usize, s: usize, rng: &mut R) -> Vec<f64> {
    let mut x = vec![0.0; n];
    let mut support = index::sample(rng, n, s).into_vec();
    support.sort_unstable();
    for i in support {
        x[i] = rng.sample(StandardNormal);
    }
    x
}

fn setup_constants(spec: &ExperimentSpec, model: &GlrModel, geom: &Geometry, x0: &[f64], streams: &crate::rng::TrialStreams) -> Result<ProblemConstants> {
    let diff: Vec<f64> = x0.iter().zip(model.xstar()).map(|(a, b)| a - b).collect();
    let analytic_ok = model.is_linear_gaussian() && geom.kind() == GeometryKind::Euclidean;
    let c = match (spec.oracle, spec.constants) {
        (OracleKind::Exact, _) => {
            let diag = model.sigma_diag();
            let max = diag.iter().cloned().fold(f64::MIN, f64::max);
            let min = diag.iter().cloned().fold(f64::MAX, f64::min);
            let growth = match geom.kind() {
                GeometryKind::Euclidean => min,
                GeometryKind::Lp => min / geom.dim() as f64,
            };
            ProblemConstants {
                growth_l2: min,
                ..ProblemConstants::deterministic(max, growth, (0.5 * geom.omega_bound()).sqrt() * geom.norm(&diff)?)
            }
        }
        (_, ConstantsSource::Analytic) => ProblemConstants::linear_gaussian_euclidean(model, x0)?,
        (_, ConstantsSource::Auto) if analytic_ok => ProblemConstants::linear_gaussian_euclidean(model, x0)?,
        _ => {
            let cfg = ProbeConfig {
                samples: spec.probe_samples,
                ..ProbeConfig::default()
            };
            estimate_constants_with(model, geom, x0, &mut streams.probe(), &cfg)?
        }
    };
    let c = c.with_overrides(&spec.overrides);
    c.validate()?;
    Ok(c)
}

fn stage_config(spec: &ExperimentSpec, setup_r0: f64, c: ProblemConstants, geom: &Geometry) -> StageConfig {
    let mut cfg = StageConfig::new(setup_r0, spec.stages, c, geom);
    cfg.iterations = spec.stage_iterations;
    if let super::spec::BatchSpec::Fixed(m) = spec.batch {
        cfg.batch = Some(m);
    }
    if spec.algorithm.is_sparse() {
        cfg.sparsity = Some(spec.s);
    }
    cfg
}

/// Draws `x*`, resolves the constants and plans every stage of one trial.
pub fn setup_trial(spec: &ExperimentSpec, cell: &Cell, trial: u32) -> Result<TrialSetup> {
    let n = spec.n;
    let streams = Streams::new(spec.seed).trial(trial);
    let mut rng = streams.setup();
    let xstar = match &spec.xstar {
        Some(x) => x.clone(),
        None => draw_xstar(n, spec.s, &mut rng),
    };
    let x0 = spec.x0.clone().unwrap_or_else(|| vec![0.0; n]);
    let geom = Geometry::new(spec.geometry, n)?;
    let model = GlrModel::new(xstar, spec.sigma_diag(), spec.regressor_dist(), spec.noise_dist(cell.sigma), cell.alpha)?;
    let constants = setup_constants(spec, &model, &geom, &x0, &streams)?;
    let diff: Vec<f64> = x0.iter().zip(model.xstar()).map(|(a, b)| a - b).collect();
    let r0 = match spec.r0 {
        Some(r) => r,
        None => geom.norm(&diff)?,
    };
    let fixed_batch = match spec.batch {
        super::spec::BatchSpec::Fixed(m) => Some(m),
        super::spec::BatchSpec::Auto => None,
    };
    let k = spec.horizon;
    let single = |batch: usize, eta: f64| {
        vec![StagePlan {
            stage: 0,
            iterations: k,
            batch,
            eta,
            radius: constants.radius,
        }]
    };
    let stages = match spec.algorithm {
        Algorithm::Sge => {
            let m = match fixed_batch {
                Some(m) => m,
                None => sge_batch(&constants, k)?,
            };
            single(m, sge_eta(&constants, k, m)?)
        }
        Algorithm::SagdSn | Algorithm::SagdLp => {
            let variant = if spec.algorithm == Algorithm::SagdSn { SagdVariant::Sn } else { SagdVariant::Lp };
            let m = match fixed_batch {
                Some(m) => m,
                None => sagd_batch(&constants, k)?,
            };
            single(m, sagd_eta(&constants, k, m, variant)?)
        }
        Algorithm::MultistageSge => stage_config(spec, r0, constants, &geom).plan_multistage()?,
        Algorithm::SgeSr => stage_config(spec, r0, constants, &geom).plan_sge_sr()?,
        Algorithm::SmdSr => stage_config(spec, r0, constants, &geom).plan_smd_sr(spec.m0)?,
    };
    let extrapolates = !matches!(spec.algorithm, Algorithm::SagdSn | Algorithm::SagdLp | Algorithm::SmdSr);
    let double = spec.accounting() == OracleAccounting::Evaluations && extrapolates;
    let mut planned_calls = 0u64;
    let mut planned_iterations = 0u64;
    for p in &stages {
        let evals = if double { 2 * p.iterations as u64 - 1 } else { p.iterations as u64 };
        planned_calls = planned_calls.saturating_add(evals.saturating_mul(p.batch as u64));
        planned_iterations += p.iterations as u64;
    }
    Ok(TrialSetup {
        trial,
        model,
        x0,
        constants,
        r0,
        stages,
        planned_calls,
        planned_iterations,
    })
}

struct Checkpointer<'a> {
    grid: &'a [u64],
    units: CheckpointUnits,
    next: usize,
    latest: (u64, f64),
    rows: Vec<TraceRow>,
}

impl<'a> Checkpointer<'a> {
    fn new(grid: &'a [u64], units: CheckpointUnits, initial_l2: f64) -> Self {
        Checkpointer {
            grid,
            units,
            next: 0,
            latest: (0, initial_l2),
            rows: Vec::with_capacity(grid.len()),
        }
    }

    fn flush_below(&mut self, position: u64) {
        while self.next < self.grid.len() && self.grid[self.next] < position {
            let oracle_calls = match self.units {
                CheckpointUnits::Calls => self.grid[self.next],
                CheckpointUnits::Iterations => self.latest.0,
            };
            self.rows.push(TraceRow {
                checkpoint_index: self.next,
                oracle_calls,
                l2: self.latest.1,
            });
            self.next += 1;
        }
    }

    fn observe(&mut self, iteration: u64, calls: u64, l2: f64) {
        let position = match self.units {
            CheckpointUnits::Calls => calls,
            CheckpointUnits::Iterations => iteration,
        };
        self.flush_below(position);
        self.latest = (calls, l2);
    }

    fn finish(mut self) -> Vec<TraceRow> {
        self.flush_below(u64::MAX);
        self.rows
    }
}

fn distance(x: &[f64], xstar: &[f64]) -> f64 {
    x.iter().zip(xstar).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt()
}

/// Runs one prepared trial and records its error at every checkpoint.
pub fn run_trial(spec: &ExperimentSpec, setup: &TrialSetup, grid: &[u64]) -> Result<ErrorTrace> {
    let geom = Geometry::new(spec.geometry, spec.n)?;
    let xstar = setup.xstar();
    let exact;
    let wishart;
    let oracle: &dyn StochasticOracle = match spec.oracle {
        OracleKind::Glr => &setup.model,
        OracleKind::Wishart => {
            wishart = WishartOracle::new(setup.model.clone())?;
            &wishart
        }
        OracleKind::Exact => {
            exact = quadratic_oracle(setup.model.sigma_diag().to_vec(), xstar.to_vec());
            &exact
        }
    };
    let streams = Streams::new(spec.seed).trial(setup.trial).stage(0);
    let opts = RunOptions {
        snapshot_every: 0,
        accounting: spec.accounting(),
    };
    let diff: Vec<f64> = setup.x0.iter().zip(xstar).map(|(a, b)| a - b).collect();
    let mut cp = Checkpointer::new(grid, spec.checkpoint_units, l2_norm(&diff));
    let plan = &setup.stages;
    match spec.algorithm {
        Algorithm::Sge => {
            let p = plan[0];
            let sched = SgeSchedule::new(p.iterations, p.batch, p.eta)?;
            let mut obs = |pr: &Progress| cp.observe(pr.t as u64, pr.calls, distance(pr.x, xstar));
            sge_run(oracle, &geom, &setup.x0, &sched, &streams, &opts, &mut obs)?;
        }
        Algorithm::SagdSn | Algorithm::SagdLp => {
            let p = plan[0];
            let sched = SagdSchedule::new(p.iterations, p.batch, p.eta)?;
            let mut obs = |pr: &Progress| cp.observe(pr.t as u64, pr.calls, distance(pr.x, xstar));
            sagd_run(oracle, &geom, &setup.x0, &sched, &streams, &opts, &mut obs)?;
        }
        Algorithm::MultistageSge | Algorithm::SgeSr | Algorithm::SmdSr => {
            let offsets: Vec<u64> = plan
                .iter()
                .scan(0u64, |acc, p| {
                    let start = *acc;
                    *acc += p.iterations as u64;
                    Some(start)
                })
                .collect();
            let mut obs = |e: &StageEvent| {
                let iteration = offsets[e.stage - 1] + e.t as u64;
                cp.observe(iteration, e.calls, distance(e.x, xstar));
            };
            match spec.algorithm {
                Algorithm::MultistageSge => {
                    run_stages(oracle, &geom, &setup.x0, plan, None, &streams, &opts, &mut obs)?;
                }
                Algorithm::SgeSr => {
                    run_stages(oracle, &geom, &setup.x0, plan, Some(spec.s), &streams, &opts, &mut obs)?;
                }
                _ => {
                    smd_stages(oracle, &geom, &setup.x0, plan, spec.s, &streams, &mut obs)?;
                }
            }
        }
    }
    Ok(ErrorTrace {
        trial: setup.trial,
        rows: cp.finish(),
    })
}

/// Builds a pool with `workers` threads, or rayon's default when `None`.
pub fn worker_pool(workers: Option<usize>) -> Result<ThreadPool> {
    let mut b = rayon::ThreadPoolBuilder::new();
    if let Some(w) = workers {
        if w == 0 {
            return Err(Error::config("workers", "must be at least 1"));
        }
        b = b.num_threads(w);
    }
    b.build().map_err(|e| Error::config("workers", e.to_string()))
}

/// Runs every trial of one cell on `pool`. Results come back in trial order,
/// whatever order the workers finish in.
pub fn run_cell(spec: &ExperimentSpec, cell: &Cell, pool: &ThreadPool) -> CellRun {
    let trials: Vec<u32> = (0..spec.trials as u32).collect();
    let setups: Vec<Result<TrialSetup>> = pool.install(|| trials.par_iter().map(|&t| setup_trial(spec, cell, t)).collect());
    let mut failures = Vec::new();
    let mut ok = Vec::new();
    for (t, s) in trials.iter().zip(setups) {
        match s {
            Ok(s) => ok.push(s),
            Err(e) => failures.push(TrialFailure {
                trial: *t,
                message: format!("setup: {e}"),
            }),
        }
    }
    let budget = ok
        .iter()
        .map(|s| match spec.checkpoint_units {
            CheckpointUnits::Calls => s.planned_calls,
            CheckpointUnits::Iterations => s.planned_iterations,
        })
        .max()
        .unwrap_or(0);
    let grid = checkpoint_grid(budget, spec.checkpoints);
    let results: Vec<Result<ErrorTrace>> = pool.install(|| ok.par_iter().map(|s| run_trial(spec, s, &grid)).collect());
    let mut traces = Vec::with_capacity(results.len());
    for (s, r) in ok.iter().zip(results) {
        match r {
            Ok(tr) => traces.push(tr),
            Err(e) => failures.push(TrialFailure {
                trial: s.trial,
                message: e.to_string(),
            }),
        }
    }
    failures.sort_by_key(|f| f.trial);
    CellRun {
        cell: *cell,
        units: spec.checkpoint_units,
        budget,
        grid,
        setups: ok,
        traces,
        failures,
    }
}

/// Runs every cell of `spec`.
pub fn run_trials(spec: &ExperimentSpec, workers: Option<usize>) -> Result<Vec<CellRun>> {
    let pool = worker_pool(workers)?;
    Ok(spec.cells().iter().map(|c| run_cell(spec, c, &pool)).collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grid_contract() {
        let g = checkpoint_grid(1000, 100);
        assert_eq!(g.len(), 100);
        assert_eq!((g[0], g[99]), (10, 1000));
        assert_eq!(checkpoint_grid(3, 10), vec![1, 2, 3]);
        assert!(checkpoint_grid(0, 10).is_empty());
        assert!(g.windows(2).all(|w| w[0] < w[1]));
    }

    #[test]
    fn checkpointer_keeps_latest_iterate_at_or_before_each_point() {
        let grid = [5, 10, 15, 20];
        let mut cp = Checkpointer::new(&grid, CheckpointUnits::Calls, 9.0);
        cp.observe(1, 7, 3.0);
        cp.observe(2, 14, 2.0);
        cp.observe(2, 14, 1.5);
        let rows = cp.finish();
        let l2: Vec<f64> = rows.iter().map(|r| r.l2).collect();
        assert_eq!(l2, vec![9.0, 3.0, 1.5, 1.5]);
        assert_eq!(rows[3].oracle_calls, 20);
    }

    #[test]
    fn sparse_truth_has_s_entries() {
        let mut rng = Streams::new(0).trial(0).setup();
        let x = draw_xstar(50, 7, &mut rng);
        assert_eq!(x.iter().filter(|v| **v != 0.0).count(), 7);
    }

    #[test]
    fn runs_repeat_exactly() {
        let spec = ExperimentSpec::from_toml_str("n = 20\nalgorithm = \"sge\"\ntrials = 3\nhorizon = 30\nbatch = 4\ncheckpoints = 12\nkappa = 4\n").unwrap();
        let a = run_trials(&spec, Some(1)).unwrap();
        let b = run_trials(&spec, Some(2)).unwrap();
        assert_eq!(a[0].traces, b[0].traces);
        assert_eq!(a[0].traces.len(), 3);
        assert!(a[0].traces.iter().all(|t| t.rows.len() == 12));
        assert!(a[0].failures.is_empty());
    }
}
