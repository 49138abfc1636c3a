//! Restart schemes built on SGE: the quadratic-growth multistage method and
//! SGE-SR with hard thresholding after every stage.

use serde::{Deserialize, Serialize};

use crate::algorithms::{ceil_to_usize, constants::*, sge_run, Progress, RunOptions, SgeSchedule};
use crate::error::{check_dim, Error, Result};
use crate::geometry::Geometry;
use crate::oracle::{ProblemConstants, StochasticOracle};
use crate::rng::RunStreams;

/// Keeps the `s` largest-magnitude entries of `x` and zeroes the rest.
/// Ties go to the lower index.
pub fn sparse_project(x: &[f64], s: usize) -> Result<Vec<f64>> {
    let mut out = x.to_vec();
    sparse_project_in_place(&mut out, s)?;
    Ok(out)
}

pub fn sparse_project_in_place(x: &mut [f64], s: usize) -> Result<()> {
    let n = x.len();
    if s == 0 || s > n {
        return Err(Error::invalid("s", format!("need 1 <= s <= {n}, got {s}")));
    }
    if s == n {
        return Ok(());
    }
    let mut idx: Vec<usize> = (0..n).collect();
    let by_magnitude = |a: &usize, b: &usize| x[*b].abs().total_cmp(&x[*a].abs()).then(a.cmp(b));
    idx.select_nth_unstable_by(s - 1, by_magnitude);
    for &i in &idx[s..] {
        x[i] = 0.0;
    }
    Ok(())
}

/// Parameters shared by both restart schemes.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StageConfig {
    /// Bound on the initial distance in the primal norm.
    pub r0: f64,
    pub stages: usize,
    pub constants: ProblemConstants,
    /// Sparsity level; required by SGE-SR.
    pub sparsity: Option<usize>,
    pub omega: f64,
    /// Replaces the rule for `N` when set.
    pub iterations: Option<usize>,
    /// Replaces the rule for `m^k` when set; `η` still follows from `N` and `m`.
    pub batch: Option<usize>,
}

impl StageConfig {
    pub fn new(r0: f64, stages: usize, constants: ProblemConstants, geom: &Geometry) -> Self {
        StageConfig {
            r0,
            stages,
            constants,
            sparsity: None,
            omega: geom.omega_bound(),
            iterations: None,
            batch: None,
        }
    }

    pub fn with_sparsity(mut self, s: usize) -> Self {
        self.sparsity = Some(s);
        self
    }

    pub fn with_iterations(mut self, n: usize) -> Self {
        self.iterations = Some(n);
        self
    }

    pub fn with_batch(mut self, m: usize) -> Self {
        self.batch = Some(m);
        self
    }

    fn validate(&self) -> Result<()> {
        if !(self.r0 > 0.0) || !self.r0.is_finite() {
            return Err(Error::invalid("r0", format!("must be positive, got {}", self.r0)));
        }
        if self.stages == 0 {
            return Err(Error::invalid("stages", "need at least one stage"));
        }
        if !(self.omega >= 1.0) || !self.omega.is_finite() {
            return Err(Error::invalid("omega", format!("must be >= 1, got {}", self.omega)));
        }
        if !(self.constants.smoothness > 0.0) {
            return Err(Error::invalid("smoothness", "L must be positive"));
        }
        if self.iterations == Some(0) {
            return Err(Error::invalid("iterations", "must be at least 1"));
        }
        if self.batch == Some(0) {
            return Err(Error::invalid("batch", "must be at least 1"));
        }
        self.constants.validate()
    }

    /// `R_k = R0·2^{−k/2}`.
    pub fn radius(&self, k: usize) -> f64 {
        self.r0 * (-(k as f64) / 2.0).exp2()
    }

    /// `N = ⌈10√(2ΩL/μ)⌉` unless overridden.
    pub fn multistage_iterations(&self) -> Result<usize> {
        if let Some(n) = self.iterations {
            return Ok(n);
        }
        let mu = self.constants.growth;
        if !(mu > 0.0) {
            return Err(Error::invalid("growth", "the multistage method needs mu > 0"));
        }
        Ok(ceil_to_usize(10.0 * (2.0 * self.omega * self.constants.smoothness / mu).sqrt()))
    }

    /// `N = ⌈40√(sLΩ/κ̲)⌉` unless overridden.
    pub fn sparse_iterations(&self) -> Result<usize> {
        let s = self.sparsity.ok_or_else(|| Error::invalid("s", "SGE-SR needs a sparsity level"))?;
        if let Some(n) = self.iterations {
            return Ok(n);
        }
        let kappa = self.constants.growth_l2;
        if !(kappa > 0.0) {
            return Err(Error::invalid("growth_l2", "SGE-SR needs kappa > 0"));
        }
        Ok(ceil_to_usize(40.0 * (s as f64 * self.constants.smoothness * self.omega / kappa).sqrt()))
    }

    /// `m^k = max{1, ⌈3𝓛(N+2)/L⌉, ⌈8N(N+2)²σ*²/(9ΩL²R_k²)⌉}` unless overridden.
    pub fn stage_batch(&self, n_iter: usize, k: usize) -> usize {
        if let Some(m) = self.batch {
            return m;
        }
        let c = &self.constants;
        let nf = n_iter as f64;
        let rk = self.radius(k);
        let a = (3.0 * c.variance_slope * (nf + 2.0) / c.smoothness).ceil();
        let b = (8.0 * nf * (nf + 2.0).powi(2) * c.sigma_star.powi(2) / (9.0 * self.omega * (c.smoothness * rk).powi(2))).ceil();
        ceil_to_usize(a.max(b).max(1.0))
    }

    /// `η = max{24L, 18(N+2)𝓛/m, (σ*/R_k)√(2(N+1)³/(Ωm))}`.
    pub fn stage_eta(&self, n_iter: usize, m: usize, k: usize) -> f64 {
        let c = &self.constants;
        let (nf, mf) = (n_iter as f64, m as f64);
        let terms = [
            SGE_ETA_L * c.smoothness,
            SGE_ETA_CALL * (nf + 2.0) * c.variance_slope / mf,
            c.sigma_star / self.radius(k) * (SGE_ETA_SIGMA * (nf + 1.0).powi(3) / (self.omega * mf)).sqrt(),
        ];
        terms.into_iter().fold(0.0, f64::max)
    }

    fn plan(&self, n_iter: usize) -> Vec<StagePlan> {
        (1..=self.stages)
            .map(|k| {
                let m = self.stage_batch(n_iter, k);
                StagePlan {
                    stage: k,
                    iterations: n_iter,
                    batch: m,
                    eta: self.stage_eta(n_iter, m, k),
                    radius: self.radius(k),
                }
            })
            .collect()
    }

    pub fn plan_multistage(&self) -> Result<Vec<StagePlan>> {
        self.validate()?;
        Ok(self.plan(self.multistage_iterations()?))
    }

    pub fn plan_sge_sr(&self) -> Result<Vec<StagePlan>> {
        self.validate()?;
        Ok(self.plan(self.sparse_iterations()?))
    }
}

/// Resolved parameters of one stage.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct StagePlan {
    pub stage: usize,
    pub iterations: usize,
    pub batch: usize,
    pub eta: f64,
    pub radius: f64,
}

impl StagePlan {
    pub fn calls(&self) -> u64 {
        self.iterations as u64 * self.batch as u64
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct StageRecord {
    pub plan: StagePlan,
    /// Un-thresholded stage output.
    pub y: Vec<f64>,
    /// Stage output after thresholding (equal to `y` for the plain multistage method).
    pub ybar: Vec<f64>,
    /// Cumulative calls at the end of the stage.
    pub calls: u64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct MultistageOutcome {
    pub y: Vec<f64>,
    pub ybar: Vec<f64>,
    pub stages: Vec<StageRecord>,
    pub calls: u64,
}

/// Observer payload for restart schemes. `x` is the current SGE iterate, or
/// the stage output when `end_of_stage` is set. `calls` is cumulative over
/// all stages.
#[derive(Clone, Copy, Debug)]
pub struct StageEvent<'a> {
    pub stage: usize,
    pub t: usize,
    pub x: &'a [f64],
    pub calls: u64,
    pub end_of_stage: bool,
}

pub(crate) fn run_stages<O: StochasticOracle + ?Sized>(
    oracle: &O,
    geom: &Geometry,
    y0: &[f64],
    plans: &[StagePlan],
    sparsity: Option<usize>,
    streams: &RunStreams,
    opts: &RunOptions,
    observer: &mut dyn FnMut(&StageEvent),
) -> Result<MultistageOutcome> {
    check_dim(geom.dim(), y0.len())?;
    if let Some(s) = sparsity {
        if s == 0 || s > y0.len() {
            return Err(Error::invalid("s", format!("need 1 <= s <= {}, got {s}", y0.len())));
        }
    }
    let inner_opts = RunOptions {
        snapshot_every: 0,
        ..*opts
    };
    let mut start = y0.to_vec();
    let mut y = y0.to_vec();
    let mut calls = 0u64;
    let mut records = Vec::with_capacity(plans.len());
    for plan in plans {
        let sched = SgeSchedule::new(plan.iterations, plan.batch, plan.eta)?;
        let stage_streams = streams.with_stage(plan.stage as u32);
        let base = calls;
        let k = plan.stage;
        let mut forward = |p: &Progress| {
            observer(&StageEvent {
                stage: k,
                t: p.t,
                x: p.x,
                calls: base + p.calls,
                end_of_stage: false,
            })
        };
        let tr = sge_run(oracle, geom, &start, &sched, &stage_streams, &inner_opts, &mut forward)?;
        calls += tr.calls;
        y = tr.x;
        let ybar = match sparsity {
            Some(s) => sparse_project(&y, s)?,
            None => y.clone(),
        };
        observer(&StageEvent {
            stage: k,
            t: plan.iterations,
            x: &ybar,
            calls,
            end_of_stage: true,
        });
        start.clone_from(&ybar);
        records.push(StageRecord {
            plan: *plan,
            y: y.clone(),
            ybar,
            calls,
        });
    }
    Ok(MultistageOutcome {
        y,
        ybar: start,
        stages: records,
        calls,
    })
}

/// Multistage SGE for objectives with quadratic growth. Stage `k` runs on the
/// substream `streams.with_stage(k)`.
pub fn multistage_sge<O: StochasticOracle + ?Sized>(
    oracle: &O,
    geom: &Geometry,
    y0: &[f64],
    cfg: &StageConfig,
    streams: &RunStreams,
    opts: &RunOptions,
    observer: &mut dyn FnMut(&StageEvent),
) -> Result<MultistageOutcome> {
    let plans = cfg.plan_multistage()?;
    run_stages(oracle, geom, y0, &plans, None, streams, opts, observer)
}

/// SGE-SR: multistage SGE with hard thresholding to `cfg.sparsity` entries
/// after every stage. The next stage restarts from the thresholded point.
pub fn sge_sr<O: StochasticOracle + ?Sized>(
    oracle: &O,
    geom: &Geometry,
    y0: &[f64],
    cfg: &StageConfig,
    streams: &RunStreams,
    opts: &RunOptions,
    observer: &mut dyn FnMut(&StageEvent),
) -> Result<MultistageOutcome> {
    let plans = cfg.plan_sge_sr()?;
    run_stages(oracle, geom, y0, &plans, cfg.sparsity, streams, opts, observer)
}

impl StageConfig {
    /// Stage plans for [`smd_sr`]: SGE-SR stage lengths and batches, the first
    /// batch optionally replaced by `first_batch`, and the constant step
    /// `max{2L, (σ*/R_k)√(N/(Ωm))}`.
    pub fn plan_smd_sr(&self, first_batch: Option<usize>) -> Result<Vec<StagePlan>> {
        let mut plans = self.plan_sge_sr()?;
        if let (Some(m0), Some(first)) = (first_batch, plans.first_mut()) {
            if m0 == 0 {
                return Err(Error::invalid("m0", "must be at least 1"));
            }
            first.batch = m0;
        }
        let c = &self.constants;
        for p in plans.iter_mut() {
            let scale = (p.iterations as f64 / (self.omega * p.batch as f64)).sqrt();
            p.eta = (2.0 * c.smoothness).max(c.sigma_star / p.radius * scale);
        }
        Ok(plans)
    }
}

/// Baseline for comparison plots: non-accelerated stochastic mirror descent
/// with iterate averaging and hard thresholding after each stage.
pub fn smd_sr<O: StochasticOracle + ?Sized>(
    oracle: &O,
    geom: &Geometry,
    y0: &[f64],
    cfg: &StageConfig,
    first_batch: Option<usize>,
    streams: &RunStreams,
    observer: &mut dyn FnMut(&StageEvent),
) -> Result<MultistageOutcome> {
    let plans = cfg.plan_smd_sr(first_batch)?;
    let s = cfg.sparsity.ok_or_else(|| Error::invalid("s", "SMD-SR needs a sparsity level"))?;
    smd_stages(oracle, geom, y0, &plans, s, streams, observer)
}

pub(crate) fn smd_stages<O: StochasticOracle + ?Sized>(
    oracle: &O,
    geom: &Geometry,
    y0: &[f64],
    plans: &[StagePlan],
    s: usize,
    streams: &RunStreams,
    observer: &mut dyn FnMut(&StageEvent),
) -> Result<MultistageOutcome> {
    check_dim(geom.dim(), y0.len())?;
    check_dim(geom.dim(), oracle.dim())?;
    let n = y0.len();
    let mut start = y0.to_vec();
    let mut y = y0.to_vec();
    let mut calls = 0u64;
    let mut records = Vec::with_capacity(plans.len());
    let mut grads = vec![vec![0.0; n]];
    let mut z_next = vec![0.0; n];
    for plan in plans {
        let stage_streams = streams.with_stage(plan.stage as u32);
        let mut z = start.clone();
        let mut avg = vec![0.0; n];
        for t in 1..=plan.iterations {
            let mut rng = stage_streams.iteration(t - 1);
            oracle.batch_gradients(plan.batch, &mut rng, &[&z], &mut grads)?;
            calls += plan.batch as u64;
            geom.prox_step_into(&start, &z, &grads[0], plan.eta, &mut z_next);
            std::mem::swap(&mut z, &mut z_next);
            let w = 1.0 / t as f64;
            for (a, zi) in avg.iter_mut().zip(&z) {
                *a += w * (zi - *a);
            }
            if avg.iter().any(|v| !v.is_finite()) {
                return Err(Error::NonFinite { iteration: t });
            }
            observer(&StageEvent {
                stage: plan.stage,
                t,
                x: &avg,
                calls,
                end_of_stage: false,
            });
        }
        y = avg;
        let ybar = sparse_project(&y, s)?;
        observer(&StageEvent {
            stage: plan.stage,
            t: plan.iterations,
            x: &ybar,
            calls,
            end_of_stage: true,
        });
        start.clone_from(&ybar);
        records.push(StageRecord {
            plan: *plan,
            y: y.clone(),
            ybar,
            calls,
        });
    }
    Ok(MultistageOutcome {
        y,
        ybar: start,
        stages: records,
        calls,
    })
}
