//! Single-stage accelerated loops: SAGD and stochastic gradient extrapolation.
//!
//! Both loops take a [`StochasticOracle`], a [`Geometry`] and a validated
//! schedule. Iteration `t` draws its batch from `streams.iteration(t - 1)`,
//! so a run is a pure function of the seed.

use serde::{Deserialize, Serialize};

use crate::error::{check_dim, Error, Result};
use crate::geometry::Geometry;
use crate::oracle::{ProblemConstants, StochasticOracle};
use crate::rng::RunStreams;

/// Numerical constants of the step-size rules and bounds, kept in one place.
pub mod constants {
    pub const SAGD_ETA_L: f64 = 4.0;
    pub const SAGD_SN_ETA_CALL: f64 = 6.0;
    pub const SAGD_SN_ETA_MIXED: f64 = 9.0;
    pub const SAGD_SN_ETA_SIGMA: f64 = 2.0 / 3.0;
    pub const SAGD_LP_ETA_CALL: f64 = 18.0;
    pub const SAGD_LP_ETA_KBAR: f64 = 12.0;
    pub const SAGD_LP_ETA_SIGMA: f64 = 2.0;

    pub const SAGD_SN_BOUND_L: f64 = 12.0;
    pub const SAGD_SN_BOUND_CALL: f64 = 6.0;
    pub const SAGD_SN_BOUND_MIXED: f64 = 18.0;
    pub const SAGD_SN_BOUND_SIGMA: f64 = 4.0 * std::f64::consts::SQRT_2;
    pub const SAGD_LP_BOUND_L: f64 = 13.0;
    pub const SAGD_LP_BOUND_CALL: f64 = 54.0;
    pub const SAGD_LP_BOUND_KBAR: f64 = 72.0;
    /// `4√6`.
    pub const SAGD_LP_BOUND_SIGMA: f64 = 9.797958971132712;

    pub const SGE_ETA_L: f64 = 24.0;
    pub const SGE_ETA_CALL: f64 = 18.0;
    pub const SGE_ETA_SIGMA: f64 = 2.0;

    pub const SGE_BOUND_L: f64 = 73.0;
    pub const SGE_BOUND_CALL: f64 = 54.0;
    pub const SGE_BOUND_SIGMA: f64 = 6.0 * std::f64::consts::SQRT_2;
}

use constants::*;

/// Which SAGD step-size rule to use: plain state-dependent noise, or the
/// variant that also assumes Lipschitz stochastic gradients.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SagdVariant {
    Sn,
    Lp,
}

fn check_horizon(k: usize, m: usize) -> Result<()> {
    if k == 0 {
        return Err(Error::invalid("k", "horizon must be at least 1"));
    }
    if m == 0 {
        return Err(Error::invalid("m", "batch size must be at least 1"));
    }
    Ok(())
}

fn check_radius(c: &ProblemConstants) -> Result<()> {
    if !(c.radius > 0.0) || !c.radius.is_finite() {
        return Err(Error::invalid("radius", format!("D must be positive, got {}", c.radius)));
    }
    Ok(())
}

fn check_eta(eta: f64) -> Result<()> {
    if !(eta > 0.0) || !eta.is_finite() {
        return Err(Error::invalid("eta", format!("must be positive and finite, got {eta}")));
    }
    Ok(())
}

/// Base step size `η` for SAGD.
pub fn sagd_eta(c: &ProblemConstants, k: usize, m: usize, variant: SagdVariant) -> Result<f64> {
    check_horizon(k, m)?;
    if k < 2 {
        return Err(Error::invalid("k", "SAGD step rules need k >= 2"));
    }
    check_radius(c)?;
    let (kf, mf) = (k as f64, m as f64);
    let eta = match variant {
        SagdVariant::Sn => [
            SAGD_ETA_L * c.smoothness,
            SAGD_SN_ETA_CALL * (kf - 1.0) * c.variance_slope / mf,
            (SAGD_SN_ETA_MIXED * (kf + 1.0).powi(2) * c.smoothness * c.variance_slope / mf).sqrt(),
            c.sigma_star / c.radius * (SAGD_SN_ETA_SIGMA * (kf + 2.0).powi(3) / mf).sqrt(),
        ],
        SagdVariant::Lp => {
            let kbar = c
                .kbar
                .ok_or_else(|| Error::invalid("kbar", "the lp variant needs K-bar"))?;
            [
                SAGD_ETA_L * c.smoothness,
                SAGD_LP_ETA_CALL * (kf + 1.0) * c.variance_slope / mf,
                SAGD_LP_ETA_KBAR * (kf * kbar * kbar / mf).sqrt(),
                c.sigma_star / c.radius * (SAGD_LP_ETA_SIGMA * (kf + 2.0).powi(3) / mf).sqrt(),
            ]
        }
    };
    Ok(eta.into_iter().fold(0.0, f64::max))
}

/// Right-hand side of the SAGD expectation bound on `f(x_k) − f*`.
pub fn sagd_bound(c: &ProblemConstants, k: usize, m: usize, variant: SagdVariant) -> Result<f64> {
    check_horizon(k, m)?;
    let (kf, mf) = (k as f64, m as f64);
    let d2 = c.radius * c.radius;
    Ok(match variant {
        SagdVariant::Sn => {
            SAGD_SN_BOUND_L * c.smoothness * d2 / ((kf + 1.0) * (kf + 2.0))
                + SAGD_SN_BOUND_CALL * c.variance_slope * d2 / ((kf + 2.0) * mf)
                + SAGD_SN_BOUND_MIXED * d2 * (c.smoothness * c.variance_slope).sqrt() / ((kf + 1.0) * mf.sqrt())
                + SAGD_SN_BOUND_SIGMA * c.sigma_star * c.radius / ((kf + 1.0) * mf).sqrt()
        }
        SagdVariant::Lp => {
            let kbar = c
                .kbar
                .ok_or_else(|| Error::invalid("kbar", "the lp variant needs K-bar"))?;
            SAGD_LP_BOUND_L * c.smoothness * d2 / ((kf + 1.0) * (kf + 2.0))
                + SAGD_LP_BOUND_CALL * c.variance_slope * d2 / ((kf + 2.0) * mf)
                + SAGD_LP_BOUND_KBAR * kbar * d2 / ((kf + 2.0) * ((kf + 1.0) * mf).sqrt())
                + SAGD_LP_BOUND_SIGMA * c.sigma_star * c.radius / ((kf + 1.0) * mf).sqrt()
        }
    })
}

/// Base step size `η` for SGE.
pub fn sge_eta(c: &ProblemConstants, k: usize, m: usize) -> Result<f64> {
    check_horizon(k, m)?;
    check_radius(c)?;
    let (kf, mf) = (k as f64, m as f64);
    let terms = [
        SGE_ETA_L * c.smoothness,
        SGE_ETA_CALL * (kf + 2.0) * c.variance_slope / mf,
        c.sigma_star / c.radius * (SGE_ETA_SIGMA * (kf + 1.0).powi(3) / mf).sqrt(),
    ];
    Ok(terms.into_iter().fold(0.0, f64::max))
}

/// Right-hand side of the SGE expectation bound on `f(x_k) − f*`.
pub fn sge_bound(c: &ProblemConstants, k: usize, m: usize) -> Result<f64> {
    check_horizon(k, m)?;
    let (kf, mf) = (k as f64, m as f64);
    let d2 = c.radius * c.radius;
    Ok(SGE_BOUND_L * c.smoothness * d2 / (kf * (kf + 2.0))
        + SGE_BOUND_CALL * c.variance_slope * d2 / (mf * kf)
        + SGE_BOUND_SIGMA * c.sigma_star * c.radius / (mf * kf).sqrt())
}

/// Batch size `max{1, ⌈𝓛k/L⌉, ⌈k³σ*²/(D²L²)⌉}` that keeps SGE at the
/// deterministic iteration complexity.
pub fn sge_batch(c: &ProblemConstants, k: usize) -> Result<usize> {
    if k == 0 {
        return Err(Error::invalid("k", "horizon must be at least 1"));
    }
    check_radius(c)?;
    if !(c.smoothness > 0.0) {
        return Err(Error::invalid("smoothness", "L must be positive"));
    }
    let kf = k as f64;
    let a = (c.variance_slope * kf / c.smoothness).ceil();
    let b = (kf.powi(3) * c.sigma_star.powi(2) / (c.radius * c.smoothness).powi(2)).ceil();
    Ok(ceil_to_usize(a.max(b).max(1.0)))
}

/// Batch size `max{1, ⌈k²𝓛/L⌉, ⌈k³σ*²/(D²L²)⌉}` for SAGD.
pub fn sagd_batch(c: &ProblemConstants, k: usize) -> Result<usize> {
    if k == 0 {
        return Err(Error::invalid("k", "horizon must be at least 1"));
    }
    check_radius(c)?;
    if !(c.smoothness > 0.0) {
        return Err(Error::invalid("smoothness", "L must be positive"));
    }
    let kf = k as f64;
    let a = (kf * kf * c.variance_slope / c.smoothness).ceil();
    let b = (kf.powi(3) * c.sigma_star.powi(2) / (c.radius * c.smoothness).powi(2)).ceil();
    Ok(ceil_to_usize(a.max(b).max(1.0)))
}

pub(crate) fn ceil_to_usize(v: f64) -> usize {
    if v >= usize::MAX as f64 {
        usize::MAX
    } else {
        v.ceil() as usize
    }
}

/// `θ_t = (t+1)(t+2)`, `β_t = 3/(t+2)`, `η_t = η/(t+1)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SagdSchedule {
    k: usize,
    m: usize,
    eta: f64,
}

impl SagdSchedule {
    pub fn new(k: usize, m: usize, eta: f64) -> Result<Self> {
        check_horizon(k, m)?;
        check_eta(eta)?;
        Ok(SagdSchedule { k, m, eta })
    }

    pub fn from_constants(c: &ProblemConstants, k: usize, m: usize, variant: SagdVariant) -> Result<Self> {
        Self::new(k, m, sagd_eta(c, k, m, variant)?)
    }

    pub fn horizon(&self) -> usize {
        self.k
    }

    pub fn batch(&self) -> usize {
        self.m
    }

    pub fn eta(&self) -> f64 {
        self.eta
    }

    pub fn theta(&self, t: usize) -> f64 {
        ((t + 1) * (t + 2)) as f64
    }

    pub fn beta(&self, t: usize) -> f64 {
        3.0 / (t as f64 + 2.0)
    }

    pub fn eta_t(&self, t: usize) -> f64 {
        self.eta / (t as f64 + 1.0)
    }

    /// Whether `η_t > Lβ_t` for every `t ≤ k`.
    pub fn dominates_smoothness(&self, smoothness: f64) -> bool {
        (1..=self.k).all(|t| self.eta_t(t) > smoothness * self.beta(t))
    }
}

/// `θ_t = t`, `α_t = (t−1)/t`, `β_t = 3/(t+2)`, `η_t = η/t`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SgeSchedule {
    k: usize,
    m: usize,
    eta: f64,
}

impl SgeSchedule {
    /// Builds the schedule and checks `θ_{t−1} = α_tθ_t` and `η_t ≤ α_tη_{t−1}`
    /// for `2 ≤ t ≤ k`.
    pub fn new(k: usize, m: usize, eta: f64) -> Result<Self> {
        check_horizon(k, m)?;
        check_eta(eta)?;
        let s = SgeSchedule { k, m, eta };
        for t in 2..=k {
            let lhs = s.theta(t - 1);
            let rhs = s.alpha(t) * s.theta(t);
            if (lhs - rhs).abs() > 1e-12 * lhs {
                return Err(Error::invalid("schedule", format!("theta identity fails at t = {t}")));
            }
            if s.eta_t(t) > s.alpha(t) * s.eta_t(t - 1) * (1.0 + 1e-12) {
                return Err(Error::invalid("schedule", format!("eta monotonicity fails at t = {t}")));
            }
        }
        Ok(s)
    }

    pub fn from_constants(c: &ProblemConstants, k: usize, m: usize) -> Result<Self> {
        Self::new(k, m, sge_eta(c, k, m)?)
    }

    pub fn horizon(&self) -> usize {
        self.k
    }

    pub fn batch(&self) -> usize {
        self.m
    }

    pub fn eta(&self) -> f64 {
        self.eta
    }

    pub fn theta(&self, t: usize) -> f64 {
        t as f64
    }

    pub fn alpha(&self, t: usize) -> f64 {
        (t as f64 - 1.0) / t as f64
    }

    pub fn beta(&self, t: usize) -> f64 {
        3.0 / (t as f64 + 2.0)
    }

    pub fn eta_t(&self, t: usize) -> f64 {
        self.eta / t as f64
    }
}

/// How oracle calls are tallied.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OracleAccounting {
    /// One drawn observation is one call, however many points it is evaluated at.
    #[default]
    Observations,
    /// Every (observation, distinct query point) pair is a call.
    Evaluations,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct RunOptions {
    /// Keep a snapshot every this many iterations (and at `t = 0` and `t = k`);
    /// 0 keeps none.
    pub snapshot_every: usize,
    pub accounting: OracleAccounting,
}

/// State passed to the observer after each iteration.
#[derive(Clone, Copy, Debug)]
pub struct Progress<'a> {
    pub t: usize,
    pub x: &'a [f64],
    pub z: &'a [f64],
    pub calls: u64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Snapshot {
    pub t: usize,
    pub x: Vec<f64>,
    pub z: Vec<f64>,
    pub calls: u64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Trajectory {
    pub snapshots: Vec<Snapshot>,
    pub x: Vec<f64>,
    pub z: Vec<f64>,
    pub calls: u64,
}

struct Recorder<'o, 'f> {
    opts: RunOptions,
    k: usize,
    snapshots: Vec<Snapshot>,
    observer: &'o mut (dyn FnMut(&Progress) + 'f),
}

impl Recorder<'_, '_> {
    fn record(&mut self, t: usize, x: &[f64], z: &[f64], calls: u64) -> Result<()> {
        if x.iter().chain(z).any(|v| !v.is_finite()) {
            return Err(Error::NonFinite { iteration: t });
        }
        let every = self.opts.snapshot_every;
        if every > 0 && (t % every == 0 || t == self.k) {
            self.snapshots.push(Snapshot {
                t,
                x: x.to_vec(),
                z: z.to_vec(),
                calls,
            });
        }
        if t > 0 {
            (self.observer)(&Progress { t, x, z, calls });
        }
        Ok(())
    }
}

fn check_setup<O: StochasticOracle + ?Sized>(oracle: &O, geom: &Geometry, x0: &[f64]) -> Result<()> {
    check_dim(geom.dim(), x0.len())?;
    check_dim(geom.dim(), oracle.dim())?;
    if x0.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite { iteration: 0 });
    }
    Ok(())
}

/// Runs SAGD for `sched.horizon()` iterations from `z_0 = x_0 = x0`.
pub fn sagd_run<O: StochasticOracle + ?Sized>(
    oracle: &O,
    geom: &Geometry,
    x0: &[f64],
    sched: &SagdSchedule,
    streams: &RunStreams,
    opts: &RunOptions,
    observer: &mut dyn FnMut(&Progress),
) -> Result<Trajectory> {
    check_setup(oracle, geom, x0)?;
    let n = x0.len();
    let m = sched.batch();
    let mut rec = Recorder {
        opts: *opts,
        k: sched.horizon(),
        snapshots: Vec::new(),
        observer,
    };
    let mut x = x0.to_vec();
    let mut z = x0.to_vec();
    let mut y = vec![0.0; n];
    let mut z_next = vec![0.0; n];
    let mut grads = vec![vec![0.0; n]];
    let mut calls = 0u64;
    rec.record(0, &x, &z, calls)?;

    for t in 1..=sched.horizon() {
        let beta = sched.beta(t);
        for i in 0..n {
            y[i] = (1.0 - beta) * x[i] + beta * z[i];
        }
        let mut rng = streams.iteration(t - 1);
        oracle.batch_gradients(m, &mut rng, &[&y], &mut grads)?;
        calls += m as u64;
        geom.prox_step_into(x0, &z, &grads[0], sched.eta_t(t), &mut z_next);
        std::mem::swap(&mut z, &mut z_next);
        for i in 0..n {
            x[i] = (1.0 - beta) * x[i] + beta * z[i];
        }
        rec.record(t, &x, &z, calls)?;
    }
    Ok(Trajectory {
        snapshots: rec.snapshots,
        x,
        z,
        calls,
    })
}

/// Runs SGE for `sched.horizon()` iterations from `z_0 = x_0 = x_{−1} = x0`.
///
/// Iteration `t` draws one batch and evaluates it at both `x_{t−1}` and
/// `x_{t−2}`; the extrapolated gradient drives a prox step centred at `x0`.
pub fn sge_run<O: StochasticOracle + ?Sized>(
    oracle: &O,
    geom: &Geometry,
    x0: &[f64],
    sched: &SgeSchedule,
    streams: &RunStreams,
    opts: &RunOptions,
    observer: &mut dyn FnMut(&Progress),
) -> Result<Trajectory> {
    check_setup(oracle, geom, x0)?;
    let n = x0.len();
    let m = sched.batch();
    let mut rec = Recorder {
        opts: *opts,
        k: sched.horizon(),
        snapshots: Vec::new(),
        observer,
    };
    let mut x_prev = x0.to_vec();
    let mut x_prev2 = x0.to_vec();
    let mut z = x0.to_vec();
    let mut z_next = vec![0.0; n];
    let mut extrapolated = vec![0.0; n];
    let mut grads = vec![vec![0.0; n], vec![0.0; n]];
    let mut calls = 0u64;
    rec.record(0, &x_prev, &z, calls)?;

    for t in 1..=sched.horizon() {
        let mut rng = streams.iteration(t - 1);
        if t == 1 {
            oracle.batch_gradients(m, &mut rng, &[&x_prev], &mut grads[..1])?;
            extrapolated.copy_from_slice(&grads[0]);
            calls += m as u64;
        } else {
            oracle.batch_gradients(m, &mut rng, &[&x_prev, &x_prev2], &mut grads)?;
            let alpha = sched.alpha(t);
            for i in 0..n {
                extrapolated[i] = grads[0][i] + alpha * (grads[0][i] - grads[1][i]);
            }
            calls += match opts.accounting {
                OracleAccounting::Observations => m as u64,
                OracleAccounting::Evaluations => 2 * m as u64,
            };
        }
        geom.prox_step_into(x0, &z, &extrapolated, sched.eta_t(t), &mut z_next);
        std::mem::swap(&mut z, &mut z_next);
        let beta = sched.beta(t);
        std::mem::swap(&mut x_prev2, &mut x_prev);
        for i in 0..n {
            x_prev[i] = (1.0 - beta) * x_prev2[i] + beta * z[i];
        }
        rec.record(t, &x_prev, &z, calls)?;
    }
    Ok(Trajectory {
        snapshots: rec.snapshots,
        x: x_prev,
        z,
        calls,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::oracle::{quadratic_oracle, CountingOracle, GlrModel};

    fn noop() -> impl FnMut(&Progress) {
        |_: &Progress| {}
    }

    fn unit() -> ProblemConstants {
        ProblemConstants {
            smoothness: 1.0,
            variance_slope: 1.0,
            sigma_star: 0.0,
            growth: 1.0,
            growth_l2: 1.0,
            radius: 1.0,
            kbar: None,
        }
    }

    #[test]
    fn sagd_eta_examples() {
        assert_eq!(sagd_eta(&unit(), 10, 1, SagdVariant::Sn).unwrap(), 54.0);
        let mut quiet = unit();
        quiet.variance_slope = 0.0;
        quiet.kbar = Some(0.0);
        assert_eq!(sagd_eta(&quiet, 10, 1, SagdVariant::Sn).unwrap(), 4.0);
        assert_eq!(sagd_eta(&quiet, 10, 1, SagdVariant::Lp).unwrap(), 4.0);
        assert!(sagd_eta(&unit(), 10, 1, SagdVariant::Lp).is_err());
        let big = sagd_eta(&unit(), 10, 1 << 40, SagdVariant::Sn).unwrap();
        assert_eq!(big, 4.0);
        let mut flat = unit();
        flat.radius = 0.0;
        assert!(sagd_eta(&flat, 10, 1, SagdVariant::Sn).is_err());
    }

    #[test]
    fn sge_eta_examples() {
        let mut c = unit();
        c.sigma_star = 1.0;
        assert_eq!(sge_eta(&c, 10, 1).unwrap(), 216.0);
        c.variance_slope = 0.0;
        c.sigma_star = 0.0;
        assert_eq!(sge_eta(&c, 10, 1).unwrap(), 24.0);
        let mut noisy = unit();
        noisy.sigma_star = 3.0;
        let mut prev = f64::INFINITY;
        for m in [1, 2, 4, 8, 16, 1024] {
            let e = sge_eta(&noisy, 50, m).unwrap();
            assert!(e <= prev);
            prev = e;
        }
    }

    #[test]
    fn schedule_identities() {
        let s = SgeSchedule::new(200, 1, 24.0).unwrap();
        assert_eq!(s.alpha(1), 0.0);
        assert_eq!(s.beta(1), 1.0);
        let a = SagdSchedule::new(200, 1, 4.0).unwrap();
        assert_eq!(a.beta(1), 1.0);
        let c0 = a.theta(1) * a.beta(1) * a.eta_t(1);
        for t in 2..=200 {
            let ct = a.theta(t) * a.beta(t) * a.eta_t(t);
            assert!((ct - c0).abs() <= 1e-12 * c0);
        }
        assert!(a.dominates_smoothness(1.0));
        assert!(SgeSchedule::new(0, 1, 1.0).is_err());
        assert!(SgeSchedule::new(3, 1, -1.0).is_err());
    }

    #[test]
    fn sge_two_steps_by_hand() {
        let oracle = quadratic_oracle(vec![1.0], vec![0.0]);
        let geom = Geometry::euclidean(1).unwrap();
        let sched = SgeSchedule::new(2, 1, 24.0).unwrap();
        let opts = RunOptions { snapshot_every: 1, ..RunOptions::default() };
        let tr = sge_run(&oracle, &geom, &[1.0], &sched, &RunStreams::from_seed(0), &opts, &mut noop()).unwrap();
        let x1 = 23.0 / 24.0;
        let z2 = 507.0 / 576.0;
        let x2 = 0.25 * x1 + 0.75 * z2;
        assert!((tr.snapshots[1].x[0] - x1).abs() < 1e-15);
        assert!((tr.snapshots[1].z[0] - x1).abs() < 1e-15);
        assert!((tr.z[0] - z2).abs() < 1e-15);
        assert!((tr.x[0] - x2).abs() < 1e-15);
        assert_eq!(tr.calls, 2);
    }

    #[test]
    fn sagd_first_step_by_hand() {
        // β₁ = 1: y₁ = x0, z₁ = x0 − g(x0)/(η/2), x₁ = z₁.
        let oracle = quadratic_oracle(vec![1.0, 4.0], vec![0.0, 0.0]);
        let geom = Geometry::euclidean(2).unwrap();
        let sched = SagdSchedule::new(1, 1, 16.0).unwrap();
        let tr = sagd_run(&oracle, &geom, &[1.0, 1.0], &sched, &RunStreams::from_seed(0), &RunOptions::default(), &mut noop()).unwrap();
        assert_eq!(tr.x, vec![1.0 - 1.0 / 8.0, 1.0 - 4.0 / 8.0]);
        assert_eq!(tr.x, tr.z);
    }

    #[test]
    fn fixed_point_at_truth() {
        let xstar = vec![0.5, -1.0, 2.0];
        let model = GlrModel::linear_gaussian(xstar.clone(), vec![1.0, 2.0, 3.0], 0.0).unwrap();
        let geom = Geometry::lp(3).unwrap();
        let streams = RunStreams::from_seed(9);
        let s = SgeSchedule::new(20, 4, 24.0 * 3.0).unwrap();
        let tr = sge_run(&model, &geom, &xstar, &s, &streams, &RunOptions::default(), &mut noop()).unwrap();
        assert_eq!(tr.x, xstar);
        let a = SagdSchedule::new(20, 4, 12.0).unwrap();
        let tr = sagd_run(&model, &geom, &xstar, &a, &streams, &RunOptions::default(), &mut noop()).unwrap();
        assert_eq!(tr.x, xstar);
    }

    #[test]
    fn iterates_are_convex_combinations() {
        let model = GlrModel::linear_gaussian(vec![1.0, 0.0, -1.0, 0.5], vec![1.0, 2.0, 3.0, 4.0], 0.1).unwrap();
        let geom = Geometry::lp(4).unwrap();
        let s = SgeSchedule::new(30, 8, 200.0).unwrap();
        let mut prev = vec![0.0; 4];
        let mut worst: f64 = 0.0;
        let mut obs = |p: &Progress| {
            let b = s.beta(p.t);
            for i in 0..4 {
                let expect = (1.0 - b) * prev[i] + b * p.z[i];
                worst = worst.max((expect - p.x[i]).abs());
            }
            prev.copy_from_slice(p.x);
        };
        sge_run(&model, &geom, &[0.0; 4], &s, &RunStreams::from_seed(3), &RunOptions::default(), &mut obs).unwrap();
        assert!(worst < 1e-12);
    }

    #[test]
    fn runs_are_deterministic_and_counted() {
        let model = GlrModel::linear_gaussian(vec![1.0; 5], vec![1.0; 5], 0.3).unwrap();
        let counted = CountingOracle::new(&model);
        let geom = Geometry::euclidean(5).unwrap();
        let s = SgeSchedule::new(15, 7, 60.0).unwrap();
        let streams = RunStreams::from_seed(11);
        let a = sge_run(&counted, &geom, &[0.0; 5], &s, &streams, &RunOptions::default(), &mut noop()).unwrap();
        let b = sge_run(&model, &geom, &[0.0; 5], &s, &streams, &RunOptions::default(), &mut noop()).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.calls, counted.observations());
        assert_eq!(a.calls, 15 * 7);
        let double = RunOptions { accounting: OracleAccounting::Evaluations, ..RunOptions::default() };
        let c = sge_run(&model, &geom, &[0.0; 5], &s, &streams, &double, &mut noop()).unwrap();
        assert_eq!(c.calls, 7 + 14 * 14);
        assert_eq!(c.x, a.x);
    }

    #[test]
    fn nonfinite_iterates_abort() {
        let oracle = quadratic_oracle(vec![1e308], vec![0.0]);
        let geom = Geometry::euclidean(1).unwrap();
        let s = SgeSchedule::new(5, 1, 1e-300).unwrap();
        let err = sge_run(&oracle, &geom, &[1e10], &s, &RunStreams::from_seed(0), &RunOptions::default(), &mut noop()).unwrap_err();
        assert!(matches!(err, Error::NonFinite { iteration: 1 }));
    }

    #[test]
    fn batch_rule() {
        let c = ProblemConstants {
            smoothness: 2.0,
            variance_slope: 4.0,
            sigma_star: 1.0,
            growth: 1.0,
            growth_l2: 1.0,
            radius: 0.5,
            kbar: None,
        };
        // max{1, ⌈4·10/2⌉, ⌈1000·1/(0.25·4)⌉} = 1000.
        assert_eq!(sge_batch(&c, 10).unwrap(), 1000);
        let quiet = ProblemConstants::deterministic(2.0, 1.0, 1.0);
        assert_eq!(sge_batch(&quiet, 100).unwrap(), 1);
        // max{1, ⌈100·4/2⌉, 1000} = 1000.
        assert_eq!(sagd_batch(&c, 10).unwrap(), 1000);
        let mut slope_only = c;
        slope_only.sigma_star = 0.0;
        assert_eq!(sagd_batch(&slope_only, 10).unwrap(), 200);
    }
}
