//! Stochastic first-order oracles.
//!
//! Algorithms only see the [`StochasticOracle`] trait: draw a batch of `m`
//! fresh observations and return the batch-mean gradient at one or more query
//! points. Evaluating the same batch at several points is what gradient
//! extrapolation needs; the batch is consumed inside a single call so large
//! batches never have to be materialised.

mod calibration;
mod glr;
mod wishart;

use std::sync::atomic::{AtomicU64, Ordering};

pub use calibration::{
    estimate_constants, estimate_constants_with, ConstantOverrides, ProbeConfig, ProbeEstimate,
    ProblemConstants,
};
pub use glr::{activation, activation_derivative, activation_primitive, GlrModel, NoiseDist, RegressorDist, SampleBatch};
pub use wishart::WishartOracle;

use crate::error::Result;
use crate::rng::StreamRng;

pub trait StochasticOracle: Sync {
    fn dim(&self) -> usize;

    /// Draws `m` observations from `rng` and writes the batch-mean gradient at
    /// `points[j]` into `out[j]`. All points see the same observations.
    fn batch_gradients(&self, m: usize, rng: &mut StreamRng, points: &[&[f64]], out: &mut [Vec<f64>]) -> Result<()>;
}

impl<O: StochasticOracle + ?Sized> StochasticOracle for &O {
    fn dim(&self) -> usize {
        (**self).dim()
    }

    fn batch_gradients(&self, m: usize, rng: &mut StreamRng, points: &[&[f64]], out: &mut [Vec<f64>]) -> Result<()> {
        (**self).batch_gradients(m, rng, points, out)
    }
}

/// Deterministic oracle returning the exact gradient. Batches are ignored but
/// still counted as `m` calls by the algorithms.
pub struct ExactOracle<F> {
    dim: usize,
    grad: F,
}

impl<F> ExactOracle<F>
where
    F: Fn(&[f64], &mut [f64]) + Sync,
{
    pub fn new(dim: usize, grad: F) -> Self {
        ExactOracle { dim, grad }
    }
}

impl<F> StochasticOracle for ExactOracle<F>
where
    F: Fn(&[f64], &mut [f64]) + Sync,
{
    fn dim(&self) -> usize {
        self.dim
    }

    fn batch_gradients(&self, _m: usize, _rng: &mut StreamRng, points: &[&[f64]], out: &mut [Vec<f64>]) -> Result<()> {
        for (p, o) in points.iter().zip(out.iter_mut()) {
            (self.grad)(p, o);
        }
        Ok(())
    }
}

/// Exact gradient `diag(s)(x − x*)` of the quadratic `½‖x − x*‖²_diag(s)`.
pub fn quadratic_oracle(diag: Vec<f64>, xstar: Vec<f64>) -> ExactOracle<impl Fn(&[f64], &mut [f64]) + Sync> {
    let dim = diag.len();
    ExactOracle::new(dim, move |x: &[f64], out: &mut [f64]| {
        for i in 0..x.len() {
            out[i] = diag[i] * (x[i] - xstar[i]);
        }
    })
}

/// Wraps an oracle and tallies observations drawn, independently of the
/// algorithms' own bookkeeping.
pub struct CountingOracle<O> {
    inner: O,
    observations: AtomicU64,
    requests: AtomicU64,
}

impl<O: StochasticOracle> CountingOracle<O> {
    pub fn new(inner: O) -> Self {
        CountingOracle {
            inner,
            observations: AtomicU64::new(0),
            requests: AtomicU64::new(0),
        }
    }

    /// Total observations drawn.
    pub fn observations(&self) -> u64 {
        self.observations.load(Ordering::Relaxed)
    }

    /// Total (observation, query point) evaluations.
    pub fn evaluations(&self) -> u64 {
        self.requests.load(Ordering::Relaxed)
    }

    pub fn into_inner(self) -> O {
        self.inner
    }
}

impl<O: StochasticOracle> StochasticOracle for CountingOracle<O> {
    fn dim(&self) -> usize {
        self.inner.dim()
    }

    fn batch_gradients(&self, m: usize, rng: &mut StreamRng, points: &[&[f64]], out: &mut [Vec<f64>]) -> Result<()> {
        self.observations.fetch_add(m as u64, Ordering::Relaxed);
        self.requests.fetch_add((m * points.len()) as u64, Ordering::Relaxed);
        self.inner.batch_gradients(m, rng, points, out)
    }
}
