//! Synthetic generalized linear regression.
//!
//! Observations are `η = u_α(φᵀx*) + noise` with diagonal regressor covariance,
//! and the stochastic gradient of the associated risk is
//! `𝒢(x, (φ, η)) = φ(u_α(φᵀx) − η)`.

use rand::Rng;
use rand_distr::{ChiSquared, Distribution, StandardNormal, StudentT};
use serde::{Deserialize, Serialize};

use super::StochasticOracle;
use crate::error::{check_dim, Error, Result};
use crate::rng::StreamRng;

/// Rows drawn per chunk when a batch is streamed through the oracle.
const CHUNK_ROWS: usize = 1024;

/// `u_α(t) = t` on `|t| ≤ 1` and `sign(t)·[α⁻¹(|t|^α − 1) + 1]` beyond.
pub fn activation(alpha: f64, t: f64) -> Result<f64> {
    check_alpha(alpha)?;
    Ok(act(alpha, t))
}

pub fn activation_derivative(alpha: f64, t: f64) -> Result<f64> {
    check_alpha(alpha)?;
    Ok(act_deriv(alpha, t))
}

/// Primitive `v` of `u_α` with `v(0) = 0`.
pub fn activation_primitive(alpha: f64, t: f64) -> Result<f64> {
    check_alpha(alpha)?;
    Ok(act_primitive(alpha, t))
}

fn check_alpha(alpha: f64) -> Result<()> {
    if alpha > 0.0 && alpha <= 1.0 {
        Ok(())
    } else {
        Err(Error::invalid("alpha", format!("must lie in (0, 1], got {alpha}")))
    }
}

#[inline]
fn act(alpha: f64, t: f64) -> f64 {
    let a = t.abs();
    if a <= 1.0 || alpha == 1.0 {
        t
    } else {
        t.signum() * ((a.powf(alpha) - 1.0) / alpha + 1.0)
    }
}

#[inline]
fn act_deriv(alpha: f64, t: f64) -> f64 {
    let a = t.abs();
    if a <= 1.0 || alpha == 1.0 {
        1.0
    } else {
        a.powf(alpha - 1.0)
    }
}

fn act_primitive(alpha: f64, t: f64) -> f64 {
    let a = t.abs();
    if a <= 1.0 || alpha == 1.0 {
        0.5 * t * t
    } else {
        let tail = ((a.powf(alpha + 1.0) - 1.0) / (alpha + 1.0) - (a - 1.0)) / alpha;
        0.5 + (a - 1.0) + tail
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum RegressorDist {
    Gaussian,
    /// Multivariate Student: a Gaussian draw divided by `√(w/ν)`, `w ~ χ²(ν)`.
    Student { nu: u32 },
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum NoiseDist {
    Gaussian { sigma: f64 },
    /// `σ·λ·t(ν)` with `λ = √((ν−2)/ν)`, so the variance is `σ²`.
    Student { nu: u32, sigma: f64 },
}

impl NoiseDist {
    pub fn sigma(&self) -> f64 {
        match *self {
            NoiseDist::Gaussian { sigma } | NoiseDist::Student { sigma, .. } => sigma,
        }
    }
}

/// Student scale making `λ·t(ν)` unit-variance.
pub fn student_scale(nu: u32) -> f64 {
    let nu = f64::from(nu);
    ((nu - 2.0) / nu).sqrt()
}

#[derive(Clone, Debug)]
pub struct GlrModel {
    xstar: Vec<f64>,
    sigma_diag: Vec<f64>,
    sd: Vec<f64>,
    support: Vec<usize>,
    regressors: RegressorDist,
    noise: NoiseDist,
    alpha: f64,
    chi: Option<ChiSquared<f64>>,
    student: Option<StudentT<f64>>,
}

impl GlrModel {
    pub fn new(xstar: Vec<f64>, sigma_diag: Vec<f64>, regressors: RegressorDist, noise: NoiseDist, alpha: f64) -> Result<Self> {
        check_dim(xstar.len(), sigma_diag.len())?;
        if xstar.is_empty() {
            return Err(Error::invalid("xstar", "must be non-empty"));
        }
        if let Some(bad) = sigma_diag.iter().find(|v| !(**v > 0.0) || !v.is_finite()) {
            return Err(Error::invalid("sigma_diag", format!("entries must be positive, got {bad}")));
        }
        if xstar.iter().any(|v| !v.is_finite()) {
            return Err(Error::invalid("xstar", "entries must be finite"));
        }
        check_alpha(alpha)?;
        let chi = match regressors {
            RegressorDist::Gaussian => None,
            RegressorDist::Student { nu } => Some(chi_squared(nu)?),
        };
        let student = match noise {
            NoiseDist::Gaussian { sigma } => {
                check_sigma(sigma)?;
                None
            }
            NoiseDist::Student { nu, sigma } => {
                check_sigma(sigma)?;
                check_nu(nu)?;
                Some(StudentT::new(f64::from(nu)).map_err(|e| Error::invalid("nu", e.to_string()))?)
            }
        };
        let sd = sigma_diag.iter().map(|v| v.sqrt()).collect();
        let support = xstar.iter().enumerate().filter(|(_, v)| **v != 0.0).map(|(i, _)| i).collect();
        Ok(GlrModel {
            xstar,
            sigma_diag,
            sd,
            support,
            regressors,
            noise,
            alpha,
            chi,
            student,
        })
    }

    /// Linear activation, Gaussian regressors and Gaussian noise.
    pub fn linear_gaussian(xstar: Vec<f64>, sigma_diag: Vec<f64>, sigma: f64) -> Result<Self> {
        Self::new(xstar, sigma_diag, RegressorDist::Gaussian, NoiseDist::Gaussian { sigma }, 1.0)
    }

    pub fn dim(&self) -> usize {
        self.xstar.len()
    }

    pub fn xstar(&self) -> &[f64] {
        &self.xstar
    }

    pub fn sigma_diag(&self) -> &[f64] {
        &self.sigma_diag
    }

    pub fn regressors(&self) -> RegressorDist {
        self.regressors
    }

    pub fn noise(&self) -> NoiseDist {
        self.noise
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    /// `max/min` of the covariance diagonal.
    pub fn condition_number(&self) -> f64 {
        let max = self.sigma_diag.iter().cloned().fold(f64::MIN, f64::max);
        let min = self.sigma_diag.iter().cloned().fold(f64::MAX, f64::min);
        max / min
    }

    pub fn is_linear(&self) -> bool {
        self.alpha == 1.0
    }

    pub fn is_linear_gaussian(&self) -> bool {
        self.is_linear() && self.regressors == RegressorDist::Gaussian
    }

    /// Diagonal of `E[φφᵀ]`: `Σ` for Gaussian, `Σ·ν/(ν−2)` for Student.
    pub fn second_moment_diag(&self) -> Vec<f64> {
        let factor = match self.regressors {
            RegressorDist::Gaussian => 1.0,
            RegressorDist::Student { nu } => {
                let nu = f64::from(nu);
                nu / (nu - 2.0)
            }
        };
        self.sigma_diag.iter().map(|s| s * factor).collect()
    }

    #[inline]
    pub(crate) fn u(&self, t: f64) -> f64 {
        act(self.alpha, t)
    }

    #[inline]
    pub(crate) fn u_prime(&self, t: f64) -> f64 {
        act_deriv(self.alpha, t)
    }

    #[inline]
    pub(crate) fn v(&self, t: f64) -> f64 {
        act_primitive(self.alpha, t)
    }

    /// Fills `row` with a regressor draw and returns its response.
    pub(crate) fn sample_row<R: Rng + ?Sized>(&self, rng: &mut R, row: &mut [f64]) -> f64 {
        for (r, s) in row.iter_mut().zip(&self.sd) {
            let z: f64 = rng.sample(StandardNormal);
            *r = s * z;
        }
        if let Some(chi) = &self.chi {
            let nu = f64::from(match self.regressors {
                RegressorDist::Student { nu } => nu,
                RegressorDist::Gaussian => unreachable!(),
            });
            let w = chi.sample(rng);
            let scale = (nu / w).sqrt();
            row.iter_mut().for_each(|r| *r *= scale);
        }
        let signal: f64 = self.support.iter().map(|&j| row[j] * self.xstar[j]).sum();
        self.u(signal) + self.sample_noise(rng)
    }

    fn sample_noise<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        match (self.noise, &self.student) {
            (NoiseDist::Gaussian { sigma }, _) => {
                let z: f64 = rng.sample(StandardNormal);
                sigma * z
            }
            (NoiseDist::Student { nu, sigma }, Some(t)) => sigma * student_scale(nu) * t.sample(rng),
            (NoiseDist::Student { .. }, None) => unreachable!(),
        }
    }

    /// `m` i.i.d. observations; deterministic given the generator state.
    pub fn draw_batch<R: Rng + ?Sized>(&self, m: usize, rng: &mut R) -> Result<SampleBatch> {
        if m == 0 {
            return Err(Error::invalid("m", "batch size must be at least 1"));
        }
        let n = self.dim();
        let mut regressors = vec![0.0; m * n];
        let mut responses = Vec::with_capacity(m);
        for row in regressors.chunks_exact_mut(n) {
            responses.push(self.sample_row(rng, row));
        }
        Ok(SampleBatch { dim: n, regressors, responses })
    }

    /// `(1/m) Σ_i φ_i (u_α(φ_iᵀx) − η_i)`, accumulated in row order.
    pub fn stoch_grad(&self, batch: &SampleBatch, x: &[f64]) -> Result<Vec<f64>> {
        check_dim(self.dim(), x.len())?;
        check_dim(self.dim(), batch.dim)?;
        let mut acc = vec![0.0; self.dim()];
        for (row, &eta) in batch.rows().zip(&batch.responses) {
            self.accumulate(row, eta, x, &mut acc);
        }
        let m = batch.len() as f64;
        acc.iter_mut().for_each(|a| *a /= m);
        Ok(acc)
    }

    /// Gradient of a single observation.
    pub fn sample_gradient(&self, phi: &[f64], eta: f64, x: &[f64]) -> Result<Vec<f64>> {
        check_dim(self.dim(), phi.len())?;
        check_dim(self.dim(), x.len())?;
        let mut out = vec![0.0; self.dim()];
        self.accumulate(phi, eta, x, &mut out);
        Ok(out)
    }

    #[inline]
    fn accumulate(&self, phi: &[f64], eta: f64, x: &[f64], acc: &mut [f64]) {
        let dot: f64 = phi.iter().zip(x).map(|(a, b)| a * b).sum();
        let r = self.u(dot) - eta;
        for (a, p) in acc.iter_mut().zip(phi) {
            *a += r * p;
        }
    }

    fn require_linear_gaussian(&self, what: &'static str) -> Result<()> {
        if self.is_linear_gaussian() {
            Ok(())
        } else {
            Err(Error::UnsupportedModel {
                what,
                reason: format!("needs alpha = 1 and gaussian regressors (alpha = {}, regressors = {:?})", self.alpha, self.regressors),
            })
        }
    }

    /// `g(x) = Σ(x − x*)` for the linear Gaussian model.
    pub fn true_grad_linear_gaussian(&self, x: &[f64]) -> Result<Vec<f64>> {
        self.require_linear_gaussian("true_grad_linear_gaussian")?;
        check_dim(self.dim(), x.len())?;
        Ok(self.linear_grad(&self.sigma_diag, x))
    }

    /// `f(x) − f* = ½‖x − x*‖²_Σ` for the linear Gaussian model.
    pub fn fgap_linear_gaussian(&self, x: &[f64]) -> Result<f64> {
        self.require_linear_gaussian("fgap_linear_gaussian")?;
        check_dim(self.dim(), x.len())?;
        Ok(self.linear_fgap(&self.sigma_diag, x))
    }

    /// Exact gradient whenever the activation is linear (any regressor law).
    pub fn analytic_grad(&self, x: &[f64]) -> Option<Vec<f64>> {
        (self.is_linear() && x.len() == self.dim()).then(|| self.linear_grad(&self.second_moment_diag(), x))
    }

    /// Exact suboptimality gap whenever the activation is linear.
    pub fn analytic_fgap(&self, x: &[f64]) -> Option<f64> {
        (self.is_linear() && x.len() == self.dim()).then(|| self.linear_fgap(&self.second_moment_diag(), x))
    }

    fn linear_grad(&self, diag: &[f64], x: &[f64]) -> Vec<f64> {
        diag.iter().zip(x.iter().zip(&self.xstar)).map(|(s, (xi, ti))| s * (xi - ti)).collect()
    }

    fn linear_fgap(&self, diag: &[f64], x: &[f64]) -> f64 {
        0.5 * diag.iter().zip(x.iter().zip(&self.xstar)).map(|(s, (xi, ti))| s * (xi - ti) * (xi - ti)).sum::<f64>()
    }
}

fn chi_squared(nu: u32) -> Result<ChiSquared<f64>> {
    check_nu(nu)?;
    ChiSquared::new(f64::from(nu)).map_err(|e| Error::invalid("nu", e.to_string()))
}

fn check_nu(nu: u32) -> Result<()> {
    if nu >= 3 {
        Ok(())
    } else {
        Err(Error::invalid("nu", format!("degrees of freedom must be >= 3, got {nu}")))
    }
}

fn check_sigma(sigma: f64) -> Result<()> {
    if sigma >= 0.0 && sigma.is_finite() {
        Ok(())
    } else {
        Err(Error::invalid("sigma", format!("must be non-negative, got {sigma}")))
    }
}

impl StochasticOracle for GlrModel {
    fn dim(&self) -> usize {
        self.xstar.len()
    }

    fn batch_gradients(&self, m: usize, rng: &mut StreamRng, points: &[&[f64]], out: &mut [Vec<f64>]) -> Result<()> {
        if m == 0 {
            return Err(Error::invalid("m", "batch size must be at least 1"));
        }
        let n = self.dim();
        for p in points {
            check_dim(n, p.len())?;
        }
        for o in out.iter_mut() {
            o.clear();
            o.resize(n, 0.0);
        }
        // Same row order and accumulation order as draw_batch + stoch_grad.
        let mut rows = vec![0.0; CHUNK_ROWS.min(m) * n];
        let mut etas = vec![0.0; CHUNK_ROWS.min(m)];
        let mut done = 0;
        while done < m {
            let take = CHUNK_ROWS.min(m - done);
            for (row, eta) in rows.chunks_exact_mut(n).zip(etas.iter_mut()).take(take) {
                *eta = self.sample_row(rng, row);
            }
            for (p, o) in points.iter().zip(out.iter_mut()) {
                for (row, &eta) in rows.chunks_exact(n).zip(&etas).take(take) {
                    self.accumulate(row, eta, p, o);
                }
            }
            done += take;
        }
        let mf = m as f64;
        for o in out.iter_mut() {
            o.iter_mut().for_each(|a| *a /= mf);
        }
        Ok(())
    }
}

/// A drawn set of observations, replayable at any number of query points.
#[derive(Clone, Debug, PartialEq)]
pub struct SampleBatch {
    dim: usize,
    regressors: Vec<f64>,
    responses: Vec<f64>,
}

impl SampleBatch {
    pub fn from_rows(dim: usize, regressors: Vec<f64>, responses: Vec<f64>) -> Result<Self> {
        if dim == 0 || responses.is_empty() {
            return Err(Error::invalid("batch", "needs a positive dimension and at least one row"));
        }
        check_dim(dim * responses.len(), regressors.len())?;
        Ok(SampleBatch { dim, regressors, responses })
    }

    pub fn len(&self) -> usize {
        self.responses.len()
    }

    pub fn is_empty(&self) -> bool {
        self.responses.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn rows(&self) -> impl Iterator<Item = &[f64]> {
        self.regressors.chunks_exact(self.dim)
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.regressors[i * self.dim..(i + 1) * self.dim]
    }

    pub fn responses(&self) -> &[f64] {
        &self.responses
    }
}
