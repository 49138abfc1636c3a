//! Monte Carlo probes and problem constants for the step-size schedules.

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::glr::GlrModel;
use crate::error::{check_dim, Error, Result};
use crate::geometry::{dot, l2_norm, Geometry, GeometryKind};

/// Constants consumed by the step-size and batch-size formulas.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProblemConstants {
    /// `L`, Lipschitz constant of the gradient in the geometry's norm pair.
    pub smoothness: f64,
    /// `𝓛`, slope of the state-dependent variance bound.
    pub variance_slope: f64,
    /// `σ*`, square root of the variance floor.
    pub sigma_star: f64,
    /// `μ`, quadratic growth modulus in the primal norm.
    pub growth: f64,
    /// `κ̲`, quadratic growth modulus in `‖·‖₂`.
    pub growth_l2: f64,
    /// `D` with `V(x0, x*) ≤ D²`.
    pub radius: f64,
    /// `K̄ = (3E[𝒦(ξ)²] + 3L²)^{1/2}`; only the Lipschitz-gradient SAGD variant needs it.
    pub kbar: Option<f64>,
}

impl ProblemConstants {
    /// Noiseless constants for an exact-gradient problem.
    pub fn deterministic(smoothness: f64, growth: f64, radius: f64) -> Self {
        ProblemConstants {
            smoothness,
            variance_slope: 0.0,
            sigma_star: 0.0,
            growth,
            growth_l2: growth,
            radius,
            kbar: None,
        }
    }

    /// Closed-form constants for the linear Gaussian model in the Euclidean
    /// geometry: the oracle variance at `x` is
    /// `tr Σ·‖d‖²_Σ + ‖Σd‖² + σ² tr Σ ≤ 2(tr Σ + max Σ)(f(x) − f*) + σ² tr Σ`.
    pub fn linear_gaussian_euclidean(model: &GlrModel, x0: &[f64]) -> Result<Self> {
        if !model.is_linear_gaussian() {
            return Err(Error::UnsupportedModel {
                what: "linear_gaussian_euclidean",
                reason: "needs alpha = 1 and gaussian regressors".into(),
            });
        }
        check_dim(model.dim(), x0.len())?;
        let diag = model.sigma_diag();
        let trace: f64 = diag.iter().sum();
        let max = diag.iter().cloned().fold(f64::MIN, f64::max);
        let min = diag.iter().cloned().fold(f64::MAX, f64::min);
        let sigma = model.noise().sigma();
        let d: Vec<f64> = x0.iter().zip(model.xstar()).map(|(a, b)| a - b).collect();
        let sq_sum: f64 = diag.iter().map(|s| s * s).sum();
        Ok(ProblemConstants {
            smoothness: max,
            variance_slope: 2.0 * (trace + max),
            sigma_star: sigma * trace.sqrt(),
            growth: min,
            growth_l2: min,
            radius: (0.5f64).sqrt() * l2_norm(&d),
            kbar: Some((3.0 * (trace * trace + 2.0 * sq_sum) + 3.0 * max * max).sqrt()),
        })
    }

    pub fn validate(&self) -> Result<()> {
        let fields = [
            ("smoothness", self.smoothness),
            ("variance_slope", self.variance_slope),
            ("sigma_star", self.sigma_star),
            ("growth", self.growth),
            ("growth_l2", self.growth_l2),
            ("radius", self.radius),
        ];
        for (name, v) in fields {
            if !(v >= 0.0) || !v.is_finite() {
                return Err(Error::invalid(name, format!("must be finite and non-negative, got {v}")));
            }
        }
        if let Some(k) = self.kbar {
            if !(k >= 0.0) || !k.is_finite() {
                return Err(Error::invalid("kbar", format!("must be finite and non-negative, got {k}")));
            }
        }
        if self.growth > 0.0 && self.smoothness < self.growth {
            return Err(Error::invalid("smoothness", format!("L = {} is below mu = {}", self.smoothness, self.growth)));
        }
        Ok(())
    }

    pub fn with_overrides(mut self, o: &ConstantOverrides) -> Self {
        if let Some(v) = o.smoothness {
            self.smoothness = v;
        }
        if let Some(v) = o.variance_slope {
            self.variance_slope = v;
        }
        if let Some(v) = o.sigma_star {
            self.sigma_star = v;
        }
        if let Some(v) = o.growth {
            self.growth = v;
        }
        if let Some(v) = o.growth_l2 {
            self.growth_l2 = v;
        }
        if let Some(v) = o.radius {
            self.radius = v;
        }
        if o.kbar.is_some() {
            self.kbar = o.kbar;
        }
        self
    }
}

/// User-supplied replacements for individual constants.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConstantOverrides {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub smoothness: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub variance_slope: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sigma_star: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub growth: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub growth_l2: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub radius: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub kbar: Option<f64>,
}

impl ConstantOverrides {
    pub const NAMES: [&'static str; 7] = ["smoothness", "variance_slope", "sigma_star", "growth", "growth_l2", "radius", "kbar"];

    pub fn set(&mut self, name: &str, value: f64) -> Result<()> {
        let slot = match name {
            "smoothness" => &mut self.smoothness,
            "variance_slope" => &mut self.variance_slope,
            "sigma_star" => &mut self.sigma_star,
            "growth" => &mut self.growth,
            "growth_l2" => &mut self.growth_l2,
            "radius" => &mut self.radius,
            "kbar" => &mut self.kbar,
            other => {
                return Err(Error::config(
                    other,
                    format!("unknown constant; expected one of {}", Self::NAMES.join(", ")),
                ))
            }
        };
        if !(value >= 0.0) || !value.is_finite() {
            return Err(Error::config(name, format!("must be finite and non-negative, got {value}")));
        }
        *slot = Some(value);
        Ok(())
    }

    pub fn is_empty(&self) -> bool {
        *self == ConstantOverrides::default()
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ProbeConfig {
    /// Fresh observations per probe point.
    pub samples: usize,
    /// Reference gradients without a closed form use `reference_factor × samples` draws.
    pub reference_factor: usize,
    /// Multiplier applied to the fitted variance slope.
    pub safety: f64,
}

impl Default for ProbeConfig {
    fn default() -> Self {
        ProbeConfig {
            samples: 4000,
            reference_factor: 10,
            safety: 1.5,
        }
    }
}

/// Monte Carlo mean with its standard error.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ProbeEstimate {
    pub mean: f64,
    pub std_err: f64,
}

impl ProbeEstimate {
    fn from_samples(sum: f64, sum_sq: f64, count: usize) -> Self {
        let n = count as f64;
        let mean = sum / n;
        let var = ((sum_sq - n * mean * mean) / (n - 1.0).max(1.0)).max(0.0);
        ProbeEstimate {
            mean,
            std_err: (var / n).sqrt(),
        }
    }
}

impl GlrModel {
    /// Monte Carlo estimate of `E‖𝒢(x, ξ) − g(x)‖*²` in the dual norm of `geom`.
    pub fn variance_probe<R: Rng + ?Sized>(&self, x: &[f64], samples: usize, geom: &Geometry, rng: &mut R) -> Result<ProbeEstimate> {
        self.variance_probe_with(x, samples, ProbeConfig::default().reference_factor, geom, rng)
    }

    pub fn variance_probe_with<R: Rng + ?Sized>(&self, x: &[f64], samples: usize, reference_factor: usize, geom: &Geometry, rng: &mut R) -> Result<ProbeEstimate> {
        if samples < 100 {
            return Err(Error::invalid("samples", format!("variance probe needs at least 100 samples, got {samples}")));
        }
        let n = self.dim();
        check_dim(n, x.len())?;
        check_dim(n, geom.dim())?;
        let reference = match self.analytic_grad(x) {
            Some(g) => g,
            None => self.mc_gradient(x, samples * reference_factor.max(1), rng),
        };
        let mut row = vec![0.0; n];
        let mut diff = vec![0.0; n];
        let (mut sum, mut sum_sq) = (0.0, 0.0);
        for _ in 0..samples {
            let eta = self.sample_row(rng, &mut row);
            let r = self.u(dot(&row, x)) - eta;
            for ((d, p), g) in diff.iter_mut().zip(&row).zip(&reference) {
                *d = r * p - g;
            }
            let v = geom.dual_norm_unchecked(&diff).powi(2);
            sum += v;
            sum_sq += v * v;
        }
        let est = ProbeEstimate::from_samples(sum, sum_sq, samples);
        if !est.mean.is_finite() {
            return Err(Error::Probe(format!("non-finite variance estimate at x = {x:?}")));
        }
        Ok(est)
    }

    fn mc_gradient<R: Rng + ?Sized>(&self, x: &[f64], samples: usize, rng: &mut R) -> Vec<f64> {
        let n = self.dim();
        let mut row = vec![0.0; n];
        let mut acc = vec![0.0; n];
        for _ in 0..samples {
            let eta = self.sample_row(rng, &mut row);
            let r = self.u(dot(&row, x)) - eta;
            for (a, p) in acc.iter_mut().zip(&row) {
                *a += r * p;
            }
        }
        acc.iter_mut().for_each(|a| *a /= samples as f64);
        acc
    }

    /// `f(x) − f*`, exact for linear activations and Monte Carlo otherwise via
    /// `E[v(φᵀx) − v(φᵀx*) − φᵀ(x − x*)·u(φᵀx*)]`.
    pub fn fgap_estimate<R: Rng + ?Sized>(&self, x: &[f64], samples: usize, rng: &mut R) -> Result<ProbeEstimate> {
        check_dim(self.dim(), x.len())?;
        if let Some(gap) = self.analytic_fgap(x) {
            return Ok(ProbeEstimate { mean: gap, std_err: 0.0 });
        }
        if samples < 2 {
            return Err(Error::invalid("samples", "need at least 2 samples"));
        }
        let mut row = vec![0.0; self.dim()];
        let (mut sum, mut sum_sq) = (0.0, 0.0);
        for _ in 0..samples {
            self.sample_row(rng, &mut row);
            let a = dot(&row, x);
            let b = dot(&row, self.xstar());
            let v = self.v(a) - self.v(b) - (a - b) * self.u(b);
            sum += v;
            sum_sq += v * v;
        }
        Ok(ProbeEstimate::from_samples(sum, sum_sq, samples))
    }
}

/// [`estimate_constants_with`] using the default probe configuration.
pub fn estimate_constants<R: Rng + ?Sized>(model: &GlrModel, geom: &Geometry, x0: &[f64], rng: &mut R) -> Result<ProblemConstants> {
    estimate_constants_with(model, geom, x0, rng, &ProbeConfig::default())
}

/// Estimates the schedule constants for `model` started from `x0`.
///
/// `L` is the largest regressor second moment (the activation is 1-Lipschitz).
/// `κ̲` is the smallest second moment times the mean activation slope at `x*`
/// (exactly the smallest `Σ_ii` in the linear case) and `μ` is `κ̲`, divided by
/// `n` in the `ℓ1` geometry. `σ*²` is the variance probe at `x*`. `𝓛` is the
/// slope of the affine envelope through the probes at `x*` and at one point on
/// the ray towards `x0`, times `cfg.safety`. `D = √(Ω/2)‖x0 − x*‖`.
pub fn estimate_constants_with<R: Rng + ?Sized>(model: &GlrModel, geom: &Geometry, x0: &[f64], rng: &mut R, cfg: &ProbeConfig) -> Result<ProblemConstants> {
    let n = model.dim();
    check_dim(n, x0.len())?;
    check_dim(n, geom.dim())?;
    let moments = model.second_moment_diag();
    let smoothness = moments.iter().cloned().fold(f64::MIN, f64::max);
    let min_moment = moments.iter().cloned().fold(f64::MAX, f64::min);

    let slope_at_truth = if model.is_linear() {
        1.0
    } else {
        let mut row = vec![0.0; n];
        let mut acc = 0.0;
        for _ in 0..cfg.samples {
            model.sample_row(rng, &mut row);
            acc += model.u_prime(dot(&row, model.xstar()));
        }
        acc / cfg.samples as f64
    };
    let growth_l2 = min_moment * slope_at_truth;
    let growth = match geom.kind() {
        GeometryKind::Euclidean => growth_l2,
        GeometryKind::Lp => growth_l2 / n as f64,
    };

    let xstar = model.xstar().to_vec();
    let floor = model.variance_probe_with(&xstar, cfg.samples, cfg.reference_factor, geom, rng)?;

    let d: Vec<f64> = x0.iter().zip(&xstar).map(|(a, b)| a - b).collect();
    let dist = l2_norm(&d);
    let (dir, step) = if dist > 0.0 {
        (d.iter().map(|v| v / dist).collect::<Vec<_>>(), dist)
    } else {
        let mut e = vec![0.0; n];
        e[0] = 1.0;
        (e, 1.0)
    };
    let anchor: Vec<f64> = xstar.iter().zip(&dir).map(|(s, u)| s + step * u).collect();
    let var_anchor = model.variance_probe_with(&anchor, cfg.samples, cfg.reference_factor, geom, rng)?;
    let gap_anchor = model.fgap_estimate(&anchor, cfg.samples, rng)?.mean;
    if !(gap_anchor > 0.0) {
        return Err(Error::Probe(format!("non-positive suboptimality {gap_anchor} at the slope anchor")));
    }
    let variance_slope = cfg.safety * ((var_anchor.mean - floor.mean).max(0.0) / gap_anchor);

    let mut row = vec![0.0; n];
    let mut k2 = 0.0;
    for _ in 0..cfg.samples {
        model.sample_row(rng, &mut row);
        k2 += geom.dual_norm_unchecked(&row).powi(4);
    }
    k2 /= cfg.samples as f64;

    let constants = ProblemConstants {
        smoothness,
        variance_slope,
        sigma_star: floor.mean.max(0.0).sqrt(),
        growth,
        growth_l2,
        radius: (0.5 * geom.omega_bound()).sqrt() * geom.norm(&d)?,
        kbar: Some((3.0 * k2 + 3.0 * smoothness * smoothness).sqrt()),
    };
    let all_finite = [constants.variance_slope, constants.sigma_star, constants.growth, constants.radius]
        .iter()
        .all(|v| v.is_finite());
    if !all_finite {
        return Err(Error::Probe(format!("non-finite constant estimate: {constants:?}")));
    }
    Ok(constants)
}
