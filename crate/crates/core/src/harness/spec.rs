//! Experiment configuration: a flat TOML document, or the name of a shipped preset.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::algorithms::OracleAccounting;
use crate::error::{Error, Result};
use crate::geometry::GeometryKind;
use crate::oracle::{ConstantOverrides, NoiseDist, RegressorDist};

const PRESETS: &[(&str, &str)] = &[
    ("fig4-desk", include_str!("../../presets/fig4-desk.toml")),
    ("fig5-desk", include_str!("../../presets/fig5-desk.toml")),
    ("heavy-tail-desk", include_str!("../../presets/heavy-tail-desk.toml")),
    ("multistage-desk", include_str!("../../presets/multistage-desk.toml")),
    ("noiseless-1d", include_str!("../../presets/noiseless-1d.toml")),
    ("sge-desk", include_str!("../../presets/sge-desk.toml")),
];

/// Names and sources of the built-in presets.
pub fn presets() -> impl Iterator<Item = (&'static str, &'static str)> {
    PRESETS.iter().copied()
}

pub fn preset_source(name: &str) -> Option<&'static str> {
    PRESETS.iter().find(|(n, _)| *n == name).map(|(_, s)| *s)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Algorithm {
    SagdSn,
    SagdLp,
    Sge,
    MultistageSge,
    SgeSr,
    SmdSr,
}

impl Algorithm {
    pub fn is_sparse(self) -> bool {
        matches!(self, Algorithm::SgeSr | Algorithm::SmdSr)
    }

    pub fn is_multistage(self) -> bool {
        matches!(self, Algorithm::MultistageSge | Algorithm::SgeSr | Algorithm::SmdSr)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Tail {
    Gaussian,
    Student,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OracleKind {
    /// Generalized linear regression observations drawn on the fly.
    Glr,
    /// The same observations summarised by their sufficient statistics;
    /// linear Gaussian models only.
    Wishart,
    /// Exact gradients of `½‖x − x*‖²_Σ`; only valid with `sigma = 0`, `alpha = 1`.
    Exact,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ConstantsSource {
    /// Closed form where available, probes otherwise.
    Auto,
    Analytic,
    Probe,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CheckpointUnits {
    Calls,
    Iterations,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum BatchSpec {
    /// The batch rule attached to the algorithm.
    Auto,
    Fixed(usize),
}

#[derive(Deserialize)]
#[serde(untagged)]
enum RawBatch {
    Word(String),
    Fixed(i64),
}

#[derive(Deserialize)]
#[serde(untagged)]
enum OneOrMany {
    One(f64),
    Many(Vec<f64>),
}

impl OneOrMany {
    fn into_vec(self) -> Vec<f64> {
        match self {
            OneOrMany::One(v) => vec![v],
            OneOrMany::Many(v) => v,
        }
    }
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawSpec {
    name: Option<String>,
    algorithm: Algorithm,
    n: i64,
    geometry: Option<GeometryKind>,
    s: Option<i64>,
    kappa: Option<f64>,
    regressors: Option<Tail>,
    noise: Option<Tail>,
    nu: Option<i64>,
    sigma: Option<OneOrMany>,
    alpha: Option<OneOrMany>,
    oracle: Option<OracleKind>,
    xstar: Option<Vec<f64>>,
    x0: Option<Vec<f64>>,
    r0: Option<f64>,
    horizon: Option<i64>,
    stages: Option<i64>,
    stage_iterations: Option<i64>,
    batch: Option<RawBatch>,
    m0: Option<i64>,
    trials: Option<i64>,
    seed: Option<u64>,
    checkpoints: Option<i64>,
    checkpoint_units: Option<CheckpointUnits>,
    constants: Option<ConstantsSource>,
    probe_samples: Option<i64>,
    double_count_oracle: Option<bool>,
    smoothness: Option<f64>,
    variance_slope: Option<f64>,
    sigma_star: Option<f64>,
    growth: Option<f64>,
    growth_l2: Option<f64>,
    radius: Option<f64>,
    kbar: Option<f64>,
}

/// A validated experiment description with every default filled in.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ExperimentSpec {
    pub name: String,
    pub algorithm: Algorithm,
    pub n: usize,
    pub geometry: GeometryKind,
    /// Number of non-zero entries of a randomly drawn `x*`.
    pub s: usize,
    /// Condition number; `Σ` has diagonal evenly spaced on `[1, kappa]`.
    pub kappa: f64,
    pub regressors: Tail,
    pub noise: Tail,
    pub nu: u32,
    pub sigma: Vec<f64>,
    pub alpha: Vec<f64>,
    pub oracle: OracleKind,
    pub xstar: Option<Vec<f64>>,
    pub x0: Option<Vec<f64>>,
    pub r0: Option<f64>,
    pub horizon: usize,
    pub stages: usize,
    pub stage_iterations: Option<usize>,
    #[serde(serialize_with = "serialize_batch")]
    pub batch: BatchSpec,
    pub m0: Option<usize>,
    pub trials: usize,
    pub seed: u64,
    pub checkpoints: usize,
    pub checkpoint_units: CheckpointUnits,
    pub constants: ConstantsSource,
    pub probe_samples: usize,
    pub double_count_oracle: bool,
    pub overrides: ConstantOverrides,
}

fn serialize_batch<S: serde::Serializer>(b: &BatchSpec, s: S) -> std::result::Result<S::Ok, S::Error> {
    match b {
        BatchSpec::Auto => s.serialize_str("auto"),
        BatchSpec::Fixed(m) => s.serialize_u64(*m as u64),
    }
}

/// One `(sigma, alpha)` combination of a spec.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Cell {
    pub index: usize,
    pub sigma: f64,
    pub alpha: f64,
}

impl Cell {
    pub fn label(&self) -> String {
        format!("sigma-{}_alpha-{}", self.sigma, self.alpha)
    }
}

fn positive(key: &str, v: i64) -> Result<usize> {
    if v >= 1 {
        Ok(v as usize)
    } else {
        Err(Error::config(key, format!("must be at least 1, got {v}")))
    }
}

impl ExperimentSpec {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let raw: RawSpec = toml::from_str(text).map_err(|e| Error::config("document", e.message().to_string()))?;
        Self::resolve(raw)
    }

    fn resolve(raw: RawSpec) -> Result<Self> {
        let n = positive("n", raw.n)?;
        let algorithm = raw.algorithm;
        let geometry = raw.geometry.unwrap_or(if algorithm.is_sparse() { GeometryKind::Lp } else { GeometryKind::Euclidean });
        if geometry == GeometryKind::Lp && n < 3 {
            return Err(Error::config("geometry", format!("lp needs n >= 3, got {n}")));
        }
        let s = match raw.s {
            Some(v) => positive("s", v)?,
            None if algorithm.is_sparse() => return Err(Error::config("s", "required by sparse recovery algorithms")),
            None => n,
        };
        if s > n {
            return Err(Error::config("s", format!("must not exceed n = {n}, got {s}")));
        }
        let kappa = raw.kappa.unwrap_or(1.0);
        if !(kappa >= 1.0) || !kappa.is_finite() {
            return Err(Error::config("kappa", format!("must be finite and >= 1, got {kappa}")));
        }
        let nu = match raw.nu {
            Some(v) if v >= 3 && v <= u32::MAX as i64 => v as u32,
            Some(v) => return Err(Error::config("nu", format!("must be at least 3, got {v}"))),
            None => 5,
        };
        let sigma = raw.sigma.map(OneOrMany::into_vec).unwrap_or_else(|| vec![0.1]);
        if sigma.is_empty() {
            return Err(Error::config("sigma", "must not be empty"));
        }
        for (i, v) in sigma.iter().enumerate() {
            if !(*v >= 0.0) || !v.is_finite() {
                return Err(Error::config(format!("sigma[{i}]"), format!("must be finite and >= 0, got {v}")));
            }
        }
        let alpha = raw.alpha.map(OneOrMany::into_vec).unwrap_or_else(|| vec![1.0]);
        if alpha.is_empty() {
            return Err(Error::config("alpha", "must not be empty"));
        }
        for (i, v) in alpha.iter().enumerate() {
            if !(*v > 0.0 && *v <= 1.0) {
                return Err(Error::config(format!("alpha[{i}]"), format!("must lie in (0, 1], got {v}")));
            }
        }
        let oracle = raw.oracle.unwrap_or(OracleKind::Glr);
        let regressors = raw.regressors.unwrap_or(Tail::Gaussian);
        let noise = raw.noise.unwrap_or(Tail::Gaussian);
        if oracle == OracleKind::Wishart {
            if alpha.iter().any(|v| *v != 1.0) {
                return Err(Error::config("alpha", "the wishart oracle needs alpha = 1"));
            }
            if regressors != Tail::Gaussian || noise != Tail::Gaussian {
                return Err(Error::config("oracle", "the wishart oracle needs gaussian regressors and noise"));
            }
        }
        if oracle == OracleKind::Exact {
            if sigma.iter().any(|v| *v != 0.0) {
                return Err(Error::config("sigma", "the exact oracle needs sigma = 0"));
            }
            if alpha.iter().any(|v| *v != 1.0) {
                return Err(Error::config("alpha", "the exact oracle needs alpha = 1"));
            }
            if regressors != Tail::Gaussian {
                return Err(Error::config("regressors", "the exact oracle models gaussian regressors"));
            }
        }
        for (key, v) in [("xstar", &raw.xstar), ("x0", &raw.x0)] {
            if let Some(v) = v {
                if v.len() != n {
                    return Err(Error::config(key, format!("needs {n} entries, got {}", v.len())));
                }
                if v.iter().any(|x| !x.is_finite()) {
                    return Err(Error::config(key, "entries must be finite"));
                }
            }
        }
        if let Some(xs) = &raw.xstar {
            let nnz = xs.iter().filter(|v| **v != 0.0).count();
            if algorithm.is_sparse() && nnz > s {
                return Err(Error::config("xstar", format!("has {nnz} non-zeros but s = {s}")));
            }
        }
        if let Some(r0) = raw.r0 {
            if !(r0 > 0.0) || !r0.is_finite() {
                return Err(Error::config("r0", format!("must be positive, got {r0}")));
            }
        }
        let horizon = positive("horizon", raw.horizon.unwrap_or(100))?;
        if matches!(algorithm, Algorithm::SagdSn | Algorithm::SagdLp) && horizon < 2 {
            return Err(Error::config("horizon", "SAGD needs horizon >= 2"));
        }
        let stages = positive("stages", raw.stages.unwrap_or(5))?;
        let stage_iterations = raw.stage_iterations.map(|v| positive("stage_iterations", v)).transpose()?;
        let batch = match raw.batch {
            None => BatchSpec::Auto,
            Some(RawBatch::Word(w)) if w == "auto" => BatchSpec::Auto,
            Some(RawBatch::Word(w)) => return Err(Error::config("batch", format!("expected \"auto\" or an integer, got {w:?}"))),
            Some(RawBatch::Fixed(m)) => BatchSpec::Fixed(positive("batch", m)?),
        };
        let m0 = raw.m0.map(|v| positive("m0", v)).transpose()?;
        if m0.is_some() && algorithm != Algorithm::SmdSr {
            return Err(Error::config("m0", "only used by smd_sr"));
        }
        let trials = positive("trials", raw.trials.unwrap_or(50))?;
        if trials > u32::MAX as usize {
            return Err(Error::config("trials", "too many trials"));
        }
        let checkpoints = positive("checkpoints", raw.checkpoints.unwrap_or(100))?;
        let probe_samples = positive("probe_samples", raw.probe_samples.unwrap_or(4000))?;
        if probe_samples < 100 {
            return Err(Error::config("probe_samples", format!("must be at least 100, got {probe_samples}")));
        }
        let constants = raw.constants.unwrap_or(ConstantsSource::Auto);
        let mut overrides = ConstantOverrides::default();
        for (key, v) in [
            ("smoothness", raw.smoothness),
            ("variance_slope", raw.variance_slope),
            ("sigma_star", raw.sigma_star),
            ("growth", raw.growth),
            ("growth_l2", raw.growth_l2),
            ("radius", raw.radius),
            ("kbar", raw.kbar),
        ] {
            if let Some(v) = v {
                overrides.set(key, v)?;
            }
        }
        let spec = ExperimentSpec {
            name: raw.name.unwrap_or_else(|| "experiment".into()),
            algorithm,
            n,
            geometry,
            s,
            kappa,
            regressors,
            noise,
            nu,
            sigma,
            alpha,
            oracle,
            xstar: raw.xstar,
            x0: raw.x0,
            r0: raw.r0,
            horizon,
            stages,
            stage_iterations,
            batch,
            m0,
            trials,
            seed: raw.seed.unwrap_or(0),
            checkpoints,
            checkpoint_units: raw.checkpoint_units.unwrap_or(CheckpointUnits::Calls),
            constants,
            probe_samples,
            double_count_oracle: raw.double_count_oracle.unwrap_or(false),
            overrides,
        };
        spec.check_constants_source()?;
        Ok(spec)
    }

    fn check_constants_source(&self) -> Result<()> {
        if self.constants == ConstantsSource::Analytic && self.oracle != OracleKind::Exact {
            let linear = self.alpha.iter().all(|a| *a == 1.0) && self.regressors == Tail::Gaussian;
            if !linear || self.geometry != GeometryKind::Euclidean {
                return Err(Error::config(
                    "constants",
                    "analytic constants need alpha = 1, gaussian regressors and the euclidean geometry",
                ));
            }
        }
        Ok(())
    }

    /// Loads a spec from a file path, or from a preset when no such file exists.
    pub fn load(path_or_preset: &str) -> Result<Self> {
        let path = Path::new(path_or_preset);
        if path.is_file() {
            let text = std::fs::read_to_string(path).map_err(|source| Error::Io {
                path: path.to_path_buf(),
                source,
            })?;
            return Self::from_toml_str(&text);
        }
        match preset_source(path_or_preset) {
            Some(text) => Self::from_toml_str(text),
            None => Err(Error::config(
                "spec",
                format!("{path_or_preset:?} is neither a file nor a preset ({})", PRESETS.iter().map(|p| p.0).collect::<Vec<_>>().join(", ")),
            )),
        }
    }

    pub fn cells(&self) -> Vec<Cell> {
        let mut out = Vec::with_capacity(self.sigma.len() * self.alpha.len());
        for &sigma in &self.sigma {
            for &alpha in &self.alpha {
                out.push(Cell { index: out.len(), sigma, alpha });
            }
        }
        out
    }

    pub fn accounting(&self) -> OracleAccounting {
        if self.double_count_oracle {
            OracleAccounting::Evaluations
        } else {
            OracleAccounting::Observations
        }
    }

    /// Diagonal of `Σ`, evenly spaced on `[1, kappa]`.
    pub fn sigma_diag(&self) -> Vec<f64> {
        if self.n == 1 {
            return vec![1.0];
        }
        let step = (self.kappa - 1.0) / (self.n - 1) as f64;
        (0..self.n).map(|i| 1.0 + step * i as f64).collect()
    }

    pub fn regressor_dist(&self) -> RegressorDist {
        match self.regressors {
            Tail::Gaussian => RegressorDist::Gaussian,
            Tail::Student => RegressorDist::Student { nu: self.nu },
        }
    }

    pub fn noise_dist(&self, sigma: f64) -> NoiseDist {
        match self.noise {
            Tail::Gaussian => NoiseDist::Gaussian { sigma },
            Tail::Student => NoiseDist::Student { nu: self.nu, sigma },
        }
    }
}

/// Shorthand for [`ExperimentSpec::load`].
pub fn load_spec(path_or_preset: &str) -> Result<ExperimentSpec> {
    ExperimentSpec::load(path_or_preset)
}
