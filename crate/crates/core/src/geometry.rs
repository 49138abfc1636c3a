//! Norm pairs, distance-generating functions and the prox step.
//!
//! Two set-ups are supported. The Euclidean one pairs `‖·‖₂` with itself and
//! uses `ω(x) = ½‖x‖₂²`. The `lp` one pairs `‖·‖₁` with `‖·‖∞` and uses
//! `ω(x) = c‖x‖_p²` with `p = 1 + 1/ln n`, which is 1-strongly convex with
//! respect to `‖·‖₁` and keeps `Ω` logarithmic in the dimension.
//!
//! The feasible set is the whole space, so the prox step has a closed form
//! through the inverse of `∇ω`.

use std::f64::consts::E;

use serde::{Deserialize, Serialize};

use crate::error::{check_dim, Error, Result};

/// Below this norm the gradient maps return zero instead of evaluating
/// negative powers of an underflowed value.
const TINY_NORM: f64 = 1e-300;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum GeometryKind {
    Euclidean,
    Lp,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Geometry {
    kind: GeometryKind,
    dim: usize,
    p: f64,
    c: f64,
    omega: f64,
}

impl Geometry {
    pub fn new(kind: GeometryKind, dim: usize) -> Result<Self> {
        match kind {
            GeometryKind::Euclidean => Self::euclidean(dim),
            GeometryKind::Lp => Self::lp(dim),
        }
    }

    pub fn euclidean(dim: usize) -> Result<Self> {
        if dim == 0 {
            return Err(Error::invalid("dim", "must be positive"));
        }
        Ok(Geometry {
            kind: GeometryKind::Euclidean,
            dim,
            p: 2.0,
            c: 0.5,
            omega: 1.0,
        })
    }

    /// `‖·‖₁` geometry with `p = 1 + 1/ln n`; requires `n ≥ 3` so that `p < 2`.
    pub fn lp(dim: usize) -> Result<Self> {
        if dim < 3 {
            return Err(Error::invalid("dim", format!("lp geometry needs n >= 3, got {dim}")));
        }
        let ln_n = (dim as f64).ln();
        let p = 1.0 + 1.0 / ln_n;
        Ok(Geometry {
            kind: GeometryKind::Lp,
            dim,
            p,
            c: lp_dgf_constant(dim),
            omega: E * E * ln_n,
        })
    }

    pub fn kind(&self) -> GeometryKind {
        self.kind
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Exponent of the DGF norm (2 for Euclidean).
    pub fn p(&self) -> f64 {
        self.p
    }

    /// Multiplier `c` in `ω(x) = c‖x‖_p²`.
    pub fn dgf_constant(&self) -> f64 {
        self.c
    }

    /// `Ω` such that `ω(x) ≤ Ω/2 ‖x‖²`.
    pub fn omega_bound(&self) -> f64 {
        self.omega
    }

    /// Primal norm: `‖x‖₂` or `‖x‖₁`.
    pub fn norm(&self, x: &[f64]) -> Result<f64> {
        check_dim(self.dim, x.len())?;
        Ok(match self.kind {
            GeometryKind::Euclidean => l2_norm(x),
            GeometryKind::Lp => l1_norm(x),
        })
    }

    /// Dual norm: `‖y‖₂` or `‖y‖∞`.
    pub fn dual_norm(&self, y: &[f64]) -> Result<f64> {
        check_dim(self.dim, y.len())?;
        Ok(self.dual_norm_unchecked(y))
    }

    pub(crate) fn dual_norm_unchecked(&self, y: &[f64]) -> f64 {
        match self.kind {
            GeometryKind::Euclidean => l2_norm(y),
            GeometryKind::Lp => linf_norm(y),
        }
    }

    pub fn omega(&self, x: &[f64]) -> Result<f64> {
        check_dim(self.dim, x.len())?;
        Ok(self.omega_unchecked(x))
    }

    fn omega_unchecked(&self, x: &[f64]) -> f64 {
        match self.kind {
            GeometryKind::Euclidean => 0.5 * dot(x, x),
            GeometryKind::Lp => {
                let r = lp_norm(x, self.p);
                self.c * r * r
            }
        }
    }

    pub fn grad_omega(&self, x: &[f64]) -> Result<Vec<f64>> {
        check_dim(self.dim, x.len())?;
        let mut out = vec![0.0; self.dim];
        self.grad_omega_into(x, &mut out);
        Ok(out)
    }

    fn grad_omega_into(&self, x: &[f64], out: &mut [f64]) {
        match self.kind {
            GeometryKind::Euclidean => out.copy_from_slice(x),
            GeometryKind::Lp => {
                grad_half_sq_norm(x, self.p, out);
                let scale = 2.0 * self.c;
                out.iter_mut().for_each(|v| *v *= scale);
            }
        }
    }

    /// The unique `x` with `∇ω(x) = y`.
    pub fn inv_grad_omega(&self, y: &[f64]) -> Result<Vec<f64>> {
        check_dim(self.dim, y.len())?;
        let mut out = vec![0.0; self.dim];
        self.inv_grad_omega_into(y, &mut out);
        Ok(out)
    }

    fn inv_grad_omega_into(&self, y: &[f64], out: &mut [f64]) {
        match self.kind {
            GeometryKind::Euclidean => out.copy_from_slice(y),
            GeometryKind::Lp => {
                // ∇(½‖·‖_p²) and ∇(½‖·‖_q²) are mutually inverse and the latter is
                // 1-homogeneous, so (2c·∇½‖·‖_p²)⁻¹(y) = ∇½‖·‖_q²(y) / 2c.
                let q = self.p / (self.p - 1.0);
                grad_half_sq_norm(y, q, out);
                let scale = 0.5 / self.c;
                out.iter_mut().for_each(|v| *v *= scale);
            }
        }
    }

    /// `V_{x0}(x, y) = ω(y−x0) − ω(x−x0) − ⟨∇ω(x−x0), y−x⟩`.
    pub fn bregman(&self, x0: &[f64], x: &[f64], y: &[f64]) -> Result<f64> {
        check_dim(self.dim, x0.len())?;
        check_dim(self.dim, x.len())?;
        check_dim(self.dim, y.len())?;
        let xs: Vec<f64> = x.iter().zip(x0).map(|(a, b)| a - b).collect();
        let ys: Vec<f64> = y.iter().zip(x0).map(|(a, b)| a - b).collect();
        let mut g = vec![0.0; self.dim];
        self.grad_omega_into(&xs, &mut g);
        let lin: f64 = g.iter().zip(y.iter().zip(x)).map(|(gi, (yi, xi))| gi * (yi - xi)).sum();
        Ok(self.omega_unchecked(&ys) - self.omega_unchecked(&xs) - lin)
    }

    /// `argmin_x ⟨a, x⟩ + η V_{x0}(z_prev, x)` over the whole space.
    pub fn prox_step(&self, x0: &[f64], z_prev: &[f64], a: &[f64], eta: f64) -> Result<Vec<f64>> {
        check_dim(self.dim, x0.len())?;
        check_dim(self.dim, z_prev.len())?;
        check_dim(self.dim, a.len())?;
        if !(eta > 0.0) || !eta.is_finite() {
            return Err(Error::invalid("eta", format!("must be positive and finite, got {eta}")));
        }
        let mut out = vec![0.0; self.dim];
        self.prox_step_into(x0, z_prev, a, eta, &mut out);
        Ok(out)
    }

    /// Unchecked variant used inside the algorithm loops.
    pub(crate) fn prox_step_into(&self, x0: &[f64], z_prev: &[f64], a: &[f64], eta: f64, out: &mut [f64]) {
        match self.kind {
            GeometryKind::Euclidean => {
                for ((o, z), ai) in out.iter_mut().zip(z_prev).zip(a) {
                    *o = z - ai / eta;
                }
            }
            GeometryKind::Lp => {
                let shifted: Vec<f64> = z_prev.iter().zip(x0).map(|(z, c)| z - c).collect();
                let mut dual = vec![0.0; self.dim];
                self.grad_omega_into(&shifted, &mut dual);
                for (d, ai) in dual.iter_mut().zip(a) {
                    *d -= ai / eta;
                }
                self.inv_grad_omega_into(&dual, out);
                for (o, c) in out.iter_mut().zip(x0) {
                    *o += c;
                }
            }
        }
    }
}

/// `½·e·ln n·n^{(p−1)(2−p)/p}` with `p = 1 + 1/ln n`.
pub fn lp_dgf_constant(dim: usize) -> f64 {
    let ln_n = (dim as f64).ln();
    let p = 1.0 + 1.0 / ln_n;
    0.5 * E * ln_n * (dim as f64).powf((p - 1.0) * (2.0 - p) / p)
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn l1_norm(x: &[f64]) -> f64 {
    x.iter().map(|v| v.abs()).sum()
}

pub fn l2_norm(x: &[f64]) -> f64 {
    dot(x, x).sqrt()
}

pub fn linf_norm(x: &[f64]) -> f64 {
    x.iter().fold(0.0, |m, v| m.max(v.abs()))
}

/// `‖x‖_p` computed with max-scaling so large exponents neither overflow nor
/// underflow.
pub fn lp_norm(x: &[f64], p: f64) -> f64 {
    let m = linf_norm(x);
    if m == 0.0 || !m.is_finite() {
        return m;
    }
    let s: f64 = x.iter().map(|v| (v.abs() / m).powf(p)).sum();
    m * s.powf(1.0 / p)
}

/// Gradient of `½‖x‖_r²`: component `i` is `‖x‖_r · (|x_i|/‖x‖_r)^{r−1} · sign(x_i)`.
fn grad_half_sq_norm(x: &[f64], r: f64, out: &mut [f64]) {
    let nrm = lp_norm(x, r);
    if nrm < TINY_NORM {
        out.iter_mut().for_each(|v| *v = 0.0);
        return;
    }
    for (o, &xi) in out.iter_mut().zip(x) {
        *o = if xi == 0.0 {
            0.0
        } else {
            nrm * (xi.abs() / nrm).powf(r - 1.0) * xi.signum()
        };
    }
}
