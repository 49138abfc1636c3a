//! Batch gradients of the linear Gaussian model drawn through their
//! sufficient statistics.
//!
//! For `φ ~ N(0, Σ)` and `η = φᵀx* + σζ`, the batch-mean gradient at `x` is
//! `(S(x − x*) − Φᵀζσ)/m` with `S = ΦᵀΦ`. Only `S ~ W_n(m, Σ)` and
//! `Φᵀζ | S ~ N(0, S)` matter, so a batch can be drawn with the Bartlett
//! factorisation `S = Σ^{½} A Aᵀ Σ^{½}` in `O(n²)` work instead of `O(mn)`.
//! The joint law of the gradients at any set of points is unchanged.

use rand::Rng;
use rand_distr::{ChiSquared, Distribution, StandardNormal};

use super::{GlrModel, StochasticOracle};
use crate::error::{Error, Result};
use crate::rng::StreamRng;

/// Linear Gaussian oracle sampling `(S, Φᵀζ)` directly once `m ≥ n`; smaller
/// batches fall back to drawing rows.
#[derive(Clone, Debug)]
pub struct WishartOracle {
    model: GlrModel,
    sd: Vec<f64>,
    sigma: f64,
}

impl WishartOracle {
    pub fn new(model: GlrModel) -> Result<Self> {
        if !model.is_linear_gaussian() {
            return Err(Error::UnsupportedModel {
                what: "WishartOracle",
                reason: "needs alpha = 1, gaussian regressors and gaussian noise".into(),
            });
        }
        let sd = model.sigma_diag().iter().map(|v| v.sqrt()).collect();
        let sigma = model.noise().sigma();
        Ok(WishartOracle { model, sd, sigma })
    }

    pub fn model(&self) -> &GlrModel {
        &self.model
    }
}

/// Packed lower triangle, row-major: `a[i(i+1)/2 + j]` for `j ≤ i`.
fn bartlett(n: usize, m: usize, rng: &mut StreamRng) -> Result<Vec<f64>> {
    let mut a = vec![0.0; n * (n + 1) / 2];
    for i in 0..n {
        let row = i * (i + 1) / 2;
        for j in 0..i {
            a[row + j] = rng.sample(StandardNormal);
        }
        let chi = ChiSquared::new((m - i) as f64).map_err(|e| Error::invalid("m", e.to_string()))?;
        a[row + i] = chi.sample(rng).sqrt();
    }
    Ok(a)
}

fn lower_mul(a: &[f64], v: &[f64], out: &mut [f64]) {
    for (i, o) in out.iter_mut().enumerate() {
        let row = &a[i * (i + 1) / 2..][..=i];
        *o = row.iter().zip(v).map(|(x, y)| x * y).sum();
    }
}

fn lower_t_mul(a: &[f64], v: &[f64], out: &mut [f64]) {
    out.iter_mut().for_each(|o| *o = 0.0);
    for (i, &vi) in v.iter().enumerate() {
        let row = &a[i * (i + 1) / 2..][..=i];
        for (o, x) in out.iter_mut().zip(row) {
            *o += x * vi;
        }
    }
}

impl StochasticOracle for WishartOracle {
    fn dim(&self) -> usize {
        self.model.dim()
    }

    fn batch_gradients(&self, m: usize, rng: &mut StreamRng, points: &[&[f64]], out: &mut [Vec<f64>]) -> Result<()> {
        let n = self.dim();
        if m < n {
            return self.model.batch_gradients(m, rng, points, out);
        }
        for p in points {
            crate::error::check_dim(n, p.len())?;
        }
        let a = bartlett(n, m, rng)?;
        let xi: Vec<f64> = (0..n).map(|_| rng.sample(StandardNormal)).collect();
        let mut noise = vec![0.0; n];
        lower_mul(&a, &xi, &mut noise);
        let mut u = vec![0.0; n];
        let mut v = vec![0.0; n];
        let mf = m as f64;
        for (p, o) in points.iter().zip(out.iter_mut()) {
            for ((ui, (x, xs)), s) in u.iter_mut().zip(p.iter().zip(self.model.xstar())).zip(&self.sd) {
                *ui = s * (x - xs);
            }
            lower_t_mul(&a, &u, &mut v);
            lower_mul(&a, &v, &mut u);
            o.clear();
            o.extend(u.iter().zip(&noise).zip(&self.sd).map(|((w, e), s)| s * (w - self.sigma * e) / mf));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::RunStreams;

    // Mean gradient and mean squared deviation from Σd over independent batches.
    fn moments(oracle: &dyn StochasticOracle, x: &[f64], truth: &[f64], m: usize, draws: usize) -> (Vec<f64>, f64) {
        let streams = RunStreams::from_seed(5);
        let mut mean = vec![0.0; x.len()];
        let mut spread = 0.0;
        let mut out = vec![Vec::new()];
        for t in 0..draws {
            oracle.batch_gradients(m, &mut streams.iteration(t), &[x], &mut out).unwrap();
            mean.iter_mut().zip(&out[0]).for_each(|(a, g)| *a += g / draws as f64);
            spread += out[0].iter().zip(truth).map(|(g, e)| (g - e) * (g - e)).sum::<f64>() / draws as f64;
        }
        (mean, spread)
    }

    #[test]
    fn matches_row_sampling_in_law() {
        let diag = vec![1.0, 2.0, 4.0, 0.5];
        let xstar = vec![1.0, -1.0, 0.5, 0.0];
        let sigma = 0.7;
        let model = GlrModel::linear_gaussian(xstar.clone(), diag.clone(), sigma).unwrap();
        let w = WishartOracle::new(model.clone()).unwrap();
        let x = [0.3, 0.2, -0.4, 1.0];
        let d: Vec<f64> = x.iter().zip(&xstar).map(|(a, b)| a - b).collect();
        let truth: Vec<f64> = d.iter().zip(&diag).map(|(a, s)| a * s).collect();
        let tr: f64 = diag.iter().sum();
        let quad: f64 = d.iter().zip(&truth).map(|(a, b)| a * b).sum();
        let m = 9;
        let expected = (quad * tr + truth.iter().map(|v| v * v).sum::<f64>() + sigma * sigma * tr) / m as f64;
        let draws = 40_000;
        for oracle in [&w as &dyn StochasticOracle, &model] {
            let (mean, spread) = moments(oracle, &x, &truth, m, draws);
            for (a, e) in mean.iter().zip(&truth) {
                assert!((a - e).abs() < 5.0 * (expected / draws as f64).sqrt(), "{a} vs {e}");
            }
            assert!((spread / expected - 1.0).abs() < 0.03, "{spread} vs {expected}");
        }
    }

    #[test]
    fn same_batch_at_every_point() {
        let model = GlrModel::linear_gaussian(vec![1.0, 2.0, 3.0], vec![1.0, 1.5, 2.0], 0.0).unwrap();
        let w = WishartOracle::new(model).unwrap();
        let (x, y) = ([0.0, 0.0, 0.0], [2.0, 4.0, 6.0]);
        let mut out = vec![Vec::new(), Vec::new()];
        w.batch_gradients(50, &mut RunStreams::from_seed(2).iteration(0), &[&x, &y], &mut out).unwrap();
        // Noiseless: G(x*) = 0 and the map is linear, so G(y) = −G(x).
        for (a, b) in out[0].iter().zip(&out[1]) {
            assert!((a + b).abs() < 1e-12);
        }
    }

    #[test]
    fn falls_back_to_rows_for_small_batches() {
        let model = GlrModel::linear_gaussian(vec![1.0, -1.0, 0.5], vec![1.0, 2.0, 3.0], 0.1).unwrap();
        let w = WishartOracle::new(model.clone()).unwrap();
        let x = [0.3, 0.2, 0.1];
        let (mut a, mut b) = (vec![Vec::new()], vec![Vec::new()]);
        let s = RunStreams::from_seed(1);
        w.batch_gradients(2, &mut s.iteration(0), &[&x], &mut a).unwrap();
        model.batch_gradients(2, &mut s.iteration(0), &[&x], &mut b).unwrap();
        assert_eq!(a, b);
    }
}
