//! SGE-SR on a sparse linear model in the ℓ1 geometry, with stage lengths and
//! batches chosen by hand and constants estimated from probes.

use sgex::algorithms::RunOptions;
use sgex::geometry::Geometry;
use sgex::multistage::{sge_sr, StageConfig};
use sgex::oracle::{estimate_constants, GlrModel};
use sgex::rng::Streams;

fn main() -> sgex::Result<()> {
    let n = 500;
    let s = 5;
    let mut xstar = vec![0.0; n];
    for (j, i) in [3, 77, 150, 301, 460].into_iter().enumerate() {
        xstar[i] = if j % 2 == 0 { 1.0 } else { -0.7 };
    }
    let y0 = vec![0.0; n];
    let model = GlrModel::linear_gaussian(xstar.clone(), vec![1.0; n], 0.01)?;
    let geom = Geometry::lp(n)?;
    let streams = Streams::new(3).trial(0);
    let c = estimate_constants(&model, &geom, &y0, &mut streams.probe())?;
    println!("estimated: L = {:.3}, slope = {:.2}, sigma* = {:.4}", c.smoothness, c.variance_slope, c.sigma_star);

    let r0: f64 = xstar.iter().map(|v| v.abs()).sum();
    let cfg = StageConfig::new(r0, 5, c, &geom).with_sparsity(s).with_iterations(60).with_batch(300);
    let out = sge_sr(&model, &geom, &y0, &cfg, &streams.stage(0), &RunOptions::default(), &mut |_| {})?;
    for rec in &out.stages {
        let err: f64 = rec.ybar.iter().zip(&xstar).map(|(a, b)| (a - b) * (a - b)).sum();
        let support: Vec<usize> = rec.ybar.iter().enumerate().filter(|(_, v)| **v != 0.0).map(|(i, _)| i).collect();
        println!("stage {}: |ybar - x*|_2^2 = {err:.3e}, support = {support:?}", rec.plan.stage);
    }
    Ok(())
}
