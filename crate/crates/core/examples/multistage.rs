//! Restarted SGE under quadratic growth: the squared distance to `x*` roughly
//! halves with every stage.

use sgex::algorithms::RunOptions;
use sgex::geometry::Geometry;
use sgex::multistage::{multistage_sge, StageConfig};
use sgex::oracle::{GlrModel, ProblemConstants, WishartOracle};
use sgex::rng::Streams;

fn main() -> sgex::Result<()> {
    let n = 100;
    let diag: Vec<f64> = (0..n).map(|i| 1.0 + 9.0 * i as f64 / (n - 1) as f64).collect();
    let xstar: Vec<f64> = (0..n).map(|i| (i as f64 * 0.37).sin()).collect();
    let y0 = vec![0.0; n];
    let model = GlrModel::linear_gaussian(xstar.clone(), diag, 0.1)?;
    let c = ProblemConstants::linear_gaussian_euclidean(&model, &y0)?;
    let geom = Geometry::euclidean(n)?;
    let r0 = xstar.iter().map(|v| v * v).sum::<f64>().sqrt();
    let cfg = StageConfig::new(r0, 4, c, &geom);

    let oracle = WishartOracle::new(model)?;
    let out = multistage_sge(&oracle, &geom, &y0, &cfg, &Streams::new(2).trial(0).stage(0), &RunOptions::default(), &mut |_| {})?;
    println!("R0^2 = {:.3}", r0 * r0);
    for rec in &out.stages {
        let err: f64 = rec.y.iter().zip(&xstar).map(|(a, b)| (a - b) * (a - b)).sum();
        println!(
            "stage {}: N = {}, m = {:>6}, eta = {:>6.1}, |y - x*|^2 = {err:.3e} (target {:.3e}), calls = {}",
            rec.plan.stage,
            rec.plan.iterations,
            rec.plan.batch,
            rec.plan.eta,
            r0 * r0 / 2f64.powi(rec.plan.stage as i32),
            rec.calls
        );
    }
    Ok(())
}
