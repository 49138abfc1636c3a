//! State-dependent noise: Monte Carlo variance of the GLR oracle along a ray
//! towards `x*`, next to the affine envelope `slope·(f − f*) + σ*²`.

use sgex::geometry::Geometry;
use sgex::oracle::{estimate_constants, GlrModel, NoiseDist, RegressorDist};
use sgex::rng::Streams;

fn main() -> sgex::Result<()> {
    let n = 100;
    let geom = Geometry::lp(n)?;
    let xstar: Vec<f64> = (0..n).map(|i| if i % 10 == 0 { 1.0 } else { 0.0 }).collect();
    let x0 = vec![0.0; n];
    for alpha in [1.0, 0.5, 0.1] {
        let model = GlrModel::new(xstar.clone(), vec![1.0; n], RegressorDist::Gaussian, NoiseDist::Gaussian { sigma: 0.1 }, alpha)?;
        let streams = Streams::new(4).trial(0);
        let c = estimate_constants(&model, &geom, &x0, &mut streams.probe())?;
        println!("alpha = {alpha}: slope = {:.2}, sigma*^2 = {:.4}", c.variance_slope, c.sigma_star.powi(2));
        let mut rng = streams.stage(0).iteration(0);
        for t in [0.0, 0.25, 0.5, 1.0, 1.5] {
            let x: Vec<f64> = xstar.iter().zip(&x0).map(|(s, o)| s + t * (o - s)).collect();
            let var = model.variance_probe(&x, 4000, &geom, &mut rng)?;
            let gap = model.fgap_estimate(&x, 4000, &mut rng)?.mean;
            println!(
                "  t = {t:<4} gap = {gap:.4}  variance = {:.4} +- {:.4}  envelope = {:.4}",
                var.mean,
                var.std_err,
                c.variance_slope * gap + c.sigma_star.powi(2)
            );
        }
    }
    Ok(())
}
