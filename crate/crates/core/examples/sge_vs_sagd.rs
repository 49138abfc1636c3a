//! SGE and SAGD on the same linear regression problem with their corollary
//! step sizes and batches.

use sgex::algorithms::{sagd_batch, sagd_run, sge_batch, sge_bound, sge_run, RunOptions, SagdSchedule, SagdVariant, SgeSchedule};
use sgex::geometry::Geometry;
use sgex::oracle::{GlrModel, ProblemConstants, WishartOracle};
use sgex::rng::Streams;

fn main() -> sgex::Result<()> {
    let n = 50;
    let k = 60;
    let diag: Vec<f64> = (0..n).map(|i| 1.0 + 9.0 * i as f64 / (n - 1) as f64).collect();
    let xstar: Vec<f64> = (0..n).map(|i| ((i * 7 % 11) as f64 - 5.0) / 5.0).collect();
    let x0 = vec![0.0; n];
    let model = GlrModel::linear_gaussian(xstar, diag, 0.1)?;
    let c = ProblemConstants::linear_gaussian_euclidean(&model, &x0)?;
    let geom = Geometry::euclidean(n)?;
    let oracle = WishartOracle::new(model.clone())?;
    let streams = Streams::new(1).trial(0).stage(0);

    let m = sge_batch(&c, k)?;
    let sge = SgeSchedule::from_constants(&c, k, m)?;
    let mut trace = Vec::new();
    let out = sge_run(&oracle, &geom, &x0, &sge, &streams, &RunOptions::default(), &mut |p| {
        if p.t % 10 == 0 {
            trace.push((p.t, p.calls, model.fgap_linear_gaussian(p.x).unwrap()));
        }
    })?;
    println!("SGE  m = {m}, eta = {:.1}, bound at k = {k}: {:.3e}", sge.eta(), sge_bound(&c, k, m)?);
    for (t, calls, gap) in &trace {
        println!("  t = {t:>3}  calls = {calls:>9}  f - f* = {gap:.3e}");
    }
    println!("  final gap {:.3e} after {} calls", model.fgap_linear_gaussian(&out.x)?, out.calls);

    let m = sagd_batch(&c, k)?;
    let sagd = SagdSchedule::from_constants(&c, k, m, SagdVariant::Sn)?;
    let out = sagd_run(&oracle, &geom, &x0, &sagd, &streams, &RunOptions::default(), &mut |_| {})?;
    println!("SAGD m = {m}, eta = {:.1}: final gap {:.3e} after {} calls", sagd.eta(), model.fgap_linear_gaussian(&out.x)?, out.calls);
    Ok(())
}
