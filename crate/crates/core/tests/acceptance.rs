//! Acceptance criteria, run in order by one test so wall-clock limits are
//! measured without other tests competing for the CPU.
//!
//! `SGEX_ONLY=3,5 cargo test --test acceptance` runs a subset.

use std::io::Write;
use std::time::{Duration, Instant};

use rand::seq::index;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use sgex::algorithms::{sagd_run, sge_batch, sge_bound, sge_eta, sge_run, RunOptions, SagdSchedule, SgeSchedule};
use sgex::geometry::Geometry;
use sgex::harness::{self, OutputFormat};
use sgex::multistage::{multistage_sge, sge_sr, sparse_project, StageConfig, StageEvent};
use sgex::oracle::{estimate_constants, quadratic_oracle, GlrModel, NoiseDist, ProblemConstants, RegressorDist, WishartOracle};
use sgex::rng::{RunStreams, Streams};

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: String) -> Outcome {
    Outcome { pass, detail }
}

fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

fn normals(n: usize, r: &mut ChaCha8Rng) -> Vec<f64> {
    (0..n).map(|_| r.sample(StandardNormal)).collect()
}

fn spaced(n: usize, lo: f64, hi: f64) -> Vec<f64> {
    (0..n).map(|i| lo + (hi - lo) * i as f64 / (n - 1) as f64).collect()
}

fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

fn quad_gap(diag: &[f64], x: &[f64], xstar: &[f64]) -> f64 {
    0.5 * diag.iter().zip(x.iter().zip(xstar)).map(|(s, (a, b))| s * (a - b) * (a - b)).sum::<f64>()
}

fn median(v: &mut [f64]) -> f64 {
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

fn noop_stage(_: &StageEvent) {}

// Deterministic quadratic with Σ = diag on [1, 10], n = 50.
fn deterministic_problem() -> (Vec<f64>, Vec<f64>, f64, f64) {
    let n = 50;
    let diag = spaced(n, 1.0, 10.0);
    let xstar = normals(n, &mut rng(11));
    let l = 10.0;
    let d2 = 0.5 * xstar.iter().map(|v| v * v).sum::<f64>();
    (diag, xstar, l, d2)
}

fn criterion_1() -> Outcome {
    let (diag, xstar, l, d2) = deterministic_problem();
    let n = diag.len();
    let oracle = quadratic_oracle(diag.clone(), xstar.clone());
    let geom = Geometry::euclidean(n).unwrap();
    let x0 = vec![0.0; n];
    let sched = SgeSchedule::new(200, 1, 24.0 * l).unwrap();
    let mut worst = f64::MIN;
    let mut violations = 0;
    let mut obs = |p: &sgex::algorithms::Progress| {
        let k = p.t as f64;
        let bound = 73.0 * l * d2 / (k * (k + 2.0));
        let gap = quad_gap(&diag, p.x, &xstar);
        worst = worst.max(gap / bound);
        if gap > bound {
            violations += 1;
        }
    };
    sge_run(&oracle, &geom, &x0, &sched, &RunStreams::from_seed(0), &RunOptions::default(), &mut obs).unwrap();
    outcome(violations == 0, format!("k = 1..200, max gap/bound = {worst:.3e}, violations = {violations}"))
}

fn criterion_2() -> Outcome {
    let (diag, xstar, l, d2) = deterministic_problem();
    let n = diag.len();
    let oracle = quadratic_oracle(diag.clone(), xstar.clone());
    let geom = Geometry::euclidean(n).unwrap();
    let x0 = vec![0.0; n];
    let sched = SagdSchedule::new(200, 1, 4.0 * l).unwrap();
    let mut worst = f64::MIN;
    let mut violations = 0;
    let mut obs = |p: &sgex::algorithms::Progress| {
        if p.t < 2 {
            return;
        }
        let k = p.t as f64;
        let bound = 12.0 * l * d2 / ((k + 1.0) * (k + 2.0));
        let gap = quad_gap(&diag, p.x, &xstar);
        worst = worst.max(gap / bound);
        if gap > bound {
            violations += 1;
        }
    };
    sagd_run(&oracle, &geom, &x0, &sched, &RunStreams::from_seed(0), &RunOptions::default(), &mut obs).unwrap();
    outcome(violations == 0, format!("k = 2..200, max gap/bound = {worst:.3e}, violations = {violations}"))
}

fn criterion_3() -> Outcome {
    let n = 200;
    let k = 100;
    let trials = 50;
    let diag = spaced(n, 1.0, 10.0);
    let xstar = normals(n, &mut rng(33));
    let x0 = vec![0.0; n];
    let model = GlrModel::linear_gaussian(xstar.clone(), diag.clone(), 0.1).unwrap();
    let c = ProblemConstants::linear_gaussian_euclidean(&model, &x0).unwrap();

    // Constants and bound recomputed from their definitions.
    let trace: f64 = diag.iter().sum();
    let l = 10.0;
    let slope = 2.0 * (trace + l);
    let sigma_star = 0.1 * trace.sqrt();
    let d = (0.5 * sq_dist(&x0, &xstar)).sqrt();
    let kf = k as f64;
    let m = [1.0, (slope * kf / l).ceil(), (kf.powi(3) * sigma_star * sigma_star / (d * d * l * l)).ceil()]
        .into_iter()
        .fold(1.0, f64::max) as usize;
    let mf = m as f64;
    let bound = 73.0 * l * d * d / (kf * (kf + 2.0)) + 54.0 * slope * d * d / (mf * kf) + 6.0 * 2f64.sqrt() * sigma_star * d / (mf * kf).sqrt();
    if sge_batch(&c, k).unwrap() != m || (sge_bound(&c, k, m).unwrap() / bound - 1.0).abs() > 1e-12 {
        return outcome(false, format!("library batch/bound disagree with m = {m}, bound = {bound:.6e}"));
    }
    let eta = sge_eta(&c, k, m).unwrap();
    let sched = SgeSchedule::new(k, m, eta).unwrap();
    let oracle = WishartOracle::new(model).unwrap();
    let geom = Geometry::euclidean(n).unwrap();
    let streams = Streams::new(3);
    let mut mean_gap = 0.0;
    for t in 0..trials {
        let tr = sge_run(&oracle, &geom, &x0, &sched, &streams.trial(t).stage(0), &RunOptions::default(), &mut |_| {}).unwrap();
        mean_gap += quad_gap(&diag, &tr.x, &xstar) / trials as f64;
    }
    let margin = 1.0 - mean_gap / bound;
    let flag = if margin < 0.1 { " [margin below 10%]" } else { "" };
    outcome(
        mean_gap <= bound,
        format!("m = {m}, eta = {eta:.1}, mean gap = {mean_gap:.4e}, bound = {bound:.4e}, margin = {:.1}%{flag}", 100.0 * margin),
    )
}

fn criterion_4() -> Outcome {
    let n = 100;
    let stages = 4;
    let trials = 30;
    let diag = spaced(n, 1.0, 10.0);
    let xstar = normals(n, &mut rng(44));
    let y0 = vec![0.0; n];
    let model = GlrModel::linear_gaussian(xstar.clone(), diag, 0.1).unwrap();
    let c = ProblemConstants::linear_gaussian_euclidean(&model, &y0).unwrap();
    let geom = Geometry::euclidean(n).unwrap();
    let r0_sq = sq_dist(&y0, &xstar);
    let cfg = StageConfig::new(r0_sq.sqrt(), stages, c, &geom);
    let plans = cfg.plan_multistage().unwrap();
    let streams = Streams::new(4);
    let mut errs = vec![Vec::with_capacity(trials); stages];
    for t in 0..trials as u32 {
        let out = multistage_sge(&model, &geom, &y0, &cfg, &streams.trial(t).stage(0), &RunOptions::default(), &mut noop_stage).unwrap();
        for (k, rec) in out.stages.iter().enumerate() {
            errs[k].push(sq_dist(&rec.y, &xstar));
        }
    }
    let mut pass = true;
    let mut parts = Vec::new();
    for (k, e) in errs.iter_mut().enumerate() {
        let med = median(e);
        let bound = r0_sq / 2f64.powi(k as i32 + 1);
        pass &= med <= bound;
        parts.push(format!("k={}: {med:.3e} <= {bound:.3e}", k + 1));
    }
    outcome(pass, format!("N = {}, m^1 = {}; {}", plans[0].iterations, plans[0].batch, parts.join(", ")))
}

fn criterion_5() -> Outcome {
    let n = 2000;
    let s = 10;
    let stages = 5;
    let trials = 20;
    let (iterations, batch) = (100, 1000);
    let mut r = rng(55);
    let mut xstar = vec![0.0; n];
    let mut support = index::sample(&mut r, n, s).into_vec();
    support.sort_unstable();
    for i in support {
        xstar[i] = r.sample(StandardNormal);
    }
    let y0 = vec![0.0; n];
    let model = GlrModel::linear_gaussian(xstar.clone(), vec![1.0; n], 0.1).unwrap();
    let geom = Geometry::lp(n).unwrap();
    let c = estimate_constants(&model, &geom, &y0, &mut Streams::new(5).trial(0).probe()).unwrap();
    let r0 = xstar.iter().map(|v| v.abs()).sum::<f64>();
    let printed = StageConfig::new(r0, stages, c, &geom).with_sparsity(s);
    let printed_n = printed.sparse_iterations().unwrap();
    let printed_m = printed.stage_batch(printed_n, 1);
    let cfg = printed.with_iterations(iterations).with_batch(batch);
    let streams = Streams::new(5);
    let mut errs = vec![Vec::with_capacity(trials); stages];
    let mut max_nnz = 0;
    for t in 0..trials as u32 {
        let out = sge_sr(&model, &geom, &y0, &cfg, &streams.trial(t).stage(0), &RunOptions::default(), &mut noop_stage).unwrap();
        for (k, rec) in out.stages.iter().enumerate() {
            max_nnz = max_nnz.max(rec.ybar.iter().filter(|v| **v != 0.0).count());
            errs[k].push(sq_dist(&rec.ybar, &xstar));
        }
    }
    let r0_sq = r0 * r0;
    let mut pass = max_nnz <= s;
    let mut parts = Vec::new();
    for (k, e) in errs.iter_mut().enumerate() {
        let med = median(e);
        let bound = r0_sq / 2f64.powi(k as i32 + 1);
        pass &= med <= bound;
        parts.push(format!("k={}: {med:.3e} <= {bound:.3e}", k + 1));
    }
    outcome(
        pass,
        format!(
            "max nnz = {max_nnz}; N = {iterations}, m = {batch} (printed N = {printed_n}, m^1 = {printed_m}); eta = {:.1}; R0 = ||x*||_1 = {r0:.3}; {}",
            cfg.stage_eta(iterations, batch, 1),
            parts.join(", ")
        ),
    )
}

// Independent ℓp DGF: ω(x) = c‖x‖_p², p = 1 + 1/ln n.
struct Dgf {
    p: f64,
    c: f64,
}

impl Dgf {
    fn new(n: usize) -> Self {
        let ln = (n as f64).ln();
        let p = 1.0 + 1.0 / ln;
        let c = std::f64::consts::E * ln * (n as f64).powf((p - 1.0) * (2.0 - p) / p) / 2.0;
        Dgf { p, c }
    }

    fn norm(&self, x: &[f64]) -> f64 {
        x.iter().map(|v| v.abs().powf(self.p)).sum::<f64>().powf(1.0 / self.p)
    }

    fn value(&self, x: &[f64]) -> f64 {
        self.c * self.norm(x).powi(2)
    }

    fn grad(&self, x: &[f64]) -> Vec<f64> {
        let r = self.norm(x);
        if r == 0.0 {
            return vec![0.0; x.len()];
        }
        x.iter().map(|v| 2.0 * self.c * r.powf(2.0 - self.p) * v.abs().powf(self.p - 1.0) * v.signum()).collect()
    }
}

// Solves `h·d = g` for a small dense symmetric positive definite `h`.
fn solve(mut h: Vec<Vec<f64>>, mut g: Vec<f64>) -> Vec<f64> {
    let n = g.len();
    for c in 0..n {
        let piv = (c..n).max_by(|&i, &j| h[i][c].abs().total_cmp(&h[j][c].abs())).unwrap();
        h.swap(c, piv);
        g.swap(c, piv);
        for r in c + 1..n {
            let f = h[r][c] / h[c][c];
            for k in c..n {
                h[r][k] -= f * h[c][k];
            }
            g[r] -= f * g[c];
        }
    }
    let mut d = vec![0.0; n];
    for r in (0..n).rev() {
        let tail: f64 = (r + 1..n).map(|k| h[r][k] * d[k]).sum();
        d[r] = (g[r] - tail) / h[r][r];
    }
    d
}

// ⟨a, x⟩ + η V_{x0}(z, x), minimised by damped Newton steps with backtracking.
fn numeric_prox(dgf: &Dgf, x0: &[f64], z: &[f64], a: &[f64], eta: f64) -> Vec<f64> {
    let n = x0.len();
    let zs: Vec<f64> = z.iter().zip(x0).map(|(u, v)| u - v).collect();
    let gz = dgf.grad(&zs);
    // Up to constants: F(w) = ⟨a, w⟩ + η(ω(w) − ⟨∇ω(z−x0), w⟩) with w = x − x0.
    let lin: Vec<f64> = a.iter().zip(&gz).map(|(ai, g)| ai - eta * g).collect();
    let f = |w: &[f64]| lin.iter().zip(w).map(|(l, v)| l * v).sum::<f64>() + eta * dgf.value(w);
    let p = dgf.p;
    let mut w = zs.clone();
    for _ in 0..200 {
        let g: Vec<f64> = lin.iter().zip(dgf.grad(&w)).map(|(l, gi)| l + eta * gi).collect();
        // Hessian of c‖w‖_p²: 2c[(2−p) r^{2−2p} u uᵀ + (p−1) r^{2−p} diag|w|^{p−2}], u = |w|^{p−1} sign w.
        let r = dgf.norm(&w);
        let u: Vec<f64> = w.iter().map(|v| v.abs().powf(p - 1.0) * v.signum()).collect();
        let h: Vec<Vec<f64>> = (0..n)
            .map(|i| {
                (0..n)
                    .map(|j| {
                        let mut v = (2.0 - p) * r.powf(2.0 - 2.0 * p) * u[i] * u[j];
                        if i == j {
                            v += (p - 1.0) * r.powf(2.0 - p) * w[i].abs().max(1e-300).powf(p - 2.0);
                        }
                        2.0 * dgf.c * eta * v
                    })
                    .collect()
            })
            .collect();
        let d = solve(h, g.clone());
        let decrement: f64 = g.iter().zip(&d).map(|(a, b)| a * b).sum();
        if decrement <= 1e-28 * (1.0 + f(&w).abs()) {
            break;
        }
        let fw = f(&w);
        if decrement < 1e-12 * (1.0 + fw.abs()) {
            // Function values no longer resolve the decrease; Newton is in its quadratic phase.
            w.iter_mut().zip(&d).for_each(|(wi, di)| *wi -= di);
            continue;
        }
        let mut t = 1.0;
        let mut next: Vec<f64> = w.iter().zip(&d).map(|(wi, di)| wi - di).collect();
        while f(&next) > fw - 0.25 * t * decrement && t > 1e-12 {
            t *= 0.5;
            next = w.iter().zip(&d).map(|(wi, di)| wi - t * di).collect();
        }
        w = next;
    }
    (0..n).map(|i| w[i] + x0[i]).collect()
}

fn criterion_6() -> Outcome {
    let mut r = rng(66);
    let mut worst: f64 = 0.0;
    for _ in 0..100 {
        let n = r.random_range(3..=20);
        let geom = Geometry::lp(n).unwrap();
        let dgf = Dgf::new(n);
        let x0 = normals(n, &mut r);
        let z = normals(n, &mut r);
        let a = normals(n, &mut r);
        let eta = 10f64.powf(r.random_range(-0.5..1.5));
        let fast = geom.prox_step(&x0, &z, &a, eta).unwrap();
        let slow = numeric_prox(&dgf, &x0, &z, &a, eta);
        let rel = sq_dist(&fast, &slow).sqrt() / fast.iter().map(|v| v * v).sum::<f64>().sqrt().max(1e-300);
        worst = worst.max(rel);
    }
    outcome(worst <= 1e-6, format!("100 instances, n in 3..=20, max relative error = {worst:.3e}"))
}

fn criterion_7() -> Outcome {
    let mut r = rng(77);
    let mut worst: f64 = 0.0;
    for n in [3, 100, 10_000] {
        for geom in [Geometry::lp(n).unwrap(), Geometry::euclidean(n).unwrap()] {
            for _ in 0..1000 {
                let scale = 10f64.powf(r.random_range(-3.0..3.0));
                let x: Vec<f64> = normals(n, &mut r).iter().map(|v| v * scale).collect();
                let back = geom.inv_grad_omega(&geom.grad_omega(&x).unwrap()).unwrap();
                let rel = sq_dist(&back, &x).sqrt() / x.iter().map(|v| v * v).sum::<f64>().sqrt();
                worst = worst.max(rel);
            }
        }
    }
    outcome(worst <= 1e-10, format!("n in {{3, 100, 10000}}, 1000 vectors each, max relative error = {worst:.3e}"))
}

fn criterion_8() -> Outcome {
    let n = 10;
    let samples: usize = 1_000_000;
    let diag = spaced(n, 1.0, 10.0);
    let mut r = rng(88);
    let xstar = normals(n, &mut r);
    let model = GlrModel::linear_gaussian(xstar.clone(), diag.clone(), 0.1).unwrap();
    let mut worst_z: f64 = 0.0;
    let chunk = 10_000;
    for point in 0..10u32 {
        let x = normals(n, &mut r);
        let truth: Vec<f64> = (0..n).map(|i| diag[i] * (x[i] - xstar[i])).collect();
        let mut sum = vec![0.0; n];
        let mut sum_sq = vec![0.0; n];
        let mut draw = Streams::new(8).trial(point).stage(0).iteration(0);
        for _ in 0..samples / chunk {
            let batch = model.draw_batch(chunk, &mut draw).unwrap();
            for (row, &eta) in batch.rows().zip(batch.responses()) {
                let g = model.sample_gradient(row, eta, &x).unwrap();
                for i in 0..n {
                    sum[i] += g[i];
                    sum_sq[i] += g[i] * g[i];
                }
            }
        }
        let m = samples as f64;
        for i in 0..n {
            let mean = sum[i] / m;
            let var = (sum_sq[i] - m * mean * mean) / (m - 1.0);
            worst_z = worst_z.max((mean - truth[i]).abs() / (var / m).sqrt());
        }
    }

    let mut envelope_ok = true;
    let mut worst_ratio: f64 = 0.0;
    for (j, alpha) in [1.0, 0.5, 0.1].into_iter().enumerate() {
        let m = 100;
        let geom = Geometry::lp(m).unwrap();
        let mut rs = rng(800 + j as u64);
        let xs = normals(m, &mut rs);
        let model = GlrModel::new(xs.clone(), vec![1.0; m], RegressorDist::Gaussian, NoiseDist::Gaussian { sigma: 0.1 }, alpha).unwrap();
        let x0 = vec![0.0; m];
        let streams = Streams::new(80 + j as u64).trial(0);
        let c = estimate_constants(&model, &geom, &x0, &mut streams.probe()).unwrap();
        let mut probe = streams.stage(0).iteration(0);
        for i in 1..=10 {
            let t = 0.2 * i as f64;
            let x: Vec<f64> = xs.iter().zip(&x0).map(|(s, o)| s + t * (o - s)).collect();
            let var = model.variance_probe(&x, 4000, &geom, &mut probe).unwrap().mean;
            let gap = model.fgap_estimate(&x, 4000, &mut probe).unwrap().mean;
            let env = c.variance_slope * gap + c.sigma_star * c.sigma_star;
            worst_ratio = worst_ratio.max(var / env);
            envelope_ok &= var <= env;
        }
    }
    outcome(
        worst_z <= 5.0 && envelope_ok,
        format!("max |z| = {worst_z:.2} over 10 points, M = 1e6; max variance/envelope = {worst_ratio:.3} over 3 activations x 10 ray points"),
    )
}

fn criterion_9() -> Outcome {
    let mut r = rng(99);
    let mut mismatches = 0;
    let mut checked = 0;
    for n in 1..=8usize {
        for v in 0..1000 {
            // Every other vector is drawn from a small grid so ties occur.
            let x: Vec<f64> = if v % 2 == 0 {
                normals(n, &mut r)
            } else {
                (0..n).map(|_| r.random_range(-3i32..=3) as f64).collect()
            };
            for s in 1..=n {
                let z = sparse_project(&x, s).unwrap();
                let got = sq_dist(&x, &z);
                let nnz = z.iter().filter(|v| **v != 0.0).count();
                let mut best = f64::INFINITY;
                for mask in 0u32..(1 << n) {
                    if mask.count_ones() as usize != s {
                        continue;
                    }
                    let d: f64 = (0..n).filter(|i| mask & (1 << i) == 0).map(|i| x[i] * x[i]).sum();
                    best = best.min(d);
                }
                checked += 1;
                if nnz > s || (got - best).abs() > 1e-12 * (1.0 + best) {
                    mismatches += 1;
                }
            }
        }
    }
    outcome(mismatches == 0, format!("{checked} (vector, s) pairs, n <= 8, mismatches = {mismatches}"))
}

fn read_all(dir: &std::path::Path) -> Vec<(String, Vec<u8>)> {
    let mut out = Vec::new();
    let mut stack = vec![dir.to_path_buf()];
    while let Some(d) = stack.pop() {
        for e in std::fs::read_dir(&d).unwrap() {
            let p = e.unwrap().path();
            if p.is_dir() {
                stack.push(p);
            } else if p.extension().is_some_and(|x| x == "csv") {
                out.push((p.strip_prefix(dir).unwrap().display().to_string(), std::fs::read(&p).unwrap()));
            }
        }
    }
    out.sort();
    out
}

fn criterion_10() -> Outcome {
    let spec = harness::load_spec("fig4-desk").unwrap();
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    let ra = harness::execute(&spec, a.path(), OutputFormat::Csv, Some(1)).unwrap();
    let rb = harness::execute(&spec, b.path(), OutputFormat::Csv, Some(3)).unwrap();
    let failures: usize = ra.iter().chain(&rb).map(|s| s.failures.len()).sum();
    let fa = read_all(a.path());
    let fb = read_all(b.path());
    let same = !fa.is_empty() && fa == fb;
    outcome(same && failures == 0, format!("{} CSV files compared, identical = {same}, workers 1 vs 3, trial failures = {failures}", fa.len()))
}

type Criterion = (u32, &'static str, Duration, fn() -> Outcome);

#[test]
fn acceptance_criteria() {
    let all: [Criterion; 10] = [
        (1, "deterministic SGE rate", Duration::from_secs(1), criterion_1),
        (2, "deterministic SAGD rate", Duration::from_secs(1), criterion_2),
        (3, "stochastic SGE expectation bound", Duration::from_secs(120), criterion_3),
        (4, "multistage halving", Duration::from_secs(300), criterion_4),
        (5, "SGE-SR halving and sparsity", Duration::from_secs(600), criterion_5),
        (6, "prox step vs numerical minimiser", Duration::from_secs(10), criterion_6),
        (7, "geometry round trips", Duration::from_secs(5), criterion_7),
        (8, "oracle unbiasedness and variance envelope", Duration::from_secs(60), criterion_8),
        (9, "sparse projection optimality", Duration::from_secs(5), criterion_9),
        (10, "reproducibility of fig4-desk", Duration::from_secs(300), criterion_10),
    ];
    let only: Option<Vec<u32>> = std::env::var("SGEX_ONLY").ok().map(|v| v.split(',').filter_map(|s| s.trim().parse().ok()).collect());
    let mut failed = Vec::new();
    for (id, name, limit, run) in all {
        if only.as_ref().is_some_and(|o| !o.contains(&id)) {
            continue;
        }
        let start = Instant::now();
        let out = run();
        let elapsed = start.elapsed();
        let in_time = elapsed <= limit;
        let pass = out.pass && in_time;
        let line = format!(
            "criterion {id:>2} {}: {name}: {} ({:.2} s, limit {} s{})\n",
            if pass { "PASS" } else { "FAIL" },
            out.detail,
            elapsed.as_secs_f64(),
            limit.as_secs(),
            if in_time { "" } else { ", over time" }
        );
        // Bypasses the test harness capture so the lines always show.
        let mut stdout = std::io::stdout().lock();
        stdout.write_all(line.as_bytes()).unwrap();
        stdout.flush().unwrap();
        if !pass {
            failed.push(id);
        }
    }
    assert!(failed.is_empty(), "failed criteria: {failed:?}");
}
