//! The ℓ1 / ℓp set-up: DGF constants, a prox step and the Bregman divergence.

use sgex::geometry::{l1_norm, Geometry};

fn main() -> sgex::Result<()> {
    let n = 16;
    let geom = Geometry::lp(n)?;
    println!("n = {n}: p = {:.6}, c = {:.6}, Omega = {:.4}", geom.p(), geom.dgf_constant(), geom.omega_bound());

    let x0 = vec![0.0; n];
    let z = (0..n).map(|i| if i < 3 { 1.0 } else { 0.0 }).collect::<Vec<_>>();
    let mut a = vec![0.0; n];
    a[0] = 2.0;
    a[5] = -1.0;

    for eta in [1.0, 10.0, 100.0] {
        let next = geom.prox_step(&x0, &z, &a, eta)?;
        let moved: Vec<f64> = next.iter().zip(&z).map(|(u, v)| u - v).collect();
        println!(
            "eta = {eta:>5}: |z+ - z|_1 = {:.4}, V(z, z+) = {:.4e}",
            l1_norm(&moved),
            geom.bregman(&x0, &z, &next)?
        );
    }

    let y = geom.grad_omega(&z)?;
    let back = geom.inv_grad_omega(&y)?;
    println!("round trip error = {:.2e}", back.iter().zip(&z).map(|(u, v)| (u - v).abs()).fold(0.0, f64::max));
    Ok(())
}
