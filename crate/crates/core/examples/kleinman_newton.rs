//! Kleinman–Newton iteration on the path benchmark: Riccati residual and the
//! quadratic error decay.

use pglqr::benchmarks::preset;
use pglqr::descent::{kleinman_newton, DescentOptions};
use pglqr::lqr::are_residual;

fn main() -> pglqr::Result<()> {
    let pr = preset("path20")?;
    let opts = DescentOptions { keep_iterates: true, ..DescentOptions::kleinman_newton() };
    let trace = kleinman_newton(&pr.plant, &pr.k0, &opts)?;
    let reference = trace.reference.as_ref().expect("set by the solver");

    for (r, k) in trace.records.iter().zip(&trace.iterates) {
        println!("{:>2}  f = {:.15}  |K − K*| = {:.3e}  |grad| = {:.3e}", r.iter, r.f, (k - &reference.k_star).norm(), r.grad_norm);
    }
    println!("{:?} in {} iterations", trace.status, trace.iterations());
    println!("Riccati residual at X* = {:.3e}", are_residual(&pr.plant, &reference.x_star)?);
    println!("quadratic ratio = {:.4}", trace.info.quadratic_ratio.unwrap_or(f64::NAN));
    Ok(())
}
