//! Certified-stepsize gradient descent on the 20-node path benchmark.

use pglqr::benchmarks::preset;
use pglqr::descent::{gradient_descent, stepsize_floor, DescentOptions};
use pglqr::fit::log_gap_fit;

fn main() -> pglqr::Result<()> {
    let pr = preset("path20")?;
    let opts = DescentOptions { tol: Some(1e-8), ..DescentOptions::gradient_descent() };
    let trace = gradient_descent(&pr.plant, &pr.k0, &opts)?;

    for r in trace.records.iter().step_by(50) {
        println!("{:>4}  f = {:.12}  gap = {:.3e}  |grad| = {:.3e}  eta = {:.4}", r.iter, r.f, r.f_gap, r.grad_norm, r.eta);
    }
    let last = trace.last();
    println!("{:?} after {} iterations, |grad| = {:.3e}", trace.status, trace.iterations(), last.grad_norm);

    let f0 = trace.records[0].f;
    let (lo, hi) = trace.info.d_range.expect("at least one step");
    println!("d_j in [{lo:.4}, {hi:.4}], stepsize floor {:.4e}", stepsize_floor(&pr.plant, f0));

    let iters: Vec<f64> = trace.records.iter().map(|r| r.iter as f64).collect();
    let gaps: Vec<f64> = trace.records.iter().map(|r| r.f_gap).collect();
    if let Some(fit) = log_gap_fit(&iters, &gaps, 1e-10 * f0) {
        println!("ln gap ≈ {:.5}·j + {:.3} (R² = {:.4})", fit.slope, fit.intercept, fit.r2);
    }
    Ok(())
}
