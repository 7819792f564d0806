//! Natural gradient descent: monotone value matrices and the contraction
//! factor estimated along the run.

use pglqr::benchmarks::preset;
use pglqr::descent::{natural_gradient_descent_observed, DescentOptions};
use pglqr::linalg::{lambda_max, loewner_leq};

fn main() -> pglqr::Result<()> {
    let pr = preset("path20")?;
    let mut values = Vec::new();
    let trace = natural_gradient_descent_observed(&pr.plant, &pr.k0, &DescentOptions::natural_gradient(), |e| {
        values.push(e.x.clone())
    })?;

    for (r, w) in trace.records.iter().zip(values.windows(2)) {
        let drop = lambda_max(&(&w[0] - &w[1]));
        println!(
            "{:>2}  gap = {:.3e}  X_j+1 ⪯ X_j: {}  largest decrease {:.3e}",
            r.iter,
            r.f_gap,
            loewner_leq(&w[1], &w[0], 1e-9),
            drop
        );
    }
    let gaps: Vec<f64> = trace.records.iter().map(|r| r.f_gap).collect();
    for (j, w) in gaps.windows(2).enumerate() {
        println!("gap ratio {j} → {}: {:.3e}", j + 1, w[1] / w[0]);
    }
    println!("min λ₁(Y_j) = {:.4}", trace.info.min_lambda_y);
    println!("q0 (stated rate, factor 4) = {:.4}", trace.info.q0.unwrap());
    println!("q0 (dominance sandwich) = {:.4}", trace.info.q0_dominance.unwrap());
    Ok(())
}
