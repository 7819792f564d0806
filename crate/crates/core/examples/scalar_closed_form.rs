//! Scalar plant `ẋ = −x + u` with unit weights, where everything is known in
//! closed form: `f(k) = (1 + k²)/(2(1 + k))` and `k* = √2 − 1`.

use nalgebra::DMatrix;
use pglqr::descent::{kleinman_newton, DescentOptions};
use pglqr::{evaluate, Plant};

fn main() -> pglqr::Result<()> {
    let one = |v: f64| DMatrix::from_element(1, 1, v);
    let p = Plant::new(one(-1.0), one(1.0), one(1.0), one(1.0), one(1.0))?;

    let e = evaluate(&p, &one(0.0))?;
    println!("at k = 0: X = {}, Y = {}, N = {}, f = {}, grad = {}", e.x[(0, 0)], e.y[(0, 0)], e.n[(0, 0)], e.f, e.grad[(0, 0)]);

    let opts = DescentOptions { keep_iterates: true, ..DescentOptions::kleinman_newton() };
    let trace = kleinman_newton(&p, &one(0.0), &opts)?;
    let k_star = 2f64.sqrt() - 1.0;
    for (j, k) in trace.iterates.iter().enumerate() {
        println!("K_{j} = {:.16}  error {:.3e}", k[(0, 0)], (k[(0, 0)] - k_star).abs());
    }
    println!("largest e_(j+1)/e_j² over the last steps: {:.4}", trace.info.quadratic_ratio.unwrap_or(f64::NAN));
    Ok(())
}
