//! Pointwise analytic bounds checked on random gains in the initial sublevel
//! set of the path benchmark.

use nalgebra::DMatrix;
use pglqr::benchmarks::preset;
use pglqr::descent::Reference;
use pglqr::lqr::{coercivity_lower_bound, exact_gap, gap_bounds, trace_y_bound};
use pglqr::evaluate;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn main() -> pglqr::Result<()> {
    let pr = preset("path20")?;
    let p = &pr.plant;
    let f0 = evaluate(p, &pr.k0)?.f;
    let reference = Reference::from_kleinman_newton(p, &pr.k0)?;
    let opt = evaluate(p, &reference.k_star)?;
    let mut rng = ChaCha8Rng::seed_from_u64(1);

    let mut accepted = 0;
    while accepted < 10 {
        let scale: f64 = rng.gen_range(0.0..1.5);
        let dir = DMatrix::from_fn(20, 20, |_, _| rng.gen_range(-1.0..1.0));
        let k = &reference.k_star + dir * (scale / 20.0);
        let Ok(e) = evaluate(p, &k) else { continue };
        if e.f > f0 {
            continue;
        }
        accepted += 1;
        let gap = e.f - reference.f_star;
        let bounds = gap_bounds(p, &e, &opt)?;
        println!(
            "f = {:.6}  coercive ≥ {:.4}  gap {:.4e} vs identity {:.4e}  sandwich [{:.3e}, {:.3e}]  Tr Y {:.3} ≤ {:.3}",
            e.f,
            coercivity_lower_bound(p, &k),
            gap,
            exact_gap(p, &e, &reference.k_star),
            bounds.lower,
            bounds.upper,
            e.y.trace(),
            trace_y_bound(p, f0)
        );
    }
    Ok(())
}
