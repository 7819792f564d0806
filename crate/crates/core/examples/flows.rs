//! Gradient, natural-gradient and quasi-Newton flows on the path benchmark,
//! with exponential decay fits of the optimality gap.

use pglqr::benchmarks::preset;
use pglqr::fit::{exponential_envelope, log_gap_fit};
use pglqr::flows::{integrate_flow, FlowKind, FlowOptions};

fn main() -> pglqr::Result<()> {
    let pr = preset("path20")?;
    let opts = FlowOptions { horizon: 30.0, ..FlowOptions::default() };
    for kind in [FlowKind::Gradient, FlowKind::natural(0.5)?, FlowKind::natural(1.0)?, FlowKind::QuasiNewton] {
        let trace = integrate_flow(kind, &pr.plant, &pr.k0, &opts)?;
        let floor = 1e-10 * trace.records[0].f;
        let (ts, gaps) = (trace.times(), trace.gaps());
        let fit = log_gap_fit(&ts, &gaps, floor).expect("enough samples");
        let envelope = exponential_envelope(&ts, &gaps, floor).unwrap_or(f64::NAN);
        println!(
            "{kind:?}: {:?} at t = {:.3} after {} steps ({} rejected); rate {:.4} (R² {:.4}), envelope {:.4}",
            trace.status,
            trace.last().t,
            trace.records.len() - 1,
            trace.rejected_steps,
            -fit.slope,
            fit.r2,
            envelope
        );
    }
    Ok(())
}
