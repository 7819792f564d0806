mod common;

use common::stabilizing_instance;
use nalgebra::DMatrix;
use pglqr::benchmarks::preset;
use pglqr::descent::Status;
use pglqr::flows::{flow_field, integrate_flow, FlowKind, FlowOptions};
use pglqr::linalg::loewner_leq;
use pglqr::Error;
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn kinds() -> [FlowKind; 4] {
    [FlowKind::Gradient, FlowKind::Natural { gamma: 0.5 }, FlowKind::Natural { gamma: 1.0 }, FlowKind::QuasiNewton]
}

#[test]
fn flows_reach_the_optimum_on_path() {
    let pr = preset("path20").unwrap();
    for kind in kinds() {
        let trace = integrate_flow(kind, &pr.plant, &pr.k0, &FlowOptions::default()).unwrap();
        assert_eq!(trace.status, Status::Converged, "{kind:?}");
        let r = trace.reference.as_ref().unwrap();
        assert!((&trace.last().k - &r.k_star).norm() < 1e-6, "{kind:?}");
        assert!(trace.records.iter().all(|rec| rec.abscissa < 0.0));
    }
}

#[test]
fn halving_tolerances_moves_the_endpoint_little() {
    let pr = preset("path20").unwrap();
    for kind in kinds() {
        let loose = FlowOptions { horizon: 3.0, conv_tol: 0.0, rtol: 1e-7, atol: 1e-10, ..FlowOptions::default() };
        let tight = FlowOptions { rtol: loose.rtol / 2.0, atol: loose.atol / 2.0, ..loose.clone() };
        let a = integrate_flow(kind, &pr.plant, &pr.k0, &loose).unwrap();
        let b = integrate_flow(kind, &pr.plant, &pr.k0, &tight).unwrap();
        let diff = (&a.last().k - &b.last().k).norm();
        let scale = loose.rtol * a.last().k.norm() + loose.atol;
        assert!(diff <= 10.0 * scale, "{kind:?}: {diff:e} vs {scale:e}");
    }
}

#[test]
fn fields_vanish_at_the_optimum() {
    let pr = preset("path20").unwrap();
    let r = pglqr::descent::Reference::from_kleinman_newton(&pr.plant, &pr.k0).unwrap();
    for kind in kinds() {
        assert!(flow_field(kind, &pr.plant, &r.k_star).unwrap().norm() < 1e-10);
    }
}

#[test]
fn non_stabilizing_start_is_an_error() {
    let pr = preset("path20").unwrap();
    let k = DMatrix::<f64>::identity(20, 20) * -5.0;
    let err = integrate_flow(FlowKind::Gradient, &pr.plant, &k, &FlowOptions::default()).unwrap_err();
    assert!(matches!(err, Error::NotStabilizing { .. }));
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn natural_flow_keeps_values_monotone(seed in any::<u64>(), n in 1usize..=4, m in 1usize..=4) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let (p, k0) = stabilizing_instance(&mut rng, n, m);
        let opts = FlowOptions { horizon: 5.0, ..FlowOptions::default() };
        let trace = integrate_flow(FlowKind::Natural { gamma: 1.0 }, &p, &k0, &opts).unwrap();
        for w in trace.records.windows(2) {
            prop_assert!(loewner_leq(&w[1].x, &w[0].x, 1e-8 * w[0].x.norm().max(1.0)));
            prop_assert!(w[1].f <= w[0].f * (1.0 + 1e-12));
        }
    }

    #[test]
    fn cost_decreases_along_every_flow(seed in any::<u64>(), n in 1usize..=4, m in 1usize..=4) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let (p, k0) = stabilizing_instance(&mut rng, n, m);
        let opts = FlowOptions { horizon: 5.0, ..FlowOptions::default() };
        for kind in kinds() {
            let trace = integrate_flow(kind, &p, &k0, &opts).unwrap();
            for w in trace.records.windows(2) {
                prop_assert!(w[1].f <= w[0].f * (1.0 + 1e-12), "{kind:?}");
            }
        }
    }
}
