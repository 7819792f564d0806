//! Continuous-time policy flows over the stabilizing set.
//!
//! ```text
//! gradient      K̇ = −∇f(K) = −2NY
//! natural(γ)    K̇ = −∇f(K) Y^{−γ} = −2N Y^{1−γ}
//! quasi-Newton  K̇ = −(K − R⁻¹BᵀX)
//! ```
//!
//! Integration uses an embedded Dormand–Prince 5(4) pair. A trial step whose
//! stages leave the stabilizing set is rejected and the step halved.

use nalgebra::DMatrix;

use crate::descent::{Reference, Status};
use crate::error::{Error, Result};
use crate::linalg::sym_power;
use crate::lqr::{evaluate, Evaluation, Plant};

/// Eigenvalue floor applied before forming `Y^{1−γ}`.
pub const METRIC_EIGEN_FLOOR: f64 = 1e-14;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum FlowKind {
    Gradient,
    Natural { gamma: f64 },
    QuasiNewton,
}

impl FlowKind {
    pub fn natural(gamma: f64) -> Result<Self> {
        if !(gamma.is_finite() && gamma > 0.0) {
            return Err(Error::Config(format!("natural-gradient exponent must be positive, got {gamma}")));
        }
        Ok(FlowKind::Natural { gamma })
    }
}

/// Vector field of `kind` at `K`.
pub fn flow_field(kind: FlowKind, p: &Plant, k: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let eval = evaluate(p, k)?;
    field_at(kind, p, &eval)
}

/// Vector field at an existing evaluation.
pub fn field_at(kind: FlowKind, p: &Plant, eval: &Evaluation) -> Result<DMatrix<f64>> {
    Ok(match kind {
        FlowKind::Gradient => -&eval.grad,
        FlowKind::Natural { gamma } if gamma == 1.0 => &eval.n * -2.0,
        FlowKind::Natural { gamma } => &eval.n * sym_power(&eval.y, 1.0 - gamma, METRIC_EIGEN_FLOOR) * -2.0,
        FlowKind::QuasiNewton => p.r_inverse()? * p.b.transpose() * &eval.x - &eval.k,
    })
}

#[derive(Debug, Clone)]
pub struct FlowOptions {
    pub horizon: f64,
    pub rtol: f64,
    pub atol: f64,
    /// Stop early once `‖∇f‖_F` falls to this value.
    pub conv_tol: f64,
    pub initial_step: f64,
    pub min_step: f64,
    pub max_steps: usize,
    pub reference: Option<Reference>,
}

impl Default for FlowOptions {
    fn default() -> Self {
        FlowOptions {
            horizon: 50.0,
            rtol: 1e-9,
            atol: 1e-12,
            conv_tol: 1e-8,
            initial_step: 1e-3,
            min_step: 1e-12,
            max_steps: 200_000,
            reference: None,
        }
    }
}

#[derive(Debug, Clone)]
pub struct FlowRecord {
    pub t: f64,
    /// Size of the step that produced this point (0 at `t = 0`).
    pub dt: f64,
    pub k: DMatrix<f64>,
    pub x: DMatrix<f64>,
    pub f: f64,
    pub f_gap: f64,
    pub grad_norm: f64,
    pub abscissa: f64,
}

#[derive(Debug, Clone)]
pub struct FlowTrace {
    pub kind: FlowKind,
    pub records: Vec<FlowRecord>,
    pub status: Status,
    pub rejected_steps: usize,
    pub reference: Option<Reference>,
}

impl FlowTrace {
    pub fn last(&self) -> &FlowRecord {
        self.records.last().expect("flow traces hold the initial record")
    }

    pub fn times(&self) -> Vec<f64> {
        self.records.iter().map(|r| r.t).collect()
    }

    pub fn gaps(&self) -> Vec<f64> {
        self.records.iter().map(|r| r.f_gap).collect()
    }
}

fn flow_record(t: f64, dt: f64, e: &Evaluation) -> FlowRecord {
    FlowRecord {
        t,
        dt,
        k: e.k.clone(),
        x: e.x.clone(),
        f: e.f,
        f_gap: f64::NAN,
        grad_norm: e.grad_norm(),
        abscissa: e.abscissa,
    }
}

// Dormand–Prince 5(4) tableau.
const C: [f64; 7] = [0.0, 1.0 / 5.0, 3.0 / 10.0, 4.0 / 5.0, 8.0 / 9.0, 1.0, 1.0];
const A: [&[f64]; 7] = [
    &[],
    &[1.0 / 5.0],
    &[3.0 / 40.0, 9.0 / 40.0],
    &[44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0],
    &[19372.0 / 6561.0, -25360.0 / 2187.0, 64448.0 / 6561.0, -212.0 / 729.0],
    &[9017.0 / 3168.0, -355.0 / 33.0, 46732.0 / 5247.0, 49.0 / 176.0, -5103.0 / 18656.0],
    &[35.0 / 384.0, 0.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0],
];
// fifth-order weights minus embedded fourth-order weights
const E: [f64; 7] = [
    35.0 / 384.0 - 5179.0 / 57600.0,
    0.0,
    500.0 / 1113.0 - 7571.0 / 16695.0,
    125.0 / 192.0 - 393.0 / 640.0,
    -2187.0 / 6784.0 + 92097.0 / 339200.0,
    11.0 / 84.0 - 187.0 / 2100.0,
    -1.0 / 40.0,
];

enum Trial {
    Accepted { eval: Evaluation, field: DMatrix<f64>, err: f64 },
    Rejected { err: f64 },
    Unstable,
}

fn trial_step(
    kind: FlowKind,
    p: &Plant,
    eval: &Evaluation,
    k1: &DMatrix<f64>,
    h: f64,
    opts: &FlowOptions,
) -> Result<Trial> {
    let mut stages: Vec<DMatrix<f64>> = Vec::with_capacity(7);
    stages.push(k1.clone());
    let mut last_eval = None;
    for (s, row) in A.iter().enumerate().skip(1) {
        let mut y = eval.k.clone();
        for (coef, ks) in row.iter().zip(&stages) {
            if *coef != 0.0 {
                y += ks * (h * coef);
            }
        }
        let e = match evaluate(p, &y) {
            Ok(e) => e,
            Err(Error::NotStabilizing { .. }) => return Ok(Trial::Unstable),
            Err(other) => return Err(other),
        };
        stages.push(field_at(kind, p, &e)?);
        if s == 6 {
            last_eval = Some(e);
        }
    }
    debug_assert_eq!(C.len(), stages.len());
    let new_eval = last_eval.expect("seven stages");
    let mut err_mat = DMatrix::<f64>::zeros(eval.k.nrows(), eval.k.ncols());
    for (coef, ks) in E.iter().zip(&stages) {
        err_mat += ks * (h * coef);
    }
    let err = err_mat
        .iter()
        .zip(eval.k.iter().zip(new_eval.k.iter()))
        .map(|(e, (a, b))| e.abs() / (opts.atol + opts.rtol * a.abs().max(b.abs())))
        .fold(0.0, f64::max);
    if err <= 1.0 {
        let field = stages.pop().expect("seven stages");
        Ok(Trial::Accepted { eval: new_eval, field, err })
    } else {
        Ok(Trial::Rejected { err })
    }
}

fn step_factor(err: f64) -> f64 {
    if err == 0.0 {
        5.0
    } else {
        (0.9 * err.powf(-0.2)).clamp(0.2, 5.0)
    }
}

/// Integrates `kind` from `k0` up to `opts.horizon`, stopping early once the
/// gradient norm reaches `opts.conv_tol`.
pub fn integrate_flow(kind: FlowKind, p: &Plant, k0: &DMatrix<f64>, opts: &FlowOptions) -> Result<FlowTrace> {
    let mut eval = evaluate(p, k0)?;
    let reference = match &opts.reference {
        Some(r) => r.clone(),
        None => Reference::from_kleinman_newton(p, k0)?,
    };
    let mut field = field_at(kind, p, &eval)?;
    let mut records = vec![flow_record(0.0, 0.0, &eval)];
    let mut status = Status::HorizonReached;
    let mut rejected = 0;
    let mut t = 0.0;
    let mut h = opts.initial_step.min(opts.horizon);

    while t < opts.horizon {
        if eval.grad_norm() <= opts.conv_tol {
            status = Status::Converged;
            break;
        }
        if records.len() > opts.max_steps {
            status = Status::MaxIterations;
            break;
        }
        let h_try = h.min(opts.horizon - t);
        match trial_step(kind, p, &eval, &field, h_try, opts)? {
            Trial::Accepted { eval: e, field: fld, err } => {
                t = if h_try == opts.horizon - t { opts.horizon } else { t + h_try };
                records.push(flow_record(t, h_try, &e));
                eval = e;
                field = fld;
                h = h_try * step_factor(err);
            }
            Trial::Rejected { err } => {
                rejected += 1;
                h = h_try * step_factor(err).min(0.9);
            }
            Trial::Unstable => {
                rejected += 1;
                h = h_try * 0.5;
            }
        }
        if h < opts.min_step {
            return Err(Error::StepFailure { t, step: h });
        }
    }
    if status == Status::HorizonReached && eval.grad_norm() <= opts.conv_tol {
        status = Status::Converged;
    }
    for r in &mut records {
        r.f_gap = r.f - reference.f_star;
    }
    Ok(FlowTrace { kind, records, status, rejected_steps: rejected, reference: Some(reference) })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::loewner_leq;
    use approx::assert_relative_eq;

    fn s1() -> Plant {
        let one = |v: f64| DMatrix::from_element(1, 1, v);
        Plant::new(one(-1.0), one(1.0), one(1.0), one(1.0), one(1.0)).unwrap()
    }

    fn k(v: f64) -> DMatrix<f64> {
        DMatrix::from_element(1, 1, v)
    }

    #[test]
    fn fields_on_scalar_plant() {
        let p = s1();
        assert_relative_eq!(flow_field(FlowKind::Gradient, &p, &k(0.0)).unwrap()[(0, 0)], 0.5, epsilon = 1e-15);
        assert_relative_eq!(flow_field(FlowKind::natural(1.0).unwrap(), &p, &k(0.0)).unwrap()[(0, 0)], 1.0, epsilon = 1e-15);
        assert_relative_eq!(flow_field(FlowKind::QuasiNewton, &p, &k(0.0)).unwrap()[(0, 0)], 0.5, epsilon = 1e-15);
        let ks = k(2f64.sqrt() - 1.0);
        for kind in [FlowKind::Gradient, FlowKind::natural(0.5).unwrap(), FlowKind::QuasiNewton] {
            assert!(flow_field(kind, &p, &ks).unwrap()[(0, 0)].abs() < 1e-15);
        }
    }

    #[test]
    fn fractional_metric_interpolates() {
        let p = s1();
        // Y = 0.5, N = −0.5 at K = 0, so −2N Y^{1−γ} = 0.5^{1−γ}
        let v = flow_field(FlowKind::natural(0.5).unwrap(), &p, &k(0.0)).unwrap()[(0, 0)];
        assert_relative_eq!(v, 0.5f64.sqrt(), epsilon = 1e-14);
    }

    #[test]
    fn invalid_exponent() {
        assert!(FlowKind::natural(0.0).is_err());
        assert!(FlowKind::natural(f64::NAN).is_err());
    }

    #[test]
    fn zero_horizon_gives_single_record() {
        let opts = FlowOptions { horizon: 0.0, ..FlowOptions::default() };
        let trace = integrate_flow(FlowKind::Gradient, &s1(), &k(0.0), &opts).unwrap();
        assert_eq!(trace.records.len(), 1);
        assert_eq!(trace.records[0].t, 0.0);
    }

    #[test]
    fn scalar_gradient_flow_matches_fixed_step_rk4() {
        let p = s1();
        let opts = FlowOptions { horizon: 20.0, conv_tol: 0.0, ..FlowOptions::default() };
        let trace = integrate_flow(FlowKind::Gradient, &p, &k(0.0), &opts).unwrap();
        assert_eq!(trace.status, Status::HorizonReached);
        assert!(trace.last().f_gap <= 1e-6);
        assert!(trace.records.windows(2).all(|w| w[1].f <= w[0].f + 1e-15));

        // dk/dt = −f′(k) = −(k² + 2k − 1) / (2(1 + k)²), classical RK4 with a fine step
        let rhs = |k: f64| -(k * k + 2.0 * k - 1.0) / (2.0 * (1.0 + k) * (1.0 + k));
        let h = 1e-3;
        let mut kk = 0.0;
        let mut t = 0.0;
        let mut records = trace.records.iter().skip(1).peekable();
        while let Some(rec) = records.peek() {
            let step = (rec.t - t).min(h);
            let k1 = rhs(kk);
            let k2 = rhs(kk + 0.5 * step * k1);
            let k3 = rhs(kk + 0.5 * step * k2);
            let k4 = rhs(kk + step * k3);
            kk += step / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
            t += step;
            if (t - rec.t).abs() < 1e-12 {
                assert!((rec.k[(0, 0)] - kk).abs() < 1e-7, "t = {t}: {} vs {kk}", rec.k[(0, 0)]);
                records.next();
            }
        }
    }

    #[test]
    fn natural_flow_value_matrix_is_monotone() {
        let p = s1();
        let opts = FlowOptions { horizon: 10.0, ..FlowOptions::default() };
        let trace = integrate_flow(FlowKind::natural(1.0).unwrap(), &p, &k(0.0), &opts).unwrap();
        assert!(trace.records.len() > 3);
        for w in trace.records.windows(2) {
            assert!(loewner_leq(&w[1].x, &w[0].x, 1e-8));
        }
    }

    #[test]
    fn unstable_start_is_rejected() {
        let err = integrate_flow(FlowKind::Gradient, &s1(), &k(-2.0), &FlowOptions::default()).unwrap_err();
        assert!(matches!(err, Error::NotStabilizing { .. }));
    }
}
