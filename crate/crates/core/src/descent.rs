//! Discrete policy iterations: gradient descent with a certified stepsize,
//! natural gradient descent and Kleinman–Newton.
//!
//! All three share [`Trace`]. The optimal cost used for the `f_gap` column is
//! always produced by a Kleinman–Newton run on the same plant
//! ([`Reference::from_kleinman_newton`]) unless the caller supplies one.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{lambda_max, lambda_min, spectral_norm, symmetrize};
use crate::lqr::{evaluate, stationarity_tol, Evaluation, Plant};

/// Gradient tolerance targeted by the reference Kleinman–Newton run.
pub const REFERENCE_TOL: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Status {
    Converged,
    MaxIterations,
    /// Iterates stopped moving at machine precision above the tolerance.
    Stagnated,
    HorizonReached,
}

/// One row of a run.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Record {
    pub iter: usize,
    pub f: f64,
    pub f_gap: f64,
    pub grad_norm: f64,
    /// `‖P_U ∇f‖_F` for structured runs; equals `grad_norm` otherwise.
    pub stationarity_norm: f64,
    /// Stepsize taken from this iterate (0 on the terminal record).
    pub eta: f64,
    pub abscissa: f64,
}

/// Optimal gain, value matrix and dual Gramian of a plant.
#[derive(Debug, Clone)]
pub struct Reference {
    pub k_star: DMatrix<f64>,
    pub x_star: DMatrix<f64>,
    pub y_star: DMatrix<f64>,
    pub f_star: f64,
    pub grad_norm: f64,
}

impl Reference {
    pub fn from_evaluation(eval: &Evaluation) -> Self {
        Reference {
            k_star: eval.k.clone(),
            x_star: eval.x.clone(),
            y_star: eval.y.clone(),
            f_star: eval.f,
            grad_norm: eval.grad_norm(),
        }
    }

    /// Runs Kleinman–Newton from the stabilizing `k0` to [`REFERENCE_TOL`].
    pub fn from_kleinman_newton(p: &Plant, k0: &DMatrix<f64>) -> Result<Self> {
        let opts = DescentOptions { tol: Some(REFERENCE_TOL), ..DescentOptions::kleinman_newton() };
        let (_, last) = kn_loop(p, k0, &opts, &mut |_| {})?;
        if !last.is_stationary() {
            return Err(Error::NotOptimal { grad_norm: last.grad_norm() });
        }
        Ok(Reference::from_evaluation(&last))
    }
}

/// Certificates and constants gathered along a run.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct RunInfo {
    /// Running minimum of `λ₁(Y_j)` over the visited iterates.
    pub min_lambda_y: f64,
    /// Smallest and largest `d_j` (gradient descent).
    pub d_range: Option<(f64, f64)>,
    /// Stepsize floor over the initial sublevel set (gradient descent).
    pub eta_floor: Option<f64>,
    /// NGD contraction factor including the constant 4 of the stated rate.
    pub q0: Option<f64>,
    /// NGD contraction factor implied by the gradient-dominance sandwich.
    pub q0_dominance: Option<f64>,
    /// Largest `e_{j+1}/e_j²` over the last three resolvable Kleinman–Newton steps.
    pub quadratic_ratio: Option<f64>,
    /// Lipschitz constant used by projected gradient descent.
    pub lipschitz: Option<f64>,
    /// Iterations at which the adaptive rule fell back to `1/L`.
    pub adaptive_fallbacks: Option<usize>,
    /// `false` when `B` is not of the form `I` or `[I; 0]` (structured runs).
    pub canonical_b: Option<bool>,
}

#[derive(Debug, Clone)]
pub struct Trace {
    pub records: Vec<Record>,
    /// Gains `K_0, K_1, …` when [`DescentOptions::keep_iterates`] is set.
    pub iterates: Vec<DMatrix<f64>>,
    pub status: Status,
    pub reference: Option<Reference>,
    pub info: RunInfo,
}

impl Trace {
    pub fn last(&self) -> &Record {
        self.records.last().expect("traces always hold the initial record")
    }

    pub fn iterations(&self) -> usize {
        self.records.len() - 1
    }

    pub fn converged(&self) -> bool {
        self.status == Status::Converged
    }

    fn fill_gaps(&mut self) {
        if let Some(r) = &self.reference {
            for rec in &mut self.records {
                rec.f_gap = rec.f - r.f_star;
            }
        }
    }
}

#[derive(Debug, Clone)]
pub struct DescentOptions {
    /// Gradient-norm stopping threshold; defaults to `1e−10·max(1, f)`.
    pub tol: Option<f64>,
    pub max_iter: usize,
    pub keep_iterates: bool,
    /// Precomputed optimum; computed by Kleinman–Newton when absent.
    pub reference: Option<Reference>,
}

impl DescentOptions {
    pub fn gradient_descent() -> Self {
        DescentOptions { tol: None, max_iter: 100_000, keep_iterates: true, reference: None }
    }

    pub fn natural_gradient() -> Self {
        DescentOptions { max_iter: 1_000, ..Self::gradient_descent() }
    }

    pub fn kleinman_newton() -> Self {
        DescentOptions { max_iter: 100, tol: Some(REFERENCE_TOL), ..Self::gradient_descent() }
    }

    fn tol_at(&self, f: f64) -> f64 {
        self.tol.unwrap_or_else(|| stationarity_tol(f))
    }
}

/// Stepsize certificate for one gradient step.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepsizeCert {
    pub b: f64,
    pub c: f64,
    pub d: f64,
    pub eta: f64,
    /// Floor implied by the sublevel-set bounds at the current cost.
    pub eta_floor: f64,
}

impl StepsizeCert {
    /// Largest admissible stepsize, `√(1/c + b²/4c²) − b/(2c)`.
    pub fn eta_max(&self) -> f64 {
        (1.0 / self.c + self.b * self.b / (4.0 * self.c * self.c)).sqrt() - self.b / (2.0 * self.c)
    }

    /// Guaranteed decrease `‖∇f‖²_F (η − dη² − dη³)`.
    pub fn guaranteed_decrease(&self, grad_norm: f64) -> f64 {
        let e = self.eta;
        grad_norm * grad_norm * (e - self.d * e * e - self.d * e * e * e)
    }
}

fn eta_from_d(d: f64) -> f64 {
    (1.0 / (3.0 * d) + 1.0 / 9.0).sqrt() - 1.0 / 3.0
}

/// Upper bound `δ` on `d_j = max(b_j, c_j)` over the sublevel set `{f ≤ f0}`.
pub fn d_upper_bound(p: &Plant, f0: f64) -> f64 {
    let lr = lambda_max(&p.r);
    let lq = lambda_min(&p.q);
    let ls = lambda_min(&p.sigma);
    let nb = spectral_norm(&p.b);
    let core = lr + nb * nb * f0 / ls;
    let n_bound = (core * f0).sqrt();
    let b = (lr * f0 + nb * nb * f0 * f0 / ls + 2.0 * f0 * f0 * nb * n_bound / lq) / lq;
    let c = (2.0 * core * nb * f0 * n_bound * f0 / lq) / lq;
    b.max(c)
}

/// Stepsize floor over `{f ≤ f0}`: the certified rule evaluated at `d = δ`.
pub fn stepsize_floor(p: &Plant, f0: f64) -> f64 {
    eta_from_d(d_upper_bound(p, f0))
}

/// Certified gradient-descent stepsize at `eval`.
///
/// Returns [`Error::Converged`] when the gradient factor vanishes, since the
/// certificate degenerates with `c = 0`.
pub fn gd_stepsize(p: &Plant, eval: &Evaluation) -> Result<StepsizeCert> {
    let lq = lambda_min(&p.q);
    let ls = lambda_min(&p.sigma);
    let bny = spectral_norm(&(&p.b * &eval.n * &eval.y));
    let f = eval.f;
    let c = 4.0 * lambda_min(&p.r) * bny * f / (lq * ls);
    if eval.n.norm() <= stationarity_tol(f) || c <= 0.0 {
        return Err(Error::Converged);
    }
    let b = f * lambda_max(&p.r) / lq + 4.0 * bny * f / (lq * ls);
    let d = b.max(c);
    Ok(StepsizeCert { b, c, d, eta: eta_from_d(d), eta_floor: stepsize_floor(p, f) })
}

fn initial(p: &Plant, k0: &DMatrix<f64>) -> Result<Evaluation> {
    evaluate(p, k0)
}

fn next(p: &Plant, k: &DMatrix<f64>, iter: usize) -> Result<Evaluation> {
    evaluate(p, k).map_err(|e| match e {
        Error::NotStabilizing { .. } => Error::CertificateViolated(iter),
        other => other,
    })
}

fn record(iter: usize, e: &Evaluation, stationarity: f64, eta: f64) -> Record {
    Record {
        iter,
        f: e.f,
        f_gap: f64::NAN,
        grad_norm: e.grad_norm(),
        stationarity_norm: stationarity,
        eta,
        abscissa: e.abscissa,
    }
}

fn resolve_reference(p: &Plant, k0: &DMatrix<f64>, opts: &DescentOptions) -> Result<Reference> {
    match &opts.reference {
        Some(r) => Ok(r.clone()),
        None => Reference::from_kleinman_newton(p, k0),
    }
}

/// Gradient descent `K_{j+1} = K_j − η_j ∇f(K_j)` with the certified stepsize.
pub fn gradient_descent(p: &Plant, k0: &DMatrix<f64>, opts: &DescentOptions) -> Result<Trace> {
    gradient_descent_observed(p, k0, opts, |_| {})
}

/// As [`gradient_descent`], calling `observer` on every evaluated iterate.
pub fn gradient_descent_observed(
    p: &Plant,
    k0: &DMatrix<f64>,
    opts: &DescentOptions,
    mut observer: impl FnMut(&Evaluation),
) -> Result<Trace> {
    let mut eval = initial(p, k0)?;
    let reference = resolve_reference(p, k0, opts)?;
    let mut trace = Trace {
        records: Vec::new(),
        iterates: Vec::new(),
        status: Status::MaxIterations,
        reference: Some(reference),
        info: RunInfo {
            min_lambda_y: f64::INFINITY,
            eta_floor: Some(stepsize_floor(p, eval.f)),
            ..RunInfo::default()
        },
    };
    let mut d_range = (f64::INFINITY, f64::NEG_INFINITY);
    for iter in 0.. {
        observer(&eval);
        trace.info.min_lambda_y = trace.info.min_lambda_y.min(lambda_min(&eval.y));
        if opts.keep_iterates {
            trace.iterates.push(eval.k.clone());
        }
        let g = eval.grad_norm();
        if g <= opts.tol_at(eval.f) {
            trace.records.push(record(iter, &eval, g, 0.0));
            trace.status = Status::Converged;
            break;
        }
        let cert = match gd_stepsize(p, &eval) {
            Ok(c) => c,
            Err(Error::Converged) => {
                trace.records.push(record(iter, &eval, g, 0.0));
                trace.status = Status::Converged;
                break;
            }
            Err(e) => return Err(e),
        };
        if iter == opts.max_iter {
            trace.records.push(record(iter, &eval, g, 0.0));
            break;
        }
        trace.records.push(record(iter, &eval, g, cert.eta));
        d_range = (d_range.0.min(cert.d), d_range.1.max(cert.d));
        let k_next = &eval.k - &eval.grad * cert.eta;
        eval = next(p, &k_next, iter + 1)?;
    }
    if d_range.0.is_finite() {
        trace.info.d_range = Some(d_range);
    }
    trace.fill_gaps();
    Ok(trace)
}

/// Natural gradient descent `K_{j+1} = K_j − 2ηN_j` with `η = 1/(2λₙ(R))`.
pub fn natural_gradient_descent(p: &Plant, k0: &DMatrix<f64>, opts: &DescentOptions) -> Result<Trace> {
    natural_gradient_descent_observed(p, k0, opts, |_| {})
}

pub fn natural_gradient_descent_observed(
    p: &Plant,
    k0: &DMatrix<f64>,
    opts: &DescentOptions,
    mut observer: impl FnMut(&Evaluation),
) -> Result<Trace> {
    let mut eval = initial(p, k0)?;
    let reference = resolve_reference(p, k0, opts)?;
    let eta = 1.0 / (2.0 * lambda_max(&p.r));
    let mut trace = Trace {
        records: Vec::new(),
        iterates: Vec::new(),
        status: Status::MaxIterations,
        reference: None,
        info: RunInfo { min_lambda_y: f64::INFINITY, ..RunInfo::default() },
    };
    for iter in 0.. {
        observer(&eval);
        trace.info.min_lambda_y = trace.info.min_lambda_y.min(lambda_min(&eval.y));
        if opts.keep_iterates {
            trace.iterates.push(eval.k.clone());
        }
        let g = eval.grad_norm();
        if g <= opts.tol_at(eval.f) {
            trace.records.push(record(iter, &eval, g, 0.0));
            trace.status = Status::Converged;
            break;
        }
        if iter == opts.max_iter {
            trace.records.push(record(iter, &eval, g, 0.0));
            break;
        }
        trace.records.push(record(iter, &eval, g, eta));
        let k_next = &eval.k - &eval.n * (2.0 * eta);
        if (&k_next - &eval.k).norm() == 0.0 {
            trace.status = Status::Stagnated;
            break;
        }
        eval = next(p, &k_next, iter + 1)?;
    }
    let (q0, q0_dominance) = ngd_contraction(p, trace.info.min_lambda_y, &reference.y_star);
    trace.info.q0 = Some(q0);
    trace.info.q0_dominance = Some(q0_dominance);
    trace.reference = Some(reference);
    trace.fill_gaps();
    Ok(trace)
}

/// NGD contraction factors for a given `μ ≤ λ₁(Y)` over the run.
///
/// The first value includes the constant 4 of the stated rate,
/// `1 − 4μλ₁(R)/(λₙ(Y*)λₙ(R))`; the second drops it, which is what the
/// gradient-dominance sandwich `gap ≤ ‖Y*‖ Tr(NᵀN)/λ₁(R)` actually supports.
pub fn ngd_contraction(p: &Plant, mu: f64, y_star: &DMatrix<f64>) -> (f64, f64) {
    let ratio = mu * lambda_min(&p.r) / (lambda_max(y_star) * lambda_max(&p.r));
    (1.0 - 4.0 * ratio, 1.0 - ratio)
}

/// Kleinman–Newton iteration `K_{j+1} = R⁻¹BᵀX_j`; the returned trace carries
/// its own terminal point as the reference.
pub fn kleinman_newton(p: &Plant, k0: &DMatrix<f64>, opts: &DescentOptions) -> Result<Trace> {
    kleinman_newton_observed(p, k0, opts, |_| {})
}

pub fn kleinman_newton_observed(
    p: &Plant,
    k0: &DMatrix<f64>,
    opts: &DescentOptions,
    observer: impl FnMut(&Evaluation),
) -> Result<Trace> {
    let mut observer = observer;
    let mut trace = Trace {
        records: Vec::new(),
        iterates: Vec::new(),
        status: Status::MaxIterations,
        reference: None,
        info: RunInfo { min_lambda_y: f64::INFINITY, ..RunInfo::default() },
    };
    let (status, last) = kn_loop(p, k0, opts, &mut |e: &Evaluation| {
        observer(e);
        trace.info.min_lambda_y = trace.info.min_lambda_y.min(lambda_min(&e.y));
        if opts.keep_iterates {
            trace.iterates.push(e.k.clone());
        }
        let g = e.grad_norm();
        trace.records.push(record(trace.records.len(), e, g, 0.5));
    })?;
    trace.status = status;
    trace.records.last_mut().expect("at least one record").eta = 0.0;
    let reference = match &opts.reference {
        Some(r) => r.clone(),
        None => Reference::from_evaluation(&last),
    };
    if opts.keep_iterates {
        trace.info.quadratic_ratio = quadratic_ratio(&trace.iterates, &reference.k_star);
    }
    trace.reference = Some(reference);
    trace.fill_gaps();
    Ok(trace)
}

fn kn_loop(
    p: &Plant,
    k0: &DMatrix<f64>,
    opts: &DescentOptions,
    visit: &mut dyn FnMut(&Evaluation),
) -> Result<(Status, Evaluation)> {
    let gain_map = p.r_inverse()? * p.b.transpose();
    let mut eval = initial(p, k0)?;
    for iter in 0.. {
        visit(&eval);
        if eval.grad_norm() <= opts.tol_at(eval.f) {
            return Ok((Status::Converged, eval));
        }
        if iter == opts.max_iter {
            return Ok((Status::MaxIterations, eval));
        }
        let k_next = &gain_map * &eval.x;
        let step = (&k_next - &eval.k).norm();
        if step <= 64.0 * f64::EPSILON * eval.k.norm().max(1.0) {
            return Ok((Status::Stagnated, eval));
        }
        eval = next(p, &k_next, iter + 1)?;
    }
    unreachable!("the loop only exits by returning")
}

/// Largest `e_{j+1}/e_j²` over the last three consecutive pairs whose
/// successor error `e_{j+1} = ‖K_{j+1} − K*‖_F` is above rounding noise.
pub fn quadratic_ratio(iterates: &[DMatrix<f64>], k_star: &DMatrix<f64>) -> Option<f64> {
    let noise = 64.0 * f64::EPSILON * k_star.norm().max(1.0);
    let errs: Vec<f64> = iterates.iter().map(|k| (k - k_star).norm()).collect();
    let ratios: Vec<f64> = errs
        .windows(2)
        .filter(|w| w[1] > noise)
        .map(|w| w[1] / (w[0] * w[0]))
        .collect();
    let tail = &ratios[ratios.len().saturating_sub(3)..];
    tail.iter().copied().reduce(f64::max)
}

/// Residual of the value-difference identity between consecutive gains:
/// `‖A_{K⁺}ᵀZ + ZA_{K⁺} + ΔᵀN + NᵀΔ + ΔᵀRΔ‖_F` with `Z = X⁺ − X`,
/// `Δ = K⁺ − K` and `N` the gradient factor at `K`.
pub fn value_difference_residual(p: &Plant, kj: &DMatrix<f64>, kj1: &DMatrix<f64>) -> Result<f64> {
    let e0 = evaluate(p, kj)?;
    let e1 = evaluate(p, kj1)?;
    Ok(value_difference_residual_of(p, &e0, &e1))
}

pub fn value_difference_residual_of(p: &Plant, e0: &Evaluation, e1: &Evaluation) -> f64 {
    let z = &e1.x - &e0.x;
    let delta = &e1.k - &e0.k;
    let a1 = p.closed_loop(&e1.k);
    let dn = delta.transpose() * &e0.n;
    let res = a1.transpose() * &z + &z * &a1 + &dn + dn.transpose() + delta.transpose() * &p.r * &delta;
    symmetrize(&res).norm()
}
