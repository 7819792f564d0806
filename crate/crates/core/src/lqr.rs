//! The LQR cost as a function of the feedback gain.
//!
//! For a gain `K` with `A − BK` Hurwitz, the value matrix `X` solves
//! `(A − BK)ᵀX + X(A − BK) + KᵀRK + Q = 0`, the dual Gramian `Y` solves
//! `(A − BK)Y + Y(A − BK)ᵀ + Σ = 0`, and
//!
//! ```text
//! f(K)  = Tr(XΣ)
//! N(K)  = RK − BᵀX
//! ∇f(K) = 2 N Y
//! ```
//!
//! Eigenvalues are indexed ascending throughout: λ₁ is the smallest.

use std::fmt;

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::linalg::{
    is_symmetric, lambda_max, lambda_min, solve_lyapunov, spectral_norm, symmetrize, SchurLyapunov,
    SYMMETRY_TOL,
};

/// Slack used when classifying Q as PSD and R, Σ as PD.
pub const DEFINITENESS_TOL: f64 = 1e-12;

/// Gradient norm below which an evaluation counts as stationary.
pub fn stationarity_tol(f: f64) -> f64 {
    1e-10 * f.max(1.0)
}

/// A continuous-time LQR problem instance `(A, B, Q, R, Σ)`.
#[derive(Debug, Clone, PartialEq)]
pub struct Plant {
    pub a: DMatrix<f64>,
    pub b: DMatrix<f64>,
    pub q: DMatrix<f64>,
    pub r: DMatrix<f64>,
    pub sigma: DMatrix<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Violation {
    Dimension(String),
    NonFinite(&'static str),
    NotSymmetric(&'static str),
    QNotPsd,
    RNotPd,
    SigmaNotPd,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::Dimension(msg) => write!(f, "dimension mismatch: {msg}"),
            Violation::NonFinite(name) => write!(f, "{name} has non-finite entries"),
            Violation::NotSymmetric(name) => write!(f, "{name} not symmetric"),
            Violation::QNotPsd => f.write_str("Q not PSD"),
            Violation::RNotPd => f.write_str("R not PD"),
            Violation::SigmaNotPd => f.write_str("Sigma not PD"),
        }
    }
}

/// Every invariant a plant violates; empty iff the plant is valid.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ValidityReport {
    pub violations: Vec<Violation>,
    /// Rank of `[B, AB, …, Aⁿ⁻¹B]`; reported, never enforced.
    pub controllability_rank: Option<usize>,
}

impl ValidityReport {
    pub fn is_valid(&self) -> bool {
        self.violations.is_empty()
    }
}

impl fmt::Display for ValidityReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.violations.is_empty() {
            return f.write_str("valid");
        }
        let msgs: Vec<String> = self.violations.iter().map(ToString::to_string).collect();
        f.write_str(&msgs.join("; "))
    }
}

impl Plant {
    /// Builds a plant and rejects it if [`validate_plant`] reports anything.
    pub fn new(
        a: DMatrix<f64>,
        b: DMatrix<f64>,
        q: DMatrix<f64>,
        r: DMatrix<f64>,
        sigma: DMatrix<f64>,
    ) -> Result<Self> {
        let plant = Plant { a, b, q, r, sigma };
        let report = validate_plant(&plant);
        if !report.is_valid() {
            return Err(Error::InvalidPlant(report.to_string()));
        }
        Ok(Plant {
            q: symmetrize(&plant.q),
            r: symmetrize(&plant.r),
            sigma: symmetrize(&plant.sigma),
            ..plant
        })
    }

    /// Plant with `Σ = I`.
    pub fn with_identity_sigma(
        a: DMatrix<f64>,
        b: DMatrix<f64>,
        q: DMatrix<f64>,
        r: DMatrix<f64>,
    ) -> Result<Self> {
        let n = a.nrows();
        Plant::new(a, b, q, r, DMatrix::identity(n, n))
    }

    pub fn n_states(&self) -> usize {
        self.a.nrows()
    }

    pub fn n_inputs(&self) -> usize {
        self.b.ncols()
    }

    pub fn closed_loop(&self, k: &DMatrix<f64>) -> DMatrix<f64> {
        &self.a - &self.b * k
    }

    pub fn zero_gain(&self) -> DMatrix<f64> {
        DMatrix::zeros(self.n_inputs(), self.n_states())
    }

    pub fn check_gain(&self, k: &DMatrix<f64>) -> Result<()> {
        if k.shape() != (self.n_inputs(), self.n_states()) {
            return Err(Error::Dimension(format!(
                "gain is {}x{}, expected {}x{}",
                k.nrows(),
                k.ncols(),
                self.n_inputs(),
                self.n_states()
            )));
        }
        if k.iter().any(|v| !v.is_finite()) {
            return Err(Error::Dimension("gain has non-finite entries".into()));
        }
        Ok(())
    }

    /// `R⁻¹`, computed once per call.
    pub fn r_inverse(&self) -> Result<DMatrix<f64>> {
        self.r
            .clone()
            .cholesky()
            .map(|c| c.inverse())
            .ok_or_else(|| Error::SingularSystem("R is not positive definite".into()))
    }
}

fn controllability_rank(a: &DMatrix<f64>, b: &DMatrix<f64>) -> usize {
    let (n, m) = (a.nrows(), b.ncols());
    let mut ctrb = DMatrix::<f64>::zeros(n, n * m);
    let mut block = b.clone();
    for i in 0..n {
        ctrb.view_mut((0, i * m), (n, m)).copy_from(&block);
        block = a * block;
    }
    let sv = ctrb.singular_values();
    let tol = sv.max() * (n * m) as f64 * f64::EPSILON;
    sv.iter().filter(|&&s| s > tol).count()
}

/// Checks dimensions, symmetry and definiteness of a plant.
pub fn validate_plant(p: &Plant) -> ValidityReport {
    let mut violations = Vec::new();
    let n = p.a.nrows();
    let named = [("A", &p.a), ("B", &p.b), ("Q", &p.q), ("R", &p.r), ("Sigma", &p.sigma)];
    for (name, mat) in named {
        if mat.iter().any(|v| !v.is_finite()) {
            violations.push(Violation::NonFinite(name));
        }
    }
    if !violations.is_empty() {
        return ValidityReport { violations, controllability_rank: None };
    }

    if n == 0 || !p.a.is_square() {
        violations.push(Violation::Dimension(format!("A is {}x{}", p.a.nrows(), p.a.ncols())));
    }
    if p.b.nrows() != n || p.b.ncols() == 0 {
        violations.push(Violation::Dimension(format!(
            "B is {}x{}, expected {n} rows",
            p.b.nrows(),
            p.b.ncols()
        )));
    }
    let m = p.b.ncols();
    let shapes = [("Q", &p.q, n), ("R", &p.r, m), ("Sigma", &p.sigma, n)];
    for (name, mat, size) in shapes {
        if mat.shape() != (size, size) {
            violations.push(Violation::Dimension(format!(
                "{name} is {}x{}, expected {size}x{size}",
                mat.nrows(),
                mat.ncols()
            )));
        }
    }
    if !violations.is_empty() {
        return ValidityReport { violations, controllability_rank: None };
    }

    for (name, mat) in [("Q", &p.q), ("R", &p.r), ("Sigma", &p.sigma)] {
        if !is_symmetric(mat, SYMMETRY_TOL) {
            violations.push(Violation::NotSymmetric(name));
        }
    }
    let scaled = |m: &DMatrix<f64>| DEFINITENESS_TOL * m.norm().max(1.0);
    if lambda_min(&p.q) < -scaled(&p.q) {
        violations.push(Violation::QNotPsd);
    }
    if lambda_min(&p.r) <= scaled(&p.r) {
        violations.push(Violation::RNotPd);
    }
    if lambda_min(&p.sigma) <= scaled(&p.sigma) {
        violations.push(Violation::SigmaNotPd);
    }
    ValidityReport { violations, controllability_rank: Some(controllability_rank(&p.a, &p.b)) }
}

/// Everything computed at one stabilizing gain.
#[derive(Debug, Clone)]
pub struct Evaluation {
    pub k: DMatrix<f64>,
    /// Value matrix.
    pub x: DMatrix<f64>,
    /// Dual Gramian.
    pub y: DMatrix<f64>,
    /// Gradient factor `RK − BᵀX`.
    pub n: DMatrix<f64>,
    pub f: f64,
    pub grad: DMatrix<f64>,
    /// Spectral abscissa of `A − BK`.
    pub abscissa: f64,
}

impl Evaluation {
    pub fn grad_norm(&self) -> f64 {
        self.grad.norm()
    }

    pub fn is_stationary(&self) -> bool {
        self.grad_norm() <= stationarity_tol(self.f)
    }
}

/// Evaluates cost, value matrix, dual Gramian and gradient at `k`.
pub fn evaluate(p: &Plant, k: &DMatrix<f64>) -> Result<Evaluation> {
    p.check_gain(k)?;
    let a_k = p.closed_loop(k);
    let solver = SchurLyapunov::new(&a_k).map_err(stabilizing)?;
    let abscissa = solver.abscissa();
    let rhs = &p.q + k.transpose() * &p.r * k;
    let x = solver.solve(&symmetrize(&rhs))?;
    let y = solver.solve_dual(&p.sigma)?;
    let n = &p.r * k - p.b.transpose() * &x;
    let grad = &n * &y * 2.0;
    let f = x.component_mul(&p.sigma).sum();
    Ok(Evaluation { k: k.clone(), x, y, n, f, grad, abscissa })
}

fn stabilizing(e: Error) -> Error {
    match e {
        Error::NotHurwitz { abscissa } => Error::NotStabilizing { abscissa },
        other => other,
    }
}

/// Directional derivative `X′(K)[E]`, the solution of
/// `A_KᵀX′ + X′A_K + EᵀN + NᵀE = 0` with `N = RK − BᵀX`.
pub fn x_prime(p: &Plant, k: &DMatrix<f64>, e: &DMatrix<f64>, x: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    p.check_gain(k)?;
    p.check_gain(e)?;
    let a_k = p.closed_loop(k);
    let n = &p.r * k - p.b.transpose() * x;
    let rhs = e.transpose() * &n + n.transpose() * e;
    solve_lyapunov(&a_k, &symmetrize(&rhs)).map_err(stabilizing)
}

/// `∇²f(K)[E, E] = 2Tr(EᵀREY) − 4Tr(EᵀBᵀX′(K)[E]Y)`.
pub fn hessian_quadratic_form(p: &Plant, eval: &Evaluation, e: &DMatrix<f64>) -> Result<f64> {
    let xp = x_prime(p, &eval.k, e, &eval.x)?;
    let et = e.transpose();
    let first = (&et * &p.r * e * &eval.y).trace();
    let second = (&et * p.b.transpose() * xp * &eval.y).trace();
    Ok(2.0 * first - 4.0 * second)
}

/// Lower bound on `f(K)` that grows with `‖K‖_F`, certifying coercivity:
/// `λ_min(Σ)(λ_min(R)‖K‖²_F + Tr Q) / (2‖A‖_F + 2‖B‖_F‖K‖_F)`.
pub fn coercivity_lower_bound(p: &Plant, k: &DMatrix<f64>) -> f64 {
    let kn = k.norm();
    lambda_min(&p.sigma) * (lambda_min(&p.r) * kn * kn + p.q.trace())
        / (2.0 * p.a.norm() + 2.0 * p.b.norm() * kn)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GapBounds {
    pub lower: f64,
    pub upper: f64,
}

impl GapBounds {
    pub fn contains(&self, gap: f64, tol: f64) -> bool {
        self.lower - tol <= gap && gap <= self.upper + tol
    }
}

fn require_optimal(opt: &Evaluation) -> Result<()> {
    let grad_norm = opt.grad_norm();
    if grad_norm > stationarity_tol(opt.f) {
        return Err(Error::NotOptimal { grad_norm });
    }
    Ok(())
}

/// Quadratic-growth and gradient-dominance sandwich for `f(K) − f(K*)`:
/// `λ₁(Y)λ₁(R)‖K − K*‖²_F ≤ gap ≤ ‖Y*‖₂ Tr(NᵀN) / λ₁(R)`.
pub fn gap_bounds(p: &Plant, eval: &Evaluation, opt: &Evaluation) -> Result<GapBounds> {
    require_optimal(opt)?;
    let lr = lambda_min(&p.r);
    let dk = (&eval.k - &opt.k).norm();
    let lower = lambda_min(&eval.y) * lr * dk * dk;
    let upper = spectral_norm(&opt.y) / lr * eval.n.norm_squared();
    Ok(GapBounds { lower, upper })
}

/// Pointwise gradient-dominance bound
/// `‖Y*‖₂ ‖∇f(K)‖²_F / (4 λ₁(R) λ₁(Y(K))²)`.
pub fn gradient_dominance_bound(p: &Plant, eval: &Evaluation, opt: &Evaluation) -> Result<f64> {
    require_optimal(opt)?;
    let ly = lambda_min(&eval.y);
    Ok(spectral_norm(&opt.y) * eval.grad.norm_squared() / (4.0 * lambda_min(&p.r) * ly * ly))
}

/// `Tr((K − K*)ᵀR(K − K*)Y(K))`, which equals `f(K) − f(K*)` exactly.
pub fn exact_gap(p: &Plant, eval: &Evaluation, k_star: &DMatrix<f64>) -> f64 {
    let d = &eval.k - k_star;
    (d.transpose() * &p.r * d * &eval.y).trace()
}

/// Bound on `Tr(Y)` over the sublevel set `{f ≤ f0}`.
pub fn trace_y_bound(p: &Plant, f0: f64) -> f64 {
    f0 * lambda_max(&p.sigma) / (lambda_min(&p.q) * lambda_min(&p.sigma))
}

/// Bound on `‖Y(K′)‖₂` for `K′` in the sublevel set `{f ≤ fk}`.
pub fn y_theta_bound(p: &Plant, fk: f64) -> f64 {
    fk / lambda_min(&p.q)
}

/// Bound on `‖dY/dθ‖₂` along `K − 2θNY` inside the sublevel set; `dir_norm`
/// is `‖BNY‖₂` at the base gain.
pub fn y_prime_bound(p: &Plant, fk: f64, dir_norm: f64) -> f64 {
    4.0 * dir_norm * fk / (lambda_min(&p.q) * lambda_min(&p.sigma))
}

/// Frobenius norm of `AᵀX + XA − XBR⁻¹BᵀX + Q`.
pub fn are_residual(p: &Plant, x: &DMatrix<f64>) -> Result<f64> {
    let rinv = p.r_inverse()?;
    let bt_x = p.b.transpose() * x;
    let res = p.a.transpose() * x + x * &p.a - bt_x.transpose() * rinv * bt_x + &p.q;
    Ok(res.norm())
}
