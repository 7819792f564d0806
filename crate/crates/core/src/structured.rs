//! Sparsity-constrained synthesis over the subspace of gains with a fixed
//! zero pattern.
//!
//! Entries outside the pattern are forced to zero; entries inside are free
//! (they may still end up zero). Projection onto the subspace is entrywise
//! masking, which is the orthogonal projection for the Frobenius inner
//! product.

use nalgebra::DMatrix;
use rand::Rng;

use crate::benchmarks::Graph;
use crate::descent::{Record, Reference, RunInfo, Status, Trace};
use crate::error::{Error, Result};
use crate::linalg::{lambda_max, lambda_min, spectral_norm};
use crate::lqr::{evaluate, hessian_quadratic_form, Evaluation, Plant};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SparsityPattern {
    mask: DMatrix<bool>,
}

impl SparsityPattern {
    pub fn from_mask(mask: DMatrix<bool>) -> Result<Self> {
        if !mask.iter().any(|&b| b) {
            return Err(Error::EmptyPattern);
        }
        Ok(SparsityPattern { mask })
    }

    pub fn full(rows: usize, cols: usize) -> Self {
        SparsityPattern { mask: DMatrix::from_element(rows, cols, true) }
    }

    pub fn shape(&self) -> (usize, usize) {
        self.mask.shape()
    }

    /// 0-indexed lookup.
    pub fn allows(&self, i: usize, j: usize) -> bool {
        self.mask[(i, j)]
    }

    pub fn allowed_count(&self) -> usize {
        self.mask.iter().filter(|&&b| b).count()
    }

    pub fn is_full(&self) -> bool {
        self.mask.iter().all(|&b| b)
    }

    /// `true` iff every off-pattern entry of `k` is exactly zero.
    pub fn contains(&self, k: &DMatrix<f64>) -> bool {
        k.shape() == self.shape() && k.iter().zip(self.mask.iter()).all(|(&v, &m)| m || v == 0.0)
    }

    /// Parses either a `rows × cols` grid of `0`/`1` tokens or a graph file
    /// (`n e` header, then `i j` edges) that is turned into a pattern with
    /// [`pattern_from_graph`].
    pub fn parse(text: &str, rows: usize, cols: usize) -> Result<Self> {
        let grid: Vec<Vec<&str>> = text
            .lines()
            .map(|l| l.split_whitespace().collect::<Vec<_>>())
            .filter(|t| !t.is_empty())
            .collect();
        let is_mask = grid.len() == rows
            && grid.iter().all(|r| r.len() == cols && r.iter().all(|t| *t == "0" || *t == "1"));
        if is_mask {
            let mask = DMatrix::from_fn(rows, cols, |i, j| grid[i][j] == "1");
            return SparsityPattern::from_mask(mask);
        }
        let graph: Graph = text.parse()?;
        pattern_from_graph(&graph, rows, cols)
    }
}

impl std::fmt::Display for SparsityPattern {
    /// Row-major `0`/`1` grid.
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        for i in 0..self.mask.nrows() {
            let row: Vec<&str> = (0..self.mask.ncols()).map(|j| if self.mask[(i, j)] { "1" } else { "0" }).collect();
            writeln!(f, "{}", row.join(" "))?;
        }
        Ok(())
    }
}

/// Pattern for an `m × n` gain on graph `g`: entry `(i, j)` is allowed iff
/// `i = j` or `{i, j}` is an edge. Row `i` is the input attached to node `i`.
pub fn pattern_from_graph(g: &Graph, m: usize, n: usize) -> Result<SparsityPattern> {
    if n != g.node_count() || m > n {
        return Err(Error::Dimension(format!(
            "pattern {m}x{n} incompatible with a graph on {} nodes",
            g.node_count()
        )));
    }
    let mask = DMatrix::from_fn(m, n, |i, j| i == j || g.has_edge(i + 1, j + 1));
    SparsityPattern::from_mask(mask)
}

/// Zeroes every entry of `k` outside the pattern.
pub fn project(k: &DMatrix<f64>, pat: &SparsityPattern) -> DMatrix<f64> {
    assert_eq!(k.shape(), pat.shape(), "gain and pattern shapes differ");
    k.zip_map(&pat.mask, |v, m| if m { v } else { 0.0 })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LipschitzCert {
    pub a: f64,
    pub l: f64,
    pub step: f64,
}

fn require_q_pd(p: &Plant) -> Result<f64> {
    let lq = lambda_min(&p.q);
    if lq <= crate::lqr::DEFINITENESS_TOL * p.q.norm().max(1.0) {
        return Err(Error::SingularQ(lq));
    }
    Ok(lq)
}

/// Bound on the Hessian norm over the sublevel set `{f ≤ f0}`.
///
/// `a = max(1, (f0²/λ_min(Σ) + λ_max(BᵀB) + λ_max(R)) / λ_min(Q))` and
/// `L = (2λ_max(R) + 2‖B‖₂ a f0/λ_min(Σ)) · f0 λ_max(Σ) / (λ_min(Σ) λ_min(Q))`.
pub fn lipschitz_bound(p: &Plant, f0: f64) -> Result<LipschitzCert> {
    let lq = require_q_pd(p)?;
    let ls = lambda_min(&p.sigma);
    let nb = spectral_norm(&p.b);
    let lr = lambda_max(&p.r);
    let a = ((f0 * f0 / ls + nb * nb + lr) / lq).max(1.0);
    let l = (2.0 * lr + 2.0 * nb * a * f0 / ls) * f0 * lambda_max(&p.sigma) / (ls * lq);
    Ok(LipschitzCert { a, l, step: 1.0 / l })
}

/// Per-iterate Lipschitz estimate
/// `(2‖R‖ + 2‖B‖(‖X‖² + ‖R‖ + ‖B‖² + ‖KᵀRK‖)) · Tr(X) λ_max(Σ) / λ_min(Q)`.
pub fn adaptive_lipschitz(p: &Plant, eval: &Evaluation) -> Result<f64> {
    let lq = require_q_pd(p)?;
    let nr = spectral_norm(&p.r);
    let nb = spectral_norm(&p.b);
    let nx = spectral_norm(&eval.x);
    let krk = spectral_norm(&(eval.k.transpose() * &p.r * &eval.k));
    Ok((2.0 * nr + 2.0 * nb * (nx * nx + nr + nb * nb + krk)) * eval.x.trace() * lambda_max(&p.sigma) / lq)
}

/// `true` when `B` is `I` or `[I; 0]`.
pub fn is_canonical_input(b: &DMatrix<f64>) -> bool {
    let (n, m) = b.shape();
    m <= n && (0..n).all(|i| (0..m).all(|j| b[(i, j)] == if i == j { 1.0 } else { 0.0 }))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum StepRule {
    /// `1/L` from [`lipschitz_bound`] at `f(K₀)`.
    #[default]
    Constant,
    /// `1/L_j` from [`adaptive_lipschitz`] while `L_j ≤ L`, else `1/L`.
    Adaptive,
}

#[derive(Debug, Clone)]
pub struct PgdOptions {
    pub step: StepRule,
    /// Stop once `‖P_U ∇f‖_F` reaches this value.
    pub tol: f64,
    pub max_iter: usize,
    pub keep_iterates: bool,
    pub reference: Option<Reference>,
}

impl Default for PgdOptions {
    fn default() -> Self {
        PgdOptions { step: StepRule::Constant, tol: 1e-6, max_iter: 500_000, keep_iterates: false, reference: None }
    }
}

/// Projected gradient descent `K_{j+1} = K_j − t P_U(∇f(K_j))`.
///
/// The `f_gap` column is measured against the unstructured optimum.
pub fn projected_gradient_descent(
    p: &Plant,
    pat: &SparsityPattern,
    k0: &DMatrix<f64>,
    opts: &PgdOptions,
) -> Result<Trace> {
    projected_gradient_descent_observed(p, pat, k0, opts, |_, _| {})
}

/// As [`projected_gradient_descent`]; `observer` receives each evaluation and
/// its projected gradient.
pub fn projected_gradient_descent_observed(
    p: &Plant,
    pat: &SparsityPattern,
    k0: &DMatrix<f64>,
    opts: &PgdOptions,
    mut observer: impl FnMut(&Evaluation, &DMatrix<f64>),
) -> Result<Trace> {
    p.check_gain(k0)?;
    if pat.shape() != k0.shape() {
        return Err(Error::Dimension("pattern and gain shapes differ".into()));
    }
    if !pat.contains(k0) {
        return Err(Error::OffPattern);
    }
    let mut eval = evaluate(p, k0)?;
    let reference = match &opts.reference {
        Some(r) => r.clone(),
        None => Reference::from_kleinman_newton(p, k0)?,
    };
    let cert = lipschitz_bound(p, eval.f)?;
    let canonical = is_canonical_input(&p.b);
    if !canonical {
        log::warn!("input matrix is not I or [I; 0]; structured guarantees are not claimed");
    }
    let mut trace = Trace {
        records: Vec::new(),
        iterates: Vec::new(),
        status: Status::MaxIterations,
        reference: Some(reference),
        info: RunInfo {
            min_lambda_y: f64::INFINITY,
            lipschitz: Some(cert.l),
            canonical_b: Some(canonical),
            ..RunInfo::default()
        },
    };
    let mut fallbacks = 0usize;
    for iter in 0.. {
        let pg = project(&eval.grad, pat);
        observer(&eval, &pg);
        trace.info.min_lambda_y = trace.info.min_lambda_y.min(lambda_min(&eval.y));
        if opts.keep_iterates {
            trace.iterates.push(eval.k.clone());
        }
        let s = pg.norm();
        let mut rec = Record {
            iter,
            f: eval.f,
            f_gap: f64::NAN,
            grad_norm: eval.grad_norm(),
            stationarity_norm: s,
            eta: 0.0,
            abscissa: eval.abscissa,
        };
        if s <= opts.tol {
            trace.records.push(rec);
            trace.status = Status::Converged;
            break;
        }
        if iter == opts.max_iter {
            trace.records.push(rec);
            break;
        }
        let t = match opts.step {
            StepRule::Constant => cert.step,
            StepRule::Adaptive => {
                let lj = adaptive_lipschitz(p, &eval)?;
                if lj <= cert.l {
                    1.0 / lj
                } else {
                    fallbacks += 1;
                    cert.step
                }
            }
        };
        rec.eta = t;
        trace.records.push(rec);
        let k_next = &eval.k - pg * t;
        eval = evaluate(p, &k_next).map_err(|e| match e {
            Error::NotStabilizing { .. } => Error::CertificateViolated(iter + 1),
            other => other,
        })?;
    }
    if opts.step == StepRule::Adaptive {
        if fallbacks > 0 {
            log::info!("adaptive step fell back to 1/L on {fallbacks} iterations");
        }
        trace.info.adaptive_fallbacks = Some(fallbacks);
    }
    if let Some(r) = &trace.reference {
        let f_star = r.f_star;
        for rec in &mut trace.records {
            rec.f_gap = rec.f - f_star;
        }
    }
    Ok(trace)
}

/// Largest sampled curvature `∇²f(K)[E, E]/‖E‖_F²` over `samples` random
/// directions supported on `pat`, entries uniform in `[−1, 1]`.
pub fn sample_restricted_curvature<R: Rng>(
    p: &Plant,
    eval: &Evaluation,
    pat: &SparsityPattern,
    samples: usize,
    rng: &mut R,
) -> Result<f64> {
    let (rows, cols) = pat.shape();
    let mut worst = f64::NEG_INFINITY;
    for _ in 0..samples {
        let e = DMatrix::from_fn(rows, cols, |i, j| if pat.allows(i, j) { rng.gen_range(-1.0..=1.0) } else { 0.0 });
        let norm2 = e.norm_squared();
        if norm2 == 0.0 {
            continue;
        }
        worst = worst.max(hessian_quadratic_form(p, eval, &e)? / norm2);
    }
    Ok(worst)
}
