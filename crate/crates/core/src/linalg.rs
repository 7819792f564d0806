//! Dense kernels shared by every solver: Lyapunov equations, spectral tests
//! and Loewner-order comparisons.
//!
//! Matrices are plain `nalgebra::DMatrix<f64>`. Symmetric inputs are checked
//! against [`SYMMETRY_TOL`] and symmetric outputs are explicitly symmetrized
//! before they are returned.

use nalgebra::{DMatrix, DVector, Schur, SymmetricEigen};

use crate::error::{Error, Result};

/// Tolerance on `‖M − Mᵀ‖_F / max(1, ‖M‖_F)` for a matrix to count as symmetric.
pub const SYMMETRY_TOL: f64 = 1e-8;

/// Eigenvalue slack used by the Hurwitz test.
pub const EIGEN_TOL: f64 = 1e-12;

/// Relative residual above which a Lyapunov solve is reported as singular.
pub const LYAPUNOV_RTOL: f64 = 1e-8;

const SCHUR_EPS_LADDER: [f64; 4] = [f64::EPSILON, 1e-15, 1e-14, 1e-13];

/// Which algorithm backs [`solve_lyapunov_with`].
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub enum LyapunovMethod {
    /// Real Schur form followed by block back-substitution, O(n³).
    #[default]
    BartelsStewart,
    /// Dense solve of the n²×n² vectorized system, O(n⁶).
    Kronecker,
}

pub fn symmetrize(m: &DMatrix<f64>) -> DMatrix<f64> {
    (m + m.transpose()) * 0.5
}

pub fn is_symmetric(m: &DMatrix<f64>, tol: f64) -> bool {
    m.is_square() && (m - m.transpose()).norm() <= tol * m.norm().max(1.0)
}

/// Frobenius inner product `Tr(AᵀB)`.
pub fn frobenius_inner(a: &DMatrix<f64>, b: &DMatrix<f64>) -> f64 {
    a.component_mul(b).sum()
}

/// Eigenvalues of a symmetric matrix, ascending.
pub fn sym_eigenvalues(m: &DMatrix<f64>) -> DVector<f64> {
    let mut ev: Vec<f64> = SymmetricEigen::new(symmetrize(m)).eigenvalues.iter().copied().collect();
    ev.sort_by(|a, b| a.total_cmp(b));
    DVector::from_vec(ev)
}

/// Smallest eigenvalue of a symmetric matrix (λ₁ in ascending convention).
pub fn lambda_min(m: &DMatrix<f64>) -> f64 {
    sym_eigenvalues(m)[0]
}

/// Largest eigenvalue of a symmetric matrix (λₙ).
pub fn lambda_max(m: &DMatrix<f64>) -> f64 {
    let ev = sym_eigenvalues(m);
    ev[ev.len() - 1]
}

/// Largest singular value.
pub fn spectral_norm(m: &DMatrix<f64>) -> f64 {
    if m.is_empty() {
        return 0.0;
    }
    m.singular_values().max()
}

/// `M^p` for symmetric positive semidefinite `M`, with eigenvalues clamped
/// below at `floor` before exponentiation.
pub fn sym_power(m: &DMatrix<f64>, p: f64, floor: f64) -> DMatrix<f64> {
    let eig = SymmetricEigen::new(symmetrize(m));
    let scaled = eig.eigenvalues.map(|l| l.max(floor).powf(p));
    let v = &eig.eigenvectors;
    symmetrize(&(v * DMatrix::from_diagonal(&scaled) * v.transpose()))
}

/// `true` iff `P ⪯ Q` up to `tol`, i.e. `λ_min(Q − P) ≥ −tol`.
pub fn loewner_leq(p: &DMatrix<f64>, q: &DMatrix<f64>, tol: f64) -> bool {
    lambda_min(&(q - p)) >= -tol
}

fn check_square(a: &DMatrix<f64>, what: &str) -> Result<()> {
    if !a.is_square() || a.nrows() == 0 {
        return Err(Error::Dimension(format!(
            "{what} must be square and non-empty, got {}x{}",
            a.nrows(),
            a.ncols()
        )));
    }
    Ok(())
}

fn real_schur(a: &DMatrix<f64>) -> Result<(DMatrix<f64>, DMatrix<f64>)> {
    let max_iter = 200 * a.nrows().max(10);
    // Tight deflation can stall on clustered eigenvalues; loosen it a little
    // at a time, then retry on shifted copies (same Schur vectors).
    for eps in SCHUR_EPS_LADDER {
        if let Some(s) = Schur::try_new(a.clone(), eps, max_iter) {
            return Ok(s.unpack());
        }
    }
    let n = a.nrows();
    let scale = 1.0 + a.norm();
    for shift in [scale, -scale] {
        for eps in SCHUR_EPS_LADDER {
            let shifted = a + DMatrix::<f64>::identity(n, n) * shift;
            if let Some(s) = Schur::try_new(shifted, eps, max_iter) {
                let (z, t) = s.unpack();
                return Ok((z, t - DMatrix::<f64>::identity(n, n) * shift));
            }
        }
    }
    Err(Error::EigenFailure)
}

/// Diagonal blocks `(start, size)` of a quasi-upper-triangular matrix.
fn schur_blocks(t: &DMatrix<f64>) -> Vec<(usize, usize)> {
    let n = t.nrows();
    let mut blocks = Vec::with_capacity(n);
    let mut i = 0;
    while i < n {
        if i + 1 < n && t[(i + 1, i)] != 0.0 {
            blocks.push((i, 2));
            i += 2;
        } else {
            blocks.push((i, 1));
            i += 1;
        }
    }
    blocks
}

fn abscissa_from_schur(t: &DMatrix<f64>) -> f64 {
    schur_blocks(t)
        .into_iter()
        .map(|(s, size)| {
            if size == 1 {
                return t[(s, s)];
            }
            let (a, b, c, d) = (t[(s, s)], t[(s, s + 1)], t[(s + 1, s)], t[(s + 1, s + 1)]);
            let half_trace = 0.5 * (a + d);
            let disc = 0.25 * (a - d) * (a - d) + b * c;
            if disc > 0.0 {
                half_trace + disc.sqrt()
            } else {
                half_trace
            }
        })
        .fold(f64::NEG_INFINITY, f64::max)
}

/// Largest real part over the eigenvalues of `a`.
pub fn spectral_abscissa(a: &DMatrix<f64>) -> Result<f64> {
    check_square(a, "matrix")?;
    let (_, t) = real_schur(a)?;
    Ok(abscissa_from_schur(&t))
}

/// `true` iff every eigenvalue of `a` has real part below `−margin`.
pub fn is_hurwitz(a: &DMatrix<f64>, margin: f64) -> Result<bool> {
    Ok(spectral_abscissa(a)? < -(margin + EIGEN_TOL))
}

/// Frobenius norm of `AᵀX + XA + Q`.
pub fn lyapunov_residual(a: &DMatrix<f64>, x: &DMatrix<f64>, q: &DMatrix<f64>) -> f64 {
    (a.transpose() * x + x * a + q).norm()
}

/// Solves `AᵀX + XA + Q = 0` for Hurwitz `A` and symmetric `Q`.
pub fn solve_lyapunov(a: &DMatrix<f64>, q: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    solve_lyapunov_with(LyapunovMethod::default(), a, q)
}

/// Solves the dual equation `AY + YAᵀ + S = 0`.
pub fn solve_lyapunov_dual(a: &DMatrix<f64>, s: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    SchurLyapunov::new(a)?.solve_dual(s)
}

pub fn solve_lyapunov_with(
    method: LyapunovMethod,
    a: &DMatrix<f64>,
    q: &DMatrix<f64>,
) -> Result<DMatrix<f64>> {
    check_square(a, "A")?;
    let q = checked_rhs(a, q)?;
    let x = match method {
        LyapunovMethod::BartelsStewart => bartels_stewart(a, &q)?,
        LyapunovMethod::Kronecker => {
            let abscissa = spectral_abscissa(a)?;
            if abscissa >= -EIGEN_TOL {
                return Err(Error::NotHurwitz { abscissa });
            }
            kronecker(a, &q)?
        }
    };
    check_residual(a, &x, &q)?;
    Ok(x)
}

fn kronecker(a: &DMatrix<f64>, q: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let n = a.nrows();
    let eye = DMatrix::<f64>::identity(n, n);
    let at = a.transpose();
    // vec(AᵀX) = (I ⊗ Aᵀ) vec X, vec(XA) = (Aᵀ ⊗ I) vec X
    let op = eye.kronecker(&at) + at.kronecker(&eye);
    let rhs = DVector::from_iterator(n * n, q.iter().map(|v| -v));
    let sol = op
        .lu()
        .solve(&rhs)
        .ok_or_else(|| Error::SingularSystem("vectorized Lyapunov operator".into()))?;
    Ok(symmetrize(&DMatrix::from_column_slice(n, n, sol.as_slice())))
}

fn bartels_stewart(a: &DMatrix<f64>, q: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    SchurLyapunov::new(a)?.solve_unchecked(q)
}

/// Real Schur factorization `A = U T Uᵀ` of a Hurwitz matrix, reused for the
/// primal and dual Lyapunov equations and the spectral abscissa.
#[derive(Debug, Clone)]
pub struct SchurLyapunov {
    a: DMatrix<f64>,
    u: DMatrix<f64>,
    t: DMatrix<f64>,
    blocks: Vec<(usize, usize)>,
    abscissa: f64,
}

impl SchurLyapunov {
    /// Factors `a`; fails with [`Error::NotHurwitz`] unless it is Hurwitz.
    pub fn new(a: &DMatrix<f64>) -> Result<Self> {
        check_square(a, "A")?;
        let (u, t) = real_schur(a)?;
        let abscissa = abscissa_from_schur(&t);
        if abscissa >= -EIGEN_TOL {
            return Err(Error::NotHurwitz { abscissa });
        }
        let blocks = schur_blocks(&t);
        Ok(SchurLyapunov { a: a.clone(), u, t, blocks, abscissa })
    }

    pub fn abscissa(&self) -> f64 {
        self.abscissa
    }

    /// Solves `AᵀX + XA + Q = 0`, checking the residual.
    pub fn solve(&self, q: &DMatrix<f64>) -> Result<DMatrix<f64>> {
        let q = checked_rhs(&self.a, q)?;
        let x = self.solve_unchecked(&q)?;
        check_residual(&self.a, &x, &q)?;
        Ok(x)
    }

    /// Solves `AY + YAᵀ + S = 0`, checking the residual.
    pub fn solve_dual(&self, s: &DMatrix<f64>) -> Result<DMatrix<f64>> {
        let s = checked_rhs(&self.a, s)?;
        let y = self.solve_dual_unchecked(&s)?;
        check_residual(&self.a.transpose(), &y, &s)?;
        Ok(y)
    }

    fn solve_unchecked(&self, q: &DMatrix<f64>) -> Result<DMatrix<f64>> {
        let (u, t) = (&self.u, &self.t);
        let n = t.nrows();
        // TᵀZ + ZT = −UᵀQU with X = UZUᵀ; blocks resolve top-left first.
        let c = -(u.transpose() * q * u);
        let mut z = DMatrix::<f64>::zeros(n, n);
        for &(ri, p) in &self.blocks {
            for &(cj, m) in &self.blocks {
                let mut rhs = DMatrix::<f64>::zeros(p, m);
                for a_ in 0..p {
                    for b_ in 0..m {
                        let (row, col) = (ri + a_, cj + b_);
                        let mut v = c[(row, col)];
                        for k in 0..ri {
                            v -= t[(k, row)] * z[(k, col)];
                        }
                        for l in 0..cj {
                            v -= z[(row, l)] * t[(l, col)];
                        }
                        rhs[(a_, b_)] = v;
                    }
                }
                let tii = t.view((ri, ri), (p, p)).transpose();
                let tjj = t.view((cj, cj), (m, m)).clone_owned();
                let w = small_sylvester(&tii, &tjj, &rhs)?;
                z.view_mut((ri, cj), (p, m)).copy_from(&w);
            }
        }
        Ok(symmetrize(&(u * z * u.transpose())))
    }

    fn solve_dual_unchecked(&self, s: &DMatrix<f64>) -> Result<DMatrix<f64>> {
        let (u, t) = (&self.u, &self.t);
        let n = t.nrows();
        // TW + WTᵀ = −UᵀSU with Y = UWUᵀ; blocks resolve bottom-right first.
        let c = -(u.transpose() * s * u);
        let mut w = DMatrix::<f64>::zeros(n, n);
        for &(ri, p) in self.blocks.iter().rev() {
            for &(cj, m) in self.blocks.iter().rev() {
                let mut rhs = DMatrix::<f64>::zeros(p, m);
                for a_ in 0..p {
                    for b_ in 0..m {
                        let (row, col) = (ri + a_, cj + b_);
                        let mut v = c[(row, col)];
                        for k in ri + p..n {
                            v -= t[(row, k)] * w[(k, col)];
                        }
                        for l in cj + m..n {
                            v -= w[(row, l)] * t[(col, l)];
                        }
                        rhs[(a_, b_)] = v;
                    }
                }
                let tii = t.view((ri, ri), (p, p)).clone_owned();
                let tjj = t.view((cj, cj), (m, m)).transpose();
                let blk = small_sylvester(&tii, &tjj, &rhs)?;
                w.view_mut((ri, cj), (p, m)).copy_from(&blk);
            }
        }
        Ok(symmetrize(&(u * w * u.transpose())))
    }
}

fn checked_rhs(a: &DMatrix<f64>, q: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    if q.shape() != a.shape() {
        return Err(Error::Dimension(format!(
            "Q is {}x{}, A is {}x{}",
            q.nrows(),
            q.ncols(),
            a.nrows(),
            a.ncols()
        )));
    }
    if !is_symmetric(q, SYMMETRY_TOL) {
        return Err(Error::Dimension("right-hand side is not symmetric".into()));
    }
    Ok(symmetrize(q))
}

fn check_residual(a: &DMatrix<f64>, x: &DMatrix<f64>, q: &DMatrix<f64>) -> Result<()> {
    let scale = a.norm() * x.norm() + q.norm();
    let res = lyapunov_residual(a, x, q);
    if !res.is_finite() || res > LYAPUNOV_RTOL * scale.max(f64::MIN_POSITIVE) {
        return Err(Error::SingularSystem(format!("relative residual {:.3e}", res / scale)));
    }
    Ok(())
}

/// Solves `P W + W S = C` for blocks of size at most 2.
fn small_sylvester(p: &DMatrix<f64>, s: &DMatrix<f64>, c: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let (pr, sm) = (p.nrows(), s.nrows());
    if pr == 1 && sm == 1 {
        let d = p[(0, 0)] + s[(0, 0)];
        if d == 0.0 {
            return Err(Error::SingularSystem("Schur block pair".into()));
        }
        return Ok(DMatrix::from_element(1, 1, c[(0, 0)] / d));
    }
    let op = DMatrix::<f64>::identity(sm, sm).kronecker(p)
        + s.transpose().kronecker(&DMatrix::<f64>::identity(pr, pr));
    let rhs = DVector::from_column_slice(c.as_slice());
    let sol = op
        .lu()
        .solve(&rhs)
        .ok_or_else(|| Error::SingularSystem("Schur block pair".into()))?;
    Ok(DMatrix::from_column_slice(pr, sm, sol.as_slice()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn m(rows: usize, cols: usize, data: &[f64]) -> DMatrix<f64> {
        DMatrix::from_row_slice(rows, cols, data)
    }

    #[test]
    fn scalar_lyapunov() {
        let x = solve_lyapunov(&m(1, 1, &[-1.0]), &m(1, 1, &[1.0])).unwrap();
        assert_relative_eq!(x[(0, 0)], 0.5, epsilon = 1e-15);
    }

    #[test]
    fn identity_lyapunov() {
        let a = -DMatrix::<f64>::identity(2, 2);
        let x = solve_lyapunov(&a, &DMatrix::identity(2, 2)).unwrap();
        assert_relative_eq!(x, DMatrix::identity(2, 2) * 0.5, epsilon = 1e-14);
    }

    #[test]
    fn upper_triangular_lyapunov() {
        let a = m(2, 2, &[-1.0, 1.0, 0.0, -2.0]);
        let q = DMatrix::identity(2, 2);
        let expected = m(2, 2, &[0.5, 1.0 / 6.0, 1.0 / 6.0, 1.0 / 3.0]);
        for method in [LyapunovMethod::BartelsStewart, LyapunovMethod::Kronecker] {
            let x = solve_lyapunov_with(method, &a, &q).unwrap();
            assert_relative_eq!(x, expected, epsilon = 1e-14);
            assert!(lyapunov_residual(&a, &x, &q) < 1e-14);
        }
    }

    #[test]
    fn dual_examples() {
        let y = solve_lyapunov_dual(&m(1, 1, &[-1.0]), &m(1, 1, &[1.0])).unwrap();
        assert_relative_eq!(y[(0, 0)], 0.5, epsilon = 1e-15);

        let a = -DMatrix::<f64>::identity(2, 2);
        let y = solve_lyapunov_dual(&a, &(DMatrix::identity(2, 2) * 2.0)).unwrap();
        assert_relative_eq!(y, DMatrix::identity(2, 2), epsilon = 1e-14);

        let a = m(2, 2, &[-1.0, 1.0, 0.0, -2.0]);
        let y = solve_lyapunov_dual(&a, &DMatrix::identity(2, 2)).unwrap();
        // hand solve: c = 1/4, c = 3b, a = b + 1/2
        assert_relative_eq!(y, m(2, 2, &[7.0 / 12.0, 1.0 / 12.0, 1.0 / 12.0, 0.25]), epsilon = 1e-14);
        let res = (&a * &y + &y * a.transpose() + DMatrix::<f64>::identity(2, 2)).norm();
        assert!(res < 1e-14);
    }

    #[test]
    fn complex_spectrum_uses_two_by_two_blocks() {
        // eigenvalues −1 ± 3i
        let a = m(3, 3, &[-1.0, 3.0, 0.5, -3.0, -1.0, 0.0, 0.2, 0.0, -4.0]);
        let q = m(3, 3, &[2.0, 0.1, 0.0, 0.1, 1.0, 0.3, 0.0, 0.3, 1.5]);
        let bs = solve_lyapunov(&a, &q).unwrap();
        let kr = solve_lyapunov_with(LyapunovMethod::Kronecker, &a, &q).unwrap();
        assert_relative_eq!(bs, kr, epsilon = 1e-12);

        let dual = SchurLyapunov::new(&a).unwrap().solve_dual(&q).unwrap();
        let kr = solve_lyapunov_with(LyapunovMethod::Kronecker, &a.transpose(), &q).unwrap();
        assert_relative_eq!(dual, kr, epsilon = 1e-12);
    }

    #[test]
    fn rejects_unstable_and_rectangular() {
        let err = solve_lyapunov(&m(1, 1, &[1.0]), &m(1, 1, &[1.0])).unwrap_err();
        assert!(matches!(err, Error::NotHurwitz { .. }));
        let err = solve_lyapunov_with(LyapunovMethod::Kronecker, &m(1, 1, &[0.0]), &m(1, 1, &[1.0]))
            .unwrap_err();
        assert!(matches!(err, Error::NotHurwitz { .. }));
        let err = solve_lyapunov(&DMatrix::zeros(2, 3), &DMatrix::zeros(2, 2)).unwrap_err();
        assert!(matches!(err, Error::Dimension(_)));
    }

    #[test]
    fn abscissa_examples() {
        assert_relative_eq!(spectral_abscissa(&m(1, 1, &[-1.0])).unwrap(), -1.0);
        let rot = m(2, 2, &[0.0, 1.0, -1.0, 0.0]);
        assert!(spectral_abscissa(&rot).unwrap().abs() < 1e-15);
        // Metropolis–Hastings weights of the 3-node path, shifted by −2.
        let mh = m(3, 3, &[2.0, 1.0, 0.0, 1.0, 1.0, 1.0, 0.0, 1.0, 2.0]) / 3.0;
        let a = mh - DMatrix::identity(3, 3) * 2.0;
        assert_relative_eq!(spectral_abscissa(&a).unwrap(), -1.0, epsilon = 1e-14);
    }

    #[test]
    fn hurwitz_examples() {
        assert!(is_hurwitz(&m(1, 1, &[-1.0]), 0.0).unwrap());
        assert!(!is_hurwitz(&m(2, 2, &[0.0, 1.0, -1.0, 0.0]), 0.0).unwrap());
        // A − BK with A = 1, B = 1, K = 2
        assert!(is_hurwitz(&m(1, 1, &[1.0 - 2.0]), 0.0).unwrap());
        assert!(!is_hurwitz(&m(1, 1, &[-1.0]), 1.0).unwrap());
    }

    #[test]
    fn loewner_examples() {
        let i = DMatrix::<f64>::identity(2, 2);
        assert!(loewner_leq(&i, &(&i * 2.0), 0.0));
        let p = DMatrix::from_diagonal(&DVector::from_vec(vec![1.0, 3.0]));
        let q = DMatrix::from_diagonal(&DVector::from_vec(vec![2.0, 2.0]));
        assert!(!loewner_leq(&p, &q, 0.0));
        assert!(loewner_leq(&p, &p, 0.0));
    }

    #[test]
    fn sym_power_matches_inverse() {
        let y = m(2, 2, &[2.0, 0.5, 0.5, 1.0]);
        let inv = y.clone().try_inverse().unwrap();
        assert_relative_eq!(sym_power(&y, -1.0, 1e-14), inv, epsilon = 1e-13);
        assert_relative_eq!(sym_power(&y, 1.0, 1e-14), y, epsilon = 1e-14);
    }
}
