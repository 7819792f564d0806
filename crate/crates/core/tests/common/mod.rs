#![allow(dead_code)]

use nalgebra::DMatrix;
use pglqr::linalg::{is_hurwitz, spectral_abscissa};
use pglqr::Plant;
use rand::Rng;

pub fn uniform<R: Rng>(rng: &mut R, rows: usize, cols: usize) -> DMatrix<f64> {
    DMatrix::from_fn(rows, cols, |_, _| rng.gen_range(-1.0..1.0))
}

/// `GGᵀ + floor·I` with `G` uniform.
pub fn spd<R: Rng>(rng: &mut R, n: usize, floor: f64) -> DMatrix<f64> {
    let g = uniform(rng, n, n);
    &g * g.transpose() + DMatrix::identity(n, n) * floor
}

/// Random matrix shifted so its spectral abscissa is `−margin`.
pub fn hurwitz<R: Rng>(rng: &mut R, n: usize, margin: f64) -> DMatrix<f64> {
    let m = uniform(rng, n, n) * 1.5;
    let shift = spectral_abscissa(&m).unwrap() + margin;
    m - DMatrix::identity(n, n) * shift
}

/// Random plant with open-loop Hurwitz `A` and a random stabilizing gain.
pub fn stabilizing_instance<R: Rng>(rng: &mut R, n: usize, m: usize) -> (Plant, DMatrix<f64>) {
    let margin = rng.gen_range(0.2..1.0);
    let a = hurwitz(rng, n, margin);
    let b = uniform(rng, n, m);
    let p = Plant::new(a, b, spd(rng, n, 0.2), spd(rng, m, 0.2), spd(rng, n, 0.2)).unwrap();
    let mut k = uniform(rng, m, n) * 0.5;
    while !is_hurwitz(&p.closed_loop(&k), 0.05).unwrap() {
        k *= 0.5;
    }
    (p, k)
}

/// `∫₀^T e^{Aᵀt} Q e^{At} dt` by composite Simpson with `2·half` panels,
/// `T` chosen so the tail is below `1e−12` relative.
pub fn lyapunov_by_quadrature(a: &DMatrix<f64>, q: &DMatrix<f64>, half: usize) -> DMatrix<f64> {
    let alpha = -spectral_abscissa(a).unwrap();
    let horizon = 30.0 / alpha;
    let panels = 2 * half;
    let h = horizon / panels as f64;
    let step = (a * h).exp();
    let mut e = DMatrix::<f64>::identity(a.nrows(), a.ncols());
    let mut acc = DMatrix::<f64>::zeros(a.nrows(), a.ncols());
    for i in 0..=panels {
        let w = if i == 0 || i == panels {
            1.0
        } else if i % 2 == 1 {
            4.0
        } else {
            2.0
        };
        acc += e.transpose() * q * &e * w;
        e = &e * &step;
    }
    acc * (h / 3.0)
}
