//! Least-squares rate fits used to summarize convergence traces.

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LinearFit {
    pub slope: f64,
    pub intercept: f64,
    /// Coefficient of determination.
    pub r2: f64,
    pub points: usize,
}

/// Ordinary least squares `y ≈ slope·x + intercept`. `None` for fewer than
/// two points or constant `x`.
pub fn linear_fit(xs: &[f64], ys: &[f64]) -> Option<LinearFit> {
    let n = xs.len().min(ys.len());
    if n < 2 {
        return None;
    }
    let nf = n as f64;
    let mx = xs[..n].iter().sum::<f64>() / nf;
    let my = ys[..n].iter().sum::<f64>() / nf;
    let (mut sxx, mut sxy, mut syy) = (0.0, 0.0, 0.0);
    for (&x, &y) in xs.iter().zip(ys) {
        sxx += (x - mx) * (x - mx);
        sxy += (x - mx) * (y - my);
        syy += (y - my) * (y - my);
    }
    if sxx == 0.0 {
        return None;
    }
    let slope = sxy / sxx;
    let r2 = if syy == 0.0 { 1.0 } else { sxy * sxy / (sxx * syy) };
    Some(LinearFit { slope, intercept: my - slope * mx, r2, points: n })
}

/// Fit of `ln(gap)` against `x` over the points whose gap exceeds `floor`.
pub fn log_gap_fit(xs: &[f64], gaps: &[f64], floor: f64) -> Option<LinearFit> {
    let (px, py): (Vec<f64>, Vec<f64>) = xs
        .iter()
        .zip(gaps)
        .filter(|(_, &g)| g > floor)
        .map(|(&x, &g)| (x, g.ln()))
        .unzip();
    linear_fit(&px, &py)
}

/// Largest `α` with `gap(t) ≤ e^{−αt} gap(0)` at every sample above `floor`.
pub fn exponential_envelope(ts: &[f64], gaps: &[f64], floor: f64) -> Option<f64> {
    let g0 = *gaps.first()?;
    let t0 = *ts.first()?;
    ts.iter()
        .zip(gaps)
        .skip(1)
        .filter(|(_, &g)| g > floor)
        .map(|(&t, &g)| -(g / g0).ln() / (t - t0))
        .reduce(f64::min)
}

/// Running minimum of a sequence.
pub fn running_min(values: &[f64]) -> Vec<f64> {
    values
        .iter()
        .scan(f64::INFINITY, |m, &v| {
            *m = m.min(v);
            Some(*m)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn exact_line() {
        let xs = [0.0, 1.0, 2.0, 3.0];
        let ys = [1.0, 3.0, 5.0, 7.0];
        let fit = linear_fit(&xs, &ys).unwrap();
        assert_relative_eq!(fit.slope, 2.0);
        assert_relative_eq!(fit.intercept, 1.0);
        assert_relative_eq!(fit.r2, 1.0);
    }

    #[test]
    fn degenerate_inputs() {
        assert!(linear_fit(&[1.0], &[2.0]).is_none());
        assert!(linear_fit(&[1.0, 1.0], &[2.0, 3.0]).is_none());
    }

    #[test]
    fn exponential_decay_is_recovered() {
        let ts: Vec<f64> = (0..50).map(|i| i as f64 * 0.1).collect();
        let gaps: Vec<f64> = ts.iter().map(|t| 3.0 * (-1.5 * t).exp()).collect();
        let fit = log_gap_fit(&ts, &gaps, 0.0).unwrap();
        assert_relative_eq!(fit.slope, -1.5, epsilon = 1e-12);
        assert_relative_eq!(exponential_envelope(&ts, &gaps, 0.0).unwrap(), 1.5, epsilon = 1e-12);
    }

    #[test]
    fn running_minimum() {
        assert_eq!(running_min(&[3.0, 1.0, 2.0, 0.5]), vec![3.0, 1.0, 1.0, 0.5]);
    }
}
