use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

pub const POLY_GRID_POINTS: usize = 1001;
pub const POLY_RANGE: (f64, f64) = (-5.0, 5.0);

/// Degree-2 least-squares fit `a0 + a1 x + a2 x^2` on a uniform grid.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PolyFit {
    pub coeffs: [f64; 3],
    pub lo: f64,
    pub hi: f64,
    /// Root-mean-square residual over the grid.
    pub rms: f64,
    pub max_abs_error: f64,
    /// Fraction of adjacent grid pairs on which the fit decreases.
    pub nonmonotone_fraction: f64,
}

impl PolyFit {
    pub fn eval(&self, x: f64) -> f64 {
        let [a0, a1, a2] = self.coeffs;
        a0 + x * (a1 + x * a2)
    }
}

pub fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

/// `points` uniformly spaced values from `lo` to `hi` inclusive.
pub fn uniform_grid(lo: f64, hi: f64, points: usize) -> Vec<f64> {
    let step = (hi - lo) / (points - 1) as f64;
    (0..points)
        .map(|i| if i + 1 == points { hi } else { lo + step * i as f64 })
        .collect()
}

pub fn fit_quadratic(target: impl Fn(f64) -> f64, lo: f64, hi: f64, points: usize) -> Result<PolyFit> {
    if !(lo.is_finite() && hi.is_finite() && lo < hi) {
        return Err(Error::config(format!("degenerate fit range [{lo}, {hi}]")));
    }
    if points < 3 {
        return Err(Error::config("a quadratic fit needs at least three points"));
    }
    let xs = uniform_grid(lo, hi, points);
    let ys: Vec<f64> = xs.iter().map(|&x| target(x)).collect();
    if ys.iter().any(|y| !y.is_finite()) {
        return Err(Error::Numerical("fit target is not finite on the grid".into()));
    }
    let a = DMatrix::from_fn(points, 3, |i, j| xs[i].powi(j as i32));
    let b = DVector::from_vec(ys.clone());
    let sol = a
        .svd(true, true)
        .solve(&b, 0.0)
        .map_err(|e| Error::Numerical(format!("least-squares solve failed: {e}")))?;
    let coeffs = [sol[0], sol[1], sol[2]];
    if coeffs.iter().any(|c| !c.is_finite()) {
        return Err(Error::Numerical("non-finite polynomial coefficients".into()));
    }
    let mut fit = PolyFit {
        coeffs,
        lo,
        hi,
        rms: 0.0,
        max_abs_error: 0.0,
        nonmonotone_fraction: 0.0,
    };
    let vals: Vec<f64> = xs.iter().map(|&x| fit.eval(x)).collect();
    let sq: f64 = vals.iter().zip(&ys).map(|(p, y)| (p - y) * (p - y)).sum();
    fit.rms = (sq / points as f64).sqrt();
    fit.max_abs_error = vals.iter().zip(&ys).map(|(p, y)| (p - y).abs()).fold(0.0, f64::max);
    let drops = vals.windows(2).filter(|w| w[1] < w[0]).count();
    fit.nonmonotone_fraction = drops as f64 / (points - 1) as f64;
    Ok(fit)
}

/// Quadratic surrogate of the logistic score on `[lo, hi]`.
pub fn fit_poly_activation(lo: f64, hi: f64) -> Result<PolyFit> {
    fit_quadratic(sigmoid, lo, hi, POLY_GRID_POINTS)
}
