//! Small dense complex linear-algebra helpers shared by the transceiver and
//! fitness code.

use nalgebra::{Cholesky, DMatrix, DVector, Dyn};
use num_complex::Complex64;

use crate::error::{Error, Result};

pub type CMat = DMatrix<Complex64>;
pub type CVec = DVector<Complex64>;

/// Largest condition number accepted for a covariance we need to invert.
pub const MAX_CONDITION: f64 = 1e12;

/// Cholesky factor of a Hermitian positive-definite matrix, with a
/// condition estimate taken from the factor's diagonal.
pub fn hpd_cholesky(a: &CMat) -> Result<Cholesky<Complex64, Dyn>> {
    if !a.is_square() {
        return Err(Error::DimensionMismatch(format!("expected square matrix, got {}x{}", a.nrows(), a.ncols())));
    }
    let chol = Cholesky::new(a.clone()).ok_or(Error::SingularCovariance { condition: f64::INFINITY })?;
    let diag = chol.l_dirty().diagonal();
    let (lo, hi) = diag.iter().fold((f64::INFINITY, 0f64), |(lo, hi), d| (lo.min(d.re), hi.max(d.re)));
    let condition = if lo > 0.0 { (hi / lo).powi(2) } else { f64::INFINITY };
    if !condition.is_finite() || condition > MAX_CONDITION {
        return Err(Error::SingularCovariance { condition });
    }
    Ok(chol)
}

/// Diagonal of `a⁻¹` for Hermitian positive-definite `a`, by solving against
/// each canonical basis vector.
pub fn inverse_diagonal(a: &CMat) -> Result<Vec<f64>> {
    let chol = hpd_cholesky(a)?;
    let n = a.nrows();
    let mut out = Vec::with_capacity(n);
    let mut e = CVec::zeros(n);
    for m in 0..n {
        e.fill(Complex64::new(0.0, 0.0));
        e[m] = Complex64::new(1.0, 0.0);
        let x = chol.solve(&e);
        out.push(x[m].re);
    }
    Ok(out)
}

/// `trace(a⁻¹)` for Hermitian positive-definite `a`.
pub fn trace_inverse(a: &CMat) -> Result<f64> {
    Ok(inverse_diagonal(a)?.iter().sum())
}

/// Eigenvalues of a Hermitian matrix, ascending.
pub fn hermitian_eigenvalues(a: &CMat) -> Vec<f64> {
    let mut ev: Vec<f64> = a.clone().symmetric_eigen().eigenvalues.iter().copied().collect();
    ev.sort_by(f64::total_cmp);
    ev
}

/// `a aᴴ`.
pub fn gram(a: &CMat) -> CMat {
    a * a.adjoint()
}

/// Compensated (Kahan–Babuška) accumulator. Summing the same values in the
/// same order always gives the same bits.
#[derive(Debug, Clone, Copy, Default)]
pub struct KahanSum {
    sum: f64,
    comp: f64,
    count: usize,
}

impl KahanSum {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add(&mut self, x: f64) {
        let t = self.sum + x;
        if self.sum.abs() >= x.abs() {
            self.comp += (self.sum - t) + x;
        } else {
            self.comp += (x - t) + self.sum;
        }
        self.sum = t;
        self.count += 1;
    }

    pub fn sum(&self) -> f64 {
        self.sum + self.comp
    }

    pub fn count(&self) -> usize {
        self.count
    }

    pub fn mean(&self) -> f64 {
        if self.count == 0 {
            0.0
        } else {
            self.sum() / self.count as f64
        }
    }
}

impl FromIterator<f64> for KahanSum {
    fn from_iter<I: IntoIterator<Item = f64>>(iter: I) -> Self {
        let mut k = KahanSum::new();
        for x in iter {
            k.add(x);
        }
        k
    }
}

/// Sample mean and standard error of the mean.
pub fn mean_and_stderr(values: &[f64]) -> (f64, f64) {
    let n = values.len();
    if n == 0 {
        return (f64::NAN, f64::NAN);
    }
    let mean = values.iter().copied().collect::<KahanSum>().mean();
    if n == 1 {
        return (mean, 0.0);
    }
    let ss = values.iter().map(|v| (v - mean).powi(2)).collect::<KahanSum>().sum();
    let var = ss / (n - 1) as f64;
    (mean, (var / n as f64).sqrt())
}
