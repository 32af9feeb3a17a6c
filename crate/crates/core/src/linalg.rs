//! Dense complex matrix helpers for the N×N coefficient-matrix level.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

pub type CMat = DMatrix<Complex64>;
pub type CVec = DVector<Complex64>;

pub const I: Complex64 = Complex64::new(0.0, 1.0);

#[inline]
pub fn c(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

#[inline]
pub fn cis(phase: f64) -> Complex64 {
    Complex64::from_polar(1.0, phase)
}

/// Largest entry magnitude.
pub fn max_abs(m: &CMat) -> f64 {
    m.iter().fold(0.0, |acc, z| acc.max(z.norm()))
}

pub fn hermitian_defect(m: &CMat) -> f64 {
    max_abs(&(m - m.adjoint()))
}

pub fn unitarity_defect(m: &CMat) -> f64 {
    let n = m.nrows();
    max_abs(&(m.adjoint() * m - CMat::identity(n, n)))
}

/// Matrix exponential by scaling and squaring with a truncated Taylor series.
///
/// Intended for the small generators used here (N ≤ ~10).
pub fn expm(a: &CMat) -> CMat {
    let n = a.nrows();
    let norm = a
        .row_iter()
        .map(|r| r.iter().map(|z| z.norm()).sum::<f64>())
        .fold(0.0, f64::max);
    let squarings = if norm > 0.25 {
        (norm / 0.25).log2().ceil() as u32
    } else {
        0
    };
    let scaled = a.scale(1.0 / f64::powi(2.0, squarings as i32));
    let mut term = CMat::identity(n, n);
    let mut sum = CMat::identity(n, n);
    for k in 1..=18 {
        term = &term * &scaled / Complex64::from(k as f64);
        sum += &term;
        if max_abs(&term) < 1e-18 {
            break;
        }
    }
    for _ in 0..squarings {
        sum = &sum * &sum;
    }
    sum
}

pub fn commutator(a: &CMat, b: &CMat) -> CMat {
    a * b - b * a
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn expm_of_pauli_y_rotation() {
        // exp(-i x σ_y) = cos x − i sin x σ_y
        let x = 0.7;
        let sy = CMat::from_row_slice(2, 2, &[c(0., 0.), c(0., -1.), c(0., 1.), c(0., 0.)]);
        let u = expm(&(sy.scale(x) * (-I)));
        let expect = CMat::from_row_slice(
            2,
            2,
            &[c(x.cos(), 0.), c(-x.sin(), 0.), c(x.sin(), 0.), c(x.cos(), 0.)],
        );
        assert!(max_abs(&(u - expect)) < 1e-14);
    }

    #[test]
    fn expm_large_norm_stays_unitary() {
        let h = CMat::from_fn(3, 3, |i, j| {
            let v = c((i + 2 * j) as f64, (i as f64) - (j as f64));
            v
        });
        let herm = (&h + h.adjoint()).scale(5.0);
        let u = expm(&(herm * (-I)));
        assert!(unitarity_defect(&u) < 1e-12);
    }
}
