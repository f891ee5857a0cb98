// SPDX-License-Identifier: Apache-2.0

//! Dense complex matrix helpers shared by the engine and the tests.

use alloc::vec::Vec;

use nalgebra::linalg::SymmetricEigen;
use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use num_traits::Float;

pub type CMat = DMatrix<Complex64>;

pub const ZERO: Complex64 = Complex64::new(0.0, 0.0);
pub const ONE: Complex64 = Complex64::new(1.0, 0.0);
pub const I: Complex64 = Complex64::new(0.0, 1.0);

pub fn c(re: f64) -> Complex64 {
    Complex64::new(re, 0.0)
}

pub fn identity(n: usize) -> CMat {
    CMat::identity(n, n)
}

pub fn dagger(m: &CMat) -> CMat {
    m.adjoint()
}

pub fn kron(a: &CMat, b: &CMat) -> CMat {
    a.kronecker(b)
}

pub fn trace(m: &CMat) -> Complex64 {
    m.trace()
}

/// Largest entry of |M - M^dagger|.
pub fn hermiticity_error(m: &CMat) -> f64 {
    let mut worst: f64 = 0.0;
    for i in 0..m.nrows() {
        for j in i..m.ncols() {
            worst = worst.max((m[(i, j)] - m[(j, i)].conj()).norm());
        }
    }
    worst
}

/// Largest entry of |A - B|.
pub fn max_abs_diff(a: &CMat, b: &CMat) -> f64 {
    a.iter().zip(b.iter()).map(|(x, y)| (x - y).norm()).fold(0.0, f64::max)
}

/// `U M U^dagger`.
pub fn conjugate(u: &CMat, m: &CMat) -> CMat {
    u * m * u.adjoint()
}

/// Eigendecomposition of a Hermitian matrix, eigenvalues ascending.
#[derive(Debug, Clone)]
pub struct HermitianEigen {
    pub values: Vec<f64>,
    pub vectors: CMat,
}

impl HermitianEigen {
    pub fn new(m: &CMat) -> Self {
        // Symmetrize so round-off in the input cannot leak an anti-Hermitian part.
        let sym = (m + m.adjoint()) * c(0.5);
        let eig = SymmetricEigen::new(sym);
        let mut order: Vec<usize> = (0..eig.eigenvalues.len()).collect();
        order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
        let n = m.nrows();
        let mut vectors = CMat::zeros(n, n);
        let mut values = Vec::with_capacity(n);
        for (dst, &src) in order.iter().enumerate() {
            values.push(eig.eigenvalues[src]);
            vectors.set_column(dst, &eig.eigenvectors.column(src));
        }
        Self { values, vectors }
    }

    /// exp(-i H t).
    pub fn propagator(&self, t: f64) -> CMat {
        let phases = DVector::from_iterator(
            self.values.len(),
            self.values.iter().map(|&e| {
                let (s, co) = Float::sin_cos(-e * t);
                Complex64::new(co, s)
            }),
        );
        let mut scaled = self.vectors.clone();
        for (j, mut col) in scaled.column_iter_mut().enumerate() {
            col *= phases[j];
        }
        scaled * self.vectors.adjoint()
    }
}

/// `m^n` by binary exponentiation.
pub fn matrix_power(m: &CMat, mut n: u64) -> CMat {
    let mut result = identity(m.nrows());
    let mut base = m.clone();
    while n > 0 {
        if n & 1 == 1 {
            result = &result * &base;
        }
        n >>= 1;
        if n > 0 {
            base = &base * &base;
        }
    }
    result
}

#[cfg(test)]
mod tests {
    use super::*;

    fn pauli_x() -> CMat {
        CMat::from_row_slice(2, 2, &[ZERO, ONE, ONE, ZERO])
    }

    #[test]
    fn propagator_of_pauli_x() {
        let eig = HermitianEigen::new(&pauli_x());
        let t = 0.37;
        let u = eig.propagator(t);
        let expected = CMat::from_row_slice(
            2,
            2,
            &[c(t.cos()), -I * t.sin(), -I * t.sin(), c(t.cos())],
        );
        assert!(max_abs_diff(&u, &expected) < 1e-14);
    }

    #[test]
    fn power_matches_repeated_product() {
        let eig = HermitianEigen::new(&pauli_x());
        let u = eig.propagator(0.1);
        let mut acc = identity(2);
        for _ in 0..13 {
            acc = &acc * &u;
        }
        assert!(max_abs_diff(&matrix_power(&u, 13), &acc) < 1e-13);
        assert!(max_abs_diff(&matrix_power(&u, 0), &identity(2)) == 0.0);
    }
}
