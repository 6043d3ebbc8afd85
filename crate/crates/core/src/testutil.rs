use nalgebra::{DMatrix, DVector};
use rand_distr::{Distribution, StandardNormal};

use crate::rng;

pub fn gaussian_matrix(rows: usize, cols: usize, seed: u64) -> DMatrix<f64> {
    let mut r = rng::stream(seed, 99);
    DMatrix::from_fn(rows, cols, |_, _| StandardNormal.sample(&mut r))
}

pub fn gaussian_vector(len: usize, seed: u64) -> DVector<f64> {
    let mut r = rng::stream(seed, 98);
    DVector::from_fn(len, |_, _| StandardNormal.sample(&mut r))
}

pub fn dense_inverse(a: &DMatrix<f64>) -> DMatrix<f64> {
    a.clone().try_inverse().expect("invertible")
}

/// `A^{-1/2}` of a symmetric positive definite matrix through its eigendecomposition.
pub fn dense_inverse_sqrt(a: &DMatrix<f64>) -> DMatrix<f64> {
    let eig = a.clone().symmetric_eigen();
    let d = eig.eigenvalues.map(|v| v.sqrt().recip());
    &eig.eigenvectors * DMatrix::from_diagonal(&d) * eig.eigenvectors.transpose()
}
