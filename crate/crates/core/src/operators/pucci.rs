//! Pucci extremal operators in eigenvalue form.

use nalgebra::{DMatrix, SymmetricEigen};

fn split_sums(eigs: &[f64]) -> (f64, f64) {
    let mut pos = 0.0;
    let mut neg = 0.0;
    for &e in eigs {
        if e > 0.0 {
            pos += e;
        } else if e < 0.0 {
            neg += e;
        }
    }
    (pos, neg)
}

/// `M⁺ = Λ Σ_{e>0} e + λ Σ_{e<0} e`.
pub fn pucci_plus(eigs: &[f64], lambda: f64, big_lambda: f64) -> f64 {
    let (pos, neg) = split_sums(eigs);
    big_lambda * pos + lambda * neg
}

/// `M⁻ = λ Σ_{e>0} e + Λ Σ_{e<0} e`. Bitwise equal to `-pucci_plus(-eigs)`.
pub fn pucci_minus(eigs: &[f64], lambda: f64, big_lambda: f64) -> f64 {
    let (pos, neg) = split_sums(eigs);
    lambda * pos + big_lambda * neg
}

pub fn sym_eigenvalues(m: &DMatrix<f64>) -> Vec<f64> {
    match m.nrows() {
        0 => Vec::new(),
        1 => vec![m[(0, 0)]],
        _ => SymmetricEigen::new(m.clone())
            .eigenvalues
            .iter()
            .copied()
            .collect(),
    }
}

pub fn pucci_plus_matrix(m: &DMatrix<f64>, lambda: f64, big_lambda: f64) -> f64 {
    pucci_plus(&sym_eigenvalues(m), lambda, big_lambda)
}

pub fn pucci_minus_matrix(m: &DMatrix<f64>, lambda: f64, big_lambda: f64) -> f64 {
    pucci_minus(&sym_eigenvalues(m), lambda, big_lambda)
}
