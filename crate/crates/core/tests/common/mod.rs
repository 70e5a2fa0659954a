#![allow(dead_code)]

use cavity_eigen::SparseSymmetricInstance;
use nalgebra::{DMatrix, SymmetricEigen};

fn dense(g: &SparseSymmetricInstance) -> DMatrix<f64> {
    let n = g.n();
    let mut m = DMatrix::<f64>::zeros(n, n);
    for (i, j, w) in g.edges() {
        m[(i, j)] = w;
        m[(j, i)] = w;
    }
    m
}

/// Largest eigenvalue and its unit eigenvector by dense diagonalization.
pub fn dense_top_eigenpair(g: &SparseSymmetricInstance) -> (f64, Vec<f64>) {
    let eig = SymmetricEigen::new(dense(g));
    let top = eig.eigenvalues.imax();
    (eig.eigenvalues[top], eig.eigenvectors.column(top).iter().copied().collect())
}

/// Full spectrum in descending order.
pub fn dense_spectrum(g: &SparseSymmetricInstance) -> Vec<f64> {
    let mut values: Vec<f64> = SymmetricEigen::new(dense(g)).eigenvalues.iter().copied().collect();
    values.sort_by(|a, b| b.total_cmp(a));
    values
}

pub fn cosine(a: &[f64], b: &[f64]) -> f64 {
    let dot: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
    let na = a.iter().map(|x| x * x).sum::<f64>().sqrt();
    let nb = b.iter().map(|x| x * x).sum::<f64>().sqrt();
    (dot / (na * nb)).abs()
}

/// Random recursive tree: node `i > 0` attaches to `picks[i-1] mod i`.
pub fn random_recursive_tree(n: usize, weights: &[f64], picks: &[usize]) -> SparseSymmetricInstance {
    let edges: Vec<(usize, usize, f64)> =
        (1..n).map(|i| (picks[i - 1] % i, i, weights[i - 1])).collect();
    SparseSymmetricInstance::from_edges(n, &edges).unwrap()
}
