//! Ground truth by shifted power iteration, `v ← (aI + J) v`.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::histogram::{Binning, Histogram};
use crate::instance::SparseSymmetricInstance;
use crate::rng::{self, Domain};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PowerIterationOptions {
    /// Diagonal shift `a`; `None` picks `k_max · max|J| + 1`.
    pub shift: Option<f64>,
    /// Stops once both the eigenvalue change and `‖Jv − Λv‖∞ / max(1, Λ)`
    /// fall below this.
    pub tol: f64,
    pub max_iter: usize,
}

impl Default for PowerIterationOptions {
    fn default() -> Self {
        Self {
            shift: None,
            tol: 1e-8,
            max_iter: 500_000,
        }
    }
}

/// First eigenpair with `|v|² = n`.
#[derive(Debug, Clone, PartialEq)]
pub struct EigenSolution {
    pub lambda: f64,
    pub v: Vec<f64>,
    pub m_statistic: f64,
    pub iterations: usize,
    pub residual: f64,
    pub seed: u64,
}

/// JSON form of an [`EigenSolution`] without the vector.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EigenRecord {
    pub lambda: f64,
    pub m: f64,
    pub n: usize,
    pub iterations: usize,
    pub residual: f64,
    pub seed: u64,
}

impl EigenSolution {
    pub fn n(&self) -> usize {
        self.v.len()
    }

    pub fn record(&self) -> EigenRecord {
        EigenRecord {
            lambda: self.lambda,
            m: self.m_statistic,
            n: self.n(),
            iterations: self.iterations,
            residual: self.residual,
            seed: self.seed,
        }
    }

    /// `Σ v_i`.
    pub fn component_sum(&self) -> f64 {
        self.v.iter().sum()
    }
}

pub fn automatic_shift(instance: &SparseSymmetricInstance) -> f64 {
    instance.k_max() as f64 * instance.max_abs_coupling() + 1.0
}

/// Power iteration from an i.i.d. uniform `[−1, 1]` start drawn from `seed`.
pub fn power_iterate(
    instance: &SparseSymmetricInstance,
    options: &PowerIterationOptions,
    seed: u64,
) -> Result<EigenSolution> {
    let n = instance.n();
    if n == 0 {
        return Err(Error::EmptyInput);
    }
    let mut restart = 0u64;
    loop {
        let mut rng = rng::stream(seed, Domain::PowerIteration, restart);
        let start: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..=1.0)).collect();
        match iterate(instance, start, options, seed) {
            Err(Stagnation) if restart < 8 => restart += 1,
            Err(Stagnation) => {
                return Err(Error::NotConverged {
                    lambda: f64::NAN,
                    residual: f64::INFINITY,
                    iterations: 0,
                })
            }
            Ok(result) => return result,
        }
    }
}

/// Power iteration from a caller-provided start vector.
pub fn power_iterate_from(
    instance: &SparseSymmetricInstance,
    start: &[f64],
    options: &PowerIterationOptions,
) -> Result<EigenSolution> {
    if instance.n() == 0 || start.len() != instance.n() {
        return Err(Error::EmptyInput);
    }
    iterate(instance, start.to_vec(), options, 0).map_err(|_| Error::TrivialField)?
}

struct Stagnation;

fn iterate(
    instance: &SparseSymmetricInstance,
    mut v: Vec<f64>,
    options: &PowerIterationOptions,
    seed: u64,
) -> std::result::Result<Result<EigenSolution>, Stagnation> {
    let n = v.len();
    let a = options.shift.unwrap_or_else(|| automatic_shift(instance));
    let root_n = (n as f64).sqrt();
    let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    if !(norm > 0.0 && norm.is_finite()) {
        return Err(Stagnation);
    }
    v.iter_mut().for_each(|x| *x *= root_n / norm);

    let mut w = vec![0.0; n];
    let mut previous = f64::NAN;
    let mut best = (f64::NAN, f64::INFINITY);
    for t in 1..=options.max_iter {
        instance.multiply(&v, &mut w);
        for (wi, vi) in w.iter_mut().zip(&v) {
            *wi += a * vi;
        }
        let norm_w = w.iter().map(|x| x * x).sum::<f64>().sqrt();
        if !(norm_w > 0.0 && norm_w.is_finite()) {
            return Err(Stagnation);
        }
        let growth = norm_w / root_n;
        let lambda = growth - a;
        let residual = w
            .iter()
            .zip(&v)
            .map(|(wi, vi)| (wi - growth * vi).abs())
            .fold(0.0, f64::max);
        if residual < best.1 {
            best = (lambda, residual);
        }
        if (lambda - previous).abs() <= options.tol
            && residual <= options.tol * lambda.abs().max(1.0)
        {
            let m_statistic = m_statistic(&v);
            return Ok(Ok(EigenSolution {
                lambda,
                v,
                m_statistic,
                iterations: t,
                residual,
                seed,
            }));
        }
        previous = lambda;
        let scale = root_n / norm_w;
        for (vi, wi) in v.iter_mut().zip(&w) {
            *vi = wi * scale;
        }
    }
    Ok(Err(Error::NotConverged {
        lambda: best.0,
        residual: best.1,
        iterations: options.max_iter,
    }))
}

/// `|n⁻¹ Σ v_i|`.
pub fn m_statistic(v: &[f64]) -> f64 {
    if v.is_empty() {
        return 0.0;
    }
    (v.iter().sum::<f64>() / v.len() as f64).abs()
}

/// Pools eigenvector elements of several solutions into one density. With
/// `sign_convention`, solutions with a negative component sum are negated
/// first.
pub fn element_histogram(
    solutions: &[EigenSolution],
    binning: Binning,
    sign_convention: bool,
) -> Result<Histogram> {
    if solutions.is_empty() {
        return Err(Error::EmptyInput);
    }
    let mut h = Histogram::empty(binning);
    for s in solutions {
        let sign = if sign_convention && s.component_sum() < 0.0 {
            -1.0
        } else {
            1.0
        };
        h.extend(s.v.iter().map(|x| sign * x));
    }
    Ok(h)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn solve(g: &SparseSymmetricInstance) -> EigenSolution {
        power_iterate(g, &PowerIterationOptions::default(), 3).unwrap()
    }

    #[test]
    fn swap_matrix() {
        let g = SparseSymmetricInstance::from_edges(2, &[(0, 1, 1.0)]).unwrap();
        let opts = PowerIterationOptions {
            shift: Some(2.0),
            ..Default::default()
        };
        let s = power_iterate(&g, &opts, 0).unwrap();
        assert_abs_diff_eq!(s.lambda, 1.0, epsilon = 1e-8);
        assert_abs_diff_eq!(s.v[0].abs(), 1.0, epsilon = 1e-6);
        assert_abs_diff_eq!(s.v[0], s.v[1], epsilon = 1e-6);
    }

    #[test]
    fn path_of_three() {
        let g = SparseSymmetricInstance::from_edges(3, &[(0, 1, 1.0), (1, 2, 1.0)]).unwrap();
        assert_abs_diff_eq!(solve(&g).lambda, 2f64.sqrt(), epsilon = 1e-8);
    }

    #[test]
    fn star_with_four_leaves() {
        let edges: Vec<_> = (1..5).map(|l| (0, l, 1.0)).collect();
        let g = SparseSymmetricInstance::from_edges(5, &edges).unwrap();
        let s = solve(&g);
        assert_abs_diff_eq!(s.lambda, 2.0, epsilon = 1e-8);
        assert_abs_diff_eq!(s.v[0] / s.v[1], 2.0, epsilon = 1e-6);
    }

    #[test]
    fn no_edges_gives_zero() {
        let g = SparseSymmetricInstance::from_edges(3, &[]).unwrap();
        let s = solve(&g);
        assert_eq!(s.lambda, 0.0);
        assert_abs_diff_eq!(s.v.iter().map(|x| x * x).sum::<f64>(), 3.0, epsilon = 1e-12);
    }

    #[test]
    fn bipartite_even_cycle_breaks_tie_toward_positive() {
        // Spectrum of C_6 is {2, 1, 1, −1, −1, −2}.
        let edges: Vec<_> = (0..6).map(|i| (i, (i + 1) % 6, 1.0)).collect();
        let g = SparseSymmetricInstance::from_edges(6, &edges).unwrap();
        assert_abs_diff_eq!(solve(&g).lambda, 2.0, epsilon = 1e-8);
    }

    #[test]
    fn empty_instance_is_an_error() {
        let g = SparseSymmetricInstance::from_edges(0, &[]).unwrap();
        assert!(matches!(
            power_iterate(&g, &Default::default(), 0),
            Err(Error::EmptyInput)
        ));
    }

    #[test]
    fn iteration_cap_reports_best_estimate() {
        let edges: Vec<_> = (0..40).map(|i| (i, i + 1, 1.0)).collect();
        let g = SparseSymmetricInstance::from_edges(41, &edges).unwrap();
        let opts = PowerIterationOptions {
            max_iter: 5,
            ..Default::default()
        };
        match power_iterate(&g, &opts, 0) {
            Err(Error::NotConverged { lambda, iterations, .. }) => {
                assert_eq!(iterations, 5);
                assert!(lambda.is_finite());
            }
            other => panic!("expected NotConverged, got {other:?}"),
        }
    }

    #[test]
    fn m_statistic_examples() {
        assert_eq!(m_statistic(&[1.0; 6]), 1.0);
        assert_eq!(m_statistic(&[1.0, -1.0, 1.0, -1.0]), 0.0);
        assert_eq!(m_statistic(&[1.0, 1.0, 1.0, -1.0]), 0.5);
    }

    fn solution(v: Vec<f64>) -> EigenSolution {
        EigenSolution {
            lambda: 0.0,
            m_statistic: m_statistic(&v),
            v,
            iterations: 0,
            residual: 0.0,
            seed: 0,
        }
    }

    #[test]
    fn histogram_of_uniform_vector() {
        let b = Binning::new(0.0, 2.0, 2).unwrap();
        let h = element_histogram(&[solution(vec![1.0, 1.0])], b, false).unwrap();
        assert_eq!(h.counts, vec![0, 2]);
    }

    #[test]
    fn sign_convention_flips_negative_sums() {
        let b = Binning::default();
        let negative = solution(vec![-1.5, -0.5, 0.25]);
        let flipped = solution(vec![1.5, 0.5, -0.25]);
        let with = element_histogram(&[negative.clone()], b, true).unwrap();
        let reference = element_histogram(&[flipped], b, false).unwrap();
        assert_eq!(with, reference);
        let without = element_histogram(&[negative], b, false).unwrap();
        assert_ne!(without, reference);
        assert!(element_histogram(&[], b, true).is_err());
    }

    #[test]
    fn record_json_keys() {
        let rec = solution(vec![1.0, 1.0]).record();
        let json = serde_json::to_value(&rec).unwrap();
        for key in ["lambda", "m", "n", "iterations", "residual", "seed"] {
            assert!(json.get(key).is_some(), "missing {key}");
        }
    }
}
