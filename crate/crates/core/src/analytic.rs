//! Closed-form reference results.
//!
//! For the single-degree ensemble `p(k) = δ_{k,K}` with binary couplings the
//! cavity fields `A` collapse onto the stable root of `A = λ − (K−1)J²/A`,
//!
//! ```text
//! A*(λ; c) = (λ + √(λ² − 4c)) / 2,      c = (K−1) J²,
//! ```
//!
//! and the first two moments of `H` evolve linearly with coefficients
//! `c₁ = Δ(K−1)J/A*` and `c₂ = (K−1)J²/A*²`. The eigenvalue is the largest
//! `λ` at which one of them reaches one:
//!
//! ```text
//! Λ = ((K−1)Δ + 1/Δ) J   for Δ > Δc = 1/√(K−1)   (ferromagnetic)
//! Λ = 2√(K−1) J          for Δ < Δc              (paramagnetic)
//! ```
//!
//! In the dense limit (mean `μJ/k̄`, variance `J²/k̄`, `k̄ → ∞`) the same
//! algebra with `c = J²` gives `Λ = (μ + 1/μ)J` for `μ > 1` and `2J` otherwise,
//! and the eigenvector elements are Gaussian.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Which moment of the first-order field sets the eigenvalue.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    /// `|m₁| > 0`: the mean of `H` survives.
    Ferromagnetic,
    /// `m₁ = 0`, `m₂ > 0`.
    Paramagnetic,
    /// Both conditions hold at the same `λ`.
    Critical,
}

/// Stable root `A*` of `A = λ − c/A`.
pub fn a_star(lambda: f64, c: f64) -> Result<f64> {
    let mut disc = lambda * lambda - 4.0 * c;
    if disc < 0.0 {
        // Rounding in λ² must not push the double root off the domain.
        if disc < -4.0 * f64::EPSILON * lambda * lambda {
            return Err(Error::BelowSpectralEdge { lambda, c });
        }
        disc = 0.0;
    }
    Ok((lambda + disc.sqrt()) / 2.0)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SingleDegreeModel {
    pub k: usize,
    pub j: f64,
    pub delta: f64,
}

impl SingleDegreeModel {
    pub fn new(k: usize, j: f64, delta: f64) -> Result<Self> {
        if k < 2 {
            return Err(Error::InvalidConfig(format!("single degree K = {k} < 2")));
        }
        if !(j > 0.0) || !(0.0..=1.0).contains(&delta) {
            return Err(Error::InvalidCouplingLaw(format!("J = {j}, Δ = {delta}")));
        }
        Ok(Self { k, j, delta })
    }

    /// `Δc = 1/√(K−1)`.
    pub fn critical_bias(&self) -> f64 {
        1.0 / ((self.k - 1) as f64).sqrt()
    }

    /// `(K−1)J²`.
    pub fn cavity_strength(&self) -> f64 {
        (self.k - 1) as f64 * self.j * self.j
    }

    /// Returns `(c₁, c₂)`: the linear coefficients of the first-moment and
    /// centred second-moment maps of `H` at `λ`.
    pub fn moment_coefficients(&self, lambda: f64) -> Result<(f64, f64)> {
        let a = a_star(lambda, self.cavity_strength())?;
        let km1 = (self.k - 1) as f64;
        Ok((self.delta * km1 * self.j / a, km1 * self.j * self.j / (a * a)))
    }
}

pub fn single_degree_eigenvalue(model: &SingleDegreeModel) -> (f64, Mode) {
    let km1 = (model.k - 1) as f64;
    let delta_c = model.critical_bias();
    let para = 2.0 * km1.sqrt() * model.j;
    if model.delta > delta_c {
        ((km1 * model.delta + 1.0 / model.delta) * model.j, Mode::Ferromagnetic)
    } else if model.delta == delta_c {
        (para, Mode::Critical)
    } else {
        (para, Mode::Paramagnetic)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DenseLimitModel {
    pub mu: f64,
    pub j: f64,
}

impl DenseLimitModel {
    pub fn new(mu: f64, j: f64) -> Result<Self> {
        if !(mu > 0.0 && mu.is_finite()) || !(j > 0.0 && j.is_finite()) {
            return Err(Error::InvalidConfig(format!("dense limit μ = {mu}, J = {j}")));
        }
        Ok(Self { mu, j })
    }

    /// `M(μ) = √(1 − 1/μ²)` above `μ = 1`, zero below.
    pub fn magnetization(&self) -> f64 {
        if self.mu > 1.0 {
            (1.0 - 1.0 / (self.mu * self.mu)).sqrt()
        } else {
            0.0
        }
    }
}

pub fn dense_limit_eigenvalue(model: &DenseLimitModel) -> (f64, Mode) {
    if model.mu > 1.0 {
        ((model.mu + 1.0 / model.mu) * model.j, Mode::Ferromagnetic)
    } else if model.mu == 1.0 {
        (2.0 * model.j, Mode::Critical)
    } else {
        (2.0 * model.j, Mode::Paramagnetic)
    }
}

/// Gaussian element density with `T = 1`; `positive` selects the sign of `M`.
pub fn dense_limit_density(model: &DenseLimitModel, v: f64, positive: bool) -> f64 {
    let m = model.magnetization() * if positive { 1.0 } else { -1.0 };
    let var = 1.0 - m * m;
    (-(v - m).powi(2) / (2.0 * var)).exp() / (2.0 * PI * var).sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn a_star_examples() {
        assert_abs_diff_eq!(a_star(4.0, 3.0).unwrap(), 3.0, epsilon = 1e-15);
        assert_abs_diff_eq!(a_star(2.0 * 3f64.sqrt(), 3.0).unwrap(), 3f64.sqrt(), epsilon = 1e-7);
        assert_eq!(a_star(2.0, 1.0).unwrap(), 1.0);
        assert!(matches!(a_star(1.0, 1.0), Err(Error::BelowSpectralEdge { .. })));
    }

    #[test]
    fn single_degree_examples() {
        let (l, m) = single_degree_eigenvalue(&SingleDegreeModel::new(4, 1.0, 0.9).unwrap());
        assert_abs_diff_eq!(l, 2.7 + 1.0 / 0.9, epsilon = 1e-12);
        assert_abs_diff_eq!(l, 3.8111, epsilon = 1e-4);
        assert_eq!(m, Mode::Ferromagnetic);

        let (l, m) = single_degree_eigenvalue(&SingleDegreeModel::new(4, 1.0, 0.3).unwrap());
        assert_abs_diff_eq!(l, 2.0 * 3f64.sqrt(), epsilon = 1e-12);
        assert_eq!(m, Mode::Paramagnetic);

        for k in 2..10 {
            let (l, _) = single_degree_eigenvalue(&SingleDegreeModel::new(k, 1.5, 1.0).unwrap());
            assert_abs_diff_eq!(l, k as f64 * 1.5, epsilon = 1e-12);
        }
    }

    #[test]
    fn single_degree_critical_and_k2_edge() {
        let model = SingleDegreeModel::new(4, 1.0, 1.0 / 3f64.sqrt()).unwrap();
        let (l, m) = single_degree_eigenvalue(&model);
        assert_eq!(m, Mode::Critical);
        assert_abs_diff_eq!(l, 2.0 * 3f64.sqrt(), epsilon = 1e-12);

        let (l, m) = single_degree_eigenvalue(&SingleDegreeModel::new(2, 1.0, 0.0).unwrap());
        assert_eq!((l, m), (2.0, Mode::Paramagnetic));
        assert!(SingleDegreeModel::new(1, 1.0, 0.5).is_err());
    }

    #[test]
    fn moment_coefficients_examples() {
        let m = SingleDegreeModel::new(4, 1.0, 0.9).unwrap();
        let lambda = 2.7 + 1.0 / 0.9;
        assert_abs_diff_eq!(m.moment_coefficients(lambda).unwrap().0, 1.0, epsilon = 1e-12);
        let (_, c2) = m.moment_coefficients(2.0 * 3f64.sqrt()).unwrap();
        assert_abs_diff_eq!(c2, 1.0, epsilon = 1e-7);
        let (c1, c2) = m.moment_coefficients(1e8).unwrap();
        assert!(c1 < 1e-7 && c2 < 1e-14);
    }

    #[test]
    fn dense_limit_examples() {
        let (l, m) = dense_limit_eigenvalue(&DenseLimitModel::new(2.0, 1.0).unwrap());
        assert_eq!((l, m), (2.5, Mode::Ferromagnetic));
        let (l, m) = dense_limit_eigenvalue(&DenseLimitModel::new(0.5, 1.0).unwrap());
        assert_eq!((l, m), (2.0, Mode::Paramagnetic));
        let (l, _) = dense_limit_eigenvalue(&DenseLimitModel::new(1.0, 1.0).unwrap());
        assert_eq!(l, 2.0);
    }

    #[test]
    fn dense_density_examples() {
        let m2 = DenseLimitModel::new(2.0, 1.0).unwrap();
        assert_abs_diff_eq!(m2.magnetization(), 3f64.sqrt() / 2.0, epsilon = 1e-15);
        let peak = dense_limit_density(&m2, m2.magnetization(), true);
        assert_abs_diff_eq!(peak, 1.0 / (2.0 * PI * 0.25).sqrt(), epsilon = 1e-12);
        assert_abs_diff_eq!(
            dense_limit_density(&m2, -m2.magnetization(), false),
            peak,
            epsilon = 1e-15
        );
        let half = DenseLimitModel::new(0.5, 1.0).unwrap();
        assert_abs_diff_eq!(dense_limit_density(&half, 0.0, true), 0.398_942_280_4, epsilon = 1e-9);
    }
}
