//! Population dynamics for the ensemble-level cavity equations.
//!
//! A [`Population`] holds `S` samples of the cavity pair `(A, H)`. One sweep
//! draws `S` fresh samples, each from `k ~ r(k)` and `k − 1` uniformly chosen
//! members of the previous population:
//!
//! ```text
//! A = λ − Σ_{j<k} J_j² / A_j,    H = Σ_{j<k} J_j H_j / A_j
//! ```
//!
//! The `H` recursion is linear, so the population is renormalized to unit
//! second moment after each sweep and the factor is kept as a growth rate.
//! `Λ` is the smallest `λ` at which every growth rate stays below one.
//!
//! Samples are produced in fixed-size chunks, each with its own counter-based
//! random stream, and chunk statistics are reduced in chunk order; results
//! do not depend on the number of rayon workers.

use std::io::Write;

use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::analytic::Mode;
use crate::ensemble::{edge_degree_law, CouplingLaw, CouplingSampler, DegreeDistribution, Ensemble};
use crate::error::{Error, Result};
use crate::histogram::{Binning, Histogram};
use crate::rng::{self, Domain};
use crate::summation::Compensated;

const CHUNK: usize = 8192;
/// Members with `|A| < ZERO_DIVISOR · |λ|` are redrawn.
const ZERO_DIVISOR: f64 = 1e-12;
const MAX_REDRAWS: usize = 1000;

/// Statistics recorded after each sweep.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SweepStats {
    pub sweep: usize,
    /// Ratio of the expected new first moment of `H` to the old one.
    pub m1_rate: f64,
    /// Realized growth of the second moment of `H`.
    pub m2_rate: f64,
    /// Growth of the second moment through the fluctuation term alone,
    /// `E_r[k−1] E[J²] ⟨H²/A²⟩ / ⟨H²⟩`.
    pub fluct_rate: f64,
    /// Fraction of new samples with `A ≤ 0`.
    pub frac_negative_a: f64,
}

/// Sample population of cavity pairs `(A, H)`.
#[derive(Debug, Clone, PartialEq)]
pub struct Population {
    pub a: Vec<f64>,
    pub h: Vec<f64>,
    pub lambda: f64,
    pub sweep_count: usize,
    /// Square root of the last pre-normalization second moment of `H`.
    pub h_scale: f64,
    /// Sum of `ln h_scale` over all sweeps.
    pub log_h_scale: f64,
    pub history: Vec<SweepStats>,
    /// Number of members redrawn because of a vanishing divisor.
    pub redrawn: u64,
    pub seed: u64,
}

/// Precomputed samplers and moments of `(r, law)`.
#[derive(Debug, Clone)]
pub struct Kernel {
    law: DegreeDistribution,
    degree: WeightedIndex<f64>,
    coupling: CouplingSampler,
    mean_j: f64,
    mean_j2: f64,
    /// Mean number of members per sample.
    excess: f64,
    /// Members combined per sample are `k − offset`.
    offset: usize,
}

impl Kernel {
    /// Cavity kernel: `k ~ r`, `k − 1` members per sample.
    pub fn cavity(edge_law: &DegreeDistribution, coupling: &CouplingLaw) -> Result<Self> {
        if edge_law.prob(0) > 0.0 {
            return Err(Error::InvalidDistribution(
                "an edge law carries no mass at k = 0".into(),
            ));
        }
        Self::build(edge_law, coupling, 1)
    }

    pub fn for_ensemble(ensemble: &Ensemble) -> Result<Self> {
        Self::cavity(&ensemble.edge_law()?, &ensemble.coupling)
    }

    /// Full-system kernel: `k ~ p`, `k` members per sample.
    pub fn full(degrees: &DegreeDistribution, coupling: &CouplingLaw) -> Result<Self> {
        Self::build(degrees, coupling, 0)
    }

    fn build(law: &DegreeDistribution, coupling: &CouplingLaw, offset: usize) -> Result<Self> {
        coupling.validate()?;
        let excess = law
            .mass()
            .iter()
            .enumerate()
            .map(|(k, p)| p * k.saturating_sub(offset) as f64)
            .sum();
        Ok(Self {
            law: law.clone(),
            degree: law.sampler(),
            coupling: coupling.sampler(),
            mean_j: coupling.mean(),
            mean_j2: coupling.second_moment(),
            excess,
            offset,
        })
    }

    pub fn law(&self) -> &DegreeDistribution {
        &self.law
    }

    /// Mean number of members combined per sample.
    pub fn mean_members(&self) -> f64 {
        self.excess
    }

    /// One draw of `(A, H)` from `source`; `None` for `h` skips the `H` sum.
    #[inline]
    fn draw(
        &self,
        rng: &mut ChaCha8Rng,
        lambda: f64,
        a: &[f64],
        h: Option<&[f64]>,
        redrawn: &mut u64,
    ) -> Result<(f64, f64)> {
        let members = self.degree.sample(rng).saturating_sub(self.offset);
        let threshold = ZERO_DIVISOR * lambda.abs();
        let mut a_new = lambda;
        let mut h_new = 0.0;
        for _ in 0..members {
            let mut idx = rng.random_range(0..a.len());
            let mut tries = 0;
            while a[idx].abs() < threshold || a[idx] == 0.0 {
                *redrawn += 1;
                tries += 1;
                if tries > MAX_REDRAWS {
                    return Err(Error::SingularMessage { from: idx, to: idx });
                }
                idx = rng.random_range(0..a.len());
            }
            let j = self.coupling.sample(rng);
            let inv = 1.0 / a[idx];
            a_new -= j * j * inv;
            if let Some(h) = h {
                h_new += j * h[idx] * inv;
            }
        }
        Ok((a_new, h_new))
    }
}

#[derive(Debug, Clone, Copy, Default)]
struct ChunkSums {
    h1: Compensated,
    h2: Compensated,
    negative: u64,
    redrawn: u64,
}

/// Population moments entering the rates.
#[derive(Debug, Clone, Copy, Default)]
struct Moments {
    h1: f64,
    h2: f64,
    h_over_a: f64,
    h2_over_a2: f64,
}

fn moments(a: &[f64], h: &[f64]) -> Moments {
    let parts: Vec<[Compensated; 4]> = a
        .par_chunks(CHUNK)
        .zip(h.par_chunks(CHUNK))
        .map(|(ca, ch)| {
            let mut acc = [Compensated::default(); 4];
            for (&a, &h) in ca.iter().zip(ch) {
                let ratio = if a != 0.0 { h / a } else { 0.0 };
                acc[0].add(h);
                acc[1].add(h * h);
                acc[2].add(ratio);
                acc[3].add(ratio * ratio);
            }
            acc
        })
        .collect();
    let mut total = [Compensated::default(); 4];
    for part in &parts {
        for (t, p) in total.iter_mut().zip(part) {
            t.merge(p);
        }
    }
    let n = a.len() as f64;
    Moments {
        h1: total[0].value() / n,
        h2: total[1].value() / n,
        h_over_a: total[2].value() / n,
        h2_over_a2: total[3].value() / n,
    }
}

impl Population {
    /// `size` samples at `A = λ`, `H = 1`.
    pub fn new(size: usize, lambda: f64, seed: u64) -> Result<Self> {
        if size == 0 {
            return Err(Error::EmptyInput);
        }
        Ok(Self::from_samples(vec![lambda; size], vec![1.0; size], lambda, seed))
    }

    pub fn from_samples(a: Vec<f64>, h: Vec<f64>, lambda: f64, seed: u64) -> Self {
        assert_eq!(a.len(), h.len(), "A and H populations differ in size");
        Self {
            a,
            h,
            lambda,
            sweep_count: 0,
            h_scale: 1.0,
            log_h_scale: 0.0,
            history: Vec::new(),
            redrawn: 0,
            seed,
        }
    }

    pub fn len(&self) -> usize {
        self.a.len()
    }

    pub fn is_empty(&self) -> bool {
        self.a.is_empty()
    }

    /// One synchronous sweep with the cavity kernel.
    pub fn sweep(&mut self, kernel: &Kernel) -> Result<SweepStats> {
        let before = moments(&self.a, &self.h);
        let sweep = self.sweep_count as u64;
        let lambda = self.lambda;
        let mut a_out = vec![0.0; self.len()];
        let mut h_out = vec![0.0; self.len()];
        let (a_src, h_src, seed) = (&self.a, &self.h, self.seed);
        let parts: Vec<ChunkSums> = a_out
            .par_chunks_mut(CHUNK)
            .zip(h_out.par_chunks_mut(CHUNK))
            .enumerate()
            .map(|(c, (ca, ch))| {
                let mut rng = rng::stream(seed, Domain::Population, rng::pack(sweep, c as u64));
                let mut sums = ChunkSums::default();
                for (a, h) in ca.iter_mut().zip(ch.iter_mut()) {
                    let (an, hn) = kernel.draw(&mut rng, lambda, a_src, Some(h_src), &mut sums.redrawn)?;
                    *a = an;
                    *h = hn;
                    sums.h1.add(hn);
                    sums.h2.add(hn * hn);
                    sums.negative += u64::from(an <= 0.0);
                }
                Ok(sums)
            })
            .collect::<Result<_>>()?;

        let mut total = ChunkSums::default();
        for p in &parts {
            total.h1.merge(&p.h1);
            total.h2.merge(&p.h2);
            total.negative += p.negative;
            total.redrawn += p.redrawn;
        }
        let n = self.len() as f64;
        let m2 = total.h2.value() / n;
        let scale = m2.sqrt();
        if scale > 0.0 && scale.is_finite() {
            let inv = 1.0 / scale;
            h_out.par_iter_mut().for_each(|h| *h *= inv);
        }

        let m1_rate = if before.h1 != 0.0 {
            kernel.excess * kernel.mean_j * before.h_over_a / before.h1
        } else {
            0.0
        };
        let fluct_rate = if before.h2 > 0.0 {
            kernel.excess * kernel.mean_j2 * before.h2_over_a2 / before.h2
        } else {
            0.0
        };
        let m2_rate = if before.h2 > 0.0 { m2 / before.h2 } else { 0.0 };

        self.a = a_out;
        self.h = h_out;
        self.sweep_count += 1;
        self.h_scale = scale;
        self.log_h_scale += scale.ln();
        self.redrawn += total.redrawn;
        let stats = SweepStats {
            sweep: self.sweep_count,
            m1_rate,
            m2_rate,
            fluct_rate,
            frac_negative_a: total.negative as f64 / n,
        };
        self.history.push(stats);
        Ok(stats)
    }

    pub fn run(&mut self, kernel: &Kernel, sweeps: usize) -> Result<()> {
        for _ in 0..sweeps {
            self.sweep(kernel)?;
        }
        Ok(())
    }

    fn window(&self, window: usize) -> Result<&[SweepStats]> {
        if window == 0 || window > self.history.len() {
            return Err(Error::WindowExceedsHistory {
                window,
                available: self.history.len(),
            });
        }
        Ok(&self.history[self.history.len() - window..])
    }

    /// Geometric mean of the per-sweep second-moment growth of `H`.
    pub fn h_growth_rate(&self, window: usize) -> Result<f64> {
        Ok(geometric_mean(self.window(window)?.iter().map(|s| s.m2_rate)))
    }

    /// Geometric mean of the per-sweep first-moment ratio, in absolute value.
    pub fn m1_growth_rate(&self, window: usize) -> Result<f64> {
        Ok(geometric_mean(self.window(window)?.iter().map(|s| s.m1_rate.abs())))
    }

    /// Geometric mean of the fluctuation-only rate.
    pub fn fluctuation_rate(&self, window: usize) -> Result<f64> {
        Ok(geometric_mean(self.window(window)?.iter().map(|s| s.fluct_rate)))
    }

    /// Largest fraction of nonpositive `A` seen in the window.
    pub fn max_negative_fraction(&self, window: usize) -> Result<f64> {
        Ok(self
            .window(window)?
            .iter()
            .fold(0.0, |m: f64, s| m.max(s.frac_negative_a)))
    }

    pub fn mean_a(&self) -> f64 {
        let mut acc = Compensated::default();
        self.a.iter().for_each(|&a| acc.add(a));
        acc.value() / self.len() as f64
    }

    pub fn std_a(&self) -> f64 {
        let mean = self.mean_a();
        let mut acc = Compensated::default();
        self.a.iter().for_each(|&a| acc.add((a - mean) * (a - mean)));
        (acc.value() / self.len() as f64).sqrt()
    }

    /// First line is a JSON header, then `A,H` rows.
    pub fn write_snapshot<W: Write>(&self, mut out: W) -> Result<()> {
        let header = serde_json::json!({
            "lambda": self.lambda,
            "sweep": self.sweep_count,
            "h_scale": self.h_scale,
            "seed": self.seed,
        });
        writeln!(out, "# {header}")?;
        writeln!(out, "A,H")?;
        for (a, h) in self.a.iter().zip(&self.h) {
            writeln!(out, "{a:?},{h:?}")?;
        }
        Ok(())
    }

    /// CSV `sweep,m1_rate,m2_rate,frac_neg_A`.
    pub fn write_rate_trace<W: Write>(&self, mut out: W) -> Result<()> {
        writeln!(out, "sweep,m1_rate,m2_rate,frac_neg_A")?;
        for s in &self.history {
            writeln!(out, "{},{},{},{}", s.sweep, s.m1_rate, s.m2_rate, s.frac_negative_a)?;
        }
        Ok(())
    }
}

fn geometric_mean<I: Iterator<Item = f64>>(values: I) -> f64 {
    let mut count = 0usize;
    let mut log_sum = Compensated::default();
    for v in values {
        if !(v > 0.0) {
            return 0.0;
        }
        log_sum.add(v.ln());
        count += 1;
    }
    (log_sum.value() / count as f64).exp()
}

/// One synchronous sweep of `pop` under `(r, law)`.
pub fn sweep_population(
    pop: &mut Population,
    edge_law: &DegreeDistribution,
    law: &CouplingLaw,
) -> Result<SweepStats> {
    pop.sweep(&Kernel::cavity(edge_law, law)?)
}

/// Settings for [`detect_eigenvalue`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DetectionOptions {
    /// Search interval; defaults to `(0, k_max · max|J| + 0.1)`.
    pub bracket: Option<(f64, f64)>,
    pub tol: f64,
    pub pop_size: usize,
    pub burn_in: usize,
    pub window: usize,
    /// A probe with a larger fraction of nonpositive `A` is below `Λ`.
    pub max_negative_fraction: f64,
    /// Rates closer than this at the detected point are reported as critical.
    pub mode_tie: f64,
    pub seed: u64,
}

impl Default for DetectionOptions {
    fn default() -> Self {
        Self {
            bracket: None,
            tol: 1e-3,
            pop_size: 100_000,
            burn_in: 100,
            window: 100,
            max_negative_fraction: 1e-4,
            mode_tie: 0.02,
            seed: 0,
        }
    }
}

/// Rates measured at one `λ`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Probe {
    pub lambda: f64,
    pub h_rate: f64,
    pub m1_rate: f64,
    pub fluct_rate: f64,
    pub frac_negative_a: f64,
    /// `A` population stayed positive and every `H` rate is below one.
    pub above: bool,
}

impl Probe {
    pub fn max_rate(&self) -> f64 {
        self.h_rate.max(self.m1_rate)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Detection {
    pub lambda: f64,
    pub mode: Mode,
    pub lo: f64,
    pub hi: f64,
    pub probes: Vec<Probe>,
}

/// Runs a fresh population at `lambda` and measures its rates.
pub fn probe(kernel: &Kernel, lambda: f64, options: &DetectionOptions) -> Result<(Probe, Population)> {
    let mut pop = Population::new(options.pop_size, lambda, options.seed)?;
    pop.run(kernel, options.burn_in + options.window)?;
    let frac_negative_a = pop.max_negative_fraction(options.window)?;
    let h_rate = pop.h_growth_rate(options.window)?;
    let m1_rate = pop.m1_growth_rate(options.window)?;
    let fluct_rate = pop.fluctuation_rate(options.window)?;
    let valid = frac_negative_a <= options.max_negative_fraction;
    let probe = Probe {
        lambda,
        h_rate,
        m1_rate,
        fluct_rate,
        frac_negative_a,
        above: valid && h_rate < 1.0 && m1_rate < 1.0,
    };
    Ok((probe, pop))
}

/// Bisection for the smallest `λ` at which the `H` population decays.
///
/// Every probe uses the same seed, so the predicate varies smoothly with `λ`.
/// The mode compares the first-moment and fluctuation rates at the upper end
/// of the final bracket: the rate that sits at one is the one crossing at
/// the larger `λ`.
pub fn detect_eigenvalue(ensemble: &Ensemble, options: &DetectionOptions) -> Result<Detection> {
    let kernel = Kernel::for_ensemble(ensemble)?;
    let (mut lo, mut hi) = options
        .bracket
        .unwrap_or((0.0, ensemble.eigenvalue_bound() + 0.1));
    if !(lo < hi) {
        return Err(Error::InvalidBracket {
            lo,
            hi,
            reason: "lower end not below upper end".into(),
        });
    }
    let mut probes = Vec::new();
    let (mut hi_probe, _) = probe(&kernel, hi, options)?;
    probes.push(hi_probe);
    if !hi_probe.above {
        return Err(Error::InvalidBracket {
            lo,
            hi,
            reason: format!("growth rate {} at the upper end", hi_probe.max_rate()),
        });
    }
    let mut lo_probe: Option<Probe> = None;
    while hi - lo > options.tol {
        let mid = 0.5 * (lo + hi);
        let (p, _) = probe(&kernel, mid, options)?;
        probes.push(p);
        if p.above {
            hi = mid;
            hi_probe = p;
        } else {
            lo = mid;
            lo_probe = Some(p);
        }
    }
    if let Some(lp) = lo_probe {
        if lp.frac_negative_a > options.max_negative_fraction && hi_probe.max_rate() < 0.9 {
            return Err(Error::DefectRegime {
                lambda: hi,
                frac_negative_a: lp.frac_negative_a,
                max_rate: hi_probe.max_rate(),
            });
        }
    }
    let mode = if (hi_probe.m1_rate - hi_probe.fluct_rate).abs() <= options.mode_tie {
        Mode::Critical
    } else if hi_probe.m1_rate > hi_probe.fluct_rate {
        Mode::Ferromagnetic
    } else {
        Mode::Paramagnetic
    };
    Ok(Detection {
        lambda: 0.5 * (lo + hi),
        mode,
        lo,
        hi,
        probes,
    })
}

/// Full-system pairs `(A_i, H_i)` drawn with `k ~ p` and `k` members.
pub fn full_distribution(
    pop: &Population,
    degrees: &DegreeDistribution,
    law: &CouplingLaw,
    seed: u64,
    n_emit: usize,
) -> Result<Vec<(f64, f64)>> {
    let kernel = Kernel::full(degrees, law)?;
    let mut out = vec![(0.0, 0.0); n_emit];
    out.par_chunks_mut(CHUNK)
        .enumerate()
        .try_for_each(|(c, chunk)| -> Result<()> {
            let mut rng = rng::stream(seed, Domain::FullDistribution, c as u64);
            let mut redrawn = 0;
            for slot in chunk {
                *slot = kernel.draw(&mut rng, pop.lambda, &pop.a, Some(&pop.h), &mut redrawn)?;
            }
            Ok(())
        })?;
    Ok(out)
}

/// Mean of `(H/A)²` over pairs with `A ≠ 0`.
pub fn mean_square_component(pairs: &[(f64, f64)]) -> f64 {
    let mut acc = Compensated::default();
    let mut count = 0usize;
    for &(a, h) in pairs {
        if a != 0.0 {
            let v = h / a;
            acc.add(v * v);
            count += 1;
        }
    }
    if count == 0 {
        return f64::NAN;
    }
    acc.value() / count as f64
}

/// Histogram of `v = H/A` rescaled so that the mean of `v²` is `target_t`.
#[derive(Debug, Clone, PartialEq)]
pub struct DensityEstimate {
    pub histogram: Histogram,
    /// Mean of `(H/A)²` before rescaling.
    pub t: f64,
    /// Pairs with `A = 0`, left out.
    pub excluded: usize,
}

pub fn eigenvector_density(pairs: &[(f64, f64)], target_t: f64, binning: Binning) -> Result<DensityEstimate> {
    let t = mean_square_component(pairs);
    if !(t.is_finite() && t > 0.0) {
        return Err(Error::TrivialField);
    }
    let scale = (target_t / t).sqrt();
    let excluded = pairs.iter().filter(|(a, _)| *a == 0.0).count();
    let histogram = Histogram::from_values(
        binning,
        pairs.iter().filter(|(a, _)| *a != 0.0).map(|&(a, h)| scale * h / a),
    );
    Ok(DensityEstimate {
        histogram,
        t,
        excluded,
    })
}

/// Stationary `A`-only population and its inverse moments.
#[derive(Debug, Clone, PartialEq)]
pub struct MarginalA {
    pub a: Vec<f64>,
    pub lambda: f64,
    pub mean_inv_a: f64,
    pub mean_inv_a2: f64,
    pub frac_negative_a: f64,
    pub min_a: f64,
}

/// Iterates `A = λ − Σ_{j<k} J_j²/A_j` with `k ~ r`, starting from `A = λ`.
pub fn marginal_a_fixed_point(
    edge_law: &DegreeDistribution,
    law: &CouplingLaw,
    lambda: f64,
    pop_size: usize,
    sweeps: usize,
    seed: u64,
) -> Result<MarginalA> {
    if pop_size == 0 {
        return Err(Error::EmptyInput);
    }
    let kernel = Kernel::cavity(edge_law, law)?;
    let mut a = vec![lambda; pop_size];
    let mut next = vec![0.0; pop_size];
    for sweep in 0..sweeps as u64 {
        let src = &a;
        next.par_chunks_mut(CHUNK)
            .enumerate()
            .try_for_each(|(c, chunk)| -> Result<()> {
                let mut rng = rng::stream(seed, Domain::Population, rng::pack(sweep, c as u64));
                let mut redrawn = 0;
                for slot in chunk {
                    *slot = kernel.draw(&mut rng, lambda, src, None, &mut redrawn)?.0;
                }
                Ok(())
            })?;
        std::mem::swap(&mut a, &mut next);
    }
    let mut inv = Compensated::default();
    let mut inv2 = Compensated::default();
    let mut negative = 0usize;
    let mut min_a = f64::INFINITY;
    for &x in &a {
        inv.add(1.0 / x);
        inv2.add(1.0 / (x * x));
        negative += usize::from(x <= 0.0);
        min_a = min_a.min(x);
    }
    let n = pop_size as f64;
    Ok(MarginalA {
        lambda,
        mean_inv_a: inv.value() / n,
        mean_inv_a2: inv2.value() / n,
        frac_negative_a: negative as f64 / n,
        min_a,
        a,
    })
}

/// Decoupled first- and second-moment conditions; each equals one at its
/// own instability point.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MomentConditions {
    /// `E[J] · Σ r(k)(k−1) · ⟨A⁻¹⟩`.
    pub lhs_m1: f64,
    /// `E[J²] · Σ r(k)(k−1) · ⟨A⁻²⟩`.
    pub lhs_m2: f64,
    pub mean_inv_a: f64,
    pub mean_inv_a2: f64,
    pub frac_negative_a: f64,
    pub min_a: f64,
}

pub fn moment_conditions(edge_law: &DegreeDistribution, law: &CouplingLaw, marginal: &MarginalA) -> MomentConditions {
    let excess = edge_law.mean_excess();
    MomentConditions {
        lhs_m1: law.mean() * excess * marginal.mean_inv_a,
        lhs_m2: law.second_moment() * excess * marginal.mean_inv_a2,
        mean_inv_a: marginal.mean_inv_a,
        mean_inv_a2: marginal.mean_inv_a2,
        frac_negative_a: marginal.frac_negative_a,
        min_a: marginal.min_a,
    }
}

/// Runs the `A`-only population and evaluates both moment conditions.
pub fn second_moment_condition(
    edge_law: &DegreeDistribution,
    law: &CouplingLaw,
    lambda: f64,
    pop_size: usize,
    sweeps: usize,
    seed: u64,
) -> Result<MomentConditions> {
    let marginal = marginal_a_fixed_point(edge_law, law, lambda, pop_size, sweeps, seed)?;
    Ok(moment_conditions(edge_law, law, &marginal))
}

/// Bias `Δ` for which `λ` is the ferromagnetic eigenvalue under the
/// decoupled first-moment condition: `Δ = 1 / (J · Σ r(k)(k−1) · ⟨A⁻¹⟩)`.
pub fn mixture_delta_of_lambda(edge_law: &DegreeDistribution, j: f64, marginal: &MarginalA) -> Result<f64> {
    let nonpositive = marginal.a.iter().filter(|&&a| a <= 0.0).count();
    if nonpositive > 0 {
        return Err(Error::MixtureRelationInapplicable {
            nonpositive,
            total: marginal.a.len(),
        });
    }
    Ok(1.0 / (j * edge_law.mean_excess() * marginal.mean_inv_a))
}

/// Settings for the `A`-only population used by the mixture relation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct MarginalOptions {
    pub pop_size: usize,
    pub sweeps: usize,
    pub seed: u64,
}

impl Default for MarginalOptions {
    fn default() -> Self {
        Self {
            pop_size: 100_000,
            sweeps: 300,
            seed: 0,
        }
    }
}

/// Inverts the mixture relation: the `λ` at which `Δ(λ) = delta`, by
/// bisection on `bracket`. The `A` population depends on the couplings only
/// through `J²`, so for the binary law it is the same for every `Δ`.
pub fn mixture_lambda_of_delta(
    degrees: &DegreeDistribution,
    j: f64,
    delta: f64,
    bracket: (f64, f64),
    tol: f64,
    options: &MarginalOptions,
) -> Result<f64> {
    let r = edge_degree_law(degrees)?;
    let law = CouplingLaw::binary(delta, j)?;
    let eval = |lambda: f64| -> Result<f64> {
        let m = marginal_a_fixed_point(&r, &law, lambda, options.pop_size, options.sweeps, options.seed)?;
        mixture_delta_of_lambda(&r, j, &m)
    };
    let (mut lo, mut hi) = bracket;
    let d_hi = eval(hi)?;
    if d_hi < delta {
        return Err(Error::InvalidBracket {
            lo,
            hi,
            reason: format!("relation gives {d_hi} < {delta} at the upper end"),
        });
    }
    while hi - lo > tol {
        let mid = 0.5 * (lo + hi);
        match eval(mid) {
            Ok(d) if d >= delta => hi = mid,
            Ok(_) | Err(Error::MixtureRelationInapplicable { .. }) => lo = mid,
            Err(e) => return Err(e),
        }
    }
    Ok(0.5 * (lo + hi))
}
