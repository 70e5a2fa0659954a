//! Bounded-degree random matrix ensembles and the stub-matching generator.

use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::seq::SliceRandom;
use rand::Rng;
use rand_distr::Normal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::instance::SparseSymmetricInstance;
use crate::rng::{self, Domain};

const NORMALIZATION_TOL: f64 = 1e-12;

/// Probability mass `p(k)` on degrees `0..=k_max`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct DegreeDistribution {
    mass: Vec<f64>,
}

impl DegreeDistribution {
    /// Validates and trims trailing zero mass, so `mass.len() == k_max + 1`.
    pub fn new(mut mass: Vec<f64>) -> Result<Self> {
        if let Some(bad) = mass.iter().find(|p| !p.is_finite() || **p < 0.0) {
            return Err(Error::InvalidDistribution(format!("entry {bad} is not a probability")));
        }
        let total: f64 = mass.iter().sum();
        if (total - 1.0).abs() > NORMALIZATION_TOL {
            return Err(Error::InvalidDistribution(format!("mass sums to {total}, not 1")));
        }
        while mass.last() == Some(&0.0) {
            mass.pop();
        }
        Ok(Self { mass })
    }

    /// `p(k) = δ_{k,K}`.
    pub fn single(k: usize) -> Self {
        let mut mass = vec![0.0; k + 1];
        mass[k] = 1.0;
        Self { mass }
    }

    /// A finite mixture `Σ w δ_{k}`; weights must sum to one.
    pub fn mixture(components: &[(usize, f64)]) -> Result<Self> {
        let k_max = components.iter().map(|&(k, _)| k).max().unwrap_or(0);
        let mut mass = vec![0.0; k_max + 1];
        for &(k, w) in components {
            mass[k] += w;
        }
        Self::new(mass)
    }

    pub fn k_max(&self) -> usize {
        self.mass.len().saturating_sub(1)
    }

    pub fn mass(&self) -> &[f64] {
        &self.mass
    }

    pub fn prob(&self, k: usize) -> f64 {
        self.mass.get(k).copied().unwrap_or(0.0)
    }

    pub fn mean(&self) -> f64 {
        self.mass.iter().enumerate().map(|(k, p)| k as f64 * p).sum()
    }

    /// Degrees carrying nonzero mass.
    pub fn support(&self) -> Vec<usize> {
        (0..self.mass.len()).filter(|&k| self.mass[k] > 0.0).collect()
    }

    /// `Σ_k p(k) (k − 1)`; applied to an edge law this is the mean number of
    /// cavity neighbours feeding one message.
    pub fn mean_excess(&self) -> f64 {
        self.mass
            .iter()
            .enumerate()
            .map(|(k, p)| p * (k as f64 - 1.0))
            .sum()
    }

    pub(crate) fn sampler(&self) -> WeightedIndex<f64> {
        WeightedIndex::new(&self.mass).expect("validated mass")
    }
}

impl TryFrom<Vec<f64>> for DegreeDistribution {
    type Error = Error;
    fn try_from(mass: Vec<f64>) -> Result<Self> {
        Self::new(mass)
    }
}

impl From<DegreeDistribution> for Vec<f64> {
    fn from(d: DegreeDistribution) -> Self {
        d.mass
    }
}

/// Law of the nonzero couplings `J_ij`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CouplingLaw {
    /// `+J` with probability `(1 + Δ)/2`, `−J` otherwise.
    Binary { delta: f64, j: f64 },
    Discrete { values: Vec<f64>, probabilities: Vec<f64> },
    Gaussian { mean: f64, variance: f64 },
}

impl CouplingLaw {
    pub fn binary(delta: f64, j: f64) -> Result<Self> {
        let law = CouplingLaw::Binary { delta, j };
        law.validate()?;
        Ok(law)
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            CouplingLaw::Binary { delta, j } => {
                if !(0.0..=1.0).contains(delta) {
                    return Err(Error::InvalidCouplingLaw(format!("bias {delta} outside [0, 1]")));
                }
                if !(*j > 0.0 && j.is_finite()) {
                    return Err(Error::InvalidCouplingLaw(format!("magnitude {j} must be positive")));
                }
            }
            CouplingLaw::Discrete { values, probabilities } => {
                if values.is_empty() || values.len() != probabilities.len() {
                    return Err(Error::InvalidCouplingLaw(
                        "values and probabilities must be nonempty and of equal length".into(),
                    ));
                }
                if values.iter().any(|v| !v.is_finite()) {
                    return Err(Error::InvalidCouplingLaw("non-finite value".into()));
                }
                if probabilities.iter().any(|p| !p.is_finite() || *p < 0.0) {
                    return Err(Error::InvalidCouplingLaw("negative probability".into()));
                }
                let total: f64 = probabilities.iter().sum();
                if (total - 1.0).abs() > NORMALIZATION_TOL {
                    return Err(Error::InvalidCouplingLaw(format!(
                        "probabilities sum to {total}, not 1"
                    )));
                }
            }
            CouplingLaw::Gaussian { mean, variance } => {
                if !mean.is_finite() || !(variance.is_finite() && *variance >= 0.0) {
                    return Err(Error::InvalidCouplingLaw(format!(
                        "gaussian({mean}, {variance}) is not a valid law"
                    )));
                }
            }
        }
        Ok(())
    }

    /// `E[J]`.
    pub fn mean(&self) -> f64 {
        match self {
            CouplingLaw::Binary { delta, j } => delta * j,
            CouplingLaw::Discrete { values, probabilities } => {
                values.iter().zip(probabilities).map(|(v, p)| v * p).sum()
            }
            CouplingLaw::Gaussian { mean, .. } => *mean,
        }
    }

    /// `E[J²]`.
    pub fn second_moment(&self) -> f64 {
        match self {
            CouplingLaw::Binary { j, .. } => j * j,
            CouplingLaw::Discrete { values, probabilities } => {
                values.iter().zip(probabilities).map(|(v, p)| v * v * p).sum()
            }
            CouplingLaw::Gaussian { mean, variance } => variance + mean * mean,
        }
    }

    /// Largest possible `|J|`, or a six-sigma envelope for the Gaussian law.
    pub fn magnitude_bound(&self) -> f64 {
        match self {
            CouplingLaw::Binary { j, .. } => *j,
            CouplingLaw::Discrete { values, .. } => values.iter().fold(0.0, |m, v| m.max(v.abs())),
            CouplingLaw::Gaussian { mean, variance } => mean.abs() + 6.0 * variance.sqrt(),
        }
    }

    pub fn sampler(&self) -> CouplingSampler {
        match self {
            CouplingLaw::Binary { delta, j } => CouplingSampler::Binary {
                p_plus: (1.0 + delta) / 2.0,
                j: *j,
            },
            CouplingLaw::Discrete { values, probabilities } => CouplingSampler::Discrete {
                values: values.clone(),
                index: WeightedIndex::new(probabilities).expect("validated probabilities"),
            },
            CouplingLaw::Gaussian { mean, variance } => CouplingSampler::Gaussian(
                Normal::new(*mean, variance.sqrt()).expect("validated variance"),
            ),
        }
    }
}

/// Pre-built sampler for a [`CouplingLaw`].
#[derive(Debug, Clone)]
pub enum CouplingSampler {
    Binary { p_plus: f64, j: f64 },
    Discrete { values: Vec<f64>, index: WeightedIndex<f64> },
    Gaussian(Normal<f64>),
}

impl CouplingSampler {
    #[inline]
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        match self {
            CouplingSampler::Binary { p_plus, j } => {
                if rng.random::<f64>() < *p_plus {
                    *j
                } else {
                    -*j
                }
            }
            CouplingSampler::Discrete { values, index } => values[index.sample(rng)],
            CouplingSampler::Gaussian(normal) => normal.sample(rng),
        }
    }
}

/// A degree distribution together with a coupling law.
#[derive(Debug, Clone, PartialEq)]
pub struct Ensemble {
    pub degrees: DegreeDistribution,
    pub coupling: CouplingLaw,
}

impl Ensemble {
    pub fn new(degrees: DegreeDistribution, coupling: CouplingLaw) -> Result<Self> {
        coupling.validate()?;
        Ok(Self { degrees, coupling })
    }

    pub fn edge_law(&self) -> Result<DegreeDistribution> {
        edge_degree_law(&self.degrees)
    }

    /// Gershgorin-type bound `k_max · max|J|` on the first eigenvalue.
    pub fn eigenvalue_bound(&self) -> f64 {
        self.degrees.k_max() as f64 * self.coupling.magnitude_bound()
    }
}

/// Degree law of a link terminal, `r(k) = k p(k) / Σ k p(k)`.
pub fn edge_degree_law(p: &DegreeDistribution) -> Result<DegreeDistribution> {
    let mean = p.mean();
    if mean <= 0.0 {
        return Err(Error::DegenerateEnsemble);
    }
    let mut mass: Vec<f64> = p
        .mass
        .iter()
        .enumerate()
        .map(|(k, pk)| k as f64 * pk / mean)
        .collect();
    // Remove the rounding residue so the result passes validation.
    let total: f64 = mass.iter().sum();
    for m in &mut mass {
        *m /= total;
    }
    DegreeDistribution::new(mass)
}

/// One coupling value drawn from `law`.
pub fn sample_coupling(law: &CouplingLaw, seed: u64) -> f64 {
    let mut rng = rng::stream(seed, Domain::Coupling, 0);
    law.sampler().sample(&mut rng)
}

/// Assigns `round(n p(k))` indices degree `k` by the largest-remainder
/// method, shuffles, and repairs an odd degree sum by moving one uniformly
/// chosen index to the nearest opposite-parity degree in the support.
pub fn sample_degree_sequence(p: &DegreeDistribution, n: usize, seed: u64) -> Result<Vec<usize>> {
    if n < 2 {
        return Err(Error::InfeasibleSequence(format!("n = {n} < 2")));
    }
    let support = p.support();
    if let Some(&k_max) = support.last() {
        if k_max >= n {
            return Err(Error::InfeasibleSequence(format!(
                "degree {k_max} cannot be realized on {n} indices"
            )));
        }
    }
    let exact: Vec<f64> = p.mass.iter().map(|pk| pk * n as f64).collect();
    let mut counts: Vec<usize> = exact.iter().map(|x| x.floor() as usize).collect();
    let assigned: usize = counts.iter().sum();
    let mut order: Vec<usize> = (0..exact.len()).filter(|&k| p.mass[k] > 0.0).collect();
    // Largest fractional part first; ties go to the smaller degree.
    order.sort_by(|&a, &b| {
        let fa = exact[a] - exact[a].floor();
        let fb = exact[b] - exact[b].floor();
        fb.total_cmp(&fa).then(a.cmp(&b))
    });
    for &k in order.iter().take(n.saturating_sub(assigned)) {
        counts[k] += 1;
    }

    let mut degrees: Vec<usize> = counts
        .iter()
        .enumerate()
        .flat_map(|(k, &c)| std::iter::repeat_n(k, c))
        .collect();
    debug_assert_eq!(degrees.len(), n);
    let mut rng = rng::stream(seed, Domain::Degrees, 0);
    degrees.shuffle(&mut rng);

    if degrees.iter().sum::<usize>() % 2 == 1 {
        let i = rng.random_range(0..n);
        let d = degrees[i];
        let replacement = support
            .iter()
            .copied()
            .filter(|&k| (k + d) % 2 == 1)
            .min_by_key(|&k| (k.abs_diff(d), k))
            .ok_or(Error::NoEvenSumCompletion)?;
        degrees[i] = replacement;
    }
    Ok(degrees)
}

/// Erdős–Gallai test for a simple graph with the given degrees.
pub fn is_graphical(degrees: &[usize]) -> bool {
    let total: usize = degrees.iter().sum();
    if total % 2 == 1 {
        return false;
    }
    let mut d = degrees.to_vec();
    d.sort_unstable_by(|a, b| b.cmp(a));
    let n = d.len();
    let mut prefix = 0usize;
    for k in 1..=n {
        prefix += d[k - 1];
        let tail: usize = d[k..].iter().map(|&x| x.min(k)).sum();
        if prefix > k * (k - 1) + tail {
            return false;
        }
    }
    true
}

/// Tuning for [`generate_instance`].
#[derive(Debug, Clone, Copy)]
pub struct GenerationOptions {
    /// Restarts allowed before giving up with [`Error::GenerationStalled`].
    pub max_restarts: usize,
}

impl Default for GenerationOptions {
    fn default() -> Self {
        Self { max_restarts: 100 }
    }
}

/// Random simple graph with exactly the given degrees, built by stub
/// matching with rejection of self-loops and repeated pairs. Couplings are
/// drawn i.i.d. from `law` afterwards, one per undirected edge.
pub fn generate_instance(
    degrees: &[usize],
    law: &CouplingLaw,
    seed: u64,
) -> Result<SparseSymmetricInstance> {
    generate_instance_with(degrees, law, seed, GenerationOptions::default())
}

pub fn generate_instance_with(
    degrees: &[usize],
    law: &CouplingLaw,
    seed: u64,
    options: GenerationOptions,
) -> Result<SparseSymmetricInstance> {
    law.validate()?;
    let n = degrees.len();
    if degrees.iter().sum::<usize>() % 2 == 1 {
        return Err(Error::InfeasibleSequence("odd degree sum".into()));
    }
    if !is_graphical(degrees) {
        return Err(Error::InfeasibleSequence(
            "sequence fails the Erdős–Gallai conditions".into(),
        ));
    }
    let stubs: Vec<u32> = degrees
        .iter()
        .enumerate()
        .flat_map(|(i, &d)| std::iter::repeat_n(i as u32, d))
        .collect();

    for attempt in 0..=options.max_restarts {
        let mut rng = rng::stream(seed, Domain::Topology, attempt as u64);
        if let Some(edges) = match_stubs(n, degrees, stubs.clone(), &mut rng) {
            let sampler = law.sampler();
            let mut coupling_rng = rng::stream(seed, Domain::Couplings, 0);
            let weighted: Vec<(usize, usize, f64)> = edges
                .into_iter()
                .map(|(i, j)| (i as usize, j as usize, sampler.sample(&mut coupling_rng)))
                .collect();
            return Ok(SparseSymmetricInstance::from_edges(n, &weighted)?.with_seed(seed));
        }
    }
    Err(Error::GenerationStalled {
        restarts: options.max_restarts,
    })
}

/// One pass of steps (A)–(C); `None` signals a deadlock.
fn match_stubs<R: Rng>(
    n: usize,
    degrees: &[usize],
    mut pool: Vec<u32>,
    rng: &mut R,
) -> Option<Vec<(u32, u32)>> {
    let mut adjacency: Vec<Vec<u32>> = degrees.iter().map(|&d| Vec::with_capacity(d)).collect();
    let mut edges = Vec::with_capacity(pool.len() / 2);
    let mut rejections = 0usize;
    debug_assert_eq!(adjacency.len(), n);
    while pool.len() >= 2 {
        let len = pool.len();
        let a = rng.random_range(0..len);
        let mut b = rng.random_range(0..len - 1);
        if b >= a {
            b += 1;
        }
        let (i, j) = (pool[a], pool[b]);
        if i != j && !adjacency[i as usize].contains(&j) {
            adjacency[i as usize].push(j);
            adjacency[j as usize].push(i);
            edges.push((i.min(j), i.max(j)));
            let (hi, lo) = (a.max(b), a.min(b));
            pool.swap_remove(hi);
            pool.swap_remove(lo);
            rejections = 0;
        } else {
            rejections += 1;
            if rejections >= 32 + 2 * len {
                if deadlocked(&pool, &adjacency) {
                    return None;
                }
                rejections = 0;
            }
        }
    }
    Some(edges)
}

/// No two remaining stubs can be joined: fewer than two distinct indices, or
/// every remaining cross pair is already linked.
fn deadlocked(pool: &[u32], adjacency: &[Vec<u32>]) -> bool {
    let mut distinct = pool.to_vec();
    distinct.sort_unstable();
    distinct.dedup();
    for (x, &i) in distinct.iter().enumerate() {
        for &j in &distinct[x + 1..] {
            if !adjacency[i as usize].contains(&j) {
                return false;
            }
        }
    }
    true
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn distribution_validation() {
        assert!(DegreeDistribution::new(vec![0.5, 0.6]).is_err());
        assert!(DegreeDistribution::new(vec![-0.1, 1.1]).is_err());
        let p = DegreeDistribution::new(vec![0.0, 0.5, 0.5, 0.0, 0.0]).unwrap();
        assert_eq!(p.k_max(), 2);
        assert_eq!(p.support(), vec![1, 2]);
    }

    #[test]
    fn edge_law_single_degree_is_fixed() {
        let r = edge_degree_law(&DegreeDistribution::single(4)).unwrap();
        assert_eq!(r, DegreeDistribution::single(4));
    }

    #[test]
    fn edge_law_of_the_four_eight_mixture() {
        let p = DegreeDistribution::mixture(&[(4, 0.9), (8, 0.1)]).unwrap();
        let r = edge_degree_law(&p).unwrap();
        assert_abs_diff_eq!(r.prob(4), 3.6 / 4.4, epsilon = 1e-12);
        assert_abs_diff_eq!(r.prob(8), 0.8 / 4.4, epsilon = 1e-12);
        assert_abs_diff_eq!(r.mass().iter().sum::<f64>(), 1.0, epsilon = 1e-15);
    }

    #[test]
    fn edge_law_drops_isolated_degree() {
        let p = DegreeDistribution::new(vec![0.5, 0.0, 0.5]).unwrap();
        let r = edge_degree_law(&p).unwrap();
        assert_eq!(r.prob(0), 0.0);
        assert_eq!(r.prob(2), 1.0);
    }

    #[test]
    fn edge_law_of_empty_graph_is_degenerate() {
        assert!(matches!(
            edge_degree_law(&DegreeDistribution::single(0)),
            Err(Error::DegenerateEnsemble)
        ));
    }

    #[test]
    fn edge_law_fixed_point_only_for_single_degree() {
        let p = DegreeDistribution::mixture(&[(2, 0.5), (3, 0.5)]).unwrap();
        assert_ne!(edge_degree_law(&p).unwrap(), p);
    }

    #[test]
    fn degree_sequence_examples() {
        let all4 = sample_degree_sequence(&DegreeDistribution::single(4), 8, 1).unwrap();
        assert_eq!(all4, vec![4; 8]);

        let p = DegreeDistribution::mixture(&[(4, 0.9), (8, 0.1)]).unwrap();
        let mut seq = sample_degree_sequence(&p, 10, 3).unwrap();
        seq.sort_unstable();
        assert_eq!(seq, vec![4, 4, 4, 4, 4, 4, 4, 4, 4, 8]);
        assert_eq!(seq.iter().sum::<usize>(), 44);

        assert!(matches!(
            sample_degree_sequence(&DegreeDistribution::single(1), 3, 0),
            Err(Error::NoEvenSumCompletion)
        ));
        assert!(matches!(
            sample_degree_sequence(&DegreeDistribution::single(4), 4, 0),
            Err(Error::InfeasibleSequence(_))
        ));
    }

    #[test]
    fn odd_sum_repair_moves_to_nearest_opposite_parity() {
        // 3 indices of degree 1 and 2 of degree 2: sum 7 is odd.
        let p = DegreeDistribution::new(vec![0.0, 0.6, 0.4]).unwrap();
        let seq = sample_degree_sequence(&p, 5, 11).unwrap();
        assert_eq!(seq.iter().sum::<usize>() % 2, 0);
        let ones = seq.iter().filter(|&&d| d == 1).count();
        assert!(ones == 2 || ones == 4, "{seq:?}");
    }

    #[test]
    fn largest_remainder_rounding() {
        // n p = (3.4, 3.3, 3.3): the first gets the spare index.
        let p = DegreeDistribution::new(vec![0.34, 0.0, 0.33, 0.0, 0.33]).unwrap();
        let seq = sample_degree_sequence(&p, 10, 5).unwrap();
        let count = |k| seq.iter().filter(|&&d| d == k).count();
        assert_eq!((count(0), count(2), count(4)), (4, 3, 3));
    }

    #[test]
    fn generator_examples() {
        let law = CouplingLaw::binary(1.0, 1.0).unwrap();
        let g = generate_instance(&[1, 1], &law, 0).unwrap();
        assert_eq!(g.edges().collect::<Vec<_>>(), vec![(0, 1, 1.0)]);

        let g = generate_instance(&[2, 2, 2], &CouplingLaw::binary(0.0, 1.0).unwrap(), 9).unwrap();
        let pairs: Vec<_> = g.edges().map(|(i, j, _)| (i, j)).collect();
        assert_eq!(pairs, vec![(0, 1), (0, 2), (1, 2)]);
    }

    #[test]
    fn generator_rejects_infeasible_sequences() {
        let law = CouplingLaw::binary(0.5, 1.0).unwrap();
        assert!(generate_instance(&[3, 3, 3, 1], &law, 0).is_err());
        assert!(generate_instance(&[1, 1, 1], &law, 0).is_err());
    }

    #[test]
    fn generator_is_bit_reproducible() {
        let law = CouplingLaw::binary(0.3, 1.0).unwrap();
        let degrees = vec![4; 64];
        let a = generate_instance(&degrees, &law, 77).unwrap();
        let b = generate_instance(&degrees, &law, 77).unwrap();
        let c = generate_instance(&degrees, &law, 78).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, c);
    }

    #[test]
    fn binary_coupling_examples() {
        let law = CouplingLaw::binary(1.0, 2.0).unwrap();
        for seed in 0..50 {
            assert_eq!(sample_coupling(&law, seed), 2.0);
        }
        let draw_mean = |delta: f64| {
            let sampler = CouplingLaw::binary(delta, 1.0).unwrap().sampler();
            let mut rng = rng::stream(2024, Domain::Coupling, 1);
            (0..1_000_000).map(|_| sampler.sample(&mut rng)).sum::<f64>() / 1e6
        };
        assert!(draw_mean(0.0).abs() < 4e-3);
        assert!((draw_mean(0.5) - 0.5).abs() < 3e-3);
    }

    #[test]
    fn coupling_law_moments_and_validation() {
        let law = CouplingLaw::Discrete {
            values: vec![-1.0, 2.0],
            probabilities: vec![0.25, 0.75],
        };
        law.validate().unwrap();
        assert_abs_diff_eq!(law.mean(), 1.25);
        assert_abs_diff_eq!(law.second_moment(), 3.25);
        assert!(CouplingLaw::binary(1.5, 1.0).is_err());
        assert!(CouplingLaw::binary(0.5, 0.0).is_err());
        assert!(CouplingLaw::Gaussian { mean: 0.0, variance: -1.0 }.validate().is_err());
    }

    #[test]
    fn coupling_law_json_shape() {
        let law: CouplingLaw = serde_json::from_str(r#"{"binary":{"delta":0.5,"j":1.0}}"#).unwrap();
        assert_eq!(law, CouplingLaw::Binary { delta: 0.5, j: 1.0 });
    }
}
