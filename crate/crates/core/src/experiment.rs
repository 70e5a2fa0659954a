//! Reproducible experiments: parameter sweeps, finite-size scaling collapse,
//! eigenvector-element histograms and tree cross-checks.
//!
//! Replicate `r` at size `N` uses the seed `derive_seed(master, [N, r])` for
//! degrees, topology and the coupling stream. The seed does not depend on
//! the swept parameter, so neighbouring grid points share topology and
//! coupling draws; a larger bias flips individual couplings monotonically.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::analytic::{self, DenseLimitModel, Mode, SingleDegreeModel};
use crate::cavity::{self, BisectionOptions, RecoveryOptions};
use crate::ensemble::{
    generate_instance, sample_degree_sequence, CouplingLaw, DegreeDistribution, Ensemble,
};
use crate::error::{Error, Result};
use crate::histogram::{Binning, Histogram};
use crate::instance::SparseSymmetricInstance;
use crate::oracle::{self, EigenSolution, PowerIterationOptions};
use crate::population::{self, DetectionOptions, Kernel, MarginalOptions};
use crate::rng::{self, Domain};

/// Largest tolerated fraction of failed replicates per grid point.
pub const MAX_FAILURE_FRACTION: f64 = 0.1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MixtureComponent {
    pub k: usize,
    pub weight: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DegreeSpec {
    /// Explicit mass `p(0), p(1), …`.
    Degrees(Vec<f64>),
    SingleDegree(usize),
    Mixture(Vec<MixtureComponent>),
}

impl DegreeSpec {
    pub fn resolve(&self) -> Result<DegreeDistribution> {
        match self {
            DegreeSpec::Degrees(mass) => DegreeDistribution::new(mass.clone()),
            DegreeSpec::SingleDegree(k) => Ok(DegreeDistribution::single(*k)),
            DegreeSpec::Mixture(parts) => {
                DegreeDistribution::mixture(&parts.iter().map(|c| (c.k, c.weight)).collect::<Vec<_>>())
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CouplingSpec {
    Binary { delta: f64, j: f64 },
    Gaussian { mean: f64, variance: f64 },
    Discrete { values: Vec<f64>, probabilities: Vec<f64> },
    /// Gaussian with mean `μJ/k̄` and variance `J²/k̄`.
    Dense { mu: f64, j: f64 },
}

impl CouplingSpec {
    pub fn resolve(&self, degrees: &DegreeDistribution) -> Result<CouplingLaw> {
        let law = match self {
            CouplingSpec::Binary { delta, j } => CouplingLaw::Binary { delta: *delta, j: *j },
            CouplingSpec::Gaussian { mean, variance } => CouplingLaw::Gaussian {
                mean: *mean,
                variance: *variance,
            },
            CouplingSpec::Discrete { values, probabilities } => CouplingLaw::Discrete {
                values: values.clone(),
                probabilities: probabilities.clone(),
            },
            CouplingSpec::Dense { mu, j } => {
                let k_mean = degrees.mean();
                if !(k_mean > 0.0) {
                    return Err(Error::DegenerateEnsemble);
                }
                CouplingLaw::Gaussian {
                    mean: mu * j / k_mean,
                    variance: j * j / k_mean,
                }
            }
        };
        law.validate()?;
        Ok(law)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnsembleSpec {
    #[serde(flatten)]
    pub degrees: DegreeSpec,
    pub coupling: CouplingSpec,
}

impl EnsembleSpec {
    pub fn resolve(&self) -> Result<Ensemble> {
        let degrees = self.degrees.resolve()?;
        let coupling = self.coupling.resolve(&degrees)?;
        Ensemble::new(degrees, coupling)
    }

    /// Copy with the swept parameter set to `value`.
    pub fn with_param(&self, param: GridParam, value: f64) -> Result<Self> {
        let mut out = self.clone();
        match (param, &mut out.coupling) {
            (GridParam::Delta, CouplingSpec::Binary { delta, .. }) => *delta = value,
            (GridParam::Mu, CouplingSpec::Dense { mu, .. }) => *mu = value,
            (GridParam::Lambda, _) => {}
            (p, c) => {
                return Err(Error::InvalidConfig(format!(
                    "parameter {p:?} cannot be swept for coupling {c:?}"
                )))
            }
        }
        Ok(out)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GridParam {
    Delta,
    Mu,
    Lambda,
}

impl GridParam {
    pub fn name(self) -> &'static str {
        match self {
            GridParam::Delta => "delta",
            GridParam::Mu => "mu",
            GridParam::Lambda => "lambda",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Grid {
    pub param: GridParam,
    pub values: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Method {
    #[default]
    Oracle,
    CavityGraph,
    Population,
    Analytic,
    #[serde(rename = "mixture-relation")]
    MixtureRelation,
}

impl Method {
    pub fn tag(self) -> &'static str {
        match self {
            Method::Oracle => "oracle",
            Method::CavityGraph => "cavity-graph",
            Method::Population => "population",
            Method::Analytic => "analytic",
            Method::MixtureRelation => "mixture-relation",
        }
    }
}

fn default_replicates() -> usize {
    100
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub ensemble: EnsembleSpec,
    #[serde(default)]
    pub sizes: Vec<usize>,
    #[serde(default = "default_replicates")]
    pub replicates: usize,
    #[serde(default)]
    pub seed: u64,
    /// Convergence tolerance for the oracle and the cavity bisection.
    #[serde(default)]
    pub tol: Option<f64>,
    #[serde(default)]
    pub method: Method,
    #[serde(default)]
    pub grid: Option<Grid>,
    #[serde(default)]
    pub binning: Binning,
    #[serde(default)]
    pub population: DetectionOptions,
    #[serde(default)]
    pub marginal: MarginalOptions,
    #[serde(default)]
    pub output: Option<PathBuf>,
}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        let config: Self = serde_json::from_str(text)?;
        config.validate()?;
        Ok(config)
    }

    pub fn validate(&self) -> Result<()> {
        if self.replicates == 0 {
            return Err(Error::InvalidConfig("replicates must be at least 1".into()));
        }
        if let Some(&n) = self.sizes.iter().find(|&&n| n < 2) {
            return Err(Error::InvalidConfig(format!("size {n} below 2")));
        }
        if let Some(grid) = &self.grid {
            if grid.values.is_empty() {
                return Err(Error::InvalidConfig("empty grid".into()));
            }
        }
        self.ensemble.resolve()?;
        Ok(())
    }

    /// `(value, ensemble)` per grid point; a single point without a grid.
    pub fn grid_points(&self) -> Result<Vec<(Option<f64>, EnsembleSpec)>> {
        match &self.grid {
            None => Ok(vec![(None, self.ensemble.clone())]),
            Some(grid) => grid
                .values
                .iter()
                .map(|&v| Ok((Some(v), self.ensemble.with_param(grid.param, v)?)))
                .collect(),
        }
    }

    pub fn power_options(&self) -> PowerIterationOptions {
        let mut opts = PowerIterationOptions::default();
        if let Some(tol) = self.tol {
            opts.tol = tol;
        }
        opts
    }

    pub fn bisection_options(&self) -> BisectionOptions {
        let mut opts = BisectionOptions::default();
        if let Some(tol) = self.tol {
            opts.tol = tol;
        }
        opts
    }

    fn detection_options(&self) -> DetectionOptions {
        let mut opts = self.population.clone();
        opts.seed = rng::derive_seed(self.seed, &[Domain::Population as u64]);
        opts
    }
}

/// Seed of replicate `rep` at size `n`.
pub fn replicate_seed(master: u64, n: usize, rep: usize) -> u64 {
    rng::derive_seed(master, &[Domain::Replicate as u64, n as u64, rep as u64])
}

/// Draws a degree sequence and an instance for one replicate.
pub fn replicate_instance(ensemble: &Ensemble, n: usize, seed: u64) -> Result<SparseSymmetricInstance> {
    let degrees = sample_degree_sequence(&ensemble.degrees, n, seed)?;
    generate_instance(&degrees, &ensemble.coupling, seed)
}

/// Aggregated outcome at one grid point and size.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRecord {
    pub param: String,
    pub value: Option<f64>,
    pub n: Option<usize>,
    pub method: String,
    pub mean_lambda: f64,
    pub stderr_lambda: f64,
    pub mean_m: Option<f64>,
    pub stderr_m: Option<f64>,
    pub replicates: usize,
    pub failures: usize,
    pub mode: Option<Mode>,
    /// Bias given by the mixture relation at `λ = value`.
    pub delta: Option<f64>,
}

fn mean_stderr(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    if values.len() < 2 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (n - 1.0);
    (mean, (var / n).sqrt())
}

/// `(Λ, M)` of one replicate under `method`.
fn solve_replicate(
    ensemble: &Ensemble,
    method: Method,
    n: usize,
    seed: u64,
    config: &ExperimentConfig,
) -> Result<(f64, f64)> {
    let g = replicate_instance(ensemble, n, seed)?;
    match method {
        Method::Oracle => {
            let s = oracle::power_iterate(&g, &config.power_options(), seed)?;
            Ok((s.lambda, s.m_statistic))
        }
        Method::CavityGraph => {
            let s = cavity::solve(&g, &config.bisection_options(), &RecoveryOptions::default(), seed)?;
            Ok((s.lambda, oracle::m_statistic(&s.eigenvector.v)))
        }
        _ => unreachable!("instance-free method"),
    }
}

fn replicate_records(
    value: Option<f64>,
    ensemble: &Ensemble,
    config: &ExperimentConfig,
) -> Result<Vec<SweepRecord>> {
    let param = config.grid.as_ref().map_or("none", |g| g.param.name()).to_string();
    let mut out = Vec::new();
    for &n in &config.sizes {
        let results: Vec<Result<(f64, f64)>> = (0..config.replicates)
            .into_par_iter()
            .map(|rep| solve_replicate(ensemble, config.method, n, replicate_seed(config.seed, n, rep), config))
            .collect();
        let mut lambdas = Vec::new();
        let mut ms = Vec::new();
        let mut first_error = None;
        for r in results {
            match r {
                Ok((l, m)) => {
                    lambdas.push(l);
                    ms.push(m);
                }
                Err(e) => {
                    first_error.get_or_insert_with(|| e.to_string());
                }
            }
        }
        let failures = config.replicates - lambdas.len();
        if failures as f64 > MAX_FAILURE_FRACTION * config.replicates as f64 {
            return Err(Error::TooManyFailures {
                failed: failures,
                total: config.replicates,
                first: first_error.unwrap_or_default(),
            });
        }
        let (mean_lambda, stderr_lambda) = mean_stderr(&lambdas);
        let (mean_m, stderr_m) = mean_stderr(&ms);
        out.push(SweepRecord {
            param: param.clone(),
            value,
            n: Some(n),
            method: config.method.tag().into(),
            mean_lambda,
            stderr_lambda,
            mean_m: Some(mean_m),
            stderr_m: Some(stderr_m),
            replicates: lambdas.len(),
            failures,
            mode: None,
            delta: None,
        });
    }
    Ok(out)
}

fn deterministic_record(param: &str, value: Option<f64>, method: Method, lambda: f64, m: Option<f64>, mode: Option<Mode>) -> SweepRecord {
    SweepRecord {
        param: param.to_string(),
        value,
        n: None,
        method: method.tag().into(),
        mean_lambda: lambda,
        stderr_lambda: 0.0,
        mean_m: m,
        stderr_m: m.map(|_| 0.0),
        replicates: 1,
        failures: 0,
        mode,
        delta: None,
    }
}

/// Closed-form `(Λ, M, mode)` for single-degree binary or dense ensembles.
pub fn analytic_prediction(spec: &EnsembleSpec) -> Result<(f64, Option<f64>, Mode)> {
    match (&spec.degrees, &spec.coupling) {
        (DegreeSpec::SingleDegree(k), CouplingSpec::Binary { delta, j }) => {
            let (lambda, mode) = analytic::single_degree_eigenvalue(&SingleDegreeModel::new(*k, *j, *delta)?);
            Ok((lambda, None, mode))
        }
        (_, CouplingSpec::Dense { mu, j }) => {
            let model = DenseLimitModel::new(*mu, *j)?;
            let (lambda, mode) = analytic::dense_limit_eigenvalue(&model);
            Ok((lambda, Some(model.magnetization()), mode))
        }
        _ => Err(Error::InvalidConfig(
            "closed forms cover single-degree binary and dense ensembles".into(),
        )),
    }
}

/// Mean and fluctuation ratio `|⟨v⟩| / ⟨v²⟩^{1/2}` of full-system pairs.
pub fn population_magnetization(pairs: &[(f64, f64)]) -> f64 {
    let (mut s1, mut s2, mut count) = (0.0, 0.0, 0usize);
    for &(a, h) in pairs {
        if a != 0.0 {
            let v = h / a;
            s1 += v;
            s2 += v * v;
            count += 1;
        }
    }
    if count == 0 || s2 == 0.0 {
        return 0.0;
    }
    let n = count as f64;
    (s1 / n).abs() / (s2 / n).sqrt()
}

/// Runs `config.method` over the grid; records are ordered by grid value,
/// then by size.
pub fn run_sweep(config: &ExperimentConfig) -> Result<Vec<SweepRecord>> {
    config.validate()?;
    let param = config.grid.as_ref().map_or("none", |g| g.param.name());
    let mut records = Vec::new();
    for (value, spec) in config.grid_points()? {
        match config.method {
            Method::Oracle | Method::CavityGraph => {
                if config.sizes.is_empty() {
                    return Err(Error::InvalidConfig("sizes are required for instance methods".into()));
                }
                records.extend(replicate_records(value, &spec.resolve()?, config)?);
            }
            Method::Analytic => {
                let (lambda, m, mode) = analytic_prediction(&spec)?;
                records.push(deterministic_record(param, value, Method::Analytic, lambda, m, Some(mode)));
            }
            Method::Population => {
                let ensemble = spec.resolve()?;
                let opts = config.detection_options();
                let d = population::detect_eigenvalue(&ensemble, &opts)?;
                let (_, pop) = population::probe(&Kernel::for_ensemble(&ensemble)?, d.hi, &opts)?;
                let pairs = population::full_distribution(
                    &pop,
                    &ensemble.degrees,
                    &ensemble.coupling,
                    opts.seed,
                    opts.pop_size,
                )?;
                let m = population_magnetization(&pairs);
                let mut rec = deterministic_record(param, value, Method::Population, d.lambda, Some(m), Some(d.mode));
                rec.stderr_lambda = 0.5 * (d.hi - d.lo);
                records.push(rec);
            }
            Method::MixtureRelation => {
                let lambda = value.ok_or_else(|| {
                    Error::InvalidConfig("the mixture relation sweeps a lambda grid".into())
                })?;
                if config.grid.as_ref().map(|g| g.param) != Some(GridParam::Lambda) {
                    return Err(Error::InvalidConfig("the mixture relation sweeps a lambda grid".into()));
                }
                let ensemble = spec.resolve()?;
                let CouplingLaw::Binary { j, .. } = ensemble.coupling else {
                    return Err(Error::InvalidConfig("the mixture relation needs binary couplings".into()));
                };
                let r = ensemble.edge_law()?;
                let marginal = population::marginal_a_fixed_point(
                    &r,
                    &ensemble.coupling,
                    lambda,
                    config.marginal.pop_size,
                    config.marginal.sweeps,
                    config.marginal.seed ^ config.seed,
                )?;
                let mut rec = deterministic_record(param, value, Method::MixtureRelation, lambda, None, None);
                match population::mixture_delta_of_lambda(&r, j, &marginal) {
                    Ok(delta) => rec.delta = Some(delta),
                    Err(_) => rec.failures = 1,
                }
                records.push(rec);
            }
        }
    }
    Ok(records)
}

pub fn write_records_csv<W: Write>(records: &[SweepRecord], mut out: W) -> Result<()> {
    writeln!(
        out,
        "param,value,n,method,mean_lambda,stderr_lambda,mean_m,stderr_m,replicates,failures,mode,delta"
    )?;
    let opt = |x: Option<f64>| x.map_or(String::new(), |v| v.to_string());
    for r in records {
        writeln!(
            out,
            "{},{},{},{},{},{},{},{},{},{},{},{}",
            r.param,
            opt(r.value),
            r.n.map_or(String::new(), |n| n.to_string()),
            r.method,
            r.mean_lambda,
            r.stderr_lambda,
            opt(r.mean_m),
            opt(r.stderr_m),
            r.replicates,
            r.failures,
            r.mode.map_or(String::new(), |m| serde_json::to_value(m).unwrap().as_str().unwrap().to_string()),
            opt(r.delta),
        )?;
    }
    Ok(())
}

/// One rescaled record.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CollapsePoint {
    pub n: usize,
    pub delta: f64,
    pub x: f64,
    pub y: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Collapse {
    pub delta_c: f64,
    pub points: Vec<CollapsePoint>,
    /// `None` when some pair of sizes has no common `x` range.
    pub score: Option<f64>,
}

/// `x = N^{1/3} (Δ − Δc)/Δc`, `y = N^{1/6} M`, and the mean pairwise
/// vertical distance between the per-size curves.
pub fn scaling_collapse(records: &[SweepRecord], delta_c: f64) -> Result<Collapse> {
    let mut points: Vec<CollapsePoint> = records
        .iter()
        .filter_map(|r| {
            let (n, delta, m) = (r.n?, r.value?, r.mean_m?);
            let nf = n as f64;
            Some(CollapsePoint {
                n,
                delta,
                x: nf.cbrt() * (delta - delta_c) / delta_c,
                y: nf.powf(1.0 / 6.0) * m,
            })
        })
        .collect();
    points.sort_by(|a, b| a.n.cmp(&b.n).then(a.x.total_cmp(&b.x)));
    let mut sizes: Vec<usize> = points.iter().map(|p| p.n).collect();
    sizes.dedup();
    if sizes.len() < 2 {
        return Err(Error::InvalidConfig("a collapse needs at least two sizes".into()));
    }
    let curves: Vec<Vec<(f64, f64)>> = sizes
        .iter()
        .map(|&n| points.iter().filter(|p| p.n == n).map(|p| (p.x, p.y)).collect())
        .collect();
    let mut total = 0.0;
    let mut pairs = 0usize;
    let mut score = None;
    'pairs: {
        for i in 0..curves.len() {
            for j in i + 1..curves.len() {
                match curve_distance(&curves[i], &curves[j]) {
                    Some(d) => {
                        total += d;
                        pairs += 1;
                    }
                    None => break 'pairs,
                }
            }
        }
        score = Some(total / pairs as f64);
    }
    Ok(Collapse {
        delta_c,
        points,
        score,
    })
}

fn interpolate(curve: &[(f64, f64)], x: f64) -> f64 {
    let k = curve.partition_point(|p| p.0 < x);
    if k == 0 {
        return curve[0].1;
    }
    if k == curve.len() {
        return curve[k - 1].1;
    }
    let (x0, y0) = curve[k - 1];
    let (x1, y1) = curve[k];
    if x1 == x0 {
        return y0;
    }
    y0 + (y1 - y0) * (x - x0) / (x1 - x0)
}

/// Mean `|y_a − y_b|` over the abscissae of both curves inside their overlap.
fn curve_distance(a: &[(f64, f64)], b: &[(f64, f64)]) -> Option<f64> {
    let lo = a.first()?.0.max(b.first()?.0);
    let hi = a.last()?.0.min(b.last()?.0);
    if !(lo < hi) {
        return None;
    }
    let xs: Vec<f64> = a
        .iter()
        .chain(b)
        .map(|p| p.0)
        .filter(|&x| x >= lo && x <= hi)
        .collect();
    let sum: f64 = xs.iter().map(|&x| (interpolate(a, x) - interpolate(b, x)).abs()).sum();
    Some(sum / xs.len() as f64)
}

/// Collapse score for each candidate `Δc` and the minimizing candidate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CollapseScan {
    pub candidates: Vec<(f64, Option<f64>)>,
    pub best: Option<f64>,
}

pub fn scan_critical_point(records: &[SweepRecord], candidates: &[f64]) -> Result<CollapseScan> {
    let mut scored = Vec::with_capacity(candidates.len());
    let mut best: Option<(f64, f64)> = None;
    for &c in candidates {
        let s = scaling_collapse(records, c)?.score;
        if let Some(s) = s {
            if best.is_none_or(|(_, b)| s < b) {
                best = Some((c, s));
            }
        }
        scored.push((c, s));
    }
    Ok(CollapseScan {
        candidates: scored,
        best: best.map(|(c, _)| c),
    })
}

/// Evenly spaced candidates `lo, lo + step, …` up to `hi`.
pub fn candidate_grid(lo: f64, hi: f64, step: f64) -> Vec<f64> {
    let count = ((hi - lo) / step + 1e-9).floor() as usize;
    (0..=count).map(|i| lo + i as f64 * step).collect()
}

/// Pooled oracle histogram next to the population-dynamics prediction.
#[derive(Debug, Clone, PartialEq)]
pub struct HistogramReport {
    pub delta: f64,
    pub n: usize,
    pub experiment: Histogram,
    pub prediction: Option<Histogram>,
    pub l1: Option<f64>,
    pub detection: Option<population::Detection>,
    /// The sign of each oracle vector was fixed to a positive component sum.
    pub sign_convention: bool,
    pub failures: usize,
    /// Why no prediction was produced.
    pub flag: Option<String>,
}

/// Oracle solutions of every replicate at size `n`, in replicate order.
pub fn oracle_solutions(ensemble: &Ensemble, n: usize, config: &ExperimentConfig) -> Result<(Vec<EigenSolution>, usize)> {
    let results: Vec<Result<EigenSolution>> = (0..config.replicates)
        .into_par_iter()
        .map(|rep| {
            let seed = replicate_seed(config.seed, n, rep);
            let g = replicate_instance(ensemble, n, seed)?;
            oracle::power_iterate(&g, &config.power_options(), seed)
        })
        .collect();
    let total = results.len();
    let mut first = None;
    let solutions: Vec<EigenSolution> = results
        .into_iter()
        .filter_map(|r| r.map_err(|e| first.get_or_insert(e.to_string()).clone()).ok())
        .collect();
    let failures = total - solutions.len();
    if failures as f64 > MAX_FAILURE_FRACTION * total as f64 {
        return Err(Error::TooManyFailures {
            failed: failures,
            total,
            first: first.unwrap_or_default(),
        });
    }
    Ok((solutions, failures))
}

/// Eigenvector-element histogram at bias `delta` for the largest configured
/// size. The oracle vectors are sign-fixed only when the detected mode is
/// ferromagnetic; in the paramagnetic phase the mirror symmetry is kept.
pub fn histogram_report(config: &ExperimentConfig, delta: f64) -> Result<HistogramReport> {
    let spec = config.ensemble.with_param(GridParam::Delta, delta)?;
    let ensemble = spec.resolve()?;
    let n = *config
        .sizes
        .iter()
        .max()
        .ok_or_else(|| Error::InvalidConfig("sizes are required".into()))?;
    let opts = config.detection_options();
    let (detection, flag) = match population::detect_eigenvalue(&ensemble, &opts) {
        Ok(d) => (Some(d), None),
        Err(e @ Error::DefectRegime { .. }) => (None, Some(e.to_string())),
        Err(e) => return Err(e),
    };
    let sign_convention = detection.as_ref().is_some_and(|d| d.mode == Mode::Ferromagnetic);
    let (solutions, failures) = oracle_solutions(&ensemble, n, config)?;
    let experiment = oracle::element_histogram(&solutions, config.binning, sign_convention)?;

    let prediction = match &detection {
        Some(d) => {
            let (_, pop) = population::probe(&Kernel::for_ensemble(&ensemble)?, d.hi, &opts)?;
            let pairs = population::full_distribution(
                &pop,
                &ensemble.degrees,
                &ensemble.coupling,
                rng::derive_seed(opts.seed, &[Domain::FullDistribution as u64]),
                opts.pop_size,
            )?;
            Some(population::eigenvector_density(&pairs, 1.0, config.binning)?.histogram)
        }
        None => None,
    };
    let l1 = match &prediction {
        Some(p) => Some(experiment.l1_distance(p)?),
        None => None,
    };
    Ok(HistogramReport {
        delta,
        n,
        experiment,
        prediction,
        l1,
        detection,
        sign_convention,
        failures,
        flag,
    })
}

/// Per-tree comparison of the cavity solution with the oracle.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TreeRow {
    pub replicate: usize,
    pub seed: u64,
    pub attempts: usize,
    pub lambda_oracle: f64,
    pub lambda_cavity: f64,
    pub abs_error: f64,
    pub cosine: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TreeReport {
    pub rows: Vec<TreeRow>,
    pub max_error: f64,
    pub min_cosine: f64,
}

/// Degree sequence of a uniformly random labelled tree via a Prüfer code.
pub fn random_tree_degrees(n: usize, seed: u64) -> Result<Vec<usize>> {
    use rand::Rng;
    if n < 2 {
        return Err(Error::InfeasibleSequence(format!("a tree needs n ≥ 2, got {n}")));
    }
    let mut rng = rng::stream(seed, Domain::Tree, 0);
    let mut degrees = vec![1usize; n];
    for _ in 0..n - 2 {
        degrees[rng.random_range(0..n)] += 1;
    }
    Ok(degrees)
}

/// Stub matching on a tree degree sequence, rejected until connected.
pub fn generate_tree(degrees: &[usize], law: &CouplingLaw, seed: u64, max_attempts: usize) -> Result<(SparseSymmetricInstance, usize)> {
    for attempt in 0..max_attempts {
        let s = rng::derive_seed(seed, &[Domain::Tree as u64, attempt as u64]);
        match generate_instance(degrees, law, s) {
            Ok(g) if g.is_tree() => return Ok((g, attempt + 1)),
            Ok(_) | Err(Error::GenerationStalled { .. }) => {}
            Err(e) => return Err(e),
        }
    }
    Err(Error::TreeGenerationFailed {
        attempts: max_attempts,
    })
}

pub const TREE_ATTEMPTS: usize = 10_000;

fn cosine(a: &[f64], b: &[f64]) -> f64 {
    let dot: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
    let na = a.iter().map(|x| x * x).sum::<f64>().sqrt();
    let nb = b.iter().map(|x| x * x).sum::<f64>().sqrt();
    (dot / (na * nb)).abs()
}

/// Cavity versus oracle on random trees of size `n`, couplings from `law`.
pub fn validate_tree_exactness(n: usize, replicates: usize, law: &CouplingLaw, seed: u64) -> Result<TreeReport> {
    let oracle_opts = PowerIterationOptions {
        tol: 1e-12,
        max_iter: 5_000_000,
        ..Default::default()
    };
    let bisection = BisectionOptions {
        tol: 1e-12,
        ..Default::default()
    };
    let rows: Vec<Result<TreeRow>> = (0..replicates)
        .into_par_iter()
        .map(|rep| {
            let s = replicate_seed(seed, n, rep);
            let degrees = random_tree_degrees(n, s)?;
            let (g, attempts) = generate_tree(&degrees, law, s, TREE_ATTEMPTS)?;
            let o = oracle::power_iterate(&g, &oracle_opts, s)?;
            let c = cavity::solve(&g, &bisection, &RecoveryOptions::default(), s)?;
            Ok(TreeRow {
                replicate: rep,
                seed: s,
                attempts,
                lambda_oracle: o.lambda,
                lambda_cavity: c.lambda,
                abs_error: (o.lambda - c.lambda).abs(),
                cosine: cosine(&o.v, &c.eigenvector.v),
            })
        })
        .collect();
    let rows = rows.into_iter().collect::<Result<Vec<_>>>()?;
    Ok(TreeReport {
        max_error: rows.iter().fold(0.0, |m, r| m.max(r.abs_error)),
        min_cosine: rows.iter().fold(1.0, |m, r| m.min(r.cosine)),
        rows,
    })
}

/// `name` and SHA-256 of one emitted file.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Artifact {
    pub name: String,
    pub sha256: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Manifest {
    pub config_hash: String,
    pub seed: u64,
    pub command: String,
    pub artifacts: Vec<Artifact>,
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

/// Collects written files of one run and emits `manifest.json`.
#[derive(Debug)]
pub struct ArtifactWriter {
    dir: PathBuf,
    artifacts: Vec<Artifact>,
}

impl ArtifactWriter {
    pub fn new(dir: &Path) -> Result<Self> {
        fs::create_dir_all(dir)?;
        Ok(Self {
            dir: dir.to_path_buf(),
            artifacts: Vec::new(),
        })
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    pub fn write(&mut self, name: &str, bytes: &[u8]) -> Result<PathBuf> {
        let path = self.dir.join(name);
        fs::write(&path, bytes)?;
        self.artifacts.push(Artifact {
            name: name.to_string(),
            sha256: sha256_hex(bytes),
        });
        Ok(path)
    }

    pub fn write_with<F>(&mut self, name: &str, fill: F) -> Result<PathBuf>
    where
        F: FnOnce(&mut Vec<u8>) -> Result<()>,
    {
        let mut buf = Vec::new();
        fill(&mut buf)?;
        self.write(name, &buf)
    }

    pub fn write_json<T: Serialize>(&mut self, name: &str, value: &T) -> Result<PathBuf> {
        let mut bytes = serde_json::to_vec_pretty(value)?;
        bytes.push(b'\n');
        self.write(name, &bytes)
    }

    pub fn finish(self, config_bytes: &[u8], seed: u64, command: &str) -> Result<Manifest> {
        let manifest = Manifest {
            config_hash: sha256_hex(config_bytes),
            seed,
            command: command.to_string(),
            artifacts: self.artifacts,
        };
        let mut bytes = serde_json::to_vec_pretty(&manifest)?;
        bytes.push(b'\n');
        fs::write(self.dir.join("manifest.json"), bytes)?;
        Ok(manifest)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn single_degree_config(method: Method) -> ExperimentConfig {
        ExperimentConfig::from_json(&format!(
            r#"{{"ensemble": {{"single_degree": 4, "coupling": {{"binary": {{"delta": 0.9, "j": 1.0}}}}}},
                "sizes": [256], "replicates": 10, "seed": 3, "method": "{}",
                "grid": {{"param": "delta", "values": [0.9]}}}}"#,
            method.tag()
        ))
        .unwrap()
    }

    #[test]
    fn config_parsing_and_validation() {
        let c = single_degree_config(Method::Oracle);
        assert_eq!(c.ensemble.degrees, DegreeSpec::SingleDegree(4));
        assert_eq!(c.binning, Binning::default());
        let mixture = r#"{"ensemble": {"mixture": [{"k": 4, "weight": 0.9}, {"k": 8, "weight": 0.1}],
            "coupling": {"binary": {"delta": 0.5, "j": 1.0}}}}"#;
        let c = ExperimentConfig::from_json(mixture).unwrap();
        assert_eq!(c.replicates, 100);
        assert_eq!(c.ensemble.resolve().unwrap().degrees.prob(8), 0.1);
        let zero = r#"{"ensemble": {"single_degree": 4, "coupling": {"binary": {"delta": 0.5, "j": 1.0}}},
            "replicates": 0}"#;
        assert!(ExperimentConfig::from_json(zero).is_err());
        let dense = r#"{"ensemble": {"single_degree": 64, "coupling": {"dense": {"mu": 2.0, "j": 1.0}}}}"#;
        let law = ExperimentConfig::from_json(dense).unwrap().ensemble.resolve().unwrap().coupling;
        assert_eq!(law, CouplingLaw::Gaussian { mean: 2.0 / 64.0, variance: 1.0 / 64.0 });
    }

    #[test]
    fn oracle_sweep_near_closed_form() {
        let records = run_sweep(&single_degree_config(Method::Oracle)).unwrap();
        assert_eq!(records.len(), 1);
        let r = &records[0];
        assert_eq!((r.replicates, r.failures), (10, 0));
        assert!((r.mean_lambda - 3.8111).abs() < 0.05 * 3.8111);
        let m = r.mean_m.unwrap();
        assert!((0.0..=1.0).contains(&m));
    }

    #[test]
    fn analytic_sweep_is_exact() {
        let records = run_sweep(&single_degree_config(Method::Analytic)).unwrap();
        assert_eq!(records[0].mean_lambda, 2.7 + 1.0 / 0.9);
        assert_eq!(records[0].stderr_lambda, 0.0);
        assert_eq!(records[0].mode, Some(Mode::Ferromagnetic));
    }

    #[test]
    fn synthetic_collapse_scores_zero() {
        let delta_c = 0.5;
        let mut records = Vec::new();
        for n in [64usize, 512] {
            let nf = n as f64;
            for i in 0..20 {
                let delta = 0.3 + 0.02 * i as f64;
                let x = nf.cbrt() * (delta - delta_c) / delta_c;
                let m = nf.powf(-1.0 / 6.0) * (1.0 + x.tanh());
                records.push(SweepRecord {
                    param: "delta".into(),
                    value: Some(delta),
                    n: Some(n),
                    method: "oracle".into(),
                    mean_lambda: 0.0,
                    stderr_lambda: 0.0,
                    mean_m: Some(m),
                    stderr_m: Some(0.0),
                    replicates: 1,
                    failures: 0,
                    mode: None,
                    delta: None,
                });
            }
        }
        let exact = scaling_collapse(&records, delta_c).unwrap().score.unwrap();
        let off = scaling_collapse(&records, 0.45).unwrap().score.unwrap();
        assert!(exact < 0.05 * off, "{exact} vs {off}");
        let scan = scan_critical_point(&records, &candidate_grid(0.40, 0.60, 0.01)).unwrap();
        assert_abs_diff_eq!(scan.best.unwrap(), 0.5, epsilon = 1e-9);
    }

    #[test]
    fn disjoint_curves_have_no_score() {
        let a = vec![(0.0, 1.0), (1.0, 1.0)];
        let b = vec![(2.0, 1.0), (3.0, 1.0)];
        assert_eq!(curve_distance(&a, &b), None);
        assert_eq!(curve_distance(&a, &a), Some(0.0));
    }

    #[test]
    fn tree_degrees_and_generation() {
        let degrees = random_tree_degrees(30, 4).unwrap();
        assert_eq!(degrees.iter().sum::<usize>(), 2 * 29);
        let law = CouplingLaw::binary(0.5, 1.0).unwrap();
        let (g, _) = generate_tree(&degrees, &law, 4, TREE_ATTEMPTS).unwrap();
        assert!(g.is_tree());
        assert_eq!(g.degrees(), degrees);
    }

    #[test]
    fn small_tree_check_is_exact() {
        let law = CouplingLaw::binary(0.3, 1.0).unwrap();
        let report = validate_tree_exactness(12, 4, &law, 9).unwrap();
        assert!(report.max_error < 1e-8, "{report:?}");
        assert!(report.min_cosine > 1.0 - 1e-8);
    }

    #[test]
    fn manifest_lists_artifacts_with_hashes() {
        let dir = tempfile::tempdir().unwrap();
        let mut w = ArtifactWriter::new(dir.path()).unwrap();
        w.write("a.txt", b"hello").unwrap();
        let m = w.finish(b"{}", 7, "sweep").unwrap();
        assert_eq!(
            m.artifacts[0].sha256,
            "2cf24dba5fb0a30e26e83b2ac5b9e29e1b161e5c1fa7425e73043362938b9824"
        );
        let text = std::fs::read_to_string(dir.path().join("manifest.json")).unwrap();
        assert!(text.contains("\"config_hash\""));
        assert!(!text.contains("time"));
    }
}
