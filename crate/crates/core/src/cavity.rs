//! Cavity message passing on a fixed instance.
//!
//! For every directed edge `j → i` the messages are the coefficients of the
//! effective quadratic `A v² − 2 H v` of `j` in the system without `i`:
//!
//! ```text
//! A_{i→l} = λ − Σ_{j∈∂i∖l} J_ij² / A_{j→i}
//! H_{i→l} =     Σ_{j∈∂i∖l} J_ij H_{j→i} / A_{j→i}
//! ```
//!
//! `λ I − J` is positive definite exactly when, starting from `A = λ`, every
//! message and every full field `A_i` stays positive; on a tree the boundary
//! of that region is the first eigenvalue, which [`bisect_eigenvalue`]
//! locates. On graphs with cycles the same procedure is an approximation.
//!
//! Messages are indexed by instance slot: slot `p` of row `i` with neighbour
//! `j` holds the message `j → i`.

use std::io::Write;

use rand::Rng;

use crate::error::{Error, Result};
use crate::instance::SparseSymmetricInstance;
use crate::rng::{self, Domain};

/// One `(A, H)` pair per directed edge, computed at `lambda`.
#[derive(Debug, Clone, PartialEq)]
pub struct MessageSet {
    pub lambda: f64,
    pub a: Vec<f64>,
    pub h: Vec<f64>,
    pub converged: bool,
}

impl MessageSet {
    /// `A = λ`, `H = 0` on every directed edge.
    pub fn initial(instance: &SparseSymmetricInstance, lambda: f64) -> Self {
        Self {
            lambda,
            a: vec![lambda; instance.slot_count()],
            h: vec![0.0; instance.slot_count()],
            converged: false,
        }
    }

    /// Message `from → to`, if the edge exists.
    pub fn get(&self, instance: &SparseSymmetricInstance, from: usize, to: usize) -> Option<(f64, f64)> {
        instance
            .slots(to)
            .find(|&p| instance.neighbor(p) == from)
            .map(|p| (self.a[p], self.h[p]))
    }

    /// CSV dump with columns `i,j,A,H` for the message `i → j`.
    pub fn write_csv<W: Write>(&self, instance: &SparseSymmetricInstance, mut out: W) -> Result<()> {
        writeln!(out, "i,j,A,H")?;
        for to in 0..instance.n() {
            for p in instance.slots(to) {
                writeln!(out, "{},{},{},{}", instance.neighbor(p), to, self.a[p], self.h[p])?;
            }
        }
        Ok(())
    }
}

/// Full-system coefficients `A_i`, `H_i`.
#[derive(Debug, Clone, PartialEq)]
pub struct FullFields {
    pub a: Vec<f64>,
    pub h: Vec<f64>,
}

/// One synchronous update of every message; returns the new set and the
/// largest absolute change.
pub fn sweep_messages(
    instance: &SparseSymmetricInstance,
    lambda: f64,
    messages: &MessageSet,
) -> Result<(MessageSet, f64)> {
    let mut next = MessageSet {
        lambda,
        a: vec![0.0; messages.a.len()],
        h: vec![0.0; messages.h.len()],
        converged: false,
    };
    let change = sweep_into(instance, lambda, messages, None, true, &mut next)?;
    next.converged = false;
    Ok((next, change))
}

/// Writes the update of `current` into `next`. `field` adds an external
/// first-order term `h_i` at every index; `update_a = false` keeps the
/// `A`-messages frozen.
fn sweep_into(
    instance: &SparseSymmetricInstance,
    lambda: f64,
    current: &MessageSet,
    field: Option<&[f64]>,
    update_a: bool,
    next: &mut MessageSet,
) -> Result<f64> {
    let mut change = 0.0f64;
    for i in 0..instance.n() {
        let slots = instance.slots(i);
        for p_out in slots.clone() {
            let l = instance.neighbor(p_out);
            let target = instance.reverse(p_out);
            let mut a = lambda;
            let mut h = field.map_or(0.0, |f| f[i]);
            for p in slots.clone() {
                if p == p_out {
                    continue;
                }
                let a_in = current.a[p];
                if a_in == 0.0 {
                    return Err(Error::SingularMessage {
                        from: instance.neighbor(p),
                        to: i,
                    });
                }
                let w = instance.weight(p);
                a -= w * w / a_in;
                h += w * current.h[p] / a_in;
            }
            debug_assert_eq!(instance.neighbor(target), i);
            debug_assert_eq!(l, instance.neighbor(p_out));
            if update_a {
                change = change.max((a - current.a[target]).abs());
                next.a[target] = a;
            } else {
                next.a[target] = current.a[target];
            }
            change = change.max((h - current.h[target]).abs());
            next.h[target] = h;
        }
    }
    Ok(change)
}

/// Sums all incoming cavity biases at every index.
pub fn full_fields(
    instance: &SparseSymmetricInstance,
    messages: &MessageSet,
    field: Option<&[f64]>,
) -> FullFields {
    let n = instance.n();
    let mut a = vec![messages.lambda; n];
    let mut h: Vec<f64> = field.map_or_else(|| vec![0.0; n], <[f64]>::to_vec);
    for i in 0..n {
        for p in instance.slots(i) {
            let w = instance.weight(p);
            a[i] -= w * w / messages.a[p];
            h[i] += w * messages.h[p] / messages.a[p];
        }
    }
    FullFields { a, h }
}

/// Outcome of the `A`-message stability probe.
#[derive(Debug, Clone, PartialEq)]
pub enum FixedPoint {
    /// All messages and full fields converged to strictly positive values.
    ConvergedPositive { messages: MessageSet, full_a: Vec<f64>, sweeps: usize },
    /// Some message or full field reached zero or below.
    EncounteredNonpositive { sweeps: usize },
    NoConvergence { sweeps: usize, max_change: f64 },
}

impl FixedPoint {
    pub fn is_positive(&self) -> bool {
        matches!(self, FixedPoint::ConvergedPositive { .. })
    }
}

/// Iterates the `A`-recursion from `A = λ`. The iteration is monotonically
/// decreasing from that start, so one nonpositive message settles the answer.
pub fn positive_fixed_point(
    instance: &SparseSymmetricInstance,
    lambda: f64,
    tol: f64,
    max_sweeps: usize,
) -> FixedPoint {
    let mut current = MessageSet::initial(instance, lambda);
    let mut next = current.clone();
    if !(lambda > 0.0) {
        return FixedPoint::EncounteredNonpositive { sweeps: 0 };
    }
    let mut change = f64::INFINITY;
    for sweep in 1..=max_sweeps {
        change = 0.0;
        for i in 0..instance.n() {
            let slots = instance.slots(i);
            for p_out in slots.clone() {
                let mut a = lambda;
                for p in slots.clone() {
                    if p != p_out {
                        let w = instance.weight(p);
                        a -= w * w / current.a[p];
                    }
                }
                if !(a > 0.0) {
                    return FixedPoint::EncounteredNonpositive { sweeps: sweep };
                }
                let target = instance.reverse(p_out);
                change = change.max((a - current.a[target]).abs());
                next.a[target] = a;
            }
        }
        std::mem::swap(&mut current, &mut next);
        if change <= tol * lambda.max(1.0) {
            current.converged = true;
            let full = full_fields(instance, &current, None);
            if full.a.iter().all(|&a| a > 0.0) {
                return FixedPoint::ConvergedPositive {
                    messages: current,
                    full_a: full.a,
                    sweeps: sweep,
                };
            }
            return FixedPoint::EncounteredNonpositive { sweeps: sweep };
        }
    }
    FixedPoint::NoConvergence {
        sweeps: max_sweeps,
        max_change: change,
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BisectionOptions {
    /// Width of the final bracket.
    pub tol: f64,
    /// Message convergence tolerance, relative to `max(1, λ)`.
    pub message_tol: f64,
    pub max_sweeps: usize,
}

impl Default for BisectionOptions {
    fn default() -> Self {
        Self {
            tol: 1e-10,
            message_tol: 1e-13,
            max_sweeps: 20_000,
        }
    }
}

/// Final bracket of [`bisect_eigenvalue`]; `hi` is always on the positive side.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Threshold {
    pub lo: f64,
    pub hi: f64,
}

impl Threshold {
    pub fn estimate(&self) -> f64 {
        0.5 * (self.lo + self.hi)
    }
}

/// Default bracket `(0, k_max · max|J|]`, widened by one percent: the bound
/// is attained on regular graphs, where messages converge only
/// algebraically at the bound itself.
pub fn default_bracket(instance: &SparseSymmetricInstance) -> (f64, f64) {
    let bound = instance.k_max() as f64 * instance.max_abs_coupling();
    (0.0, bound * 1.01 + 1e-9)
}

/// Bisection for the positivity threshold of the `A`-recursion.
pub fn bisect_eigenvalue(
    instance: &SparseSymmetricInstance,
    bracket: Option<(f64, f64)>,
    options: &BisectionOptions,
) -> Result<Threshold> {
    let (mut lo, mut hi) = bracket.unwrap_or_else(|| default_bracket(instance));
    let invalid = |reason: &str| Error::InvalidBracket {
        lo,
        hi,
        reason: reason.to_string(),
    };
    if !(lo < hi) {
        return Err(invalid("lower end not below upper end"));
    }
    let probe = |l: f64| positive_fixed_point(instance, l, options.message_tol, options.max_sweeps);
    if !probe(hi).is_positive() {
        return Err(invalid("upper end is not in the positive phase"));
    }
    if probe(lo).is_positive() {
        return Err(invalid("lower end is already in the positive phase"));
    }
    while hi - lo > options.tol {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if probe(mid).is_positive() {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Ok(Threshold { lo, hi })
}

/// Result of [`recover_eigenvector`].
#[derive(Debug, Clone, PartialEq)]
pub struct CavityEigenvector {
    pub fields: FullFields,
    /// `v_i = H_i / A_i`, rescaled to `|v|² = n`.
    pub v: Vec<f64>,
    /// False on graphs with cycles, where message passing is approximate.
    pub exact: bool,
    pub lambda: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RecoveryOptions {
    /// Rounds of re-injecting the current estimate as the source field.
    pub rounds: usize,
    pub tol: f64,
    pub max_sweeps: usize,
}

impl Default for RecoveryOptions {
    fn default() -> Self {
        Self {
            rounds: 4,
            tol: 1e-14,
            max_sweeps: 20_000,
        }
    }
}

/// Eigenvector from converged `A`-messages at `lambda_near`, slightly above
/// the threshold.
///
/// The `H`-recursion without a source is nilpotent on a finite tree, so the
/// first-order fields are driven by a source `h` instead: the fixed point of
/// the `H`-recursion with source then solves `(λI − J) v = h` through
/// `v_i = H_i / A_i`. The source starts as a random vector drawn from `seed`
/// and is replaced by the normalized solution on each of `options.rounds`
/// rounds, which amplifies the first eigenvector by `1/(λ − Λ)` per round.
pub fn recover_eigenvector(
    instance: &SparseSymmetricInstance,
    lambda_near: f64,
    messages: &MessageSet,
    seed: u64,
    options: &RecoveryOptions,
) -> Result<CavityEigenvector> {
    let n = instance.n();
    if n == 0 {
        return Err(Error::EmptyInput);
    }
    let mut rng = rng::stream(seed, Domain::CavitySeed, 0);
    let mut source: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..=1.0)).collect();
    let mut current = MessageSet {
        lambda: lambda_near,
        a: messages.a.clone(),
        h: vec![0.0; messages.a.len()],
        converged: false,
    };
    let mut next = current.clone();
    let mut fields = full_fields(instance, &current, Some(&source));
    let mut v = vec![0.0; n];
    for _ in 0..options.rounds.max(1) {
        current.h.iter_mut().for_each(|h| *h = 0.0);
        let mut driven = source.clone();
        let scale = max_abs(&source).max(f64::MIN_POSITIVE);
        for sweep in 0..options.max_sweeps {
            sweep_into(instance, lambda_near, &current, Some(&driven), false, &mut next)?;
            // On a graph with cycles the recursion can grow without bound
            // below the true eigenvalue; the map is linear in (H, h), so
            // rescaling both keeps the direction and avoids overflow.
            let old_max = max_abs(&current.h);
            let new_max = max_abs(&next.h).max(f64::MIN_POSITIVE);
            let growth = if old_max > 0.0 { new_max / old_max } else { 1.0 };
            let drift = next
                .h
                .iter()
                .zip(&current.h)
                .fold(0.0f64, |m, (x, y)| m.max((x - growth * y).abs()))
                / new_max;
            std::mem::swap(&mut current, &mut next);
            if new_max > 1e100 * scale {
                current.h.iter_mut().for_each(|h| *h /= new_max);
                driven.iter_mut().for_each(|h| *h /= new_max);
            }
            if drift <= options.tol && sweep > 0 {
                break;
            }
        }
        fields = full_fields(instance, &current, Some(&driven));
        for i in 0..n {
            v[i] = fields.h[i] / fields.a[i];
        }
        let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if !(norm > 0.0 && norm.is_finite()) {
            return Err(Error::TrivialField);
        }
        let s = (n as f64).sqrt() / norm;
        v.iter_mut().for_each(|x| *x *= s);
        source.copy_from_slice(&v);
    }
    Ok(CavityEigenvector {
        fields,
        v,
        exact: instance.is_forest(),
        lambda: lambda_near,
    })
}

fn max_abs(x: &[f64]) -> f64 {
    x.iter().fold(0.0f64, |m, v| m.max(v.abs()))
}

/// Threshold plus eigenvector, operating at `hi + 10⁻⁶ · k_max · max|J|`.
#[derive(Debug, Clone, PartialEq)]
pub struct CavitySolution {
    pub lambda: f64,
    pub threshold: Threshold,
    pub eigenvector: CavityEigenvector,
}

pub fn solve(
    instance: &SparseSymmetricInstance,
    bisection: &BisectionOptions,
    recovery: &RecoveryOptions,
    seed: u64,
) -> Result<CavitySolution> {
    let threshold = bisect_eigenvalue(instance, None, bisection)?;
    let scale = (instance.k_max() as f64 * instance.max_abs_coupling()).max(f64::MIN_POSITIVE);
    // Slow message convergence right at the threshold can defeat the first
    // operating point; back off by decades.
    let mut offset = 1e-6 * scale;
    let (lambda_near, messages) = loop {
        let lambda_near = threshold.hi + offset;
        match positive_fixed_point(instance, lambda_near, bisection.message_tol, bisection.max_sweeps) {
            FixedPoint::ConvergedPositive { messages, .. } => break (lambda_near, messages),
            _ if offset < 1e-2 * scale => offset *= 10.0,
            _ => {
                return Err(Error::InvalidBracket {
                    lo: threshold.lo,
                    hi: lambda_near,
                    reason: "operating point is not in the positive phase".into(),
                })
            }
        }
    };
    let eigenvector = recover_eigenvector(instance, lambda_near, &messages, seed, recovery)?;
    Ok(CavitySolution {
        lambda: threshold.estimate(),
        threshold,
        eigenvector,
    })
}
