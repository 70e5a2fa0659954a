//! Fixed-binning density estimates for eigenvector elements.

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Uniform bins over `[lo, hi)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Binning {
    pub lo: f64,
    pub hi: f64,
    pub bins: usize,
}

impl Default for Binning {
    /// 61 bins on `[−4, 4]`.
    fn default() -> Self {
        Self {
            lo: -4.0,
            hi: 4.0,
            bins: 61,
        }
    }
}

impl Binning {
    pub fn new(lo: f64, hi: f64, bins: usize) -> Result<Self> {
        if !(lo < hi) || bins == 0 || !lo.is_finite() || !hi.is_finite() {
            return Err(Error::InvalidConfig(format!(
                "binning [{lo}, {hi}) with {bins} bins"
            )));
        }
        Ok(Self { lo, hi, bins })
    }

    pub fn width(&self) -> f64 {
        (self.hi - self.lo) / self.bins as f64
    }

    /// Bin holding `x`; the right edge belongs to the last bin.
    pub fn index(&self, x: f64) -> Option<usize> {
        if !(x >= self.lo && x <= self.hi) {
            return None;
        }
        let b = ((x - self.lo) / self.width()) as usize;
        Some(b.min(self.bins - 1))
    }

    pub fn edges(&self, b: usize) -> (f64, f64) {
        let w = self.width();
        (self.lo + b as f64 * w, self.lo + (b + 1) as f64 * w)
    }
}

/// Density normalized by the total number of samples, so mass falling
/// outside the binning range is not redistributed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Histogram {
    pub binning: Binning,
    pub counts: Vec<u64>,
    pub total: u64,
    pub outside: u64,
}

impl Histogram {
    pub fn empty(binning: Binning) -> Self {
        Self {
            binning,
            counts: vec![0; binning.bins],
            total: 0,
            outside: 0,
        }
    }

    pub fn from_values<I: IntoIterator<Item = f64>>(binning: Binning, values: I) -> Self {
        let mut h = Self::empty(binning);
        h.extend(values);
        h
    }

    pub fn push(&mut self, x: f64) {
        self.total += 1;
        match self.binning.index(x) {
            Some(b) => self.counts[b] += 1,
            None => self.outside += 1,
        }
    }

    pub fn extend<I: IntoIterator<Item = f64>>(&mut self, values: I) {
        for x in values {
            self.push(x);
        }
    }

    pub fn density(&self) -> Vec<f64> {
        let scale = if self.total == 0 {
            0.0
        } else {
            1.0 / (self.total as f64 * self.binning.width())
        };
        self.counts.iter().map(|&c| c as f64 * scale).collect()
    }

    /// `∫ density` over the binning range.
    pub fn mass(&self) -> f64 {
        if self.total == 0 {
            return 0.0;
        }
        (self.total - self.outside) as f64 / self.total as f64
    }

    /// Mean of the binned values, at bin centres.
    pub fn mean(&self) -> f64 {
        let inside = (self.total - self.outside) as f64;
        self.counts
            .iter()
            .enumerate()
            .map(|(b, &c)| {
                let (l, r) = self.binning.edges(b);
                c as f64 * 0.5 * (l + r)
            })
            .sum::<f64>()
            / inside
    }

    /// `Σ |p − q| · width` on a shared binning.
    pub fn l1_distance(&self, other: &Histogram) -> Result<f64> {
        if self.binning != other.binning {
            return Err(Error::InvalidConfig("histograms use different binnings".into()));
        }
        let w = self.binning.width();
        Ok(self
            .density()
            .iter()
            .zip(other.density())
            .map(|(p, q)| (p - q).abs() * w)
            .sum())
    }

    /// L1 distance to a reference density evaluated by midpoint rule on each bin.
    pub fn l1_distance_to<F: Fn(f64) -> f64>(&self, density: F) -> f64 {
        let w = self.binning.width();
        let quadrature = 16;
        self.density()
            .iter()
            .enumerate()
            .map(|(b, p)| {
                let (l, _) = self.binning.edges(b);
                let avg = (0..quadrature)
                    .map(|s| density(l + (s as f64 + 0.5) * w / quadrature as f64))
                    .sum::<f64>()
                    / quadrature as f64;
                (p - avg).abs() * w
            })
            .sum()
    }

    /// CSV with columns `bin_left,bin_right,density`.
    pub fn write_csv<W: Write>(&self, mut out: W) -> Result<()> {
        writeln!(out, "bin_left,bin_right,density")?;
        for (b, d) in self.density().iter().enumerate() {
            let (l, r) = self.binning.edges(b);
            writeln!(out, "{l},{r},{d}")?;
        }
        Ok(())
    }
}
