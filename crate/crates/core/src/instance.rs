//! Sparse symmetric matrices with zero diagonal, stored as compressed rows.

use std::collections::VecDeque;
use std::io::{BufRead, Write};

use crate::error::{Error, Result};

/// A symmetric `n × n` matrix with zero diagonal and at most one coupling
/// per unordered pair.
///
/// Row `i` lists its neighbours in increasing order. Every stored entry is a
/// *slot*; slot `p` in row `i` pointing at `j` has a mirror slot
/// [`reverse(p)`](Self::reverse) in row `j` pointing back at `i`, carrying the
/// same coupling. Message-passing code indexes directed edges by slot.
#[derive(Debug, Clone, PartialEq)]
pub struct SparseSymmetricInstance {
    offsets: Vec<usize>,
    neighbors: Vec<usize>,
    weights: Vec<f64>,
    reverse: Vec<usize>,
    seed: Option<u64>,
}

impl SparseSymmetricInstance {
    /// Builds an instance from undirected edges `(i, j, J_ij)`.
    pub fn from_edges(n: usize, edges: &[(usize, usize, f64)]) -> Result<Self> {
        let mut degree = vec![0usize; n];
        for &(i, j, w) in edges {
            if i >= n || j >= n {
                return Err(Error::InvalidInstance(format!(
                    "edge ({i}, {j}) out of range for n = {n}"
                )));
            }
            if i == j {
                return Err(Error::InvalidInstance(format!("self-loop at {i}")));
            }
            if !w.is_finite() {
                return Err(Error::InvalidInstance(format!(
                    "non-finite coupling on ({i}, {j})"
                )));
            }
            degree[i] += 1;
            degree[j] += 1;
        }
        let mut offsets = Vec::with_capacity(n + 1);
        offsets.push(0);
        for d in &degree {
            offsets.push(offsets.last().unwrap() + d);
        }
        let total = *offsets.last().unwrap();
        let mut rows: Vec<Vec<(usize, f64)>> = degree.iter().map(|&d| Vec::with_capacity(d)).collect();
        for &(i, j, w) in edges {
            rows[i].push((j, w));
            rows[j].push((i, w));
        }
        let mut neighbors = Vec::with_capacity(total);
        let mut weights = Vec::with_capacity(total);
        for (i, row) in rows.iter_mut().enumerate() {
            row.sort_by_key(|&(j, _)| j);
            if let Some(pair) = row.windows(2).find(|p| p[0].0 == p[1].0) {
                return Err(Error::InvalidInstance(format!(
                    "duplicate edge ({i}, {})",
                    pair[0].0
                )));
            }
            for &(j, w) in row.iter() {
                neighbors.push(j);
                weights.push(w);
            }
        }
        let mut reverse = vec![0usize; total];
        for i in 0..n {
            for p in offsets[i]..offsets[i + 1] {
                let j = neighbors[p];
                let row = &neighbors[offsets[j]..offsets[j + 1]];
                // Mirror entry exists by construction.
                let q = row.binary_search(&i).expect("mirror slot");
                reverse[p] = offsets[j] + q;
            }
        }
        Ok(Self {
            offsets,
            neighbors,
            weights,
            reverse,
            seed: None,
        })
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = Some(seed);
        self
    }

    pub fn seed(&self) -> Option<u64> {
        self.seed
    }

    pub fn n(&self) -> usize {
        self.offsets.len() - 1
    }

    pub fn edge_count(&self) -> usize {
        self.neighbors.len() / 2
    }

    /// Number of directed edges, i.e. slots.
    pub fn slot_count(&self) -> usize {
        self.neighbors.len()
    }

    pub fn degree(&self, i: usize) -> usize {
        self.offsets[i + 1] - self.offsets[i]
    }

    pub fn degrees(&self) -> Vec<usize> {
        (0..self.n()).map(|i| self.degree(i)).collect()
    }

    pub fn k_max(&self) -> usize {
        (0..self.n()).map(|i| self.degree(i)).max().unwrap_or(0)
    }

    pub fn max_abs_coupling(&self) -> f64 {
        self.weights.iter().fold(0.0, |m, w| m.max(w.abs()))
    }

    /// Slots of row `i`.
    pub fn slots(&self, i: usize) -> std::ops::Range<usize> {
        self.offsets[i]..self.offsets[i + 1]
    }

    pub fn neighbor(&self, slot: usize) -> usize {
        self.neighbors[slot]
    }

    pub fn weight(&self, slot: usize) -> f64 {
        self.weights[slot]
    }

    pub fn reverse(&self, slot: usize) -> usize {
        self.reverse[slot]
    }

    pub fn neighbors(&self, i: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        self.slots(i).map(move |p| (self.neighbors[p], self.weights[p]))
    }

    /// Undirected edges `(i, j, J_ij)` with `i < j`, in row order.
    pub fn edges(&self) -> impl Iterator<Item = (usize, usize, f64)> + '_ {
        (0..self.n()).flat_map(move |i| {
            self.neighbors(i)
                .filter(move |&(j, _)| j > i)
                .map(move |(j, w)| (i, j, w))
        })
    }

    pub fn coupling(&self, i: usize, j: usize) -> Option<f64> {
        let row = &self.neighbors[self.slots(i)];
        row.binary_search(&j)
            .ok()
            .map(|q| self.weights[self.offsets[i] + q])
    }

    /// `y = J x`.
    pub fn multiply(&self, x: &[f64], y: &mut [f64]) {
        assert_eq!(x.len(), self.n());
        assert_eq!(y.len(), self.n());
        for (i, yi) in y.iter_mut().enumerate() {
            let mut acc = 0.0;
            for p in self.offsets[i]..self.offsets[i + 1] {
                acc += self.weights[p] * x[self.neighbors[p]];
            }
            *yi = acc;
        }
    }

    /// `xᵀ J x`.
    pub fn quadratic_form(&self, x: &[f64]) -> f64 {
        self.edges().map(|(i, j, w)| 2.0 * w * x[i] * x[j]).sum()
    }

    /// Re-checks symmetry, zero diagonal and simplicity.
    pub fn check_invariants(&self) -> Result<()> {
        for i in 0..self.n() {
            let mut last = None;
            for p in self.slots(i) {
                let j = self.neighbors[p];
                if j == i {
                    return Err(Error::InvalidInstance(format!("self-loop at {i}")));
                }
                if last.is_some_and(|l| l >= j) {
                    return Err(Error::InvalidInstance(format!("row {i} not strictly sorted")));
                }
                last = Some(j);
                let q = self.reverse[p];
                if self.neighbors[q] != i || self.weights[q] != self.weights[p] {
                    return Err(Error::InvalidInstance(format!("asymmetric entry ({i}, {j})")));
                }
            }
        }
        Ok(())
    }

    /// Connected component label per index.
    pub fn components(&self) -> (usize, Vec<usize>) {
        let n = self.n();
        let mut label = vec![usize::MAX; n];
        let mut count = 0;
        let mut queue = VecDeque::new();
        for start in 0..n {
            if label[start] != usize::MAX {
                continue;
            }
            label[start] = count;
            queue.push_back(start);
            while let Some(i) = queue.pop_front() {
                for (j, _) in self.neighbors(i) {
                    if label[j] == usize::MAX {
                        label[j] = count;
                        queue.push_back(j);
                    }
                }
            }
            count += 1;
        }
        (count, label)
    }

    /// True when the graph has no cycles.
    pub fn is_forest(&self) -> bool {
        let (components, _) = self.components();
        self.edge_count() + components == self.n()
    }

    /// True when the graph is a single tree spanning all indices.
    pub fn is_tree(&self) -> bool {
        self.n() > 0 && self.edge_count() + 1 == self.n() && self.components().0 == 1
    }

    /// Writes the edge-list format: a header `n=<N> edges=<E> seed=<seed>`
    /// followed by one `i j J_ij` line per undirected edge.
    pub fn write_edge_list<W: Write>(&self, mut out: W) -> Result<()> {
        let seed = self
            .seed
            .map_or_else(|| "none".to_string(), |s| s.to_string());
        writeln!(out, "n={} edges={} seed={}", self.n(), self.edge_count(), seed)?;
        for (i, j, w) in self.edges() {
            writeln!(out, "{i} {j} {w:?}")?;
        }
        Ok(())
    }

    pub fn read_edge_list<R: BufRead>(input: R) -> Result<Self> {
        let mut lines = input.lines().enumerate();
        let (_, header) = lines.next().ok_or(Error::Parse {
            line: 1,
            message: "missing header".into(),
        })?;
        let header = header?;
        let mut n = None;
        let mut edges_declared = None;
        let mut seed = None;
        for field in header.split_whitespace() {
            let (key, value) = field.split_once('=').ok_or_else(|| Error::Parse {
                line: 1,
                message: format!("malformed header field `{field}`"),
            })?;
            let bad = |_| Error::Parse {
                line: 1,
                message: format!("bad value in `{field}`"),
            };
            match key {
                "n" => n = Some(value.parse::<usize>().map_err(bad)?),
                "edges" => edges_declared = Some(value.parse::<usize>().map_err(bad)?),
                "seed" if value != "none" => seed = Some(value.parse::<u64>().map_err(bad)?),
                "seed" => {}
                _ => {
                    return Err(Error::Parse {
                        line: 1,
                        message: format!("unknown header key `{key}`"),
                    })
                }
            }
        }
        let n = n.ok_or(Error::Parse {
            line: 1,
            message: "header lacks n".into(),
        })?;
        let mut edges = Vec::new();
        for (idx, line) in lines {
            let line = line?;
            let line_no = idx + 1;
            if line.trim().is_empty() {
                continue;
            }
            let parse_err = |message: String| Error::Parse {
                line: line_no,
                message,
            };
            let mut parts = line.split_whitespace();
            let mut next = |what: &str| {
                parts
                    .next()
                    .ok_or_else(|| parse_err(format!("missing {what}")))
            };
            let i = next("i")?
                .parse::<usize>()
                .map_err(|e| parse_err(e.to_string()))?;
            let j = next("j")?
                .parse::<usize>()
                .map_err(|e| parse_err(e.to_string()))?;
            let w = next("J_ij")?
                .parse::<f64>()
                .map_err(|e| parse_err(e.to_string()))?;
            edges.push((i, j, w));
        }
        if let Some(declared) = edges_declared {
            if declared != edges.len() {
                return Err(Error::Parse {
                    line: 1,
                    message: format!("header declares {declared} edges, found {}", edges.len()),
                });
            }
        }
        let instance = Self::from_edges(n, &edges)?;
        Ok(match seed {
            Some(s) => instance.with_seed(s),
            None => instance,
        })
    }
}
