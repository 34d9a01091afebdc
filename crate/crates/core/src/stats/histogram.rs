use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum HistogramError {
    #[error("need at least one bin")]
    NoBins,
    #[error("bin edges must be finite and strictly ascending")]
    BadEdges,
    #[error("histograms have different edges")]
    EdgeMismatch,
    #[error("{bins} bins cannot be grouped by {factor}")]
    BadFactor { bins: usize, factor: usize },
}

/// Fixed-edge histogram. Bins are half-open `[lo, hi)` except the last, which is closed.
/// Values outside the edges are tallied in `outside` and excluded from `total`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Histogram {
    pub bin_edges: Vec<f64>,
    pub counts: Vec<u64>,
    pub total: u64,
    pub outside: u64,
}

/// How bin edges are chosen.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BinSpec {
    /// `n` equal-width bins spanning the observed min..max.
    Auto(usize),
    Edges(Vec<f64>),
}

impl Default for BinSpec {
    fn default() -> Self {
        BinSpec::Auto(50)
    }
}

impl BinSpec {
    pub fn edges_for(&self, values: &[f64]) -> Result<Vec<f64>, HistogramError> {
        match self {
            BinSpec::Edges(e) => Ok(e.clone()),
            BinSpec::Auto(n) => {
                let lo = values.iter().copied().fold(f64::INFINITY, f64::min);
                let hi = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
                let (lo, hi) = match (lo.is_finite(), hi.is_finite()) {
                    (true, true) if hi > lo => (lo, hi),
                    (true, true) => (lo, lo + 1.0),
                    _ => (0.0, 1.0),
                };
                Ok(uniform_edges(lo, hi, *n)?)
            }
        }
    }
}

/// `lo + (hi − lo)·i/n`. The formula makes the edges of `2k` bins a bit-exact superset
/// of the edges of `k` bins.
pub fn uniform_edges(lo: f64, hi: f64, n: usize) -> Result<Vec<f64>, HistogramError> {
    if n == 0 {
        return Err(HistogramError::NoBins);
    }
    let w = hi - lo;
    let mut edges: Vec<f64> = (0..=n).map(|i| lo + w * i as f64 / n as f64).collect();
    edges[n] = hi;
    Ok(edges)
}

impl Histogram {
    pub fn with_edges(bin_edges: Vec<f64>) -> Result<Self, HistogramError> {
        if bin_edges.len() < 2 {
            return Err(HistogramError::NoBins);
        }
        if bin_edges.iter().any(|e| !e.is_finite()) || bin_edges.windows(2).any(|w| w[0] >= w[1]) {
            return Err(HistogramError::BadEdges);
        }
        let bins = bin_edges.len() - 1;
        Ok(Self {
            bin_edges,
            counts: vec![0; bins],
            total: 0,
            outside: 0,
        })
    }

    pub fn uniform(lo: f64, hi: f64, n: usize) -> Result<Self, HistogramError> {
        Self::with_edges(uniform_edges(lo, hi, n)?)
    }

    pub fn bins(&self) -> usize {
        self.counts.len()
    }

    pub fn bin_of(&self, value: f64) -> Option<usize> {
        let last = *self.bin_edges.last()?;
        if !(value >= self.bin_edges[0] && value <= last) {
            return None;
        }
        if value == last {
            return Some(self.bins() - 1);
        }
        // First edge strictly greater than value, minus one.
        Some(self.bin_edges.partition_point(|&e| e <= value) - 1)
    }

    pub fn add(&mut self, value: f64) {
        match self.bin_of(value) {
            Some(b) => {
                self.counts[b] += 1;
                self.total += 1;
            }
            None => self.outside += 1,
        }
    }

    pub fn empty_like(&self) -> Self {
        Self {
            bin_edges: self.bin_edges.clone(),
            counts: vec![0; self.bins()],
            total: 0,
            outside: 0,
        }
    }

    /// Sum of two histograms over identical edges.
    pub fn merge(mut self, other: &Histogram) -> Result<Self, HistogramError> {
        if self.bin_edges != other.bin_edges {
            return Err(HistogramError::EdgeMismatch);
        }
        self.counts.iter_mut().zip(&other.counts).for_each(|(a, b)| *a += b);
        self.total += other.total;
        self.outside += other.outside;
        Ok(self)
    }

    /// Merge each run of `factor` adjacent bins.
    pub fn rebin(&self, factor: usize) -> Result<Self, HistogramError> {
        if factor == 0 || self.bins() % factor != 0 {
            return Err(HistogramError::BadFactor {
                bins: self.bins(),
                factor,
            });
        }
        Ok(Self {
            bin_edges: self.bin_edges.iter().step_by(factor).copied().collect(),
            counts: self.counts.chunks(factor).map(|c| c.iter().sum()).collect(),
            total: self.total,
            outside: self.outside,
        })
    }

    /// `bin_lo,bin_hi,count` rows with header.
    pub fn to_csv(&self) -> String {
        let mut s = String::from("bin_lo,bin_hi,count\n");
        for (i, c) in self.counts.iter().enumerate() {
            s.push_str(&format!("{},{},{}\n", self.bin_edges[i], self.bin_edges[i + 1], c));
        }
        s
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn closed_last_bin() {
        let mut h = Histogram::with_edges(vec![0.0, 8.0, 16.0]).unwrap();
        for v in [5.0, 5.0, 9.0, 16.0, 16.5, -1.0] {
            h.add(v);
        }
        assert_eq!(h.counts, vec![2, 2]);
        assert_eq!((h.total, h.outside), (4, 2));
        assert_eq!(h.bin_of(8.0), Some(1));
    }

    #[test]
    fn bad_edges() {
        assert_eq!(Histogram::with_edges(vec![0.0]), Err(HistogramError::NoBins));
        assert_eq!(Histogram::with_edges(vec![0.0, 0.0]), Err(HistogramError::BadEdges));
        assert!(Histogram::uniform(0.0, 1.0, 3).unwrap().rebin(2).is_err());
    }

    #[test]
    fn csv_format() {
        let mut h = Histogram::with_edges(vec![0.0, 0.5, 1.0]).unwrap();
        h.add(0.7);
        assert_eq!(h.to_csv(), "bin_lo,bin_hi,count\n0,0.5,0\n0.5,1,1\n");
    }

    proptest! {
        #[test]
        fn rebin_refinement(values in proptest::collection::vec(-50.0f64..150.0, 0..300), k in 1usize..40, lo in -10.0f64..0.0, width in 1.0f64..120.0) {
            let hi = lo + width;
            let mut fine = Histogram::uniform(lo, hi, 2 * k).unwrap();
            let mut coarse = Histogram::uniform(lo, hi, k).unwrap();
            for &v in &values {
                fine.add(v);
                coarse.add(v);
            }
            prop_assert_eq!(fine.rebin(2).unwrap(), coarse);
        }

        #[test]
        fn merge_is_associative_and_partitions(values in proptest::collection::vec(0.0f64..10.0, 0..200), cut1 in 0usize..200, cut2 in 0usize..200) {
            let base = Histogram::uniform(0.0, 10.0, 7).unwrap();
            let (a, b) = (cut1.min(values.len()), cut2.min(values.len()));
            let (a, b) = (a.min(b), a.max(b));
            let fill = |vs: &[f64]| {
                let mut h = base.empty_like();
                vs.iter().for_each(|v| h.add(*v));
                h
            };
            let (x, y, z) = (fill(&values[..a]), fill(&values[a..b]), fill(&values[b..]));
            let left = x.clone().merge(&y).unwrap().merge(&z).unwrap();
            let right = x.merge(&y.merge(&z).unwrap()).unwrap();
            prop_assert_eq!(&left, &right);
            prop_assert_eq!(left, fill(&values));
            prop_assert_eq!(right.counts.iter().sum::<u64>(), right.total);
        }
    }
}
