//! Histograms and distribution comparisons.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const DEFAULT_BINS: usize = 50;

/// Uniform-bin histogram. Values outside the edges are dropped; the last bin is closed.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Histogram {
    pub edges: Vec<f64>,
    pub counts: Vec<f64>,
    pub normalized: bool,
}

impl Histogram {
    pub fn uniform(lo: f64, hi: f64, bins: usize) -> Result<Self> {
        if bins == 0 || !(hi > lo) || !lo.is_finite() || !hi.is_finite() {
            return Err(Error::contract(format!(
                "histogram needs bins >= 1 and finite lo < hi, got {bins} bins on [{lo}, {hi}]"
            )));
        }
        let w = (hi - lo) / bins as f64;
        let mut edges: Vec<f64> = (0..=bins).map(|i| lo + w * i as f64).collect();
        edges[bins] = hi;
        Ok(Self {
            edges,
            counts: vec![0.0; bins],
            normalized: false,
        })
    }

    /// Bins spanning the sample range; a constant sample gets a unit-width range.
    pub fn from_samples(samples: &[f64], bins: usize) -> Result<Self> {
        let (lo, hi) = range(samples.iter().copied())?;
        let mut h = Self::uniform(lo, hi, bins)?;
        h.add_all(samples);
        Ok(h)
    }

    pub fn with_range(samples: &[f64], lo: f64, hi: f64, bins: usize) -> Result<Self> {
        let mut h = Self::uniform(lo, hi, bins)?;
        h.add_all(samples);
        Ok(h)
    }

    /// Two histograms over the pooled range of both samples, each normalized.
    pub fn pooled(a: &[f64], b: &[f64], bins: usize) -> Result<(Self, Self)> {
        let (lo, hi) = range(a.iter().chain(b).copied())?;
        let mut ha = Self::with_range(a, lo, hi, bins)?;
        let mut hb = Self::with_range(b, lo, hi, bins)?;
        ha.normalize()?;
        hb.normalize()?;
        Ok((ha, hb))
    }

    pub fn bins(&self) -> usize {
        self.counts.len()
    }

    pub fn lo(&self) -> f64 {
        self.edges[0]
    }

    pub fn hi(&self) -> f64 {
        self.edges[self.bins()]
    }

    pub fn bin_width(&self) -> f64 {
        (self.hi() - self.lo()) / self.bins() as f64
    }

    pub fn bin_of(&self, x: f64) -> Option<usize> {
        if !(x >= self.lo() && x <= self.hi()) {
            return None;
        }
        let i = ((x - self.lo()) / self.bin_width()) as usize;
        Some(i.min(self.bins() - 1))
    }

    pub fn add(&mut self, x: f64) {
        if let Some(i) = self.bin_of(x) {
            self.counts[i] += 1.0;
        }
    }

    pub fn add_all(&mut self, xs: &[f64]) {
        xs.iter().for_each(|&x| self.add(x));
    }

    pub fn total(&self) -> f64 {
        self.counts.iter().sum()
    }

    /// Rescales counts to sum to 1.
    pub fn normalize(&mut self) -> Result<()> {
        let t = self.total();
        if !(t > 0.0) {
            return Err(Error::contract("cannot normalize an empty histogram"));
        }
        self.counts.iter_mut().for_each(|c| *c /= t);
        self.normalized = true;
        Ok(())
    }

    pub fn centers(&self) -> Vec<f64> {
        self.edges.windows(2).map(|w| 0.5 * (w[0] + w[1])).collect()
    }

    /// Density per unit length, for plotting against a pdf.
    pub fn density(&self) -> Vec<f64> {
        let t = self.total();
        let w = self.bin_width();
        self.counts.iter().map(|c| c / (t * w)).collect()
    }

    /// CSV with header `bin_lo,bin_hi,count,density`.
    pub fn to_csv(&self) -> String {
        let mut s = String::from("bin_lo,bin_hi,count,density\n");
        for ((w, c), d) in self.edges.windows(2).zip(&self.counts).zip(self.density()) {
            s.push_str(&format!("{},{},{},{}\n", w[0], w[1], c, d));
        }
        s
    }
}

fn range(xs: impl Iterator<Item = f64>) -> Result<(f64, f64)> {
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    let mut any = false;
    for x in xs {
        if !x.is_finite() {
            return Err(Error::Domain {
                op: "histogram range",
                value: x,
            });
        }
        lo = lo.min(x);
        hi = hi.max(x);
        any = true;
    }
    if !any {
        return Err(Error::contract("histogram of an empty sample"));
    }
    if hi == lo {
        return Ok((lo - 0.5, hi + 0.5));
    }
    Ok((lo, hi))
}

/// Two-sample Kolmogorov–Smirnov statistic `sup |F_a - F_b|`.
pub fn ks_two_sample(a: &[f64], b: &[f64]) -> Result<f64> {
    if a.is_empty() || b.is_empty() {
        return Err(Error::contract("KS statistic needs two nonempty samples"));
    }
    let mut a = a.to_vec();
    let mut b = b.to_vec();
    a.sort_by(f64::total_cmp);
    b.sort_by(f64::total_cmp);
    let (na, nb) = (a.len() as f64, b.len() as f64);
    let (mut i, mut j) = (0, 0);
    let mut d = 0.0f64;
    while i < a.len() && j < b.len() {
        let x = a[i].min(b[j]);
        while i < a.len() && a[i] <= x {
            i += 1;
        }
        while j < b.len() && b[j] <= x {
            j += 1;
        }
        d = d.max((i as f64 / na - j as f64 / nb).abs());
    }
    Ok(d)
}

/// One-sample KS statistic against a continuous cdf.
pub fn ks_one_sample(sample: &[f64], cdf: impl Fn(f64) -> f64) -> Result<f64> {
    if sample.is_empty() {
        return Err(Error::contract("KS statistic needs a nonempty sample"));
    }
    let mut s = sample.to_vec();
    s.sort_by(f64::total_cmp);
    let n = s.len() as f64;
    Ok(s.iter().enumerate().fold(0.0f64, |d, (i, &x)| {
        let f = cdf(x);
        d.max((f - i as f64 / n).abs()).max(((i + 1) as f64 / n - f).abs())
    }))
}

pub fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

/// Unbiased sample variance.
pub fn variance(xs: &[f64]) -> f64 {
    let m = mean(xs);
    xs.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (xs.len() as f64 - 1.0)
}

/// Least-squares slope of `y` on `x`.
pub fn slope(x: &[f64], y: &[f64]) -> f64 {
    let (mx, my) = (mean(x), mean(y));
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = x.iter().map(|a| (a - mx).powi(2)).sum();
    sxy / sxx
}
