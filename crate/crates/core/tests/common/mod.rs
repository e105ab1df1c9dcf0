//! Independent reference implementations used as test oracles.
#![allow(dead_code)]

use std::collections::VecDeque;

use minimon::report::{DepthPoint, DepthSeries};

/// Two-pass mean and variance, quartiles by explicit order statistics.
#[derive(Debug, Clone, Copy)]
pub struct NaiveSummary {
    pub mean: f64,
    pub stddev: f64,
    pub ci95_half: f64,
    pub q1: f64,
    pub median: f64,
    pub q3: f64,
}

fn naive_quantile(sorted: &[f64], p: f64) -> f64 {
    let h = (sorted.len() - 1) as f64 * p;
    let below = h.floor();
    let above = h.ceil();
    let lo = sorted[below as usize];
    let hi = sorted[above as usize];
    if below == above {
        lo
    } else {
        lo * (above - h) + hi * (h - below)
    }
}

pub fn naive_summary(xs: &[f64]) -> NaiveSummary {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    let var = xs.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (n - 1.0);
    let stddev = var.sqrt();
    let mut sorted = xs.to_vec();
    // insertion sort: deliberately not the library's sort
    for i in 1..sorted.len() {
        let mut j = i;
        while j > 0 && sorted[j - 1] > sorted[j] {
            sorted.swap(j - 1, j);
            j -= 1;
        }
    }
    NaiveSummary {
        mean,
        stddev,
        ci95_half: 1.96 * stddev / n.sqrt(),
        q1: naive_quantile(&sorted, 0.25),
        median: naive_quantile(&sorted, 0.5),
        q3: naive_quantile(&sorted, 0.75),
    }
}

/// Relative comparison with an absolute floor of 1e-12 for values that
/// should be zero but carry rounding residue (e.g. σ of a constant input).
pub fn rel_close(a: f64, b: f64, tol: f64) -> bool {
    let diff = (a - b).abs();
    diff <= 1e-12 || diff <= tol * a.abs().max(b.abs())
}

/// A FIFO of unbounded storage that drops its oldest element when a put
/// would exceed `capacity` and `overwrite` is set.
#[derive(Debug)]
pub struct ModelFifo {
    pub items: VecDeque<u64>,
    pub capacity: usize,
    pub overwrite: bool,
    pub overwritten: u64,
}

impl ModelFifo {
    pub fn new(capacity: usize, overwrite: bool) -> Self {
        Self {
            items: VecDeque::new(),
            capacity,
            overwrite,
            overwritten: 0,
        }
    }

    /// Returns false when a non-overwriting model is full.
    pub fn put(&mut self, v: u64) -> bool {
        if self.items.len() == self.capacity {
            if !self.overwrite {
                return false;
            }
            self.items.pop_front();
            self.overwritten += 1;
        }
        self.items.push_back(v);
        true
    }

    pub fn take(&mut self) -> Option<u64> {
        self.items.pop_front()
    }
}

/// Count and sum windows computed from scratch: chunk the stream into
/// consecutive groups of `w`.
pub fn windows_by_chunking(durations: &[u64], w: usize) -> (Vec<(u64, u64)>, (u64, u64)) {
    let mut full = Vec::new();
    let mut residual = (0, 0);
    for chunk in durations.chunks(w) {
        let sum: u64 = chunk.iter().sum();
        if chunk.len() == w {
            full.push((w as u64, sum));
        } else {
            residual = (chunk.len() as u64, sum);
        }
    }
    (full, residual)
}

/// Fixed inputs behind the frozen table, CSV and chart.
///
/// Deterministic pseudo-measurements around `base` µs.
pub fn synthetic(base: f64, spread: f64, n: usize, salt: u64) -> Vec<f64> {
    (0..n as u64)
        .map(|i| base + spread * (((i * 7919 + salt * 104_729) % 1000) as f64 / 1000.0))
        .collect()
}

pub fn dataset() -> Vec<(&'static str, Vec<f64>)> {
    vec![
        ("none", vec![0.0548; 64]),
        ("direct-aggregating", synthetic(0.40, 0.02, 257, 1)),
        ("direct-duration", synthetic(2.30, 0.10, 500, 2)),
        ("interceptor-full", synthetic(4.70, 0.30, 999, 3)),
    ]
}

pub fn chart_series() -> Vec<DepthSeries<f64>> {
    let point = |depth, mean, stddev| DepthPoint {
        depth,
        mean,
        stddev,
    };
    vec![
        DepthSeries::new(
            "interceptor-full",
            vec![
                point(2, 1.0, 0.2),
                point(8, 3.8, 0.5),
                point(32, 15.1, 1.4),
                point(128, 61.0, 6.0),
            ],
        ),
        DepthSeries::new(
            "direct-full",
            vec![
                point(2, 0.5, 0.1),
                point(8, 1.9, 0.3),
                point(32, 7.7, 0.9),
                point(128, 30.2, 3.1),
            ],
        ),
        DepthSeries::new(
            "none",
            vec![
                point(2, 0.01, 0.005),
                point(8, 0.04, 0.01),
                point(32, 0.15, 0.02),
                point(128, 0.6, 0.05),
            ],
        ),
    ]
}
