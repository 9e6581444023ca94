//! Uniform grids over `[a - tau, b]` and functions sampled on them.

use std::fmt::Write as _;
use std::ops::RangeInclusive;

use crate::error::{Error, Result};

const ALIGN_TOL: f64 = 1e-12;

/// Uniform grid covering `[a - tau, b]` with step `h = (b - a) / n`.
///
/// The delay is always an exact multiple of the step, so `a`, `b - tau`
/// and `b` are nodes and the shift `x -> x - tau` maps nodes to nodes.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Grid {
    a: f64,
    b: f64,
    tau: f64,
    n: usize,
    shift: usize,
    h: f64,
}

/// Builds the grid for the interval `[a, b]`, delay `tau` and `n` subintervals of `[a, b]`.
pub fn make_grid(a: f64, b: f64, tau: f64, n: usize) -> Result<Grid> {
    Grid::new(a, b, tau, n)
}

impl Grid {
    pub fn new(a: f64, b: f64, tau: f64, n: usize) -> Result<Self> {
        if !(a.is_finite() && b.is_finite() && tau.is_finite()) {
            return Err(Error::domain("grid bounds and delay must be finite"));
        }
        if b <= a {
            return Err(Error::domain(format!("need b > a, got a = {a}, b = {b}")));
        }
        if !(tau > 0.0 && tau < b - a) {
            return Err(Error::domain(format!(
                "need 0 < tau < b - a = {}, got tau = {tau}",
                b - a
            )));
        }
        if n < 2 {
            return Err(Error::domain(format!("need n >= 2, got {n}")));
        }
        let h = (b - a) / n as f64;
        let shift = match aligned_shift(tau, h) {
            Some(m) => m,
            None => {
                return Err(Error::Alignment {
                    tau,
                    n,
                    nearest_n: nearest_admissible_n(a, b, tau, n),
                })
            }
        };
        Ok(Grid {
            a,
            b,
            tau: shift as f64 * h,
            n,
            shift,
            h,
        })
    }

    pub fn a(&self) -> f64 {
        self.a
    }

    pub fn b(&self) -> f64 {
        self.b
    }

    pub fn tau(&self) -> f64 {
        self.tau
    }

    /// Subintervals of `[a, b]`.
    pub fn n(&self) -> usize {
        self.n
    }

    pub fn h(&self) -> f64 {
        self.h
    }

    /// Number of steps spanned by the delay.
    pub fn shift(&self) -> usize {
        self.shift
    }

    /// Total number of nodes on `[a - tau, b]`.
    pub fn len(&self) -> usize {
        self.n + self.shift + 1
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// Subintervals of the whole grid `[a - tau, b]`.
    pub fn subintervals(&self) -> usize {
        self.n + self.shift
    }

    /// Index of the node `a`.
    pub fn idx_a(&self) -> usize {
        self.shift
    }

    /// Index of the node `b - tau`.
    pub fn idx_split(&self) -> usize {
        self.n
    }

    /// Index of the node `b`.
    pub fn idx_b(&self) -> usize {
        self.n + self.shift
    }

    /// Abscissa of node `i`.
    pub fn x(&self, i: usize) -> f64 {
        if i == self.idx_b() {
            self.b
        } else {
            self.a + (i as f64 - self.shift as f64) * self.h
        }
    }

    pub fn nodes(&self) -> Vec<f64> {
        (0..self.len()).map(|i| self.x(i)).collect()
    }

    /// Indices strictly between `a` and `b`.
    pub fn interior(&self) -> RangeInclusive<usize> {
        self.idx_a() + 1..=self.idx_b() - 1
    }
}

fn aligned_shift(tau: f64, h: f64) -> Option<usize> {
    let ratio = tau / h;
    let m = ratio.round();
    if m >= 1.0 && (ratio - m).abs() <= ALIGN_TOL * ratio {
        Some(m as usize)
    } else {
        None
    }
}

fn nearest_admissible_n(a: f64, b: f64, tau: f64, n: usize) -> Option<usize> {
    let ok = |k: usize| k >= 2 && aligned_shift(tau, (b - a) / k as f64).is_some();
    (1..=4 * n + 64).find_map(|d| {
        if n > d && ok(n - d) {
            Some(n - d)
        } else if ok(n + d) {
            Some(n + d)
        } else {
            None
        }
    })
}

/// Values of a function at the grid nodes `lo..=hi`.
#[derive(Debug, Clone, PartialEq)]
pub struct SampledPath {
    grid: Grid,
    lo: usize,
    values: Vec<f64>,
}

impl SampledPath {
    /// Wraps `values` as samples on nodes `lo..lo + values.len()`.
    pub fn new(grid: Grid, lo: usize, values: Vec<f64>) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::domain("a sampled path needs at least one node"));
        }
        if lo + values.len() > grid.len() {
            return Err(Error::domain(format!(
                "path on nodes {lo}..{} exceeds grid of {} nodes",
                lo + values.len(),
                grid.len()
            )));
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::domain(format!(
                "non-finite sample {} at x = {}",
                values[i],
                grid.x(lo + i)
            )));
        }
        Ok(SampledPath { grid, lo, values })
    }

    /// Samples `f` at the nodes `lo..=hi`.
    pub fn from_fn(grid: Grid, lo: usize, hi: usize, f: impl Fn(f64) -> f64) -> Result<Self> {
        if hi < lo {
            return Err(Error::domain(format!("empty node range {lo}..={hi}")));
        }
        let values = (lo..=hi).map(|i| f(grid.x(i))).collect();
        SampledPath::new(grid, lo, values)
    }

    /// The zero function on `lo..=hi`.
    pub fn zeros(grid: Grid, lo: usize, hi: usize) -> Self {
        SampledPath {
            grid,
            lo,
            values: vec![0.0; hi - lo + 1],
        }
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn lo(&self) -> usize {
        self.lo
    }

    pub fn hi(&self) -> usize {
        self.lo + self.values.len() - 1
    }

    pub fn range(&self) -> RangeInclusive<usize> {
        self.lo..=self.hi()
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub(crate) fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    /// Value at grid node `i`; panics when `i` is outside the path's range.
    pub fn at(&self, i: usize) -> f64 {
        assert!(
            self.range().contains(&i),
            "node {i} outside path range {:?}",
            self.range()
        );
        self.values[i - self.lo]
    }

    pub fn get(&self, i: usize) -> Option<f64> {
        i.checked_sub(self.lo).and_then(|k| self.values.get(k).copied())
    }

    /// Abscissae of this path's nodes.
    pub fn xs(&self) -> Vec<f64> {
        self.range().map(|i| self.grid.x(i)).collect()
    }

    /// Restriction to the node range `lo..=hi`.
    pub fn restrict(&self, lo: usize, hi: usize) -> Result<Self> {
        if lo > hi || lo < self.lo || hi > self.hi() {
            return Err(Error::domain(format!(
                "cannot restrict {:?} to {lo}..={hi}",
                self.range()
            )));
        }
        Ok(SampledPath {
            grid: self.grid,
            lo,
            values: self.values[lo - self.lo..=hi - self.lo].to_vec(),
        })
    }

    /// Pointwise combination of two paths on the same nodes.
    pub fn zip_with(&self, other: &SampledPath, f: impl Fn(f64, f64) -> f64) -> Result<Self> {
        if self.grid != other.grid || self.range() != other.range() {
            return Err(Error::domain(format!(
                "paths on {:?} and {:?} do not share nodes",
                self.range(),
                other.range()
            )));
        }
        let values = self
            .values
            .iter()
            .zip(&other.values)
            .map(|(&p, &q)| f(p, q))
            .collect();
        SampledPath::new(self.grid, self.lo, values)
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Result<Self> {
        SampledPath::new(self.grid, self.lo, self.values.iter().map(|&v| f(v)).collect())
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    /// `x,value` CSV with a header row and 17 significant digits.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("x,value\n");
        for i in self.range() {
            let _ = writeln!(out, "{},{}", fmt_num(self.grid.x(i)), fmt_num(self.at(i)));
        }
        out
    }
}

/// Formats a real with 17 significant digits, `.` as decimal separator.
pub fn fmt_num(v: f64) -> String {
    format!("{v:.16e}")
}
