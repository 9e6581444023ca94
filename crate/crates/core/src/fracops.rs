//! Fractional integrals and derivatives of sampled functions.
//!
//! All operators act on [`SampledPath`]s over a uniform [`Grid`](crate::Grid):
//!
//! * fractional integrals use the product trapezoidal rule, integrating the
//!   weakly singular kernel exactly against the piecewise-linear interpolant;
//! * the left Caputo derivative uses the L1 scheme (difference quotients
//!   against exact kernel integrals), so constants map to exactly zero;
//! * Riemann–Liouville derivatives differentiate the corresponding
//!   `(1 - alpha)`-integral by finite differences.
//!
//! Tail corrections handle kernels whose integration range starts at a node
//! `r` other than the evaluation point, as needed when an interval is split
//! at `b - tau`.

use crate::error::{Error, Result};
use crate::grid::SampledPath;
use crate::quadrature::{fd_derivative, pow_step_diff, KernelWeights};

/// The gamma function (Lanczos approximation).
pub fn gamma(x: f64) -> f64 {
    statrs::function::gamma::gamma(x)
}

/// Orders of the fractional derivative (`alpha`) and integral (`beta`).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FracOrder {
    alpha: f64,
    beta: f64,
}

impl FracOrder {
    pub fn new(alpha: f64, beta: f64) -> Result<Self> {
        check_alpha(alpha)?;
        check_beta(beta)?;
        Ok(FracOrder { alpha, beta })
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }
}

pub(crate) fn check_alpha(alpha: f64) -> Result<()> {
    if alpha > 0.0 && alpha < 1.0 {
        Ok(())
    } else {
        Err(Error::domain(format!("alpha must lie in (0, 1), got {alpha}")))
    }
}

pub(crate) fn check_beta(beta: f64) -> Result<()> {
    if beta > 0.0 && beta.is_finite() {
        Ok(())
    } else {
        Err(Error::domain(format!("beta must be positive, got {beta}")))
    }
}

fn check_node(path: &SampledPath, idx: usize, what: &str) -> Result<()> {
    if path.range().contains(&idx) {
        Ok(())
    } else {
        Err(Error::domain(format!(
            "{what} node {idx} outside path range {:?}",
            path.range()
        )))
    }
}

/// `sum_{j=from}^{to-1} near[j-k] g_j + far[j-k] g_{j+1}` for `k <= from`.
fn right_sum(g: &[f64], base: usize, k: usize, from: usize, to: usize, w: &KernelWeights) -> f64 {
    (from..to)
        .map(|j| w.near[j - k] * g[j - base] + w.far[j - k] * g[j + 1 - base])
        .sum()
}

/// Left fractional integral `(1/Γ(β)) ∫_lower^x (x-t)^(β-1) f(t) dt` on nodes `lower..=hi`.
pub fn left_frac_integral(f: &SampledPath, beta: f64, lower: usize) -> Result<SampledPath> {
    check_beta(beta)?;
    check_node(f, lower, "lower")?;
    let grid = *f.grid();
    let vals = &f.values()[lower - f.lo()..];
    let m = vals.len() - 1;
    let w = KernelWeights::new(beta - 1.0, m);
    let scale = grid.h().powf(beta) / gamma(beta);
    let out = (0..=m)
        .map(|k| {
            scale
                * (0..k)
                    .map(|j| w.far[k - j - 1] * vals[j] + w.near[k - j - 1] * vals[j + 1])
                    .sum::<f64>()
        })
        .collect();
    SampledPath::new(grid, lower, out)
}

/// Right fractional integral `(1/Γ(β)) ∫_x^upper (t-x)^(β-1) g(t) dt` on nodes `lo..=upper`.
pub fn right_frac_integral(g: &SampledPath, beta: f64, upper: usize) -> Result<SampledPath> {
    check_beta(beta)?;
    check_node(g, upper, "upper")?;
    let grid = *g.grid();
    let lo = g.lo();
    let w = KernelWeights::new(beta - 1.0, upper - lo);
    let scale = grid.h().powf(beta) / gamma(beta);
    let out = (lo..=upper)
        .map(|k| scale * right_sum(g.values(), lo, k, k, upper, &w))
        .collect();
    SampledPath::new(grid, lo, out)
}

/// Left Caputo derivative of order `alpha` by the L1 scheme, on nodes `lower..=hi`.
///
/// The value at `lower` is 0 by convention.
pub fn caputo_left(f: &SampledPath, alpha: f64, lower: usize) -> Result<SampledPath> {
    check_alpha(alpha)?;
    check_node(f, lower, "lower")?;
    let grid = *f.grid();
    let vals = &f.values()[lower - f.lo()..];
    let m = vals.len() - 1;
    let diffs: Vec<f64> = vals.windows(2).map(|w| w[1] - w[0]).collect();
    let c: Vec<f64> = (0..m).map(|p| pow_step_diff(p, 1.0 - alpha)).collect();
    let scale = grid.h().powf(-alpha) / gamma(2.0 - alpha);
    let out = (0..=m)
        .map(|k| scale * (0..k).map(|j| diffs[j] * c[k - j - 1]).sum::<f64>())
        .collect();
    SampledPath::new(grid, lower, out)
}

/// Left Riemann–Liouville derivative: `d/dx` of the left `(1 - alpha)`-integral.
pub fn rl_left_derivative(f: &SampledPath, alpha: f64, lower: usize) -> Result<SampledPath> {
    check_alpha(alpha)?;
    check_node(f, lower, "lower")?;
    if f.hi() < lower + 2 {
        return Err(Error::Resolution(format!(
            "left RL derivative needs at least 3 nodes, have {}",
            f.hi() + 1 - lower
        )));
    }
    let integral = left_frac_integral(f, 1.0 - alpha, lower)?;
    let d = fd_derivative(integral.values(), f.grid().h());
    SampledPath::new(*f.grid(), lower, d)
}

/// Right Riemann–Liouville derivative: `-d/dx` of the right `(1 - alpha)`-integral,
/// on nodes `lo..=upper`.
pub fn rl_right_derivative(g: &SampledPath, alpha: f64, upper: usize) -> Result<SampledPath> {
    check_alpha(alpha)?;
    check_node(g, upper, "upper")?;
    if upper < g.lo() + 2 {
        return Err(Error::Resolution(format!(
            "right RL derivative needs at least 3 nodes, have {}",
            upper + 1 - g.lo()
        )));
    }
    let integral = right_frac_integral(g, 1.0 - alpha, upper)?;
    let d = fd_derivative(integral.values(), g.grid().h());
    SampledPath::new(*g.grid(), g.lo(), d.into_iter().map(|v| -v).collect())
}

fn check_tail(g: &SampledPath, r: usize, upper: usize) -> Result<()> {
    if r >= upper {
        return Err(Error::domain(format!(
            "tail split node {r} must precede upper node {upper}"
        )));
    }
    check_node(g, r, "split")?;
    check_node(g, upper, "upper")
}

/// `(1/Γ(1-α)) d/dx ∫_r^upper (t-x)^(-α) g(t) dt` for nodes `lo..=r`.
///
/// The inner integral is evaluated by product trapezoid and differentiated
/// by finite differences, one-sided at both ends of `lo..=r`.
pub fn tail_derivative_correction(
    g: &SampledPath,
    alpha: f64,
    r: usize,
    upper: usize,
) -> Result<SampledPath> {
    check_alpha(alpha)?;
    check_tail(g, r, upper)?;
    let lo = g.lo();
    if r == lo {
        return Err(Error::Resolution(
            "tail derivative needs at least 2 nodes before the split".into(),
        ));
    }
    let grid = *g.grid();
    let w = KernelWeights::new(-alpha, upper - lo);
    let scale = grid.h().powf(1.0 - alpha) / gamma(1.0 - alpha);
    let tail: Vec<f64> = (lo..=r)
        .map(|k| scale * right_sum(g.values(), lo, k, r, upper, &w))
        .collect();
    SampledPath::new(grid, lo, fd_derivative(&tail, grid.h()))
}

/// `(1/Γ(β)) ∫_r^upper (t-x)^(β-1) g(t) dt` for nodes `lo..=r`.
pub fn tail_integral_correction(
    g: &SampledPath,
    beta: f64,
    r: usize,
    upper: usize,
) -> Result<SampledPath> {
    check_beta(beta)?;
    check_tail(g, r, upper)?;
    let lo = g.lo();
    let grid = *g.grid();
    let w = KernelWeights::new(beta - 1.0, upper - lo);
    let scale = grid.h().powf(beta) / gamma(beta);
    let out = (lo..=r)
        .map(|k| scale * right_sum(g.values(), lo, k, r, upper, &w))
        .collect();
    SampledPath::new(grid, lo, out)
}
