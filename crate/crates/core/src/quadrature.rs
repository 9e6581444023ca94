//! Low-level quadrature and differencing on uniform index grids.
//!
//! Distances are measured in steps, so every weight here is independent of
//! `h`; callers scale by the appropriate power of `h`.

/// `(p + 1)^s - p^s` without catastrophic cancellation for large `p`.
pub(crate) fn pow_step_diff(p: usize, s: f64) -> f64 {
    if p == 0 {
        1.0
    } else {
        let p = p as f64;
        p.powf(s) * (s * (1.0 / p).ln_1p()).exp_m1()
    }
}

/// Moments of the kernel `u^gamma` against the two hat functions of a
/// single step `[p, p + 1]`, where `u` is the distance (in steps) from the
/// evaluation point.
///
/// `near[p]` weights the node at distance `p`, `far[p]` the node at `p + 1`.
#[derive(Debug, Clone)]
pub(crate) struct KernelWeights {
    pub near: Vec<f64>,
    pub far: Vec<f64>,
}

impl KernelWeights {
    /// Weights for `p = 0..len`; requires `gamma > -1`.
    pub fn new(gamma: f64, len: usize) -> Self {
        let s = gamma + 1.0;
        let mut near = Vec::with_capacity(len);
        let mut far = Vec::with_capacity(len);
        for p in 0..len {
            // A = int u^gamma, B = int u^(gamma+1) over [p, p+1]
            let a = pow_step_diff(p, s) / s;
            let b = pow_step_diff(p, s + 1.0) / (s + 1.0);
            let f = b - p as f64 * a;
            far.push(f);
            near.push(a - f);
        }
        KernelWeights { near, far }
    }
}

/// Composite trapezoid of equally spaced samples.
pub(crate) fn trapezoid(values: &[f64], h: f64) -> f64 {
    match values.len() {
        0 | 1 => 0.0,
        n => h * (0.5 * (values[0] + values[n - 1]) + values[1..n - 1].iter().sum::<f64>()),
    }
}

/// Running trapezoid `int_{x_0}^{x_k}`, starting at 0.
pub(crate) fn cumulative_trapezoid(values: &[f64], h: f64) -> Vec<f64> {
    let mut out = Vec::with_capacity(values.len());
    let mut acc = 0.0;
    out.push(0.0);
    for w in values.windows(2) {
        acc += 0.5 * h * (w[0] + w[1]);
        out.push(acc);
    }
    out
}

/// Reverse running trapezoid `int_{x_k}^{x_last}`, ending at 0.
pub(crate) fn reverse_cumulative_trapezoid(values: &[f64], h: f64) -> Vec<f64> {
    let n = values.len();
    let mut out = vec![0.0; n];
    let mut acc = 0.0;
    for k in (0..n.saturating_sub(1)).rev() {
        acc += 0.5 * h * (values[k] + values[k + 1]);
        out[k] = acc;
    }
    out
}

/// First derivative by centered differences, second-order one-sided at the
/// ends. With only two samples falls back to the plain difference quotient.
pub(crate) fn fd_derivative(values: &[f64], h: f64) -> Vec<f64> {
    let n = values.len();
    match n {
        0 => Vec::new(),
        1 => vec![0.0],
        2 => {
            let d = (values[1] - values[0]) / h;
            vec![d, d]
        }
        _ => {
            let mut out = Vec::with_capacity(n);
            out.push((-3.0 * values[0] + 4.0 * values[1] - values[2]) / (2.0 * h));
            for k in 1..n - 1 {
                out.push((values[k + 1] - values[k - 1]) / (2.0 * h));
            }
            out.push((3.0 * values[n - 1] - 4.0 * values[n - 2] + values[n - 3]) / (2.0 * h));
            out
        }
    }
}

/// First derivative with five-point stencils: centered fourth order inside,
/// one-sided fourth order on the two outermost nodes at each end. Falls back
/// to [`fd_derivative`] below five samples.
pub(crate) fn fd_derivative4(values: &[f64], h: f64) -> Vec<f64> {
    let n = values.len();
    if n < 5 {
        return fd_derivative(values, h);
    }
    let f = values;
    let c = 12.0 * h;
    let mut out = Vec::with_capacity(n);
    out.push((-25.0 * f[0] + 48.0 * f[1] - 36.0 * f[2] + 16.0 * f[3] - 3.0 * f[4]) / c);
    out.push((-3.0 * f[0] - 10.0 * f[1] + 18.0 * f[2] - 6.0 * f[3] + f[4]) / c);
    for k in 2..n - 2 {
        out.push((f[k - 2] - 8.0 * f[k - 1] + 8.0 * f[k + 1] - f[k + 2]) / c);
    }
    let e = n - 1;
    out.push((3.0 * f[e] + 10.0 * f[e - 1] - 18.0 * f[e - 2] + 6.0 * f[e - 3] - f[e - 4]) / c);
    out.push((25.0 * f[e] - 48.0 * f[e - 1] + 36.0 * f[e - 2] - 16.0 * f[e - 3] + 3.0 * f[e - 4]) / c);
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    // Brute-force midpoint quadrature of a single step moment.
    fn brute_moment(gamma: f64, p: usize, far: bool) -> f64 {
        let m = 200_000;
        let p = p as f64;
        (0..m)
            .map(|i| {
                let u = p + (i as f64 + 0.5) / m as f64;
                let hat = if far { u - p } else { p + 1.0 - u };
                u.powf(gamma) * hat / m as f64
            })
            .sum()
    }

    #[test]
    fn weights_match_brute_force() {
        for &gamma in &[-0.5, -0.25, 0.0, 0.5, 1.3] {
            let w = KernelWeights::new(gamma, 40);
            for p in [1usize, 2, 7, 39] {
                assert!((w.near[p] - brute_moment(gamma, p, false)).abs() < 1e-9);
                assert!((w.far[p] - brute_moment(gamma, p, true)).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn weights_at_singular_step() {
        // int_0^1 u^g (1-u) du = 1/((g+1)(g+2)), int_0^1 u^(g+1) du = 1/(g+2)
        let g = -0.5;
        let w = KernelWeights::new(g, 1);
        assert!((w.near[0] - 1.0 / ((g + 1.0) * (g + 2.0))).abs() < 1e-15);
        assert!((w.far[0] - 1.0 / (g + 2.0)).abs() < 1e-15);
    }

    #[test]
    fn weights_sum_to_step_integral() {
        let g = -0.3;
        let w = KernelWeights::new(g, 2000);
        for p in [0usize, 1, 10, 1999] {
            let exact = ((p as f64 + 1.0).powf(g + 1.0) - (p as f64).powf(g + 1.0)) / (g + 1.0);
            assert!(((w.near[p] + w.far[p]) - exact).abs() <= 1e-13 * exact);
        }
    }

    #[test]
    fn power_difference_is_accurate_far_out() {
        let d = pow_step_diff(1_000_000, 0.5);
        let exact = 1.0 / (1_000_001f64.sqrt() + 1000.0);
        assert!((d - exact).abs() < 1e-15 * exact.abs() * 10.0);
    }

    #[test]
    fn cumulative_sums() {
        let v = [1.0, 1.0, 1.0, 1.0];
        assert_eq!(cumulative_trapezoid(&v, 0.5), vec![0.0, 0.5, 1.0, 1.5]);
        assert_eq!(reverse_cumulative_trapezoid(&v, 0.5), vec![1.5, 1.0, 0.5, 0.0]);
        assert_eq!(trapezoid(&v, 0.5), 1.5);
    }

    #[test]
    fn fd_exact_on_quadratics() {
        let h = 0.1;
        let v: Vec<f64> = (0..6).map(|i| (i as f64 * h).powi(2)).collect();
        let d = fd_derivative(&v, h);
        for (i, di) in d.iter().enumerate() {
            assert!((di - 2.0 * i as f64 * h).abs() < 1e-12);
        }
    }

    #[test]
    fn five_point_stencils_are_exact_on_quartics() {
        let h = 0.1;
        let f: Vec<f64> = (0..9).map(|i| {
            let x = 0.3 + i as f64 * h;
            x.powi(4) - 2.0 * x.powi(3) + x
        }).collect();
        let d = fd_derivative4(&f, h);
        for (i, di) in d.iter().enumerate() {
            let x = 0.3 + i as f64 * h;
            let exact = 4.0 * x.powi(3) - 6.0 * x * x + 1.0;
            assert!((di - exact).abs() < 1e-12, "node {i}: {di} vs {exact}");
        }
        assert_eq!(fd_derivative4(&[0.0, 1.0, 2.0], 1.0), vec![1.0; 3]);
    }
}
