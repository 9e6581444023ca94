//! Residuals of the necessary optimality conditions.
//!
//! For a trajectory `y` three quantities vanish at an extremal:
//!
//! * the terminal value `∂L/∂v_tau` at `b`,
//! * an inner residual on `[a, b - tau]`, which collects the direct
//!   partials, their right-sided fractional derivatives and integrals, the
//!   tail corrections caused by splitting the interval, the `z` coupling and
//!   the delayed partials read at `x + tau`,
//! * an outer residual on `[b - tau, b]` without delay terms.
//!
//! `Z(x) = ∫_x^b ∂L/∂z dt` multiplies the partials of the inner Lagrangian
//! before any right-sided operator is applied.

use crate::error::{Error, Result};
use crate::expr::{Expr, Var};
use crate::fracops::{
    right_frac_integral, rl_right_derivative, tail_derivative_correction,
    tail_integral_correction,
};
use crate::functional::{evaluate_fields, EvaluatedFields};
use crate::grid::{Grid, SampledPath};
use crate::problem::{Mode, ProblemSpec, Trajectory};
use crate::quadrature::{fd_derivative, reverse_cumulative_trapezoid, trapezoid};

/// Number of nodes excluded from the norms at each end of each interval.
pub const MASK: usize = 2;

/// Width, as a fraction of `b - a`, of the boundary layers next to `a` and
/// `b` that the norms also skip.
///
/// Fields of a trajectory like `x^(alpha+1)` have unbounded second
/// derivatives at `a`, and right-sided derivatives blow up at `b`. The
/// residual then converges at every fixed interior point but not uniformly,
/// and a fixed count of masked nodes cannot hide an error that scales like
/// `h^(alpha-1)` at the first nodes.
pub const BOUNDARY_LAYER: f64 = 1.0 / 16.0;

/// Symbolic partial derivatives of both Lagrangians.
#[derive(Debug, Clone, PartialEq)]
pub struct Partials {
    pub outer_y: Expr,
    pub outer_v: Expr,
    pub outer_w: Expr,
    pub outer_z: Expr,
    pub outer_y_tau: Expr,
    pub outer_v_tau: Expr,
    pub inner_y: Expr,
    pub inner_v: Expr,
    pub inner_w: Expr,
}

impl Partials {
    pub fn new(spec: &ProblemSpec) -> Result<Self> {
        let big = &spec.lagrangian;
        let small = &spec.inner;
        Ok(Partials {
            outer_y: big.differentiate(Var::Y)?,
            outer_v: big.differentiate(Var::V)?,
            outer_w: big.differentiate(Var::W)?,
            outer_z: big.differentiate(Var::Z)?,
            outer_y_tau: big.differentiate(Var::YTau)?,
            outer_v_tau: big.differentiate(Var::VTau)?,
            inner_y: small.differentiate(Var::Y)?,
            inner_v: small.differentiate(Var::V)?,
            inner_w: small.differentiate(Var::W)?,
        })
    }
}

/// The three residuals with their masked max-norms.
#[derive(Debug, Clone, PartialEq)]
pub struct ELReport {
    pub terminal_residual: f64,
    /// On `[a, b - tau]`.
    pub inner_residual: SampledPath,
    /// On `[b - tau, b]`.
    pub outer_residual: SampledPath,
    /// Max-abs of the inner residual outside the masked nodes.
    pub inner_norm: f64,
    pub outer_norm: f64,
    /// Max-abs with only [`MASK`] nodes dropped at each end.
    pub inner_norm_nodal: f64,
    pub outer_norm_nodal: f64,
    pub grid_h: f64,
    /// Node indices left out of the norms.
    pub masked: Vec<usize>,
    /// `inner - outer` at `b - tau`, recorded but never asserted on.
    pub split_mismatch: f64,
    pub mode: Mode,
}

impl ELReport {
    fn assemble(
        spec: &ProblemSpec,
        terminal_residual: f64,
        inner_residual: SampledPath,
        outer_residual: SampledPath,
    ) -> Self {
        let g = spec.grid();
        let layer = (BOUNDARY_LAYER * g.n() as f64).ceil() as usize;
        let (split, ib) = (g.idx_split(), g.idx_b());
        let inner_lo = (g.idx_a() + layer.max(MASK)).min(split);
        let outer_hi = ib.saturating_sub(layer.max(MASK)).max(split);
        let inner_keep = inner_lo..=split.saturating_sub(MASK);
        let outer_keep = (split + MASK)..=outer_hi;
        let masked: Vec<usize> = (g.idx_a()..=ib)
            .filter(|i| !inner_keep.contains(i) && !outer_keep.contains(i))
            .collect();
        let norm = |r: &SampledPath, keep: std::ops::RangeInclusive<usize>| {
            keep.map(|i| r.at(i).abs()).fold(0.0, f64::max)
        };
        ELReport {
            terminal_residual,
            split_mismatch: inner_residual.at(split) - outer_residual.at(split),
            inner_norm: norm(&inner_residual, inner_keep),
            outer_norm: norm(&outer_residual, outer_keep),
            inner_norm_nodal: nodal_norm(&inner_residual),
            outer_norm_nodal: nodal_norm(&outer_residual),
            inner_residual,
            outer_residual,
            grid_h: g.h(),
            masked,
            mode: spec.mode,
        }
    }

    /// The first-order change of `J` in direction `d`, assembled from the
    /// residuals: `∫_a^{b-τ} R_in d + ∫_{b-τ}^b R_out d + R_term d(b-τ)`.
    ///
    /// `d` lives on `[a - tau, b]` and must vanish on the history and at `b`.
    pub fn pairing(&self, d: &SampledPath) -> Result<f64> {
        let g = self.inner_residual.grid();
        if d.grid() != g || d.lo() > g.idx_a() || d.hi() < g.idx_b() {
            return Err(Error::domain("direction must cover [a, b] on the report grid"));
        }
        let prod = |r: &SampledPath| -> Vec<f64> { r.range().map(|i| r.at(i) * d.at(i)).collect() };
        Ok(trapezoid(&prod(&self.inner_residual), g.h())
            + trapezoid(&prod(&self.outer_residual), g.h())
            + self.terminal_residual * d.at(g.idx_split()))
    }

    /// Residuals as CSV: `x,interval,residual,masked`.
    pub fn to_csv(&self) -> String {
        use crate::grid::fmt_num;
        use std::fmt::Write as _;
        let g = self.inner_residual.grid();
        let mut out = String::from("x,interval,residual,masked\n");
        for (name, r) in [("inner", &self.inner_residual), ("outer", &self.outer_residual)] {
            for i in r.range() {
                let _ = writeln!(
                    out,
                    "{},{name},{},{}",
                    fmt_num(g.x(i)),
                    fmt_num(r.at(i)),
                    u8::from(self.masked.contains(&i))
                );
            }
        }
        out
    }
}

fn nodal_norm(r: &SampledPath) -> f64 {
    let (lo, hi) = (r.lo(), r.hi());
    (lo + MASK..=hi.saturating_sub(MASK))
        .map(|i| r.at(i).abs())
        .fold(0.0, f64::max)
}

/// A named contribution to a residual.
#[derive(Debug, Clone, PartialEq)]
pub struct Term {
    pub name: &'static str,
    pub values: SampledPath,
}

/// Partials sampled along one trajectory on `[a, b]`.
struct Sampled<'a> {
    spec: &'a ProblemSpec,
    fields: EvaluatedFields,
    partials: Partials,
    z_weight: Option<SampledPath>,
}

impl<'a> Sampled<'a> {
    fn new(traj: &Trajectory, spec: &'a ProblemSpec) -> Result<Self> {
        let fields = evaluate_fields(traj, spec)?;
        let partials = Partials::new(spec)?;
        let z_weight = if partials.outer_z.is_zero() {
            None
        } else {
            let lz = fields.sample_outer(spec, &partials.outer_z)?;
            let z = reverse_cumulative_trapezoid(lz.values(), spec.grid().h());
            Some(SampledPath::new(*spec.grid(), lz.lo(), z)?)
        };
        Ok(Sampled {
            spec,
            fields,
            partials,
            z_weight,
        })
    }

    fn grid(&self) -> &Grid {
        self.spec.grid()
    }

    /// An outer partial on `[a, b]`, or `None` when it is symbolically zero.
    fn outer(&self, e: &Expr) -> Result<Option<SampledPath>> {
        if e.is_zero() {
            return Ok(None);
        }
        self.fields.sample_outer(self.spec, e).map(Some)
    }

    /// `Z` times an inner partial, or `None` when either factor is zero.
    fn weighted(&self, e: &Expr) -> Result<Option<SampledPath>> {
        let Some(z) = &self.z_weight else {
            return Ok(None);
        };
        if e.is_zero() {
            return Ok(None);
        }
        let p = self.fields.sample_inner(self.spec, e)?;
        z.zip_with(&p, |a, b| a * b).map(Some)
    }

    /// Terms shared by both intervals, with right-sided operators taken to
    /// node `upper` and, when `tail` is set, corrected for the stretch
    /// from `upper` to `b`.
    fn fractional_terms(&self, upper: usize, tail: bool) -> Result<Vec<Term>> {
        let (alpha, beta) = (self.spec.alpha, self.spec.beta);
        let g = *self.grid();
        let (ia, ib) = (g.idx_a(), g.idx_b());
        let p = &self.partials;
        let mut terms = Vec::new();
        let mut push = |name, values: SampledPath| -> Result<()> {
            terms.push(Term {
                name,
                values: values.restrict(values.lo(), upper)?,
            });
            Ok(())
        };
        let sources = [
            ("L_y", self.outer(&p.outer_y)?, "L_v", self.outer(&p.outer_v)?, "L_w", self.outer(&p.outer_w)?),
            (
                "Z*l_y",
                self.weighted(&p.inner_y)?,
                "Z*l_v",
                self.weighted(&p.inner_v)?,
                "Z*l_w",
                self.weighted(&p.inner_w)?,
            ),
        ];
        for (ny, gy, nv, gv, nw, gw) in sources {
            if let Some(gy) = gy {
                push(ny, gy)?;
            }
            if let Some(gv) = gv {
                debug_assert_eq!((gv.lo(), gv.hi()), (ia, ib));
                push(nv, rl_right_derivative(&gv, alpha, upper)?)?;
                if tail {
                    let c = tail_derivative_correction(&gv, alpha, upper, ib)?;
                    push(nv, c.map(|v| -v)?)?;
                }
            }
            if let Some(gw) = gw {
                push(nw, right_frac_integral(&gw, beta, upper)?)?;
                if tail {
                    push(nw, tail_integral_correction(&gw, beta, upper, ib)?)?;
                }
            }
        }
        Ok(terms)
    }

    fn classical_terms(&self, upper: usize) -> Result<Vec<Term>> {
        let h = self.grid().h();
        let p = &self.partials;
        let mut terms = Vec::new();
        let pairs = [
            ("L_y", self.outer(&p.outer_y)?, "L_v", self.outer(&p.outer_v)?),
            ("Z*l_y", self.weighted(&p.inner_y)?, "Z*l_v", self.weighted(&p.inner_v)?),
        ];
        for (ny, gy, nv, gv) in pairs {
            if let Some(gy) = gy {
                terms.push(Term {
                    name: ny,
                    values: gy.restrict(gy.lo(), upper)?,
                });
            }
            if let Some(gv) = gv {
                let d: Vec<f64> = fd_derivative(gv.values(), h).into_iter().map(|v| -v).collect();
                let d = SampledPath::new(*self.grid(), gv.lo(), d)?;
                terms.push(Term {
                    name: nv,
                    values: d.restrict(d.lo(), upper)?,
                });
            }
        }
        Ok(terms)
    }

    /// `∂L/∂y_tau(x + tau) - d/dx ∂L/∂v_tau(x + tau)` on `[a, b - tau]`.
    fn delay_term(&self) -> Result<Option<Term>> {
        let p = &self.partials;
        let g = *self.grid();
        let (ia, split, ib) = (g.idx_a(), g.idx_split(), g.idx_b());
        let m = g.shift();
        let mut acc = vec![0.0; split - ia + 1];
        let mut any = false;
        if let Some(ly) = self.outer(&p.outer_y_tau)? {
            any = true;
            for (k, a) in acc.iter_mut().enumerate() {
                *a += ly.at(ia + m + k);
            }
        }
        if let Some(lv) = self.outer(&p.outer_v_tau)? {
            any = true;
            let shifted = &lv.values()[m..=ib - ia];
            for (a, d) in acc.iter_mut().zip(fd_derivative(shifted, g.h())) {
                *a -= d;
            }
        }
        if !any {
            return Ok(None);
        }
        Ok(Some(Term {
            name: "delay",
            values: SampledPath::new(g, ia, acc)?,
        }))
    }

    fn terminal(&self) -> Result<f64> {
        let g = self.grid();
        Ok(match self.outer(&self.partials.outer_v_tau)? {
            Some(lv) => lv.at(g.idx_b()),
            None => 0.0,
        })
    }

    fn inner_terms(&self) -> Result<Vec<Term>> {
        let split = self.grid().idx_split();
        let mut terms = match self.spec.mode {
            Mode::Fractional => self.fractional_terms(split, true)?,
            Mode::Classical => self.classical_terms(split)?,
        };
        terms.extend(self.delay_term()?);
        Ok(terms)
    }

    fn outer_terms(&self) -> Result<Vec<Term>> {
        let g = self.grid();
        let terms = match self.spec.mode {
            Mode::Fractional => self.fractional_terms(g.idx_b(), false)?,
            Mode::Classical => self.classical_terms(g.idx_b())?,
        };
        terms
            .into_iter()
            .map(|t| {
                Ok(Term {
                    name: t.name,
                    values: t.values.restrict(g.idx_split(), g.idx_b())?,
                })
            })
            .collect()
    }
}

fn sum_terms(grid: &Grid, lo: usize, hi: usize, terms: &[Term]) -> Result<SampledPath> {
    let mut acc = vec![0.0; hi - lo + 1];
    for t in terms {
        for (a, i) in acc.iter_mut().zip(lo..=hi) {
            *a += t.values.at(i);
        }
    }
    SampledPath::new(*grid, lo, acc)
}

/// `∂L/∂v_tau` at `b`.
pub fn residual_terminal(traj: &Trajectory, spec: &ProblemSpec) -> Result<f64> {
    Sampled::new(traj, spec)?.terminal()
}

/// Individual contributions to the inner residual, in a fixed order.
pub fn inner_terms(traj: &Trajectory, spec: &ProblemSpec) -> Result<Vec<Term>> {
    Sampled::new(traj, spec)?.inner_terms()
}

/// Individual contributions to the outer residual, in a fixed order.
pub fn outer_terms(traj: &Trajectory, spec: &ProblemSpec) -> Result<Vec<Term>> {
    Sampled::new(traj, spec)?.outer_terms()
}

/// Residual of the condition on `[a, b - tau]`.
pub fn residual_inner(traj: &Trajectory, spec: &ProblemSpec) -> Result<SampledPath> {
    let g = spec.grid();
    sum_terms(g, g.idx_a(), g.idx_split(), &inner_terms(traj, spec)?)
}

/// Residual of the condition on `[b - tau, b]`.
pub fn residual_outer(traj: &Trajectory, spec: &ProblemSpec) -> Result<SampledPath> {
    let g = spec.grid();
    sum_terms(g, g.idx_split(), g.idx_b(), &outer_terms(traj, spec)?)
}

/// All three residuals for the mode the problem is set to.
pub fn el_report(traj: &Trajectory, spec: &ProblemSpec) -> Result<ELReport> {
    let s = Sampled::new(traj, spec)?;
    let g = spec.grid();
    let inner = sum_terms(g, g.idx_a(), g.idx_split(), &s.inner_terms()?)?;
    let outer = sum_terms(g, g.idx_split(), g.idx_b(), &s.outer_terms()?)?;
    Ok(ELReport::assemble(spec, s.terminal()?, inner, outer))
}

/// Residuals of the ordinary (integer-order) conditions; `spec` must be in
/// classical mode.
pub fn classical_residual(traj: &Trajectory, spec: &ProblemSpec) -> Result<ELReport> {
    if spec.mode != Mode::Classical {
        return Err(Error::Mode(format!(
            "problem `{}` is in fractional mode; convert it with to_classical",
            spec.label
        )));
    }
    el_report(traj, spec)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::expr::{parse, VarSet};
    use crate::functional::evaluate_j;
    use crate::problem::{builtin_example_n, catalog, make_reference, make_trajectory, trajectory_from_fn};

    fn with(spec: &ProblemSpec, big: &str, small: &str) -> ProblemSpec {
        let mut s = spec.clone();
        s.lagrangian = parse(big, VarSet::OUTER).unwrap();
        s.inner = parse(small, VarSet::INNER).unwrap();
        s
    }

    // Smooth admissible trajectory: continuous at both pinned ends.
    pub(super) fn wiggly(spec: &ProblemSpec) -> Trajectory {
        let y0 = spec.phi(spec.a).unwrap();
        let (a, b, yb) = (spec.a, spec.b, spec.y_b);
        trajectory_from_fn(spec, |x| {
            let s = (x - a) / (b - a);
            y0 + (yb - y0) * s + 0.3 * (std::f64::consts::PI * s).sin() + 0.1 * (3.0 * std::f64::consts::PI * s).sin() * s
        })
        .unwrap()
    }

    #[test]
    fn terminal_shortcuts() {
        let ex = builtin_example_n(0.5, 32).unwrap();
        let t = wiggly(&ex);
        assert_eq!(residual_terminal(&t, &with(&ex, "(v - x)^2 + z", "y")).unwrap(), 0.0);
        assert_eq!(residual_terminal(&t, &with(&ex, "v_tau", "y")).unwrap(), 1.0);
    }

    #[test]
    fn linear_in_y_gives_unit_residuals() {
        let spec = with(&builtin_example_n(0.5, 32).unwrap(), "y", "v^2");
        let r = el_report(&wiggly(&spec), &spec).unwrap();
        assert!(r.inner_residual.values().iter().all(|&v| v == 1.0));
        assert!(r.outer_residual.values().iter().all(|&v| v == 1.0));
    }

    #[test]
    fn x_only_lagrangians_give_exact_zero() {
        for (big, small) in [("sin(x) + x^2", "exp(x)"), ("0", "0")] {
            let spec = with(&builtin_example_n(0.5, 32).unwrap(), big, small);
            let r = el_report(&wiggly(&spec), &spec).unwrap();
            assert_eq!(r.terminal_residual, 0.0);
            assert_eq!(r.inner_residual.max_abs(), 0.0);
            assert_eq!(r.outer_residual.max_abs(), 0.0);
        }
    }

    #[test]
    fn isolated_y_partial() {
        let spec = with(&builtin_example_n(0.5, 32).unwrap(), "y^2 * x", "v");
        let t = wiggly(&spec);
        let r = residual_outer(&t, &spec).unwrap();
        for i in r.range() {
            let y = t.path().at(i);
            assert!((r.at(i) - 2.0 * y * spec.grid().x(i)).abs() < 1e-14);
        }
    }

    #[test]
    fn example_residuals_shrink() {
        let norms: Vec<(f64, f64, f64)> = [64, 128, 256]
            .iter()
            .map(|&n| {
                let spec = builtin_example_n(0.5, n).unwrap();
                let r = el_report(&make_reference(&spec).unwrap(), &spec).unwrap();
                (r.inner_norm, r.outer_norm, r.terminal_residual.abs())
            })
            .collect();
        for w in norms.windows(2) {
            assert!(w[1].0 < w[0].0 && w[1].1 < w[0].1 && w[1].2 < w[0].2, "{norms:?}");
        }
        assert!(norms[1..].iter().all(|n| n.2 < 1e-8), "{norms:?}");
    }

    #[test]
    fn perturbation_raises_inner_norm() {
        let spec = builtin_example_n(0.5, 64).unwrap();
        let reference = make_reference(&spec).unwrap();
        let base = el_report(&reference, &spec).unwrap().inner_norm;
        let bumped: Vec<f64> = spec
            .grid()
            .interior()
            .zip(reference.interior())
            .map(|(i, y)| y + 0.1 * (std::f64::consts::PI * spec.grid().x(i)).sin())
            .collect();
        let t = make_trajectory(&spec, &bumped).unwrap();
        assert!(el_report(&t, &spec).unwrap().inner_norm > base);
    }

    #[test]
    fn linearity_in_lagrangian() {
        let base = builtin_example_n(0.5, 32).unwrap();
        let t = wiggly(&base);
        let l1 = "v^2 + y*y_tau + sin(w)";
        let l2 = "z*y + v_tau^2*x";
        let r = |big: &str| el_report(&t, &with(&base, big, "y*v")).unwrap();
        let (a, b, c) = (r(l1), r(l2), r(&format!("{l1} + {l2}")));
        for i in c.inner_residual.range() {
            let sum = a.inner_residual.at(i) + b.inner_residual.at(i);
            assert!((c.inner_residual.at(i) - sum).abs() < 1e-9 * (1.0 + sum.abs()));
        }
        assert!((c.terminal_residual - a.terminal_residual - b.terminal_residual).abs() < 1e-12);
    }

    #[test]
    fn classical_mode_guard_and_affine_solution() {
        let spec = catalog("smooth", 0.5, 64).unwrap();
        let t = trajectory_from_fn(&spec, |x| x).unwrap();
        assert!(matches!(classical_residual(&t, &spec), Err(Error::Mode(_))));
        let classical = with(&spec, "0.5*v^2", "0").to_classical().unwrap();
        let t = trajectory_from_fn(&classical, |x| x).unwrap();
        let r = classical_residual(&t, &classical).unwrap();
        assert!(r.inner_norm < 1e-12 && r.outer_norm < 1e-12);
        let t = trajectory_from_fn(&classical, |x| x * x).unwrap();
        let r = classical_residual(&t, &classical).unwrap();
        // -y'' = -2 away from the interval ends
        assert!((r.inner_residual.at(classical.grid().idx_a() + 20) + 2.0).abs() < 1e-9);
    }

    #[test]
    fn pairing_matches_directional_derivative() {
        let spec = catalog("coupled", 0.5, 64).unwrap();
        let t = wiggly(&spec);
        let g = *spec.grid();
        let bump = |x: f64| {
            let s = (x - 0.2) / 0.6;
            if (0.0..=1.0).contains(&s) {
                (std::f64::consts::PI * s).sin().powi(2)
            } else {
                0.0
            }
        };
        let d = SampledPath::from_fn(g, 0, g.idx_b(), |x| if x < spec.a { 0.0 } else { bump(x) })
            .unwrap();
        let eps = 1e-5;
        let shifted = |s: f64| {
            let vals: Vec<f64> = g.interior().map(|i| t.path().at(i) + s * d.at(i)).collect();
            evaluate_j(&make_trajectory(&spec, &vals).unwrap(), &spec).unwrap()
        };
        let fd = (shifted(eps) - shifted(-eps)) / (2.0 * eps);
        let pair = el_report(&t, &spec).unwrap().pairing(&d).unwrap();
        assert!((fd - pair).abs() <= 0.1 * fd.abs().max(1e-3), "fd {fd} pairing {pair}");
    }
}
