//! Numerical checks of the fractional integration-by-parts identities.
//!
//! Each check computes both sides of an identity with the operators of
//! [`crate::fracops`] and composite trapezoid outer integrals on the same
//! grid, so the residual is pure discretisation error. Where a right-sided
//! derivative has an endpoint singularity, the singular part is integrated
//! exactly against the piecewise-linear interpolant of `f`.

use std::fmt;

use crate::error::{Error, Result};
use crate::fracops::{
    caputo_left, check_alpha, gamma, left_frac_integral, right_frac_integral, rl_right_derivative,
    tail_derivative_correction, tail_integral_correction,
};
use crate::grid::{fmt_num, Grid, SampledPath};
use crate::quadrature::trapezoid;

/// Both sides of one identity and their discrepancy.
#[derive(Debug, Clone, PartialEq)]
pub struct IbpResidual {
    pub lhs: f64,
    pub rhs: f64,
    pub residual: f64,
    /// `residual / max(1, |lhs|, |rhs|)`.
    pub rel_residual: f64,
    pub grid_h: f64,
    /// The individual right-hand contributions, in the order they are summed.
    pub rhs_terms: Vec<f64>,
}

impl IbpResidual {
    fn new(lhs: f64, rhs_terms: Vec<f64>, grid_h: f64) -> Self {
        let rhs: f64 = rhs_terms.iter().sum();
        let residual = (lhs - rhs).abs();
        IbpResidual {
            lhs,
            rhs,
            residual,
            rel_residual: residual / 1f64.max(lhs.abs()).max(rhs.abs()),
            grid_h,
            rhs_terms,
        }
    }
}

fn common_range(f: &SampledPath, g: &SampledPath) -> Result<()> {
    if f.grid() != g.grid() || f.range() != g.range() {
        return Err(Error::domain(format!(
            "f and g must share a range, got {:?} and {:?}",
            f.range(),
            g.range()
        )));
    }
    if f.len() < 3 {
        return Err(Error::Resolution("identities need at least 3 nodes".into()));
    }
    Ok(())
}

fn integral_of_product(f: &SampledPath, g: &SampledPath, lo: usize, hi: usize) -> f64 {
    let prod: Vec<f64> = (lo..=hi).map(|i| f.at(i) * g.at(i)).collect();
    trapezoid(&prod, f.grid().h())
}

/// `∫_lo^hi f(x) (x_hi - x)^(-α) dx / Γ(1-α)`, exact for piecewise-linear `f`.
fn weakly_singular_moment(f: &SampledPath, alpha: f64, lo: usize, hi: usize) -> Result<f64> {
    Ok(left_frac_integral(&f.restrict(lo, hi)?, 1.0 - alpha, lo)?.at(hi))
}

/// `∫_lo^b f · D_b^α g` with `b` the last node of `g`.
///
/// `D_b^α g` behaves like `g(b) (b-x)^(-α) / Γ(1-α)` near `b`, which a
/// trapezoid rule integrates only to `O(h^(1-α))`. That part is split off
/// and integrated exactly; the remainder vanishes at `b`.
fn pair_rl_right(f: &SampledPath, g: &SampledPath, alpha: f64, lo: usize) -> Result<f64> {
    let hi = g.hi();
    let gb = g.at(hi);
    let rest = rl_right_derivative(&g.map(|v| v - gb)?, alpha, hi)?;
    Ok(integral_of_product(f, &rest, lo, hi) + gb * weakly_singular_moment(f, alpha, lo, hi)?)
}

/// `∫_a^r f · T(g)` with `T` the tail derivative over `[r, b]`.
///
/// `T(g)` behaves like `g(r) (r-x)^(-α) / Γ(1-α)` near `r`. The constant
/// part has the closed form `T(1)(x) = ((r-x)^(-α) - (b-x)^(-α)) / Γ(1-α)`.
fn pair_tail(f: &SampledPath, g: &SampledPath, alpha: f64, r: usize) -> Result<f64> {
    let (lo, hi) = (g.lo(), g.hi());
    let grid = f.grid();
    let gr = g.at(r);
    let rest = tail_derivative_correction(&g.map(|v| v - gr)?, alpha, r, hi)?;
    let b = grid.x(hi);
    let far: Vec<f64> = (lo..=r)
        .map(|i| f.at(i) * (b - grid.x(i)).powf(-alpha))
        .collect();
    let constant_part = weakly_singular_moment(f, alpha, lo, r)?
        - trapezoid(&far, grid.h()) / gamma(1.0 - alpha);
    Ok(integral_of_product(f, &rest, lo, r) + gr * constant_part)
}

/// `∫_a^b g · I_a^β f = ∫_a^b f · I_b^β g` over the common range `[a, b]`.
pub fn verify_ibp_integral(f: &SampledPath, g: &SampledPath, beta: f64) -> Result<IbpResidual> {
    common_range(f, g)?;
    let (lo, hi) = (f.lo(), f.hi());
    let left = left_frac_integral(f, beta, lo)?;
    let right = right_frac_integral(g, beta, hi)?;
    Ok(IbpResidual::new(
        integral_of_product(g, &left, lo, hi),
        vec![integral_of_product(f, &right, lo, hi)],
        f.grid().h(),
    ))
}

/// `∫_a^b g · ᶜD_a^α f = ∫_a^b f · D_b^α g + [f · I_b^(1-α) g]_a^b`.
///
/// The right integral vanishes at `b`, so the boundary term reduces to
/// `-f(a) · I_b^(1-α) g (a)`.
pub fn verify_ibp_caputo(f: &SampledPath, g: &SampledPath, alpha: f64) -> Result<IbpResidual> {
    common_range(f, g)?;
    check_alpha(alpha)?;
    let (lo, hi) = (f.lo(), f.hi());
    let caputo = caputo_left(f, alpha, lo)?;
    let boundary = right_frac_integral(g, 1.0 - alpha, hi)?;
    Ok(IbpResidual::new(
        integral_of_product(g, &caputo, lo, hi),
        vec![
            pair_rl_right(f, g, alpha, lo)?,
            f.at(hi) * boundary.at(hi) - f.at(lo) * boundary.at(lo),
        ],
        f.grid().h(),
    ))
}

/// The split identity, with the Caputo base point `a` below the lower limit
/// `r` of the outer integral:
///
/// `∫_r^b g · ᶜD_a^α f = ∫_r^b f · D_b^α g - ∫_a^r f · T(g) - f(a)/Γ(1-α) ∫_r^b (t-a)^(-α) g dt`
///
/// where `T(g)(x) = d/dx (1/Γ(1-α)) ∫_r^b (t-x)^(-α) g dt`. The three
/// right-hand terms are reported in that order, signs included.
pub fn verify_ibp_split(
    f: &SampledPath,
    g: &SampledPath,
    alpha: f64,
    r: usize,
) -> Result<IbpResidual> {
    common_range(f, g)?;
    check_alpha(alpha)?;
    let (lo, hi) = (f.lo(), f.hi());
    if r <= lo || r >= hi {
        return Err(Error::domain(format!(
            "split node {r} must lie strictly inside {lo}..={hi}"
        )));
    }
    let caputo = caputo_left(f, alpha, lo)?;
    let lhs = integral_of_product(g, &caputo, r, hi);
    let shifted = tail_integral_correction(g, 1.0 - alpha, r, hi)?;
    Ok(IbpResidual::new(
        lhs,
        vec![
            pair_rl_right(f, g, alpha, r)?,
            -pair_tail(f, g, alpha, r)?,
            -f.at(lo) * shifted.at(lo),
        ],
        f.grid().h(),
    ))
}

/// A closed-form test function for the catalog.
#[derive(Debug, Clone, Copy)]
pub struct TestFunction {
    pub name: &'static str,
    pub eval: fn(f64) -> f64,
}

/// Smooth functions on `[0, 2]` used to exercise the identities.
pub const TEST_FUNCTIONS: [TestFunction; 7] = [
    TestFunction { name: "1", eval: |_| 1.0 },
    TestFunction { name: "x", eval: |x| x },
    TestFunction { name: "2-x", eval: |x| 2.0 - x },
    TestFunction { name: "x^2-x", eval: |x| x * x - x },
    TestFunction { name: "x^3", eval: |x| x * x * x },
    TestFunction { name: "exp(x)", eval: f64::exp },
    TestFunction { name: "sin(3x)", eval: |x| (3.0 * x).sin() },
];

/// `(f, g)` pairs, as indices into [`TEST_FUNCTIONS`].
pub const TEST_PAIRS: [(usize, usize); 8] = [
    (1, 2),
    (3, 0),
    (4, 5),
    (6, 1),
    (5, 6),
    (0, 3),
    (2, 4),
    (6, 5),
];

/// The three identities.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum Identity {
    Integral,
    Caputo,
    Split,
}

impl Identity {
    pub const ALL: [Identity; 3] = [Identity::Integral, Identity::Caputo, Identity::Split];

    pub fn name(self) -> &'static str {
        match self {
            Identity::Integral => "integral",
            Identity::Caputo => "caputo",
            Identity::Split => "split",
        }
    }
}

impl fmt::Display for Identity {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Grid on `[0, 2]` with `n` steps used by the catalog.
pub fn catalog_grid(n: usize) -> Result<Grid> {
    Grid::new(0.0, 2.0, 2.0 / n as f64, n)
}

/// One catalog check.
#[derive(Debug, Clone, PartialEq)]
pub struct IbpRow {
    pub identity: Identity,
    pub f: &'static str,
    pub g: &'static str,
    pub n: usize,
    pub result: IbpResidual,
}

/// Runs every identity on every catalog pair at resolution `n`; the split
/// identity uses the midpoint of `[0, 2]`.
pub fn run_catalog(n: usize, alpha: f64, beta: f64) -> Result<Vec<IbpRow>> {
    let grid = catalog_grid(n)?;
    let (lo, hi) = (grid.idx_a(), grid.idx_b());
    let mid = (lo + hi) / 2;
    let mut rows = Vec::new();
    for identity in Identity::ALL {
        for (fi, gi) in TEST_PAIRS {
            let (tf, tg) = (TEST_FUNCTIONS[fi], TEST_FUNCTIONS[gi]);
            let f = SampledPath::from_fn(grid, lo, hi, tf.eval)?;
            let g = SampledPath::from_fn(grid, lo, hi, tg.eval)?;
            let result = match identity {
                Identity::Integral => verify_ibp_integral(&f, &g, beta)?,
                Identity::Caputo => verify_ibp_caputo(&f, &g, alpha)?,
                Identity::Split => verify_ibp_split(&f, &g, alpha, mid)?,
            };
            rows.push(IbpRow {
                identity,
                f: tf.name,
                g: tg.name,
                n,
                result,
            });
        }
    }
    Ok(rows)
}

/// Rows as CSV: `identity,f,g,n,lhs,rhs,rel_residual`.
pub fn rows_to_csv(rows: &[IbpRow]) -> String {
    let mut out = String::from("identity,f,g,n,lhs,rhs,rel_residual\n");
    for r in rows {
        out.push_str(&format!(
            "{},{},{},{},{},{},{}\n",
            r.identity,
            r.f,
            r.g,
            r.n,
            fmt_num(r.result.lhs),
            fmt_num(r.result.rhs),
            fmt_num(r.result.rel_residual)
        ));
    }
    out
}
