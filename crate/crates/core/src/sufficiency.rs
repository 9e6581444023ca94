//! Sampling-based check of the convexity hypotheses under which a solution
//! of the optimality conditions is a minimizer.
//!
//! A function `f` is convex in a block of variables when
//! `f(p + c) - f(p) >= <grad f(p), c>` for all admissible `p` and `c`
//! (concave with `<=`). [`check_convexity`] draws pairs `(p, p + c)` from a
//! box and tests that inequality with symbolic partials. Verdicts are
//! "likely": passing every sample is evidence, not proof. A failed sample is
//! a genuine counterexample and is returned as a re-checkable witness.
//!
//! [`certify`] combines three checks. `L` must be convex jointly in
//! `(y, v, w, z, y_tau, v_tau)`. Either `l` is convex in `(y, v, w)` with
//! `dL/dz >= 0` along the trajectory, or `l` is concave with `dL/dz <= 0`.
//! The conclusion `SufficientMinimizer` means exactly "these hypotheses
//! passed sampling".

use std::collections::BTreeMap;

use nalgebra::{DMatrix, SymmetricEigen};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::expr::{BinOp, Env, Expr, Param, Var, VarSet};
use crate::functional::evaluate_fields;
use crate::problem::{ProblemSpec, Trajectory};

/// Absolute slack tolerance, scaled by `max(1, |f(p)|, |f(p + c)|, |<grad, c>|)`.
pub const SLACK_TOL: f64 = 1e-10;

/// Trials used by [`certify`] unless told otherwise.
pub const DEFAULT_TRIALS: usize = 10_000;

/// Half-width multiplier applied to the observed ranges by [`certify`].
pub const DEFAULT_INFLATION: f64 = 1.5;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum ConvexityStatus {
    LikelyConvex,
    LikelyConcave,
    Indefinite,
    /// The convexity inequality fails at the witness.
    Counterexample,
}

/// A pair of points at which the convexity inequality fails.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Witness {
    pub point: BTreeMap<String, f64>,
    pub shifted: BTreeMap<String, f64>,
    /// `f(shifted) - f(point) - <grad f(point), shifted - point>`.
    pub slack: f64,
}

impl Witness {
    fn env(values: &BTreeMap<String, f64>) -> Result<Env> {
        let mut env = Env::new();
        for (name, v) in values {
            env.set(name, *v)?;
        }
        Ok(env)
    }

    /// Recomputes the slack of `e` at this pair from scratch.
    pub fn recheck(&self, e: &Expr) -> Result<f64> {
        let p = Witness::env(&self.point)?;
        let q = Witness::env(&self.shifted)?;
        let mut lin = 0.0;
        for (name, qv) in &self.shifted {
            let var = Var::from_name(name).ok_or_else(|| Error::UnknownField(name.clone()))?;
            let c = qv - self.point[name];
            if c != 0.0 {
                lin += e.differentiate(var)?.eval(&p)? * c;
            }
        }
        Ok(e.eval(&q)? - e.eval(&p)? - lin)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConvexityVerdict {
    pub status: ConvexityStatus,
    /// Present whenever some sample violated the convexity inequality.
    pub witness: Option<Witness>,
    pub samples_tested: usize,
    pub samples_skipped: usize,
    /// Smallest slack for convex, indefinite and counterexample verdicts;
    /// largest slack for concave ones.
    pub margin: f64,
    /// Both inequalities held on every sample.
    pub linear: bool,
    /// The status came from an exact constant-Hessian check.
    pub exact: bool,
}

impl ConvexityVerdict {
    fn is_concave(&self) -> bool {
        self.status == ConvexityStatus::LikelyConcave
            || (self.status == ConvexityStatus::LikelyConvex && self.linear)
    }

    /// Collapses every non-convex status to `Counterexample`; used where
    /// only convexity matters.
    fn convexity_only(mut self) -> Self {
        if self.status != ConvexityStatus::LikelyConvex {
            self.status = ConvexityStatus::Counterexample;
        }
        self
    }
}

/// Sampling ranges per variable.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct SampleBox {
    ranges: [Option<(f64, f64)>; 7],
}

impl SampleBox {
    pub fn new() -> Self {
        SampleBox::default()
    }

    pub fn with(mut self, var: Var, lo: f64, hi: f64) -> Self {
        self.ranges[var as usize] = Some((lo, hi));
        self
    }

    pub fn get(&self, var: Var) -> Option<(f64, f64)> {
        self.ranges[var as usize]
    }
}

fn unbound_param(e: &Expr) -> Option<Param> {
    let mut found = None;
    e.walk(&mut |node| {
        if let Expr::Param(p) = node {
            if *p != Param::Pi {
                found.get_or_insert(*p);
            }
        }
    });
    found
}

/// True when `e` is built from `+ - * /`, constant exponents and functions
/// of the remaining variables only, so second partials in `vars` are exact.
fn polynomial_shape(e: &Expr, vars: VarSet) -> bool {
    let touches = |u: &Expr| vars.iter().any(|v| u.depends_on(v));
    let mut ok = true;
    e.walk(&mut |node| match node {
        Expr::Call(_, arg) if touches(arg) => ok = false,
        Expr::Bin(BinOp::Pow, _, exp) if touches(exp) => ok = false,
        Expr::Bin(BinOp::Div, _, den) if touches(den) => ok = false,
        _ => {}
    });
    ok
}

/// Constant Hessian of `e` in `vars`, when it exists.
fn constant_hessian(e: &Expr, vars: &[Var]) -> Result<Option<DMatrix<f64>>> {
    if !polynomial_shape(e, VarSet::of(vars)) {
        return Ok(None);
    }
    let k = vars.len();
    let mut h = DMatrix::zeros(k, k);
    for i in 0..k {
        let di = e.differentiate(vars[i])?;
        for j in i..k {
            let dij = di.differentiate(vars[j])?;
            if !dij.is_constant() {
                return Ok(None);
            }
            let value = dij.eval(&Env::new())?;
            h[(i, j)] = value;
            h[(j, i)] = value;
        }
    }
    Ok(Some(h))
}

struct Sample {
    slack: f64,
    scale: f64,
    p: Env,
    q: Env,
}

fn draw(
    e: &Expr,
    grads: &[(Var, Expr)],
    sampled: &[(Var, f64, f64)],
    vars: VarSet,
    seed: u64,
    trial: usize,
) -> Option<Sample> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(trial as u64);
    let mut p = Env::new();
    let mut q = Env::new();
    for &(var, lo, hi) in sampled {
        let pv = rng.random_range(lo..=hi);
        let qv = if vars.contains(var) { rng.random_range(lo..=hi) } else { pv };
        p.set_var(var, pv);
        q.set_var(var, qv);
    }
    let f0 = e.eval(&p).ok()?;
    let f1 = e.eval(&q).ok()?;
    let mut lin = 0.0;
    for (var, g) in grads {
        lin += g.eval(&p).ok()? * (q.var(*var)? - p.var(*var)?);
    }
    let slack = f1 - f0 - lin;
    if !slack.is_finite() {
        return None;
    }
    let scale = 1f64.max(f0.abs()).max(f1.abs()).max(lin.abs());
    Some(Sample { slack, scale, p, q })
}

fn env_map(env: &Env, sampled: &[(Var, f64, f64)]) -> BTreeMap<String, f64> {
    sampled
        .iter()
        .filter_map(|&(v, _, _)| env.var(v).map(|x| (v.name().to_string(), x)))
        .collect()
}

/// Tests `e` for convexity and concavity in `vars` on `trials` random pairs.
///
/// Every free variable of `e` needs a range in `bx`. Variables outside
/// `vars` (typically `x`) are drawn once per pair and shared by both points.
/// Parameters must already be bound, see [`Expr::bind_params`]. Pairs where
/// evaluation fails are skipped; more than half skipped is an error.
pub fn check_convexity(
    e: &Expr,
    vars: VarSet,
    bx: &SampleBox,
    trials: usize,
    seed: u64,
) -> Result<ConvexityVerdict> {
    if trials == 0 {
        return Err(Error::domain("at least one trial is required"));
    }
    if let Some(p) = unbound_param(e) {
        return Err(Error::domain(format!(
            "parameter `{}` is unbound; bind parameters before checking convexity",
            p.name()
        )));
    }
    let mut sampled = Vec::new();
    for var in Var::ALL {
        if !(vars.contains(var) || e.depends_on(var)) {
            continue;
        }
        let (lo, hi) = bx
            .get(var)
            .ok_or_else(|| Error::domain(format!("no sampling range for `{var}`")))?;
        if !(lo.is_finite() && hi.is_finite() && lo < hi) {
            return Err(Error::domain(format!("degenerate range [{lo}, {hi}] for `{var}`")));
        }
        sampled.push((var, lo, hi));
    }
    let var_list: Vec<Var> = vars.iter().collect();
    let grads = var_list
        .iter()
        .filter(|v| e.depends_on(**v))
        .map(|&v| Ok((v, e.differentiate(v)?)))
        .collect::<Result<Vec<_>>>()?;

    let samples: Vec<Option<Sample>> = (0..trials)
        .into_par_iter()
        .map(|t| draw(e, &grads, &sampled, vars, seed, t))
        .collect();
    let skipped = samples.iter().filter(|s| s.is_none()).count();
    if 2 * skipped > trials {
        return Err(Error::Sampling { skipped, trials });
    }
    let valid: Vec<&Sample> = samples.iter().flatten().collect();
    let lowest = valid
        .iter()
        .copied()
        .reduce(|a, b| if b.slack < a.slack { b } else { a })
        .expect("at least one valid sample");
    let highest = valid
        .iter()
        .copied()
        .reduce(|a, b| if b.slack > a.slack { b } else { a })
        .expect("at least one valid sample");
    let convex_broken = valid.iter().any(|s| s.slack < -SLACK_TOL * s.scale);
    let concave_broken = valid.iter().any(|s| s.slack > SLACK_TOL * s.scale);

    let mut witness = (lowest.slack < -SLACK_TOL * lowest.scale).then(|| Witness {
        point: env_map(&lowest.p, &sampled),
        shifted: env_map(&lowest.q, &sampled),
        slack: lowest.slack,
    });

    let hessian = constant_hessian(e, &var_list)?;
    let (convex, concave, exact) = match &hessian {
        Some(h) => {
            let eig = SymmetricEigen::new(h.clone());
            let span = eig.eigenvalues.iter().fold(1f64, |m, l| m.max(l.abs()));
            let tol = SLACK_TOL * span;
            let convex = eig.eigenvalues.iter().all(|&l| l >= -tol);
            let concave = eig.eigenvalues.iter().all(|&l| l <= tol);
            if convex {
                witness = None;
            } else if witness.is_none() {
                witness = eigen_witness(e, &eig, &var_list, &sampled)?;
            }
            (convex, concave, true)
        }
        None => (!convex_broken, !concave_broken, false),
    };
    let status = match (convex, concave) {
        (true, _) => ConvexityStatus::LikelyConvex,
        (false, true) => ConvexityStatus::LikelyConcave,
        (false, false) => ConvexityStatus::Indefinite,
    };
    let margin = if status == ConvexityStatus::LikelyConcave {
        highest.slack
    } else {
        lowest.slack
    };
    Ok(ConvexityVerdict {
        status,
        witness,
        samples_tested: valid.len(),
        samples_skipped: skipped,
        margin,
        linear: convex && concave,
        exact,
    })
}

/// Steps from the box centre along the most negative curvature direction,
/// as far as the box allows. Kept only if the step violates convexity.
fn eigen_witness(
    e: &Expr,
    eig: &SymmetricEigen<f64, nalgebra::Dyn>,
    vars: &[Var],
    sampled: &[(Var, f64, f64)],
) -> Result<Option<Witness>> {
    let (k, _) = eig
        .eigenvalues
        .iter()
        .enumerate()
        .fold((0, f64::INFINITY), |best, (i, &l)| if l < best.1 { (i, l) } else { best });
    let dir = eig.eigenvectors.column(k);
    let half = |v: Var| {
        let &(_, lo, hi) = sampled.iter().find(|s| s.0 == v).expect("sampled var");
        (0.5 * (lo + hi), 0.5 * (hi - lo))
    };
    let reach = vars
        .iter()
        .zip(dir.iter())
        .filter(|(_, d)| d.abs() > 0.0)
        .map(|(&v, d)| half(v).1 / d.abs())
        .fold(f64::INFINITY, f64::min);
    let mut point = BTreeMap::new();
    let mut shifted = BTreeMap::new();
    for &(v, lo, hi) in sampled {
        let centre = 0.5 * (lo + hi);
        let c = vars.iter().position(|&u| u == v).map_or(0.0, |i| reach * dir[i]);
        point.insert(v.name().to_string(), centre);
        shifted.insert(v.name().to_string(), centre + c);
    }
    let mut w = Witness {
        point,
        shifted,
        slack: 0.0,
    };
    w.slack = w.recheck(e)?;
    let p = Witness::env(&w.point)?;
    let q = Witness::env(&w.shifted)?;
    let scale = 1f64.max(e.eval(&p)?.abs()).max(e.eval(&q)?.abs());
    Ok((w.slack < -SLACK_TOL * scale).then_some(w))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Sign {
    Nonnegative,
    Nonpositive,
    Mixed,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Conclusion {
    /// The convexity hypotheses passed sampling.
    SufficientMinimizer,
    Inconclusive,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SufficiencyCertificate {
    #[serde(rename = "L_verdict")]
    pub outer_verdict: ConvexityVerdict,
    #[serde(rename = "l_verdict")]
    pub inner_verdict: ConvexityVerdict,
    #[serde(rename = "dLdz_sign")]
    pub dldz_sign: Sign,
    #[serde(rename = "dLdz_min")]
    pub dldz_min: f64,
    #[serde(rename = "dLdz_max")]
    pub dldz_max: f64,
    pub conclusion: Conclusion,
}

impl SufficiencyCertificate {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("certificate serializes")
    }
}

fn inflate(values: &[f64], factor: f64) -> (f64, f64) {
    let lo = values.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let centre = 0.5 * (lo + hi);
    let mut half = 0.5 * (hi - lo) * factor;
    if half < 1e-3 * centre.abs().max(1.0) {
        half = 0.5 * centre.abs().max(1.0);
    }
    (centre - half, centre + half)
}

/// Checks the sufficiency hypotheses along `traj`.
///
/// Each sampling box is the observed range of the corresponding field on
/// `[a, b]`, widened about its centre by `inflation`. Nearly constant
/// fields get a half-width of `max(1, |centre|) / 2`. `x` ranges over `[a, b]`.
pub fn certify(
    spec: &ProblemSpec,
    traj: &Trajectory,
    inflation: f64,
    trials: usize,
    seed: u64,
) -> Result<SufficiencyCertificate> {
    if !(inflation >= 1.0 && inflation.is_finite()) {
        return Err(Error::domain(format!("box inflation must be >= 1, got {inflation}")));
    }
    let fields = evaluate_fields(traj, spec)?;
    let mut bx = SampleBox::new().with(Var::X, spec.a, spec.b);
    for (var, path) in [
        (Var::Y, &fields.y),
        (Var::V, &fields.v),
        (Var::W, &fields.w),
        (Var::Z, &fields.z),
        (Var::YTau, &fields.y_del),
        (Var::VTau, &fields.v_del),
    ] {
        let (lo, hi) = inflate(path.values(), inflation);
        bx = bx.with(var, lo, hi);
    }

    let env = spec.env();
    let big = spec.lagrangian.bind_params(&env);
    let small = spec.inner.bind_params(&env);
    let outer_vars = VarSet::of(&[Var::Y, Var::V, Var::W, Var::Z, Var::YTau, Var::VTau]);
    let inner_vars = VarSet::of(&[Var::Y, Var::V, Var::W]);
    let outer_verdict = check_convexity(&big, outer_vars, &bx, trials, seed)?.convexity_only();
    let inner_verdict = check_convexity(&small, inner_vars, &bx, trials, seed.wrapping_add(1))?;

    let dz = fields.sample_outer(spec, &spec.lagrangian.differentiate(Var::Z)?)?;
    let dz = dz.values();
    let dldz_min = dz.iter().copied().fold(f64::INFINITY, f64::min);
    let dldz_max = dz.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let dldz_sign = if dldz_min >= 0.0 {
        Sign::Nonnegative
    } else if dldz_max <= 0.0 {
        Sign::Nonpositive
    } else {
        Sign::Mixed
    };
    let convex_branch =
        inner_verdict.status == ConvexityStatus::LikelyConvex && dldz_min >= 0.0;
    let concave_branch = inner_verdict.is_concave() && dldz_max <= 0.0;
    let conclusion = if outer_verdict.status == ConvexityStatus::LikelyConvex
        && (convex_branch || concave_branch)
    {
        Conclusion::SufficientMinimizer
    } else {
        Conclusion::Inconclusive
    };
    Ok(SufficiencyCertificate {
        outer_verdict,
        inner_verdict,
        dldz_sign,
        dldz_min,
        dldz_max,
        conclusion,
    })
}
