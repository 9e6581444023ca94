//! Fractional variational problems with a time delay.
//!
//! The crate discretises Lagrange-type functionals whose Lagrangian depends on
//! a Caputo derivative, a delayed state and an inner fractional integral
//! problem. It evaluates them on uniform grids, forms the fractional
//! optimality conditions, minimises directly, and checks the convexity
//! hypotheses that make a stationary point a minimizer.
//!
//! ```
//! use fracvar::problem::{builtin_example_n, make_reference};
//! use fracvar::functional::evaluate_j;
//!
//! let spec = builtin_example_n(0.5, 64)?;
//! let y = make_reference(&spec)?;
//! assert!(evaluate_j(&y, &spec)?.abs() < 1e-3);
//! # Ok::<(), fracvar::Error>(())
//! ```

pub mod cli;
pub mod error;
pub mod eulerlagrange;
pub mod expr;
pub mod fracops;
pub mod functional;
pub mod grid;
pub mod ibp;
pub mod problem;
mod quadrature;
pub mod solver;
pub mod sufficiency;

pub use error::{Error, Result};
pub use grid::{make_grid, Grid, SampledPath};

#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../book/src/introduction.md")]
    mod introduction {}
    #[doc = include_str!("../../../book/src/grids.md")]
    mod grids {}
    #[doc = include_str!("../../../book/src/operators.md")]
    mod operators {}
    #[doc = include_str!("../../../book/src/problems.md")]
    mod problems {}
    #[doc = include_str!("../../../book/src/functional.md")]
    mod functional {}
    #[doc = include_str!("../../../book/src/optimality.md")]
    mod optimality {}
    #[doc = include_str!("../../../book/src/ibp.md")]
    mod ibp {}
    #[doc = include_str!("../../../book/src/solver.md")]
    mod solver {}
    #[doc = include_str!("../../../book/src/sufficiency.md")]
    mod sufficiency {}
    #[doc = include_str!("../../../book/src/cli.md")]
    mod cli {}
}
