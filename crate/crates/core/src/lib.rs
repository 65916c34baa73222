//! Random dense countable subsets of the unit interval, at desk scale.
//!
//! The crate has three layers:
//!
//! * [`strassen`]: an exact max-flow engine for the discrete marginal
//!   problem, with witnesses on both sides of the duality `α = β`.
//! * [`generators`] and [`selector`]: seeded simulators for truncated
//!   enumerations and the couplings that turn them into uniform selectors.
//! * [`stats`]: hypothesis tests wired into reproducible experiments.
//!
//! ```
//! use dcs::strassen::{solve, MarginalCaps, SupportMask};
//!
//! let diagonal = SupportMask::from_text("2 2\n10\n01\n").unwrap();
//! let solution = solve(&diagonal, &MarginalCaps::uniform(2, 2));
//! assert_eq!(solution.alpha, solution.beta);
//! ```

pub mod error;
pub mod flow;
pub mod generators;
pub mod grid_measure;
pub mod rational;
pub mod rng;
pub mod selector;
pub mod stats;
pub mod strassen;

pub use error::{Error, Result};
pub use rational::Rational;

#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../book/src/intro.md")]
    pub mod intro {}
    #[doc = include_str!("../../../book/src/duality.md")]
    pub mod duality {}
    #[doc = include_str!("../../../book/src/generators.md")]
    pub mod generators {}
    #[doc = include_str!("../../../book/src/selectors.md")]
    pub mod selectors {}
    #[doc = include_str!("../../../book/src/statistics.md")]
    pub mod statistics {}
}
