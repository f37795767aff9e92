//! Group-invariant Wasserstein barycenters for posterior samples subject to
//! label switching.
//!
//! A posterior draw of a `K`-component mixture is a tuple of component
//! parameters. Relabeling the components leaves the likelihood unchanged, so
//! each draw really stands for its whole orbit under a finite group (all
//! permutations, or cyclic shifts). The barycenter of those orbit measures is
//! itself the orbit of a single tuple, and that tuple can be found by
//! stochastic gradient descent that aligns every fresh draw to the current
//! estimate before stepping toward it.
//!
//! Modules:
//!
//! * [`manifold`]: the exp/log/distance contract plus Euclidean and product instances.
//! * [`bures`]: Bures-Wasserstein geometry of Gaussian components.
//! * [`group`]: group actions, assignment solver and quotient distance.
//! * [`barycenter`]: the stochastic gradient solvers and the Monte Carlo objective.
//! * [`baselines`]: pivotal reordering.
//! * [`samplers`]: synthetic label-switched posteriors and the multi-reference alignment pipeline.
//! * [`cli`]: file formats, run configuration and the `qb` subcommands.

pub mod barycenter;
pub mod baselines;
pub mod bures;
pub mod cli;
mod error;
pub mod group;
pub mod manifold;
pub mod metrics;
pub mod samplers;

pub use error::{Error, Result};
