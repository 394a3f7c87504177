//! Multistage stochastic linear programming by stochastic dual dynamic
//! programming (SDDP), with adaptive scenario-partition refinement.
//!
//! The crate solves problems of the form
//!
//! ```text
//! min c_1'x_1 + E[ min c_2'x_2 + E[ ... + E[ min c_T'x_T ] ] ]
//! s.t. A_t x_t = b_t - B_t x_{t-1},  x_t >= 0,
//! ```
//!
//! where the per-stage random data `(B_t, b_t)` ranges over a finite,
//! stagewise-independent set of realizations. Policies are built as cutting-
//! plane models of the expected cost-to-go functions; the partition machinery
//! lets backward passes work with clusters of realizations instead of every
//! scenario, refining clusters only where their LP duals actually disagree.
//!
//! Entry points:
//! - [`model`]: problem data ([`model::ScenarioLattice`]) and configuration.
//! - [`hydro`]: a hydro-thermal instance generator.
//! - [`engine`]: forward/backward passes and bounds.
//! - [`variants`]: the seven ready-made solver variants.
//! - [`dep`]: the deterministic-equivalent oracle for exact answers on small
//!   instances.
//! - [`io`]: instance files, run logs, and config documents.
//!
//! The narrative guide lives in `book/`; its code blocks compile and run as
//! doc-tests of this crate.

pub mod cuts;
pub mod dep;
pub mod engine;
pub mod error;
pub mod hydro;
pub mod io;
pub mod lp;
pub mod model;
pub mod partition;
mod simplex;
pub mod variants;

pub use error::{Error, Result};

// Compile and run the guide's code blocks under `cargo test --doc`. Each
// chapter is attached to a hidden module so mdbook and rustdoc share one
// source of truth.
#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../README.md")]
    mod readme {}
    #[doc = include_str!("../../../book/src/introduction.md")]
    mod introduction {}
    #[doc = include_str!("../../../book/src/model.md")]
    mod model {}
    #[doc = include_str!("../../../book/src/linear-programs.md")]
    mod linear_programs {}
    #[doc = include_str!("../../../book/src/cuts.md")]
    mod cuts {}
    #[doc = include_str!("../../../book/src/partitions.md")]
    mod partitions {}
    #[doc = include_str!("../../../book/src/sddp.md")]
    mod sddp {}
    #[doc = include_str!("../../../book/src/variants.md")]
    mod variants {}
    #[doc = include_str!("../../../book/src/instances.md")]
    mod instances {}
    #[doc = include_str!("../../../book/src/cli.md")]
    mod cli {}
}
