//! Active-learning shot allocation for estimating fidelities from Pauli
//! measurements.
//!
//! A target quantity `Q = c + sum_i a_i <S_i>` is estimated from repeated
//! measurements of full-weight Pauli groups. Each shot of a group yields a
//! `+1`/`-1` sample for every identity-substituted sub-string. The
//! [`scheduler`] decides which group to measure next, either round-robin or
//! by the largest coefficient-weighted drop in a per-observable
//! concentration radius ([`bounds`]).
//!
//! * [`quantum`]: states, channels, Pauli strings, simulated measurements.
//! * [`bounds`]: running statistics and concentration radii.
//! * [`decomposition`]: state- and gate-fidelity expansions into Pauli terms.
//! * [`scheduler`]: the allocation loop.
//! * [`harness`]: Monte-Carlo realizations, convergence curves, improvement ratios.

pub mod bounds;
pub mod decomposition;
mod error;
pub mod harness;
pub mod quantum;
pub mod scheduler;

pub use error::{Error, Result};

// Book chapters are compiled as doctests so their snippets stay current.
#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../book/src/introduction.md")]
    mod introduction {}
    #[doc = include_str!("../../../book/src/quantum.md")]
    mod quantum {}
    #[doc = include_str!("../../../book/src/bounds.md")]
    mod bounds {}
    #[doc = include_str!("../../../book/src/decompositions.md")]
    mod decompositions {}
    #[doc = include_str!("../../../book/src/scheduler.md")]
    mod scheduler {}
    #[doc = include_str!("../../../book/src/experiments.md")]
    mod experiments {}
    #[doc = include_str!("../../../book/src/cli.md")]
    mod cli {}
}
