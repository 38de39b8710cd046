//! Runs the code blocks of the guide in `book/src` as doctests.
//!
//! mdbook cannot test against workspace crates, so each chapter is included
//! as the docs of an empty module and `cargo test --doc` does the work.

#[cfg(doctest)]
#[doc = include_str!("../../../book/src/introduction.md")]
pub mod introduction {}
#[cfg(doctest)]
#[doc = include_str!("../../../book/src/h2-space.md")]
pub mod h2_space {}
#[cfg(doctest)]
#[doc = include_str!("../../../book/src/cauchy.md")]
pub mod cauchy {}
#[cfg(doctest)]
#[doc = include_str!("../../../book/src/rational-fitting.md")]
pub mod rational_fitting {}
#[cfg(doctest)]
#[doc = include_str!("../../../book/src/outer-loop.md")]
pub mod outer_loop {}
#[cfg(doctest)]
#[doc = include_str!("../../../book/src/baselines.md")]
pub mod baselines {}
#[cfg(doctest)]
#[doc = include_str!("../../../book/src/cli.md")]
pub mod cli {}
