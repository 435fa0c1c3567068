//! The chapters of the mdbook guide, compiled as doc-tests.
//!
//! Each module includes one chapter, so `cargo test -p lndp-book` runs every
//! snippet in the book against the current library.

#[doc = include_str!("../../../book/src/introduction.md")]
pub mod introduction {}

#[doc = include_str!("../../../book/src/graphs.md")]
pub mod graphs {}

#[doc = include_str!("../../../book/src/mechanisms.md")]
pub mod mechanisms {}

#[doc = include_str!("../../../book/src/blur.md")]
pub mod blur {}

#[doc = include_str!("../../../book/src/linear-queries.md")]
pub mod linear_queries {}

#[doc = include_str!("../../../book/src/estimators.md")]
pub mod estimators {}

#[doc = include_str!("../../../book/src/distinguisher.md")]
pub mod distinguisher {}

#[doc = include_str!("../../../book/src/accounting.md")]
pub mod accounting {}

#[doc = include_str!("../../../book/src/experiments.md")]
pub mod experiments {}
