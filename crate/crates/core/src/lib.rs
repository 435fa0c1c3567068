//! Local node differential privacy for graphs.
//!
//! Each node of a graph privately reports on its own neighborhood and an
//! untrusted server aggregates the reports. The crate implements the
//! building blocks and estimators for this setting:
//!
//! - [`graph`]: graphs, random families, degree statistics, rewiring.
//! - [`mechanisms`]: Gaussian, Laplace and randomized-response primitives.
//! - [`blur`]: randomized rounding and blurry degree distributions.
//! - [`linquery`]: private linear queries and factorized workloads.
//! - [`estimators`]: edge counts, Erdős–Rényi parameters, clique sizes.
//! - [`distinguisher`]: starpartite versus regular graphs.
//! - [`analysis`]: distances, accounting, sensitivity oracles.
//! - [`harness`]: seeded experiments with CSV and JSON output.
//!
//! ```
//! use lndp::graph::generate_er;
//! use lndp::mechanisms::{NoiseMode, PrivacyParams};
//! use lndp::estimators::est_edges;
//!
//! let g = generate_er(500, 0.01, 42).unwrap();
//! let params = PrivacyParams::new(1.0, 1e-6).unwrap();
//! let exact = est_edges(&g, 20, params, 7, NoiseMode::Noiseless).unwrap();
//! assert!((exact - g.edge_count() as f64).abs() < 1e-6);
//! ```

// `!(x > 0.0)` is used on purpose so that NaN is rejected.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod analysis;
pub mod blur;
pub mod distinguisher;
pub mod error;
pub mod estimators;
pub mod graph;
pub mod harness;
pub mod linquery;
pub mod mechanisms;
pub mod rng;

pub use error::{Error, Result};
