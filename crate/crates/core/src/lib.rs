//! Spectra of random graphs with community structure and arbitrary expected
//! degrees.
//!
//! Every vertex carries a parameter vector `k`; the number of edges between
//! two vertices is Poisson with mean `k_i · k_j / 2m`. The crate computes the
//! asymptotic adjacency spectrum of such graphs (a continuous band plus up to
//! `q` outlying eigenvalues), the detectability thresholds where outliers
//! merge into the band, and the empirical spectra of sampled graphs so the two
//! can be compared.
//!
//! Module map:
//!
//! - [`model`]: finite-atom parameter distributions and the rank-`q` structure
//!   of the mean adjacency matrix.
//! - [`generator`]: reproducible sparse multigraph sampling.
//! - [`resolvent`]: the self-consistent equation for `h(z)`, the Stieltjes
//!   transform, spectral density and band edges.
//! - [`outliers`]: outlying eigenvalues, `g_max` and detectability thresholds.
//! - [`closedform`]: closed-form special cases used as oracles.
//! - [`empirical`]: dense and Lanczos eigensolvers, histograms and spectral
//!   community recovery on sampled graphs.
//! - [`config`] and [`io`]: model files, graph files and run metadata.

// `!(x > 0.0)` is used on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod closedform;
pub mod config;
pub mod empirical;
pub mod error;
pub mod exec;
pub mod generator;
pub mod io;
pub mod linalg;
pub mod model;
pub mod outliers;
pub mod resolvent;

pub use error::{Error, Result};
pub use exec::Exec;
pub use generator::{sample_graph, SampledGraph};
pub use model::{ModelSpec, ParamAtom, RankQStructure};

pub use num_complex::Complex64;
