//! Randomized separating partitions and Euclidean embeddings of finite
//! subsets of `ℓ_p`.
//!
//! The crate is organised bottom-up:
//!
//! * [`metric`]: weighted `ℓ_p` point sets, radii, nets, growth centers.
//! * [`mazur`]: Mazur maps and the localized radial map.
//! * [`partition`]: random partitions, CKR carving, separation estimators.
//! * [`compose`]: refinement across scales and pullback through maps.
//! * [`reduce`]: random projection plus Kirszbraun extension.
//! * [`embed`]: feature maps, Bourgain-type and localized embeddings.
//! * [`pipeline`]: the end-to-end `ℓ_p` separation sampler.
//! * [`oracle`]: exact separation moduli of tiny instances by linear programming.
//! * [`report`]: CSV artifacts with provenance headers.
//! * [`acceptance`]: the numbered acceptance checks, shared by tests and the CLI.

pub mod error;
pub mod rng;
pub mod stats;

pub mod metric;
pub mod mazur;
pub mod partition;
pub mod compose;
pub mod reduce;
pub mod embed;
pub mod pipeline;
pub mod oracle;
pub mod report;
pub mod acceptance;

pub use error::{Error, Result};
