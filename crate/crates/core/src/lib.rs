//! Latent spatio-temporal activity pattern mining over venue check-in data.
//!
//! The crate is organized as a batch pipeline:
//!
//! 1. [`ingest`] parses check-in CSV files, filters users by activity level,
//!    and builds an indexed [`corpus::Corpus`].
//! 2. [`tlda`] fits a time-aware topic model over (user, time, venue-category)
//!    events with collapsed Gibbs sampling; it degrades to plain LDA when the
//!    temporal layer is disabled.
//! 3. [`coherence`] scores fitted models with sliding-window NPMI coherence
//!    (a temporal variant for model selection and the standard venue-only
//!    variant for baselines).
//! 4. [`poptics`] localizes each user's routine activity with a personalized
//!    density-based ordering of their check-in locations.
//! 5. [`dsi`] maps per-pattern demand, supply, and demand-supply ratio over a
//!    city grid.
//! 6. [`validate`] correlates grid DSR with observed travel distances.
//!
//! [`synthgen`] builds seeded synthetic corpora with planted ground truth so
//! every stage can be tested end to end, and [`pipeline`] wires the stages
//! into resumable on-disk runs used by the CLI.

pub mod alignment;
pub mod coherence;
pub mod corpus;
pub mod dsi;
mod error;
pub mod geo;
pub mod ingest;
pub mod pipeline;
pub mod poptics;
pub mod synthgen;
pub mod temporal;
pub mod tlda;
pub mod validate;

pub use error::{Error, Result};
