//! Community detection and link-credibility profiling for follower networks.
//!
//! The crate is organised as a staged batch pipeline:
//!
//! - [`ingest`] loads tweets, follower edges, page contents and expert labels.
//! - [`graph`] turns follower edges into a normalised directed graph and then
//!   into the weighted undirected graph used for detection.
//! - [`community`] runs Louvain plus the size-constrained split/merge loop.
//! - [`links`] assigns each tweet a link category and filters pages.
//! - [`credibility`] featurises pages with TF-IDF, trains the per-criterion
//!   SVM and random-forest classifiers and scores pages.
//! - [`measures`] computes the per-community profile, rank percentiles and
//!   the report and visualisation documents.
//! - [`synth`] generates planted graphs and corpora with known ground truth.
//! - [`pipeline`] wires the stages together through files, one stage per
//!   command.

pub mod community;
pub mod config;
pub mod credibility;
pub mod error;
pub mod graph;
pub mod ingest;
pub mod links;
pub mod measures;
pub mod pipeline;
pub mod seed;
pub mod synth;

pub use error::{Error, ErrorKind, Result};
