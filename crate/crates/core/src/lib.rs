//! Piggybacked systematic MDS storage codes.
//!
//! `r` instances of a systematic `(k + r, k)` Cauchy code over GF(2^8) are
//! laid side by side, and symbols of earlier instances are added onto the
//! parities of later ones. Grouping the systematic nodes and piggybacking each
//! group onto its own instance lets a failed systematic node be rebuilt from
//! far fewer than `k * r` cells while any `k` nodes still recover the data.
//!
//! - [`gf`]: field arithmetic and lane-wise block kernels.
//! - [`mds`]: the base code.
//! - [`layout`]: groupings and piggyback placement plans.
//! - [`codec`]: stripe encode, decode and single-node repair with traffic accounting.
//! - [`planner`]: closed-form bandwidth, complexity and code comparison.
//! - [`store`]: shard directories, manifest, reassembly and node repair on disk.

pub mod codec;
pub mod error;
pub mod gf;
pub mod layout;
pub mod mds;
pub mod planner;
pub mod store;

pub use codec::{CellSource, Masked, PiggybackCode, Stripe, TrafficReport};
pub use error::{Error, FetchError, Result};
pub use gf::Gf256;
pub use layout::{validate_plan, Grouping, PiggybackPlan, Slot, Source, Strategy, Violation};
pub use mds::{CodeParams, ParityMatrix};
pub use planner::{BandwidthReport, ComplexityModel, Rate};
pub use store::Manifest;
