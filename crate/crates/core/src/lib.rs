//! Feature-map selection tracking with learned channel weights.
//!
//! The tracker scores each backbone channel by how well it lights up inside
//! a target-shaped mask, weights channels either by a hard top-fraction rule
//! or by small dense networks, and picks the candidate box that best covers
//! the resulting prediction map.

pub mod bench;
pub mod candidates;
pub mod config;
pub mod error;
pub mod features;
pub mod geometry;
pub mod scoring;
pub mod synthseq;
pub mod targetmaps;
pub mod tracker;
pub mod weightnet;

pub use error::{Error, Result};
pub use geometry::{Rect, RoiWindow};
pub use targetmaps::{MapKind, Polarity};
pub use tracker::{Mode, Tracker, TrackerConfig};
