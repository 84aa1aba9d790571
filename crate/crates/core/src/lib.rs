//! Floor-plan registered camera-pose datasets from per-video SfM reconstructions.
//!
//! The crate covers the full path from a walk-through video to a pose-labelled
//! image set: COLMAP model I/O, similarity registration onto a floor-plan
//! raster, the densify-until-aligned reconstruction loop, dataset export with a
//! date-based split, pose-regression losses and metrics, and point-of-interest
//! queries against a labelled plan.

pub mod cli;
pub mod colmap_io;
pub mod eval;
pub mod geometry;
pub mod georeg;
pub mod pipeline;
pub mod poi;
