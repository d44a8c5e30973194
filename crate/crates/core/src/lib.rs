//! Deterministic radiance-manifold rendering engine.
//!
//! The pipeline runs a latent-conditioned radiance network on a set of nested
//! surfaces ([`geometry`], [`radiance`]), flattens each surface to a 2D map
//! ([`gridding`]), upsamples the maps with a style-modulated CNN
//! ([`superres`]) and renders images or depth by ray-surface intersection and
//! front-to-back compositing ([`render`]). [`export`] extracts proxy meshes
//! and bakes textured meshes for a cached rasterizer; [`losses`] holds the
//! training objectives and image metrics as plain functions; [`io`] covers the
//! on-disk formats and configuration.

pub mod error;
pub mod export;
pub mod geometry;
pub mod gridding;
pub mod io;
pub mod losses;
pub mod math;
pub mod model;
pub mod params;
pub mod radiance;
pub mod render;
pub mod superres;

pub use error::{Error, Result};
