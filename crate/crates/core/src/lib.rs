//! Desk-scale satellite-infrastructure pipeline: rasterize vector ground
//! truth into label masks, train and evaluate a Sat-Unet segmentation
//! network with a hybrid BCE + Dice loss, filter noisy labels with the
//! validity-index judge, count buildings and measure roads from predicted
//! masks, aggregate per-cell counts into survey-cluster features, and
//! benchmark wealth prediction with leave-one-country-out cross-validation.

pub mod bench;
pub mod csvio;
pub mod error;
pub mod features;
pub mod geo;
pub mod grid;
pub mod judge;
pub mod loss;
pub mod nn;
pub mod post;
pub mod raster;
pub mod rasterize;
pub mod seed;
pub mod skeleton;
pub mod synth;
pub mod tensor;
pub mod vector;

pub use error::{Error, Result};
