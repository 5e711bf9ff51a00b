//! Raster primitives: morphology, LoG filtering, distance transform and labelling.

mod distance;
mod labeling;
mod log;
mod morphology;

pub use distance::{distance_transform, squared_distance_transform};
pub use labeling::ccl;
pub(crate) use labeling::neighbours4;
pub use log::{log_filter, log_response, rescale_unit};
pub(crate) use log::min_max;
pub use morphology::{dilate, erode, morph_open, Disk};
