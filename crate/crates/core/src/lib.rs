//! Pigmented-lesion segmentation.
//!
//! Hessian interest points found with box filters on an integral image seed
//! a closed active contour, which a greedy energy descent pulls onto the
//! lesion border. A multi-class Otsu threshold serves as the baseline, and
//! both are scored against reference masks by pixel recall and precision.

pub mod cli;
pub mod contour_init;
pub mod error;
pub mod evaluation;
pub mod features;
pub mod interest_points;
pub mod io;
pub mod otsu;
pub mod pipeline;
pub mod raster;
pub mod snake;
pub mod synth;

pub use contour_init::{resample_contour, seed_contour, Contour, InitParams, Point, SeedStrategy};
pub use error::{Error, Result};
pub use evaluation::{batch_evaluate, confusion_counts, metrics, BinaryMask, ConfusionCounts, EvalTable};
pub use features::{region_stats, FeatureReport, RegionFeatures};
pub use interest_points::{assign_orientation, detect_keypoints, hessian_response_map, DetectorParams, Keypoint};
pub use otsu::{multi_otsu_thresholds, segment_otsu, LesionRule, ThresholdSet};
pub use pipeline::{segment, Method, SegmentParams};
pub use raster::{build_integral, channel_histogram, rgb_to_hsv, to_grayscale, Histogram, HsvPixel, IntegralImage, RasterImage, Rect};
pub use snake::{bending_energy, contour_to_mask, elastic_energy, evolve, image_energy_field, total_energy, EnergyBreakdown, EnergyField, SnakeParams};
pub use synth::{gen_lesion_image, synth20, LesionShape, SynthParams};
