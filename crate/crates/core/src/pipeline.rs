//! Detect → seed → evolve → rasterise, or the Otsu baseline, on one image.

use serde::{Deserialize, Serialize};

use crate::contour_init::{seed_contour_traced, Contour, InitParams, SeedSource};
use crate::error::{Error, Result};
use crate::evaluation::BinaryMask;
use crate::interest_points::{detect_keypoints, DetectorParams, Keypoint};
use crate::otsu::{segment_otsu_roi, LesionRule, Roi};
use crate::raster::{to_grayscale, RasterImage};
use crate::snake::{contour_to_mask, evolve, image_energy_field, EnergyBreakdown, SnakeParams};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    #[default]
    Snake,
    Otsu,
}

/// Which plane of a colour image the gray-level stages work on.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum GrayMode {
    #[default]
    Luma,
    Red,
    Green,
    Blue,
}

pub fn gray_plane(img: &RasterImage, mode: GrayMode) -> Result<RasterImage> {
    if img.channels() == 1 {
        return Ok(img.clone());
    }
    let channel = match mode {
        GrayMode::Luma => return to_grayscale(img),
        GrayMode::Red => 0,
        GrayMode::Green => 1,
        GrayMode::Blue => 2,
    };
    let data = img.data().chunks_exact(3).map(|p| p[channel]).collect();
    RasterImage::new(img.width(), img.height(), 1, data)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct OtsuParams {
    pub classes: usize,
    pub lesion: LesionRule,
    pub roi: Option<Roi>,
}

impl Default for OtsuParams {
    fn default() -> Self {
        Self {
            classes: 4,
            lesion: LesionRule::DarkestClass,
            roi: None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(default)]
pub struct SegmentParams {
    pub method: Method,
    pub gray: GrayMode,
    pub detector: DetectorParams,
    pub init: InitParams,
    pub snake: SnakeParams,
    pub otsu: OtsuParams,
}

#[derive(Debug, Clone)]
pub struct SegmentOutcome {
    pub mask: BinaryMask,
    pub keypoints: Vec<Keypoint>,
    pub seed: Option<(Contour, SeedSource)>,
    pub contour: Option<Contour>,
    pub trace: Vec<EnergyBreakdown>,
}

pub fn segment(img: &RasterImage, params: &SegmentParams) -> Result<SegmentOutcome> {
    let gray = gray_plane(img, params.gray)?;
    match params.method {
        Method::Otsu => {
            let o = &params.otsu;
            Ok(SegmentOutcome {
                mask: segment_otsu_roi(&gray, o.classes, o.lesion, o.roi)?,
                keypoints: Vec::new(),
                seed: None,
                contour: None,
                trace: Vec::new(),
            })
        }
        Method::Snake => segment_snake(&gray, params),
    }
}

fn segment_snake(gray: &RasterImage, params: &SegmentParams) -> Result<SegmentOutcome> {
    params.snake.validate()?;
    let keypoints = detect_keypoints(gray, &params.detector)?;
    let (seed, source) = seed_contour_traced(&keypoints, gray.dims(), &params.init)?;
    let field = image_energy_field(gray, params.snake.smoothing_sigma)?;
    let (contour, trace) = evolve(&seed, &field, &params.snake)?;
    let mask = contour_to_mask(&contour, gray.width(), gray.height()).or_else(|e| match e {
        // a snake that collapsed onto a line encloses nothing
        Error::DegenerateContour(_) => Ok(BinaryMask::new(gray.width(), gray.height())),
        other => Err(other),
    })?;
    Ok(SegmentOutcome {
        mask,
        keypoints,
        seed: Some((seed, source)),
        contour: Some(contour),
        trace,
    })
}

/// `iteration,elastic,bending,image,total` rows, iterations counted from 1.
pub fn trace_csv(trace: &[EnergyBreakdown]) -> String {
    let mut out = String::from("iteration,elastic,bending,image,total\n");
    for (i, e) in trace.iter().enumerate() {
        out.push_str(&format!(
            "{},{},{},{},{}\n",
            i + 1,
            e.elastic,
            e.bending,
            e.image,
            e.total
        ));
    }
    out
}

pub fn keypoints_json(keypoints: &[Keypoint]) -> String {
    serde_json::to_string_pretty(keypoints).expect("keypoints serialize") + "\n"
}
