//! Box-filter Hessian interest points on an integral image.
//!
//! Second derivatives are approximated with the usual SURF box layouts: a
//! `L × (2l-1)` strip with a `-2` weighted centre lobe for `Dxx`/`Dyy` and four
//! `l × l` quadrants for `Dxy`, where `l = L / 3`. The blob response is
//! `Dxx·Dyy − (0.9·Dxy)²` with each term normalised by `L²`.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::raster::{build_integral, IntegralImage, RasterImage};

/// Relative weight of the mixed term in the determinant.
pub const DXY_WEIGHT: f64 = 0.9;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, serde::Deserialize)]
#[serde(default)]
pub struct DetectorParams {
    pub octaves: usize,
    pub layers_per_octave: usize,
    pub base_filter_size: usize,
    pub response_threshold: f64,
}

impl Default for DetectorParams {
    fn default() -> Self {
        Self {
            octaves: 3,
            layers_per_octave: 4,
            base_filter_size: 9,
            response_threshold: 20.0,
        }
    }
}

impl DetectorParams {
    pub fn validate(&self) -> Result<()> {
        if self.octaves < 1 {
            return Err(Error::InvalidParams("octaves must be >= 1".into()));
        }
        if self.layers_per_octave < 3 {
            return Err(Error::InvalidParams("layers_per_octave must be >= 3".into()));
        }
        if self.base_filter_size < 9 || self.base_filter_size.is_multiple_of(2) {
            return Err(Error::InvalidParams(
                "base_filter_size must be odd and >= 9".into(),
            ));
        }
        if !(self.response_threshold >= 0.0 && self.response_threshold.is_finite()) {
            return Err(Error::InvalidParams(
                "response_threshold must be finite and non-negative".into(),
            ));
        }
        Ok(())
    }

    /// Filter side length for `layer` of `octave`. With the default base of 9
    /// this gives 9,15,21,27 / 15,27,39,51 / 27,51,75,99.
    pub fn filter_size(&self, octave: usize, layer: usize) -> usize {
        self.base_filter_size - 6 + 6 * (1 << octave) * (layer + 1)
    }
}

/// Gaussian scale matched by a box filter of side `filter_size`.
pub fn filter_scale(filter_size: usize) -> f64 {
    1.2 * filter_size as f64 / 9.0
}

#[derive(Debug, Clone, PartialEq)]
pub struct ResponseMap {
    pub width: usize,
    pub height: usize,
    pub filter_size: usize,
    pub scale: f64,
    pub responses: Vec<f64>,
}

impl ResponseMap {
    #[inline]
    pub fn at(&self, x: usize, y: usize) -> f64 {
        self.responses[y * self.width + x]
    }

    /// Half-width of the filter; pixels closer than this to a border are zero.
    pub fn margin(&self) -> usize {
        (self.filter_size - 1) / 2
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Keypoint {
    pub x: f64,
    pub y: f64,
    pub scale: f64,
    pub response: f64,
    #[serde(skip)]
    pub orientation: f64,
}

/// Raw (unnormalised) box-filter second derivatives at `(x, y)`.
///
/// The caller guarantees the filter fits: `half <= x < width - half`, likewise for `y`.
#[inline]
pub(crate) fn box_derivatives(ii: &IntegralImage, x: usize, y: usize, filter: usize) -> (i64, i64, i64) {
    let (c, r) = (x as isize, y as isize);
    let l = (filter / 3) as isize;
    let b = ((filter - 1) / 2) as isize;
    let lobe_half = l / 2;

    let dxx = ii.box_sum_signed(c - b, r - l + 1, c + b, r + l - 1)
        - 3 * ii.box_sum_signed(c - lobe_half, r - l + 1, c - lobe_half + l - 1, r + l - 1);
    let dyy = ii.box_sum_signed(c - l + 1, r - b, c + l - 1, r + b)
        - 3 * ii.box_sum_signed(c - l + 1, r - lobe_half, c + l - 1, r - lobe_half + l - 1);
    let dxy = ii.box_sum_signed(c + 1, r - l, c + l, r - 1)
        + ii.box_sum_signed(c - l, r + 1, c - 1, r + l)
        - ii.box_sum_signed(c - l, r - l, c - 1, r - 1)
        - ii.box_sum_signed(c + 1, r + 1, c + l, r + l);
    (dxx, dyy, dxy)
}

/// Determinant response from raw derivative sums.
#[inline]
pub(crate) fn determinant(dxx: i64, dyy: i64, dxy: i64, filter: usize) -> f64 {
    let area = (filter * filter) as f64;
    let (dxx, dyy, dxy) = (dxx as f64 / area, dyy as f64 / area, dxy as f64 / area);
    dxx * dyy - (DXY_WEIGHT * dxy) * (DXY_WEIGHT * dxy)
}

pub fn hessian_response_map(ii: &IntegralImage, filter_size: usize) -> Result<ResponseMap> {
    if filter_size < 9 || filter_size.is_multiple_of(2) {
        return Err(Error::InvalidParams(format!(
            "filter size {filter_size} must be odd and >= 9"
        )));
    }
    let (w, h) = (ii.width(), ii.height());
    if filter_size > w || filter_size > h {
        return Err(Error::FilterTooLarge {
            filter_size,
            width: w,
            height: h,
        });
    }
    let half = (filter_size - 1) / 2;
    let mut responses = vec![0.0; w * h];
    for y in half..h - half {
        for x in half..w - half {
            let (dxx, dyy, dxy) = box_derivatives(ii, x, y, filter_size);
            responses[y * w + x] = determinant(dxx, dyy, dxy, filter_size);
        }
    }
    Ok(ResponseMap {
        width: w,
        height: h,
        filter_size,
        scale: filter_scale(filter_size),
        responses,
    })
}

/// Scale-space maxima of the Hessian response, strongest first.
pub fn detect_keypoints(gray: &RasterImage, params: &DetectorParams) -> Result<Vec<Keypoint>> {
    params.validate()?;
    gray.require_channels(1)?;
    let (w, h) = gray.dims();
    if w < params.base_filter_size || h < params.base_filter_size {
        return Err(Error::ImageTooSmall {
            width: w,
            height: h,
            min: params.base_filter_size,
        });
    }
    let ii = build_integral(gray)?;
    let mut keypoints = Vec::new();

    for octave in 0..params.octaves {
        let maps = (0..params.layers_per_octave)
            .map(|layer| params.filter_size(octave, layer))
            .take_while(|&size| size <= w && size <= h)
            .map(|size| hessian_response_map(&ii, size))
            .collect::<Result<Vec<_>>>()?;
        for mid in 1..maps.len().saturating_sub(1) {
            suppress_non_maxima(&maps[mid - 1..=mid + 1], params.response_threshold, &mut keypoints);
        }
    }

    keypoints.sort_by(|a, b| {
        b.response
            .total_cmp(&a.response)
            .then(a.y.total_cmp(&b.y))
            .then(a.x.total_cmp(&b.x))
            .then(a.scale.total_cmp(&b.scale))
    });
    Ok(keypoints)
}

/// Strict 3×3×3 maxima of the middle map that reach `threshold`.
fn suppress_non_maxima(stack: &[ResponseMap], threshold: f64, out: &mut Vec<Keypoint>) {
    let (mid, above) = (&stack[1], &stack[2]);
    let (w, h) = (mid.width, mid.height);
    // neighbours must sit inside the valid region of the largest filter
    let m = above.margin() + 1;
    if w <= 2 * m || h <= 2 * m {
        return;
    }
    for y in m..h - m {
        'pixel: for x in m..w - m {
            let v = mid.at(x, y);
            if v < threshold || v <= 0.0 {
                continue;
            }
            for (layer, map) in stack.iter().enumerate() {
                for ny in y - 1..=y + 1 {
                    for nx in x - 1..=x + 1 {
                        if layer == 1 && nx == x && ny == y {
                            continue;
                        }
                        if map.at(nx, ny) >= v {
                            continue 'pixel;
                        }
                    }
                }
            }
            out.push(Keypoint {
                x: x as f64,
                y: y as f64,
                scale: mid.scale,
                response: v,
                orientation: 0.0,
            });
        }
    }
}

fn haar_x(ii: &IntegralImage, cx: isize, cy: isize, size: isize) -> f64 {
    let half = size / 2;
    let right = ii.box_sum_clamped(cx, cy - half, cx + half - 1, cy + half - 1);
    let left = ii.box_sum_clamped(cx - half, cy - half, cx - 1, cy + half - 1);
    (right - left) as f64
}

fn haar_y(ii: &IntegralImage, cx: isize, cy: isize, size: isize) -> f64 {
    let half = size / 2;
    let bottom = ii.box_sum_clamped(cx - half, cy, cx + half - 1, cy + half - 1);
    let top = ii.box_sum_clamped(cx - half, cy - half, cx + half - 1, cy - 1);
    (bottom - top) as f64
}

/// Sets the dominant Haar-gradient direction (radians, `[0, 2π)`, `0` = +x).
pub fn assign_orientation(ii: &IntegralImage, kp: &Keypoint) -> Keypoint {
    use std::f64::consts::{PI, TAU};

    let step = kp.scale.round().max(1.0) as isize;
    let (cx, cy) = (kp.x.round() as isize, kp.y.round() as isize);
    let sigma_w = 2.5;
    let mut samples = Vec::with_capacity(113);
    for j in -6isize..=6 {
        for i in -6isize..=6 {
            if i * i + j * j >= 36 {
                continue;
            }
            let weight = (-((i * i + j * j) as f64) / (2.0 * sigma_w * sigma_w)).exp();
            let sx = cx + i * step;
            let sy = cy + j * step;
            let dx = weight * haar_x(ii, sx, sy, 4 * step);
            let dy = weight * haar_y(ii, sx, sy, 4 * step);
            if dx == 0.0 && dy == 0.0 {
                continue;
            }
            samples.push((dy.atan2(dx).rem_euclid(TAU), dx, dy));
        }
    }

    let window = PI / 3.0;
    let mut best = 0.0;
    let mut orientation = 0.0;
    let mut start = 0.0f64;
    while start < TAU {
        let end = start + window;
        let (mut sx, mut sy) = (0.0, 0.0);
        for &(angle, dx, dy) in &samples {
            let inside = if end < TAU {
                angle >= start && angle < end
            } else {
                angle >= start || angle < end - TAU
            };
            if inside {
                sx += dx;
                sy += dy;
            }
        }
        let magnitude = sx * sx + sy * sy;
        if magnitude > best {
            best = magnitude;
            orientation = sy.atan2(sx).rem_euclid(TAU);
        }
        start += 0.15;
    }
    Keypoint {
        orientation,
        ..*kp
    }
}
