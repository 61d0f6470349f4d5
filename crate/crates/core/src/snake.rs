//! Discrete active contour: energy terms, greedy minimisation and rasterisation.
//!
//! For a closed contour `v(0..N)` with cyclic indexing:
//!
//! * elastic  = α Σ |v(s) − v(s−1)|²
//! * bending  = β Σ |v(s−1) − 2v(s) + v(s+1)|²
//! * image    = γ Σ E(round(v(s))), with `E ∈ [−1, 0]` lowest on strong edges
//! * constraint = 0 (no user constraints in the automatic pipeline)

use serde::{Deserialize, Serialize};

use crate::contour_init::{Contour, Point};
use crate::error::{Error, Result};
use crate::evaluation::BinaryMask;
use crate::raster::RasterImage;

/// A candidate must undercut the current local energy by more than this to be taken.
const MOVE_EPSILON: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SnakeParams {
    pub alpha: f64,
    pub beta: f64,
    pub gamma: f64,
    pub smoothing_sigma: f64,
    pub neighborhood_radius: usize,
    pub max_iterations: usize,
    pub converge_fraction: f64,
}

impl Default for SnakeParams {
    fn default() -> Self {
        Self {
            alpha: 1.0,
            beta: 0.5,
            gamma: 2000.0,
            smoothing_sigma: 5.0,
            neighborhood_radius: 2,
            max_iterations: 400,
            converge_fraction: 0.02,
        }
    }
}

impl SnakeParams {
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("alpha", self.alpha),
            ("beta", self.beta),
            ("gamma", self.gamma),
            ("smoothing_sigma", self.smoothing_sigma),
        ] {
            if !(v.is_finite() && v >= 0.0) {
                return Err(Error::InvalidParams(format!(
                    "{name} must be finite and non-negative"
                )));
            }
        }
        if self.max_iterations < 1 {
            return Err(Error::InvalidParams("max_iterations must be >= 1".into()));
        }
        if !(self.converge_fraction > 0.0 && self.converge_fraction <= 1.0) {
            return Err(Error::InvalidParams(
                "converge_fraction must lie in (0, 1]".into(),
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize)]
pub struct EnergyBreakdown {
    pub elastic: f64,
    pub bending: f64,
    pub image: f64,
    pub constraint: f64,
    pub total: f64,
}

/// Per-pixel image energy, row-major, values in `[−1, 0]`.
#[derive(Debug, Clone, PartialEq)]
pub struct EnergyField {
    pub width: usize,
    pub height: usize,
    pub values: Vec<f64>,
}

impl EnergyField {
    #[inline]
    pub fn at(&self, x: usize, y: usize) -> f64 {
        self.values[y * self.width + x]
    }

    /// Pixel under a real-valued point (nearest pixel centre), if inside.
    #[inline]
    fn pixel_of(&self, p: Point) -> Option<(usize, usize)> {
        let (x, y) = (p.x.round(), p.y.round());
        if x >= 0.0 && y >= 0.0 && (x as usize) < self.width && (y as usize) < self.height {
            Some((x as usize, y as usize))
        } else {
            None
        }
    }

    #[inline]
    fn sample(&self, p: Point) -> Option<f64> {
        self.pixel_of(p).map(|(x, y)| self.at(x, y))
    }
}

#[inline]
fn sq(p: Point) -> f64 {
    p.x * p.x + p.y * p.y
}

#[inline]
fn sub(a: Point, b: Point) -> Point {
    Point::new(a.x - b.x, a.y - b.y)
}

#[inline]
pub fn second_difference(prev: Point, cur: Point, next: Point) -> Point {
    Point::new(prev.x - 2.0 * cur.x + next.x, prev.y - 2.0 * cur.y + next.y)
}

pub fn elastic_energy(c: &Contour, alpha: f64) -> f64 {
    let p = c.points();
    let n = p.len();
    alpha * (0..n).map(|s| sq(sub(p[s], p[(s + n - 1) % n]))).sum::<f64>()
}

pub fn bending_energy(c: &Contour, beta: f64) -> f64 {
    let p = c.points();
    let n = p.len();
    beta * (0..n)
        .map(|s| sq(second_difference(p[(s + n - 1) % n], p[s], p[(s + 1) % n])))
        .sum::<f64>()
}

/// Normalised negative squared gradient magnitude of the Gaussian-smoothed image.
pub fn image_energy_field(gray: &RasterImage, smoothing_sigma: f64) -> Result<EnergyField> {
    gray.require_channels(1)?;
    if !(smoothing_sigma.is_finite() && smoothing_sigma >= 0.0) {
        return Err(Error::InvalidParams("smoothing_sigma must be finite and non-negative".into()));
    }
    let (w, h) = gray.dims();
    let plane: Vec<f64> = gray.data().iter().map(|&v| f64::from(v)).collect();
    let smooth = gaussian_blur(&plane, w, h, smoothing_sigma);

    let at = |x: usize, y: usize| smooth[y * w + x];
    let mut mag = vec![0.0; w * h];
    for y in 0..h {
        for x in 0..w {
            let gx = (at((x + 1).min(w - 1), y) - at(x.saturating_sub(1), y)) / 2.0;
            let gy = (at(x, (y + 1).min(h - 1)) - at(x, y.saturating_sub(1))) / 2.0;
            mag[y * w + x] = gx * gx + gy * gy;
        }
    }
    let max = mag.iter().copied().fold(0.0, f64::max);
    let values = if max > 0.0 {
        mag.iter().map(|&m| -m / max).collect()
    } else {
        vec![0.0; w * h]
    };
    Ok(EnergyField {
        width: w,
        height: h,
        values,
    })
}

/// Separable Gaussian blur, kernel radius `ceil(3σ)`, edge samples replicated.
pub(crate) fn gaussian_blur(plane: &[f64], w: usize, h: usize, sigma: f64) -> Vec<f64> {
    if sigma <= 0.0 {
        return plane.to_vec();
    }
    let radius = (3.0 * sigma).ceil() as isize;
    let mut kernel: Vec<f64> = (-radius..=radius)
        .map(|i| (-((i * i) as f64) / (2.0 * sigma * sigma)).exp())
        .collect();
    let norm: f64 = kernel.iter().sum();
    kernel.iter_mut().for_each(|k| *k /= norm);

    let clamp = |v: isize, len: usize| v.clamp(0, len as isize - 1) as usize;
    let mut tmp = vec![0.0; w * h];
    for y in 0..h {
        for x in 0..w {
            tmp[y * w + x] = kernel
                .iter()
                .enumerate()
                .map(|(k, wt)| wt * plane[y * w + clamp(x as isize + k as isize - radius, w)])
                .sum();
        }
    }
    let mut out = vec![0.0; w * h];
    for y in 0..h {
        for x in 0..w {
            out[y * w + x] = kernel
                .iter()
                .enumerate()
                .map(|(k, wt)| wt * tmp[clamp(y as isize + k as isize - radius, h) * w + x])
                .sum();
        }
    }
    out
}

pub fn total_energy(c: &Contour, field: &EnergyField, p: &SnakeParams) -> Result<EnergyBreakdown> {
    let mut image = 0.0;
    for (i, &pt) in c.points().iter().enumerate() {
        image += field.sample(pt).ok_or_else(|| {
            Error::OutOfBounds(format!(
                "contour point {i} at ({:.2}, {:.2}) outside {}x{} field",
                pt.x, pt.y, field.width, field.height
            ))
        })?;
    }
    let elastic = elastic_energy(c, p.alpha);
    let bending = bending_energy(c, p.beta);
    let image = p.gamma * image;
    let constraint = 0.0;
    Ok(EnergyBreakdown {
        elastic,
        bending,
        image,
        constraint,
        total: elastic + bending + image + constraint,
    })
}

/// Energy terms that depend on point `i`, with `v(i)` replaced by `cand`.
fn local_energy(pts: &[Point], i: usize, cand: Point, image: f64, p: &SnakeParams) -> f64 {
    let n = pts.len();
    let at = |k: isize| {
        let k = k.rem_euclid(n as isize) as usize;
        if k == i {
            cand
        } else {
            pts[k]
        }
    };
    let i = i as isize;
    let elastic = sq(sub(cand, at(i - 1))) + sq(sub(at(i + 1), cand));
    let bending = (i - 1..=i + 1)
        .map(|k| sq(second_difference(at(k - 1), at(k), at(k + 1))))
        .sum::<f64>();
    p.alpha * elastic + p.beta * bending + p.gamma * image
}

/// Greedy neighbourhood descent.
///
/// Each sweep visits points in order and moves each to the position in its
/// `(2r+1)²` integer-offset window with the lowest total energy, keeping the
/// current position on ties and otherwise preferring the first candidate in
/// row-major order. Candidates outside the field or on top of a neighbour are
/// skipped. Returns the final contour and one breakdown per sweep.
pub fn evolve(
    c: &Contour,
    field: &EnergyField,
    p: &SnakeParams,
) -> Result<(Contour, Vec<EnergyBreakdown>)> {
    p.validate()?;
    total_energy(c, field, p)?;
    let mut pts = c.points().to_vec();
    let n = pts.len();
    let r = p.neighborhood_radius as isize;
    let mut trace = Vec::new();

    for _ in 0..p.max_iterations {
        let mut moved = 0usize;
        for i in 0..n {
            let cur = pts[i];
            let prev = pts[(i + n - 1) % n];
            let next = pts[(i + 1) % n];
            let cur_image = field.sample(cur).expect("points stay inside the field");
            let mut best = local_energy(&pts, i, cur, cur_image, p);
            let mut best_pos = cur;
            for dy in -r..=r {
                for dx in -r..=r {
                    if dx == 0 && dy == 0 {
                        continue;
                    }
                    let cand = Point::new(cur.x + dx as f64, cur.y + dy as f64);
                    if cand == prev || cand == next {
                        continue;
                    }
                    let Some(image) = field.sample(cand) else {
                        continue;
                    };
                    let e = local_energy(&pts, i, cand, image, p);
                    if e < best - MOVE_EPSILON {
                        best = e;
                        best_pos = cand;
                    }
                }
            }
            if best_pos != cur {
                pts[i] = best_pos;
                moved += 1;
            }
        }
        let snapshot = Contour::new(pts.clone())?;
        trace.push(total_energy(&snapshot, field, p)?);
        if (moved as f64) < p.converge_fraction * n as f64 {
            break;
        }
    }
    Ok((Contour::new(pts)?, trace))
}

/// Even-odd scanline fill sampled at pixel centres `(x, y)`.
///
/// An edge crosses row `y` when exactly one endpoint lies strictly below it,
/// and a pixel is inside when an odd number of crossings lie at or left of
/// its centre. Left and top boundaries are therefore filled, right and bottom
/// are not.
pub fn contour_to_mask(c: &Contour, width: usize, height: usize) -> Result<BinaryMask> {
    let pts = c.points();
    if is_collinear(pts) {
        return Err(Error::DegenerateContour("all points collinear"));
    }
    let n = pts.len();
    let mut mask = BinaryMask::new(width, height);
    let mut crossings = Vec::with_capacity(n);
    for y in 0..height {
        let py = y as f64;
        crossings.clear();
        for i in 0..n {
            let (a, b) = (pts[i], pts[(i + 1) % n]);
            if (a.y > py) != (b.y > py) {
                crossings.push(a.x + (py - a.y) * (b.x - a.x) / (b.y - a.y));
            }
        }
        crossings.sort_by(f64::total_cmp);
        for span in crossings.chunks_exact(2) {
            let start = span[0].ceil().max(0.0);
            let end = (span[1].ceil() - 1.0).min(width as f64 - 1.0);
            if start > end {
                continue;
            }
            for x in start as usize..=end as usize {
                mask.set(x, y, true);
            }
        }
    }
    Ok(mask)
}

fn is_collinear(pts: &[Point]) -> bool {
    let a = pts[0];
    let Some(&b) = pts.iter().find(|&&q| q != a) else {
        return true;
    };
    pts.iter()
        .all(|&q| (b.x - a.x) * (q.y - a.y) - (b.y - a.y) * (q.x - a.x) == 0.0)
}
