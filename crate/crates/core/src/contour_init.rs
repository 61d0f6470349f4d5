//! Initial snake placement from detected keypoints.

use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::interest_points::Keypoint;

/// Outward scale applied to the seed polygon around its centroid.
pub const SEED_DILATION: f64 = 1.15;

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Point {
    pub x: f64,
    pub y: f64,
}

impl Point {
    pub const fn new(x: f64, y: f64) -> Self {
        Self { x, y }
    }

    pub fn distance(self, other: Self) -> f64 {
        (self.x - other.x).hypot(self.y - other.y)
    }

    fn lerp(self, other: Self, t: f64) -> Self {
        Self::new(
            self.x + (other.x - self.x) * t,
            self.y + (other.y - self.y) * t,
        )
    }
}

/// Closed polygon `v(s)`, `s = index / len`; the last point connects to the first.
#[derive(Debug, Clone, PartialEq)]
pub struct Contour {
    points: Vec<Point>,
}

impl Contour {
    /// At least 3 points, finite, no two cyclically consecutive points equal.
    pub fn new(points: Vec<Point>) -> Result<Self> {
        if points.len() < 3 {
            return Err(Error::DegenerateContour("fewer than 3 points"));
        }
        if points.iter().any(|p| !p.x.is_finite() || !p.y.is_finite()) {
            return Err(Error::DegenerateContour("non-finite coordinate"));
        }
        let n = points.len();
        if (0..n).any(|i| points[i] == points[(i + 1) % n]) {
            return Err(Error::DegenerateContour("repeated consecutive point"));
        }
        Ok(Self { points })
    }

    pub fn points(&self) -> &[Point] {
        &self.points
    }

    pub fn into_points(self) -> Vec<Point> {
        self.points
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn perimeter(&self) -> f64 {
        closed_perimeter(&self.points)
    }

    /// Mean of the vertices.
    pub fn centroid(&self) -> Point {
        vertex_mean(&self.points)
    }

    /// Shoelace area, positive for counter-clockwise order in x-right/y-up axes.
    pub fn signed_area(&self) -> f64 {
        signed_area(&self.points)
    }

    pub fn translated(&self, dx: f64, dy: f64) -> Self {
        Self {
            points: self
                .points
                .iter()
                .map(|p| Point::new(p.x + dx, p.y + dy))
                .collect(),
        }
    }

    pub fn scaled(&self, k: f64) -> Self {
        Self {
            points: self.points.iter().map(|p| Point::new(p.x * k, p.y * k)).collect(),
        }
    }

    pub fn reversed(&self) -> Self {
        let mut points = self.points.clone();
        points.reverse();
        Self { points }
    }
}

fn closed_perimeter(points: &[Point]) -> f64 {
    let n = points.len();
    (0..n).map(|i| points[i].distance(points[(i + 1) % n])).sum()
}

fn vertex_mean(points: &[Point]) -> Point {
    let n = points.len() as f64;
    let (sx, sy) = points
        .iter()
        .fold((0.0, 0.0), |(sx, sy), p| (sx + p.x, sy + p.y));
    Point::new(sx / n, sy / n)
}

fn signed_area(points: &[Point]) -> f64 {
    let n = points.len();
    0.5 * (0..n)
        .map(|i| {
            let (a, b) = (points[i], points[(i + 1) % n]);
            a.x * b.y - b.x * a.y
        })
        .sum::<f64>()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SeedStrategy {
    #[default]
    Hull,
    #[serde(alias = "random")]
    RandomSubset,
}

impl SeedStrategy {
    pub fn name(self) -> &'static str {
        match self {
            SeedStrategy::Hull => "hull",
            SeedStrategy::RandomSubset => "random",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct InitParams {
    pub strategy: SeedStrategy,
    pub num_points: usize,
    pub rng_seed: u64,
    pub fallback_margin: f64,
}

impl Default for InitParams {
    fn default() -> Self {
        Self {
            strategy: SeedStrategy::Hull,
            num_points: 60,
            rng_seed: 0,
            fallback_margin: 0.05,
        }
    }
}

impl InitParams {
    pub fn validate(&self) -> Result<()> {
        if self.num_points < 8 {
            return Err(Error::InvalidParams("num_points must be >= 8".into()));
        }
        if !(0.0..0.5).contains(&self.fallback_margin) {
            return Err(Error::InvalidParams(
                "fallback_margin must lie in [0, 0.5)".into(),
            ));
        }
        Ok(())
    }
}

/// Records how the seed contour was produced.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum SeedSource {
    Hull,
    Random,
    Fallback,
}

/// Builds the initial contour; never fails for valid params (falls back to
/// an inset rectangle when the keypoints do not span a polygon).
pub fn seed_contour(
    keypoints: &[Keypoint],
    dims: (usize, usize),
    params: &InitParams,
) -> Result<Contour> {
    seed_contour_traced(keypoints, dims, params).map(|(c, _)| c)
}

pub fn seed_contour_traced(
    keypoints: &[Keypoint],
    dims: (usize, usize),
    params: &InitParams,
) -> Result<(Contour, SeedSource)> {
    params.validate()?;
    let positions: Vec<Point> = keypoints.iter().map(|k| Point::new(k.x, k.y)).collect();

    let polygon = match params.strategy {
        SeedStrategy::Hull => convex_hull(&positions),
        SeedStrategy::RandomSubset => random_polygon(&positions, params),
    };
    let polygon = polygon.filter(|p| p.len() >= 3 && signed_area(p).abs() > 1e-9);

    match polygon {
        Some(poly) => {
            let center = vertex_mean(&poly);
            let (max_x, max_y) = ((dims.0 - 1) as f64, (dims.1 - 1) as f64);
            let dilated: Vec<Point> = poly
                .iter()
                .map(|p| {
                    let q = center.lerp(*p, SEED_DILATION);
                    Point::new(q.x.clamp(0.0, max_x), q.y.clamp(0.0, max_y))
                })
                .collect();
            let dilated = dedup_cyclic(dilated);
            let source = match params.strategy {
                SeedStrategy::Hull => SeedSource::Hull,
                SeedStrategy::RandomSubset => SeedSource::Random,
            };
            if dilated.len() >= 3 && signed_area(&dilated).abs() > 1e-9 {
                let c = resample_points(&dilated, params.num_points)?;
                return Ok((c, source));
            }
            Ok((fallback_rectangle(dims, params)?, SeedSource::Fallback))
        }
        None => Ok((fallback_rectangle(dims, params)?, SeedSource::Fallback)),
    }
}

fn fallback_rectangle(dims: (usize, usize), params: &InitParams) -> Result<Contour> {
    let (w, h) = (dims.0 as f64, dims.1 as f64);
    let (mx, my) = (w * params.fallback_margin, h * params.fallback_margin);
    let (x1, y1) = ((w - mx).min(w - 1.0), (h - my).min(h - 1.0));
    let corners = vec![
        Point::new(mx, my),
        Point::new(mx, y1),
        Point::new(x1, y1),
        Point::new(x1, my),
    ];
    let corners = dedup_cyclic(corners);
    if corners.len() < 3 {
        return Err(Error::DegenerateContour("image too small for a fallback contour"));
    }
    resample_points(&corners, params.num_points)
}

fn dedup_cyclic(mut points: Vec<Point>) -> Vec<Point> {
    points.dedup();
    while points.len() > 1 && points.first() == points.last() {
        points.pop();
    }
    points
}

/// Andrew's monotone chain; counter-clockwise (positive shoelace area), no
/// collinear vertices. `None` when fewer than three distinct points.
fn convex_hull(points: &[Point]) -> Option<Vec<Point>> {
    let mut pts = points.to_vec();
    pts.sort_by(|a, b| a.x.total_cmp(&b.x).then(a.y.total_cmp(&b.y)));
    pts.dedup();
    if pts.len() < 3 {
        return None;
    }
    let cross = |o: Point, a: Point, b: Point| (a.x - o.x) * (b.y - o.y) - (a.y - o.y) * (b.x - o.x);
    let mut hull: Vec<Point> = Vec::with_capacity(2 * pts.len());
    for pass in [&pts[..], &pts.iter().rev().copied().collect::<Vec<_>>()[..]] {
        let start = hull.len();
        for &p in pass {
            while hull.len() >= start + 2 && cross(hull[hull.len() - 2], hull[hull.len() - 1], p) <= 0.0 {
                hull.pop();
            }
            hull.push(p);
        }
        hull.pop();
    }
    Some(hull)
}

fn random_polygon(points: &[Point], params: &InitParams) -> Option<Vec<Point>> {
    let count = params.num_points.min(points.len());
    if count < 3 {
        return None;
    }
    let mut rng = ChaCha8Rng::seed_from_u64(params.rng_seed);
    let mut chosen: Vec<Point> = sample(&mut rng, points.len(), count)
        .into_iter()
        .map(|i| points[i])
        .collect();
    let c = vertex_mean(&chosen);
    chosen.sort_by(|a, b| {
        let (ta, tb) = ((a.y - c.y).atan2(a.x - c.x), (b.y - c.y).atan2(b.x - c.x));
        ta.total_cmp(&tb)
            .then(c.distance(*a).total_cmp(&c.distance(*b)))
    });
    let chosen = dedup_cyclic(chosen);
    (chosen.len() >= 3).then_some(chosen)
}

/// `n` points equally spaced by arc length, starting at point 0.
pub fn resample_contour(c: &Contour, n: usize) -> Result<Contour> {
    resample_points(c.points(), n)
}

fn resample_points(points: &[Point], n: usize) -> Result<Contour> {
    if n < 8 {
        return Err(Error::InvalidParams(format!("resample size {n} must be >= 8")));
    }
    let m = points.len();
    let perimeter = closed_perimeter(points);
    if perimeter.is_nan() || perimeter <= 0.0 {
        return Err(Error::DegenerateContour("zero perimeter"));
    }
    let step = perimeter / n as f64;
    let mut out = Vec::with_capacity(n);
    let mut edge = 0usize;
    let mut edge_start = 0.0;
    let mut edge_len = points[0].distance(points[1 % m]);
    for k in 0..n {
        let target = k as f64 * step;
        while edge < m - 1 && target >= edge_start + edge_len {
            edge_start += edge_len;
            edge += 1;
            edge_len = points[edge].distance(points[(edge + 1) % m]);
        }
        let t = if edge_len > 0.0 {
            ((target - edge_start) / edge_len).clamp(0.0, 1.0)
        } else {
            0.0
        };
        out.push(points[edge].lerp(points[(edge + 1) % m], t));
    }
    Contour::new(out)
}
