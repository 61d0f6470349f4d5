//! Synthetic lesion images with exact ground-truth masks.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::evaluation::BinaryMask;
use crate::raster::{luma, RasterImage};
use crate::snake::gaussian_blur;

/// Minimum distance between the lesion's bounding radius and the image border.
pub const MIN_MARGIN: f64 = 8.0;

const SYNTH20_MANIFEST: &str = include_str!("../data/synth20.json");

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum LesionShape {
    Disk {
        r: f64,
    },
    /// Semi-axes `a`, `b`; `theta` rotates the `a` axis from +x, radians.
    Ellipse {
        a: f64,
        b: f64,
        theta: f64,
    },
    /// Radius `r·(1 + Σ a_k cos(kθ + φ_k))` for `k = 2..=harmonics+1`, with
    /// seeded `a_k ≤ perturb_amplitude / (k − 1)` and phases `φ_k`.
    Blob {
        r: f64,
        perturb_amplitude: f64,
        harmonics: usize,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SynthParams {
    pub rng_seed: u64,
    pub width: usize,
    pub height: usize,
    /// Lesion centre; `None` centres it in the image.
    pub center: Option<[f64; 2]>,
    pub shape: LesionShape,
    pub lesion_color: [f64; 3],
    /// Per-image uniform offset in `[-jitter, jitter]` applied to each channel mean.
    pub lesion_jitter: f64,
    pub skin_color: [f64; 3],
    pub skin_jitter: f64,
    pub noise_sigma: f64,
    pub edge_softness: f64,
}

impl Default for SynthParams {
    fn default() -> Self {
        Self {
            rng_seed: 0,
            width: 256,
            height: 256,
            center: None,
            shape: LesionShape::Blob {
                r: 30.0,
                perturb_amplitude: 0.12,
                harmonics: 3,
            },
            lesion_color: [110.0, 70.0, 60.0],
            lesion_jitter: 10.0,
            skin_color: [225.0, 180.0, 160.0],
            skin_jitter: 10.0,
            noise_sigma: 6.0,
            edge_softness: 1.5,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthManifest {
    pub name: String,
    pub cases: Vec<SynthParams>,
}

/// The fixed 20-image suite (seeds 1..=20) used for end-to-end scoring.
pub fn synth20() -> SynthManifest {
    serde_json::from_str(SYNTH20_MANIFEST).expect("bundled synth20 manifest parses")
}

pub fn synth20_manifest_json() -> &'static str {
    SYNTH20_MANIFEST
}

/// Inside test resolved for one image: shape plus seeded blob harmonics.
struct Geometry {
    cx: f64,
    cy: f64,
    shape: LesionShape,
    harmonics: Vec<(f64, f64, f64)>,
}

impl Geometry {
    fn contains(&self, x: f64, y: f64) -> bool {
        let (dx, dy) = (x - self.cx, y - self.cy);
        match self.shape {
            LesionShape::Disk { r } => dx * dx + dy * dy <= r * r,
            LesionShape::Ellipse { a, b, theta } => {
                let (s, c) = theta.sin_cos();
                let u = dx * c + dy * s;
                let v = -dx * s + dy * c;
                (u / a).powi(2) + (v / b).powi(2) <= 1.0
            }
            LesionShape::Blob { r, .. } => {
                let t = dy.atan2(dx);
                let scale: f64 = 1.0
                    + self
                        .harmonics
                        .iter()
                        .map(|&(k, a, phase)| a * (k * t + phase).cos())
                        .sum::<f64>();
                (dx * dx + dy * dy).sqrt() <= r * scale
            }
        }
    }

    fn bounding_radius(&self) -> f64 {
        match self.shape {
            LesionShape::Disk { r } => r,
            LesionShape::Ellipse { a, b, .. } => a.max(b),
            LesionShape::Blob { r, .. } => {
                r * (1.0 + self.harmonics.iter().map(|h| h.1.abs()).sum::<f64>())
            }
        }
    }
}

impl SynthParams {
    fn validate(&self) -> Result<()> {
        let positive = |v: f64| v.is_finite() && v > 0.0;
        let non_negative = |v: f64| v.is_finite() && v >= 0.0;
        let shape_ok = match self.shape {
            LesionShape::Disk { r } => positive(r),
            LesionShape::Ellipse { a, b, theta } => positive(a) && positive(b) && theta.is_finite(),
            LesionShape::Blob {
                r,
                perturb_amplitude,
                harmonics,
            } => positive(r) && (0.0..0.5).contains(&perturb_amplitude) && harmonics <= 8,
        };
        if !shape_ok || self.width == 0 || self.height == 0 {
            return Err(Error::InvalidParams("invalid lesion shape or image size".into()));
        }
        if ![self.lesion_jitter, self.skin_jitter, self.noise_sigma, self.edge_softness]
            .into_iter()
            .all(non_negative)
        {
            return Err(Error::InvalidParams(
                "jitter, noise and softness must be non-negative".into(),
            ));
        }
        Ok(())
    }
}

fn color_luma(c: [f64; 3]) -> f64 {
    0.299 * c[0] + 0.587 * c[1] + 0.114 * c[2]
}

fn jittered(base: [f64; 3], jitter: f64, rng: &mut ChaCha8Rng) -> [f64; 3] {
    base.map(|c| {
        let offset = if jitter > 0.0 {
            rng.random_range(-jitter..=jitter)
        } else {
            0.0
        };
        (c + offset).clamp(0.0, 255.0)
    })
}

/// Renders the lesion image and its analytic pixel-centre mask.
pub fn gen_lesion_image(p: &SynthParams) -> Result<(RasterImage, BinaryMask)> {
    p.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(p.rng_seed);
    let lesion = jittered(p.lesion_color, p.lesion_jitter, &mut rng);
    let skin = jittered(p.skin_color, p.skin_jitter, &mut rng);
    if color_luma(lesion) >= color_luma(skin) {
        return Err(Error::InvalidParams("lesion must be darker than skin".into()));
    }

    let harmonics = match p.shape {
        LesionShape::Blob {
            perturb_amplitude,
            harmonics,
            ..
        } => (2..harmonics + 2)
            .map(|k| {
                let a = perturb_amplitude * rng.random_range(0.5..=1.0) / (k - 1) as f64;
                let phase = rng.random_range(0.0..std::f64::consts::TAU);
                (k as f64, a, phase)
            })
            .collect(),
        _ => Vec::new(),
    };
    let [cx, cy] = p
        .center
        .unwrap_or([(p.width - 1) as f64 / 2.0, (p.height - 1) as f64 / 2.0]);
    let geometry = Geometry {
        cx,
        cy,
        shape: p.shape,
        harmonics,
    };
    let reach = geometry.bounding_radius() + MIN_MARGIN;
    if cx - reach < 0.0
        || cy - reach < 0.0
        || cx + reach > (p.width - 1) as f64
        || cy + reach > (p.height - 1) as f64
    {
        return Err(Error::ShapeOutOfBounds);
    }

    let (w, h) = (p.width, p.height);
    let mask = BinaryMask::from_fn(w, h, |x, y| geometry.contains(x as f64, y as f64));
    let hard: Vec<f64> = mask.bits().iter().map(|&b| if b { 1.0 } else { 0.0 }).collect();
    let alpha = gaussian_blur(&hard, w, h, p.edge_softness);

    let noise = Normal::new(0.0, p.noise_sigma.max(f64::MIN_POSITIVE))
        .map_err(|e| Error::InvalidParams(e.to_string()))?;
    let mut data = Vec::with_capacity(w * h * 3);
    for a in alpha {
        for c in 0..3 {
            let mut v = a * lesion[c] + (1.0 - a) * skin[c];
            if p.noise_sigma > 0.0 {
                v += noise.sample(&mut rng);
            }
            data.push(v.round().clamp(0.0, 255.0) as u8);
        }
    }
    Ok((RasterImage::new(w, h, 3, data)?, mask))
}

/// Mean luma of lesion and skin pixels, for sanity checks.
pub fn region_luma_means(img: &RasterImage, mask: &BinaryMask) -> (f64, f64) {
    let (mut ls, mut ln, mut ss, mut sn) = (0.0, 0usize, 0.0, 0usize);
    for y in 0..img.height() {
        for x in 0..img.width() {
            let p = img.pixel(x, y);
            let l = f64::from(luma(p[0], p[1], p[2]));
            if mask.get(x, y) {
                ls += l;
                ln += 1;
            } else {
                ss += l;
                sn += 1;
            }
        }
    }
    (ls / ln.max(1) as f64, ss / sn.max(1) as f64)
}
