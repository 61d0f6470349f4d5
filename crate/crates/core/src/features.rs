//! Lesion / healthy-skin colour statistics.
//!
//! Means and population variances (divisor `n`) for R, G, B on the 0–255
//! scale, hue in degrees, and saturation/value as fractions. Hue is averaged
//! arithmetically, not circularly.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::evaluation::BinaryMask;
use crate::raster::{rgb_to_hsv, Histogram, RasterImage};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Region {
    Lesion,
    Healthy,
}

impl Region {
    fn name(self) -> &'static str {
        match self {
            Region::Lesion => "lesion",
            Region::Healthy => "healthy",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ChannelStats {
    pub mean: f64,
    pub variance: f64,
    pub histogram: Histogram,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RegionFeatures {
    pub region: Region,
    pub pixel_count: u64,
    pub r: ChannelStats,
    pub g: ChannelStats,
    pub b: ChannelStats,
    pub h: ChannelStats,
    pub s: ChannelStats,
    pub v: ChannelStats,
}

impl RegionFeatures {
    /// Channels in R, G, B, H, S, V order.
    pub fn channels(&self) -> [&ChannelStats; 6] {
        [&self.r, &self.g, &self.b, &self.h, &self.s, &self.v]
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FeatureReport {
    pub image_id: String,
    pub width: usize,
    pub height: usize,
    pub lesion: RegionFeatures,
    pub healthy: RegionFeatures,
}

impl FeatureReport {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes") + "\n"
    }
}

/// Hue bin: `[0, 360)` split into 256 equal bins.
#[inline]
pub fn hue_bin(h: f64) -> u8 {
    ((h / 360.0 * 256.0).floor() as usize).min(255) as u8
}

#[inline]
pub fn unit_bin(f: f64) -> u8 {
    (f * 255.0).round().clamp(0.0, 255.0) as u8
}

/// Welford accumulator plus histogram for one channel.
#[derive(Default)]
struct Accumulator {
    n: u64,
    mean: f64,
    m2: f64,
    hist: Histogram,
}

impl Accumulator {
    fn push(&mut self, value: f64, bin: u8) {
        self.n += 1;
        let delta = value - self.mean;
        self.mean += delta / self.n as f64;
        self.m2 += delta * (value - self.mean);
        self.hist.add(bin);
    }

    fn finish(self) -> ChannelStats {
        ChannelStats {
            mean: self.mean,
            variance: if self.n > 0 { (self.m2 / self.n as f64).max(0.0) } else { 0.0 },
            histogram: self.hist,
        }
    }
}

fn collect_region(img: &RasterImage, mask: &BinaryMask, region: Region) -> Result<RegionFeatures> {
    let want = region == Region::Lesion;
    let mut acc: [Accumulator; 6] = Default::default();
    for y in 0..img.height() {
        for x in 0..img.width() {
            if mask.get(x, y) != want {
                continue;
            }
            let p = img.pixel(x, y);
            let hsv = rgb_to_hsv(p[0], p[1], p[2]);
            acc[0].push(f64::from(p[0]), p[0]);
            acc[1].push(f64::from(p[1]), p[1]);
            acc[2].push(f64::from(p[2]), p[2]);
            acc[3].push(hsv.h, hue_bin(hsv.h));
            acc[4].push(hsv.s, unit_bin(hsv.s));
            acc[5].push(hsv.v, unit_bin(hsv.v));
        }
    }
    let pixel_count = acc[0].n;
    if pixel_count == 0 {
        return Err(Error::EmptyRegion(region.name()));
    }
    let [r, g, b, h, s, v] = acc.map(Accumulator::finish);
    Ok(RegionFeatures {
        region,
        pixel_count,
        r,
        g,
        b,
        h,
        s,
        v,
    })
}

pub fn region_stats(img: &RasterImage, mask: &BinaryMask, image_id: &str) -> Result<FeatureReport> {
    img.require_channels(3)?;
    if img.dims() != mask.dims() {
        return Err(Error::dims(img.dims(), mask.dims()));
    }
    Ok(FeatureReport {
        image_id: image_id.to_string(),
        width: img.width(),
        height: img.height(),
        lesion: collect_region(img, mask, Region::Lesion)?,
        healthy: collect_region(img, mask, Region::Healthy)?,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn two_pass(values: &[f64]) -> (f64, f64) {
        let n = values.len() as f64;
        let mean = values.iter().sum::<f64>() / n;
        let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
        (mean, var)
    }

    #[test]
    fn constant_image() {
        let img = RasterImage::filled(8, 6, &[100, 150, 200]).unwrap();
        let mask = BinaryMask::from_fn(8, 6, |x, _| x < 3);
        let rep = region_stats(&img, &mask, "c").unwrap();
        for region in [&rep.lesion, &rep.healthy] {
            assert_eq!((region.r.mean, region.g.mean, region.b.mean), (100.0, 150.0, 200.0));
            assert!(region.channels().iter().all(|c| c.variance == 0.0));
        }
        assert_eq!(rep.lesion.pixel_count + rep.healthy.pixel_count, 48);
        assert_eq!(rep.lesion.pixel_count, 18);
    }

    #[test]
    fn black_and_white_halves() {
        let img = RasterImage::rgb_from_fn(10, 4, |x, _| if x >= 5 { [255; 3] } else { [0; 3] }).unwrap();
        let mask = BinaryMask::from_fn(10, 4, |x, _| x >= 5);
        let rep = region_stats(&img, &mask, "bw").unwrap();
        assert_eq!(rep.lesion.v.mean, 1.0);
        assert_eq!(rep.healthy.v.mean, 0.0);
        assert_eq!(rep.lesion.s.mean, 0.0);
        assert_eq!(rep.lesion.v.histogram.bins()[255], 20);
    }

    #[test]
    fn errors() {
        let img = RasterImage::filled(4, 4, &[1, 2, 3]).unwrap();
        assert_eq!(region_stats(&img, &BinaryMask::new(4, 4), "x"), Err(Error::EmptyRegion("lesion")));
        assert_eq!(
            region_stats(&img, &BinaryMask::new(4, 4).inverted(), "x"),
            Err(Error::EmptyRegion("healthy"))
        );
        assert!(matches!(region_stats(&img, &BinaryMask::new(4, 3), "x"), Err(Error::DimensionMismatch { .. })));
        let gray = RasterImage::filled(4, 4, &[1]).unwrap();
        assert!(matches!(region_stats(&gray, &BinaryMask::new(4, 4), "x"), Err(Error::ChannelMismatch { .. })));
    }

    #[test]
    fn random_images_match_two_pass_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        for _ in 0..20 {
            let img = RasterImage::rgb_from_fn(16, 16, |_, _| rng.random()).unwrap();
            let mut mask = BinaryMask::from_fn(16, 16, |_, _| rng.random_bool(0.4));
            mask.set(0, 0, true);
            mask.set(1, 0, false);
            let rep = region_stats(&img, &mask, "r").unwrap();
            for (region, want) in [(&rep.lesion, true), (&rep.healthy, false)] {
                let mut cols: [Vec<f64>; 6] = Default::default();
                for y in 0..16 {
                    for x in 0..16 {
                        if mask.get(x, y) == want {
                            let p = img.pixel(x, y);
                            let hsv = rgb_to_hsv(p[0], p[1], p[2]);
                            for (c, v) in [f64::from(p[0]), f64::from(p[1]), f64::from(p[2]), hsv.h, hsv.s, hsv.v]
                                .into_iter()
                                .enumerate()
                            {
                                cols[c].push(v);
                            }
                        }
                    }
                }
                for (stats, values) in region.channels().iter().zip(&cols) {
                    let (mean, var) = two_pass(values);
                    assert!((stats.mean - mean).abs() <= 1e-9 * mean.abs().max(1.0));
                    assert!((stats.variance - var).abs() <= 1e-9 * var.abs().max(1.0));
                    assert_eq!(stats.histogram.total(), region.pixel_count);
                }
            }
        }
    }

    #[test]
    fn polarity_swap_swaps_regions() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let img = RasterImage::rgb_from_fn(12, 9, |_, _| rng.random()).unwrap();
        let mask = BinaryMask::from_fn(12, 9, |x, y| (x + y) % 3 == 0);
        let a = region_stats(&img, &mask, "p").unwrap();
        let b = region_stats(&img, &mask.inverted(), "p").unwrap();
        assert_eq!(a.lesion.channels(), b.healthy.channels());
        assert_eq!(a.healthy.channels(), b.lesion.channels());
        assert_eq!(a.lesion.pixel_count, b.healthy.pixel_count);
    }

    #[test]
    fn bins() {
        assert_eq!(hue_bin(0.0), 0);
        assert_eq!(hue_bin(359.999), 255);
        assert_eq!(hue_bin(180.0), 128);
        assert_eq!(unit_bin(1.0), 255);
        assert_eq!(unit_bin(128.0 / 255.0), 128);
    }
}
