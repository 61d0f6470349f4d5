//! Multi-class Otsu thresholding by exhaustive search.
//!
//! Class `c` covers gray levels `(t_{c-1}, t_c]`, so class 0 holds every
//! value `<= t_1`. The search maximises `Σ_c S_c² / W_c` (pixel count `W_c`,
//! intensity sum `S_c`), which differs from the between-class variance only
//! by terms that are constant for a given histogram.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::evaluation::BinaryMask;
use crate::raster::{channel_histogram, Histogram, RasterImage};

pub const MAX_CLASSES: usize = 4;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ThresholdSet {
    pub thresholds: Vec<u8>,
    pub k: usize,
    pub between_class_variance: f64,
}

/// Which Otsu class(es) count as lesion.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LesionRule {
    #[default]
    #[serde(alias = "darkest")]
    DarkestClass,
    #[serde(alias = "brightest")]
    BrightestClass,
    ClassIndex(usize),
}

impl LesionRule {
    fn class(self, k: usize) -> Result<usize> {
        match self {
            LesionRule::DarkestClass => Ok(0),
            LesionRule::BrightestClass => Ok(k - 1),
            LesionRule::ClassIndex(i) if i < k => Ok(i),
            LesionRule::ClassIndex(i) => Err(Error::InvalidParams(format!(
                "lesion class {i} out of range for {k} classes"
            ))),
        }
    }
}

/// Prefix tables over a histogram: counts and intensity-weighted counts.
struct Moments {
    count: Vec<u64>,
    sum: Vec<u64>,
}

impl Moments {
    fn new(bins: &[u64]) -> Self {
        let mut count = Vec::with_capacity(bins.len() + 1);
        let mut sum = Vec::with_capacity(bins.len() + 1);
        count.push(0);
        sum.push(0);
        for (i, &c) in bins.iter().enumerate() {
            count.push(count[i] + c);
            sum.push(sum[i] + c * i as u64);
        }
        Self { count, sum }
    }

    /// `S² / W` for the levels `lo..=hi`; 0 for an empty class.
    #[inline]
    fn term(&self, lo: usize, hi: usize) -> f64 {
        let w = self.count[hi + 1] - self.count[lo];
        if w == 0 {
            return 0.0;
        }
        let s = (self.sum[hi + 1] - self.sum[lo]) as f64;
        s * s / w as f64
    }
}

/// Exhaustive multi-threshold search over an arbitrary-length histogram.
///
/// Returns the lexicographically smallest optimal threshold tuple and the
/// achieved between-class variance (in squared bin units).
pub fn multi_otsu_bins(bins: &[u64], k: usize) -> Result<(Vec<usize>, f64)> {
    if !(2..=MAX_CLASSES).contains(&k) {
        return Err(Error::InvalidParams(format!(
            "class count {k} must lie in 2..={MAX_CLASSES}"
        )));
    }
    let nonempty = bins.iter().filter(|&&c| c > 0).count();
    if nonempty < k {
        return Err(Error::DegenerateHistogram {
            nonempty,
            classes: k,
        });
    }
    let n = bins.len();
    let m = Moments::new(bins);
    let last = n - 1;

    // term[lo][hi] for every class interval, so the inner loops are lookups
    let mut table = vec![0.0; n * n];
    for lo in 0..n {
        for hi in lo..n {
            table[lo * n + hi] = m.term(lo, hi);
        }
    }
    let t = |lo: usize, hi: usize| table[lo * n + hi];

    let mut best = f64::NEG_INFINITY;
    let mut best_cuts = Vec::new();
    match k {
        2 => {
            for a in 0..last {
                let v = t(0, a) + t(a + 1, last);
                if v > best {
                    best = v;
                    best_cuts = vec![a];
                }
            }
        }
        3 => {
            for a in 0..last - 1 {
                let head = t(0, a);
                for b in a + 1..last {
                    let v = head + t(a + 1, b) + t(b + 1, last);
                    if v > best {
                        best = v;
                        best_cuts = vec![a, b];
                    }
                }
            }
        }
        _ => {
            for a in 0..last - 2 {
                let head = t(0, a);
                for b in a + 1..last - 1 {
                    let mid = head + t(a + 1, b);
                    for c in b + 1..last {
                        let v = mid + t(b + 1, c) + t(c + 1, last);
                        if v > best {
                            best = v;
                            best_cuts = vec![a, b, c];
                        }
                    }
                }
            }
        }
    }
    let total = m.count[n] as f64;
    let mean = m.sum[n] as f64 / total;
    let variance = (best / total - mean * mean).max(0.0);
    Ok((best_cuts, variance))
}

pub fn multi_otsu_thresholds(hist: &Histogram, k: usize) -> Result<ThresholdSet> {
    let (cuts, between_class_variance) = multi_otsu_bins(hist.bins(), k)?;
    Ok(ThresholdSet {
        thresholds: cuts.into_iter().map(|c| c as u8).collect(),
        k,
        between_class_variance,
    })
}

/// Class index of a gray value: the number of thresholds strictly below it.
#[inline]
pub fn class_of(value: u8, thresholds: &[u8]) -> usize {
    thresholds.iter().filter(|&&t| value > t).count()
}

/// Class map of a single-channel image.
pub fn classify(gray: &RasterImage, thresholds: &[u8]) -> Result<Vec<u8>> {
    gray.require_channels(1)?;
    Ok(gray
        .data()
        .iter()
        .map(|&v| class_of(v, thresholds) as u8)
        .collect())
}

/// Pixel rectangle `[x, x+w) × [y, y+h)` restricting the thresholding.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Roi {
    pub x: usize,
    pub y: usize,
    pub w: usize,
    pub h: usize,
}

impl std::str::FromStr for Roi {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let parts: Vec<usize> = s
            .split(',')
            .map(|p| p.trim().parse::<usize>())
            .collect::<std::result::Result<_, _>>()
            .map_err(|_| Error::InvalidParams(format!("roi '{s}' must be x,y,w,h")))?;
        match parts[..] {
            [x, y, w, h] => Ok(Roi { x, y, w, h }),
            _ => Err(Error::InvalidParams(format!("roi '{s}' must be x,y,w,h"))),
        }
    }
}

pub fn segment_otsu(gray: &RasterImage, k: usize, rule: LesionRule) -> Result<BinaryMask> {
    segment_otsu_roi(gray, k, rule, None)
}

/// Otsu segmentation whose thresholds come from `roi` only; pixels outside
/// the ROI are labelled healthy.
pub fn segment_otsu_roi(
    gray: &RasterImage,
    k: usize,
    rule: LesionRule,
    roi: Option<Roi>,
) -> Result<BinaryMask> {
    gray.require_channels(1)?;
    let lesion = rule.class(k)?;
    let roi = roi.unwrap_or(Roi {
        x: 0,
        y: 0,
        w: gray.width(),
        h: gray.height(),
    });
    let window = gray.crop(roi.x, roi.y, roi.w, roi.h)?;
    let hist = channel_histogram(&window, 0, None)?;
    let set = multi_otsu_thresholds(&hist, k)?;
    let inside = |x: usize, y: usize| {
        x >= roi.x && x < roi.x + roi.w && y >= roi.y && y < roi.y + roi.h
    };
    Ok(BinaryMask::from_fn(gray.width(), gray.height(), |x, y| {
        inside(x, y) && class_of(gray.sample(x, y, 0), &set.thresholds) == lesion
    }))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    /// Textbook two-class Otsu: maximise w0·w1·(μ0 − μ1)².
    fn classic_otsu(bins: &[u64]) -> usize {
        let total: u64 = bins.iter().sum();
        let total_sum: f64 = bins.iter().enumerate().map(|(i, &c)| i as f64 * c as f64).sum();
        let (mut w0, mut s0) = (0u64, 0.0f64);
        let (mut best, mut arg) = (f64::NEG_INFINITY, 0);
        for (t, &count) in bins.iter().enumerate().take(bins.len() - 1) {
            w0 += count;
            s0 += t as f64 * count as f64;
            let w1 = total - w0;
            if w0 == 0 || w1 == 0 {
                if best == f64::NEG_INFINITY {
                    best = 0.0;
                    arg = t;
                }
                continue;
            }
            let (m0, m1) = (s0 / w0 as f64, (total_sum - s0) / w1 as f64);
            let v = (w0 as f64 / total as f64) * (w1 as f64 / total as f64) * (m0 - m1) * (m0 - m1);
            if v > best {
                best = v;
                arg = t;
            }
        }
        arg
    }

    fn between_class_variance(bins: &[u64], cuts: &[usize]) -> f64 {
        let total: f64 = bins.iter().map(|&c| c as f64).sum();
        let mean: f64 = bins.iter().enumerate().map(|(i, &c)| i as f64 * c as f64).sum::<f64>() / total;
        let mut bounds = vec![0usize];
        bounds.extend(cuts.iter().map(|c| c + 1));
        bounds.push(bins.len());
        bounds
            .windows(2)
            .map(|r| {
                let w: f64 = bins[r[0]..r[1]].iter().map(|&c| c as f64).sum();
                if w == 0.0 {
                    return 0.0;
                }
                let mu = (r[0]..r[1]).map(|i| i as f64 * bins[i] as f64).sum::<f64>() / w;
                (w / total) * (mu - mean) * (mu - mean)
            })
            .sum()
    }

    fn peaks(at: &[(usize, u64)]) -> Histogram {
        let mut bins = [0u64; 256];
        for &(i, c) in at {
            bins[i] = c;
        }
        Histogram::from_bins(bins)
    }

    #[test]
    fn two_delta_peaks() {
        let set = multi_otsu_thresholds(&peaks(&[(50, 100), (200, 300)]), 2).unwrap();
        assert_eq!(set.thresholds, vec![50]);
        // w0 w1 (μ0 − μ1)² = 0.25 · 0.75 · 150²
        assert!((set.between_class_variance - 0.25 * 0.75 * 150.0 * 150.0).abs() < 1e-6);
    }

    #[test]
    fn three_delta_peaks() {
        let set = multi_otsu_thresholds(&peaks(&[(30, 10), (120, 10), (220, 10)]), 3).unwrap();
        assert_eq!(set.thresholds, vec![30, 120]);
    }

    #[test]
    fn four_classes_on_four_peaks() {
        let set = multi_otsu_thresholds(&peaks(&[(10, 5), (70, 9), (140, 3), (250, 7)]), 4).unwrap();
        assert_eq!(set.thresholds, vec![10, 70, 140]);
    }

    #[test]
    fn degenerate_inputs() {
        assert_eq!(
            multi_otsu_thresholds(&peaks(&[(10, 5), (70, 9)]), 3),
            Err(Error::DegenerateHistogram { nonempty: 2, classes: 3 })
        );
        assert!(matches!(multi_otsu_thresholds(&peaks(&[(1, 1), (2, 1)]), 5), Err(Error::InvalidParams(_))));
        assert!(matches!(multi_otsu_thresholds(&peaks(&[(1, 1), (2, 1)]), 1), Err(Error::InvalidParams(_))));
    }

    #[test]
    fn two_class_matches_classic_otsu() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..200 {
            let mut bins = [0u64; 256];
            for b in bins.iter_mut() {
                if rng.random_bool(0.5) {
                    *b = rng.random_range(0..1000);
                }
            }
            bins[rng.random_range(0..128)] += 1;
            bins[rng.random_range(128..256)] += 1;
            let set = multi_otsu_thresholds(&Histogram::from_bins(bins), 2).unwrap();
            assert_eq!(set.thresholds[0] as usize, classic_otsu(&bins));
        }
    }

    #[test]
    fn three_and_four_classes_match_exhaustive_search() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        for k in [3, 4] {
            for _ in 0..10 {
                let bins: Vec<u64> = (0..32).map(|_| rng.random_range(0..50)).collect();
                let (cuts, var) = multi_otsu_bins(&bins, k).unwrap();
                let mut best = f64::NEG_INFINITY;
                let n = bins.len();
                let mut visit = |c: &[usize]| best = best.max(between_class_variance(&bins, c));
                for a in 0..n - 1 {
                    for b in a + 1..n - 1 {
                        if k == 3 {
                            visit(&[a, b]);
                        } else {
                            for c in b + 1..n - 1 {
                                visit(&[a, b, c]);
                            }
                        }
                    }
                }
                assert!((var - best).abs() <= 1e-9 * best, "k={k}: {var} vs {best}");
                assert!((between_class_variance(&bins, &cuts) - best).abs() <= 1e-9 * best);
            }
        }
    }

    fn disk(invert: bool) -> (RasterImage, BinaryMask) {
        let mask = BinaryMask::from_fn(48, 40, |x, y| (x as f64 - 22.0).powi(2) + (y as f64 - 19.0).powi(2) <= 100.0);
        let img = RasterImage::gray_from_fn(48, 40, |x, y| {
            let v = if mask.get(x, y) { 40 } else { 200 };
            if invert { 255 - v } else { v }
        })
        .unwrap();
        (img, mask)
    }

    #[test]
    fn bimodal_disk_segmentation() {
        let (img, mask) = disk(false);
        assert_eq!(segment_otsu(&img, 2, LesionRule::DarkestClass).unwrap(), mask);
        let (inv, _) = disk(true);
        assert_eq!(segment_otsu(&inv, 2, LesionRule::BrightestClass).unwrap(), mask);
        assert_eq!(segment_otsu(&img, 2, LesionRule::ClassIndex(1)).unwrap(), mask.inverted());
        assert!(segment_otsu(&img, 2, LesionRule::ClassIndex(2)).is_err());
    }

    #[test]
    fn constant_image_is_degenerate() {
        let img = RasterImage::filled(10, 10, &[77]).unwrap();
        assert!(matches!(
            segment_otsu(&img, 4, LesionRule::DarkestClass),
            Err(Error::DegenerateHistogram { .. })
        ));
    }

    #[test]
    fn roi_limits_segmentation() {
        let (img, mask) = disk(false);
        let roi = Roi { x: 5, y: 4, w: 30, h: 30 };
        let out = segment_otsu_roi(&img, 2, LesionRule::DarkestClass, Some(roi)).unwrap();
        assert_eq!(out, mask);
        let corner = Roi { x: 40, y: 0, w: 8, h: 8 };
        assert!(segment_otsu_roi(&img, 2, LesionRule::DarkestClass, Some(corner)).is_err());
        assert_eq!("1, 2,3,4".parse::<Roi>().unwrap(), Roi { x: 1, y: 2, w: 3, h: 4 });
        assert!("1,2,3".parse::<Roi>().is_err());
    }

    #[test]
    fn classes_partition_image() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let img = RasterImage::gray_from_fn(20, 20, |_, _| rng.random()).unwrap();
        let set = multi_otsu_thresholds(&channel_histogram(&img, 0, None).unwrap(), 4).unwrap();
        let classes = classify(&img, &set.thresholds).unwrap();
        let masks: Vec<_> = (0..4)
            .map(|c| segment_otsu(&img, 4, LesionRule::ClassIndex(c)).unwrap())
            .collect();
        for i in 0..400 {
            let hits = masks.iter().filter(|m| m.bits()[i]).count();
            assert_eq!(hits, 1);
            assert!(masks[classes[i] as usize].bits()[i]);
        }
    }
}
