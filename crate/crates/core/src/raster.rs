//! In-memory 8-bit rasters, integral images, HSV conversion and histograms.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::evaluation::BinaryMask;

/// An 8-bit image with 1 (gray) or 3 (RGB) interleaved channels, row-major.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RasterImage {
    width: usize,
    height: usize,
    channels: usize,
    data: Vec<u8>,
}

impl RasterImage {
    pub fn new(width: usize, height: usize, channels: usize, data: Vec<u8>) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(Error::InvalidImage(format!(
                "zero-sized image {width}x{height}"
            )));
        }
        if channels != 1 && channels != 3 {
            return Err(Error::InvalidImage(format!(
                "unsupported channel count {channels}"
            )));
        }
        if data.len() != width * height * channels {
            return Err(Error::InvalidImage(format!(
                "buffer holds {} samples, expected {}",
                data.len(),
                width * height * channels
            )));
        }
        Ok(Self {
            width,
            height,
            channels,
            data,
        })
    }

    /// Image with every sample of every pixel set from `pixel`.
    pub fn filled(width: usize, height: usize, pixel: &[u8]) -> Result<Self> {
        let data = pixel
            .iter()
            .copied()
            .cycle()
            .take(width * height * pixel.len())
            .collect();
        Self::new(width, height, pixel.len(), data)
    }

    /// Single-channel image built from a per-pixel function.
    pub fn gray_from_fn(
        width: usize,
        height: usize,
        mut f: impl FnMut(usize, usize) -> u8,
    ) -> Result<Self> {
        let mut data = Vec::with_capacity(width * height);
        for y in 0..height {
            for x in 0..width {
                data.push(f(x, y));
            }
        }
        Self::new(width, height, 1, data)
    }

    /// Three-channel image built from a per-pixel function.
    pub fn rgb_from_fn(
        width: usize,
        height: usize,
        mut f: impl FnMut(usize, usize) -> [u8; 3],
    ) -> Result<Self> {
        let mut data = Vec::with_capacity(width * height * 3);
        for y in 0..height {
            for x in 0..width {
                data.extend_from_slice(&f(x, y));
            }
        }
        Self::new(width, height, 3, data)
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn channels(&self) -> usize {
        self.channels
    }

    pub fn data(&self) -> &[u8] {
        &self.data
    }

    pub fn into_data(self) -> Vec<u8> {
        self.data
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.width, self.height)
    }

    #[inline]
    pub fn sample(&self, x: usize, y: usize, channel: usize) -> u8 {
        self.data[(y * self.width + x) * self.channels + channel]
    }

    #[inline]
    pub fn set_sample(&mut self, x: usize, y: usize, channel: usize, value: u8) {
        self.data[(y * self.width + x) * self.channels + channel] = value;
    }

    /// Samples of one pixel (length == channels).
    pub fn pixel(&self, x: usize, y: usize) -> &[u8] {
        let i = (y * self.width + x) * self.channels;
        &self.data[i..i + self.channels]
    }

    pub fn require_channels(&self, expected: usize) -> Result<()> {
        if self.channels != expected {
            return Err(Error::ChannelMismatch {
                expected,
                actual: self.channels,
            });
        }
        Ok(())
    }

    /// Copy of the rectangle `[x, x+w) × [y, y+h)`.
    pub fn crop(&self, x: usize, y: usize, w: usize, h: usize) -> Result<Self> {
        if w == 0 || h == 0 || x + w > self.width || y + h > self.height {
            return Err(Error::OutOfBounds(format!(
                "crop {x},{y},{w},{h} of {}x{} image",
                self.width, self.height
            )));
        }
        let mut data = Vec::with_capacity(w * h * self.channels);
        for row in y..y + h {
            let start = (row * self.width + x) * self.channels;
            data.extend_from_slice(&self.data[start..start + w * self.channels]);
        }
        Self::new(w, h, self.channels, data)
    }
}

/// BT.601 luma of one RGB sample triple, rounded half-up.
#[inline]
pub fn luma(r: u8, g: u8, b: u8) -> u8 {
    let weighted = 299 * u32::from(r) + 587 * u32::from(g) + 114 * u32::from(b);
    ((weighted + 500) / 1000).min(255) as u8
}

/// Converts an RGB image to single-channel luma.
pub fn to_grayscale(img: &RasterImage) -> Result<RasterImage> {
    img.require_channels(3)?;
    let data = img
        .data
        .chunks_exact(3)
        .map(|p| luma(p[0], p[1], p[2]))
        .collect();
    RasterImage::new(img.width, img.height, 1, data)
}

/// Inclusive pixel rectangle: covers columns `x0..=x1` and rows `y0..=y1`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Rect {
    pub x0: usize,
    pub y0: usize,
    pub x1: usize,
    pub y1: usize,
}

impl Rect {
    pub fn new(x0: usize, y0: usize, x1: usize, y1: usize) -> Self {
        Self { x0, y0, x1, y1 }
    }

    /// Rectangle of `w × h` pixels with its top-left corner at `(x, y)`.
    pub fn from_origin(x: usize, y: usize, w: usize, h: usize) -> Self {
        Self::new(x, y, x + w - 1, y + h - 1)
    }
}

/// Cumulative-sum table: entry `(x, y)` holds the sum of every source pixel
/// `(i, j)` with `i <= x` and `j <= y`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct IntegralImage {
    width: usize,
    height: usize,
    sums: Vec<u64>,
}

impl IntegralImage {
    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn sums(&self) -> &[u64] {
        &self.sums
    }

    /// Table entry with the `-1` row/column reading as zero.
    #[inline]
    fn at(&self, x: isize, y: isize) -> u64 {
        if x < 0 || y < 0 {
            0
        } else {
            self.sums[y as usize * self.width + x as usize]
        }
    }

    pub fn entry(&self, x: usize, y: usize) -> u64 {
        self.sums[y * self.width + x]
    }

    pub fn total(&self) -> u64 {
        *self.sums.last().expect("non-empty table")
    }

    /// Sum of source pixels inside `rect` from four table lookups.
    pub fn box_sum(&self, rect: Rect) -> Result<u64> {
        if rect.x0 > rect.x1 || rect.y0 > rect.y1 || rect.x1 >= self.width || rect.y1 >= self.height
        {
            return Err(Error::OutOfBounds(format!(
                "rectangle {rect:?} in {}x{} integral image",
                self.width, self.height
            )));
        }
        Ok(self.box_sum_signed(
            rect.x0 as isize,
            rect.y0 as isize,
            rect.x1 as isize,
            rect.y1 as isize,
        ) as u64)
    }

    /// Unchecked inclusive box sum. Callers keep the rectangle in bounds.
    #[inline]
    pub(crate) fn box_sum_signed(&self, x0: isize, y0: isize, x1: isize, y1: isize) -> i64 {
        let d = self.at(x1, y1);
        let b = self.at(x1, y0 - 1);
        let c = self.at(x0 - 1, y1);
        let a = self.at(x0 - 1, y0 - 1);
        ((d + a) - (b + c)) as i64
    }

    /// Box sum with the rectangle clamped to the image; empty after clamping gives 0.
    pub(crate) fn box_sum_clamped(&self, x0: isize, y0: isize, x1: isize, y1: isize) -> i64 {
        let x0 = x0.max(0);
        let y0 = y0.max(0);
        let x1 = x1.min(self.width as isize - 1);
        let y1 = y1.min(self.height as isize - 1);
        if x0 > x1 || y0 > y1 {
            return 0;
        }
        self.box_sum_signed(x0, y0, x1, y1)
    }
}

/// Builds the integral image of a single-channel raster.
pub fn build_integral(gray: &RasterImage) -> Result<IntegralImage> {
    gray.require_channels(1)?;
    let (w, h) = gray.dims();
    let mut sums = vec![0u64; w * h];
    for y in 0..h {
        let mut row = 0u64;
        for x in 0..w {
            row += u64::from(gray.data[y * w + x]);
            let above = if y > 0 { sums[(y - 1) * w + x] } else { 0 };
            sums[y * w + x] = row + above;
        }
    }
    Ok(IntegralImage {
        width: w,
        height: h,
        sums,
    })
}

/// Hue in degrees `[0, 360)`, saturation and value in `[0, 1]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct HsvPixel {
    pub h: f64,
    pub s: f64,
    pub v: f64,
}

/// Hexcone RGB to HSV. Achromatic pixels get `h == 0`.
pub fn rgb_to_hsv(r: u8, g: u8, b: u8) -> HsvPixel {
    let (rf, gf, bf) = (f64::from(r), f64::from(g), f64::from(b));
    let max = r.max(g).max(b);
    let min = r.min(g).min(b);
    let v = f64::from(max) / 255.0;
    if max == min {
        return HsvPixel { h: 0.0, s: 0.0, v };
    }
    let delta = f64::from(max - min);
    let s = delta / f64::from(max);
    let sector = if max == r {
        (gf - bf) / delta
    } else if max == g {
        (bf - rf) / delta + 2.0
    } else {
        (rf - gf) / delta + 4.0
    };
    let mut h = 60.0 * sector;
    if h < 0.0 {
        h += 360.0;
    }
    if h >= 360.0 {
        h -= 360.0;
    }
    HsvPixel { h, s, v }
}

/// 256-bin count histogram.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Histogram {
    #[serde(with = "bins_serde")]
    bins: [u64; 256],
    total: u64,
}

mod bins_serde {
    use serde::Serializer;

    pub fn serialize<S: Serializer>(bins: &[u64; 256], s: S) -> Result<S::Ok, S::Error> {
        s.collect_seq(bins.iter())
    }
}

impl Default for Histogram {
    fn default() -> Self {
        Self {
            bins: [0; 256],
            total: 0,
        }
    }
}

impl Histogram {
    pub fn from_bins(bins: [u64; 256]) -> Self {
        let total = bins.iter().sum();
        Self { bins, total }
    }

    pub fn add(&mut self, bin: u8) {
        self.bins[bin as usize] += 1;
        self.total += 1;
    }

    pub fn bins(&self) -> &[u64; 256] {
        &self.bins
    }

    pub fn total(&self) -> u64 {
        self.total
    }

    pub fn nonempty_bins(&self) -> usize {
        self.bins.iter().filter(|&&c| c > 0).count()
    }
}

/// Histogram of one channel, restricted to masked-in pixels when a mask is given.
pub fn channel_histogram(
    img: &RasterImage,
    channel: usize,
    mask: Option<&BinaryMask>,
) -> Result<Histogram> {
    if channel >= img.channels {
        return Err(Error::BadChannel {
            index: channel,
            channels: img.channels,
        });
    }
    if let Some(m) = mask {
        if m.dims() != img.dims() {
            return Err(Error::dims(img.dims(), m.dims()));
        }
    }
    let mut hist = Histogram::default();
    for y in 0..img.height {
        for x in 0..img.width {
            if mask.is_none_or(|m| m.get(x, y)) {
                hist.add(img.sample(x, y, channel));
            }
        }
    }
    Ok(hist)
}
