//! Image decoding/encoding, atomic file writes and overlay rendering.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use image::{ColorType, DynamicImage, GrayImage, ImageFormat, RgbImage};

use crate::contour_init::Contour;
use crate::error::Error;
use crate::evaluation::BinaryMask;
use crate::raster::RasterImage;

/// Failures at the filesystem / codec boundary, kept apart from processing errors.
#[derive(Debug, thiserror::Error)]
pub enum IoError {
    #[error("{path}: {source}")]
    File {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("{path}: {source}")]
    Codec {
        path: PathBuf,
        source: image::ImageError,
    },
}

fn file_err(path: &Path) -> impl FnOnce(std::io::Error) -> IoError + '_ {
    move |source| IoError::File {
        path: path.to_path_buf(),
        source,
    }
}

fn decode(path: &Path) -> Result<DynamicImage, IoError> {
    let bytes = fs::read(path).map_err(file_err(path))?;
    image::load_from_memory(&bytes).map_err(|source| IoError::Codec {
        path: path.to_path_buf(),
        source,
    })
}

fn is_gray(color: ColorType) -> bool {
    matches!(
        color,
        ColorType::L8 | ColorType::La8 | ColorType::L16 | ColorType::La16
    )
}

/// Reads PNG, JPEG or PNM; gray inputs stay single-channel, everything else becomes RGB.
pub fn read_image(path: &Path) -> Result<Result<RasterImage, Error>, IoError> {
    let img = decode(path)?;
    let (w, h) = (img.width() as usize, img.height() as usize);
    Ok(if is_gray(img.color()) {
        RasterImage::new(w, h, 1, img.into_luma8().into_raw())
    } else {
        RasterImage::new(w, h, 3, img.into_rgb8().into_raw())
    })
}

/// Reads a single-channel 0/255 mask.
pub fn read_mask(path: &Path) -> Result<Result<BinaryMask, Error>, IoError> {
    let img = decode(path)?;
    if !is_gray(img.color()) {
        return Ok(Err(Error::InvalidImage(format!(
            "{}: mask must be a single-channel image",
            path.display()
        ))));
    }
    let (w, h) = (img.width() as usize, img.height() as usize);
    Ok(BinaryMask::from_bytes(w, h, img.into_luma8().as_raw()))
}

/// Writes `bytes` to a sibling temp file and renames it over `path`.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<(), IoError> {
    let dir = match path.parent() {
        Some(d) if !d.as_os_str().is_empty() => d.to_path_buf(),
        _ => PathBuf::from("."),
    };
    fs::create_dir_all(&dir).map_err(file_err(&dir))?;
    let name = path
        .file_name()
        .map(|n| n.to_string_lossy().into_owned())
        .unwrap_or_else(|| "out".into());
    let tmp = dir.join(format!(".{name}.{}.tmp", std::process::id()));
    let result = fs::File::create(&tmp)
        .and_then(|mut f| f.write_all(bytes).and_then(|_| f.sync_all()))
        .and_then(|_| fs::rename(&tmp, path));
    if result.is_err() {
        let _ = fs::remove_file(&tmp);
    }
    result.map_err(file_err(path))
}

fn encode_dynamic(img: DynamicImage, path: &Path) -> Result<Vec<u8>, IoError> {
    let mut buf = std::io::Cursor::new(Vec::new());
    img.write_to(&mut buf, ImageFormat::Png)
        .map_err(|source| IoError::Codec {
            path: path.to_path_buf(),
            source,
        })?;
    Ok(buf.into_inner())
}

/// PNG bytes for `img`; `path` only labels codec errors.
pub fn encode_png(img: &RasterImage, path: &Path) -> Result<Vec<u8>, IoError> {
    let (w, h) = (img.width() as u32, img.height() as u32);
    let dynamic = if img.channels() == 1 {
        DynamicImage::ImageLuma8(GrayImage::from_raw(w, h, img.data().to_vec()).expect("sized buffer"))
    } else {
        DynamicImage::ImageRgb8(RgbImage::from_raw(w, h, img.data().to_vec()).expect("sized buffer"))
    };
    encode_dynamic(dynamic, path)
}

pub fn write_png(path: &Path, img: &RasterImage) -> Result<(), IoError> {
    write_atomic(path, &encode_png(img, path)?)
}

/// 8-bit gray image, 0 healthy / 255 lesion.
pub fn mask_image(mask: &BinaryMask) -> RasterImage {
    RasterImage::new(mask.width(), mask.height(), 1, mask.to_bytes()).expect("mask dimensions are valid")
}

/// 8-bit gray PNG, 0 healthy / 255 lesion.
pub fn write_mask(path: &Path, mask: &BinaryMask) -> Result<(), IoError> {
    write_png(path, &mask_image(mask))
}

pub const OVERLAY_COLOR: [u8; 3] = [0, 255, 0];

fn to_rgb(img: &RasterImage) -> RasterImage {
    if img.channels() == 3 {
        return img.clone();
    }
    let data = img.data().iter().flat_map(|&v| [v, v, v]).collect();
    RasterImage::new(img.width(), img.height(), 3, data).expect("same dimensions")
}

/// Pixels of the closed 1-px polyline through the rounded contour points, clipped to the image.
pub fn polyline_pixels(c: &Contour, width: usize, height: usize) -> Vec<(usize, usize)> {
    let pts = c.points();
    let n = pts.len();
    let mut out = Vec::new();
    for i in 0..n {
        let (a, b) = (pts[i], pts[(i + 1) % n]);
        let (mut x0, mut y0) = (a.x.round() as i64, a.y.round() as i64);
        let (x1, y1) = (b.x.round() as i64, b.y.round() as i64);
        let (dx, dy) = ((x1 - x0).abs(), -(y1 - y0).abs());
        let (sx, sy) = (if x0 < x1 { 1 } else { -1 }, if y0 < y1 { 1 } else { -1 });
        let mut err = dx + dy;
        loop {
            if x0 >= 0 && y0 >= 0 && (x0 as usize) < width && (y0 as usize) < height {
                out.push((x0 as usize, y0 as usize));
            }
            if x0 == x1 && y0 == y1 {
                break;
            }
            let e2 = 2 * err;
            if e2 >= dy {
                err += dy;
                x0 += sx;
            }
            if e2 <= dx {
                err += dx;
                y0 += sy;
            }
        }
    }
    out
}

/// Lesion pixels with at least one 4-neighbour outside the lesion (or on the image border).
pub fn mask_boundary_pixels(mask: &BinaryMask) -> Vec<(usize, usize)> {
    let (w, h) = mask.dims();
    let mut out = Vec::new();
    for y in 0..h {
        for x in 0..w {
            if !mask.get(x, y) {
                continue;
            }
            let edge = x == 0
                || y == 0
                || x + 1 == w
                || y + 1 == h
                || !mask.get(x - 1, y)
                || !mask.get(x + 1, y)
                || !mask.get(x, y - 1)
                || !mask.get(x, y + 1);
            if edge {
                out.push((x, y));
            }
        }
    }
    out
}

/// RGB copy of `img` with `pixels` painted pure green.
pub fn render_overlay(img: &RasterImage, pixels: &[(usize, usize)]) -> RasterImage {
    let mut out = to_rgb(img);
    for &(x, y) in pixels {
        for (c, &v) in OVERLAY_COLOR.iter().enumerate() {
            out.set_sample(x, y, c, v);
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::contour_init::Point;

    #[test]
    fn mask_roundtrip_is_bit_identical() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("m.png");
        let mask = BinaryMask::from_fn(13, 7, |x, y| (x * y) % 3 == 1);
        write_mask(&path, &mask).unwrap();
        assert_eq!(read_mask(&path).unwrap().unwrap(), mask);
        let names: Vec<_> = fs::read_dir(dir.path()).unwrap().map(|e| e.unwrap().file_name()).collect();
        assert_eq!(names.len(), 1, "temp file left behind: {names:?}");
    }

    #[test]
    fn rgb_masks_are_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("rgb.png");
        write_png(&path, &RasterImage::filled(3, 3, &[255, 255, 255]).unwrap()).unwrap();
        assert!(read_mask(&path).unwrap().is_err());
        let gray = dir.path().join("g.png");
        write_png(&gray, &RasterImage::filled(3, 3, &[7]).unwrap()).unwrap();
        assert!(matches!(read_mask(&gray).unwrap(), Err(Error::MalformedMask { value: 7, .. })));
    }

    #[test]
    fn missing_file_is_io_error() {
        assert!(matches!(read_image(Path::new("/nonexistent/x.png")), Err(IoError::File { .. })));
    }

    #[test]
    fn polyline_is_closed_and_clipped() {
        let c = Contour::new(vec![Point::new(1.0, 1.0), Point::new(5.0, 1.0), Point::new(5.0, 4.0)]).unwrap();
        let px = polyline_pixels(&c, 10, 10);
        for p in [(1, 1), (3, 1), (5, 1), (5, 3), (5, 4), (3, 2)] {
            assert!(px.contains(&p), "{p:?}");
        }
        let big = Contour::new(vec![Point::new(-3.0, 2.0), Point::new(12.0, 2.0), Point::new(4.0, 8.0)]).unwrap();
        assert!(polyline_pixels(&big, 10, 10).iter().all(|&(x, y)| x < 10 && y < 10));
    }

    #[test]
    fn overlay_only_touches_listed_pixels() {
        let img = RasterImage::gray_from_fn(6, 5, |x, y| (x * 10 + y) as u8).unwrap();
        let out = render_overlay(&img, &[(2, 3)]);
        for y in 0..5 {
            for x in 0..6 {
                let v = img.sample(x, y, 0);
                let want = if (x, y) == (2, 3) { [0, 255, 0] } else { [v, v, v] };
                assert_eq!(out.pixel(x, y), &want);
            }
        }
    }

    #[test]
    fn boundary_of_square_mask() {
        let m = BinaryMask::from_fn(6, 6, |x, y| (1..5).contains(&x) && (1..5).contains(&y));
        let b = mask_boundary_pixels(&m);
        assert_eq!(b.len(), 12);
        assert!(!b.contains(&(2, 2)));
    }
}
