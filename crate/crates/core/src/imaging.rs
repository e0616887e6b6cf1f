//! Frame decoding, luma conversion and scan-line rasterization.

use std::fmt;

use image::{DynamicImage, ImageFormat};
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum ImageError {
    #[error("unsupported image format (expected PNG, JPEG or binary PGM)")]
    UnsupportedFormat,
    #[error("corrupt image: {0}")]
    CorruptImage(String),
    #[error("image has a zero dimension ({width}x{height})")]
    ZeroDimension { width: u32, height: u32 },
    #[error("pixel buffer holds {actual} values, expected {expected}")]
    BufferSize { expected: usize, actual: usize },
    #[error("line {line}: point ({x}, {y}) lies outside the {width}x{height} image")]
    OutOfBounds {
        line: String,
        x: i64,
        y: i64,
        width: u32,
        height: u32,
    },
}

/// Row-major 8-bit luminance raster.
#[derive(Clone, PartialEq, Eq)]
pub struct GrayImage {
    width: u32,
    height: u32,
    data: Vec<u8>,
}

impl GrayImage {
    pub fn new(width: u32, height: u32, data: Vec<u8>) -> Result<Self, ImageError> {
        if width == 0 || height == 0 {
            return Err(ImageError::ZeroDimension { width, height });
        }
        let expected = width as usize * height as usize;
        if data.len() != expected {
            return Err(ImageError::BufferSize {
                expected,
                actual: data.len(),
            });
        }
        Ok(Self {
            width,
            height,
            data,
        })
    }

    /// Uniform image filled with `value`.
    pub fn filled(width: u32, height: u32, value: u8) -> Result<Self, ImageError> {
        Self::new(width, height, vec![value; width as usize * height as usize])
    }

    pub fn width(&self) -> u32 {
        self.width
    }

    pub fn height(&self) -> u32 {
        self.height
    }

    pub fn as_raw(&self) -> &[u8] {
        &self.data
    }

    pub fn into_raw(self) -> Vec<u8> {
        self.data
    }

    pub fn contains(&self, x: i64, y: i64) -> bool {
        x >= 0 && y >= 0 && x < self.width as i64 && y < self.height as i64
    }

    /// Pixel at `(x, y)`; panics when out of bounds.
    pub fn get(&self, x: u32, y: u32) -> u8 {
        assert!(x < self.width && y < self.height, "pixel ({x}, {y}) out of bounds");
        self.data[y as usize * self.width as usize + x as usize]
    }

    /// Encode as binary PGM (`P5`, maxval 255).
    pub fn to_pgm(&self) -> Vec<u8> {
        let header = format!("P5\n{} {}\n255\n", self.width, self.height);
        let mut out = Vec::with_capacity(header.len() + self.data.len());
        out.extend_from_slice(header.as_bytes());
        out.extend_from_slice(&self.data);
        out
    }
}

impl fmt::Debug for GrayImage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("GrayImage")
            .field("width", &self.width)
            .field("height", &self.height)
            .finish_non_exhaustive()
    }
}

/// BT.601 luma, rounded half away from zero.
///
/// Computed in integer thousandths so ties round exactly.
pub fn to_gray(r: u8, g: u8, b: u8) -> u8 {
    let weighted = 299 * r as u32 + 587 * g as u32 + 114 * b as u32;
    ((weighted + 500) / 1000).min(255) as u8
}

fn sniff_format(bytes: &[u8]) -> Option<ImageFormat> {
    if bytes.starts_with(b"\x89PNG\r\n\x1a\n") {
        Some(ImageFormat::Png)
    } else if bytes.starts_with(&[0xFF, 0xD8, 0xFF]) {
        Some(ImageFormat::Jpeg)
    } else if bytes.starts_with(b"P5") {
        Some(ImageFormat::Pnm)
    } else {
        None
    }
}

/// Decode a PNG, JPEG or binary PGM file into luminance.
///
/// Gray sources pass through untouched; color sources go through [`to_gray`]
/// per pixel. Alpha is dropped without compositing.
pub fn decode_image(bytes: &[u8]) -> Result<GrayImage, ImageError> {
    let format = sniff_format(bytes).ok_or(ImageError::UnsupportedFormat)?;
    if format == ImageFormat::Pnm {
        if let Some((width, height)) = pgm_dimensions(bytes) {
            if width == 0 || height == 0 {
                return Err(ImageError::ZeroDimension { width, height });
            }
        }
    }
    let decoded = image::load_from_memory_with_format(bytes, format)
        .map_err(|e| ImageError::CorruptImage(e.to_string()))?;
    let (width, height) = (decoded.width(), decoded.height());
    if width == 0 || height == 0 {
        return Err(ImageError::ZeroDimension { width, height });
    }
    let data = if decoded.color().has_color() {
        let rgb = match decoded {
            DynamicImage::ImageRgb8(buf) => buf,
            other => other.to_rgb8(),
        };
        rgb.pixels().map(|p| to_gray(p[0], p[1], p[2])).collect()
    } else {
        match decoded {
            DynamicImage::ImageLuma8(buf) => buf.into_raw(),
            other => other.to_luma8().into_raw(),
        }
    };
    GrayImage::new(width, height, data)
}

/// Width and height from a PGM header, if it parses.
fn pgm_dimensions(bytes: &[u8]) -> Option<(u32, u32)> {
    let mut fields = Vec::with_capacity(2);
    let mut i = 2;
    while fields.len() < 2 && i < bytes.len() {
        match bytes[i] {
            b'#' => {
                while i < bytes.len() && bytes[i] != b'\n' {
                    i += 1;
                }
            }
            c if c.is_ascii_whitespace() => i += 1,
            c if c.is_ascii_digit() => {
                let start = i;
                while i < bytes.len() && bytes[i].is_ascii_digit() {
                    i += 1;
                }
                fields.push(std::str::from_utf8(&bytes[start..i]).ok()?.parse().ok()?);
            }
            _ => return None,
        }
    }
    (fields.len() == 2).then(|| (fields[0], fields[1]))
}

/// A named pixel segment with inclusive endpoints.
///
/// Bounds are checked when sampling, since the same spec may be applied to
/// frames of different sizes.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct LineSpec {
    pub name: String,
    pub x0: i64,
    pub y0: i64,
    pub x1: i64,
    pub y1: i64,
}

impl LineSpec {
    pub fn new(name: impl Into<String>, x0: i64, y0: i64, x1: i64, y1: i64) -> Self {
        Self {
            name: name.into(),
            x0,
            y0,
            x1,
            y1,
        }
    }

    pub fn coords(&self) -> [i64; 4] {
        [self.x0, self.y0, self.x1, self.y1]
    }

    /// Number of pixels the rasterized segment visits.
    pub fn pixel_count(&self) -> usize {
        ((self.x1 - self.x0).abs().max((self.y1 - self.y0).abs()) + 1) as usize
    }

    pub fn reversed(&self) -> Self {
        Self::new(self.name.clone(), self.x1, self.y1, self.x0, self.y0)
    }

    /// Pixel coordinates in traversal order from `(x0, y0)` to `(x1, y1)`.
    ///
    /// The pixel set does not depend on direction: the segment is always
    /// walked from its lexicographically smaller endpoint and reversed if
    /// needed.
    pub fn rasterize(&self) -> Vec<(i64, i64)> {
        if (self.x0, self.y0) <= (self.x1, self.y1) {
            bresenham(self.x0, self.y0, self.x1, self.y1)
        } else {
            let mut pts = bresenham(self.x1, self.y1, self.x0, self.y0);
            pts.reverse();
            pts
        }
    }
}

fn bresenham(x0: i64, y0: i64, x1: i64, y1: i64) -> Vec<(i64, i64)> {
    let dx = (x1 - x0).abs();
    let dy = -(y1 - y0).abs();
    let sx = if x0 < x1 { 1 } else { -1 };
    let sy = if y0 < y1 { 1 } else { -1 };
    let mut err = dx + dy;
    let (mut x, mut y) = (x0, y0);
    let mut pts = Vec::with_capacity((dx.max(-dy) + 1) as usize);
    loop {
        pts.push((x, y));
        if x == x1 && y == y1 {
            break;
        }
        let e2 = 2 * err;
        if e2 >= dy {
            err += dy;
            x += sx;
        }
        if e2 <= dx {
            err += dx;
            y += sy;
        }
    }
    pts
}

/// Luminance values read along one line (the `r_i` of the spread statistics).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LineSample {
    pub line_name: String,
    pub values: Vec<u8>,
}

impl LineSample {
    pub fn count(&self) -> usize {
        self.values.len()
    }
}

/// Read the pixels under `spec`, in traversal order.
pub fn sample_line(img: &GrayImage, spec: &LineSpec) -> Result<LineSample, ImageError> {
    for (x, y) in [(spec.x0, spec.y0), (spec.x1, spec.y1)] {
        if !img.contains(x, y) {
            return Err(ImageError::OutOfBounds {
                line: spec.name.clone(),
                x,
                y,
                width: img.width,
                height: img.height,
            });
        }
    }
    let stride = img.width as usize;
    let values = spec
        .rasterize()
        .into_iter()
        .map(|(x, y)| img.data[y as usize * stride + x as usize])
        .collect();
    Ok(LineSample {
        line_name: spec.name.clone(),
        values,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use image::{ImageBuffer, Rgb, RgbImage};
    use proptest::prelude::*;
    use std::io::Cursor;

    fn png_bytes(img: &RgbImage) -> Vec<u8> {
        let mut out = Cursor::new(Vec::new());
        img.write_to(&mut out, ImageFormat::Png).unwrap();
        out.into_inner()
    }

    fn ramp(width: u32, height: u32) -> GrayImage {
        let data = (0..width * height).map(|i| (i % 251) as u8).collect();
        GrayImage::new(width, height, data).unwrap()
    }

    #[test]
    fn pgm_passthrough() {
        let bytes = b"P5\n2 2\n255\n\x00\x40\x80\xff";
        let img = decode_image(bytes).unwrap();
        assert_eq!((img.width(), img.height()), (2, 2));
        assert_eq!(img.as_raw(), &[0, 64, 128, 255]);
    }

    #[test]
    fn pgm_with_comment_header() {
        let bytes = b"P5\n# camera 3\n3 1\n255\n\x01\x02\x03";
        assert_eq!(decode_image(bytes).unwrap().as_raw(), &[1, 2, 3]);
    }

    #[test]
    fn white_png_maps_to_255() {
        let img = RgbImage::from_pixel(1, 1, Rgb([255, 255, 255]));
        let gray = decode_image(&png_bytes(&img)).unwrap();
        assert_eq!(gray.as_raw(), &[255]);
    }

    #[test]
    fn red_png_maps_to_bt601_luma() {
        // 0.299 * 255 = 76.245
        let img = RgbImage::from_pixel(16, 16, Rgb([255, 0, 0]));
        let gray = decode_image(&png_bytes(&img)).unwrap();
        assert_eq!(gray.as_raw().len(), 256);
        assert!(gray.as_raw().iter().all(|&v| v == 76));
    }

    #[test]
    fn gray_png_passes_through() {
        let buf: ImageBuffer<image::Luma<u8>, Vec<u8>> =
            ImageBuffer::from_raw(3, 1, vec![7, 77, 177]).unwrap();
        let mut out = Cursor::new(Vec::new());
        buf.write_to(&mut out, ImageFormat::Png).unwrap();
        assert_eq!(decode_image(&out.into_inner()).unwrap().as_raw(), &[7, 77, 177]);
    }

    #[test]
    fn rgba_png_ignores_alpha() {
        let buf: ImageBuffer<image::Rgba<u8>, Vec<u8>> =
            ImageBuffer::from_pixel(2, 2, image::Rgba([0, 255, 0, 0]));
        let mut out = Cursor::new(Vec::new());
        buf.write_to(&mut out, ImageFormat::Png).unwrap();
        let gray = decode_image(&out.into_inner()).unwrap();
        assert!(gray.as_raw().iter().all(|&v| v == 150));
    }

    #[test]
    fn jpeg_decodes() {
        let img = RgbImage::from_pixel(8, 8, Rgb([128, 128, 128]));
        let mut out = Cursor::new(Vec::new());
        img.write_to(&mut out, ImageFormat::Jpeg).unwrap();
        let gray = decode_image(&out.into_inner()).unwrap();
        assert_eq!((gray.width(), gray.height()), (8, 8));
        assert!(gray.as_raw().iter().all(|&v| v.abs_diff(128) <= 2));
    }

    #[test]
    fn unknown_magic_is_unsupported() {
        assert_eq!(decode_image(b"BM\x00\x00"), Err(ImageError::UnsupportedFormat));
        assert_eq!(decode_image(b""), Err(ImageError::UnsupportedFormat));
        // ASCII PGM is not accepted
        assert_eq!(decode_image(b"P2\n1 1\n255\n0\n"), Err(ImageError::UnsupportedFormat));
    }

    #[test]
    fn truncated_files_are_corrupt() {
        assert!(matches!(
            decode_image(b"P5\n4 4\n255\n\x00\x01"),
            Err(ImageError::CorruptImage(_))
        ));
        assert!(matches!(
            decode_image(b"\x89PNG\r\n\x1a\nnot really"),
            Err(ImageError::CorruptImage(_))
        ));
        assert!(matches!(
            decode_image(&[0xFF, 0xD8, 0xFF, 0x00]),
            Err(ImageError::CorruptImage(_))
        ));
    }

    #[test]
    fn zero_dimension_pgm() {
        assert_eq!(
            decode_image(b"P5\n0 4\n255\n"),
            Err(ImageError::ZeroDimension { width: 0, height: 4 })
        );
    }

    #[test]
    fn constructor_checks() {
        assert!(matches!(
            GrayImage::new(0, 3, vec![]),
            Err(ImageError::ZeroDimension { .. })
        ));
        assert!(matches!(
            GrayImage::new(2, 2, vec![0; 3]),
            Err(ImageError::BufferSize { expected: 4, actual: 3 })
        ));
    }

    #[test]
    fn pgm_encode_roundtrip() {
        let img = ramp(7, 5);
        assert_eq!(decode_image(&img.to_pgm()).unwrap(), img);
    }

    #[test]
    fn to_gray_spot_values() {
        assert_eq!(to_gray(0, 0, 0), 0);
        assert_eq!(to_gray(255, 255, 255), 255);
        // 0.587 * 255 = 149.685
        assert_eq!(to_gray(0, 255, 0), 150);
        // 0.114 * 255 = 29.07
        assert_eq!(to_gray(0, 0, 255), 29);
    }

    #[test]
    fn to_gray_matches_rational_reference() {
        // e.g. (0, 0, 125): 14.25 -> 14; (5, 0, 0): 1.495 -> 1; ties go up.
        assert_eq!(to_gray(0, 0, 125), 14);
        assert_eq!(to_gray(5, 0, 0), 1);
        assert_eq!(to_gray(10, 0, 5), 4); // 2.99 + 0.57 = 3.56
        for r in (0..=255u32).step_by(5) {
            for g in (0..=255u32).step_by(7) {
                for b in (0..=255u32).step_by(3) {
                    let num = 299 * r + 587 * g + 114 * b;
                    let floor = num / 1000;
                    let expect = if num % 1000 >= 500 { floor + 1 } else { floor };
                    assert_eq!(to_gray(r as u8, g as u8, b as u8) as u32, expect);
                }
            }
        }
    }

    #[test]
    fn horizontal_run() {
        let img = GrayImage::filled(4, 1, 9).unwrap();
        let s = sample_line(&img, &LineSpec::new("L", 0, 0, 3, 0)).unwrap();
        assert_eq!(s.values, vec![9, 9, 9, 9]);
        assert_eq!(s.count(), 4);
    }

    #[test]
    fn degenerate_line_is_one_pixel() {
        let img = ramp(6, 8);
        let s = sample_line(&img, &LineSpec::new("L", 2, 5, 2, 5)).unwrap();
        assert_eq!(s.values, vec![img.get(2, 5)]);
    }

    #[test]
    fn diagonal_visits_diagonal() {
        assert_eq!(
            LineSpec::new("L", 0, 0, 2, 2).rasterize(),
            vec![(0, 0), (1, 1), (2, 2)]
        );
    }

    #[test]
    fn shallow_line_steps() {
        // True y at x = 1 and x = 3 is 0.5 and 1.5; exact ties step.
        assert_eq!(
            LineSpec::new("L", 0, 0, 4, 2).rasterize(),
            vec![(0, 0), (1, 1), (2, 1), (3, 2), (4, 2)]
        );
        assert_eq!(
            LineSpec::new("L", 0, 0, 5, 1).rasterize(),
            vec![(0, 0), (1, 0), (2, 0), (3, 1), (4, 1), (5, 1)]
        );
    }

    #[test]
    fn out_of_bounds_names_coordinate() {
        let img = GrayImage::filled(4, 4, 0).unwrap();
        let err = sample_line(&img, &LineSpec::new("L2", 0, 0, 0, 4)).unwrap_err();
        assert_eq!(
            err,
            ImageError::OutOfBounds {
                line: "L2".into(),
                x: 0,
                y: 4,
                width: 4,
                height: 4
            }
        );
        assert!(sample_line(&img, &LineSpec::new("L1", -1, 0, 2, 0)).is_err());
    }

    fn spec_in(w: i64, h: i64) -> impl Strategy<Value = LineSpec> {
        (0..w, 0..h, 0..w, 0..h).prop_map(|(x0, y0, x1, y1)| LineSpec::new("L", x0, y0, x1, y1))
    }

    proptest! {
        #[test]
        fn count_matches_chebyshev_length(spec in spec_in(40, 30)) {
            let img = ramp(40, 30);
            let s = sample_line(&img, &spec).unwrap();
            prop_assert_eq!(s.count(), spec.pixel_count());
            let pts = spec.rasterize();
            prop_assert_eq!(pts.first().copied(), Some((spec.x0, spec.y0)));
            prop_assert_eq!(pts.last().copied(), Some((spec.x1, spec.y1)));
            // 8-connected
            for w in pts.windows(2) {
                prop_assert!((w[0].0 - w[1].0).abs() <= 1 && (w[0].1 - w[1].1).abs() <= 1);
            }
        }

        #[test]
        fn constant_image_constant_sample(spec in spec_in(20, 20), v in any::<u8>()) {
            let img = GrayImage::filled(20, 20, v).unwrap();
            let s = sample_line(&img, &spec).unwrap();
            prop_assert!(s.values.iter().all(|&x| x == v));
        }

        #[test]
        fn reversal_reverses_values(spec in spec_in(40, 30)) {
            let img = ramp(40, 30);
            let fwd = sample_line(&img, &spec).unwrap().values;
            let mut back = sample_line(&img, &spec.reversed()).unwrap().values;
            back.reverse();
            prop_assert_eq!(fwd, back);
        }

        #[test]
        fn to_gray_fixes_diagonal(v in any::<u8>()) {
            prop_assert_eq!(to_gray(v, v, v), v);
        }

        #[test]
        fn to_gray_monotone(r in any::<u8>(), g in any::<u8>(), b in any::<u8>(), ch in 0..3usize) {
            let base = to_gray(r, g, b);
            let bumped = match ch {
                0 => to_gray(r.saturating_add(1), g, b),
                1 => to_gray(r, g.saturating_add(1), b),
                _ => to_gray(r, g, b.saturating_add(1)),
            };
            prop_assert!(bumped >= base);
        }
    }
}
