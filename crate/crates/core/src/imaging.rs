//! Grayscale rasters, sub-image partitioning and dense window extraction.

use std::fmt;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Bits per pixel of every [`GrayImage`].
pub const N_BITS: u32 = 8;

/// 8-bit single-channel raster stored row-major.
#[derive(Clone, PartialEq, Eq)]
pub struct GrayImage {
    width: usize,
    height: usize,
    pixels: Vec<u8>,
}

impl fmt::Debug for GrayImage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("GrayImage")
            .field("width", &self.width)
            .field("height", &self.height)
            .finish_non_exhaustive()
    }
}

impl GrayImage {
    pub fn new(width: usize, height: usize, pixels: Vec<u8>) -> Result<Self> {
        if pixels.len() != width * height {
            return Err(Error::Dimension(format!(
                "{} pixels supplied for a {width}x{height} image",
                pixels.len()
            )));
        }
        Ok(GrayImage {
            width,
            height,
            pixels,
        })
    }

    pub fn filled(width: usize, height: usize, value: u8) -> Self {
        GrayImage {
            width,
            height,
            pixels: vec![value; width * height],
        }
    }

    /// Builds an image from `f(row, col)`.
    pub fn from_fn(width: usize, height: usize, mut f: impl FnMut(usize, usize) -> u8) -> Self {
        let mut pixels = Vec::with_capacity(width * height);
        for row in 0..height {
            for col in 0..width {
                pixels.push(f(row, col));
            }
        }
        GrayImage {
            width,
            height,
            pixels,
        }
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn n_bits(&self) -> u32 {
        N_BITS
    }

    pub fn pixels(&self) -> &[u8] {
        &self.pixels
    }

    pub fn into_pixels(self) -> Vec<u8> {
        self.pixels
    }

    #[inline]
    pub fn get(&self, row: usize, col: usize) -> u8 {
        self.pixels[row * self.width + col]
    }

    /// Copies the `height x width` block whose top-left pixel is `(row, col)`.
    pub fn crop(&self, row: usize, col: usize, width: usize, height: usize) -> Result<GrayImage> {
        if row + height > self.height || col + width > self.width {
            return Err(Error::Dimension(format!(
                "crop {width}x{height} at ({row}, {col}) exceeds {}x{} image",
                self.width, self.height
            )));
        }
        let mut pixels = Vec::with_capacity(width * height);
        for r in row..row + height {
            let start = r * self.width + col;
            pixels.extend_from_slice(&self.pixels[start..start + width]);
        }
        Ok(GrayImage {
            width,
            height,
            pixels,
        })
    }

    /// Rotates a quarter turn clockwise.
    pub fn rotate90(&self) -> GrayImage {
        let (w, h) = (self.width, self.height);
        GrayImage::from_fn(h, w, |row, col| self.get(h - 1 - col, row))
    }

    /// Bilinear resize with pixel-center alignment.
    pub fn resize_bilinear(&self, width: usize, height: usize) -> Result<GrayImage> {
        if width == 0 || height == 0 || self.width == 0 || self.height == 0 {
            return Err(Error::Dimension("cannot resize to or from an empty image".into()));
        }
        let sx = self.width as f64 / width as f64;
        let sy = self.height as f64 / height as f64;
        let max_x = (self.width - 1) as f64;
        let max_y = (self.height - 1) as f64;
        Ok(GrayImage::from_fn(width, height, |row, col| {
            let y = ((row as f64 + 0.5) * sy - 0.5).clamp(0.0, max_y);
            let x = ((col as f64 + 0.5) * sx - 0.5).clamp(0.0, max_x);
            let (y0, x0) = (y.floor() as usize, x.floor() as usize);
            let (y1, x1) = ((y0 + 1).min(self.height - 1), (x0 + 1).min(self.width - 1));
            let (fy, fx) = (y - y0 as f64, x - x0 as f64);
            let top = self.get(y0, x0) as f64 * (1.0 - fx) + self.get(y0, x1) as f64 * fx;
            let bottom = self.get(y1, x0) as f64 * (1.0 - fx) + self.get(y1, x1) as f64 * fx;
            (top * (1.0 - fy) + bottom * fy).round().clamp(0.0, 255.0) as u8
        }))
    }

    /// Decodes a PNG, JPEG or PGM file and converts it to grayscale.
    pub fn open(path: impl AsRef<Path>) -> Result<GrayImage> {
        let path = path.as_ref();
        let decoded = image::ImageReader::open(path)
            .map_err(|e| Error::io(path, e))?
            .with_guessed_format()
            .map_err(|e| Error::io(path, e))?
            .decode()
            .map_err(|e| Error::Decode {
                path: path.to_path_buf(),
                message: e.to_string(),
            })?;
        to_grayscale(&Raster::from_dynamic(decoded)?)
    }

    pub fn save_png(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let buffer = image::GrayImage::from_raw(self.width as u32, self.height as u32, self.pixels.clone())
            .ok_or_else(|| Error::Dimension("pixel buffer does not match dimensions".into()))?;
        buffer
            .save_with_format(path, image::ImageFormat::Png)
            .map_err(|e| Error::Decode {
                path: path.to_path_buf(),
                message: e.to_string(),
            })
    }
}

/// A decoded raster prior to grayscale conversion.
#[derive(Debug, Clone)]
pub struct Raster {
    pub width: usize,
    pub height: usize,
    pub channels: u8,
    pub bit_depth: u8,
    /// Interleaved samples, row-major.
    pub data: Vec<u8>,
}

impl Raster {
    pub fn from_dynamic(img: image::DynamicImage) -> Result<Raster> {
        use image::DynamicImage as D;
        let (width, height) = (img.width() as usize, img.height() as usize);
        let (channels, data) = match img {
            D::ImageLuma8(buf) => (1, buf.into_raw()),
            D::ImageRgb8(buf) => (3, buf.into_raw()),
            other => {
                return Err(Error::InputFormat(format!(
                    "{:?} rasters are not supported (need 8-bit gray or RGB)",
                    other.color()
                )))
            }
        };
        Ok(Raster {
            width,
            height,
            channels,
            bit_depth: 8,
            data,
        })
    }
}

/// Converts a 1- or 3-channel 8-bit raster with luma weights 0.299/0.587/0.114.
pub fn to_grayscale(raster: &Raster) -> Result<GrayImage> {
    if raster.bit_depth != 8 {
        return Err(Error::InputFormat(format!(
            "bit depth {} is not supported",
            raster.bit_depth
        )));
    }
    let n = raster.width * raster.height;
    match raster.channels {
        1 => GrayImage::new(raster.width, raster.height, raster.data.clone()),
        3 => {
            if raster.data.len() != 3 * n {
                return Err(Error::Dimension("RGB buffer length mismatch".into()));
            }
            let pixels = raster
                .data
                .chunks_exact(3)
                .map(|px| {
                    let y = 0.299 * px[0] as f64 + 0.587 * px[1] as f64 + 0.114 * px[2] as f64;
                    y.round().clamp(0.0, 255.0) as u8
                })
                .collect();
            GrayImage::new(raster.width, raster.height, pixels)
        }
        c => Err(Error::InputFormat(format!("{c} channels are not supported"))),
    }
}

/// Sub-image grid of `rows x cols` cells tiling an image.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct SubImageGrid {
    rows: usize,
    cols: usize,
}

impl SubImageGrid {
    pub const WHOLE: SubImageGrid = SubImageGrid { rows: 1, cols: 1 };

    pub fn new(rows: usize, cols: usize) -> Result<Self> {
        if rows == 0 || cols == 0 {
            return Err(Error::Argument(format!("grid {rows}x{cols} must be at least 1x1")));
        }
        Ok(SubImageGrid { rows, cols })
    }

    pub fn square(n: usize) -> Result<Self> {
        Self::new(n, n)
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn cells(&self) -> usize {
        self.rows * self.cols
    }

    /// Half-open pixel ranges of cell `(i, j)` for an image of the given size.
    pub fn cell_bounds(&self, i: usize, j: usize, height: usize, width: usize) -> (usize, usize, usize, usize) {
        (
            split_point(i, height, self.rows),
            split_point(i + 1, height, self.rows),
            split_point(j, width, self.cols),
            split_point(j + 1, width, self.cols),
        )
    }
}

impl fmt::Display for SubImageGrid {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}x{}", self.rows, self.cols)
    }
}

impl FromStr for SubImageGrid {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim().to_ascii_lowercase();
        if s == "whole" {
            return Ok(Self::WHOLE);
        }
        let (r, c) = s
            .split_once('x')
            .ok_or_else(|| Error::Argument(format!("grid `{s}` is not of the form RxC")))?;
        let parse = |v: &str| {
            v.trim()
                .parse::<usize>()
                .map_err(|_| Error::Argument(format!("grid `{s}` is not of the form RxC")))
        };
        SubImageGrid::new(parse(r)?, parse(c)?)
    }
}

/// round(i * len / parts), with halves rounded up.
fn split_point(i: usize, len: usize, parts: usize) -> usize {
    (2 * i * len + parts) / (2 * parts)
}

/// Splits an image into grid cells, row-major.
pub fn split_subimages(img: &GrayImage, grid: SubImageGrid) -> Result<Vec<GrayImage>> {
    if grid.rows > img.height || grid.cols > img.width {
        return Err(Error::Dimension(format!(
            "grid {grid} is larger than the {}x{} image",
            img.width, img.height
        )));
    }
    let mut cells = Vec::with_capacity(grid.cells());
    for i in 0..grid.rows {
        for j in 0..grid.cols {
            let (r0, r1, c0, c1) = grid.cell_bounds(i, j, img.height, img.width);
            cells.push(img.crop(r0, c0, c1 - c0, r1 - r0)?);
        }
    }
    Ok(cells)
}

/// Square block of a parent image.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Window {
    pub origin: (usize, usize),
    pub side: usize,
    /// `side * side` intensities, row-major.
    pub data: Vec<u8>,
}

impl Window {
    pub fn new(side: usize, data: Vec<u8>) -> Result<Self> {
        if side == 0 || data.len() != side * side {
            return Err(Error::Dimension(format!(
                "{} values do not form a {side}x{side} window",
                data.len()
            )));
        }
        Ok(Window {
            origin: (0, 0),
            side,
            data,
        })
    }

    #[inline]
    pub fn get(&self, row: usize, col: usize) -> u8 {
        self.data[row * self.side + col]
    }
}

/// Number of window positions `(rows, cols)` for an image of the given size.
pub fn window_grid_dims(height: usize, width: usize, side: usize, stride: usize) -> Result<(usize, usize)> {
    if stride == 0 {
        return Err(Error::Argument("stride must be at least 1".into()));
    }
    if side == 0 || side > height || side > width {
        return Err(Error::Dimension(format!(
            "window side {side} does not fit a {width}x{height} image"
        )));
    }
    Ok(((height - side) / stride + 1, (width - side) / stride + 1))
}

/// All `side x side` windows at stride multiples, row-major.
pub fn extract_windows(img: &GrayImage, side: usize, stride: usize) -> Result<Vec<Window>> {
    let (rows, cols) = window_grid_dims(img.height, img.width, side, stride)?;
    let mut windows = Vec::with_capacity(rows * cols);
    for wr in 0..rows {
        for wc in 0..cols {
            let (r, c) = (wr * stride, wc * stride);
            let mut data = Vec::with_capacity(side * side);
            for row in r..r + side {
                let start = row * img.width + c;
                data.extend_from_slice(&img.pixels[start..start + side]);
            }
            windows.push(Window {
                origin: (r, c),
                side,
                data,
            });
        }
    }
    Ok(windows)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gray_raster_is_returned_unchanged() {
        let raster = Raster {
            width: 2,
            height: 1,
            channels: 1,
            bit_depth: 8,
            data: vec![7, 200],
        };
        assert_eq!(to_grayscale(&raster).unwrap().pixels(), &[7, 200]);
    }

    #[test]
    fn equal_channels_keep_their_value() {
        let raster = Raster {
            width: 3,
            height: 1,
            channels: 3,
            bit_depth: 8,
            data: vec![100; 9],
        };
        assert_eq!(to_grayscale(&raster).unwrap().pixels(), &[100, 100, 100]);
    }

    #[test]
    fn pure_red_uses_luma_weight() {
        let raster = Raster {
            width: 1,
            height: 1,
            channels: 3,
            bit_depth: 8,
            data: vec![255, 0, 0],
        };
        assert_eq!(to_grayscale(&raster).unwrap().pixels(), &[76]);
    }

    #[test]
    fn unsupported_rasters_are_rejected() {
        let mut raster = Raster {
            width: 1,
            height: 1,
            channels: 4,
            bit_depth: 8,
            data: vec![0; 4],
        };
        assert!(matches!(to_grayscale(&raster), Err(Error::InputFormat(_))));
        raster.channels = 1;
        raster.bit_depth = 16;
        assert!(matches!(to_grayscale(&raster), Err(Error::InputFormat(_))));
    }

    #[test]
    fn split_whole_and_thirds() {
        let img = GrayImage::filled(84, 112, 3);
        let whole = split_subimages(&img, SubImageGrid::WHOLE).unwrap();
        assert_eq!(whole.len(), 1);
        assert_eq!((whole[0].width(), whole[0].height()), (84, 112));

        let cells = split_subimages(&img, SubImageGrid::square(3).unwrap()).unwrap();
        assert_eq!(cells.len(), 9);
        assert_eq!((cells[0].height(), cells[0].width()), (37, 28));
        let area: usize = cells.iter().map(|c| c.width() * c.height()).sum();
        assert_eq!(area, 84 * 112);
    }

    #[test]
    fn split_exact_division() {
        let img = GrayImage::from_fn(10, 10, |r, c| (r * 10 + c) as u8);
        let cells = split_subimages(&img, SubImageGrid::square(2).unwrap()).unwrap();
        assert!(cells.iter().all(|c| c.width() == 5 && c.height() == 5));
        assert_eq!(cells[3].get(0, 0), 55);
    }

    #[test]
    fn split_rejects_oversized_grid() {
        let img = GrayImage::filled(4, 4, 0);
        assert!(matches!(
            split_subimages(&img, SubImageGrid::new(5, 1).unwrap()),
            Err(Error::Dimension(_))
        ));
    }

    #[test]
    fn window_counts() {
        assert_eq!(extract_windows(&GrayImage::filled(10, 10, 0), 10, 1).unwrap().len(), 1);
        assert_eq!(extract_windows(&GrayImage::filled(12, 12, 0), 10, 1).unwrap().len(), 9);
        assert_eq!(extract_windows(&GrayImage::filled(84, 112, 0), 10, 1).unwrap().len(), 7725);
        assert!(matches!(
            extract_windows(&GrayImage::filled(8, 12, 0), 10, 1),
            Err(Error::Dimension(_))
        ));
    }

    #[test]
    fn windows_are_row_major_copies() {
        let img = GrayImage::from_fn(5, 4, |r, c| (r * 5 + c) as u8);
        let windows = extract_windows(&img, 2, 2).unwrap();
        let origins: Vec<_> = windows.iter().map(|w| w.origin).collect();
        assert_eq!(origins, vec![(0, 0), (0, 2), (2, 0), (2, 2)]);
        assert_eq!(windows[3].data, vec![12, 13, 17, 18]);
    }

    #[test]
    fn grid_parsing() {
        assert_eq!("3x3".parse::<SubImageGrid>().unwrap(), SubImageGrid::square(3).unwrap());
        assert_eq!("whole".parse::<SubImageGrid>().unwrap(), SubImageGrid::WHOLE);
        assert!("0x2".parse::<SubImageGrid>().is_err());
        assert!("abc".parse::<SubImageGrid>().is_err());
    }

    #[test]
    fn rotate_four_times_is_identity() {
        let img = GrayImage::from_fn(3, 2, |r, c| (r * 3 + c) as u8);
        let rot = img.rotate90();
        assert_eq!((rot.width(), rot.height()), (2, 3));
        assert_eq!(rot.rotate90().rotate90().rotate90(), img);
    }
}
