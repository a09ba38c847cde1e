//! Uniform rotation-invariant local binary patterns (riu2).
//!
//! Sample `k` of a `(p, r)` neighborhood sits at angle `2*pi*k/p` with
//! offset `(-r sin, r cos)` in (row, col), i.e. counter-clockwise starting
//! to the right of the center. Off-grid samples are bilinearly interpolated.
//! A sample at or above the center intensity sets its bit.

use serde::{Deserialize, Serialize};

use crate::descriptor::{l1_normalize, Descriptor, DescriptorParams};
use crate::error::{Error, Result};
use crate::imaging::{GrayImage, SubImageGrid};

/// Fractional coordinates this close to a pixel center read that pixel.
const SNAP: f64 = 1e-9;
/// Slack on the threshold comparison so interpolation round-off cannot flip exact ties.
const TIE_SLACK: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct LbpParams {
    pub points: usize,
    pub radius: u32,
}

impl LbpParams {
    pub fn new(points: usize, radius: u32) -> Result<Self> {
        let params = LbpParams { points, radius };
        params.validate()?;
        Ok(params)
    }

    pub fn validate(&self) -> Result<()> {
        if !(4..=32).contains(&self.points) {
            return Err(Error::Argument(format!(
                "{} sampling points is outside 4..=32",
                self.points
            )));
        }
        if self.radius == 0 {
            return Err(Error::Argument("radius must be at least 1".into()));
        }
        Ok(())
    }

    /// `p + 2` riu2 labels.
    pub fn n_labels(&self) -> usize {
        self.points + 2
    }
}

/// riu2 label of a `points`-bit circular pattern.
pub fn riu2_label(pattern: u32, points: usize) -> usize {
    let mask = if points == 32 { u32::MAX } else { (1u32 << points) - 1 };
    let pattern = pattern & mask;
    let rotated = ((pattern >> 1) | (pattern << (points - 1))) & mask;
    if (pattern ^ rotated).count_ones() <= 2 {
        pattern.count_ones() as usize
    } else {
        points + 1
    }
}

#[derive(Debug, Clone)]
struct Tap {
    dr: isize,
    dc: isize,
    weight: f64,
}

/// Interpolation taps for every sample of a `(p, r)` neighborhood.
#[derive(Debug, Clone)]
struct Neighborhood {
    samples: Vec<Vec<Tap>>,
    reach: usize,
}

impl Neighborhood {
    fn new(params: &LbpParams) -> Self {
        let r = params.radius as f64;
        let snap = |v: f64| {
            let rounded = v.round();
            if (v - rounded).abs() < SNAP {
                rounded
            } else {
                v
            }
        };
        let mut reach = 0;
        let samples = (0..params.points)
            .map(|k| {
                let theta = 2.0 * std::f64::consts::PI * k as f64 / params.points as f64;
                let dy = snap(-r * theta.sin());
                let dx = snap(r * theta.cos());
                let (y0, x0) = (dy.floor(), dx.floor());
                let (fy, fx) = (dy - y0, dx - x0);
                let mut taps = Vec::with_capacity(4);
                for (oy, wy) in [(0.0, 1.0 - fy), (1.0, fy)] {
                    for (ox, wx) in [(0.0, 1.0 - fx), (1.0, fx)] {
                        let weight = wy * wx;
                        if weight > 0.0 {
                            let (dr, dc) = ((y0 + oy) as isize, (x0 + ox) as isize);
                            reach = reach.max(dr.unsigned_abs()).max(dc.unsigned_abs());
                            taps.push(Tap { dr, dc, weight });
                        }
                    }
                }
                taps
            })
            .collect();
        Neighborhood { samples, reach }
    }

    /// Circular pattern at an interior center (bounds already checked).
    #[inline]
    fn pattern(&self, img: &GrayImage, row: usize, col: usize) -> u32 {
        let width = img.width() as isize;
        let pixels = img.pixels();
        let base = (row * img.width() + col) as isize;
        let center = pixels[base as usize] as f64 - TIE_SLACK;
        let mut pattern = 0u32;
        for (k, taps) in self.samples.iter().enumerate() {
            let value: f64 = taps
                .iter()
                .map(|t| t.weight * pixels[(base + t.dr * width + t.dc) as usize] as f64)
                .sum();
            if value >= center {
                pattern |= 1 << k;
            }
        }
        pattern
    }

    fn fits(&self, img: &GrayImage, row: usize, col: usize) -> bool {
        row >= self.reach && col >= self.reach && row + self.reach < img.height() && col + self.reach < img.width()
    }
}

/// riu2 label of the pixel at `center = (row, col)`.
pub fn lbp_code(img: &GrayImage, center: (usize, usize), params: &LbpParams) -> Result<usize> {
    params.validate()?;
    let hood = Neighborhood::new(params);
    let (row, col) = center;
    if !hood.fits(img, row, col) {
        return Err(Error::Boundary {
            row,
            col,
            radius: params.radius,
        });
    }
    Ok(riu2_label(hood.pattern(img, row, col), params.points))
}

/// Label of every pixel whose sampling circle fits the image; `None` elsewhere.
pub fn lbp_label_map(img: &GrayImage, params: &LbpParams) -> Result<Vec<Option<u8>>> {
    params.validate()?;
    let hood = Neighborhood::new(params);
    let mut labels = vec![None; img.width() * img.height()];
    for row in 0..img.height() {
        for col in 0..img.width() {
            if hood.fits(img, row, col) {
                let label = riu2_label(hood.pattern(img, row, col), params.points);
                labels[row * img.width() + col] = Some(label as u8);
            }
        }
    }
    Ok(labels)
}

/// Per-cell riu2 histograms, L1-normalized and concatenated row-major.
///
/// Labels are computed once over the whole image; each valid center counts
/// toward the cell that contains it.
pub fn lbp_descriptor(img: &GrayImage, grid: SubImageGrid, params: &LbpParams) -> Result<Descriptor> {
    if grid.rows() > img.height() || grid.cols() > img.width() {
        return Err(Error::Dimension(format!(
            "grid {grid} is larger than the {}x{} image",
            img.width(),
            img.height()
        )));
    }
    let labels = lbp_label_map(img, params)?;
    let bins = params.n_labels();
    let mut values = Vec::with_capacity(grid.cells() * bins);
    for i in 0..grid.rows() {
        for j in 0..grid.cols() {
            let (r0, r1, c0, c1) = grid.cell_bounds(i, j, img.height(), img.width());
            let mut hist = vec![0.0; bins];
            let mut seen = 0usize;
            for row in r0..r1 {
                for label in labels[row * img.width() + c0..row * img.width() + c1].iter().flatten() {
                    hist[*label as usize] += 1.0;
                    seen += 1;
                }
            }
            if seen == 0 {
                return Err(Error::Dimension(format!(
                    "cell ({i}, {j}) holds no center with a full radius-{} circle",
                    params.radius
                )));
            }
            l1_normalize(&mut hist);
            values.extend(hist);
        }
    }
    Ok(Descriptor {
        values,
        params: DescriptorParams::Lbp(*params),
        grid,
    })
}
