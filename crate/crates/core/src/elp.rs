//! Encoded Local Projections.
//!
//! Every `w x w` window of a region whose homogeneity is below the threshold
//! is projected at the anchor angle and its adjunct offsets. Each projection
//! is differenced along rho and the gradient is binarized by comparing
//! consecutive entries, giving a `w - 2` bit code per projection. Codes are
//! counted either in one shared histogram (merged) or in one histogram per
//! projection (detached).

use serde::{Deserialize, Serialize};

use crate::descriptor::{l1_normalize, Descriptor, DescriptorParams};
use crate::error::{Error, Result};
use crate::imaging::{split_subimages, window_grid_dims, GrayImage, SubImageGrid, N_BITS};
use crate::radon::{homogeneity_of, AnchorMode, AngleSet, Projection, Projector};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum HistogramMode {
    Merged,
    #[default]
    Detached,
}

impl HistogramMode {
    pub fn letter(&self) -> char {
        match self {
            HistogramMode::Merged => 'm',
            HistogramMode::Detached => 'd',
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ElpParams {
    pub window_side: usize,
    pub stride: usize,
    /// Windows with homogeneity at or above this value are skipped.
    pub homogeneity_threshold: f64,
    pub angle_set: AngleSet,
    pub histogram_mode: HistogramMode,
    pub anchor_mode: AnchorMode,
}

impl Default for ElpParams {
    fn default() -> Self {
        ElpParams {
            window_side: 10,
            stride: 1,
            homogeneity_threshold: 0.95,
            angle_set: AngleSet::default(),
            histogram_mode: HistogramMode::Detached,
            anchor_mode: AnchorMode::MaxAmplitude,
        }
    }
}

impl ElpParams {
    pub fn validate(&self) -> Result<()> {
        if self.window_side < 4 {
            return Err(Error::Argument(format!(
                "window side {} is below 4 (codes need at least 2 bits)",
                self.window_side
            )));
        }
        // u32 codes
        if self.window_side > 26 {
            return Err(Error::Argument(format!("window side {} is above 26", self.window_side)));
        }
        if self.stride == 0 {
            return Err(Error::Argument("stride must be at least 1".into()));
        }
        let t = self.homogeneity_threshold;
        if !(t > 0.0 && t <= 1.0) {
            return Err(Error::Argument(format!("homogeneity threshold {t} is outside (0, 1]")));
        }
        Ok(())
    }

    pub fn code_bits(&self) -> usize {
        self.window_side - 2
    }

    /// Distinct codes per projection, `2^(w-2)`.
    pub fn code_bins(&self) -> usize {
        1 << self.code_bits()
    }

    pub fn n_projections(&self) -> usize {
        self.angle_set.adjunct_offsets().len()
    }

    pub fn bins_per_region(&self) -> usize {
        match self.histogram_mode {
            HistogramMode::Merged => self.code_bins(),
            HistogramMode::Detached => self.n_projections() * self.code_bins(),
        }
    }
}

/// Min-max code of a projection: bit `i` (most significant first) is set
/// iff the gradient strictly increases from entry `i` to `i + 1`.
pub fn encode_projection(p: &Projection) -> Result<u32> {
    if p.values.len() < 4 {
        return Err(Error::Argument(format!(
            "projection of length {} is shorter than 4",
            p.values.len()
        )));
    }
    Ok(encode_values(&p.values))
}

#[inline]
fn encode_values(values: &[f64]) -> u32 {
    let mut code = 0u32;
    let mut prev = values[1] - values[0];
    for pair in values[1..].windows(2) {
        let grad = pair[1] - pair[0];
        code = (code << 1) | u32::from(grad > prev);
        prev = grad;
    }
    code
}

/// Dense per-window encoder reusing its scratch buffers across windows.
struct WindowEncoder {
    side: usize,
    threshold: f64,
    projector: Projector,
    block: Vec<u8>,
    sort_scratch: Vec<u8>,
    projections: Vec<Vec<f64>>,
}

impl WindowEncoder {
    fn new(params: &ElpParams) -> Self {
        let side = params.window_side;
        let projector = Projector::new(side, &params.angle_set, params.anchor_mode);
        WindowEncoder {
            side,
            threshold: params.homogeneity_threshold,
            projections: vec![vec![0.0; side]; projector.n_projections()],
            projector,
            block: Vec::with_capacity(side * side),
            sort_scratch: Vec::with_capacity(side * side),
        }
    }

    /// Codes of the window at `(row, col)` written to `codes`; false when gated.
    fn encode(&mut self, img: &GrayImage, row: usize, col: usize, codes: &mut [u32]) -> bool {
        let width = img.width();
        let pixels = img.pixels();
        self.block.clear();
        for r in row..row + self.side {
            let start = r * width + col;
            self.block.extend_from_slice(&pixels[start..start + self.side]);
        }
        if homogeneity_of(&self.block, N_BITS, &mut self.sort_scratch) >= self.threshold {
            return false;
        }
        self.projector.project(&self.block, &mut self.projections);
        for (code, p) in codes.iter_mut().zip(&self.projections) {
            *code = encode_values(p);
        }
        true
    }
}

/// Raw code counts of one region, laid out per `params.histogram_mode`.
pub fn elp_counts(region: &GrayImage, params: &ElpParams) -> Result<Vec<u64>> {
    params.validate()?;
    let (rows, cols) = window_grid_dims(region.height(), region.width(), params.window_side, params.stride)?;
    let bins = params.code_bins();
    let mut counts = vec![0u64; params.bins_per_region()];
    let mut encoder = WindowEncoder::new(params);
    let mut codes = vec![0u32; params.n_projections()];
    for wr in 0..rows {
        for wc in 0..cols {
            if !encoder.encode(region, wr * params.stride, wc * params.stride, &mut codes) {
                continue;
            }
            for (k, &code) in codes.iter().enumerate() {
                let offset = match params.histogram_mode {
                    HistogramMode::Merged => 0,
                    HistogramMode::Detached => k * bins,
                };
                counts[offset + code as usize] += 1;
            }
        }
    }
    Ok(counts)
}

/// L1-normalized histogram of a single region.
pub fn elp_histogram(region: &GrayImage, params: &ElpParams) -> Result<Descriptor> {
    let mut values: Vec<f64> = elp_counts(region, params)?.into_iter().map(|c| c as f64).collect();
    l1_normalize(&mut values);
    Ok(Descriptor {
        values,
        params: params.clone().into(),
        grid: SubImageGrid::WHOLE,
    })
}

/// Concatenated per-cell histograms in row-major grid order.
pub fn elp_descriptor(img: &GrayImage, grid: SubImageGrid, params: &ElpParams) -> Result<Descriptor> {
    params.validate()?;
    let cells = split_subimages(img, grid)?;
    let mut values = Vec::with_capacity(grid.cells() * params.bins_per_region());
    for (idx, cell) in cells.iter().enumerate() {
        if cell.width() < params.window_side || cell.height() < params.window_side {
            return Err(Error::Dimension(format!(
                "cell ({}, {}) is {}x{}, smaller than the {}px window",
                idx / grid.cols(),
                idx % grid.cols(),
                cell.width(),
                cell.height(),
                params.window_side
            )));
        }
        values.extend(elp_histogram(cell, params)?.values);
    }
    Ok(Descriptor {
        values,
        params: DescriptorParams::Elp(params.clone()),
        grid,
    })
}

/// Map of the codes of adjunct projection `offset_index` at every window
/// position, rescaled to `[0, 255]`; gated windows are 0.
pub fn elp_code_image(img: &GrayImage, params: &ElpParams, offset_index: usize) -> Result<GrayImage> {
    params.validate()?;
    if offset_index >= params.n_projections() {
        return Err(Error::Argument(format!(
            "offset index {offset_index} is out of range 0..{}",
            params.n_projections()
        )));
    }
    let (rows, cols) = window_grid_dims(img.height(), img.width(), params.window_side, params.stride)?;
    let max_code = (params.code_bins() - 1) as f64;
    let mut encoder = WindowEncoder::new(params);
    let mut codes = vec![0u32; params.n_projections()];
    let mut pixels = Vec::with_capacity(rows * cols);
    for wr in 0..rows {
        for wc in 0..cols {
            let value = if encoder.encode(img, wr * params.stride, wc * params.stride, &mut codes) {
                (codes[offset_index] as f64 * 255.0 / max_code).round() as u8
            } else {
                0
            };
            pixels.push(value);
        }
    }
    GrayImage::new(cols, rows, pixels)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::imaging::extract_windows;
    use crate::radon::{homogeneity, projection_set};

    fn projection(values: Vec<f64>) -> Projection {
        Projection { angle: 0.0, values }
    }

    fn textured(width: usize, height: usize, seed: u64) -> GrayImage {
        let mut state = seed.wrapping_mul(6364136223846793005).wrapping_add(1);
        GrayImage::from_fn(width, height, |r, c| {
            state = state.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            let noise = (state >> 58) as usize;
            ((r * 9 + c * 5 + noise * 3) % 256) as u8
        })
    }

    #[test]
    fn convex_projection_sets_every_bit() {
        let p = projection((0..10).map(|i| (1u32 << i) as f64).collect());
        assert_eq!(encode_projection(&p).unwrap(), 255);
    }

    #[test]
    fn decreasing_gradient_clears_every_bit() {
        // gradient 3, 2, 1, 0, -1, ...
        let mut values = vec![0.0];
        for g in [3.0, 2.0, 1.0, 0.0, -1.0, -2.0, -3.0, -4.0, -5.0] {
            values.push(values.last().unwrap() + g);
        }
        assert_eq!(encode_projection(&projection(values)).unwrap(), 0);
    }

    #[test]
    fn ties_encode_as_zero() {
        let p = projection(vec![0.0, 1.0, 2.0, 3.0, 4.0]);
        assert_eq!(encode_projection(&p).unwrap(), 0);
    }

    #[test]
    fn short_projection_is_rejected() {
        assert!(encode_projection(&projection(vec![1.0, 2.0, 3.0])).is_err());
    }

    #[test]
    fn window_of_ten_gives_byte_codes() {
        let p = ElpParams::default();
        assert_eq!(p.code_bits(), 8);
        assert_eq!(p.code_bins(), 256);
    }

    #[test]
    fn constant_region_is_all_zero() {
        let h = elp_histogram(&GrayImage::filled(30, 30, 128), &ElpParams::default()).unwrap();
        assert_eq!(h.values.len(), 1024);
        assert!(h.values.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn merged_counts_equal_summed_detached_blocks() {
        let img = textured(25, 21, 7);
        let detached = elp_counts(&img, &ElpParams::default()).unwrap();
        let merged = elp_counts(
            &img,
            &ElpParams {
                histogram_mode: HistogramMode::Merged,
                ..ElpParams::default()
            },
        )
        .unwrap();
        let summed: Vec<u64> = (0..256).map(|b| (0..4).map(|k| detached[k * 256 + b]).sum()).collect();
        assert_eq!(merged, summed);
    }

    #[test]
    fn counts_match_independent_recount() {
        // per-window reference built from the allocating public API
        let img = textured(16, 14, 3);
        let params = ElpParams::default();
        let mut expected = vec![0u64; 1024];
        for w in extract_windows(&img, 10, 1).unwrap() {
            if homogeneity(&w, 8) >= params.homogeneity_threshold {
                continue;
            }
            let (_, ps) = projection_set(&w, &params.angle_set, params.anchor_mode).unwrap();
            for (k, p) in ps.iter().enumerate() {
                expected[k * 256 + encode_projection(p).unwrap() as usize] += 1;
            }
        }
        assert_eq!(elp_counts(&img, &params).unwrap(), expected);
    }

    #[test]
    fn descriptor_rejects_small_cells() {
        let img = GrayImage::filled(84, 112, 0);
        let err = elp_descriptor(&img, SubImageGrid::square(12).unwrap(), &ElpParams::default()).unwrap_err();
        assert!(err.to_string().contains("cell (0, 0)"), "{err}");
    }

    #[test]
    fn descriptor_blocks_are_normalized() {
        let img = textured(40, 40, 11);
        let d = elp_descriptor(&img, SubImageGrid::square(2).unwrap(), &ElpParams::default()).unwrap();
        assert_eq!(d.values.len(), 4096);
        for block in d.values.chunks(1024) {
            assert!((block.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn code_image_shapes() {
        let params = ElpParams::default();
        let flat = elp_code_image(&GrayImage::filled(20, 15, 9), &params, 0).unwrap();
        assert_eq!((flat.width(), flat.height()), (11, 6));
        assert!(flat.pixels().iter().all(|&v| v == 0));

        let single = textured(10, 10, 5);
        let codes = elp_code_image(&single, &params, 0).unwrap();
        assert_eq!((codes.width(), codes.height()), (1, 1));
        let w = &extract_windows(&single, 10, 1).unwrap()[0];
        let (_, ps) = projection_set(w, &params.angle_set, params.anchor_mode).unwrap();
        let code = encode_projection(&ps[0]).unwrap() as f64;
        assert_eq!(codes.pixels()[0], (code * 255.0 / 255.0).round() as u8);

        assert!(elp_code_image(&single, &params, 4).is_err());
    }

    #[test]
    fn params_validation() {
        let bad = [
            ElpParams {
                window_side: 3,
                ..ElpParams::default()
            },
            ElpParams {
                stride: 0,
                ..ElpParams::default()
            },
            ElpParams {
                homogeneity_threshold: 0.0,
                ..ElpParams::default()
            },
            ElpParams {
                homogeneity_threshold: 1.5,
                ..ElpParams::default()
            },
        ];
        for p in bad {
            assert!(p.validate().is_err(), "{p:?}");
        }
    }
}
