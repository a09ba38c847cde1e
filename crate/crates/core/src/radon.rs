//! Discrete Radon projections of small windows, the homogeneity gate and
//! anchor-angle selection.
//!
//! Pixel centers are placed at `x = col - (w-1)/2`, `y = row - (w-1)/2`
//! (image coordinates, y pointing down). A pixel contributes to the bin
//! containing `rho = x cos(theta) + y sin(theta)` at unit bin width, so 0°
//! yields column sums and 90° row sums, both ordered by increasing index.
//! Non-axis angles produce more than `w` bins; those are rebinned onto `w`
//! equal-width intervals by overlap length, which is linear in the input and
//! conserves the projection mass.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::imaging::Window;

/// One projection of a window.
#[derive(Debug, Clone, PartialEq)]
pub struct Projection {
    /// Degrees in `[0, 180)`.
    pub angle: f64,
    pub values: Vec<f64>,
}

/// How the anchor angle is selected among the candidates.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AnchorMode {
    /// The candidate whose projection holds the largest single value.
    #[default]
    MaxAmplitude,
    /// The candidate with the largest summed forward difference along rho.
    GradientIntegral,
}

/// Candidate anchor angles and the offsets of the projections taken from the anchor.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AngleSet {
    anchor_candidates: Vec<f64>,
    adjunct_offsets: Vec<f64>,
}

impl Default for AngleSet {
    fn default() -> Self {
        AngleSet {
            anchor_candidates: vec![0.0, 45.0, 90.0, 135.0],
            adjunct_offsets: vec![0.0, 45.0, 90.0, 125.0],
        }
    }
}

impl AngleSet {
    pub fn new(anchor_candidates: Vec<f64>, adjunct_offsets: Vec<f64>) -> Result<Self> {
        if anchor_candidates.is_empty() {
            return Err(Error::Argument("at least one anchor candidate is required".into()));
        }
        if adjunct_offsets.is_empty() {
            return Err(Error::Argument("at least one adjunct offset is required".into()));
        }
        if anchor_candidates
            .iter()
            .chain(&adjunct_offsets)
            .any(|a| !a.is_finite())
        {
            return Err(Error::Argument("angles must be finite".into()));
        }
        let anchor_candidates: Vec<f64> = anchor_candidates.into_iter().map(normalize_angle).collect();
        let adjunct_offsets: Vec<f64> = adjunct_offsets.into_iter().map(normalize_angle).collect();
        if !adjunct_offsets.contains(&0.0) {
            return Err(Error::Argument("adjunct offsets must include 0 (the anchor)".into()));
        }
        Ok(AngleSet {
            anchor_candidates,
            adjunct_offsets,
        })
    }

    /// Equidistant offsets {0, 45, 90, 135}.
    pub fn symmetric() -> Self {
        AngleSet {
            anchor_candidates: vec![0.0, 45.0, 90.0, 135.0],
            adjunct_offsets: vec![0.0, 45.0, 90.0, 135.0],
        }
    }

    pub fn anchor_candidates(&self) -> &[f64] {
        &self.anchor_candidates
    }

    pub fn adjunct_offsets(&self) -> &[f64] {
        &self.adjunct_offsets
    }

    /// Angles of the adjunct projections for a given anchor.
    pub fn adjunct_angles(&self, anchor: f64) -> Vec<f64> {
        self.adjunct_offsets
            .iter()
            .map(|o| normalize_angle(anchor + o))
            .collect()
    }
}

/// Maps any angle in degrees into `[0, 180)`.
pub fn normalize_angle(deg: f64) -> f64 {
    let a = deg.rem_euclid(180.0);
    // rem_euclid can return 180.0 for tiny negative inputs
    if a >= 180.0 {
        0.0
    } else {
        a + 0.0
    }
}

fn sin_cos_deg(deg: f64) -> (f64, f64) {
    let (s, c) = deg.to_radians().sin_cos();
    let snap = |v: f64| {
        if v.abs() < 1e-12 {
            0.0
        } else if (v.abs() - 1.0).abs() < 1e-12 {
            v.signum()
        } else {
            v
        }
    };
    (snap(s), snap(c))
}

/// Precomputed pixel-to-bin assignment for one window side and angle.
#[derive(Debug, Clone)]
pub struct ProjectionPlan {
    side: usize,
    angle: f64,
    bin_of_pixel: Vec<u16>,
    n_bins: usize,
    /// `(source bin, destination index, overlap)` triples, empty when `n_bins == side`.
    rebin: Vec<(u16, u16, f64)>,
}

impl ProjectionPlan {
    pub fn new(side: usize, angle: f64) -> Self {
        let angle = normalize_angle(angle);
        let (s, c) = sin_cos_deg(angle);
        let half = (side as f64 - 1.0) / 2.0;
        let rho: Vec<f64> = (0..side * side)
            .map(|i| {
                let (row, col) = (i / side, i % side);
                (col as f64 - half) * c + (row as f64 - half) * s
            })
            .collect();
        let rho_min = rho.iter().cloned().fold(f64::INFINITY, f64::min);
        let bin_of_pixel: Vec<u16> = rho
            .iter()
            .map(|r| (r - rho_min + 0.5 + 1e-9).floor() as u16)
            .collect();
        let n_bins = *bin_of_pixel.iter().max().unwrap_or(&0) as usize + 1;

        let mut rebin = Vec::new();
        if n_bins != side {
            // source bin k covers [k, k+1); destination j covers [j*step, (j+1)*step)
            let step = n_bins as f64 / side as f64;
            for dst in 0..side {
                let (lo, hi) = (dst as f64 * step, (dst + 1) as f64 * step);
                let first = lo.floor() as usize;
                let last = (hi.ceil() as usize).min(n_bins);
                for src in first..last {
                    let overlap = (hi.min(src as f64 + 1.0) - lo.max(src as f64)).max(0.0);
                    if overlap > 0.0 {
                        rebin.push((src as u16, dst as u16, overlap));
                    }
                }
            }
        }
        ProjectionPlan {
            side,
            angle,
            bin_of_pixel,
            n_bins,
            rebin,
        }
    }

    pub fn side(&self) -> usize {
        self.side
    }

    pub fn angle(&self) -> f64 {
        self.angle
    }

    /// Number of unit-width bins before rebinning.
    pub fn raw_bins(&self) -> usize {
        self.n_bins
    }

    /// Unit-width bin sums before rebinning.
    pub fn raw_sums(&self, data: &[u8]) -> Vec<u64> {
        let mut raw = vec![0u64; self.n_bins];
        for (&v, &b) in data.iter().zip(&self.bin_of_pixel) {
            raw[b as usize] += v as u64;
        }
        raw
    }

    /// Projects `side * side` row-major intensities into `out` (length `side`).
    pub fn project_into(&self, data: &[u8], raw: &mut Vec<u32>, out: &mut [f64]) {
        debug_assert_eq!(data.len(), self.side * self.side);
        debug_assert_eq!(out.len(), self.side);
        raw.clear();
        raw.resize(self.n_bins, 0);
        for (&v, &b) in data.iter().zip(&self.bin_of_pixel) {
            raw[b as usize] += v as u32;
        }
        if self.rebin.is_empty() {
            for (o, &r) in out.iter_mut().zip(raw.iter()) {
                *o = r as f64;
            }
        } else {
            out.fill(0.0);
            for &(src, dst, w) in &self.rebin {
                out[dst as usize] += w * raw[src as usize] as f64;
            }
        }
    }
}

/// Projection of a window at `angle` degrees (taken mod 180).
pub fn radon_projection(win: &Window, angle: f64) -> Projection {
    let plan = ProjectionPlan::new(win.side, angle);
    let mut values = vec![0.0; win.side];
    plan.project_into(&win.data, &mut Vec::new(), &mut values);
    Projection {
        angle: plan.angle,
        values,
    }
}

/// `H = 1 - sqrt(sum (W - median)^2) / 2^n_bits`, unclamped.
pub fn homogeneity(win: &Window, n_bits: u32) -> f64 {
    homogeneity_of(&win.data, n_bits, &mut Vec::with_capacity(win.data.len()))
}

pub(crate) fn homogeneity_of(data: &[u8], n_bits: u32, scratch: &mut Vec<u8>) -> f64 {
    scratch.clear();
    scratch.extend_from_slice(data);
    scratch.sort_unstable();
    let n = scratch.len();
    let median = if n % 2 == 1 {
        scratch[n / 2] as f64
    } else {
        (scratch[n / 2 - 1] as f64 + scratch[n / 2] as f64) / 2.0
    };
    let ss: f64 = data
        .iter()
        .map(|&v| {
            let d = v as f64 - median;
            d * d
        })
        .sum();
    1.0 - ss.sqrt() / f64::from(1u32 << n_bits)
}

/// Anchor criterion of one projection: peak value or summed forward differences.
pub fn anchor_score(values: &[f64], mode: AnchorMode) -> f64 {
    match mode {
        AnchorMode::MaxAmplitude => values.iter().cloned().fold(f64::NEG_INFINITY, f64::max),
        AnchorMode::GradientIntegral => values.windows(2).map(|w| w[1] - w[0]).sum(),
    }
}

/// Index of the winning projection; ties go to the smallest angle.
fn select_anchor<'a>(candidates: impl Iterator<Item = (f64, &'a [f64])>, mode: AnchorMode) -> Option<usize> {
    let mut best: Option<(usize, f64, f64)> = None;
    for (i, (angle, values)) in candidates.enumerate() {
        let score = anchor_score(values, mode);
        best = match best {
            Some((_, s, a)) if score < s || (score == s && angle >= a) => best,
            _ => Some((i, score, angle)),
        };
    }
    best.map(|(i, _, _)| i)
}

/// Anchor angle among the given projections.
pub fn anchor_angle(projections: &[Projection], mode: AnchorMode) -> Result<f64> {
    select_anchor(projections.iter().map(|p| (p.angle, p.values.as_slice())), mode)
        .map(|i| projections[i].angle)
        .ok_or_else(|| Error::Argument("anchor selection needs at least one projection".into()))
}

/// Anchor angle and the projections at `anchor + offset` for each adjunct offset.
pub fn projection_set(win: &Window, angles: &AngleSet, mode: AnchorMode) -> Result<(f64, Vec<Projection>)> {
    let candidates: Vec<Projection> = angles
        .anchor_candidates
        .iter()
        .map(|&a| radon_projection(win, a))
        .collect();
    let anchor = anchor_angle(&candidates, mode)?;
    let projections = angles
        .adjunct_angles(anchor)
        .into_iter()
        .map(|a| match candidates.iter().find(|c| c.angle == a) {
            Some(c) => c.clone(),
            None => radon_projection(win, a),
        })
        .collect();
    Ok((anchor, projections))
}

/// Reusable projection engine for one window side and angle set.
///
/// Performs the same computation as [`projection_set`] without per-window
/// allocation.
#[derive(Debug, Clone)]
pub struct Projector {
    side: usize,
    mode: AnchorMode,
    candidates: Vec<ProjectionPlan>,
    /// For each candidate anchor, per offset: an index into `candidates` or a dedicated plan.
    adjuncts: Vec<Vec<AdjunctSource>>,
    candidate_values: Vec<Vec<f64>>,
    raw: Vec<u32>,
}

#[derive(Debug, Clone)]
enum AdjunctSource {
    Candidate(usize),
    Plan(ProjectionPlan),
}

impl Projector {
    pub fn new(side: usize, angles: &AngleSet, mode: AnchorMode) -> Self {
        let candidates: Vec<ProjectionPlan> = angles
            .anchor_candidates
            .iter()
            .map(|&a| ProjectionPlan::new(side, a))
            .collect();
        let adjuncts = candidates
            .iter()
            .map(|anchor| {
                angles
                    .adjunct_angles(anchor.angle)
                    .into_iter()
                    .map(|a| match candidates.iter().position(|c| c.angle == a) {
                        Some(i) => AdjunctSource::Candidate(i),
                        None => AdjunctSource::Plan(ProjectionPlan::new(side, a)),
                    })
                    .collect()
            })
            .collect();
        Projector {
            side,
            mode,
            candidate_values: vec![vec![0.0; side]; candidates.len()],
            candidates,
            adjuncts,
            raw: Vec::new(),
        }
    }

    pub fn side(&self) -> usize {
        self.side
    }

    pub fn n_projections(&self) -> usize {
        self.adjuncts[0].len()
    }

    /// Fills `out[k]` with the k-th adjunct projection and returns the anchor angle.
    pub fn project(&mut self, data: &[u8], out: &mut [Vec<f64>]) -> f64 {
        for (plan, values) in self.candidates.iter().zip(self.candidate_values.iter_mut()) {
            plan.project_into(data, &mut self.raw, values);
        }
        let anchor = select_anchor(
            self.candidates
                .iter()
                .zip(&self.candidate_values)
                .map(|(p, v)| (p.angle, v.as_slice())),
            self.mode,
        )
        .expect("angle sets always hold a candidate");
        for (source, dst) in self.adjuncts[anchor].iter().zip(out.iter_mut()) {
            match source {
                AdjunctSource::Candidate(i) => dst.copy_from_slice(&self.candidate_values[*i]),
                AdjunctSource::Plan(plan) => plan.project_into(data, &mut self.raw, dst),
            }
        }
        self.candidates[anchor].angle
    }
}
