//! Descriptor vectors and their closed-form lengths.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::elp::ElpParams;
use crate::imaging::SubImageGrid;
use crate::lbp::LbpParams;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    Elp,
    Lbp,
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Method::Elp => "elp",
            Method::Lbp => "lbp",
        })
    }
}

/// Parameters of either descriptor family.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "method", rename_all = "lowercase")]
pub enum DescriptorParams {
    Elp(ElpParams),
    Lbp(LbpParams),
}

impl DescriptorParams {
    pub fn method(&self) -> Method {
        match self {
            DescriptorParams::Elp(_) => Method::Elp,
            DescriptorParams::Lbp(_) => Method::Lbp,
        }
    }

    /// Bins contributed by one grid cell.
    pub fn bins_per_cell(&self) -> usize {
        match self {
            DescriptorParams::Elp(p) => p.bins_per_region(),
            DescriptorParams::Lbp(p) => p.n_labels(),
        }
    }

    /// Short tag such as `ELP(10,d)` or `LBP(24,3)`.
    pub fn label(&self) -> String {
        match self {
            DescriptorParams::Elp(p) => format!("ELP({},{})", p.window_side, p.histogram_mode.letter()),
            DescriptorParams::Lbp(p) => format!("LBP({},{})", p.points, p.radius),
        }
    }
}

impl From<ElpParams> for DescriptorParams {
    fn from(p: ElpParams) -> Self {
        DescriptorParams::Elp(p)
    }
}

impl From<LbpParams> for DescriptorParams {
    fn from(p: LbpParams) -> Self {
        DescriptorParams::Lbp(p)
    }
}

/// Descriptor length for a parameter set and grid.
pub fn length_of(params: &DescriptorParams, grid: SubImageGrid) -> usize {
    grid.cells() * params.bins_per_cell()
}

/// Non-negative histogram vector with the configuration that produced it.
#[derive(Debug, Clone, PartialEq)]
pub struct Descriptor {
    pub values: Vec<f64>,
    pub params: DescriptorParams,
    pub grid: SubImageGrid,
}

impl Descriptor {
    pub fn method(&self) -> Method {
        self.params.method()
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}

/// Scales `values` to unit sum unless it is all zero.
pub(crate) fn l1_normalize(values: &mut [f64]) {
    let total: f64 = values.iter().sum();
    if total > 0.0 {
        values.iter_mut().for_each(|v| *v /= total);
    }
}
