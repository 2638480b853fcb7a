//! Signed target masks over the ROI, sampled at feature-map resolution.
//!
//! A cell takes a region's value iff its center lies inside the region's
//! half-open extent `[left, right) x [top, bottom)`.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{covered_cells, Rect, RoiWindow};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum MapKind {
    /// +1 on the target, -1 everywhere else in the ROI.
    TypeC,
    /// +1 on the target, -1 on the annulus out to the doubled rect, 0 beyond.
    TypeS,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Polarity {
    Positive,
    Negative,
}

impl fmt::Display for MapKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            MapKind::TypeC => "C",
            MapKind::TypeS => "S",
        })
    }
}

impl FromStr for MapKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "C" | "c" | "TypeC" => Ok(MapKind::TypeC),
            "S" | "s" | "TypeS" => Ok(MapKind::TypeS),
            other => Err(Error::InvalidArgument(format!("unknown map type {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TargetMap {
    rows: usize,
    cols: usize,
    values: Vec<f64>,
    kind: MapKind,
    polarity: Polarity,
}

impl TargetMap {
    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    /// Row-major cell values.
    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.values[row * self.cols + col]
    }

    pub fn kind(&self) -> MapKind {
        self.kind
    }

    pub fn polarity(&self) -> Polarity {
        self.polarity
    }

    pub fn sum(&self) -> f64 {
        self.values.iter().sum()
    }

    pub fn count(&self, value: f64) -> usize {
        self.values.iter().filter(|&&v| v == value).count()
    }
}

fn check_resolution(resolution: (usize, usize)) -> Result<()> {
    if resolution.0 == 0 || resolution.1 == 0 {
        return Err(Error::InvalidArgument(format!(
            "target map resolution must be at least 1x1, got {}x{}",
            resolution.0, resolution.1
        )));
    }
    Ok(())
}

fn paint(values: &mut [f64], cols: usize, roi: &RoiWindow, region: &Rect, rows_n: usize, value: f64) {
    let (xs, ys) = roi.normalized(region);
    for r in covered_cells(ys.start, ys.end, rows_n) {
        for c in covered_cells(xs.start, xs.end, cols) {
            values[r * cols + c] = value;
        }
    }
}

pub fn make_type_c(roi: &RoiWindow, target: &Rect, resolution: (usize, usize)) -> Result<TargetMap> {
    check_resolution(resolution)?;
    let (rows, cols) = resolution;
    let mut values = vec![-1.0; rows * cols];
    paint(&mut values, cols, roi, target, rows, 1.0);
    Ok(TargetMap {
        rows,
        cols,
        values,
        kind: MapKind::TypeC,
        polarity: Polarity::Positive,
    })
}

pub fn make_type_s(roi: &RoiWindow, target: &Rect, resolution: (usize, usize)) -> Result<TargetMap> {
    check_resolution(resolution)?;
    let (rows, cols) = resolution;
    let mut values = vec![0.0; rows * cols];
    // Cells outside the window do not exist, so the doubled rect is clipped implicitly.
    paint(&mut values, cols, roi, &target.scaled(2.0), rows, -1.0);
    paint(&mut values, cols, roi, target, rows, 1.0);
    Ok(TargetMap {
        rows,
        cols,
        values,
        kind: MapKind::TypeS,
        polarity: Polarity::Positive,
    })
}

pub fn make_map(kind: MapKind, roi: &RoiWindow, target: &Rect, resolution: (usize, usize)) -> Result<TargetMap> {
    match kind {
        MapKind::TypeC => make_type_c(roi, target, resolution),
        MapKind::TypeS => make_type_s(roi, target, resolution),
    }
}

/// Entrywise negation of a positive map.
pub fn negate(map: &TargetMap) -> Result<TargetMap> {
    if map.polarity == Polarity::Negative {
        return Err(Error::InvalidArgument("map is already negative".into()));
    }
    Ok(TargetMap {
        values: map.values.iter().map(|v| -v).collect(),
        polarity: Polarity::Negative,
        ..map.clone()
    })
}

#[cfg(test)]
impl TargetMap {
    pub(crate) fn from_values(rows: usize, cols: usize, values: Vec<f64>) -> Self {
        assert_eq!(values.len(), rows * cols);
        TargetMap {
            rows,
            cols,
            values,
            kind: MapKind::TypeC,
            polarity: Polarity::Positive,
        }
    }
}
