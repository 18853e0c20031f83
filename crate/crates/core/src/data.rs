//! Training data containers.

use std::f64::consts::TAU;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Affine map from an input interval onto `[0, 1]`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Rescale {
    pub lo: f64,
    pub hi: f64,
}

impl Rescale {
    pub fn new(lo: f64, hi: f64) -> Result<Self> {
        if !(lo.is_finite() && hi.is_finite() && hi > lo) {
            return Err(Error::invalid(format!("rescale needs lo < hi, got [{lo}, {hi}]")));
        }
        Ok(Self { lo, hi })
    }

    pub fn identity() -> Self {
        Self { lo: 0.0, hi: 1.0 }
    }

    /// Spans the min and max of `x`; a single distinct value maps to 0.
    pub fn spanning(x: &[f64]) -> Result<Self> {
        let lo = x.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = x.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        if !lo.is_finite() || !hi.is_finite() {
            return Err(Error::invalid("cannot rescale an empty or non-finite input set"));
        }
        if hi > lo {
            Ok(Self { lo, hi })
        } else {
            Ok(Self { lo, hi: lo + 1.0 })
        }
    }

    pub fn width(&self) -> f64 {
        self.hi - self.lo
    }

    pub fn to_unit(&self, x: f64) -> f64 {
        (x - self.lo) / self.width()
    }

    pub fn from_unit(&self, u: f64) -> f64 {
        self.lo + u * self.width()
    }

    /// Converts a slope per unit scaled input into a slope per original unit.
    pub fn slope_to_original(&self, slope: f64) -> f64 {
        slope / self.width()
    }
}

/// Wraps any real angle into `[0, 2pi)`.
pub fn wrap_angle(a: f64) -> f64 {
    let w = a.rem_euclid(TAU);
    // rem_euclid can round up to exactly TAU for tiny negative inputs.
    if w >= TAU {
        0.0
    } else {
        w
    }
}

/// Paired scalar inputs and angular responses, sorted by input.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Dataset {
    x: Vec<f64>,
    y: Vec<f64>,
    rescale: Rescale,
}

impl Dataset {
    /// Sorts by `x` and rescales the inputs by their observed range.
    pub fn new(x: Vec<f64>, y: Vec<f64>) -> Result<Self> {
        let rescale = Rescale::spanning(&x)?;
        Self::with_rescale(x, y, rescale)
    }

    /// Uses an explicit input domain for the unit rescaling.
    pub fn with_rescale(x: Vec<f64>, y: Vec<f64>, rescale: Rescale) -> Result<Self> {
        if x.len() != y.len() {
            return Err(Error::invalid(format!(
                "x has {} entries but y has {}",
                x.len(),
                y.len()
            )));
        }
        if x.is_empty() {
            return Err(Error::invalid("dataset is empty"));
        }
        if let Some(bad) = x.iter().find(|v| !v.is_finite()) {
            return Err(Error::invalid(format!("non-finite input {bad}")));
        }
        if let Some(bad) = y.iter().find(|v| !(0.0..TAU).contains(*v)) {
            return Err(Error::invalid(format!("response {bad} is outside [0, 2pi)")));
        }
        let mut pairs: Vec<(f64, f64)> = x.into_iter().zip(y).collect();
        pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
        let (x, y) = pairs.into_iter().unzip();
        Ok(Self { x, y, rescale })
    }

    pub fn len(&self) -> usize {
        self.x.len()
    }

    pub fn is_empty(&self) -> bool {
        self.x.is_empty()
    }

    /// Inputs in original units, ascending.
    pub fn x(&self) -> &[f64] {
        &self.x
    }

    pub fn y(&self) -> &[f64] {
        &self.y
    }

    pub fn rescale(&self) -> Rescale {
        self.rescale
    }

    /// Inputs mapped onto the unit interval.
    pub fn scaled_x(&self) -> Vec<f64> {
        self.x.iter().map(|&v| self.rescale.to_unit(v)).collect()
    }

    /// Reflects responses, `y -> (-y) mod 2pi`, for negative-trend data.
    pub fn negated(&self) -> Self {
        let y = self.y.iter().map(|&v| wrap_angle(-v)).collect();
        Self {
            x: self.x.clone(),
            y,
            rescale: self.rescale,
        }
    }
}

/// One test of a grouped (hierarchical) dataset: phase observed against
/// frequency at a known distance.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TestGroup {
    pub test_id: String,
    pub distance: f64,
    pub frequency: Vec<f64>,
    pub phase: Vec<f64>,
}

impl TestGroup {
    pub fn to_dataset(&self, rescale: Rescale) -> Result<Dataset> {
        Dataset::with_rescale(self.frequency.clone(), self.phase.clone(), rescale)
    }
}

/// Shared frequency rescaling for a set of tests: spans every observed input.
pub fn common_rescale(groups: &[TestGroup]) -> Result<Rescale> {
    let all: Vec<f64> = groups.iter().flat_map(|g| g.frequency.iter().copied()).collect();
    Rescale::spanning(&all)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sorts_and_rescales() {
        let d = Dataset::new(vec![3.0, 1.0, 2.0], vec![0.3, 0.1, 0.2]).unwrap();
        assert_eq!(d.x(), &[1.0, 2.0, 3.0]);
        assert_eq!(d.y(), &[0.1, 0.2, 0.3]);
        assert_eq!(d.scaled_x(), vec![0.0, 0.5, 1.0]);
    }

    #[test]
    fn rejects_out_of_range_angles() {
        assert!(Dataset::new(vec![0.0, 1.0], vec![0.0, TAU]).is_err());
        assert!(Dataset::new(vec![0.0, 1.0], vec![-0.1, 1.0]).is_err());
        assert!(Dataset::new(vec![0.0], vec![0.0, 1.0]).is_err());
    }

    #[test]
    fn wrap_angle_range() {
        assert_eq!(wrap_angle(0.0), 0.0);
        assert!((wrap_angle(TAU + 0.5) - 0.5).abs() < 1e-12);
        assert!((wrap_angle(-0.5) - (TAU - 0.5)).abs() < 1e-12);
        let w = wrap_angle(-1e-300);
        assert!((0.0..TAU).contains(&w));
    }

    #[test]
    fn negation_reflects_angles() {
        let d = Dataset::new(vec![0.0, 1.0], vec![0.0, 1.0]).unwrap().negated();
        assert_eq!(d.y()[0], 0.0);
        assert!((d.y()[1] - (TAU - 1.0)).abs() < 1e-12);
    }
}
