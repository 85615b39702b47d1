//! Finite unions of disjoint intervals: observation windows in space and
//! control time sets.

use crate::error::{LabError, Result};
use serde::{Deserialize, Serialize};
use std::fmt;

/// Disjoint, increasing, nonempty intervals inside `[lo, hi]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IntervalSet {
    intervals: Vec<(f64, f64)>,
}

impl IntervalSet {
    pub fn new(mut intervals: Vec<(f64, f64)>, lo: f64, hi: f64) -> Result<Self> {
        if intervals.is_empty() {
            return Err(LabError::InvalidIntervals("no intervals given".into()));
        }
        intervals.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap_or(std::cmp::Ordering::Equal));
        for &(a, b) in &intervals {
            if !(a.is_finite() && b.is_finite()) || b <= a {
                return Err(LabError::InvalidIntervals(format!(
                    "interval ({a}, {b}) is empty or not finite"
                )));
            }
            if a < lo || b > hi {
                return Err(LabError::InvalidIntervals(format!(
                    "interval ({a}, {b}) not inside ({lo}, {hi})"
                )));
            }
        }
        for pair in intervals.windows(2) {
            if pair[1].0 < pair[0].1 {
                return Err(LabError::InvalidIntervals(format!(
                    "intervals ({}, {}) and ({}, {}) overlap",
                    pair[0].0, pair[0].1, pair[1].0, pair[1].1
                )));
            }
        }
        Ok(Self { intervals })
    }

    /// Parse `"a,b[,c,d...]"`.
    pub fn parse(text: &str, lo: f64, hi: f64) -> Result<Self> {
        let values: std::result::Result<Vec<f64>, _> =
            text.split(',').map(|s| s.trim().parse::<f64>()).collect();
        let values = values
            .map_err(|e| LabError::InvalidIntervals(format!("cannot parse '{text}': {e}")))?;
        if values.is_empty() || values.len() % 2 != 0 {
            return Err(LabError::InvalidIntervals(format!(
                "'{text}' must list an even number of endpoints"
            )));
        }
        Self::new(values.chunks(2).map(|c| (c[0], c[1])).collect(), lo, hi)
    }

    pub fn intervals(&self) -> &[(f64, f64)] {
        &self.intervals
    }

    pub fn measure(&self) -> f64 {
        self.intervals.iter().map(|(a, b)| b - a).sum()
    }

    pub fn contains(&self, x: f64) -> bool {
        self.intervals.iter().any(|&(a, b)| a < x && x < b)
    }

    /// Complement inside `[lo, hi]`, or `None` if it has zero measure.
    pub fn complement(&self, lo: f64, hi: f64) -> Option<Self> {
        let mut out = Vec::new();
        let mut cursor = lo;
        for &(a, b) in &self.intervals {
            if a > cursor {
                out.push((cursor, a));
            }
            cursor = b;
        }
        if hi > cursor {
            out.push((cursor, hi));
        }
        if out.is_empty() {
            None
        } else {
            Some(Self { intervals: out })
        }
    }

    /// True if every interval of `self` lies inside some interval of `other`.
    pub fn is_subset_of(&self, other: &Self) -> bool {
        self.intervals
            .iter()
            .all(|&(a, b)| other.intervals.iter().any(|&(c, d)| c <= a && b <= d))
    }
}

impl fmt::Display for IntervalSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = self
            .intervals
            .iter()
            .map(|(a, b)| format!("({a}, {b})"))
            .collect();
        write!(f, "{}", parts.join(" ∪ "))
    }
}

/// Spatial observation/control region inside `(0, 1)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ObservationWindow(pub IntervalSet);

impl ObservationWindow {
    pub fn new(intervals: Vec<(f64, f64)>) -> Result<Self> {
        IntervalSet::new(intervals, 0.0, 1.0).map(Self)
    }

    pub fn interval(a: f64, b: f64) -> Result<Self> {
        Self::new(vec![(a, b)])
    }

    pub fn full() -> Self {
        Self(IntervalSet {
            intervals: vec![(0.0, 1.0)],
        })
    }

    pub fn parse(text: &str) -> Result<Self> {
        IntervalSet::parse(text, 0.0, 1.0).map(Self)
    }

    pub fn intervals(&self) -> &[(f64, f64)] {
        self.0.intervals()
    }

    pub fn measure(&self) -> f64 {
        self.0.measure()
    }

    pub fn complement(&self) -> Option<Self> {
        self.0.complement(0.0, 1.0).map(Self)
    }

    pub fn is_full(&self) -> bool {
        self.intervals() == [(0.0, 1.0)]
    }
}

impl fmt::Display for ObservationWindow {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.0.fmt(f)
    }
}

/// Set of control times inside `(0, T)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TimeSet {
    pub set: IntervalSet,
    pub horizon: f64,
}

impl TimeSet {
    pub fn new(intervals: Vec<(f64, f64)>, horizon: f64) -> Result<Self> {
        if !(horizon > 0.0) {
            return Err(LabError::InvalidArgument(format!(
                "horizon must be positive, got {horizon}"
            )));
        }
        Ok(Self {
            set: IntervalSet::new(intervals, 0.0, horizon)?,
            horizon,
        })
    }

    pub fn parse(text: &str, horizon: f64) -> Result<Self> {
        if !(horizon > 0.0) {
            return Err(LabError::InvalidArgument(format!(
                "horizon must be positive, got {horizon}"
            )));
        }
        Ok(Self {
            set: IntervalSet::parse(text, 0.0, horizon)?,
            horizon,
        })
    }

    pub fn intervals(&self) -> &[(f64, f64)] {
        self.set.intervals()
    }

    pub fn measure(&self) -> f64 {
        self.set.measure()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parse_and_measure() {
        let w = ObservationWindow::parse("0.6,0.85, 0.1,0.35").unwrap();
        assert_eq!(w.intervals(), &[(0.1, 0.35), (0.6, 0.85)]);
        assert!((w.measure() - 0.5).abs() < 1e-15);
    }

    #[test]
    fn rejects_bad_input() {
        assert!(ObservationWindow::parse("0.2").is_err());
        assert!(ObservationWindow::parse("0.5,0.2").is_err());
        assert!(ObservationWindow::parse("0.1,0.4,0.3,0.6").is_err());
        assert!(ObservationWindow::parse("-0.1,0.4").is_err());
        assert!(ObservationWindow::parse("a,b").is_err());
        assert!(TimeSet::parse("0.5,1.5", 1.0).is_err());
    }

    #[test]
    fn complement_covers_rest() {
        let w = ObservationWindow::parse("0.2,0.45").unwrap();
        let c = w.complement().unwrap();
        assert_eq!(c.intervals(), &[(0.0, 0.2), (0.45, 1.0)]);
        assert!(ObservationWindow::full().complement().is_none());
    }

    #[test]
    fn subset() {
        let a = ObservationWindow::interval(0.3, 0.4).unwrap();
        let b = ObservationWindow::interval(0.2, 0.5).unwrap();
        assert!(a.0.is_subset_of(&b.0));
        assert!(!b.0.is_subset_of(&a.0));
    }
}
