use crate::error::{LabError, Result};
use crate::io::sig17;
use serde::{Deserialize, Serialize};

/// Eigen-coefficients `a_j` of a function, stored up to the buffer level
/// `J_buf`; the first `J` (active) modes are the design truncation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModalState {
    #[serde(with = "sig17::vec")]
    coeffs: Vec<f64>,
    active: usize,
}

impl ModalState {
    pub fn new(coeffs: Vec<f64>, active: usize) -> Result<Self> {
        if active == 0 || active > coeffs.len() {
            return Err(LabError::InvalidArgument(format!(
                "active truncation {active} must lie in 1..={}",
                coeffs.len()
            )));
        }
        if coeffs.iter().any(|c| !c.is_finite()) {
            return Err(LabError::InvalidArgument(
                "modal coefficients must be finite".into(),
            ));
        }
        Ok(Self { coeffs, active })
    }

    pub fn zeros(active: usize, buffer: usize) -> Self {
        assert!(active >= 1 && buffer >= active, "need 1 <= J <= J_buf");
        Self {
            coeffs: vec![0.0; buffer],
            active,
        }
    }

    /// The eigenfunction `Φ_j` (zero-based `j`).
    pub fn unit(j: usize, active: usize, buffer: usize) -> Self {
        let mut s = Self::zeros(active, buffer);
        s.coeffs[j] = 1.0;
        s
    }

    /// Active coefficients given, buffer padded with zeros.
    pub fn padded(active_coeffs: &[f64], buffer: usize) -> Self {
        assert!(buffer >= active_coeffs.len() && !active_coeffs.is_empty());
        let mut coeffs = active_coeffs.to_vec();
        coeffs.resize(buffer, 0.0);
        Self {
            coeffs,
            active: active_coeffs.len(),
        }
    }

    pub fn coeffs(&self) -> &[f64] {
        &self.coeffs
    }

    pub fn coeffs_mut(&mut self) -> &mut [f64] {
        &mut self.coeffs
    }

    pub fn active(&self) -> usize {
        self.active
    }

    pub fn buffer(&self) -> usize {
        self.coeffs.len()
    }

    pub fn active_coeffs(&self) -> &[f64] {
        &self.coeffs[..self.active]
    }

    /// `‖u‖ = (Σ a_j²)^{1/2}` over the buffer.
    pub fn l2_norm(&self) -> f64 {
        self.coeffs.iter().map(|a| a * a).sum::<f64>().sqrt()
    }

    pub fn active_norm(&self) -> f64 {
        self.active_coeffs()
            .iter()
            .map(|a| a * a)
            .sum::<f64>()
            .sqrt()
    }

    /// `(Σ_{J<j≤J_buf} a_j²)^{1/2}`.
    pub fn spillover_norm(&self) -> f64 {
        self.coeffs[self.active..]
            .iter()
            .map(|a| a * a)
            .sum::<f64>()
            .sqrt()
    }

    pub fn is_zero(&self) -> bool {
        self.coeffs.iter().all(|&a| a == 0.0)
    }

    /// Same coefficients with a different active level.
    pub fn with_active(&self, active: usize) -> Result<Self> {
        Self::new(self.coeffs.clone(), active)
    }

    /// Coefficients truncated or zero-padded to a new buffer size.
    pub fn resized(&self, buffer: usize) -> Self {
        let mut coeffs = self.coeffs.clone();
        coeffs.resize(buffer, 0.0);
        Self {
            coeffs,
            active: self.active.min(buffer),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn norms() {
        let s = ModalState::new(vec![3.0, 4.0, 12.0], 2).unwrap();
        assert_eq!(s.l2_norm(), 13.0);
        assert_eq!(s.active_norm(), 5.0);
        assert_eq!(s.spillover_norm(), 12.0);
    }

    #[test]
    fn validation() {
        assert!(ModalState::new(vec![1.0], 2).is_err());
        assert!(ModalState::new(vec![f64::NAN], 1).is_err());
        assert!(ModalState::new(vec![1.0, 2.0], 0).is_err());
    }
}
