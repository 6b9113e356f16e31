use serde::{Deserialize, Serialize};

/// Truncated coordinates of an `H`-valued state in the shared eigenbasis.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct FieldState {
    pub coeffs: Vec<f64>,
}

impl FieldState {
    pub fn new(coeffs: Vec<f64>) -> Self {
        Self { coeffs }
    }

    pub fn zeros(len: usize) -> Self {
        Self {
            coeffs: vec![0.0; len],
        }
    }

    /// First basis vector scaled by `amp`.
    pub fn unit(len: usize, amp: f64) -> Self {
        let mut s = Self::zeros(len);
        if len > 0 {
            s.coeffs[0] = amp;
        }
        s
    }

    pub fn len(&self) -> usize {
        self.coeffs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.coeffs.is_empty()
    }

    /// The `H`-norm, i.e. the Euclidean norm of the coefficients.
    pub fn norm(&self) -> f64 {
        self.coeffs.iter().map(|c| c * c).sum::<f64>().sqrt()
    }

    pub fn distance(&self, other: &FieldState) -> f64 {
        self.coeffs
            .iter()
            .zip(&other.coeffs)
            .map(|(a, b)| (a - b) * (a - b))
            .sum::<f64>()
            .sqrt()
    }

    pub fn axpy(&mut self, a: f64, other: &FieldState) {
        for (x, y) in self.coeffs.iter_mut().zip(&other.coeffs) {
            *x += a * y;
        }
    }

    pub fn scaled(&self, a: f64) -> FieldState {
        FieldState::new(self.coeffs.iter().map(|c| a * c).collect())
    }

    /// Point value of the field on the rod `(0, pi)` with Dirichlet
    /// eigenfunctions `sqrt(2/pi) sin(k x)`.
    pub fn synthesize_rod(&self, x: f64) -> f64 {
        let norm = (2.0 / std::f64::consts::PI).sqrt();
        self.coeffs
            .iter()
            .enumerate()
            .map(|(i, c)| c * ((i + 1) as f64 * x).sin())
            .sum::<f64>()
            * norm
    }
}

impl From<Vec<f64>> for FieldState {
    fn from(coeffs: Vec<f64>) -> Self {
        Self { coeffs }
    }
}
