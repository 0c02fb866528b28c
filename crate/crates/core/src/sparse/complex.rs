use num_complex::Complex64;

use crate::error::{Error, Result};

/// Complex vector stored as separate real and imaginary arrays, so that real
/// operators can be applied to each part without a complex code path.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct ComplexVector {
    pub re: Vec<f64>,
    pub im: Vec<f64>,
}

impl ComplexVector {
    pub fn zeros(n: usize) -> Self {
        Self {
            re: vec![0.0; n],
            im: vec![0.0; n],
        }
    }

    pub fn from_parts(re: Vec<f64>, im: Vec<f64>) -> Result<Self> {
        if re.len() != im.len() {
            return Err(Error::dim(re.len(), im.len()));
        }
        Ok(Self { re, im })
    }

    pub fn from_real(re: &[f64]) -> Self {
        Self {
            re: re.to_vec(),
            im: vec![0.0; re.len()],
        }
    }

    pub fn from_complex(v: &[Complex64]) -> Self {
        Self {
            re: v.iter().map(|z| z.re).collect(),
            im: v.iter().map(|z| z.im).collect(),
        }
    }

    pub fn to_complex(&self) -> Vec<Complex64> {
        self.re
            .iter()
            .zip(&self.im)
            .map(|(&re, &im)| Complex64::new(re, im))
            .collect()
    }

    pub fn len(&self) -> usize {
        self.re.len()
    }

    pub fn is_empty(&self) -> bool {
        self.re.is_empty()
    }

    pub fn is_finite(&self) -> bool {
        self.re.iter().chain(&self.im).all(|v| v.is_finite())
    }

    pub fn norm(&self) -> f64 {
        self.re
            .iter()
            .chain(&self.im)
            .map(|v| v * v)
            .sum::<f64>()
            .sqrt()
    }
}
