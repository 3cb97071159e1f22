//! Truncated harmonic-oscillator ladder algebra.

use super::CMatrix;
use crate::{Error, Result};
use num_complex::Complex64;

/// A truncated number basis for an auxiliary harmonic oscillator.
///
/// The oscillator has unit frequency and the given effective mass, so its
/// quadratures are `u = sqrt(hbar/2M)(A + A†)` and
/// `w = -i sqrt(hbar M / 2)(A - A†)`.
#[derive(Debug, Clone)]
pub struct OscillatorBasis {
    levels: usize,
    hbar: f64,
    mass: f64,
}

/// The ladder and quadrature matrices of a truncated oscillator.
#[derive(Debug, Clone)]
pub struct LadderOperators {
    pub lowering: CMatrix,
    pub raising: CMatrix,
    pub position: CMatrix,
    pub momentum: CMatrix,
}

impl OscillatorBasis {
    pub fn new(levels: usize, hbar: f64, mass: f64) -> Result<Self> {
        if levels < 2 {
            return Err(Error::Validation(format!(
                "oscillator basis needs at least 2 levels, got {levels}"
            )));
        }
        if !(hbar > 0.0) || !(mass > 0.0) {
            return Err(Error::Validation(
                "oscillator basis needs hbar > 0 and mass > 0".into(),
            ));
        }
        Ok(Self { levels, hbar, mass })
    }

    pub fn levels(&self) -> usize {
        self.levels
    }

    pub fn hbar(&self) -> f64 {
        self.hbar
    }

    pub fn mass(&self) -> f64 {
        self.mass
    }

    /// Lowering operator: `A |k> = sqrt(k) |k-1>` on levels `0..levels`.
    pub fn lowering(&self) -> CMatrix {
        let mut a = CMatrix::zeros(self.levels, self.levels);
        for k in 1..self.levels {
            a[(k - 1, k)] = Complex64::from((k as f64).sqrt());
        }
        a
    }

    /// All four matrices at once.
    pub fn ladder_operators(&self) -> LadderOperators {
        let a = self.lowering();
        let adag = a.adjoint();
        let cu = Complex64::from((self.hbar / (2.0 * self.mass)).sqrt());
        let cw = Complex64::new(0.0, -1.0) * Complex64::from((self.hbar * self.mass / 2.0).sqrt());
        LadderOperators {
            position: (&a + &adag).map(|z| z * cu),
            momentum: (&a - &adag).map(|z| z * cw),
            lowering: a,
            raising: adag,
        }
    }
}
