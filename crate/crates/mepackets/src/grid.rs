//! Uniform position-grid representation for wave functions.
//!
//! The joint-measurement module and the track simulator both sample states
//! on a uniform grid and need shifts, boosts, overlaps and free propagation.

use crate::{Error, Result};
use num_complex::Complex64;
use rustfft::FftPlanner;
use std::f64::consts::PI;

/// A uniform grid of `n` points covering `[-l_box, l_box)`.
#[derive(Debug, Clone)]
pub struct PositionGrid {
    pub n: usize,
    pub l_box: f64,
    pub spacing: f64,
    xs: Vec<f64>,
}

impl PositionGrid {
    pub fn new(n: usize, l_box: f64) -> Result<Self> {
        if n < 8 || !n.is_power_of_two() {
            return Err(Error::Validation(format!(
                "grid size must be a power of two of at least 8, got {n}"
            )));
        }
        if !(l_box > 0.0) {
            return Err(Error::Validation("grid half-width must be positive".into()));
        }
        let spacing = 2.0 * l_box / n as f64;
        let xs = (0..n).map(|i| -l_box + i as f64 * spacing).collect();
        Ok(Self {
            n,
            l_box,
            spacing,
            xs,
        })
    }

    pub fn points(&self) -> &[f64] {
        &self.xs
    }

    /// Sample a function on the grid.
    pub fn sample(&self, f: impl Fn(f64) -> Complex64) -> Vec<Complex64> {
        self.xs.iter().map(|&x| f(x)).collect()
    }

    /// `integral |psi|^2 dx` by the rectangle rule (spectrally accurate for
    /// smooth, decaying functions on a uniform grid).
    pub fn norm_sqr(&self, psi: &[Complex64]) -> f64 {
        psi.iter().map(|z| z.norm_sqr()).sum::<f64>() * self.spacing
    }

    /// Normalize in place to unit L2 norm.
    pub fn normalize(&self, psi: &mut [Complex64]) -> Result<()> {
        let n2 = self.norm_sqr(psi);
        if n2 < 1e-300 {
            return Err(Error::Validation("cannot normalize a null function".into()));
        }
        let s = 1.0 / n2.sqrt();
        for z in psi.iter_mut() {
            *z *= s;
        }
        Ok(())
    }

    /// `<a|b> = integral conj(a) b dx`.
    pub fn overlap(&self, a: &[Complex64], b: &[Complex64]) -> Complex64 {
        a.iter()
            .zip(b)
            .map(|(x, y)| x.conj() * y)
            .sum::<Complex64>()
            * Complex64::from(self.spacing)
    }

    /// Position mean and standard deviation of a normalized function.
    pub fn position_moments(&self, psi: &[Complex64]) -> (f64, f64) {
        let mut m1 = 0.0;
        let mut m2 = 0.0;
        for (&x, z) in self.xs.iter().zip(psi) {
            let w = z.norm_sqr() * self.spacing;
            m1 += x * w;
            m2 += x * x * w;
        }
        (m1, (m2 - m1 * m1).max(0.0).sqrt())
    }

    /// The FFT angular wavenumbers `k_j` matching [`Self::fft`] ordering.
    pub fn wavenumbers(&self) -> Vec<f64> {
        let n = self.n;
        let dk = PI / self.l_box;
        (0..n)
            .map(|j| {
                let j = if j <= n / 2 { j as f64 } else { j as f64 - n as f64 };
                j * dk
            })
            .collect()
    }

    fn fft_inplace(&self, psi: &mut [Complex64], inverse: bool) {
        let mut planner = FftPlanner::new();
        let fft = if inverse {
            planner.plan_fft_inverse(self.n)
        } else {
            planner.plan_fft_forward(self.n)
        };
        fft.process(psi);
        if inverse {
            let s = 1.0 / self.n as f64;
            for z in psi.iter_mut() {
                *z *= s;
            }
        }
    }

    /// Momentum mean and standard deviation (via FFT) of a normalized
    /// function, with the given hbar.
    pub fn momentum_moments(&self, psi: &[Complex64], hbar: f64) -> (f64, f64) {
        let mut spec = psi.to_vec();
        self.fft_inplace(&mut spec, false);
        let norm: f64 = spec.iter().map(|z| z.norm_sqr()).sum();
        let ks = self.wavenumbers();
        let mut m1 = 0.0;
        let mut m2 = 0.0;
        for (k, z) in ks.iter().zip(&spec) {
            let w = z.norm_sqr() / norm;
            let p = hbar * k;
            m1 += p * w;
            m2 += p * p * w;
        }
        (m1, (m2 - m1 * m1).max(0.0).sqrt())
    }

    /// Free-particle propagation by time `t`: multiply the spectrum with
    /// `exp(-i hbar k^2 t / 2 mass)`.
    pub fn propagate_free(&self, psi: &mut [Complex64], t: f64, mass: f64, hbar: f64) {
        self.fft_inplace(psi, false);
        for (k, z) in self.wavenumbers().iter().zip(psi.iter_mut()) {
            let phase = -hbar * k * k * t / (2.0 * mass);
            *z *= Complex64::from_polar(1.0, phase);
        }
        self.fft_inplace(psi, true);
    }
}

/// Normalized Gaussian packet `(pi s^2)^(-1/4) exp(-(x-x0)^2/(2 s^2) + i p0 x / hbar)`.
pub fn gaussian_packet(x0: f64, p0: f64, s: f64, hbar: f64) -> impl Fn(f64) -> Complex64 {
    let norm = (PI * s * s).powf(-0.25);
    move |x| {
        let d = x - x0;
        Complex64::from_polar(norm * (-d * d / (2.0 * s * s)).exp(), p0 * x / hbar)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn gaussian_moments_on_grid() {
        let grid = PositionGrid::new(1024, 20.0).unwrap();
        let s = 0.9;
        let psi = grid.sample(gaussian_packet(1.3, -0.7, s, 1.0));
        assert_relative_eq!(grid.norm_sqr(&psi), 1.0, epsilon = 1e-10);
        let (xm, xs) = grid.position_moments(&psi);
        assert_relative_eq!(xm, 1.3, epsilon = 1e-9);
        assert_relative_eq!(xs, s / 2.0_f64.sqrt(), epsilon = 1e-9);
        let (pm, ps) = grid.momentum_moments(&psi, 1.0);
        assert_relative_eq!(pm, -0.7, epsilon = 1e-9);
        assert_relative_eq!(ps, 1.0 / (s * 2.0_f64.sqrt()), epsilon = 1e-9);
    }

    #[test]
    fn free_propagation_spreads_like_the_closed_form() {
        let grid = PositionGrid::new(2048, 60.0).unwrap();
        let s = 1.0;
        let hbar = 1.0;
        let mut psi = grid.sample(gaussian_packet(0.0, 1.0, s, hbar));
        let t = 2.0;
        grid.propagate_free(&mut psi, t, 1.0, hbar);
        assert_relative_eq!(grid.norm_sqr(&psi), 1.0, epsilon = 1e-9);
        let (xm, xs) = grid.position_moments(&psi);
        // dq(t)^2 = dq^2 + (dp t / m)^2 for a minimum packet
        let dq0 = s / 2.0_f64.sqrt();
        let dp0 = hbar / (s * 2.0_f64.sqrt());
        assert_relative_eq!(xm, 2.0, epsilon = 1e-8);
        assert_relative_eq!(
            xs,
            (dq0 * dq0 + dp0 * dp0 * t * t).sqrt(),
            epsilon = 1e-8
        );
    }
}
