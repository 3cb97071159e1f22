//! A one-dimensional chain of identical particles with nearest-neighbour
//! elastic forces: the solvable model of a classical rigid body.
//!
//! Normal-mode diagonalization separates a free center-of-mass mode from
//! `N - 1` phonon modes. The internal Gibbs state at a fixed average
//! energy then fixes the statistics of the body's length: the mean is
//! exactly `(N-1) xi` and the relative fluctuation falls off as
//! `1/sqrt(N)`.

use crate::me_classical::{evolve_quadratic, MEPacketParams, PolynomialPotential};
use crate::{Error, Result};
use nalgebra::DMatrix;
use std::f64::consts::PI;

/// Structural parameters of the chain.
#[derive(Debug, Clone, Copy)]
pub struct ChainSpec {
    /// Particle count.
    pub n: usize,
    /// Particle mass.
    pub mu: f64,
    /// Oscillator strength; `kappa^2 / 2` multiplies the squared
    /// nearest-neighbour displacement in the Hamiltonian.
    pub kappa: f64,
    /// Equilibrium spacing.
    pub xi: f64,
    pub hbar: f64,
}

impl ChainSpec {
    pub fn new(n: usize, mu: f64, kappa: f64, xi: f64, hbar: f64) -> Result<Self> {
        if n < 2 {
            return Err(Error::Validation(format!("chain needs N >= 2, got {n}")));
        }
        for (name, x) in [("mu", mu), ("kappa", kappa), ("xi", xi), ("hbar", hbar)] {
            if !(x > 0.0) {
                return Err(Error::Validation(format!("{name} must be positive")));
            }
        }
        Ok(Self {
            n,
            mu,
            kappa,
            xi,
            hbar,
        })
    }

    /// Mode frequency `omega_m = (2 kappa / sqrt(mu)) sin(m pi / 2N)`.
    pub fn omega(&self, m: usize) -> f64 {
        2.0 * self.kappa / self.mu.sqrt() * (m as f64 * PI / (2.0 * self.n as f64)).sin()
    }
}

/// The orthogonal mode transform and its frequency spectrum.
#[derive(Debug, Clone)]
pub struct NormalModes {
    /// `y[(m, part)]`: coefficient of particle `part` in mode `m`
    /// (0-based; the chain formulas label particles from 1).
    pub y: DMatrix<f64>,
    pub omega: Vec<f64>,
}

/// Build the normal modes: cosine rows for even mode index, sine rows for
/// odd, the zero mode uniform.
pub fn build_modes(spec: &ChainSpec) -> NormalModes {
    let n = spec.n;
    let mut y = DMatrix::zeros(n, n);
    for m in 0..n {
        let amp = if m == 0 {
            1.0 / (n as f64).sqrt()
        } else {
            (2.0 / n as f64).sqrt()
        };
        for part in 0..n {
            let arg = PI * m as f64 / n as f64 * ((part + 1) as f64 - (n as f64 + 1.0) / 2.0);
            y[(m, part)] = amp * if m % 2 == 0 { arg.cos() } else { arg.sin() };
        }
    }
    NormalModes {
        y,
        omega: (0..n).map(|m| spec.omega(m)).collect(),
    }
}

impl NormalModes {
    /// Largest deviation of `Y Y^T` from the identity.
    pub fn orthogonality_defect(&self) -> f64 {
        let n = self.y.nrows();
        let g = &self.y * self.y.transpose() - DMatrix::identity(n, n);
        g.iter().map(|x| x.abs()).fold(0.0, f64::max)
    }
}

/// Chain Hamiltonian at a phase-space point in particle coordinates.
pub fn chain_energy(spec: &ChainSpec, xs: &[f64], ps: &[f64]) -> f64 {
    let kinetic: f64 = ps.iter().map(|p| p * p).sum::<f64>() / (2.0 * spec.mu);
    let elastic: f64 = (1..spec.n)
        .map(|i| {
            let d = xs[i] - xs[i - 1] - spec.xi;
            d * d
        })
        .sum::<f64>()
        * spec.kappa
        * spec.kappa
        / 2.0;
    kinetic + elastic
}

/// The same energy through the mode coordinates,
/// `H = sum q_m^2/(2 mu) + sum mu omega_m^2 u_m^2 / 2`.
pub fn mode_energy(spec: &ChainSpec, modes: &NormalModes, us: &[f64], qs: &[f64]) -> f64 {
    let kinetic: f64 = qs.iter().map(|q| q * q).sum::<f64>() / (2.0 * spec.mu);
    let elastic: f64 = us
        .iter()
        .zip(&modes.omega)
        .map(|(u, w)| spec.mu * w * w * u * u / 2.0)
        .sum();
    kinetic + elastic
}

/// Map mode coordinates `(u, q)` to particle coordinates `(x, p)`,
/// including the equilibrium offsets.
pub fn modes_to_particles(
    spec: &ChainSpec,
    modes: &NormalModes,
    us: &[f64],
    qs: &[f64],
) -> (Vec<f64>, Vec<f64>) {
    let n = spec.n;
    let mut xs = vec![0.0; n];
    let mut ps = vec![0.0; n];
    for part in 0..n {
        let mut x = ((part + 1) as f64 - (n as f64 + 1.0) / 2.0) * spec.xi;
        let mut p = 0.0;
        for m in 0..n {
            x += modes.y[(m, part)] * us[m];
            p += modes.y[(m, part)] * qs[m];
        }
        xs[part] = x;
        ps[part] = p;
    }
    (xs, ps)
}

/// The internal Gibbs state: the multiplier and the mean phonon numbers.
#[derive(Debug, Clone)]
pub struct RodGibbs {
    /// Inverse-energy Lagrange multiplier.
    pub lambda: f64,
    /// Mean occupation of modes `1 .. N-1`; index 0 is the (absent)
    /// center-of-mass slot, kept so indices line up with mode numbers.
    pub occupations: Vec<f64>,
    /// Internal energy of this state.
    pub energy: f64,
}

fn occupation(lambda: f64, hbar_omega: f64) -> f64 {
    1.0 / (lambda * hbar_omega).exp_m1()
}

fn internal_energy(spec: &ChainSpec, lambda: f64) -> f64 {
    (1..spec.n)
        .map(|m| {
            let hw = spec.hbar * spec.omega(m);
            hw * occupation(lambda, hw)
        })
        .sum()
}

/// Gibbs state at a given multiplier.
pub fn gibbs_at_lambda(spec: &ChainSpec, lambda: f64) -> Result<RodGibbs> {
    if !(lambda > 0.0) {
        return Err(Error::Validation("lambda must be positive".into()));
    }
    let mut occupations = vec![0.0; spec.n];
    for (m, occ) in occupations.iter_mut().enumerate().skip(1) {
        *occ = occupation(lambda, spec.hbar * spec.omega(m));
    }
    Ok(RodGibbs {
        lambda,
        occupations,
        energy: internal_energy(spec, lambda),
    })
}

/// Solve for the multiplier reproducing a target internal energy by
/// bracketed bisection; the energy is strictly decreasing in lambda.
pub fn solve_lambda(spec: &ChainSpec, energy: f64) -> Result<RodGibbs> {
    if !(energy > 0.0) {
        return Err(Error::Validation(
            "no finite multiplier reproduces a non-positive energy".into(),
        ));
    }
    let scale = spec.hbar * spec.omega(1);
    let mut lo = 1e-12 / scale;
    let mut hi = 1e6 / scale;
    while internal_energy(spec, lo) < energy {
        lo *= 0.5;
        if lo < f64::MIN_POSITIVE * 1e6 {
            return Err(Error::Numerical("bracket underflow solving lambda".into()));
        }
    }
    while internal_energy(spec, hi) > energy {
        hi *= 2.0;
        if !hi.is_finite() {
            return Err(Error::Numerical("bracket overflow solving lambda".into()));
        }
    }
    for _ in 0..200 {
        let mid = (lo * hi).sqrt();
        if internal_energy(spec, mid) > energy {
            lo = mid;
        } else {
            hi = mid;
        }
        if (hi - lo) / hi < 1e-14 {
            break;
        }
    }
    let g = gibbs_at_lambda(spec, (lo * hi).sqrt())?;
    if (g.energy - energy).abs() > 1e-10 * energy {
        return Err(Error::Numerical(format!(
            "bisection residual {:.3e} at E = {energy}",
            (g.energy - energy).abs() / energy
        )));
    }
    Ok(g)
}

/// Length statistics of the rod in a Gibbs state.
#[derive(Debug, Clone, Copy)]
pub struct LengthStatistics {
    pub mean: f64,
    pub variance: f64,
    /// `sqrt(N) dL / <L>`, the combination that converges for large `N`.
    pub sqrt_n_relative: f64,
    /// Closed-form large-`N` comparison constant
    /// `2 sqrt(3) / (pi kappa xi sqrt(lambda))`, reported alongside.
    pub asymptotic_constant: f64,
}

/// Exact mode sum for the length mean and variance: only odd modes enter,
/// each through its quadrature variance `hbar (2 n + 1) / (2 mu omega)`.
pub fn length_statistics(spec: &ChainSpec, gibbs: &RodGibbs) -> LengthStatistics {
    let n = spec.n;
    let mean = (n as f64 - 1.0) * spec.xi;
    let mut variance = 0.0;
    let mut m = 1;
    while 2 * m <= n {
        let mode = 2 * m - 1;
        let omega = spec.omega(mode);
        let u2 = spec.hbar * (2.0 * gibbs.occupations[mode] + 1.0) / (2.0 * spec.mu * omega);
        let c = ((2 * m - 1) as f64 * PI / (2.0 * n as f64)).cos();
        variance += 8.0 / n as f64 * c * c * u2;
        m += 1;
    }
    let rel = variance.sqrt() / mean;
    LengthStatistics {
        mean,
        variance,
        sqrt_n_relative: (n as f64).sqrt() * rel,
        asymptotic_constant: 2.0 * 3.0_f64.sqrt()
            / (PI * spec.kappa * spec.xi * gibbs.lambda.sqrt()),
    }
}

/// Relative variance of the internal energy,
/// `Var(E)/E^2 = sum (hbar omega)^2 n (n+1) / E^2`; a diagnostic for how
/// sharp the internal energy is in the Gibbs state.
pub fn energy_relative_variance(spec: &ChainSpec, gibbs: &RodGibbs) -> f64 {
    let var: f64 = (1..spec.n)
        .map(|m| {
            let hw = spec.hbar * spec.omega(m);
            let occ = gibbs.occupations[m];
            hw * hw * occ * (occ + 1.0)
        })
        .sum();
    var / (gibbs.energy * gibbs.energy)
}

/// Free center-of-mass motion of the whole rod: an ME packet with total
/// mass `N mu`. Classical and quantum moment trajectories coincide here
/// because the bulk Hamiltonian is quadratic.
pub fn bulk_motion(spec: &ChainSpec, cm_packet: &MEPacketParams, t: f64) -> Result<MEPacketParams> {
    let free = PolynomialPotential::free(spec.n as f64 * spec.mu);
    Ok(evolve_quadratic(cm_packet, &free, t)?.params)
}
