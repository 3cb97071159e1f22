//! Seeded Monte Carlo phase-space ensemble: the independent oracle for the
//! closed-form packet dynamics.
//!
//! Initial points are drawn from the packet's Gaussian, each trajectory is
//! integrated with fixed-step classic Runge-Kutta, and empirical moments
//! with standard errors come back. Work is batched so that the result is
//! bit-identical for a given seed regardless of thread count: every batch
//! owns a ChaCha substream keyed by its index, and batch results are
//! reduced in index order.

use super::{MEPacketParams, PolynomialPotential};
use crate::{Error, Result};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;

const BATCH_SIZE: usize = 8192;

/// Empirical ensemble moments at the requested time, with standard errors.
#[derive(Debug, Clone, Copy)]
pub struct EnsembleMoments {
    pub n_samples: usize,
    pub q_mean: f64,
    pub p_mean: f64,
    pub dq: f64,
    pub dp: f64,
    /// Standard error of the mean of q.
    pub q_se: f64,
    /// Standard error of the mean of p.
    pub p_se: f64,
    /// Standard error of the q standard deviation (Gaussian approximation).
    pub dq_se: f64,
    /// Standard error of the p standard deviation (Gaussian approximation).
    pub dp_se: f64,
}

#[derive(Debug, Clone, Copy, Default)]
struct Accum {
    n: f64,
    sq: f64,
    sp: f64,
    sqq: f64,
    spp: f64,
    max_drift: f64,
}

impl Accum {
    fn merge(mut self, other: Accum) -> Accum {
        self.n += other.n;
        self.sq += other.sq;
        self.sp += other.sp;
        self.sqq += other.sqq;
        self.spp += other.spp;
        self.max_drift = self.max_drift.max(other.max_drift);
        self
    }
}

fn rk4_step(vpot: &PolynomialPotential, q: f64, p: f64, h: f64) -> (f64, f64) {
    let mu = vpot.mass;
    let f = |q: f64, p: f64| (p / mu, vpot.force(q));
    let (k1q, k1p) = f(q, p);
    let (k2q, k2p) = f(q + 0.5 * h * k1q, p + 0.5 * h * k1p);
    let (k3q, k3p) = f(q + 0.5 * h * k2q, p + 0.5 * h * k2p);
    let (k4q, k4p) = f(q + h * k3q, p + h * k3p);
    (
        q + h / 6.0 * (k1q + 2.0 * k2q + 2.0 * k3q + k4q),
        p + h / 6.0 * (k1p + 2.0 * k2p + 2.0 * k3p + k4p),
    )
}

fn step_count(vpot: &PolynomialPotential, t: f64) -> usize {
    if t == 0.0 {
        return 0;
    }
    let v2 = vpot.v(2).abs();
    // omega * h <= 0.01 when an oscillator frequency exists, otherwise
    // resolve the interval itself
    let h_max = if v2 > 0.0 {
        0.01 * (vpot.mass / v2).sqrt()
    } else {
        t.abs() / 100.0
    };
    (t.abs() / h_max).ceil().max(1.0) as usize
}

fn energy(vpot: &PolynomialPotential, q: f64, p: f64) -> f64 {
    p * p / (2.0 * vpot.mass) + vpot.value(q)
}

/// Integrate one initial condition to time `t`; returns the endpoint and
/// the relative energy drift of the trajectory.
pub(crate) fn integrate_trajectory(
    vpot: &PolynomialPotential,
    q0: f64,
    p0: f64,
    t: f64,
) -> (f64, f64, f64) {
    let n = step_count(vpot, t);
    if n == 0 {
        return (q0, p0, 0.0);
    }
    let h = t / n as f64;
    let (mut q, mut p) = (q0, p0);
    for _ in 0..n {
        (q, p) = rk4_step(vpot, q, p, h);
    }
    let e0 = energy(vpot, q0, p0);
    let e1 = energy(vpot, q, p);
    let scale = e0.abs().max(1e-12);
    (q, p, (e1 - e0).abs() / scale)
}

/// Sample the packet, integrate Hamilton's equations, return empirical
/// moments of the ensemble at time `t`.
///
/// For an at-most-quadratic potential a relative energy drift beyond 1%
/// on any trajectory flags integrator trouble and errors out.
pub fn monte_carlo_oracle(
    pkt: &MEPacketParams,
    vpot: &PolynomialPotential,
    t: f64,
    n_samples: usize,
    seed: u64,
) -> Result<EnsembleMoments> {
    pkt.validate()?;
    if n_samples < 1000 {
        return Err(Error::Validation(format!(
            "need at least 1000 samples, got {n_samples}"
        )));
    }
    let n_batches = n_samples.div_ceil(BATCH_SIZE);
    let total = ((n_batches - 1) * BATCH_SIZE..n_samples).len() + (n_batches - 1) * BATCH_SIZE;
    debug_assert_eq!(total, n_samples);

    let q_dist = Normal::new(pkt.q, pkt.dq)
        .map_err(|e| Error::Validation(format!("bad q distribution: {e}")))?;
    let p_dist = Normal::new(pkt.p, pkt.dp)
        .map_err(|e| Error::Validation(format!("bad p distribution: {e}")))?;

    let mut batch_results: Vec<(usize, Accum)> = (0..n_batches)
        .into_par_iter()
        .map(|b| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(b as u64);
            let count = if b + 1 == n_batches {
                n_samples - b * BATCH_SIZE
            } else {
                BATCH_SIZE
            };
            let mut acc = Accum::default();
            for _ in 0..count {
                let q0 = q_dist.sample(&mut rng);
                let p0 = p_dist.sample(&mut rng);
                let (q, p, drift) = integrate_trajectory(vpot, q0, p0, t);
                acc.n += 1.0;
                acc.sq += q;
                acc.sp += p;
                acc.sqq += q * q;
                acc.spp += p * p;
                acc.max_drift = acc.max_drift.max(drift);
            }
            (b, acc)
        })
        .collect();
    batch_results.sort_by_key(|&(b, _)| b);
    let acc = batch_results
        .into_iter()
        .map(|(_, a)| a)
        .fold(Accum::default(), Accum::merge);

    if vpot.is_at_most_quadratic() && acc.max_drift > 0.01 {
        return Err(Error::Numerical(format!(
            "integrator energy drift {:.3e} exceeds 1% on a quadratic potential",
            acc.max_drift
        )));
    }

    let n = acc.n;
    let q_mean = acc.sq / n;
    let p_mean = acc.sp / n;
    let q_var = (acc.sqq / n - q_mean * q_mean).max(0.0) * n / (n - 1.0);
    let p_var = (acc.spp / n - p_mean * p_mean).max(0.0) * n / (n - 1.0);
    let dq = q_var.sqrt();
    let dp = p_var.sqrt();
    Ok(EnsembleMoments {
        n_samples,
        q_mean,
        p_mean,
        dq,
        dp,
        q_se: dq / n.sqrt(),
        p_se: dp / n.sqrt(),
        dq_se: dq / (2.0 * n).sqrt(),
        dp_se: dp / (2.0 * n).sqrt(),
    })
}

/// Ensemble estimate of `dP/dt` at `t = 0` by a per-sample central
/// difference with common random numbers, with its standard error.
pub fn monte_carlo_dpdt(
    pkt: &MEPacketParams,
    vpot: &PolynomialPotential,
    delta: f64,
    n_samples: usize,
    seed: u64,
) -> Result<(f64, f64)> {
    pkt.validate()?;
    if n_samples < 1000 {
        return Err(Error::Validation(format!(
            "need at least 1000 samples, got {n_samples}"
        )));
    }
    if !(delta > 0.0) {
        return Err(Error::Validation("delta must be positive".into()));
    }
    let q_dist = Normal::new(pkt.q, pkt.dq)
        .map_err(|e| Error::Validation(format!("bad q distribution: {e}")))?;
    let p_dist = Normal::new(pkt.p, pkt.dp)
        .map_err(|e| Error::Validation(format!("bad p distribution: {e}")))?;

    let n_batches = n_samples.div_ceil(BATCH_SIZE);
    let mut batch_results: Vec<(usize, (f64, f64, f64))> = (0..n_batches)
        .into_par_iter()
        .map(|b| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(b as u64);
            let count = if b + 1 == n_batches {
                n_samples - b * BATCH_SIZE
            } else {
                BATCH_SIZE
            };
            let (mut n, mut s, mut ss) = (0.0, 0.0, 0.0);
            for _ in 0..count {
                let q0 = q_dist.sample(&mut rng);
                let p0 = p_dist.sample(&mut rng);
                let (_, p_plus, _) = integrate_trajectory(vpot, q0, p0, delta);
                let (_, p_minus, _) = integrate_trajectory(vpot, q0, p0, -delta);
                let fd = (p_plus - p_minus) / (2.0 * delta);
                n += 1.0;
                s += fd;
                ss += fd * fd;
            }
            (b, (n, s, ss))
        })
        .collect();
    batch_results.sort_by_key(|&(b, _)| b);
    let (n, s, ss) = batch_results.into_iter().fold((0.0, 0.0, 0.0), |acc, (_, v)| {
        (acc.0 + v.0, acc.1 + v.1, acc.2 + v.2)
    });
    let mean = s / n;
    let var = ((ss / n - mean * mean).max(0.0)) * n / (n - 1.0);
    Ok((mean, (var / n).sqrt()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::me_classical::{evolve_quadratic, moment_taylor_derivatives};

    #[test]
    fn free_particle_spread_matches_closed_form() {
        let pkt = MEPacketParams::new(0.0, 1.0, 1.0, 1.0).unwrap();
        let vpot = PolynomialPotential::free(1.0);
        let m = monte_carlo_oracle(&pkt, &vpot, 2.0, 200_000, 7).unwrap();
        let exact = 5.0_f64.sqrt();
        assert!(
            (m.dq - exact).abs() < 3.0 * m.dq_se,
            "dq = {} vs {} (se {})",
            m.dq,
            exact,
            m.dq_se
        );
        assert!((m.q_mean - 2.0).abs() < 3.0 * m.q_se);
    }

    #[test]
    fn quadratic_potential_matches_closed_form_within_three_sigma() {
        let pkt = MEPacketParams::new(0.6, -0.4, 0.8, 1.2).unwrap();
        let vpot = PolynomialPotential::new([0.0, 0.3, 1.4, 0.0, 0.0, 0.0], 0.9).unwrap();
        let t = 1.3;
        let exact = evolve_quadratic(&pkt, &vpot, t).unwrap().params;
        let m = monte_carlo_oracle(&pkt, &vpot, t, 200_000, 11).unwrap();
        assert!((m.q_mean - exact.q).abs() < 3.0 * m.q_se);
        assert!((m.p_mean - exact.p).abs() < 3.0 * m.p_se);
        assert!((m.dq - exact.dq).abs() < 3.0 * m.dq_se);
        assert!((m.dp - exact.dp).abs() < 3.0 * m.dp_se);
    }

    #[test]
    fn cubic_potential_dpdt_matches_taylor_formula() {
        let pkt = MEPacketParams::new(0.3, 0.2, 0.4, 0.5).unwrap();
        let vpot = PolynomialPotential::new([0.0, 0.0, 0.0, 0.8, 0.0, 0.0], 1.0).unwrap();
        let d = moment_taylor_derivatives(&pkt, &vpot).unwrap();
        let (fd, se) = monte_carlo_dpdt(&pkt, &vpot, 0.02, 100_000, 3).unwrap();
        assert!(
            (fd - d.dp[0]).abs() < 3.0 * se + 1e-4,
            "fd {} vs formula {} (se {})",
            fd,
            d.dp[0],
            se
        );
    }

    #[test]
    fn same_seed_same_result() {
        let pkt = MEPacketParams::new(0.0, 0.0, 1.0, 1.0).unwrap();
        let vpot = PolynomialPotential::harmonic(1.0, 1.0);
        let a = monte_carlo_oracle(&pkt, &vpot, 0.7, 20_000, 42).unwrap();
        let b = monte_carlo_oracle(&pkt, &vpot, 0.7, 20_000, 42).unwrap();
        assert_eq!(a.q_mean.to_bits(), b.q_mean.to_bits());
        assert_eq!(a.dp.to_bits(), b.dp.to_bits());
    }

    #[test]
    fn convergence_rate_is_one_over_sqrt_n() {
        let pkt = MEPacketParams::new(0.0, 0.0, 1.0, 1.0).unwrap();
        let vpot = PolynomialPotential::free(1.0);
        let small = monte_carlo_oracle(&pkt, &vpot, 1.0, 10_000, 5).unwrap();
        let large = monte_carlo_oracle(&pkt, &vpot, 1.0, 160_000, 5).unwrap();
        let exact = 2.0_f64.sqrt();
        // 16x the samples gives 4x the precision; allow generous slack on
        // a single random draw
        let e_small = (small.dq - exact).abs().max(small.dq_se);
        let e_large = (large.dq - exact).abs().max(large.dq_se / 4.0);
        assert!(
            e_large < e_small,
            "error did not shrink: {e_small} -> {e_large}"
        );
    }

    #[test]
    fn too_few_samples_rejected() {
        let pkt = MEPacketParams::new(0.0, 0.0, 1.0, 1.0).unwrap();
        let vpot = PolynomialPotential::free(1.0);
        assert!(monte_carlo_oracle(&pkt, &vpot, 1.0, 10, 1).is_err());
    }
}
