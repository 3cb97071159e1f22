//! Classical maximum-entropy packets and their dynamics.
//!
//! An ME packet is the phase-space distribution that maximizes Gibbs
//! entropy subject to fixed first and second moments of position and
//! momentum. It comes out Gaussian and factorized, which makes every
//! moment and the exact evolution under at-most-quadratic potentials
//! available in closed form. A seeded Monte Carlo ensemble integrator
//! serves as the independent oracle for all of it.

mod monte_carlo;

pub use monte_carlo::{monte_carlo_dpdt, monte_carlo_oracle, EnsembleMoments};

use crate::{Error, Result};
use std::f64::consts::PI;

/// Phase-space cell volume default: `h = 2 pi hbar` with the library's
/// default hbar.
pub fn default_cell_volume() -> f64 {
    2.0 * PI * crate::DEFAULT_HBAR
}

/// Classical state coordinates of an ME packet: means, half-widths, and
/// the phase-space cell volume entering the entropy.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MEPacketParams {
    pub q: f64,
    pub p: f64,
    pub dq: f64,
    pub dp: f64,
    pub v: f64,
}

impl MEPacketParams {
    /// Packet with the default cell volume `h = 2 pi hbar`.
    pub fn new(q: f64, p: f64, dq: f64, dp: f64) -> Result<Self> {
        Self::with_cell_volume(q, p, dq, dp, default_cell_volume())
    }

    pub fn with_cell_volume(q: f64, p: f64, dq: f64, dp: f64, v: f64) -> Result<Self> {
        let pkt = Self { q, p, dq, dp, v };
        pkt.validate()?;
        Ok(pkt)
    }

    pub fn validate(&self) -> Result<()> {
        for (name, x) in [
            ("Q", self.q),
            ("P", self.p),
            ("dQ", self.dq),
            ("dP", self.dp),
            ("v", self.v),
        ] {
            if !x.is_finite() {
                return Err(Error::Validation(format!("{name} must be finite")));
            }
        }
        // delta-function limits are an idealization the code refuses
        if self.dq <= 1e-12 * (1.0 + self.q.abs()) {
            return Err(Error::Validation(format!("dQ = {} is degenerate", self.dq)));
        }
        if self.dp <= 1e-12 * (1.0 + self.p.abs()) {
            return Err(Error::Validation(format!("dP = {} is degenerate", self.dp)));
        }
        if self.v <= 0.0 {
            return Err(Error::Validation("cell volume v must be positive".into()));
        }
        Ok(())
    }
}

/// The four Lagrange multipliers of the classical maximum-entropy problem.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LagrangeMultipliers {
    pub l1: f64,
    pub l2: f64,
    pub l3: f64,
    pub l4: f64,
}

/// Multipliers in terms of the packet coordinates:
/// `l1 = -Q/dQ^2`, `l3 = 1/(2 dQ^2)`, `l2 = -P/dP^2`, `l4 = 1/(2 dP^2)`.
pub fn multipliers_from_params(p: &MEPacketParams) -> Result<LagrangeMultipliers> {
    p.validate()?;
    Ok(LagrangeMultipliers {
        l1: -p.q / (p.dq * p.dq),
        l3: 0.5 / (p.dq * p.dq),
        l2: -p.p / (p.dp * p.dp),
        l4: 0.5 / (p.dp * p.dp),
    })
}

/// Classical partition function of the packet's multipliers.
pub fn partition_function(m: &LagrangeMultipliers, v: f64) -> f64 {
    (PI / v) / (m.l3 * m.l4).sqrt() * (m.l1 * m.l1 / (4.0 * m.l3) + m.l2 * m.l2 / (4.0 * m.l4)).exp()
}

/// The ME-packet distribution function at a phase-space point, normalized
/// so that `integral rho dq dp / v = 1`.
pub fn density_at(p: &MEPacketParams, q: f64, pm: f64) -> f64 {
    let zq = (q - p.q) / p.dq;
    let zp = (pm - p.p) / p.dp;
    p.v / (2.0 * PI * p.dq * p.dp) * (-0.5 * zq * zq - 0.5 * zp * zp).exp()
}

/// Central moment `< x^k >` of a 1-D Gaussian with mean `m` and width `s`.
fn gaussian_moment_1d(m: f64, s: f64, k: u32) -> f64 {
    // binomial expansion over central moments: only even ones survive,
    // < (x-m)^(2j) > = (2j-1)!! s^(2j)
    let mut total = 0.0;
    let mut binom = 1.0;
    for j in 0..=k {
        if j % 2 == 0 {
            let mut double_fact = 1.0;
            let mut i = j as i64 - 1;
            while i > 1 {
                double_fact *= i as f64;
                i -= 2;
            }
            total += binom * m.powi((k - j) as i32) * double_fact * s.powi(j as i32);
        }
        binom *= (k - j) as f64 / (j + 1) as f64;
    }
    total
}

/// Moment `< q^k p^l >` of the factorized Gaussian packet, `k + l <= 8`.
pub fn gaussian_moment(p: &MEPacketParams, k: u32, l: u32) -> Result<f64> {
    if k + l > 8 {
        return Err(Error::Unsupported(format!(
            "moment order {} exceeds 8",
            k + l
        )));
    }
    Ok(gaussian_moment_1d(p.q, p.dq, k) * gaussian_moment_1d(p.p, p.dp, l))
}

/// Packet entropy `1 + ln(2 pi dQ dP / v)` in nats.
pub fn classical_entropy(p: &MEPacketParams) -> f64 {
    1.0 + (2.0 * PI * p.dq * p.dp / p.v).ln()
}

/// Polynomial potential `V(q) = sum_k V_k q^k / k!` with coefficients up
/// to `V_5`, plus the particle mass.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PolynomialPotential {
    /// `[V0, V1, V2, V3, V4, V5]`; note the `1/k!` convention.
    pub coefficients: [f64; 6],
    pub mass: f64,
}

impl PolynomialPotential {
    pub fn new(coefficients: [f64; 6], mass: f64) -> Result<Self> {
        if coefficients.iter().any(|c| !c.is_finite()) {
            return Err(Error::Validation("potential coefficients must be finite".into()));
        }
        if !(mass > 0.0) {
            return Err(Error::Validation("mass must be positive".into()));
        }
        Ok(Self { coefficients, mass })
    }

    pub fn free(mass: f64) -> Self {
        Self {
            coefficients: [0.0; 6],
            mass,
        }
    }

    pub fn harmonic(v2: f64, mass: f64) -> Self {
        Self {
            coefficients: [0.0, 0.0, v2, 0.0, 0.0, 0.0],
            mass,
        }
    }

    pub fn v(&self, k: usize) -> f64 {
        self.coefficients[k]
    }

    pub fn is_at_most_quadratic(&self) -> bool {
        self.coefficients[3] == 0.0 && self.coefficients[4] == 0.0 && self.coefficients[5] == 0.0
    }

    /// Potential value at `q`.
    pub fn value(&self, q: f64) -> f64 {
        let mut fact = 1.0;
        let mut qk = 1.0;
        let mut total = 0.0;
        for (k, &c) in self.coefficients.iter().enumerate() {
            if k > 0 {
                fact *= k as f64;
                qk *= q;
            }
            total += c * qk / fact;
        }
        total
    }

    /// Force `-dV/dq` at `q`.
    pub fn force(&self, q: f64) -> f64 {
        let c = &self.coefficients;
        -(c[1] + c[2] * q + c[3] * q * q / 2.0 + c[4] * q * q * q / 6.0
            + c[5] * q * q * q * q / 24.0)
    }
}

/// The linear-flow basis functions of an at-most-quadratic potential:
/// `q(t) = f0 + q f1 + p f2`, `p(t) = g0 + q g1 + p g2`.
#[derive(Debug, Clone, Copy)]
pub struct QuadraticEvolutionBasis {
    pub f0: f64,
    pub f1: f64,
    pub f2: f64,
    pub g0: f64,
    pub g1: f64,
    pub g2: f64,
    /// Set when `V2 < 0`: hyperbolic (anti-oscillator) growth.
    pub hyperbolic: bool,
}

impl QuadraticEvolutionBasis {
    /// Determinant of the linear map; symplectic flow keeps it at one.
    pub fn determinant(&self) -> f64 {
        self.f1 * self.g2 - self.f2 * self.g1
    }
}

/// Evaluate the basis functions at time `t`.
pub fn quadratic_basis(vpot: &PolynomialPotential, t: f64) -> Result<QuadraticEvolutionBasis> {
    if !vpot.is_at_most_quadratic() {
        return Err(Error::Unsupported(
            "closed-form evolution needs an at-most-quadratic potential".into(),
        ));
    }
    let mu = vpot.mass;
    let v1 = vpot.v(1);
    let v2 = vpot.v(2);
    if v2 == 0.0 {
        return Ok(QuadraticEvolutionBasis {
            f0: -v1 / (2.0 * mu) * t * t,
            f1: 1.0,
            f2: t / mu,
            g0: -v1 * t,
            g1: 0.0,
            g2: 1.0,
            hyperbolic: false,
        });
    }
    if v2 > 0.0 {
        let omega = (v2 / mu).sqrt();
        let xi = (mu * v2).sqrt();
        let (s, c) = (omega * t).sin_cos();
        Ok(QuadraticEvolutionBasis {
            f0: -v1 / v2 * (1.0 - c),
            f1: c,
            f2: s / xi,
            g0: -xi * v1 / v2 * s,
            g1: -xi * s,
            g2: c,
            hyperbolic: false,
        })
    } else {
        // anti-oscillator: trigonometric functions continue to hyperbolic
        let w = (-v2 / mu).sqrt();
        let x = (-mu * v2).sqrt();
        let (s, c) = ((w * t).sinh(), (w * t).cosh());
        Ok(QuadraticEvolutionBasis {
            f0: -v1 / v2 * (1.0 - c),
            f1: c,
            f2: s / x,
            g0: x * v1 / v2 * s,
            g1: x * s,
            g2: c,
            hyperbolic: true,
        })
    }
}

/// Result of the closed-form quadratic evolution.
#[derive(Debug, Clone, Copy)]
pub struct EvolvedPacket {
    pub params: MEPacketParams,
    /// True when the potential is an anti-oscillator (`V2 < 0`).
    pub hyperbolic: bool,
}

/// Exact packet evolution under an at-most-quadratic potential:
/// means follow the point flow, half-widths follow
/// `dQ(t) = sqrt(f1^2 dQ^2 + f2^2 dP^2)` and
/// `dP(t) = sqrt(g1^2 dQ^2 + g2^2 dP^2)`.
pub fn evolve_quadratic(
    p: &MEPacketParams,
    vpot: &PolynomialPotential,
    t: f64,
) -> Result<EvolvedPacket> {
    p.validate()?;
    let b = quadratic_basis(vpot, t)?;
    let q_t = b.f0 + p.q * b.f1 + p.p * b.f2;
    let p_t = b.g0 + p.q * b.g1 + p.p * b.g2;
    let dq_t = (b.f1 * b.f1 * p.dq * p.dq + b.f2 * b.f2 * p.dp * p.dp).sqrt();
    let dp_t = (b.g1 * b.g1 * p.dq * p.dq + b.g2 * b.g2 * p.dp * p.dp).sqrt();
    Ok(EvolvedPacket {
        params: MEPacketParams {
            q: q_t,
            p: p_t,
            dq: dq_t,
            dp: dp_t,
            v: p.v,
        },
        hyperbolic: b.hyperbolic,
    })
}

/// Time derivatives of the packet means at `t = 0`.
///
/// `dp[n]` is the `(n+1)`-th derivative of `P`; `dq[n]` the same for `Q`.
#[derive(Debug, Clone, Copy)]
pub struct MomentDerivatives {
    pub dp: [f64; 4],
    pub dq: [f64; 4],
}

/// First four time derivatives of the packet means for a potential of up
/// to fourth order, obtained by Gaussian averaging of the point-particle
/// derivative expressions. Fifth- and higher-order rest terms are dropped.
pub fn moment_taylor_derivatives(
    p: &MEPacketParams,
    vpot: &PolynomialPotential,
) -> Result<MomentDerivatives> {
    p.validate()?;
    let (q, pm, s, w) = (p.q, p.p, p.dq, p.dp);
    let mu = vpot.mass;
    let (v1, v2, v3, v4) = (vpot.v(1), vpot.v(2), vpot.v(3), vpot.v(4));

    // factorized Gaussian averages of the monomials appearing in the
    // point-particle derivative chains
    let q2 = q * q + s * s;
    let q3 = q * q * q + 3.0 * q * s * s;
    let q4 = q.powi(4) + 6.0 * q * q * s * s + 3.0 * s.powi(4);
    let q5 = q.powi(5) + 10.0 * q.powi(3) * s * s + 15.0 * q * s.powi(4);
    let p2 = pm * pm + w * w;
    let p3 = pm.powi(3) + 3.0 * pm * w * w;

    let d1 = -v1 - v2 * q - v3 / 2.0 * q2 - v4 / 6.0 * q3;
    let d2 = -v2 / mu * pm - v3 / mu * q * pm - v4 / (2.0 * mu) * q2 * pm;
    let d3 = -v3 / (mu * mu) * p2 - v4 / (mu * mu) * q * p2
        + v1 * v2 / mu
        + (v1 * v3 + v2 * v2) / mu * q
        + (3.0 * v2 * v3 + v1 * v4) / (2.0 * mu) * q2
        + (4.0 * v2 * v4 + 3.0 * v3 * v3) / (6.0 * mu) * q3
        + 5.0 * v3 * v4 / (12.0 * mu) * q4
        + v4 * v4 / (12.0 * mu) * q5;
    let d4 = -v4 / mu.powi(3) * p3
        + (3.0 * v1 * v3 + v2 * v2) / (mu * mu) * pm
        + (3.0 * v1 * v4 + 5.0 * v2 * v3) / (mu * mu) * q * pm
        + (5.0 * v3 * v3 + 8.0 * v2 * v4) / (2.0 * mu * mu) * q2 * pm
        + 3.0 * v3 * v4 / (mu * mu) * q3 * pm
        + 3.0 * v4 * v4 / (4.0 * mu * mu) * q4 * pm;

    // dq^(n)/dt^(n) = (1/mu) dp^(n-1)/dt^(n-1), with dp^(0) = P
    Ok(MomentDerivatives {
        dp: [d1, d2, d3, d4],
        dq: [pm / mu, d1 / mu, d2 / mu, d3 / mu],
    })
}

/// Short-time mean trajectory from the fourth-order Taylor expansion of
/// the derivatives at `t = 0`; no global closure exists beyond quadratic
/// potentials, so this is only trustworthy for small `t`.
pub fn taylor_predict(
    p: &MEPacketParams,
    vpot: &PolynomialPotential,
    t: f64,
) -> Result<(f64, f64)> {
    let d = moment_taylor_derivatives(p, vpot)?;
    let mut q = p.q;
    let mut pm = p.p;
    let mut tn = 1.0;
    let mut fact = 1.0;
    for n in 0..4 {
        tn *= t;
        fact *= (n + 1) as f64;
        q += d.dq[n] * tn / fact;
        pm += d.dp[n] * tn / fact;
    }
    Ok((q, pm))
}
