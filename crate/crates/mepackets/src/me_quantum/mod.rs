//! Quantum maximum-entropy packets.
//!
//! The quantum ME packet for given `(Q, P, dQ, dP)` is diagonal in the
//! number basis of an auxiliary oscillator centered at the packet, with
//! geometric eigenvalues `R_m = 2 (nu-1)^m / (nu+1)^(m+1)` where
//! `nu = 2 dQ dP / hbar`. That diagonal form drives everything here:
//! state construction, the entropy, a symbolic moment calculator over the
//! ladder algebra, exact dynamics for at-most-quadratic potentials, and
//! the hbar-correction terms that appear beyond them.

mod ladder;
mod matrix_rep;

pub use ladder::{classical_word_average, ladder_average, symmetrized_average, PhaseSpaceOp};
pub use matrix_rep::{evolve_matrix, represent_packet, MatrixMoments, OscRep};

use crate::me_classical::{
    evolve_quadratic, multipliers_from_params, EvolvedPacket, LagrangeMultipliers, MEPacketParams,
    PolynomialPotential,
};
use crate::qcore::StateOperator;
use crate::{Error, Result};
use nalgebra::DMatrix;
use num_complex::Complex64;

/// Default bound on the neglected eigenvalue tail of a built state.
pub const DEFAULT_TAIL_TOL: f64 = 1e-12;

/// A quantum ME packet: classical packet coordinates plus hbar.
///
/// The cell volume `v` of the embedded classical parameters is unused on
/// the quantum side; `nu = 2 dQ dP / hbar >= 1` is the fuzziness.
#[derive(Debug, Clone, Copy)]
pub struct QuantumMEPacket {
    pub params: MEPacketParams,
    pub hbar: f64,
}

impl QuantumMEPacket {
    pub fn new(q: f64, p: f64, dq: f64, dp: f64, hbar: f64) -> Result<Self> {
        if !(hbar > 0.0) {
            return Err(Error::Validation("hbar must be positive".into()));
        }
        let params = MEPacketParams::with_cell_volume(q, p, dq, dp, 2.0 * std::f64::consts::PI * hbar)?;
        let pkt = Self { params, hbar };
        if pkt.nu() < 1.0 - 1e-12 {
            return Err(Error::Validation(format!(
                "uncertainty bound violated: nu = {} < 1",
                pkt.nu()
            )));
        }
        Ok(pkt)
    }

    /// Packet with the requested fuzziness `nu` at fixed widths; hbar is
    /// chosen as `2 dQ dP / nu`.
    pub fn with_nu(q: f64, p: f64, dq: f64, dp: f64, nu: f64) -> Result<Self> {
        if nu < 1.0 - 1e-12 {
            return Err(Error::Validation(format!("nu = {nu} < 1")));
        }
        Self::new(q, p, dq, dp, 2.0 * dq * dp / nu)
    }

    /// Fuzziness `nu = 2 dQ dP / hbar`, clamped up to 1 against roundoff.
    pub fn nu(&self) -> f64 {
        (2.0 * self.params.dq * self.params.dp / self.hbar).max(1.0)
    }

    /// Geometric ratio `(nu-1)/(nu+1)` of the eigenvalue sequence.
    pub fn eigenvalue_ratio(&self) -> f64 {
        let nu = self.nu();
        ((nu - 1.0) / (nu + 1.0)).max(0.0)
    }

    /// Eigenvalue `R_m = 2 (nu-1)^m / (nu+1)^(m+1)`.
    pub fn eigenvalue(&self, m: usize) -> f64 {
        let nu = self.nu();
        2.0 / (nu + 1.0) * self.eigenvalue_ratio().powi(m as i32)
    }
}

/// Lagrange multipliers of the quantum maximum-entropy problem.
#[derive(Debug, Clone, Copy)]
pub struct QuantumMultipliers {
    pub l1: f64,
    pub l2: f64,
    pub l3: f64,
    pub l4: f64,
}

/// Quantum multipliers: the classical ones scaled by
/// `(nu/2) ln((nu+1)/(nu-1))`, which tends to 1 as `nu` grows.
///
/// They diverge logarithmically as `nu -> 1`, so that region is rejected.
pub fn quantum_multipliers(pkt: &QuantumMEPacket) -> Result<QuantumMultipliers> {
    let nu = pkt.nu();
    if nu <= 1.0 + 1e-9 {
        return Err(Error::Validation(format!(
            "multipliers diverge as nu -> 1 (nu = {nu})"
        )));
    }
    let factor = nu / 2.0 * ((nu + 1.0) / (nu - 1.0)).ln();
    let LagrangeMultipliers { l1, l2, l3, l4 } = multipliers_from_params(&pkt.params)?;
    Ok(QuantumMultipliers {
        l1: l1 * factor,
        l2: l2 * factor,
        l3: l3 * factor,
        l4: l4 * factor,
    })
}

/// Log of the quantum partition function,
/// `ln Z = l1^2/4l3 + l2^2/4l4 - ln(2 sinh(hbar sqrt(l3 l4)))`.
pub fn ln_quantum_partition_function(m: &QuantumMultipliers, hbar: f64) -> Result<f64> {
    if !(m.l3 > 0.0 && m.l4 > 0.0) {
        return Err(Error::Validation("need l3 > 0 and l4 > 0".into()));
    }
    let s = hbar * (m.l3 * m.l4).sqrt();
    // ln(2 sinh s) = s + ln(1 - exp(-2s)), stable for large s
    let ln_sinh = s + (-(-2.0 * s).exp()).ln_1p();
    Ok(m.l1 * m.l1 / (4.0 * m.l3) + m.l2 * m.l2 / (4.0 * m.l4) - ln_sinh)
}

/// The quantum partition function itself; may overflow to infinity for
/// extreme multipliers, use [`ln_quantum_partition_function`] then.
pub fn quantum_partition_function(m: &QuantumMultipliers, hbar: f64) -> Result<f64> {
    Ok(ln_quantum_partition_function(m, hbar)?.exp())
}

/// Packet entropy in nats:
/// `S(nu) = -ln 2 + (nu+1)/2 ln(nu+1) - (nu-1)/2 ln(nu-1)`, with the last
/// term read as zero at `nu = 1`.
pub fn quantum_entropy(nu: f64) -> Result<f64> {
    if nu < 1.0 - 1e-12 {
        return Err(Error::Validation(format!("nu = {nu} < 1")));
    }
    let nu = nu.max(1.0);
    let last = if nu > 1.0 {
        (nu - 1.0) / 2.0 * (nu - 1.0).ln()
    } else {
        0.0
    };
    Ok(-std::f64::consts::LN_2 + (nu + 1.0) / 2.0 * (nu + 1.0).ln() - last)
}

/// The packet's diagonal representation: its eigenvalues, where they are
/// cut, and the shifted oscillator basis they refer to.
#[derive(Debug, Clone)]
pub struct DiagonalRep {
    /// Raw eigenvalues `R_0 .. R_(levels-1)` before renormalization.
    pub eigenvalues: Vec<f64>,
    /// Neglected tail mass `sum_(m >= levels) R_m = ratio^levels`.
    pub tail: f64,
    /// Oscillator mass scale `dP/dQ` of the diagonalizing basis.
    pub mass_scale: f64,
    /// Packet center the basis is shifted to.
    pub center: (f64, f64),
    pub hbar: f64,
}

/// Smallest level count whose neglected tail stays below `tail_tol`.
pub fn required_levels(nu: f64, tail_tol: f64) -> Result<usize> {
    if !(tail_tol > 0.0 && tail_tol < 1.0) {
        return Err(Error::Validation("tail tolerance must be in (0, 1)".into()));
    }
    let r = ((nu - 1.0) / (nu + 1.0)).max(0.0);
    if r == 0.0 {
        return Ok(1);
    }
    Ok((tail_tol.ln() / r.ln()).ceil().max(1.0) as usize)
}

/// Build the packet's state operator truncated to `m_levels` eigenvalues.
///
/// The matrix lives in the packet's own (shifted, mass-scaled) number
/// basis with a few guard levels on top so that quadrature moments of the
/// returned operator are clean; it is renormalized to unit trace. Errors
/// when `m_levels` leaves more than `tail_tol` of eigenvalue mass behind.
pub fn build_state(
    pkt: &QuantumMEPacket,
    m_levels: usize,
    tail_tol: f64,
) -> Result<(StateOperator, DiagonalRep)> {
    if m_levels == 0 {
        return Err(Error::Validation("need at least one level".into()));
    }
    let r = pkt.eigenvalue_ratio();
    let tail = r.powi(m_levels as i32);
    if tail > tail_tol {
        return Err(Error::Validation(format!(
            "{m_levels} levels leave tail {tail:.3e} > {tail_tol:.1e} at nu = {}",
            pkt.nu()
        )));
    }
    let eigenvalues: Vec<f64> = (0..m_levels).map(|m| pkt.eigenvalue(m)).collect();
    let kept: f64 = eigenvalues.iter().sum();
    let dim = m_levels + 4;
    let mut diag = DMatrix::<Complex64>::zeros(dim, dim);
    for (m, &rm) in eigenvalues.iter().enumerate() {
        diag[(m, m)] = Complex64::from(rm / kept);
    }
    let state = StateOperator::new(diag)?;
    Ok((
        state,
        DiagonalRep {
            eigenvalues,
            tail,
            mass_scale: pkt.params.dp / pkt.params.dq,
            center: (pkt.params.q, pkt.params.p),
            hbar: pkt.hbar,
        },
    ))
}

/// [`build_state`] with the level count chosen automatically.
pub fn build_state_auto(
    pkt: &QuantumMEPacket,
    tail_tol: f64,
) -> Result<(StateOperator, DiagonalRep)> {
    let m = required_levels(pkt.nu(), tail_tol)?;
    build_state(pkt, m, tail_tol)
}

/// Position and momentum matrices in the packet's own diagonal basis:
/// `q = Q + dQ/sqrt(nu) (A + A†)`, `p = P - i dP/sqrt(nu) (A - A†)`.
pub fn packet_quadratures(pkt: &QuantumMEPacket, dim: usize) -> (DMatrix<Complex64>, DMatrix<Complex64>) {
    let mut a = DMatrix::<Complex64>::zeros(dim, dim);
    for k in 1..dim {
        a[(k - 1, k)] = Complex64::from((k as f64).sqrt());
    }
    let adag = a.adjoint();
    let nu = pkt.nu();
    let cq = Complex64::from(pkt.params.dq / nu.sqrt());
    let cp = Complex64::new(0.0, -pkt.params.dp / nu.sqrt());
    let ident = DMatrix::<Complex64>::identity(dim, dim);
    let q = ident.scale(pkt.params.q) + (&a + &adag).map(|z| z * cq);
    let p = ident.scale(pkt.params.p) + (&a - &adag).map(|z| z * cp);
    (q, p)
}

/// Closed-form quadratic evolution of the quantum packet.
///
/// Identical formulas to the classical case; the returned widths generally
/// raise `nu`, which is the statement that the ME form itself is not
/// preserved even though the moment trajectory is exact.
pub fn evolve_quadratic_quantum(
    pkt: &QuantumMEPacket,
    vpot: &PolynomialPotential,
    t: f64,
) -> Result<EvolvedPacket> {
    evolve_quadratic(&pkt.params, vpot, t)
}

/// One named hbar-correction term of the moment hierarchy.
#[derive(Debug, Clone)]
pub struct CorrectionTerm {
    pub name: &'static str,
    /// Prefactor from the potential coefficients and mass.
    pub prefactor: f64,
    /// The classical part of the bracketed average.
    pub classical_part: f64,
    /// The genuinely quantum excess, second order in `1/nu`.
    pub quantum_excess: f64,
}

impl CorrectionTerm {
    pub fn total(&self) -> f64 {
        self.prefactor * (self.classical_part + self.quantum_excess)
    }
}

/// The corrections catalog plus the verification that the first four
/// quantum moment derivatives coincide with the classical ones.
#[derive(Debug, Clone)]
pub struct CorrectionCatalog {
    pub terms: Vec<CorrectionTerm>,
    /// Max absolute deviation between the ladder-evaluated quantum
    /// derivative expressions and the classical Gaussian-averaged ones.
    pub taylor_agreement: f64,
}

/// Catalog the quantum corrections for the given potential.
///
/// Empty when no `V3 V4` product and no `V5` term is present; the
/// residual `taylor_agreement` is reported either way.
pub fn quantum_correction_catalog(
    pkt: &QuantumMEPacket,
    vpot: &PolynomialPotential,
) -> Result<CorrectionCatalog> {
    let params = &pkt.params;
    let nu = pkt.nu();
    let (s2, w2) = (params.dq * params.dq, params.dp * params.dp);
    let mu = vpot.mass;
    let mut terms = Vec::new();

    if vpot.v(3) != 0.0 && vpot.v(4) != 0.0 {
        // the q^2 p^2 structure in the fifth derivative of p
        terms.push(CorrectionTerm {
            name: "d5p_dt5_v3v4",
            prefactor: vpot.v(3) * vpot.v(4) / (2.0 * mu.powi(3)),
            classical_part: 21.0 * s2 * w2,
            quantum_excess: -2.0 * s2 * w2 / (nu * nu),
        });
    }
    if vpot.v(5) != 0.0 {
        // the V5 contribution to the third derivative of p
        let q2p2_class = (params.q * params.q + s2) * (params.p * params.p + w2);
        terms.push(CorrectionTerm {
            name: "d3p_dt3_v5",
            prefactor: -vpot.v(5) / (2.0 * mu * mu),
            classical_part: q2p2_class,
            quantum_excess: 4.0 * s2 * w2 / (nu * nu),
        });
    }

    let taylor_agreement = ladder::heisenberg_vs_classical_derivatives(pkt, vpot)?;
    Ok(CorrectionCatalog {
        terms,
        taylor_agreement,
    })
}
