//! Truncated-matrix representation and propagation of quantum ME packets.
//!
//! This is the numeric oracle for the closed-form dynamics: the packet is
//! expanded in a finite oscillator basis sized to the whole trajectory,
//! evolved with the truncated Hamiltonian propagator, and its moments are
//! re-measured by traces.

use super::{required_levels, QuantumMEPacket};
use crate::me_classical::{evolve_quadratic, PolynomialPotential};
use crate::qcore::{eigh, CMatrix, StateOperator};
use crate::{Error, Result};
use num_complex::Complex64;

/// A minimum-uncertainty oscillator basis used purely for representation:
/// centered at `(center_q, center_p)`, position scale `width_q`, momentum
/// scale `hbar / (2 width_q)`.
#[derive(Debug, Clone, Copy)]
pub struct OscRep {
    pub center_q: f64,
    pub center_p: f64,
    pub width_q: f64,
    pub hbar: f64,
    pub levels: usize,
}

impl OscRep {
    pub fn new(center_q: f64, center_p: f64, width_q: f64, hbar: f64, levels: usize) -> Result<Self> {
        if !(width_q > 0.0) || !(hbar > 0.0) {
            return Err(Error::Validation("width_q and hbar must be positive".into()));
        }
        if levels < 4 {
            return Err(Error::Validation("need at least 4 levels".into()));
        }
        Ok(Self {
            center_q,
            center_p,
            width_q,
            hbar,
            levels,
        })
    }

    pub fn width_p(&self) -> f64 {
        self.hbar / (2.0 * self.width_q)
    }

    /// Position and momentum matrices in this basis.
    pub fn quadratures(&self) -> (CMatrix, CMatrix) {
        let n = self.levels;
        let mut a = CMatrix::zeros(n, n);
        for k in 1..n {
            a[(k - 1, k)] = Complex64::from((k as f64).sqrt());
        }
        let adag = a.adjoint();
        let ident = CMatrix::identity(n, n);
        let cq = Complex64::from(self.width_q);
        let cp = Complex64::new(0.0, -self.width_p());
        let q = ident.scale(self.center_q) + (&a + &adag).map(|z| z * cq);
        let p = ident.scale(self.center_p) + (&a - &adag).map(|z| z * cp);
        (q, p)
    }
}

/// Expand a packet in an arbitrary representation basis by diagonalizing
/// its defining oscillator operator
/// `K = (dP/dQ)(q - Q)^2 / 2 + (dQ/dP)(p - P)^2 / 2` there and loading the
/// geometric eigenvalues onto the lowest eigenvectors.
pub fn represent_packet(
    pkt: &QuantumMEPacket,
    rep: &OscRep,
    tail_tol: f64,
) -> Result<StateOperator> {
    let m_state = required_levels(pkt.nu(), tail_tol)?;
    if m_state + 2 > rep.levels {
        return Err(Error::Validation(format!(
            "packet needs {m_state} levels, basis has {}",
            rep.levels
        )));
    }
    let (q, p) = rep.quadratures();
    let ident = CMatrix::identity(rep.levels, rep.levels);
    let dq_ = &q - ident.scale(pkt.params.q);
    let dp_ = &p - ident.scale(pkt.params.p);
    let mass_scale = pkt.params.dp / pkt.params.dq;
    let k_op = (&dq_ * &dq_).scale(0.5 * mass_scale) + (&dp_ * &dp_).scale(0.5 / mass_scale);
    let (_, vecs) = eigh(&k_op)?;
    let mut t = CMatrix::zeros(rep.levels, rep.levels);
    let mut kept = 0.0;
    for m in 0..m_state {
        kept += pkt.eigenvalue(m);
    }
    for m in 0..m_state {
        let v = vecs.column(m);
        let w = Complex64::from(pkt.eigenvalue(m) / kept);
        t += (v * v.adjoint()).map(|z| z * w);
    }
    StateOperator::new(t)
}

/// Re-measured moments of the matrix-propagated packet at one time.
#[derive(Debug, Clone, Copy)]
pub struct MatrixMoments {
    pub t: f64,
    pub q_mean: f64,
    pub p_mean: f64,
    pub dq: f64,
    pub dp: f64,
    /// Population on the top two basis levels; a truncation health gauge.
    pub edge_occupation: f64,
}

/// Size a representation basis to a closed-form quadratic trajectory.
fn fit_basis(
    pkt: &QuantumMEPacket,
    vpot: &PolynomialPotential,
    ts: &[f64],
    levels: usize,
) -> Result<OscRep> {
    let mut q_lo = f64::INFINITY;
    let mut q_hi = f64::NEG_INFINITY;
    let mut p_lo = f64::INFINITY;
    let mut p_hi = f64::NEG_INFINITY;
    let mut dq_lo = f64::INFINITY;
    let mut dq_hi: f64 = 0.0;
    let mut dp_lo = f64::INFINITY;
    let mut dp_hi: f64 = 0.0;
    // sample finely between the requested times so oscillation extremes
    // are not missed
    let t_max = ts.iter().cloned().fold(0.0_f64, |a, b| a.max(b.abs()));
    let n_scan = 256;
    for i in 0..=n_scan {
        let t = t_max * i as f64 / n_scan as f64;
        let e = evolve_quadratic(&pkt.params, vpot, t)?.params;
        q_lo = q_lo.min(e.q);
        q_hi = q_hi.max(e.q);
        p_lo = p_lo.min(e.p);
        p_hi = p_hi.max(e.p);
        dq_lo = dq_lo.min(e.dq);
        dq_hi = dq_hi.max(e.dq);
        dp_lo = dp_lo.min(e.dp);
        dp_hi = dp_hi.max(e.dp);
    }
    let center_q = 0.5 * (q_lo + q_hi);
    let center_p = 0.5 * (p_lo + p_hi);
    // pick the basis width that minimizes the worst oscillator level the
    // trajectory needs: n(w, t) grows with both the q-window over the
    // position scale and the p-window over the momentum scale
    let needed = |w: f64, t: f64| -> Result<f64> {
        let e = evolve_quadratic(&pkt.params, vpot, t)?.params;
        let span_q = (e.q - center_q).abs() + 3.0 * e.dq;
        let span_p = (e.p - center_p).abs() + 3.0 * e.dp;
        let wp = pkt.hbar / (2.0 * w);
        Ok((span_q / (2.0 * w)).powi(2) + (span_p / (2.0 * wp)).powi(2))
    };
    let w_lo = 0.2 * dq_lo.min(pkt.hbar / (2.0 * dp_hi));
    let w_hi = 5.0 * dq_hi.max(pkt.hbar / (2.0 * dp_lo));
    let mut best = (f64::INFINITY, (w_lo * w_hi).sqrt());
    for i in 0..=96 {
        let w = w_lo * (w_hi / w_lo).powf(i as f64 / 96.0);
        let mut worst: f64 = 0.0;
        for j in 0..=32 {
            let t = t_max * j as f64 / 32.0;
            worst = worst.max(needed(w, t)?);
        }
        if worst < best.0 {
            best = (worst, w);
        }
    }
    OscRep::new(center_q, center_p, best.1, pkt.hbar, levels)
}

/// Propagate the packet with the truncated-oscillator Hamiltonian
/// `H = p^2/2mu + V0 + V1 q + V2 q^2/2` and re-measure moments at each
/// requested time.
///
/// Errors with a numerical diagnostic when the evolved state piles more
/// than `edge_tol` of population onto the top of the basis, since moments
/// are untrustworthy from there on.
pub fn evolve_matrix(
    pkt: &QuantumMEPacket,
    vpot: &PolynomialPotential,
    ts: &[f64],
    levels: usize,
    tail_tol: f64,
    edge_tol: f64,
) -> Result<Vec<MatrixMoments>> {
    if !vpot.is_at_most_quadratic() {
        return Err(Error::Unsupported(
            "matrix propagation is defined for at-most-quadratic potentials".into(),
        ));
    }
    let rep = fit_basis(pkt, vpot, ts, levels)?;
    let t0 = represent_packet(pkt, &rep, tail_tol)?;
    let (q, p) = rep.quadratures();
    let h = (&p * &p).scale(0.5 / vpot.mass)
        + CMatrix::identity(levels, levels).scale(vpot.v(0))
        + q.scale(vpot.v(1))
        + (&q * &q).scale(0.5 * vpot.v(2));
    let (evals, vecs) = eigh(&h)?;
    let vd = vecs.adjoint();

    // everything in the H eigenbasis; time evolution is then elementwise
    let w = &vd * t0.matrix() * &vecs;
    let q_e = &vd * &q * &vecs;
    let q2_e = &vd * (&q * &q) * &vecs;
    let p_e = &vd * &p * &vecs;
    let p2_e = &vd * (&p * &p) * &vecs;
    let mut edge = CMatrix::zeros(levels, levels);
    edge[(levels - 1, levels - 1)] = Complex64::from(1.0);
    edge[(levels - 2, levels - 2)] = Complex64::from(1.0);
    let edge_e = &vd * edge * &vecs;

    let mut out = Vec::with_capacity(ts.len());
    for &t in ts {
        let phases: Vec<Complex64> = evals
            .iter()
            .map(|&e| Complex64::from_polar(1.0, -e * t / pkt.hbar))
            .collect();
        // tr[T(t) M] = sum_ij phi_i W_ij conj(phi_j) M_ji
        let expect = |m: &CMatrix| -> Complex64 {
            let mut s = Complex64::default();
            for i in 0..levels {
                for j in 0..levels {
                    s += phases[i] * w[(i, j)] * phases[j].conj() * m[(j, i)];
                }
            }
            s
        };
        let qm = expect(&q_e).re;
        let q2m = expect(&q2_e).re;
        let pm = expect(&p_e).re;
        let p2m = expect(&p2_e).re;
        let edge_occupation = expect(&edge_e).re.max(0.0);
        if edge_occupation > edge_tol {
            return Err(Error::Numerical(format!(
                "truncation edge occupation {edge_occupation:.3e} exceeds {edge_tol:.1e} at t = {t}"
            )));
        }
        out.push(MatrixMoments {
            t,
            q_mean: qm,
            p_mean: pm,
            dq: (q2m - qm * qm).max(0.0).sqrt(),
            dp: (p2m - pm * pm).max(0.0).sqrt(),
            edge_occupation,
        });
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn representation_reproduces_moments_in_a_foreign_basis() {
        let pkt = QuantumMEPacket::with_nu(1.0, -0.5, 0.5, 1.0, 2.0).unwrap();
        // moderately mismatched scale and center; a strongly mismatched
        // basis would need far more levels than the packet itself
        let rep = OscRep::new(0.8, -0.3, 0.7, pkt.hbar, 96).unwrap();
        let t = represent_packet(&pkt, &rep, 1e-12).unwrap();
        let (q, p) = rep.quadratures();
        let (qm, qs) = crate::qcore::average_and_variance(&t, &q).unwrap();
        let (pm, ps) = crate::qcore::average_and_variance(&t, &p).unwrap();
        assert_relative_eq!(qm, 1.0, epsilon = 1e-8);
        assert_relative_eq!(pm, -0.5, epsilon = 1e-8);
        assert_relative_eq!(qs, 0.5, epsilon = 1e-8);
        assert_relative_eq!(ps, 1.0, epsilon = 1e-8);
    }

    #[test]
    fn harmonic_matrix_path_tracks_the_closed_form() {
        let pkt = QuantumMEPacket::new(1.0, 0.0, 0.5, 1.0, 1.0).unwrap();
        let vpot = PolynomialPotential::harmonic(1.0, 1.0);
        let ts: Vec<f64> = (0..=40).map(|i| i as f64 * 0.25).collect();
        let moments = evolve_matrix(&pkt, &vpot, &ts, 128, 1e-12, 1e-8).unwrap();
        for m in &moments {
            let exact = evolve_quadratic(&pkt.params, &vpot, m.t).unwrap().params;
            assert!((m.q_mean - exact.q).abs() < 1e-6, "t={} q", m.t);
            assert!((m.p_mean - exact.p).abs() < 1e-6, "t={} p", m.t);
            assert!((m.dq - exact.dq).abs() < 1e-6, "t={} dq", m.t);
            assert!((m.dp - exact.dp).abs() < 1e-6, "t={} dp", m.t);
        }
    }

    #[test]
    fn free_matrix_path_tracks_the_closed_form_inside_the_basis_range() {
        // by t = 3 the packet has spread to dQ ~ 3, i.e. an effective
        // nu(t) ~ 6; 128 levels hold that to well below 1e-6
        let pkt = QuantumMEPacket::new(1.0, 0.0, 0.5, 1.0, 1.0).unwrap();
        let vpot = PolynomialPotential::free(1.0);
        let ts: Vec<f64> = (0..=12).map(|i| i as f64 * 0.25).collect();
        let moments = evolve_matrix(&pkt, &vpot, &ts, 128, 1e-12, 1e-8).unwrap();
        for m in &moments {
            let exact = evolve_quadratic(&pkt.params, &vpot, m.t).unwrap().params;
            assert!((m.q_mean - exact.q).abs() < 1e-6, "t={} q", m.t);
            assert!((m.dq - exact.dq).abs() < 1e-6, "t={} dq {} vs {}", m.t, m.dq, exact.dq);
            assert!((m.dp - exact.dp).abs() < 1e-6, "t={} dp", m.t);
        }
    }

    #[test]
    fn escaping_the_basis_is_a_diagnostic_error() {
        let pkt = QuantumMEPacket::new(1.0, 0.0, 0.5, 1.0, 1.0).unwrap();
        let vpot = PolynomialPotential::free(1.0);
        // far beyond what 48 levels can hold
        let err = evolve_matrix(&pkt, &vpot, &[0.0, 20.0], 48, 1e-12, 1e-8);
        assert!(matches!(err, Err(Error::Numerical(_))));
    }
}
