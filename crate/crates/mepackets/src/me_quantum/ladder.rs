//! Symbolic moment calculator over the packet's ladder algebra.
//!
//! Any product of position and momentum operators in a fixed factor order
//! is rewritten in terms of `A` and `A†` via
//! `q = Q + dQ/sqrt(nu) (A + A†)` and `p = P - i dP/sqrt(nu) (A - A†)`,
//! brought to normal order, and its diagonal part evaluated exactly on
//! the geometric eigenvalue distribution. No quadrature, no truncation.

use super::QuantumMEPacket;
use crate::me_classical::{
    gaussian_moment, moment_taylor_derivatives, MEPacketParams, PolynomialPotential,
};
use crate::{Error, Result};
use num_complex::Complex64;
use std::collections::HashMap;

/// One factor of a phase-space operator word.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum PhaseSpaceOp {
    Position,
    Momentum,
}

pub use PhaseSpaceOp::{Momentum, Position};

const MAX_DEGREE: usize = 6;

/// Normal-ordered polynomial: coefficient of `(A†)^a A^b` keyed by `(a, b)`.
type NormalPoly = HashMap<(usize, usize), Complex64>;

fn accumulate(poly: &mut NormalPoly, key: (usize, usize), c: Complex64) {
    if c != Complex64::default() {
        *poly.entry(key).or_default() += c;
    }
}

/// Multiply a normal-ordered polynomial from the right by
/// `c0 + ca A + cad A†`, restoring normal order.
fn multiply_linear(poly: &NormalPoly, c0: Complex64, ca: Complex64, cad: Complex64) -> NormalPoly {
    let mut next = NormalPoly::new();
    for (&(a, b), &coeff) in poly {
        accumulate(&mut next, (a, b), coeff * c0);
        accumulate(&mut next, (a, b + 1), coeff * ca);
        // A^b A† = A† A^b + b A^(b-1)
        accumulate(&mut next, (a + 1, b), coeff * cad);
        if b > 0 {
            accumulate(&mut next, (a, b - 1), coeff * cad * Complex64::from(b as f64));
        }
    }
    next
}

fn normal_ordered_word(pkt: &QuantumMEPacket, word: &[PhaseSpaceOp]) -> NormalPoly {
    let nu = pkt.nu();
    let cq = pkt.params.dq / nu.sqrt();
    let cp = pkt.params.dp / nu.sqrt();
    let mut poly = NormalPoly::new();
    poly.insert((0, 0), Complex64::from(1.0));
    for op in word {
        poly = match op {
            PhaseSpaceOp::Position => multiply_linear(
                &poly,
                Complex64::from(pkt.params.q),
                Complex64::from(cq),
                Complex64::from(cq),
            ),
            PhaseSpaceOp::Momentum => multiply_linear(
                &poly,
                Complex64::from(pkt.params.p),
                Complex64::new(0.0, -cp),
                Complex64::new(0.0, cp),
            ),
        };
    }
    poly
}

/// Coefficients of the polynomial `I_n(nu)` obtained by applying
/// `(nu^2-1)/2 d/dnu` to `(nu+1)/2` n times.
fn geometric_sum_poly(n: usize) -> Vec<f64> {
    let mut poly = vec![0.5, 0.5];
    for _ in 0..n {
        let mut next = vec![0.0; poly.len() + 1];
        for (k, &c) in poly.iter().enumerate().skip(1) {
            let d = c * k as f64;
            next[k + 1] += 0.5 * d;
            next[k - 1] -= 0.5 * d;
        }
        poly = next;
    }
    poly
}

fn eval_poly(poly: &[f64], x: f64) -> f64 {
    poly.iter().rev().fold(0.0, |acc, &c| acc * x + c)
}

/// `< N^n >` on the geometric distribution with parameter `nu`.
fn number_moment(nu: f64, n: usize) -> f64 {
    2.0 / (nu + 1.0) * eval_poly(&geometric_sum_poly(n), nu)
}

/// `< (A†)^a A^a > = < N (N-1) ... (N-a+1) >`.
fn falling_factorial_moment(nu: f64, a: usize) -> f64 {
    // expand the falling factorial in powers of N
    let mut coeffs = vec![1.0];
    for i in 0..a {
        let mut next = vec![0.0; coeffs.len() + 1];
        for (k, &c) in coeffs.iter().enumerate() {
            next[k + 1] += c;
            next[k] -= c * i as f64;
        }
        coeffs = next;
    }
    coeffs
        .iter()
        .enumerate()
        .map(|(n, &c)| c * number_moment(nu, n))
        .sum()
}

/// Exact packet average of an operator word, e.g. `[Position, Momentum]`
/// for `<q p>`. Degree is limited to 6.
pub fn ladder_average(pkt: &QuantumMEPacket, word: &[PhaseSpaceOp]) -> Result<Complex64> {
    if word.len() > MAX_DEGREE {
        return Err(Error::Unsupported(format!(
            "word degree {} exceeds {MAX_DEGREE}",
            word.len()
        )));
    }
    let poly = normal_ordered_word(pkt, word);
    let nu = pkt.nu();
    let mut total = Complex64::default();
    for (&(a, b), &coeff) in &poly {
        if a == b {
            total += coeff * Complex64::from(falling_factorial_moment(nu, a));
        }
    }
    Ok(total)
}

/// Classical Gaussian average of the same word (factor order is
/// irrelevant classically).
pub fn classical_word_average(params: &MEPacketParams, word: &[PhaseSpaceOp]) -> Result<f64> {
    let k = word.iter().filter(|&&o| o == PhaseSpaceOp::Position).count() as u32;
    let l = word.len() as u32 - k;
    gaussian_moment(params, k, l)
}

/// Average of the word symmetrized over all factor orderings.
pub fn symmetrized_average(pkt: &QuantumMEPacket, word: &[PhaseSpaceOp]) -> Result<Complex64> {
    let mut orderings = std::collections::BTreeSet::new();
    let mut scratch = word.to_vec();
    permute_into(&mut scratch, 0, &mut orderings);
    let mut total = Complex64::default();
    for w in &orderings {
        total += ladder_average(pkt, w)?;
    }
    Ok(total / Complex64::from(orderings.len() as f64))
}

fn permute_into(
    word: &mut Vec<PhaseSpaceOp>,
    k: usize,
    out: &mut std::collections::BTreeSet<Vec<PhaseSpaceOp>>,
) {
    if k == word.len() {
        out.insert(word.clone());
        return;
    }
    for i in k..word.len() {
        word.swap(k, i);
        permute_into(word, k + 1, out);
        word.swap(k, i);
    }
}

/// The operator expressions for the first four Heisenberg-picture time
/// derivatives of `p` under a potential of up to fourth order, as lists
/// of `(coefficient, word)`.
fn heisenberg_derivative_terms(vpot: &PolynomialPotential) -> [Vec<(f64, Vec<PhaseSpaceOp>)>; 4] {
    let mu = vpot.mass;
    let (v1, v2, v3, v4) = (vpot.v(1), vpot.v(2), vpot.v(3), vpot.v(4));
    let q = |n: usize| vec![PhaseSpaceOp::Position; n];
    let d1 = vec![
        (-v1, q(0)),
        (-v2, q(1)),
        (-v3 / 2.0, q(2)),
        (-v4 / 6.0, q(3)),
    ];
    let d2 = vec![
        (-v2 / mu, vec![Momentum]),
        (-v3 / (2.0 * mu), vec![Position, Momentum]),
        (-v3 / (2.0 * mu), vec![Momentum, Position]),
        (-v4 / (2.0 * mu), vec![Position, Momentum, Position]),
    ];
    let d3 = vec![
        (-v3 / (mu * mu), vec![Momentum, Momentum]),
        (-v4 / (mu * mu), vec![Momentum, Position, Momentum]),
        (v1 * v2 / mu, q(0)),
        ((v1 * v3 + v2 * v2) / mu, q(1)),
        ((3.0 * v2 * v3 + v1 * v4) / (2.0 * mu), q(2)),
        ((4.0 * v2 * v4 + 3.0 * v3 * v3) / (6.0 * mu), q(3)),
        (5.0 * v3 * v4 / (12.0 * mu), q(4)),
        (v4 * v4 / (12.0 * mu), q(5)),
    ];
    let mu2 = mu * mu;
    let d4 = vec![
        (-v4 / (mu * mu2), vec![Momentum, Momentum, Momentum]),
        ((3.0 * v1 * v3 + v2 * v2) / mu2, vec![Momentum]),
        (
            (3.0 * v1 * v4 + 5.0 * v2 * v3) / (2.0 * mu2),
            vec![Position, Momentum],
        ),
        (
            (3.0 * v1 * v4 + 5.0 * v2 * v3) / (2.0 * mu2),
            vec![Momentum, Position],
        ),
        (
            (5.0 * v3 * v3 + 8.0 * v2 * v4) / (2.0 * mu2),
            vec![Position, Momentum, Position],
        ),
        (
            3.0 * v3 * v4 / (2.0 * mu2),
            vec![Position, Position, Position, Momentum],
        ),
        (
            3.0 * v3 * v4 / (2.0 * mu2),
            vec![Momentum, Position, Position, Position],
        ),
        (
            3.0 * v4 * v4 / (4.0 * mu2),
            vec![Position, Position, Momentum, Position, Position],
        ),
    ];
    [d1, d2, d3, d4]
}

/// Max deviation between the packet averages of the Heisenberg derivative
/// expressions and the classical Gaussian-averaged derivatives; includes
/// any spurious imaginary part.
pub(super) fn heisenberg_vs_classical_derivatives(
    pkt: &QuantumMEPacket,
    vpot: &PolynomialPotential,
) -> Result<f64> {
    let classical = moment_taylor_derivatives(&pkt.params, vpot)?;
    let mut worst: f64 = 0.0;
    for (n, terms) in heisenberg_derivative_terms(vpot).iter().enumerate() {
        let mut avg = Complex64::default();
        for (c, word) in terms {
            avg += Complex64::from(*c) * ladder_average(pkt, word)?;
        }
        worst = worst.max((avg.re - classical.dp[n]).abs()).max(avg.im.abs());
    }
    Ok(worst)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn packet(nu: f64) -> QuantumMEPacket {
        QuantumMEPacket::with_nu(0.9, -0.4, 0.7, 1.3, nu).unwrap()
    }

    #[test]
    fn number_moments_match_the_geometric_distribution() {
        let nu = 3.0;
        let r: f64 = (nu - 1.0) / (nu + 1.0);
        // brute-force geometric sums as the oracle
        let brute = |n: usize| -> f64 {
            (0..2000)
                .map(|k| (k as f64).powi(n as i32) * (1.0 - r) * r.powi(k))
                .sum()
        };
        for n in 0..4 {
            assert_relative_eq!(number_moment(nu, n), brute(n), epsilon = 1e-10);
        }
    }

    #[test]
    fn first_moments_are_the_centers() {
        let pkt = packet(2.7);
        let q = ladder_average(&pkt, &[Position]).unwrap();
        let p = ladder_average(&pkt, &[Momentum]).unwrap();
        assert_relative_eq!(q.re, 0.9, epsilon = 1e-13);
        assert_relative_eq!(q.im, 0.0, epsilon = 1e-13);
        assert_relative_eq!(p.re, -0.4, epsilon = 1e-13);
    }

    #[test]
    fn second_moments_are_the_constraints() {
        let pkt = packet(2.7);
        let q2 = ladder_average(&pkt, &[Position, Position]).unwrap();
        let p2 = ladder_average(&pkt, &[Momentum, Momentum]).unwrap();
        assert_relative_eq!(q2.re, 0.9 * 0.9 + 0.7 * 0.7, epsilon = 1e-13);
        assert_relative_eq!(p2.re, 0.4 * 0.4 + 1.3 * 1.3, epsilon = 1e-13);
    }

    #[test]
    fn qp_carries_the_canonical_imaginary_part() {
        let pkt = packet(2.7);
        let qp = ladder_average(&pkt, &[Position, Momentum]).unwrap();
        assert_relative_eq!(qp.re, 0.9 * -0.4, epsilon = 1e-13);
        assert_relative_eq!(qp.im, pkt.hbar / 2.0, epsilon = 1e-13);
        // and the symmetrized product is purely classical
        let sym = ladder_average(&pkt, &[Position, Momentum]).unwrap()
            + ladder_average(&pkt, &[Momentum, Position]).unwrap();
        assert_relative_eq!(sym.re, 2.0 * 0.9 * -0.4, epsilon = 1e-13);
        assert_relative_eq!(sym.im, 0.0, epsilon = 1e-13);
    }

    #[test]
    fn cubic_mixed_moment_matches_the_printed_expansion() {
        // <q^3 p> = Q^3 P + 3 Q P dQ^2 + 3i Q^2 dQ dP / nu + 3i dQ^3 dP / nu
        let pkt = packet(3.4);
        let (q0, p0, s, w): (f64, f64, f64, f64) = (0.9, -0.4, 0.7, 1.3);
        let nu = pkt.nu();
        let got = ladder_average(&pkt, &[Position, Position, Position, Momentum]).unwrap();
        assert_relative_eq!(got.re, q0.powi(3) * p0 + 3.0 * q0 * p0 * s * s, epsilon = 1e-12);
        assert_relative_eq!(
            got.im,
            3.0 * q0 * q0 * s * w / nu + 3.0 * s.powi(3) * w / nu,
            epsilon = 1e-12
        );
    }

    #[test]
    fn p_q2_p_has_the_second_order_excess() {
        for nu in [1.5, 3.0, 10.0] {
            let pkt = packet(nu);
            let got = ladder_average(&pkt, &[Momentum, Position, Position, Momentum]).unwrap();
            let class =
                classical_word_average(&pkt.params, &[Position, Position, Momentum, Momentum])
                    .unwrap();
            let excess = 2.0 * (0.7_f64 * 0.7) * (1.3 * 1.3) / (nu * nu);
            assert_relative_eq!(got.re, class + excess, max_relative = 1e-12);
            assert_relative_eq!(got.im, 0.0, epsilon = 1e-12);
        }
    }

    #[test]
    fn symmetrized_words_are_real() {
        let pkt = packet(1.9);
        for word in [
            vec![Position, Momentum],
            vec![Position, Position, Momentum],
            vec![Position, Momentum, Position, Momentum],
            vec![Position, Position, Momentum, Momentum, Position],
        ] {
            let avg = symmetrized_average(&pkt, &word).unwrap();
            assert!(
                avg.im.abs() < 1e-10,
                "imaginary residue {} for {word:?}",
                avg.im
            );
        }
    }

    #[test]
    fn degree_cap_is_enforced() {
        let pkt = packet(2.0);
        assert!(ladder_average(&pkt, &[Position; 7]).is_err());
        assert!(ladder_average(&pkt, &[Position; 6]).is_ok());
    }

    #[test]
    fn heisenberg_derivatives_coincide_with_classical() {
        let vpot = PolynomialPotential::new([0.1, -0.4, 0.8, 0.5, -0.3, 0.0], 1.7).unwrap();
        for nu in [1.0, 1.5, 4.0, 50.0] {
            let pkt = QuantumMEPacket::with_nu(0.9, -1.1, 0.6, 0.8, nu).unwrap();
            let dev = heisenberg_vs_classical_derivatives(&pkt, &vpot).unwrap();
            assert!(dev < 1e-10, "nu = {nu}: deviation {dev}");
        }
    }

    #[test]
    fn ladder_agrees_with_matrix_traces_up_to_degree_four() {
        use crate::me_quantum::{build_state_auto, packet_quadratures};
        for nu in [1.0, 2.2, 6.0] {
            let pkt = QuantumMEPacket::with_nu(0.5, -0.3, 0.8, 1.1, nu).unwrap();
            let (state, _) = build_state_auto(&pkt, 1e-14).unwrap();
            // guard levels for operator products of degree 4
            let dim = state.dim() + 8;
            let mut m = crate::qcore::CMatrix::zeros(dim, dim);
            for i in 0..state.dim() {
                m[(i, i)] = state.matrix()[(i, i)];
            }
            let (q, p) = packet_quadratures(&pkt, dim);
            for degree in 1..=4usize {
                for bits in 0..(1u32 << degree) {
                    let word: Vec<PhaseSpaceOp> = (0..degree)
                        .map(|i| {
                            if bits >> i & 1 == 0 {
                                Position
                            } else {
                                Momentum
                            }
                        })
                        .collect();
                    let mut op = crate::qcore::CMatrix::identity(dim, dim);
                    for w in &word {
                        op = match w {
                            Position => op * &q,
                            Momentum => op * &p,
                        };
                    }
                    let trace_val = (&m * op).diagonal().sum();
                    let ladder_val = ladder_average(&pkt, &word).unwrap();
                    let err = (trace_val - ladder_val).norm();
                    assert!(
                        err < 1e-7,
                        "nu={nu} word {word:?}: trace {trace_val} vs ladder {ladder_val}"
                    );
                }
            }
        }
    }
}
