//! Composite-system registrations: the EPR pair and the two-boson
//! intensity-correlation (HBT-type) setup.

use super::{EndComponent, EndState, Signal, BRANCH_THRESHOLD};
use crate::qcore::{kron, normalized_correlation, CMatrix, CVector, StateOperator};
use crate::{Error, Result};
use num_complex::Complex64;

fn pure_level(dim: usize, i: usize) -> CMatrix {
    let mut m = CMatrix::zeros(dim, dim);
    m[(i, i)] = Complex64::from(1.0);
    m
}

/// Near-side sub-detector states for the EPR registration.
#[derive(Debug, Clone)]
pub struct EprDetectors {
    pub plus_rest: CMatrix,
    pub plus_fired: CMatrix,
    pub minus_rest: CMatrix,
    pub minus_fired: CMatrix,
}

impl Default for EprDetectors {
    fn default() -> Self {
        Self {
            plus_rest: pure_level(2, 0),
            plus_fired: pure_level(2, 1),
            minus_rest: pure_level(2, 0),
            minus_fired: pure_level(2, 1),
        }
    }
}

/// The singlet vector `(|+->' - |-+>) / sqrt(2)` in the composite basis
/// `|s1 s2> = 2 s1 + s2` with `+` at index 0.
pub fn singlet() -> CVector {
    let mut v = CVector::zeros(4);
    v[1] = Complex64::from(std::f64::consts::FRAC_1_SQRT_2);
    v[2] = Complex64::from(-std::f64::consts::FRAC_1_SQRT_2);
    v
}

/// Registration of particle 1 of a singlet pair by a two-armed
/// fixed-signal detector. The far particle keeps a spin state strictly
/// anticorrelated with the fired arm; sub-detector 0 is the `+` arm,
/// sub-detector 1 the `-` arm.
pub fn epr_end_state(input: &CVector, det: &EprDetectors) -> Result<EndState> {
    if input.len() != 4 {
        return Err(Error::DimensionMismatch(
            "EPR input must live on the two-spin space".into(),
        ));
    }
    let norm: f64 = input.iter().map(|z| z.norm_sqr()).sum();
    if (norm - 1.0).abs() > 1e-10 {
        return Err(Error::Validation("EPR input is not normalized".into()));
    }
    let overlap: Complex64 = singlet()
        .iter()
        .zip(input.iter())
        .map(|(a, b)| a.conj() * b)
        .sum();
    if (overlap.norm() - 1.0).abs() > 1e-10 {
        return Err(Error::Validation(
            "EPR reduction is defined for the singlet input".into(),
        ));
    }
    let far_up = pure_level(2, 0);
    let far_down = pure_level(2, 1);
    // far spin up pairs with a minus-arm signal and vice versa
    let comp_plus = kron(&kron(&far_up, &det.plus_rest), &det.minus_fired);
    let comp_minus = kron(&kron(&far_down, &det.plus_fired), &det.minus_rest);
    EndState::new(vec![
        EndComponent::new(0.5, StateOperator::new(comp_plus)?, Signal::Fired(vec![1]))
            .with_status("released"),
        EndComponent::new(0.5, StateOperator::new(comp_minus)?, Signal::Fired(vec![0]))
            .with_status("released"),
    ])
}

/// Amplitudes of the two-boson state `a|++> + b|--> + c|+->_sym`.
#[derive(Debug, Clone, Copy)]
pub struct HbtAmplitudes {
    pub a: Complex64,
    pub b: Complex64,
    pub c: Complex64,
}

impl HbtAmplitudes {
    pub fn new(a: Complex64, b: Complex64, c: Complex64) -> Result<Self> {
        let total = a.norm_sqr() + b.norm_sqr() + c.norm_sqr();
        if (total - 1.0).abs() > 1e-12 {
            return Err(Error::Validation(format!(
                "HBT amplitudes are not normalized: |a|^2+|b|^2+|c|^2 = {total}"
            )));
        }
        Ok(Self { a, b, c })
    }

    /// The state vector on the full two-particle space `C^2 (x) C^2`.
    pub fn vector(&self) -> CVector {
        let r = Complex64::from(std::f64::consts::FRAC_1_SQRT_2);
        let mut v = CVector::zeros(4);
        v[0] = self.a; // |++>
        v[3] = self.b; // |-->
        v[1] = self.c * r; // |+->
        v[2] = self.c * r; // |-+>
        v
    }
}

/// Closed-form intensity correlation
/// `C = -|a|^2 |b|^2 / sqrt((|a|^2 - |a|^4)(|b|^2 - |b|^4))`.
pub fn hbt_correlation(amp: &HbtAmplitudes) -> Result<f64> {
    let x = amp.a.norm_sqr();
    let y = amp.b.norm_sqr();
    let denom = (x - x * x) * (y - y * y);
    if denom <= 1e-24 {
        return Err(Error::Validation(
            "correlation undefined: a detector arm has zero outcome variance".into(),
        ));
    }
    Ok(-x * y / denom.sqrt())
}

/// The same correlation evaluated the long way: normalized correlation of
/// the projections `P_+` and `P_-` (at least one particle registered on
/// the respective arm) in the two-particle state. Oracle for
/// [`hbt_correlation`].
pub fn hbt_correlation_via_projectors(amp: &HbtAmplitudes) -> Result<f64> {
    let state = StateOperator::pure(&amp.vector())?;
    let id = CMatrix::identity(2, 2);
    let p1p = kron(&pure_level(2, 0), &id);
    let p1m = kron(&pure_level(2, 1), &id);
    let p2p = kron(&id, &pure_level(2, 0));
    let p2m = kron(&id, &pure_level(2, 1));
    let p_pp = &p1p * &p2p;
    let p_mm = &p1m * &p2m;
    let p_pm = &p1p * &p2m + &p1m * &p2p;
    let p_plus = &p_pp + &p_pm;
    let p_minus = &p_mm + &p_pm;
    normalized_correlation(&state, &p_plus, &p_minus)
}

/// Register the two-boson state on the two-armed detector: three channels
/// (both on `+`, both on `-`, one on each), reduced to a statistical
/// decomposition whose weights are exactly `|a|^2, |b|^2, |c|^2`.
///
/// Each arm is modeled as a three-level system: rest, one particle
/// swallowed (with signal), two particles swallowed (with signal). The
/// returned correlation is `None` when an arm has zero outcome variance.
pub fn hbt_register(amp: &HbtAmplitudes) -> Result<(EndState, Option<f64>)> {
    let correlation = hbt_correlation(amp).ok();
    let weights = [amp.a.norm_sqr(), amp.b.norm_sqr(), amp.c.norm_sqr()];
    let arm = |level: usize| pure_level(3, level);
    let branch_states = [
        kron(&arm(2), &arm(0)), // both swallowed by the + arm
        kron(&arm(0), &arm(2)), // both swallowed by the - arm
        kron(&arm(1), &arm(1)), // one each
    ];
    let signals = [
        Signal::Fired(vec![0]),
        Signal::Fired(vec![1]),
        Signal::Fired(vec![0, 1]),
    ];
    let mut comps = Vec::new();
    for ((w, st), sig) in weights.iter().zip(branch_states).zip(signals) {
        if *w >= BRANCH_THRESHOLD {
            comps.push(
                EndComponent::new(*w, StateOperator::new(st)?, sig).with_status("swallowed"),
            );
        }
    }
    Ok((EndState::new(comps)?, correlation))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn epr_weights_are_half_half() {
        let end = epr_end_state(&singlet(), &EprDetectors::default()).unwrap();
        assert_eq!(end.components.len(), 2);
        assert_relative_eq!(end.components[0].weight, 0.5);
        assert_relative_eq!(end.components[1].weight, 0.5);
    }

    #[test]
    fn epr_signals_anticorrelate_with_the_surviving_spin_exactly() {
        let end = epr_end_state(&singlet(), &EprDetectors::default()).unwrap();
        // component 0 keeps far spin up and fires the minus arm;
        // component 1 keeps far spin down and fires the plus arm
        let far_spin = [0usize, 1usize];
        for (idx, c) in end.components.iter().enumerate() {
            match (&c.signal, far_spin[idx]) {
                (Signal::Fired(arms), 0) => assert_eq!(arms, &vec![1]),
                (Signal::Fired(arms), 1) => assert_eq!(arms, &vec![0]),
                _ => panic!("missing signal"),
            }
        }
        // sampling never mixes them up
        let draws = end.sample_components(10_000, 5);
        for idx in draws {
            let c = &end.components[idx];
            let expected = if far_spin[idx] == 0 { vec![1] } else { vec![0] };
            assert_eq!(c.signal, Signal::Fired(expected));
        }
    }

    #[test]
    fn far_particle_is_maximally_mixed_before_reading() {
        let pair = StateOperator::pure(&singlet()).unwrap();
        let far = crate::qcore::partial_trace_first(&pair, 2, 2).unwrap();
        assert_relative_eq!(far.matrix()[(0, 0)].re, 0.5, epsilon = 1e-13);
        assert_relative_eq!(far.matrix()[(1, 1)].re, 0.5, epsilon = 1e-13);
        assert_relative_eq!(far.matrix()[(0, 1)].norm(), 0.0, epsilon = 1e-13);
    }

    #[test]
    fn non_singlet_input_rejected() {
        let mut v = CVector::zeros(4);
        v[0] = Complex64::from(1.0);
        assert!(epr_end_state(&v, &EprDetectors::default()).is_err());
    }

    #[test]
    fn hbt_correlation_landmarks() {
        let r = Complex64::from(std::f64::consts::FRAC_1_SQRT_2);
        let amp = HbtAmplitudes::new(r, r, Complex64::default()).unwrap();
        assert_relative_eq!(hbt_correlation(&amp).unwrap(), -1.0, epsilon = 1e-14);
        let t = Complex64::from(1.0 / 3.0_f64.sqrt());
        let amp = HbtAmplitudes::new(t, t, t).unwrap();
        assert_relative_eq!(hbt_correlation(&amp).unwrap(), -0.5, epsilon = 1e-12);
    }

    #[test]
    fn projector_route_agrees_with_the_closed_form() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..50 {
            let raw = [
                Complex64::new(rng.gen_range(0.05..1.0), rng.gen_range(-1.0..1.0)),
                Complex64::new(rng.gen_range(0.05..1.0), rng.gen_range(-1.0..1.0)),
                Complex64::new(rng.gen_range(0.05..1.0), rng.gen_range(-1.0..1.0)),
            ];
            let norm = raw.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
            let amp = HbtAmplitudes::new(raw[0] / norm, raw[1] / norm, raw[2] / norm).unwrap();
            let closed = hbt_correlation(&amp).unwrap();
            let traced = hbt_correlation_via_projectors(&amp).unwrap();
            assert_relative_eq!(closed, traced, epsilon = 1e-12, max_relative = 1e-12);
        }
    }

    #[test]
    fn hbt_branches_carry_the_amplitude_weights_and_signals() {
        let amp = HbtAmplitudes::new(
            Complex64::from(0.6),
            Complex64::from(0.48),
            Complex64::new(0.0, 0.64),
        )
        .unwrap();
        let (end, _) = hbt_register(&amp).unwrap();
        assert_eq!(end.components.len(), 3);
        assert_relative_eq!(end.components[0].weight, 0.36, epsilon = 1e-12);
        assert_relative_eq!(end.components[1].weight, 0.2304, epsilon = 1e-12);
        assert_relative_eq!(end.components[2].weight, 0.4096, epsilon = 1e-12);
        assert_eq!(end.components[0].signal, Signal::Fired(vec![0]));
        assert_eq!(end.components[1].signal, Signal::Fired(vec![1]));
        assert_eq!(end.components[2].signal, Signal::Fired(vec![0, 1]));
    }

    #[test]
    fn degenerate_amplitudes_have_no_correlation() {
        // a = 0 means the + arm never sees both particles: no variance
        let amp = HbtAmplitudes::new(
            Complex64::default(),
            Complex64::from(0.6),
            Complex64::from(0.8),
        )
        .unwrap();
        assert!(hbt_correlation(&amp).is_err());
    }
}
