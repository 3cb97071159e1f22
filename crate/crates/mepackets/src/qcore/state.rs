//! States, effects, POVMs and the basic statistical functionals.

use super::{
    eigh, hermitize, trace, CMatrix, CVector, ENTROPY_EIGENVALUE_FLOOR, HERMITICITY_TOL,
    POSITIVITY_TOL, POVM_SUM_TOL, TRACE_TOL,
};
use crate::{Error, Result};
use num_complex::Complex64;

/// A quantum state: Hermitian, positive, unit-trace operator.
#[derive(Debug, Clone)]
pub struct StateOperator {
    dim: usize,
    matrix: CMatrix,
}

impl StateOperator {
    /// Validate and wrap a density matrix.
    ///
    /// Inputs are symmetrized `(T + T†)/2` when the asymmetry is below the
    /// hermitization guard and rejected otherwise; eigenvalues must exceed
    /// `-1e-12` and the trace must be within `1e-12` of one.
    pub fn new(matrix: CMatrix) -> Result<Self> {
        if !matrix.is_square() {
            return Err(Error::Validation("state matrix must be square".into()));
        }
        let matrix = hermitize(&matrix, HERMITICITY_TOL)?;
        let tr = trace(&matrix);
        if (tr.re - 1.0).abs() > TRACE_TOL || tr.im.abs() > TRACE_TOL {
            return Err(Error::Validation(format!(
                "state trace {} deviates from 1 beyond {TRACE_TOL:.0e}",
                tr.re
            )));
        }
        let (vals, _) = eigh(&matrix)?;
        if let Some(&min) = vals.first() {
            if min < -POSITIVITY_TOL {
                return Err(Error::Validation(format!(
                    "state has negative eigenvalue {min:.3e}"
                )));
            }
        }
        Ok(Self {
            dim: matrix.nrows(),
            matrix,
        })
    }

    /// Pure state `|psi><psi|` from a (not necessarily normalized) vector.
    pub fn pure(psi: &CVector) -> Result<Self> {
        let norm2: f64 = psi.iter().map(|z| z.norm_sqr()).sum();
        if norm2 < 1e-300 {
            return Err(Error::Validation("zero vector cannot be a state".into()));
        }
        let m = psi * psi.adjoint() / Complex64::from(norm2);
        Self::new(m)
    }

    /// Maximally mixed state on a `dim`-dimensional space.
    pub fn maximally_mixed(dim: usize) -> Self {
        let m = CMatrix::identity(dim, dim).scale(1.0 / dim as f64);
        Self { dim, matrix: m }
    }

    /// State with the given probabilities on the diagonal.
    pub fn from_diagonal(probs: &[f64]) -> Result<Self> {
        let m = CMatrix::from_diagonal(&CVector::from_iterator(
            probs.len(),
            probs.iter().map(|&p| Complex64::from(p)),
        ));
        Self::new(m)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn matrix(&self) -> &CMatrix {
        &self.matrix
    }

    /// Expectation value `tr[T A]` of an arbitrary operator.
    pub fn expect(&self, a: &CMatrix) -> Result<Complex64> {
        if a.nrows() != self.dim || a.ncols() != self.dim {
            return Err(Error::DimensionMismatch(format!(
                "operator is {}x{}, state dim {}",
                a.nrows(),
                a.ncols(),
                self.dim
            )));
        }
        Ok(trace(&(&self.matrix * a)))
    }
}

/// An effect: Hermitian operator with spectrum in `[0, 1]`.
#[derive(Debug, Clone)]
pub struct Effect {
    dim: usize,
    matrix: CMatrix,
}

impl Effect {
    pub fn new(matrix: CMatrix) -> Result<Self> {
        if !matrix.is_square() {
            return Err(Error::Validation("effect matrix must be square".into()));
        }
        let matrix = hermitize(&matrix, HERMITICITY_TOL)?;
        let (vals, _) = eigh(&matrix)?;
        if let (Some(&min), Some(&max)) = (vals.first(), vals.last()) {
            if min < -POSITIVITY_TOL || max > 1.0 + POSITIVITY_TOL {
                return Err(Error::Validation(format!(
                    "effect spectrum [{min:.3e}, {max:.3e}] leaves [0, 1]"
                )));
            }
        }
        Ok(Self {
            dim: matrix.nrows(),
            matrix,
        })
    }

    /// Projection `|psi><psi|` onto a normalized vector.
    pub fn projector(psi: &CVector) -> Result<Self> {
        let norm2: f64 = psi.iter().map(|z| z.norm_sqr()).sum();
        if norm2 < 1e-300 {
            return Err(Error::Validation("zero vector has no projector".into()));
        }
        Self::new(psi * psi.adjoint() / Complex64::from(norm2))
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn matrix(&self) -> &CMatrix {
        &self.matrix
    }
}

/// A discrete POV measure: effects summing to the identity, one real
/// outcome label per effect.
#[derive(Debug, Clone)]
pub struct DiscretePOVM {
    effects: Vec<Effect>,
    labels: Vec<f64>,
}

impl DiscretePOVM {
    pub fn new(effects: Vec<Effect>, labels: Vec<f64>) -> Result<Self> {
        if effects.is_empty() {
            return Err(Error::Validation("POVM needs at least one effect".into()));
        }
        if effects.len() != labels.len() {
            return Err(Error::Validation(
                "POVM needs one label per effect".into(),
            ));
        }
        let dim = effects[0].dim();
        if effects.iter().any(|e| e.dim() != dim) {
            return Err(Error::DimensionMismatch(
                "POVM effects have mixed dimensions".into(),
            ));
        }
        let mut sum = CMatrix::zeros(dim, dim);
        for e in &effects {
            sum += e.matrix();
        }
        sum -= CMatrix::identity(dim, dim);
        let defect = sum.iter().map(|z| z.norm()).fold(0.0, f64::max);
        if defect > POVM_SUM_TOL {
            return Err(Error::Validation(format!(
                "POVM effects sum to identity only within {defect:.3e}"
            )));
        }
        Ok(Self { effects, labels })
    }

    pub fn effects(&self) -> &[Effect] {
        &self.effects
    }

    pub fn labels(&self) -> &[f64] {
        &self.labels
    }

    /// Outcome distribution of the POVM in a state.
    pub fn probabilities(&self, t: &StateOperator) -> Result<Vec<f64>> {
        self.effects
            .iter()
            .map(|e| born_probability(t, e))
            .collect()
    }
}

/// One branch of a statistical decomposition.
#[derive(Debug, Clone)]
pub struct WeightedComponent {
    pub weight: f64,
    pub state: StateOperator,
}

/// A statistical decomposition: an explicit weighted list of states.
///
/// The list structure is the point — it records which mixture of
/// preparations was realized, which a summed density matrix cannot.
/// Components may live on different Hilbert spaces (branches of a
/// registration keep their own sector); [`DecomposableState::flatten`]
/// only works when all dimensions agree.
#[derive(Debug, Clone)]
pub struct DecomposableState {
    components: Vec<WeightedComponent>,
}

impl DecomposableState {
    pub fn new(components: Vec<WeightedComponent>) -> Result<Self> {
        if components.is_empty() {
            return Err(Error::Validation(
                "decomposition needs at least one component".into(),
            ));
        }
        let mut total = 0.0;
        for c in &components {
            if !(0.0..=1.0 + TRACE_TOL).contains(&c.weight) {
                return Err(Error::Validation(format!(
                    "component weight {} outside [0, 1]",
                    c.weight
                )));
            }
            total += c.weight;
        }
        if (total - 1.0).abs() > TRACE_TOL {
            return Err(Error::Validation(format!(
                "component weights sum to {total}, not 1"
            )));
        }
        Ok(Self { components })
    }

    pub fn components(&self) -> &[WeightedComponent] {
        &self.components
    }

    /// Collapse the decomposition to its state-operator average.
    pub fn flatten(&self) -> Result<StateOperator> {
        let dim = self.components[0].state.dim();
        if self.components.iter().any(|c| c.state.dim() != dim) {
            return Err(Error::DimensionMismatch(
                "components live on different spaces; cannot flatten".into(),
            ));
        }
        let mut m = CMatrix::zeros(dim, dim);
        for c in &self.components {
            m += c.state.matrix().scale(c.weight);
        }
        StateOperator::new(m)
    }
}

/// Von Neumann entropy `-sum t_k ln t_k` in nats, with `0 ln 0 = 0`.
pub fn von_neumann_entropy(t: &StateOperator) -> Result<f64> {
    let (vals, _) = eigh(t.matrix())?;
    Ok(vals
        .iter()
        .filter(|&&v| v > ENTROPY_EIGENVALUE_FLOOR)
        .map(|&v| -v * v.ln())
        .sum())
}

/// Born probability `tr[T E]`, clamped to `[0, 1]` when within `1e-10` of
/// the boundary.
pub fn born_probability(t: &StateOperator, e: &Effect) -> Result<f64> {
    if t.dim() != e.dim() {
        return Err(Error::DimensionMismatch(format!(
            "state dim {} vs effect dim {}",
            t.dim(),
            e.dim()
        )));
    }
    let p = t.expect(e.matrix())?.re;
    let clamp = 1e-10;
    if p < 0.0 && p > -clamp {
        return Ok(0.0);
    }
    if p > 1.0 && p < 1.0 + clamp {
        return Ok(1.0);
    }
    Ok(p)
}

/// Average and standard deviation of a Hermitian operator in a state.
///
/// A radicand within `-1e-10` of zero clamps to zero; anything more
/// negative signals an inconsistent input and errors out.
pub fn average_and_variance(t: &StateOperator, a: &CMatrix) -> Result<(f64, f64)> {
    let a = hermitize(a, HERMITICITY_TOL)?;
    let mean = t.expect(&a)?.re;
    let second = t.expect(&(&a * &a))?.re;
    let radicand = second - mean * mean;
    if radicand < -1e-10 {
        return Err(Error::Numerical(format!(
            "variance radicand {radicand:.3e} is negative beyond tolerance"
        )));
    }
    Ok((mean, radicand.max(0.0).sqrt()))
}

/// Normalized correlation of two commuting Hermitian operators in a state.
///
/// Lies in `[-1, 1]` by the Schwarz inequality. Errors when the operators
/// do not commute (tolerance `1e-10`) or either variance vanishes.
pub fn normalized_correlation(t: &StateOperator, a: &CMatrix, b: &CMatrix) -> Result<f64> {
    let a = hermitize(a, HERMITICITY_TOL)?;
    let b = hermitize(b, HERMITICITY_TOL)?;
    let comm = &a * &b - &b * &a;
    let scale = a
        .iter()
        .map(|z| z.norm())
        .fold(0.0, f64::max)
        .max(1.0)
        * b.iter().map(|z| z.norm()).fold(0.0, f64::max).max(1.0);
    let defect = comm.iter().map(|z| z.norm()).fold(0.0, f64::max);
    if defect > 1e-10 * scale {
        return Err(Error::Validation(format!(
            "operators do not commute: commutator norm {defect:.3e}"
        )));
    }
    let (ma, da) = average_and_variance(t, &a)?;
    let (mb, db) = average_and_variance(t, &b)?;
    if da * da <= 1e-12 || db * db <= 1e-12 {
        return Err(Error::Validation(
            "zero variance: normalized correlation undefined".into(),
        ));
    }
    let mab = t.expect(&(&a * &b))?.re;
    Ok((mab - ma * mb) / (da * db))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn ket(coeffs: &[Complex64]) -> CVector {
        CVector::from_row_slice(coeffs)
    }

    fn re(x: f64) -> Complex64 {
        Complex64::from(x)
    }

    #[test]
    fn entropy_of_pure_state_is_zero() {
        let t = StateOperator::from_diagonal(&[1.0, 0.0]).unwrap();
        assert_relative_eq!(von_neumann_entropy(&t).unwrap(), 0.0, epsilon = 1e-14);
    }

    #[test]
    fn entropy_of_maximally_mixed_qubit_is_ln2() {
        let t = StateOperator::maximally_mixed(2);
        assert_relative_eq!(
            von_neumann_entropy(&t).unwrap(),
            std::f64::consts::LN_2,
            epsilon = 1e-13
        );
    }

    #[test]
    fn entropy_of_biased_qubit() {
        // frozen from -0.75 ln 0.75 - 0.25 ln 0.25
        let t = StateOperator::from_diagonal(&[0.75, 0.25]).unwrap();
        assert_relative_eq!(
            von_neumann_entropy(&t).unwrap(),
            0.5623351446188083,
            epsilon = 1e-12
        );
    }

    #[test]
    fn born_probability_basics() {
        let t = StateOperator::from_diagonal(&[1.0, 0.0]).unwrap();
        let e0 = Effect::new(CMatrix::from_diagonal(&ket(&[re(1.0), re(0.0)]))).unwrap();
        let e1 = Effect::new(CMatrix::from_diagonal(&ket(&[re(0.0), re(1.0)]))).unwrap();
        assert_relative_eq!(born_probability(&t, &e0).unwrap(), 1.0);
        assert_relative_eq!(born_probability(&t, &e1).unwrap(), 0.0);
        let half = StateOperator::maximally_mixed(2);
        assert_relative_eq!(born_probability(&half, &e0).unwrap(), 0.5);
    }

    #[test]
    fn born_probability_rejects_dim_mismatch() {
        let t = StateOperator::maximally_mixed(2);
        let e = Effect::new(CMatrix::identity(3, 3)).unwrap();
        assert!(born_probability(&t, &e).is_err());
    }

    #[test]
    fn average_and_variance_two_outcome() {
        let t = StateOperator::maximally_mixed(2);
        let a = CMatrix::from_diagonal(&ket(&[re(1.0), re(-1.0)]));
        let (mean, sd) = average_and_variance(&t, &a).unwrap();
        assert_relative_eq!(mean, 0.0, epsilon = 1e-14);
        assert_relative_eq!(sd, 1.0, epsilon = 1e-14);
    }

    #[test]
    fn eigenstate_has_zero_variance() {
        let t = StateOperator::from_diagonal(&[0.0, 1.0, 0.0]).unwrap();
        let a = CMatrix::from_diagonal(&ket(&[re(3.0), re(7.0), re(11.0)]));
        let (mean, sd) = average_and_variance(&t, &a).unwrap();
        assert_relative_eq!(mean, 7.0, epsilon = 1e-13);
        assert_relative_eq!(sd, 0.0, epsilon = 1e-7);
    }

    #[test]
    fn correlation_of_self_is_one() {
        let t = StateOperator::from_diagonal(&[0.3, 0.7]).unwrap();
        let a = CMatrix::from_diagonal(&ket(&[re(1.0), re(-1.0)]));
        assert_relative_eq!(
            normalized_correlation(&t, &a, &a).unwrap(),
            1.0,
            epsilon = 1e-12
        );
    }

    #[test]
    fn correlation_rejects_noncommuting() {
        let t = StateOperator::maximally_mixed(2);
        let sx = CMatrix::from_row_slice(2, 2, &[re(0.0), re(1.0), re(1.0), re(0.0)]);
        let sz = CMatrix::from_diagonal(&ket(&[re(1.0), re(-1.0)]));
        assert!(normalized_correlation(&t, &sx, &sz).is_err());
    }

    #[test]
    fn correlation_rejects_zero_variance() {
        let t = StateOperator::from_diagonal(&[1.0, 0.0]).unwrap();
        let a = CMatrix::from_diagonal(&ket(&[re(1.0), re(-1.0)]));
        assert!(normalized_correlation(&t, &a, &a).is_err());
    }

    #[test]
    fn povm_must_sum_to_identity() {
        let e0 = Effect::new(CMatrix::from_diagonal(&ket(&[re(0.6), re(0.0)]))).unwrap();
        let e1 = Effect::new(CMatrix::from_diagonal(&ket(&[re(0.3), re(1.0)]))).unwrap();
        assert!(DiscretePOVM::new(vec![e0, e1], vec![0.0, 1.0]).is_err());
    }

    #[test]
    fn decomposition_weights_must_normalize() {
        let t = StateOperator::maximally_mixed(2);
        let bad = DecomposableState::new(vec![
            WeightedComponent {
                weight: 0.5,
                state: t.clone(),
            },
            WeightedComponent {
                weight: 0.4,
                state: t,
            },
        ]);
        assert!(bad.is_err());
    }

    #[test]
    fn flatten_averages_components() {
        let up = StateOperator::from_diagonal(&[1.0, 0.0]).unwrap();
        let down = StateOperator::from_diagonal(&[0.0, 1.0]).unwrap();
        let dec = DecomposableState::new(vec![
            WeightedComponent {
                weight: 0.25,
                state: up,
            },
            WeightedComponent {
                weight: 0.75,
                state: down,
            },
        ])
        .unwrap();
        let flat = dec.flatten().unwrap();
        assert_relative_eq!(flat.matrix()[(0, 0)].re, 0.25, epsilon = 1e-14);
        assert_relative_eq!(flat.matrix()[(1, 1)].re, 0.75, epsilon = 1e-14);
    }

    #[test]
    fn state_rejects_nonhermitian_and_negative() {
        let m = CMatrix::from_row_slice(2, 2, &[re(0.5), re(0.3), re(-0.3), re(0.5)]);
        assert!(StateOperator::new(m).is_err());
        let neg = CMatrix::from_diagonal(&ket(&[re(1.2), re(-0.2)]));
        assert!(StateOperator::new(neg).is_err());
    }
}
