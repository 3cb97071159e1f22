//! Screen state reduction: one branch passes through, one is swallowed.

use super::{EndComponent, EndState, Signal, BRANCH_THRESHOLD};
use crate::qcore::{kron, CMatrix, CVector, StateOperator};
use crate::{Error, Result};
use num_complex::Complex64;

/// A screen decomposing the incoming state into a left-through amplitude
/// and a swallowed amplitude.
#[derive(Debug, Clone)]
pub struct ScreenSpec {
    pub c_through: Complex64,
    pub c_swallowed: Complex64,
    /// Object state that went through.
    pub through_state: CVector,
    /// Screen state when the object went through.
    pub screen_rest: CMatrix,
    /// Composite screen state with the swallowed object inside.
    pub screen_excited: CMatrix,
}

impl ScreenSpec {
    pub fn new(
        c_through: Complex64,
        c_swallowed: Complex64,
        through_state: CVector,
        screen_rest: CMatrix,
        screen_excited: CMatrix,
    ) -> Result<Self> {
        let total = c_through.norm_sqr() + c_swallowed.norm_sqr();
        if (total - 1.0).abs() > 1e-12 {
            return Err(Error::Validation(format!(
                "screen amplitudes are not normalized: |c|^2 sums to {total}"
            )));
        }
        Ok(Self {
            c_through,
            c_swallowed,
            through_state,
            screen_rest,
            screen_excited,
        })
    }
}

/// Reduce the formally evolved screen state: the through/swallowed cross
/// terms are discarded and the two branches become a statistical
/// decomposition with weights `|c_thr|^2` and `|c_sw|^2`.
pub fn screen_reduce(spec: &ScreenSpec) -> Result<EndState> {
    let p_thr = spec.c_through.norm_sqr();
    let p_sw = spec.c_swallowed.norm_sqr();
    let mut comps = Vec::new();
    if p_thr >= BRANCH_THRESHOLD {
        let through = StateOperator::pure(&spec.through_state)?;
        comps.push(
            EndComponent::new(
                p_thr,
                StateOperator::new(kron(through.matrix(), &spec.screen_rest))?,
                Signal::None,
            )
            .with_status("through"),
        );
    }
    if p_sw >= BRANCH_THRESHOLD {
        comps.push(
            EndComponent::new(
                p_sw,
                StateOperator::new(spec.screen_excited.clone())?,
                Signal::Fired(vec![0]),
            )
            .with_status("swallowed"),
        );
    }
    EndState::new(comps)
}
