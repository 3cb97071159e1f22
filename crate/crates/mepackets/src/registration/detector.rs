//! Channel-based state reduction for flexible, fixed-array and non-ideal
//! detectors.
//!
//! A channel is the formal evolution restricted to one eigenvalue's
//! eigenspace; its swallowed-composite images `T'_mkl` are model inputs
//! constrained only by the trace condition `tr[T'_mkl] = delta_kl`. The
//! reductions recombine channels into an explicit statistical
//! decomposition with one detector signal per branch.

use super::{bcl_premeasure, BCLModel, EndComponent, EndState, Signal, BRANCH_THRESHOLD};
use crate::qcore::{kron, trace, CMatrix, CVector, StateOperator};
use crate::{Error, Result};
use num_complex::Complex64;

/// Whether the detector reports one signal per eigenvalue or is an array
/// of spatially separated sub-detectors.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SignalMode {
    Flexible,
    FixedArray,
}

/// The swallowed-channel operator family `T'_kl` of one eigenvalue.
#[derive(Debug, Clone)]
pub struct ChannelFamily {
    pub dim: usize,
    /// `ops[k][l]`, with `tr[ops[k][l]] = delta_kl` and
    /// `ops[l][k] = ops[k][l]†`.
    pub ops: Vec<Vec<CMatrix>>,
}

impl ChannelFamily {
    pub fn new(ops: Vec<Vec<CMatrix>>) -> Result<Self> {
        if ops.is_empty() {
            return Err(Error::Validation("empty channel family".into()));
        }
        let deg = ops.len();
        let dim = ops[0][0].nrows();
        for (k, row) in ops.iter().enumerate() {
            if row.len() != deg {
                return Err(Error::Validation("channel family is not square".into()));
            }
            for (l, op) in row.iter().enumerate() {
                if op.nrows() != dim || op.ncols() != dim {
                    return Err(Error::DimensionMismatch(
                        "channel operators have mixed dimensions".into(),
                    ));
                }
                let tr = trace(op);
                let expect = if k == l { 1.0 } else { 0.0 };
                if (tr.re - expect).abs() > 1e-10 || tr.im.abs() > 1e-10 {
                    return Err(Error::Validation(format!(
                        "channel trace condition violated at ({k},{l}): tr = {tr}"
                    )));
                }
                let defect = (op.adjoint() - &ops[l][k])
                    .iter()
                    .map(|z| z.norm())
                    .fold(0.0, f64::max);
                if defect > 1e-10 {
                    return Err(Error::Validation(
                        "channel family lacks the adjoint pairing".into(),
                    ));
                }
            }
        }
        Ok(Self { dim, ops })
    }

    /// Build `T'_kl = |chi_k><chi_l| (x) S` from orthonormal in-detector
    /// object vectors and a signal state of the detector.
    pub fn from_vectors_and_signal(chi: &[CVector], signal: &CMatrix) -> Result<Self> {
        if chi.is_empty() {
            return Err(Error::Validation("need at least one vector".into()));
        }
        let mut ops = Vec::with_capacity(chi.len());
        for k in 0..chi.len() {
            let mut row = Vec::with_capacity(chi.len());
            for l in 0..chi.len() {
                let outer = &chi[k] * chi[l].adjoint();
                row.push(kron(&outer, signal));
            }
            ops.push(row);
        }
        Self::new(ops)
    }

    pub fn degeneracy(&self) -> usize {
        self.ops.len()
    }

    /// The branch state `sum_kl w(k, l) T'_kl`.
    pub fn combine(&self, w: &dyn Fn(usize, usize) -> Complex64) -> CMatrix {
        let mut out = CMatrix::zeros(self.dim, self.dim);
        for (k, row) in self.ops.iter().enumerate() {
            for (l, op) in row.iter().enumerate() {
                let c = w(k, l);
                if c != Complex64::default() {
                    out += op.map(|z| z * c);
                }
            }
        }
        out
    }
}

/// The no-signal sector of a non-ideal detector: the object states
/// `phi'_mk` evolved into the detector without triggering it, and the
/// matching orthonormal no-signal pointer states.
#[derive(Debug, Clone)]
pub struct NoSignalSector {
    pub object: Vec<Vec<CVector>>,
    pub pointer: Vec<CVector>,
}

/// Detector configuration for the reduction formulas.
#[derive(Debug, Clone)]
pub struct DetectorSpec {
    pub signal_mode: SignalMode,
    pub absorbing: bool,
    /// Intrinsic efficiency per eigenvalue channel; 1 everywhere for an
    /// ideal detector.
    pub efficiencies: Vec<f64>,
    /// Swallowed-channel families, one per eigenvalue. Flexible: all on a
    /// common composite space. Fixed array: family `m` on the object plus
    /// sub-detector `m` space.
    pub channels: Vec<ChannelFamily>,
    /// Rest states `T^(r)` of the sub-detectors (fixed arrays, release).
    pub rest_states: Vec<CMatrix>,
    /// Signaling sub-detector states `T^(m)''` after release.
    pub release_signal_states: Vec<CMatrix>,
    /// No-signal sector for non-ideal reductions.
    pub no_signal: Option<NoSignalSector>,
}

impl DetectorSpec {
    /// A complete, consistent detector built from a BCL model: channel
    /// family `m` swallows the object into `|phi_mk>` correlated with a
    /// fired sub-detector state. Sub-detector spaces are two-dimensional
    /// (`|0>` rest, `|1>` fired); the no-signal sector reuses the model's
    /// released vectors with its own orthonormal pointer register.
    pub fn ideal_lookalike(
        model: &BCLModel,
        signal_mode: SignalMode,
        absorbing: bool,
        efficiencies: Vec<f64>,
    ) -> Result<Self> {
        let n = model.n_eigenvalues();
        if efficiencies.len() != n {
            return Err(Error::Validation(
                "one efficiency per eigenvalue required".into(),
            ));
        }
        for &eta in &efficiencies {
            if !(eta > 0.0 && eta <= 1.0) {
                return Err(Error::Validation(format!(
                    "efficiency {eta} outside (0, 1]"
                )));
            }
        }
        let sub_dim = 2;
        let rest = {
            let mut m = CMatrix::zeros(sub_dim, sub_dim);
            m[(0, 0)] = Complex64::from(1.0);
            m
        };
        let fired = {
            let mut m = CMatrix::zeros(sub_dim, sub_dim);
            m[(1, 1)] = Complex64::from(1.0);
            m
        };
        let channels = match signal_mode {
            SignalMode::FixedArray => (0..n)
                .map(|m| ChannelFamily::from_vectors_and_signal(&model.eigenvectors[m], &fired))
                .collect::<Result<Vec<_>>>()?,
            SignalMode::Flexible => {
                // common detector space: one fired level per eigenvalue
                let det_dim = n + 1;
                (0..n)
                    .map(|m| {
                        let mut sig = CMatrix::zeros(det_dim, det_dim);
                        sig[(m + 1, m + 1)] = Complex64::from(1.0);
                        ChannelFamily::from_vectors_and_signal(&model.eigenvectors[m], &sig)
                    })
                    .collect::<Result<Vec<_>>>()?
            }
        };
        // no-signal pointer register: one level per eigenvalue
        let no_signal = NoSignalSector {
            object: model.released.clone(),
            pointer: (0..n)
                .map(|m| {
                    let mut v = CVector::zeros(n);
                    v[m] = Complex64::from(1.0);
                    v
                })
                .collect(),
        };
        Ok(Self {
            signal_mode,
            absorbing,
            efficiencies,
            channels,
            rest_states: vec![rest; n],
            release_signal_states: vec![fired; n],
            no_signal: Some(no_signal),
        })
    }

    pub fn is_ideal(&self) -> bool {
        self.efficiencies.iter().all(|&e| e == 1.0)
    }
}

fn kept_branches(probabilities: &[f64]) -> Vec<usize> {
    probabilities
        .iter()
        .enumerate()
        .filter(|(_, &p)| p >= BRANCH_THRESHOLD)
        .map(|(m, _)| m)
        .collect()
}

fn branch_state(det: &DetectorSpec, m: usize, w: &dyn Fn(usize, usize) -> Complex64) -> CMatrix {
    det.channels[m].combine(w)
}

/// Tensor the excited block of sub-detector `m` with the rest states of
/// the others, in sub-detector order.
fn array_component(det: &DetectorSpec, m: usize, excited: &CMatrix) -> CMatrix {
    let mut out = excited.clone();
    for (r, rest) in det.rest_states.iter().enumerate() {
        if r != m {
            out = kron(&out, rest);
        }
    }
    out
}

/// Flexible-signal reduction: branch `m` has weight `p_m` and state
/// `sum_kl (c_mk c*_ml / p_m) T'_mkl`.
pub fn reduce_flexible(model: &BCLModel, det: &DetectorSpec, phi: &CVector) -> Result<EndState> {
    if det.signal_mode != SignalMode::Flexible {
        return Err(Error::Unsupported(
            "reduce_flexible needs a flexible-signal detector".into(),
        ));
    }
    let pre = bcl_premeasure(model, phi)?;
    let mut comps = Vec::new();
    for m in kept_branches(&pre.probabilities) {
        let p = pre.probabilities[m];
        let c = &pre.coefficients[m];
        let state = branch_state(det, m, &|k, l| c[k] * c[l].conj() / Complex64::from(p));
        comps.push(
            EndComponent::new(p, StateOperator::new(state)?, Signal::Fired(vec![m]))
                .with_status("swallowed"),
        );
    }
    EndState::new(comps)
}

/// Fixed-array reduction: branch `m` tensors its excited channel block
/// with the rest states of the other sub-detectors.
pub fn reduce_fixed_array(model: &BCLModel, det: &DetectorSpec, phi: &CVector) -> Result<EndState> {
    if det.signal_mode != SignalMode::FixedArray {
        return Err(Error::Unsupported(
            "reduce_fixed_array needs a fixed-array detector".into(),
        ));
    }
    let pre = bcl_premeasure(model, phi)?;
    let mut comps = Vec::new();
    for m in kept_branches(&pre.probabilities) {
        let p = pre.probabilities[m];
        let c = &pre.coefficients[m];
        let excited = branch_state(det, m, &|k, l| c[k] * c[l].conj() / Complex64::from(p));
        comps.push(
            EndComponent::new(
                p,
                StateOperator::new(array_component(det, m, &excited))?,
                Signal::Fired(vec![m]),
            )
            .with_status("swallowed"),
        );
    }
    EndState::new(comps)
}

/// Non-absorbing release: branch `m` carries the pure released object
/// state, the signaling detector state, and the rest states. Each branch
/// is a fresh preparation of the released system.
pub fn release_end_state(model: &BCLModel, det: &DetectorSpec, phi: &CVector) -> Result<EndState> {
    if det.absorbing {
        return Err(Error::Unsupported(
            "an absorbing detector never releases the system".into(),
        ));
    }
    let pre = bcl_premeasure(model, phi)?;
    let mut comps = Vec::new();
    for m in kept_branches(&pre.probabilities) {
        let p = pre.probabilities[m];
        let c = &pre.coefficients[m];
        let d_rel = model.released_dim();
        let mut released = CMatrix::zeros(d_rel, d_rel);
        for (k, ck) in c.iter().enumerate() {
            for (l, cl) in c.iter().enumerate() {
                let w = ck * cl.conj() / Complex64::from(p);
                if w != Complex64::default() {
                    released += (&model.released[m][k] * model.released[m][l].adjoint())
                        .map(|z| z * w);
                }
            }
        }
        let with_signal = kron(&released, &det.release_signal_states[m]);
        comps.push(
            EndComponent::new(
                p,
                StateOperator::new(array_component(det, m, &with_signal))?,
                Signal::Fired(vec![m]),
            )
            .with_status("released"),
        );
    }
    EndState::new(comps)
}

/// Non-ideal flexible reduction: signal branches carry `p_m eta_m`; one
/// no-signal branch carries the remainder `sum_m p_m (1 - eta_m)`.
pub fn nonideal_end_state(model: &BCLModel, det: &DetectorSpec, phi: &CVector) -> Result<EndState> {
    if det.signal_mode != SignalMode::Flexible {
        return Err(Error::Unsupported(
            "the non-ideal reduction is modeled for flexible-signal detectors".into(),
        ));
    }
    for &eta in &det.efficiencies {
        if !(eta > 0.0 && eta <= 1.0) {
            return Err(Error::Validation(format!("efficiency {eta} outside (0, 1]")));
        }
    }
    let pre = bcl_premeasure(model, phi)?;
    let mut comps = Vec::new();
    let mut no_signal_weight = 0.0;
    for m in kept_branches(&pre.probabilities) {
        let p = pre.probabilities[m];
        let eta = det.efficiencies[m];
        no_signal_weight += p * (1.0 - eta);
        let c = &pre.coefficients[m];
        let state = branch_state(det, m, &|k, l| c[k] * c[l].conj() / Complex64::from(p));
        comps.push(
            EndComponent::new(p * eta, StateOperator::new(state)?, Signal::Fired(vec![m]))
                .with_status("swallowed"),
        );
    }
    if no_signal_weight >= BRANCH_THRESHOLD {
        let sector = det.no_signal.as_ref().ok_or_else(|| {
            Error::Validation("non-ideal detector lacks a no-signal sector".into())
        })?;
        // pure vector chi = sum_mk c_mk C0_m phi'_mk (x) psi0_m, normalized
        // by the no-signal weight
        let d_obj = sector.object[0][0].len();
        let d_ptr = sector.pointer[0].len();
        let mut chi = CVector::zeros(d_obj * d_ptr);
        for (m, fam) in pre.coefficients.iter().enumerate() {
            let c0 = (1.0 - det.efficiencies[m]).sqrt();
            if c0 == 0.0 {
                continue;
            }
            for (k, c) in fam.iter().enumerate() {
                for i in 0..d_obj {
                    for j in 0..d_ptr {
                        chi[i * d_ptr + j] += c
                            * Complex64::from(c0)
                            * sector.object[m][k][i]
                            * sector.pointer[m][j];
                    }
                }
            }
        }
        let chi = chi.map(|z| z / Complex64::from(no_signal_weight.sqrt()));
        comps.push(
            EndComponent::new(no_signal_weight, StateOperator::pure(&chi)?, Signal::None)
                .with_status("no-signal"),
        );
    }
    EndState::new(comps)
}

/// Reduction of a non-extremal object state: the vector-state rule with
/// `c_mk c*_ml / p_m` replaced by `S_mkml / p_m`, for either signal mode.
pub fn reduce_state(model: &BCLModel, det: &DetectorSpec, s: &StateOperator) -> Result<EndState> {
    if s.dim() != model.object_dim() {
        return Err(Error::DimensionMismatch(format!(
            "state dim {} vs object dim {}",
            s.dim(),
            model.object_dim()
        )));
    }
    // overlap matrix elements S_mk,nl in the eigenbasis; the reductions
    // only need the diagonal-in-m blocks
    let n = model.n_eigenvalues();
    let mut probabilities = vec![0.0; n];
    for (m, prob) in probabilities.iter_mut().enumerate() {
        for k in 0..model.degeneracy(m) {
            let e = &model.eigenvectors[m][k];
            let v = s.matrix() * e;
            *prob += e
                .iter()
                .zip(v.iter())
                .map(|(a, b)| (a.conj() * b).re)
                .sum::<f64>();
        }
    }
    let captured: f64 = probabilities.iter().sum();
    if (captured - 1.0).abs() > 1e-10 {
        return Err(Error::Validation(format!(
            "state is not carried by the declared eigenbasis (captures {captured})"
        )));
    }
    let block = |m: usize, k: usize, l: usize| -> Complex64 {
        let ek = &model.eigenvectors[m][k];
        let el = &model.eigenvectors[m][l];
        let v = s.matrix() * el;
        ek.iter().zip(v.iter()).map(|(a, b)| a.conj() * b).sum()
    };
    let mut comps = Vec::new();
    for m in kept_branches(&probabilities) {
        let p = probabilities[m];
        let excited = branch_state(det, m, &|k, l| block(m, k, l) / Complex64::from(p));
        let state = match det.signal_mode {
            SignalMode::Flexible => excited,
            SignalMode::FixedArray => array_component(det, m, &excited),
        };
        comps.push(
            EndComponent::new(p, StateOperator::new(state)?, Signal::Fired(vec![m]))
                .with_status("swallowed"),
        );
    }
    EndState::new(comps)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn unit(dim: usize, i: usize) -> CVector {
        let mut v = CVector::zeros(dim);
        v[i] = Complex64::from(1.0);
        v
    }

    fn qubit_model() -> BCLModel {
        BCLModel::nondegenerate(vec![1.0, -1.0], vec![unit(2, 0), unit(2, 1)]).unwrap()
    }

    fn degenerate_model() -> BCLModel {
        let e = |i| unit(3, i);
        BCLModel::new(
            vec![1.0, -1.0],
            vec![vec![e(0), e(1)], vec![e(2)]],
            vec![vec![e(0), e(1)], vec![e(2)]],
            unit(3, 0),
            vec![unit(3, 1), unit(3, 2)],
        )
        .unwrap()
    }

    fn superposition() -> CVector {
        let mut phi = CVector::zeros(2);
        phi[0] = Complex64::from(0.6);
        phi[1] = Complex64::from(0.8);
        phi
    }

    #[test]
    fn flexible_branches_reproduce_premeasurement_weights() {
        let model = qubit_model();
        let det =
            DetectorSpec::ideal_lookalike(&model, SignalMode::Flexible, true, vec![1.0, 1.0])
                .unwrap();
        let end = reduce_flexible(&model, &det, &superposition()).unwrap();
        assert_eq!(end.components.len(), 2);
        assert_relative_eq!(end.components[0].weight, 0.36, epsilon = 1e-12);
        assert_relative_eq!(end.components[1].weight, 0.64, epsilon = 1e-12);
        for c in &end.components {
            // each branch is a valid unit-trace state by construction
            assert_eq!(c.state.dim(), 2 * 3);
        }
    }

    #[test]
    fn single_eigenvalue_input_gives_one_branch() {
        let model = qubit_model();
        let det =
            DetectorSpec::ideal_lookalike(&model, SignalMode::Flexible, true, vec![1.0, 1.0])
                .unwrap();
        let end = reduce_flexible(&model, &det, &unit(2, 1)).unwrap();
        assert_eq!(end.components.len(), 1);
        assert_relative_eq!(end.components[0].weight, 1.0, epsilon = 1e-14);
        assert_eq!(end.components[0].signal, Signal::Fired(vec![1]));
    }

    #[test]
    fn fixed_array_even_split() {
        let model = qubit_model();
        let det = DetectorSpec::ideal_lookalike(
            &model,
            SignalMode::FixedArray,
            true,
            vec![1.0, 1.0],
        )
        .unwrap();
        let mut phi = CVector::zeros(2);
        phi[0] = Complex64::from(std::f64::consts::FRAC_1_SQRT_2);
        phi[1] = Complex64::from(std::f64::consts::FRAC_1_SQRT_2);
        let end = reduce_fixed_array(&model, &det, &phi).unwrap();
        assert_eq!(end.components.len(), 2);
        for c in &end.components {
            assert_relative_eq!(c.weight, 0.5, epsilon = 1e-12);
            // object+sub-detector block, one more 2-dim sub-detector at rest
            assert_eq!(c.state.dim(), (2 * 2) * 2);
        }
        // signals are mutually exclusive
        assert_ne!(end.components[0].signal, end.components[1].signal);
    }

    #[test]
    fn release_produces_pure_object_branches() {
        let model = degenerate_model();
        let det = DetectorSpec::ideal_lookalike(
            &model,
            SignalMode::FixedArray,
            false,
            vec![1.0, 1.0],
        )
        .unwrap();
        let mut phi = CVector::zeros(3);
        phi[0] = Complex64::from(0.6);
        phi[2] = Complex64::from(0.8);
        let end = release_end_state(&model, &det, &phi).unwrap();
        assert_eq!(end.components.len(), 2);
        assert_relative_eq!(end.components[0].weight, 0.36, epsilon = 1e-12);
        assert_relative_eq!(end.components[1].weight, 0.64, epsilon = 1e-12);
        // degeneracy 1 in each occupied branch here, so the released
        // object is pure: the whole branch state is a pure product
        for c in &end.components {
            let evs = crate::qcore::eigh(c.state.matrix()).unwrap().0;
            let rank = evs.iter().filter(|&&v| v > 1e-10).count();
            assert_eq!(rank, 1);
        }
    }

    #[test]
    fn absorbing_detector_cannot_release() {
        let model = qubit_model();
        let det =
            DetectorSpec::ideal_lookalike(&model, SignalMode::FixedArray, true, vec![1.0, 1.0])
                .unwrap();
        assert!(matches!(
            release_end_state(&model, &det, &superposition()),
            Err(Error::Unsupported(_))
        ));
    }

    #[test]
    fn nonideal_weights_close_exactly() {
        let model = qubit_model();
        let det = DetectorSpec::ideal_lookalike(
            &model,
            SignalMode::Flexible,
            true,
            vec![0.8, 0.55],
        )
        .unwrap();
        let end = nonideal_end_state(&model, &det, &superposition()).unwrap();
        assert_eq!(end.components.len(), 3);
        assert_relative_eq!(end.components[0].weight, 0.36 * 0.8, epsilon = 1e-12);
        assert_relative_eq!(end.components[1].weight, 0.64 * 0.55, epsilon = 1e-12);
        assert_relative_eq!(
            end.components[2].weight,
            0.36 * 0.2 + 0.64 * 0.45,
            epsilon = 1e-12
        );
        assert_eq!(end.components[2].signal, Signal::None);
        let total: f64 = end.components.iter().map(|c| c.weight).sum();
        assert_relative_eq!(total, 1.0, epsilon = 1e-14);
    }

    #[test]
    fn unit_efficiency_reduces_to_the_ideal_formula() {
        let model = qubit_model();
        let det =
            DetectorSpec::ideal_lookalike(&model, SignalMode::Flexible, true, vec![1.0, 1.0])
                .unwrap();
        let ideal = reduce_flexible(&model, &det, &superposition()).unwrap();
        let nonideal = nonideal_end_state(&model, &det, &superposition()).unwrap();
        assert_eq!(ideal.components.len(), nonideal.components.len());
        for (a, b) in ideal.components.iter().zip(&nonideal.components) {
            assert_relative_eq!(a.weight, b.weight, epsilon = 1e-14);
            assert_relative_eq!(
                (a.state.matrix() - b.state.matrix()).norm(),
                0.0,
                epsilon = 1e-12
            );
        }
    }

    #[test]
    fn nonideal_signal_frequencies_match_within_three_sigma() {
        let model = qubit_model();
        let det = DetectorSpec::ideal_lookalike(
            &model,
            SignalMode::Flexible,
            true,
            vec![0.9, 0.6],
        )
        .unwrap();
        let end = nonideal_end_state(&model, &det, &superposition()).unwrap();
        let n = 100_000;
        let freqs = end.sampled_frequencies(n, 4);
        for (f, c) in freqs.iter().zip(&end.components) {
            let se = (c.weight * (1.0 - c.weight) / n as f64).sqrt();
            assert!(
                (f - c.weight).abs() < 3.0 * se,
                "freq {f} vs {} (se {se})",
                c.weight
            );
        }
    }

    #[test]
    fn pure_state_input_matches_vector_input() {
        let model = qubit_model();
        let det =
            DetectorSpec::ideal_lookalike(&model, SignalMode::Flexible, true, vec![1.0, 1.0])
                .unwrap();
        let phi = superposition();
        let via_vector = reduce_flexible(&model, &det, &phi).unwrap();
        let s = StateOperator::pure(&phi).unwrap();
        let via_state = reduce_state(&model, &det, &s).unwrap();
        assert_eq!(via_vector.components.len(), via_state.components.len());
        for (a, b) in via_vector.components.iter().zip(&via_state.components) {
            assert_relative_eq!(a.weight, b.weight, epsilon = 1e-12);
            assert_relative_eq!(
                (a.state.matrix() - b.state.matrix()).norm(),
                0.0,
                epsilon = 1e-12
            );
        }
    }

    #[test]
    fn eigenprojector_mixture_gives_diagonal_branches() {
        let model = qubit_model();
        let det =
            DetectorSpec::ideal_lookalike(&model, SignalMode::Flexible, true, vec![1.0, 1.0])
                .unwrap();
        let s = StateOperator::from_diagonal(&[0.25, 0.75]).unwrap();
        let end = reduce_state(&model, &det, &s).unwrap();
        assert_relative_eq!(end.components[0].weight, 0.25, epsilon = 1e-13);
        assert_relative_eq!(end.components[1].weight, 0.75, epsilon = 1e-13);
        let total: f64 = end.components.iter().map(|c| c.weight).sum();
        assert_relative_eq!(total, 1.0, epsilon = 1e-13);
    }

    #[test]
    fn branch_weights_are_the_born_probabilities_of_the_registered_observable() {
        // probability reproducibility across modules: the end-state weights
        // equal tr[T E_m] with E_m the eigenprojectors of the observable
        let model = degenerate_model();
        let det =
            DetectorSpec::ideal_lookalike(&model, SignalMode::Flexible, true, vec![1.0, 1.0])
                .unwrap();
        let mut phi = CVector::zeros(3);
        phi[0] = Complex64::new(0.5, 0.2);
        phi[1] = Complex64::new(-0.1, 0.6);
        phi[2] = Complex64::new(0.4, -0.4);
        let norm: f64 = phi.iter().map(|z| z.norm_sqr()).sum();
        let phi = phi.map(|z| z / Complex64::from(norm.sqrt()));
        let end = reduce_flexible(&model, &det, &phi).unwrap();
        let t = StateOperator::pure(&phi).unwrap();
        for (m, comp) in end.components.iter().enumerate() {
            let mut proj = CMatrix::zeros(3, 3);
            for e in &model.eigenvectors[m] {
                proj += e * e.adjoint();
            }
            let effect = crate::qcore::Effect::new(proj).unwrap();
            let born = crate::qcore::born_probability(&t, &effect).unwrap();
            assert_relative_eq!(comp.weight, born, epsilon = 1e-12);
        }
    }

    #[test]
    fn flexible_and_fixed_agree_for_nondegenerate_identical_channels() {
        // degeneracy 1 and the same channel states on both sides, with
        // trivial (one-dimensional) rest factors: the two reductions must
        // give identical decompositions
        let model = qubit_model();
        let flexible =
            DetectorSpec::ideal_lookalike(&model, SignalMode::Flexible, true, vec![1.0, 1.0])
                .unwrap();
        let fixed = DetectorSpec {
            signal_mode: SignalMode::FixedArray,
            rest_states: vec![CMatrix::identity(1, 1); 2],
            ..flexible.clone()
        };
        let phi = superposition();
        let a = reduce_flexible(&model, &flexible, &phi).unwrap();
        let b = reduce_fixed_array(&model, &fixed, &phi).unwrap();
        assert_eq!(a.components.len(), b.components.len());
        for (x, y) in a.components.iter().zip(&b.components) {
            assert_relative_eq!(x.weight, y.weight, epsilon = 1e-14);
            assert_relative_eq!(
                (x.state.matrix() - y.state.matrix()).norm(),
                0.0,
                epsilon = 1e-14
            );
            assert_eq!(x.signal, y.signal);
        }
    }

    #[test]
    fn channel_family_trace_condition_is_enforced() {
        let chi = vec![unit(2, 0), unit(2, 1)];
        let mut sig = CMatrix::zeros(2, 2);
        sig[(0, 0)] = Complex64::from(0.7);
        sig[(1, 1)] = Complex64::from(0.7);
        // trace 1.4 violates the condition
        assert!(ChannelFamily::from_vectors_and_signal(&chi, &sig).is_err());
    }
}
