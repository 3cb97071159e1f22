//! Finite-dimensional density-operator and POVM engine.
//!
//! Everything here works on dense complex matrices; the instances this
//! library builds are small (dimensions up to a few hundred), so no sparse
//! structures are used. All operations are pure functions of immutable
//! inputs and are safe to call concurrently.

mod oscillator;
mod state;
mod tensor;

pub use oscillator::{LadderOperators, OscillatorBasis};
pub use state::{
    average_and_variance, born_probability, normalized_correlation, von_neumann_entropy,
    DecomposableState, DiscretePOVM, Effect, StateOperator, WeightedComponent,
};
pub use tensor::{partial_trace_first, partial_trace_second, symmetrize_compose, Statistics};

use nalgebra::DMatrix;
use num_complex::Complex64;

/// Dense complex matrix used throughout the library.
pub type CMatrix = DMatrix<Complex64>;
/// Dense complex vector.
pub type CVector = nalgebra::DVector<Complex64>;

/// Tolerance for Hermiticity checks and the hermitization guard.
pub const HERMITICITY_TOL: f64 = 1e-12;
/// Eigenvalues above this negative floor count as non-negative.
pub const POSITIVITY_TOL: f64 = 1e-12;
/// Allowed deviation of a state's trace from one.
pub const TRACE_TOL: f64 = 1e-12;
/// Allowed deviation of a POVM's effect sum from the identity.
pub const POVM_SUM_TOL: f64 = 1e-10;
/// Eigenvalues below this are treated as exactly zero in entropy sums.
pub const ENTROPY_EIGENVALUE_FLOOR: f64 = 1e-14;

/// Kronecker product of two operators.
pub fn kron(a: &CMatrix, b: &CMatrix) -> CMatrix {
    a.kronecker(b)
}

/// Trace of a complex matrix.
pub fn trace(m: &CMatrix) -> Complex64 {
    m.diagonal().sum()
}

/// Largest absolute entry of `m - m.adjoint()`.
pub fn hermiticity_defect(m: &CMatrix) -> f64 {
    let d = m - m.adjoint();
    d.iter().map(|z| z.norm()).fold(0.0, f64::max)
}

/// Replace `m` by `(m + m†)/2` when the defect is below the guard tolerance.
///
/// Returns an error when the asymmetry is genuine rather than roundoff.
pub fn hermitize(m: &CMatrix, tol: f64) -> crate::Result<CMatrix> {
    let defect = hermiticity_defect(m);
    let scale = m.iter().map(|z| z.norm()).fold(1.0, f64::max);
    if defect > tol * scale {
        return Err(crate::Error::Validation(format!(
            "matrix is not Hermitian: defect {defect:.3e} exceeds {:.3e}",
            tol * scale
        )));
    }
    Ok((m + m.adjoint()).scale(0.5))
}

/// Eigendecomposition of a Hermitian matrix: ascending real eigenvalues and
/// the matrix whose columns are the matching orthonormal eigenvectors.
pub fn eigh(m: &CMatrix) -> crate::Result<(Vec<f64>, CMatrix)> {
    let h = hermitize(m, HERMITICITY_TOL)?;
    let se = h.symmetric_eigen();
    let mut order: Vec<usize> = (0..se.eigenvalues.len()).collect();
    order.sort_by(|&i, &j| se.eigenvalues[i].partial_cmp(&se.eigenvalues[j]).unwrap());
    let vals: Vec<f64> = order.iter().map(|&i| se.eigenvalues[i]).collect();
    let vecs = CMatrix::from_columns(
        &order
            .iter()
            .map(|&i| se.eigenvectors.column(i).into_owned())
            .collect::<Vec<_>>(),
    );
    Ok((vals, vecs))
}
