//! The Beltrametti-Cassinelli-Lahti premeasurement scheme.
//!
//! A discrete object observable with eigenvalues `o_m` and (possibly
//! degenerate) eigenvectors `phi_mk` couples to orthonormal pointer states
//! `psi_m` through a unitary extension of
//! `phi_mk (x) psi  ->  varphi_mk (x) psi_m`,
//! which reproduces the Born probabilities on the pointer.

use super::BRANCH_THRESHOLD;
use crate::qcore::CVector;
use crate::{Error, Result};
use num_complex::Complex64;

/// The model data: object eigenstructure, post-interaction object
/// vectors, and the pointer states.
#[derive(Debug, Clone)]
pub struct BCLModel {
    pub eigenvalues: Vec<f64>,
    /// `eigenvectors[m][k]`: orthonormal object eigenvectors of `o_m`.
    pub eigenvectors: Vec<Vec<CVector>>,
    /// `released[m][k]`: the object vectors after the coupling, orthonormal
    /// within each `m`.
    pub released: Vec<Vec<CVector>>,
    /// Initial pointer vector.
    pub pointer_ready: CVector,
    /// Orthonormal pointer signal states, one per eigenvalue.
    pub pointer_signals: Vec<CVector>,
}

fn check_unit(v: &CVector, what: &str) -> Result<()> {
    let n: f64 = v.iter().map(|z| z.norm_sqr()).sum();
    if (n - 1.0).abs() > 1e-10 {
        return Err(Error::Validation(format!("{what} is not normalized")));
    }
    Ok(())
}

fn inner(a: &CVector, b: &CVector) -> Complex64 {
    a.iter().zip(b.iter()).map(|(x, y)| x.conj() * y).sum()
}

impl BCLModel {
    pub fn new(
        eigenvalues: Vec<f64>,
        eigenvectors: Vec<Vec<CVector>>,
        released: Vec<Vec<CVector>>,
        pointer_ready: CVector,
        pointer_signals: Vec<CVector>,
    ) -> Result<Self> {
        let n = eigenvalues.len();
        if n == 0 || eigenvectors.len() != n || released.len() != n || pointer_signals.len() != n {
            return Err(Error::Validation(
                "eigenvalues, eigenvectors, released vectors and pointer signals must align"
                    .into(),
            ));
        }
        // object eigenvectors orthonormal across all (m, k)
        let flat: Vec<&CVector> = eigenvectors.iter().flatten().collect();
        for (i, a) in flat.iter().enumerate() {
            for (j, b) in flat.iter().enumerate() {
                let g = inner(a, b);
                let expect = if i == j { 1.0 } else { 0.0 };
                if (g.re - expect).abs() > 1e-10 || g.im.abs() > 1e-10 {
                    return Err(Error::Validation(
                        "object eigenvectors are not orthonormal".into(),
                    ));
                }
            }
        }
        // released vectors orthonormal within each m, degeneracies matching
        for (m, fam) in released.iter().enumerate() {
            if fam.len() != eigenvectors[m].len() {
                return Err(Error::Validation(format!(
                    "released family {m} has wrong degeneracy"
                )));
            }
            for (k, a) in fam.iter().enumerate() {
                for (l, b) in fam.iter().enumerate() {
                    let g = inner(a, b);
                    let expect = if k == l { 1.0 } else { 0.0 };
                    if (g.re - expect).abs() > 1e-10 || g.im.abs() > 1e-10 {
                        return Err(Error::Validation(format!(
                            "released vectors of family {m} are not orthonormal"
                        )));
                    }
                }
            }
        }
        check_unit(&pointer_ready, "pointer ready state")?;
        for (i, a) in pointer_signals.iter().enumerate() {
            for (j, b) in pointer_signals.iter().enumerate() {
                let g = inner(a, b);
                let expect = if i == j { 1.0 } else { 0.0 };
                if (g.re - expect).abs() > 1e-10 || g.im.abs() > 1e-10 {
                    return Err(Error::Validation(
                        "pointer signal states are not orthonormal".into(),
                    ));
                }
            }
        }
        Ok(Self {
            eigenvalues,
            eigenvectors,
            released,
            pointer_ready,
            pointer_signals,
        })
    }

    /// Non-degenerate model where the coupling leaves the object
    /// eigenvectors unchanged (`varphi_m = phi_m`) and the pointer is an
    /// `(n+1)`-dimensional register with the ready state at index 0.
    pub fn nondegenerate(eigenvalues: Vec<f64>, eigenvectors: Vec<CVector>) -> Result<Self> {
        let n = eigenvalues.len();
        let pointer_dim = n + 1;
        let unit = |i: usize| {
            let mut v = CVector::zeros(pointer_dim);
            v[i] = Complex64::from(1.0);
            v
        };
        BCLModel::new(
            eigenvalues,
            eigenvectors.iter().cloned().map(|v| vec![v]).collect(),
            eigenvectors.into_iter().map(|v| vec![v]).collect(),
            unit(0),
            (1..=n).map(unit).collect(),
        )
    }

    pub fn n_eigenvalues(&self) -> usize {
        self.eigenvalues.len()
    }

    pub fn degeneracy(&self, m: usize) -> usize {
        self.eigenvectors[m].len()
    }

    pub fn object_dim(&self) -> usize {
        self.eigenvectors[0][0].len()
    }

    pub fn released_dim(&self) -> usize {
        self.released[0][0].len()
    }

    pub fn pointer_dim(&self) -> usize {
        self.pointer_ready.len()
    }

    /// Expansion coefficients `c_mk = <phi_mk | phi>`.
    pub fn coefficients(&self, phi: &CVector) -> Vec<Vec<Complex64>> {
        self.eigenvectors
            .iter()
            .map(|fam| fam.iter().map(|e| inner(e, phi)).collect())
            .collect()
    }
}

/// The outcome of the premeasurement coupling on a vector state.
#[derive(Debug, Clone)]
pub struct Premeasurement {
    /// `c_mk` per eigenvalue and degeneracy index.
    pub coefficients: Vec<Vec<Complex64>>,
    /// Branch probabilities `p_m = sum_k |c_mk|^2`.
    pub probabilities: Vec<f64>,
    /// Normalized conditional released vectors `varphi^1_m`; `None` for
    /// branches below the zero-weight threshold.
    pub conditional: Vec<Option<CVector>>,
    /// The entangled end vector `sum_m sqrt(p_m) varphi^1_m (x) psi_m` on
    /// the released-object/pointer product space.
    pub entangled: CVector,
}

/// Run the premeasurement: decompose the object vector over the
/// eigenstructure and form branch probabilities, conditional released
/// vectors and the entangled composite vector.
pub fn bcl_premeasure(model: &BCLModel, phi: &CVector) -> Result<Premeasurement> {
    if phi.len() != model.object_dim() {
        return Err(Error::DimensionMismatch(format!(
            "object vector dim {} vs model dim {}",
            phi.len(),
            model.object_dim()
        )));
    }
    check_unit(phi, "object vector")?;
    let coefficients = model.coefficients(phi);
    // the eigenvector set must actually carry the state
    let captured: f64 = coefficients
        .iter()
        .flatten()
        .map(|c| c.norm_sqr())
        .sum();
    if (captured - 1.0).abs() > 1e-10 {
        return Err(Error::Validation(format!(
            "eigenvector decomposition captures only {captured} of the state"
        )));
    }
    let probabilities: Vec<f64> = coefficients
        .iter()
        .map(|fam| fam.iter().map(|c| c.norm_sqr()).sum())
        .collect();
    let d_rel = model.released_dim();
    let d_ptr = model.pointer_dim();
    let mut conditional = Vec::with_capacity(model.n_eigenvalues());
    for (m, fam) in coefficients.iter().enumerate() {
        if probabilities[m] < BRANCH_THRESHOLD {
            conditional.push(None);
            continue;
        }
        let mut v = CVector::zeros(d_rel);
        for (k, c) in fam.iter().enumerate() {
            v += model.released[m][k].map(|z| z * c);
        }
        conditional.push(Some(
            v.map(|z| z / Complex64::from(probabilities[m].sqrt())),
        ));
    }
    // the entangled end vector sum_mk c_mk varphi_mk (x) psi_m, which
    // equals sum_m sqrt(p_m) varphi^1_m (x) psi_m
    let mut entangled = CVector::zeros(d_rel * d_ptr);
    for (m, fam) in coefficients.iter().enumerate() {
        for (k, c) in fam.iter().enumerate() {
            for i in 0..d_rel {
                for j in 0..d_ptr {
                    entangled[i * d_ptr + j] +=
                        c * model.released[m][k][i] * model.pointer_signals[m][j];
                }
            }
        }
    }
    Ok(Premeasurement {
        coefficients,
        probabilities,
        conditional,
        entangled,
    })
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

    fn qutrit_model() -> BCLModel {
        // two eigenvalues: o_1 with a 2-fold eigenspace, o_2 simple
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

    #[test]
    fn eigenstate_input_gives_one_branch() {
        let model = qutrit_model();
        let pre = bcl_premeasure(&model, &unit(3, 2)).unwrap();
        assert_relative_eq!(pre.probabilities[1], 1.0, epsilon = 1e-14);
        assert!(pre.probabilities[0] < BRANCH_THRESHOLD);
        assert!(pre.conditional[0].is_none());
        assert!(pre.conditional[1].is_some());
    }

    #[test]
    fn nondegenerate_born_rule() {
        let e = |i| unit(2, i);
        let model = BCLModel::nondegenerate(vec![0.5, -0.5], vec![e(0), e(1)]).unwrap();
        let mut phi = CVector::zeros(2);
        phi[0] = Complex64::from(0.6);
        phi[1] = Complex64::from(0.8);
        let pre = bcl_premeasure(&model, &phi).unwrap();
        assert_relative_eq!(pre.probabilities[0], 0.36, epsilon = 1e-14);
        assert_relative_eq!(pre.probabilities[1], 0.64, epsilon = 1e-14);
    }

    #[test]
    fn probabilities_always_sum_to_one() {
        let model = qutrit_model();
        let mut phi = CVector::zeros(3);
        phi[0] = Complex64::new(0.5, 0.1);
        phi[1] = Complex64::new(-0.3, 0.4);
        phi[2] = Complex64::new(0.2, -0.2);
        let norm: f64 = phi.iter().map(|z| z.norm_sqr()).sum::<f64>();
        let phi = phi.map(|z| z / Complex64::from(norm.sqrt()));
        let pre = bcl_premeasure(&model, &phi).unwrap();
        let total: f64 = pre.probabilities.iter().sum();
        assert_relative_eq!(total, 1.0, epsilon = 1e-12);
        // degenerate branch has the summed weight of its two coefficients
        assert_relative_eq!(
            pre.probabilities[0],
            phi[0].norm_sqr() + phi[1].norm_sqr(),
            epsilon = 1e-14
        );
    }

    #[test]
    fn entangled_vector_is_normalized_and_branch_resolved() {
        let model = qutrit_model();
        let mut phi = CVector::zeros(3);
        phi[0] = Complex64::from(0.6);
        phi[2] = Complex64::from(0.8);
        let pre = bcl_premeasure(&model, &phi).unwrap();
        let norm: f64 = pre.entangled.iter().map(|z| z.norm_sqr()).sum();
        assert_relative_eq!(norm, 1.0, epsilon = 1e-12);
        // project onto pointer signal 0: weight p_0
        let d_ptr = model.pointer_dim();
        let mut w0 = 0.0;
        for i in 0..model.released_dim() {
            w0 += pre.entangled[i * d_ptr + 1].norm_sqr();
        }
        assert_relative_eq!(w0, pre.probabilities[0], epsilon = 1e-12);
    }

    #[test]
    fn unnormalized_input_is_rejected() {
        let model = qutrit_model();
        let mut phi = CVector::zeros(3);
        phi[0] = Complex64::from(2.0);
        assert!(bcl_premeasure(&model, &phi).is_err());
    }

    #[test]
    fn nonorthonormal_model_is_rejected() {
        let e = |i| unit(2, i);
        let bad = BCLModel::new(
            vec![1.0, 2.0],
            vec![vec![e(0)], vec![e(0)]],
            vec![vec![e(0)], vec![e(0)]],
            unit(3, 0),
            vec![unit(3, 1), unit(3, 2)],
        );
        assert!(bad.is_err());
    }
}
