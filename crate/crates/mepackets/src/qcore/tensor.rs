//! Tensor products, partial traces, and (anti)symmetrized composition.

use super::{kron, trace, CMatrix, StateOperator};
use crate::{Error, Result};
use num_complex::Complex64;

/// Exchange statistics for identical-particle composition.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Statistics {
    Boson,
    Fermion,
}

fn split_dims(w: &StateOperator, dim1: usize, dim2: usize) -> Result<()> {
    if w.dim() != dim1 * dim2 {
        return Err(Error::DimensionMismatch(format!(
            "state dim {} does not factor as {dim1} x {dim2}",
            w.dim()
        )));
    }
    Ok(())
}

/// Trace out the second factor of a state on `H1 (x) H2`, leaving a state
/// on `H1`.
pub fn partial_trace_second(w: &StateOperator, dim1: usize, dim2: usize) -> Result<StateOperator> {
    split_dims(w, dim1, dim2)?;
    let m = w.matrix();
    let mut out = CMatrix::zeros(dim1, dim1);
    for i in 0..dim1 {
        for j in 0..dim1 {
            let mut s = Complex64::default();
            for k in 0..dim2 {
                s += m[(i * dim2 + k, j * dim2 + k)];
            }
            out[(i, j)] = s;
        }
    }
    StateOperator::new(out)
}

/// Trace out the first factor of a state on `H1 (x) H2`, leaving a state
/// on `H2`.
pub fn partial_trace_first(w: &StateOperator, dim1: usize, dim2: usize) -> Result<StateOperator> {
    split_dims(w, dim1, dim2)?;
    let m = w.matrix();
    let mut out = CMatrix::zeros(dim2, dim2);
    for i in 0..dim2 {
        for j in 0..dim2 {
            let mut s = Complex64::default();
            for k in 0..dim1 {
                s += m[(k * dim2 + i, k * dim2 + j)];
            }
            out[(i, j)] = s;
        }
    }
    StateOperator::new(out)
}

/// Permutation operator on `(C^d)^(x n)` sending factor slot `s` to slot
/// `perm[s]`.
fn permutation_operator(d: usize, perm: &[usize]) -> CMatrix {
    let n = perm.len();
    let dim = d.pow(n as u32);
    let mut m = CMatrix::zeros(dim, dim);
    let mut digits = vec![0usize; n];
    for col in 0..dim {
        let mut rest = col;
        for s in (0..n).rev() {
            digits[s] = rest % d;
            rest /= d;
        }
        // basis |i_0 .. i_{n-1}> maps to the product state with i_s moved
        // into slot perm[s]
        let mut row = 0usize;
        for s in 0..n {
            let mut target = vec![0usize; n];
            for (src, &dst) in perm.iter().enumerate() {
                target[dst] = digits[src];
            }
            row = row * d + target[s];
        }
        m[(row, col)] = Complex64::from(1.0);
    }
    m
}

fn permutations_with_signs(n: usize) -> Vec<(Vec<usize>, f64)> {
    // explicit enumeration; n <= 3 in this library
    let mut out = Vec::new();
    let mut idx: Vec<usize> = (0..n).collect();
    fn heap(k: usize, idx: &mut Vec<usize>, sign: &mut f64, out: &mut Vec<(Vec<usize>, f64)>) {
        if k == 1 {
            out.push((idx.clone(), *sign));
            return;
        }
        for i in 0..k {
            heap(k - 1, idx, sign, out);
            if k.is_multiple_of(2) {
                idx.swap(i, k - 1);
            } else {
                idx.swap(0, k - 1);
            }
            *sign = -*sign;
        }
    }
    let mut sign = 1.0;
    heap(n, &mut idx, &mut sign, &mut out);
    out
}

/// Total (anti)symmetrizer on `(C^d)^(x n)`.
pub fn symmetrizer(d: usize, n: usize, stats: Statistics) -> Result<CMatrix> {
    if n == 0 || n > 3 {
        return Err(Error::Unsupported(format!(
            "symmetrization implemented for 1..=3 particles, got {n}"
        )));
    }
    let dim = d.pow(n as u32);
    let mut p = CMatrix::zeros(dim, dim);
    for (perm, sign) in permutations_with_signs(n) {
        let factor = match stats {
            Statistics::Boson => 1.0,
            Statistics::Fermion => sign,
        };
        p += permutation_operator(d, &perm).scale(factor);
    }
    Ok(p.scale(1.0 / (1..=n).product::<usize>() as f64))
}

/// Composition `J(T, T') = P (T (x) T') P / tr[...]` of two states of
/// identical particles, with `P` the total (anti)symmetrizer.
///
/// `n1` and `n2` are the particle counts in `t` and `t_prime` (single
/// particle dimension `d` each); `n1 + n2 <= 3`. The result lives on the
/// full product space, supported on the (anti)symmetric subspace.
pub fn symmetrize_compose(
    t: &StateOperator,
    t_prime: &StateOperator,
    d: usize,
    n1: usize,
    n2: usize,
    stats: Statistics,
) -> Result<StateOperator> {
    if t.dim() != d.pow(n1 as u32) || t_prime.dim() != d.pow(n2 as u32) {
        return Err(Error::DimensionMismatch(
            "state dims do not match the declared particle structure".into(),
        ));
    }
    let n = n1 + n2;
    let p = symmetrizer(d, n, stats)?;
    let prod = kron(t.matrix(), t_prime.matrix());
    let projected = &p * prod * &p;
    let norm = trace(&projected).re;
    if norm < 1e-14 {
        return Err(Error::PauliExclusion(
            "projected composition has vanishing trace".into(),
        ));
    }
    StateOperator::new(projected.scale(1.0 / norm))
}
