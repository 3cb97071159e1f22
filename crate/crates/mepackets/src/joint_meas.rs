//! Ancilla-based joint measurement of position and momentum.
//!
//! An ancilla particle is prepared in a packet centered at the origin; the
//! commuting pair `q - Q_A` and `p + P_A` of the composite is registered
//! over a grid of rectangular outcome cells. For small cells the effective
//! object-side effect of cell `(k, l)` is the shifted-and-boosted ancilla
//! state scaled by `S_kl / (2 pi hbar)`, which is what this module
//! implements; the exact pre-approximation cell integral is kept alongside
//! as the oracle.

use crate::grid::{gaussian_packet, PositionGrid};
use crate::me_quantum::QuantumMEPacket;
use crate::{Error, Result};
use num_complex::Complex64;
use std::f64::consts::PI;

/// Rectangular outcome cells over the `(a, b)` plane.
#[derive(Debug, Clone)]
pub struct CellGrid {
    pub a_edges: Vec<f64>,
    pub b_edges: Vec<f64>,
}

impl CellGrid {
    pub fn new(a_edges: Vec<f64>, b_edges: Vec<f64>) -> Result<Self> {
        for edges in [&a_edges, &b_edges] {
            if edges.len() < 2 {
                return Err(Error::Validation("need at least one cell".into()));
            }
            if edges.windows(2).any(|w| w[1] <= w[0]) {
                return Err(Error::Validation("cell edges must increase".into()));
            }
        }
        Ok(Self { a_edges, b_edges })
    }

    /// Uniform `na x nb` grid covering `[-a_half, a_half] x [-b_half, b_half]`.
    pub fn uniform(a_half: f64, b_half: f64, na: usize, nb: usize) -> Result<Self> {
        if na == 0 || nb == 0 || !(a_half > 0.0) || !(b_half > 0.0) {
            return Err(Error::Validation("empty cell grid".into()));
        }
        let edges = |half: f64, n: usize| {
            (0..=n)
                .map(|i| -half + 2.0 * half * i as f64 / n as f64)
                .collect::<Vec<_>>()
        };
        Self::new(edges(a_half, na), edges(b_half, nb))
    }

    pub fn n_a(&self) -> usize {
        self.a_edges.len() - 1
    }

    pub fn n_b(&self) -> usize {
        self.b_edges.len() - 1
    }

    pub fn a_center(&self, k: usize) -> f64 {
        0.5 * (self.a_edges[k] + self.a_edges[k + 1])
    }

    pub fn b_center(&self, l: usize) -> f64 {
        0.5 * (self.b_edges[l] + self.b_edges[l + 1])
    }

    pub fn area(&self, k: usize, l: usize) -> f64 {
        (self.a_edges[k + 1] - self.a_edges[k]) * (self.b_edges[l + 1] - self.b_edges[l])
    }

    /// Split every cell in two along both axes.
    pub fn refined(&self) -> CellGrid {
        let refine = |edges: &[f64]| {
            let mut out = Vec::with_capacity(edges.len() * 2 - 1);
            for w in edges.windows(2) {
                out.push(w[0]);
                out.push(0.5 * (w[0] + w[1]));
            }
            out.push(*edges.last().unwrap());
            out
        };
        CellGrid {
            a_edges: refine(&self.a_edges),
            b_edges: refine(&self.b_edges),
        }
    }
}

/// The ancilla preparation: a minimum-uncertainty Gaussian or a centered
/// ME packet.
#[derive(Debug, Clone)]
pub struct AncillaSpec {
    pub kind: AncillaKind,
    pub hbar: f64,
}

#[derive(Debug, Clone)]
pub enum AncillaKind {
    /// `psi_sigma = (pi sigma^2)^(-1/4) exp(-Q^2 / 2 sigma^2)`.
    Gaussian { sigma: f64 },
    /// Centered quantum ME packet with the given widths.
    MEPacket { dq: f64, dp: f64 },
}

impl AncillaSpec {
    pub fn gaussian(sigma: f64, hbar: f64) -> Result<Self> {
        if !(sigma > 0.0) || !(hbar > 0.0) {
            return Err(Error::Validation("sigma and hbar must be positive".into()));
        }
        Ok(Self {
            kind: AncillaKind::Gaussian { sigma },
            hbar,
        })
    }

    pub fn me_packet(dq: f64, dp: f64, hbar: f64) -> Result<Self> {
        // constructing the packet checks nu >= 1
        QuantumMEPacket::new(0.0, 0.0, dq, dp, hbar)?;
        Ok(Self {
            kind: AncillaKind::MEPacket { dq, dp },
            hbar,
        })
    }

    /// Position and momentum half-widths `(dQ_A, dP_A)` of the ancilla.
    pub fn widths(&self) -> (f64, f64) {
        match self.kind {
            AncillaKind::Gaussian { sigma } => {
                (sigma / 2.0_f64.sqrt(), self.hbar / (sigma * 2.0_f64.sqrt()))
            }
            AncillaKind::MEPacket { dq, dp } => (dq, dp),
        }
    }

    /// Weights of the ancilla's eigen-decomposition, truncated at
    /// `tail_tol` and renormalized. The Gaussian is one component; the
    /// ME packet is its geometric mixture.
    pub fn component_weights(&self, tail_tol: f64) -> Result<Vec<f64>> {
        match self.kind {
            AncillaKind::Gaussian { .. } => Ok(vec![1.0]),
            AncillaKind::MEPacket { dq, dp } => {
                let pkt = QuantumMEPacket::new(0.0, 0.0, dq, dp, self.hbar)?;
                let m_levels = crate::me_quantum::required_levels(pkt.nu(), tail_tol)?;
                let kept: f64 = (0..m_levels).map(|m| pkt.eigenvalue(m)).sum();
                Ok((0..m_levels).map(|m| pkt.eigenvalue(m) / kept).collect())
            }
        }
    }

    /// Real component envelopes evaluated at an arbitrary point; returns
    /// one value per component, first `n_components` of them.
    ///
    /// Evaluating analytically (a Gaussian, or the oscillator
    /// eigenfunction recurrence) keeps shifted overlaps free of any
    /// sampling-lattice rounding.
    pub fn envelopes_at(&self, n_components: usize, x: f64) -> Vec<f64> {
        match self.kind {
            AncillaKind::Gaussian { sigma } => {
                let norm = (PI * sigma * sigma).powf(-0.25);
                vec![norm * (-x * x / (2.0 * sigma * sigma)).exp()]
            }
            AncillaKind::MEPacket { dq, dp } => {
                let ell = (self.hbar * dq / dp).sqrt();
                let u = x / ell;
                let norm0 = (PI * ell * ell).powf(-0.25);
                let mut out = Vec::with_capacity(n_components);
                for m in 0..n_components {
                    let v = if m == 0 {
                        norm0 * (-u * u / 2.0).exp()
                    } else if m == 1 {
                        2.0_f64.sqrt() * u * out[0]
                    } else {
                        (2.0 / m as f64).sqrt() * u * out[m - 1]
                            - ((m - 1) as f64 / m as f64).sqrt() * out[m - 2]
                    };
                    out.push(v);
                }
                out
            }
        }
    }

    /// The ancilla state as weighted wavefunctions sampled on the grid.
    pub fn components(
        &self,
        grid: &PositionGrid,
        tail_tol: f64,
    ) -> Result<Vec<(f64, Vec<Complex64>)>> {
        shift_boost_ancilla(grid, self, 0.0, 0.0, tail_tol)
    }
}

/// The ancilla shifted by `a` and boosted by `-b`, component by component:
/// `phi_m[a,b](x) = phi_m(x - a) exp(-i b x / hbar)`, each with its mixture
/// weight. Errors when the shifted state leaks out of the grid box.
pub fn shift_boost_ancilla(
    grid: &PositionGrid,
    anc: &AncillaSpec,
    a: f64,
    b: f64,
    tail_tol: f64,
) -> Result<Vec<(f64, Vec<Complex64>)>> {
    if a.abs() >= grid.l_box {
        return Err(Error::Validation(format!(
            "shift {a} exceeds the grid box {}",
            grid.l_box
        )));
    }
    let weights = anc.component_weights(tail_tol)?;
    let n_comp = weights.len();
    let mut comps: Vec<(f64, Vec<Complex64>)> = weights
        .iter()
        .map(|&w| (w, Vec::with_capacity(grid.n)))
        .collect();
    for &x in grid.points() {
        let phase = Complex64::from_polar(1.0, -b * x / anc.hbar);
        for (m, v) in anc.envelopes_at(n_comp, x - a).into_iter().enumerate() {
            comps[m].1.push(phase * v);
        }
    }
    let mut lost: f64 = 0.0;
    for (w, psi) in &comps {
        lost = lost.max(*w * (1.0 - grid.norm_sqr(psi)));
    }
    if lost > 1e-8 {
        return Err(Error::Validation(format!(
            "shifted ancilla loses {lost:.3e} of its weighted mass outside the box"
        )));
    }
    Ok(comps)
}

/// An object state sampled on the grid: a weighted mixture of
/// wavefunctions (a single entry for a pure state).
#[derive(Debug, Clone)]
pub struct ObjectOnGrid {
    pub components: Vec<(f64, Vec<Complex64>)>,
}

impl ObjectOnGrid {
    pub fn pure(grid: &PositionGrid, mut psi: Vec<Complex64>) -> Result<Self> {
        grid.normalize(&mut psi)?;
        Ok(Self {
            components: vec![(1.0, psi)],
        })
    }

    /// Gaussian object packet at `(q0, p0)` with position width
    /// `dQ = s / sqrt(2)`.
    pub fn gaussian(grid: &PositionGrid, q0: f64, p0: f64, s: f64, hbar: f64) -> Result<Self> {
        Self::pure(grid, grid.sample(gaussian_packet(q0, p0, s, hbar)))
    }

    pub fn position_moments(&self, grid: &PositionGrid) -> (f64, f64) {
        let mut m1 = 0.0;
        let mut m2 = 0.0;
        for (w, psi) in &self.components {
            let (mean, sd) = grid.position_moments(psi);
            m1 += w * mean;
            m2 += w * (sd * sd + mean * mean);
        }
        (m1, (m2 - m1 * m1).max(0.0).sqrt())
    }

    pub fn momentum_moments(&self, grid: &PositionGrid, hbar: f64) -> (f64, f64) {
        let mut m1 = 0.0;
        let mut m2 = 0.0;
        for (w, psi) in &self.components {
            let (mean, sd) = grid.momentum_moments(psi, hbar);
            m1 += w * mean;
            m2 += w * (sd * sd + mean * mean);
        }
        (m1, (m2 - m1 * m1).max(0.0).sqrt())
    }
}

/// The effective POVM: cell grid, ancilla decomposition, and the
/// smallness warning for cells that are not small against the ancilla
/// widths.
pub struct EffectivePovm {
    pub cells: CellGrid,
    pub hbar: f64,
    /// Set when some cell side exceeds the matching ancilla width, where
    /// the small-cell approximation degrades.
    pub cell_size_warning: bool,
    anc: AncillaSpec,
    anc_weights: Vec<f64>,
}

/// Build the effective POVM of the cell grid for the given ancilla.
pub fn effective_povm(
    _grid: &PositionGrid,
    cells: &CellGrid,
    anc: &AncillaSpec,
    tail_tol: f64,
) -> Result<EffectivePovm> {
    let (wq, wp) = anc.widths();
    let max_da = cells
        .a_edges
        .windows(2)
        .map(|w| w[1] - w[0])
        .fold(0.0, f64::max);
    let max_db = cells
        .b_edges
        .windows(2)
        .map(|w| w[1] - w[0])
        .fold(0.0, f64::max);
    Ok(EffectivePovm {
        cells: cells.clone(),
        hbar: anc.hbar,
        cell_size_warning: max_da > wq || max_db > wp,
        anc_weights: anc.component_weights(tail_tol)?,
        anc: anc.clone(),
    })
}

impl EffectivePovm {
    /// Husimi-type outcome density at `(a, b)`:
    /// `tr[T_S T_A[a, b]] / (2 pi hbar)`.
    ///
    /// The registered pair is `q - Q_A` and `p + P_A` with the ancilla
    /// centered at the origin, so the acceptance profile of outcome
    /// `(a, b)` peaks at object position `a` and object momentum `b`;
    /// the ancilla state carrying `<P> = -b` enters through its
    /// conjugate side of the overlap. The ancilla envelopes are evaluated
    /// analytically at the shifted points, so nothing is rounded to the
    /// sampling lattice.
    fn outcome_density(
        &self,
        grid: &PositionGrid,
        object: &ObjectOnGrid,
        a: f64,
        b: f64,
    ) -> Result<f64> {
        let n_comp = self.anc_weights.len();
        let mut overlaps =
            vec![vec![Complex64::default(); object.components.len()]; n_comp];
        for (i, &x) in grid.points().iter().enumerate() {
            // conj of the acceptor phi(x-a) e^{+ibx/hbar}
            let phase = Complex64::from_polar(1.0, -b * x / self.hbar);
            let envelopes = self.anc.envelopes_at(n_comp, x - a);
            for (m, env) in envelopes.into_iter().enumerate() {
                let acceptor_conj = phase * env;
                for (j, (_, psi)) in object.components.iter().enumerate() {
                    overlaps[m][j] += acceptor_conj * psi[i];
                }
            }
        }
        let mut total = 0.0;
        for (m, row) in overlaps.iter().enumerate() {
            for (j, ov) in row.iter().enumerate() {
                let ov = ov * Complex64::from(grid.spacing);
                total += self.anc_weights[m] * object.components[j].0 * ov.norm_sqr();
            }
        }
        Ok(total / (2.0 * PI * self.hbar))
    }

    /// Midpoint (small-cell) probability of cell `(k, l)`: the defining
    /// approximation `S_kl * density(a_k, b_l)`.
    pub fn probability(
        &self,
        grid: &PositionGrid,
        object: &ObjectOnGrid,
        k: usize,
        l: usize,
    ) -> Result<f64> {
        Ok(self.cells.area(k, l)
            * self.outcome_density(grid, object, self.cells.a_center(k), self.cells.b_center(l))?)
    }

    /// Exact pre-approximation probability: the cell integral of the
    /// outcome density by 4x4 Gauss-Legendre quadrature. This is the
    /// brute-force oracle for [`Self::probability`].
    pub fn exact_probability(
        &self,
        grid: &PositionGrid,
        object: &ObjectOnGrid,
        k: usize,
        l: usize,
    ) -> Result<f64> {
        const NODES: [f64; 4] = [
            -0.8611363115940526,
            -0.3399810435848563,
            0.3399810435848563,
            0.8611363115940526,
        ];
        const WEIGHTS: [f64; 4] = [
            0.3478548451374538,
            0.6521451548625461,
            0.6521451548625461,
            0.3478548451374538,
        ];
        let (a0, a1) = (self.cells.a_edges[k], self.cells.a_edges[k + 1]);
        let (b0, b1) = (self.cells.b_edges[l], self.cells.b_edges[l + 1]);
        let (ca, ra) = (0.5 * (a0 + a1), 0.5 * (a1 - a0));
        let (cb, rb) = (0.5 * (b0 + b1), 0.5 * (b1 - b0));
        let mut total = 0.0;
        for (na, wa) in NODES.iter().zip(WEIGHTS) {
            for (nb, wb) in NODES.iter().zip(WEIGHTS) {
                total += wa * wb * self.outcome_density(grid, object, ca + ra * na, cb + rb * nb)?;
            }
        }
        Ok(total * ra * rb)
    }
}

/// Outcome table and its summary statistics.
#[derive(Debug, Clone)]
pub struct OutcomeStatistics {
    /// `p[k][l]` over position-like outcome `k`, momentum-like `l`.
    pub p: Vec<Vec<f64>>,
    /// Total captured probability.
    pub coverage: f64,
    pub mean_a: f64,
    pub mean_b: f64,
    pub var_a: f64,
    pub var_b: f64,
    pub cell_size_warning: bool,
}

/// Evaluate the whole outcome table and its moments.
///
/// Errors when the grid captures less than `1 - 1e-3` of the outcome
/// probability.
pub fn outcome_statistics(
    grid: &PositionGrid,
    object: &ObjectOnGrid,
    cells: &CellGrid,
    anc: &AncillaSpec,
    tail_tol: f64,
) -> Result<OutcomeStatistics> {
    let povm = effective_povm(grid, cells, anc, tail_tol)?;
    let mut p = vec![vec![0.0; cells.n_b()]; cells.n_a()];
    let mut coverage = 0.0;
    for (k, row) in p.iter_mut().enumerate() {
        for (l, slot) in row.iter_mut().enumerate() {
            let v = povm.probability(grid, object, k, l)?;
            *slot = v;
            coverage += v;
        }
    }
    if 1.0 - coverage > 1e-3 {
        return Err(Error::Validation(format!(
            "outcome grid captures only {coverage:.6} of the probability"
        )));
    }
    let mut mean_a = 0.0;
    let mut mean_b = 0.0;
    let mut m2a = 0.0;
    let mut m2b = 0.0;
    for (k, row) in p.iter().enumerate() {
        let a = cells.a_center(k);
        for (l, &v) in row.iter().enumerate() {
            let b = cells.b_center(l);
            let w = v / coverage;
            mean_a += a * w;
            mean_b += b * w;
            m2a += a * a * w;
            m2b += b * b * w;
        }
    }
    Ok(OutcomeStatistics {
        p,
        coverage,
        mean_a,
        mean_b,
        var_a: (m2a - mean_a * mean_a).max(0.0),
        var_b: (m2b - mean_b * mean_b).max(0.0),
        cell_size_warning: povm.cell_size_warning,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    const HBAR: f64 = 1.0;

    fn grid() -> PositionGrid {
        PositionGrid::new(1024, 16.0).unwrap()
    }

    #[test]
    fn shifted_boosted_gaussian_has_the_advertised_moments() {
        let g = grid();
        let anc = AncillaSpec::gaussian(0.8, HBAR).unwrap();
        let (a, b) = (1.5, -0.9);
        let comps = shift_boost_ancilla(&g, &anc, a, b, 1e-12).unwrap();
        let (qm, qs) = g.position_moments(&comps[0].1);
        let (pm, ps) = g.momentum_moments(&comps[0].1, HBAR);
        // <Q> = a, <P> = -b, minimum uncertainty dQ dP = hbar/2
        assert_relative_eq!(qm, a, epsilon = 1e-8);
        assert_relative_eq!(pm, -b, epsilon = 1e-8);
        assert_relative_eq!(qs, 0.8 / 2.0_f64.sqrt(), epsilon = 1e-8);
        assert_relative_eq!(qs * ps, HBAR / 2.0, epsilon = 1e-8);
        // zero shift is the original
        let same = shift_boost_ancilla(&g, &anc, 0.0, 0.0, 1e-12).unwrap();
        let base = anc.components(&g, 1e-12).unwrap();
        assert!(same[0]
            .1
            .iter()
            .zip(&base[0].1)
            .all(|(x, y)| (x - y).norm() < 1e-15));
    }

    #[test]
    fn oversized_shift_is_rejected() {
        let g = grid();
        let anc = AncillaSpec::gaussian(0.8, HBAR).unwrap();
        assert!(shift_boost_ancilla(&g, &anc, 15.9, 0.0, 1e-12).is_err());
    }

    #[test]
    fn me_packet_ancilla_components_have_the_right_widths() {
        let g = grid();
        let anc = AncillaSpec::me_packet(0.9, 1.4, HBAR).unwrap();
        let comps = anc.components(&g, 1e-12).unwrap();
        let total: f64 = comps.iter().map(|(w, _)| w).sum();
        assert_relative_eq!(total, 1.0, epsilon = 1e-12);
        // mixture position variance dQ^2, momentum variance dP^2
        let mut vq = 0.0;
        let mut vp = 0.0;
        for (w, phi) in &comps {
            let (qm, qs) = g.position_moments(phi);
            let (pm, ps) = g.momentum_moments(phi, HBAR);
            vq += w * (qs * qs + qm * qm);
            vp += w * (ps * ps + pm * pm);
        }
        assert_relative_eq!(vq.sqrt(), 0.9, epsilon = 1e-6);
        assert_relative_eq!(vp.sqrt(), 1.4, epsilon = 1e-6);
    }

    #[test]
    fn probabilities_normalize_over_a_wide_grid() {
        let g = grid();
        let anc = AncillaSpec::gaussian(1.0, HBAR).unwrap();
        let object = ObjectOnGrid::gaussian(&g, 0.3, -0.5, 1.0, HBAR).unwrap();
        let (wq, wp) = anc.widths();
        let (oq, op_) = (1.0 / 2.0_f64.sqrt(), HBAR / 2.0_f64.sqrt());
        let a_half = 6.0 * (wq * wq + oq * oq).sqrt();
        let b_half = 6.0 * (wp * wp + op_ * op_).sqrt();
        let cells = CellGrid::uniform(a_half, b_half, 32, 32).unwrap();
        let stats = outcome_statistics(&g, &object, &cells, &anc, 1e-12).unwrap();
        assert!(stats.coverage >= 0.999, "coverage {}", stats.coverage);
        assert!(stats.coverage <= 1.0 + 1e-9);
        for row in &stats.p {
            for &p in row {
                assert!((0.0..=1.0).contains(&p), "probability {p} outside [0,1]");
            }
        }
    }

    #[test]
    fn outcome_moments_match_the_convolution_rule() {
        let g = grid();
        let sigma = 0.9;
        let anc = AncillaSpec::gaussian(sigma, HBAR).unwrap();
        let (q0, p0, s) = (0.7, -0.4, 1.1);
        let object = ObjectOnGrid::gaussian(&g, q0, p0, s, HBAR).unwrap();
        let (dq_s, dp_s) = (s / 2.0_f64.sqrt(), HBAR / (s * 2.0_f64.sqrt()));
        let a_half = 6.0 * (dq_s * dq_s + sigma * sigma / 2.0).sqrt();
        let b_half = 6.0 * (dp_s * dp_s + HBAR * HBAR / (2.0 * sigma * sigma)).sqrt();
        let cells = CellGrid::uniform(a_half, b_half, 48, 48).unwrap();
        let stats = outcome_statistics(&g, &object, &cells, &anc, 1e-12).unwrap();
        // means land within one cell of the object averages
        assert!((stats.mean_a - q0).abs() < 2.0 * a_half / 48.0);
        assert!((stats.mean_b - p0).abs() < 2.0 * b_half / 48.0);
        // variances add: object plus ancilla
        let va = dq_s * dq_s + sigma * sigma / 2.0;
        let vb = dp_s * dp_s + HBAR * HBAR / (2.0 * sigma * sigma);
        assert!(
            (stats.var_a - va).abs() / va < 0.02,
            "var_a {} vs {va}",
            stats.var_a
        );
        assert!(
            (stats.var_b - vb).abs() / vb < 0.02,
            "var_b {} vs {vb}",
            stats.var_b
        );
    }

    #[test]
    fn me_packet_ancilla_broadens_the_outcomes() {
        // wider box: high oscillator levels of the ancilla reach far once
        // shifted to the outer cells
        let g = PositionGrid::new(2048, 24.0).unwrap();
        let object = ObjectOnGrid::gaussian(&g, 0.0, 0.0, 1.0, HBAR).unwrap();
        let (dq_s, dp_s) = (1.0 / 2.0_f64.sqrt(), HBAR / 2.0_f64.sqrt());
        let (dq_a, dp_a) = (1.2, 1.0);
        let anc = AncillaSpec::me_packet(dq_a, dp_a, HBAR).unwrap();
        let a_half = 6.0 * (dq_s * dq_s + dq_a * dq_a).sqrt();
        let b_half = 6.0 * (dp_s * dp_s + dp_a * dp_a).sqrt();
        let cells = CellGrid::uniform(a_half, b_half, 48, 48).unwrap();
        let stats = outcome_statistics(&g, &object, &cells, &anc, 1e-10).unwrap();
        let va = dq_s * dq_s + dq_a * dq_a;
        let vb = dp_s * dp_s + dp_a * dp_a;
        assert!(
            (stats.var_a - va).abs() / va < 0.02,
            "var_a {} vs {va}",
            stats.var_a
        );
        assert!(
            (stats.var_b - vb).abs() / vb < 0.02,
            "var_b {} vs {vb}",
            stats.var_b
        );
    }

    #[test]
    fn midpoint_approximation_converges_under_refinement() {
        let g = grid();
        let anc = AncillaSpec::gaussian(1.0, HBAR).unwrap();
        let object = ObjectOnGrid::gaussian(&g, 0.2, 0.3, 1.0, HBAR).unwrap();
        let gap_at = |cells: &CellGrid| -> f64 {
            let fine = cells.refined();
            let povm_c = effective_povm(&g, cells, &anc, 1e-12).unwrap();
            let povm_f = effective_povm(&g, &fine, &anc, 1e-12).unwrap();
            let mut worst: f64 = 0.0;
            for k in 0..cells.n_a() {
                for l in 0..cells.n_b() {
                    let c = povm_c.probability(&g, &object, k, l).unwrap();
                    let mut refined_sum = 0.0;
                    for dk in 0..2 {
                        for dl in 0..2 {
                            refined_sum += povm_f
                                .probability(&g, &object, 2 * k + dk, 2 * l + dl)
                                .unwrap();
                        }
                    }
                    worst = worst.max((c - refined_sum).abs());
                }
            }
            worst
        };
        let coarse = CellGrid::uniform(4.0, 4.0, 8, 8).unwrap();
        let gap_coarse = gap_at(&coarse);
        let gap_fine = gap_at(&coarse.refined());
        // the midpoint rule is second order in the cell side: halving the
        // cells must cut the refinement gap by roughly four
        assert!(
            gap_fine < 0.35 * gap_coarse,
            "gaps {gap_coarse} -> {gap_fine} do not contract"
        );
    }

    #[test]
    fn exact_cell_integral_agrees_with_midpoint_for_small_cells() {
        let g = grid();
        let anc = AncillaSpec::gaussian(1.0, HBAR).unwrap();
        let object = ObjectOnGrid::gaussian(&g, 0.0, 0.0, 1.0, HBAR).unwrap();
        let cells = CellGrid::uniform(5.0, 5.0, 40, 40).unwrap();
        let povm = effective_povm(&g, &cells, &anc, 1e-12).unwrap();
        for k in 18..22 {
            for l in 18..22 {
                let mid = povm.probability(&g, &object, k, l).unwrap();
                let exact = povm.exact_probability(&g, &object, k, l).unwrap();
                // second-order midpoint error at quarter-width cells
                assert!(
                    (mid - exact).abs() < 1e-2 * exact.max(1e-8),
                    "cell ({k},{l}): mid {mid} vs exact {exact}"
                );
            }
        }
    }

    #[test]
    fn shifting_object_equals_shifting_the_grid() {
        let g = grid();
        let anc = AncillaSpec::gaussian(1.0, HBAR).unwrap();
        let cells = CellGrid::uniform(4.0, 4.0, 16, 16).unwrap();
        // a shift that sits exactly on the sampling lattice
        let da = 16.0 * g.spacing;
        let obj0 = ObjectOnGrid::gaussian(&g, 0.0, 0.0, 1.0, HBAR).unwrap();
        let obj1 = ObjectOnGrid::gaussian(&g, da, 0.0, 1.0, HBAR).unwrap();
        let povm = effective_povm(&g, &cells, &anc, 1e-12).unwrap();
        let shifted_cells = CellGrid::new(
            cells.a_edges.iter().map(|e| e + da).collect(),
            cells.b_edges.clone(),
        )
        .unwrap();
        let povm_shifted = effective_povm(&g, &shifted_cells, &anc, 1e-12).unwrap();
        for k in 0..16 {
            for l in 0..16 {
                let p_obj = povm_shifted.probability(&g, &obj1, k, l).unwrap();
                let p_grid = povm.probability(&g, &obj0, k, l).unwrap();
                assert_relative_eq!(p_obj, p_grid, epsilon = 1e-9, max_relative = 1e-7);
            }
        }
    }

    #[test]
    fn marginal_over_b_is_the_smeared_position_distribution() {
        let g = grid();
        let sigma = 0.8;
        let anc = AncillaSpec::gaussian(sigma, HBAR).unwrap();
        let (q0, s) = (0.4, 1.0);
        let object = ObjectOnGrid::gaussian(&g, q0, 0.0, s, HBAR).unwrap();
        let dq_s = s / 2.0_f64.sqrt();
        let dp_s = HBAR / (s * 2.0_f64.sqrt());
        let va = dq_s * dq_s + sigma * sigma / 2.0;
        let vb = dp_s * dp_s + HBAR * HBAR / (2.0 * sigma * sigma);
        let cells =
            CellGrid::uniform(7.0 * va.sqrt(), 7.0 * vb.sqrt(), 32, 32).unwrap();
        let stats = outcome_statistics(&g, &object, &cells, &anc, 1e-12).unwrap();
        // marginal over b vs the Gaussian convolution of the position
        // density with the ancilla's position density
        let mut worst: f64 = 0.0;
        for k in 0..32 {
            let marginal: f64 = stats.p[k].iter().sum();
            let (lo, hi) = (cells.a_edges[k], cells.a_edges[k + 1]);
            let z = |x: f64| (x - q0) / (2.0 * va).sqrt();
            let smeared = 0.5 * (erf(z(hi)) - erf(z(lo)));
            worst = worst.max((marginal - smeared).abs());
        }
        assert!(worst < 2e-3, "marginal deviates by {worst}");
    }

    // Abramowitz-Stegun 7.1.26 rational approximation, |error| < 1.5e-7
    fn erf(x: f64) -> f64 {
        let sign = x.signum();
        let x = x.abs();
        let t = 1.0 / (1.0 + 0.3275911 * x);
        let y = 1.0
            - (((((1.061405429 * t - 1.453152027) * t) + 1.421413741) * t - 0.284496736) * t
                + 0.254829592)
                * t
                * (-x * x).exp();
        sign * y
    }

    #[test]
    fn coverage_deficit_is_an_error() {
        let g = grid();
        let anc = AncillaSpec::gaussian(1.0, HBAR).unwrap();
        let object = ObjectOnGrid::gaussian(&g, 0.0, 0.0, 1.0, HBAR).unwrap();
        let tiny = CellGrid::uniform(0.5, 0.5, 4, 4).unwrap();
        assert!(outcome_statistics(&g, &object, &tiny, &anc, 1e-12).is_err());
    }

    #[test]
    fn big_cells_raise_the_smallness_warning() {
        let g = grid();
        let anc = AncillaSpec::gaussian(0.5, HBAR).unwrap();
        let coarse = CellGrid::uniform(6.0, 6.0, 4, 4).unwrap();
        let povm = effective_povm(&g, &coarse, &anc, 1e-12).unwrap();
        assert!(povm.cell_size_warning);
        let fine = CellGrid::uniform(6.0, 6.0, 128, 128).unwrap();
        let povm = effective_povm(&g, &fine, &anc, 1e-12).unwrap();
        assert!(!povm.cell_size_warning);
    }
}
