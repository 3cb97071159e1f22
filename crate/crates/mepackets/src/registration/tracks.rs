//! Layered-detector particle tracks, reduced to one transverse dimension.
//!
//! Each layer is a fixed-signal array of position cells of width `d`. A
//! registration samples one cell by its Born weight, the released state is
//! the wave function truncated to that cell, and free propagation carries
//! it to the next layer. Repeating over layers yields a cell-index track
//! per individual run.

use crate::grid::PositionGrid;
use crate::{Error, Result};
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

/// Geometry and dynamics of the layered detector.
#[derive(Debug, Clone)]
pub struct TrackConfig {
    pub n_layers: usize,
    /// Transverse cell width `d`.
    pub cell_width: f64,
    /// Number of instrumented cells per layer, centered on the axis.
    pub n_cells: usize,
    pub mass: f64,
    pub hbar: f64,
    /// Free flight time between consecutive layers (layer spacing over
    /// longitudinal velocity).
    pub drift_time: f64,
    /// Largest tolerated probability outside the instrumented window.
    pub escape_tol: f64,
}

impl TrackConfig {
    pub fn validate(&self, grid: &PositionGrid) -> Result<()> {
        if self.n_layers == 0 || self.n_cells == 0 {
            return Err(Error::Validation("need layers and cells".into()));
        }
        if !(self.cell_width > 0.0 && self.mass > 0.0 && self.hbar > 0.0) {
            return Err(Error::Validation(
                "cell width, mass and hbar must be positive".into(),
            ));
        }
        let window = self.n_cells as f64 * self.cell_width;
        if window / 2.0 > grid.l_box {
            return Err(Error::Validation(
                "instrumented window exceeds the grid box".into(),
            ));
        }
        Ok(())
    }

    /// Left edge of cell 0.
    fn window_left(&self) -> f64 {
        -(self.n_cells as f64) * self.cell_width / 2.0
    }
}

/// Born weights of the instrumented cells plus the escaped probability.
fn cell_weights(grid: &PositionGrid, cfg: &TrackConfig, psi: &[Complex64]) -> (Vec<f64>, f64) {
    let mut weights = vec![0.0; cfg.n_cells];
    let mut inside = 0.0;
    let left = cfg.window_left();
    for (&x, z) in grid.points().iter().zip(psi) {
        let w = z.norm_sqr() * grid.spacing;
        let j = ((x - left) / cfg.cell_width).floor();
        if j >= 0.0 && (j as usize) < cfg.n_cells {
            weights[j as usize] += w;
            inside += w;
        }
    }
    (weights, 1.0 - inside)
}

/// Collapse to the chosen cell: truncate the wave function to the cell
/// support and renormalize.
fn collapse_to_cell(
    grid: &PositionGrid,
    cfg: &TrackConfig,
    psi: &mut [Complex64],
    cell: usize,
) -> Result<()> {
    let left = cfg.window_left() + cell as f64 * cfg.cell_width;
    let right = left + cfg.cell_width;
    for (&x, z) in grid.points().iter().zip(psi.iter_mut()) {
        if !(left..right).contains(&x) {
            *z = Complex64::default();
        }
    }
    grid.normalize(psi)
}

fn run_one_track(
    grid: &PositionGrid,
    cfg: &TrackConfig,
    initial: &[Complex64],
    rng: &mut ChaCha8Rng,
) -> Result<Vec<i64>> {
    let mut psi = initial.to_vec();
    let mut track = Vec::with_capacity(cfg.n_layers);
    for _ in 0..cfg.n_layers {
        let (weights, escaped) = cell_weights(grid, cfg, &psi);
        if escaped > cfg.escape_tol {
            return Err(Error::Validation(format!(
                "wave packet escapes the instrumented window ({escaped:.3e})"
            )));
        }
        let total: f64 = weights.iter().sum();
        let mut u: f64 = rng.gen::<f64>() * total;
        let mut chosen = cfg.n_cells - 1;
        for (j, w) in weights.iter().enumerate() {
            if u < *w {
                chosen = j;
                break;
            }
            u -= w;
        }
        track.push(chosen as i64);
        collapse_to_cell(grid, cfg, &mut psi, chosen)?;
        grid.propagate_free(&mut psi, cfg.drift_time, cfg.mass, cfg.hbar);
    }
    Ok(track)
}

/// Simulate `n_tracks` independent multi-layer registrations of the same
/// initial transverse state; each track is the list of fired cell indices
/// per layer. Deterministic per seed, tracks on independent substreams.
pub fn simulate_tracks(
    grid: &PositionGrid,
    cfg: &TrackConfig,
    initial: &[Complex64],
    n_tracks: usize,
    seed: u64,
) -> Result<Vec<Vec<i64>>> {
    cfg.validate(grid)?;
    if initial.len() != grid.n {
        return Err(Error::DimensionMismatch(
            "initial state does not match the grid".into(),
        ));
    }
    let mut normalized = initial.to_vec();
    grid.normalize(&mut normalized)?;
    (0..n_tracks)
        .into_par_iter()
        .map(|i| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(i as u64);
            run_one_track(grid, cfg, &normalized, &mut rng)
        })
        .collect()
}

/// Fraction of tracks whose worst deviation from their first-layer cell
/// stays within `max_dev` cells.
pub fn straightness_fraction(tracks: &[Vec<i64>], max_dev: i64) -> f64 {
    if tracks.is_empty() {
        return 0.0;
    }
    let straight = tracks
        .iter()
        .filter(|t| t.iter().all(|&c| (c - t[0]).abs() <= max_dev))
        .count();
    straight as f64 / tracks.len() as f64
}
