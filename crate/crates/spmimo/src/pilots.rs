//! Random pilot allocation and the pilot sequence family.
//!
//! Sequences are rows of the τ×τ DFT matrix: unit-modulus entries (so SP
//! transmission does not raise the peak-to-average ratio) and exactly
//! orthogonal, with O(τ log τ) despreading against all rows at once. Each
//! BS assigns K distinct row indices to its UEs, drawn uniformly at random
//! and refreshed every coherence block.

use num_complex::Complex64;
use rand::Rng;

/// Per-coherence-block pilot assignment.
#[derive(Debug, Clone)]
pub struct PilotBook {
    /// `assignment[cell][user]` = pilot row index in `[0, tau)`
    pub assignment: Vec<Vec<usize>>,
    /// sequence length: τ_p with RP, τ_c with SP
    pub tau: usize,
}

impl PilotBook {
    /// Uniform random allocation: every cell draws K distinct indices,
    /// independently of other cells.
    pub fn sample<R: Rng + ?Sized>(n_cells: usize, k: usize, tau: usize, rng: &mut R) -> Self {
        assert!(k <= tau, "cannot assign {k} distinct pilots out of {tau}");
        let assignment = (0..n_cells)
            .map(|_| rand::seq::index::sample(rng, tau, k).into_vec())
            .collect();
        PilotBook { assignment, tau }
    }

    /// Collision indicator χ_{l'i} against the typical UE's pilot.
    pub fn chi(&self, typical: (usize, usize)) -> Vec<Vec<bool>> {
        let t0 = self.assignment[typical.0][typical.1];
        self.assignment
            .iter()
            .map(|cell| cell.iter().map(|&t| t == t0).collect())
            .collect()
    }

    pub fn n_cells(&self) -> usize {
        self.assignment.len()
    }
}

/// Pilot symbol `[φ_t]_j = exp(2πi·t·j/τ)`.
#[inline]
pub fn pilot_symbol(t: usize, j: usize, tau: usize) -> Complex64 {
    let phase = std::f64::consts::TAU * (t as f64) * (j as f64) / (tau as f64);
    Complex64::from_polar(1.0, phase)
}
