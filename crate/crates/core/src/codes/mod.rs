//! Code designs: SCMA codebooks, MUSA spreading sequences and the
//! activity-aware sequence allocation.

mod allocation;
mod constellation;
mod factor_graph;
mod io;
mod musa;
mod scma;

pub use allocation::{
    allocate_sequences, collision_probability_mc, AllocationConfig, CollisionScheme,
    PoolCriterion, SequenceAllocation,
};
pub use constellation::{build_mother_constellation, MotherConstellation};
pub use factor_graph::{
    assign_phase_rotations, assign_phase_rotations_with_budget, build_factor_graph,
    phase_rotation, FactorGraph, RotatedFactorGraph, LATIN_NODE_BUDGET,
};
pub use io::{load_code_set, read_code_set, save_code_set, write_code_set, write_code_set_csv, CodeSetFile};
pub use musa::{
    correlation_within, enumerate_musa_space, random_musa_sequences, select_musa_sequences,
    select_musa_sequences_with, MusaSelection, MusaSequenceSet, MusaSpace, GaussianInt,
    MUSA_ALPHABET,
};
pub use scma::{build_scma_codebook, ScmaCodebook};

use crate::linalg::CMatrix;
use crate::scalar::Scalar;

/// Either kind of code design; the source of the sensing matrix.
#[derive(Debug, Clone)]
pub enum CodeSet {
    Scma(ScmaCodebook),
    Musa(MusaSequenceSet),
}

impl CodeSet {
    /// Number of resources (rows of the sensing matrix).
    pub fn resources(&self) -> usize {
        match self {
            CodeSet::Scma(c) => c.resources(),
            CodeSet::Musa(m) => m.code_length(),
        }
    }

    /// Number of devices (columns of the sensing matrix).
    pub fn devices(&self) -> usize {
        match self {
            CodeSet::Scma(c) => c.devices(),
            CodeSet::Musa(m) => m.len(),
        }
    }

    /// Per-device pilot signatures as the columns of a `K x N` matrix.
    ///
    /// An SCMA device transmits the codeword at constellation index
    /// `pilot_symbol`; a MUSA device transmits its normalised sequence.
    pub fn signatures<F: Scalar>(&self, pilot_symbol: usize) -> CMatrix<F> {
        let m = match self {
            CodeSet::Scma(c) => c.pilot_matrix(pilot_symbol),
            CodeSet::Musa(s) => s.columns().clone(),
        };
        m.map(F::lit)
    }
}
