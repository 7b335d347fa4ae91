//! Simulator for one-step multiplexed transfer and exchange of multipartite
//! quantum states between two N-qubit registers coupled through a single
//! two-level coupler.
//!
//! The library models N bosonic mode pairs dispersively coupled to one
//! two-level system, builds the interaction-picture and effective Hamiltonians
//! from device parameters, integrates closed (Schrödinger) and open (Lindblad)
//! dynamics, and scores protocol runs against the phase-corrected ideal swap
//! target. All frequencies and couplings are angular (rad/s) internally;
//! configuration files take ω/2π values in GHz/MHz and lifetimes in μs.
//!
//! See the `examples/` directory for runnable entry points covering each
//! capability, and the `sim` binary for the batch CLI.

pub mod error;
pub mod hilbert;

pub use error::{Result, SimError};
pub use hilbert::{
    expectation, make_space, mode_annihilator, mode_creator, mode_number,
    coupler_sigma, coupler_sigma_plus, coupler_sigma_z, total_excitation_operator,
    ModeAddress, Operator, QuantumState, SpaceDescriptor,
};
