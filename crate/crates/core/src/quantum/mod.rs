//! Dense state-vector and density-matrix simulation for up to seven qubits.

mod channel;
mod measurement;
mod pauli;
mod state;

pub use channel::{check_unitary, gates, Channel, ChannelKind};
pub use measurement::{group_outcome_distribution, sample_group_shot, sub_observable_sample, Outcome, OutcomeDistribution};
pub use pauli::{Pauli, PauliString};
pub use state::{exact_expectation, haar_random_state, DensityMatrix, QuantumState, StateVector};

pub const MAX_QUBITS: usize = 7;
