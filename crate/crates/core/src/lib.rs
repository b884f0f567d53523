//! Simulation of single-qubit gate errors, their suppression by composite
//! pulse sequences (B2 and the palindromic PD6), and randomized
//! benchmarking of the resulting Clifford gates.
//!
//! The modules build on each other:
//!
//! * [`su2`]: 2×2 unitaries, closed-form Pauli exponentials, fidelity;
//! * [`pulses`]: target rotations and their compensated expansions;
//! * [`noise`]: imperfect propagators, closed form and Magnus;
//! * [`clifford`]: the 24 Clifford gates as physical pulses;
//! * [`rb`]: randomized-benchmarking experiments and sweeps;
//! * [`fit`]: the two-pass decay fit.

pub mod clifford;
pub mod error;
pub mod fit;
pub mod noise;
pub mod pulses;
pub mod rb;
pub mod rng;
pub mod su2;

pub use clifford::{clifford_table, CliffordGate, CliffordTable, Target};
pub use error::{Error, Result};
pub use fit::{aggregate, fit_decay, DecayFit, LengthAggregate, SpamInit};
pub use noise::{NoiseDraw, NoiseModel};
pub use pulses::{expand, CompensationScheme, Pulse, PulseKind, PulseSequence, SchemeKind};
pub use rb::{epsilon_sweep, run_experiment, MeasurementMode, RBExperiment, SequenceRecord};
pub use su2::{fidelity, pauli_axis_unitary, BlochState, Unitary2};
