//! Microscopic simulation: every injected atom carries a c-number Bloch
//! vector, the cavity mode is a single classical amplitude.
//!
//! Noise is not added by hand. It enters through the random injection times
//! (Poissonian pumping) and through a random initial dipole phase given to
//! every atom at entry, and reaches the field through the atoms' coherent
//! emission.

mod atoms;
mod ensemble;
mod lag;
mod schedule;
mod stepper;
mod trajectory;

pub use atoms::{macroscopic_observables, AtomRecord, Spin, Stage};
pub use ensemble::{run_ensemble, run_ensemble_with};
pub use lag::{noise_lag_structure, LagPeak, LagStructure};
pub use schedule::{schedule_injections, InjectionMode};
pub use stepper::{FieldState, Stepper};
pub use trajectory::{
    run_trajectory, CavityTuning, OperatingPoint, SimConfig, TrajectoryResult,
};
