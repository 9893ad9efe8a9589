//! Perturbed accelerated-gradient dynamics: the continuous ODE, its implicit,
//! symplectic and modified symplectic discretizations, Lyapunov certificates
//! for each, and an experiment harness.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod continuous;
pub mod error;
pub mod harness;
pub mod objective;
pub mod problems;
pub mod schemes;
pub mod spectral;
pub mod vector;

pub use error::{Error, Result};
pub use objective::{
    finite_difference_check, Capabilities, FiniteDifferenceReport, Objective, ObjectiveHandle,
    ProxOutcome, ProxSettings, ReferenceSolution,
};
pub use problems::{LabelPolicy, LogisticProblem, QuadraticProblem};
pub use schemes::{
    run_scheme, ConditionReport, DiscreteState, IterateTrace, SchemeConfig, SchemeKind,
    StopCriteria, Termination, TraceRow,
};
pub use vector::Vector;
