//! Concrete objectives: quadratics and regularized logistic regression.

mod logistic;
mod quadratic;
mod reference;

pub use logistic::{
    load_libsvm, parse_libsvm, synth_logistic, to_libsvm_string, LabelPolicy, LogisticProblem,
    Sample,
};
pub use quadratic::QuadraticProblem;
pub use reference::{
    reference_solve, reference_solve_with_budget, DEFAULT_REFERENCE_BUDGET, DEFAULT_REFERENCE_TOL,
};
