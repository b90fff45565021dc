//! Symmetry folding presolve for linear and mixed-integer programs.
//!
//! The pipeline converts a problem to equality form, computes a signed
//! coarsest equitable partition, folds the problem along it and keeps enough
//! information to map solutions of the folded problem back.

pub mod cli;
pub mod io;
pub mod lpexact;
pub mod milpfold;
pub mod model;
pub mod netmat;
pub mod refine;
