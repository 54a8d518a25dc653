//! Coulomb-Sturmian separable-expansion solver for bound states and
//! resonances of the Schrödinger, Klein-Gordon and squared Dirac radial
//! equations with a Coulomb-plus-short-range potential.

pub mod csbasis;
pub mod effective;
pub mod greens;
pub mod oracle;
pub mod solver;
pub mod specfun;

pub use csbasis::{BasisParams, PotentialTerm, RadialPotential, TermList};
pub use effective::{CouplingForm, EquationKind};
pub use greens::PhysicalConstants;
pub use oracle::{OracleLevel, ShootingProblem};
pub use solver::{
    convergence_study, BoundSearch, ConvergenceTable, DeterminantEvaluator, Problem, ResonanceSearch, RootKind,
    RootResult, SearchReport, SheetMode, SolverError,
};
