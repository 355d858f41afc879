//! Martingale measures, super-hedge prices and optional decompositions for
//! discrete-time asset evolutions with finitely many shock values.
//!
//! Sums over paths, selections and search grids run on rayon when the
//! `parallel` feature is enabled (the default). Every reduction uses fixed
//! chunk boundaries, so results are bit-identical with and without it.

pub mod decomposition;
pub mod error;
pub mod estimation;
pub mod measures;
pub mod model;
pub mod oracle;
pub mod par;
pub mod pricing;
pub mod report;
pub mod tree;

pub use error::{Error, Result};
pub use model::{EvolutionModel, PathIndex, ShockAtom, StepSpec, VolatilitySpec};
pub use pricing::{PathFunctional, Payoff};
