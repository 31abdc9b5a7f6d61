//! Collapsing construction of multiclass TASEP and HAD invariant measures on
//! the torus, and the rate functionals of their empirical measures.

pub mod collapse;
pub mod dynamics;
pub mod envelope;
pub mod error;
pub mod instances;
pub mod lattice;
pub mod measure;
pub mod oracle;
pub mod rate;
pub mod rational;

pub use error::{Error, Result};
pub use lattice::{OrderedTuple, PointConfig, TorusConfig, TorusInterval};
pub use measure::TorusMeasure;
pub use rational::Q;
