//! Default times on finite filtered spaces: Azéma supermartingales,
//! decomposition of a default time along shock times, construction of
//! default times from given dynamics, and risk premia of defaultable claims.

// processes are indexed by outcome across several parallel vectors
#![allow(clippy::needless_range_loop)]

pub mod check;
pub mod construct;
pub mod enlargement;
pub mod error;
pub mod fixtures;
pub mod kernel;
pub mod mc;
pub mod pricing;
pub mod scalar;
pub mod stopping;

pub use error::{Error, Node, Result};
pub use kernel::{
    indicator, stochastic_integral, Coord, Filtered, Filtration, IntegrandConvention, Level,
    MartingaleCheck, Partition, Process, RandomTime, ScenarioTree,
};
pub use scalar::{Rational, Scalar, Tolerances};
