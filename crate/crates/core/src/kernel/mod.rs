//! Finite filtered probability spaces and the operations on them.

mod ops;
mod process;
mod tree;

pub use ops::{indicator, stochastic_integral, Filtered, IntegrandConvention, MartingaleCheck};
pub use process::{Level, Process, RandomTime};
pub use tree::{Coord, Filtration, Partition, ScenarioTree};
