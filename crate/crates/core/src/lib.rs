//! Structure-preserving discretizations of multi-species Boltzmann and Landau
//! collision operators with Bose, Fermi and Maxwell statistics.

pub mod boltzmann;
pub mod error;
pub mod fisher;
pub mod generic;
pub mod grazing;
pub mod grid;
pub mod kernel;
pub mod landau;
pub mod operator;
pub mod reference;
pub mod species;
pub mod solver;
pub mod sphere;

pub use error::{KineticError, Result};
pub use species::{SpeciesSet, Statistics};
pub use grid::{Field, VelocityGrid};
pub use boltzmann::{BoltzmannOperator, CollisionResult};
pub use landau::LandauOperator;
pub use operator::{Flavor, Operator};
