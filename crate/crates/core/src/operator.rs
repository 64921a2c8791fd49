//! One interface over the four collision-operator flavors.

use std::fmt;
use std::str::FromStr;

use crate::boltzmann::{BoltzmannOperator, CollisionResult};
use crate::error::{precondition, KineticError, Result};
use crate::grid::{entropy, Field, VelocityGrid};
use crate::landau::LandauOperator;
use crate::species::SpeciesSet;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Flavor {
    Boltzmann,
    Landau,
    BoltzmannLinear,
    LandauLinear,
}

impl Flavor {
    pub const ALL: [Flavor; 4] = [
        Flavor::Boltzmann,
        Flavor::Landau,
        Flavor::BoltzmannLinear,
        Flavor::LandauLinear,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Flavor::Boltzmann => "boltzmann",
            Flavor::Landau => "landau",
            Flavor::BoltzmannLinear => "boltzmann-linear",
            Flavor::LandauLinear => "landau-linear",
        }
    }

    pub fn is_linear(self) -> bool {
        matches!(self, Flavor::BoltzmannLinear | Flavor::LandauLinear)
    }

    pub fn is_landau(self) -> bool {
        matches!(self, Flavor::Landau | Flavor::LandauLinear)
    }
}

impl fmt::Display for Flavor {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Flavor {
    type Err = KineticError;

    fn from_str(s: &str) -> Result<Self> {
        Flavor::ALL
            .into_iter()
            .find(|f| f.name() == s)
            .ok_or_else(|| KineticError::Format(format!("unknown operator '{s}'")))
    }
}

/// A collision operator of a given flavor.
#[derive(Debug, Clone)]
pub enum Operator {
    Boltzmann { op: BoltzmannOperator, linear: bool },
    Landau { op: LandauOperator, linear: bool },
}

impl Operator {
    pub fn boltzmann(op: BoltzmannOperator, linear: bool) -> Self {
        Operator::Boltzmann { op, linear }
    }

    pub fn landau(op: LandauOperator, linear: bool) -> Self {
        Operator::Landau { op, linear }
    }

    pub fn flavor(&self) -> Flavor {
        match self {
            Operator::Boltzmann { linear: false, .. } => Flavor::Boltzmann,
            Operator::Boltzmann { linear: true, .. } => Flavor::BoltzmannLinear,
            Operator::Landau { linear: false, .. } => Flavor::Landau,
            Operator::Landau { linear: true, .. } => Flavor::LandauLinear,
        }
    }

    pub fn species(&self) -> &SpeciesSet {
        match self {
            Operator::Boltzmann { op, .. } => op.species(),
            Operator::Landau { op, .. } => op.species(),
        }
    }

    pub fn grid(&self) -> &VelocityGrid {
        match self {
            Operator::Boltzmann { op, .. } => op.grid(),
            Operator::Landau { op, .. } => op.grid(),
        }
    }

    /// Right-hand side with the operator-matched dissipation.
    pub fn evaluate(&self, fields: &[Field]) -> Result<CollisionResult> {
        match self {
            Operator::Boltzmann { op, linear: false } => op.q_total(fields),
            Operator::Boltzmann { op, linear: true } => op.q_linear(fields),
            Operator::Landau { op, linear: false } => op.q_total(fields),
            Operator::Landau { op, linear: true } => op.q_linear(fields),
        }
    }

    /// Mobility applied to `xi`: the right-hand side is `-M dH`.
    pub fn mobility(&self, fields: &[Field], xi: &[Vec<f64>]) -> Result<Vec<Vec<f64>>> {
        match self {
            Operator::Boltzmann { op, linear: false } => op.mobility_apply(fields, xi),
            Operator::Boltzmann { op, linear: true } => op.linear_mobility_apply(xi),
            Operator::Landau { op, linear: false } => op.mobility_apply(fields, xi),
            Operator::Landau { op, linear: true } => op.linear_mobility_apply(xi),
        }
    }

    /// Lyapunov functional of the flavor: `H` for the nonlinear operators and
    /// `1/2 h^d sum F^2` for the linearized ones.
    pub fn lyapunov(&self, fields: &[Field]) -> Result<f64> {
        if self.flavor().is_linear() {
            if fields.len() != self.species().len() {
                return precondition("one field per species is required");
            }
            let hd = self.grid().cell_volume();
            Ok(0.5 * hd * fields.iter().flat_map(|f| f.values()).map(|x| x * x).sum::<f64>())
        } else {
            entropy(self.species(), fields)
        }
    }

    /// Dissipation matching [`Operator::lyapunov`].
    pub fn dissipation(&self, fields: &[Field]) -> Result<f64> {
        match self {
            Operator::Boltzmann { op, linear: false } => op.entropy_dissipation(fields),
            Operator::Landau { op, linear: false } => op.entropy_dissipation(fields),
            _ => Ok(self.evaluate(fields)?.dissipation.unwrap_or(0.0)),
        }
    }
}
