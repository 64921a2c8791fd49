//! Species parameters: masses and quantum statistics.

use crate::error::{precondition, KineticError, Result};

/// Occupancy statistics of a species; `alpha` is the coefficient in `tau(f) = 1 + alpha f`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Statistics {
    Bose,
    Maxwell,
    Fermi,
}

impl Statistics {
    pub fn alpha(self) -> f64 {
        match self {
            Statistics::Bose => 1.0,
            Statistics::Maxwell => 0.0,
            Statistics::Fermi => -1.0,
        }
    }

    pub fn from_alpha(alpha: i32) -> Result<Self> {
        match alpha {
            1 => Ok(Statistics::Bose),
            0 => Ok(Statistics::Maxwell),
            -1 => Ok(Statistics::Fermi),
            other => precondition(format!("statistics flag must be -1, 0 or +1, got {other}")),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Statistics::Bose => "bose",
            Statistics::Maxwell => "maxwell",
            Statistics::Fermi => "fermi",
        }
    }
}

impl std::str::FromStr for Statistics {
    type Err = KineticError;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "bose" | "+1" | "1" => Ok(Statistics::Bose),
            "maxwell" | "classical" | "0" => Ok(Statistics::Maxwell),
            "fermi" | "-1" => Ok(Statistics::Fermi),
            other => precondition(format!("unknown statistics `{other}`")),
        }
    }
}

/// Occupancy factor `tau(f) = 1 + alpha f`.
///
/// Fermi densities must lie in `[0, 1]`; anything above is an overflow.
pub fn tau(stats: Statistics, f: f64) -> Result<f64> {
    if f < 0.0 {
        return Err(KineticError::NonPositiveDensity(format!(
            "tau evaluated at negative density {f}"
        )));
    }
    if stats == Statistics::Fermi && f > 1.0 {
        return Err(KineticError::FermiOverflow {
            species: usize::MAX,
            node: usize::MAX,
            value: f,
        });
    }
    Ok(1.0 + stats.alpha() * f)
}

/// Entropy density `h(f) = f log f - alpha tau log tau` (`f log f - f` for Maxwell
/// statistics), with `0 log 0 = 0`. Densities outside the admissible range give `+inf`.
pub fn entropy_density(stats: Statistics, f: f64) -> f64 {
    let xlogx = |x: f64| if x == 0.0 { 0.0 } else { x * x.ln() };
    if f.is_nan() || f < 0.0 || (stats == Statistics::Fermi && f > 1.0) {
        return f64::INFINITY;
    }
    match stats {
        Statistics::Maxwell => xlogx(f) - f,
        _ => {
            let alpha = stats.alpha();
            xlogx(f) - alpha * xlogx(1.0 + alpha * f)
        }
    }
}

/// The set of interacting species.
#[derive(Debug, Clone, PartialEq)]
pub struct SpeciesSet {
    masses: Vec<f64>,
    statistics: Vec<Statistics>,
}

impl SpeciesSet {
    pub fn new(masses: Vec<f64>, statistics: Vec<Statistics>) -> Result<Self> {
        if masses.is_empty() {
            return precondition("at least one species is required");
        }
        if masses.len() != statistics.len() {
            return precondition("masses and statistics must have the same length");
        }
        if let Some(m) = masses.iter().find(|m| !(m.is_finite() && **m > 0.0)) {
            return precondition(format!("species masses must be positive, got {m}"));
        }
        Ok(Self { masses, statistics })
    }

    /// `count` identical classical species of unit mass.
    pub fn classical(count: usize) -> Self {
        Self::new(vec![1.0; count.max(1)], vec![Statistics::Maxwell; count.max(1)])
            .expect("unit masses are valid")
    }

    pub fn len(&self) -> usize {
        self.masses.len()
    }

    pub fn is_empty(&self) -> bool {
        self.masses.is_empty()
    }

    pub fn mass(&self, i: usize) -> f64 {
        self.masses[i]
    }

    pub fn masses(&self) -> &[f64] {
        &self.masses
    }

    pub fn statistics(&self, i: usize) -> Statistics {
        self.statistics[i]
    }

    pub fn alpha(&self, i: usize) -> f64 {
        self.statistics[i].alpha()
    }

    pub fn tau(&self, i: usize, f: f64) -> Result<f64> {
        tau(self.statistics[i], f).map_err(|e| match e {
            KineticError::FermiOverflow { value, .. } => KineticError::FermiOverflow {
                species: i,
                node: usize::MAX,
                value,
            },
            other => other,
        })
    }
}
