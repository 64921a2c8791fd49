//! Shared fixtures for the operator benchmarks.

use mskinetic::kernel::{KernelSet, PairKernel};
use mskinetic::sphere::SphereQuadrature;
use mskinetic::{BoltzmannOperator, Field, LandauOperator, SpeciesSet, Statistics, VelocityGrid};

/// Two species (masses 1 and 2) on a d = 2 grid of half-width 6.
pub fn species() -> SpeciesSet {
    SpeciesSet::new(vec![1.0, 2.0], vec![Statistics::Maxwell, Statistics::Maxwell]).expect("valid species")
}

pub fn grid(n: usize) -> VelocityGrid {
    VelocityGrid::new(2, n, 6.0).expect("valid grid")
}

pub fn kernels() -> KernelSet {
    KernelSet::uniform(2, PairKernel::maxwell(1.0, 1.0 / (2.0 * std::f64::consts::PI)))
}

pub fn boltzmann(n: usize, k: usize) -> BoltzmannOperator {
    BoltzmannOperator::new(species(), kernels(), grid(n), SphereQuadrature::new(2, k).expect("valid quadrature"))
        .expect("valid operator")
}

pub fn landau(n: usize) -> LandauOperator {
    LandauOperator::new(species(), kernels(), grid(n)).expect("valid operator")
}

/// Displaced Gaussians, one per species: a state far from equilibrium.
pub fn state(n: usize) -> Vec<Field> {
    let g = grid(n);
    [(1.0, 0.5), (-1.0, 1.0)]
        .iter()
        .map(|&(c, t)| {
            Field::from_fn(&g, |v| (-((v[0] - c).powi(2) + v[1] * v[1]) / (2.0 * t)).exp() / (2.0 * std::f64::consts::PI * t))
                .expect("valid field")
        })
        .collect()
}
