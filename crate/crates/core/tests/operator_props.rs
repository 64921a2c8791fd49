use mskinetic::boltzmann::max_moment;
use mskinetic::kernel::{Angular, KernelSet, PairKernel, Radial};
use mskinetic::reference::{boltzmann_direct, boltzmann_direct_weak, landau_direct, landau_direct_weak};
use mskinetic::sphere::SphereQuadrature;
use mskinetic::{BoltzmannOperator, Field, LandauOperator, SpeciesSet, Statistics, VelocityGrid};
use proptest::prelude::*;

#[derive(Debug, Clone)]
struct Case {
    masses: [f64; 2],
    stats: [Statistics; 2],
    blobs: [[f64; 4]; 2],
    phase: f64,
}

fn statistics() -> impl Strategy<Value = Statistics> {
    prop::sample::select(vec![Statistics::Maxwell, Statistics::Bose, Statistics::Fermi])
}

fn case() -> impl Strategy<Value = Case> {
    let blob = (-1.0..1.0f64, -1.0..1.0f64, 0.6..1.5f64, 0.05..0.4f64).prop_map(|(x, y, w, a)| [x, y, w, a]);
    (0.3..3.0f64, 0.3..3.0f64, statistics(), statistics(), blob.clone(), blob, 0.0..6.0f64).prop_map(
        |(m0, m1, s0, s1, b0, b1, phase)| Case {
            masses: [m0, m1],
            stats: [s0, s1],
            blobs: [b0, b1],
            phase,
        },
    )
}

fn fields(case: &Case, grid: &VelocityGrid, order: [usize; 2]) -> Vec<Field> {
    order
        .iter()
        .map(|&s| {
            let [x, y, w, a] = case.blobs[s];
            Field::from_fn(grid, |v| {
                let r2 = (v[0] - x).powi(2) + (v[1] - y).powi(2);
                a * (-r2 / (w * w)).exp() + 0.5 * a * (-(v[0] + x).powi(2) - v[1] * v[1]).exp()
            })
            .unwrap()
        })
        .collect()
}

fn species(case: &Case, order: [usize; 2]) -> SpeciesSet {
    SpeciesSet::new(order.iter().map(|&s| case.masses[s]).collect(), order.iter().map(|&s| case.stats[s]).collect())
        .unwrap()
}

fn kernels() -> KernelSet {
    let mut k = KernelSet::uniform(2, PairKernel::maxwell(1.0, 0.3));
    k.set_pair(0, 1, PairKernel::new(Radial::PowerLaw { c: 0.8, gamma: 0.5 }, Angular::CosPower { c: 0.4, p: 2.0 }));
    k
}

fn boltzmann(case: &Case, order: [usize; 2]) -> BoltzmannOperator {
    let grid = VelocityGrid::new(2, 8, 3.5).unwrap();
    BoltzmannOperator::new(species(case, order), kernels(), grid, SphereQuadrature::new(2, 8).unwrap()).unwrap()
}

fn landau(case: &Case, order: [usize; 2]) -> LandauOperator {
    let grid = VelocityGrid::new(2, 10, 3.5).unwrap();
    LandauOperator::new(species(case, order), kernels(), grid).unwrap()
}

fn test_fns(case: &Case, grid: &VelocityGrid) -> Vec<Vec<f64>> {
    (0..2)
        .map(|s| grid.sample(|v| (0.7 * v[0] - 0.4 * v[1] + case.phase + s as f64).sin() * (-0.05 * v[0] * v[0]).exp()))
        .collect()
}

fn pairing(grid: &VelocityGrid, a: &[Vec<f64>], b: &[Vec<f64>]) -> f64 {
    grid.cell_volume() * a.iter().zip(b).map(|(x, y)| x.iter().zip(y).map(|(p, q)| p * q).sum::<f64>()).sum::<f64>()
}

fn sup(values: &[Vec<f64>]) -> f64 {
    values.iter().flatten().fold(0.0f64, |a, x| a.max(x.abs()))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn boltzmann_invariants_dissipation_and_consistency(case in case()) {
        let op = boltzmann(&case, [0, 1]);
        let fs = fields(&case, op.grid(), [0, 1]);
        let masses = op.species().masses().to_vec();
        let mut res = op.q_total(&fs).unwrap();
        let scale = sup(&res.values).max(1e-300);
        prop_assert!(max_moment(&res.values, op.grid(), &masses).unwrap() <= 1e-12 * scale.max(1.0));
        let d = res.dissipation.unwrap();
        prop_assert!(d >= 0.0);
        prop_assert!((op.entropy_dissipation(&fs).unwrap() - d).abs() <= 1e-12 * d.max(1.0));

        let phi = test_fns(&case, op.grid());
        let strong = pairing(op.grid(), &phi, &res.values);
        let weak = op.weak_form(&fs, &phi).unwrap();
        prop_assert!((weak - strong).abs() <= 1e-8 * strong.abs().max(1.0));

        // direct sums agree with the scatter/gather implementation
        let direct = boltzmann_direct(&op, &fs).unwrap();
        let err = direct.values.iter().flatten().zip(res.values.iter().flatten()).fold(0.0f64, |a, (x, y)| a.max((x - y).abs()));
        prop_assert!(err <= 1e-12 * scale.max(1.0), "oracle gap {}", err);
        prop_assert!((direct.dissipation - d).abs() <= 1e-12 * d.max(1.0));
        prop_assert!((boltzmann_direct_weak(&op, &fs, &phi).unwrap() - weak).abs() <= 1e-12 * weak.abs().max(1.0));

        res.project(op.grid(), &masses).unwrap();
        prop_assert!(max_moment(&res.values, op.grid(), &masses).unwrap() <= 1e-12 * scale.max(1.0));
    }

    #[test]
    fn boltzmann_species_swap(case in case()) {
        let a = boltzmann(&case, [0, 1]);
        let b = boltzmann(&case, [1, 0]);
        let qa = a.q_total(&fields(&case, a.grid(), [0, 1])).unwrap();
        let qb = b.q_total(&fields(&case, b.grid(), [1, 0])).unwrap();
        let scale = sup(&qa.values).max(1.0);
        for s in 0..2 {
            for (x, y) in qa.values[s].iter().zip(&qb.values[1 - s]) {
                prop_assert!((x - y).abs() <= 1e-12 * scale);
            }
        }
    }

    #[test]
    fn boltzmann_mobility_is_symmetric_psd(case in case()) {
        let op = boltzmann(&case, [0, 1]);
        let fs = fields(&case, op.grid(), [0, 1]);
        let xi = test_fns(&case, op.grid());
        let eta: Vec<Vec<f64>> = (0..2).map(|s| op.grid().sample(|v| v[0] * v[1] + s as f64 * v[0] * v[0])).collect();
        let mx = op.mobility_apply(&fs, &xi).unwrap();
        let me = op.mobility_apply(&fs, &eta).unwrap();
        let (p, q) = (pairing(op.grid(), &eta, &mx), pairing(op.grid(), &xi, &me));
        prop_assert!((p - q).abs() <= 1e-10 * p.abs().max(1.0));
        prop_assert!(pairing(op.grid(), &xi, &mx) >= -1e-14);
    }

    #[test]
    fn landau_invariants_dissipation_and_consistency(case in case()) {
        let op = landau(&case, [0, 1]);
        let fs = fields(&case, op.grid(), [0, 1]);
        let masses = op.species().masses().to_vec();
        let res = op.q_total(&fs).unwrap();
        let scale = sup(&res.values).max(1e-300);
        prop_assert!(max_moment(&res.values, op.grid(), &masses).unwrap() <= 1e-12 * scale.max(1.0));
        let d = res.dissipation.unwrap();
        prop_assert!(d >= 0.0);

        let phi = test_fns(&case, op.grid());
        let strong = pairing(op.grid(), &phi, &res.values);
        let weak = op.weak_form(&fs, &phi).unwrap();
        prop_assert!((weak - strong).abs() <= 1e-8 * strong.abs().max(1.0));

        let direct = landau_direct(&op, &fs).unwrap();
        let err = direct.values.iter().flatten().zip(res.values.iter().flatten()).fold(0.0f64, |a, (x, y)| a.max((x - y).abs()));
        prop_assert!(err <= 1e-12 * scale.max(1.0), "oracle gap {}", err);
        prop_assert!((direct.dissipation - d).abs() <= 1e-12 * d.max(1.0));
        prop_assert!((landau_direct_weak(&op, &fs, &phi).unwrap() - weak).abs() <= 1e-12 * weak.abs().max(1.0));
    }

    #[test]
    fn landau_species_swap(case in case()) {
        let a = landau(&case, [0, 1]);
        let b = landau(&case, [1, 0]);
        let qa = a.q_total(&fields(&case, a.grid(), [0, 1])).unwrap();
        let qb = b.q_total(&fields(&case, b.grid(), [1, 0])).unwrap();
        let scale = sup(&qa.values).max(1.0);
        for s in 0..2 {
            for (x, y) in qa.values[s].iter().zip(&qb.values[1 - s]) {
                prop_assert!((x - y).abs() <= 1e-12 * scale);
            }
        }
    }
}
