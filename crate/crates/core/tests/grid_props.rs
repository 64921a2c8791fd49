use mskinetic::grid::{grad_v_values, interpolate, interpolate_clamped};
use mskinetic::{Field, KineticError, Statistics, VelocityGrid};
use proptest::prelude::*;

fn nonneg_field(dim: usize, n: usize) -> impl Strategy<Value = (VelocityGrid, Vec<f64>)> {
    let grid = VelocityGrid::new(dim, n, 3.0).unwrap();
    let len = grid.len();
    prop::collection::vec(0.0..1.0f64, len).prop_map(move |v| (grid.clone(), v))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn interpolation_overshoot_is_bounded(
        (grid, values) in nonneg_field(2, 6),
        p in prop::collection::vec(-3.0..3.0f64, 2),
    ) {
        let f = Field::new(&grid, values).unwrap();
        let max = f.max();
        let slack = 0.5 * (1.25f64.powi(2) - 1.0) * max;
        let y = interpolate(&f, &p);
        prop_assert!(y >= -slack - 1e-14 && y <= max + slack + 1e-14, "{} {}", y, max);
        prop_assert!(interpolate_clamped(&f, &p) >= 0.0);
    }

    #[test]
    fn interpolation_overshoot_is_bounded_in_3d(
        (grid, values) in nonneg_field(3, 4),
        p in prop::collection::vec(-3.0..3.0f64, 3),
    ) {
        let f = Field::new(&grid, values).unwrap();
        let max = f.max();
        let slack = 0.5 * (1.25f64.powi(3) - 1.0) * max;
        let y = interpolate(&f, &p);
        prop_assert!(y >= -slack - 1e-14 && y <= max + slack + 1e-14);
    }

    #[test]
    fn gradient_of_affine_fields_is_exact(
        c in -2.0..2.0f64,
        a in prop::collection::vec(-2.0..2.0f64, 2),
        n in prop::sample::select(vec![4usize, 6, 8, 10]),
    ) {
        let grid = VelocityGrid::new(2, n, 2.5).unwrap();
        let vals = grid.sample(|v| c + a[0] * v[0] + a[1] * v[1]);
        let g = grad_v_values(&grid, &vals);
        for axis in 0..2 {
            for x in &g[axis] {
                prop_assert!((x - a[axis]).abs() < 1e-11);
            }
        }
    }

    #[test]
    fn fermi_occupancy_above_one_is_rejected(node in 0usize..16, excess in 1e-9..1.0f64) {
        let grid = VelocityGrid::new(2, 4, 1.0).unwrap();
        let mut vals = vec![0.5; grid.len()];
        vals[node] = 1.0 + excess;
        let err = Field::for_species(&grid, vals.clone(), Statistics::Fermi, 3).unwrap_err();
        let rejected_at_node = matches!(err, KineticError::FermiOverflow { species: 3, node: k, .. } if k == node);
        prop_assert!(rejected_at_node);
        prop_assert!(Field::for_species(&grid, vals, Statistics::Bose, 3).is_ok());
    }
}

#[test]
fn negative_and_nonfinite_values_are_rejected() {
    let grid = VelocityGrid::new(2, 4, 1.0).unwrap();
    for bad in [-1e-12, f64::NAN, f64::INFINITY] {
        let mut vals = vec![0.1; grid.len()];
        vals[5] = bad;
        assert!(matches!(Field::new(&grid, vals), Err(KineticError::NonPositiveDensity(_))));
    }
    assert!(matches!(VelocityGrid::new(2, 5, 1.0), Err(KineticError::OddGrid(_))));
}
