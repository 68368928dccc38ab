//! Randomized property tests for the library primitives.

use orlicz_hjb::calibrate::forward_euler;
use orlicz_hjb::{
    divergence, jump_target, rho, worst_case_phi, Field, Grid, JumpDistribution, JumpQuadrature,
    MacrophyteModel, StationParameters,
};
use proptest::prelude::*;

fn pos_log_uniform(lo: f64, hi: f64) -> impl Strategy<Value = f64> {
    (lo.ln()..hi.ln()).prop_map(f64::exp)
}

proptest! {
    #[test]
    fn divergence_nonnegative_zero_only_at_one(phi in pos_log_uniform(1e-6, 1e6)) {
        let d = divergence(phi).unwrap();
        prop_assert!(d >= 0.0);
        if (phi - 1.0).abs() > 1e-9 {
            prop_assert!(d > 0.0);
        }
    }

    #[test]
    fn divergence_midpoint_convex(
        a in pos_log_uniform(1e-4, 1e4),
        b in pos_log_uniform(1e-4, 1e4),
    ) {
        let mid = divergence(0.5 * (a + b)).unwrap();
        let avg = 0.5 * (divergence(a).unwrap() + divergence(b).unwrap());
        prop_assert!(mid <= avg + 1e-12 * (1.0 + avg.abs()));
    }

    #[test]
    fn rho_monotone_in_x(
        x1 in pos_log_uniform(1e-2, 1e2),
        factor in 1.0f64..50.0,
        y in -5.0f64..5.0,
    ) {
        let x2 = x1 * factor;
        let r1 = rho(x1, y).unwrap();
        let r2 = rho(x2, y).unwrap();
        prop_assert!(r2 >= r1 - 1e-12 * (1.0 + r1.abs()));
    }

    #[test]
    fn rho_strictly_decreasing_in_y(
        x in 0.1f64..10.0,
        y in -2.0f64..2.0,
        dy in 0.05f64..1.0,
    ) {
        prop_assert!(rho(x, y + dy).unwrap() < rho(x, y).unwrap());
    }

    #[test]
    fn phi_hat_is_one_without_value_change(psi in pos_log_uniform(1e-3, 1e2)) {
        prop_assert_eq!(worst_case_phi(0.0, psi), 1.0);
    }

    #[test]
    fn quadrature_weights_sum_to_one(
        lo in -0.99f64..0.4,
        width in 0.01f64..1.5,
        m in 1usize..250,
        linear in proptest::bool::ANY,
    ) {
        let dist = if linear {
            JumpDistribution::linear_down(lo, lo + width).unwrap()
        } else {
            JumpDistribution::uniform(lo, lo + width).unwrap()
        };
        let q = JumpQuadrature::build(&dist, m).unwrap();
        let s: f64 = q.weights.iter().sum();
        prop_assert!((s - 1.0).abs() < 1e-14);
        prop_assert_eq!(q.nodes.len(), m);
        prop_assert!(q.nodes[0] == lo);
    }

    #[test]
    fn interpolation_monotone_in_vertex_values(
        seed_values in proptest::collection::vec(0.0f64..10.0, 36),
        bump in 0.01f64..5.0,
        which in 0usize..36,
        px in 0.0f64..1.0,
        py in 0.0f64..1.0,
    ) {
        let grid = Grid::new_2d([1.0, 1.0], [5, 5]).unwrap();
        let mut field = Field::constant(grid, 0.0);
        field.values.copy_from_slice(&seed_values);
        let before = field.interpolate([px, py]);
        field.values[which] += bump;
        let after = field.interpolate([px, py]);
        prop_assert!(after >= before - 1e-12);
    }

    #[test]
    fn interpolation_reproduces_bilinear_fields(
        c0 in -5.0f64..5.0,
        cx in -5.0f64..5.0,
        cy in -5.0f64..5.0,
        cxy in -5.0f64..5.0,
        px in 0.0f64..1.0,
        py in 0.0f64..2.0,
    ) {
        let grid = Grid::new_2d([1.0, 2.0], [7, 9]).unwrap();
        let f = Field::from_fn(grid, |p| c0 + cx * p[0] + cy * p[1] + cxy * p[0] * p[1]);
        let exact = c0 + cx * px + cy * py + cxy * px * py;
        let got = f.interpolate([px, py]);
        prop_assert!((got - exact).abs() < 1e-12 * (1.0 + exact.abs()));
    }

    #[test]
    fn jump_targets_stay_in_box_and_fix_zero(
        x1 in 0.0f64..1.0,
        x2 in 0.0f64..1.0,
        z in 0.0f64..1.0,
    ) {
        let model = MacrophyteModel::station7();
        let grid = Grid::new_2d([1.0, 1.0], [10, 10]).unwrap();
        let t = jump_target([x1, x2], &model, z, &grid);
        prop_assert!(t[0] >= 0.0 && t[0] <= 1.0);
        prop_assert!(t[1] >= 0.0 && t[1] <= 1.0);
        let id = jump_target([x1, x2], &model, 0.0, &grid);
        prop_assert_eq!(id, [x1, x2]);
    }

    #[test]
    fn forward_euler_nonnegative(
        r in 0.0f64..2.0,
        d in 0.0f64..1.0,
        alpha in 0.0f64..0.1,
        q in 0.05f64..1.0,
        x0 in 0.0f64..1.0,
        gap in 5.0f64..40.0,
    ) {
        let p = StationParameters { r, d, alpha_src: alpha, q, mu: 0.1 };
        let days: Vec<f64> = (0..6).map(|k| k as f64 * gap).collect();
        let traj = forward_euler(&p, &days, x0);
        prop_assert!(traj.iter().all(|&x| x >= 0.0));
    }
}

#[test]
fn residual_monotonicity_randomized_batch() {
    use rand::SeedableRng;
    let mut rng = rand_chacha::ChaCha12Rng::seed_from_u64(2024);
    for trial in 0..300 {
        if let Some(msg) = orlicz_hjb::verify::g_monotonicity_trial(&mut rng) {
            panic!("trial {trial}: {msg}");
        }
    }
}
