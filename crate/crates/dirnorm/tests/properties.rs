//! Property-based invariants over randomized geometry and reductions.

use num_complex::Complex64;
use proptest::prelude::*;

use dirnorm::fields::{self, test_fields, Grid, ScalarField};
use dirnorm::geometry::{self, AnchorSet, ConvexDomain};
use dirnorm::operators;
use dirnorm::par;

fn unit_vector(dim: usize) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(-1.0f64..1.0, dim).prop_filter_map("near-zero direction", |v| {
        let n: f64 = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        (n > 1e-3).then(|| v.iter().map(|x| x / n).collect())
    })
}

fn anchor_points(dim: usize) -> impl Strategy<Value = Vec<Vec<f64>>> {
    prop::collection::vec(unit_vector(dim), dim).prop_filter("degenerate anchors", |pts| {
        geometry::anchor_determinant(pts)
            .map(|d| d.abs() > geometry::det_tolerance(pts).max(1e-2))
            .unwrap_or(false)
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn lambda_expansion_identity(pts in anchor_points(3), q in prop::collection::vec(-0.5f64..0.5, 3)) {
        let anchors = AnchorSet::new_unchecked(pts);
        let delta = anchors.delta();
        let subs: Vec<f64> = (0..3)
            .map(|j| geometry::substituted_determinant(anchors.points(), &q, j).unwrap())
            .collect();
        let lambda = geometry::lambda_determinant(&anchors, &q).unwrap();
        let scale = delta.abs().max(subs.iter().map(|d| d.abs()).fold(0.0, f64::max));
        prop_assert!((lambda - (delta - subs.iter().sum::<f64>())).abs() <= 1e-10 * scale);
    }

    #[test]
    fn barycentric_sum_matches_lambda(pts in anchor_points(2), q in prop::collection::vec(-0.5f64..0.5, 2)) {
        let anchors = AnchorSet::new_unchecked(pts);
        let lambda = geometry::lambda_determinant(&anchors, &q).unwrap();
        let alphas = geometry::barycentric_coefficients(&anchors, &q).unwrap();
        let total: f64 = alphas.iter().sum();
        prop_assert!((total - (1.0 - lambda / anchors.delta())).abs() <= 1e-10);
    }

    #[test]
    fn direction_is_unit_and_reconstructs_point(
        p in prop::collection::vec(-2.0f64..2.0, 2),
        q in prop::collection::vec(-2.0f64..2.0, 2),
    ) {
        prop_assume!(p.iter().zip(&q).map(|(a, b)| (a - b) * (a - b)).sum::<f64>() > 1e-6);
        let (e, r) = geometry::direction_from(&p, &q).unwrap();
        let norm: f64 = e.iter().map(|x| x * x).sum::<f64>().sqrt();
        prop_assert!((norm - 1.0).abs() <= 1e-12);
        for i in 0..2 {
            prop_assert!((p[i] + r * e[i] - q[i]).abs() <= 1e-10);
        }
    }

    #[test]
    fn ray_exit_lands_on_the_boundary(
        x in 0.05f64..0.95,
        y in 0.05f64..0.95,
        dir in unit_vector(2),
    ) {
        let sq = ConvexDomain::unit_square();
        let d = sq.ray_exit_distance(&[x, y], &dir).unwrap();
        prop_assert!(d > 0.0);
        let exit = [x + d * dir[0], y + d * dir[1]];
        let on_face = exit
            .iter()
            .any(|&v| v.abs() <= 1e-9 || (v - 1.0).abs() <= 1e-9);
        prop_assert!(on_face, "exit point {exit:?} not on a face");
        prop_assert!(exit.iter().all(|&v| (-1e-9..=1.0 + 1e-9).contains(&v)));
    }

    #[test]
    fn parallel_and_sequential_reductions_agree(values in prop::collection::vec((-1.0f64..1.0, -1.0f64..1.0), 1..300)) {
        let zs: Vec<Complex64> = values.iter().map(|&(a, b)| Complex64::new(a, b)).collect();
        let par_sum = par::sum_c64(zs.len(), |i| zs[i]);
        let seq_sum = par::seq::sum_c64(zs.len(), |i| zs[i]);
        prop_assert_eq!(par_sum, seq_sum);
    }

    #[test]
    fn zero_time_shift_is_identity(seed in 0u64..1000) {
        let iv = ConvexDomain::unit_interval();
        let grid = Grid::new(&iv, 0.0625).unwrap();
        let f = ScalarField::sample_on(grid.clone(), test_fields::random_smooth(&iv, seed, 3));
        let shifted = operators::shift_apply(&f, &[1.0], 0.0).unwrap();
        prop_assert!(fields::l2_norm(&shifted.sub(&f).unwrap()) == 0.0);
    }
}
