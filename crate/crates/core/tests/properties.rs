use mmcm::{aggregate_gaps, gap_matrix, group_mean};
use mmcm_testkit::gen::{any_depth, grid_frame, int_depth};
use mmcm_testkit::props::{self, dyadic_scale, dyadic_tau, near_max_frame, trend_points, unit_mean};
use proptest::prelude::*;

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn mmcm_bounds(f in grid_frame(12, 4, 19)) {
        props::consensus_bounds(&f)?;
    }

    #[test]
    fn pair_symmetry(f in grid_frame(12, 4, 19)) {
        props::pair_symmetry(&f)?;
    }

    #[test]
    fn model_permutation(f in grid_frame(12, 4, 19), seed in any::<u64>()) {
        props::permutation_invariance(&f, seed)?;
    }

    #[test]
    fn class_relabeling(f in grid_frame(12, 4, 19), m in any::<u16>(), a in any::<u16>()) {
        props::relabel_invariance(&f, m, a)?;
    }

    #[test]
    fn agreement_monotone(f in grid_frame(12, 4, 4), pick in any::<(usize, usize, usize)>()) {
        props::monotonicity(&f, pick)?;
    }

    #[test]
    fn confidence_scaling(f in grid_frame(12, 4, 19), m in 1u32..=256) {
        props::scaling_law(&f, m)?;
    }

    #[test]
    fn maximality(f in near_max_frame()) {
        props::maximality(&f)?;
    }

    #[test]
    fn gap_symmetric_bounded(a in unit_mean(), b in unit_mean()) {
        props::gap_symmetry_bounds(a, b)?;
    }

    #[test]
    fn gap_scale_covariant(a in unit_mean(), b in unit_mean(), k in 0.01f64..4.0) {
        props::gap_scale_covariance(a, b, k)?;
    }

    #[test]
    fn structural_affine_invariance(
        d in int_depth(16),
        a in dyadic_scale(),
        b in -100i32..=100,
        bins in 1usize..=300,
        tau in dyadic_tau(),
    ) {
        props::affine_invariance(&d, a, b as f32, bins, tau)?;
    }

    #[test]
    fn ratio_monotone_in_tau(d in any_depth(16), t1 in 0.001f64..2.0, t2 in 0.001f64..2.0) {
        props::tau_monotonicity(&d, t1, t2)?;
    }

    #[test]
    fn entropy_bounded(d in any_depth(16), bins in 1usize..=512) {
        props::entropy_bounds(&d, bins)?;
    }

    #[test]
    fn gradient_transposition(d in any_depth(16)) {
        props::transposition(&d)?;
    }

    #[test]
    fn trend_reorder(p in trend_points(), seed in any::<u64>()) {
        props::trend_reorder(&p, seed)?;
    }

    #[test]
    fn intra_matrix_symmetric(means in prop::collection::vec(0.0f64..=1.0, 1..8)) {
        let sets: Vec<_> = means
            .iter()
            .enumerate()
            .map(|(i, m)| group_mean(format!("g{i}"), vec![("f".into(), *m)]).unwrap())
            .collect();
        let g = gap_matrix(&sets, &sets).unwrap();
        for i in 0..sets.len() {
            prop_assert_eq!(g.values[i][i], 0.0);
            for j in 0..sets.len() {
                prop_assert_eq!(g.values[i][j].to_bits(), g.values[j][i].to_bits());
            }
        }
        let ranked = aggregate_gaps(&g);
        for w in ranked.windows(2) {
            prop_assert!(
                w[0].mean_gap > w[1].mean_gap
                    || (w[0].mean_gap == w[1].mean_gap && w[0].group_id < w[1].group_id)
            );
        }
    }
}
