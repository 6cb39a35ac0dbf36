use nalgebra::{DMatrix, Vector3};
use proptest::prelude::*;

use edmtools::completion::{ev_threshold, minimize_quartic, QuarticCoeffs};
use edmtools::edm::{edm_from_gram, edm_from_reduced, gram_from_edm, reduced_gram, GramCentering};
use edmtools::embedding::{classical_mds, procrustes};
use edmtools::unfolding::mdu_mask;
use edmtools::unlabeled::{auto_window, canonicalize_line, image_source, turnpike_recover, DistanceMultiset};
use edmtools::{assemble_edm, is_edm, numerical_rank, PointSet};

fn points(max_d: usize, max_n: usize) -> impl Strategy<Value = PointSet> {
    (1..=max_d, 2..=max_n).prop_flat_map(|(d, n)| {
        prop::collection::vec(-5.0..5.0f64, d * n)
            .prop_map(move |v| PointSet::new(DMatrix::from_vec(d, n, v)).unwrap())
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn edm_of_points_is_valid(x in points(3, 15)) {
        let d = assemble_edm(&x);
        let m = d.as_matrix();
        prop_assert_eq!(m, &m.transpose());
        prop_assert!(m.diagonal().iter().all(|&v| v == 0.0));
        prop_assert!(is_edm(&d, 1e-8).is_edm);
        prop_assert!(numerical_rank(m, 1e-9) <= x.dim() + 2);
    }

    #[test]
    fn gram_round_trips(x in points(3, 12), first in any::<bool>()) {
        let d = assemble_edm(&x);
        let c = if first { GramCentering::FirstPoint } else { GramCentering::Centroid };
        let back = edm_from_gram(&gram_from_edm(&d, c));
        let scale = d.frobenius_norm().max(1.0);
        prop_assert!((back.as_matrix() - d.as_matrix()).norm() <= 1e-10 * scale);
        let h = reduced_gram(&d).unwrap();
        prop_assert!((edm_from_reduced(&h).as_matrix() - d.as_matrix()).norm() <= 1e-10 * scale);
    }

    #[test]
    fn mds_preserves_distances(x in points(3, 12)) {
        let d = assemble_edm(&x);
        let y = classical_mds(&d, x.dim().min(x.len() - 1)).unwrap();
        let err = (assemble_edm(&y).as_matrix() - d.as_matrix()).norm();
        prop_assert!(err <= 1e-8 * d.frobenius_norm().max(1.0));
    }

    #[test]
    fn procrustes_undoes_rigid_motion(x in points(3, 10), angle in -3.0..3.0f64, shift in -3.0..3.0f64) {
        let d = x.dim();
        let mut rot = DMatrix::identity(d, d);
        if d >= 2 {
            rot[(0, 0)] = angle.cos();
            rot[(0, 1)] = -angle.sin();
            rot[(1, 0)] = angle.sin();
            rot[(1, 1)] = angle.cos();
        }
        let mut moved = &rot * x.coords();
        moved.add_scalar_mut(shift);
        let t = procrustes(&moved, x.coords()).unwrap();
        prop_assert!((t.apply(&moved) - x.coords()).norm() <= 1e-8 * (1.0 + x.coords().norm()));
    }

    #[test]
    fn ev_threshold_bounds_rank(v in prop::collection::vec(-1.0..1.0f64, 36), r in 0usize..6) {
        let a = DMatrix::from_vec(6, 6, v);
        let s = &a + a.transpose();
        let t = ev_threshold(&s, r);
        prop_assert!(numerical_rank(&t, 1e-9) <= r);
        prop_assert!((&t - t.transpose()).norm() <= 1e-12 * (1.0 + s.norm()));
    }

    #[test]
    fn quartic_minimum_is_global(a4 in 0.1..5.0f64, a3 in -5.0..5.0f64, a2 in -5.0..5.0f64,
                                 a1 in -5.0..5.0f64, probe in -10.0..10.0f64) {
        let q = QuarticCoeffs { a4, a3, a2, a1, a0: 0.0 };
        let x = minimize_quartic(&q).unwrap();
        prop_assert!(q.eval(x) <= q.eval(probe) + 1e-9 * (1.0 + q.eval(probe).abs()));
        prop_assert!(q.derivative(x).abs() <= 1e-6 * (1.0 + a4 * x.abs().powi(3)));
    }

    #[test]
    fn quartic_without_minimum(a4 in -5.0..=0.0f64, a3 in -1.0..1.0f64) {
        let q = QuarticCoeffs { a4, a3, a2: 1.0, a1: 0.0, a0: 0.0 };
        prop_assert!(minimize_quartic(&q).is_none());
    }

    #[test]
    fn window_contains_true_echoes(x in points(3, 6), src in prop::array::uniform3(-20.0..20.0f64)) {
        prop_assume!(x.dim() == 3);
        let s = Vector3::from(src);
        let t: Vec<f64> = (0..x.len())
            .map(|i| {
                let p = x.point(i);
                (s - Vector3::new(p[0], p[1], p[2])).norm() / 343.0
            })
            .collect();
        let w = auto_window(&x, 343.0, 0.0);
        prop_assert!(t.iter().all(|ti| (ti - t[0]).abs() <= w * (1.0 + 1e-12)));
    }

    #[test]
    fn mirror_is_involution(s in prop::array::uniform3(-5.0..5.0f64), p in prop::array::uniform3(-5.0..5.0f64),
                            n in prop::array::uniform3(-1.0..1.0f64)) {
        let n = Vector3::from(n);
        prop_assume!(n.norm() > 1e-3);
        let n = n.normalize();
        let (s, p) = (Vector3::from(s), Vector3::from(p));
        let img = image_source(&s, &p, &n).unwrap();
        prop_assert!((image_source(&img, &p, &n).unwrap() - s).norm() <= 1e-9);
        prop_assert!(((img - p).dot(&n) + (s - p).dot(&n)).abs() <= 1e-9);
    }

    #[test]
    fn turnpike_recovers_generic_points(xs in prop::collection::vec(0.0..10.0f64, 2..=6)) {
        let ms = DistanceMultiset::from_points(&xs).unwrap();
        prop_assume!(ms.values().windows(2).all(|w| w[1] - w[0] > 1e-6));
        let sols = turnpike_recover(&ms).unwrap();
        let want = canonicalize_line(&xs);
        prop_assert!(sols.iter().any(|s| s.iter().zip(&want).all(|(a, b)| (a - b).abs() < 1e-9)));
        for s in &sols {
            let back = DistanceMultiset::from_points(s).unwrap();
            prop_assert!(back.values().iter().zip(ms.values()).all(|(a, b)| (a - b).abs() < 1e-9));
        }
    }

    #[test]
    fn canonical_form_is_motion_invariant(xs in prop::collection::vec(-10.0..10.0f64, 1..8), shift in -5.0..5.0f64) {
        let c = canonicalize_line(&xs);
        let moved: Vec<f64> = xs.iter().map(|x| -x + shift).collect();
        let c2 = canonicalize_line(&moved);
        prop_assert!(c.iter().zip(&c2).all(|(a, b)| (a - b).abs() < 1e-9));
        prop_assert_eq!(canonicalize_line(&c), c);
    }

    #[test]
    fn mdu_mask_counts(m in 1usize..15, k in 1usize..15) {
        let mask = mdu_mask(m, k).unwrap();
        prop_assert_eq!(mask.observed_pair_count(), m * k);
        prop_assert_eq!(mask.missing_pair_count(), (m + k) * (m + k - 1) / 2 - m * k);
    }
}
