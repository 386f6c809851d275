//! Closed-form per-pixel proximal maps.
//!
//! The sparsity subproblems decouple pixel by pixel, so each map is a pure
//! scalar (or 2-vector) function applied independently everywhere: hard
//! thresholding for the jump-count penalty, group soft thresholding for the
//! convex isotropic baseline.

use crate::error::{Error, Result};
use crate::grid::ImageGrid;

/// Minimizer of `delta*|t|_0 + (t - f)^2`: keeps `f` when `f^2 > delta`,
/// else returns 0. A tie `f^2 == delta` resolves to the sparser candidate 0.
#[inline]
pub fn hard_threshold_1d(f: f64, delta: f64) -> f64 {
    debug_assert!(delta >= 0.0);
    if f * f > delta {
        f
    } else {
        0.0
    }
}

/// Minimizer of `delta*|‖z‖|_0 + ‖z - f‖^2` over 2-vectors: keeps `f` when
/// `‖f‖^2 > delta`, else returns the origin.
#[inline]
pub fn hard_threshold_2d(f: (f64, f64), delta: f64) -> (f64, f64) {
    debug_assert!(delta >= 0.0);
    if f.0 * f.0 + f.1 * f.1 > delta {
        f
    } else {
        (0.0, 0.0)
    }
}

/// Minimizer of `delta*‖z‖ + ‖z - f‖^2`: shrinks the magnitude by
/// `delta / 2`, i.e. `(1 - delta / (2‖f‖))_+ * f`, with 0 at `f = 0`.
#[inline]
pub fn group_soft_threshold(f: (f64, f64), delta: f64) -> (f64, f64) {
    debug_assert!(delta >= 0.0);
    let norm = (f.0 * f.0 + f.1 * f.1).sqrt();
    if norm <= delta / 2.0 || norm == 0.0 {
        (0.0, 0.0)
    } else {
        let shrink = 1.0 - delta / (2.0 * norm);
        (shrink * f.0, shrink * f.1)
    }
}

/// Which per-pixel prox a plane application runs.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ProxKind {
    /// Scalar hard threshold on one plane.
    L0OneD,
    /// Joint hard threshold on paired planes.
    L0TwoD,
    /// Group soft threshold on paired planes.
    L1Group,
}

/// Scalar hard threshold applied to every sample of a plane.
pub fn apply_prox_plane(plane: &ImageGrid, delta: f64) -> ImageGrid {
    plane.map(|v| hard_threshold_1d(v, delta))
}

/// Pairwise prox over two aligned planes (the horizontal and vertical
/// gradient components of one pixel form the 2-vector).
pub fn apply_prox_pair(
    horiz: &ImageGrid,
    vert: &ImageGrid,
    delta: f64,
    kind: ProxKind,
) -> Result<(ImageGrid, ImageGrid)> {
    if !horiz.same_shape(vert) {
        return Err(Error::dimension("prox pair: plane shapes differ"));
    }
    let f = match kind {
        ProxKind::L0TwoD => hard_threshold_2d,
        ProxKind::L1Group => group_soft_threshold,
        ProxKind::L0OneD => {
            return Err(Error::config("prox pair: L0OneD takes a single plane"))
        }
    };
    let mut out_h = horiz.clone();
    let mut out_v = vert.clone();
    for ((h, v), (oh, ov)) in horiz
        .data()
        .iter()
        .zip(vert.data())
        .zip(out_h.data_mut().iter_mut().zip(out_v.data_mut().iter_mut()))
    {
        let (a, b) = f((*h, *v), delta);
        *oh = a;
        *ov = b;
    }
    Ok((out_h, out_v))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn cost_1d(t: f64, f: f64, delta: f64) -> f64 {
        let l0 = if t == 0.0 { 0.0 } else { 1.0 };
        delta * l0 + (t - f) * (t - f)
    }

    fn cost_2d(z: (f64, f64), f: (f64, f64), delta: f64) -> f64 {
        let l0 = if z == (0.0, 0.0) { 0.0 } else { 1.0 };
        let d = (z.0 - f.0, z.1 - f.1);
        delta * l0 + d.0 * d.0 + d.1 * d.1
    }

    #[test]
    fn hard_1d_keep_drop_tie() {
        assert_eq!(hard_threshold_1d(2.0, 1.0), 2.0);
        assert_eq!(hard_threshold_1d(0.5, 1.0), 0.0);
        // tie f^2 == delta breaks toward 0
        assert_eq!(hard_threshold_1d(1.0, 1.0), 0.0);
        // delta = 0 keeps f
        assert_eq!(hard_threshold_1d(0.3, 0.0), 0.3);
        assert_eq!(hard_threshold_1d(0.0, 0.0), 0.0);
    }

    #[test]
    fn hard_1d_beats_grid_scan() {
        let mut rng = ChaCha8Rng::seed_from_u64(100);
        for _ in 0..20_000 {
            let f: f64 = rng.gen_range(-2.0..2.0);
            let delta: f64 = rng.gen_range(0.0..4.0);
            let t = hard_threshold_1d(f, delta);
            assert!(t == 0.0 || t == f, "solution set is {{0, f}}");
            let best = cost_1d(t, f, delta);
            let lim = 2.0 * f.abs();
            for i in 0..=200 {
                let cand = -lim + (2.0 * lim) * (i as f64) / 200.0;
                assert!(best <= cost_1d(cand, f, delta) + 1e-12);
            }
        }
    }

    #[test]
    fn hard_2d_keep_drop_zero() {
        assert_eq!(hard_threshold_2d((3.0, 4.0), 16.0), (3.0, 4.0));
        assert_eq!(hard_threshold_2d((1.0, 1.0), 3.0), (0.0, 0.0));
        assert_eq!(hard_threshold_2d((0.0, 0.0), 5.0), (0.0, 0.0));
    }

    #[test]
    fn hard_2d_beats_grid_scan() {
        let mut rng = ChaCha8Rng::seed_from_u64(101);
        for _ in 0..2_000 {
            let f = (rng.gen_range(-2.0..2.0), rng.gen_range(-2.0..2.0));
            let delta: f64 = rng.gen_range(0.0..4.0);
            let z = hard_threshold_2d(f, delta);
            assert!(z == (0.0, 0.0) || z == f);
            let best = cost_2d(z, f, delta);
            let lim = 2.0 * (f.0 * f.0 + f.1 * f.1).sqrt();
            for i in 0..=40 {
                for j in 0..=40 {
                    let cand = (
                        -lim + 2.0 * lim * i as f64 / 40.0,
                        -lim + 2.0 * lim * j as f64 / 40.0,
                    );
                    assert!(best <= cost_2d(cand, f, delta) + 1e-12);
                }
            }
        }
    }

    #[test]
    fn group_soft_closed_form_cases() {
        let (a, b) = group_soft_threshold((3.0, 4.0), 2.0);
        assert!((a - 2.4).abs() < 1e-12 && (b - 3.2).abs() < 1e-12);
        assert_eq!(group_soft_threshold((0.3, 0.4), 2.0), (0.0, 0.0));
        assert_eq!(group_soft_threshold((0.0, 0.0), 1.0), (0.0, 0.0));
    }

    #[test]
    fn group_soft_first_order_optimality() {
        let mut rng = ChaCha8Rng::seed_from_u64(102);
        let obj = |z: (f64, f64), f: (f64, f64), delta: f64| {
            delta * (z.0 * z.0 + z.1 * z.1).sqrt()
                + (z.0 - f.0) * (z.0 - f.0)
                + (z.1 - f.1) * (z.1 - f.1)
        };
        for _ in 0..5_000 {
            let f = (rng.gen_range(-2.0..2.0), rng.gen_range(-2.0..2.0));
            let delta: f64 = rng.gen_range(0.0..3.0);
            let z = group_soft_threshold(f, delta);
            let znorm = (z.0 * z.0 + z.1 * z.1).sqrt();
            if z == (0.0, 0.0) {
                // subgradient condition at the kink
                assert!((f.0 * f.0 + f.1 * f.1).sqrt() <= delta / 2.0 + 1e-12);
            } else if znorm > 1e-2 {
                // central finite differences, valid away from the kink where
                // the curvature delta/|z| stays bounded
                let h = 1e-6;
                let gx = (obj((z.0 + h, z.1), f, delta) - obj((z.0 - h, z.1), f, delta))
                    / (2.0 * h);
                let gy = (obj((z.0, z.1 + h), f, delta) - obj((z.0, z.1 - h), f, delta))
                    / (2.0 * h);
                assert!((gx * gx + gy * gy).sqrt() < 1e-6, "gradient {gx},{gy}");
            } else {
                // near the kink: analytic stationarity delta*z/|z| + 2(z-f) = 0
                let gx = delta * z.0 / znorm + 2.0 * (z.0 - f.0);
                let gy = delta * z.1 / znorm + 2.0 * (z.1 - f.1);
                assert!((gx * gx + gy * gy).sqrt() < 1e-8);
            }
        }
    }

    #[test]
    fn plane_prox_matches_scalar_loop() {
        let mut rng = ChaCha8Rng::seed_from_u64(103);
        let data: Vec<f64> = (0..256).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let plane = ImageGrid::from_vec(16, 16, 1, data.clone()).unwrap();
        let delta = 0.2;
        let out = apply_prox_plane(&plane, delta);
        for (o, f) in out.data().iter().zip(&data) {
            assert_eq!(*o, hard_threshold_1d(*f, delta));
        }
    }

    #[test]
    fn plane_prox_delta_zero_identity_and_zero_plane() {
        let mut rng = ChaCha8Rng::seed_from_u64(104);
        let data: Vec<f64> = (0..64).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let plane = ImageGrid::from_vec(8, 8, 1, data).unwrap();
        assert_eq!(apply_prox_plane(&plane, 0.0), plane);
        let z = ImageGrid::zeros(8, 8);
        assert_eq!(apply_prox_plane(&z, 0.7), z);
        let (zh, zv) = apply_prox_pair(&z, &z, 0.7, ProxKind::L0TwoD).unwrap();
        assert_eq!(zh, z);
        assert_eq!(zv, z);
    }

    #[test]
    fn pair_prox_shape_mismatch() {
        let a = ImageGrid::zeros(4, 4);
        let b = ImageGrid::zeros(4, 5);
        assert!(apply_prox_pair(&a, &b, 0.1, ProxKind::L0TwoD).is_err());
    }

    proptest! {
        #[test]
        fn prox_1d_two_point_and_monotone(f in -10.0f64..10.0, d1 in 0.0f64..10.0, d2 in 0.0f64..10.0) {
            let t1 = hard_threshold_1d(f, d1);
            prop_assert!(t1 == 0.0 || t1 == f);
            let (lo, hi) = if d1 <= d2 { (d1, d2) } else { (d2, d1) };
            // once the smaller threshold kills f, the larger one must too
            if hard_threshold_1d(f, lo) == 0.0 {
                prop_assert_eq!(hard_threshold_1d(f, hi), 0.0);
            }
        }

        #[test]
        fn prox_plane_commutes_with_permutation(seed in 0u64..1000) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let data: Vec<f64> = (0..36).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let plane = ImageGrid::from_vec(6, 6, 1, data.clone()).unwrap();
            let reversed = ImageGrid::from_vec(6, 6, 1, data.iter().rev().copied().collect()).unwrap();
            let a = apply_prox_plane(&plane, 0.3);
            let b = apply_prox_plane(&reversed, 0.3);
            let b_rev: Vec<f64> = b.data().iter().rev().copied().collect();
            prop_assert_eq!(a.data(), &b_rev[..]);
        }
    }
}
