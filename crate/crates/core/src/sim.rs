//! Forward-model simulation and synthetic test images.
//!
//! `degrade` realizes `g = S H u + eta` with seeded white Gaussian noise:
//! the same spec and input always produce the same bytes. The LR output is
//! deliberately left unclamped so the solver sees the raw noise statistics.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::error::{Error, Result};
use crate::grid::ImageGrid;
use crate::operators::{make_blur, make_downsample, BlurSpec, DownsampleSpec, LinearOperator};

/// Blur, decimation, noise level and RNG seed of one simulated acquisition.
#[derive(Debug, Clone, Copy)]
pub struct DegradationSpec {
    pub blur: BlurSpec,
    pub down: DownsampleSpec,
    pub noise_sigma: f64,
    pub seed: u64,
}

impl DegradationSpec {
    pub fn validate(&self) -> Result<()> {
        if self.noise_sigma < 0.0 || !self.noise_sigma.is_finite() {
            return Err(Error::config(format!(
                "noise sigma must be nonnegative, got {}",
                self.noise_sigma
            )));
        }
        Ok(())
    }
}

/// Applies blur, downsampling and seeded additive Gaussian noise to an HR
/// image. Output shape is `(h / L, w / L)`; values are not clamped.
pub fn degrade(hr: &ImageGrid, spec: &DegradationSpec) -> Result<ImageGrid> {
    spec.validate()?;
    let blur = make_blur(hr.shape(), &spec.blur)?;
    let down = make_downsample(hr.shape(), &spec.down)?;
    let mut lr = down.apply(&blur.apply(hr));
    if spec.noise_sigma > 0.0 {
        let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
        let normal = Normal::new(0.0, spec.noise_sigma)
            .map_err(|e| Error::config(format!("noise distribution: {e}")))?;
        for v in lr.data_mut() {
            *v += normal.sample(&mut rng);
        }
    }
    Ok(lr)
}

/// Families of deterministic synthetic test images.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SyntheticPattern {
    /// Binary module grid with axis-aligned edges, values exactly in {0, 1}.
    QrLikeGrid { module_px: usize },
    /// `n x n` rectangular blocks, each a distinct flat gray level.
    PiecewiseConstantBlocks { n_blocks: usize },
    /// Left half 0, right half 1.
    SingleEdge,
}

impl SyntheticPattern {
    pub fn name(&self) -> &'static str {
        match self {
            SyntheticPattern::QrLikeGrid { .. } => "qr_like_grid",
            SyntheticPattern::PiecewiseConstantBlocks { .. } => "piecewise_constant_blocks",
            SyntheticPattern::SingleEdge => "single_edge",
        }
    }
}

/// Renders a pattern at the given size; deterministic per seed.
pub fn make_pattern(
    kind: SyntheticPattern,
    height: usize,
    width: usize,
    seed: u64,
) -> Result<ImageGrid> {
    if height == 0 || width == 0 {
        return Err(Error::dimension("pattern dimensions must be positive"));
    }
    match kind {
        SyntheticPattern::SingleEdge => {
            let mut img = ImageGrid::zeros(height, width);
            for r in 0..height {
                for c in width / 2..width {
                    img.data_mut()[r * width + c] = 1.0;
                }
            }
            Ok(img)
        }
        SyntheticPattern::QrLikeGrid { module_px } => {
            if module_px == 0 || height % module_px != 0 || width % module_px != 0 {
                return Err(Error::dimension(format!(
                    "{height}x{width} is not a whole number of {module_px}px modules"
                )));
            }
            let (mh, mw) = (height / module_px, width / module_px);
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let modules: Vec<f64> = (0..mh * mw)
                .map(|_| if rng.gen_bool(0.5) { 1.0 } else { 0.0 })
                .collect();
            let mut img = ImageGrid::zeros(height, width);
            for r in 0..height {
                for c in 0..width {
                    img.data_mut()[r * width + c] =
                        modules[(r / module_px) * mw + c / module_px];
                }
            }
            Ok(img)
        }
        SyntheticPattern::PiecewiseConstantBlocks { n_blocks } => {
            if n_blocks == 0 || n_blocks > height.min(width) {
                return Err(Error::dimension(format!(
                    "block count {n_blocks} invalid for {height}x{width}"
                )));
            }
            // one distinct gray level per block, shuffled deterministically
            let k = n_blocks * n_blocks;
            let mut levels: Vec<f64> = (0..k)
                .map(|i| i as f64 / (k.max(2) - 1) as f64)
                .collect();
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            for i in (1..levels.len()).rev() {
                let j = rng.gen_range(0..=i);
                levels.swap(i, j);
            }
            let mut img = ImageGrid::zeros(height, width);
            for r in 0..height {
                let br = (r * n_blocks) / height;
                for c in 0..width {
                    let bc = (c * n_blocks) / width;
                    img.data_mut()[r * width + c] = levels[br * n_blocks + bc];
                }
            }
            Ok(img)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::admm::{jump_count, JumpNorm};
    use crate::operators::{make_gradient_h, make_gradient_v, BoundaryCondition};

    fn spec(factor: usize, sigma_h: f64, noise: f64, seed: u64) -> DegradationSpec {
        DegradationSpec {
            blur: BlurSpec::gaussian(sigma_h),
            down: DownsampleSpec::new(factor),
            noise_sigma: noise,
            seed,
        }
    }

    #[test]
    fn degrade_noiseless_l1_is_blur_only() {
        let hr = make_pattern(SyntheticPattern::SingleEdge, 16, 16, 0).unwrap();
        let sp = spec(1, 1.0, 0.0, 0);
        let lr = degrade(&hr, &sp).unwrap();
        let blur = make_blur((16, 16), &sp.blur).unwrap();
        assert_eq!(lr, blur.apply(&hr));
    }

    #[test]
    fn degrade_constant_preserved_noiseless() {
        let hr = ImageGrid::new_constant(16, 16, 0.7).unwrap();
        let lr = degrade(&hr, &spec(2, 1.0, 0.0, 0)).unwrap();
        assert_eq!(lr.shape(), (8, 8));
        for v in lr.data() {
            assert!((v - 0.7).abs() <= 1e-12);
        }
    }

    #[test]
    fn degrade_seed_determinism() {
        let hr = make_pattern(SyntheticPattern::QrLikeGrid { module_px: 4 }, 32, 32, 5).unwrap();
        let a = degrade(&hr, &spec(2, 1.0, 0.05, 42)).unwrap();
        let b = degrade(&hr, &spec(2, 1.0, 0.05, 42)).unwrap();
        assert_eq!(a.data(), b.data());
        let c = degrade(&hr, &spec(2, 1.0, 0.05, 43)).unwrap();
        assert_ne!(a.data(), c.data());
    }

    #[test]
    fn degrade_linear_in_input_when_noiseless() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let u: Vec<f64> = (0..256).map(|_| rng.gen_range(0.0..1.0)).collect();
        let v: Vec<f64> = (0..256).map(|_| rng.gen_range(0.0..1.0)).collect();
        let u = ImageGrid::from_vec(16, 16, 1, u).unwrap();
        let v = ImageGrid::from_vec(16, 16, 1, v).unwrap();
        let sp = spec(2, 1.0, 0.0, 0);
        let lhs = degrade(&u.scaled(2.0).axpy(3.0, &v).unwrap(), &sp).unwrap();
        let rhs = degrade(&u, &sp)
            .unwrap()
            .scaled(2.0)
            .axpy(3.0, &degrade(&v, &sp).unwrap())
            .unwrap();
        assert!(lhs.sub(&rhs).unwrap().norm() <= 1e-10);
    }

    #[test]
    fn degrade_rejects_indivisible_shape() {
        let hr = ImageGrid::new_constant(15, 16, 0.5).unwrap();
        assert!(matches!(
            degrade(&hr, &spec(2, 1.0, 0.0, 0)),
            Err(Error::Dimension(_))
        ));
    }

    #[test]
    fn noise_statistics_sane() {
        // 200x200 HR, L=2 -> 10_000 LR pixels
        let hr = ImageGrid::new_constant(200, 200, 0.5).unwrap();
        let sigma = 0.05;
        let lr = degrade(&hr, &spec(2, 1.0, sigma, 7)).unwrap();
        let m = lr.data().len() as f64;
        let mean = lr.data().iter().sum::<f64>() / m;
        assert!((mean - 0.5).abs() <= 3.0 * sigma / m.sqrt());
        let var = lr.data().iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / m;
        let std = var.sqrt();
        assert!((std - sigma).abs() <= 0.05 * sigma, "std {std} vs {sigma}");
    }

    #[test]
    fn single_edge_layout() {
        let img = make_pattern(SyntheticPattern::SingleEdge, 4, 6, 0).unwrap();
        for r in 0..4 {
            for c in 0..6 {
                let expect = if c < 3 { 0.0 } else { 1.0 };
                assert_eq!(img.data()[r * 6 + c], expect);
            }
        }
    }

    #[test]
    fn qr_grid_modules_flat_and_binary() {
        let img =
            make_pattern(SyntheticPattern::QrLikeGrid { module_px: 5 }, 125, 125, 9).unwrap();
        for v in img.data() {
            assert!(*v == 0.0 || *v == 1.0);
        }
        // every 5x5 module is flat
        for mr in 0..25 {
            for mc in 0..25 {
                let v0 = img.data()[mr * 5 * 125 + mc * 5];
                for dr in 0..5 {
                    for dc in 0..5 {
                        assert_eq!(img.data()[(mr * 5 + dr) * 125 + mc * 5 + dc], v0);
                    }
                }
            }
        }
        // deterministic per seed
        let again =
            make_pattern(SyntheticPattern::QrLikeGrid { module_px: 5 }, 125, 125, 9).unwrap();
        assert_eq!(img, again);
    }

    #[test]
    fn blocks_jump_count_matches_geometry_oracle() {
        let n = 4usize;
        let (h, w) = (32, 32);
        let img = make_pattern(
            SyntheticPattern::PiecewiseConstantBlocks { n_blocks: n },
            h,
            w,
            13,
        )
        .unwrap();
        let dh = make_gradient_h((h, w), BoundaryCondition::DirichletZero);
        let dv = make_gradient_v((h, w), BoundaryCondition::DirichletZero);
        let got = jump_count(&img, &dh, &dv, JumpNorm::Magnitude);

        // geometric enumeration from the block layout alone: a pixel carries
        // a jump when its right or lower neighbor is in a different block
        // (distinct levels), or when it sits on the Dirichlet boundary with
        // a nonzero value
        let block = |r: usize, c: usize| ((r * n) / h, (c * n) / w);
        let mut expect = 0usize;
        for r in 0..h {
            for c in 0..w {
                let here = block(r, c);
                let jump_h = if c + 1 < w {
                    block(r, c + 1) != here
                } else {
                    img.data()[r * w + c] != 0.0
                };
                let jump_v = if r + 1 < h {
                    block(r + 1, c) != here
                } else {
                    img.data()[r * w + c] != 0.0
                };
                if jump_h || jump_v {
                    expect += 1;
                }
            }
        }
        assert_eq!(got, expect);
    }

    #[test]
    fn pattern_rejects_bad_geometry() {
        assert!(make_pattern(SyntheticPattern::QrLikeGrid { module_px: 5 }, 124, 125, 0).is_err());
        assert!(make_pattern(
            SyntheticPattern::PiecewiseConstantBlocks { n_blocks: 50 },
            16,
            16,
            0
        )
        .is_err());
    }
}
