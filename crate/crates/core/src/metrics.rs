//! Reconstruction quality metrics and segmentation utilities.
//!
//! PSNR and SSIM assume intensities on `[0, 1]`; SSIM uses the reference
//! 11x11 Gaussian window with sigma 1.5 and the standard constants. Otsu
//! binarization and seeded k-means labelling feed the detection-oriented
//! evaluation path.

use crate::error::{Error, Result};
use crate::grid::ImageGrid;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Boolean foreground mask aligned with the image it came from.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BinaryMask {
    height: usize,
    width: usize,
    bits: Vec<bool>,
}

impl BinaryMask {
    pub fn new(height: usize, width: usize, bits: Vec<bool>) -> Result<Self> {
        if bits.len() != height * width {
            return Err(Error::dimension("mask buffer does not match shape"));
        }
        Ok(BinaryMask {
            height,
            width,
            bits,
        })
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.height, self.width)
    }

    pub fn bits(&self) -> &[bool] {
        &self.bits
    }

    pub fn count_foreground(&self) -> usize {
        self.bits.iter().filter(|b| **b).count()
    }

    /// Mask as a 0/1 image.
    pub fn to_grid(&self) -> ImageGrid {
        let data = self.bits.iter().map(|&b| if b { 1.0 } else { 0.0 }).collect();
        ImageGrid::from_vec(self.height, self.width, 1, data).expect("mask shape")
    }

    /// Foreground = samples strictly above `threshold` (first channel).
    pub fn from_threshold(img: &ImageGrid, threshold: f64) -> Self {
        let bits = img.plane(0).iter().map(|&v| v > threshold).collect();
        BinaryMask {
            height: img.height(),
            width: img.width(),
            bits,
        }
    }
}

/// Peak cap returned when the images coincide (MSE = 0).
pub const PSNR_CAP_DB: f64 = 99.0;

/// Peak signal-to-noise ratio in dB for unit dynamic range:
/// `10 * log10(1 / MSE)` over all channels, capped at 99 dB.
pub fn psnr(x: &ImageGrid, reference: &ImageGrid) -> Result<f64> {
    if !x.same_shape(reference) {
        return Err(Error::dimension("psnr: shape mismatch"));
    }
    let n = x.data().len() as f64;
    let mse: f64 = x
        .data()
        .iter()
        .zip(reference.data())
        .map(|(a, b)| (a - b) * (a - b))
        .sum::<f64>()
        / n;
    if mse == 0.0 {
        return Ok(PSNR_CAP_DB);
    }
    Ok((10.0 * (1.0 / mse).log10()).min(PSNR_CAP_DB))
}

/// SSIM parameters: the reference Gaussian window and stabilizers for unit
/// dynamic range.
#[derive(Debug, Clone, Copy)]
pub struct SsimConfig {
    pub window_size: usize,
    pub window_sigma: f64,
    pub c1: f64,
    pub c2: f64,
}

impl Default for SsimConfig {
    fn default() -> Self {
        SsimConfig {
            window_size: 11,
            window_sigma: 1.5,
            c1: (0.01f64).powi(2),
            c2: (0.03f64).powi(2),
        }
    }
}

impl SsimConfig {
    fn window(&self) -> Vec<f64> {
        let r = (self.window_size / 2) as isize;
        let mut w: Vec<f64> = (-r..=r)
            .map(|i| {
                let x = i as f64;
                (-x * x / (2.0 * self.window_sigma * self.window_sigma)).exp()
            })
            .collect();
        let sum: f64 = w.iter().sum();
        for v in &mut w {
            *v /= sum;
        }
        w
    }
}

/// Mean structural similarity over the valid region (full windows only);
/// multi-channel inputs are averaged over channels.
pub fn ssim(x: &ImageGrid, reference: &ImageGrid, cfg: &SsimConfig) -> Result<f64> {
    if !x.same_shape(reference) {
        return Err(Error::dimension("ssim: shape mismatch"));
    }
    let (h, w) = x.shape();
    if h < cfg.window_size || w < cfg.window_size {
        return Err(Error::config(format!(
            "ssim: image {h}x{w} smaller than the {} window",
            cfg.window_size
        )));
    }
    let win = cfg.window();
    let mut total = 0.0;
    for c in 0..x.channels() {
        total += ssim_plane(x.plane(c), reference.plane(c), (h, w), &win, cfg);
    }
    Ok(total / x.channels() as f64)
}

fn filter_valid(src: &[f64], shape: (usize, usize), win: &[f64]) -> (Vec<f64>, (usize, usize)) {
    let (h, w) = shape;
    let k = win.len();
    let (oh, ow) = (h - k + 1, w - k + 1);
    // rows
    let mut tmp = vec![0.0; h * ow];
    for r in 0..h {
        for c in 0..ow {
            let mut acc = 0.0;
            for (d, wk) in win.iter().enumerate() {
                acc += wk * src[r * w + c + d];
            }
            tmp[r * ow + c] = acc;
        }
    }
    // columns
    let mut out = vec![0.0; oh * ow];
    for r in 0..oh {
        for c in 0..ow {
            let mut acc = 0.0;
            for (d, wk) in win.iter().enumerate() {
                acc += wk * tmp[(r + d) * ow + c];
            }
            out[r * ow + c] = acc;
        }
    }
    (out, (oh, ow))
}

fn ssim_plane(
    x: &[f64],
    y: &[f64],
    shape: (usize, usize),
    win: &[f64],
    cfg: &SsimConfig,
) -> f64 {
    let sq = |v: &[f64]| -> Vec<f64> { v.iter().map(|a| a * a).collect() };
    let xy: Vec<f64> = x.iter().zip(y).map(|(a, b)| a * b).collect();

    let (mu_x, dims) = filter_valid(x, shape, win);
    let (mu_y, _) = filter_valid(y, shape, win);
    let (ex2, _) = filter_valid(&sq(x), shape, win);
    let (ey2, _) = filter_valid(&sq(y), shape, win);
    let (exy, _) = filter_valid(&xy, shape, win);

    let n = dims.0 * dims.1;
    let mut acc = 0.0;
    for i in 0..n {
        let (mx, my) = (mu_x[i], mu_y[i]);
        let vx = ex2[i] - mx * mx;
        let vy = ey2[i] - my * my;
        let cov = exy[i] - mx * my;
        acc += ((2.0 * mx * my + cfg.c1) * (2.0 * cov + cfg.c2))
            / ((mx * mx + my * my + cfg.c1) * (vx + vy + cfg.c2));
    }
    acc / n as f64
}

/// Intersection over union of foreground pixels. Two empty masks agree
/// perfectly (1.0); empty versus nonempty scores 0.
pub fn jaccard(a: &BinaryMask, b: &BinaryMask) -> Result<f64> {
    if a.shape() != b.shape() {
        return Err(Error::dimension("jaccard: shape mismatch"));
    }
    let mut inter = 0usize;
    let mut union = 0usize;
    for (x, y) in a.bits.iter().zip(&b.bits) {
        if *x && *y {
            inter += 1;
        }
        if *x || *y {
            union += 1;
        }
    }
    if union == 0 {
        return Ok(1.0);
    }
    Ok(inter as f64 / union as f64)
}

const OTSU_BINS: usize = 256;

/// Otsu binarization on a 256-bin histogram over `[0, 1]`.
///
/// The returned threshold is the largest pixel value assigned to the
/// background class, so `value > threshold` is exactly the foreground.
/// A constant image degenerates to an all-background mask with the constant
/// as threshold.
pub fn otsu_binarize(x: &ImageGrid) -> Result<(BinaryMask, f64)> {
    if x.channels() != 1 {
        return Err(Error::dimension("otsu: single-channel input required"));
    }
    let data = x.plane(0);
    let bin_of =
        |v: f64| -> usize { (((v.clamp(0.0, 1.0)) * OTSU_BINS as f64) as usize).min(OTSU_BINS - 1) };

    let mut hist = [0usize; OTSU_BINS];
    for &v in data {
        hist[bin_of(v)] += 1;
    }

    let total = data.len() as f64;
    let total_sum: f64 = hist
        .iter()
        .enumerate()
        .map(|(i, &c)| i as f64 * c as f64)
        .sum();

    let mut best_t: Option<usize> = None;
    let mut best_var = 0.0;
    let mut w0 = 0.0;
    let mut sum0 = 0.0;
    for t in 0..OTSU_BINS - 1 {
        w0 += hist[t] as f64;
        sum0 += t as f64 * hist[t] as f64;
        if w0 == 0.0 {
            continue;
        }
        let w1 = total - w0;
        if w1 == 0.0 {
            break;
        }
        let mean0 = sum0 / w0;
        let mean1 = (total_sum - sum0) / w1;
        let var = w0 * w1 * (mean0 - mean1) * (mean0 - mean1);
        if var > best_var {
            best_var = var;
            best_t = Some(t);
        }
    }

    match best_t {
        None => {
            // all mass in one bin: everything is background
            let threshold = data.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            let mask = BinaryMask::new(x.height(), x.width(), vec![false; data.len()])?;
            Ok((mask, threshold))
        }
        Some(t) => {
            let threshold = data
                .iter()
                .cloned()
                .filter(|&v| bin_of(v) <= t)
                .fold(f64::NEG_INFINITY, f64::max);
            let mask = BinaryMask::from_threshold(x, threshold);
            Ok((mask, threshold))
        }
    }
}

/// Lloyd k-means on per-pixel channel vectors with k-means++ seeding.
///
/// Deterministic for a fixed seed; ties in assignment go to the lowest
/// cluster index. Returns one label in `[0, k)` per pixel.
pub fn kmeans_labels(
    x: &ImageGrid,
    k: usize,
    seed: u64,
    max_iter: usize,
) -> Result<Vec<usize>> {
    if k == 0 {
        return Err(Error::config("kmeans: k must be positive"));
    }
    let n = x.plane_len();
    let dim = x.channels();
    let feature = |i: usize| -> Vec<f64> { (0..dim).map(|c| x.plane(c)[i]).collect() };

    let mut distinct: Vec<Vec<f64>> = Vec::new();
    for i in 0..n {
        let f = feature(i);
        if !distinct.contains(&f) {
            distinct.push(f);
            if distinct.len() > k {
                break;
            }
        }
    }
    if distinct.len() < k {
        return Err(Error::config(format!(
            "kmeans: k = {k} exceeds the {} distinct feature vectors",
            distinct.len()
        )));
    }

    let dist2 = |a: &[f64], b: &[f64]| -> f64 {
        a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
    };

    // k-means++ seeding
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut centroids: Vec<Vec<f64>> = Vec::with_capacity(k);
    centroids.push(feature(rng.gen_range(0..n)));
    while centroids.len() < k {
        let d2: Vec<f64> = (0..n)
            .map(|i| {
                let f = feature(i);
                centroids
                    .iter()
                    .map(|c| dist2(&f, c))
                    .fold(f64::INFINITY, f64::min)
            })
            .collect();
        let total: f64 = d2.iter().sum();
        let next = if total <= 0.0 {
            // all remaining points coincide with a centroid; take the first
            // point not yet chosen as one (distinct-count check above
            // guarantees such a point exists)
            (0..n)
                .find(|&i| !centroids.contains(&feature(i)))
                .expect("distinct feature available")
        } else {
            let mut target = rng.gen_range(0.0..total);
            let mut chosen = n - 1;
            for (i, &d) in d2.iter().enumerate() {
                if target < d {
                    chosen = i;
                    break;
                }
                target -= d;
            }
            chosen
        };
        centroids.push(feature(next));
    }

    let assign = |centroids: &[Vec<f64>]| -> Vec<usize> {
        (0..n)
            .map(|i| {
                let f = feature(i);
                let mut best = 0;
                let mut best_d = f64::INFINITY;
                for (j, c) in centroids.iter().enumerate() {
                    let d = dist2(&f, c);
                    if d < best_d {
                        best_d = d;
                        best = j;
                    }
                }
                best
            })
            .collect()
    };

    let wcv = |labels: &[usize], centroids: &[Vec<f64>]| -> f64 {
        (0..n).map(|i| dist2(&feature(i), &centroids[labels[i]])).sum()
    };

    let mut labels = assign(&centroids);
    let mut prev_wcv = f64::INFINITY;
    for _ in 0..max_iter {
        // means update
        let mut sums = vec![vec![0.0; dim]; k];
        let mut counts = vec![0usize; k];
        for (i, &l) in labels.iter().enumerate() {
            let f = feature(i);
            for (s, v) in sums[l].iter_mut().zip(&f) {
                *s += v;
            }
            counts[l] += 1;
        }
        for j in 0..k {
            if counts[j] > 0 {
                for s in &mut sums[j] {
                    *s /= counts[j] as f64;
                }
                centroids[j] = sums[j].clone();
            }
            // empty cluster keeps its previous centroid
        }
        let next = assign(&centroids);
        let v = wcv(&next, &centroids);
        debug_assert!(
            v <= prev_wcv + 1e-9 * prev_wcv.max(1.0),
            "within-cluster variance increased"
        );
        prev_wcv = v;
        if next == labels {
            break;
        }
        labels = next;
    }
    Ok(labels)
}
