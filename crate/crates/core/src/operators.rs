//! Linear operators of the degradation model and their exact adjoints.
//!
//! Four constructors cover everything the solvers need: horizontal and
//! vertical finite differences, Gaussian blur, and antialiased downsampling.
//! Multi-channel grids are mapped channel by channel with the same weights.
//! Every operator satisfies `<Ax, y> == <x, A'y>` to roundoff; the
//! downsampler stores its sparse weight table explicitly so its adjoint is
//! the exact transpose.

use crate::error::{Error, Result};
use crate::grid::ImageGrid;

/// Boundary handling for stencil operators.
///
/// `DirichletZero` treats samples outside the grid as zero, which makes the
/// stacked difference operator full rank. `Periodic` wraps around.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum BoundaryCondition {
    #[default]
    DirichletZero,
    Periodic,
}

impl BoundaryCondition {
    pub fn name(&self) -> &'static str {
        match self {
            BoundaryCondition::DirichletZero => "dirichlet_zero",
            BoundaryCondition::Periodic => "periodic",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "dirichlet_zero" => Ok(BoundaryCondition::DirichletZero),
            "periodic" => Ok(BoundaryCondition::Periodic),
            other => Err(Error::config(format!("unknown boundary condition `{other}`"))),
        }
    }
}

/// Gaussian point-spread function: standard deviation in pixels, truncation
/// radius in pixels, and the boundary rule used when convolving.
#[derive(Debug, Clone, Copy)]
pub struct BlurSpec {
    pub sigma: f64,
    pub radius: usize,
    pub boundary: BoundaryCondition,
}

impl BlurSpec {
    /// Spec with the default truncation radius `ceil(3 sigma)` and periodic
    /// boundary.
    pub fn gaussian(sigma: f64) -> Self {
        BlurSpec {
            sigma,
            radius: (3.0 * sigma).ceil().max(1.0) as usize,
            boundary: BoundaryCondition::Periodic,
        }
    }

    pub fn with_boundary(mut self, boundary: BoundaryCondition) -> Self {
        self.boundary = boundary;
        self
    }

    pub fn with_radius(mut self, radius: usize) -> Self {
        self.radius = radius;
        self
    }
}

/// Resampling kernel used to build the downsampling weight table.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum DownsampleKernel {
    #[default]
    Lanczos3,
    Lanczos2,
    Box,
}

impl DownsampleKernel {
    fn support(&self) -> f64 {
        match self {
            DownsampleKernel::Lanczos3 => 3.0,
            DownsampleKernel::Lanczos2 => 2.0,
            DownsampleKernel::Box => 0.5,
        }
    }

    fn eval(&self, x: f64) -> f64 {
        match self {
            DownsampleKernel::Lanczos3 => lanczos(x, 3.0),
            DownsampleKernel::Lanczos2 => lanczos(x, 2.0),
            DownsampleKernel::Box => {
                if x.abs() <= 0.5 {
                    1.0
                } else {
                    0.0
                }
            }
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            DownsampleKernel::Lanczos3 => "lanczos3",
            DownsampleKernel::Lanczos2 => "lanczos2",
            DownsampleKernel::Box => "box",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "lanczos3" => Ok(DownsampleKernel::Lanczos3),
            "lanczos2" => Ok(DownsampleKernel::Lanczos2),
            "box" => Ok(DownsampleKernel::Box),
            other => Err(Error::config(format!("unknown downsample kernel `{other}`"))),
        }
    }
}

/// Integer decimation factor plus the separable kernel used for antialiasing.
#[derive(Debug, Clone, Copy)]
pub struct DownsampleSpec {
    pub factor: usize,
    pub kernel: DownsampleKernel,
}

impl DownsampleSpec {
    pub fn new(factor: usize) -> Self {
        DownsampleSpec {
            factor,
            kernel: DownsampleKernel::Lanczos3,
        }
    }

    pub fn with_kernel(mut self, kernel: DownsampleKernel) -> Self {
        self.kernel = kernel;
        self
    }
}

fn lanczos(x: f64, a: f64) -> f64 {
    if x == 0.0 {
        return 1.0;
    }
    if x.abs() >= a {
        return 0.0;
    }
    let px = std::f64::consts::PI * x;
    a * (px.sin()) * ((px / a).sin()) / (px * px)
}

/// A linear map between image grids together with its exact adjoint.
///
/// `apply` requires `input_shape` and produces `output_shape`;
/// `apply_adjoint` the reverse. Channels pass through unchanged.
pub trait LinearOperator {
    fn input_shape(&self) -> (usize, usize);
    fn output_shape(&self) -> (usize, usize);
    fn apply(&self, x: &ImageGrid) -> ImageGrid;
    fn apply_adjoint(&self, y: &ImageGrid) -> ImageGrid;
}

fn map_planes(
    x: &ImageGrid,
    out_shape: (usize, usize),
    f: impl Fn(&[f64], &mut [f64]),
) -> ImageGrid {
    let (oh, ow) = out_shape;
    let mut out = vec![0.0; oh * ow * x.channels()];
    let plane_in = x.plane_len();
    let plane_out = oh * ow;
    for c in 0..x.channels() {
        f(
            x.plane(c),
            &mut out[c * plane_out..(c + 1) * plane_out],
        );
    }
    let _ = plane_in;
    ImageGrid::from_vec(oh, ow, x.channels(), out).expect("operator output shape")
}

/// The identity map on a fixed shape.
#[derive(Debug, Clone, Copy)]
pub struct IdentityOp {
    shape: (usize, usize),
}

/// Identity operator, useful for degenerate compositions and tests.
pub fn identity(shape: (usize, usize)) -> IdentityOp {
    IdentityOp { shape }
}

impl LinearOperator for IdentityOp {
    fn input_shape(&self) -> (usize, usize) {
        self.shape
    }
    fn output_shape(&self) -> (usize, usize) {
        self.shape
    }
    fn apply(&self, x: &ImageGrid) -> ImageGrid {
        assert_eq!(x.shape(), self.shape, "identity: input shape mismatch");
        x.clone()
    }
    fn apply_adjoint(&self, y: &ImageGrid) -> ImageGrid {
        assert_eq!(y.shape(), self.shape, "identity: input shape mismatch");
        y.clone()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum GradientAxis {
    Horizontal,
    Vertical,
}

/// Forward finite difference along one axis.
#[derive(Debug, Clone)]
pub struct GradientOp {
    shape: (usize, usize),
    axis: GradientAxis,
    boundary: BoundaryCondition,
}

/// Horizontal forward difference `u[r, c+1] - u[r, c]`.
///
/// Last column: `-u[r, w-1]` under Dirichlet, `u[r, 0] - u[r, w-1]` under
/// periodic boundary.
pub fn make_gradient_h(shape: (usize, usize), boundary: BoundaryCondition) -> GradientOp {
    GradientOp {
        shape,
        axis: GradientAxis::Horizontal,
        boundary,
    }
}

/// Vertical forward difference `u[r+1, c] - u[r, c]`; same boundary contract
/// as [`make_gradient_h`] with rows and columns exchanged.
pub fn make_gradient_v(shape: (usize, usize), boundary: BoundaryCondition) -> GradientOp {
    GradientOp {
        shape,
        axis: GradientAxis::Vertical,
        boundary,
    }
}

impl GradientOp {
    fn forward_plane(&self, src: &[f64], dst: &mut [f64]) {
        let (h, w) = self.shape;
        match self.axis {
            GradientAxis::Horizontal => {
                for r in 0..h {
                    let row = r * w;
                    for c in 0..w - 1 {
                        dst[row + c] = src[row + c + 1] - src[row + c];
                    }
                    dst[row + w - 1] = match self.boundary {
                        BoundaryCondition::DirichletZero => -src[row + w - 1],
                        BoundaryCondition::Periodic => src[row] - src[row + w - 1],
                    };
                }
            }
            GradientAxis::Vertical => {
                for r in 0..h - 1 {
                    for c in 0..w {
                        dst[r * w + c] = src[(r + 1) * w + c] - src[r * w + c];
                    }
                }
                let last = (h - 1) * w;
                for c in 0..w {
                    dst[last + c] = match self.boundary {
                        BoundaryCondition::DirichletZero => -src[last + c],
                        BoundaryCondition::Periodic => src[c] - src[last + c],
                    };
                }
            }
        }
    }

    // Transpose of the forward stencil: `y[i-1] - y[i]` with the matching
    // boundary rule on the `-1` index.
    fn adjoint_plane(&self, src: &[f64], dst: &mut [f64]) {
        let (h, w) = self.shape;
        match self.axis {
            GradientAxis::Horizontal => {
                for r in 0..h {
                    let row = r * w;
                    for c in 0..w {
                        let prev = match (c, self.boundary) {
                            (0, BoundaryCondition::DirichletZero) => 0.0,
                            (0, BoundaryCondition::Periodic) => src[row + w - 1],
                            (c, _) => src[row + c - 1],
                        };
                        dst[row + c] = prev - src[row + c];
                    }
                }
            }
            GradientAxis::Vertical => {
                for r in 0..h {
                    for c in 0..w {
                        let prev = match (r, self.boundary) {
                            (0, BoundaryCondition::DirichletZero) => 0.0,
                            (0, BoundaryCondition::Periodic) => src[(h - 1) * w + c],
                            (r, _) => src[(r - 1) * w + c],
                        };
                        dst[r * w + c] = prev - src[r * w + c];
                    }
                }
            }
        }
    }
}

impl LinearOperator for GradientOp {
    fn input_shape(&self) -> (usize, usize) {
        self.shape
    }
    fn output_shape(&self) -> (usize, usize) {
        self.shape
    }
    fn apply(&self, x: &ImageGrid) -> ImageGrid {
        assert_eq!(x.shape(), self.shape, "gradient: input shape mismatch");
        map_planes(x, self.shape, |src, dst| self.forward_plane(src, dst))
    }
    fn apply_adjoint(&self, y: &ImageGrid) -> ImageGrid {
        assert_eq!(y.shape(), self.shape, "gradient: input shape mismatch");
        map_planes(y, self.shape, |src, dst| self.adjoint_plane(src, dst))
    }
}

/// Separable Gaussian convolution. The sampled kernel is truncated at the
/// spec radius and renormalized to sum exactly 1; since it is symmetric the
/// operator is self-adjoint under both boundary rules.
#[derive(Debug, Clone)]
pub struct BlurOp {
    shape: (usize, usize),
    kernel: Vec<f64>,
    radius: usize,
    boundary: BoundaryCondition,
}

pub fn make_blur(shape: (usize, usize), spec: &BlurSpec) -> Result<BlurOp> {
    if spec.sigma <= 0.0 || !spec.sigma.is_finite() {
        return Err(Error::config(format!(
            "blur sigma must be positive and finite, got {}",
            spec.sigma
        )));
    }
    if spec.radius == 0 {
        return Err(Error::config("blur radius must be positive"));
    }
    if spec.radius >= shape.0.min(shape.1) {
        return Err(Error::config(format!(
            "blur radius {} too large for {}x{} grid",
            spec.radius, shape.0, shape.1
        )));
    }
    let mut kernel: Vec<f64> = (-(spec.radius as isize)..=spec.radius as isize)
        .map(|i| {
            let x = i as f64;
            (-x * x / (2.0 * spec.sigma * spec.sigma)).exp()
        })
        .collect();
    let sum: f64 = kernel.iter().sum();
    for k in &mut kernel {
        *k /= sum;
    }
    Ok(BlurOp {
        shape,
        kernel,
        radius: spec.radius,
        boundary: spec.boundary,
    })
}

impl BlurOp {
    /// The normalized 1D kernel; the 2D PSF is its outer product.
    pub fn kernel(&self) -> &[f64] {
        &self.kernel
    }

    fn convolve_1d(&self, src: &[f64], dst: &mut [f64], len: usize, stride: usize, base: usize) {
        let r = self.radius as isize;
        for i in 0..len as isize {
            let mut acc = 0.0;
            for d in -r..=r {
                let j = i + d;
                let v = match self.boundary {
                    BoundaryCondition::Periodic => {
                        let j = j.rem_euclid(len as isize) as usize;
                        src[base + j * stride]
                    }
                    BoundaryCondition::DirichletZero => {
                        if j < 0 || j >= len as isize {
                            0.0
                        } else {
                            src[base + j as usize * stride]
                        }
                    }
                };
                acc += self.kernel[(d + r) as usize] * v;
            }
            dst[base + i as usize * stride] = acc;
        }
    }

    fn blur_plane(&self, src: &[f64], dst: &mut [f64]) {
        let (h, w) = self.shape;
        let mut tmp = vec![0.0; h * w];
        for r in 0..h {
            self.convolve_1d(src, &mut tmp, w, 1, r * w);
        }
        for c in 0..w {
            self.convolve_1d(&tmp, dst, h, w, c);
        }
    }
}

impl LinearOperator for BlurOp {
    fn input_shape(&self) -> (usize, usize) {
        self.shape
    }
    fn output_shape(&self) -> (usize, usize) {
        self.shape
    }
    fn apply(&self, x: &ImageGrid) -> ImageGrid {
        assert_eq!(x.shape(), self.shape, "blur: input shape mismatch");
        map_planes(x, self.shape, |src, dst| self.blur_plane(src, dst))
    }
    fn apply_adjoint(&self, y: &ImageGrid) -> ImageGrid {
        // symmetric kernel: correlation equals convolution
        self.apply(y)
    }
}

/// One output sample's source indices and weights.
type WeightRow = Vec<(usize, f64)>;

/// Antialiased separable decimation stored as explicit per-axis weight
/// tables, so the adjoint is the exact transpose of the forward map.
#[derive(Debug, Clone)]
pub struct DownsampleOp {
    hr_shape: (usize, usize),
    lr_shape: (usize, usize),
    row_table: Vec<WeightRow>,
    col_table: Vec<WeightRow>,
}

pub fn make_downsample(hr_shape: (usize, usize), spec: &DownsampleSpec) -> Result<DownsampleOp> {
    if spec.factor == 0 {
        return Err(Error::config("downsample factor must be positive"));
    }
    let (h, w) = hr_shape;
    if h % spec.factor != 0 || w % spec.factor != 0 {
        return Err(Error::dimension(format!(
            "HR shape {h}x{w} not divisible by factor {}",
            spec.factor
        )));
    }
    let row_table = build_axis_table(h, spec);
    let col_table = build_axis_table(w, spec);
    Ok(DownsampleOp {
        hr_shape,
        lr_shape: (h / spec.factor, w / spec.factor),
        row_table,
        col_table,
    })
}

/// 1D resampling weights for one axis: for each output sample, the clamped
/// source indices of the scaled kernel support, normalized to sum 1.
fn build_axis_table(n_in: usize, spec: &DownsampleSpec) -> Vec<WeightRow> {
    let factor = spec.factor;
    let n_out = n_in / factor;
    if factor == 1 {
        return (0..n_in).map(|i| vec![(i, 1.0)]).collect();
    }
    let scale = factor as f64; // kernel support stretched by the factor (antialias)
    let support = spec.kernel.support() * scale;
    let mut table = Vec::with_capacity(n_out);
    for j in 0..n_out {
        let center = (j as f64 + 0.5) * scale - 0.5;
        let lo = (center - support).ceil() as isize;
        let hi = (center + support).floor() as isize;
        let mut row: WeightRow = Vec::new();
        for i in lo..=hi {
            let wgt = spec.kernel.eval((center - i as f64) / scale);
            if wgt == 0.0 {
                continue;
            }
            // clamp out-of-range sources to the edge, merging weights
            let idx = i.clamp(0, n_in as isize - 1) as usize;
            match row.iter_mut().find(|(k, _)| *k == idx) {
                Some((_, acc)) => *acc += wgt,
                None => row.push((idx, wgt)),
            }
        }
        let sum: f64 = row.iter().map(|(_, w)| w).sum();
        for (_, w) in &mut row {
            *w /= sum;
        }
        row.sort_by_key(|(k, _)| *k);
        table.push(row);
    }
    table
}

impl DownsampleOp {
    pub fn factor(&self) -> usize {
        self.hr_shape.0 / self.lr_shape.0
    }

    fn down_plane(&self, src: &[f64], dst: &mut [f64]) {
        let (h, w) = self.hr_shape;
        let (lh, lw) = self.lr_shape;
        // columns first: h x lw intermediate
        let mut tmp = vec![0.0; h * lw];
        for r in 0..h {
            for (j, row) in self.col_table.iter().enumerate() {
                let mut acc = 0.0;
                for &(i, wgt) in row {
                    acc += wgt * src[r * w + i];
                }
                tmp[r * lw + j] = acc;
            }
        }
        for (q, row) in self.row_table.iter().enumerate() {
            for j in 0..lw {
                let mut acc = 0.0;
                for &(r, wgt) in row {
                    acc += wgt * tmp[r * lw + j];
                }
                dst[q * lw + j] = acc;
            }
        }
        let _ = lh;
    }

    fn up_plane(&self, src: &[f64], dst: &mut [f64]) {
        let (h, w) = self.hr_shape;
        let (_lh, lw) = self.lr_shape;
        // scatter through the same tables: exact transpose of down_plane
        let mut tmp = vec![0.0; h * lw];
        for (q, row) in self.row_table.iter().enumerate() {
            for j in 0..lw {
                let v = src[q * lw + j];
                for &(r, wgt) in row {
                    tmp[r * lw + j] += wgt * v;
                }
            }
        }
        for r in 0..h {
            for (j, row) in self.col_table.iter().enumerate() {
                let v = tmp[r * lw + j];
                for &(i, wgt) in row {
                    dst[r * w + i] += wgt * v;
                }
            }
        }
    }
}

impl LinearOperator for DownsampleOp {
    fn input_shape(&self) -> (usize, usize) {
        self.hr_shape
    }
    fn output_shape(&self) -> (usize, usize) {
        self.lr_shape
    }
    fn apply(&self, x: &ImageGrid) -> ImageGrid {
        assert_eq!(x.shape(), self.hr_shape, "downsample: input shape mismatch");
        map_planes(x, self.lr_shape, |src, dst| self.down_plane(src, dst))
    }
    fn apply_adjoint(&self, y: &ImageGrid) -> ImageGrid {
        assert_eq!(y.shape(), self.lr_shape, "downsample adjoint: input shape mismatch");
        map_planes(y, self.hr_shape, |src, dst| self.up_plane(src, dst))
    }
}

/// Composition `outer . inner`, e.g. the forward model `A = S H`.
pub struct ComposedOp<'a> {
    outer: &'a dyn LinearOperator,
    inner: &'a dyn LinearOperator,
}

/// Composes the downsampler with the blur into the forward map
/// `apply = outer(inner(x))`, `apply_adjoint = inner'(outer'(y))`.
pub fn compose_forward<'a>(
    outer: &'a dyn LinearOperator,
    inner: &'a dyn LinearOperator,
) -> Result<ComposedOp<'a>> {
    if inner.output_shape() != outer.input_shape() {
        return Err(Error::dimension(format!(
            "compose: inner output {:?} != outer input {:?}",
            inner.output_shape(),
            outer.input_shape()
        )));
    }
    Ok(ComposedOp { outer, inner })
}

impl LinearOperator for ComposedOp<'_> {
    fn input_shape(&self) -> (usize, usize) {
        self.inner.input_shape()
    }
    fn output_shape(&self) -> (usize, usize) {
        self.outer.output_shape()
    }
    fn apply(&self, x: &ImageGrid) -> ImageGrid {
        self.outer.apply(&self.inner.apply(x))
    }
    fn apply_adjoint(&self, y: &ImageGrid) -> ImageGrid {
        self.inner.apply_adjoint(&self.outer.apply_adjoint(y))
    }
}
