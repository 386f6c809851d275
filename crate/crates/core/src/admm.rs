//! ADMM drivers for jump-sparse super-resolution.
//!
//! Three variants share one loop skeleton: the anisotropic scheme splits the
//! two gradient components into separate scalar hard-threshold steps, the
//! isotropic scheme thresholds the per-pixel gradient 2-vector jointly, and
//! the convex TV baseline swaps in group soft thresholding. The quadratic
//! step is a warm-started CG solve of the normal equations; duals follow by
//! gradient ascent. Growing the penalty fast enough (`k*(1+eps)^k`) makes
//! the splitting residuals vanish, which is monitored in the trace.

use std::time::Instant;

use crate::cg::{make_admm_normal_operator, solve_spd, CgConfig};
use crate::error::{Error, Result};
use crate::grid::ImageGrid;
use crate::operators::{BoundaryCondition, LinearOperator};
use crate::prox::{apply_prox_pair, apply_prox_plane, ProxKind};
use crate::trace::{ConvergenceTrace, TraceDiagnostics, TraceHeader, TraceRecord};

/// Zero test for the *reported* jump counts (trace column, metrics).
///
/// The split variables are exactly sparse, but `u` itself carries splitting
/// noise of order `1e-4..4e-3` at the default stopping tolerance (the gap
/// `Du - t` only vanishes in the limit), so a meaningful count needs a
/// threshold at the smallest representable intensity jump, one 8-bit level.
/// Measured gradient histograms plateau over `[1/255, 1e-2]`, so the count
/// is insensitive to the exact choice.
pub const JUMP_ZERO_TOL: f64 = 1.0 / 255.0;

/// Zero test inside the objective functional: essentially exact, so the
/// functional evaluates the model as written. On solver iterates (which are
/// never exactly gradient-sparse) the term saturates and the objective
/// trace inherits the fidelity's shape.
pub const FORMAL_ZERO_TOL: f64 = 1e-12;

/// How the per-iteration penalty value `beta^k` grows, `k` starting at 1.
///
/// Only the super-linear kind meets the growth condition
/// `sum_k sqrt(k / beta^k) < inf` required for fixed-point convergence;
/// the others exist to reproduce the oscillating traces and get flagged in
/// the trace header.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum PenaltySchedule {
    /// `beta^k = value` for all k.
    Constant { value: f64 },
    /// `beta^k = beta0 * k^exponent`.
    Power { exponent: f64, beta0: f64 },
    /// `beta^k = beta0 * k * (1 + epsilon)^k`.
    SuperLinear { epsilon: f64, beta0: f64 },
}

impl PenaltySchedule {
    /// The convergence-guaranteeing default: `k * (1 + 1e-4)^k`.
    pub fn super_linear() -> Self {
        PenaltySchedule::SuperLinear {
            epsilon: 1e-4,
            beta0: 1.0,
        }
    }

    pub fn constant(value: f64) -> Self {
        PenaltySchedule::Constant { value }
    }

    pub fn power(exponent: f64) -> Self {
        PenaltySchedule::Power {
            exponent,
            beta0: 1.0,
        }
    }

    /// Penalty value at outer iteration `k >= 1`.
    pub fn value(&self, k: usize) -> f64 {
        let kf = k as f64;
        match *self {
            PenaltySchedule::Constant { value } => value,
            PenaltySchedule::Power { exponent, beta0 } => beta0 * kf.powf(exponent),
            PenaltySchedule::SuperLinear { epsilon, beta0 } => {
                beta0 * kf * (1.0 + epsilon).powi(k as i32)
            }
        }
    }

    /// Whether `sum_k sqrt(k / beta^k)` converges for this schedule.
    ///
    /// Constant: never. Power `k^e`: the series is `sum k^((1-e)/2)`, finite
    /// iff `e > 3`. Super-linear: the geometric factor always wins.
    pub fn satisfies_growth_condition(&self) -> bool {
        match *self {
            PenaltySchedule::Constant { .. } => false,
            PenaltySchedule::Power { exponent, .. } => exponent > 3.0,
            PenaltySchedule::SuperLinear { epsilon, .. } => epsilon > 0.0,
        }
    }

    /// Numeric check that the sequence increases on `1..=max_iterations`.
    pub fn is_increasing_up_to(&self, max_iterations: usize) -> bool {
        (1..max_iterations).all(|k| self.value(k + 1) > self.value(k))
    }

    pub fn validate(&self) -> Result<()> {
        let positive = match *self {
            PenaltySchedule::Constant { value } => value > 0.0,
            PenaltySchedule::Power { beta0, .. } => beta0 > 0.0,
            PenaltySchedule::SuperLinear { epsilon, beta0 } => epsilon > 0.0 && beta0 > 0.0,
        };
        if !positive {
            return Err(Error::config("penalty schedule parameters must be positive"));
        }
        Ok(())
    }

    pub fn describe(&self) -> String {
        match *self {
            PenaltySchedule::Constant { value } => format!("constant(value={value})"),
            PenaltySchedule::Power { exponent, beta0 } => {
                format!("power(exponent={exponent},beta0={beta0})")
            }
            PenaltySchedule::SuperLinear { epsilon, beta0 } => {
                format!("super_linear(epsilon={epsilon},beta0={beta0})")
            }
        }
    }
}

/// Which regularizer/prox pair the driver runs.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SolverVariant {
    /// Jump count per gradient component (p = 1), scalar hard thresholds.
    AnisoL0,
    /// Jump count on the gradient magnitude (p = 2), joint hard threshold.
    IsoL0,
    /// Convex isotropic TV comparator in the same splitting.
    IsoTvBaseline,
}

impl SolverVariant {
    pub fn name(&self) -> &'static str {
        match self {
            SolverVariant::AnisoL0 => "aniso_l0",
            SolverVariant::IsoL0 => "iso_l0",
            SolverVariant::IsoTvBaseline => "iso_tv_baseline",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "aniso_l0" => Ok(SolverVariant::AnisoL0),
            "iso_l0" => Ok(SolverVariant::IsoL0),
            "iso_tv_baseline" => Ok(SolverVariant::IsoTvBaseline),
            other => Err(Error::config(format!("unknown solver variant `{other}`"))),
        }
    }
}

/// Full solver configuration.
#[derive(Debug, Clone)]
pub struct SolverConfig {
    /// Regularization weight.
    pub mu: f64,
    pub variant: SolverVariant,
    pub schedule: PenaltySchedule,
    /// Stop when `||u_k - u_{k-1}|| / max(||u_{k-1}||, 1e-12)` drops below this.
    pub rel_change_tol: f64,
    pub max_outer_iterations: usize,
    pub cg: CgConfig,
    /// Boundary rule of the difference operators (recorded in the trace).
    pub boundary: BoundaryCondition,
    /// `beta_s = beta_ratio * beta_t` for the anisotropic scheme. The
    /// isotropic variants use a single penalty and ignore this.
    pub beta_ratio: f64,
    /// Identifier echoed into the trace header.
    pub config_hash: String,
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig {
            mu: 0.01,
            variant: SolverVariant::AnisoL0,
            schedule: PenaltySchedule::super_linear(),
            rel_change_tol: 1e-3,
            max_outer_iterations: 500,
            cg: CgConfig::default(),
            boundary: BoundaryCondition::DirichletZero,
            beta_ratio: 1.0,
            config_hash: String::new(),
        }
    }
}

impl SolverConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.mu > 0.0 && self.mu.is_finite()) {
            return Err(Error::config(format!("mu must be positive, got {}", self.mu)));
        }
        if !(self.rel_change_tol > 0.0 && self.rel_change_tol < 1.0) {
            return Err(Error::config("rel_change_tol must lie in (0, 1)"));
        }
        if self.max_outer_iterations == 0 {
            return Err(Error::config("max_outer_iterations must be positive"));
        }
        if !(self.beta_ratio > 0.0) {
            return Err(Error::config("beta_ratio must be positive"));
        }
        self.schedule.validate()
    }
}

/// Jump-count flavor: per-component (p = 1) or joint magnitude (p = 2).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum JumpNorm {
    PerComponent,
    Magnitude,
}

/// Number of nonzero gradient entries of `u` with an explicit zero test.
///
/// `PerComponent` counts nonzeros of `Dh u` plus nonzeros of `Dv u`;
/// `Magnitude` counts pixels where either component is nonzero. The result
/// lies in `[0, 2N]` resp. `[0, N]`.
pub fn jump_count_with_tol(
    u: &ImageGrid,
    dh: &dyn LinearOperator,
    dv: &dyn LinearOperator,
    norm: JumpNorm,
    tol: f64,
) -> usize {
    let gh = dh.apply(u);
    let gv = dv.apply(u);
    match norm {
        JumpNorm::PerComponent => {
            let nz = |g: &ImageGrid| g.data().iter().filter(|v| v.abs() > tol).count();
            nz(&gh) + nz(&gv)
        }
        JumpNorm::Magnitude => gh
            .data()
            .iter()
            .zip(gv.data())
            .filter(|(h, v)| h.abs() > tol || v.abs() > tol)
            .count(),
    }
}

/// Reported jump count at the quantization-aware zero test
/// ([`JUMP_ZERO_TOL`]).
pub fn jump_count(
    u: &ImageGrid,
    dh: &dyn LinearOperator,
    dv: &dyn LinearOperator,
    norm: JumpNorm,
) -> usize {
    jump_count_with_tol(u, dh, dv, norm, JUMP_ZERO_TOL)
}

/// Data fidelity `0.5 * ||A u - g||^2`.
pub fn fidelity(u: &ImageGrid, g: &ImageGrid, a: &dyn LinearOperator) -> Result<f64> {
    if g.shape() != a.output_shape() || u.shape() != a.input_shape() {
        return Err(Error::dimension("fidelity: shapes inconsistent with operator"));
    }
    let r = a.apply(u).sub(g)?;
    Ok(0.5 * r.norm().powi(2))
}

/// The jump-sparse objective: fidelity plus `mu` times the jump count, with
/// the essentially-exact zero test ([`FORMAL_ZERO_TOL`]).
pub fn objective(
    u: &ImageGrid,
    g: &ImageGrid,
    a: &dyn LinearOperator,
    dh: &dyn LinearOperator,
    dv: &dyn LinearOperator,
    mu: f64,
    norm: JumpNorm,
) -> Result<f64> {
    Ok(fidelity(u, g, a)?
        + mu * jump_count_with_tol(u, dh, dv, norm, FORMAL_ZERO_TOL) as f64)
}

/// Convex comparator objective: fidelity + `mu` * sum of gradient magnitudes.
pub fn objective_tv(
    u: &ImageGrid,
    g: &ImageGrid,
    a: &dyn LinearOperator,
    dh: &dyn LinearOperator,
    dv: &dyn LinearOperator,
    mu: f64,
) -> Result<f64> {
    let gh = dh.apply(u);
    let gv = dv.apply(u);
    let tv: f64 = gh
        .data()
        .iter()
        .zip(gv.data())
        .map(|(h, v)| (h * h + v * v).sqrt())
        .sum();
    Ok(fidelity(u, g, a)? + mu * tv)
}

/// Ratio of the prox residual `||t_next - f||` to its a priori bound
/// `sqrt(2 * mu * N / beta)`, where `f` is the prox input plane. Minimality
/// of the hard-threshold step forces the ratio into `[0, 1]`.
pub fn step1_residual_ratio(
    t_next: &ImageGrid,
    prox_input: &ImageGrid,
    mu: f64,
    beta: f64,
) -> Result<f64> {
    if !t_next.same_shape(prox_input) {
        return Err(Error::dimension("step1 ratio: shape mismatch"));
    }
    let n = prox_input.plane_len() as f64;
    let bound = (2.0 * mu * n / beta).sqrt();
    Ok(t_next.sub(prox_input)?.norm() / bound)
}

/// True when the prox-step residual honors its bound (up to roundoff).
pub fn theorem_residual_bound_check(
    t_next: &ImageGrid,
    prox_input: &ImageGrid,
    mu: f64,
    beta: f64,
) -> Result<bool> {
    Ok(step1_residual_ratio(t_next, prox_input, mu, beta)? <= 1.0 + 1e-12)
}

/// Gradient ascent on the multiplier: `lambda - beta * (split - grad_u)`.
pub(crate) fn dual_ascent(
    lambda: &ImageGrid,
    beta: f64,
    split: &ImageGrid,
    grad_u: &ImageGrid,
) -> Result<ImageGrid> {
    lambda.axpy(-beta, &split.sub(grad_u)?)
}

/// `u0 = S' g`: the exact adjoint of the downsampler applied to the data.
pub fn adjoint_upsample_init(s: &dyn LinearOperator, g: &ImageGrid) -> ImageGrid {
    s.apply_adjoint(g)
}

/// Bilinear interpolation to `factor` times the size; the alternative
/// initializer for callers that prefer an intensity-preserving start.
pub fn bilinear_upsample_init(g: &ImageGrid, factor: usize) -> Result<ImageGrid> {
    if factor == 0 {
        return Err(Error::config("upsample factor must be positive"));
    }
    let (lh, lw) = g.shape();
    let (h, w) = (lh * factor, lw * factor);
    let mut planes = Vec::with_capacity(g.channels());
    for c in 0..g.channels() {
        let src = g.plane(c);
        let mut out = ImageGrid::zeros(h, w);
        for r in 0..h {
            for q in 0..w {
                let y = ((r as f64 + 0.5) / factor as f64 - 0.5).clamp(0.0, lh as f64 - 1.0);
                let x = ((q as f64 + 0.5) / factor as f64 - 0.5).clamp(0.0, lw as f64 - 1.0);
                let (r0, c0) = (y.floor() as usize, x.floor() as usize);
                let (r1, c1) = ((r0 + 1).min(lh - 1), (c0 + 1).min(lw - 1));
                let (fy, fx) = (y - r0 as f64, x - c0 as f64);
                let v = (1.0 - fy) * ((1.0 - fx) * src[r0 * lw + c0] + fx * src[r0 * lw + c1])
                    + fy * ((1.0 - fx) * src[r1 * lw + c0] + fx * src[r1 * lw + c1]);
                out.data_mut()[r * w + q] = v;
            }
        }
        planes.push(out);
    }
    ImageGrid::from_channels(&planes)
}

struct LoopSetup<'a> {
    g: &'a ImageGrid,
    a: &'a dyn LinearOperator,
    dh: &'a dyn LinearOperator,
    dv: &'a dyn LinearOperator,
    u0: &'a ImageGrid,
    cfg: &'a SolverConfig,
}

fn check_setup(setup: &LoopSetup<'_>, expected: SolverVariant) -> Result<()> {
    let cfg = setup.cfg;
    cfg.validate()?;
    if cfg.variant != expected {
        return Err(Error::config(format!(
            "driver expects variant {}, config says {}",
            expected.name(),
            cfg.variant.name()
        )));
    }
    if setup.g.channels() != 1 || setup.u0.channels() != 1 {
        return Err(Error::dimension(
            "solver works on single-channel grids; split channels first",
        ));
    }
    if setup.g.shape() != setup.a.output_shape() {
        return Err(Error::dimension(format!(
            "data shape {:?} does not match forward operator output {:?}",
            setup.g.shape(),
            setup.a.output_shape()
        )));
    }
    if setup.u0.shape() != setup.a.input_shape() {
        return Err(Error::dimension(format!(
            "initializer shape {:?} does not match forward operator input {:?}",
            setup.u0.shape(),
            setup.a.input_shape()
        )));
    }
    let hr = setup.a.input_shape();
    if setup.dh.input_shape() != hr
        || setup.dh.output_shape() != hr
        || setup.dv.input_shape() != hr
        || setup.dv.output_shape() != hr
    {
        return Err(Error::dimension("difference operators must preserve the HR shape"));
    }
    Ok(())
}

fn trace_header(cfg: &SolverConfig) -> TraceHeader {
    TraceHeader {
        config_hash: cfg.config_hash.clone(),
        variant: cfg.variant.name().to_string(),
        schedule: cfg.schedule.describe(),
        boundary: cfg.boundary.name().to_string(),
        // the convex baseline is exempt from the growth condition
        schedule_warning: cfg.variant != SolverVariant::IsoTvBaseline
            && !cfg.schedule.satisfies_growth_condition(),
        boundary_warning: cfg.boundary == BoundaryCondition::Periodic,
    }
}

fn rel_change(u_next: &ImageGrid, u_prev: &ImageGrid) -> Result<f64> {
    Ok(u_next.sub(u_prev)?.norm() / u_prev.norm().max(1e-12))
}

fn run_loop(setup: LoopSetup<'_>) -> Result<(ImageGrid, ConvergenceTrace)> {
    let LoopSetup {
        g,
        a,
        dh,
        dv,
        u0,
        cfg,
    } = setup;
    let variant = cfg.variant;
    let mut u = u0.clone();
    let hr = u.shape();
    let mut lambda_h = ImageGrid::zeros(hr.0, hr.1);
    let mut lambda_v = ImageGrid::zeros(hr.0, hr.1);

    let mut trace = ConvergenceTrace {
        header: trace_header(cfg),
        records: Vec::new(),
        diagnostics: TraceDiagnostics::default(),
    };

    for k in 1..=cfg.max_outer_iterations {
        let started = Instant::now();
        let beta_t = cfg.schedule.value(k);
        let beta_s = match variant {
            SolverVariant::AnisoL0 => cfg.beta_ratio * beta_t,
            _ => beta_t,
        };

        // prox step on the split variables
        let fh = dh.apply(&u).axpy(1.0 / beta_t, &lambda_h)?;
        let fv = dv.apply(&u).axpy(1.0 / beta_s, &lambda_v)?;
        let (split_h, split_v) = match variant {
            SolverVariant::AnisoL0 => {
                let th = apply_prox_plane(&fh, 2.0 * cfg.mu / beta_t);
                let tv = apply_prox_plane(&fv, 2.0 * cfg.mu / beta_s);
                let ratio_h = step1_residual_ratio(&th, &fh, cfg.mu, beta_t)?;
                let ratio_v = step1_residual_ratio(&tv, &fv, cfg.mu, beta_s)?;
                let ratio = ratio_h.max(ratio_v);
                debug_assert!(ratio <= 1.0 + 1e-12, "prox residual bound violated");
                trace.diagnostics.max_step1_ratio =
                    trace.diagnostics.max_step1_ratio.max(ratio);
                (th, tv)
            }
            SolverVariant::IsoL0 => {
                let (zh, zv) =
                    apply_prox_pair(&fh, &fv, 2.0 * cfg.mu / beta_t, ProxKind::L0TwoD)?;
                // stacked form of the same minimality bound
                let res =
                    (zh.sub(&fh)?.norm().powi(2) + zv.sub(&fv)?.norm().powi(2)).sqrt();
                let bound = (2.0 * cfg.mu * u.plane_len() as f64 / beta_t).sqrt();
                let ratio = res / bound;
                debug_assert!(ratio <= 1.0 + 1e-12, "prox residual bound violated");
                trace.diagnostics.max_step1_ratio =
                    trace.diagnostics.max_step1_ratio.max(ratio);
                (zh, zv)
            }
            SolverVariant::IsoTvBaseline => {
                apply_prox_pair(&fh, &fv, 2.0 * cfg.mu / beta_t, ProxKind::L1Group)?
            }
        };

        // quadratic step, warm-started at the previous iterate
        let normal = make_admm_normal_operator(a, dh, dv, beta_t, beta_s)?;
        let rhs = crate::cg::make_admm_rhs(
            a, dh, dv, g, &split_h, &split_v, &lambda_h, &lambda_v, beta_t, beta_s,
        )?;
        let (u_next, cg_report) = solve_spd(&normal, &rhs, &u, &cfg.cg)?;
        if !cg_report.converged {
            trace.diagnostics.cg_failures += 1;
        }

        // dual ascent
        let gh_next = dh.apply(&u_next);
        let gv_next = dv.apply(&u_next);
        lambda_h = dual_ascent(&lambda_h, beta_t, &split_h, &gh_next)?;
        lambda_v = dual_ascent(&lambda_v, beta_s, &split_v, &gv_next)?;

        if !(u_next.is_finite() && lambda_h.is_finite() && lambda_v.is_finite()) {
            return Err(Error::numerical(
                Some(k),
                "iterate or dual became non-finite",
            ));
        }

        let change = rel_change(&u_next, &u)?;
        let (obj, jumps) = match variant {
            SolverVariant::AnisoL0 => (
                objective(&u_next, g, a, dh, dv, cfg.mu, JumpNorm::PerComponent)?,
                jump_count(&u_next, dh, dv, JumpNorm::PerComponent),
            ),
            SolverVariant::IsoL0 => (
                objective(&u_next, g, a, dh, dv, cfg.mu, JumpNorm::Magnitude)?,
                jump_count(&u_next, dh, dv, JumpNorm::Magnitude),
            ),
            SolverVariant::IsoTvBaseline => (
                objective_tv(&u_next, g, a, dh, dv, cfg.mu)?,
                jump_count(&u_next, dh, dv, JumpNorm::Magnitude),
            ),
        };
        trace.records.push(TraceRecord {
            iter: k,
            beta: beta_t,
            objective: obj,
            fidelity: fidelity(&u_next, g, a)?,
            jump_count: jumps,
            residual_h: gh_next.sub(&split_h)?.norm(),
            residual_v: gv_next.sub(&split_v)?.norm(),
            rel_change: change,
            cg_iters: cg_report.iterations_used,
            wall_ms: started.elapsed().as_secs_f64() * 1e3,
        });

        u = u_next;
        if change < cfg.rel_change_tol {
            trace.diagnostics.converged = true;
            break;
        }
    }
    Ok((u, trace))
}

/// Anisotropic jump-sparse driver (scalar hard thresholds per component).
pub fn solve_aniso(
    g: &ImageGrid,
    a: &dyn LinearOperator,
    dh: &dyn LinearOperator,
    dv: &dyn LinearOperator,
    u0: &ImageGrid,
    cfg: &SolverConfig,
) -> Result<(ImageGrid, ConvergenceTrace)> {
    let setup = LoopSetup { g, a, dh, dv, u0, cfg };
    check_setup(&setup, SolverVariant::AnisoL0)?;
    run_loop(setup)
}

/// Isotropic jump-sparse driver (joint hard threshold on gradient pairs).
pub fn solve_iso(
    g: &ImageGrid,
    a: &dyn LinearOperator,
    dh: &dyn LinearOperator,
    dv: &dyn LinearOperator,
    u0: &ImageGrid,
    cfg: &SolverConfig,
) -> Result<(ImageGrid, ConvergenceTrace)> {
    let setup = LoopSetup { g, a, dh, dv, u0, cfg };
    check_setup(&setup, SolverVariant::IsoL0)?;
    run_loop(setup)
}

/// Convex isotropic TV baseline in the same splitting (group soft threshold,
/// constant penalty allowed).
pub fn solve_itv_baseline(
    g: &ImageGrid,
    a: &dyn LinearOperator,
    dh: &dyn LinearOperator,
    dv: &dyn LinearOperator,
    u0: &ImageGrid,
    cfg: &SolverConfig,
) -> Result<(ImageGrid, ConvergenceTrace)> {
    let setup = LoopSetup { g, a, dh, dv, u0, cfg };
    check_setup(&setup, SolverVariant::IsoTvBaseline)?;
    run_loop(setup)
}

/// Dispatches on `cfg.variant`.
pub fn solve(
    g: &ImageGrid,
    a: &dyn LinearOperator,
    dh: &dyn LinearOperator,
    dv: &dyn LinearOperator,
    u0: &ImageGrid,
    cfg: &SolverConfig,
) -> Result<(ImageGrid, ConvergenceTrace)> {
    match cfg.variant {
        SolverVariant::AnisoL0 => solve_aniso(g, a, dh, dv, u0, cfg),
        SolverVariant::IsoL0 => solve_iso(g, a, dh, dv, u0, cfg),
        SolverVariant::IsoTvBaseline => solve_itv_baseline(g, a, dh, dv, u0, cfg),
    }
}

/// Runs the configured solver independently on every channel and restacks
/// the results; one trace per channel.
pub fn solve_per_channel(
    g: &ImageGrid,
    a: &dyn LinearOperator,
    dh: &dyn LinearOperator,
    dv: &dyn LinearOperator,
    u0: &ImageGrid,
    cfg: &SolverConfig,
) -> Result<(ImageGrid, Vec<ConvergenceTrace>)> {
    if g.channels() != u0.channels() {
        return Err(Error::dimension(
            "data and initializer must have the same channel count",
        ));
    }
    let mut planes = Vec::with_capacity(g.channels());
    let mut traces = Vec::with_capacity(g.channels());
    for c in 0..g.channels() {
        let gc = g.extract_channel(c)?;
        let uc = u0.extract_channel(c)?;
        let (u, trace) = solve(&gc, a, dh, dv, &uc, cfg)?;
        planes.push(u);
        traces.push(trace);
    }
    Ok((ImageGrid::from_channels(&planes)?, traces))
}

/// Verifies `lambda_next / beta == grad_u - split + lambda / beta` — the
/// rearranged dual update — to roundoff. Used by tests and diagnostics.
pub fn dual_update_identity_gap(
    lambda: &ImageGrid,
    lambda_next: &ImageGrid,
    beta: f64,
    split: &ImageGrid,
    grad_u: &ImageGrid,
) -> Result<f64> {
    let lhs = lambda_next.scaled(1.0 / beta);
    let rhs = grad_u
        .sub(split)?
        .add(&lambda.scaled(1.0 / beta))?;
    Ok(lhs.sub(&rhs)?.norm())
}
