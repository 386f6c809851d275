//! The four pipeline stages: simulate, solve, evaluate, bench.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::time::Instant;

use l0sr::admm::{
    adjoint_upsample_init, bilinear_upsample_init, jump_count, solve_per_channel, JumpNorm,
    SolverVariant,
};
use l0sr::error::{Error, Result};
use l0sr::grid::{clamp_to_unit, ImageGrid};
use l0sr::metrics::{jaccard, otsu_binarize, psnr, ssim, BinaryMask, SsimConfig};
use l0sr::operators::{
    compose_forward, make_blur, make_downsample, make_gradient_h, make_gradient_v,
    LinearOperator,
};
use l0sr::sim::degrade;
use l0sr::trace::ConvergenceTrace;

use crate::config::ExperimentConfig;

/// Evaluation numbers for one reconstruction. Optional entries are absent
/// when the pipeline stage that produces them did not run (no binarization,
/// no solver timing, image too small for the SSIM window).
#[derive(Debug, Clone, Default)]
pub struct MetricsReport {
    pub psnr: f64,
    pub ssim: Option<f64>,
    pub jaccard: Option<f64>,
    pub psnr_b: Option<f64>,
    pub ssim_b: Option<f64>,
    pub jump_count_p1: usize,
    pub jump_count_p2: usize,
    pub iterations: Option<usize>,
    pub wall_ms: Option<f64>,
}

fn fmt_opt<T: std::fmt::Display>(v: &Option<T>) -> String {
    v.as_ref().map(|x| x.to_string()).unwrap_or_default()
}

impl MetricsReport {
    pub fn to_key_values(&self) -> String {
        let mut out = String::new();
        writeln!(out, "psnr = {}", self.psnr).unwrap();
        writeln!(out, "ssim = {}", fmt_opt(&self.ssim)).unwrap();
        writeln!(out, "jaccard = {}", fmt_opt(&self.jaccard)).unwrap();
        writeln!(out, "psnr_b = {}", fmt_opt(&self.psnr_b)).unwrap();
        writeln!(out, "ssim_b = {}", fmt_opt(&self.ssim_b)).unwrap();
        writeln!(out, "jump_count_p1 = {}", self.jump_count_p1).unwrap();
        writeln!(out, "jump_count_p2 = {}", self.jump_count_p2).unwrap();
        writeln!(out, "iterations = {}", fmt_opt(&self.iterations)).unwrap();
        writeln!(out, "wall_ms = {}", fmt_opt(&self.wall_ms)).unwrap();
        out
    }

    pub const CSV_COLUMNS: &'static str =
        "psnr,ssim,jaccard,psnr_b,ssim_b,jump_count_p1,jump_count_p2,iterations,wall_ms";

    pub fn to_csv_row(&self) -> String {
        format!(
            "{},{},{},{},{},{},{},{},{}",
            self.psnr,
            fmt_opt(&self.ssim),
            fmt_opt(&self.jaccard),
            fmt_opt(&self.psnr_b),
            fmt_opt(&self.ssim_b),
            self.jump_count_p1,
            self.jump_count_p2,
            fmt_opt(&self.iterations),
            fmt_opt(&self.wall_ms),
        )
    }
}

fn read_any(path: &Path) -> Result<ImageGrid> {
    if path.extension().and_then(|e| e.to_str()) == Some("f64") {
        l0sr::io::read_f64_dump(path)
    } else {
        l0sr::io::read_image(path)
    }
}

/// Simulates the LR acquisition from the HR input and writes both, each as
/// an 8-bit export plus a raw f64 dump, with a metadata sidecar.
pub fn cmd_simulate(cfg: &ExperimentConfig) -> Result<()> {
    let out = cfg.output_dir()?;
    std::fs::create_dir_all(&out)?;
    let hr = cfg.load_hr_input()?;
    let spec = cfg.degradation_spec()?;
    let lr = degrade(&hr, &spec)?;

    write_pair(&hr, &out, "hr")?;
    write_pair(&lr, &out, "lr")?;

    let mut meta = String::new();
    writeln!(meta, "config_hash = {}", cfg.hash_hex()).unwrap();
    writeln!(meta, "hr_height = {}", hr.height()).unwrap();
    writeln!(meta, "hr_width = {}", hr.width()).unwrap();
    writeln!(meta, "channels = {}", hr.channels()).unwrap();
    writeln!(meta, "lr_height = {}", lr.height()).unwrap();
    writeln!(meta, "lr_width = {}", lr.width()).unwrap();
    writeln!(meta, "sigma_h = {}", spec.blur.sigma).unwrap();
    writeln!(meta, "radius = {}", spec.blur.radius).unwrap();
    writeln!(meta, "blur_boundary = {}", spec.blur.boundary.name()).unwrap();
    writeln!(meta, "factor = {}", spec.down.factor).unwrap();
    writeln!(meta, "kernel = {}", spec.down.kernel.name()).unwrap();
    writeln!(meta, "noise_sigma = {}", spec.noise_sigma).unwrap();
    writeln!(meta, "noise_seed = {}", spec.seed).unwrap();
    std::fs::write(out.join("simulate_meta.txt"), meta)?;

    println!(
        "simulate: {}x{} -> {}x{} (L={}, sigma_h={}, noise={}) -> {}",
        hr.height(),
        hr.width(),
        lr.height(),
        lr.width(),
        spec.down.factor,
        spec.blur.sigma,
        spec.noise_sigma,
        out.display()
    );
    Ok(())
}

fn write_pair(img: &ImageGrid, dir: &Path, stem: &str) -> Result<()> {
    l0sr::io::write_png(&clamp_to_unit(img), &dir.join(format!("{stem}.png")))?;
    l0sr::io::write_f64_dump(img, &dir.join(format!("{stem}.f64")))?;
    Ok(())
}

struct SolveOutput {
    variant: SolverVariant,
    mu: f64,
    u: ImageGrid,
    traces: Vec<ConvergenceTrace>,
    wall_ms: f64,
}

impl SolveOutput {
    fn converged(&self) -> bool {
        self.traces.iter().all(|t| t.diagnostics.converged)
    }

    fn iterations(&self) -> usize {
        self.traces.iter().map(|t| t.records.len()).max().unwrap_or(0)
    }

    fn tag(&self) -> String {
        format!("{}_mu{}", self.variant.name(), self.mu)
    }
}

fn run_sweep(cfg: &ExperimentConfig, lr: &ImageGrid) -> Result<Vec<SolveOutput>> {
    let factor = cfg.usize_key("degrade.factor")?;
    let hr_shape = (lr.height() * factor, lr.width() * factor);
    let blur = make_blur(hr_shape, &cfg.blur_spec()?)?;
    let down = make_downsample(hr_shape, &cfg.downsample_spec()?)?;
    let forward = compose_forward(&down, &blur)?;

    let mut outputs = Vec::new();
    for (variant, mu) in cfg.sweep()? {
        let solver_cfg = cfg.solver_config(variant, mu)?;
        let dh = make_gradient_h(hr_shape, solver_cfg.boundary);
        let dv = make_gradient_v(hr_shape, solver_cfg.boundary);
        let u0 = match cfg.get("solver.init") {
            Some("adjoint") | None => down.apply_adjoint(lr),
            Some("bilinear") => bilinear_upsample_init(lr, factor)?,
            Some(other) => {
                return Err(Error::config(format!("unknown initializer `{other}`")))
            }
        };
        let started = Instant::now();
        let (u, traces) = solve_per_channel(lr, &forward, &dh, &dv, &u0, &solver_cfg)?;
        outputs.push(SolveOutput {
            variant,
            mu,
            u,
            traces,
            wall_ms: started.elapsed().as_secs_f64() * 1e3,
        });
    }
    Ok(outputs)
}

/// Runs the configured (variant, mu) sweep on the LR input and writes each
/// reconstruction plus its convergence trace(s).
pub fn cmd_solve(cfg: &ExperimentConfig) -> Result<()> {
    let out = cfg.output_dir()?;
    std::fs::create_dir_all(&out)?;
    let lr_path = match cfg.get("solve.lr") {
        Some(p) => PathBuf::from(p),
        None => out.join("lr.f64"),
    };
    let lr = read_any(&lr_path)?;
    let outputs = run_sweep(cfg, &lr)?;

    let mut all_converged = true;
    for o in &outputs {
        let tag = o.tag();
        write_pair(&o.u, &out, &format!("sr_{tag}"))?;
        if o.traces.len() == 1 {
            std::fs::write(out.join(format!("trace_{tag}.csv")), o.traces[0].to_csv())?;
        } else {
            for (c, t) in o.traces.iter().enumerate() {
                std::fs::write(out.join(format!("trace_{tag}_c{c}.csv")), t.to_csv())?;
            }
        }
        all_converged &= o.converged();
        println!(
            "solve: {} iterations={} converged={} ({:.0} ms)",
            tag,
            o.iterations(),
            o.converged(),
            o.wall_ms
        );
    }
    if !all_converged {
        return Err(Error::numerical(
            None,
            "one or more solves hit the outer iteration cap without converging",
        ));
    }
    Ok(())
}

pub struct EvaluateOptions {
    pub binarize: bool,
    pub crop: usize,
    pub kmeans_k: Option<usize>,
    pub kmeans_seed: u64,
    pub out_dir: Option<PathBuf>,
}

fn center_crop(img: &ImageGrid, border: usize) -> Result<ImageGrid> {
    if border == 0 {
        return Ok(img.clone());
    }
    let (h, w) = img.shape();
    if 2 * border >= h || 2 * border >= w {
        return Err(Error::dimension(format!(
            "crop {border} leaves no pixels of a {h}x{w} image"
        )));
    }
    let (nh, nw) = (h - 2 * border, w - 2 * border);
    let mut planes = Vec::with_capacity(img.channels());
    for c in 0..img.channels() {
        let src = img.plane(c);
        let mut dst = ImageGrid::zeros(nh, nw);
        for r in 0..nh {
            for q in 0..nw {
                dst.data_mut()[r * nw + q] = src[(r + border) * w + q + border];
            }
        }
        planes.push(dst);
    }
    ImageGrid::from_channels(&planes)
}

/// Computes the metric set for a reconstruction against its ground truth.
pub fn evaluate_pair(
    sr: &ImageGrid,
    gt: &ImageGrid,
    opts: &EvaluateOptions,
) -> Result<MetricsReport> {
    let sr = center_crop(sr, opts.crop)?;
    let gt = center_crop(gt, opts.crop)?;
    if !sr.same_shape(&gt) {
        return Err(Error::dimension(format!(
            "shapes differ after crop: {:?}x{} vs {:?}x{}",
            sr.shape(),
            sr.channels(),
            gt.shape(),
            gt.channels()
        )));
    }
    let sr_unit = clamp_to_unit(&sr);
    let gt_unit = clamp_to_unit(&gt);

    let dh = make_gradient_h(sr.shape(), Default::default());
    let dv = make_gradient_v(sr.shape(), Default::default());
    let mut report = MetricsReport {
        psnr: psnr(&sr_unit, &gt_unit)?,
        ssim: ssim(&sr_unit, &gt_unit, &SsimConfig::default()).ok(),
        jump_count_p1: jump_count(&sr_unit, &dh, &dv, JumpNorm::PerComponent),
        jump_count_p2: jump_count(&sr_unit, &dh, &dv, JumpNorm::Magnitude),
        ..MetricsReport::default()
    };

    if opts.binarize {
        if sr.channels() != 1 {
            return Err(Error::dimension("binarized metrics need a single channel"));
        }
        let (mask_sr, _) = otsu_binarize(&sr_unit)?;
        let (mask_gt, _) = otsu_binarize(&gt_unit)?;
        report.jaccard = Some(jaccard(&mask_sr, &mask_gt)?);
        let bin_sr = mask_sr.to_grid();
        let bin_gt = mask_gt.to_grid();
        report.psnr_b = Some(psnr(&bin_sr, &bin_gt)?);
        report.ssim_b = ssim(&bin_sr, &bin_gt, &SsimConfig::default()).ok();
    }
    Ok(report)
}

/// Scores one reconstruction file against a ground-truth file and writes the
/// report as key=value text plus a one-row CSV.
pub fn cmd_evaluate(sr_path: &Path, gt_path: &Path, opts: &EvaluateOptions) -> Result<()> {
    let sr = read_any(sr_path)?;
    let gt = read_any(gt_path)?;
    let report = evaluate_pair(&sr, &gt, opts)?;

    if let Some(k) = opts.kmeans_k {
        // label map written next to the metrics for visual inspection
        let labels = l0sr::metrics::kmeans_labels(&clamp_to_unit(&sr), k, opts.kmeans_seed, 100)?;
        let scale = if k > 1 { (k - 1) as f64 } else { 1.0 };
        let data = labels.iter().map(|&l| l as f64 / scale).collect();
        let label_img = ImageGrid::from_vec(sr.height(), sr.width(), 1, data)?;
        let dir = opts
            .out_dir
            .clone()
            .unwrap_or_else(|| sr_path.parent().unwrap_or(Path::new(".")).to_path_buf());
        std::fs::create_dir_all(&dir)?;
        l0sr::io::write_png(&label_img, &dir.join(format!("kmeans_{k}.png")))?;
    }

    print!("{}", report.to_key_values());
    let stem = sr_path
        .file_stem()
        .and_then(|s| s.to_str())
        .unwrap_or("metrics");
    let dir = opts
        .out_dir
        .clone()
        .unwrap_or_else(|| sr_path.parent().unwrap_or(Path::new(".")).to_path_buf());
    std::fs::create_dir_all(&dir)?;
    std::fs::write(dir.join(format!("metrics_{stem}.txt")), report.to_key_values())?;
    std::fs::write(
        dir.join(format!("metrics_{stem}.csv")),
        format!("{}\n{}\n", MetricsReport::CSV_COLUMNS, report.to_csv_row()),
    )?;
    Ok(())
}

/// End-to-end comparison: simulate once, run the whole sweep, score every
/// entry against the ground truth, and emit one CSV row per (variant, mu).
pub fn cmd_bench(cfg: &ExperimentConfig) -> Result<()> {
    let out = cfg.output_dir()?;
    std::fs::create_dir_all(&out)?;
    let hr = cfg.load_hr_input()?;
    let spec = cfg.degradation_spec()?;
    let lr = degrade(&hr, &spec)?;
    write_pair(&hr, &out, "hr")?;
    write_pair(&lr, &out, "lr")?;

    let binarize = cfg.bool_key("eval.binarize")?;
    let crop = cfg.usize_key("eval.crop")?;
    let outputs = run_sweep(cfg, &lr)?;

    let mut csv = format!("variant,mu,converged,{}\n", MetricsReport::CSV_COLUMNS);
    let mut all_converged = true;
    for o in &outputs {
        let tag = o.tag();
        write_pair(&o.u, &out, &format!("sr_{tag}"))?;
        for (c, t) in o.traces.iter().enumerate() {
            let name = if o.traces.len() == 1 {
                format!("trace_{tag}.csv")
            } else {
                format!("trace_{tag}_c{c}.csv")
            };
            std::fs::write(out.join(name), t.to_csv())?;
        }
        let opts = EvaluateOptions {
            binarize,
            crop,
            kmeans_k: None,
            kmeans_seed: 0,
            out_dir: None,
        };
        let mut report = evaluate_pair(&o.u, &hr, &opts)?;
        report.iterations = Some(o.iterations());
        report.wall_ms = Some(o.wall_ms);
        all_converged &= o.converged();
        writeln!(
            csv,
            "{},{},{},{}",
            o.variant.name(),
            o.mu,
            o.converged(),
            report.to_csv_row()
        )
        .unwrap();
        println!(
            "bench: {:16} mu={:<8} iter={:4} psnr={:6.2} converged={}",
            o.variant.name(),
            o.mu,
            o.iterations(),
            report.psnr,
            o.converged()
        );
    }
    std::fs::write(out.join("bench.csv"), csv)?;
    if !all_converged {
        return Err(Error::numerical(
            None,
            "one or more sweep entries did not converge",
        ));
    }
    Ok(())
}
