//! Flat `key = value` experiment configuration.
//!
//! One section-prefixed namespace (`degrade.sigma_h`, `solver.mu`, ...) in a
//! plain text file: trivially diffable and parseable anywhere. Every key has
//! a default except the input source. `--set key=value` overrides parsed
//! values; unknown keys are rejected up front.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

use l0sr::admm::{PenaltySchedule, SolverConfig, SolverVariant};
use l0sr::cg::CgConfig;
use l0sr::error::{Error, Result};
use l0sr::operators::{
    BlurSpec, BoundaryCondition, DownsampleKernel, DownsampleSpec,
};
use l0sr::sim::{DegradationSpec, SyntheticPattern};

/// (key, default, documentation) for every supported key. An empty default
/// means "unset".
const KNOWN_KEYS: &[(&str, &str, &str)] = &[
    ("input.image", "", "path of the HR input image (PNG/PGM/f64)"),
    ("input.pattern", "", "synthetic pattern: qr_like_grid | piecewise_constant_blocks | single_edge"),
    ("input.height", "64", "synthetic pattern height"),
    ("input.width", "64", "synthetic pattern width"),
    ("input.module_px", "5", "module size for qr_like_grid"),
    ("input.blocks", "6", "grid size for piecewise_constant_blocks"),
    ("input.seed", "42", "pattern seed"),
    ("degrade.sigma_h", "1.0", "Gaussian PSF standard deviation (pixels)"),
    ("degrade.radius", "", "PSF truncation radius; default ceil(3*sigma)"),
    ("degrade.boundary", "periodic", "blur boundary: periodic | dirichlet_zero"),
    ("degrade.factor", "2", "downsampling factor L"),
    ("degrade.kernel", "lanczos3", "downsample kernel: lanczos3 | lanczos2 | box"),
    ("degrade.noise_sigma", "0.01", "additive Gaussian noise level"),
    ("degrade.seed", "42", "noise seed"),
    ("solver.mu", "0.01", "regularization weight(s), comma-separated for sweeps"),
    ("solver.variant", "aniso_l0", "variant(s): aniso_l0 | iso_l0 | iso_tv_baseline, comma-separated"),
    ("solver.schedule", "super_linear", "penalty schedule: super_linear | constant | power"),
    ("solver.epsilon", "1e-4", "super_linear epsilon"),
    ("solver.beta0", "1.0", "schedule multiplier (constant value for schedule=constant)"),
    ("solver.exponent", "0.5", "power schedule exponent"),
    ("solver.rel_change_tol", "1e-3", "outer stopping tolerance"),
    ("solver.max_outer_iterations", "500", "outer iteration cap"),
    ("solver.beta_ratio", "1.0", "beta_s / beta_t ratio (anisotropic)"),
    ("solver.boundary", "dirichlet_zero", "difference-operator boundary"),
    ("solver.init", "adjoint", "initializer: adjoint | bilinear"),
    ("solve.lr", "", "LR input for solve; default <output.dir>/lr.f64"),
    ("cg.rel_tolerance", "1e-6", "inner CG relative tolerance"),
    ("cg.max_iterations", "200", "inner CG iteration cap"),
    ("eval.binarize", "false", "Otsu-binarize outputs and score masks"),
    ("eval.kmeans_k", "", "optional k for k-means labelling"),
    ("eval.crop", "0", "center-crop border width before metrics"),
    ("output.dir", "out", "output directory"),
];

#[derive(Debug, Clone)]
pub struct ExperimentConfig {
    values: BTreeMap<String, String>,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        let values = KNOWN_KEYS
            .iter()
            .filter(|(_, default, _)| !default.is_empty())
            .map(|(k, d, _)| (k.to_string(), d.to_string()))
            .collect();
        ExperimentConfig { values }
    }
}

impl ExperimentConfig {
    pub fn from_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        let mut cfg = ExperimentConfig::default();
        cfg.apply_text(&text)?;
        Ok(cfg)
    }

    /// Applies `key = value` lines; `#` starts a comment.
    pub fn apply_text(&mut self, text: &str) -> Result<()> {
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| {
                Error::config(format!("line {}: expected `key = value`", lineno + 1))
            })?;
            self.set(key.trim(), value.trim())?;
        }
        Ok(())
    }

    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        if !KNOWN_KEYS.iter().any(|(k, _, _)| *k == key) {
            return Err(Error::config(format!("unknown config key `{key}`")));
        }
        if value.is_empty() {
            self.values.remove(key);
        } else {
            self.values.insert(key.to_string(), value.to_string());
        }
        Ok(())
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.values.get(key).map(|s| s.as_str())
    }

    fn require(&self, key: &str) -> Result<&str> {
        self.get(key)
            .ok_or_else(|| Error::config(format!("missing required key `{key}`")))
    }

    fn parse_key<T: std::str::FromStr>(&self, key: &str) -> Result<T> {
        let raw = self.require(key)?;
        raw.parse()
            .map_err(|_| Error::config(format!("key `{key}`: cannot parse `{raw}`")))
    }

    pub fn f64_key(&self, key: &str) -> Result<f64> {
        self.parse_key(key)
    }

    pub fn usize_key(&self, key: &str) -> Result<usize> {
        self.parse_key(key)
    }

    pub fn u64_key(&self, key: &str) -> Result<u64> {
        self.parse_key(key)
    }

    pub fn bool_key(&self, key: &str) -> Result<bool> {
        self.parse_key(key)
    }

    /// Comma-separated f64 list (sweep values).
    pub fn f64_list(&self, key: &str) -> Result<Vec<f64>> {
        self.require(key)?
            .split(',')
            .map(|s| {
                s.trim()
                    .parse()
                    .map_err(|_| Error::config(format!("key `{key}`: cannot parse `{s}`")))
            })
            .collect()
    }

    pub fn str_list(&self, key: &str) -> Result<Vec<String>> {
        Ok(self
            .require(key)?
            .split(',')
            .map(|s| s.trim().to_string())
            .collect())
    }

    /// Serialized form: sorted `key = value` lines. Parsing this text back
    /// reproduces the configuration exactly.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        for (k, v) in &self.values {
            writeln!(out, "{k} = {v}").unwrap();
        }
        out
    }

    /// FNV-1a over the serialized form; stable across runs.
    pub fn hash_hex(&self) -> String {
        let mut h: u64 = 0xcbf29ce484222325;
        for b in self.to_text().bytes() {
            h ^= b as u64;
            h = h.wrapping_mul(0x100000001b3);
        }
        format!("{h:016x}")
    }

    // --- typed views over the sections ---

    pub fn output_dir(&self) -> Result<std::path::PathBuf> {
        Ok(std::path::PathBuf::from(self.require("output.dir")?))
    }

    /// HR input: an image file or a synthetic pattern spec.
    pub fn load_hr_input(&self) -> Result<l0sr::ImageGrid> {
        match (self.get("input.image"), self.get("input.pattern")) {
            (Some(path), _) => {
                if path.ends_with(".f64") {
                    l0sr::io::read_f64_dump(path)
                } else {
                    l0sr::io::read_image(path)
                }
            }
            (None, Some(pattern)) => {
                let height = self.usize_key("input.height")?;
                let width = self.usize_key("input.width")?;
                let seed = self.u64_key("input.seed")?;
                let kind = match pattern {
                    "qr_like_grid" => SyntheticPattern::QrLikeGrid {
                        module_px: self.usize_key("input.module_px")?,
                    },
                    "piecewise_constant_blocks" => SyntheticPattern::PiecewiseConstantBlocks {
                        n_blocks: self.usize_key("input.blocks")?,
                    },
                    "single_edge" => SyntheticPattern::SingleEdge,
                    other => {
                        return Err(Error::config(format!("unknown pattern `{other}`")))
                    }
                };
                l0sr::sim::make_pattern(kind, height, width, seed)
            }
            (None, None) => Err(Error::config(
                "an input is required: set input.image or input.pattern",
            )),
        }
    }

    pub fn blur_spec(&self) -> Result<BlurSpec> {
        let sigma = self.f64_key("degrade.sigma_h")?;
        let mut spec = BlurSpec::gaussian(sigma)
            .with_boundary(BoundaryCondition::parse(self.require("degrade.boundary")?)?);
        if self.get("degrade.radius").is_some() {
            spec = spec.with_radius(self.usize_key("degrade.radius")?);
        }
        Ok(spec)
    }

    pub fn downsample_spec(&self) -> Result<DownsampleSpec> {
        Ok(DownsampleSpec::new(self.usize_key("degrade.factor")?)
            .with_kernel(DownsampleKernel::parse(self.require("degrade.kernel")?)?))
    }

    pub fn degradation_spec(&self) -> Result<DegradationSpec> {
        let spec = DegradationSpec {
            blur: self.blur_spec()?,
            down: self.downsample_spec()?,
            noise_sigma: self.f64_key("degrade.noise_sigma")?,
            seed: self.u64_key("degrade.seed")?,
        };
        spec.validate()?;
        Ok(spec)
    }

    fn schedule(&self) -> Result<PenaltySchedule> {
        let beta0 = self.f64_key("solver.beta0")?;
        let schedule = match self.require("solver.schedule")? {
            "super_linear" => PenaltySchedule::SuperLinear {
                epsilon: self.f64_key("solver.epsilon")?,
                beta0,
            },
            "constant" => PenaltySchedule::Constant { value: beta0 },
            "power" => PenaltySchedule::Power {
                exponent: self.f64_key("solver.exponent")?,
                beta0,
            },
            other => return Err(Error::config(format!("unknown schedule `{other}`"))),
        };
        schedule.validate()?;
        Ok(schedule)
    }

    /// Solver configuration for one (variant, mu) sweep entry.
    pub fn solver_config(&self, variant: SolverVariant, mu: f64) -> Result<SolverConfig> {
        let cfg = SolverConfig {
            mu,
            variant,
            schedule: self.schedule()?,
            rel_change_tol: self.f64_key("solver.rel_change_tol")?,
            max_outer_iterations: self.usize_key("solver.max_outer_iterations")?,
            cg: CgConfig {
                rel_tolerance: self.f64_key("cg.rel_tolerance")?,
                max_iterations: self.usize_key("cg.max_iterations")?,
            },
            boundary: BoundaryCondition::parse(self.require("solver.boundary")?)?,
            beta_ratio: self.f64_key("solver.beta_ratio")?,
            config_hash: self.hash_hex(),
        };
        cfg.validate()?;
        Ok(cfg)
    }

    /// The (variant, mu) sweep grid.
    pub fn sweep(&self) -> Result<Vec<(SolverVariant, f64)>> {
        let mut entries = Vec::new();
        for name in self.str_list("solver.variant")? {
            let variant = SolverVariant::parse(&name)?;
            for mu in self.f64_list("solver.mu")? {
                entries.push((variant, mu));
            }
        }
        Ok(entries)
    }
}

/// Reference text listing every key with its default and meaning.
pub fn describe_keys() -> String {
    let mut out = String::from("# configuration keys (key = default  # description)\n");
    for (k, d, doc) in KNOWN_KEYS {
        let default = if d.is_empty() { "<unset>" } else { d };
        writeln!(out, "{k} = {default}  # {doc}").unwrap();
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_parse_and_roundtrip() {
        let cfg = ExperimentConfig::default();
        let text = cfg.to_text();
        let mut again = ExperimentConfig::default();
        again.apply_text(&text).unwrap();
        assert_eq!(again.to_text(), text);
        assert_eq!(again.hash_hex(), cfg.hash_hex());
    }

    #[test]
    fn unknown_key_rejected() {
        let mut cfg = ExperimentConfig::default();
        assert!(cfg.set("solver.oops", "1").is_err());
        assert!(cfg.apply_text("degrade.sigma = 1").is_err());
    }

    #[test]
    fn comments_and_overrides() {
        let mut cfg = ExperimentConfig::default();
        cfg.apply_text("# a comment\nsolver.mu = 0.005, 0.01  # sweep\n")
            .unwrap();
        assert_eq!(cfg.f64_list("solver.mu").unwrap(), vec![0.005, 0.01]);
    }

    #[test]
    fn sweep_grid() {
        let mut cfg = ExperimentConfig::default();
        cfg.set("solver.variant", "aniso_l0, iso_l0").unwrap();
        cfg.set("solver.mu", "0.005,0.01").unwrap();
        assert_eq!(cfg.sweep().unwrap().len(), 4);
    }

    #[test]
    fn hash_changes_with_values() {
        let a = ExperimentConfig::default();
        let mut b = ExperimentConfig::default();
        b.set("solver.mu", "0.02").unwrap();
        assert_ne!(a.hash_hex(), b.hash_hex());
    }

    #[test]
    fn missing_input_is_config_error() {
        let cfg = ExperimentConfig::default();
        assert!(matches!(cfg.load_hr_input(), Err(Error::Config(_))));
    }
}
