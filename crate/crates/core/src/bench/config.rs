//! Experiment configuration files.
//!
//! Configs are TOML documents of flat `key = value` pairs; every key is
//! optional and falls back to the defaults below.

use std::path::{Path, PathBuf};

use serde::Deserialize;

use crate::error::{Error, Result};
use crate::kernels::KernelSpec;
use crate::lagrange::CUTOFF_MAX_SITES;

/// `λ / N` for the compression and preconditioner studies.
pub const STUDY_LAMBDA_FACTOR: f64 = 1e-6;
/// `λ / N` for the signed-distance reconstruction.
pub const RECONSTRUCTION_LAMBDA_FACTOR: f64 = 1e-8;

/// How the basis of a compression study is built.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CompressionMethod {
    /// Local solves on each footprint.
    Footprint,
    /// Columns of the dense inverse truncated to each footprint.
    Cutoff,
    /// Thresholded samplet matrix with a sparse Cholesky factor.
    Samplet,
}

impl CompressionMethod {
    pub fn name(self) -> &'static str {
        match self {
            Self::Footprint => "footprint",
            Self::Cutoff => "cutoff",
            Self::Samplet => "samplet",
        }
    }
}

/// Preconditioners compared in a preconditioner study.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PreconditionerKind {
    None,
    Sqrt,
    Cholesky,
    /// Right-preconditioned GMRES with the localized Lagrange basis.
    LagrangeGmres,
}

impl PreconditionerKind {
    pub fn name(self) -> &'static str {
        match self {
            Self::None => "none",
            Self::Sqrt => "sqrt",
            Self::Cholesky => "cholesky",
            Self::LagrangeGmres => "lagrange-gmres",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s.trim() {
            "none" => Ok(Self::None),
            "sqrt" => Ok(Self::Sqrt),
            "cholesky" => Ok(Self::Cholesky),
            "lagrange-gmres" => Ok(Self::LagrangeGmres),
            other => Err(Error::InvalidInput(format!("unknown preconditioner `{other}`"))),
        }
    }
}

/// Meaning of the samplet sweep values.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ThresholdMode {
    Absolute,
    /// Multiples of the Frobenius norm of the samplet matrix.
    Relative,
}

/// Closed curves available to the reconstruction demo.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Shape {
    Circle,
    Star,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub method: CompressionMethod,
    pub n: usize,
    pub dim: usize,
    pub seed: u64,
    /// `family:nu:lengthscale`, e.g. `matern:0.5:0.1`.
    pub kernel: String,
    /// Absolute regularization; overrides `lambda_factor`.
    pub lambda: Option<f64>,
    /// `λ = lambda_factor · N`; the default depends on the study.
    pub lambda_factor: Option<f64>,
    /// κ values, or thresholds for the samplet method.
    pub sweep: Vec<f64>,
    pub tolerance: f64,
    pub max_iterations: usize,
    pub power_iterations: usize,
    /// Vanishing moments `q + 1`.
    pub moments: usize,
    /// Defaults to twice the moment count.
    pub leaf_capacity: Option<usize>,
    pub threshold_mode: ThresholdMode,
    pub preconditioners: Vec<PreconditionerKind>,
    pub probe_resolution: Option<usize>,
    pub cutoff_max_sites: usize,
    pub shape: Shape,
    pub boundary_samples: usize,
    pub off_surface_samples: usize,
    pub grid: usize,
    /// Footprint parameter of the reconstruction preconditioner.
    pub kappa: f64,
    pub output: Option<PathBuf>,
    pub dat: Option<PathBuf>,
    /// Directory for MatrixMarket and index-map exports.
    pub export_dir: Option<PathBuf>,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            method: CompressionMethod::Footprint,
            n: 1000,
            dim: 2,
            seed: 1,
            kernel: "matern:0.5:0.1".into(),
            lambda: None,
            lambda_factor: None,
            sweep: vec![0.5, 1.0, 1.5, 2.0, 2.5],
            tolerance: 1e-9,
            max_iterations: 20_000,
            power_iterations: 200,
            moments: 6,
            leaf_capacity: None,
            threshold_mode: ThresholdMode::Absolute,
            preconditioners: vec![PreconditionerKind::None, PreconditionerKind::Sqrt, PreconditionerKind::Cholesky],
            probe_resolution: None,
            cutoff_max_sites: CUTOFF_MAX_SITES,
            shape: Shape::Circle,
            boundary_samples: 2000,
            off_surface_samples: 1000,
            grid: 200,
            kappa: 0.25,
            output: None,
            dat: None,
            export_dir: None,
        }
    }
}

impl ExperimentConfig {
    /// Parses and validates a TOML config.
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(text).map_err(|e| {
            let line = e.span().map_or(0, |s| text[..s.start.min(text.len())].matches('\n').count() + 1);
            Error::Parse { line, message: e.message().to_string() }
        })?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn from_file(path: &Path) -> Result<Self> {
        Self::from_toml_str(&std::fs::read_to_string(path)?)
    }

    pub fn kernel_spec(&self) -> Result<KernelSpec> {
        self.kernel.parse()
    }

    /// Regularization for `n` sites, using `default_factor` unless the config sets one.
    pub fn lambda_for(&self, n: usize, default_factor: f64) -> f64 {
        self.lambda.unwrap_or(self.lambda_factor.unwrap_or(default_factor) * n as f64)
    }

    /// Sites of the reconstruction demo: boundary plus off-surface samples.
    pub fn reconstruction_sites(&self) -> usize {
        self.boundary_samples + self.off_surface_samples
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::InvalidInput(m.to_string()));
        if self.n == 0 {
            return bad("n must be positive");
        }
        if self.dim == 0 {
            return bad("dim must be positive");
        }
        if self.sweep.is_empty() {
            return bad("sweep must be nonempty");
        }
        if self.sweep.iter().any(|v| !(v.is_finite() && *v >= 0.0)) {
            return bad("sweep values must be finite and nonnegative");
        }
        if [self.lambda, self.lambda_factor].iter().flatten().any(|l| !(l.is_finite() && *l >= 0.0)) {
            return bad("lambda and lambda_factor must be finite and nonnegative");
        }
        if !(self.tolerance > 0.0 && self.tolerance.is_finite()) {
            return bad("tolerance must be positive");
        }
        if self.max_iterations == 0 || self.power_iterations == 0 {
            return bad("iteration counts must be positive");
        }
        if self.moments == 0 {
            return bad("moments must be positive");
        }
        if self.leaf_capacity == Some(0) {
            return bad("leaf_capacity must be positive");
        }
        if self.preconditioners.is_empty() {
            return bad("preconditioners must be nonempty");
        }
        if self.grid < 2 {
            return bad("grid needs at least two nodes per axis");
        }
        if !(self.kappa > 0.0 && self.kappa.is_finite()) {
            return bad("kappa must be positive");
        }
        self.kernel_spec()?;
        Ok(())
    }
}
