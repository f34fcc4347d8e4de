//! Run configuration: one TOML file with a section per command, overlaid by
//! command-line flags.
//!
//! Every section struct doubles as the flag set of its command, with all
//! fields optional; [`Overlay::overlay`] keeps a flag when it was given and
//! falls back to the file otherwise. Defaults are applied last, by the
//! command that consumes the section.

use std::path::{Path, PathBuf};

use clap::{Args, ValueEnum};
use dphase_core::io::BitDepth;
use dphase_core::solver::{Init, SolveOptions, StepRule};
use dphase_core::{RegularizationMode, WeightSpec};
use serde::Deserialize;

use crate::error::{CliError, Result};

pub trait Overlay {
    /// `self` where set, `base` elsewhere.
    fn overlay(self, base: Self) -> Self;
}

macro_rules! overlay {
    ($ty:ty { $($field:ident),* $(,)? }) => {
        impl Overlay for $ty {
            fn overlay(self, base: Self) -> Self {
                Self { $($field: self.$field.or(base.$field)),* }
            }
        }
    };
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Deserialize, ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum Model {
    /// TV plus fidelity, no weighted term.
    #[value(name = "rof")]
    Rof,
    /// The limit energy with the weighted quadratic term.
    #[value(name = "double_phase")]
    DoublePhase,
    /// An ε-regularized energy.
    #[value(name = "i_eps")]
    IEps,
}

impl Model {
    pub fn name(self) -> &'static str {
        match self {
            Model::Rof => "rof",
            Model::DoublePhase => "double_phase",
            Model::IEps => "i_eps",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Deserialize, ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum InitKind {
    #[value(name = "from_f")]
    FromF,
    Zero,
    Random,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Default, Deserialize, ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum ImageKind {
    #[default]
    Pgm,
    Png,
}

impl ImageKind {
    pub fn extension(self) -> &'static str {
        match self {
            ImageKind::Pgm => "pgm",
            ImageKind::Png => "png",
        }
    }
}

#[derive(Clone, Debug, Default, Deserialize, Args)]
#[serde(deny_unknown_fields)]
pub struct SolveSection {
    /// Iteration cap.
    #[arg(long)]
    pub max_iters: Option<usize>,
    /// Stopping tolerance on the certificate.
    #[arg(long)]
    pub tol: Option<f64>,
    /// Scale `tol` by the certificate of the start `u = f`.
    #[arg(long)]
    pub relative_tol: Option<bool>,
    /// Step rule of the smooth descent: fixed or backtracking.
    #[arg(long)]
    pub step_rule: Option<StepRule>,
    #[arg(long, value_enum)]
    pub init: Option<InitKind>,
    /// Iterations between certificate evaluations.
    #[arg(long)]
    pub check_every: Option<usize>,
    /// Primal step of the primal–dual iteration, in pixel units.
    #[arg(long)]
    pub primal_step: Option<f64>,
}

overlay!(SolveSection { max_iters, tol, relative_tol, step_rule, init, check_every, primal_step });

impl SolveSection {
    pub fn options(&self, seed: u64) -> SolveOptions {
        let d = SolveOptions::default();
        SolveOptions {
            max_iters: self.max_iters.unwrap_or(d.max_iters),
            tol: self.tol.unwrap_or(d.tol),
            relative_tol: self.relative_tol.unwrap_or(d.relative_tol),
            step_rule: self.step_rule.unwrap_or(d.step_rule),
            init: match self.init.unwrap_or(InitKind::FromF) {
                InitKind::FromF => Init::FromF,
                InitKind::Zero => Init::Zero,
                InitKind::Random => Init::Random,
            },
            seed,
            check_every: self.check_every.unwrap_or(d.check_every),
            primal_step: self.primal_step.unwrap_or(d.primal_step),
        }
    }
}

#[derive(Clone, Debug, Default, Deserialize, Args)]
#[serde(deny_unknown_fields)]
pub struct WeightSection {
    /// Gaussian presmoothing width, in grid units.
    #[arg(long)]
    pub presmooth_sigma: Option<f64>,
    /// Gradient magnitude at which the weight reaches zero.
    #[arg(long)]
    pub edge_threshold: Option<f64>,
    /// Weight ceiling away from edges.
    #[arg(long)]
    pub a_max: Option<f64>,
    /// Hölder exponent of the weight envelope.
    #[arg(long)]
    pub holder_alpha: Option<f64>,
    /// Hölder constant of the weight envelope.
    #[arg(long)]
    pub modulus_constant: Option<f64>,
    /// Precomputed weight image; samples in [0, 1] are scaled by `a_max`.
    #[arg(long = "weight-image")]
    #[serde(rename = "image")]
    pub image: Option<PathBuf>,
}

overlay!(WeightSection { presmooth_sigma, edge_threshold, a_max, holder_alpha, modulus_constant, image });

impl WeightSection {
    /// The section's values over `base`, validated.
    pub fn spec(&self, base: WeightSpec) -> Result<WeightSpec> {
        let spec = WeightSpec {
            presmooth_sigma: self.presmooth_sigma.unwrap_or(base.presmooth_sigma),
            edge_threshold: self.edge_threshold.unwrap_or(base.edge_threshold),
            a_max: self.a_max.unwrap_or(base.a_max),
            holder_alpha: self.holder_alpha.unwrap_or(base.holder_alpha),
            modulus_constant: self.modulus_constant.unwrap_or(base.modulus_constant),
        };
        spec.validate()?;
        Ok(spec)
    }
}

#[derive(Clone, Debug, Default, Deserialize, Args)]
#[serde(deny_unknown_fields)]
pub struct DenoiseSection {
    /// Noisy grayscale image (PGM or PNG).
    #[arg(long)]
    pub input: Option<PathBuf>,
    #[arg(long)]
    pub output_dir: Option<PathBuf>,
    #[arg(long, value_enum)]
    pub model: Option<Model>,
    /// ε of the i_eps model.
    #[arg(long)]
    pub epsilon: Option<f64>,
    /// Regularization of the i_eps model: exponent, weight or combined.
    #[arg(long)]
    pub mode: Option<RegularizationMode>,
    /// Fidelity weight of the rof model.
    #[arg(long)]
    pub lambda: Option<f64>,
    /// Physical pixel spacing.
    #[arg(long)]
    pub spacing: Option<f64>,
}

overlay!(DenoiseSection { input, output_dir, model, epsilon, mode, lambda, spacing });

#[derive(Clone, Debug, Default, Deserialize, Args)]
#[serde(deny_unknown_fields)]
pub struct GammaSection {
    /// Image to sweep; the built-in two-region instance when absent.
    #[arg(long)]
    pub input: Option<PathBuf>,
    #[arg(long)]
    pub output_dir: Option<PathBuf>,
    /// Comma-separated ε values, decreasing.
    #[arg(long, value_delimiter = ',')]
    pub eps_list: Option<Vec<f64>>,
    /// Comma-separated mollification radii for the relaxation check.
    #[arg(long, value_delimiter = ',')]
    pub delta_list: Option<Vec<f64>>,
    #[arg(long)]
    pub mode: Option<RegularizationMode>,
    /// Relative L¹ distance counted as approaching the limit minimizer.
    #[arg(long)]
    pub tau_threshold: Option<f64>,
    /// Physical pixel spacing of an input image.
    #[arg(long)]
    pub spacing: Option<f64>,
}

overlay!(GammaSection { input, output_dir, eps_list, delta_list, mode, tau_threshold, spacing });

#[derive(Clone, Debug, Default, Deserialize, Args)]
#[serde(deny_unknown_fields)]
pub struct MaximalSection {
    #[arg(long)]
    pub output_dir: Option<PathBuf>,
    #[arg(long)]
    pub alpha: Option<f64>,
    #[arg(long)]
    pub sigma: Option<f64>,
    /// Comma-separated integrability exponents.
    #[arg(long, value_delimiter = ',')]
    pub p: Option<Vec<f64>>,
    /// Comma-separated grid resolutions, increasing.
    #[arg(long, value_delimiter = ',')]
    pub resolutions: Option<Vec<usize>>,
    /// Also write the ball and dyadic maximal functions at this resolution.
    #[arg(long)]
    pub dump_resolution: Option<usize>,
}

overlay!(MaximalSection { output_dir, alpha, sigma, p, resolutions, dump_resolution });

#[derive(Clone, Debug, Default, Deserialize, Args)]
#[serde(deny_unknown_fields)]
pub struct SynthSection {
    /// step, disk, ramp, ramp+noise or two-region.
    pub kind: Option<String>,
    #[arg(long)]
    pub size: Option<usize>,
    /// Gaussian noise level; adds noise to the clean kinds too.
    #[arg(long)]
    pub noise: Option<f64>,
    #[arg(long)]
    pub output: Option<PathBuf>,
}

overlay!(SynthSection { kind, size, noise, output });

#[derive(Clone, Debug, Default, Deserialize, Args)]
#[serde(deny_unknown_fields)]
pub struct WeightCmdSection {
    #[arg(long)]
    pub input: Option<PathBuf>,
    #[arg(long)]
    pub output_dir: Option<PathBuf>,
    #[arg(long)]
    pub spacing: Option<f64>,
}

overlay!(WeightCmdSection { input, output_dir, spacing });

#[derive(Clone, Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputSection {
    pub format: Option<ImageKind>,
    pub bit_depth: Option<u8>,
}

overlay!(OutputSection { format, bit_depth });

impl OutputSection {
    pub fn depth(&self) -> Result<BitDepth> {
        match self.bit_depth.unwrap_or(16) {
            8 => Ok(BitDepth::Eight),
            16 => Ok(BitDepth::Sixteen),
            other => Err(CliError::config(format!("bit_depth must be 8 or 16, got {other}"))),
        }
    }

    pub fn kind(&self) -> ImageKind {
        self.format.unwrap_or_default()
    }
}

/// The whole configuration file.
#[derive(Clone, Debug, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FileConfig {
    pub seed: Option<u64>,
    pub output: OutputSection,
    pub solve: SolveSection,
    pub weight: WeightSection,
    pub denoise: DenoiseSection,
    pub gamma: GammaSection,
    pub maximal: MaximalSection,
    pub synth: SynthSection,
    #[serde(rename = "weight_map")]
    pub weight_cmd: WeightCmdSection,
}

impl FileConfig {
    /// Parses `path`; relative paths inside the file are taken relative to
    /// the file's directory.
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|source| CliError::Read {
            path: path.to_path_buf(),
            source,
        })?;
        let mut cfg: FileConfig = toml::from_str(&text).map_err(|source| CliError::ConfigParse {
            path: path.to_path_buf(),
            source,
        })?;
        let base = path.parent().unwrap_or(Path::new("."));
        for p in [
            &mut cfg.weight.image,
            &mut cfg.denoise.input,
            &mut cfg.denoise.output_dir,
            &mut cfg.gamma.input,
            &mut cfg.gamma.output_dir,
            &mut cfg.maximal.output_dir,
            &mut cfg.synth.output,
            &mut cfg.weight_cmd.input,
            &mut cfg.weight_cmd.output_dir,
        ] {
            if let Some(rel) = p.as_ref().filter(|p| p.is_relative()) {
                *p = Some(base.join(rel));
            }
        }
        Ok(cfg)
    }
}

/// The value of a required setting.
pub fn required<T>(value: Option<T>, name: &str) -> Result<T> {
    value.ok_or_else(|| CliError::config(format!("`{name}` is required (flag or config file)")))
}

/// Fails unless `path` names an existing file.
pub fn existing_file(path: &Path, what: &str) -> Result<()> {
    if path.is_file() {
        Ok(())
    } else {
        Err(CliError::Read {
            path: path.to_path_buf(),
            source: std::io::Error::new(std::io::ErrorKind::NotFound, format!("{what} does not exist")),
        })
    }
}
