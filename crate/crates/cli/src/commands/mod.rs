//! The subcommands. Each one resolves its settings, reads and computes
//! everything it needs, and only then creates the output directory, so a
//! failed run leaves no partial outputs behind.

pub mod denoise;
pub mod gamma;
pub mod maximal;
pub mod synth;
pub mod weight;

use std::path::{Path, PathBuf};

use dphase_core::io::{read_image, write_image, write_image_normalized, BitDepth};
use dphase_core::weight::estimate_weight;
use dphase_core::{ScalarField, WeightSpec};

use crate::config::{existing_file, ImageKind, OutputSection, SolveSection, WeightSection};
use crate::error::{CliError, Result};

/// How a command finished.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Status {
    Done,
    /// Outputs were written from the best iterate of a solver that hit its
    /// iteration cap.
    NotConverged,
}

impl Status {
    pub fn from_converged(converged: bool) -> Self {
        if converged {
            Status::Done
        } else {
            Status::NotConverged
        }
    }
}

/// Settings shared by all commands.
#[derive(Clone, Debug, Default)]
pub struct Context {
    pub seed: u64,
    /// Run despite a violated hypothesis.
    pub allow_override: bool,
    pub output: OutputSection,
    pub solve: SolveSection,
    pub weight: WeightSection,
}

/// Reads an image after checking that it exists, on a grid of `spacing`.
pub fn load_image(path: &Path, spacing: f64) -> Result<ScalarField> {
    existing_file(path, "input image")?;
    Ok(read_image(path)?.with_spacing(spacing)?)
}

/// The weight from a precomputed image when one is configured, else
/// estimated from `f`.
pub fn load_weight(f: &ScalarField, section: &WeightSection, base: WeightSpec) -> Result<(ScalarField, WeightSpec)> {
    let spec = section.spec(base)?;
    let a = match &section.image {
        Some(path) => {
            let img = load_image(path, f.spacing())?;
            f.same_grid(&img)?;
            img.map(|v| v * spec.a_max)?
        }
        None => estimate_weight(f, &spec)?,
    };
    Ok((a, spec))
}

pub fn create_dir(dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|source| CliError::Write { path: dir.to_path_buf(), source })
}

/// Image writer for one output directory.
pub struct ImageSink {
    dir: PathBuf,
    kind: ImageKind,
    depth: BitDepth,
}

impl ImageSink {
    pub fn new(dir: &Path, output: &OutputSection) -> Result<Self> {
        Ok(Self { dir: dir.to_path_buf(), kind: output.kind(), depth: output.depth()? })
    }

    pub fn path(&self, stem: &str) -> PathBuf {
        self.dir.join(format!("{stem}.{}", self.kind.extension()))
    }

    /// Intensities, clamped to `[0, 1]`.
    pub fn intensity(&self, stem: &str, u: &ScalarField) -> Result<PathBuf> {
        let path = self.path(stem);
        write_image(&path, u, self.depth)?;
        Ok(path)
    }

    /// Fields outside the intensity range, mapped affinely onto `[0, 1]`.
    pub fn normalized(&self, stem: &str, u: &ScalarField) -> Result<PathBuf> {
        let path = self.path(stem);
        write_image_normalized(&path, u, self.depth)?;
        Ok(path)
    }
}

/// Shortest decimal rendering up to six digits after the point.
pub fn trim_number(x: f64) -> String {
    let s = format!("{x:.6}");
    let s = s.trim_end_matches('0').trim_end_matches('.');
    if s == "-0" {
        "0".into()
    } else {
        s.into()
    }
}
