//! `dphase synth`: deterministic test images.

use std::str::FromStr;

use dphase_core::io::{exact_maxval, write_pgm_maxval};
use dphase_core::synth::{add_gaussian_noise, synthesize, synthesize_with_noise};
use dphase_core::SynthKind;

use super::{create_dir, Context, Status};
use crate::config::{required, ImageKind, SynthSection};
use crate::error::Result;

pub const DEFAULT_SIZE: usize = 64;

pub fn run(ctx: &Context, s: &SynthSection) -> Result<Status> {
    let kind = SynthKind::from_str(&required(s.kind.clone(), "synth.kind")?)?;
    let output = required(s.output.clone(), "synth.output")?;
    let size = s.size.unwrap_or(DEFAULT_SIZE);
    let u = match s.noise {
        Some(noise) if kind.is_noisy() => synthesize_with_noise(kind, size, ctx.seed, noise)?,
        Some(noise) if noise > 0.0 => add_gaussian_noise(&synthesize(kind, size, ctx.seed)?, noise, ctx.seed)?,
        _ => synthesize(kind, size, ctx.seed)?,
    };
    let clean = !kind.is_noisy() && s.noise.is_none_or(|n| n == 0.0);

    if let Some(dir) = output.parent().filter(|d| !d.as_os_str().is_empty()) {
        create_dir(dir)?;
    }
    let is_png = output.extension().and_then(|e| e.to_str()).is_some_and(|e| e.eq_ignore_ascii_case("png"));
    match exact_maxval(size as u32 - 1) {
        // noiseless images take values k/(size-1); a PGM whose maxval is a
        // multiple of size-1 stores them exactly
        Some(maxval) if clean && !is_png => write_pgm_maxval(&output, &u, maxval, false)?,
        _ => dphase_core::io::write_image(&output, &u, ctx.output.depth()?)?,
    }
    let format = if is_png { ImageKind::Png } else { ImageKind::Pgm };
    println!("{kind} {size}x{size} seed {} -> {} ({})", ctx.seed, output.display(), format.extension());
    Ok(Status::Done)
}
