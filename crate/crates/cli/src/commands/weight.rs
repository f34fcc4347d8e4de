//! `dphase weight`: estimate and inspect an edge-adaptive weight.

use dphase_core::io::write_json;
use dphase_core::weight::{boundary_positivity, check_remark_condition};
use dphase_core::WeightSpec;
use serde::Serialize;

use super::{create_dir, load_image, load_weight, Context, ImageSink, Status};
use crate::config::{required, WeightCmdSection};
use crate::error::Result;

#[derive(Debug, Serialize)]
struct WeightReport {
    spec: WeightSpec,
    min: f64,
    max: f64,
    /// Fraction of pixels where the weight is zero.
    zero_fraction: f64,
    /// Fraction of boundary pixels where the weight is positive.
    boundary_positivity: f64,
    /// Sampled `sup a(x)^{1/α} / max{|x-y|, a(y)^{1/α}}`.
    remark_constant: f64,
    /// `(1 + L)^{1/α}`, which bounds the constant for a Hölder envelope.
    remark_bound: f64,
}

pub fn run(ctx: &Context, s: &WeightCmdSection) -> Result<Status> {
    let input = required(s.input.clone(), "weight_map.input")?;
    let out_dir = required(s.output_dir.clone(), "weight_map.output_dir")?;
    let sink = ImageSink::new(&out_dir, &ctx.output)?;
    let f = load_image(&input, s.spacing.unwrap_or(1.0))?;
    let (a, spec) = load_weight(&f, &ctx.weight, WeightSpec::default())?;
    let zeros = a.values().iter().filter(|&&v| v == 0.0).count();
    let report = WeightReport {
        spec,
        min: a.min(),
        max: a.max(),
        zero_fraction: zeros as f64 / a.len() as f64,
        boundary_positivity: boundary_positivity(&a, 0.0),
        remark_constant: check_remark_condition(&a, spec.holder_alpha)?,
        remark_bound: (1.0 + spec.modulus_constant).powf(1.0 / spec.holder_alpha),
    };

    create_dir(&out_dir)?;
    sink.normalized("weight", &a)?;
    write_json(&out_dir.join("weight.json"), &report)?;

    println!("weight range: [{:.6}, {:.6}], zero fraction {:.6}", report.min, report.max, report.zero_fraction);
    println!("boundary positivity: {:.6}", report.boundary_positivity);
    println!(
        "remark constant: {:.6} (bound for the envelope {:.6})",
        report.remark_constant, report.remark_bound
    );
    Ok(Status::Done)
}
