//! `dphase denoise`: one restoration run.

use dphase_core::io::{write_csv, write_json};
use dphase_core::solver::{minimize_i, minimize_i_eps, rof_baseline, staircase_metric};
use dphase_core::{EnergyReport, RegularizationMode, ScalarField, WeightSpec};
use serde::Serialize;

use super::{create_dir, load_image, load_weight, Context, ImageSink, Status};
use crate::config::{required, DenoiseSection, Model};
use crate::error::Result;

pub const DEFAULT_EPSILON: f64 = 1e-2;
pub const DEFAULT_LAMBDA: f64 = 1.0;

/// The run summary written next to the energy report.
#[derive(Debug, Serialize)]
pub struct RunReport {
    pub model: &'static str,
    pub epsilon: Option<f64>,
    pub mode: Option<RegularizationMode>,
    pub lambda: Option<f64>,
    pub width: usize,
    pub height: usize,
    pub spacing: f64,
    pub iterations: usize,
    pub converged: bool,
    pub certificate: f64,
    pub tolerance: f64,
    pub staircase_metric: f64,
    pub input_staircase_metric: f64,
    pub weight_spec: Option<WeightSpec>,
    pub weight_min: f64,
    pub weight_max: f64,
    pub energy: EnergyReport,
}

pub fn run(ctx: &Context, s: &DenoiseSection) -> Result<Status> {
    let input = required(s.input.clone(), "denoise.input")?;
    let out_dir = required(s.output_dir.clone(), "denoise.output_dir")?;
    let model = s.model.unwrap_or(Model::DoublePhase);
    let spacing = s.spacing.unwrap_or(1.0);
    let opts = ctx.solve.options(ctx.seed);
    let sink = ImageSink::new(&out_dir, &ctx.output)?;

    let f = load_image(&input, spacing)?;
    let (a, spec) = match model {
        Model::Rof => (ScalarField::zeros_like(&f), None),
        _ => {
            let (a, spec) = load_weight(&f, &ctx.weight, WeightSpec::default())?;
            (a, Some(spec))
        }
    };
    let (result, epsilon, mode, lambda) = match model {
        Model::Rof => {
            let lambda = s.lambda.unwrap_or(DEFAULT_LAMBDA);
            (rof_baseline(&f, lambda, &opts)?, None, None, Some(lambda))
        }
        Model::DoublePhase => (minimize_i(&f, &a, &opts)?, None, None, None),
        Model::IEps => {
            let eps = s.epsilon.unwrap_or(DEFAULT_EPSILON);
            let mode = s.mode.unwrap_or(RegularizationMode::Combined);
            (minimize_i_eps(&f, &a, eps, mode, &opts)?, Some(eps), Some(mode), None)
        }
    };
    let report = RunReport {
        model: model.name(),
        epsilon,
        mode,
        lambda,
        width: f.width(),
        height: f.height(),
        spacing,
        iterations: result.iterations,
        converged: result.converged,
        certificate: result.certificate,
        tolerance: result.tolerance,
        staircase_metric: staircase_metric(&result.minimizer),
        input_staircase_metric: staircase_metric(&f),
        weight_spec: spec,
        weight_min: a.min(),
        weight_max: a.max(),
        energy: result.report,
    };

    create_dir(&out_dir)?;
    sink.intensity("restored", &result.minimizer)?;
    sink.normalized("weight", &a)?;
    write_json(&out_dir.join("energy.json"), &result.report)?;
    write_json(&out_dir.join("report.json"), &report)?;
    write_csv(&out_dir.join("trace.csv"), &result.trace)?;

    println!("model: {}", report.model);
    println!("{result}");
    println!("staircase metric: {:.6} (input {:.6})", report.staircase_metric, report.input_staircase_metric);
    if !result.converged {
        eprintln!("warning: solver did not converge; the best iterate was written");
    }
    Ok(Status::from_converged(result.converged))
}
