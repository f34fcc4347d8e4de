//! `dphase gamma-sweep`: the ε-sweep with its limit checks, and optionally
//! the relaxation check of the limit minimizer.

use dphase_core::gamma::{
    gamma_sweep, relaxation_check, summarize, two_region_instance, two_region_weight_spec,
    GammaOptions, DEFAULT_EPS_LIST, GAMMA_SPACING,
};
use dphase_core::io::{write_csv, write_json};
use dphase_core::weight::boundary_positivity;
use dphase_core::Error;

use super::{create_dir, load_image, load_weight, Context, ImageSink, Status};
use crate::config::{required, GammaSection};
use crate::error::{CliError, Result};

pub fn run(ctx: &Context, s: &GammaSection) -> Result<Status> {
    let out_dir = required(s.output_dir.clone(), "gamma.output_dir")?;
    let eps_list = s.eps_list.clone().unwrap_or_else(|| DEFAULT_EPS_LIST.to_vec());
    let gamma = GammaOptions {
        mode: s.mode.unwrap_or(GammaOptions::default().mode),
        allow_boundary_zero: ctx.allow_override,
        tau_threshold: s.tau_threshold.unwrap_or(GammaOptions::default().tau_threshold),
    };
    let opts = ctx.solve.options(ctx.seed);
    let sink = ImageSink::new(&out_dir, &ctx.output)?;

    let (f, a) = match &s.input {
        Some(path) => {
            let f = load_image(path, s.spacing.unwrap_or(GAMMA_SPACING))?;
            let a = load_weight(&f, &ctx.weight, two_region_weight_spec())?.0;
            (f, a)
        }
        None if ctx.weight.image.is_some() => {
            let (f, _) = two_region_instance(ctx.seed)?;
            let a = load_weight(&f, &ctx.weight, two_region_weight_spec())?.0;
            (f, a)
        }
        None => two_region_instance(ctx.seed)?,
    };
    let sweep = gamma_sweep(&f, &a, &eps_list, &opts, &gamma).map_err(|e| match e {
        Error::Hypothesis(msg) => CliError::Core(Error::Hypothesis(format!(
            "{msg}; the approximation result assumes a > 0 almost everywhere on the boundary \
             (pass --override to run anyway)"
        ))),
        other => other.into(),
    })?;
    let summary = summarize(&sweep, &gamma);
    let relaxation = s
        .delta_list
        .as_ref()
        .map(|deltas| relaxation_check(&sweep.reference, &f, &a, deltas))
        .transpose()?;

    create_dir(&out_dir)?;
    write_csv(&out_dir.join("sweep.csv"), &sweep.records)?;
    std::fs::write(out_dir.join("summary.txt"), summary.to_string())
        .map_err(|source| CliError::Write { path: out_dir.join("summary.txt"), source })?;
    write_json(&out_dir.join("summary.json"), &summary)?;
    sink.intensity("input", &f)?;
    sink.normalized("weight", &a)?;
    sink.intensity("reference", &sweep.reference)?;
    for (k, (u, r)) in sweep.minimizers.iter().zip(&sweep.recovery).enumerate() {
        sink.intensity(&format!("minimizer_{k}"), u)?;
        sink.intensity(&format!("recovery_{k}"), r)?;
    }
    if let Some(rel) = &relaxation {
        write_csv(&out_dir.join("relaxation.csv"), &rel.rows)?;
    }

    println!("mode: {}", gamma.mode);
    println!("boundary positivity: {:.6}", boundary_positivity(&a, 0.0));
    for r in &sweep.records {
        println!(
            "eps {:.3e}: I_eps(u_eps) {:.9e}  I(u_eps) {:.9e}  I_eps(u_delta) {:.9e}  I(u*) {:.9e}{}",
            r.epsilon,
            r.minimizer_energy_eps,
            r.minimizer_energy_i,
            r.recovery_energy,
            r.target_energy,
            if r.converged { "" } else { "  [not converged]" }
        );
    }
    print!("{summary}");
    if let Some(rel) = &relaxation {
        println!(
            "relaxation: inf J(u_delta) {:.9e}, target {:.9e}, relative gap {:.3e}, divergence slope {:.3}",
            rel.infimum, rel.target, rel.relative_gap, rel.divergence_slope
        );
    }
    let converged = sweep.reference_converged && sweep.records.iter().all(|r| r.converged);
    Ok(Status::from_converged(converged))
}
