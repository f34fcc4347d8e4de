//! `dphase maximal`: L^p integrability of the capped fractional maximal
//! function of the line measure in the unit square.

use dphase_core::io::{write_csv, write_json};
use dphase_core::maximal::{
    capped_maximal_ball, capped_maximal_dyadic, check_params, extrapolated_slope, lp_experiment,
    plane_measure, threshold_exponent, LpRow, QueryGrid,
};
use dphase_core::ScalarField;
use serde::Serialize;

use super::{create_dir, trim_number, Context, ImageSink, Status};
use crate::config::{required, MaximalSection};
use crate::error::{CliError, Result};

pub const DIMENSION: usize = 2;
pub const DEFAULT_ALPHA: f64 = 0.75;
pub const DEFAULT_SIGMA: f64 = 1.0;
pub const DEFAULT_P: [f64; 2] = [3.0, 4.5];
pub const DEFAULT_RESOLUTIONS: [usize; 4] = [64, 128, 256, 512];
/// Growth exponents up to this value count as bounded.
pub const SLOPE_ZERO: f64 = 0.05;

pub const INTEGRABLE: &str = "slope ≈ 0: integrable side";
pub const DIVERGENT: &str = "slope > 0: divergent side";

#[derive(Debug, Serialize)]
struct SlopeRecord {
    p: f64,
    threshold: f64,
    slope: f64,
    /// Limit of the local slopes; the fitted slope when there are too few.
    extrapolated_slope: f64,
    integrable: bool,
}

#[derive(Debug, Serialize)]
struct FieldSummary {
    resolution: usize,
    ball_max: f64,
    dyadic_max: f64,
    /// `max ball / dyadic` over pixels where the dyadic majorant is positive.
    max_ratio: f64,
}

pub fn run(ctx: &Context, s: &MaximalSection) -> Result<Status> {
    let out_dir = required(s.output_dir.clone(), "maximal.output_dir")?;
    let alpha = s.alpha.unwrap_or(DEFAULT_ALPHA);
    let sigma = s.sigma.unwrap_or(DEFAULT_SIGMA);
    let ps = s.p.clone().unwrap_or_else(|| DEFAULT_P.to_vec());
    let resolutions = s.resolutions.clone().unwrap_or_else(|| DEFAULT_RESOLUTIONS.to_vec());
    check_params(DIMENSION, alpha, sigma)?;
    let sink = ImageSink::new(&out_dir, &ctx.output)?;
    let threshold = threshold_exponent(DIMENSION, alpha, sigma);

    let mut rows: Vec<LpRow> = Vec::new();
    let mut slopes = Vec::new();
    for &p in &ps {
        let exp = lp_experiment(alpha, sigma, p, &resolutions)?;
        let extrapolated = extrapolated_slope(&exp.local_slopes).unwrap_or(exp.slope);
        slopes.push((
            SlopeRecord { p, threshold, slope: exp.slope, extrapolated_slope: extrapolated, integrable: extrapolated <= SLOPE_ZERO },
            exp.local_slopes.clone(),
        ));
        rows.extend(exp.rows);
    }
    let fields = s.dump_resolution.map(|res| dump_fields(alpha, sigma, res)).transpose()?;

    create_dir(&out_dir)?;
    write_csv(&out_dir.join("lp.csv"), &rows)?;
    let records: Vec<&SlopeRecord> = slopes.iter().map(|(r, _)| r).collect();
    write_csv(&out_dir.join("slopes.csv"), &records)?;
    if let Some((summary, ball, dyadic)) = &fields {
        sink.normalized("ball_maximal", ball)?;
        sink.normalized("dyadic_maximal", dyadic)?;
        write_json(&out_dir.join("fields.json"), summary)?;
    }

    println!("n = {DIMENSION}, alpha = {}, sigma = {}", trim_number(alpha), trim_number(sigma));
    println!("p* = {}", trim_number(threshold));
    for (r, local) in &slopes {
        let local: Vec<String> = local.iter().map(|v| format!("{v:.4}")).collect();
        println!(
            "p = {}: slope {:.4}, local [{}], extrapolated {:.4} -> {}",
            trim_number(r.p),
            r.slope,
            local.join(", "),
            r.extrapolated_slope,
            if r.integrable { INTEGRABLE } else { DIVERGENT }
        );
    }
    if let Some((summary, _, _)) = &fields {
        println!(
            "fields at {}: ball max {:.6}, dyadic max {:.6}, max ball/dyadic {:.6}",
            summary.resolution, summary.ball_max, summary.dyadic_max, summary.max_ratio
        );
    }
    Ok(Status::Done)
}

fn dump_fields(alpha: f64, sigma: f64, res: usize) -> Result<(FieldSummary, ScalarField, ScalarField)> {
    if sigma.fract() != 0.0 {
        return Err(CliError::config(format!("field dumps need an integer sigma, got {sigma}")));
    }
    let mu = plane_measure(DIMENSION, sigma as usize, res)?;
    let query = QueryGrid::unit_square(res);
    let ball = capped_maximal_ball(&mu, alpha, sigma, &query)?;
    let dyadic = capped_maximal_dyadic(&mu, alpha, sigma, &query)?;
    let max_ratio = ball
        .values()
        .iter()
        .zip(dyadic.values())
        .filter(|(_, &d)| d > 0.0)
        .map(|(b, d)| b / d)
        .fold(0.0, f64::max);
    let summary = FieldSummary { resolution: res, ball_max: ball.max(), dyadic_max: dyadic.max(), max_ratio };
    Ok((summary, ball, dyadic))
}
