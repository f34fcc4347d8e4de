//! Minimizers for the double phase energy, its ε-regularizations and the
//! ROF baseline.
//!
//! * [`minimize_i`] and [`minimize_i_eps`] run an accelerated primal–dual
//!   iteration. The gradient term enters through the prox of its convex
//!   conjugate (for TV a pointwise projection onto `|p| <= 1`), the
//!   fidelity through its own prox. The certificate is the duality gap,
//!   which also bounds `λ‖u - u*‖²` because the fidelity is strongly convex.
//! * [`minimize_smooth`] is gradient descent with Armijo backtracking for
//!   smooth radial integrands; its certificate is the `h^2`-weighted norm of
//!   the energy gradient and its accepted energies never increase.
//! * [`rof_baseline`] solves the ROF dual by fast projected gradient, an
//!   algorithm independent of the primal–dual path.
//!
//! Relative tolerances are scaled by the certificate of the canonical start
//! `u = f` (with zero dual), so runs from different initial fields stop at
//! the same absolute threshold.

use std::fmt;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::energy::{energy_i, energy_i_eps, EnergyReport, RegularizationMode};
use crate::error::{Error, Result};
use crate::grid::{divergence_into, gradient_into, pairwise_sum, ScalarField};

/// Squared operator norm bound of the forward gradient, times `h^2`.
const GRAD_NORM_SQ_TIMES_H2: f64 = 8.0;
const ARMIJO: f64 = 1e-4;
/// Diffusivity guard: below this gradient magnitude `ψ'(t)/t` drops the
/// `t^{1+ε}` contribution (its flux `(1+ε) t^ε ∇u/|∇u|` tends to zero).
const ZERO_GRADIENT_GUARD: f64 = 1e-30;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum StepRule {
    Fixed,
    Backtracking,
}

impl FromStr for StepRule {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "fixed" => Ok(StepRule::Fixed),
            "backtracking" => Ok(StepRule::Backtracking),
            other => Err(Error::param(
                "step_rule",
                format!("expected fixed|backtracking, got `{other}`"),
            )),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum Init {
    FromF,
    Zero,
    /// Uniform samples in `[min f, max f]` drawn from the options' seed.
    Random,
    Custom(ScalarField),
}

#[derive(Clone, Debug)]
pub struct SolveOptions {
    pub max_iters: usize,
    pub tol: f64,
    /// When set, the stopping threshold is `tol` times the certificate of
    /// the canonical start `u = f`.
    pub relative_tol: bool,
    /// Only used by the smooth descent; primal–dual steps are fixed by the
    /// gradient's operator norm.
    pub step_rule: StepRule,
    pub init: Init,
    pub seed: u64,
    /// Primal–dual iterations between duality-gap evaluations.
    pub check_every: usize,
    /// Initial primal step of the primal–dual iteration, in units of the
    /// pixel spacing; the dual step follows from `τσ‖∇‖² = 1`.
    pub primal_step: f64,
}

impl Default for SolveOptions {
    fn default() -> Self {
        Self {
            max_iters: 20_000,
            tol: 1e-6,
            relative_tol: true,
            step_rule: StepRule::Backtracking,
            init: Init::FromF,
            seed: 0,
            check_every: 10,
            primal_step: 16.0,
        }
    }
}

impl SolveOptions {
    pub fn with_init(mut self, init: Init) -> Self {
        self.init = init;
        self
    }

    pub fn with_tol(mut self, tol: f64) -> Self {
        self.tol = tol;
        self
    }

    pub fn with_max_iters(mut self, max_iters: usize) -> Self {
        self.max_iters = max_iters;
        self
    }

    fn validate(&self) -> Result<()> {
        if self.max_iters < 1 {
            return Err(Error::param("max_iters", "must be >= 1"));
        }
        if !(self.tol.is_finite() && self.tol > 0.0) {
            return Err(Error::param("tol", format!("must be > 0, got {}", self.tol)));
        }
        if !(self.primal_step.is_finite() && self.primal_step > 0.0) {
            return Err(Error::param("primal_step", "must be > 0"));
        }
        if self.check_every < 1 {
            return Err(Error::param("check_every", "must be >= 1"));
        }
        Ok(())
    }

    fn threshold(&self, reference: f64) -> f64 {
        if self.relative_tol && reference > 0.0 {
            self.tol * reference
        } else {
            self.tol
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TraceRow {
    pub iter: usize,
    pub energy: f64,
    pub certificate: f64,
}

#[derive(Clone, Debug)]
pub struct SolveResult {
    pub minimizer: ScalarField,
    pub report: EnergyReport,
    pub certificate: f64,
    /// Absolute stopping threshold the certificate was compared against.
    pub tolerance: f64,
    pub iterations: usize,
    pub converged: bool,
    pub trace: Vec<TraceRow>,
}

impl fmt::Display for SolveResult {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "energy {:.6e} after {} iterations, certificate {:.3e} (tol {:.3e}){}",
            self.report.total,
            self.iterations,
            self.certificate,
            self.tolerance,
            if self.converged { "" } else { ", NOT converged" }
        )
    }
}

fn initial_field(f: &ScalarField, opts: &SolveOptions) -> Result<ScalarField> {
    match &opts.init {
        Init::FromF => Ok(f.clone()),
        Init::Zero => Ok(f.zeros_like()),
        Init::Random => {
            let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
            let (lo, hi) = (f.min(), f.max());
            let values = (0..f.len())
                .map(|_| if hi > lo { rng.random_range(lo..=hi) } else { lo })
                .collect();
            f.with_values(values)
        }
        Init::Custom(u) => {
            u.same_grid(f)?;
            Ok(u.clone())
        }
    }
}

fn check_weight(f: &ScalarField, a: &ScalarField) -> Result<()> {
    f.same_grid(a)?;
    if a.values().iter().any(|&v| v < 0.0) {
        return Err(Error::param("a", "weight must be nonnegative"));
    }
    Ok(())
}

/// Truncation to the data range never increases any term of the energies.
fn clamp_to_range(u: &mut [f64], lo: f64, hi: f64) {
    for v in u {
        *v = v.clamp(lo, hi);
    }
}

// ---------------------------------------------------------------------------
// Primal–dual for  λ‖u - f‖² + h² Σ g_x(∇u),  g_x(q) = |q|^{1+ε} + b_x |q|²
// ---------------------------------------------------------------------------

/// Root `r = e^x` of `A e^{εx} + B e^x = c` for `A, c > 0`, `B >= 0`.
///
/// The left side is convex and increasing in `x`, so Newton's method started
/// to the right of the root decreases monotonically onto it.
fn radial_root(a: f64, b: f64, c: f64, eps: f64) -> f64 {
    if c <= 0.0 {
        return 0.0;
    }
    let pure_power = (c / a).ln() / eps;
    if b == 0.0 {
        return pure_power.exp();
    }
    let mut x = pure_power.min((c / b).ln());
    for _ in 0..200 {
        let pe = a * (eps * x).exp();
        let lin = b * x.exp();
        let step = (pe + lin - c) / (eps * pe + lin);
        x -= step;
        if step.abs() <= 1e-15 * x.abs().max(1.0) {
            break;
        }
    }
    x.exp()
}

struct SaddleProblem<'a> {
    f: &'a ScalarField,
    /// Per-pixel coefficient `b_x` of `|∇u|²`.
    quad: Vec<f64>,
    lambda: f64,
    /// `ε` in `|q|^{1+ε}`; zero gives the total variation term.
    power: f64,
}

struct Workspace {
    gx: Vec<f64>,
    gy: Vec<f64>,
    div: Vec<f64>,
}

impl Workspace {
    fn new(n: usize) -> Self {
        Self {
            gx: vec![0.0; n],
            gy: vec![0.0; n],
            div: vec![0.0; n],
        }
    }
}

impl SaddleProblem<'_> {
    fn dims(&self) -> (usize, usize, f64) {
        (self.f.width(), self.f.height(), 1.0 / self.f.spacing())
    }

    fn integrand(&self, k: usize, t: f64) -> f64 {
        let base = if self.power == 0.0 {
            t
        } else {
            t.powf(1.0 + self.power)
        };
        base + self.quad[k] * t * t
    }

    /// `g_x^*(p)` as a function of `s = |p|`; infinite outside the domain.
    fn conjugate(&self, k: usize, s: f64) -> f64 {
        let b = self.quad[k];
        let eps = self.power;
        if eps == 0.0 {
            if b > 0.0 {
                let excess = (s - 1.0).max(0.0);
                excess * excess / (4.0 * b)
            } else if s > 1.0 + 1e-9 {
                f64::INFINITY
            } else {
                0.0
            }
        } else {
            // maximizer r of s r - r^{1+ε} - b r² satisfies (1+ε) r^ε + 2b r = s
            let r = radial_root(1.0 + eps, 2.0 * b, s, eps);
            r * s * eps / (1.0 + eps) + b * r * r * (1.0 - eps) / (1.0 + eps)
        }
    }

    /// Scale factor mapping `q` to `prox_{σ g_x^*}(q)`.
    fn dual_prox_scale(&self, k: usize, q: f64, sigma: f64) -> f64 {
        let b = self.quad[k];
        if self.power == 0.0 {
            if b == 0.0 {
                1.0 / q.max(1.0)
            } else if q <= 1.0 {
                1.0
            } else {
                (2.0 * b * q + sigma) / (2.0 * b + sigma) / q
            }
        } else if q == 0.0 {
            1.0
        } else {
            // Moreau: q - σ prox_{g/σ}(q/σ), the inner prox radial with
            // radius r solving r + ((1+ε) r^ε + 2b r)/σ = q/σ
            let eps = self.power;
            let r = radial_root((1.0 + eps) / sigma, 1.0 + 2.0 * b / sigma, q / sigma, eps);
            (1.0 - sigma * r / q).max(0.0)
        }
    }

    fn primal(&self, u: &[f64], ws: &mut Workspace) -> f64 {
        let (w, h, inv_h) = self.dims();
        gradient_into(u, w, h, inv_h, &mut ws.gx, &mut ws.gy);
        let dens: Vec<f64> = (0..u.len())
            .map(|k| {
                let t = ws.gx[k].hypot(ws.gy[k]);
                let r = u[k] - self.f.values()[k];
                self.integrand(k, t) + self.lambda * r * r
            })
            .collect();
        self.f.cell_area() * pairwise_sum(&dens)
    }

    fn dual(&self, px: &[f64], py: &[f64], ws: &mut Workspace) -> f64 {
        let (w, h, inv_h) = self.dims();
        divergence_into(px, py, w, h, inv_h, &mut ws.div);
        let dens: Vec<f64> = (0..px.len())
            .map(|k| {
                let d = ws.div[k];
                let conj = self.conjugate(k, px[k].hypot(py[k]));
                -self.f.values()[k] * d - d * d / (4.0 * self.lambda) - conj
            })
            .collect();
        if dens.iter().any(|v| v.is_infinite()) {
            return f64::NEG_INFINITY;
        }
        self.f.cell_area() * pairwise_sum(&dens)
    }

    fn solve(&self, opts: &SolveOptions) -> Result<(Vec<f64>, f64, f64, usize, bool, Vec<TraceRow>)> {
        let f = self.f;
        let n = f.len();
        let (w, h, inv_h) = self.dims();
        let (lo, hi) = (f.min(), f.max());
        let mut ws = Workspace::new(n);

        let zeros = vec![0.0; n];
        let reference = self.primal(f.values(), &mut ws) - self.dual(&zeros, &zeros, &mut ws);
        let threshold = opts.threshold(reference);

        let mut u = initial_field(f, opts)?.into_values();
        let mut u_bar = u.clone();
        let mut u_old = vec![0.0; n];
        let mut px = vec![0.0; n];
        let mut py = vec![0.0; n];

        let l2 = GRAD_NORM_SQ_TIMES_H2 * inv_h * inv_h;
        let mut tau = opts.primal_step * f.spacing();
        let mut sigma = 1.0 / (tau * l2);
        let gamma = 2.0 * self.lambda;

        let mut trace = Vec::new();
        let eval = |u: &[f64], px: &[f64], py: &[f64], ws: &mut Workspace| {
            let mut uc = u.to_vec();
            clamp_to_range(&mut uc, lo, hi);
            let primal = self.primal(&uc, ws);
            let gap = (primal - self.dual(px, py, ws)).max(0.0);
            (primal, gap)
        };

        let (e0, mut gap) = eval(&u, &px, &py, &mut ws);
        trace.push(TraceRow {
            iter: 0,
            energy: e0,
            certificate: gap,
        });
        let mut iterations = 0;
        let mut converged = gap <= threshold;

        while !converged && iterations < opts.max_iters {
            iterations += 1;
            gradient_into(&u_bar, w, h, inv_h, &mut ws.gx, &mut ws.gy);
            for k in 0..n {
                let qx = px[k] + sigma * ws.gx[k];
                let qy = py[k] + sigma * ws.gy[k];
                let scale = self.dual_prox_scale(k, qx.hypot(qy), sigma);
                px[k] = qx * scale;
                py[k] = qy * scale;
            }
            divergence_into(&px, &py, w, h, inv_h, &mut ws.div);
            u_old.copy_from_slice(&u);
            let c = 2.0 * self.lambda * tau;
            for k in 0..n {
                u[k] = (u[k] + tau * ws.div[k] + c * f.values()[k]) / (1.0 + c);
            }
            let theta = 1.0 / (1.0 + gamma * tau).sqrt();
            tau *= theta;
            sigma /= theta;
            for k in 0..n {
                u_bar[k] = u[k] + theta * (u[k] - u_old[k]);
            }

            if iterations % opts.check_every == 0 || iterations == opts.max_iters {
                let (energy, g) = eval(&u, &px, &py, &mut ws);
                gap = g;
                trace.push(TraceRow {
                    iter: iterations,
                    energy,
                    certificate: gap,
                });
                converged = gap <= threshold;
            }
        }
        clamp_to_range(&mut u, lo, hi);
        Ok((u, gap, threshold, iterations, converged, trace))
    }
}

/// Minimizes `I(u) = |Du|(Ω) + ∫ (a|∇u|)² + |u - f|²`. The minimizer is
/// unique because the fidelity term is strictly convex.
pub fn minimize_i(f: &ScalarField, a: &ScalarField, opts: &SolveOptions) -> Result<SolveResult> {
    opts.validate()?;
    check_weight(f, a)?;
    let problem = SaddleProblem {
        f,
        quad: a.values().iter().map(|v| v * v).collect(),
        lambda: 1.0,
        power: 0.0,
    };
    let (u, certificate, tolerance, iterations, converged, trace) = problem.solve(opts)?;
    let minimizer = f.with_values(u)?;
    let report = energy_i(&minimizer, f, a)?;
    Ok(SolveResult {
        minimizer,
        report,
        certificate,
        tolerance,
        iterations,
        converged,
        trace,
    })
}

// ---------------------------------------------------------------------------
// Smooth descent
// ---------------------------------------------------------------------------

/// A convex integrand `ψ_x(|∇u|)`, evaluated pixelwise.
pub trait RadialIntegrand: Sync {
    fn value(&self, pixel: usize, t: f64) -> f64;

    /// `ψ'(t)/t`, finite at `t = 0`.
    fn diffusivity(&self, pixel: usize, t: f64) -> f64;

    /// A bound on `max(ψ'', ψ'/t)` over all pixels and slopes, when one exists.
    fn curvature_bound(&self) -> Option<f64>;
}

/// `t^{1+ε} + c_x t²`.
#[derive(Clone, Debug)]
pub struct PowerPlusQuadratic {
    pub eps: f64,
    pub quad: Vec<f64>,
}

impl RadialIntegrand for PowerPlusQuadratic {
    fn value(&self, pixel: usize, t: f64) -> f64 {
        t.powf(1.0 + self.eps) + self.quad[pixel] * t * t
    }

    fn diffusivity(&self, pixel: usize, t: f64) -> f64 {
        let power = if t < ZERO_GRADIENT_GUARD {
            0.0
        } else {
            (1.0 + self.eps) * t.powf(self.eps - 1.0)
        };
        power + 2.0 * self.quad[pixel]
    }

    fn curvature_bound(&self) -> Option<f64> {
        None
    }
}

/// `c t²` with a constant coefficient: a pure screened-Laplacian energy.
#[derive(Clone, Copy, Debug)]
pub struct Quadratic {
    pub coef: f64,
}

impl RadialIntegrand for Quadratic {
    fn value(&self, _pixel: usize, t: f64) -> f64 {
        self.coef * t * t
    }

    fn diffusivity(&self, _pixel: usize, _t: f64) -> f64 {
        2.0 * self.coef
    }

    fn curvature_bound(&self) -> Option<f64> {
        Some(2.0 * self.coef)
    }
}

/// Outcome of [`minimize_smooth`].
#[derive(Clone, Debug)]
pub struct DescentOutcome {
    pub minimizer: ScalarField,
    pub energy: f64,
    pub certificate: f64,
    pub tolerance: f64,
    pub iterations: usize,
    pub converged: bool,
    /// One row per accepted iterate, starting with the initial field.
    pub trace: Vec<TraceRow>,
}

struct SmoothProblem<'a, R: RadialIntegrand + ?Sized> {
    f: &'a ScalarField,
    integrand: &'a R,
}

impl<R: RadialIntegrand + ?Sized> SmoothProblem<'_, R> {
    fn energy(&self, u: &[f64], ws: &mut Workspace) -> f64 {
        let (w, h) = (self.f.width(), self.f.height());
        gradient_into(u, w, h, 1.0 / self.f.spacing(), &mut ws.gx, &mut ws.gy);
        let dens: Vec<f64> = (0..u.len())
            .map(|k| {
                let t = ws.gx[k].hypot(ws.gy[k]);
                let r = u[k] - self.f.values()[k];
                self.integrand.value(k, t) + r * r
            })
            .collect();
        self.f.cell_area() * pairwise_sum(&dens)
    }

    /// Gradient of the energy with respect to the `h^2`-weighted inner product:
    /// `-div(ψ'(|∇u|)/|∇u| ∇u) + 2(u - f)`.
    fn gradient(&self, u: &[f64], out: &mut [f64], ws: &mut Workspace) {
        let (w, h, inv_h) = (self.f.width(), self.f.height(), 1.0 / self.f.spacing());
        gradient_into(u, w, h, inv_h, &mut ws.gx, &mut ws.gy);
        for k in 0..u.len() {
            let t = ws.gx[k].hypot(ws.gy[k]);
            let d = self.integrand.diffusivity(k, t);
            ws.gx[k] *= d;
            ws.gy[k] *= d;
        }
        divergence_into(&ws.gx, &ws.gy, w, h, inv_h, &mut ws.div);
        for k in 0..u.len() {
            out[k] = -ws.div[k] + 2.0 * (u[k] - self.f.values()[k]);
        }
    }

    fn weighted_norm(&self, v: &[f64]) -> f64 {
        let sq: Vec<f64> = v.iter().map(|x| x * x).collect();
        (self.f.cell_area() * pairwise_sum(&sq)).sqrt()
    }
}

/// Minimizes `∫ ψ_x(|∇u|) + |u - f|²` for a smooth convex integrand by
/// gradient descent. With [`StepRule::Backtracking`] each step starts from
/// a Barzilai–Borwein estimate and is halved until the Armijo condition
/// (constant `1e-4`) holds, so the accepted energies never increase.
/// [`StepRule::Fixed`] needs a curvature bound and uses `1/L`.
pub fn minimize_smooth<R: RadialIntegrand + ?Sized>(
    f: &ScalarField,
    integrand: &R,
    opts: &SolveOptions,
) -> Result<DescentOutcome> {
    opts.validate()?;
    let problem = SmoothProblem { f, integrand };
    let n = f.len();
    let mut ws = Workspace::new(n);
    let h2 = f.cell_area();

    let fixed_step = match opts.step_rule {
        StepRule::Fixed => {
            let bound = integrand.curvature_bound().ok_or_else(|| {
                Error::param(
                    "step_rule",
                    "fixed steps need a Lipschitz energy gradient; t^{1+eps} has none, use backtracking",
                )
            })?;
            Some(1.0 / (2.0 + GRAD_NORM_SQ_TIMES_H2 / h2 * bound))
        }
        StepRule::Backtracking => None,
    };

    let mut g = vec![0.0; n];
    problem.gradient(f.values(), &mut g, &mut ws);
    let threshold = opts.threshold(problem.weighted_norm(&g));

    let mut x = initial_field(f, opts)?.into_values();
    let mut energy = problem.energy(&x, &mut ws);
    problem.gradient(&x, &mut g, &mut ws);
    let mut cert = problem.weighted_norm(&g);
    let mut trace = vec![TraceRow {
        iter: 0,
        energy,
        certificate: cert,
    }];

    let mut step = fixed_step.unwrap_or(h2 / (GRAD_NORM_SQ_TIMES_H2 * 4.0));
    let mut trial = vec![0.0; n];
    let mut g_new = vec![0.0; n];
    let mut iterations = 0;
    let mut converged = cert <= threshold;

    while !converged && iterations < opts.max_iters {
        let gg = cert * cert;
        let accepted = if let Some(s) = fixed_step {
            for k in 0..n {
                trial[k] = x[k] - s * g[k];
            }
            Some(problem.energy(&trial, &mut ws))
        } else {
            let mut s = step;
            let mut found = None;
            for _ in 0..200 {
                for k in 0..n {
                    trial[k] = x[k] - s * g[k];
                }
                let e = problem.energy(&trial, &mut ws);
                if e <= energy - ARMIJO * s * gg {
                    found = Some(e);
                    break;
                }
                s *= 0.5;
            }
            step = s;
            found
        };
        let Some(e_new) = accepted else {
            // no decrease representable at this precision
            break;
        };
        iterations += 1;
        problem.gradient(&trial, &mut g_new, &mut ws);

        if fixed_step.is_none() {
            // Barzilai–Borwein guess for the next trial step
            let mut sxx = 0.0;
            let mut sxg = 0.0;
            for k in 0..n {
                let dx = trial[k] - x[k];
                sxx += dx * dx;
                sxg += dx * (g_new[k] - g[k]);
            }
            step = if sxg > 0.0 { sxx / sxg } else { 2.0 * step };
        }

        std::mem::swap(&mut x, &mut trial);
        std::mem::swap(&mut g, &mut g_new);
        energy = e_new;
        cert = problem.weighted_norm(&g);
        trace.push(TraceRow {
            iter: iterations,
            energy,
            certificate: cert,
        });
        converged = cert <= threshold;
    }
    Ok(DescentOutcome {
        minimizer: f.with_values(x)?,
        energy,
        certificate: cert,
        tolerance: threshold,
        iterations,
        converged,
        trace,
    })
}

/// Minimizes the ε-regularized energy in the requested mode.
///
/// All modes run the primal–dual iteration with integrand
/// `|q|^{1+ε'} + b_x|q|²`, where `ε' = ε` when the exponent is regularized
/// (else 0) and `b_x = a² (+ ε when the weight is regularized)`. In weight
/// mode `eps = 0` is allowed and reproduces [`minimize_i`]. The certificate
/// is the duality gap: for small `ε` the exact minimizer has slopes near
/// `c^{1/ε}` on flat regions, far below double precision, so a
/// gradient-norm certificate cannot be driven down there.
pub fn minimize_i_eps(
    f: &ScalarField,
    a: &ScalarField,
    eps: f64,
    mode: RegularizationMode,
    opts: &SolveOptions,
) -> Result<SolveResult> {
    opts.validate()?;
    check_weight(f, a)?;
    let eps_ok = match mode {
        RegularizationMode::Weight => eps.is_finite() && eps >= 0.0,
        _ => eps.is_finite() && eps > 0.0,
    };
    if !eps_ok {
        return Err(Error::param(
            "eps",
            format!("{eps} is outside the admissible range for {mode} mode"),
        ));
    }
    let extra = if mode.regularizes_weight() { eps } else { 0.0 };
    let problem = SaddleProblem {
        f,
        quad: a.values().iter().map(|v| extra + v * v).collect(),
        lambda: 1.0,
        power: if mode.regularizes_exponent() { eps } else { 0.0 },
    };
    let (u, certificate, tolerance, iterations, converged, trace) = problem.solve(opts)?;
    let minimizer = f.with_values(u)?;
    let report = if eps == 0.0 {
        energy_i(&minimizer, f, a)?
    } else {
        energy_i_eps(&minimizer, f, a, eps, mode)?
    };
    Ok(SolveResult {
        minimizer,
        report,
        certificate,
        tolerance,
        iterations,
        converged,
        trace,
    })
}

// ---------------------------------------------------------------------------
// ROF by fast gradient projection on the dual
// ---------------------------------------------------------------------------

/// Minimizes `|Du|(Ω) + λ ∫ |u - f|²`.
///
/// Works on the dual `min_{|p| <= 1} ‖div p + 2λ f‖²` with accelerated
/// projected gradient steps and recovers `u = f + div p / (2λ)`. The
/// certificate is the duality gap.
pub fn rof_baseline(f: &ScalarField, lambda: f64, opts: &SolveOptions) -> Result<SolveResult> {
    opts.validate()?;
    if !(lambda.is_finite() && lambda > 0.0) {
        return Err(Error::param("lambda", format!("must be > 0, got {lambda}")));
    }
    let n = f.len();
    let (w, h, inv_h) = (f.width(), f.height(), 1.0 / f.spacing());
    let problem = SaddleProblem {
        f,
        quad: vec![0.0; n],
        lambda,
        power: 0.0,
    };
    let mut ws = Workspace::new(n);
    let (lo, hi) = (f.min(), f.max());
    let zeros = vec![0.0; n];
    let reference = problem.primal(f.values(), &mut ws) - problem.dual(&zeros, &zeros, &mut ws);
    let threshold = opts.threshold(reference);

    // The dual has no use for a primal start other than through p = 0.
    let mut px = vec![0.0; n];
    let mut py = vec![0.0; n];
    let mut rx = px.clone();
    let mut ry = py.clone();
    let mut px_old = px.clone();
    let mut py_old = py.clone();
    let mut t: f64 = 1.0;
    let step = f.cell_area() / GRAD_NORM_SQ_TIMES_H2;
    let two_lambda = 2.0 * lambda;

    let primal_of = |px: &[f64], py: &[f64], ws: &mut Workspace| {
        divergence_into(px, py, w, h, inv_h, &mut ws.div);
        let mut u: Vec<f64> = (0..n)
            .map(|k| f.values()[k] + ws.div[k] / two_lambda)
            .collect();
        clamp_to_range(&mut u, lo, hi);
        u
    };

    let mut trace = Vec::new();
    let u0 = primal_of(&px, &py, &mut ws);
    let mut gap = (problem.primal(&u0, &mut ws) - problem.dual(&px, &py, &mut ws)).max(0.0);
    trace.push(TraceRow {
        iter: 0,
        energy: problem.primal(&u0, &mut ws),
        certificate: gap,
    });
    let mut iterations = 0;
    let mut converged = gap <= threshold;
    let mut dual_prev = f64::NEG_INFINITY;

    while !converged && iterations < opts.max_iters {
        iterations += 1;
        divergence_into(&rx, &ry, w, h, inv_h, &mut ws.div);
        let v: Vec<f64> = (0..n)
            .map(|k| ws.div[k] + two_lambda * f.values()[k])
            .collect();
        gradient_into(&v, w, h, inv_h, &mut ws.gx, &mut ws.gy);
        px_old.copy_from_slice(&px);
        py_old.copy_from_slice(&py);
        for k in 0..n {
            let qx = rx[k] + step * ws.gx[k];
            let qy = ry[k] + step * ws.gy[k];
            let s = 1.0 / qx.hypot(qy).max(1.0);
            px[k] = qx * s;
            py[k] = qy * s;
        }
        let t_next = (1.0 + (1.0 + 4.0 * t * t).sqrt()) / 2.0;
        let beta = (t - 1.0) / t_next;
        for k in 0..n {
            rx[k] = px[k] + beta * (px[k] - px_old[k]);
            ry[k] = py[k] + beta * (py[k] - py_old[k]);
        }
        t = t_next;

        if iterations % opts.check_every == 0 || iterations == opts.max_iters {
            let u = primal_of(&px, &py, &mut ws);
            let primal = problem.primal(&u, &mut ws);
            let dual = problem.dual(&px, &py, &mut ws);
            gap = (primal - dual).max(0.0);
            trace.push(TraceRow {
                iter: iterations,
                energy: primal,
                certificate: gap,
            });
            converged = gap <= threshold;
            // adaptive restart of the momentum when the dual objective drops
            if dual < dual_prev {
                t = 1.0;
                rx.copy_from_slice(&px);
                ry.copy_from_slice(&py);
            }
            dual_prev = dual;
        }
    }
    let minimizer = f.with_values(primal_of(&px, &py, &mut ws))?;
    let report = crate::energy::energy_i(&minimizer, f, &f.zeros_like())?;
    let report = EnergyReport {
        fidelity_part: lambda * report.fidelity_part,
        total: report.tv_part + lambda * report.fidelity_part,
        ..report
    };
    Ok(SolveResult {
        minimizer,
        report,
        certificate: gap,
        tolerance: threshold,
        iterations,
        converged,
        trace,
    })
}

/// Fraction of interior pixels (last row and column excluded) whose
/// forward-gradient magnitude is below `1e-6`; a globally constant image
/// scores 0 by convention.
pub fn staircase_metric(u: &ScalarField) -> f64 {
    staircase_metric_with(u, 1e-6)
}

pub fn staircase_metric_with(u: &ScalarField, threshold: f64) -> f64 {
    if u.is_constant() {
        return 0.0;
    }
    let g = crate::grid::gradient_forward(u);
    let (w, h) = (u.width(), u.height());
    let mut flat = 0usize;
    for j in 0..h - 1 {
        for i in 0..w - 1 {
            let k = u.index(i, j);
            if g.x()[k].hypot(g.y()[k]) < threshold {
                flat += 1;
            }
        }
    }
    flat as f64 / ((w - 1) * (h - 1)) as f64
}
