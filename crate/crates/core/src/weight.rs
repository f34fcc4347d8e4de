//! Edge-adaptive weights `a(x)`: estimation from data, Hölder
//! regularization, and checks of the regularity the convergence results
//! assume.
//!
//! The estimator is a linear clamp of the presmoothed gradient magnitude,
//! `a = a_max (1 - |∇(G_σ * f)| / T)_+`, followed by the α-Hölder lower
//! envelope with constant `L`. It is one admissible choice; any nonnegative
//! weight vanishing on edges fits the model.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{gaussian_smooth, gradient_forward, ScalarField};

/// Random pairs sampled by [`check_remark_condition`].
pub const REMARK_SAMPLES: usize = 100_000;
/// Every pair within this many pixel spacings is checked exhaustively.
pub const REMARK_NEAR_RADIUS: usize = 4;
const REMARK_SEED: u64 = 0x5eed_a11;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WeightSpec {
    pub presmooth_sigma: f64,
    pub edge_threshold: f64,
    pub a_max: f64,
    pub holder_alpha: f64,
    pub modulus_constant: f64,
}

impl Default for WeightSpec {
    fn default() -> Self {
        Self {
            presmooth_sigma: 1.0,
            edge_threshold: 0.1,
            a_max: 10.0,
            holder_alpha: 1.0,
            modulus_constant: 1.0,
        }
    }
}

impl WeightSpec {
    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("presmooth_sigma", self.presmooth_sigma),
            ("edge_threshold", self.edge_threshold),
            ("a_max", self.a_max),
            ("modulus_constant", self.modulus_constant),
        ];
        for (name, v) in positive {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::param(name, format!("must be > 0, got {v}")));
            }
        }
        if !(self.holder_alpha > 0.5 && self.holder_alpha <= 1.0) {
            return Err(Error::param(
                "holder_alpha",
                format!("must lie in (1/2, 1], got {}", self.holder_alpha),
            ));
        }
        Ok(())
    }
}

/// The unregularized clamp `a_max (1 - |∇(G_σ * f)| / T)_+`.
pub fn edge_clamp(f: &ScalarField, spec: &WeightSpec) -> Result<ScalarField> {
    spec.validate()?;
    let smooth = gaussian_smooth(f, spec.presmooth_sigma)?;
    let mags = gradient_forward(&smooth).magnitudes();
    let values = mags
        .iter()
        .map(|g| spec.a_max * (1.0 - g / spec.edge_threshold).max(0.0))
        .collect();
    f.with_values(values)
}

/// Edge clamp followed by [`modulus_regularize`]; `0 <= a <= a_max`.
pub fn estimate_weight(f: &ScalarField, spec: &WeightSpec) -> Result<ScalarField> {
    let raw = edge_clamp(f, spec)?;
    modulus_regularize(&raw, spec.holder_alpha, spec.modulus_constant)
}

/// The α-Hölder lower envelope `ā(x) = min_y a(y) + L|x - y|^α`.
///
/// Computed exactly. Only `y` with `L|x - y|^α < a(x)` can beat `y = x`,
/// so the search at `x` is limited to that disk.
pub fn modulus_regularize(a: &ScalarField, alpha: f64, l: f64) -> Result<ScalarField> {
    if !(alpha > 0.0 && alpha <= 1.0) {
        return Err(Error::param("alpha", format!("must lie in (0, 1], got {alpha}")));
    }
    if !(l.is_finite() && l > 0.0) {
        return Err(Error::param("L", format!("must be > 0, got {l}")));
    }
    if a.values().iter().any(|&v| v < 0.0) {
        return Err(Error::param("a", "weight must be nonnegative"));
    }
    let (w, h, sp) = (a.width(), a.height(), a.spacing());
    let reach = |v: f64| ((v / l).powf(1.0 / alpha) / sp).floor() as usize;
    let max_reach = reach(a.max()).min(w.max(h));
    let side = max_reach + 1;
    // cost[dj * side + di] = L (h |(di, dj)|)^α
    let cost: Vec<f64> = (0..side * side)
        .map(|t| {
            let (di, dj) = ((t % side) as f64, (t / side) as f64);
            l * (sp * di.hypot(dj)).powf(alpha)
        })
        .collect();

    let mut out = vec![0.0; w * h];
    out.par_chunks_mut(w).enumerate().for_each(|(j, row)| {
        for (i, slot) in row.iter_mut().enumerate() {
            let ax = a.get(i, j);
            let r = reach(ax).min(max_reach);
            let mut best = ax;
            for yj in j.saturating_sub(r)..=(j + r).min(h - 1) {
                let dj = yj.abs_diff(j);
                for yi in i.saturating_sub(r)..=(i + r).min(w - 1) {
                    let c = cost[dj * side + yi.abs_diff(i)];
                    if c >= best {
                        continue;
                    }
                    let cand = a.get(yi, yj) + c;
                    if cand < best {
                        best = cand;
                    }
                }
            }
            *slot = best;
        }
    });
    a.with_values(out)
}

/// Smallest `C` with `a(x)^{1/α} <= C max{|x - y|, a(y)^{1/α}}` over
/// [`REMARK_SAMPLES`] seeded random pairs, all pairs within
/// [`REMARK_NEAR_RADIUS`] pixels, and the diagonal `y = x`.
pub fn check_remark_condition(a: &ScalarField, alpha: f64) -> Result<f64> {
    check_remark_condition_with(a, alpha, REMARK_SAMPLES, REMARK_SEED)
}

pub fn check_remark_condition_with(
    a: &ScalarField,
    alpha: f64,
    samples: usize,
    seed: u64,
) -> Result<f64> {
    if !(alpha > 0.0 && alpha <= 1.0) {
        return Err(Error::param("alpha", format!("must lie in (0, 1], got {alpha}")));
    }
    if a.values().iter().any(|&v| v < 0.0) {
        return Err(Error::param("a", "weight must be nonnegative"));
    }
    let (w, h, sp) = (a.width(), a.height(), a.spacing());
    let root: Vec<f64> = a.values().iter().map(|v| v.powf(1.0 / alpha)).collect();
    let ratio = |x: usize, y: usize| -> f64 {
        if root[x] == 0.0 {
            return 0.0;
        }
        let (xi, xj) = ((x % w) as f64, (x / w) as f64);
        let (yi, yj) = ((y % w) as f64, (y / w) as f64);
        let dist = sp * (xi - yi).hypot(xj - yj);
        root[x] / dist.max(root[y])
    };

    let r = REMARK_NEAR_RADIUS as isize;
    let near = (0..h)
        .into_par_iter()
        .map(|j| {
            let mut best = 0.0f64;
            for i in 0..w {
                let x = j * w + i;
                for dj in -r..=r {
                    for di in -r..=r {
                        if di * di + dj * dj > r * r {
                            continue;
                        }
                        let (yi, yj) = (i as isize + di, j as isize + dj);
                        if yi < 0 || yj < 0 || yi >= w as isize || yj >= h as isize {
                            continue;
                        }
                        best = best.max(ratio(x, yj as usize * w + yi as usize));
                    }
                }
            }
            best
        })
        .reduce(|| 0.0, f64::max);

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = w * h;
    let mut far = 0.0f64;
    for _ in 0..samples {
        let x = rng.random_range(0..n);
        let y = rng.random_range(0..n);
        far = far.max(ratio(x, y));
    }
    Ok(near.max(far))
}

/// Fraction of the `2W + 2H - 4` boundary pixels where `a > tol`.
pub fn boundary_positivity(a: &ScalarField, tol: f64) -> f64 {
    let boundary = a.boundary_indices();
    let positive = boundary.iter().filter(|&&k| a.values()[k] > tol).count();
    positive as f64 / boundary.len() as f64
}

#[cfg(test)]
mod tests {
    use super::*;

    fn field(w: usize, h: usize, f: impl Fn(usize, usize) -> f64) -> ScalarField {
        ScalarField::from_fn(w, h, 1.0, f).unwrap()
    }

    #[test]
    fn constant_data_gives_ceiling_weight() {
        let f = field(16, 16, |_, _| 0.3);
        let a = estimate_weight(&f, &WeightSpec::default()).unwrap();
        assert!(a.values().iter().all(|&v| v == 10.0));
    }

    #[test]
    fn spike_becomes_clipped_cone() {
        let a = field(15, 15, |i, j| if (i, j) == (7, 7) { 5.0 } else { 0.0 });
        let out = modulus_regularize(&a, 1.0, 1.0).unwrap();
        // zero elsewhere pulls everything to 0 except the spike's own min
        for j in 0..15 {
            for i in 0..15 {
                let expected = if (i, j) == (7, 7) { 1.0 } else { 0.0 };
                assert!((out.get(i, j) - expected).abs() < 1e-12, "{i},{j}");
            }
        }
    }

    #[test]
    fn lipschitz_input_is_unchanged() {
        let a = field(20, 20, |i, j| 6.0 + 0.5 * (i as f64) - 0.25 * (j as f64));
        let out = modulus_regularize(&a, 1.0, 1.0).unwrap();
        for (x, y) in a.values().iter().zip(out.values()) {
            assert!((x - y).abs() <= 1e-12);
        }
    }

    #[test]
    fn validation() {
        let spec = WeightSpec {
            holder_alpha: 0.5,
            ..WeightSpec::default()
        };
        assert!(spec.validate().is_err());
        let spec = WeightSpec {
            a_max: 0.0,
            ..WeightSpec::default()
        };
        assert!(spec.validate().is_err());
    }

    #[test]
    fn left_edge_zero_fraction() {
        let a = field(10, 6, |i, _| if i == 0 { 0.0 } else { 1.0 });
        let perimeter = 2 * 10 + 2 * 6 - 4;
        assert_eq!(boundary_positivity(&a, 0.0), 1.0 - 6.0 / perimeter as f64);
    }
}
