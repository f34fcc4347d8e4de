//! Capped fractional maximal functions
//! `M_α^σ μ(x) = sup_{r <= diam Ω} min{|μ|(B(x,r)), r^σ} / |B(x,r)|^{1-α/n}`
//! of discrete measures, their dyadic majorant, the plane-measure sharpness
//! experiment, and the ball-decay check for gradient measures.

use std::collections::BTreeMap;

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::grid::{gradient_forward, ScalarField};

/// A finite sum of weighted point masses in an axis-aligned box.
#[derive(Clone, Debug, PartialEq)]
pub struct DiscreteMeasure {
    dimension: usize,
    lo: Vec<f64>,
    hi: Vec<f64>,
    /// Atom positions, `dimension` coordinates per atom.
    positions: Vec<f64>,
    /// Atom weights, `components` entries per atom (1 or `dimension`).
    weights: Vec<f64>,
    components: usize,
    masses: Vec<f64>,
    total_variation: f64,
}

impl DiscreteMeasure {
    /// Nonnegative scalar atoms.
    pub fn scalar(lo: Vec<f64>, hi: Vec<f64>, positions: Vec<Vec<f64>>, weights: Vec<f64>) -> Result<Self> {
        if weights.iter().any(|&w| !(w.is_finite() && w >= 0.0)) {
            return Err(Error::InvalidField("scalar atom weights must be finite and >= 0".into()));
        }
        Self::build(lo, hi, positions, weights, 1)
    }

    /// Vector-valued atoms, one `dimension`-vector per atom.
    pub fn vector(lo: Vec<f64>, hi: Vec<f64>, positions: Vec<Vec<f64>>, weights: Vec<Vec<f64>>) -> Result<Self> {
        let n = lo.len();
        if weights.iter().any(|w| w.len() != n) {
            return Err(Error::InvalidField(format!("vector atoms need {n} components")));
        }
        let flat: Vec<f64> = weights.into_iter().flatten().collect();
        if flat.iter().any(|w| !w.is_finite()) {
            return Err(Error::InvalidField("atom weights must be finite".into()));
        }
        Self::build(lo, hi, positions, flat, n)
    }

    fn build(
        lo: Vec<f64>,
        hi: Vec<f64>,
        positions: Vec<Vec<f64>>,
        weights: Vec<f64>,
        components: usize,
    ) -> Result<Self> {
        let n = lo.len();
        if !(n == 2 || n == 3) || hi.len() != n {
            return Err(Error::param("dimension", format!("must be 2 or 3, got {n}")));
        }
        if lo.iter().zip(&hi).any(|(a, b)| !(a < b)) {
            return Err(Error::InvalidField("domain box must have lo < hi".into()));
        }
        if positions.len() * components != weights.len() {
            return Err(Error::InvalidField("one weight per atom required".into()));
        }
        for p in &positions {
            if p.len() != n || p.iter().zip(lo.iter().zip(&hi)).any(|(x, (a, b))| !(a <= x && x <= b)) {
                return Err(Error::InvalidField(format!("atom {p:?} lies outside the domain")));
            }
        }
        let masses: Vec<f64> = weights
            .chunks(components)
            .map(|w| w.iter().map(|c| c * c).sum::<f64>().sqrt())
            .collect();
        let total_variation = crate::grid::pairwise_sum(&masses);
        Ok(Self {
            dimension: n,
            lo,
            hi,
            positions: positions.into_iter().flatten().collect(),
            weights,
            components,
            masses,
            total_variation,
        })
    }

    pub fn dimension(&self) -> usize {
        self.dimension
    }

    pub fn len(&self) -> usize {
        self.masses.len()
    }

    pub fn is_empty(&self) -> bool {
        self.masses.is_empty()
    }

    pub fn total_variation(&self) -> f64 {
        self.total_variation
    }

    pub fn position(&self, atom: usize) -> &[f64] {
        &self.positions[atom * self.dimension..(atom + 1) * self.dimension]
    }

    pub fn weight(&self, atom: usize) -> &[f64] {
        &self.weights[atom * self.components..(atom + 1) * self.components]
    }

    /// `|weight|` of one atom.
    pub fn mass(&self, atom: usize) -> f64 {
        self.masses[atom]
    }

    pub fn domain(&self) -> (&[f64], &[f64]) {
        (&self.lo, &self.hi)
    }

    pub fn diameter(&self) -> f64 {
        self.lo
            .iter()
            .zip(&self.hi)
            .map(|(a, b)| (b - a) * (b - a))
            .sum::<f64>()
            .sqrt()
    }

    /// The measure with every weight multiplied by `factor`.
    pub fn scaled(&self, factor: f64) -> Self {
        let mut out = self.clone();
        out.weights.iter_mut().for_each(|w| *w *= factor);
        out.masses.iter_mut().for_each(|m| *m *= factor.abs());
        out.total_variation = crate::grid::pairwise_sum(&out.masses);
        out
    }

    fn distance(&self, atom: usize, x: &[f64]) -> f64 {
        self.position(atom)
            .iter()
            .zip(x)
            .map(|(p, q)| (p - q) * (p - q))
            .sum::<f64>()
            .sqrt()
    }

    /// `|μ|(B(x, r))` for the closed ball.
    pub fn ball_mass(&self, x: &[f64], r: f64) -> f64 {
        let inside: Vec<f64> = (0..self.len())
            .filter(|&k| self.distance(k, x) <= r)
            .map(|k| self.masses[k])
            .collect();
        crate::grid::pairwise_sum(&inside)
    }

    /// `μ(B(x, r))` componentwise, for vector measures.
    pub fn ball_vector(&self, x: &[f64], r: f64) -> Vec<f64> {
        let mut acc = vec![0.0; self.components];
        for k in 0..self.len() {
            if self.distance(k, x) <= r {
                for (a, w) in acc.iter_mut().zip(self.weight(k)) {
                    *a += w;
                }
            }
        }
        acc
    }
}

/// Query points: centers of a `width x height` pixel grid in the plane of
/// the first two coordinates, remaining coordinates fixed by `slice`.
#[derive(Clone, Debug, PartialEq)]
pub struct QueryGrid {
    pub width: usize,
    pub height: usize,
    pub spacing: f64,
    pub origin: [f64; 2],
    pub slice: Vec<f64>,
}

impl QueryGrid {
    /// Pixel centers of `[0,1]^2` at the given resolution.
    pub fn unit_square(resolution: usize) -> Self {
        Self {
            width: resolution,
            height: resolution,
            spacing: 1.0 / resolution as f64,
            origin: [0.0, 0.0],
            slice: Vec::new(),
        }
    }

    pub fn point(&self, i: usize, j: usize) -> Vec<f64> {
        let mut p = vec![
            self.origin[0] + (i as f64 + 0.5) * self.spacing,
            self.origin[1] + (j as f64 + 0.5) * self.spacing,
        ];
        p.extend_from_slice(&self.slice);
        p
    }

    fn check(&self, mu: &DiscreteMeasure) -> Result<()> {
        if self.width < 2 || self.height < 2 || !(self.spacing > 0.0) {
            return Err(Error::param("query_points", "need at least 2x2 points and positive spacing"));
        }
        if 2 + self.slice.len() != mu.dimension() {
            return Err(Error::param("query_points", "slice does not match the measure's dimension"));
        }
        Ok(())
    }

    fn evaluate(&self, f: impl Fn(&[f64]) -> f64 + Sync) -> Result<ScalarField> {
        let mut out = vec![0.0; self.width * self.height];
        out.par_chunks_mut(self.width).enumerate().for_each(|(j, row)| {
            for (i, v) in row.iter_mut().enumerate() {
                *v = f(&self.point(i, j));
            }
        });
        ScalarField::new(self.width, self.height, self.spacing, out)
    }
}

/// Volume of the unit ball in dimension 2 or 3.
pub fn unit_ball_volume(n: usize) -> f64 {
    match n {
        2 => std::f64::consts::PI,
        _ => 4.0 / 3.0 * std::f64::consts::PI,
    }
}

/// `p* = 1 + α/(n - σ - α)`, the integrability threshold.
pub fn threshold_exponent(n: usize, alpha: f64, sigma: f64) -> f64 {
    1.0 + alpha / (n as f64 - sigma - alpha)
}

/// Requires `0 < σ < n` and `0 < α < n - σ`.
pub fn check_params(n: usize, alpha: f64, sigma: f64) -> Result<()> {
    let nf = n as f64;
    if !(sigma > 0.0 && sigma < nf) {
        return Err(Error::param("sigma", format!("need 0 < sigma < {n}, got {sigma}")));
    }
    if !(alpha > 0.0 && alpha < nf - sigma) {
        return Err(Error::param(
            "alpha",
            format!("need 0 < alpha < n - sigma = {}, got {alpha}", nf - sigma),
        ));
    }
    Ok(())
}

/// Radii `diam · 2^{-j}`, `j = 0..=J`, down to the first one not below `cell`.
pub fn radius_ladder(diam: f64, cell: f64) -> Vec<f64> {
    let mut radii = vec![diam];
    while radii[radii.len() - 1] / 2.0 >= cell {
        let next = radii[radii.len() - 1] / 2.0;
        radii.push(next);
    }
    radii
}

fn capped_ratio(mass: f64, r: f64, n: usize, alpha: f64, sigma: f64) -> f64 {
    let volume = unit_ball_volume(n) * r.powi(n as i32);
    mass.min(r.powf(sigma)) / volume.powf(1.0 - alpha / n as f64)
}

/// Masses of the closed balls `B(x, r_j)` for a decreasing radius list.
fn ladder_masses(mu: &DiscreteMeasure, x: &[f64], radii: &[f64]) -> Vec<f64> {
    let last = radii.len() - 1;
    let mut shells = vec![0.0; radii.len()];
    for k in 0..mu.len() {
        let d = mu.distance(k, x);
        if d > radii[0] {
            continue;
        }
        // index of the smallest ladder ball still containing the atom
        let mut j = if d == 0.0 {
            last
        } else {
            ((radii[0] / d).log2().floor() as usize).min(last)
        };
        while j > 0 && d > radii[j] {
            j -= 1;
        }
        while j < last && d <= radii[j + 1] {
            j += 1;
        }
        shells[j] += mu.mass(k);
    }
    let mut acc = 0.0;
    let mut out = vec![0.0; radii.len()];
    for j in (0..radii.len()).rev() {
        acc += shells[j];
        out[j] = acc;
    }
    out
}

/// Ball maximal function with radii on the geometric ladder
/// `diam Ω · 2^{-j}` down to one query-grid cell.
pub fn capped_maximal_ball(
    mu: &DiscreteMeasure,
    alpha: f64,
    sigma: f64,
    query: &QueryGrid,
) -> Result<ScalarField> {
    check_params(mu.dimension(), alpha, sigma)?;
    query.check(mu)?;
    let radii = radius_ladder(mu.diameter(), query.spacing);
    let n = mu.dimension();
    query.evaluate(|x| {
        let masses = ladder_masses(mu, x, &radii);
        radii
            .iter()
            .zip(&masses)
            .map(|(&r, &m)| capped_ratio(m, r, n, alpha, sigma))
            .fold(0.0, f64::max)
    })
}

/// Ball maximal function at one point with the supremum over every radius
/// in `[r_min, diam Ω]`.
///
/// Between consecutive atom distances the mass is constant and both
/// branches of the capped ratio decrease in `r`, so the supremum is attained
/// at `r_min` or at an atom distance.
pub fn capped_maximal_ball_exact_at(
    mu: &DiscreteMeasure,
    alpha: f64,
    sigma: f64,
    x: &[f64],
    r_min: f64,
) -> Result<f64> {
    check_params(mu.dimension(), alpha, sigma)?;
    if x.len() != mu.dimension() || !(r_min > 0.0) {
        return Err(Error::param("x", "point dimension mismatch or r_min <= 0"));
    }
    let n = mu.dimension();
    let diam = mu.diameter();
    let mut atoms: Vec<(f64, f64)> = (0..mu.len())
        .map(|k| (mu.distance(k, x), mu.mass(k)))
        .filter(|&(d, _)| d <= diam)
        .collect();
    atoms.sort_by(|a, b| a.0.total_cmp(&b.0));
    let mut best = 0.0f64;
    let mut mass = 0.0;
    let mut k = 0;
    while k < atoms.len() && atoms[k].0 <= r_min {
        mass += atoms[k].1;
        k += 1;
    }
    best = best.max(capped_ratio(mass, r_min, n, alpha, sigma));
    while k < atoms.len() {
        let r = atoms[k].0;
        while k < atoms.len() && atoms[k].0 == r {
            mass += atoms[k].1;
            k += 1;
        }
        best = best.max(capped_ratio(mass, r, n, alpha, sigma));
    }
    Ok(best)
}

pub fn capped_maximal_ball_exact(
    mu: &DiscreteMeasure,
    alpha: f64,
    sigma: f64,
    query: &QueryGrid,
) -> Result<ScalarField> {
    check_params(mu.dimension(), alpha, sigma)?;
    query.check(mu)?;
    query.evaluate(|x| capped_maximal_ball_exact_at(mu, alpha, sigma, x, query.spacing).unwrap_or(f64::NAN))
}

/// Half-open dyadic cubes `2^k [m, m+1)^n` anchored at the domain corner,
/// with accumulated `|μ|` per cube for every level in `k_min..=k_0`.
#[derive(Clone, Debug)]
pub struct DyadicGrid {
    dimension: usize,
    lo: Vec<f64>,
    k_min: i32,
    k_max: i32,
    /// `levels[k - k_min]` maps cube indices to `|μ|(cube)`.
    levels: Vec<BTreeMap<Vec<i64>, f64>>,
}

impl DyadicGrid {
    /// Levels from the cube side just above `cell` up to `k_0`, the smallest
    /// integer with `2^{k_0} > diam Ω`. The finest level is accumulated from
    /// atoms; every coarser level sums its children in index order.
    pub fn build(mu: &DiscreteMeasure, cell: f64) -> Result<Self> {
        if !(cell > 0.0) {
            return Err(Error::param("cell", "must be > 0"));
        }
        let n = mu.dimension();
        let diam = mu.diameter();
        let mut k_max = diam.log2().floor() as i32;
        while 2f64.powi(k_max) <= diam {
            k_max += 1;
        }
        let k_min = (cell.log2().floor() as i32 + 1).min(k_max);
        let lo = mu.domain().0.to_vec();

        let side = 2f64.powi(k_min);
        let mut finest: BTreeMap<Vec<i64>, f64> = BTreeMap::new();
        for a in 0..mu.len() {
            let key: Vec<i64> = mu
                .position(a)
                .iter()
                .zip(&lo)
                .map(|(x, l)| ((x - l) / side).floor() as i64)
                .collect();
            *finest.entry(key).or_insert(0.0) += mu.mass(a);
        }
        let mut levels = vec![finest];
        for _ in k_min..k_max {
            let child = &levels[levels.len() - 1];
            let mut parent: BTreeMap<Vec<i64>, f64> = BTreeMap::new();
            for (key, m) in child {
                let up: Vec<i64> = key.iter().map(|c| c.div_euclid(2)).collect();
                *parent.entry(up).or_insert(0.0) += m;
            }
            levels.push(parent);
        }
        Ok(Self {
            dimension: n,
            lo,
            k_min,
            k_max,
            levels,
        })
    }

    pub fn k_range(&self) -> (i32, i32) {
        (self.k_min, self.k_max)
    }

    /// `|μ|` of a cube at level `k`.
    pub fn cube_mass(&self, k: i32, index: &[i64]) -> f64 {
        self.levels[(k - self.k_min) as usize]
            .get(index)
            .copied()
            .unwrap_or(0.0)
    }

    /// Occupied cubes and their masses at level `k`.
    pub fn level(&self, k: i32) -> &BTreeMap<Vec<i64>, f64> {
        &self.levels[(k - self.k_min) as usize]
    }

    /// Index of the level-`k` cube containing `x`.
    pub fn cube_of(&self, k: i32, x: &[f64]) -> Vec<i64> {
        let side = 2f64.powi(k);
        x.iter()
            .zip(&self.lo)
            .map(|(x, l)| ((x - l) / side).floor() as i64)
            .collect()
    }

    /// `|μ|(3D_k^x)`: the cube containing `x` and its `3^n - 1` neighbors.
    pub fn triple_mass(&self, k: i32, x: &[f64]) -> f64 {
        let center = self.cube_of(k, x);
        let mut total = 0.0;
        let count = 3usize.pow(self.dimension as u32);
        let mut key = center.clone();
        for t in 0..count {
            let mut rest = t;
            for (c, base) in key.iter_mut().zip(&center) {
                *c = base + (rest % 3) as i64 - 1;
                rest /= 3;
            }
            total += self.cube_mass(k, &key);
        }
        total
    }
}

/// The dyadic majorant `sup_k min{|μ|(3D_k^x), 2^{σk}} / 2^{(n-α)k}`.
pub fn capped_maximal_dyadic(
    mu: &DiscreteMeasure,
    alpha: f64,
    sigma: f64,
    query: &QueryGrid,
) -> Result<ScalarField> {
    check_params(mu.dimension(), alpha, sigma)?;
    query.check(mu)?;
    let grid = DyadicGrid::build(mu, query.spacing)?;
    let n = mu.dimension() as f64;
    query.evaluate(|x| {
        (grid.k_min..=grid.k_max)
            .map(|k| {
                let side = 2f64.powi(k);
                grid.triple_mass(k, x).min(side.powf(sigma)) / side.powf(n - alpha)
            })
            .fold(0.0, f64::max)
    })
}

/// `H^σ` restricted to the plane `{x_{σ+1} = ... = x_n = 1/2}` in `[0,1]^n`,
/// sampled by `resolution^σ` atoms at cell centers of weight `resolution^{-σ}`.
pub fn plane_measure(n: usize, sigma: usize, resolution: usize) -> Result<DiscreteMeasure> {
    if !(n == 2 || n == 3) {
        return Err(Error::param("n", format!("must be 2 or 3, got {n}")));
    }
    if !(1..n).contains(&sigma) {
        return Err(Error::param("sigma", format!("must lie in 1..{n}, got {sigma}")));
    }
    if resolution < 1 {
        return Err(Error::param("resolution", "must be >= 1"));
    }
    let count = resolution.pow(sigma as u32);
    let weight = 1.0 / count as f64;
    let positions = (0..count)
        .map(|t| {
            let mut rest = t;
            (0..n)
                .map(|c| {
                    if c < sigma {
                        let i = rest % resolution;
                        rest /= resolution;
                        (i as f64 + 0.5) / resolution as f64
                    } else {
                        0.5
                    }
                })
                .collect()
        })
        .collect();
    DiscreteMeasure::scalar(vec![0.0; n], vec![1.0; n], positions, vec![weight; count])
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct LpRow {
    pub resolution: usize,
    pub p: f64,
    pub integral: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct LpExperiment {
    pub alpha: f64,
    pub sigma: f64,
    pub p: f64,
    pub threshold: f64,
    pub rows: Vec<LpRow>,
    /// Least-squares slope of `log integral` against `log resolution`.
    pub slope: f64,
    /// Slopes between consecutive resolutions.
    pub local_slopes: Vec<f64>,
}

/// Least-squares slope of `y` against `x`.
pub fn fit_slope(x: &[f64], y: &[f64]) -> f64 {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = x.iter().map(|a| (a - mx) * (a - mx)).sum();
    sxy / sxx
}

/// Limit of a sequence of local slopes by Aitken's Δ² on its last three
/// entries, which is exact for `γ + c r^k`. `None` with fewer than three
/// entries; the last entry when the second difference vanishes.
pub fn extrapolated_slope(local_slopes: &[f64]) -> Option<f64> {
    let [s0, s1, s2] = local_slopes.get(local_slopes.len().checked_sub(3)?..)? else {
        return None;
    };
    let (d1, d2) = (s1 - s0, s2 - s1);
    let second = d2 - d1;
    if second.abs() <= 1e-12 * (s0.abs() + s1.abs() + s2.abs()) {
        return Some(*s2);
    }
    Some(s2 - d2 * d2 / second)
}

/// `∫ (M_α^σ μ)^p` over `[0,1]^2` for the line measure (`n = 2`, integer
/// `σ = 1`) by the pixel sum at each resolution, with the ladder maximal
/// function and the pixels closer than one cell to the line left out.
pub fn lp_experiment(alpha: f64, sigma: f64, p: f64, resolutions: &[usize]) -> Result<LpExperiment> {
    if sigma != 1.0 {
        return Err(Error::param("sigma", "the plane experiment is set up for n = 2, sigma = 1"));
    }
    check_params(2, alpha, sigma)?;
    if !(p.is_finite() && p >= 1.0) {
        return Err(Error::param("p", format!("must be >= 1, got {p}")));
    }
    if resolutions.len() < 2 || resolutions.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::param("resolutions", "need at least two, strictly increasing"));
    }
    let mut rows = Vec::new();
    for &res in resolutions {
        let mu = plane_measure(2, 1, res)?;
        let query = QueryGrid::unit_square(res);
        let m = capped_maximal_ball(&mu, alpha, sigma, &query)?;
        let h = query.spacing;
        let terms: Vec<f64> = (0..res)
            .flat_map(|j| {
                let d = ((j as f64 + 0.5) * h - 0.5).abs();
                let m = &m;
                (0..res).filter_map(move |i| (d >= h).then(|| m.get(i, j).powf(p)))
            })
            .collect();
        rows.push(LpRow {
            resolution: res,
            p,
            integral: h * h * crate::grid::pairwise_sum(&terms),
        });
    }
    let lx: Vec<f64> = rows.iter().map(|r| (r.resolution as f64).ln()).collect();
    let ly: Vec<f64> = rows.iter().map(|r| r.integral.ln()).collect();
    let local_slopes = lx
        .windows(2)
        .zip(ly.windows(2))
        .map(|(x, y)| (y[1] - y[0]) / (x[1] - x[0]))
        .collect();
    Ok(LpExperiment {
        alpha,
        sigma,
        p,
        threshold: threshold_exponent(2, alpha, sigma),
        slope: fit_slope(&lx, &ly),
        rows,
        local_slopes,
    })
}

/// Maximum of `Σ a_i^p` over `0 <= a_i <= cap`, `Σ a_i <= total`, `count`
/// entries: as many entries at the cap as the total allows, one remainder.
pub fn max_capped_power_sum(total: f64, cap: f64, count: usize, p: f64) -> f64 {
    let full = ((total / cap).floor() as usize).min(count);
    let rest = if full < count {
        (total - full as f64 * cap).max(0.0)
    } else {
        0.0
    };
    full as f64 * cap.powf(p) + rest.powf(p)
}

/// The gradient measure `Du` of an image: one vector atom `∇u · h^2` at each
/// pixel center.
pub fn gradient_measure(u: &ScalarField) -> Result<DiscreteMeasure> {
    let g = gradient_forward(u);
    let h2 = u.cell_area();
    let (w, h) = (u.width(), u.height());
    let mut positions = Vec::with_capacity(w * h);
    let mut weights = Vec::with_capacity(w * h);
    for j in 0..h {
        for i in 0..w {
            let (x, y) = u.center(i, j);
            positions.push(vec![x, y]);
            let k = u.index(i, j);
            weights.push(vec![g.x()[k] * h2, g.y()[k] * h2]);
        }
    }
    DiscreteMeasure::vector(
        vec![0.0, 0.0],
        vec![w as f64 * u.spacing(), h as f64 * u.spacing()],
        positions,
        weights,
    )
}

/// `sup |Du(B(x,r))| / r^{n-1}` over pixel centers `x` and ladder radii
/// `r = diam · 2^{-j}` down to one pixel.
pub fn ball_decay_check(u: &ScalarField) -> Result<f64> {
    let mu = gradient_measure(u)?;
    let radii = radius_ladder(mu.diameter(), u.spacing());
    let last = radii.len() - 1;
    let (w, h) = (u.width(), u.height());
    let best = (0..h)
        .into_par_iter()
        .map(|j| {
            let mut best = 0.0f64;
            for i in 0..w {
                let (cx, cy) = u.center(i, j);
                let mut shells = vec![[0.0f64; 2]; radii.len()];
                for a in 0..mu.len() {
                    let p = mu.position(a);
                    let d = (p[0] - cx).hypot(p[1] - cy);
                    if d > radii[0] {
                        continue;
                    }
                    let mut s = if d == 0.0 {
                        last
                    } else {
                        ((radii[0] / d).log2().floor() as usize).min(last)
                    };
                    while s > 0 && d > radii[s] {
                        s -= 1;
                    }
                    while s < last && d <= radii[s + 1] {
                        s += 1;
                    }
                    let wgt = mu.weight(a);
                    shells[s][0] += wgt[0];
                    shells[s][1] += wgt[1];
                }
                let mut acc = [0.0, 0.0];
                for s in (0..radii.len()).rev() {
                    acc[0] += shells[s][0];
                    acc[1] += shells[s][1];
                    best = best.max(acc[0].hypot(acc[1]) / radii[s]);
                }
            }
            best
        })
        .reduce(|| 0.0, f64::max);
    Ok(best)
}
