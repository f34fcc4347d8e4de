//! Discrete calculus on rectangular pixel grids.
//!
//! Fields are stored row-major: `values[j * width + i]` holds the sample at
//! column `i` (the x direction) and row `j` (the y direction). A field with
//! spacing `h` represents the rectangle `[0, width*h] x [0, height*h]`, and
//! every integral is the midpoint rule `h^2 * sum(values)`.
//!
//! Gradients are forward differences with a homogeneous Neumann convention
//! (the difference leaving the last column/row is zero); [`divergence`] is
//! their exact negative adjoint. All convolutions read the input through the
//! half-sample symmetric reflection used by [`reflect_extend`].

use rayon::prelude::*;

use crate::error::{Error, Result};

/// Sums a slice in a fixed pairwise order, independent of thread count.
pub fn pairwise_sum(values: &[f64]) -> f64 {
    const BLOCK: usize = 64;
    if values.len() <= BLOCK {
        let mut acc = 0.0;
        for v in values {
            acc += v;
        }
        return acc;
    }
    let mid = values.len() / 2;
    pairwise_sum(&values[..mid]) + pairwise_sum(&values[mid..])
}

/// Maps an arbitrary integer index into `0..n` by even, half-sample
/// symmetric reflection (period `2n`): `-1 -> 0`, `n -> n-1`.
pub fn reflect_index(k: isize, n: usize) -> usize {
    let period = 2 * n as isize;
    let m = k.rem_euclid(period);
    if m < n as isize {
        m as usize
    } else {
        (period - 1 - m) as usize
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ScalarField {
    width: usize,
    height: usize,
    spacing: f64,
    values: Vec<f64>,
}

impl ScalarField {
    pub fn new(width: usize, height: usize, spacing: f64, values: Vec<f64>) -> Result<Self> {
        check_shape(width, height, spacing)?;
        if values.len() != width * height {
            return Err(Error::InvalidField(format!(
                "expected {} values for a {width}x{height} grid, got {}",
                width * height,
                values.len()
            )));
        }
        if let Some(pos) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::InvalidField(format!(
                "non-finite value at index {pos}"
            )));
        }
        Ok(Self {
            width,
            height,
            spacing,
            values,
        })
    }

    pub fn filled(width: usize, height: usize, spacing: f64, value: f64) -> Result<Self> {
        Self::new(width, height, spacing, vec![value; width * height])
    }

    pub fn zeros(width: usize, height: usize, spacing: f64) -> Result<Self> {
        Self::filled(width, height, spacing, 0.0)
    }

    /// Builds a field by sampling `f(i, j)` at every pixel.
    pub fn from_fn(
        width: usize,
        height: usize,
        spacing: f64,
        mut f: impl FnMut(usize, usize) -> f64,
    ) -> Result<Self> {
        let mut values = Vec::with_capacity(width * height);
        for j in 0..height {
            for i in 0..width {
                values.push(f(i, j));
            }
        }
        Self::new(width, height, spacing, values)
    }

    /// A zero field on the same grid.
    pub fn zeros_like(&self) -> Self {
        Self {
            width: self.width,
            height: self.height,
            spacing: self.spacing,
            values: vec![0.0; self.values.len()],
        }
    }

    /// Replaces the samples, keeping the grid. Used by solvers whose
    /// iterates are finite by construction; validity is still checked.
    pub fn with_values(&self, values: Vec<f64>) -> Result<Self> {
        Self::new(self.width, self.height, self.spacing, values)
    }

    /// The same samples on a grid with a different pixel spacing.
    pub fn with_spacing(&self, spacing: f64) -> Result<Self> {
        Self::new(self.width, self.height, spacing, self.values.clone())
    }

    pub(crate) fn from_parts_unchecked(
        width: usize,
        height: usize,
        spacing: f64,
        values: Vec<f64>,
    ) -> Self {
        debug_assert_eq!(values.len(), width * height);
        Self {
            width,
            height,
            spacing,
            values,
        }
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn spacing(&self) -> f64 {
        self.spacing
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    #[inline]
    pub fn index(&self, i: usize, j: usize) -> usize {
        j * self.width + i
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.values[j * self.width + i]
    }

    /// Sample at a possibly out-of-range index, through symmetric reflection.
    #[inline]
    pub fn get_reflected(&self, i: isize, j: isize) -> f64 {
        self.get(reflect_index(i, self.width), reflect_index(j, self.height))
    }

    /// Pixel-cell area `h^n` (n = 2).
    pub fn cell_area(&self) -> f64 {
        self.spacing * self.spacing
    }

    /// `|Omega| = width * height * h^2`.
    pub fn domain_area(&self) -> f64 {
        self.cell_area() * self.len() as f64
    }

    /// Physical coordinates of a pixel center.
    pub fn center(&self, i: usize, j: usize) -> (f64, f64) {
        (
            (i as f64 + 0.5) * self.spacing,
            (j as f64 + 0.5) * self.spacing,
        )
    }

    pub fn same_grid(&self, other: &ScalarField) -> Result<()> {
        if self.width != other.width
            || self.height != other.height
            || self.spacing != other.spacing
        {
            return Err(Error::GridMismatch {
                left: self.describe(),
                right: other.describe(),
            });
        }
        Ok(())
    }

    fn describe(&self) -> String {
        format!("{}x{} (h = {})", self.width, self.height, self.spacing)
    }

    /// `h^2 * sum(values)`.
    pub fn integral(&self) -> f64 {
        self.cell_area() * pairwise_sum(&self.values)
    }

    pub fn mean(&self) -> f64 {
        pairwise_sum(&self.values) / self.len() as f64
    }

    pub fn min(&self) -> f64 {
        self.values.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn max(&self) -> f64 {
        self.values.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn sup_norm(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn is_constant(&self) -> bool {
        let first = self.values[0];
        self.values.iter().all(|&v| v == first)
    }

    /// The `h^2`-weighted inner product.
    pub fn dot(&self, other: &ScalarField) -> Result<f64> {
        self.same_grid(other)?;
        let prods: Vec<f64> = self
            .values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| a * b)
            .collect();
        Ok(self.cell_area() * pairwise_sum(&prods))
    }

    /// The `h^2`-weighted L2 norm.
    pub fn norm(&self) -> f64 {
        let sq: Vec<f64> = self.values.iter().map(|v| v * v).collect();
        (self.cell_area() * pairwise_sum(&sq)).sqrt()
    }

    pub fn l1_distance(&self, other: &ScalarField) -> Result<f64> {
        self.same_grid(other)?;
        let d: Vec<f64> = self
            .values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| (a - b).abs())
            .collect();
        Ok(self.cell_area() * pairwise_sum(&d))
    }

    pub fn l2_distance(&self, other: &ScalarField) -> Result<f64> {
        self.same_grid(other)?;
        let d: Vec<f64> = self
            .values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| (a - b) * (a - b))
            .collect();
        Ok((self.cell_area() * pairwise_sum(&d)).sqrt())
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Result<ScalarField> {
        self.with_values(self.values.iter().map(|&v| f(v)).collect())
    }

    pub fn zip_map(
        &self,
        other: &ScalarField,
        f: impl Fn(f64, f64) -> f64,
    ) -> Result<ScalarField> {
        self.same_grid(other)?;
        self.with_values(
            self.values
                .iter()
                .zip(&other.values)
                .map(|(&a, &b)| f(a, b))
                .collect(),
        )
    }

    /// Copies the `w x h` block whose top-left pixel is `(i0, j0)`.
    pub fn crop(&self, i0: usize, j0: usize, w: usize, h: usize) -> Result<ScalarField> {
        if i0 + w > self.width || j0 + h > self.height {
            return Err(Error::param(
                "crop",
                format!(
                    "block {w}x{h} at ({i0},{j0}) exceeds {}x{}",
                    self.width, self.height
                ),
            ));
        }
        let mut values = Vec::with_capacity(w * h);
        for j in j0..j0 + h {
            let row = self.index(i0, j);
            values.extend_from_slice(&self.values[row..row + w]);
        }
        ScalarField::new(w, h, self.spacing, values)
    }

    /// Indices of pixels on the outer ring of the grid, each listed once.
    pub fn boundary_indices(&self) -> Vec<usize> {
        let (w, h) = (self.width, self.height);
        let mut out = Vec::with_capacity(2 * (w + h) - 4);
        for i in 0..w {
            out.push(self.index(i, 0));
        }
        for j in 1..h - 1 {
            out.push(self.index(0, j));
            out.push(self.index(w - 1, j));
        }
        for i in 0..w {
            out.push(self.index(i, h - 1));
        }
        out
    }
}

fn check_shape(width: usize, height: usize, spacing: f64) -> Result<()> {
    if width < 2 || height < 2 {
        return Err(Error::InvalidField(format!(
            "grid must be at least 2x2, got {width}x{height}"
        )));
    }
    if !(spacing.is_finite() && spacing > 0.0) {
        return Err(Error::InvalidField(format!(
            "spacing must be positive and finite, got {spacing}"
        )));
    }
    Ok(())
}

/// A per-pixel 2-vector field (gradients and dual variables).
#[derive(Clone, Debug, PartialEq)]
pub struct VectorField {
    width: usize,
    height: usize,
    spacing: f64,
    x: Vec<f64>,
    y: Vec<f64>,
}

impl VectorField {
    pub fn new(width: usize, height: usize, spacing: f64, x: Vec<f64>, y: Vec<f64>) -> Result<Self> {
        check_shape(width, height, spacing)?;
        if x.len() != width * height || y.len() != width * height {
            return Err(Error::InvalidField(format!(
                "component sizes {} and {} do not match a {width}x{height} grid",
                x.len(),
                y.len()
            )));
        }
        if x.iter().chain(&y).any(|v| !v.is_finite()) {
            return Err(Error::InvalidField("non-finite vector component".into()));
        }
        Ok(Self {
            width,
            height,
            spacing,
            x,
            y,
        })
    }

    pub fn zeros_on(grid: &ScalarField) -> Self {
        let n = grid.len();
        Self {
            width: grid.width,
            height: grid.height,
            spacing: grid.spacing,
            x: vec![0.0; n],
            y: vec![0.0; n],
        }
    }

    pub(crate) fn from_parts_unchecked(grid: &ScalarField, x: Vec<f64>, y: Vec<f64>) -> Self {
        Self {
            width: grid.width,
            height: grid.height,
            spacing: grid.spacing,
            x,
            y,
        }
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn spacing(&self) -> f64 {
        self.spacing
    }

    pub fn x(&self) -> &[f64] {
        &self.x
    }

    pub fn y(&self) -> &[f64] {
        &self.y
    }

    /// Euclidean magnitude per pixel.
    pub fn magnitudes(&self) -> Vec<f64> {
        self.x.iter().zip(&self.y).map(|(a, b)| a.hypot(*b)).collect()
    }

    pub fn matches(&self, u: &ScalarField) -> Result<()> {
        if self.width != u.width || self.height != u.height || self.spacing != u.spacing {
            return Err(Error::GridMismatch {
                left: format!("{}x{} (h = {})", self.width, self.height, self.spacing),
                right: u.describe(),
            });
        }
        Ok(())
    }

    /// The `h^2`-weighted inner product of two vector fields.
    pub fn dot(&self, other: &VectorField) -> Result<f64> {
        if self.width != other.width || self.height != other.height || self.spacing != other.spacing {
            return Err(Error::GridMismatch {
                left: format!("{}x{}", self.width, self.height),
                right: format!("{}x{}", other.width, other.height),
            });
        }
        let prods: Vec<f64> = (0..self.x.len())
            .map(|k| self.x[k] * other.x[k] + self.y[k] * other.y[k])
            .collect();
        Ok(self.spacing * self.spacing * pairwise_sum(&prods))
    }

    pub fn norm(&self) -> f64 {
        let sq: Vec<f64> = (0..self.x.len())
            .map(|k| self.x[k] * self.x[k] + self.y[k] * self.y[k])
            .collect();
        (self.spacing * self.spacing * pairwise_sum(&sq)).sqrt()
    }
}

/// Forward differences divided by the spacing; zero across the last
/// column (x component) and last row (y component).
pub fn gradient_forward(u: &ScalarField) -> VectorField {
    let (w, h) = (u.width, u.height);
    let inv_h = 1.0 / u.spacing;
    let mut gx = vec![0.0; w * h];
    let mut gy = vec![0.0; w * h];
    gradient_into(u.values(), w, h, inv_h, &mut gx, &mut gy);
    VectorField::from_parts_unchecked(u, gx, gy)
}

pub(crate) fn gradient_into(
    u: &[f64],
    w: usize,
    h: usize,
    inv_h: f64,
    gx: &mut [f64],
    gy: &mut [f64],
) {
    for j in 0..h {
        let row = j * w;
        for i in 0..w - 1 {
            gx[row + i] = (u[row + i + 1] - u[row + i]) * inv_h;
        }
        gx[row + w - 1] = 0.0;
        if j + 1 < h {
            for i in 0..w {
                gy[row + i] = (u[row + w + i] - u[row + i]) * inv_h;
            }
        } else {
            gy[row..row + w].fill(0.0);
        }
    }
}

/// Negative adjoint of [`gradient_forward`] under the `h^2`-weighted inner
/// product: `<grad u, p> = -<u, div p>` for all `u`, `p` on the grid.
pub fn divergence(p: &VectorField) -> ScalarField {
    let (w, h) = (p.width, p.height);
    let mut out = vec![0.0; w * h];
    divergence_into(&p.x, &p.y, w, h, 1.0 / p.spacing, &mut out);
    ScalarField::from_parts_unchecked(w, h, p.spacing, out)
}

pub(crate) fn divergence_into(
    px: &[f64],
    py: &[f64],
    w: usize,
    h: usize,
    inv_h: f64,
    out: &mut [f64],
) {
    for j in 0..h {
        let row = j * w;
        for i in 0..w {
            let k = row + i;
            let dx = if i == 0 {
                px[k]
            } else if i == w - 1 {
                -px[k - 1]
            } else {
                px[k] - px[k - 1]
            };
            let dy = if j == 0 {
                py[k]
            } else if j == h - 1 {
                -py[k - w]
            } else {
                py[k] - py[k - w]
            };
            out[k] = (dx + dy) * inv_h;
        }
    }
}

/// Extends `u` to the `3W x 3H` grid with the same center by mirroring
/// across each edge; corner blocks are double reflections.
pub fn reflect_extend(u: &ScalarField) -> ScalarField {
    let (w, h) = (u.width, u.height);
    let mut values = Vec::with_capacity(9 * w * h);
    for j in 0..3 * h {
        let sj = reflect_index(j as isize - h as isize, h);
        for i in 0..3 * w {
            let si = reflect_index(i as isize - w as isize, w);
            values.push(u.get(si, sj));
        }
    }
    ScalarField::from_parts_unchecked(3 * w, 3 * h, u.spacing, values)
}

/// Inverse of [`reflect_extend`] on its central block.
pub fn restrict_center(extended: &ScalarField, width: usize, height: usize) -> Result<ScalarField> {
    if extended.width != 3 * width || extended.height != 3 * height {
        return Err(Error::GridMismatch {
            left: extended.describe(),
            right: format!("3 x ({width}x{height})"),
        });
    }
    extended.crop(width, height, width, height)
}

/// The standard bump `exp(-1/(1-|x/delta|^2))` sampled at pixel offsets and
/// normalized on the samples, so `h^2 * sum(profile) = 1` holds on the grid.
#[derive(Clone, Debug)]
pub struct Mollifier {
    delta: f64,
    spacing: f64,
    radius: usize,
    /// Convolution weights (sum to 1), `(2r+1)^2` entries row-major.
    weights: Vec<f64>,
}

impl Mollifier {
    pub fn new(delta: f64, spacing: f64) -> Result<Self> {
        if !(delta.is_finite() && delta > 0.0) {
            return Err(Error::param("delta", format!("must be > 0, got {delta}")));
        }
        if !(spacing.is_finite() && spacing > 0.0) {
            return Err(Error::param("spacing", format!("must be > 0, got {spacing}")));
        }
        let radius = (delta / spacing).floor() as usize;
        let side = 2 * radius + 1;
        let mut weights = vec![0.0; side * side];
        for l in 0..side {
            for k in 0..side {
                let dx = (k as f64 - radius as f64) * spacing;
                let dy = (l as f64 - radius as f64) * spacing;
                let s = (dx * dx + dy * dy) / (delta * delta);
                if s < 1.0 {
                    weights[l * side + k] = (-1.0 / (1.0 - s)).exp();
                }
            }
        }
        let total = pairwise_sum(&weights);
        for v in &mut weights {
            *v /= total;
        }
        Ok(Self {
            delta,
            spacing,
            radius,
            weights,
        })
    }

    pub fn delta(&self) -> f64 {
        self.delta
    }

    /// Half-width of the sampled support, in pixels.
    pub fn radius(&self) -> usize {
        self.radius
    }

    /// Value of the sampled `eta_delta` at pixel offset `(k, l)`.
    pub fn profile(&self, k: isize, l: isize) -> f64 {
        let r = self.radius as isize;
        if k.abs() > r || l.abs() > r {
            return 0.0;
        }
        let side = 2 * self.radius + 1;
        self.weights[(l + r) as usize * side + (k + r) as usize] / (self.spacing * self.spacing)
    }

    /// `h^2 * sum(profile)`, equal to 1 up to rounding.
    pub fn mass(&self) -> f64 {
        pairwise_sum(&self.weights)
    }

    /// Convolves `u` (read through symmetric reflection) with the kernel.
    pub fn apply(&self, u: &ScalarField) -> Result<ScalarField> {
        if u.spacing != self.spacing {
            return Err(Error::GridMismatch {
                left: u.describe(),
                right: format!("mollifier sampled at h = {}", self.spacing),
            });
        }
        let (w, h) = (u.width, u.height);
        let r = self.radius as isize;
        let side = 2 * self.radius + 1;
        // Nonzero taps only; the bump vanishes on the corners of the box.
        let taps: Vec<(isize, isize, f64)> = (0..side * side)
            .filter(|&t| self.weights[t] != 0.0)
            .map(|t| ((t % side) as isize - r, (t / side) as isize - r, self.weights[t]))
            .collect();
        let mut out = vec![0.0; w * h];
        out.par_chunks_mut(w).enumerate().for_each(|(j, row)| {
            for (i, slot) in row.iter_mut().enumerate() {
                let mut acc = 0.0;
                for &(dk, dl, wt) in &taps {
                    acc += wt * u.get_reflected(i as isize + dk, j as isize + dl);
                }
                *slot = acc;
            }
        });
        u.with_values(out)
    }
}

/// `u * eta_delta` with reflection at the boundary. Scales below one pixel
/// cannot be resolved, so `delta < h` returns `u` unchanged.
pub fn mollify(u: &ScalarField, delta: f64) -> Result<ScalarField> {
    if !(delta.is_finite() && delta > 0.0) {
        return Err(Error::param("delta", format!("must be > 0, got {delta}")));
    }
    if delta < u.spacing {
        return Ok(u.clone());
    }
    Mollifier::new(delta, u.spacing)?.apply(u)
}

/// Separable Gaussian smoothing with standard deviation `sigma` (length
/// units), truncated at four standard deviations, reflection at the edges.
pub fn gaussian_smooth(u: &ScalarField, sigma: f64) -> Result<ScalarField> {
    if !(sigma.is_finite() && sigma > 0.0) {
        return Err(Error::param("sigma", format!("must be > 0, got {sigma}")));
    }
    let s = sigma / u.spacing;
    let radius = (4.0 * s).ceil() as isize;
    if radius == 0 {
        return Ok(u.clone());
    }
    let mut kernel: Vec<f64> = (-radius..=radius)
        .map(|k| (-(k * k) as f64 / (2.0 * s * s)).exp())
        .collect();
    let total = pairwise_sum(&kernel);
    kernel.iter_mut().for_each(|v| *v /= total);

    let (w, h) = (u.width, u.height);
    let mut tmp = vec![0.0; w * h];
    for j in 0..h {
        for i in 0..w {
            let mut acc = 0.0;
            for (t, kv) in kernel.iter().enumerate() {
                acc += kv * u.get_reflected(i as isize + t as isize - radius, j as isize);
            }
            tmp[j * w + i] = acc;
        }
    }
    let tmp = ScalarField::from_parts_unchecked(w, h, u.spacing, tmp);
    let mut out = vec![0.0; w * h];
    for j in 0..h {
        for i in 0..w {
            let mut acc = 0.0;
            for (t, kv) in kernel.iter().enumerate() {
                acc += kv * tmp.get_reflected(i as isize, j as isize + t as isize - radius);
            }
            out[j * w + i] = acc;
        }
    }
    u.with_values(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_field(w: usize, h: usize, spacing: f64, rng: &mut ChaCha8Rng) -> ScalarField {
        ScalarField::from_fn(w, h, spacing, |_, _| rng.random_range(-1.0..1.0)).unwrap()
    }

    #[test]
    fn rejects_bad_fields() {
        assert!(ScalarField::zeros(1, 4, 1.0).is_err());
        assert!(ScalarField::zeros(4, 4, 0.0).is_err());
        assert!(ScalarField::new(2, 2, 1.0, vec![0.0, 1.0, f64::NAN, 0.0]).is_err());
        assert!(ScalarField::new(2, 2, 1.0, vec![0.0; 3]).is_err());
    }

    #[test]
    fn reflect_index_is_half_sample_symmetric() {
        let got: Vec<usize> = (-4..8).map(|k| reflect_index(k, 4)).collect();
        assert_eq!(got, vec![3, 2, 1, 0, 0, 1, 2, 3, 3, 2, 1, 0]);
    }

    #[test]
    fn gradient_of_constant_is_zero() {
        let u = ScalarField::filled(7, 5, 0.3, 5.0).unwrap();
        let g = gradient_forward(&u);
        assert!(g.x().iter().chain(g.y()).all(|&v| v == 0.0));
    }

    #[test]
    fn gradient_of_ramp() {
        let h = 0.25;
        let u = ScalarField::from_fn(6, 4, h, |i, _| i as f64 * h).unwrap();
        let g = gradient_forward(&u);
        for j in 0..4 {
            for i in 0..6 {
                let k = u.index(i, j);
                let expected = if i == 5 { 0.0 } else { 1.0 };
                assert!((g.x()[k] - expected).abs() < 1e-14);
                assert_eq!(g.y()[k], 0.0);
            }
        }
    }

    #[test]
    fn gradient_matches_index_loop() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let u = random_field(8, 8, 0.5, &mut rng);
        let g = gradient_forward(&u);
        for j in 0..8 {
            for i in 0..8 {
                let ex = if i + 1 < 8 { (u.get(i + 1, j) - u.get(i, j)) / 0.5 } else { 0.0 };
                let ey = if j + 1 < 8 { (u.get(i, j + 1) - u.get(i, j)) / 0.5 } else { 0.0 };
                assert_eq!(g.x()[u.index(i, j)], ex);
                assert_eq!(g.y()[u.index(i, j)], ey);
            }
        }
    }

    #[test]
    fn divergence_is_negative_adjoint() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..20 {
            let u = random_field(8, 8, 0.7, &mut rng);
            let px = random_field(8, 8, 0.7, &mut rng).into_values();
            let py = random_field(8, 8, 0.7, &mut rng).into_values();
            let p = VectorField::new(8, 8, 0.7, px, py).unwrap();
            let lhs = gradient_forward(&u).dot(&p).unwrap();
            let rhs = u.dot(&divergence(&p)).unwrap();
            assert!((lhs + rhs).abs() <= 1e-12 * u.norm() * p.norm());
        }
    }

    #[test]
    fn divergence_of_zero_and_ramp_gradient() {
        let z = ScalarField::zeros(5, 5, 1.0).unwrap();
        assert!(divergence(&VectorField::zeros_on(&z)).values().iter().all(|&v| v == 0.0));

        let u = ScalarField::from_fn(8, 8, 1.0, |i, _| i as f64).unwrap();
        let d = divergence(&gradient_forward(&u));
        for j in 1..7 {
            for i in 1..7 {
                assert!(d.get(i, j).abs() < 1e-14);
            }
        }
    }

    #[test]
    fn vector_dot_rejects_mismatched_grids() {
        let a = VectorField::zeros_on(&ScalarField::zeros(4, 4, 1.0).unwrap());
        let b = VectorField::zeros_on(&ScalarField::zeros(4, 5, 1.0).unwrap());
        assert!(a.dot(&b).is_err());
        let u = ScalarField::zeros(4, 5, 1.0).unwrap();
        assert!(a.matches(&u).is_err());
    }

    #[test]
    fn reflect_extend_two_by_two() {
        let u = ScalarField::new(2, 2, 1.0, vec![1.0, 2.0, 3.0, 4.0]).unwrap();
        let e = reflect_extend(&u);
        assert_eq!((e.width(), e.height()), (6, 6));
        let row2: Vec<f64> = (0..6).map(|i| e.get(i, 2)).collect();
        assert_eq!(row2, vec![2.0, 1.0, 1.0, 2.0, 2.0, 1.0]);
        // corner block is a double reflection
        assert_eq!(e.get(0, 0), 4.0);
        assert_eq!(restrict_center(&e, 2, 2).unwrap(), u);
    }

    #[test]
    fn reflect_extend_constant() {
        let u = ScalarField::filled(3, 4, 0.5, 2.5).unwrap();
        let e = reflect_extend(&u);
        assert_eq!((e.width(), e.height()), (9, 12));
        assert!(e.values().iter().all(|&v| v == 2.5));
    }

    #[test]
    fn mollifier_has_unit_mass_and_bounded_support() {
        for &(delta, h) in &[(4.0, 1.0), (0.3, 0.05), (2.5, 0.5)] {
            let m = Mollifier::new(delta, h).unwrap();
            assert!((m.mass() - 1.0).abs() < 1e-10);
            let r = m.radius() as isize;
            let mut total = 0.0;
            for l in -r..=r {
                for k in -r..=r {
                    let v = m.profile(k, l);
                    total += v * h * h;
                    if v > 0.0 {
                        assert!(((k * k + l * l) as f64).sqrt() * h < delta);
                    }
                }
            }
            assert!((total - 1.0).abs() < 1e-10);
        }
    }

    #[test]
    fn mollify_rejects_nonpositive_delta() {
        let u = ScalarField::zeros(4, 4, 1.0).unwrap();
        assert!(mollify(&u, 0.0).is_err());
        assert!(mollify(&u, -1.0).is_err());
    }

    #[test]
    fn mollify_below_grid_scale_is_identity() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let u = random_field(8, 8, 1.0, &mut rng);
        assert_eq!(mollify(&u, 0.5).unwrap(), u);
    }

    #[test]
    fn mollify_constant_is_constant() {
        let u = ScalarField::filled(16, 12, 0.1, 3.0).unwrap();
        let v = mollify(&u, 0.45).unwrap();
        assert!(v.values().iter().all(|&x| (x - 3.0).abs() < 1e-12));
    }

    #[test]
    fn mollify_point_mass_reproduces_kernel() {
        let h = 1.0;
        let n = 21;
        let c = 10;
        let mut u = ScalarField::zeros(n, n, h).unwrap().into_values();
        u[c * n + c] = 1.0 / (h * h);
        let u = ScalarField::new(n, n, h, u).unwrap();
        let m = Mollifier::new(4.0 * h, h).unwrap();
        let v = mollify(&u, 4.0 * h).unwrap();
        for j in 0..n {
            for i in 0..n {
                let expected = m.profile(i as isize - c as isize, j as isize - c as isize);
                assert!((v.get(i, j) - expected).abs() < 1e-14);
            }
        }
    }

    #[test]
    fn mollify_conserves_mean() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let u = random_field(20, 13, 0.1, &mut rng).map(|v| v + 2.0).unwrap();
        for &delta in &[0.25, 0.6, 1.7, 3.0] {
            let v = mollify(&u, delta).unwrap();
            assert!((v.mean() - u.mean()).abs() <= 1e-8 * u.mean().abs());
        }
    }

    #[test]
    fn step_edge_gradient_scales_like_inverse_delta() {
        let h = 1.0;
        let n = 96;
        let u = ScalarField::from_fn(n, n, h, |i, _| if i < n / 2 { 0.0 } else { 1.0 }).unwrap();
        let cs: Vec<f64> = [4.0, 8.0, 16.0]
            .iter()
            .map(|&d| {
                let g = gradient_forward(&mollify(&u, d * h).unwrap());
                let sup = g.magnitudes().into_iter().fold(0.0, f64::max);
                sup * d * h
            })
            .collect();
        let mean = cs.iter().sum::<f64>() / 3.0;
        for c in &cs {
            assert!((c - mean).abs() / mean < 0.1, "{cs:?}");
        }
    }

    #[test]
    fn gaussian_smooth_preserves_constants_and_mass() {
        let u = ScalarField::filled(10, 10, 0.5, 1.5).unwrap();
        let v = gaussian_smooth(&u, 1.0).unwrap();
        assert!(v.values().iter().all(|&x| (x - 1.5).abs() < 1e-12));
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let u = random_field(12, 9, 1.0, &mut rng);
        let v = gaussian_smooth(&u, 1.3).unwrap();
        assert!((v.mean() - u.mean()).abs() < 1e-12);
    }
}
