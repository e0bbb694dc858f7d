//! Uniform radial grids and the scalar fields that live on them.
//!
//! Every pairing in the crate is an integral over ℝ³ of radial functions,
//! `⟨f, g⟩ = 4π ∫₀^∞ f g r² dr`, approximated by composite Simpson weights on
//! the nodes `r_i = i·dr`. Gradient-type quantities are evaluated through
//! `w = r·f`, the same variable the wave solver uses, and treat every field as
//! continued harmonically (`f = c/r`) beyond `r_max`.

use std::f64::consts::PI;
use std::io::{self, Write};

use crate::error::{Error, Result};

/// Smallest grid accepted anywhere in the crate.
pub const MIN_POINTS: usize = 16;

/// Uniform mesh `r_i = i·dr`, `i = 0..n_points`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RadialGrid {
    n_points: usize,
    dr: f64,
}

impl RadialGrid {
    pub fn new(n_points: usize, dr: f64) -> Result<Self> {
        if n_points < MIN_POINTS {
            return Err(Error::InvalidGrid(format!("n_points = {n_points} < {MIN_POINTS}")));
        }
        if !(dr.is_finite() && dr > 0.0) {
            return Err(Error::InvalidGrid(format!("dr = {dr} must be positive")));
        }
        Ok(Self { n_points, dr })
    }

    /// Grid with spacing `dr` whose last node is the first one at or beyond `r_max`.
    pub fn with_extent(r_max: f64, dr: f64) -> Result<Self> {
        if !(r_max.is_finite() && r_max > 0.0) {
            return Err(Error::InvalidGrid(format!("r_max = {r_max} must be positive")));
        }
        let intervals = (r_max / dr - 1e-9).ceil().max(1.0) as usize;
        Self::new(intervals + 1, dr)
    }

    pub fn n_points(&self) -> usize {
        self.n_points
    }

    pub fn dr(&self) -> f64 {
        self.dr
    }

    pub fn r_max(&self) -> f64 {
        (self.n_points - 1) as f64 * self.dr
    }

    #[inline]
    pub fn r(&self, i: usize) -> f64 {
        i as f64 * self.dr
    }

    pub fn nodes(&self) -> impl ExactSizeIterator<Item = f64> + '_ {
        (0..self.n_points).map(move |i| self.r(i))
    }

    /// Index of the last node with `r_i <= r`.
    pub fn index_at_or_below(&self, r: f64) -> usize {
        ((r / self.dr + 1e-9).floor().max(0.0) as usize).min(self.n_points - 1)
    }

    /// The grid obtained by halving the spacing over the same extent.
    pub fn refined(&self) -> Self {
        Self {
            n_points: 2 * self.n_points - 1,
            dr: self.dr / 2.0,
        }
    }

    /// Composite quadrature weights (without the `4π r²` factor).
    ///
    /// Simpson on an even number of panels; with an odd number of panels the
    /// last three use the 3/8 rule so the order stays at four.
    pub fn quadrature_weights(&self) -> Vec<f64> {
        let n = self.n_points;
        let h = self.dr;
        let mut w = vec![0.0; n];
        let panels = n - 1;
        let simpson_panels = if panels.is_multiple_of(2) { panels } else { panels - 3 };
        for k in (0..simpson_panels).step_by(2) {
            w[k] += h / 3.0;
            w[k + 1] += 4.0 * h / 3.0;
            w[k + 2] += h / 3.0;
        }
        if simpson_panels < panels {
            let s = simpson_panels;
            let c = 3.0 * h / 8.0;
            w[s] += c;
            w[s + 1] += 3.0 * c;
            w[s + 2] += 3.0 * c;
            w[s + 3] += c;
        }
        w
    }
}

/// How a field is continued past `r_max` when sampled off-grid.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Exterior {
    Zero,
    /// `f(r) = f(r_max)·r_max / r`.
    Harmonic,
}

/// Samples of a radial function on a [`RadialGrid`].
#[derive(Debug, Clone, PartialEq)]
pub struct RadialField {
    grid: RadialGrid,
    values: Vec<f64>,
    even: bool,
}

impl RadialField {
    /// Wraps raw node values; every entry must be finite.
    pub fn new(grid: RadialGrid, values: Vec<f64>, even: bool) -> Result<Self> {
        if values.len() != grid.n_points() {
            return Err(Error::InvalidGrid(format!(
                "field has {} values for {} nodes",
                values.len(),
                grid.n_points()
            )));
        }
        check_finite(&values)?;
        Ok(Self { grid, values, even })
    }

    /// Builds the field from a function of `r`; marked even at the origin.
    pub fn from_fn(grid: RadialGrid, f: impl Fn(f64) -> f64) -> Self {
        let values = grid.nodes().map(f).collect();
        Self {
            grid,
            values,
            even: true,
        }
    }

    pub fn zeros(grid: RadialGrid) -> Self {
        Self {
            grid,
            values: vec![0.0; grid.n_points()],
            even: true,
        }
    }

    /// Unchecked constructor for values produced by the crate's own kernels.
    pub(crate) fn from_raw(grid: RadialGrid, values: Vec<f64>, even: bool) -> Self {
        debug_assert_eq!(values.len(), grid.n_points());
        Self { grid, values, even }
    }

    pub fn grid(&self) -> &RadialGrid {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn is_even(&self) -> bool {
        self.even
    }

    pub fn with_even(mut self, even: bool) -> Self {
        self.even = even;
        self
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn check_finite(&self) -> Result<()> {
        check_finite(&self.values)
    }

    pub fn same_grid(&self, other: &RadialField) -> Result<()> {
        if self.grid == other.grid {
            Ok(())
        } else {
            Err(Error::GridMismatch)
        }
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Self {
        Self::from_raw(self.grid, self.values.iter().map(|&v| f(v)).collect(), self.even)
    }

    pub fn zip_map(&self, other: &RadialField, f: impl Fn(f64, f64) -> f64) -> Result<Self> {
        self.same_grid(other)?;
        let values = self.values.iter().zip(&other.values).map(|(&a, &b)| f(a, b)).collect();
        Ok(Self::from_raw(self.grid, values, self.even && other.even))
    }

    pub fn add(&self, other: &RadialField) -> Result<Self> {
        self.zip_map(other, |a, b| a + b)
    }

    pub fn sub(&self, other: &RadialField) -> Result<Self> {
        self.zip_map(other, |a, b| a - b)
    }

    pub fn scale(&self, c: f64) -> Self {
        self.map(|v| c * v)
    }

    /// `self + c·other`
    pub fn axpy(&self, c: f64, other: &RadialField) -> Result<Self> {
        self.zip_map(other, |a, b| a + c * b)
    }

    pub fn mul(&self, other: &RadialField) -> Result<Self> {
        self.zip_map(other, |a, b| a * b)
    }

    pub fn sup(&self) -> f64 {
        self.values.iter().fold(0.0_f64, |m, v| m.max(v.abs()))
    }

    /// Sup norm restricted to `r <= r_cut`.
    pub fn sup_within(&self, r_cut: f64) -> f64 {
        let last = self.grid.index_at_or_below(r_cut);
        self.values[..=last].iter().fold(0.0_f64, |m, v| m.max(v.abs()))
    }

    /// Copy with every node beyond `r_cut` set to zero.
    pub fn truncated(&self, r_cut: f64) -> Self {
        let mut out = self.clone();
        let dr = self.grid.dr();
        for (i, v) in out.values.iter_mut().enumerate() {
            if i as f64 * dr > r_cut + 1e-12 {
                *v = 0.0;
            }
        }
        out
    }

    /// Cubic (four-point Lagrange) interpolation at an arbitrary radius.
    ///
    /// Even fields are reflected across the origin; past `r_max` the value
    /// follows `exterior`.
    pub fn sample(&self, r: f64, exterior: Exterior) -> f64 {
        let n = self.values.len();
        let dr = self.grid.dr();
        let r = r.abs();
        let r_max = self.grid.r_max();
        if r >= r_max {
            return match exterior {
                Exterior::Zero => {
                    if r == r_max {
                        self.values[n - 1]
                    } else {
                        0.0
                    }
                }
                Exterior::Harmonic => self.values[n - 1] * r_max / r,
            };
        }
        let x = r / dr;
        let i = x.floor() as isize;
        let s = x - i as f64;
        if s == 0.0 {
            return self.values[i as usize];
        }
        // stencil i-1, i, i+1, i+2 shifted inside the grid (or reflected at 0)
        let mut base = i - 1;
        if base < 0 && !self.even {
            base = 0;
        }
        if base + 3 > n as isize - 1 {
            base = n as isize - 4;
        }
        let t = x - base as f64;
        let node = |k: isize| -> f64 {
            let j = base + k;
            if j < 0 {
                self.values[(-j) as usize]
            } else {
                self.values[j as usize]
            }
        };
        let (f0, f1, f2, f3) = (node(0), node(1), node(2), node(3));
        let l0 = -(t - 1.0) * (t - 2.0) * (t - 3.0) / 6.0;
        let l1 = t * (t - 2.0) * (t - 3.0) / 2.0;
        let l2 = -t * (t - 1.0) * (t - 3.0) / 2.0;
        let l3 = t * (t - 1.0) * (t - 2.0) / 6.0;
        f0 * l0 + f1 * l1 + f2 * l2 + f3 * l3
    }

    /// `h(r) = mu^power · f(mu·r)` sampled back onto the same grid.
    pub fn dilate(&self, mu: f64, power: f64, exterior: Exterior) -> Self {
        let pre = mu.powf(power);
        let values = self.grid.nodes().map(|r| pre * self.sample(mu * r, exterior)).collect();
        Self::from_raw(self.grid, values, self.even)
    }

    /// Snapshot as CSV `r,value` with 17 significant digits.
    pub fn write_csv<W: Write>(&self, mut out: W) -> io::Result<()> {
        writeln!(out, "r,value")?;
        for (r, v) in self.grid.nodes().zip(&self.values) {
            writeln!(out, "{},{}", fmt_real(r), fmt_real(*v))?;
        }
        Ok(())
    }
}

/// Formats a real with 17 significant digits.
pub fn fmt_real(x: f64) -> String {
    format!("{x:.16e}")
}

fn check_finite(values: &[f64]) -> Result<()> {
    match values.iter().position(|v| !v.is_finite()) {
        Some(index) => Err(Error::NonFinite {
            index,
            value: values[index],
        }),
        None => Ok(()),
    }
}

/// State `(u, u_t)` of the wave equation at time `t`.
#[derive(Debug, Clone, PartialEq)]
pub struct WaveState {
    pub u: RadialField,
    pub ut: RadialField,
    pub t: f64,
}

impl WaveState {
    pub fn new(u: RadialField, ut: RadialField, t: f64) -> Result<Self> {
        u.same_grid(&ut)?;
        Ok(Self { u, ut, t })
    }

    pub fn grid(&self) -> &RadialGrid {
        self.u.grid()
    }
}

/// `4π ∫ f r² dr` by composite Simpson.
pub fn integrate_radial(f: &RadialField) -> Result<f64> {
    f.check_finite()?;
    Ok(integrate_unchecked(f.grid(), f.values()))
}

pub(crate) fn integrate_unchecked(grid: &RadialGrid, values: &[f64]) -> f64 {
    let weights = grid.quadrature_weights();
    let dr = grid.dr();
    let sum: f64 = values
        .iter()
        .zip(&weights)
        .enumerate()
        .map(|(i, (v, w))| {
            let r = i as f64 * dr;
            v * w * r * r
        })
        .sum();
    4.0 * PI * sum
}

/// The ℝ³ pairing `⟨f, g⟩`.
pub fn inner(f: &RadialField, g: &RadialField) -> Result<f64> {
    f.same_grid(g)?;
    f.check_finite()?;
    g.check_finite()?;
    let grid = f.grid();
    let weights = grid.quadrature_weights();
    let dr = grid.dr();
    let sum: f64 = f
        .values()
        .iter()
        .zip(g.values())
        .zip(&weights)
        .enumerate()
        .map(|(i, ((a, b), w))| {
            let r = i as f64 * dr;
            a * b * w * r * r
        })
        .sum();
    Ok(4.0 * PI * sum)
}

/// `‖∇f‖²_{L²(ℝ³)} = 4π ∫ (∂_r(r f))² dr` with the harmonic exterior included.
pub fn dirichlet_energy(f: &RadialField) -> f64 {
    let dr = f.grid().dr();
    let v = f.values();
    let mut sum = 0.0;
    for i in 0..v.len() - 1 {
        let w0 = i as f64 * dr * v[i];
        let w1 = (i + 1) as f64 * dr * v[i + 1];
        let d = (w1 - w0) / dr;
        sum += d * d;
    }
    4.0 * PI * sum * dr
}

/// Sobolev-type norms of a radial field.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Norms {
    pub l2: f64,
    /// `‖∇f‖_{L²}` including the harmonic continuation past `r_max`.
    pub h1_seminorm: f64,
    /// `‖Δf‖_{L²}`.
    pub h2: f64,
    pub sup: f64,
}

impl Norms {
    /// `‖f‖_{L²} + ‖∇f‖_{L²} + ‖Δf‖_{L²}`.
    pub fn h2_surrogate(&self) -> f64 {
        self.l2 + self.h1_seminorm + self.h2
    }
}

pub fn norms(f: &RadialField) -> Result<Norms> {
    f.check_finite()?;
    let l2 = integrate_unchecked(f.grid(), &f.values().iter().map(|v| v * v).collect::<Vec<_>>())
        .max(0.0)
        .sqrt();
    let h1_seminorm = dirichlet_energy(f).sqrt();
    let lap = laplacian(f);
    let h2 = integrate_unchecked(f.grid(), &lap.values().iter().map(|v| v * v).collect::<Vec<_>>())
        .max(0.0)
        .sqrt();
    Ok(Norms {
        l2,
        h1_seminorm,
        h2,
        sup: f.sup(),
    })
}

/// Derivative order accepted by [`derivative`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DerivativeOrder {
    First,
    Second,
}

impl TryFrom<u32> for DerivativeOrder {
    type Error = Error;

    fn try_from(order: u32) -> Result<Self> {
        match order {
            1 => Ok(Self::First),
            2 => Ok(Self::Second),
            other => Err(Error::DerivativeOrder(other)),
        }
    }
}

/// Second-order finite differences: centered inside, even reflection (or a
/// one-sided stencil for non-even fields) at `r = 0`, one-sided at `r_max`.
pub fn derivative(f: &RadialField, order: DerivativeOrder) -> RadialField {
    let v = f.values();
    let n = v.len();
    let h = f.grid().dr();
    let mut out = vec![0.0; n];
    match order {
        DerivativeOrder::First => {
            for i in 1..n - 1 {
                out[i] = (v[i + 1] - v[i - 1]) / (2.0 * h);
            }
            out[0] = if f.is_even() {
                0.0
            } else {
                (-3.0 * v[0] + 4.0 * v[1] - v[2]) / (2.0 * h)
            };
            out[n - 1] = (3.0 * v[n - 1] - 4.0 * v[n - 2] + v[n - 3]) / (2.0 * h);
        }
        DerivativeOrder::Second => {
            let h2 = h * h;
            for i in 1..n - 1 {
                out[i] = (v[i + 1] - 2.0 * v[i] + v[i - 1]) / h2;
            }
            out[0] = if f.is_even() {
                2.0 * (v[1] - v[0]) / h2
            } else {
                (2.0 * v[0] - 5.0 * v[1] + 4.0 * v[2] - v[3]) / h2
            };
            out[n - 1] = (2.0 * v[n - 1] - 5.0 * v[n - 2] + 4.0 * v[n - 3] - v[n - 4]) / h2;
        }
    }
    let even_out = match order {
        DerivativeOrder::First => false,
        DerivativeOrder::Second => f.is_even(),
    };
    RadialField::from_raw(*f.grid(), out, even_out)
}

/// Fourth-order first derivative; used where pairings must be accurate
/// beyond the second-order stencils (scaling generators).
pub fn derivative4(f: &RadialField) -> RadialField {
    let v = f.values();
    let n = v.len();
    let h = f.grid().dr();
    let even = f.is_even();
    // reflection is only used for even fields; odd ones take one-sided rows
    let at = |j: isize| -> f64 { v[j.unsigned_abs()] };
    let mut out = vec![0.0; n];
    for (i, o) in out.iter_mut().enumerate().take(n - 2) {
        let i = i as isize;
        if !even && i < 2 {
            continue;
        }
        *o = (at(i - 2) - 8.0 * at(i - 1) + 8.0 * at(i + 1) - at(i + 2)) / (12.0 * h);
    }
    if !even {
        out[0] = (-25.0 * v[0] + 48.0 * v[1] - 36.0 * v[2] + 16.0 * v[3] - 3.0 * v[4]) / (12.0 * h);
        out[1] = (-3.0 * v[0] - 10.0 * v[1] + 18.0 * v[2] - 6.0 * v[3] + v[4]) / (12.0 * h);
    }
    out[n - 2] = (3.0 * v[n - 1] + 10.0 * v[n - 2] - 18.0 * v[n - 3] + 6.0 * v[n - 4] - v[n - 5]) / (12.0 * h);
    out[n - 1] = (25.0 * v[n - 1] - 48.0 * v[n - 2] + 36.0 * v[n - 3] - 16.0 * v[n - 4] + 3.0 * v[n - 5]) / (12.0 * h);
    RadialField::from_raw(*f.grid(), out, false)
}

/// Radial Laplacian `f'' + (2/r) f'`, computed as `(r f)''/r` with the
/// `3 f''(0)` limit at the origin.
pub fn laplacian(f: &RadialField) -> RadialField {
    let v = f.values();
    let n = v.len();
    let h = f.grid().dr();
    let h2 = h * h;
    let mut out = vec![0.0; n];
    out[0] = if f.is_even() {
        6.0 * (v[1] - v[0]) / h2
    } else {
        3.0 * (2.0 * v[0] - 5.0 * v[1] + 4.0 * v[2] - v[3]) / h2
    };
    for i in 1..n - 1 {
        let r = i as f64 * h;
        let wm = (r - h) * v[i - 1];
        let w0 = r * v[i];
        let wp = (r + h) * v[i + 1];
        out[i] = (wp - 2.0 * w0 + wm) / (h2 * r);
    }
    let rl = (n - 1) as f64 * h;
    let d2 = (2.0 * v[n - 1] - 5.0 * v[n - 2] + 4.0 * v[n - 3] - v[n - 4]) / h2;
    let d1 = (3.0 * v[n - 1] - 4.0 * v[n - 2] + v[n - 3]) / (2.0 * h);
    out[n - 1] = d2 + 2.0 * d1 / rl;
    RadialField::from_raw(*f.grid(), out, f.is_even())
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn grid(n: usize, dr: f64) -> RadialGrid {
        RadialGrid::new(n, dr).unwrap()
    }

    #[test]
    fn grid_invariants() {
        assert!(RadialGrid::new(15, 0.1).is_err());
        assert!(RadialGrid::new(16, 0.0).is_err());
        assert!(RadialGrid::new(16, f64::NAN).is_err());
        let g = grid(101, 0.1);
        assert_eq!(g.r(0), 0.0);
        assert_relative_eq!(g.r_max(), 10.0, epsilon = 1e-12);
        let g = RadialGrid::with_extent(12.0, 0.01).unwrap();
        assert_eq!(g.n_points(), 1201);
    }

    #[test]
    fn zero_field_integrates_to_zero() {
        let g = grid(101, 0.1);
        assert_eq!(integrate_radial(&RadialField::zeros(g)).unwrap(), 0.0);
        let n = norms(&RadialField::zeros(g)).unwrap();
        assert_eq!((n.l2, n.h1_seminorm, n.h2, n.sup), (0.0, 0.0, 0.0, 0.0));
    }

    #[test]
    fn gaussian_integral() {
        // ∫_{ℝ³} e^{-|x|²} dx = π^{3/2}
        let g = RadialGrid::with_extent(12.0, 0.01).unwrap();
        let f = RadialField::from_fn(g, |r| (-r * r).exp());
        assert!((integrate_radial(&f).unwrap() - PI.powf(1.5)).abs() < 1e-8);
        // even node count goes through the 3/8 tail
        let g = grid(1200, 0.01);
        let f = RadialField::from_fn(g, |r| (-r * r).exp());
        assert!((integrate_radial(&f).unwrap() - PI.powf(1.5)).abs() < 1e-8);
    }

    #[test]
    fn cubic_exactness_per_panel() {
        // f r² of degree 3 in r, integrated over [0, r_max]
        for n in [17, 18] {
            let g = grid(n, 0.25);
            let f = RadialField::from_fn(g, |r| 2.0 - 0.5 * r);
            let rm = g.r_max();
            let exact = 4.0 * PI * (2.0 * rm.powi(3) / 3.0 - 0.5 * rm.powi(4) / 4.0);
            assert_relative_eq!(integrate_radial(&f).unwrap(), exact, max_relative = 1e-13);
        }
    }

    #[test]
    fn non_finite_rejected() {
        let g = grid(20, 0.1);
        assert!(RadialField::new(g, vec![f64::NAN; 20], true).is_err());
        let mut f = RadialField::zeros(g);
        f.values_mut()[3] = f64::INFINITY;
        assert_eq!(
            integrate_radial(&f),
            Err(Error::NonFinite {
                index: 3,
                value: f64::INFINITY
            })
        );
    }

    #[test]
    fn inner_rejects_grid_mismatch() {
        let a = RadialField::zeros(grid(20, 0.1));
        let b = RadialField::zeros(grid(21, 0.1));
        assert_eq!(inner(&a, &b), Err(Error::GridMismatch));
    }

    #[test]
    fn derivative_exact_on_quadratics() {
        let g = grid(50, 0.1);
        let f = RadialField::from_fn(g, |r| r * r);
        let d = derivative(&f, DerivativeOrder::First);
        for i in 1..49 {
            assert_relative_eq!(d.values()[i], 2.0 * g.r(i), epsilon = 1e-12);
        }
        let c = RadialField::from_fn(g, |_| 3.0);
        assert!(derivative(&c, DerivativeOrder::First).sup() < 1e-12);
        assert_eq!(DerivativeOrder::try_from(3), Err(Error::DerivativeOrder(3)));
        assert!(DerivativeOrder::try_from(2).is_ok());
    }

    #[test]
    fn derivative_second_order_convergence() {
        let err = |dr: f64| {
            let g = RadialGrid::with_extent(6.0, dr).unwrap();
            let f = RadialField::from_fn(g, f64::sin).with_even(false);
            let d = derivative(&f, DerivativeOrder::First);
            g.nodes()
                .zip(d.values())
                .fold(0.0_f64, |m, (r, v)| m.max((v - r.cos()).abs()))
        };
        let ratio = err(0.02) / err(0.01);
        assert!((3.6..4.4).contains(&ratio), "ratio {ratio}");
    }

    #[test]
    fn laplacian_of_gaussian() {
        // Δ e^{-r²} = (4r² - 6) e^{-r²}
        let g = RadialGrid::with_extent(8.0, 0.005).unwrap();
        let f = RadialField::from_fn(g, |r| (-r * r).exp());
        let lap = laplacian(&f);
        for (r, v) in g.nodes().zip(lap.values()) {
            assert!((v - (4.0 * r * r - 6.0) * (-r * r).exp()).abs() < 2e-4);
        }
    }

    #[test]
    fn interpolation_is_cubic_exact() {
        let g = grid(40, 0.1);
        let f = RadialField::from_fn(g, |r| 1.0 + r * r - 0.1 * r * r * r).with_even(false);
        for &r in &[0.05, 0.77, 2.31, 3.85] {
            assert_relative_eq!(
                f.sample(r, Exterior::Zero),
                1.0 + r * r - 0.1 * r * r * r,
                epsilon = 1e-12
            );
        }
        let even = RadialField::from_fn(g, |r| 1.0 + r * r);
        assert_relative_eq!(even.sample(0.05, Exterior::Zero), 1.0025, epsilon = 1e-12);
        let far = f.sample(10.0, Exterior::Harmonic);
        assert_relative_eq!(far, f.values()[39] * 3.9 / 10.0, epsilon = 1e-12);
    }

    #[test]
    fn csv_snapshot_format() {
        let g = grid(16, 0.5);
        let f = RadialField::from_fn(g, |r| 1.0 / (1.0 + r));
        let mut buf = Vec::new();
        f.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let mut lines = text.lines();
        assert_eq!(lines.next(), Some("r,value"));
        let row: Vec<&str> = lines.nth(1).unwrap().split(',').collect();
        assert_eq!(row[0], "5.0000000000000000e-1");
        let parsed: f64 = row[1].parse().unwrap();
        assert_eq!(parsed, 1.0 / 1.5);
        assert_eq!(text.lines().count(), 17);
    }
}
