//! Log-polar discretization of circular annuli.
//!
//! An annulus `A(a, b)` is covered by the rectangle `[log a, log b] x [0, 2π)`
//! through `z = exp(ζ)`, `ζ = u + iv`. Nodes are uniform in `u` and `v`; the
//! angular index is periodic. Because the chart is conformal, the Dirichlet
//! energy needs no area weight on the rectangle.

use std::f64::consts::PI;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Relative tolerance used when deciding whether a point lies on a circle or in
/// a closed annulus.
pub const CONSTRAINT_TOL: f64 = 1e-9;

/// The circular annulus `{ a < |z| < b }`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Annulus {
    inner: f64,
    outer: f64,
}

impl Annulus {
    pub fn new(inner: f64, outer: f64) -> Result<Self> {
        if !(inner.is_finite() && outer.is_finite()) || inner <= 0.0 || outer <= inner {
            return Err(Error::config(
                "grid::Annulus::new",
                format!("need 0 < inner < outer < inf, got inner={inner}, outer={outer}"),
            ));
        }
        Ok(Self { inner, outer })
    }

    pub fn inner(&self) -> f64 {
        self.inner
    }

    pub fn outer(&self) -> f64 {
        self.outer
    }

    /// Whether `|w|` lies in the closed annulus, up to a relative slack.
    pub fn contains_closed(&self, w: Complex64, rel_tol: f64) -> bool {
        let s = w.norm();
        s >= self.inner * (1.0 - rel_tol) && s <= self.outer * (1.0 + rel_tol)
    }

    /// Conformal modulus, `(1/2π) log(b/a)`.
    pub fn modulus(&self) -> f64 {
        (self.outer / self.inner).ln() / (2.0 * PI)
    }

    /// Euclidean area `π(b² - a²)`.
    pub fn area(&self) -> f64 {
        PI * (self.outer * self.outer - self.inner * self.inner)
    }

    pub fn midpoint_radius(&self) -> f64 {
        0.5 * (self.inner + self.outer)
    }
}

/// Conformal modulus of an annulus. Only comparisons between moduli carry
/// meaning, so any fixed monotone convention works; this one uses `(1/2π) log(b/a)`.
pub fn modulus(annulus: &Annulus) -> f64 {
    annulus.modulus()
}

/// Uniform grid on the log-polar rectangle of an annulus.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LogPolarGrid {
    annulus: Annulus,
    n_s: usize,
    n_t: usize,
}

impl LogPolarGrid {
    pub fn new(annulus: Annulus, n_s: usize, n_t: usize) -> Result<Self> {
        if n_s < 3 {
            return Err(Error::config("grid::LogPolarGrid::new", format!("n_s must be >= 3, got {n_s}")));
        }
        if n_t < 8 {
            return Err(Error::config("grid::LogPolarGrid::new", format!("n_t must be >= 8, got {n_t}")));
        }
        Ok(Self { annulus, n_s, n_t })
    }

    pub fn annulus(&self) -> &Annulus {
        &self.annulus
    }

    pub fn n_s(&self) -> usize {
        self.n_s
    }

    pub fn n_t(&self) -> usize {
        self.n_t
    }

    pub fn len(&self) -> usize {
        self.n_s * self.n_t
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn u_min(&self) -> f64 {
        self.annulus.inner.ln()
    }

    pub fn u_max(&self) -> f64 {
        self.annulus.outer.ln()
    }

    /// Length of the rectangle in `u`.
    pub fn u_span(&self) -> f64 {
        self.u_max() - self.u_min()
    }

    pub fn du(&self) -> f64 {
        self.u_span() / (self.n_s - 1) as f64
    }

    pub fn dv(&self) -> f64 {
        2.0 * PI / self.n_t as f64
    }

    #[inline]
    pub fn index(&self, j: usize, k: usize) -> usize {
        j * self.n_t + k
    }

    /// Periodic angular index.
    #[inline]
    pub fn wrap(&self, k: isize) -> usize {
        k.rem_euclid(self.n_t as isize) as usize
    }

    pub fn u(&self, j: usize) -> f64 {
        if j + 1 == self.n_s {
            self.u_max()
        } else {
            self.u_min() + j as f64 * self.du()
        }
    }

    pub fn v(&self, k: usize) -> f64 {
        k as f64 * self.dv()
    }

    /// Radius of row `j`; boundary rows return the annulus radii exactly.
    pub fn radius(&self, j: usize) -> f64 {
        if j == 0 {
            self.annulus.inner
        } else if j + 1 == self.n_s {
            self.annulus.outer
        } else {
            self.u(j).exp()
        }
    }

    /// Plane position of node `(j, k)`.
    pub fn z(&self, j: usize, k: usize) -> Complex64 {
        Complex64::from_polar(self.radius(j), self.v(k))
    }

    pub fn is_boundary_row(&self, j: usize) -> bool {
        j == 0 || j + 1 == self.n_s
    }

    /// All plane positions in node order.
    pub fn points(&self) -> Vec<Complex64> {
        let mut out = Vec::with_capacity(self.len());
        for j in 0..self.n_s {
            for k in 0..self.n_t {
                out.push(self.z(j, k));
            }
        }
        out
    }
}

/// Orientation a field is expected to have.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum Orientation {
    #[default]
    SensePreserving,
    SenseReversing,
}

/// Complex samples `F_{jk}` of a map on a log-polar grid.
#[derive(Clone, Debug, PartialEq)]
pub struct MappingField {
    grid: LogPolarGrid,
    values: Vec<Complex64>,
    orientation: Orientation,
}

impl MappingField {
    pub fn new(grid: LogPolarGrid, values: Vec<Complex64>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::config(
                "grid::MappingField::new",
                format!("expected {} samples, got {}", grid.len(), values.len()),
            ));
        }
        if let Some(i) = values.iter().position(|w| !(w.re.is_finite() && w.im.is_finite())) {
            return Err(Error::config("grid::MappingField::new", format!("non-finite sample at node {i}")));
        }
        Ok(Self { grid, values, orientation: Orientation::SensePreserving })
    }

    /// Samples `f` at every node.
    pub fn from_fn(grid: &LogPolarGrid, f: impl Fn(Complex64) -> Complex64) -> Result<Self> {
        let values = grid.points().into_iter().map(f).collect();
        Self::new(grid.clone(), values)
    }

    /// Samples a map given in polar form `(s, t) -> F(s e^{it})`.
    pub fn from_polar_fn(grid: &LogPolarGrid, f: impl Fn(f64, f64) -> Complex64) -> Result<Self> {
        let mut values = Vec::with_capacity(grid.len());
        for j in 0..grid.n_s() {
            let s = grid.radius(j);
            for k in 0..grid.n_t() {
                values.push(f(s, grid.v(k)));
            }
        }
        Self::new(grid.clone(), values)
    }

    pub fn with_orientation(mut self, orientation: Orientation) -> Self {
        self.orientation = orientation;
        self
    }

    pub fn grid(&self) -> &LogPolarGrid {
        &self.grid
    }

    pub fn values(&self) -> &[Complex64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [Complex64] {
        &mut self.values
    }

    pub fn into_values(self) -> Vec<Complex64> {
        self.values
    }

    pub fn orientation(&self) -> Orientation {
        self.orientation
    }

    #[inline]
    pub fn at(&self, j: usize, k: usize) -> Complex64 {
        self.values[self.grid.index(j, k)]
    }

    /// Applies `g` to every sample, keeping the grid.
    pub fn map_values(&self, g: impl Fn(Complex64) -> Complex64) -> Result<Self> {
        let values = self.values.iter().map(|&w| g(w)).collect();
        Ok(Self::new(self.grid.clone(), values)?.with_orientation(self.orientation))
    }

    /// Checks that the first and last rows lie on `|w| = inner` and `|w| = outer`.
    pub fn boundary_rows_on(&self, inner: f64, outer: f64, rel_tol: f64) -> bool {
        let last = self.grid.n_s() - 1;
        (0..self.grid.n_t()).all(|k| {
            ((self.at(0, k).norm() - inner).abs() <= rel_tol * inner)
                && ((self.at(last, k).norm() - outer).abs() <= rel_tol * outer)
        })
    }

    /// Bilinear interpolation at rectangle coordinates `(u, v)`, periodic in `v`.
    /// Returns `None` when `u` falls outside the rectangle by more than roundoff.
    pub fn sample_uv(&self, u: f64, v: f64) -> Option<Complex64> {
        let g = &self.grid;
        let slack = 1e-12 * (1.0 + g.u_span());
        if u < g.u_min() - slack || u > g.u_max() + slack {
            return None;
        }
        let x = snap(((u - g.u_min()) / g.du()).clamp(0.0, (g.n_s() - 1) as f64));
        let mut j = x.floor() as usize;
        if j >= g.n_s() - 1 {
            j = g.n_s() - 2;
        }
        let a = x - j as f64;
        let y = snap((v / g.dv()).rem_euclid(g.n_t() as f64));
        let mut k = y.floor() as usize;
        let mut b = y - k as f64;
        if k >= g.n_t() {
            k = 0;
            b = 0.0;
        }
        let k1 = (k + 1) % g.n_t();
        // Exact node hits return the stored sample untouched.
        if a == 0.0 && b == 0.0 {
            return Some(self.at(j, k));
        }
        if a == 1.0 && b == 0.0 {
            return Some(self.at(j + 1, k));
        }
        let f00 = self.at(j, k);
        let f10 = self.at(j + 1, k);
        let f01 = self.at(j, k1);
        let f11 = self.at(j + 1, k1);
        Some(f00 * ((1.0 - a) * (1.0 - b)) + f10 * (a * (1.0 - b)) + f01 * ((1.0 - a) * b) + f11 * (a * b))
    }

    /// Bilinear interpolation at a plane point.
    pub fn sample(&self, z: Complex64) -> Option<Complex64> {
        self.sample_uv(z.norm().ln(), z.arg())
    }

    /// Resamples this field onto another grid over the same annulus.
    pub fn resample(&self, grid: &LogPolarGrid) -> Result<Self> {
        if grid.annulus() != self.grid.annulus() {
            return Err(Error::domain("grid::MappingField::resample", "grids cover different annuli"));
        }
        let mut values = Vec::with_capacity(grid.len());
        for j in 0..grid.n_s() {
            let u = grid.u(j);
            for k in 0..grid.n_t() {
                let w = self
                    .sample_uv(u, grid.v(k))
                    .ok_or_else(|| Error::domain("grid::MappingField::resample", "sample outside rectangle"))?;
                values.push(w);
            }
        }
        Ok(Self::new(grid.clone(), values)?.with_orientation(self.orientation))
    }
}

/// Rounds grid coordinates that sit on a node up to roundoff.
fn snap(x: f64) -> f64 {
    let r = x.round();
    if (x - r).abs() < 1e-9 {
        r
    } else {
        x
    }
}

/// Rectangle derivatives `F_u`, `F_v` at every node: centered differences in
/// the interior, one-sided three-point stencils on the boundary rows, periodic
/// centered differences in `v`.
pub fn uv_derivatives(field: &MappingField) -> (Vec<Complex64>, Vec<Complex64>) {
    let g = field.grid();
    let (n_s, n_t) = (g.n_s(), g.n_t());
    let (du, dv) = (g.du(), g.dv());
    let mut fu = vec![Complex64::new(0.0, 0.0); g.len()];
    let mut fv = vec![Complex64::new(0.0, 0.0); g.len()];
    for j in 0..n_s {
        for k in 0..n_t {
            let i = g.index(j, k);
            fu[i] = if j == 0 {
                (-3.0 * field.at(0, k) + 4.0 * field.at(1, k) - field.at(2, k)) / (2.0 * du)
            } else if j == n_s - 1 {
                (3.0 * field.at(j, k) - 4.0 * field.at(j - 1, k) + field.at(j - 2, k)) / (2.0 * du)
            } else {
                (field.at(j + 1, k) - field.at(j - 1, k)) / (2.0 * du)
            };
            let kp = (k + 1) % n_t;
            let km = (k + n_t - 1) % n_t;
            fv[i] = (field.at(j, kp) - field.at(j, km)) / (2.0 * dv);
        }
    }
    (fu, fv)
}

/// Wirtinger derivatives of a sampled field, both in the rectangle chart
/// (`F_ζ`, `F_ζ̄`) and in the plane (`F_z`, `F_z̄`).
#[derive(Clone, Debug)]
pub struct WirtingerFields {
    pub fzeta: Vec<Complex64>,
    pub fzetabar: Vec<Complex64>,
    pub fz: Vec<Complex64>,
    pub fzbar: Vec<Complex64>,
}

/// Discrete Wirtinger derivatives. `F_ζ = (F_u - iF_v)/2`, `F_ζ̄ = (F_u + iF_v)/2`,
/// and through `z = e^ζ`: `F_z = e^{-ζ} F_ζ`, `F_z̄ = e^{-ζ̄} F_ζ̄`.
pub fn wirtinger(field: &MappingField) -> Result<WirtingerFields> {
    let g = field.grid();
    if g.n_s() < 3 || g.n_t() < 3 {
        return Err(Error::config("grid::wirtinger", "degenerate grid"));
    }
    let (fu, fv) = uv_derivatives(field);
    let i = Complex64::i();
    let mut out = WirtingerFields {
        fzeta: Vec::with_capacity(g.len()),
        fzetabar: Vec::with_capacity(g.len()),
        fz: Vec::with_capacity(g.len()),
        fzbar: Vec::with_capacity(g.len()),
    };
    for j in 0..g.n_s() {
        let inv_s = 1.0 / g.radius(j);
        for k in 0..g.n_t() {
            let idx = g.index(j, k);
            let fzeta = 0.5 * (fu[idx] - i * fv[idx]);
            let fzetabar = 0.5 * (fu[idx] + i * fv[idx]);
            let v = g.v(k);
            // e^{-ζ} = s⁻¹ e^{-iv}, e^{-ζ̄} = s⁻¹ e^{iv}
            out.fz.push(fzeta * Complex64::from_polar(inv_s, -v));
            out.fzbar.push(fzetabar * Complex64::from_polar(inv_s, v));
            out.fzeta.push(fzeta);
            out.fzetabar.push(fzetabar);
        }
    }
    Ok(out)
}

/// Euclidean Jacobian `|F_z|² - |F_z̄|²` at every node.
pub fn jacobian(field: &MappingField) -> Result<Vec<f64>> {
    let w = wirtinger(field)?;
    Ok(w.fz.iter().zip(&w.fzbar).map(|(a, b)| a.norm_sqr() - b.norm_sqr()).collect())
}
