//! Reflection of a map `F: A(1, R) → A(1, ρ)` across both boundary circles.
//!
//! The extension lives on `A(1/R, R²)` and takes values in `A(1/ρ, ρ²)`:
//! `F` itself on the middle band, `ρ²/conj(F(R²/z̄))` on the outer band and
//! `1/conj(F(1/z̄))` on the inner band. In log-polar coordinates both
//! reflections are affine (`u ↦ -u`, `u ↦ 2 log R - u`), so the extended grid
//! keeps the source spacing and every reflected node lands on a source node.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::field_io::field_to_csv;
use crate::grid::{Annulus, LogPolarGrid, MappingField, CONSTRAINT_TOL};
use crate::hopf::hopf_field;
use crate::metric::Metric;

pub use crate::metric::extend_metric;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Band {
    /// `1/R ≤ |z| < 1`
    Inner,
    /// `1 ≤ |z| ≤ R`, the source field.
    Middle,
    /// `R < |z| ≤ R²`
    Outer,
}

impl Band {
    pub fn label(self) -> &'static str {
        match self {
            Band::Inner => "inner",
            Band::Middle => "middle",
            Band::Outer => "outer",
        }
    }
}

#[derive(Clone, Debug)]
pub struct ExtendedField {
    field: MappingField,
    source: MappingField,
    domain_outer: f64,
    target_outer: f64,
}

impl ExtendedField {
    pub fn field(&self) -> &MappingField {
        &self.field
    }

    pub fn source(&self) -> &MappingField {
        &self.source
    }

    /// `R`, the outer radius of the source domain.
    pub fn domain_outer(&self) -> f64 {
        self.domain_outer
    }

    /// `ρ`, the outer radius of the source target.
    pub fn target_outer(&self) -> f64 {
        self.target_outer
    }

    /// First extended row of the middle band (the unit circle).
    pub fn inner_junction_row(&self) -> usize {
        self.source.grid().n_s() - 1
    }

    /// Last extended row of the middle band (the circle `|z| = R`).
    pub fn outer_junction_row(&self) -> usize {
        2 * (self.source.grid().n_s() - 1)
    }

    pub fn band_of_row(&self, j: usize) -> Band {
        if j < self.inner_junction_row() {
            Band::Inner
        } else if j <= self.outer_junction_row() {
            Band::Middle
        } else {
            Band::Outer
        }
    }

    /// One label per node, in node order.
    pub fn band_labels(&self) -> Vec<String> {
        let g = self.field.grid();
        (0..g.n_s()).flat_map(|j| std::iter::repeat_n(self.band_of_row(j).label().to_string(), g.n_t())).collect()
    }

    pub fn to_csv(&self) -> String {
        field_to_csv(&self.field, Some(&self.band_labels()))
    }

    /// Source value at the mirror image of extended node `(j, k)` in its band.
    fn mirrored_source(&self, j: usize, k: usize) -> Option<Complex64> {
        let g = self.field.grid();
        let u = g.u(j);
        let v = g.v(k);
        match self.band_of_row(j) {
            Band::Inner => self.source.sample_uv(-u, v),
            Band::Middle => self.source.sample_uv(u, v),
            Band::Outer => self.source.sample_uv(2.0 * self.domain_outer.ln() - u, v),
        }
    }

    /// Max deviation from `F` after reflecting the inner band back across `|z| = 1`.
    pub fn double_reflection_error(&self) -> f64 {
        let g = self.source.grid();
        let mut worst: f64 = 0.0;
        for j in 0..g.n_s() {
            for k in 0..g.n_t() {
                let back = match self.field.sample_uv(-g.u(j), g.v(k)) {
                    Some(w) => 1.0 / w.conj(),
                    None => return f64::INFINITY,
                };
                worst = worst.max((back - self.source.at(j, k)).norm());
            }
        }
        worst
    }
}

/// Builds the three-branch extension of `field`, which must map `A(1, R)` onto
/// `A(1, ρ)` with its boundary rows on `|w| = 1` and `|w| = ρ`.
pub fn extend_map(field: &MappingField, rho: f64) -> Result<ExtendedField> {
    const OP: &str = "reflection::extend_map";
    let g = field.grid();
    let dom = g.annulus();
    if (dom.inner() - 1.0).abs() > 1e-12 {
        return Err(Error::precondition(OP, format!("source domain must be A(1, R), found inner radius {}", dom.inner())));
    }
    if !(rho > 1.0 && rho.is_finite()) {
        return Err(Error::precondition(OP, format!("target radius must exceed 1, got {rho}")));
    }
    if !field.boundary_rows_on(1.0, rho, 1e3 * CONSTRAINT_TOL) {
        return Err(Error::precondition(OP, format!("boundary rows are not on |w| = 1 and |w| = {rho}")));
    }
    let big_r = dom.outer();
    let ext_grid = LogPolarGrid::new(Annulus::new(1.0 / big_r, big_r * big_r)?, 3 * (g.n_s() - 1) + 1, g.n_t())?;
    let mut ext = ExtendedField {
        field: MappingField::new(ext_grid.clone(), vec![Complex64::new(0.0, 0.0); ext_grid.len()])?,
        source: field.clone(),
        domain_outer: big_r,
        target_outer: rho,
    };
    let r2 = rho * rho;
    let mut values = Vec::with_capacity(ext_grid.len());
    for j in 0..ext_grid.n_s() {
        let band = ext.band_of_row(j);
        for k in 0..ext_grid.n_t() {
            let w = match band {
                // Coincident nodes are copied so the restriction is bit-exact.
                Band::Middle => field.at(j - ext.inner_junction_row(), k),
                _ => {
                    let m = ext
                        .mirrored_source(j, k)
                        .ok_or_else(|| Error::domain(OP, format!("reflected row {j} falls outside the source rectangle")))?;
                    if band == Band::Inner {
                        1.0 / m.conj()
                    } else {
                        r2 / m.conj()
                    }
                }
            };
            values.push(w);
        }
    }
    ext.field = MappingField::new(ext_grid, values)?.with_orientation(field.orientation());
    Ok(ext)
}

/// Mismatch of the two sides of a junction circle.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct JunctionGap {
    pub radius: f64,
    /// Max over angles of `|F| - (branch formula)` on the circle itself.
    pub value_gap: f64,
    /// Max over angles of the difference of linear extrapolations from each side.
    pub extrapolation_gap: f64,
}

/// Gaps at `|z| = 1` and `|z| = R`.
pub fn junction_gaps(ext: &ExtendedField) -> [JunctionGap; 2] {
    let g = ext.field.grid();
    let r2 = ext.target_outer * ext.target_outer;
    let gap = |j: usize, branch: &dyn Fn(Complex64) -> Complex64| {
        let mut value_gap: f64 = 0.0;
        let mut extrapolation_gap: f64 = 0.0;
        for k in 0..g.n_t() {
            let f = ext.field.at(j, k);
            value_gap = value_gap.max((f - branch(f)).norm());
            if j >= 2 && j + 2 < g.n_s() {
                let below = 2.0 * ext.field.at(j - 1, k) - ext.field.at(j - 2, k);
                let above = 2.0 * ext.field.at(j + 1, k) - ext.field.at(j + 2, k);
                extrapolation_gap = extrapolation_gap.max((below - above).norm());
            }
        }
        (value_gap, extrapolation_gap)
    };
    let (v1, e1) = gap(ext.inner_junction_row(), &|w| 1.0 / w.conj());
    let (v2, e2) = gap(ext.outer_junction_row(), &|w| r2 / w.conj());
    [
        JunctionGap { radius: 1.0, value_gap: v1, extrapolation_gap: e1 },
        JunctionGap { radius: ext.domain_outer, value_gap: v2, extrapolation_gap: e2 },
    ]
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BandDeviation {
    pub band: Band,
    pub rms: f64,
    pub max: f64,
    /// Max over rows at least three rows away from a junction or the grid edge.
    pub interior_max: f64,
    pub max_prediction: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExtendedHopfReport {
    pub c_re: f64,
    pub c_im: f64,
    /// Band statistics leave out the two junction rows, where the extension is
    /// only C¹ and centred differences carry an O(Δ) error.
    pub bands: Vec<BandDeviation>,
    /// Max deviation on the junction rows, measured against the middle prediction.
    pub junction_max: f64,
    /// `sup |z²·Hopf|` of the extension over rows off the grid edge.
    pub hopf_sup: f64,
    /// `max(ρ⁴, ρ⁻⁴)·|c|`
    pub hopf_bound: f64,
    pub junctions: [JunctionGap; 2],
}

impl ExtendedHopfReport {
    pub fn band(&self, band: Band) -> &BandDeviation {
        self.bands.iter().find(|b| b.band == band).expect("all bands are reported")
    }

    pub fn bounded(&self, tol: f64) -> bool {
        self.hopf_sup <= self.hopf_bound + tol
    }
}

/// Compares `z²·Hopf` of the extension, computed with the reflected metric,
/// against the branch predictions. Reflection conjugates the rotated Hopf
/// product, so the predictions carry `conj(c)`; for the real constants of
/// radial problems this is `c` itself.
///
/// `metric` may be the source metric on `A(1, ρ)` or its extension.
pub fn verify_extended_hopf(ext: &ExtendedField, metric: &Metric, c: Complex64) -> Result<ExtendedHopfReport> {
    let rho = ext.target_outer;
    let extended = if metric.domain().inner() < 1.0 { metric.clone() } else { extend_metric(metric, rho)? };
    let g = ext.field.grid();
    let h = hopf_field(&ext.field, &extended)?;
    let r4 = rho.powi(4);
    let (j1, j2) = (ext.inner_junction_row(), ext.outer_junction_row());
    let mut acc = [(0.0, 0usize, 0.0f64, 0.0f64, 0.0f64); 3];
    let mut hopf_sup: f64 = 0.0;
    let mut junction_max: f64 = 0.0;
    for j in 1..g.n_s() - 1 {
        if j == j1 || j == j2 {
            for k in 0..g.n_t() {
                let got = h.rotated[g.index(j, k)];
                junction_max = junction_max.max((got - c).norm());
                hopf_sup = hopf_sup.max(got.norm());
            }
            continue;
        }
        let band = ext.band_of_row(j);
        let slot = band as usize;
        let far = [j1, j2, 0, g.n_s() - 1].iter().all(|&e| j.abs_diff(e) >= 3);
        for k in 0..g.n_t() {
            let pred = match band {
                Band::Middle => c,
                Band::Inner => {
                    let m = ext.mirrored_source(j, k).expect("extension was built from these samples");
                    c.conj() / m.norm_sqr().powi(2)
                }
                Band::Outer => {
                    let m = ext.mirrored_source(j, k).expect("extension was built from these samples");
                    c.conj() * r4 / m.norm_sqr().powi(2)
                }
            };
            let got = h.rotated[g.index(j, k)];
            let d = (got - pred).norm();
            let a = &mut acc[slot];
            a.0 += d * d;
            a.1 += 1;
            a.2 = a.2.max(d);
            if far {
                a.3 = a.3.max(d);
            }
            a.4 = a.4.max(pred.norm());
            hopf_sup = hopf_sup.max(got.norm());
        }
    }
    let bands = [Band::Inner, Band::Middle, Band::Outer]
        .into_iter()
        .map(|b| {
            let a = acc[b as usize];
            BandDeviation { band: b, rms: (a.0 / a.1.max(1) as f64).sqrt(), max: a.2, interior_max: a.3, max_prediction: a.4 }
        })
        .collect();
    Ok(ExtendedHopfReport {
        c_re: c.re,
        c_im: c.im,
        bands,
        junction_max,
        hopf_sup,
        hopf_bound: r4.max(1.0 / r4) * c.norm(),
        junctions: junction_gaps(ext),
    })
}
