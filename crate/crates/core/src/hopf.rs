//! Stationarity audits: the Hopf differential `℘²(F) F_z conj(F_z̄)`, its fitted
//! constant, the harmonic-map residual and inner-variation derivatives.
//!
//! On the log-polar rectangle the scale-free quantity is
//! `z²·Hopf = ℘²(F) F_ζ conj(F_ζ̄)`, which is the constant `c` for stationary maps.
//! Fits and residuals use interior rows only.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::energy::total_energy;
use crate::error::{Error, Result};
use crate::field_io::node_columns_csv;
use crate::grid::{self, LogPolarGrid, MappingField};
use crate::metric::Metric;

#[derive(Clone, Debug)]
pub struct HopfField {
    /// `℘²(F) F_z conj(F_z̄)` per node.
    pub hopf: Vec<Complex64>,
    /// `z²·Hopf = ℘²(F) F_ζ conj(F_ζ̄)` per node.
    pub rotated: Vec<Complex64>,
}

impl HopfField {
    pub fn to_csv(&self, grid: &LogPolarGrid) -> String {
        node_columns_csv(grid, &["hopf", "z2_hopf"], &[&self.hopf, &self.rotated])
    }
}

pub fn hopf_field(field: &MappingField, metric: &Metric) -> Result<HopfField> {
    let w = grid::wirtinger(field)?;
    let mut hopf = Vec::with_capacity(field.values().len());
    let mut rotated = Vec::with_capacity(field.values().len());
    for (i, f) in field.values().iter().enumerate() {
        let p = metric.eval_relaxed(*f)?.density;
        let p2 = p * p;
        hopf.push(p2 * w.fz[i] * w.fzbar[i].conj());
        rotated.push(p2 * w.fzeta[i] * w.fzetabar[i].conj());
    }
    Ok(HopfField { hopf, rotated })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GridSpacing {
    pub n_s: usize,
    pub n_t: usize,
    pub du: f64,
    pub dv: f64,
}

impl GridSpacing {
    pub fn of(grid: &LogPolarGrid) -> Self {
        Self { n_s: grid.n_s(), n_t: grid.n_t(), du: grid.du(), dv: grid.dv() }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HopfReport {
    /// Real part of the fitted constant.
    pub c_fit: f64,
    pub c_fit_imag: f64,
    pub residual_rms: f64,
    pub residual_max: f64,
    pub harmonic_residual_rms: f64,
    pub spacing: GridSpacing,
}

impl HopfReport {
    pub fn constant(&self) -> Complex64 {
        Complex64::new(self.c_fit, self.c_fit_imag)
    }
}

fn interior_rows(grid: &LogPolarGrid) -> std::ops::Range<usize> {
    1..grid.n_s() - 1
}

/// Plane-area-weighted mean of `z²·Hopf` over interior nodes, with residuals.
pub fn fit_hopf_constant(field: &MappingField, metric: &Metric) -> Result<HopfReport> {
    let g = field.grid();
    let h = hopf_field(field, metric)?;
    let mut sum = Complex64::new(0.0, 0.0);
    let mut weight = 0.0;
    for j in interior_rows(g) {
        let w = (2.0 * g.u(j)).exp();
        for k in 0..g.n_t() {
            sum += w * h.rotated[g.index(j, k)];
        }
        weight += w * g.n_t() as f64;
    }
    let c = sum / weight;
    let mut sq = 0.0;
    let mut max: f64 = 0.0;
    let mut count = 0usize;
    for j in interior_rows(g) {
        for k in 0..g.n_t() {
            let r = (h.rotated[g.index(j, k)] - c).norm();
            sq += r * r;
            max = max.max(r);
            count += 1;
        }
    }
    let harm = harmonic_residual(field, metric)?;
    let harm_sq: f64 = interior_rows(g).flat_map(|j| (0..g.n_t()).map(move |k| (j, k))).map(|(j, k)| harm[g.index(j, k)].powi(2)).sum();
    let report = HopfReport {
        c_fit: c.re,
        c_fit_imag: c.im,
        residual_rms: (sq / count as f64).sqrt(),
        residual_max: max,
        harmonic_residual_rms: (harm_sq / count as f64).sqrt(),
        spacing: GridSpacing::of(g),
    };
    if ![report.c_fit, report.c_fit_imag, report.residual_rms, report.residual_max, report.harmonic_residual_rms]
        .iter()
        .all(|x| x.is_finite())
    {
        return Err(Error::Singularity { op: "hopf::fit_hopf_constant", detail: "non-finite Hopf statistics".into() });
    }
    Ok(report)
}

/// `|F_zz̄ + (log ℘²)_w(F) F_z F_z̄|` per node, with
/// `F_zz̄ = e^{-2u}(F_uu + F_vv)/4`. Boundary rows are zero.
pub fn harmonic_residual(field: &MappingField, metric: &Metric) -> Result<Vec<f64>> {
    let g = field.grid();
    let w = grid::wirtinger(field)?;
    let (iu2, iv2) = (1.0 / (g.du() * g.du()), 1.0 / (g.dv() * g.dv()));
    let mut out = vec![0.0; g.len()];
    for j in interior_rows(g) {
        let scale = 0.25 * (-2.0 * g.u(j)).exp();
        for k in 0..g.n_t() {
            let km = g.wrap(k as isize - 1);
            let kp = g.wrap(k as isize + 1);
            let f = field.at(j, k);
            let fuu = (field.at(j + 1, k) - 2.0 * f + field.at(j - 1, k)) * iu2;
            let fvv = (field.at(j, kp) - 2.0 * f + field.at(j, km)) * iv2;
            let i = g.index(j, k);
            let dlog = metric.eval_relaxed(f)?.dlog_w;
            out[i] = (scale * (fuu + fvv) + 2.0 * dlog * w.fz[i] * w.fzbar[i]).norm();
        }
    }
    Ok(out)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FlowKind {
    /// `u ↦ u + t η(u)`
    Radial,
    /// `v ↦ v + t η(u)`
    AngularShear,
}

/// One-parameter family of diffeomorphisms of the domain annulus with
/// profile `η(u) = amplitude · sin(mode π (u - u_min) / L)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Flow {
    pub kind: FlowKind,
    pub amplitude: f64,
    pub mode: u32,
}

impl Flow {
    pub fn radial(amplitude: f64, mode: u32) -> Self {
        Self { kind: FlowKind::Radial, amplitude, mode }
    }

    pub fn shear(amplitude: f64, mode: u32) -> Self {
        Self { kind: FlowKind::AngularShear, amplitude, mode }
    }

    fn eta(&self, grid: &LogPolarGrid, u: f64) -> (f64, f64) {
        let k = self.mode as f64 * std::f64::consts::PI / grid.u_span();
        let x = k * (u - grid.u_min());
        (self.amplitude * x.sin(), self.amplitude * k * x.cos())
    }

    fn check(&self, grid: &LogPolarGrid, t: f64) -> Result<()> {
        const OP: &str = "hopf::inner_variation_derivative";
        if self.mode == 0 || !self.amplitude.is_finite() {
            return Err(Error::config(OP, "flow needs mode ≥ 1 and finite amplitude"));
        }
        let lip = t.abs() * self.amplitude.abs() * self.mode as f64 * std::f64::consts::PI / grid.u_span();
        if self.kind == FlowKind::Radial && lip >= 1.0 {
            return Err(Error::config(OP, format!("flow leaves the annulus or folds it (t·|η'| = {lip})")));
        }
        Ok(())
    }

    /// `F ∘ φ_t⁻¹` sampled on the same grid.
    pub fn transport(&self, field: &MappingField, t: f64) -> Result<MappingField> {
        const OP: &str = "hopf::Flow::transport";
        let g = field.grid();
        self.check(g, t)?;
        let mut values = Vec::with_capacity(g.len());
        for j in 0..g.n_s() {
            let u = g.u(j);
            let (u_src, v_shift) = match self.kind {
                FlowKind::Radial => {
                    // solve x + tη(x) = u
                    let mut x = u;
                    for _ in 0..50 {
                        let (e, de) = self.eta(g, x);
                        let step = (x + t * e - u) / (1.0 + t * de);
                        x -= step;
                        if step.abs() <= 1e-16 * (1.0 + u.abs()) {
                            break;
                        }
                    }
                    (x.clamp(g.u_min(), g.u_max()), 0.0)
                }
                FlowKind::AngularShear => (u, -t * self.eta(g, u).0),
            };
            for k in 0..g.n_t() {
                let w = field
                    .sample_uv(u_src, g.v(k) + v_shift)
                    .ok_or_else(|| Error::config(OP, "flow left the annulus"))?;
                values.push(w);
            }
        }
        Ok(MappingField::new(g.clone(), values)?.with_orientation(field.orientation()))
    }
}

pub const INNER_VARIATION_STEP: f64 = 1e-4;

/// `d/dt ℰ[F ∘ φ_t⁻¹]` at `t = 0` by a centered difference with step `t`.
pub fn inner_variation_derivative_with(field: &MappingField, metric: &Metric, flow: &Flow, t: f64) -> Result<f64> {
    let plus = total_energy(&flow.transport(field, t)?, metric)?;
    let minus = total_energy(&flow.transport(field, -t)?, metric)?;
    Ok((plus - minus) / (2.0 * t))
}

pub fn inner_variation_derivative(field: &MappingField, metric: &Metric, flow: &Flow) -> Result<f64> {
    inner_variation_derivative_with(field, metric, flow, INNER_VARIATION_STEP)
}

/// Fixed set of flows used for stationarity audits.
pub fn flow_catalog() -> Vec<Flow> {
    vec![
        Flow::radial(0.1, 1),
        Flow::radial(0.05, 2),
        Flow::radial(0.03, 3),
        Flow::shear(0.2, 1),
        Flow::shear(0.1, 2),
    ]
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::Annulus;
    use crate::metric::MetricKind;
    use crate::radial::{solve_bvp, RadialProfile};
    use approx::assert_relative_eq;

    fn grid(a: f64, b: f64, n_s: usize, n_t: usize) -> LogPolarGrid {
        LogPolarGrid::new(Annulus::new(a, b).unwrap(), n_s, n_t).unwrap()
    }

    fn nitsche(z: Complex64) -> Complex64 {
        0.5 * (z + 1.0 / z.conj())
    }

    fn euclid(a: f64, b: f64) -> Metric {
        Metric::euclidean(Annulus::new(a, b).unwrap())
    }

    #[test]
    fn hopf_vanishes_for_identity() {
        let g = grid(1.0, 2.0, 17, 64);
        let h = hopf_field(&MappingField::from_fn(&g, |z| z).unwrap(), &euclid(1.0, 2.0)).unwrap();
        // stencil asymmetry between u and v leaves an O(Δ²) remainder
        assert!(h.rotated.iter().all(|x| x.norm() < 1e-2));
        let g = grid(1.0, 2.0, 65, 256);
        let h2 = hopf_field(&MappingField::from_fn(&g, |z| z).unwrap(), &euclid(1.0, 2.0)).unwrap();
        let max1 = h.rotated.iter().map(|x| x.norm()).fold(0.0, f64::max);
        let max2 = h2.rotated.iter().map(|x| x.norm()).fold(0.0, f64::max);
        assert!(max1 / max2 > 12.0, "{max1} {max2}");
    }

    #[test]
    fn nitsche_rotated_hopf_is_constant() {
        let m = euclid(1.0, 1.25);
        let err_at = |n: usize| {
            let g = grid(1.0, 2.0, n + 1, 4 * n);
            let h = hopf_field(&MappingField::from_fn(&g, nitsche).unwrap(), &m).unwrap();
            (1..n).flat_map(|j| (0..4 * n).map(move |k| (j, k))).map(|(j, k)| (h.rotated[g.index(j, k)] + 0.25).norm()).fold(0.0, f64::max)
        };
        let (e1, e2) = (err_at(16), err_at(32));
        assert!(e2 < 1e-3 && (e1 / e2).log2() > 1.8, "{e1} {e2}");
        let g = grid(1.0, 2.0, 33, 128);
        let h = hopf_field(&MappingField::from_fn(&g, nitsche).unwrap(), &m).unwrap();
        let z = g.z(10, 7);
        assert!((h.hopf[g.index(10, 7)] * z * z - h.rotated[g.index(10, 7)]).norm() < 1e-12);
    }

    #[test]
    fn radial_rotated_hopf_matches_first_integral() {
        let m = Metric::inverse_square(Annulus::new(1.0, 2.0).unwrap());
        let (c, prof): (f64, RadialProfile) = solve_bvp(&m, 0.3, 1.0, 2.0, 1.0).unwrap();
        assert!(c < -0.01);
        let fit_err = |n: usize| {
            let g = grid(0.3, 1.0, n + 1, 4 * n);
            let report = fit_hopf_constant(&prof.to_field(&g).unwrap(), &m).unwrap();
            assert!(report.residual_rms <= report.residual_max);
            assert!(report.c_fit_imag.abs() < 1e-12);
            (report.c_fit - c).abs()
        };
        let (e1, e2) = (fit_err(32), fit_err(64));
        assert!(e2 < 1e-3 * c.abs().max(1.0) && (e1 / e2).log2() > 1.5, "{e1} {e2}");
        for s in [0.4, 0.75, 0.9] {
            let (p, dp) = prof.eval(s);
            let rho = 1.0 / (p * p);
            assert_relative_eq!(0.25 * s * s * rho * rho * (dp * dp - p * p / (s * s)), c, max_relative = 1e-6);
        }
    }

    #[test]
    fn fitted_constants() {
        let g = grid(1.0, 2.0, 33, 128);
        let r = fit_hopf_constant(&MappingField::from_fn(&g, |z| z).unwrap(), &euclid(1.0, 2.0)).unwrap();
        assert!(r.c_fit.abs() < 1e-3 && r.residual_rms < 1e-3);
        let r = fit_hopf_constant(&MappingField::from_fn(&g, nitsche).unwrap(), &euclid(1.0, 1.25)).unwrap();
        assert!((r.c_fit + 0.25).abs() < 1e-3 && r.residual_rms < 1e-3);
    }

    #[test]
    fn non_stationary_residual_does_not_vanish() {
        let m = euclid(1.0, 4.0);
        let rms = |n: usize| {
            let g = grid(1.0, 2.0, n + 1, 4 * n);
            fit_hopf_constant(&MappingField::from_fn(&g, |z| z * z.norm()).unwrap(), &m).unwrap().residual_rms
        };
        // z²·Hopf = 3s⁴/4 for F = z|z|
        let (r1, r2) = (rms(16), rms(64));
        assert!(r2 > 0.3 && r2 > 0.9 * r1, "{r1} {r2}");
    }

    #[test]
    fn fit_is_rotation_invariant() {
        let g = grid(1.0, 2.0, 33, 128);
        let m = euclid(1.0, 1.25);
        let rot = Complex64::from_polar(1.0, 0.3);
        let a = fit_hopf_constant(&MappingField::from_fn(&g, nitsche).unwrap(), &m).unwrap();
        let b = fit_hopf_constant(&MappingField::from_fn(&g, |z| nitsche(z * rot)).unwrap(), &m).unwrap();
        assert!((a.constant() - b.constant()).norm() < 1e-4);
    }

    #[test]
    fn harmonic_residual_examples() {
        let g = grid(1.0, 2.0, 33, 128);
        let r = harmonic_residual(&MappingField::from_fn(&g, |z| z).unwrap(), &euclid(1.0, 2.0)).unwrap();
        assert!(r.iter().cloned().fold(0.0, f64::max) < 2e-3);
        let r = harmonic_residual(&MappingField::from_fn(&g, nitsche).unwrap(), &euclid(1.0, 1.25)).unwrap();
        assert!(r.iter().cloned().fold(0.0, f64::max) < 2e-3);
        let r = harmonic_residual(&MappingField::from_fn(&g, |z| Complex64::new(z.norm_sqr(), 0.0)).unwrap(), &euclid(1.0, 4.0))
            .unwrap();
        for j in 1..g.n_s() - 1 {
            assert_relative_eq!(r[g.index(j, 3)], 1.0, max_relative = 1e-3);
        }
    }

    #[test]
    fn harmonic_residual_is_conformally_natural() {
        // the spherical-like metric pulled back by inversion, with the
        // correspondingly composed field, has the same small residual
        let base = Metric::new(MetricKind::SphericalLike, Annulus::new(0.2, 0.5).unwrap()).unwrap();
        let (_, prof) = solve_bvp(&base, 1.0, 2.0, 0.2, 0.5).unwrap();
        let g = grid(1.0, 2.0, 65, 256);
        let f = prof.to_field(&g).unwrap();
        let inv = crate::metric::ConformalMap::Inversion(0.1);
        let pulled = crate::metric::pullback(&base, &inv, Annulus::new(0.2, 0.5).unwrap()).unwrap();
        let composed = f.map_values(|w| inv.apply_inverse(w)).unwrap();
        let r0 = harmonic_residual(&f, &base).unwrap();
        let r1 = harmonic_residual(&composed, &pulled).unwrap();
        let max0 = r0.iter().cloned().fold(0.0, f64::max);
        let max1 = r1.iter().cloned().fold(0.0, f64::max);
        assert!(max0 < 5e-3 && max1 < 5e-3, "{max0} {max1}");
    }

    #[test]
    fn identity_is_stationary_under_inner_variations() {
        let g = grid(1.0, 2.0, 49, 192);
        let m = euclid(1.0, 2.0);
        let f = MappingField::from_fn(&g, |z| z).unwrap();
        let e = total_energy(&f, &m).unwrap();
        for flow in flow_catalog() {
            let d = inner_variation_derivative(&f, &m, &flow).unwrap();
            assert!(d.abs() <= 1e-3 * e, "{flow:?}: {d}");
        }
    }

    #[test]
    fn non_stationary_variation_sign() {
        let g = grid(1.0, 2.0, 49, 192);
        let m = euclid(0.5, 2.0);
        let f = MappingField::from_polar_fn(&g, |s, t| Complex64::from_polar(0.5 * s * s, t)).unwrap();
        let flow = Flow::radial(1.0, 1);
        let d = inner_variation_derivative(&f, &m, &flow).unwrap();
        let brute = total_energy(&flow.transport(&f, 1e-3).unwrap(), &m).unwrap()
            - total_energy(&flow.transport(&f, -1e-3).unwrap(), &m).unwrap();
        assert!(d.abs() > 1e-2 && d.signum() == brute.signum(), "{d} {brute}");
    }

    #[test]
    fn folding_flow_is_rejected() {
        let g = grid(1.0, 2.0, 9, 16);
        let f = MappingField::from_fn(&g, |z| z).unwrap();
        let err = inner_variation_derivative_with(&f, &euclid(1.0, 2.0), &Flow::radial(1e5, 1), 1e-4).unwrap_err();
        assert!(matches!(err, Error::Config { .. }));
    }
}
