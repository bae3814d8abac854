//! Discrete `℘`-Dirichlet energy.
//!
//! On the log-polar rectangle the energy is `∫ ℘²(F)(|F_u|² + |F_v|²) du dv`,
//! which equals `∫ 2℘²(F)(|F_z|² + |F_z̄|²) dx dy` on the annulus. Each grid cell
//! contributes `℘²(F_c) Q ΔuΔv`, with `F_c` the corner average and `Q` built from
//! squared edge differences (averaged onto the cell centre). The Jacobian part
//! uses the cell-centre derivatives, `J = Im(conj(F_u) F_v)`, which integrates
//! to the exact area of the image quadrilateral, and the antiholomorphic part is
//! `℘²(Q - 2J)`, so `total = jacobian_part + antiholomorphic_part` per cell.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{self, LogPolarGrid, MappingField, Orientation, CONSTRAINT_TOL};
use crate::metric::{metric_area, Metric};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct EnergyBreakdown {
    pub total: f64,
    /// `2∫℘²(F) J_F`
    pub jacobian_part: f64,
    /// `4∫℘²(F)|F_z̄|²`
    pub antiholomorphic_part: f64,
    /// `2𝒜(℘)`
    pub lower_bound: f64,
}

/// Grid used to integrate the metric area of a target annulus.
pub(crate) fn area_grid(metric: &Metric, like: &LogPolarGrid) -> Result<LogPolarGrid> {
    LogPolarGrid::new(*metric.domain(), (2 * like.n_s() - 1).max(129), like.n_t().max(256))
}

/// `𝒜(℘)` of the metric's domain annulus.
pub fn target_area(metric: &Metric, like: &LogPolarGrid) -> Result<f64> {
    metric_area(metric, &area_grid(metric, like)?)
}

pub(crate) fn check_range(op: &'static str, field: &MappingField, metric: &Metric) -> Result<()> {
    let dom = metric.domain();
    if let Some((i, w)) = field
        .values()
        .iter()
        .enumerate()
        .find(|(_, w)| !dom.contains_closed(**w, CONSTRAINT_TOL))
    {
        return Err(Error::Range {
            op,
            detail: format!("node {i} maps to |w|={} outside [{}, {}]", w.norm(), dom.inner(), dom.outer()),
        });
    }
    Ok(())
}

struct Cell {
    idx: [usize; 4],
    /// u-edge differences `F10-F00`, `F11-F01`
    a: Complex64,
    b: Complex64,
    /// v-edge differences `F01-F00`, `F11-F10`
    c: Complex64,
    d: Complex64,
    center: Complex64,
}

fn cells(field: &MappingField) -> impl Iterator<Item = Cell> + '_ {
    let g = field.grid();
    let (n_s, n_t) = (g.n_s(), g.n_t());
    let v = field.values();
    (0..n_s - 1).flat_map(move |j| {
        (0..n_t).map(move |k| {
            let k1 = (k + 1) % n_t;
            let idx = [g.index(j, k), g.index(j + 1, k), g.index(j, k1), g.index(j + 1, k1)];
            let [f00, f10, f01, f11] = idx.map(|i| v[i]);
            Cell { idx, a: f10 - f00, b: f11 - f01, c: f01 - f00, d: f11 - f10, center: 0.25 * (f00 + f10 + f01 + f11) }
        })
    })
}

/// `(total, jacobian_part, antiholomorphic_part)` without range checks or the
/// area bound. Summation runs in fixed cell order.
pub fn energy_parts(field: &MappingField, metric: &Metric) -> Result<(f64, f64, f64)> {
    let g = field.grid();
    let (du, dv) = (g.du(), g.dv());
    let (iu2, iv2) = (0.5 / (du * du), 0.5 / (dv * dv));
    let mut total = 0.0;
    let mut jac = 0.0;
    let mut anti = 0.0;
    for cell in cells(field) {
        let q = (cell.a.norm_sqr() + cell.b.norm_sqr()) * iu2 + (cell.c.norm_sqr() + cell.d.norm_sqr()) * iv2;
        let fu = (cell.a + cell.b) / (2.0 * du);
        let fv = (cell.c + cell.d) / (2.0 * dv);
        let j = (fu.conj() * fv).im;
        let p = metric.eval_relaxed(cell.center)?.density;
        let p2 = p * p;
        total += p2 * q;
        jac += 2.0 * p2 * j;
        anti += p2 * (q - 2.0 * j);
    }
    let w = du * dv;
    Ok((total * w, jac * w, anti * w))
}

/// Total discrete energy only.
pub fn total_energy(field: &MappingField, metric: &Metric) -> Result<f64> {
    let g = field.grid();
    let (du, dv) = (g.du(), g.dv());
    let (iu2, iv2) = (0.5 / (du * du), 0.5 / (dv * dv));
    let mut total = 0.0;
    for cell in cells(field) {
        let q = (cell.a.norm_sqr() + cell.b.norm_sqr()) * iu2 + (cell.c.norm_sqr() + cell.d.norm_sqr()) * iv2;
        let p = metric.eval_relaxed(cell.center)?.density;
        total += p * p * q;
    }
    Ok(total * du * dv)
}

/// Total energy and its exact gradient with respect to the node values, packed
/// as `∂E/∂Re F + i ∂E/∂Im F`.
pub fn energy_and_gradient(field: &MappingField, metric: &Metric) -> Result<(f64, Vec<Complex64>)> {
    let g = field.grid();
    let (du, dv) = (g.du(), g.dv());
    let (iu2, iv2) = (1.0 / (du * du), 1.0 / (dv * dv));
    let w = du * dv;
    let mut grad = vec![Complex64::new(0.0, 0.0); g.len()];
    let mut total = 0.0;
    for cell in cells(field) {
        let q = 0.5 * ((cell.a.norm_sqr() + cell.b.norm_sqr()) * iu2 + (cell.c.norm_sqr() + cell.d.norm_sqr()) * iv2);
        let e = metric.eval_relaxed(cell.center)?;
        let p2 = e.density * e.density;
        total += p2 * q;
        // ∇℘² = 2℘²∇log℘, shared equally by the four corners
        let metric_term = 0.25 * q * 2.0 * p2 * e.grad_log();
        let dq = [
            -cell.a * iu2 - cell.c * iv2,
            cell.a * iu2 - cell.d * iv2,
            -cell.b * iu2 + cell.c * iv2,
            cell.b * iu2 + cell.d * iv2,
        ];
        for (n, &i) in cell.idx.iter().enumerate() {
            grad[i] += (p2 * dq[n] + metric_term) * w;
        }
    }
    Ok((total * w, grad))
}

/// Energy of `field` with its decomposition and the universal lower bound `2𝒜(℘)`.
pub fn energy(field: &MappingField, metric: &Metric) -> Result<EnergyBreakdown> {
    check_range("energy::energy", field, metric)?;
    let (total, jacobian_part, antiholomorphic_part) = energy_parts(field, metric)?;
    let lower_bound = 2.0 * target_area(metric, field.grid())?;
    Ok(EnergyBreakdown { total, jacobian_part, antiholomorphic_part, lower_bound })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DeformationReport {
    pub min_jacobian: f64,
    pub max_jacobian: f64,
    /// Share of nodes with `J < -ε`.
    pub negative_fraction: f64,
    pub epsilon: f64,
    /// `∫℘²(F) J_F`
    pub pulled_back_area: f64,
    /// `𝒜(℘)`
    pub target_area: f64,
    /// `∫℘²(F) J_F ≤ 𝒜(℘)` up to 0.5% relative.
    pub area_condition_holds: bool,
    pub detected_orientation: Orientation,
    pub sense_reversing_flag: bool,
}

/// Jacobian sign and image-area diagnostics for the deformation class.
pub fn deformation_diagnostics(field: &MappingField, metric: &Metric) -> Result<DeformationReport> {
    let w = grid::wirtinger(field)?;
    let jac: Vec<f64> = w.fz.iter().zip(&w.fzbar).map(|(a, b)| a.norm_sqr() - b.norm_sqr()).collect();
    let scale = w.fz.iter().zip(&w.fzbar).map(|(a, b)| a.norm_sqr() + b.norm_sqr()).sum::<f64>() / jac.len() as f64;
    let epsilon = 1e-6 * scale.max(f64::MIN_POSITIVE);
    let min_jacobian = jac.iter().copied().fold(f64::INFINITY, f64::min);
    let max_jacobian = jac.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let negative = jac.iter().filter(|&&x| x < -epsilon).count();
    let positive = jac.iter().filter(|&&x| x > epsilon).count();
    let (_, jac_part, _) = energy_parts(field, metric)?;
    let pulled_back_area = 0.5 * jac_part;
    let area = target_area(metric, field.grid())?;
    let detected_orientation =
        if negative > positive { Orientation::SenseReversing } else { Orientation::SensePreserving };
    Ok(DeformationReport {
        min_jacobian,
        max_jacobian,
        negative_fraction: negative as f64 / jac.len() as f64,
        epsilon,
        pulled_back_area,
        target_area: area,
        area_condition_holds: pulled_back_area <= area * 1.005,
        detected_orientation,
        sense_reversing_flag: detected_orientation == Orientation::SenseReversing,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::Annulus;
    use crate::metric::MetricKind;
    use approx::assert_relative_eq;
    use rand::{Rng, SeedableRng};
    use std::f64::consts::PI;

    fn grid(a: f64, b: f64, n_s: usize, n_t: usize) -> LogPolarGrid {
        LogPolarGrid::new(Annulus::new(a, b).unwrap(), n_s, n_t).unwrap()
    }

    fn nitsche(z: Complex64) -> Complex64 {
        0.5 * (z + 1.0 / z.conj())
    }

    #[test]
    fn identity_energy_is_twice_area() {
        let g = grid(1.0, 2.0, 48, 192);
        let m = Metric::euclidean(*g.annulus());
        let e = energy(&MappingField::from_fn(&g, |z| z).unwrap(), &m).unwrap();
        assert_relative_eq!(e.total, 6.0 * PI, max_relative = 0.01);
        assert_relative_eq!(e.jacobian_part, 6.0 * PI, max_relative = 0.01);
        assert!(e.antiholomorphic_part.abs() < 0.01 * e.total);
        assert_relative_eq!(e.total, e.jacobian_part + e.antiholomorphic_part, max_relative = 1e-14);
        assert_relative_eq!(e.lower_bound, 6.0 * PI, max_relative = 1e-4);
    }

    #[test]
    fn nitsche_energy_closed_form() {
        // 2π(λ²(R²-1) + μ²(1-R⁻²)) with λ = μ = 1/2, R = 2
        let expected = 2.0 * PI * (0.25 * 3.0 + 0.25 * 0.75);
        assert_relative_eq!(expected, 15.0 * PI / 8.0, epsilon = 1e-14);
        let g = grid(1.0, 2.0, 48, 192);
        let m = Metric::euclidean(Annulus::new(1.0, 1.25).unwrap());
        let e = energy(&MappingField::from_fn(&g, nitsche).unwrap(), &m).unwrap();
        assert_relative_eq!(e.total, expected, max_relative = 0.01);
        assert!(e.total >= e.lower_bound * 0.995);
    }

    #[test]
    fn range_error_outside_target() {
        let g = grid(1.0, 2.0, 8, 16);
        let m = Metric::euclidean(Annulus::new(1.0, 1.5).unwrap());
        let err = energy(&MappingField::from_fn(&g, |z| z).unwrap(), &m).unwrap_err();
        assert!(matches!(err, Error::Range { .. }));
    }

    #[test]
    fn energy_converges_second_order() {
        let m = Metric::euclidean(Annulus::new(1.0, 1.25).unwrap());
        let exact = 15.0 * PI / 8.0;
        let err = |n: usize| {
            let g = grid(1.0, 2.0, n + 1, 4 * n);
            (total_energy(&MappingField::from_fn(&g, nitsche).unwrap(), &m).unwrap() - exact).abs()
        };
        let (e1, e2, e3) = (err(16), err(32), err(64));
        assert!((e1 / e2).log2() > 1.8 && (e2 / e3).log2() > 1.8, "{e1} {e2} {e3}");
    }

    #[test]
    fn gradient_matches_central_differences() {
        let g = grid(1.0, 2.0, 9, 16);
        let m = Metric::new(MetricKind::SphericalLike, Annulus::new(0.5, 3.0).unwrap()).unwrap();
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(7);
        let base = MappingField::from_fn(&g, |z| z * (1.0 + 0.1 * z.re)).unwrap();
        let (_, grad) = energy_and_gradient(&base, &m).unwrap();
        let h = 1e-5;
        for _ in 0..10 {
            let dir: Vec<Complex64> =
                (0..g.len()).map(|_| Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0))).collect();
            let shifted = |t: f64| {
                let vals = base.values().iter().zip(&dir).map(|(f, d)| f + t * d).collect();
                total_energy(&MappingField::new(g.clone(), vals).unwrap(), &m).unwrap()
            };
            let fd = (shifted(h) - shifted(-h)) / (2.0 * h);
            let an: f64 = grad.iter().zip(&dir).map(|(g, d)| (g.conj() * d).re).sum();
            assert_relative_eq!(fd, an, max_relative = 1e-6);
        }
    }

    #[test]
    fn deformation_examples() {
        let g = grid(1.0, 2.0, 33, 128);
        let m = Metric::euclidean(*g.annulus());
        let r = deformation_diagnostics(&MappingField::from_fn(&g, |z| z).unwrap(), &m).unwrap();
        assert_relative_eq!(r.min_jacobian, 1.0, epsilon = 5e-3);
        assert_relative_eq!(r.pulled_back_area, 3.0 * PI, max_relative = 1e-3);
        assert!(r.area_condition_holds && !r.sense_reversing_flag);

        let r = deformation_diagnostics(&MappingField::from_fn(&g, |z| z.conj()).unwrap(), &m).unwrap();
        assert_relative_eq!(r.min_jacobian, -1.0, epsilon = 5e-3);
        assert!(r.sense_reversing_flag && r.negative_fraction > 0.99);
    }

    #[test]
    fn lower_bound_holds_for_sense_preserving_fields() {
        let g = grid(1.0, 2.0, 33, 128);
        let m = Metric::inverse_square(*g.annulus());
        for eps in [0.0, 0.05, 0.1, 0.2] {
            // radial reparametrizations of the identity keep the boundary circles
            let f = MappingField::from_polar_fn(&g, |s, t| {
                let x = (s - 1.0) * (1.0 + eps * (PI * (s - 1.0)).sin());
                Complex64::from_polar(1.0 + x, t + eps * (s - 1.0) * (2.0 - s))
            })
            .unwrap();
            let e = energy(&f, &m).unwrap();
            assert!(e.total >= e.lower_bound * 0.995, "{eps}: {} < {}", e.total, e.lower_bound);
        }
    }
}
