//! Conformal metrics `℘(w)|dw|` on target annuli.
//!
//! Every kind evaluates its density, the Wirtinger derivative `∂_w log ℘` and
//! the Laplacian `Δ log ℘`. Closed-form kinds do so analytically; sampled radial
//! tables use a monotone cubic interpolant and centered finite differences for
//! the second derivative. Pullbacks and reflections compose these rules.

mod conformal;
mod sampled;

use std::f64::consts::PI;

use num_complex::Complex64;
use serde::Serialize;

pub use conformal::ConformalMap;
pub use sampled::SampledProfile;

use crate::error::{Error, Result};
use crate::grid::{Annulus, LogPolarGrid, CONSTRAINT_TOL};

#[derive(Clone, Debug, PartialEq)]
pub enum MetricKind {
    Euclidean,
    /// `℘(w) = |w|^exponent`
    RadialPower { exponent: f64 },
    /// `℘(w) = 1 / (1 + |w|²)²`
    SphericalLike,
    /// `℘(w) = 1 / (1 - |w|²)²`, singular on the unit circle
    HyperbolicLike,
    RadialSampled(SampledProfile),
    /// `℘₁(w) = ℘(b(w)) |b'(w)|`
    Pullback { base: Box<Metric>, map: ConformalMap },
    /// Three-branch reflection of a metric on `A(1, ρ)` to `A(1/ρ, ρ²)`.
    Reflected { base: Box<Metric>, rho: f64 },
}

/// Pointwise evaluation of a metric.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct MetricEval {
    pub density: f64,
    /// `∂_w log ℘`
    pub dlog_w: Complex64,
    /// `Δ log ℘`
    pub lap_log: f64,
}

impl MetricEval {
    /// Real gradient of `log ℘` packed as `∂_x + i ∂_y`.
    pub fn grad_log(&self) -> Complex64 {
        2.0 * self.dlog_w.conj()
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Metric {
    kind: MetricKind,
    domain: Annulus,
    covers_hole: bool,
}

impl Metric {
    pub fn new(kind: MetricKind, domain: Annulus) -> Result<Self> {
        const OP: &str = "metric::Metric::new";
        match &kind {
            MetricKind::RadialPower { exponent } if !exponent.is_finite() => {
                return Err(Error::config(OP, "exponent must be finite"));
            }
            MetricKind::HyperbolicLike if domain.outer() >= 1.0 => {
                return Err(Error::Singularity {
                    op: OP,
                    detail: format!("hyperbolic-like density is singular on |w|=1; domain reaches {}", domain.outer()),
                });
            }
            MetricKind::RadialSampled(p) => {
                let slack = 1e-12 * p.max_radius();
                if domain.inner() < p.min_radius() - slack || domain.outer() > p.max_radius() + slack {
                    return Err(Error::domain(OP, "sampled table does not cover the domain annulus"));
                }
            }
            _ => {}
        }
        Ok(Self { kind, domain, covers_hole: false })
    }

    pub fn euclidean(domain: Annulus) -> Self {
        Self { kind: MetricKind::Euclidean, domain, covers_hole: false }
    }

    /// `℘(w) = |w|^-2`, the flat cylinder metric.
    pub fn inverse_square(domain: Annulus) -> Self {
        Self { kind: MetricKind::RadialPower { exponent: -2.0 }, domain, covers_hole: false }
    }

    /// Marks the density as defined on the whole disk `|w| < outer`, so points in
    /// the hole pass the domain check. Only meaningful for kinds regular at 0.
    pub fn covering_hole(mut self) -> Self {
        self.covers_hole = matches!(
            self.kind,
            MetricKind::Euclidean | MetricKind::SphericalLike | MetricKind::HyperbolicLike
        );
        self
    }

    pub fn kind(&self) -> &MetricKind {
        &self.kind
    }

    pub fn domain(&self) -> &Annulus {
        &self.domain
    }

    pub fn is_radial(&self) -> bool {
        match &self.kind {
            MetricKind::Euclidean
            | MetricKind::RadialPower { .. }
            | MetricKind::SphericalLike
            | MetricKind::HyperbolicLike
            | MetricKind::RadialSampled(_) => true,
            MetricKind::Pullback { base, .. } => base.is_radial(),
            MetricKind::Reflected { base, .. } => base.is_radial(),
        }
    }

    pub fn describe(&self) -> String {
        match &self.kind {
            MetricKind::Euclidean => "euclidean".into(),
            MetricKind::RadialPower { exponent } => format!("radial-power({exponent})"),
            MetricKind::SphericalLike => "spherical-like".into(),
            MetricKind::HyperbolicLike => "hyperbolic-like".into(),
            MetricKind::RadialSampled(p) => format!("radial-sampled({} points)", p.radii().len()),
            MetricKind::Pullback { base, map } => format!("pullback({}, {map:?})", base.describe()),
            MetricKind::Reflected { base, rho } => format!("reflected({}, rho={rho})", base.describe()),
        }
    }

    fn check_domain(&self, op: &'static str, w: Complex64) -> Result<()> {
        let s = w.norm();
        let inside = s <= self.domain.outer() * (1.0 + CONSTRAINT_TOL)
            && (self.covers_hole || s >= self.domain.inner() * (1.0 - CONSTRAINT_TOL));
        if inside && s.is_finite() {
            Ok(())
        } else {
            Err(Error::domain(
                op,
                format!("point {w} (|w|={s}) outside [{}, {}]", self.domain.inner(), self.domain.outer()),
            ))
        }
    }

    /// `℘(w)`.
    pub fn density(&self, w: Complex64) -> Result<f64> {
        self.check_domain("metric::density", w)?;
        Ok(self.eval_relaxed(w)?.density)
    }

    /// Density, log-gradient and log-Laplacian at a point of the domain.
    pub fn eval(&self, w: Complex64) -> Result<MetricEval> {
        self.check_domain("metric::eval", w)?;
        self.eval_relaxed(w)
    }

    /// `𝒦(w) = -Δ log ℘(w) / ℘²(w)`.
    pub fn gauss_curvature(&self, w: Complex64) -> Result<f64> {
        self.check_domain("metric::gauss_curvature", w)?;
        let e = self.eval_relaxed(w)?;
        if !(e.density > 1e-150 && e.lap_log.is_finite()) {
            return Err(Error::Singularity { op: "metric::gauss_curvature", detail: format!("density vanishes near {w}") });
        }
        Ok(-e.lap_log / (e.density * e.density))
    }

    /// Radial pieces `(℘(s), (log ℘)'(s)/s, (log ℘)''(s))` for the basic radial
    /// kinds, without a domain check. Used by the radial ODE.
    pub fn radial_parts(&self, s: f64) -> Result<(f64, f64, f64)> {
        const OP: &str = "metric::radial_parts";
        match &self.kind {
            MetricKind::Euclidean => Ok((1.0, 0.0, 0.0)),
            MetricKind::RadialPower { exponent } => {
                let s2 = s * s;
                Ok((s.powf(*exponent), exponent / s2, -exponent / s2))
            }
            MetricKind::SphericalLike => {
                let q = 1.0 + s * s;
                Ok((1.0 / (q * q), -4.0 / q, -4.0 * (1.0 - s * s) / (q * q)))
            }
            MetricKind::HyperbolicLike => {
                let q = 1.0 - s * s;
                if q <= 1e-12 {
                    return Err(Error::Singularity { op: OP, detail: format!("hyperbolic-like density at |w|={s}") });
                }
                Ok((1.0 / (q * q), 4.0 / q, 4.0 * (1.0 + s * s) / (q * q)))
            }
            MetricKind::RadialSampled(p) => {
                let (f, df) = p.eval(s);
                let g1 = df / f;
                let log_at = |x: f64| p.eval(x).0.ln();
                let h = p.local_half_spacing(s);
                let (lo, hi) = (p.min_radius(), p.max_radius());
                let sc = s.clamp(lo, hi);
                let g2 = if sc - h >= lo && sc + h <= hi {
                    (log_at(sc + h) - 2.0 * log_at(sc) + log_at(sc - h)) / (h * h)
                } else if sc - h < lo {
                    (log_at(sc) - 2.0 * log_at(sc + h) + log_at(sc + 2.0 * h)) / (h * h)
                } else {
                    (log_at(sc) - 2.0 * log_at(sc - h) + log_at(sc - 2.0 * h)) / (h * h)
                };
                Ok((f, g1 / s, g2))
            }
            _ => Err(Error::regime(OP, format!("{} is not a basic radial metric", self.describe()))),
        }
    }

    /// Evaluation without the domain check. Sampled tables clamp to their range.
    pub fn eval_relaxed(&self, w: Complex64) -> Result<MetricEval> {
        match &self.kind {
            MetricKind::Pullback { base, map } => {
                let bw = map.apply(w);
                let d = map.derivative(w);
                let e = base.eval_relaxed(bw)?;
                Ok(MetricEval {
                    density: e.density * d.norm(),
                    dlog_w: e.dlog_w * d + 0.5 * map.log_derivative_slope(w),
                    lap_log: d.norm_sqr() * e.lap_log,
                })
            }
            MetricKind::Reflected { base, rho } => {
                let s = w.norm();
                if s < 1.0 {
                    let e = base.eval_relaxed(1.0 / w.conj())?;
                    Ok(MetricEval {
                        density: e.density,
                        dlog_w: e.dlog_w.conj() * (-1.0 / (w * w)),
                        lap_log: e.lap_log / (s * s * s * s),
                    })
                } else if s > *rho {
                    let r2 = rho * rho;
                    let e = base.eval_relaxed(r2 / w.conj())?;
                    Ok(MetricEval {
                        density: e.density,
                        dlog_w: e.dlog_w.conj() * (-r2 / (w * w)),
                        lap_log: e.lap_log * r2 * r2 / (s * s * s * s),
                    })
                } else {
                    base.eval_relaxed(w)
                }
            }
            _ => {
                let s = w.norm();
                let (f, g1_over_s, g2) = self.radial_parts(s)?;
                Ok(MetricEval { density: f, dlog_w: 0.5 * g1_over_s * w.conj(), lap_log: g2 + g1_over_s })
            }
        }
    }
}

/// Admissibility diagnostics: `C_℘ ≈ max |∇℘|/℘` over the grid, the observed
/// density range, and the reference bounds `℘(w₀) e^{∓C L}` where `L` bounds the
/// length of a path inside the annulus from `w₀` to any node.
#[derive(Clone, Debug, Serialize)]
pub struct AdmissibilityReport {
    pub c_estimate: f64,
    pub min_density: f64,
    pub max_density: f64,
    pub base_point: [f64; 2],
    pub base_density: f64,
    pub path_bound: f64,
    pub reference_lower: f64,
    pub reference_upper: f64,
    /// Every node satisfies the pointwise path bound.
    pub double_inequality_holds: bool,
}

impl AdmissibilityReport {
    pub fn double_bounds(&self) -> (f64, f64) {
        (self.min_density, self.max_density)
    }
}

/// Length of a radial-then-circular path from `w0` to `z`.
fn path_length(w0: Complex64, z: Complex64) -> f64 {
    let (s0, s) = (w0.norm(), z.norm());
    if s0 == 0.0 {
        return s;
    }
    let mut dt = (z.arg() - w0.arg()).abs() % (2.0 * PI);
    if dt > PI {
        dt = 2.0 * PI - dt;
    }
    (s - s0).abs() + s * dt
}

/// Estimates `C_℘` and checks the double inequality on `grid`. The base point
/// defaults to the midpoint radius of the grid's annulus on the positive axis.
pub fn admissibility(metric: &Metric, grid: &LogPolarGrid, base: Option<Complex64>) -> Result<AdmissibilityReport> {
    let w0 = base.unwrap_or_else(|| Complex64::new(grid.annulus().midpoint_radius(), 0.0));
    let base_density = metric.density(w0)?;
    let pts = grid.points();
    let mut evals = Vec::with_capacity(pts.len());
    for &z in &pts {
        evals.push(metric.eval(z)?);
    }
    let c = evals.iter().map(|e| e.grad_log().norm()).fold(0.0, f64::max);
    let min_d = evals.iter().map(|e| e.density).fold(f64::INFINITY, f64::min);
    let max_d = evals.iter().map(|e| e.density).fold(0.0, f64::max);
    let mut path_bound: f64 = 0.0;
    let mut holds = true;
    for (z, e) in pts.iter().zip(&evals) {
        let len = path_length(w0, *z);
        path_bound = path_bound.max(len);
        let slack = 1e-9 * base_density;
        holds &= e.density >= base_density * (-c * len).exp() - slack
            && e.density <= base_density * (c * len).exp() + slack;
    }
    Ok(AdmissibilityReport {
        c_estimate: c,
        min_density: min_d,
        max_density: max_d,
        base_point: [w0.re, w0.im],
        base_density,
        path_bound,
        reference_lower: base_density * (-c * path_bound).exp(),
        reference_upper: base_density * (c * path_bound).exp(),
        double_inequality_holds: holds,
    })
}

/// `∫ ℘²(w) du dv` over the grid's annulus, midpoint rule on log-polar cells
/// with the `e^{2u}` area factor.
pub fn metric_area(metric: &Metric, grid: &LogPolarGrid) -> Result<f64> {
    let (du, dv) = (grid.du(), grid.dv());
    let mut total = 0.0;
    for j in 0..grid.n_s() - 1 {
        let uc = grid.u(j) + 0.5 * du;
        let r = uc.exp();
        let mut row = 0.0;
        for k in 0..grid.n_t() {
            let w = Complex64::from_polar(r, grid.v(k) + 0.5 * dv);
            let d = metric.eval_relaxed(w)?.density;
            row += d * d;
        }
        total += row * r * r;
    }
    Ok(total * du * dv)
}

/// The pullback `℘₁(w) = ℘(b(w))|b'(w)|` on `domain`, which `b` must map onto
/// the metric's domain.
pub fn pullback(metric: &Metric, map: &ConformalMap, domain: Annulus) -> Result<Metric> {
    const OP: &str = "metric::pullback";
    map.validate()?;
    let image = map.image_annulus(&domain)?;
    let target = metric.domain();
    let close = |a: f64, b: f64| (a - b).abs() <= 1e-10 * b.abs().max(1.0);
    if !(close(image.inner(), target.inner()) && close(image.outer(), target.outer())) {
        return Err(Error::domain(
            OP,
            format!(
                "map sends A({}, {}) to A({}, {}), metric lives on A({}, {})",
                domain.inner(),
                domain.outer(),
                image.inner(),
                image.outer(),
                target.inner(),
                target.outer()
            ),
        ));
    }
    Ok(Metric {
        kind: MetricKind::Pullback { base: Box::new(metric.clone()), map: map.clone() },
        domain,
        covers_hole: false,
    })
}

/// Reflected density on `A(1/ρ, ρ²)`: `℘(w)` on `1 ≤ |w| ≤ ρ`, `℘(ρ²/w̄)` beyond
/// `ρ` and `℘(1/w̄)` inside the unit circle.
pub fn extend_metric(metric: &Metric, rho: f64) -> Result<Metric> {
    const OP: &str = "reflection::extend_metric";
    let d = metric.domain();
    if (d.inner() - 1.0).abs() > 1e-12 || (d.outer() - rho).abs() > 1e-12 * rho {
        return Err(Error::precondition(OP, format!("metric must live on A(1, {rho}), found A({}, {})", d.inner(), d.outer())));
    }
    Ok(Metric {
        kind: MetricKind::Reflected { base: Box::new(metric.clone()), rho },
        domain: Annulus::new(1.0 / rho, rho * rho)?,
        covers_hole: false,
    })
}
