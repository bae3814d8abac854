//! Radial stationary maps `F(z) = p(|z|) e^{±i arg z}`.
//!
//! Stationarity of a radial map reduces to the first integral
//! `℘²(p)(p_u² - p²) = 4c` with `u = log s`. Profiles are integrated in the
//! equivalent second-order form `p_uu = p + (℘'/℘)(p)(p² - p_u²)`, which stays
//! regular where `p_u` vanishes. Both forms agree along exact trajectories.

use std::io::Write as _;
use std::path::Path;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{Annulus, LogPolarGrid, MappingField};
use crate::metric::Metric;

pub const DEFAULT_STEPS: usize = 2000;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Monotonicity {
    Increasing,
    Decreasing,
}

impl Monotonicity {
    pub fn sign(self) -> f64 {
        match self {
            Monotonicity::Increasing => 1.0,
            Monotonicity::Decreasing => -1.0,
        }
    }

    /// Direction needed to go from `p_a` to `p_b`; ties count as increasing.
    pub fn between(p_a: f64, p_b: f64) -> Self {
        if p_b >= p_a {
            Monotonicity::Increasing
        } else {
            Monotonicity::Decreasing
        }
    }
}

/// Radial profile on a log-uniform mesh. When `junction` is set, `p ≡ p(a)` on
/// `[a, junction]` (the hammered ring) and the mesh is uniform in `log s` on each
/// side of the junction separately.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RadialProfile {
    pub radii: Vec<f64>,
    pub values: Vec<f64>,
    /// `p'(s)`
    pub slopes: Vec<f64>,
    pub constant: f64,
    pub direction: Monotonicity,
    pub junction: Option<f64>,
}

impl RadialProfile {
    pub fn inner_radius(&self) -> f64 {
        self.radii[0]
    }

    pub fn outer_radius(&self) -> f64 {
        *self.radii.last().unwrap()
    }

    pub fn is_hammered(&self) -> bool {
        self.junction.is_some()
    }

    /// `(p(s), p'(s))` by cubic Hermite interpolation; `s` is clamped to the mesh.
    pub fn eval(&self, s: f64) -> (f64, f64) {
        let s = s.clamp(self.inner_radius(), self.outer_radius());
        let i = match self.radii.partition_point(|&r| r <= s) {
            0 => 0,
            i if i >= self.radii.len() => self.radii.len() - 2,
            i => i - 1,
        };
        let (s0, s1) = (self.radii[i], self.radii[i + 1]);
        let h = s1 - s0;
        let t = (s - s0) / h;
        let (y0, y1) = (self.values[i], self.values[i + 1]);
        let (d0, d1) = (self.slopes[i] * h, self.slopes[i + 1] * h);
        let t2 = t * t;
        let t3 = t2 * t;
        let value = (2.0 * t3 - 3.0 * t2 + 1.0) * y0 + (t3 - 2.0 * t2 + t) * d0 + (-2.0 * t3 + 3.0 * t2) * y1 + (t3 - t2) * d1;
        let deriv = ((6.0 * t2 - 6.0 * t) * y0
            + (3.0 * t2 - 4.0 * t + 1.0) * d0
            + (-6.0 * t2 + 6.0 * t) * y1
            + (3.0 * t2 - 2.0 * t) * d1)
            / h;
        (value, deriv)
    }

    /// Largest relative deviation of `s²℘²(p)(p'² - p²/s²)` from `4c` over the
    /// mesh, skipping the hammered ring.
    pub fn first_integral_residual(&self, metric: &Metric) -> Result<f64> {
        let target = 4.0 * self.constant;
        let mut worst: f64 = 0.0;
        for ((&s, &p), &dp) in self.radii.iter().zip(&self.values).zip(&self.slopes) {
            if self.junction.is_some_and(|r| s < r) {
                continue;
            }
            let (rho, _) = density_and_log_slope(metric, p)?;
            let pu = s * dp;
            let value = rho * rho * (pu * pu - p * p);
            let scale = (rho * rho * (pu * pu + p * p)).max(target.abs());
            worst = worst.max((value - target).abs() / scale);
        }
        Ok(worst)
    }

    /// Sense-preserving field `p(|z|) e^{±i arg z}`, with `+` for increasing
    /// profiles and `-` for decreasing ones.
    pub fn to_field(&self, grid: &LogPolarGrid) -> Result<MappingField> {
        let sigma = self.direction.sign();
        MappingField::from_polar_fn(grid, |s, t| Complex64::from_polar(self.eval(s).0, sigma * t))
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("s,p,dp\n");
        for ((s, p), dp) in self.radii.iter().zip(&self.values).zip(&self.slopes) {
            out.push_str(&format!("{s},{p},{dp}\n"));
        }
        out
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        const OP: &str = "radial::RadialProfile::write_csv";
        let mut f = std::fs::File::create(path).map_err(|source| Error::Io { op: OP, source })?;
        f.write_all(self.to_csv().as_bytes()).map_err(|source| Error::Io { op: OP, source })
    }
}

/// `℘(y)` and `℘'(y)/℘(y)` on the positive real axis.
fn density_and_log_slope(metric: &Metric, y: f64) -> Result<(f64, f64)> {
    let e = metric.eval_relaxed(Complex64::new(y, 0.0))?;
    Ok((e.density, 2.0 * e.dlog_w.re))
}

fn require_radial(op: &'static str, metric: &Metric) -> Result<()> {
    if metric.is_radial() {
        Ok(())
    } else {
        Err(Error::regime(op, format!("{} is not radial", metric.describe())))
    }
}

enum Shot {
    Reached(RadialProfile),
    /// `p_u` changed sign against the requested direction.
    Turned(f64),
    /// `p` reached zero or the metric could not be evaluated.
    Escaped(f64),
}

fn initial_slope(metric: &Metric, p: f64, c: f64, sigma: f64) -> Result<Option<f64>> {
    let (rho, _) = density_and_log_slope(metric, p)?;
    let radicand = p * p * rho * rho + 4.0 * c;
    if radicand < 0.0 {
        return Ok(None);
    }
    Ok(Some(sigma * radicand.sqrt() / rho))
}

fn shoot(metric: &Metric, a: f64, b: f64, p_start: f64, c: f64, dir: Monotonicity, steps: usize) -> Result<Shot> {
    let sigma = dir.sign();
    let Some(q0) = initial_slope(metric, p_start, c, sigma)? else {
        return Ok(Shot::Turned(a));
    };
    let (u0, u1) = (a.ln(), b.ln());
    let h = (u1 - u0) / steps as f64;
    let rhs = |p: f64, q: f64| -> Option<(f64, f64)> {
        if !(p > 0.0) {
            return None;
        }
        let (_, l) = density_and_log_slope(metric, p).ok()?;
        let acc = p + l * (p * p - q * q);
        acc.is_finite().then_some((q, acc))
    };
    let mut radii = Vec::with_capacity(steps + 1);
    let mut values = Vec::with_capacity(steps + 1);
    let mut slopes = Vec::with_capacity(steps + 1);
    let (mut p, mut q) = (p_start, q0);
    radii.push(a);
    values.push(p);
    slopes.push(q / a);
    for i in 1..=steps {
        let s_prev = (u0 + (i - 1) as f64 * h).exp();
        let Some((k1p, k1q)) = rhs(p, q) else { return Ok(Shot::Escaped(s_prev)) };
        let Some((k2p, k2q)) = rhs(p + 0.5 * h * k1p, q + 0.5 * h * k1q) else { return Ok(Shot::Escaped(s_prev)) };
        let Some((k3p, k3q)) = rhs(p + 0.5 * h * k2p, q + 0.5 * h * k2q) else { return Ok(Shot::Escaped(s_prev)) };
        let Some((k4p, k4q)) = rhs(p + h * k3p, q + h * k3q) else { return Ok(Shot::Escaped(s_prev)) };
        p += h / 6.0 * (k1p + 2.0 * k2p + 2.0 * k3p + k4p);
        q += h / 6.0 * (k1q + 2.0 * k2q + 2.0 * k3q + k4q);
        let s = if i == steps { b } else { (u0 + i as f64 * h).exp() };
        if !(p > 0.0) || !p.is_finite() {
            return Ok(Shot::Escaped(s));
        }
        if sigma * q < 0.0 {
            return Ok(Shot::Turned(s));
        }
        radii.push(s);
        values.push(p);
        slopes.push(q / s);
    }
    Ok(Shot::Reached(RadialProfile { radii, values, slopes, constant: c, direction: dir, junction: None }))
}

/// Integrates the stationary radial profile with `p(a) = p_start` and first
/// integral `4c`, with `steps` RK4 steps in `log s`.
pub fn shoot_profile_with(
    metric: &Metric,
    a: f64,
    b: f64,
    p_start: f64,
    c: f64,
    direction: Monotonicity,
    steps: usize,
) -> Result<RadialProfile> {
    const OP: &str = "radial::shoot_profile";
    require_radial(OP, metric)?;
    if !(a > 0.0 && b > a && p_start > 0.0 && c.is_finite() && steps >= 2) {
        return Err(Error::config(OP, format!("need 0 < a < b, p_start > 0, finite c, steps ≥ 2 (a={a}, b={b})")));
    }
    match shoot(metric, a, b, p_start, c, direction, steps)? {
        Shot::Reached(p) => Ok(p),
        Shot::Turned(radius) => Err(Error::TurningPoint { op: OP, radius }),
        Shot::Escaped(radius) => Err(Error::domain(OP, format!("profile left the metric's range near s={radius}"))),
    }
}

pub fn shoot_profile(metric: &Metric, a: f64, b: f64, p_start: f64, c: f64, direction: Monotonicity) -> Result<RadialProfile> {
    shoot_profile_with(metric, a, b, p_start, c, direction, DEFAULT_STEPS)
}

/// Stationary radial map of `A(a, b)` with `p(a) = p_a`, `p(b) = p_b`, found by
/// bisection on `c`. Returns `(c, profile)`.
pub fn solve_bvp(metric: &Metric, a: f64, b: f64, p_a: f64, p_b: f64) -> Result<(f64, RadialProfile)> {
    const OP: &str = "radial::solve_bvp";
    require_radial(OP, metric)?;
    if !(a > 0.0 && b > a) {
        return Err(Error::config(OP, format!("need 0 < a < b, got a={a}, b={b}")));
    }
    for p in [p_a, p_b] {
        if !metric.domain().contains_closed(Complex64::new(p, 0.0), 1e-12) {
            return Err(Error::config(OP, format!("boundary radius {p} outside the metric domain")));
        }
    }
    let dir = Monotonicity::between(p_a, p_b);
    let sigma = dir.sign();
    let tol = 1e-8 * p_b;
    // g(c) = σ(p(b; c) - p_b) is increasing in c; turning points undershoot.
    let evaluate = |c: f64| -> Result<(f64, Option<RadialProfile>)> {
        Ok(match shoot(metric, a, b, p_a, c, dir, DEFAULT_STEPS)? {
            Shot::Reached(p) => (sigma * (p.values.last().unwrap() - p_b), Some(p)),
            Shot::Turned(_) => (f64::NEG_INFINITY, None),
            Shot::Escaped(_) => (f64::INFINITY, None),
        })
    };
    let (rho_a, _) = density_and_log_slope(metric, p_a)?;
    let c_min = -0.25 * p_a * p_a * rho_a * rho_a;
    let (g_min, prof_min) = evaluate(c_min)?;
    if g_min > tol {
        let reached = prof_min.map(|p| *p.values.last().unwrap());
        return Err(Error::InfeasibleBvp {
            op: OP,
            detail: format!("even the critical constant c={c_min} overshoots (p(b)={reached:?}, target {p_b}); hammering regime"),
        });
    }
    if let (true, Some(p)) = (g_min.abs() <= tol, prof_min) {
        return Ok((c_min, p));
    }
    let mut lo = c_min;
    let mut hi = 0.0;
    let mut step = 0.25 * c_min.abs().max(1e-3);
    let mut best = None;
    loop {
        let (g, prof) = evaluate(hi)?;
        if g.abs() <= tol {
            if let Some(p) = prof {
                return Ok((hi, p));
            }
        }
        if g > 0.0 {
            break;
        }
        lo = lo.max(hi);
        hi += step;
        step *= 2.0;
        if hi > 1e12 {
            return Err(Error::InfeasibleBvp { op: OP, detail: "no bracket found for the first-integral constant".into() });
        }
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        let (g, prof) = evaluate(mid)?;
        if g.abs() <= tol {
            if let Some(p) = prof {
                return Ok((mid, p));
            }
        }
        if g > 0.0 {
            hi = mid;
        } else {
            lo = mid;
        }
        if let Some(p) = prof {
            best = Some((mid, p));
        }
        if hi - lo <= f64::EPSILON * lo.abs().max(hi.abs()) {
            break;
        }
    }
    Err(Error::InfeasibleBvp {
        op: OP,
        detail: format!(
            "no monotone stationary profile: the constant is pinned at a turning threshold c={} without meeting |p(b) - p_b| ≤ {tol}",
            best.map(|b| b.0).unwrap_or(0.5 * (lo + hi))
        ),
    })
}

const GAUSS5: [(f64, f64); 5] = [
    (0.0, 0.568_888_888_888_888_9),
    (-0.538_469_310_105_683_1, 0.478_628_670_499_366_5),
    (0.538_469_310_105_683_1, 0.478_628_670_499_366_5),
    (-0.906_179_845_938_664, 0.236_926_885_056_189_1),
    (0.906_179_845_938_664, 0.236_926_885_056_189_1),
];

fn gauss_panel(f: &dyn Fn(f64) -> Result<f64>, lo: f64, hi: f64) -> Result<f64> {
    let (mid, half) = (0.5 * (lo + hi), 0.5 * (hi - lo));
    let mut sum = 0.0;
    for (x, w) in GAUSS5 {
        sum += w * f(mid + half * x)?;
    }
    Ok(sum * half)
}

fn adaptive_gauss(f: &dyn Fn(f64) -> Result<f64>, lo: f64, hi: f64, whole: f64, tol: f64, depth: u32) -> Result<f64> {
    let mid = 0.5 * (lo + hi);
    let left = gauss_panel(f, lo, mid)?;
    let right = gauss_panel(f, mid, hi)?;
    if depth == 0 || (left + right - whole).abs() <= tol {
        return Ok(left + right);
    }
    Ok(adaptive_gauss(f, lo, mid, left, 0.5 * tol, depth - 1)? + adaptive_gauss(f, mid, hi, right, 0.5 * tol, depth - 1)?)
}

/// `∫_{c}^{R} ℘(y) / sqrt(y²℘²(y) - R²℘²(R)) dy` with `c` the inner radius of
/// the metric's domain, after the substitution `y = R - τ²`.
fn critical_log_span(metric: &Metric, outer: f64) -> Result<f64> {
    const OP: &str = "radial::critical_inner_radius";
    require_radial(OP, metric)?;
    let inner = metric.domain().inner();
    if !(outer > inner) {
        return Err(Error::config(OP, format!("target outer radius {outer} must exceed {inner}")));
    }
    let (rho_r, _) = density_and_log_slope(metric, outer)?;
    let level = outer * outer * rho_r * rho_r;
    let integrand = |tau: f64| -> Result<f64> {
        let y = outer - tau * tau;
        let (rho, _) = density_and_log_slope(metric, y)?;
        let radicand = y * y * rho * rho - level;
        if tau * tau <= 1e-9 * outer {
            // radicand ≈ -D τ² with D = d(y²℘²)/dy at y = R
            let (_, slope) = density_and_log_slope(metric, outer)?;
            let d = 2.0 * level / outer * (1.0 + outer * slope);
            if !(d < 0.0) {
                return Err(Error::regime(OP, format!("y℘(y) is not decreasing at {outer}")));
            }
            return Ok(2.0 * rho / (-d).sqrt());
        }
        if !(radicand > 0.0) {
            return Err(Error::regime(
                OP,
                format!("y℘(y) is not decreasing towards {outer}: radicand {radicand} at y={y}"),
            ));
        }
        Ok(2.0 * tau * rho / radicand.sqrt())
    };
    let t_max = (outer - inner).sqrt();
    for i in 1..64 {
        integrand(t_max * i as f64 / 64.0)?;
    }
    let panels = 16;
    let mut total = 0.0;
    for i in 0..panels {
        let lo = t_max * i as f64 / panels as f64;
        let hi = t_max * (i + 1) as f64 / panels as f64;
        let whole = gauss_panel(&integrand, lo, hi)?;
        total += adaptive_gauss(&integrand, lo, hi, whole, 1e-13 * whole.abs().max(1e-300), 12)?;
    }
    Ok(total)
}

/// Inner radius below which the stationary radial map of `A(r, 1)` onto the
/// metric's domain `A(c, R)` (inner circle to outer circle) ceases to exist.
pub fn critical_inner_radius(metric: &Metric, outer: f64) -> Result<f64> {
    Ok((-critical_log_span(metric, outer)?).exp())
}

/// Hammered profile on `domain = A(r, b)` into the metric's domain `A(c, R)`:
/// `p ≡ R` on `[r, b·r_⋄]`, followed by the critical profile descending to `c`.
pub fn hammered_profile(metric: &Metric, domain: &Annulus) -> Result<RadialProfile> {
    const OP: &str = "radial::hammered_minimizer";
    let (target_in, target_out) = (metric.domain().inner(), metric.domain().outer());
    let junction = domain.outer() * critical_inner_radius(metric, target_out)?;
    if !(domain.inner() < junction) {
        return Err(Error::regime(
            OP,
            format!("inner radius {} is not below the critical radius {junction}", domain.inner()),
        ));
    }
    let (rho_r, _) = density_and_log_slope(metric, target_out)?;
    let c = -0.25 * target_out * target_out * rho_r * rho_r;
    let smooth = shoot_profile_with(metric, junction, domain.outer(), target_out, c, Monotonicity::Decreasing, DEFAULT_STEPS)?;
    let end = *smooth.values.last().unwrap();
    if (end - target_in).abs() > 1e-8 * target_in {
        return Err(Error::Initialization {
            op: OP,
            detail: format!("critical profile ends at {end}, expected {target_in}"),
        });
    }
    let ring_span = (junction / domain.inner()).ln();
    let smooth_span = (domain.outer() / junction).ln();
    let ring_steps = ((DEFAULT_STEPS as f64 * ring_span / smooth_span).ceil() as usize).max(2).next_multiple_of(2);
    let h = ring_span / ring_steps as f64;
    let mut radii: Vec<f64> = (0..ring_steps).map(|i| (domain.inner().ln() + i as f64 * h).exp()).collect();
    radii[0] = domain.inner();
    let mut values = vec![target_out; ring_steps];
    let mut slopes = vec![0.0; ring_steps];
    radii.extend_from_slice(&smooth.radii);
    values.extend_from_slice(&smooth.values);
    slopes.extend_from_slice(&smooth.slopes);
    Ok(RadialProfile { radii, values, slopes, constant: c, direction: Monotonicity::Decreasing, junction: Some(junction) })
}

/// Sampled hammered minimizer on `grid`, whose annulus is the domain.
pub fn hammered_minimizer(metric: &Metric, grid: &LogPolarGrid) -> Result<MappingField> {
    hammered_profile(metric, grid.annulus())?.to_field(grid)
}

fn simpson(f: &[f64], h: f64) -> f64 {
    let n = f.len() - 1;
    match n {
        0 => 0.0,
        1 => 0.5 * h * (f[0] + f[1]),
        _ if n % 2 == 0 => {
            let inner: f64 = (1..n).map(|i| if i % 2 == 1 { 4.0 * f[i] } else { 2.0 * f[i] }).sum();
            h / 3.0 * (f[0] + f[n] + inner)
        }
        _ => simpson(&f[..n - 2], h) + 3.0 * h / 8.0 * (f[n - 3] + 3.0 * f[n - 2] + 3.0 * f[n - 1] + f[n]),
    }
}

/// `2π ∫ ℘²(p)(p'² + p²/s²) s ds`, by composite Simpson in `log s` on each
/// uniform piece of the mesh.
pub fn radial_energy(profile: &RadialProfile, metric: &Metric) -> Result<f64> {
    let density = profile
        .radii
        .iter()
        .zip(&profile.values)
        .zip(&profile.slopes)
        .map(|((&s, &p), &dp)| {
            let (rho, _) = density_and_log_slope(metric, p)?;
            let pu = s * dp;
            Ok(rho * rho * (pu * pu + p * p))
        })
        .collect::<Result<Vec<f64>>>()?;
    let split = profile.junction.map_or(0, |j| profile.radii.partition_point(|&s| s < j));
    let mut total = 0.0;
    for (lo, hi) in [(0, split), (split, profile.radii.len() - 1)] {
        if hi > lo {
            let h = (profile.radii[hi] / profile.radii[lo]).ln() / (hi - lo) as f64;
            total += simpson(&density[lo..=hi], h);
        }
    }
    Ok(2.0 * std::f64::consts::PI * total)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::energy::{self, total_energy};
    use crate::metric::MetricKind;
    use approx::assert_relative_eq;
    use std::f64::consts::PI;

    fn euclid(a: f64, b: f64) -> Metric {
        Metric::euclidean(Annulus::new(a, b).unwrap())
    }

    fn inv_sq(a: f64, b: f64) -> Metric {
        Metric::inverse_square(Annulus::new(a, b).unwrap())
    }

    #[test]
    fn nitsche_profile_from_first_integral() {
        let prof = shoot_profile(&euclid(1.0, 1.25), 1.0, 2.0, 1.0, -0.25, Monotonicity::Increasing).unwrap();
        for (&s, &p) in prof.radii.iter().zip(&prof.values) {
            assert!((p - 0.5 * (s + 1.0 / s)).abs() < 1e-8, "s={s}");
        }
    }

    #[test]
    fn conformal_profile_for_zero_constant() {
        let prof = shoot_profile(&euclid(1.0, 2.0), 1.0, 2.0, 1.0, 0.0, Monotonicity::Increasing).unwrap();
        for (&s, &p) in prof.radii.iter().zip(&prof.values) {
            assert!((p - s).abs() < 1e-12);
        }
    }

    #[test]
    fn critical_shot_leaves_the_outer_circle_tangentially() {
        let m = inv_sq(1.0, 2.0);
        let prof = shoot_profile(&m, 0.3, 1.0, 2.0, -1.0 / 16.0, Monotonicity::Decreasing).unwrap();
        assert_eq!(prof.values[0], 2.0);
        assert_eq!(prof.slopes[0], 0.0);
        assert!(prof.values.windows(2).all(|w| w[1] <= w[0]));
    }

    #[test]
    fn turning_point_is_reported() {
        // Euclidean, decreasing from p=1 with c at the radicand floor: p_uu = p > 0 turns back.
        let err = shoot_profile(&euclid(0.5, 2.0), 1.0, 2.0, 1.0, -0.25, Monotonicity::Decreasing).unwrap_err();
        assert!(matches!(err, Error::TurningPoint { .. }));
        let err = shoot_profile(&euclid(0.5, 2.0), 1.0, 2.0, 1.0, -0.3, Monotonicity::Increasing).unwrap_err();
        assert!(matches!(err, Error::TurningPoint { radius, .. } if radius == 1.0));
    }

    #[test]
    fn bvp_examples() {
        let (c, prof) = solve_bvp(&euclid(1.0, 1.25), 1.0, 2.0, 1.0, 1.25).unwrap();
        assert_relative_eq!(c, -0.25, epsilon = 1e-7);
        assert!((prof.eval(1.5).0 - 0.5 * (1.5 + 1.0 / 1.5)).abs() < 1e-7);
        let (c, _) = solve_bvp(&euclid(1.0, 2.0), 1.0, 2.0, 1.0, 2.0).unwrap();
        assert!(c.abs() < 1e-8);
        let err = solve_bvp(&inv_sq(1.0, 2.0), 0.2, 1.0, 2.0, 1.0).unwrap_err();
        assert!(matches!(err, Error::InfeasibleBvp { .. }));
    }

    #[test]
    fn bvp_profiles_satisfy_first_integral() {
        let cases = [
            (euclid(1.0, 1.25), 1.0, 2.0, 1.0, 1.25),
            (inv_sq(1.0, 2.0), 0.5, 1.0, 2.0, 1.0),
            (inv_sq(1.0, 2.0), 1.0, 3.0, 1.0, 2.0),
            (Metric::new(MetricKind::SphericalLike, Annulus::new(0.5, 2.0).unwrap()).unwrap(), 1.0, 2.0, 0.5, 2.0),
        ];
        for (m, a, b, pa, pb) in cases {
            let (c, prof) = solve_bvp(&m, a, b, pa, pb).unwrap();
            assert!((prof.values.last().unwrap() - pb).abs() <= 1e-8 * pb);
            assert_eq!(prof.constant, c);
            assert!(prof.first_integral_residual(&m).unwrap() < 1e-6);
        }
    }

    #[test]
    fn critical_radius_closed_forms() {
        let r2 = critical_inner_radius(&inv_sq(1.0, 2.0), 2.0).unwrap();
        assert_relative_eq!(r2, 1.0 / (2.0 + 3f64.sqrt()), epsilon = 1e-10);
        let r3 = critical_inner_radius(&inv_sq(1.0, 3.0), 3.0).unwrap();
        assert_relative_eq!(r3, 1.0 / (3.0 + 2.0 * 2f64.sqrt()), epsilon = 1e-10);
        let err = critical_inner_radius(&euclid(1.0, 2.0), 2.0).unwrap_err();
        assert!(matches!(err, Error::Regime { .. }));
    }

    #[test]
    fn critical_radius_matches_bvp_feasibility_threshold() {
        let m = inv_sq(1.0, 2.0);
        let feasible = |r: f64| solve_bvp(&m, r, 1.0, 2.0, 1.0).is_ok();
        let (mut lo, mut hi) = (0.2, 0.35);
        assert!(!feasible(lo) && feasible(hi));
        while hi - lo > 1e-6 {
            let mid = 0.5 * (lo + hi);
            if feasible(mid) {
                hi = mid;
            } else {
                lo = mid;
            }
        }
        let r_crit = critical_inner_radius(&m, 2.0).unwrap();
        assert!((hi - r_crit).abs() < 1e-4, "{hi} vs {r_crit}");
    }

    #[test]
    fn radial_energy_examples() {
        let id = shoot_profile(&euclid(1.0, 2.0), 1.0, 2.0, 1.0, 0.0, Monotonicity::Increasing).unwrap();
        assert_relative_eq!(radial_energy(&id, &euclid(1.0, 2.0)).unwrap(), 6.0 * PI, max_relative = 1e-10);
        let m = euclid(1.0, 1.25);
        let nit = shoot_profile(&m, 1.0, 2.0, 1.0, -0.25, Monotonicity::Increasing).unwrap();
        assert_relative_eq!(radial_energy(&nit, &m).unwrap(), 15.0 * PI / 8.0, max_relative = 1e-9);
    }

    fn hammered_oracle() -> f64 {
        // smooth part 2π∫(p_u² + p²)/p⁴ du with p_u² = p² - p⁴/4 gives π√3;
        // ring part 2π·(1/4)·log(r_⋄/r)
        let r_crit = 1.0 / (2.0 + 3f64.sqrt());
        PI * 3f64.sqrt() + 0.5 * PI * (r_crit / 0.1).ln()
    }

    #[test]
    fn hammered_profile_structure_and_energy() {
        let m = inv_sq(1.0, 2.0);
        let prof = hammered_profile(&m, &Annulus::new(0.1, 1.0).unwrap()).unwrap();
        let junction = prof.junction.unwrap();
        assert_relative_eq!(junction, 1.0 / (2.0 + 3f64.sqrt()), epsilon = 1e-10);
        let (left, _) = prof.eval(junction * (1.0 - 1e-9));
        let (right, _) = prof.eval(junction * (1.0 + 1e-9));
        assert!((left - right).abs() < 1e-8);
        assert_relative_eq!(radial_energy(&prof, &m).unwrap(), hammered_oracle(), max_relative = 1e-8);
        assert!(prof.first_integral_residual(&m).unwrap() < 1e-6);
    }

    #[test]
    fn hammered_field_on_grid() {
        let m = inv_sq(1.0, 2.0);
        let g = LogPolarGrid::new(Annulus::new(0.1, 1.0).unwrap(), 65, 256).unwrap();
        let field = hammered_minimizer(&m, &g).unwrap();
        let junction = 1.0 / (2.0 + 3f64.sqrt());
        for j in (0..g.n_s()).filter(|&j| g.radius(j) <= junction) {
            for k in 0..g.n_t() {
                assert!((field.at(j, k).norm() - 2.0).abs() < 1e-12);
            }
        }
        let jac = crate::grid::jacobian(&field).unwrap();
        for j in (1..g.n_s() - 1).filter(|&j| g.radius(j + 1) < junction) {
            assert!(jac[g.index(j, 0)].abs() < 1e-9);
        }
        let e = energy::energy(&field, &m).unwrap();
        assert_relative_eq!(e.total, hammered_oracle(), max_relative = 0.01);
        assert!(e.total >= e.lower_bound * 0.995);
    }

    #[test]
    fn hammered_field_beats_injective_competitors() {
        let m = inv_sq(1.0, 2.0);
        let g = LogPolarGrid::new(Annulus::new(0.1, 1.0).unwrap(), 65, 256).unwrap();
        let e_h = total_energy(&hammered_minimizer(&m, &g).unwrap(), &m).unwrap();
        let (u0, u1) = (0.1f64.ln(), 0.0);
        for alpha in [0.5, 1.0, 2.0, 3.0, 5.0] {
            let competitor = MappingField::from_polar_fn(&g, |s, t| {
                let x = ((s.ln() - u0) / (u1 - u0)).clamp(0.0, 1.0);
                Complex64::from_polar(2.0 - x.powf(alpha), -t)
            })
            .unwrap();
            let e_c = total_energy(&competitor, &m).unwrap();
            assert!(e_h < e_c, "alpha={alpha}: {e_h} ≥ {e_c}");
        }
    }

    #[test]
    fn hammered_precondition() {
        let m = inv_sq(1.0, 2.0);
        let err = hammered_profile(&m, &Annulus::new(0.5, 1.0).unwrap()).unwrap_err();
        assert!(matches!(err, Error::Regime { .. }));
    }

    #[test]
    fn profile_csv_export() {
        let prof = shoot_profile_with(&euclid(1.0, 2.0), 1.0, 2.0, 1.0, 0.0, Monotonicity::Increasing, 4).unwrap();
        let csv = prof.to_csv();
        let mut lines = csv.lines();
        assert_eq!(lines.next(), Some("s,p,dp"));
        assert_eq!(lines.count(), 5);
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("p.csv");
        prof.write_csv(&path).unwrap();
        assert_eq!(std::fs::read_to_string(path).unwrap(), csv);
    }
}
