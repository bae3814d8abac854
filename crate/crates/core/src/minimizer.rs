//! Projected gradient descent on the discrete `℘`-Dirichlet energy.
//!
//! Iterates stay in the closed target annulus node by node. Boundary rows are
//! pinned to their circles and slide tangentially. Search directions are the
//! gradient preconditioned by a row-weighted rectangle Laplacian (diagonal in
//! the angular Fourier modes, tridiagonal across rows). Trial steps come from a
//! Barzilai–Borwein rule and are backtracked along the projection arc until the
//! Armijo condition holds, so the recorded energy never increases.

use std::sync::Arc;
use std::time::Instant;

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};
use serde::{Deserialize, Serialize};

use crate::energy::{deformation_diagnostics, energy, energy_and_gradient, DeformationReport, EnergyBreakdown};
use crate::error::{Error, Result};
use crate::grid::{Annulus, LogPolarGrid, MappingField};
use crate::hopf::{fit_hopf_constant, HopfReport};
use crate::metric::Metric;
use crate::radial::{hammered_profile, solve_bvp};

/// Relative resolution of an energy evaluation; differences below it are noise.
const ENERGY_NOISE: f64 = 1e-13;

/// Which target circle the domain's inner circle is attached to.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum BoundaryCorrespondence {
    #[default]
    InnerToInner,
    /// Inner circle onto the outer target circle; fields then carry `e^{-i arg z}`
    /// to stay sense-preserving.
    InnerToOuter,
}

impl BoundaryCorrespondence {
    /// Target radii for the domain's (inner, outer) boundary rows.
    pub fn radii(self, target: &Annulus) -> (f64, f64) {
        match self {
            BoundaryCorrespondence::InnerToInner => (target.inner(), target.outer()),
            BoundaryCorrespondence::InnerToOuter => (target.outer(), target.inner()),
        }
    }

    fn angular_sign(self) -> f64 {
        match self {
            BoundaryCorrespondence::InnerToInner => 1.0,
            BoundaryCorrespondence::InnerToOuter => -1.0,
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Initialization {
    #[default]
    RadialLinear,
    RadialOracle,
    Provided,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MinimizeConfig {
    pub n_s: usize,
    pub n_t: usize,
    pub max_iterations: usize,
    /// Stop once the projected-gradient RMS falls below this multiple of
    /// `E / |rectangle|`, the mean energy density.
    pub gradient_tolerance: f64,
    pub initial_step: f64,
    pub backtracking: f64,
    pub sufficient_decrease: f64,
    /// Nodes this close (relative) to their constraint count as feasible.
    pub projection_tolerance: f64,
    pub initialization: Initialization,
    pub correspondence: BoundaryCorrespondence,
    /// Field for `Initialization::Provided`; any grid over the same annulus.
    #[serde(skip)]
    pub initial_field: Option<MappingField>,
}

impl Default for MinimizeConfig {
    fn default() -> Self {
        Self {
            n_s: 64,
            n_t: 256,
            max_iterations: 50_000,
            gradient_tolerance: 1e-7,
            initial_step: 1.0,
            backtracking: 0.5,
            sufficient_decrease: 1e-4,
            projection_tolerance: 1e-12,
            initialization: Initialization::RadialLinear,
            correspondence: BoundaryCorrespondence::InnerToInner,
            initial_field: None,
        }
    }
}

impl MinimizeConfig {
    pub fn validate(&self) -> Result<()> {
        const OP: &str = "minimizer::MinimizeConfig::validate";
        let positive = [self.gradient_tolerance, self.initial_step, self.sufficient_decrease, self.projection_tolerance];
        if positive.iter().any(|x| !(x.is_finite() && *x > 0.0)) {
            return Err(Error::config(OP, "tolerances and step sizes must be positive"));
        }
        if !(self.backtracking > 0.0 && self.backtracking < 1.0) || !(self.sufficient_decrease < 1.0) {
            return Err(Error::config(OP, "backtracking factor and sufficient-decrease constant must lie in (0, 1)"));
        }
        if self.max_iterations == 0 {
            return Err(Error::config(OP, "max_iterations must be positive"));
        }
        if self.initialization == Initialization::Provided && self.initial_field.is_none() {
            return Err(Error::config(OP, "provided initialization needs an initial field"));
        }
        Ok(())
    }
}

#[derive(Clone, Debug)]
pub struct MinimizeResult {
    pub field: MappingField,
    pub energy: EnergyBreakdown,
    pub energy_trace: Vec<f64>,
    pub hopf: HopfReport,
    pub diagnostics: DeformationReport,
    pub iterations: usize,
    pub converged: bool,
    pub projected_gradient_rms: f64,
    pub gradient_threshold: f64,
    pub elapsed_seconds: f64,
}

/// Node-wise radial clamp into `[inner, outer]`; boundary rows go onto their
/// circles. The origin maps to `inner` with argument 0. Nodes already within
/// `rel_tol` of feasibility are returned unchanged.
pub fn project_to_target_with(
    field: &MappingField,
    target: &Annulus,
    correspondence: BoundaryCorrespondence,
    rel_tol: f64,
) -> Result<MappingField> {
    let mut out = field.clone();
    project_in_place(&mut out, target, correspondence, rel_tol);
    Ok(out)
}

pub fn project_to_target(field: &MappingField, target: &Annulus) -> Result<MappingField> {
    project_to_target_with(field, target, BoundaryCorrespondence::InnerToInner, 1e-12)
}

fn project_in_place(field: &mut MappingField, target: &Annulus, corr: BoundaryCorrespondence, rel_tol: f64) {
    let g = field.grid().clone();
    let (r_in, r_out) = corr.radii(target);
    let last = g.n_s() - 1;
    let values = field.values_mut();
    for j in 0..g.n_s() {
        let fixed = match j {
            0 => Some(r_in),
            _ if j == last => Some(r_out),
            _ => None,
        };
        for k in 0..g.n_t() {
            let w = &mut values[g.index(j, k)];
            let s = w.norm();
            let goal = match fixed {
                Some(r) if (s - r).abs() <= rel_tol * r => continue,
                Some(r) => r,
                None if s < target.inner() => target.inner(),
                None if s > target.outer() => target.outer(),
                None => continue,
            };
            *w = if s > 0.0 { *w * (goal / s) } else { Complex64::new(goal, 0.0) };
        }
    }
}

/// Exact discrete gradient with boundary rows restricted to the circle tangent.
pub fn discrete_gradient(field: &MappingField, metric: &Metric) -> Result<Vec<Complex64>> {
    let (_, mut grad) = energy_and_gradient(field, metric)?;
    let g = field.grid();
    for j in [0, g.n_s() - 1] {
        for k in 0..g.n_t() {
            let i = g.index(j, k);
            grad[i] = tangential(grad[i], field.values()[i]);
        }
    }
    Ok(grad)
}

fn tangential(v: Complex64, at: Complex64) -> Complex64 {
    let s = at.norm();
    if s == 0.0 {
        return v;
    }
    let n = at / s;
    v - n * (v.conj() * n).re
}

/// Gradient components that can still decrease the energy without leaving
/// the feasible set.
fn projected_gradient(grad: &[Complex64], field: &MappingField, target: &Annulus, tol: f64) -> Vec<Complex64> {
    let g = field.grid();
    let last = g.n_s() - 1;
    let mut out = grad.to_vec();
    for j in 0..g.n_s() {
        for k in 0..g.n_t() {
            let i = g.index(j, k);
            let w = field.values()[i];
            if j == 0 || j == last {
                out[i] = tangential(grad[i], w);
                continue;
            }
            let s = w.norm();
            if s == 0.0 {
                continue;
            }
            let radial = (grad[i].conj() * (w / s)).re;
            let at_outer = s >= target.outer() * (1.0 - tol) && radial < 0.0;
            let at_inner = s <= target.inner() * (1.0 + tol) && radial > 0.0;
            if at_outer || at_inner {
                out[i] = tangential(grad[i], w);
            }
        }
    }
    out
}

/// Inverse of `2(L_ω + ω)` where `L_ω` is the five-point rectangle Laplacian
/// with per-row weights `ω ≈ ℘²(F)` and natural boundary rows. Symmetric
/// positive definite, so preconditioned projected gradients stay descent
/// directions.
struct Preconditioner {
    forward: Arc<dyn Fft<f64>>,
    inverse: Arc<dyn Fft<f64>>,
    n_s: usize,
    n_t: usize,
    du: f64,
    /// `(2 - 2cos(2πm/n_t)) / Δv²`
    modes: Vec<f64>,
}

impl Preconditioner {
    fn new(grid: &LogPolarGrid) -> Self {
        let mut planner = FftPlanner::new();
        let n_t = grid.n_t();
        let dv2 = grid.dv() * grid.dv();
        let modes = (0..n_t)
            .map(|m| (2.0 - 2.0 * (2.0 * std::f64::consts::PI * m as f64 / n_t as f64).cos()) / dv2)
            .collect();
        Self {
            forward: planner.plan_fft_forward(n_t),
            inverse: planner.plan_fft_inverse(n_t),
            n_s: grid.n_s(),
            n_t,
            du: grid.du(),
            modes,
        }
    }

    /// Mean `℘²` over the cells of each row strip `[j, j+1]`.
    fn row_weights(field: &MappingField, metric: &Metric) -> Result<Vec<f64>> {
        let g = field.grid();
        let mut out = Vec::with_capacity(g.n_s() - 1);
        for j in 0..g.n_s() - 1 {
            let mut sum = 0.0;
            for k in 0..g.n_t() {
                let k1 = (k + 1) % g.n_t();
                let c = 0.25 * (field.at(j, k) + field.at(j + 1, k) + field.at(j, k1) + field.at(j + 1, k1));
                let p = metric.eval_relaxed(c)?.density;
                sum += p * p;
            }
            out.push(sum / g.n_t() as f64);
        }
        Ok(out)
    }

    fn apply(&self, strip: &[f64], rhs: &[Complex64]) -> Vec<Complex64> {
        let (n_s, n_t) = (self.n_s, self.n_t);
        let mut data = rhs.to_vec();
        for row in data.chunks_mut(n_t) {
            self.forward.process(row);
        }
        let iu2 = 1.0 / (self.du * self.du);
        let row_v: Vec<f64> = (0..n_s)
            .map(|j| {
                let below = if j > 0 { strip[j - 1] } else { 0.0 };
                let above = if j + 1 < n_s { strip[j] } else { 0.0 };
                0.5 * (below + above)
            })
            .collect();
        let mut c_prime = vec![0.0; n_s];
        let mut d_prime = vec![Complex64::new(0.0, 0.0); n_s];
        for m in 0..n_t {
            // Thomas algorithm on rows for Fourier mode m
            for j in 0..n_s {
                let below = if j > 0 { strip[j - 1] } else { 0.0 };
                let above = if j + 1 < n_s { strip[j] } else { 0.0 };
                let diag = 2.0 * ((below + above) * iu2 + row_v[j] * (self.modes[m] + 1.0));
                let lower = -2.0 * below * iu2;
                let upper = -2.0 * above * iu2;
                let r = data[j * n_t + m];
                if j == 0 {
                    c_prime[0] = upper / diag;
                    d_prime[0] = r / diag;
                } else {
                    let denom = diag - lower * c_prime[j - 1];
                    c_prime[j] = upper / denom;
                    d_prime[j] = (r - lower * d_prime[j - 1]) / denom;
                }
            }
            for j in (0..n_s).rev() {
                let x = if j + 1 < n_s { d_prime[j] - c_prime[j] * data[(j + 1) * n_t + m] } else { d_prime[j] };
                data[j * n_t + m] = x;
            }
        }
        let scale = 1.0 / n_t as f64;
        for row in data.chunks_mut(n_t) {
            self.inverse.process(row);
            for v in row.iter_mut() {
                *v *= scale;
            }
        }
        data
    }
}

/// Nodes whose radial motion is frozen: boundary rows, and interior nodes
/// resting on a target circle with the gradient pushing them outside.
fn frozen_radially(grad: &[Complex64], field: &MappingField, target: &Annulus) -> Vec<bool> {
    const AT_BOUND: f64 = 1e-9;
    let g = field.grid();
    let last = g.n_s() - 1;
    (0..g.len())
        .map(|i| {
            let j = i / g.n_t();
            if j == 0 || j == last {
                return true;
            }
            let w = field.values()[i];
            let s = w.norm();
            if s == 0.0 {
                return false;
            }
            let radial = (grad[i].conj() * (w / s)).re;
            (s >= target.outer() * (1.0 - AT_BOUND) && radial < 0.0)
                || (s <= target.inner() * (1.0 + AT_BOUND) && radial > 0.0)
        })
        .collect()
}

fn restrict(v: &mut [Complex64], field: &MappingField, frozen: &[bool]) {
    for ((x, w), &f) in v.iter_mut().zip(field.values()).zip(frozen) {
        if f {
            *x = tangential(*x, *w);
        }
    }
}

fn dot(a: &[Complex64], b: &[Complex64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x.re * y.re + x.im * y.im).sum()
}

fn rms(v: &[Complex64]) -> f64 {
    (v.iter().map(|x| x.norm_sqr()).sum::<f64>() / v.len() as f64).sqrt()
}

/// Radial starting field `p(s) e^{±i arg z}` with `p` affine in `log s`.
pub fn radial_linear_field(grid: &LogPolarGrid, target: &Annulus, corr: BoundaryCorrespondence) -> Result<MappingField> {
    let (r_in, r_out) = corr.radii(target);
    let sign = corr.angular_sign();
    let (u0, span) = (grid.u_min(), grid.u_span());
    let mut f = MappingField::from_polar_fn(grid, |s, t| {
        let x = ((s.ln() - u0) / span).clamp(0.0, 1.0);
        Complex64::from_polar(r_in + (r_out - r_in) * x, sign * t)
    })?;
    project_in_place(&mut f, target, corr, 0.0);
    Ok(f)
}

/// Stationary radial field from the radial solver, or the hammered field when
/// the radial boundary-value problem is infeasible.
pub fn radial_oracle_field(
    grid: &LogPolarGrid,
    target: &Annulus,
    metric: &Metric,
    corr: BoundaryCorrespondence,
) -> Result<MappingField> {
    const OP: &str = "minimizer::radial_oracle_field";
    let dom = grid.annulus();
    let (r_in, r_out) = corr.radii(target);
    let profile = match solve_bvp(metric, dom.inner(), dom.outer(), r_in, r_out) {
        Ok((_, p)) => p,
        Err(Error::InfeasibleBvp { .. }) if corr == BoundaryCorrespondence::InnerToOuter => hammered_profile(metric, dom)?,
        Err(e) => {
            return Err(Error::Initialization { op: OP, detail: format!("no radial oracle: {e}") });
        }
    };
    let mut f = profile.to_field(grid)?;
    project_in_place(&mut f, target, corr, 0.0);
    Ok(f)
}

fn initial_field(grid: &LogPolarGrid, target: &Annulus, metric: &Metric, cfg: &MinimizeConfig) -> Result<MappingField> {
    const OP: &str = "minimizer::minimize";
    let mut f = match cfg.initialization {
        Initialization::RadialLinear => radial_linear_field(grid, target, cfg.correspondence)?,
        Initialization::RadialOracle => radial_oracle_field(grid, target, metric, cfg.correspondence)?,
        Initialization::Provided => {
            let given = cfg.initial_field.as_ref().ok_or_else(|| Error::config(OP, "missing initial field"))?;
            if given.grid().annulus() != grid.annulus() {
                return Err(Error::Initialization { op: OP, detail: "initial field lives on a different annulus".into() });
            }
            if given.grid() == grid {
                given.clone()
            } else {
                given.resample(grid)?
            }
        }
    };
    project_in_place(&mut f, target, cfg.correspondence, 0.0);
    Ok(f)
}

/// Minimizes the discrete energy over fields `domain → target`.
pub fn minimize(domain: &Annulus, target: &Annulus, metric: &Metric, cfg: &MinimizeConfig) -> Result<MinimizeResult> {
    const OP: &str = "minimizer::minimize";
    let started = Instant::now();
    cfg.validate()?;
    if (target.inner() - 1.0).abs() > 1e-12 {
        return Err(Error::precondition(OP, format!("target inner radius must be 1, got {}", target.inner())));
    }
    if metric.domain() != target {
        return Err(Error::precondition(OP, "metric domain differs from the target annulus"));
    }
    let grid = LogPolarGrid::new(*domain, cfg.n_s, cfg.n_t)?;
    let mut x = initial_field(&grid, target, metric, cfg)?;
    let w = grid.du() * grid.dv();
    let rect_area = grid.u_span() * 2.0 * std::f64::consts::PI;

    let (mut e, raw) = energy_and_gradient(&x, metric)?;
    if !e.is_finite() || raw.iter().any(|g| !(g.re.is_finite() && g.im.is_finite())) {
        return Err(Error::Initialization { op: OP, detail: format!("non-finite initial energy {e}") });
    }
    let scale = 1.0 / w;
    let mut grad: Vec<Complex64> = raw.iter().map(|g| g * scale).collect();
    let mut trace = vec![e];
    let precond = Preconditioner::new(&grid);
    let mut step = 1.0;
    let mut prev: Option<(Vec<Complex64>, Vec<Complex64>)> = None;
    let mut iterations = 0;
    let tol = cfg.projection_tolerance;
    let threshold = |e: f64| cfg.gradient_tolerance * e / rect_area;
    let mut pg_rms = rms(&projected_gradient(&grad, &x, target, tol));

    while iterations < cfg.max_iterations && pg_rms > threshold(e) {
        let strip = Preconditioner::row_weights(&x, metric)?;
        let frozen = frozen_radially(&grad, &x, target);
        let mut tg = grad.clone();
        restrict(&mut tg, &x, &frozen);
        let mut dir = precond.apply(&strip, &tg);
        restrict(&mut dir, &x, &frozen);
        if let Some((x_old, g_old)) = &prev {
            let s: Vec<Complex64> = x.values().iter().zip(x_old).map(|(a, b)| a - b).collect();
            let mut y: Vec<Complex64> = grad.iter().zip(g_old).map(|(a, b)| a - b).collect();
            restrict(&mut y, &x, &frozen);
            let sy = dot(&s, &y);
            let py = precond.apply(&strip, &y);
            let ypy = dot(&y, &py);
            step = if sy > 0.0 && ypy > 0.0 { (sy / ypy).clamp(1e-6, 1e6) } else { (2.0 * step).min(1e6) };
        } else {
            step = cfg.initial_step;
        }
        let mut alpha = step;
        let mut accepted = None;
        for _ in 0..80 {
            let mut trial = x.clone();
            for (v, d) in trial.values_mut().iter_mut().zip(&dir) {
                *v -= alpha * d;
            }
            project_in_place(&mut trial, target, cfg.correspondence, 0.0);
            let d: Vec<Complex64> = trial.values().iter().zip(x.values()).map(|(a, b)| a - b).collect();
            // Frozen normal components only see rounding-level displacements.
            let slope = w * dot(&tg, &d);
            if slope >= 0.0 {
                    alpha *= cfg.backtracking;
                continue;
            }
            let (e_new, raw_new) = energy_and_gradient(&trial, metric)?;
            let armijo = e_new <= e + cfg.sufficient_decrease * slope;
            // Within the rounding noise of the energy sum, the trapezoid model
            // of the decrease (exact for quadratics) decides instead.
            let mut g_new = raw_new.clone();
            restrict(&mut g_new, &x, &frozen);
            let model = 0.5 * (slope + dot(&g_new, &d));
            let in_noise = (e_new - e).abs() <= ENERGY_NOISE * e.abs();
            if armijo || (in_noise && model <= cfg.sufficient_decrease * slope) {
                accepted = Some((trial, e_new, raw_new));
                break;
            }
            alpha *= cfg.backtracking;
        }
        let Some((trial, e_new, raw_new)) = accepted else { break };
        prev = Some((x.values().to_vec(), grad));
        x = trial;
        e = e_new;
        grad = raw_new.iter().map(|g| g * scale).collect();
        trace.push(e);
        iterations += 1;
        pg_rms = rms(&projected_gradient(&grad, &x, target, tol));
    }

    let converged = pg_rms <= threshold(e);
    let energy = energy(&x, metric)?;
    let hopf = fit_hopf_constant(&x, metric)?;
    let diagnostics = deformation_diagnostics(&x, metric)?;
    Ok(MinimizeResult {
        field: x,
        energy,
        energy_trace: trace,
        hopf,
        diagnostics,
        iterations,
        converged,
        projected_gradient_rms: pg_rms,
        gradient_threshold: threshold(e),
        elapsed_seconds: started.elapsed().as_secs_f64(),
    })
}

/// Minimizes on successively refined grids, each level starting from the
/// bilinear prolongation of the previous result. `levels` lists `(n_s, n_t)`.
pub fn minimize_cascade(
    domain: &Annulus,
    target: &Annulus,
    metric: &Metric,
    cfg: &MinimizeConfig,
    levels: &[(usize, usize)],
) -> Result<Vec<MinimizeResult>> {
    let mut out: Vec<MinimizeResult> = Vec::with_capacity(levels.len());
    for (i, &(n_s, n_t)) in levels.iter().enumerate() {
        let mut c = cfg.clone();
        c.n_s = n_s;
        c.n_t = n_t;
        if i > 0 {
            c.initialization = Initialization::Provided;
            c.initial_field = Some(out[i - 1].field.clone());
        }
        out.push(minimize(domain, target, metric, &c)?);
    }
    Ok(out)
}

/// Deterministic JSON summary of a run. Wall-clock timings are kept out so that
/// identical inputs give byte-identical reports.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct RunReport {
    pub domain: Annulus,
    pub target: Annulus,
    pub metric: String,
    pub config: MinimizeConfig,
    pub energy: EnergyBreakdown,
    pub iterations: usize,
    pub converged: bool,
    pub projected_gradient_rms: f64,
    pub gradient_threshold: f64,
    pub hopf: HopfReport,
    pub diagnostics: DeformationReport,
    pub energy_trace: Vec<f64>,
}

impl RunReport {
    pub fn new(domain: &Annulus, target: &Annulus, metric: &Metric, cfg: &MinimizeConfig, r: &MinimizeResult) -> Self {
        Self {
            domain: *domain,
            target: *target,
            metric: metric.describe(),
            config: cfg.clone(),
            energy: r.energy,
            iterations: r.iterations,
            converged: r.converged,
            projected_gradient_rms: r.projected_gradient_rms,
            gradient_threshold: r.gradient_threshold,
            hopf: r.hopf.clone(),
            diagnostics: r.diagnostics.clone(),
            energy_trace: r.energy_trace.clone(),
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("run report serializes")
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use rand::{Rng, SeedableRng};
    use std::f64::consts::PI;

    fn ann(a: f64, b: f64) -> Annulus {
        Annulus::new(a, b).unwrap()
    }

    fn cfg(n_s: usize, n_t: usize) -> MinimizeConfig {
        MinimizeConfig { n_s, n_t, ..Default::default() }
    }

    #[test]
    fn projection_examples() {
        let g = LogPolarGrid::new(ann(1.0, 2.0), 5, 8).unwrap();
        let t = ann(1.0, 2.0);
        let f = radial_linear_field(&g, &t, BoundaryCorrespondence::InnerToInner).unwrap();
        let p = project_to_target(&f, &t).unwrap();
        assert_eq!(p.values(), f.values());

        let mut vals = f.values().to_vec();
        vals[g.index(2, 1)] = Complex64::from_polar(2.5, 0.3);
        vals[g.index(2, 2)] = Complex64::new(0.0, 0.0);
        let p = project_to_target(&MappingField::new(g.clone(), vals).unwrap(), &t).unwrap();
        assert_relative_eq!(p.at(2, 1).norm(), 2.0, epsilon = 1e-15);
        assert_relative_eq!(p.at(2, 1).arg(), 0.3, epsilon = 1e-15);
        assert_eq!(p.at(2, 2), Complex64::new(1.0, 0.0));
    }

    #[test]
    fn boundary_gradient_is_tangential() {
        let g = LogPolarGrid::new(ann(1.0, 2.0), 9, 32).unwrap();
        let m = Metric::euclidean(ann(1.0, 1.25));
        let f = radial_linear_field(&g, m.domain(), BoundaryCorrespondence::InnerToInner).unwrap();
        let grad = discrete_gradient(&f, &m).unwrap();
        for j in [0, g.n_s() - 1] {
            for k in 0..g.n_t() {
                let i = g.index(j, k);
                let n = f.values()[i] / f.values()[i].norm();
                assert!((grad[i].conj() * n).re.abs() < 1e-15);
            }
        }
    }

    #[test]
    fn gradient_directional_check() {
        let g = LogPolarGrid::new(ann(1.0, 2.0), 12, 32).unwrap();
        let m = Metric::inverse_square(ann(1.0, 2.0));
        let f = MappingField::from_fn(&g, |z| z * (1.0 + 0.05 * (3.0 * z.arg()).sin())).unwrap();
        let (_, grad) = energy_and_gradient(&f, &m).unwrap();
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(11);
        let h = 1e-5;
        for _ in 0..10 {
            let v: Vec<Complex64> = (0..g.len()).map(|_| Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0))).collect();
            let at = |t: f64| {
                let vals = f.values().iter().zip(&v).map(|(a, b)| a + t * b).collect();
                crate::energy::total_energy(&MappingField::new(g.clone(), vals).unwrap(), &m).unwrap()
            };
            let fd = (at(h) - at(-h)) / (2.0 * h);
            assert_relative_eq!(fd, dot(&grad, &v), max_relative = 1e-6);
        }
    }

    #[test]
    fn identity_gradient_is_small() {
        let norm = |n: usize| {
            let g = LogPolarGrid::new(ann(1.0, 2.0), n + 1, 4 * n).unwrap();
            let m = Metric::euclidean(ann(1.0, 2.0));
            let f = MappingField::from_fn(&g, |z| z).unwrap();
            let grad = discrete_gradient(&f, &m).unwrap();
            rms(&grad) / (g.du() * g.dv())
        };
        let (a, b) = (norm(16), norm(32));
        assert!(b < 0.01 && a / b > 3.0, "{a} {b}");
    }

    #[test]
    fn conformal_case_recovers_identity() {
        let m = Metric::euclidean(ann(1.0, 2.0));
        let r = minimize(&ann(1.0, 2.0), &ann(1.0, 2.0), &m, &cfg(17, 64)).unwrap();
        // non-increasing up to the energy resolution
        assert!(r.energy_trace.windows(2).all(|w| w[1] <= w[0] * (1.0 + 4.0 * ENERGY_NOISE)));
        assert_relative_eq!(r.energy.total, 6.0 * PI, max_relative = 0.01);
        assert!(r.hopf.c_fit.abs() < 1e-2);
        // best rotation of the identity
        let g = r.field.grid();
        let phase: Complex64 = (0..g.len()).map(|i| r.field.values()[i] * g.points()[i].conj()).sum();
        let rot = phase / phase.norm();
        let dev = (0..g.len()).map(|i| (r.field.values()[i] - rot * g.points()[i]).norm()).fold(0.0, f64::max);
        assert!(dev <= 2.0 * g.du().max(g.dv()), "{dev}");
    }

    #[test]
    fn nitsche_case() {
        let m = Metric::euclidean(ann(1.0, 1.25));
        let r = minimize(&ann(1.0, 2.0), &ann(1.0, 1.25), &m, &cfg(17, 64)).unwrap();
        assert_relative_eq!(r.energy.total, 15.0 * PI / 8.0, max_relative = 0.02);
        assert_relative_eq!(r.hopf.c_fit, -0.25, max_relative = 0.05);
        assert!(r.energy.total >= r.energy.lower_bound * 0.995);
    }

    #[test]
    fn preconditions_and_config_errors() {
        let m = Metric::euclidean(ann(2.0, 3.0));
        let err = minimize(&ann(1.0, 2.0), &ann(2.0, 3.0), &m, &cfg(9, 16)).unwrap_err();
        assert!(matches!(err, Error::Precondition { .. }));
        let m = Metric::euclidean(ann(1.0, 2.0));
        let bad = MinimizeConfig { backtracking: 1.5, ..cfg(9, 16) };
        assert!(matches!(minimize(&ann(1.0, 2.0), &ann(1.0, 2.0), &m, &bad).unwrap_err(), Error::Config { .. }));
        let bad = MinimizeConfig { initialization: Initialization::Provided, ..cfg(9, 16) };
        assert!(matches!(minimize(&ann(1.0, 2.0), &ann(1.0, 2.0), &m, &bad).unwrap_err(), Error::Config { .. }));
    }
}
