//! Distortion and regularity diagnostics for sampled maps: the `(K, K′)`
//! quasiconformality constants of stationary fields, the Hölder exponent and
//! bound shape they imply, and discrete Lipschitz and Hölder quotients.
//!
//! Quasiconformality is taken in the form `|DF|² ≤ K·J_F + K′` with
//! `|DF|² = |F_z|² + |F_z̄|²`. Other conventions exist.

use std::fmt::Write as _;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{self, MappingField};
use crate::metric::Metric;

/// Exponent convention used when `K = 1`: any `K₁ > 1` works, and this one
/// gives `β = 1/2`.
pub const UNIT_K_SUBSTITUTE: f64 = 1.25;

/// Pair budget above which Hölder quotients are subsampled.
pub const MAX_PAIRS: usize = 1_000_000;

const PAIR_SEED: u64 = 0x5eed_4a11;

/// Rows on each side counted as "near the boundary" and the largest index
/// offset of a boundary difference quotient.
const BOUNDARY_BAND: usize = 3;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct QcConstants {
    pub k: f64,
    pub k_prime: f64,
    /// Largest `(|DF|² − J − 2|F_z F_z̄|)/|DF|²` over nodes, clamped at 0.
    pub max_relative_violation: f64,
    /// Nodes with `J < 0`, where the pointwise inequality cannot hold.
    pub folded_nodes: usize,
}

impl QcConstants {
    pub fn inequality_holds(&self, rel_tol: f64) -> bool {
        self.max_relative_violation <= rel_tol
    }
}

/// `K = 1` and `K′ = max |c|/(|z|²℘²(F))` over nodes, together with a check of
/// `|DF|² ≤ J + 2|F_z F_z̄|` at every node.
pub fn qc_constants(field: &MappingField, metric: &Metric, c: Complex64) -> Result<QcConstants> {
    let g = field.grid();
    let w = grid::wirtinger(field)?;
    let mut k_prime: f64 = 0.0;
    let mut worst: f64 = 0.0;
    let mut folded = 0;
    for j in 0..g.n_s() {
        let s = g.radius(j);
        for k in 0..g.n_t() {
            let i = g.index(j, k);
            let p = metric.eval_relaxed(field.values()[i])?.density;
            k_prime = k_prime.max(c.norm() / (s * s * p * p));
            let (a, b) = (w.fz[i].norm(), w.fzbar[i].norm());
            let lhs = a * a + b * b;
            let jac = a * a - b * b;
            if jac < 0.0 {
                folded += 1;
            }
            if lhs > 0.0 {
                worst = worst.max((lhs - jac - 2.0 * a * b) / lhs);
            }
        }
    }
    Ok(QcConstants { k: 1.0, k_prime, max_relative_violation: worst.max(0.0), folded_nodes: folded })
}

/// Hölder exponent and the shape of the bound `C(K)·(M + d√K′)·|z − z′|^β`.
/// `C(K)` has no known value and stays symbolic.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HolderBound {
    /// The `K` entering the exponent: the input, or the substitute when it is 1.
    pub k_used: f64,
    pub beta: f64,
    /// `M + d√K′`
    pub structural_factor: f64,
    pub form: String,
}

pub fn holder_exponent(k: f64) -> f64 {
    k - (k * k - 1.0).sqrt()
}

pub fn holder_bound(k: f64, k_prime: f64, sup_modulus: f64, distance: f64) -> Result<HolderBound> {
    const OP: &str = "regularity::holder_bound";
    if !(k >= 1.0) || !k.is_finite() {
        return Err(Error::domain(OP, format!("distortion K must be at least 1, got {k}")));
    }
    if !(k_prime >= 0.0) || !k_prime.is_finite() {
        return Err(Error::domain(OP, format!("K' must be nonnegative, got {k_prime}")));
    }
    if !(sup_modulus > 0.0 && distance > 0.0) {
        return Err(Error::domain(OP, "M and d must be positive"));
    }
    let k_used = if k == 1.0 { UNIT_K_SUBSTITUTE } else { k };
    let beta = holder_exponent(k_used);
    let structural_factor = sup_modulus + distance * k_prime.sqrt();
    Ok(HolderBound {
        k_used,
        beta,
        structural_factor,
        form: format!("C({k_used})*({sup_modulus} + {distance}*sqrt({k_prime}))*|z-z'|^{beta}"),
    })
}

/// Discrete Lipschitz constants of a field.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LipschitzEstimate {
    /// Max over interior nodes of the differential's operator norm `|F_z| + |F_z̄|`.
    pub interior: f64,
    /// Max difference quotient over node pairs near the boundary rows.
    pub boundary: f64,
}

pub fn lipschitz_estimate(field: &MappingField) -> Result<LipschitzEstimate> {
    let g = field.grid();
    let w = grid::wirtinger(field)?;
    let mut interior: f64 = 0.0;
    for j in 1..g.n_s() - 1 {
        for k in 0..g.n_t() {
            let i = g.index(j, k);
            interior = interior.max(w.fz[i].norm() + w.fzbar[i].norm());
        }
    }
    let n_s = g.n_s();
    let n_t = g.n_t() as isize;
    let near = |j: usize| j <= BOUNDARY_BAND || j + BOUNDARY_BAND + 1 >= n_s;
    let reach = BOUNDARY_BAND as isize;
    let mut boundary: f64 = 0.0;
    for j in (0..n_s).filter(|&j| near(j)) {
        for k in 0..n_t {
            let (z, f) = (g.z(j, k as usize), field.at(j, k as usize));
            for dj in -reach..=reach {
                let j2 = j as isize + dj;
                if j2 < 0 || j2 >= n_s as isize || !near(j2 as usize) {
                    continue;
                }
                for dk in -reach..=reach {
                    if dj == 0 && dk == 0 {
                        continue;
                    }
                    let k2 = g.wrap(k + dk);
                    let dz = (g.z(j2 as usize, k2) - z).norm();
                    if dz > 0.0 {
                        boundary = boundary.max((field.at(j2 as usize, k2) - f).norm() / dz);
                    }
                }
            }
        }
    }
    Ok(LipschitzEstimate { interior, boundary })
}

/// `max |F(z) − F(z′)| / |z − z′|^exponent` over node pairs: all pairs when
/// there are at most [`MAX_PAIRS`], otherwise that many pairs drawn with a
/// fixed seed.
pub fn holder_empirical(field: &MappingField, exponent: f64) -> Result<f64> {
    if !(exponent > 0.0 && exponent <= 1.0) {
        return Err(Error::domain("regularity::holder_empirical", format!("exponent must lie in (0, 1], got {exponent}")));
    }
    let pts = field.grid().points();
    let vals = field.values();
    let n = pts.len();
    let quotient = |a: usize, b: usize| {
        let dz = (pts[a] - pts[b]).norm();
        if dz > 0.0 {
            (vals[a] - vals[b]).norm() / dz.powf(exponent)
        } else {
            0.0
        }
    };
    let mut best: f64 = 0.0;
    if n * (n - 1) / 2 <= MAX_PAIRS {
        for a in 0..n {
            for b in a + 1..n {
                best = best.max(quotient(a, b));
            }
        }
    } else {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(PAIR_SEED);
        for _ in 0..MAX_PAIRS {
            let a = rng.gen_range(0..n);
            let b = rng.gen_range(0..n);
            best = best.max(quotient(a, b));
        }
    }
    Ok(best)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrendRow {
    pub n_s: usize,
    pub n_t: usize,
    pub interior_lipschitz: f64,
    pub boundary_lipschitz: f64,
    pub holder_half: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RefinementTrend {
    pub rows: Vec<TrendRow>,
}

impl RefinementTrend {
    pub fn of(fields: &[MappingField]) -> Result<Self> {
        let rows = fields
            .iter()
            .map(|f| {
                let l = lipschitz_estimate(f)?;
                Ok(TrendRow {
                    n_s: f.grid().n_s(),
                    n_t: f.grid().n_t(),
                    interior_lipschitz: l.interior,
                    boundary_lipschitz: l.boundary,
                    holder_half: holder_empirical(f, 0.5)?,
                })
            })
            .collect::<Result<_>>()?;
        Ok(Self { rows })
    }

    /// Largest relative spread `(max − min)/min` of each column.
    pub fn relative_variation(&self) -> (f64, f64, f64) {
        let spread = |get: fn(&TrendRow) -> f64| {
            let (lo, hi) = self.rows.iter().map(get).fold((f64::INFINITY, 0.0f64), |(lo, hi), x| (lo.min(x), hi.max(x)));
            if self.rows.is_empty() {
                0.0
            } else {
                (hi - lo) / lo
            }
        };
        (spread(|r| r.interior_lipschitz), spread(|r| r.boundary_lipschitz), spread(|r| r.holder_half))
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("n_s,n_t,interior_lipschitz,boundary_lipschitz,holder_half\n");
        for r in &self.rows {
            let _ = writeln!(out, "{},{},{},{},{}", r.n_s, r.n_t, r.interior_lipschitz, r.boundary_lipschitz, r.holder_half);
        }
        out
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RegularityReport {
    pub k: f64,
    pub k_prime: f64,
    pub beta: f64,
    pub holder: HolderBound,
    /// Empirical coefficient at exponent `beta`.
    pub holder_coefficient: f64,
    pub discrete_lipschitz: f64,
    pub boundary_lipschitz: f64,
    pub sup_modulus: f64,
    pub distance: f64,
    pub max_relative_violation: f64,
    pub folded_nodes: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub refinement: Option<RefinementTrend>,
}

impl RegularityReport {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report is plain data")
    }
}

/// Full report for `field`. `distance` is the `d` of the Hölder bound, the
/// distance from the region of interest to the boundary of the domain the
/// estimate is applied on.
pub fn regularity_report(field: &MappingField, metric: &Metric, c: Complex64, distance: f64) -> Result<RegularityReport> {
    let qc = qc_constants(field, metric, c)?;
    let sup_modulus = field.values().iter().map(|w| w.norm()).fold(0.0, f64::max);
    let holder = holder_bound(qc.k, qc.k_prime, sup_modulus, distance)?;
    let lip = lipschitz_estimate(field)?;
    Ok(RegularityReport {
        k: qc.k,
        k_prime: qc.k_prime,
        beta: holder.beta,
        holder_coefficient: holder_empirical(field, holder.beta)?,
        holder,
        discrete_lipschitz: lip.interior,
        boundary_lipschitz: lip.boundary,
        sup_modulus,
        distance,
        max_relative_violation: qc.max_relative_violation,
        folded_nodes: qc.folded_nodes,
        refinement: None,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::{Annulus, LogPolarGrid};
    use crate::radial::hammered_minimizer;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    fn ann(a: f64, b: f64) -> Annulus {
        Annulus::new(a, b).unwrap()
    }

    fn grid(a: f64, b: f64, n_s: usize, n_t: usize) -> LogPolarGrid {
        LogPolarGrid::new(ann(a, b), n_s, n_t).unwrap()
    }

    fn nitsche(z: Complex64) -> Complex64 {
        0.5 * (z + 1.0 / z.conj())
    }

    #[test]
    fn identity_constants() {
        let g = grid(1.0, 2.0, 33, 128);
        let f = MappingField::from_fn(&g, |z| z).unwrap();
        let qc = qc_constants(&f, &Metric::euclidean(ann(1.0, 2.0)), Complex64::new(0.0, 0.0)).unwrap();
        assert_eq!((qc.k, qc.k_prime), (1.0, 0.0));
        assert!(qc.inequality_holds(1e-12));
        let l = lipschitz_estimate(&f).unwrap();
        assert!((l.interior - 1.0).abs() < 1e-3, "{}", l.interior);
        assert!((l.boundary - 1.0).abs() < 1e-12, "{}", l.boundary);
    }

    #[test]
    fn nitsche_constants() {
        let g = grid(1.0, 2.0, 65, 256);
        let f = MappingField::from_fn(&g, nitsche).unwrap();
        let qc = qc_constants(&f, &Metric::euclidean(ann(1.0, 1.25)), Complex64::new(-0.25, 0.0)).unwrap();
        assert_relative_eq!(qc.k_prime, 0.25, max_relative = 1e-14);
        // J vanishes on |z| = 1, where the discrete Jacobian is only O(Δ²) accurate
        assert!(qc.inequality_holds(1e-5), "{}", qc.max_relative_violation);
        // ½ + ½/s² on the first interior row
        let l = lipschitz_estimate(&f).unwrap();
        let s1 = g.radius(1);
        assert!((l.interior - (0.5 + 0.5 / (s1 * s1))).abs() < 1e-4, "{}", l.interior);
        assert!((l.interior - 1.0).abs() < 2.0 * g.du());
    }

    #[test]
    fn hammered_constants() {
        let m = Metric::inverse_square(ann(1.0, 2.0));
        let g = grid(0.1, 1.0, 65, 256);
        let f = hammered_minimizer(&m, &g).unwrap();
        let c = Complex64::new(-0.0625, 0.0);
        let qc = qc_constants(&f, &m, c).unwrap();
        let oracle = (0..g.len()).map(|i| c.norm() * f.values()[i].norm().powi(4) / g.points()[i].norm_sqr()).fold(0.0, f64::max);
        assert_relative_eq!(qc.k_prime, oracle, max_relative = 1e-12);
        assert!(qc.k_prime.is_finite());
        let l = lipschitz_estimate(&f).unwrap();
        // angular quotients of z ↦ 2z/|z| reach about R/r near the inner circle
        assert!(l.boundary.is_finite() && l.boundary > 15.0 && l.boundary < 2.0 / 0.1 * 1.01, "{}", l.boundary);
        assert!(holder_empirical(&f, 1.0).unwrap().is_finite());
        assert!(holder_empirical(&f, 0.5).unwrap().is_finite());
    }

    #[test]
    fn exponent_convention() {
        let b = holder_bound(1.25, 0.0, 1.0, 1.0).unwrap();
        assert_relative_eq!(b.beta, 0.5, epsilon = 1e-15);
        let unit = holder_bound(1.0, 0.25, 2.0, 0.5).unwrap();
        assert_eq!(unit.k_used, UNIT_K_SUBSTITUTE);
        assert_relative_eq!(unit.beta, 0.5, epsilon = 1e-15);
        assert_relative_eq!(unit.structural_factor, 2.0 + 0.5 * 0.5);
        assert_relative_eq!(holder_bound(2.0, 0.0, 1.0, 1.0).unwrap().beta, 2.0 - 3f64.sqrt(), epsilon = 1e-15);
        assert!(matches!(holder_bound(0.9, 0.0, 1.0, 1.0), Err(Error::Domain { .. })));
        assert!(holder_bound(1.0, -1.0, 1.0, 1.0).is_err());
    }

    proptest! {
        #[test]
        fn exponent_decreases_in_k(a in 1.0f64..20.0, b in 1.0f64..20.0) {
            let (lo, hi) = if a < b { (a, b) } else { (b, a) };
            prop_assume!(hi - lo > 1e-9);
            prop_assert!(holder_exponent(hi) < holder_exponent(lo));
            prop_assert!(holder_exponent(hi) > 0.0 && holder_exponent(lo) <= 1.0);
        }
    }

    #[test]
    fn identity_half_holder_is_root_diameter() {
        let g = grid(1.0, 2.0, 9, 16);
        let f = MappingField::from_fn(&g, |z| z).unwrap();
        assert_relative_eq!(holder_empirical(&f, 0.5).unwrap(), 2.0, max_relative = 1e-12);
        assert!(holder_empirical(&f, 0.0).is_err());
        assert!(holder_empirical(&f, 1.5).is_err());
    }

    #[test]
    fn subsampling_is_deterministic() {
        let g = grid(1.0, 2.0, 65, 64);
        let f = MappingField::from_fn(&g, nitsche).unwrap();
        let a = holder_empirical(&f, 0.5).unwrap();
        assert_eq!(a, holder_empirical(&f, 0.5).unwrap());
        assert!(a > 0.0 && a < 2.0);
    }

    #[test]
    fn report_and_trend() {
        let fields: Vec<_> = [17, 33]
            .iter()
            .map(|&n| MappingField::from_fn(&grid(1.0, 2.0, n, 4 * n), nitsche).unwrap())
            .collect();
        let r = regularity_report(&fields[1], &Metric::euclidean(ann(1.0, 1.25)), Complex64::new(-0.25, 0.0), 0.5).unwrap();
        assert_eq!(r.beta, 0.5);
        assert_relative_eq!(r.sup_modulus, 1.25, max_relative = 1e-12);
        assert!(r.to_json().contains("\"k_prime\""));
        let t = RefinementTrend::of(&fields).unwrap();
        let (li, lb, h) = t.relative_variation();
        assert!(li < 0.15 && lb < 0.15 && h < 0.15, "{li} {lb} {h}");
        assert_eq!(t.to_csv().lines().count(), 3);
    }
}
