//! Radial densities given as tables, interpolated with monotone piecewise
//! cubic Hermite splines (Fritsch–Carlson slopes).

use std::path::Path;

use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq)]
pub struct SampledProfile {
    radii: Vec<f64>,
    values: Vec<f64>,
    slopes: Vec<f64>,
}

impl SampledProfile {
    pub fn new(radii: Vec<f64>, values: Vec<f64>) -> Result<Self> {
        const OP: &str = "metric::SampledProfile::new";
        if radii.len() != values.len() || radii.len() < 2 {
            return Err(Error::config(OP, "need at least two (radius, density) pairs"));
        }
        if radii.windows(2).any(|w| !(w[1] > w[0])) || radii[0] <= 0.0 {
            return Err(Error::config(OP, "radii must be positive and strictly increasing"));
        }
        if values.iter().any(|v| !(v.is_finite() && *v > 0.0)) {
            return Err(Error::config(OP, "densities must be finite and strictly positive"));
        }
        let slopes = pchip_slopes(&radii, &values);
        Ok(Self { radii, values, slopes })
    }

    pub fn from_pairs(pairs: &[(f64, f64)]) -> Result<Self> {
        Self::new(pairs.iter().map(|p| p.0).collect(), pairs.iter().map(|p| p.1).collect())
    }

    /// Loads a two-column `radius,density` CSV. A non-numeric first row is
    /// treated as a header.
    pub fn from_csv(path: &Path) -> Result<Self> {
        const OP: &str = "metric::SampledProfile::from_csv";
        let text = std::fs::read_to_string(path).map_err(|source| Error::Io { op: OP, source })?;
        Self::from_csv_str(&text)
    }

    pub fn from_csv_str(text: &str) -> Result<Self> {
        const OP: &str = "metric::SampledProfile::from_csv";
        let mut reader = csv::ReaderBuilder::new()
            .has_headers(false)
            .trim(csv::Trim::All)
            .comment(Some(b'#'))
            .from_reader(text.as_bytes());
        let mut pairs = Vec::new();
        for (row, rec) in reader.records().enumerate() {
            let rec = rec.map_err(|e| Error::parse(OP, e.to_string()))?;
            if rec.len() < 2 {
                return Err(Error::parse(OP, format!("row {row}: expected two columns")));
            }
            match (rec[0].parse::<f64>(), rec[1].parse::<f64>()) {
                (Ok(r), Ok(d)) => pairs.push((r, d)),
                _ if row == 0 => continue,
                _ => return Err(Error::parse(OP, format!("row {row}: non-numeric entry"))),
            }
        }
        Self::from_pairs(&pairs)
    }

    pub fn radii(&self) -> &[f64] {
        &self.radii
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn min_radius(&self) -> f64 {
        self.radii[0]
    }

    pub fn max_radius(&self) -> f64 {
        *self.radii.last().unwrap()
    }

    fn interval(&self, s: f64) -> usize {
        match self.radii.partition_point(|&r| r <= s) {
            0 => 0,
            i if i >= self.radii.len() => self.radii.len() - 2,
            i => i - 1,
        }
    }

    /// Half the table spacing around `s`, used as finite-difference step.
    pub fn local_half_spacing(&self, s: f64) -> f64 {
        let i = self.interval(s);
        0.5 * (self.radii[i + 1] - self.radii[i])
    }

    /// Interpolated value and derivative at `s`; `s` is clamped to the table.
    pub fn eval(&self, s: f64) -> (f64, f64) {
        let s = s.clamp(self.min_radius(), self.max_radius());
        let i = self.interval(s);
        let h = self.radii[i + 1] - self.radii[i];
        let t = (s - self.radii[i]) / h;
        let (y0, y1) = (self.values[i], self.values[i + 1]);
        let (d0, d1) = (self.slopes[i] * h, self.slopes[i + 1] * h);
        let t2 = t * t;
        let t3 = t2 * t;
        let value = (2.0 * t3 - 3.0 * t2 + 1.0) * y0
            + (t3 - 2.0 * t2 + t) * d0
            + (-2.0 * t3 + 3.0 * t2) * y1
            + (t3 - t2) * d1;
        let deriv = ((6.0 * t2 - 6.0 * t) * y0
            + (3.0 * t2 - 4.0 * t + 1.0) * d0
            + (-6.0 * t2 + 6.0 * t) * y1
            + (3.0 * t2 - 2.0 * t) * d1)
            / h;
        (value, deriv)
    }
}

fn pchip_slopes(x: &[f64], y: &[f64]) -> Vec<f64> {
    let n = x.len();
    let h: Vec<f64> = x.windows(2).map(|w| w[1] - w[0]).collect();
    let delta: Vec<f64> = (0..n - 1).map(|i| (y[i + 1] - y[i]) / h[i]).collect();
    if n == 2 {
        return vec![delta[0]; 2];
    }
    let mut d = vec![0.0; n];
    for i in 1..n - 1 {
        if delta[i - 1] * delta[i] > 0.0 {
            let w1 = 2.0 * h[i] + h[i - 1];
            let w2 = h[i] + 2.0 * h[i - 1];
            d[i] = (w1 + w2) / (w1 / delta[i - 1] + w2 / delta[i]);
        }
    }
    d[0] = edge_slope(h[0], h[1], delta[0], delta[1]);
    d[n - 1] = edge_slope(h[n - 2], h[n - 3], delta[n - 2], delta[n - 3]);
    d
}

// Non-centred three-point end slope, limited to keep the end interval monotone.
fn edge_slope(h0: f64, h1: f64, m0: f64, m1: f64) -> f64 {
    let d = ((2.0 * h0 + h1) * m0 - h0 * m1) / (h0 + h1);
    if d.signum() != m0.signum() {
        0.0
    } else if m0.signum() != m1.signum() && d.abs() > 3.0 * m0.abs() {
        3.0 * m0
    } else {
        d
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn interpolates_nodes_and_preserves_monotonicity() {
        let radii: Vec<f64> = (0..12).map(|i| 1.0 + 0.1 * i as f64).collect();
        let values: Vec<f64> = radii.iter().map(|r| 1.0 / (r * r)).collect();
        let p = SampledProfile::new(radii.clone(), values.clone()).unwrap();
        for (r, v) in radii.iter().zip(&values) {
            assert!((p.eval(*r).0 - v).abs() < 1e-14);
        }
        let mut prev = f64::INFINITY;
        for i in 0..=1000 {
            let s = 1.0 + 1.1 * i as f64 / 1000.0;
            let (v, d) = p.eval(s);
            assert!(v > 0.0 && v <= prev + 1e-15 && d <= 1e-12);
            prev = v;
            assert!((v - 1.0 / (s * s)).abs() < 2e-3);
        }
    }

    #[test]
    fn derivative_matches_finite_difference() {
        let p = SampledProfile::from_pairs(&[(1.0, 1.0), (1.5, 0.8), (2.0, 0.7), (3.0, 0.2)]).unwrap();
        for s in [1.1, 1.6, 2.4, 2.9] {
            let h = 1e-6;
            let fd = (p.eval(s + h).0 - p.eval(s - h).0) / (2.0 * h);
            assert!((fd - p.eval(s).1).abs() < 1e-6);
        }
    }

    #[test]
    fn rejects_bad_tables() {
        assert!(SampledProfile::from_pairs(&[(1.0, 1.0)]).is_err());
        assert!(SampledProfile::from_pairs(&[(1.0, 1.0), (1.0, 2.0)]).is_err());
        assert!(SampledProfile::from_pairs(&[(1.0, 1.0), (2.0, 0.0)]).is_err());
    }

    #[test]
    fn csv_with_header() {
        let p = SampledProfile::from_csv_str("radius,density\n1,1\n2,0.5\n3,0.25\n").unwrap();
        assert_eq!(p.radii(), &[1.0, 2.0, 3.0]);
        assert!(SampledProfile::from_csv_str("1,1\nx,2\n").is_err());
    }
}
