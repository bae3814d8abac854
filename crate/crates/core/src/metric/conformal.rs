use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::Annulus;

/// Closed-form conformal self-maps of annuli. A `Composition` applies its
/// members left to right.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ConformalMap {
    /// `w ↦ e^{iθ} w`
    Rotation(f64),
    /// `w ↦ λ w`, `λ > 0`
    Scaling(f64),
    /// `w ↦ ρ / w`, `ρ > 0`; swaps the boundary circles of `A(a, ρ/a)`.
    Inversion(f64),
    Composition(Vec<ConformalMap>),
}

impl ConformalMap {
    pub fn validate(&self) -> Result<()> {
        match self {
            ConformalMap::Rotation(t) if t.is_finite() => Ok(()),
            ConformalMap::Scaling(l) | ConformalMap::Inversion(l) if l.is_finite() && *l > 0.0 => Ok(()),
            ConformalMap::Composition(ms) => ms.iter().try_for_each(|m| m.validate()),
            other => Err(Error::config("metric::ConformalMap::validate", format!("invalid parameter in {other:?}"))),
        }
    }

    pub fn apply(&self, w: Complex64) -> Complex64 {
        match self {
            ConformalMap::Rotation(t) => w * Complex64::from_polar(1.0, *t),
            ConformalMap::Scaling(l) => w * *l,
            ConformalMap::Inversion(r) => *r / w,
            ConformalMap::Composition(ms) => ms.iter().fold(w, |acc, m| m.apply(acc)),
        }
    }

    pub fn inverse(&self) -> ConformalMap {
        match self {
            ConformalMap::Rotation(t) => ConformalMap::Rotation(-t),
            ConformalMap::Scaling(l) => ConformalMap::Scaling(1.0 / l),
            ConformalMap::Inversion(r) => ConformalMap::Inversion(*r),
            ConformalMap::Composition(ms) => ConformalMap::Composition(ms.iter().rev().map(|m| m.inverse()).collect()),
        }
    }

    pub fn apply_inverse(&self, w: Complex64) -> Complex64 {
        self.inverse().apply(w)
    }

    /// Complex derivative `b'(w)`.
    pub fn derivative(&self, w: Complex64) -> Complex64 {
        match self {
            ConformalMap::Rotation(t) => Complex64::from_polar(1.0, *t),
            ConformalMap::Scaling(l) => Complex64::new(*l, 0.0),
            ConformalMap::Inversion(r) => -*r / (w * w),
            ConformalMap::Composition(ms) => {
                let mut d = Complex64::new(1.0, 0.0);
                let mut x = w;
                for m in ms {
                    d *= m.derivative(x);
                    x = m.apply(x);
                }
                d
            }
        }
    }

    /// `b''(w) / b'(w)`, the derivative of `log b'`.
    pub fn log_derivative_slope(&self, w: Complex64) -> Complex64 {
        match self {
            ConformalMap::Rotation(_) | ConformalMap::Scaling(_) => Complex64::new(0.0, 0.0),
            ConformalMap::Inversion(_) => -2.0 / w,
            ConformalMap::Composition(ms) => {
                let mut total = Complex64::new(0.0, 0.0);
                let mut chain = Complex64::new(1.0, 0.0);
                let mut x = w;
                for m in ms {
                    total += m.log_derivative_slope(x) * chain;
                    chain *= m.derivative(x);
                    x = m.apply(x);
                }
                total
            }
        }
    }

    /// Image of an annulus centred at the origin.
    pub fn image_annulus(&self, a: &Annulus) -> Result<Annulus> {
        match self {
            ConformalMap::Rotation(_) => Ok(*a),
            ConformalMap::Scaling(l) => Annulus::new(a.inner() * l, a.outer() * l),
            ConformalMap::Inversion(r) => Annulus::new(r / a.outer(), r / a.inner()),
            ConformalMap::Composition(ms) => ms.iter().try_fold(*a, |acc, m| m.image_annulus(&acc)),
        }
    }

    pub fn preimage_annulus(&self, a: &Annulus) -> Result<Annulus> {
        self.inverse().image_annulus(a)
    }

    /// Whether the map exchanges the inner and outer boundary circles.
    pub fn swaps_boundaries(&self) -> bool {
        match self {
            ConformalMap::Rotation(_) | ConformalMap::Scaling(_) => false,
            ConformalMap::Inversion(_) => true,
            ConformalMap::Composition(ms) => ms.iter().filter(|m| m.swaps_boundaries()).count() % 2 == 1,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn catalog() -> Vec<ConformalMap> {
        vec![
            ConformalMap::Rotation(0.7),
            ConformalMap::Scaling(3.0),
            ConformalMap::Inversion(2.0),
            ConformalMap::Composition(vec![
                ConformalMap::Inversion(1.5),
                ConformalMap::Rotation(-1.1),
                ConformalMap::Scaling(0.4),
            ]),
        ]
    }

    #[test]
    fn inverse_round_trip_and_nonvanishing_derivative() {
        let a = Annulus::new(1.0, 2.0).unwrap();
        for m in catalog() {
            for i in 0..50 {
                let s = 1.0 + i as f64 / 49.0;
                let w = Complex64::from_polar(s, 0.37 * i as f64);
                let back = m.apply_inverse(m.apply(w));
                assert!((back - w).norm() < 1e-13 * s, "{m:?}");
                assert!(m.derivative(w).norm() > 0.0);
                assert!(m.image_annulus(&a).unwrap().contains_closed(m.apply(w), 1e-12));
            }
        }
    }

    #[test]
    fn derivatives_match_finite_differences() {
        let w = Complex64::new(1.2, 0.5);
        let h = 1e-5;
        for m in catalog() {
            let fd = (m.apply(w + h) - m.apply(w - h)) / (2.0 * h);
            assert!((fd - m.derivative(w)).norm() < 1e-8);
            let fd2 = (m.derivative(w + h) - m.derivative(w - h)) / (2.0 * h);
            let slope = fd2 / m.derivative(w);
            assert!((slope - m.log_derivative_slope(w)).norm() < 1e-7, "{m:?}");
        }
    }

    #[test]
    fn invalid_parameters_rejected() {
        assert!(ConformalMap::Scaling(0.0).validate().is_err());
        assert!(ConformalMap::Composition(vec![ConformalMap::Inversion(-1.0)]).validate().is_err());
    }
}
