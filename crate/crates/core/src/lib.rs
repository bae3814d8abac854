//! Energy-minimal mappings between circular annuli carrying conformal metrics.
//!
//! The crate discretizes maps `F: A(a, b) → A(c, d)` on a log-polar grid,
//! evaluates the `℘`-Dirichlet energy and its decomposition, minimizes it by
//! projected gradient descent, and audits the result: Hopf differential
//! constancy, the harmonic-map residual, reflection across the boundary
//! circles, quasiconformal constants and discrete Lipschitz bounds. A radial
//! shooting solver provides independent closed-form-quality oracles, including
//! the non-injective "hammered" minimizer.

pub mod energy;
pub mod error;
pub mod field_io;
pub mod grid;
pub mod hopf;
pub mod metric;
pub mod minimizer;
pub mod radial;
pub mod reflection;
pub mod regularity;

pub use energy::{energy, EnergyBreakdown};
pub use error::{Error, Result};
pub use num_complex::Complex64;
pub use grid::{modulus, Annulus, LogPolarGrid, MappingField, Orientation};
pub use metric::{admissibility, metric_area, pullback, ConformalMap, Metric, MetricKind};
