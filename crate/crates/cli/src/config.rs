//! Run configuration: a flat TOML table whose keys double as `--key value`
//! command line overrides, plus the metric spec mini-language.

use std::path::{Path, PathBuf};

use clap::{Args, ValueEnum};
use nitsche_core::metric::SampledProfile;
use nitsche_core::minimizer::{BoundaryCorrespondence, Initialization, MinimizeConfig};
use nitsche_core::{Annulus, Metric, MetricKind};
use serde::{Deserialize, Serialize};

use crate::error::CliError;

/// Environment variable naming the default output directory.
pub const OUTPUT_ENV: &str = "NITSCHE_OUT";
const DEFAULT_OUTPUT: &str = "nitsche-out";

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum Audit {
    Hopf,
    Deformation,
    Reflection,
    Regularity,
    InnerVariation,
}

impl Audit {
    pub const ALL: [Audit; 5] = [Audit::Hopf, Audit::Deformation, Audit::Reflection, Audit::Regularity, Audit::InnerVariation];
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub domain_inner: f64,
    pub domain_outer: f64,
    pub target_inner: f64,
    pub target_outer: f64,
    /// Metric spec, see [`parse_metric`].
    pub metric: String,
    pub n_s: usize,
    pub n_t: usize,
    /// Number of dyadic grid levels ending at `n_s × n_t`; 1 runs the final grid only.
    pub cascade_levels: usize,
    pub max_iterations: usize,
    pub gradient_tolerance: f64,
    pub initial_step: f64,
    pub backtracking: f64,
    pub sufficient_decrease: f64,
    pub projection_tolerance: f64,
    pub initialization: Initialization,
    pub correspondence: BoundaryCorrespondence,
    pub audits: Vec<Audit>,
    /// `d` of the Hölder bound; defaults to `1 - 1/R`, the distance from the
    /// domain to the boundary of its reflected extension.
    pub regularity_distance: Option<f64>,
    /// Not part of the numeric input, so it is left out of reports.
    #[serde(skip_serializing)]
    pub output_dir: Option<PathBuf>,
}

impl Default for RunConfig {
    fn default() -> Self {
        let m = MinimizeConfig::default();
        Self {
            domain_inner: 1.0,
            domain_outer: 2.0,
            target_inner: 1.0,
            target_outer: 2.0,
            metric: "euclidean".into(),
            n_s: m.n_s,
            n_t: m.n_t,
            cascade_levels: 1,
            max_iterations: m.max_iterations,
            gradient_tolerance: m.gradient_tolerance,
            initial_step: m.initial_step,
            backtracking: m.backtracking,
            sufficient_decrease: m.sufficient_decrease,
            projection_tolerance: m.projection_tolerance,
            initialization: m.initialization,
            correspondence: m.correspondence,
            audits: Audit::ALL.to_vec(),
            regularity_distance: None,
            output_dir: None,
        }
    }
}

/// Command line overrides; each flag mirrors the config key of the same name.
#[derive(Args, Clone, Debug, Default)]
pub struct Overrides {
    #[arg(long, alias = "domain_inner")]
    pub domain_inner: Option<f64>,
    #[arg(long, alias = "domain_outer")]
    pub domain_outer: Option<f64>,
    #[arg(long, alias = "target_inner")]
    pub target_inner: Option<f64>,
    #[arg(long, alias = "target_outer")]
    pub target_outer: Option<f64>,
    #[arg(long)]
    pub metric: Option<String>,
    #[arg(long, alias = "n_s")]
    pub n_s: Option<usize>,
    #[arg(long, alias = "n_t")]
    pub n_t: Option<usize>,
    #[arg(long, alias = "cascade_levels")]
    pub cascade_levels: Option<usize>,
    #[arg(long, alias = "max_iterations")]
    pub max_iterations: Option<usize>,
    #[arg(long, alias = "gradient_tolerance")]
    pub gradient_tolerance: Option<f64>,
    #[arg(long, alias = "initial_step")]
    pub initial_step: Option<f64>,
    #[arg(long)]
    pub backtracking: Option<f64>,
    #[arg(long, alias = "sufficient_decrease")]
    pub sufficient_decrease: Option<f64>,
    #[arg(long, alias = "projection_tolerance")]
    pub projection_tolerance: Option<f64>,
    #[arg(long, value_parser = parse_initialization)]
    pub initialization: Option<Initialization>,
    #[arg(long, value_parser = parse_correspondence)]
    pub correspondence: Option<BoundaryCorrespondence>,
    #[arg(long, value_enum, value_delimiter = ',')]
    pub audits: Option<Vec<Audit>>,
    #[arg(long, alias = "regularity_distance")]
    pub regularity_distance: Option<f64>,
    #[arg(long, alias = "output_dir")]
    pub output_dir: Option<PathBuf>,
}

fn parse_initialization(s: &str) -> Result<Initialization, String> {
    match s {
        "radial-linear" => Ok(Initialization::RadialLinear),
        "radial-oracle" => Ok(Initialization::RadialOracle),
        _ => Err(format!("expected radial-linear or radial-oracle, got {s}")),
    }
}

fn parse_correspondence(s: &str) -> Result<BoundaryCorrespondence, String> {
    match s {
        "inner-to-inner" => Ok(BoundaryCorrespondence::InnerToInner),
        "inner-to-outer" => Ok(BoundaryCorrespondence::InnerToOuter),
        _ => Err(format!("expected inner-to-inner or inner-to-outer, got {s}")),
    }
}

macro_rules! apply {
    ($cfg:ident, $o:ident, $($field:ident),*) => {
        $(if let Some(v) = $o.$field.clone() { $cfg.$field = v; })*
    };
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
        toml::from_str(&text).map_err(|e| CliError::config("config", format!("{}: {}", path.display(), e.message())))
    }

    pub fn apply(&mut self, o: &Overrides) {
        apply!(
            self,
            o,
            domain_inner,
            domain_outer,
            target_inner,
            target_outer,
            metric,
            n_s,
            n_t,
            cascade_levels,
            max_iterations,
            gradient_tolerance,
            initial_step,
            backtracking,
            sufficient_decrease,
            projection_tolerance,
            initialization,
            correspondence,
            audits
        );
        if o.regularity_distance.is_some() {
            self.regularity_distance = o.regularity_distance;
        }
        if o.output_dir.is_some() {
            self.output_dir = o.output_dir.clone();
        }
    }

    pub fn domain(&self) -> Result<Annulus, CliError> {
        annulus("domain_inner", "domain_outer", self.domain_inner, self.domain_outer)
    }

    pub fn target(&self) -> Result<Annulus, CliError> {
        annulus("target_inner", "target_outer", self.target_inner, self.target_outer)
    }

    /// Checks every field against the bounds the library enforces, naming the
    /// offending key.
    pub fn validate(&self) -> Result<(), CliError> {
        self.domain()?;
        self.target()?;
        if self.n_s < 3 {
            return Err(CliError::config("n_s", "must be at least 3"));
        }
        if self.n_t < 8 {
            return Err(CliError::config("n_t", "must be at least 8"));
        }
        if self.cascade_levels == 0 {
            return Err(CliError::config("cascade_levels", "must be at least 1"));
        }
        let shrink = 1usize << (self.cascade_levels - 1);
        if (self.n_s - 1) % shrink != 0 || self.n_t % shrink != 0 || (self.n_s - 1) / shrink < 2 || self.n_t / shrink < 8 {
            return Err(CliError::config(
                "cascade_levels",
                format!("{} levels do not divide the {}x{} grid into valid coarser grids", self.cascade_levels, self.n_s, self.n_t),
            ));
        }
        if self.initialization == Initialization::Provided {
            return Err(CliError::config("initialization", "provided fields are not available from a config file"));
        }
        if let Some(d) = self.regularity_distance {
            if !(d > 0.0 && d.is_finite()) {
                return Err(CliError::config("regularity_distance", "must be positive"));
            }
        }
        parse_metric(&self.metric, self.target()?)?;
        self.minimize_config().validate().map_err(|e| CliError::config("minimizer", e.to_string()))?;
        Ok(())
    }

    pub fn minimize_config(&self) -> MinimizeConfig {
        MinimizeConfig {
            n_s: self.n_s,
            n_t: self.n_t,
            max_iterations: self.max_iterations,
            gradient_tolerance: self.gradient_tolerance,
            initial_step: self.initial_step,
            backtracking: self.backtracking,
            sufficient_decrease: self.sufficient_decrease,
            projection_tolerance: self.projection_tolerance,
            initialization: self.initialization,
            correspondence: self.correspondence,
            initial_field: None,
        }
    }

    /// Grid sizes from coarsest to finest.
    pub fn levels(&self) -> Vec<(usize, usize)> {
        (0..self.cascade_levels)
            .rev()
            .map(|l| ((self.n_s - 1) / (1 << l) + 1, self.n_t / (1 << l)))
            .collect()
    }

    pub fn output_dir(&self) -> PathBuf {
        output_dir(self.output_dir.as_deref())
    }
}

pub fn output_dir(explicit: Option<&Path>) -> PathBuf {
    explicit
        .map(Path::to_path_buf)
        .or_else(|| std::env::var_os(OUTPUT_ENV).map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from(DEFAULT_OUTPUT))
}

fn annulus(inner_key: &'static str, outer_key: &'static str, inner: f64, outer: f64) -> Result<Annulus, CliError> {
    if !(inner.is_finite() && inner > 0.0) {
        return Err(CliError::config(inner_key, format!("must be positive and finite, got {inner}")));
    }
    if !(outer.is_finite() && outer > inner) {
        return Err(CliError::config(inner_key, format!("must be below {outer_key} ({inner} >= {outer})")));
    }
    Annulus::new(inner, outer).map_err(CliError::Core)
}

/// Parses `a,b` into an annulus.
pub fn parse_annulus(key: &'static str, s: &str) -> Result<Annulus, CliError> {
    let (a, b) = s.split_once(',').ok_or_else(|| CliError::config(key, format!("expected `inner,outer`, got {s}")))?;
    let num = |x: &str| x.trim().parse::<f64>().map_err(|e| CliError::config(key, format!("{x}: {e}")));
    let (a, b) = (num(a)?, num(b)?);
    if !(a > 0.0 && b > a && b.is_finite()) {
        return Err(CliError::config(key, format!("need 0 < inner < outer, got {a},{b}")));
    }
    Annulus::new(a, b).map_err(CliError::Core)
}

/// Metric specs: `euclidean`, `inverse-square`, `radial-power:<exponent>`,
/// `spherical-like`, `hyperbolic-like`, `sampled:<csv path>`.
pub fn parse_metric(spec: &str, domain: Annulus) -> Result<Metric, CliError> {
    let (kind, arg) = match spec.split_once(':') {
        Some((k, a)) => (k.trim(), Some(a.trim())),
        None => (spec.trim(), None),
    };
    let kind = match (kind, arg) {
        ("euclidean", None) => MetricKind::Euclidean,
        ("inverse-square", None) => MetricKind::RadialPower { exponent: -2.0 },
        ("radial-power", Some(e)) => MetricKind::RadialPower {
            exponent: e.parse().map_err(|_| CliError::config("metric", format!("bad exponent `{e}`")))?,
        },
        ("spherical-like", None) => MetricKind::SphericalLike,
        ("hyperbolic-like", None) => MetricKind::HyperbolicLike,
        ("sampled" | "radial-sampled", Some(path)) => {
            let path = Path::new(path);
            if !path.exists() {
                return Err(CliError::config("metric", format!("density table {} does not exist", path.display())));
            }
            MetricKind::RadialSampled(SampledProfile::from_csv(path)?)
        }
        _ => return Err(CliError::config("metric", format!("unknown metric spec `{spec}`"))),
    };
    Ok(Metric::new(kind, domain)?)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn toml_round_trip_and_overrides() {
        let mut c: RunConfig = toml::from_str("n_s = 33\nmetric = \"inverse-square\"\naudits = [\"hopf\", \"inner-variation\"]\n").unwrap();
        assert_eq!(c.n_s, 33);
        assert_eq!(c.audits, vec![Audit::Hopf, Audit::InnerVariation]);
        c.apply(&Overrides { n_t: Some(64), ..Default::default() });
        assert_eq!((c.n_s, c.n_t), (33, 64));
        assert!(toml::from_str::<RunConfig>("bogus = 1").is_err());
    }

    #[test]
    fn validation_names_the_field() {
        let c = RunConfig { target_inner: 2.0, target_outer: 1.5, ..Default::default() };
        let e = c.validate().unwrap_err();
        assert!(e.to_string().contains("target_inner"), "{e}");
        assert_eq!(e.exit_code(), 2);
        let c = RunConfig { n_s: 65, n_t: 256, cascade_levels: 3, ..Default::default() };
        assert_eq!(c.levels(), vec![(17, 64), (33, 128), (65, 256)]);
        assert!(RunConfig { n_s: 64, cascade_levels: 2, ..Default::default() }.validate().is_err());
    }

    #[test]
    fn metric_specs() {
        let a = Annulus::new(1.0, 2.0).unwrap();
        assert_eq!(parse_metric("euclidean", a).unwrap().kind(), &MetricKind::Euclidean);
        assert_eq!(parse_metric("radial-power:-2", a).unwrap().kind(), &MetricKind::RadialPower { exponent: -2.0 });
        assert!(parse_metric("nope", a).is_err());
        assert!(parse_metric("sampled:/no/such/file.csv", a).is_err());
        assert_eq!(parse_annulus("annulus", "0.2, 0.8").unwrap().outer(), 0.8);
    }
}
