//! minimize → audit → reflect → report, and the stand-alone audits behind the
//! `verify` and `reflect` subcommands.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::time::Instant;

use nitsche_core::energy::{deformation_diagnostics, DeformationReport};
use nitsche_core::field_io::{write_field_csv, write_field_json};
use nitsche_core::hopf::{fit_hopf_constant, flow_catalog, hopf_field, inner_variation_derivative, Flow, HopfReport};
use nitsche_core::minimizer::{minimize_cascade, BoundaryCorrespondence, RunReport};
use nitsche_core::reflection::{extend_map, verify_extended_hopf, ExtendedHopfReport};
use nitsche_core::regularity::{regularity_report, RefinementTrend, RegularityReport};
use nitsche_core::{energy, Annulus, EnergyBreakdown, MappingField, Metric};
use serde::{Deserialize, Serialize};

use crate::config::{parse_metric, Audit, RunConfig};
use crate::error::CliError;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct InnerVariation {
    pub flow: Flow,
    pub derivative: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ReflectionAudit {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub report: Option<ExtendedHopfReport>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub skipped: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub double_reflection_error: Option<f64>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct AuditReports {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub hopf: Option<HopfReport>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub deformation: Option<DeformationReport>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub inner_variation: Option<Vec<InnerVariation>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub reflection: Option<ReflectionAudit>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub regularity: Option<RegularityReport>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LevelSummary {
    pub n_s: usize,
    pub n_t: usize,
    pub energy: f64,
    pub iterations: usize,
    pub converged: bool,
    pub c_fit: f64,
}

/// Everything a run computes. Deterministic: identical configs give identical JSON.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct PipelineReport {
    pub config: RunConfig,
    pub levels: Vec<LevelSummary>,
    pub run: RunReport,
    pub audits: AuditReports,
}

impl PipelineReport {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report is plain data")
    }
}

#[derive(Clone, Debug, Default, Serialize, Deserialize)]
pub struct Timings {
    pub level_seconds: Vec<f64>,
    pub audit_seconds: f64,
    pub total_seconds: f64,
}

pub struct RunOutput {
    pub report: PipelineReport,
    pub timings: Timings,
    pub field: MappingField,
}

pub fn run(cfg: &RunConfig) -> Result<RunOutput, CliError> {
    let started = Instant::now();
    cfg.validate()?;
    let domain = cfg.domain()?;
    let target = cfg.target()?;
    let metric = parse_metric(&cfg.metric, target)?;
    let mcfg = cfg.minimize_config();
    let results = minimize_cascade(&domain, &target, &metric, &mcfg, &cfg.levels())?;
    let last = results.last().expect("at least one level");
    if !last.energy.total.is_finite() {
        return Err(CliError::NonFinite(format!("energy {}", last.energy.total)));
    }
    let audit_start = Instant::now();
    let field = last.field.clone();
    let c = last.hopf.constant();
    let mut audits = AuditReports::default();
    for audit in &cfg.audits {
        match audit {
            Audit::Hopf => audits.hopf = Some(last.hopf.clone()),
            Audit::Deformation => audits.deformation = Some(last.diagnostics.clone()),
            Audit::InnerVariation => {
                let mut out = Vec::new();
                for flow in flow_catalog() {
                    out.push(InnerVariation { flow, derivative: inner_variation_derivative(&field, &metric, &flow)? });
                }
                audits.inner_variation = Some(out);
            }
            Audit::Reflection => {
                audits.reflection = Some(if domain.inner() != 1.0 || target.inner() != 1.0 {
                    skipped("reflection needs domain and target of the form A(1, R), A(1, rho)")
                } else if cfg.correspondence != BoundaryCorrespondence::InnerToInner {
                    skipped("reflection needs the inner circle mapped to the inner circle")
                } else {
                    let ext = extend_map(&field, target.outer())?;
                    ReflectionAudit {
                        report: Some(verify_extended_hopf(&ext, &metric, c)?),
                        skipped: None,
                        double_reflection_error: Some(ext.double_reflection_error()),
                    }
                });
            }
            Audit::Regularity => {
                let d = cfg.regularity_distance.unwrap_or(1.0 - domain.inner() / domain.outer());
                let mut r = regularity_report(&field, &metric, c, d)?;
                if results.len() > 1 {
                    let fields: Vec<_> = results.iter().map(|r| r.field.clone()).collect();
                    r.refinement = Some(RefinementTrend::of(&fields)?);
                }
                audits.regularity = Some(r);
            }
        }
    }
    let levels = results
        .iter()
        .map(|r| LevelSummary {
            n_s: r.field.grid().n_s(),
            n_t: r.field.grid().n_t(),
            energy: r.energy.total,
            iterations: r.iterations,
            converged: r.converged,
            c_fit: r.hopf.c_fit,
        })
        .collect();
    let report = PipelineReport { config: cfg.clone(), levels, run: RunReport::new(&domain, &target, &metric, &mcfg, last), audits };
    let timings = Timings {
        level_seconds: results.iter().map(|r| r.elapsed_seconds).collect(),
        audit_seconds: audit_start.elapsed().as_secs_f64(),
        total_seconds: started.elapsed().as_secs_f64(),
    };
    Ok(RunOutput { report, timings, field })
}

fn skipped(reason: &str) -> ReflectionAudit {
    ReflectionAudit { report: None, skipped: Some(reason.into()), double_reflection_error: None }
}

pub fn write_text(path: &Path, text: &str) -> Result<(), CliError> {
    std::fs::write(path, text).map_err(|e| CliError::io(path, e))
}

pub fn ensure_dir(dir: &Path) -> Result<(), CliError> {
    std::fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))
}

/// Writes the field dumps, Hopf samples, extended field and reports into `dir`.
pub fn write_outputs(dir: &Path, out: &RunOutput, metric: &Metric) -> Result<Vec<PathBuf>, CliError> {
    ensure_dir(dir)?;
    let mut written = Vec::new();
    let path = dir.join("field.csv");
    write_field_csv(&path, &out.field, None)?;
    written.push(path);
    let path = dir.join("field.json");
    write_field_json(&path, &out.field, None)?;
    written.push(path);
    if out.report.audits.hopf.is_some() {
        let path = dir.join("hopf.csv");
        write_text(&path, &hopf_field(&out.field, metric)?.to_csv(out.field.grid()))?;
        written.push(path);
    }
    if out.report.audits.reflection.as_ref().is_some_and(|r| r.report.is_some()) {
        let ext = extend_map(&out.field, out.report.run.target.outer())?;
        let path = dir.join("extended_field.csv");
        write_text(&path, &ext.to_csv())?;
        written.push(path);
    }
    if let Some(trend) = out.report.audits.regularity.as_ref().and_then(|r| r.refinement.as_ref()) {
        let path = dir.join("regularity_trend.csv");
        write_text(&path, &trend.to_csv())?;
        written.push(path);
    }
    let path = dir.join("run_report.json");
    write_text(&path, &out.report.to_json())?;
    written.push(path);
    let path = dir.join("timings.json");
    write_text(&path, &serde_json::to_string_pretty(&out.timings).expect("timings serialize"))?;
    written.push(path);
    Ok(written)
}

fn row(out: &mut String, key: &str, value: impl std::fmt::Display) {
    let _ = writeln!(out, "{key:<28}{value}");
}

fn annulus_text(a: &Annulus) -> String {
    format!("A({}, {})", a.inner(), a.outer())
}

pub fn summary(report: &PipelineReport) -> String {
    let mut s = String::new();
    let r = &report.run;
    row(&mut s, "metric", &r.metric);
    row(&mut s, "domain", annulus_text(&r.domain));
    row(&mut s, "target", annulus_text(&r.target));
    row(&mut s, "grid", format!("{} x {}", r.config.n_s, r.config.n_t));
    for l in &report.levels {
        row(&mut s, &format!("level {}x{}", l.n_s, l.n_t), format!("E={:.10} it={} converged={} c={:.6}", l.energy, l.iterations, l.converged, l.c_fit));
    }
    energy_rows(&mut s, &r.energy);
    row(&mut s, "iterations", r.iterations);
    row(&mut s, "converged", r.converged);
    row(&mut s, "projected gradient rms", format!("{:.3e} (threshold {:.3e})", r.projected_gradient_rms, r.gradient_threshold));
    let a = &report.audits;
    if let Some(h) = &a.hopf {
        hopf_rows(&mut s, h);
    }
    if let Some(d) = &a.deformation {
        deformation_rows(&mut s, d);
    }
    if let Some(iv) = &a.inner_variation {
        let worst = iv.iter().map(|v| v.derivative.abs()).fold(0.0, f64::max);
        row(&mut s, "inner variation max |dE/dt|", format!("{worst:.3e} over {} flows", iv.len()));
    }
    if let Some(refl) = &a.reflection {
        match (&refl.report, &refl.skipped) {
            (Some(x), _) => reflection_rows(&mut s, x),
            (None, Some(why)) => row(&mut s, "reflection", format!("skipped: {why}")),
            _ => {}
        }
    }
    if let Some(reg) = &a.regularity {
        regularity_rows(&mut s, reg);
    }
    s
}

pub fn energy_rows(s: &mut String, e: &EnergyBreakdown) {
    row(s, "energy", format!("{:.12}", e.total));
    row(s, "jacobian part", format!("{:.12}", e.jacobian_part));
    row(s, "antiholomorphic part", format!("{:.12}", e.antiholomorphic_part));
    row(s, "lower bound 2A", format!("{:.12}", e.lower_bound));
}

pub fn hopf_rows(s: &mut String, h: &HopfReport) {
    row(s, "hopf constant c", format!("{:.9} {:+.3e}i", h.c_fit, h.c_fit_imag));
    row(s, "hopf residual rms/max", format!("{:.3e} / {:.3e}", h.residual_rms, h.residual_max));
    row(s, "harmonic residual rms", format!("{:.3e}", h.harmonic_residual_rms));
}

pub fn deformation_rows(s: &mut String, d: &DeformationReport) {
    row(s, "jacobian min/max", format!("{:.6} / {:.6}", d.min_jacobian, d.max_jacobian));
    row(s, "negative jacobian fraction", d.negative_fraction);
    row(s, "area condition", format!("{} ({:.9} <= {:.9})", d.area_condition_holds, d.pulled_back_area, d.target_area));
}

pub fn reflection_rows(s: &mut String, r: &ExtendedHopfReport) {
    for b in &r.bands {
        row(s, &format!("reflected {} band", b.band.label()), format!("rms {:.3e} max {:.3e}", b.rms, b.max));
    }
    row(s, "reflected hopf sup/bound", format!("{:.6} / {:.6}", r.hopf_sup, r.hopf_bound));
    for j in &r.junctions {
        row(s, &format!("junction |z|={}", j.radius), format!("value {:.3e} slope {:.3e}", j.value_gap, j.extrapolation_gap));
    }
}

pub fn regularity_rows(s: &mut String, r: &RegularityReport) {
    row(s, "(K, K')", format!("({}, {:.9})", r.k, r.k_prime));
    row(s, "holder exponent", r.beta);
    row(s, "holder bound", &r.holder.form);
    row(s, "holder coefficient", format!("{:.6}", r.holder_coefficient));
    row(s, "lipschitz interior/boundary", format!("{:.6} / {:.6}", r.discrete_lipschitz, r.boundary_lipschitz));
    row(s, "pointwise inequality slack", format!("{:.3e} ({} folded nodes)", r.max_relative_violation, r.folded_nodes));
    if let Some(t) = &r.refinement {
        let (li, lb, h) = t.relative_variation();
        row(s, "refinement variation", format!("interior {li:.3} boundary {lb:.3} holder {h:.3}"));
    }
}

/// Audit of an imported field.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct VerifyReport {
    pub metric: String,
    pub target: Annulus,
    pub energy: EnergyBreakdown,
    pub hopf: HopfReport,
    pub deformation: DeformationReport,
    pub regularity: RegularityReport,
}

impl VerifyReport {
    pub fn summary(&self) -> String {
        let mut s = String::new();
        row(&mut s, "metric", &self.metric);
        row(&mut s, "target", annulus_text(&self.target));
        energy_rows(&mut s, &self.energy);
        hopf_rows(&mut s, &self.hopf);
        deformation_rows(&mut s, &self.deformation);
        regularity_rows(&mut s, &self.regularity);
        s
    }
}

/// Target annulus read off the boundary rows of a field.
pub fn infer_target(field: &MappingField) -> Result<Annulus, CliError> {
    let g = field.grid();
    let mean = |j: usize| (0..g.n_t()).map(|k| field.at(j, k).norm()).sum::<f64>() / g.n_t() as f64;
    let (a, b) = (mean(0), mean(g.n_s() - 1));
    Ok(Annulus::new(a.min(b), a.max(b))?)
}

pub fn verify(field: &MappingField, metric_spec: &str, target: Option<Annulus>) -> Result<VerifyReport, CliError> {
    let target = match target {
        Some(t) => t,
        None => infer_target(field)?,
    };
    let metric = parse_metric(metric_spec, target)?;
    let e = energy(field, &metric)?;
    if !e.total.is_finite() {
        return Err(CliError::NonFinite(format!("energy {}", e.total)));
    }
    let hopf = fit_hopf_constant(field, &metric)?;
    let dom = field.grid().annulus();
    let regularity = regularity_report(field, &metric, hopf.constant(), 1.0 - dom.inner() / dom.outer())?;
    Ok(VerifyReport {
        metric: metric.describe(),
        target,
        energy: e,
        deformation: deformation_diagnostics(field, &metric)?,
        hopf,
        regularity,
    })
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ReflectReport {
    pub metric: String,
    pub source_hopf: HopfReport,
    pub extended: ExtendedHopfReport,
    pub double_reflection_error: f64,
}

pub fn reflect(field: &MappingField, metric_spec: &str, target: Option<Annulus>, out_dir: Option<&Path>) -> Result<ReflectReport, CliError> {
    let target = match target {
        Some(t) => t,
        None => infer_target(field)?,
    };
    let metric = parse_metric(metric_spec, target)?;
    let source_hopf = fit_hopf_constant(field, &metric)?;
    let ext = extend_map(field, target.outer())?;
    let extended = verify_extended_hopf(&ext, &metric, source_hopf.constant())?;
    if let Some(dir) = out_dir {
        ensure_dir(dir)?;
        write_text(&dir.join("extended_field.csv"), &ext.to_csv())?;
    }
    Ok(ReflectReport { metric: metric.describe(), source_hopf, double_reflection_error: ext.double_reflection_error(), extended })
}
