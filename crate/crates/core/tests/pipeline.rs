use nitsche_core::field_io::{read_field, write_field_csv, write_field_json};
use nitsche_core::hopf::{flow_catalog, inner_variation_derivative};
use nitsche_core::minimizer::{minimize, MinimizeConfig, RunReport};
use nitsche_core::reflection::{extend_map, verify_extended_hopf};
use nitsche_core::regularity::regularity_report;
use nitsche_core::{Annulus, Metric};

fn nitsche_run() -> (Annulus, Annulus, Metric, MinimizeConfig, nitsche_core::minimizer::MinimizeResult) {
    let domain = Annulus::new(1.0, 2.0).unwrap();
    let target = Annulus::new(1.0, 1.25).unwrap();
    let metric = Metric::euclidean(target);
    let cfg = MinimizeConfig { n_s: 33, n_t: 128, ..Default::default() };
    let r = minimize(&domain, &target, &metric, &cfg).unwrap();
    (domain, target, metric, cfg, r)
}

#[test]
fn minimizer_output_passes_every_audit() {
    let (_, _, metric, _, r) = nitsche_run();
    assert!(r.converged);

    // stationary under domain reparametrizations, relative to the energy scale
    for flow in flow_catalog() {
        let d = inner_variation_derivative(&r.field, &metric, &flow).unwrap();
        assert!(d.abs() < 2e-3 * r.energy.total, "{flow:?}: {d}");
    }

    let c = r.hopf.constant();
    let reg = regularity_report(&r.field, &metric, c, 0.5).unwrap();
    assert_eq!(reg.folded_nodes, 0);
    assert!(reg.discrete_lipschitz < 1.1 && reg.boundary_lipschitz < 1.1, "{reg:?}");

    let ext = extend_map(&r.field, 1.25).unwrap();
    let audit = verify_extended_hopf(&ext, &metric, c).unwrap();
    assert!(audit.bounded(1e-2), "{audit:?}");
}

#[test]
fn minimizer_output_survives_file_round_trips() {
    let (domain, target, metric, cfg, r) = nitsche_run();
    let dir = tempfile::tempdir().unwrap();
    let csv = dir.path().join("f.csv");
    let json = dir.path().join("f.json");
    write_field_csv(&csv, &r.field, None).unwrap();
    write_field_json(&json, &r.field, None).unwrap();
    for path in [csv, json] {
        let back = read_field(&path).unwrap();
        assert_eq!(back.grid().n_s(), 33);
        let same = back.values().iter().zip(r.field.values()).all(|(a, b)| a.re.to_bits() == b.re.to_bits() && a.im.to_bits() == b.im.to_bits());
        assert!(same, "{}", path.display());
    }
    let report: serde_json::Value = serde_json::from_str(&RunReport::new(&domain, &target, &metric, &cfg, &r).to_json()).unwrap();
    assert!(report["energy"]["total"].as_f64().unwrap() > 0.0);
}
