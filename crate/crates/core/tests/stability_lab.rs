use num_rational::Ratio;
use polyscat::geometry::*;
use polyscat::stability_lab::*;
use proptest::prelude::*;

fn config(mode: &str, magnitudes: &str, extra: &str) -> String {
    format!(
        r#"
seed = 3
k = 1.0
direction = [0.6, 0.8]
impedance = [1.0, 0.0]
far_field_samples = 64

[polygon]
vertices = [[-0.5, -0.5], [0.5, -0.5], [0.5, 0.5], [-0.5, 0.5]]

[family]
mode = "{mode}"
magnitudes = {magnitudes}

[mesh]
panels_per_half_edge = 2

[probe]
centers = 1
rings = 2
angles = 32
l2_radial = 4
l2_angular = 16
{extra}"#
    )
}

fn parse(mode: &str, magnitudes: &str) -> ExperimentConfig {
    ExperimentConfig::parse(&config(mode, magnitudes, "")).unwrap()
}

fn psi_constants(c: f64) -> PsiConstants {
    PsiConstants { c_p: 1.0, c_a: 1.0, c, r: 1.0, varsigma: 0.5, kappa: 0.25, alpha: 0.25 }
}

fn ledger_from(p: PsiConstants) -> ConstantsLedger {
    let mut ledger = ConstantsLedger::new();
    for (name, v) in [
        (names::C_P, p.c_p),
        (names::C_A, p.c_a),
        (names::C, p.c),
        (names::R, p.r),
        (names::VARSIGMA, p.varsigma),
        (names::KAPPA, p.kappa),
        (names::ALPHA, p.alpha),
    ] {
        ledger.record(name, v, "manual", "test value").unwrap();
    }
    ledger
}

#[test]
fn kappa_table() {
    assert_eq!(kappa(0), Ratio::new(1, 5));
    assert_eq!(kappa(1), Ratio::new(1, 4));
    assert_eq!(kappa(2), Ratio::new(1, 14));
    for n in 1..200 {
        assert!(kappa(n + 1) < kappa(n));
    }
    assert!(kappa_f64(100_000) < 1e-10);
}

#[test]
fn psi_at_the_reference_constants_is_out_of_domain() {
    // 50-digit evaluation: bracket 0.835157100099867..., ln|ln bracket| = -1.71404633323098...
    let ledger = ledger_from(psi_constants(1.0));
    let p = PsiConstants::from_ledger(&ledger).unwrap();
    assert!((p.bracket_ln(-(1e-30f64).ln()) - 0.835_157_100_099_867_3).abs() < 1e-15);
    assert!(matches!(psi(1e-30, &ledger), Err(LabError::Domain { .. })));
    // the shape term alone stays above 1/e for every representable eps
    assert!(matches!(p.eval_ln(1e300), Err(LabError::Domain { .. })));
}

#[test]
fn psi_matches_high_precision_value() {
    // mpmath, 50 digits: C = 0.1, other constants as above
    let expected = 1.024_339_602_220_594_5;
    let got = psi(1e-30, &ledger_from(psi_constants(0.1))).unwrap();
    assert!((got - expected).abs() <= 1e-14 * expected, "{got}");
}

#[test]
fn psi_needs_every_constant() {
    let mut ledger = ledger_from(psi_constants(0.1));
    assert!(psi(1e-30, &ledger).is_ok());
    ledger = ConstantsLedger::new();
    ledger.record(names::C_P, 1.0, "manual", "").unwrap();
    assert_eq!(psi(1e-30, &ledger), Err(LabError::MissingConstant(names::C_A.into())));
}

#[test]
fn psi_rejects_a_bracket_above_one() {
    let p = psi_constants(10.0);
    assert!(matches!(p.eval(1e-30), Err(LabError::Domain { .. })));
    assert!(matches!(p.eval(0.5), Err(LabError::Domain { .. })));
    assert!(matches!(p.eval(0.0), Err(LabError::Domain { .. })));
}

#[test]
fn psi_tends_to_zero() {
    let p = PsiConstants { c: 0.0, alpha: 2.0, ..psi_constants(0.0) };
    let vals: Vec<f64> = [1e2, 1e10, 1e50, 1e100, 1e300].iter().map(|&l| p.eval_ln(l).unwrap()).collect();
    assert!(vals.windows(2).all(|w| w[1] < w[0]));
    assert!(vals[4] < 1e-5);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(1000))]

    #[test]
    fn psi_is_increasing(a in 2.0f64..300.0, b in 2.0f64..300.0) {
        // ln(1/eps) between e^2 and e^300
        let p = psi_constants(0.1);
        let (lo, hi) = if a < b { (a, b) } else { (b, a) };
        let (small_eps, large_eps) = (p.eval_ln(hi.exp()), p.eval_ln(lo.exp()));
        if let (Ok(s), Ok(l)) = (small_eps, large_eps) {
            prop_assert!(s <= l);
        }
    }

    #[test]
    fn bound_shape_is_increasing(a in -700.0f64..-1.01, b in -700.0f64..-1.01, n in 0u32..6) {
        let (lo, hi) = if a < b { (a, b) } else { (b, a) };
        let k = kappa_f64(n);
        prop_assert!(bound_shape(lo.exp(), k).unwrap() <= bound_shape(hi.exp(), k).unwrap());
    }
}

#[test]
fn ledger_keeps_every_fit() {
    let mut ledger = ConstantsLedger::new();
    let run1 = ledger.next_run("sweep-shape", "vertex-shift", 1);
    ledger.record(names::C, 0.5, &run1, "first").unwrap();
    assert_eq!(
        ledger.record(names::C, 0.7, &run1, "again"),
        Err(LabError::AlreadyFitted { name: "C".into(), run: run1.clone() })
    );
    let run2 = ledger.next_run("sweep-shape", "vertex-shift", 1);
    assert_ne!(run1, run2);
    ledger.record(names::C, 0.7, &run2, "second").unwrap();
    assert_eq!(ledger.get(names::C), Some(0.7));
    assert_eq!(ledger.history(names::C).len(), 2);
    assert_eq!(ledger.history(names::C)[0].value, 0.5);
    assert_eq!(ledger.run_count(), 2);
}

#[test]
fn ledger_snapshot_round_trips() {
    let mut ledger = ledger_from(psi_constants(0.1));
    ledger.record(names::C, 0.1 + 1e-17, "later", "refit").unwrap();
    ledger.record(names::ENERGY, f64::NAN, "later", "unavailable").unwrap();
    let text = ledger.snapshot();
    let back = ConstantsLedger::from_snapshot(&text).unwrap();
    assert_eq!(back.history(names::C), ledger.history(names::C));
    assert!(back.get(names::ENERGY).unwrap().is_nan());
    assert_eq!(back.names().count(), ledger.names().count());
}

#[test]
fn config_parses_with_defaults() {
    let cfg = parse("vertex-shift", "[0.1, 0.05]");
    assert_eq!(cfg.family.mode, FamilyMode::VertexShift);
    assert_eq!(cfg.family.vertex, 0);
    assert_eq!(cfg.mesh.panels_per_half_edge, 2);
    assert_eq!(cfg.mesh.order, 16);
    assert_eq!(cfg.probe.scan.zeta, 0.5);
    assert_eq!(cfg.output.csv, "sweep.csv");
    assert_eq!(cfg.seed, 3);
    assert_eq!(cfg.validate().unwrap().len(), 3);
}

#[test]
fn config_rejects_unknown_keys() {
    let top = config("rotate", "[0.1]", "").replace("seed = 3", "seed = 3\ncolour = 1");
    assert!(matches!(ExperimentConfig::parse(&top), Err(LabError::Config(_))));
    let nested = config("rotate", "[0.1]", "depth = 2");
    assert!(matches!(ExperimentConfig::parse(&nested), Err(LabError::Config(_))));
    let mode = config("twist", "[0.1]", "");
    assert!(matches!(ExperimentConfig::parse(&mode), Err(LabError::Config(_))));
}

#[test]
fn config_checks_magnitudes() {
    for bad in ["[]", "[0.1, 0.2]", "[0.1, 0.1]", "[0.1, -0.1]", "[0.0, 0.1]"] {
        assert!(ExperimentConfig::parse(&config("rotate", bad, "")).is_err(), "{bad}");
    }
    assert!(ExperimentConfig::parse(&config("rotate", "[0.0, 0.0]", "")).is_ok());
}

#[test]
fn inadmissible_members_are_reported() {
    // pushing vertex 0 inward far enough makes the polygon nonconvex
    let cfg = parse("vertex-shift", "[-0.1]".replace('-', "").as_str());
    assert!(cfg.validate().is_ok());
    let mut cfg = cfg;
    cfg.family.magnitudes = vec![2.0];
    let params = AdmissibleParams::new(0.5, 1.5, 0.3, 2.8, 2.0, 0.1, 0.1, 0.5).unwrap();
    cfg.admissible = Some(params);
    let err = cfg.validate().unwrap_err();
    assert!(matches!(err, LabError::Inadmissible(_)), "{err}");
    assert!(err.is_validation());
}

#[test]
fn family_members() {
    let cfg = parse("vertex-shift", "[0.1]");
    let (p, eta) = cfg.member(0.1).unwrap();
    assert!((hausdorff_distance(&cfg.polygon, &p) - 0.1).abs() < 1e-15);
    assert_eq!(eta, cfg.impedance);
    let cfg = parse("uniform-scale", "[0.1]");
    let (p, _) = cfg.member(0.1).unwrap();
    assert!((p.area() - 1.21).abs() < 1e-14);
    let cfg = parse("rotate", "[0.1]");
    let (p, _) = cfg.member(0.1).unwrap();
    assert!((p.area() - 1.0).abs() < 1e-14);
    let cfg = parse("impedance-shift", "[0.25]");
    let (p, eta) = cfg.member(0.25).unwrap();
    assert_eq!(p, cfg.polygon);
    assert_eq!(eta.re, 1.25);
}

fn sample_rows() -> Vec<StabilityRow> {
    vec![
        StabilityRow {
            t: 0.1,
            eps: 1.0 / 3.0,
            eps1: 2e-300,
            hausdorff: 0.1,
            eta_gap: 0.0,
            order: 2,
            t_eps: f64::NAN,
            bound_shape: 0.7,
            psi_shape: f64::INFINITY,
            flags: vec![],
        },
        StabilityRow {
            t: 0.05,
            eps: 1e-3,
            eps1: 5e-4,
            hausdorff: 0.05,
            eta_gap: 0.0,
            order: 0,
            t_eps: 0.4,
            bound_shape: 0.9,
            psi_shape: f64::NAN,
            flags: vec![RowFlag::Floor, RowFlag::PsiUnfitted],
        },
    ]
}

#[test]
fn csv_round_trips_bit_exact() {
    let rows = sample_rows();
    let text = rows_to_csv(&rows);
    assert_eq!(text.lines().next(), Some("t,eps,eps1,hausdorff,eta_gap,N,T_eps,bound_shape,psi_shape,flags"));
    let back = parse_report_csv(&text).unwrap();
    assert_eq!(back.len(), rows.len());
    for (a, b) in rows.iter().zip(&back) {
        let bits = |r: &StabilityRow| [r.t, r.eps, r.eps1, r.hausdorff, r.eta_gap, r.t_eps, r.bound_shape, r.psi_shape].map(f64::to_bits);
        assert_eq!(bits(a), bits(b));
        assert_eq!((a.order, &a.flags), (b.order, &b.flags));
    }
    assert_eq!(rows_to_csv(&back), text);
}

#[test]
fn csv_with_bad_cells_is_rejected() {
    let text = rows_to_csv(&sample_rows());
    assert!(parse_report_csv(&text.replace("floor", "flor")).is_err());
    assert!(parse_report_csv(&text.replacen("t,eps", "t,epsilon", 1)).is_err());
    assert!(parse_report_csv(&format!("{text}1,2\n")).is_err());
}

/// Elements the report writer may emit; all are SVG 1.1 and none can load external content.
const SVG_ELEMENTS: [&str; 8] = ["svg", "rect", "g", "line", "text", "polyline", "circle", "path"];

fn check_svg(text: &str) -> roxmltree::Document<'_> {
    let doc = roxmltree::Document::parse(text).unwrap();
    let root = doc.root_element();
    assert_eq!(root.tag_name().name(), "svg");
    assert_eq!(root.tag_name().namespace(), Some("http://www.w3.org/2000/svg"));
    assert_eq!(root.attribute("version"), Some("1.1"));
    for node in doc.descendants().filter(|n| n.is_element()) {
        let name = node.tag_name().name();
        assert!(SVG_ELEMENTS.contains(&name) || name == "title", "element {name}");
        for a in node.attributes() {
            assert!(!a.name().contains("href") && !a.value().contains("url("), "{}={}", a.name(), a.value());
        }
    }
    doc
}

#[test]
fn svg_is_self_contained_and_marks_flags() {
    let mut rows = sample_rows();
    rows[0].eps = 1e-4;
    let ledger = ledger_from(psi_constants(0.1));
    let text = render_svg(&rows, &ledger);
    let doc = check_svg(&text);
    let count = |class: &str| doc.descendants().filter(|n| n.attribute("class") == Some(class)).count();
    assert_eq!(count("row"), 2);
    assert_eq!(count("flag"), 1);
    assert_eq!(count("bound"), 1);

    rows[1].flags.clear();
    let doc_text = render_svg(&rows, &ledger);
    assert_eq!(check_svg(&doc_text).descendants().filter(|n| n.attribute("class") == Some("flag")).count(), 0);
}

#[test]
fn svg_without_plottable_rows() {
    let mut rows = sample_rows();
    rows.iter_mut().for_each(|r| r.eps = 0.5);
    let text = render_svg(&rows, &ConstantsLedger::new());
    check_svg(&text);
    assert!(text.contains("no plottable rows"));
}

#[test]
fn emit_report_writes_three_files() {
    let dir = tempfile::tempdir().unwrap();
    let paths = OutputPaths { dir: dir.path().join("nested"), ..OutputPaths::default() };
    let ledger = ledger_from(psi_constants(0.1));
    emit_report(&sample_rows(), &ledger, &paths).unwrap();
    let csv = std::fs::read_to_string(paths.csv_path()).unwrap();
    assert_eq!(parse_report_csv(&csv).unwrap().len(), 2);
    check_svg(&std::fs::read_to_string(paths.svg_path()).unwrap());
    let snap = ConstantsLedger::from_snapshot(&std::fs::read_to_string(paths.ledger_path()).unwrap()).unwrap();
    assert_eq!(snap, ledger);
    assert_eq!(emit_report(&[], &ledger, &paths), Err(LabError::EmptyReport));
}

#[test]
fn emit_report_surfaces_io_errors() {
    let dir = tempfile::tempdir().unwrap();
    let blocker = dir.path().join("file");
    std::fs::write(&blocker, "x").unwrap();
    let paths = OutputPaths { dir: blocker.join("sub"), ..OutputPaths::default() };
    let err = emit_report(&sample_rows(), &ConstantsLedger::new(), &paths).unwrap_err();
    assert!(matches!(err, LabError::Io { .. }));
}

#[test]
fn zero_magnitudes_give_zero_rows() {
    let mut ledger = ConstantsLedger::new();
    let out = shape_stability_sweep(&parse("vertex-shift", "[0.0, 0.0]"), &mut ledger).unwrap();
    for r in &out.rows {
        assert_eq!((r.eps, r.hausdorff, r.eps1), (0.0, 0.0, 0.0));
        assert!(r.has(RowFlag::Floor));
    }
    assert_eq!(out.fitted, None);
    let out = impedance_stability_sweep(&parse("impedance-shift", "[0.0]"), &mut ledger).unwrap();
    assert_eq!((out.rows[0].eps, out.rows[0].eta_gap), (0.0, 0.0));
}

#[test]
fn sweeps_reject_the_wrong_family() {
    let mut ledger = ConstantsLedger::new();
    assert!(matches!(shape_stability_sweep(&parse("impedance-shift", "[0.1]"), &mut ledger), Err(LabError::Config(_))));
    assert!(matches!(impedance_stability_sweep(&parse("rotate", "[0.1]"), &mut ledger), Err(LabError::Config(_))));
}

#[test]
fn small_shape_sweep_fills_the_ledger() {
    let mut ledger = ConstantsLedger::new();
    let cfg = parse("vertex-shift", "[0.2, 0.1, 0.05]");
    let out = shape_stability_sweep(&cfg, &mut ledger).unwrap();
    assert_eq!(out.rows.iter().map(|r| r.t).collect::<Vec<_>>(), vec![0.2, 0.1, 0.05]);
    assert!(out.monotone);
    assert!(out.bound_holds);
    let c = out.fitted.unwrap();
    assert_eq!(ledger.get(names::C), Some(c));
    for r in out.rows.iter().filter(|r| r.is_fitted()) {
        assert!(r.hausdorff <= c * r.bound_shape * (1.0 + 1e-12));
        assert!(r.eps1 > 0.0, "{r:?}");
        assert_eq!(r.t_eps.is_nan(), r.has(RowFlag::NoCorner), "{r:?}");
        assert!(r.has(RowFlag::PsiUnfitted));
    }
    for name in [names::KAPPA, names::C_A, names::C_B, names::C_F, names::VARSIGMA, names::C_DIRECT, names::ENERGY, names::R] {
        assert!(ledger.latest(name).is_some_and(|f| f.run == out.run), "{name}");
    }
    // a second run appends
    shape_stability_sweep(&cfg, &mut ledger).unwrap();
    assert_eq!(ledger.history(names::C).len(), 2);
}
