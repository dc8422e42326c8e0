use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn config(mode: &str, magnitudes: &str, impedance: &str) -> String {
    format!(
        r#"
seed = 5
k = 1.0
direction = [0.6, 0.8]
impedance = {impedance}
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
"#
    )
}

struct Setup {
    dir: tempfile::TempDir,
}

impl Setup {
    fn new(text: &str) -> Self {
        let dir = tempfile::tempdir().unwrap();
        std::fs::write(dir.path().join("lab.toml"), text).unwrap();
        Self { dir }
    }

    fn shape() -> Self {
        Self::new(&config("vertex-shift", "[0.2, 0.1]", "[1.0, 0.0]"))
    }

    fn out(&self) -> PathBuf {
        self.dir.path().join("out")
    }

    fn run(&self, verb: &str, extra: &[&str]) -> Output {
        Command::new(env!("CARGO_BIN_EXE_lab"))
            .arg(verb)
            .arg("--config")
            .arg(self.dir.path().join("lab.toml"))
            .arg("--out")
            .arg(self.out())
            .args(extra)
            .output()
            .unwrap()
    }

    fn read(&self, name: &str) -> String {
        std::fs::read_to_string(self.out().join(name)).unwrap()
    }
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn assert_exit(o: &Output, code: i32) {
    assert_eq!(o.status.code(), Some(code), "stdout: {}\nstderr: {}", stdout(o), String::from_utf8_lossy(&o.stderr));
}

#[test]
fn validate_lists_every_member() {
    let s = Setup::shape();
    let o = s.run("validate", &[]);
    assert_exit(&o, 0);
    assert_eq!(stdout(&o).lines().count(), 3);
}

#[test]
fn unknown_key_is_a_validation_failure() {
    let s = Setup::new(&config("rotate", "[0.1]", "[1.0, 0.0]").replace("seed = 5", "seed = 5\nspeed = 2"));
    assert_exit(&s.run("validate", &[]), 2);
    assert_exit(&s.run("solve", &[]), 2);
}

#[test]
fn zero_impedance_shift_is_a_validation_failure() {
    let s = Setup::new(&config("impedance-shift", "[0.1]", "[0.0, 0.0]"));
    assert_exit(&s.run("validate", &[]), 2);
}

#[test]
fn missing_config_is_an_io_failure() {
    let o = Command::new(env!("CARGO_BIN_EXE_lab")).args(["validate", "--config", "/nonexistent/lab.toml"]).output().unwrap();
    assert_exit(&o, 1);
}

#[test]
fn unknown_verb_is_rejected() {
    let s = Setup::shape();
    assert!(!s.run("invert", &[]).status.success());
}

#[test]
fn solve_and_farfield_write_csv() {
    let s = Setup::shape();
    assert_exit(&s.run("solve", &[]), 0);
    let trace = s.read("trace.csv");
    assert_eq!(trace.lines().next(), Some("node,x,y,re,im"));
    // 4 edges, 2·2 panels per edge, 16 nodes per panel
    assert_eq!(trace.lines().count(), 1 + 4 * 4 * 16);
    assert_exit(&s.run("farfield", &[]), 0);
    let far = s.read("farfield.csv");
    assert_eq!(far.lines().next(), Some("angle_rad,re,im"));
    assert_eq!(far.lines().count(), 65);
}

#[test]
fn corner_writes_the_identity_ledger() {
    let s = Setup::shape();
    let o = s.run("corner", &[]);
    assert_exit(&o, 0);
    assert!(stdout(&o).contains("term bounds hold: true"));
    let csv = s.read("corner.csv");
    assert_eq!(csv.lines().count(), 13);
    let residual: f64 = csv.lines().last().unwrap().split(',').nth(3).unwrap().parse().unwrap();
    assert!(residual < 1e-10, "{residual}");
}

#[test]
fn corner_needs_a_shape_family() {
    let s = Setup::new(&config("impedance-shift", "[0.1]", "[1.0, 0.0]"));
    assert_exit(&s.run("corner", &[]), 2);
}

#[test]
fn chain_exports_centres() {
    let s = Setup::shape();
    assert_exit(&s.run("chain", &[]), 0);
    let csv = s.read("chain.csv");
    assert_eq!(csv.lines().next(), Some("index,cx,cy"));
    assert!(csv.lines().count() > 10);
}

#[test]
fn sweeps_append_to_the_ledger_and_report_rerenders() {
    let s = Setup::shape();
    assert_exit(&s.run("sweep-shape", &[]), 0);
    assert_exit(&s.run("sweep-shape", &["--seed", "9"]), 0);
    let ledger = s.read("ledger.toml");
    assert!(ledger.contains("sweep-shape/vertex-shift/seed=5/run=1"));
    assert!(ledger.contains("sweep-shape/vertex-shift/seed=9/run=2"));
    let csv = s.read("sweep.csv");
    std::fs::remove_file(s.out().join("sweep.svg")).unwrap();
    assert_exit(&s.run("report", &[]), 0);
    assert!(s.read("sweep.svg").starts_with("<svg") || s.read("sweep.svg").starts_with("<?xml"));
    assert_eq!(s.read("sweep.csv"), csv);
}

#[test]
fn impedance_sweep_uses_the_impedance_family() {
    let s = Setup::new(&config("impedance-shift", "[0.125, 0.0625]", "[1.0, 0.0]"));
    let o = s.run("sweep-impedance", &[]);
    assert_exit(&o, 0);
    assert!(stdout(&o).contains("boundary L2 spread"));
    assert_exit(&s.run("sweep-shape", &[]), 2);
}

#[test]
fn sweep_csv_is_deterministic() {
    let (a, b) = (Setup::shape(), Setup::shape());
    assert_exit(&a.run("sweep-shape", &[]), 0);
    assert_exit(&b.run("sweep-shape", &[]), 0);
    assert_eq!(a.read("sweep.csv"), b.read("sweep.csv"));
}

#[test]
fn report_without_rows_fails() {
    let s = Setup::shape();
    assert_exit(&s.run("report", &[]), 1);
    assert!(!Path::new(&s.out().join("sweep.svg")).exists());
}
