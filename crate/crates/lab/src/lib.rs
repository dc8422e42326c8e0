//! Verbs of the `lab` command. Each verb reads one experiment config, writes its
//! files into the output directory and returns the lines it prints.

use std::fs;
use std::path::{Path, PathBuf};

use clap::{Parser, ValueEnum};

use polyscat::cgo_probe::{make_probe, tau_min};
use polyscat::corner_analysis::{
    expand_solution, identity_ledger, vanishing_order, CornerError, LedgerQuadrature, SolverTraces,
};
use polyscat::direct_solver::{solve, ScatterSolution};
use polyscat::fmt17;
use polyscat::geometry::{corner_frame, eroded_exterior, extremal_vertex, ImpedanceParam, Point2, Polygon, Rect};
use polyscat::smallness::{audit_chain, build_chain, SmallnessError};
use polyscat::stability_lab::{
    corner_height, emit_report, impedance_stability_sweep, parse_report_csv, resolvable_order, shape_stability_sweep,
    ConstantsLedger, ExperimentConfig, LabError, SweepOutcome,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Verb {
    /// Check the config and the admissibility of every family member.
    Validate,
    /// Solve the base problem and write the boundary trace.
    Solve,
    /// Solve the base problem and write its far-field pattern.
    Farfield,
    /// Integral identity ledger at the extremal corner of the first family member.
    Corner,
    /// Disk chain from the far side of the base polygon to the family vertex.
    Chain,
    SweepShape,
    SweepImpedance,
    /// Re-render the SVG and ledger snapshot from an existing CSV.
    Report,
}

#[derive(Debug, Parser)]
#[command(name = "lab", version, about = "Scattering stability experiments on convex polygons")]
pub struct Cli {
    #[arg(value_enum)]
    pub verb: Verb,
    #[arg(long)]
    pub config: PathBuf,
    /// Overrides the seed in the config.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Overrides the output directory in the config.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

/// Process exit status for a failed verb.
pub fn exit_code(err: &LabError) -> i32 {
    if err.is_validation() {
        2
    } else if matches!(err, LabError::Solver(_) | LabError::Corner(_) | LabError::Smallness(_)) {
        3
    } else {
        1
    }
}

fn io_error(path: &Path, err: std::io::Error) -> LabError {
    LabError::Io { path: path.display().to_string(), message: err.to_string() }
}

fn write(path: &Path, text: &str) -> Result<(), LabError> {
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir).map_err(|e| io_error(dir, e))?;
    }
    fs::write(path, text).map_err(|e| io_error(path, e))
}

pub fn load_config(cli: &Cli) -> Result<ExperimentConfig, LabError> {
    let text = fs::read_to_string(&cli.config).map_err(|e| io_error(&cli.config, e))?;
    let mut cfg = ExperimentConfig::parse(&text)?;
    if let Some(seed) = cli.seed {
        cfg.seed = seed;
    }
    if let Some(out) = &cli.out {
        cfg.output.dir = out.clone();
    }
    Ok(cfg)
}

fn load_ledger(cfg: &ExperimentConfig) -> Result<ConstantsLedger, LabError> {
    let path = cfg.output.ledger_path();
    match fs::read_to_string(&path) {
        Ok(text) => ConstantsLedger::from_snapshot(&text),
        Err(e) if e.kind() == std::io::ErrorKind::NotFound => Ok(ConstantsLedger::new()),
        Err(e) => Err(io_error(&path, e)),
    }
}

fn solve_base(cfg: &ExperimentConfig) -> Result<ScatterSolution, LabError> {
    Ok(solve(&cfg.polygon, &cfg.base_impedance(), cfg.incident()?, cfg.mesh)?)
}

pub fn run(cli: &Cli) -> Result<Vec<String>, LabError> {
    let cfg = load_config(cli)?;
    match cli.verb {
        Verb::Validate => cfg.validate(),
        Verb::Solve => solve_verb(&cfg),
        Verb::Farfield => farfield_verb(&cfg),
        Verb::Corner => corner_verb(&cfg),
        Verb::Chain => chain_verb(&cfg),
        Verb::SweepShape => sweep_verb(&cfg, shape_stability_sweep),
        Verb::SweepImpedance => sweep_verb(&cfg, impedance_stability_sweep),
        Verb::Report => report_verb(&cfg),
    }
}

fn solve_verb(cfg: &ExperimentConfig) -> Result<Vec<String>, LabError> {
    let sol = solve_base(cfg)?;
    let mut csv = String::from("node,x,y,re,im\n");
    for (i, (x, u)) in sol.mesh.nodes.iter().zip(&sol.density).enumerate() {
        csv += &format!("{i},{},{},{},{}\n", fmt17(x.x), fmt17(x.y), fmt17(u.re), fmt17(u.im));
    }
    let path = cfg.output.dir.join("trace.csv");
    write(&path, &csv)?;
    let d = sol.diagnostics;
    Ok(vec![
        format!("unknowns {}", d.unknowns),
        format!("relative residual {:e}", d.relative_residual),
        format!("condition estimate {:e}", d.condition_estimate),
        format!("wrote {}", path.display()),
    ])
}

fn farfield_verb(cfg: &ExperimentConfig) -> Result<Vec<String>, LabError> {
    let far = solve_base(cfg)?.far_field(cfg.far_field_samples)?;
    let path = cfg.output.dir.join("farfield.csv");
    write(&path, &far.to_csv())?;
    Ok(vec![format!("sup |u_inf| {:e}", far.sup_norm()), format!("wrote {}", path.display())])
}

fn corner_verb(cfg: &ExperimentConfig) -> Result<Vec<String>, LabError> {
    let t = cfg.family.magnitudes[0];
    if !cfg.family.mode.moves_shape() || t == 0.0 {
        return Err(LabError::Config("corner needs a shape family with a nonzero first magnitude".into()));
    }
    let (member, eta) = cfg.member(t)?;
    let base_sol = solve_base(cfg)?;
    let member_sol = solve(&member, &ImpedanceParam::constant(eta), cfg.incident()?, cfg.mesh)?;
    // the corner belongs to whichever polygon sticks out further, the base on ties
    let (vb, db) = extremal_vertex(&cfg.polygon, &member);
    let (vm, dm) = extremal_vertex(&member, &cfg.polygon);
    let (sol_k, sol_other, vertex, dist) = if db >= dm { (&base_sol, &member_sol, vb, db) } else { (&member_sol, &base_sol, vm, dm) };
    let h = corner_height(sol_k.polygon(), vertex, dist, cfg.k, cfg.mesh).min(0.9 * dist);
    let frame = corner_frame(sol_k.polygon(), vertex, h)?;
    let exp = expand_solution(sol_other, frame.vertex, frame.axis, h, resolvable_order(cfg.k * h, cfg.probe.n_max))?;
    let order = vanishing_order(&exp, cfg.probe.order_tol)?.order;
    // τ = 2τ_min, raised if needed so the probe decays over B_h faster than r^{N+2} grows
    let probe_for = |tau: f64| make_probe(tau, cfg.k, &frame, None).map_err(CornerError::from);
    let (_, cert) = probe_for(tau_min(order, cfg.k, h))?;
    let tau = (2.0 * tau_min(order, cfg.k, h)).max(1.25 * 2.0 * (order as f64 + 2.0) / (cert.alpha_prime * h));
    let (probe, cert) = probe_for(tau)?;
    let traces = SolverTraces { solution: sol_k, frame };
    let ledger = identity_ledger(&traces, &exp, cfg.probe.order_tol, &frame, &probe, &cert, LedgerQuadrature::default())?;
    let path = cfg.output.dir.join("corner.csv");
    write(&path, &ledger.to_csv())?;
    Ok(vec![
        format!("vertex {vertex} at ({}, {}), h {h}, N {order}, tau {}", frame.vertex.x, frame.vertex.y, ledger.tau),
        format!("residual {:e} (relative {:e})", ledger.residual, ledger.relative_residual),
        format!("term bounds hold: {}", ledger.bounds_ok()),
        format!("wrote {}", path.display()),
    ])
}

/// Unit vector bisecting the exterior angle at vertex `i`.
fn outward_bisector(poly: &Polygon, i: usize) -> Point2 {
    let n = poly.len();
    let v = poly.vertex(i);
    let next = (poly.vertex((i + 1) % n) - v).unit();
    let prev = (poly.vertex((i + n - 1) % n) - v).unit();
    (next + prev).unit() * -1.0
}

fn chain_verb(cfg: &ExperimentConfig) -> Result<Vec<String>, LabError> {
    let poly = &cfg.polygon;
    let vertex = cfg.family.vertex % poly.len();
    let ell = poly.edge_lengths().into_iter().fold(f64::INFINITY, f64::min);
    let r = ell / 40.0;
    let step = r / 2.0;
    let reach = poly.max_radius();
    let out = outward_bisector(poly, vertex);
    // start on the far side so the chain has to route around the obstacle
    let start = poly.centroid() - out * (reach + 1.0);
    let end = poly.vertex(vertex) + out * (6.0 * r);
    let obstacles = [poly.clone()];
    let grid = eroded_exterior(&obstacles, 4.0 * r + step, Rect::around(poly, reach + 2.0), step)?;
    let chain = build_chain(&grid, start, end, r)?;
    let r_m = cfg.admissible.map_or(f64::INFINITY, |a| a.r_m);
    let audit = audit_chain(&chain, &obstacles, &grid, r_m);
    if !audit.passed() {
        return Err(SmallnessError::Audit(format!("{audit:?}")).into());
    }
    let path = cfg.output.dir.join("chain.csv");
    write(&path, &chain.to_csv())?;
    Ok(vec![
        format!("{} disks of radius {r}, length {}", chain.centers.len(), chain.length),
        format!("clearance margin {}", audit.clearance_margin),
        format!("wrote {}", path.display()),
    ])
}

fn sweep_verb(
    cfg: &ExperimentConfig,
    sweep: fn(&ExperimentConfig, &mut ConstantsLedger) -> Result<SweepOutcome, LabError>,
) -> Result<Vec<String>, LabError> {
    let mut ledger = load_ledger(cfg)?;
    let outcome = sweep(cfg, &mut ledger)?;
    emit_report(&outcome.rows, &ledger, &cfg.output)?;
    let mut lines = vec![
        format!("run {}", outcome.run),
        format!("solver tolerance {:e}", outcome.solver_tolerance),
        format!("fitted {}", outcome.fitted.map_or("none".into(), |c| c.to_string())),
        format!("bound holds {}, monotone {}", outcome.bound_holds, outcome.monotone),
        format!("operational eps0 {}", outcome.operational_eps0.map_or("none".into(), |e| e.to_string())),
    ];
    if let Some(spread) = outcome.boundary_l2_spread() {
        lines.push(format!("boundary L2 spread {spread}"));
    }
    lines.push(format!("wrote {}", cfg.output.dir.display()));
    Ok(lines)
}

fn report_verb(cfg: &ExperimentConfig) -> Result<Vec<String>, LabError> {
    let path = cfg.output.csv_path();
    let text = fs::read_to_string(&path).map_err(|e| io_error(&path, e))?;
    let rows = parse_report_csv(&text)?;
    let ledger = load_ledger(cfg)?;
    emit_report(&rows, &ledger, &cfg.output)?;
    Ok(vec![format!("{} rows", rows.len()), format!("wrote {}", cfg.output.svg_path().display())])
}
