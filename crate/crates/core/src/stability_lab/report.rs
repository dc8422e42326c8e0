use std::fmt::Write as _;
use std::fs;

use super::{lnln_inv, names, ConstantsLedger, LabError, OutputPaths, PsiConstants, RowFlag, StabilityRow};
use crate::fmt17;

pub const CSV_HEADER: &str = "t,eps,eps1,hausdorff,eta_gap,N,T_eps,bound_shape,psi_shape,flags";

/// Report rows as CSV with 17 significant digits; flags are `;`-separated.
pub fn rows_to_csv(rows: &[StabilityRow]) -> String {
    let mut s = String::from(CSV_HEADER);
    s.push('\n');
    for r in rows {
        let flags: Vec<&str> = r.flags.iter().map(|f| f.as_str()).collect();
        let nums = [r.t, r.eps, r.eps1, r.hausdorff, r.eta_gap].map(fmt17).join(",");
        let tail = [r.t_eps, r.bound_shape, r.psi_shape].map(fmt17).join(",");
        let _ = writeln!(s, "{nums},{},{tail},{}", r.order, flags.join(";"));
    }
    s
}

pub fn parse_report_csv(text: &str) -> Result<Vec<StabilityRow>, LabError> {
    let mut lines = text.lines();
    if lines.next() != Some(CSV_HEADER) {
        return Err(LabError::Parse(format!("expected header `{CSV_HEADER}`")));
    }
    lines
        .enumerate()
        .filter(|(_, l)| !l.is_empty())
        .map(|(i, line)| {
            let bad = |what: &str| LabError::Parse(format!("row {}: {what}", i + 1));
            let cells: Vec<&str> = line.split(',').collect();
            if cells.len() != 10 {
                return Err(bad("expected 10 cells"));
            }
            let num = |j: usize| cells[j].parse::<f64>().map_err(|_| bad(&format!("cell {} is not a number", j + 1)));
            let flags = if cells[9].is_empty() {
                Vec::new()
            } else {
                cells[9].split(';').map(|f| RowFlag::parse(f).ok_or_else(|| bad(&format!("unknown flag `{f}`")))).collect::<Result<_, _>>()?
            };
            Ok(StabilityRow {
                t: num(0)?,
                eps: num(1)?,
                eps1: num(2)?,
                hausdorff: num(3)?,
                eta_gap: num(4)?,
                order: cells[5].parse().map_err(|_| bad("N is not a nonnegative integer"))?,
                t_eps: num(6)?,
                bound_shape: num(7)?,
                psi_shape: num(8)?,
                flags,
            })
        })
        .collect()
}

const WIDTH: f64 = 640.0;
const HEIGHT: f64 = 420.0;
const LEFT: f64 = 80.0;
const RIGHT: f64 = 20.0;
const TOP: f64 = 20.0;
const BOTTOM: f64 = 56.0;
const TICKS: usize = 5;

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;").replace('"', "&quot;")
}

/// Logarithmic axis over `[lo, hi]` mapped to pixels `[p0, p1]`.
struct LogAxis {
    lo: f64,
    hi: f64,
    p0: f64,
    p1: f64,
}

impl LogAxis {
    fn new(values: impl Iterator<Item = f64>, p0: f64, p1: f64) -> Self {
        let (mut lo, mut hi) = values.fold((f64::INFINITY, 0.0f64), |(a, b), v| (a.min(v), b.max(v)));
        if !(lo < hi) {
            (lo, hi) = (lo / 2.0, lo * 2.0);
        }
        // a little room on both ends
        let pad = (hi / lo).powf(0.05);
        Self { lo: lo / pad, hi: hi * pad, p0, p1 }
    }

    fn map(&self, v: f64) -> f64 {
        self.p0 + (self.p1 - self.p0) * (v / self.lo).ln() / (self.hi / self.lo).ln()
    }

    fn ticks(&self) -> Vec<f64> {
        (0..TICKS).map(|j| self.lo * (self.hi / self.lo).powf(j as f64 / (TICKS - 1) as f64)).collect()
    }

    fn contains(&self, v: f64) -> bool {
        v >= self.lo && v <= self.hi
    }
}

/// Log–log plot of `𝔥` against `ln ln(1/ε)` with the fitted bound `C x^{−κ}` from the ledger.
/// Rows without a positive Hausdorff distance are plotted as `|η − η′|` with `ψ` overlaid.
/// Flagged rows get a cross marker; unflagged rows are plain dots.
pub fn render_svg(rows: &[StabilityRow], ledger: &ConstantsLedger) -> String {
    let shape = rows.iter().any(|r| r.hausdorff > 0.0);
    let y_of = |r: &StabilityRow| if shape { r.hausdorff } else { r.eta_gap };
    let points: Vec<(f64, f64, &StabilityRow)> = rows
        .iter()
        .filter_map(|r| lnln_inv(r.eps).map(|x| (x, y_of(r), r)))
        .filter(|(x, y, _)| *x > 0.0 && *y > 0.0 && y.is_finite())
        .collect();
    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" version="1.1" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}">"#
    );
    let _ = writeln!(s, r#"<rect x="0" y="0" width="{WIDTH}" height="{HEIGHT}" fill="white"/>"#);
    let (x0, x1, y0, y1) = (LEFT, WIDTH - RIGHT, HEIGHT - BOTTOM, TOP);
    let _ = writeln!(s, r#"<g stroke="black" stroke-width="1"><line x1="{x0}" y1="{y0}" x2="{x1}" y2="{y0}"/><line x1="{x0}" y1="{y0}" x2="{x0}" y2="{y1}"/></g>"#);
    let ylabel = if shape { "Hausdorff distance" } else { "|eta - eta'|" };
    let _ = writeln!(
        s,
        r#"<g font-family="sans-serif" font-size="12"><text x="{}" y="{}" text-anchor="middle">ln ln(1/eps)</text><text x="16" y="{}" text-anchor="middle" transform="rotate(-90 16 {})">{}</text></g>"#,
        0.5 * (x0 + x1),
        HEIGHT - 12.0,
        0.5 * (y0 + y1),
        0.5 * (y0 + y1),
        escape(ylabel)
    );
    if points.is_empty() {
        let _ = writeln!(s, r#"<text x="{}" y="{}" font-family="sans-serif" font-size="14" text-anchor="middle">no plottable rows</text>"#, 0.5 * (x0 + x1), 0.5 * (y0 + y1));
        s.push_str("</svg>\n");
        return s;
    }
    let curve = |x: f64| -> Option<f64> {
        if shape {
            Some(ledger.get(names::C)? * x.powf(-ledger.get(names::KAPPA)?))
        } else {
            PsiConstants::from_ledger(ledger).ok()?.eval_ln(x.exp()).ok()
        }
    };
    let xa = LogAxis::new(points.iter().map(|p| p.0), x0, x1);
    let curve_pts: Vec<(f64, f64)> = (0..=64)
        .map(|j| xa.lo * (xa.hi / xa.lo).powf(j as f64 / 64.0))
        .filter_map(|x| curve(x).filter(|y| *y > 0.0 && y.is_finite()).map(|y| (x, y)))
        .collect();
    let ya = LogAxis::new(points.iter().map(|p| p.1).chain(curve_pts.iter().map(|c| c.1)), y0, y1);
    s.push_str(r#"<g font-family="sans-serif" font-size="10" stroke="none" fill="black">"#);
    for t in xa.ticks() {
        let _ = write!(s, r#"<text x="{:.2}" y="{:.2}" text-anchor="middle">{:.3}</text>"#, xa.map(t), y0 + 16.0, t);
    }
    for t in ya.ticks() {
        let _ = write!(s, r#"<text x="{:.2}" y="{:.2}" text-anchor="end">{:.2e}</text>"#, x0 - 6.0, ya.map(t) + 3.0, t);
    }
    s.push_str("</g>\n");
    if curve_pts.len() >= 2 {
        let path: Vec<String> = curve_pts
            .iter()
            .filter(|(_, y)| ya.contains(*y))
            .map(|&(x, y)| format!("{:.2},{:.2}", xa.map(x), ya.map(y)))
            .collect();
        let _ = writeln!(s, r#"<polyline class="bound" fill="none" stroke="steelblue" stroke-width="1.5" points="{}"/>"#, path.join(" "));
    }
    for (x, y, row) in &points {
        let (px, py) = (xa.map(*x), ya.map(*y));
        let _ = writeln!(s, r#"<circle class="row" cx="{px:.2}" cy="{py:.2}" r="3" fill="black"/>"#);
        if !row.flags.is_empty() {
            let names: Vec<&str> = row.flags.iter().map(|f| f.as_str()).collect();
            let _ = writeln!(
                s,
                r#"<path class="flag" d="M{:.2} {:.2} L{:.2} {:.2} M{:.2} {:.2} L{:.2} {:.2}" stroke="firebrick" stroke-width="1.5"><title>{}</title></path>"#,
                px - 5.0,
                py - 5.0,
                px + 5.0,
                py + 5.0,
                px - 5.0,
                py + 5.0,
                px + 5.0,
                py - 5.0,
                escape(&names.join(";"))
            );
        }
    }
    s.push_str("</svg>\n");
    s
}

/// Write the CSV, the SVG plot and the ledger snapshot.
pub fn emit_report(rows: &[StabilityRow], ledger: &ConstantsLedger, paths: &OutputPaths) -> Result<(), LabError> {
    if rows.is_empty() {
        return Err(LabError::EmptyReport);
    }
    fs::create_dir_all(&paths.dir).map_err(|e| LabError::io(&paths.dir, e))?;
    let write = |path: std::path::PathBuf, text: String| fs::write(&path, text).map_err(|e| LabError::io(&path, e));
    write(paths.csv_path(), rows_to_csv(rows))?;
    write(paths.svg_path(), render_svg(rows, ledger))?;
    write(paths.ledger_path(), ledger.snapshot())
}
