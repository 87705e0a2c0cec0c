//! Markdown, CSV and SVG renderings of a [`Report`].

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use super::ablation::Report;
use super::PhysicistMethod;
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Format {
    Markdown,
    Csv,
    Svg,
}

impl Format {
    pub const ALL: [Format; 3] = [Format::Markdown, Format::Csv, Format::Svg];

    pub fn name(self) -> &'static str {
        match self {
            Format::Markdown => "md",
            Format::Csv => "csv",
            Format::Svg => "svg",
        }
    }
}

impl FromStr for Format {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        Format::ALL
            .into_iter()
            .find(|f| f.name() == s)
            .ok_or_else(|| Error::Parse(format!("unknown report format `{s}`")))
    }
}

fn num(v: Option<f64>, digits: usize) -> String {
    v.map_or_else(|| "n/a".to_string(), |x| format!("{x:.digits$}"))
}

fn raw(v: Option<f64>) -> String {
    v.map_or_else(String::new, |x| x.to_string())
}

/// Quotes a CSV field when needed.
fn field(s: &str) -> String {
    if s.contains([',', '"', '\n']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

pub fn markdown(r: &Report) -> String {
    let mut s = String::from("# Ablation report\n\n");

    s.push_str("## Localization error\n\nMean Euclidean distance between estimated and true positions on the test videos.\n\n");
    s.push_str("| Observer | MED (pixels) | MED (world) | Videos | Failed |\n|---|---|---|---|---|\n");
    for e in &r.med_table {
        let _ = writeln!(
            s,
            "| {} | {} | {} | {} | {} |",
            e.method.label(),
            num(e.med_pixels, 3),
            num(e.med_world, 3),
            e.videos,
            e.failed_videos
        );
    }

    if !r.mapa_grid.is_empty() {
        s.push_str("\n## Accuracy with true positions\n\nMAPA per scenario, pooled over both displacement components.\n\n| Scenario |");
        for p in &r.physicists {
            let _ = write!(s, " {} |", p.label());
        }
        s.push_str("\n|---|");
        s.push_str(&"---|".repeat(r.physicists.len()));
        s.push('\n');
        for &sc in &r.scenarios {
            let _ = write!(s, "| {sc} |");
            for &p in &r.physicists {
                let cell = r.mapa(sc, p).and_then(|e| e.mapa);
                let _ = write!(s, " {} |", num(cell, 4));
            }
            s.push('\n');
        }
    }

    s.push_str("\n## Observer × physicist\n\nMean R² over scenarios and displacement components on the test videos.\n\n| Observer |");
    for p in &r.physicists {
        let _ = write!(s, " {} |", p.label());
    }
    s.push_str("\n|---|");
    s.push_str(&"---|".repeat(r.physicists.len()));
    s.push('\n');
    for &o in &r.observers {
        let _ = write!(s, "| {} |", o.label());
        for &p in &r.physicists {
            let e = r.r2(o, p);
            let mark = if e.is_some_and(|e| e.failure.is_some()) { "*" } else { "" };
            let _ = write!(s, " {}{mark} |", num(e.and_then(|e| e.r2), 4));
        }
        s.push('\n');
    }

    if !r.equations.is_empty() {
        s.push_str("\n## Discovered equations\n\n| Scenario | Observer | Target | Equation |\n|---|---|---|---|\n");
        for e in &r.equations {
            let _ = writeln!(s, "| {} | {} | {} | `{}` |", e.scenario, e.observer.label(), e.component.name(), e.infix);
        }
    }

    let failures: Vec<_> = r.cells.iter().filter(|c| c.failure.is_some()).collect();
    if !failures.is_empty() {
        s.push_str("\n## Failed cells\n\n");
        for c in failures {
            let _ = writeln!(
                s,
                "* {} / {} / {}: {}",
                c.scenario,
                c.observer,
                c.physicist,
                c.failure.as_deref().unwrap_or_default()
            );
        }
    }

    let _ = write!(
        s,
        "\n## Provenance\n\n{} {}, master seed {}.\n\n```\n",
        r.provenance.package, r.provenance.version, r.provenance.master_seed
    );
    for (k, v) in &r.provenance.config {
        let _ = writeln!(s, "{k}={v}");
    }
    s.push_str("```\n");
    s
}

pub fn med_csv(r: &Report) -> String {
    let mut s = String::from("method,med_pixels,med_world,videos,failed_videos\n");
    for e in &r.med_table {
        let _ = writeln!(s, "{},{},{},{},{}", e.method, raw(e.med_pixels), raw(e.med_world), e.videos, e.failed_videos);
    }
    s
}

pub fn mapa_csv(r: &Report) -> String {
    let mut s = String::from("scenario,physicist,mapa,failure\n");
    for e in &r.mapa_grid {
        let _ = writeln!(s, "{},{},{},{}", e.scenario, e.physicist, raw(e.mapa), field(e.failure.as_deref().unwrap_or("")));
    }
    s
}

pub fn r2_csv(r: &Report) -> String {
    let mut s = String::from("observer,physicist,r2,components,failure\n");
    for e in &r.r2_grid {
        let _ = writeln!(
            s,
            "{},{},{},{},{}",
            e.observer,
            e.physicist,
            raw(e.r2),
            e.components,
            field(e.failure.as_deref().unwrap_or(""))
        );
    }
    s
}

pub fn equations_csv(r: &Report) -> String {
    let mut s = String::from("scenario,observer,component,infix,sexpr,train_mae\n");
    for e in &r.equations {
        let _ = writeln!(
            s,
            "{},{},{},{},{},{}",
            e.scenario,
            e.observer,
            e.component.name(),
            field(&e.infix),
            field(&e.sexpr),
            e.train_mae
        );
    }
    s
}

fn xml_escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;").replace('"', "&quot;")
}

const PALETTE: [&str; 6] = ["#4e79a7", "#f28e2b", "#e15759", "#76b7b2", "#59a14f", "#af7aa1"];

/// Grouped bar chart of the MAPA grid: one group per scenario, one bar per physicist.
pub fn mapa_svg(r: &Report) -> String {
    let (left, top, plot_h, bar_w, gap) = (60.0, 40.0, 240.0, 14.0, 24.0);
    let np = r.physicists.len().max(1) as f64;
    let group_w = np * bar_w + gap;
    let width = left + group_w * r.scenarios.len() as f64 + 180.0;
    let height = top + plot_h + 60.0;
    let y_of = |v: f64| top + plot_h * (1.0 - v.clamp(0.0, 1.0));

    let mut s = String::new();
    let _ = writeln!(
        s,
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{width:.0}\" height=\"{height:.0}\" viewBox=\"0 0 {width:.0} {height:.0}\">"
    );
    let _ = writeln!(s, "<rect x=\"0\" y=\"0\" width=\"{width:.0}\" height=\"{height:.0}\" fill=\"white\"/>");
    let _ = writeln!(
        s,
        "<text x=\"{left}\" y=\"24\" font-family=\"sans-serif\" font-size=\"14\">MAPA with true positions</text>"
    );
    for tick in 0..=4 {
        let v = tick as f64 / 4.0;
        let y = y_of(v);
        let _ = writeln!(
            s,
            "<line x1=\"{left}\" y1=\"{y:.1}\" x2=\"{:.1}\" y2=\"{y:.1}\" stroke=\"#dddddd\"/>",
            width - 170.0
        );
        let _ = writeln!(
            s,
            "<text x=\"{:.1}\" y=\"{:.1}\" font-family=\"sans-serif\" font-size=\"10\" text-anchor=\"end\">{v:.2}</text>",
            left - 6.0,
            y + 3.0
        );
    }
    for (gi, &sc) in r.scenarios.iter().enumerate() {
        let x0 = left + gap / 2.0 + gi as f64 * group_w;
        let _ = writeln!(s, "<g class=\"scenario\" data-scenario=\"{sc}\">");
        for (pi, &p) in r.physicists.iter().enumerate() {
            let v = r.mapa(sc, p).and_then(|e| e.mapa).unwrap_or(0.0);
            let y = y_of(v);
            let _ = writeln!(
                s,
                "<rect x=\"{:.1}\" y=\"{y:.1}\" width=\"{bar_w}\" height=\"{:.1}\" fill=\"{}\"><title>{} {}: {v:.4}</title></rect>",
                x0 + pi as f64 * bar_w,
                top + plot_h - y,
                PALETTE[pi % PALETTE.len()],
                sc,
                xml_escape(p.label())
            );
        }
        let _ = writeln!(
            s,
            "<text x=\"{:.1}\" y=\"{:.1}\" font-family=\"sans-serif\" font-size=\"11\" text-anchor=\"middle\">{sc}</text>",
            x0 + np * bar_w / 2.0,
            top + plot_h + 16.0
        );
        s.push_str("</g>\n");
    }
    let lx = width - 160.0;
    for (pi, &p) in r.physicists.iter().enumerate() {
        let y = top + 10.0 + pi as f64 * 18.0;
        let _ = writeln!(
            s,
            "<rect x=\"{lx:.1}\" y=\"{:.1}\" width=\"10\" height=\"10\" fill=\"{}\"/>",
            y - 9.0,
            PALETTE[pi % PALETTE.len()]
        );
        let _ = writeln!(
            s,
            "<text x=\"{:.1}\" y=\"{y:.1}\" font-family=\"sans-serif\" font-size=\"11\">{}</text>",
            lx + 16.0,
            xml_escape(p.label())
        );
    }
    s.push_str("</svg>\n");
    s
}

/// Writes the requested formats into `dir` and returns the files written.
pub fn emit_report(r: &Report, formats: &[Format], dir: &Path) -> Result<Vec<PathBuf>> {
    fs::create_dir_all(dir).map_err(Error::io(dir))?;
    let mut files: Vec<(&str, String)> = Vec::new();
    for f in formats {
        match f {
            Format::Markdown => files.push(("report.md", markdown(r))),
            Format::Csv => {
                files.push(("med.csv", med_csv(r)));
                files.push(("mapa.csv", mapa_csv(r)));
                files.push(("r2.csv", r2_csv(r)));
                files.push(("equations.csv", equations_csv(r)));
            }
            Format::Svg => files.push(("mapa.svg", mapa_svg(r))),
        }
    }
    let mut written = Vec::new();
    for (name, text) in files {
        let path = dir.join(name);
        fs::write(&path, text).map_err(Error::io(&path))?;
        written.push(path);
    }
    Ok(written)
}

/// Best-to-worst physicists by R² for one observer row.
pub fn ranked_row(r: &Report, observer: crate::observer::ObserverMethod) -> Vec<(PhysicistMethod, f64)> {
    let mut row: Vec<(PhysicistMethod, f64)> = r
        .physicists
        .iter()
        .filter_map(|&p| r.r2(observer, p).and_then(|e| e.r2).map(|v| (p, v)))
        .collect();
    row.sort_by(|a, b| b.1.total_cmp(&a.1));
    row
}
