mod common;

use physlaw::harness::report::{mapa_csv, markdown, mapa_svg, r2_csv};
use physlaw::harness::{emit_report, generate_dataset, run_ablation, Format, Report};

fn report() -> Report {
    let cfg = common::tiny();
    run_ablation(&cfg, &generate_dataset(&cfg).unwrap()).unwrap()
}

fn data_rows(csv: &str) -> Vec<Vec<String>> {
    csv.lines().skip(1).map(|l| l.split(',').map(str::to_string).collect()).collect()
}

#[test]
fn csv_cell_count_equals_grid_size() {
    let r = report();
    let rows = data_rows(&r2_csv(&r));
    assert_eq!(rows.len(), r.observers.len() * r.physicists.len());
    assert!(rows.iter().all(|row| row.len() == 5));
    let rows = data_rows(&mapa_csv(&r));
    assert_eq!(rows.len(), r.scenarios.len() * r.physicists.len());
    assert!(rows.iter().all(|row| row.len() == 4));
}

#[test]
fn markdown_has_one_grid_row_per_observer() {
    let r = report();
    let md = markdown(&r);
    let grid = md.split("## Observer × physicist").nth(1).unwrap();
    let grid = grid.split("\n## ").next().unwrap();
    for o in &r.observers {
        let n = grid.lines().filter(|l| l.starts_with(&format!("| {} |", o.label()))).count();
        assert_eq!(n, 1, "{}", o.label());
    }
    let table_rows = grid.lines().filter(|l| l.starts_with("| ") && !l.starts_with("| Observer")).count();
    assert_eq!(table_rows, r.observers.len());
}

#[test]
fn svg_is_well_formed_with_one_group_per_scenario() {
    let r = report();
    let svg = mapa_svg(&r);
    let doc = roxmltree::Document::parse(&svg).unwrap();
    assert_eq!(doc.root_element().tag_name().name(), "svg");
    let groups: Vec<_> = doc
        .descendants()
        .filter(|n| n.has_tag_name("g") && n.attribute("class") == Some("scenario"))
        .collect();
    assert_eq!(groups.len(), r.scenarios.len());
    for (g, s) in groups.iter().zip(&r.scenarios) {
        assert_eq!(g.attribute("data-scenario"), Some(s.name()));
        let bars = g.children().filter(|n| n.has_tag_name("rect")).count();
        assert_eq!(bars, r.physicists.len());
    }
}

#[test]
fn emit_writes_every_requested_format() {
    let r = report();
    let dir = tempfile::tempdir().unwrap();
    let files = emit_report(&r, &Format::ALL, dir.path()).unwrap();
    let names: Vec<String> = files.iter().map(|p| p.file_name().unwrap().to_string_lossy().into_owned()).collect();
    assert_eq!(names, ["report.md", "med.csv", "mapa.csv", "r2.csv", "equations.csv", "mapa.svg"]);
    let only_svg = emit_report(&r, &[Format::Svg], &dir.path().join("svg")).unwrap();
    assert_eq!(only_svg.len(), 1);
}
