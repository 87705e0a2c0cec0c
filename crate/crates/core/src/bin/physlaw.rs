use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use physlaw::harness::ablation::REPORT_JSON;
use physlaw::harness::dataset::DATASET_DIR;
use physlaw::harness::pipeline::{fit_component, observe_scenario, split_data};
use physlaw::harness::{
    emit_report, generate_dataset, run_ablation, Dataset, ExperimentConfig, Format, PhysicistMethod, Report, Split,
};
use physlaw::observer::{Component, ObserverMethod};
use physlaw::world::ScenarioKind;
use physlaw::Error;

#[derive(Parser)]
#[command(name = "physlaw", version, about = "Rediscover equations of motion from rendered video")]
struct Cli {
    /// Flat key=value configuration file.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Master seed; overrides the configuration.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output directory; overrides the configuration.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Extra `key=value` overrides, applied after the configuration file.
    #[arg(long = "set", global = true, value_name = "KEY=VALUE")]
    overrides: Vec<String>,
    /// Keep frames in memory instead of writing PGM files.
    #[arg(long, global = true)]
    no_save_frames: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Sample trajectories and write the dataset.
    Gen,
    /// Localize the object in every video and report MED.
    Observe {
        #[arg(long)]
        method: ObserverMethod,
        #[arg(long)]
        scenario: Option<ScenarioKind>,
    },
    /// Fit one physicist method to one scenario and displacement component.
    Fit {
        #[arg(long)]
        method: PhysicistMethod,
        #[arg(long)]
        scenario: ScenarioKind,
        #[arg(long)]
        component: ComponentArg,
        #[arg(long, default_value = "truth")]
        observer: ObserverMethod,
    },
    /// Run the full observer × physicist grid and write every report format.
    Ablate,
    /// Render a saved report.
    Report {
        #[arg(long, value_delimiter = ',', default_value = "md,csv,svg")]
        format: Vec<Format>,
    },
}

#[derive(Clone, Copy, Debug, clap::ValueEnum)]
enum ComponentArg {
    X,
    Y,
}

impl From<ComponentArg> for Component {
    fn from(c: ComponentArg) -> Self {
        match c {
            ComponentArg::X => Component::X,
            ComponentArg::Y => Component::Y,
        }
    }
}

enum Failure {
    Usage(String),
    Runtime(String),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        match e {
            Error::Config(_) => Failure::Usage(e.to_string()),
            _ => Failure::Runtime(e.to_string()),
        }
    }
}

fn overrides(cli: &Cli) -> Result<Vec<(String, String)>, Failure> {
    let mut pairs = Vec::new();
    for s in &cli.overrides {
        let (k, v) = s
            .split_once('=')
            .ok_or_else(|| Failure::Usage(format!("--set expects KEY=VALUE, got `{s}`")))?;
        pairs.push((k.trim().to_string(), v.trim().to_string()));
    }
    if let Some(seed) = cli.seed {
        pairs.push(("master_seed".into(), seed.to_string()));
    }
    if let Some(out) = &cli.out {
        pairs.push(("output_dir".into(), out.display().to_string()));
    }
    if cli.no_save_frames {
        pairs.push(("save_frames".into(), "false".into()));
    }
    Ok(pairs)
}

fn resolve_config(cli: &Cli) -> Result<ExperimentConfig, Failure> {
    let base = match &cli.config {
        Some(path) => {
            let text = std::fs::read_to_string(path).map_err(|e| Failure::Usage(format!("{}: {e}", path.display())))?;
            ExperimentConfig::from_text(&text).map_err(|e| Failure::Usage(format!("{}: {e}", path.display())))?
        }
        None => ExperimentConfig::default(),
    };
    base.with_overrides(&overrides(cli)?).map_err(|e| Failure::Usage(e.to_string()))
}

/// Loads the saved dataset, letting explicit flags override its configuration.
fn load_dataset(cli: &Cli, out: &Path) -> Result<(Dataset, ExperimentConfig), Failure> {
    let root = out.join(DATASET_DIR);
    if !root.exists() {
        return Err(Failure::Runtime(format!(
            "no dataset at {}; run `physlaw gen` first",
            root.display()
        )));
    }
    let (ds, cfg) = Dataset::load(&root)?;
    let mut pairs = overrides(cli)?;
    pairs.retain(|(k, _)| k != "save_frames");
    let cfg = cfg.with_overrides(&pairs).map_err(|e| Failure::Usage(e.to_string()))?;
    Ok((ds, cfg))
}

fn run(cli: &Cli) -> Result<(), Failure> {
    let cfg = resolve_config(cli)?;
    let out = cfg.output_dir.clone();
    match &cli.command {
        Command::Gen => {
            let mut ds = generate_dataset(&cfg)?;
            let root = out.join(DATASET_DIR);
            ds.save(&cfg, &root)?;
            println!(
                "wrote {} videos of {} frames to {}{}",
                ds.videos.len(),
                cfg.frames_per_video,
                root.display(),
                if cfg.save_frames { "" } else { " (trajectories only)" }
            );
        }
        Command::Observe { method, scenario } => {
            let (ds, cfg) = load_dataset(cli, &out)?;
            let scenarios: Vec<ScenarioKind> = match scenario {
                Some(s) => vec![*s],
                None => cfg.scenarios.clone(),
            };
            let scale = cfg.world.extent / cfg.render.resolution as f64;
            for kind in scenarios {
                let obs = observe_scenario(&cfg, &ds, kind, &[*method]);
                let mut failed = 0;
                for (id, row) in obs.videos.iter().zip(&obs.results) {
                    match &row[0] {
                        Ok(o) => {
                            let path = out.join("observations").join(method.name()).join(id.rel_dir()).with_extension("csv");
                            std::fs::create_dir_all(path.parent().expect("nested path"))
                                .map_err(|e| Failure::Runtime(format!("{}: {e}", path.display())))?;
                            o.write_csv(&path)?;
                        }
                        Err(e) => {
                            failed += 1;
                            eprintln!("{e}");
                        }
                    }
                }
                let meds = obs.med_world(&ds, *method, Split::Test)?;
                let mean = meds.iter().sum::<f64>() / meds.len().max(1) as f64;
                println!(
                    "{kind}: {} videos, {failed} failed, test MED {:.4} px ({:.4} world)",
                    obs.videos.len(),
                    mean / scale,
                    mean
                );
            }
        }
        Command::Fit {
            method,
            scenario,
            component,
            observer,
        } => {
            let (ds, cfg) = load_dataset(cli, &out)?;
            let component = Component::from(*component);
            let obs = observe_scenario(&cfg, &ds, *scenario, &[*observer]);
            let train = split_data(&cfg, &ds, &obs, *observer, Split::Train)?;
            let test = split_data(&cfg, &ds, &obs, *observer, Split::Test)?;
            let fit = fit_component(&cfg, &ds, *scenario, *observer, *method, component, &train, &test)?;
            let stem = format!("{scenario}_{observer}_{method}_{}", component.name());
            let dir = out.join("fits");
            std::fs::create_dir_all(&dir).map_err(|e| Failure::Runtime(format!("{}: {e}", dir.display())))?;
            let m = &fit.result.metrics;
            let opt = |v: Option<f64>| v.map_or_else(|| "n/a".to_string(), |x| format!("{x:.6}"));
            let mut text = format!(
                "scenario: {scenario}\nobserver: {observer}\nphysicist: {method}\ncomponent: {}\ntrain_rows: {}\ntest_rows: {}\nmapa: {}\nr2: {}\nmae: {:e}\n",
                component.name(),
                train.table.len(),
                test.table.len(),
                opt(m.mapa),
                opt(m.r2),
                m.mae
            );
            if let Some(eq) = &fit.result.equation {
                text.push_str(&format!("equation: {}\nsexpr: {}\n", eq.infix, eq.sexpr));
            }
            if let Some(model) = &fit.result.model {
                text.push_str(model);
            }
            print!("{text}");
            let path = dir.join(format!("{stem}.txt"));
            std::fs::write(&path, &text).map_err(|e| Failure::Runtime(format!("{}: {e}", path.display())))?;
            if let Some(search) = &fit.search {
                search.write_report(&dir.join(format!("{stem}_gp.txt")), &dir.join(format!("{stem}_history.csv")))?;
            }
        }
        Command::Ablate => {
            let root = out.join(DATASET_DIR);
            let (ds, cfg) = if root.exists() {
                load_dataset(cli, &out)?
            } else {
                (generate_dataset(&cfg)?, cfg)
            };
            let report = run_ablation(&cfg, &ds)?;
            std::fs::create_dir_all(&out).map_err(|e| Failure::Runtime(format!("{}: {e}", out.display())))?;
            report.save(&out.join(REPORT_JSON))?;
            for path in emit_report(&report, &Format::ALL, &out)? {
                println!("wrote {}", path.display());
            }
            let failed = report.cells.iter().filter(|c| c.failure.is_some()).count();
            println!("{} cells, {failed} failed", report.cells.len());
        }
        Command::Report { format } => {
            let report = Report::load(&out.join(REPORT_JSON))?;
            for path in emit_report(&report, format, &out)? {
                println!("wrote {}", path.display());
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Usage(m)) => {
            eprintln!("error: {m}");
            ExitCode::from(1)
        }
        Err(Failure::Runtime(m)) => {
            eprintln!("error: {m}");
            ExitCode::from(2)
        }
    }
}
