use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

use extgeom::algebra::{check_structure_constants, PresetKind, StructureConstants};
use extgeom::scenario::{run, ReportDocument, Scenario, Stage};

#[derive(Parser)]
#[command(
    name = "extgeom",
    about = "Verify Lie-algebra extension scenarios: basis changes, Jacobi constraints, tetrad geometry, Bianchi identities and field equations",
    version
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    Json,
    Text,
}

#[derive(Subcommand)]
enum Command {
    /// Run a scenario file through the staged verification pipeline.
    Run {
        scenario: PathBuf,
        /// Override the scenario's sample count.
        #[arg(long)]
        samples: Option<usize>,
        /// Override the scenario's tolerance.
        #[arg(long)]
        tol: Option<f64>,
        /// Override the scenario's sampling seed.
        #[arg(long)]
        seed: Option<u64>,
        /// Comma-separated stage list (algebra,gauge,extended,geometry,dynamics).
        #[arg(long, value_delimiter = ',')]
        stages: Option<Vec<String>>,
        /// Write the JSON report here in addition to stdout.
        #[arg(long)]
        report: Option<PathBuf>,
        #[arg(long, value_enum, default_value = "text")]
        format: Format,
    },
    /// Check a group's structure constants (preset name or JSON file with
    /// {"dim": n, "f": [[[...]]]}).
    CheckGroup { group: String },
    /// Validate a scenario file without running it.
    Validate { scenario: PathBuf },
}

fn main() -> ExitCode {
    match dispatch() {
        Ok(code) => code,
        Err(msg) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
    }
}

fn dispatch() -> Result<ExitCode, String> {
    let cli = Cli::parse();
    match cli.command {
        Command::Run {
            scenario,
            samples,
            tol,
            seed,
            stages,
            report,
            format,
        } => {
            let mut sc = Scenario::load(&scenario).map_err(|e| e.to_string())?;
            if let Some(s) = samples {
                sc.opts.samples = s;
            }
            if let Some(t) = tol {
                sc.opts.tol = t;
            }
            if let Some(s) = seed {
                sc.opts.seed = s;
            }
            if let Some(names) = stages {
                let mut list = Vec::new();
                for n in names {
                    let stage = Stage::ALL
                        .iter()
                        .find(|s| s.name() == n)
                        .copied()
                        .ok_or_else(|| format!("unknown stage `{n}`"))?;
                    list.push(stage);
                }
                sc.stages = list;
            }
            let doc = run(&sc);
            emit(&doc, format, report.as_deref())?;
            Ok(exit_for(&doc))
        }
        Command::CheckGroup { group } => {
            let constants = match PresetKind::from_name(&group) {
                Ok(kind) => {
                    let chart = extgeom::Chart::standard(kind.dim());
                    extgeom::algebra::preset(kind, &chart)
                        .map_err(|e| e.to_string())?
                        .constants
                }
                Err(_) => {
                    let text = std::fs::read_to_string(&group).map_err(|e| {
                        format!("`{group}` is not a preset and not a readable file: {e}")
                    })?;
                    #[derive(serde::Deserialize)]
                    struct InlineGroup {
                        #[allow(dead_code)]
                        #[serde(default)]
                        dim: usize,
                        f: Vec<Vec<Vec<f64>>>,
                    }
                    let parsed: InlineGroup =
                        serde_json::from_str(&text).map_err(|e| e.to_string())?;
                    StructureConstants::from_nested(&parsed.f).map_err(|e| e.to_string())?
                }
            };
            let rows = check_structure_constants(&constants, 1e-12);
            let mut ok = true;
            for r in &rows {
                println!(
                    "{:<55} max {:>11.3e}  {}",
                    r.identity,
                    r.max_abs,
                    if r.passed() { "pass" } else { "FAIL" }
                );
                ok &= r.passed();
            }
            Ok(if ok {
                ExitCode::SUCCESS
            } else {
                ExitCode::from(1)
            })
        }
        Command::Validate { scenario } => {
            let sc = Scenario::load(&scenario).map_err(|e| e.to_string())?;
            println!(
                "scenario `{}` is valid: group `{}` (dim {}), stages {:?}",
                sc.name,
                sc.group.name,
                sc.group.constants.dim(),
                sc.stages.iter().map(|s| s.name()).collect::<Vec<_>>()
            );
            Ok(ExitCode::SUCCESS)
        }
    }
}

fn emit(
    doc: &ReportDocument,
    format: Format,
    path: Option<&std::path::Path>,
) -> Result<(), String> {
    let json = serde_json::to_string_pretty(doc).map_err(|e| e.to_string())?;
    match format {
        Format::Json => println!("{json}"),
        Format::Text => print!("{}", doc.render_text()),
    }
    if let Some(p) = path {
        std::fs::write(p, &json).map_err(|e| format!("writing report: {e}"))?;
    }
    Ok(())
}

fn exit_for(doc: &ReportDocument) -> ExitCode {
    if doc.all_identities_pass() {
        ExitCode::SUCCESS
    } else {
        ExitCode::from(1)
    }
}
