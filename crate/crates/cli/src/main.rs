use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use cauchy_source::experiments::{run_multi, run_sweep, sweep_eoc, LevelFields, MultiOutput, SweepOutcome};
use cauchy_source::io::{
    write_eoc_csv, write_history_csv, write_multi_csv, write_nodal_csv, write_sweep_csv, write_triangles_csv,
    write_vtk_file,
};
use cauchy_source::selftest::{run_selftest, SelftestOptions};
use cauchy_source::{Error, NodalField, TriMesh};
use clap::{Args, Parser, Subcommand};
use serde_json::{json, Value};

mod config;
mod report;

use config::{Experiment, Format, RunConfig, RunSettings, ThetaSetting};

#[derive(Parser)]
#[command(name = "cauchy-source", version, about = "Source reconstruction from boundary Cauchy data")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a numerical example and export its tables and fields.
    Run(RunArgs),
    /// Check the discrete operators and solvers on small meshes.
    Selftest(SelftestArgs),
    /// Write a uniform triangulation.
    ExportMesh(ExportArgs),
}

#[derive(Args)]
struct RunArgs {
    /// TOML (or .json) file with run settings; flags override it.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long, value_parser = clap::value_parser!(u8).range(1..=2))]
    example: Option<u8>,
    /// Refinement levels of example 1, comma separated.
    #[arg(long, value_delimiter = ',')]
    levels: Option<Vec<usize>>,
    #[arg(long)]
    fine_level: Option<usize>,
    /// Level of example 2.
    #[arg(long)]
    level: Option<usize>,
    /// Measurement family sizes of example 2, comma separated.
    #[arg(long = "I", value_delimiter = ',')]
    measurements: Option<Vec<usize>>,
    #[arg(long)]
    seed: Option<u64>,
    /// Noise scale, or `scheduled` for the per-level rule of example 1.
    #[arg(long, value_parser = ThetaSetting::parse)]
    theta: Option<ThetaSetting>,
    #[arg(long)]
    rho_coeff: Option<f64>,
    #[arg(long)]
    tau1_coeff: Option<f64>,
    #[arg(long)]
    tau2_coeff: Option<f64>,
    #[arg(long)]
    max_iter: Option<usize>,
    /// Output directory (default `results`).
    #[arg(long)]
    out: Option<PathBuf>,
    /// Files to write, comma separated (default csv,json).
    #[arg(long, value_delimiter = ',')]
    format: Option<Vec<Format>>,
}

#[derive(Args)]
struct SelftestArgs {
    #[arg(long, default_value_t = 1)]
    seed: u64,
    #[arg(long, value_delimiter = ',', default_value = "2,4,8")]
    levels: Vec<usize>,
    /// Write the results as JSON into this directory.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Test hook: make the diffusion indefinite on one triangle.
    #[arg(long, hide = true)]
    corrupt_diffusion: bool,
}

#[derive(Args)]
struct ExportArgs {
    #[arg(long)]
    level: usize,
    #[arg(long, default_value = DEFAULT_MESH_DIR)]
    out: PathBuf,
    #[arg(long, value_delimiter = ',', default_value = "vtk")]
    format: Vec<Format>,
}

const DEFAULT_MESH_DIR: &str = ".";

/// A failure reported as a single JSON line on standard error.
struct Failure {
    kind: String,
    message: String,
    level: Option<usize>,
    code: u8,
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure {
            kind: e.kind().to_string(),
            message: e.to_string(),
            level: None,
            code: 1,
        }
    }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Self {
        Error::from(e).into()
    }
}

impl Failure {
    fn record(&self) -> Value {
        json!({ "kind": self.kind, "message": self.message, "level": self.level })
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind;
            if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) {
                e.exit();
            }
            eprint!("{e}");
            let failure = Failure {
                kind: "usage".into(),
                message: e.kind().to_string(),
                level: None,
                code: 2,
            };
            eprintln!("{}", json!({ "error": failure.record() }));
            return ExitCode::from(2);
        }
    };
    let result = match cli.command {
        Command::Run(args) => cmd_run(args),
        Command::Selftest(args) => cmd_selftest(args),
        Command::ExportMesh(args) => cmd_export_mesh(args),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("{}", json!({ "error": f.record() }));
            ExitCode::from(f.code)
        }
    }
}

fn create(path: &Path) -> Result<BufWriter<File>, Failure> {
    Ok(BufWriter::new(File::create(path)?))
}

fn write_json(path: &Path, value: &Value) -> Result<(), Failure> {
    let mut w = create(path)?;
    serde_json::to_writer_pretty(&mut w, value).map_err(Error::from)?;
    writeln!(w)?;
    w.flush()?;
    Ok(())
}

fn cmd_run(args: RunArgs) -> Result<(), Failure> {
    let file = match &args.config {
        Some(path) => RunSettings::from_file(path)?,
        None => RunSettings::default(),
    };
    let flags = RunSettings {
        example: args.example,
        levels: args.levels,
        fine_level: args.fine_level,
        level: args.level,
        measurements: args.measurements,
        seed: args.seed,
        theta: args.theta,
        rho_coeff: args.rho_coeff,
        tau1_coeff: args.tau1_coeff,
        tau2_coeff: args.tau2_coeff,
        max_iter: args.max_iter,
        out: args.out,
        format: args.format,
    };
    let cfg = RunConfig::resolve(file.overridden_by(flags))?;
    std::fs::create_dir_all(&cfg.out)?;
    match &cfg.experiment {
        Experiment::Sweep(sweep) => {
            let outcome = run_sweep(sweep)?;
            finish_sweep(&cfg, &outcome)
        }
        Experiment::Multi(multi) => {
            let outputs = run_multi(multi)?;
            finish_multi(&cfg, &outputs)
        }
    }
}

fn level_fields(f: &LevelFields) -> Vec<(&'static str, NodalField)> {
    vec![
        ("f", f.source.clone()),
        ("f_exact", f.exact_source.clone()),
        ("f_error", &f.source - &f.exact_source),
        ("neumann_error", f.neumann_diff.clone()),
        ("dirichlet_error", f.dirichlet_diff.clone()),
        ("dirichlet_minus_neumann", f.gap.clone()),
    ]
}

fn export_fields(cfg: &RunConfig, stem: &str, title: &str, fields: &LevelFields) -> Result<(), Failure> {
    let mesh = TriMesh::uniform(fields.source.level())?;
    let named = level_fields(fields);
    let refs: Vec<(&str, &NodalField)> = named.iter().map(|(n, f)| (*n, f)).collect();
    if cfg.exports.vtk {
        write_vtk_file(&cfg.out.join(format!("{stem}.vtk")), title, &mesh, &refs)?;
    }
    if cfg.exports.csv {
        write_nodal_csv(create(&cfg.out.join(format!("{stem}.csv")))?, &mesh, &refs)?;
    }
    Ok(())
}

fn finish_sweep(cfg: &RunConfig, outcome: &SweepOutcome) -> Result<(), Failure> {
    let records = outcome.records();
    let eoc = if records.len() >= 2 {
        Some(sweep_eoc(&records)?)
    } else {
        None
    };
    print!("{}", report::sweep_table(&records));
    if let Some(eoc) = &eoc {
        print!("\n{}", report::eoc_table(&records, eoc));
    }

    if cfg.exports.csv {
        write_sweep_csv(create(&cfg.out.join("sweep.csv"))?, &records)?;
        write_eoc_csv(create(&cfg.out.join("eoc.csv"))?, &records)?;
    }
    for level in &outcome.levels {
        let l = level.record.level;
        if cfg.exports.csv {
            write_history_csv(create(&cfg.out.join(format!("history_l{l}.csv")))?, &level.history)?;
        }
        export_fields(cfg, &format!("fields_l{l}"), &format!("example 1, level {l}"), &level.fields)?;
    }

    let failure = outcome.failure.as_ref().map(|(level, e)| Failure {
        kind: e.kind().to_string(),
        message: e.to_string(),
        level: Some(*level),
        code: 1,
    });
    if cfg.exports.json {
        let eoc_json = eoc.map(|cols| {
            let names = ["L2_f", "L2_N", "L2_D", "H1_N", "H1_D"];
            names
                .iter()
                .zip(cols)
                .map(|(n, c)| (n.to_string(), serde_json::to_value(c).unwrap_or(Value::Null)))
                .collect::<serde_json::Map<_, _>>()
        });
        let summary = json!({
            "status": if failure.is_some() { "failed" } else { "ok" },
            "config": cfg,
            "records": records,
            "eoc": eoc_json,
            "error": failure.as_ref().map(Failure::record),
        });
        write_json(&cfg.out.join("summary.json"), &summary)?;
    }
    failure.map_or(Ok(()), Err)
}

fn finish_multi(cfg: &RunConfig, outputs: &[MultiOutput]) -> Result<(), Failure> {
    let records: Vec<_> = outputs.iter().map(|o| o.record).collect();
    print!("{}", report::multi_table(&records));
    if cfg.exports.csv {
        write_multi_csv(create(&cfg.out.join("multi.csv"))?, &records)?;
    }
    for out in outputs {
        let i = out.record.measurements;
        if cfg.exports.csv {
            write_history_csv(create(&cfg.out.join(format!("history_I{i}.csv")))?, &out.history)?;
        }
        export_fields(cfg, &format!("fields_I{i}"), &format!("example 2, I = {i}"), &out.fields)?;
    }
    if cfg.exports.json {
        let summary = json!({
            "status": "ok",
            "config": cfg,
            "records": records,
            "error": Value::Null,
        });
        write_json(&cfg.out.join("summary.json"), &summary)?;
    }
    Ok(())
}

fn cmd_selftest(args: SelftestArgs) -> Result<(), Failure> {
    let opts = SelftestOptions {
        seed: args.seed,
        levels: args.levels,
        corrupt_diffusion: args.corrupt_diffusion,
    };
    let results = run_selftest(&opts);
    for r in &results {
        println!("{}  {}: {}", if r.passed { "PASS" } else { "FAIL" }, r.name, r.detail);
    }
    let failed: Vec<&str> = results.iter().filter(|r| !r.passed).map(|r| r.name.as_str()).collect();
    println!("{} of {} properties passed", results.len() - failed.len(), results.len());
    if let Some(dir) = &args.out {
        std::fs::create_dir_all(dir)?;
        let summary = json!({
            "command": "selftest",
            "seed": opts.seed,
            "levels": opts.levels,
            "corrupt_diffusion": opts.corrupt_diffusion,
            "results": results,
        });
        write_json(&dir.join("selftest.json"), &summary)?;
    }
    if failed.is_empty() {
        Ok(())
    } else {
        Err(Failure {
            kind: "selftest_failed".into(),
            message: format!("failed properties: {}", failed.join("; ")),
            level: None,
            code: 1,
        })
    }
}

fn cmd_export_mesh(args: ExportArgs) -> Result<(), Failure> {
    let mesh = TriMesh::uniform(args.level)?;
    std::fs::create_dir_all(&args.out)?;
    let mut boundary = NodalField::zeros(&mesh);
    for &v in mesh.boundary_nodes() {
        boundary.values_mut()[v] = 1.0;
    }
    let stem = format!("mesh_l{}", args.level);
    for format in &args.format {
        match format {
            Format::Vtk => write_vtk_file(
                &args.out.join(format!("{stem}.vtk")),
                &format!("uniform mesh, level {}", args.level),
                &mesh,
                &[("boundary", &boundary)],
            )?,
            Format::Csv => {
                write_nodal_csv(create(&args.out.join(format!("{stem}_nodes.csv")))?, &mesh, &[("boundary", &boundary)])?;
                write_triangles_csv(create(&args.out.join(format!("{stem}_triangles.csv")))?, &mesh)?;
            }
            Format::Json => {
                let value = json!({
                    "level": mesh.level(),
                    "h": mesh.h(),
                    "vertices": mesh.vertices(),
                    "triangles": mesh.triangles(),
                    "boundary_nodes": mesh.boundary_nodes(),
                });
                write_json(&args.out.join(format!("{stem}.json")), &value)?;
            }
        }
    }
    println!(
        "level {}: {} vertices, {} triangles, {} boundary nodes, h = {:.6e}",
        mesh.level(),
        mesh.num_vertices(),
        mesh.num_triangles(),
        mesh.num_boundary_nodes(),
        mesh.h()
    );
    Ok(())
}
