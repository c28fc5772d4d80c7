//! Command-line front end: ingestion reports, single DPS runs, margin
//! sweeps, canned experiment presets, plot-data emission and synthetic
//! trace generation.
//!
//! Exit codes: 0 success, 1 usage or configuration error, 2 data error.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::error::ErrorKind as ClapErrorKind;
use clap::{Args, Parser, Subcommand};

use dps::config::{load_config, scenario_paper, DataSource, NodeFilter, Scenario, SweepConfig};
use dps::dataset::{clean, read_readings_file, slice_digest, Bounds};
use dps::error::Error;
use dps::fixture::{locations_text, readings_text, FixtureConfig};
use dps::predictor::PredictorSpec;
use dps::protocol::{run_dps, trace_metrics, ErrorMargin};
use dps::sweep::{
    emit_csv, emit_plot_data, read_csv_file, run_sweep, write_trace_csv, PlotKind, Unit,
};

#[derive(Parser)]
#[command(
    name = "dps",
    version,
    about = "Dual prediction scheme simulator for sensor-network traces"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Parse and clean a readings file; report per-node statistics and the
    /// dataset digest.
    Ingest(IngestArgs),
    /// Run one node x predictor x margin cell and print its metrics.
    Run(RunArgs),
    /// Execute a config-driven sweep and write the result CSV.
    Sweep(SweepArgs),
    /// Run a canned experiment preset (Fig5, Fig6_7, Fig9, Aggregation97).
    Scenario(ScenarioArgs),
    /// Convert a sweep CSV into per-predictor plot blocks.
    Plotdata(PlotdataArgs),
    /// Generate a deterministic synthetic trace in the readings layout.
    GenData(GenDataArgs),
}

#[derive(Args)]
struct IngestArgs {
    /// Readings file (plain text or gzip).
    #[arg(long)]
    readings: PathBuf,
    /// Optional `node_id x y` positions file, validated and reported.
    #[arg(long)]
    locations: Option<PathBuf>,
    /// Write a normalized `node_id,epoch,temperature` CSV here.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Lower plausibility bound in degrees C.
    #[arg(long, default_value_t = -10.0)]
    t_min: f64,
    /// Upper plausibility bound in degrees C.
    #[arg(long, default_value_t = 50.0)]
    t_max: f64,
}

#[derive(Args)]
struct RunArgs {
    #[arg(long)]
    readings: PathBuf,
    /// Mote to simulate.
    #[arg(long)]
    node: u32,
    /// Predictor label, e.g. MA(2), ARMA(2,2), LMS, LMS-VSS.
    #[arg(long)]
    predictor: String,
    /// Error margin in degrees C.
    #[arg(long)]
    emax: f64,
    /// First reading (positional, after cleaning).
    #[arg(long, default_value_t = 0)]
    start: usize,
    /// One past the last reading; defaults to the whole series.
    #[arg(long)]
    end: Option<usize>,
    /// Write the per-epoch trace CSV here.
    #[arg(long)]
    trace_out: Option<PathBuf>,
}

#[derive(Args)]
struct SweepArgs {
    /// Sweep configuration (TOML).
    #[arg(long)]
    config: PathBuf,
    /// Result CSV path.
    #[arg(long)]
    out: PathBuf,
    /// Worker threads (overrides the config; 1 forces sequential).
    #[arg(long)]
    jobs: Option<usize>,
    /// Override the config's readings path.
    #[arg(long)]
    readings: Option<PathBuf>,
    /// Override the config's locations path.
    #[arg(long)]
    locations: Option<PathBuf>,
    /// Override the config's seed.
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Args)]
struct ScenarioArgs {
    /// Fig5, Fig6_7, Fig9 or Aggregation97.
    name: String,
    #[arg(long)]
    readings: PathBuf,
    #[arg(long)]
    locations: Option<PathBuf>,
    /// Result CSV path.
    #[arg(long)]
    out: PathBuf,
    #[arg(long)]
    jobs: Option<usize>,
}

#[derive(Args)]
struct PlotdataArgs {
    /// Sweep result CSV produced by `sweep` or `scenario`.
    #[arg(long)]
    input: PathBuf,
    /// `reduction` or `mse`.
    #[arg(long)]
    kind: String,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct GenDataArgs {
    #[arg(long)]
    out_readings: PathBuf,
    #[arg(long)]
    out_locations: Option<PathBuf>,
    #[arg(long, default_value_t = 54)]
    nodes: u32,
    #[arg(long, default_value_t = 5200)]
    epochs: usize,
    #[arg(long, default_value_t = 7)]
    seed: u64,
    /// Generate a pristine trace without battery artifacts, duplicate
    /// epochs or gaps.
    #[arg(long)]
    clean: bool,
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = match e.kind() {
                ClapErrorKind::DisplayHelp | ClapErrorKind::DisplayVersion => 0,
                _ => 1,
            };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match dispatch(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(if e.is_usage() { 1 } else { 2 })
        }
    }
}

fn dispatch(cli: Cli) -> Result<(), Error> {
    match cli.command {
        Command::Ingest(args) => ingest(args),
        Command::Run(args) => run_cell(args),
        Command::Sweep(args) => sweep(args),
        Command::Scenario(args) => scenario(args),
        Command::Plotdata(args) => plotdata(args),
        Command::GenData(args) => gen_data(args),
    }
}

fn ingest(args: IngestArgs) -> Result<(), Error> {
    if args.t_min >= args.t_max {
        return Err(Error::ConfigField {
            field: "t_min",
            message: "t_min must be below t_max".into(),
        });
    }
    let parsed = read_readings_file(&args.readings)?;
    let bounds = Bounds {
        t_min: args.t_min,
        t_max: args.t_max,
    };
    let (series, report) = clean(&parsed.readings, bounds);

    println!(
        "lines: {}  accepted: {}  rejected: {}",
        parsed.lines,
        parsed.readings.len(),
        parsed.rejects.len()
    );
    println!("node  kept  out_of_bounds  duplicates");
    for (node_id, s) in &series {
        let drops = report.per_node.get(node_id).copied().unwrap_or_default();
        println!(
            "{node_id:>4}  {:>5}  {:>13}  {:>10}",
            s.len(),
            drops.out_of_bounds,
            drops.duplicates
        );
    }
    println!("kept total: {}", report.kept);
    println!("digest: {}", slice_digest(&series));

    if let Some(path) = &args.locations {
        let locs =
            dps::topology::parse_locations(std::io::BufReader::new(std::fs::File::open(path)?))?;
        println!(
            "locations: {} positions, {} rejected",
            locs.positions.len(),
            locs.rejects.len()
        );
    }

    if let Some(path) = &args.out {
        let mut out = String::from("node_id,epoch,temperature\n");
        for s in series.values() {
            for &(epoch, temp) in &s.points {
                out.push_str(&format!("{},{},{}\n", s.node_id, epoch, temp));
            }
        }
        std::fs::write(path, out)?;
        println!("normalized CSV written to {}", path.display());
    }
    Ok(())
}

fn run_cell(args: RunArgs) -> Result<(), Error> {
    let spec: PredictorSpec = args.predictor.parse()?;
    let margin = ErrorMargin::new(args.emax)?;
    let parsed = read_readings_file(&args.readings)?;
    let (series, _) = clean(&parsed.readings, Bounds::default());
    let node = series
        .get(&args.node)
        .ok_or(Error::MissingNode { node_id: args.node })?;
    let temps = node.temperatures();
    let end = args.end.unwrap_or(temps.len());
    if args.start >= end || temps.len() < end {
        return Err(Error::SliceOutOfRange {
            node_id: args.node,
            len: temps.len(),
            needed: end.max(args.start + 1),
        });
    }
    let trace = run_dps(&temps[args.start..end], &spec, margin)?.with_node_id(args.node);
    let metrics = trace_metrics(&trace);
    println!("node: {}  predictor: {}  e_max: {}", args.node, spec.label(), args.emax);
    println!("transmissions: {} / {}", metrics.transmissions, metrics.total);
    println!("reduction_pct: {:.4}", metrics.reduction_pct);
    println!("mse_reconstruction: {:.6}", metrics.mse_reconstruction);
    println!("mse_prediction: {:.6}", metrics.mse_prediction);
    if let Some(path) = &args.trace_out {
        let file = std::fs::File::create(path)?;
        write_trace_csv(&trace, None, std::io::BufWriter::new(file))?;
        println!("trace written to {}", path.display());
    }
    Ok(())
}

fn apply_overrides(
    cfg: &mut SweepConfig,
    readings: Option<PathBuf>,
    locations: Option<PathBuf>,
    jobs: Option<usize>,
    seed: Option<u64>,
) {
    if readings.is_some() || locations.is_some() {
        match &mut cfg.source {
            DataSource::Files {
                readings: r,
                locations: l,
            } => {
                if let Some(path) = readings {
                    *r = path;
                }
                if locations.is_some() {
                    *l = locations;
                }
            }
            DataSource::Synth(_) => {
                if let Some(path) = readings {
                    cfg.source = DataSource::Files {
                        readings: path,
                        locations,
                    };
                }
            }
        }
    }
    if let Some(jobs) = jobs {
        cfg.jobs = jobs;
    }
    if let Some(seed) = seed {
        cfg.seed = seed;
    }
}

fn sweep(args: SweepArgs) -> Result<(), Error> {
    let mut cfg = load_config(&args.config)?;
    apply_overrides(&mut cfg, args.readings, args.locations, args.jobs, args.seed);
    let result = run_sweep(&cfg)?;
    emit_csv(&result, &args.out)?;
    println!(
        "{} rows ({} units x {} predictors x {} margins) -> {}",
        result.rows.len(),
        result.units.len(),
        result.predictors.len(),
        cfg.margins.len(),
        args.out.display()
    );
    Ok(())
}

fn scenario(args: ScenarioArgs) -> Result<(), Error> {
    let scenario: Scenario = args.name.parse()?;
    let mut cfg = scenario_paper(scenario, args.readings, args.locations);
    if let Some(jobs) = args.jobs {
        cfg.jobs = jobs;
    }
    let result = run_sweep(&cfg)?;
    emit_csv(&result, &args.out)?;
    println!("scenario {}: {} rows -> {}", scenario.name(), result.rows.len(), args.out.display());
    if let NodeFilter::All = cfg.nodes {
        let nodes: Vec<String> = result.units.iter().map(|u| u.to_string()).collect();
        println!("realized nodes: {}", nodes.join(" "));
    }
    if scenario == Scenario::Aggregation97 {
        for row in &result.rows {
            if let Unit::Cluster(head) = row.unit {
                println!(
                    "cluster {head}: {} of {} baseline messages, reduction {:.2}%",
                    row.dps_msgs, row.baseline_msgs, row.reduction_pct
                );
            }
        }
    }
    Ok(())
}

fn plotdata(args: PlotdataArgs) -> Result<(), Error> {
    let kind: PlotKind = args.kind.parse()?;
    let result = read_csv_file(&args.input)?;
    emit_plot_data(&result, kind, &args.out)?;
    println!("plot data -> {}", args.out.display());
    Ok(())
}

fn gen_data(args: GenDataArgs) -> Result<(), Error> {
    if args.nodes == 0 || args.epochs == 0 {
        return Err(Error::ConfigField {
            field: "nodes",
            message: "nodes and epochs must be positive".into(),
        });
    }
    let cfg = FixtureConfig {
        nodes: args.nodes,
        epochs: args.epochs,
        seed: args.seed,
        defects: !args.clean,
    };
    std::fs::write(&args.out_readings, readings_text(&cfg))?;
    println!("readings -> {}", args.out_readings.display());
    if let Some(path) = &args.out_locations {
        std::fs::write(path, locations_text(args.nodes, args.seed))?;
        println!("locations -> {}", path.display());
    }
    Ok(())
}
