//! `coplanar`: controllability analysis and fault-tolerant flight
//! simulation for co-planar multicopters.
//!
//! Exit codes: 0 success, 2 configuration error, 3 runtime error or crash,
//! 4 file error.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::thread;

use clap::{Args, Parser, Subcommand, ValueEnum};

use coplanar::controllability::{arcai_table, combinations, failure_grid, ArcaiRow};
use coplanar::io::{
    acai_sweep_table, arcai_rows_table, arcai_table_csv, grid_svg, parse_scenario, run_summary, set_label, time_series_svg,
    write_svg, CsvTable, HeatGrid,
};
use coplanar::sim::{run_scenario, FaultEvent, RunStatus, Scenario, VehicleSection};
use coplanar::vehicle::{HealthVector, VehicleParams};
use coplanar::Error;

#[derive(Parser)]
#[command(name = "coplanar", version, about = "Controllability analysis and fault-tolerant control simulation for co-planar multicopters")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Full-state control authority for every failure set up to `--failures` rotors.
    AnalyzeAcai(AnalyzeArgs),
    /// Reduced control authority for every single-rotor failure.
    AnalyzeArcai(AnalyzeArgs),
    /// Run one closed-loop scenario.
    Simulate(SimulateArgs),
    /// Run a scenario once per failure set, in parallel.
    Sweep(SweepArgs),
    /// Render the time-series plot of a CSV log.
    Plot(PlotArgs),
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Csv,
    Svg,
    Both,
}

impl Format {
    fn csv(self) -> bool {
        self != Format::Svg
    }

    fn svg(self) -> bool {
        self != Format::Csv
    }
}

#[derive(Args)]
struct AnalyzeArgs {
    /// Spin pattern such as PNPNPN. Overrides the scenario's vehicle.
    #[arg(long)]
    config: Option<String>,
    /// Take the vehicle from this scenario file.
    #[arg(long)]
    scenario: Option<PathBuf>,
    /// Largest failure set analysed (analyze-acai only).
    #[arg(long, default_value_t = 2)]
    failures: usize,
    #[arg(long, default_value = "out")]
    out: PathBuf,
    #[arg(long, value_enum, default_value_t = Format::Both)]
    format: Format,
}

#[derive(Args)]
struct SimulateArgs {
    #[arg(long)]
    scenario: PathBuf,
    #[arg(long, default_value = "out")]
    out: PathBuf,
    /// Spin pattern overriding the scenario's vehicle.
    #[arg(long)]
    config: Option<String>,
    /// Seed overriding the scenario's.
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long, value_enum, default_value_t = Format::Both)]
    format: Format,
}

#[derive(Args)]
struct SweepArgs {
    /// Base scenario; its own faults are replaced by each failure set.
    #[arg(long)]
    scenario: PathBuf,
    /// Largest failure set.
    #[arg(long, default_value_t = 1)]
    failures: usize,
    /// Injection time of the swept failures [s]; defaults to half the run.
    #[arg(long)]
    fault_time: Option<f64>,
    #[arg(long, default_value = "out")]
    out: PathBuf,
    #[arg(long)]
    config: Option<String>,
    #[arg(long)]
    seed: Option<u64>,
    /// Worker threads; defaults to the available parallelism.
    #[arg(long)]
    jobs: Option<usize>,
    #[arg(long, value_enum, default_value_t = Format::Csv)]
    format: Format,
}

#[derive(Args)]
struct PlotArgs {
    /// CSV log written by `simulate`.
    #[arg(long)]
    input: PathBuf,
    #[arg(long, default_value = "out")]
    out: PathBuf,
}

/// Failures carrying an exit code.
enum Failure {
    Library(Error),
    Crash(String),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Library(e)
    }
}

impl Failure {
    fn code(&self) -> u8 {
        match self {
            Failure::Library(Error::Io { .. } | Error::Csv { .. }) => 4,
            Failure::Library(Error::Singularity { .. }) | Failure::Crash(_) => 3,
            Failure::Library(_) => 2,
        }
    }
}

type Outcome = Result<(), Failure>;

fn ensure_dir(dir: &Path) -> Result<(), Error> {
    fs::create_dir_all(dir).map_err(|source| Error::Io {
        path: dir.to_owned(),
        source,
    })
}

fn load_scenario(path: &Path, config: Option<&str>, seed: Option<u64>) -> Result<Scenario, Error> {
    let mut scenario = parse_scenario(path)?;
    if let Some(c) = config {
        scenario.vehicle.config = c.to_owned();
        scenario.vehicle.rotors = None;
    }
    if let Some(s) = seed {
        scenario.sim.seed = s;
    }
    scenario.resolve().map_err(|e| Error::Scenario {
        path: path.to_owned(),
        message: e.to_string(),
    })?;
    Ok(scenario)
}

fn vehicle(args: &AnalyzeArgs) -> Result<VehicleParams, Error> {
    let mut section = match &args.scenario {
        Some(path) => parse_scenario(path)?.vehicle,
        None => VehicleSection::with_config("PNPNPN"),
    };
    if let Some(c) = &args.config {
        section.config = c.clone();
        section.rotors = None;
    }
    section.params()
}

fn file_stem(params: &VehicleParams) -> String {
    params.spin_config().to_string()
}

fn analyze_acai(args: &AnalyzeArgs) -> Outcome {
    let params = vehicle(args)?;
    ensure_dir(&args.out)?;
    let name = file_stem(&params);
    let grid = failure_grid(&params, args.failures.min(2))?;
    let table = acai_sweep_table(&params, args.failures)?;
    if args.format.csv() {
        let path = args.out.join(format!("acai-{name}.csv"));
        table.write(&path)?;
        println!("wrote {}", path.display());
    }
    if args.format.svg() {
        let path = args.out.join(format!("acai-{name}.svg"));
        write_svg(&grid_svg(&HeatGrid::from_failure_grid(&grid, &format!("ACAI, {name}"))), &path)?;
        println!("wrote {}", path.display());
    }
    println!("nominal rho = {:.6}", grid.nominal.rho);
    for i in 0..grid.size() {
        if let Some(r) = grid.cell(i, i) {
            let verdict = if r.controllable { "controllable" } else { "uncontrollable" };
            println!("rotor {} failed: rho = {:+.6} ({verdict})", i + 1, r.rho);
        }
    }
    Ok(())
}

fn analyze_arcai(args: &AnalyzeArgs) -> Outcome {
    let params = vehicle(args)?;
    ensure_dir(&args.out)?;
    let name = file_stem(&params);
    let table = arcai_table(&params)?;
    if args.format.csv() {
        let path = args.out.join(format!("arcai-{name}.csv"));
        arcai_table_csv(&table).write(&path)?;
        println!("wrote {}", path.display());
    }
    if args.format.svg() {
        let path = args.out.join(format!("arcai-{name}.svg"));
        write_svg(&grid_svg(&HeatGrid::from_arcai_table(&table, &format!("ArCAI, {name}"))), &path)?;
        println!("wrote {}", path.display());
    }
    for row in &table.single {
        println!(
            "rotor {} failed: full {:+.4}  phi {:+.4}  theta {:+.4}  psi {:+.4}",
            row.failure_set[0] + 1,
            row.full.rho,
            row.roll.rho,
            row.pitch.rho,
            row.yaw.rho
        );
    }
    Ok(())
}

fn write_run(scenario: &Scenario, run: &coplanar::sim::SimRun, out: &Path, format: Format) -> Result<(), Error> {
    let table = CsvTable::from_log(&run.log);
    if format.csv() {
        let name = scenario.output.csv.clone().unwrap_or_else(|| format!("{}.csv", scenario.name));
        table.write(out.join(name))?;
    }
    if format.svg() {
        let name = scenario.output.svg.clone().unwrap_or_else(|| format!("{}.svg", scenario.name));
        write_svg(&time_series_svg(&table, &scenario.name)?, out.join(name))?;
    }
    let summary = out.join(format!("{}-summary.txt", scenario.name));
    fs::write(&summary, run_summary(scenario, run)).map_err(|source| Error::Io { path: summary, source })
}

fn simulate(args: &SimulateArgs) -> Outcome {
    let scenario = load_scenario(&args.scenario, args.config.as_deref(), args.seed)?;
    ensure_dir(&args.out)?;
    let run = run_scenario(&scenario)?;
    write_run(&scenario, &run, &args.out, args.format)?;
    print!("{}", run_summary(&scenario, &run));
    match run.status {
        RunStatus::Completed => Ok(()),
        RunStatus::Crashed { t, reason } => Err(Failure::Crash(format!("crashed at {t:.3} s: {reason}"))),
    }
}

fn sweep(args: &SweepArgs) -> Outcome {
    let base = load_scenario(&args.scenario, args.config.as_deref(), args.seed)?;
    ensure_dir(&args.out)?;
    let params = base.vehicle.params()?;
    let n = params.rotor_count();
    let t_fault = args.fault_time.unwrap_or(base.sim.duration / 2.0);
    let sets: Vec<Vec<usize>> = (0..=args.failures.min(n)).flat_map(|k| combinations(n, k)).collect();
    let variants: Vec<Scenario> = sets
        .iter()
        .map(|set| {
            let mut s = base.clone();
            s.name = format!("{}-fail-{}", base.name, set_label(set));
            s.output = Default::default();
            s.faults = set.iter().map(|&rotor| FaultEvent { t_inject: t_fault, rotor }).collect();
            s
        })
        .collect();

    let jobs = args
        .jobs
        .unwrap_or_else(|| thread::available_parallelism().map_or(1, |p| p.get()))
        .clamp(1, variants.len().max(1));
    let chunk = variants.len().div_ceil(jobs).max(1);
    let results: Vec<Result<coplanar::sim::SimRun, Error>> = thread::scope(|scope| {
        let handles: Vec<_> = variants
            .chunks(chunk)
            .map(|part| scope.spawn(move || part.iter().map(run_scenario).collect::<Vec<_>>()))
            .collect();
        handles.into_iter().flat_map(|h| h.join().expect("sweep worker panicked")).collect()
    });

    let mut rows = Vec::new();
    for ((scenario, set), result) in variants.iter().zip(&sets).zip(results) {
        let run = result?;
        write_run(scenario, &run, &args.out, args.format)?;
        let row = ArcaiRow::compute(&params, &HealthVector::with_failed(n, set)?)?;
        let analysis = arcai_rows_table(std::iter::once(&row));
        let err = run.log.records.iter().map(|r| r.position_error()).fold(0.0, f64::max);
        let status = match &run.status {
            RunStatus::Completed => "completed".to_owned(),
            RunStatus::Crashed { t, .. } => format!("crashed@{t:.3}"),
        };
        let mut cells = analysis.rows[0].clone();
        cells.extend([
            run.final_mode().to_string(),
            status,
            run.detections.len().to_string(),
            format!("{err:.8e}"),
        ]);
        rows.push(cells);
    }
    let mut header = arcai_rows_table(std::iter::empty()).header;
    header.extend(["final_mode", "status", "detections", "max_position_error"].map(String::from));
    let path = args.out.join(format!("{}-sweep.csv", base.name));
    CsvTable { header, rows }.write(&path)?;
    println!("wrote {} ({} runs)", path.display(), sets.len());
    Ok(())
}

fn plot(args: &PlotArgs) -> Outcome {
    let table = CsvTable::read(&args.input)?;
    ensure_dir(&args.out)?;
    let stem = args.input.file_stem().map_or_else(|| "log".into(), |s| s.to_string_lossy().into_owned());
    let path = args.out.join(format!("{stem}.svg"));
    write_svg(&time_series_svg(&table, &stem)?, &path)?;
    println!("wrote {}", path.display());
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let outcome = match &cli.command {
        Command::AnalyzeAcai(a) => analyze_acai(a),
        Command::AnalyzeArcai(a) => analyze_arcai(a),
        Command::Simulate(a) => simulate(a),
        Command::Sweep(a) => sweep(a),
        Command::Plot(a) => plot(a),
    };
    match outcome {
        Ok(()) => ExitCode::SUCCESS,
        Err(failure) => {
            match &failure {
                Failure::Library(e) => eprintln!("error: {e}"),
                Failure::Crash(msg) => eprintln!("error: {msg}"),
            }
            ExitCode::from(failure.code())
        }
    }
}
