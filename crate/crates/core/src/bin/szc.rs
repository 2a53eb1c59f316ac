use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde::Deserialize;

use szc::atmo::{self, AtmoState};
use szc::dataset;
use szc::experiment::{self, ExperimentConfig, PresetChoice, Ranks};
use szc::ir::IrGrid;
use szc::metrics;
use szc::room::{self, ArraySpec, RoomSpec};
use szc::sicer::{self, Antialias};
use szc::vast::{self, Design, DesignConfig};
use szc::Error;

#[derive(Parser)]
#[command(name = "szc", version, about = "Sound zone control robust to sound-speed change")]
struct Cli {
    /// Worker threads (overrides SZC_THREADS).
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Reserved; the pipeline is deterministic.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// More log output (-v info, -vv debug).
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    verbose: u8,
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Speed of sound in humid air.
    Speed(SpeedArgs),
    /// Simulate bright- and dark-zone IR grids (writes <out>/bz and <out>/dz).
    Simulate(SimulateArgs),
    /// Correct a grid to a new sound speed with SICER.
    Correct(CorrectArgs),
    /// Design a VAST control filter bank.
    Design(DesignArgs),
    /// Evaluate a filter bank against (true) IR grids.
    Evaluate(EvaluateArgs),
    /// TD metrics over a set of VAST ranks.
    SweepRanks(SweepArgs),
    /// GT / NC / SICER comparison across ranks.
    Scenario(ScenarioArgs),
}

#[derive(Args)]
struct SpeedArgs {
    /// Celsius.
    #[arg(long, short = 't')]
    temperature: f64,
    /// Percent.
    #[arg(long, short = 'r', default_value_t = 50.0)]
    humidity: f64,
    /// kPa.
    #[arg(long, short = 'p', default_value_t = atmo::STANDARD_PRESSURE_KPA)]
    pressure: f64,
    /// Also print beta = c_old / c for this reference speed.
    #[arg(long)]
    c_old: Option<f64>,
}

#[derive(Args)]
struct SimulateArgs {
    /// JSON with `room` and `array` objects.
    #[arg(long, conflicts_with = "preset")]
    config: Option<PathBuf>,
    /// paper | desk.
    #[arg(long)]
    preset: Option<String>,
    /// Sound speed, m/s.
    #[arg(long)]
    c: Option<f64>,
    #[arg(long)]
    rt60: Option<f64>,
    #[arg(long)]
    n_samples: Option<usize>,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct CorrectArgs {
    #[arg(long)]
    grid: PathBuf,
    /// Target sound speed, m/s.
    #[arg(long, required_unless_present = "temperature")]
    c_new: Option<f64>,
    /// Derive the target speed from temperature (Celsius) ...
    #[arg(long, conflicts_with = "c_new")]
    temperature: Option<f64>,
    /// ... and relative humidity (percent).
    #[arg(long, default_value_t = 50.0)]
    humidity: f64,
    /// off | auto | cutoff fraction of Nyquist.
    #[arg(long, default_value = "auto")]
    antialias: Antialias,
    /// Output length in samples (default: input length).
    #[arg(long)]
    output_len: Option<usize>,
    /// Use the Kaiser-windowed kernel instead of the dense sum.
    #[arg(long)]
    windowed: bool,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct FilterArgs {
    /// Filter length J.
    #[arg(long)]
    j: usize,
    #[arg(long, default_value_t = 1.0)]
    mu: f64,
    /// 1-based; default ceil(L/2).
    #[arg(long)]
    virtual_source: Option<usize>,
    #[arg(long, default_value_t = 0)]
    modeling_delay: usize,
}

#[derive(Args)]
struct DesignArgs {
    #[arg(long)]
    bz: PathBuf,
    #[arg(long)]
    dz: PathBuf,
    #[command(flatten)]
    filter: FilterArgs,
    #[arg(long)]
    rank: usize,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct EvaluateArgs {
    #[arg(long)]
    filters: PathBuf,
    #[arg(long)]
    bz_true: PathBuf,
    #[arg(long)]
    dz_true: PathBuf,
    /// Mono WAV applied to reproduced and desired signals alike.
    #[arg(long)]
    excitation: Option<PathBuf>,
    #[arg(long)]
    fft_len: Option<usize>,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct SweepArgs {
    #[arg(long)]
    bz: PathBuf,
    #[arg(long)]
    dz: PathBuf,
    /// Evaluation grids (default: the design grids).
    #[arg(long, requires = "dz_true")]
    bz_true: Option<PathBuf>,
    #[arg(long, requires = "bz_true")]
    dz_true: Option<PathBuf>,
    #[command(flatten)]
    filter: FilterArgs,
    /// Comma-separated ranks or sweep:<count>.
    #[arg(long, default_value = "sweep:100")]
    ranks: Ranks,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct ScenarioArgs {
    /// Experiment config JSON (fields of ExperimentConfig, all optional).
    #[arg(long)]
    config: Option<PathBuf>,
    /// paper | desk | path to a preset JSON.
    #[arg(long)]
    preset: Option<PresetChoice>,
    #[arg(long)]
    c_design: Option<f64>,
    #[arg(long)]
    c_true: Option<f64>,
    #[arg(long)]
    mu: Option<f64>,
    #[arg(long)]
    j: Option<usize>,
    #[arg(long)]
    ranks: Option<Ranks>,
    #[arg(long)]
    antialias: Option<Antialias>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug)]
enum CliError {
    Usage(String),
    Lib(Error),
}

impl<E: Into<Error>> From<E> for CliError {
    fn from(e: E) -> Self {
        CliError::Lib(e.into())
    }
}

type CliResult = Result<(), CliError>;

fn usage(msg: impl Into<String>) -> CliError {
    CliError::Usage(msg.into())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();

    let threads = cli.threads.or_else(|| std::env::var("SZC_THREADS").ok().and_then(|s| s.parse().ok()));
    if let Some(n) = threads {
        if !szc::par::set_max_threads(n) {
            log::warn!("could not cap worker threads at {n}");
        }
    }
    if cli.seed.is_some() {
        log::info!("--seed is accepted but unused; the pipeline is deterministic");
    }

    let result = match cli.cmd {
        Cmd::Speed(a) => speed(a),
        Cmd::Simulate(a) => simulate(a),
        Cmd::Correct(a) => correct(a),
        Cmd::Design(a) => design(a),
        Cmd::Evaluate(a) => evaluate(a),
        Cmd::SweepRanks(a) => sweep_ranks(a),
        Cmd::Scenario(a) => scenario(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(CliError::Usage(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(1)
        }
        Err(CliError::Lib(e)) => {
            eprintln!("error: {e}");
            ExitCode::from(if e.is_numerical() { 2 } else { 1 })
        }
    }
}

fn speed(a: SpeedArgs) -> CliResult {
    let state = AtmoState::new(a.temperature, a.humidity).with_pressure_kpa(a.pressure);
    let c = atmo::speed_of_sound(&state)?;
    println!("c_mps,{c:.6}");
    if let Some(c_old) = a.c_old {
        println!("beta,{:.9}", atmo::scaling_factor(c_old, c)?);
    }
    Ok(())
}

#[derive(Deserialize)]
struct SimConfig {
    room: RoomSpec,
    array: ArraySpec,
}

fn simulate(a: SimulateArgs) -> CliResult {
    let (mut room, array) = match (&a.config, a.preset.as_deref()) {
        (Some(path), _) => {
            let cfg: SimConfig = read_json(path)?;
            (cfg.room, cfg.array)
        }
        (None, Some("paper")) => room::default_paper_geometry(1.0),
        (None, Some("desk")) => room::default_paper_geometry(room::DESK_SCALE),
        (None, Some(other)) => return Err(usage(format!("unknown preset {other:?} (paper | desk)"))),
        (None, None) => return Err(usage("one of --config or --preset is required")),
    };
    if let Some(c) = a.c {
        room.sound_speed_mps = c;
    }
    if let Some(rt60) = a.rt60 {
        room.rt60_s = rt60;
    }
    if let Some(n) = a.n_samples {
        room.n_samples = n;
    }
    let (bright, dark) = room::simulate_array(&room, &array)?;
    dataset::save_grid(&bright, a.out.join("bz"))?;
    dataset::save_grid(&dark, a.out.join("dz"))?;
    println!("{}", a.out.join("bz").display());
    println!("{}", a.out.join("dz").display());
    Ok(())
}

fn correct(a: CorrectArgs) -> CliResult {
    let grid = dataset::load_grid(&a.grid)?;
    let c_new = match (a.c_new, a.temperature) {
        (Some(c), _) => c,
        (None, Some(t)) => atmo::speed_of_sound(&AtmoState::new(t, a.humidity))?,
        (None, None) => return Err(usage("one of --c-new or --temperature is required")),
    };
    let kernel = if a.windowed { sicer::SincKernel::windowed() } else { sicer::SincKernel::Dense };
    let out = sicer::sicer_grid_with(&grid, c_new, a.antialias, kernel, a.output_len)?;
    dataset::save_grid(&out, &a.out)?;
    println!("{}", a.out.display());
    Ok(())
}

fn load_pair(bz: &Path, dz: &Path) -> Result<(IrGrid, IrGrid), CliError> {
    Ok((dataset::load_grid(bz)?, dataset::load_grid(dz)?))
}

fn design_config(f: &FilterArgs, rank: usize, speakers: usize) -> DesignConfig {
    let mut cfg = DesignConfig::new(
        f.j,
        f.mu,
        rank,
        f.virtual_source.unwrap_or_else(|| room::virtual_source_index(speakers)),
    );
    cfg.modeling_delay = f.modeling_delay;
    cfg
}

fn design(a: DesignArgs) -> CliResult {
    let (bright, dark) = load_pair(&a.bz, &a.dz)?;
    let cfg = design_config(&a.filter, a.rank, bright.num_speakers());
    let bank = vast::design(&bright, &dark, &cfg)?;
    vast::write_filters(&a.out, &bank)?;
    println!("{}", a.out.display());
    Ok(())
}

fn evaluate(a: EvaluateArgs) -> CliResult {
    let bank = vast::read_filters(&a.filters)?;
    let (bright, dark) = load_pair(&a.bz_true, &a.dz_true)?;
    let excitation = match &a.excitation {
        Some(path) => {
            let (x, fs) = dataset::read_wav(path)?;
            if fs != bright.sample_rate_hz() {
                return Err(usage(format!(
                    "excitation is sampled at {fs} Hz, grids at {} Hz",
                    bright.sample_rate_hz()
                )));
            }
            Some(x)
        }
        None => None,
    };
    let report = metrics::evaluate(&bright, &dark, &bank, excitation.as_deref(), a.fft_len)?;
    report.save_csv(&a.out)?;
    println!("td_ac_db,{:.6}", report.td_ac_db);
    println!("td_nsdp_db,{:.6}", report.td_nsdp_db);
    Ok(())
}

fn sweep_ranks(a: SweepArgs) -> CliResult {
    let (bright, dark) = load_pair(&a.bz, &a.dz)?;
    let truth = match (&a.bz_true, &a.dz_true) {
        (Some(b), Some(d)) => Some(load_pair(b, d)?),
        _ => None,
    };
    let (bt, dt) = truth.as_ref().map_or((&bright, &dark), |(b, d)| (b, d));
    let cfg = design_config(&a.filter, 1, bright.num_speakers());
    let ranks = a
        .ranks
        .resolve(bright.num_speakers() * cfg.filter_len_j)
        .map_err(Error::from)?;
    let design = Design::new(&bright, &dark, &cfg)?;
    let banks = design.filters(&ranks)?;
    let mut csv = String::from("rank,ac_db,nsdp_db,cost\n");
    for bank in &banks {
        let r = metrics::evaluate(bt, dt, bank, None, None)?;
        let cost = vast::cost(&design.corr, bank.w(), cfg.mu)?;
        csv += &format!(
            "{},{:.9},{:.9},{:.9e}\n",
            bank.provenance.rank_v, r.td_ac_db, r.td_nsdp_db, cost
        );
    }
    std::fs::write(&a.out, csv).map_err(|e| Error::Metrics(e.into()))?;
    println!("{}", a.out.display());
    Ok(())
}

/// Every field optional; anything present overrides the preset defaults.
#[derive(Deserialize, Default)]
#[serde(deny_unknown_fields)]
struct ScenarioFile {
    preset: Option<PresetChoice>,
    c_design: Option<f64>,
    c_true: Option<f64>,
    mu: Option<f64>,
    j: Option<usize>,
    ranks: Option<Ranks>,
    antialias: Option<Antialias>,
    out_dir: Option<PathBuf>,
}

fn scenario(a: ScenarioArgs) -> CliResult {
    let file: ScenarioFile = match &a.config {
        Some(path) => read_json(path)?,
        None => ScenarioFile::default(),
    };
    let out_dir = a
        .out
        .or(file.out_dir)
        .ok_or_else(|| usage("--out (or out_dir in the config) is required"))?;
    let mut cfg = ExperimentConfig::desk(353.0, out_dir);
    cfg.preset = a.preset.or(file.preset).unwrap_or(PresetChoice::Desk);
    cfg.c_design = a.c_design.or(file.c_design).unwrap_or(343.0);
    cfg.c_true = a
        .c_true
        .or(file.c_true)
        .ok_or_else(|| usage("--c-true (or c_true in the config) is required"))?;
    cfg.mu = a.mu.or(file.mu);
    cfg.j = a.j.or(file.j);
    cfg.ranks = a.ranks.or(file.ranks).unwrap_or_default();
    cfg.antialias = a.antialias.or(file.antialias).unwrap_or_default();

    let report = experiment::run_scenario(&cfg)?;
    for path in experiment::emit_plot_data(&report, &cfg.out_dir)? {
        println!("{}", path.display());
    }
    Ok(())
}

fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T, CliError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| usage(format!("cannot read {}: {e}", path.display())))?;
    serde_json::from_str(&text).map_err(|e| usage(format!("{}: {e}", path.display())))
}
