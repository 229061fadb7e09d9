//! Command-line front end.
//!
//! Every flag can also be given in a TOML or JSON file (`--config-file`),
//! either at top level or under a table named after the subcommand. Flags
//! override the file. Each run writes `<command>.manifest.json` with the fully
//! resolved parameters next to its outputs.

use std::ffi::OsString;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::antenna::{ElementPattern, PhaseState};
use crate::emdata::{generate_synthetic, load_dataset, Coupling, EmDataset, Incidence, SyntheticParams, Tier};
use crate::error::Error;
use crate::netalg::C64;
use crate::optimize::{ga_optimize, BeamMode, BeamTarget, GaParams, Objective, OptimizationReport};
use crate::pattern::{beam_metrics_in_cut, AngleGrid, Axis, BeamMetrics, FieldPattern, Sector};
use crate::splitter::{SplitterState, SweepPoint, VaractorCircuit, SWEEP_CSV_HEADER};
use crate::thevenin::{simulate, subtracted_fields, SurfaceConfig, SurfaceConfigSpec};

pub const EXIT_USAGE: i32 = 2;
pub const EXIT_IO: i32 = 3;
pub const EXIT_NUMERIC: i32 = 4;

#[derive(Debug, Parser)]
#[command(name = "bdris", version, about = "Hybrid transmitting/reflecting surface simulator")]
pub struct Cli {
    /// Worker threads for parallel evaluation.
    #[arg(long, global = true, env = "BDRIS_THREADS")]
    pub threads: Option<usize>,
    /// TOML or JSON file supplying any flag.
    #[arg(long, global = true)]
    pub config_file: Option<PathBuf>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate a synthetic EM dataset.
    GenDataset(GenDatasetArgs),
    /// Sweep the varactor splitter over capacitance or frequency.
    SplitterSweep(SweepArgs),
    /// Compute reflected and transmitted patterns of a configuration.
    Simulate(SimulateArgs),
    /// Optimize the antenna states for target beam directions.
    Optimize(OptimizeArgs),
    /// Beam metrics of a pattern CSV.
    Metrics(MetricsArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TierArg {
    Behavioral,
    InternalPorts,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CouplingArg {
    None,
    Radiation,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum GridArg {
    /// φ ∈ {90°, 270°} cut.
    Yoz,
    /// Full sphere.
    Full,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ModeArg {
    Reflection,
    Hybrid,
    Transmission,
}

impl From<ModeArg> for BeamMode {
    fn from(m: ModeArg) -> Self {
        match m {
            ModeArg::Reflection => BeamMode::Reflection,
            ModeArg::Hybrid => BeamMode::Hybrid,
            ModeArg::Transmission => BeamMode::Transmission,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SectorArg {
    Reflection,
    Transmission,
}

#[derive(Debug, Clone, Default, Args, Serialize, Deserialize)]
pub struct GenDatasetArgs {
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub mx: Option<usize>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub my: Option<usize>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub spacing_mm: Option<f64>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub freq_ghz: Option<f64>,
    #[arg(long, value_enum)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub tier: Option<TierArg>,
    #[arg(long, value_enum)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub coupling: Option<CouplingArg>,
    #[arg(long, value_enum)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub grid: Option<GridArg>,
    /// Polar step of the angular grid (degrees).
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub theta_step: Option<f64>,
    /// Azimuth step of the full grid (degrees).
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub phi_step: Option<f64>,
    /// Element pattern exponent q in cos^q.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub element_q: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub inc_theta: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub inc_phi: Option<f64>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub out_dir: Option<PathBuf>,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct GenDatasetParams {
    pub mx: usize,
    pub my: usize,
    pub spacing_mm: f64,
    pub freq_ghz: f64,
    pub tier: TierArg,
    pub coupling: CouplingArg,
    pub grid: GridArg,
    pub theta_step: f64,
    pub phi_step: f64,
    pub element_q: f64,
    pub inc_theta: f64,
    pub inc_phi: f64,
    pub out_dir: PathBuf,
}

impl GenDatasetArgs {
    fn resolve(self) -> GenDatasetParams {
        GenDatasetParams {
            mx: self.mx.unwrap_or(4),
            my: self.my.unwrap_or(4),
            spacing_mm: self.spacing_mm.unwrap_or(62.5),
            freq_ghz: self.freq_ghz.unwrap_or(2.4),
            tier: self.tier.unwrap_or(TierArg::Behavioral),
            coupling: self.coupling.unwrap_or(CouplingArg::None),
            grid: self.grid.unwrap_or(GridArg::Yoz),
            theta_step: self.theta_step.unwrap_or(1.0),
            phi_step: self.phi_step.unwrap_or(5.0),
            element_q: self.element_q.unwrap_or(ElementPattern::default().q),
            inc_theta: self.inc_theta.unwrap_or(0.0),
            inc_phi: self.inc_phi.unwrap_or(0.0),
            out_dir: self.out_dir.unwrap_or_else(default_out_dir),
        }
    }
}

#[derive(Debug, Clone, Default, Args, Serialize, Deserialize)]
pub struct SweepArgs {
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub freq_ghz: Option<f64>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub c_start_pf: Option<f64>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub c_stop_pf: Option<f64>,
    /// Fixed capacitance for a frequency sweep (pF).
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub c_pf: Option<f64>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub f_start_ghz: Option<f64>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub f_stop_ghz: Option<f64>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub points: Option<usize>,
    /// Evaluate a single series impedance instead of the varactor circuit.
    #[arg(long, allow_hyphen_values = true)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub z_re: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub z_im: Option<f64>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub out_dir: Option<PathBuf>,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum SweepPlan {
    Capacitance { freq_ghz: f64, c_start_pf: f64, c_stop_pf: f64, points: usize },
    Frequency { c_pf: f64, f_start_ghz: f64, f_stop_ghz: f64, points: usize },
    Impedance { freq_ghz: f64, z_re: f64, z_im: f64 },
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct SweepParams {
    pub plan: SweepPlan,
    pub out_dir: PathBuf,
}

impl SweepArgs {
    fn resolve(self) -> Result<SweepParams, Error> {
        let points = self.points.unwrap_or(200);
        let plan = if self.z_re.is_some() || self.z_im.is_some() {
            SweepPlan::Impedance {
                freq_ghz: self.freq_ghz.unwrap_or(2.4),
                z_re: self.z_re.unwrap_or(0.0),
                z_im: self.z_im.unwrap_or(0.0),
            }
        } else if self.f_start_ghz.is_some() || self.f_stop_ghz.is_some() || self.c_pf.is_some() {
            SweepPlan::Frequency {
                c_pf: self.c_pf.unwrap_or(1.0),
                f_start_ghz: self.f_start_ghz.unwrap_or(2.0),
                f_stop_ghz: self.f_stop_ghz.unwrap_or(2.8),
                points,
            }
        } else {
            SweepPlan::Capacitance {
                freq_ghz: self.freq_ghz.unwrap_or(2.4),
                c_start_pf: self.c_start_pf.unwrap_or(0.35),
                c_stop_pf: self.c_stop_pf.unwrap_or(3.2),
                points,
            }
        };
        let check_range = |a: f64, b: f64, n: usize| -> Result<(), Error> {
            if !(a.is_finite() && b.is_finite() && a > 0.0 && b > a) || n == 0 {
                return Err(Error::InvalidParameter(format!("empty sweep range [{a}, {b}] with {n} points")));
            }
            Ok(())
        };
        match &plan {
            SweepPlan::Capacitance { c_start_pf, c_stop_pf, points, .. } => check_range(*c_start_pf, *c_stop_pf, *points)?,
            SweepPlan::Frequency { f_start_ghz, f_stop_ghz, points, .. } => check_range(*f_start_ghz, *f_stop_ghz, *points)?,
            SweepPlan::Impedance { .. } => {}
        }
        Ok(SweepParams {
            plan,
            out_dir: self.out_dir.unwrap_or_else(default_out_dir),
        })
    }
}

#[derive(Debug, Clone, Default, Args, Serialize, Deserialize)]
pub struct SimulateArgs {
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub dataset: Option<PathBuf>,
    /// Surface configuration file (JSON or TOML: modes, r_states, t_states).
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub surface: Option<PathBuf>,
    /// Splitter mode for all cells when no surface file is given.
    #[arg(long, value_enum)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub mode: Option<ModeArg>,
    /// Comma-separated reflect-side states (e.g. 00,01,10,11); one value broadcasts.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub r_states: Option<String>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub t_states: Option<String>,
    #[arg(long, allow_hyphen_values = true)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub inc_theta: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub inc_phi: Option<f64>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub amplitude: Option<f64>,
    /// Also write baseline-subtracted patterns (transmission baseline for the
    /// reflected field, reflection baseline for the transmitted field).
    #[arg(long, num_args = 0..=1, default_missing_value = "true")]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub structural_subtract: Option<bool>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub out_dir: Option<PathBuf>,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct SimulateParams {
    pub dataset: PathBuf,
    pub surface: SurfaceConfigSpec,
    pub incidence: Incidence,
    pub structural_subtract: bool,
    pub out_dir: PathBuf,
}

#[derive(Debug, Clone, Default, Args, Serialize, Deserialize)]
pub struct OptimizeArgs {
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub dataset: Option<PathBuf>,
    #[arg(long, value_enum)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub mode: Option<ModeArg>,
    /// Signed reflection target in the YOZ cut (negative selects φ = 270°).
    #[arg(long, allow_hyphen_values = true)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub theta_r: Option<f64>,
    /// Signed transmission target polar angle, |θ_T| ∈ (90°, 180°].
    #[arg(long, allow_hyphen_values = true)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub theta_t: Option<f64>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub population: Option<usize>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub generations: Option<usize>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub crossover_rate: Option<f64>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub mutation_rate: Option<f64>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub elitism: Option<usize>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub tournament: Option<usize>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub out_dir: Option<PathBuf>,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct OptimizeParams {
    pub dataset: PathBuf,
    pub target: BeamTarget,
    pub ga: GaParams,
    pub out_dir: PathBuf,
}

#[derive(Debug, Clone, Default, Args, Serialize, Deserialize)]
pub struct MetricsArgs {
    /// Pattern CSV (theta_deg, phi_deg, re, im, mag_db).
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub pattern: Option<PathBuf>,
    #[arg(long, value_enum)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub sector: Option<SectorArg>,
    /// Cut-plane azimuth (degrees).
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub phi0: Option<f64>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub out_dir: Option<PathBuf>,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct MetricsParams {
    pub pattern: PathBuf,
    pub sector: SectorArg,
    pub phi0: f64,
    pub out_dir: PathBuf,
}

#[derive(Debug, Serialize)]
struct Manifest<'a, P: Serialize> {
    command: &'a str,
    version: &'a str,
    threads: Option<usize>,
    params: &'a P,
    outputs: Vec<String>,
}

fn default_out_dir() -> PathBuf {
    PathBuf::from("bdris-out")
}

/// Parses a TOML or JSON file into a JSON value (TOML unless the extension is `.json`).
fn read_structured(path: &Path) -> Result<Value, Error> {
    let text = fs::read_to_string(path)?;
    if path.extension().is_some_and(|e| e.eq_ignore_ascii_case("json")) {
        Ok(serde_json::from_str(&text)?)
    } else {
        toml::from_str(&text).map_err(|e| Error::Schema(format!("{}: {e}", path.display())))
    }
}

/// File values overlaid by flag values.
fn merge_args<T: Serialize + DeserializeOwned>(flags: &T, file: Option<&Path>, section: &str) -> Result<T, Error> {
    let mut base = match file {
        Some(p) => {
            let v = read_structured(p)?;
            match v.get(section) {
                Some(s @ Value::Object(_)) => s.clone(),
                _ => v,
            }
        }
        None => Value::Object(Default::default()),
    };
    let Value::Object(ref mut map) = base else {
        return Err(Error::Schema("config file must be a table".into()));
    };
    if let Value::Object(over) = serde_json::to_value(flags)? {
        map.extend(over);
    }
    serde_json::from_value(base).map_err(|e| Error::InvalidParameter(format!("config file: {e}")))
}

fn parse_states(s: &str) -> Result<Vec<PhaseState>, Error> {
    s.split(',').map(|t| t.trim().parse()).collect()
}

fn broadcast(states: Vec<PhaseState>, m: usize, what: &str) -> Result<Vec<PhaseState>, Error> {
    match states.len() {
        1 => Ok(vec![states[0]; m]),
        n if n == m => Ok(states),
        n => Err(Error::DimensionMismatch(format!("{n} {what} for {m} cells"))),
    }
}

fn write_file(dir: &Path, name: &str, data: &[u8], outputs: &mut Vec<String>) -> Result<(), Error> {
    fs::write(dir.join(name), data)?;
    outputs.push(name.to_string());
    Ok(())
}

fn write_pattern(dir: &Path, name: &str, p: &FieldPattern, outputs: &mut Vec<String>) -> Result<(), Error> {
    let mut buf = Vec::new();
    p.write_csv(&mut buf)?;
    write_file(dir, name, &buf, outputs)
}

fn write_manifest<P: Serialize>(
    dir: &Path,
    command: &str,
    threads: Option<usize>,
    params: &P,
    outputs: Vec<String>,
) -> Result<(), Error> {
    let m = Manifest {
        command,
        version: env!("CARGO_PKG_VERSION"),
        threads,
        params,
        outputs,
    };
    fs::write(dir.join(format!("{command}.manifest.json")), serde_json::to_string_pretty(&m)?)?;
    Ok(())
}

/// Exit code for a library error.
pub fn exit_code(e: &Error) -> i32 {
    match e.root() {
        Error::InvalidParameter(_)
        | Error::InvalidLayout(_)
        | Error::OutOfSector { .. }
        | Error::DimensionMismatch(_)
        | Error::Unachievable { .. }
        | Error::WrongSide(_) => EXIT_USAGE,
        Error::Io(_) | Error::Json(_) | Error::Schema(_) | Error::GridMismatch(_) | Error::Reciprocity { .. } => EXIT_IO,
        _ => EXIT_NUMERIC,
    }
}

/// Parses arguments, runs the command and returns the process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    match execute(&cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            exit_code(&e)
        }
    }
}

fn execute(cli: &Cli) -> Result<(), Error> {
    if let Some(n) = cli.threads {
        if n == 0 {
            return Err(Error::InvalidParameter("--threads must be positive".into()));
        }
        // a pool may already exist when called repeatedly in-process
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    }
    let file = cli.config_file.as_deref();
    match &cli.command {
        Command::GenDataset(a) => cmd_gen_dataset(merge_args(a, file, "gen-dataset")?.resolve(), cli.threads),
        Command::SplitterSweep(a) => cmd_splitter_sweep(merge_args(a, file, "splitter-sweep")?.resolve()?, cli.threads),
        Command::Simulate(a) => cmd_simulate(resolve_simulate(merge_args(a, file, "simulate")?)?, cli.threads),
        Command::Optimize(a) => cmd_optimize(resolve_optimize(merge_args(a, file, "optimize")?)?, cli.threads),
        Command::Metrics(a) => cmd_metrics(resolve_metrics(merge_args(a, file, "metrics")?)?, cli.threads),
    }
}

pub fn cmd_gen_dataset(p: GenDatasetParams, threads: Option<usize>) -> Result<(), Error> {
    let grid = match p.grid {
        GridArg::Yoz => AngleGrid::cut(90.0, p.theta_step)?,
        GridArg::Full => AngleGrid::full(p.theta_step, p.phi_step)?,
    };
    let params = SyntheticParams {
        m_x: p.mx,
        m_y: p.my,
        spacing: p.spacing_mm * 1e-3,
        f_hz: p.freq_ghz * 1e9,
        element: ElementPattern { q: p.element_q },
        tier: match p.tier {
            TierArg::Behavioral => Tier::Behavioral,
            TierArg::InternalPorts => Tier::InternalPorts,
        },
        coupling: match p.coupling {
            CouplingArg::None => Coupling::None,
            CouplingArg::Radiation => Coupling::Radiation,
        },
        grid,
        incidence: Incidence::new(p.inc_theta, p.inc_phi, 1.0),
        ..Default::default()
    };
    let ds = generate_synthetic(&params)?;
    fs::create_dir_all(&p.out_dir)?;
    let mut outputs = Vec::new();
    write_file(&p.out_dir, "dataset.json", ds.to_json()?.as_bytes(), &mut outputs)?;
    write_manifest(&p.out_dir, "gen-dataset", threads, &p, outputs)?;
    println!(
        "dataset: M = {}, Q = {}, f = {} GHz, spacing = {} mm -> {}",
        ds.m,
        ds.q,
        p.freq_ghz,
        p.spacing_mm,
        p.out_dir.join("dataset.json").display()
    );
    Ok(())
}

fn linspace(a: f64, b: f64, n: usize) -> Vec<f64> {
    if n == 1 {
        return vec![a];
    }
    (0..n).map(|i| a + (b - a) * i as f64 / (n - 1) as f64).collect()
}

pub fn sweep_points(plan: &SweepPlan) -> Result<Vec<SweepPoint>, Error> {
    let circuit = VaractorCircuit::default();
    match *plan {
        SweepPlan::Capacitance { freq_ghz, c_start_pf, c_stop_pf, points } => linspace(c_start_pf, c_stop_pf, points)
            .into_iter()
            .map(|c| SweepPoint::evaluate(&circuit, c * 1e-12, freq_ghz * 1e9))
            .collect(),
        SweepPlan::Frequency { c_pf, f_start_ghz, f_stop_ghz, points } => linspace(f_start_ghz, f_stop_ghz, points)
            .into_iter()
            .map(|f| SweepPoint::evaluate(&circuit, c_pf * 1e-12, f * 1e9))
            .collect(),
        SweepPlan::Impedance { freq_ghz, z_re, z_im } => {
            let st = SplitterState::from_impedance(C64::new(z_re, z_im))?;
            Ok(vec![SweepPoint::from_state(&st, freq_ghz * 1e9)])
        }
    }
}

pub fn cmd_splitter_sweep(p: SweepParams, threads: Option<usize>) -> Result<(), Error> {
    let rows = sweep_points(&p.plan)?;
    let mut csv = String::from(SWEEP_CSV_HEADER);
    csv.push('\n');
    for r in &rows {
        csv.push_str(&r.csv_row());
        csv.push('\n');
    }
    fs::create_dir_all(&p.out_dir)?;
    let mut outputs = Vec::new();
    write_file(&p.out_dir, "sweep.csv", csv.as_bytes(), &mut outputs)?;
    write_manifest(&p.out_dir, "splitter-sweep", threads, &p, outputs)?;
    let (lo, hi) = rows
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), r| (a.min(r.ratio_db), b.max(r.ratio_db)));
    println!("{} points, ratio {lo:.3} .. {hi:.3} dB", rows.len());
    Ok(())
}

fn resolve_simulate(a: SimulateArgs) -> Result<SimulateParams, Error> {
    let dataset = a
        .dataset
        .ok_or_else(|| Error::InvalidParameter("--dataset is required".into()))?;
    let surface = match a.surface {
        Some(path) => serde_json::from_value(read_structured(&path)?).map_err(|e| Error::Schema(e.to_string()))?,
        None => SurfaceConfigSpec {
            modes: vec![BeamMode::from(a.mode.unwrap_or(ModeArg::Hybrid)).splitter_mode()],
            r_states: parse_states(a.r_states.as_deref().unwrap_or("00"))?,
            t_states: parse_states(a.t_states.as_deref().unwrap_or("00"))?,
        },
    };
    Ok(SimulateParams {
        dataset,
        surface,
        incidence: Incidence::new(a.inc_theta.unwrap_or(0.0), a.inc_phi.unwrap_or(0.0), a.amplitude.unwrap_or(1.0)),
        structural_subtract: a.structural_subtract.unwrap_or(false),
        out_dir: a.out_dir.unwrap_or_else(default_out_dir),
    })
}

/// Broadcasts single-state vectors to the dataset size and resolves presets.
pub fn surface_for(ds: &EmDataset, spec: &SurfaceConfigSpec) -> Result<SurfaceConfig, Error> {
    let spec = SurfaceConfigSpec {
        modes: spec.modes.clone(),
        r_states: broadcast(spec.r_states.clone(), ds.m, "reflect states")?,
        t_states: broadcast(spec.t_states.clone(), ds.m, "transmit states")?,
    };
    spec.resolve(ds.f_hz)
}

#[derive(Debug, Serialize)]
struct SimulateMetrics {
    reflection: Option<BeamMetrics>,
    transmission: Option<BeamMetrics>,
    reflected_peak: f64,
    transmitted_peak: f64,
}

pub fn cmd_simulate(p: SimulateParams, threads: Option<usize>) -> Result<(), Error> {
    let ds = load_dataset(&p.dataset)?;
    let cfg = surface_for(&ds, &p.surface)?;
    let r = simulate(&ds, &cfg, p.incidence)?;
    fs::create_dir_all(&p.out_dir)?;
    let mut outputs = Vec::new();
    write_pattern(&p.out_dir, "reflected.csv", &r.e_r, &mut outputs)?;
    write_pattern(&p.out_dir, "transmitted.csv", &r.e_t, &mut outputs)?;
    let metrics = SimulateMetrics {
        reflection: beam_metrics_in_cut(&r.e_r, Sector::Reflection, 90.0, None).ok(),
        transmission: beam_metrics_in_cut(&r.e_t, Sector::Transmission, 90.0, None).ok(),
        reflected_peak: r.e_r.max_abs(),
        transmitted_peak: r.e_t.max_abs(),
    };
    write_file(&p.out_dir, "metrics.json", serde_json::to_string_pretty(&metrics)?.as_bytes(), &mut outputs)?;
    if p.structural_subtract {
        let (sr, st) = subtracted_fields(&ds, &cfg, p.incidence)?;
        write_pattern(&p.out_dir, "reflected_subtracted.csv", &sr, &mut outputs)?;
        write_pattern(&p.out_dir, "transmitted_subtracted.csv", &st, &mut outputs)?;
    }
    write_manifest(&p.out_dir, "simulate", threads, &p, outputs)?;
    println!(
        "reflected peak {:.4e}, transmitted peak {:.4e} -> {}",
        metrics.reflected_peak,
        metrics.transmitted_peak,
        p.out_dir.display()
    );
    Ok(())
}

fn resolve_optimize(a: OptimizeArgs) -> Result<OptimizeParams, Error> {
    let dataset = a
        .dataset
        .ok_or_else(|| Error::InvalidParameter("--dataset is required".into()))?;
    let mode = BeamMode::from(a.mode.unwrap_or(ModeArg::Hybrid));
    let target = BeamTarget::from_signed(mode, a.theta_r.unwrap_or(0.0), a.theta_t.unwrap_or(180.0))?;
    let d = GaParams::default();
    let ga = GaParams {
        population: a.population.unwrap_or(d.population),
        generations: a.generations.unwrap_or(d.generations),
        crossover_rate: a.crossover_rate.unwrap_or(d.crossover_rate),
        mutation_rate: a.mutation_rate.or(d.mutation_rate),
        elitism: a.elitism.unwrap_or(d.elitism),
        tournament: a.tournament.unwrap_or(d.tournament),
        seed: a.seed.unwrap_or(d.seed),
    };
    ga.validate()?;
    Ok(OptimizeParams {
        dataset,
        target,
        ga,
        out_dir: a.out_dir.unwrap_or_else(default_out_dir),
    })
}

pub fn cmd_optimize(p: OptimizeParams, threads: Option<usize>) -> Result<(), Error> {
    let ds = load_dataset(&p.dataset)?;
    let obj = Objective::new(&ds, p.target)?;
    let res = ga_optimize(&obj, &p.ga)?;
    let report = OptimizationReport::build(&obj, &p.ga, &res)?;
    fs::create_dir_all(&p.out_dir)?;
    let mut outputs = Vec::new();
    write_file(&p.out_dir, "report.json", serde_json::to_string_pretty(&report)?.as_bytes(), &mut outputs)?;
    let spec = res.best.to_spec(p.target.mode);
    write_file(&p.out_dir, "best_config.json", serde_json::to_string_pretty(&spec)?.as_bytes(), &mut outputs)?;
    write_manifest(&p.out_dir, "optimize", threads, &p, outputs)?;
    let mut out = std::io::stdout().lock();
    writeln!(out, "best {} fitness {:.6e}", res.best, res.best_fitness)?;
    if let Some(b) = report.achieved.reflection {
        writeln!(out, "reflection peak ({:.1}, {:.1}) deg", b.peak_direction.0, b.peak_direction.1)?;
    }
    if let Some(b) = report.achieved.transmission {
        writeln!(out, "transmission peak ({:.1}, {:.1}) deg", b.peak_direction.0, b.peak_direction.1)?;
    }
    Ok(())
}

fn resolve_metrics(a: MetricsArgs) -> Result<MetricsParams, Error> {
    Ok(MetricsParams {
        pattern: a
            .pattern
            .ok_or_else(|| Error::InvalidParameter("--pattern is required".into()))?,
        sector: a.sector.unwrap_or(SectorArg::Reflection),
        phi0: a.phi0.unwrap_or(90.0),
        out_dir: a.out_dir.unwrap_or_else(default_out_dir),
    })
}

fn axis_from(values: &[f64]) -> Result<Axis, Error> {
    let step = if values.len() > 1 { values[1] - values[0] } else { 1.0 };
    let axis = Axis::new(values[0], step, values.len());
    if values.iter().enumerate().any(|(i, v)| (axis.value(i) - v).abs() > 1e-6) {
        return Err(Error::Schema("pattern angles are not uniformly spaced".into()));
    }
    Ok(axis)
}

/// Reads a pattern CSV written by [`FieldPattern::write_csv`].
pub fn read_pattern_csv(path: &Path) -> Result<FieldPattern, Error> {
    let mut rdr = csv::Reader::from_path(path).map_err(|e| csv_error(path, e))?;
    let mut rows: Vec<(f64, f64, C64)> = Vec::new();
    for rec in rdr.records() {
        let rec = rec.map_err(|e| csv_error(path, e))?;
        let num = |i: usize| -> Result<f64, Error> {
            rec.get(i)
                .and_then(|s| s.trim().parse().ok())
                .ok_or_else(|| Error::Schema(format!("{}: bad column {i}", path.display())))
        };
        rows.push((num(0)?, num(1)?, C64::new(num(2)?, num(3)?)));
    }
    if rows.is_empty() {
        return Err(Error::Schema(format!("{}: no samples", path.display())));
    }
    let n_phi = rows.iter().take_while(|r| r.0 == rows[0].0).count();
    if rows.len() % n_phi != 0 {
        return Err(Error::Schema("pattern is not a full grid".into()));
    }
    let thetas: Vec<f64> = rows.iter().step_by(n_phi).map(|r| r.0).collect();
    let phis: Vec<f64> = rows[..n_phi].iter().map(|r| r.1).collect();
    let grid = AngleGrid::new(axis_from(&thetas)?, axis_from(&phis)?)?;
    for (k, r) in rows.iter().enumerate() {
        let (t, ph) = grid.angles(k);
        if (t - r.0).abs() > 1e-6 || (ph - r.1).abs() > 1e-6 {
            return Err(Error::Schema(format!("{}: sample {k} out of grid order", path.display())));
        }
    }
    FieldPattern::new(grid, rows.into_iter().map(|r| r.2).collect(), 0.0)
}

fn csv_error(path: &Path, e: csv::Error) -> Error {
    if e.is_io_error() {
        match e.into_kind() {
            csv::ErrorKind::Io(io) => Error::Io(io),
            _ => unreachable!("checked io kind"),
        }
    } else {
        Error::Schema(format!("{}: {e}", path.display()))
    }
}

pub fn cmd_metrics(p: MetricsParams, threads: Option<usize>) -> Result<(), Error> {
    let pattern = read_pattern_csv(&p.pattern)?;
    let sector = match p.sector {
        SectorArg::Reflection => Sector::Reflection,
        SectorArg::Transmission => Sector::Transmission,
    };
    let m = beam_metrics_in_cut(&pattern, sector, p.phi0, None)?;
    let json = serde_json::to_string_pretty(&m)?;
    fs::create_dir_all(&p.out_dir)?;
    let mut outputs = Vec::new();
    write_file(&p.out_dir, "beam_metrics.json", json.as_bytes(), &mut outputs)?;
    write_manifest(&p.out_dir, "metrics", threads, &p, outputs)?;
    println!("{json}");
    Ok(())
}
