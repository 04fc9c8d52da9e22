//! Batch front end: reads states and schedules from JSON files, runs bound
//! comparisons, evolutions, geodesic searches and invariant checks, and
//! writes JSON or CSV reports.

use std::collections::BTreeMap;
use std::fmt;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use qsl_core::bounds::{self, BoundReport, BoundsOptions};
use qsl_core::dynamics::{self, GpDistance, GpOptions, HamiltonianSchedule, Metric, PathSource, Trajectory};
use qsl_core::io::{self, IoError, MatrixFile, MatrixKind};
use qsl_core::{geometry, linalg, states, uhlmann, CMatrix, DensityOperator, QslError};

#[derive(Parser, Debug)]
#[command(name = "qsl", version, about = "Quantum speed limits for closed finite-dimensional systems")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Every speed-limit bound for a pair of states.
    Bounds(BoundsArgs),
    /// Evolve a state and tabulate uncertainty and metric speeds.
    Evolve(EvolveArgs),
    /// Search for a g_p geodesic between two isospectral states.
    Geodesic(GeodesicArgs),
    /// Check the library's invariants on the supplied inputs.
    Verify(VerifyArgs),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Json,
    Csv,
}

#[derive(Args, Debug, Clone)]
pub struct HamiltonianArgs {
    /// Hermitian matrix file for a constant Hamiltonian.
    #[arg(long, conflicts_with = "schedule")]
    pub hamiltonian: Option<PathBuf>,
    /// Schedule file, constant or piecewise.
    #[arg(long)]
    pub schedule: Option<PathBuf>,
    #[arg(long, default_value_t = 0.0, allow_negative_numbers = true)]
    pub t0: f64,
    #[arg(long, allow_negative_numbers = true)]
    pub t1: Option<f64>,
    #[arg(long, default_value_t = 1000)]
    pub steps: usize,
}

#[derive(Args, Debug, Clone)]
pub struct OutputArgs {
    #[arg(long, value_enum, default_value_t = Format::Json)]
    pub format: Format,
    /// Write here instead of standard output.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Args, Debug, Clone)]
pub struct BoundsArgs {
    #[arg(long)]
    pub rho0: PathBuf,
    /// Target state. Defaults to the final state of the evolution when a
    /// Hamiltonian is given.
    #[arg(long)]
    pub rho1: Option<PathBuf>,
    /// Average energy uncertainty. Without it, a Hamiltonian is required and
    /// ΔE is measured along the evolution.
    #[arg(long)]
    pub delta_e: Option<f64>,
    #[command(flatten)]
    pub ham: HamiltonianArgs,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Endpoint tolerance of the g_p search.
    #[arg(long, default_value_t = 1e-6)]
    pub tol: f64,
    #[command(flatten)]
    pub output: OutputArgs,
}

#[derive(Args, Debug, Clone)]
pub struct EvolveArgs {
    #[arg(long)]
    pub rho0: PathBuf,
    #[command(flatten)]
    pub ham: HamiltonianArgs,
    /// Only tabulate this metric's speed.
    #[arg(long, value_parser = parse_metric)]
    pub metric: Option<Metric>,
    #[command(flatten)]
    pub output: OutputArgs,
}

#[derive(Args, Debug, Clone)]
pub struct GeodesicArgs {
    #[arg(long)]
    pub rho0: PathBuf,
    #[arg(long)]
    pub rho1: PathBuf,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Integration steps for the final curve.
    #[arg(long, default_value_t = 2000)]
    pub steps: usize,
    /// Endpoint tolerance.
    #[arg(long, default_value_t = 1e-6)]
    pub tol: f64,
    /// Number of Hamiltonian samples in the schedule dump.
    #[arg(long, default_value_t = 33)]
    pub samples: usize,
    #[command(flatten)]
    pub output: OutputArgs,
}

#[derive(Args, Debug, Clone)]
pub struct VerifyArgs {
    #[arg(long)]
    pub rho0: PathBuf,
    #[arg(long)]
    pub rho1: Option<PathBuf>,
    #[command(flatten)]
    pub ham: HamiltonianArgs,
    /// Restrict the length checks to one metric.
    #[arg(long, value_parser = parse_metric)]
    pub metric: Option<Metric>,
    /// Slack for the inequality checks.
    #[arg(long, default_value_t = 1e-9)]
    pub tol: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[command(flatten)]
    pub output: OutputArgs,
}

fn parse_metric(s: &str) -> Result<Metric, String> {
    s.parse().map_err(|e: QslError| e.to_string())
}

#[derive(Debug)]
pub enum CliError {
    /// Bad input: unreadable content, invalid states, incompatible files.
    Validation(String),
    Internal(String),
    /// The verify command found a violated invariant.
    InvariantFailed(usize),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Validation(_) => 2,
            CliError::Internal(_) | CliError::InvariantFailed(_) => 1,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Validation(m) => write!(f, "invalid input: {m}"),
            CliError::Internal(m) => write!(f, "internal error: {m}"),
            CliError::InvariantFailed(n) => write!(f, "{n} invariant check(s) failed"),
        }
    }
}

impl std::error::Error for CliError {}

impl From<IoError> for CliError {
    fn from(e: IoError) -> Self {
        if e.is_validation() {
            CliError::Validation(e.to_string())
        } else {
            match e {
                IoError::Read { .. } => CliError::Validation(e.to_string()),
                _ => CliError::Internal(e.to_string()),
            }
        }
    }
}

impl From<QslError> for CliError {
    fn from(e: QslError) -> Self {
        use QslError::*;
        match e {
            NotHermitian { .. }
            | NotPsd { .. }
            | TraceNotOne { .. }
            | NotSquare { .. }
            | DimensionMismatch { .. }
            | RankMismatch { .. }
            | NotPure { .. }
            | NotIsospectral
            | NonpositiveUncertainty(_)
            | MetricPrecondition(_)
            | InvalidArgument(_)
            | InvalidPermutation(_)
            | RankTooLarge { .. } => CliError::Validation(e.to_string()),
            _ => CliError::Internal(e.to_string()),
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Internal(e.to_string())
    }
}

impl From<csv::Error> for CliError {
    fn from(e: csv::Error) -> Self {
        CliError::Internal(e.to_string())
    }
}

pub type CliResult<T> = std::result::Result<T, CliError>;

/// Runs a parsed command, writing its report to `--out` or to `stdout`.
pub fn run(cli: Cli, stdout: &mut dyn Write) -> CliResult<()> {
    match cli.command {
        Command::Bounds(a) => cmd_bounds(&a, stdout),
        Command::Evolve(a) => cmd_evolve(&a, stdout),
        Command::Geodesic(a) => cmd_geodesic(&a, stdout),
        Command::Verify(a) => cmd_verify(&a, stdout),
    }
}

fn emit(output: &OutputArgs, stdout: &mut dyn Write, body: &[u8]) -> CliResult<()> {
    match &output.out {
        Some(path) => std::fs::write(path, body).map_err(|e| CliError::Internal(format!("{}: {e}", path.display()))),
        None => {
            stdout.write_all(body)?;
            Ok(())
        }
    }
}

fn json_bytes<T: Serialize>(value: &T) -> CliResult<Vec<u8>> {
    let mut s = serde_json::to_vec_pretty(value).map_err(|e| CliError::Internal(e.to_string()))?;
    s.push(b'\n');
    Ok(s)
}

fn load_schedule(ham: &HamiltonianArgs) -> CliResult<Option<HamiltonianSchedule>> {
    Ok(match (&ham.hamiltonian, &ham.schedule) {
        (Some(h), None) => Some(HamiltonianSchedule::constant(io::read_observable(h)?)),
        (None, Some(s)) => Some(io::read_schedule(s)?),
        (None, None) => None,
        (Some(_), Some(_)) => return Err(CliError::Validation("give either --hamiltonian or --schedule".into())),
    })
}

fn run_evolution(rho0: &DensityOperator, ham: &HamiltonianArgs) -> CliResult<Option<Trajectory>> {
    let Some(schedule) = load_schedule(ham)? else {
        return Ok(None);
    };
    let t1 = ham.t1.ok_or_else(|| CliError::Validation("--t1 is required with a Hamiltonian".into()))?;
    Ok(Some(dynamics::evolve(rho0, &schedule, ham.t0, t1, ham.steps)?))
}

fn gp_options(seed: u64, tol: f64) -> GpOptions {
    GpOptions { seed, endpoint_tol: tol, ..GpOptions::default() }
}

#[derive(Serialize)]
struct EvolutionSummary {
    t0: f64,
    t1: f64,
    steps: usize,
    transit_time: f64,
    delta_e: f64,
    sqrt_qfi_average: f64,
    /// ‖ρ(t1) − ρ₁‖_F when a target state was given.
    endpoint_defect: Option<f64>,
    /// Valid bounds exceeding the transit time, which would contradict them.
    violated_bounds: Vec<String>,
}

#[derive(Serialize)]
struct BoundsOutput {
    #[serde(flatten)]
    report: BoundReport,
    evolution: Option<EvolutionSummary>,
}

fn cmd_bounds(a: &BoundsArgs, stdout: &mut dyn Write) -> CliResult<()> {
    let rho0 = io::read_density(&a.rho0)?;
    let target = a.rho1.as_deref().map(io::read_density).transpose()?;
    let traj = run_evolution(&rho0, &a.ham)?;
    let mut opts = BoundsOptions { gp: gp_options(a.seed, a.tol), ..Default::default() };

    let (rho1, delta_e, summary) = match &traj {
        None => {
            let d = a.delta_e.ok_or_else(|| CliError::Validation("need --delta-e or a Hamiltonian to measure it".into()))?;
            let rho1 = target.ok_or_else(|| CliError::Validation("--rho1 is required without a Hamiltonian".into()))?;
            (rho1, d, None)
        }
        Some(traj) => {
            let given = a.delta_e;
            let measured = dynamics::average_energy_uncertainty(traj)?;
            let delta_e = given.unwrap_or(measured);
            let sqrt_qfi = dynamics::average_sqrt_qfi(traj)?;
            opts.sqrt_qfi_average = Some(sqrt_qfi);
            let end = traj.final_state().clone();
            let endpoint_defect = target.as_ref().map(|t| (t.matrix() - end.matrix()).norm());
            let summary = EvolutionSummary {
                t0: traj.times()[0],
                t1: traj.times()[traj.len() - 1],
                steps: traj.len() - 1,
                transit_time: traj.duration(),
                delta_e: measured,
                sqrt_qfi_average: sqrt_qfi,
                endpoint_defect,
                violated_bounds: Vec::new(),
            };
            (target.unwrap_or(end), delta_e, Some(summary))
        }
    };
    rho0.check_dim(rho1.dim())?;
    let report = bounds::compare_bounds(&rho0, &rho1, delta_e, &opts)?;
    let summary = summary.map(|mut s| {
        s.violated_bounds = report
            .valid_bounds()
            .into_iter()
            .filter(|(_, v)| *v > s.transit_time + 1e-6)
            .map(|(name, _)| name.to_string())
            .collect();
        s
    });

    let body = match a.output.format {
        Format::Json => json_bytes(&BoundsOutput { report, evolution: summary })?,
        Format::Csv => bounds_csv(&report)?,
    };
    emit(&a.output, stdout, &body)
}

fn bounds_csv(r: &BoundReport) -> CliResult<Vec<u8>> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["bound", "value", "valid", "note"])?;
    let opt = |v: Option<f64>| v.map(|x| x.to_string()).unwrap_or_default();
    let na = "not applicable";
    w.write_record(["tau_mt", &opt(r.tau_mt), &r.tau_mt.is_some().to_string(), if r.tau_mt.is_some() { "" } else { na }])?;
    w.write_record(["tau_g", &opt(r.tau_g), &r.tau_g.is_some().to_string(), if r.tau_g.is_some() { "" } else { na }])?;
    w.write_record(["tau_fs", &opt(r.tau_fs), &r.tau_fs.is_some().to_string(), if r.tau_fs.is_some() { "" } else { na }])?;
    w.write_record(["tau_u", &r.tau_u.to_string(), "true", ""])?;
    w.write_record(["tau_frowis", &opt(r.tau_frowis), &r.tau_frowis.is_some().to_string(), &r.tau_frowis_note])?;
    w.write_record(["tau_wy", &r.tau_wy.value.to_string(), &r.tau_wy.valid.to_string(), r.tau_wy.reason.as_deref().unwrap_or("")])?;
    match &r.tau_p {
        Some(p) => {
            let note = p.exact_case.clone().unwrap_or_else(|| if p.converged { "search".into() } else { "search did not converge".into() });
            w.write_record(["tau_p_lower", &p.lower.to_string(), "true", &note])?;
            w.write_record(["tau_p_upper", &p.upper.to_string(), "true", &note])?;
        }
        None => {
            w.write_record(["tau_p_lower", "", "false", na])?;
            w.write_record(["tau_p_upper", "", "false", na])?;
        }
    }
    for check in &r.ordering {
        w.write_record([format!("ordering: {}", check.relation).as_str(), "", &check.holds.to_string(), ""])?;
    }
    w.into_inner().map_err(|e| CliError::Internal(e.to_string()))
}

#[derive(Serialize)]
struct EvolveRow {
    t: f64,
    state: Vec<Vec<[f64; 2]>>,
    delta: f64,
    speeds: BTreeMap<String, Option<f64>>,
}

fn cmd_evolve(a: &EvolveArgs, stdout: &mut dyn Write) -> CliResult<()> {
    let rho0 = io::read_density(&a.rho0)?;
    let traj = run_evolution(&rho0, &a.ham)?.ok_or_else(|| CliError::Validation("evolve needs --hamiltonian or --schedule".into()))?;
    let metrics: Vec<Metric> = match a.metric {
        Some(m) => vec![m],
        None => Metric::ALL.to_vec(),
    };
    let mut rows = Vec::with_capacity(traj.len());
    for ((t, rho), h) in traj.times().iter().zip(traj.states()).zip(traj.hamiltonians()) {
        let speeds = metrics
            .iter()
            .map(|&m| Ok((m.to_string(), if m.applies_to(rho) { Some(dynamics::metric_speed(rho, h, m)?) } else { None })))
            .collect::<CliResult<BTreeMap<_, _>>>()?;
        rows.push(EvolveRow {
            t: *t,
            state: MatrixFile::from_matrix(rho.matrix(), MatrixKind::Density).matrix,
            delta: states::uncertainty(h, rho)?,
            speeds,
        });
    }
    let body = match a.output.format {
        Format::Json => json_bytes(&rows)?,
        Format::Csv => {
            let n = rho0.dim();
            let mut w = csv::Writer::from_writer(Vec::new());
            let mut header = vec!["t".to_string()];
            for i in 0..n {
                for j in 0..n {
                    header.push(format!("rho_{i}_{j}_re"));
                    header.push(format!("rho_{i}_{j}_im"));
                }
            }
            header.push("delta".into());
            header.extend(metrics.iter().map(|m| format!("speed_{m}")));
            w.write_record(&header)?;
            for row in &rows {
                let mut rec = vec![row.t.to_string()];
                for z in row.state.iter().flatten() {
                    rec.push(z[0].to_string());
                    rec.push(z[1].to_string());
                }
                rec.push(row.delta.to_string());
                rec.extend(metrics.iter().map(|m| row.speeds[m.name()].map(|x| x.to_string()).unwrap_or_default()));
                w.write_record(&rec)?;
            }
            w.into_inner().map_err(|e| CliError::Internal(e.to_string()))?
        }
    };
    emit(&a.output, stdout, &body)
}

#[derive(Serialize)]
struct ScheduleSample {
    t: f64,
    hamiltonian: MatrixFile,
}

#[derive(Serialize)]
struct GeodesicOutput {
    lower: f64,
    upper: f64,
    #[serde(rename = "best_T")]
    best_t: f64,
    converged: bool,
    source: PathSource,
    endpoint_defect: f64,
    /// Schrödinger-picture Hamiltonian sampled along the best curve.
    schedule: Vec<ScheduleSample>,
}

/// Reconstructs the best curve's trajectory from its initial Hamiltonian.
pub fn geodesic_trajectory(rho0: &DensityOperator, d: &GpDistance, steps: usize) -> CliResult<Option<Trajectory>> {
    if d.best_t <= 0.0 {
        return Ok(None);
    }
    let traj = match d.source {
        PathSource::Identical => return Ok(None),
        PathSource::Shooting => dynamics::gp_geodesic_shoot(rho0, &d.generator, d.best_t, steps)?,
        PathSource::StraightPath => dynamics::evolve(rho0, &HamiltonianSchedule::constant(d.generator.clone()), 0.0, d.best_t, steps)?,
    };
    Ok(Some(traj))
}

fn sample_indices(len: usize, samples: usize) -> Vec<usize> {
    let samples = samples.max(2).min(len);
    (0..samples).map(|k| k * (len - 1) / (samples - 1)).collect()
}

fn cmd_geodesic(a: &GeodesicArgs, stdout: &mut dyn Write) -> CliResult<()> {
    let rho0 = io::read_density(&a.rho0)?;
    let rho1 = io::read_density(&a.rho1)?;
    rho0.check_dim(rho1.dim())?;
    if !rho0.is_isospectral(&rho1, geometry::ISOSPECTRAL_TOL) {
        return Err(QslError::NotIsospectral.into());
    }
    let d = dynamics::gp_distance_numeric(&rho0, &rho1, &GpOptions { steps: a.steps, ..gp_options(a.seed, a.tol) })?;
    let schedule = match geodesic_trajectory(&rho0, &d, a.steps)? {
        Some(traj) => sample_indices(traj.len(), a.samples)
            .into_iter()
            .map(|k| ScheduleSample {
                t: traj.times()[k],
                hamiltonian: MatrixFile::from_matrix(traj.hamiltonians()[k].matrix(), MatrixKind::Hermitian),
            })
            .collect(),
        None => Vec::new(),
    };
    let out = GeodesicOutput {
        lower: d.lower,
        upper: d.upper,
        best_t: d.best_t,
        converged: d.converged,
        source: d.source,
        endpoint_defect: d.endpoint_defect,
        schedule,
    };
    let body = match a.output.format {
        Format::Json => json_bytes(&out)?,
        Format::Csv => {
            let n = rho0.dim();
            let mut w = csv::Writer::from_writer(Vec::new());
            let mut header = vec!["t".to_string()];
            for i in 0..n {
                for j in 0..n {
                    header.push(format!("h_{i}_{j}_re"));
                    header.push(format!("h_{i}_{j}_im"));
                }
            }
            w.write_record(&header)?;
            for s in &out.schedule {
                let mut rec = vec![s.t.to_string()];
                for z in s.hamiltonian.matrix.iter().flatten() {
                    rec.push(z[0].to_string());
                    rec.push(z[1].to_string());
                }
                w.write_record(&rec)?;
            }
            w.into_inner().map_err(|e| CliError::Internal(e.to_string()))?
        }
    };
    emit(&a.output, stdout, &body)
}

#[derive(Debug, Clone, Serialize)]
pub struct Check {
    pub name: String,
    pub holds: bool,
    /// Margin by which the relation holds; negative when violated.
    pub margin: f64,
}

struct Checks {
    list: Vec<Check>,
    slack: f64,
}

impl Checks {
    /// Records `lhs <= rhs` up to the slack.
    fn le(&mut self, name: impl Into<String>, lhs: f64, rhs: f64, slack: f64) {
        self.list.push(Check { name: name.into(), holds: lhs <= rhs + slack, margin: rhs - lhs });
    }

    fn le_default(&mut self, name: impl Into<String>, lhs: f64, rhs: f64) {
        let slack = self.slack;
        self.le(name, lhs, rhs, slack);
    }

    fn close(&mut self, name: impl Into<String>, a: f64, b: f64, tol: f64) {
        let err = (a - b).abs();
        self.list.push(Check { name: name.into(), holds: err <= tol, margin: tol - err });
    }
}

fn functional_checks(checks: &mut Checks, label: &str, h: &states::Observable, rho: &DensityOperator) -> CliResult<()> {
    let i = states::skew_information(h, rho)?;
    let j = states::j_functional(h, rho)?;
    let v = states::variance(h, rho)?;
    let f = states::quantum_fisher_information(h, rho)?;
    checks.le_default(format!("{label}: I <= J"), i, j);
    checks.le_default(format!("{label}: J <= variance"), j, v);
    checks.le_default(format!("{label}: F/4 <= J"), f / 4.0, j);
    checks.le_default(format!("{label}: F/4 <= variance"), f / 4.0, v);
    let d = uhlmann::dispersion_decomposition(h, rho)?;
    checks.close(format!("{label}: variance = Bures speed² + connection part"), d.variance, d.bures_speed_sq + d.connection_norm_sq, 1e-9);
    Ok(())
}

fn pair_checks(checks: &mut Checks, rho0: &DensityOperator, rho1: &DensityOperator, seed: u64) -> CliResult<()> {
    let fid = geometry::fidelity_sqrt(rho0, rho1)?;
    let aff = geometry::affinity(rho0, rho1)?;
    checks.le_default("affinity <= sqrt fidelity", aff, fid);
    checks.le_default("Bures angle <= WY distance", geometry::bures_angle(rho0, rho1)?, geometry::wy_distance(rho0, rho1)?);

    let mut rng = qsl_core::random::rng(seed);
    let w0 = uhlmann::amplitude_of(rho0).matrix() * qsl_core::random::random_unitary(&mut rng, rho0.dim());
    let w1 = uhlmann::amplitude_of(rho1).matrix() * qsl_core::random::random_unitary(&mut rng, rho1.dim());
    let (u, _, v) = linalg::svd(&(w0.adjoint() * &w1));
    let aligned: CMatrix = &w1 * v * u.adjoint();
    let overlap = linalg::trace(&(w0.adjoint() * aligned)).re;
    let nuclear: f64 = linalg::singular_values(&(w0.adjoint() * &w1)).iter().sum();
    checks.close("nuclear norm of amplitude overlap = sqrt fidelity", nuclear, fid, 1e-10);
    checks.close("aligned amplitude overlap = sqrt fidelity", overlap, fid, 1e-10);

    if rho0.is_isospectral(rho1, geometry::ISOSPECTRAL_TOL) {
        let g = geometry::product_grassmann_distance(rho0, rho1)?;
        checks.le_default("product Plücker <= product Grassmann", geometry::product_plucker_distance(rho0, rho1)?, g);
        for (k, (_, p0, p1)) in geometry::paired_eigenspaces(rho0, rho1)?.iter().enumerate() {
            let d = geometry::grassmann_distance(p0, p1)?;
            let angles = geometry::principal_angles(p0, p1)?.root_sum_square();
            let frames = geometry::grassmann_distance_frames(p0.frame(), p1.frame())?;
            checks.close(format!("eigenspace {k}: distance = root-sum-square of principal angles"), d, angles, 1e-9);
            checks.close(format!("eigenspace {k}: distance = frame form"), d, frames, 1e-7);
            checks.le_default(format!("eigenspace {k}: Plücker <= Grassmann"), geometry::plucker_distance(p0, p1)?, d);
        }
    }
    Ok(())
}

fn endpoint_distance(rho0: &DensityOperator, rho1: &DensityOperator, m: Metric) -> CliResult<f64> {
    Ok(match m {
        Metric::FsPure => geometry::fs_distance_pure(rho0, rho1)?,
        Metric::GrassmannProduct | Metric::Gp => geometry::product_grassmann_distance(rho0, rho1)?,
        Metric::Bures => geometry::bures_angle(rho0, rho1)?,
        Metric::Wy => geometry::wy_distance(rho0, rho1)?,
    })
}

fn cmd_verify(a: &VerifyArgs, stdout: &mut dyn Write) -> CliResult<()> {
    let rho0 = io::read_density(&a.rho0)?;
    let rho1 = a.rho1.as_deref().map(io::read_density).transpose()?;
    if let Some(r) = &rho1 {
        rho0.check_dim(r.dim())?;
    }
    let mut checks = Checks { list: Vec::new(), slack: a.tol };

    checks.close("initial state has unit trace", linalg::trace(rho0.matrix()).re, 1.0, 1e-10);
    if let Some(r1) = &rho1 {
        pair_checks(&mut checks, &rho0, r1, a.seed)?;
    }

    if let Some(traj) = run_evolution(&rho0, &a.ham)? {
        functional_checks(&mut checks, "initial state", &traj.hamiltonians()[0], &rho0)?;
        if let Some(r1) = &rho1 {
            functional_checks(&mut checks, "target state", &traj.hamiltonians()[0], r1)?;
        }
        checks.le("spectrum conserved along the evolution", traj.spectral_drift(), 0.0, 1e-9);
        let end = traj.final_state();
        let metrics: Vec<Metric> = a.metric.map(|m| vec![m]).unwrap_or_else(|| Metric::ALL.to_vec());
        for m in metrics {
            if !traj.states().iter().all(|s| m.applies_to(s)) {
                continue;
            }
            let length = dynamics::curve_length(&traj, m)?;
            checks.le(format!("{m}: endpoint distance <= curve length"), endpoint_distance(&rho0, end, m)?, length, 1e-6);
        }
        let delta_e = dynamics::average_energy_uncertainty(&traj)?;
        if delta_e > 0.0 {
            let opts = BoundsOptions {
                gp: gp_options(a.seed, 1e-6),
                sqrt_qfi_average: Some(dynamics::average_sqrt_qfi(&traj)?),
                skip_gp_search: true,
            };
            let report = bounds::compare_bounds(&rho0, end, delta_e, &opts)?;
            for (name, value) in report.valid_bounds() {
                checks.le(format!("{name} <= transit time"), value, traj.duration(), 1e-6);
            }
            for o in &report.ordering {
                checks.list.push(Check { name: format!("ordering: {}", o.relation), holds: o.holds, margin: 0.0 });
            }
        }
    }

    let failed = checks.list.iter().filter(|c| !c.holds).count();
    let body = match a.output.format {
        Format::Json => json_bytes(&checks.list)?,
        Format::Csv => {
            let mut w = csv::Writer::from_writer(Vec::new());
            w.write_record(["check", "holds", "margin"])?;
            for c in &checks.list {
                w.write_record([c.name.as_str(), &c.holds.to_string(), &c.margin.to_string()])?;
            }
            w.into_inner().map_err(|e| CliError::Internal(e.to_string()))?
        }
    };
    emit(&a.output, stdout, &body)?;
    if failed > 0 {
        return Err(CliError::InvariantFailed(failed));
    }
    Ok(())
}

/// Path helper for tests and callers that assemble file sets.
pub fn write_state(path: &Path, m: &CMatrix) -> CliResult<()> {
    Ok(io::write_matrix_file(path, &MatrixFile::from_matrix(m, MatrixKind::Density))?)
}
