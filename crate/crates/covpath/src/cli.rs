//! The `covpath` command line.

use std::ffi::OsString;
use std::fs;
use std::io::BufWriter;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand, ValueEnum};
use covpath_core::fisher_rao::{scalar_solve, ScalarPathForm};
use covpath_core::fit::{
    generate_synthetic, FitDataset, FitFamily, FitModelSpec, FitOptions, FitParams, DEFAULT_WLS_EPSILON,
};
use covpath_core::montecarlo::{covariance_discrepancy, EnsembleSpec, SimulationPlan};
use covpath_core::omt::{path_at, OmtModel};
use covpath_core::path::{sample, sample_at, uniform_grid, CovariancePath, PathModel, DEFAULT_GRID};
use covpath_core::solvers::{
    continue_epsilon, shoot, BoundaryProblem, ContinuationOptions, ContinuationPlan, Family, ShootOptions,
};
use covpath_core::{SpdMatrix, SquareMatrix, SymMatrix};
use serde_json::json;

use crate::ellipse::ellipse_points;
use crate::error::{CliError, EXIT_OK};
use crate::io::{
    fmt_f64, load_matrix_arg, load_spd_arg, parse_list, read_path_csv, row_major, save_path_csv, MatrixFile, ParamsFile,
};
use crate::parallel;

#[derive(Debug, Parser)]
#[command(name = "covpath", version, about = "Covariance paths between positive-definite matrices")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Closed-form transport path.
    Omt(OmtArgs),
    /// Noisy Fisher-Rao path (closed forms for scalars, shooting otherwise).
    FisherRao(FisherRaoArgs),
    /// Rotating-eigenspace path by continuation in epsilon.
    Wls(WlsArgs),
    /// Monte Carlo check of a control policy.
    Simulate(SimulateArgs),
    /// Fit a path family to sample covariances.
    Fit(FitArgs),
    /// Draw a synthetic dataset from a parameter file.
    Synth(SynthArgs),
    /// Level-set ellipses of a 2x2 path.
    Ellipse(EllipseArgs),
}

#[derive(Debug, clap::Args)]
#[command(allow_negative_numbers = true)]
pub struct OmtArgs {
    /// Matrix file or inline scalar.
    #[arg(long)]
    pub p0: String,
    #[arg(long)]
    pub p1: String,
    #[arg(long, default_value_t = 0.0)]
    pub sigma: f64,
    #[arg(long, default_value_t = DEFAULT_GRID)]
    pub grid: usize,
    #[arg(long)]
    pub out: PathBuf,
    /// Append the system matrices.
    #[arg(long = "with-a", alias = "with-A")]
    pub with_a: bool,
}

#[derive(Debug, clap::Args)]
#[command(allow_negative_numbers = true)]
pub struct FisherRaoArgs {
    #[arg(long)]
    pub p0: String,
    /// Matrix file, inline scalar, or a comma-separated list of scalars for
    /// an overlay against the transport paths.
    #[arg(long)]
    pub p1: String,
    #[arg(long, default_value_t = 0.0)]
    pub sigma: f64,
    #[arg(long, default_value_t = DEFAULT_GRID)]
    pub grid: usize,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long = "with-a", alias = "with-A")]
    pub with_a: bool,
    /// Print the scalar solution family and its parameters.
    #[arg(long)]
    pub scalar_form: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Branch {
    Pos,
    Neg,
}

#[derive(Debug, clap::Args)]
#[command(allow_negative_numbers = true)]
pub struct WlsArgs {
    #[arg(long)]
    pub p0: String,
    #[arg(long)]
    pub p1: String,
    #[arg(long, default_value_t = 0.0)]
    pub sigma: f64,
    /// Final epsilon of the continuation.
    #[arg(long)]
    pub epsilon: f64,
    #[arg(long, value_enum, default_value_t = Branch::Pos)]
    pub seed_branch: Branch,
    #[arg(long, default_value_t = 0.001)]
    pub eps_start: f64,
    #[arg(long, default_value_t = 0.001)]
    pub eps_step: f64,
    #[arg(long, default_value_t = DEFAULT_GRID)]
    pub grid: usize,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long = "with-a", alias = "with-A")]
    pub with_a: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Policy {
    Omt,
    Fr,
    Wls,
}

#[derive(Debug, clap::Args)]
#[command(allow_negative_numbers = true)]
pub struct SimulateArgs {
    #[arg(long, value_enum)]
    pub policy: Policy,
    #[arg(long)]
    pub p0: String,
    #[arg(long)]
    pub p1: String,
    #[arg(long, default_value_t = 0.0)]
    pub sigma: f64,
    /// Asymmetry weight of the wls policy.
    #[arg(long, default_value_t = DEFAULT_WLS_EPSILON)]
    pub epsilon: f64,
    #[arg(long, default_value_t = 10_000)]
    pub traj: usize,
    #[arg(long, default_value_t = 1e-3)]
    pub dt: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Comma-separated sample times on the time-step grid.
    #[arg(long, default_value = "0,0.25,0.5,0.75,1")]
    pub times: String,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum FamilyArg {
    Omt,
    Fr,
    Wls,
}

impl FamilyArg {
    fn name(self) -> &'static str {
        match self {
            FamilyArg::Omt => "omt",
            FamilyArg::Fr => "fr",
            FamilyArg::Wls => "wls",
        }
    }

    fn fit_family(self, epsilon: f64) -> FitFamily {
        match self {
            FamilyArg::Omt => FitFamily::OmtClosedForm,
            FamilyArg::Fr => FitFamily::FisherRaoOde,
            FamilyArg::Wls => FitFamily::WlsNoiselessRotating { epsilon },
        }
    }
}

#[derive(Debug, clap::Args)]
#[command(allow_negative_numbers = true)]
pub struct FitArgs {
    /// Matrix file with a time on every entry.
    #[arg(long)]
    pub data: PathBuf,
    #[arg(long, value_enum)]
    pub family: FamilyArg,
    #[arg(long, default_value_t = DEFAULT_WLS_EPSILON)]
    pub epsilon: f64,
    #[arg(long, default_value_t = 4)]
    pub starts: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Fitted path, sampled on a uniform grid.
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, default_value_t = DEFAULT_GRID)]
    pub grid: usize,
    /// Also write the fitted parameters here.
    #[arg(long)]
    pub params_out: Option<PathBuf>,
}

#[derive(Debug, clap::Args)]
#[command(allow_negative_numbers = true)]
pub struct SynthArgs {
    #[arg(long, value_enum)]
    pub family: FamilyArg,
    #[arg(long)]
    pub params: PathBuf,
    #[arg(long)]
    pub times: String,
    #[arg(long)]
    pub n: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, clap::Args)]
#[command(allow_negative_numbers = true)]
pub struct EllipseArgs {
    #[arg(long)]
    pub path: PathBuf,
    #[arg(long, default_value_t = 0.5)]
    pub r: f64,
    #[arg(long, default_value_t = 64)]
    pub points: usize,
    #[arg(long)]
    pub out: PathBuf,
}

/// Parses `args` (program name first), runs the command and returns the
/// exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return e.exit_code();
        }
    };
    match execute(cli.command) {
        Ok(()) => EXIT_OK,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

pub fn execute(command: Command) -> Result<(), CliError> {
    match command {
        Command::Omt(a) => cmd_omt(&a),
        Command::FisherRao(a) => cmd_fisher_rao(&a),
        Command::Wls(a) => cmd_wls(&a),
        Command::Simulate(a) => cmd_simulate(&a),
        Command::Fit(a) => cmd_fit(&a),
        Command::Synth(a) => cmd_synth(&a),
        Command::Ellipse(a) => cmd_ellipse(&a),
    }
}

fn check_sigma(sigma: f64) -> Result<(), CliError> {
    if sigma >= 0.0 && sigma.is_finite() {
        Ok(())
    } else {
        Err(CliError::Invalid(format!("sigma must be finite and non-negative, got {sigma}")))
    }
}

fn check_grid(grid: usize) -> Result<(), CliError> {
    if grid < 2 {
        return Err(CliError::Invalid("grid needs at least 2 points".into()));
    }
    Ok(())
}

fn endpoints(p0: &str, p1: &str) -> Result<(SpdMatrix, SpdMatrix), CliError> {
    let p0 = load_spd_arg(p0)?;
    let p1 = load_spd_arg(p1)?;
    if p0.dim() != p1.dim() {
        return Err(CliError::Invalid(format!("endpoint dimensions differ ({} and {})", p0.dim(), p1.dim())));
    }
    Ok((p0, p1))
}

pub fn cmd_omt(args: &OmtArgs) -> Result<(), CliError> {
    check_sigma(args.sigma)?;
    check_grid(args.grid)?;
    let (p0, p1) = endpoints(&args.p0, &args.p1)?;
    let model = OmtModel::between(&p0, &p1, args.sigma)?;
    let path = sample(&PathModel::Omt(model), args.grid)?;
    save_path_csv(&args.out, &path, args.with_a)
}

fn describe_scalar(form: &ScalarPathForm) -> serde_json::Value {
    let mut v = match *form {
        ScalarPathForm::Linear { p0, sign, sigma } => {
            json!({ "family": "linear", "p0": p0, "sign": sign, "sigma": sigma })
        }
        ScalarPathForm::Exponential { a, b, c, sigma } => {
            json!({ "family": "exponential", "a": a, "b": b, "c": c, "sigma": sigma })
        }
        ScalarPathForm::Trigonometric { omega, theta, sigma } => {
            json!({ "family": "trigonometric", "omega": omega, "theta": theta, "sigma": sigma })
        }
    };
    v["pi0"] = json!(form.initial_costate());
    v
}

fn scalar_fr_path(p0: f64, p1: f64, sigma: f64, grid: usize) -> Result<(ScalarPathForm, CovariancePath), CliError> {
    let form = scalar_solve(p0, p1, sigma)?;
    let path = sample(&PathModel::Scalar(form), grid)?;
    Ok((form, path))
}

pub fn cmd_fisher_rao(args: &FisherRaoArgs) -> Result<(), CliError> {
    check_sigma(args.sigma)?;
    check_grid(args.grid)?;
    if args.p1.contains(',') {
        return fisher_rao_overlay(args);
    }
    let (p0, p1) = endpoints(&args.p0, &args.p1)?;
    if p0.dim() == 1 {
        let (form, path) = scalar_fr_path(p0.as_mat()[(0, 0)], p1.as_mat()[(0, 0)], args.sigma, args.grid)?;
        if args.scalar_form {
            println!("{}", describe_scalar(&form));
        }
        return save_path_csv(&args.out, &path, args.with_a);
    }
    if args.scalar_form {
        return Err(CliError::Unsupported("--scalar-form needs 1x1 endpoints".into()));
    }
    let problem = BoundaryProblem::new(p0, p1, args.sigma, Family::FisherRao)?;
    let options = ShootOptions { grid: args.grid, ..ShootOptions::default() };
    let solution = shoot(&problem, &options).map_err(|e| CliError::Solver(e.to_string()))?;
    eprintln!("residual {:.3e}", solution.residual);
    save_path_csv(&args.out, &solution.path, args.with_a)
}

/// Wide CSV: `t`, then `info_<p1>` and `omt_<p1>` for each target.
fn fisher_rao_overlay(args: &FisherRaoArgs) -> Result<(), CliError> {
    let p0 = load_matrix_arg(&args.p0)?;
    if p0.dim() != 1 {
        return Err(CliError::Unsupported("overlays need a scalar p0".into()));
    }
    let p0 = p0.as_mat()[(0, 0)];
    let targets = parse_list(&args.p1)?;
    let grid = uniform_grid(args.grid);
    let mut header = vec!["t".to_string()];
    let mut columns: Vec<Vec<f64>> = Vec::new();
    for &p1 in &targets {
        let (form, info) = scalar_fr_path(p0, p1, args.sigma, args.grid)?;
        let omt = sample(
            &PathModel::Omt(OmtModel::between(&SpdMatrix::scalar(p0)?, &SpdMatrix::scalar(p1)?, args.sigma)?),
            args.grid,
        )?;
        if args.scalar_form {
            let mut v = describe_scalar(&form);
            v["p1"] = json!(p1);
            println!("{v}");
        }
        header.push(format!("info_{p1}"));
        header.push(format!("omt_{p1}"));
        columns.push(info.covariances.iter().map(|p| p.as_mat()[(0, 0)]).collect());
        columns.push(omt.covariances.iter().map(|p| p.as_mat()[(0, 0)]).collect());
    }
    let file = create(&args.out)?;
    let mut w = csv::Writer::from_writer(file);
    w.write_record(&header).map_err(io_err)?;
    for (k, &t) in grid.iter().enumerate() {
        let mut row = vec![fmt_f64(t)];
        row.extend(columns.iter().map(|c| fmt_f64(c[k])));
        w.write_record(&row).map_err(io_err)?;
    }
    w.flush().map_err(io_err)
}

/// `±(π/700)(E₀₁ + E₁₀)`, embedded in the leading 2x2 block.
pub fn branch_seed(n: usize, branch: Branch) -> SymMatrix {
    let sign = match branch {
        Branch::Pos => 1.0,
        Branch::Neg => -1.0,
    };
    let mut m = SymMatrix::zeros(n).into_mat();
    m[(0, 1)] = sign * std::f64::consts::PI / 700.0;
    m[(1, 0)] = m[(0, 1)];
    SymMatrix::from_symmetric_part(&m)
}

/// Covariance nearest to `t` on the path.
fn covariance_near(path: &CovariancePath, t: f64) -> &SpdMatrix {
    let k = path
        .times
        .iter()
        .enumerate()
        .min_by(|a, b| (a.1 - t).abs().total_cmp(&(b.1 - t).abs()))
        .map(|(k, _)| k)
        .unwrap_or(0);
    &path.covariances[k]
}

pub fn cmd_wls(args: &WlsArgs) -> Result<(), CliError> {
    check_sigma(args.sigma)?;
    check_grid(args.grid)?;
    let (p0, p1) = endpoints(&args.p0, &args.p1)?;
    if p0.dim() < 2 {
        return Err(CliError::Unsupported("continuation seeds need at least 2x2 endpoints".into()));
    }
    if args.epsilon.is_nan() || args.epsilon <= args.eps_start {
        return Err(CliError::Invalid(format!(
            "epsilon ({}) must exceed eps-start ({})",
            args.epsilon, args.eps_start
        )));
    }
    let plan = ContinuationPlan {
        epsilon_step: args.eps_step,
        ..ContinuationPlan::new(args.eps_start, args.epsilon, branch_seed(p0.dim(), args.seed_branch))
    };
    let options = ContinuationOptions {
        shoot: ShootOptions { grid: args.grid, ..ShootOptions::default() },
        record_every: 0,
        ..ContinuationOptions::default()
    };
    let report = continue_epsilon(&p0, &p1, args.sigma, &plan, &options)?;
    let last = report.last();
    let path = last.path.as_ref().expect("last step keeps its path");
    save_path_csv(&args.out, path, args.with_a)?;

    let omt = sample(&PathModel::Omt(OmtModel::between(&p0, &p1, args.sigma)?), args.grid)?;
    let offdiag = covariance_near(path, 0.5).as_mat()[(0, 1)];
    let summary = json!({
        "branch": match args.seed_branch { Branch::Pos => "pos", Branch::Neg => "neg" },
        "epsilon": last.epsilon,
        "completed": report.completed(),
        "offdiag_half": offdiag,
        "offdiag_half_sign": if offdiag > 0.0 { 1 } else if offdiag < 0.0 { -1 } else { 0 },
        "max_residual": report.steps.iter().map(|s| s.residual).fold(0.0, f64::max),
        "max_pi0_jump": report.max_pi0_jump,
        "sup_distance_to_omt": path.sup_distance(&omt)?,
        "steps": report.steps.iter().map(|s| json!({
            "epsilon": s.epsilon,
            "residual": s.residual,
            "iterations": s.iterations,
        })).collect::<Vec<_>>(),
    });
    println!("{}", serde_json::to_string_pretty(&summary).expect("serializable"));
    match &report.stopped {
        None => Ok(()),
        Some(stop) => {
            Err(CliError::Solver(format!("continuation stopped at epsilon = {}: {}", stop.epsilon, stop.error)))
        }
    }
}

/// Analytic path on the time-step grid `k/N`, with system matrices.
fn tabulated_policy(
    args: &SimulateArgs,
    p0: &SpdMatrix,
    p1: &SpdMatrix,
    steps: usize,
) -> Result<CovariancePath, CliError> {
    let grid = steps + 1;
    let path = match args.policy {
        Policy::Omt => unreachable!("transport policy is evaluated in closed form"),
        Policy::Fr if p0.dim() == 1 => scalar_fr_path(p0.as_mat()[(0, 0)], p1.as_mat()[(0, 0)], args.sigma, grid)?.1,
        Policy::Fr | Policy::Wls => {
            let family = match args.policy {
                Policy::Fr => Family::FisherRao,
                _ => Family::Wls { epsilon: args.epsilon },
            };
            let problem = BoundaryProblem::new(p0.clone(), p1.clone(), args.sigma, family)?;
            let options = ShootOptions { grid, ..ShootOptions::default() };
            shoot(&problem, &options).map_err(|e| CliError::Solver(e.to_string()))?.path
        }
    };
    if path.system_matrices.is_none() {
        return Err(CliError::Solver("policy path has no system matrices".into()));
    }
    Ok(path)
}

pub fn cmd_simulate(args: &SimulateArgs) -> Result<(), CliError> {
    check_sigma(args.sigma)?;
    let (p0, p1) = endpoints(&args.p0, &args.p1)?;
    let times = parse_list(&args.times)?;
    if !(args.dt > 0.0 && args.dt <= covpath_core::montecarlo::MAX_DT) {
        return Err(CliError::Invalid("dt must lie in (0, 0.01]".into()));
    }
    let steps = (1.0 / args.dt - 1e-9).ceil() as usize;
    let h = 1.0 / steps as f64;

    let (empirical, analytic) = if args.policy == Policy::Omt {
        let model = OmtModel::between(&p0, &p1, args.sigma)?;
        let policy = |t: f64| path_at(&model, t).map(|(_, a)| a);
        let spec = ensemble(args, &p0, &policy);
        let empirical = parallel::simulate_ensemble(&spec, &times)?;
        let analytic = sample_at(&PathModel::Omt(model.clone()), &times, &Default::default())?.covariances;
        (empirical, analytic)
    } else {
        let table = tabulated_policy(args, &p0, &p1, steps)?;
        let system = table.system_matrices.as_ref().expect("checked");
        let index = |t: f64| ((t / h).round() as usize).min(steps);
        let policy = |t: f64| Ok::<SquareMatrix, _>(system[index(t)].clone());
        let spec = ensemble(args, &p0, &policy);
        let plan = SimulationPlan::new(&spec, &times)?;
        let empirical = parallel::simulate_plan(&plan)?;
        let analytic = times.iter().map(|&t| table.covariances[index(t)].clone()).collect();
        (empirical, analytic)
    };
    let discrepancy = covariance_discrepancy(&empirical, &analytic)?;
    write_simulation(&args.out, &times, &empirical, &analytic, &discrepancy)
}

fn ensemble<'a>(
    args: &SimulateArgs,
    p0: &SpdMatrix,
    policy: &'a dyn Fn(f64) -> covpath_core::Result<SquareMatrix>,
) -> EnsembleSpec<'a> {
    EnsembleSpec { policy, sigma: args.sigma, p0: p0.clone(), trajectories: args.traj, dt: args.dt, seed: args.seed }
}

fn write_simulation(
    out: &Path,
    times: &[f64],
    empirical: &[SymMatrix],
    analytic: &[SpdMatrix],
    discrepancy: &[f64],
) -> Result<(), CliError> {
    let n = analytic.first().map_or(1, |p| p.dim());
    let mut header = vec!["t".to_string()];
    for prefix in ["empirical", "analytic"] {
        for i in 0..n {
            for j in i..n {
                header.push(format!("{prefix}_{i}_{j}"));
            }
        }
    }
    header.push("discrepancy".into());
    let mut w = csv::Writer::from_writer(create(out)?);
    w.write_record(&header).map_err(io_err)?;
    for k in 0..times.len() {
        let mut row = vec![fmt_f64(times[k])];
        row.extend(empirical[k].to_upper().into_iter().map(fmt_f64));
        row.extend(analytic[k].to_upper().into_iter().map(fmt_f64));
        row.push(fmt_f64(discrepancy[k]));
        w.write_record(&row).map_err(io_err)?;
    }
    w.flush().map_err(io_err)
}

pub fn load_dataset(path: &Path) -> Result<FitDataset, CliError> {
    let file = MatrixFile::read(path)?;
    let times = file
        .matrices
        .iter()
        .enumerate()
        .map(|(k, m)| m.t.ok_or_else(|| CliError::Parse(format!("data entry {k} has no time"))))
        .collect::<Result<Vec<_>, _>>()?;
    FitDataset::new(times, file.symmetric_matrices(), file.samples_per_cov).map_err(CliError::from)
}

fn params_file(family: FamilyArg, epsilon: f64, params: &FitParams) -> ParamsFile {
    ParamsFile {
        family: family.name().into(),
        dim: params.dim(),
        p0: row_major(params.p0().as_mat()),
        pi0: row_major(params.pi0().as_mat()),
        sigma: params.sigma(),
        epsilon: (family == FamilyArg::Wls).then_some(epsilon),
        objective: None,
        normalized_error: None,
    }
}

pub fn cmd_fit(args: &FitArgs) -> Result<(), CliError> {
    check_grid(args.grid)?;
    if args.starts == 0 {
        return Err(CliError::Invalid("at least one start is required".into()));
    }
    let dataset = load_dataset(&args.data)?;
    let spec = FitModelSpec::new(args.family.fit_family(args.epsilon), dataset.dim())?;
    let options = FitOptions { starts: args.starts, seed: args.seed, ..FitOptions::default() };
    let result = parallel::fit_model(&dataset, &spec, &options)?;
    let model = spec.model(&result.params)?;
    let path = sample_at(&model, &uniform_grid(args.grid), &options.ivp)?;
    save_path_csv(&args.out, &path, false)?;

    let mut params = params_file(args.family, args.epsilon, &result.params);
    params.objective = Some(result.objective);
    params.normalized_error = Some(result.normalized_error);
    let text = serde_json::to_string_pretty(&params).expect("serializable");
    if let Some(p) = &args.params_out {
        fs::write(p, format!("{text}\n")).map_err(|e| CliError::Io(format!("{}: {e}", p.display())))?;
    }
    println!("{text}");
    Ok(())
}

pub fn cmd_synth(args: &SynthArgs) -> Result<(), CliError> {
    let file = ParamsFile::read(&args.params)?;
    check_sigma(file.sigma)?;
    let epsilon = file.epsilon.unwrap_or(DEFAULT_WLS_EPSILON);
    let spec = FitModelSpec::new(args.family.fit_family(epsilon), file.dim)?;
    let params = FitParams::new(file.p0()?, file.pi0(), file.sigma)?;
    let model = spec.model(&params)?;
    let times = parse_list(&args.times)?;
    let dataset = generate_synthetic(&model, &times, args.n, args.seed)?;
    let mats: Vec<_> = dataset.samples.iter().map(|s| s.as_mat()).collect();
    let mut out = MatrixFile::from_matrices(dataset.dim(), Some(&dataset.times), &mats);
    out.samples_per_cov = dataset.samples_per_cov;
    out.write(&args.out)
}

pub fn cmd_ellipse(args: &EllipseArgs) -> Result<(), CliError> {
    let text = fs::read_to_string(&args.path).map_err(|e| CliError::Parse(format!("{}: {e}", args.path.display())))?;
    let path = read_path_csv(&text)?;
    if path.dim() != 2 {
        return Err(CliError::Unsupported(format!("ellipses need a 2x2 path, got {0}x{0}", path.dim())));
    }
    if !(args.r > 0.0 && args.r.is_finite()) || args.points == 0 {
        return Err(CliError::Invalid("r must be positive and points non-zero".into()));
    }
    let mut w = csv::Writer::from_writer(create(&args.out)?);
    w.write_record(["t", "k", "x", "y"]).map_err(io_err)?;
    for (&t, p) in path.times.iter().zip(&path.covariances) {
        for (k, x) in ellipse_points(p, args.r, args.points).into_iter().enumerate() {
            w.write_record([fmt_f64(t), k.to_string(), fmt_f64(x[0]), fmt_f64(x[1])]).map_err(io_err)?;
        }
    }
    w.flush().map_err(io_err)
}

fn create(path: &Path) -> Result<BufWriter<fs::File>, CliError> {
    fs::File::create(path).map(BufWriter::new).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))
}

fn io_err<E: std::fmt::Display>(e: E) -> CliError {
    CliError::Io(e.to_string())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cli_definition_is_consistent() {
        use clap::CommandFactory;
        Cli::command().debug_assert();
    }

    #[test]
    fn branch_seeds_mirror() {
        let pos = branch_seed(2, Branch::Pos);
        let neg = branch_seed(2, Branch::Neg);
        assert_eq!(pos.as_mat()[(0, 1)], std::f64::consts::PI / 700.0);
        assert_eq!(pos.as_mat() + neg.as_mat(), SymMatrix::zeros(2).into_mat());
    }

    #[test]
    fn scalar_descriptions() {
        let form = scalar_solve(6.0, 25.0, 4.0).unwrap();
        assert_eq!(describe_scalar(&form)["family"], "exponential");
        let form = scalar_solve(6.0, 10.0, 4.0).unwrap();
        assert_eq!(describe_scalar(&form)["family"], "trigonometric");
    }
}
