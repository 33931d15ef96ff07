use std::fs::{self, File};
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use pdfactor::io::{
    chain_to_json, matrix_to_json, parse_chain_json, parse_matrix_json, parse_particles_csv,
    write_sweep_csv,
};
use pdfactor::{
    factor_matrix, flowsim, phi_sweep, segments_from_chain, simulate, transition_matrix, verify,
    Error, FactorOptions,
};

const EXIT_INVALID: u8 = 1;
const EXIT_NUMERICAL: u8 = 2;
const EXIT_VERIFY_FAILED: u8 = 3;

/// Factor matrices with positive determinant into products of SPD matrices.
#[derive(Parser)]
#[command(name = "pdfactor", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Factor a matrix file into an SPD chain and verify it.
    Factor(FactorArgs),
    /// Tabulate the net rotation angle of the k-factor scheme over θ.
    Sweep(SweepArgs),
    /// Check a chain file against a target matrix.
    Verify(VerifyArgs),
    /// Simulate the piecewise gradient flow realizing a chain.
    Simulate(SimulateArgs),
}

#[derive(Args)]
struct FactorArgs {
    /// Matrix JSON file: {"n": .., "data": [..]}.
    input: PathBuf,
    /// Factors per planar rotation.
    #[arg(long = "factors", default_value_t = 5)]
    k: usize,
    /// Largest condition parameter λ the planner may use.
    #[arg(long = "max-cond", default_value_t = 1000.0)]
    max_cond: f64,
    #[arg(long, default_value_t = 1e-8)]
    tol: f64,
    /// Where to write the chain JSON.
    #[arg(long, short)]
    output: PathBuf,
}

#[derive(Args)]
struct SweepArgs {
    #[arg(long, default_value_t = 3)]
    k: usize,
    /// Comma-separated λ values.
    #[arg(long, value_delimiter = ',', required = true)]
    lambda: Vec<f64>,
    /// Upper end of the θ grid in degrees.
    #[arg(long = "theta-max", default_value_t = 90.0)]
    theta_max: f64,
    #[arg(long, default_value_t = 900)]
    steps: usize,
    /// CSV destination; stdout when omitted.
    #[arg(long, short)]
    output: Option<PathBuf>,
}

#[derive(Args)]
struct VerifyArgs {
    #[arg(long)]
    chain: PathBuf,
    #[arg(long)]
    target: PathBuf,
    #[arg(long, default_value_t = 1e-8)]
    tol: f64,
}

#[derive(Args)]
struct SimulateArgs {
    #[arg(long)]
    chain: PathBuf,
    /// Particle CSV with columns x1..xn.
    #[arg(long)]
    particles: PathBuf,
    #[arg(long, default_value_t = 1e-3)]
    dt: f64,
    /// Comma-separated segment durations; 1 for every factor when omitted.
    #[arg(long, value_delimiter = ',')]
    durations: Option<Vec<f64>>,
    /// Writes <prefix>_trajectory.csv and <prefix>_covariance.csv.
    #[arg(long = "out-prefix")]
    out_prefix: PathBuf,
}

struct Failure {
    code: u8,
    message: String,
}

impl Failure {
    fn invalid(message: impl Into<String>) -> Self {
        Failure {
            code: EXIT_INVALID,
            message: message.into(),
        }
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let code = match e {
            Error::NumericalFailure(_)
            | Error::TargetUnreachable { .. }
            | Error::NotARotation { .. } => EXIT_NUMERICAL,
            _ => EXIT_INVALID,
        };
        Failure {
            code,
            message: e.to_string(),
        }
    }
}

type CmdResult = std::result::Result<u8, Failure>;

fn read(path: &Path) -> std::result::Result<String, Failure> {
    fs::read_to_string(path).map_err(|e| Failure::invalid(format!("{}: {e}", path.display())))
}

fn io_failure(path: &Path, e: io::Error) -> Failure {
    Failure::invalid(format!("{}: {e}", path.display()))
}

fn write_file(path: &Path, f: impl FnOnce(&mut BufWriter<File>) -> io::Result<()>) -> CmdResult {
    let file = File::create(path).map_err(|e| io_failure(path, e))?;
    let mut w = BufWriter::new(file);
    f(&mut w)
        .and_then(|_| w.flush())
        .map_err(|e| io_failure(path, e))?;
    Ok(0)
}

fn print_json<T: serde::Serialize>(value: &T) {
    let text = serde_json::to_string_pretty(value).expect("report serializes");
    let _ = writeln!(io::stdout(), "{text}");
}

fn verdict(pass: bool) -> u8 {
    if pass {
        0
    } else {
        EXIT_VERIFY_FAILED
    }
}

fn cmd_factor(a: FactorArgs) -> CmdResult {
    let phi = parse_matrix_json(&read(&a.input)?)?;
    let opts = FactorOptions {
        k_rotation: a.k,
        lambda_budget: a.max_cond,
        tol_verify: a.tol,
    };
    opts.validate()?;
    let chain = factor_matrix(&phi, &opts)?;
    let text = chain_to_json(&chain);
    write_file(&a.output, |w| writeln!(w, "{text}"))?;
    let report = verify(&chain, &phi, a.tol)?;
    print_json(&report);
    Ok(verdict(report.pass))
}

fn cmd_sweep(a: SweepArgs) -> CmdResult {
    if !a.theta_max.is_finite() || a.theta_max <= 0.0 {
        return Err(Failure::invalid("--theta-max must be positive"));
    }
    let mut tables = Vec::with_capacity(a.lambda.len());
    for &lambda in &a.lambda {
        tables.push(phi_sweep(lambda, a.k, a.theta_max.to_radians(), a.steps)?);
    }
    match &a.output {
        Some(path) => write_file(path, |w| write_sweep_csv(&tables, w)),
        None => {
            let stdout = io::stdout();
            write_sweep_csv(&tables, stdout.lock()).map_err(|e| Failure::invalid(e.to_string()))?;
            Ok(0)
        }
    }
}

fn cmd_verify(a: VerifyArgs) -> CmdResult {
    let chain = parse_chain_json(&read(&a.chain)?)?;
    let target = parse_matrix_json(&read(&a.target)?)?;
    if !a.tol.is_finite() || a.tol < 0.0 {
        return Err(Failure::invalid("--tol must be non-negative"));
    }
    let report = verify(&chain, &target, a.tol)?;
    print_json(&report);
    Ok(verdict(report.pass))
}

fn cmd_simulate(a: SimulateArgs) -> CmdResult {
    let chain = parse_chain_json(&read(&a.chain)?)?;
    let cloud = parse_particles_csv(&read(&a.particles)?)?;
    let durations = a.durations.unwrap_or_else(|| vec![1.0; chain.len()]);
    let segments = segments_from_chain(&chain, &durations)?;
    let traj = simulate(&segments, &cloud, a.dt)?;

    let prefix = a.out_prefix.to_string_lossy().into_owned();
    let traj_path = PathBuf::from(format!("{prefix}_trajectory.csv"));
    let cov_path = PathBuf::from(format!("{prefix}_covariance.csv"));
    write_file(&traj_path, |w| flowsim::write_trajectory_csv(&traj, w))?;
    write_file(&cov_path, |w| flowsim::write_covariance_csv(&traj, w))?;
    let _ = writeln!(
        io::stdout(),
        "{}",
        matrix_to_json(&transition_matrix(&segments)?)
    );
    Ok(0)
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { EXIT_INVALID } else { 0 });
        }
    };
    let result = match cli.command {
        Command::Factor(a) => cmd_factor(a),
        Command::Sweep(a) => cmd_sweep(a),
        Command::Verify(a) => cmd_verify(a),
        Command::Simulate(a) => cmd_simulate(a),
    };
    match result {
        Ok(code) => ExitCode::from(code),
        Err(f) => {
            eprintln!("error: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}
