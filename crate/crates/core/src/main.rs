use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use fvmbem::experiments::{run_convergence, run_snapshots, selftest, write_csv, DEFAULT_SNAPSHOT_TIMES};
use fvmbem::fvm::UpwindScheme;
use fvmbem::problems::{problem_by_name, Config, ProblemSpec};
use fvmbem::time::Method;
use fvmbem::{Error, Result};

#[derive(Parser)]
#[command(name = "fvmbem", version, about = "Finite volume / boundary element coupling experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// tanh, lshape or transport
    problem: String,
    /// key = value file overriding coefficients and grid parameters
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    method: Option<Method>,
    /// none, full or steerable
    #[arg(long)]
    upwind: Option<UpwindScheme>,
}

#[derive(Subcommand)]
enum Command {
    /// Convergence study on uniformly refined meshes and time grids.
    Converge {
        #[command(flatten)]
        common: Common,
        /// number of levels (config key `levels`, default 5)
        #[arg(long)]
        levels: Option<usize>,
        /// CSV output file (config key `output`; stdout if omitted)
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Nodal solution snapshots as legacy VTK files.
    Snapshots {
        #[command(flatten)]
        common: Common,
        #[arg(long, num_args = 1.., value_delimiter = ',')]
        times: Option<Vec<f64>>,
        #[arg(long, default_value_t = 0)]
        level: usize,
        #[arg(long, default_value = "snapshots")]
        out: PathBuf,
    },
    /// Quick oracle checks.
    Selftest,
}

fn load_problem(common: &Common) -> Result<(ProblemSpec, Config)> {
    let cfg = match &common.config {
        Some(path) => {
            let text = std::fs::read_to_string(path).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
            Config::parse(&text)?
        }
        None => Config::default(),
    };
    let mut p = problem_by_name(&common.problem, &cfg)?;
    if let Some(m) = common.method {
        p.method = m;
    }
    if let Some(s) = common.upwind {
        p.scheme = s;
    }
    Ok((p, cfg))
}

fn execute(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Converge { common, levels, out } => {
            let (p, cfg) = load_problem(&common)?;
            let levels = match levels {
                Some(l) => l,
                None => cfg.get_usize("levels", 5)?,
            };
            let out = out.or_else(|| cfg.get_str("output").map(PathBuf::from));
            let report = run_convergence(&p, levels, p.method)?;
            match out {
                Some(path) => write_csv(&report, &path)?,
                None => print!("{}", report.to_csv()),
            }
            if let Some(eoc) = report.finest_eoc() {
                eprintln!("{}: EOC of e_V + e_H at the finest level = {eoc:.4}", p.name);
            }
        }
        Command::Snapshots { common, times, level, out } => {
            let (p, _) = load_problem(&common)?;
            let times = times.unwrap_or_else(|| DEFAULT_SNAPSHOT_TIMES.to_vec());
            for s in run_snapshots(&p, level, &times, Some(&out))? {
                let max = s.values.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
                println!("t = {:.6} (knot {:.6}): max u = {max:.6e} -> {}", s.time, s.knot_time, s.path.unwrap().display());
            }
        }
        Command::Selftest => {
            let results = selftest();
            let mut failed = 0;
            for r in &results {
                println!("[{}] {}: {}", if r.passed { "PASS" } else { "FAIL" }, r.name, r.detail);
                failed += usize::from(!r.passed);
            }
            if failed > 0 {
                return Err(Error::Undefined(format!("{failed} self test(s) failed")));
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 1 } else { 0 });
        }
    };
    match execute(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
