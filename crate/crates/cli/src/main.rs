use std::fs::File;
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use fenelab::ball::{write_basis, BallBasis};
use fenelab::config::RunConfig;
use fenelab::coupled::{read_checkpoint, write_checkpoint, CoupledModel, Switches};
use fenelab::decay::{Bands, DecayReport, DEFAULT_T_TRANSIENT};
use fenelab::flow::{write_snapshot, FlowGrid};
use fenelab::initial::make_initial_data;
use fenelab::series::{read_series, write_series};
use fenelab::{FeneError, FeneParams};

const EXIT_USAGE: u8 = 1;
const EXIT_CONFIG: u8 = 2;
const EXIT_NUMERICAL: u8 = 3;

#[derive(Parser)]
#[command(name = "fenelab", version, about = "Micro-macro FENE dumbbell simulator near equilibrium")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the coupled system described by a config file.
    Run {
        #[arg(long)]
        config: PathBuf,
        /// Continue from a checkpoint instead of generating initial data.
        #[arg(long)]
        restart: Option<PathBuf>,
    },
    /// Sweep the linearized single-wavenumber system.
    LinearModes {
        #[arg(long, default_value_t = 2.0)]
        k: f64,
        #[arg(long, default_value_t = 2)]
        d: usize,
        #[arg(long, default_value_t = 8)]
        degree: usize,
        /// Wavevector magnitudes, taken along the first axis.
        #[arg(long, value_delimiter = ',', default_value = "0.125,0.25,0.5,1")]
        xi: Vec<f64>,
        #[arg(long, default_value_t = 100)]
        trials: usize,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        #[arg(long, default_value_t = 4.0)]
        t_end: f64,
        #[arg(long, default_value_t = 0.05)]
        dt: f64,
        /// Write the JSON report here instead of stdout.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Spectral gap and Poincaré constant against basis degree.
    Poincare {
        #[arg(long, default_value_t = 2.0)]
        k: f64,
        #[arg(long, default_value_t = 2)]
        d: usize,
        #[arg(long, value_delimiter = ',', default_value = "8,12,16")]
        degrees: Vec<usize>,
    },
    /// Linear heat flow from the same initial velocity as `run`.
    HeatRef {
        #[arg(long)]
        config: PathBuf,
    },
    /// Fit decay exponents to a stored series.
    Fit {
        #[arg(long)]
        series: PathBuf,
        #[arg(long, default_value_t = 2)]
        d: usize,
        /// Box length of the run; sets the saturation time.
        #[arg(long, default_value_t = 64.0 * std::f64::consts::PI)]
        length: f64,
        #[arg(long, default_value_t = DEFAULT_T_TRANSIENT)]
        t1: f64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run the invariant suite; nonzero exit on any failure.
    Verify,
}

/// Failure carrying its exit status.
struct Failure {
    code: u8,
    msg: String,
}

impl From<FeneError> for Failure {
    fn from(e: FeneError) -> Self {
        let code = match e {
            FeneError::Config(_) | FeneError::Io(_) | FeneError::Format(_) | FeneError::InvalidParameter(_) => {
                EXIT_CONFIG
            }
            _ => EXIT_NUMERICAL,
        };
        Self { code, msg: e.to_string() }
    }
}

type CliResult = std::result::Result<(), Failure>;

fn create(path: &Path) -> std::result::Result<BufWriter<File>, Failure> {
    File::create(path)
        .map(BufWriter::new)
        .map_err(|e| Failure { code: EXIT_CONFIG, msg: format!("cannot write {}: {e}", path.display()) })
}

fn open(path: &Path) -> std::result::Result<BufReader<File>, Failure> {
    File::open(path)
        .map(BufReader::new)
        .map_err(|e| Failure { code: EXIT_CONFIG, msg: format!("cannot read {}: {e}", path.display()) })
}

fn write_json(path: Option<&Path>, value: &impl serde::Serialize) -> CliResult {
    let text = serde_json::to_string_pretty(value)
        .map_err(|e| Failure { code: EXIT_NUMERICAL, msg: e.to_string() })?;
    match path {
        Some(p) => {
            let mut w = create(p)?;
            writeln!(w, "{text}").map_err(|e| Failure::from(FeneError::from(e)))?;
        }
        None => println!("{text}"),
    }
    Ok(())
}

fn with_pool<T>(threads: usize, f: impl FnOnce() -> T + Send) -> std::result::Result<T, Failure>
where
    T: Send,
{
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .map_err(|e| Failure { code: EXIT_CONFIG, msg: e.to_string() })?;
    Ok(pool.install(f))
}

fn simulate(cfg: &RunConfig, switches: Switches, restart: Option<&Path>, prefix: &str) -> CliResult {
    let out_dir = &cfg.output.dir;
    std::fs::create_dir_all(out_dir).map_err(FeneError::from)?;
    let grid = FlowGrid::new(cfg.grid.n, cfg.grid.length)?;
    let basis = BallBasis::build(cfg.params()?, cfg.basis.degree_max, cfg.basis.quad_order)?;
    write_basis(&mut create(&out_dir.join("basis.fbas"))?, &basis)?;
    std::fs::write(out_dir.join(format!("{prefix}config.toml")), cfg.to_toml_string()?).map_err(FeneError::from)?;
    let init = match restart {
        Some(p) => {
            let (g, st) = read_checkpoint(&mut open(p)?)?;
            if g != grid || st.num_coeffs() != basis.len() {
                return Err(FeneError::Config("checkpoint does not match the configured grid and basis".into()).into());
            }
            st
        }
        None => make_initial_data(&grid, &basis, &cfg.initial)?,
    };
    let model = CoupledModel::new(grid.clone(), basis, switches)?;
    let opts = cfg.run_options();
    let out = with_pool(cfg.output.threads, || {
        model.run(init, &opts, |st| {
            let path = out_dir.join(format!("{prefix}step{:08}.ckp", st.step));
            let mut w = BufWriter::new(File::create(path)?);
            write_checkpoint(&mut w, &grid, st)?;
            w.flush()?;
            Ok(())
        })
    })??;
    write_series(create(&out_dir.join(format!("{prefix}series.csv")))?, &opts.c_d, &opts.lp, &out.series)?;
    write_json(Some(&out_dir.join(format!("{prefix}ledger.json"))), &out.ledger)?;
    write_snapshot(&mut create(&out_dir.join(format!("{prefix}final.fld")))?, &grid, &out.state.u)?;
    let last = out.ledger.rows.last();
    println!(
        "{} steps to t = {:.4}; E = {:.6e}; max cancel ratio {:.2e}; max energy growth {:.2e}",
        out.state.step,
        out.state.t,
        last.map(|r| r.energy()).unwrap_or(0.0),
        out.ledger.max_cancel_ratio(),
        out.ledger.max_energy_growth()
    );
    Ok(())
}

fn execute(cli: Cli) -> CliResult {
    match cli.command {
        Command::Run { config, restart } => {
            let cfg = RunConfig::load(&config)?;
            simulate(&cfg, cfg.switches(), restart.as_deref(), "")
        }
        Command::HeatRef { config } => {
            let cfg = RunConfig::load(&config)?;
            simulate(&cfg, Switches::decoupled(), None, "heat_")
        }
        Command::LinearModes { k, d, degree, xi, trials, seed, t_end, dt, out } => {
            let basis = BallBasis::build(FeneParams::ball(k, d)?, degree, degree + 4)?;
            let xis: Vec<Vec<f64>> = xi
                .iter()
                .map(|&r| {
                    let mut v = vec![0.0; d];
                    v[0] = r;
                    v
                })
                .collect();
            let report = fenelab::modes::sweep(&basis, &xis, trials, seed, t_end, dt)?;
            write_json(out.as_deref(), &report)
        }
        Command::Poincare { k, d, degrees } => {
            println!("{:>6} {:>6} {:>16} {:>16}", "degree", "size", "lambda1", "C");
            for n in degrees {
                let basis = BallBasis::build(FeneParams::ball(k, d)?, n, n + 4)?;
                let pc = basis.poincare_constant()?;
                println!("{:>6} {:>6} {:>16.10} {:>16.10}", n, basis.len(), pc.lambda1, pc.c_poincare);
            }
            Ok(())
        }
        Command::Fit { series, d, length, t1, out } => {
            let tab = read_series(open(&series)?)?;
            let report = DecayReport::from_series(&tab, d, length, t1, Bands::default())?;
            eprint!("{}", report.to_table());
            write_json(out.as_deref(), &report)
        }
        Command::Verify => {
            let rep = fenelab::verify::run_all();
            for line in rep.lines() {
                println!("{line}");
            }
            if rep.all_pass() {
                Ok(())
            } else {
                Err(Failure { code: EXIT_NUMERICAL, msg: "invariant suite failed".into() })
            }
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match execute(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {}", f.msg);
            ExitCode::from(f.code)
        }
    }
}
