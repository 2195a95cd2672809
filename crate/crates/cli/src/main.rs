use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use num_complex::Complex64;

use fracsource::error::FracError;
use fracsource::scenario::{
    exit_code_for, load_scenario, parse_scenario, run_experiment, Experiment, RunManifest,
    Scenario, EXIT_OK,
};
use fracsource::special::{mittag_leffler, MlParams};
use fracsource::suites::{run_verify, Suite};

#[derive(Parser)]
#[command(
    name = "fracsource",
    version,
    about = "Forward solves and inverse-source experiments for time-fractional evolution equations"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(clap::Args)]
struct RunArgs {
    /// Scenario file (TOML).
    #[arg(long)]
    scenario: PathBuf,
    /// Output directory.
    #[arg(long, default_value = "fracsource-out")]
    out: PathBuf,
    /// Overrides the scenario seed.
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Clone, Copy, ValueEnum)]
enum SuiteArg {
    Titchmarsh,
    WeakSolution,
    Operators,
    Theorems,
}

impl From<SuiteArg> for Suite {
    fn from(s: SuiteArg) -> Self {
        match s {
            SuiteArg::Titchmarsh => Suite::Titchmarsh,
            SuiteArg::WeakSolution => Suite::WeakSolution,
            SuiteArg::Operators => Suite::Operators,
            SuiteArg::Theorems => Suite::Theorems,
        }
    }
}

#[derive(Subcommand)]
enum Command {
    /// Solve the forward problem and write the field.
    Forward(RunArgs),
    /// Recover h from interior observations with mu known.
    InvertH(RunArgs),
    /// Recover h and the unknown part of mu.
    InvertMuH(RunArgs),
    /// Run a verification suite.
    Verify {
        #[arg(long, value_enum)]
        suite: SuiteArg,
        /// Scenario file; built-in defaults when absent.
        #[arg(long)]
        scenario: Option<PathBuf>,
        #[arg(long, default_value = "fracsource-out")]
        out: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Evaluate the Mittag-Leffler function E_{alpha,beta}(z).
    MlEval {
        alpha: f64,
        beta: f64,
        /// Real part of z.
        #[arg(allow_hyphen_values = true)]
        z: f64,
        /// Imaginary part of z.
        #[arg(long, default_value_t = 0.0, allow_hyphen_values = true)]
        imag: f64,
    },
}

fn configure_threads() {
    if let Some(n) = std::env::var("FRACSOURCE_THREADS")
        .ok()
        .and_then(|v| v.parse::<usize>().ok())
    {
        // fails only if a pool already exists, which cannot happen here
        let _ = rayon::ThreadPoolBuilder::new()
            .num_threads(n.max(1))
            .build_global();
    }
}

fn fail(err: &FracError) -> ExitCode {
    eprintln!("error: {err}");
    ExitCode::from(exit_code_for(err) as u8)
}

fn report(manifest: &RunManifest, out: &Path) -> ExitCode {
    println!(
        "{}: {} ({})",
        manifest.experiment,
        manifest.status,
        out.display()
    );
    for o in &manifest.outputs {
        println!("  {}  {}", o.sha256, o.file);
    }
    if manifest.exit_code != EXIT_OK {
        eprintln!("{}", manifest.status);
    }
    ExitCode::from(manifest.exit_code as u8)
}

/// Loads a scenario for `experiment`; the experiment in the file is overridden.
fn prepare(args: &RunArgs, experiment: Experiment) -> Result<Scenario, FracError> {
    let text = std::fs::read_to_string(&args.scenario)?;
    let mut sc = parse_scenario(&text)?.with_experiment(experiment);
    if let Some(seed) = args.seed {
        sc.seed = seed;
    }
    sc.validate()?;
    Ok(sc)
}

fn run(args: &RunArgs, experiment: Experiment) -> ExitCode {
    let sc = match prepare(args, experiment) {
        Ok(sc) => sc,
        Err(e) => return fail(&e),
    };
    match run_experiment(&sc, &args.out) {
        Ok(m) => report(&m, &args.out),
        Err(e) => fail(&e),
    }
}

fn main() -> ExitCode {
    configure_threads();
    let cli = Cli::parse();
    match cli.command {
        Command::Forward(a) => run(&a, Experiment::Forward),
        Command::InvertH(a) => run(&a, Experiment::InvertH),
        Command::InvertMuH(a) => run(&a, Experiment::InvertMuH),
        Command::Verify {
            suite,
            scenario,
            out,
            seed,
        } => {
            let sc = match scenario.as_deref().map(load_scenario) {
                None => Ok(Scenario::default()),
                Some(r) => r,
            };
            let mut sc = match sc {
                Ok(sc) => sc,
                Err(e) => return fail(&e),
            };
            if let Some(seed) = seed {
                sc.seed = seed;
            }
            match run_verify(suite.into(), &sc, &out) {
                Ok(m) => report(&m, &out),
                Err(e) => fail(&e),
            }
        }
        Command::MlEval {
            alpha,
            beta,
            z,
            imag,
        } => match mittag_leffler(&MlParams::new(alpha, beta), Complex64::new(z, imag)) {
            Ok(v) => {
                if imag == 0.0 {
                    println!("{:.17e} {:?}", v.value.re, v.regime);
                } else {
                    println!("{:.17e} {:+.17e}i {:?}", v.value.re, v.value.im, v.regime);
                }
                ExitCode::SUCCESS
            }
            Err(e) => fail(&e),
        },
    }
}
