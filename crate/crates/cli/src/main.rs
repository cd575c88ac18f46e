use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde::Serialize;

use recert::cache::{read_cache, write_cache};
use recert::harness::{self, aoc_speedup, AocSpeedup, Experiment, ExperimentConfig, Format};
use recert::planner::{sample_curve, ErrorMeasure};
use recert::stats::BoundMethod;
use recert::{CacheHeader, CacheRecord, Error};

#[derive(Parser)]
#[command(name = "recert", version, about = "Randomized-smoothing certification and incremental recertification")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Certify the original classifier on every input and write the cache.
    Certify(RunArgs),
    /// Recertify the approximated classifier from the cache.
    Recertify {
        #[command(flatten)]
        run: RunArgs,
        /// Samples per input; defaults to the first n_p fraction of n.
        #[arg(long)]
        np: Option<usize>,
    },
    /// Sweep n_p and compare IRS with from-scratch certification.
    Compare(RunArgs),
    /// Estimate the disagreement bound for each cached input.
    Zeta(RunArgs),
    /// Sweep the reuse threshold gamma.
    GammaSweep {
        #[command(flatten)]
        run: RunArgs,
        #[arg(long, value_delimiter = ',')]
        gammas: Option<Vec<f64>>,
    },
    /// Samples an interval method needs to reach a target error.
    Plan {
        #[arg(long, default_value = "clopper-pearson")]
        method: BoundMethod,
        #[arg(long, default_value_t = 0.001)]
        alpha: f64,
        #[arg(long, value_delimiter = ',', default_value = "0.01")]
        chi: Vec<f64>,
        /// Proportions to plan for.
        #[arg(long, value_delimiter = ',', default_value = "0.01,0.1,0.5,0.9,0.99")]
        p: Vec<f64>,
        #[arg(long, default_value = "width")]
        measure: ErrorMeasure,
        #[command(flatten)]
        output: OutputArgs,
    },
}

#[derive(Args)]
struct OutputArgs {
    /// Output file; stdout when absent.
    #[arg(long)]
    out: Option<PathBuf>,
    /// JSON lines instead of CSV.
    #[arg(long)]
    json: bool,
}

#[derive(Args)]
struct RunArgs {
    #[arg(long)]
    config: PathBuf,
    #[arg(long)]
    cache: PathBuf,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    sigma: Option<f64>,
    #[arg(long)]
    n0: Option<usize>,
    #[arg(long)]
    n: Option<usize>,
    #[arg(long)]
    alpha: Option<f64>,
    #[arg(long)]
    alpha_zeta: Option<f64>,
    #[arg(long)]
    gamma: Option<f64>,
    #[arg(long, value_delimiter = ',')]
    np_fractions: Option<Vec<f64>>,
    #[arg(long)]
    repetitions: Option<usize>,
    /// Worker threads; 0 means one per core.
    #[arg(long)]
    workers: Option<usize>,
    /// Timestamp recorded in a new cache header.
    #[arg(long)]
    created_unix: Option<u64>,
    #[command(flatten)]
    output: OutputArgs,
}

impl RunArgs {
    fn experiment(&self) -> Result<Experiment, Error> {
        let mut c = ExperimentConfig::load(&self.config)?;
        macro_rules! set {
            ($($f:ident),*) => { $( if let Some(v) = self.$f.clone() { c.$f = v; } )* };
        }
        set!(seed, sigma, n0, n, alpha, alpha_zeta, gamma, np_fractions, repetitions, workers);
        if self.created_unix.is_some() {
            c.created_unix = self.created_unix;
        }
        c.build()
    }

    fn cache(&self) -> Result<(CacheHeader, Vec<CacheRecord>), Error> {
        if !self.cache.exists() {
            return Err(Error::Config(format!(
                "no cache at {}; run `recert certify --config {} --cache {}` first",
                self.cache.display(),
                self.config.display(),
                self.cache.display()
            )));
        }
        read_cache(&self.cache)
    }
}

fn emit<T: Serialize>(rows: &[T], output: &OutputArgs) -> Result<(), Error> {
    let format = if output.json { Format::JsonLines } else { Format::Csv };
    match &output.out {
        Some(path) => {
            let file = File::create(path).map_err(|e| Error::Io {
                path: path.clone(),
                source: e,
            })?;
            harness::write_rows(BufWriter::new(file), rows, format)
        }
        None => harness::write_rows(io::stdout().lock(), rows, format),
    }
}

fn note(msg: &str) {
    let _ = writeln!(io::stderr(), "{msg}");
}

fn run(cli: Cli) -> Result<(), Error> {
    match cli.command {
        Command::Certify(args) => {
            let exp = args.experiment()?;
            let run = harness::run_certify(&exp)?;
            write_cache(&args.cache, &run.header, &run.records)?;
            let failed = run.rows.iter().filter(|r| r.is_error()).count();
            note(&format!(
                "certified {} inputs ({failed} failed); cache written to {}",
                run.rows.len(),
                args.cache.display()
            ));
            emit(&run.rows, &args.output)?;
            if failed > 0 {
                return Err(Error::Config(format!("{failed} inputs failed; see the error rows")));
            }
            Ok(())
        }
        Command::Recertify { run, np } => {
            let exp = run.experiment()?;
            let (header, records) = run.cache()?;
            let n_p = np.unwrap_or_else(|| exp.config.n_p_for(exp.config.np_fractions[0]));
            let rows = harness::run_recertify(&exp, &header, &records, n_p)?;
            emit(&rows, &run.output)
        }
        Command::Compare(args) => {
            let exp = args.experiment()?;
            let (header, records) = args.cache()?;
            let rows = harness::run_compare(&exp, &header, &records)?;
            emit(&rows, &args.output)?;
            if rows.len() >= 2 {
                match aoc_speedup(&rows)? {
                    AocSpeedup::Speedup { value } => note(&format!("aoc speedup: {value:.4}")),
                    AocSpeedup::Incomparable => {
                        note("aoc speedup: incomparable (ACR ranges do not overlap)")
                    }
                }
            }
            Ok(())
        }
        Command::Zeta(args) => {
            let exp = args.experiment()?;
            let (header, records) = args.cache()?;
            emit(&harness::run_zeta(&exp, &header, &records)?, &args.output)
        }
        Command::GammaSweep { run, gammas } => {
            let mut exp = run.experiment()?;
            if let Some(g) = gammas {
                exp.config.gammas = g;
                exp.config.validate()?;
            }
            let (header, records) = run.cache()?;
            emit(&harness::run_gamma_sweep(&exp, &header, &records)?, &run.output)
        }
        Command::Plan {
            method,
            alpha,
            chi,
            p,
            measure,
            output,
        } => emit(&sample_curve(method, &chi, alpha, &p, measure)?, &output),
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            note(&format!("error: {e}"));
            if let Error::Io { path, .. } = &e {
                if Path::new(path).extension().is_some_and(|x| x == "irsc") {
                    note("the cache may be missing or unreadable; rerun `recert certify`");
                }
            }
            ExitCode::FAILURE
        }
    }
}
