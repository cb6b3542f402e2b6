use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;
use speclab::harness::{self, Command, ConfigFile, OutputFormat, Parameters};
use speclab::riesz::MollifierShape;
use speclab::spectrum::BoundaryCondition;
use speclab::stochastic::NoiseChannel;
use speclab::Error;

/// Spectral numerics laboratory.
///
/// Exit status: 0 when every assertion passes, 1 on assertion failure,
/// 2 on configuration error.
#[derive(Debug, Parser)]
#[command(name = "speclab", version)]
struct Cli {
    #[arg(value_enum)]
    command: Command,
    /// TOML run configuration; flags override its entries.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory.
    #[arg(long, env = "SPECLAB_OUT")]
    out: Option<PathBuf>,
    #[arg(long, value_enum)]
    format: Option<OutputFormat>,
    #[arg(long)]
    workers: Option<usize>,
    /// Comma-separated regulator values.
    #[arg(long, value_delimiter = ',')]
    tau: Option<Vec<f64>>,
    /// Comma-separated aspect ratios.
    #[arg(long, value_delimiter = ',')]
    alpha: Option<Vec<f64>>,
    /// Comma-separated plate separations.
    #[arg(long, value_delimiter = ',')]
    a: Option<Vec<f64>>,
    /// Cube side or lateral period.
    #[arg(long = "L")]
    l: Option<f64>,
    #[arg(long)]
    n_samples: Option<u64>,
    #[arg(long)]
    cutoff: Option<f64>,
    #[arg(long)]
    channels: Option<usize>,
    #[arg(long, value_enum)]
    channel: Option<NoiseChannel>,
    #[arg(long)]
    g: Option<f64>,
    #[arg(long, value_enum)]
    bc: Option<BoundaryCondition>,
    /// Mixed cell `l1,l2,a`.
    #[arg(long, value_delimiter = ',', num_args = 3)]
    cell: Option<Vec<f64>>,
    #[arg(long)]
    m: Option<u32>,
    #[arg(long)]
    s: Option<f64>,
    #[arg(long, value_delimiter = ',')]
    lambda: Option<Vec<f64>>,
    #[arg(long, value_delimiter = ',')]
    widths: Option<Vec<f64>>,
    #[arg(long, value_enum)]
    mollifier: Option<MollifierShape>,
    /// Suppress the per-check summary.
    #[arg(long, short)]
    quiet: bool,
}

impl Cli {
    fn overrides(&self) -> ConfigFile {
        ConfigFile {
            command: None,
            seed: self.seed,
            workers: self.workers,
            output_dir: self.out.clone(),
            format: self.format,
            parameters: Parameters {
                tau: self.tau.clone(),
                alpha: self.alpha.clone(),
                a: self.a.clone(),
                l: self.l,
                n_samples: self.n_samples,
                cutoff: self.cutoff,
                channels: self.channels,
                channel: self.channel,
                g: self.g,
                bc: self.bc,
                cell: self.cell.as_ref().map(|c| [c[0], c[1], c[2]]),
                m: self.m,
                s: self.s,
                lambda: self.lambda.clone(),
                widths: self.widths.clone(),
                mollifier: self.mollifier,
            },
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let base = match &cli.config {
        Some(path) => match ConfigFile::load(path) {
            Ok(f) => f,
            Err(e) => return config_error(e),
        },
        None => ConfigFile::default(),
    };
    let config = match base.merge(cli.overrides()).resolve(Some(cli.command)) {
        Ok(c) => c,
        Err(e) => return config_error(e),
    };
    let outcome = match harness::run(&config) {
        Ok(o) => o,
        Err(Error::Config(m)) => return config_error(Error::Config(m)),
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(1);
        }
    };
    if !cli.quiet {
        match &outcome.report.criteria {
            Some(criteria) => criteria.iter().for_each(|c| println!("{}", c.line())),
            None => {
                for c in &outcome.report.checks {
                    println!("{} {}", if c.passed { "PASS" } else { "FAIL" }, c.name);
                }
            }
        }
        for f in &outcome.report.failures {
            eprintln!("failure: {}: {}", f.name, f.detail);
        }
        for f in &outcome.files {
            println!("wrote {}", f.display());
        }
    }
    ExitCode::from(outcome.status.code() as u8)
}

fn config_error(e: Error) -> ExitCode {
    eprintln!("configuration error: {e}");
    ExitCode::from(2)
}
