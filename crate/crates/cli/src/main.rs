//! `geokernel` command line.
//!
//! Exit codes: 0 success (PD, witness found and valid), 2 Gram not PSD,
//! 3 search exhausted, 1 usage or numeric error.

mod commands;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use geokernel::{Precision, SpaceDescriptor};

#[derive(Parser)]
#[command(name = "geokernel", version, about = "Gaussian kernels on metric spaces")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone, Copy)]
struct PrecisionArg {
    /// Significant decimal digits (17..=200); defaults to $GEOKERNEL_PRECISION or 30.
    #[arg(long)]
    precision: Option<u32>,
}

#[derive(Subcommand)]
enum Command {
    /// Decide whether the Gram matrix of a point file is positive semidefinite.
    PdCheck {
        #[arg(long)]
        space: Option<SpaceDescriptor>,
        #[arg(long)]
        lambda: f64,
        /// JSON file: a point array, or {"space": ..., "points": [...]}.
        #[arg(long)]
        points: PathBuf,
    },
    /// All eigenvalues w_j of the equispaced circle Gram, as CSV.
    CircleSpectrum {
        #[arg(long)]
        lambda: f64,
        #[arg(long)]
        n: usize,
        #[command(flatten)]
        precision: PrecisionArg,
    },
    /// Search for and certify a negative quadratic form.
    #[command(subcommand)]
    Witness(WitnessCommand),
    /// Critical bandwidth of the equispaced N-point circle, as CSV.
    LambdaProfile {
        /// Comma-separated N values, each a multiple of 4.
        #[arg(long, value_delimiter = ',', required = true)]
        n_list: Vec<u64>,
        #[command(flatten)]
        precision: PrecisionArg,
    },
    /// Partial theta sums S_r(N) over a grid, as CSV.
    Theta {
        #[arg(long, value_delimiter = ',', required = true)]
        mu: Vec<f64>,
        #[arg(long, value_delimiter = ',', default_value = "0")]
        r: Vec<f64>,
        #[arg(long, value_delimiter = ',', required = true)]
        n: Vec<u64>,
        #[command(flatten)]
        precision: PrecisionArg,
    },
    /// Alternating eigenvalue against its bound and leading term, as CSV.
    BoundCheck {
        #[arg(long, value_delimiter = ',', required = true)]
        mu: Vec<f64>,
        #[arg(long, value_delimiter = ',', required = true)]
        n_list: Vec<u64>,
        #[command(flatten)]
        precision: PrecisionArg,
    },
    /// Probe the Stein-divergence kernel for violations.
    SteinScan {
        #[arg(long)]
        dim: usize,
        #[arg(long)]
        lambda: f64,
        #[arg(long, default_value_t = 200)]
        trials: u64,
        #[arg(long, default_value_t = 10)]
        points: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Largest distance distortion of a circle embedding over random pairs.
    EmbedVerify {
        #[arg(long)]
        target: SpaceDescriptor,
        #[arg(long, default_value_t = 1000)]
        pairs: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Recompute a certificate's quadratic form from its raw fields.
    VerifyCertificate { file: PathBuf },
    /// Write random valid points of a space as a point file.
    SamplePoints {
        #[arg(long)]
        space: SpaceDescriptor,
        #[arg(long)]
        count: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
}

#[derive(Subcommand)]
enum WitnessCommand {
    /// Equispaced witness on the unit circle.
    Circle {
        #[arg(long)]
        lambda: f64,
        #[arg(long, default_value_t = 400)]
        max_n: u64,
        #[command(flatten)]
        precision: PrecisionArg,
        #[arg(long)]
        output: Option<PathBuf>,
    },
    /// Circle witness transferred into sphere:N, projective:N, grassmann:K,N or torus:S.
    Space {
        #[arg(long)]
        target: SpaceDescriptor,
        #[arg(long)]
        lambda: f64,
        #[arg(long, default_value_t = 400)]
        max_n: u64,
        #[arg(long)]
        output: Option<PathBuf>,
    },
}

impl PrecisionArg {
    fn resolve(self) -> anyhow::Result<Precision> {
        let digits = match self.precision {
            Some(d) => d,
            None => match std::env::var("GEOKERNEL_PRECISION") {
                Ok(v) => v.trim().parse().map_err(|_| anyhow::anyhow!("GEOKERNEL_PRECISION={v:?} is not an integer"))?,
                Err(_) => return Ok(Precision::DEFAULT),
            },
        };
        Ok(Precision::new(digits)?)
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    match commands::run(cli.command) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}
