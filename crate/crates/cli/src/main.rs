use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;
use qfock_cli::config::parse_spectrum;
use qfock_cli::{emit, run_suite_timed, CliError, Format, Suite, SweepConfig};

/// Run numerical verification sweeps on truncated q-Fock spaces.
#[derive(Debug, Parser)]
#[command(name = "qfock", version)]
struct Args {
    /// TOML configuration file; flags override its fields.
    #[arg(long)]
    config: Option<PathBuf>,

    /// symmetrizer, wick, quantization, toeplitz, haagerup or all.
    #[arg(long, default_value = "all")]
    suite: String,

    /// Deformation parameters, comma separated.
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    q: Option<Vec<f64>>,

    /// Spectra such as `t2` or `2x1+t1`, comma separated.
    #[arg(long = "dim-spec", value_delimiter = ',')]
    dim_spec: Option<Vec<String>>,

    /// Truncation degree.
    #[arg(long)]
    degree: Option<usize>,

    #[arg(long)]
    seed: Option<u64>,

    /// json or csv.
    #[arg(long, default_value = "json")]
    format: String,

    /// Output file. Without it, reports go to `$QFOCK_REPORT_DIR/report.<format>`
    /// when that variable is set, and to stdout otherwise.
    #[arg(long)]
    out: Option<PathBuf>,

    /// Record wall time per check (makes reports run-dependent).
    #[arg(long)]
    timings: bool,
}

fn run(args: Args) -> Result<bool, CliError> {
    let mut cfg = match &args.config {
        Some(path) => SweepConfig::load(path)?,
        None => SweepConfig::default(),
    };
    if let Some(q) = args.q {
        cfg.q = q;
    }
    if let Some(specs) = &args.dim_spec {
        cfg.spectra = specs.iter().map(|s| parse_spectrum(s)).collect::<Result<_, _>>()?;
    }
    if let Some(n) = args.degree {
        cfg.degree = n;
    }
    if let Some(seed) = args.seed {
        cfg.seed = seed;
    }
    let suite: Suite = args.suite.parse()?;
    let format: Format = args.format.parse()?;

    let reports = run_suite_timed(&cfg, suite, args.timings)?;
    let failed = reports.iter().filter(|r| !r.passed).count();

    let target = args
        .out
        .or_else(|| std::env::var_os("QFOCK_REPORT_DIR").map(|d| PathBuf::from(d).join(format!("report.{format}"))));
    match target {
        Some(path) => {
            let file = File::create(&path).map_err(|e| CliError::Io(path.display().to_string(), e))?;
            let mut w = BufWriter::new(file);
            emit(&reports, format, &mut w)?;
            w.flush().map_err(|e| CliError::Io(path.display().to_string(), e))?;
            eprintln!("wrote {} reports to {}", reports.len(), path.display());
        }
        None => emit(&reports, format, io::stdout().lock())?,
    }
    eprintln!("{} of {} checks passed", reports.len() - failed, reports.len());
    Ok(failed == 0)
}

fn main() -> ExitCode {
    match run(Args::parse()) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}
