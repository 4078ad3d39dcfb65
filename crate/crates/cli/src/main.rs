use std::fs;
use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use gsobolev::experiments::{
    cmd_asymptotics, cmd_converge, cmd_norms, cmd_ortho, ExperimentConfig, ExperimentReport,
    OutputFormat, TestFunction,
};

#[derive(Parser)]
#[command(
    name = "gsobolev",
    version,
    about = "Gegenbauer-Sobolev orthonormal polynomials: verification experiments"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Gram-matrix orthonormality and quadrature health
    Ortho(Common),
    /// Fitted growth exponents of lambda_n, A_{n,j} and endpoint values
    Asymptotics(Common),
    /// Partial-sum operator norm probes and weighted sup scans
    Norms(Common),
    /// Convergence of Fourier-Sobolev partial sums for a test function
    Converge {
        #[arg(value_enum, default_value = "exp")]
        function: FunctionArg,
        #[command(flatten)]
        common: Common,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum FunctionArg {
    Exp,
    Runge,
    #[value(name = "abs_power")]
    AbsPower,
}

#[derive(Clone, Copy, ValueEnum)]
enum FormatArg {
    Csv,
    Json,
}

#[derive(Args)]
struct Common {
    #[arg(long, default_value_t = 1.0, allow_negative_numbers = true)]
    alpha: f64,
    #[arg(long = "mass-m", default_value_t = 1.0, allow_negative_numbers = true)]
    mass_m: f64,
    #[arg(long = "mass-n", default_value_t = 1.0, allow_negative_numbers = true)]
    mass_n: f64,
    #[arg(long, default_value_t = 40)]
    nmax: usize,
    /// Comma-separated exponents
    #[arg(long, value_delimiter = ',', default_value = "2")]
    p: Vec<f64>,
    /// Gauss nodes; defaults to 4*nmax+64
    #[arg(long = "quad-nodes")]
    quad_nodes: Option<usize>,
    #[arg(long, default_value_t = 2048)]
    grid: usize,
    #[arg(long, value_enum, default_value = "csv")]
    format: FormatArg,
    /// Write the report here instead of stdout
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, default_value_t = 42)]
    seed: u64,
    /// Negative control: perturb every lambda_n, n >= 1
    #[arg(long = "debug-corrupt-lambda")]
    debug_corrupt_lambda: bool,
}

impl Common {
    fn config(&self) -> ExperimentConfig {
        let mut c = ExperimentConfig::new(self.alpha, self.mass_m, self.mass_n, self.nmax);
        c.p_list = self.p.clone();
        if let Some(q) = self.quad_nodes {
            c.quad_nodes = q;
        }
        c.grid_size = self.grid;
        c.format = match self.format {
            FormatArg::Csv => OutputFormat::Csv,
            FormatArg::Json => OutputFormat::Json,
        };
        c.seed = self.seed;
        c.corrupt_lambda = self.debug_corrupt_lambda;
        c
    }
}

fn emit(report: &ExperimentReport, out: Option<&PathBuf>) -> std::io::Result<()> {
    let text = report.render();
    match out {
        Some(path) => fs::write(path, text),
        None => std::io::stdout().lock().write_all(text.as_bytes()),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let (common, result) = match &cli.command {
        Command::Ortho(c) => (c, cmd_ortho(&c.config())),
        Command::Asymptotics(c) => (c, cmd_asymptotics(&c.config())),
        Command::Norms(c) => (c, cmd_norms(&c.config())),
        Command::Converge { function, common } => {
            let f = match function {
                FunctionArg::Exp => TestFunction::Exp,
                FunctionArg::Runge => TestFunction::Runge,
                FunctionArg::AbsPower => TestFunction::AbsPower,
            };
            (common, cmd_converge(&common.config(), f))
        }
    };
    let report = match result {
        Ok(r) => r,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(2);
        }
    };
    if let Err(e) = emit(&report, common.out.as_ref()) {
        eprintln!("error: cannot write report: {e}");
        return ExitCode::from(2);
    }
    for r in report.failures() {
        eprintln!(
            "FAIL {} n={:?} p={:?} value={:e}",
            r.experiment, r.n, r.p, r.value
        );
    }
    if report.all_pass() {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
