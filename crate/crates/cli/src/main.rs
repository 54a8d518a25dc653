use clap::{Args, Parser, Subcommand, ValueEnum};
use std::path::PathBuf;
use std::process::ExitCode;
use sturm_cli::config::{Equation, Format, Overrides, ProblemConfig};
use sturm_cli::{run_converge, run_probe, run_solve, run_verify, CliError, ConfigError, ResultRecord};

/// Bound states and resonances by Coulomb-Sturmian separable expansion.
#[derive(Parser)]
#[command(name = "sturm", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
    #[command(flatten)]
    common: Common,
}

#[derive(Args)]
struct Common {
    /// Problem file (JSON).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[arg(long, global = true, value_enum)]
    equation: Option<EquationArg>,
    #[arg(long, global = true, conflicts_with = "j")]
    l: Option<u32>,
    #[arg(long, global = true)]
    j: Option<f64>,
    #[arg(long = "n-basis", global = true)]
    n_basis: Option<usize>,
    #[arg(long = "n-prime", global = true)]
    n_prime: Option<usize>,
    #[arg(long, global = true)]
    b: Option<f64>,
    /// lo,hi
    #[arg(long = "bound-interval", global = true, allow_hyphen_values = true, value_parser = floats::<2>)]
    bound_interval: Option<[f64; 2]>,
    /// re_lo,re_hi,im_lo,im_hi
    #[arg(long = "resonance-box", global = true, allow_hyphen_values = true, value_parser = floats::<4>)]
    resonance_box: Option<[f64; 4]>,
    #[arg(long, global = true, value_enum)]
    format: Option<FormatArg>,
    /// Write the result here instead of stdout.
    #[arg(long, global = true)]
    out: Option<String>,
    /// Worker threads (default: all cores).
    #[arg(long, global = true, env = "STURM_THREADS")]
    threads: Option<usize>,
}

#[derive(Subcommand)]
enum Command {
    /// Bound-state and resonance search.
    Solve,
    /// Compare bound states with a finite-difference shooting solution.
    Verify,
    /// Re-solve over lists of N and b and report the drift.
    Converge {
        #[arg(long = "n-list", value_delimiter = ',')]
        n_list: Option<Vec<usize>>,
        #[arg(long = "b-list", value_delimiter = ',')]
        b_list: Option<Vec<f64>>,
    },
    /// Dump ln|D| and arg D on a grid for plotting.
    GreensProbe {
        /// nx[,ny]
        #[arg(long, value_delimiter = ',', num_args = 1..=2)]
        grid: Option<Vec<usize>>,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum EquationArg {
    Schrodinger,
    Kg,
    Dirac,
}

#[derive(Clone, Copy, ValueEnum)]
enum FormatArg {
    Json,
    Csv,
    Text,
}

/// Exactly `K` comma-separated numbers.
fn floats<const K: usize>(s: &str) -> Result<[f64; K], String> {
    let v: Vec<f64> = s
        .split(',')
        .map(|x| x.trim().parse::<f64>().map_err(|e| format!("'{x}': {e}")))
        .collect::<Result<_, _>>()?;
    v.try_into().map_err(|v: Vec<f64>| format!("expected {K} comma-separated numbers, got {}", v.len()))
}

fn overrides(c: &Common) -> Overrides {
    Overrides {
        equation: c.equation.map(|e| match e {
            EquationArg::Schrodinger => Equation::Schrodinger,
            EquationArg::Kg => Equation::Kg,
            EquationArg::Dirac => Equation::Dirac,
        }),
        l: c.l,
        j: c.j,
        n_basis: c.n_basis,
        n_prime: c.n_prime,
        b: c.b,
        bound_interval: c.bound_interval,
        resonance_box: c.resonance_box,
        format: c.format.map(|f| match f {
            FormatArg::Json => Format::Json,
            FormatArg::Csv => Format::Csv,
            FormatArg::Text => Format::Text,
        }),
        out: c.out.clone(),
    }
}

fn config_error(path: &str, message: impl Into<String>) -> CliError {
    ConfigError {
        path: path.into(),
        message: message.into(),
    }
    .into()
}

fn execute(cli: &Cli) -> Result<(ResultRecord, ProblemConfig), CliError> {
    let Some(path) = &cli.common.config else {
        return Err(config_error("--config", "a problem file is required"));
    };
    let mut config = ProblemConfig::load(path)?;
    config.apply(&overrides(&cli.common));
    let record = match &cli.command {
        Command::Solve => run_solve(&config)?,
        Command::Verify => run_verify(&config)?,
        Command::Converge { n_list, b_list } => {
            let from_file = config.converge.clone();
            let n = n_list
                .clone()
                .or_else(|| from_file.as_ref().map(|c| c.n_list.clone()))
                .unwrap_or_else(|| vec![config.basis.n]);
            let b = b_list
                .clone()
                .or_else(|| from_file.as_ref().map(|c| c.b_list.clone()))
                .unwrap_or_else(|| vec![config.basis.b]);
            config.converge = Some(sturm_cli::config::ConvergeConfig { n_list: n.clone(), b_list: b.clone() });
            run_converge(&config, &n, &b)?
        }
        Command::GreensProbe { grid } => {
            let g = match grid.as_deref() {
                Some([x]) => [*x, 1],
                Some([x, y]) => [*x, *y],
                _ => config.probe.as_ref().map(|p| p.grid).unwrap_or([101, 41]),
            };
            run_probe(&config, g)?
        }
    };
    Ok((record, config))
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Some(k) = cli.common.threads {
        if k == 0 {
            eprintln!("error: --threads must be at least 1");
            return ExitCode::from(2);
        }
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(k).build_global() {
            eprintln!("warning: thread pool: {e}");
        }
    }
    let (record, config) = match execute(&cli) {
        Ok(x) => x,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(e.exit_code() as u8);
        }
    };
    let text = record.render(config.output.format);
    match &config.output.path {
        Some(p) => {
            if let Err(e) = std::fs::write(p, &text) {
                eprintln!("error: writing {p}: {e}");
                return ExitCode::from(1);
            }
        }
        None => print!("{text}"),
    }
    match &record.verification {
        Some(v) if !v.passed => {
            eprintln!("verification mismatch: max |Δ| = {:?}, tolerance {:e}", v.max_delta, v.tolerance);
            ExitCode::from(4)
        }
        _ => ExitCode::SUCCESS,
    }
}
