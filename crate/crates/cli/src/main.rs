//! Batch verification harness. One suite per invocation; the report lists
//! every computed quantity with its tolerance and verdict.

mod config;
mod report;
mod suites;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser};

use config::{Command, ConfigError, ExperimentConfig, Format};
use sphere_ot::fields::GridSpec;

const AFTER_HELP: &str = "\
Exit status: 0 when every check passes, 1 when a check fails (the report is \
still written), 2 on a configuration or input error.

CSV columns: name,value,tolerance,equation_tag,pass. An empty tolerance marks \
an informational entry. JSON is the canonical format; CSV carries the entries only.";

#[derive(Parser, Debug)]
#[command(name = "sphere-ot", version, about = "Numerical checks for optimal transport on spheres", after_help = AFTER_HELP)]
struct Cli {
    /// suite to run; may also come from the config file
    #[arg(value_enum)]
    command: Option<Command>,
    #[command(flatten)]
    overrides: Overrides,
}

#[derive(Args, Debug)]
struct Overrides {
    /// JSON experiment config; flags override its fields
    #[arg(long)]
    config: Option<PathBuf>,
    /// colatitude nodes (S³: nodes in sin²η)
    #[arg(long)]
    grid_colat: Option<usize>,
    /// longitude nodes (S³: nodes per Hopf angle)
    #[arg(long)]
    grid_lon: Option<usize>,
    #[arg(long)]
    dim: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    /// ε values for ψ, comma separated
    #[arg(long, value_delimiter = ',')]
    eps: Option<Vec<f64>>,
    /// τ values for the Lichnérowicz sweep, comma separated
    #[arg(long, value_delimiter = ',')]
    tau: Option<Vec<f64>>,
    #[arg(long)]
    tol_entropy: Option<f64>,
    /// report path; stdout when absent
    #[arg(long)]
    output: Option<PathBuf>,
    #[arg(long, value_enum)]
    format: Option<Format>,
}

fn build_config(cli: &Cli) -> Result<(Command, ExperimentConfig), ConfigError> {
    let o = &cli.overrides;
    let mut cfg = match &o.config {
        Some(path) => ExperimentConfig::load(path)?,
        None => ExperimentConfig::default(),
    };
    if let Some(d) = o.dim {
        cfg.dim = d;
    }
    if o.grid_colat.is_some() || o.grid_lon.is_some() {
        let base = cfg.grid.unwrap_or_else(|| cfg.grid_or(64, 128));
        let nc = o.grid_colat.unwrap_or(base.n_colat);
        let nl = o.grid_lon.unwrap_or(base.n_lon);
        cfg.grid = Some(match cfg.dim {
            2 => GridSpec::gauss_legendre(nc, nl),
            _ => GridSpec::gauss_legendre_s3(nc, nl),
        });
    }
    if let Some(s) = o.seed {
        cfg.seed = s;
    }
    if let Some(e) = &o.eps {
        cfg.epsilon_list = e.clone();
    }
    if let Some(t) = &o.tau {
        cfg.tau_list = t.clone();
    }
    if let Some(t) = o.tol_entropy {
        cfg.tolerances.insert("entropy".into(), t);
    }
    if let Some(p) = &o.output {
        cfg.output = Some(p.clone());
    }
    if let Some(f) = o.format {
        cfg.format = f;
    }
    let command = cli
        .command
        .or(cfg.command)
        .ok_or_else(|| ConfigError("no command given on the command line or in the config".into()))?;
    cfg.validate()?;
    Ok((command, cfg))
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let (command, cfg) = match build_config(&cli) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(2);
        }
    };
    let report = match suites::run(command, &cfg) {
        Ok(r) => r,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(2);
        }
    };
    let text = match cfg.format {
        Format::Json => report.to_json() + "\n",
        Format::Csv => report.to_csv(),
    };
    match &cfg.output {
        Some(path) => {
            if let Err(e) = std::fs::write(path, text) {
                eprintln!("error: {}: {e}", path.display());
                return ExitCode::from(2);
            }
        }
        None => print!("{text}"),
    }
    if report.pass {
        ExitCode::SUCCESS
    } else {
        let failed: Vec<&str> = report.entries.iter().filter(|e| !e.pass).map(|e| e.name.as_str()).collect();
        eprintln!("failed: {}", failed.join(", "));
        ExitCode::from(1)
    }
}
