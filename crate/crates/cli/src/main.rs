use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use finpop_cli::config::parse_list;
use finpop_cli::{execute, CliError, CliResult, Command, ExperimentConfig, Fault, Format, Level, StatKind};

#[derive(Parser)]
#[command(name = "finpop", version, about = "Tail probabilities under sampling without replacement")]
struct Cli {
    #[command(subcommand)]
    command: Cmd,
    #[command(flatten)]
    common: Common,
}

#[derive(Subcommand)]
enum Cmd {
    /// Population moments, omega and the admissible x ranges.
    Moments,
    /// Tail estimates and normal ratios over the x grid.
    Tail {
        #[arg(long, default_value = "sum")]
        statistic: String,
    },
    /// Same as `tail --statistic t`.
    TTail,
    /// Tail of the quadratic-tilt event (needs --xi, --xi1, --h).
    Quadratic,
    /// Monte Carlo t-tail to normal ratios over the reference grid.
    Table1,
    /// Monte Carlo t-tail to saddlepoint ratios over the reference grid.
    Table2,
    /// Relative-error envelopes at the constant --A.
    Envelope,
    /// Property suites; exits with status 2 if any property fails.
    Validate {
        #[arg(long, default_value = "quick")]
        level: String,
        #[arg(long, hide = true)]
        fault: Option<String>,
    },
}

#[derive(Args)]
struct Common {
    /// JSON configuration; flags override its keys.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// file:<path> or power:<N>:<alpha>
    #[arg(long, global = true)]
    population: Option<String>,
    #[arg(long, global = true)]
    n: Option<usize>,
    /// Repeatable or comma separated.
    #[arg(long, global = true, allow_hyphen_values = true)]
    x: Vec<String>,
    #[arg(long, global = true)]
    reps: Option<u64>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    #[arg(long, global = true)]
    workers: Option<usize>,
    /// Envelope constant.
    #[arg(long = "A", global = true)]
    a_const: Option<f64>,
    #[arg(long, global = true, allow_hyphen_values = true)]
    xi: Option<f64>,
    #[arg(long, global = true, allow_hyphen_values = true)]
    xi1: Option<f64>,
    #[arg(long, global = true, allow_hyphen_values = true)]
    h: Option<f64>,
    /// Saddlepoint for the t statistic: joint or reduction.
    #[arg(long = "t-saddlepoint", global = true)]
    t_saddlepoint: Option<String>,
    /// mc, enum, dp, bernoulli, saddlepoint; repeatable or comma separated.
    #[arg(long, global = true)]
    method: Vec<String>,
    #[arg(long, global = true, default_value = "json")]
    format: String,
    #[arg(long, global = true)]
    out: Option<PathBuf>,
}

impl Common {
    fn config(&self) -> CliResult<ExperimentConfig> {
        let mut cfg = match &self.config {
            Some(path) => ExperimentConfig::load(path)?,
            None => ExperimentConfig::default(),
        };
        if let Some(p) = &self.population {
            cfg.population = Some(p.parse()?);
        }
        if self.n.is_some() {
            cfg.n = self.n;
        }
        if !self.x.is_empty() {
            cfg.x_grid = parse_list(&self.x)?;
        }
        if let Some(v) = self.reps {
            cfg.reps = v;
        }
        if let Some(v) = self.seed {
            cfg.seed = v;
        }
        if let Some(v) = self.workers {
            cfg.workers = v;
        }
        if self.a_const.is_some() {
            cfg.a_const = self.a_const;
        }
        if let Some(v) = self.xi {
            cfg.xi = v;
        }
        if let Some(v) = self.xi1 {
            cfg.xi1 = v;
        }
        if let Some(v) = self.h {
            cfg.h = v;
        }
        if let Some(v) = &self.t_saddlepoint {
            cfg.t_saddlepoint = v.parse()?;
        }
        if !self.method.is_empty() {
            cfg.methods = parse_list(&self.method)?;
        }
        cfg.check()?;
        Ok(cfg)
    }
}

fn command(cmd: &Cmd) -> CliResult<Command> {
    Ok(match cmd {
        Cmd::Moments => Command::Moments,
        Cmd::Tail { statistic } => Command::Tail(statistic.parse()?),
        Cmd::TTail => Command::Tail(StatKind::T),
        Cmd::Quadratic => Command::Tail(StatKind::Quadratic),
        Cmd::Table1 => Command::Table1,
        Cmd::Table2 => Command::Table2,
        Cmd::Envelope => Command::Envelope,
        Cmd::Validate { level, fault } => Command::Validate {
            level: level.parse::<Level>()?,
            fault: fault.as_deref().map(str::parse::<Fault>).transpose()?,
        },
    })
}

fn run(cli: &Cli) -> CliResult<()> {
    let format: Format = cli.common.format.parse()?;
    let cmd = command(&cli.command)?;
    let cfg = cli.common.config()?;
    let report = execute(cmd, &cfg)?;
    let text = report.render(format)?;
    match &cli.common.out {
        Some(path) => std::fs::write(path, &text)
            .map_err(|e| CliError::Config(format!("cannot write {}: {e}", path.display())))?,
        None => print!("{text}"),
    }
    let failed = report.failed_properties();
    if !failed.is_empty() {
        let names: Vec<String> = failed.iter().map(|p| format!("{} ({})", p.name, p.detail)).collect();
        return Err(CliError::Property(names.join("; ")));
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("finpop: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
