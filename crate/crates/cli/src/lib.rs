//! Command-line front end for the `finpop` library: configuration, report
//! assembly and the property suites run by `validate`.

pub mod commands;
pub mod config;
pub mod error;
pub mod report;
pub mod validate;

pub use commands::StatKind;
pub use config::{ExperimentConfig, MethodKind, PopulationSpec, TSaddlepoint};
pub use error::{CliError, CliResult};
pub use report::{Format, Report, ReportRow};
pub use validate::{Fault, Level};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Command {
    Moments,
    Tail(StatKind),
    Table1,
    Table2,
    Envelope,
    Validate { level: Level, fault: Option<Fault> },
}

/// Runs `cmd`. A failed property is reported, not returned as an error; see
/// [`Report::failed_properties`].
pub fn execute(cmd: Command, cfg: &ExperimentConfig) -> CliResult<Report> {
    match cmd {
        Command::Moments => commands::cmd_moments(cfg),
        Command::Tail(stat) => commands::cmd_tail(cfg, stat),
        Command::Table1 => commands::cmd_table(cfg, false),
        Command::Table2 => commands::cmd_table(cfg, true),
        Command::Envelope => commands::cmd_envelope(cfg),
        Command::Validate { level, fault } => validate::cmd_validate(cfg, level, fault),
    }
}
