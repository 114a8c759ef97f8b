//! Command-line front end: configuration resolution, subcommands and
//! report files.

pub mod config;
mod commands;

use std::ffi::OsString;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::error::ErrorKind;
use clap::parser::ValueSource;
use clap::{Arg, ArgMatches, Command};
use serde_json::{json, Value};

use crate::error::{Error, Result};
pub use config::{parse_cube, parse_list, parse_points, Field, RunConfig};

pub const VERSION: &str = env!("CARGO_PKG_VERSION");

/// Exit status for an unknown command or an I/O failure.
pub const EXIT_USAGE: i32 = 1;

/// Name, one-line description and accepted keys of every subcommand.
pub const COMMANDS: &[(&str, &str, &[Field])] = &[
    ("oscillation", "Oscillation profiles and VMO/XMO/CMO classification", config::OSCILLATION),
    ("approx", "Dyadic approximation, mollification and derivative decay", config::APPROX),
    ("kernel-verify", "Size, regularity and decay checks of a bilinear kernel", config::KERNEL_VERIFY),
    ("commutator", "Evaluate a bilinear commutator at points", config::COMMUTATOR),
    ("weights", "Vector A_p constant of a weight pair", config::WEIGHTS),
    ("compactness", "Finite-family Frechet-Kolmogorov check", config::COMPACTNESS),
];

/// What a command produced.
pub struct Outcome {
    pub report: Value,
    pub csv: String,
}

/// Paths written by a successful run.
#[derive(Debug, Clone)]
pub struct Written {
    pub json: PathBuf,
    pub csv: PathBuf,
}

fn flag(key: &str) -> String {
    key.replace('_', "-")
}

pub fn app() -> Command {
    let mut app = Command::new("xmo")
        .version(VERSION)
        .about("Mean oscillation, dyadic approximation and bilinear commutator diagnostics")
        .subcommand_required(true)
        .arg_required_else_help(true);
    for (name, about, schema) in COMMANDS {
        let mut sub = Command::new(*name).about(*about).arg(
            Arg::new("config")
                .long("config")
                .value_name("FILE")
                .help("flat `key = value` file; command-line flags override it"),
        );
        for f in config::COMMON.iter().chain(schema.iter()) {
            let mut help = f.help.to_string();
            if !f.default.is_empty() {
                help.push_str(&format!(" [default: {}]", f.default));
            }
            sub = sub.arg(
                Arg::new(f.key)
                    .long(flag(f.key))
                    .value_name("VALUE")
                    .allow_hyphen_values(true)
                    .help(help),
            );
        }
        app = app.subcommand(sub);
    }
    app
}

fn overrides(m: &ArgMatches, schema: &[Field]) -> Vec<(String, String)> {
    config::COMMON
        .iter()
        .chain(schema)
        .filter(|f| m.value_source(f.key) == Some(ValueSource::CommandLine))
        .filter_map(|f| m.get_one::<String>(f.key).map(|v| (f.key.to_string(), v.clone())))
        .collect()
}

/// Parses `args` (program name first), runs the command and returns the
/// process exit status. Diagnostics go to stderr.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let matches = match app().try_get_matches_from(args) {
        Ok(m) => m,
        Err(e) => {
            let _ = e.print();
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => 0,
                ErrorKind::InvalidSubcommand
                | ErrorKind::MissingSubcommand
                | ErrorKind::DisplayHelpOnMissingArgumentOrSubcommand => EXIT_USAGE,
                _ => 2,
            };
        }
    };
    let (name, sub) = matches.subcommand().expect("subcommand is required");
    let schema = COMMANDS
        .iter()
        .find(|c| c.0 == name)
        .map(|c| c.2)
        .expect("registered subcommand");
    let file = match sub.get_one::<String>("config") {
        Some(path) => match config::read_config_file(Path::new(path)) {
            Ok(kv) => kv,
            Err(e) => return report_error(&e),
        },
        None => Vec::new(),
    };
    let cfg = match RunConfig::resolve(name, schema, &file, &overrides(sub, schema)) {
        Ok(c) => c,
        Err(e) => return report_error(&e),
    };
    match execute(cfg) {
        Ok(w) => {
            println!("{}", w.json.display());
            println!("{}", w.csv.display());
            0
        }
        Err(e) => report_error(&e),
    }
}

fn report_error(e: &Error) -> i32 {
    eprintln!("error: {e}");
    e.exit_code()
}

/// Runs a resolved configuration and writes `<command>.json` and
/// `<command>.csv` into the `out` directory.
pub fn execute(cfg: RunConfig) -> Result<Written> {
    let threads = cfg.count("threads")?;
    let out = PathBuf::from(cfg.text("out")?);
    let (cfg, outcome) = if threads == 0 {
        commands::dispatch(cfg)?
    } else {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build()
            .map_err(|e| config::field_error("threads", &e.to_string()))?;
        pool.install(|| commands::dispatch(cfg))?
    };
    std::fs::create_dir_all(&out)?;
    let doc = json!({
        "tool": "xmo",
        "version": VERSION,
        "command": cfg.command,
        "config": cfg.values,
        "report": outcome.report,
    });
    let json_path = out.join(format!("{}.json", cfg.command));
    let csv_path = out.join(format!("{}.csv", cfg.command));
    let mut text = serde_json::to_string_pretty(&doc)?;
    text.push('\n');
    write_file(&json_path, &text)?;
    write_file(&csv_path, &outcome.csv)?;
    Ok(Written {
        json: json_path,
        csv: csv_path,
    })
}

fn write_file(path: &Path, text: &str) -> Result<()> {
    let mut f = std::fs::File::create(path)?;
    f.write_all(text.as_bytes())?;
    Ok(())
}
