//! The `ctl` command line: `gen`, `seed-state`, `serve` and `run`.
//!
//! Exit codes: 0 ok, 2 usage, 3 policy violation, 4 parse error, 5 I/O.

use std::collections::BTreeMap;
use std::ffi::OsString;
use std::io::Write;
use std::path::PathBuf;

use clap::{Parser, Subcommand, ValueEnum};

use crate::gateway::{self, GatewayConfig, ServeError};
use crate::guard::{Origin, Policy, PolicyError};
use crate::pipeline::{self, Param, QueryError};
use crate::relstore::{self, gastros, Snapshot, StoreError};
use crate::state;
use crate::synthgen::{self, GenConfig, DEFAULT_SEED};
use crate::xmlout;

pub const EXIT_OK: i32 = 0;
pub const EXIT_FAILURE: i32 = 1;
pub const EXIT_USAGE: i32 = 2;
pub const EXIT_POLICY: i32 = 3;
pub const EXIT_PARSE: i32 = 4;
pub const EXIT_IO: i32 = 5;

#[derive(Debug, Parser)]
#[command(name = "ctl", version, about = "Aggregate-only query gateway tools")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate the synthetic dataset as three CSV files.
    Gen {
        #[arg(long, env = "AQG_SEED", default_value_t = DEFAULT_SEED)]
        seed: u64,
        #[arg(long, env = "AQG_DATA_DIR")]
        out: PathBuf,
        #[arg(long, default_value_t = 1881)]
        patients: usize,
        #[arg(long, default_value_t = 2020)]
        examinations: usize,
        #[arg(long, default_value_t = 6393)]
        detections: usize,
    },
    /// Write the fixture roles, users, stored queries and grants.
    SeedState {
        #[arg(long, env = "AQG_STATE")]
        out: PathBuf,
        /// Overwrite an existing file.
        #[arg(long)]
        force: bool,
        #[arg(long, env = "AQG_SEED", default_value_t = DEFAULT_SEED)]
        seed: u64,
        /// Policy the seeded queries are validated against.
        #[arg(long, env = "AQG_POLICY")]
        policy: Option<PathBuf>,
    },
    /// Start the HTTP gateway.
    Serve {
        #[arg(long, env = "AQG_CONFIG")]
        config: PathBuf,
    },
    /// Parse, check and execute a query locally; print the XML document.
    Run {
        #[arg(long)]
        query_file: PathBuf,
        /// `name=value`, repeatable.
        #[arg(long = "params", value_name = "NAME=VALUE", num_args = 1.., value_parser = parse_kv)]
        params: Vec<(String, String)>,
        #[arg(long, env = "AQG_DATA_DIR")]
        data: PathBuf,
        /// Print the canonical bound query instead of executing it.
        #[arg(long)]
        explain: bool,
        #[arg(long, env = "AQG_POLICY")]
        policy: Option<PathBuf>,
        #[arg(long, value_enum, default_value_t = OriginArg::Dynamic)]
        origin: OriginArg,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum OriginArg {
    Stored,
    Dynamic,
}

fn parse_kv(s: &str) -> Result<(String, String), String> {
    s.split_once('=')
        .map(|(k, v)| (k.to_string(), v.to_string()))
        .filter(|(k, _)| !k.is_empty())
        .ok_or_else(|| format!("`{s}` is not NAME=VALUE"))
}

/// A failure with the exit code it maps to.
struct Fail(i32, String);

impl From<StoreError> for Fail {
    fn from(e: StoreError) -> Fail {
        let code = match e {
            StoreError::Io { .. } => EXIT_IO,
            _ => EXIT_PARSE,
        };
        Fail(code, e.to_string())
    }
}

impl From<PolicyError> for Fail {
    fn from(e: PolicyError) -> Fail {
        let code = match e {
            PolicyError::Io { .. } => EXIT_IO,
            PolicyError::Invalid(_) => EXIT_USAGE,
        };
        Fail(code, e.to_string())
    }
}

impl From<QueryError> for Fail {
    fn from(e: QueryError) -> Fail {
        let violations = e.violations();
        if !violations.is_empty() {
            let lines: Vec<String> = violations.iter().map(|v| v.to_string()).collect();
            return Fail(EXIT_POLICY, lines.join("\n"));
        }
        let code = match e {
            QueryError::Parse(_) => EXIT_PARSE,
            QueryError::Bind(_) => EXIT_USAGE,
            QueryError::Policy(_) | QueryError::Exec(_) => EXIT_FAILURE,
        };
        Fail(code, e.to_string())
    }
}

impl From<ServeError> for Fail {
    fn from(e: ServeError) -> Fail {
        let code = match &e {
            ServeError::Config(gateway::ConfigError::Invalid(_)) => EXIT_USAGE,
            ServeError::Policy(PolicyError::Invalid(_)) => EXIT_USAGE,
            _ => EXIT_IO,
        };
        Fail(code, e.to_string())
    }
}

fn io(path: &std::path::Path, e: std::io::Error) -> Fail {
    Fail(EXIT_IO, format!("{}: {e}", path.display()))
}

fn load_policy(path: &Option<PathBuf>) -> Result<Policy, Fail> {
    Ok(match path {
        Some(p) => Policy::load(p)?,
        None => Policy::default(),
    })
}

fn load_data(dir: &std::path::Path) -> Result<Snapshot, Fail> {
    Ok(relstore::build_snapshot(relstore::load_dir(
        dir,
        &gastros::schemas(),
    )?)?)
}

/// Parses `args` (program name first) and runs the command, writing to `out`
/// and `err`. Returns the exit code.
pub fn main_from<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            if e.use_stderr() {
                let _ = write!(err, "{}", e.render());
                return EXIT_USAGE;
            }
            let _ = write!(out, "{}", e.render());
            return EXIT_OK;
        }
    };
    match execute(cli.command, out) {
        Ok(()) => EXIT_OK,
        Err(Fail(code, msg)) => {
            let _ = writeln!(err, "error: {msg}");
            code
        }
    }
}

fn execute(cmd: Command, out: &mut dyn Write) -> Result<(), Fail> {
    let w = |e: std::io::Error| Fail(EXIT_IO, e.to_string());
    match cmd {
        Command::Gen {
            seed,
            out: dir,
            patients,
            examinations,
            detections,
        } => {
            let cfg = GenConfig {
                seed,
                n_patients: patients,
                n_examinations: examinations,
                n_detections: detections,
                ..GenConfig::default()
            };
            let ds = synthgen::generate_dataset(&cfg).map_err(|e| Fail(EXIT_USAGE, e.to_string()))?;
            let total = ds.total_rows();
            let mut tables = ds.into_tables();
            relstore::save_dir(&dir, &tables)?;
            tables.sort_by(|a, b| a.name().cmp(b.name()));
            writeln!(out, "table rows").map_err(w)?;
            for t in &tables {
                writeln!(out, "{} {}", t.name(), t.rows.len()).map_err(w)?;
            }
            writeln!(out, "sum {total}").map_err(w)?;
            Ok(())
        }
        Command::SeedState {
            out: path,
            force,
            seed,
            policy,
        } => {
            if path.exists() && !force {
                return Err(Fail(
                    EXIT_USAGE,
                    format!("{} exists; pass --force to overwrite", path.display()),
                ));
            }
            let policy = load_policy(&policy)?;
            let st = state::seed_state(seed, &gastros::schemas(), &policy)
                .map_err(|e| Fail(EXIT_FAILURE, e.to_string()))?;
            st.save(&path).map_err(|e| Fail(EXIT_IO, e.to_string()))?;
            writeln!(
                out,
                "wrote {}: {} roles, {} users, {} queries",
                path.display(),
                st.directory.roles().count(),
                st.directory.users().count(),
                st.catalog.queries().count()
            )
            .map_err(w)?;
            Ok(())
        }
        Command::Serve { config } => {
            let cfg = GatewayConfig::load(&config).map_err(ServeError::from)?;
            init_logging(&cfg)?;
            let rt = tokio::runtime::Builder::new_multi_thread()
                .enable_all()
                .build()
                .map_err(w)?;
            rt.block_on(gateway::serve(cfg))?;
            Ok(())
        }
        Command::Run {
            query_file,
            params,
            data,
            explain,
            policy,
            origin,
        } => {
            let text = std::fs::read_to_string(&query_file).map_err(|e| io(&query_file, e))?;
            let policy = load_policy(&policy)?;
            let snapshot = load_data(&data)?;
            let mut ps = BTreeMap::new();
            for (k, v) in params {
                if ps.insert(k.clone(), Param::Raw(v)).is_some() {
                    return Err(Fail(EXIT_USAGE, format!("parameter `{k}` given twice")));
                }
            }
            let origin = match origin {
                OriginArg::Stored => Origin::Stored,
                OriginArg::Dynamic => Origin::Dynamic,
            };
            let bound = pipeline::prepare_text(&text, &ps, &snapshot, &policy, origin)?;
            if explain {
                writeln!(out, "{}", crate::mql::render(&bound.ast)).map_err(w)?;
                return Ok(());
            }
            let rs = pipeline::finish(&bound, &snapshot, &policy)?;
            out.write_all(xmlout::serialize(&rs).as_bytes()).map_err(w)?;
            Ok(())
        }
    }
}

fn init_logging(cfg: &GatewayConfig) -> Result<(), Fail> {
    use tracing_subscriber::EnvFilter;
    let filter = EnvFilter::try_from_env("AQG_LOG_LEVEL").unwrap_or_else(|_| EnvFilter::new("info"));
    let builder = tracing_subscriber::fmt().with_env_filter(filter);
    let res = match &cfg.log {
        Some(p) => {
            let f = std::fs::OpenOptions::new()
                .create(true)
                .append(true)
                .open(p)
                .map_err(|e| io(p, e))?;
            builder
                .with_ansi(false)
                .with_writer(std::sync::Mutex::new(f))
                .try_init()
        }
        None => builder
            .with_ansi(std::io::IsTerminal::is_terminal(&std::io::stderr()))
            .with_writer(std::io::stderr)
            .try_init(),
    };
    // A subscriber may already be installed when embedded; keep it.
    let _ = res;
    Ok(())
}
