mod args;
mod commands;

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::parser::ValueSource;
use clap::{ArgMatches, CommandFactory, FromArgMatches};
use serde::de::DeserializeOwned;
use serde::Serialize;
use serde_json::{Map, Value};

use args::{Cli, Command};

/// Anything that ends a run early. I/O failures exit with 2, the rest with 1.
#[derive(Debug)]
pub enum Failure {
    Usage(String),
    Io(String),
    Core(xmodal::Error),
}

impl Failure {
    fn exit_code(&self) -> u8 {
        match self {
            Failure::Usage(_) => 1,
            Failure::Io(_) => 2,
            Failure::Core(e) if e.is_io() => 2,
            Failure::Core(_) => 1,
        }
    }
}

impl std::fmt::Display for Failure {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Failure::Usage(m) | Failure::Io(m) => f.write_str(m),
            Failure::Core(e) => write!(f, "{e}"),
        }
    }
}

impl From<xmodal::Error> for Failure {
    fn from(e: xmodal::Error) -> Self {
        Failure::Core(e)
    }
}

pub type Outcome<T> = std::result::Result<T, Failure>;

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let matches = match Cli::command().try_get_matches() {
        Ok(m) => m,
        Err(e) => {
            let _ = e.print();
            return match e.kind() {
                clap::error::ErrorKind::DisplayHelp | clap::error::ErrorKind::DisplayVersion => ExitCode::SUCCESS,
                _ => ExitCode::from(1),
            };
        }
    };
    match run(&matches) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}

fn run(matches: &ArgMatches) -> Outcome<()> {
    let cli = Cli::from_arg_matches(matches).map_err(|e| Failure::Usage(e.to_string()))?;
    let (name, sub) = matches.subcommand().expect("clap requires a subcommand");
    let sources = [matches, sub];

    let mut config = match &cli.global.config {
        Some(path) => read_config(path)?,
        None => Map::new(),
    };
    let mut global = merge(cli.global.clone(), &mut config, &sources)?;
    global.config = cli.global.config.clone();

    macro_rules! resolve {
        ($args:expr) => {{
            let args = merge($args, &mut config, &sources)?;
            reject_unknown(&config)?;
            args
        }};
    }
    let command = match cli.command {
        Command::Synth(a) => Command::Synth(resolve!(a)),
        Command::ValidateStore(a) => Command::ValidateStore(resolve!(a)),
        Command::TrainTranslation(a) => Command::TrainTranslation(resolve!(a)),
        Command::FitPca(a) => Command::FitPca(resolve!(a)),
        Command::Project(a) => Command::Project(resolve!(a)),
        Command::RetrieveEval(a) => Command::RetrieveEval(resolve!(a)),
        Command::ComboStudy(a) => Command::ComboStudy(resolve!(a)),
        Command::TrainClassifier(a) => Command::TrainClassifier(resolve!(a)),
        Command::EvalClassifier(a) => Command::EvalClassifier(resolve!(a)),
        Command::MixCurve(a) => Command::MixCurve(resolve!(a)),
        Command::ClusterDist(a) => Command::ClusterDist(resolve!(a)),
        Command::ClassHist(a) => Command::ClassHist(resolve!(a)),
    };

    if let Some(n) = global.threads {
        if n == 0 {
            return Err(Failure::Usage("--threads must be at least 1".into()));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| Failure::Usage(format!("cannot set up {n} threads: {e}")))?;
    }
    std::fs::create_dir_all(&global.out_dir)
        .map_err(|e| Failure::Io(format!("cannot create {}: {e}", global.out_dir.display())))?;

    let run = commands::dispatch(&global, &command)?;
    let config = serde_json::json!({ "global": global, "command": command });
    let mut manifest = xmodal::experiments::RunManifest::new(name, config, run.seeds, &run.inputs)?;
    manifest.outputs = run.outputs;
    manifest.write(global.out_dir.join("run.json"))?;
    Ok(())
}

fn read_config(path: &Path) -> Outcome<Map<String, Value>> {
    let text = std::fs::read_to_string(path).map_err(|e| Failure::Io(format!("cannot read config {}: {e}", path.display())))?;
    match serde_json::from_str(&text) {
        Ok(Value::Object(map)) => Ok(map.into_iter().map(|(k, v)| (k.replace('-', "_"), v)).collect()),
        Ok(_) => Err(Failure::Usage(format!("config {} must hold a JSON object", path.display()))),
        Err(e) => Err(Failure::Usage(format!("invalid config {}: {e}", path.display()))),
    }
}

fn given_on_command_line(sources: &[&ArgMatches], id: &str) -> bool {
    sources.iter().any(|m| {
        m.try_contains_id(id).unwrap_or(false)
            && matches!(m.value_source(id), Some(ValueSource::CommandLine))
    })
}

/// Takes the config keys naming fields of `args` and applies those the
/// command line left unset. Config values beat `XMODAL_THREADS`.
fn merge<T: Serialize + DeserializeOwned>(args: T, config: &mut Map<String, Value>, sources: &[&ArgMatches]) -> Outcome<T> {
    let Value::Object(mut fields) = serde_json::to_value(&args).map_err(xmodal::Error::from)? else {
        unreachable!("argument structs serialize to objects")
    };
    let mut touched = false;
    for key in fields.keys().cloned().collect::<Vec<_>>() {
        if let Some(value) = config.remove(&key) {
            if !given_on_command_line(sources, &key) {
                fields.insert(key, value);
                touched = true;
            }
        }
    }
    if !touched {
        return Ok(args);
    }
    serde_json::from_value(Value::Object(fields)).map_err(|e| Failure::Usage(format!("bad config value: {e}")))
}

fn reject_unknown(config: &Map<String, Value>) -> Outcome<()> {
    match config.keys().next() {
        Some(key) => Err(Failure::Usage(format!("unknown config key `{key}`"))),
        None => Ok(()),
    }
}

/// What a subcommand reports back for `run.json`.
pub struct RunRecord {
    pub seeds: Vec<u64>,
    pub inputs: Vec<PathBuf>,
    pub outputs: Vec<String>,
}
