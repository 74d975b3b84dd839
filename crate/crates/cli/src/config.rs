//! Flag/config-file merging and the `--describe` dump.

use std::collections::BTreeSet;
use std::fmt;
use std::path::{Path, PathBuf};

use clap::Command;
use serde::de::DeserializeOwned;
use serde::Serialize;
use serde_json::{Map, Value};

use crate::Format;

#[derive(Debug)]
pub enum CliError {
    Usage(String),
    Module(gasfee::Error),
    Io(String),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Usage(_) => 2,
            CliError::Module(_) | CliError::Io(_) => 1,
        }
    }

    pub fn kind(&self) -> &'static str {
        match self {
            CliError::Usage(_) => "usage",
            CliError::Module(_) => "module",
            CliError::Io(_) => "io",
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Usage(m) | CliError::Io(m) => f.write_str(m),
            CliError::Module(e) => write!(f, "{e}"),
        }
    }
}

impl std::error::Error for CliError {}

impl From<gasfee::Error> for CliError {
    fn from(e: gasfee::Error) -> Self {
        CliError::Module(e)
    }
}

/// Keys shared by every command; everything else in a config file belongs
/// to the command's parameter block.
const GLOBAL_KEYS: [&str; 3] = ["seed", "out", "format"];

#[derive(Debug, Default)]
pub struct ConfigFile {
    pub globals: Map<String, Value>,
    pub params: Map<String, Value>,
}

/// Reads a config file. `.toml` files are parsed as TOML, anything else as JSON.
pub fn load_file(path: &Path) -> Result<ConfigFile, CliError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::Usage(format!("cannot read config {}: {e}", path.display())))?;
    let value: Value = if path.extension().is_some_and(|e| e == "toml") {
        toml::from_str(&text).map_err(|e| CliError::Usage(format!("bad TOML in {}: {e}", path.display())))?
    } else {
        serde_json::from_str(&text).map_err(|e| CliError::Usage(format!("bad JSON in {}: {e}", path.display())))?
    };
    let Value::Object(mut params) = value else {
        return Err(CliError::Usage(format!("config {} must be a table/object", path.display())));
    };
    let mut globals = Map::new();
    for key in GLOBAL_KEYS {
        if let Some(v) = params.remove(key) {
            globals.insert(key.to_string(), v);
        }
    }
    Ok(ConfigFile { globals, params })
}

#[derive(Debug, Clone)]
pub struct Globals {
    pub seed: u64,
    pub out: Option<PathBuf>,
    pub format: Option<Format>,
}

impl Globals {
    pub fn resolve(
        seed: Option<u64>,
        out: Option<PathBuf>,
        format: Option<Format>,
        file: Option<&ConfigFile>,
    ) -> Result<Self, CliError> {
        let mut g = Globals { seed: seed.unwrap_or(0), out, format };
        let Some(file) = file else { return Ok(g) };
        if let Some(v) = file.globals.get("seed") {
            let s: u64 = typed("seed", v)?;
            if seed.is_some_and(|f| f != s) {
                log::warn!("config file overrides --seed ({} -> {s})", g.seed);
            }
            g.seed = s;
        }
        if let Some(v) = file.globals.get("out") {
            let o: PathBuf = typed("out", v)?;
            if g.out.as_ref().is_some_and(|f| *f != o) {
                log::warn!("config file overrides --out");
            }
            g.out = Some(o);
        }
        if let Some(v) = file.globals.get("format") {
            let f: Format = typed("format", v)?;
            if g.format.is_some_and(|x| x != f) {
                log::warn!("config file overrides --format");
            }
            g.format = Some(f);
        }
        Ok(g)
    }
}

fn typed<T: DeserializeOwned>(key: &str, v: &Value) -> Result<T, CliError> {
    serde_json::from_value(v.clone()).map_err(|e| CliError::Usage(format!("config key `{key}`: {e}")))
}

/// Parameter names accepted by `command`: its long flags, as snake_case.
pub fn param_names(cli: &Command, command: &str) -> BTreeSet<String> {
    cli.find_subcommand(command)
        .map(|sub| {
            sub.get_arguments()
                .filter(|a| !a.is_global_set() && a.get_long().is_some())
                .map(|a| a.get_id().to_string())
                .filter(|id| id != "help")
                .collect()
        })
        .unwrap_or_default()
}

/// Flags overlaid with the config file's parameter block. The file wins; a
/// conflicting flag is reported with a warning. Unknown keys are usage errors.
pub fn merge<T: Serialize + DeserializeOwned>(
    flags: &T,
    file: &Map<String, Value>,
    schema: &BTreeSet<String>,
) -> Result<T, CliError> {
    let Value::Object(mut merged) = serde_json::to_value(flags).expect("flag structs serialize") else {
        unreachable!("flag structs serialize to objects")
    };
    merged.retain(|_, v| !v.is_null());
    for (key, value) in file {
        if !schema.contains(key) {
            return Err(CliError::Usage(format!("unknown config key `{key}`")));
        }
        if merged.get(key).is_some_and(|flag| flag != value) {
            log::warn!("config file overrides --{}", key.replace('_', "-"));
        }
        merged.insert(key.clone(), value.clone());
    }
    serde_json::from_value(Value::Object(merged)).map_err(|e| CliError::Usage(format!("invalid parameters: {e}")))
}

/// Machine-readable parameter listing for one command or all of them.
pub fn describe(cli: &Command, only: Option<&str>) -> String {
    let globals: Vec<Value> = cli
        .get_arguments()
        .filter(|a| a.get_long().is_some() && a.get_id() != "describe" && a.get_id() != "config")
        .map(arg_entry)
        .collect();
    let mut commands = Map::new();
    for sub in cli.get_subcommands().filter(|s| only.is_none_or(|o| o == s.get_name())) {
        let params: Vec<Value> = sub
            .get_arguments()
            .filter(|a| !a.is_global_set() && a.get_long().is_some() && a.get_id() != "help")
            .map(arg_entry)
            .collect();
        commands.insert(
            sub.get_name().to_string(),
            serde_json::json!({
                "about": sub.get_about().map(|s| s.to_string()).unwrap_or_default(),
                "params": params,
            }),
        );
    }
    let doc = serde_json::json!({
        "version": env!("CARGO_PKG_VERSION"),
        "globals": globals,
        "commands": commands,
    });
    serde_json::to_string_pretty(&doc).expect("describe serializes")
}

fn arg_entry(a: &clap::Arg) -> Value {
    let choices: Vec<String> = a.get_possible_values().iter().map(|p| p.get_name().to_string()).collect();
    serde_json::json!({
        "name": a.get_id().to_string(),
        "flag": format!("--{}", a.get_long().unwrap_or_default()),
        "help": a.get_help().map(|s| s.to_string()).unwrap_or_default(),
        "choices": choices,
    })
}
