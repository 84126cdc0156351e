//! Layering of JSON config files under command-line flags.

use std::fmt;
use std::path::{Path, PathBuf};

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};

/// Failure classes, each with its own exit code.
#[derive(Debug)]
pub enum Failure {
    Usage(String),
    Numerical(String),
    Io(String),
}

impl Failure {
    pub fn exit_code(&self) -> i32 {
        match self {
            Failure::Io(_) => 1,
            Failure::Usage(_) => 2,
            Failure::Numerical(_) => 3,
        }
    }
}

impl fmt::Display for Failure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Failure::Usage(m) => write!(f, "usage error: {m}"),
            Failure::Numerical(m) => write!(f, "numerical failure: {m}"),
            Failure::Io(m) => write!(f, "i/o error: {m}"),
        }
    }
}

impl From<laserclock::Error> for Failure {
    fn from(e: laserclock::Error) -> Self {
        use laserclock::Error::*;
        let module = match &e {
            InvalidParameter { .. } => return Failure::Usage(e.to_string()),
            Unnormalized { .. } => "fock",
            TruncationTooSmall { .. } | SingularSolve(_) | NonExponentialDecay { .. } => "laserdyn",
            QuadratureNotConverged { .. } | InsufficientWindow { .. } => "channel",
        };
        Failure::Numerical(format!("{module} check failed: {e}"))
    }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Self {
        Failure::Io(e.to_string())
    }
}

impl From<csv::Error> for Failure {
    fn from(e: csv::Error) -> Self {
        Failure::Io(e.to_string())
    }
}

pub fn usage(msg: impl Into<String>) -> Failure {
    Failure::Usage(msg.into())
}

pub fn required<T>(value: Option<T>, flag: &str) -> Result<T, Failure> {
    value.ok_or_else(|| usage(format!("missing required --{flag}")))
}

/// Resolves a command's configuration: defaults, then the config file, then
/// flags. Returns the resolved values and the output path.
///
/// The config file is either a flat object keyed by flag names or a sidecar
/// written by a previous run.
pub fn resolve<L: Serialize, R: DeserializeOwned>(
    command: &str,
    layer: &L,
    config: Option<&Path>,
    output: Option<PathBuf>,
) -> Result<(R, Option<PathBuf>), Failure> {
    let mut merged = match config {
        Some(path) => load(command, path)?,
        None => Map::new(),
    };
    let file_output = match merged.remove("output") {
        Some(Value::String(s)) => Some(PathBuf::from(s)),
        Some(Value::Null) | None => None,
        Some(other) => return Err(usage(format!("`output` must be a string, got {other}"))),
    };
    let flags = serde_json::to_value(layer).map_err(|e| usage(e.to_string()))?;
    if let Value::Object(flags) = flags {
        for (k, v) in flags {
            if !v.is_null() {
                merged.insert(k, v);
            }
        }
    }
    let resolved = serde_json::from_value(Value::Object(merged)).map_err(|e| usage(format!("config: {e}")))?;
    Ok((resolved, output.or(file_output)))
}

fn load(command: &str, path: &Path) -> Result<Map<String, Value>, Failure> {
    let text = std::fs::read_to_string(path).map_err(|e| usage(format!("{}: {e}", path.display())))?;
    let value: Value = serde_json::from_str(&text).map_err(|e| usage(format!("{}: {e}", path.display())))?;
    let Value::Object(mut map) = value else {
        return Err(usage(format!("{}: expected a JSON object", path.display())));
    };
    if let (Some(Value::String(cmd)), Some(Value::Object(_))) = (map.get("command"), map.get("config")) {
        if cmd != command {
            return Err(usage(format!(
                "{} was written by `{cmd}`, not `{command}`",
                path.display()
            )));
        }
        let Some(Value::Object(inner)) = map.remove("config") else {
            unreachable!()
        };
        return Ok(inner);
    }
    Ok(map)
}

/// Step size given as `auto` or seconds.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(try_from = "DtRepr", into = "DtRepr")]
pub enum Dt {
    #[default]
    Auto,
    Seconds(f64),
}

#[derive(Serialize, Deserialize)]
#[serde(untagged)]
enum DtRepr {
    Num(f64),
    Text(String),
}

impl TryFrom<DtRepr> for Dt {
    type Error = String;

    fn try_from(r: DtRepr) -> Result<Self, String> {
        match r {
            DtRepr::Num(x) => Ok(Dt::Seconds(x)),
            DtRepr::Text(s) => s.parse(),
        }
    }
}

impl From<Dt> for DtRepr {
    fn from(dt: Dt) -> Self {
        match dt {
            Dt::Auto => DtRepr::Text("auto".into()),
            Dt::Seconds(x) => DtRepr::Num(x),
        }
    }
}

impl std::str::FromStr for Dt {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        if s.eq_ignore_ascii_case("auto") {
            return Ok(Dt::Auto);
        }
        s.parse::<f64>()
            .map(Dt::Seconds)
            .map_err(|_| format!("expected `auto` or a step in seconds, got `{s}`"))
    }
}
