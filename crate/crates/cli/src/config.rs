//! Flag/config-file merging and run manifests.

use std::fs;
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use serde::de::DeserializeOwned;
use serde::Serialize;
use serde_json::{json, Map, Value};

use crate::Failure;

/// Reads a JSON object keyed by flag names. A previous run's manifest is
/// accepted too, in which case its resolved config is used.
pub fn load_config_file(path: &Path) -> Result<Map<String, Value>, Failure> {
    let text = fs::read_to_string(path).map_err(|e| Failure::config(format!("{}: {e}", path.display())))?;
    let value: Value =
        serde_json::from_str(&text).map_err(|e| Failure::config(format!("{}: {e}", path.display())))?;
    let value = match value {
        Value::Object(mut m) if m.contains_key("resolved_config") => m.remove("resolved_config").unwrap(),
        v => v,
    };
    match value {
        Value::Object(m) => Ok(m),
        _ => Err(Failure::config(format!("{}: expected a JSON object", path.display()))),
    }
}

/// Overlays explicitly given flags on top of the config file.
pub fn merge<T: Serialize + DeserializeOwned + Default>(flags: &T, config: Option<&Path>) -> Result<T, Failure> {
    let mut merged = match config {
        Some(p) => load_config_file(p)?,
        None => Map::new(),
    };
    merged.remove("config");
    let Value::Object(known) = serde_json::to_value(T::default()).map_err(|e| Failure::config(e.to_string()))? else {
        unreachable!("flag structs serialize to objects")
    };
    if let Some(k) = merged.keys().find(|k| !known.contains_key(*k)) {
        return Err(Failure::config(format!("unknown config key `{k}`")));
    }
    let Value::Object(given) = serde_json::to_value(flags).map_err(|e| Failure::config(e.to_string()))? else {
        unreachable!("flag structs serialize to objects")
    };
    merged.extend(given.into_iter().filter(|(_, v)| !v.is_null()));
    serde_json::from_value(Value::Object(merged)).map_err(|e| Failure::config(format!("invalid config: {e}")))
}

fn unix_seconds() -> f64 {
    SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_secs_f64()).unwrap_or(0.0)
}

pub struct Manifest {
    path: PathBuf,
    body: Value,
    started: f64,
}

impl Manifest {
    /// Writes `manifest.json` with status `running`.
    pub fn start(
        out: &Path,
        command: &str,
        config_file: Option<&Path>,
        resolved: &impl Serialize,
        digest: Option<String>,
    ) -> Result<Self, Failure> {
        fs::create_dir_all(out).map_err(|e| Failure::runtime(format!("{}: {e}", out.display())))?;
        let started = unix_seconds();
        let body = json!({
            "tool": env!("CARGO_PKG_NAME"),
            "version": env!("CARGO_PKG_VERSION"),
            "command": command,
            "config_file": config_file.map(|p| p.display().to_string()),
            "resolved_config": resolved,
            "config_digest": digest,
            "out": out.display().to_string(),
            "status": "running",
            "started_unix": started,
        });
        let m = Self {
            path: out.join("manifest.json"),
            body,
            started,
        };
        m.write()?;
        Ok(m)
    }

    fn write(&self) -> Result<(), Failure> {
        let text = serde_json::to_string_pretty(&self.body).expect("manifest serializes");
        fs::write(&self.path, text + "\n").map_err(|e| Failure::runtime(format!("{}: {e}", self.path.display())))
    }

    pub fn finish(mut self, status: &str, outputs: &[&str]) -> Result<(), Failure> {
        let now = unix_seconds();
        self.body["status"] = json!(status);
        self.body["outputs"] = json!(outputs);
        self.body["finished_unix"] = json!(now);
        self.body["wall_seconds"] = json!(now - self.started);
        self.write()
    }
}
