//! Run manifests and configuration files.
//!
//! A configuration file uses the same layout as the `manifest` object that
//! every report embeds, so a report can be passed back with `--config` to
//! repeat a run. Every section is optional; explicit flags win over file
//! values.

use std::collections::BTreeMap;
use std::env;
use std::fs;
use std::path::{Path, PathBuf};

use extremal::data::GenConfig;
use extremal::extremal::{ExtremalConfig, InitStrategy};
use extremal::losses::ConstraintFile;
use extremal::nnet::{Activation, MODEL_FORMAT_VERSION};
use extremal::optim::TrainConfig;
use serde::{Deserialize, Serialize};

use crate::CliError;

pub const MANIFEST_VERSION: u32 = 1;

/// Environment variable naming the directory for outputs without `--out`.
pub const OUT_DIR_VAR: &str = "EXTREMAL_OUT_DIR";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReproduceSettings {
    pub seeds: Vec<u64>,
    pub quick: bool,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RunManifest {
    pub tool: String,
    pub command: String,
    pub manifest_version: u32,
    pub model_format_version: u32,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub generation: Option<GenConfig>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub architecture: Option<Vec<(usize, Activation)>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub init_seed: Option<u64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub training: Option<TrainConfig>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub constraints: Option<ConstraintFile>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub extremal: Option<ExtremalConfig>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub init: Option<InitStrategy>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub reproduce: Option<ReproduceSettings>,
    pub inputs: BTreeMap<String, PathBuf>,
    pub outputs: BTreeMap<String, PathBuf>,
}

impl RunManifest {
    /// Empty manifest stamped with the tool version and command name.
    pub fn for_command(command: &str) -> Self {
        Self {
            tool: format!("extremal {}", env!("CARGO_PKG_VERSION")),
            command: command.into(),
            manifest_version: MANIFEST_VERSION,
            model_format_version: MODEL_FORMAT_VERSION,
            ..Self::default()
        }
    }

    /// Reads a configuration file or a report carrying a `manifest` object.
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = fs::read_to_string(path).map_err(|e| extremal::Error::Io {
            path: path.to_path_buf(),
            source: e,
        })?;
        let mut value: serde_json::Value =
            serde_json::from_str(&text).map_err(|e| parse_error("", e))?;
        if let Some(inner) = value.get_mut("manifest") {
            value = inner.take();
        }
        serde_json::from_value(value).map_err(|e| parse_error("manifest", e))
    }
}

fn parse_error(field: &str, e: serde_json::Error) -> CliError {
    CliError::Core(extremal::Error::Parse {
        field: field.into(),
        message: e.to_string(),
    })
}

/// Output location: the flag, else the path recorded in a loaded manifest,
/// else `name` inside `$EXTREMAL_OUT_DIR` or the working directory.
pub fn output_path(flag: Option<&PathBuf>, recorded: Option<&PathBuf>, name: &str) -> PathBuf {
    if let Some(p) = flag.or(recorded) {
        return p.clone();
    }
    match env::var_os(OUT_DIR_VAR) {
        Some(dir) if !dir.is_empty() => PathBuf::from(dir).join(name),
        _ => PathBuf::from(name),
    }
}

/// `dir/model.json` -> `dir/model.report.json`.
pub fn report_path(main: &Path) -> PathBuf {
    let stem = main
        .file_stem()
        .map_or_else(|| "run".into(), |s| s.to_string_lossy().into_owned());
    main.with_file_name(format!("{stem}.report.json"))
}

pub fn ensure_parent(path: &Path) -> Result<(), CliError> {
    match path.parent() {
        Some(dir) if !dir.as_os_str().is_empty() => fs::create_dir_all(dir).map_err(|e| {
            CliError::Core(extremal::Error::Io {
                path: dir.to_path_buf(),
                source: e,
            })
        }),
        _ => Ok(()),
    }
}

/// Writes `{"manifest": ..., <body fields>}` as pretty JSON.
pub fn write_report(
    path: &Path,
    manifest: &RunManifest,
    body: serde_json::Value,
) -> Result<(), CliError> {
    let mut doc = serde_json::Map::new();
    doc.insert(
        "manifest".into(),
        serde_json::to_value(manifest).expect("manifest serializes"),
    );
    if let serde_json::Value::Object(fields) = body {
        doc.extend(fields);
    }
    let mut text = serde_json::to_string_pretty(&doc).expect("report serializes");
    text.push('\n');
    write_text(path, &text)
}

pub fn write_text(path: &Path, text: &str) -> Result<(), CliError> {
    ensure_parent(path)?;
    fs::write(path, text).map_err(|e| {
        CliError::Core(extremal::Error::Io {
            path: path.to_path_buf(),
            source: e,
        })
    })
}
