use std::fs;
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use anyhow::{Context, Result};
use serde::{Deserialize, Serialize};
use serde_json::Value;
use sha2::{Digest, Sha256};

use nblab_core::export::LinePlot;

pub const VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub tool: String,
    pub version: String,
    pub subcommand: String,
    /// SHA-256 of the resolved parameters in compact JSON.
    pub config_hash: String,
    pub parameters: Value,
    pub outputs: Vec<String>,
}

pub fn config_hash(parameters: &Value) -> String {
    let bytes = serde_json::to_vec(parameters).expect("JSON values serialize");
    Sha256::digest(&bytes).iter().map(|b| format!("{b:02x}")).collect()
}

/// Collects the artifacts of one run in an output directory.
pub struct Outputs {
    dir: PathBuf,
    reproducible: bool,
    written: Vec<String>,
}

impl Outputs {
    pub fn new(dir: &Path, reproducible: bool) -> Result<Self> {
        fs::create_dir_all(dir).with_context(|| format!("cannot create output directory {}", dir.display()))?;
        Ok(Outputs {
            dir: dir.to_path_buf(),
            reproducible,
            written: Vec::new(),
        })
    }

    pub fn text(&mut self, name: &str, body: &str) -> Result<()> {
        let path = self.dir.join(name);
        fs::write(&path, body).with_context(|| format!("cannot write {}", path.display()))?;
        self.written.push(name.to_string());
        Ok(())
    }

    pub fn json<T: Serialize>(&mut self, name: &str, value: &T) -> Result<()> {
        let mut body = serde_json::to_string_pretty(value)?;
        body.push('\n');
        self.text(name, &body)
    }

    /// Writes an SVG, stamped with the generation time unless the run is
    /// reproducible.
    pub fn svg(&mut self, name: &str, plot: &LinePlot) -> Result<()> {
        let stamp = (!self.reproducible).then(|| {
            let secs = SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_secs()).unwrap_or(0);
            format!("generated by nblab {VERSION} at unix time {secs}")
        });
        self.text(name, &plot.to_svg(stamp.as_deref()))
    }

    pub fn finish(mut self, subcommand: &str, parameters: Value) -> Result<RunManifest> {
        let manifest = RunManifest {
            tool: "nblab".into(),
            version: VERSION.into(),
            subcommand: subcommand.into(),
            config_hash: config_hash(&parameters),
            parameters,
            outputs: self.written.clone(),
        };
        self.json("manifest.json", &manifest)?;
        Ok(manifest)
    }
}
