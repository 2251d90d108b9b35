use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};
use serde_json::Value;
use sha2::{Digest, Sha256};

use crate::args::ReplayArgs;
use crate::commands::{execute, RunFiles};
use crate::{CliError, EXIT_NUMERIC};

pub const MANIFEST_FILE: &str = "manifest.json";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FileDigest {
    pub path: String,
    pub sha256: String,
}

/// Everything needed to rerun a command: the merged arguments, the tool
/// version and checksums of what was read and written.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Manifest {
    pub tool: String,
    pub version: String,
    pub command: String,
    pub seed: Option<u64>,
    pub args: Value,
    pub inputs: Vec<FileDigest>,
    pub outputs: Vec<FileDigest>,
}

fn sha256_file(path: &Path) -> Result<String, CliError> {
    let bytes = fs::read(path).map_err(|e| CliError::data(format!("{}: {e}", path.display())))?;
    Ok(hex::encode(Sha256::digest(&bytes)))
}

fn digests(files: &RunFiles) -> Result<(Vec<FileDigest>, Vec<FileDigest>), CliError> {
    let inputs = files
        .inputs
        .iter()
        .map(|p| {
            Ok(FileDigest {
                path: p.display().to_string(),
                sha256: sha256_file(p)?,
            })
        })
        .collect::<Result<_, CliError>>()?;
    let outputs = files
        .outputs
        .iter()
        .map(|p| {
            Ok(FileDigest {
                path: p.display().to_string(),
                sha256: sha256_file(&files.out.join(p))?,
            })
        })
        .collect::<Result<_, CliError>>()?;
    Ok((inputs, outputs))
}

pub fn write(command: &str, args: Value, files: &RunFiles) -> Result<Manifest, CliError> {
    let (inputs, outputs) = digests(files)?;
    let manifest = Manifest {
        tool: env!("CARGO_PKG_NAME").to_string(),
        version: env!("CARGO_PKG_VERSION").to_string(),
        command: command.to_string(),
        // commands that take a seed default it to 0
        seed: args.get("seed").map(|v| v.as_u64().unwrap_or(0)),
        args,
        inputs,
        outputs,
    };
    loudclass::harness::write_json(&files.out.join(MANIFEST_FILE), &manifest)?;
    Ok(manifest)
}

/// Reruns the recorded command into a new directory and checks that every
/// output matches its recorded checksum.
pub fn replay(a: &ReplayArgs) -> Result<(), CliError> {
    let text = fs::read_to_string(&a.manifest)
        .map_err(|e| CliError::data(format!("{}: {e}", a.manifest.display())))?;
    let recorded: Manifest =
        serde_json::from_str(&text).map_err(|e| CliError::data(format!("{}: {e}", a.manifest.display())))?;
    if recorded.version != env!("CARGO_PKG_VERSION") {
        return Err(CliError::data(format!(
            "manifest was written by version {}, this is {}",
            recorded.version,
            env!("CARGO_PKG_VERSION")
        )));
    }
    for input in &recorded.inputs {
        let now = sha256_file(Path::new(&input.path))?;
        if now != input.sha256 {
            return Err(CliError::data(format!("input {} changed since the manifest was written", input.path)));
        }
    }
    let mut args = recorded.args.clone();
    args["out"] = Value::String(a.out.display().to_string());
    let files = execute(&recorded.command, &args)?;
    let replayed = write(&recorded.command, args, &files)?;
    let differing: Vec<&str> = recorded
        .outputs
        .iter()
        .filter(|o| !replayed.outputs.contains(o))
        .map(|o| o.path.as_str())
        .collect();
    if !differing.is_empty() || replayed.outputs.len() != recorded.outputs.len() {
        return Err(CliError {
            code: EXIT_NUMERIC,
            message: format!("replayed outputs differ from the manifest: {}", differing.join(", ")),
        });
    }
    println!("replayed {} outputs into {}, all identical", replayed.outputs.len(), a.out.display());
    Ok(())
}
