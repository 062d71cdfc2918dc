//! Running a configuration and writing its files: one CSV per report
//! table, `report.json` with the summary and verdicts, and `manifest.json`
//! written last, exactly once per run.
//!
//! Everything except the manifest depends only on the configuration, so
//! reruns with any worker count give identical bytes.

use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::{Deserialize, Serialize};
use serde_json::json;
use sha2::{Digest, Sha256};
use zmix_core::ensemble::with_workers;

use crate::config::ExperimentConfig;
use crate::experiments::{execute, Verdict};

pub const EXIT_PASS: i32 = 0;
pub const EXIT_ERROR: i32 = 1;
pub const EXIT_VERDICT: i32 = 2;

/// Default output root when neither the config, `--out` nor the
/// environment names one.
pub const DEFAULT_OUTPUT_ROOT: &str = "zmix-out";

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct FileEntry {
    pub path: String,
    pub bytes: u64,
    pub sha256: String,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ManifestVerdict {
    pub name: String,
    pub pass: bool,
    pub detail: String,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct RunManifest {
    pub config_name: Option<String>,
    pub config_hash: Option<String>,
    pub toolkit_version: String,
    pub workers: usize,
    pub wall_clock_seconds: f64,
    pub verdicts: Vec<ManifestVerdict>,
    pub files: Vec<FileEntry>,
    pub error: Option<String>,
    pub exit_code: i32,
}

/// Command-line overrides.
#[derive(Clone, Debug, Default)]
pub struct RunOptions {
    pub seed: Option<u64>,
    pub workers: Option<usize>,
    pub out: Option<PathBuf>,
}

#[derive(Clone, Debug)]
pub struct RunResult {
    pub dir: PathBuf,
    pub manifest: RunManifest,
}

impl RunResult {
    pub fn exit_code(&self) -> i32 {
        self.manifest.exit_code
    }
}

fn default_workers() -> usize {
    std::thread::available_parallelism().map_or(1, |n| n.get())
}

fn write_file(
    dir: &Path,
    name: &str,
    bytes: &[u8],
    files: &mut Vec<FileEntry>,
) -> std::io::Result<()> {
    std::fs::write(dir.join(name), bytes)?;
    files.push(FileEntry {
        path: name.to_string(),
        bytes: bytes.len() as u64,
        sha256: hex::encode(Sha256::digest(bytes)),
    });
    Ok(())
}

fn write_manifest(dir: &Path, m: &RunManifest) -> std::io::Result<()> {
    std::fs::create_dir_all(dir)?;
    let text = serde_json::to_string_pretty(m).expect("manifest serializes");
    std::fs::write(dir.join("manifest.json"), text + "\n")
}

/// Output root: `--out`, then the config, then `$ZMIX_OUT` (resolved by
/// the caller into `env_root`), then [`DEFAULT_OUTPUT_ROOT`].
fn output_root(cfg_out: Option<&str>, opts: &RunOptions, env_root: Option<&Path>) -> PathBuf {
    opts.out
        .clone()
        .or_else(|| cfg_out.map(PathBuf::from))
        .or_else(|| env_root.map(Path::to_path_buf))
        .unwrap_or_else(|| PathBuf::from(DEFAULT_OUTPUT_ROOT))
}

/// Apply overrides, run, and write every output file.
pub fn run_config(cfg: &ExperimentConfig, opts: &RunOptions, env_root: Option<&Path>) -> RunResult {
    let mut cfg = cfg.clone();
    if let Some(s) = opts.seed {
        cfg.seed = s;
    }
    if let Some(w) = opts.workers {
        cfg.workers = Some(w);
    }
    let dir = output_root(cfg.output.as_deref(), opts, env_root).join(&cfg.name);
    let workers = cfg.workers.unwrap_or_else(default_workers);
    let mut manifest = RunManifest {
        config_name: Some(cfg.name.clone()),
        config_hash: Some(cfg.hash()),
        toolkit_version: env!("CARGO_PKG_VERSION").to_string(),
        workers,
        wall_clock_seconds: 0.0,
        verdicts: vec![],
        files: vec![],
        error: None,
        exit_code: EXIT_ERROR,
    };
    let start = Instant::now();
    let result = cfg
        .validate()
        .and_then(|_| with_workers(workers, || execute(&cfg)));
    manifest.wall_clock_seconds = start.elapsed().as_secs_f64();
    match result {
        Err(e) => manifest.error = Some(e.to_string()),
        Ok(outcome) => match write_outputs(
            &cfg,
            &dir,
            &outcome.tables,
            &outcome.summary,
            &outcome.verdicts,
        ) {
            Err(e) => manifest.error = Some(format!("writing outputs: {e}")),
            Ok(files) => {
                manifest.files = files;
                manifest.verdicts = outcome
                    .verdicts
                    .iter()
                    .map(|v| ManifestVerdict {
                        name: v.name.clone(),
                        pass: v.pass,
                        detail: v.detail.clone(),
                    })
                    .collect();
                manifest.exit_code = if outcome.verdicts.iter().all(|v| v.pass) {
                    EXIT_PASS
                } else {
                    EXIT_VERDICT
                };
            }
        },
    }
    if let Err(e) = write_manifest(&dir, &manifest) {
        manifest.error = Some(format!("writing manifest: {e}"));
        manifest.exit_code = EXIT_ERROR;
    }
    RunResult { dir, manifest }
}

fn write_outputs(
    cfg: &ExperimentConfig,
    dir: &Path,
    tables: &[(String, zmix_core::report::CsvTable)],
    summary: &serde_json::Value,
    verdicts: &[Verdict],
) -> std::io::Result<Vec<FileEntry>> {
    std::fs::create_dir_all(dir)?;
    let hash = cfg.hash();
    let mut files = vec![];
    for (stem, t) in tables {
        let mut t = t.clone();
        let mut comments = vec![
            format!("config: {}", cfg.name),
            format!("config_hash: {hash}"),
            format!("seed: {}", cfg.seed),
        ];
        comments.append(&mut t.comments);
        t.comments = comments;
        write_file(
            dir,
            &format!("{stem}.csv"),
            t.render().as_bytes(),
            &mut files,
        )?;
    }
    let mut canonical = cfg.clone();
    canonical.workers = None;
    canonical.output = None;
    let report = json!({
        "name": cfg.name,
        "config_hash": hash,
        "config": canonical,
        "system": cfg.system.kind(),
        "experiment": cfg.experiment.kind(),
        "summary": summary,
        "verdicts": verdicts,
        "pass": verdicts.iter().all(|v| v.pass),
    });
    let text = serde_json::to_string_pretty(&report).expect("report serializes") + "\n";
    write_file(dir, "report.json", text.as_bytes(), &mut files)?;
    Ok(files)
}

/// Read, validate and run a config file. A file that cannot be read or
/// fails validation produces only an error manifest, in
/// `<root>/<file stem>`.
pub fn run_path(path: &Path, opts: &RunOptions, env_root: Option<&Path>) -> RunResult {
    let parsed = std::fs::read_to_string(path)
        .map_err(|e| format!("reading {}: {e}", path.display()))
        .and_then(|text| ExperimentConfig::from_json(&text).map_err(|e| e.to_string()));
    match parsed {
        Ok(cfg) => run_config(&cfg, opts, env_root),
        Err(error) => {
            let stem = path
                .file_stem()
                .map_or("config".into(), |s| s.to_string_lossy().into_owned());
            let dir = output_root(None, opts, env_root).join(stem);
            let mut manifest = RunManifest {
                config_name: None,
                config_hash: None,
                toolkit_version: env!("CARGO_PKG_VERSION").to_string(),
                workers: opts.workers.unwrap_or_else(default_workers),
                wall_clock_seconds: 0.0,
                verdicts: vec![],
                files: vec![],
                error: Some(error),
                exit_code: EXIT_ERROR,
            };
            if let Err(e) = write_manifest(&dir, &manifest) {
                manifest.error = Some(format!(
                    "{}; writing manifest: {e}",
                    manifest.error.unwrap_or_default()
                ));
            }
            RunResult { dir, manifest }
        }
    }
}
