//! Pipelines behind the `wki` binary.

pub mod config;
pub mod error;
pub mod pipelines;

use std::io::Write;
use std::path::PathBuf;

use serde_json::{json, Value};

pub use config::{Pipeline, RunConfig};
pub use error::CliError;
use pipelines::Output;

/// Settings a subcommand's own flags impose on top of the config file and
/// `--set` overrides.
#[derive(Debug, Default, Clone)]
pub struct FlagOverrides {
    pub output: Option<PathBuf>,
    pub data: Option<PathBuf>,
    pub lambda_dump: bool,
    pub akns_dump: bool,
    pub convergence: bool,
}

pub fn resolve(
    pipeline: Pipeline,
    config: Option<&std::path::Path>,
    sets: &[String],
    flags: &FlagOverrides,
) -> Result<RunConfig, CliError> {
    let mut cfg = config::load(config, sets)?;
    cfg.pipeline = Some(pipeline);
    if let Some(o) = &flags.output {
        cfg.output = o.clone();
    }
    if let Some(d) = &flags.data {
        cfg.inverse.data = Some(d.clone());
    }
    cfg.dump.lambda |= flags.lambda_dump;
    cfg.dump.akns |= flags.akns_dump;
    cfg.roundtrip.convergence |= flags.convergence;
    cfg.check()?;
    Ok(cfg)
}

fn manifest(cfg: &RunConfig, status: &str, diagnostics: Value, outputs: &[String]) -> Value {
    json!({
        "status": status,
        "pipeline": cfg.pipeline.map(Pipeline::name),
        "versions": { "wki-core": wki_core::VERSION, "wki-cli": env!("CARGO_PKG_VERSION") },
        "config": cfg,
        "diagnostics": diagnostics,
        "outputs": outputs,
    })
}

/// Runs a resolved configuration and returns the process exit code.
///
/// Every run leaves a `manifest.json` in the output directory; failures also
/// leave `error.json` and print the same record as one JSON line on stderr.
pub fn execute(cfg: &RunConfig) -> i32 {
    let mut out = match Output::new(&cfg.output) {
        Ok(o) => o,
        Err(e) => return report_failure(None, cfg, &e),
    };
    match pipelines::run(cfg, &mut out) {
        Ok(diag) => {
            let mut files = out.files.clone();
            files.push("manifest.json".into());
            match out.json("manifest.json", &manifest(cfg, "ok", diag, &files)) {
                Ok(()) => 0,
                Err(e) => report_failure(None, cfg, &e),
            }
        }
        Err(e) => report_failure(Some(&mut out), cfg, &e),
    }
}

fn report_failure(out: Option<&mut Output>, cfg: &RunConfig, e: &CliError) -> i32 {
    let record = e.record();
    log::error!("{e}");
    if let Some(out) = out {
        let mut files = out.files.clone();
        files.extend(["error.json".to_string(), "manifest.json".to_string()]);
        let _ = out.json("error.json", &record);
        let _ = out.json(
            "manifest.json",
            &manifest(cfg, "failed", json!({ "error": record }), &files),
        );
    }
    let mut stderr = std::io::stderr().lock();
    let _ = writeln!(stderr, "{record}");
    e.exit_code()
}
