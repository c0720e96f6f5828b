use anyhow::{Context, Result};

use super::{compare_files, execute, Outputs, Report};
use crate::args::{Command, ReplayArgs};
use crate::manifest::{timestamp, RunManifest};
use crate::table::Table;
use crate::usage;

/// Subdirectory of the replay's output directory holding the re-run.
pub const RUN_DIR: &str = "run";

/// Re-runs the manifest's command into `<outdir>/run` and compares every
/// non-volatile output byte for byte.
pub(super) fn run(a: &ReplayArgs) -> Result<Report> {
    let original = RunManifest::read(&a.manifest).map_err(usage)?;
    let source_dir = a
        .manifest
        .parent()
        .map(|p| p.to_path_buf())
        .unwrap_or_default();
    let mut cmd: Command = serde_json::from_value(original.args.clone())
        .context("manifest arguments do not describe a command")
        .map_err(usage)?;
    let dir = a
        .common
        .outdir
        .clone()
        .unwrap_or_else(|| std::path::PathBuf::from("results").join("replay"));
    let run_dir = dir.join(RUN_DIR);
    if run_dir == source_dir {
        return Err(usage("the replay would overwrite the outputs it compares against"));
    }
    cmd.common_mut().outdir = Some(run_dir.clone());
    let started = timestamp();
    let rerun = execute(&cmd)?;

    let mut out = Outputs::new(dir.clone(), a.common.format)?;
    let compared = compare_files(&source_dir, &run_dir, &original.outputs);
    let mut table = Table::new(&["file", "identical"])?;
    let mut lines = Vec::new();
    for (name, same) in &compared {
        table.push(vec![name.as_str().into(), (*same).into()])?;
        lines.push(format!("{name}: {}", if *same { "identical" } else { "DIFFERS" }));
    }
    out.table("replay", &table)?;
    let differing: Vec<&str> = compared
        .iter()
        .filter(|(_, same)| !same)
        .map(|(n, _)| n.as_str())
        .collect();
    let failure = if !differing.is_empty() {
        Some(format!("outputs differ from the manifest's run: {}", differing.join(", ")))
    } else if original.outputs != rerun.manifest.outputs {
        Some("the re-run wrote a different set of outputs".into())
    } else {
        rerun.failure.clone()
    };
    let manifest = RunManifest {
        command: "replay".into(),
        version: env!("CARGO_PKG_VERSION").to_string(),
        seed: original.seed,
        started,
        finished: timestamp(),
        args: super::to_json(&Command::Replay(a.clone())),
        config: serde_json::json!({ "replayed": original.command, "source": source_dir, "run_dir": run_dir }),
        outputs: out.files,
        volatile_outputs: out.volatile,
    };
    manifest.write(&dir)?;
    Ok(Report {
        dir,
        manifest,
        summary: lines,
        failure,
    })
}
