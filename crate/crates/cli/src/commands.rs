//! The four subcommands.

use std::io::Write;
use std::path::{Path, PathBuf};

use serde::Serialize;
use streamsel::{
    cross_validate, inject_missing, load_csv, make_synthetic, process_stream, run_ablation,
    save_csv, seeds, EvalReport, SelectionResult,
};

use crate::config::{ResolvedEval, ResolvedMask, ResolvedSelect, ResolvedSynth};
use crate::CliError;

fn ensure_out_dir(dir: &Path) -> Result<(), CliError> {
    std::fs::create_dir_all(dir).map_err(|e| CliError::Io(dir.to_path_buf(), e))
}

fn write_json<T: Serialize>(path: PathBuf, value: &T) -> Result<(), CliError> {
    let mut text = serde_json::to_string_pretty(value).map_err(CliError::Json)?;
    text.push('\n');
    std::fs::write(&path, text).map_err(|e| CliError::Io(path, e))
}

fn write_resolved<T: Serialize>(out_dir: &Path, resolved: &T) -> Result<(), CliError> {
    write_json(out_dir.join("config.resolved.json"), resolved)
}

pub fn synth(resolved: &ResolvedSynth) -> Result<(), CliError> {
    ensure_out_dir(&resolved.out_dir)?;
    let (table, labels, truth) = make_synthetic(
        resolved.n,
        resolved.d,
        resolved.relevant,
        resolved.duplicates,
        resolved.noise_sigma,
        resolved.seed,
    )?;
    let csv_path = resolved.out_dir.join("data.csv");
    save_csv(&table, &labels, &csv_path)?;
    write_json(resolved.out_dir.join("truth.json"), &truth)?;
    write_resolved(&resolved.out_dir, resolved)?;
    println!(
        "{}",
        serde_json::to_string(&truth).map_err(CliError::Json)?
    );
    eprintln!(
        "wrote {} ({}x{} plus labels) and truth.json",
        csv_path.display(),
        resolved.n,
        resolved.d
    );
    Ok(())
}

pub fn mask(resolved: &ResolvedMask) -> Result<(), CliError> {
    ensure_out_dir(&resolved.out_dir)?;
    let (table, labels) = load_csv(&resolved.input, &resolved.missing_token)?;
    let masked = inject_missing(&table, resolved.zeta, seeds::derive(resolved.seed, "mask-cmd", 0))?;
    let out_path = resolved.out_dir.join("masked.csv");
    save_csv(&masked, &labels, &out_path)?;
    write_resolved(&resolved.out_dir, resolved)?;
    eprintln!(
        "wrote {} (loss rate {:.4})",
        out_path.display(),
        masked.overall_loss_rate()
    );
    Ok(())
}

/// Deterministic selection summary written by `select`.
#[derive(Serialize)]
struct SelectionSummary<'a> {
    schema_version: u32,
    n_instances: usize,
    n_features: usize,
    selected: &'a [usize],
    deferred: &'a [usize],
}

pub fn select(resolved: &ResolvedSelect) -> Result<(), CliError> {
    ensure_out_dir(&resolved.out_dir)?;
    let (table, labels) = load_csv(&resolved.input, &resolved.pipeline.missing_token)?;
    let cfg = resolved.pipeline.selector_config(resolved.seed)?;

    let table = if resolved.pipeline.zeta > 0.0 {
        inject_missing(
            &table,
            resolved.pipeline.zeta,
            seeds::derive(resolved.seed, "select-mask", 0),
        )?
    } else {
        table
    };

    let result: SelectionResult = process_stream(table.columns(), &labels, &cfg)?;

    write_json(
        resolved.out_dir.join("selected.json"),
        &SelectionSummary {
            schema_version: 1,
            n_instances: table.n_rows(),
            n_features: table.n_cols(),
            selected: &result.selected,
            deferred: &result.deferred,
        },
    )?;

    let steps_path = resolved.out_dir.join("steps.jsonl");
    let mut file = std::fs::File::create(&steps_path)
        .map_err(|e| CliError::Io(steps_path.clone(), e))?;
    for line in &result.log {
        let json = serde_json::to_string(line).map_err(CliError::Json)?;
        writeln!(file, "{json}").map_err(|e| CliError::Io(steps_path.clone(), e))?;
    }

    write_resolved(&resolved.out_dir, resolved)?;
    eprintln!(
        "selected {:?}, deferred {:?} ({} step-log lines)",
        result.selected,
        result.deferred,
        result.log.len()
    );
    Ok(())
}

fn csv_row(dataset: &str, method: &str, report: &EvalReport, seed: u64) -> String {
    format!(
        "{dataset},{method},{},{},{},{},{seed}\n",
        report.mean_accuracy,
        report.std_accuracy,
        report.mean_selected,
        report.runtime_seconds
    )
}

pub fn eval(resolved: &ResolvedEval) -> Result<(), CliError> {
    ensure_out_dir(&resolved.out_dir)?;
    let (table, labels) = load_csv(&resolved.input, &resolved.pipeline.missing_token)?;
    let sel_cfg = resolved.pipeline.selector_config(resolved.seed)?;
    let eval_cfg = resolved.eval_config(resolved.seed);
    let dataset = resolved
        .input
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "dataset".to_string());

    let mut rows = String::from("dataset,method,mean_acc,std_acc,mean_selected,runtime_s,seed\n");
    if resolved.ablation {
        let report = run_ablation(&table, &labels, &sel_cfg, &eval_cfg)?;
        write_json(resolved.out_dir.join("report.threeway.json"), &report.three_way)?;
        write_json(resolved.out_dir.join("report.twoway.json"), &report.two_way)?;
        rows.push_str(&csv_row(&dataset, "threeway", &report.three_way, resolved.seed));
        rows.push_str(&csv_row(&dataset, "twoway", &report.two_way, resolved.seed));
        eprintln!(
            "three-way accuracy {:.4} +- {:.4} | two-way accuracy {:.4} +- {:.4}",
            report.three_way.mean_accuracy,
            report.three_way.std_accuracy,
            report.two_way.mean_accuracy,
            report.two_way.std_accuracy
        );
    } else {
        let method = if resolved.pipeline.two_way { "twoway" } else { "threeway" };
        let report = cross_validate(&table, &labels, &sel_cfg, &eval_cfg)?;
        write_json(resolved.out_dir.join("report.json"), &report)?;
        rows.push_str(&csv_row(&dataset, method, &report, resolved.seed));
        eprintln!(
            "accuracy {:.4} +- {:.4}, mean selected {:.2}, {:.2}s",
            report.mean_accuracy,
            report.std_accuracy,
            report.mean_selected,
            report.runtime_seconds
        );
    }
    let csv_path = resolved.out_dir.join("report.csv");
    std::fs::write(&csv_path, rows).map_err(|e| CliError::Io(csv_path, e))?;
    write_resolved(&resolved.out_dir, resolved)?;
    Ok(())
}
