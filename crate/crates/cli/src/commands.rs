use std::path::{Path, PathBuf};

use annsel::data::{self, column_moments, load_csv, load_inputs_csv, split, Dataset, INPUT_NAMES, MIN_SYNTH_ROWS};
use annsel::network::model_file::ModelDocument;
use annsel::numerics::derive_seed;
use annsel::selection::{
    compare_modes, evaluate_fit, prepare, sweep_with_workers, ComparisonTemplate, RegressionFit,
    SweepMode, SweepReport, SweepSpec,
};
use annsel::training::{train, StopReason};
use annsel::{Architecture, Network, SplitFractions};
use serde_json::{json, Value};

use crate::args::{parse_combos, parse_layers, CompareArgs, GenDataArgs, PredictArgs, SweepArgs, TrainArgs};
use crate::error::CliError;
use crate::manifest::ManifestBuilder;

/// Directory and file name of a file-valued `--out`.
fn split_out(path: &Path) -> Result<(PathBuf, String), CliError> {
    let name = path
        .file_name()
        .ok_or_else(|| CliError::usage(format!("--out {} is not a file path", path.display())))?
        .to_string_lossy()
        .into_owned();
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p.to_path_buf(),
        _ => PathBuf::from("."),
    };
    Ok((dir, name))
}

fn load_dataset(m: &mut ManifestBuilder, path: &Path) -> Result<Dataset, CliError> {
    let bytes = m.read_input(path)?;
    load_csv(bytes.as_slice()).map_err(|e| {
        let mut err = CliError::from(e);
        err.message = format!("{}: {}", path.display(), err.message);
        err
    })
}

fn csv_bytes(f: impl FnOnce(&mut Vec<u8>) -> Result<(), CliError>) -> Result<Vec<u8>, CliError> {
    let mut buf = Vec::new();
    f(&mut buf)?;
    Ok(buf)
}

fn fit_summary(fit: &RegressionFit) -> Value {
    let splits: Vec<Value> = fit
        .splits
        .iter()
        .map(|s| {
            let per_output: serde_json::Map<String, Value> = fit
                .output_names
                .iter()
                .zip(&s.r_squared)
                .map(|(n, r)| (n.clone(), json!(r)))
                .collect();
            json!({
                "split": s.split,
                "samples": s.samples,
                "mse": s.mse,
                "r_squared": per_output,
                "pooled_r_squared": s.pooled_r_squared,
            })
        })
        .collect();
    json!({ "splits": splits, "overall_r_squared": fit.overall_r_squared })
}

pub fn gen_data(args: &GenDataArgs) -> Result<Value, CliError> {
    if args.rows < MIN_SYNTH_ROWS {
        return Err(CliError::usage(format!(
            "--rows must be at least {MIN_SYNTH_ROWS} (got {})",
            args.rows
        )));
    }
    let (dir, name) = split_out(&args.out)?;
    let mut m = ManifestBuilder::start("gen-data", args, Some(args.seed), &dir);
    let d = data::synth_dataset(args.rows, args.seed)?;
    let bytes = csv_bytes(|buf| Ok(d.write_csv(buf)?))?;
    let path = m.write_output(&name, &bytes)?;
    let moments = column_moments(&d)?;
    let manifest = m.finish()?;
    let columns: Vec<Value> = moments
        .names
        .iter()
        .zip(moments.means.iter().zip(&moments.stds))
        .map(|(n, (mean, std))| json!({ "column": n, "mean": mean, "std": std }))
        .collect();
    Ok(json!({
        "command": "gen-data",
        "rows": args.rows,
        "seed": args.seed,
        "output": path,
        "manifest": manifest,
        "moments": columns,
    }))
}

pub fn train_cmd(args: &TrainArgs) -> Result<Value, CliError> {
    let layers = parse_layers(&args.hidden, &args.act)?;
    let config = args.train.config()?;
    let mut m = ManifestBuilder::start("train", args, Some(args.seed), &args.out);
    let dataset = load_dataset(&mut m, &args.data)?;
    let (normalized, normalizer) = prepare(&dataset, &args.mode)?;
    let names = args.mode.output_names();
    let arch = Architecture::new(INPUT_NAMES.len(), &layers, names.len())?;

    // Split and initial weights share one derived seed, like run 0 of a sweep
    // cell.
    let seed = derive_seed(args.seed, 0);
    let parts = split(normalized.len(), SplitFractions::default(), seed)?;
    let net = Network::init_weights(&arch, seed)?;
    let (trained, record) = train(
        &net,
        &normalized.sample_set(&parts.train),
        &normalized.sample_set(&parts.validation),
        &config,
    )?;
    if record.stop_reason == StopReason::MuExceeded && record.epochs.is_empty() {
        return Err(CliError::numerical(
            "training diverged: mu exceeded its cap before any step was accepted",
        ));
    }

    let subset = dataset.select_outputs(&names)?;
    let fit = evaluate_fit(&trained, &parts, &subset, &normalizer)?;
    let doc = ModelDocument::new(&trained, names, Some(normalizer));
    let model_path = m.write_output("model.json", doc.to_json().as_bytes())?;
    let record_bytes = csv_bytes(|buf| Ok(record.write_csv(buf)?))?;
    m.write_output("training_record.csv", &record_bytes)?;
    let fit_bytes = csv_bytes(|buf| Ok(fit.write_csv(buf)?))?;
    m.write_output("fit.csv", &fit_bytes)?;
    let manifest = m.finish()?;

    let label = layers
        .iter()
        .map(|(n, a)| format!("{n}/{a}/"))
        .collect::<String>()
        + &args.mode.label();
    Ok(json!({
        "command": "train",
        "architecture": label,
        "stop_reason": record.stop_reason,
        "epochs": record.epochs.len(),
        "best_epoch": record.best_epoch,
        "split_sizes": parts.sizes(),
        "fit": fit_summary(&fit),
        "model": model_path,
        "manifest": manifest,
    }))
}

fn sweep_spec(args: &SweepArgs) -> Result<SweepSpec, CliError> {
    let mut spec = SweepSpec::new(args.mode.clone(), args.depth);
    if let Some(r) = args.neurons {
        spec.neuron_range_1 = r;
    }
    if args.depth == 2 {
        if let Some(r) = args.neurons2 {
            spec.neuron_range_2 = Some(r);
        }
    } else if args.neurons2.is_some() {
        return Err(CliError::usage("--neurons2 needs --depth 2"));
    }
    if let Some(c) = &args.combos {
        spec.activation_combos = parse_combos(c, args.depth)?;
    }
    spec.runs_per_cell = args.runs;
    spec.train_config = args.train.config()?;
    spec.selection_metric = args.metric.into();
    spec.evaluation_set = args.evaluation.into();
    spec.validate()?;
    Ok(spec)
}

/// Logs cells with failed runs to standard error.
fn report_failures(report: &SweepReport) {
    for c in report.cells.iter().filter(|c| c.failed_runs > 0) {
        eprintln!(
            "warning: {} had {} of {} runs fail{}",
            c.cell.describe(&report.spec.mode),
            c.failed_runs,
            c.run_mse.len(),
            if c.excluded { "; excluded from selection" } else { "" }
        );
    }
}

/// Fit of the selected network on the split of the run that produced it.
fn selected_fit(report: &SweepReport, dataset: &Dataset) -> Result<Option<RegressionFit>, CliError> {
    let subset = dataset.select_outputs(&report.spec.mode.output_names())?;
    match (report.selected_network()?, report.selected_split(dataset.len())?) {
        (Some(net), Some(parts)) => Ok(Some(evaluate_fit(&net, &parts, &subset, &report.normalizer)?)),
        _ => Ok(None),
    }
}

pub fn sweep_cmd(args: &SweepArgs) -> Result<Value, CliError> {
    let spec = sweep_spec(args)?;
    let mut m = ManifestBuilder::start("sweep", args, Some(args.seed), &args.out);
    let dataset = load_dataset(&mut m, &args.data)?;
    let report = sweep_with_workers(&spec, &dataset, args.seed, args.workers)?;
    report_failures(&report);

    m.write_output("sweep_report.json", report.to_json().as_bytes())?;
    if spec.depth == 1 {
        let bytes = csv_bytes(|buf| Ok(report.write_box_csv(buf)?))?;
        m.write_output("box.csv", &bytes)?;
    } else {
        let bytes = csv_bytes(|buf| Ok(report.write_surface_csv(buf)?))?;
        m.write_output("surface.csv", &bytes)?;
    }
    let fit = selected_fit(&report, &dataset)?;
    if let (Some(net), Some(fit)) = (report.selected_network()?, &fit) {
        let doc = ModelDocument::new(&net, spec.mode.output_names(), Some(report.normalizer.clone()));
        m.write_output("best_model.json", doc.to_json().as_bytes())?;
        let bytes = csv_bytes(|buf| Ok(fit.write_csv(buf)?))?;
        m.write_output("best_fit.csv", &bytes)?;
    }
    let manifest = m.finish()?;

    let selected = report.selected_architecture();
    match &selected {
        Some(line) => eprintln!("{line}"),
        None => eprintln!("warning: every cell was excluded; nothing selected"),
    }
    let cell = report.selected_cell();
    Ok(json!({
        "command": "sweep",
        "cells": report.cells.len(),
        "runs_per_cell": spec.runs_per_cell,
        "failed_runs": report.failed_runs,
        "flagged_cells": report.flagged,
        "selected_architecture": selected,
        "selected_median_mse": cell.map(|c| c.median_mse),
        "selected_min_mse": cell.map(|c| c.min_mse),
        "selected_run_seed": cell.map(|c| c.best_run_seed),
        "fit": fit.as_ref().map(fit_summary),
        "wall_time_secs": report.wall_time_secs,
        "output_dir": args.out,
        "manifest": manifest,
    }))
}

pub fn predict_cmd(args: &PredictArgs) -> Result<Value, CliError> {
    let (dir, name) = split_out(&args.out)?;
    let mut m = ManifestBuilder::start("predict", args, None, &dir);
    let model_bytes = m.read_input(&args.model)?;
    let text = String::from_utf8(model_bytes).map_err(|_| CliError::usage("model file is not UTF-8"))?;
    let doc = ModelDocument::from_json(&text)?;
    let net = doc.network()?;
    if net.architecture().input_dim != INPUT_NAMES.len() {
        return Err(CliError::usage(format!(
            "model expects {} inputs, the dataset schema has {}",
            net.architecture().input_dim,
            INPUT_NAMES.len()
        )));
    }
    let input_bytes = m.read_input(&args.input)?;
    let inputs = load_inputs_csv(input_bytes.as_slice()).map_err(|e| {
        let mut err = CliError::from(e);
        err.message = format!("{}: {}", args.input.display(), err.message);
        err
    })?;

    let mut warnings = Vec::new();
    let outputs = match &doc.normalizer {
        Some(n) => {
            for (row, col, value) in n.exceedances(&inputs)? {
                let msg = format!(
                    "row {}: {col} = {value} exceeds the training maximum {}",
                    row + 1,
                    n.maxima[col]
                );
                eprintln!("warning: {msg}");
                warnings.push(msg);
            }
            let scaled = net.predict(&n.normalize_inputs(&inputs)?)?;
            n.denormalize_outputs(&scaled, &doc.output_names)?
        }
        None => net.predict(&inputs)?,
    };
    if !outputs.is_finite() {
        return Err(CliError::numerical("model produced a non-finite prediction"));
    }

    let bytes = csv_bytes(|buf| {
        let mut w = csv::Writer::from_writer(buf);
        w.write_record(INPUT_NAMES.iter().copied().chain(doc.output_names.iter().map(String::as_str)))?;
        for r in 0..inputs.rows() {
            w.write_record(inputs.row(r).iter().chain(outputs.row(r)).map(|v| v.to_string()))?;
        }
        w.flush()?;
        Ok(())
    })?;
    let path = m.write_output(&name, &bytes)?;
    let manifest = m.finish()?;
    Ok(json!({
        "command": "predict",
        "rows": inputs.rows(),
        "outputs": doc.output_names,
        "warnings": warnings,
        "output": path,
        "manifest": manifest,
    }))
}

pub fn compare_cmd(args: &CompareArgs) -> Result<Value, CliError> {
    let config = args.train.config()?;
    let mut template = ComparisonTemplate::default();
    for spec in [&mut template.depth1, &mut template.depth2] {
        spec.runs_per_cell = args.runs;
        spec.train_config = config;
        spec.selection_metric = args.metric.into();
    }
    template.depth1.neuron_range_1 = args.single;
    template.depth2.neuron_range_1 = args.double1;
    template.depth2.neuron_range_2 = Some(args.double2);
    template.depth1.validate()?;
    template.depth2.validate()?;

    let mut m = ManifestBuilder::start("compare", args, Some(args.seed), &args.out);
    let dataset = load_dataset(&mut m, &args.data)?;
    if dataset.output_names().len() != data::OUTPUT_NAMES.len() {
        return Err(CliError::usage("compare needs a dataset with all three outputs"));
    }
    let (record, reports) = compare_modes(&dataset, &template, args.seed, args.workers)?;
    for r in &reports {
        report_failures(r);
    }
    let table = record.render();
    eprint!("{table}");
    m.write_output(
        "comparison.json",
        serde_json::to_string_pretty(&record).expect("record serialises").as_bytes(),
    )?;
    m.write_output("comparison.txt", table.as_bytes())?;
    for r in &reports {
        let tag = match &r.spec.mode {
            SweepMode::Miso(n) => n.clone(),
            SweepMode::Mimo => "MIMO".into(),
        };
        m.write_output(&format!("sweep_d{}_{tag}.json", r.spec.depth), r.to_json().as_bytes())?;
    }
    let manifest = m.finish()?;
    Ok(json!({
        "command": "compare",
        "rows": record.rows,
        "table": table,
        "output_dir": args.out,
        "manifest": manifest,
    }))
}
