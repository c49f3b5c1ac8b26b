//! Subcommand implementations.
//!
//! Every command creates its output directory, writes its artifacts plus a
//! `run.json` with the resolved configuration, and returns a one-line
//! summary for stdout. Errors are single-line strings prefixed with the
//! stage that produced them.

use std::fs;
use std::path::{Path, PathBuf};

use eegalign::alignment::{build_reference, ea_align, ReferenceMatrix};
use eegalign::data::{
    load_archive, save_archive, synth_erp, synth_mi, Dataset, SubjectRecord, TaskKind, Trial,
};
use eegalign::harness::{
    auc_curve, loso_eval, online_eval, paired_t_test, read_score_rows, select_reference_pool,
    AlignmentSpec, ClassLabels, EvalReport, PipelineSpec, ScoreRow,
};
use eegalign::preprocess::{
    design_fir_bandpass, downsample, epoch, filter_trial, EpochSpec, Event, Recording,
};
use serde::Serialize;

use crate::config::{ConfigFile, DatasetSource, PreprocessConfig, ResolvedRun};
use crate::{Cli, Command};

/// Dispatches a parsed command line and returns the stdout summary line.
pub fn run(cli: Cli) -> Result<String, String> {
    if cli.threads > 0 {
        rayon::ThreadPoolBuilder::new()
            .num_threads(cli.threads)
            .build_global()
            .map_err(|e| format!("threads: {e}"))?;
    }

    let out = cli
        .out
        .clone()
        .ok_or_else(|| "config: --out <dir> is required".to_string())?;
    fs::create_dir_all(&out).map_err(|e| format!("out: cannot create {}: {e}", out.display()))?;

    let config = match &cli.config {
        Some(path) => ConfigFile::load(path)?,
        None => ConfigFile::default(),
    };
    let seed = cli.seed.or(config.seed).unwrap_or(0);

    match &cli.command {
        Command::Synth => synth(&config, &out, seed, cli.threads),
        Command::Preprocess => preprocess(&config, &out, seed, cli.threads),
        Command::Align => align(&config, &out, seed, cli.threads),
        Command::EvalOffline => eval_offline(&config, &out, seed, cli.threads),
        Command::EvalOnline => eval_online(&config, &out, seed, cli.threads),
        Command::Report { inputs } => report(inputs, &out, seed, cli.threads),
    }
}

fn resolved(command: &str, out: &Path, seed: u64, threads: usize) -> ResolvedRun {
    ResolvedRun {
        command: command.to_string(),
        out: out.to_path_buf(),
        seed,
        threads,
        dataset: None,
        pipeline: None,
        online: None,
        preprocess: None,
        report_inputs: Vec::new(),
    }
}

fn require_dataset(config: &ConfigFile) -> Result<&DatasetSource, String> {
    config
        .dataset
        .as_ref()
        .ok_or_else(|| "config: missing `dataset` section".to_string())
}

fn require_pipeline(config: &ConfigFile) -> Result<PipelineSpec, String> {
    config
        .pipeline
        .ok_or_else(|| "config: missing `pipeline` section".to_string())
}

fn load_dataset(source: &DatasetSource) -> Result<Dataset, String> {
    match (&source.path, &source.synth) {
        (Some(path), None) => {
            load_archive(path).map_err(|e| format!("dataset: {}: {e}", path.display()))
        }
        (None, Some(synth)) => match synth.task {
            TaskKind::MotorImagery => {
                synth_mi(&synth.params).map_err(|e| format!("dataset: synth: {e}"))
            }
            TaskKind::Erp => synth_erp(&synth.params).map_err(|e| format!("dataset: synth: {e}")),
        },
        _ => Err("config: `dataset` needs exactly one of `path` or `synth`".to_string()),
    }
}

fn count_trials(dataset: &Dataset) -> usize {
    dataset.subjects.iter().map(|s| s.trials.len()).sum()
}

fn synth(config: &ConfigFile, out: &Path, seed: u64, threads: usize) -> Result<String, String> {
    let source = require_dataset(config)?;
    if source.synth.is_none() {
        return Err("config: `synth` needs a `dataset.synth` section".to_string());
    }
    let dataset = load_dataset(source)?;
    let archive_dir = out.join("dataset");
    save_archive(&dataset, &archive_dir)
        .map_err(|e| format!("synth: {}: {e}", archive_dir.display()))?;

    let mut run = resolved("synth", out, seed, threads);
    run.dataset = Some(source.clone());
    run.write(out)?;
    Ok(format!(
        "synth wrote {} subjects={} trials={}",
        archive_dir.display(),
        dataset.subjects.len(),
        count_trials(&dataset)
    ))
}

/// Cuts a window out of one stored trial, reusing the epoching rules.
fn recut_trial(trial: &Trial, window: (f64, f64)) -> Result<Trial, String> {
    let recording = Recording {
        data: trial.data.clone(),
        fs: trial.fs,
        subject: trial.subject,
    };
    let events = [Event {
        time: 0.0,
        label: trial.label,
    }];
    let spec = EpochSpec::new(window, trial.kind).map_err(|e| format!("epoch_window: {e}"))?;
    let mut outcome = epoch(&recording, &events, &spec);
    if let Some(failure) = outcome.failures.first() {
        return Err(format!(
            "epoch_window: subject {}: {}",
            trial.subject, failure.reason
        ));
    }
    Ok(outcome.trials.remove(0))
}

fn preprocess_trial(
    trial: &Trial,
    steps: &PreprocessConfig,
    filter: Option<&eegalign::preprocess::FIRFilter>,
) -> Result<Trial, String> {
    let mut current = trial.clone();
    if let Some(filter) = filter {
        current = filter_trial(&current, filter).map_err(|e| format!("filter: {e}"))?;
    }
    if let Some(window) = steps.epoch_window {
        current = recut_trial(&current, window)?;
    }
    if let Some(factor) = steps.downsample {
        current = downsample(&current, factor).map_err(|e| format!("downsample: {e}"))?;
    }
    Ok(current)
}

fn preprocess(
    config: &ConfigFile,
    out: &Path,
    seed: u64,
    threads: usize,
) -> Result<String, String> {
    let source = require_dataset(config)?;
    let steps = config
        .preprocess
        .clone()
        .ok_or_else(|| "config: missing `preprocess` section".to_string())?;
    let dataset = load_dataset(source)?;

    let filter = match steps.band {
        Some(band) => Some(
            design_fir_bandpass(steps.filter_order, band, dataset.subjects[0].trials[0].fs)
                .map_err(|e| format!("filter: {e}"))?,
        ),
        None => None,
    };

    let mut subjects = Vec::with_capacity(dataset.subjects.len());
    for subject in &dataset.subjects {
        let trials = subject
            .trials
            .iter()
            .map(|t| preprocess_trial(t, &steps, filter.as_ref()))
            .collect::<Result<Vec<_>, _>>()?;
        let resting = subject
            .resting
            .iter()
            .map(|t| preprocess_trial(t, &steps, filter.as_ref()))
            .collect::<Result<Vec<_>, _>>()?;
        subjects.push(
            SubjectRecord::new(subject.subject, trials, resting, subject.channel_names.clone())
                .map_err(|e| format!("preprocess: subject {}: {e}", subject.subject))?,
        );
    }
    let processed = Dataset::new(subjects, dataset.label_map.clone(), dataset.task_kind)
        .map_err(|e| format!("preprocess: {e}"))?;

    let archive_dir = out.join("dataset");
    save_archive(&processed, &archive_dir)
        .map_err(|e| format!("preprocess: {}: {e}", archive_dir.display()))?;

    let mut run = resolved("preprocess", out, seed, threads);
    run.dataset = Some(source.clone());
    run.preprocess = Some(steps);
    run.write(out)?;
    Ok(format!(
        "preprocess wrote {} trials={} fs={}",
        archive_dir.display(),
        count_trials(&processed),
        processed.subjects[0].trials[0].fs
    ))
}

/// One subject's alignment reference as stored in `references.json`.
#[derive(Serialize)]
struct ReferenceRecord {
    subject: u32,
    kind: String,
    n_source_trials: usize,
    matrix: Vec<Vec<f64>>,
}

impl ReferenceRecord {
    fn new(subject: u32, reference: &ReferenceMatrix) -> Self {
        Self {
            subject,
            kind: format!("{:?}", reference.kind).to_lowercase(),
            n_source_trials: reference.n_source_trials,
            matrix: reference
                .matrix
                .as_array()
                .outer_iter()
                .map(|row| row.to_vec())
                .collect(),
        }
    }
}

fn align(config: &ConfigFile, out: &Path, seed: u64, threads: usize) -> Result<String, String> {
    let source = require_dataset(config)?;
    let spec = require_pipeline(config)?;
    let reference_kind = match spec.alignment {
        AlignmentSpec::Euclidean { reference } => reference,
        other => {
            return Err(format!(
                "align: only euclidean alignment dumps aligned trials, got {other:?}"
            ))
        }
    };
    let dataset = load_dataset(source)?;
    spec.validate(dataset.task_kind)
        .map_err(|e| format!("align: {e}"))?;
    let labels =
        ClassLabels::from_label_map(&dataset.label_map).map_err(|e| format!("align: {e}"))?;

    let mut subjects = Vec::with_capacity(dataset.subjects.len());
    let mut references = Vec::with_capacity(dataset.subjects.len());
    for subject in &dataset.subjects {
        let pool: Vec<Trial> = select_reference_pool(
            dataset.task_kind,
            reference_kind,
            &subject.trials,
            &subject.resting,
            labels.nontarget,
        )
        .map_err(|e| format!("align: subject {}: {e}", subject.subject))?
        .into_iter()
        .cloned()
        .collect();
        let shrink = spec
            .shrink_for(pool[0].n_channels(), pool[0].n_samples())
            .map_err(|e| format!("align: {e}"))?;
        let reference = build_reference(&pool, reference_kind, shrink)
            .map_err(|e| format!("align: subject {}: {e}", subject.subject))?;

        let trials = ea_align(&subject.trials, &reference)
            .map_err(|e| format!("align: subject {}: {e}", subject.subject))?;
        let resting = ea_align(&subject.resting, &reference)
            .map_err(|e| format!("align: subject {}: {e}", subject.subject))?;
        references.push(ReferenceRecord::new(subject.subject, &reference));
        subjects.push(
            SubjectRecord::new(subject.subject, trials, resting, subject.channel_names.clone())
                .map_err(|e| format!("align: subject {}: {e}", subject.subject))?,
        );
    }
    let aligned = Dataset::new(subjects, dataset.label_map.clone(), dataset.task_kind)
        .map_err(|e| format!("align: {e}"))?;

    let archive_dir = out.join("dataset");
    save_archive(&aligned, &archive_dir)
        .map_err(|e| format!("align: {}: {e}", archive_dir.display()))?;
    let references_path = out.join("references.json");
    let mut text = serde_json::to_string_pretty(&references)
        .map_err(|e| format!("align: references: {e}"))?;
    text.push('\n');
    fs::write(&references_path, text)
        .map_err(|e| format!("align: cannot write {}: {e}", references_path.display()))?;

    let mut run = resolved("align", out, seed, threads);
    run.dataset = Some(source.clone());
    run.pipeline = Some(spec);
    run.write(out)?;
    Ok(format!(
        "align wrote {} references={}",
        archive_dir.display(),
        references.len()
    ))
}

fn write_eval_artifacts(report: &EvalReport, out: &Path) -> Result<(), String> {
    report
        .write_json(&out.join("report.json"))
        .map_err(|e| format!("report.json: {e}"))?;
    report
        .write_csv(&out.join("scores.csv"))
        .map_err(|e| format!("scores.csv: {e}"))?;
    Ok(())
}

fn eval_offline(
    config: &ConfigFile,
    out: &Path,
    seed: u64,
    threads: usize,
) -> Result<String, String> {
    let source = require_dataset(config)?;
    let spec = require_pipeline(config)?;
    let dataset = load_dataset(source)?;
    let report = loso_eval(&dataset, &spec, seed).map_err(|e| format!("eval-offline: {e}"))?;
    write_eval_artifacts(&report, out)?;

    let mut run = resolved("eval-offline", out, seed, threads);
    run.dataset = Some(source.clone());
    run.pipeline = Some(spec);
    run.write(out)?;
    Ok(format!(
        "offline {} mean={:.4} subjects={}",
        report.metric,
        report.mean_score,
        report.subjects.len()
    ))
}

fn eval_online(
    config: &ConfigFile,
    out: &Path,
    seed: u64,
    threads: usize,
) -> Result<String, String> {
    let source = require_dataset(config)?;
    let spec = require_pipeline(config)?;
    let online = config
        .online
        .ok_or_else(|| "config: missing `online` section".to_string())?;
    let dataset = load_dataset(source)?;
    let report =
        online_eval(&dataset, &spec, &online, seed).map_err(|e| format!("eval-online: {e}"))?;
    write_eval_artifacts(&report, out)?;

    let mut run = resolved("eval-online", out, seed, threads);
    run.dataset = Some(source.clone());
    run.pipeline = Some(spec);
    run.online = Some(online);
    run.write(out)?;
    Ok(format!(
        "online {} mean={:.4} subjects={} checkpoints={}",
        report.metric,
        report.mean_score,
        report.subjects.len(),
        online.checkpoints().len()
    ))
}

/// Scores of one method (one input CSV), keyed for table rendering.
struct MethodScores {
    name: String,
    /// Per-subject mean of the final-checkpoint metric over repetitions,
    /// in subject order; `(subject, accuracy, balanced_accuracy)`.
    subjects: Vec<(u32, f64, f64)>,
    /// Mean area under the accuracy and balanced-accuracy curves over all
    /// subject repetitions; `None` for single-checkpoint (offline) runs.
    auc: Option<(f64, f64)>,
}

fn method_name(path: &Path) -> String {
    path.file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| path.display().to_string())
}

fn summarize_rows(path: &Path, rows: &[ScoreRow]) -> Result<MethodScores, String> {
    if rows.is_empty() {
        return Err(format!("report: {}: no rows", path.display()));
    }
    let mut subjects: Vec<(u32, f64, f64)> = Vec::new();
    let mut auc_acc = Vec::new();
    let mut auc_bal = Vec::new();
    let mut multi_checkpoint = false;

    let mut subject_ids: Vec<u32> = rows.iter().map(|r| r.subject).collect();
    subject_ids.dedup();
    for subject in subject_ids {
        let mut finals_acc = Vec::new();
        let mut finals_bal = Vec::new();
        let mut repetitions: Vec<usize> = rows
            .iter()
            .filter(|r| r.subject == subject)
            .map(|r| r.repetition)
            .collect();
        repetitions.dedup();
        for repetition in repetitions {
            let curve: Vec<&ScoreRow> = rows
                .iter()
                .filter(|r| r.subject == subject && r.repetition == repetition)
                .collect();
            let last = curve.last().expect("non-empty repetition");
            finals_acc.push(last.accuracy);
            finals_bal.push(last.balanced_accuracy);
            if curve.len() > 1 {
                multi_checkpoint = true;
                let checkpoints: Vec<f64> =
                    curve.iter().map(|r| r.checkpoint as f64).collect();
                let acc: Vec<f64> = curve.iter().map(|r| r.accuracy).collect();
                let bal: Vec<f64> = curve.iter().map(|r| r.balanced_accuracy).collect();
                auc_acc.push(
                    auc_curve(&checkpoints, &acc)
                        .map_err(|e| format!("report: {}: {e}", path.display()))?,
                );
                auc_bal.push(
                    auc_curve(&checkpoints, &bal)
                        .map_err(|e| format!("report: {}: {e}", path.display()))?,
                );
            }
        }
        let n = finals_acc.len() as f64;
        subjects.push((
            subject,
            finals_acc.iter().sum::<f64>() / n,
            finals_bal.iter().sum::<f64>() / n,
        ));
    }

    let auc = if multi_checkpoint {
        let n = auc_acc.len() as f64;
        Some((
            auc_acc.iter().sum::<f64>() / n,
            auc_bal.iter().sum::<f64>() / n,
        ))
    } else {
        None
    };
    Ok(MethodScores {
        name: method_name(path),
        subjects,
        auc,
    })
}

/// Pads cells so every pipe of the markdown table lines up.
fn render_table(header: &[String], rows: &[Vec<String>]) -> String {
    let columns = header.len();
    let mut widths: Vec<usize> = header.iter().map(|h| h.len()).collect();
    for row in rows {
        for (i, cell) in row.iter().enumerate() {
            widths[i] = widths[i].max(cell.len());
        }
    }
    let line = |cells: &[String]| {
        let padded: Vec<String> = cells
            .iter()
            .enumerate()
            .map(|(i, c)| format!("{:width$}", c, width = widths[i]))
            .collect();
        format!("| {} |", padded.join(" | "))
    };
    let separator: Vec<String> = (0..columns).map(|i| "-".repeat(widths[i])).collect();
    let mut text = line(header);
    text.push('\n');
    text.push_str(&format!("|-{}-|", separator.join("-|-")));
    text.push('\n');
    for row in rows {
        text.push_str(&line(row));
        text.push('\n');
    }
    text
}

fn metric_table(
    title: &str,
    methods: &[MethodScores],
    pick: impl Fn(&(u32, f64, f64)) -> f64,
    pick_auc: impl Fn(&(f64, f64)) -> f64,
) -> Result<String, String> {
    let subjects: Vec<u32> = methods[0].subjects.iter().map(|s| s.0).collect();
    for method in methods {
        let ids: Vec<u32> = method.subjects.iter().map(|s| s.0).collect();
        if ids != subjects {
            return Err(format!(
                "report: {} covers different subjects than {}",
                method.name, methods[0].name
            ));
        }
    }

    let mut header = vec!["Subject".to_string()];
    header.extend(methods.iter().map(|m| m.name.clone()));
    let mut rows = Vec::new();
    for (i, subject) in subjects.iter().enumerate() {
        let mut row = vec![subject.to_string()];
        row.extend(
            methods
                .iter()
                .map(|m| format!("{:.4}", pick(&m.subjects[i]))),
        );
        rows.push(row);
    }

    let mut mean_row = vec!["Avg".to_string()];
    let means: Vec<f64> = methods
        .iter()
        .map(|m| m.subjects.iter().map(&pick).sum::<f64>() / m.subjects.len() as f64)
        .collect();
    mean_row.extend(means.iter().map(|v| format!("{v:.4}")));
    rows.push(mean_row);

    if methods.iter().all(|m| m.auc.is_some()) {
        let mut auc_row = vec!["AUC".to_string()];
        auc_row.extend(
            methods
                .iter()
                .map(|m| format!("{:.4}", pick_auc(m.auc.as_ref().expect("checked")))),
        );
        rows.push(auc_row);
    }

    if methods.len() >= 2 {
        let baseline: Vec<f64> = methods[0].subjects.iter().map(&pick).collect();
        let mut p_row = vec![format!("p vs {}", methods[0].name)];
        p_row.push("-".to_string());
        for method in &methods[1..] {
            let scores: Vec<f64> = method.subjects.iter().map(&pick).collect();
            let cell = match paired_t_test(&scores, &baseline) {
                Ok(result) => format!("{:.4}", result.p),
                Err(_) => "n/a".to_string(),
            };
            p_row.push(cell);
        }
        rows.push(p_row);
    }

    Ok(format!("## {title}\n\n{}", render_table(&header, &rows)))
}

fn report(inputs: &[PathBuf], out: &Path, seed: u64, threads: usize) -> Result<String, String> {
    if inputs.is_empty() {
        return Err("report: needs at least one score CSV".to_string());
    }
    let mut methods = Vec::with_capacity(inputs.len());
    for path in inputs {
        let rows =
            read_score_rows(path).map_err(|e| format!("report: {}: {e}", path.display()))?;
        methods.push(summarize_rows(path, &rows)?);
    }

    let accuracy = metric_table("Accuracy", &methods, |s| s.1, |a| a.0)?;
    let balanced = metric_table("Balanced accuracy", &methods, |s| s.2, |a| a.1)?;
    let text = format!("# Evaluation summary\n\n{accuracy}\n{balanced}");

    let path = out.join("report.md");
    fs::write(&path, &text).map_err(|e| format!("report: cannot write {}: {e}", path.display()))?;

    let mut run = resolved("report", out, seed, threads);
    run.report_inputs = inputs.to_vec();
    run.write(out)?;
    Ok(format!(
        "report wrote {} methods={} subjects={}",
        path.display(),
        methods.len(),
        methods[0].subjects.len()
    ))
}
