//! `slat`: dataset generation, training, evaluation and prediction.
//!
//! Every failure is reported on stderr as one JSON object
//! `{"error": <kind>, "message": <text>}` with a non-zero exit code.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::json;
use slat::data::{read_dataset_csv, read_json, read_window_csv, write_json, RunToFailureSeries};
use slat::edfa::{generate_dataset, DatasetSpec};
use slat::model::SlatConfig;
use slat::train::{fit, multi_run, write_rtf_csv, MetricsReport, TrainConfig, TrainedModel};
use slat::Error;

const RUN_CONFIG_FILE: &str = "run_config.json";
const REPORT_FILE: &str = "report.json";

#[derive(Parser)]
#[command(
    name = "slat",
    version,
    about = "Sparse dual-aspect attention RUL regression"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic amplifier run-to-failure dataset.
    Generate(GenerateArgs),
    /// Train a model on a dataset CSV and write a checkpoint directory.
    Train(Box<TrainArgs>),
    /// Evaluate a checkpoint on truncated test units and print a metrics report.
    Evaluate(EvaluateArgs),
    /// Predict the remaining useful life from the latest window of one unit.
    Predict(PredictArgs),
    /// Write the per-interval prediction trajectory of one unit as CSV.
    ExportRtf(ExportArgs),
}

#[derive(Args)]
struct GenerateArgs {
    /// Built-in dataset layout.
    #[arg(long, value_enum, conflicts_with = "spec")]
    preset: Option<Preset>,
    /// TOML dataset specification.
    #[arg(long)]
    spec: Option<PathBuf>,
    /// Restrict to these sub-datasets (comma separated, e.g. FD1,FD3).
    #[arg(long, value_delimiter = ',')]
    subsets: Vec<String>,
    #[arg(long)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Clone, Copy, ValueEnum)]
enum Preset {
    Mini,
    Full,
}

#[derive(Clone, Copy, ValueEnum)]
enum ModelPreset {
    Default,
    Tiny,
    Small,
}

#[derive(Args)]
struct TrainArgs {
    /// Training CSV with complete run-to-failure units.
    #[arg(long)]
    train: PathBuf,
    /// Test CSV; required when `--runs` is above 1.
    #[arg(long)]
    test: Option<PathBuf>,
    /// Output directory for the checkpoint (or one subdirectory per run).
    #[arg(long)]
    out: PathBuf,
    #[arg(long)]
    seed: u64,
    /// TOML file with optional `[model]` and `[train]` tables; flags override it.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long, value_enum)]
    model_preset: Option<ModelPreset>,
    /// Worker threads for the multi-run protocol.
    #[arg(long, default_value_t = 1)]
    threads: usize,
    #[command(flatten)]
    model: ModelFlags,
    #[command(flatten)]
    training: TrainFlags,
}

#[derive(Args)]
struct ModelFlags {
    #[arg(long)]
    d_model: Option<usize>,
    #[arg(long)]
    encoder_blocks: Option<usize>,
    #[arg(long)]
    decoder_blocks: Option<usize>,
    #[arg(long)]
    heads: Option<usize>,
    #[arg(long)]
    ffn_hidden: Option<usize>,
    #[arg(long)]
    head_hidden: Option<usize>,
    #[arg(long)]
    window: Option<usize>,
    #[arg(long)]
    decoder_steps: Option<usize>,
    #[arg(long)]
    band_half_width: Option<usize>,
    #[arg(long)]
    global_nodes: Option<usize>,
    #[arg(long)]
    rul_max: Option<f64>,
}

#[derive(Args)]
struct TrainFlags {
    #[arg(long)]
    epochs: Option<usize>,
    #[arg(long)]
    warmup_steps: Option<u64>,
    #[arg(long)]
    batch_size: Option<usize>,
    #[arg(long)]
    patience: Option<usize>,
    #[arg(long)]
    validation_fraction: Option<f64>,
    /// Independent runs with seeds `seed + i` (the CLI default is 1).
    #[arg(long)]
    runs: Option<usize>,
    #[arg(long)]
    lr_scale: Option<f64>,
    /// Leave the operating conditions out of the model input.
    #[arg(long)]
    no_op_conditions: bool,
}

#[derive(Args)]
struct EvaluateArgs {
    #[arg(long)]
    checkpoint: PathBuf,
    #[arg(long)]
    test: PathBuf,
    /// Also write the report here.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct PredictArgs {
    #[arg(long)]
    checkpoint: PathBuf,
    /// Dataset-format CSV; the `rul` column is optional.
    #[arg(long)]
    window: PathBuf,
    /// Unit to predict; required when the file holds more than one.
    #[arg(long)]
    unit: Option<u32>,
}

#[derive(Args)]
struct ExportArgs {
    #[arg(long)]
    checkpoint: PathBuf,
    /// Dataset CSV holding the unit (with its `rul` column).
    #[arg(long)]
    data: PathBuf,
    #[arg(long)]
    unit: u32,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Default, serde::Deserialize)]
#[serde(deny_unknown_fields)]
struct ConfigFile {
    #[serde(default)]
    model: Option<SlatConfig>,
    #[serde(default)]
    train: Option<toml::Table>,
}

/// Model and training configuration recorded next to a checkpoint.
#[derive(serde::Serialize, serde::Deserialize)]
struct RunConfig {
    model: SlatConfig,
    train: TrainConfig,
}

type CliResult<T> = Result<T, Error>;

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) if !e.use_stderr() => e.exit(),
        Err(e) => {
            let message = e.render().to_string();
            fail("usage", message.trim());
            return ExitCode::from(2);
        }
    };
    let result = match cli.command {
        Command::Generate(a) => generate(a),
        Command::Train(a) => train(*a),
        Command::Evaluate(a) => evaluate(a),
        Command::Predict(a) => predict(a),
        Command::ExportRtf(a) => export_rtf(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            fail(e.kind(), &e.to_string());
            ExitCode::FAILURE
        }
    }
}

fn fail(kind: &str, message: &str) {
    eprintln!("{}", json!({ "error": kind, "message": message }));
}

fn print_json(value: &impl serde::Serialize) -> CliResult<()> {
    println!("{}", serde_json::to_string_pretty(value)?);
    Ok(())
}

fn generate(a: GenerateArgs) -> CliResult<()> {
    let mut spec = match (&a.spec, a.preset) {
        (Some(path), _) => DatasetSpec::load(path)?,
        (None, Some(Preset::Full)) => DatasetSpec::full(),
        (None, Some(Preset::Mini)) => DatasetSpec::mini(),
        (None, None) => return Err(Error::Config("give either --preset or --spec".into())),
    };
    if !a.subsets.is_empty() {
        let names: Vec<&str> = a.subsets.iter().map(String::as_str).collect();
        if let Some(unknown) = names
            .iter()
            .find(|n| !spec.subsets.iter().any(|s| s.name == **n))
        {
            return Err(Error::Config(format!("no sub-dataset named {unknown:?}")));
        }
        spec = spec.only(&names);
    }
    let summary = generate_dataset(&spec, a.seed, &a.out)?;
    std::fs::write(a.out.join("spec.toml"), spec.to_toml_string()?)?;
    print_json(&summary)
}

fn resolve_config(a: &TrainArgs) -> CliResult<RunConfig> {
    let file = match &a.config {
        Some(path) => toml::from_str::<ConfigFile>(&std::fs::read_to_string(path)?)?,
        None => ConfigFile::default(),
    };
    let mut model = match (a.model_preset, file.model) {
        (Some(ModelPreset::Tiny), _) => SlatConfig::tiny(),
        (Some(ModelPreset::Small), _) => SlatConfig::small(),
        (Some(ModelPreset::Default), _) => SlatConfig::default(),
        (None, Some(m)) => m,
        (None, None) => SlatConfig::default(),
    };
    // A single run unless asked otherwise, also when the file omits `runs`.
    let mut table = file.train.unwrap_or_default();
    table.entry("runs").or_insert(toml::Value::Integer(1));
    let mut train: TrainConfig = table.try_into()?;

    let m = &a.model;
    let set = |dst: &mut usize, v: Option<usize>| {
        if let Some(v) = v {
            *dst = v;
        }
    };
    set(&mut model.d_model, m.d_model);
    set(&mut model.encoder_blocks, m.encoder_blocks);
    set(&mut model.decoder_blocks, m.decoder_blocks);
    set(&mut model.heads, m.heads);
    set(&mut model.ffn_hidden, m.ffn_hidden);
    set(&mut model.head_hidden, m.head_hidden);
    set(&mut model.window, m.window);
    set(&mut model.decoder_steps, m.decoder_steps);
    set(&mut model.band_half_width, m.band_half_width);
    set(&mut model.global_nodes, m.global_nodes);
    model.rul_max = m.rul_max.unwrap_or(model.rul_max);

    let t = &a.training;
    set(&mut train.epochs, t.epochs);
    set(&mut train.batch_size, t.batch_size);
    set(&mut train.patience, t.patience);
    set(&mut train.runs, t.runs);
    train.warmup_steps = t.warmup_steps.unwrap_or(train.warmup_steps);
    train.validation_fraction = t.validation_fraction.unwrap_or(train.validation_fraction);
    train.lr_scale = t.lr_scale.unwrap_or(train.lr_scale);
    if t.no_op_conditions {
        train.include_op_conditions = false;
    }
    train.seed = a.seed;
    model.validate()?;
    train.validate()?;
    Ok(RunConfig { model, train })
}

fn save_run(dir: &Path, trained: &TrainedModel, cfg: &RunConfig) -> CliResult<()> {
    trained.save(dir)?;
    write_json(dir.join(RUN_CONFIG_FILE), cfg)
}

fn train(a: TrainArgs) -> CliResult<()> {
    let cfg = resolve_config(&a)?;
    let train_series = read_dataset_csv(&a.train)?;
    let test_series = a.test.as_ref().map(read_dataset_csv).transpose()?;
    if cfg.train.runs == 1 {
        let trained = fit(&cfg.model, &train_series, &cfg.train)?;
        save_run(&a.out, &trained, &cfg)?;
        let mut out = json!({
            "checkpoint": a.out,
            "epochs": trained.history.epochs.len(),
            "best_epoch": trained.history.best_epoch,
            "best_val_rmse": trained.history.best_val_rmse,
            "train_seconds": trained.history.train_seconds,
        });
        if let Some(test) = &test_series {
            let eval = trained.evaluate(test)?;
            let report = MetricsReport::single(0, cfg.train.seed, &trained, &eval)?;
            report.save(a.out.join(REPORT_FILE))?;
            out["test_rmse"] = json!(eval.rmse);
        }
        return print_json(&out);
    }
    let test = test_series.ok_or_else(|| {
        Error::Config("--runs above 1 needs --test for the per-run evaluation".into())
    })?;
    let (report, models) = multi_run(&cfg.model, &train_series, &test, &cfg.train, a.threads)?;
    for (run, trained) in report.runs.iter().zip(&models) {
        let run_cfg = RunConfig {
            model: cfg.model.clone(),
            train: TrainConfig {
                seed: run.seed,
                runs: 1,
                ..cfg.train.clone()
            },
        };
        save_run(
            &a.out.join(format!("run_{:02}", run.run)),
            trained,
            &run_cfg,
        )?;
    }
    report.save(a.out.join(REPORT_FILE))?;
    print_json(&report)
}

fn evaluate(a: EvaluateArgs) -> CliResult<()> {
    let trained = TrainedModel::load(&a.checkpoint)?;
    let seed =
        read_json::<RunConfig>(a.checkpoint.join(RUN_CONFIG_FILE)).map_or(0, |c| c.train.seed);
    let eval = trained.evaluate(&read_dataset_csv(&a.test)?)?;
    let report = MetricsReport::single(0, seed, &trained, &eval)?;
    if let Some(out) = &a.out {
        report.save(out)?;
    }
    print_json(&report)
}

fn select_unit(
    mut series: Vec<RunToFailureSeries>,
    unit: Option<u32>,
) -> CliResult<RunToFailureSeries> {
    match unit {
        Some(id) => series
            .into_iter()
            .find(|s| s.unit_id == id)
            .ok_or_else(|| Error::Contract(format!("unit {id} is not in the file"))),
        None if series.len() == 1 => Ok(series.remove(0)),
        None => Err(Error::Contract(format!(
            "the file holds {} units; choose one with --unit",
            series.len()
        ))),
    }
}

fn predict(a: PredictArgs) -> CliResult<()> {
    let trained = TrainedModel::load(&a.checkpoint)?;
    let series = select_unit(read_window_csv(&a.window)?, a.unit)?;
    println!("{}", trained.predict_latest(&series)?);
    Ok(())
}

fn export_rtf(a: ExportArgs) -> CliResult<()> {
    let trained = TrainedModel::load(&a.checkpoint)?;
    let series = select_unit(read_dataset_csv(&a.data)?, Some(a.unit))?;
    let rows = trained.export_rtf(&series)?;
    write_rtf_csv(&a.out, &rows)?;
    print_json(&json!({ "rows": rows.len(), "out": a.out }))
}
