//! The `fae` command line: `train`, `eval`, `sweep-k`, and `hfae`
//! subcommands. Every run writes a checkpoint, a loss-curve CSV, a
//! selection CSV, and a metadata sidecar carrying all seeds, the thread
//! count, the normalization mode, and crate version, so runs can be
//! replayed bit for bit.

use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use crate::checkpoint::{
    append_metrics_row, load_checkpoint, save_checkpoint, write_groups_csv, write_selection_csv,
    MetricsRow,
};
use crate::data::{
    load_csv, load_idx, split_counts, synth_blocks, Dataset, Imputer, LabelColumn, Scaler,
    ScalerKind,
};
use crate::error::{FaeError, Result};
use crate::eval::{accuracy, fit_extra_trees, fit_linear_decoder, predict, recon_error, ExtraTreesParams};
use crate::hfae::HierarchyParams;
use crate::model::{BatchPolicy, Hyperparams, L1Mode, LossNorm, Method, SelectionResult};
use crate::train::{train_model, CheckpointPolicy, RunMetadata, TrainOptions, TrainOutcome};

#[derive(Debug, Parser)]
#[command(
    name = "fae",
    about = "Linear fractal autoencoders for unsupervised feature selection",
    version
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Train a model and write checkpoint, loss curve, and selection.
    Train(TrainCmd),
    /// Evaluate a checkpoint: linear reconstruction MSE and extra-trees
    /// accuracy on the test split.
    Eval(EvalCmd),
    /// Train and evaluate across a list of k values.
    SweepK(SweepCmd),
    /// Train a hierarchical FAE extracting h disjoint feature groups.
    Hfae(HfaeCmd),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum DataFormat {
    Csv,
    Idx,
    Synth,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum NormalizeMode {
    /// Per-format default: minmax for csv, none for idx and synth.
    Auto,
    Minmax,
    Zscore,
    None,
}

#[derive(Debug, Clone, Args)]
pub struct DataArgs {
    /// Dataset path: a CSV file, a directory holding IDX image/label files,
    /// or a synth spec like "n=500,blocks=4,per_block=3,noise_std=0.01,seed=7".
    #[arg(long)]
    pub dataset: String,

    #[arg(long, value_enum, default_value = "csv")]
    pub format: DataFormat,

    /// CSV: first row is a header.
    #[arg(long)]
    pub has_header: bool,

    /// CSV: label column name (with --has-header) or 0-based index.
    #[arg(long)]
    pub label_column: Option<String>,

    #[arg(long, value_enum, default_value = "auto")]
    pub normalize: NormalizeMode,

    /// Seed for the split shuffle.
    #[arg(long, default_value_t = 0)]
    pub split_seed: u64,

    /// Train/val/test ratios, e.g. "0.72,0.08,0.20".
    #[arg(long)]
    pub split: Option<String>,

    /// Explicit split sizes, e.g. "5400,600,4000"; rows beyond the total
    /// are dropped (fixed-size subsample protocols).
    #[arg(long)]
    pub split_counts: Option<String>,
}

#[derive(Debug, Clone, Args)]
pub struct TrainArgs {
    /// Number of selected features (defaulted by --preset if given).
    #[arg(long)]
    pub k: Option<usize>,

    /// Latent dimension (default: k).
    #[arg(long)]
    pub latent_dim: Option<usize>,

    #[arg(long, default_value_t = 2.0)]
    pub lambda1: f64,

    #[arg(long, default_value_t = 0.1)]
    pub lambda2: f64,

    #[arg(long, default_value_t = 1000)]
    pub epochs: usize,

    #[arg(long, default_value_t = 0.001)]
    pub lr: f64,

    /// Training seed; repeats use seed, seed+1, ...
    #[arg(long, default_value_t = 0)]
    pub seed: u64,

    /// Independent runs (both the training seed and the split seed
    /// advance).
    #[arg(long, default_value_t = 1)]
    pub repeats: usize,

    #[arg(long, value_enum, default_value = "mean")]
    pub l1_mode: CliL1Mode,

    #[arg(long, value_enum, default_value = "mean")]
    pub loss_norm: CliLossNorm,

    /// "full" or a mini-batch size.
    #[arg(long, default_value = "full")]
    pub batch: String,

    #[arg(long, value_enum, default_value = "best-val")]
    pub checkpoint_policy: CliCheckpointPolicy,

    /// Named k presets: opt1 picks 10/50/64 and opt2 picks 8/36/50
    /// features for small (m <= 100), medium (m <= 1000), and wide
    /// datasets respectively.
    #[arg(long, value_enum)]
    pub preset: Option<Preset>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum CliL1Mode {
    Mean,
    Sum,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum CliLossNorm {
    Mean,
    Frobenius,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum CliCheckpointPolicy {
    BestVal,
    Final,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Preset {
    Opt1,
    Opt2,
}

impl Preset {
    fn k_for(&self, m: usize) -> usize {
        match (self, m) {
            (Preset::Opt1, 0..=100) => 10,
            (Preset::Opt1, 101..=1000) => 50,
            (Preset::Opt1, _) => 64,
            (Preset::Opt2, 0..=100) => 8,
            (Preset::Opt2, 101..=1000) => 36,
            (Preset::Opt2, _) => 50,
        }
    }
}

#[derive(Debug, Args)]
pub struct TrainCmd {
    #[command(flatten)]
    pub data: DataArgs,

    #[command(flatten)]
    pub train: TrainArgs,

    /// Model: ae, iae, or fae (use the hfae subcommand for hierarchies).
    #[arg(long, default_value = "fae")]
    pub method: String,

    /// Output directory; artifacts land in <out>/seed_<seed>/.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct EvalCmd {
    #[command(flatten)]
    pub data: DataArgs,

    #[arg(long)]
    pub checkpoint: PathBuf,

    /// Metrics CSV to append to.
    #[arg(long)]
    pub out: PathBuf,

    #[arg(long, default_value_t = 100)]
    pub trees: usize,

    #[arg(long, default_value_t = 0)]
    pub trees_seed: u64,
}

#[derive(Debug, Args)]
pub struct SweepCmd {
    #[command(flatten)]
    pub data: DataArgs,

    #[command(flatten)]
    pub train: TrainArgs,

    #[arg(long, default_value = "fae")]
    pub method: String,

    /// Comma-separated k values, e.g. "10,25,50".
    #[arg(long)]
    pub k_list: String,

    #[arg(long, default_value_t = 100)]
    pub trees: usize,

    #[arg(long, default_value_t = 0)]
    pub trees_seed: u64,

    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct HfaeCmd {
    #[command(flatten)]
    pub data: DataArgs,

    #[command(flatten)]
    pub train: TrainArgs,

    /// Number of disjoint groups of k features.
    #[arg(long, default_value_t = 3)]
    pub h: usize,

    /// Hierarchy coefficients "lambda0,lambda1,...,lambdah" (L1 first).
    /// Defaults: h=3 -> 0.05,1.5,2,3; h=1 -> the FAE coefficients.
    #[arg(long)]
    pub hfae_lambdas: Option<String>,

    #[arg(long)]
    pub out: PathBuf,
}

pub fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Train(cmd) => cmd_train(cmd),
        Command::Eval(cmd) => cmd_eval(cmd),
        Command::SweepK(cmd) => cmd_sweep_k(cmd),
        Command::Hfae(cmd) => cmd_hfae(cmd),
    }
}

// ---------------------------------------------------------------------------
// dataset pipeline

struct PreparedData {
    name: String,
    train: Dataset,
    val: Dataset,
    test: Dataset,
    normalize: &'static str,
    split_sizes: (usize, usize, usize),
    split_seed: u64,
}

fn parse_kv_spec(spec: &str) -> Result<std::collections::BTreeMap<String, f64>> {
    let mut out = std::collections::BTreeMap::new();
    for part in spec.split(',') {
        let (key, value) = part.split_once('=').ok_or_else(|| {
            FaeError::InvalidArgument(format!("synth spec entry '{part}' is not key=value"))
        })?;
        let v: f64 = value.trim().parse().map_err(|_| {
            FaeError::InvalidArgument(format!("synth spec value '{value}' is not numeric"))
        })?;
        out.insert(key.trim().to_string(), v);
    }
    Ok(out)
}

fn load_dataset(args: &DataArgs) -> Result<(String, Dataset)> {
    match args.format {
        DataFormat::Csv => {
            let label = match &args.label_column {
                None => LabelColumn::None,
                Some(s) => match s.parse::<usize>() {
                    Ok(i) => LabelColumn::Index(i),
                    Err(_) => LabelColumn::Name(s.clone()),
                },
            };
            let d = load_csv(&args.dataset, args.has_header, &label)?;
            let name = Path::new(&args.dataset)
                .file_stem()
                .map(|s| s.to_string_lossy().into_owned())
                .unwrap_or_else(|| "csv".into());
            Ok((name, d))
        }
        DataFormat::Idx => {
            let dir = Path::new(&args.dataset);
            let (images, labels) = find_idx_files(dir)?;
            let d = load_idx(&images, labels.as_deref())?;
            let name = dir
                .file_name()
                .map(|s| s.to_string_lossy().into_owned())
                .unwrap_or_else(|| "idx".into());
            Ok((name, d))
        }
        DataFormat::Synth => {
            let kv = parse_kv_spec(&args.dataset)?;
            let get = |key: &str, default: f64| kv.get(key).copied().unwrap_or(default);
            let d = synth_blocks(
                get("n", 500.0) as usize,
                get("blocks", 4.0) as usize,
                get("per_block", 3.0) as usize,
                get("noise_std", 0.01),
                get("seed", 0.0) as u64,
            )?;
            Ok(("synth".into(), d))
        }
    }
}

fn find_idx_files(dir: &Path) -> Result<(PathBuf, Option<PathBuf>)> {
    let mut images = Vec::new();
    let mut labels = Vec::new();
    for entry in std::fs::read_dir(dir)? {
        let path = entry?.path();
        let name = path.file_name().map(|s| s.to_string_lossy().into_owned());
        if let Some(name) = name {
            if name.contains("images-idx3-ubyte") {
                images.push(path);
            } else if name.contains("labels-idx1-ubyte") {
                labels.push(path);
            }
        }
    }
    images.sort();
    labels.sort();
    if images.len() != 1 {
        return Err(FaeError::InvalidArgument(format!(
            "expected exactly one *images-idx3-ubyte* file in {}, found {}",
            dir.display(),
            images.len()
        )));
    }
    if labels.len() > 1 {
        return Err(FaeError::InvalidArgument(format!(
            "expected at most one *labels-idx1-ubyte* file in {}, found {}",
            dir.display(),
            labels.len()
        )));
    }
    Ok((images.remove(0), labels.pop()))
}

fn parse_triple<T: std::str::FromStr>(s: &str, what: &str) -> Result<(T, T, T)> {
    let parts: Vec<&str> = s.split(',').collect();
    if parts.len() != 3 {
        return Err(FaeError::InvalidArgument(format!(
            "{what} needs three comma-separated values, got '{s}'"
        )));
    }
    let parse = |p: &str| {
        p.trim()
            .parse::<T>()
            .map_err(|_| FaeError::InvalidArgument(format!("bad {what} component '{p}'")))
    };
    Ok((parse(parts[0])?, parse(parts[1])?, parse(parts[2])?))
}

fn prepare_data(args: &DataArgs, split_seed: u64) -> Result<PreparedData> {
    let (name, full) = load_dataset(args)?;
    let n = full.n();

    let (n_train, n_val, n_test) = if let Some(counts) = &args.split_counts {
        parse_triple::<usize>(counts, "--split-counts")?
    } else {
        let (rt, rv, rs) = match &args.split {
            Some(ratios) => parse_triple::<f64>(ratios, "--split")?,
            None => (0.72, 0.08, 0.20),
        };
        if !(rt > 0.0 && rv > 0.0 && rs > 0.0) || (rt + rv + rs - 1.0).abs() > 1e-9 {
            return Err(FaeError::InvalidArgument(format!(
                "split ratios must be positive and sum to 1, got {rt},{rv},{rs}"
            )));
        }
        let n_val = (n as f64 * rv).floor() as usize;
        let n_test = (n as f64 * rs).floor() as usize;
        (n - n_val - n_test, n_val, n_test)
    };

    let (mut train, mut val, mut test) = split_counts(&full, n_train, n_val, n_test, split_seed)?;

    if train.has_missing() || val.has_missing() || test.has_missing() {
        Imputer::fit_transform_splits(&mut train, &mut val, &mut test)?;
    }

    let resolved = match (args.normalize, args.format) {
        (NormalizeMode::Auto, DataFormat::Csv) => NormalizeMode::Minmax,
        (NormalizeMode::Auto, _) => NormalizeMode::None,
        (mode, _) => mode,
    };
    let normalize = match resolved {
        NormalizeMode::Minmax => {
            Scaler::fit_transform_splits(ScalerKind::MinMax, &mut train, &mut val, &mut test)?;
            "minmax"
        }
        NormalizeMode::Zscore => {
            Scaler::fit_transform_splits(ScalerKind::ZScore, &mut train, &mut val, &mut test)?;
            "zscore"
        }
        NormalizeMode::None | NormalizeMode::Auto => "none",
    };

    Ok(PreparedData {
        name,
        train,
        val,
        test,
        normalize,
        split_sizes: (n_train, n_val, n_test),
        split_seed,
    })
}

// ---------------------------------------------------------------------------
// training command plumbing

fn build_hyperparams(args: &TrainArgs, m: usize, seed: u64) -> Result<Hyperparams> {
    let k = match (args.k, args.preset) {
        (Some(k), _) => k,
        (None, Some(preset)) => preset.k_for(m),
        (None, None) => {
            return Err(FaeError::InvalidArgument(
                "either --k or --preset is required".into(),
            ))
        }
    };
    let batch = if args.batch == "full" {
        BatchPolicy::Full
    } else {
        let size: usize = args.batch.parse().map_err(|_| {
            FaeError::InvalidArgument(format!("--batch must be 'full' or a size, got '{}'", args.batch))
        })?;
        BatchPolicy::Mini(size)
    };
    let hp = Hyperparams {
        k,
        d: args.latent_dim.unwrap_or(k),
        lambda1: args.lambda1,
        lambda2: args.lambda2,
        lr: args.lr,
        epochs: args.epochs,
        batch,
        seed,
        l1_mode: match args.l1_mode {
            CliL1Mode::Mean => L1Mode::Mean,
            CliL1Mode::Sum => L1Mode::Sum,
        },
        loss_norm: match args.loss_norm {
            CliLossNorm::Mean => LossNorm::Mean,
            CliLossNorm::Frobenius => LossNorm::Frobenius,
        },
    };
    hp.validate(m)?;
    Ok(hp)
}

fn train_options(args: &TrainArgs) -> TrainOptions {
    TrainOptions {
        checkpoint: match args.checkpoint_policy {
            CliCheckpointPolicy::BestVal => CheckpointPolicy::BestValidation,
            CliCheckpointPolicy::Final => CheckpointPolicy::FinalEpoch,
        },
    }
}

#[derive(Serialize)]
struct RunSidecar<'a> {
    command: &'a str,
    dataset: &'a str,
    dataset_name: &'a str,
    normalize: &'a str,
    split_seed: u64,
    split_sizes: (usize, usize, usize),
    train_provenance: &'a crate::data::Provenance,
    run: &'a RunMetadata,
    wall_secs: f64,
    artifacts: Vec<String>,
}

/// Runs one training and writes `checkpoint.json`, `loss.csv`,
/// `selection.csv` (plus `groups.csv` for hierarchies), and
/// `metadata.json` into `dir`.
fn run_and_write(
    command: &str,
    data: &PreparedData,
    dataset_arg: &str,
    method: Method,
    hp: &Hyperparams,
    hier: Option<&HierarchyParams>,
    opts: &TrainOptions,
    dir: &Path,
) -> Result<TrainOutcome> {
    std::fs::create_dir_all(dir)?;
    let outcome = train_model(method, &data.train.x, &data.val.x, hp, hier, opts)?;

    let ckpt_path = dir.join("checkpoint.json");
    save_checkpoint(&ckpt_path, &outcome.model)?;

    let loss_path = dir.join("loss.csv");
    let loss_file = std::fs::File::create(&loss_path)?;
    outcome.report.write_loss_csv(loss_file)?;

    let sel_path = dir.join("selection.csv");
    write_selection_csv(&sel_path, &outcome.model.selection()?)?;

    let mut artifacts = vec![
        ckpt_path.display().to_string(),
        loss_path.display().to_string(),
        sel_path.display().to_string(),
    ];
    if let Some(groups) = outcome.model.hierarchical_selection()? {
        let groups_path = dir.join("groups.csv");
        write_groups_csv(&groups_path, &groups)?;
        artifacts.push(groups_path.display().to_string());
    }

    let sidecar = RunSidecar {
        command,
        dataset: dataset_arg,
        dataset_name: &data.name,
        normalize: data.normalize,
        split_seed: data.split_seed,
        split_sizes: data.split_sizes,
        train_provenance: &data.train.provenance,
        run: &outcome.report.metadata,
        wall_secs: outcome.report.wall_secs,
        artifacts,
    };
    let meta = serde_json::to_string_pretty(&sidecar)
        .map_err(|e| FaeError::Checkpoint(format!("metadata: {e}")))?;
    std::fs::write(dir.join("metadata.json"), meta + "\n")?;
    Ok(outcome)
}

fn cmd_train(cmd: TrainCmd) -> Result<()> {
    let method: Method = cmd.method.parse()?;
    if method == Method::Hfae {
        return Err(FaeError::InvalidArgument(
            "use the `hfae` subcommand for hierarchical training".into(),
        ));
    }
    for rep in 0..cmd.train.repeats.max(1) {
        let seed = cmd.train.seed + rep as u64;
        let data = prepare_data(&cmd.data, cmd.data.split_seed + rep as u64)?;
        let hp = build_hyperparams(&cmd.train, data.train.m(), seed)?;
        let dir = cmd.out.join(format!("seed_{seed}"));
        let outcome = run_and_write(
            "train",
            &data,
            &cmd.data.dataset,
            method,
            &hp,
            None,
            &train_options(&cmd.train),
            &dir,
        )?;
        let last = outcome.report.epochs.last();
        println!(
            "{method} seed {seed}: {} epochs, best epoch {:?}, final val total {}, artifacts in {}",
            outcome.report.epochs.len(),
            outcome.model.best_epoch,
            last.map_or("n/a".into(), |r| format!("{:.6e}", r.val_total)),
            dir.display()
        );
    }
    Ok(())
}

fn cmd_hfae(cmd: HfaeCmd) -> Result<()> {
    let hier_lambdas = match &cmd.hfae_lambdas {
        Some(spec) => {
            let vals: Vec<f64> = spec
                .split(',')
                .map(|p| {
                    p.trim().parse::<f64>().map_err(|_| {
                        FaeError::InvalidArgument(format!("bad hierarchy coefficient '{p}'"))
                    })
                })
                .collect::<Result<_>>()?;
            if vals.len() != cmd.h + 1 {
                return Err(FaeError::InvalidArgument(format!(
                    "--hfae-lambdas needs {} values (lambda0..lambda{}), got {}",
                    cmd.h + 1,
                    cmd.h,
                    vals.len()
                )));
            }
            HierarchyParams {
                h: cmd.h,
                lambda0: vals[0],
                lambdas: vals[1..].to_vec(),
            }
        }
        None => match cmd.h {
            3 => HierarchyParams::default_h3(),
            1 => HierarchyParams::from_fae(cmd.train.lambda1, cmd.train.lambda2),
            h => {
                return Err(FaeError::InvalidArgument(format!(
                    "--hfae-lambdas is required for h={h} (defaults exist for h=1 and h=3)"
                )))
            }
        },
    };

    for rep in 0..cmd.train.repeats.max(1) {
        let seed = cmd.train.seed + rep as u64;
        let data = prepare_data(&cmd.data, cmd.data.split_seed + rep as u64)?;
        let hp = build_hyperparams(&cmd.train, data.train.m(), seed)?;
        let dir = cmd.out.join(format!("seed_{seed}"));
        let outcome = run_and_write(
            "hfae",
            &data,
            &cmd.data.dataset,
            Method::Hfae,
            &hp,
            Some(&hier_lambdas),
            &train_options(&cmd.train),
            &dir,
        )?;
        println!(
            "hfae h={} seed {seed}: {} epochs, best epoch {:?}, artifacts in {}",
            hier_lambdas.h,
            outcome.report.epochs.len(),
            outcome.model.best_epoch,
            dir.display()
        );
    }
    Ok(())
}

// ---------------------------------------------------------------------------
// evaluation

/// Linear reconstruction MSE on the test split (decoder fitted on train)
/// and, when labels exist, extra-trees accuracy for the given selection.
fn evaluate_selection(
    data: &PreparedData,
    sel: &SelectionResult,
    trees: usize,
    trees_seed: u64,
) -> Result<(f64, Option<f64>)> {
    let decoder = fit_linear_decoder(&data.train.x, sel)?;
    let recon = recon_error(&data.test.x, sel, &decoder)?;

    let acc = match (&data.train.labels, &data.test.labels) {
        (Some(train_y), Some(test_y)) => {
            let mut params = ExtraTreesParams::new(trees_seed);
            params.n_trees = trees;
            let train_sel = data.train.x.select_cols(&sel.indices)?;
            let test_sel = data.test.x.select_cols(&sel.indices)?;
            let model = fit_extra_trees(&train_sel, train_y, &params)?;
            let pred = predict(&model, &test_sel)?;
            Some(accuracy(&pred, test_y)?)
        }
        _ => None,
    };
    Ok((recon, acc))
}

fn cmd_eval(cmd: EvalCmd) -> Result<()> {
    let model = load_checkpoint(&cmd.checkpoint)?;
    let data = prepare_data(&cmd.data, cmd.data.split_seed)?;
    if data.train.m() != model.weights.len() {
        return Err(FaeError::dim(
            "eval",
            format!(
                "checkpoint has {} features, dataset has {}",
                model.weights.len(),
                data.train.m()
            ),
        ));
    }

    let sel = model.selection()?;
    let (recon, acc) = evaluate_selection(&data, &sel, cmd.trees, cmd.trees_seed)?;
    append_metrics_row(
        &cmd.out,
        &MetricsRow {
            dataset: data.name.clone(),
            method: model.method.to_string(),
            k: model.hyperparams.k,
            seed: model.hyperparams.seed,
            recon_mse: recon,
            accuracy: acc,
        },
    )?;
    println!(
        "{}: k={} recon_mse {:.6e}{}",
        model.method,
        model.hyperparams.k,
        recon,
        acc.map_or(String::new(), |a| format!(", accuracy {a:.4}"))
    );

    // Hierarchies additionally report each group on its own.
    if let Some(groups) = model.hierarchical_selection()? {
        for (gi, group) in groups.groups.iter().enumerate() {
            let (g_recon, g_acc) = evaluate_selection(&data, group, cmd.trees, cmd.trees_seed)?;
            append_metrics_row(
                &cmd.out,
                &MetricsRow {
                    dataset: data.name.clone(),
                    method: format!("hfae-group{}", gi + 1),
                    k: group.k(),
                    seed: model.hyperparams.seed,
                    recon_mse: g_recon,
                    accuracy: g_acc,
                },
            )?;
            println!(
                "  group {}: recon_mse {:.6e}{}",
                gi + 1,
                g_recon,
                g_acc.map_or(String::new(), |a| format!(", accuracy {a:.4}"))
            );
        }
    }
    Ok(())
}

fn cmd_sweep_k(cmd: SweepCmd) -> Result<()> {
    let method: Method = cmd.method.parse()?;
    if method == Method::Hfae {
        return Err(FaeError::InvalidArgument(
            "sweep-k supports ae, iae, and fae".into(),
        ));
    }
    let ks: Vec<usize> = cmd
        .k_list
        .split(',')
        .map(|p| {
            p.trim()
                .parse::<usize>()
                .map_err(|_| FaeError::InvalidArgument(format!("bad k '{p}' in --k-list")))
        })
        .collect::<Result<_>>()?;
    if ks.is_empty() {
        return Err(FaeError::InvalidArgument("--k-list is empty".into()));
    }

    let sweep_csv = cmd.out.join("sweep.csv");
    std::fs::create_dir_all(&cmd.out)?;
    let mut wtr = csv::Writer::from_path(&sweep_csv)
        .map_err(|e| FaeError::Checkpoint(format!("sweep csv: {e}")))?;
    wtr.write_record(["k", "recon_mse", "accuracy", "seed"])
        .map_err(|e| FaeError::Checkpoint(format!("sweep csv: {e}")))?;

    for &k in &ks {
        for rep in 0..cmd.train.repeats.max(1) {
            let seed = cmd.train.seed + rep as u64;
            let data = prepare_data(&cmd.data, cmd.data.split_seed + rep as u64)?;
            let mut args = cmd.train.clone();
            args.k = Some(k);
            let hp = build_hyperparams(&args, data.train.m(), seed)?;
            let dir = cmd.out.join(format!("k_{k}")).join(format!("seed_{seed}"));
            let outcome = run_and_write(
                "sweep-k",
                &data,
                &cmd.data.dataset,
                method,
                &hp,
                None,
                &train_options(&cmd.train),
                &dir,
            )?;
            let sel = outcome.model.selection()?;
            let (recon, acc) = evaluate_selection(&data, &sel, cmd.trees, cmd.trees_seed)?;
            wtr.write_record(&[
                k.to_string(),
                format!("{recon:.17e}"),
                acc.map(|a| format!("{a:.17e}")).unwrap_or_default(),
                seed.to_string(),
            ])
            .map_err(|e| FaeError::Checkpoint(format!("sweep csv: {e}")))?;
            println!(
                "k={k} seed {seed}: recon_mse {recon:.6e}{}",
                acc.map_or(String::new(), |a| format!(", accuracy {a:.4}"))
            );
        }
    }
    wtr.flush()?;
    println!("sweep written to {}", sweep_csv.display());
    Ok(())
}
