use std::fs::{self, File};
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use cosrec::checkpoint::RngState;
use cosrec::data::{parse_gowalla, parse_movielens, preprocess, read_dataset, write_dataset, FilterConfig};
use cosrec::export::export_filters;
use cosrec::{evaluate, train, Checkpoint, CosRecModel, Dataset, PopRec, RunConfig};
use log::info;

use crate::args::{BaselineArg, DatasetArg, EvaluateArgs, ExportArgs, PreprocessArgs, TrainArgs};
use crate::failure::usage;

/// Uses `given`, or `name` inside the data directory.
fn resolve(given: Option<PathBuf>, data_dir: Option<&Path>, name: &str, flag: &str) -> Result<PathBuf> {
    match (given, data_dir) {
        (Some(p), _) => Ok(p),
        (None, Some(dir)) => Ok(dir.join(name)),
        (None, None) => Err(usage(format!("{flag} is required when COSREC_DATA_DIR is not set"))),
    }
}

fn open(path: &Path) -> Result<BufReader<File>> {
    let f = File::open(path).with_context(|| format!("cannot open {}", path.display()))?;
    Ok(BufReader::new(f))
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        fs::create_dir_all(parent).with_context(|| format!("cannot create {}", parent.display()))?;
    }
    let f = File::create(path).with_context(|| format!("cannot create {}", path.display()))?;
    Ok(BufWriter::new(f))
}

fn load_dataset(path: &Path) -> Result<Dataset> {
    read_dataset(open(path)?).with_context(|| format!("reading dataset {}", path.display()))
}

fn load_checkpoint(path: &Path) -> Result<Checkpoint> {
    // open separately so a missing file reports as I/O
    let reader = open(path)?;
    Checkpoint::load(reader).with_context(|| format!("reading checkpoint {}", path.display()))
}

pub fn run_preprocess(args: PreprocessArgs, data_dir: Option<&Path>, out: &mut dyn Write) -> Result<()> {
    let input = resolve(args.input, data_dir, args.dataset.raw_file_name(), "--input")?;
    let output = resolve(args.output, data_dir, args.dataset.dataset_file_name(), "--output")?;
    let reader: Box<dyn BufRead> = Box::new(open(&input)?);
    let raw = match args.dataset {
        DatasetArg::Ml1m => parse_movielens(reader),
        DatasetArg::Gowalla => parse_gowalla(reader),
    }
    .with_context(|| format!("parsing {}", input.display()))?;
    info!("parsed {} interactions from {}", raw.len(), input.display());

    let kind: cosrec::train::DatasetKind = args.dataset.into();
    let defaults = kind.default_filter();
    let filter = FilterConfig {
        min_user_actions: args.min_user.unwrap_or(defaults.min_user_actions),
        min_item_actions: args.min_item.unwrap_or(defaults.min_item_actions),
    };
    let dataset = preprocess(&raw, filter, args.seed)?;
    let mut w = create(&output)?;
    write_dataset(&dataset, &mut w)?;
    w.flush().with_context(|| format!("writing {}", output.display()))?;

    let stats = serde_json::to_string(&dataset.stats())?;
    let stats_path = with_suffix(&output, ".stats.json");
    fs::write(&stats_path, format!("{stats}\n")).with_context(|| format!("writing {}", stats_path.display()))?;
    writeln!(out, "{stats}")?;
    info!("wrote {} and {}", output.display(), stats_path.display());
    Ok(())
}

fn with_suffix(path: &Path, suffix: &str) -> PathBuf {
    let mut s = path.as_os_str().to_owned();
    s.push(suffix);
    PathBuf::from(s)
}

pub fn run_config(args: &TrainArgs, data_path: &Path) -> RunConfig {
    let kind = args.dataset.into();
    let mut run = RunConfig::new(kind);
    run.data_path = Some(data_path.display().to_string());
    run.dim = args.dim.unwrap_or(kind.default_dim());
    run.markov_order = args.markov_order;
    run.horizon = args.horizon;
    run.negatives = args.negatives;
    run.batch_size = args.batch_size;
    run.learning_rate = args.lr;
    run.weight_decay = args.weight_decay;
    run.dropout = args.dropout;
    run.block_channels = [args.d1, args.d2];
    run.epochs = args.epochs;
    run.seed = args.seed;
    run.variant = args.variant.into();
    run.first_kernel = args.first_kernel;
    run.patience = args.patience;
    run.validation_fraction = args.validation_fraction;
    run
}

pub fn run_train(args: TrainArgs, data_dir: Option<&Path>, out: &mut dyn Write) -> Result<()> {
    let data = resolve(args.data.clone(), data_dir, args.dataset.dataset_file_name(), "--data")?;
    let dataset = load_dataset(&data)?;
    let run = run_config(&args, &data);
    run.validate()?;
    let config = run.model_config(dataset.num_users, dataset.num_items)?;
    let model = CosRecModel::<f32>::new(config, run.seed)?;
    info!("training on {} users, {} items, {} actions", dataset.num_users, dataset.num_items, dataset.num_actions());

    let log_path = args.log.clone().unwrap_or_else(|| with_suffix(&args.out, ".log.jsonl"));
    let mut log = create(&log_path)?;
    let outcome = train(model, &dataset, &run, |r| {
        let line = r.to_json_line();
        writeln!(log, "{line}")?;
        log.flush()?;
        info!("{line}");
        Ok(())
    })
    .context("training failed")?;

    let report = evaluate(&outcome.model, &dataset, args.threads)?;
    let checkpoint = Checkpoint {
        run,
        model: outcome.model,
        optimizer: Some(outcome.optimizer),
        rng: Some(RngState::capture(&outcome.rng)),
    };
    let mut w = create(&args.out)?;
    checkpoint.save(&mut w)?;
    w.flush().with_context(|| format!("writing {}", args.out.display()))?;
    info!("wrote checkpoint {} and log {}", args.out.display(), log_path.display());
    writeln!(out, "{}", report.to_json_line())?;
    Ok(())
}

pub fn run_evaluate(args: EvaluateArgs, data_dir: Option<&Path>, out: &mut dyn Write) -> Result<()> {
    let threads = args.threads.max(1);
    let line = match (&args.checkpoint, args.model) {
        (Some(path), _) => {
            let ckpt = load_checkpoint(path)?;
            let name = ckpt.run.dataset;
            let default_name = match name {
                cosrec::DatasetKind::Ml1m => DatasetArg::Ml1m,
                cosrec::DatasetKind::Gowalla => DatasetArg::Gowalla,
            }
            .dataset_file_name();
            let data = resolve(args.data, data_dir, default_name, "--data")?;
            let dataset = load_dataset(&data)?;
            let c = ckpt.model.config();
            if c.num_users != dataset.num_users || c.num_items != dataset.num_items {
                return Err(usage(format!(
                    "checkpoint vocabulary ({} users, {} items) does not match dataset {} ({} users, {} items)",
                    c.num_users,
                    c.num_items,
                    data.display(),
                    dataset.num_users,
                    dataset.num_items
                )));
            }
            evaluate(&ckpt.model, &dataset, threads)?.to_json_line()
        }
        (None, Some(BaselineArg::Poprec)) => {
            let data = resolve(args.data, data_dir, DatasetArg::Ml1m.dataset_file_name(), "--data")?;
            let dataset = load_dataset(&data)?;
            evaluate(&PopRec::fit(&dataset), &dataset, threads)?.to_json_line()
        }
        (None, None) => return Err(usage("either --checkpoint or --model is required")),
    };
    writeln!(out, "{line}")?;
    Ok(())
}

pub fn run_export(args: ExportArgs, out: &mut dyn Write) -> Result<()> {
    let ckpt = load_checkpoint(&args.checkpoint)?;
    let files = export_filters(&ckpt.model, &args.layer, &args.out).map_err(|e| match e {
        cosrec::Error::Config(msg) => usage(msg),
        other => other.into(),
    })?;
    writeln!(out, "{}", serde_json::json!({ "layer": args.layer, "files": files.len() }))?;
    Ok(())
}
