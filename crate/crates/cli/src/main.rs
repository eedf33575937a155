//! One binary, four subcommands: convert dialogs into task files, train the
//! memory network on a task file, evaluate a saved model, and inspect
//! per-hop attention for chosen samples.

mod config;

use std::path::{Path, PathBuf};

use anyhow::{anyhow, bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use dialog_reader::corpus::{load_pretrained_embeddings, parse_dialog_corpus, Ontology, Vocabulary};
use dialog_reader::eval::{attention_report, evaluate, supporting_fact_hit_rate, Predictor};
use dialog_reader::model::{load_params, save_params, ModelConfig, Tying};
use dialog_reader::parallel::with_workers;
use dialog_reader::taskgen::{
    augment_corpus, build_answer_vocabulary, generate_task, read_task_file,
    split_train_validation, vocabulary_for_samples, write_task_file, AugmentRules,
    AugmentTemplates, QASample, TaskKind,
};
use dialog_reader::training::{train, TrainConfig, TrainHistory};

use config::FileConfig;

#[derive(Parser)]
#[command(
    name = "dialog-reader",
    about = "Slot-tracking dialogs as reading-comprehension tasks, answered by a multi-hop memory network",
    version
)]
struct Cli {
    /// Flat key=value config file (default: $DIALOG_READER_CONFIG)
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Convert an annotated dialog corpus into task files
    Convert(ConvertArgs),
    /// Train the memory network on a task file
    Train(TrainArgs),
    /// Evaluate a saved model on a task file
    Eval(EvalArgs),
    /// Print per-hop attention tables for selected samples
    Inspect(InspectArgs),
}

#[derive(Args)]
struct ConvertArgs {
    /// Dialog corpus file ("# dialog" records)
    #[arg(long)]
    corpus: Option<PathBuf>,
    /// Ontology file (default: bundled domains)
    #[arg(long)]
    ontology: Option<PathBuf>,
    /// Augmentation template file (default: bundled bank)
    #[arg(long)]
    templates: Option<PathBuf>,
    /// Task(s) to generate: factoid|yesno|indefinite|count|list|all
    #[arg(long = "task")]
    tasks: Vec<String>,
    /// Probability of intra-utterance substitution ("v" -> "v or w")
    #[arg(long)]
    augment_r1: Option<f64>,
    /// Probability of inter-utterance addition ("i would also accept ...")
    #[arg(long)]
    augment_r2: Option<f64>,
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory for <task>.txt files
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct TrainArgs {
    /// Task file produced by convert
    task_file: Option<PathBuf>,
    #[arg(long)]
    ontology: Option<PathBuf>,
    /// Where to write the model container
    #[arg(long)]
    model: Option<PathBuf>,
    /// Where to write the history log (default: <model>.history)
    #[arg(long)]
    out: Option<PathBuf>,
    /// Word-vector file for initializing A^1 and B
    #[arg(long)]
    embeddings: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    /// Embedding size d
    #[arg(long)]
    dim: Option<usize>,
    #[arg(long)]
    hops: Option<usize>,
    /// adjacent | layerwise
    #[arg(long)]
    tying: Option<String>,
    #[arg(long)]
    epochs: Option<usize>,
    #[arg(long)]
    lr: Option<f64>,
    #[arg(long)]
    batch: Option<usize>,
    #[arg(long)]
    clip: Option<f64>,
    /// Epochs with the attention softmax removed
    #[arg(long)]
    linear_start: Option<usize>,
    /// Memory capacity override (0 = longest training context)
    #[arg(long)]
    memory_size: Option<usize>,
    /// Held-out dialog fraction for validation (0 disables)
    #[arg(long)]
    holdout: Option<f64>,
    /// Comma-separated embedding sizes to sweep, e.g. 20,40,60
    #[arg(long)]
    sweep_d: Option<String>,
    /// Worker threads (0 = library default)
    #[arg(long)]
    workers: Option<usize>,
}

#[derive(Args)]
struct EvalArgs {
    /// Task file to evaluate on
    task_file: Option<PathBuf>,
    /// Model container written by train
    #[arg(long)]
    model: Option<PathBuf>,
    /// Also write metrics as "task,slot,n,accuracy" CSV
    #[arg(long)]
    metrics: Option<PathBuf>,
    /// Restrict to one task kind
    #[arg(long)]
    task: Option<String>,
    /// Also report how often attention argmax hits the supporting fact
    #[arg(long)]
    hit_rate: bool,
    #[arg(long)]
    workers: Option<usize>,
}

#[derive(Args)]
struct InspectArgs {
    /// Task file holding the samples
    task_file: Option<PathBuf>,
    #[arg(long)]
    model: Option<PathBuf>,
    /// Dialog ordinal as reported by the task file reader (1-based)
    #[arg(long)]
    dialog: Option<String>,
    /// Prefix length (number of context utterances)
    #[arg(long)]
    prefix: Option<usize>,
    /// Restrict to one slot: area | food | pricerange
    #[arg(long)]
    slot: Option<String>,
    /// Restrict to one task kind
    #[arg(long)]
    task: Option<String>,
    /// Show every hop column (the default)
    #[arg(long)]
    all_hops: bool,
    /// Show only this hop's column (1-based)
    #[arg(long)]
    hop: Option<usize>,
    /// Also print the machine-readable block
    #[arg(long)]
    csv: bool,
}

fn main() {
    let cli = Cli::parse();
    let outcome = (|| -> Result<()> {
        let file_config = FileConfig::resolve(cli.config.as_deref())?;
        if let Some(source) = file_config.source() {
            println!("# config file: {}", source.display());
        }
        match cli.command {
            Command::Convert(args) => cmd_convert(args, &file_config),
            Command::Train(args) => cmd_train(args, &file_config),
            Command::Eval(args) => cmd_eval(args, &file_config),
            Command::Inspect(args) => cmd_inspect(args, &file_config),
        }
    })();
    if let Err(e) = outcome {
        eprintln!("error: {e:#}");
        std::process::exit(1);
    }
}

fn load_ontology(path: Option<&Path>) -> Result<Ontology> {
    match path {
        Some(p) => Ontology::load(p).with_context(|| format!("loading ontology {}", p.display())),
        None => Ok(Ontology::builtin()),
    }
}

fn parse_tasks(raw: &[String]) -> Result<Vec<TaskKind>> {
    if raw.is_empty() || raw.iter().any(|t| t == "all") {
        return Ok(TaskKind::ALL.to_vec());
    }
    raw.iter()
        .map(|t| {
            TaskKind::parse(t)
                .ok_or_else(|| anyhow!("unknown task \"{t}\" (factoid|yesno|indefinite|count|list|all)"))
        })
        .collect()
}

fn parse_tying(raw: &str) -> Result<Tying> {
    Tying::parse(raw).ok_or_else(|| anyhow!("unknown tying \"{raw}\" (adjacent|layerwise)"))
}

fn read_samples(path: &Path) -> Result<Vec<QASample>> {
    let text = std::fs::read_to_string(path)
        .with_context(|| format!("reading task file {}", path.display()))?;
    let samples =
        read_task_file(&text).with_context(|| format!("parsing task file {}", path.display()))?;
    if samples.is_empty() {
        bail!("task file {} holds no samples", path.display());
    }
    Ok(samples)
}

fn cmd_convert(args: ConvertArgs, file: &FileConfig) -> Result<()> {
    let corpus_path: PathBuf = file
        .get_opt("corpus", args.corpus)?
        .ok_or_else(|| anyhow!("--corpus is required"))?;
    let ontology_path: Option<PathBuf> = file.get_opt("ontology", args.ontology)?;
    let templates_path: Option<PathBuf> = file.get_opt("templates", args.templates)?;
    let tasks = parse_tasks(&if args.tasks.is_empty() {
        file.get_opt::<String>("task", None)?
            .map(|t| vec![t])
            .unwrap_or_default()
    } else {
        args.tasks
    })?;
    let r1 = file.get("augment-r1", args.augment_r1, 0.0)?;
    let r2 = file.get("augment-r2", args.augment_r2, 0.0)?;
    let seed = file.get("seed", args.seed, 0)?;
    let out_dir: PathBuf = file.get("out", args.out, PathBuf::from("."))?;

    println!("# corpus = {}", corpus_path.display());
    println!("# ontology = {}", display_or_builtin(ontology_path.as_deref()));
    println!("# templates = {}", display_or_builtin(templates_path.as_deref()));
    println!(
        "# tasks = {}",
        tasks.iter().map(|t| t.as_str()).collect::<Vec<_>>().join(",")
    );
    println!("# augment-r1 = {r1}");
    println!("# augment-r2 = {r2}");
    println!("# seed = {seed}");
    println!("# out = {}", out_dir.display());

    let ontology = load_ontology(ontology_path.as_deref())?;
    let corpus_text = std::fs::read_to_string(&corpus_path)
        .with_context(|| format!("reading corpus {}", corpus_path.display()))?;
    let dialogs = parse_dialog_corpus(&corpus_text, &ontology)
        .with_context(|| format!("parsing corpus {}", corpus_path.display()))?;
    println!(
        "parsed {} dialogs ({} turns)",
        dialogs.len(),
        dialogs.iter().map(|d| d.len()).sum::<usize>()
    );

    let dialogs = if r1 > 0.0 || r2 > 0.0 {
        let templates = match templates_path.as_deref() {
            Some(p) => AugmentTemplates::load(p)
                .with_context(|| format!("loading templates {}", p.display()))?,
            None => AugmentTemplates::builtin(),
        };
        augment_corpus(&dialogs, AugmentRules::new(r1, r2), &templates, &ontology, seed)
    } else {
        dialogs
    };

    std::fs::create_dir_all(&out_dir)
        .with_context(|| format!("creating output directory {}", out_dir.display()))?;
    for task in tasks {
        let samples = generate_task(&dialogs, task, &ontology, seed);
        let answers = build_answer_vocabulary(&samples, &ontology);
        let path = out_dir.join(format!("{}.txt", task.as_str()));
        std::fs::write(&path, write_task_file(&samples))
            .with_context(|| format!("writing {}", path.display()))?;
        println!(
            "task {}: {} samples -> {} (answer vocabulary: {} labels)",
            task.as_str(),
            samples.len(),
            path.display(),
            answers.len()
        );
    }
    Ok(())
}

fn display_or_builtin(path: Option<&Path>) -> String {
    path.map(|p| p.display().to_string())
        .unwrap_or_else(|| "(builtin)".to_string())
}

fn cmd_train(args: TrainArgs, file: &FileConfig) -> Result<()> {
    let task_file: PathBuf = file
        .get_opt("task-file", args.task_file)?
        .ok_or_else(|| anyhow!("a task file argument is required"))?;
    let ontology_path: Option<PathBuf> = file.get_opt("ontology", args.ontology)?;
    let model_path: PathBuf = file.get("model", args.model, PathBuf::from("model.mrdt"))?;
    let history_path: PathBuf = file.get(
        "out",
        args.out,
        model_path.with_extension("history"),
    )?;
    let embeddings_path: Option<PathBuf> = file.get_opt("embeddings", args.embeddings)?;
    let seed = file.get("seed", args.seed, 0)?;
    let dim = file.get("dim", args.dim, 40)?;
    let hops = file.get("hops", args.hops, 5)?;
    let tying = parse_tying(&file.get("tying", args.tying, "adjacent".to_string())?)?;
    let epochs = file.get("epochs", args.epochs, 100)?;
    let lr = file.get("lr", args.lr, 0.005)?;
    let batch = file.get("batch", args.batch, 16)?;
    let clip = file.get("clip", args.clip, 40.0)?;
    let linear_start = file.get("linear-start", args.linear_start, 20)?;
    let memory_size = file.get("memory-size", args.memory_size, 0)?;
    let holdout = file.get("holdout", args.holdout, 0.10)?;
    let sweep: Vec<usize> = match file.get_opt("sweep-d", args.sweep_d)? {
        None => vec![dim],
        Some(raw) => raw
            .split(',')
            .map(|d| d.trim().parse().map_err(|_| anyhow!("bad sweep entry \"{d}\"")))
            .collect::<Result<_>>()?,
    };
    let workers = file.get("workers", args.workers, 0)?;

    println!("# task-file = {}", task_file.display());
    println!("# ontology = {}", display_or_builtin(ontology_path.as_deref()));
    println!("# model = {}", model_path.display());
    println!("# out = {}", history_path.display());
    println!("# embeddings = {}", display_or_builtin(embeddings_path.as_deref()).replace("(builtin)", "(none)"));
    println!("# seed = {seed}");
    println!("# dim = {dim}");
    println!("# hops = {hops}");
    println!("# tying = {}", tying.as_str());
    println!("# epochs = {epochs}");
    println!("# lr = {lr}");
    println!("# batch = {batch}");
    println!("# clip = {clip}");
    println!("# linear-start = {linear_start}");
    println!("# memory-size = {memory_size}");
    println!("# holdout = {holdout}");
    println!(
        "# sweep-d = {}",
        sweep.iter().map(|d| d.to_string()).collect::<Vec<_>>().join(",")
    );
    println!("# workers = {workers}");

    let ontology = load_ontology(ontology_path.as_deref())?;
    let samples = read_samples(&task_file)?;
    let (train_samples, val_samples) = if holdout > 0.0 {
        split_train_validation(&samples, holdout, seed).context("holdout split")?
    } else {
        (samples.clone(), Vec::new())
    };
    println!(
        "{} training samples, {} validation samples",
        train_samples.len(),
        val_samples.len()
    );

    let vocab = vocabulary_for_samples(&samples, &ontology);
    let answers = build_answer_vocabulary(&train_samples, &ontology);
    let capacity = if memory_size > 0 {
        memory_size
    } else {
        train_samples.iter().map(|s| s.context.len()).max().unwrap_or(1)
    };
    println!(
        "vocabulary: {} tokens, answer vocabulary: {} labels, memory capacity: {capacity}",
        vocab.len(),
        answers.len()
    );

    let train_config = TrainConfig {
        lr0: lr,
        max_epochs: epochs,
        linear_start_epochs: linear_start,
        batch_size: batch,
        clip_norm: clip,
        seed,
        ..TrainConfig::default()
    };
    train_config.validate().map_err(|m| anyhow!(m))?;

    let pretrained = match embeddings_path.as_deref() {
        None => None,
        Some(p) => {
            let text = std::fs::read_to_string(p)
                .with_context(|| format!("reading embeddings {}", p.display()))?;
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(2);
            Some(
                load_pretrained_embeddings(&text, &vocab, dim, &mut rng)
                    .with_context(|| format!("loading embeddings {}", p.display()))?,
            )
        }
    };
    if pretrained.is_some() && sweep.len() > 1 {
        bail!("--embeddings fixes the dimension and cannot be combined with --sweep-d");
    }

    let mut best: Option<(f64, usize, dialog_reader::model::MemN2NParams, ModelConfig, TrainHistory)> =
        None;
    for d in sweep {
        let model_config = ModelConfig {
            d,
            hops,
            tying,
            memory_capacity: capacity,
            answer_size: answers.len(),
            vocab_size: vocab.len(),
            linear_attention: false,
        };
        let (params, history) = with_workers(workers, || {
            train(
                &train_samples,
                &val_samples,
                &vocab,
                &answers,
                &model_config,
                &train_config,
                pretrained.as_ref(),
            )
        })?;
        let record = &history.epochs[history.best_epoch - 1];
        println!(
            "d={d}: best epoch {} validation accuracy {:.4}",
            history.best_epoch, record.val_accuracy
        );
        let is_better = best
            .as_ref()
            .map(|(acc, _, _, _, _)| record.val_accuracy > *acc)
            .unwrap_or(true);
        if is_better {
            best = Some((record.val_accuracy, d, params, model_config, history));
        }
    }

    let (best_acc, best_d, params, model_config, history) = best.expect("at least one sweep entry");
    std::fs::write(&history_path, history.log_lines())
        .with_context(|| format!("writing history {}", history_path.display()))?;
    save_params(&params, &model_config, &vocab, &answers, &model_path)
        .with_context(|| format!("writing model {}", model_path.display()))?;
    println!(
        "saved d={best_d} model (validation accuracy {:.4}) to {} and history to {}",
        best_acc,
        model_path.display(),
        history_path.display()
    );
    Ok(())
}

/// Question tokens are template-generated and never UNK for the corpus the
/// model was trained on; an unknown one means mismatched vocabularies.
fn check_vocabulary_compatibility(samples: &[QASample], vocab: &Vocabulary) -> Result<()> {
    for s in samples {
        for token in &s.question {
            if vocab.index(token).is_none() {
                bail!(
                    "vocabulary mismatch: question token \"{token}\" is unknown to the model container"
                );
            }
        }
    }
    Ok(())
}

fn cmd_eval(args: EvalArgs, file: &FileConfig) -> Result<()> {
    let task_file: PathBuf = file
        .get_opt("task-file", args.task_file)?
        .ok_or_else(|| anyhow!("a task file argument is required"))?;
    let model_path: PathBuf = file
        .get_opt("model", args.model)?
        .ok_or_else(|| anyhow!("--model is required"))?;
    let metrics_path: Option<PathBuf> = file.get_opt("metrics", args.metrics)?;
    let task_filter: Option<String> = file.get_opt("task", args.task)?;
    let workers = file.get("workers", args.workers, 0)?;

    println!("# task-file = {}", task_file.display());
    println!("# model = {}", model_path.display());
    println!("# workers = {workers}");

    let container = load_params(&model_path)
        .with_context(|| format!("loading model {}", model_path.display()))?;
    let mut samples = read_samples(&task_file)?;
    if let Some(raw) = task_filter {
        let kind = TaskKind::parse(&raw).ok_or_else(|| anyhow!("unknown task \"{raw}\""))?;
        samples.retain(|s| s.task == kind);
        if samples.is_empty() {
            bail!("no {} samples in {}", kind.as_str(), task_file.display());
        }
    }
    check_vocabulary_compatibility(&samples, &container.vocab)?;

    let predictor = Predictor {
        params: &container.params,
        config: &container.config,
        vocab: &container.vocab,
        answers: &container.answers,
    };
    let report = with_workers(workers, || evaluate(&predictor, &samples))?;
    print!("{}", report.to_table());

    if args.hit_rate {
        match with_workers(workers, || supporting_fact_hit_rate(&predictor, &samples)) {
            Ok(rate) => println!("supporting-fact attention hit rate: {rate:.4}"),
            Err(e) => println!("supporting-fact hit rate unavailable: {e}"),
        }
    }
    if let Some(path) = metrics_path {
        std::fs::write(&path, report.to_csv())
            .with_context(|| format!("writing metrics {}", path.display()))?;
        println!("metrics written to {}", path.display());
    }
    Ok(())
}

fn cmd_inspect(args: InspectArgs, file: &FileConfig) -> Result<()> {
    let task_file: PathBuf = file
        .get_opt("task-file", args.task_file)?
        .ok_or_else(|| anyhow!("a task file argument is required"))?;
    let model_path: PathBuf = file
        .get_opt("model", args.model)?
        .ok_or_else(|| anyhow!("--model is required"))?;
    let dialog: String = file
        .get_opt("dialog", args.dialog)?
        .ok_or_else(|| anyhow!("--dialog is required"))?;
    let prefix: usize = file
        .get_opt("prefix", args.prefix)?
        .ok_or_else(|| anyhow!("--prefix is required"))?;
    let slot_filter: Option<String> = file.get_opt("slot", args.slot)?;
    let task_filter: Option<String> = file.get_opt("task", args.task)?;

    let container = load_params(&model_path)
        .with_context(|| format!("loading model {}", model_path.display()))?;
    let samples = read_samples(&task_file)?;

    let matches: Vec<&QASample> = samples
        .iter()
        .filter(|s| s.dialog_id == dialog && s.prefix_length == prefix)
        .filter(|s| {
            slot_filter
                .as_deref()
                .map(|f| s.slot.as_str() == f)
                .unwrap_or(true)
        })
        .filter(|s| {
            task_filter
                .as_deref()
                .map(|f| s.task.as_str() == f)
                .unwrap_or(true)
        })
        .collect();
    if matches.is_empty() {
        let mut available: Vec<String> = Vec::new();
        for s in &samples {
            let entry = format!("dialog {} prefix {} ({})", s.dialog_id, s.prefix_length, s.slot);
            if !available.contains(&entry) {
                available.push(entry);
            }
        }
        available.truncate(10);
        bail!(
            "no sample matches dialog {dialog} prefix {prefix}; nearest available:\n  {}",
            available.join("\n  ")
        );
    }

    let predictor = Predictor {
        params: &container.params,
        config: &container.config,
        vocab: &container.vocab,
        answers: &container.answers,
    };
    for sample in matches {
        let mut report = attention_report(&predictor, sample)?;
        if let Some(k) = args.hop {
            if args.all_hops {
                bail!("--hop and --all-hops are mutually exclusive");
            }
            if k == 0 || k > report.hops {
                bail!("hop {k} out of range 1..={}", report.hops);
            }
            for row in &mut report.rows {
                row.2 = vec![row.2[k - 1]];
            }
            report.hops = 1;
        }
        println!("[{} / {}]", sample.task.as_str(), sample.slot.as_str());
        print!("{}", report.to_text());
        if args.csv {
            print!("{}", report.to_csv());
        }
        println!();
    }
    Ok(())
}
