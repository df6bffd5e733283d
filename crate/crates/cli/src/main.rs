//! `treecost`: generate data and workloads, mine string rules, train, and
//! estimate or evaluate plans.

use std::fmt::Display;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::Arc;

use clap::error::ErrorKind;
use clap::{Args, Parser, Subcommand};

use treecost::featurizer::{DEFAULT_SAMPLE_SIZE, DEFAULT_STRING_DIM};
use treecost::model::checkpoint::CheckpointMeta;
use treecost::strings::{mine_rules, MiningConfig, SkipGramConfig, SubstringDictionary, TriePair};
use treecost::trainer::{
    encode_examples, generate_dataset, generate_workload, qerrors, select_loss_weight, split_indices, train,
    DatasetConfig, Evaluation, ExecConfig, Example, IndependenceBaseline, TrainConfig, WorkloadConfig,
};
use treecost::{
    Checkpoint, Dataset, Estimator, Featurizer, FeaturizerConfig, MemoryPool, ModelConfig, PlanTree, SampleStore,
    SchemaCatalog, StringEncoder,
};

const SAMPLES_DIR: &str = "samples";

#[derive(Parser, Debug)]
#[command(name = "treecost", version, about = "Learned cost and cardinality estimation for query plans")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Generate the synthetic dataset and its per-table samples.
    GenData(GenData),
    /// Generate a workload of plans labeled by the reference executor.
    GenQueries(GenQueries),
    /// Mine string extraction rules and train substring embeddings.
    MineRules(MineRules),
    /// Train a model on a labeled workload.
    Train(Train),
    /// Print cost and cardinality estimates for plan files.
    Estimate(Estimate),
    /// Compare the model and the baseline on a labeled workload.
    Evaluate(Evaluate),
}

#[derive(Args, Debug)]
struct DataArgs {
    /// Dataset directory.
    #[arg(long)]
    data_dir: PathBuf,
    /// Schema catalog file; must match the dataset's own catalog.
    #[arg(long)]
    schema: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct GenData {
    /// Output directory.
    #[arg(long)]
    data_dir: PathBuf,
    /// Also write the schema catalog here.
    #[arg(long)]
    schema: Option<PathBuf>,
    #[arg(long, default_value_t = 42)]
    seed: u64,
    /// Rows per table sample used for sample bitmaps.
    #[arg(long, default_value_t = DEFAULT_SAMPLE_SIZE)]
    sample_size: usize,
    #[arg(long, default_value_t = 10_000)]
    title_rows: usize,
    #[arg(long, default_value_t = 10_000)]
    info_rows: usize,
    /// Zero leaves out the cast_info table.
    #[arg(long, default_value_t = 0)]
    cast_rows: usize,
}

#[derive(Args, Debug)]
struct GenQueries {
    #[command(flatten)]
    data: DataArgs,
    /// Output directory for plan files.
    #[arg(long)]
    workload_dir: PathBuf,
    #[arg(long, default_value_t = 1000)]
    queries: usize,
    #[arg(long, default_value_t = 7)]
    seed: u64,
    /// Largest number of joined tables.
    #[arg(long, default_value_t = 2)]
    max_tables: usize,
    /// Largest number of string leaves per query.
    #[arg(long, default_value_t = 1)]
    string_predicates: usize,
}

#[derive(Args, Debug)]
struct MineRules {
    #[command(flatten)]
    data: DataArgs,
    /// Workload whose string predicates drive mining.
    #[arg(long)]
    workload_dir: PathBuf,
    /// Output dictionary file.
    #[arg(long)]
    dict: PathBuf,
    /// Substring budget; ten per workload string when absent.
    #[arg(long)]
    budget: Option<usize>,
    /// Skip-gram seed.
    #[arg(long, default_value_t = 42)]
    seed: u64,
}

#[derive(Args, Debug)]
struct Train {
    #[command(flatten)]
    data: DataArgs,
    #[arg(long)]
    workload_dir: PathBuf,
    /// Output checkpoint file.
    #[arg(long)]
    checkpoint: PathBuf,
    /// Substring dictionary; string operands are hashed when absent.
    #[arg(long)]
    dict: Option<PathBuf>,
    /// Cost loss weight; chosen by cross-validation when absent.
    #[arg(long)]
    omega: Option<f64>,
    #[arg(long, default_value_t = 30)]
    epochs: usize,
    #[arg(long, default_value_t = 64)]
    batch_size: usize,
    #[arg(long, default_value_t = 42)]
    seed: u64,
    /// Folds for the loss-weight search.
    #[arg(long, default_value_t = 3)]
    folds: usize,
}

#[derive(Args, Debug)]
struct ModelArgs {
    #[arg(long)]
    checkpoint: PathBuf,
    /// Substring dictionary; required by checkpoints trained with one.
    #[arg(long)]
    dict: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct Estimate {
    #[command(flatten)]
    data: DataArgs,
    #[command(flatten)]
    model: ModelArgs,
    /// Estimate every plan file in this directory.
    #[arg(long)]
    workload_dir: Option<PathBuf>,
    /// Plan files.
    plans: Vec<PathBuf>,
    /// Cached sub-plan representations; zero disables the pool.
    #[arg(long, default_value_t = 4096)]
    pool_capacity: usize,
}

#[derive(Args, Debug)]
struct Evaluate {
    #[command(flatten)]
    data: DataArgs,
    #[arg(long)]
    workload_dir: PathBuf,
    /// Model to evaluate; only the baseline is evaluated when absent.
    #[arg(long)]
    checkpoint: Option<PathBuf>,
    #[arg(long)]
    dict: Option<PathBuf>,
    /// Metrics table file; per-query errors go to `<file>.raw`.
    #[arg(long)]
    metrics_out: Option<PathBuf>,
    /// Add the executor's own labels as an estimator.
    #[arg(long)]
    include_oracle: bool,
}

/// A failed command and its exit code.
#[derive(Debug)]
struct Failure {
    code: u8,
    message: String,
}

impl Failure {
    fn usage(e: impl Display) -> Self {
        Failure { code: 1, message: e.to_string() }
    }

    fn data(e: impl Display) -> Self {
        Failure { code: 2, message: e.to_string() }
    }

    fn model(e: impl Display) -> Self {
        Failure { code: 3, message: e.to_string() }
    }
}

type Outcome = Result<(), Failure>;

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => 0,
                _ => 1,
            };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let result = match cli.command {
        Command::GenData(a) => gen_data(a),
        Command::GenQueries(a) => gen_queries(a),
        Command::MineRules(a) => mine(a),
        Command::Train(a) => train_cmd(a),
        Command::Estimate(a) => estimate(a),
        Command::Evaluate(a) => evaluate(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}

fn gen_data(a: GenData) -> Outcome {
    let cfg = DatasetConfig {
        title_rows: a.title_rows,
        info_rows: a.info_rows,
        cast_rows: a.cast_rows,
        seed: a.seed,
    };
    let ds = generate_dataset(&cfg);
    ds.save(&a.data_dir).map_err(Failure::data)?;
    SampleStore::draw(&ds, a.sample_size, a.seed)
        .save(&a.data_dir.join(SAMPLES_DIR))
        .map_err(Failure::data)?;
    if let Some(path) = &a.schema {
        ds.catalog.save(path).map_err(Failure::data)?;
    }
    for t in &ds.tables {
        println!("{}\t{} rows", t.name, t.rows());
    }
    Ok(())
}

fn load_data(a: &DataArgs) -> Result<(Dataset, Arc<SampleStore>), Failure> {
    let ds = Dataset::load(&a.data_dir).map_err(Failure::data)?;
    if let Some(path) = &a.schema {
        let given = SchemaCatalog::load(path).map_err(Failure::data)?;
        if given != ds.catalog {
            return Err(Failure::data(format!(
                "schema {} does not match the dataset in {}",
                path.display(),
                a.data_dir.display()
            )));
        }
    }
    let store = SampleStore::load(&a.data_dir.join(SAMPLES_DIR), &ds.catalog).map_err(Failure::data)?;
    Ok((ds, Arc::new(store)))
}

fn plan_name(i: usize) -> String {
    format!("q{i:05}.json")
}

fn gen_queries(a: GenQueries) -> Outcome {
    if a.max_tables == 0 {
        return Err(Failure::usage("--max-tables must be at least 1"));
    }
    let (ds, _) = load_data(&a.data)?;
    let cfg = WorkloadConfig {
        queries: a.queries,
        tables: (1, a.max_tables),
        string_predicates: (0, a.string_predicates),
        seed: a.seed,
        ..WorkloadConfig::default()
    };
    let plans = generate_workload(&ds, &cfg, &ExecConfig::default());
    fs::create_dir_all(&a.workload_dir).map_err(Failure::data)?;
    for (i, p) in plans.iter().enumerate() {
        fs::write(a.workload_dir.join(plan_name(i)), p.to_json()).map_err(Failure::data)?;
    }
    println!("{} plans written to {}", plans.len(), a.workload_dir.display());
    Ok(())
}

fn read_plan(path: &Path) -> Result<PlanTree, Failure> {
    let text = fs::read_to_string(path).map_err(|e| Failure::data(format!("{}: {e}", path.display())))?;
    PlanTree::parse(&text).map_err(|e| Failure::data(format!("{}: {e}", path.display())))
}

/// Every `*.json` plan in `dir`, by file name.
fn load_workload(dir: &Path) -> Result<Vec<(String, PlanTree)>, Failure> {
    let mut files: Vec<PathBuf> = fs::read_dir(dir)
        .map_err(|e| Failure::data(format!("{}: {e}", dir.display())))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|x| x == "json"))
        .collect();
    files.sort();
    if files.is_empty() {
        return Err(Failure::data(format!("no plan files in {}", dir.display())));
    }
    files
        .iter()
        .map(|p| Ok((p.file_name().unwrap_or_default().to_string_lossy().into_owned(), read_plan(p)?)))
        .collect()
}

fn mine(a: MineRules) -> Outcome {
    let (ds, _) = load_data(&a.data)?;
    let plans: Vec<PlanTree> = load_workload(&a.workload_dir)?.into_iter().map(|p| p.1).collect();
    let cfg = MiningConfig {
        budget: a.budget,
        skipgram: SkipGramConfig {
            seed: a.seed,
            ..SkipGramConfig::default()
        },
        ..MiningConfig::default()
    };
    let mined = mine_rules(&ds, &plans, &cfg).map_err(Failure::data)?;
    mined.dictionary.save(&a.dict).map_err(Failure::data)?;
    println!(
        "{} rules, {} substrings, dimension {}",
        mined.rules().len(),
        mined.dictionary.len(),
        mined.dictionary.dim
    );
    Ok(())
}

fn string_encoder(dict: Option<&Path>) -> Result<(StringEncoder, usize), Failure> {
    match dict {
        None => Ok((StringEncoder::Hash, DEFAULT_STRING_DIM)),
        Some(path) => {
            let d = SubstringDictionary::load(path).map_err(Failure::data)?;
            let dim = d.dim;
            Ok((StringEncoder::Embedding(Arc::new(TriePair::build(&d))), dim))
        }
    }
}

fn train_cmd(a: Train) -> Outcome {
    if a.batch_size == 0 {
        return Err(Failure::usage("--batch-size must be positive"));
    }
    let (ds, store) = load_data(&a.data)?;
    let plans: Vec<PlanTree> = load_workload(&a.workload_dir)?.into_iter().map(|p| p.1).collect();
    let (encoder, string_dim) = string_encoder(a.dict.as_deref())?;
    let fcfg = FeaturizerConfig {
        sample_size: store.sample_size,
        string_dim,
        ..FeaturizerConfig::default()
    };
    let featurizer = Featurizer::new(ds.catalog.clone(), store, encoder, fcfg).map_err(Failure::data)?;
    let examples = encode_examples(&featurizer, &plans).map_err(Failure::data)?;
    let (ti, vi) = split_indices(examples.len(), 0.1, a.seed);
    let pick = |idx: &[usize]| -> Vec<Example> { idx.iter().map(|&i| examples[i].clone()).collect() };
    let (tr, va) = (pick(&ti), pick(&vi));
    let config = ModelConfig::for_featurizer(&featurizer);
    let mut tcfg = TrainConfig {
        epochs: a.epochs,
        batch_size: a.batch_size,
        seed: a.seed,
        ..TrainConfig::default()
    };
    tcfg.omega = match a.omega {
        Some(w) if w.is_finite() && w > 0.0 => w,
        Some(w) => return Err(Failure::usage(format!("--omega must be positive, got {w}"))),
        None => {
            let (w, scores) = select_loss_weight(config, &tr, a.folds, &tcfg).map_err(Failure::model)?;
            for (cand, score) in scores {
                println!("omega {cand}\tcv error {score:.4}");
            }
            w
        }
    };
    let out = train(config, &tr, &va, &tcfg).map_err(Failure::model)?;
    println!("epoch\ttrain_loss\tval_loss\tval_card_qerror\tval_cost_qerror");
    let opt = |v: Option<f64>| v.map_or_else(|| "-".to_string(), |v| format!("{v:.4}"));
    for r in &out.history {
        println!(
            "{}\t{:.6}\t{}\t{}\t{}",
            r.epoch,
            r.train_loss,
            opt(r.val_loss),
            opt(r.val_card_qerror),
            opt(r.val_cost_qerror)
        );
    }
    let est = Estimator {
        featurizer,
        model: out.model,
        normalizer: out.normalizer,
        omega: tcfg.omega,
    };
    est.to_checkpoint().save(&a.checkpoint).map_err(Failure::model)?;
    match out.best_epoch {
        Some(e) => println!("omega {}, best epoch {e}, saved {}", tcfg.omega, a.checkpoint.display()),
        None => println!("omega {}, untrained, saved {}", tcfg.omega, a.checkpoint.display()),
    }
    Ok(())
}

fn load_estimator(ds: &Dataset, store: Arc<SampleStore>, checkpoint: &Path, dict: Option<&Path>) -> Result<Estimator, Failure> {
    let ck = Checkpoint::load(checkpoint).map_err(|e| Failure::model(format!("{}: {e}", checkpoint.display())))?;
    let CheckpointMeta { featurizer: fcfg, encoder, .. } = &ck.meta;
    let encoder = match (encoder.as_str(), dict) {
        ("hash", None) => StringEncoder::Hash,
        ("hash", Some(_)) => return Err(Failure::usage("checkpoint uses hashed strings; drop --dict")),
        (_, None) => return Err(Failure::usage("checkpoint was trained with a dictionary; pass --dict")),
        (_, Some(path)) => string_encoder(Some(path))?.0,
    };
    if store.sample_size != fcfg.sample_size {
        return Err(Failure::model(format!(
            "checkpoint expects samples of {} rows, dataset has {}",
            fcfg.sample_size, store.sample_size
        )));
    }
    let featurizer = Featurizer::new(ds.catalog.clone(), store, encoder, *fcfg).map_err(Failure::model)?;
    Estimator::from_checkpoint(ck, featurizer).map_err(Failure::model)
}

fn estimate(a: Estimate) -> Outcome {
    let mut plans: Vec<(String, PlanTree)> = match &a.workload_dir {
        Some(dir) => load_workload(dir)?,
        None => Vec::new(),
    };
    for p in &a.plans {
        plans.push((p.display().to_string(), read_plan(p)?));
    }
    if plans.is_empty() {
        return Err(Failure::usage("no plans given; pass plan files or --workload-dir"));
    }
    let (ds, store) = load_data(&a.data)?;
    let est = load_estimator(&ds, store, &a.model.checkpoint, a.model.dict.as_deref())?;
    let pool = (a.pool_capacity > 0).then(|| MemoryPool::new(a.pool_capacity));
    est.model.reset_cell_invocations();
    println!("plan\tcost\tcard");
    for (name, plan) in &plans {
        let e = match &pool {
            Some(pool) => est.estimate_with_pool(plan, pool),
            None => est.estimate(plan),
        }
        .map_err(Failure::model)?;
        println!("{name}\t{:.6}\t{:.6}", e.cost, e.card);
    }
    let (hits, misses) = pool.as_ref().map_or((0, 0), |p| (p.hits(), p.misses()));
    println!(
        "cells {}\tpool_hits {hits}\tpool_misses {misses}",
        est.model.cell_invocations()
    );
    Ok(())
}

fn evaluate(a: Evaluate) -> Outcome {
    let (ds, store) = load_data(&a.data)?;
    let workload = load_workload(&a.workload_dir)?;
    let (names, plans): (Vec<String>, Vec<PlanTree>) = workload.into_iter().unzip();
    if plans.iter().any(|p| p.root.true_card.is_none() || p.root.true_cost.is_none()) {
        return Err(Failure::data("workload has unlabeled plans"));
    }
    let mut estimators = Vec::new();
    if let Some(ck) = &a.checkpoint {
        let est = load_estimator(&ds, store, ck, a.dict.as_deref())?;
        let e: Vec<(f64, f64)> = est
            .estimate_all(&plans)
            .map_err(Failure::model)?
            .iter()
            .map(|x| (x.card, x.cost))
            .collect();
        estimators.push(("model".to_string(), qerrors(&plans, &e).map_err(Failure::model)?));
    }
    let baseline = IndependenceBaseline::new(&ds);
    let b: Vec<(f64, f64)> = plans.iter().map(|p| baseline.estimate(p)).collect();
    estimators.push(("baseline".to_string(), qerrors(&plans, &b).map_err(Failure::model)?));
    if a.include_oracle {
        let o: Vec<(f64, f64)> = plans
            .iter()
            .map(|p| (p.root.true_card.unwrap_or(1.0), p.root.true_cost.unwrap_or(1.0)))
            .collect();
        estimators.push(("oracle".to_string(), qerrors(&plans, &o).map_err(Failure::model)?));
    }
    let eval = Evaluation { names, estimators };
    let table = eval.metrics_table().map_err(Failure::model)?;
    print!("{table}");
    if let Some(path) = &a.metrics_out {
        fs::write(path, &table).map_err(Failure::data)?;
        let mut raw = path.clone().into_os_string();
        raw.push(".raw");
        fs::write(PathBuf::from(raw), eval.raw_errors()).map_err(Failure::data)?;
    }
    Ok(())
}
