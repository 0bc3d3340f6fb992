//! `kge`: curriculum-scheduled knowledge-graph embedding runs.
//!
//! Subcommands: `zcounts` (difficulty table + stats), `train` (curriculum
//! training to a checkpoint), `eval` (ranking metrics / AUC-PR),
//! `diagnose` (rank-vs-Z-count dump), `dump-dict` (debug dictionaries).
//!
//! Exit codes: 0 success, 1 usage or config error, 2 data error,
//! 3 numerical abort.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use kge_core::config::{load_config, RunConfig};
use kge_core::eval::{auc_pr_pooled, diagnose_zcount_rank, evaluate};
use kge_core::manifest::{run_dir_name, RunManifest};
use kge_core::model::ModelParams;
use kge_core::store::{DatasetPaths, Split, TripleStore};
use kge_core::train::train;
use kge_core::zcount::{ZCountTable, ZPathPolicy};
use kge_core::{Error, Result};

#[derive(Parser)]
#[command(name = "kge", version, about = "Curriculum-scheduled knowledge-graph embedding")]
struct Cli {
    /// Worker threads (default: KGE_WORKERS env var, else all cores)
    #[arg(long, global = true)]
    workers: Option<usize>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
#[allow(clippy::large_enum_variant)]
enum Command {
    /// Compute the Z-count difficulty of every train triple
    Zcounts(ZcountsArgs),
    /// Train a model under the curriculum schedule
    Train(TrainArgs),
    /// Rank a split and report MRR / MR / Hits@N (and optionally AUC-PR)
    Eval(EvalArgs),
    /// Dump per-test-triple (rank, Z-count) rows and bucket means
    Diagnose(DiagnoseArgs),
    /// Write entity and relation dictionaries for debugging
    DumpDict(DumpDictArgs),
}

#[derive(Args)]
struct DataArgs {
    /// Dataset directory holding train.txt / valid.txt / test.txt
    #[arg(long)]
    data: PathBuf,
    /// Override the train file path
    #[arg(long)]
    train_file: Option<PathBuf>,
    /// Override the valid file path
    #[arg(long)]
    valid_file: Option<PathBuf>,
    /// Override the test file path
    #[arg(long)]
    test_file: Option<PathBuf>,
}

impl DataArgs {
    fn paths(&self) -> DatasetPaths {
        DatasetPaths::new(
            &self.data,
            self.train_file.as_deref(),
            self.valid_file.as_deref(),
            self.test_file.as_deref(),
        )
    }

    fn load(&self) -> Result<TripleStore> {
        let store = self.paths().load()?;
        if store.duplicates_dropped() > 0 {
            eprintln!(
                "note: dropped {} duplicate triple(s)",
                store.duplicates_dropped()
            );
        }
        for w in store.warnings() {
            eprintln!("warning: {w}");
        }
        Ok(store)
    }
}

#[derive(Args)]
struct PolicyArgs {
    /// Skip pairs whose path reuses the queried edge itself
    #[arg(long, default_value_t = true, action = clap::ArgAction::Set)]
    exclude_query_edge: bool,
    /// Require e1, e2 distinct from each other and from {h, t}
    #[arg(long, default_value_t = false, action = clap::ArgAction::Set)]
    require_distinct_intermediates: bool,
}

impl PolicyArgs {
    fn policy(&self) -> ZPathPolicy {
        ZPathPolicy {
            exclude_query_edge: self.exclude_query_edge,
            require_distinct_intermediates: self.require_distinct_intermediates,
        }
    }
}

#[derive(Args)]
struct ZcountsArgs {
    #[command(flatten)]
    data: DataArgs,
    #[command(flatten)]
    policy: PolicyArgs,
    /// Output path for the difficulty table
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct TrainArgs {
    /// key = value config file; flags below override its values
    #[arg(long)]
    config: PathBuf,
    #[command(flatten)]
    data: DataArgs,
    /// Load a precomputed difficulty table
    #[arg(long)]
    zcounts: Option<PathBuf>,
    /// Compute the difficulty table now (default policy) instead
    #[arg(long)]
    compute_zcounts: bool,
    /// Disable the curriculum (forces lambda0 = 1)
    #[arg(long)]
    no_curriculum: bool,
    /// Run directory (default runs/<timestamp>-seed<seed>)
    #[arg(long)]
    out_dir: Option<PathBuf>,

    #[arg(long)]
    model: Option<String>,
    #[arg(long)]
    learning_rate: Option<String>,
    #[arg(long)]
    batch_size: Option<String>,
    #[arg(long)]
    negatives: Option<String>,
    #[arg(long)]
    alpha: Option<String>,
    #[arg(long)]
    gamma: Option<String>,
    #[arg(long)]
    max_epochs: Option<String>,
    #[arg(long)]
    dim: Option<String>,
    #[arg(long)]
    seed: Option<String>,
    #[arg(long)]
    pacing: Option<String>,
    #[arg(long)]
    lambda0: Option<String>,
    #[arg(long)]
    t_grow: Option<String>,
    #[arg(long)]
    p_exponent: Option<String>,
    #[arg(long)]
    adam_beta1: Option<String>,
    #[arg(long)]
    adam_beta2: Option<String>,
    #[arg(long)]
    adam_epsilon: Option<String>,
    #[arg(long)]
    filter_negatives: Option<String>,
}

impl TrainArgs {
    fn overrides(&self) -> Vec<(&'static str, &Option<String>)> {
        vec![
            ("model", &self.model),
            ("learning_rate", &self.learning_rate),
            ("batch_size", &self.batch_size),
            ("negatives", &self.negatives),
            ("alpha", &self.alpha),
            ("gamma", &self.gamma),
            ("max_epochs", &self.max_epochs),
            ("dim", &self.dim),
            ("seed", &self.seed),
            ("pacing", &self.pacing),
            ("lambda0", &self.lambda0),
            ("t_grow", &self.t_grow),
            ("p_exponent", &self.p_exponent),
            ("adam_beta1", &self.adam_beta1),
            ("adam_beta2", &self.adam_beta2),
            ("adam_epsilon", &self.adam_epsilon),
            ("filter_negatives", &self.filter_negatives),
        ]
    }
}

#[derive(Args)]
struct EvalArgs {
    #[arg(long)]
    checkpoint: PathBuf,
    #[command(flatten)]
    data: DataArgs,
    /// Split to rank: train, valid or test
    #[arg(long, default_value = "test")]
    split: String,
    /// Rank against all candidates instead of the filtered setting
    #[arg(long)]
    raw: bool,
    /// Also compute pooled AUC-PR over the split's candidate tails
    #[arg(long)]
    auc_pr: bool,
    #[arg(long)]
    out_dir: Option<PathBuf>,
}

#[derive(Args)]
struct DiagnoseArgs {
    #[arg(long)]
    checkpoint: PathBuf,
    #[command(flatten)]
    data: DataArgs,
    #[command(flatten)]
    policy: PolicyArgs,
    #[arg(long, default_value = "test")]
    split: String,
    #[arg(long)]
    out_dir: Option<PathBuf>,
}

#[derive(Args)]
struct DumpDictArgs {
    #[command(flatten)]
    data: DataArgs,
    /// Directory receiving entities.tsv and relations.tsv
    #[arg(long)]
    out: PathBuf,
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind;
            let code = match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => 0,
                _ => 1,
            };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let workers = cli.workers.or_else(|| {
        std::env::var("KGE_WORKERS")
            .ok()
            .and_then(|v| v.parse().ok())
    });
    if let Some(n) = workers {
        kge_core::set_workers(n.max(1));
    }
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

fn run(command: Command) -> Result<()> {
    match command {
        Command::Zcounts(args) => cmd_zcounts(args),
        Command::Train(args) => cmd_train(args),
        Command::Eval(args) => cmd_eval(args),
        Command::Diagnose(args) => cmd_diagnose(args),
        Command::DumpDict(args) => cmd_dump_dict(args),
    }
}

fn cmd_zcounts(args: ZcountsArgs) -> Result<()> {
    let mut manifest = RunManifest::new("zcounts");
    let paths = args.data.paths();
    for p in [&paths.train, &paths.valid, &paths.test] {
        manifest.record_input(p)?;
    }
    let store = args.data.load()?;
    let policy = args.policy.policy();
    let started = std::time::Instant::now();
    let table = ZCountTable::compute(&store, policy);
    let elapsed = started.elapsed().as_secs_f64();
    table.save(&args.out)?;

    let stats = table.stats();
    println!("triples             {}", table.len());
    println!("nonzero-count       {}", stats.nonzero_count);
    println!("nonzero-fraction    {:.6}", stats.nonzero_fraction);
    println!("max                 {}", stats.max);
    match stats.mean_over_nonzero {
        Some(m) => println!("mean-over-nonzero   {m:.3}"),
        None => println!("mean-over-nonzero   -"),
    }
    println!("mean-over-all       {:.3}", stats.mean_over_all);
    println!(
        "initial-percentage  {:.6}",
        kge_core::curriculum::initial_percentage(&table)
    );
    eprintln!("computed in {elapsed:.1}s");

    manifest
        .config
        .insert("exclude_query_edge".into(), policy.exclude_query_edge.to_string());
    manifest.config.insert(
        "require_distinct_intermediates".into(),
        policy.require_distinct_intermediates.to_string(),
    );
    manifest.record_artifact(&args.out);
    manifest.finish_and_write(&manifest_path_beside(&args.out))
}

fn manifest_path_beside(out: &Path) -> PathBuf {
    let mut name = out.file_name().unwrap_or_default().to_os_string();
    name.push(".manifest.json");
    out.with_file_name(name)
}

fn cmd_train(args: TrainArgs) -> Result<()> {
    let mut cfg: RunConfig = load_config(&args.config)?;
    for (key, value) in args.overrides() {
        if let Some(v) = value {
            cfg.set(key, v)?;
        }
    }
    if args.no_curriculum {
        cfg.set("lambda0", "1.0")?;
    }
    cfg.train.validate()?;

    let mut manifest = RunManifest::new("train");
    manifest.record_input(&args.config)?;
    let paths = args.data.paths();
    for p in [&paths.train, &paths.valid, &paths.test] {
        manifest.record_input(p)?;
    }
    let store = args.data.load()?;

    let table = match (&args.zcounts, args.compute_zcounts) {
        (Some(path), false) => {
            manifest.record_input(path)?;
            let table = ZCountTable::load(path)?;
            if table.len() != store.train().len() {
                return Err(Error::Data(format!(
                    "z-count table {} has {} entries, train split has {}",
                    path.display(),
                    table.len(),
                    store.train().len()
                )));
            }
            table
        }
        (None, true) => ZCountTable::compute(&store, ZPathPolicy::default()),
        (Some(_), true) => {
            return Err(Error::Config(
                "pass either --zcounts or --compute-zcounts, not both".into(),
            ))
        }
        (None, false) => {
            return Err(Error::Config(
                "no difficulty table: pass --zcounts <path> or --compute-zcounts".into(),
            ))
        }
    };

    let run_dir = args
        .out_dir
        .unwrap_or_else(|| PathBuf::from("runs").join(run_dir_name(cfg.train.seed)));
    std::fs::create_dir_all(&run_dir).map_err(|e| Error::io(&run_dir, e))?;

    if args.compute_zcounts {
        let zpath = run_dir.join("zcounts.tsv");
        table.save(&zpath)?;
        manifest.record_artifact(&zpath);
    }

    eprintln!(
        "training {} on {} triples ({} entities, {} relations)",
        cfg.model.name(),
        store.train().len(),
        store.n_entities(),
        store.n_relations()
    );
    let output = train(&store, &table, cfg.model, &cfg.train)?;

    let ckpt_path = run_dir.join("model.ckpt");
    output.params.save(&ckpt_path)?;

    let log_path = run_dir.join("epochs.log");
    let log_file = File::create(&log_path).map_err(|e| Error::io(&log_path, e))?;
    let mut log = BufWriter::new(log_file);
    for e in &output.epochs {
        writeln!(
            log,
            "epoch={}\tlambda={:.6}\tloss={:.6}\tseconds={:.3}\ttriples={}",
            e.epoch, e.lambda, e.mean_loss, e.seconds, e.triples
        )
        .map_err(|e| Error::io(&log_path, e))?;
    }
    log.flush().map_err(|e| Error::io(&log_path, e))?;

    if let Some(last) = output.epochs.last() {
        eprintln!(
            "done: {} epochs, final mean loss {:.4}",
            output.epochs.len(),
            last.mean_loss
        );
    }

    manifest.config = cfg.snapshot();
    manifest.config.insert(
        "lambda_trace".into(),
        output
            .epochs
            .iter()
            .map(|e| format!("{:.6}", e.lambda))
            .collect::<Vec<_>>()
            .join(","),
    );
    manifest.seeds.push(cfg.train.seed);
    manifest.record_artifact(&ckpt_path);
    manifest.record_artifact(&log_path);
    manifest.finish_and_write(&run_dir.join("manifest.json"))?;
    println!("{}", run_dir.display());
    Ok(())
}

fn load_checkpoint_for(store: &TripleStore, path: &Path) -> Result<ModelParams> {
    let params = ModelParams::load(path)?;
    if params.n_entities() != store.n_entities() || params.n_relations() != store.n_relations() {
        return Err(Error::Data(format!(
            "checkpoint was trained on {} entities / {} relations but the dataset dictionaries \
             have {} / {}; pass the dataset the model was trained on",
            params.n_entities(),
            params.n_relations(),
            store.n_entities(),
            store.n_relations()
        )));
    }
    Ok(params)
}

fn cmd_eval(args: EvalArgs) -> Result<()> {
    let mut manifest = RunManifest::new("eval");
    manifest.record_input(&args.checkpoint)?;
    let paths = args.data.paths();
    for p in [&paths.train, &paths.valid, &paths.test] {
        manifest.record_input(p)?;
    }
    let store = args.data.load()?;
    let params = load_checkpoint_for(&store, &args.checkpoint)?;
    let split = Split::parse(&args.split)?;
    let triples = store.split(split);
    if triples.is_empty() {
        return Err(Error::Data(format!("{split} split is empty")));
    }

    let filtered = !args.raw;
    let report = evaluate(&params, &store, triples, filtered);
    let auc = if args.auc_pr {
        Some(auc_pr_pooled(&params, triples)?)
    } else {
        None
    };

    print!("{}", report.to_table());
    if let Some(auc) = auc {
        println!("auc-pr     {auc:.4}");
    }

    let run_dir = args
        .out_dir
        .unwrap_or_else(|| PathBuf::from("runs").join(run_dir_name(params.seed)));
    std::fs::create_dir_all(&run_dir).map_err(|e| Error::io(&run_dir, e))?;
    let json_path = run_dir.join("report.json");
    let body = serde_json::json!({
        "split": split.to_string(),
        "filtered": filtered,
        "report": report,
        "auc_pr": auc,
    });
    std::fs::write(&json_path, serde_json::to_string_pretty(&body).unwrap())
        .map_err(|e| Error::io(&json_path, e))?;
    let txt_path = run_dir.join("report.txt");
    let mut text = report.to_table();
    if let Some(auc) = auc {
        text.push_str(&format!("auc-pr     {auc:.4}\n"));
    }
    std::fs::write(&txt_path, text).map_err(|e| Error::io(&txt_path, e))?;

    manifest.config.insert("split".into(), split.to_string());
    manifest.config.insert("filtered".into(), filtered.to_string());
    manifest.record_artifact(&json_path);
    manifest.record_artifact(&txt_path);
    manifest.finish_and_write(&run_dir.join("manifest.json"))
}

fn cmd_diagnose(args: DiagnoseArgs) -> Result<()> {
    let mut manifest = RunManifest::new("diagnose");
    manifest.record_input(&args.checkpoint)?;
    let paths = args.data.paths();
    for p in [&paths.train, &paths.valid, &paths.test] {
        manifest.record_input(p)?;
    }
    let store = args.data.load()?;
    let params = load_checkpoint_for(&store, &args.checkpoint)?;
    let split = Split::parse(&args.split)?;
    let triples = store.split(split);
    if triples.is_empty() {
        return Err(Error::Data(format!("{split} split is empty")));
    }

    let diag = diagnose_zcount_rank(&params, &store, args.policy.policy(), triples);

    let run_dir = args
        .out_dir
        .unwrap_or_else(|| PathBuf::from("runs").join(run_dir_name(params.seed)));
    std::fs::create_dir_all(&run_dir).map_err(|e| Error::io(&run_dir, e))?;
    let csv_path = run_dir.join("diagnostic.csv");
    let csv_file = File::create(&csv_path).map_err(|e| Error::io(&csv_path, e))?;
    let mut csv = BufWriter::new(csv_file);
    (|| -> std::io::Result<()> {
        writeln!(csv, "rank,zcount")?;
        for row in &diag.rows {
            writeln!(csv, "{},{}", row.rank, row.z)?;
        }
        csv.flush()
    })()
    .map_err(|e| Error::io(&csv_path, e))?;

    match diag.top_mean {
        Some(m) => println!(
            "top10-mean      {m:.3} (n={})",
            diag.rows.iter().filter(|r| r.rank < 10.0).count()
        ),
        None => println!("top10-mean      -"),
    }
    match diag.bottom_mean {
        Some(m) => println!(
            "bottom10-mean   {m:.3} (n={})",
            diag.rows.iter().filter(|r| r.rank >= 10.0).count()
        ),
        None => println!("bottom10-mean   -"),
    }

    manifest.record_artifact(&csv_path);
    manifest.finish_and_write(&run_dir.join("manifest.json"))
}

fn cmd_dump_dict(args: DumpDictArgs) -> Result<()> {
    let store = args.data.load()?;
    std::fs::create_dir_all(&args.out).map_err(|e| Error::io(&args.out, e))?;
    let ent_path = args.out.join("entities.tsv");
    let rel_path = args.out.join("relations.tsv");
    let ent = File::create(&ent_path).map_err(|e| Error::io(&ent_path, e))?;
    store
        .write_entity_dict(BufWriter::new(ent))
        .map_err(|e| Error::io(&ent_path, e))?;
    let rel = File::create(&rel_path).map_err(|e| Error::io(&rel_path, e))?;
    store
        .write_relation_dict(BufWriter::new(rel))
        .map_err(|e| Error::io(&rel_path, e))?;
    println!("{} entities, {} relations", store.n_entities(), store.n_relations());
    Ok(())
}
