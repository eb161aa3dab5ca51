//! `tgc`: synthetic data, node2vec pretraining, temporal clustering training,
//! evaluation and batch-size sweeps. Every command writes a replayable
//! `key=value` manifest next to its main output.

mod manifest;

use std::fs::File;
use std::io::{self, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use tgc_core::embedding::{load_features, read_table};
use tgc_core::graph::{parse_interactions, parse_labels};
use tgc_core::metrics::{evaluate_embeddings, N_INIT};
use tgc_core::train::{sweep_batch_size, LossWeights, OptimizerKind, Refresh, TimeRescale, TrainReport};
use tgc_core::{
    pretrain, train, EmbeddingTable, Exec, NegForm, SynthConfig, TemporalGraph, TrainConfig, WalkConfig,
};

use manifest::{expand_config, sha256_str, sidecar, Manifest};

#[derive(Debug, Parser)]
#[command(name = "tgc", version, about = "Temporal graph clustering with Hawkes embeddings")]
#[command(args_override_self = true)]
#[command(after_help = "Any command also accepts `--config <file>` with `flag=value` lines \
(a run manifest works). Flags given on the command line take precedence.")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Generate a planted-partition temporal graph with ground-truth labels.
    Generate(GenerateArgs),
    /// Node2vec features from the static projection of a temporal graph.
    Pretrain(PretrainArgs),
    /// Train temporal clustering embeddings from initial features.
    Train(TrainArgs),
    /// Cluster embeddings with k-means and score against labels.
    Eval(EvalArgs),
    /// One single-epoch training run per batch size.
    SweepBatch(SweepArgs),
}

#[derive(Debug, Args)]
struct GenerateArgs {
    #[arg(long)]
    n: usize,
    #[arg(long)]
    k: usize,
    #[arg(long, default_value_t = SynthConfig::default().n_events)]
    events: usize,
    #[arg(long, default_value_t = SynthConfig::default().p_in)]
    p_in: f64,
    #[arg(long, default_value_t = SynthConfig::default().recency_boost)]
    recency_boost: f64,
    #[arg(long, default_value_t = SynthConfig::default().horizon)]
    horizon: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Output prefix: writes `<prefix>.interactions`, `<prefix>.labels`, `<prefix>.manifest`.
    #[arg(long)]
    output: PathBuf,
}

#[derive(Debug, Args)]
struct PretrainArgs {
    /// Interaction file (`source target time` per line).
    #[arg(long)]
    input: PathBuf,
    /// Feature file to write.
    #[arg(long)]
    output: PathBuf,
    #[arg(long, default_value_t = WalkConfig::default().dim)]
    dim: usize,
    #[arg(long, default_value_t = WalkConfig::default().walk_length)]
    walk_length: usize,
    #[arg(long, default_value_t = WalkConfig::default().walks_per_node)]
    walks_per_node: usize,
    /// Return parameter.
    #[arg(long, default_value_t = WalkConfig::default().p)]
    p: f64,
    /// In-out parameter.
    #[arg(long, default_value_t = WalkConfig::default().q)]
    q: f64,
    #[arg(long, default_value_t = WalkConfig::default().window)]
    window: usize,
    #[arg(long, default_value_t = WalkConfig::default().neg_samples)]
    neg_samples: usize,
    #[arg(long, default_value_t = WalkConfig::default().epochs)]
    epochs: usize,
    #[arg(long, default_value_t = WalkConfig::default().learning_rate)]
    learning_rate: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = Exec::default())]
    exec: Exec,
}

/// Flags shared by `train` and `sweep-batch`, one per training config field.
#[derive(Debug, Args)]
struct TrainFlags {
    /// Interaction file.
    #[arg(long)]
    input: PathBuf,
    /// Initial feature file.
    #[arg(long)]
    features: PathBuf,
    #[arg(long)]
    clusters: usize,
    /// Expected feature dimension; the run fails if the features differ.
    #[arg(long)]
    dim: Option<usize>,
    #[arg(long, default_value_t = TrainConfig::default().epochs)]
    epochs: usize,
    #[arg(long, default_value_t = TrainConfig::default().batch_size)]
    batch_size: usize,
    #[arg(long, default_value_t = TrainConfig::default().neighbor_len)]
    neighbor_len: usize,
    #[arg(long, default_value_t = TrainConfig::default().n_neg)]
    n_neg: usize,
    #[arg(long, default_value_t = TrainConfig::default().learning_rate)]
    learning_rate: f64,
    #[arg(long, default_value_t = TrainConfig::default().optimizer)]
    optimizer: OptimizerKind,
    #[arg(long, default_value_t = TrainConfig::default().p_refresh)]
    p_refresh: Refresh,
    #[arg(long, default_value_t = LossWeights::default().temporal)]
    w_tem: f64,
    #[arg(long, default_value_t = LossWeights::default().node)]
    w_node: f64,
    #[arg(long, default_value_t = LossWeights::default().batch)]
    w_batch: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = TrainConfig::default().time_rescale)]
    time_rescale: TimeRescale,
    #[arg(long, default_value_t = TrainConfig::default().neg_form)]
    neg_form: NegForm,
    /// Student-t degrees of freedom.
    #[arg(long, default_value_t = TrainConfig::default().dof)]
    dof: f64,
    #[arg(long, default_value_t = TrainConfig::default().initial_decay)]
    initial_decay: f64,
    #[arg(long, default_value_t = Exec::default())]
    exec: Exec,
}

#[derive(Debug, Args)]
struct TrainArgs {
    #[command(flatten)]
    flags: TrainFlags,
    /// Checkpoint to write; `<output>.meta`, `<output>.report` and
    /// `<output>.manifest` are written alongside.
    #[arg(long)]
    output: PathBuf,
}

#[derive(Debug, Args)]
struct EvalArgs {
    /// Embedding file (checkpoint or features).
    #[arg(long)]
    embeddings: PathBuf,
    /// Label file (`node label` per line).
    #[arg(long)]
    labels: PathBuf,
    /// Cluster count; defaults to the number of distinct labels.
    #[arg(long)]
    k: Option<usize>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = Exec::default())]
    exec: Exec,
    /// Metrics record to write; `<output>.manifest` is written alongside.
    #[arg(long)]
    output: PathBuf,
}

#[derive(Debug, Args)]
struct SweepArgs {
    #[command(flatten)]
    flags: TrainFlags,
    /// Comma-separated batch sizes.
    #[arg(long, value_delimiter = ',', required = true)]
    sizes: Vec<usize>,
    /// Table to write; `<output>.manifest` is written alongside.
    #[arg(long)]
    output: PathBuf,
}

fn open(path: &Path) -> Result<BufReader<File>> {
    let file = File::open(path).with_context(|| format!("opening {}", path.display()))?;
    Ok(BufReader::new(file))
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    let file = File::create(path).with_context(|| format!("creating {}", path.display()))?;
    Ok(BufWriter::new(file))
}

fn read_graph(path: &Path) -> Result<TemporalGraph> {
    parse_interactions(open(path)?).with_context(|| format!("parsing {}", path.display()))
}

fn write_table(path: &Path, ids: &[u64], table: &EmbeddingTable) -> Result<()> {
    let mut w = create(path)?;
    table.write(ids, &mut w)?;
    w.flush().with_context(|| format!("writing {}", path.display()))
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    std::fs::write(path, text).with_context(|| format!("writing {}", path.display()))
}

fn generate(args: &GenerateArgs) -> Result<()> {
    let start = Instant::now();
    let cfg = SynthConfig {
        n: args.n,
        k: args.k,
        n_events: args.events,
        p_in: args.p_in,
        recency_boost: args.recency_boost,
        horizon: args.horizon,
        seed: args.seed,
    };
    let graph = tgc_core::synth::generate(&cfg)?;
    let interactions = sidecar(&args.output, "interactions");
    let labels = sidecar(&args.output, "labels");
    let mut w = create(&interactions)?;
    graph.write_interactions(&mut w)?;
    w.flush()?;
    let mut w = create(&labels)?;
    graph.write_labels(&mut w)?;
    w.flush()?;

    let mut m = Manifest::new("generate");
    m.flag("n", args.n)
        .flag("k", args.k)
        .flag("events", args.events)
        .flag("p-in", args.p_in)
        .flag("recency-boost", args.recency_boost)
        .flag("horizon", args.horizon)
        .flag("seed", args.seed)
        .flag("output", args.output.display())
        .artifact("interactions", &interactions)
        .artifact("labels", &labels);
    m.write(&sidecar(&args.output, "manifest"), start.elapsed().as_secs_f64())?;
    println!(
        "wrote {} ({} interactions) and {}",
        interactions.display(),
        graph.num_interactions(),
        labels.display()
    );
    Ok(())
}

fn pretrain_cmd(args: &PretrainArgs) -> Result<()> {
    let start = Instant::now();
    let graph = read_graph(&args.input)?;
    let cfg = WalkConfig {
        walk_length: args.walk_length,
        walks_per_node: args.walks_per_node,
        p: args.p,
        q: args.q,
        window: args.window,
        dim: args.dim,
        neg_samples: args.neg_samples,
        epochs: args.epochs,
        learning_rate: args.learning_rate,
        seed: args.seed,
        exec: args.exec,
    };
    let out = pretrain::pretrain(&graph.static_projection(), &cfg)?;
    if !out.untrained.is_empty() {
        eprintln!(
            "warning: {} node(s) absent from all walks kept their random initialization",
            out.untrained.len()
        );
    }
    write_table(&args.output, graph.ids(), &out.table)?;

    let mut m = Manifest::new("pretrain");
    m.flag("input", args.input.display())
        .flag("output", args.output.display())
        .flag("dim", args.dim)
        .flag("walk-length", args.walk_length)
        .flag("walks-per-node", args.walks_per_node)
        .flag("p", args.p)
        .flag("q", args.q)
        .flag("window", args.window)
        .flag("neg-samples", args.neg_samples)
        .flag("epochs", args.epochs)
        .flag("learning-rate", args.learning_rate)
        .flag("seed", args.seed)
        .flag("exec", args.exec)
        .input("input", &args.input)
        .artifact("features", &args.output)
        .note("untrained_nodes", out.untrained.len());
    m.write(&sidecar(&args.output, "manifest"), start.elapsed().as_secs_f64())?;
    println!("wrote {} ({} x {})", args.output.display(), out.table.rows(), out.table.dim());
    Ok(())
}

impl TrainFlags {
    fn config(&self) -> TrainConfig {
        TrainConfig {
            clusters: self.clusters,
            epochs: self.epochs,
            batch_size: self.batch_size,
            neighbor_len: self.neighbor_len,
            n_neg: self.n_neg,
            learning_rate: self.learning_rate,
            optimizer: self.optimizer,
            p_refresh: self.p_refresh,
            weights: LossWeights {
                temporal: self.w_tem,
                node: self.w_node,
                batch: self.w_batch,
            },
            seed: self.seed,
            time_rescale: self.time_rescale,
            neg_form: self.neg_form,
            dof: self.dof,
            initial_decay: self.initial_decay,
            exec: self.exec,
        }
    }

    /// Graph plus features aligned to its node order.
    fn load(&self) -> Result<(TemporalGraph, EmbeddingTable)> {
        let graph = read_graph(&self.input)?;
        let z0 = load_features(open(&self.features)?, graph.ids())
            .with_context(|| format!("loading {}", self.features.display()))?;
        if let Some(dim) = self.dim {
            if dim != z0.dim() {
                bail!("--dim {dim} does not match feature dimension {}", z0.dim());
            }
        }
        Ok((graph, z0))
    }

    fn record(&self, m: &mut Manifest, dim: usize) {
        m.flag("input", self.input.display())
            .flag("features", self.features.display())
            .flag("clusters", self.clusters)
            .flag("dim", dim)
            .flag("epochs", self.epochs)
            .flag("batch-size", self.batch_size)
            .flag("neighbor-len", self.neighbor_len)
            .flag("n-neg", self.n_neg)
            .flag("learning-rate", self.learning_rate)
            .flag("optimizer", self.optimizer)
            .flag("p-refresh", self.p_refresh)
            .flag("w-tem", self.w_tem)
            .flag("w-node", self.w_node)
            .flag("w-batch", self.w_batch)
            .flag("seed", self.seed)
            .flag("time-rescale", self.time_rescale)
            .flag("neg-form", self.neg_form)
            .flag("dof", self.dof)
            .flag("initial-decay", self.initial_decay)
            .flag("exec", self.exec)
            .input("input", &self.input)
            .input("features", &self.features);
    }
}

fn report_tsv(report: &TrainReport) -> String {
    let mut out = String::from("epoch\tl_tem\tl_node\tl_batch\ttotal\tseconds\n");
    for (i, e) in report.epochs.iter().enumerate() {
        out.push_str(&format!(
            "{}\t{}\t{}\t{}\t{}\t{:.6}\n",
            i + 1,
            e.losses.temporal,
            e.losses.node,
            e.losses.batch,
            e.total,
            e.seconds
        ));
    }
    out
}

fn train_cmd(args: &TrainArgs) -> Result<()> {
    let start = Instant::now();
    let (graph, z0) = args.flags.load()?;
    let cfg = args.flags.config();
    let trained = train(&graph, &z0, &cfg)?;
    write_table(&args.output, graph.ids(), &trained.embeddings)?;

    let mut m = Manifest::new("train");
    args.flags.record(&mut m, z0.dim());
    m.flag("output", args.output.display());
    let config_hash = sha256_str(&m.flags_text());
    let meta = sidecar(&args.output, "meta");
    write_text(
        &meta,
        &format!(
            "epoch={}\nseed={}\nconfig_hash={}\ndecay_rate={}\n",
            trained.report.epochs.len(),
            cfg.seed,
            config_hash,
            trained.report.final_decay_rate
        ),
    )?;
    let report = sidecar(&args.output, "report");
    write_text(&report, &report_tsv(&trained.report))?;
    m.artifact("checkpoint", &args.output)
        .artifact("meta", &meta)
        .artifact("report", &report)
        .note("config_hash", &config_hash)
        .note("peak_batch_bytes", trained.report.peak_batch_bytes)
        .note("final_decay_rate", trained.report.final_decay_rate);
    m.write(&sidecar(&args.output, "manifest"), start.elapsed().as_secs_f64())?;

    if let Some(last) = trained.report.epochs.last() {
        println!(
            "epochs={} final_total={} l_tem={} l_node={} l_batch={} decay_rate={}",
            trained.report.epochs.len(),
            last.total,
            last.losses.temporal,
            last.losses.node,
            last.losses.batch,
            trained.report.final_decay_rate
        );
    } else {
        println!("epochs=0 (checkpoint equals input features)");
    }
    Ok(())
}

fn eval_cmd(args: &EvalArgs) -> Result<()> {
    let start = Instant::now();
    let (ids, z) = read_table(open(&args.embeddings)?).with_context(|| format!("parsing {}", args.embeddings.display()))?;
    let labels = parse_labels(open(&args.labels)?, &ids).with_context(|| format!("parsing {}", args.labels.display()))?;
    let label_k = labels.num_classes();
    let k = match args.k {
        Some(k) if k != label_k => {
            eprintln!("warning: --k {k} differs from the {label_k} distinct labels; clustering with k={k}");
            k
        }
        Some(k) => k,
        None => label_k,
    };
    let (_, report) = evaluate_embeddings(&z, &labels.assignment, k, args.seed, args.exec)?;
    let record = format!("{report} k={k} n={} n_init={N_INIT} nmi_norm=arithmetic\n", z.rows());
    write_text(&args.output, &record)?;

    let mut m = Manifest::new("eval");
    m.flag("embeddings", args.embeddings.display())
        .flag("labels", args.labels.display())
        .flag("seed", args.seed)
        .flag("exec", args.exec)
        .flag("output", args.output.display());
    if let Some(k) = args.k {
        m.flag("k", k);
    }
    m.input("embeddings", &args.embeddings)
        .input("labels", &args.labels)
        .artifact("metrics", &args.output)
        .note("k", k);
    m.write(&sidecar(&args.output, "manifest"), start.elapsed().as_secs_f64())?;
    print!("{record}");
    println!("{}", report.table());
    Ok(())
}

fn sweep_cmd(args: &SweepArgs) -> Result<()> {
    let start = Instant::now();
    let (graph, z0) = args.flags.load()?;
    let reports = sweep_batch_size(&graph, &z0, &args.flags.config(), &args.sizes)?;
    let mut table = String::from("batch_size\tseconds\tpeak_batch_bytes\ttotal_loss\n");
    for r in &reports {
        let (seconds, total) = r.epochs.first().map_or((0.0, 0.0), |e| (e.seconds, e.total));
        table.push_str(&format!("{}\t{seconds:.6}\t{}\t{total}\n", r.batch_size, r.peak_batch_bytes));
    }
    write_text(&args.output, &table)?;

    let mut m = Manifest::new("sweep-batch");
    args.flags.record(&mut m, z0.dim());
    let sizes: Vec<String> = args.sizes.iter().map(|s| s.to_string()).collect();
    m.flag("sizes", sizes.join(","))
        .flag("output", args.output.display())
        .artifact("table", &args.output);
    m.write(&sidecar(&args.output, "manifest"), start.elapsed().as_secs_f64())?;
    print!("{table}");
    Ok(())
}

fn run(cli: &Cli) -> Result<()> {
    match &cli.command {
        Command::Generate(a) => generate(a),
        Command::Pretrain(a) => pretrain_cmd(a),
        Command::Train(a) => train_cmd(a),
        Command::Eval(a) => eval_cmd(a),
        Command::SweepBatch(a) => sweep_cmd(a),
    }
}

fn main() -> ExitCode {
    let args = match expand_config(std::env::args().collect()) {
        Ok(args) => args,
        Err(e) => {
            eprintln!("error: {e:#}");
            return ExitCode::from(2);
        }
    };
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        // clap exits 2 on usage errors and 0 for --help / --version
        Err(e) => e.exit(),
    };
    match run(&cli) {
        Ok(()) => {
            let _ = io::stdout().flush();
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}
