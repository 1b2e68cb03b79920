use std::fs::{self, File};
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::time::Duration;

use anyhow::{ensure, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use log::info;
use wdplab::bench::{read_report, run_benchmark, summarize, write_report, BenchConfig, InstanceSource, Method, ReferencePolicy};
use wdplab::effective_seed;
use wdplab::io::{
    json_files, load_model, read_dataset, read_instance, read_label, save_model, write_allocation, write_dataset,
    write_instance, write_label, AllocationFile,
};
use wdplab::pipeline::{build_samples, label_instance, pipeline_train, PipelineConfig, SampleMode};
use wdplab_core::exact::brute_force;
use wdplab_core::gnn::{train_with_validation, GnnModel, LabeledGraph, Optimizer, TrainConfig};
use wdplab_core::heuristics::{casanova, greedy_density, rlp, ss, CasanovaParams};
use wdplab_core::instgen::{gen_synthetic, gen_vm, SynthConfig, VmConfig};
use wdplab_core::postprocess::{basic_solve, traversal_solve};
use wdplab_core::samples::TrainingSample;
use wdplab_core::seeded_rng;

#[derive(Parser)]
#[command(name = "wdplab", version, about = "Multi-unit winner determination: generators, solvers, GNN training and benchmarks")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate an instance.
    #[command(subcommand)]
    Gen(GenCommand),
    /// Label every instance of a directory with branch-and-bound.
    Label {
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 60.0)]
        time_limit: f64,
    },
    /// Build a single-label dataset from labeled instances.
    Samples {
        #[arg(long)]
        labels: PathBuf,
        #[arg(long, value_enum, default_value_t = ModeArg::OptimumOnly)]
        mode: ModeArg,
        #[arg(long, default_value_t = 1.0)]
        pk: f64,
        #[arg(long, default_value_t = 7)]
        copies: usize,
        #[arg(long, default_value_t = 0.01)]
        gap: f64,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Train a model from a dataset file, or run the full pipeline.
    Train(TrainArgs),
    /// Solve one instance.
    #[command(subcommand)]
    Solve(SolveCommand),
    /// Run the benchmark harness and write the CSV report.
    Bench(BenchArgs),
    /// Summarize a benchmark report per instance size and method.
    Report {
        #[arg(long = "in")]
        input: PathBuf,
    },
}

#[derive(Subcommand)]
enum GenCommand {
    Synth {
        #[arg(long)]
        bids: usize,
        #[arg(long)]
        items: usize,
        #[arg(long)]
        umax: u32,
        #[arg(long, default_value_t = 0.8)]
        item_prob: f64,
        #[arg(long, default_value_t = 0.65)]
        unit_prob: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    Vm {
        #[arg(long)]
        users: usize,
        /// Share of users of each type.
        #[arg(long, value_delimiter = ',', default_value = "0.1,0.4,0.5")]
        dist: Vec<f64>,
        /// Demand multiplier of each type.
        #[arg(long, value_delimiter = ',', default_value = "2,1.5,1")]
        factors: Vec<f64>,
        #[arg(long, default_value_t = 90)]
        types: usize,
        #[arg(long, default_value_t = 500)]
        units: u32,
        #[arg(long, default_value_t = 5)]
        cap: u32,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum ModeArg {
    OptimumOnly,
    Mix,
}

impl From<ModeArg> for SampleMode {
    fn from(m: ModeArg) -> Self {
        match m {
            ModeArg::OptimumOnly => SampleMode::OptimumOnly,
            ModeArg::Mix => SampleMode::Mix,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum OptimizerArg {
    Adam,
    Sgd,
}

#[derive(Args)]
struct TrainArgs {
    /// Dataset produced by `samples`. Without it the whole pipeline runs.
    #[arg(long)]
    data: Option<PathBuf>,
    /// Validation dataset for early stopping.
    #[arg(long)]
    valid: Option<PathBuf>,
    #[arg(long, default_value_t = 50)]
    bids: usize,
    #[arg(long, default_value_t = 5)]
    items: usize,
    #[arg(long, default_value_t = 5)]
    umax: u32,
    /// Labeled training instances generated by the pipeline.
    #[arg(long, default_value_t = 100)]
    instances: usize,
    #[arg(long, default_value_t = 20)]
    valid_instances: usize,
    #[arg(long, value_enum, default_value_t = ModeArg::OptimumOnly)]
    mode: ModeArg,
    #[arg(long, default_value_t = 1.0)]
    pk: f64,
    #[arg(long, default_value_t = 60.0)]
    time_limit: f64,
    #[arg(long, default_value_t = 16)]
    q: usize,
    #[arg(long, default_value_t = 1e-3)]
    lr: f64,
    #[arg(long, default_value_t = 100)]
    epochs: usize,
    #[arg(long, default_value_t = 32)]
    batch: usize,
    #[arg(long, value_enum, default_value_t = OptimizerArg::Adam)]
    optimizer: OptimizerArg,
    #[arg(long, default_value_t = 20)]
    patience: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Subcommand)]
enum SolveCommand {
    Exact {
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long, default_value_t = 60.0)]
        time_limit: f64,
        #[arg(long)]
        out: PathBuf,
    },
    Brute {
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    Gnn {
        #[arg(long)]
        model: PathBuf,
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long, value_enum, default_value_t = PostArg::Basic)]
        mode: PostArg,
        #[arg(long)]
        out: PathBuf,
    },
    Heuristic {
        #[arg(long, value_enum)]
        method: HeuristicArg,
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum PostArg {
    Basic,
    Traversal,
}

#[derive(Clone, Copy, ValueEnum)]
enum HeuristicArg {
    Rlp,
    Ss,
    Casanova,
    Greedy,
}

#[derive(Clone, Copy, ValueEnum)]
enum ReferenceArg {
    Exact,
    BestKnown,
}

#[derive(Args)]
struct BenchArgs {
    /// Directory of instance files. Without it instances are generated.
    #[arg(long)]
    instances: Option<PathBuf>,
    #[arg(long, default_value_t = 50)]
    bids: usize,
    #[arg(long, default_value_t = 5)]
    items: usize,
    #[arg(long, default_value_t = 5)]
    umax: u32,
    #[arg(long, default_value_t = 10)]
    count: usize,
    #[arg(long, value_delimiter = ',', default_value = "exact,rlp,ss,casanova,greedy")]
    methods: Vec<Method>,
    #[arg(long)]
    model: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = ReferenceArg::Exact)]
    reference: ReferenceArg,
    #[arg(long, default_value_t = 60.0)]
    time_limit: f64,
    /// Write 0 in the time column for byte-reproducible reports.
    #[arg(long)]
    omit_timing: bool,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Report file; stdout when absent.
    #[arg(long)]
    out: Option<PathBuf>,
}

fn secs(s: f64) -> Result<Duration> {
    Duration::try_from_secs_f64(s).context("time limit must be a non-negative number of seconds")
}

fn main() -> Result<()> {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    match Cli::parse().command {
        Command::Gen(cmd) => gen(cmd),
        Command::Label { input, out, time_limit } => label(&input, &out, secs(time_limit)?),
        Command::Samples { labels, mode, pk, copies, gap, out, seed } => {
            let files = json_files(&labels)?;
            let labeled = files.iter().map(|p| read_label(p)).collect::<Result<Vec<_>>>()?;
            let mode = SampleMode::from(mode);
            let labeled: Vec<_> = if mode == SampleMode::OptimumOnly {
                let (opt, rest): (Vec<_>, Vec<_>) = labeled.into_iter().partition(|l| l.optimal);
                if !rest.is_empty() {
                    log::warn!("skipping {} labels that are not proven optimal", rest.len());
                }
                opt
            } else {
                labeled
            };
            let mut rng = seeded_rng(effective_seed(seed));
            let (samples, pool) = build_samples(&labeled, mode, pk, copies, gap, &mut rng)?;
            write_dataset(&out, &samples)?;
            info!("{} samples from {pool} labeled instances", samples.len());
            Ok(())
        }
        Command::Train(args) => train(args),
        Command::Solve(cmd) => solve(cmd),
        Command::Bench(args) => bench(args),
        Command::Report { input } => {
            let rows = read_report(File::open(&input).with_context(|| format!("cannot open {}", input.display()))?)?;
            let stdout = io::stdout();
            let mut w = stdout.lock();
            writeln!(w, "{:>6}  {:<14} {:>5} {:>9} {:>10} {:>8} {:>8} {:>10}", "M", "method", "n", "gap%", "time_ms", "util", "sat", "iters")?;
            for s in summarize(&rows) {
                writeln!(
                    w,
                    "{:>6}  {:<14} {:>5} {:>9.3} {:>10.3} {:>8.4} {:>8.4} {:>10.1}",
                    s.m,
                    s.method,
                    s.instances,
                    100.0 * s.gap,
                    s.time_ms,
                    s.utilization,
                    s.satisfaction,
                    s.iterations
                )?;
            }
            Ok(())
        }
    }
}

fn gen(cmd: GenCommand) -> Result<()> {
    let (inst, out) = match cmd {
        GenCommand::Synth { bids, items, umax, item_prob, unit_prob, seed, out } => {
            let cfg = SynthConfig { item_prob, unit_prob, ..SynthConfig::new(bids, items, umax, effective_seed(seed)) };
            (gen_synthetic(&cfg)?, out)
        }
        GenCommand::Vm { users, dist, factors, types, units, cap, seed, out } => {
            let cfg = VmConfig {
                num_vm_types: types,
                units_per_type: units,
                unit_cap: cap,
                type_fractions: dist,
                type_factors: factors,
                ..VmConfig::new(users, effective_seed(seed))
            };
            (gen_vm(&cfg)?, out)
        }
    };
    write_instance(&out, &inst)?;
    info!("wrote {} ({} bids, {} items)", out.display(), inst.num_bids(), inst.num_items());
    Ok(())
}

fn label(input: &Path, out: &Path, time_limit: Duration) -> Result<()> {
    fs::create_dir_all(out)?;
    let files = json_files(input)?;
    ensure!(!files.is_empty(), "no instance files in {}", input.display());
    for path in files {
        let inst = read_instance(&path)?;
        let labeled = label_instance(&inst, time_limit);
        if !labeled.optimal {
            log::warn!("{}: not proven optimal within {:?}", inst.name, time_limit);
        }
        write_label(&out.join(path.file_name().expect("listed files have names")), &labeled)?;
    }
    Ok(())
}

fn train(a: TrainArgs) -> Result<()> {
    let seed = effective_seed(a.seed);
    let cfg = TrainConfig {
        learning_rate: a.lr,
        epochs: a.epochs,
        batch_size: a.batch,
        optimizer: match a.optimizer {
            OptimizerArg::Adam => Optimizer::Adam,
            OptimizerArg::Sgd => Optimizer::Sgd,
        },
        seed,
        patience: a.patience,
    };
    let report = if let Some(data) = &a.data {
        let graphs = |s: Vec<TrainingSample>| s.iter().map(TrainingSample::to_labeled_graph).collect::<Vec<LabeledGraph>>();
        let train_set = graphs(read_dataset(data)?);
        let valid_set = match &a.valid {
            Some(p) => graphs(read_dataset(p)?),
            None => Vec::new(),
        };
        let (model, report) = train_with_validation(&GnnModel::new(a.q, seed), &train_set, &valid_set, &cfg)?;
        save_model(&a.out, &model)?;
        report
    } else {
        let mut p = PipelineConfig::new(SynthConfig::new(a.bids, a.items, a.umax, seed), a.instances, seed);
        p.valid_instances = a.valid_instances;
        p.mode = a.mode.into();
        p.keep_prob = a.pk;
        p.time_limit = secs(a.time_limit)?;
        p.q = a.q;
        p.train = cfg;
        p.model_out = Some(a.out.clone());
        let (_, summary) = pipeline_train(&p)?;
        info!(
            "labeled {} instances ({} dropped), {} training and {} validation samples",
            summary.labeled, summary.dropped, summary.train_samples, summary.valid_samples
        );
        summary.report
    };
    if let Some(last) = report.history.last() {
        info!("epoch {}: train loss {:.4}, best epoch {}", last.epoch, last.train, report.best_epoch);
    }
    info!("model written to {}", a.out.display());
    Ok(())
}

fn solve(cmd: SolveCommand) -> Result<()> {
    match cmd {
        SolveCommand::Exact { input, time_limit, out } => {
            let inst = read_instance(&input)?;
            let labeled = label_instance(&inst, secs(time_limit)?);
            let mut file = AllocationFile::new(&inst, &labeled.allocation)?;
            file.proven_optimal = Some(labeled.optimal);
            write_allocation(&out, &file)
        }
        SolveCommand::Brute { input, out } => {
            let inst = read_instance(&input)?;
            let res = brute_force(&inst)?;
            let mut file = AllocationFile::new(&inst, &res.allocation)?;
            file.proven_optimal = Some(true);
            write_allocation(&out, &file)
        }
        SolveCommand::Gnn { model, input, mode, out } => {
            let model = load_model(&model)?;
            let inst = read_instance(&input)?;
            let trace = match mode {
                PostArg::Basic => basic_solve(&model, &inst)?,
                PostArg::Traversal => traversal_solve(&model, &inst)?,
            };
            let mut file = AllocationFile::new(&inst, &trace.allocation)?;
            file.gnn_calls = Some(trace.gnn_calls);
            write_allocation(&out, &file)
        }
        SolveCommand::Heuristic { method, input, seed, out } => {
            let inst = read_instance(&input)?;
            let mut rng = seeded_rng(effective_seed(seed));
            let alloc = match method {
                HeuristicArg::Rlp => rlp(&inst, &mut rng)?,
                HeuristicArg::Ss => ss(&inst)?,
                HeuristicArg::Casanova => casanova(&inst, &CasanovaParams::default(), &mut rng),
                HeuristicArg::Greedy => greedy_density(&inst),
            };
            write_allocation(&out, &AllocationFile::new(&inst, &alloc)?)
        }
    }
}

fn bench(a: BenchArgs) -> Result<()> {
    let seed = effective_seed(a.seed);
    let source = match a.instances {
        Some(dir) => InstanceSource::Dir(dir),
        None => InstanceSource::Synthetic { generator: SynthConfig::new(a.bids, a.items, a.umax, seed), count: a.count },
    };
    let mut cfg = BenchConfig::new(source, a.methods, seed);
    cfg.model = a.model;
    cfg.reference = match a.reference {
        ReferenceArg::Exact => ReferencePolicy::Exact,
        ReferenceArg::BestKnown => ReferencePolicy::BestKnown,
    };
    cfg.time_limit = secs(a.time_limit)?;
    cfg.omit_timing = a.omit_timing;
    let rows = run_benchmark(&cfg)?;
    match a.out {
        Some(path) => write_report(&rows, BufWriter::new(File::create(&path)?))?,
        None => write_report(&rows, io::stdout().lock())?,
    }
    Ok(())
}
