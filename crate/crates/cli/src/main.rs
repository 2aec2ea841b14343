//! `mrfnet`: dictionary generation, training-set simulation, network
//! training, phantom evaluation and FLOP accounting.
//!
//! Exit status is 0 on success, 1 for malformed command lines and 2 when
//! inputs (configs, dictionaries, training sets, models) cannot be used.

use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Instant;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};

use mrfnet::bloch::default_sequence;
use mrfnet::dataset::{Sampling, TrainingSet};
use mrfnet::dictionary::{build_dictionary, Dictionary};
use mrfnet::evaluation::comparison::noise_tag;
use mrfnet::evaluation::flops::{activation_flops, network_breakdown};
use mrfnet::evaluation::{build_phantom, count_flops, run_comparison, ComparisonConfig, MethodDescriptor, ModelSet, PhantomSpec};
use mrfnet::grid::ParamGrid;
use mrfnet::model::RegressionModel;
use mrfnet::network::{Method, SIGNAL_LEN};
use mrfnet::training::{train_with_progress, TrainConfig};
use mrfnet::Label;

#[derive(Parser)]
#[command(name = "mrfnet", version, about = "Complex-valued networks for MR fingerprinting")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate a fingerprint dictionary over a parameter grid.
    GenDict(GenDict),
    /// Simulate a training set sampled from a parameter grid.
    GenTrain(GenTrain),
    /// Train one regression network for one parameter.
    Train(Train),
    /// Compare methods on a simulated phantom and write a report.
    Evaluate(Evaluate),
    /// Print per-pixel FLOP counts for every method.
    Flops(Flops),
}

#[derive(Args)]
struct GridArgs {
    /// Grid config (TOML); the built-in default grid when omitted.
    #[arg(long)]
    grid: Option<PathBuf>,
    /// Seed of the pulse sequence schedule.
    #[arg(long, default_value_t = 0)]
    seq_seed: u64,
}

impl GridArgs {
    fn load(&self) -> Result<ParamGrid> {
        match &self.grid {
            Some(path) => ParamGrid::from_file(path).with_context(|| format!("reading grid {}", path.display())),
            None => Ok(ParamGrid::default_grid()),
        }
    }
}

#[derive(Args)]
struct GenDict {
    #[command(flatten)]
    grid: GridArgs,
    #[arg(short, long)]
    output: PathBuf,
}

#[derive(Args)]
struct GenTrain {
    #[command(flatten)]
    grid: GridArgs,
    /// Number of points to draw.
    #[arg(long, default_value_t = 100_000, conflicts_with = "exhaustive")]
    n: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Use every lattice point once instead of sampling.
    #[arg(long)]
    exhaustive: bool,
    #[arg(short, long)]
    output: PathBuf,
}

#[derive(Args)]
struct Train {
    /// complex-cardioid, complex-siglog, complex-sepsig, real or real2x.
    #[arg(long, value_parser = parse_network)]
    net: Method,
    /// t1, t2 or b0.
    #[arg(long, value_parser = parse_label)]
    label: Label,
    /// Training set written by gen-train.
    #[arg(long)]
    data: PathBuf,
    #[arg(short, long)]
    output: PathBuf,
    #[arg(long, default_value_t = 50)]
    epochs: usize,
    #[arg(long, default_value_t = 0.01)]
    lr: f64,
    #[arg(long, default_value_t = 256)]
    batch_size: usize,
    /// Seeds both initialization and shuffling.
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(Args)]
struct Evaluate {
    /// Dictionary written by gen-dict; its pulse sequence drives the phantom.
    #[arg(long)]
    dict: PathBuf,
    /// Trained model files; the method and parameter are read from each.
    #[arg(long = "model")]
    models: Vec<PathBuf>,
    /// Phantom config (TOML); the built-in phantom when omitted.
    #[arg(long)]
    phantom: Option<PathBuf>,
    /// Noise levels in dB, or `inf` for clean signals.
    #[arg(long, value_parser = parse_psnr, default_values = ["inf", "40"])]
    psnr: Vec<f64>,
    #[arg(long, default_value_t = 0)]
    noise_seed: u64,
    /// Report directory.
    #[arg(short, long)]
    output: PathBuf,
}

#[derive(Args)]
struct Flops {
    #[command(flatten)]
    grid: GridArgs,
    /// Also print the per-layer breakdown and the cost of the B0 axis.
    #[arg(long)]
    report: bool,
}

fn parse_network(s: &str) -> Result<Method, String> {
    match s.parse::<Method>() {
        Ok(Method::NearestNeighbor) => Err("nearest-neighbor is not a network".into()),
        Ok(m) => Ok(m),
        Err(e) => Err(e.to_string()),
    }
}

fn parse_label(s: &str) -> Result<Label, String> {
    s.parse().map_err(|e: mrfnet::Error| e.to_string())
}

fn parse_psnr(s: &str) -> Result<f64, String> {
    if s.eq_ignore_ascii_case("inf") {
        return Ok(f64::INFINITY);
    }
    match s.parse::<f64>() {
        Ok(v) if v.is_finite() => Ok(v),
        _ => Err(format!("expected a number of dB or 'inf', got '{s}'")),
    }
}

fn gen_dict(args: &GenDict) -> Result<()> {
    let grid = args.grid.load()?;
    let seq = default_sequence(args.grid.seq_seed);
    let start = Instant::now();
    let dict = build_dictionary(&grid, &seq)?;
    dict.save(&args.output)
        .with_context(|| format!("writing {}", args.output.display()))?;
    eprintln!(
        "{} entries × {} samples in {:.1?} -> {}",
        dict.len(),
        dict.signal_len(),
        start.elapsed(),
        args.output.display()
    );
    Ok(())
}

fn gen_train(args: &GenTrain) -> Result<()> {
    let grid = args.grid.load()?;
    let seq = default_sequence(args.grid.seq_seed);
    let sampling = if args.exhaustive {
        Sampling::Exhaustive
    } else {
        Sampling::Uniform {
            n: args.n,
            seed: args.seed,
        }
    };
    let set = TrainingSet::generate(&grid, &seq, sampling)?;
    set.save(&args.output)
        .with_context(|| format!("writing {}", args.output.display()))?;
    eprintln!("{} training signals -> {}", set.len(), args.output.display());
    Ok(())
}

fn train(args: &Train) -> Result<()> {
    let set = TrainingSet::load(&args.data).with_context(|| format!("reading {}", args.data.display()))?;
    let mut cfg = args.net.network_config().expect("network method");
    cfg.input_len = set.sequence.len();
    let model = RegressionModel::new(&cfg, args.label, args.seed)?;
    let train_cfg = TrainConfig {
        learning_rate: args.lr,
        batch_size: args.batch_size,
        epochs: args.epochs,
        seed: args.seed,
        standardization: None,
    };
    let data = set.dataset(args.label)?;
    let (model, _) = train_with_progress(model, &data, &train_cfg, |epoch, loss| {
        eprintln!("epoch {:>4}  loss {loss:.6}", epoch + 1);
    })?;
    model
        .save(&args.output)
        .with_context(|| format!("writing {}", args.output.display()))?;
    eprintln!("{} {} model -> {}", args.net, args.label, args.output.display());
    Ok(())
}

fn evaluate(args: &Evaluate) -> Result<()> {
    let dict = Dictionary::load(&args.dict).with_context(|| format!("reading {}", args.dict.display()))?;
    let spec = match &args.phantom {
        Some(path) => PhantomSpec::from_file(path).with_context(|| format!("reading {}", path.display()))?,
        None => PhantomSpec::default(),
    };
    let phantom = build_phantom(&spec)?;

    let mut models = ModelSet::new();
    let mut methods = vec![Method::NearestNeighbor];
    let mut labels: Vec<Label> = Vec::new();
    for path in &args.models {
        let model = RegressionModel::load(path).with_context(|| format!("reading {}", path.display()))?;
        let Some(method) = Method::identify(&model.config()) else {
            bail!("{}: architecture matches none of the compared networks", path.display());
        };
        if !methods.contains(&method) {
            methods.push(method);
        }
        if !labels.contains(&model.label) {
            labels.push(model.label);
        }
        models.insert(method, model);
    }
    if labels.is_empty() {
        labels = Label::ALL.to_vec();
    }
    labels.sort();
    methods.sort();
    for &m in methods.iter().filter(|&&m| m != Method::NearestNeighbor) {
        for &l in &labels {
            if models.get(m, l).is_none() {
                bail!("missing {m} model for {l}; every network needs one model per evaluated parameter");
            }
        }
    }

    let cfg = ComparisonConfig {
        methods,
        labels,
        noise_levels: args.psnr.clone(),
        noise_seed: args.noise_seed,
    };
    let report = run_comparison(&dict, &models, &phantom, &cfg)?;
    report
        .save(&args.output)
        .with_context(|| format!("writing report to {}", args.output.display()))?;

    println!("{:<18} {:<4} {:>7} {:>10} {:>14}", "method", "par", "noise", "NRMSE %", "FLOPs/pixel");
    for r in &report.rows {
        println!(
            "{:<18} {:<4} {:>7} {:>10.3} {:>14}",
            r.method.name(),
            r.parameter.name(),
            noise_tag(r.psnr),
            r.nrmse,
            r.flops
        );
    }
    for (m, t) in &report.runtime {
        eprintln!("{m}: {t:.2?}");
    }
    Ok(())
}

fn flops(args: &Flops) -> Result<()> {
    let grid = args.grid.load()?;
    let entries = grid.len();
    let nn = count_flops(&MethodDescriptor::NearestNeighbor {
        entries,
        signal_len: SIGNAL_LEN,
    });
    println!("{:<18} {:>16}", "method", "FLOPs/pixel");
    println!("{:<18} {:>16}", Method::NearestNeighbor.name(), nn);
    for m in Method::NETWORKS {
        let cfg = m.network_config().expect("network method");
        println!("{:<18} {:>16}", m.name(), count_flops(&MethodDescriptor::Network(cfg)));
    }
    if !args.report {
        return Ok(());
    }

    println!();
    println!("nearest neighbor: {entries} entries × ({} + 4) FLOPs", 8 * SIGNAL_LEN);
    let without_b0 = ParamGrid {
        b0: vec![0.0],
        ..grid.clone()
    };
    let base = count_flops(&MethodDescriptor::NearestNeighbor {
        entries: without_b0.len(),
        signal_len: SIGNAL_LEN,
    });
    println!(
        "  B0 axis of {} values: {base} -> {nn} FLOPs ({:.0}×)",
        grid.b0.len(),
        nn as f64 / base as f64
    );
    for m in Method::NETWORKS {
        let cfg = m.network_config().expect("network method");
        println!(
            "{} ({} activation, {} FLOPs/unit):",
            m.name(),
            cfg.activation,
            activation_flops(cfg.activation)
        );
        for layer in network_breakdown(&cfg) {
            println!("  {:>5} -> {:<5} {:>12}", layer.fan_in, layer.fan_out, layer.flops);
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    let result = match &cli.command {
        Command::GenDict(a) => gen_dict(a),
        Command::GenTrain(a) => gen_train(a),
        Command::Train(a) => train(a),
        Command::Evaluate(a) => evaluate(a),
        Command::Flops(a) => flops(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
