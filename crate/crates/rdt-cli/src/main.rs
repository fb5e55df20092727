use clap::error::ErrorKind;
use clap::{Args, Parser, Subcommand};
use rdt_cli::config::ExperimentConfig;
use rdt_cli::error::{CliError, Result};
use rdt_cli::{experiment, formats, report};
use rdt_core::baseline::{make_random_tree, train_random_tree};
use rdt_core::data::{frontier_grid, generate_gaussian_dataset, GridBounds};
use rdt_core::inference::{greedy_accuracy, stochastic_accuracy};
use rdt_core::loss::Loss;
use rdt_core::train::{train, TrainConfig};
use rdt_core::tree::TreeTopology;
use rdt_core::{RdtModel, SplitRng};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

#[derive(Parser)]
#[command(name = "rdt", version, about = "Tree classifiers with stochastic routing, trained by policy gradient")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a 2D Gaussian-cluster dataset and write train/test CSVs.
    GenData(GenDataArgs),
    /// Train a model on a dataset CSV and save it with its training log.
    Train(TrainArgs),
    /// Evaluate a saved model on a dataset CSV.
    Eval(EvalArgs),
    /// Run a full experiment from a config file and write a report.
    Experiment(ExperimentArgs),
    /// Export a decision-frontier grid of a saved model.
    Frontier(FrontierArgs),
}

#[derive(Args)]
struct GenDataArgs {
    #[arg(long)]
    classes: usize,
    #[arg(long, default_value_t = 100)]
    per_class: usize,
    #[arg(long, default_value_t = 7)]
    seed: u64,
    /// Output prefix; writes `<out>_train.csv` and `<out>_test.csv`.
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value_t = rdt_core::data::DEFAULT_SIGMA_RANGE.0)]
    sigma_min: f64,
    #[arg(long, default_value_t = rdt_core::data::DEFAULT_SIGMA_RANGE.1)]
    sigma_max: f64,
    #[arg(long, default_value_t = rdt_core::data::DEFAULT_MEAN_BOUNDS.0, allow_negative_numbers = true)]
    mean_min: f64,
    #[arg(long, default_value_t = rdt_core::data::DEFAULT_MEAN_BOUNDS.1, allow_negative_numbers = true)]
    mean_max: f64,
}

#[derive(Args)]
struct TrainArgs {
    /// Training dataset CSV.
    #[arg(long)]
    data: PathBuf,
    #[arg(long)]
    width: usize,
    #[arg(long)]
    depth: usize,
    /// Freeze the random one-hot leaf scores (the baseline protocol).
    #[arg(long)]
    random_tree: bool,
    #[arg(long, default_value_t = 0.1)]
    lr: f64,
    #[arg(long, default_value_t = 200)]
    epochs: usize,
    #[arg(long, default_value = "square")]
    loss: String,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Trajectories sampled per visited example.
    #[arg(long, default_value_t = 1)]
    trajectories: usize,
    #[arg(long, default_value_t = 0.1)]
    init_scale: f64,
    /// Subtract per-node running-mean baselines in the routing updates.
    #[arg(long)]
    baseline: bool,
    /// Scale routing steps by depth to equalize per-level commitment.
    #[arg(long)]
    depth_scaled: bool,
    /// Resample examples uniformly instead of shuffled passes.
    #[arg(long)]
    uniform_sampling: bool,
    /// Optional eval CSV whose accuracy is logged per epoch.
    #[arg(long)]
    eval: Option<PathBuf>,
    /// Model output path.
    #[arg(long)]
    out: PathBuf,
    /// Training-log CSV path; defaults to `<out>.log.csv`.
    #[arg(long)]
    log: Option<PathBuf>,
}

#[derive(Args)]
struct EvalArgs {
    #[arg(long)]
    model: PathBuf,
    #[arg(long)]
    data: PathBuf,
    /// `greedy` (deterministic) or `stochastic` (sampled routing).
    #[arg(long, default_value = "greedy")]
    mode: String,
    /// Sampling passes in stochastic mode.
    #[arg(long, default_value_t = 100)]
    samples: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(Args)]
struct ExperimentArgs {
    #[arg(long)]
    config: PathBuf,
    /// Machine-readable report output path.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct FrontierArgs {
    #[arg(long)]
    model: PathBuf,
    /// `x0_min,x0_max,x1_min,x1_max`.
    #[arg(long, default_value = "-1.5,1.5,-1.5,1.5", allow_hyphen_values = true)]
    bounds: String,
    #[arg(long, default_value_t = 101)]
    resolution: usize,
    #[arg(long)]
    out: PathBuf,
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) {
                let _ = e.print();
                return ExitCode::SUCCESS;
            }
            let _ = e.print();
            return ExitCode::from(1);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("{e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::GenData(args) => gen_data(args),
        Command::Train(args) => do_train(args),
        Command::Eval(args) => do_eval(args),
        Command::Experiment(args) => do_experiment(args),
        Command::Frontier(args) => do_frontier(args),
    }
}

fn suffixed(prefix: &Path, suffix: &str) -> PathBuf {
    let mut name = prefix.file_name().map(|s| s.to_os_string()).unwrap_or_default();
    name.push(suffix);
    prefix.with_file_name(name)
}

fn gen_data(args: GenDataArgs) -> Result<()> {
    let (train_set, test_set) = generate_gaussian_dataset(
        args.classes,
        args.per_class,
        args.seed,
        (args.mean_min, args.mean_max),
        (args.sigma_min, args.sigma_max),
    )?;
    let train_path = suffixed(&args.out, "_train.csv");
    let test_path = suffixed(&args.out, "_test.csv");
    formats::save_dataset(&train_set, &train_path)?;
    formats::save_dataset(&test_set, &test_path)?;
    println!(
        "wrote {} ({} rows) and {} ({} rows): {} classes, sigma in [{}, {}], seed {}",
        train_path.display(),
        train_set.len(),
        test_path.display(),
        test_set.len(),
        args.classes,
        args.sigma_min,
        args.sigma_max,
        args.seed
    );
    Ok(())
}

fn do_train(args: TrainArgs) -> Result<()> {
    let data = formats::load_dataset(&args.data)?;
    let loss: Loss = args.loss.parse()?;
    let eval = args.eval.as_deref().map(formats::load_dataset).transpose()?;
    let topology = TreeTopology::complete(args.width, args.depth)?;

    let mut model = if args.random_tree {
        make_random_tree(topology, data.input_dim, data.num_classes, args.init_scale, args.seed)?
    } else {
        RdtModel::init(topology, data.input_dim, data.num_classes, args.init_scale, args.seed)?
    };

    let mut cfg = TrainConfig::new(args.lr, args.epochs).with_seed(args.seed).with_loss(loss);
    cfg.trajectories_per_example = args.trajectories;
    cfg.baseline_enabled = args.baseline;
    cfg.depth_scaled_steps = args.depth_scaled;
    cfg.uniform_sampling = args.uniform_sampling;
    cfg.validate()?;

    let log = if args.random_tree {
        train_random_tree(&mut model, &data, &cfg, eval.as_ref())?
    } else {
        train(&mut model, &data, &cfg, eval.as_ref())?
    };

    formats::save_model(&model, &args.out)?;
    let log_path = args.log.unwrap_or_else(|| suffixed(&args.out, ".log.csv"));
    formats::save_trainlog(&log, &log_path)?;
    println!(
        "trained {} epochs: final train acc {:.4}, model -> {}, log -> {}",
        args.epochs,
        log.train_acc.last().copied().unwrap_or(f64::NAN),
        args.out.display(),
        log_path.display()
    );
    Ok(())
}

fn do_eval(args: EvalArgs) -> Result<()> {
    let model = formats::load_model(&args.model)?;
    let data = formats::load_dataset(&args.data)?;
    match args.mode.as_str() {
        "greedy" => {
            let acc = greedy_accuracy(&model, &data)?;
            println!("accuracy {acc}");
        }
        "stochastic" => {
            let mut rng = SplitRng::seed_from_u64(args.seed);
            let (acc, se) = stochastic_accuracy(&model, &data, args.samples, &mut rng)?;
            println!("accuracy {acc} stderr {se} samples {}", args.samples);
        }
        other => {
            return Err(CliError::Usage(format!(
                "unknown mode {other:?} (expected greedy or stochastic)"
            )))
        }
    }
    Ok(())
}

fn do_experiment(args: ExperimentArgs) -> Result<()> {
    let text = std::fs::read_to_string(&args.config)
        .map_err(|e| CliError::io(&args.config, e))?;
    let cfg = ExperimentConfig::parse(&text)?;
    let output = experiment::run_experiment(&cfg)?;
    let machine = report::render_machine(&output);
    report::verify_report(&machine)?;
    formats::write_atomic(&args.out, &machine)?;
    print!("{}", report::render_table(&output));
    println!("report -> {}", args.out.display());
    Ok(())
}

fn do_frontier(args: FrontierArgs) -> Result<()> {
    let model = formats::load_model(&args.model)?;
    let parts: Vec<f64> = args
        .bounds
        .split(',')
        .map(|p| p.trim().parse())
        .collect::<std::result::Result<_, _>>()
        .map_err(|_| CliError::Usage(format!("invalid --bounds {:?}", args.bounds)))?;
    if parts.len() != 4 {
        return Err(CliError::Usage("--bounds needs 4 comma-separated numbers".into()));
    }
    let bounds = GridBounds::new(parts[0], parts[1], parts[2], parts[3])?;
    let grid = frontier_grid(&model, bounds, args.resolution)?;
    formats::save_frontier(&grid, &args.out)?;
    println!(
        "wrote {} ({} rows at resolution {})",
        args.out.display(),
        grid.classes.len(),
        args.resolution
    );
    Ok(())
}
