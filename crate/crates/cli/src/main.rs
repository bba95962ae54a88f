//! Command-line front end for the window-ensemble classifier.
//!
//! Exit codes: 0 success, 2 usage error, 3 I/O error, 4 data error (parse
//! failures, dimension mismatches, invalid values).

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde_json::json;

use xem_core::{
    accuracy, explain_text, fit_xem, generate_synthetic, grid_search, missing_data_experiment,
    noise_experiment, parse_long_csv, parse_ts, split_train_test, write_explanation_csv,
    write_long_csv, Error, Grid, LCEParams, MTSDataset, ModelFile, SyntheticConfig, XEMModel,
    XEMParams,
};

#[derive(Parser)]
#[command(
    name = "xem",
    about = "Explainable multivariate time-series classification",
    version,
    max_term_width = 100
)]
struct Cli {
    /// Worker threads (1 keeps runs bit-reproducible; more never changes
    /// outputs, only speed).
    #[arg(long, global = true, default_value_t = 1)]
    threads: usize,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Train a model and write it as JSON.
    Fit(FitArgs),
    /// Classify a dataset with a saved model.
    Predict(PredictArgs),
    /// Cross-validate a hyperparameter grid and keep the best model.
    GridSearch(GridSearchArgs),
    /// Generate the synthetic sine/square benchmark as train/test CSVs.
    Synth(SynthArgs),
    /// Measure robustness to corrupted inputs.
    #[command(subcommand)]
    Robustness(RobustnessCommand),
}

#[derive(Args)]
struct DataFormat {
    /// Input format; inferred from the file extension when omitted.
    #[arg(long, value_parser = ["ts", "csv"])]
    format: Option<String>,
}

#[derive(Args)]
struct FitArgs {
    /// Labeled training data (.ts or long CSV).
    #[arg(long)]
    train: PathBuf,
    #[command(flatten)]
    format: DataFormat,
    /// Window size as a percentage of the longest training series.
    #[arg(long)]
    win_pct: f64,
    #[arg(long, default_value_t = 10)]
    n_trees: usize,
    /// Cascade depth of each tree.
    #[arg(long, default_value_t = 1)]
    max_depth: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Where to write the model JSON.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct PredictArgs {
    /// Model JSON written by `fit` or `grid-search`.
    #[arg(long)]
    model: PathBuf,
    /// Data to classify (.ts or long CSV).
    #[arg(long)]
    data: PathBuf,
    #[command(flatten)]
    format: DataFormat,
    /// Where to write the predictions CSV.
    #[arg(long)]
    out: PathBuf,
    /// Also write one window-highlight CSV per series (next to the
    /// predictions file) and print each explanation.
    #[arg(long)]
    explain: bool,
}

#[derive(Args)]
struct GridSearchArgs {
    #[arg(long)]
    train: PathBuf,
    #[command(flatten)]
    format: DataFormat,
    /// Window percentages to try.
    #[arg(long, value_delimiter = ',', default_values_t = vec![20.0, 40.0, 60.0, 80.0, 100.0])]
    win_pcts: Vec<f64>,
    /// Ensemble sizes to try.
    #[arg(long, value_delimiter = ',', default_values_t = vec![1, 5, 10, 20, 40, 60, 80, 100])]
    n_trees: Vec<usize>,
    /// Cascade depths to try.
    #[arg(long, value_delimiter = ',', default_values_t = vec![0, 1, 2])]
    max_depths: Vec<usize>,
    /// Cross-validation folds.
    #[arg(long, default_value_t = 3)]
    folds: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Output directory (default: $XEM_OUT_DIR or the working directory);
    /// receives cv_results.csv, model.json, metadata.json.
    #[arg(long)]
    out_dir: Option<PathBuf>,
}

#[derive(Args)]
struct SynthArgs {
    #[arg(long, default_value_t = 10)]
    n_per_class: usize,
    #[arg(long, default_value_t = 100)]
    length: usize,
    #[arg(long, default_value_t = 60)]
    square_start: usize,
    #[arg(long, default_value_t = 20)]
    square_len: usize,
    /// 1 = positives carry one square; 2 = positives carry two squares and
    /// each negative one of them.
    #[arg(long, default_value_t = 1, value_parser = clap::value_parser!(u32).range(1..=2))]
    n_squares: u32,
    #[arg(long, default_value_t = 72)]
    second_square_start: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Output directory (default: $XEM_OUT_DIR or the working directory);
    /// receives synth_train.csv, synth_test.csv, metadata.json.
    #[arg(long)]
    out_dir: Option<PathBuf>,
}

#[derive(Subcommand)]
enum RobustnessCommand {
    /// Error rates under increasing missing-value fractions.
    Missing(MissingArgs),
    /// Error rates under increasing Gaussian noise (data is z-normalized
    /// before injection).
    Noise(NoiseArgs),
}

#[derive(Args)]
struct RobustnessShared {
    #[arg(long)]
    train: PathBuf,
    #[arg(long)]
    test: PathBuf,
    #[command(flatten)]
    format: DataFormat,
    #[arg(long)]
    win_pct: f64,
    #[arg(long, default_value_t = 10)]
    n_trees: usize,
    #[arg(long, default_value_t = 1)]
    max_depth: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Output directory (default: $XEM_OUT_DIR or the working directory).
    #[arg(long)]
    out_dir: Option<PathBuf>,
}

#[derive(Args)]
struct MissingArgs {
    #[command(flatten)]
    shared: RobustnessShared,
    /// Missing-value fractions to test.
    #[arg(long, value_delimiter = ',', default_values_t = vec![0.0, 0.1, 0.2, 0.3, 0.4, 0.5])]
    fractions: Vec<f64>,
    /// Replications per fraction.
    #[arg(long, default_value_t = 10)]
    reps: usize,
}

#[derive(Args)]
struct NoiseArgs {
    #[command(flatten)]
    shared: RobustnessShared,
    /// Noise standard deviations to test.
    #[arg(long, value_delimiter = ',', default_values_t = vec![0.0, 0.2, 0.4, 0.6, 0.8, 1.0])]
    sigmas: Vec<f64>,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    rayon::ThreadPoolBuilder::new()
        .num_threads(cli.threads)
        .build_global()
        .expect("thread pool is built once, before any parallel work");
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            match e {
                Error::Io(_) => ExitCode::from(3),
                _ => ExitCode::from(4),
            }
        }
    }
}

fn run(command: Command) -> Result<(), Error> {
    match command {
        Command::Fit(args) => cmd_fit(args),
        Command::Predict(args) => cmd_predict(args),
        Command::GridSearch(args) => cmd_grid_search(args),
        Command::Synth(args) => cmd_synth(args),
        Command::Robustness(RobustnessCommand::Missing(args)) => cmd_missing(args),
        Command::Robustness(RobustnessCommand::Noise(args)) => cmd_noise(args),
    }
}

fn load_dataset(path: &Path, format: &DataFormat) -> Result<MTSDataset, Error> {
    let text = fs::read_to_string(path)?;
    let format = match format.format.as_deref() {
        Some(f) => f.to_string(),
        None => match path.extension().and_then(|e| e.to_str()) {
            Some("ts") => "ts".to_string(),
            _ => "csv".to_string(),
        },
    };
    if format == "ts" {
        parse_ts(&text)
    } else {
        parse_long_csv(&text)
    }
}

fn out_dir(flag: Option<PathBuf>) -> Result<PathBuf, Error> {
    let dir = flag
        .or_else(|| std::env::var_os("XEM_OUT_DIR").map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from("."));
    fs::create_dir_all(&dir)?;
    Ok(dir)
}

/// Timestamp for model files, taken from the environment so that runs are
/// byte-identical unless the caller opts in.
fn fitted_at() -> Option<String> {
    std::env::var("XEM_FITTED_AT")
        .or_else(|_| std::env::var("SOURCE_DATE_EPOCH"))
        .ok()
}

fn params_from(win_pct: f64, n_trees: usize, max_depth: usize) -> XEMParams {
    XEMParams::new(win_pct, LCEParams { n_trees, max_depth, ..LCEParams::default() })
}

fn save_model(model: &XEMModel, seed: u64, path: &Path) -> Result<(), Error> {
    fs::write(path, ModelFile::new(model, seed, fitted_at()).to_json()?)?;
    Ok(())
}

fn load_model(path: &Path) -> Result<(XEMModel, u64), Error> {
    let text = fs::read_to_string(path)?;
    Ok(ModelFile::from_json(&text)?.into_model())
}

fn cmd_fit(args: FitArgs) -> Result<(), Error> {
    let train = load_dataset(&args.train, &args.format)?;
    let params = params_from(args.win_pct, args.n_trees, args.max_depth);
    let model = fit_xem(&train, &params, args.seed)?;
    save_model(&model, args.seed, &args.out)?;

    let explanations = model.predict(&train)?;
    let truth = train.labels()?;
    let pred: Vec<usize> = explanations.iter().map(|e| e.predicted_class).collect();
    let window_rows: usize =
        train.series.iter().map(|s| s.len().saturating_sub(model.w) + 1).sum();

    println!("fitted on {} series ({} window rows)", train.series.len(), window_rows);
    println!("window length: {} ({}% of {})", model.w, args.win_pct, model.train_max_length);
    println!("seed: {}", args.seed);
    println!("training accuracy: {:.3}", accuracy(&pred, &truth)?);
    for (c, name) in model.class_names.iter().enumerate() {
        let members: Vec<usize> =
            (0..truth.len()).filter(|&i| truth[i] == c).collect();
        if members.is_empty() {
            continue;
        }
        let hits = members.iter().filter(|&&i| pred[i] == c).count();
        println!("  {name}: {hits}/{}", members.len());
    }
    println!("model written to {}", args.out.display());
    Ok(())
}

fn cmd_predict(args: PredictArgs) -> Result<(), Error> {
    let (model, _) = load_model(&args.model)?;
    let data = load_dataset(&args.data, &args.format)?;
    let explanations = model.predict(&data)?;

    let mut csv = String::from("mts_id,predicted_class,confidence,window_start,window_end\n");
    for e in &explanations {
        csv.push_str(&format!(
            "{},{},{},{},{}\n",
            e.mts_id,
            model.class_names[e.predicted_class],
            e.confidence,
            e.window_start,
            e.window_end
        ));
    }
    fs::write(&args.out, csv)?;
    println!("{} predictions written to {}", explanations.len(), args.out.display());

    if args.explain {
        let dir = args.out.parent().map(Path::to_path_buf).unwrap_or_default();
        let mut by_id: Vec<&xem_core::Series> = data.series.iter().collect();
        by_id.sort_by_key(|s| s.id);
        for (e, series) in explanations.iter().zip(by_id) {
            let path = dir.join(format!("explanation_{}.csv", e.mts_id));
            fs::write(&path, write_explanation_csv(e, series))?;
            print!("{}", explain_text(e, &model.class_names));
        }
    }
    Ok(())
}

fn cmd_grid_search(args: GridSearchArgs) -> Result<(), Error> {
    let train = load_dataset(&args.train, &args.format)?;
    let grid =
        Grid { win_pct: args.win_pcts, n_trees: args.n_trees, max_depth: args.max_depths };
    let result = grid_search(&train, &grid, args.folds, args.seed)?;
    let dir = out_dir(args.out_dir)?;

    let mut csv = String::from("win_pct,n_trees,max_depth,mean_accuracy,fold_accuracies\n");
    for p in &result.points {
        let folds: Vec<String> = p.fold_accuracies.iter().map(|a| a.to_string()).collect();
        csv.push_str(&format!(
            "{},{},{},{},{}\n",
            p.win_pct,
            p.n_trees,
            p.max_depth,
            p.mean_accuracy,
            folds.join(";")
        ));
    }
    fs::write(dir.join("cv_results.csv"), csv)?;
    save_model(&result.model, args.seed, &dir.join("model.json"))?;

    let best = result.best();
    let metadata = json!({
        "command": "grid-search",
        "seed": args.seed,
        "folds": args.folds,
        "best": {
            "win_pct": best.win_pct,
            "n_trees": best.n_trees,
            "max_depth": best.max_depth,
            "mean_accuracy": best.mean_accuracy,
        },
    });
    fs::write(dir.join("metadata.json"), format!("{metadata:#}\n"))?;

    println!(
        "best: win_pct={} n_trees={} max_depth={} (mean CV accuracy {:.3})",
        best.win_pct, best.n_trees, best.max_depth, best.mean_accuracy
    );
    println!("results written to {}", dir.display());
    Ok(())
}

fn cmd_synth(args: SynthArgs) -> Result<(), Error> {
    let cfg = SyntheticConfig::new(
        args.n_per_class,
        args.length,
        args.square_start,
        args.square_len,
        args.n_squares as usize,
        (args.n_squares == 2).then_some(args.second_square_start),
        args.seed,
    );
    let data = generate_synthetic(&cfg)?;
    let (train, test) = split_train_test(&data)?;
    let dir = out_dir(args.out_dir)?;
    fs::write(dir.join("synth_train.csv"), write_long_csv(&train))?;
    fs::write(dir.join("synth_test.csv"), write_long_csv(&test))?;

    let metadata = json!({
        "command": "synth",
        "seed": args.seed,
        "n_per_class": args.n_per_class,
        "length": args.length,
        "square_start": args.square_start,
        "square_len": args.square_len,
        "n_squares": args.n_squares,
        "second_square_start":
            (args.n_squares == 2).then_some(args.second_square_start),
        "train_series": train.series.len(),
        "test_series": test.series.len(),
    });
    fs::write(dir.join("metadata.json"), format!("{metadata:#}\n"))?;
    println!(
        "wrote {} train / {} test series to {}",
        train.series.len(),
        test.series.len(),
        dir.display()
    );
    Ok(())
}

fn cmd_missing(args: MissingArgs) -> Result<(), Error> {
    let shared = &args.shared;
    let train = load_dataset(&shared.train, &shared.format)?;
    let test = load_dataset(&shared.test, &shared.format)?;
    let params = params_from(shared.win_pct, shared.n_trees, shared.max_depth);
    let rows =
        missing_data_experiment(&train, &test, &params, &args.fractions, args.reps, shared.seed)?;
    let dir = out_dir(shared.out_dir.clone())?;

    let mut csv = String::from("fraction,mean_error,std_error\n");
    for row in &rows {
        csv.push_str(&format!("{},{},{}\n", row.fraction, row.mean_error, row.std_error));
    }
    fs::write(dir.join("missing.csv"), csv)?;

    let metadata = json!({
        "command": "robustness missing",
        "seed": shared.seed,
        "replication_seeds": (0..args.reps as u64).map(|r| shared.seed + r).collect::<Vec<_>>(),
        "fractions": args.fractions,
        "reps": args.reps,
        "win_pct": shared.win_pct,
        "n_trees": shared.n_trees,
        "max_depth": shared.max_depth,
    });
    fs::write(dir.join("metadata.json"), format!("{metadata:#}\n"))?;
    println!("missing-value error table written to {}", dir.join("missing.csv").display());
    Ok(())
}

fn cmd_noise(args: NoiseArgs) -> Result<(), Error> {
    let shared = &args.shared;
    let train = load_dataset(&shared.train, &shared.format)?;
    let test = load_dataset(&shared.test, &shared.format)?;
    let params = params_from(shared.win_pct, shared.n_trees, shared.max_depth);
    let rows = noise_experiment(&train, &test, &params, &args.sigmas, shared.seed)?;
    let dir = out_dir(shared.out_dir.clone())?;

    let mut csv = String::from("sigma,error\n");
    for row in &rows {
        csv.push_str(&format!("{},{}\n", row.sigma, row.error));
    }
    fs::write(dir.join("noise.csv"), csv)?;

    let metadata = json!({
        "command": "robustness noise",
        "seed": shared.seed,
        "run_seeds": (0..args.sigmas.len() as u64).map(|i| shared.seed + i).collect::<Vec<_>>(),
        "sigmas": args.sigmas,
        "win_pct": shared.win_pct,
        "n_trees": shared.n_trees,
        "max_depth": shared.max_depth,
    });
    fs::write(dir.join("metadata.json"), format!("{metadata:#}\n"))?;
    println!("noise error table written to {}", dir.join("noise.csv").display());
    Ok(())
}
