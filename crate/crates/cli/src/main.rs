//! `gdm`: simulate, train, complete, assign and evaluate from the shell.
//!
//! Every subcommand reads and writes plain CSV (plus the `gdm-v1` model
//! text format). Outputs are written to a temporary file next to the target
//! and renamed on success, so a failing command leaves no partial file.

use std::fs::File;
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use gdm_core::io::{
    load_model, read_assignments, read_completed, read_dense, read_events, read_observations, read_profiles,
    save_model, write_assignments, write_completed, write_dense, write_events, write_observations,
};
use gdm_core::{
    accuracy_against, aggregate_events, assign_all, assign_from_model, assign_user, complete,
    gen_bartle_population, gen_event_log, gen_ground_truth, mae, rmse, sparsify, split, train_with_restarts,
    AggregationConfig, BartleSpec, ColdPolicy, DuplicatePolicy, ElementId, Error, GroundTruth, Hyperparams,
    LatentFactorModel, MetricsReport, Observation, Optimizer, SparseUtilityMatrix, TrainingStats, UserId,
};

#[derive(Parser)]
#[command(
    name = "gdm",
    version,
    about = "Assign game design elements to users by predicted utility"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic population and a sparse sample of its scores
    Simulate(SimulateArgs),
    /// Fit a latent factor model to an observation file
    Train(TrainArgs),
    /// Fill the missing cells of an observation file with model predictions
    Complete(CompleteArgs),
    /// Pick the highest-utility element for every user
    Assign(AssignArgs),
    /// Report rmse, mae and optionally assignment accuracy
    Evaluate(EvaluateArgs),
    /// Turn an interaction event log into observations
    Aggregate(AggregateArgs),
    /// Seeded train/test split of an observation file
    Split(SplitArgs),
}

#[derive(Args)]
struct SimulateArgs {
    /// Number of users (ignored with --bartle)
    #[arg(long, required_unless_present = "bartle")]
    users: Option<usize>,
    /// Number of elements (ignored with --bartle)
    #[arg(long, required_unless_present = "bartle")]
    elements: Option<usize>,
    /// Rank of the generating factors (ignored with --bartle)
    #[arg(long, required_unless_present = "bartle")]
    rank: Option<usize>,
    /// Fraction of cells to observe, in (0, 1]
    #[arg(long)]
    density: f64,
    #[arg(long, default_value_t = 42)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value_t = 0.0)]
    noise_sigma: f64,
    #[arg(long, default_value_t = 5.0)]
    score_max: f64,
    /// Element profile file (`element_id,achiever,explorer,socializer,killer`)
    #[arg(long)]
    bartle: Option<PathBuf>,
    #[arg(long, default_value_t = 50, requires = "bartle")]
    achievers: usize,
    #[arg(long, default_value_t = 50, requires = "bartle")]
    explorers: usize,
    #[arg(long, default_value_t = 50, requires = "bartle")]
    socializers: usize,
    #[arg(long, default_value_t = 50, requires = "bartle")]
    killers: usize,
    /// Upper bound of the per-type affinity jitter
    #[arg(long, default_value_t = 0.2, requires = "bartle")]
    jitter: f64,
    /// Also write the full score matrix here
    #[arg(long)]
    ground_truth: Option<PathBuf>,
    /// Also write a simulated event log here
    #[arg(long, requires = "events_per_unit")]
    events: Option<PathBuf>,
    #[arg(long)]
    events_per_unit: Option<f64>,
}

#[derive(Args)]
struct TrainArgs {
    #[arg(long)]
    input: PathBuf,
    #[arg(long)]
    rank: usize,
    #[arg(long, default_value = "als", value_parser = ["als", "sgd"])]
    optimizer: String,
    #[arg(long, default_value_t = 0.0)]
    lambda: f64,
    #[arg(long, default_value_t = 0.01)]
    learning_rate: f64,
    #[arg(long, default_value_t = 500)]
    max_epochs: usize,
    #[arg(long, default_value_t = 1e-8)]
    tol: f64,
    #[arg(long, default_value_t = 42)]
    seed: u64,
    /// Independent starts with seeds seed, seed+1, ...; the lowest objective wins
    #[arg(long, default_value_t = 1)]
    restarts: usize,
    /// Observation file whose users and elements are included in the model
    /// even without training observations (e.g. the ground truth)
    #[arg(long)]
    ids_from: Option<PathBuf>,
    #[arg(long)]
    model_out: PathBuf,
}

#[derive(Args)]
struct CompleteArgs {
    #[arg(long)]
    model: PathBuf,
    /// Observations the model was trained on
    #[arg(long)]
    input: PathBuf,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct AssignArgs {
    /// Completed matrix from `gdm complete`
    #[arg(long, conflicts_with_all = ["model", "input"])]
    completed: Option<PathBuf>,
    /// Assign from model predictions; cold users fall back to the most popular element
    #[arg(long, requires = "input")]
    model: Option<PathBuf>,
    /// Training observations (with --model), or a fully observed score matrix
    #[arg(long)]
    input: Option<PathBuf>,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct EvaluateArgs {
    #[arg(long)]
    model: PathBuf,
    #[arg(long)]
    test: PathBuf,
    /// Full score matrix; adds an accuracy line
    #[arg(long)]
    ground_truth: Option<PathBuf>,
    /// Assignments to score against the ground truth (default: model argmax)
    #[arg(long, requires = "ground_truth")]
    assignments: Option<PathBuf>,
    /// Training observations, used for the cold-user fallback of the model argmax
    #[arg(long)]
    train: Option<PathBuf>,
    /// Write the report here instead of stdout
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct AggregateArgs {
    #[arg(long)]
    events: PathBuf,
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value_t = 1.0)]
    click_weight: f64,
    #[arg(long, default_value_t = 0.5)]
    hover_weight: f64,
    #[arg(long, default_value_t = 0.2)]
    view_weight: f64,
    #[arg(long, default_value_t = 5.0)]
    score_max: f64,
    #[arg(long, default_value_t = 10.0)]
    half_saturation: f64,
}

#[derive(Args)]
struct SplitArgs {
    #[arg(long)]
    input: PathBuf,
    #[arg(long, default_value_t = 0.8)]
    train_fraction: f64,
    #[arg(long, default_value_t = 42)]
    seed: u64,
    #[arg(long)]
    train_out: PathBuf,
    #[arg(long)]
    test_out: PathBuf,
}

/// Exit status for each error kind. Usage errors exit with 2 (clap).
fn exit_code(err: &Error) -> u8 {
    match err {
        Error::Io(_) => 3,
        Error::Parse { .. } => 4,
        Error::InvalidParameter(_) => 5,
        Error::EmptyInput(_) => 6,
        Error::InvalidId(_) => 7,
        Error::DuplicatePair { .. } => 8,
        Error::NonFiniteScore { .. } => 9,
        Error::ScoreOutOfRange { .. } => 10,
        Error::UnknownUser(_) => 11,
        Error::UnknownElement(_) => 12,
        Error::IndexMismatch(_) => 13,
        Error::Diverged { .. } => 14,
        Error::ColdStart(_) => 15,
        Error::DegenerateDraw(_) => 16,
        Error::IncompleteRow(_) => 17,
        Error::UnknownEventType(_) => 18,
    }
}

type Result<T> = std::result::Result<T, Error>;

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Simulate(a) => simulate(a),
        Command::Train(a) => train(a),
        Command::Complete(a) => complete_cmd(a),
        Command::Assign(a) => assign(a),
        Command::Evaluate(a) => evaluate(a),
        Command::Aggregate(a) => aggregate(a),
        Command::Split(a) => split_cmd(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("gdm: {err}");
            ExitCode::from(exit_code(&err))
        }
    }
}

fn open(path: &Path) -> Result<BufReader<File>> {
    File::open(path)
        .map(BufReader::new)
        .map_err(|e| Error::Io(std::io::Error::new(e.kind(), format!("{}: {e}", path.display()))))
}

/// Writes through a temporary file in the target's directory, renamed into
/// place only after `fill` succeeds.
fn write_atomic(path: &Path, fill: impl FnOnce(&mut BufWriter<&mut File>) -> Result<()>) -> Result<()> {
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    let mut tmp = tempfile::NamedTempFile::new_in(dir)?;
    {
        let mut w = BufWriter::new(tmp.as_file_mut());
        fill(&mut w)?;
        w.flush()?;
    }
    tmp.persist(path).map_err(|e| Error::Io(e.error))?;
    Ok(())
}

fn check_targets(paths: &[&Path]) -> Result<()> {
    for p in paths {
        if p.is_dir() {
            return Err(Error::InvalidParameter(format!("{} is a directory", p.display())));
        }
    }
    Ok(())
}

fn simulate(a: SimulateArgs) -> Result<()> {
    if !(a.density > 0.0 && a.density <= 1.0) {
        return Err(Error::InvalidParameter("--density must lie in (0, 1]".into()));
    }
    if let Some(r) = a.events_per_unit {
        if !(r > 0.0 && r.is_finite()) {
            return Err(Error::InvalidParameter(
                "--events-per-unit must be positive".into(),
            ));
        }
    }
    let gt: GroundTruth<f64> = match &a.bartle {
        Some(path) => {
            let profiles = read_profiles(open(path)?)?;
            let spec = BartleSpec {
                noise_sigma: a.noise_sigma,
                score_max: a.score_max,
                jitter: a.jitter,
                ..BartleSpec::new(
                    [a.achievers, a.explorers, a.socializers, a.killers],
                    profiles,
                    a.seed,
                )
            };
            gen_bartle_population(&spec)?
        }
        None => gen_ground_truth(
            a.users.expect("required by clap"),
            a.elements.expect("required by clap"),
            a.rank.expect("required by clap"),
            a.seed,
            a.score_max,
            a.noise_sigma,
        )?,
    };
    let sample = sparsify(&gt, a.density, a.seed.wrapping_add(1))?;
    let events = match a.events_per_unit {
        Some(rate) if a.events.is_some() => Some(gen_event_log(&gt, rate, a.seed.wrapping_add(2))?),
        _ => None,
    };

    write_atomic(&a.out, |w| write_observations(w, &sample.to_observations()))?;
    if let Some(path) = &a.ground_truth {
        write_atomic(path, |w| write_dense(w, &gt.dense))?;
    }
    if let (Some(path), Some(log)) = (&a.events, &events) {
        write_atomic(path, |w| write_events(w, log))?;
    }
    println!("users={}", gt.n_users());
    println!("elements={}", gt.n_elements());
    println!("observations={}", sample.nnz());
    if let Some(log) = &events {
        println!("events={}", log.len());
    }
    Ok(())
}

fn ids_of(obs: &[Observation<f64>]) -> (Vec<UserId>, Vec<ElementId>) {
    let mut users = gdm_core::IdIndex::new();
    let mut elements = gdm_core::IdIndex::new();
    for o in obs {
        users.intern(o.user.clone());
        elements.intern(o.element.clone());
    }
    (users.ids().to_vec(), elements.ids().to_vec())
}

fn train(a: TrainArgs) -> Result<()> {
    let hp = Hyperparams {
        k: a.rank,
        lambda: a.lambda,
        learning_rate: a.learning_rate,
        max_epochs: a.max_epochs,
        tol: a.tol,
        seed: a.seed,
    };
    hp.validate()?;
    let optimizer: Optimizer = a.optimizer.parse()?;
    check_targets(&[&a.model_out])?;
    let obs = read_observations::<f64, _>(open(&a.input)?)?;
    let (users, elements) = match &a.ids_from {
        Some(path) => ids_of(&read_observations(open(path)?)?),
        None => (Vec::new(), Vec::new()),
    };
    let data = SparseUtilityMatrix::build_over(&users, &elements, &obs, DuplicatePolicy::Mean)?;
    let (model, report, seed) = train_with_restarts(optimizer, &data, &hp, a.restarts)?;
    write_atomic(&a.model_out, |w| save_model(w, &model))?;
    println!("final_objective={:?}", report.final_objective);
    println!("epochs={}", report.epochs_run);
    println!("converged={}", report.converged);
    println!("seed={seed}");
    Ok(())
}

fn load(path: &Path) -> Result<LatentFactorModel<f64>> {
    load_model(open(path)?)
}

/// Training observations laid out on the model's own row and column order.
fn data_for(model: &LatentFactorModel<f64>, path: &Path) -> Result<SparseUtilityMatrix<f64>> {
    let obs = read_observations(open(path)?)?;
    SparseUtilityMatrix::build_over(model.users(), model.elements(), &obs, DuplicatePolicy::Mean)
}

fn complete_cmd(a: CompleteArgs) -> Result<()> {
    let model = load(&a.model)?;
    let data = data_for(&model, &a.input)?;
    let done = complete(&model, &data)?;
    write_atomic(&a.out, |w| write_completed(w, &done))
}

fn model_assignments(
    model: LatentFactorModel<f64>,
    train: Option<&Path>,
) -> Result<Vec<gdm_core::Assignment<f64>>> {
    let model = match train {
        Some(path) => {
            let data = data_for(&model, path)?;
            if !model.same_index(&data) {
                return Err(Error::IndexMismatch(
                    "training file has ids the model lacks".into(),
                ));
            }
            model.with_stats(TrainingStats::from_matrix(&data))
        }
        None => model,
    };
    model
        .users()
        .iter()
        .map(|u| assign_from_model(&model, u, ColdPolicy::GlobalPopularity))
        .collect()
}

fn assign(a: AssignArgs) -> Result<()> {
    let picks = match (&a.completed, &a.model, &a.input) {
        (Some(path), _, _) => assign_all(&read_completed(open(path)?)?),
        (None, Some(model), Some(input)) => model_assignments(load(model)?, Some(input))?,
        (None, None, Some(input)) => {
            let dense = read_dense::<f64, _>(open(input)?)?;
            (0..dense.n_users())
                .map(|r| {
                    let row: Vec<_> = dense
                        .elements()
                        .iter()
                        .cloned()
                        .zip(dense.row(r).iter().copied())
                        .collect();
                    assign_user(&dense.users()[r], &row)
                })
                .collect::<Result<_>>()?
        }
        _ => {
            return Err(Error::InvalidParameter(
                "give --completed, --model with --input, or --input alone".into(),
            ))
        }
    };
    write_atomic(&a.out, |w| write_assignments(w, &picks))
}

fn evaluate(a: EvaluateArgs) -> Result<()> {
    let model = load(&a.model)?;
    let test = read_observations(open(&a.test)?)?;
    let mut report = MetricsReport {
        rmse: rmse(&model, &test)?,
        mae: mae(&model, &test)?,
        accuracy: None,
        n_test: test.len(),
    };
    if let Some(gt_path) = &a.ground_truth {
        let truth = GroundTruth::<f64>::from_dense(read_dense(open(gt_path)?)?);
        let picks = match &a.assignments {
            Some(path) => read_assignments::<f64, _>(open(path)?)?,
            None => model_assignments(model, a.train.as_deref())?,
        };
        report.accuracy = Some(accuracy_against(&picks, &truth.true_assignments)?);
    }
    match &a.out {
        Some(path) => write_atomic(path, |w| Ok(write!(w, "{report}")?)),
        None => {
            print!("{report}");
            Ok(())
        }
    }
}

fn aggregate(a: AggregateArgs) -> Result<()> {
    let cfg = AggregationConfig {
        click_weight: a.click_weight,
        hover_weight: a.hover_weight,
        view_weight: a.view_weight,
        score_max: a.score_max,
        half_saturation: a.half_saturation,
    };
    cfg.validate()?;
    let events = read_events(open(&a.events)?)?;
    let obs = aggregate_events(&events, &cfg)?;
    write_atomic(&a.out, |w| write_observations(w, &obs))?;
    println!("events={}", events.len());
    println!("observations={}", obs.len());
    Ok(())
}

fn split_cmd(a: SplitArgs) -> Result<()> {
    let obs = read_observations::<f64, _>(open(&a.input)?)?;
    let (train, test) = split(&obs, a.train_fraction, a.seed)?;
    check_targets(&[&a.train_out, &a.test_out])?;
    write_atomic(&a.train_out, |w| write_observations(w, &train))?;
    write_atomic(&a.test_out, |w| write_observations(w, &test))?;
    println!("train={}", train.len());
    println!("test={}", test.len());
    Ok(())
}
