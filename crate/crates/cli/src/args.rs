use std::path::PathBuf;

use biascorr::model::{Init, TrainConfig};
use biascorr::{AugmentOptions, Generator, Objective};
use clap::{Args, Parser, Subcommand, ValueEnum};

#[derive(Debug, Parser)]
#[command(name = "biascorr", version, about = "Bias-corrected synthetic oversampling for imbalanced binary classification")]
pub struct Cli {
    /// Master seed; required by every command that draws random numbers.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Caps the simulation worker pool (default: one worker per core).
    #[arg(long, global = true, value_parser = clap::value_parser!(u16).range(1..))]
    pub jobs: Option<u16>,
    /// Output directory, created if absent (default: `output.dir` from the config, else `.`).
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// TOML config with [study], [dgp], [generator], [train] and [output] tables.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Do not print summaries to stdout.
    #[arg(short, long, global = true)]
    pub quiet: bool,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Fit one objective on a CSV dataset; writes model.json and metrics.csv.
    Train(TrainCmd),
    /// Score a saved model on a CSV dataset; writes evaluation.csv.
    Evaluate(EvaluateCmd),
    /// Run a simulation study; writes reports.csv and summary.md.
    Simulate(SimulateCmd),
    /// Train on an MNIST IDX pair with one digit as the minority class.
    Mnist(MnistCmd),
    /// Multi-task subspace study; adds tasks.csv and subspaces.json.
    Mtl(StudyArgs),
    /// Treatment-effect study with AIPW.
    Ate(AteCmd),
    /// Write a small synthetic IDX image/label pair for smoke runs.
    MnistFixture(FixtureCmd),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Method {
    Raw,
    Syn,
    Bc,
}

impl From<Method> for Objective {
    fn from(m: Method) -> Objective {
        match m {
            Method::Raw => Objective::Raw,
            Method::Syn => Objective::Syn,
            Method::Bc => Objective::Bc,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum InitKind {
    Zeros,
    Gaussian,
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    #[arg(long, default_value_t = 100)]
    pub epochs: usize,
    #[arg(long, visible_alias = "lr", default_value_t = 0.1)]
    pub learning_rate: f64,
    /// Fit without the constant feature.
    #[arg(long)]
    pub no_intercept: bool,
    /// Ridge penalty on the slopes.
    #[arg(long, default_value_t = 0.0)]
    pub l2: f64,
    /// Stop early once the gradient norm falls below this.
    #[arg(long)]
    pub grad_tol: Option<f64>,
    #[arg(long, value_enum, default_value_t = InitKind::Zeros)]
    pub init: InitKind,
    /// Standard deviation of the Gaussian initialisation.
    #[arg(long, default_value_t = 0.01)]
    pub init_sd: f64,
}

impl TrainArgs {
    /// `init_seed` feeds the Gaussian initialisation.
    pub fn config(&self, init_seed: u64) -> TrainConfig {
        let init = match self.init {
            InitKind::Zeros => Init::Zeros,
            InitKind::Gaussian => Init::Gaussian { seed: init_seed, sd: self.init_sd },
        };
        TrainConfig {
            epochs: self.epochs,
            learning_rate: self.learning_rate,
            init,
            grad_tol: self.grad_tol,
            l2: self.l2,
            intercept: !self.no_intercept,
        }
    }
}

#[derive(Debug, Args)]
pub struct GeneratorArgs {
    /// Required for syn and bc.
    #[arg(long, value_parser = clap::builder::PossibleValuesParser::new(Generator::NAMES))]
    pub generator: Option<String>,
    /// Neighbours for smote and biased-smote.
    #[arg(long, default_value_t = 5)]
    pub k: usize,
    /// Noise scale for the perturbed generator.
    #[arg(long, default_value_t = 0.5)]
    pub noise_scale: f64,
    /// Majority rows used to generate majority synthetics; the rest form the correction set.
    #[arg(long)]
    pub n0g: Option<usize>,
    /// Minority synthetics (default n0 - n1).
    #[arg(long)]
    pub n1_syn: Option<usize>,
    /// Majority synthetics (default equal to the minority count).
    #[arg(long)]
    pub n0_syn: Option<usize>,
}

impl GeneratorArgs {
    pub fn build(&self) -> biascorr::Result<Option<Generator>> {
        self.generator.as_deref().map(|g| Generator::from_name(g, self.k, self.noise_scale)).transpose()
    }

    pub fn augment(&self) -> AugmentOptions {
        AugmentOptions { n0g: self.n0g, n1_syn: self.n1_syn, n0_syn: self.n0_syn }
    }
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    /// Train, validation and test fractions.
    #[arg(long, value_delimiter = ',', num_args = 3, default_values_t = [0.6, 0.2, 0.2])]
    pub split: Vec<f64>,
    /// Decision threshold on the predicted probability.
    #[arg(long, default_value_t = 0.5)]
    pub threshold: f64,
    /// Weight of recall in the F-beta score.
    #[arg(long, default_value_t = 1.0)]
    pub f_beta: f64,
}

impl EvalArgs {
    pub fn split(&self) -> [f64; 3] {
        [self.split[0], self.split[1], self.split[2]]
    }
}

#[derive(Debug, Args)]
pub struct TrainCmd {
    /// Headed CSV with numeric covariates and a 0/1 label column.
    #[arg(long)]
    pub data: PathBuf,
    #[arg(long, default_value = "label")]
    pub label_column: String,
    /// Treat label 0 as the minority class.
    #[arg(long)]
    pub swap_labels: bool,
    #[arg(long, value_enum)]
    pub method: Method,
    #[command(flatten)]
    pub generator: GeneratorArgs,
    #[command(flatten)]
    pub train: TrainArgs,
    #[command(flatten)]
    pub eval: EvalArgs,
}

#[derive(Debug, Args)]
pub struct EvaluateCmd {
    /// model.json written by `train` or `mnist`.
    #[arg(long)]
    pub model: PathBuf,
    #[arg(long)]
    pub data: PathBuf,
    #[arg(long, default_value = "label")]
    pub label_column: String,
    #[arg(long)]
    pub swap_labels: bool,
    #[arg(long, default_value_t = 0.5)]
    pub threshold: f64,
    #[arg(long, default_value_t = 1.0)]
    pub f_beta: f64,
}

#[derive(Debug, Args)]
pub struct StudyArgs {
    /// Overrides `study.replicates`.
    #[arg(long)]
    pub replicates: Option<usize>,
    /// Dotted override such as `dgp.n=5000` or `generator.name="biased-smote"`; repeatable.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    pub set: Vec<String>,
    /// Add a wall_ms column to reports.csv (breaks byte-identical reruns).
    #[arg(long)]
    pub timing: bool,
}

#[derive(Debug, Args)]
pub struct SimulateCmd {
    /// mean-shift, nonlinear, sigmoid-bernoulli, ate, mtl, prop2-scaling or gap-shrinkage.
    pub study: String,
    #[command(flatten)]
    pub study_args: StudyArgs,
}

#[derive(Debug, Args)]
pub struct AteCmd {
    /// Use the true outcome functions and noiseless outcomes, so every estimate is exact.
    #[arg(long)]
    pub exact_oracle: bool,
    #[command(flatten)]
    pub study_args: StudyArgs,
}

#[derive(Debug, Args)]
pub struct MnistCmd {
    /// IDX3 image file.
    #[arg(long)]
    pub images: PathBuf,
    /// IDX1 label file.
    #[arg(long)]
    pub labels: PathBuf,
    /// Digit coded as the minority class.
    #[arg(long)]
    pub positive_digit: u8,
    /// Digits kept before subsampling.
    #[arg(long, value_delimiter = ',', default_value = "0,1,2,3,4")]
    pub digits: Vec<u8>,
    /// Share of positives after subsampling.
    #[arg(long, default_value_t = 0.05)]
    pub ratio: f64,
    /// Average-pool images over POOL x POOL pixel blocks before training.
    #[arg(long, default_value_t = 1)]
    pub pool: usize,
    #[arg(long, value_enum)]
    pub method: Method,
    #[command(flatten)]
    pub generator: GeneratorArgs,
    #[command(flatten)]
    pub train: TrainArgs,
    #[command(flatten)]
    pub eval: EvalArgs,
}

#[derive(Debug, Args)]
pub struct FixtureCmd {
    /// Number of images.
    #[arg(long, default_value_t = 2000)]
    pub count: usize,
}
