//! Command-line definitions.

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use wrapgp::{FitConfig, Method, PriorConfig, StepSizes};

#[derive(Debug, Parser)]
#[command(
    name = "wrapgp",
    version,
    about = "Wrapped Gaussian process regression for angular responses"
)]
pub struct Cli {
    /// Log progress to stderr (repeat for more detail). RUST_LOG overrides.
    #[arg(short, long, action = clap::ArgAction::Count, global = true)]
    pub verbose: u8,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate a synthetic dataset.
    Simulate(SimulateArgs),
    /// Fit a model and write its trace.
    Fit(FitArgs),
    /// Predict from a trace at new inputs.
    Predict(PredictArgs),
    /// Score predictions against held-out angles.
    Eval(EvalArgs),
    /// Fit the hierarchical multi-test model.
    Hfit(HfitArgs),
    /// Predict the hierarchical slope curve at new distances.
    Hpredict(HpredictArgs),
    /// Repeated train/test comparison on the logarithmic test functions.
    Benchmark(BenchmarkArgs),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum SimFunction {
    Log,
    LogGap,
    Wgp,
    Rfid,
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    #[arg(long, value_enum)]
    pub function: SimFunction,
    /// Training size (ignored for rfid, which uses --channels per test).
    #[arg(long, default_value_t = 100)]
    pub n: usize,
    #[arg(long)]
    pub seed: u64,
    /// Output file.
    #[arg(long, short, default_value = "data.csv")]
    pub out: PathBuf,
    /// Also write the latent truth (x, z, k, noise) to <out stem>_truth.csv.
    #[arg(long)]
    pub with_truth: bool,
    /// Observation noise SD for the logarithmic functions.
    #[arg(long, default_value_t = wrapgp::synthetic::LOG_NOISE_SD)]
    pub noise_sd: f64,
    #[arg(long, default_value_t = 10.0)]
    pub alpha: f64,
    #[arg(long, default_value_t = 20.0)]
    pub beta: f64,
    #[arg(long, default_value_t = 0.01)]
    pub theta: f64,
    #[arg(long, default_value_t = 1.0)]
    pub tau2: f64,
    #[arg(long, default_value_t = 0.05)]
    pub sigma2: f64,
    #[arg(long, default_value_t = 5.0)]
    pub nu: f64,
    /// Tag distances in metres for rfid, comma separated.
    #[arg(long, value_delimiter = ',', default_values_t = [1.0, 1.5, 2.0, 2.5, 3.0, 3.5, 4.0])]
    pub distances: Vec<f64>,
    #[arg(long, default_value_t = 50)]
    pub channels: usize,
    /// Fraction of channels removed as one contiguous band per rfid test.
    #[arg(long, default_value_t = 0.0)]
    pub censor: f64,
}

/// Angle conventions of an input file.
#[derive(Debug, Args, Clone, Copy)]
pub struct AngleArgs {
    /// Angles in the input are in degrees.
    #[arg(long)]
    pub degrees: bool,
    /// Reflect responses (y -> -y mod 2pi) for data whose phase decreases with x.
    #[arg(long)]
    pub negate: bool,
}

impl AngleArgs {
    pub fn options(&self) -> wrapgp::io::AngleOptions {
        wrapgp::io::AngleOptions {
            degrees: self.degrees,
            negate: self.negate,
        }
    }
}

/// Chain length, priors and step sizes shared by every fitting command.
#[derive(Debug, Args, Clone)]
pub struct ChainArgs {
    #[arg(long, default_value_t = 10_000)]
    pub iters: usize,
    #[arg(long, default_value_t = 5_000)]
    pub burnin: usize,
    #[arg(long, default_value_t = 10)]
    pub thin: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Iteration at which k_min is re-anchored.
    #[arg(long, default_value_t = 1_000)]
    pub reset_iter: usize,
    /// Never re-anchor k_min.
    #[arg(long)]
    pub no_reset: bool,
    #[arg(long, default_value_t = -2, allow_negative_numbers = true)]
    pub kmin_init: i64,
    /// Fixed slope prior mean (scaled-input units); disables the local-slope estimate.
    #[arg(long, allow_negative_numbers = true)]
    pub slope_mean: Option<f64>,
    #[arg(long)]
    pub slope_var: Option<f64>,
    #[arg(long, allow_negative_numbers = true)]
    pub intercept_mean: Option<f64>,
    #[arg(long)]
    pub intercept_var: Option<f64>,
    /// Group size for the local-slope estimate.
    #[arg(long)]
    pub group_size: Option<usize>,
    #[arg(long)]
    pub theta_shape: Option<f64>,
    #[arg(long)]
    pub theta_rate: Option<f64>,
    #[arg(long)]
    pub sigma2_shape: Option<f64>,
    #[arg(long)]
    pub sigma2_rate: Option<f64>,
    #[arg(long)]
    pub nu_rate: Option<f64>,
    #[arg(long)]
    pub step_theta: Option<f64>,
    #[arg(long)]
    pub step_sigma2: Option<f64>,
    #[arg(long)]
    pub step_nu: Option<f64>,
}

impl ChainArgs {
    pub fn fit_config(&self) -> FitConfig {
        let mut prior = PriorConfig::default();
        if let Some(v) = self.slope_mean {
            prior.slope_mean = v;
        }
        set(&mut prior.slope_var, self.slope_var);
        set(&mut prior.intercept_mean, self.intercept_mean);
        set(&mut prior.intercept_var, self.intercept_var);
        if self.group_size.is_some() {
            prior.group_size = self.group_size;
        }
        set(&mut prior.lengthscale.shape, self.theta_shape);
        set(&mut prior.lengthscale.rate, self.theta_rate);
        set(&mut prior.sigma2.shape, self.sigma2_shape);
        set(&mut prior.sigma2.rate, self.sigma2_rate);
        set(&mut prior.nu_rate, self.nu_rate);
        let mut steps = StepSizes::default();
        set(&mut steps.lengthscale, self.step_theta);
        set(&mut steps.sigma2, self.step_sigma2);
        set(&mut steps.nu, self.step_nu);
        FitConfig {
            iterations: self.iters,
            burnin: self.burnin,
            thin: self.thin,
            seed: self.seed,
            reset_iteration: (!self.no_reset).then_some(self.reset_iter),
            k_min_init: self.kmin_init,
            prior,
            auto_slope: self.slope_mean.is_none(),
            steps,
        }
    }
}

fn set(target: &mut f64, value: Option<f64>) {
    if let Some(v) = value {
        *target = v;
    }
}

#[derive(Debug, Args)]
pub struct FitArgs {
    /// Training data with columns x,y.
    #[arg(long)]
    pub data: PathBuf,
    #[arg(long, short, default_value = "trace.json")]
    pub out: PathBuf,
    #[arg(long, default_value = "wgp")]
    pub method: Method,
    /// Half-width of the wrapping-number window of the coupled baseline.
    #[arg(long, default_value_t = 3)]
    pub window: usize,
    #[command(flatten)]
    pub angles: AngleArgs,
    #[command(flatten)]
    pub chain: ChainArgs,
}

/// Where to predict: an even grid over the training range, or explicit inputs.
#[derive(Debug, Args)]
#[group(required = true, multiple = false)]
pub struct Targets {
    /// Number of evenly spaced inputs over the training range.
    #[arg(long)]
    pub grid: Option<usize>,
    /// Explicit inputs in original units, comma separated.
    #[arg(long, value_delimiter = ',', allow_negative_numbers = true)]
    pub at: Option<Vec<f64>>,
    /// Inputs taken from the x column of a data file.
    #[arg(long)]
    pub at_file: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct PredictArgs {
    #[arg(long)]
    pub trace: PathBuf,
    #[arg(long, short, default_value = "prediction.csv")]
    pub out: PathBuf,
    /// Also write the predictive draws (x, s0, s1, ...) for CRPS scoring.
    #[arg(long)]
    pub samples: Option<PathBuf>,
    #[command(flatten)]
    pub targets: Targets,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Angles in --at-file are in degrees.
    #[arg(long)]
    pub degrees: bool,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    /// Held-out data with columns x,y.
    #[arg(long)]
    pub data: PathBuf,
    /// Prediction file written by `predict`.
    #[arg(long)]
    pub pred: PathBuf,
    /// Predictive draws written by `predict --samples`.
    #[arg(long)]
    pub samples: PathBuf,
    /// Write the scores here instead of stdout.
    #[arg(long, short)]
    pub out: Option<PathBuf>,
    /// Held-out angles are in degrees. Predictions are always in radians.
    #[arg(long)]
    pub degrees: bool,
}

#[derive(Debug, Args)]
pub struct HfitArgs {
    /// Grouped data with columns test_id,distance,frequency,phase.
    #[arg(long)]
    pub data: PathBuf,
    #[arg(long, short, default_value = "htrace.json")]
    pub out: PathBuf,
    /// Prior variance of each test's slope around exp(delta).
    #[arg(long, default_value_t = 0.1)]
    pub sigma_beta2: f64,
    #[command(flatten)]
    pub angles: AngleArgs,
    #[command(flatten)]
    pub chain: ChainArgs,
}

#[derive(Debug, Args)]
pub struct HpredictArgs {
    #[arg(long)]
    pub trace: PathBuf,
    #[arg(long, short, default_value = "delta.csv")]
    pub out: PathBuf,
    /// Number of evenly spaced distances over the observed range.
    #[arg(long, conflicts_with = "at")]
    pub grid: Option<usize>,
    /// Explicit distances, comma separated.
    #[arg(long, value_delimiter = ',')]
    pub at: Option<Vec<f64>>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

#[derive(Debug, Args)]
pub struct BenchmarkArgs {
    #[arg(long, default_value = "log")]
    pub function: wrapgp::BenchFunction,
    #[arg(long, value_delimiter = ',', default_values_t = [50, 100, 200])]
    pub sizes: Vec<usize>,
    #[arg(long, default_value_t = 10)]
    pub reps: usize,
    #[arg(long, value_delimiter = ',', default_values_t = [Method::Wgp, Method::Coupled, Method::Ordinary])]
    pub methods: Vec<Method>,
    /// Master seed; every rep and method gets its own substream.
    #[arg(long)]
    pub seed: u64,
    /// Long-format score table. Box-plot descriptions go next to it as
    /// <stem>_rmse_circular.txt and <stem>_crps.txt.
    #[arg(long, short, default_value = "benchmark.csv")]
    pub out: PathBuf,
    #[arg(long, default_value_t = 10_000)]
    pub iters: usize,
    #[arg(long, default_value_t = 5_000)]
    pub burnin: usize,
    #[arg(long, default_value_t = 10)]
    pub thin: usize,
}
