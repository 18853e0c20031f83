//! `wrapgp` command-line tool.
//!
//! Exit codes: 0 success, 1 usage error, 2 data error, 3 numerical failure.
//! `WRAPGP_THREADS` sets the worker thread count.

mod args;

use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::Parser;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use wrapgp::experiment::{boxplot_description, Metric};
use wrapgp::io::{self, AngleOptions};
use wrapgp::synthetic::{self, RfidConfig, WgpParams};
use wrapgp::{BaselineConfig, BenchConfig, FitConfig, HierConfig, Method};

use args::{
    BenchmarkArgs, Cli, Command, EvalArgs, FitArgs, HfitArgs, HpredictArgs, PredictArgs, SimFunction, SimulateArgs,
};

const THREADS_VAR: &str = "WRAPGP_THREADS";

/// A bad flag combination found after parsing.
#[derive(Debug)]
struct UsageError(String);

impl std::fmt::Display for UsageError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for UsageError {}

fn usage(msg: impl Into<String>) -> anyhow::Error {
    UsageError(msg.into()).into()
}

fn exit_code(err: &anyhow::Error) -> u8 {
    if err.downcast_ref::<UsageError>().is_some() {
        return 1;
    }
    match err.chain().find_map(|e| e.downcast_ref::<wrapgp::Error>()) {
        Some(e) if e.is_numerical() => 3,
        _ => 2,
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(1)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();

    match configure_threads().and_then(|()| run(cli.command)) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}

fn configure_threads() -> Result<()> {
    let Ok(value) = std::env::var(THREADS_VAR) else {
        return Ok(());
    };
    let n: usize = value
        .trim()
        .parse()
        .ok()
        .filter(|n| *n > 0)
        .ok_or_else(|| usage(format!("{THREADS_VAR} must be a positive integer, got '{value}'")))?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .context("building the worker pool")
}

fn run(command: Command) -> Result<()> {
    match command {
        Command::Simulate(a) => simulate(a),
        Command::Fit(a) => fit(a),
        Command::Predict(a) => predict(a),
        Command::Eval(a) => eval(a),
        Command::Hfit(a) => hfit(a),
        Command::Hpredict(a) => hpredict(a),
        Command::Benchmark(a) => benchmark(a),
    }
}

/// `<dir>/<stem><suffix>` next to `path`.
fn sibling(path: &Path, suffix: &str) -> PathBuf {
    let stem = path.file_stem().and_then(|s| s.to_str()).unwrap_or("out");
    path.with_file_name(format!("{stem}{suffix}"))
}

fn check_chain(config: &FitConfig) -> Result<()> {
    config.validate().map_err(|e| usage(e.to_string()))
}

fn simulate(a: SimulateArgs) -> Result<()> {
    let mut rng = ChaCha8Rng::seed_from_u64(a.seed);
    let truth_path = sibling(&a.out, "_truth.csv");
    let (data, truth) = match a.function {
        SimFunction::Log => {
            let x = synthetic::log_design(a.n, &mut rng);
            synthetic::gen_log(&x, a.noise_sd, &mut rng)?
        }
        SimFunction::LogGap => synthetic::gen_log_gapped(a.n, a.noise_sd, &mut rng)?,
        SimFunction::Wgp => {
            let params = WgpParams {
                alpha: a.alpha,
                beta: a.beta,
                theta: a.theta,
                tau2: a.tau2,
                sigma2: a.sigma2,
                nu: a.nu,
            };
            let x = synthetic::gen_lhs(a.n, (0.0, 1.0), &mut rng);
            synthetic::gen_wgp_instance(&x, &params, &mut rng)?
        }
        SimFunction::Rfid => {
            let config = RfidConfig {
                distances: a.distances.clone(),
                channels: a.channels,
                censor_fraction: a.censor,
                ..RfidConfig::default()
            };
            let groups = synthetic::gen_rfid_like(&config, &mut rng)?;
            io::write_groups(&a.out, &groups)?;
            if a.with_truth {
                let mut text = String::from("test_id,distance,unit_slope\n");
                for g in &groups {
                    writeln!(text, "{},{},{}", g.test_id, g.distance, config.unit_slope(g.distance))?;
                }
                std::fs::write(&truth_path, text).with_context(|| format!("writing {}", truth_path.display()))?;
            }
            log::info!("wrote {} tests to {}", groups.len(), a.out.display());
            return Ok(());
        }
    };
    io::write_dataset(&a.out, &data)?;
    if a.with_truth {
        io::write_truth(&truth_path, &data, &truth)?;
    }
    log::info!("wrote {} rows to {}", data.len(), a.out.display());
    Ok(())
}

fn fit(a: FitArgs) -> Result<()> {
    let config = a.chain.fit_config();
    check_chain(&config)?;
    let data =
        io::read_dataset(&a.data, a.angles.options()).with_context(|| format!("reading {}", a.data.display()))?;
    log::info!("fitting {} to {} points", a.method, data.len());
    let mut trace = match a.method {
        Method::Wgp => wrapgp::fit(&data, &config)?,
        Method::Coupled => wrapgp::fit_coupled(
            &data,
            &BaselineConfig {
                window: a.window,
                ..BaselineConfig::from_fit(config)
            },
        )?,
        Method::Ordinary => wrapgp::fit_ordinary(&data, &BaselineConfig::from_fit(config))?,
    };
    trace.meta.negated = a.angles.negate;
    log::info!("acceptance: {:?}", trace.meta.acceptance);
    io::write_json(&a.out, &trace)?;
    log::info!("wrote {} samples to {}", trace.len(), a.out.display());
    Ok(())
}

fn predict(a: PredictArgs) -> Result<()> {
    let trace = io::read_trace(&a.trace).with_context(|| format!("reading {}", a.trace.display()))?;
    let x = if let Some(n) = a.targets.grid {
        if n < 2 {
            return Err(usage("--grid needs at least 2 points"));
        }
        wrapgp::predict::grid(&trace, n)
    } else if let Some(at) = a.targets.at {
        at
    } else if let Some(path) = a.targets.at_file {
        let options = AngleOptions {
            degrees: a.degrees,
            negate: false,
        };
        io::read_dataset(&path, options)
            .with_context(|| format!("reading {}", path.display()))?
            .x()
            .to_vec()
    } else {
        return Err(usage("one of --grid, --at or --at-file is required"));
    };
    let mut pred = wrapgp::predict(&trace, &x, a.seed)?;
    if trace.meta.negated {
        pred = pred.negated();
    }
    io::write_prediction(&a.out, &pred)?;
    if let Some(path) = &a.samples {
        io::write_samples(path, &pred)?;
    }
    log::info!("wrote {} predictions to {}", pred.len(), a.out.display());
    Ok(())
}

fn eval(a: EvalArgs) -> Result<()> {
    let options = AngleOptions {
        degrees: a.degrees,
        negate: false,
    };
    let data = io::read_dataset(&a.data, options).with_context(|| format!("reading {}", a.data.display()))?;
    let pred = io::read_prediction(&a.pred).with_context(|| format!("reading {}", a.pred.display()))?;
    let (sx, samples) = io::read_samples(&a.samples).with_context(|| format!("reading {}", a.samples.display()))?;
    for (name, xs) in [("prediction", &pred.x), ("samples", &sx)] {
        if xs.len() != data.len() {
            return Err(wrapgp::Error::InvalidInput(format!(
                "{name} file has {} rows but the data has {}",
                xs.len(),
                data.len()
            ))
            .into());
        }
        if let Some(i) = (0..xs.len()).find(|&i| (xs[i] - data.x()[i]).abs() > 1e-9 * (1.0 + data.x()[i].abs())) {
            return Err(wrapgp::Error::InvalidInput(format!(
                "{name} row {} is at x = {} but the data point is at x = {}",
                i + 1,
                xs[i],
                data.x()[i]
            ))
            .into());
        }
    }
    let report = wrapgp::metrics::score(data.y(), &pred.mean_wrapped, &samples)?;
    let doc = serde_json::json!({
        "n": report.n,
        "rmse_circular": report.rmse_circular,
        "rmse_circular_sqrt": report.rmse_circular_sqrt,
        "crps": report.crps,
    });
    let text = serde_json::to_string_pretty(&doc)? + "\n";
    match &a.out {
        Some(path) => std::fs::write(path, text).with_context(|| format!("writing {}", path.display()))?,
        None => print!("{text}"),
    }
    Ok(())
}

fn hfit(a: HfitArgs) -> Result<()> {
    let fit = a.chain.fit_config();
    check_chain(&fit)?;
    if !(a.sigma_beta2 > 0.0 && a.sigma_beta2.is_finite()) {
        return Err(usage("--sigma-beta2 must be positive"));
    }
    let groups =
        io::read_groups(&a.data, a.angles.options()).with_context(|| format!("reading {}", a.data.display()))?;
    let config = HierConfig {
        fit,
        sigma_beta2: a.sigma_beta2,
        ..HierConfig::default()
    };
    log::info!("fitting {} tests", groups.len());
    let trace = wrapgp::hier_fit(&groups, &config)?;
    io::write_json(&a.out, &trace)?;
    Ok(())
}

fn hpredict(a: HpredictArgs) -> Result<()> {
    let trace = io::read_hier_trace(&a.trace).with_context(|| format!("reading {}", a.trace.display()))?;
    let d = match (&a.grid, &a.at) {
        (_, Some(at)) => at.clone(),
        (n, None) => {
            let n = n.unwrap_or(100);
            if n < 2 {
                return Err(usage("--grid needs at least 2 points"));
            }
            let lo = trace.distances.iter().copied().fold(f64::INFINITY, f64::min);
            let hi = trace.distances.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            wrapgp::predict::linspace(lo, hi, n)
        }
    };
    let pred = wrapgp::predict_delta(&trace, &d, a.seed)?;
    io::write_delta_prediction(&a.out, &pred)?;
    Ok(())
}

fn benchmark(a: BenchmarkArgs) -> Result<()> {
    let config = BenchConfig {
        function: a.function,
        sizes: a.sizes,
        reps: a.reps,
        methods: a.methods,
        seed: a.seed,
        fit: FitConfig {
            iterations: a.iters,
            burnin: a.burnin,
            thin: a.thin,
            ..FitConfig::default()
        },
    };
    config.validate().map_err(|e| usage(e.to_string()))?;
    check_chain(&config.fit)?;
    let rows = wrapgp::run_benchmark(&config)?;
    io::write_bench_rows(&a.out, &rows)?;
    for metric in [Metric::Rmse, Metric::Crps] {
        let path = sibling(&a.out, &format!("_{}.txt", metric.name()));
        std::fs::write(&path, boxplot_description(&rows, metric))
            .with_context(|| format!("writing {}", path.display()))?;
    }
    let failed = rows.iter().filter(|r| r.error.is_some()).count();
    if failed > 0 {
        log::warn!("{failed} of {} fits failed; see the error column", rows.len());
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exit_codes_follow_error_kind() {
        assert_eq!(exit_code(&usage("bad flag")), 1);
        let data = anyhow::Error::from(wrapgp::Error::InvalidInput("x".into()));
        assert_eq!(exit_code(&data), 2);
        let numerical = anyhow::Error::from(wrapgp::Error::CholeskyFailure { dim: 3, jitter: 1e-4 }).context("fitting");
        assert_eq!(exit_code(&numerical), 3);
        assert_eq!(exit_code(&anyhow::anyhow!("io")), 2);
    }
}
