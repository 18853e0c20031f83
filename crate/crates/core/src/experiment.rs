//! Repeated train/test experiments on the logarithmic test functions.
//!
//! Every rep draws one hold-out set that all sizes and methods share, and one
//! training set per size that all methods share. Random streams are derived
//! from the master seed and the (size, rep, method) coordinates, so results do
//! not depend on how the work is scheduled across threads.

use std::fmt::{self, Write as _};
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::baselines::{fit_coupled_with_rng, fit_ordinary_with_rng, BaselineConfig};
use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::fit::{fit_with_rng, FitConfig, Method, Trace};
use crate::metrics::{crps, rmse_circular};
use crate::predict::predict;
use crate::synthetic::{gen_log, gen_log_gapped, log_design, LOG_NOISE_SD};

/// Size of each hold-out set.
pub const TEST_SIZE: usize = 500;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum BenchFunction {
    Log,
    LogGap,
}

impl BenchFunction {
    pub fn as_str(&self) -> &'static str {
        match self {
            Self::Log => "log",
            Self::LogGap => "log-gap",
        }
    }

    /// Training set of size `n`. The gapped variant leaves the two censored
    /// bands empty.
    pub fn training<R: Rng + ?Sized>(&self, n: usize, rng: &mut R) -> Result<Dataset> {
        match self {
            Self::Log => gen_log(&log_design(n, rng), LOG_NOISE_SD, rng).map(|(d, _)| d),
            Self::LogGap => gen_log_gapped(n, LOG_NOISE_SD, rng).map(|(d, _)| d),
        }
    }

    /// Hold-out set on an uncensored design, with the same observation noise.
    pub fn testing<R: Rng + ?Sized>(&self, rng: &mut R) -> Result<Dataset> {
        gen_log(&log_design(TEST_SIZE, rng), LOG_NOISE_SD, rng).map(|(d, _)| d)
    }
}

impl fmt::Display for BenchFunction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for BenchFunction {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "log" => Ok(Self::Log),
            "log-gap" => Ok(Self::LogGap),
            other => Err(Error::invalid(format!(
                "unknown benchmark function '{other}' (expected log or log-gap)"
            ))),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BenchConfig {
    pub function: BenchFunction,
    pub sizes: Vec<usize>,
    pub reps: usize,
    pub methods: Vec<Method>,
    pub seed: u64,
    /// Chain settings shared by every fit; its own seed is ignored.
    pub fit: FitConfig,
}

impl BenchConfig {
    pub fn validate(&self) -> Result<()> {
        if self.sizes.is_empty() || self.methods.is_empty() || self.reps == 0 {
            return Err(Error::invalid(
                "benchmark needs at least one size, one method and one rep",
            ));
        }
        self.fit.validate()
    }
}

/// One (method, size, rep) cell. Failed fits keep their error message and
/// leave the scores empty.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BenchRow {
    pub method: Method,
    pub size: usize,
    pub rep: usize,
    pub rmse_circular: Option<f64>,
    pub crps: Option<f64>,
    pub error: Option<String>,
}

/// Stream tag of training sets.
pub const DATA_TAG: u64 = 1;
/// Stream tag of hold-out sets.
pub const TEST_TAG: u64 = 2;
/// Stream tag of model fits.
pub const FIT_TAG: u64 = 3;

/// Stream id for a tagged coordinate; each field gets its own bit range.
fn stream_id(tag: u64, size: usize, rep: usize, method: usize) -> u64 {
    (tag << 60) | ((size as u64 & 0xff_ffff) << 32) | ((rep as u64 & 0xff_ffff) << 8) | (method as u64 & 0xff)
}

/// Random stream for one experiment coordinate.
pub fn substream(seed: u64, tag: u64, size: usize, rep: usize, method: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream_id(tag, size, rep, method));
    rng
}

/// Fits `method` with a caller-supplied random stream.
pub fn fit_method<R: Rng + ?Sized>(method: Method, data: &Dataset, config: &FitConfig, rng: &mut R) -> Result<Trace> {
    match method {
        Method::Wgp => fit_with_rng(data, config, rng),
        Method::Coupled => fit_coupled_with_rng(data, &BaselineConfig::from_fit(config.clone()), rng),
        Method::Ordinary => fit_ordinary_with_rng(data, &BaselineConfig::from_fit(config.clone()), rng),
    }
}

/// Circular RMSE (no square root) and CRPS of `trace` on `test`.
pub fn score_trace(trace: &Trace, test: &Dataset, seed: u64) -> Result<(f64, f64)> {
    let pred = predict(trace, test.x(), seed)?;
    Ok((
        rmse_circular(test.y(), &pred.mean_wrapped)?,
        crps(test.y(), &pred.samples)?,
    ))
}

fn run_cell(config: &BenchConfig, size: usize, rep: usize, m: usize, test: &Dataset) -> BenchRow {
    let method = config.methods[m];
    let outcome = (|| {
        let train = config
            .function
            .training(size, &mut substream(config.seed, DATA_TAG, size, rep, 0))?;
        let mut rng = substream(config.seed, FIT_TAG, size, rep, m);
        let trace = fit_method(method, &train, &config.fit, &mut rng)?;
        score_trace(&trace, test, rng.random())
    })();
    let (scores, error) = match outcome {
        Ok((r, c)) => (Some((r, c)), None),
        Err(e) => {
            log::warn!("{method} size {size} rep {rep} failed: {e}");
            (None, Some(e.to_string()))
        }
    };
    BenchRow {
        method,
        size,
        rep,
        rmse_circular: scores.map(|s| s.0),
        crps: scores.map(|s| s.1),
        error,
    }
}

/// Runs every (size, rep, method) cell in parallel. Rows come back ordered by
/// size, then rep, then method. A failed cell is reported in its row and does
/// not stop the run.
pub fn run_benchmark(config: &BenchConfig) -> Result<Vec<BenchRow>> {
    config.validate()?;
    let tests: Vec<Dataset> = (0..config.reps)
        .map(|rep| {
            config
                .function
                .testing(&mut substream(config.seed, TEST_TAG, 0, rep, 0))
        })
        .collect::<Result<_>>()?;
    let cells: Vec<(usize, usize, usize)> = config
        .sizes
        .iter()
        .flat_map(|&size| (0..config.reps).flat_map(move |rep| (0..config.methods.len()).map(move |m| (size, rep, m))))
        .collect();
    Ok(cells
        .par_iter()
        .map(|&(size, rep, m)| run_cell(config, size, rep, m, &tests[rep]))
        .collect())
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Metric {
    Rmse,
    Crps,
}

impl Metric {
    pub fn name(&self) -> &'static str {
        match self {
            Self::Rmse => "rmse_circular",
            Self::Crps => "crps",
        }
    }

    fn of(&self, row: &BenchRow) -> Option<f64> {
        match self {
            Self::Rmse => row.rmse_circular,
            Self::Crps => row.crps,
        }
    }
}

fn quantile(sorted: &[f64], p: f64) -> f64 {
    crate::predict::quantile_sorted(sorted, p)
}

/// Sorted successful values of `metric` for one (method, size) group.
pub fn group_values(rows: &[BenchRow], metric: Metric, method: Method, size: usize) -> Vec<f64> {
    let mut v: Vec<f64> = rows
        .iter()
        .filter(|r| r.method == method && r.size == size)
        .filter_map(|r| metric.of(r))
        .collect();
    v.sort_by(f64::total_cmp);
    v
}

/// Median of `metric` over the successful reps of one group.
pub fn group_median(rows: &[BenchRow], metric: Metric, method: Method, size: usize) -> Option<f64> {
    let v = group_values(rows, metric, method, size);
    (!v.is_empty()).then(|| quantile(&v, 0.5))
}

/// Plain-text box-plot description: one line per (size, method) with the
/// five-number summary, ready to be drawn by any plotting tool.
pub fn boxplot_description(rows: &[BenchRow], metric: Metric) -> String {
    let mut sizes: Vec<usize> = rows.iter().map(|r| r.size).collect();
    sizes.sort_unstable();
    sizes.dedup();
    let mut methods: Vec<Method> = Vec::new();
    for r in rows {
        if !methods.contains(&r.method) {
            methods.push(r.method);
        }
    }
    let mut out = String::new();
    let _ = writeln!(out, "# box plot of {} by training size and method", metric.name());
    let _ = writeln!(
        out,
        "# x axis: training size; y axis: {}; one box per method",
        metric.name()
    );
    let _ = writeln!(out, "size\tmethod\tn\tfailed\tmin\tq1\tmedian\tq3\tmax");
    for &size in &sizes {
        for &method in &methods {
            let v = group_values(rows, metric, method, size);
            let failed = rows
                .iter()
                .filter(|r| r.method == method && r.size == size && r.error.is_some())
                .count();
            if v.is_empty() {
                let _ = writeln!(out, "{size}\t{method}\t0\t{failed}\tNA\tNA\tNA\tNA\tNA");
                continue;
            }
            let _ = writeln!(
                out,
                "{size}\t{method}\t{}\t{failed}\t{:.6}\t{:.6}\t{:.6}\t{:.6}\t{:.6}",
                v.len(),
                v[0],
                quantile(&v, 0.25),
                quantile(&v, 0.5),
                quantile(&v, 0.75),
                v[v.len() - 1]
            );
        }
    }
    out
}

/// Wrap locations of one kept sample in unit-scaled input. The primary model
/// stores them; for the baselines each increase of the wrapping number between
/// neighbouring inputs contributes the midpoint of that pair.
pub fn sample_wrap_locations(trace: &Trace, sample: usize) -> Vec<f64> {
    let rec = &trace.samples[sample];
    if trace.meta.method == Method::Wgp {
        return rec.locations.clone();
    }
    let x = trace.data.scaled_x();
    let mut out = Vec::new();
    for i in 1..x.len() {
        for _ in 0..(rec.k[i] - rec.k[i - 1]).max(0) {
            out.push(0.5 * (x[i - 1] + x[i]));
        }
    }
    out
}

/// Share of kept samples with at least one wrap location inside `(lo, hi)`.
pub fn wrap_mass_in(trace: &Trace, lo: f64, hi: f64) -> f64 {
    if trace.is_empty() {
        return 0.0;
    }
    let hits = (0..trace.len())
        .filter(|&t| sample_wrap_locations(trace, t).iter().any(|&w| w > lo && w < hi))
        .count();
    hits as f64 / trace.len() as f64
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small_config(methods: Vec<Method>, reps: usize) -> BenchConfig {
        BenchConfig {
            function: BenchFunction::Log,
            sizes: vec![30],
            reps,
            methods,
            seed: 5,
            fit: FitConfig {
                iterations: 60,
                burnin: 30,
                thin: 5,
                reset_iteration: None,
                ..FitConfig::default()
            },
        }
    }

    #[test]
    fn stream_ids_are_distinct() {
        let mut seen = std::collections::HashSet::new();
        for tag in 1..=3 {
            for size in [50, 100, 200] {
                for rep in 0..10 {
                    for m in 0..3 {
                        assert!(seen.insert(stream_id(tag, size, rep, m)));
                    }
                }
            }
        }
    }

    #[test]
    fn one_rep_one_method_gives_one_row() {
        let rows = run_benchmark(&small_config(vec![Method::Ordinary], 1)).unwrap();
        assert_eq!(rows.len(), 1);
        assert!(rows[0].error.is_none());
        assert!(rows[0].rmse_circular.unwrap() >= 0.0);
    }

    #[test]
    fn rows_are_reproducible() {
        let c = small_config(vec![Method::Wgp, Method::Ordinary], 2);
        assert_eq!(run_benchmark(&c).unwrap(), run_benchmark(&c).unwrap());
    }

    #[test]
    fn failures_are_recorded_not_raised() {
        let mut c = small_config(vec![Method::Ordinary], 1);
        c.sizes = vec![5];
        let rows = run_benchmark(&c).unwrap();
        assert!(rows[0].error.is_some());
        assert!(rows[0].rmse_circular.is_none());
        assert!(boxplot_description(&rows, Metric::Rmse).contains("NA"));
    }

    #[test]
    fn function_names_round_trip() {
        for f in [BenchFunction::Log, BenchFunction::LogGap] {
            assert_eq!(f.as_str().parse::<BenchFunction>().unwrap(), f);
        }
        assert!("sine".parse::<BenchFunction>().is_err());
    }
}
