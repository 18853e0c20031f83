//! Synthetic data: Latin hypercube designs, the logarithmic test function and
//! its gapped variant, draws from the wrapped GP itself, and phase-frequency
//! data mimicking an RFID reader sweeping its channels.

use std::f64::consts::{PI, TAU};

use rand::seq::SliceRandom;
use rand::Rng;
use rand_distr::{Distribution, Normal, StudentT};
use serde::{Deserialize, Serialize};

use crate::data::{wrap_angle, Dataset, Rescale, TestGroup};
use crate::error::{Error, Result};
use crate::gp::{build_cov, mvn_draw, KernelParams, DEFAULT_JITTER};

/// Speed of light in m/s.
pub const SPEED_OF_LIGHT: f64 = 299_792_458.0;

/// Output scale of the logarithmic test function.
pub const LOG_SCALE: f64 = 15.0;
/// Upper end of the logarithmic function's input domain.
pub const LOG_DOMAIN: f64 = 2.5;
/// Default noise SD added before wrapping in the logarithmic examples.
pub const LOG_NOISE_SD: f64 = 0.5;
/// Sampled strata of the gapped design, in unit-scaled input.
pub const GAP_STRATA: [(f64, f64); 3] = [(0.0, 0.15), (0.25, 0.8), (0.9, 1.0)];

/// Ground truth behind a synthetic dataset, aligned with its sorted inputs.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Truth {
    /// Noise-free latent values.
    pub z: Vec<f64>,
    /// Wrapping numbers of the noisy latent values, `floor((z + eps) / 2pi)`.
    pub k: Vec<i64>,
    pub noise: Vec<f64>,
}

/// One uniform draw in each of `n` equal-width strata of `[lo, hi)`, shuffled.
pub fn gen_lhs<R: Rng + ?Sized>(n: usize, bounds: (f64, f64), rng: &mut R) -> Vec<f64> {
    let (lo, hi) = bounds;
    let w = (hi - lo) / n as f64;
    let mut x: Vec<f64> = (0..n).map(|i| lo + (i as f64 + rng.random::<f64>()) * w).collect();
    x.shuffle(rng);
    x
}

/// Splits `n` in proportion to `widths` by largest remainder; ties go to the
/// lower index.
pub fn allocate_proportional(n: usize, widths: &[f64]) -> Vec<usize> {
    let total: f64 = widths.iter().sum();
    let exact: Vec<f64> = widths.iter().map(|w| n as f64 * w / total).collect();
    let mut sizes: Vec<usize> = exact.iter().map(|e| e.floor() as usize).collect();
    let assigned: usize = sizes.iter().sum();
    let mut order: Vec<usize> = (0..widths.len()).collect();
    order.sort_by(|&a, &b| {
        let ra = exact[a] - exact[a].floor();
        let rb = exact[b] - exact[b].floor();
        // Remainders equal up to rounding count as ties.
        if (ra - rb).abs() < 1e-9 {
            a.cmp(&b)
        } else {
            rb.total_cmp(&ra)
        }
    });
    for &i in order.iter().take(n - assigned) {
        sizes[i] += 1;
    }
    sizes
}

/// `15 log(1 + x)`.
pub fn log_function(x: f64) -> f64 {
    LOG_SCALE * x.ln_1p()
}

fn sorted(mut x: Vec<f64>) -> Vec<f64> {
    x.sort_by(f64::total_cmp);
    x
}

fn wrap_with_truth(x: Vec<f64>, z: Vec<f64>, noise: Vec<f64>, rescale: Rescale) -> Result<(Dataset, Truth)> {
    let y: Vec<f64> = z.iter().zip(&noise).map(|(a, e)| wrap_angle(a + e)).collect();
    let k = z
        .iter()
        .zip(&noise)
        .map(|(a, e)| ((a + e) / TAU).floor() as i64)
        .collect();
    let data = Dataset::with_rescale(x, y, rescale)?;
    Ok((data, Truth { z, k, noise }))
}

/// Logarithmic function at `x` (within `[0, 2.5]`) with Gaussian noise added
/// before wrapping.
pub fn gen_log<R: Rng + ?Sized>(x: &[f64], noise_sd: f64, rng: &mut R) -> Result<(Dataset, Truth)> {
    if let Some(bad) = x.iter().find(|v| !(0.0..=LOG_DOMAIN).contains(*v)) {
        return Err(Error::invalid(format!(
            "logarithmic inputs must lie in [0, {LOG_DOMAIN}], got {bad}"
        )));
    }
    if !(noise_sd >= 0.0) {
        return Err(Error::invalid("noise SD must be non-negative"));
    }
    let x = sorted(x.to_vec());
    let z: Vec<f64> = x.iter().map(|&v| log_function(v)).collect();
    let normal = Normal::new(0.0, noise_sd).map_err(|e| Error::invalid(e.to_string()))?;
    let noise = x.iter().map(|_| normal.sample(rng)).collect();
    wrap_with_truth(x, z, noise, Rescale::new(0.0, LOG_DOMAIN)?)
}

/// Latin hypercube of size `n` over the logarithmic domain.
pub fn log_design<R: Rng + ?Sized>(n: usize, rng: &mut R) -> Vec<f64> {
    gen_lhs(n, (0.0, 1.0), rng)
        .into_iter()
        .map(|u| LOG_DOMAIN * u)
        .collect()
}

/// Design with no inputs in the two gaps between `GAP_STRATA`; each stratum
/// gets its own Latin hypercube sized in proportion to its width.
pub fn gapped_design<R: Rng + ?Sized>(n: usize, rng: &mut R) -> Vec<f64> {
    let widths: Vec<f64> = GAP_STRATA.iter().map(|(a, b)| b - a).collect();
    let sizes = allocate_proportional(n, &widths);
    GAP_STRATA
        .iter()
        .zip(sizes)
        .flat_map(|(&bounds, m)| gen_lhs(m, bounds, rng))
        .map(|u| LOG_DOMAIN * u)
        .collect()
}

pub fn gen_log_gapped<R: Rng + ?Sized>(n: usize, noise_sd: f64, rng: &mut R) -> Result<(Dataset, Truth)> {
    if n < 20 {
        return Err(Error::invalid("the gapped design needs n >= 20"));
    }
    let x = gapped_design(n, rng);
    gen_log(&x, noise_sd, rng)
}

/// Parameters of a linear-mean wrapped GP with t noise.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct WgpParams {
    pub alpha: f64,
    pub beta: f64,
    pub theta: f64,
    pub tau2: f64,
    pub sigma2: f64,
    pub nu: f64,
}

/// Draws latent values at `x` (unit-scaled inputs) from the GP, adds t noise
/// and wraps.
pub fn gen_wgp_instance<R: Rng + ?Sized>(x: &[f64], p: &WgpParams, rng: &mut R) -> Result<(Dataset, Truth)> {
    let x = sorted(x.to_vec());
    let z = draw_gp(&x, p, rng)?;
    let t = StudentT::new(p.nu).map_err(|e| Error::invalid(e.to_string()))?;
    let sd = p.sigma2.sqrt();
    let noise = x.iter().map(|_| sd * t.sample(rng)).collect();
    wrap_with_truth(x, z, noise, Rescale::identity())
}

/// Latent draw `N(alpha + beta x, tau2 R_theta(x))`.
pub fn draw_gp<R: Rng + ?Sized>(x: &[f64], p: &WgpParams, rng: &mut R) -> Result<Vec<f64>> {
    let params = KernelParams::new(p.theta, p.tau2)?;
    let cov = build_cov(x, &params, DEFAULT_JITTER * p.tau2)?;
    let mean: Vec<f64> = x.iter().map(|v| p.alpha + p.beta * v).collect();
    Ok(mvn_draw(&mean, &cov, rng))
}

/// Phase slope in radians per Hz for a tag at distance `d` metres.
pub fn slope_per_hz(distance: f64) -> f64 {
    4.0 * PI * distance / SPEED_OF_LIGHT
}

/// Inverse of `slope_per_hz`: `d = c / (4 pi) * slope`.
pub fn slope_to_distance(slope_per_hz: f64) -> f64 {
    SPEED_OF_LIGHT / (4.0 * PI) * slope_per_hz
}

/// Settings for the RFID-like generator. Frequencies are in MHz.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RfidConfig {
    pub distances: Vec<f64>,
    pub channels: usize,
    pub f_lo: f64,
    pub f_hi: f64,
    /// Fraction of channels removed as one contiguous band per test.
    pub censor_fraction: f64,
    pub wiggle_tau2: f64,
    pub wiggle_theta: f64,
    pub sigma2: f64,
    pub nu: f64,
}

impl Default for RfidConfig {
    fn default() -> Self {
        Self {
            distances: Vec::new(),
            channels: 50,
            f_lo: 902.75,
            f_hi: 927.25,
            censor_fraction: 0.0,
            wiggle_tau2: 0.02,
            wiggle_theta: 0.1,
            sigma2: 0.01,
            nu: 5.0,
        }
    }
}

impl RfidConfig {
    pub fn frequencies(&self) -> Vec<f64> {
        crate::predict::linspace(self.f_lo, self.f_hi, self.channels)
    }

    /// Band span in Hz.
    pub fn span_hz(&self) -> f64 {
        (self.f_hi - self.f_lo) * 1e6
    }

    /// Rescaling of the frequency axis shared by every test.
    pub fn rescale(&self) -> Result<Rescale> {
        Rescale::new(self.f_lo, self.f_hi)
    }

    /// Slope per unit of rescaled frequency for a distance.
    pub fn unit_slope(&self, distance: f64) -> f64 {
        slope_per_hz(distance) * self.span_hz()
    }

    /// Distance implied by a slope per unit of rescaled frequency.
    pub fn unit_slope_to_distance(&self, slope: f64) -> f64 {
        slope_to_distance(slope / self.span_hz())
    }
}

/// One test per distance: phase `alpha_i + beta_i (f - f_lo) + wiggle + noise`
/// wrapped to `[0, 2pi)`, with a random offset `alpha_i ~ U(0, 2pi)`.
pub fn gen_rfid_like<R: Rng + ?Sized>(config: &RfidConfig, rng: &mut R) -> Result<Vec<TestGroup>> {
    if config.channels < 2 || !(config.f_hi > config.f_lo) {
        return Err(Error::invalid("need at least two channels over a non-empty band"));
    }
    if let Some(d) = config.distances.iter().find(|d| !(**d >= 0.0 && d.is_finite())) {
        return Err(Error::invalid(format!("distances must be non-negative, got {d}")));
    }
    if !(0.0..1.0).contains(&config.censor_fraction) {
        return Err(Error::invalid("censor fraction must lie in [0, 1)"));
    }
    let freqs = config.frequencies();
    let rescale = config.rescale()?;
    let unit: Vec<f64> = freqs.iter().map(|&f| rescale.to_unit(f)).collect();
    let t = StudentT::new(config.nu).map_err(|e| Error::invalid(e.to_string()))?;
    let sd = config.sigma2.sqrt();
    let drop = (config.censor_fraction * config.channels as f64).round() as usize;
    let mut groups = Vec::with_capacity(config.distances.len());
    for (i, &d) in config.distances.iter().enumerate() {
        let wiggle = WgpParams {
            alpha: rng.random::<f64>() * TAU,
            beta: config.unit_slope(d),
            theta: config.wiggle_theta,
            tau2: config.wiggle_tau2,
            sigma2: config.sigma2,
            nu: config.nu,
        };
        let z = draw_gp(&unit, &wiggle, rng)?;
        let phase: Vec<f64> = z.iter().map(|v| wrap_angle(v + sd * t.sample(rng))).collect();
        let start = if drop > 0 {
            rng.random_range(0..=config.channels - drop)
        } else {
            0
        };
        let keep = |j: &usize| drop == 0 || *j < start || *j >= start + drop;
        groups.push(TestGroup {
            test_id: format!("test{:02}", i + 1),
            distance: d,
            frequency: (0..freqs.len()).filter(keep).map(|j| freqs[j]).collect(),
            phase: (0..freqs.len()).filter(keep).map(|j| phase[j]).collect(),
        });
    }
    Ok(groups)
}
