//! Monotonic wrapping numbers as a step function of the input.
//!
//! A partition holds ordered wrapping locations `w_1 < ... < w_m` inside the
//! observed input range and an offset `k_min`; the wrapping number of an input
//! is `k_min` plus the number of locations at or below it. The sampler moves
//! locations with shift, grow and shrink proposals, which all keep the
//! induced wrapping numbers non-decreasing.

use std::f64::consts::{PI, TAU};

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct WrapPartition {
    locations: Vec<f64>,
    k_min: i64,
    x_min: f64,
    x_max: f64,
}

impl WrapPartition {
    pub fn new(locations: Vec<f64>, k_min: i64, x_min: f64, x_max: f64) -> Result<Self> {
        if !(x_min <= x_max) {
            return Err(Error::invalid(format!("partition domain [{x_min}, {x_max}] is empty")));
        }
        if locations.windows(2).any(|w| !(w[0] < w[1])) {
            return Err(Error::invalid("wrapping locations must be strictly increasing"));
        }
        if let Some(w) = locations.iter().find(|&&w| !(w > x_min && w < x_max)) {
            return Err(Error::invalid(format!(
                "wrapping location {w} is outside ({x_min}, {x_max})"
            )));
        }
        Ok(Self {
            locations,
            k_min,
            x_min,
            x_max,
        })
    }

    pub fn empty(k_min: i64, x_min: f64, x_max: f64) -> Result<Self> {
        Self::new(Vec::new(), k_min, x_min, x_max)
    }

    pub fn locations(&self) -> &[f64] {
        &self.locations
    }

    pub fn len(&self) -> usize {
        self.locations.len()
    }

    pub fn is_empty(&self) -> bool {
        self.locations.is_empty()
    }

    pub fn k_min(&self) -> i64 {
        self.k_min
    }

    pub fn bounds(&self) -> (f64, f64) {
        (self.x_min, self.x_max)
    }

    pub fn width(&self) -> f64 {
        self.x_max - self.x_min
    }

    pub fn with_k_min(&self, k_min: i64) -> Self {
        Self { k_min, ..self.clone() }
    }

    /// `k_min + #{j : w_j <= x}`.
    pub fn eval_k(&self, x: f64) -> i64 {
        self.k_min + self.locations.partition_point(|&w| w <= x) as i64
    }

    /// Wrapping numbers for every input.
    pub fn induce(&self, x: &[f64]) -> Vec<i64> {
        x.iter().map(|&xi| self.eval_k(xi)).collect()
    }

    /// Initial partition from a greedy scan of sorted data: a drop of more than
    /// pi between neighbours places a wrap at their midpoint, a rise of more than
    /// pi cancels the most recent one.
    pub fn from_jumps(x: &[f64], y: &[f64], k_min: i64) -> Result<Self> {
        if x.is_empty() || x.len() != y.len() {
            return Err(Error::invalid("jump scan needs aligned, nonempty inputs"));
        }
        let mut locations: Vec<f64> = Vec::new();
        for i in 1..x.len() {
            let jump = y[i] - y[i - 1];
            if jump < -PI && x[i] > x[i - 1] {
                let mid = 0.5 * (x[i - 1] + x[i]);
                if locations.last().is_none_or(|&last| mid > last) {
                    locations.push(mid);
                }
            } else if jump > PI {
                locations.pop();
            }
        }
        Self::new(locations, k_min, x[0], x[x.len() - 1])
    }

    fn insert(&self, w: f64) -> Self {
        let mut locations = self.locations.clone();
        let at = locations.partition_point(|&v| v < w);
        locations.insert(at, w);
        Self {
            locations,
            ..self.clone()
        }
    }

    fn remove(&self, index: usize) -> Self {
        let mut locations = self.locations.clone();
        locations.remove(index);
        Self {
            locations,
            ..self.clone()
        }
    }

    fn replace(&self, index: usize, w: f64) -> Self {
        let mut locations = self.locations.clone();
        locations[index] = w;
        Self {
            locations,
            ..self.clone()
        }
    }
}

/// Log of the proposal correction for growing from `m` locations.
pub fn grow_log_ratio(m: usize, width: f64) -> f64 {
    (width / (m as f64 + 1.0)).ln()
}

/// Log of the proposal correction for shrinking from `m` locations.
pub fn shrink_log_ratio(m: usize, width: f64) -> f64 {
    (m as f64 / width).ln()
}

/// Proposal and acceptance counts for each move type.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct MoveCounts {
    pub shift_proposed: u64,
    pub shift_accepted: u64,
    pub grow_proposed: u64,
    pub grow_accepted: u64,
    pub shrink_proposed: u64,
    pub shrink_accepted: u64,
}

impl MoveCounts {
    pub fn add(&mut self, other: &MoveCounts) {
        self.shift_proposed += other.shift_proposed;
        self.shift_accepted += other.shift_accepted;
        self.grow_proposed += other.grow_proposed;
        self.grow_accepted += other.grow_accepted;
        self.shrink_proposed += other.shrink_proposed;
        self.shrink_accepted += other.shrink_accepted;
    }
}

#[derive(Clone, Debug)]
pub struct PartitionUpdate {
    pub partition: WrapPartition,
    pub k: Vec<i64>,
    pub loglik: f64,
    pub moves: MoveCounts,
}

/// Metropolis-Hastings accept step on a log acceptance ratio. NaN rejects.
pub fn mh_accept<R: Rng + ?Sized>(log_ratio: f64, rng: &mut R) -> bool {
    if log_ratio >= 0.0 {
        return true;
    }
    let u: f64 = rng.random();
    u.ln() < log_ratio
}

fn uniform_open<R: Rng + ?Sized>(lo: f64, hi: f64, rng: &mut R) -> f64 {
    loop {
        let w = lo + (hi - lo) * rng.random::<f64>();
        if w > lo && w < hi {
            return w;
        }
    }
}

/// One sweep of shift proposals (ascending index), then one grow and one
/// shrink proposal. `loglik` maps induced wrapping numbers to the
/// observation log-likelihood; `current_loglik` is its value at `part`.
pub fn mh_update<R, F>(
    part: &WrapPartition,
    x: &[f64],
    current_loglik: f64,
    mut loglik: F,
    rng: &mut R,
) -> PartitionUpdate
where
    R: Rng + ?Sized,
    F: FnMut(&[i64]) -> f64,
{
    let mut moves = MoveCounts::default();
    let mut state = part.clone();
    let mut k = state.induce(x);
    let mut ll = current_loglik;
    let width = state.width();
    if width <= 0.0 {
        return PartitionUpdate {
            partition: state,
            k,
            loglik: ll,
            moves,
        };
    }

    for i in 0..state.len() {
        let lo = if i == 0 { state.x_min } else { state.locations[i - 1] };
        let hi = if i + 1 == state.len() {
            state.x_max
        } else {
            state.locations[i + 1]
        };
        moves.shift_proposed += 1;
        let proposal = state.replace(i, uniform_open(lo, hi, rng));
        let k_star = proposal.induce(x);
        let ll_star = loglik(&k_star);
        if mh_accept(ll_star - ll, rng) {
            moves.shift_accepted += 1;
            state = proposal;
            k = k_star;
            ll = ll_star;
        }
    }

    let m = state.len();
    let w = loop {
        let w = uniform_open(state.x_min, state.x_max, rng);
        if !state.locations.contains(&w) {
            break w;
        }
    };
    moves.grow_proposed += 1;
    let proposal = state.insert(w);
    let k_star = proposal.induce(x);
    let ll_star = loglik(&k_star);
    if mh_accept(ll_star - ll + grow_log_ratio(m, width), rng) {
        moves.grow_accepted += 1;
        state = proposal;
        k = k_star;
        ll = ll_star;
    }

    let m = state.len();
    if m > 0 {
        moves.shrink_proposed += 1;
        let index = rng.random_range(0..m);
        let proposal = state.remove(index);
        let k_star = proposal.induce(x);
        let ll_star = loglik(&k_star);
        if mh_accept(ll_star - ll + shrink_log_ratio(m, width), rng) {
            moves.shrink_accepted += 1;
            state = proposal;
            k = k_star;
            ll = ll_star;
        }
    }

    PartitionUpdate {
        partition: state,
        k,
        loglik: ll,
        moves,
    }
}

/// Monte Carlo mean and (population) variance of the wrapping number at each
/// new input across posterior partitions.
pub fn predict_k(xnew: &[f64], parts: &[WrapPartition]) -> Result<(Vec<f64>, Vec<f64>)> {
    if parts.is_empty() {
        return Err(Error::invalid("predict_k needs at least one partition sample"));
    }
    let t = parts.len() as f64;
    Ok(xnew
        .iter()
        .map(|&x| {
            let ks: Vec<f64> = parts.iter().map(|p| p.eval_k(x) as f64).collect();
            let mean = ks.iter().sum::<f64>() / t;
            let var = ks.iter().map(|k| (k - mean).powi(2)).sum::<f64>() / t;
            (mean, var)
        })
        .unzip())
}

/// Re-anchors `k_min` at the wrap count of the smallest latent value,
/// `floor(min z / 2pi)`.
pub fn reset_kmin(part: &WrapPartition, z: &[f64]) -> WrapPartition {
    let zmin = z.iter().copied().fold(f64::INFINITY, f64::min);
    if !zmin.is_finite() {
        return part.clone();
    }
    part.with_k_min((zmin / TAU).floor() as i64)
}
