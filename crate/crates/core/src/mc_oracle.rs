//! Event-driven Monte Carlo of the peripheral + central queue.
//!
//! This is the ground truth the analytic solver is checked against. It
//! shares nothing with the solver except the input distributions: every
//! batch, packet and service time is drawn and stepped explicitly.

use std::io::{self, Write};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use thiserror::Error;

use crate::par::{self, Exec};
use crate::pmf::Pmf;
use crate::queue_model::{PathModel, StationaryResult, Weighting};

const STREAM_INTERARRIVAL: u64 = 0;
const STREAM_BATCH: u64 = 1;
const STREAM_SERVICE: u64 = 2;
const STREAM_PERIPHERAL: u64 = 3;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum OracleError {
    #[error("distribution has zero mass")]
    ZeroMass,
    #[error("no packets left after warmup")]
    NoSamples,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimConfig {
    pub model: PathModel,
    pub packet_budget: u64,
    pub seed: u64,
    /// Leading fraction of packets discarded as warmup.
    pub warmup_fraction: f64,
    /// Number of consecutive segments for batch-means standard errors.
    pub segments: usize,
}

impl SimConfig {
    pub fn new(model: PathModel, packet_budget: u64, seed: u64) -> Self {
        SimConfig {
            model,
            packet_budget: packet_budget.max(1),
            seed,
            warmup_fraction: 0.1,
            segments: 20,
        }
    }
}

/// Counts per integer time unit.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct Histogram {
    counts: Vec<u64>,
}

impl Histogram {
    pub fn add(&mut self, k: usize) {
        if self.counts.len() <= k {
            self.counts.resize(k + 1, 0);
        }
        self.counts[k] += 1;
    }

    pub fn counts(&self) -> &[u64] {
        &self.counts
    }

    pub fn count_at(&self, k: usize) -> u64 {
        self.counts.get(k).copied().unwrap_or(0)
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().sum()
    }

    /// Relative frequencies; empty when the histogram is empty.
    pub fn normalized(&self) -> Vec<f64> {
        let total = self.total();
        if total == 0 {
            return Vec::new();
        }
        self.counts
            .iter()
            .map(|&c| c as f64 / total as f64)
            .collect()
    }

    /// Two-column `time_unit,count` text, one row per time unit.
    pub fn write_text<W: Write>(&self, mut out: W) -> io::Result<()> {
        writeln!(out, "time_unit,count")?;
        for (k, c) in self.counts.iter().enumerate() {
            writeln!(out, "{k},{c}")?;
        }
        Ok(())
    }
}

/// Per-segment counters used for batch-means error estimates.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct SegmentCounts {
    /// `batch_sizes[i]`: batches whose realized size was `i`.
    pub batch_sizes: Vec<u64>,
    /// `reached[j - 1]`: batches with at least `j` packets.
    pub reached: Vec<u64>,
    /// `accepted[j - 1]`: accepted packets at position `j`.
    pub accepted: Vec<u64>,
}

impl SegmentCounts {
    fn record_batch(&mut self, size: usize) {
        grow(&mut self.batch_sizes, size + 1);
        self.batch_sizes[size] += 1;
        grow(&mut self.reached, size);
        grow(&mut self.accepted, size);
        for r in &mut self.reached[..size] {
            *r += 1;
        }
    }

    fn batches(&self) -> u64 {
        self.batch_sizes.iter().sum()
    }

    fn acceptance_mass(&self, weighting: Weighting) -> Option<f64> {
        let weights = position_weights(&self.batch_sizes, weighting)?;
        Some(
            weights
                .iter()
                .enumerate()
                .filter(|(j, _)| self.reached.get(*j).copied().unwrap_or(0) > 0)
                .map(|(j, w)| w * self.accepted[j] as f64 / self.reached[j] as f64)
                .sum(),
        )
    }
}

fn grow(v: &mut Vec<u64>, len: usize) {
    if v.len() < len {
        v.resize(len, 0);
    }
}

fn position_weights(batch_sizes: &[u64], weighting: Weighting) -> Option<Vec<f64>> {
    let n: u64 = batch_sizes.iter().sum();
    if n == 0 {
        return None;
    }
    let freq = batch_sizes.iter().map(|&c| c as f64 / n as f64).collect();
    let law = Pmf::new(0, freq).ok()?;
    Some(weighting.position_weights(&law))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SimReport {
    pub path_id: String,
    pub seed: u64,
    pub packet_budget: u64,
    /// Total delay of every accepted packet after warmup.
    pub empirical_delay: Histogram,
    pub accepted: u64,
    pub rejected: u64,
    pub warmup_discarded: u64,
    pub counts: SegmentCounts,
    /// `position_delay[j - 1]`: delays of accepted packets at position `j`.
    pub position_delay: Vec<Histogram>,
    pub segments: Vec<SegmentCounts>,
}

impl SimReport {
    /// Fraction of post-warmup packets that were rejected.
    pub fn rejection_fraction(&self) -> f64 {
        let n = self.accepted + self.rejected;
        if n == 0 {
            0.0
        } else {
            self.rejected as f64 / n as f64
        }
    }

    /// Estimate of the (defective) delay law under the given weighting:
    /// `sum_j w_j c_j(k) / r_j` with empirical batch-size weights.
    pub fn empirical_total(&self, weighting: Weighting) -> Result<Vec<f64>, OracleError> {
        let weights =
            position_weights(&self.counts.batch_sizes, weighting).ok_or(OracleError::NoSamples)?;
        let len = self
            .position_delay
            .iter()
            .map(|h| h.counts().len())
            .max()
            .unwrap_or(0);
        let mut out = vec![0.0; len];
        for (j, hist) in self.position_delay.iter().enumerate() {
            let reached = self.counts.reached.get(j).copied().unwrap_or(0);
            let w = weights.get(j).copied().unwrap_or(0.0);
            if reached == 0 || w == 0.0 {
                continue;
            }
            for (k, &c) in hist.counts().iter().enumerate() {
                out[k] += w * c as f64 / reached as f64;
            }
        }
        Ok(out)
    }

    /// Empirical loss probability under the given weighting.
    pub fn empirical_loss(&self, weighting: Weighting) -> Result<f64, OracleError> {
        let mass = self
            .counts
            .acceptance_mass(weighting)
            .ok_or(OracleError::NoSamples)?;
        Ok((1.0 - mass).max(0.0))
    }

    /// Batch-means standard error of [`Self::empirical_loss`], floored at
    /// one over the number of batches (the estimator's resolution).
    pub fn loss_standard_error(&self, weighting: Weighting) -> Result<f64, OracleError> {
        let estimates: Vec<f64> = self
            .segments
            .iter()
            .filter_map(|s| s.acceptance_mass(weighting))
            .map(|m| 1.0 - m)
            .collect();
        let batches = self.counts.batches();
        if batches == 0 {
            return Err(OracleError::NoSamples);
        }
        let floor = 1.0 / batches as f64;
        if estimates.len() < 2 {
            return Ok(floor);
        }
        let n = estimates.len() as f64;
        let mean = estimates.iter().sum::<f64>() / n;
        let var = estimates.iter().map(|e| (e - mean).powi(2)).sum::<f64>() / (n - 1.0);
        Ok((var / n).sqrt().max(floor))
    }
}

/// Inverse-CDF sampler over a PMF's discrete support.
#[derive(Debug, Clone)]
pub struct Sampler {
    offset: usize,
    cdf: Vec<f64>,
}

impl Sampler {
    pub fn new(p: &Pmf) -> Self {
        let mut acc = 0.0;
        let cdf = p
            .masses()
            .iter()
            .map(|m| {
                acc += m;
                acc
            })
            .collect();
        Sampler {
            offset: p.offset(),
            cdf,
        }
    }

    pub fn sample<R: Rng>(&self, rng: &mut R) -> usize {
        let total = *self.cdf.last().unwrap_or(&0.0);
        let u = rng.random::<f64>() * total;
        let idx = self.cdf.partition_point(|&c| c <= u);
        self.offset + idx.min(self.cdf.len().saturating_sub(1))
    }
}

fn stream(seed: u64, id: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(id);
    rng
}

/// Runs one seeded simulation of exactly `packet_budget` packets.
pub fn simulate(config: &SimConfig) -> SimReport {
    let model = &config.model;
    let limit = model.loss_bound() - 1;
    let inter = Sampler::new(model.interarrival());
    let sizes = Sampler::new(model.batch_size());
    let service = Sampler::new(model.service());
    let peripheral: Vec<Sampler> = match model.peripheral_wait() {
        crate::queue_model::PeripheralWait::PassThrough => Vec::new(),
        pw => (1..=model.max_batch())
            .map(|i| Sampler::new(pw.for_position(i).expect("explicit family")))
            .collect(),
    };

    let mut rng_a = stream(config.seed, STREAM_INTERARRIVAL);
    let mut rng_x = stream(config.seed, STREAM_BATCH);
    let mut rng_b = stream(config.seed, STREAM_SERVICE);
    let mut rng_w = stream(config.seed, STREAM_PERIPHERAL);

    let budget = config.packet_budget;
    let warmup_target = (config.warmup_fraction * budget as f64).ceil() as u64;
    let segments = config.segments.max(1);

    let mut report = SimReport {
        path_id: model.path_id().to_string(),
        seed: config.seed,
        packet_budget: budget,
        empirical_delay: Histogram::default(),
        accepted: 0,
        rejected: 0,
        warmup_discarded: 0,
        counts: SegmentCounts::default(),
        position_delay: Vec::new(),
        segments: vec![SegmentCounts::default(); segments],
    };

    let mut processed = 0u64;
    let mut unfinished = 0usize;
    let mut measured_start = None;
    while processed < budget {
        let size = (sizes.sample(&mut rng_x) as u64).min(budget - processed) as usize;
        let warm = processed < warmup_target;
        if warm {
            report.warmup_discarded += size as u64;
        } else {
            let start = *measured_start.get_or_insert(processed);
            let span = budget - start;
            let seg = (((processed - start) * segments as u64) / span) as usize;
            report.counts.record_batch(size);
            report.segments[seg].record_batch(size);
            if report.position_delay.len() < size {
                report.position_delay.resize(size, Histogram::default());
            }
        }

        let mut wait = unfinished;
        for j in 1..=size {
            if wait <= limit {
                let s = service.sample(&mut rng_b);
                let w = peripheral.get(j - 1).map_or(0, |p| p.sample(&mut rng_w));
                let delay = w + wait + s;
                wait += s;
                if !warm {
                    report.accepted += 1;
                    report.empirical_delay.add(delay);
                    report.position_delay[j - 1].add(delay);
                    report.counts.accepted[j - 1] += 1;
                    let start = measured_start.expect("set above");
                    let seg = (((processed - start) * segments as u64) / (budget - start)) as usize;
                    report.segments[seg].accepted[j - 1] += 1;
                }
            } else if !warm {
                report.rejected += 1;
            }
        }
        processed += size as u64;
        unfinished = wait.saturating_sub(inter.sample(&mut rng_a));
    }
    report
}

/// Independent simulations, in parallel when `exec` allows.
pub fn simulate_many(configs: &[SimConfig], exec: Exec) -> Vec<SimReport> {
    par::map(exec, configs, simulate)
}

/// `1/2 sum_k |a[k] - b[k] / mass(b)|`, with `a` renormalized as well.
pub fn tv_distance(a: &[f64], b: &Pmf) -> Result<f64, OracleError> {
    let a_mass: f64 = a.iter().sum();
    let b_mass = b.total_mass();
    if a_mass <= 0.0 || b_mass <= 0.0 {
        return Err(OracleError::ZeroMass);
    }
    let end = a.len().max(b.support_end());
    let sum: f64 = (0..end)
        .map(|k| {
            let x = a.get(k).copied().unwrap_or(0.0) / a_mass;
            (x - b.mass_at(k) / b_mass).abs()
        })
        .sum();
    Ok((0.5 * sum).min(1.0))
}

/// Analytic-versus-simulated summary for one path.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OracleComparison {
    pub path_id: String,
    pub load: f64,
    pub loss_bound: usize,
    pub packets: u64,
    pub tv_distance: f64,
    pub analytic_loss: f64,
    pub empirical_loss: f64,
    pub loss_standard_error: f64,
    pub analytic_mean: Option<f64>,
    pub empirical_mean: Option<f64>,
    pub converged: bool,
}

impl OracleComparison {
    /// Loss discrepancy measured in standard errors.
    pub fn loss_z(&self) -> f64 {
        (self.analytic_loss - self.empirical_loss).abs() / self.loss_standard_error
    }
}

pub fn compare(
    model: &PathModel,
    result: &StationaryResult,
    report: &SimReport,
    weighting: Weighting,
) -> Result<OracleComparison, OracleError> {
    let empirical = report.empirical_total(weighting)?;
    let tv = tv_distance(&empirical, &result.total)?;
    let e_mass: f64 = empirical.iter().sum();
    let empirical_mean = (e_mass > 0.0).then(|| {
        empirical
            .iter()
            .enumerate()
            .map(|(k, p)| k as f64 * p)
            .sum::<f64>()
            / e_mass
    });
    Ok(OracleComparison {
        path_id: model.path_id().to_string(),
        load: model.load(),
        loss_bound: model.loss_bound(),
        packets: report.accepted + report.rejected,
        tv_distance: tv,
        analytic_loss: result.loss_probability,
        empirical_loss: report.empirical_loss(weighting)?,
        loss_standard_error: report.loss_standard_error(weighting)?,
        analytic_mean: result.total.mean().ok(),
        empirical_mean,
        converged: result.converged,
    })
}
