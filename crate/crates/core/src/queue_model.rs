//! Stationary total-processing-time analysis of a batch-arrival central
//! queue with a waiting-time cap.
//!
//! Per batch arrival with unfinished work `U`, packet `j` of the batch waits
//! `U + B_1 + ... + B_{j-1}` and is accepted only if that wait is at most
//! `L - 1`. Waits only grow inside a batch, so once a packet is rejected
//! every later packet of the same batch is rejected too. After the batch the
//! workload drains for one inter-arrival time `A`.
//!
//! The delay of the `i`-th packet is
//! `d_i = w_i * trunc_{L-1}(u * b^{*(i-1)}) * b`, where `trunc` keeps only the
//! accepted mass. Rejected packets never reappear, so every `d_i` is
//! defective by exactly its rejection probability.

use std::collections::VecDeque;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::par::{self, Exec};
use crate::pmf::{mixture, Pmf, PmfError, Quantile, DEFAULT_TAIL_TOLERANCE, PROB_TOLERANCE};

const PROPER_MASS_TOLERANCE: f64 = 1e-9;
const STALL_WINDOW: usize = 100;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ModelError {
    #[error("{what} must be a proper distribution, total mass is {mass}")]
    Improper { what: String, mass: f64 },
    #[error("batch size distribution puts mass {0} on zero packets")]
    EmptyBatches(f64),
    #[error("mean inter-arrival time must be positive")]
    ZeroInterarrival,
    #[error("loss bound must be at least one time unit")]
    ZeroLossBound,
    #[error("packet position must be at least 1")]
    ZeroPosition,
    #[error("{0}")]
    InvalidArgument(String),
    #[error(transparent)]
    Pmf(#[from] PmfError),
}

/// Waiting time spent in the peripheral queue before the central queue.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PeripheralWait {
    /// No peripheral delay: `w_i = delta(0)`.
    #[default]
    PassThrough,
    /// `per_position[i - 1]` is the law for the `i`-th packet of a batch;
    /// positions beyond the list use `default`.
    Explicit {
        per_position: Vec<Pmf>,
        default: Pmf,
    },
}

impl PeripheralWait {
    /// `None` means pass-through.
    pub fn for_position(&self, i: usize) -> Option<&Pmf> {
        match self {
            PeripheralWait::PassThrough => None,
            PeripheralWait::Explicit {
                per_position,
                default,
            } => Some(per_position.get(i - 1).unwrap_or(default)),
        }
    }
}

/// How per-position delays are combined into the overall delay law.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Weighting {
    /// `d = sum_i x(i) d_i`: the last packet of a batch is tagged.
    #[default]
    LastPacket,
    /// `d = sum_i x(i) (1/i) sum_{j<=i} d_j`: a uniformly chosen packet of a
    /// batch is tagged.
    BatchAveraged,
    /// Every packet counts once: `d = sum_j P(X >= j) d_j / E[X]`.
    PerPacket,
}

impl Weighting {
    /// Weight of `d_j` (index `j - 1`) for the given batch-size law.
    pub fn position_weights(self, batch_size: &Pmf) -> Vec<f64> {
        let n = batch_size.support_end();
        let x = |i: usize| batch_size.mass_at(i);
        match self {
            Weighting::LastPacket => (1..n).map(x).collect(),
            Weighting::BatchAveraged => {
                let mut w = vec![0.0; n.saturating_sub(1)];
                let mut acc = 0.0;
                for j in (1..n).rev() {
                    acc += x(j) / j as f64;
                    w[j - 1] = acc;
                }
                w
            }
            Weighting::PerPacket => {
                let mean: f64 = (1..n).map(|i| i as f64 * x(i)).sum();
                let mut w = vec![0.0; n.saturating_sub(1)];
                let mut tail = 0.0;
                for j in (1..n).rev() {
                    tail += x(j);
                    w[j - 1] = tail / mean;
                }
                w
            }
        }
    }
}

/// Stochastic description of one service-consumption path.
#[derive(Debug, Clone, PartialEq)]
pub struct PathModel {
    path_id: String,
    interarrival: Pmf,
    batch_size: Pmf,
    service: Pmf,
    loss_bound: usize,
    peripheral_wait: PeripheralWait,
}

fn require_proper(what: &str, p: &Pmf) -> Result<(), ModelError> {
    let mass = p.total_mass();
    if (mass - 1.0).abs() > PROPER_MASS_TOLERANCE {
        return Err(ModelError::Improper {
            what: what.to_string(),
            mass,
        });
    }
    Ok(())
}

impl PathModel {
    pub fn new(
        path_id: impl Into<String>,
        interarrival: Pmf,
        batch_size: Pmf,
        service: Pmf,
        loss_bound: usize,
        peripheral_wait: PeripheralWait,
    ) -> Result<Self, ModelError> {
        require_proper("inter-arrival time", &interarrival)?;
        require_proper("batch size", &batch_size)?;
        require_proper("service time", &service)?;
        if batch_size.mass_at(0) > 0.0 {
            return Err(ModelError::EmptyBatches(batch_size.mass_at(0)));
        }
        if interarrival.mean()? <= 0.0 {
            return Err(ModelError::ZeroInterarrival);
        }
        if loss_bound == 0 {
            return Err(ModelError::ZeroLossBound);
        }
        if let PeripheralWait::Explicit {
            per_position,
            default,
        } = &peripheral_wait
        {
            for (i, w) in per_position.iter().enumerate() {
                require_proper(&format!("peripheral wait of packet {}", i + 1), w)?;
            }
            require_proper("default peripheral wait", default)?;
        }
        Ok(PathModel {
            path_id: path_id.into(),
            interarrival,
            batch_size,
            service,
            loss_bound,
            peripheral_wait,
        })
    }

    /// Single-packet batches with pass-through peripheral wait.
    pub fn simple(
        path_id: impl Into<String>,
        interarrival: Pmf,
        service: Pmf,
        loss_bound: usize,
    ) -> Result<Self, ModelError> {
        Self::new(
            path_id,
            interarrival,
            Pmf::delta(1),
            service,
            loss_bound,
            PeripheralWait::PassThrough,
        )
    }

    pub fn path_id(&self) -> &str {
        &self.path_id
    }
    pub fn interarrival(&self) -> &Pmf {
        &self.interarrival
    }
    pub fn batch_size(&self) -> &Pmf {
        &self.batch_size
    }
    pub fn service(&self) -> &Pmf {
        &self.service
    }
    pub fn loss_bound(&self) -> usize {
        self.loss_bound
    }
    pub fn peripheral_wait(&self) -> &PeripheralWait {
        &self.peripheral_wait
    }

    /// Largest batch size with positive probability.
    pub fn max_batch(&self) -> usize {
        self.batch_size.max_point().unwrap_or(1)
    }

    /// Normalized arrival rate `mu_B E[X] / mu_A`.
    pub fn load(&self) -> f64 {
        let mean = |p: &Pmf| p.mean().expect("validated at construction");
        mean(&self.service) * mean(&self.batch_size) / mean(&self.interarrival)
    }

    /// Copy with a different loss bound.
    pub fn with_loss_bound(&self, loss_bound: usize) -> Result<Self, ModelError> {
        if loss_bound == 0 {
            return Err(ModelError::ZeroLossBound);
        }
        Ok(PathModel {
            loss_bound,
            ..self.clone()
        })
    }

    /// Copy with a different inter-arrival law.
    pub fn with_interarrival(&self, interarrival: Pmf) -> Result<Self, ModelError> {
        Self::new(
            self.path_id.clone(),
            interarrival,
            self.batch_size.clone(),
            self.service.clone(),
            self.loss_bound,
            self.peripheral_wait.clone(),
        )
    }
}

/// Numerical settings for the stationary solver.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SolverConfig {
    pub epsilon: f64,
    pub max_iters: usize,
    pub weighting: Weighting,
    /// Anderson mixing depth for the fixed-point search; 0 is plain
    /// iteration.
    pub anderson_depth: usize,
    #[serde(skip)]
    pub exec: Exec,
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig {
            epsilon: 1e-10,
            max_iters: 100_000,
            weighting: Weighting::LastPacket,
            anderson_depth: 12,
            exec: Exec::default(),
        }
    }
}

/// Outcome of the fixed-point search for `u(k)`.
#[derive(Debug, Clone, PartialEq)]
pub struct UnfinishedWork {
    pub distribution: Pmf,
    pub iterations: usize,
    pub converged: bool,
    /// Sup-norm change of the last undamped update.
    pub residual: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct StationaryResult {
    pub path_id: String,
    pub unfinished_work: Pmf,
    /// `per_position[i - 1]` is `d_i`.
    pub per_position: Vec<Pmf>,
    pub total: Pmf,
    pub loss_probability: f64,
    pub iterations: usize,
    pub converged: bool,
    pub load: f64,
}

impl StationaryResult {
    pub fn percentile(&self, q: f64) -> Result<Quantile, PmfError> {
        self.total.percentile(q)
    }

    /// Mean delay of accepted packets, in time units.
    pub fn mean(&self) -> Result<f64, PmfError> {
        self.total.mean()
    }
}

/// Latency bound with the probability it has to be met.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct QosRequirement {
    pub latency_bound_us: f64,
    pub confidence: f64,
}

impl QosRequirement {
    pub fn new(latency_bound_us: f64, confidence: f64) -> Result<Self, ModelError> {
        let q = QosRequirement {
            latency_bound_us,
            confidence,
        };
        q.validate()?;
        Ok(q)
    }

    pub fn validate(&self) -> Result<(), ModelError> {
        if !(self.latency_bound_us > 0.0 && self.latency_bound_us.is_finite()) {
            return Err(ModelError::InvalidArgument(format!(
                "latency bound {} must be positive",
                self.latency_bound_us
            )));
        }
        if !(self.confidence > 0.0 && self.confidence <= 1.0) {
            return Err(ModelError::InvalidArgument(format!(
                "confidence {} outside (0, 1]",
                self.confidence
            )));
        }
        Ok(())
    }

    /// Largest whole number of time units within the bound.
    pub fn bound_units(&self, quantum_us: f64) -> usize {
        ((self.latency_bound_us / quantum_us) + 1e-9).floor() as usize
    }
}

// T(u): one batch arrival followed by one inter-arrival drain.
fn batch_update(model: &PathModel, u: &Pmf, exec: Exec) -> Pmf {
    let limit = model.loss_bound - 1;
    let max_batch = model.max_batch();
    let mut after = Vec::new();
    let mut workload = u.clone();
    for j in 1..=max_batch {
        let (accepted, rejected) = workload.split_at(limit);
        let served = accepted.convolve_with(&model.service, DEFAULT_TAIL_TOLERANCE, exec);
        workload = add_parts(&served, &rejected);
        let x = model.batch_size.mass_at(j);
        if x > 0.0 {
            if after.len() < workload.support_end() {
                after.resize(workload.support_end(), 0.0);
            }
            for (k, m) in workload.iter() {
                after[k] += x * m;
            }
        }
    }
    drain(&after, &model.interarrival, exec)
}

// Sum of two disjoint parts of one distribution; rounding can push the total
// a hair over unit mass, so this skips validation.
fn add_parts(a: &Pmf, b: &Pmf) -> Pmf {
    let mut out = a.to_dense();
    if out.len() < b.support_end() {
        out.resize(b.support_end(), 0.0);
    }
    for (k, m) in b.iter() {
        out[k] += m;
    }
    Pmf::from_dense(out)
}

// u'(k) = P(max(V - A, 0) = k).
fn drain(after: &[f64], interarrival: &Pmf, exec: Exec) -> Pmf {
    let m = after.len();
    if m == 0 {
        return Pmf::zero();
    }
    let mut out = vec![0.0; m];
    let work = m * interarrival.masses().len();
    let exec = if work >= 1 << 16 {
        exec
    } else {
        Exec::Sequential
    };
    let (a0, pa) = (interarrival.offset(), interarrival.masses());
    par::fill(exec, &mut out[1..], |i| {
        let start = i + 1 + a0;
        if start >= m {
            return 0.0;
        }
        let n = pa.len().min(m - start);
        pa[..n]
            .iter()
            .zip(&after[start..start + n])
            .map(|(p, v)| p * v)
            .sum()
    });
    let mut prefix = 0.0;
    let mut v = 0;
    let mut zero = 0.0;
    for (a, pa) in interarrival.iter() {
        while v <= a && v < m {
            prefix += after[v];
            v += 1;
        }
        zero += pa * prefix;
    }
    out[0] = zero;
    let total: f64 = out.iter().sum();
    let budget = DEFAULT_TAIL_TOLERANCE * total;
    let mut dropped = 0.0;
    while let Some(&last) = out.last() {
        if out.len() == 1 || dropped + last > budget {
            break;
        }
        dropped += last;
        out.pop();
    }
    Pmf::from_dense(out)
}

fn sup_distance(a: &Pmf, b: &Pmf) -> f64 {
    let end = a.support_end().max(b.support_end());
    (0..end)
        .map(|k| (a.mass_at(k) - b.mass_at(k)).abs())
        .fold(0.0, f64::max)
}

fn blend(a: &Pmf, b: &Pmf, theta: f64) -> Pmf {
    let mut out = vec![0.0; a.support_end().max(b.support_end())];
    for (k, m) in a.iter() {
        out[k] += (1.0 - theta) * m;
    }
    for (k, m) in b.iter() {
        out[k] += theta * m;
    }
    Pmf::from_dense(out)
}

/// Anderson type-II mixing over the last `depth` iterates.
///
/// For the linear batch update this is a windowed Krylov method, so it cuts
/// the iteration count near saturation by orders of magnitude. Extrapolated
/// iterates are clipped at zero and renormalized, and the caller still
/// checks convergence on a plain application of the update.
struct Anderson {
    depth: usize,
    last: Option<(Vec<f64>, Vec<f64>)>,
    dg: VecDeque<Vec<f64>>,
    df: VecDeque<Vec<f64>>,
}

impl Anderson {
    fn new(depth: usize) -> Self {
        Anderson {
            depth,
            last: None,
            dg: VecDeque::new(),
            df: VecDeque::new(),
        }
    }

    fn reset(&mut self) {
        self.last = None;
        self.dg.clear();
        self.df.clear();
    }

    /// Next iterate from `g = T(u)` and the residual `f = g - u`.
    fn step(&mut self, g: Vec<f64>, f: Vec<f64>) -> Vec<f64> {
        if let Some((pg, pf)) = self.last.take() {
            self.dg.push_back(diff(&g, &pg));
            self.df.push_back(diff(&f, &pf));
            if self.dg.len() > self.depth {
                self.dg.pop_front();
                self.df.pop_front();
            }
        }
        self.last = Some((g.clone(), f.clone()));
        if self.df.is_empty() {
            return g;
        }
        // Normal equations on the small m x m Gram matrix; the SVD cutoff
        // drops directions the history cannot resolve.
        let m = self.df.len();
        let dot = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(x, y)| x * y).sum::<f64>();
        let gram = DMatrix::from_fn(m, m, |r, c| dot(&self.df[r], &self.df[c]));
        let rhs = DVector::from_fn(m, |r, _| dot(&self.df[r], &f));
        let svd = gram.svd(true, true);
        let cutoff = 1e-14 * svd.singular_values.max();
        let Ok(gamma) = svd.solve(&rhs, cutoff) else {
            self.reset();
            return g;
        };
        let n = self.dg.iter().map(Vec::len).max().unwrap_or(0);
        let mut out = g;
        out.resize(n.max(out.len()), 0.0);
        for (c, dgc) in self.dg.iter().enumerate() {
            for (k, v) in dgc.iter().enumerate() {
                out[k] -= gamma[c] * v;
            }
        }
        out
    }
}

fn at(v: &[f64], k: usize) -> f64 {
    v.get(k).copied().unwrap_or(0.0)
}

fn diff(a: &[f64], b: &[f64]) -> Vec<f64> {
    (0..a.len().max(b.len()))
        .map(|k| at(a, k) - at(b, k))
        .collect()
}

// Clips negatives and rescales to unit mass; the unfinished work is always
// a proper law, so this also undoes accumulated tail truncation.
fn normalized(mut v: Vec<f64>) -> Pmf {
    for x in v.iter_mut() {
        if !(*x > 0.0) {
            *x = 0.0;
        }
    }
    let total: f64 = v.iter().sum();
    if total > 0.0 {
        v.iter_mut().for_each(|x| *x /= total);
    }
    Pmf::from_dense(v)
}

/// Stationary unfinished work seen by an arriving batch.
///
/// Iterates the batch update from `delta(0)` until one plain application
/// moves no mass point by more than `epsilon`. Steps are Anderson-mixed
/// when `SolverConfig::anderson_depth` is positive. With plain iteration, a
/// stalled residual (a periodic chain) switches to the lazy update
/// `(u + T u) / 2`, which has the same fixed point.
pub fn solve_unfinished_work(
    model: &PathModel,
    epsilon: f64,
    max_iters: usize,
) -> Result<UnfinishedWork, ModelError> {
    solve_unfinished_work_with(
        model,
        &SolverConfig {
            epsilon,
            max_iters,
            ..SolverConfig::default()
        },
    )
}

pub fn solve_unfinished_work_with(
    model: &PathModel,
    config: &SolverConfig,
) -> Result<UnfinishedWork, ModelError> {
    let SolverConfig {
        epsilon,
        max_iters,
        anderson_depth,
        exec,
        ..
    } = *config;
    if !(epsilon > 0.0) {
        return Err(ModelError::InvalidArgument(format!(
            "epsilon {epsilon} must be positive"
        )));
    }
    if max_iters == 0 {
        return Err(ModelError::InvalidArgument(
            "max_iters must be at least 1".into(),
        ));
    }
    let mut u = Pmf::delta(0);
    let mut history: Vec<f64> = Vec::new();
    let mut damped = false;
    let mut residual = f64::INFINITY;
    let mut best = f64::INFINITY;
    let mut mixer = Anderson::new(anderson_depth);
    // Extrapolated iterates sit further from the fixed point than plain
    // ones with the same residual, so mixing runs to a tighter target.
    let target = if anderson_depth > 0 {
        epsilon * 1e-2
    } else {
        epsilon
    };
    for iter in 1..=max_iters {
        let next = normalized(batch_update(model, &u, exec).to_dense());
        residual = sup_distance(&next, &u);
        if residual <= target {
            return Ok(UnfinishedWork {
                distribution: next,
                iterations: iter,
                converged: true,
                residual,
            });
        }
        if anderson_depth > 0 {
            // Restart the mixing history once it has clearly gone astray.
            if residual > 100.0 * best {
                mixer.reset();
            }
            best = best.min(residual);
            let g = next.to_dense();
            let f = diff(&g, &u.to_dense());
            u = normalized(mixer.step(g, f));
            continue;
        }
        history.push(residual);
        if !damped && history.len() > STALL_WINDOW {
            let before = history[history.len() - 1 - STALL_WINDOW];
            if residual > 0.5 * before {
                damped = true;
            }
        }
        u = if damped { blend(&u, &next, 0.5) } else { next };
    }
    Ok(UnfinishedWork {
        distribution: u,
        iterations: max_iters,
        converged: false,
        residual,
    })
}

/// Delay law `d_i` of the `i`-th packet of a batch given unfinished work `u`.
pub fn per_position_delay(model: &PathModel, u: &Pmf, i: usize) -> Result<Pmf, ModelError> {
    if i == 0 {
        return Err(ModelError::ZeroPosition);
    }
    let limit = model.loss_bound - 1;
    let wait = if i == 1 {
        u.clone()
    } else {
        u.convolve(&model.service.convolve_power(i - 1)?)
    };
    let (accepted, _) = wait.split_at(limit);
    let central = accepted.convolve(&model.service);
    Ok(match model.peripheral_wait.for_position(i) {
        None => central,
        Some(w) => w.convolve(&central),
    })
}

/// Solves `u`, every `d_i`, and their weighted combination `d`.
pub fn total_processing_time(
    model: &PathModel,
    config: &SolverConfig,
) -> Result<StationaryResult, ModelError> {
    let uw = solve_unfinished_work_with(model, config)?;
    let u = uw.distribution;
    let limit = model.loss_bound - 1;
    let tol = DEFAULT_TAIL_TOLERANCE;

    let mut per_position = Vec::with_capacity(model.max_batch());
    // rejected[i - 1]: probability that packet i is the first one rejected.
    let mut rejected = Vec::with_capacity(model.max_batch());
    let mut wait = u.clone();
    for i in 1..=model.max_batch() {
        // Untruncated: the split at `limit` already bounds the support.
        if i > 1 {
            wait = wait.convolve_with(&model.service, 0.0, config.exec);
        }
        let (accepted, over) = wait.split_at(limit);
        wait = accepted;
        rejected.push(over.total_mass());
        let central = wait.convolve_with(&model.service, tol, config.exec);
        per_position.push(match model.peripheral_wait.for_position(i) {
            None => central,
            Some(w) => w.convolve_with(&central, tol, config.exec),
        });
    }

    let weights = config.weighting.position_weights(&model.batch_size);
    let components: Vec<(f64, &Pmf)> = weights
        .iter()
        .zip(&per_position)
        .filter(|(w, _)| **w > 0.0)
        .map(|(&w, d)| (w, d))
        .collect();
    let total = mixture(&components)?;
    // Summed from the rejected mass rather than `1 - mass(total)`, so tail
    // truncation and rounding never show up as loss.
    let mut lost_by = 0.0;
    let loss_probability = weights
        .iter()
        .zip(&rejected)
        .map(|(w, r)| {
            lost_by += r;
            w * lost_by
        })
        .sum::<f64>()
        .min(1.0);
    Ok(StationaryResult {
        path_id: model.path_id.clone(),
        unfinished_work: u,
        per_position,
        total,
        loss_probability,
        iterations: uw.iterations,
        converged: uw.converged,
        load: model.load(),
    })
}

/// Solves many independent paths, in parallel when `exec` allows.
pub fn solve_paths(
    models: &[PathModel],
    config: &SolverConfig,
    exec: Exec,
) -> Vec<Result<StationaryResult, ModelError>> {
    // Parallelism is spent across paths; each solve runs sequentially.
    let inner = SolverConfig {
        exec: if exec.is_parallel() && models.len() > 1 {
            Exec::Sequential
        } else {
            exec
        },
        ..*config
    };
    par::map(exec, models, |m| total_processing_time(m, &inner))
}

/// True iff `P(D <= bound) >= confidence` on the defective delay law.
pub fn qos_feasible(result: &StationaryResult, req: &QosRequirement, quantum_us: f64) -> bool {
    result.total.cdf_at(req.bound_units(quantum_us)) >= req.confidence - PROB_TOLERANCE
}

#[cfg(test)]
mod tests {
    use super::*;

    fn det(a: usize, b: usize, l: usize) -> PathModel {
        PathModel::simple("det", Pmf::delta(a), Pmf::delta(b), l).unwrap()
    }

    fn solved(model: &PathModel) -> StationaryResult {
        total_processing_time(model, &SolverConfig::default()).unwrap()
    }

    // Steps the deterministic recursion directly from U = 0.
    fn step_deterministic(a: usize, b: usize, l: usize, steps: usize) -> Vec<usize> {
        let mut u = 0usize;
        let mut seen = Vec::new();
        for _ in 0..steps {
            seen.push(u);
            let w = if u < l { u + b } else { u };
            u = w.saturating_sub(a);
        }
        seen
    }

    #[test]
    fn validation_rejects_bad_models() {
        let g = Pmf::delta(1);
        assert!(matches!(
            PathModel::new(
                "p",
                g.clone(),
                Pmf::uniform(0, 1).unwrap(),
                g.clone(),
                5,
                Default::default()
            ),
            Err(ModelError::EmptyBatches(_))
        ));
        assert!(matches!(
            PathModel::simple("p", Pmf::delta(0), g.clone(), 5),
            Err(ModelError::ZeroInterarrival)
        ));
        assert!(matches!(
            PathModel::simple("p", g.clone(), g.clone(), 0),
            Err(ModelError::ZeroLossBound)
        ));
        let half = Pmf::new(0, vec![0.5]).unwrap();
        assert!(matches!(
            PathModel::simple("p", half, g, 5),
            Err(ModelError::Improper { .. })
        ));
    }

    #[test]
    fn slack_system_has_empty_queue() {
        let uw = solve_unfinished_work(&det(10, 1, 100), 1e-10, 1000).unwrap();
        assert!(uw.converged);
        assert_eq!(uw.distribution, Pmf::delta(0));
    }

    #[test]
    fn critically_loaded_deterministic_queue_matches_hand_recursion() {
        let trace = step_deterministic(1, 1, 5, 20);
        assert!(trace.iter().all(|&u| u == 0));
        let uw = solve_unfinished_work(&det(1, 1, 5), 1e-10, 1000).unwrap();
        assert!(uw.converged);
        assert_eq!(uw.distribution, Pmf::delta(0));
    }

    #[test]
    fn periodic_overloaded_queue_converges_to_time_average() {
        // U: 0,1,2,3,4,5,4,5,... so the stationary law is half on 4, half on 5.
        let trace = step_deterministic(1, 2, 5, 40);
        assert_eq!(&trace[..8], &[0, 1, 2, 3, 4, 5, 4, 5]);
        let uw = solve_unfinished_work(&det(1, 2, 5), 1e-10, 10_000).unwrap();
        assert!(uw.converged);
        assert!((uw.distribution.mass_at(4) - 0.5).abs() < 1e-9);
        assert!((uw.distribution.mass_at(5) - 0.5).abs() < 1e-9);
        // Arrivals finding U = 5 wait 5 > L - 1 = 4 and are dropped.
        let r = solved(&det(1, 2, 5));
        assert!((r.loss_probability - 0.5).abs() < 1e-9);
        assert!((r.total.mass_at(6) - 0.5).abs() < 1e-9);
    }

    #[test]
    fn per_position_examples() {
        let m = det(10, 1, 100);
        let u = Pmf::delta(0);
        assert_eq!(per_position_delay(&m, &u, 1).unwrap(), Pmf::delta(1));
        assert_eq!(per_position_delay(&m, &u, 3).unwrap(), Pmf::delta(3));
        assert_eq!(per_position_delay(&m, &u, 0), Err(ModelError::ZeroPosition));
    }

    #[test]
    fn per_position_rejection_matches_enumeration() {
        // u uniform on 0..=4, b = delta(2), L = 4, second packet: its wait is
        // u + 2 and must not exceed 3, so only u in {0, 1} survive.
        let m = PathModel::new(
            "p",
            Pmf::delta(10),
            Pmf::uniform(1, 2).unwrap(),
            Pmf::delta(2),
            4,
            PeripheralWait::PassThrough,
        )
        .unwrap();
        let u = Pmf::uniform(0, 4).unwrap();
        let d2 = per_position_delay(&m, &u, 2).unwrap();
        let mut oracle = [0.0; 16];
        for k in 0..=4usize {
            let wait = k + 2;
            if wait <= 3 {
                oracle[wait + 2] += 0.2;
            }
        }
        for (k, &p) in oracle.iter().enumerate() {
            assert!((d2.mass_at(k) - p).abs() < 1e-12, "k={k}");
        }
        assert!((d2.total_mass() - 0.4).abs() < 1e-12);
    }

    #[test]
    fn single_packet_batches_collapse_to_first_position() {
        let m = PathModel::simple(
            "p",
            Pmf::geometric_with_mean(4.0, 0).unwrap(),
            Pmf::delta(2),
            30,
        )
        .unwrap();
        let r = solved(&m);
        assert_eq!(r.per_position.len(), 1);
        assert_eq!(r.total.masses(), r.per_position[0].masses());
        assert_eq!(r.total.offset(), r.per_position[0].offset());
    }

    #[test]
    fn incremental_positions_match_closed_form() {
        let m = PathModel::new(
            "p",
            Pmf::geometric_with_mean(9.0, 1).unwrap(),
            Pmf::uniform(1, 3).unwrap(),
            Pmf::uniform(1, 2).unwrap(),
            12,
            PeripheralWait::Explicit {
                per_position: vec![Pmf::delta(0), Pmf::uniform(0, 1).unwrap()],
                default: Pmf::delta(2),
            },
        )
        .unwrap();
        let r = solved(&m);
        for i in 1..=3 {
            let direct = per_position_delay(&m, &r.unfinished_work, i).unwrap();
            let end = direct
                .support_end()
                .max(r.per_position[i - 1].support_end());
            for k in 0..end {
                assert!(
                    (direct.mass_at(k) - r.per_position[i - 1].mass_at(k)).abs() < 1e-12,
                    "i={i} k={k}"
                );
            }
        }
    }

    #[test]
    fn degenerate_total_is_service_law() {
        let b = Pmf::uniform(1, 4).unwrap();
        let m = PathModel::simple("p", Pmf::delta(50), b.clone(), 10).unwrap();
        assert_eq!(per_position_delay(&m, &Pmf::delta(0), 1).unwrap(), b);
        assert_eq!(solved(&m).total, b);
    }

    #[test]
    fn position_weights_sum_to_one() {
        let x = Pmf::new(1, vec![0.2, 0.5, 0.3]).unwrap();
        for w in [
            Weighting::LastPacket,
            Weighting::BatchAveraged,
            Weighting::PerPacket,
        ] {
            let s: f64 = w.position_weights(&x).iter().sum();
            assert!((s - 1.0).abs() < 1e-12, "{w:?}");
        }
        // E[X] = 2.1; P(X >= 2) = 0.8.
        let pp = Weighting::PerPacket.position_weights(&x);
        assert!((pp[1] - 0.8 / 2.1).abs() < 1e-12);
        let ba = Weighting::BatchAveraged.position_weights(&x);
        assert!((ba[2] - 0.1).abs() < 1e-12);
    }

    #[test]
    fn lighter_load_dominates_stochastically() {
        let b = Pmf::uniform(1, 3).unwrap();
        let heavy = PathModel::new(
            "p",
            Pmf::geometric_with_mean(3.0, 0).unwrap(),
            Pmf::uniform(1, 2).unwrap(),
            b.clone(),
            40,
            PeripheralWait::PassThrough,
        )
        .unwrap();
        let light = heavy
            .with_interarrival(Pmf::geometric_with_mean(6.0, 0).unwrap())
            .unwrap();
        assert!(light.load() < heavy.load());
        let (rh, rl) = (solved(&heavy), solved(&light));
        let end = rh.total.support_end().max(rl.total.support_end());
        for k in 0..end {
            assert!(rl.total.cdf_at(k) >= rh.total.cdf_at(k) - 1e-12, "k={k}");
        }
    }

    #[test]
    fn qos_examples() {
        let req = QosRequirement::new(250.0, 0.95).unwrap();
        let wrap = |total: Pmf| StationaryResult {
            path_id: "p".into(),
            unfinished_work: Pmf::delta(0),
            per_position: vec![total.clone()],
            loss_probability: 1.0 - total.total_mass(),
            total,
            iterations: 1,
            converged: true,
            load: 0.0,
        };
        assert!(qos_feasible(&wrap(Pmf::delta(100)), &req, 1.0));
        assert!(!qos_feasible(&wrap(Pmf::delta(300)), &req, 1.0));
        let two = |p: f64| mixture(&[(p, &Pmf::delta(200)), (1.0 - p, &Pmf::delta(400))]).unwrap();
        assert!(qos_feasible(&wrap(two(0.96)), &req, 1.0));
        assert!(!qos_feasible(&wrap(two(0.94)), &req, 1.0));
        // A 10 us quantum turns the 250 us bound into 25 units.
        assert!(qos_feasible(&wrap(Pmf::delta(25)), &req, 10.0));
        assert!(!qos_feasible(&wrap(Pmf::delta(26)), &req, 10.0));
        assert!(QosRequirement::new(0.0, 0.9).is_err());
        assert!(QosRequirement::new(10.0, 0.0).is_err());
    }

    #[test]
    fn load_uses_batch_mean() {
        let m = PathModel::new(
            "p",
            Pmf::delta(10),
            Pmf::uniform(1, 3).unwrap(),
            Pmf::delta(2),
            5,
            PeripheralWait::PassThrough,
        )
        .unwrap();
        assert!((m.load() - 0.4).abs() < 1e-12);
    }

    #[test]
    fn anderson_mixing_matches_plain_iteration() {
        let models = [
            PathModel::new(
                "batch",
                Pmf::geometric_with_mean(8.6, 1).unwrap(),
                Pmf::uniform(1, 3).unwrap(),
                Pmf::uniform(1, 7).unwrap(),
                300,
                PeripheralWait::PassThrough,
            )
            .unwrap(),
            // Deterministic and periodic: plain iteration needs damping.
            PathModel::simple("periodic", Pmf::delta(3), Pmf::uniform(2, 4).unwrap(), 6).unwrap(),
            PathModel::simple("overload", Pmf::uniform(1, 2).unwrap(), Pmf::delta(2), 20).unwrap(),
        ];
        for m in &models {
            // Near saturation a 1e-10 residual still leaves an error of
            // order residual / spectral gap, so compare against a tight solve.
            let reference = SolverConfig {
                anderson_depth: 0,
                epsilon: 1e-14,
                max_iters: 1_000_000,
                ..SolverConfig::default()
            };
            let plain = SolverConfig {
                anderson_depth: 0,
                ..SolverConfig::default()
            };
            let r = total_processing_time(m, &reference).unwrap();
            let a = total_processing_time(m, &plain).unwrap();
            let b = total_processing_time(m, &SolverConfig::default()).unwrap();
            assert!(r.converged && a.converged && b.converged, "{}", m.path_id());
            assert!(b.iterations <= a.iterations, "{}", m.path_id());
            let gap = sup_distance(&r.unfinished_work, &b.unfinished_work);
            assert!(gap < 1e-9, "{}: {gap:e}", m.path_id());
            assert!((r.loss_probability - b.loss_probability).abs() < 1e-9);
        }
    }

    #[test]
    fn unstable_unbounded_queue_reports_non_convergence() {
        let m =
            PathModel::simple("p", Pmf::uniform(0, 2).unwrap(), Pmf::delta(2), 1_000_000).unwrap();
        let uw = solve_unfinished_work(&m, 1e-10, 50).unwrap();
        assert!(!uw.converged);
        assert_eq!(uw.iterations, 50);
    }
}
