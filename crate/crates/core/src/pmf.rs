//! Exact arithmetic on finite discrete probability mass functions.
//!
//! A [`Pmf`] places non-negative mass on consecutive integer time units
//! starting at `offset`. Total mass may fall short of one: the missing mass
//! is the probability that a packet was rejected, and it is never
//! renormalized away.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::par::{self, Exec};

/// Slack allowed above unit total mass.
pub const MASS_EPSILON: f64 = 1e-12;

/// Fraction of total mass that tail truncation may discard per operation.
pub const DEFAULT_TAIL_TOLERANCE: f64 = 1e-12;

/// Slack used when comparing cumulative sums against a probability level.
pub const PROB_TOLERANCE: f64 = 1e-12;

// Below this many multiply-adds a convolution is not worth spreading out.
const PAR_CONVOLVE_WORK: usize = 1 << 15;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PmfError {
    #[error("mass at time unit {index} is {value}; masses must be finite and non-negative")]
    InvalidMass { index: usize, value: f64 },
    #[error("total mass {0} exceeds one")]
    ExcessMass(f64),
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("mean of a zero-mass distribution is undefined")]
    UndefinedMean,
}

/// Result of a quantile query on a possibly defective distribution.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Quantile {
    At(usize),
    /// The distribution never accumulates the requested probability.
    Infeasible,
}

impl Quantile {
    pub fn value(self) -> Option<usize> {
        match self {
            Quantile::At(k) => Some(k),
            Quantile::Infeasible => None,
        }
    }
}

/// Finite probability mass function over non-negative integer time units.
///
/// Always kept in canonical form: the first and last stored masses are
/// non-zero, or the storage is empty for the zero distribution.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawPmf", into = "RawPmf")]
pub struct Pmf {
    offset: usize,
    masses: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawPmf {
    offset: usize,
    masses: Vec<f64>,
}

impl TryFrom<RawPmf> for Pmf {
    type Error = PmfError;
    fn try_from(raw: RawPmf) -> Result<Self, Self::Error> {
        Pmf::new(raw.offset, raw.masses)
    }
}

impl From<Pmf> for RawPmf {
    fn from(p: Pmf) -> Self {
        RawPmf {
            offset: p.offset,
            masses: p.masses,
        }
    }
}

impl Pmf {
    /// Builds a PMF with `masses[j]` at time unit `offset + j`.
    pub fn new(offset: usize, masses: Vec<f64>) -> Result<Self, PmfError> {
        for (j, &m) in masses.iter().enumerate() {
            if !m.is_finite() || m < 0.0 {
                return Err(PmfError::InvalidMass {
                    index: offset + j,
                    value: m,
                });
            }
        }
        let total: f64 = masses.iter().sum();
        if total > 1.0 + MASS_EPSILON {
            return Err(PmfError::ExcessMass(total));
        }
        Ok(Self::canonical(offset, masses))
    }

    /// The distribution with no mass at all.
    pub fn zero() -> Self {
        Pmf {
            offset: 0,
            masses: Vec::new(),
        }
    }

    pub fn delta(at: usize) -> Self {
        Pmf {
            offset: at,
            masses: vec![1.0],
        }
    }

    /// Equal mass on every time unit in `lo..=hi`.
    pub fn uniform(lo: usize, hi: usize) -> Result<Self, PmfError> {
        if lo > hi {
            return Err(PmfError::InvalidArgument(format!(
                "uniform support {lo}..={hi} is empty"
            )));
        }
        let n = hi - lo + 1;
        Ok(Pmf {
            offset: lo,
            masses: vec![1.0 / n as f64; n],
        })
    }

    /// `P(min + j) = p (1 - p)^j`, cut where the remaining tail drops below
    /// [`DEFAULT_TAIL_TOLERANCE`].
    pub fn geometric(p: f64, min: usize) -> Result<Self, PmfError> {
        if !(p > 0.0 && p <= 1.0) {
            return Err(PmfError::InvalidArgument(format!(
                "geometric success probability {p} outside (0, 1]"
            )));
        }
        let mut masses = Vec::new();
        let mut survive = 1.0;
        loop {
            masses.push(survive * p);
            survive *= 1.0 - p;
            if survive <= DEFAULT_TAIL_TOLERANCE {
                break;
            }
        }
        Ok(Self::canonical(min, masses))
    }

    /// Geometric law on `min, min+1, ...` with the given mean.
    pub fn geometric_with_mean(mean: f64, min: usize) -> Result<Self, PmfError> {
        let excess = mean - min as f64;
        if !excess.is_finite() || excess < 0.0 {
            return Err(PmfError::InvalidArgument(format!(
                "geometric mean {mean} below its minimum {min}"
            )));
        }
        Self::geometric(1.0 / (1.0 + excess), min)
    }

    fn canonical(mut offset: usize, mut masses: Vec<f64>) -> Self {
        while masses.last() == Some(&0.0) {
            masses.pop();
        }
        let lead = masses.iter().take_while(|&&m| m == 0.0).count();
        if lead == masses.len() {
            return Self::zero();
        }
        if lead > 0 {
            masses.drain(..lead);
            offset += lead;
        }
        Pmf { offset, masses }
    }

    /// Drops trailing mass while the dropped total stays within
    /// `tolerance` times the total mass.
    fn truncate_tail(mut self, tolerance: f64) -> Self {
        let budget = tolerance * self.total_mass();
        let mut dropped = 0.0;
        while let Some(&last) = self.masses.last() {
            if dropped + last > budget {
                break;
            }
            dropped += last;
            self.masses.pop();
        }
        Self::canonical(self.offset, self.masses)
    }

    /// First time unit carrying mass (0 for the zero distribution).
    pub fn offset(&self) -> usize {
        self.offset
    }

    pub fn masses(&self) -> &[f64] {
        &self.masses
    }

    pub fn is_zero(&self) -> bool {
        self.masses.is_empty()
    }

    /// Last time unit carrying mass.
    pub fn max_point(&self) -> Option<usize> {
        (!self.masses.is_empty()).then(|| self.offset + self.masses.len() - 1)
    }

    /// Exclusive end of the support (0 for the zero distribution).
    pub fn support_end(&self) -> usize {
        self.max_point().map_or(0, |k| k + 1)
    }

    pub fn mass_at(&self, k: usize) -> f64 {
        k.checked_sub(self.offset)
            .and_then(|j| self.masses.get(j).copied())
            .unwrap_or(0.0)
    }

    pub fn total_mass(&self) -> f64 {
        self.masses.iter().sum()
    }

    /// `(time unit, mass)` pairs over the stored support.
    pub fn iter(&self) -> impl Iterator<Item = (usize, f64)> + '_ {
        self.masses
            .iter()
            .enumerate()
            .map(move |(j, &m)| (self.offset + j, m))
    }

    /// Masses laid out densely from time unit 0 up to the support end.
    pub fn to_dense(&self) -> Vec<f64> {
        let mut out = vec![0.0; self.offset];
        out.extend_from_slice(&self.masses);
        out
    }

    pub(crate) fn from_dense(masses: Vec<f64>) -> Self {
        Self::canonical(0, masses)
    }

    /// Same distribution delayed by `by` time units.
    pub fn shift(&self, by: usize) -> Self {
        if self.is_zero() {
            return Self::zero();
        }
        Pmf {
            offset: self.offset + by,
            masses: self.masses.clone(),
        }
    }

    /// Splits into the mass at or below `k` and the mass strictly above it.
    pub fn split_at(&self, k: usize) -> (Pmf, Pmf) {
        if self.is_zero() || k < self.offset {
            return (Self::zero(), self.clone());
        }
        let cut = (k - self.offset + 1).min(self.masses.len());
        let low = Self::canonical(self.offset, self.masses[..cut].to_vec());
        let high = Self::canonical(self.offset + cut, self.masses[cut..].to_vec());
        (low, high)
    }

    /// `P(T <= k)`; capped by the total mass for defective distributions.
    pub fn cdf_at(&self, k: usize) -> f64 {
        if k < self.offset {
            return 0.0;
        }
        let upto = (k - self.offset + 1).min(self.masses.len());
        self.masses[..upto].iter().sum()
    }

    /// Smallest `k` with `cdf_at(k) >= q`.
    pub fn percentile(&self, q: f64) -> Result<Quantile, PmfError> {
        if !(q > 0.0 && q <= 1.0) {
            return Err(PmfError::InvalidArgument(format!(
                "quantile level {q} outside (0, 1]"
            )));
        }
        let mut cum = 0.0;
        for (k, m) in self.iter() {
            cum += m;
            if cum >= q - PROB_TOLERANCE {
                return Ok(Quantile::At(k));
            }
        }
        Ok(Quantile::Infeasible)
    }

    /// Mean conditioned on acceptance: `sum k p[k] / total mass`.
    pub fn mean(&self) -> Result<f64, PmfError> {
        let total = self.total_mass();
        if total <= 0.0 {
            return Err(PmfError::UndefinedMean);
        }
        let moment: f64 = self.iter().map(|(k, m)| k as f64 * m).sum();
        Ok(moment / total)
    }

    pub fn convolve(&self, other: &Pmf) -> Pmf {
        self.convolve_with(other, DEFAULT_TAIL_TOLERANCE, Exec::default())
    }

    /// Discrete convolution followed by tail truncation at `tolerance`.
    pub fn convolve_with(&self, other: &Pmf, tolerance: f64, exec: Exec) -> Pmf {
        if self.is_zero() || other.is_zero() {
            return Self::zero();
        }
        let (a, b) = (&self.masses, &other.masses);
        let len = a.len() + b.len() - 1;
        let mut out = vec![0.0; len];
        let exec = if a.len() * b.len() >= PAR_CONVOLVE_WORK {
            exec
        } else {
            Exec::Sequential
        };
        par::fill(exec, &mut out, |k| {
            let lo = (k + 1).saturating_sub(b.len());
            let hi = k.min(a.len() - 1);
            (lo..=hi).map(|j| a[j] * b[k - j]).sum()
        });
        Self::canonical(self.offset + other.offset, out).truncate_tail(tolerance)
    }

    /// `n`-fold self-convolution by repeated squaring.
    pub fn convolve_power(&self, n: usize) -> Result<Pmf, PmfError> {
        self.convolve_power_with(n, DEFAULT_TAIL_TOLERANCE, Exec::default())
    }

    pub fn convolve_power_with(
        &self,
        mut n: usize,
        tolerance: f64,
        exec: Exec,
    ) -> Result<Pmf, PmfError> {
        if n == 0 {
            return Err(PmfError::InvalidArgument(
                "convolution power must be at least 1".into(),
            ));
        }
        let mut acc: Option<Pmf> = None;
        let mut base = self.clone();
        loop {
            if n & 1 == 1 {
                acc = Some(match acc {
                    None => base.clone(),
                    Some(a) => a.convolve_with(&base, tolerance, exec),
                });
            }
            n >>= 1;
            if n == 0 {
                break;
            }
            base = base.convolve_with(&base, tolerance, exec);
        }
        Ok(acc.expect("n >= 1 sets at least one bit"))
    }
}

/// Pointwise weighted sum `sum w_i p_i`.
///
/// Only exact trailing and leading zeros are trimmed, so a single component
/// with weight one is returned bit for bit.
pub fn mixture(components: &[(f64, &Pmf)]) -> Result<Pmf, PmfError> {
    let mut weight_sum = 0.0;
    for &(w, _) in components {
        if !w.is_finite() || w < 0.0 {
            return Err(PmfError::InvalidArgument(format!(
                "mixture weight {w} is negative or non-finite"
            )));
        }
        weight_sum += w;
    }
    if weight_sum > 1.0 + MASS_EPSILON {
        return Err(PmfError::InvalidArgument(format!(
            "mixture weights sum to {weight_sum} > 1"
        )));
    }
    let live = components.iter().filter(|(w, p)| *w > 0.0 && !p.is_zero());
    let (lo, hi) = live.clone().fold((usize::MAX, 0), |(lo, hi), (_, p)| {
        (lo.min(p.offset), hi.max(p.support_end()))
    });
    if lo == usize::MAX {
        return Ok(Pmf::zero());
    }
    let mut out = vec![0.0; hi - lo];
    for &(w, p) in live {
        for (k, m) in p.iter() {
            out[k - lo] += w * m;
        }
    }
    Pmf::new(lo, out)
}
