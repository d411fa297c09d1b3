//! Inter-host path latency from fiber length and VNF chain composition.

use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Default fiber propagation constant, microseconds per meter.
pub const DEFAULT_PROPAGATION_US_PER_M: f64 = 4.77;

/// Default latency increase of a two-VNF same-host chain over a single VNF.
pub const DEFAULT_CHAINING_FACTOR: f64 = 1.5;

const BUILTIN_TABLE: &str = include_str!("../data/cots_table2.json");

#[derive(Debug, Error)]
pub enum ComposeError {
    #[error("no profile for technology `{0}`")]
    UnknownTechnology(String),
    #[error("no {chain_length}-VNF entry for {packet_size}-byte packets on `{technology}`")]
    MissingEntry {
        technology: String,
        packet_size: u32,
        chain_length: u32,
    },
    #[error("invalid profile: {0}")]
    InvalidProfile(String),
    #[error("invalid path: {0}")]
    InvalidPath(String),
    #[error("cannot read profile file: {0}")]
    Io(#[from] std::io::Error),
    #[error("cannot parse profile file: {0}")]
    Parse(#[from] serde_json::Error),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CotsRow {
    pub packet_size: u32,
    pub chain_length: u32,
    pub latency_us: f64,
}

/// Measured one-way latencies of one virtual switching technology.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CotsProfile {
    pub technology: String,
    pub rows: Vec<CotsRow>,
    #[serde(default = "default_chaining_factor")]
    pub chaining_factor: f64,
    /// Median pNIC-to-pNIC switch traversal range, low and high load.
    pub switch_traversal_us: [f64; 2],
}

fn default_chaining_factor() -> f64 {
    DEFAULT_CHAINING_FACTOR
}

impl CotsProfile {
    pub fn validate(&self) -> Result<(), ComposeError> {
        if self.chaining_factor < 1.0 || !self.chaining_factor.is_finite() {
            return Err(ComposeError::InvalidProfile(format!(
                "`{}` chaining factor {} is below 1",
                self.technology, self.chaining_factor
            )));
        }
        for row in &self.rows {
            if !(row.latency_us > 0.0 && row.latency_us.is_finite()) {
                return Err(ComposeError::InvalidProfile(format!(
                    "`{}` latency {} for {} bytes x{} is not positive",
                    self.technology, row.latency_us, row.packet_size, row.chain_length
                )));
            }
        }
        let [lo, hi] = self.switch_traversal_us;
        if !(lo > 0.0 && hi >= lo) {
            return Err(ComposeError::InvalidProfile(format!(
                "`{}` switch traversal range [{lo}, {hi}] is invalid",
                self.technology
            )));
        }
        Ok(())
    }

    pub fn lookup(&self, packet_size: u32, chain_length: u32) -> Option<f64> {
        self.rows
            .iter()
            .find(|r| r.packet_size == packet_size && r.chain_length == chain_length)
            .map(|r| r.latency_us)
    }
}

/// Set of profiles keyed by technology label.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct CotsCatalog {
    profiles: Vec<CotsProfile>,
}

impl CotsCatalog {
    pub fn new(profiles: Vec<CotsProfile>) -> Result<Self, ComposeError> {
        for p in &profiles {
            p.validate()?;
        }
        Ok(CotsCatalog { profiles })
    }

    /// The shipped one-way OvS / OvS-DPDK measurement table.
    pub fn builtin() -> Self {
        Self::from_json(BUILTIN_TABLE).expect("shipped profile is valid")
    }

    pub fn from_json(text: &str) -> Result<Self, ComposeError> {
        Self::new(serde_json::from_str(text)?)
    }

    pub fn load(path: &Path) -> Result<Self, ComposeError> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }

    pub fn profiles(&self) -> &[CotsProfile] {
        &self.profiles
    }

    pub fn profile(&self, technology: &str) -> Result<&CotsProfile, ComposeError> {
        self.profiles
            .iter()
            .find(|p| p.technology == technology)
            .ok_or_else(|| ComposeError::UnknownTechnology(technology.to_string()))
    }

    /// Arithmetic mean over packet sizes for one technology and chain length.
    pub fn table_average(&self, technology: &str, chain_length: u32) -> Result<f64, ComposeError> {
        let profile = self.profile(technology)?;
        let values: Vec<f64> = profile
            .rows
            .iter()
            .filter(|r| r.chain_length == chain_length)
            .map(|r| r.latency_us)
            .collect();
        if values.is_empty() {
            return Err(ComposeError::MissingEntry {
                technology: technology.to_string(),
                packet_size: 0,
                chain_length,
            });
        }
        Ok(values.iter().sum::<f64>() / values.len() as f64)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VnfHop {
    pub technology: String,
    pub packet_size: u32,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PathSpec {
    pub fiber_length_m: f64,
    #[serde(default)]
    pub vnf_chain: Vec<VnfHop>,
    #[serde(default = "default_propagation")]
    pub propagation_us_per_m: f64,
}

fn default_propagation() -> f64 {
    DEFAULT_PROPAGATION_US_PER_M
}

impl PathSpec {
    pub fn new(fiber_length_m: f64, vnf_chain: Vec<VnfHop>) -> Self {
        PathSpec {
            fiber_length_m,
            vnf_chain,
            propagation_us_per_m: DEFAULT_PROPAGATION_US_PER_M,
        }
    }
}

/// Propagation plus per-VNF processing.
///
/// Two consecutive hops of the same technology and packet size are treated
/// as a co-located two-VNF chain: the measured two-VNF entry is used when
/// present, otherwise the single-VNF entry scaled by the chaining factor.
pub fn estimate_path_latency(spec: &PathSpec, catalog: &CotsCatalog) -> Result<f64, ComposeError> {
    if !(spec.fiber_length_m >= 0.0 && spec.fiber_length_m.is_finite()) {
        return Err(ComposeError::InvalidPath(format!(
            "fiber length {} m",
            spec.fiber_length_m
        )));
    }
    if !(spec.propagation_us_per_m >= 0.0) {
        return Err(ComposeError::InvalidPath(format!(
            "propagation constant {} us/m",
            spec.propagation_us_per_m
        )));
    }
    let mut total = spec.fiber_length_m * spec.propagation_us_per_m;
    let chain = &spec.vnf_chain;
    let mut i = 0;
    while i < chain.len() {
        let hop = &chain[i];
        let profile = catalog.profile(&hop.technology)?;
        let single = || {
            profile
                .lookup(hop.packet_size, 1)
                .ok_or_else(|| ComposeError::MissingEntry {
                    technology: hop.technology.clone(),
                    packet_size: hop.packet_size,
                    chain_length: 1,
                })
        };
        if chain.get(i + 1) == Some(hop) {
            total += match profile.lookup(hop.packet_size, 2) {
                Some(pair) => pair,
                None => single()? * profile.chaining_factor,
            };
            i += 2;
        } else {
            total += single()?;
            i += 1;
        }
    }
    Ok(total)
}

/// `ceil(latency / unit)`, treating values within 1e-9 of an integer as
/// that integer so exact boundaries do not round up through float noise.
pub fn cost_units(latency_us: f64, unit_us: f64) -> u64 {
    assert!(unit_us > 0.0, "cost unit must be positive");
    let q = (latency_us / unit_us).max(0.0);
    let nearest = q.round();
    if (q - nearest).abs() <= 1e-9 * nearest.max(1.0) {
        nearest as u64
    } else {
        q.ceil() as u64
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn hop(tech: &str, size: u32) -> VnfHop {
        VnfHop {
            technology: tech.into(),
            packet_size: size,
        }
    }

    #[test]
    fn single_accelerated_vnf() {
        let spec = PathSpec::new(0.0, vec![hop("ovs-dpdk", 64)]);
        let l = estimate_path_latency(&spec, &CotsCatalog::builtin()).unwrap();
        assert!((l - 28.4).abs() < 1e-12);
    }

    #[test]
    fn measured_pair_entry_is_used() {
        let spec = PathSpec::new(0.0, vec![hop("ovs-dpdk", 64), hop("ovs-dpdk", 64)]);
        let l = estimate_path_latency(&spec, &CotsCatalog::builtin()).unwrap();
        assert!((l - 44.74).abs() < 1e-12);
    }

    #[test]
    fn missing_pair_entry_falls_back_to_chaining_factor() {
        let catalog = CotsCatalog::new(vec![CotsProfile {
            technology: "ovs".into(),
            rows: vec![CotsRow {
                packet_size: 64,
                chain_length: 1,
                latency_us: 75.0,
            }],
            chaining_factor: 1.5,
            switch_traversal_us: [7.8, 13.9],
        }])
        .unwrap();
        let spec = PathSpec::new(10.0, vec![hop("ovs", 64), hop("ovs", 64)]);
        // 10 m x 4.77 + 75 x 1.5
        let l = estimate_path_latency(&spec, &catalog).unwrap();
        assert!((l - 160.2).abs() < 1e-9);
    }

    #[test]
    fn unresolvable_entries_error() {
        let catalog = CotsCatalog::builtin();
        let spec = PathSpec::new(0.0, vec![hop("ovs", 512)]);
        assert!(matches!(
            estimate_path_latency(&spec, &catalog),
            Err(ComposeError::MissingEntry {
                packet_size: 512,
                ..
            })
        ));
        let spec = PathSpec::new(0.0, vec![hop("sriov", 64)]);
        assert!(matches!(
            estimate_path_latency(&spec, &catalog),
            Err(ComposeError::UnknownTechnology(_))
        ));
        assert!(estimate_path_latency(&PathSpec::new(-1.0, vec![]), &catalog).is_err());
    }

    #[test]
    fn mixed_chain_groups_only_identical_neighbours() {
        let spec = PathSpec::new(
            1.0,
            vec![
                hop("ovs", 64),
                hop("ovs-dpdk", 64),
                hop("ovs-dpdk", 64),
                hop("ovs", 256),
            ],
        );
        let l = estimate_path_latency(&spec, &CotsCatalog::builtin()).unwrap();
        assert!((l - (4.77 + 75.0 + 44.74 + 132.0)).abs() < 1e-9);
    }

    #[test]
    fn table_averages() {
        let c = CotsCatalog::builtin();
        assert!((c.table_average("ovs", 1).unwrap() - 129.333_333).abs() < 1e-5);
        assert!((c.table_average("ovs-dpdk", 1).unwrap() - 65.886_667).abs() < 1e-5);
        let single = CotsCatalog::new(vec![CotsProfile {
            technology: "x".into(),
            rows: vec![CotsRow {
                packet_size: 64,
                chain_length: 1,
                latency_us: 12.5,
            }],
            chaining_factor: 1.5,
            switch_traversal_us: [1.0, 2.0],
        }])
        .unwrap();
        assert_eq!(single.table_average("x", 1).unwrap(), 12.5);
        assert!(single.table_average("x", 2).is_err());
    }

    #[test]
    fn cost_unit_examples() {
        assert_eq!(cost_units(44.74, 10.0), 5);
        assert_eq!(cost_units(0.0, 7.0), 0);
        assert_eq!(cost_units(100.0, 10.0), 10);
        assert_eq!(cost_units(1.1, 0.1), 11);
        assert_eq!(cost_units(100.01, 10.0), 11);
    }

    #[test]
    fn invalid_profiles_are_refused() {
        let mut p = CotsCatalog::builtin().profiles()[0].clone();
        p.chaining_factor = 0.9;
        assert!(CotsCatalog::new(vec![p.clone()]).is_err());
        p.chaining_factor = 1.5;
        p.rows[0].latency_us = 0.0;
        assert!(CotsCatalog::new(vec![p]).is_err());
    }
}
