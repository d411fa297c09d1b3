//! Scenario files: strict JSON input, end-to-end execution, and reports.
//!
//! A run solves every link's queueing model, composes path latencies,
//! builds per-host zone tables for every system, then carries each request
//! through the signalling chain of the requesting app's system.

use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::latency_composer::{
    estimate_path_latency, ComposeError, CotsCatalog, PathSpec, VnfHop,
    DEFAULT_PROPAGATION_US_PER_M,
};
use crate::meo_decision::{
    compare_random_baseline, AppInstance, BaselineComparison, Decision, DelayMatrix, DelayModel,
    MeoExposure, Objective, ServiceConsumptionRequest, ServiceInstance, SystemSnapshot,
    UeDelayMatrix,
};
use crate::par::Exec;
use crate::pmf::{Pmf, PmfError};
use crate::protocol::{
    replay_trace, run_transaction, write_trace, EntityRole, MessageBus, TraceRecord,
};
use crate::queue_model::{
    solve_paths, ModelError, PathModel, PeripheralWait, QosRequirement, SolverConfig,
    StationaryResult,
};
use crate::zoning::{
    build_zone_table, costs_from_laws, validate_boundaries, Cost, CostMatrix, CostSource, HostId,
    OfflineCostConfig, Statistic, ZoneBoundary, ZoneTable, ZoningError, ZoningState,
};

pub const TOOL_NAME: &str = "edgezone";
pub const TOOL_VERSION: &str = env!("CARGO_PKG_VERSION");
pub const DEFAULT_SYSTEM_ID: &str = "mec-1";

#[derive(Debug, Error)]
pub enum ScenarioError {
    #[error("cannot read {path}: {source}")]
    Io { path: PathBuf, source: io::Error },
    #[error("{path}: at `{field}`: {message}")]
    Parse {
        path: String,
        field: String,
        message: String,
    },
    #[error("invalid scenario:\n  {}", .0.join("\n  "))]
    Invalid(Vec<String>),
}

#[derive(Debug, Error)]
pub enum RunError {
    #[error(transparent)]
    Scenario(#[from] ScenarioError),
    #[error("link {link}: {source}")]
    Model { link: String, source: ModelError },
    #[error(transparent)]
    Compose(#[from] ComposeError),
    #[error(transparent)]
    Zoning(#[from] ZoningError),
    #[error(transparent)]
    Pmf(#[from] PmfError),
    #[error("cannot write {path}: {source}")]
    Write { path: PathBuf, source: io::Error },
}

/// Distribution over non-negative integer time units.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum DistSpec {
    Delta(usize),
    /// Inclusive `[lo, hi]`.
    Uniform([usize; 2]),
    Geometric {
        mean: f64,
        min: usize,
    },
    Masses(Pmf),
}

impl DistSpec {
    pub fn to_pmf(&self) -> Result<Pmf, PmfError> {
        match self {
            DistSpec::Delta(k) => Ok(Pmf::delta(*k)),
            DistSpec::Uniform([lo, hi]) => Pmf::uniform(*lo, *hi),
            DistSpec::Geometric { mean, min } => Pmf::geometric_with_mean(*mean, *min),
            DistSpec::Masses(p) => Ok(p.clone()),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PeripheralSpec {
    /// Entry `i` applies to the `i+1`-th packet of a batch.
    #[serde(default)]
    pub per_position: Vec<DistSpec>,
    pub default: DistSpec,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PathModelSpec {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub path_id: Option<String>,
    pub interarrival: DistSpec,
    pub batch_size: DistSpec,
    pub service: DistSpec,
    pub loss_bound: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub peripheral_wait: Option<PeripheralSpec>,
}

impl PathModelSpec {
    pub fn build(&self, default_id: &str) -> Result<PathModel, ModelError> {
        let peripheral = match &self.peripheral_wait {
            None => PeripheralWait::PassThrough,
            Some(p) => PeripheralWait::Explicit {
                per_position: p
                    .per_position
                    .iter()
                    .map(DistSpec::to_pmf)
                    .collect::<Result<_, _>>()?,
                default: p.default.to_pmf()?,
            },
        };
        PathModel::new(
            self.path_id.as_deref().unwrap_or(default_id),
            self.interarrival.to_pmf()?,
            self.batch_size.to_pmf()?,
            self.service.to_pmf()?,
            self.loss_bound,
            peripheral,
        )
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HostSpec {
    pub id: HostId,
    /// Planar position in meters.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub position_m: Option<[f64; 2]>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SystemSpec {
    pub system_id: String,
    pub hosts: Vec<HostId>,
}

/// Consumption path from a consumer host to a producer host.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LinkSpec {
    pub from: HostId,
    pub to: HostId,
    pub model: PathModelSpec,
    /// Taken from host positions when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub fiber_length_m: Option<f64>,
    #[serde(default)]
    pub vnf_chain: Vec<VnfHop>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub propagation_us_per_m: Option<f64>,
    /// Also declares the reverse link with the same parameters.
    #[serde(default)]
    pub bidirectional: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MeasurementSpec {
    pub reference: HostId,
    pub host: HostId,
    pub samples_us: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RequestSpec {
    pub app_id: String,
    pub service_id: String,
    /// Falls back to the scenario-wide requirement.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub qos: Option<QosRequirement>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ue_attachment: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BusSpec {
    pub hop_latency_us: f64,
    pub deadline_us: f64,
    #[serde(default)]
    pub unreachable: Vec<EntityRole>,
}

impl Default for BusSpec {
    fn default() -> Self {
        BusSpec {
            hop_latency_us: 10.0,
            deadline_us: 1000.0,
            unreachable: Vec::new(),
        }
    }
}

fn default_unit() -> f64 {
    10.0
}
fn default_quantum() -> f64 {
    1.0
}
fn default_trials() -> u32 {
    1000
}
fn default_ue_bound() -> f64 {
    f64::MAX
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    pub name: String,
    #[serde(default)]
    pub seed: u64,
    /// Microseconds per cost unit.
    #[serde(default = "default_unit")]
    pub unit_us: f64,
    /// Microseconds per model time unit.
    #[serde(default = "default_quantum")]
    pub quantum_us: f64,
    /// Profile file, relative to the scenario file; the shipped table if absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cots_profile: Option<PathBuf>,
    #[serde(default)]
    pub solver: SolverConfig,
    #[serde(default)]
    pub cost_statistic: Statistic,
    #[serde(default)]
    pub objective: Objective,
    pub boundaries: Vec<ZoneBoundary>,
    pub qos: QosRequirement,
    pub hosts: Vec<HostSpec>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub systems: Vec<SystemSpec>,
    #[serde(default)]
    pub apps: Vec<AppInstance>,
    #[serde(default)]
    pub services: Vec<ServiceInstance>,
    #[serde(default)]
    pub links: Vec<LinkSpec>,
    #[serde(default)]
    pub measurements: Vec<MeasurementSpec>,
    #[serde(default)]
    pub requests: Vec<RequestSpec>,
    #[serde(default)]
    pub ue_delays: UeDelayMatrix,
    #[serde(default = "default_ue_bound")]
    pub ue_bound_us: f64,
    #[serde(default = "default_trials")]
    pub baseline_trials: u32,
    #[serde(default)]
    pub bus: BusSpec,
    /// Directory the scenario was loaded from; resolves `cots_profile`.
    #[serde(skip)]
    pub base_dir: Option<PathBuf>,
}

/// Parses and validates scenario text; `origin` labels error messages.
pub fn parse_scenario(text: &str, origin: &str) -> Result<Scenario, ScenarioError> {
    let de = &mut serde_json::Deserializer::from_str(text);
    let scenario: Scenario =
        serde_path_to_error::deserialize(de).map_err(|e| ScenarioError::Parse {
            path: origin.to_string(),
            field: e.path().to_string(),
            message: e.inner().to_string(),
        })?;
    scenario.validate()?;
    Ok(scenario)
}

pub fn load_scenario(path: &Path) -> Result<Scenario, ScenarioError> {
    let text = fs::read_to_string(path).map_err(|source| ScenarioError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    let mut s = parse_scenario(&text, &path.display().to_string())?;
    s.base_dir = path.parent().map(Path::to_path_buf);
    Ok(s)
}

impl Scenario {
    /// Referential integrity and value ranges, itemized by field path.
    pub fn validate(&self) -> Result<(), ScenarioError> {
        let mut errs = Vec::new();
        let mut hosts = BTreeSet::new();
        for (i, h) in self.hosts.iter().enumerate() {
            if !hosts.insert(&h.id) {
                errs.push(format!("hosts[{i}].id: duplicate host `{}`", h.id));
            }
        }
        let known = |h: &HostId| hosts.contains(h);
        if !(self.unit_us > 0.0) {
            errs.push(format!("unit_us: {} must be positive", self.unit_us));
        }
        if !(self.quantum_us > 0.0) {
            errs.push(format!("quantum_us: {} must be positive", self.quantum_us));
        }
        if let Err(e) = validate_boundaries(&self.boundaries) {
            errs.push(format!("boundaries: {e}"));
        }
        if let Err(e) = self.qos.validate() {
            errs.push(format!("qos: {e}"));
        }
        if let Err(e) = self.cost_statistic.validate() {
            errs.push(format!("cost_statistic: {e}"));
        }
        if !(self.solver.epsilon > 0.0) || self.solver.max_iters == 0 {
            errs.push("solver: epsilon and max_iters must be positive".into());
        }
        if !(self.ue_bound_us > 0.0) {
            errs.push(format!(
                "ue_bound_us: {} must be positive",
                self.ue_bound_us
            ));
        }

        let mut system_ids = BTreeSet::new();
        let mut owner: BTreeMap<&HostId, &str> = BTreeMap::new();
        for (i, s) in self.systems.iter().enumerate() {
            if s.system_id.is_empty() || !system_ids.insert(&s.system_id) {
                errs.push(format!(
                    "systems[{i}].system_id: empty or duplicate `{}`",
                    s.system_id
                ));
            }
            for (j, h) in s.hosts.iter().enumerate() {
                if !known(h) {
                    errs.push(format!("systems[{i}].hosts[{j}]: unknown host `{h}`"));
                } else if let Some(prev) = owner.insert(h, &s.system_id) {
                    errs.push(format!(
                        "systems[{i}].hosts[{j}]: host `{h}` already belongs to `{prev}`"
                    ));
                }
            }
        }
        if !self.systems.is_empty() {
            for h in hosts.iter().filter(|h| !owner.contains_key(*h)) {
                errs.push(format!("systems: host `{h}` belongs to no system"));
            }
        }

        let mut app_ids = BTreeSet::new();
        for (i, a) in self.apps.iter().enumerate() {
            if !app_ids.insert(&a.app_id) {
                errs.push(format!("apps[{i}].app_id: duplicate app `{}`", a.app_id));
            }
            if !known(&a.host) {
                errs.push(format!("apps[{i}].host: unknown host `{}`", a.host));
            }
        }
        let mut pairs = BTreeSet::new();
        for (i, s) in self.services.iter().enumerate() {
            if !known(&s.host) {
                errs.push(format!("services[{i}].host: unknown host `{}`", s.host));
            }
            if s.system_id.is_some() {
                errs.push(format!(
                    "services[{i}].system_id: set from `systems`, not per service"
                ));
            }
            if !pairs.insert((&s.service_id, &s.host)) {
                errs.push(format!(
                    "services[{i}]: `{}` listed twice on `{}`",
                    s.service_id, s.host
                ));
            }
        }
        let position = |h: &HostId| {
            self.hosts
                .iter()
                .find(|x| x.id == *h)
                .and_then(|x| x.position_m)
        };
        let mut link_keys = BTreeSet::new();
        for (i, l) in self.links.iter().enumerate() {
            for (field, h) in [("from", &l.from), ("to", &l.to)] {
                if !known(h) {
                    errs.push(format!("links[{i}].{field}: unknown host `{h}`"));
                }
            }
            let mut keys = vec![(&l.from, &l.to)];
            if l.bidirectional && l.from != l.to {
                keys.push((&l.to, &l.from));
            }
            for (a, b) in keys {
                if !link_keys.insert((a, b)) {
                    errs.push(format!("links[{i}]: link `{a}` -> `{b}` declared twice"));
                }
            }
            match l.fiber_length_m {
                Some(f) if !(f >= 0.0 && f.is_finite()) => errs.push(format!(
                    "links[{i}].fiber_length_m: {f} must be non-negative"
                )),
                None if l.from != l.to
                    && (position(&l.from).is_none() || position(&l.to).is_none()) =>
                {
                    errs.push(format!(
                        "links[{i}].fiber_length_m: required unless both hosts have positions"
                    ))
                }
                _ => {}
            }
            if let Err(e) = l.model.build("check") {
                errs.push(format!("links[{i}].model: {e}"));
            }
        }
        for (i, m) in self.measurements.iter().enumerate() {
            for (field, h) in [("reference", &m.reference), ("host", &m.host)] {
                if !known(h) {
                    errs.push(format!("measurements[{i}].{field}: unknown host `{h}`"));
                }
            }
            if m.samples_us.is_empty() {
                errs.push(format!("measurements[{i}].samples_us: no samples"));
            }
        }
        let service_ids: BTreeSet<&String> = self.services.iter().map(|s| &s.service_id).collect();
        for (i, r) in self.requests.iter().enumerate() {
            if !app_ids.contains(&r.app_id) {
                errs.push(format!("requests[{i}].app_id: unknown app `{}`", r.app_id));
            }
            if !service_ids.contains(&r.service_id) {
                errs.push(format!(
                    "requests[{i}].service_id: unknown service `{}`",
                    r.service_id
                ));
            }
            if let Some(Err(e)) = r.qos.as_ref().map(QosRequirement::validate) {
                errs.push(format!("requests[{i}].qos: {e}"));
            }
        }
        for (att, row) in &self.ue_delays {
            for (h, d) in row {
                if !known(h) {
                    errs.push(format!("ue_delays.{att}.{h}: unknown host"));
                } else if !(*d >= 0.0 && d.is_finite()) {
                    errs.push(format!("ue_delays.{att}.{h}: {d} must be non-negative"));
                }
            }
        }
        if errs.is_empty() {
            Ok(())
        } else {
            Err(ScenarioError::Invalid(errs))
        }
    }

    /// SHA-256 of the canonical serialized scenario.
    pub fn config_hash(&self) -> String {
        let bytes = serde_json::to_vec(self).expect("scenario serializes");
        Sha256::digest(&bytes)
            .iter()
            .map(|b| format!("{b:02x}"))
            .collect()
    }

    fn catalog(&self) -> Result<CotsCatalog, ComposeError> {
        match &self.cots_profile {
            None => Ok(CotsCatalog::builtin()),
            Some(p) => {
                let path = match &self.base_dir {
                    Some(dir) if p.is_relative() => dir.join(p),
                    _ => p.clone(),
                };
                CotsCatalog::load(&path)
            }
        }
    }

    /// `(system_id, hosts)` pairs; one implicit system when none is declared.
    pub fn system_hosts(&self) -> Vec<(String, BTreeSet<HostId>)> {
        if self.systems.is_empty() {
            vec![(
                DEFAULT_SYSTEM_ID.to_string(),
                self.hosts.iter().map(|h| h.id.clone()).collect(),
            )]
        } else {
            self.systems
                .iter()
                .map(|s| (s.system_id.clone(), s.hosts.iter().cloned().collect()))
                .collect()
        }
    }

    /// Every directed link, with bidirectional ones expanded.
    pub fn directed_links(&self) -> Vec<(HostId, HostId, &LinkSpec)> {
        let mut out = Vec::new();
        for l in &self.links {
            out.push((l.from.clone(), l.to.clone(), l));
            if l.bidirectional && l.from != l.to {
                out.push((l.to.clone(), l.from.clone(), l));
            }
        }
        out
    }

    fn path_spec(&self, from: &HostId, to: &HostId, link: &LinkSpec) -> PathSpec {
        let fiber = link.fiber_length_m.unwrap_or_else(|| {
            let pos = |h: &HostId| {
                self.hosts
                    .iter()
                    .find(|x| x.id == *h)
                    .and_then(|x| x.position_m)
                    .unwrap_or([0.0, 0.0])
            };
            let (a, b) = (pos(from), pos(to));
            (a[0] - b[0]).hypot(a[1] - b[1])
        });
        PathSpec {
            fiber_length_m: fiber,
            vnf_chain: link.vnf_chain.clone(),
            propagation_us_per_m: link
                .propagation_us_per_m
                .unwrap_or(DEFAULT_PROPAGATION_US_PER_M),
        }
    }
}

/// Summary of one solved link.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinkReport {
    pub from: HostId,
    pub to: HostId,
    pub load: f64,
    pub converged: bool,
    pub iterations: usize,
    pub loss_probability: f64,
    pub path_latency_us: f64,
    /// Quantile at the scenario confidence, path latency included.
    pub percentile_us: Option<f64>,
    pub mean_us: Option<f64>,
    pub cdf_file: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SystemReport {
    pub system_id: String,
    pub cost_matrices: Vec<CostMatrix>,
    pub zone_tables: Vec<ZoneTable>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RequestReport {
    pub app_id: String,
    pub service_id: String,
    pub system_id: String,
    pub correlation_id: String,
    pub response: String,
    pub decision: Option<Decision>,
    pub elapsed_us: f64,
    pub replay_violations: Vec<String>,
    pub baseline: Option<BaselineComparison>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub tool: String,
    pub version: String,
    pub config_sha256: String,
    pub scenario: String,
    pub seed: u64,
    pub links: Vec<LinkReport>,
    pub systems: Vec<SystemReport>,
    pub requests: Vec<RequestReport>,
    pub trace_file: String,
    pub warnings: Vec<String>,
}

impl RunReport {
    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("report serializes");
        s.push('\n');
        s
    }

    pub fn request(&self, app_id: &str) -> Option<&RequestReport> {
        self.requests.iter().find(|r| r.app_id == app_id)
    }
}

/// A latency law laid out for CDF export.
#[derive(Debug, Clone, PartialEq)]
pub struct CdfExport {
    pub file_name: String,
    pub pmf: Pmf,
    pub quantum_us: f64,
    pub offset_us: f64,
}

/// Report plus the side files it references.
#[derive(Debug, Clone)]
pub struct RunOutput {
    pub report: RunReport,
    pub cdfs: Vec<CdfExport>,
    pub trace: Vec<TraceRecord>,
    /// Every system's full snapshot, after merging exposures, keyed by id.
    pub snapshots: BTreeMap<String, SystemSnapshot>,
}

pub const REPORT_FILE: &str = "report.json";
pub const TRACE_FILE: &str = "trace.txt";

impl RunOutput {
    pub fn write(&self, dir: &Path) -> Result<(), RunError> {
        let wrap = |path: PathBuf| move |source| RunError::Write { path, source };
        fs::create_dir_all(dir).map_err(wrap(dir.to_path_buf()))?;
        let report = dir.join(REPORT_FILE);
        fs::write(&report, self.report.to_json()).map_err(wrap(report.clone()))?;
        for c in &self.cdfs {
            let p = dir.join(&c.file_name);
            let f = fs::File::create(&p).map_err(wrap(p.clone()))?;
            export_cdf(&c.pmf, c.quantum_us, c.offset_us, io::BufWriter::new(f))
                .map_err(wrap(p.clone()))?;
        }
        let t = dir.join(TRACE_FILE);
        let f = fs::File::create(&t).map_err(wrap(t.clone()))?;
        write_trace(&self.trace, io::BufWriter::new(f)).map_err(wrap(t.clone()))?;
        Ok(())
    }
}

pub const CDF_HEADER: &str = "k_us,cumulative_probability";

/// One row per time unit from 0 to the last support point; each value is
/// exactly `cdf_at(k)`.
pub fn export_cdf<W: Write>(
    pmf: &Pmf,
    quantum_us: f64,
    offset_us: f64,
    mut out: W,
) -> io::Result<()> {
    writeln!(out, "{CDF_HEADER}")?;
    for k in 0..pmf.support_end() {
        writeln!(
            out,
            "{},{}",
            offset_us + k as f64 * quantum_us,
            pmf.cdf_at(k)
        )?;
    }
    out.flush()
}

/// Parses an exported CDF back into `(k_us, cumulative)` rows.
pub fn read_cdf(text: &str) -> Result<Vec<(f64, f64)>, String> {
    let mut rows = Vec::new();
    for (i, line) in text.lines().enumerate() {
        if i == 0 && line == CDF_HEADER {
            continue;
        }
        let (a, b) = line
            .split_once(',')
            .ok_or_else(|| format!("line {}: expected two columns", i + 1))?;
        let parse = |s: &str| s.parse::<f64>().map_err(|e| format!("line {}: {e}", i + 1));
        rows.push((parse(a)?, parse(b)?));
    }
    Ok(rows)
}

fn file_safe(h: &HostId) -> String {
    h.as_str()
        .chars()
        .map(|c| {
            if c.is_ascii_alphanumeric() || c == '-' || c == '_' {
                c
            } else {
                '_'
            }
        })
        .collect()
}

struct SolvedLink {
    from: HostId,
    to: HostId,
    result: StationaryResult,
    delay: DelayModel,
}

/// Executes a scenario. Deterministic for fixed input; `exec` only changes
/// how the work is scheduled.
pub fn run(scenario: &Scenario, exec: Exec) -> Result<RunOutput, RunError> {
    scenario.validate()?;
    let catalog = scenario.catalog()?;
    let mut warnings = Vec::new();

    // Solve every link once.
    let directed = scenario.directed_links();
    let mut models = Vec::with_capacity(directed.len());
    for (from, to, link) in &directed {
        let id = format!("{from}->{to}");
        models.push(link.model.build(&id).map_err(|source| RunError::Model {
            link: id.clone(),
            source,
        })?);
    }
    let solver = SolverConfig {
        exec,
        ..scenario.solver
    };
    let results = solve_paths(&models, &solver, exec);
    let mut solved = Vec::with_capacity(directed.len());
    for ((from, to, link), result) in directed.iter().zip(results) {
        let result = result.map_err(|source| RunError::Model {
            link: format!("{from}->{to}"),
            source,
        })?;
        if !result.converged {
            warnings.push(format!(
                "link {from}->{to}: solver stopped after {} iterations without converging",
                result.iterations
            ));
        }
        let spec = scenario.path_spec(from, to, link);
        let path_us = estimate_path_latency(&spec, &catalog)?;
        let delay = DelayModel::new(result.total.clone(), path_us, scenario.quantum_us)
            .expect("validated path latency and quantum");
        solved.push(SolvedLink {
            from: from.clone(),
            to: to.clone(),
            result,
            delay,
        });
    }

    let links: Vec<LinkReport> = solved
        .iter()
        .map(|s| LinkReport {
            from: s.from.clone(),
            to: s.to.clone(),
            load: s.result.load,
            converged: s.result.converged,
            iterations: s.result.iterations,
            loss_probability: s.result.loss_probability,
            path_latency_us: s.delay.path_latency_us,
            percentile_us: s.delay.percentile_us(scenario.qos.confidence),
            mean_us: s.delay.mean_us(),
            cdf_file: format!("cdf_{}__{}.csv", file_safe(&s.from), file_safe(&s.to)),
        })
        .collect();
    let cdfs = solved
        .iter()
        .zip(&links)
        .map(|(s, r)| CdfExport {
            file_name: r.cdf_file.clone(),
            pmf: s.result.total.clone(),
            quantum_us: scenario.quantum_us,
            offset_us: s.delay.path_latency_us,
        })
        .collect();

    // Per-system knowledge: a link belongs to the system of its producer.
    let systems = scenario.system_hosts();
    let system_of = |h: &HostId| {
        systems
            .iter()
            .find(|(_, hs)| hs.contains(h))
            .map(|(id, _)| id.clone())
            .expect("validated host ownership")
    };
    let offline = OfflineCostConfig {
        statistic: scenario.cost_statistic,
        unit_us: scenario.unit_us,
        quantum_us: scenario.quantum_us,
        solver,
    };
    let mut snapshots = BTreeMap::new();
    let mut system_reports = Vec::new();
    for (system_id, own_hosts) in &systems {
        let mine: Vec<&SolvedLink> = solved
            .iter()
            .filter(|s| own_hosts.contains(&s.to))
            .collect();
        let mut references: BTreeSet<HostId> = own_hosts.clone();
        references.extend(mine.iter().map(|s| s.from.clone()));

        let mut delays: DelayMatrix = BTreeMap::new();
        for s in &mine {
            delays
                .entry(s.from.clone())
                .or_default()
                .insert(s.to.clone(), s.delay.clone());
        }

        let mut costs_out = Vec::new();
        let mut tables = BTreeMap::new();
        for reference in &references {
            let laws: Vec<(HostId, Pmf, f64)> = mine
                .iter()
                .filter(|s| s.from == *reference)
                .map(|s| {
                    (
                        s.to.clone(),
                        s.result.total.clone(),
                        s.delay.path_latency_us,
                    )
                })
                .collect();
            let modelled = costs_from_laws(reference, &laws, &offline)?;
            let mut costs = modelled.costs.clone();
            for h in own_hosts {
                costs.entry(h.clone()).or_insert(Cost::Unmeasured);
            }
            let matrix = CostMatrix::new(reference.clone(), costs, CostSource::Offline)?;
            let mut state = ZoningState::new(
                matrix,
                scenario.boundaries.clone(),
                scenario.cost_statistic,
                scenario.unit_us,
            )?;
            for m in scenario
                .measurements
                .iter()
                .filter(|m| m.reference == *reference && own_hosts.contains(&m.host))
            {
                state.ingest_measurement(&m.host, &m.samples_us)?;
            }
            let table = state.rebuild()?;
            costs_out.push(state.costs().clone());
            tables.insert(reference.clone(), (*table).clone());
        }
        system_reports.push(SystemReport {
            system_id: system_id.clone(),
            cost_matrices: costs_out,
            zone_tables: tables.values().cloned().collect(),
        });
        let snapshot = SystemSnapshot {
            system_id: system_id.clone(),
            hosts: own_hosts.clone(),
            apps: scenario
                .apps
                .iter()
                .filter(|a| own_hosts.contains(&a.host))
                .cloned()
                .collect(),
            services: scenario
                .services
                .iter()
                .filter(|s| own_hosts.contains(&s.host))
                .cloned()
                .collect(),
            zones: tables,
            delays,
            ue_delays: scenario.ue_delays.clone(),
            ue_bound_us: scenario.ue_bound_us,
            objective: scenario.objective,
        };
        snapshot
            .validate()
            .map_err(|e| ScenarioError::Invalid(vec![format!("system `{system_id}`: {e}")]))?;
        snapshots.insert(system_id.clone(), snapshot);
    }

    // Every orchestrator learns what the others expose.
    let exposures: Vec<MeoExposure> = snapshots.values().map(SystemSnapshot::exposure).collect();
    let mut merged = BTreeMap::new();
    for (id, snap) in &snapshots {
        let mut m = snap.clone();
        for e in exposures.iter().filter(|e| e.system_id != *id) {
            m.absorb(e)
                .map_err(|e| ScenarioError::Invalid(vec![format!("systems: {e}")]))?;
        }
        merged.insert(id.clone(), m);
    }

    let mut bus = MessageBus::new(scenario.bus.hop_latency_us, scenario.bus.deadline_us);
    for r in &scenario.bus.unreachable {
        bus = bus.with_unreachable(*r);
    }
    let mut trace = Vec::new();
    let mut requests = Vec::new();
    for req in &scenario.requests {
        let app = scenario
            .apps
            .iter()
            .find(|a| a.app_id == req.app_id)
            .expect("validated app reference");
        let system_id = system_of(&app.host);
        let snapshot = &merged[&system_id];
        let request = ServiceConsumptionRequest {
            app_id: req.app_id.clone(),
            service_id: req.service_id.clone(),
            qos: req.qos.unwrap_or(scenario.qos),
            ue_attachment: req.ue_attachment.clone(),
        };
        let tx = run_transaction(&bus, snapshot, &request);
        let records = tx.records();
        let verdict = replay_trace(&records, tx.decision.as_ref().map(|d| &d.kind));
        let baseline = baseline_for(snapshot, app, &request, scenario)?;
        trace.extend(records);
        requests.push(RequestReport {
            app_id: req.app_id.clone(),
            service_id: req.service_id.clone(),
            system_id,
            correlation_id: tx.correlation_id.clone(),
            response: crate::protocol::Payload::MeoResponse(tx.response.clone())
                .variant()
                .to_string(),
            decision: tx.decision,
            elapsed_us: tx.elapsed_us,
            replay_violations: verdict.violations,
            baseline,
        });
    }

    Ok(RunOutput {
        report: RunReport {
            tool: TOOL_NAME.into(),
            version: TOOL_VERSION.into(),
            config_sha256: scenario.config_hash(),
            scenario: scenario.name.clone(),
            seed: scenario.seed,
            links,
            systems: system_reports,
            requests,
            trace_file: TRACE_FILE.into(),
            warnings,
        },
        cdfs,
        trace,
        snapshots: merged,
    })
}

fn baseline_for(
    snapshot: &SystemSnapshot,
    app: &AppInstance,
    request: &ServiceConsumptionRequest,
    scenario: &Scenario,
) -> Result<Option<BaselineComparison>, RunError> {
    let candidates = snapshot.candidates(&request.service_id);
    let Some(zones) = snapshot.zones.get(&app.host) else {
        return Ok(None);
    };
    if scenario.baseline_trials == 0 || candidates.is_empty() {
        return Ok(None);
    }
    let delays = snapshot.delays.get(&app.host).cloned().unwrap_or_default();
    let cmp = compare_random_baseline(
        &app.host,
        &candidates,
        zones,
        &delays,
        &request.qos,
        scenario.baseline_trials,
        scenario.seed,
    )
    .expect("zone table is keyed by its reference");
    Ok(Some(cmp))
}

/// Zone table straight from an explicit cost list, as used by the CLI.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CostFile {
    pub reference: HostId,
    pub costs: BTreeMap<HostId, u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub boundaries: Option<Vec<ZoneBoundary>>,
}

pub fn parse_json<T: serde::de::DeserializeOwned>(
    text: &str,
    origin: &str,
) -> Result<T, ScenarioError> {
    let de = &mut serde_json::Deserializer::from_str(text);
    serde_path_to_error::deserialize(de).map_err(|e| ScenarioError::Parse {
        path: origin.to_string(),
        field: e.path().to_string(),
        message: e.inner().to_string(),
    })
}

pub fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T, ScenarioError> {
    let text = fs::read_to_string(path).map_err(|source| ScenarioError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    parse_json(&text, &path.display().to_string())
}

pub fn zones_from_costs(
    file: &CostFile,
    boundaries: &[ZoneBoundary],
) -> Result<ZoneTable, ZoningError> {
    let matrix = CostMatrix::new(
        file.reference.clone(),
        file.costs.iter().map(|(h, c)| (h.clone(), Cost::Units(*c))),
        CostSource::Online,
    )?;
    build_zone_table(&matrix, boundaries)
}
