//! Proximity zones around a reference host.
//!
//! A zone is a closed interval of cost units. Boundaries must be pairwise
//! nested or disjoint, which makes interval membership satisfy the enclave
//! rule without any extra bookkeeping.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::latency_composer::{
    cost_units, estimate_path_latency, ComposeError, CotsCatalog, PathSpec,
};
use crate::par::Exec;
use crate::pmf::{Pmf, PmfError, Quantile};
use crate::queue_model::{solve_paths, ModelError, PathModel, SolverConfig};

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub struct HostId(String);

impl HostId {
    pub fn new(id: impl Into<String>) -> Result<Self, ZoningError> {
        let id = id.into();
        if id.trim().is_empty() {
            return Err(ZoningError::InvalidHost("host id is empty".into()));
        }
        Ok(HostId(id))
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl TryFrom<String> for HostId {
    type Error = ZoningError;
    fn try_from(s: String) -> Result<Self, Self::Error> {
        HostId::new(s)
    }
}

impl From<HostId> for String {
    fn from(h: HostId) -> String {
        h.0
    }
}

impl fmt::Display for HostId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

#[derive(Debug, Error)]
pub enum ZoningError {
    #[error("invalid host: {0}")]
    InvalidHost(String),
    #[error("unknown host `{0}`")]
    UnknownHost(HostId),
    #[error("invalid boundaries: {0}")]
    InvalidBoundaries(String),
    #[error("invalid operation: {0}")]
    InvalidOperation(String),
    #[error("no latency samples for host `{0}`")]
    EmptySamples(HostId),
    #[error("no path entry for host `{0}`")]
    MissingPath(HostId),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Compose(#[from] ComposeError),
    #[error(transparent)]
    Pmf(#[from] PmfError),
}

/// Cost from the reference host to another host.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Cost {
    Units(u64),
    /// The statistic is undefined, e.g. the loss exceeds `1 - q`.
    Unreachable,
    /// Known to the topology but never measured or modelled.
    Unmeasured,
}

impl Cost {
    pub fn units(self) -> Option<u64> {
        match self {
            Cost::Units(u) => Some(u),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CostSource {
    Online,
    Offline,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CostMatrix {
    pub reference: HostId,
    /// Always holds the reference with `Units(0)`.
    pub costs: BTreeMap<HostId, Cost>,
    pub source: CostSource,
    pub revision: u64,
}

impl CostMatrix {
    pub fn new(
        reference: HostId,
        costs: impl IntoIterator<Item = (HostId, Cost)>,
        source: CostSource,
    ) -> Result<Self, ZoningError> {
        let mut map: BTreeMap<HostId, Cost> = BTreeMap::new();
        for (h, c) in costs {
            if map.insert(h.clone(), c).is_some() {
                return Err(ZoningError::InvalidHost(format!("duplicate host `{h}`")));
            }
        }
        match map.get(&reference) {
            None | Some(Cost::Units(0)) => {}
            Some(c) => {
                return Err(ZoningError::InvalidHost(format!(
                    "reference `{reference}` has cost {c:?}, expected 0"
                )))
            }
        }
        map.insert(reference.clone(), Cost::Units(0));
        Ok(CostMatrix {
            reference,
            costs: map,
            source,
            revision: 0,
        })
    }

    pub fn cost(&self, host: &HostId) -> Option<Cost> {
        self.costs.get(host).copied()
    }
}

/// Closed cost interval `[min_cost, max_cost]`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ZoneBoundary {
    pub min_cost: u64,
    pub max_cost: u64,
}

impl From<(u64, u64)> for ZoneBoundary {
    fn from((min_cost, max_cost): (u64, u64)) -> Self {
        ZoneBoundary { min_cost, max_cost }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Zone {
    pub zone_id: u32,
    pub min_cost: u64,
    pub max_cost: u64,
    pub members: BTreeSet<HostId>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ZoneTable {
    pub reference: HostId,
    pub zones: Vec<Zone>,
    pub revision: u64,
}

impl ZoneTable {
    /// Smallest zone containing `host`.
    pub fn innermost_zone(&self, host: &HostId) -> Option<&Zone> {
        self.zones.iter().find(|z| z.members.contains(host))
    }

    pub fn is_zoned(&self, host: &HostId) -> bool {
        self.innermost_zone(host).is_some()
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("zone table serializes")
    }
}

pub fn validate_boundaries(boundaries: &[ZoneBoundary]) -> Result<(), ZoningError> {
    if boundaries.is_empty() {
        return Err(ZoningError::InvalidBoundaries("no zones given".into()));
    }
    for (k, b) in boundaries.iter().enumerate() {
        if b.min_cost > b.max_cost {
            return Err(ZoningError::InvalidBoundaries(format!(
                "zone {} has min {} above max {}",
                k + 1,
                b.min_cost,
                b.max_cost
            )));
        }
        if k > 0 && boundaries[k - 1].max_cost >= b.max_cost {
            return Err(ZoningError::InvalidBoundaries(format!(
                "zone {} max {} does not exceed zone {} max {}",
                k + 1,
                b.max_cost,
                k,
                boundaries[k - 1].max_cost
            )));
        }
    }
    // Max is strictly increasing, so `a` before `b` is nested iff
    // a.min >= b.min and disjoint iff a.max < b.min.
    for (i, a) in boundaries.iter().enumerate() {
        for (j, b) in boundaries.iter().enumerate().skip(i + 1) {
            let nested = a.min_cost >= b.min_cost;
            let disjoint = a.max_cost < b.min_cost;
            if !nested && !disjoint {
                return Err(ZoningError::InvalidBoundaries(format!(
                    "zones {} [{}, {}] and {} [{}, {}] partially overlap",
                    i + 1,
                    a.min_cost,
                    a.max_cost,
                    j + 1,
                    b.min_cost,
                    b.max_cost
                )));
            }
        }
    }
    Ok(())
}

/// Zone `k` holds exactly the hosts whose cost lies in boundary `k`.
pub fn build_zone_table(
    costs: &CostMatrix,
    boundaries: &[ZoneBoundary],
) -> Result<ZoneTable, ZoningError> {
    validate_boundaries(boundaries)?;
    let zones = boundaries
        .iter()
        .enumerate()
        .map(|(k, b)| Zone {
            zone_id: k as u32 + 1,
            min_cost: b.min_cost,
            max_cost: b.max_cost,
            members: costs
                .costs
                .iter()
                .filter_map(|(h, c)| match c {
                    Cost::Units(u) if (b.min_cost..=b.max_cost).contains(u) => Some(h.clone()),
                    _ => None,
                })
                .collect(),
        })
        .collect();
    Ok(ZoneTable {
        reference: costs.reference.clone(),
        zones,
        revision: costs.revision,
    })
}

/// Scalar summary used to turn a latency law or a sample set into a cost.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Statistic {
    Mean,
    Percentile(f64),
}

impl Default for Statistic {
    fn default() -> Self {
        Statistic::Percentile(0.95)
    }
}

impl Statistic {
    pub fn validate(self) -> Result<(), ZoningError> {
        match self {
            Statistic::Percentile(q) if !(q > 0.0 && q <= 1.0) => Err(
                ZoningError::InvalidOperation(format!("percentile level {q} outside (0, 1]")),
            ),
            _ => Ok(()),
        }
    }

    /// Value in time units; `None` when the law cannot reach the level.
    pub fn of_pmf(self, p: &Pmf) -> Result<Option<f64>, PmfError> {
        match self {
            Statistic::Mean if p.is_zero() => Ok(None),
            Statistic::Mean => p.mean().map(Some),
            Statistic::Percentile(q) => Ok(match p.percentile(q)? {
                Quantile::At(k) => Some(k as f64),
                Quantile::Infeasible => None,
            }),
        }
    }

    /// Nearest-rank value over a non-empty sample set.
    pub fn of_samples(self, samples: &[f64]) -> f64 {
        debug_assert!(!samples.is_empty());
        match self {
            Statistic::Mean => samples.iter().sum::<f64>() / samples.len() as f64,
            Statistic::Percentile(q) => {
                let mut sorted = samples.to_vec();
                sorted.sort_by(f64::total_cmp);
                let rank = ((q * sorted.len() as f64) - 1e-9).ceil().max(1.0) as usize;
                sorted[rank.min(sorted.len()) - 1]
            }
        }
    }
}

/// Parameters for turning path models into costs.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OfflineCostConfig {
    pub statistic: Statistic,
    pub unit_us: f64,
    /// Microseconds per model time unit.
    pub quantum_us: f64,
    pub solver: SolverConfig,
}

impl Default for OfflineCostConfig {
    fn default() -> Self {
        OfflineCostConfig {
            statistic: Statistic::default(),
            unit_us: 10.0,
            quantum_us: 1.0,
            solver: SolverConfig::default(),
        }
    }
}

/// Model-derived costs: `cost_units(statistic(d) + path latency)`.
pub fn offline_costs(
    reference: &HostId,
    paths: &BTreeMap<HostId, (PathModel, PathSpec)>,
    catalog: &CotsCatalog,
    config: &OfflineCostConfig,
    exec: Exec,
) -> Result<CostMatrix, ZoningError> {
    config.statistic.validate()?;
    if !(config.unit_us > 0.0 && config.quantum_us > 0.0) {
        return Err(ZoningError::InvalidOperation(
            "cost unit and quantum must be positive".into(),
        ));
    }
    let targets: Vec<(&HostId, &(PathModel, PathSpec))> =
        paths.iter().filter(|(h, _)| *h != reference).collect();
    let models: Vec<PathModel> = targets.iter().map(|(_, (m, _))| m.clone()).collect();
    let solved = solve_paths(&models, &config.solver, exec);

    let mut laws = Vec::with_capacity(targets.len());
    for ((host, (_, spec)), result) in targets.into_iter().zip(solved) {
        laws.push((
            host.clone(),
            result?.total,
            estimate_path_latency(spec, catalog)?,
        ));
    }
    costs_from_laws(reference, &laws, config)
}

/// Costs from already solved delay laws (model time units) and path
/// latencies (microseconds).
pub fn costs_from_laws(
    reference: &HostId,
    laws: &[(HostId, Pmf, f64)],
    config: &OfflineCostConfig,
) -> Result<CostMatrix, ZoningError> {
    config.statistic.validate()?;
    let mut costs = Vec::with_capacity(laws.len());
    for (host, total, path_us) in laws.iter().filter(|(h, _, _)| h != reference) {
        let cost = match config.statistic.of_pmf(total)? {
            Some(units) => Cost::Units(cost_units(
                units * config.quantum_us + path_us,
                config.unit_us,
            )),
            None => Cost::Unreachable,
        };
        costs.push((host.clone(), cost));
    }
    CostMatrix::new(reference.clone(), costs, CostSource::Offline)
}

/// Host-set edit applied by [`ZoningState::rebuild_on_topology_change`].
#[derive(Debug, Clone, Default, PartialEq)]
pub struct TopologyChange {
    /// New hosts with their cost, if already known.
    pub added: Vec<(HostId, Option<u64>)>,
    pub removed: Vec<HostId>,
}

/// Single-writer owner of the cost matrix and the zone table.
///
/// Readers take [`ZoningState::snapshot`]; an `Arc` handed out earlier
/// never changes under them.
#[derive(Debug, Clone)]
pub struct ZoningState {
    costs: CostMatrix,
    boundaries: Vec<ZoneBoundary>,
    statistic: Statistic,
    unit_us: f64,
    decay: f64,
    estimates: BTreeMap<HostId, f64>,
    table: Arc<ZoneTable>,
    pending_rebuild: bool,
}

/// Weight given to the newest sample batch.
pub const DEFAULT_EWMA_DECAY: f64 = 0.2;

impl ZoningState {
    pub fn new(
        costs: CostMatrix,
        boundaries: Vec<ZoneBoundary>,
        statistic: Statistic,
        unit_us: f64,
    ) -> Result<Self, ZoningError> {
        statistic.validate()?;
        if !(unit_us > 0.0) {
            return Err(ZoningError::InvalidOperation(format!(
                "cost unit {unit_us} must be positive"
            )));
        }
        let table = Arc::new(build_zone_table(&costs, &boundaries)?);
        Ok(ZoningState {
            costs,
            boundaries,
            statistic,
            unit_us,
            decay: DEFAULT_EWMA_DECAY,
            estimates: BTreeMap::new(),
            table,
            pending_rebuild: false,
        })
    }

    pub fn with_decay(mut self, decay: f64) -> Result<Self, ZoningError> {
        if !(decay > 0.0 && decay <= 1.0) {
            return Err(ZoningError::InvalidOperation(format!(
                "decay {decay} outside (0, 1]"
            )));
        }
        self.decay = decay;
        Ok(self)
    }

    pub fn costs(&self) -> &CostMatrix {
        &self.costs
    }

    pub fn boundaries(&self) -> &[ZoneBoundary] {
        &self.boundaries
    }

    pub fn revision(&self) -> u64 {
        self.costs.revision
    }

    pub fn pending_rebuild(&self) -> bool {
        self.pending_rebuild
    }

    pub fn snapshot(&self) -> Arc<ZoneTable> {
        Arc::clone(&self.table)
    }

    /// Folds a batch of observed latencies into the host's estimate.
    ///
    /// The first batch for a host sets the estimate directly; later ones
    /// move it by `decay` towards the batch statistic.
    pub fn ingest_measurement(
        &mut self,
        host: &HostId,
        samples_us: &[f64],
    ) -> Result<&CostMatrix, ZoningError> {
        if !self.costs.costs.contains_key(host) {
            return Err(ZoningError::UnknownHost(host.clone()));
        }
        if samples_us.is_empty() {
            return Err(ZoningError::EmptySamples(host.clone()));
        }
        if let Some(bad) = samples_us.iter().find(|s| !(s.is_finite() && **s >= 0.0)) {
            return Err(ZoningError::InvalidOperation(format!(
                "latency sample {bad} for `{host}` is not a non-negative number"
            )));
        }
        if *host == self.costs.reference {
            return Err(ZoningError::InvalidOperation(
                "the reference host has cost 0 by definition".into(),
            ));
        }
        let batch = self.statistic.of_samples(samples_us);
        let estimate = match self.estimates.get(host) {
            Some(old) => (1.0 - self.decay) * old + self.decay * batch,
            None => batch,
        };
        self.estimates.insert(host.clone(), estimate);
        self.costs.costs.insert(
            host.clone(),
            Cost::Units(cost_units(estimate, self.unit_us)),
        );
        self.costs.source = CostSource::Online;
        self.costs.revision += 1;
        self.pending_rebuild = true;
        Ok(&self.costs)
    }

    /// Rebuilds the table from the current costs.
    pub fn rebuild(&mut self) -> Result<Arc<ZoneTable>, ZoningError> {
        self.table = Arc::new(build_zone_table(&self.costs, &self.boundaries)?);
        self.pending_rebuild = false;
        Ok(self.snapshot())
    }

    pub fn rebuild_on_topology_change(
        &mut self,
        change: &TopologyChange,
    ) -> Result<Arc<ZoneTable>, ZoningError> {
        let mut next = self.costs.costs.clone();
        for h in &change.removed {
            if *h == self.costs.reference {
                return Err(ZoningError::InvalidOperation(format!(
                    "cannot remove reference host `{h}`; build a new table instead"
                )));
            }
            if next.remove(h).is_none() {
                return Err(ZoningError::UnknownHost(h.clone()));
            }
        }
        for (h, cost) in &change.added {
            let c = cost.map_or(Cost::Unmeasured, Cost::Units);
            if next.insert(h.clone(), c).is_some() {
                return Err(ZoningError::InvalidHost(format!(
                    "host `{h}` already present"
                )));
            }
        }
        for h in &change.removed {
            self.estimates.remove(h);
        }
        self.costs.costs = next;
        self.costs.revision += 1;
        self.rebuild()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn h(s: &str) -> HostId {
        HostId::new(s).unwrap()
    }

    fn matrix(costs: &[(&str, u64)]) -> CostMatrix {
        CostMatrix::new(
            h(costs[0].0),
            costs.iter().map(|(n, c)| (h(n), Cost::Units(*c))),
            CostSource::Offline,
        )
        .unwrap()
    }

    fn members(t: &ZoneTable, k: usize) -> Vec<&str> {
        t.zones[k].members.iter().map(HostId::as_str).collect()
    }

    fn table1_bounds() -> Vec<ZoneBoundary> {
        vec![(0, 5).into(), (0, 10).into()]
    }

    #[test]
    fn table_one_membership() {
        let t = build_zone_table(
            &matrix(&[("h1", 0), ("h2", 8), ("h3", 7)]),
            &table1_bounds(),
        )
        .unwrap();
        assert_eq!(members(&t, 0), ["h1"]);
        assert_eq!(members(&t, 1), ["h1", "h2", "h3"]);
        assert_eq!(t.zones[1].zone_id, 2);
    }

    #[test]
    fn single_host_and_unzoned_hosts() {
        let t = build_zone_table(&matrix(&[("ref", 0)]), &[(0, 5).into()]).unwrap();
        assert_eq!(members(&t, 0), ["ref"]);

        let t = build_zone_table(
            &matrix(&[("h1", 0), ("h2", 3), ("h3", 12)]),
            &table1_bounds(),
        )
        .unwrap();
        assert_eq!(members(&t, 0), ["h1", "h2"]);
        assert_eq!(members(&t, 1), ["h1", "h2"]);
        assert!(!t.is_zoned(&h("h3")));
    }

    #[test]
    fn boundary_validation() {
        let m = matrix(&[("h1", 0)]);
        assert!(build_zone_table(&m, &[]).is_err());
        assert!(build_zone_table(&m, &[(6, 5).into()]).is_err());
        assert!(build_zone_table(&m, &[(0, 10).into(), (0, 5).into()]).is_err());
        // [0,5] and [3,10] partially overlap.
        assert!(matches!(
            build_zone_table(&m, &[(0, 5).into(), (3, 10).into()]),
            Err(ZoningError::InvalidBoundaries(_))
        ));
        // Annular and disjoint zones are allowed.
        assert!(build_zone_table(&m, &[(0, 5).into(), (6, 10).into(), (0, 20).into()]).is_ok());
    }

    #[test]
    fn invalid_host_ids_and_reference_cost() {
        assert!(HostId::new("  ").is_err());
        assert!(serde_json::from_str::<HostId>("\"\"").is_err());
        assert!(CostMatrix::new(h("a"), [(h("a"), Cost::Units(3))], CostSource::Online).is_err());
        let m = CostMatrix::new(h("a"), [], CostSource::Online).unwrap();
        assert_eq!(m.cost(&h("a")), Some(Cost::Units(0)));
    }

    fn det_model(service: usize) -> PathModel {
        PathModel::simple("p", Pmf::delta(1000), Pmf::delta(service), 10_000).unwrap()
    }

    #[test]
    fn offline_costs_from_models() {
        let catalog = CotsCatalog::builtin();
        let cfg = OfflineCostConfig::default();
        let r = h("ref");
        let only_ref = BTreeMap::from([(r.clone(), (det_model(1), PathSpec::new(0.0, vec![])))]);
        let m = offline_costs(&r, &only_ref, &catalog, &cfg, Exec::Sequential).unwrap();
        assert_eq!(m.costs.len(), 1);
        assert_eq!(m.cost(&r), Some(Cost::Units(0)));

        let paths = BTreeMap::from([
            (h("a"), (det_model(40), PathSpec::new(0.0, vec![]))),
            (h("b"), (det_model(40), PathSpec::new(0.0, vec![]))),
        ]);
        let m = offline_costs(&r, &paths, &catalog, &cfg, Exec::Parallel).unwrap();
        assert_eq!(m.cost(&h("a")), Some(Cost::Units(4)));
        assert_eq!(m.cost(&h("a")), m.cost(&h("b")));
        assert_eq!(m.source, CostSource::Offline);
    }

    #[test]
    fn offline_cost_is_unreachable_when_loss_exceeds_level() {
        // A = 1, B = 2, L = 5 loses half of all packets.
        let lossy = PathModel::simple("x", Pmf::delta(1), Pmf::delta(2), 5).unwrap();
        let paths = BTreeMap::from([(h("x"), (lossy, PathSpec::new(0.0, vec![])))]);
        let m = offline_costs(
            &h("r"),
            &paths,
            &CotsCatalog::builtin(),
            &OfflineCostConfig::default(),
            Exec::Sequential,
        )
        .unwrap();
        assert_eq!(m.cost(&h("x")), Some(Cost::Unreachable));
        let t = build_zone_table(&m, &[(0, u64::MAX).into()]).unwrap();
        assert!(!t.is_zoned(&h("x")));
    }

    fn table1_state() -> ZoningState {
        ZoningState::new(
            matrix(&[("h1", 0), ("h2", 8), ("h3", 7)]),
            table1_bounds(),
            Statistic::default(),
            10.0,
        )
        .unwrap()
    }

    #[test]
    fn ingest_updates_costs_and_schedules_rebuild() {
        let mut s = table1_state();
        let c = s.ingest_measurement(&h("h2"), &[50.0; 8]).unwrap();
        assert_eq!(c.cost(&h("h2")), Some(Cost::Units(5)));
        assert_eq!(s.revision(), 1);
        assert!(s.pending_rebuild());
        let t = s.rebuild().unwrap();
        assert_eq!(members(&t, 0), ["h1", "h2"]);
        assert!(!s.pending_rebuild());

        assert!(matches!(
            s.ingest_measurement(&h("zz"), &[1.0]),
            Err(ZoningError::UnknownHost(_))
        ));
        assert!(matches!(
            s.ingest_measurement(&h("h2"), &[]),
            Err(ZoningError::EmptySamples(_))
        ));
    }

    #[test]
    fn rising_cost_drops_host_from_every_zone() {
        let mut s = ZoningState::new(
            matrix(&[("h1", 0), ("h2", 4)]),
            table1_bounds(),
            Statistic::default(),
            10.0,
        )
        .unwrap();
        assert_eq!(members(&s.snapshot(), 0), ["h1", "h2"]);
        let before = s.snapshot();
        s.ingest_measurement(&h("h2"), &[110.0]).unwrap();
        assert_eq!(s.costs().cost(&h("h2")), Some(Cost::Units(11)));
        let after = s.rebuild().unwrap();
        assert!(!after.is_zoned(&h("h2")));
        // Earlier snapshots are untouched.
        assert!(before.is_zoned(&h("h2")));
    }

    #[test]
    fn ewma_moves_a_fifth_towards_new_batches() {
        let mut s = table1_state();
        s.ingest_measurement(&h("h3"), &[100.0]).unwrap();
        s.ingest_measurement(&h("h3"), &[200.0]).unwrap();
        // 0.8 * 100 + 0.2 * 200 = 120
        assert_eq!(s.costs().cost(&h("h3")), Some(Cost::Units(12)));
    }

    #[test]
    fn topology_changes() {
        let mut s = table1_state();
        let t = s
            .rebuild_on_topology_change(&TopologyChange {
                added: vec![(h("h4"), Some(3)), (h("h5"), None)],
                removed: vec![],
            })
            .unwrap();
        assert_eq!(members(&t, 0), ["h1", "h4"]);
        assert!(!t.is_zoned(&h("h5")));
        assert_eq!(s.costs().cost(&h("h5")), Some(Cost::Unmeasured));

        let mut s = table1_state();
        let t = s
            .rebuild_on_topology_change(&TopologyChange {
                added: vec![],
                removed: vec![h("h3")],
            })
            .unwrap();
        assert_eq!(members(&t, 1), ["h1", "h2"]);

        let before = s.snapshot();
        let t = s
            .rebuild_on_topology_change(&TopologyChange::default())
            .unwrap();
        assert_eq!(t.zones, before.zones);
        assert!(t.revision > before.revision);

        assert!(matches!(
            s.rebuild_on_topology_change(&TopologyChange {
                added: vec![],
                removed: vec![h("h1")]
            }),
            Err(ZoningError::InvalidOperation(_))
        ));
    }

    #[test]
    fn sample_statistics() {
        let s = [5.0, 1.0, 4.0, 2.0, 3.0];
        assert_eq!(Statistic::Mean.of_samples(&s), 3.0);
        assert_eq!(Statistic::Percentile(0.95).of_samples(&s), 5.0);
        assert_eq!(Statistic::Percentile(0.4).of_samples(&s), 2.0);
        assert_eq!(Statistic::Percentile(1.0).of_samples(&s), 5.0);
    }

    #[test]
    fn zone_table_json_mirrors_columns() {
        let t = build_zone_table(&matrix(&[("h1", 0), ("h2", 8)]), &table1_bounds()).unwrap();
        let v: serde_json::Value = serde_json::from_str(&t.to_json()).unwrap();
        let z = &v["zones"][1];
        assert_eq!(z["zone_id"], 2);
        assert_eq!(z["min_cost"], 0);
        assert_eq!(z["max_cost"], 10);
        assert_eq!(z["members"], serde_json::json!(["h1", "h2"]));
    }

    // Random pairwise nested-or-disjoint boundary sets with distinct maxima.
    fn laminar() -> impl Strategy<Value = Vec<ZoneBoundary>> {
        proptest::collection::vec((0u64..40, 0u64..40), 1..8).prop_map(|pairs| {
            let mut set: Vec<(u64, u64)> = Vec::new();
            for (a, b) in pairs {
                let (lo, hi) = (a.min(b), a.max(b));
                let ok = set.iter().all(|&(l, u)| {
                    let nested = (lo >= l && hi <= u) || (l >= lo && u <= hi);
                    let disjoint = hi < l || u < lo;
                    (nested || disjoint) && u != hi
                });
                if ok {
                    set.push((lo, hi));
                }
            }
            set.sort_by_key(|&(_, u)| u);
            set.into_iter().map(ZoneBoundary::from).collect()
        })
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(1000))]

        #[test]
        fn enclave_rule_holds(
            costs in proptest::collection::vec(0u64..50, 0..12),
            bounds in laminar(),
        ) {
            let hosts: Vec<(HostId, Cost)> = costs
                .iter()
                .enumerate()
                .map(|(i, &c)| (h(&format!("h{}", i + 2)), Cost::Units(c)))
                .collect();
            let m = CostMatrix::new(h("h1"), hosts.clone(), CostSource::Offline).unwrap();
            let t = build_zone_table(&m, &bounds).unwrap();
            for a in &t.zones {
                for h in &a.members {
                    let c = m.cost(h).unwrap().units().unwrap();
                    prop_assert!(a.min_cost <= c && c <= a.max_cost);
                }
                for b in &t.zones {
                    if a.max_cost <= b.max_cost && a.min_cost >= b.min_cost {
                        prop_assert!(a.members.is_subset(&b.members));
                    }
                }
            }
            // Membership does not depend on host enumeration order.
            let mut rev = hosts;
            rev.reverse();
            let m2 = CostMatrix::new(h("h1"), rev, CostSource::Offline).unwrap();
            prop_assert_eq!(&build_zone_table(&m2, &bounds).unwrap().zones, &t.zones);
            prop_assert_eq!(build_zone_table(&m, &bounds).unwrap(), t);
        }
    }
}
