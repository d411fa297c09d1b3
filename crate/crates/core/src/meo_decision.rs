//! Orchestrator decision: endorse a producer, relocate the consumer, or reject.
//!
//! Every function here is pure over a [`SystemSnapshot`], so concurrent
//! requests against one snapshot see the same zones and delay models.

use std::cmp::Ordering;
use std::collections::{BTreeMap, BTreeSet};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::latency_composer::cost_units;
use crate::pmf::{Pmf, Quantile, PROB_TOLERANCE};
use crate::queue_model::QosRequirement;
use crate::zoning::{HostId, ZoneTable};

#[derive(Debug, Error)]
pub enum DecisionError {
    #[error("zone table is centred on `{table}`, not on consumer `{consumer}`")]
    ReferenceMismatch { table: HostId, consumer: HostId },
    #[error("invalid snapshot: {0}")]
    InvalidSnapshot(String),
    #[error("configuration conflict: {0}")]
    Conflict(String),
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ServiceInstance {
    pub service_id: String,
    pub host: HostId,
    pub endpoint: String,
    /// Set on instances learned from another system's orchestrator.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub system_id: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AppInstance {
    pub app_id: String,
    pub host: HostId,
    pub ue_attachment: String,
}

/// Latency of consuming a producer from one consumer host: the queueing
/// delay law in model time units plus a fixed path latency.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DelayModel {
    pub total: Pmf,
    pub path_latency_us: f64,
    pub quantum_us: f64,
}

impl DelayModel {
    pub fn new(total: Pmf, path_latency_us: f64, quantum_us: f64) -> Result<Self, DecisionError> {
        if !(path_latency_us >= 0.0 && path_latency_us.is_finite() && quantum_us > 0.0) {
            return Err(DecisionError::InvalidSnapshot(format!(
                "delay model with path {path_latency_us} us and quantum {quantum_us} us"
            )));
        }
        Ok(DelayModel {
            total,
            path_latency_us,
            quantum_us,
        })
    }

    pub fn loss_probability(&self) -> f64 {
        (1.0 - self.total.total_mass()).max(0.0)
    }

    /// `q`-quantile in microseconds; `None` if the law never reaches `q`.
    pub fn percentile_us(&self, q: f64) -> Option<f64> {
        match self.total.percentile(q).ok()? {
            Quantile::At(k) => Some(k as f64 * self.quantum_us + self.path_latency_us),
            Quantile::Infeasible => None,
        }
    }

    /// Mean over accepted packets, in microseconds.
    pub fn mean_us(&self) -> Option<f64> {
        let m = self.total.mean().ok()?;
        Some(m * self.quantum_us + self.path_latency_us)
    }

    /// `P(latency <= bound)` on the defective law.
    pub fn cdf_at_us(&self, bound_us: f64) -> f64 {
        let room = bound_us - self.path_latency_us;
        if room < 0.0 {
            return 0.0;
        }
        self.total
            .cdf_at((room / self.quantum_us + 1e-9).floor() as usize)
    }

    pub fn meets(&self, req: &QosRequirement) -> bool {
        self.cdf_at_us(req.latency_bound_us) >= req.confidence - PROB_TOLERANCE
    }

    /// `(latency in us, mass)` atoms.
    pub fn atoms_us(&self) -> impl Iterator<Item = (f64, f64)> + '_ {
        self.total
            .iter()
            .map(|(k, m)| (k as f64 * self.quantum_us + self.path_latency_us, m))
    }
}

/// `delays[consumer][producer]`.
pub type DelayMatrix = BTreeMap<HostId, BTreeMap<HostId, DelayModel>>;

/// `ue[attachment][host]`: user-plane delay in microseconds.
pub type UeDelayMatrix = BTreeMap<String, BTreeMap<HostId, f64>>;

/// What the orchestrator minimizes among feasible producers.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Objective {
    /// Latency quantile at the requirement's confidence level.
    #[default]
    MinPercentile,
    MinMean,
    /// Percentile rounded up to whole cost units.
    MinCostUnits {
        unit_us: f64,
    },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RejectReason {
    UnknownApp,
    UnknownService,
    NoCandidates,
    NoFeasibleHost,
    UeBoundViolated,
    Timeout,
}

impl RejectReason {
    pub fn label(&self) -> &'static str {
        match self {
            RejectReason::UnknownApp => "unknown-app",
            RejectReason::UnknownService => "unknown-service",
            RejectReason::NoCandidates => "no-candidates",
            RejectReason::NoFeasibleHost => "no-feasible-host",
            RejectReason::UeBoundViolated => "ue-bound-violated",
            RejectReason::Timeout => "timeout",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    Selected,
    Feasible,
    NotZoned,
    QosViolated,
    NoDelayModel,
}

/// One candidate as seen from one consumer host.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CandidateEvaluation {
    pub instance: ServiceInstance,
    pub zone_id: Option<u32>,
    pub zone_max_cost: Option<u64>,
    pub percentile_us: Option<f64>,
    pub mean_us: Option<f64>,
    pub loss_probability: Option<f64>,
    pub cdf_at_bound: Option<f64>,
    /// Objective value; set only for feasible candidates.
    pub score: Option<f64>,
    pub verdict: Verdict,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Selection {
    pub chosen: Option<usize>,
    pub evaluations: Vec<CandidateEvaluation>,
}

impl Selection {
    pub fn chosen(&self) -> Option<&CandidateEvaluation> {
        self.chosen.map(|i| &self.evaluations[i])
    }
}

fn score(model: &DelayModel, req: &QosRequirement, objective: Objective) -> Option<f64> {
    match objective {
        Objective::MinPercentile => model.percentile_us(req.confidence),
        Objective::MinMean => model.mean_us(),
        Objective::MinCostUnits { unit_us } => model
            .percentile_us(req.confidence)
            .map(|p| cost_units(p, unit_us) as f64),
    }
}

// Score, then innermost zone bound, then host, then system (local first).
fn rank(a: &CandidateEvaluation, b: &CandidateEvaluation) -> Ordering {
    a.score
        .unwrap_or(f64::INFINITY)
        .total_cmp(&b.score.unwrap_or(f64::INFINITY))
        .then(a.zone_max_cost.cmp(&b.zone_max_cost))
        .then(a.instance.host.cmp(&b.instance.host))
        .then(a.instance.system_id.cmp(&b.instance.system_id))
}

/// Best zoned, QoS-feasible producer for `consumer`.
pub fn select_producer(
    consumer: &HostId,
    candidates: &[ServiceInstance],
    zones: &ZoneTable,
    delays: &BTreeMap<HostId, DelayModel>,
    req: &QosRequirement,
    objective: Objective,
) -> Result<Selection, DecisionError> {
    if zones.reference != *consumer {
        return Err(DecisionError::ReferenceMismatch {
            table: zones.reference.clone(),
            consumer: consumer.clone(),
        });
    }
    let mut evaluations: Vec<CandidateEvaluation> = candidates
        .iter()
        .map(|inst| {
            let zone = zones.innermost_zone(&inst.host);
            let model = delays.get(&inst.host);
            let mut e = CandidateEvaluation {
                instance: inst.clone(),
                zone_id: zone.map(|z| z.zone_id),
                zone_max_cost: zone.map(|z| z.max_cost),
                percentile_us: model.and_then(|m| m.percentile_us(req.confidence)),
                mean_us: model.and_then(DelayModel::mean_us),
                loss_probability: model.map(DelayModel::loss_probability),
                cdf_at_bound: model.map(|m| m.cdf_at_us(req.latency_bound_us)),
                score: None,
                verdict: Verdict::Feasible,
            };
            e.verdict = match model {
                None => Verdict::NoDelayModel,
                Some(_) if zone.is_none() => Verdict::NotZoned,
                Some(m) if !m.meets(req) => Verdict::QosViolated,
                Some(m) => {
                    e.score = score(m, req, objective);
                    Verdict::Feasible
                }
            };
            e
        })
        .collect();
    let chosen = evaluations
        .iter()
        .enumerate()
        .filter(|(_, e)| e.verdict == Verdict::Feasible)
        .min_by(|(_, a), (_, b)| rank(a, b))
        .map(|(i, _)| i);
    if let Some(i) = chosen {
        evaluations[i].verdict = Verdict::Selected;
    }
    Ok(Selection {
        chosen,
        evaluations,
    })
}

/// One relocation target as evaluated during migration search.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MigrationEvaluation {
    pub target: HostId,
    pub ue_delay_us: Option<f64>,
    pub ue_within_bound: bool,
    pub selection: Option<Selection>,
    pub note: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DecisionKind {
    Endorse {
        instance: ServiceInstance,
        predicted_percentile_us: f64,
    },
    Migrate {
        target: HostId,
        then_instance: ServiceInstance,
        ue_delay_us: f64,
        predicted_percentile_us: f64,
    },
    Reject {
        reason: RejectReason,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
pub struct Rationale {
    pub consumer: Option<HostId>,
    pub local: Option<Selection>,
    pub migration: Vec<MigrationEvaluation>,
    pub notes: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Decision {
    pub kind: DecisionKind,
    pub rationale: Rationale,
}

impl Decision {
    fn reject(reason: RejectReason, rationale: Rationale) -> Self {
        Decision {
            kind: DecisionKind::Reject { reason },
            rationale,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ServiceConsumptionRequest {
    pub app_id: String,
    pub service_id: String,
    pub qos: QosRequirement,
    /// Overrides the app's registered attachment point.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ue_attachment: Option<String>,
}

/// Everything one orchestrator knows at a given revision.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SystemSnapshot {
    pub system_id: String,
    pub hosts: BTreeSet<HostId>,
    pub apps: Vec<AppInstance>,
    pub services: Vec<ServiceInstance>,
    /// Zone table per consumer host, keyed by its reference.
    pub zones: BTreeMap<HostId, ZoneTable>,
    pub delays: DelayMatrix,
    pub ue_delays: UeDelayMatrix,
    pub ue_bound_us: f64,
    pub objective: Objective,
}

/// Services, zones and delay summaries one orchestrator shares with another.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MeoExposure {
    pub system_id: String,
    pub hosts: BTreeSet<HostId>,
    pub services: Vec<ServiceInstance>,
    pub zones: BTreeMap<HostId, ZoneTable>,
    pub delays: DelayMatrix,
}

impl MeoExposure {
    pub fn empty(system_id: impl Into<String>) -> Self {
        MeoExposure {
            system_id: system_id.into(),
            hosts: BTreeSet::new(),
            services: Vec::new(),
            zones: BTreeMap::new(),
            delays: BTreeMap::new(),
        }
    }
}

impl SystemSnapshot {
    pub fn validate(&self) -> Result<(), DecisionError> {
        let bad = |m: String| Err(DecisionError::InvalidSnapshot(m));
        if self.system_id.is_empty() {
            return bad("empty system id".into());
        }
        if !(self.ue_bound_us > 0.0) {
            return bad(format!(
                "UE delay bound {} must be positive",
                self.ue_bound_us
            ));
        }
        let mut pairs = BTreeSet::new();
        for s in &self.services {
            if !pairs.insert((&s.service_id, &s.host, &s.system_id)) {
                return bad(format!(
                    "service `{}` listed twice on `{}`",
                    s.service_id, s.host
                ));
            }
        }
        let mut apps = BTreeSet::new();
        for a in &self.apps {
            if !apps.insert(&a.app_id) {
                return bad(format!("app `{}` declared twice", a.app_id));
            }
            if !self.hosts.contains(&a.host) {
                return bad(format!(
                    "app `{}` runs on unknown host `{}`",
                    a.app_id, a.host
                ));
            }
        }
        for (att, row) in &self.ue_delays {
            if let Some((h, d)) = row.iter().find(|(_, d)| !(**d >= 0.0 && d.is_finite())) {
                return bad(format!(
                    "UE delay {d} from `{att}` to `{h}` is not non-negative"
                ));
            }
        }
        for (reference, table) in &self.zones {
            if table.reference != *reference {
                return bad(format!(
                    "zone table under `{reference}` is centred on `{}`",
                    table.reference
                ));
            }
        }
        Ok(())
    }

    /// The part of this snapshot another orchestrator may merge.
    pub fn exposure(&self) -> MeoExposure {
        MeoExposure {
            system_id: self.system_id.clone(),
            hosts: self.hosts.clone(),
            services: self
                .services
                .iter()
                .map(|s| ServiceInstance {
                    system_id: Some(self.system_id.clone()),
                    ..s.clone()
                })
                .collect(),
            zones: self.zones.clone(),
            delays: self.delays.clone(),
        }
    }

    /// Adds a remote system's instances, zone members and delay models.
    ///
    /// Zone tables sharing a reference are merged zone by zone and must use
    /// identical boundaries. Host ids must be disjoint across systems.
    pub fn absorb(&mut self, remote: &MeoExposure) -> Result<(), DecisionError> {
        let conflict = |m: String| Err(DecisionError::Conflict(m));
        if remote.system_id == self.system_id {
            return conflict(format!(
                "system id `{}` used by both orchestrators",
                remote.system_id
            ));
        }
        if let Some(h) = remote.hosts.intersection(&self.hosts).next() {
            return conflict(format!(
                "host `{h}` claimed by systems `{}` and `{}`",
                self.system_id, remote.system_id
            ));
        }
        if let Some(s) = remote
            .services
            .iter()
            .find(|s| !remote.hosts.contains(&s.host))
        {
            return conflict(format!(
                "exposed service `{}` sits on undeclared host `{}`",
                s.service_id, s.host
            ));
        }
        let mut zones = self.zones.clone();
        for (reference, theirs) in &remote.zones {
            match zones.get_mut(reference) {
                None => {
                    zones.insert(reference.clone(), theirs.clone());
                }
                Some(ours) => {
                    let same_bounds = ours.zones.len() == theirs.zones.len()
                        && ours.zones.iter().zip(&theirs.zones).all(|(a, b)| {
                            (a.zone_id, a.min_cost, a.max_cost)
                                == (b.zone_id, b.min_cost, b.max_cost)
                        });
                    if !same_bounds {
                        return conflict(format!(
                            "zone boundaries for `{reference}` differ between systems"
                        ));
                    }
                    for (a, b) in ours.zones.iter_mut().zip(&theirs.zones) {
                        a.members.extend(b.members.iter().cloned());
                    }
                    ours.revision = ours.revision.max(theirs.revision);
                }
            }
        }
        let mut delays = self.delays.clone();
        for (consumer, row) in &remote.delays {
            let ours = delays.entry(consumer.clone()).or_default();
            for (producer, model) in row {
                if ours.insert(producer.clone(), model.clone()).is_some() {
                    return conflict(format!(
                        "delay model `{consumer}` -> `{producer}` exposed twice"
                    ));
                }
            }
        }
        self.zones = zones;
        self.delays = delays;
        self.services
            .extend(remote.services.iter().map(|s| ServiceInstance {
                system_id: Some(remote.system_id.clone()),
                ..s.clone()
            }));
        Ok(())
    }

    pub fn app(&self, app_id: &str) -> Option<&AppInstance> {
        self.apps.iter().find(|a| a.app_id == app_id)
    }

    pub fn candidates(&self, service_id: &str) -> Vec<ServiceInstance> {
        self.services
            .iter()
            .filter(|s| s.service_id == service_id)
            .cloned()
            .collect()
    }

    fn zones_for(&self, host: &HostId) -> ZoneTable {
        self.zones.get(host).cloned().unwrap_or_else(|| ZoneTable {
            reference: host.clone(),
            zones: Vec::new(),
            revision: 0,
        })
    }

    fn delays_for(&self, host: &HostId) -> BTreeMap<HostId, DelayModel> {
        self.delays.get(host).cloned().unwrap_or_default()
    }

    /// Selection from `host`'s own point of view.
    pub fn select_from(
        &self,
        host: &HostId,
        candidates: &[ServiceInstance],
        req: &QosRequirement,
    ) -> Selection {
        select_producer(
            host,
            candidates,
            &self.zones_for(host),
            &self.delays_for(host),
            req,
            self.objective,
        )
        .expect("zones_for is centred on the host")
    }
}

/// Searches relocation targets when the consumer's own host has no
/// feasible producer.
pub fn evaluate_migration(
    snapshot: &SystemSnapshot,
    consumer: &HostId,
    attachment: &str,
    candidates: &[ServiceInstance],
    req: &QosRequirement,
) -> (DecisionKind, Vec<MigrationEvaluation>) {
    let ue_row = snapshot.ue_delays.get(attachment);
    let mut evaluations = Vec::new();
    let mut best_service_side: Option<(CandidateEvaluation, bool)> = None;
    let mut best_qualifying: Option<(HostId, CandidateEvaluation, f64)> = None;

    for target in snapshot.hosts.iter().filter(|h| *h != consumer) {
        let Some(&ue) = ue_row.and_then(|r| r.get(target)) else {
            evaluations.push(MigrationEvaluation {
                target: target.clone(),
                ue_delay_us: None,
                ue_within_bound: false,
                selection: None,
                note: Some(format!("no UE delay estimate from `{attachment}`; skipped")),
            });
            continue;
        };
        let ue_ok = ue <= snapshot.ue_bound_us;
        let selection = snapshot.select_from(target, candidates, req);
        if let Some(chosen) = selection.chosen() {
            let better = |cur: &CandidateEvaluation| rank(chosen, cur) == Ordering::Less;
            if best_service_side.as_ref().is_none_or(|(c, _)| better(c)) {
                best_service_side = Some((chosen.clone(), ue_ok));
            }
            if ue_ok && best_qualifying.as_ref().is_none_or(|(_, c, _)| better(c)) {
                best_qualifying = Some((target.clone(), chosen.clone(), ue));
            }
        }
        evaluations.push(MigrationEvaluation {
            target: target.clone(),
            ue_delay_us: Some(ue),
            ue_within_bound: ue_ok,
            selection: Some(selection),
            note: None,
        });
    }

    let kind = match (best_qualifying, best_service_side) {
        (Some((target, chosen, ue)), _) => DecisionKind::Migrate {
            target,
            predicted_percentile_us: chosen.percentile_us.expect("feasible implies a percentile"),
            then_instance: chosen.instance,
            ue_delay_us: ue,
        },
        (None, Some(_)) => DecisionKind::Reject {
            reason: RejectReason::UeBoundViolated,
        },
        (None, None) => DecisionKind::Reject {
            reason: RejectReason::NoFeasibleHost,
        },
    };
    (kind, evaluations)
}

/// Endorse locally if possible, otherwise look for a relocation target.
pub fn decide(request: &ServiceConsumptionRequest, snapshot: &SystemSnapshot) -> Decision {
    let mut rationale = Rationale::default();
    let Some(app) = snapshot.app(&request.app_id) else {
        rationale
            .notes
            .push(format!("app `{}` is not registered", request.app_id));
        return Decision::reject(RejectReason::UnknownApp, rationale);
    };
    rationale.consumer = Some(app.host.clone());
    let candidates = snapshot.candidates(&request.service_id);
    if candidates.is_empty() {
        rationale
            .notes
            .push(format!("no instance of `{}` is known", request.service_id));
        return Decision::reject(RejectReason::UnknownService, rationale);
    }
    if !snapshot.zones.contains_key(&app.host) {
        rationale.notes.push(format!(
            "no zone table for `{}`; nothing is zoned",
            app.host
        ));
    }

    let local = snapshot.select_from(&app.host, &candidates, &request.qos);
    if let Some(chosen) = local.chosen() {
        let kind = DecisionKind::Endorse {
            instance: chosen.instance.clone(),
            predicted_percentile_us: chosen.percentile_us.expect("feasible implies a percentile"),
        };
        rationale.local = Some(local);
        return Decision { kind, rationale };
    }
    rationale.local = Some(local);

    let attachment = request
        .ue_attachment
        .clone()
        .unwrap_or_else(|| app.ue_attachment.clone());
    let (kind, migration) =
        evaluate_migration(snapshot, &app.host, &attachment, &candidates, &request.qos);
    rationale.migration = migration;
    if matches!(kind, DecisionKind::Migrate { .. }) {
        rationale
            .notes
            .push("state transfer time of the relocation is not modelled".into());
    }
    Decision { kind, rationale }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BaselineComparison {
    pub trials: u32,
    pub seed: u64,
    pub confidence: f64,
    pub engine_percentile_us: Option<f64>,
    /// Quantile of the latency law seen under uniform random zoned choice.
    pub random_percentile_us: Option<f64>,
    /// Average over draws of the drawn candidate's own quantile.
    pub mean_draw_percentile_us: Option<f64>,
    /// Draw counts aligned with `hosts`.
    pub draws: Vec<u32>,
    pub hosts: Vec<HostId>,
    pub ratio: Option<f64>,
}

/// Engine choice against a uniformly random pick among zoned candidates.
pub fn compare_random_baseline(
    consumer: &HostId,
    candidates: &[ServiceInstance],
    zones: &ZoneTable,
    delays: &BTreeMap<HostId, DelayModel>,
    req: &QosRequirement,
    trials: u32,
    seed: u64,
) -> Result<BaselineComparison, DecisionError> {
    let selection = select_producer(
        consumer,
        candidates,
        zones,
        delays,
        req,
        Objective::MinPercentile,
    )?;
    let engine = selection.chosen().and_then(|c| c.percentile_us);
    let pool: Vec<(&HostId, &DelayModel)> = candidates
        .iter()
        .filter(|c| zones.is_zoned(&c.host))
        .filter_map(|c| delays.get(&c.host).map(|m| (&c.host, m)))
        .collect();

    let mut draws = vec![0u32; pool.len()];
    if !pool.is_empty() {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for _ in 0..trials {
            draws[rng.random_range(0..pool.len())] += 1;
        }
    }
    let total_draws: u32 = draws.iter().sum();
    let (random, mean_draw) = if total_draws == 0 {
        (None, None)
    } else {
        let mut atoms: Vec<(f64, f64)> = Vec::new();
        let mut sum_p = 0.0;
        let mut all_defined = true;
        for ((_, model), &n) in pool.iter().zip(&draws) {
            if n == 0 {
                continue;
            }
            let w = n as f64 / total_draws as f64;
            atoms.extend(model.atoms_us().map(|(x, m)| (x, w * m)));
            match model.percentile_us(req.confidence) {
                Some(p) => sum_p += n as f64 * p,
                None => all_defined = false,
            }
        }
        atoms.sort_by(|a, b| a.0.total_cmp(&b.0));
        let mut acc = 0.0;
        let random = atoms.iter().find_map(|&(x, m)| {
            acc += m;
            (acc >= req.confidence - PROB_TOLERANCE).then_some(x)
        });
        (random, all_defined.then(|| sum_p / total_draws as f64))
    };
    let ratio = match (engine, random) {
        (Some(e), Some(r)) if e > 0.0 => Some(r / e),
        (Some(e), Some(r)) if e == r => Some(1.0),
        _ => None,
    };
    Ok(BaselineComparison {
        trials,
        seed,
        confidence: req.confidence,
        engine_percentile_us: engine,
        random_percentile_us: random,
        mean_draw_percentile_us: mean_draw,
        draws,
        hosts: pool.iter().map(|(h, _)| (*h).clone()).collect(),
        ratio,
    })
}
