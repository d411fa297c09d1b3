//! Request/response chain App -> Platform -> MEPM -> MEO and back, over a
//! deterministic in-process bus.
//!
//! Upward hops use Mp1, Mm5 and Mm3 in that order; the response retraces
//! them in reverse. A hop to an unreachable entity is still recorded, and
//! its sender answers `Rejection(timeout)` once the deadline passes.

use std::collections::BTreeSet;
use std::fmt;
use std::io::{self, BufRead, Write};
use std::str::FromStr;
use std::sync::atomic::{AtomicU64, Ordering};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::meo_decision::{
    decide, Decision, DecisionError, DecisionKind, MeoExposure, RejectReason,
    ServiceConsumptionRequest, SystemSnapshot,
};
use crate::zoning::HostId;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EntityRole {
    App,
    Platform,
    Mepm,
    Meo,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ReferencePoint {
    Mp1,
    Mm5,
    Mm3,
    /// Orchestrator to orchestrator, across systems.
    InterMeo,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MeoResponse {
    /// Status-only success: the app may consume as requested.
    EmptyOk,
    MigrationIndication {
        target: HostId,
    },
    Rejection {
        reason: RejectReason,
    },
}

impl MeoResponse {
    pub fn from_decision(kind: &DecisionKind) -> Self {
        match kind {
            DecisionKind::Endorse { .. } => MeoResponse::EmptyOk,
            DecisionKind::Migrate { target, .. } => MeoResponse::MigrationIndication {
                target: target.clone(),
            },
            DecisionKind::Reject { reason } => MeoResponse::Rejection {
                reason: reason.clone(),
            },
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Payload {
    ServiceConsumptionRequest(ServiceConsumptionRequest),
    ForwardMm5(ServiceConsumptionRequest),
    ForwardMm3(ServiceConsumptionRequest),
    MeoResponse(MeoResponse),
    MeoExposure(Box<MeoExposure>),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Message {
    pub correlation_id: String,
    pub hop: u32,
    pub sender: EntityRole,
    pub receiver: EntityRole,
    pub reference_point: ReferencePoint,
    pub sent_at_us: f64,
    pub delivered: bool,
    pub payload: Payload,
}

/// Short label of a message kind, as written in trace files.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Variant {
    ServiceConsumptionRequest,
    ForwardMm5,
    ForwardMm3,
    EmptyOk,
    MigrationIndication(String),
    Rejection(String),
    MeoExposure(String),
}

impl fmt::Display for Variant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Variant::ServiceConsumptionRequest => f.write_str("ServiceConsumptionRequest"),
            Variant::ForwardMm5 => f.write_str("ForwardMm5"),
            Variant::ForwardMm3 => f.write_str("ForwardMm3"),
            Variant::EmptyOk => f.write_str("EmptyOk"),
            Variant::MigrationIndication(h) => write!(f, "MigrationIndication({h})"),
            Variant::Rejection(r) => write!(f, "Rejection({r})"),
            Variant::MeoExposure(s) => write!(f, "MeoExposure({s})"),
        }
    }
}

impl FromStr for Variant {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        let arg = |prefix: &str| {
            s.strip_prefix(prefix)
                .and_then(|r| r.strip_prefix('('))
                .and_then(|r| r.strip_suffix(')'))
                .map(str::to_string)
        };
        Ok(match s {
            "ServiceConsumptionRequest" => Variant::ServiceConsumptionRequest,
            "ForwardMm5" => Variant::ForwardMm5,
            "ForwardMm3" => Variant::ForwardMm3,
            "EmptyOk" => Variant::EmptyOk,
            _ => {
                if let Some(h) = arg("MigrationIndication") {
                    Variant::MigrationIndication(h)
                } else if let Some(r) = arg("Rejection") {
                    Variant::Rejection(r)
                } else if let Some(x) = arg("MeoExposure") {
                    Variant::MeoExposure(x)
                } else {
                    return Err(format!("unknown message variant `{s}`"));
                }
            }
        })
    }
}

impl Payload {
    pub fn variant(&self) -> Variant {
        match self {
            Payload::ServiceConsumptionRequest(_) => Variant::ServiceConsumptionRequest,
            Payload::ForwardMm5(_) => Variant::ForwardMm5,
            Payload::ForwardMm3(_) => Variant::ForwardMm3,
            Payload::MeoResponse(r) => response_variant(r),
            Payload::MeoExposure(e) => Variant::MeoExposure(e.system_id.clone()),
        }
    }
}

fn response_variant(r: &MeoResponse) -> Variant {
    match r {
        MeoResponse::EmptyOk => Variant::EmptyOk,
        MeoResponse::MigrationIndication { target } => {
            Variant::MigrationIndication(target.to_string())
        }
        MeoResponse::Rejection { reason } => Variant::Rejection(reason.label().to_string()),
    }
}

/// One line of an exported trace.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TraceRecord {
    pub correlation_id: String,
    pub hop: u32,
    pub sender: EntityRole,
    pub receiver: EntityRole,
    pub reference_point: ReferencePoint,
    pub variant: Variant,
}

impl From<&Message> for TraceRecord {
    fn from(m: &Message) -> Self {
        TraceRecord {
            correlation_id: m.correlation_id.clone(),
            hop: m.hop,
            sender: m.sender,
            receiver: m.receiver,
            reference_point: m.reference_point,
            variant: m.payload.variant(),
        }
    }
}

fn role_name(r: EntityRole) -> &'static str {
    match r {
        EntityRole::App => "App",
        EntityRole::Platform => "Platform",
        EntityRole::Mepm => "MEPM",
        EntityRole::Meo => "MEO",
    }
}

fn parse_role(s: &str) -> Result<EntityRole, String> {
    Ok(match s {
        "App" => EntityRole::App,
        "Platform" => EntityRole::Platform,
        "MEPM" => EntityRole::Mepm,
        "MEO" => EntityRole::Meo,
        _ => return Err(format!("unknown role `{s}`")),
    })
}

fn point_name(p: ReferencePoint) -> &'static str {
    match p {
        ReferencePoint::Mp1 => "Mp1",
        ReferencePoint::Mm5 => "Mm5",
        ReferencePoint::Mm3 => "Mm3",
        ReferencePoint::InterMeo => "InterMeo",
    }
}

fn parse_point(s: &str) -> Result<ReferencePoint, String> {
    Ok(match s {
        "Mp1" => ReferencePoint::Mp1,
        "Mm5" => ReferencePoint::Mm5,
        "Mm3" => ReferencePoint::Mm3,
        "InterMeo" => ReferencePoint::InterMeo,
        _ => return Err(format!("unknown reference point `{s}`")),
    })
}

pub const TRACE_HEADER: &str = "correlation_id,hop,sender,receiver,reference_point,variant";

pub fn write_trace<W: Write>(records: &[TraceRecord], mut out: W) -> io::Result<()> {
    writeln!(out, "{TRACE_HEADER}")?;
    for r in records {
        writeln!(
            out,
            "{},{},{},{},{},{}",
            r.correlation_id,
            r.hop,
            role_name(r.sender),
            role_name(r.receiver),
            point_name(r.reference_point),
            r.variant
        )?;
    }
    Ok(())
}

#[derive(Debug, Error)]
pub enum TraceParseError {
    #[error("line {line}: {reason}")]
    Malformed { line: usize, reason: String },
    #[error(transparent)]
    Io(#[from] io::Error),
}

pub fn read_trace<R: BufRead>(input: R) -> Result<Vec<TraceRecord>, TraceParseError> {
    let mut records = Vec::new();
    for (i, line) in input.lines().enumerate() {
        let line = line?;
        let line_no = i + 1;
        if line.trim().is_empty() || (i == 0 && line == TRACE_HEADER) {
            continue;
        }
        let bad = |reason: String| TraceParseError::Malformed {
            line: line_no,
            reason,
        };
        let cols: Vec<&str> = line.splitn(6, ',').collect();
        if cols.len() != 6 {
            return Err(bad(format!("expected 6 columns, found {}", cols.len())));
        }
        records.push(TraceRecord {
            correlation_id: cols[0].to_string(),
            hop: cols[1]
                .parse()
                .map_err(|e| bad(format!("hop index: {e}")))?,
            sender: parse_role(cols[2]).map_err(bad)?,
            receiver: parse_role(cols[3]).map_err(bad)?,
            reference_point: parse_point(cols[4]).map_err(bad)?,
            variant: cols[5].parse().map_err(bad)?,
        });
    }
    Ok(records)
}

/// Deterministic in-process transport.
#[derive(Debug)]
pub struct MessageBus {
    pub hop_latency_us: f64,
    /// How long a sender waits for an unreachable receiver.
    pub deadline_us: f64,
    pub unreachable: BTreeSet<EntityRole>,
    next_correlation: AtomicU64,
}

impl Default for MessageBus {
    fn default() -> Self {
        MessageBus::new(10.0, 1000.0)
    }
}

impl MessageBus {
    pub fn new(hop_latency_us: f64, deadline_us: f64) -> Self {
        MessageBus {
            hop_latency_us,
            deadline_us,
            unreachable: BTreeSet::new(),
            next_correlation: AtomicU64::new(1),
        }
    }

    pub fn with_unreachable(mut self, role: EntityRole) -> Self {
        self.unreachable.insert(role);
        self
    }

    fn correlation_id(&self) -> String {
        let n = self.next_correlation.fetch_add(1, Ordering::Relaxed);
        format!("corr-{n:06}")
    }
}

/// Result of one request/response exchange.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Transaction {
    pub correlation_id: String,
    pub response: MeoResponse,
    /// Absent when the orchestrator was never reached.
    pub decision: Option<Decision>,
    pub trace: Vec<Message>,
    pub elapsed_us: f64,
}

impl Transaction {
    pub fn records(&self) -> Vec<TraceRecord> {
        self.trace.iter().map(TraceRecord::from).collect()
    }
}

const UPWARD: [(EntityRole, EntityRole, ReferencePoint); 3] = [
    (EntityRole::App, EntityRole::Platform, ReferencePoint::Mp1),
    (EntityRole::Platform, EntityRole::Mepm, ReferencePoint::Mm5),
    (EntityRole::Mepm, EntityRole::Meo, ReferencePoint::Mm3),
];

fn upward_payload(hop: usize, req: &ServiceConsumptionRequest) -> Payload {
    match hop {
        0 => Payload::ServiceConsumptionRequest(req.clone()),
        1 => Payload::ForwardMm5(req.clone()),
        _ => Payload::ForwardMm3(req.clone()),
    }
}

/// Carries `request` to the orchestrator owning `snapshot` and back.
pub fn run_transaction(
    bus: &MessageBus,
    snapshot: &SystemSnapshot,
    request: &ServiceConsumptionRequest,
) -> Transaction {
    let correlation_id = bus.correlation_id();
    let mut trace = Vec::new();
    let mut clock = 0.0;
    let push = |trace: &mut Vec<Message>, sender, receiver, point, delivered, payload, at| {
        trace.push(Message {
            correlation_id: correlation_id.clone(),
            hop: trace.len() as u32,
            sender,
            receiver,
            reference_point: point,
            sent_at_us: at,
            delivered,
            payload,
        });
    };

    // Index of the upward hop whose receiver never answered.
    let mut stalled = None;
    for (k, &(from, to, point)) in UPWARD.iter().enumerate() {
        let reachable = !bus.unreachable.contains(&to);
        push(
            &mut trace,
            from,
            to,
            point,
            reachable,
            upward_payload(k, request),
            clock,
        );
        if !reachable {
            stalled = Some(k);
            clock += bus.deadline_us;
            break;
        }
        clock += bus.hop_latency_us;
    }

    let (decision, response, top) = match stalled {
        Some(k) => (
            None,
            MeoResponse::Rejection {
                reason: RejectReason::Timeout,
            },
            k,
        ),
        None => {
            let d = decide(request, snapshot);
            let r = MeoResponse::from_decision(&d.kind);
            (Some(d), r, UPWARD.len())
        }
    };
    for &(to, from, point) in UPWARD[..top].iter().rev() {
        push(
            &mut trace,
            from,
            to,
            point,
            true,
            Payload::MeoResponse(response.clone()),
            clock,
        );
        clock += bus.hop_latency_us;
    }

    Transaction {
        correlation_id,
        response,
        decision,
        trace,
        elapsed_us: clock,
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ReplayVerdict {
    pub violations: Vec<String>,
}

impl ReplayVerdict {
    pub fn passed(&self) -> bool {
        self.violations.is_empty()
    }
}

/// Checks hop order, correlation integrity and, when the orchestrator's
/// decision is known, that the delivered response matches it.
pub fn replay_trace(records: &[TraceRecord], decision: Option<&DecisionKind>) -> ReplayVerdict {
    let mut v = Vec::new();
    if records.is_empty() {
        return ReplayVerdict {
            violations: vec!["trace is empty".into()],
        };
    }
    let corr = &records[0].correlation_id;
    if records.iter().any(|r| r.correlation_id != *corr) {
        v.push("correlation id changes within the transaction".into());
    }
    for (i, r) in records.iter().enumerate() {
        if r.hop as usize != i {
            v.push(format!("hop index {} at position {i}", r.hop));
        }
    }

    let is_request = |r: &TraceRecord| {
        matches!(
            r.variant,
            Variant::ServiceConsumptionRequest | Variant::ForwardMm5 | Variant::ForwardMm3
        )
    };
    let up: Vec<&TraceRecord> = records.iter().take_while(|r| is_request(r)).collect();
    let down = &records[up.len()..];
    if let Some(r) = down.iter().find(|r| is_request(r)) {
        v.push(format!("request hop {} after the response started", r.hop));
    }

    let expected_up = [
        Variant::ServiceConsumptionRequest,
        Variant::ForwardMm5,
        Variant::ForwardMm3,
    ];
    let timed_out = down
        .first()
        .is_some_and(|r| r.variant == Variant::Rejection(RejectReason::Timeout.label().into()));
    let present: Vec<ReferencePoint> = up.iter().map(|r| r.reference_point).collect();
    let reached = if timed_out { up.len() } else { UPWARD.len() };
    for &(_, _, point) in &UPWARD[..reached.min(UPWARD.len())] {
        if !present.contains(&point) {
            v.push(format!("{} hop absent", point_name(point)));
        }
    }
    for (k, r) in up.iter().enumerate() {
        match UPWARD.get(k) {
            Some(&(from, to, point))
                if (r.sender, r.receiver, r.reference_point) == (from, to, point)
                    && r.variant == expected_up[k] => {}
            _ => v.push(format!(
                "upward hop {} is {}->{} over {} ({}), out of order",
                r.hop,
                role_name(r.sender),
                role_name(r.receiver),
                point_name(r.reference_point),
                r.variant
            )),
        }
    }

    // The response retraces exactly the hops that were delivered upward.
    let answered = if timed_out {
        up.len().saturating_sub(1)
    } else {
        up.len()
    };
    let expected_down: Vec<_> = UPWARD[..answered.min(UPWARD.len())]
        .iter()
        .rev()
        .map(|&(to, from, point)| (from, to, point))
        .collect();
    if down.len() != expected_down.len() {
        v.push(format!(
            "{} response hops, expected {}",
            down.len(),
            expected_down.len()
        ));
    }
    for (r, &(from, to, point)) in down.iter().zip(&expected_down) {
        if (r.sender, r.receiver, r.reference_point) != (from, to, point) {
            v.push(format!(
                "response hop {} is {}->{} over {}, expected {}->{} over {}",
                r.hop,
                role_name(r.sender),
                role_name(r.receiver),
                point_name(r.reference_point),
                role_name(from),
                role_name(to),
                point_name(point)
            ));
        }
    }
    if let Some(first) = down.first() {
        if down.iter().any(|r| r.variant != first.variant) {
            v.push("response variant changes on the way down".into());
        }
    }
    let terminal = records
        .iter()
        .filter(|r| r.receiver == EntityRole::App)
        .count();
    if terminal != 1 {
        v.push(format!(
            "{terminal} messages delivered to the app, expected 1"
        ));
    }
    if let (Some(kind), Some(last)) = (decision, down.last()) {
        let expected = response_variant(&MeoResponse::from_decision(kind));
        if last.variant != expected {
            v.push(format!(
                "app received {} but the decision implies {expected}",
                last.variant
            ));
        }
    }
    ReplayVerdict { violations: v }
}

/// An orchestrator and the system state it decides over.
#[derive(Debug, Clone, PartialEq)]
pub struct Meo {
    pub snapshot: SystemSnapshot,
}

impl Meo {
    pub fn new(snapshot: SystemSnapshot) -> Result<Self, DecisionError> {
        snapshot.validate()?;
        Ok(Meo { snapshot })
    }

    pub fn system_id(&self) -> &str {
        &self.snapshot.system_id
    }
}

/// `local` with `remote`'s exposed instances merged in. `local` keeps the
/// final say over every request it receives.
pub fn expose_between_meos(remote: &Meo, local: &Meo) -> Result<(Meo, Message), DecisionError> {
    let exposure = remote.snapshot.exposure();
    let mut merged = local.clone();
    merged.snapshot.absorb(&exposure)?;
    let message = Message {
        correlation_id: format!("expose-{}-{}", remote.system_id(), local.system_id()),
        hop: 0,
        sender: EntityRole::Meo,
        receiver: EntityRole::Meo,
        reference_point: ReferencePoint::InterMeo,
        sent_at_us: 0.0,
        delivered: true,
        payload: Payload::MeoExposure(Box::new(exposure)),
    };
    Ok((merged, message))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::meo_decision::{AppInstance, DelayModel, Objective, ServiceInstance};
    use crate::pmf::Pmf;
    use crate::queue_model::QosRequirement;
    use crate::zoning::{build_zone_table, Cost, CostMatrix, CostSource};
    use std::collections::BTreeMap;

    fn h(s: &str) -> HostId {
        HostId::new(s).unwrap()
    }

    fn snapshot(system: &str, service_delay: usize) -> SystemSnapshot {
        let m = CostMatrix::new(h("h1"), [(h("h2"), Cost::Units(3))], CostSource::Offline).unwrap();
        let zones = build_zone_table(&m, &[(0, 5).into(), (0, 10).into()]).unwrap();
        let delay = DelayModel::new(Pmf::delta(service_delay), 0.0, 1.0).unwrap();
        SystemSnapshot {
            system_id: system.into(),
            hosts: [h("h1"), h("h2")].into(),
            apps: vec![AppInstance {
                app_id: "app".into(),
                host: h("h1"),
                ue_attachment: "cell".into(),
            }],
            services: vec![ServiceInstance {
                service_id: "svc".into(),
                host: h("h2"),
                endpoint: "h2:1".into(),
                system_id: None,
            }],
            zones: BTreeMap::from([(h("h1"), zones)]),
            delays: BTreeMap::from([(h("h1"), BTreeMap::from([(h("h2"), delay)]))]),
            ue_delays: BTreeMap::new(),
            ue_bound_us: 5000.0,
            objective: Objective::default(),
        }
    }

    fn request() -> ServiceConsumptionRequest {
        ServiceConsumptionRequest {
            app_id: "app".into(),
            service_id: "svc".into(),
            qos: QosRequirement::new(250.0, 0.95).unwrap(),
            ue_attachment: None,
        }
    }

    fn hops(t: &Transaction) -> Vec<(EntityRole, EntityRole, ReferencePoint)> {
        t.trace
            .iter()
            .map(|m| (m.sender, m.receiver, m.reference_point))
            .collect()
    }

    #[test]
    fn endorsed_request_gets_empty_ok_over_six_hops() {
        use EntityRole::*;
        use ReferencePoint::*;
        let bus = MessageBus::default();
        let t = run_transaction(&bus, &snapshot("s1", 100), &request());
        assert_eq!(t.response, MeoResponse::EmptyOk);
        assert_eq!(
            hops(&t),
            [
                (App, Platform, Mp1),
                (Platform, Mepm, Mm5),
                (Mepm, Meo, Mm3),
                (Meo, Mepm, Mm3),
                (Mepm, Platform, Mm5),
                (Platform, App, Mp1),
            ]
        );
        assert!(t.trace.iter().all(|m| m.correlation_id == "corr-000001"));
        assert_eq!(t.elapsed_us, 60.0);
        let verdict = replay_trace(&t.records(), t.decision.as_ref().map(|d| &d.kind));
        assert!(verdict.passed(), "{:?}", verdict.violations);
    }

    #[test]
    fn correlation_ids_are_unique_per_transaction() {
        let bus = MessageBus::default();
        let s = snapshot("s1", 100);
        let a = run_transaction(&bus, &s, &request());
        let b = run_transaction(&bus, &s, &request());
        assert_ne!(a.correlation_id, b.correlation_id);
        assert_eq!(b.correlation_id, "corr-000002");
    }

    #[test]
    fn unreachable_meo_times_out() {
        let bus = MessageBus::new(10.0, 500.0).with_unreachable(EntityRole::Meo);
        let t = run_transaction(&bus, &snapshot("s1", 100), &request());
        assert_eq!(
            t.response,
            MeoResponse::Rejection {
                reason: RejectReason::Timeout
            }
        );
        assert!(t.decision.is_none());
        assert_eq!(t.trace.len(), 5);
        assert!(!t.trace[2].delivered);
        assert_eq!(t.elapsed_us, 20.0 + 500.0 + 20.0);
        assert!(replay_trace(&t.records(), None).passed());

        let bus = MessageBus::default().with_unreachable(EntityRole::Mepm);
        let t = run_transaction(&bus, &snapshot("s1", 100), &request());
        assert_eq!(t.trace.len(), 3);
        assert_eq!(t.trace.last().unwrap().receiver, EntityRole::App);
        assert!(replay_trace(&t.records(), None).passed());
    }

    #[test]
    fn replay_reports_missing_and_inconsistent_hops() {
        let t = run_transaction(&MessageBus::default(), &snapshot("s1", 100), &request());
        let kind = &t.decision.as_ref().unwrap().kind;

        let mut missing = t.records();
        missing.remove(1);
        for (i, r) in missing.iter_mut().enumerate() {
            r.hop = i as u32;
        }
        let verdict = replay_trace(&missing, Some(kind));
        assert!(
            verdict.violations.iter().any(|x| x == "Mm5 hop absent"),
            "{:?}",
            verdict.violations
        );

        let mut contradicted = t.records();
        for r in &mut contradicted[3..] {
            r.variant = Variant::Rejection("no-feasible-host".into());
        }
        let verdict = replay_trace(&contradicted, Some(kind));
        assert!(!verdict.passed());
        assert!(verdict
            .violations
            .iter()
            .any(|x| x.contains("decision implies EmptyOk")));

        let mut split = t.records();
        split[4].correlation_id = "corr-999999".into();
        assert!(!replay_trace(&split, Some(kind)).passed());
        assert!(!replay_trace(&[], None).passed());
    }

    #[test]
    fn infeasible_service_is_rejected_through_the_chain() {
        let t = run_transaction(&MessageBus::default(), &snapshot("s1", 900), &request());
        assert_eq!(
            t.response,
            MeoResponse::Rejection {
                reason: RejectReason::NoFeasibleHost
            }
        );
        assert_eq!(t.trace.len(), 6);
    }

    #[test]
    fn trace_text_round_trips() {
        let t = run_transaction(&MessageBus::default(), &snapshot("s1", 100), &request());
        let mut buf = Vec::new();
        write_trace(&t.records(), &mut buf).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.starts_with(TRACE_HEADER));
        assert!(text.contains("corr-000001,2,MEPM,MEO,Mm3,ForwardMm3"));
        assert_eq!(read_trace(&buf[..]).unwrap(), t.records());
        assert!(read_trace("a,b\n".as_bytes()).is_err());
        assert_eq!(
            "MigrationIndication(host2)".parse::<Variant>().unwrap(),
            Variant::MigrationIndication("host2".into())
        );
    }

    #[test]
    fn exposure_merge_is_neutral_when_empty_and_endorses_remote_producer() {
        let local = Meo::new(snapshot("s1", 900)).unwrap();
        let mut empty = snapshot("s2", 100);
        empty.hosts = [h("r1")].into();
        empty.apps.clear();
        empty.services.clear();
        empty.zones.clear();
        empty.delays.clear();
        let (merged, msg) = expose_between_meos(&Meo::new(empty).unwrap(), &local).unwrap();
        assert_eq!(msg.reference_point, ReferencePoint::InterMeo);
        assert_eq!(
            decide(&request(), &merged.snapshot),
            decide(&request(), &local.snapshot)
        );

        let same_id = Meo::new(snapshot("s1", 100)).unwrap();
        assert!(expose_between_meos(&same_id, &local).is_err());
    }
}
