//! Scenario data model: directed network with polynomial latencies,
//! heterogeneous user groups, validation, simple-path enumeration, and the
//! JSON interchange format.

use std::collections::{BTreeMap, BTreeSet, VecDeque};
use std::fmt;

use serde::de::Error as _;
use serde::{Deserialize, Deserializer, Serialize, Serializer};
use thiserror::Error;

/// Default cap on enumerated simple paths per group.
pub const DEFAULT_PATH_CAP: usize = 64;

/// Errors raised while loading or querying a scenario.
#[derive(Debug, Error)]
pub enum NetworkError {
    /// The interchange document could not be parsed at all.
    #[error("scenario parse error: {0}")]
    Parse(String),
    /// The document parsed but the scenario violates its invariants.
    #[error("scenario validation failed:\n{}", format_issues(.0))]
    Invalid(Vec<ValidationIssue>),
    /// A flow query was made with a negative flow value.
    #[error("negative flow {flow} on edge {edge}")]
    NegativeFlow { edge: String, flow: f64 },
    /// An unknown edge, node, or group id was referenced.
    #[error("unknown {kind} id {id:?}")]
    UnknownId { kind: &'static str, id: String },
    /// No path connects a group's origin to its destination.
    #[error("disconnected O-D pair for group {0}")]
    Disconnected(String),
    /// A group's origin equals its destination; paths are undefined.
    #[error("origin equals destination for group {0}")]
    DegenerateOd(String),
}

fn format_issues(issues: &[ValidationIssue]) -> String {
    issues
        .iter()
        .map(|i| format!("  - {i}"))
        .collect::<Vec<_>>()
        .join("\n")
}

/// One finding of [`validate_scenario`].
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ValidationIssue {
    /// Which part of the scenario the issue concerns, e.g. `edge e1`.
    pub subject: String,
    /// Human-readable description of the violated invariant.
    pub message: String,
}

impl fmt::Display for ValidationIssue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.subject, self.message)
    }
}

/// Latency function `t(x) = a + b·x^p`, nondecreasing and convex for `x ≥ 0`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LatencyFn {
    /// Free-flow travel time `a ≥ 0`.
    pub free_flow: f64,
    /// Congestion coefficient `b ≥ 0`.
    pub coeff: f64,
    /// Congestion exponent `p ≥ 1`.
    pub exponent: f64,
}

impl LatencyFn {
    /// Affine latency `a + b·x`.
    pub fn affine(a: f64, b: f64) -> Self {
        LatencyFn {
            free_flow: a,
            coeff: b,
            exponent: 1.0,
        }
    }

    /// Travel time at flow `x`. Callers must pass `x ≥ 0`.
    pub fn value(&self, x: f64) -> f64 {
        debug_assert!(x >= 0.0, "latency evaluated at negative flow {x}");
        if self.coeff == 0.0 {
            // Avoids 0·0^p = NaN concerns at x = 0 and skips the powf.
            return self.free_flow;
        }
        self.free_flow + self.coeff * x.powf(self.exponent)
    }

    /// Closed-form integral `∫_0^x t(ω) dω = a·x + b·x^(p+1)/(p+1)`.
    pub fn integral(&self, x: f64) -> f64 {
        debug_assert!(x >= 0.0, "latency integrated to negative flow {x}");
        if self.coeff == 0.0 {
            return self.free_flow * x;
        }
        self.free_flow * x + self.coeff * x.powf(self.exponent + 1.0) / (self.exponent + 1.0)
    }

    /// True when the function is constant in flow (`b = 0`): such edges keep
    /// equilibrium costs unique but allow non-unique equilibrium flows.
    pub fn is_constant(&self) -> bool {
        self.coeff == 0.0
    }
}

/// A directed edge with its latency function.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Edge {
    pub id: String,
    pub tail: String,
    pub head: String,
    pub latency: LatencyFn,
}

/// A class of users sharing a value-of-time, income, demand, and O-D pair.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UserGroup {
    pub id: String,
    /// Value-of-time `v > 0`, in money per time unit.
    pub vot: f64,
    /// Ex-ante income `q⁰ > 0`, in money.
    pub income: f64,
    /// Demand rate `d > 0`.
    pub demand: f64,
    pub origin: String,
    pub destination: String,
}

/// A full problem instance: network, user groups, and the income-elasticity
/// factor `beta` used when travel costs are converted into income losses.
///
/// Immutable after construction; all operations on it are pure.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scenario {
    pub nodes: Vec<String>,
    pub edges: Vec<Edge>,
    pub groups: Vec<UserGroup>,
    pub beta: f64,
}

/// A simple path for one group's O-D pair, stored as an edge-id sequence.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Path {
    /// Consecutive edge ids chaining origin to destination head-to-tail.
    pub edges: Vec<String>,
    /// Id of the group whose O-D pair this path connects.
    pub group: String,
}

/// Result of enumerating a group's simple paths under a cap.
#[derive(Debug, Clone)]
pub struct PathEnumeration {
    /// Simple paths in lexicographic edge-id-sequence order.
    pub paths: Vec<Path>,
    /// Set when more simple paths exist beyond the cap.
    pub truncated: bool,
}

impl Scenario {
    /// Looks up an edge by id.
    pub fn edge(&self, id: &str) -> Result<&Edge, NetworkError> {
        self.edges
            .iter()
            .find(|e| e.id == id)
            .ok_or_else(|| NetworkError::UnknownId {
                kind: "edge",
                id: id.to_string(),
            })
    }

    /// Looks up a group by id.
    pub fn group(&self, id: &str) -> Result<&UserGroup, NetworkError> {
        self.groups
            .iter()
            .find(|g| g.id == id)
            .ok_or_else(|| NetworkError::UnknownId {
                kind: "group",
                id: id.to_string(),
            })
    }

    /// Group ids in declaration order.
    pub fn group_ids(&self) -> Vec<String> {
        self.groups.iter().map(|g| g.id.clone()).collect()
    }

    /// Total demand over all groups.
    pub fn total_demand(&self) -> f64 {
        self.groups.iter().map(|g| g.demand).sum()
    }

    /// Serializes the scenario back into the interchange document format.
    ///
    /// Numbers are written as shortest-round-trip decimal strings, so
    /// `load_scenario(s.to_document())` reproduces every field bit-exactly.
    pub fn to_document(&self) -> String {
        let raw = RawScenario::from(self);
        serde_json::to_string_pretty(&raw).expect("scenario serialization cannot fail")
    }
}

/// Travel time of edge `e` at aggregate flow `x ≥ 0`.
pub fn travel_time(e: &Edge, x: f64) -> Result<f64, NetworkError> {
    if x < 0.0 {
        return Err(NetworkError::NegativeFlow {
            edge: e.id.clone(),
            flow: x,
        });
    }
    Ok(e.latency.value(x))
}

/// Checks every scenario invariant and returns the list of violations
/// (empty means the scenario is well-formed).
pub fn validate_scenario(s: &Scenario) -> Vec<ValidationIssue> {
    let mut issues = Vec::new();
    let mut issue = |subject: &str, message: String| {
        issues.push(ValidationIssue {
            subject: subject.to_string(),
            message,
        })
    };

    if s.nodes.is_empty() {
        issue("scenario", "node list is empty".into());
    }
    let mut node_set = BTreeSet::new();
    for n in &s.nodes {
        if n.is_empty() {
            issue("scenario", "empty node id".into());
        }
        if !node_set.insert(n.clone()) {
            issue("scenario", format!("duplicate node id {n:?}"));
        }
    }

    let mut edge_ids = BTreeSet::new();
    for e in &s.edges {
        let subject = format!("edge {}", e.id);
        if e.id.is_empty() {
            issue("scenario", "empty edge id".into());
        }
        if !edge_ids.insert(e.id.clone()) {
            issue("scenario", format!("duplicate edge id {:?}", e.id));
        }
        for (role, node) in [("tail", &e.tail), ("head", &e.head)] {
            if !node_set.contains(node) {
                issue(&subject, format!("{role} references unknown node {node:?}"));
            }
        }
        if e.tail == e.head {
            issue(&subject, "self-loop edges are not allowed".into());
        }
        let l = &e.latency;
        if !(l.free_flow.is_finite() && l.free_flow >= 0.0) {
            issue(
                &subject,
                format!("free-flow time must be ≥ 0, got {}", l.free_flow),
            );
        }
        if !(l.coeff.is_finite() && l.coeff >= 0.0) {
            issue(
                &subject,
                format!("congestion coefficient must be ≥ 0, got {}", l.coeff),
            );
        }
        if !(l.exponent.is_finite() && l.exponent >= 1.0) {
            issue(
                &subject,
                format!("latency exponent below 1: {}", l.exponent),
            );
        }
    }

    let mut group_ids = BTreeSet::new();
    for g in &s.groups {
        let subject = format!("group {}", g.id);
        if g.id.is_empty() {
            issue("scenario", "empty group id".into());
        }
        if !group_ids.insert(g.id.clone()) {
            issue("scenario", format!("duplicate group id {:?}", g.id));
        }
        if !(g.vot.is_finite() && g.vot > 0.0) {
            issue(
                &subject,
                format!("value-of-time must be > 0, got {}", g.vot),
            );
        }
        if !(g.income.is_finite() && g.income > 0.0) {
            issue(&subject, format!("income must be > 0, got {}", g.income));
        }
        if !(g.demand.is_finite() && g.demand > 0.0) {
            issue(&subject, format!("demand must be > 0, got {}", g.demand));
        }
        let mut endpoints_ok = true;
        for (role, node) in [("origin", &g.origin), ("destination", &g.destination)] {
            if !node_set.contains(node) {
                issue(&subject, format!("{role} references unknown node {node:?}"));
                endpoints_ok = false;
            }
        }
        if g.origin == g.destination {
            issue(&subject, "origin equals destination".into());
        } else if endpoints_ok && !is_reachable(s, &g.origin, &g.destination) {
            issue(
                "scenario",
                format!("disconnected O-D pair for group {}", g.id),
            );
        }
    }

    if !(s.beta.is_finite() && s.beta > 0.0) {
        issue("scenario", format!("beta must be > 0, got {}", s.beta));
    }

    issues
}

fn is_reachable(s: &Scenario, from: &str, to: &str) -> bool {
    let mut seen = BTreeSet::new();
    let mut queue = VecDeque::from([from.to_string()]);
    seen.insert(from.to_string());
    while let Some(node) = queue.pop_front() {
        if node == to {
            return true;
        }
        for e in s.edges.iter().filter(|e| e.tail == node) {
            if seen.insert(e.head.clone()) {
                queue.push_back(e.head.clone());
            }
        }
    }
    false
}

/// Enumerates all simple paths for group `g`'s O-D pair, in lexicographic
/// edge-id-sequence order, stopping after `cap` paths (the `truncated` flag is
/// set when more exist).
pub fn enumerate_paths(
    s: &Scenario,
    group_id: &str,
    cap: usize,
) -> Result<PathEnumeration, NetworkError> {
    assert!(cap >= 1, "path cap must be at least 1");
    let g = s.group(group_id)?;
    if g.origin == g.destination {
        return Err(NetworkError::DegenerateOd(g.id.clone()));
    }

    // Outgoing edges per node, sorted by edge id so the depth-first emission
    // order is the lexicographic order of edge-id sequences.
    let mut out: BTreeMap<&str, Vec<&Edge>> = BTreeMap::new();
    for e in &s.edges {
        out.entry(e.tail.as_str()).or_default().push(e);
    }
    for edges in out.values_mut() {
        edges.sort_by(|a, b| a.id.cmp(&b.id));
    }

    let mut paths = Vec::new();
    let mut truncated = false;
    let mut stack: Vec<String> = Vec::new();
    let mut visited: BTreeSet<&str> = BTreeSet::from([g.origin.as_str()]);

    fn dfs<'a>(
        node: &'a str,
        dest: &str,
        out: &BTreeMap<&str, Vec<&'a Edge>>,
        visited: &mut BTreeSet<&'a str>,
        stack: &mut Vec<String>,
        paths: &mut Vec<Vec<String>>,
        cap: usize,
        truncated: &mut bool,
    ) {
        if *truncated {
            return;
        }
        for e in out.get(node).map(|v| v.as_slice()).unwrap_or(&[]) {
            if *truncated {
                return;
            }
            if e.head == dest {
                if paths.len() == cap {
                    *truncated = true;
                    return;
                }
                stack.push(e.id.clone());
                paths.push(stack.clone());
                stack.pop();
            } else if !visited.contains(e.head.as_str()) {
                visited.insert(e.head.as_str());
                stack.push(e.id.clone());
                dfs(&e.head, dest, out, visited, stack, paths, cap, truncated);
                stack.pop();
                visited.remove(e.head.as_str());
            }
        }
    }

    let mut edge_seqs = Vec::new();
    dfs(
        &g.origin,
        &g.destination,
        &out,
        &mut visited,
        &mut stack,
        &mut edge_seqs,
        cap,
        &mut truncated,
    );

    if edge_seqs.is_empty() {
        return Err(NetworkError::Disconnected(g.id.clone()));
    }
    paths.extend(edge_seqs.into_iter().map(|edges| Path {
        edges,
        group: g.id.clone(),
    }));
    Ok(PathEnumeration { paths, truncated })
}

/// Parses and validates a scenario interchange document.
pub fn load_scenario(text: &str) -> Result<Scenario, NetworkError> {
    let raw: RawScenario =
        serde_json::from_str(text).map_err(|e| NetworkError::Parse(e.to_string()))?;
    let scenario = raw.into_scenario()?;
    let issues = validate_scenario(&scenario);
    if issues.is_empty() {
        Ok(scenario)
    } else {
        Err(NetworkError::Invalid(issues))
    }
}

/// Returns a bundled example scenario by name, if one exists.
///
/// `appendix-g`: two parallel edges `t1 = 2x`, `t2 = 4 + x` shared by three
/// income classes H/M/L with demands 2/1/5 and values-of-time proportional to
/// income (factor 0.001). `appendix-d`: two disjoint O-D pairs — a lone edge
/// `t = x/2` for the high-income group and a congestible/constant pair
/// `t = x`, `t = 1` for the low-income group.
pub fn builtin_scenario(name: &str) -> Option<Scenario> {
    match name {
        "appendix-g" => {
            let q_l = 989.2 / 0.99;
            Some(Scenario {
                nodes: vec!["v1".into(), "v2".into()],
                edges: vec![
                    Edge {
                        id: "e1".into(),
                        tail: "v1".into(),
                        head: "v2".into(),
                        latency: LatencyFn::affine(0.0, 2.0),
                    },
                    Edge {
                        id: "e2".into(),
                        tail: "v1".into(),
                        head: "v2".into(),
                        latency: LatencyFn::affine(4.0, 1.0),
                    },
                ],
                groups: vec![
                    UserGroup {
                        id: "H".into(),
                        vot: 2.0,
                        income: 2000.0,
                        demand: 2.0,
                        origin: "v1".into(),
                        destination: "v2".into(),
                    },
                    UserGroup {
                        id: "M".into(),
                        vot: 1.0,
                        income: 1000.0,
                        demand: 1.0,
                        origin: "v1".into(),
                        destination: "v2".into(),
                    },
                    UserGroup {
                        id: "L".into(),
                        vot: 0.001 * q_l,
                        income: q_l,
                        demand: 5.0,
                        origin: "v1".into(),
                        destination: "v2".into(),
                    },
                ],
                beta: 1.0,
            })
        }
        "appendix-d" => Some(Scenario {
            nodes: vec!["v1".into(), "v2".into(), "v3".into(), "v4".into()],
            edges: vec![
                Edge {
                    id: "e1".into(),
                    tail: "v1".into(),
                    head: "v2".into(),
                    latency: LatencyFn::affine(0.0, 0.5),
                },
                Edge {
                    id: "e2".into(),
                    tail: "v3".into(),
                    head: "v4".into(),
                    latency: LatencyFn::affine(0.0, 1.0),
                },
                Edge {
                    id: "e3".into(),
                    tail: "v3".into(),
                    head: "v4".into(),
                    latency: LatencyFn::affine(1.0, 0.0),
                },
            ],
            groups: vec![
                UserGroup {
                    id: "H".into(),
                    vot: 0.2,
                    income: 2.0,
                    demand: 1.0,
                    origin: "v1".into(),
                    destination: "v2".into(),
                },
                UserGroup {
                    id: "L".into(),
                    vot: 0.1,
                    income: 1.0,
                    demand: 1.0,
                    origin: "v3".into(),
                    destination: "v4".into(),
                },
            ],
            beta: 1.0,
        }),
        _ => None,
    }
}

// ---------------------------------------------------------------------------
// Interchange format
// ---------------------------------------------------------------------------

/// A decimal field that deserializes from either a JSON number or a decimal
/// string, and always serializes as a shortest-round-trip decimal string.
#[derive(Debug, Clone, Copy, PartialEq)]
struct Decimal(f64);

impl Serialize for Decimal {
    fn serialize<S: Serializer>(&self, ser: S) -> Result<S::Ok, S::Error> {
        ser.serialize_str(&format!("{}", self.0))
    }
}

impl<'de> Deserialize<'de> for Decimal {
    fn deserialize<D: Deserializer<'de>>(de: D) -> Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum NumberOrText {
            Number(f64),
            Text(String),
        }
        let value = match NumberOrText::deserialize(de)? {
            NumberOrText::Number(x) => x,
            NumberOrText::Text(t) => t
                .trim()
                .parse::<f64>()
                .map_err(|_| D::Error::custom(format!("invalid decimal string {t:?}")))?,
        };
        if !value.is_finite() {
            return Err(D::Error::custom(format!(
                "non-finite numeric value {value}"
            )));
        }
        Ok(Decimal(value))
    }
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawScenario {
    nodes: Vec<String>,
    edges: Vec<RawEdge>,
    groups: Vec<RawGroup>,
    beta: Decimal,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawEdge {
    id: String,
    tail: String,
    head: String,
    a: Decimal,
    b: Decimal,
    p: Decimal,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawGroup {
    id: String,
    vot: Decimal,
    income: Decimal,
    demand: Decimal,
    origin: String,
    destination: String,
}

impl RawScenario {
    fn into_scenario(self) -> Result<Scenario, NetworkError> {
        Ok(Scenario {
            nodes: self.nodes,
            edges: self
                .edges
                .into_iter()
                .map(|e| Edge {
                    id: e.id,
                    tail: e.tail,
                    head: e.head,
                    latency: LatencyFn {
                        free_flow: e.a.0,
                        coeff: e.b.0,
                        exponent: e.p.0,
                    },
                })
                .collect(),
            groups: self
                .groups
                .into_iter()
                .map(|g| UserGroup {
                    id: g.id,
                    vot: g.vot.0,
                    income: g.income.0,
                    demand: g.demand.0,
                    origin: g.origin,
                    destination: g.destination,
                })
                .collect(),
            beta: self.beta.0,
        })
    }
}

impl From<&Scenario> for RawScenario {
    fn from(s: &Scenario) -> Self {
        RawScenario {
            nodes: s.nodes.clone(),
            edges: s
                .edges
                .iter()
                .map(|e| RawEdge {
                    id: e.id.clone(),
                    tail: e.tail.clone(),
                    head: e.head.clone(),
                    a: Decimal(e.latency.free_flow),
                    b: Decimal(e.latency.coeff),
                    p: Decimal(e.latency.exponent),
                })
                .collect(),
            groups: s
                .groups
                .iter()
                .map(|g| RawGroup {
                    id: g.id.clone(),
                    vot: Decimal(g.vot),
                    income: Decimal(g.income),
                    demand: Decimal(g.demand),
                    origin: g.origin.clone(),
                    destination: g.destination.clone(),
                })
                .collect(),
            beta: Decimal(s.beta),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn latency_matches_hand_values() {
        let t1 = LatencyFn::affine(0.0, 2.0);
        assert_eq!(t1.value(4.0), 8.0);
        let t2 = LatencyFn::affine(4.0, 1.0);
        assert_eq!(t2.value(6.0), 10.0);
        let bpr = LatencyFn {
            free_flow: 1.0,
            coeff: 0.15,
            exponent: 4.0,
        };
        assert_eq!(bpr.value(0.0), 1.0);
        assert!((bpr.value(2.0) - (1.0 + 0.15 * 16.0)).abs() < 1e-12);
    }

    #[test]
    fn latency_integral_is_closed_form() {
        let t = LatencyFn::affine(4.0, 1.0);
        // 4x + x²/2 at x = 6.
        assert!((t.integral(6.0) - (24.0 + 18.0)).abs() < 1e-12);
        let constant = LatencyFn::affine(1.0, 0.0);
        assert_eq!(constant.integral(5.0), 5.0);
    }

    #[test]
    fn builtin_scenarios_validate_cleanly() {
        for name in ["appendix-g", "appendix-d"] {
            let s = builtin_scenario(name).unwrap();
            assert!(
                validate_scenario(&s).is_empty(),
                "{name} should be well-formed"
            );
        }
        assert!(builtin_scenario("no-such-scenario").is_none());
    }

    #[test]
    fn travel_time_rejects_negative_flow() {
        let s = builtin_scenario("appendix-g").unwrap();
        let e = s.edge("e1").unwrap();
        assert!(travel_time(e, -1.0).is_err());
        assert_eq!(travel_time(e, 0.0).unwrap(), 0.0);
    }

    #[test]
    fn validation_flags_bad_fields() {
        let mut s = builtin_scenario("appendix-g").unwrap();
        s.groups[1].demand = -1.0;
        s.edges[0].latency.exponent = 0.5;
        let issues = validate_scenario(&s);
        assert!(issues
            .iter()
            .any(|i| i.subject == "group M" && i.message.contains("demand")));
        assert!(issues
            .iter()
            .any(|i| i.message.contains("exponent below 1")));
    }

    #[test]
    fn validation_flags_disconnected_and_degenerate_pairs() {
        let mut s = builtin_scenario("appendix-d").unwrap();
        s.groups[0].destination = "v4".into(); // v1 → v4 has no edges
        let issues = validate_scenario(&s);
        assert!(issues
            .iter()
            .any(|i| i.message.contains("disconnected O-D pair for group H")));

        let mut s2 = builtin_scenario("appendix-g").unwrap();
        s2.groups[0].destination = "v1".into();
        let issues2 = validate_scenario(&s2);
        assert!(issues2
            .iter()
            .any(|i| i.subject == "group H" && i.message.contains("origin equals destination")));
    }

    #[test]
    fn validation_rejects_self_loops_and_duplicate_ids() {
        let mut s = builtin_scenario("appendix-g").unwrap();
        s.edges[0].head = "v1".into();
        s.edges[1].id = "e1".into();
        let issues = validate_scenario(&s);
        assert!(issues.iter().any(|i| i.message.contains("self-loop")));
        assert!(issues
            .iter()
            .any(|i| i.message.contains("duplicate edge id")));
    }

    #[test]
    fn paths_are_enumerated_in_lexicographic_order() {
        let s = builtin_scenario("appendix-g").unwrap();
        let e = enumerate_paths(&s, "M", DEFAULT_PATH_CAP).unwrap();
        assert!(!e.truncated);
        let seqs: Vec<Vec<String>> = e.paths.iter().map(|p| p.edges.clone()).collect();
        assert_eq!(seqs, vec![vec!["e1".to_string()], vec!["e2".to_string()]]);
    }

    #[test]
    fn disjoint_od_pair_sees_only_its_own_paths() {
        let s = builtin_scenario("appendix-d").unwrap();
        let e = enumerate_paths(&s, "L", DEFAULT_PATH_CAP).unwrap();
        assert_eq!(e.paths.len(), 2);
        assert_eq!(e.paths[0].edges, vec!["e2".to_string()]);
        assert_eq!(e.paths[1].edges, vec!["e3".to_string()]);
        let h = enumerate_paths(&s, "H", DEFAULT_PATH_CAP).unwrap();
        assert_eq!(h.paths.len(), 1);
    }

    #[test]
    fn multi_hop_paths_chain_and_stay_simple() {
        let s = Scenario {
            nodes: vec!["a".into(), "b".into(), "c".into()],
            edges: vec![
                Edge {
                    id: "ab".into(),
                    tail: "a".into(),
                    head: "b".into(),
                    latency: LatencyFn::affine(1.0, 1.0),
                },
                Edge {
                    id: "ac".into(),
                    tail: "a".into(),
                    head: "c".into(),
                    latency: LatencyFn::affine(3.0, 1.0),
                },
                Edge {
                    id: "bc".into(),
                    tail: "b".into(),
                    head: "c".into(),
                    latency: LatencyFn::affine(1.0, 1.0),
                },
                Edge {
                    id: "ba".into(),
                    tail: "b".into(),
                    head: "a".into(),
                    latency: LatencyFn::affine(1.0, 1.0),
                },
            ],
            groups: vec![UserGroup {
                id: "g".into(),
                vot: 1.0,
                income: 10.0,
                demand: 1.0,
                origin: "a".into(),
                destination: "c".into(),
            }],
            beta: 1.0,
        };
        let e = enumerate_paths(&s, "g", DEFAULT_PATH_CAP).unwrap();
        let seqs: Vec<Vec<String>> = e.paths.iter().map(|p| p.edges.clone()).collect();
        assert_eq!(
            seqs,
            vec![
                vec!["ab".to_string(), "bc".to_string()],
                vec!["ac".to_string()],
            ]
        );
    }

    #[test]
    fn path_cap_sets_truncation_flag() {
        let s = builtin_scenario("appendix-g").unwrap();
        let e = enumerate_paths(&s, "M", 1).unwrap();
        assert!(e.truncated);
        assert_eq!(e.paths.len(), 1);
        assert_eq!(e.paths[0].edges, vec!["e1".to_string()]);
    }

    #[test]
    fn document_round_trip_is_bit_exact() {
        let s = builtin_scenario("appendix-g").unwrap();
        let doc = s.to_document();
        let back = load_scenario(&doc).unwrap();
        assert_eq!(s, back);
        // A second round trip yields the identical document byte-for-byte.
        assert_eq!(doc, back.to_document());
    }

    #[test]
    fn load_accepts_numbers_and_decimal_strings() {
        let doc = r#"{
            "nodes": ["u", "w"],
            "edges": [{"id": "e", "tail": "u", "head": "w", "a": "1.5", "b": 0.25, "p": "1"}],
            "groups": [{"id": "g", "vot": 1, "income": "10", "demand": 2, "origin": "u", "destination": "w"}],
            "beta": "0.5"
        }"#;
        let s = load_scenario(doc).unwrap();
        assert_eq!(s.edges[0].latency.free_flow, 1.5);
        assert_eq!(s.edges[0].latency.coeff, 0.25);
        assert_eq!(s.groups[0].income, 10.0);
        assert_eq!(s.beta, 0.5);
    }

    #[test]
    fn load_rejects_unknown_keys_and_invalid_groups() {
        let with_unknown = r#"{
            "nodes": ["u", "w"],
            "edges": [],
            "groups": [],
            "beta": 1,
            "capacity": 3
        }"#;
        assert!(matches!(
            load_scenario(with_unknown),
            Err(NetworkError::Parse(_))
        ));

        let bad_group = r#"{
            "nodes": ["u", "w"],
            "edges": [{"id": "e", "tail": "u", "head": "w", "a": 0, "b": 1, "p": 1}],
            "groups": [{"id": "g", "vot": 1, "income": 10, "demand": -1, "origin": "u", "destination": "w"}],
            "beta": 1
        }"#;
        match load_scenario(bad_group) {
            Err(NetworkError::Invalid(issues)) => {
                assert!(issues.iter().any(|i| i.subject == "group g"));
            }
            other => panic!("expected validation failure, got {other:?}"),
        }
    }
}
