//! Equilibrium verification: per-path gap checks, the cost identity, group
//! costs at arbitrary flows, and a grid-based search for profitable
//! single-group deviations under a refund policy.

use std::collections::BTreeMap;

use serde::Serialize;
use thiserror::Error;

use crate::assignment::{
    solve_exogenous_equilibrium, total_system_cost, AssignmentError, EquilibriumSolution,
    FlowPattern, FlowRow, SolveOptions, TollVector,
};
use crate::cprr::{CprrError, RefundPolicy, UntolledBaseline};
use crate::network::{
    enumerate_paths, travel_time, NetworkError, Path, Scenario, DEFAULT_PATH_CAP,
};

/// Gains below this threshold (money per user) do not count as profitable.
pub const DEVIATION_GAIN_TOL: f64 = 1e-9;

/// Errors from verification.
#[derive(Debug, Error)]
pub enum VerifyError {
    #[error(transparent)]
    Network(#[from] NetworkError),
    #[error(transparent)]
    Assignment(#[from] AssignmentError),
    #[error(transparent)]
    Cprr(#[from] CprrError),
    #[error("flow pattern has no flow for group {0}")]
    MissingGroupFlow(String),
    #[error("path enumeration truncated for group {0}; cannot certify")]
    TruncatedPaths(String),
    #[error("{0} deviation candidates exceed the search cap")]
    TooManyCandidates(u128),
}

/// Result of the per-path gap check at a flow.
#[derive(Debug, Clone, Serialize)]
pub struct GapReport {
    pub pass: bool,
    /// Worst used-path excess over the group's minimum path cost, money.
    pub group_gaps: BTreeMap<String, f64>,
    /// Minimum generalized path cost per group at the flow, money.
    pub group_cost: BTreeMap<String, f64>,
    pub failures: Vec<String>,
}

/// One candidate reassignment of a group's demand and its effect.
#[derive(Debug, Clone, Serialize)]
pub struct DeviationReport {
    pub group: String,
    /// The deviating group's path flows.
    pub split: Vec<FlowRow>,
    /// Refund-inclusive cost per user before the deviation, money.
    pub cost_before: f64,
    /// Refund-inclusive cost per user after the deviation, money.
    pub cost_after: f64,
    /// cost_before − cost_after.
    pub gain: f64,
    pub profitable: bool,
}

/// Demand-weighted average money cost of a group's used paths:
/// Σ_P f_P·(v_g·t_P + τ_P) / Σ_P f_P. Equals μ^g when f is an equilibrium.
pub fn group_cost_under_flow(
    s: &Scenario,
    tolls: &TollVector,
    f: &FlowPattern,
    group: &str,
) -> Result<f64, VerifyError> {
    let g = s.group(group)?;
    let flows = f
        .flows
        .get(group)
        .ok_or_else(|| VerifyError::MissingGroupFlow(group.to_string()))?;
    let x = f.edge_flows(s);
    let mut weighted = 0.0;
    let mut total = 0.0;
    for (edges, &flow) in flows {
        if flow <= 0.0 {
            continue;
        }
        let mut money = 0.0;
        for e in edges {
            let edge = s.edge(e)?;
            money += g.vot * travel_time(edge, x[e])? + tolls.get(e);
        }
        weighted += flow * money;
        total += flow;
    }
    if total <= 0.0 {
        return Err(VerifyError::MissingGroupFlow(group.to_string()));
    }
    Ok(weighted / total)
}

/// Checks that every used path's money cost is within tolerance of the
/// group's cheapest path: the defining property of an equilibrium.
pub fn verify_exogenous_equilibrium(
    s: &Scenario,
    tolls: &TollVector,
    f: &FlowPattern,
    tol: f64,
) -> Result<GapReport, VerifyError> {
    let x = f.edge_flows(s);
    let times: BTreeMap<String, f64> = s
        .edges
        .iter()
        .map(|e| Ok((e.id.clone(), travel_time(e, x[&e.id])?)))
        .collect::<Result<_, NetworkError>>()?;

    let mut group_gaps = BTreeMap::new();
    let mut group_cost = BTreeMap::new();
    let mut failures = Vec::new();
    for g in &s.groups {
        let paths = certified_paths(s, &g.id)?;
        let money = |edges: &[String]| -> f64 {
            edges.iter().map(|e| g.vot * times[e] + tolls.get(e)).sum()
        };
        let min_cost = paths
            .iter()
            .map(|p| money(&p.edges))
            .fold(f64::INFINITY, f64::min);
        let mut worst = 0.0_f64;
        if let Some(flows) = f.flows.get(&g.id) {
            for (edges, &flow) in flows {
                if flow > tol {
                    worst = worst.max(money(edges) - min_cost);
                }
            }
        }
        if worst > tol * min_cost.abs().max(1.0) {
            failures.push(g.id.clone());
        }
        group_gaps.insert(g.id.clone(), worst);
        group_cost.insert(g.id.clone(), min_cost);
    }
    Ok(GapReport {
        pass: failures.is_empty(),
        group_gaps,
        group_cost,
        failures,
    })
}

/// |C − (Σ_g μ^g·d_g − Π)|: zero, up to solver tolerance, at equilibrium.
pub fn verify_cost_identity(s: &Scenario, eq: &EquilibriumSolution) -> f64 {
    let mu_sum: f64 = s
        .groups
        .iter()
        .map(|g| eq.group_cost.get(&g.id).copied().unwrap_or(0.0) * g.demand)
        .sum();
    (eq.total_cost - (mu_sum - eq.revenue)).abs()
}

/// Searches for a group that can cut its refund-inclusive cost by rerouting
/// its own demand, everyone else held fixed.
///
/// Candidates per group are all splits of its demand over its paths in
/// `grid` equal increments (the pure one-path shifts are the corner splits).
/// Refunds are recomputed at every candidate flow through `policy`, against
/// the untolled equilibrium of the scenario. An empty report certifies the
/// flow as deviation-proof at the grid resolution.
pub fn verify_endogenous_equilibrium(
    s: &Scenario,
    tolls: &TollVector,
    policy: &RefundPolicy,
    f: &FlowPattern,
    grid: u32,
) -> Result<Vec<DeviationReport>, VerifyError> {
    if grid < 2 {
        return Err(
            AssignmentError::InvalidOption(format!("grid must be at least 2, got {grid}")).into(),
        );
    }
    let eq_untolled = solve_exogenous_equilibrium(s, &TollVector::zero(), SolveOptions::default())?;
    let baseline = UntolledBaseline::from_untolled(s, &eq_untolled)?;

    let current_costs = all_group_costs(s, tolls, f)?;
    let current_total = total_system_cost(s, f)?;
    let (current_refunds, _) =
        policy.refunds_for_flow(s, &baseline, &current_costs, current_total)?;

    let mut reports = Vec::new();
    for g in &s.groups {
        let paths = certified_paths(s, &g.id)?;
        let m = paths.len();
        let candidates = compositions_count(grid, m);
        if candidates > 2_000_000 {
            return Err(VerifyError::TooManyCandidates(candidates));
        }
        let cost_before = current_costs[&g.id] - current_refunds.get(&g.id);

        let mut counts = vec![0u32; m];
        let mut stack = Vec::new();
        enumerate_compositions(0, grid, &mut counts, &mut stack);
        for counts in &stack {
            let mut deviated = f.clone();
            let mut split = BTreeMap::new();
            for (p, &k) in paths.iter().zip(counts.iter()) {
                split.insert(p.edges.clone(), g.demand * k as f64 / grid as f64);
            }
            deviated.flows.insert(g.id.clone(), split.clone());

            let new_costs = all_group_costs(s, tolls, &deviated)?;
            let new_total = total_system_cost(s, &deviated)?;
            let (new_refunds, _) = policy.refunds_for_flow(s, &baseline, &new_costs, new_total)?;
            let cost_after = new_costs[&g.id] - new_refunds.get(&g.id);
            let gain = cost_before - cost_after;
            if gain > DEVIATION_GAIN_TOL {
                reports.push(DeviationReport {
                    group: g.id.clone(),
                    split: split
                        .into_iter()
                        .map(|(edges, flow)| FlowRow {
                            group: g.id.clone(),
                            edges,
                            flow,
                        })
                        .collect(),
                    cost_before,
                    cost_after,
                    gain,
                    profitable: true,
                });
            }
        }
    }
    Ok(reports)
}

fn all_group_costs(
    s: &Scenario,
    tolls: &TollVector,
    f: &FlowPattern,
) -> Result<BTreeMap<String, f64>, VerifyError> {
    s.groups
        .iter()
        .map(|g| Ok((g.id.clone(), group_cost_under_flow(s, tolls, f, &g.id)?)))
        .collect()
}

fn certified_paths(s: &Scenario, group: &str) -> Result<Vec<Path>, VerifyError> {
    let enumeration = enumerate_paths(s, group, DEFAULT_PATH_CAP)?;
    if enumeration.truncated {
        return Err(VerifyError::TruncatedPaths(group.to_string()));
    }
    Ok(enumeration.paths)
}

/// Number of ways to split `grid` increments over `parts` paths.
fn compositions_count(grid: u32, parts: usize) -> u128 {
    // C(grid + parts − 1, parts − 1), small arguments only.
    let mut c: u128 = 1;
    for i in 0..parts.saturating_sub(1) as u128 {
        c = c * (grid as u128 + i + 1) / (i + 1);
    }
    c
}

fn enumerate_compositions(
    slot: usize,
    remaining: u32,
    counts: &mut Vec<u32>,
    out: &mut Vec<Vec<u32>>,
) {
    if slot + 1 == counts.len() {
        counts[slot] = remaining;
        out.push(counts.clone());
        counts[slot] = 0;
        return;
    }
    for k in 0..=remaining {
        counts[slot] = k;
        enumerate_compositions(slot + 1, remaining - k, counts, out);
    }
    counts[slot] = 0;
}
