//! Multi-class traffic assignment: a Frank-Wolfe equilibrium solver over
//! enumerated paths, a closed-form oracle for parallel affine networks, and
//! exhaustive search for minimum-total-cost flows at desk scale.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::network::{
    enumerate_paths, travel_time, NetworkError, Path, Scenario, DEFAULT_PATH_CAP,
};

/// Errors from assignment computations.
#[derive(Debug, Error)]
pub enum AssignmentError {
    #[error(transparent)]
    Network(#[from] NetworkError),
    #[error("negative toll {toll} on edge {edge}")]
    NegativeToll { edge: String, toll: f64 },
    #[error("toll names unknown edge {0}")]
    UnknownTollEdge(String),
    #[error("path enumeration truncated for group {0}; cannot solve exactly")]
    TruncatedPaths(String),
    #[error("solver did not converge: relative gap {gap:.3e} after {iterations} iterations")]
    NotConverged {
        gap: f64,
        iterations: u64,
        /// Best iterate reached before giving up.
        best: Box<EquilibriumSolution>,
    },
    #[error("unsupported network structure: {0}")]
    UnsupportedStructure(String),
    #[error("{total} paths across groups exceeds the exhaustive-search cap of {cap}")]
    TooManyPaths { total: usize, cap: usize },
    #[error("invalid option: {0}")]
    InvalidOption(String),
}

/// Per-edge money tolls; unlisted edges are untolled.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct TollVector {
    pub tolls: BTreeMap<String, f64>,
}

impl TollVector {
    /// The all-zero toll vector.
    pub fn zero() -> Self {
        TollVector::default()
    }

    pub fn from_pairs<I, S>(pairs: I) -> Self
    where
        I: IntoIterator<Item = (S, f64)>,
        S: Into<String>,
    {
        TollVector {
            tolls: pairs.into_iter().map(|(e, t)| (e.into(), t)).collect(),
        }
    }

    /// The toll on `edge`, zero when unlisted.
    pub fn get(&self, edge: &str) -> f64 {
        self.tolls.get(edge).copied().unwrap_or(0.0)
    }

    pub fn set(&mut self, edge: impl Into<String>, toll: f64) {
        self.tolls.insert(edge.into(), toll);
    }

    /// Sum of tolls along an edge sequence.
    pub fn along(&self, edges: &[String]) -> f64 {
        edges.iter().map(|e| self.get(e)).sum()
    }

    /// Checks every listed edge exists and every toll is nonnegative.
    pub fn validate(&self, s: &Scenario) -> Result<(), AssignmentError> {
        for (edge, &toll) in &self.tolls {
            if s.edge(edge).is_err() {
                return Err(AssignmentError::UnknownTollEdge(edge.clone()));
            }
            if !(toll >= 0.0) {
                return Err(AssignmentError::NegativeToll {
                    edge: edge.clone(),
                    toll,
                });
            }
        }
        Ok(())
    }
}

/// Path flows per group; paths are identified by their ordered edge-id lists.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct FlowPattern {
    pub flows: BTreeMap<String, BTreeMap<Vec<String>, f64>>,
}

/// One path-flow entry, the serialized form of a `FlowPattern` row.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FlowRow {
    pub group: String,
    pub edges: Vec<String>,
    pub flow: f64,
}

impl FlowPattern {
    pub fn new() -> Self {
        FlowPattern::default()
    }

    pub fn set_flow(&mut self, group: impl Into<String>, edges: Vec<String>, flow: f64) {
        self.flows
            .entry(group.into())
            .or_default()
            .insert(edges, flow);
    }

    pub fn flow(&self, group: &str, edges: &[String]) -> f64 {
        self.flows
            .get(group)
            .and_then(|m| m.get(edges))
            .copied()
            .unwrap_or(0.0)
    }

    /// Places each group's entire demand on one path.
    pub fn from_single_paths<I>(assignments: I, s: &Scenario) -> Self
    where
        I: IntoIterator<Item = Path>,
    {
        let mut out = FlowPattern::new();
        for p in assignments {
            let demand = s.group(&p.group).map(|g| g.demand).unwrap_or(0.0);
            out.set_flow(p.group.clone(), p.edges, demand);
        }
        out
    }

    /// Aggregate edge flows `x_e`, with every scenario edge present.
    pub fn edge_flows(&self, s: &Scenario) -> BTreeMap<String, f64> {
        let mut x: BTreeMap<String, f64> = s.edges.iter().map(|e| (e.id.clone(), 0.0)).collect();
        for group_flows in self.flows.values() {
            for (edges, f) in group_flows {
                for e in edges {
                    *x.entry(e.clone()).or_insert(0.0) += f;
                }
            }
        }
        x
    }

    /// One group's edge flows `x_e^g`.
    pub fn group_edge_flows(&self, group: &str) -> BTreeMap<String, f64> {
        let mut x = BTreeMap::new();
        if let Some(group_flows) = self.flows.get(group) {
            for (edges, f) in group_flows {
                for e in edges {
                    *x.entry(e.clone()).or_insert(0.0) += f;
                }
            }
        }
        x
    }

    /// Total flow a group has placed across its paths.
    pub fn group_total(&self, group: &str) -> f64 {
        self.flows
            .get(group)
            .map(|m| m.values().sum())
            .unwrap_or(0.0)
    }

    /// Demand conservation and nonnegativity, to `rel_tol` relative.
    pub fn is_feasible(&self, s: &Scenario, rel_tol: f64) -> bool {
        for g in &s.groups {
            let total = self.group_total(&g.id);
            if (total - g.demand).abs() > rel_tol * g.demand.max(1.0) {
                return false;
            }
        }
        self.flows
            .values()
            .flat_map(|m| m.values())
            .all(|&f| f >= -1e-12)
    }

    /// Flattened rows in deterministic (group, path) order.
    pub fn rows(&self) -> Vec<FlowRow> {
        let mut rows = Vec::new();
        for (group, group_flows) in &self.flows {
            for (edges, &flow) in group_flows {
                rows.push(FlowRow {
                    group: group.clone(),
                    edges: edges.clone(),
                    flow,
                });
            }
        }
        rows
    }
}

impl Serialize for FlowPattern {
    fn serialize<S: serde::Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        self.rows().serialize(serializer)
    }
}

impl<'de> Deserialize<'de> for FlowPattern {
    fn deserialize<D: serde::Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let rows = Vec::<FlowRow>::deserialize(deserializer)?;
        let mut out = FlowPattern::new();
        for r in rows {
            out.set_flow(r.group, r.edges, r.flow);
        }
        Ok(out)
    }
}

/// Stopping rule for the equilibrium solver.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SolveOptions {
    /// Relative-gap threshold.
    pub tolerance: f64,
    pub max_iterations: u64,
}

impl Default for SolveOptions {
    fn default() -> Self {
        SolveOptions {
            tolerance: 1e-8,
            max_iterations: 100_000,
        }
    }
}

/// A solved (or best-effort) equilibrium.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EquilibriumSolution {
    pub flows: FlowPattern,
    /// Per-group generalized cost μ^g in money: min over paths of
    /// Σ_e (v_g·t_e + τ_e).
    pub group_cost: BTreeMap<String, f64>,
    /// Total system travel cost C in money (tolls excluded).
    pub total_cost: f64,
    /// Toll revenue Π = Σ_e τ_e·x_e.
    pub revenue: f64,
    /// Achieved relative gap.
    pub gap: f64,
    pub iterations: u64,
}

/// Beckmann potential Σ_e ∫_0^{x_e} t_e(ω)dω + Σ_e Σ_g τ_e·x_e^g / v_g.
pub fn beckmann_potential(s: &Scenario, tolls: &TollVector, f: &FlowPattern) -> f64 {
    let x = f.edge_flows(s);
    let mut phi: f64 = s.edges.iter().map(|e| e.latency.integral(x[&e.id])).sum();
    for g in &s.groups {
        for (edge, xg) in f.group_edge_flows(&g.id) {
            phi += tolls.get(&edge) * xg / g.vot;
        }
    }
    phi
}

/// Total monetary travel cost Σ_e Σ_g v_g·x_e^g·t_e(x_e), tolls excluded.
pub fn total_system_cost(s: &Scenario, f: &FlowPattern) -> Result<f64, AssignmentError> {
    let x = f.edge_flows(s);
    let mut cost = 0.0;
    for g in &s.groups {
        for (edge_id, xg) in f.group_edge_flows(&g.id) {
            let e = s.edge(&edge_id)?;
            cost += g.vot * xg * travel_time(e, x[&edge_id])?;
        }
    }
    Ok(cost)
}

/// Toll revenue Σ_e τ_e·x_e for the given aggregate edge flows.
pub fn total_revenue(tolls: &TollVector, edge_flows: &BTreeMap<String, f64>) -> f64 {
    tolls
        .tolls
        .iter()
        .map(|(e, t)| t * edge_flows.get(e).copied().unwrap_or(0.0))
        .sum()
}

/// Cheapest path for a group under edge weight t_e(x_e) + τ_e/v_g.
///
/// Ties go to the lexicographically smallest edge sequence.
pub fn group_generalized_shortest_path(
    s: &Scenario,
    tolls: &TollVector,
    group: &str,
    edge_flows: &BTreeMap<String, f64>,
) -> Result<Path, AssignmentError> {
    let paths = group_paths(s, group)?;
    let times = edge_times(s, edge_flows)?;
    let vot = s.group(group)?.vot;
    let (best, _) = cheapest(&paths, &times, tolls, vot);
    Ok(best.clone())
}

/// Frank-Wolfe on the Beckmann potential with exact bisection line search.
pub fn solve_exogenous_equilibrium(
    s: &Scenario,
    tolls: &TollVector,
    opts: SolveOptions,
) -> Result<EquilibriumSolution, AssignmentError> {
    if !(opts.tolerance > 0.0) {
        return Err(AssignmentError::InvalidOption(format!(
            "tolerance must be positive, got {}",
            opts.tolerance
        )));
    }
    tolls.validate(s)?;
    let path_sets: BTreeMap<String, Vec<Path>> = s
        .groups
        .iter()
        .map(|g| Ok((g.id.clone(), group_paths(s, &g.id)?)))
        .collect::<Result<_, AssignmentError>>()?;

    // Start from all-or-nothing at free flow.
    let mut flow = FlowPattern::new();
    {
        let zero_flows: BTreeMap<String, f64> =
            s.edges.iter().map(|e| (e.id.clone(), 0.0)).collect();
        let times = edge_times(s, &zero_flows)?;
        for g in &s.groups {
            let (best, _) = cheapest(&path_sets[&g.id], &times, tolls, g.vot);
            flow.set_flow(g.id.clone(), best.edges.clone(), g.demand);
        }
    }

    let mut last_phi = f64::INFINITY;
    let mut iter: u64 = 0;
    loop {
        debug_assert!(flow.is_feasible(s, 1e-12), "infeasible iterate");
        let x = flow.edge_flows(s);
        let times = edge_times(s, &x)?;

        // Linearization gap and the all-or-nothing target in one pass.
        let mut numerator = 0.0;
        let mut target = FlowPattern::new();
        let mut min_weights = BTreeMap::new();
        for g in &s.groups {
            let (best, w_min) = cheapest(&path_sets[&g.id], &times, tolls, g.vot);
            for (edges, f) in &flow.flows[&g.id] {
                numerator += f * generalized_time(edges, &times, tolls, g.vot);
            }
            numerator -= g.demand * w_min;
            target.set_flow(g.id.clone(), best.edges.clone(), g.demand);
            min_weights.insert(g.id.clone(), w_min);
        }
        let phi = beckmann_potential(s, tolls, &flow);
        debug_assert!(
            phi <= last_phi + 1e-9 * (1.0 + phi.abs()),
            "potential rose from {last_phi} to {phi}"
        );
        last_phi = phi;
        let gap = numerator.max(0.0) / phi.abs().max(1e-300);

        if gap <= opts.tolerance || iter == opts.max_iterations {
            let solution = assemble(s, tolls, &flow, &min_weights, gap, iter)?;
            if gap <= opts.tolerance {
                return Ok(solution);
            }
            return Err(AssignmentError::NotConverged {
                gap,
                iterations: iter,
                best: Box::new(solution),
            });
        }

        let alpha = line_search(s, tolls, &flow, &target);
        blend(&mut flow, &target, alpha, s);
        iter += 1;
    }
}

/// Derivative of the potential along `f + α(y − f)`, in closed form per edge.
fn directional_derivative(
    s: &Scenario,
    tolls: &TollVector,
    f: &FlowPattern,
    y: &FlowPattern,
    alpha: f64,
) -> f64 {
    let xf = f.edge_flows(s);
    let xy = y.edge_flows(s);
    let mut d = 0.0;
    for e in &s.edges {
        let delta = xy[&e.id] - xf[&e.id];
        if delta != 0.0 {
            d += e.latency.value(xf[&e.id] + alpha * delta) * delta;
        }
    }
    for g in &s.groups {
        let gf = f.group_edge_flows(&g.id);
        let gy = y.group_edge_flows(&g.id);
        for e in &s.edges {
            let delta = gy.get(&e.id).unwrap_or(&0.0) - gf.get(&e.id).unwrap_or(&0.0);
            d += tolls.get(&e.id) * delta / g.vot;
        }
    }
    d
}

/// Bisection on the sign of the directional derivative, 50 halvings.
fn line_search(s: &Scenario, tolls: &TollVector, f: &FlowPattern, y: &FlowPattern) -> f64 {
    if directional_derivative(s, tolls, f, y, 1.0) <= 0.0 {
        return 1.0;
    }
    let (mut lo, mut hi) = (0.0_f64, 1.0_f64);
    for _ in 0..50 {
        let mid = 0.5 * (lo + hi);
        let d = directional_derivative(s, tolls, f, y, mid);
        if d == 0.0 {
            return mid;
        }
        if d > 0.0 {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    0.5 * (lo + hi)
}

fn blend(f: &mut FlowPattern, y: &FlowPattern, alpha: f64, s: &Scenario) {
    for (group, group_flows) in &mut f.flows {
        let target = y.flows.get(group);
        let keys: BTreeSet<Vec<String>> = group_flows
            .keys()
            .chain(target.iter().flat_map(|m| m.keys()))
            .cloned()
            .collect();
        for key in keys {
            let cur = group_flows.get(&key).copied().unwrap_or(0.0);
            let tgt = target.and_then(|m| m.get(&key)).copied().unwrap_or(0.0);
            group_flows.insert(key, (1.0 - alpha) * cur + alpha * tgt);
        }
        // Rescale away the rounding drift so demand stays conserved exactly.
        if let Ok(g) = s.group(group) {
            let total: f64 = group_flows.values().sum();
            if total > 0.0 && total != g.demand {
                let scale = g.demand / total;
                for v in group_flows.values_mut() {
                    *v *= scale;
                }
            }
        }
    }
}

fn assemble(
    s: &Scenario,
    tolls: &TollVector,
    flow: &FlowPattern,
    min_weights: &BTreeMap<String, f64>,
    gap: f64,
    iterations: u64,
) -> Result<EquilibriumSolution, AssignmentError> {
    let x = flow.edge_flows(s);
    let group_cost: BTreeMap<String, f64> = s
        .groups
        .iter()
        .map(|g| (g.id.clone(), g.vot * min_weights[&g.id]))
        .collect();
    let total_cost = total_system_cost(s, flow)?;
    let revenue = total_revenue(tolls, &x);
    let solution = EquilibriumSolution {
        flows: flow.clone(),
        group_cost,
        total_cost,
        revenue,
        gap,
        iterations,
    };
    debug_assert!(
        gap > 1e-7 || {
            let mu_sum: f64 = s
                .groups
                .iter()
                .map(|g| solution.group_cost[&g.id] * g.demand)
                .sum();
            (solution.total_cost - (mu_sum - solution.revenue)).abs()
                <= 1e-6 * solution.total_cost.max(1.0)
        },
        "cost identity violated at convergence"
    );
    Ok(solution)
}

/// Exact equilibrium for parallel affine networks by support enumeration.
///
/// Tries candidate used-edge sets per group in a fixed order and accepts the
/// first whose equal-cost flow split satisfies all optimality conditions.
/// Same output contract as the iterative solver, with gap 0.
pub fn solve_parallel_affine_closed_form(
    s: &Scenario,
    tolls: &TollVector,
) -> Result<EquilibriumSolution, AssignmentError> {
    tolls.validate(s)?;
    if s.nodes.len() != 2 {
        return Err(AssignmentError::UnsupportedStructure(
            "expected exactly two nodes".into(),
        ));
    }
    let (tail, head) = (&s.edges[0].tail, &s.edges[0].head);
    for e in &s.edges {
        if &e.tail != tail || &e.head != head {
            return Err(AssignmentError::UnsupportedStructure(format!(
                "edge {} is not parallel to the others",
                e.id
            )));
        }
        if !(e.latency.exponent == 1.0 || e.latency.is_constant()) {
            return Err(AssignmentError::UnsupportedStructure(format!(
                "edge {} latency is not affine",
                e.id
            )));
        }
    }
    for g in &s.groups {
        if &g.origin != tail || &g.destination != head {
            return Err(AssignmentError::UnsupportedStructure(format!(
                "group {} does not travel the parallel corridor",
                g.id
            )));
        }
    }

    let mut edges: Vec<_> = s.edges.iter().collect();
    edges.sort_by(|a, b| a.id.cmp(&b.id));
    let m = edges.len();
    let k = s.groups.len();
    let combos_per_group = (1u64 << m) - 1;
    if combos_per_group.pow(k as u32) > 2_000_000 {
        return Err(AssignmentError::UnsupportedStructure(
            "too many candidate edge supports".into(),
        ));
    }

    // Odometer over per-group nonempty edge subsets, low group spins fastest.
    let mut masks = vec![1u64; k];
    loop {
        if let Some(solution) = try_support(s, tolls, &edges, &masks) {
            return Ok(solution);
        }
        let mut pos = 0;
        loop {
            if pos == k {
                return Err(AssignmentError::UnsupportedStructure(
                    "no edge support satisfied the equilibrium conditions".into(),
                ));
            }
            masks[pos] += 1;
            if masks[pos] <= combos_per_group {
                break;
            }
            masks[pos] = 1;
            pos += 1;
        }
    }
}

/// Solves the equal-generalized-cost system for one support; `None` when the
/// system is singular or the solution violates an optimality condition.
fn try_support(
    s: &Scenario,
    tolls: &TollVector,
    edges: &[&crate::network::Edge],
    masks: &[u64],
) -> Option<EquilibriumSolution> {
    let m = edges.len();
    let k = s.groups.len();

    // Unknowns: one flow per (group, used edge), then one cost level per group.
    let mut var_of = vec![vec![usize::MAX; m]; k];
    let mut n_flow = 0;
    for (gi, mask) in masks.iter().enumerate() {
        for ei in 0..m {
            if mask & (1 << ei) != 0 {
                var_of[gi][ei] = n_flow;
                n_flow += 1;
            }
        }
    }
    let n = n_flow + k;
    let mut a = vec![vec![0.0_f64; n]; n];
    let mut b = vec![0.0_f64; n];
    let mut row = 0;
    for (gi, g) in s.groups.iter().enumerate() {
        for ei in 0..m {
            if var_of[gi][ei] == usize::MAX {
                continue;
            }
            // a_e + b_e·x_e + τ_e/v_g = λ_g
            for gj in 0..k {
                if var_of[gj][ei] != usize::MAX {
                    a[row][var_of[gj][ei]] = edges[ei].latency.coeff;
                }
            }
            a[row][n_flow + gi] = -1.0;
            b[row] = -edges[ei].latency.free_flow - tolls.get(&edges[ei].id) / g.vot;
            row += 1;
        }
        // Σ_e x_{g,e} = d_g
        for ei in 0..m {
            if var_of[gi][ei] != usize::MAX {
                a[row][var_of[gi][ei]] = 1.0;
            }
        }
        b[row] = g.demand;
        row += 1;
    }
    debug_assert_eq!(row, n);
    let sol = solve_linear(a, b)?;

    // Optimality: used flows nonnegative, unused edges no cheaper.
    const SLACK: f64 = 1e-9;
    for gi in 0..k {
        for ei in 0..m {
            if var_of[gi][ei] != usize::MAX && sol[var_of[gi][ei]] < -SLACK {
                return None;
            }
        }
    }
    let mut x = vec![0.0_f64; m];
    for gi in 0..k {
        for ei in 0..m {
            if var_of[gi][ei] != usize::MAX {
                x[ei] += sol[var_of[gi][ei]].max(0.0);
            }
        }
    }
    for (gi, g) in s.groups.iter().enumerate() {
        let lambda = sol[n_flow + gi];
        for ei in 0..m {
            if var_of[gi][ei] == usize::MAX {
                let w = edges[ei].latency.value(x[ei]) + tolls.get(&edges[ei].id) / g.vot;
                if w < lambda - SLACK {
                    return None;
                }
            }
        }
    }

    let mut flow = FlowPattern::new();
    let mut group_cost = BTreeMap::new();
    for (gi, g) in s.groups.iter().enumerate() {
        for ei in 0..m {
            if var_of[gi][ei] != usize::MAX {
                flow.set_flow(
                    g.id.clone(),
                    vec![edges[ei].id.clone()],
                    sol[var_of[gi][ei]].max(0.0),
                );
            }
        }
        group_cost.insert(g.id.clone(), g.vot * sol[n_flow + gi]);
    }
    let total_cost = total_system_cost(s, &flow).ok()?;
    let edge_flow_map = flow.edge_flows(s);
    let revenue = total_revenue(tolls, &edge_flow_map);
    Some(EquilibriumSolution {
        flows: flow,
        group_cost,
        total_cost,
        revenue,
        gap: 0.0,
        iterations: 0,
    })
}

/// Gaussian elimination with partial pivoting; `None` on a singular system.
fn solve_linear(mut a: Vec<Vec<f64>>, mut b: Vec<f64>) -> Option<Vec<f64>> {
    let n = b.len();
    for col in 0..n {
        let pivot =
            (col..n).max_by(|&i, &j| a[i][col].abs().partial_cmp(&a[j][col].abs()).unwrap())?;
        if a[pivot][col].abs() < 1e-12 {
            return None;
        }
        a.swap(col, pivot);
        b.swap(col, pivot);
        for r in col + 1..n {
            let factor = a[r][col] / a[col][col];
            if factor != 0.0 {
                for c in col..n {
                    a[r][c] -= factor * a[col][c];
                }
                b[r] -= factor * b[col];
            }
        }
    }
    let mut x = vec![0.0; n];
    for r in (0..n).rev() {
        let mut acc = b[r];
        for c in r + 1..n {
            acc -= a[r][c] * x[c];
        }
        x[r] = acc / a[r][r];
    }
    Some(x)
}

/// Exhaustive search over per-group path splits for the cheapest total cost.
///
/// Splits each group's demand over its paths in `grid` equal increments and
/// returns the feasible combination minimizing `total_system_cost`. Only for
/// desk-scale instances: errors when groups carry more than 6 paths in total.
pub fn search_system_optimal(s: &Scenario, grid: u32) -> Result<FlowPattern, AssignmentError> {
    if grid < 2 {
        return Err(AssignmentError::InvalidOption(format!(
            "grid must be at least 2, got {grid}"
        )));
    }
    let path_sets: Vec<(String, f64, Vec<Path>)> = s
        .groups
        .iter()
        .map(|g| Ok((g.id.clone(), g.demand, group_paths(s, &g.id)?)))
        .collect::<Result<_, AssignmentError>>()?;
    let total_paths: usize = path_sets.iter().map(|(_, _, p)| p.len()).sum();
    if total_paths > 6 {
        return Err(AssignmentError::TooManyPaths {
            total: total_paths,
            cap: 6,
        });
    }

    let edge_ids: Vec<&str> = s.edges.iter().map(|e| e.id.as_str()).collect();
    let edge_idx: BTreeMap<&str, usize> =
        edge_ids.iter().enumerate().map(|(i, &e)| (e, i)).collect();
    // Flattened (vot, per-unit demand share, edge indices) per path.
    let mut flat: Vec<(f64, f64, Vec<usize>)> = Vec::new();
    let mut group_spans = Vec::new();
    for (gid, demand, paths) in &path_sets {
        let vot = s.group(gid).unwrap().vot;
        let start = flat.len();
        for p in paths {
            let idxs = p.edges.iter().map(|e| edge_idx[e.as_str()]).collect();
            flat.push((vot, *demand, idxs));
        }
        group_spans.push(start..flat.len());
    }

    let mut counts = vec![0u32; flat.len()];
    let mut best: Option<(f64, Vec<u32>)> = None;
    search_splits(
        s,
        &flat,
        &group_spans,
        grid,
        0,
        &mut counts,
        &mut best,
        edge_ids.len(),
    );
    let (_, best_counts) = best.expect("at least one feasible split exists");

    let mut out = FlowPattern::new();
    for ((gid, demand, paths), span) in path_sets.iter().zip(&group_spans) {
        for (p, slot) in paths.iter().zip(span.clone()) {
            let f = *demand * best_counts[slot] as f64 / grid as f64;
            out.set_flow(gid.clone(), p.edges.clone(), f);
        }
    }
    Ok(out)
}

#[allow(clippy::too_many_arguments)]
fn search_splits(
    s: &Scenario,
    flat: &[(f64, f64, Vec<usize>)],
    spans: &[std::ops::Range<usize>],
    grid: u32,
    group: usize,
    counts: &mut Vec<u32>,
    best: &mut Option<(f64, Vec<u32>)>,
    n_edges: usize,
) {
    if group == spans.len() {
        let mut x = vec![0.0_f64; n_edges];
        for (slot, (_, demand, idxs)) in flat.iter().enumerate() {
            let f = demand * counts[slot] as f64 / grid as f64;
            for &e in idxs {
                x[e] += f;
            }
        }
        let mut cost = 0.0;
        for (slot, (vot, demand, idxs)) in flat.iter().enumerate() {
            let f = demand * counts[slot] as f64 / grid as f64;
            if f > 0.0 {
                for &e in idxs {
                    cost += vot * f * s.edges[e].latency.value(x[e]);
                }
            }
        }
        if best.as_ref().map_or(true, |(c, _)| cost < *c) {
            *best = Some((cost, counts.clone()));
        }
        return;
    }
    let span = spans[group].clone();
    assign_counts(
        s, flat, spans, grid, group, span.start, grid, counts, best, n_edges,
    );
}

#[allow(clippy::too_many_arguments)]
fn assign_counts(
    s: &Scenario,
    flat: &[(f64, f64, Vec<usize>)],
    spans: &[std::ops::Range<usize>],
    grid: u32,
    group: usize,
    slot: usize,
    remaining: u32,
    counts: &mut Vec<u32>,
    best: &mut Option<(f64, Vec<u32>)>,
    n_edges: usize,
) {
    let span = spans[group].clone();
    if slot + 1 == span.end {
        counts[slot] = remaining;
        search_splits(s, flat, spans, grid, group + 1, counts, best, n_edges);
        counts[slot] = 0;
        return;
    }
    for k in 0..=remaining {
        counts[slot] = k;
        assign_counts(
            s,
            flat,
            spans,
            grid,
            group,
            slot + 1,
            remaining - k,
            counts,
            best,
            n_edges,
        );
    }
    counts[slot] = 0;
}

/// Generalized travel time of a path: Σ_e t_e + Σ_e τ_e/v.
fn generalized_time(
    edges: &[String],
    times: &BTreeMap<String, f64>,
    tolls: &TollVector,
    vot: f64,
) -> f64 {
    edges.iter().map(|e| times[e] + tolls.get(e) / vot).sum()
}

fn cheapest<'a>(
    paths: &'a [Path],
    times: &BTreeMap<String, f64>,
    tolls: &TollVector,
    vot: f64,
) -> (&'a Path, f64) {
    let mut best = &paths[0];
    let mut best_w = generalized_time(&best.edges, times, tolls, vot);
    for p in &paths[1..] {
        let w = generalized_time(&p.edges, times, tolls, vot);
        if w < best_w {
            best = p;
            best_w = w;
        }
    }
    (best, best_w)
}

fn edge_times(
    s: &Scenario,
    edge_flows: &BTreeMap<String, f64>,
) -> Result<BTreeMap<String, f64>, AssignmentError> {
    s.edges
        .iter()
        .map(|e| {
            let x = edge_flows.get(&e.id).copied().unwrap_or(0.0);
            Ok((e.id.clone(), travel_time(e, x)?))
        })
        .collect()
}

fn group_paths(s: &Scenario, group: &str) -> Result<Vec<Path>, AssignmentError> {
    let enumeration = enumerate_paths(s, group, DEFAULT_PATH_CAP)?;
    if enumeration.truncated {
        return Err(AssignmentError::TruncatedPaths(group.to_string()));
    }
    Ok(enumeration.paths)
}
