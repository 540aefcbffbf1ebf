//! Refund-scheme construction: cost-preserving refunds, max-min transfer
//! allocation by water-filling, transfer/refund conversion, and the two-step
//! toll-then-refund pipeline, plus a brute-force oracle for testing.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::assignment::{
    solve_exogenous_equilibrium, AssignmentError, EquilibriumSolution, SolveOptions, TollVector,
};
use crate::inequality::{ex_post_income, gini, IncomeDistribution, InequalityError};
use crate::network::Scenario;

/// Errors from refund-scheme construction.
#[derive(Debug, Error)]
pub enum CprrError {
    #[error("tolls do not reduce total cost: {c_tau} > {c_zero}")]
    CostIncrease { c_zero: f64, c_tau: f64 },
    #[error("negative transfer budget {0}")]
    NegativeBudget(f64),
    #[error("transfer budget mismatch: transfers sum to {got}, expected {expected}")]
    BudgetMismatch { expected: f64, got: f64 },
    #[error("invalid refund weights: {0}")]
    BadAlphas(String),
    #[error("{0} groups exceed the brute-force cap of 3")]
    UnsupportedSize(usize),
    #[error("invalid option: {0}")]
    InvalidOption(String),
    #[error("missing group {0}")]
    MissingGroup(String),
    #[error(transparent)]
    Assignment(#[from] AssignmentError),
    #[error(transparent)]
    Inequality(#[from] InequalityError),
}

/// Per-group money transfers c_g ≥ 0 on top of cost-restoring refunds.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct TransferVector {
    pub transfers: BTreeMap<String, f64>,
}

impl TransferVector {
    pub fn get(&self, group: &str) -> f64 {
        self.transfers.get(group).copied().unwrap_or(0.0)
    }

    /// Demand-weighted total Σ c_g d_g.
    pub fn weighted_total(&self, s: &Scenario) -> f64 {
        s.groups.iter().map(|g| self.get(&g.id) * g.demand).sum()
    }
}

/// Per-group money refunds r_g; sign unrestricted, validity checked separately.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct RefundVector {
    pub refunds: BTreeMap<String, f64>,
}

impl RefundVector {
    pub fn get(&self, group: &str) -> f64 {
        self.refunds.get(group).copied().unwrap_or(0.0)
    }

    /// |Σ r_g d_g − Π|: zero for a valid revenue-refunding scheme.
    pub fn validity_residual(&self, s: &Scenario, revenue: f64) -> f64 {
        let total: f64 = s.groups.iter().map(|g| self.get(&g.id) * g.demand).sum();
        (total - revenue).abs()
    }
}

/// A complete toll-and-refund scheme.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CprrScheme {
    pub tolls: TollVector,
    pub refunds: RefundVector,
    pub transfers: TransferVector,
    /// Per-group refund weights when the scheme was built from fixed weights.
    pub alphas: Option<BTreeMap<String, f64>>,
}

/// How collected revenue is turned into group refunds.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum RefundPolicy {
    /// Water-fill the cost savings so the lowest ex-post incomes rise first.
    MaxMin,
    /// Split the savings by fixed weights; demand-proportional when `None`.
    Proportional {
        alphas: Option<BTreeMap<String, f64>>,
    },
}

/// Untolled reference quantities a refund policy compares against.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct UntolledBaseline {
    /// μ^g at the untolled equilibrium, money.
    pub group_cost: BTreeMap<String, f64>,
    /// C at the untolled equilibrium, money.
    pub total_cost: f64,
    /// Ex-post incomes at the untolled equilibrium.
    pub ex_post: IncomeDistribution,
}

impl UntolledBaseline {
    pub fn from_untolled(
        s: &Scenario,
        eq: &EquilibriumSolution,
    ) -> Result<UntolledBaseline, CprrError> {
        let ex_post = ex_post_income(s, &eq.group_cost)?;
        Ok(UntolledBaseline {
            group_cost: eq.group_cost.clone(),
            total_cost: eq.total_cost,
            ex_post,
        })
    }
}

impl RefundPolicy {
    /// Checks any explicit weights against the scenario's groups.
    pub fn validate(&self, s: &Scenario) -> Result<(), CprrError> {
        if let RefundPolicy::Proportional { alphas } = self {
            resolved_alphas(s, alphas.as_ref())?;
        }
        Ok(())
    }

    /// Refunds and transfers for a (possibly non-equilibrium) flow with
    /// per-group average costs `group_costs` and total cost `total_cost`.
    ///
    /// The transfer budget is the cost saving against the untolled baseline,
    /// clamped at zero when the flow is costlier than the baseline.
    pub fn refunds_for_flow(
        &self,
        s: &Scenario,
        baseline: &UntolledBaseline,
        group_costs: &BTreeMap<String, f64>,
        total_cost: f64,
    ) -> Result<(RefundVector, TransferVector), CprrError> {
        let budget = (baseline.total_cost - total_cost).max(0.0);
        let transfers = match self {
            RefundPolicy::MaxMin => {
                // Water-fill in income space, then convert back to money.
                let scaled = max_min_transfers(&baseline.ex_post, s.beta * budget)?;
                TransferVector {
                    transfers: scaled
                        .transfers
                        .into_iter()
                        .map(|(g, c)| (g, c / s.beta))
                        .collect(),
                }
            }
            RefundPolicy::Proportional { alphas } => {
                let alphas = resolved_alphas(s, alphas.as_ref())?;
                TransferVector {
                    transfers: s
                        .groups
                        .iter()
                        .map(|g| (g.id.clone(), alphas[&g.id] / g.demand * budget))
                        .collect(),
                }
            }
        };
        let mut refunds = BTreeMap::new();
        for g in &s.groups {
            let mu = group_costs
                .get(&g.id)
                .ok_or_else(|| CprrError::MissingGroup(g.id.clone()))?;
            refunds.insert(
                g.id.clone(),
                mu - baseline.group_cost[&g.id] + transfers.get(&g.id),
            );
        }
        Ok((RefundVector { refunds }, transfers))
    }
}

/// Validated per-group weights; demand-proportional when unspecified.
fn resolved_alphas(
    s: &Scenario,
    alphas: Option<&BTreeMap<String, f64>>,
) -> Result<BTreeMap<String, f64>, CprrError> {
    match alphas {
        None => {
            let total = s.total_demand();
            Ok(s.groups
                .iter()
                .map(|g| (g.id.clone(), g.demand / total))
                .collect())
        }
        Some(a) => {
            for g in &s.groups {
                match a.get(&g.id) {
                    None => {
                        return Err(CprrError::BadAlphas(format!("missing weight for {}", g.id)))
                    }
                    Some(&w) if !(w >= 0.0) => {
                        return Err(CprrError::BadAlphas(format!(
                            "negative weight {w} for {}",
                            g.id
                        )))
                    }
                    _ => {}
                }
            }
            for id in a.keys() {
                if s.group(id).is_err() {
                    return Err(CprrError::BadAlphas(format!("unknown group {id}")));
                }
            }
            let sum: f64 = a.values().sum();
            if (sum - 1.0).abs() > 1e-9 {
                return Err(CprrError::BadAlphas(format!("weights sum to {sum}, not 1")));
            }
            Ok(a.clone())
        }
    }
}

/// Refunds that restore every group to its untolled cost and split the cost
/// saving by the weights α: r_g = μ^g(τ) − μ^g(0) + (α_g/d_g)·(C_0 − C_τ).
pub fn pareto_refund(
    s: &Scenario,
    eq_tolled: &EquilibriumSolution,
    eq_untolled: &EquilibriumSolution,
    alphas: &BTreeMap<String, f64>,
) -> Result<RefundVector, CprrError> {
    let slack = 1e-9 * eq_untolled.total_cost.max(1.0);
    if eq_tolled.total_cost > eq_untolled.total_cost + slack {
        return Err(CprrError::CostIncrease {
            c_zero: eq_untolled.total_cost,
            c_tau: eq_tolled.total_cost,
        });
    }
    let alphas = resolved_alphas(s, Some(alphas))?;
    let budget = (eq_untolled.total_cost - eq_tolled.total_cost).max(0.0);
    let refunds: BTreeMap<String, f64> = s
        .groups
        .iter()
        .map(|g| {
            let r = eq_tolled.group_cost[&g.id] - eq_untolled.group_cost[&g.id]
                + alphas[&g.id] / g.demand * budget;
            (g.id.clone(), r)
        })
        .collect();
    let out = RefundVector { refunds };
    debug_assert!(
        out.validity_residual(s, eq_tolled.revenue) <= 1e-6 * eq_tolled.revenue.max(1.0),
        "refunds do not redistribute the collected revenue"
    );
    Ok(out)
}

/// Water-filling: raise the pooled lowest incomes equally per person until
/// they meet the next income level or the budget runs out.
///
/// The budget is in income units; transfers are per person, and groups with
/// positive transfers all end at the same (lowest) final income.
pub fn max_min_transfers(
    incomes: &IncomeDistribution,
    budget: f64,
) -> Result<TransferVector, CprrError> {
    if !(budget >= 0.0) {
        return Err(CprrError::NegativeBudget(budget));
    }
    for (g, e) in &incomes.entries {
        if !(e.income > 0.0) || !(e.demand > 0.0) {
            return Err(CprrError::InvalidOption(format!(
                "group {g} has non-positive income or demand"
            )));
        }
    }

    // Bands of equal income (within 1e-9 relative), ascending.
    let mut sorted: Vec<(&String, f64, f64)> = incomes
        .entries
        .iter()
        .map(|(g, e)| (g, e.income, e.demand))
        .collect();
    sorted.sort_by(|a, b| a.1.partial_cmp(&b.1).unwrap().then_with(|| a.0.cmp(b.0)));
    let mut bands: Vec<(f64, Vec<(&String, f64)>)> = Vec::new();
    for (g, income, demand) in sorted {
        match bands.last_mut() {
            Some((level, members)) if (income - *level).abs() <= 1e-9 * level.abs().max(1.0) => {
                members.push((g, demand));
            }
            _ => bands.push((income, vec![(g, demand)])),
        }
    }

    let mut level = bands[0].0;
    let mut pool: Vec<(&String, f64)> = Vec::new();
    let mut next_band = 0;
    let mut remaining = budget;
    loop {
        // Absorb every band at the current level.
        while next_band < bands.len() && bands[next_band].0 <= level {
            pool.extend(bands[next_band].1.iter().copied());
            next_band += 1;
        }
        let pool_demand: f64 = pool.iter().map(|(_, d)| d).sum();
        let headroom = if next_band < bands.len() {
            bands[next_band].0 - level
        } else {
            f64::INFINITY
        };
        let step = headroom.min(remaining / pool_demand);
        level += step;
        remaining = (remaining - step * pool_demand).max(0.0);
        if remaining <= 0.0 || step < headroom {
            break;
        }
    }

    let mut transfers: BTreeMap<String, f64> =
        incomes.entries.keys().map(|g| (g.clone(), 0.0)).collect();
    for (g, _) in &pool {
        let lift = (level - incomes.entries[*g].income).max(0.0);
        transfers.insert((*g).clone(), lift);
    }
    let out = TransferVector { transfers };
    debug_assert!(
        {
            let spent: f64 = incomes
                .entries
                .iter()
                .map(|(g, e)| out.get(g) * e.demand)
                .sum();
            (spent - budget).abs() <= 1e-12 * budget.max(1.0)
        },
        "water-filling did not exhaust the budget exactly"
    );
    Ok(out)
}

/// Converts max-min style transfers into refunds
/// r_g = μ^g(τ) − μ^g(0) + c_g, after checking the transfers spend exactly
/// the cost saving C_0 − C_τ.
pub fn transfers_to_refunds(
    s: &Scenario,
    eq_tolled: &EquilibriumSolution,
    eq_untolled: &EquilibriumSolution,
    transfers: &TransferVector,
) -> Result<RefundVector, CprrError> {
    let budget = eq_untolled.total_cost - eq_tolled.total_cost;
    let spent = transfers.weighted_total(s);
    if (spent - budget).abs() > 1e-6 * budget.abs().max(1.0) {
        return Err(CprrError::BudgetMismatch {
            expected: budget,
            got: spent,
        });
    }
    let refunds: BTreeMap<String, f64> = s
        .groups
        .iter()
        .map(|g| {
            let r =
                eq_tolled.group_cost[&g.id] - eq_untolled.group_cost[&g.id] + transfers.get(&g.id);
            (g.id.clone(), r)
        })
        .collect();
    let out = RefundVector { refunds };
    debug_assert!(
        out.validity_residual(s, eq_tolled.revenue) <= 1e-6 * eq_tolled.revenue.max(1.0),
        "refunds do not redistribute the collected revenue"
    );
    Ok(out)
}

/// Per-group favorability check: refunded cost at or below the untolled cost.
#[derive(Debug, Clone, Serialize)]
pub struct UserFavorableReport {
    pub favorable: bool,
    /// μ^g(0) − (μ^g(τ) − r_g) per group; negative means worse off.
    pub slacks: BTreeMap<String, f64>,
    pub violations: Vec<String>,
}

/// True iff every group's refunded cost is at most its untolled cost
/// (μ^g(τ) − r_g ≤ μ^g(0) + tol).
pub fn check_user_favorable(
    s: &Scenario,
    eq_tolled: &EquilibriumSolution,
    refunds: &RefundVector,
    eq_untolled: &EquilibriumSolution,
    tol: f64,
) -> UserFavorableReport {
    let mut slacks = BTreeMap::new();
    let mut violations = Vec::new();
    for g in &s.groups {
        let slack =
            eq_untolled.group_cost[&g.id] - (eq_tolled.group_cost[&g.id] - refunds.get(&g.id));
        slacks.insert(g.id.clone(), slack);
        if slack < -tol {
            violations.push(g.id.clone());
        }
    }
    UserFavorableReport {
        favorable: violations.is_empty(),
        slacks,
        violations,
    }
}

/// Brute-force minimum-Gini transfers on the budget simplex, test oracle
/// for the water-filling allocator. Enumerates per-group budget shares in
/// `grid` increments and returns the split with the smallest Gini; ties go
/// to the lexicographically smallest transfer vector.
pub fn brute_force_min_gini_transfers(
    incomes: &IncomeDistribution,
    budget: f64,
    grid: u32,
) -> Result<TransferVector, CprrError> {
    let n = incomes.entries.len();
    if n > 3 {
        return Err(CprrError::UnsupportedSize(n));
    }
    if grid < 10 {
        return Err(CprrError::InvalidOption(format!(
            "grid must be at least 10, got {grid}"
        )));
    }
    if !(budget >= 0.0) {
        return Err(CprrError::NegativeBudget(budget));
    }
    let groups: Vec<(&String, f64, f64)> = incomes
        .entries
        .iter()
        .map(|(g, e)| (g, e.income, e.demand))
        .collect();

    let mut counts = vec![0u32; n];
    let mut best: Option<(f64, Vec<u32>)> = None;
    enumerate_shares(&groups, budget, grid, 0, grid, &mut counts, &mut best)?;
    let (_, best_counts) = best.expect("simplex enumeration is nonempty");
    Ok(TransferVector {
        transfers: groups
            .iter()
            .zip(&best_counts)
            .map(|((g, _, d), &k)| ((*g).clone(), budget * k as f64 / grid as f64 / d))
            .collect(),
    })
}

fn enumerate_shares(
    groups: &[(&String, f64, f64)],
    budget: f64,
    grid: u32,
    slot: usize,
    remaining: u32,
    counts: &mut Vec<u32>,
    best: &mut Option<(f64, Vec<u32>)>,
) -> Result<(), CprrError> {
    if slot + 1 == groups.len() {
        counts[slot] = remaining;
        let candidate = IncomeDistribution::new(groups.iter().zip(counts.iter()).map(
            |(&(g, income, demand), &k)| {
                let lift = budget * k as f64 / grid as f64 / demand;
                (g.clone(), income + lift, demand)
            },
        ));
        let w = gini(&candidate)?;
        if best.as_ref().map_or(true, |(b, _)| w < *b) {
            *best = Some((w, counts.clone()));
        }
        counts[slot] = 0;
        return Ok(());
    }
    for k in 0..=remaining {
        counts[slot] = k;
        enumerate_shares(groups, budget, grid, slot + 1, remaining - k, counts, best)?;
    }
    counts[slot] = 0;
    Ok(())
}

/// Output of the two-step toll-then-refund pipeline.
#[derive(Debug, Clone, Serialize)]
pub struct CprrOutcome {
    pub scheme: CprrScheme,
    /// The tolled equilibrium the scheme is attached to.
    pub eq: EquilibriumSolution,
    pub baseline: UntolledBaseline,
    /// Incomes after tolls and refunds.
    pub ex_post: IncomeDistribution,
    /// Gini of the untolled ex-post incomes.
    pub gini_before: f64,
    /// Gini after tolls and refunds.
    pub gini_after: f64,
}

/// Two-step pipeline with an explicit refund policy: solve both equilibria,
/// allocate the cost saving, convert to refunds, and measure inequality.
pub fn cprr_pipeline(
    s: &Scenario,
    tolls: &TollVector,
    policy: &RefundPolicy,
    opts: SolveOptions,
) -> Result<CprrOutcome, CprrError> {
    let eq_untolled = solve_exogenous_equilibrium(s, &TollVector::zero(), opts)?;
    let eq = solve_exogenous_equilibrium(s, tolls, opts)?;
    let slack = 1e-9 * eq_untolled.total_cost.max(1.0);
    if eq.total_cost > eq_untolled.total_cost + slack {
        return Err(CprrError::CostIncrease {
            c_zero: eq_untolled.total_cost,
            c_tau: eq.total_cost,
        });
    }
    let baseline = UntolledBaseline::from_untolled(s, &eq_untolled)?;
    let (refunds, transfers) =
        policy.refunds_for_flow(s, &baseline, &eq.group_cost, eq.total_cost)?;

    let favorability = check_user_favorable(s, &eq, &refunds, &eq_untolled, 1e-9);
    debug_assert!(favorability.favorable, "scheme left a group worse off");
    debug_assert!(
        refunds.validity_residual(s, eq.revenue) <= 1e-6 * eq.revenue.max(1.0),
        "refunds do not redistribute the collected revenue"
    );

    let refunded_costs: BTreeMap<String, f64> = s
        .groups
        .iter()
        .map(|g| (g.id.clone(), eq.group_cost[&g.id] - refunds.get(&g.id)))
        .collect();
    let ex_post = ex_post_income(s, &refunded_costs)?;
    let gini_before = gini(&baseline.ex_post)?;
    let gini_after = gini(&ex_post)?;
    let alphas = match policy {
        RefundPolicy::MaxMin => None,
        RefundPolicy::Proportional { alphas } => Some(resolved_alphas(s, alphas.as_ref())?),
    };
    Ok(CprrOutcome {
        scheme: CprrScheme {
            tolls: tolls.clone(),
            refunds,
            transfers,
            alphas,
        },
        eq,
        baseline,
        ex_post,
        gini_before,
        gini_after,
    })
}

/// The default pipeline: max-min water-filling of the cost saving.
pub fn optimal_cprr_pipeline(s: &Scenario, tolls: &TollVector) -> Result<CprrOutcome, CprrError> {
    cprr_pipeline(s, tolls, &RefundPolicy::MaxMin, SolveOptions::default())
}
