//! Income distributions, the discrete Gini coefficient, ex-post income
//! mapping, and the wealth-inequality axioms as executable checks.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::network::Scenario;

/// Errors from inequality computations.
#[derive(Debug, Error)]
pub enum InequalityError {
    #[error("non-positive income {income} for group {group}")]
    NonPositiveIncome { group: String, income: f64 },
    #[error("non-positive demand weight {demand} for group {group}")]
    NonPositiveDemand { group: String, demand: f64 },
    #[error("beta too large for scenario: ex-post income of group {group} is {income}")]
    BetaTooLarge { group: String, income: f64 },
    #[error("unknown group {0} in cost map")]
    UnknownGroup(String),
    #[error("missing cost for group {0}")]
    MissingCost(String),
}

/// Per-group income paired with its demand weight.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IncomeEntry {
    pub income: f64,
    pub demand: f64,
}

/// A weighted income profile over user groups.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct IncomeDistribution {
    pub entries: BTreeMap<String, IncomeEntry>,
}

impl IncomeDistribution {
    /// Builds a distribution from parallel `(group, income, demand)` triples.
    pub fn new<I, S>(items: I) -> Self
    where
        I: IntoIterator<Item = (S, f64, f64)>,
        S: Into<String>,
    {
        IncomeDistribution {
            entries: items
                .into_iter()
                .map(|(g, income, demand)| (g.into(), IncomeEntry { income, demand }))
                .collect(),
        }
    }

    /// The ex-ante income profile of a scenario's groups.
    pub fn ex_ante(s: &Scenario) -> Self {
        IncomeDistribution::new(s.groups.iter().map(|g| (g.id.clone(), g.income, g.demand)))
    }

    pub fn income(&self, group: &str) -> Option<f64> {
        self.entries.get(group).map(|e| e.income)
    }

    fn check_positive(&self) -> Result<(), InequalityError> {
        for (g, e) in &self.entries {
            if !(e.income > 0.0) {
                return Err(InequalityError::NonPositiveIncome {
                    group: g.clone(),
                    income: e.income,
                });
            }
            if !(e.demand > 0.0) {
                return Err(InequalityError::NonPositiveDemand {
                    group: g.clone(),
                    demand: e.demand,
                });
            }
        }
        Ok(())
    }
}

/// Demand-weighted mean income `Δ = Σ q_g d_g / Σ d_g`.
pub fn mean_income(q: &IncomeDistribution) -> f64 {
    let total: f64 = q.entries.values().map(|e| e.income * e.demand).sum();
    let weight: f64 = q.entries.values().map(|e| e.demand).sum();
    total / weight
}

/// Discrete Gini coefficient
/// `W(q) = Σ_{g1,g2} d_{g1} d_{g2} |q_{g1} − q_{g2}| / (2 (Σd)² Δ)`,
/// summed over all ordered pairs. Returns a value in `[0, 1)`.
pub fn gini(q: &IncomeDistribution) -> Result<f64, InequalityError> {
    q.check_positive()?;
    let entries: Vec<&IncomeEntry> = q.entries.values().collect();
    let total_demand: f64 = entries.iter().map(|e| e.demand).sum();
    let mean = mean_income(q);
    let mut double_sum = 0.0;
    for a in &entries {
        for b in &entries {
            double_sum += a.demand * b.demand * (a.income - b.income).abs();
        }
    }
    let w = double_sum / (2.0 * total_demand * total_demand * mean);
    debug_assert!(
        (0.0..1.0).contains(&w) || w.abs() < 1e-15,
        "gini out of [0, 1): {w}"
    );
    Ok(w)
}

/// Maps refunded travel costs to ex-post incomes `q_g = q_g⁰ − β·μ_g`.
///
/// `costs_with_refund` holds each group's per-user travel cost after refunds
/// are netted out. Errors if any resulting income is non-positive.
pub fn ex_post_income(
    s: &Scenario,
    costs_with_refund: &BTreeMap<String, f64>,
) -> Result<IncomeDistribution, InequalityError> {
    for g in costs_with_refund.keys() {
        if !s.groups.iter().any(|sg| &sg.id == g) {
            return Err(InequalityError::UnknownGroup(g.clone()));
        }
    }
    let mut entries = BTreeMap::new();
    for g in &s.groups {
        let cost = costs_with_refund
            .get(&g.id)
            .copied()
            .ok_or_else(|| InequalityError::MissingCost(g.id.clone()))?;
        let income = g.income - s.beta * cost;
        if !(income > 0.0) {
            return Err(InequalityError::BetaTooLarge {
                group: g.id.clone(),
                income,
            });
        }
        entries.insert(
            g.id.clone(),
            IncomeEntry {
                income,
                demand: g.demand,
            },
        );
    }
    Ok(IncomeDistribution { entries })
}

/// Outcome of the randomized axiom checks.
#[derive(Debug, Clone, Default, Serialize)]
pub struct AxiomReport {
    /// Number of randomized trials run per axiom.
    pub samples: u64,
    /// Human-readable failure descriptions; empty means all axioms held.
    pub failures: Vec<String>,
}

impl AxiomReport {
    pub fn passed(&self) -> bool {
        self.failures.is_empty()
    }
}

/// Empirically verifies the four wealth-inequality axioms of the discrete
/// Gini on `q` and random perturbations of it: scale independence,
/// regressive multipliers never decrease W, progressive multipliers never
/// increase W, and constant transfers move W weakly toward equality.
///
/// Deterministic for a fixed `seed`.
pub fn check_inequality_axioms(
    q: &IncomeDistribution,
    samples: u64,
    seed: u64,
) -> Result<AxiomReport, InequalityError> {
    q.check_positive()?;
    let mut rng = SplitMix64::new(seed);
    let mut report = AxiomReport {
        samples,
        ..Default::default()
    };
    let base = gini(q)?;
    let min_income = q
        .entries
        .values()
        .map(|e| e.income)
        .fold(f64::INFINITY, f64::min);

    // Incomes sorted ascending, so ordered multiplier vectors can be aligned.
    let mut order: Vec<String> = q.entries.keys().cloned().collect();
    order.sort_by(|a, b| {
        q.entries[a]
            .income
            .partial_cmp(&q.entries[b].income)
            .unwrap()
            .then_with(|| a.cmp(b))
    });

    for trial in 0..samples {
        // (i) Scale independence: W(λq) = W(q).
        let lambda = 0.1 + 9.9 * rng.uniform();
        let scaled = scale(q, lambda);
        let w_scaled = gini(&scaled)?;
        if relative_diff(w_scaled, base) > 1e-12 {
            report.failures.push(format!(
                "scale independence failed at trial {trial}: λ={lambda}, W={w_scaled} vs {base}"
            ));
        }

        // Sorted multipliers in (0, 1]: ascending with income = regressive,
        // descending with income = progressive.
        let mut deltas: Vec<f64> = (0..order.len())
            .map(|_| 0.2 + 0.8 * rng.uniform())
            .collect();
        deltas.sort_by(|a, b| a.partial_cmp(b).unwrap());

        // (ii) Regressive: lower incomes keep a smaller fraction.
        let regressive = apply_multipliers(q, &order, &deltas);
        if gini(&regressive)? < base - 1e-12 {
            report.failures.push(format!(
                "regressive multipliers decreased W at trial {trial}"
            ));
        }

        // (iii) Progressive: lower incomes keep a larger fraction. Clamp the
        // schedule so scaled incomes keep their ranks: a schedule that drops
        // a higher income below a lower one is not a progressive tax.
        let mut reversed = deltas.clone();
        reversed.reverse();
        for i in 1..reversed.len() {
            let q_prev = q.entries[&order[i - 1]].income;
            let q_cur = q.entries[&order[i]].income;
            let floor = reversed[i - 1] * q_prev / q_cur;
            if reversed[i] < floor {
                reversed[i] = floor;
            }
        }
        let progressive = apply_multipliers(q, &order, &reversed);
        if gini(&progressive)? > base + 1e-12 {
            report.failures.push(format!(
                "progressive multipliers increased W at trial {trial}"
            ));
        }

        // (iv) Constant transfers: adding λ·1 weakly decreases W, removing it
        // weakly increases W, for 0 ≤ λ < min income.
        let lam = rng.uniform() * 0.999 * min_income;
        let richer = shift(q, lam);
        let poorer = shift(q, -lam);
        if gini(&richer)? > base + 1e-12 {
            report
                .failures
                .push(format!("constant addition increased W at trial {trial}"));
        }
        if gini(&poorer)? < base - 1e-12 {
            report
                .failures
                .push(format!("constant removal decreased W at trial {trial}"));
        }
    }
    Ok(report)
}

fn scale(q: &IncomeDistribution, lambda: f64) -> IncomeDistribution {
    IncomeDistribution {
        entries: q
            .entries
            .iter()
            .map(|(g, e)| {
                (
                    g.clone(),
                    IncomeEntry {
                        income: lambda * e.income,
                        demand: e.demand,
                    },
                )
            })
            .collect(),
    }
}

fn shift(q: &IncomeDistribution, lambda: f64) -> IncomeDistribution {
    IncomeDistribution {
        entries: q
            .entries
            .iter()
            .map(|(g, e)| {
                (
                    g.clone(),
                    IncomeEntry {
                        income: e.income + lambda,
                        demand: e.demand,
                    },
                )
            })
            .collect(),
    }
}

fn apply_multipliers(
    q: &IncomeDistribution,
    order: &[String],
    deltas: &[f64],
) -> IncomeDistribution {
    let mut out = q.clone();
    for (g, delta) in order.iter().zip(deltas) {
        out.entries.get_mut(g).unwrap().income *= delta;
    }
    out
}

fn relative_diff(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs().max(1.0)
}

/// Small deterministic generator for the randomized axiom checks.
struct SplitMix64 {
    state: u64,
}

impl SplitMix64 {
    fn new(seed: u64) -> Self {
        SplitMix64 { state: seed }
    }

    fn next_u64(&mut self) -> u64 {
        self.state = self.state.wrapping_add(0x9e3779b97f4a7c15);
        let mut z = self.state;
        z = (z ^ (z >> 30)).wrapping_mul(0xbf58476d1ce4e5b9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94d049bb133111eb);
        z ^ (z >> 31)
    }

    /// Uniform sample from `[0, 1)`.
    fn uniform(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 / (1u64 << 53) as f64
    }
}
