//! Built-in end-to-end experiments behind the `reproduce` subcommand.
//!
//! Each experiment runs a fixed scenario through the pipeline and checks a
//! qualitative claim; a failed check is reported as expected-vs-computed and
//! mapped to a nonzero exit by the caller.

use std::collections::BTreeMap;

use serde_json::{json, Value};

use tollflow::assignment::{
    solve_exogenous_equilibrium, solve_parallel_affine_closed_form, FlowPattern, SolveOptions,
    TollVector,
};
use tollflow::cprr::{cprr_pipeline, RefundPolicy, UntolledBaseline};
use tollflow::inequality::{ex_post_income, gini, IncomeDistribution};
use tollflow::network::{builtin_scenario, travel_time, Scenario};
use tollflow::verify::verify_endogenous_equilibrium;

use crate::report::SolverDiagnostics;

pub struct ExperimentOutcome {
    pub scenario: Scenario,
    pub solver: Option<SolverDiagnostics>,
    pub payload: Value,
    pub pass: bool,
    pub failure: Option<String>,
}

/// Runs one named experiment; `tolls` overrides the experiment default.
pub fn run(
    name: &str,
    tolls: Option<TollVector>,
    opts: SolveOptions,
    grid: u32,
) -> Result<ExperimentOutcome, String> {
    match name {
        "prop1" => prop1(tolls, opts),
        "prop2" => prop2(opts),
        "prop4" => prop4(tolls, opts, grid),
        "cor1" => cor1(tolls, opts),
        "lemma3" => lemma3(opts),
        other => Err(format!(
            "unknown experiment {other}; expected prop1, prop2, prop4, cor1, or lemma3"
        )),
    }
}

fn corridor_tolls(tolls: Option<TollVector>) -> TollVector {
    tolls.unwrap_or_else(|| TollVector::from_pairs([("e1", 8.0)]))
}

/// Uniform refund weights leave every group better off by one constant and
/// never raise the Gini.
fn prop1(tolls: Option<TollVector>, opts: SolveOptions) -> Result<ExperimentOutcome, String> {
    let s = builtin_scenario("appendix-g").expect("builtin scenario");
    let tolls = corridor_tolls(tolls);
    let policy = RefundPolicy::Proportional { alphas: None };
    let out = cprr_pipeline(&s, &tolls, &policy, opts).map_err(|e| e.to_string())?;

    let lift = s.beta * (out.baseline.total_cost - out.eq.total_cost) / s.total_demand();
    let mut lifts = BTreeMap::new();
    let mut max_dev = 0.0_f64;
    for g in &s.groups {
        let delta =
            out.ex_post.income(&g.id).unwrap() - out.baseline.ex_post.income(&g.id).unwrap();
        max_dev = max_dev.max((delta - lift).abs());
        lifts.insert(g.id.clone(), delta);
    }
    let constant_ok = max_dev <= 1e-9 && lift >= -1e-12;
    let gini_ok = out.gini_after <= out.gini_before + 1e-12;
    let pass = constant_ok && gini_ok;
    let failure = (!pass).then(|| {
        format!(
            "expected one constant per-user lift {lift} and gini_after ≤ gini_before; \
             computed lift deviation {max_dev}, gini {} vs {}",
            out.gini_after, out.gini_before
        )
    });
    Ok(ExperimentOutcome {
        scenario: s,
        solver: Some(SolverDiagnostics {
            iterations: out.eq.iterations,
            gap: out.eq.gap,
        }),
        payload: json!({
            "claim": "uniform refund weights shift every income by one constant and do not increase the Gini",
            "uniform_lift": lift,
            "lifts": lifts,
            "max_lift_deviation": max_dev,
            "gini_before": out.gini_before,
            "gini_after": out.gini_after,
            "pass": pass,
        }),
        pass,
        failure,
    })
}

/// Across a toll grid on the two-corridor network, every user-favorable
/// refund split leaves the ex-post Gini at or above the ex-ante Gini.
fn prop2(opts: SolveOptions) -> Result<ExperimentOutcome, String> {
    let s = builtin_scenario("appendix-d").expect("builtin scenario");
    if s.groups.len() != 2 {
        return Err("two-group scenario expected".into());
    }
    let untolled =
        solve_exogenous_equilibrium(&s, &TollVector::zero(), opts).map_err(|e| e.to_string())?;
    let ex_ante = IncomeDistribution::ex_ante(&s);
    let w_ante = gini(&ex_ante).map_err(|e| e.to_string())?;
    // Value-of-time per unit income, shared by both groups here.
    let omega = s.groups[0].vot / s.groups[0].income;

    let mut min_margin = f64::INFINITY;
    let mut violations = 0u32;
    let mut strict_violations = 0u32;
    let mut points = 0u32;
    for i in 0..21 {
        for j in 0..21 {
            let tolls =
                TollVector::from_pairs([("e1", 0.1 * f64::from(i)), ("e2", 0.1 * f64::from(j))]);
            let eq = solve_exogenous_equilibrium(&s, &tolls, opts).map_err(|e| e.to_string())?;
            // Distributable slack of any user-favorable revenue split.
            let slack = untolled.total_cost - eq.total_cost;
            if slack < -1e-9 {
                violations += 1;
                continue;
            }
            let slack = slack.max(0.0);
            let (g_a, g_b) = (&s.groups[0], &s.groups[1]);
            let strict_required = s.beta
                * omega
                * (group_avg_time(&s, &eq.flows, &g_b.id)?
                    - group_avg_time(&s, &eq.flows, &g_a.id)?)
                > 1e-12;
            for share in [0.0, 0.25, 0.5, 0.75, 1.0] {
                let costs = BTreeMap::from([
                    (
                        g_a.id.clone(),
                        untolled.group_cost[&g_a.id] - share * slack / g_a.demand,
                    ),
                    (
                        g_b.id.clone(),
                        untolled.group_cost[&g_b.id] - (1.0 - share) * slack / g_b.demand,
                    ),
                ]);
                let ex_post = ex_post_income(&s, &costs).map_err(|e| e.to_string())?;
                let margin = gini(&ex_post).map_err(|e| e.to_string())? - w_ante;
                min_margin = min_margin.min(margin);
                points += 1;
                if margin < -1e-12 {
                    violations += 1;
                }
                if strict_required && margin <= 1e-12 {
                    strict_violations += 1;
                }
            }
        }
    }
    let pass = violations == 0 && strict_violations == 0;
    let failure = (!pass).then(|| {
        format!(
            "expected ex-post Gini ≥ ex-ante Gini {w_ante} at every grid toll; \
             computed {violations} violations, {strict_violations} strictness violations, \
             minimum margin {min_margin}"
        )
    });
    Ok(ExperimentOutcome {
        scenario: s,
        solver: None,
        payload: json!({
            "claim": "tolling the two-corridor network is regressive under every user-favorable refund split",
            "toll_grid": "21x21 over [0,2]x[0,2] on e1, e2",
            "splits_per_point": 5,
            "evaluations": points,
            "gini_ex_ante": w_ante,
            "min_margin": min_margin,
            "violations": violations,
            "strict_violations": strict_violations,
            "pass": pass,
        }),
        pass,
        failure,
    })
}

/// The tolled corridor equilibrium admits a profitable deviation: the middle
/// group joins the tolled fast edge once refunds are recomputed.
fn prop4(
    tolls: Option<TollVector>,
    opts: SolveOptions,
    grid: u32,
) -> Result<ExperimentOutcome, String> {
    let s = builtin_scenario("appendix-g").expect("builtin scenario");
    let tolls = corridor_tolls(tolls);
    let eq = solve_exogenous_equilibrium(&s, &tolls, opts).map_err(|e| e.to_string())?;
    let reports = verify_endogenous_equilibrium(&s, &tolls, &RefundPolicy::MaxMin, &eq.flows, grid)
        .map_err(|e| e.to_string())?;

    let demand_m = s.group("M").map(|g| g.demand).unwrap_or(1.0);
    let target = reports.iter().find(|r| {
        r.group == "M"
            && r.split
                .iter()
                .any(|row| row.edges == ["e1".to_string()] && (row.flow - demand_m).abs() < 1e-9)
    });
    let gain = target.map(|r| r.gain);
    let pass = matches!(gain, Some(g) if g > 0.1 && g < 0.2);
    let failure = (!pass).then(|| match gain {
        Some(g) => format!("expected gain in (0.1, 0.2) for group M's shift onto e1, computed {g}"),
        None => format!(
            "expected a profitable pure shift of group M onto e1; computed {} other deviations",
            reports.len()
        ),
    });
    Ok(ExperimentOutcome {
        scenario: s,
        solver: Some(SolverDiagnostics {
            iterations: eq.iterations,
            gap: eq.gap,
        }),
        payload: json!({
            "claim": "the tolled equilibrium is not deviation-proof once refunds respond to flows",
            "profitable_deviations": reports.len(),
            "target_deviation": target.map(|r| serde_json::to_value(r).expect("serializable")),
            "gain": gain,
            "expected_gain_range": [0.1, 0.2],
            "pass": pass,
        }),
        pass,
        failure,
    })
}

/// With values-of-time proportional to income, untolled travel rescales all
/// incomes equally: the ex-post Gini matches the ex-ante Gini exactly.
fn cor1(tolls: Option<TollVector>, opts: SolveOptions) -> Result<ExperimentOutcome, String> {
    let s = builtin_scenario("appendix-g").expect("builtin scenario");
    let untolled =
        solve_exogenous_equilibrium(&s, &TollVector::zero(), opts).map_err(|e| e.to_string())?;
    let w_ante = gini(&IncomeDistribution::ex_ante(&s)).map_err(|e| e.to_string())?;
    let ex_post0 = ex_post_income(&s, &untolled.group_cost).map_err(|e| e.to_string())?;
    let w_post0 = gini(&ex_post0).map_err(|e| e.to_string())?;
    let residual = (w_post0 - w_ante).abs();

    let tolls = corridor_tolls(tolls);
    let out = cprr_pipeline(&s, &tolls, &RefundPolicy::MaxMin, opts).map_err(|e| e.to_string())?;

    let equal_ok = residual <= 1e-12;
    let scheme_ok = out.gini_after <= w_ante + 1e-12 && out.gini_after <= w_post0 + 1e-12;
    let pass = equal_ok && scheme_ok;
    let failure = (!pass).then(|| {
        format!(
            "expected |ex-post − ex-ante| ≤ 1e-12 and scheme Gini below both; \
             computed residual {residual}, scheme Gini {} vs ex-ante {w_ante}",
            out.gini_after
        )
    });
    Ok(ExperimentOutcome {
        scenario: s,
        solver: Some(SolverDiagnostics {
            iterations: out.eq.iterations,
            gap: out.eq.gap,
        }),
        payload: json!({
            "claim": "income-proportional values-of-time make untolled travel distribution-neutral",
            "gini_ex_ante": w_ante,
            "gini_ex_post_untolled": w_post0,
            "equality_residual": residual,
            "gini_after_scheme": out.gini_after,
            "pass": pass,
        }),
        pass,
        failure,
    })
}

/// Sweeping the fast-edge toll, schemes with lower tolled system cost never
/// have higher post-refund inequality.
///
/// Uses the exact two-node solver: the sweep crosses tolls where a group is
/// indifferent between the edges, which the iterative solver resolves slowly.
fn lemma3(_opts: SolveOptions) -> Result<ExperimentOutcome, String> {
    let s = builtin_scenario("appendix-g").expect("builtin scenario");
    let untolled =
        solve_parallel_affine_closed_form(&s, &TollVector::zero()).map_err(|e| e.to_string())?;
    let baseline = UntolledBaseline::from_untolled(&s, &untolled).map_err(|e| e.to_string())?;
    let mut kept: Vec<(f64, f64)> = Vec::new();
    let mut skipped = 0u32;
    for i in 0..50 {
        let tau = 20.0 * f64::from(i) / 49.0;
        let tolls = TollVector::from_pairs([("e1", tau)]);
        let eq = solve_parallel_affine_closed_form(&s, &tolls).map_err(|e| e.to_string())?;
        // Tolls that raise the total cost fall outside the claim.
        if eq.total_cost > baseline.total_cost + 1e-9 {
            skipped += 1;
            continue;
        }
        let (refunds, _) = RefundPolicy::MaxMin
            .refunds_for_flow(&s, &baseline, &eq.group_cost, eq.total_cost)
            .map_err(|e| e.to_string())?;
        let costs: BTreeMap<String, f64> = eq
            .group_cost
            .iter()
            .map(|(g, c)| (g.clone(), c - refunds.get(g)))
            .collect();
        let ex_post = ex_post_income(&s, &costs).map_err(|e| e.to_string())?;
        kept.push((eq.total_cost, gini(&ex_post).map_err(|e| e.to_string())?));
    }
    kept.sort_by(|a, b| b.0.partial_cmp(&a.0).unwrap());
    let mut max_increase = 0.0_f64;
    let mut violations = 0u32;
    for pair in kept.windows(2) {
        let rise = pair[1].1 - pair[0].1;
        if rise > 1e-9 {
            violations += 1;
            max_increase = max_increase.max(rise);
        }
    }
    let pass = violations == 0 && kept.len() >= 2;
    let failure = (!pass).then(|| {
        format!(
            "expected post-refund Gini nonincreasing as tolled cost falls; \
             computed {violations} increases up to {max_increase} over {} kept tolls",
            kept.len()
        )
    });
    Ok(ExperimentOutcome {
        scenario: s,
        solver: None,
        payload: json!({
            "claim": "cheaper tolled equilibria give weakly lower post-refund inequality",
            "swept_tolls": 50,
            "kept": kept.len(),
            "skipped_cost_increasing": skipped,
            "violations": violations,
            "max_increase": max_increase,
            "cost_gini_pairs": kept,
            "pass": pass,
        }),
        pass,
        failure,
    })
}

/// Demand-weighted average travel time of one group's used paths.
fn group_avg_time(s: &Scenario, f: &FlowPattern, group: &str) -> Result<f64, String> {
    let x = f.edge_flows(s);
    let flows = f
        .flows
        .get(group)
        .ok_or_else(|| format!("no flow for group {group}"))?;
    let mut weighted = 0.0;
    let mut total = 0.0;
    for (edges, &flow) in flows {
        if flow <= 0.0 {
            continue;
        }
        let mut time = 0.0;
        for e in edges {
            let edge = s.edge(e).map_err(|err| err.to_string())?;
            time += travel_time(edge, x[e]).map_err(|err| err.to_string())?;
        }
        weighted += flow * time;
        total += flow;
    }
    Ok(weighted / total)
}
