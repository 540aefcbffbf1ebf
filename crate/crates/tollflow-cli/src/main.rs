//! Command-line front end: solve equilibria, build refund schemes, measure
//! inequality, verify equilibria, and run the built-in experiments.
//!
//! Exit codes: 0 success, 1 a verification or experiment check failed (or the
//! solver stopped short of tolerance), 2 invalid input or usage.

mod experiments;
mod report;

use std::collections::BTreeMap;
use std::fs;
use std::process::ExitCode;
use std::time::Instant;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::{json, Value};

use tollflow::assignment::{
    search_system_optimal, solve_exogenous_equilibrium, total_system_cost, AssignmentError,
    EquilibriumSolution, SolveOptions, TollVector,
};
use tollflow::cprr::{cprr_pipeline, CprrError, RefundPolicy};
use tollflow::inequality::{check_inequality_axioms, gini, mean_income, IncomeDistribution};
use tollflow::network::{builtin_scenario, load_scenario, Scenario};
use tollflow::verify::{
    verify_cost_identity, verify_endogenous_equilibrium, verify_exogenous_equilibrium,
};

use report::{digest, Format, RunReport, SolverDiagnostics};

/// Path-gap tolerance applied by `verify-exo`, money units.
const GAP_CHECK_TOL: f64 = 1e-6;
/// Fixed seed for the randomized inequality-axiom checks.
const AXIOM_SEED: u64 = 0x9e37_79b9;
/// Most deviations listed in a verify-endo report before truncation.
const MAX_LISTED_DEVIATIONS: usize = 25;

#[derive(Parser)]
#[command(
    name = "tollflow",
    version,
    about = "Multi-class traffic equilibria under congestion tolls with revenue refunds"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Solve the tolled user equilibrium and report flows and costs.
    Solve(RunArgs),
    /// Build a refund scheme on the tolled equilibrium and report it.
    Refund(RunArgs),
    /// Report inequality metrics for the scenario's income profile.
    Gini(GiniArgs),
    /// Check that a re-solved flow satisfies the equal-cost path conditions.
    VerifyExo(RunArgs),
    /// Search for group deviations that profit once refunds are recomputed.
    VerifyEndo(RunArgs),
    /// Exhaustively search path splits for the minimum total system cost.
    SoSearch(RunArgs),
    /// Run a named built-in experiment end to end and check its claim.
    Reproduce(ReproduceArgs),
}

#[derive(Args)]
struct RunArgs {
    /// Scenario file path, or a built-in name (appendix-g, appendix-d).
    #[arg(long)]
    scenario: String,
    /// Per-edge toll as EDGE=VALUE; repeat for several edges.
    #[arg(long = "toll", value_name = "EDGE=VALUE")]
    toll: Vec<String>,
    /// Solver relative-gap tolerance.
    #[arg(long, default_value_t = 1e-8)]
    tolerance: f64,
    /// Solver iteration cap.
    #[arg(long = "max-iters", default_value_t = 100_000)]
    max_iters: u64,
    /// Grid resolution for deviation and cost searches.
    #[arg(long, default_value_t = 100)]
    grid: u32,
    /// Refund policy.
    #[arg(long, value_enum, default_value_t = PolicyArg::Maxmin)]
    policy: PolicyArg,
    /// Refund weight as GROUP=ALPHA; requires --policy custom-alpha.
    #[arg(long = "alpha", value_name = "GROUP=ALPHA")]
    alpha: Vec<String>,
    /// Report rendering.
    #[arg(long, value_enum, default_value_t = Format::Structured)]
    format: Format,
    /// Exit with status 1 when the deviation search finds any violation.
    #[arg(long)]
    expect_equilibrium: bool,
}

#[derive(Args)]
struct GiniArgs {
    /// Scenario file path, or a built-in name (appendix-g, appendix-d).
    #[arg(long)]
    scenario: String,
    /// Also run randomized axiom checks with this many samples per axiom.
    #[arg(long = "check-axioms", value_name = "SAMPLES")]
    check_axioms: Option<u64>,
    /// Report rendering.
    #[arg(long, value_enum, default_value_t = Format::Structured)]
    format: Format,
}

#[derive(Args)]
struct ReproduceArgs {
    /// Experiment name: prop1, prop2, prop4, cor1, or lemma3.
    name: String,
    /// Per-edge toll as EDGE=VALUE, overriding the experiment default.
    #[arg(long = "toll", value_name = "EDGE=VALUE")]
    toll: Vec<String>,
    /// Solver relative-gap tolerance.
    #[arg(long, default_value_t = 1e-8)]
    tolerance: f64,
    /// Solver iteration cap.
    #[arg(long = "max-iters", default_value_t = 100_000)]
    max_iters: u64,
    /// Grid resolution for deviation searches.
    #[arg(long, default_value_t = 100)]
    grid: u32,
    /// Report rendering.
    #[arg(long, value_enum, default_value_t = Format::Structured)]
    format: Format,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum PolicyArg {
    /// Water-filling transfers that maximize the lowest ex-post income.
    Maxmin,
    /// Fixed demand-proportional refund weights.
    Proportional,
    /// Fixed caller-supplied refund weights from --alpha pairs.
    CustomAlpha,
}

fn main() -> ExitCode {
    let started = Instant::now();
    let cli = Cli::parse();
    match dispatch(cli, started) {
        Ok(code) => ExitCode::from(code),
        Err(msg) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
    }
}

fn dispatch(cli: Cli, started: Instant) -> Result<u8, String> {
    match cli.command {
        Command::Solve(args) => cmd_solve(args, started),
        Command::Refund(args) => cmd_refund(args, started),
        Command::Gini(args) => cmd_gini(args, started),
        Command::VerifyExo(args) => cmd_verify_exo(args, started),
        Command::VerifyEndo(args) => cmd_verify_endo(args, started),
        Command::SoSearch(args) => cmd_so_search(args, started),
        Command::Reproduce(args) => cmd_reproduce(args, started),
    }
}

/// Loads a scenario from a built-in name or a file path.
fn load_scenario_arg(name: &str) -> Result<Scenario, String> {
    if let Some(s) = builtin_scenario(name) {
        return Ok(s);
    }
    let text = fs::read_to_string(name).map_err(|e| format!("cannot read scenario {name}: {e}"))?;
    load_scenario(&text).map_err(|e| format!("scenario {name}: {e}"))
}

/// Parses repeated KEY=VALUE flags into a map, rejecting duplicates.
fn parse_pairs(items: &[String], flag: &str) -> Result<BTreeMap<String, f64>, String> {
    let mut out = BTreeMap::new();
    for item in items {
        let (key, value) = item
            .split_once('=')
            .ok_or_else(|| format!("invalid {flag} '{item}': expected KEY=VALUE"))?;
        let value: f64 = value
            .parse()
            .map_err(|_| format!("invalid {flag} '{item}': value is not a number"))?;
        if out.insert(key.to_string(), value).is_some() {
            return Err(format!("duplicate {flag} for '{key}'"));
        }
    }
    Ok(out)
}

fn parse_tolls(items: &[String], s: &Scenario) -> Result<TollVector, String> {
    let tolls = TollVector {
        tolls: parse_pairs(items, "--toll")?,
    };
    tolls.validate(s).map_err(|e| e.to_string())?;
    Ok(tolls)
}

fn solve_options(tolerance: f64, max_iters: u64) -> Result<SolveOptions, String> {
    if !(tolerance > 0.0 && tolerance.is_finite()) {
        return Err(format!(
            "--tolerance must be a positive number, got {tolerance}"
        ));
    }
    Ok(SolveOptions {
        tolerance,
        max_iterations: max_iters,
    })
}

fn build_policy(args: &RunArgs, s: &Scenario) -> Result<RefundPolicy, String> {
    let policy = match args.policy {
        PolicyArg::Maxmin => {
            if !args.alpha.is_empty() {
                return Err("--alpha requires --policy custom-alpha".into());
            }
            RefundPolicy::MaxMin
        }
        PolicyArg::Proportional => {
            if !args.alpha.is_empty() {
                return Err("--alpha requires --policy custom-alpha".into());
            }
            RefundPolicy::Proportional { alphas: None }
        }
        PolicyArg::CustomAlpha => {
            if args.alpha.is_empty() {
                return Err(
                    "--policy custom-alpha requires at least one --alpha GROUP=ALPHA".into(),
                );
            }
            RefundPolicy::Proportional {
                alphas: Some(parse_pairs(&args.alpha, "--alpha")?),
            }
        }
    };
    policy.validate(s).map_err(|e| e.to_string())?;
    Ok(policy)
}

fn policy_name(policy: PolicyArg) -> &'static str {
    match policy {
        PolicyArg::Maxmin => "maxmin",
        PolicyArg::Proportional => "proportional",
        PolicyArg::CustomAlpha => "custom-alpha",
    }
}

/// Canonical command echo: subcommand, scenario, sorted tolls, and the
/// options that affect the computation.
fn echo_run(sub: &str, args: &RunArgs, tolls: &TollVector) -> String {
    let mut parts = vec![format!("{sub} --scenario {}", args.scenario)];
    for (edge, value) in &tolls.tolls {
        parts.push(format!("--toll {edge}={value}"));
    }
    parts.push(format!("--tolerance {}", args.tolerance));
    parts.push(format!("--max-iters {}", args.max_iters));
    if matches!(sub, "refund" | "verify-endo") {
        parts.push(format!("--policy {}", policy_name(args.policy)));
        if let Ok(alphas) = parse_pairs(&args.alpha, "--alpha") {
            for (group, value) in &alphas {
                parts.push(format!("--alpha {group}={value}"));
            }
        }
    }
    if matches!(sub, "verify-endo" | "so-search") {
        parts.push(format!("--grid {}", args.grid));
    }
    parts.join(" ")
}

fn emit(mut report: RunReport, format: Format, started: Instant) {
    report.timing_ms = started.elapsed().as_millis();
    println!("{}", report.render(format));
}

fn solution_payload(s: &Scenario, eq: &EquilibriumSolution, converged: bool) -> Value {
    json!({
        "converged": converged,
        "edge_flows": eq.flows.edge_flows(s),
        "path_flows": eq.flows.rows(),
        "group_cost": eq.group_cost,
        "total_cost": eq.total_cost,
        "revenue": eq.revenue,
    })
}

fn diagnostics(eq: &EquilibriumSolution) -> SolverDiagnostics {
    SolverDiagnostics {
        iterations: eq.iterations,
        gap: eq.gap,
    }
}

/// Runs the solver, mapping a tolerance miss to the best iterate plus exit 1.
fn solve_or_best(
    s: &Scenario,
    tolls: &TollVector,
    opts: SolveOptions,
) -> Result<(EquilibriumSolution, bool), String> {
    match solve_exogenous_equilibrium(s, tolls, opts) {
        Ok(eq) => Ok((eq, true)),
        Err(AssignmentError::NotConverged { best, .. }) => Ok((*best, false)),
        Err(e) => Err(e.to_string()),
    }
}

fn cmd_solve(args: RunArgs, started: Instant) -> Result<u8, String> {
    let s = load_scenario_arg(&args.scenario)?;
    let tolls = parse_tolls(&args.toll, &s)?;
    let opts = solve_options(args.tolerance, args.max_iters)?;
    let (eq, converged) = solve_or_best(&s, &tolls, opts)?;

    let mut report = RunReport::new(echo_run("solve", &args, &tolls), digest(&s.to_document()));
    report.solver = Some(diagnostics(&eq));
    report.results = Some(solution_payload(&s, &eq, converged));
    emit(report, args.format, started);
    Ok(u8::from(!converged))
}

fn cmd_refund(args: RunArgs, started: Instant) -> Result<u8, String> {
    let s = load_scenario_arg(&args.scenario)?;
    let tolls = parse_tolls(&args.toll, &s)?;
    let opts = solve_options(args.tolerance, args.max_iters)?;
    let policy = build_policy(&args, &s)?;

    let mut report = RunReport::new(echo_run("refund", &args, &tolls), digest(&s.to_document()));
    let out = match cprr_pipeline(&s, &tolls, &policy, opts) {
        Ok(out) => out,
        Err(CprrError::Assignment(AssignmentError::NotConverged {
            gap, iterations, ..
        })) => {
            report.solver = Some(SolverDiagnostics { iterations, gap });
            report.verification = Some(
                json!({ "error": format!("solver stopped at gap {gap} after {iterations} iterations") }),
            );
            emit(report, args.format, started);
            return Ok(1);
        }
        Err(e) => return Err(e.to_string()),
    };

    let group_cost_after: BTreeMap<&String, f64> = out
        .eq
        .group_cost
        .iter()
        .map(|(g, c)| (g, c - out.scheme.refunds.get(g)))
        .collect();
    report.solver = Some(diagnostics(&out.eq));
    report.scheme = Some(json!({
        "policy": policy_name(args.policy),
        "tolls": out.scheme.tolls.tolls,
        "refunds": out.scheme.refunds.refunds,
        "transfers": out.scheme.transfers.transfers,
        "alphas": out.scheme.alphas,
        "group_cost_before": out.baseline.group_cost,
        "group_cost_after": group_cost_after,
        "revenue": out.eq.revenue,
        "total_cost_untolled": out.baseline.total_cost,
        "total_cost_tolled": out.eq.total_cost,
        "gini_before": out.gini_before,
        "gini_after": out.gini_after,
        "ex_post_income": out.ex_post.entries.iter().map(|(g, e)| (g, e.income)).collect::<BTreeMap<_, _>>(),
    }));
    emit(report, args.format, started);
    Ok(0)
}

fn cmd_gini(args: GiniArgs, started: Instant) -> Result<u8, String> {
    let s = load_scenario_arg(&args.scenario)?;
    let q = IncomeDistribution::ex_ante(&s);
    let w = gini(&q).map_err(|e| e.to_string())?;
    let axioms = match args.check_axioms {
        Some(samples) => {
            Some(check_inequality_axioms(&q, samples, AXIOM_SEED).map_err(|e| e.to_string())?)
        }
        None => None,
    };
    let ok = axioms.as_ref().map_or(true, |a| a.passed());

    let mut echo = format!("gini --scenario {}", args.scenario);
    if let Some(samples) = args.check_axioms {
        echo.push_str(&format!(" --check-axioms {samples}"));
    }
    let mut report = RunReport::new(echo, digest(&s.to_document()));
    report.results = Some(json!({
        "mean_income": mean_income(&q),
        "gini": w,
        "incomes": q.entries,
        "axioms": axioms,
    }));
    emit(report, args.format, started);
    Ok(u8::from(!ok))
}

fn cmd_verify_exo(args: RunArgs, started: Instant) -> Result<u8, String> {
    let s = load_scenario_arg(&args.scenario)?;
    let tolls = parse_tolls(&args.toll, &s)?;
    let opts = solve_options(args.tolerance, args.max_iters)?;
    let (eq, converged) = solve_or_best(&s, &tolls, opts)?;
    let gaps = verify_exogenous_equilibrium(&s, &tolls, &eq.flows, GAP_CHECK_TOL)
        .map_err(|e| e.to_string())?;
    let residual = verify_cost_identity(&s, &eq);
    let ok = gaps.pass && converged;

    let mut report = RunReport::new(
        echo_run("verify-exo", &args, &tolls),
        digest(&s.to_document()),
    );
    report.solver = Some(diagnostics(&eq));
    report.verification = Some(json!({
        "pass": ok,
        "converged": converged,
        "gap_tolerance": GAP_CHECK_TOL,
        "group_gaps": gaps.group_gaps,
        "group_cost": gaps.group_cost,
        "failures": gaps.failures,
        "cost_identity_residual": residual,
    }));
    emit(report, args.format, started);
    Ok(u8::from(!ok))
}

fn cmd_verify_endo(args: RunArgs, started: Instant) -> Result<u8, String> {
    let s = load_scenario_arg(&args.scenario)?;
    let tolls = parse_tolls(&args.toll, &s)?;
    let opts = solve_options(args.tolerance, args.max_iters)?;
    let policy = build_policy(&args, &s)?;

    let mut report = RunReport::new(
        echo_run("verify-endo", &args, &tolls),
        digest(&s.to_document()),
    );
    let eq = match solve_exogenous_equilibrium(&s, &tolls, opts) {
        Ok(eq) => eq,
        Err(AssignmentError::NotConverged {
            gap, iterations, ..
        }) => {
            report.solver = Some(SolverDiagnostics { iterations, gap });
            report.verification = Some(
                json!({ "error": format!("solver stopped at gap {gap} after {iterations} iterations") }),
            );
            emit(report, args.format, started);
            return Ok(1);
        }
        Err(e) => return Err(e.to_string()),
    };
    let deviations = verify_endogenous_equilibrium(&s, &tolls, &policy, &eq.flows, args.grid)
        .map_err(|e| e.to_string())?;

    let listed: Vec<_> = deviations.iter().take(MAX_LISTED_DEVIATIONS).collect();
    report.solver = Some(diagnostics(&eq));
    report.verification = Some(json!({
        "certified": deviations.is_empty(),
        "profitable_count": deviations.len(),
        "grid": args.grid,
        "policy": policy_name(args.policy),
        "deviations": listed,
        "deviations_truncated": deviations.len() > MAX_LISTED_DEVIATIONS,
    }));
    emit(report, args.format, started);
    Ok(u8::from(args.expect_equilibrium && !deviations.is_empty()))
}

fn cmd_so_search(args: RunArgs, started: Instant) -> Result<u8, String> {
    let s = load_scenario_arg(&args.scenario)?;
    let tolls = parse_tolls(&args.toll, &s)?;
    if !tolls.tolls.is_empty() {
        return Err("so-search minimizes travel cost only; tolls do not apply".into());
    }
    let opts = solve_options(args.tolerance, args.max_iters)?;
    let flow = search_system_optimal(&s, args.grid).map_err(|e| e.to_string())?;
    let cost = total_system_cost(&s, &flow).map_err(|e| e.to_string())?;
    let (untolled, _) = solve_or_best(&s, &TollVector::zero(), opts)?;

    let mut report = RunReport::new(
        echo_run("so-search", &args, &tolls),
        digest(&s.to_document()),
    );
    report.results = Some(json!({
        "flow": flow.rows(),
        "total_cost": cost,
        "untolled_equilibrium_cost": untolled.total_cost,
        "grid": args.grid,
    }));
    emit(report, args.format, started);
    Ok(0)
}

fn cmd_reproduce(args: ReproduceArgs, started: Instant) -> Result<u8, String> {
    let opts = solve_options(args.tolerance, args.max_iters)?;
    let tolls = if args.toll.is_empty() {
        None
    } else {
        Some(TollVector {
            tolls: parse_pairs(&args.toll, "--toll")?,
        })
    };
    let outcome = experiments::run(&args.name, tolls.clone(), opts, args.grid)?;

    let mut echo = format!("reproduce {}", args.name);
    if let Some(tolls) = &tolls {
        for (edge, value) in &tolls.tolls {
            echo.push_str(&format!(" --toll {edge}={value}"));
        }
    }
    let mut report = RunReport::new(echo, digest(&outcome.scenario.to_document()));
    report.solver = outcome.solver;
    report.results = Some(outcome.payload);
    emit(report, args.format, started);
    if let Some(failure) = &outcome.failure {
        eprintln!("check failed: {failure}");
    }
    Ok(u8::from(!outcome.pass))
}
