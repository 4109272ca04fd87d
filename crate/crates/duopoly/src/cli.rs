//! Command implementations behind the `duopoly` binary.
//!
//! Exit codes: 0 success, 1 invalid input or failed checks, 2 equilibrium
//! undefined on a degenerate boundary, 3 exhaustive-oracle size cap
//! exceeded. Errors print as one-line JSON on standard error.

use std::fs;
use std::path::PathBuf;

use rand_chacha::rand_core::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::equilibrium::{find_integer_mce, solve_nash_with};
use crate::error::{Error, Result};
use crate::io;
use crate::market::{bisection_price_oracle, demand, optimal_price, Market, Side, User};
use crate::scenario::{region_grid, sweep_beta};
use crate::tolerances::Tolerances;
use crate::welfare::{check_kkt, exhaustive_stability_oracle, solve_system, total_utility};

/// Agreement threshold between the clearing price and its bisection oracle.
pub const ORACLE_PRICE_TOL: f64 = 1e-9;
/// Per-entry allocation agreement between equilibrium and welfare optimum.
pub const ALLOCATION_TOL: f64 = 1e-6;
/// Relative total-utility agreement between equilibrium and welfare optimum.
pub const UTILITY_REL_TOL: f64 = 1e-8;
/// Number of markets in a seeded verification batch.
pub const BATCH_SIZE: usize = 100;
/// Users per market in a seeded verification batch.
pub const BATCH_USERS: usize = 8;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CommandKind {
    Solve,
    Sweep,
    Regions,
    Verify,
}

/// Everything a command run needs, assembled by the binary's argument
/// parser (or directly by tests).
#[derive(Debug, Clone)]
pub struct RunConfig {
    pub command: CommandKind,
    pub input: Option<PathBuf>,
    pub output: Option<PathBuf>,
    pub seed: Option<u64>,
    pub tolerances: Tolerances,
    pub betas: Option<Vec<f64>>,
    pub grid: Option<(usize, usize)>,
    pub probe_a: Option<f64>,
}

impl RunConfig {
    pub fn new(command: CommandKind) -> RunConfig {
        RunConfig {
            command,
            input: None,
            output: None,
            seed: None,
            tolerances: Tolerances::default(),
            betas: None,
            grid: None,
            probe_a: None,
        }
    }
}

pub fn exit_code_for(err: &Error) -> i32 {
    match err {
        Error::DegenerateBoundary { .. } => 2,
        Error::OracleCap { .. } => 3,
        _ => 1,
    }
}

/// Run a command, printing machine-readable errors to standard error.
pub fn run(config: &RunConfig) -> i32 {
    let outcome = match config.command {
        CommandKind::Solve => cmd_solve(config),
        CommandKind::Sweep => cmd_sweep(config),
        CommandKind::Regions => cmd_regions(config),
        CommandKind::Verify => cmd_verify(config),
    };
    match outcome {
        Ok(code) => code,
        Err(err) => {
            let code = exit_code_for(&err);
            eprintln!(
                "{}",
                serde_json::json!({ "error": err.to_string(), "code": code })
            );
            code
        }
    }
}

fn read_input(config: &RunConfig) -> Result<String> {
    let path = config
        .input
        .as_ref()
        .ok_or_else(|| Error::Input("--input is required".into()))?;
    Ok(fs::read_to_string(path)?)
}

fn write_output(config: &RunConfig, contents: &str) -> Result<()> {
    match &config.output {
        Some(path) => {
            fs::write(path, contents)?;
            Ok(())
        }
        None => {
            print!("{contents}");
            Ok(())
        }
    }
}

/// Solve one market and write the equilibrium document.
pub fn cmd_solve(config: &RunConfig) -> Result<i32> {
    let input = io::parse_scenario(&read_input(config)?)?;
    let market = input.to_market(config.seed)?;
    let eq = solve_nash_with(&market, &config.tolerances)?;
    let report = check_kkt(
        &market,
        &eq.allocations,
        eq.p1,
        eq.p2,
        config.tolerances.kkt,
    );
    let ut = total_utility(&market, &eq.allocations);
    let file = io::equilibrium_file(&market, &eq, ut, &report);
    write_output(config, &io::equilibrium_to_json(&file)?)?;
    Ok(0)
}

/// Sweep the path-loss exponent and write the price table as CSV.
pub fn cmd_sweep(config: &RunConfig) -> Result<i32> {
    let input = io::parse_scenario(&read_input(config)?)?;
    let io::ScenarioInput::Planar(mut scenario) = input else {
        return Err(Error::Input("sweep requires a planar scenario".into()));
    };
    if let Some(seed) = config.seed {
        scenario.seed = seed;
    }
    let betas = config
        .betas
        .as_deref()
        .ok_or_else(|| Error::Input("--betas is required".into()))?;
    let rows = sweep_beta(&scenario, betas)?;
    write_output(config, &io::sweep_to_csv(&rows))?;
    if rows.iter().any(|r| r.error.is_some()) {
        return Ok(1);
    }
    Ok(0)
}

/// Label a grid over the deployment area with the provider each point
/// would join at the scenario's equilibrium prices.
pub fn cmd_regions(config: &RunConfig) -> Result<i32> {
    let input = io::parse_scenario(&read_input(config)?)?;
    let io::ScenarioInput::Planar(mut scenario) = input else {
        return Err(Error::Input("regions requires a planar scenario".into()));
    };
    if let Some(seed) = config.seed {
        scenario.seed = seed;
    }
    let resolution = config
        .grid
        .ok_or_else(|| Error::Input("--grid is required".into()))?;
    let probe_a = config.probe_a.unwrap_or(1.0);
    let market = scenario.compile()?;
    let eq = solve_nash_with(&market, &config.tolerances)?;
    let grid = region_grid(&scenario, eq.p1, eq.p2, probe_a, resolution, false)?;
    write_output(config, &grid.to_csv())?;
    Ok(0)
}

struct Check {
    name: &'static str,
    pass: bool,
    detail: String,
}

/// The oracle-agreement checks for one market.
fn verify_market(market: &Market, tol: &Tolerances) -> Result<Vec<Check>> {
    let mut checks = Vec::new();

    // clearing price against the independent bisection oracle, both sides
    let mut worst_price = 0.0_f64;
    let mut worst_clearing = 0.0_f64;
    for side in Side::BOTH {
        let supply = market.supply(side);
        let result = optimal_price(market.users(), side, supply);
        let oracle = bisection_price_oracle(market.users(), side, supply, tol.oracle_bisection)?;
        worst_price = worst_price.max((result.price - oracle).abs());
        let sold: f64 = market
            .users()
            .iter()
            .map(|u| demand(u.a, u.g(side), result.price))
            .sum();
        worst_clearing = worst_clearing.max(((sold - supply) / supply).abs());
    }
    checks.push(Check {
        name: "monopoly-oracle",
        pass: worst_price <= ORACLE_PRICE_TOL && worst_clearing <= ORACLE_PRICE_TOL,
        detail: format!("price residual {worst_price:.2e}, clearing residual {worst_clearing:.2e}"),
    });

    // fixed-point search against the exhaustive stability scan
    let from_scan = exhaustive_stability_oracle(market)?;
    let from_search = find_integer_mce(market);
    let (agree, detail) = match (&from_search, &from_scan) {
        (None, None) => (true, "no stable cut on either path".to_string()),
        (Some(a), Some(b)) => {
            let dp = (a.p1 - b.p1).abs().max((a.p2 - b.p2).abs());
            (dp <= ORACLE_PRICE_TOL, format!("price residual {dp:.2e}"))
        }
        (a, b) => (
            false,
            format!(
                "existence mismatch: search {:?}, scan {:?}",
                a.is_some(),
                b.is_some()
            ),
        ),
    };
    checks.push(Check {
        name: "stability-oracle",
        pass: agree,
        detail,
    });

    // equilibrium against the welfare optimum
    let eq = solve_nash_with(market, tol)?;
    let (opt_alloc, _, _) = solve_system(market, tol.system, tol.system_max_iters)?;
    let mut worst_entry = 0.0_f64;
    for user in market.users() {
        let a = eq.allocations.get(user.id);
        let b = opt_alloc.get(user.id);
        worst_entry = worst_entry
            .max((a[0] - b[0]).abs())
            .max((a[1] - b[1]).abs());
    }
    let ut_eq = total_utility(market, &eq.allocations);
    let ut_opt = total_utility(market, &opt_alloc);
    let ut_gap = (ut_eq - ut_opt).abs() / ut_opt.abs().max(f64::MIN_POSITIVE);
    checks.push(Check {
        name: "welfare-optimum",
        pass: worst_entry <= ALLOCATION_TOL && ut_gap <= UTILITY_REL_TOL,
        detail: format!("allocation residual {worst_entry:.2e}, utility gap {ut_gap:.2e}"),
    });

    // optimality conditions at the equilibrium
    let report = check_kkt(market, &eq.allocations, eq.p1, eq.p2, tol.kkt);
    checks.push(Check {
        name: "kkt",
        pass: report.passes,
        detail: format!(
            "stationarity {:.2e}, complementarity {:.2e}, clearing [{:.2e}, {:.2e}]",
            report.max_stationarity_residual,
            report.max_complementarity_residual,
            report.clearing_residual[0],
            report.clearing_residual[1]
        ),
    });

    Ok(checks)
}

/// A random market drawn from one substream of the batch seed.
pub fn random_market(seed: u64, index: u64, users: usize) -> Market {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index);
    let mut unit = move || (rng.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64);
    loop {
        let candidates: Vec<User> = (1..=users)
            .map(|id| {
                User::new(
                    id,
                    0.01 + 9.99 * unit(),
                    0.01 + 9.99 * unit(),
                    0.01 + 9.99 * unit(),
                )
                .expect("draws are positive")
            })
            .collect();
        let q1 = 0.1 + 99.9 * unit();
        let q2 = 0.1 + 99.9 * unit();
        if let Ok(market) = Market::new(candidates, q1, q2) {
            return market;
        }
    }
}

/// Run the oracle-agreement suite on an instance, an equilibrium document
/// replay, or a seeded random batch when no input is given.
pub fn cmd_verify(config: &RunConfig) -> Result<i32> {
    use std::fmt::Write as _;
    let mut out = String::new();

    let code = if config.input.is_some() {
        let text = read_input(config)?;
        if io::is_equilibrium_document(&text) {
            let (market, eq, recorded) = io::parse_equilibrium(&text)?;
            let report = check_kkt(
                &market,
                &eq.allocations,
                eq.p1,
                eq.p2,
                config.tolerances.kkt,
            );
            let status = if report.passes { "PASS" } else { "FAIL" };
            writeln!(
                out,
                "check kkt-replay: {status} (stationarity {:.2e}, complementarity {:.2e}, \
                 clearing [{:.2e}, {:.2e}]; recorded passes = {})",
                report.max_stationarity_residual,
                report.max_complementarity_residual,
                report.clearing_residual[0],
                report.clearing_residual[1],
                recorded.passes
            )
            .unwrap();
            if report.passes {
                0
            } else {
                1
            }
        } else {
            let market = io::parse_scenario(&text)?.to_market(config.seed)?;
            let checks = verify_market(&market, &config.tolerances)?;
            let mut all_pass = true;
            for check in &checks {
                let status = if check.pass { "PASS" } else { "FAIL" };
                writeln!(out, "check {}: {status} ({})", check.name, check.detail).unwrap();
                all_pass &= check.pass;
            }
            if all_pass {
                0
            } else {
                1
            }
        }
    } else {
        // seeded batch
        let seed = config.seed.unwrap_or(0);
        let mut failures = 0usize;
        for index in 0..BATCH_SIZE {
            let market = random_market(seed, index as u64, BATCH_USERS);
            for check in verify_market(&market, &config.tolerances)? {
                if !check.pass {
                    failures += 1;
                    writeln!(
                        out,
                        "check {} on market {index}: FAIL ({})",
                        check.name, check.detail
                    )
                    .unwrap();
                }
            }
        }
        if failures == 0 {
            writeln!(
                out,
                "check batch: PASS ({BATCH_SIZE} markets x 4 checks, seed {seed})"
            )
            .unwrap();
            0
        } else {
            writeln!(
                out,
                "check batch: FAIL ({failures} failing checks over {BATCH_SIZE} markets, seed {seed})"
            )
            .unwrap();
            1
        }
    };

    write_output(config, &out)?;
    Ok(code)
}
