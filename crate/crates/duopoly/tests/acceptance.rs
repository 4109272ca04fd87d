//! Acceptance suite: one test per release criterion, each printing a
//! PASS line with its key statistics (run with `--nocapture` to see them).

mod common;

use std::time::{Duration, Instant};

use common::{random_clearing_allocation, Draw};
use duopoly::equilibrium::{
    mu_table, partition_at, preferred_provider, solve_nash, EquilibriumKind,
};
use duopoly::market::{bisection_price_oracle, demand, optimal_price, utility, Market, Side, User};
use duopoly::scenario::{sweep_beta, PlanarScenario};
use duopoly::welfare::{check_kkt, exhaustive_stability_oracle, solve_system, total_utility};

fn monopoly_users(draw: &mut Draw, count: usize) -> Vec<User> {
    (1..=count)
        .map(|id| User::new(id, draw.range(0.01, 10.0), draw.range(0.01, 10.0), 1.0).unwrap())
        .collect()
}

/// Criterion 1: the removal-loop clearing price agrees with the bisection
/// oracle and clears the market, over 1,000 seeded monopoly instances.
#[test]
fn criterion_1_monopoly_oracle_agreement() {
    let start = Instant::now();
    let mut draw = Draw::new(1001, 0);
    let mut max_price_residual = 0.0_f64;
    let mut max_clearing_residual = 0.0_f64;
    for _ in 0..1000 {
        let count = draw.int(1, 50);
        let users = monopoly_users(&mut draw, count);
        let supply = draw.range(0.1, 100.0);
        let result = optimal_price(&users, Side::Provider1, supply);
        let oracle = bisection_price_oracle(&users, Side::Provider1, supply, 1e-12).unwrap();
        max_price_residual = max_price_residual.max((result.price - oracle).abs());
        let sold: f64 = users
            .iter()
            .map(|u| demand(u.a, u.g(Side::Provider1), result.price))
            .sum();
        max_clearing_residual = max_clearing_residual.max(((sold - supply) / supply).abs());
    }
    assert!(
        max_price_residual <= 1e-9,
        "price residual {max_price_residual:e}"
    );
    assert!(
        max_clearing_residual <= 1e-9,
        "clearing residual {max_clearing_residual:e}"
    );
    let elapsed = start.elapsed();
    assert!(elapsed < Duration::from_secs(5), "took {elapsed:?}");
    println!(
        "criterion 1 (monopoly oracle agreement): PASS — 1000 instances, \
         price residual {max_price_residual:.2e}, clearing residual {max_clearing_residual:.2e}, {elapsed:?}"
    );
}

/// Criterion 2: the clearing price never decreases when users are added.
#[test]
fn criterion_2_price_monotonicity() {
    let start = Instant::now();
    let mut draw = Draw::new(1002, 0);
    let mut worst_drop = 0.0_f64;
    for _ in 0..1000 {
        let count = draw.int(2, 50);
        let users = monopoly_users(&mut draw, count);
        let supply = draw.range(0.1, 100.0);
        let subset: Vec<User> = users
            .iter()
            .filter(|_| draw.unit() < 0.5)
            .copied()
            .collect();
        let p_super = optimal_price(&users, Side::Provider1, supply).price;
        let p_sub = optimal_price(&subset, Side::Provider1, supply).price;
        worst_drop = worst_drop.max(p_sub - p_super);
        assert!(
            p_super >= p_sub - 1e-12,
            "superset price {p_super} below subset price {p_sub}"
        );
    }
    let elapsed = start.elapsed();
    assert!(elapsed < Duration::from_secs(5), "took {elapsed:?}");
    println!(
        "criterion 2 (price monotonicity): PASS — 1000 subset pairs, \
         worst drop {worst_drop:.2e}, {elapsed:?}"
    );
}

/// Criterion 3: the cheaper-effective-price rule picks the utility
/// maximizer in every sampled case, including the zero-demand branches.
#[test]
fn criterion_3_provider_choice_equivalence() {
    let start = Instant::now();
    let mut draw = Draw::new(1003, 0);
    let mut zero_demand_cases = 0usize;
    for _ in 0..10_000 {
        let (a, g1, g2) = (
            draw.range(0.01, 10.0),
            draw.range(0.01, 10.0),
            draw.range(0.01, 10.0),
        );
        let (p1, p2) = (draw.range(0.01, 5.0), draw.range(0.01, 5.0));
        let user = User::new(1, a, g1, g2).unwrap();
        let (d1, d2) = (demand(a, g1, p1), demand(a, g2, p2));
        if d1 == 0.0 || d2 == 0.0 {
            zero_demand_cases += 1;
        }
        let u1 = utility(a, g1, p1, d1);
        let u2 = utility(a, g2, p2, d2);
        let chosen = preferred_provider(&user, p1, p2);
        match u1.partial_cmp(&u2).unwrap() {
            std::cmp::Ordering::Greater => assert_eq!(chosen, Side::Provider1),
            std::cmp::Ordering::Less => assert_eq!(chosen, Side::Provider2),
            std::cmp::Ordering::Equal => {
                let achieved = if chosen == Side::Provider1 { u1 } else { u2 };
                assert!(achieved >= u1.max(u2));
            }
        }
    }
    assert!(zero_demand_cases > 0, "zero-demand branches never sampled");
    let elapsed = start.elapsed();
    assert!(elapsed < Duration::from_secs(2), "took {elapsed:?}");
    println!(
        "criterion 3 (provider choice equivalence): PASS — 10000 triples, \
         {zero_demand_cases} zero-demand cases, {elapsed:?}"
    );
}

fn criterion_4_markets() -> impl Iterator<Item = Market> {
    let mut draw = Draw::new(1004, 0);
    (0..1000).map(move |_| {
        let count = draw.int(3, 15);
        common::random_market(&mut draw, count)
    })
}

/// Criterion 4: every market has exactly one outcome, matching the
/// exhaustive stability scan (full 2^I enumeration for I <= 12).
#[test]
fn criterion_4_equilibrium_dichotomy_and_uniqueness() {
    let start = Instant::now();
    let mut integer_count = 0usize;
    let mut fractional_count = 0usize;
    let mut max_price_residual = 0.0_f64;
    for market in criterion_4_markets() {
        let eq = solve_nash(&market).expect("unique outcome");

        // independent count over the ratio table: exactly one of
        // {fixed-point interval, undecided index} exists
        let table = mu_table(&market);
        let users = market.users();
        let mut fixed_points = 0usize;
        let mut teeters = 0usize;
        for (k, &r) in table.iter().enumerate() {
            let lower = if k == 0 { 0.0 } else { users[k - 1].alpha() };
            let upper = if k == users.len() {
                f64::INFINITY
            } else {
                users[k].alpha()
            };
            if r > lower && r < upper {
                fixed_points += 1;
            }
        }
        for (pos, user) in users.iter().enumerate() {
            if table[pos] > user.alpha() && user.alpha() > table[pos + 1] {
                teeters += 1;
            }
        }
        assert_eq!(
            fixed_points + teeters,
            1,
            "dichotomy violated: {fixed_points} fixed points, {teeters} undecided"
        );

        let scan = exhaustive_stability_oracle(&market).unwrap();
        match eq.kind {
            EquilibriumKind::Integer => {
                integer_count += 1;
                let scanned = scan.expect("scan finds the stable cut");
                let residual = (scanned.p1 - eq.p1).abs().max((scanned.p2 - eq.p2).abs());
                max_price_residual = max_price_residual.max(residual);
                assert!(residual <= 1e-9, "price residual {residual:e}");
            }
            EquilibriumKind::Fractional => {
                fractional_count += 1;
                assert!(scan.is_none(), "scan found a cut but solver split a user");
            }
        }
    }
    let elapsed = start.elapsed();
    assert!(elapsed < Duration::from_secs(60), "took {elapsed:?}");
    println!(
        "criterion 4 (dichotomy and uniqueness): PASS — 1000 markets \
         ({integer_count} integer, {fractional_count} fractional), \
         price residual {max_price_residual:.2e}, {elapsed:?}"
    );
}

/// Criterion 5: fractional outcomes satisfy indifference and clearing,
/// and the hand-solvable single-user instance yields the analytic split.
#[test]
fn criterion_5_fractional_construction() {
    let start = Instant::now();
    let mut fractional_count = 0usize;
    let mut max_indifference = 0.0_f64;
    let mut max_clearing = 0.0_f64;
    for market in criterion_4_markets() {
        let eq = solve_nash(&market).unwrap();
        if eq.kind != EquilibriumKind::Fractional {
            continue;
        }
        fractional_count += 1;
        let undecided = eq.undecided.unwrap();
        assert!((0.0..=1.0).contains(&undecided.epsilon));
        let user = market.user_by_id(undecided.user).unwrap();
        let cost1 = eq.p1 * user.g(Side::Provider1);
        let cost2 = eq.p2 * user.g(Side::Provider2);
        let indifference = (cost1 - cost2).abs() / cost1.max(cost2);
        max_indifference = max_indifference.max(indifference);
        assert!(
            indifference <= 1e-9,
            "indifference residual {indifference:e}"
        );
        for side in Side::BOTH {
            let supply = market.supply(side);
            let clearing = ((eq.allocations.total(side) - supply) / supply).abs();
            max_clearing = max_clearing.max(clearing);
            assert!(clearing <= 1e-8, "clearing residual {clearing:e}");
        }
    }
    assert!(fractional_count > 0, "no fractional instances sampled");

    // analytic case: one user with a = 1, g = (1, 1), Q1 = 1, Q2 = 2.
    // The split share solves eps/(eps+1) = (1-eps)/(3-eps); bisect the
    // difference independently of the solver.
    let gap = |e: f64| e / (e + 1.0) - (1.0 - e) / (3.0 - e);
    let (mut lo, mut hi) = (0.0_f64, 1.0_f64);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if gap(mid) < 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let expected_eps = 0.5 * (lo + hi);
    let market = Market::new(vec![User::new(1, 1.0, 1.0, 1.0).unwrap()], 1.0, 2.0).unwrap();
    let eq = solve_nash(&market).unwrap();
    let eps = eq.undecided.unwrap().epsilon;
    assert!(
        (eps - expected_eps).abs() <= 1e-10,
        "split share {eps} vs analytic {expected_eps}"
    );

    let elapsed = start.elapsed();
    println!(
        "criterion 5 (fractional construction): PASS — {fractional_count} fractional \
         instances, indifference {max_indifference:.2e}, clearing {max_clearing:.2e}, \
         analytic split {expected_eps:.12}, {elapsed:?}"
    );
}

/// Criterion 6: the equilibrium allocation is the welfare optimum: it
/// matches the independent dual solver, satisfies the optimality
/// conditions, and dominates random exact-clearing allocations.
#[test]
fn criterion_6_social_optimality() {
    let start = Instant::now();
    let mut dominance_draw = Draw::new(1006, 0);
    let mut max_entry_gap = 0.0_f64;
    let mut max_ut_gap = 0.0_f64;
    for market in criterion_4_markets() {
        let eq = solve_nash(&market).unwrap();
        let (optimal, p1, p2) = solve_system(&market, 1e-9, 200).unwrap();
        for user in market.users() {
            let ours = eq.allocations.get(user.id);
            let theirs = optimal.get(user.id);
            let gap = (ours[0] - theirs[0]).abs().max((ours[1] - theirs[1]).abs());
            max_entry_gap = max_entry_gap.max(gap);
            assert!(gap <= 1e-6, "user {} allocation gap {gap:e}", user.id);
        }
        let ut_eq = total_utility(&market, &eq.allocations);
        let ut_opt = total_utility(&market, &optimal);
        let ut_gap = (ut_eq - ut_opt).abs() / ut_opt.abs().max(f64::MIN_POSITIVE);
        max_ut_gap = max_ut_gap.max(ut_gap);
        assert!(ut_gap <= 1e-8, "utility gap {ut_gap:e}");

        let report = check_kkt(&market, &eq.allocations, eq.p1, eq.p2, 1e-7);
        assert!(report.passes, "{report:?}");
        let report = check_kkt(&market, &optimal, p1, p2, 1e-7);
        assert!(report.passes, "{report:?}");

        for _ in 0..1000 {
            let candidate = random_clearing_allocation(&mut dominance_draw, &market);
            let ut = total_utility(&market, &candidate);
            assert!(
                ut <= ut_eq + 1e-9 * ut_eq.abs().max(1.0),
                "random allocation beat the equilibrium: {ut} > {ut_eq}"
            );
        }
    }
    let elapsed = start.elapsed();
    assert!(elapsed < Duration::from_secs(120), "took {elapsed:?}");
    println!(
        "criterion 6 (social optimality): PASS — 1000 markets x 1000 allocations, \
         allocation gap {max_entry_gap:.2e}, utility gap {max_ut_gap:.2e}, {elapsed:?}"
    );
}

/// Criterion 7: qualitative deployment studies on the seeded reference
/// scenario: competition lowers prices, strong attenuation removes the
/// competition effect, supply attracts users, sparse providers undercut.
#[test]
fn criterion_7_deployment_studies() {
    let start = Instant::now();

    // (a) duopoly prices never exceed monopoly prices, for every beta
    let betas: Vec<f64> = (0..9).map(|i| 2.0 + 0.5 * i as f64).collect();
    let rows = sweep_beta(&PlanarScenario::reference(), &betas).unwrap();
    assert_eq!(rows.len(), 9);
    for row in &rows {
        assert!(row.error.is_none(), "beta {}: {:?}", row.beta, row.error);
        assert!(
            row.p1_duo.unwrap() <= row.p1_mono.unwrap() + 1e-9,
            "beta {}",
            row.beta
        );
        assert!(
            row.p2_duo.unwrap() <= row.p2_mono.unwrap() + 1e-9,
            "beta {}",
            row.beta
        );
    }

    // (b) strong attenuation shrinks the duopoly-monopoly gap
    let gap_of = |row: &duopoly::scenario::SweepRow| {
        (row.p1_mono.unwrap() - row.p1_duo.unwrap()).max(row.p2_mono.unwrap() - row.p2_duo.unwrap())
    };
    let gap_low = gap_of(&rows[0]);
    let gap_high = gap_of(&rows[8]);
    assert!(
        gap_high < gap_low,
        "gap at beta=6 ({gap_high:e}) not below gap at beta=2 ({gap_low:e})"
    );

    // (c) scaling one provider's supply up attracts at least as many users
    let baseline = PlanarScenario::reference();
    let count_side1 = |scenario: &PlanarScenario| {
        let market = scenario.compile().unwrap();
        let eq = solve_nash(&market).unwrap();
        partition_at(&market, eq.ratio()).set1.len()
    };
    let before = count_side1(&baseline);
    let after = count_side1(&baseline.clone().with_q1(10.0 * baseline.q1));
    assert!(
        after >= before,
        "side-1 users fell from {before} to {after}"
    );

    // (d) with equal supplies and equal willingness to pay, the provider
    // with fewer nearby users posts the lower price
    let market = PlanarScenario::asymmetric_density().compile().unwrap();
    let eq = solve_nash(&market).unwrap();
    assert!(
        eq.p1 < eq.p2,
        "sparse-side price {} not below dense-side price {}",
        eq.p1,
        eq.p2
    );

    let elapsed = start.elapsed();
    assert!(elapsed < Duration::from_secs(30), "took {elapsed:?}");
    println!(
        "criterion 7 (deployment studies): PASS — gaps {gap_low:.3e} -> {gap_high:.3e}, \
         side-1 users {before} -> {after}, sparse price {:.6} < dense price {:.6}, {elapsed:?}",
        eq.p1, eq.p2
    );
}

/// Criterion 8: `solve`, `sweep` and `regions` are byte-identical across
/// repeated runs with the same seed.
#[test]
fn criterion_8_determinism() {
    let start = Instant::now();
    let dir = std::env::temp_dir().join(format!("duopoly-acceptance-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    let scenario_path = dir.join("scenario.json");
    std::fs::write(&scenario_path, common::reference_scenario_json()).unwrap();

    let binary = env!("CARGO_BIN_EXE_duopoly");
    let run = |args: &[&str], output: &std::path::Path| {
        let status = std::process::Command::new(binary)
            .args(args)
            .arg("--output")
            .arg(output)
            .status()
            .unwrap();
        assert!(status.success(), "command {args:?} failed");
        std::fs::read(output).unwrap()
    };

    let scenario = scenario_path.to_str().unwrap();
    for (name, args) in [
        ("solve", vec!["solve", "--input", scenario]),
        (
            "sweep",
            vec!["sweep", "--input", scenario, "--betas", "2,3,4"],
        ),
        (
            "regions",
            vec![
                "regions",
                "--input",
                scenario,
                "--grid",
                "60x120",
                "--probe-a",
                "1.0",
            ],
        ),
    ] {
        let first = run(&args, &dir.join(format!("{name}-1.out")));
        let second = run(&args, &dir.join(format!("{name}-2.out")));
        assert!(!first.is_empty());
        assert_eq!(first, second, "{name} output differed between runs");
    }

    std::fs::remove_dir_all(&dir).ok();
    let elapsed = start.elapsed();
    println!("criterion 8 (determinism): PASS — solve/sweep/regions byte-identical, {elapsed:?}");
}
