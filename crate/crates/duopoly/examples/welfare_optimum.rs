//! The equilibrium maximizes total network utility: compare it against
//! the independent welfare solver and check the optimality conditions.
//!
//! ```bash
//! cargo run -p duopoly --example welfare_optimum
//! ```

use duopoly::equilibrium::solve_nash;
use duopoly::market::{Market, User};
use duopoly::welfare::{check_kkt, solve_system, total_utility};

fn main() {
    let users = vec![
        User::new(1, 1.2, 0.6, 1.8).unwrap(),
        User::new(2, 0.8, 1.1, 0.9).unwrap(),
        User::new(3, 1.9, 2.2, 0.7).unwrap(),
        User::new(4, 0.5, 0.9, 1.5).unwrap(),
    ];
    let market = Market::new(users, 1.5, 2.5).unwrap();

    let eq = solve_nash(&market).unwrap();
    println!(
        "equilibrium: kind {:?}, p1 = {:.9}, p2 = {:.9}",
        eq.kind, eq.p1, eq.p2
    );

    let (optimal, p1, p2) = solve_system(&market, 1e-9, 200).unwrap();
    println!("welfare optimum multipliers: p1 = {p1:.9}, p2 = {p2:.9}");

    println!("allocations (equilibrium vs welfare optimum):");
    for user in market.users() {
        let ours = eq.allocations.get(user.id);
        let theirs = optimal.get(user.id);
        println!(
            "  user {}: [{:.6}, {:.6}] vs [{:.6}, {:.6}]",
            user.id, ours[0], ours[1], theirs[0], theirs[1]
        );
    }

    let ut_eq = total_utility(&market, &eq.allocations);
    let ut_opt = total_utility(&market, &optimal);
    println!("total utility: equilibrium {ut_eq:.12}, optimum {ut_opt:.12}");

    let report = check_kkt(&market, &eq.allocations, eq.p1, eq.p2, 1e-7);
    println!(
        "optimality report: stationarity {:.2e}, complementarity {:.2e}, clearing [{:.2e}, {:.2e}] -> passes = {}",
        report.max_stationarity_residual,
        report.max_complementarity_residual,
        report.clearing_residual[0],
        report.clearing_residual[1],
        report.passes
    );
    assert!(report.passes);
    assert!((ut_eq - ut_opt).abs() <= 1e-8 * ut_opt.abs());
}
