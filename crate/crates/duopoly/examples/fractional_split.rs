//! Markets where one user must split demand across both providers: the
//! fractional market-clearing equilibrium.
//!
//! A single user with equal channels teeters between the providers: being
//! anyone's customer makes the competitor free and thus preferable. The
//! equilibrium splits the user's demand by a share `eps` so that both
//! markets clear and `p1*g1 = p2*g2` keeps the user indifferent.
//!
//! ```bash
//! cargo run -p duopoly --example fractional_split
//! ```

use duopoly::equilibrium::{solve_nash, EquilibriumKind};
use duopoly::market::{Market, Side, User};

fn report(label: &str, q2: f64) {
    let user = User::new(1, 1.0, 1.0, 1.0).unwrap();
    let market = Market::new(vec![user], 1.0, q2).unwrap();
    let eq = solve_nash(&market).unwrap();
    assert_eq!(eq.kind, EquilibriumKind::Fractional);
    let split = eq.undecided.unwrap();

    println!("{label} (Q1 = 1, Q2 = {q2}):");
    println!("  split share eps = {:.12}", split.epsilon);
    println!("  prices: p1 = {:.12}, p2 = {:.12}", eq.p1, eq.p2);
    let q = eq.allocations.get(1);
    println!("  purchases: q1 = {:.9}, q2 = {:.9}", q[0], q[1]);
    let cost1 = eq.p1 * market.users()[0].g(Side::Provider1);
    let cost2 = eq.p2 * market.users()[0].g(Side::Provider2);
    println!("  indifference: p1*g1 = {cost1:.12} vs p2*g2 = {cost2:.12}");
    println!();
}

fn main() {
    // symmetric supplies force an even split
    report("symmetric", 1.0);
    // doubling provider 2's supply pulls two thirds of the demand there
    // and both prices settle at 1/4
    report("uneven supplies", 2.0);
}
