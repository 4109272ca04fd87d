//! Solve a small market where each provider keeps one user: an integer
//! market-clearing equilibrium.
//!
//! ```bash
//! cargo run -p duopoly --example solve_market
//! ```

use duopoly::equilibrium::{solve_nash, EquilibriumKind};
use duopoly::market::{Market, User};

fn main() {
    // mirror users: one leans toward each provider
    let users = vec![
        User::new(1, 1.0, 1.0, 2.0).unwrap(),
        User::new(2, 1.0, 2.0, 1.0).unwrap(),
    ];
    let market = Market::new(users, 1.0, 1.0).unwrap();

    let eq = solve_nash(&market).unwrap();
    assert_eq!(eq.kind, EquilibriumKind::Integer);

    println!("equilibrium prices: p1 = {:.6}, p2 = {:.6}", eq.p1, eq.p2);
    println!("price ratio p2/p1 = {:.6}", eq.ratio());
    for (id, q) in eq.allocations.entries() {
        println!(
            "  user {id}: buys {:.6} from provider 1, {:.6} from provider 2",
            q[0], q[1]
        );
    }

    let partition = eq.partition(&market);
    println!("provider 1 serves users {:?}", partition.set1);
    println!("provider 2 serves users {:?}", partition.set2);
}
