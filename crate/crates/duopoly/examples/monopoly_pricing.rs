//! Clearing price of a single provider: the fictitious-price removal loop
//! and its independent bisection cross-check.
//!
//! ```bash
//! cargo run -p duopoly --example monopoly_pricing
//! ```

use duopoly::market::{
    bisection_price_oracle, demand, fictitious_price, optimal_price_with_trace, Side, User,
};

fn main() {
    let users = vec![
        User::new(1, 2.0, 0.8, 1.0).unwrap(),
        User::new(2, 0.9, 1.4, 1.0).unwrap(),
        User::new(3, 0.1, 2.0, 1.0).unwrap(), // low valuation, priced out
        User::new(4, 1.5, 0.5, 1.0).unwrap(),
    ];
    let supply = 2.0;

    println!(
        "fictitious price over everyone: {:.6}",
        fictitious_price(&users, Side::Provider1, supply)
    );

    let (result, trace) = optimal_price_with_trace(&users, Side::Provider1, supply);
    println!("removal loop trace: {trace:?}");
    println!("clearing price p* = {:.6}", result.price);
    println!("active users: {:?}", result.active);

    let mut sold = 0.0;
    for user in &users {
        let q = user.demand(Side::Provider1, result.price);
        println!("  user {}: demand {q:.6}", user.id);
        sold += q;
    }
    println!("total sold {sold:.9} against supply {supply}");

    let oracle = bisection_price_oracle(&users, Side::Provider1, supply, 1e-12).unwrap();
    println!(
        "bisection oracle: {oracle:.12} (difference {:.2e})",
        (result.price - oracle).abs()
    );

    assert!((sold - supply).abs() < 1e-9 * supply);
    assert!(demand(users[2].a, users[2].g(Side::Provider1), result.price) == 0.0);
}
