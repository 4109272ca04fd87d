//! Compile a planar deployment into a market and solve it: 30 users on a
//! 10 x 20 area, channel offsets from the distance power law g = d^beta.
//!
//! ```bash
//! cargo run -p duopoly --example planar_scenario
//! ```

use duopoly::equilibrium::solve_nash;
use duopoly::market::Side;
use duopoly::scenario::PlanarScenario;

fn main() {
    let scenario = PlanarScenario::reference();
    println!(
        "area {} x {}, base stations at ({}, {}) and ({}, {}), beta = {}, seed = {}",
        scenario.area.0,
        scenario.area.1,
        scenario.bs_positions[0].x,
        scenario.bs_positions[0].y,
        scenario.bs_positions[1].x,
        scenario.bs_positions[1].y,
        scenario.beta,
        scenario.seed
    );

    let market = scenario.compile().unwrap();
    println!("compiled market with {} users", market.len());

    let eq = solve_nash(&market).unwrap();
    println!(
        "equilibrium: kind {:?}, p1 = {:.9}, p2 = {:.9}",
        eq.kind, eq.p1, eq.p2
    );
    if let Some(split) = eq.undecided {
        println!(
            "undecided user {} splits with eps = {:.9}",
            split.user, split.epsilon
        );
    }

    let partition = eq.partition(&market);
    println!(
        "{} users with provider 1, {} with provider 2",
        partition.set1.len(),
        partition.set2.len()
    );
    for side in Side::BOTH {
        println!(
            "provider {} sells {:.6} of {:.6}",
            side.number(),
            eq.allocations.total(side),
            market.supply(side)
        );
    }

    // identical seeds compile to identical markets
    assert_eq!(market, PlanarScenario::reference().compile().unwrap());
}
