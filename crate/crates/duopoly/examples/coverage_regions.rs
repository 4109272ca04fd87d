//! Rasterize the provider-preference regions of a deployment at its
//! equilibrium prices and render them as ASCII.
//!
//! Cells are labeled by the provider a probe user at the cell center
//! would join, and whether it could afford to buy anything there.
//!
//! ```bash
//! cargo run -p duopoly --example coverage_regions
//! ```

use duopoly::equilibrium::solve_nash;
use duopoly::scenario::{region_grid, PlanarScenario, RegionLabel};

fn main() {
    let scenario = PlanarScenario::reference();
    let market = scenario.compile().unwrap();
    let eq = solve_nash(&market).unwrap();
    println!("equilibrium prices: p1 = {:.6}, p2 = {:.6}", eq.p1, eq.p2);

    let grid = region_grid(&scenario, eq.p1, eq.p2, 1.0, (36, 24), false).unwrap();

    let mut counts = [0usize; 5];
    for &cell in &grid.cells {
        counts[cell.as_int() as usize] += 1;
    }
    println!(
        "cells: {} provider 1, {} provider 2, {} no demand (p1 side), {} no demand (p2 side)",
        counts[1], counts[2], counts[3], counts[4]
    );

    // top row printed first so y grows downward on screen
    for iy in (0..grid.ny).rev() {
        let row: String = (0..grid.nx)
            .map(|ix| match grid.label(ix, iy) {
                RegionLabel::Provider1 => '1',
                RegionLabel::Provider2 => '2',
                RegionLabel::NoDemand1 | RegionLabel::NoDemand2 | RegionLabel::NoDemand => '.',
            })
            .collect();
        println!("{row}");
    }
    println!("(1/2 = would buy from that provider, . = priced out)");
}
