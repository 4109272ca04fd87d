//! Sweep the path-loss exponent over the reference deployment and print
//! the duopoly/monopoly price table as CSV. With strong attenuation the
//! two providers stop competing and the price gap vanishes.
//!
//! ```bash
//! cargo run -p duopoly --example beta_sweep
//! ```

use duopoly::io::sweep_to_csv;
use duopoly::scenario::{sweep_beta, PlanarScenario};

fn main() {
    let betas: Vec<f64> = (0..9).map(|i| 2.0 + 0.5 * i as f64).collect();
    let rows = sweep_beta(&PlanarScenario::reference(), &betas).unwrap();
    print!("{}", sweep_to_csv(&rows));

    let gap = |row: &duopoly::scenario::SweepRow| {
        (row.p1_mono.unwrap() - row.p1_duo.unwrap()).max(row.p2_mono.unwrap() - row.p2_duo.unwrap())
    };
    eprintln!(
        "# competition gap: {:.3e} at beta = {}, {:.3e} at beta = {}",
        gap(&rows[0]),
        rows[0].beta,
        gap(&rows[8]),
        rows[8].beta
    );
}
