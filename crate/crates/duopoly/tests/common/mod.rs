#![allow(dead_code)] // shared across test crates that each use a subset

//! Shared helpers for the integration suites: seeded instance generators
//! and independent oracles that deliberately avoid the library's solver
//! paths.

use duopoly::market::{optimal_price, Market, Side, User};
use rand_chacha::rand_core::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub struct Draw {
    rng: ChaCha8Rng,
}

impl Draw {
    pub fn new(seed: u64, stream: u64) -> Draw {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(stream);
        Draw { rng }
    }

    pub fn unit(&mut self) -> f64 {
        (self.rng.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    pub fn range(&mut self, lo: f64, hi: f64) -> f64 {
        lo + (hi - lo) * self.unit()
    }

    pub fn int(&mut self, lo: usize, hi: usize) -> usize {
        lo + (self.rng.next_u64() % (hi - lo + 1) as u64) as usize
    }
}

/// Random market with the standard parameter ranges
/// (`a, g in [0.01, 10]`, `Q in [0.1, 100]`).
pub fn random_market(draw: &mut Draw, users: usize) -> Market {
    loop {
        let candidates: Vec<User> = (1..=users)
            .map(|id| {
                User::new(
                    id,
                    draw.range(0.01, 10.0),
                    draw.range(0.01, 10.0),
                    draw.range(0.01, 10.0),
                )
                .expect("positive draws")
            })
            .collect();
        let q1 = draw.range(0.1, 100.0);
        let q2 = draw.range(0.1, 100.0);
        if let Ok(market) = Market::new(candidates, q1, q2) {
            return market;
        }
    }
}

/// Closed-form piecewise split price.
///
/// Rebuilds the price of a provider facing `users` plus a user scaled by
/// `eps` from the explicit segment formulas: on each segment the price is
/// `(sum a + eps*a_k) / (sum g + eps*g_k + Q)` over the users still
/// buying, and a user drops out of the sums exactly when the price
/// reaches its choke point `a_i/g_i`. The segment breakpoints are solved
/// for in closed form, unlike the removal-loop implementation under test.
pub fn piecewise_epsilon_price(
    users: &[User],
    side: Side,
    supply: f64,
    scaled: &User,
    eps: f64,
) -> f64 {
    assert!((0.0..=1.0).contains(&eps));
    // base active set at eps = 0 (cross-checked elsewhere against the
    // independent bisection oracle)
    let base = optimal_price(users, side, supply);
    let mut active: Vec<&User> = users
        .iter()
        .filter(|u| base.active.contains(&u.id))
        .collect();
    let (a_k, g_k) = (scaled.a, scaled.g(side));

    // A scaled user whose choke price a_k/g_k does not exceed the base
    // clearing price is priced out at every weight: the price stays flat.
    // (The price with the scaled user included always lies between the
    // base ratio and a_k/g_k, so such a user can never re-enter.)
    if !active.is_empty() && a_k / g_k <= base.price {
        return base.price;
    }

    let mut eps_lo = 0.0_f64;
    loop {
        let sum_a: f64 = active.iter().map(|u| u.a).sum();
        let sum_g: f64 = active.iter().map(|u| u.g(side)).sum();
        let price_at = |e: f64| {
            let numerator = sum_a + e * a_k;
            if numerator == 0.0 {
                0.0
            } else {
                numerator / (sum_g + e * g_k + supply)
            }
        };

        // users already at or past their choke point leave the sums now
        if let Some(pos) = active
            .iter()
            .position(|u| u.a / u.g(side) < price_at(eps_lo))
        {
            active.remove(pos);
            continue;
        }

        // first user choked strictly inside this segment, if any
        let mut next: Option<(usize, f64)> = None;
        for (pos, user) in active.iter().enumerate() {
            let choke = user.a / user.g(side);
            if choke <= price_at(eps_lo) {
                continue;
            }
            // price_at(e) = choke  =>  e = (choke*(sum_g + Q) - sum_a) / (a_k - choke*g_k)
            let denominator = a_k - choke * g_k;
            if denominator <= 0.0 {
                continue; // the price saturates below this choke point
            }
            let e = (choke * (sum_g + supply) - sum_a) / denominator;
            if e > eps_lo && e < 1.0 && next.is_none_or(|(_, best)| e < best) {
                next = Some((pos, e));
            }
        }

        match next {
            Some((pos, e)) if eps >= e => {
                active.remove(pos);
                eps_lo = e;
            }
            _ => return price_at(eps),
        }
    }
}

/// Exact-clearing random allocation: nonnegative quantities per provider,
/// rescaled so each provider's column sums to its supply.
pub fn random_clearing_allocation(
    draw: &mut Draw,
    market: &Market,
) -> duopoly::welfare::Allocation {
    let users = market.users();
    let mut alloc = duopoly::welfare::Allocation::new();
    loop {
        let raw: Vec<[f64; 2]> = users.iter().map(|_| [draw.unit(), draw.unit()]).collect();
        let sums = raw
            .iter()
            .fold([0.0_f64, 0.0], |acc, q| [acc[0] + q[0], acc[1] + q[1]]);
        if sums[0] <= 0.0 || sums[1] <= 0.0 {
            continue;
        }
        let scale = [
            market.supply(Side::Provider1) / sums[0],
            market.supply(Side::Provider2) / sums[1],
        ];
        for (user, q) in users.iter().zip(&raw) {
            alloc.set(user.id, [q[0] * scale[0], q[1] * scale[1]]);
        }
        return alloc;
    }
}

/// The reference deployment as a schema-1 scenario file.
pub fn reference_scenario_json() -> String {
    let scenario = duopoly::scenario::PlanarScenario::reference();
    let positions: Vec<[f64; 2]> = scenario.user_positions.iter().map(|p| [p.x, p.y]).collect();
    serde_json::json!({
        "schema": 1,
        "area": [scenario.area.0, scenario.area.1],
        "bs_positions": [
            [scenario.bs_positions[0].x, scenario.bs_positions[0].y],
            [scenario.bs_positions[1].x, scenario.bs_positions[1].y],
        ],
        "user_positions": positions,
        "a_range": [scenario.a_range.0, scenario.a_range.1],
        "beta": scenario.beta,
        "Q1": scenario.q1,
        "Q2": scenario.q2,
        "seed": scenario.seed,
    })
    .to_string()
}
