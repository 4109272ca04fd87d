//! Market model: users, providers, demand, and the clearing price of a
//! single provider.
//!
//! A provider sells a fixed supply `Q` of a divisible resource at a unit
//! price `p`. A user with willingness to pay `a` and channel quality offset
//! `g` buys the amount that maximizes `a*ln(1 + q/g) - p*q`, which is the
//! demand `(a/p - g)^+`. The provider's revenue is maximized at the unique
//! price where aggregate demand equals supply.
//!
//! That price is computed by an iterative removal loop: start from the
//! *fictitious* price `sum(a) / (sum(g) + Q)` (the clearing price if users
//! could buy negative amounts), drop every user whose demand is negative,
//! and recompute. Each removal strictly increases the fictitious price, so
//! the loop terminates in at most one pass per user. An independent
//! bisection oracle solving `p*Q = sum((a - p*g)^+)` cross-checks the
//! result.

use std::collections::BTreeSet;

use crate::error::{Error, Result};
use crate::tolerances::{DEMAND_SIGN_GUARD, MAX_BISECTION_STEPS};

/// One of the two competing providers.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Side {
    Provider1,
    Provider2,
}

impl Side {
    pub const BOTH: [Side; 2] = [Side::Provider1, Side::Provider2];

    /// Zero-based index into per-provider arrays.
    pub fn idx(self) -> usize {
        match self {
            Side::Provider1 => 0,
            Side::Provider2 => 1,
        }
    }

    /// Provider number as used in output formats (1 or 2).
    pub fn number(self) -> u8 {
        self.idx() as u8 + 1
    }

    pub fn other(self) -> Side {
        match self {
            Side::Provider1 => Side::Provider2,
            Side::Provider2 => Side::Provider1,
        }
    }
}

/// A user with willingness to pay `a` and per-provider quality offsets.
///
/// `g[0]` and `g[1]` convert resource bought from provider 1 and 2 into
/// effective rate; a larger offset means a worse channel.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct User {
    pub id: usize,
    pub a: f64,
    pub g: [f64; 2],
}

impl User {
    pub fn new(id: usize, a: f64, g1: f64, g2: f64) -> Result<User> {
        for (field, value) in [("a", a), ("g1", g1), ("g2", g2)] {
            if !(value.is_finite() && value > 0.0) {
                return Err(Error::NonPositiveUserField { id, field, value });
            }
        }
        Ok(User { id, a, g: [g1, g2] })
    }

    pub fn g(&self, side: Side) -> f64 {
        self.g[side.idx()]
    }

    /// Preference ratio `g1/g2`. Users with small `alpha` favor provider 1.
    pub fn alpha(&self) -> f64 {
        self.g[0] / self.g[1]
    }

    /// Utility-maximizing purchase from one provider at unit price `p`.
    pub fn demand(&self, side: Side, p: f64) -> f64 {
        demand(self.a, self.g(side), p)
    }

    /// Utility of buying `q` from one provider at unit price `p`.
    pub fn utility(&self, side: Side, p: f64, q: f64) -> f64 {
        utility(self.a, self.g(side), p, q)
    }
}

/// A provider holding a fixed divisible supply.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Provider {
    pub id: u8,
    pub supply: f64,
}

impl Provider {
    pub fn new(id: u8, supply: f64) -> Result<Provider> {
        if !(supply.is_finite() && supply > 0.0) {
            return Err(Error::NonPositiveSupply { id, supply });
        }
        Ok(Provider { id, supply })
    }
}

/// A complete two-provider market instance.
///
/// Users are stored sorted by ascending preference ratio `alpha`; equal
/// ratios are rejected at construction because the equilibrium search
/// relies on a strict ordering.
#[derive(Debug, Clone, PartialEq)]
pub struct Market {
    users: Vec<User>,
    providers: [Provider; 2],
}

impl Market {
    pub fn new(users: Vec<User>, q1: f64, q2: f64) -> Result<Market> {
        if users.is_empty() {
            return Err(Error::EmptyMarket);
        }
        let mut ids = BTreeSet::new();
        for user in &users {
            // re-validate in case the struct was built directly
            let checked = User::new(user.id, user.a, user.g[0], user.g[1])?;
            if !ids.insert(checked.id) {
                return Err(Error::DuplicateUserId(checked.id));
            }
        }
        let providers = [Provider::new(1, q1)?, Provider::new(2, q2)?];

        let mut sorted = users;
        sorted.sort_by(|u, v| u.alpha().total_cmp(&v.alpha()));
        for pair in sorted.windows(2) {
            if pair[0].alpha() == pair[1].alpha() {
                return Err(Error::AlphaTie {
                    first: pair[0].id,
                    second: pair[1].id,
                    alpha: pair[0].alpha(),
                });
            }
        }
        Ok(Market {
            users: sorted,
            providers,
        })
    }

    /// Users in ascending `alpha` order.
    pub fn users(&self) -> &[User] {
        &self.users
    }

    pub fn len(&self) -> usize {
        self.users.len()
    }

    pub fn is_empty(&self) -> bool {
        false // construction rejects empty user lists
    }

    pub fn provider(&self, side: Side) -> Provider {
        self.providers[side.idx()]
    }

    pub fn supply(&self, side: Side) -> f64 {
        self.providers[side.idx()].supply
    }

    pub fn user_by_id(&self, id: usize) -> Option<&User> {
        self.users.iter().find(|u| u.id == id)
    }
}

/// Demand of a single user: `(a/p - g)^+`.
///
/// # Panics
///
/// Panics if `p <= 0`; prices must be strictly positive.
pub fn demand(a: f64, g: f64, p: f64) -> f64 {
    assert!(p > 0.0, "price must be positive (got {p})");
    (a / p - g).max(0.0)
}

/// Utility `a*ln(1 + q/g) - p*q` of buying `q` at unit price `p`.
///
/// # Panics
///
/// Panics if `p <= 0` or `q < 0`.
pub fn utility(a: f64, g: f64, p: f64, q: f64) -> f64 {
    assert!(p > 0.0, "price must be positive (got {p})");
    assert!(q >= 0.0, "quantity must be nonnegative (got {q})");
    a * (1.0 + q / g).ln() - p * q
}

/// Fictitious price `sum(a) / (sum(g) + Q)`: the clearing price if users
/// were allowed to buy negative amounts. Zero for an empty user list.
pub fn fictitious_price(users: &[User], side: Side, supply: f64) -> f64 {
    assert!(supply > 0.0, "supply must be positive (got {supply})");
    let sum_a: f64 = users.iter().map(|u| u.a).sum();
    let sum_g: f64 = users.iter().map(|u| u.g(side)).sum();
    if sum_a == 0.0 {
        0.0
    } else {
        sum_a / (sum_g + supply)
    }
}

/// A clearing price together with the users left with positive demand.
#[derive(Debug, Clone, PartialEq)]
pub struct PriceResult {
    /// The revenue-maximizing unit price; zero for an empty user list.
    pub price: f64,
    /// Ids of users whose demand at `price` is positive (up to the removal
    /// guard band).
    pub active: BTreeSet<usize>,
}

/// Core removal loop over `(a, g)` pairs. Returns the clearing price, the
/// retained-pair mask, and the fictitious-price trace (one entry per pass).
pub(crate) fn clearing_price_pairs(
    pairs: &[(f64, f64)],
    supply: f64,
) -> (f64, Vec<bool>, Vec<f64>) {
    assert!(supply > 0.0, "supply must be positive (got {supply})");
    let mut retained = vec![true; pairs.len()];
    let mut trace = Vec::new();
    loop {
        let mut sum_a = 0.0;
        let mut sum_g = 0.0;
        for (i, &(a, g)) in pairs.iter().enumerate() {
            if retained[i] {
                sum_a += a;
                sum_g += g;
            }
        }
        if sum_a == 0.0 {
            // empty set, or only zero-weight entries left
            return (0.0, retained, trace);
        }
        let price = sum_a / (sum_g + supply);
        trace.push(price);
        let mut removed_any = false;
        for (i, &(a, g)) in pairs.iter().enumerate() {
            if retained[i] && a / price - g < -DEMAND_SIGN_GUARD {
                retained[i] = false;
                removed_any = true;
            }
        }
        if !removed_any {
            return (price, retained, trace);
        }
    }
}

/// Revenue-maximizing price for a set of users facing one provider.
///
/// Iteratively removes users with negative demand at the fictitious price
/// until none remain; at the fixed point aggregate demand equals `supply`.
/// Returns price zero with an empty active set for an empty user list.
pub fn optimal_price(users: &[User], side: Side, supply: f64) -> PriceResult {
    optimal_price_with_trace(users, side, supply).0
}

/// Same as [`optimal_price`] but also returns the fictitious-price value
/// from each pass of the removal loop. The trace is strictly increasing.
pub fn optimal_price_with_trace(
    users: &[User],
    side: Side,
    supply: f64,
) -> (PriceResult, Vec<f64>) {
    let pairs: Vec<(f64, f64)> = users.iter().map(|u| (u.a, u.g(side))).collect();
    let (price, retained, trace) = clearing_price_pairs(&pairs, supply);
    let active = users
        .iter()
        .zip(&retained)
        .filter(|&(_, &kept)| kept && price > 0.0)
        .map(|(u, _)| u.id)
        .collect();
    (PriceResult { price, active }, trace)
}

/// Independent clearing-price oracle: solves `p*Q = sum((a - p*g)^+)` by
/// bisection on `p`. The left side is strictly increasing and the right
/// side non-increasing, so the root is unique.
///
/// Deliberately shares no code with [`optimal_price`]; used to cross-check
/// it in tests and in the `verify` command.
pub fn bisection_price_oracle(users: &[User], side: Side, supply: f64, tol: f64) -> Result<f64> {
    assert!(!users.is_empty(), "oracle requires a non-empty user list");
    assert!(supply > 0.0, "supply must be positive (got {supply})");
    assert!(tol > 0.0, "tolerance must be positive (got {tol})");

    let excess = |p: f64| -> f64 {
        let sold: f64 = users.iter().map(|u| (u.a - p * u.g(side)).max(0.0)).sum();
        p * supply - sold
    };

    let mut lo = 0.0_f64;
    let mut hi = users
        .iter()
        .map(|u| u.a / u.g(side))
        .fold(0.0_f64, f64::max);
    debug_assert!(excess(hi) >= 0.0);

    for _ in 0..MAX_BISECTION_STEPS {
        if hi - lo <= tol {
            return Ok(0.5 * (lo + hi));
        }
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            // interval exhausted in floating point before reaching tol
            return Err(Error::IterationCap {
                what: "clearing-price bisection oracle",
                tol,
                iterations: MAX_BISECTION_STEPS,
            });
        }
        if excess(mid) < 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Err(Error::IterationCap {
        what: "clearing-price bisection oracle",
        tol,
        iterations: MAX_BISECTION_STEPS,
    })
}
