//! Two-provider price competition and its unique equilibrium.
//!
//! Each user is summarized by the ratio `alpha = g1/g2`; at prices
//! `(p1, p2)` the users preferring provider 1 are exactly those with
//! `alpha <= p2/p1`, so any price pair induces a cut of the `alpha`-sorted
//! user line. Scanning the `I + 1` cut positions and comparing each cut's
//! optimal-price ratio against its interval yields the fixed point of the
//! piecewise-constant best-response ratio, when one exists (an *integer*
//! market-clearing equilibrium: every user buys from a single provider).
//!
//! When the ratio steps over the diagonal instead of crossing it, exactly
//! one *undecided* user teeters between the providers. Splitting that
//! user's demand by a share `eps` and re-running the clearing-price loop
//! with the user scaled by `eps` on one side and `1 - eps` on the other
//! makes the ratio continuous and strictly monotone in `eps`, so a unique
//! split equalizes `p1*g1 = p2*g2` and clears both markets (a *fractional*
//! equilibrium). Exactly one of the two outcomes exists for any market
//! with distinct `alpha`s.

use std::collections::BTreeSet;

use crate::error::{Error, Result};
use crate::market::{demand, optimal_price, Market, Side, User};
use crate::tolerances::Tolerances;
use crate::welfare::Allocation;

/// A cut of the user population into the two provider-preference sets.
///
/// Both lists are in ascending `alpha` order; `set1` holds the users that
/// prefer provider 1.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Partition {
    pub set1: Vec<usize>,
    pub set2: Vec<usize>,
}

/// How the equilibrium clears: every user single-provider, or one split.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EquilibriumKind {
    Integer,
    Fractional,
}

/// The user that splits demand in a fractional equilibrium.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Undecided {
    pub user: usize,
    /// Share of the user's demand routed to provider 1.
    pub epsilon: f64,
}

/// Solver output: equilibrium prices and per-user allocations.
#[derive(Debug, Clone, PartialEq)]
pub struct Equilibrium {
    pub kind: EquilibriumKind,
    pub p1: f64,
    pub p2: f64,
    pub allocations: Allocation,
    /// Present exactly when `kind` is [`EquilibriumKind::Fractional`].
    pub undecided: Option<Undecided>,
}

impl Equilibrium {
    pub fn price(&self, side: Side) -> f64 {
        match side {
            Side::Provider1 => self.p1,
            Side::Provider2 => self.p2,
        }
    }

    /// Price ratio `p2/p1` that induces the equilibrium partition.
    pub fn ratio(&self) -> f64 {
        self.p2 / self.p1
    }

    /// The preference partition at the equilibrium prices.
    pub fn partition(&self, market: &Market) -> Partition {
        partition_at(market, self.ratio())
    }
}

/// Preference ratio `g1/g2` of a user.
pub fn alpha(user: &User) -> f64 {
    user.alpha()
}

/// The provider a user joins at prices `(p1, p2)`: whichever minimizes
/// `p_j * g_j`, with ties resolved toward provider 1. Equivalent to
/// comparing the maximum utilities achievable from each provider.
pub fn preferred_provider(user: &User, p1: f64, p2: f64) -> Side {
    assert!(p1 > 0.0 && p2 > 0.0, "prices must be positive");
    if p1 * user.g(Side::Provider1) <= p2 * user.g(Side::Provider2) {
        Side::Provider1
    } else {
        Side::Provider2
    }
}

/// Split the users at the cut `nu`: `set1 = {alpha <= nu}`,
/// `set2 = {alpha > nu}`.
pub fn partition_at(market: &Market, nu: f64) -> Partition {
    let mut set1 = Vec::new();
    let mut set2 = Vec::new();
    for user in market.users() {
        if user.alpha() <= nu {
            set1.push(user.id);
        } else {
            set2.push(user.id);
        }
    }
    Partition { set1, set2 }
}

/// Optimal price ratio `p2*(set2(nu)) / p1*(set1(nu))` induced by the cut
/// `nu`. Returns `+inf` when `set1` is empty and `0` when `set2` is empty.
pub fn mu(market: &Market, nu: f64) -> f64 {
    let split = market.users().partition_point(|u| u.alpha() <= nu);
    ratio_at_split(market, split)
}

/// Ratio `p2*(suffix) / p1*(prefix)` for the cut placing the first `split`
/// users (in `alpha` order) with provider 1.
fn ratio_at_split(market: &Market, split: usize) -> f64 {
    let users = market.users();
    let p1 = optimal_price(
        &users[..split],
        Side::Provider1,
        market.supply(Side::Provider1),
    )
    .price;
    let p2 = optimal_price(
        &users[split..],
        Side::Provider2,
        market.supply(Side::Provider2),
    )
    .price;
    if p1 == 0.0 {
        f64::INFINITY
    } else {
        p2 / p1
    }
}

/// The optimal price ratio for every cut position `k = 0..=I`.
///
/// Entry `k` is the ratio when the first `k` users (ascending `alpha`) are
/// assigned to provider 1. The table is non-increasing in `k`.
pub fn mu_table(market: &Market) -> Vec<f64> {
    (0..=market.len())
        .map(|split| ratio_at_split(market, split))
        .collect()
}

/// Outcome of scanning the `I + 1` cut intervals for a fixed point.
struct IntervalScan {
    ratios: Vec<f64>,
    /// Cut position whose ratio lies strictly inside its interval.
    fixed_point: Option<usize>,
    /// Cut positions whose ratio landed exactly on an interval endpoint.
    boundary_hits: Vec<(usize, f64)>,
}

fn scan_intervals(market: &Market) -> IntervalScan {
    let users = market.users();
    let count = users.len();
    let ratios = mu_table(market);
    let mut fixed_point = None;
    let mut boundary_hits = Vec::new();
    for (split, &r) in ratios.iter().enumerate() {
        let lower = if split == 0 {
            0.0
        } else {
            users[split - 1].alpha()
        };
        let upper = if split == count {
            f64::INFINITY
        } else {
            users[split].alpha()
        };
        if r > lower && r < upper {
            debug_assert!(fixed_point.is_none(), "two fixed-point intervals");
            fixed_point = Some(split);
        } else if r == lower || r == upper {
            boundary_hits.push((split, r));
        }
    }
    IntervalScan {
        ratios,
        fixed_point,
        boundary_hits,
    }
}

/// Build the single-provider-per-user equilibrium for a given cut.
pub(crate) fn integer_equilibrium_at(market: &Market, split: usize) -> Equilibrium {
    let users = market.users();
    let p1 = optimal_price(
        &users[..split],
        Side::Provider1,
        market.supply(Side::Provider1),
    )
    .price;
    let p2 = optimal_price(
        &users[split..],
        Side::Provider2,
        market.supply(Side::Provider2),
    )
    .price;
    let mut allocations = Allocation::new();
    for (pos, user) in users.iter().enumerate() {
        if pos < split {
            allocations.set(user.id, [demand(user.a, user.g(Side::Provider1), p1), 0.0]);
        } else {
            allocations.set(user.id, [0.0, demand(user.a, user.g(Side::Provider2), p2)]);
        }
    }
    Equilibrium {
        kind: EquilibriumKind::Integer,
        p1,
        p2,
        allocations,
        undecided: None,
    }
}

/// Search the `I + 1` cut intervals for a ratio fixed point.
///
/// Returns the integer equilibrium when some cut's optimal price ratio lies
/// strictly inside its own interval, `None` otherwise. At most one interval
/// can qualify because the ratio table is non-increasing.
pub fn find_integer_mce(market: &Market) -> Option<Equilibrium> {
    scan_intervals(market)
        .fixed_point
        .map(|split| integer_equilibrium_at(market, split))
}

/// Clearing price when `scaled_user` participates at weight `eps`, i.e.
/// contributes `(eps * a, eps * g)` to the removal loop. Equals the plain
/// clearing price of `users` at `eps = 0` and of `users + scaled_user` at
/// `eps = 1`; continuous and strictly increasing in between whenever the
/// scaled user's demand stays positive.
pub fn epsilon_price(users: &[User], side: Side, supply: f64, scaled_user: &User, eps: f64) -> f64 {
    assert!(
        (0.0..=1.0).contains(&eps),
        "eps must lie in [0, 1] (got {eps})"
    );
    let mut pairs: Vec<(f64, f64)> = users.iter().map(|u| (u.a, u.g(side))).collect();
    pairs.push((eps * scaled_user.a, eps * scaled_user.g(side)));
    crate::market::clearing_price_pairs(&pairs, supply).0
}

/// Construct the fractional equilibrium around the undecided user at
/// `position` (index into the `alpha`-sorted user list).
///
/// Bisects the split share `eps` until `p1*g1 = p2*g2` for the undecided
/// user; both markets then clear exactly, every other user buys from its
/// preferred provider, and the undecided user is indifferent.
pub fn find_fractional_mce(market: &Market, position: usize) -> Result<Equilibrium> {
    find_fractional_mce_with(market, position, &Tolerances::default())
}

pub fn find_fractional_mce_with(
    market: &Market,
    position: usize,
    tol: &Tolerances,
) -> Result<Equilibrium> {
    let users = market.users();
    if position >= users.len() {
        return Err(Error::NotUndecided { position });
    }
    let undecided = users[position];
    let set1 = &users[..position];
    let set2 = &users[position + 1..];
    let (q1, q2) = (
        market.supply(Side::Provider1),
        market.supply(Side::Provider2),
    );

    // Teeter condition: the user prefers whichever provider it is not
    // currently priced into.
    let ratios = mu_table(market);
    let a_l = undecided.alpha();
    if !(ratios[position] > a_l && a_l > ratios[position + 1]) {
        return Err(Error::NotUndecided { position });
    }

    // The construction needs the undecided user to hold positive demand
    // toward both providers across the whole candidate price range; the
    // highest candidate price on each side includes the user at full weight.
    let p1_top = optimal_price(&users[..=position], Side::Provider1, q1).price;
    if demand(undecided.a, undecided.g(Side::Provider1), p1_top) <= 0.0 {
        return Err(Error::DegenerateSplit {
            id: undecided.id,
            provider: 1,
        });
    }
    let p2_top = optimal_price(&users[position..], Side::Provider2, q2).price;
    if demand(undecided.a, undecided.g(Side::Provider2), p2_top) <= 0.0 {
        return Err(Error::DegenerateSplit {
            id: undecided.id,
            provider: 2,
        });
    }

    let g1 = undecided.g(Side::Provider1);
    let g2 = undecided.g(Side::Provider2);
    let gap = |eps: f64| -> f64 {
        let p1 = epsilon_price(set1, Side::Provider1, q1, &undecided, eps);
        let p2 = epsilon_price(set2, Side::Provider2, q2, &undecided, 1.0 - eps);
        p1 * g1 - p2 * g2
    };

    let (mut lo, mut hi) = (0.0_f64, 1.0_f64);
    let (glo, ghi) = (gap(lo), gap(hi));
    if !(glo < 0.0 && ghi > 0.0) {
        return Err(Error::Invariant(format!(
            "split bisection not bracketed at position {position}: \
             gap(0) = {glo}, gap(1) = {ghi}"
        )));
    }
    // Bisect past `tol.epsilon_root` down to floating-point exhaustion so
    // the indifference identity holds to relative precision even when the
    // root sits very close to 0 or 1.
    loop {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        let g = gap(mid);
        if g == 0.0 {
            lo = mid;
            hi = mid;
            break;
        } else if g < 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    debug_assert!(
        hi - lo <= tol.epsilon_root,
        "exhaustion beats the target width"
    );
    let eps = if gap(lo).abs() <= gap(hi).abs() {
        lo
    } else {
        hi
    };

    let p1 = epsilon_price(set1, Side::Provider1, q1, &undecided, eps);
    let p2 = epsilon_price(set2, Side::Provider2, q2, &undecided, 1.0 - eps);

    let indiff = (p1 * g1 - p2 * g2).abs();
    let indiff_scale = (p1 * g1).max(p2 * g2);
    if indiff > tol.indifference_rel * indiff_scale {
        return Err(Error::Invariant(format!(
            "split user {} indifference residual {indiff:e} exceeds {:e}",
            undecided.id,
            tol.indifference_rel * indiff_scale
        )));
    }

    let mut allocations = Allocation::new();
    for user in set1 {
        allocations.set(user.id, [demand(user.a, user.g(Side::Provider1), p1), 0.0]);
    }
    for user in set2 {
        allocations.set(user.id, [0.0, demand(user.a, user.g(Side::Provider2), p2)]);
    }
    let split_q1 = (eps * (undecided.a / p1 - g1)).max(0.0);
    let split_q2 = ((1.0 - eps) * (undecided.a / p2 - g2)).max(0.0);
    allocations.set(undecided.id, [split_q1, split_q2]);

    for side in Side::BOTH {
        let total = allocations.total(side);
        let supply = market.supply(side);
        if (total - supply).abs() > tol.clearing_rel * supply {
            return Err(Error::Invariant(format!(
                "provider {} clears {total} against supply {supply}",
                side.number()
            )));
        }
    }

    Ok(Equilibrium {
        kind: EquilibriumKind::Fractional,
        p1,
        p2,
        allocations,
        undecided: Some(Undecided {
            user: undecided.id,
            epsilon: eps,
        }),
    })
}

/// Compute the unique equilibrium of the market.
///
/// Runs the integer fixed-point scan first; when no interval holds its
/// ratio, locates the unique undecided user and builds the fractional
/// equilibrium. Exactly one of the two outcomes exists, except on the
/// measure-zero boundary case where the ratio lands exactly on some
/// `alpha`, reported as [`Error::DegenerateBoundary`].
pub fn solve_nash(market: &Market) -> Result<Equilibrium> {
    solve_nash_with(market, &Tolerances::default())
}

pub fn solve_nash_with(market: &Market, tol: &Tolerances) -> Result<Equilibrium> {
    let scan = scan_intervals(market);
    if let Some(split) = scan.fixed_point {
        return Ok(integer_equilibrium_at(market, split));
    }

    let users = market.users();
    let teeter: Vec<usize> = (0..users.len())
        .filter(|&pos| {
            let a = users[pos].alpha();
            scan.ratios[pos] > a && a > scan.ratios[pos + 1]
        })
        .collect();

    match teeter.as_slice() {
        [position] => find_fractional_mce_with(market, *position, tol),
        [] => {
            if let Some(&(split, ratio)) = scan.boundary_hits.first() {
                Err(Error::DegenerateBoundary {
                    interval: split,
                    ratio,
                })
            } else {
                Err(Error::Invariant(format!(
                    "no fixed point and no undecided user; ratio table: {:?}, alphas: {:?}",
                    scan.ratios,
                    users.iter().map(User::alpha).collect::<Vec<_>>()
                )))
            }
        }
        many => Err(Error::Invariant(format!(
            "multiple undecided candidates {many:?}; ratio table: {:?}, alphas: {:?}",
            scan.ratios,
            users.iter().map(User::alpha).collect::<Vec<_>>()
        ))),
    }
}

/// Ids of users buying from both providers (at most one in any output).
pub fn splitters(eq: &Equilibrium) -> BTreeSet<usize> {
    eq.allocations
        .entries()
        .filter(|(_, q)| q[0] > 0.0 && q[1] > 0.0)
        .map(|(id, _)| id)
        .collect()
}
