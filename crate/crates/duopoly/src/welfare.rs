//! Total network utility, optimality-condition verification, and an
//! independent welfare-optimum solver.
//!
//! The welfare problem maximizes `sum_i a_i*ln(1 + x_i)` with
//! `x_i = q_i1/g_i1 + q_i2/g_i2` subject to both providers selling out
//! exactly. Its optimality conditions pair every allocation with unique
//! multipliers `(p1, p2)` which coincide with the equilibrium prices of the
//! price-competition game; [`solve_system`] computes the optimum directly
//! by nested bisection on the multipliers and never touches the
//! equilibrium solver, so the two can cross-check each other.

use std::collections::BTreeMap;

use crate::equilibrium::{integer_equilibrium_at, Equilibrium};
use crate::error::{Error, Result};
use crate::market::{optimal_price, Market, Side, User};

/// Maximum user count accepted by [`exhaustive_stability_oracle`].
pub const EXHAUSTIVE_ORACLE_CAP: usize = 20;
/// Largest user count for which the oracle also scans all `2^I` partitions.
pub const FULL_PARTITION_SCAN_CAP: usize = 12;

/// Per-user purchased quantities `[q1, q2]`, keyed by user id.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Allocation {
    q: BTreeMap<usize, [f64; 2]>,
}

impl Allocation {
    pub fn new() -> Allocation {
        Allocation::default()
    }

    pub fn set(&mut self, id: usize, q: [f64; 2]) {
        self.q.insert(id, q);
    }

    /// Quantities for a user; users without an entry hold nothing.
    pub fn get(&self, id: usize) -> [f64; 2] {
        self.q.get(&id).copied().unwrap_or([0.0, 0.0])
    }

    pub fn entries(&self) -> impl Iterator<Item = (usize, [f64; 2])> + '_ {
        self.q.iter().map(|(&id, &q)| (id, q))
    }

    /// Total quantity sold by one provider.
    pub fn total(&self, side: Side) -> f64 {
        self.q.values().map(|q| q[side.idx()]).sum()
    }

    /// Effective rate `x = q1/g1 + q2/g2` obtained by a user.
    pub fn rate(&self, user: &User) -> f64 {
        let q = self.get(user.id);
        q[0] / user.g(Side::Provider1) + q[1] / user.g(Side::Provider2)
    }

    pub fn is_nonnegative(&self) -> bool {
        self.q.values().all(|q| q[0] >= 0.0 && q[1] >= 0.0)
    }

    /// Whether the allocation fits within the given supplies (exact
    /// clearing is checked separately where required).
    pub fn feasible(&self, q1: f64, q2: f64) -> bool {
        self.is_nonnegative()
            && self.total(Side::Provider1) <= q1
            && self.total(Side::Provider2) <= q2
    }
}

/// Total network utility `sum_i a_i * ln(1 + x_i)`.
///
/// Payments cancel between users and providers, so this is the entire
/// social surplus of an allocation.
pub fn total_utility(market: &Market, alloc: &Allocation) -> f64 {
    market
        .users()
        .iter()
        .map(|u| u.a * (1.0 + alloc.rate(u)).ln())
        .sum()
}

/// Residual report for the welfare-optimality conditions at a candidate
/// allocation and multiplier pair.
#[derive(Debug, Clone, PartialEq)]
pub struct KktReport {
    pub p1: f64,
    pub p2: f64,
    /// Worst violation of `a/(1+x)/g_j <= p_j` over all users and providers.
    pub max_stationarity_residual: f64,
    /// Worst violation of `q_ij * (a/(1+x)/g_j - p_j) = 0`.
    pub max_complementarity_residual: f64,
    /// Relative supply mismatch `|sum q_j - Q_j| / Q_j` per provider.
    pub clearing_residual: [f64; 2],
    /// Positive prices and nonnegative quantities.
    pub feasible: bool,
    pub tol: f64,
    pub passes: bool,
}

/// Evaluate the optimality conditions of the welfare problem.
pub fn check_kkt(market: &Market, alloc: &Allocation, p1: f64, p2: f64, tol: f64) -> KktReport {
    assert!(tol > 0.0, "tolerance must be positive (got {tol})");
    let prices = [p1, p2];
    let mut stationarity = f64::NEG_INFINITY;
    let mut complementarity: f64 = 0.0;
    for user in market.users() {
        let x = alloc.rate(user);
        let q = alloc.get(user.id);
        for side in Side::BOTH {
            let marginal = user.a / (1.0 + x) / user.g(side);
            let residual = marginal - prices[side.idx()];
            stationarity = stationarity.max(residual);
            complementarity = complementarity.max(q[side.idx()] * residual.abs());
        }
    }
    let clearing_residual = [
        (alloc.total(Side::Provider1) - market.supply(Side::Provider1)).abs()
            / market.supply(Side::Provider1),
        (alloc.total(Side::Provider2) - market.supply(Side::Provider2)).abs()
            / market.supply(Side::Provider2),
    ];
    let feasible = p1 > 0.0 && p2 > 0.0 && alloc.is_nonnegative();
    let passes = feasible
        && stationarity <= tol
        && complementarity <= tol
        && clearing_residual[0] <= tol
        && clearing_residual[1] <= tol;
    KktReport {
        p1,
        p2,
        max_stationarity_residual: stationarity,
        max_complementarity_residual: complementarity,
        clearing_residual,
        feasible,
        tol,
        passes,
    }
}

/// A user's welfare-optimal rate at marginal price `m`: `(a/m - 1)^+`.
fn best_rate(a: f64, m: f64) -> f64 {
    (a / m - 1.0).max(0.0)
}

/// Per-provider demand at prices `(s, s*nu)` when every user buys from the
/// cheaper provider (ties to provider 1). Excludes user `skip` if given.
fn side_demands(market: &Market, s: f64, nu: f64, skip: Option<usize>) -> [f64; 2] {
    let mut d = [0.0, 0.0];
    for user in market.users() {
        if Some(user.id) == skip {
            continue;
        }
        let g1 = user.g(Side::Provider1);
        let g2 = user.g(Side::Provider2);
        // marginal prices are p1*g1 = s*g1 and p2*g2 = s*nu*g2
        let (side, g, marginal) = if g1 <= nu * g2 {
            (0, g1, s * g1)
        } else {
            (1, g2, s * nu * g2)
        };
        d[side] += best_rate(user.a, marginal) * g;
    }
    d
}

/// Scale `s` (price of provider 1) at which total demand equals total
/// supply for a fixed price ratio `nu`, found by bisection. Total demand is
/// strictly decreasing in `s` where positive.
fn clear_total_scale(market: &Market, nu: f64, max_iters: usize) -> f64 {
    let target = market.supply(Side::Provider1) + market.supply(Side::Provider2);
    let total = |s: f64| -> f64 {
        let d = side_demands(market, s, nu, None);
        d[0] + d[1]
    };
    let mut hi = market
        .users()
        .iter()
        .map(|u| u.a / u.g(Side::Provider1).min(nu * u.g(Side::Provider2)))
        .fold(0.0_f64, f64::max);
    let mut lo = hi;
    for _ in 0..2048 {
        if total(lo) >= target {
            break;
        }
        lo *= 0.5;
    }
    for _ in 0..max_iters.max(64) {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if total(mid) > target {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

/// Solve the welfare-maximization problem by dual search.
///
/// Outer bisection runs on the price ratio `nu = p2/p1`: at the total-
/// clearing scale, the imbalance `sum(q1) - Q1` is monotone increasing in
/// `nu`. When the imbalance crosses zero inside a preference interval the
/// optimum assigns every user to a single provider; when it jumps over
/// zero at some user's `alpha`, that user splits across both providers and
/// the residual supplies pin the split (at most one such user). Returns the
/// allocation with its multipliers once the optimality report passes at
/// `tol`.
pub fn solve_system(market: &Market, tol: f64, max_iters: usize) -> Result<(Allocation, f64, f64)> {
    assert!(tol > 0.0, "tolerance must be positive (got {tol})");
    let users = market.users();
    let (q1, q2) = (
        market.supply(Side::Provider1),
        market.supply(Side::Provider2),
    );

    let imbalance = |nu: f64| -> f64 {
        let s = clear_total_scale(market, nu, max_iters);
        side_demands(market, s, nu, None)[0] - q1
    };

    // Below every alpha all users shop at provider 2 (imbalance -Q1);
    // above every alpha they all shop at provider 1 (imbalance +Q2).
    let mut nu_lo = 0.5 * users.first().unwrap().alpha();
    let mut nu_hi = 2.0 * users.last().unwrap().alpha();
    let mut guard = 0;
    while imbalance(nu_lo) >= 0.0 {
        nu_lo *= 0.5;
        guard += 1;
        if guard > 128 {
            return Err(Error::Invariant("imbalance lower bracket not found".into()));
        }
    }
    guard = 0;
    while imbalance(nu_hi) <= 0.0 {
        nu_hi *= 2.0;
        guard += 1;
        if guard > 128 {
            return Err(Error::Invariant("imbalance upper bracket not found".into()));
        }
    }

    for _ in 0..max_iters.max(64) {
        let mid = 0.5 * (nu_lo + nu_hi);
        if mid <= nu_lo || mid >= nu_hi {
            break;
        }
        if imbalance(mid) < 0.0 {
            nu_lo = mid;
        } else {
            nu_hi = mid;
        }
    }

    // A user whose alpha sits inside the final bracket marks a jump of the
    // imbalance: the welfare optimum splits that user across providers.
    let slack = 4.0 * f64::EPSILON * nu_hi.abs();
    let split_user = users
        .iter()
        .find(|u| u.alpha() >= nu_lo - slack && u.alpha() <= nu_hi + slack)
        .copied();

    let (nu, scale, alloc) = match split_user {
        Some(splitter) => {
            let nu = splitter.alpha();
            let g1 = splitter.g(Side::Provider1);
            let g2 = splitter.g(Side::Provider2);
            // Residual-fill consistency: the leftovers handed to the split
            // user must add up to exactly the rate it demands.
            let fill_gap = |s: f64| -> f64 {
                let d = side_demands(market, s, nu, Some(splitter.id));
                (q1 - d[0]) / g1 + (q2 - d[1]) / g2 - best_rate(splitter.a, s * g1)
            };
            let mut hi = users
                .iter()
                .map(|u| u.a / u.g(Side::Provider1).min(nu * u.g(Side::Provider2)))
                .fold(0.0_f64, f64::max);
            let mut lo = hi;
            for _ in 0..2048 {
                if fill_gap(lo) <= 0.0 {
                    break;
                }
                lo *= 0.5;
            }
            for _ in 0..max_iters.max(64) {
                let mid = 0.5 * (lo + hi);
                if mid <= lo || mid >= hi {
                    break;
                }
                if fill_gap(mid) < 0.0 {
                    lo = mid;
                } else {
                    hi = mid;
                }
            }
            let s = 0.5 * (lo + hi);
            let mut alloc = allocate_by_side(market, s, nu, Some(splitter.id));
            let d = side_demands(market, s, nu, Some(splitter.id));
            let fill1 = q1 - d[0];
            let fill2 = q2 - d[1];
            let floor = -tol * q1.min(q2);
            if fill1 < floor || fill2 < floor {
                return Err(Error::Invariant(format!(
                    "split fill went negative: ({fill1}, {fill2})"
                )));
            }
            alloc.set(splitter.id, [fill1.max(0.0), fill2.max(0.0)]);
            (nu, s, alloc)
        }
        None => {
            let nu = 0.5 * (nu_lo + nu_hi);
            let s = clear_total_scale(market, nu, max_iters);
            (nu, s, allocate_by_side(market, s, nu, None))
        }
    };

    let (p1, p2) = (scale, scale * nu);
    let report = check_kkt(market, &alloc, p1, p2, tol);
    if !report.passes {
        return Err(Error::Convergence {
            what: "welfare-optimum dual solver",
            residual: report
                .max_stationarity_residual
                .max(report.max_complementarity_residual)
                .max(report.clearing_residual[0])
                .max(report.clearing_residual[1]),
            tol,
        });
    }
    Ok((alloc, p1, p2))
}

fn allocate_by_side(market: &Market, s: f64, nu: f64, skip: Option<usize>) -> Allocation {
    let mut alloc = Allocation::new();
    for user in market.users() {
        if Some(user.id) == skip {
            continue;
        }
        let g1 = user.g(Side::Provider1);
        let g2 = user.g(Side::Provider2);
        if g1 <= nu * g2 {
            alloc.set(user.id, [best_rate(user.a, s * g1) * g1, 0.0]);
        } else {
            alloc.set(user.id, [0.0, best_rate(user.a, s * nu * g2) * g2]);
        }
    }
    alloc
}

/// Stability of an assignment at the per-side optimal prices: users on
/// side 1 need `p1*g1 <= p2*g2`, users on side 2 the strict reverse.
/// Zero prices (empty side) are handled by direct comparison.
fn assignment_is_stable(users: &[User], with_provider1: &[bool], p1: f64, p2: f64) -> bool {
    users.iter().zip(with_provider1).all(|(user, &on_side1)| {
        let cost1 = p1 * user.g(Side::Provider1);
        let cost2 = p2 * user.g(Side::Provider2);
        if on_side1 {
            cost1 <= cost2
        } else {
            cost2 < cost1
        }
    })
}

/// Brute-force search for a stable single-provider outcome.
///
/// Tests every contiguous cut of the `alpha`-sorted user line; for markets
/// of at most [`FULL_PARTITION_SCAN_CAP`] users it additionally enumerates
/// all `2^I` assignments to confirm that no stable assignment other than a
/// contiguous cut exists. Returns the stable outcome or `None`, and
/// refuses markets larger than [`EXHAUSTIVE_ORACLE_CAP`].
pub fn exhaustive_stability_oracle(market: &Market) -> Result<Option<Equilibrium>> {
    let users = market.users();
    let count = users.len();
    if count > EXHAUSTIVE_ORACLE_CAP {
        return Err(Error::OracleCap {
            size: count,
            cap: EXHAUSTIVE_ORACLE_CAP,
        });
    }
    let (q1, q2) = (
        market.supply(Side::Provider1),
        market.supply(Side::Provider2),
    );

    let mut stable_cuts = Vec::new();
    for split in 0..=count {
        let p1 = optimal_price(&users[..split], Side::Provider1, q1).price;
        let p2 = optimal_price(&users[split..], Side::Provider2, q2).price;
        let assignment: Vec<bool> = (0..count).map(|pos| pos < split).collect();
        if assignment_is_stable(users, &assignment, p1, p2) {
            stable_cuts.push(split);
        }
    }

    if count <= FULL_PARTITION_SCAN_CAP {
        for mask in 0u32..(1u32 << count) {
            let assignment: Vec<bool> = (0..count).map(|pos| mask >> pos & 1 == 1).collect();
            let side1: Vec<User> = users
                .iter()
                .zip(&assignment)
                .filter(|&(_, &s)| s)
                .map(|(u, _)| *u)
                .collect();
            let side2: Vec<User> = users
                .iter()
                .zip(&assignment)
                .filter(|&(_, &s)| !s)
                .map(|(u, _)| *u)
                .collect();
            let p1 = optimal_price(&side1, Side::Provider1, q1).price;
            let p2 = optimal_price(&side2, Side::Provider2, q2).price;
            if assignment_is_stable(users, &assignment, p1, p2) {
                let contiguous = assignment.windows(2).all(|w| w[0] || !w[1]);
                if !contiguous {
                    return Err(Error::Invariant(format!(
                        "stable non-contiguous assignment found: {assignment:?}"
                    )));
                }
                let split = assignment.iter().filter(|&&s| s).count();
                if !stable_cuts.contains(&split) {
                    return Err(Error::Invariant(format!(
                        "full scan found cut {split} missed by the cut scan"
                    )));
                }
            }
        }
    }

    match stable_cuts.as_slice() {
        [] => Ok(None),
        [split] => Ok(Some(integer_equilibrium_at(market, *split))),
        many => Err(Error::Invariant(format!("multiple stable cuts {many:?}"))),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::equilibrium::{solve_nash, EquilibriumKind};

    fn user(id: usize, a: f64, g1: f64, g2: f64) -> User {
        User::new(id, a, g1, g2).unwrap()
    }

    fn symmetric_market() -> Market {
        Market::new(
            vec![user(1, 1.0, 1.0, 2.0), user(2, 1.0, 2.0, 1.0)],
            1.0,
            1.0,
        )
        .unwrap()
    }

    #[test]
    fn total_utility_formula() {
        let market = Market::new(vec![user(1, 1.0, 1.0, 1.0)], 1.0, 1.0).unwrap();
        let mut alloc = Allocation::new();
        alloc.set(1, [1.0, 0.0]);
        assert!((total_utility(&market, &alloc) - 2.0_f64.ln()).abs() < 1e-15);
        alloc.set(1, [0.0, 0.0]);
        assert_eq!(total_utility(&market, &alloc), 0.0);

        let market = Market::new(vec![user(1, 2.0, 1.0, 2.0)], 1.0, 1.0).unwrap();
        let mut alloc = Allocation::new();
        alloc.set(1, [1.0, 1.0]);
        assert!((total_utility(&market, &alloc) - 2.0 * 2.5_f64.ln()).abs() < 1e-15);
    }

    #[test]
    fn kkt_passes_at_equilibrium() {
        let market = symmetric_market();
        let eq = solve_nash(&market).unwrap();
        let report = check_kkt(&market, &eq.allocations, eq.p1, eq.p2, 1e-8);
        assert!(report.passes, "report: {report:?}");
    }

    #[test]
    fn kkt_detects_perturbed_price() {
        let market = symmetric_market();
        let eq = solve_nash(&market).unwrap();
        let report = check_kkt(&market, &eq.allocations, 2.0 * eq.p1, eq.p2, 1e-8);
        assert!(!report.passes);
        assert!(report.max_complementarity_residual > 1e-8);
    }

    #[test]
    fn kkt_detects_unsold_supply() {
        let market = symmetric_market();
        let eq = solve_nash(&market).unwrap();
        let mut alloc = eq.allocations.clone();
        let q = alloc.get(1);
        alloc.set(1, [q[0] * 0.5, q[1]]);
        let report = check_kkt(&market, &alloc, eq.p1, eq.p2, 1e-8);
        assert!(!report.passes);
        assert!(report.clearing_residual[0] > 1e-8);
    }

    #[test]
    fn system_single_splitter_consumes_everything() {
        // one user with positive demand buys the whole supply of both
        // providers, the first of the two special multiplier cases
        let market = Market::new(vec![user(1, 1.0, 1.0, 1.0)], 1.0, 1.0).unwrap();
        let (alloc, p1, p2) = solve_system(&market, 1e-9, 200).unwrap();
        let q = alloc.get(1);
        assert!((q[0] - 1.0).abs() < 1e-7, "q = {q:?}");
        assert!((q[1] - 1.0).abs() < 1e-7);
        assert!((p1 - 1.0 / 3.0).abs() < 1e-9);
        assert!((p2 - 1.0 / 3.0).abs() < 1e-9);
    }

    #[test]
    fn system_two_users_one_takes_a_whole_supply() {
        // two users with positive demand where the split user buys all of
        // provider 2, the second special multiplier case
        let users = vec![user(1, 2.0, 0.5, 5.0), user(2, 1.0, 1.0, 1.0)];
        let market = Market::new(users, 3.0, 0.1).unwrap();
        let eq = crate::equilibrium::solve_nash(&market).unwrap();
        let split = eq.undecided.expect("instance is fractional");
        assert_eq!(split.user, 2);
        let q2 = eq.allocations.get(2);
        assert!(
            (q2[1] - 0.1).abs() <= 1e-8 * 0.1,
            "split user holds {q2:?} of provider 2's 0.1"
        );
        assert!(q2[0] > 0.0);

        let (alloc, p1, p2) = solve_system(&market, 1e-9, 200).unwrap();
        for id in [1, 2] {
            let ours = eq.allocations.get(id);
            let theirs = alloc.get(id);
            assert!(
                (ours[0] - theirs[0]).abs() <= 1e-6,
                "user {id}: {ours:?} vs {theirs:?}"
            );
            assert!(
                (ours[1] - theirs[1]).abs() <= 1e-6,
                "user {id}: {ours:?} vs {theirs:?}"
            );
        }
        assert!(check_kkt(&market, &alloc, p1, p2, 1e-7).passes);
    }

    #[test]
    fn system_matches_integer_equilibrium() {
        let market = symmetric_market();
        let (alloc, p1, p2) = solve_system(&market, 1e-9, 200).unwrap();
        assert!((alloc.get(1)[0] - 1.0).abs() < 1e-7);
        assert!((alloc.get(2)[1] - 1.0).abs() < 1e-7);
        assert!((p1 - 0.5).abs() < 1e-9);
        assert!((p2 - 0.5).abs() < 1e-9);
    }

    #[test]
    fn system_monopoly_embedding() {
        // With huge offsets toward provider 2, provider 1 behaves like a
        // monopoly over the full population. The offsets stay below ~1e6 so
        // that quantities (differences of a/p-scale terms) remain
        // representable to the solver tolerance.
        let users = vec![
            user(1, 1.0, 1.0, 1e5),
            user(2, 2.0, 0.7, 3e5),
            user(3, 0.5, 1.3, 2e5),
        ];
        let market = Market::new(users.clone(), 1.0, 1.0).unwrap();
        let (_, p1, _) = solve_system(&market, 1e-9, 200).unwrap();
        let mono = optimal_price(&users, Side::Provider1, 1.0).price;
        assert!(
            ((p1 - mono) / mono).abs() < 1e-6,
            "system p1 = {p1}, monopoly price = {mono}"
        );
    }

    #[test]
    fn oracle_agrees_with_fixed_point_search() {
        let market = symmetric_market();
        let from_oracle = exhaustive_stability_oracle(&market).unwrap().unwrap();
        assert_eq!(from_oracle.kind, EquilibriumKind::Integer);
        assert!((from_oracle.p1 - 0.5).abs() < 1e-15);
        assert!((from_oracle.p2 - 0.5).abs() < 1e-15);
    }

    #[test]
    fn oracle_absent_for_single_user() {
        let market = Market::new(vec![user(1, 1.0, 1.0, 1.0)], 1.0, 1.0).unwrap();
        assert!(exhaustive_stability_oracle(&market).unwrap().is_none());
    }

    #[test]
    fn oracle_refuses_oversized_markets() {
        let users: Vec<User> = (1..=21)
            .map(|i| user(i, 1.0, 1.0 + i as f64 * 0.1, 1.0))
            .collect();
        let market = Market::new(users, 1.0, 1.0).unwrap();
        assert!(matches!(
            exhaustive_stability_oracle(&market),
            Err(Error::OracleCap { size: 21, cap: 20 })
        ));
    }
}
