//! Price competition between two providers selling a divisible resource
//! to heterogeneous users.
//!
//! Users value effective rate logarithmically, scaled by a willingness to
//! pay `a` and translated through per-provider channel quality offsets
//! `g1`, `g2`; providers post unit prices for fixed supplies `Q1`, `Q2`.
//! The crate computes:
//!
//! - the revenue-maximizing clearing price of a single provider
//!   ([`market::optimal_price`]);
//! - the unique duopoly equilibrium, integer or fractional
//!   ([`equilibrium::solve_nash`]);
//! - the welfare optimum and its optimality conditions, which the
//!   equilibrium provably attains ([`welfare::solve_system`],
//!   [`welfare::check_kkt`]);
//! - planar deployments with distance-power-law channels, price sweeps and
//!   preference-region grids ([`scenario`]).
//!
//! ```
//! use duopoly::market::{Market, User};
//! use duopoly::equilibrium::{solve_nash, EquilibriumKind};
//!
//! let users = vec![
//!     User::new(1, 1.0, 1.0, 2.0).unwrap(),
//!     User::new(2, 1.0, 2.0, 1.0).unwrap(),
//! ];
//! let market = Market::new(users, 1.0, 1.0).unwrap();
//! let eq = solve_nash(&market).unwrap();
//! assert_eq!(eq.kind, EquilibriumKind::Integer);
//! assert!((eq.p1 - 0.5).abs() < 1e-12);
//! assert!((eq.p2 - 0.5).abs() < 1e-12);
//! ```
//!
//! The `duopoly` binary exposes the same functionality as `solve`,
//! `sweep`, `regions` and `verify` subcommands; `examples/` holds one
//! runnable walkthrough per capability.

pub mod cli;
pub mod equilibrium;
pub mod error;
pub mod io;
pub mod market;
pub mod scenario;
pub mod tolerances;
pub mod welfare;

pub use error::{Error, Result};
pub use tolerances::Tolerances;
