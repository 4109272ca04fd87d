//! Planar deployment scenarios: two base stations on a rectangle, users
//! whose channel offsets follow a distance power law `g = d^beta`.
//!
//! Scenarios compile down to a [`Market`]; sweeps and preference-region
//! grids reproduce the classic studies of how supply, prices, user density
//! and the path-loss exponent shape the equilibrium.
//!
//! All randomness comes from a seeded ChaCha8 stream cipher with one
//! substream per user index (stream `2i` for the position, `2i + 1` for
//! the willingness to pay), so draws are portable across platforms and
//! adding users never reshuffles existing ones.

use rand_chacha::rand_core::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::equilibrium::{solve_nash, EquilibriumKind};
use crate::error::{Error, Result};
use crate::market::{demand, optimal_price, Market, Side, User};

/// Minimum user-to-base-station distance; anything closer is rejected.
pub const MIN_BS_DISTANCE: f64 = 1e-9;
/// Magnitude of the deterministic nudge applied to break exact `alpha` ties.
const TIE_PERTURBATION: f64 = 1e-9;
const TIE_ATTEMPTS: usize = 8;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Point {
    pub x: f64,
    pub y: f64,
}

impl Point {
    pub fn new(x: f64, y: f64) -> Point {
        Point { x, y }
    }

    pub fn distance(&self, other: &Point) -> f64 {
        (self.x - other.x).hypot(self.y - other.y)
    }
}

/// A two-base-station deployment on a `width x height` rectangle.
#[derive(Debug, Clone, PartialEq)]
pub struct PlanarScenario {
    pub area: (f64, f64),
    pub bs_positions: [Point; 2],
    pub user_positions: Vec<Point>,
    /// Per-user willingness to pay; drawn from `a_range` when absent.
    pub explicit_a: Option<Vec<f64>>,
    pub a_range: (f64, f64),
    /// Path-loss exponent in `g = d^beta`.
    pub beta: f64,
    pub q1: f64,
    pub q2: f64,
    pub seed: u64,
}

/// Deterministic per-index substream of the scenario seed.
fn substream(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Uniform draw in `[0, 1)` from the top 53 bits of the next word.
fn unit_f64(rng: &mut ChaCha8Rng) -> f64 {
    (rng.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
}

impl PlanarScenario {
    /// Scenario with `count` users placed uniformly at random in the area.
    #[allow(clippy::too_many_arguments)]
    pub fn uniform_random(
        area: (f64, f64),
        bs_positions: [Point; 2],
        count: usize,
        a_range: (f64, f64),
        beta: f64,
        q1: f64,
        q2: f64,
        seed: u64,
    ) -> PlanarScenario {
        let user_positions = (0..count)
            .map(|i| {
                let mut rng = substream(seed, 2 * i as u64);
                Point::new(area.0 * unit_f64(&mut rng), area.1 * unit_f64(&mut rng))
            })
            .collect();
        PlanarScenario {
            area,
            bs_positions,
            user_positions,
            explicit_a: None,
            a_range,
            beta,
            q1,
            q2,
            seed,
        }
    }

    /// The bundled reference deployment: 30 users uniform on a 10 x 20
    /// area, base stations at (2.5, 10) and (7.5, 10), willingness to pay
    /// uniform in [0.5, 1.5], path-loss exponent 3, supplies of 100 per
    /// provider (ample enough that the providers actually compete at low
    /// path-loss exponents), seed 42.
    pub fn reference() -> PlanarScenario {
        PlanarScenario::uniform_random(
            (10.0, 20.0),
            [Point::new(2.5, 10.0), Point::new(7.5, 10.0)],
            30,
            (0.5, 1.5),
            3.0,
            100.0,
            100.0,
            42,
        )
    }

    /// Reference-style deployment with most users crowded on provider 2's
    /// side: 5 users on the left half, 25 on the right, all with equal
    /// willingness to pay and equal supplies.
    pub fn asymmetric_density() -> PlanarScenario {
        let seed = 42;
        let (w, h) = (10.0, 20.0);
        let user_positions = (0..30usize)
            .map(|i| {
                let mut rng = substream(seed, 2 * i as u64);
                let (u, v) = (unit_f64(&mut rng), unit_f64(&mut rng));
                if i < 5 {
                    Point::new(0.5 * w * u, h * v)
                } else {
                    Point::new(0.5 * w + 0.5 * w * u, h * v)
                }
            })
            .collect();
        PlanarScenario {
            area: (w, h),
            bs_positions: [Point::new(2.5, 10.0), Point::new(7.5, 10.0)],
            user_positions,
            explicit_a: None,
            a_range: (1.0, 1.0),
            beta: 3.0,
            q1: 100.0,
            q2: 100.0,
            seed,
        }
    }

    pub fn with_beta(mut self, beta: f64) -> PlanarScenario {
        self.beta = beta;
        self
    }

    pub fn with_q1(mut self, q1: f64) -> PlanarScenario {
        self.q1 = q1;
        self
    }

    pub fn with_seed(mut self, seed: u64) -> PlanarScenario {
        self.seed = seed;
        self
    }

    pub fn validate(&self) -> Result<()> {
        let (w, h) = self.area;
        if !(w > 0.0 && h > 0.0 && w.is_finite() && h.is_finite()) {
            return Err(Error::Scenario(format!(
                "area must be positive (got {w} x {h})"
            )));
        }
        if !(self.beta >= 0.0 && self.beta.is_finite()) {
            return Err(Error::Scenario(format!(
                "path-loss exponent must be nonnegative (got {})",
                self.beta
            )));
        }
        let (lo, hi) = self.a_range;
        if !(lo > 0.0 && hi >= lo && hi.is_finite()) {
            return Err(Error::Scenario(format!(
                "a_range must satisfy 0 < low <= high (got [{lo}, {hi}])"
            )));
        }
        if !(self.q1 > 0.0 && self.q2 > 0.0) {
            return Err(Error::Scenario(format!(
                "supplies must be positive (got Q1 = {}, Q2 = {})",
                self.q1, self.q2
            )));
        }
        if self.user_positions.is_empty() {
            return Err(Error::Scenario("scenario has no users".into()));
        }
        if let Some(a) = &self.explicit_a {
            if a.len() != self.user_positions.len() {
                return Err(Error::Scenario(format!(
                    "{} willingness-to-pay values for {} users",
                    a.len(),
                    self.user_positions.len()
                )));
            }
            if let Some(bad) = a.iter().find(|&&v| !(v > 0.0 && v.is_finite())) {
                return Err(Error::Scenario(format!(
                    "willingness to pay must be positive (got {bad})"
                )));
            }
        }
        for (i, p) in self.user_positions.iter().enumerate() {
            if !(p.x >= 0.0 && p.x <= w && p.y >= 0.0 && p.y <= h) {
                return Err(Error::Scenario(format!(
                    "user {} at ({}, {}) lies outside the {w} x {h} area",
                    i + 1,
                    p.x,
                    p.y
                )));
            }
            for bs in &self.bs_positions {
                if p.distance(bs) <= MIN_BS_DISTANCE {
                    return Err(Error::Scenario(format!(
                        "user {} coincides with the base station at ({}, {})",
                        i + 1,
                        bs.x,
                        bs.y
                    )));
                }
            }
        }
        for bs in &self.bs_positions {
            if !(bs.x >= 0.0 && bs.x <= w && bs.y >= 0.0 && bs.y <= h) {
                return Err(Error::Scenario(format!(
                    "base station at ({}, {}) lies outside the area",
                    bs.x, bs.y
                )));
            }
        }
        Ok(())
    }

    /// Channel offsets of a point toward both base stations: `g = d^beta`.
    pub fn offsets_at(&self, point: &Point) -> [f64; 2] {
        [
            point.distance(&self.bs_positions[0]).powf(self.beta),
            point.distance(&self.bs_positions[1]).powf(self.beta),
        ]
    }

    /// Compile the deployment into a market: distances become channel
    /// offsets, willingness to pay is taken from `explicit_a` or drawn
    /// from the per-user substreams. Exact `alpha` ties are re-perturbed
    /// within [`TIE_PERTURBATION`] a bounded number of times and rejected
    /// if they persist (as with `beta = 0`, where geometry cannot break
    /// them).
    pub fn compile(&self) -> Result<Market> {
        self.validate()?;
        let count = self.user_positions.len();
        let a_values: Vec<f64> = match &self.explicit_a {
            Some(a) => a.clone(),
            None => (0..count)
                .map(|i| {
                    let mut rng = substream(self.seed, 2 * i as u64 + 1);
                    self.a_range.0 + (self.a_range.1 - self.a_range.0) * unit_f64(&mut rng)
                })
                .collect(),
        };

        let mut positions = self.user_positions.clone();
        // Keep each user's position stream alive, past the two words used
        // for placement, so tie perturbations are deterministic
        // continuations of the original draw.
        let mut streams: Vec<ChaCha8Rng> = (0..count)
            .map(|i| {
                let mut rng = substream(self.seed, 2 * i as u64);
                let _ = (rng.next_u64(), rng.next_u64());
                rng
            })
            .collect();

        let mut last_tie = None;
        for attempt in 0..=TIE_ATTEMPTS {
            let offsets: Vec<[f64; 2]> = positions.iter().map(|p| self.offsets_at(p)).collect();
            let mut order: Vec<usize> = (0..count).collect();
            order.sort_by(|&i, &j| {
                (offsets[i][0] / offsets[i][1]).total_cmp(&(offsets[j][0] / offsets[j][1]))
            });
            let tied_pairs: Vec<(usize, usize)> = order
                .windows(2)
                .filter(|w| {
                    offsets[w[0]][0] / offsets[w[0]][1] == offsets[w[1]][0] / offsets[w[1]][1]
                })
                .map(|w| (w[0].min(w[1]), w[0].max(w[1])))
                .collect();
            if tied_pairs.is_empty() {
                let users = (0..count)
                    .map(|i| User::new(i + 1, a_values[i], offsets[i][0], offsets[i][1]))
                    .collect::<Result<Vec<User>>>()?;
                return Market::new(users, self.q1, self.q2);
            }
            last_tie = Some((
                tied_pairs[0].0 + 1,
                tied_pairs[0].1 + 1,
                offsets[tied_pairs[0].0][0] / offsets[tied_pairs[0].0][1],
            ));
            if attempt == TIE_ATTEMPTS {
                break;
            }
            for &(_, i) in &tied_pairs {
                let rng = &mut streams[i];
                let dx = TIE_PERTURBATION * (2.0 * unit_f64(rng) - 1.0);
                let dy = TIE_PERTURBATION * (2.0 * unit_f64(rng) - 1.0);
                positions[i].x = (positions[i].x + dx).clamp(0.0, self.area.0);
                positions[i].y = (positions[i].y + dy).clamp(0.0, self.area.1);
                eprintln!(
                    "scenario: perturbed user {} within {TIE_PERTURBATION} to break an alpha tie",
                    i + 1
                );
            }
        }
        let (first, second, alpha) = last_tie.expect("loop exits only via ties");
        Err(Error::AlphaTie {
            first,
            second,
            alpha,
        })
    }
}

/// Cell classification of a preference-region grid.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RegionLabel {
    /// Zero demand toward both providers (merged three-region mode).
    NoDemand = 0,
    Provider1 = 1,
    Provider2 = 2,
    /// Prefers provider 1 but buys nothing.
    NoDemand1 = 3,
    /// Prefers provider 2 but buys nothing.
    NoDemand2 = 4,
}

impl RegionLabel {
    pub fn as_int(self) -> u8 {
        self as u8
    }
}

/// A rasterized map of provider preference over the deployment area.
#[derive(Debug, Clone, PartialEq)]
pub struct RegionGrid {
    pub nx: usize,
    pub ny: usize,
    /// Row-major labels, row `iy = 0` along `y = 0`.
    pub cells: Vec<RegionLabel>,
    pub p1: f64,
    pub p2: f64,
    pub probe_a: f64,
}

impl RegionGrid {
    pub fn label(&self, ix: usize, iy: usize) -> RegionLabel {
        self.cells[iy * self.nx + ix]
    }

    /// Integer labels as row-major CSV, one grid row per line.
    pub fn to_csv(&self) -> String {
        let mut out = String::new();
        for iy in 0..self.ny {
            let row: Vec<String> = (0..self.nx)
                .map(|ix| self.label(ix, iy).as_int().to_string())
                .collect();
            out.push_str(&row.join(","));
            out.push('\n');
        }
        out
    }
}

/// Label a single point: the provider a probe user with willingness to
/// pay `a` placed there would join at prices `(p1, p2)`, and whether it
/// would buy anything.
pub fn classify_point(
    scenario: &PlanarScenario,
    point: &Point,
    p1: f64,
    p2: f64,
    a: f64,
    three_region: bool,
) -> RegionLabel {
    let g = scenario.offsets_at(point);
    let (side, gp, pp) = if p1 * g[0] <= p2 * g[1] {
        (Side::Provider1, g[0], p1)
    } else {
        (Side::Provider2, g[1], p2)
    };
    if demand(a, gp, pp) > 0.0 {
        match side {
            Side::Provider1 => RegionLabel::Provider1,
            Side::Provider2 => RegionLabel::Provider2,
        }
    } else if three_region {
        RegionLabel::NoDemand
    } else {
        match side {
            Side::Provider1 => RegionLabel::NoDemand1,
            Side::Provider2 => RegionLabel::NoDemand2,
        }
    }
}

/// Classify every grid cell by the provider a probe user at the cell
/// center would join at prices `(p1, p2)`, and whether it buys anything.
/// With `three_region` set, the two zero-demand labels merge into
/// [`RegionLabel::NoDemand`].
pub fn region_grid(
    scenario: &PlanarScenario,
    p1: f64,
    p2: f64,
    probe_a: f64,
    resolution: (usize, usize),
    three_region: bool,
) -> Result<RegionGrid> {
    if !(p1 > 0.0 && p2 > 0.0) {
        return Err(Error::Input(format!(
            "prices must be positive (got {p1}, {p2})"
        )));
    }
    if !(probe_a > 0.0 && probe_a.is_finite()) {
        return Err(Error::Input(format!(
            "probe_a must be positive (got {probe_a})"
        )));
    }
    let (nx, ny) = resolution;
    if nx == 0 || ny == 0 {
        return Err(Error::Input(format!(
            "grid resolution must be positive (got {nx}x{ny})"
        )));
    }
    let (w, h) = scenario.area;
    let mut cells = Vec::with_capacity(nx * ny);
    for iy in 0..ny {
        for ix in 0..nx {
            let center = Point::new(
                (ix as f64 + 0.5) * w / nx as f64,
                (iy as f64 + 0.5) * h / ny as f64,
            );
            cells.push(classify_point(
                scenario,
                &center,
                p1,
                p2,
                probe_a,
                three_region,
            ));
        }
    }
    Ok(RegionGrid {
        nx,
        ny,
        cells,
        p1,
        p2,
        probe_a,
    })
}

/// One row of a path-loss sweep.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow {
    pub beta: f64,
    pub p1_duo: Option<f64>,
    pub p2_duo: Option<f64>,
    pub p1_mono: Option<f64>,
    pub p2_mono: Option<f64>,
    pub kind: Option<EquilibriumKind>,
    pub error: Option<String>,
}

/// Re-run the same seeded deployment across path-loss exponents,
/// recording duopoly equilibrium prices next to the prices each provider
/// would post as a monopolist over the full population. Per-row failures
/// are recorded in the row; the sweep continues.
pub fn sweep_beta(template: &PlanarScenario, betas: &[f64]) -> Result<Vec<SweepRow>> {
    if betas.is_empty() {
        return Err(Error::Input("sweep requires at least one beta".into()));
    }
    let mut rows = Vec::with_capacity(betas.len());
    for &beta in betas {
        let scenario = template.clone().with_beta(beta);
        let row = match scenario.compile() {
            Err(e) => SweepRow {
                beta,
                p1_duo: None,
                p2_duo: None,
                p1_mono: None,
                p2_mono: None,
                kind: None,
                error: Some(e.to_string()),
            },
            Ok(market) => {
                let mono1 = optimal_price(
                    market.users(),
                    Side::Provider1,
                    market.supply(Side::Provider1),
                )
                .price;
                let mono2 = optimal_price(
                    market.users(),
                    Side::Provider2,
                    market.supply(Side::Provider2),
                )
                .price;
                match solve_nash(&market) {
                    Ok(eq) => SweepRow {
                        beta,
                        p1_duo: Some(eq.p1),
                        p2_duo: Some(eq.p2),
                        p1_mono: Some(mono1),
                        p2_mono: Some(mono2),
                        kind: Some(eq.kind),
                        error: None,
                    },
                    Err(e) => SweepRow {
                        beta,
                        p1_duo: None,
                        p2_duo: None,
                        p1_mono: Some(mono1),
                        p2_mono: Some(mono2),
                        kind: None,
                        error: Some(e.to_string()),
                    },
                }
            }
        };
        rows.push(row);
    }
    Ok(rows)
}
