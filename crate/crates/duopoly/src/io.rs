//! File formats: scenario input JSON (schema version 1), equilibrium
//! output JSON, and CSV renderings of sweeps and region grids.
//!
//! Scenario files come in two shapes, distinguished by their fields:
//! a *planar* deployment (`area`, `bs_positions`, `beta`, ...) that is
//! compiled through the geometry, or a *direct* market (`users` with
//! `a`/`g1`/`g2`) that bypasses it. Unknown fields are rejected. All
//! numbers in outputs are rounded to 12 significant digits, which is the
//! comparison precision for regression snapshots.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::equilibrium::{Equilibrium, EquilibriumKind, Undecided};
use crate::error::{Error, Result};
use crate::market::{Market, User};
use crate::scenario::{PlanarScenario, Point, SweepRow};
use crate::welfare::{Allocation, KktReport};

/// The scenario/equilibrium file schema implemented by this crate.
pub const SCHEMA_VERSION: u32 = 1;

/// Round to 12 significant digits (the serialization precision).
pub fn round_sig(x: f64) -> f64 {
    if !x.is_finite() {
        return x;
    }
    format!("{x:.11e}")
        .parse()
        .expect("round-trip of finite float")
}

/// Shortest decimal form of a value rounded to 12 significant digits.
pub fn fmt_sig(x: f64) -> String {
    format!("{}", round_sig(x))
}

// ---------------------------------------------------------------------------
// scenario input

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct PlanarFile {
    #[serde(rename = "schema")]
    _schema: u32,
    area: [f64; 2],
    bs_positions: [[f64; 2]; 2],
    #[serde(default)]
    user_positions: Option<Vec<[f64; 2]>>,
    #[serde(default)]
    users: Option<Vec<PlanarUserFile>>,
    #[serde(default)]
    a_range: Option<[f64; 2]>,
    beta: f64,
    #[serde(rename = "Q1")]
    q1: f64,
    #[serde(rename = "Q2")]
    q2: f64,
    #[serde(default)]
    seed: Option<u64>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct PlanarUserFile {
    x: f64,
    y: f64,
    a: f64,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct DirectFile {
    #[serde(rename = "schema")]
    _schema: u32,
    users: Vec<DirectUserFile>,
    #[serde(rename = "Q1")]
    q1: f64,
    #[serde(rename = "Q2")]
    q2: f64,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct DirectUserFile {
    a: f64,
    g1: f64,
    g2: f64,
}

/// A parsed scenario file: a planar deployment or a direct market.
#[derive(Debug, Clone)]
pub enum ScenarioInput {
    Planar(PlanarScenario),
    Direct(Market),
}

impl ScenarioInput {
    /// The market the input describes, compiling geometry if present.
    /// A seed override replaces the planar scenario's seed.
    pub fn to_market(&self, seed_override: Option<u64>) -> Result<Market> {
        match self {
            ScenarioInput::Planar(scenario) => {
                let mut scenario = scenario.clone();
                if let Some(seed) = seed_override {
                    scenario.seed = seed;
                }
                scenario.compile()
            }
            ScenarioInput::Direct(market) => Ok(market.clone()),
        }
    }
}

/// Parse a scenario file, dispatching on its fields.
pub fn parse_scenario(text: &str) -> Result<ScenarioInput> {
    let value: serde_json::Value = serde_json::from_str(text)?;
    let object = value
        .as_object()
        .ok_or_else(|| Error::Input("scenario file must be a JSON object".into()))?;
    let schema = object
        .get("schema")
        .and_then(serde_json::Value::as_u64)
        .ok_or_else(|| Error::Input("missing required field `schema`".into()))?;
    if schema != u64::from(SCHEMA_VERSION) {
        return Err(Error::Input(format!(
            "unsupported schema version {schema} (expected {SCHEMA_VERSION})"
        )));
    }

    if object.contains_key("bs_positions") || object.contains_key("area") {
        let file: PlanarFile = serde_json::from_value(value)?;
        planar_from_file(file).map(ScenarioInput::Planar)
    } else {
        let file: DirectFile = serde_json::from_value(value)?;
        let users = file
            .users
            .iter()
            .enumerate()
            .map(|(i, u)| User::new(i + 1, u.a, u.g1, u.g2))
            .collect::<Result<Vec<User>>>()?;
        Market::new(users, file.q1, file.q2).map(ScenarioInput::Direct)
    }
}

fn planar_from_file(file: PlanarFile) -> Result<PlanarScenario> {
    let (user_positions, explicit_a) = match (file.user_positions, file.users) {
        (Some(_), Some(_)) => {
            return Err(Error::Input(
                "give either `user_positions` or `users`, not both".into(),
            ))
        }
        (None, None) => {
            return Err(Error::Input(
                "scenario needs `user_positions` or `users`".into(),
            ))
        }
        (Some(positions), None) => {
            if file.a_range.is_none() {
                return Err(Error::Input(
                    "`user_positions` form requires `a_range` for the willingness-to-pay draw"
                        .into(),
                ));
            }
            (
                positions.iter().map(|p| Point::new(p[0], p[1])).collect(),
                None,
            )
        }
        (None, Some(users)) => (
            users
                .iter()
                .map(|u| Point::new(u.x, u.y))
                .collect::<Vec<Point>>(),
            Some(users.iter().map(|u| u.a).collect::<Vec<f64>>()),
        ),
    };
    let a_range = file.a_range.map_or((0.5, 1.5), |r| (r[0], r[1]));
    let scenario = PlanarScenario {
        area: (file.area[0], file.area[1]),
        bs_positions: [
            Point::new(file.bs_positions[0][0], file.bs_positions[0][1]),
            Point::new(file.bs_positions[1][0], file.bs_positions[1][1]),
        ],
        user_positions,
        explicit_a,
        a_range,
        beta: file.beta,
        q1: file.q1,
        q2: file.q2,
        seed: file.seed.unwrap_or(0),
    };
    scenario.validate()?;
    Ok(scenario)
}

// ---------------------------------------------------------------------------
// equilibrium output

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EquilibriumFile {
    pub schema: u32,
    pub kind: String,
    pub p1: f64,
    pub p2: f64,
    pub allocations: BTreeMap<String, [f64; 2]>,
    pub undecided: Option<UndecidedFile>,
    pub total_utility: f64,
    pub kkt: KktFile,
    pub market: MarketFile,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct UndecidedFile {
    pub user: usize,
    pub epsilon: f64,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct KktFile {
    pub p1: f64,
    pub p2: f64,
    pub max_stationarity_residual: f64,
    pub max_complementarity_residual: f64,
    pub clearing_residual: [f64; 2],
    pub feasible: bool,
    pub tol: f64,
    pub passes: bool,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MarketFile {
    pub users: Vec<MarketUserFile>,
    #[serde(rename = "Q1")]
    pub q1: f64,
    #[serde(rename = "Q2")]
    pub q2: f64,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MarketUserFile {
    pub id: usize,
    pub a: f64,
    pub g1: f64,
    pub g2: f64,
}

impl From<&KktReport> for KktFile {
    fn from(report: &KktReport) -> KktFile {
        KktFile {
            p1: round_sig(report.p1),
            p2: round_sig(report.p2),
            max_stationarity_residual: round_sig(report.max_stationarity_residual),
            max_complementarity_residual: round_sig(report.max_complementarity_residual),
            clearing_residual: report.clearing_residual.map(round_sig),
            feasible: report.feasible,
            tol: report.tol,
            passes: report.passes,
        }
    }
}

/// Bundle an equilibrium, its optimality report and the market it solves
/// into the output document.
pub fn equilibrium_file(
    market: &Market,
    eq: &Equilibrium,
    total_utility: f64,
    report: &KktReport,
) -> EquilibriumFile {
    EquilibriumFile {
        schema: SCHEMA_VERSION,
        kind: match eq.kind {
            EquilibriumKind::Integer => "integer".into(),
            EquilibriumKind::Fractional => "fractional".into(),
        },
        p1: round_sig(eq.p1),
        p2: round_sig(eq.p2),
        allocations: eq
            .allocations
            .entries()
            .map(|(id, q)| (id.to_string(), q.map(round_sig)))
            .collect(),
        undecided: eq.undecided.map(|u| UndecidedFile {
            user: u.user,
            epsilon: round_sig(u.epsilon),
        }),
        total_utility: round_sig(total_utility),
        kkt: report.into(),
        market: MarketFile {
            users: market
                .users()
                .iter()
                .map(|u| MarketUserFile {
                    id: u.id,
                    a: u.a,
                    g1: u.g[0],
                    g2: u.g[1],
                })
                .collect(),
            q1: market.supply(crate::market::Side::Provider1),
            q2: market.supply(crate::market::Side::Provider2),
        },
    }
}

pub fn equilibrium_to_json(file: &EquilibriumFile) -> Result<String> {
    let mut out = serde_json::to_string_pretty(file)?;
    out.push('\n');
    Ok(out)
}

/// Re-ingest an equilibrium document: the embedded market, the recorded
/// allocation, prices and the recorded report.
pub fn parse_equilibrium(text: &str) -> Result<(Market, Equilibrium, KktFile)> {
    let file: EquilibriumFile = serde_json::from_str(text)?;
    if file.schema != SCHEMA_VERSION {
        return Err(Error::Input(format!(
            "unsupported schema version {} (expected {SCHEMA_VERSION})",
            file.schema
        )));
    }
    let users = file
        .market
        .users
        .iter()
        .map(|u| User::new(u.id, u.a, u.g1, u.g2))
        .collect::<Result<Vec<User>>>()?;
    let market = Market::new(users, file.market.q1, file.market.q2)?;
    let mut allocations = Allocation::new();
    for (key, q) in &file.allocations {
        let id: usize = key
            .parse()
            .map_err(|_| Error::Input(format!("allocation key {key:?} is not a user id")))?;
        allocations.set(id, *q);
    }
    let kind = match file.kind.as_str() {
        "integer" => EquilibriumKind::Integer,
        "fractional" => EquilibriumKind::Fractional,
        other => return Err(Error::Input(format!("unknown equilibrium kind {other:?}"))),
    };
    let eq = Equilibrium {
        kind,
        p1: file.p1,
        p2: file.p2,
        allocations,
        undecided: file.undecided.as_ref().map(|u| Undecided {
            user: u.user,
            epsilon: u.epsilon,
        }),
    };
    Ok((market, eq, file.kkt))
}

/// True when the text looks like an equilibrium document rather than a
/// scenario (used by `verify` to pick replay mode).
pub fn is_equilibrium_document(text: &str) -> bool {
    serde_json::from_str::<serde_json::Value>(text)
        .ok()
        .and_then(|v| {
            v.as_object()
                .map(|o| o.contains_key("kind") && o.contains_key("allocations"))
        })
        .unwrap_or(false)
}

// ---------------------------------------------------------------------------
// CSV

fn csv_field(text: &str) -> String {
    if text.contains(',') || text.contains('"') || text.contains('\n') {
        format!("\"{}\"", text.replace('"', "\"\""))
    } else {
        text.to_string()
    }
}

/// Render sweep rows with the fixed header
/// `beta,p1_duo,p2_duo,p1_mono,p2_mono,kind,errors`.
pub fn sweep_to_csv(rows: &[SweepRow]) -> String {
    let mut out = String::from("beta,p1_duo,p2_duo,p1_mono,p2_mono,kind,errors\n");
    for row in rows {
        let opt = |v: Option<f64>| v.map(fmt_sig).unwrap_or_default();
        let kind = match row.kind {
            Some(EquilibriumKind::Integer) => "integer",
            Some(EquilibriumKind::Fractional) => "fractional",
            None => "",
        };
        out.push_str(&format!(
            "{},{},{},{},{},{},{}\n",
            fmt_sig(row.beta),
            opt(row.p1_duo),
            opt(row.p2_duo),
            opt(row.p1_mono),
            opt(row.p2_mono),
            kind,
            csv_field(row.error.as_deref().unwrap_or("")),
        ));
    }
    out
}
