//! Central table of numeric tolerances.
//!
//! Every equality that the solvers promise (market clearing, price
//! indifference, KKT residuals) is checked against one of the named values
//! below. The CLI `--tol NAME=VALUE` flag overrides the named entries of
//! [`Tolerances`]; the module constants are fixed.

/// Guard band for dropping a user inside the clearing-price removal loop.
///
/// A user is removed only when `a/p - g < -DEMAND_SIGN_GUARD`, so that
/// floating-point noise around zero demand cannot make the loop oscillate.
pub const DEMAND_SIGN_GUARD: f64 = 1e-12;

/// Hard cap on bisection steps before a solver reports failure to converge.
pub const MAX_BISECTION_STEPS: usize = 10_000;

/// Named, overridable tolerances used by the solvers and report checks.
#[derive(Debug, Clone)]
pub struct Tolerances {
    /// Interval width for the undecided-user split bisection on `eps`.
    /// The bisection keeps halving past this width until the floating-point
    /// interval is exhausted, so results are at least this accurate.
    pub epsilon_root: f64,
    /// Relative tolerance on the price-indifference identity
    /// `p1 * g1 = p2 * g2` of a split user.
    pub indifference_rel: f64,
    /// Relative tolerance on supply = demand per provider.
    pub clearing_rel: f64,
    /// Residual tolerance for the optimality-condition report.
    pub kkt: f64,
    /// Interval width for the independent clearing-price bisection oracle.
    pub oracle_bisection: f64,
    /// Target tolerance for the welfare-optimum dual solver.
    pub system: f64,
    /// Iteration cap per bisection inside the welfare-optimum solver.
    pub system_max_iters: usize,
}

impl Default for Tolerances {
    fn default() -> Self {
        Self {
            epsilon_root: 1e-12,
            indifference_rel: 1e-9,
            clearing_rel: 1e-8,
            kkt: 1e-7,
            oracle_bisection: 1e-12,
            system: 1e-9,
            system_max_iters: 200,
        }
    }
}

impl Tolerances {
    /// Set a tolerance by name, as used by the CLI `--tol NAME=VALUE` flag.
    pub fn set(&mut self, name: &str, value: f64) -> crate::Result<()> {
        if !(value.is_finite() && value > 0.0) {
            return Err(crate::Error::Input(format!(
                "tolerance {name} must be a positive finite number (got {value})"
            )));
        }
        match name {
            "epsilon_root" => self.epsilon_root = value,
            "indifference_rel" => self.indifference_rel = value,
            "clearing_rel" => self.clearing_rel = value,
            "kkt" => self.kkt = value,
            "oracle_bisection" => self.oracle_bisection = value,
            "system" => self.system = value,
            "system_max_iters" => self.system_max_iters = value as usize,
            other => return Err(crate::Error::UnknownTolerance(other.to_string())),
        }
        Ok(())
    }
}
