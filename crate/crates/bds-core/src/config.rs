//! Solver configuration.

use num_bigint::BigInt;
use num_rational::BigRational;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Exact rational stored as numerator/denominator. Used for the contraction
/// factor, which mesh runs must apply in exact arithmetic.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Rational {
    pub num: u64,
    pub den: u64,
}

impl Rational {
    pub fn new(num: u64, den: u64) -> Self {
        Rational { num, den }
    }

    pub fn to_f64(self) -> f64 {
        self.num as f64 / self.den as f64
    }

    pub fn to_big(self) -> BigRational {
        BigRational::new(BigInt::from(self.num), BigInt::from(self.den))
    }

    /// Parses "num/den" or a plain integer-free decimal like "0.5" when that
    /// decimal is exactly a small rational.
    pub fn parse(s: &str) -> Result<Self> {
        let bad = || Error::InvalidConfig(format!("cannot parse rational from {s:?}")) ;
        if let Some((a, b)) = s.split_once('/') {
            let num: u64 = a.trim().parse().map_err(|_| bad())?;
            let den: u64 = b.trim().parse().map_err(|_| bad())?;
            if den == 0 {
                return Err(bad());
            }
            Ok(Rational { num, den })
        } else {
            let v: f64 = s.trim().parse().map_err(|_| bad())?;
            // accept decimals that are exactly representable with a small
            // power-of-ten denominator
            for den in [1u64, 2, 4, 5, 8, 10, 16, 20, 100, 1000] {
                let num = v * den as f64;
                if num >= 0.0 && num.fract() == 0.0 && num <= u64::MAX as f64 {
                    return Ok(Rational { num: num as u64, den });
                }
            }
            Err(bad())
        }
    }
}

impl std::fmt::Display for Rational {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}/{}", self.num, self.den)
    }
}

/// How poll directions are generated.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DirectionMode {
    /// The 2n signed coordinate vectors, +e_1..+e_n then -e_1..-e_n.
    Coordinate,
    /// A fresh uniformly random antipodal unit pair each iteration.
    Random,
    /// A deterministic antipodal pair from a Halton-to-sphere sequence,
    /// dense in the unit sphere. For nonsmooth objectives.
    Dense,
    /// Integer frame directions on the current mesh.
    Mesh,
}

impl DirectionMode {
    pub fn as_str(self) -> &'static str {
        match self {
            DirectionMode::Coordinate => "coordinate",
            DirectionMode::Random => "random",
            DirectionMode::Dense => "dense",
            DirectionMode::Mesh => "mesh",
        }
    }
}

/// Which lower-level oracle a run uses.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OracleKind {
    /// Projected gradient descent stopped by the gradient-norm rule.
    Gd,
    /// Analytic solution plus a deterministic error of exactly eps_oracle.
    Injected,
    /// Analytic solution, no error. Requires eps_oracle = 0.
    Exact,
    /// Exact when eps_oracle = 0 and the problem allows it, gd otherwise.
    Auto,
}

/// All solver parameters. Directional and mesh runs share this struct; the
/// mesh-only fields are ignored by directional runs.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SolverConfig {
    /// Initial stepsize (directional) or initial mesh size (mesh).
    pub alpha0: f64,
    /// Stepsize lower bound; 0 disables the floor.
    pub alpha_min: f64,
    /// Contraction factor, exact rational in (0, 1).
    pub theta: Rational,
    /// Expansion factor for successful steps, >= 1.
    pub gamma: f64,
    /// Sufficient-decrease coefficient: a candidate must improve by more
    /// than c/2 * alpha^2.
    pub c: f64,
    /// Accuracy requested from the lower-level oracle.
    pub eps_oracle: f64,
    pub direction_mode: DirectionMode,
    pub seed: u64,
    /// Upper-level evaluation budget.
    pub budget: u64,
    /// Mesh only: alpha0 = alpha_min * theta^{-mu0} when alpha_min > 0.
    pub mu0: u32,
    /// Mesh only: smooth-objective parameter updates and floor termination.
    pub smooth_mesh: bool,
    pub oracle_kind: OracleKind,
    /// Hard cap on iterations, a safety net besides budget and floor.
    pub iter_cap: u64,
    /// Lower estimate of the lower-level optimal value, used by the gd
    /// oracle's worst-case iteration cap.
    pub g_lb: f64,
}

impl SolverConfig {
    /// Directional defaults: alpha0 = 1, alpha_min = 1e-6, theta = 1/2,
    /// gamma = 2, c = 1e-3, budget = 500.
    pub fn directional_defaults(mode: DirectionMode) -> Self {
        SolverConfig {
            alpha0: 1.0,
            alpha_min: 1e-6,
            theta: Rational::new(1, 2),
            gamma: 2.0,
            c: 1e-3,
            eps_oracle: 1e-6,
            direction_mode: mode,
            seed: 0,
            budget: 500,
            mu0: 0,
            smooth_mesh: false,
            oracle_kind: OracleKind::Auto,
            iter_cap: 100_000,
            g_lb: 0.0,
        }
    }

    /// Mesh defaults: same floor and contraction as the directional solvers,
    /// with mu0 = 20 so that alpha0 = 1e-6 * 2^20 ~ 1.049, the closest
    /// admissible value to 1 (the initial mesh size must be an exact
    /// theta-power multiple of alpha_min).
    pub fn mesh_defaults() -> Self {
        let alpha_min = 1e-6_f64;
        let mu0 = 20u32;
        SolverConfig {
            alpha0: alpha_min * f64::powi(2.0, mu0 as i32),
            alpha_min,
            theta: Rational::new(1, 2),
            gamma: 2.0,
            c: 1e-3,
            eps_oracle: 1e-6,
            direction_mode: DirectionMode::Mesh,
            seed: 0,
            budget: 500,
            mu0,
            smooth_mesh: true,
            oracle_kind: OracleKind::Auto,
            iter_cap: 100_000,
            g_lb: 0.0,
        }
    }

    fn validate_common(&self) -> Result<()> {
        let fail = |m: String| Err(Error::InvalidConfig(m));
        if !(self.alpha0.is_finite() && self.alpha0 > 0.0) {
            return fail(format!("alpha0 must be positive, got {}", self.alpha0));
        }
        if !(self.alpha_min.is_finite() && self.alpha_min >= 0.0) {
            return fail(format!("alpha_min must be nonnegative, got {}", self.alpha_min));
        }
        if self.alpha0 < self.alpha_min {
            return fail(format!(
                "alpha0 ({}) must be >= alpha_min ({})",
                self.alpha0, self.alpha_min
            ));
        }
        if self.theta.den == 0 || self.theta.num == 0 || self.theta.num >= self.theta.den {
            return fail(format!("theta must be a rational in (0,1), got {}", self.theta));
        }
        if !(self.gamma.is_finite() && self.gamma >= 1.0) {
            return fail(format!("gamma must be >= 1, got {}", self.gamma));
        }
        if !(self.c.is_finite() && self.c > 0.0) {
            return fail(format!("c must be positive, got {}", self.c));
        }
        if !(self.eps_oracle.is_finite() && self.eps_oracle >= 0.0) {
            return fail(format!("eps_oracle must be nonnegative, got {}", self.eps_oracle));
        }
        if self.budget == 0 {
            return fail("budget must be positive".into());
        }
        if self.iter_cap == 0 {
            return fail("iter_cap must be positive".into());
        }
        Ok(())
    }

    pub fn validate_directional(&self) -> Result<()> {
        self.validate_common()?;
        if self.direction_mode == DirectionMode::Mesh {
            return Err(Error::InvalidConfig(
                "directional run cannot use mesh direction mode".into(),
            ));
        }
        Ok(())
    }

    /// Mesh validation. When alpha_min > 0, alpha0 must equal
    /// alpha_min * theta^{-mu0} exactly as a rational. With alpha_min = 0 the
    /// floor is disabled and any positive alpha0 is admissible.
    pub fn validate_mesh(&self) -> Result<()> {
        self.validate_common()?;
        if self.alpha_min > 0.0 {
            let lhs = BigRational::from_float(self.alpha0)
                .ok_or_else(|| Error::InvalidConfig("alpha0 is not finite".into()))?;
            let amin = BigRational::from_float(self.alpha_min)
                .ok_or_else(|| Error::InvalidConfig("alpha_min is not finite".into()))?;
            let theta = self.theta.to_big();
            let mut rhs = amin;
            for _ in 0..self.mu0 {
                rhs /= theta.clone();
            }
            if lhs != rhs {
                return Err(Error::InvalidConfig(format!(
                    "mesh requires alpha0 = alpha_min * theta^-mu0 exactly; \
                     got alpha0 = {}, alpha_min = {}, theta = {}, mu0 = {}",
                    self.alpha0, self.alpha_min, self.theta, self.mu0
                )));
            }
        }
        Ok(())
    }

    pub fn theta_f64(&self) -> f64 {
        self.theta.to_f64()
    }

    /// Applies a string override to a named field. Unknown keys are
    /// rejected.
    pub fn set_field(&mut self, key: &str, value: &str) -> Result<()> {
        let parse_f64 = |v: &str| -> Result<f64> {
            v.parse()
                .map_err(|_| Error::InvalidConfig(format!("bad float {v:?} for {key}")))
        };
        let parse_u64 = |v: &str| -> Result<u64> {
            v.parse()
                .map_err(|_| Error::InvalidConfig(format!("bad integer {v:?} for {key}")))
        };
        match key {
            "alpha0" | "alpha_0" => self.alpha0 = parse_f64(value)?,
            "alpha_min" => self.alpha_min = parse_f64(value)?,
            "theta" => self.theta = Rational::parse(value)?,
            "gamma" => self.gamma = parse_f64(value)?,
            "c" => self.c = parse_f64(value)?,
            "eps_oracle" => self.eps_oracle = parse_f64(value)?,
            "seed" => self.seed = parse_u64(value)?,
            "budget" => self.budget = parse_u64(value)?,
            "mu0" | "mu_0" => {
                self.mu0 = parse_u64(value)? as u32;
                // keep the exactness constraint satisfied for mesh runs
                if self.alpha_min > 0.0 {
                    self.alpha0 =
                        self.alpha_min * (self.theta.den as f64 / self.theta.num as f64).powi(self.mu0 as i32);
                }
            }
            "smooth_mesh" | "smooth_mode" => {
                self.smooth_mesh = value
                    .parse()
                    .map_err(|_| Error::InvalidConfig(format!("bad bool {value:?} for {key}")))?
            }
            "oracle" | "oracle_kind" => {
                self.oracle_kind = match value {
                    "gd" => OracleKind::Gd,
                    "injected" => OracleKind::Injected,
                    "exact" => OracleKind::Exact,
                    "auto" => OracleKind::Auto,
                    _ => {
                        return Err(Error::InvalidConfig(format!(
                            "unknown oracle kind {value:?}"
                        )))
                    }
                }
            }
            "iter_cap" => self.iter_cap = parse_u64(value)?,
            "g_lb" => self.g_lb = parse_f64(value)?,
            "direction_mode" => {
                self.direction_mode = match value {
                    "coordinate" => DirectionMode::Coordinate,
                    "random" => DirectionMode::Random,
                    "dense" => DirectionMode::Dense,
                    "mesh" => DirectionMode::Mesh,
                    _ => {
                        return Err(Error::InvalidConfig(format!(
                            "unknown direction mode {value:?}"
                        )))
                    }
                }
            }
            _ => return Err(Error::InvalidConfig(format!("unknown config key {key:?}"))),
        }
        Ok(())
    }
}
