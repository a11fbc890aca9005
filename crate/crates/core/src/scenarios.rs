//! Initial configurations.
//!
//! * `pyramid`: stacked squares (king lattice) or diamonds (grid lattice) of
//!   shrinking size, the fire that a protection cylinder contains in `h` turns.
//! * `canonical`: every level of a uniform fronts structure of radius `R`
//!   burns; the starting point of the lower-bound accounting.
//! * `single`: one burning cell at the origin.
//! * `custom`: an explicit cell list.
//!
//! Derived quantities (`λ`, `φ(0)`) are always recomputed from the built sets.

use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};
use thiserror::Error;

use crate::engine::{BudgetRate, GameConfig, GameError};
use crate::fronts::{self, front_level_cells, FrontQuad, FrontsError};
use crate::lattice::{level_cardinality, Cell, LatticeError, LatticeKind, DIRECTIONS};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ScenarioError {
    #[error(transparent)]
    Lattice(#[from] LatticeError),
    #[error(transparent)]
    Fronts(#[from] FrontsError),
    #[error(transparent)]
    Game(#[from] GameError),
    #[error("unknown scenario {0:?}")]
    UnknownName(String),
    #[error("parameter {name:?}: {reason}")]
    BadParam { name: String, reason: String },
    #[error("pyramid needs h divisible by {divisor} for q = {q}, got h = {h}")]
    PyramidHeight { q: u8, h: u32, divisor: u32 },
}

/// Scenario file contents: `{"name", "q", "h", "params"}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioSpec {
    pub name: String,
    pub q: u8,
    pub h: u32,
    #[serde(default)]
    pub params: Map<String, Value>,
}

impl ScenarioSpec {
    pub fn new(name: &str, q: u8, h: u32) -> Self {
        Self { name: name.to_string(), q, h, params: Map::new() }
    }

    pub fn with_param(mut self, key: &str, value: impl Into<Value>) -> Self {
        self.params.insert(key.to_string(), value.into());
        self
    }

    fn int_param(&self, key: &str) -> Result<Option<i64>, ScenarioError> {
        match self.params.get(key) {
            None => Ok(None),
            Some(v) => v.as_i64().map(Some).ok_or_else(|| ScenarioError::BadParam {
                name: key.to_string(),
                reason: format!("expected an integer, got {v}"),
            }),
        }
    }

    fn rate_param(&self, default: BudgetRate) -> Result<BudgetRate, ScenarioError> {
        match self.params.get("c") {
            None => Ok(default),
            Some(v) => serde_json::from_value(v.clone()).map_err(|e| ScenarioError::BadParam {
                name: "c".into(),
                reason: e.to_string(),
            }),
        }
    }

    pub fn build(&self) -> Result<Scenario, ScenarioError> {
        let kind = LatticeKind::new(self.q, self.h)?;
        let critical = critical_rate(kind);
        let mut scenario = match self.name.as_str() {
            "pyramid" => {
                let (fire, r) = pyramid_fire(self.q, self.h)?;
                let mut s = Scenario::plain(self.clone(), kind, self.rate_param(critical)?, fire);
                s.pyramid_r = Some(r);
                s
            }
            "canonical" => {
                let hh = i64::from(self.h);
                let r = self.int_param("R")?.unwrap_or(30 * hh.pow(4));
                if r < 1 {
                    return Err(ScenarioError::BadParam { name: "R".into(), reason: "must be at least 1".into() });
                }
                let (fire, quad) = canonical_fronts_fire(kind, r)?;
                let mut s = Scenario::plain(self.clone(), kind, self.rate_param(critical)?, fire);
                s.attach_fronts(quad);
                s
            }
            "single" => {
                let k = self.int_param("k")?.unwrap_or(1);
                let k = i32::try_from(k).map_err(|_| ScenarioError::BadParam {
                    name: "k".into(),
                    reason: "out of range".into(),
                })?;
                let fire = vec![Cell::new(0, 0, k)];
                Scenario::plain(self.clone(), kind, self.rate_param(BudgetRate::integer(0))?, fire)
            }
            "custom" => {
                let fire: Vec<Cell> = match self.params.get("fire") {
                    Some(v) => serde_json::from_value(v.clone()).map_err(|e| ScenarioError::BadParam {
                        name: "fire".into(),
                        reason: e.to_string(),
                    })?,
                    None => return Err(ScenarioError::BadParam { name: "fire".into(), reason: "missing".into() }),
                };
                Scenario::plain(self.clone(), kind, self.rate_param(BudgetRate::integer(0))?, fire)
            }
            other => return Err(ScenarioError::UnknownName(other.to_string())),
        };
        if let Some(horizon) = self.int_param("horizon")? {
            let horizon = u32::try_from(horizon).map_err(|_| ScenarioError::BadParam {
                name: "horizon".into(),
                reason: "must be non-negative".into(),
            })?;
            scenario.config.horizon = Some(horizon);
        }
        scenario.config.validate()?;
        Ok(scenario)
    }
}

/// `(3/2)qh` as an exact rate.
pub fn critical_rate(kind: LatticeKind) -> BudgetRate {
    BudgetRate::new(3 * u64::from(kind.q()) * u64::from(kind.h()), 2).expect("nonzero denominator")
}

/// A built scenario.
#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub spec: ScenarioSpec,
    pub kind: LatticeKind,
    pub config: GameConfig,
    pub quad: Option<FrontQuad>,
    pub lambda: Option<i64>,
    pub phi0: Option<i64>,
    pub pyramid_r: Option<i64>,
}

impl Scenario {
    fn plain(spec: ScenarioSpec, kind: LatticeKind, rate: BudgetRate, fire: Vec<Cell>) -> Self {
        Self {
            spec,
            kind,
            config: GameConfig::new(kind, rate, fire),
            quad: None,
            lambda: None,
            phi0: None,
            pyramid_r: None,
        }
    }

    fn attach_fronts(&mut self, quad: FrontQuad) {
        let fire: rustc_hash::FxHashSet<Cell> = self.config.initial_fire.iter().copied().collect();
        let mut phi0 = 0i64;
        for i in 0..DIRECTIONS {
            for k in 1..=self.kind.h() as i32 {
                phi0 += front_level_cells(&quad, i, k, self.kind)
                    .iter()
                    .filter(|c| fire.contains(c))
                    .count() as i64;
            }
        }
        self.lambda = Some(fronts::lambda(&quad, self.kind));
        self.phi0 = Some(phi0);
        self.quad = Some(quad);
    }

    /// `φ(0) ≥ λ + 55h⁵`.
    pub fn large_initial_fierity(&self) -> Option<bool> {
        let h5 = self.kind.h_i64().pow(5);
        Some(self.phi0? >= self.lambda? + 55 * h5)
    }

    /// Whether the lower-bound hypotheses hold: large initial fierity and a
    /// rate no larger than `(3/2)qh`.
    pub fn hypothesis_satisfied(&self) -> bool {
        self.large_initial_fierity() == Some(true) && self.rate_ok()
    }

    /// Budget rate at most `(3/2)qh`.
    pub fn rate_ok(&self) -> bool {
        let rate = self.config.budget_rate;
        let critical = critical_rate(self.kind);
        u128::from(rate.numerator()) * u128::from(critical.denominator())
            <= u128::from(critical.numerator()) * u128::from(rate.denominator())
    }

    pub fn summary(&self) -> Value {
        serde_json::json!({
            "spec": self.spec,
            "initial_fire": self.config.initial_fire.len(),
            "budget_rate": self.config.budget_rate,
            "lambda": self.lambda,
            "phi0": self.phi0,
            "pyramid_r": self.pyramid_r,
            "hypothesis_satisfied": self.quad.as_ref().map(|_| self.hypothesis_satisfied()),
        })
    }
}

/// The pyramid fire and its base size `r = 3h/4 - 1`.
///
/// Layer `k` holds a square (`q = 2`) or diamond (`q = 1`) of side or
/// diagonal `r - 2(k - 1)`, down to a single cell.
pub fn pyramid_fire(q: u8, h: u32) -> Result<(Vec<Cell>, i64), ScenarioError> {
    let kind = LatticeKind::new(q, h)?;
    let divisor = 8 / u32::from(q);
    if !h.is_multiple_of(divisor) {
        return Err(ScenarioError::PyramidHeight { q, h, divisor });
    }
    let r = 3 * i64::from(h) / 4 - 1;
    let mut fire = Vec::new();
    let mut k = 1;
    while kind.contains_layer(k) {
        let side = r - 2 * i64::from(k - 1);
        if side <= 0 {
            break;
        }
        let (lo, hi) = (-(side / 2), (side - 1) / 2);
        for x in lo..=hi {
            for y in lo..=hi {
                let inside = q == 2 || x.abs() + y.abs() <= (side - 1) / 2;
                if inside {
                    fire.push(Cell::new(x as i32, y as i32, k));
                }
            }
        }
        k += 1;
    }
    fire.sort_unstable();
    Ok((fire, r))
}

/// The fronts structure hugging a pyramid base of size `r` from outside.
pub fn pyramid_ring_quad(q: u8, h: u32, r: i64) -> Result<FrontQuad, ScenarioError> {
    if q == 2 && r % 2 == 0 {
        // Even squares occupy [-r/2, r/2 - 1] on both axes.
        let half = r / 2;
        Ok(FrontQuad::new(std::array::from_fn(|i| {
            let d = if i < 2 { half } else { half + 1 };
            vec![d; h as usize]
        }))?)
    } else {
        Ok(FrontQuad::uniform(h, (r + 1) / 2)?)
    }
}

/// Every level of the uniform radius-`R` fronts structure, burning.
pub fn canonical_fronts_fire(kind: LatticeKind, r: i64) -> Result<(Vec<Cell>, FrontQuad), ScenarioError> {
    let quad = FrontQuad::uniform(kind.h(), r)?;
    let mut fire = Vec::new();
    for k in 1..=kind.h() as i32 {
        for i in 0..DIRECTIONS {
            fire.extend(front_level_cells(&quad, i, k, kind));
        }
    }
    fire.sort_unstable();
    Ok((fire, quad))
}

/// `Σ_i Σ_k |L_i^k|` from the closed-form cardinality.
pub fn fronts_cardinality(quad: &FrontQuad, kind: LatticeKind) -> i64 {
    let mut total = 0;
    for k in 1..=kind.h() as i32 {
        for i in 0..DIRECTIONS {
            let s = quad.level_spec(i, k);
            total += level_cardinality(s.a, s.b, s.d, kind.q());
        }
    }
    total
}
