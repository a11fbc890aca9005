//! Game clock and fire dynamics.
//!
//! Each turn the player's order is filtered, checked against the cumulative
//! budget `⌊c·t⌋`, and the accepted cells are protected permanently. The fire
//! then spreads to every unprotected neighbour of a burning cell.
//!
//! Spread only needs the cells ignited on the previous turn: every older
//! burning cell already had all its neighbours either ignited or protected.

use std::fmt;
use std::str::FromStr;

use rustc_hash::FxHashMap;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::lattice::{Cell, LatticeError, LatticeKind};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum GameError {
    #[error("initial fire is empty")]
    EmptyFire,
    #[error(transparent)]
    Lattice(#[from] LatticeError),
    #[error("order of {requested} cells exceeds remaining budget {available} at turn {turn}")]
    BudgetExceeded { requested: u64, available: u64, turn: u32 },
    #[error("invalid budget rate: {0}")]
    BadRate(String),
    #[error("horizon of {0} steps reached")]
    HorizonReached(u32),
}

/// Non-negative rational protection rate `c`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "RateRepr", into = "String")]
pub struct BudgetRate {
    num: u64,
    den: u64,
}

#[derive(Deserialize)]
#[serde(untagged)]
enum RateRepr {
    Int(u64),
    Text(String),
}

impl TryFrom<RateRepr> for BudgetRate {
    type Error = GameError;

    fn try_from(r: RateRepr) -> Result<Self, Self::Error> {
        match r {
            RateRepr::Int(n) => Ok(BudgetRate::integer(n)),
            RateRepr::Text(s) => s.parse(),
        }
    }
}

impl From<BudgetRate> for String {
    fn from(r: BudgetRate) -> Self {
        r.to_string()
    }
}

impl BudgetRate {
    pub fn new(num: u64, den: u64) -> Result<Self, GameError> {
        if den == 0 {
            return Err(GameError::BadRate(format!("{num}/0")));
        }
        let g = gcd(num, den);
        Ok(Self { num: num / g, den: den / g })
    }

    pub const fn integer(n: u64) -> Self {
        Self { num: n, den: 1 }
    }

    pub fn numerator(&self) -> u64 {
        self.num
    }

    pub fn denominator(&self) -> u64 {
        self.den
    }

    /// `⌊c·t⌋`: cumulative orders allowed by time `t`.
    pub fn allowance(&self, t: u32) -> u64 {
        ((u128::from(self.num) * u128::from(t)) / u128::from(self.den)) as u64
    }

    pub fn as_f64(&self) -> f64 {
        self.num as f64 / self.den as f64
    }
}

fn gcd(mut a: u64, mut b: u64) -> u64 {
    while b != 0 {
        (a, b) = (b, a % b);
    }
    a.max(1)
}

impl fmt::Display for BudgetRate {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.den == 1 {
            write!(f, "{}", self.num)
        } else {
            write!(f, "{}/{}", self.num, self.den)
        }
    }
}

impl FromStr for BudgetRate {
    type Err = GameError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let bad = || GameError::BadRate(s.to_string());
        let s = s.trim();
        if let Some((n, d)) = s.split_once('/') {
            let n = n.trim().parse().map_err(|_| bad())?;
            let d = d.trim().parse().map_err(|_| bad())?;
            return BudgetRate::new(n, d);
        }
        if let Some((whole, frac)) = s.split_once('.') {
            let den = 10u64.checked_pow(frac.len() as u32).ok_or_else(bad)?;
            let whole: u64 = if whole.is_empty() { 0 } else { whole.parse().map_err(|_| bad())? };
            let frac: u64 = frac.parse().map_err(|_| bad())?;
            return BudgetRate::new(whole * den + frac, den);
        }
        s.parse().map(BudgetRate::integer).map_err(|_| bad())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GameConfig {
    pub kind: LatticeKind,
    pub budget_rate: BudgetRate,
    pub initial_fire: Vec<Cell>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub horizon: Option<u32>,
}

impl GameConfig {
    pub fn new(kind: LatticeKind, budget_rate: BudgetRate, initial_fire: Vec<Cell>) -> Self {
        let mut initial_fire = initial_fire;
        initial_fire.sort_unstable();
        initial_fire.dedup();
        Self { kind, budget_rate, initial_fire, horizon: None }
    }

    pub fn with_horizon(mut self, horizon: u32) -> Self {
        self.horizon = Some(horizon);
        self
    }

    pub fn validate(&self) -> Result<(), GameError> {
        if self.initial_fire.is_empty() {
            return Err(GameError::EmptyFire);
        }
        for &c in &self.initial_fire {
            self.kind.check(c)?;
        }
        Ok(())
    }
}

/// Cells the player asks to protect this turn.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ProtectionOrder {
    pub cells: Vec<Cell>,
}

impl ProtectionOrder {
    pub fn empty() -> Self {
        Self::default()
    }

    pub fn new(cells: Vec<Cell>) -> Self {
        Self { cells }
    }

    pub fn is_empty(&self) -> bool {
        self.cells.is_empty()
    }

    pub fn len(&self) -> usize {
        self.cells.len()
    }
}

impl From<Vec<Cell>> for ProtectionOrder {
    fn from(cells: Vec<Cell>) -> Self {
        Self { cells }
    }
}

/// One turn of the timeline, as written to the replay log.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct StepEvent {
    pub t: u32,
    pub orders: Vec<Cell>,
    pub accepted: Vec<Cell>,
    pub new_burning: Vec<Cell>,
    pub contained: bool,
}

/// Sparse game state. Burning and protected cells carry the time at which
/// they ignited or became protected, so any past `B(s)` or `𝖥(s)` can be
/// queried without keeping snapshots.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GameState {
    t: u32,
    burning: FxHashMap<Cell, u32>,
    protected: FxHashMap<Cell, u32>,
    frontier: Vec<Cell>,
    orders_spent: u64,
    contained: bool,
}

/// Start a game from `config`.
pub fn new_game(config: &GameConfig) -> Result<GameState, GameError> {
    config.validate()?;
    let mut burning = FxHashMap::default();
    burning.reserve(config.initial_fire.len());
    for &c in &config.initial_fire {
        burning.insert(c, 0);
    }
    let mut frontier: Vec<Cell> = burning.keys().copied().collect();
    frontier.sort_unstable();
    Ok(GameState {
        t: 0,
        burning,
        protected: FxHashMap::default(),
        frontier,
        orders_spent: 0,
        contained: false,
    })
}

/// Functional form of [`GameState::apply`]; the input state is untouched.
pub fn step(
    state: &GameState,
    order: &ProtectionOrder,
    config: &GameConfig,
) -> Result<(GameState, StepEvent), GameError> {
    let mut next = state.clone();
    let event = next.apply(order, config)?;
    Ok((next, event))
}

/// True iff the last step produced no new burning cell.
pub fn is_contained(state: &GameState) -> bool {
    state.contained
}

impl GameState {
    pub fn t(&self) -> u32 {
        self.t
    }

    pub fn orders_spent(&self) -> u64 {
        self.orders_spent
    }

    pub fn contained(&self) -> bool {
        self.contained
    }

    pub fn burning_count(&self) -> usize {
        self.burning.len()
    }

    pub fn protected_count(&self) -> usize {
        self.protected.len()
    }

    /// Cells ignited at the current time.
    pub fn frontier(&self) -> &[Cell] {
        &self.frontier
    }

    pub fn is_burning(&self, c: Cell) -> bool {
        self.burning.contains_key(&c)
    }

    pub fn is_protected(&self, c: Cell) -> bool {
        self.protected.contains_key(&c)
    }

    /// Membership in `B(s)` for `s ≤ t`.
    #[inline]
    pub fn burning_at(&self, c: Cell, s: u32) -> bool {
        self.burning.get(&c).is_some_and(|&t0| t0 <= s)
    }

    /// Membership in the cumulative protected set `𝖥(s)`.
    #[inline]
    pub fn protected_at(&self, c: Cell, s: u32) -> bool {
        self.protected.get(&c).is_some_and(|&t0| t0 <= s)
    }

    pub fn ignition_time(&self, c: Cell) -> Option<u32> {
        self.burning.get(&c).copied()
    }

    pub fn protection_time(&self, c: Cell) -> Option<u32> {
        self.protected.get(&c).copied()
    }

    /// Orders still available at the next turn: `⌊c·(t+1)⌋ − spent`.
    pub fn remaining_budget(&self, config: &GameConfig) -> u64 {
        config.budget_rate.allowance(self.t + 1).saturating_sub(self.orders_spent)
    }

    pub fn burning_sorted(&self) -> Vec<Cell> {
        let mut v: Vec<Cell> = self.burning.keys().copied().collect();
        v.sort_unstable();
        v
    }

    pub fn protected_sorted(&self) -> Vec<Cell> {
        let mut v: Vec<Cell> = self.protected.keys().copied().collect();
        v.sort_unstable();
        v
    }

    pub fn burning_iter(&self) -> impl Iterator<Item = Cell> + '_ {
        self.burning.keys().copied()
    }

    pub fn protected_iter(&self) -> impl Iterator<Item = Cell> + '_ {
        self.protected.keys().copied()
    }

    /// Advance one turn in place. On error the state is unchanged.
    pub fn apply(&mut self, order: &ProtectionOrder, config: &GameConfig) -> Result<StepEvent, GameError> {
        if let Some(horizon) = config.horizon {
            if self.t >= horizon {
                return Err(GameError::HorizonReached(horizon));
            }
        }
        let kind = config.kind;
        let mut accepted = Vec::with_capacity(order.cells.len());
        for &c in &order.cells {
            kind.check(c)?;
            if !self.burning.contains_key(&c) && !self.protected.contains_key(&c) {
                accepted.push(c);
            }
        }
        accepted.sort_unstable();
        accepted.dedup();

        let turn = self.t + 1;
        let available = config.budget_rate.allowance(turn).saturating_sub(self.orders_spent);
        if accepted.len() as u64 > available {
            return Err(GameError::BudgetExceeded {
                requested: accepted.len() as u64,
                available,
                turn,
            });
        }
        for &c in &accepted {
            self.protected.insert(c, turn);
        }
        self.orders_spent += accepted.len() as u64;

        let new_burning = self.spread(kind);
        for &c in &new_burning {
            self.burning.insert(c, turn);
        }
        self.t = turn;
        self.contained = new_burning.is_empty();
        self.frontier = new_burning.clone();

        Ok(StepEvent {
            t: turn,
            orders: order.cells.clone(),
            accepted,
            new_burning,
            contained: self.contained,
        })
    }

    fn spread(&self, kind: LatticeKind) -> Vec<Cell> {
        let mut out = Vec::with_capacity(self.frontier.len() * 2);
        for &c in &self.frontier {
            kind.for_each_neighbor(c, |n| {
                if !self.burning.contains_key(&n) && !self.protected.contains_key(&n) {
                    out.push(n);
                }
            });
        }
        out.sort_unstable();
        out.dedup();
        out
    }

    /// Deterministic SHA-256 over the full state, including ignition and
    /// protection times.
    pub fn state_hash(&self) -> String {
        let mut hasher = Sha256::new();
        hasher.update(self.t.to_le_bytes());
        hasher.update(self.orders_spent.to_le_bytes());
        hasher.update([u8::from(self.contained)]);
        for (tag, map) in [(b'B', &self.burning), (b'F', &self.protected)] {
            let mut entries: Vec<(Cell, u32)> = map.iter().map(|(&c, &t)| (c, t)).collect();
            entries.sort_unstable();
            hasher.update([tag]);
            hasher.update((entries.len() as u64).to_le_bytes());
            for (c, t) in entries {
                hasher.update(c.x.to_le_bytes());
                hasher.update(c.y.to_le_bytes());
                hasher.update(c.k.to_le_bytes());
                hasher.update(t.to_le_bytes());
            }
        }
        hex::encode(hasher.finalize())
    }

    pub fn snapshot(&self, config: &GameConfig) -> StateSnapshot {
        StateSnapshot {
            t: self.t,
            burning: self.burning_sorted(),
            protected: self.protected_sorted(),
            orders_spent: self.orders_spent,
            contained: self.contained,
            remaining_budget: self.remaining_budget(config),
        }
    }
}

/// Serializable view of a state.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct StateSnapshot {
    pub t: u32,
    pub burning: Vec<Cell>,
    pub protected: Vec<Cell>,
    pub orders_spent: u64,
    pub contained: bool,
    pub remaining_budget: u64,
}
