//! Interactive sessions, save files and replay.
//!
//! A session is a scenario, an engine state, the orders of every turn so far
//! and the state hash after every turn. When the scenario has a fronts
//! structure the tracker and monitor run alongside. A save file holds the
//! scenario, the orders and the hashes; loading replays the orders and
//! rejects the file if any hash differs.

use std::fmt;
use std::str::FromStr;

use rustc_hash::FxHashSet;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::engine::{new_game, GameConfig, GameError, GameState, ProtectionOrder, StateSnapshot, StepEvent};
use crate::fronts::{FrontsError, FrontsTracker, LedgerRow, Overlay, Viewport};
use crate::lattice::Cell;
use crate::monitor::{HypothesisTracker, Monitor, MonitorSummary};
use crate::scenarios::{critical_rate, Scenario, ScenarioError, ScenarioSpec};

pub const MODE_ENV: &str = "PYROFRONT_MODE";
pub const SAVE_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    /// Orders beyond `⌊(3qh/2)(t+1)⌋` in total are refused while the
    /// scenario meets the large-initial-fierity condition.
    Strict,
    #[default]
    Exploratory,
}

impl Mode {
    /// From `PYROFRONT_MODE`, exploratory when unset.
    pub fn from_env() -> Result<Self, SessionError> {
        match std::env::var(MODE_ENV) {
            Ok(v) => v.parse(),
            Err(_) => Ok(Mode::default()),
        }
    }
}

impl FromStr for Mode {
    type Err = SessionError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "strict" => Ok(Mode::Strict),
            "exploratory" => Ok(Mode::Exploratory),
            _ => Err(SessionError::BadMode(s.to_string())),
        }
    }
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Mode::Strict => "strict",
            Mode::Exploratory => "exploratory",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum SessionError {
    #[error(transparent)]
    Scenario(#[from] ScenarioError),
    #[error(transparent)]
    Game(#[from] GameError),
    #[error(transparent)]
    Fronts(#[from] FrontsError),
    #[error("strict mode: {requested} more orders would exceed the cap {cap} at turn {turn}")]
    StrictCap { requested: u64, cap: u64, turn: u32 },
    #[error("scenario {0:?} has no fronts structure")]
    NoFronts(String),
    #[error("no ledger entry at t = {0}")]
    NoSuchTime(u32),
    #[error("unknown mode {0:?}")]
    BadMode(String),
    #[error("save file version {0} is not supported")]
    BadVersion(u32),
    #[error("save file config does not match its scenario")]
    ConfigMismatch,
    #[error("replay diverged at t = {t}: expected {expected}, got {got}")]
    HashMismatch { t: u32, expected: String, got: String },
    #[error("replay has {replay} turns but {hashes} hashes")]
    BadReplayLength { replay: usize, hashes: usize },
}

impl SessionError {
    /// Errors caused by an order the rules refuse, as opposed to bad input.
    pub fn is_rejected_order(&self) -> bool {
        matches!(
            self,
            SessionError::Game(GameError::BudgetExceeded { .. } | GameError::HorizonReached(_))
                | SessionError::StrictCap { .. }
        )
    }
}

/// Orders submitted for one turn.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ReplayEntry {
    pub t: u32,
    pub orders: Vec<Cell>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SaveFile {
    pub version: u32,
    pub scenario: ScenarioSpec,
    pub config: GameConfig,
    pub mode: Mode,
    pub replay: Vec<ReplayEntry>,
    /// State hash for `t = 0..=replay.len()`.
    pub hashes: Vec<String>,
}

/// What the UI shows: the state plus the server-side accounting.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SessionView {
    #[serde(flatten)]
    pub state: StateSnapshot,
    pub mode: Mode,
    pub hash: String,
    pub budget_rate: String,
    /// `⌊(3qh/2)(t+1)⌋ - orders_spent` when the strict cap applies.
    pub strict_remaining: Option<u64>,
    pub fronts: Option<FrontsView>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FrontsView {
    pub lambda: i64,
    pub phi: i64,
    pub f: i64,
    pub mu: i64,
    pub armed: bool,
    /// `3qht + λ + 52h⁵`.
    pub hypothesis_bound: i64,
    /// `3qht`.
    pub lower_bound: i64,
    pub monitor: MonitorSummary,
}

pub struct Session {
    scenario: Scenario,
    mode: Mode,
    game: GameState,
    tracked: Option<(FrontsTracker, Monitor)>,
    replay: Vec<ReplayEntry>,
    hashes: Vec<String>,
}

impl Session {
    pub fn create(spec: &ScenarioSpec, mode: Mode) -> Result<Self, SessionError> {
        let scenario = spec.build()?;
        let game = new_game(&scenario.config)?;
        let tracked = match &scenario.quad {
            Some(quad) => {
                let tracker = FrontsTracker::new(scenario.kind, quad.clone(), &game)?;
                let hypothesis = HypothesisTracker::new(
                    scenario.kind,
                    tracker.lambda(),
                    tracker.phi(0).unwrap_or(0),
                    scenario.rate_ok(),
                );
                let mut monitor = Monitor::new(scenario.kind, Some(hypothesis));
                monitor.observe_initial(&tracker);
                Some((tracker, monitor))
            }
            None => None,
        };
        let hashes = vec![game.state_hash()];
        Ok(Self { scenario, mode, game, tracked, replay: Vec::new(), hashes })
    }

    pub fn scenario(&self) -> &Scenario {
        &self.scenario
    }

    pub fn config(&self) -> &GameConfig {
        &self.scenario.config
    }

    pub fn mode(&self) -> Mode {
        self.mode
    }

    pub fn game(&self) -> &GameState {
        &self.game
    }

    pub fn tracker(&self) -> Option<&FrontsTracker> {
        self.tracked.as_ref().map(|(t, _)| t)
    }

    pub fn monitor(&self) -> Option<&Monitor> {
        self.tracked.as_ref().map(|(_, m)| m)
    }

    pub fn replay(&self) -> &[ReplayEntry] {
        &self.replay
    }

    pub fn hashes(&self) -> &[String] {
        &self.hashes
    }

    fn strict_cap(&self, turn: u32) -> Option<u64> {
        let applies = self.mode == Mode::Strict && self.scenario.large_initial_fierity() == Some(true);
        applies.then(|| critical_rate(self.scenario.kind).allowance(turn))
    }

    /// Play one turn. On error nothing changes.
    pub fn step(&mut self, orders: Vec<Cell>) -> Result<StepEvent, SessionError> {
        let turn = self.game.t() + 1;
        if let Some(cap) = self.strict_cap(turn) {
            let fresh: FxHashSet<Cell> = orders
                .iter()
                .copied()
                .filter(|&c| !self.game.is_burning(c) && !self.game.is_protected(c))
                .collect();
            let requested = fresh.len() as u64;
            if self.game.orders_spent() + requested > cap {
                return Err(SessionError::StrictCap { requested, cap, turn });
            }
        }
        let order = ProtectionOrder::new(orders);
        let event = self.game.apply(&order, &self.scenario.config)?;
        if let Some((tracker, monitor)) = self.tracked.as_mut() {
            let record = tracker.advance(&self.game)?;
            monitor.observe(&record, tracker, &self.game);
        }
        self.replay.push(ReplayEntry { t: turn, orders: order.cells });
        self.hashes.push(self.game.state_hash());
        Ok(event)
    }

    /// The state, cropped to `viewport` when given.
    pub fn view(&self, viewport: Option<Viewport>) -> SessionView {
        let config = &self.scenario.config;
        let mut state = self.game.snapshot(config);
        if let Some(v) = viewport {
            state.burning.retain(|&c| v.contains(c));
            state.protected.retain(|&c| v.contains(c));
        }
        let t = self.game.t();
        let strict_remaining = self
            .strict_cap(t + 1)
            .map(|cap| cap.saturating_sub(self.game.orders_spent()));
        let fronts = self.tracked.as_ref().map(|(tracker, monitor)| {
            let hyp = monitor.hypothesis().expect("sessions always track the hypothesis");
            FrontsView {
                lambda: tracker.lambda(),
                phi: tracker.phi(t).unwrap_or(0),
                f: tracker.f(t).unwrap_or(0),
                mu: tracker.mu(t).unwrap_or(0),
                armed: hyp.armed(),
                hypothesis_bound: hyp.bound(t),
                lower_bound: hyp.weak_bound(t),
                monitor: monitor.summary(),
            }
        });
        SessionView {
            state,
            mode: self.mode,
            hash: self.hashes.last().cloned().unwrap_or_default(),
            budget_rate: config.budget_rate.to_string(),
            strict_remaining,
            fronts,
        }
    }

    pub fn overlay(&self, t: Option<u32>, viewport: Option<Viewport>) -> Result<Overlay, SessionError> {
        let tracker = self.tracker().ok_or_else(|| SessionError::NoFronts(self.scenario.spec.name.clone()))?;
        let t = t.unwrap_or(self.game.t());
        Ok(tracker.overlay(t, viewport)?)
    }

    pub fn ledger(&self, from: u32) -> Result<&[LedgerRow], SessionError> {
        let tracker = self.tracker().ok_or_else(|| SessionError::NoFronts(self.scenario.spec.name.clone()))?;
        if from > tracker.t() {
            return Err(SessionError::NoSuchTime(from));
        }
        Ok(tracker.rows_from(from))
    }

    pub fn save(&self) -> SaveFile {
        SaveFile {
            version: SAVE_VERSION,
            scenario: self.scenario.spec.clone(),
            config: self.scenario.config.clone(),
            mode: self.mode,
            replay: self.replay.clone(),
            hashes: self.hashes.clone(),
        }
    }

    /// Rebuild a session by replaying `save`, checking every hash.
    pub fn load(save: &SaveFile) -> Result<Self, SessionError> {
        if save.version != SAVE_VERSION {
            return Err(SessionError::BadVersion(save.version));
        }
        if save.hashes.len() != save.replay.len() + 1 {
            return Err(SessionError::BadReplayLength { replay: save.replay.len(), hashes: save.hashes.len() });
        }
        let mut session = Self::create(&save.scenario, save.mode)?;
        if session.scenario.config != save.config {
            return Err(SessionError::ConfigMismatch);
        }
        session.check_hash(0, &save.hashes[0])?;
        for (entry, expected) in save.replay.iter().zip(&save.hashes[1..]) {
            session.step(entry.orders.clone())?;
            session.check_hash(entry.t, expected)?;
        }
        Ok(session)
    }

    fn check_hash(&self, t: u32, expected: &str) -> Result<(), SessionError> {
        let got = self.hashes.last().expect("at least the initial hash");
        if got != expected || self.game.t() != t {
            return Err(SessionError::HashMismatch { t, expected: expected.to_string(), got: got.clone() });
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn single() -> ScenarioSpec {
        ScenarioSpec::new("single", 2, 1).with_param("c", 2)
    }

    #[test]
    fn free_spread_counts() {
        let mut s = Session::create(&single(), Mode::Exploratory).unwrap();
        for t in 1..=3usize {
            s.step(Vec::new()).unwrap();
            assert_eq!(s.view(None).state.burning.len(), (2 * t + 1).pow(2));
        }
        assert!(s.view(None).fronts.is_none());
        assert!(matches!(s.overlay(None, None), Err(SessionError::NoFronts(_))));
    }

    #[test]
    fn over_budget_leaves_state_alone() {
        let mut s = Session::create(&single(), Mode::Exploratory).unwrap();
        let before = serde_json::to_string(&s.view(None)).unwrap();
        let orders = vec![Cell::new(1, 0, 1), Cell::new(2, 0, 1), Cell::new(3, 0, 1)];
        let err = s.step(orders).unwrap_err();
        assert!(err.is_rejected_order());
        assert_eq!(serde_json::to_string(&s.view(None)).unwrap(), before);
        assert!(s.replay().is_empty());
    }

    #[test]
    fn save_load_round_trip() {
        let spec = ScenarioSpec::new("canonical", 1, 2).with_param("R", 4).with_param("c", 3);
        let mut s = Session::create(&spec, Mode::Exploratory).unwrap();
        s.step(vec![Cell::new(0, 5, 1), Cell::new(1, 5, 2)]).unwrap();
        s.step(Vec::new()).unwrap();
        s.step(vec![Cell::new(-6, 0, 1)]).unwrap();
        let save = s.save();
        let text = serde_json::to_string(&save).unwrap();
        let loaded = Session::load(&serde_json::from_str(&text).unwrap()).unwrap();
        assert_eq!(
            serde_json::to_string(&loaded.view(None)).unwrap(),
            serde_json::to_string(&s.view(None)).unwrap()
        );
        assert_eq!(loaded.hashes(), s.hashes());
        assert_eq!(loaded.ledger(0).unwrap(), s.ledger(0).unwrap());
    }

    #[test]
    fn tampered_save_is_rejected() {
        let mut s = Session::create(&single(), Mode::Exploratory).unwrap();
        s.step(vec![Cell::new(1, 1, 1)]).unwrap();
        s.step(Vec::new()).unwrap();
        let mut save = s.save();
        save.replay[0].orders = vec![Cell::new(-1, -1, 1)];
        assert!(matches!(Session::load(&save), Err(SessionError::HashMismatch { t: 1, .. })));
        let mut save = s.save();
        save.hashes.pop();
        assert!(matches!(Session::load(&save), Err(SessionError::BadReplayLength { .. })));
        let mut save = s.save();
        save.config.budget_rate = crate::engine::BudgetRate::integer(9);
        assert_eq!(Session::load(&save).err(), Some(SessionError::ConfigMismatch));
    }

    #[test]
    fn strict_cap_applies_only_when_armed() {
        // Rate 8 exceeds (3/2)qh = 6 while the canonical fire is large enough.
        let spec = ScenarioSpec::new("canonical", 2, 2).with_param("c", 8);
        let mut strict = Session::create(&spec, Mode::Strict).unwrap();
        let far: Vec<Cell> = (0..7).map(|x| Cell::new(10_000 + x, 0, 1)).collect();
        assert!(matches!(strict.step(far.clone()), Err(SessionError::StrictCap { cap: 6, .. })));
        strict.step(far[..6].to_vec()).unwrap();
        assert_eq!(strict.view(None).strict_remaining, Some(6));

        let mut loose = Session::create(&spec, Mode::Exploratory).unwrap();
        loose.step(far).unwrap();

        let small = ScenarioSpec::new("canonical", 2, 2).with_param("R", 3).with_param("c", 8);
        let mut s = Session::create(&small, Mode::Strict).unwrap();
        s.step((0..8).map(|x| Cell::new(100 + x, 0, 1)).collect()).unwrap();
    }

    #[test]
    fn views_and_ledger() {
        let spec = ScenarioSpec::new("canonical", 2, 1).with_param("R", 3);
        let mut s = Session::create(&spec, Mode::Exploratory).unwrap();
        s.step(Vec::new()).unwrap();
        let view = s.view(Some(Viewport { x0: 0, y0: 0, x1: 10, y1: 10 }));
        assert!(view.state.burning.iter().all(|c| c.x >= 0 && c.y >= 0));
        let fronts = view.fronts.unwrap();
        assert_eq!(fronts.monitor.failed(), 0);
        assert_eq!(fronts.lower_bound, 6);
        assert_eq!(s.ledger(1).unwrap().len(), 4);
        assert!(matches!(s.ledger(2), Err(SessionError::NoSuchTime(2))));
        assert_eq!(s.overlay(Some(0), None).unwrap().t, 0);
    }

    #[test]
    fn mode_parsing() {
        assert_eq!("Strict".parse::<Mode>().unwrap(), Mode::Strict);
        assert!("fast".parse::<Mode>().is_err());
        assert_eq!(serde_json::to_string(&Mode::Exploratory).unwrap(), "\"exploratory\"");
    }
}
