//! Firefighting on layered planar lattices.
//!
//! The crate simulates the firefighter game on `Z□Z□[h]` and `Z⊠Z□[h]`,
//! maintains the four-front accounting structure used to lower-bound fire
//! growth, and checks the growth inequalities on every simulated step.

pub mod engine;
pub mod fronts;
pub mod lattice;
pub mod monitor;
pub mod runner;
pub mod scenarios;
pub mod session;
pub mod strategies;

pub use engine::{
    is_contained, new_game, step, BudgetRate, GameConfig, GameError, GameState, ProtectionOrder,
    StateSnapshot, StepEvent,
};
pub use fronts::{
    advance_front, front_level_cells, lip, shifted_sets, shifted_sets_closed_form, FrontQuad,
    FrontTotals, FrontsError, FrontsTracker, LedgerRow, Overlay, ShiftedSets, StepRecord, Viewport,
};
pub use lattice::{
    closed_neighborhood, level_cardinality, level_cells, level_contains, neighbors, Cell,
    LatticeError, LatticeKind, LevelSpec,
};
pub use monitor::{CheckReport, CheckStatus, HypothesisTracker, Monitor, MonitorSummary};
pub use runner::{run, run_parallel, RunError, RunOptions, RunResult};
pub use scenarios::{Scenario, ScenarioError, ScenarioSpec};
pub use session::{Mode, SaveFile, Session, SessionError, SessionView};
pub use strategies::{Strategy, StrategyContext, StrategyError, StrategySpec};
