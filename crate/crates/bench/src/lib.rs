//! Fixtures shared by the benchmarks.

use pyrofront_core::runner::RunOptions;
use pyrofront_core::strategies::StrategyContext;
use pyrofront_core::{new_game, FrontsTracker, GameState, Scenario, ScenarioSpec, StrategySpec};

pub fn canonical(q: u8, h: u32, r: i64) -> Scenario {
    ScenarioSpec::new("canonical", q, h).with_param("R", r).build().expect("canonical scenario")
}

/// The game after `steps` greedy turns.
pub fn greedy_game(scenario: &Scenario, steps: u32) -> GameState {
    let config = &scenario.config;
    let mut player = StrategySpec::new("greedy").build(config).expect("greedy");
    let mut game = new_game(config).expect("valid config");
    for _ in 0..steps {
        let order = player.decide(&StrategyContext::new(&game, config)).expect("greedy decides");
        game.apply(&order, config).expect("within budget");
    }
    game
}

pub fn tracker(scenario: &Scenario, game: &GameState) -> FrontsTracker {
    let quad = scenario.quad.clone().expect("canonical scenarios carry fronts");
    FrontsTracker::new(scenario.kind, quad, game).expect("tracker")
}

pub fn options(steps: u32, monitor: bool) -> RunOptions {
    let mut opts = RunOptions::new(steps);
    opts.monitor = monitor;
    opts
}
