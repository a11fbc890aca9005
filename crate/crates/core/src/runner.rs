//! Batch runs: a scenario, a strategy, and optionally the fronts tracker and
//! monitor, for a fixed number of turns.

use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::engine::{new_game, GameError, GameState};
use crate::fronts::{FrontsError, FrontsTracker};
use crate::monitor::{CheckReport, HypothesisTracker, Monitor, MonitorSummary};
use crate::scenarios::Scenario;
use crate::strategies::{StrategyContext, StrategyError, StrategySpec};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum RunError {
    #[error(transparent)]
    Game(#[from] GameError),
    #[error(transparent)]
    Fronts(#[from] FrontsError),
    #[error(transparent)]
    Strategy(#[from] StrategyError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct RunOptions {
    pub steps: u32,
    /// Track fronts and run the monitor (needs a scenario with fronts).
    pub monitor: bool,
    /// Keep every check report, not only failures.
    pub record_all: bool,
    /// State hash after every turn, starting with `t = 0`.
    pub hashes: bool,
    /// Stop at the first failed check.
    pub abort_on_failure: bool,
    /// Stop once a turn adds no burning cell.
    pub stop_when_contained: bool,
}

impl RunOptions {
    pub fn new(steps: u32) -> Self {
        Self {
            steps,
            monitor: true,
            record_all: false,
            hashes: false,
            abort_on_failure: false,
            stop_when_contained: false,
        }
    }
}

/// How the induction hypothesis fared over a run.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct HypothesisOutcome {
    pub armed: bool,
    pub large_initial: bool,
    pub rate_ok: bool,
    pub budget_ok: bool,
    pub first_violation: Option<u32>,
    pub first_weak_violation: Option<u32>,
}

impl From<&HypothesisTracker> for HypothesisOutcome {
    fn from(h: &HypothesisTracker) -> Self {
        Self {
            armed: h.armed(),
            large_initial: h.large_initial,
            rate_ok: h.rate_ok,
            budget_ok: h.budget_ok,
            first_violation: h.first_violation,
            first_weak_violation: h.first_weak_violation,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunResult {
    pub scenario: String,
    pub strategy: String,
    pub steps: u32,
    pub contained_at: Option<u32>,
    pub burning: usize,
    pub protected: usize,
    pub orders_spent: u64,
    pub final_hash: String,
    pub hashes: Vec<String>,
    /// `(φ(t), f(t))` for every turn, when tracked.
    pub phi_f: Vec<(i64, i64)>,
    pub monitor: Option<MonitorSummary>,
    pub failures: Vec<CheckReport>,
    #[serde(skip)]
    pub reports: Vec<CheckReport>,
    pub hypothesis: Option<HypothesisOutcome>,
    pub elapsed_ms: u128,
}

impl RunResult {
    pub fn elapsed(&self) -> Duration {
        Duration::from_millis(self.elapsed_ms as u64)
    }

    pub fn monitor_failures(&self) -> u64 {
        self.monitor.as_ref().map_or(0, MonitorSummary::failed)
    }
}

pub fn run(scenario: &Scenario, strategy: &StrategySpec, opts: &RunOptions) -> Result<RunResult, RunError> {
    let started = Instant::now();
    let config = &scenario.config;
    let mut player = strategy.build(config)?;
    let mut game = new_game(config)?;

    let mut tracked = match (&scenario.quad, opts.monitor) {
        (Some(quad), true) => {
            let tracker = FrontsTracker::new(scenario.kind, quad.clone(), &game)?;
            let hypothesis = HypothesisTracker::new(
                scenario.kind,
                tracker.lambda(),
                tracker.phi(0).unwrap_or(0),
                scenario.rate_ok(),
            );
            let mut monitor = Monitor::new(scenario.kind, Some(hypothesis)).record_all(opts.record_all);
            monitor.observe_initial(&tracker);
            Some((tracker, monitor))
        }
        _ => None,
    };

    let mut hashes = Vec::new();
    if opts.hashes {
        hashes.push(game.state_hash());
    }
    let mut phi_f = Vec::new();
    if let Some((tracker, _)) = &tracked {
        phi_f.push((tracker.phi(0).unwrap_or(0), 0));
    }
    let mut contained_at = None;

    for _ in 0..opts.steps {
        let order = player.decide(&StrategyContext::new(&game, config))?;
        game.apply(&order, config)?;
        if opts.hashes {
            hashes.push(game.state_hash());
        }
        if let Some((tracker, monitor)) = tracked.as_mut() {
            let record = tracker.advance(&game)?;
            monitor.observe(&record, tracker, &game);
            let t = game.t();
            phi_f.push((tracker.phi(t).unwrap_or(0), tracker.f(t).unwrap_or(0)));
            if opts.abort_on_failure && monitor.failure_count() > 0 {
                break;
            }
        }
        if game.contained() && contained_at.is_none() {
            contained_at = Some(game.t());
            if opts.stop_when_contained {
                break;
            }
        }
    }

    Ok(finish(scenario, player.name(), &game, tracked, hashes, phi_f, contained_at, started))
}

#[allow(clippy::too_many_arguments)]
fn finish(
    scenario: &Scenario,
    strategy: &str,
    game: &GameState,
    tracked: Option<(FrontsTracker, Monitor)>,
    hashes: Vec<String>,
    phi_f: Vec<(i64, i64)>,
    contained_at: Option<u32>,
    started: Instant,
) -> RunResult {
    let (monitor, failures, reports, hypothesis) = match tracked {
        Some((_, m)) => (
            Some(m.summary()),
            m.failures().to_vec(),
            m.reports().to_vec(),
            m.hypothesis().map(HypothesisOutcome::from),
        ),
        None => (None, Vec::new(), Vec::new(), None),
    };
    RunResult {
        scenario: scenario.spec.name.clone(),
        strategy: strategy.to_string(),
        steps: game.t(),
        contained_at,
        burning: game.burning_count(),
        protected: game.protected_count(),
        orders_spent: game.orders_spent(),
        final_hash: game.state_hash(),
        hashes,
        phi_f,
        monitor,
        failures,
        reports,
        hypothesis,
        elapsed_ms: started.elapsed().as_millis(),
    }
}

/// Runs every job on its own thread, results in job order.
pub fn run_parallel(
    jobs: &[(Scenario, StrategySpec)],
    opts: &RunOptions,
) -> Vec<Result<RunResult, RunError>> {
    let threads = std::thread::available_parallelism().map_or(1, |n| n.get()).max(1);
    let mut results: Vec<Option<Result<RunResult, RunError>>> = (0..jobs.len()).map(|_| None).collect();
    let next = std::sync::atomic::AtomicUsize::new(0);
    let slots = std::sync::Mutex::new(&mut results);
    std::thread::scope(|scope| {
        for _ in 0..threads.min(jobs.len()) {
            scope.spawn(|| loop {
                let idx = next.fetch_add(1, std::sync::atomic::Ordering::Relaxed);
                let Some((scenario, strategy)) = jobs.get(idx) else {
                    break;
                };
                let outcome = run(scenario, strategy, opts);
                slots.lock().expect("no panics while holding the lock")[idx] = Some(outcome);
            });
        }
    });
    results.into_iter().map(|r| r.expect("every job ran")).collect()
}

/// Null, greedy and `randoms` seeded random strategies.
pub fn standard_strategies(randoms: u64) -> Vec<StrategySpec> {
    let mut out = vec![StrategySpec::new("null"), StrategySpec::new("greedy")];
    out.extend((0..randoms).map(|seed| StrategySpec::new("random").with_param("seed", seed)));
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scenarios::ScenarioSpec;

    #[test]
    fn pyramid_run_reports_containment() {
        let scenario = ScenarioSpec::new("pyramid", 2, 8).build().unwrap();
        let mut opts = RunOptions::new(20);
        opts.stop_when_contained = true;
        let result = run(&scenario, &StrategySpec::new("pyramid_cylinder"), &opts).unwrap();
        assert_eq!(result.contained_at, Some(8));
        assert!(result.monitor.is_none());
        assert_eq!(result.steps, 8);
        assert_eq!(result.orders_spent, 8 * 24);
    }

    #[test]
    fn hashes_do_not_depend_on_monitor() {
        let scenario = ScenarioSpec::new("canonical", 1, 2).with_param("R", 5).build().unwrap();
        let strategy = StrategySpec::new("random").with_param("seed", 11);
        let mut on = RunOptions::new(15);
        on.hashes = true;
        let mut off = on;
        off.monitor = false;
        let a = run(&scenario, &strategy, &on).unwrap();
        let b = run(&scenario, &strategy, &off).unwrap();
        assert_eq!(a.hashes.len(), 16);
        assert_eq!(a.hashes, b.hashes);
        assert!(a.monitor.is_some() && b.monitor.is_none());
    }

    #[test]
    fn parallel_matches_sequential() {
        let scenario = ScenarioSpec::new("canonical", 2, 1).with_param("R", 4).build().unwrap();
        let jobs: Vec<_> = standard_strategies(3).into_iter().map(|s| (scenario.clone(), s)).collect();
        let opts = RunOptions::new(10);
        let par = run_parallel(&jobs, &opts);
        for ((scenario, strategy), res) in jobs.iter().zip(par) {
            let seq = run(scenario, strategy, &opts).unwrap();
            assert_eq!(res.unwrap().final_hash, seq.final_hash);
        }
    }
}
