//! Player strategies.
//!
//! A strategy sees only a [`StrategyContext`]: the game state, the config
//! and the budget available this turn. Anything else it needs (a seed, a
//! precomputed schedule) lives in its own state, so a run is reproduced by
//! rebuilding the strategy from its [`StrategySpec`].

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rustc_hash::FxHashSet;
use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};
use thiserror::Error;

use crate::engine::{GameConfig, GameState, ProtectionOrder};
use crate::fronts::{front_level_cells, FrontQuad};
use crate::lattice::{point_on_line, Cell, LatticeKind, DIRECTIONS};
use crate::scenarios::{critical_rate, pyramid_fire, pyramid_ring_quad};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum StrategyError {
    #[error("unknown strategy {0:?}")]
    Unknown(String),
    #[error("parameter {name:?}: {reason}")]
    BadParam { name: String, reason: String },
    #[error("pyramid cylinder needs the pyramid scenario for q = {q}, h = {h}")]
    NotPyramid { q: u8, h: u32 },
    #[error("budget rate {rate} does not exceed the critical rate {critical}")]
    RateTooLow { rate: String, critical: String },
    #[error("no feasible enclosure found up to gap {0}")]
    Infeasible(i64),
}

pub struct StrategyContext<'a> {
    pub state: &'a GameState,
    pub config: &'a GameConfig,
    /// `⌊c(t+1)⌋ - orders_spent`.
    pub budget: u64,
}

impl<'a> StrategyContext<'a> {
    pub fn new(state: &'a GameState, config: &'a GameConfig) -> Self {
        Self { state, config, budget: state.remaining_budget(config) }
    }

    fn kind(&self) -> LatticeKind {
        self.config.kind
    }

    fn is_free(&self, c: Cell) -> bool {
        !self.state.is_burning(c) && !self.state.is_protected(c)
    }
}

pub trait Strategy: Send {
    fn name(&self) -> &'static str;

    /// Orders for turn `ctx.state.t() + 1`. Never exceeds `ctx.budget`.
    fn decide(&mut self, ctx: &StrategyContext<'_>) -> Result<ProtectionOrder, StrategyError>;
}

/// `{"strategy": name, "params": {...}}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StrategySpec {
    pub strategy: String,
    #[serde(default)]
    pub params: Map<String, Value>,
}

impl StrategySpec {
    pub fn new(strategy: &str) -> Self {
        Self { strategy: strategy.to_string(), params: Map::new() }
    }

    pub fn with_param(mut self, key: &str, value: impl Into<Value>) -> Self {
        self.params.insert(key.to_string(), value.into());
        self
    }

    fn int(&self, key: &str) -> Result<Option<i64>, StrategyError> {
        match self.params.get(key) {
            None => Ok(None),
            Some(v) => v.as_i64().map(Some).ok_or_else(|| StrategyError::BadParam {
                name: key.into(),
                reason: format!("expected an integer, got {v}"),
            }),
        }
    }

    pub fn build(&self, config: &GameConfig) -> Result<Box<dyn Strategy>, StrategyError> {
        let kind = config.kind;
        Ok(match self.strategy.as_str() {
            "null" => Box::new(NullStrategy),
            "greedy" => Box::new(GreedyPerimeter),
            "random" => {
                let seed = self.int("seed")?.unwrap_or(0) as u64;
                Box::new(RandomStrategy::new(seed))
            }
            "wall" => {
                let direction = self.int("direction")?.unwrap_or(0);
                if !(0..DIRECTIONS as i64).contains(&direction) {
                    return Err(StrategyError::BadParam { name: "direction".into(), reason: "must be 0..=3".into() });
                }
                let distance = self.int("distance")?.unwrap_or(2);
                let layers: Vec<i32> = match self.params.get("layers") {
                    None => vec![1],
                    Some(v) => serde_json::from_value(v.clone()).map_err(|e| StrategyError::BadParam {
                        name: "layers".into(),
                        reason: e.to_string(),
                    })?,
                };
                if layers.is_empty() || layers.iter().any(|&k| !kind.contains_layer(k)) {
                    return Err(StrategyError::BadParam { name: "layers".into(), reason: "layer out of range".into() });
                }
                Box::new(WallStrategy::new(direction as usize, distance, layers))
            }
            "pyramid_cylinder" => Box::new(PyramidCylinder::new(config)?),
            "enclosure" => {
                let near = self.int("D")?.unwrap_or(1).max(1);
                Box::new(PerLayerEnclosure::new(config, near)?)
            }
            other => return Err(StrategyError::Unknown(other.to_string())),
        })
    }
}

/// Never protects anything.
pub struct NullStrategy;

impl Strategy for NullStrategy {
    fn name(&self) -> &'static str {
        "null"
    }

    fn decide(&mut self, _ctx: &StrategyContext<'_>) -> Result<ProtectionOrder, StrategyError> {
        Ok(ProtectionOrder::empty())
    }
}

/// Free cells next to the fire, those with the most burning neighbours first.
pub fn threatened_cells(ctx: &StrategyContext<'_>) -> Vec<(u32, Cell)> {
    let kind = ctx.kind();
    let mut seen = FxHashSet::default();
    let mut out = Vec::new();
    for &c in ctx.state.frontier() {
        kind.for_each_neighbor(c, |n| {
            if ctx.is_free(n) && seen.insert(n) {
                let mut count = 0;
                kind.for_each_neighbor(n, |m| count += u32::from(ctx.state.is_burning(m)));
                out.push((count, n));
            }
        });
    }
    out.sort_unstable_by(|a, b| b.0.cmp(&a.0).then(a.1.cmp(&b.1)));
    out
}

/// Spends the whole budget on the most threatened cells. Ties go to the
/// smaller cell in `(k, x, y)` order.
pub struct GreedyPerimeter;

impl Strategy for GreedyPerimeter {
    fn name(&self) -> &'static str {
        "greedy"
    }

    fn decide(&mut self, ctx: &StrategyContext<'_>) -> Result<ProtectionOrder, StrategyError> {
        if ctx.budget == 0 {
            return Ok(ProtectionOrder::empty());
        }
        let cells = threatened_cells(ctx)
            .into_iter()
            .take(ctx.budget as usize)
            .map(|(_, c)| c)
            .collect();
        Ok(ProtectionOrder::new(cells))
    }
}

/// Spends a uniformly random part of the budget on random cells next to the
/// newest burning cells.
pub struct RandomStrategy {
    rng: ChaCha8Rng,
}

impl RandomStrategy {
    pub fn new(seed: u64) -> Self {
        Self { rng: ChaCha8Rng::seed_from_u64(seed) }
    }
}

impl Strategy for RandomStrategy {
    fn name(&self) -> &'static str {
        "random"
    }

    fn decide(&mut self, ctx: &StrategyContext<'_>) -> Result<ProtectionOrder, StrategyError> {
        let frontier = ctx.state.frontier();
        if ctx.budget == 0 || frontier.is_empty() {
            return Ok(ProtectionOrder::empty());
        }
        let kind = ctx.kind();
        let want = self.rng.random_range(0..=ctx.budget) as usize;
        let mut chosen = FxHashSet::default();
        let mut scratch = Vec::with_capacity(10);
        let mut attempts = 0;
        while chosen.len() < want && attempts < 32 * want + 64 {
            attempts += 1;
            let c = frontier[self.rng.random_range(0..frontier.len())];
            scratch.clear();
            kind.for_each_neighbor(c, |n| scratch.push(n));
            let n = scratch[self.rng.random_range(0..scratch.len())];
            if ctx.is_free(n) {
                chosen.insert(n);
            }
        }
        let mut cells: Vec<Cell> = chosen.into_iter().collect();
        cells.sort_unstable();
        Ok(ProtectionOrder::new(cells))
    }
}

/// A straight line across direction `θ_i`, `distance` beyond the initial
/// fire, grown outwards from the middle in the chosen layers only. Uneven
/// layer coverage forces pulled levels and shifted cells.
pub struct WallStrategy {
    direction: usize,
    distance: i64,
    layers: Vec<i32>,
    line: Option<i64>,
    next_m: Vec<u64>,
}

impl WallStrategy {
    pub fn new(direction: usize, distance: i64, layers: Vec<i32>) -> Self {
        let next_m = vec![0; layers.len()];
        Self { direction, distance, layers, line: None, next_m }
    }
}

/// `0, 1, -1, 2, -2, ...`
fn zigzag(n: u64) -> i64 {
    let half = n.div_ceil(2) as i64;
    if n % 2 == 1 {
        half
    } else {
        -half
    }
}

impl Strategy for WallStrategy {
    fn name(&self) -> &'static str {
        "wall"
    }

    fn decide(&mut self, ctx: &StrategyContext<'_>) -> Result<ProtectionOrder, StrategyError> {
        let kind = ctx.kind();
        let i = self.direction;
        let line = *self.line.get_or_insert_with(|| {
            let u = kind.direction(i);
            let reach = ctx
                .config
                .initial_fire
                .iter()
                .map(|c| i64::from(u.coordinate(c.x, c.y)))
                .max()
                .unwrap_or(0);
            reach + self.distance
        });
        let mut budget = ctx.budget;
        let mut cells = Vec::new();
        // Round-robin over layers so each gets a similar share.
        let mut idle_rounds = 0;
        while budget > 0 && idle_rounds < 4 * kind.h() as usize + 8 {
            let mut progressed = false;
            for (slot, &k) in self.layers.iter().enumerate() {
                if budget == 0 {
                    break;
                }
                // Skip lattice gaps and cells already taken; bounded scan.
                for _ in 0..8 {
                    let m = zigzag(self.next_m[slot]);
                    self.next_m[slot] += 1;
                    if let Some(c) = point_on_line(kind, i, line, m, k) {
                        if ctx.is_free(c) {
                            cells.push(c);
                            budget -= 1;
                            progressed = true;
                            break;
                        }
                    }
                }
            }
            idle_rounds = if progressed { 0 } else { idle_rounds + 1 };
        }
        Ok(ProtectionOrder::new(cells))
    }
}

/// Protection cylinder around the pyramid: at turn `t ≤ h` the ring around
/// the base footprint in layer `t`.
pub struct PyramidCylinder {
    quad: FrontQuad,
}

impl PyramidCylinder {
    pub fn new(config: &GameConfig) -> Result<Self, StrategyError> {
        let kind = config.kind;
        let mismatch = || StrategyError::NotPyramid { q: kind.q(), h: kind.h() };
        let (fire, r) = pyramid_fire(kind.q(), kind.h()).map_err(|_| mismatch())?;
        if fire != config.initial_fire {
            return Err(mismatch());
        }
        let quad = pyramid_ring_quad(kind.q(), kind.h(), r).map_err(|_| mismatch())?;
        Ok(Self { quad })
    }

    /// Ring cells for layer `k`.
    pub fn ring(&self, kind: LatticeKind, k: i32) -> Vec<Cell> {
        let mut cells: Vec<Cell> = (0..DIRECTIONS).flat_map(|i| front_level_cells(&self.quad, i, k, kind)).collect();
        cells.sort_unstable();
        cells
    }
}

impl Strategy for PyramidCylinder {
    fn name(&self) -> &'static str {
        "pyramid_cylinder"
    }

    fn decide(&mut self, ctx: &StrategyContext<'_>) -> Result<ProtectionOrder, StrategyError> {
        let kind = ctx.kind();
        let layer = ctx.state.t() as i32 + 1;
        if !kind.contains_layer(layer) {
            return Ok(ProtectionOrder::empty());
        }
        let cells: Vec<Cell> = self
            .ring(kind, layer)
            .into_iter()
            .filter(|&c| ctx.is_free(c))
            .take(ctx.budget as usize)
            .collect();
        Ok(ProtectionOrder::new(cells))
    }
}

/// A closed wall, identical in every layer, around the horizontal
/// projection of the fire.
///
/// The wall is the outer boundary of a fronts-shaped region whose sides sit
/// at different gaps from the fire box: close on one side and further out
/// on the others, so that cells are needed roughly as fast as the budget
/// accrues. Each wall cell gets a deadline, the earliest turn the fire could
/// reach it horizontally; cells are protected in deadline order, and the
/// near gap and the assumed fire box are widened, with the other gaps
/// re-derived, until every deadline can be met.
pub struct PerLayerEnclosure {
    near: i64,
    plan: Option<EnclosurePlan>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EnclosurePlan {
    pub gaps: [i64; 4],
    /// Horizontal wall cells (layer 1) with their deadlines, in deadline order.
    pub wall: Vec<(u32, Cell)>,
    next: usize,
}

impl PerLayerEnclosure {
    pub fn new(config: &GameConfig, near: i64) -> Result<Self, StrategyError> {
        let critical = critical_rate(config.kind);
        let rate = config.budget_rate;
        let above = u128::from(rate.numerator()) * u128::from(critical.denominator())
            > u128::from(critical.numerator()) * u128::from(rate.denominator());
        if !above {
            return Err(StrategyError::RateTooLow { rate: rate.to_string(), critical: critical.to_string() });
        }
        Ok(Self { near, plan: None })
    }

    pub fn plan(&self) -> Option<&EnclosurePlan> {
        self.plan.as_ref()
    }
}

/// Largest coordinate of `cells` along each direction.
fn reach(kind: LatticeKind, cells: impl Iterator<Item = Cell>) -> [i64; 4] {
    let mut e = [i64::MIN; 4];
    for c in cells {
        for (i, slot) in e.iter_mut().enumerate() {
            *slot = (*slot).max(i64::from(kind.direction(i).coordinate(c.x, c.y)));
        }
    }
    e
}

/// Gaps from the budget margin in per-layer king units, with the nearest
/// side `near` away from the fire box and the box widened by `pad`.
fn initial_gaps(kind: LatticeKind, rate: f64, e: &[i64; 4], near: i64, pad: i64) -> [i64; 4] {
    let c = 2.0 * rate / (kind.q() as f64 * kind.h() as f64);
    let eps = (c - 3.0).max(1e-3);
    let w = ((e[0] + e[2]).max(e[1] + e[3]) + 1 + pad) as f64;
    let y = near as f64;
    let x = ((y + 2.0 + w) / eps).ceil();
    let x2 = ((x + 2.0 * y + 3.0 + w) / eps).ceil();
    let y2 = (2.0 * (x + x2 + y + 2.0 * w + 4.0) / (c - 2.0)).ceil();
    [y, x, y2, x2].map(|g| (g as i64).max(near))
}

fn wall_for(kind: LatticeKind, e: &[i64; 4], gaps: &[i64; 4], t0: u32) -> Option<Vec<(u32, Cell)>> {
    let radii: [Vec<i64>; 4] = std::array::from_fn(|i| vec![e[i] + gaps[i]; kind.h() as usize]);
    let quad = FrontQuad::new(radii).ok()?;
    let mut wall = Vec::new();
    for i in 0..DIRECTIONS {
        for c in front_level_cells(&quad, i, 1, kind) {
            let dist = (0..DIRECTIONS)
                .map(|j| i64::from(kind.direction(j).coordinate(c.x, c.y)) - e[j])
                .max()
                .unwrap_or(0);
            wall.push((t0 + dist.max(1) as u32, c));
        }
    }
    wall.sort_unstable();
    Some(wall)
}

/// Every prefix of the deadline order fits the budget accrued by then.
fn schedulable(wall: &[(u32, Cell)], h: u64, config: &GameConfig, spent: u64) -> bool {
    let mut need = 0u64;
    for (idx, &(deadline, _)) in wall.iter().enumerate() {
        need += h;
        let last_of_deadline = wall.get(idx + 1).is_none_or(|n| n.0 != deadline);
        if last_of_deadline && need > config.budget_rate.allowance(deadline).saturating_sub(spent) {
            return false;
        }
    }
    true
}

const MAX_GAP: i64 = 1 << 16;

impl PerLayerEnclosure {
    fn build_plan(&self, ctx: &StrategyContext<'_>) -> Result<EnclosurePlan, StrategyError> {
        let kind = ctx.kind();
        let fire: Vec<Cell> = ctx.state.burning_iter().collect();
        let e = reach(kind, fire.into_iter());
        let rate = ctx.config.budget_rate.as_f64();
        let mut pad = 0;
        let t0 = ctx.state.t();
        loop {
            let gaps = initial_gaps(kind, rate, &e, self.near + pad, pad);
            if let Some(wall) = wall_for(kind, &e, &gaps, t0) {
                if schedulable(&wall, u64::from(kind.h()), ctx.config, ctx.state.orders_spent()) {
                    return Ok(EnclosurePlan { gaps, wall, next: 0 });
                }
            }
            if gaps.iter().any(|&g| g > MAX_GAP) {
                return Err(StrategyError::Infeasible(MAX_GAP));
            }
            pad += pad / 4 + 1;
        }
    }
}

impl Strategy for PerLayerEnclosure {
    fn name(&self) -> &'static str {
        "enclosure"
    }

    fn decide(&mut self, ctx: &StrategyContext<'_>) -> Result<ProtectionOrder, StrategyError> {
        if self.plan.is_none() {
            self.plan = Some(self.build_plan(ctx)?);
        }
        let plan = self.plan.as_mut().expect("plan built");
        let kind = ctx.kind();
        let mut budget = ctx.budget;
        let mut cells = Vec::new();
        while let Some(&(_, base)) = plan.wall.get(plan.next) {
            let copies: Vec<Cell> = (1..=kind.h() as i32)
                .map(|k| base.with_layer(k))
                .filter(|&c| ctx.is_free(c))
                .collect();
            if copies.len() as u64 > budget {
                break;
            }
            budget -= copies.len() as u64;
            cells.extend(copies);
            plan.next += 1;
        }
        Ok(ProtectionOrder::new(cells))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::engine::{new_game, BudgetRate};
    use crate::scenarios::ScenarioSpec;

    fn play(config: &GameConfig, spec: &StrategySpec, steps: u32) -> GameState {
        let mut strategy = spec.build(config).unwrap();
        let mut game = new_game(config).unwrap();
        for _ in 0..steps {
            let ctx = StrategyContext::new(&game, config);
            let order = strategy.decide(&ctx).unwrap();
            assert!(order.len() as u64 <= ctx.budget);
            game.apply(&order, config).unwrap();
            if game.contained() {
                break;
            }
        }
        game
    }

    fn single(q: u8, h: u32, c: u64) -> GameConfig {
        GameConfig::new(LatticeKind::new(q, h).unwrap(), BudgetRate::integer(c), vec![Cell::new(0, 0, 1)])
    }

    #[test]
    fn null_is_empty() {
        let cfg = single(2, 1, 5);
        let game = new_game(&cfg).unwrap();
        let order = NullStrategy.decide(&StrategyContext::new(&game, &cfg)).unwrap();
        assert!(order.is_empty());
    }

    #[test]
    fn greedy_takes_the_ring() {
        let cfg = single(2, 1, 8);
        let game = new_game(&cfg).unwrap();
        let order = GreedyPerimeter.decide(&StrategyContext::new(&game, &cfg)).unwrap();
        let mut expected: Vec<Cell> = Vec::new();
        cfg.kind.for_each_neighbor(Cell::new(0, 0, 1), |n| expected.push(n));
        expected.sort_unstable();
        assert_eq!(order.cells, expected);
        let game = play(&cfg, &StrategySpec::new("greedy"), 3);
        assert!(game.contained());
        assert_eq!(game.burning_count(), 1);
    }

    #[test]
    fn greedy_prefers_shared_neighbours() {
        let kind = LatticeKind::new(2, 1).unwrap();
        let cfg = GameConfig::new(kind, BudgetRate::integer(3), vec![Cell::new(0, 0, 1), Cell::new(1, 0, 1)]);
        let game = new_game(&cfg).unwrap();
        let order = GreedyPerimeter.decide(&StrategyContext::new(&game, &cfg)).unwrap();
        assert_eq!(order.cells, vec![Cell::new(0, -1, 1), Cell::new(0, 1, 1), Cell::new(1, -1, 1)]);
        assert!(GreedyPerimeter
            .decide(&StrategyContext::new(&game, &single(2, 1, 0)))
            .unwrap()
            .is_empty());
    }

    #[test]
    fn random_is_seeded() {
        let cfg = ScenarioSpec::new("canonical", 2, 2).with_param("R", 4).with_param("c", 6).build().unwrap().config;
        let a = play(&cfg, &StrategySpec::new("random").with_param("seed", 7), 10);
        let b = play(&cfg, &StrategySpec::new("random").with_param("seed", 7), 10);
        assert_eq!(a.state_hash(), b.state_hash());
        let c = play(&cfg, &StrategySpec::new("random").with_param("seed", 8), 10);
        assert_ne!(a.state_hash(), c.state_hash());
    }

    #[test]
    fn zigzag_order() {
        assert_eq!((0..5).map(zigzag).collect::<Vec<_>>(), vec![0, 1, -1, 2, -2]);
    }

    #[test]
    fn wall_only_touches_chosen_layers() {
        let cfg = ScenarioSpec::new("canonical", 1, 3).with_param("R", 3).with_param("c", 4).build().unwrap().config;
        let spec = StrategySpec::new("wall").with_param("direction", 1).with_param("layers", serde_json::json!([2]));
        let game = play(&cfg, &spec, 6);
        assert!(game.protected_count() > 0);
        assert!(game.protected_iter().all(|c| c.k == 2));
        assert!(StrategySpec::new("wall").with_param("layers", serde_json::json!([4])).build(&cfg).is_err());
    }

    #[test]
    fn pyramid_cylinder_contains_at_h() {
        for (q, h, ring) in [(2u8, 8u32, 24usize), (1, 8, 12), (2, 16, 48), (1, 16, 24), (1, 24, 36)] {
            let scenario = ScenarioSpec::new("pyramid", q, h).build().unwrap();
            let cfg = scenario.config;
            let mut strategy = PyramidCylinder::new(&cfg).unwrap();
            assert_eq!(strategy.ring(cfg.kind, 1).len(), ring);
            let mut game = new_game(&cfg).unwrap();
            for t in 1..=h {
                let order = strategy.decide(&StrategyContext::new(&game, &cfg)).unwrap();
                game.apply(&order, &cfg).unwrap();
                assert_eq!(game.contained(), t == h, "q={q} h={h} t={t}");
            }
            assert!(strategy.decide(&StrategyContext::new(&game, &cfg)).unwrap().is_empty());
        }
    }

    #[test]
    fn pyramid_cylinder_rejects_other_fires() {
        let cfg = single(2, 8, 24);
        assert!(matches!(PyramidCylinder::new(&cfg), Err(StrategyError::NotPyramid { .. })));
    }

    #[test]
    fn enclosure_refuses_critical_rate() {
        assert!(matches!(
            StrategySpec::new("enclosure").build(&single(2, 1, 3)),
            Err(StrategyError::RateTooLow { .. })
        ));
        let cfg = GameConfig::new(LatticeKind::new(1, 2).unwrap(), BudgetRate::new(3, 1).unwrap(), vec![Cell::new(0, 0, 1)]);
        assert!(StrategySpec::new("enclosure").build(&cfg).is_err());
    }

    fn contains_with_enclosure(cfg: &GameConfig, steps: u32) -> GameState {
        let game = play(cfg, &StrategySpec::new("enclosure").with_param("D", 20), steps);
        assert!(game.contained(), "not contained by t={}", game.t());
        game
    }

    #[test]
    fn enclosure_contains_single_fire() {
        contains_with_enclosure(&single(2, 1, 4), 2000);
        contains_with_enclosure(&single(1, 1, 2), 2000);
    }

    #[test]
    fn enclosure_is_layer_symmetric() {
        let cfg = single(2, 2, 8);
        let game = contains_with_enclosure(&cfg, 2000);
        let layer = |k| {
            let mut v: Vec<(i32, i32)> = game.protected_iter().filter(|c| c.k == k).map(|c| (c.x, c.y)).collect();
            v.sort_unstable();
            v
        };
        assert_eq!(layer(1), layer(2));
    }

    #[test]
    fn spec_round_trip() {
        let spec = StrategySpec::new("random").with_param("seed", 3);
        let text = serde_json::to_string(&spec).unwrap();
        assert_eq!(text, r#"{"strategy":"random","params":{"seed":3}}"#);
        assert_eq!(serde_json::from_str::<StrategySpec>(&text).unwrap(), spec);
        assert!(matches!(StrategySpec::new("human").build(&single(2, 1, 1)), Err(StrategyError::Unknown(_))));
    }
}
