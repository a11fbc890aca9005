//! Runtime verification of the growth inequalities.
//!
//! The monitor reads the game, the fronts tracker and each [`StepRecord`]
//! and never writes to any of them. Every check produces a pass, a failure,
//! or a skip when its precondition does not hold. Only counts are kept by
//! default; failures are always stored, and every report is stored on
//! request for NDJSON export.

use std::collections::BTreeMap;
use std::io::{self, Write};

use serde::{Deserialize, Serialize};

use crate::engine::GameState;
use crate::fronts::{is_lipschitz, FrontsTracker, StepRecord};
use crate::lattice::{for_each_level_cell, point_on_line, Cell, LatticeKind, LevelSpec, DIRECTIONS};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CheckStatus {
    Passed,
    Failed,
    Skipped,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Relation {
    #[serde(rename = ">=")]
    Ge,
    #[serde(rename = ">")]
    Gt,
    #[serde(rename = "==")]
    Eq,
    #[serde(rename = "<=")]
    Le,
}

impl Relation {
    pub fn holds(self, lhs: i64, rhs: i64) -> bool {
        match self {
            Relation::Ge => lhs >= rhs,
            Relation::Gt => lhs > rhs,
            Relation::Eq => lhs == rhs,
            Relation::Le => lhs <= rhs,
        }
    }
}

/// Where a check applies. Absent fields are omitted from JSON.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Location {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub i: Option<u8>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub j: Option<u8>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub k: Option<u32>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub s: Option<u32>,
}

impl Location {
    pub fn global() -> Self {
        Self::default()
    }

    pub fn front(i: usize) -> Self {
        Self { i: Some(i as u8), ..Self::default() }
    }

    pub fn level(i: usize, k: u32) -> Self {
        Self { i: Some(i as u8), k: Some(k), ..Self::default() }
    }

    pub fn layer(k: u32) -> Self {
        Self { k: Some(k), ..Self::default() }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CheckReport {
    pub name: String,
    pub t: u32,
    pub location: Location,
    pub lhs: i64,
    pub relation: Relation,
    pub rhs: i64,
    pub status: CheckStatus,
    pub passed: bool,
    #[serde(default, skip_serializing_if = "String::is_empty")]
    pub context: String,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Counts {
    pub passed: u64,
    pub failed: u64,
    pub skipped: u64,
}

/// `{check: {passed, failed, skipped}}`.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct MonitorSummary {
    pub checks: BTreeMap<String, Counts>,
}

impl MonitorSummary {
    pub fn failed(&self) -> u64 {
        self.checks.values().map(|c| c.failed).sum()
    }

    pub fn passed(&self) -> u64 {
        self.checks.values().map(|c| c.passed).sum()
    }

    pub fn get(&self, name: &str) -> Counts {
        self.checks.get(name).copied().unwrap_or_default()
    }

    pub fn merge(&mut self, other: &MonitorSummary) {
        for (name, c) in &other.checks {
            let e = self.checks.entry(name.clone()).or_default();
            e.passed += c.passed;
            e.failed += c.failed;
            e.skipped += c.skipped;
        }
    }
}

/// Check identifiers.
pub mod names {
    pub const FOGARTY: &str = "fogarty_growth";
    pub const OVERFLOW: &str = "vertical_overflow";
    pub const VERTICAL_GROWTH: &str = "vertical_growth";
    pub const POTENTIAL_LEVEL: &str = "potential_growth_level";
    pub const POTENTIAL_FRONT: &str = "potential_growth_front";
    pub const POTENTIAL_LEVEL_RECOUNT: &str = "potential_growth_level_recounted";
    pub const POTENTIAL_FRONT_RECOUNT: &str = "potential_growth_front_recounted";
    pub const MU_VS_PHI: &str = "potential_exceeds_fierity";
    pub const MU_CONSERVATION: &str = "potential_conservation";
    pub const DP_SUM: &str = "shift_balance_sum";
    pub const DP_SMALL: &str = "shift_balance_small";
    pub const DP_NONNEG: &str = "shift_balance_nonnegative";
    pub const INVASION: &str = "shift_direction";
    pub const SHIFT_CLOSED: &str = "shift_closed_form";
    pub const SHIFT_SINGLETON: &str = "shift_at_most_one";
    pub const LIPSCHITZ: &str = "front_lipschitz";
    pub const MONOTONE: &str = "front_monotone";
    pub const PULL: &str = "front_pull_norm";
    pub const DISJOINT: &str = "front_disjoint";
    pub const ACTIVITY_ZERO: &str = "activity_zero_when_cold";
    pub const ACTIVITY_ONE: &str = "activity_one_when_hot";
    pub const PULL_TYPICAL: &str = "pulled_growth_typical";
    pub const PULL_RESETS: &str = "pulled_no_slowdown";
    pub const FIERITY_UPPER: &str = "fierity_upper_bound";
    pub const TWO_ADJACENT: &str = "fierity_of_two_adjacent";
    pub const TWO_OPPOSING: &str = "fierity_of_two_opposing";
    pub const SLOWDOWN_ENDS: &str = "slowdown_window";
    pub const HIGH_FIERITY: &str = "high_fierity_window";
    pub const HYPOTHESIS: &str = "induction_hypothesis";
    pub const LOWER_BOUND: &str = "lower_bound";
    pub const LENGTH_BOUND: &str = "level_length_bound";
}

/// One point of the induction-hypothesis history.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct HypothesisPoint {
    pub t: u32,
    pub phi_plus_f: i64,
    pub bound: i64,
    pub holds: bool,
    pub weak_holds: bool,
    pub budget_ok: bool,
}

/// Tracks `H(t): φ(t) + f(t) ≥ 3qht + λ + 52h⁵` and the weaker
/// `φ(t) + f(t) ≥ 3qht`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct HypothesisTracker {
    pub lambda: i64,
    pub phi0: i64,
    /// `φ(0) ≥ λ + 55h⁵`.
    pub large_initial: bool,
    /// Budget rate at most `(3/2)qh`.
    pub rate_ok: bool,
    q: i64,
    h: i64,
    pub history: Vec<HypothesisPoint>,
    pub first_violation: Option<u32>,
    pub first_weak_violation: Option<u32>,
    /// `f(s) ≤ (3qh/2)s` for every recorded `s`.
    pub budget_ok: bool,
}

impl HypothesisTracker {
    pub fn new(kind: LatticeKind, lambda: i64, phi0: i64, rate_ok: bool) -> Self {
        let (q, h) = (kind.q_i64(), kind.h_i64());
        Self {
            lambda,
            phi0,
            large_initial: phi0 >= lambda + 55 * h.pow(5),
            rate_ok,
            q,
            h,
            history: Vec::new(),
            first_violation: None,
            first_weak_violation: None,
            budget_ok: true,
        }
    }

    pub fn armed(&self) -> bool {
        self.large_initial && self.rate_ok
    }

    pub fn bound(&self, t: u32) -> i64 {
        3 * self.q * self.h * i64::from(t) + self.lambda + 52 * self.h.pow(5)
    }

    pub fn weak_bound(&self, t: u32) -> i64 {
        3 * self.q * self.h * i64::from(t)
    }

    pub fn record(&mut self, t: u32, phi: i64, f: i64) -> HypothesisPoint {
        let total = phi + f;
        self.budget_ok &= 2 * f <= 3 * self.q * self.h * i64::from(t);
        let point = HypothesisPoint {
            t,
            phi_plus_f: total,
            bound: self.bound(t),
            holds: total >= self.bound(t),
            weak_holds: total >= self.weak_bound(t),
            budget_ok: self.budget_ok,
        };
        if !point.holds && self.first_violation.is_none() {
            self.first_violation = Some(t);
        }
        if !point.weak_holds && self.first_weak_violation.is_none() {
            self.first_weak_violation = Some(t);
        }
        self.history.push(point);
        point
    }

    pub fn holds_at(&self, t: u32) -> bool {
        self.history.get(t as usize).is_some_and(|p| p.holds)
    }
}

/// A witness `(s₀..s₃)` that controls time `s`, if one exists.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ControlWitness {
    pub s: u32,
    pub witness: Option<[u32; 4]>,
}

pub struct Monitor {
    kind: LatticeKind,
    record_all: bool,
    counts: BTreeMap<&'static str, Counts>,
    failures: Vec<CheckReport>,
    reports: Vec<CheckReport>,
    hypothesis: Option<HypothesisTracker>,
}

impl Monitor {
    pub fn new(kind: LatticeKind, hypothesis: Option<HypothesisTracker>) -> Self {
        Self {
            kind,
            record_all: false,
            counts: BTreeMap::new(),
            failures: Vec::new(),
            reports: Vec::new(),
            hypothesis,
        }
    }

    /// Keep every report, not only failures.
    pub fn record_all(mut self, on: bool) -> Self {
        self.record_all = on;
        self
    }

    pub fn hypothesis(&self) -> Option<&HypothesisTracker> {
        self.hypothesis.as_ref()
    }

    pub fn failures(&self) -> &[CheckReport] {
        &self.failures
    }

    pub fn reports(&self) -> &[CheckReport] {
        &self.reports
    }

    pub fn summary(&self) -> MonitorSummary {
        MonitorSummary {
            checks: self.counts.iter().map(|(k, v)| (k.to_string(), *v)).collect(),
        }
    }

    pub fn failure_count(&self) -> u64 {
        self.counts.values().map(|c| c.failed).sum()
    }

    #[allow(clippy::too_many_arguments)]
    fn record(
        &mut self,
        name: &'static str,
        t: u32,
        location: Location,
        lhs: i64,
        relation: Relation,
        rhs: i64,
        context: impl FnOnce() -> String,
    ) -> bool {
        let passed = relation.holds(lhs, rhs);
        let entry = self.counts.entry(name).or_default();
        if passed {
            entry.passed += 1;
        } else {
            entry.failed += 1;
        }
        if !passed || self.record_all {
            let report = CheckReport {
                name: name.to_string(),
                t,
                location,
                lhs,
                relation,
                rhs,
                status: if passed { CheckStatus::Passed } else { CheckStatus::Failed },
                passed,
                context: context(),
            };
            if !passed {
                self.failures.push(report.clone());
            }
            if self.record_all {
                self.reports.push(report);
            }
        }
        passed
    }

    fn skip(&mut self, name: &'static str, t: u32, location: Location, reason: &'static str) {
        self.counts.entry(name).or_default().skipped += 1;
        if self.record_all {
            self.reports.push(CheckReport {
                name: name.to_string(),
                t,
                location,
                lhs: 0,
                relation: Relation::Ge,
                rhs: 0,
                status: CheckStatus::Skipped,
                passed: false,
                context: reason.to_string(),
            });
        }
    }

    /// Checks that only need the state at time 0.
    pub fn observe_initial(&mut self, tracker: &FrontsTracker) {
        self.check_hypothesis(tracker, 0);
        self.check_length_bound(tracker, 0);
    }

    /// Run every check for the step that produced `record`. `game` and
    /// `tracker` must already be at `record.t`.
    pub fn observe(&mut self, record: &StepRecord, tracker: &FrontsTracker, game: &GameState) {
        let t = record.t;
        self.check_front_shape(record);
        self.check_disjoint(record);
        self.check_shifts(record);
        self.check_shift_balance(tracker, t);
        self.check_potential(record, tracker, game);
        self.check_activity(tracker, t);
        self.check_fogarty(record, game);
        self.check_vertical(record, tracker);
        self.check_pulled(record, tracker, t);
        self.check_fierity_upper(tracker, t);
        self.check_length_bound(tracker, t);
        self.check_hypothesis(tracker, t);
        self.check_fierity_of_two(tracker, t);
        self.check_windows(tracker, t);
    }

    fn check_front_shape(&mut self, rec: &StepRecord) {
        let t = rec.t;
        for i in 0..DIRECTIONS {
            let new = &rec.new.rho[i];
            let old = &rec.prev.rho[i];
            let lipschitz = is_lipschitz(new);
            self.record(names::LIPSCHITZ, t, Location::front(i), i64::from(lipschitz), Relation::Eq, 1, || {
                format!("rho={new:?}")
            });
            let shrunk = new.iter().zip(old).filter(|(n, o)| n < o).count() as i64;
            self.record(names::MONOTONE, t, Location::front(i), shrunk, Relation::Eq, 0, || {
                format!("prev={old:?} new={new:?}")
            });
            let alpha = &rec.new.alpha_last[i];
            let dr: i64 = new.iter().sum::<i64>() - old.iter().sum::<i64>();
            let a: i64 = alpha.iter().map(|&x| i64::from(x)).sum();
            let norm: i64 = new
                .iter()
                .zip(old)
                .zip(alpha)
                .map(|((n, o), &x)| (n - o - i64::from(x)).abs())
                .sum();
            self.record(names::PULL, t, Location::front(i), dr - a, Relation::Eq, norm, || {
                format!("dr={dr} a={a}")
            });
        }
    }

    fn check_disjoint(&mut self, rec: &StepRecord) {
        let kind = self.kind;
        for k in 1..=kind.h() {
            let mut overlaps = 0i64;
            for i in 0..DIRECTIONS {
                let spec = rec.new.level_spec(i, k as i32);
                for_each_level_cell(spec, kind, |c| {
                    for j in 0..DIRECTIONS {
                        if j != i && rec.new.contains(j, k as i32, kind, c) {
                            overlaps += 1;
                        }
                    }
                });
            }
            self.record(names::DISJOINT, rec.t, Location::layer(k), overlaps, Relation::Eq, 0, String::new);
        }
    }

    fn check_shifts(&mut self, rec: &StepRecord) {
        let t = rec.t;
        let h = self.kind.h() as usize;
        for i in 0..DIRECTIONS {
            for k in 0..h {
                let loc = Location::level(i, k as u32 + 1);
                let set = &rec.shifted[i][k];
                let closed = &rec.shifted_closed[i][k];
                let diff = sym_diff(&set.minus, &closed.minus) + sym_diff(&set.plus, &closed.plus);
                self.record(names::SHIFT_CLOSED, t, loc, diff, Relation::Eq, 0, || {
                    format!("set={set:?} closed={closed:?}")
                });
                let largest = set.minus.len().max(set.plus.len()) as i64;
                self.record(names::SHIFT_SINGLETON, t, loc, largest, Relation::Le, 1, || format!("{set:?}"));

                let dr = rec.new.rho[i][k] - rec.prev.rho[i][k];
                let (left, right) = ((i + 3) % DIRECTIONS, (i + 1) % DIRECTIONS);
                let stray = if dr == 0 {
                    set.minus.len() + set.plus.len()
                } else {
                    rec.shifted[left][k].plus.len() + rec.shifted[right][k].minus.len()
                } as i64;
                self.record(names::INVASION, t, loc, stray, Relation::Eq, 0, || format!("dr={dr}"));
            }
        }
    }

    fn check_shift_balance(&mut self, tracker: &FrontsTracker, t: u32) {
        for k in 1..=self.kind.h() {
            let mut sum = 0;
            for i in 0..DIRECTIONS {
                let row = *tracker.row(t, i, k).expect("row exists");
                sum += row.dp;
                let loc = Location::level(i, k);
                self.record(names::DP_SMALL, t, loc, row.dp.abs(), Relation::Le, 2, String::new);
                if row.dr == 1 {
                    self.record(names::DP_NONNEG, t, loc, row.dp, Relation::Ge, 0, String::new);
                } else {
                    self.skip(names::DP_NONNEG, t, loc, "level did not advance");
                }
            }
            self.record(names::DP_SUM, t, Location::layer(k), sum, Relation::Eq, 0, String::new);
        }
    }

    /// Shifted-in cells of level `(i, k)` that were already protected, and
    /// so already counted by the neighbouring front, before this step.
    fn recounted(rec: &StepRecord, game: &GameState, i: usize, k: usize) -> i64 {
        let (left, right) = ((i + 3) % DIRECTIONS, (i + 1) % DIRECTIONS);
        rec.shifted[left][k]
            .plus
            .iter()
            .chain(&rec.shifted[right][k].minus)
            .filter(|&&c| game.protected_at(c, rec.t - 1))
            .count() as i64
    }

    fn check_potential(&mut self, rec: &StepRecord, tracker: &FrontsTracker, game: &GameState) {
        let t = rec.t;
        let (q, h) = (self.kind.q_i64(), self.kind.h_i64());
        for i in 0..DIRECTIONS {
            let mut front_recount = 0;
            for k in 1..=self.kind.h() {
                let row = *tracker.row(t, i, k).expect("row exists");
                let prev = *tracker.row(t - 1, i, k).expect("row exists");
                let dmu = row.mu - prev.mu;
                let recount = Self::recounted(rec, game, i, k as usize - 1);
                front_recount += recount;
                let loc = Location::level(i, k);
                let floor = q * i64::from(row.a);
                self.record(names::POTENTIAL_LEVEL, t, loc, dmu, Relation::Ge, floor, || {
                    format!("phi {}->{} df={} dp={} a={} recounted={recount}", prev.phi, row.phi, row.df, row.dp, row.a)
                });
                self.record(names::POTENTIAL_LEVEL_RECOUNT, t, loc, dmu + recount, Relation::Ge, floor, String::new);
            }
            let tot = *tracker.totals(t, i).expect("totals exist");
            let prev = *tracker.totals(t - 1, i).expect("totals exist");
            let dmu = tot.mu - prev.mu;
            self.record(names::POTENTIAL_FRONT, t, Location::front(i), dmu, Relation::Ge, q * tot.dr, || {
                format!("dr={} a={} pulled={:?} recounted={front_recount}", tot.dr, tot.a, rec.pulled[i])
            });
            self.record(
                names::POTENTIAL_FRONT_RECOUNT,
                t,
                Location::front(i),
                dmu + front_recount,
                Relation::Ge,
                q * tot.dr,
                String::new,
            );
            self.record(
                names::MU_VS_PHI,
                t,
                Location::front(i),
                tot.mu,
                Relation::Gt,
                tot.phi - 4 * q * h.pow(5),
                String::new,
            );
        }
        let mu = tracker.mu(t).expect("totals exist");
        let phi_f = tracker.phi(t).expect("totals exist") + tracker.f(t).expect("totals exist");
        self.record(names::MU_CONSERVATION, t, Location::global(), mu, Relation::Eq, phi_f, String::new);
    }

    fn check_activity(&mut self, tracker: &FrontsTracker, t: u32) {
        let (q, h) = (self.kind.q_i64(), self.kind.h_i64());
        let alpha = tracker.next_alpha().clone();
        for (i, front) in alpha.iter().enumerate() {
            for k in 1..=self.kind.h() {
                let row = *tracker.row(t, i, k).expect("row exists");
                let a = i64::from(front[k as usize - 1]);
                let loc = Location::level(i, k);
                if row.phi == 0 {
                    self.record(names::ACTIVITY_ZERO, t, loc, a, Relation::Eq, 0, String::new);
                } else {
                    self.skip(names::ACTIVITY_ZERO, t, loc, "level burning");
                }
                if row.phi > 4 * q * h.pow(4) - 2 {
                    self.record(names::ACTIVITY_ONE, t, loc, a, Relation::Eq, 1, || format!("phi={}", row.phi));
                } else {
                    self.skip(names::ACTIVITY_ONE, t, loc, "fierity below threshold");
                }
            }
        }
    }

    /// Within-layer growth and vertical overflow, recounted from the game.
    fn check_fogarty(&mut self, rec: &StepRecord, game: &GameState) {
        let kind = self.kind;
        let q = kind.q_i64();
        let t = rec.t;
        let hot = |c| game.burning_at(c, t) || game.protected_at(c, t);
        for i in 0..DIRECTIONS {
            for k in 1..=kind.h() as i32 {
                let spec = rec.prev.level_spec(i, k);
                let mut burning = 0i64;
                for_each_level_cell(spec, kind, |c| burning += i64::from(game.burning_at(c, t - 1)));
                let loc = Location::level(i, k as u32);
                if burning == 0 {
                    self.skip(names::FOGARTY, t, loc, "level not burning");
                    continue;
                }
                for (dm, dp) in [(0, 0), (0, 1), (1, 0), (1, 1)] {
                    let target = LevelSpec::new(i, spec.d + 1, spec.a + dm, spec.b + dp, k);
                    let mut grown = 0i64;
                    for_each_level_cell(target, kind, |c| grown += i64::from(hot(c)));
                    if dm == 0 {
                        if let Some(c) = point_on_line(kind, i, spec.d, -spec.a, k) {
                            grown += i64::from(hot(c));
                        }
                    }
                    if dp == 0 {
                        if let Some(c) = point_on_line(kind, i, spec.d + 1, spec.b, k) {
                            grown += i64::from(hot(c));
                        }
                    }
                    self.record(names::FOGARTY, t, loc, grown, Relation::Ge, burning + q, || {
                        format!("delta=({dm},{dp}) level=(d={},a={},b={})", spec.d, spec.a, spec.b)
                    });
                }
                for l in [k - 1, k + 1] {
                    if !kind.contains_layer(l) {
                        continue;
                    }
                    let mut reached = 0i64;
                    for_each_level_cell(spec.on_layer(l), kind, |c| reached += i64::from(hot(c)));
                    self.record(names::OVERFLOW, t, Location::level(i, l as u32), reached, Relation::Ge, burning, || {
                        format!("from layer {k}")
                    });
                }
            }
        }
    }

    fn check_vertical(&mut self, rec: &StepRecord, tracker: &FrontsTracker) {
        let t = rec.t;
        let h = self.kind.h();
        if h == 1 {
            self.skip(names::VERTICAL_GROWTH, t, Location::global(), "single layer");
            return;
        }
        for i in 0..DIRECTIONS {
            for k in 1..=h {
                for l in [k.wrapping_sub(1), k + 1] {
                    if l == 0 || l > h {
                        continue;
                    }
                    let loc = Location { i: Some(i as u8), k: Some(l), s: Some(k), ..Location::default() };
                    let upper = rec.prev.rho[i][k as usize - 1];
                    let lower = rec.prev.rho[i][l as usize - 1];
                    let advanced = rec.new.rho[i][l as usize - 1] - lower == 1;
                    if !(advanced && upper == lower + 1) {
                        self.skip(names::VERTICAL_GROWTH, t, loc, "radius pattern absent");
                        continue;
                    }
                    let row_l = *tracker.row(t, i, l).expect("row exists");
                    let prev_k = *tracker.row(t - 1, i, k).expect("row exists");
                    self.record(
                        names::VERTICAL_GROWTH,
                        t,
                        loc,
                        row_l.phi + row_l.df,
                        Relation::Ge,
                        prev_k.phi - 2,
                        String::new,
                    );
                }
            }
        }
    }

    fn check_pulled(&mut self, rec: &StepRecord, tracker: &FrontsTracker, t: u32) {
        let (q, h) = (self.kind.q_i64(), self.kind.h_i64());
        for i in 0..DIRECTIONS {
            let loc = Location::front(i);
            let tot = *tracker.totals(t, i).expect("totals exist");
            if h < 2 {
                self.skip(names::PULL_TYPICAL, t, loc, "single layer");
                self.skip(names::PULL_RESETS, t, loc, "single layer");
                continue;
            }
            if tot.dr <= tot.a {
                self.skip(names::PULL_TYPICAL, t, loc, "front not pulled");
                self.skip(names::PULL_RESETS, t, loc, "front not pulled");
                continue;
            }
            let prev = *tracker.totals(t - 1, i).expect("totals exist");
            self.record(names::PULL_TYPICAL, t, loc, tot.mu - prev.mu, Relation::Ge, q * h, || {
                format!("pulled={:?}", rec.pulled[i])
            });
            self.record(names::PULL_RESETS, t, loc, i64::from(tot.g), Relation::Eq, 0, String::new);
        }
    }

    fn check_fierity_upper(&mut self, tracker: &FrontsTracker, t: u32) {
        let lambda = tracker.lambda();
        for i in 0..DIRECTIONS {
            let (left, right) = ((i + 3) % DIRECTIONS, (i + 1) % DIRECTIONS);
            let now = |j| *tracker.totals(t, j).expect("totals exist");
            let start = |j| *tracker.totals(0, j).expect("totals exist");
            let lhs = 2 * now(i).phi;
            let rhs = lambda - start(left).phi - start(right).phi + now(left).mu + now(right).mu;
            self.record(names::FIERITY_UPPER, t, Location::front(i), lhs, Relation::Le, rhs, String::new);
        }
    }

    /// `2|L| ≤ q(a + b + 1)` for every level of the current structure.
    fn check_length_bound(&mut self, tracker: &FrontsTracker, t: u32) {
        let quad = tracker.quad_at(t).expect("quad exists");
        let q = self.kind.q_i64();
        for i in 0..DIRECTIONS {
            for k in 1..=self.kind.h() {
                let spec = quad.level_spec(i, k as i32);
                let mut len = 0i64;
                for_each_level_cell(spec, self.kind, |_| len += 1);
                self.record(
                    names::LENGTH_BOUND,
                    t,
                    Location::level(i, k),
                    2 * len,
                    Relation::Le,
                    q * (spec.a + spec.b + 1),
                    String::new,
                );
            }
        }
    }

    fn check_hypothesis(&mut self, tracker: &FrontsTracker, t: u32) {
        let Some(hyp) = self.hypothesis.as_mut() else {
            return;
        };
        let point = hyp.record(t, tracker.phi(t).expect("totals"), tracker.f(t).expect("totals"));
        let armed = hyp.armed() && point.budget_ok;
        let weak = hyp.weak_bound(t);
        if armed {
            self.record(names::HYPOTHESIS, t, Location::global(), point.phi_plus_f, Relation::Ge, point.bound, String::new);
            self.record(names::LOWER_BOUND, t, Location::global(), point.phi_plus_f, Relation::Ge, weak, String::new);
        } else {
            self.skip(names::HYPOTHESIS, t, Location::global(), "hypotheses not satisfied");
            self.skip(names::LOWER_BOUND, t, Location::global(), "hypotheses not satisfied");
        }
    }

    /// `φ_i(s) + φ_j(t) > 8qh⁵` for `s ≤ t ≤ s + 2h` once `H(s)` is known.
    fn check_fierity_of_two(&mut self, tracker: &FrontsTracker, t: u32) {
        let (q, h) = (self.kind.q_i64(), self.kind.h_i64());
        let Some(hyp) = self.hypothesis.as_ref() else {
            return;
        };
        let armed = hyp.armed() && hyp.budget_ok;
        let first = t.saturating_sub(2 * self.kind.h());
        let holds: Vec<bool> = (first..=t).map(|s| hyp.holds_at(s)).collect();
        for (offset, s) in (first..=t).enumerate() {
            for i in 0..DIRECTIONS {
                for j in 0..DIRECTIONS {
                    if i == j {
                        continue;
                    }
                    let name = if (i + 2) % DIRECTIONS == j { names::TWO_OPPOSING } else { names::TWO_ADJACENT };
                    let loc = Location { i: Some(i as u8), j: Some(j as u8), s: Some(s), k: None };
                    if !armed || !holds[offset] {
                        self.skip(name, t, loc, "hypotheses not satisfied");
                        continue;
                    }
                    let lhs = tracker.totals(s, i).expect("totals").phi + tracker.totals(t, j).expect("totals").phi;
                    self.record(name, t, loc, lhs, Relation::Gt, 8 * q * h.pow(5), String::new);
                }
            }
        }
    }

    /// Retroactive checks whose windows close at `t`.
    fn check_windows(&mut self, tracker: &FrontsTracker, t: u32) {
        let h = self.kind.h();
        let (q, hh) = (self.kind.q_i64(), self.kind.h_i64());
        if h < 2 {
            self.skip(names::SLOWDOWN_ENDS, t, Location::global(), "single layer");
            self.skip(names::HIGH_FIERITY, t, Location::global(), "single layer");
            return;
        }
        let span = 2 * h;
        if t < span {
            return;
        }
        let start = t - span;
        let tot = |s: u32, i: usize| *tracker.totals(s, i).expect("totals exist");
        let threshold = 4 * q * hh.pow(5);
        for i in 0..DIRECTIONS {
            // Slowdown re-closes: g_i(τ) = 0 and Δμ_i(τ+1) < qh imply some
            // τ' in [τ+1, τ+2h] with g_i(τ') = 0.
            let tau = start;
            let loc = Location { i: Some(i as u8), s: Some(tau), ..Location::default() };
            let dmu_next = tot(tau + 1, i).mu - tot(tau, i).mu;
            if !tot(tau, i).g && dmu_next < q * hh {
                let found = (tau + 1..=tau + span).any(|x| !tot(x, i).g);
                self.record(names::SLOWDOWN_ENDS, t, loc, i64::from(found), Relation::Eq, 1, String::new);
            } else {
                self.skip(names::SLOWDOWN_ENDS, t, loc, "window precondition absent");
            }

            // Long high-fierity stretches: for s < start with g_i(s) = 0 and
            // φ_i > 4qh⁵ on [s, t], some t' in [start, t] has g_i(t') = 0 and
            // μ_i(t') - μ_i(s) ≥ qh(t' - s).
            if (start..=t).any(|x| tot(x, i).phi <= threshold) {
                self.skip(names::HIGH_FIERITY, t, Location::front(i), "fierity not high on window");
                continue;
            }
            let mut s = start;
            while s > 0 {
                s -= 1;
                if tot(s, i).phi <= threshold {
                    break;
                }
                if tot(s, i).g {
                    continue;
                }
                let mu_s = tot(s, i).mu;
                let best = (start..=t)
                    .filter(|&x| !tot(x, i).g)
                    .map(|x| tot(x, i).mu - mu_s - q * hh * i64::from(x - s))
                    .max();
                let loc = Location { i: Some(i as u8), s: Some(s), ..Location::default() };
                match best {
                    Some(margin) => {
                        self.record(names::HIGH_FIERITY, t, loc, margin, Relation::Ge, 0, String::new);
                    }
                    None => {
                        self.record(names::HIGH_FIERITY, t, loc, -1, Relation::Ge, 0, || {
                            "no time without slowdown in window".into()
                        });
                    }
                }
            }
        }
    }
}

fn sym_diff(a: &[Cell], b: &[Cell]) -> i64 {
    let only_a = a.iter().filter(|c| !b.contains(c)).count();
    let only_b = b.iter().filter(|c| !a.contains(c)).count();
    (only_a + only_b) as i64
}

/// For each `s` with a complete window, a quadruple `(s₀..s₃)` with
/// `s ≤ s_i ≤ s + 4h`, `g_i(s_i) = 0`, `|s_i - s_j| ≤ 2h` and
/// `Σ μ_i(s_i) ≥ φ(0) - qh·min s_i + Σ qh·s_i`.
pub fn controlled_times(tracker: &FrontsTracker) -> Vec<ControlWitness> {
    let kind = tracker.kind();
    let (q, h) = (kind.q_i64(), kind.h());
    let qh = q * i64::from(h);
    let phi0 = tracker.phi(0).expect("initial totals");
    let end = tracker.t();
    let mut out = Vec::new();
    let mut s = 0;
    while s + 4 * h <= end {
        let hi = s + 4 * h;
        let mut witness = None;
        // With every s_i in [m, m + 2h], Σ(μ_i - qh·s_i) + qh·min ≥ φ(0) is
        // implied by the same sum with min replaced by m.
        'search: for m in s..=hi {
            let top = (m + 2 * h).min(hi);
            let mut choice = [0u32; 4];
            let mut total = qh * i64::from(m);
            for (i, slot) in choice.iter_mut().enumerate() {
                let best = (m..=top)
                    .filter(|&x| !tracker.totals(x, i).expect("totals").g)
                    .map(|x| (tracker.totals(x, i).expect("totals").mu - qh * i64::from(x), x))
                    .max_by_key(|&(v, x)| (v, std::cmp::Reverse(x)));
                match best {
                    Some((v, x)) => {
                        total += v;
                        *slot = x;
                    }
                    None => continue 'search,
                }
            }
            if total >= phi0 {
                witness = Some(choice);
                break;
            }
        }
        out.push(ControlWitness { s, witness });
        s += 1;
    }
    out
}

/// Reports as newline-delimited JSON.
pub fn write_reports_ndjson<W: Write>(reports: &[CheckReport], mut out: W) -> io::Result<()> {
    for r in reports {
        serde_json::to_writer(&mut out, r)?;
        out.write_all(b"\n")?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::engine::{new_game, ProtectionOrder};
    use crate::scenarios::ScenarioSpec;

    fn run_null(spec: ScenarioSpec, steps: u32) -> (Monitor, FrontsTracker) {
        let scenario = spec.build().unwrap();
        let cfg = scenario.config.clone();
        let mut game = new_game(&cfg).unwrap();
        let mut tracker = FrontsTracker::new(scenario.kind, scenario.quad.clone().unwrap(), &game).unwrap();
        let hyp = HypothesisTracker::new(
            scenario.kind,
            scenario.lambda.unwrap(),
            scenario.phi0.unwrap(),
            scenario.hypothesis_satisfied() || scenario.large_initial_fierity() == Some(false),
        );
        let mut monitor = Monitor::new(scenario.kind, Some(hyp)).record_all(true);
        monitor.observe_initial(&tracker);
        for _ in 0..steps {
            game.apply(&ProtectionOrder::empty(), &cfg).unwrap();
            let rec = tracker.advance(&game).unwrap();
            monitor.observe(&rec, &tracker, &game);
        }
        (monitor, tracker)
    }

    #[test]
    fn relation_semantics() {
        assert!(Relation::Ge.holds(2, 2));
        assert!(!Relation::Gt.holds(2, 2));
        assert!(Relation::Le.holds(1, 2));
        assert!(Relation::Eq.holds(0, 0));
    }

    #[test]
    fn free_spread_small_canonical_passes() {
        let (monitor, _) = run_null(ScenarioSpec::new("canonical", 2, 2).with_param("R", 6), 12);
        assert_eq!(monitor.failures(), &[] as &[CheckReport]);
        let summary = monitor.summary();
        assert!(summary.get(names::FOGARTY).passed > 0);
        assert!(summary.get(names::POTENTIAL_LEVEL).passed > 0);
        for r in monitor.reports() {
            if r.status != CheckStatus::Skipped {
                assert_eq!(r.passed, r.relation.holds(r.lhs, r.rhs));
            }
        }
    }

    #[test]
    fn skipped_is_not_passed() {
        let (monitor, _) = run_null(ScenarioSpec::new("canonical", 1, 1).with_param("R", 3), 3);
        let s = monitor.summary();
        assert_eq!(s.get(names::PULL_TYPICAL).passed, 0);
        assert!(s.get(names::PULL_TYPICAL).skipped > 0);
        assert!(s.get(names::HYPOTHESIS).skipped > 0);
    }

    #[test]
    fn hypothesis_base_case_at_full_scale() {
        let scenario = ScenarioSpec::new("canonical", 2, 2).build().unwrap();
        let kind = scenario.kind;
        let mut hyp = HypothesisTracker::new(kind, scenario.lambda.unwrap(), scenario.phi0.unwrap(), true);
        assert!(hyp.armed());
        for t in 0..=4 {
            assert!(hyp.record(t, 7680, 0).holds, "t={t}");
        }
    }

    #[test]
    fn every_time_controlled_under_free_spread() {
        let (_, tracker) = run_null(ScenarioSpec::new("canonical", 2, 2).with_param("R", 3), 20);
        let witnesses = controlled_times(&tracker);
        assert!(!witnesses.is_empty());
        assert_eq!(witnesses[0].s, 0);
        assert!(witnesses.iter().all(|w| w.witness.is_some()));
    }

    #[test]
    fn ndjson_lines() {
        let report = CheckReport {
            name: names::DP_SUM.into(),
            t: 3,
            location: Location::layer(1),
            lhs: 0,
            relation: Relation::Eq,
            rhs: 0,
            status: CheckStatus::Passed,
            passed: true,
            context: String::new(),
        };
        let mut buf = Vec::new();
        write_reports_ndjson(&[report.clone(), report], &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(text.lines().count(), 2);
        assert!(text.starts_with(r#"{"name":"shift_balance_sum","t":3,"location":{"k":1},"lhs":0,"relation":"==""#));
    }
}
