//! The fronts structure and its ledger.
//!
//! Four Lipschitz radius vectors `ρ₀..ρ₃` (one radius per layer) describe a
//! rectangle-like ring of level segments around the fire. The tracker
//! advances the ring in lock-step with the game and books, for every front
//! `i` and layer `k`, the fierity `φ`, newly counted protections `Δf`, the
//! shift balance `Δp` and the potential `μ = φ + f + p`.

use std::io::{self, Write};

use rustc_hash::FxHashSet;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::engine::GameState;
use crate::lattice::{for_each_level_cell, level_cells, level_contains, point_on_line, Cell, LatticeKind, LevelSpec, DIRECTIONS};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum FrontsError {
    #[error("front {front} has {got} radii, expected {expected}")]
    BadLength { front: usize, expected: usize, got: usize },
    #[error("front {front} is not Lipschitz: {values:?}")]
    NotLipschitz { front: usize, values: Vec<i64> },
    #[error("front {front} has a radius below 1: {values:?}")]
    NonPositive { front: usize, values: Vec<i64> },
    #[error("tracker is at time {tracker}, game is at time {game}")]
    TimeMismatch { tracker: u32, game: u32 },
    #[error("no ledger entry for time {0}")]
    NoSuchTime(u32),
}

/// Whether adjacent entries differ by at most one.
pub fn is_lipschitz(v: &[i64]) -> bool {
    v.windows(2).all(|w| (w[0] - w[1]).abs() <= 1)
}

/// Minimal Lipschitz vector dominating `v`: `w[k] = max_j (v[j] - |j - k|)`.
pub fn lip(v: &[i64]) -> Vec<i64> {
    let n = v.len();
    (0..n)
        .map(|k| {
            (0..n)
                .map(|j| v[j] - (j as i64 - k as i64).abs())
                .max()
                .unwrap_or(0)
        })
        .collect()
}

/// `lip(prev + alpha)`, plus the levels that moved without being active.
pub fn advance_front(prev: &[i64], alpha: &[bool]) -> (Vec<i64>, Vec<bool>) {
    debug_assert_eq!(prev.len(), alpha.len());
    let raised: Vec<i64> = prev.iter().zip(alpha).map(|(&r, &a)| r + i64::from(a)).collect();
    let next = lip(&raised);
    let pulled = next
        .iter()
        .zip(prev)
        .zip(alpha)
        .map(|((&n, &p), &a)| n - p > i64::from(a))
        .collect();
    (next, pulled)
}

/// Radii, slowdown indicators and last activity vectors of the four fronts.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FrontQuad {
    pub rho: [Vec<i64>; 4],
    pub g: [bool; 4],
    pub alpha_last: [Vec<bool>; 4],
}

impl FrontQuad {
    pub fn new(rho: [Vec<i64>; 4]) -> Result<Self, FrontsError> {
        let h = rho[0].len();
        for (front, values) in rho.iter().enumerate() {
            if values.len() != h || h == 0 {
                return Err(FrontsError::BadLength { front, expected: h.max(1), got: values.len() });
            }
            if !is_lipschitz(values) {
                return Err(FrontsError::NotLipschitz { front, values: values.clone() });
            }
            if values.iter().any(|&r| r < 1) {
                return Err(FrontsError::NonPositive { front, values: values.clone() });
            }
        }
        let alpha_last = std::array::from_fn(|_| vec![false; h]);
        Ok(Self { rho, g: [false; 4], alpha_last })
    }

    /// All radii equal to `r`.
    pub fn uniform(h: u32, r: i64) -> Result<Self, FrontsError> {
        Self::new(std::array::from_fn(|_| vec![r; h as usize]))
    }

    pub fn h(&self) -> usize {
        self.rho[0].len()
    }

    /// `r_i^k`, with `k` in `1..=h`.
    #[inline]
    pub fn radius(&self, i: usize, k: i32) -> i64 {
        self.rho[i % DIRECTIONS][(k - 1) as usize]
    }

    /// `Σ_k r_i^k`.
    pub fn total(&self, i: usize) -> i64 {
        self.rho[i % DIRECTIONS].iter().sum()
    }

    pub fn min_radius(&self, i: usize) -> i64 {
        self.rho[i % DIRECTIONS].iter().copied().min().unwrap_or(0)
    }

    /// `L_i^k(ρ) = L^k_{i, r_i^k}(r_{i-1}^k, r_{i+1}^k)`.
    #[inline]
    pub fn level_spec(&self, i: usize, k: i32) -> LevelSpec {
        let i = i % DIRECTIONS;
        LevelSpec::new(
            i,
            self.radius(i, k),
            self.radius(i + 3, k),
            self.radius(i + 1, k),
            k,
        )
    }

    #[inline]
    pub fn contains(&self, i: usize, k: i32, kind: LatticeKind, c: Cell) -> bool {
        level_contains(self.level_spec(i, k), kind, c)
    }

    /// Index of the front whose level contains `c`, if any.
    pub fn front_of(&self, kind: LatticeKind, c: Cell) -> Option<usize> {
        if !kind.contains_layer(c.k) {
            return None;
        }
        (0..DIRECTIONS).find(|&i| self.contains(i, c.k, kind, c))
    }
}

/// `λ = h + q·max(r₀ + r₂, r₁ + r₃)` with `r_i = Σ_k r_i^k`.
pub fn lambda(quad: &FrontQuad, kind: LatticeKind) -> i64 {
    let r: [i64; 4] = std::array::from_fn(|i| quad.total(i));
    kind.h_i64() + kind.q_i64() * (r[0] + r[2]).max(r[1] + r[3])
}

/// Cells of `L_i^k(ρ)`.
pub fn front_level_cells(quad: &FrontQuad, i: usize, k: i32, kind: LatticeKind) -> Vec<Cell> {
    level_cells(quad.level_spec(i, k), kind)
}

/// `V^k_{i,i-1}` (`minus`) and `V^k_{i,i+1}` (`plus`).
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ShiftedSets {
    pub minus: Vec<Cell>,
    pub plus: Vec<Cell>,
}

/// Shifted vertices computed from their set definitions:
///
/// * `V_{i,i-1} = (L_{i-1}(t) ∖ L_{i-1}(t-1)) ∩ L_i(t-1)`
/// * `V_{i,i+1} = (L_{i+1}(t) ∖ L_{i+1}(t-1)) ∩ (L_i(t-1))⁺`
pub fn shifted_sets(prev: &FrontQuad, new: &FrontQuad, i: usize, k: i32, kind: LatticeKind) -> ShiftedSets {
    let i = i % DIRECTIONS;
    let (left, right) = ((i + 3) % DIRECTIONS, (i + 1) % DIRECTIONS);
    let mut out = ShiftedSets::default();

    let new_left = new.level_spec(left, k);
    let old_left = prev.level_spec(left, k);
    if new_left != old_left {
        for_each_level_cell(new_left, kind, |c| {
            if !level_contains(old_left, kind, c) && prev.contains(i, k, kind, c) {
                out.minus.push(c);
            }
        });
    }

    let new_right = new.level_spec(right, k);
    let old_right = prev.level_spec(right, k);
    if new_right != old_right {
        let own = prev.level_spec(i, k);
        for_each_level_cell(new_right, kind, |c| {
            if level_contains(old_right, kind, c) {
                return;
            }
            let mut near = level_contains(own, kind, c);
            if !near {
                for &(dx, dy) in kind.horizontal_offsets() {
                    if level_contains(own, kind, Cell::new(c.x + dx, c.y + dy, c.k)) {
                        near = true;
                        break;
                    }
                }
            }
            if near {
                out.plus.push(c);
            }
        });
    }
    out
}

/// Shifted vertices from the radius case analysis. With `d = r_i^k(t-1)`,
/// `d± = r_{i±1}^k(t-1)` and increments `δ, δ±`:
///
/// * `V_{i,i-1} = {dθ_i - d₋θ_{i+1}} ∩ Z³` when `δ(1 - δ₋) = 1`, else empty;
/// * `V_{i,i+1} = {(d+1)θ_i + d₊θ_{i+1}} ∩ Z³` when `δ(1 - δ₊) = 1`, else empty.
pub fn shifted_sets_closed_form(
    prev: &FrontQuad,
    new: &FrontQuad,
    i: usize,
    k: i32,
    kind: LatticeKind,
) -> ShiftedSets {
    let i = i % DIRECTIONS;
    let d = prev.radius(i, k);
    let d_minus = prev.radius(i + 3, k);
    let d_plus = prev.radius(i + 1, k);
    let delta = new.radius(i, k) - d;
    let delta_minus = new.radius(i + 3, k) - d_minus;
    let delta_plus = new.radius(i + 1, k) - d_plus;
    let mut out = ShiftedSets::default();
    if delta == 1 && delta_minus == 0 {
        out.minus.extend(point_on_line(kind, i, d, -d_minus, k));
    }
    if delta == 1 && delta_plus == 0 {
        out.plus.extend(point_on_line(kind, i, d + 1, d_plus, k));
    }
    out
}

/// One `(t, i, k)` entry of the ledger.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct LedgerRow {
    pub t: u32,
    pub i: u8,
    pub k: u32,
    pub phi: i64,
    pub df: i64,
    pub dp: i64,
    pub mu: i64,
    pub dr: i64,
    pub a: bool,
    pub g: bool,
    pub r: i64,
}

/// Sums over layers for one front at one time.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct FrontTotals {
    pub t: u32,
    pub i: u8,
    pub phi: i64,
    pub f: i64,
    pub df: i64,
    pub dp: i64,
    pub mu: i64,
    pub dr: i64,
    pub a: i64,
    pub g: bool,
    pub r: i64,
}

/// Everything the monitor needs about one tracker step.
#[derive(Debug, Clone)]
pub struct StepRecord {
    pub t: u32,
    pub prev: FrontQuad,
    pub new: FrontQuad,
    pub pulled: [Vec<bool>; 4],
    /// Set-theoretic shifted sets, indexed `[i][k-1]`.
    pub shifted: [Vec<ShiftedSets>; 4],
    /// Closed-form shifted sets, indexed `[i][k-1]`.
    pub shifted_closed: [Vec<ShiftedSets>; 4],
}

/// Viewport for overlays, inclusive on both ends.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Viewport {
    pub x0: i32,
    pub y0: i32,
    pub x1: i32,
    pub y1: i32,
}

impl Viewport {
    pub fn contains(&self, c: Cell) -> bool {
        self.x0 <= c.x && c.x <= self.x1 && self.y0 <= c.y && c.y <= self.y1
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Overlay {
    pub t: u32,
    pub fronts: Vec<OverlayFront>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct OverlayFront {
    pub i: u8,
    pub rho: Vec<i64>,
    pub g: bool,
    pub levels: Vec<OverlayLevel>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct OverlayLevel {
    pub k: u32,
    pub cells: Vec<[i32; 2]>,
    pub phi: i64,
}

/// Advances the fronts structure alongside a game and keeps the ledger.
#[derive(Debug, Clone)]
pub struct FrontsTracker {
    kind: LatticeKind,
    quads: Vec<FrontQuad>,
    next_alpha: [Vec<bool>; 4],
    counted: FxHashSet<Cell>,
    f: Vec<i64>,
    p: Vec<i64>,
    mu: Vec<i64>,
    rows: Vec<LedgerRow>,
    totals: Vec<FrontTotals>,
    lambda: i64,
}

impl FrontsTracker {
    /// Start tracking from `quad` and a game at time 0.
    pub fn new(kind: LatticeKind, quad: FrontQuad, game: &GameState) -> Result<Self, FrontsError> {
        let quad = FrontQuad::new(quad.rho)?;
        let h = kind.h() as usize;
        if quad.h() != h {
            return Err(FrontsError::BadLength { front: 0, expected: h, got: quad.h() });
        }
        if game.t() != 0 {
            return Err(FrontsError::TimeMismatch { tracker: 0, game: game.t() });
        }
        let n = DIRECTIONS * h;
        let mut tracker = Self {
            kind,
            lambda: lambda(&quad, kind),
            quads: Vec::new(),
            next_alpha: std::array::from_fn(|_| vec![false; h]),
            counted: FxHashSet::default(),
            f: vec![0; n],
            p: vec![0; n],
            mu: vec![0; n],
            rows: Vec::with_capacity(n),
            totals: Vec::with_capacity(DIRECTIONS),
        };
        for i in 0..DIRECTIONS {
            let mut tot = FrontTotals { t: 0, i: i as u8, phi: 0, f: 0, df: 0, dp: 0, mu: 0, dr: 0, a: 0, g: false, r: 0 };
            for k in 1..=h as i32 {
                let spec = quad.level_spec(i, k);
                let mut phi = 0;
                for_each_level_cell(spec, kind, |c| phi += i64::from(game.is_burning(c)));
                let idx = i * h + (k - 1) as usize;
                tracker.mu[idx] = phi;
                tracker.rows.push(LedgerRow {
                    t: 0,
                    i: i as u8,
                    k: k as u32,
                    phi,
                    df: 0,
                    dp: 0,
                    mu: phi,
                    dr: 0,
                    a: false,
                    g: false,
                    r: spec.d,
                });
                tot.phi += phi;
                tot.mu += phi;
                tot.r += spec.d;
            }
            tracker.totals.push(tot);
        }
        tracker.quads.push(quad);
        tracker.next_alpha = tracker.compute_alpha(0);
        Ok(tracker)
    }

    pub fn kind(&self) -> LatticeKind {
        self.kind
    }

    pub fn t(&self) -> u32 {
        (self.quads.len() - 1) as u32
    }

    pub fn lambda(&self) -> i64 {
        self.lambda
    }

    pub fn quad(&self) -> &FrontQuad {
        self.quads.last().expect("tracker always holds the initial quad")
    }

    pub fn quad_at(&self, t: u32) -> Option<&FrontQuad> {
        self.quads.get(t as usize)
    }

    /// Activity vectors that the next step will apply.
    pub fn next_alpha(&self) -> &[Vec<bool>; 4] {
        &self.next_alpha
    }

    /// Counted protections `F(t)`.
    pub fn counted(&self) -> &FxHashSet<Cell> {
        &self.counted
    }

    fn h(&self) -> usize {
        self.kind.h() as usize
    }

    #[inline]
    fn row_index(&self, t: u32, i: usize, k: u32) -> usize {
        let h = self.h();
        t as usize * DIRECTIONS * h + i * h + (k - 1) as usize
    }

    pub fn row(&self, t: u32, i: usize, k: u32) -> Option<&LedgerRow> {
        if t > self.t() || k == 0 || k as usize > self.h() || i >= DIRECTIONS {
            return None;
        }
        self.rows.get(self.row_index(t, i, k))
    }

    pub fn rows(&self) -> &[LedgerRow] {
        &self.rows
    }

    /// Rows with time at least `t0`.
    pub fn rows_from(&self, t0: u32) -> &[LedgerRow] {
        let start = (t0 as usize * DIRECTIONS * self.h()).min(self.rows.len());
        &self.rows[start..]
    }

    pub fn totals(&self, t: u32, i: usize) -> Option<&FrontTotals> {
        if i >= DIRECTIONS {
            return None;
        }
        self.totals.get(t as usize * DIRECTIONS + i)
    }

    /// `φ(t)`, summed over fronts.
    pub fn phi(&self, t: u32) -> Option<i64> {
        self.sum_totals(t, |x| x.phi)
    }

    /// `f(t)`, summed over fronts.
    pub fn f(&self, t: u32) -> Option<i64> {
        self.sum_totals(t, |x| x.f)
    }

    /// `μ(t)`, summed over fronts.
    pub fn mu(&self, t: u32) -> Option<i64> {
        self.sum_totals(t, |x| x.mu)
    }

    fn sum_totals(&self, t: u32, field: impl Fn(&FrontTotals) -> i64) -> Option<i64> {
        if t > self.t() {
            return None;
        }
        Some((0..DIRECTIONS).map(|i| field(&self.totals[t as usize * DIRECTIONS + i])).sum())
    }

    fn compute_alpha(&self, t: u32) -> [Vec<bool>; 4] {
        let h = self.h();
        let (q, hh) = (self.kind.q_i64(), self.kind.h_i64());
        let quad = &self.quads[t as usize];
        std::array::from_fn(|i| {
            let g = quad.g[i];
            let slope = if g { 4 * q * hh.pow(3) } else { 4 * hh };
            let r_min = quad.min_radius(i);
            (1..=h as u32)
                .map(|k| {
                    let row = &self.rows[self.row_index(t, i, k)];
                    row.phi > slope * (row.r - r_min)
                })
                .collect()
        })
    }

    /// Advance to `game.t()`, which must be one past the tracker's time.
    #[allow(clippy::needless_range_loop)]
    pub fn advance(&mut self, game: &GameState) -> Result<StepRecord, FrontsError> {
        let t_prev = self.t();
        if game.t() != t_prev + 1 {
            return Err(FrontsError::TimeMismatch { tracker: t_prev, game: game.t() });
        }
        let t = game.t();
        let kind = self.kind;
        let h = self.h();
        let (q, hh) = (kind.q_i64(), kind.h_i64());
        let prev = self.quad().clone();
        let alpha = std::mem::replace(&mut self.next_alpha, std::array::from_fn(|_| Vec::new()));

        let mut rho: [Vec<i64>; 4] = std::array::from_fn(|_| Vec::new());
        let mut pulled: [Vec<bool>; 4] = std::array::from_fn(|_| Vec::new());
        for i in 0..DIRECTIONS {
            (rho[i], pulled[i]) = advance_front(&prev.rho[i], &alpha[i]);
        }
        let mut new = FrontQuad { rho, g: [false; 4], alpha_last: alpha };

        // Fierity and uncounted protections, all levels before F is updated.
        let mut phi = vec![0i64; DIRECTIONS * h];
        let mut fresh: Vec<Vec<Cell>> = vec![Vec::new(); DIRECTIONS * h];
        for i in 0..DIRECTIONS {
            for k in 1..=h as i32 {
                let idx = i * h + (k - 1) as usize;
                let counted = &self.counted;
                for_each_level_cell(new.level_spec(i, k), kind, |c| {
                    if game.is_burning(c) {
                        phi[idx] += 1;
                    } else if game.is_protected(c) && !counted.contains(&c) {
                        fresh[idx].push(c);
                    }
                });
            }
        }
        for cells in &fresh {
            self.counted.extend(cells.iter().copied());
        }

        let mut shifted: [Vec<ShiftedSets>; 4] = std::array::from_fn(|_| Vec::with_capacity(h));
        let mut shifted_closed: [Vec<ShiftedSets>; 4] = std::array::from_fn(|_| Vec::with_capacity(h));
        for i in 0..DIRECTIONS {
            for k in 1..=h as i32 {
                shifted[i].push(shifted_sets(&prev, &new, i, k, kind));
                shifted_closed[i].push(shifted_sets_closed_form(&prev, &new, i, k, kind));
            }
        }

        let counted = &self.counted;
        let weight = |cells: &[Cell]| -> i64 {
            cells.iter().filter(|&&c| game.is_burning(c) || counted.contains(&c)).count() as i64
        };
        let base = self.rows.len() - DIRECTIONS * h;
        let mut front_dmu = [0i64; 4];
        let mut new_rows = Vec::with_capacity(DIRECTIONS * h);
        for i in 0..DIRECTIONS {
            let (left, right) = ((i + 3) % DIRECTIONS, (i + 1) % DIRECTIONS);
            for k in 0..h {
                let idx = i * h + k;
                let dp = weight(&shifted[i][k].minus) - weight(&shifted[left][k].plus)
                    + weight(&shifted[i][k].plus)
                    - weight(&shifted[right][k].minus);
                let df = fresh[idx].len() as i64;
                let prev_row = &self.rows[base + idx];
                let dmu = phi[idx] - prev_row.phi + df + dp;
                self.f[idx] += df;
                self.p[idx] += dp;
                self.mu[idx] += dmu;
                front_dmu[i] += dmu;
                new_rows.push(LedgerRow {
                    t,
                    i: i as u8,
                    k: k as u32 + 1,
                    phi: phi[idx],
                    df,
                    dp,
                    mu: self.mu[idx],
                    dr: new.rho[i][k] - prev.rho[i][k],
                    a: new.alpha_last[i][k],
                    g: false,
                    r: new.rho[i][k],
                });
            }
        }

        for i in 0..DIRECTIONS {
            let front_phi: i64 = (0..h).map(|k| phi[i * h + k]).sum();
            let g_prev = prev.g[i];
            let allowance = if g_prev { 2 * q * hh * hh } else { q * hh };
            new.g[i] = front_phi > 4 * q * hh.pow(5) && front_dmu[i] < allowance;
        }
        for row in &mut new_rows {
            row.g = new.g[row.i as usize];
        }
        for i in 0..DIRECTIONS {
            let slice = &new_rows[i * h..(i + 1) * h];
            self.totals.push(FrontTotals {
                t,
                i: i as u8,
                phi: slice.iter().map(|r| r.phi).sum(),
                f: (0..h).map(|k| self.f[i * h + k]).sum(),
                df: slice.iter().map(|r| r.df).sum(),
                dp: slice.iter().map(|r| r.dp).sum(),
                mu: slice.iter().map(|r| r.mu).sum(),
                dr: slice.iter().map(|r| r.dr).sum(),
                a: slice.iter().map(|r| i64::from(r.a)).sum(),
                g: new.g[i],
                r: new.total(i),
            });
        }
        self.rows.extend(new_rows);
        self.quads.push(new.clone());
        self.next_alpha = self.compute_alpha(t);

        Ok(StepRecord { t, prev, new, pulled, shifted, shifted_closed })
    }

    /// Front cells at time `t`, cropped to `viewport` when given.
    pub fn overlay(&self, t: u32, viewport: Option<Viewport>) -> Result<Overlay, FrontsError> {
        let quad = self.quad_at(t).ok_or(FrontsError::NoSuchTime(t))?;
        let h = self.h();
        let fronts = (0..DIRECTIONS)
            .map(|i| OverlayFront {
                i: i as u8,
                rho: quad.rho[i].clone(),
                g: quad.g[i],
                levels: (1..=h as u32)
                    .map(|k| {
                        let mut cells = Vec::new();
                        for_each_level_cell(quad.level_spec(i, k as i32), self.kind, |c| {
                            if viewport.is_none_or(|v| v.contains(c)) {
                                cells.push([c.x, c.y]);
                            }
                        });
                        OverlayLevel { k, cells, phi: self.rows[self.row_index(t, i, k)].phi }
                    })
                    .collect(),
            })
            .collect();
        Ok(Overlay { t, fronts })
    }
}

/// Ledger rows as CSV with columns `t,i,k,phi,df,dp,mu,dr,a,g`.
pub fn write_ledger_csv<W: Write>(rows: &[LedgerRow], mut out: W) -> io::Result<()> {
    writeln!(out, "t,i,k,phi,df,dp,mu,dr,a,g")?;
    for r in rows {
        writeln!(
            out,
            "{},{},{},{},{},{},{},{},{},{}",
            r.t,
            r.i,
            r.k,
            r.phi,
            r.df,
            r.dp,
            r.mu,
            r.dr,
            u8::from(r.a),
            u8::from(r.g)
        )?;
    }
    Ok(())
}
