//! Acceptance run: one PASS/FAIL line per criterion, non-zero exit on any
//! failure.

use std::process::ExitCode;
use std::time::{Duration, Instant};

use pyrofront_core::fronts::is_lipschitz;
use pyrofront_core::monitor::names;
use pyrofront_core::runner::{run, run_parallel, standard_strategies, RunOptions, RunResult};
use pyrofront_core::session::Mode;
use pyrofront_core::strategies::StrategyContext;
use pyrofront_core::{
    level_cardinality, level_cells, lip, LatticeKind, LevelSpec, Scenario, ScenarioSpec, Session, StrategySpec,
};

const PYRAMID_LIMIT: Duration = Duration::from_secs(1);
const CANONICAL_LIMIT: Duration = Duration::from_secs(60);
const VARIANT_LIMIT: Duration = Duration::from_secs(120);
const CANONICAL_STEPS: u32 = 100;
const RANDOM_SEEDS: u64 = 25;
const ORACLE_LIP_MAX_H: usize = 5;
const ORACLE_LIP_MAX_ENTRY: i64 = 6;
const ORACLE_LEVEL_MAX: i64 = 50;

struct Report {
    failed: usize,
}

impl Report {
    fn line(&mut self, id: &str, ok: bool, detail: String) {
        println!("{} {id}: {detail}", if ok { "PASS" } else { "FAIL" });
        if !ok {
            self.failed += 1;
        }
    }
}

fn pyramid(report: &mut Report, id: &str, q: u8, cells: usize, budget: u64) {
    let started = Instant::now();
    let outcome = ScenarioSpec::new("pyramid", q, 8).build().map_err(|e| e.to_string()).and_then(|s| {
        let mut opts = RunOptions::new(50);
        opts.stop_when_contained = true;
        let r = run(&s, &StrategySpec::new("pyramid_cylinder"), &opts).map_err(|e| e.to_string())?;
        Ok((s, r))
    });
    let elapsed = started.elapsed();
    match outcome {
        Ok((s, r)) => {
            let initial = s.config.initial_fire.len();
            let rate = s.config.budget_rate.allowance(1);
            let ok = initial == cells
                && rate == budget
                && r.contained_at == Some(8)
                && r.orders_spent <= s.config.budget_rate.allowance(8)
                && elapsed < PYRAMID_LIMIT;
            report.line(
                id,
                ok,
                format!(
                    "q={q} h=8 initial={initial} budget={rate} contained_at={:?} elapsed={elapsed:?}",
                    r.contained_at
                ),
            );
        }
        Err(e) => report.line(id, false, e),
    }
}

struct SuiteOutcome {
    results: Vec<RunResult>,
    errors: Vec<String>,
    elapsed: Duration,
}

fn suite(scenario: &Scenario) -> SuiteOutcome {
    let started = Instant::now();
    let jobs: Vec<_> = standard_strategies(RANDOM_SEEDS).into_iter().map(|s| (scenario.clone(), s)).collect();
    let mut results = Vec::new();
    let mut errors = Vec::new();
    for outcome in run_parallel(&jobs, &RunOptions::new(CANONICAL_STEPS)) {
        match outcome {
            Ok(r) => results.push(r),
            Err(e) => errors.push(e.to_string()),
        }
    }
    SuiteOutcome { results, errors, elapsed: started.elapsed() }
}

/// Every step satisfies `φ + f ≥ 3qh·t`.
fn weak_bound_holds(r: &RunResult, kind: LatticeKind) -> bool {
    let slope = 3 * i64::from(kind.q()) * i64::from(kind.h());
    r.phi_f.len() == CANONICAL_STEPS as usize + 1
        && r.phi_f.iter().enumerate().all(|(t, &(phi, f))| phi + f >= slope * t as i64)
}

fn canonical(report: &mut Report) {
    let outcome = ScenarioSpec::new("canonical", 2, 2).with_param("R", 480).build();
    let scenario = match outcome {
        Ok(s) => s,
        Err(e) => return report.line("canonical", false, e.to_string()),
    };
    let s = suite(&scenario);
    let phi0 = scenario.phi0.unwrap_or(0);
    let failures: u64 = s.results.iter().map(RunResult::monitor_failures).sum();
    let armed = s.results.iter().all(|r| r.hypothesis.is_some_and(|h| h.armed));
    let hypothesis = s
        .results
        .iter()
        .all(|r| r.hypothesis.is_some_and(|h| h.first_violation.is_none()));
    let weak = s.results.iter().all(|r| weak_bound_holds(r, scenario.kind));
    let ok = phi0 == 7680
        && s.errors.is_empty()
        && s.results.len() == 2 + RANDOM_SEEDS as usize
        && failures == 0
        && armed
        && hypothesis
        && weak
        && s.elapsed < CANONICAL_LIMIT;
    report.line(
        "canonical",
        ok,
        format!(
            "q=2 h=2 R=480 phi0={phi0} runs={} errors={} monitor_failures={failures} armed={armed} \
             hypothesis_every_step={hypothesis} phi_plus_f_ge_12t={weak} elapsed={:?}",
            s.results.len(),
            s.errors.len(),
            s.elapsed
        ),
    );
}

fn variant(report: &mut Report, q: u8, h: u32, r: i64) {
    let id = format!("variant q={q} h={h} R={r}");
    let scenario = match ScenarioSpec::new("canonical", q, h).with_param("R", r).build() {
        Ok(s) => s,
        Err(e) => return report.line(&id, false, e.to_string()),
    };
    let s = suite(&scenario);
    let failures: u64 = s.results.iter().map(RunResult::monitor_failures).sum();
    let flag = scenario.hypothesis_satisfied();
    // Armed runs must honour the hypothesis; unarmed ones must not claim it.
    let honest = s.results.iter().all(|res| {
        res.hypothesis.is_some_and(|hy| hy.armed == flag && (!flag || hy.first_violation.is_none()))
    });
    let weak = !flag || s.results.iter().all(|res| weak_bound_holds(res, scenario.kind));
    let ok = s.errors.is_empty()
        && s.results.len() == 2 + RANDOM_SEEDS as usize
        && failures == 0
        && honest
        && weak
        && s.elapsed < VARIANT_LIMIT;
    report.line(
        &id,
        ok,
        format!(
            "phi0={} lambda={} hypothesis_armed={flag} monitor_failures={failures} flag_consistent={honest} \
             weak_bound={weak} elapsed={:?}",
            scenario.phi0.unwrap_or(0),
            scenario.lambda.unwrap_or(0),
            s.elapsed
        ),
    );
}

fn vectors(h: usize, hi: i64) -> Vec<Vec<i64>> {
    let mut out = vec![Vec::new()];
    for _ in 0..h {
        out = out
            .into_iter()
            .flat_map(|v| {
                (0..=hi).map(move |x| {
                    let mut w = v.clone();
                    w.push(x);
                    w
                })
            })
            .collect();
    }
    out
}

fn lip_by_relaxation(v: &[i64]) -> Vec<i64> {
    let mut w = v.to_vec();
    loop {
        let mut changed = false;
        for k in 0..w.len() {
            for j in [k.wrapping_sub(1), k + 1] {
                if j < w.len() && w[j] - 1 > w[k] {
                    w[k] = w[j] - 1;
                    changed = true;
                }
            }
        }
        if !changed {
            return w;
        }
    }
}

/// Deterministic fuzz grid run with the monitor on.
fn fuzz_runs() -> Vec<Result<RunResult, String>> {
    let mut jobs = Vec::new();
    for q in [1u8, 2] {
        for h in 1..=3u32 {
            for r in [2i64, 5, 9] {
                let kind = LatticeKind::new(q, h).expect("valid kind");
                let critical = (3 * u64::from(kind.q()) * u64::from(h)).div_ceil(2);
                for c in [0, critical, critical + 3] {
                    let scenario = ScenarioSpec::new("canonical", q, h)
                        .with_param("R", r)
                        .with_param("c", c)
                        .build()
                        .expect("fuzz scenario");
                    for strategy in standard_strategies(2) {
                        jobs.push((scenario.clone(), strategy));
                    }
                }
            }
        }
    }
    run_parallel(&jobs, &RunOptions::new(60)).into_iter().map(|r| r.map_err(|e| e.to_string())).collect()
}

fn oracles(report: &mut Report, fuzz: &[Result<RunResult, String>]) {
    let mut lip_cases = 0usize;
    let mut lip_bad = 0usize;
    for h in 1..=ORACLE_LIP_MAX_H {
        for v in vectors(h, ORACLE_LIP_MAX_ENTRY) {
            let w = lip(&v);
            if w != lip_by_relaxation(&v) || !is_lipschitz(&w) {
                lip_bad += 1;
            }
            lip_cases += 1;
        }
    }
    report.line(
        "oracle lip",
        lip_bad == 0,
        format!("h<={ORACLE_LIP_MAX_H} entries<={ORACLE_LIP_MAX_ENTRY} cases={lip_cases} mismatches={lip_bad}"),
    );

    let mut level_bad = 0usize;
    let mut level_cases = 0usize;
    for q in [1u8, 2] {
        let kind = LatticeKind::new(q, 1).expect("valid kind");
        for a in 0..=ORACLE_LEVEL_MAX {
            for b in 0..=ORACLE_LEVEL_MAX {
                for d in 0..=ORACLE_LEVEL_MAX {
                    let expected = (-a..b).filter(|m| q == 2 || (d - m).rem_euclid(2) == 0).count();
                    if level_cardinality(a, b, d, q) != expected as i64 {
                        level_bad += 1;
                    }
                    if (a + b + d) % 11 == 0 && level_cells(LevelSpec::new(0, d, a, b, 1), kind).len() != expected {
                        level_bad += 1;
                    }
                    level_cases += 1;
                }
            }
        }
    }
    report.line(
        "oracle level_cardinality",
        level_bad == 0,
        format!("a,b,d<={ORACLE_LEVEL_MAX} both q cases={level_cases} mismatches={level_bad}"),
    );

    let errors = fuzz.iter().filter(|r| r.is_err()).count();
    let (mut passed, mut failed) = (0u64, 0u64);
    for r in fuzz.iter().flatten() {
        if let Some(m) = &r.monitor {
            passed += m.get(names::SHIFT_CLOSED).passed;
            failed += m.get(names::SHIFT_CLOSED).failed;
        }
    }
    report.line(
        "oracle shifted sets",
        errors == 0 && failed == 0 && passed > 0,
        format!("fuzz runs={} errors={errors} checks passed={passed} failed={failed}", fuzz.len()),
    );
}

fn length_bound(report: &mut Report, fuzz: &[Result<RunResult, String>]) {
    let mut bad = 0usize;
    for q in [1u8, 2] {
        for a in 0..=ORACLE_LEVEL_MAX {
            for b in 0..=ORACLE_LEVEL_MAX {
                for d in -ORACLE_LEVEL_MAX..=ORACLE_LEVEL_MAX {
                    if 2 * level_cardinality(a, b, d, q) > i64::from(q) * (a + b + 1) {
                        bad += 1;
                    }
                }
            }
        }
    }
    let (mut passed, mut failed) = (0u64, 0u64);
    for r in fuzz.iter().flatten() {
        if let Some(m) = &r.monitor {
            passed += m.get(names::LENGTH_BOUND).passed;
            failed += m.get(names::LENGTH_BOUND).failed;
        }
    }
    report.line(
        "level length bound",
        bad == 0 && failed == 0 && passed > 0,
        format!("grid violations={bad} fuzz checks passed={passed} failed={failed}"),
    );
}

fn determinism(report: &mut Report) {
    let outcome = (|| -> Result<(bool, bool, usize), String> {
        let spec = ScenarioSpec::new("canonical", 2, 2).with_param("R", 6);
        let scenario = spec.build().map_err(|e| e.to_string())?;
        let cfg = scenario.config.clone();
        let strategy = StrategySpec::new("random").with_param("seed", 3);
        let mut player = strategy.build(&cfg).map_err(|e| e.to_string())?;
        let mut session = Session::create(&spec, Mode::Exploratory).map_err(|e| e.to_string())?;
        for _ in 0..30 {
            let order = player.decide(&StrategyContext::new(session.game(), &cfg)).map_err(|e| e.to_string())?;
            session.step(order.cells).map_err(|e| e.to_string())?;
        }
        let text = serde_json::to_string(&session.save()).map_err(|e| e.to_string())?;
        let loaded = Session::load(&serde_json::from_str(&text).map_err(|e| e.to_string())?)
            .map_err(|e| e.to_string())?;
        let replay = loaded.hashes() == session.hashes();

        let mut on = RunOptions::new(30);
        on.hashes = true;
        let mut off = on;
        off.monitor = false;
        let a = run(&scenario, &strategy, &on).map_err(|e| e.to_string())?;
        let b = run(&scenario, &strategy, &off).map_err(|e| e.to_string())?;
        let toggle = a.hashes == b.hashes && a.hashes[..] == *session.hashes();
        Ok((replay, toggle, a.hashes.len()))
    })();
    match outcome {
        Ok((replay, toggle, n)) => report.line(
            "determinism",
            replay && toggle,
            format!("hashes={n} replay_matches={replay} monitor_toggle_matches={toggle}"),
        ),
        Err(e) => report.line("determinism", false, e),
    }
}

fn main() -> ExitCode {
    let mut report = Report { failed: 0 };
    pyramid(&mut report, "pyramid q=2", 2, 35, 24);
    pyramid(&mut report, "pyramid q=1", 1, 19, 12);
    canonical(&mut report);
    variant(&mut report, 1, 2, 480);
    variant(&mut report, 2, 3, 200);
    variant(&mut report, 1, 3, 200);
    let fuzz = fuzz_runs();
    oracles(&mut report, &fuzz);
    length_bound(&mut report, &fuzz);
    determinism(&mut report);
    if report.failed == 0 {
        ExitCode::SUCCESS
    } else {
        println!("{} criteria failed", report.failed);
        ExitCode::FAILURE
    }
}
