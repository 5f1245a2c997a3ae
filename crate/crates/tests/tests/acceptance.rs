//! Acceptance suite: one PASS/FAIL line per criterion, followed by the
//! measurements behind it. Exits non-zero if any criterion fails.

use std::process::ExitCode;

use convicta::csv_io::csv_string;
use convicta::ensemble::{run_ensemble, EnsembleOutput};
use convicta::report::ensemble_text;
use convicta_core::analytic::{negative_probability, poisson_cdf, positive_probability};
use convicta_core::config::{ConvictionParams, NormalParams};
use convicta_core::deltas::DeltaTable;
use convicta_core::model::{classify_reaction, decide_action, init_society, tick};
use convicta_core::scenario::Bundled;
use convicta_core::session::{Command, Session};
use convicta_core::{
    load_scenario, run, snapshot_metrics, Agent, Group, ModelConfig, RandomStream, Reaction, RunResult,
    StopReason, Thresholds, TickMetrics,
};
use proptest::prelude::*;
use proptest::test_runner::{Config as ProptestConfig, TestRunner};

// Pinned tolerances.
const SEEDS: u32 = 30;
const BASE_SEED: u64 = 1;
const MAX_TICKS: u64 = 10_000;
const MIN_STOP_FRACTION: f64 = 0.70;
const TRIAL1_MAX_FINAL_C1: f64 = 25.0;
const TRIAL1_END_TICK_MEDIAN: (f64, f64) = (100.0, 5000.0);
const TRIAL2_MIN_FINAL_C1: f64 = 85.0;
const TRIAL2_MAX_FINAL_C2: f64 = 25.0;
const P_POSITIVE_BAND: (f64, f64) = (80.0, 5.0);
const M_POSITIVE_BAND: (f64, f64) = (9.5, 5.0);
const DRAWS: u32 = 100_000;
const BERNOULLI_TOLERANCE: f64 = 0.01;
const POISSON_ZERO_TOLERANCE: f64 = 0.002;
const VARIANCE_TOLERANCE: f64 = 0.10;
const ORACLE_TOLERANCE: f64 = 0.01;
/// A run trends when its decile means move the right way in at least this
/// many of the nine steps and the last decile is past the first.
const TREND_MIN_STEPS: usize = 7;
/// Fraction of runs that must show the trend.
const TREND_MIN_RUNS: f64 = 0.70;
const PROPERTY_CASES: u32 = 128;

struct Verdict {
    name: &'static str,
    details: Vec<(bool, String)>,
    notes: Vec<String>,
}

impl Verdict {
    fn new(name: &'static str) -> Self {
        Self { name, details: Vec::new(), notes: Vec::new() }
    }

    fn check(&mut self, ok: bool, what: impl Into<String>) {
        self.details.push((ok, what.into()));
    }

    fn note(&mut self, what: impl Into<String>) {
        self.notes.push(what.into());
    }

    fn passed(&self) -> bool {
        self.details.iter().all(|(ok, _)| *ok)
    }

    fn print(&self) {
        println!("{} {}", if self.passed() { "PASS" } else { "FAIL" }, self.name);
        for (ok, what) in &self.details {
            println!("    [{}] {what}", if *ok { "ok" } else { "FAILED" });
        }
        for n in &self.notes {
            for line in n.lines() {
                println!("    | {line}");
            }
        }
    }
}

fn scenario(name: &str) -> ModelConfig {
    let mut c = load_scenario(name).expect("bundled scenario").config;
    c.engine.max_ticks = MAX_TICKS;
    c
}

fn ensemble_of(name: &str) -> EnsembleOutput {
    run_ensemble(&scenario(name), BASE_SEED, SEEDS, 0).expect("valid scenario")
}

fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

/// Means of ten contiguous, equally long stretches of `xs`.
fn deciles(xs: &[f64]) -> Vec<f64> {
    let n = xs.len();
    (0..10)
        .map(|i| {
            let (a, b) = (i * n / 10, ((i + 1) * n / 10).max(i * n / 10 + 1).min(n));
            mean(&xs[a.min(n - 1)..b])
        })
        .collect()
}

/// Whether `xs` trends in direction `sign` (+1 rising, -1 falling).
fn trends(xs: &[f64], sign: f64) -> bool {
    let d = deciles(xs);
    let steps = d.windows(2).filter(|w| sign * (w[1] - w[0]) >= 0.0).count();
    sign * (d[9] - d[0]) > 0.0 && steps >= TREND_MIN_STEPS
}

fn trajectory(r: &RunResult, f: fn(&TickMetrics) -> f64) -> Vec<f64> {
    std::iter::once(&r.initial).chain(&r.series).map(f).collect()
}

fn trend_check(v: &mut Verdict, label: &str, out: &EnsembleOutput, f: fn(&TickMetrics) -> f64, sign: f64) {
    let hits = out.results.iter().filter(|r| trends(&trajectory(r, f), sign)).count();
    let fraction = hits as f64 / out.results.len() as f64;
    let start = mean(&out.results.iter().map(|r| f(&r.initial)).collect::<Vec<_>>());
    let end = mean(&out.results.iter().map(|r| f(r.final_metrics())).collect::<Vec<_>>());
    v.check(
        fraction >= TREND_MIN_RUNS,
        format!(
            "{label} {}: {hits}/{} runs trend (need {:.0}%); ensemble mean {start:.2} -> {end:.2}",
            if sign > 0.0 { "rising" } else { "falling" },
            out.results.len(),
            100.0 * TREND_MIN_RUNS
        ),
    );
}

fn trial1(out: &EnsembleOutput) -> Verdict {
    let mut v = Verdict::new("trial-1 reproduction (trial1, 30 seeds): equilibrium without perpetrators");
    let s = &out.summary;
    let f = s.fraction(StopReason::NoPotentialPerpetrators);
    v.check(
        f >= MIN_STOP_FRACTION,
        format!("{:.1}% end with no potential perpetrators (need >= {:.0}%)", 100.0 * f, 100.0 * MIN_STOP_FRACTION),
    );
    let finals: Vec<f64> = out
        .results
        .iter()
        .filter(|r| r.stop.kind == StopReason::NoPotentialPerpetrators)
        .map(|r| r.final_metrics().all.mean_c1)
        .collect();
    let worst = finals.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    v.check(
        !finals.is_empty() && worst <= TRIAL1_MAX_FINAL_C1,
        format!("final mean_c1_all of those runs: max {worst:.2}, mean {:.2} (need <= {TRIAL1_MAX_FINAL_C1})", mean(&finals)),
    );
    let (lo, hi) = TRIAL1_END_TICK_MEDIAN;
    let median = s.end_tick.median;
    v.check((lo..=hi).contains(&median), format!("median end tick {median} (need within [{lo}, {hi}])"));
    v.note(ensemble_text("trial1", s));
    v
}

fn trial2(out: &EnsembleOutput) -> Verdict {
    let mut v = Verdict::new("trial-2 reproduction (trial2, 30 seeds): polarized deadlock, high c1, low c2");
    let s = &out.summary;
    let f = s.fraction(StopReason::PolarizationDeadlock);
    v.check(
        f >= MIN_STOP_FRACTION,
        format!("{:.1}% end in polarization deadlock (need >= {:.0}%)", 100.0 * f, 100.0 * MIN_STOP_FRACTION),
    );
    let c1 = s.final_mean_c1_all;
    v.check(
        c1.mean >= TRIAL2_MIN_FINAL_C1,
        format!("final mean_c1_all {:.2} +/- {:.2} (need >= {TRIAL2_MIN_FINAL_C1})", c1.mean, c1.std_dev),
    );
    let c2 = s.final_mean_c2_all;
    v.check(
        c2.mean <= TRIAL2_MAX_FINAL_C2,
        format!("final mean_c2_all {:.2} +/- {:.2} (need <= {TRIAL2_MAX_FINAL_C2})", c2.mean, c2.std_dev),
    );
    v.note(ensemble_text("trial2", s));
    v
}

fn trends_verdict(t1: &EnsembleOutput, t2: &EnsembleOutput) -> Verdict {
    let mut v = Verdict::new("conviction trends: trial-1 c1 falls, trial-2 c1 rises, trial-2 c2 falls");
    trend_check(&mut v, "trial-1 mean_c1_all", t1, |m| m.all.mean_c1, -1.0);
    trend_check(&mut v, "trial-2 mean_c1_all", t2, |m| m.all.mean_c1, 1.0);
    trend_check(&mut v, "trial-2 mean_c2_all", t2, |m| m.all.mean_c2, -1.0);
    v
}

fn initial_bands() -> Verdict {
    let mut v = Verdict::new("trial-2 initial reactor bands (30 init seeds)");
    let config = scenario("trial2");
    let initial: Vec<TickMetrics> = (0..u64::from(SEEDS))
        .map(|i| {
            let seed = BASE_SEED + i;
            let state = init_society(&config, &mut RandomStream::new(seed));
            snapshot_metrics(0, &state.agents, &config, &[])
        })
        .collect();
    for (label, (target, tol), f) in [
        ("non-marginalized", P_POSITIVE_BAND, (|m: &TickMetrics| m.p.pct_positive_reactors) as fn(&TickMetrics) -> f64),
        ("marginalized", M_POSITIVE_BAND, |m: &TickMetrics| m.m.pct_positive_reactors),
    ] {
        let x = mean(&initial.iter().map(f).collect::<Vec<_>>());
        v.check(
            (x - target).abs() <= tol,
            format!("{label} potential positive reactors {x:.2}% (need {target} +/- {tol})"),
        );
    }
    v
}

fn three_sigma(observed: f64, expected: f64, sd: f64) -> bool {
    (observed - expected).abs() <= 3.0 * sd
}

fn samplers() -> Verdict {
    let mut v = Verdict::new("sampler suite (1e5 draws, 3 sigma)");
    let n = f64::from(DRAWS);

    let mut s = RandomStream::new(11);
    let xs: Vec<f64> = (0..DRAWS).map(|_| s.sample_normal(45.0, 20.0).unwrap()).collect();
    let m = mean(&xs);
    v.check(three_sigma(m, 45.0, 20.0 / n.sqrt()), format!("Normal(45, 20) mean {m:.4}"));

    let xs: Vec<f64> = (0..DRAWS).map(|_| s.sample_normal(0.0, 1.5).unwrap()).collect();
    let m = mean(&xs);
    let var = xs.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (n - 1.0);
    v.check(
        (var - 2.25).abs() <= VARIANCE_TOLERANCE * 2.25 && three_sigma(var, 2.25, 2.25 * (2.0 / (n - 1.0)).sqrt()),
        format!("Normal(0, 1.5) variance {var:.4} (target 2.25)"),
    );
    let before = s.draw_count();
    v.check(s.sample_normal(33.3, 0.0) == Ok(33.3) && s.draw_count() == before, "Normal(33.3, 0) is exactly 33.3");

    let ks: Vec<u64> = (0..DRAWS).map(|_| s.sample_poisson(87.5).unwrap()).collect();
    let m = ks.iter().sum::<u64>() as f64 / n;
    v.check(three_sigma(m, 87.5, (87.5 / n).sqrt()), format!("Poisson(87.5) mean {m:.4}"));

    let zeros = (0..DRAWS).filter(|_| s.sample_poisson(7.5).unwrap() == 0).count() as f64 / n;
    v.check(
        (zeros - (-7.5f64).exp()).abs() <= POISSON_ZERO_TOLERANCE,
        format!("Poisson(7.5) P[0] {zeros:.5} (exact {:.6})", (-7.5f64).exp()),
    );
    v.check(s.sample_poisson(0.0) == Ok(0), "Poisson(0) is 0");

    for (i, lambda) in [2.0, 7.5, 10.0, 75.0, 83.3].into_iter().enumerate() {
        let (stat, df) = poisson_chi_square(&mut RandomStream::new(20 + i as u64), lambda);
        let limit = df + 3.0 * (2.0 * df).sqrt();
        v.check(stat <= limit, format!("Poisson({lambda}) chi-square {stat:.1} on {df} df (limit {limit:.1})"));
    }

    let heads = (0..DRAWS).filter(|_| s.sample_bernoulli(50.0).unwrap()).count() as f64 / n;
    v.check((heads - 0.5).abs() <= BERNOULLI_TOLERANCE, format!("Bernoulli(50) true fraction {heads:.4}"));
    v.check(
        (0..1000).all(|_| !s.sample_bernoulli(0.0).unwrap() && s.sample_bernoulli(100.0).unwrap()),
        "Bernoulli(0) never, Bernoulli(100) always",
    );
    v
}

/// Pearson statistic against the Poisson pmf, tails pooled so that every
/// cell expects at least five counts.
fn poisson_chi_square(s: &mut RandomStream, lambda: f64) -> (f64, f64) {
    let n = f64::from(DRAWS);
    const CELLS: usize = 400;
    let mut counts = vec![0u64; CELLS];
    for _ in 0..DRAWS {
        let k = s.sample_poisson(lambda).unwrap() as usize;
        counts[k.min(CELLS - 1)] += 1;
    }
    let cdf = |k: i64| if k < 0 { 0.0 } else { poisson_cdf(lambda, k as u64) };
    let mut cells: Vec<(f64, f64)> = Vec::new();
    let (mut obs, mut lo) = (0.0, 0i64);
    for k in 0..counts.len() as i64 {
        obs += counts[k as usize] as f64;
        let expected = n * (cdf(k) - cdf(lo - 1));
        let rest = n * (1.0 - cdf(k));
        if expected >= 5.0 && rest >= 5.0 {
            cells.push((obs, expected));
            obs = 0.0;
            lo = k + 1;
        } else if rest < 5.0 {
            let tail_obs: f64 = obs + counts[(k as usize + 1)..].iter().sum::<u64>() as f64;
            cells.push((tail_obs, n * (1.0 - cdf(lo - 1))));
            break;
        }
    }
    let stat = cells.iter().map(|(o, e)| (o - e).powi(2) / e).sum();
    (stat, cells.len() as f64 - 1.0)
}

fn agent(c1: f64) -> Agent {
    Agent { id: 0, group: Group::NonMarginalized, c1, c2: 50.0 }
}

fn oracles() -> Verdict {
    let mut v = Verdict::new("oracle equivalence (1e5 trials, +/- 0.01)");
    let t = Thresholds { action: 66.6, positive: 50.0, negative: 15.0 };
    let freq = |seed: u64, f: &dyn Fn(&mut RandomStream) -> bool| {
        let mut s = RandomStream::new(seed);
        (0..DRAWS).filter(|_| f(&mut s)).count() as f64 / f64::from(DRAWS)
    };
    for c1 in [70.0, 80.0, 90.0, 100.0] {
        let observed = freq(c1 as u64, &|s| decide_action(&agent(c1), &t, s));
        let expected = poisson_cdf(83.3, c1 as u64);
        v.check(
            (observed - expected).abs() <= ORACLE_TOLERANCE,
            format!("act at c1 = {c1}: {observed:.4} vs P[Po(83.3) <= {c1}] = {expected:.4}"),
        );
    }
    for c1 in [50.0, 70.0, 80.0, 100.0] {
        let observed = freq(1000 + c1 as u64, &|s| classify_reaction(&agent(c1), &t, s) == Reaction::Positive);
        let expected = positive_probability(c1, &t);
        v.check(
            (observed - expected).abs() <= ORACLE_TOLERANCE,
            format!("positive at c1 = {c1}: {observed:.4} vs {expected:.4}"),
        );
    }
    for c1 in [5.0, 10.0, 15.0] {
        let observed = freq(2000 + c1 as u64, &|s| classify_reaction(&agent(c1), &t, s) == Reaction::Negative);
        let expected = negative_probability(c1, &t);
        v.check(
            (observed - expected).abs() <= ORACLE_TOLERANCE,
            format!("negative at c1 = {c1}: {observed:.4} vs {expected:.4}"),
        );
    }
    v
}

fn determinism() -> Verdict {
    let mut v = Verdict::new("determinism: identical CSV, session equals headless run");
    let config = scenario("trial1");
    let a = csv_string(&run(&config, 7, MAX_TICKS).unwrap().series);
    let b = csv_string(&run(&config, 7, MAX_TICKS).unwrap().series);
    v.check(a == b && !a.is_empty(), format!("trial1 seed 7 CSV twice: {} bytes, identical = {}", a.len(), a == b));

    let headless = run(&config, 7, MAX_TICKS).unwrap();
    let mut session = Session::new("acceptance", config, 7).unwrap();
    let mut matched = 0usize;
    let mut ok = true;
    for expected in &headless.series {
        let reply = session.handle_command(Command::Step { n: 1 }, &Bundled).unwrap();
        let mut m = reply.events[0].metrics.clone();
        if expected.stop == Some(StopReason::TickLimit) {
            m.stop = Some(StopReason::TickLimit);
        }
        if &m != expected {
            ok = false;
            break;
        }
        matched += 1;
    }
    ok &= session.simulation().state().agents == headless.final_agents;
    v.check(ok, format!("session matched {matched}/{} ticks and the final agents", headless.series.len()));
    v
}

prop_compose! {
    fn random_config()(
        population in 2u32..80,
        margin_size in 0.0..=100.0f64,
        critical_faculty in 0.0..=100.0f64,
        negative in 0.0..60.0f64,
        gap in 1.0..40.0f64,
        action in 0.0..=100.0f64,
        deltas in prop::collection::vec(-100.0..=100.0f64, 60),
        init_means in prop::array::uniform4(0.0..=100.0f64),
    ) -> ModelConfig {
        let mut c = ModelConfig {
            population,
            margin_size,
            critical_faculty,
            thresholds: Thresholds { action, positive: negative + gap, negative },
            ..ModelConfig::default()
        };
        for (key, d) in convicta_core::deltas::DeltaKey::all().into_iter().zip(deltas) {
            c.deltas.set(key, d);
        }
        let n = |mean| NormalParams { mean, deviation: 25.0 };
        c.init = ConvictionParams::new(n(init_means[0]), n(init_means[1]), n(init_means[2]), n(init_means[3]));
        c
    }
}

fn property(v: &mut Verdict, name: &str, test: impl Fn(ModelConfig, u64) -> Result<(), TestCaseError>) {
    let mut runner = TestRunner::new_with_rng(
        ProptestConfig { cases: PROPERTY_CASES, failure_persistence: None, ..ProptestConfig::default() },
        proptest::test_runner::TestRng::deterministic_rng(proptest::test_runner::RngAlgorithm::ChaCha),
    );
    let result = runner.run(&(random_config(), any::<u64>()), |(c, seed)| test(c, seed));
    match result {
        Ok(()) => v.check(true, format!("{name} ({PROPERTY_CASES} cases)")),
        Err(e) => v.check(false, format!("{name}: {e}")),
    }
}

fn simulate(config: &ModelConfig, seed: u64, ticks: usize, mut each: impl FnMut(&[Agent], &TickMetrics, &[convicta_core::InteractionOutcome])) {
    let mut stream = RandomStream::new(seed);
    let mut state = init_society(config, &mut stream);
    each(&state.agents, &snapshot_metrics(0, &state.agents, config, &[]), &[]);
    for _ in 0..ticks {
        if state.stopped.is_some() {
            break;
        }
        let outcomes = tick(&mut state, config, &mut stream);
        each(&state.agents, &snapshot_metrics(state.tick, &state.agents, config, &outcomes), &outcomes);
    }
}

fn invariants() -> Verdict {
    let mut v = Verdict::new("invariant suite (property tests)");
    property(&mut v, "convictions stay within [0, 100]", |c, seed| {
        let mut ok = true;
        simulate(&c, seed, 15, |agents, _, _| {
            ok &= agents.iter().all(|a| (0.0..=100.0).contains(&a.c1) && (0.0..=100.0).contains(&a.c2));
        });
        prop_assert!(ok);
        Ok(())
    });
    property(&mut v, "reactor bands partition each slice into 100%", |c, seed| {
        let mut worst: f64 = 0.0;
        simulate(&c, seed, 15, |_, m, _| {
            for s in [&m.all, &m.p, &m.m] {
                if s.count > 0 {
                    let total = s.pct_positive_reactors + s.pct_negative_reactors + s.pct_neutral_reactors;
                    worst = worst.max((total - 100.0).abs());
                }
            }
        });
        prop_assert!(worst <= 1e-9, "off by {}", worst);
        Ok(())
    });
    property(&mut v, "monitor identity p + m = population", |c, seed| {
        let mut ok = true;
        simulate(&c, seed, 5, |agents, m, _| {
            ok &= m.p.count + m.m.count == c.population
                && agents.len() == c.population as usize
                && m.m.count == c.marginalized_count();
        });
        prop_assert!(ok);
        Ok(())
    });
    let fig = ModelConfig { population: 257, ..ModelConfig::default() };
    let fig_session = Session::new("figure", fig, 0).unwrap().emit_state();
    v.check(
        fig_session.population_monitor() == "231 + 26 = 257",
        format!("population 257 at 10.5% reads {}", fig_session.population_monitor()),
    );
    property(&mut v, "critical_faculty 0/100 fixes every acceptance", |c, seed| {
        for (faculty, expected) in [(0.0, false), (100.0, true)] {
            let mut c = c.clone();
            c.critical_faculty = faculty;
            let mut ok = true;
            simulate(&c, seed, 10, |_, _, outcomes| {
                ok &= outcomes.iter().all(|o| o.accepted.is_none_or(|a| a == expected));
            });
            prop_assert!(ok, "critical_faculty {}", faculty);
        }
        Ok(())
    });
    property(&mut v, "zero deltas and zero noise leave convictions fixed", |c, seed| {
        let mut c = c;
        c.deltas = DeltaTable::zero();
        c.noise = ConvictionParams::zero();
        let mut first: Option<Vec<(f64, f64)>> = None;
        let mut ok = true;
        simulate(&c, seed, 20, |agents, _, _| {
            let now: Vec<(f64, f64)> = agents.iter().map(|a| (a.c1, a.c2)).collect();
            match &first {
                None => first = Some(now),
                Some(f) => ok &= *f == now,
            }
        });
        prop_assert!(ok);
        Ok(())
    });
    v
}

fn main() -> ExitCode {
    let started = std::time::Instant::now();
    let t1 = ensemble_of("trial1");
    let t2 = ensemble_of("trial2");
    let verdicts = [
        trial1(&t1),
        trial2(&t2),
        trends_verdict(&t1, &t2),
        initial_bands(),
        samplers(),
        oracles(),
        determinism(),
        invariants(),
    ];
    for v in &verdicts {
        v.print();
    }
    let failed = verdicts.iter().filter(|v| !v.passed()).count();
    println!(
        "acceptance: {} passed, {failed} failed ({:.1}s)",
        verdicts.len() - failed,
        started.elapsed().as_secs_f64()
    );
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
