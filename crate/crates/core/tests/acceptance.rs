//! Acceptance checks. Runs as a plain binary (`harness = false`) so every
//! criterion prints one PASS/FAIL line even when the others fail:
//!
//! ```text
//! cargo test -p ace-engine --test acceptance
//! ```

use std::fs;
use std::process::ExitCode;
use std::time::{Duration, Instant};

use ace_engine::adaptation::GrowthStudy;
use ace_engine::automaton::{self, diffusion_preset, Boundary, DiffusionVariant, Grid, Neighborhood, Rule, Topology};
use ace_engine::harness::{self, ExperimentConfig};
use ace_engine::hiddenaction::{
    classify_emergent_contracts, second_best_oracle, second_best_oracle_at, simulate, ModelParams, RunOutcome,
    ShiftTimes,
};
use ace_engine::organization::{run_org_from, CoordinationMode, OrgDesign, TaskComplexity};
use ace_engine::search::{climb, Evaluator, SearchStrategy, StrategyKind};
use ace_engine::{Configuration, InteractionPattern, Landscape, LandscapeSpec, Stream};
use rayon::prelude::*;

struct Outcome {
    pass: bool,
    detail: String,
}

fn check(pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome { pass, detail: detail.into() }
}

/// Fitness of every configuration straight from the contribution tables.
/// Index `m` has bit `i` at position `n - 1 - i`; a table entry is looked up
/// by `d_i` followed by the partners in listed order, most significant first.
fn brute_values(l: &Landscape) -> Vec<f64> {
    let n = l.n();
    (0..1usize << n)
        .map(|m| {
            let bit = |i: usize| (m >> (n - 1 - i)) & 1;
            let total: f64 = (0..n)
                .map(|i| {
                    let idx = l.interactions(i).iter().fold(bit(i), |acc, &j| (acc << 1) | bit(j));
                    l.table(i)[idx]
                })
                .sum();
            total / n as f64
        })
        .collect()
}

fn brute_optima(values: &[f64], n: usize) -> Vec<usize> {
    (0..values.len()).filter(|&m| (0..n).all(|b| values[m] > values[m ^ (1 << b)])).collect()
}

fn argmax(values: &[f64]) -> usize {
    (0..values.len()).fold(0, |best, m| if values[m] > values[best] { m } else { best })
}

fn nk(n: usize, k: usize, seed: u64) -> Landscape {
    Landscape::generate(LandscapeSpec::new(n, k, InteractionPattern::AdjacentCyclic, seed)).unwrap()
}

fn single_peak() -> Outcome {
    let mut failures = Vec::new();
    let mut checked = 0;
    for n in 1..=10 {
        for seed in 0..100 {
            let l = nk(n, 0, seed);
            let census = l.local_optima_census().unwrap();
            let (best, v) = l.global_optimum().unwrap();
            let values = brute_values(&l);
            let ok = census.count() == 1
                && census.optima[0].0 == best
                && census.optima[0].1 == v
                && brute_optima(&values, n) == vec![argmax(&values)]
                && best.to_index() as usize == argmax(&values);
            if !ok {
                failures.push(format!("N={n} seed={seed}"));
            }
            checked += 1;
        }
    }
    check(failures.is_empty(), format!("{checked} landscapes, failures: {failures:?}"))
}

fn ruggedness() -> Outcome {
    let seeds = 200u64;
    let counts: Vec<(usize, usize)> = (0..seeds)
        .into_par_iter()
        .map(|seed| {
            let l = nk(10, 9, seed);
            (l.local_optima_census().unwrap().count(), brute_optima(&brute_values(&l), 10).len())
        })
        .collect();
    let agree = counts.iter().all(|(a, b)| a == b);
    let mean = counts.iter().map(|c| c.0 as f64).sum::<f64>() / seeds as f64;
    let target = 1024.0 / 11.0;
    let rel = (mean - target).abs() / target;
    check(
        agree && rel <= 0.05,
        format!(
            "mean census {mean:.2} vs {target:.2} (rel. error {:.3}), census agrees with brute force: {agree}",
            rel
        ),
    )
}

fn climbs_contract() -> Outcome {
    let mut problems = Vec::new();
    let mut trajectories = 0usize;
    for n in [6usize, 8, 10] {
        for k in [1, 3, n - 1] {
            for seed in 0..5 {
                let l = nk(n, k, seed);
                let values = brute_values(&l);
                let optima = brute_optima(&values, n);
                for kind in [StrategyKind::SteepestAscent, StrategyKind::FirstImprovement] {
                    let strategy = SearchStrategy::new(kind, n);
                    let mut rng = Stream::root(seed).child("climb");
                    for start in 0..1u64 << n {
                        let trace = climb(
                            &l,
                            &strategy,
                            &Evaluator::perfect(),
                            Configuration::from_index(start, n),
                            1000,
                            false,
                            &mut rng,
                        )
                        .unwrap();
                        trajectories += 1;
                        let monotone = trace.values.windows(2).all(|w| w[1] >= w[0]);
                        let end = trace.last().to_index() as usize;
                        if !monotone || !trace.halted || optima.binary_search(&end).is_err() {
                            problems.push(format!("N={n} K={k} seed={seed} {kind:?} start={start}"));
                        }
                    }
                }
            }
        }
    }
    for n in 1..=10usize {
        for seed in 0..10 {
            let l = nk(n, 0, seed);
            let best = argmax(&brute_values(&l));
            let strategy = SearchStrategy::steepest(n);
            let mut rng = Stream::root(seed).child("k0");
            for start in 0..1u64 << n {
                let trace = climb(
                    &l,
                    &strategy,
                    &Evaluator::perfect(),
                    Configuration::from_index(start, n),
                    1000,
                    false,
                    &mut rng,
                )
                .unwrap();
                trajectories += 1;
                if trace.last().to_index() as usize != best || trace.path.len() - 1 > n {
                    problems.push(format!("K=0 N={n} seed={seed} start={start} steps={}", trace.path.len() - 1));
                }
            }
        }
    }
    problems.truncate(5);
    check(problems.is_empty(), format!("{trajectories} trajectories, first problems: {problems:?}"))
}

fn automaton_oracle() -> Outcome {
    let rule = Rule::totalistic(2, Neighborhood::LeftRight { radius: 1 }, vec![vec![0, 0, 1], vec![0, 0, 1]]).unwrap();
    let line =
        Grid::from_states(Topology::Line { len: 5 }, Boundary::Fixed { value: 0 }, 2, vec![0, 1, 1, 1, 0]).unwrap();
    let next = automaton::step(&line, &rule, &mut Stream::root(0)).unwrap();
    let example = next.states() == [0, 0, 1, 0, 0];

    let preset = diffusion_preset(DiffusionVariant::Deterministic, vec![5], 1).unwrap();
    let ring = preset.initial_grid(Topology::Ring { len: 11 }, Boundary::Wrap).unwrap();
    let traj = automaton::run(&ring, &preset.rule, 8, &mut Stream::root(0)).unwrap();
    let adopters: Vec<usize> = traj.counts.iter().map(|c| c[1]).collect();
    let complete_at = adopters.iter().position(|&a| a == 11);
    check(example && complete_at == Some(5), format!("[0,1,1,1,0] -> {:?}; ring adopters {adopters:?}", next.states()))
}

/// Independent steepest 1-flip climb of one block on its own block mean.
fn block_climb(l: &Landscape, block: std::ops::Range<usize>, start: &Configuration) -> Configuration {
    let mean = |c: &Configuration| {
        let contributions = l.contributions(c).unwrap();
        block.clone().map(|i| contributions[i]).sum::<f64>() / block.len() as f64
    };
    let mut current = start.clone();
    loop {
        let here = mean(&current);
        let best = block.clone().map(|i| current.flipped(&[i])).map(|c| (mean(&c), c)).fold(
            None::<(f64, Configuration)>,
            |acc, x| match acc {
                Some(a) if a.0 >= x.0 => Some(a),
                _ => Some(x),
            },
        );
        match best {
            Some((v, c)) if v > here => current = c,
            _ => return current,
        }
    }
}

fn organization_oracle() -> Outcome {
    let layouts: [&[usize]; 9] =
        [&[1], &[3], &[1, 1], &[2, 1], &[3, 3], &[2, 4], &[1, 2, 3], &[2, 2, 2], &[1, 1, 1, 1, 1, 1]];
    let mut problems = Vec::new();
    let mut runs = 0usize;
    for units in layouts {
        let org = OrgDesign::<f64>::new(units.to_vec());
        let n = org.n();
        let widest = *units.iter().max().unwrap();
        let full_block = SearchStrategy::steepest((1 << widest) - 1).with_local_radius(widest);
        let one_flip = SearchStrategy::steepest(widest);
        for seed in 0..20 {
            let l = Landscape::generate(TaskComplexity::Decomposable.landscape_spec(units, seed)).unwrap();
            let best = argmax(&brute_values(&l));
            let mut rng = Stream::root(seed).child("org");
            for start in 0..1u64 << n {
                let start = Configuration::from_index(start, n);
                let s =
                    run_org_from(&org, CoordinationMode::Decentralized, &l, &full_block, start.clone(), 4, &mut rng)
                        .unwrap();
                let s1 =
                    run_org_from(&org, CoordinationMode::Decentralized, &l, &one_flip, start.clone(), 40, &mut rng)
                        .unwrap();
                let mut expected = start.clone();
                for block in org.units() {
                    let climbed = block_climb(&l, block.clone(), &start);
                    for i in block {
                        expected.set(i, climbed.get(i));
                    }
                }
                runs += 2;
                if s.last().unwrap().config.to_index() as usize != best {
                    problems.push(format!("global {units:?} seed={seed} start={start}"));
                }
                if s1.last().unwrap().config != expected {
                    problems.push(format!("per-block {units:?} seed={seed} start={start}"));
                }
            }
        }
    }

    let mut periods = 0usize;
    let designs: [(&[usize], TaskComplexity); 4] = [
        (&[3, 3], TaskComplexity::NonDecomposable),
        (&[2, 2, 2, 2], TaskComplexity::NonDecomposable),
        (&[4, 4, 4], TaskComplexity::NonDecomposable),
        (&[4, 4, 4], TaskComplexity::Decomposable),
    ];
    let strategies = [
        SearchStrategy::steepest(2),
        SearchStrategy::new(StrategyKind::LongJump, 3),
        SearchStrategy::new(StrategyKind::FirstImprovement, 4),
    ];
    for (units, complexity) in designs {
        let org = OrgDesign::<f64>::new(units.to_vec());
        for strategy in &strategies {
            for seed in 0..50 {
                let l = Landscape::generate(complexity.landscape_spec(units, seed)).unwrap();
                let mut rng = Stream::root(seed).child("hq");
                let start = Configuration::random(org.n(), &mut rng);
                let s = run_org_from(&org, CoordinationMode::Hierarchical, &l, strategy, start, 50, &mut rng).unwrap();
                periods += s.len() - 1;
                if s.windows(2).any(|w| w[1].fitness < w[0].fitness) {
                    problems.push(format!("hierarchical decrease {units:?} {complexity:?} seed={seed}"));
                }
            }
        }
    }
    problems.truncate(5);
    check(
        problems.is_empty(),
        format!("{runs} decentralized runs, {periods} hierarchical periods, first problems: {problems:?}"),
    )
}

const GROWTH: &str = r#"
study = "growth-study"
replications = 10000
seed = 1

[growth]
units = [3, 3]
complexity = "non-decomposable"
horizon = 200
unit_noise = 0.05
hq_noise = 0.05
strategy = { kind = "long-jump", discovery_budget = 4, jump_radius_min = 2 }
learning = { interval = 5, gain = 1.0, forgetting = 0.1, floor = 0.001 }
schedule = { kind = "regular", first = 40, every = 40, count = 2, n_add = 3 }
"#;

/// Terminal-mode counts in the order decentralized, sequential-lateral,
/// hierarchical. Replication `r` uses the same streams as the harness.
fn terminal_modes(config: &ExperimentConfig) -> [usize; 3] {
    let g = config.growth.as_ref().unwrap();
    let finals: Vec<CoordinationMode> = (0..config.replications)
        .into_par_iter()
        .map(|r| {
            let rep = Stream::root(config.seed).child("growth-study").index(r as u64);
            let seed = rep.child("landscape").next_seed();
            let study: GrowthStudy<f64> = g.study(seed).unwrap();
            let series = study.run(&rep.child("growth")).unwrap();
            assert_eq!(series.last().unwrap().n_current, 12);
            series.last().unwrap().active_mode
        })
        .collect();
    let mut counts = [0; 3];
    for m in finals {
        counts[m.index()] += 1;
    }
    counts
}

fn growth_direction() -> Outcome {
    let explore = ExperimentConfig::from_toml_str(GROWTH).unwrap();
    let mut exploit = explore.clone();
    exploit.growth.as_mut().unwrap().strategy = SearchStrategy::steepest(4);
    let r = explore.replications as f64;
    let ce = terminal_modes(&explore);
    let ci = terminal_modes(&exploit);
    let (p1, p2) = (ce[2] as f64 / r, ci[2] as f64 / r);
    let pooled = (p1 + p2) / 2.0;
    let z = (p1 - p2) / (pooled * (1.0 - pooled) * 2.0 / r).sqrt();
    let modal = ce[2] > ce[0] && ce[2] > ce[1];
    check(
        modal && z > 1.645,
        format!(
            "R={r} per arm; explore {ce:?} exploit {ci:?} (decentralized, sequential, hierarchical); \
             hierarchical {p1:.4} vs {p2:.4}, z = {z:.2}"
        ),
    )
}

fn hidden_action_oracle() -> Outcome {
    let levels = [0.0, 0.5, 1.0, 2.0];
    let cell = 1.0 / 100.0;
    let mut worst: f64 = 0.0;
    for eta in levels {
        for var in levels {
            let params = ModelParams { risk_aversion: eta, sigma: f64::sqrt(var), ..ModelParams::new() };
            let o = second_best_oracle(&params);
            let star = 1.0 / (1.0 + eta * var);
            worst = worst.max((o.contract.premium - star).abs()).max((o.effort - star).abs());
        }
    }
    let mut hits = 0usize;
    let mut periods = 0usize;
    for eta in levels {
        for mu in [-0.5, 0.0, 0.5] {
            let params = ModelParams { risk_aversion: eta, sigma: 0.0, mu, ..ModelParams::new() };
            let o = second_best_oracle(&params);
            let rows = simulate(&params, 25, &Stream::root(3)).unwrap();
            periods += rows.len();
            hits += rows
                .iter()
                .filter(|r| {
                    r.premium == o.contract.premium
                        && r.effort == Some(o.effort)
                        && (r.principal_net - o.expected_net).abs() < 1e-12
                })
                .count();
        }
    }
    check(
        worst <= cell + 1e-12 && hits == periods,
        format!("max grid deviation {worst:.4} (cell {cell}); oracle hit in {hits}/{periods} full-information periods"),
    )
}

const HIDDEN_ACTION: &str = r#"
study = "hidden-action"
replications = 1000
seed = 1

[hidden-action]
horizon = 50

[hidden-action.turbulence]
shifts = { kind = "every", every = 10 }
mu_range = [-0.5, 0.5]
sigma_range = [0.5, 1.5]

[hidden-action.principal]
visibility = 0.1
memory = 10
exploration = 0.2
prior = { kind = "fixed", mean = 0.0, variance = 1.0 }

[hidden-action.agent]
visibility = 0.1
memory = 10
exploration = 0.2
prior = { kind = "fixed", mean = 0.0, variance = 1.0 }
"#;

struct ArmStats {
    mean_net: f64,
    mean_oracle_net: f64,
    above: f64,
}

fn hidden_action_arm(params: &ModelParams<f64>, horizon: usize, replications: usize, seed: u64) -> ArmStats {
    let runs: Vec<(f64, f64, RunOutcome<f64>)> = (0..replications)
        .into_par_iter()
        .map(|r| {
            let rows = simulate(params, horizon, &Stream::root(seed).child("hidden-action").index(r as u64)).unwrap();
            let net: f64 = rows.iter().map(|p| p.principal_net).sum();
            let oracle: f64 = rows.iter().map(|p| second_best_oracle_at(params, p.mu, p.sigma).expected_net).sum();
            (net, oracle, RunOutcome::from_series(params, &rows).unwrap())
        })
        .collect();
    let periods = (replications * horizon) as f64;
    let outcomes: Vec<RunOutcome<f64>> = runs.iter().map(|r| r.2.clone()).collect();
    ArmStats {
        mean_net: runs.iter().map(|r| r.0).sum::<f64>() / periods,
        mean_oracle_net: runs.iter().map(|r| r.1).sum::<f64>() / periods,
        above: classify_emergent_contracts(&outcomes, None).unwrap().above,
    }
}

fn emergent_contracts() -> Outcome {
    let config = ExperimentConfig::from_toml_str(HIDDEN_ACTION).unwrap();
    let h = config.hidden_action.as_ref().unwrap();
    let turbulent = h.params();
    let mut stable = turbulent.clone();
    stable.turbulence.shifts = ShiftTimes::Stable;
    let s = hidden_action_arm(&stable, h.horizon, config.replications, config.seed);
    let t = hidden_action_arm(&turbulent, h.horizon, config.replications, config.seed);
    check(
        s.mean_net <= s.mean_oracle_net && t.mean_net <= t.mean_oracle_net && t.above >= s.above,
        format!(
            "R={} per arm; mean net stable {:.4} (oracle {:.4}), turbulent {:.4} (oracle {:.4}); \
             share above p*: stable {:.3}, turbulent {:.3}",
            config.replications, s.mean_net, s.mean_oracle_net, t.mean_net, t.mean_oracle_net, s.above, t.above
        ),
    )
}

const SMALL_CONFIGS: [&str; 5] = [
    "study = \"nk-analysis\"\nseed = 3\n[nk]\nn = 8\nk = 2\nclimbs = 5\nsigma_eval = 0.05\n",
    "study = \"automaton\"\nseed = 3\n[automaton]\ntopology = { kind = \"torus\", rows = 6, cols = 6 }\nsteps = 5\n\
     rule = { kind = \"diffusion\", variant = { kind = \"stochastic\", p = 0.5 }, threshold = 1, early_adopters = [0, 20] }\n",
    "study = \"org-search\"\nseed = 3\n[org]\nunits = [2, 2, 2]\ncomplexity = \"non-decomposable\"\nmode = \"sequential-lateral\"\n\
     strategy = { kind = \"steepest-ascent\", discovery_budget = 2 }\nperiods = 20\nunit_noise = 0.1\n",
    "study = \"growth-study\"\nseed = 3\n[growth]\nunits = [2, 2]\ncomplexity = \"decomposable\"\nhorizon = 30\nunit_noise = 0.05\n\
     strategy = { kind = \"steepest-ascent\", discovery_budget = 2 }\nlearning = { interval = 5, gain = 1.0, forgetting = 0.1 }\n\
     schedule = { kind = \"regular\", first = 10, every = 10, count = 1, n_add = 2 }\n",
    "study = \"hidden-action\"\nseed = 3\n[hidden-action]\nhorizon = 20\nturbulence = { shifts = { kind = \"every\", every = 5 }, \
     mu_range = [-0.5, 0.5], sigma_range = [0.5, 1.5] }\nprincipal = { visibility = 0.2, memory = 5, exploration = 0.3 }\n",
];

fn reproducibility() -> Outcome {
    let dir = tempfile::tempdir().unwrap();
    let mut problems = Vec::new();
    for (i, text) in SMALL_CONFIGS.iter().enumerate() {
        let mut config = ExperimentConfig::from_toml_str(text).unwrap();
        config.replications = 4;
        let mut outputs = Vec::new();
        for (tag, r) in [("a", 4), ("b", 4), ("c", 7)] {
            config.replications = r;
            config.output_dir = Some(dir.path().join(format!("{i}{tag}")));
            let report = harness::run_experiment(&config).unwrap();
            let runs = fs::read(report.output_dir.join("runs.csv")).unwrap();
            let summary = fs::read(report.output_dir.join("summary.csv")).unwrap();
            outputs.push((runs, summary));
        }
        let study = config.study.label();
        if outputs[0] != outputs[1] {
            problems.push(format!("{study}: repeated run differs"));
        }
        let short = String::from_utf8(outputs[0].0.clone()).unwrap();
        let long = String::from_utf8(outputs[2].0.clone()).unwrap();
        if !long.starts_with(&short) || long.len() == short.len() {
            problems.push(format!("{study}: rows for existing replications changed"));
        }
    }
    check(problems.is_empty(), format!("5 studies, problems: {problems:?}"))
}

type Criterion = (&'static str, Duration, fn() -> Outcome);

fn main() -> ExitCode {
    let criteria: [Criterion; 9] = [
        ("K=0 single peak", Duration::from_secs(10), single_peak),
        ("ruggedness at K=N-1", Duration::from_secs(30), ruggedness),
        ("hill-climbing contract", Duration::from_secs(30), climbs_contract),
        ("automaton oracle", Duration::from_secs(1), automaton_oracle),
        ("organization oracle", Duration::from_secs(30), organization_oracle),
        ("growth direction", Duration::from_secs(600), growth_direction),
        ("hidden-action oracle", Duration::from_secs(10), hidden_action_oracle),
        ("emergent-contract direction", Duration::from_secs(300), emergent_contracts),
        ("reproducibility", Duration::from_secs(10), reproducibility),
    ];
    let mut failed = 0;
    for (i, (name, budget, run)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let outcome = run();
        let took = start.elapsed();
        let pass = outcome.pass && took <= *budget;
        if !pass {
            failed += 1;
        }
        println!(
            "{} {}. {name} ({:.2} s, budget {} s): {}",
            if pass { "PASS" } else { "FAIL" },
            i + 1,
            took.as_secs_f64(),
            budget.as_secs(),
            outcome.detail
        );
    }
    if failed == 0 {
        println!("acceptance: all {} criteria passed", criteria.len());
        ExitCode::SUCCESS
    } else {
        println!("acceptance: {failed} of {} criteria failed", criteria.len());
        ExitCode::FAILURE
    }
}
