use std::collections::HashMap;

use ace_engine::organization::{run_org, run_org_from, CoordinationMode, OrgDesign, TaskComplexity};
use ace_engine::search::SearchStrategy;
use ace_engine::{Configuration, InteractionPattern, Landscape, LandscapeF32, LandscapeSpec, Stream};

/// Interactions and contribution tables read back from a dump without the
/// engine's parser.
struct Dumped {
    n: usize,
    partners: Vec<Vec<usize>>,
    entries: HashMap<(usize, String), f64>,
}

fn read_dump(text: &str) -> Dumped {
    let mut n = 0;
    let mut partners = Vec::new();
    let mut entries = HashMap::new();
    for line in text.lines().skip(1) {
        let fields: Vec<&str> = line.split_whitespace().collect();
        match fields.as_slice() {
            ["n", v] => {
                n = v.parse().unwrap();
                partners = vec![Vec::new(); n];
            }
            ["interactions", i, rest @ ..] => {
                partners[i.parse::<usize>().unwrap()] = rest.iter().map(|j| j.parse().unwrap()).collect();
            }
            ["c", i, pattern, value] => {
                entries.insert((i.parse().unwrap(), pattern.to_string()), value.parse().unwrap());
            }
            _ => {}
        }
    }
    Dumped { n, partners, entries }
}

impl Dumped {
    fn fitness(&self, bits: &[u8]) -> f64 {
        let total: f64 = (0..self.n)
            .map(|i| {
                let mut pattern = bits[i].to_string();
                for &j in &self.partners[i] {
                    pattern.push_str(&bits[j].to_string());
                }
                self.entries[&(i, pattern)]
            })
            .sum();
        total / self.n as f64
    }
}

#[test]
fn dump_brute_force_agrees_with_enumeration() {
    let l = Landscape::generate(LandscapeSpec::new(10, 3, InteractionPattern::AdjacentCyclic, 7)).unwrap();
    let dump = l.dump();
    let d = read_dump(&dump);
    assert_eq!(d.n, 10);
    assert_eq!(d.entries.len(), 10 * 16);

    let configs: Vec<Vec<u8>> =
        (0..1u32 << 10).map(|m| (0..10).map(|i| ((m >> (9 - i)) & 1) as u8).collect()).collect();
    let values: Vec<f64> = configs.iter().map(|c| d.fitness(c)).collect();
    let engine = l.enumerate_values(24).unwrap();
    for (m, (a, b)) in values.iter().zip(&engine).enumerate() {
        assert!((a - b).abs() < 1e-15, "configuration {m}: {a} vs {b}");
    }

    let best = (0..values.len()).fold(0, |b, m| if values[m] > values[b] { m } else { b });
    let (argmax, max) = l.global_optimum().unwrap();
    assert_eq!(argmax.to_index(), best as u64);
    assert!((max - values[best]).abs() < 1e-15);

    let optima: Vec<u64> =
        (0..values.len()).filter(|&m| (0..10).all(|b| values[m] > values[m ^ (1 << b)])).map(|m| m as u64).collect();
    let census: Vec<u64> = l.local_optima_census().unwrap().optima.iter().map(|(c, _)| c.to_index()).collect();
    assert_eq!(census, optima);
    assert!(optima.len() > 1);
}

#[test]
fn single_precision_landscapes_track_double() {
    let spec = LandscapeSpec::new(8, 2, InteractionPattern::RandomWithoutReplacement, 11);
    let double = Landscape::generate(spec.clone()).unwrap();
    let single = LandscapeF32::generate(spec).unwrap();
    let mut rng = Stream::root(2);
    for _ in 0..50 {
        let c = Configuration::random(8, &mut rng);
        let a = double.fitness(&c).unwrap();
        let b = single.fitness(&c).unwrap();
        assert!((a - f64::from(b)).abs() < 1e-6);
    }
}

#[test]
fn hierarchy_beats_decentralization_on_coupled_tasks() {
    let units = vec![3, 3, 3, 3];
    let org = OrgDesign::<f64>::new(units.clone());
    let strategy = SearchStrategy::steepest(2);
    let seeds = 200u64;
    let diffs: Vec<f64> = (0..seeds)
        .map(|seed| {
            let l = Landscape::generate(TaskComplexity::NonDecomposable.landscape_spec(&units, seed)).unwrap();
            let start = Configuration::random(12, &mut Stream::root(seed).child("start"));
            let last = |mode| {
                let mut rng = Stream::root(seed).child("search");
                let s = run_org_from(&org, mode, &l, &strategy, start.clone(), 100, &mut rng).unwrap();
                s.last().unwrap().fitness
            };
            last(CoordinationMode::Hierarchical) - last(CoordinationMode::Decentralized)
        })
        .collect();
    let n = diffs.len() as f64;
    let mean = diffs.iter().sum::<f64>() / n;
    let sd = (diffs.iter().map(|d| (d - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt();
    let se = sd / n.sqrt();
    assert!(mean > 1.96 * se, "hierarchical - decentralized = {mean} (se {se})");
}

#[test]
fn single_unit_organizations_ignore_the_mode() {
    for seed in 0..20 {
        let l = Landscape::generate(TaskComplexity::NonDecomposable.landscape_spec(&[6], seed)).unwrap();
        let org = OrgDesign::<f64>::new(vec![6]);
        let runs: Vec<Vec<Configuration>> =
            [CoordinationMode::Decentralized, CoordinationMode::SequentialLateral, CoordinationMode::Hierarchical]
                .into_iter()
                .map(|mode| {
                    run_org(&org, mode, &l, &SearchStrategy::steepest(3), 20, &mut Stream::root(seed))
                        .unwrap()
                        .into_iter()
                        .map(|r| r.config)
                        .collect()
                })
                .collect();
        assert_eq!(runs[0], runs[1]);
        assert_eq!(runs[0], runs[2]);
    }
}
