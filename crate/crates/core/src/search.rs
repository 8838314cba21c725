//! Stepwise adaptive search over binary configurations.
//!
//! A search step has two halves: [`discover`] proposes a limited set of
//! candidate configurations around the status quo and [`choose`] keeps the
//! status quo unless some candidate is *perceived* as strictly better.
//! Perception goes through an [`Evaluator`] that adds zero-mean Gaussian
//! noise to the true value, with a fresh draw for every evaluation.

use std::collections::HashSet;

use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::landscape::{index_combinations, Configuration, Landscape};
use crate::rng::Stream;
use crate::scalar::Scalar;

/// Flip-set pools up to this size are enumerated and sampled exactly;
/// larger ones use rejection sampling.
const ENUMERATION_LIMIT: u128 = 1 << 12;

/// Written as a plain string in configs, except `{ ambidextrous = { p_explore = 0.3 } }`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", deny_unknown_fields)]
pub enum StrategyKind {
    SteepestAscent,
    FirstImprovement,
    LongJump,
    Ambidextrous { p_explore: f64 },
}

/// How a candidate list is turned into a decision.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ChoiceRule {
    Steepest,
    FirstImprovement,
}

impl StrategyKind {
    /// Only first-improvement stops at the first better candidate; every
    /// other kind picks the perceived best.
    pub fn choice_rule(&self) -> ChoiceRule {
        match self {
            Self::FirstImprovement => ChoiceRule::FirstImprovement,
            _ => ChoiceRule::Steepest,
        }
    }
}

fn default_budget() -> usize {
    1
}

fn default_local_radius() -> usize {
    1
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SearchStrategy {
    pub kind: StrategyKind,
    #[serde(default = "default_budget")]
    pub discovery_budget: usize,
    #[serde(default = "default_local_radius")]
    pub local_radius: usize,
    /// Minimum Hamming distance of a long jump; defaults to half the number
    /// of searchable bits, and never less than 2.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub jump_radius_min: Option<usize>,
}

impl SearchStrategy {
    pub fn new(kind: StrategyKind, discovery_budget: usize) -> Self {
        Self { kind, discovery_budget, local_radius: 1, jump_radius_min: None }
    }

    pub fn steepest(discovery_budget: usize) -> Self {
        Self::new(StrategyKind::SteepestAscent, discovery_budget)
    }

    pub fn with_jump_radius_min(mut self, r: usize) -> Self {
        self.jump_radius_min = Some(r);
        self
    }

    pub fn with_local_radius(mut self, r: usize) -> Self {
        self.local_radius = r;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.discovery_budget == 0 {
            return Err(Error::InvalidParameter("discovery_budget must be at least 1".into()));
        }
        if self.local_radius == 0 {
            return Err(Error::InvalidParameter("local_radius must be at least 1".into()));
        }
        if let Some(r) = self.jump_radius_min {
            if r < 2 {
                return Err(Error::InvalidParameter("jump_radius_min must be at least 2".into()));
            }
        }
        if let StrategyKind::Ambidextrous { p_explore } = self.kind {
            if !(0.0..=1.0).contains(&p_explore) {
                return Err(Error::InvalidParameter(format!("p_explore {p_explore} outside [0, 1]")));
            }
        }
        Ok(())
    }

    /// Effective long-jump minimum for `bits` searchable bits.
    pub fn jump_min_for(&self, bits: usize) -> usize {
        self.jump_radius_min.unwrap_or((bits / 2).max(2))
    }
}

/// Noisy judgment of values: `perceived = true + sigma * N(0, 1)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Evaluator<S> {
    pub sigma: S,
}

impl<S: Scalar> Evaluator<S> {
    pub fn new(sigma: S) -> Self {
        Self { sigma }
    }

    pub fn perfect() -> Self {
        Self { sigma: S::zero() }
    }

    /// Perceived value. A perfect evaluator consumes no draws.
    pub fn perceive(&self, true_value: S, rng: &mut Stream) -> S {
        if self.sigma == S::zero() {
            return true_value;
        }
        let z: f64 = StandardNormal.sample(rng);
        true_value + self.sigma * S::of(z)
    }
}

fn binomial(n: usize, r: usize) -> u128 {
    if r > n {
        return 0;
    }
    let r = r.min(n - r);
    (0..r).fold(1u128, |acc, i| acc * (n - i) as u128 / (i + 1) as u128)
}

/// Uniform sampler of distinct flip sets with size in `lo..=hi` over `m`
/// positions.
struct FlipSampler {
    m: usize,
    lo: usize,
    hi: usize,
    total: u128,
    remaining: Option<Vec<Vec<usize>>>,
}

impl FlipSampler {
    fn new(m: usize, lo: usize, hi: usize) -> Self {
        let hi = hi.min(m);
        let lo = lo.max(1);
        let total: u128 = (lo..=hi).map(|r| binomial(m, r)).sum();
        let remaining =
            (total <= ENUMERATION_LIMIT).then(|| (lo..=hi).flat_map(|r| index_combinations(m, r)).collect());
        Self { m, lo, hi, total, remaining }
    }

    fn draw(&mut self, seen: &HashSet<Vec<usize>>, rng: &mut Stream) -> Option<Vec<usize>> {
        if let Some(pool) = self.remaining.as_mut() {
            while !pool.is_empty() {
                let pick = pool.swap_remove(rng.below(pool.len()));
                if !seen.contains(&pick) {
                    return Some(pick);
                }
            }
            return None;
        }
        let taken = seen.iter().filter(|s| (self.lo..=self.hi).contains(&s.len())).count() as u128;
        if taken >= self.total {
            return None;
        }
        loop {
            let candidate = self.random_set(rng);
            if !seen.contains(&candidate) {
                return Some(candidate);
            }
        }
    }

    fn random_set(&self, rng: &mut Stream) -> Vec<usize> {
        // radius weighted by the number of sets of that size
        let mut target = rng.uniform() * self.total as f64;
        let mut radius = self.hi;
        for r in self.lo..=self.hi {
            let w = binomial(self.m, r) as f64;
            if target < w {
                radius = r;
                break;
            }
            target -= w;
        }
        let mut pool: Vec<usize> = (0..self.m).collect();
        for slot in 0..radius {
            let pick = slot + rng.below(self.m - slot);
            pool.swap(slot, pick);
        }
        let mut set = pool[..radius].to_vec();
        set.sort_unstable();
        set
    }
}

/// Candidates around `current` over all of its bits.
pub fn discover(strategy: &SearchStrategy, current: &Configuration, rng: &mut Stream) -> Vec<Configuration> {
    let all: Vec<usize> = (0..current.len()).collect();
    discover_within(strategy, current, &all, rng)
}

/// Candidates that differ from `current` only in the `free` positions.
///
/// Local candidates lie within `local_radius` of `current`, long jumps at
/// least `jump_radius_min` away; sampling is uniform without replacement and
/// the budget is capped by the size of the available neighbourhood.
pub fn discover_within(
    strategy: &SearchStrategy,
    current: &Configuration,
    free: &[usize],
    rng: &mut Stream,
) -> Vec<Configuration> {
    let m = free.len();
    let jump_min = strategy.jump_min_for(m);
    let local = || FlipSampler::new(m, 1, strategy.local_radius);
    let jump = || FlipSampler::new(m, jump_min, m);
    let mut seen: HashSet<Vec<usize>> = HashSet::new();
    let mut picked: Vec<Vec<usize>> = Vec::new();
    let take = |set: Vec<usize>, seen: &mut HashSet<Vec<usize>>, picked: &mut Vec<Vec<usize>>| {
        seen.insert(set.clone());
        picked.push(set);
    };
    match strategy.kind {
        StrategyKind::SteepestAscent | StrategyKind::FirstImprovement => {
            let mut s = local();
            while picked.len() < strategy.discovery_budget {
                let Some(set) = s.draw(&seen, rng) else { break };
                take(set, &mut seen, &mut picked);
            }
        }
        StrategyKind::LongJump => {
            let mut s = jump();
            while picked.len() < strategy.discovery_budget {
                let Some(set) = s.draw(&seen, rng) else { break };
                take(set, &mut seen, &mut picked);
            }
        }
        StrategyKind::Ambidextrous { p_explore } => {
            let (mut l, mut j) = (local(), jump());
            while picked.len() < strategy.discovery_budget {
                let explore = if p_explore <= 0.0 {
                    false
                } else if p_explore >= 1.0 {
                    true
                } else {
                    rng.chance(p_explore)
                };
                let (first, second) = if explore { (&mut j, &mut l) } else { (&mut l, &mut j) };
                let Some(set) = first.draw(&seen, rng).or_else(|| second.draw(&seen, rng)) else { break };
                take(set, &mut seen, &mut picked);
            }
        }
    }
    picked
        .into_iter()
        .map(|set| {
            let flips: Vec<usize> = set.iter().map(|&p| free[p]).collect();
            current.flipped(&flips)
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct Choice<S> {
    pub chosen: Configuration,
    pub moved: bool,
    pub perceived_current: S,
    /// Perceived value of the chosen configuration.
    pub perceived_chosen: S,
}

/// Keep `current` unless a candidate is perceived strictly better.
///
/// The status quo is perceived first (or taken from `cached_current`), then
/// candidates in discovery order. First-improvement stops evaluating at the
/// first strictly better candidate; steepest ascent evaluates all and keeps
/// the earliest of equally perceived maxima.
pub fn choose<S, F>(
    current: &Configuration,
    candidates: &[Configuration],
    objective: F,
    evaluator: &Evaluator<S>,
    rule: ChoiceRule,
    cached_current: Option<S>,
    rng: &mut Stream,
) -> Choice<S>
where
    S: Scalar,
    F: Fn(&Configuration) -> S,
{
    let status_quo = cached_current.unwrap_or_else(|| evaluator.perceive(objective(current), rng));
    let mut best: Option<(usize, S)> = None;
    for (i, cand) in candidates.iter().enumerate() {
        let seen = evaluator.perceive(objective(cand), rng);
        match rule {
            ChoiceRule::FirstImprovement => {
                if seen > status_quo {
                    best = Some((i, seen));
                    break;
                }
            }
            ChoiceRule::Steepest => {
                if best.is_none_or(|(_, b)| seen > b) {
                    best = Some((i, seen));
                }
            }
        }
    }
    match best {
        Some((i, seen)) if seen > status_quo => {
            Choice { chosen: candidates[i].clone(), moved: true, perceived_current: status_quo, perceived_chosen: seen }
        }
        _ => Choice {
            chosen: current.clone(),
            moved: false,
            perceived_current: status_quo,
            perceived_chosen: status_quo,
        },
    }
}

/// One discover + choose step on the whole landscape.
pub fn search_step<S: Scalar>(
    landscape: &Landscape<S>,
    strategy: &SearchStrategy,
    evaluator: &Evaluator<S>,
    current: &Configuration,
    rng: &mut Stream,
) -> Result<Choice<S>> {
    if current.len() != landscape.n() {
        return Err(Error::LengthMismatch { expected: landscape.n(), got: current.len() });
    }
    let candidates = discover(strategy, current, rng);
    Ok(choose(
        current,
        &candidates,
        |c| landscape.fitness_of(c.bits()),
        evaluator,
        strategy.kind.choice_rule(),
        None,
        rng,
    ))
}

#[derive(Debug, Clone, PartialEq)]
pub struct ClimbTrace<S> {
    /// Visited configurations, starting with the start point.
    pub path: Vec<Configuration>,
    /// True fitness along `path`.
    pub values: Vec<S>,
    /// Whether the climb stopped because a step kept the status quo.
    pub halted: bool,
}

impl<S: Scalar> ClimbTrace<S> {
    pub fn last(&self) -> &Configuration {
        self.path.last().expect("path holds the start")
    }
}

/// Repeated search steps from `start` until a step keeps the status quo or
/// `max_steps` moves were made. With `cache_perception` the status quo keeps
/// the value it was perceived at when adopted instead of being re-judged.
pub fn climb<S: Scalar>(
    landscape: &Landscape<S>,
    strategy: &SearchStrategy,
    evaluator: &Evaluator<S>,
    start: Configuration,
    max_steps: usize,
    cache_perception: bool,
    rng: &mut Stream,
) -> Result<ClimbTrace<S>> {
    strategy.validate()?;
    let mut values = vec![landscape.fitness(&start)?];
    let mut path = vec![start];
    let mut cached = None;
    for _ in 0..max_steps {
        let current = path.last().expect("non-empty");
        let candidates = discover(strategy, current, rng);
        let choice = choose(
            current,
            &candidates,
            |c| landscape.fitness_of(c.bits()),
            evaluator,
            strategy.kind.choice_rule(),
            cached,
            rng,
        );
        if !choice.moved {
            return Ok(ClimbTrace { path, values, halted: true });
        }
        if cache_perception {
            cached = Some(choice.perceived_chosen);
        }
        values.push(landscape.fitness_of(choice.chosen.bits()));
        path.push(choice.chosen);
    }
    Ok(ClimbTrace { path, values, halted: false })
}
