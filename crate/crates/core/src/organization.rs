//! Multi-unit firms searching a shared landscape.
//!
//! The firm's attributes are split into contiguous blocks, one per unit.
//! Units only ever search their own bits, judging candidates by a weighted
//! mix of their own block's mean contribution and the rest of the firm's.
//! The [`CoordinationMode`] decides how the units' choices become the next
//! firm configuration.

use std::fmt;
use std::ops::Range;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::landscape::{contiguous_ranges, Configuration, InteractionPattern, Landscape, LandscapeSpec};
use crate::rng::Stream;
use crate::scalar::Scalar;
use crate::search::{choose, discover_within, Evaluator, SearchStrategy};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CoordinationMode {
    Decentralized,
    SequentialLateral,
    Hierarchical,
}

impl CoordinationMode {
    pub const ALL: [Self; 3] = [Self::Decentralized, Self::SequentialLateral, Self::Hierarchical];

    pub fn index(self) -> usize {
        match self {
            Self::Decentralized => 0,
            Self::SequentialLateral => 1,
            Self::Hierarchical => 2,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Self::Decentralized => "decentralized",
            Self::SequentialLateral => "sequential-lateral",
            Self::Hierarchical => "hierarchical",
        }
    }
}

impl fmt::Display for CoordinationMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for CoordinationMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|m| m.name() == s)
            .ok_or_else(|| Error::InvalidParameter(format!("unknown coordination mode {s:?}")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TaskComplexity {
    /// Block-diagonal interactions aligned with the units.
    Decomposable,
    /// Every attribute interacts with every other (`K = N - 1`).
    NonDecomposable,
}

impl TaskComplexity {
    /// Landscape spec matching this complexity for the given unit blocks.
    pub fn landscape_spec(self, unit_sizes: &[usize], seed: u64) -> LandscapeSpec {
        let n: usize = unit_sizes.iter().sum();
        match self {
            Self::Decomposable => LandscapeSpec::new(
                n,
                unit_sizes.iter().copied().max().unwrap_or(1).saturating_sub(1),
                InteractionPattern::BlockDiagonal { blocks: unit_sizes.to_vec() },
                seed,
            ),
            Self::NonDecomposable => {
                LandscapeSpec::new(n, n.saturating_sub(1), InteractionPattern::AdjacentCyclic, seed)
            }
        }
    }
}

/// How headquarters treats proposals in hierarchical mode.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum HqPolicy {
    /// Implement only the proposal with the highest perceived firm fitness.
    #[default]
    SingleBest,
    /// Implement every proposal perceived to beat the status quo.
    AllApproved,
}

#[derive(Debug, Clone, PartialEq)]
pub struct OrgDesign<S> {
    pub unit_sizes: Vec<usize>,
    pub headquarters: bool,
    /// Weight on the own-block mean in each unit's objective.
    pub incentive_weight: S,
    pub unit_noise: S,
    pub hq_noise: S,
    /// Probability that each announced bit arrives flipped.
    pub announcement_error: S,
    pub hq_policy: HqPolicy,
}

impl<S: Scalar> OrgDesign<S> {
    /// Units of the given sizes, with headquarters, `w = 1`, perfect
    /// evaluation and error-free communication.
    pub fn new(unit_sizes: Vec<usize>) -> Self {
        Self {
            unit_sizes,
            headquarters: true,
            incentive_weight: S::one(),
            unit_noise: S::zero(),
            hq_noise: S::zero(),
            announcement_error: S::zero(),
            hq_policy: HqPolicy::SingleBest,
        }
    }

    pub fn n(&self) -> usize {
        self.unit_sizes.iter().sum()
    }

    pub fn unit_count(&self) -> usize {
        self.unit_sizes.len()
    }

    pub fn units(&self) -> Vec<Range<usize>> {
        contiguous_ranges(&self.unit_sizes)
    }

    pub fn validate(&self) -> Result<()> {
        if self.unit_sizes.is_empty() || self.unit_sizes.contains(&0) {
            return Err(Error::InvalidParameter("every unit must own at least one attribute".into()));
        }
        let unit = S::zero()..=S::one();
        if !unit.contains(&self.incentive_weight) {
            return Err(Error::InvalidParameter("incentive_weight must lie in [0, 1]".into()));
        }
        if !unit.contains(&self.announcement_error) {
            return Err(Error::InvalidParameter("announcement_error must lie in [0, 1]".into()));
        }
        if !(self.unit_noise >= S::zero() && self.hq_noise >= S::zero()) {
            return Err(Error::InvalidParameter("evaluation noise must be non-negative".into()));
        }
        Ok(())
    }

    fn check(&self, mode: CoordinationMode, landscape: &Landscape<S>, config: &Configuration) -> Result<()> {
        self.validate()?;
        if mode == CoordinationMode::Hierarchical && !self.headquarters {
            return Err(Error::MissingHeadquarters(mode.name()));
        }
        if self.n() != landscape.n() {
            return Err(Error::InvalidParameter(format!(
                "units own {} attributes but the landscape has {}",
                self.n(),
                landscape.n()
            )));
        }
        if config.len() != landscape.n() {
            return Err(Error::LengthMismatch { expected: landscape.n(), got: config.len() });
        }
        Ok(())
    }
}

/// `w * mean(own block) + (1 - w) * mean(other blocks)`. A unit that owns
/// the whole firm scores the plain block mean.
pub fn unit_objective<S: Scalar>(
    org: &OrgDesign<S>,
    landscape: &Landscape<S>,
    unit: usize,
    config: &Configuration,
) -> S {
    let units = org.units();
    let own = units[unit].clone();
    let own_mean = landscape.block_mean(config.bits(), own.clone());
    let others = landscape.n() - own.len();
    if others == 0 {
        return own_mean;
    }
    let rest: S =
        (0..landscape.n()).filter(|i| !own.contains(i)).map(|i| landscape.contribution_of(i, config.bits())).sum();
    let rest_mean = rest / S::of(others as f64);
    let w = org.incentive_weight;
    w * own_mean + (S::one() - w) * rest_mean
}

#[derive(Debug, Clone, PartialEq)]
pub struct UnitDecision {
    pub unit: usize,
    pub candidates: usize,
    /// The unit found a candidate it prefers to the status quo.
    pub proposed: bool,
    /// The unit's choice ended up in the firm configuration.
    pub implemented: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct OrgStep {
    pub config: Configuration,
    pub decisions: Vec<UnitDecision>,
}

fn copy_block(dst: &mut Configuration, src: &Configuration, block: &Range<usize>) {
    for i in block.clone() {
        dst.set(i, src.get(i));
    }
}

/// The announced version of `block` as received by others.
fn announce<S: Scalar>(
    org: &OrgDesign<S>,
    config: &Configuration,
    block: &Range<usize>,
    rng: &mut Stream,
) -> Configuration {
    let mut out = config.clone();
    if org.announcement_error > S::zero() {
        let p = org.announcement_error.to_f64_lossy();
        for i in block.clone() {
            if rng.chance(p) {
                out.flip(i);
            }
        }
    }
    out
}

/// One period of short-term search under `mode`.
pub fn org_step<S: Scalar>(
    org: &OrgDesign<S>,
    mode: CoordinationMode,
    landscape: &Landscape<S>,
    strategy: &SearchStrategy,
    current: &Configuration,
    rng: &mut Stream,
) -> Result<OrgStep> {
    org.check(mode, landscape, current)?;
    let units = org.units();
    let unit_eval = Evaluator::new(org.unit_noise);
    let rule = strategy.kind.choice_rule();
    let mut decisions = Vec::with_capacity(units.len());

    let unit_choice = |u: usize, base: &Configuration, rng: &mut Stream| {
        let free: Vec<usize> = units[u].clone().collect();
        let candidates = discover_within(strategy, base, &free, rng);
        let choice = choose(base, &candidates, |c| unit_objective(org, landscape, u, c), &unit_eval, rule, None, rng);
        (candidates.len(), choice)
    };

    let config = match mode {
        CoordinationMode::Decentralized => {
            let mut next = current.clone();
            for (u, block) in units.iter().enumerate() {
                let (count, choice) = unit_choice(u, current, rng);
                copy_block(&mut next, &choice.chosen, block);
                decisions.push(UnitDecision {
                    unit: u,
                    candidates: count,
                    proposed: choice.moved,
                    implemented: choice.moved,
                });
            }
            next
        }
        CoordinationMode::SequentialLateral => {
            // `working` is what later units believe; `next` is what gets done
            let mut working = current.clone();
            let mut next = current.clone();
            for (u, block) in units.iter().enumerate() {
                let (count, choice) = unit_choice(u, &working, rng);
                copy_block(&mut next, &choice.chosen, block);
                let heard = announce(org, &choice.chosen, block, rng);
                copy_block(&mut working, &heard, block);
                decisions.push(UnitDecision {
                    unit: u,
                    candidates: count,
                    proposed: choice.moved,
                    implemented: choice.moved,
                });
            }
            next
        }
        CoordinationMode::Hierarchical => {
            let mut proposals = Vec::new();
            for (u, block) in units.iter().enumerate() {
                let (count, choice) = unit_choice(u, current, rng);
                decisions.push(UnitDecision { unit: u, candidates: count, proposed: choice.moved, implemented: false });
                if choice.moved {
                    let heard = announce(org, &choice.chosen, block, rng);
                    proposals.push((u, choice.chosen, heard));
                }
            }
            let mut next = current.clone();
            if !proposals.is_empty() {
                let hq = Evaluator::new(org.hq_noise);
                let status_quo = hq.perceive(landscape.fitness_of(current.bits()), rng);
                let judged: Vec<(usize, Configuration, S)> = proposals
                    .into_iter()
                    .map(|(u, actual, heard)| {
                        let seen = hq.perceive(landscape.fitness_of(heard.bits()), rng);
                        (u, actual, seen)
                    })
                    .collect();
                let approved: Vec<&(usize, Configuration, S)> = match org.hq_policy {
                    HqPolicy::SingleBest => {
                        let mut best: Option<&(usize, Configuration, S)> = None;
                        for j in &judged {
                            if best.is_none_or(|b| j.2 > b.2) {
                                best = Some(j);
                            }
                        }
                        best.into_iter().filter(|b| b.2 > status_quo).collect()
                    }
                    HqPolicy::AllApproved => judged.iter().filter(|j| j.2 > status_quo).collect(),
                };
                for (u, actual, _) in approved {
                    copy_block(&mut next, actual, &units[*u]);
                    decisions[*u].implemented = true;
                }
            }
            next
        }
    };
    Ok(OrgStep { config, decisions })
}

#[derive(Debug, Clone, PartialEq)]
pub struct OrgRecord<S> {
    pub period: usize,
    pub mode: CoordinationMode,
    pub fitness: S,
    pub config: Configuration,
    pub unit_objectives: Vec<S>,
}

pub fn unit_objectives<S: Scalar>(org: &OrgDesign<S>, landscape: &Landscape<S>, config: &Configuration) -> Vec<S> {
    (0..org.unit_count()).map(|u| unit_objective(org, landscape, u, config)).collect()
}

pub(crate) fn record<S: Scalar>(
    org: &OrgDesign<S>,
    mode: CoordinationMode,
    landscape: &Landscape<S>,
    period: usize,
    config: &Configuration,
) -> OrgRecord<S> {
    OrgRecord {
        period,
        mode,
        fitness: landscape.fitness_of(config.bits()),
        config: config.clone(),
        unit_objectives: unit_objectives(org, landscape, config),
    }
}

/// Run `periods` steps from a random start drawn from `rng`. The returned
/// series holds the period-0 baseline plus one record per period.
pub fn run_org<S: Scalar>(
    org: &OrgDesign<S>,
    mode: CoordinationMode,
    landscape: &Landscape<S>,
    strategy: &SearchStrategy,
    periods: usize,
    rng: &mut Stream,
) -> Result<Vec<OrgRecord<S>>> {
    let start = Configuration::random(landscape.n(), rng);
    run_org_from(org, mode, landscape, strategy, start, periods, rng)
}

pub fn run_org_from<S: Scalar>(
    org: &OrgDesign<S>,
    mode: CoordinationMode,
    landscape: &Landscape<S>,
    strategy: &SearchStrategy,
    start: Configuration,
    periods: usize,
    rng: &mut Stream,
) -> Result<Vec<OrgRecord<S>>> {
    if periods == 0 {
        return Err(Error::InvalidParameter("periods must be at least 1".into()));
    }
    strategy.validate()?;
    org.check(mode, landscape, &start)?;
    let mut series = vec![record(org, mode, landscape, 0, &start)];
    let mut current = start;
    for period in 1..=periods {
        current = org_step(org, mode, landscape, strategy, &current, rng)?.config;
        series.push(record(org, mode, landscape, period, &current));
    }
    Ok(series)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::search::{search_step, StrategyKind};

    fn cyclic(n: usize, k: usize, seed: u64) -> Landscape<f64> {
        Landscape::generate(LandscapeSpec::new(n, k, InteractionPattern::AdjacentCyclic, seed)).unwrap()
    }

    #[test]
    fn unit_objective_examples() {
        let l = cyclic(6, 2, 4);
        let d = Configuration::from_slice(&[1, 0, 0, 1, 1, 0]);
        let single = OrgDesign::<f64>::new(vec![6]);
        assert_eq!(unit_objective(&single, &l, 0, &d), l.fitness(&d).unwrap());

        let mut two = OrgDesign::<f64>::new(vec![3, 3]);
        two.incentive_weight = 0.5;
        let c = l.contributions(&d).unwrap();
        let own = (c[0] + c[1] + c[2]) / 3.0;
        let rest = (c[3] + c[4] + c[5]) / 3.0;
        assert!((unit_objective(&two, &l, 0, &d) - (own + rest) / 2.0).abs() < 1e-15);

        let flat =
            Landscape::<f64>::constant(LandscapeSpec::new(4, 1, InteractionPattern::AdjacentCyclic, 0), 0.5).unwrap();
        let d4 = Configuration::from_slice(&[1, 0, 0, 1]);
        for w in [0.0, 0.3, 1.0] {
            let mut org = OrgDesign::<f64>::new(vec![2, 2]);
            org.incentive_weight = w;
            for u in 0..2 {
                assert_eq!(unit_objective(&org, &flat, u, &d4), 0.5);
            }
        }
    }

    #[test]
    fn single_unit_matches_plain_search_in_every_mode() {
        let l = cyclic(8, 3, 21);
        let org = OrgDesign::<f64>::new(vec![8]);
        let s = SearchStrategy::steepest(3);
        let start = Configuration::from_slice(&[0, 1, 1, 0, 0, 1, 0, 1]);
        let plain = search_step(&l, &s, &Evaluator::perfect(), &start, &mut Stream::root(6)).unwrap();
        for mode in CoordinationMode::ALL {
            let step = org_step(&org, mode, &l, &s, &start, &mut Stream::root(6)).unwrap();
            assert_eq!(step.config, plain.chosen, "{mode}");
        }
    }

    #[test]
    fn hierarchical_picks_best_proposal() {
        // unit 0's flip raises V by 0.02; unit 1's flip raises its own
        // contribution but lowers V by 0.01
        let spec = LandscapeSpec::new(2, 1, InteractionPattern::AdjacentCyclic, 0);
        let tables = vec![vec![0.5, 0.40, 0.54, 0.5], vec![0.5, 0.5, 0.58, 0.5]];
        let l = Landscape::from_parts(spec, vec![vec![1], vec![0]], tables).unwrap();
        let org = OrgDesign::<f64>::new(vec![1, 1]);
        let start = Configuration::zeros(2);
        let s = SearchStrategy::steepest(1);
        let step = org_step(&org, CoordinationMode::Hierarchical, &l, &s, &start, &mut Stream::root(0)).unwrap();
        assert_eq!(step.config, Configuration::from_slice(&[1, 0]));
        assert!(step.decisions[0].implemented && !step.decisions[1].implemented);
    }

    #[test]
    fn hierarchical_needs_headquarters() {
        let l = cyclic(4, 1, 0);
        let mut org = OrgDesign::<f64>::new(vec![2, 2]);
        org.headquarters = false;
        let err = org_step(
            &org,
            CoordinationMode::Hierarchical,
            &l,
            &SearchStrategy::steepest(1),
            &Configuration::zeros(4),
            &mut Stream::root(0),
        );
        assert!(matches!(err, Err(Error::MissingHeadquarters(_))));
        assert!(org_step(
            &org,
            CoordinationMode::Decentralized,
            &l,
            &SearchStrategy::steepest(1),
            &Configuration::zeros(4),
            &mut Stream::root(0)
        )
        .is_ok());
    }

    #[test]
    fn moves_stay_inside_moving_units() {
        let l = cyclic(9, 8, 2);
        let mut org = OrgDesign::<f64>::new(vec![3, 3, 3]);
        org.unit_noise = 0.05;
        org.hq_noise = 0.05;
        let s = SearchStrategy::new(StrategyKind::Ambidextrous { p_explore: 0.5 }, 3);
        let mut rng = Stream::root(1);
        for mode in CoordinationMode::ALL {
            let mut cur = Configuration::random(9, &mut rng);
            for _ in 0..30 {
                let step = org_step(&org, mode, &l, &s, &cur, &mut rng).unwrap();
                for (u, block) in org.units().iter().enumerate() {
                    if !step.decisions[u].implemented {
                        assert!(block.clone().all(|i| step.config.get(i) == cur.get(i)));
                    }
                }
                cur = step.config;
            }
        }
    }

    #[test]
    fn announcement_errors_only_mislead_later_units() {
        let l = cyclic(6, 5, 3);
        let mut org = OrgDesign::<f64>::new(vec![3, 3]);
        org.announcement_error = 1.0;
        let s = SearchStrategy::steepest(3);
        let start = Configuration::zeros(6);
        let step = org_step(&org, CoordinationMode::SequentialLateral, &l, &s, &start, &mut Stream::root(0)).unwrap();
        // unit 0 decides on the true status quo either way
        let clean = OrgDesign::<f64>::new(vec![3, 3]);
        let base = org_step(&clean, CoordinationMode::SequentialLateral, &l, &s, &start, &mut Stream::root(0)).unwrap();
        assert_eq!(&step.config.bits()[..3], &base.config.bits()[..3]);
    }

    #[test]
    fn run_org_series_shape() {
        let l = cyclic(6, 2, 1);
        let org = OrgDesign::<f64>::new(vec![3, 3]);
        let s = SearchStrategy::steepest(2);
        let one = run_org(&org, CoordinationMode::Decentralized, &l, &s, 1, &mut Stream::root(0)).unwrap();
        assert_eq!(one.len(), 2);
        assert_eq!(one[0].period, 0);
        assert!(run_org(&org, CoordinationMode::Decentralized, &l, &s, 0, &mut Stream::root(0)).is_err());
        let a = run_org(&org, CoordinationMode::SequentialLateral, &l, &s, 20, &mut Stream::root(5)).unwrap();
        let b = run_org(&org, CoordinationMode::SequentialLateral, &l, &s, 20, &mut Stream::root(5)).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn mode_names_round_trip() {
        for m in CoordinationMode::ALL {
            assert_eq!(m.name().parse::<CoordinationMode>().unwrap(), m);
        }
        assert!("anarchy".parse::<CoordinationMode>().is_err());
    }
}
