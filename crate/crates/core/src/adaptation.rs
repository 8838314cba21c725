//! Mid-term learning of the coordination mode and long-term firm growth.
//!
//! Headquarters holds a propensity per [`CoordinationMode`] and picks the
//! mode for the next review interval with probability proportional to the
//! propensities. At each review the mode that was just used is reinforced
//! by the (non-negative, normalized) improvement of firm fitness over the
//! interval, all propensities decay by the forgetting factor, and nothing
//! drops below the floor.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::landscape::{Configuration, Landscape};
use crate::organization::{org_step, unit_objectives, CoordinationMode, OrgDesign, TaskComplexity};
use crate::rng::Stream;
use crate::scalar::Scalar;
use crate::search::SearchStrategy;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Propensities<S> {
    weights: [S; 3],
}

impl<S: Scalar> Propensities<S> {
    /// Equal weights of `1/3`.
    pub fn uniform() -> Self {
        let third = S::one() / S::of(3.0);
        Self { weights: [third; 3] }
    }

    /// Weights indexed like [`CoordinationMode::ALL`].
    pub fn new(weights: [S; 3]) -> Result<Self> {
        if weights.iter().any(|&w| !(w > S::zero()) || !w.is_finite()) {
            return Err(Error::InvalidParameter("propensities must be positive and finite".into()));
        }
        Ok(Self { weights })
    }

    pub fn weights(&self) -> [S; 3] {
        self.weights
    }

    pub fn weight(&self, mode: CoordinationMode) -> S {
        self.weights[mode.index()]
    }

    pub fn probabilities(&self) -> [S; 3] {
        let total: S = self.weights.iter().copied().sum();
        self.weights.map(|w| w / total)
    }

    /// Roulette-wheel draw; consumes one uniform.
    pub fn select(&self, rng: &mut Stream) -> CoordinationMode {
        let total: S = self.weights.iter().copied().sum();
        let target = S::of(rng.uniform()) * total;
        let mut acc = S::zero();
        for mode in CoordinationMode::ALL {
            acc = acc + self.weights[mode.index()];
            if target < acc {
                return mode;
            }
        }
        CoordinationMode::Hierarchical
    }
}

/// How interval performance becomes a reward.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum RewardRule {
    /// `max(0, V_end - V_start) / V_start`, with `V_start` floored at the
    /// smallest positive scalar.
    #[default]
    RelativeGain,
    /// `max(0, V_end - V_start)`.
    AbsoluteGain,
    /// `(V_end - V_start) / V_start`, may be negative.
    SignedRelative,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LearningParams<S> {
    /// Periods between mode reviews.
    pub interval: usize,
    pub gain: S,
    pub forgetting: S,
    pub floor: S,
    pub reward: RewardRule,
}

impl<S: Scalar> LearningParams<S> {
    pub fn new(interval: usize, gain: S, forgetting: S, floor: S) -> Self {
        Self { interval, gain, forgetting, floor, reward: RewardRule::RelativeGain }
    }

    pub fn validate(&self) -> Result<()> {
        if self.interval == 0 {
            return Err(Error::InvalidParameter("review interval must be at least 1".into()));
        }
        if !(self.gain >= S::zero()) {
            return Err(Error::InvalidParameter("reinforcement gain must be non-negative".into()));
        }
        if !(self.forgetting >= S::zero() && self.forgetting < S::one()) {
            return Err(Error::InvalidParameter("forgetting factor must lie in [0, 1)".into()));
        }
        if !(self.floor > S::zero()) {
            return Err(Error::InvalidParameter("propensity floor must be positive".into()));
        }
        Ok(())
    }

    pub fn reward(&self, v_start: S, v_end: S) -> S {
        let delta = v_end - v_start;
        let scale = v_start.max(S::min_positive_value());
        match self.reward {
            RewardRule::RelativeGain => delta.max(S::zero()) / scale,
            RewardRule::AbsoluteGain => delta.max(S::zero()),
            RewardRule::SignedRelative => delta / scale,
        }
    }
}

/// Apply one reinforcement update for `used` with the given reward.
pub fn reinforce<S: Scalar>(
    props: &Propensities<S>,
    used: CoordinationMode,
    reward: S,
    params: &LearningParams<S>,
) -> Propensities<S> {
    let keep = S::one() - params.forgetting;
    let mut weights = props.weights.map(|w| keep * w);
    weights[used.index()] = weights[used.index()] + params.gain * reward;
    Propensities { weights: weights.map(|w| w.max(params.floor)) }
}

/// Reinforce the mode used over the window `[v_start, v_end]` and draw the
/// mode for the next interval.
pub fn review_mode<S: Scalar>(
    props: &Propensities<S>,
    params: &LearningParams<S>,
    used: CoordinationMode,
    v_start: S,
    v_end: S,
    rng: &mut Stream,
) -> (Propensities<S>, CoordinationMode) {
    let updated = reinforce(props, used, params.reward(v_start, v_end), params);
    let next = updated.select(rng);
    (updated, next)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct GrowthEvent {
    pub period: usize,
    pub n_add: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct GrowthSchedule {
    pub events: Vec<GrowthEvent>,
}

impl GrowthSchedule {
    /// `count` events of `n_add` attributes, the first at `first` and then
    /// every `every` periods.
    pub fn regular(first: usize, every: usize, count: usize, n_add: usize) -> Self {
        Self { events: (0..count).map(|i| GrowthEvent { period: first + i * every, n_add }).collect() }
    }

    pub fn validate(&self, horizon: usize) -> Result<()> {
        for (i, e) in self.events.iter().enumerate() {
            if e.n_add == 0 {
                return Err(Error::Schedule(format!("event {i} adds no attributes")));
            }
            if e.period == 0 || e.period > horizon {
                return Err(Error::Schedule(format!("event {i} at period {} lies outside 1..={horizon}", e.period)));
            }
            if i > 0 && e.period <= self.events[i - 1].period {
                return Err(Error::Schedule("growth periods must be strictly ascending".into()));
            }
        }
        Ok(())
    }

    pub fn event_at(&self, period: usize) -> Option<(usize, GrowthEvent)> {
        self.events.iter().copied().enumerate().find(|(_, e)| e.period == period)
    }
}

/// Initialization of the bits added by growth.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum NewBits {
    #[default]
    Random,
    Zeros,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Grown<S> {
    pub org: OrgDesign<S>,
    pub landscape: Landscape<S>,
    pub config: Configuration,
}

/// Append a unit owning `event.n_add` new attributes.
///
/// Decomposable tasks keep the landscape seed, so every pre-existing table
/// is reproduced bit-exactly and the new block gets its own fresh tables.
/// Non-decomposable tasks move to `K = N - 1` and redraw everything from a
/// seed taken from `rng`. New bits come from `rng` too (after the seed).
pub fn grow<S: Scalar>(
    org: &OrgDesign<S>,
    landscape: &Landscape<S>,
    complexity: TaskComplexity,
    event: GrowthEvent,
    config: &Configuration,
    new_bits: NewBits,
    rng: &mut Stream,
) -> Result<Grown<S>> {
    if event.n_add == 0 {
        return Err(Error::Schedule("growth must add at least one attribute".into()));
    }
    if org.n() != landscape.n() || config.len() != landscape.n() {
        return Err(Error::InvalidParameter("organization, landscape and configuration sizes disagree".into()));
    }
    let expected = complexity.landscape_spec(&org.unit_sizes, landscape.spec().seed);
    let matches = match complexity {
        TaskComplexity::Decomposable => expected.pattern == landscape.spec().pattern,
        TaskComplexity::NonDecomposable => landscape.spec().k_interactions + 1 == landscape.n(),
    };
    if !matches {
        return Err(Error::InvalidParameter(format!(
            "landscape ({}, K = {}) is not a {complexity:?} task for this organization",
            landscape.spec().pattern,
            landscape.spec().k_interactions
        )));
    }
    let mut grown_org = org.clone();
    grown_org.unit_sizes.push(event.n_add);
    let seed = match complexity {
        TaskComplexity::Decomposable => landscape.spec().seed,
        TaskComplexity::NonDecomposable => rng.next_seed(),
    };
    let grown_landscape = Landscape::generate(complexity.landscape_spec(&grown_org.unit_sizes, seed))?;
    let mut grown_config = config.clone();
    match new_bits {
        NewBits::Random => grown_config.extend((0..event.n_add).map(|_| rng.chance(0.5))),
        NewBits::Zeros => grown_config.extend(std::iter::repeat_n(false, event.n_add)),
    }
    Ok(Grown { org: grown_org, landscape: grown_landscape, config: grown_config })
}

#[derive(Debug, Clone, PartialEq)]
pub struct GrowthStudy<S> {
    pub org: OrgDesign<S>,
    pub complexity: TaskComplexity,
    pub landscape_seed: u64,
    pub strategy: SearchStrategy,
    pub learning: LearningParams<S>,
    pub initial_propensities: Propensities<S>,
    pub schedule: GrowthSchedule,
    pub horizon: usize,
    pub new_bits: NewBits,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GrowthRecord<S> {
    pub period: usize,
    /// Mode in force during this period.
    pub active_mode: CoordinationMode,
    /// Propensities after any review held at the end of this period.
    pub weights: [S; 3],
    pub fitness: S,
    pub config: Configuration,
    pub n_current: usize,
    pub units_current: usize,
    pub unit_objectives: Vec<S>,
}

impl<S: Scalar> GrowthStudy<S> {
    pub fn validate(&self) -> Result<()> {
        self.org.validate()?;
        self.strategy.validate()?;
        self.learning.validate()?;
        self.schedule.validate(self.horizon)?;
        if self.horizon == 0 {
            return Err(Error::InvalidParameter("horizon must be at least 1".into()));
        }
        if !self.org.headquarters {
            return Err(Error::MissingHeadquarters("hierarchical"));
        }
        Ok(())
    }

    /// One history. Short-term search, mode reviews and growth each draw
    /// from their own child of `rng`.
    ///
    /// Per period `t`: grow if an event is scheduled at `t`, run one
    /// `org_step` under the active mode, and review the mode when `t` is a
    /// multiple of the interval. The review window starts at the last review
    /// or growth event, whichever is later, so rewards never compare
    /// fitness across different landscapes. A new mode takes effect from the
    /// next period.
    pub fn run(&self, rng: &Stream) -> Result<Vec<GrowthRecord<S>>> {
        self.validate()?;
        let mut init = rng.child("growth/init");
        let mut search = rng.child("growth/search");
        let mut review = rng.child("growth/review");
        let mut events = rng.child("growth/events");

        let mut org = self.org.clone();
        let mut landscape = Landscape::generate(self.complexity.landscape_spec(&org.unit_sizes, self.landscape_seed))?;
        let mut config = Configuration::random(landscape.n(), &mut init);
        let mut props = self.initial_propensities;
        let mut mode = props.select(&mut review);

        let snapshot = |period: usize,
                        mode: CoordinationMode,
                        props: &Propensities<S>,
                        org: &OrgDesign<S>,
                        landscape: &Landscape<S>,
                        config: &Configuration| GrowthRecord {
            period,
            active_mode: mode,
            weights: props.weights(),
            fitness: landscape.fitness_of(config.bits()),
            config: config.clone(),
            n_current: landscape.n(),
            units_current: org.unit_count(),
            unit_objectives: unit_objectives(org, landscape, config),
        };

        let mut series = Vec::with_capacity(self.horizon + 1);
        series.push(snapshot(0, mode, &props, &org, &landscape, &config));
        let mut window_start = landscape.fitness_of(config.bits());
        for t in 1..=self.horizon {
            if let Some((_, event)) = self.schedule.event_at(t) {
                let grown = grow(&org, &landscape, self.complexity, event, &config, self.new_bits, &mut events)?;
                org = grown.org;
                landscape = grown.landscape;
                config = grown.config;
                window_start = landscape.fitness_of(config.bits());
            }
            config = org_step(&org, mode, &landscape, &self.strategy, &config, &mut search)?.config;
            let used = mode;
            if t % self.learning.interval == 0 {
                let v_end = landscape.fitness_of(config.bits());
                let (updated, next) = review_mode(&props, &self.learning, mode, window_start, v_end, &mut review);
                props = updated;
                mode = next;
                window_start = v_end;
            }
            series.push(snapshot(t, used, &props, &org, &landscape, &config));
        }
        Ok(series)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::landscape::{InteractionPattern, LandscapeSpec};
    use crate::organization::run_org_from;

    #[test]
    fn neutral_learning_leaves_weights() {
        let p = Propensities::<f64>::uniform();
        let params = LearningParams::new(5, 0.0, 0.0, 1e-6);
        let (q, _) = review_mode(&p, &params, CoordinationMode::Decentralized, 0.4, 0.9, &mut Stream::root(0));
        assert_eq!(q, p);
        for prob in q.probabilities() {
            assert!((prob - 1.0 / 3.0).abs() < 1e-15);
        }
    }

    #[test]
    fn reinforcement_arithmetic() {
        let p = Propensities::<f64>::new([1.0, 1.0, 1.0]).unwrap();
        let params = LearningParams::<f64>::new(1, 1.0, 0.0, 1e-6);
        let q = reinforce(&p, CoordinationMode::Hierarchical, 0.3, &params);
        assert_eq!(q.weights(), [1.0, 1.0, 1.3]);
        assert!((q.probabilities()[2] - 1.3 / 3.3).abs() < 1e-15);
    }

    #[test]
    fn forgetting_and_floor() {
        let p = Propensities::<f64>::new([0.01, 1.0, 2.0]).unwrap();
        let params = LearningParams::new(1, 0.0, 0.5, 0.02);
        let q = reinforce(&p, CoordinationMode::Decentralized, 0.0, &params);
        assert_eq!(q.weights(), [0.02, 0.5, 1.0]);
    }

    #[test]
    fn reward_rules() {
        let mut params = LearningParams::<f64>::new(1, 1.0, 0.0, 1e-3);
        assert!((params.reward(0.5, 0.6) - 0.2).abs() < 1e-12);
        assert_eq!(params.reward(0.6, 0.5), 0.0);
        params.reward = RewardRule::AbsoluteGain;
        assert!((params.reward(0.5, 0.6) - 0.1).abs() < 1e-12);
        params.reward = RewardRule::SignedRelative;
        assert!((params.reward(0.5, 0.4) + 0.2).abs() < 1e-12);
    }

    #[test]
    fn selection_follows_probabilities() {
        let p = Propensities::<f64>::new([1.0, 2.0, 7.0]).unwrap();
        let mut rng = Stream::root(12);
        let mut counts = [0usize; 3];
        for _ in 0..100_000 {
            counts[p.select(&mut rng).index()] += 1;
        }
        for (c, want) in counts.iter().zip([0.1, 0.2, 0.7]) {
            assert!((*c as f64 / 1e5 - want).abs() < 0.005, "{counts:?}");
        }
    }

    #[test]
    fn invalid_params() {
        assert!(Propensities::<f64>::new([1.0, 0.0, 1.0]).is_err());
        assert!(LearningParams::new(0, 1.0, 0.0, 0.1).validate().is_err());
        assert!(LearningParams::new(1, 1.0, 1.0, 0.1).validate().is_err());
        assert!(LearningParams::new(1, 1.0, 0.0, 0.0).validate().is_err());
    }

    #[test]
    fn decomposable_growth_preserves_old_blocks() {
        let org = OrgDesign::<f64>::new(vec![2, 2]);
        let l = Landscape::generate(TaskComplexity::Decomposable.landscape_spec(&[2, 2], 17)).unwrap();
        let d = Configuration::from_slice(&[1, 0, 0, 1]);
        let grown = grow(
            &org,
            &l,
            TaskComplexity::Decomposable,
            GrowthEvent { period: 1, n_add: 2 },
            &d,
            NewBits::Random,
            &mut Stream::root(1),
        )
        .unwrap();
        assert_eq!(grown.landscape.n(), 6);
        assert_eq!(grown.org.units(), vec![0..2, 2..4, 4..6]);
        assert_eq!(&grown.config.bits()[..4], d.bits());
        for i in 0..4 {
            assert_eq!(grown.landscape.table(i), l.table(i));
            assert_eq!(grown.landscape.contribution_of(i, grown.config.bits()), l.contribution_of(i, d.bits()));
        }
    }

    #[test]
    fn non_decomposable_growth_redraws_full_tables() {
        let org = OrgDesign::<f64>::new(vec![2, 2]);
        let l = Landscape::generate(TaskComplexity::NonDecomposable.landscape_spec(&[2, 2], 3)).unwrap();
        let d = Configuration::zeros(4);
        let grown = grow(
            &org,
            &l,
            TaskComplexity::NonDecomposable,
            GrowthEvent { period: 1, n_add: 2 },
            &d,
            NewBits::Zeros,
            &mut Stream::root(2),
        )
        .unwrap();
        assert_eq!(grown.landscape.spec().k_interactions, 5);
        for i in 0..6 {
            assert_eq!(grown.landscape.table(i).len(), 64);
        }
        assert_eq!(grown.config, Configuration::zeros(6));
        // a mismatched complexity is refused
        assert!(grow(
            &org,
            &l,
            TaskComplexity::Decomposable,
            GrowthEvent { period: 1, n_add: 2 },
            &d,
            NewBits::Zeros,
            &mut Stream::root(2)
        )
        .is_err());
        let cyc = Landscape::<f64>::generate(LandscapeSpec::new(4, 1, InteractionPattern::AdjacentCyclic, 0)).unwrap();
        assert!(grow(
            &org,
            &cyc,
            TaskComplexity::NonDecomposable,
            GrowthEvent { period: 1, n_add: 2 },
            &d,
            NewBits::Zeros,
            &mut Stream::root(2)
        )
        .is_err());
    }

    #[test]
    fn schedules_are_validated() {
        let ok = GrowthSchedule::regular(10, 10, 3, 2);
        assert!(ok.validate(30).is_ok());
        assert!(ok.validate(29).is_err());
        let unordered =
            GrowthSchedule { events: vec![GrowthEvent { period: 5, n_add: 1 }, GrowthEvent { period: 5, n_add: 1 }] };
        assert!(unordered.validate(10).is_err());
        let empty_add = GrowthSchedule { events: vec![GrowthEvent { period: 5, n_add: 0 }] };
        assert!(empty_add.validate(10).is_err());
    }

    fn study(horizon: usize, interval: usize, schedule: GrowthSchedule) -> GrowthStudy<f64> {
        GrowthStudy {
            org: OrgDesign::new(vec![2, 2, 2]),
            complexity: TaskComplexity::NonDecomposable,
            landscape_seed: 4,
            strategy: SearchStrategy::steepest(2),
            learning: LearningParams::new(interval, 1.0, 0.1, 1e-3),
            initial_propensities: Propensities::uniform(),
            schedule,
            horizon,
            new_bits: NewBits::Random,
        }
    }

    #[test]
    fn short_horizon_reduces_to_run_org() {
        let s = study(4, 10, GrowthSchedule::default());
        let rng = Stream::root(77);
        let series = s.run(&rng).unwrap();
        let mode = series[0].active_mode;
        let landscape = Landscape::generate(s.complexity.landscape_spec(&s.org.unit_sizes, s.landscape_seed)).unwrap();
        let start = Configuration::random(6, &mut rng.child("growth/init"));
        let plain =
            run_org_from(&s.org, mode, &landscape, &s.strategy, start, 4, &mut rng.child("growth/search")).unwrap();
        assert_eq!(series.len(), plain.len());
        for (g, p) in series.iter().zip(&plain) {
            assert_eq!(g.config, p.config);
            assert_eq!(g.fitness, p.fitness);
            assert_eq!(g.active_mode, mode);
        }
    }

    #[test]
    fn growth_series_tracks_size_and_replays() {
        let s = study(40, 5, GrowthSchedule::regular(10, 10, 3, 2));
        let a = s.run(&Stream::root(3)).unwrap();
        assert_eq!(a, s.run(&Stream::root(3)).unwrap());
        assert_eq!(a.len(), 41);
        assert_eq!(a[9].n_current, 6);
        assert_eq!(a[10].n_current, 8);
        assert_eq!(a[40].n_current, 12);
        assert_eq!(a[40].units_current, 6);
        assert!(a.iter().all(|r| r.weights.iter().all(|&w| w >= 1e-3)));
    }
}
