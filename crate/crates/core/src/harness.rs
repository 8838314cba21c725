//! Declarative experiments: TOML configs, replicated runs, CSV output and
//! batch statistics.
//!
//! Replication `r` draws from `Stream::root(seed).child(study).index(r)`,
//! so adding replications never changes existing ones. Replications run in
//! parallel but results are emitted in replication order, so the output
//! bytes do not depend on scheduling.
//!
//! An output directory holds `config.toml` (the effective config),
//! `runs.csv` (one row per replication and period), `summary.csv` and,
//! when requested, `landscape.txt` and `grid_<run>_<step>.csv`.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::adaptation::{GrowthEvent, GrowthSchedule, GrowthStudy, LearningParams, NewBits, Propensities, RewardRule};
use crate::automaton::{self, diffusion_preset, Boundary, DiffusionVariant, Grid, Neighborhood, Rule, Topology};
use crate::error::{Error, Result};
use crate::hiddenaction::{
    classify_emergent_contracts, second_best_oracle, series_csv, ModelParams, PartyParams, Prior, RunOutcome,
    ShiftTimes, Turbulence,
};
use crate::landscape::{Configuration, InteractionPattern, Landscape, LandscapeSpec, DEFAULT_ENUMERATION_CAP};
use crate::organization::{run_org, CoordinationMode, HqPolicy, OrgDesign, TaskComplexity};
use crate::rng::Stream;
use crate::search::{climb, Evaluator, SearchStrategy};

pub const ENGINE_VERSION: &str = env!("CARGO_PKG_VERSION");

/// Used when neither the config nor the caller names an output directory.
pub const DEFAULT_OUTPUT_DIR: &str = "ace-out";

/// Two-sided 95% normal quantile.
const Z95: f64 = 1.959_963_984_540_054;

/// `%.17g`-style formatting: 17 significant digits, trailing zeros
/// trimmed.
pub fn format_float(v: f64) -> String {
    if v == 0.0 {
        return "0".into();
    }
    if !v.is_finite() {
        return format!("{v}");
    }
    let sci = format!("{v:.16e}");
    let (mantissa, exp) = sci.split_once('e').expect("scientific format");
    let exp: i32 = exp.parse().expect("integer exponent");
    if (-5..17).contains(&exp) {
        let fixed = format!("{v:.prec$}", prec = (16 - exp) as usize);
        trim_zeros(&fixed).to_string()
    } else {
        format!("{}e{exp}", trim_zeros(mantissa))
    }
}

fn trim_zeros(s: &str) -> &str {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.')
    } else {
        s
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Study {
    NkAnalysis,
    Automaton,
    OrgSearch,
    GrowthStudy,
    HiddenAction,
}

impl Study {
    pub fn label(self) -> &'static str {
        match self {
            Self::NkAnalysis => "nk-analysis",
            Self::Automaton => "automaton",
            Self::OrgSearch => "org-search",
            Self::GrowthStudy => "growth-study",
            Self::HiddenAction => "hidden-action",
        }
    }

    fn block(self) -> &'static str {
        match self {
            Self::NkAnalysis => "nk",
            Self::Automaton => "automaton",
            Self::OrgSearch => "org",
            Self::GrowthStudy => "growth",
            Self::HiddenAction => "hidden-action",
        }
    }
}

fn yes() -> bool {
    true
}

fn is_true(b: &bool) -> bool {
    *b
}

fn one() -> f64 {
    1.0
}

fn one_usize() -> usize {
    1
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Emit {
    /// `runs.csv`.
    #[serde(default = "yes")]
    pub series: bool,
    #[serde(default = "yes")]
    pub summary: bool,
    /// `landscape.txt` for replication 0.
    #[serde(default)]
    pub landscape: bool,
    /// One `grid_<run>_<step>.csv` per automaton step.
    #[serde(default)]
    pub grids: bool,
}

impl Default for Emit {
    fn default() -> Self {
        Self { series: true, summary: true, landscape: false, grids: false }
    }
}

impl Emit {
    fn is_default(&self) -> bool {
        *self == Self::default()
    }
}

fn default_pattern() -> InteractionPattern {
    InteractionPattern::AdjacentCyclic
}

fn default_cap() -> usize {
    DEFAULT_ENUMERATION_CAP
}

fn default_max_steps() -> usize {
    1000
}

fn is_zero(v: &f64) -> bool {
    *v == 0.0
}

fn is_zero_usize(v: &usize) -> bool {
    *v == 0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NkConfig {
    pub n: usize,
    pub k: usize,
    #[serde(default = "default_pattern")]
    pub pattern: InteractionPattern,
    /// Fixed landscape for every replication; drawn per replication when
    /// absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub landscape_seed: Option<u64>,
    #[serde(default = "yes", skip_serializing_if = "is_true")]
    pub census: bool,
    /// Random-start hill climbs per replication.
    #[serde(default, skip_serializing_if = "is_zero_usize")]
    pub climbs: usize,
    /// Defaults to steepest ascent over the full one-flip neighbourhood.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub strategy: Option<SearchStrategy>,
    #[serde(default, skip_serializing_if = "is_zero")]
    pub sigma_eval: f64,
    #[serde(default = "default_max_steps")]
    pub max_steps: usize,
    #[serde(default = "default_cap")]
    pub enumeration_cap: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum InitialGrid {
    /// Row-major states.
    States { states: Vec<u8> },
    /// Each cell uniform over the alphabet.
    Random,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum RuleConfig {
    Diffusion {
        variant: DiffusionVariant,
        #[serde(default = "one_u32")]
        threshold: u32,
        early_adopters: Vec<usize>,
    },
    Totalistic {
        alphabet: u8,
        /// `next[own][neighbour_sum]`.
        next: Vec<Vec<u8>>,
        initial: InitialGrid,
    },
}

fn one_u32() -> u32 {
    1
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AutomatonConfig {
    pub topology: Topology,
    #[serde(default)]
    pub boundary: Boundary,
    #[serde(default)]
    pub neighborhood: Neighborhood,
    pub steps: usize,
    pub rule: RuleConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OrgConfig {
    pub units: Vec<usize>,
    pub complexity: TaskComplexity,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub landscape_seed: Option<u64>,
    pub mode: CoordinationMode,
    pub strategy: SearchStrategy,
    pub periods: usize,
    #[serde(default = "one")]
    pub incentive_weight: f64,
    #[serde(default, skip_serializing_if = "is_zero")]
    pub unit_noise: f64,
    #[serde(default, skip_serializing_if = "is_zero")]
    pub hq_noise: f64,
    #[serde(default, skip_serializing_if = "is_zero")]
    pub announcement_error: f64,
    #[serde(default)]
    pub hq_policy: HqPolicy,
    #[serde(default = "yes", skip_serializing_if = "is_true")]
    pub headquarters: bool,
}

impl OrgConfig {
    fn design(&self) -> OrgDesign<f64> {
        OrgDesign {
            unit_sizes: self.units.clone(),
            headquarters: self.headquarters,
            incentive_weight: self.incentive_weight,
            unit_noise: self.unit_noise,
            hq_noise: self.hq_noise,
            announcement_error: self.announcement_error,
            hq_policy: self.hq_policy,
        }
    }
}

fn default_floor() -> f64 {
    1e-3
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LearningConfig {
    pub interval: usize,
    pub gain: f64,
    pub forgetting: f64,
    #[serde(default = "default_floor")]
    pub floor: f64,
    #[serde(default)]
    pub reward: RewardRule,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum ScheduleConfig {
    None,
    Regular { first: usize, every: usize, count: usize, n_add: usize },
    Events { events: Vec<GrowthEvent> },
}

impl ScheduleConfig {
    pub fn schedule(&self) -> GrowthSchedule {
        match self {
            Self::None => GrowthSchedule::default(),
            &Self::Regular { first, every, count, n_add } => GrowthSchedule::regular(first, every, count, n_add),
            Self::Events { events } => GrowthSchedule { events: events.clone() },
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GrowthConfig {
    pub units: Vec<usize>,
    pub complexity: TaskComplexity,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub landscape_seed: Option<u64>,
    pub strategy: SearchStrategy,
    pub horizon: usize,
    pub learning: LearningConfig,
    pub schedule: ScheduleConfig,
    /// Initial propensities in the order decentralized, sequential-lateral,
    /// hierarchical; uniform when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub initial_weights: Option<[f64; 3]>,
    #[serde(default)]
    pub new_bits: NewBits,
    #[serde(default = "one")]
    pub incentive_weight: f64,
    #[serde(default, skip_serializing_if = "is_zero")]
    pub unit_noise: f64,
    #[serde(default, skip_serializing_if = "is_zero")]
    pub hq_noise: f64,
    #[serde(default, skip_serializing_if = "is_zero")]
    pub announcement_error: f64,
    #[serde(default)]
    pub hq_policy: HqPolicy,
}

impl GrowthConfig {
    /// The study with a given landscape seed.
    pub fn study(&self, landscape_seed: u64) -> Result<GrowthStudy<f64>> {
        let mut org = OrgDesign::new(self.units.clone());
        org.incentive_weight = self.incentive_weight;
        org.unit_noise = self.unit_noise;
        org.hq_noise = self.hq_noise;
        org.announcement_error = self.announcement_error;
        org.hq_policy = self.hq_policy;
        let initial_propensities = match self.initial_weights {
            Some(w) => Propensities::new(w)?,
            None => Propensities::uniform(),
        };
        let l = &self.learning;
        let learning =
            LearningParams { reward: l.reward, ..LearningParams::new(l.interval, l.gain, l.forgetting, l.floor) };
        Ok(GrowthStudy {
            org,
            complexity: self.complexity,
            landscape_seed,
            strategy: self.strategy.clone(),
            learning,
            initial_propensities,
            schedule: self.schedule.schedule(),
            horizon: self.horizon,
            new_bits: self.new_bits,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum PriorConfig {
    #[default]
    Informed,
    Fixed {
        mean: f64,
        variance: f64,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PartyConfig {
    #[serde(default = "one")]
    pub visibility: f64,
    /// Unlimited when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub memory: Option<usize>,
    #[serde(default)]
    pub exploration: f64,
    #[serde(default)]
    pub prior: PriorConfig,
}

impl Default for PartyConfig {
    fn default() -> Self {
        Self { visibility: 1.0, memory: None, exploration: 0.0, prior: PriorConfig::Informed }
    }
}

impl PartyConfig {
    fn params(&self) -> PartyParams<f64> {
        PartyParams {
            visibility: self.visibility,
            memory: self.memory,
            exploration: self.exploration,
            prior: match self.prior {
                PriorConfig::Informed => Prior::Informed,
                PriorConfig::Fixed { mean, variance } => Prior::Fixed { mean, variance },
            },
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TurbulenceConfig {
    #[serde(default)]
    pub shifts: ShiftTimes,
    #[serde(default)]
    pub mu_range: [f64; 2],
    #[serde(default)]
    pub sigma_range: [f64; 2],
}

fn levels() -> usize {
    101
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HiddenActionConfig {
    pub horizon: usize,
    #[serde(default = "levels")]
    pub effort_levels: usize,
    #[serde(default = "one")]
    pub effort_max: f64,
    #[serde(default = "levels")]
    pub premium_levels: usize,
    #[serde(default)]
    pub mu: f64,
    #[serde(default = "one")]
    pub sigma: f64,
    #[serde(default = "one")]
    pub risk_aversion: f64,
    #[serde(default)]
    pub reservation: f64,
    #[serde(default)]
    pub turbulence: TurbulenceConfig,
    #[serde(default)]
    pub principal: PartyConfig,
    #[serde(default)]
    pub agent: PartyConfig,
    /// Classification tolerance on the final premium; one grid cell when
    /// absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tolerance: Option<f64>,
}

impl HiddenActionConfig {
    pub fn params(&self) -> ModelParams<f64> {
        let t = &self.turbulence;
        ModelParams {
            effort_levels: self.effort_levels,
            effort_max: self.effort_max,
            premium_levels: self.premium_levels,
            mu: self.mu,
            sigma: self.sigma,
            risk_aversion: self.risk_aversion,
            reservation: self.reservation,
            turbulence: Turbulence {
                shifts: t.shifts.clone(),
                mu_range: (t.mu_range[0], t.mu_range[1]),
                sigma_range: (t.sigma_range[0], t.sigma_range[1]),
            },
            principal: self.principal.params(),
            agent: self.agent.params(),
        }
    }
}

fn is_one(v: &usize) -> bool {
    *v == 1
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub study: Study,
    #[serde(default = "one_usize", skip_serializing_if = "is_one")]
    pub replications: usize,
    #[serde(default)]
    pub seed: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output_dir: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Emit::is_default")]
    pub emit: Emit,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub nk: Option<NkConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub automaton: Option<AutomatonConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub org: Option<OrgConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub growth: Option<GrowthConfig>,
    #[serde(default, rename = "hidden-action", skip_serializing_if = "Option::is_none")]
    pub hidden_action: Option<HiddenActionConfig>,
}

impl ExperimentConfig {
    /// Parse and validate.
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let config: Self = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        config.validate()?;
        Ok(config)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text =
            fs::read_to_string(path).map_err(|e| std::io::Error::new(e.kind(), format!("{}: {e}", path.display())))?;
        Self::from_toml_str(&text).map_err(|e| match e {
            Error::Config(msg) => Error::Config(format!("{}: {msg}", path.display())),
            other => other,
        })
    }

    pub fn to_toml_string(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Config(e.to_string()))
    }

    /// SHA-256 of the canonical serialization, ignoring the output
    /// directory.
    pub fn hash(&self) -> Result<String> {
        let canonical = Self { output_dir: None, ..self.clone() }.to_toml_string()?;
        Ok(hex::encode(Sha256::digest(canonical.as_bytes())))
    }

    pub fn output_dir(&self) -> PathBuf {
        self.output_dir.clone().unwrap_or_else(|| PathBuf::from(DEFAULT_OUTPUT_DIR))
    }

    /// Checks every block against its module's preconditions.
    pub fn validate(&self) -> Result<()> {
        let cfg = |msg: String| Err(Error::Config(msg));
        if self.replications == 0 {
            return cfg("replications must be at least 1".into());
        }
        if self.seed > i64::MAX as u64 {
            return cfg(format!("seed must not exceed {}", i64::MAX));
        }
        let present = [
            (Study::NkAnalysis, self.nk.is_some()),
            (Study::Automaton, self.automaton.is_some()),
            (Study::OrgSearch, self.org.is_some()),
            (Study::GrowthStudy, self.growth.is_some()),
            (Study::HiddenAction, self.hidden_action.is_some()),
        ];
        for (study, there) in present {
            if study == self.study && !there {
                return cfg(format!("study {} needs a [{}] block", study.label(), study.block()));
            }
            if study != self.study && there {
                return cfg(format!("block [{}] does not belong to study {}", study.block(), self.study.label()));
            }
        }
        let invalid = |field: &str, e: Error| Error::Config(format!("[{}] {field}: {e}", self.study.block()));
        match self.study {
            Study::NkAnalysis => {
                let nk = self.nk.as_ref().expect("checked above");
                LandscapeSpec::new(nk.n, nk.k, nk.pattern.clone(), 0)
                    .validate()
                    .map_err(|e| invalid("n/k/pattern", e))?;
                if nk.census && nk.n > nk.enumeration_cap {
                    return Err(invalid("census", Error::EnumerationCap { n: nk.n, cap: nk.enumeration_cap }));
                }
                if let Some(s) = &nk.strategy {
                    s.validate().map_err(|e| invalid("strategy", e))?;
                }
                if !(nk.sigma_eval >= 0.0) {
                    return Err(invalid("sigma_eval", Error::InvalidParameter("must be non-negative".into())));
                }
                check_seed(nk.landscape_seed).map_err(|e| invalid("landscape_seed", e))?;
            }
            Study::Automaton => {
                let a = self.automaton.as_ref().expect("checked above");
                automaton_setup(a, &mut Stream::root(0)).map_err(|e| invalid("rule", e))?;
            }
            Study::OrgSearch => {
                let o = self.org.as_ref().expect("checked above");
                o.design().validate().map_err(|e| invalid("units", e))?;
                o.strategy.validate().map_err(|e| invalid("strategy", e))?;
                if o.periods == 0 {
                    return Err(invalid("periods", Error::InvalidParameter("must be at least 1".into())));
                }
                if o.mode == CoordinationMode::Hierarchical && !o.headquarters {
                    return Err(invalid("mode", Error::MissingHeadquarters("hierarchical")));
                }
                check_seed(o.landscape_seed).map_err(|e| invalid("landscape_seed", e))?;
            }
            Study::GrowthStudy => {
                let g = self.growth.as_ref().expect("checked above");
                g.study(0).and_then(|s| s.validate()).map_err(|e| invalid("growth", e))?;
                check_seed(g.landscape_seed).map_err(|e| invalid("landscape_seed", e))?;
            }
            Study::HiddenAction => {
                let h = self.hidden_action.as_ref().expect("checked above");
                h.params().validate().map_err(|e| invalid("params", e))?;
                if h.horizon == 0 {
                    return Err(invalid("horizon", Error::InvalidParameter("must be at least 1".into())));
                }
            }
        }
        Ok(())
    }
}

fn check_seed(seed: Option<u64>) -> Result<()> {
    match seed {
        Some(s) if s > i64::MAX as u64 => Err(Error::InvalidParameter(format!("must not exceed {}", i64::MAX))),
        _ => Ok(()),
    }
}

fn replication_stream(config: &ExperimentConfig, r: usize) -> Stream {
    Stream::root(config.seed).child(config.study.label()).index(r as u64)
}

fn landscape_seed(fixed: Option<u64>, rep: &Stream) -> u64 {
    fixed.unwrap_or_else(|| rep.child("landscape").next_seed())
}

/// Per-period rows of one replication plus optional side outputs.
#[derive(Debug, Clone, Default)]
struct RepOutput {
    rows: String,
    landscape: Option<String>,
    grids: Vec<(usize, String)>,
    outcome: Option<RunOutcome<f64>>,
}

/// Table of per-replication rows, header first.
fn header(study: Study, config: &ExperimentConfig) -> String {
    match study {
        Study::NkAnalysis => {
            "run_id,landscape_seed,n,k,global_max,global_argmax,local_optima,climb_mean_final,climb_mean_steps,climb_global_share".into()
        }
        Study::Automaton => {
            let a = config.automaton.as_ref().expect("validated");
            let alphabet = match &a.rule {
                RuleConfig::Diffusion { .. } => 2,
                RuleConfig::Totalistic { alphabet, .. } => *alphabet,
            };
            let counts: Vec<String> = (0..alphabet).map(|s| format!("count_{s}")).collect();
            format!("run_id,step,{}", counts.join(","))
        }
        Study::OrgSearch => {
            let o = config.org.as_ref().expect("validated");
            let objs: Vec<String> = (0..o.units.len()).map(|u| format!("unit_objective_{u}")).collect();
            format!("run_id,period,mode,V,d,{}", objs.join(","))
        }
        Study::GrowthStudy => "run_id,period,active_mode,weight_decentralized,weight_sequential,weight_hierarchical,V,d,N_current,units_current,unit_objectives".into(),
        Study::HiddenAction => {
            "run_id,t,p,f,a,theta,x,principal_net,agent_ce,visible_p_count,visible_a_count,regime_id".into()
        }
    }
}

fn joined(values: impl IntoIterator<Item = f64>, sep: &str) -> String {
    values.into_iter().map(format_float).collect::<Vec<_>>().join(sep)
}

fn nk_replication(nk: &NkConfig, r: usize, rep: &Stream, want_landscape: bool) -> Result<RepOutput> {
    let seed = landscape_seed(nk.landscape_seed, rep);
    let landscape = Landscape::<f64>::generate(LandscapeSpec::new(nk.n, nk.k, nk.pattern.clone(), seed))?;
    let (argmax, max) = landscape.global_optimum_with_cap(nk.enumeration_cap)?;
    let optima = if nk.census {
        landscape.local_optima_census_with_cap(nk.enumeration_cap)?.count().to_string()
    } else {
        String::new()
    };
    let (mut finals, mut steps, mut hits) = (0.0, 0.0, 0usize);
    if nk.climbs > 0 {
        let strategy = nk.strategy.clone().unwrap_or_else(|| SearchStrategy::steepest(nk.n));
        let evaluator = Evaluator::new(nk.sigma_eval);
        let mut climbs = rep.child("climbs");
        for _ in 0..nk.climbs {
            let start = Configuration::random(nk.n, &mut climbs);
            let trace = climb(&landscape, &strategy, &evaluator, start, nk.max_steps, false, &mut climbs)?;
            let last = *trace.values.last().expect("non-empty trace");
            finals += last;
            steps += (trace.path.len() - 1) as f64;
            if trace.last() == &argmax {
                hits += 1;
            }
        }
    }
    let climb_cols = if nk.climbs > 0 {
        let c = nk.climbs as f64;
        format!("{},{},{}", format_float(finals / c), format_float(steps / c), format_float(hits as f64 / c))
    } else {
        ",,".into()
    };
    Ok(RepOutput {
        rows: format!("{r},{seed},{},{},{},{argmax},{optima},{climb_cols}\n", nk.n, nk.k, format_float(max)),
        landscape: want_landscape.then(|| landscape.dump()),
        grids: Vec::new(),
        outcome: None,
    })
}

fn automaton_setup(a: &AutomatonConfig, rng: &mut Stream) -> Result<(Rule, Grid)> {
    match &a.rule {
        RuleConfig::Diffusion { variant, threshold, early_adopters } => {
            let preset =
                diffusion_preset(*variant, early_adopters.clone(), *threshold)?.with_neighborhood(a.neighborhood);
            let grid = preset.initial_grid(a.topology, a.boundary)?;
            Ok((preset.rule, grid))
        }
        RuleConfig::Totalistic { alphabet, next, initial } => {
            let rule = Rule::totalistic(*alphabet, a.neighborhood, next.clone())?;
            let states = match initial {
                InitialGrid::States { states } => states.clone(),
                InitialGrid::Random => {
                    (0..a.topology.cells()).map(|_| rng.below(usize::from(*alphabet)) as u8).collect()
                }
            };
            let grid = Grid::from_states(a.topology, a.boundary, *alphabet, states)?;
            Ok((rule, grid))
        }
    }
}

fn automaton_replication(a: &AutomatonConfig, r: usize, rep: &Stream, grids: bool) -> Result<RepOutput> {
    let (rule, grid) = automaton_setup(a, &mut rep.child("initial"))?;
    let trajectory = automaton::run(&grid, &rule, a.steps, &mut rep.child("rule"))?;
    let mut rows = String::new();
    for (step, g) in trajectory.grids.iter().enumerate() {
        let counts: Vec<String> = g.counts().iter().map(|c| c.to_string()).collect();
        let _ = writeln!(rows, "{r},{step},{}", counts.join(","));
    }
    let grids = if grids { trajectory.grids.iter().map(|g| g.to_csv()).enumerate().collect() } else { Vec::new() };
    Ok(RepOutput { rows, landscape: None, grids, outcome: None })
}

fn org_replication(o: &OrgConfig, r: usize, rep: &Stream, want_landscape: bool) -> Result<RepOutput> {
    let seed = landscape_seed(o.landscape_seed, rep);
    let landscape = Landscape::<f64>::generate(o.complexity.landscape_spec(&o.units, seed))?;
    let series = run_org(&o.design(), o.mode, &landscape, &o.strategy, o.periods, &mut rep.child("org"))?;
    let mut rows = String::new();
    for rec in &series {
        let _ = writeln!(
            rows,
            "{r},{},{},{},{},{}",
            rec.period,
            rec.mode,
            format_float(rec.fitness),
            rec.config,
            joined(rec.unit_objectives.iter().copied(), ",")
        );
    }
    Ok(RepOutput { rows, landscape: want_landscape.then(|| landscape.dump()), grids: Vec::new(), outcome: None })
}

fn growth_replication(g: &GrowthConfig, r: usize, rep: &Stream, want_landscape: bool) -> Result<RepOutput> {
    let seed = landscape_seed(g.landscape_seed, rep);
    let study = g.study(seed)?;
    let series = study.run(&rep.child("growth"))?;
    let mut rows = String::new();
    for rec in &series {
        let _ = writeln!(
            rows,
            "{r},{},{},{},{},{},{},{},{}",
            rec.period,
            rec.active_mode,
            joined(rec.weights, ","),
            format_float(rec.fitness),
            rec.config,
            rec.n_current,
            rec.units_current,
            joined(rec.unit_objectives.iter().copied(), ";")
        );
    }
    let landscape = if want_landscape {
        Some(Landscape::<f64>::generate(g.complexity.landscape_spec(&g.units, seed))?.dump())
    } else {
        None
    };
    Ok(RepOutput { rows, landscape, grids: Vec::new(), outcome: None })
}

/// What [`run_experiment`] produced.
#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentReport {
    pub output_dir: PathBuf,
    pub files: Vec<PathBuf>,
    pub series_rows: usize,
}

/// The effective table and summary of an experiment, without touching the
/// file system.
#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentOutput {
    pub runs_csv: String,
    pub summary_csv: String,
    pub landscape: Option<String>,
    /// `(run, step, csv)`.
    pub grids: Vec<(usize, usize, String)>,
}

/// Runs every replication and renders the outputs in memory.
pub fn execute(config: &ExperimentConfig) -> Result<ExperimentOutput> {
    config.validate()?;
    let emit = &config.emit;
    let reps: Vec<RepOutput> = (0..config.replications)
        .into_par_iter()
        .map(|r| {
            let rep = replication_stream(config, r);
            let first = r == 0 && emit.landscape;
            match config.study {
                Study::NkAnalysis => nk_replication(config.nk.as_ref().expect("validated"), r, &rep, first),
                Study::Automaton => {
                    automaton_replication(config.automaton.as_ref().expect("validated"), r, &rep, emit.grids)
                }
                Study::OrgSearch => org_replication(config.org.as_ref().expect("validated"), r, &rep, first),
                Study::GrowthStudy => growth_replication(config.growth.as_ref().expect("validated"), r, &rep, first),
                Study::HiddenAction => {
                    let h = config.hidden_action.as_ref().expect("validated");
                    let params = h.params();
                    let rows = crate::hiddenaction::simulate(&params, h.horizon, &rep)?;
                    Ok(RepOutput {
                        rows: series_csv(r, &rows, false),
                        landscape: None,
                        grids: Vec::new(),
                        outcome: RunOutcome::from_series(&params, &rows),
                    })
                }
            }
        })
        .collect::<Result<_>>()?;

    let mut runs_csv = header(config.study, config);
    runs_csv.push('\n');
    for rep in &reps {
        runs_csv.push_str(&rep.rows);
    }

    let mut meta = vec![
        ("engine_version".to_string(), ENGINE_VERSION.to_string()),
        ("config_hash".to_string(), config.hash()?),
        ("study".to_string(), config.study.label().to_string()),
        ("replications".to_string(), config.replications.to_string()),
        ("seed".to_string(), config.seed.to_string()),
    ];
    if let Some(h) = &config.hidden_action {
        let outcomes: Vec<RunOutcome<f64>> = reps.iter().filter_map(|r| r.outcome.clone()).collect();
        meta.extend(hidden_action_meta(h, &outcomes)?);
    }
    let summary = aggregate_tables(vec![Table::parse(&runs_csv, "runs.csv")?])?;
    let summary_csv = summary.to_csv(&meta);

    let landscape = reps.first().and_then(|r| r.landscape.clone());
    let grids = reps
        .iter()
        .enumerate()
        .flat_map(|(r, rep)| rep.grids.iter().map(move |(step, csv)| (r, *step, csv.clone())))
        .collect();
    Ok(ExperimentOutput { runs_csv, summary_csv, landscape, grids })
}

fn hidden_action_meta(h: &HiddenActionConfig, outcomes: &[RunOutcome<f64>]) -> Result<Vec<(String, String)>> {
    let oracle = second_best_oracle(&h.params());
    let shares = classify_emergent_contracts(outcomes, h.tolerance)?;
    Ok(vec![
        ("oracle_premium".into(), format_float(oracle.contract.premium)),
        ("oracle_fixed".into(), format_float(oracle.contract.fixed)),
        ("oracle_effort".into(), format_float(oracle.effort)),
        ("oracle_expected_net".into(), format_float(oracle.expected_net)),
        ("closed_form_premium".into(), format_float(oracle.closed_form_premium)),
        ("share_below_oracle".into(), format_float(shares.below)),
        ("share_at_oracle".into(), format_float(shares.at)),
        ("share_above_oracle".into(), format_float(shares.above)),
    ])
}

fn write(path: PathBuf, contents: &str, files: &mut Vec<PathBuf>) -> Result<()> {
    fs::write(&path, contents)?;
    files.push(path);
    Ok(())
}

/// Runs the experiment and writes its files into the output directory.
pub fn run_experiment(config: &ExperimentConfig) -> Result<ExperimentReport> {
    run_and_write(config).map(|(report, _)| report)
}

fn run_and_write(config: &ExperimentConfig) -> Result<(ExperimentReport, ExperimentOutput)> {
    let output = execute(config)?;
    let dir = config.output_dir();
    fs::create_dir_all(&dir)?;
    let mut files = Vec::new();
    write(dir.join("config.toml"), &config.to_toml_string()?, &mut files)?;
    if config.emit.series {
        write(dir.join("runs.csv"), &output.runs_csv, &mut files)?;
    }
    if config.emit.summary {
        write(dir.join("summary.csv"), &output.summary_csv, &mut files)?;
    }
    if let Some(dump) = &output.landscape {
        write(dir.join("landscape.txt"), dump, &mut files)?;
    }
    for (r, step, csv) in &output.grids {
        write(dir.join(format!("grid_{r}_{step}.csv")), csv, &mut files)?;
    }
    let report = ExperimentReport { output_dir: dir, files, series_rows: output.runs_csv.lines().count() - 1 };
    Ok((report, output))
}

/// Parse a sweep value the way it would be written in the config.
pub fn parse_value(text: &str) -> toml::Value {
    toml::from_str::<toml::Table>(&format!("v = {text}"))
        .ok()
        .and_then(|mut t| t.remove("v"))
        .unwrap_or_else(|| toml::Value::String(text.to_string()))
}

/// A copy of `config` with the dotted `axis` set to `value`.
pub fn with_axis(config: &ExperimentConfig, axis: &str, value: &toml::Value) -> Result<ExperimentConfig> {
    let mut tree = toml::Value::try_from(config).map_err(|e| Error::Config(e.to_string()))?;
    let keys: Vec<&str> = axis.split('.').collect();
    let (last, parents) = keys.split_last().expect("split yields at least one item");
    let mut table = tree.as_table_mut().expect("config serializes to a table");
    for key in parents {
        table = table
            .get_mut(*key)
            .and_then(toml::Value::as_table_mut)
            .ok_or_else(|| Error::Config(format!("sweep axis {axis:?} does not name a config field")))?;
    }
    // fields left at their default are not serialized; re-parsing rejects
    // names that are not fields at all
    let slot = table.entry(last.to_string()).or_insert_with(|| value.clone());
    if matches!(slot, toml::Value::Table(_) | toml::Value::Array(_))
        || matches!(value, toml::Value::Table(_) | toml::Value::Array(_))
    {
        return Err(Error::Config(format!("sweep axis {axis:?} is not a scalar field")));
    }
    *slot = value.clone();
    let text = toml::to_string(&tree).map_err(|e| Error::Config(e.to_string()))?;
    ExperimentConfig::from_toml_str(&text).map_err(|e| Error::Config(format!("sweep value {value} for {axis:?}: {e}")))
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepReport {
    pub runs: Vec<(toml::Value, ExperimentReport)>,
    pub combined: PathBuf,
}

fn value_label(value: &toml::Value) -> String {
    match value {
        toml::Value::String(s) => s.clone(),
        toml::Value::Float(f) => format_float(*f),
        other => other.to_string(),
    }
}

/// One experiment per value in `<out>/<axis>=<value>/`, plus `sweep.csv`
/// holding every batch statistic keyed by the axis value.
pub fn sweep(config: &ExperimentConfig, axis: &str, values: &[toml::Value]) -> Result<SweepReport> {
    if values.is_empty() {
        return Err(Error::Config("sweep needs at least one value".into()));
    }
    let base = config.output_dir();
    let configs: Vec<(toml::Value, ExperimentConfig)> = values
        .iter()
        .map(|v| {
            let mut c = with_axis(config, axis, v)?;
            c.output_dir = Some(base.join(format!("{axis}={}", value_label(v))));
            Ok((v.clone(), c))
        })
        .collect::<Result<_>>()?;
    let mut combined = format!("{axis},metric,n,mean,sd,ci95\n");
    let mut runs = Vec::new();
    for (value, c) in configs {
        let (report, output) = run_and_write(&c)?;
        let summary = aggregate_tables(vec![Table::parse(&output.runs_csv, "runs.csv")?])?;
        for b in &summary.batch {
            let _ = writeln!(
                combined,
                "{},{},{},{},{},{}",
                value_label(&value),
                b.metric,
                b.n,
                format_float(b.mean),
                format_float(b.sd),
                format_float(b.ci95)
            );
        }
        runs.push((value, report));
    }
    fs::create_dir_all(&base)?;
    let path = base.join("sweep.csv");
    fs::write(&path, combined)?;
    Ok(SweepReport { runs, combined: path })
}

/// Columns that identify rows rather than measure anything.
const KEY_COLUMNS: [&str; 5] = ["run_id", "t", "period", "step", "landscape_seed"];
/// Text columns that are neither numeric nor categorical.
const TEXT_COLUMNS: [&str; 3] = ["d", "global_argmax", "unit_objectives"];
/// Columns aggregated as one indicator per observed category.
const CATEGORICAL_COLUMNS: [&str; 2] = ["mode", "active_mode"];

/// A parsed per-period CSV file.
#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub columns: Vec<String>,
    pub rows: Vec<Vec<String>>,
    pub source: String,
}

impl Table {
    pub fn parse(text: &str, source: &str) -> Result<Self> {
        let mut lines = text.lines();
        let columns: Vec<String> = lines
            .next()
            .ok_or_else(|| Error::Schema(format!("{source} is empty")))?
            .split(',')
            .map(str::to_string)
            .collect();
        if !columns.iter().any(|c| c == "run_id") {
            return Err(Error::Schema(format!("{source} has no run_id column")));
        }
        let mut rows = Vec::new();
        for (i, line) in lines.enumerate().filter(|(_, l)| !l.is_empty()) {
            let row: Vec<String> = line.split(',').map(str::to_string).collect();
            if row.len() != columns.len() {
                return Err(Error::Schema(format!(
                    "{source} line {} has {} fields, expected {}",
                    i + 2,
                    row.len(),
                    columns.len()
                )));
            }
            rows.push(row);
        }
        Ok(Self { columns, rows, source: source.to_string() })
    }

    pub fn read(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        Self::parse(&fs::read_to_string(path)?, &path.display().to_string())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunSummary {
    pub run_id: u64,
    pub metrics: Vec<(String, f64)>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BatchStat {
    pub metric: String,
    pub n: usize,
    pub mean: f64,
    /// Sample standard deviation (`n - 1` denominator); 0 for one run.
    pub sd: f64,
    /// Half-width of the normal-approximation 95% interval.
    pub ci95: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Summary {
    pub runs: Vec<RunSummary>,
    pub batch: Vec<BatchStat>,
}

impl Summary {
    pub fn batch_stat(&self, metric: &str) -> Option<&BatchStat> {
        self.batch.iter().find(|b| b.metric == metric)
    }

    /// Long format: `record,run_id,metric,n,value,sd,ci95` with `meta`,
    /// `run` and `batch` records in that order.
    pub fn to_csv(&self, meta: &[(String, String)]) -> String {
        let mut out = String::from("record,run_id,metric,n,value,sd,ci95\n");
        for (k, v) in meta {
            let _ = writeln!(out, "meta,,{k},,{v},,");
        }
        for run in &self.runs {
            for (metric, v) in &run.metrics {
                let _ = writeln!(out, "run,{},{metric},1,{},,", run.run_id, format_float(*v));
            }
        }
        for b in &self.batch {
            let _ = writeln!(
                out,
                "batch,,{},{},{},{},{}",
                b.metric,
                b.n,
                format_float(b.mean),
                format_float(b.sd),
                format_float(b.ci95)
            );
        }
        out
    }
}

/// Reads per-period files and summarizes them with [`aggregate_tables`].
pub fn aggregate(files: &[impl AsRef<Path>]) -> Result<Summary> {
    let tables = files.iter().map(Table::read).collect::<Result<Vec<_>>>()?;
    aggregate_tables(tables)
}

enum ColumnKind {
    Numeric,
    Categorical(Vec<String>),
}

/// Per run: the final value and the time average of every numeric column
/// and an indicator of the final category of `mode` columns. Per metric
/// across runs: mean, sample sd and 95% half-width. The result does not
/// depend on the order of `tables`; runs come out sorted by id.
pub fn aggregate_tables(tables: Vec<Table>) -> Result<Summary> {
    let first = tables.first().ok_or_else(|| Error::Schema("no input files".into()))?;
    let columns = first.columns.clone();
    for t in &tables[1..] {
        if t.columns != columns {
            let offending = columns
                .iter()
                .zip(&t.columns)
                .find(|(a, b)| a != b)
                .map(|(a, b)| format!("column {b:?} where {a:?} was expected"))
                .unwrap_or_else(|| {
                    let extra = if t.columns.len() > columns.len() { &t.columns } else { &columns };
                    format!("column {:?} present in only one file", extra[t.columns.len().min(columns.len())])
                });
            return Err(Error::Schema(format!("{} differs from {}: {offending}", t.source, first.source)));
        }
    }
    let id_col = columns.iter().position(|c| c == "run_id").expect("checked by Table::parse");

    let mut runs: BTreeMap<u64, (usize, Vec<&Vec<String>>)> = BTreeMap::new();
    for (ti, t) in tables.iter().enumerate() {
        for row in &t.rows {
            let id: u64 = row[id_col]
                .parse()
                .map_err(|_| Error::Schema(format!("{}: run_id {:?} is not an integer", t.source, row[id_col])))?;
            let entry = runs.entry(id).or_insert((ti, Vec::new()));
            if entry.0 != ti {
                return Err(Error::Schema(format!("run_id {id} appears in more than one file")));
            }
            entry.1.push(row);
        }
    }

    let mut kinds: Vec<(usize, ColumnKind)> = Vec::new();
    for (c, name) in columns.iter().enumerate() {
        if KEY_COLUMNS.contains(&name.as_str()) || TEXT_COLUMNS.contains(&name.as_str()) {
            continue;
        }
        let values = runs.values().flat_map(|(_, rows)| rows.iter().map(move |r| r[c].as_str()));
        if CATEGORICAL_COLUMNS.contains(&name.as_str()) {
            let cats: BTreeSet<String> = values.filter(|v| !v.is_empty()).map(str::to_string).collect();
            kinds.push((c, ColumnKind::Categorical(cats.into_iter().collect())));
        } else if values.clone().all(|v| v.is_empty() || v.parse::<f64>().is_ok()) {
            kinds.push((c, ColumnKind::Numeric));
        }
    }

    let mut metric_names = Vec::new();
    for (c, kind) in &kinds {
        match kind {
            ColumnKind::Numeric => {
                metric_names.push(format!("final_{}", columns[*c]));
                metric_names.push(format!("mean_{}", columns[*c]));
            }
            ColumnKind::Categorical(cats) => {
                metric_names.extend(cats.iter().map(|cat| format!("final_{}={cat}", columns[*c])));
            }
        }
    }

    let mut summaries = Vec::new();
    for (&id, (_, rows)) in &runs {
        let mut metrics = Vec::new();
        for (c, kind) in &kinds {
            let last = rows.last().map(|r| r[*c].as_str()).unwrap_or("");
            match kind {
                ColumnKind::Numeric => {
                    if let Ok(v) = last.parse::<f64>() {
                        metrics.push((format!("final_{}", columns[*c]), v));
                    }
                    let present: Vec<f64> = rows.iter().filter_map(|r| r[*c].parse::<f64>().ok()).collect();
                    if !present.is_empty() {
                        metrics.push((
                            format!("mean_{}", columns[*c]),
                            present.iter().sum::<f64>() / present.len() as f64,
                        ));
                    }
                }
                ColumnKind::Categorical(cats) => {
                    for cat in cats {
                        let hit = if last == cat { 1.0 } else { 0.0 };
                        metrics.push((format!("final_{}={cat}", columns[*c]), hit));
                    }
                }
            }
        }
        summaries.push(RunSummary { run_id: id, metrics });
    }

    let batch = metric_names
        .into_iter()
        .map(|metric| {
            let values: Vec<f64> = summaries
                .iter()
                .filter_map(|s| s.metrics.iter().find(|(m, _)| *m == metric).map(|(_, v)| *v))
                .collect();
            describe(metric, &values)
        })
        .collect();
    Ok(Summary { runs: summaries, batch })
}

/// Mean, sample standard deviation and 95% half-width.
pub fn describe(metric: String, values: &[f64]) -> BatchStat {
    let n = values.len();
    if n == 0 {
        return BatchStat { metric, n, mean: f64::NAN, sd: f64::NAN, ci95: f64::NAN };
    }
    let mean = values.iter().sum::<f64>() / n as f64;
    let sd =
        if n > 1 { (values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1) as f64).sqrt() } else { 0.0 };
    BatchStat { metric, n, mean, sd, ci95: Z95 * sd / (n as f64).sqrt() }
}

#[cfg(test)]
mod tests {
    use super::*;

    const ORG: &str = r#"
study = "org-search"
replications = 3
seed = 7

[org]
units = [2, 2]
complexity = "non-decomposable"
mode = "hierarchical"
periods = 4
strategy = { kind = "steepest-ascent", discovery_budget = 2 }
"#;

    #[test]
    fn float_format_has_17_significant_digits() {
        assert_eq!(format_float(0.5), "0.5");
        assert_eq!(format_float(0.1), "0.10000000000000001");
        assert_eq!(format_float(-3.0), "-3");
        assert_eq!(format_float(1e-7), "9.9999999999999995e-8");
        assert_eq!(format_float(1e20), "1e20");
        assert_eq!(format_float(123456.0), "123456");
        for v in [0.1, 1.0 / 3.0, 2.5e-300, 6.02e23, -7.25] {
            assert_eq!(format_float(v).parse::<f64>().unwrap(), v);
        }
    }

    #[test]
    fn config_round_trips() {
        let c = ExperimentConfig::from_toml_str(ORG).unwrap();
        let again = ExperimentConfig::from_toml_str(&c.to_toml_string().unwrap()).unwrap();
        assert_eq!(c, again);
    }

    #[test]
    fn unknown_keys_are_rejected_with_location() {
        let bad = ORG.replace("periods = 4", "periods = 4\nperiod = 5");
        let err = ExperimentConfig::from_toml_str(&bad).unwrap_err().to_string();
        assert!(err.contains("period"), "{err}");
        assert!(err.contains("line"), "{err}");
    }

    #[test]
    fn foreign_and_missing_blocks_are_rejected() {
        let missing = ExperimentConfig::from_toml_str("study = \"nk-analysis\"\n").unwrap_err();
        assert!(missing.to_string().contains("[nk]"));
        let foreign = format!("{ORG}\n[nk]\nn = 4\nk = 1\n");
        assert!(ExperimentConfig::from_toml_str(&foreign).is_err());
    }

    #[test]
    fn org_search_row_count_and_determinism() {
        let mut c = ExperimentConfig::from_toml_str(ORG).unwrap();
        c.replications = 1;
        c.org.as_mut().unwrap().periods = 1;
        let out = execute(&c).unwrap();
        assert_eq!(out.runs_csv.lines().count(), 3);
        assert_eq!(out, execute(&c).unwrap());
    }

    #[test]
    fn more_replications_keep_existing_rows() {
        let c = ExperimentConfig::from_toml_str(ORG).unwrap();
        let small = execute(&c).unwrap();
        let big = execute(&ExperimentConfig { replications: 5, ..c }).unwrap();
        assert!(big.runs_csv.starts_with(&small.runs_csv));
    }

    #[test]
    fn aggregate_two_runs() {
        let t = Table::parse("run_id,period,V\n0,0,0.1\n0,1,0.4\n1,0,0.2\n1,1,0.6\n", "a").unwrap();
        let s = aggregate_tables(vec![t]).unwrap();
        let v = s.batch_stat("final_V").unwrap();
        assert!((v.mean - 0.5).abs() < 1e-15);
        assert!((v.sd - 0.02f64.sqrt()).abs() < 1e-12);
        let single = aggregate_tables(vec![Table::parse("run_id,V\n3,0.7\n", "b").unwrap()]).unwrap();
        let v = single.batch_stat("final_V").unwrap();
        assert_eq!((v.n, v.mean, v.sd), (1, 0.7, 0.0));
    }

    #[test]
    fn aggregate_is_order_independent_and_checks_schema() {
        let a = Table::parse("run_id,mode,V\n1,hierarchical,0.5\n", "a").unwrap();
        let b = Table::parse("run_id,mode,V\n0,decentralized,0.3\n", "b").unwrap();
        let ab = aggregate_tables(vec![a.clone(), b.clone()]).unwrap();
        let ba = aggregate_tables(vec![b, a.clone()]).unwrap();
        assert_eq!(ab.to_csv(&[]), ba.to_csv(&[]));
        assert_eq!(ab.runs[0].run_id, 0);
        assert_eq!(ab.batch_stat("final_mode=hierarchical").unwrap().mean, 0.5);
        let c = Table::parse("run_id,mode,W\n2,hierarchical,0.5\n", "c").unwrap();
        let err = aggregate_tables(vec![a, c]).unwrap_err().to_string();
        assert!(err.contains("\"W\""), "{err}");
    }

    #[test]
    fn sweep_axis_must_be_scalar() {
        let c = ExperimentConfig::from_toml_str(ORG).unwrap();
        assert!(with_axis(&c, "org.units", &parse_value("[3]")).is_err());
        assert!(with_axis(&c, "org.nope", &parse_value("1")).is_err());
        let w = with_axis(&c, "org.incentive_weight", &parse_value("0.5")).unwrap();
        assert_eq!(w.org.unwrap().incentive_weight, 0.5);
        let noisy = with_axis(&c, "org.unit_noise", &parse_value("0.1")).unwrap();
        assert_eq!(noisy.org.unwrap().unit_noise, 0.1);
        assert!(sweep(&c, "org.incentive_weight", &[]).is_err());
    }
}
