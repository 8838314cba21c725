//! Agentized hidden-action model under the LEN specialization.
//!
//! Outcome `x = a + θ` with `θ ~ Normal(μ, σ²)`, linear sharing rule
//! `w(x) = f + p·x`, quadratic effort cost `a²/2` and an agent with
//! constant absolute risk aversion `η`, so the agent's certainty equivalent
//! is `f + p·(a + μ) − (η/2)·p²σ² − a²/2`.
//!
//! Both parties start out knowing only part of their own decision grid and
//! a prior on the environment. Each period both widen their known set by
//! one cell, the principal offers a contract, the agent accepts or rejects,
//! and if production happens both parties learn about `θ` from the outcome.

use std::collections::VecDeque;

use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::harness::format_float;
use crate::rng::Stream;
use crate::scalar::Scalar;

/// Tolerance on the participation check so that a contract built to make
/// the constraint bind is not rejected over rounding.
const PARTICIPATION_SLACK: f64 = 1e-9;

/// When `(μ, σ)` are re-drawn.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum ShiftTimes {
    #[default]
    Stable,
    /// Shift at the start of every period `t` with `t % every == 0`.
    Every { every: usize },
    /// Shift at the start of each listed period.
    At { periods: Vec<usize> },
}

impl ShiftTimes {
    pub fn shifts_at(&self, t: usize) -> bool {
        match self {
            ShiftTimes::Stable => false,
            ShiftTimes::Every { every } => t > 0 && t.is_multiple_of(*every),
            ShiftTimes::At { periods } => periods.contains(&t),
        }
    }

    pub fn is_stable(&self) -> bool {
        match self {
            ShiftTimes::Stable => true,
            ShiftTimes::Every { .. } => false,
            ShiftTimes::At { periods } => periods.is_empty(),
        }
    }
}

/// Turbulence: new `μ ~ Uniform[mu_range]` and `σ ~ Uniform[sigma_range]`
/// at each shift.
#[derive(Debug, Clone, PartialEq)]
pub struct Turbulence<S> {
    pub shifts: ShiftTimes,
    pub mu_range: (S, S),
    pub sigma_range: (S, S),
}

impl<S: Scalar> Turbulence<S> {
    pub fn stable() -> Self {
        Self { shifts: ShiftTimes::Stable, mu_range: (S::zero(), S::zero()), sigma_range: (S::zero(), S::zero()) }
    }

    pub fn every(every: usize, mu_range: (S, S), sigma_range: (S, S)) -> Self {
        Self { shifts: ShiftTimes::Every { every }, mu_range, sigma_range }
    }
}

/// Initial environment estimate before anything is observed.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Prior<S> {
    /// The true initial `(μ, σ²)`.
    Informed,
    Fixed {
        mean: S,
        variance: S,
    },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PartyParams<S> {
    /// Fraction of the own grid known at the start, in `(0, 1]`.
    pub visibility: S,
    /// Memory length; `None` keeps every observation.
    pub memory: Option<usize>,
    /// Probability of expanding to a uniformly drawn unknown cell instead
    /// of one adjacent to the known set.
    pub exploration: S,
    pub prior: Prior<S>,
}

impl<S: Scalar> PartyParams<S> {
    pub fn informed() -> Self {
        Self { visibility: S::one(), memory: None, exploration: S::zero(), prior: Prior::Informed }
    }

    fn validate(&self, who: &str) -> Result<()> {
        if !(self.visibility > S::zero() && self.visibility <= S::one()) {
            return Err(Error::InvalidParameter(format!("{who} visibility must lie in (0, 1]")));
        }
        if !(self.exploration >= S::zero() && self.exploration <= S::one()) {
            return Err(Error::InvalidParameter(format!("{who} exploration must lie in [0, 1]")));
        }
        if self.memory == Some(0) {
            return Err(Error::InvalidParameter(format!("{who} memory must be at least 1")));
        }
        if let Prior::Fixed { variance, .. } = self.prior {
            if !(variance >= S::zero()) {
                return Err(Error::InvalidParameter(format!("{who} prior variance must be non-negative")));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ModelParams<S> {
    pub effort_levels: usize,
    pub effort_max: S,
    pub premium_levels: usize,
    pub mu: S,
    pub sigma: S,
    pub risk_aversion: S,
    pub reservation: S,
    pub turbulence: Turbulence<S>,
    pub principal: PartyParams<S>,
    pub agent: PartyParams<S>,
}

impl<S: Scalar> ModelParams<S> {
    /// `M = P = 101`, `a ∈ [0, 1]`, `θ ~ N(0, 1)`, `η = 1`, `Ū = 0`, stable,
    /// both parties fully informed.
    pub fn new() -> Self {
        Self {
            effort_levels: 101,
            effort_max: S::one(),
            premium_levels: 101,
            mu: S::zero(),
            sigma: S::one(),
            risk_aversion: S::one(),
            reservation: S::zero(),
            turbulence: Turbulence::stable(),
            principal: PartyParams::informed(),
            agent: PartyParams::informed(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.effort_levels < 2 || self.premium_levels < 2 {
            return Err(Error::InvalidParameter("effort and premium grids need at least 2 levels".into()));
        }
        if !(self.effort_max > S::zero()) {
            return Err(Error::InvalidParameter("effort_max must be positive".into()));
        }
        if !(self.sigma >= S::zero()) || !(self.risk_aversion >= S::zero()) {
            return Err(Error::InvalidParameter("sigma and risk aversion must be non-negative".into()));
        }
        let (lo, hi) = self.turbulence.sigma_range;
        if !self.turbulence.shifts.is_stable() && !(lo >= S::zero() && lo <= hi) {
            return Err(Error::InvalidParameter("turbulence sigma range must satisfy 0 <= lo <= hi".into()));
        }
        if !(self.turbulence.mu_range.0 <= self.turbulence.mu_range.1) {
            return Err(Error::InvalidParameter("turbulence mu range must satisfy lo <= hi".into()));
        }
        if let ShiftTimes::Every { every: 0 } = self.turbulence.shifts {
            return Err(Error::InvalidParameter("turbulence interval must be at least 1".into()));
        }
        self.principal.validate("principal")?;
        self.agent.validate("agent")
    }

    pub fn effort(&self, k: usize) -> S {
        self.effort_max * S::of(k as f64) / S::of((self.effort_levels - 1) as f64)
    }

    pub fn premium(&self, j: usize) -> S {
        S::of(j as f64) / S::of((self.premium_levels - 1) as f64)
    }

    /// Grid best response to premium `p` over the given effort indices;
    /// ties go to the smaller effort.
    fn best_effort(&self, p: S, efforts: impl Iterator<Item = usize>) -> usize {
        let mut best: Option<(usize, S)> = None;
        for k in efforts {
            let a = self.effort(k);
            let u = p * a - a * a / S::of(2.0);
            if best.is_none_or(|(_, b)| u > b) {
                best = Some((k, u));
            }
        }
        best.expect("non-empty effort set").0
    }

    fn risk_premium(&self, p: S, variance: S) -> S {
        self.risk_aversion / S::of(2.0) * p * p * variance
    }

    /// Fixed payment making the agent's certainty equivalent equal `Ū`.
    pub fn binding_fixed(&self, p: S, a: S, mu: S, variance: S) -> S {
        self.reservation - p * (a + mu) + self.risk_premium(p, variance) + a * a / S::of(2.0)
    }

    pub fn certainty_equivalent(&self, f: S, p: S, a: S, mu: S, variance: S) -> S {
        f + p * (a + mu) - self.risk_premium(p, variance) - a * a / S::of(2.0)
    }

    /// Principal's expected net outcome `E[x] − E[w]` with a binding
    /// participation constraint.
    pub fn expected_net(&self, p: S, a: S, mu: S, variance: S) -> S {
        a + mu - self.reservation - self.risk_premium(p, variance) - a * a / S::of(2.0)
    }
}

impl<S: Scalar> Default for ModelParams<S> {
    fn default() -> Self {
        Self::new()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Contract<S> {
    pub fixed: S,
    pub premium: S,
}

impl<S: Scalar> Contract<S> {
    pub fn wage(&self, x: S) -> S {
        self.fixed + self.premium * x
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OracleSolution<S> {
    pub contract: Contract<S>,
    pub premium_index: usize,
    pub effort: S,
    pub effort_index: usize,
    pub expected_net: S,
    /// `1 / (1 + η σ²)`, which is also the continuous optimal effort.
    pub closed_form_premium: S,
}

/// Exhaustive grid optimum under full information at `(μ, σ)`.
pub fn second_best_oracle_at<S: Scalar>(params: &ModelParams<S>, mu: S, sigma: S) -> OracleSolution<S> {
    let variance = sigma * sigma;
    let mut best: Option<OracleSolution<S>> = None;
    for j in 0..params.premium_levels {
        let p = params.premium(j);
        let k = params.best_effort(p, 0..params.effort_levels);
        let a = params.effort(k);
        let net = params.expected_net(p, a, mu, variance);
        if best.is_none_or(|b| net > b.expected_net) {
            best = Some(OracleSolution {
                contract: Contract { fixed: params.binding_fixed(p, a, mu, variance), premium: p },
                premium_index: j,
                effort: a,
                effort_index: k,
                expected_net: net,
                closed_form_premium: S::one() / (S::one() + params.risk_aversion * variance),
            });
        }
    }
    best.expect("premium grid is non-empty")
}

/// [`second_best_oracle_at`] for the initial environment.
pub fn second_best_oracle<S: Scalar>(params: &ModelParams<S>) -> OracleSolution<S> {
    second_best_oracle_at(params, params.mu, params.sigma)
}

/// The known part of one party's decision grid.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct VisibleSet {
    known: Vec<bool>,
    count: usize,
}

impl VisibleSet {
    /// A contiguous window of `ceil(fraction * len)` cells at a uniform
    /// position.
    pub fn initial(len: usize, fraction: f64, rng: &mut Stream) -> Self {
        let size = ((fraction * len as f64).ceil() as usize).clamp(1, len);
        let start = rng.below(len - size + 1);
        let mut known = vec![false; len];
        known[start..start + size].iter_mut().for_each(|c| *c = true);
        Self { known, count: size }
    }

    pub fn len(&self) -> usize {
        self.count
    }

    pub fn is_empty(&self) -> bool {
        self.count == 0
    }

    pub fn contains(&self, i: usize) -> bool {
        self.known[i]
    }

    pub fn indices(&self) -> impl Iterator<Item = usize> + '_ {
        self.known.iter().enumerate().filter(|(_, &k)| k).map(|(i, _)| i)
    }

    /// Learn one more cell. Always consumes two uniforms so that streams
    /// stay aligned once the grid is fully known.
    pub fn expand(&mut self, exploration: f64, rng: &mut Stream) {
        let explore = rng.uniform() < exploration;
        let pick = rng.uniform();
        let grid = self.known.len();
        let pool: Vec<usize> = if explore {
            (0..grid).filter(|&i| !self.known[i]).collect()
        } else {
            (0..grid)
                .filter(|&i| !self.known[i] && ((i > 0 && self.known[i - 1]) || (i + 1 < grid && self.known[i + 1])))
                .collect()
        };
        if pool.is_empty() {
            return;
        }
        let i = pool[((pick * pool.len() as f64) as usize).min(pool.len() - 1)];
        self.known[i] = true;
        self.count += 1;
    }
}

/// FIFO store of environment observations with a prior fallback.
#[derive(Debug, Clone, PartialEq)]
pub struct Memory<S> {
    capacity: Option<usize>,
    observations: VecDeque<S>,
    prior_mean: S,
    prior_variance: S,
}

impl<S: Scalar> Memory<S> {
    pub fn new(capacity: Option<usize>, prior_mean: S, prior_variance: S) -> Self {
        Self { capacity, observations: VecDeque::new(), prior_mean, prior_variance }
    }

    pub fn push(&mut self, observation: S) {
        if self.capacity == Some(self.observations.len()) {
            self.observations.pop_front();
        }
        self.observations.push_back(observation);
    }

    pub fn len(&self) -> usize {
        self.observations.len()
    }

    pub fn is_empty(&self) -> bool {
        self.observations.is_empty()
    }

    /// Sample mean, or the prior mean when empty.
    pub fn mean(&self) -> S {
        if self.observations.is_empty() {
            self.prior_mean
        } else {
            self.observations.iter().copied().sum::<S>() / S::of(self.observations.len() as f64)
        }
    }

    /// Unbiased sample variance once two observations exist, the prior
    /// variance before.
    pub fn variance(&self) -> S {
        let n = self.observations.len();
        if n < 2 {
            return self.prior_variance;
        }
        let m = self.mean();
        let ss: S = self.observations.iter().map(|&o| (o - m) * (o - m)).sum();
        ss / S::of((n - 1) as f64)
    }
}

/// One simulated period. Effort, outcome and `θ` are `None` when the
/// agent rejected the offer.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PeriodRecord<S> {
    pub t: usize,
    pub premium: S,
    pub fixed: S,
    pub effort: Option<S>,
    pub theta: Option<S>,
    pub outcome: Option<S>,
    pub principal_net: S,
    pub agent_ce: S,
    pub visible_premiums: usize,
    pub visible_efforts: usize,
    pub regime: usize,
    pub mu: S,
    pub sigma: S,
}

impl<S: Scalar> PeriodRecord<S> {
    pub fn accepted(&self) -> bool {
        self.effort.is_some()
    }
}

fn party_memory<S: Scalar>(party: &PartyParams<S>, mu: S, sigma: S) -> Memory<S> {
    match party.prior {
        Prior::Informed => Memory::new(party.memory, mu, sigma * sigma),
        Prior::Fixed { mean, variance } => Memory::new(party.memory, mean, variance),
    }
}

/// Periods `1..=horizon` of one principal-agent relationship.
pub fn simulate<S: Scalar>(params: &ModelParams<S>, horizon: usize, rng: &Stream) -> Result<Vec<PeriodRecord<S>>> {
    params.validate()?;
    if horizon == 0 {
        return Err(Error::InvalidParameter("horizon must be at least 1".into()));
    }
    let mut principal_rng = rng.child("ha/principal");
    let mut agent_rng = rng.child("ha/agent");
    let mut theta_rng = rng.child("ha/theta");
    let mut turbulence_rng = rng.child("ha/turbulence");

    let mut premiums =
        VisibleSet::initial(params.premium_levels, params.principal.visibility.to_f64_lossy(), &mut principal_rng);
    let mut efforts = VisibleSet::initial(params.effort_levels, params.agent.visibility.to_f64_lossy(), &mut agent_rng);
    let mut principal_memory = party_memory(&params.principal, params.mu, params.sigma);
    let mut agent_memory = party_memory(&params.agent, params.mu, params.sigma);

    let (mut mu, mut sigma, mut regime) = (params.mu, params.sigma, 0);
    let q_principal = params.principal.exploration.to_f64_lossy();
    let q_agent = params.agent.exploration.to_f64_lossy();
    let slack = S::of(PARTICIPATION_SLACK);
    let mut rows = Vec::with_capacity(horizon);

    for t in 1..=horizon {
        if params.turbulence.shifts.shifts_at(t) {
            let (mlo, mhi) = params.turbulence.mu_range;
            let (slo, shi) = params.turbulence.sigma_range;
            mu = mlo + (mhi - mlo) * S::of(turbulence_rng.uniform());
            sigma = slo + (shi - slo) * S::of(turbulence_rng.uniform());
            regime += 1;
        }

        premiums.expand(q_principal, &mut principal_rng);
        let (mu_p, var_p) = (principal_memory.mean(), principal_memory.variance());
        let mut offer: Option<(usize, S, S)> = None;
        for j in premiums.indices() {
            let p = params.premium(j);
            let a_hat = params.effort(params.best_effort(p, 0..params.effort_levels));
            let net = params.expected_net(p, a_hat, mu_p, var_p);
            if offer.is_none_or(|(_, _, b)| net > b) {
                offer = Some((j, a_hat, net));
            }
        }
        let (j, a_hat, _) = offer.expect("visible premium set is non-empty");
        let p = params.premium(j);
        let contract = Contract { fixed: params.binding_fixed(p, a_hat, mu_p, var_p), premium: p };

        efforts.expand(q_agent, &mut agent_rng);
        let (mu_a, var_a) = (agent_memory.mean(), agent_memory.variance());
        let ce_of = |k: usize| params.certainty_equivalent(contract.fixed, p, params.effort(k), mu_a, var_a);
        let acceptable = ce_of(params.best_effort(p, efforts.indices())) >= params.reservation - slack;

        let z: f64 = StandardNormal.sample(&mut theta_rng);
        let theta = mu + sigma * S::of(z);

        let row = if acceptable {
            let k = params.best_effort(p, efforts.indices());
            let a = params.effort(k);
            let x = a + theta;
            let net = x - contract.wage(x);
            let ce = ce_of(k);
            agent_memory.push(x - a);
            principal_memory.push(x - a_hat);
            PeriodRecord {
                t,
                premium: p,
                fixed: contract.fixed,
                effort: Some(a),
                theta: Some(theta),
                outcome: Some(x),
                principal_net: net,
                agent_ce: ce,
                visible_premiums: premiums.len(),
                visible_efforts: efforts.len(),
                regime,
                mu,
                sigma,
            }
        } else {
            PeriodRecord {
                t,
                premium: p,
                fixed: contract.fixed,
                effort: None,
                theta: None,
                outcome: None,
                principal_net: S::zero(),
                agent_ce: params.reservation,
                visible_premiums: premiums.len(),
                visible_efforts: efforts.len(),
                regime,
                mu,
                sigma,
            }
        };
        rows.push(row);
    }
    Ok(rows)
}

/// Per-period CSV with header
/// `run_id,t,p,f,a,theta,x,principal_net,agent_ce,visible_p_count,visible_a_count,regime_id`.
/// Rejected periods leave `a`, `theta` and `x` empty.
pub fn series_csv<S: Scalar>(run_id: usize, rows: &[PeriodRecord<S>], header: bool) -> String {
    let mut out = String::new();
    if header {
        out.push_str("run_id,t,p,f,a,theta,x,principal_net,agent_ce,visible_p_count,visible_a_count,regime_id\n");
    }
    let opt = |v: Option<S>| v.map(|v| format_float(v.to_f64_lossy())).unwrap_or_default();
    for r in rows {
        out.push_str(&format!(
            "{run_id},{},{},{},{},{},{},{},{},{},{},{}\n",
            r.t,
            format_float(r.premium.to_f64_lossy()),
            format_float(r.fixed.to_f64_lossy()),
            opt(r.effort),
            opt(r.theta),
            opt(r.outcome),
            format_float(r.principal_net.to_f64_lossy()),
            format_float(r.agent_ce.to_f64_lossy()),
            r.visible_premiums,
            r.visible_efforts,
            r.regime,
        ));
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum ContractClass {
    Below,
    At,
    Above,
}

/// A finished run as seen by [`classify_emergent_contracts`].
#[derive(Debug, Clone, PartialEq)]
pub struct RunOutcome<S> {
    pub params: ModelParams<S>,
    pub final_premium: S,
    /// Environment in force in the final period.
    pub final_mu: S,
    pub final_sigma: S,
}

impl<S: Scalar> RunOutcome<S> {
    pub fn from_series(params: &ModelParams<S>, rows: &[PeriodRecord<S>]) -> Option<Self> {
        let last = rows.last()?;
        Some(Self { params: params.clone(), final_premium: last.premium, final_mu: last.mu, final_sigma: last.sigma })
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ContractShares {
    pub runs: usize,
    pub below: f64,
    pub at: f64,
    pub above: f64,
}

/// Buckets each run's final premium against the grid optimum for the
/// environment in force at the end of the run. `tolerance` defaults to
/// one premium grid cell.
pub fn classify_emergent_contracts<S: Scalar>(runs: &[RunOutcome<S>], tolerance: Option<S>) -> Result<ContractShares> {
    let first = runs.first().ok_or_else(|| Error::InvalidParameter("empty run set".into()))?;
    if runs.iter().any(|r| r.params != first.params) {
        return Err(Error::InvalidParameter("runs were produced with different parameters".into()));
    }
    let cell = S::one() / S::of((first.params.premium_levels - 1) as f64);
    let tol = tolerance.unwrap_or(cell) + S::of(1e-12);
    let mut counts = [0usize; 3];
    for r in runs {
        let star = second_best_oracle_at(&r.params, r.final_mu, r.final_sigma).contract.premium;
        let class = classify(r.final_premium, star, tol);
        counts[class as usize] += 1;
    }
    let n = runs.len() as f64;
    Ok(ContractShares {
        runs: runs.len(),
        below: counts[0] as f64 / n,
        at: counts[1] as f64 / n,
        above: counts[2] as f64 / n,
    })
}

fn classify<S: Scalar>(p: S, star: S, tol: S) -> ContractClass {
    if (p - star).abs() <= tol {
        ContractClass::At
    } else if p > star {
        ContractClass::Above
    } else {
        ContractClass::Below
    }
}
