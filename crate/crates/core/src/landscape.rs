//! NK fitness landscapes.
//!
//! A landscape over `N` binary attributes assigns every attribute `i` an
//! interaction set of co-determining attributes and a contribution table
//! indexed by the local pattern (`d_i` followed by its partners' states).
//! Overall fitness is the arithmetic mean of the `N` looked-up contributions,
//! so it always lies in `[0, 1]`.
//!
//! Local patterns are encoded as integers with `d_i` in the most significant
//! position and the partners following in interaction-set order:
//!
//! ```text
//! index = d_i << k_i | d_{p_1} << (k_i - 1) | ... | d_{p_{k_i}}
//! ```
//!
//! Generation is driven by [`Stream`] substreams derived from the spec seed:
//! `child("nk/interactions").index(i)` picks the partners of attribute `i`
//! (random pattern only) and `child("nk/contributions").index(i)` fills its
//! table with i.i.d. `Uniform[0, 1)` draws in pattern-index order. Because
//! every attribute owns its own substream, appending a new block to a
//! block-diagonal spec leaves all existing tables bit-identical.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::Stream;
use crate::scalar::Scalar;

/// Largest `N` the exhaustive oracles accept without an explicit override.
pub const DEFAULT_ENUMERATION_CAP: usize = 24;

const DUMP_HEADER: &str = "# nk-landscape v1";

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum InteractionPattern {
    /// Attribute `i` interacts with `i+1, ..., i+K` (mod `N`).
    AdjacentCyclic,
    /// Attribute `i` interacts with `K` others drawn without replacement.
    RandomWithoutReplacement,
    /// Contiguous blocks of the given sizes; full interaction inside each
    /// block, none across blocks. `K` is ignored.
    BlockDiagonal { blocks: Vec<usize> },
}

impl fmt::Display for InteractionPattern {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::AdjacentCyclic => f.write_str("adjacent-cyclic"),
            Self::RandomWithoutReplacement => f.write_str("random-without-replacement"),
            Self::BlockDiagonal { blocks } => {
                let sizes: Vec<String> = blocks.iter().map(|b| b.to_string()).collect();
                write!(f, "block-diagonal {}", sizes.join(","))
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LandscapeSpec {
    pub n_attributes: usize,
    pub k_interactions: usize,
    pub pattern: InteractionPattern,
    pub seed: u64,
}

impl LandscapeSpec {
    pub fn new(n_attributes: usize, k_interactions: usize, pattern: InteractionPattern, seed: u64) -> Self {
        Self { n_attributes, k_interactions, pattern, seed }
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.n_attributes;
        if n == 0 {
            return Err(Error::InvalidParameter("N must be at least 1".into()));
        }
        if self.k_interactions > n - 1 {
            return Err(Error::InvalidParameter(format!(
                "K = {} must lie in [0, N-1] = [0, {}]",
                self.k_interactions,
                n - 1
            )));
        }
        if let InteractionPattern::BlockDiagonal { blocks } = &self.pattern {
            if blocks.is_empty() || blocks.contains(&0) {
                return Err(Error::InvalidParameter("block-diagonal blocks must be non-empty".into()));
            }
            let total: usize = blocks.iter().sum();
            if total != n {
                return Err(Error::InvalidParameter(format!(
                    "block sizes sum to {total} but N = {n}; blocks must partition the attributes"
                )));
            }
            if blocks.iter().any(|&b| b > 30) {
                return Err(Error::InvalidParameter("block size above 30 is not supported".into()));
            }
        } else if self.k_interactions > 30 {
            return Err(Error::InvalidParameter("K above 30 is not supported".into()));
        }
        Ok(())
    }

    /// Contiguous index ranges of the blocks (one block of size `N` unless
    /// the pattern is block-diagonal).
    pub fn block_ranges(&self) -> Vec<std::ops::Range<usize>> {
        match &self.pattern {
            InteractionPattern::BlockDiagonal { blocks } => contiguous_ranges(blocks),
            #[allow(clippy::single_range_in_vec_init)]
            _ => vec![0..self.n_attributes],
        }
    }
}

pub(crate) fn contiguous_ranges(sizes: &[usize]) -> Vec<std::ops::Range<usize>> {
    let mut start = 0;
    sizes
        .iter()
        .map(|&s| {
            let r = start..start + s;
            start += s;
            r
        })
        .collect()
}

/// A binary decision vector.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Configuration {
    bits: Vec<bool>,
}

impl Configuration {
    pub fn zeros(n: usize) -> Self {
        Self { bits: vec![false; n] }
    }

    pub fn from_bits(bits: Vec<bool>) -> Self {
        Self { bits }
    }

    /// Build from 0/1 integers; anything non-zero is a one.
    pub fn from_slice(bits: &[u8]) -> Self {
        Self { bits: bits.iter().map(|&b| b != 0).collect() }
    }

    /// Uniformly random configuration of length `n`.
    pub fn random(n: usize, rng: &mut Stream) -> Self {
        Self { bits: (0..n).map(|_| rng.chance(0.5)).collect() }
    }

    /// Configuration whose lexicographic rank among all `2^n` vectors is
    /// `index` (attribute 0 is the most significant bit).
    pub fn from_index(index: u64, n: usize) -> Self {
        Self { bits: (0..n).map(|i| (index >> (n - 1 - i)) & 1 == 1).collect() }
    }

    /// Inverse of [`Configuration::from_index`].
    pub fn to_index(&self) -> u64 {
        self.bits.iter().fold(0u64, |acc, &b| (acc << 1) | u64::from(b))
    }

    pub fn len(&self) -> usize {
        self.bits.len()
    }

    pub fn is_empty(&self) -> bool {
        self.bits.is_empty()
    }

    pub fn bits(&self) -> &[bool] {
        &self.bits
    }

    pub fn get(&self, i: usize) -> bool {
        self.bits[i]
    }

    pub fn set(&mut self, i: usize, value: bool) {
        self.bits[i] = value;
    }

    pub fn flip(&mut self, i: usize) {
        self.bits[i] = !self.bits[i];
    }

    pub fn flipped(&self, indices: &[usize]) -> Self {
        let mut out = self.clone();
        for &i in indices {
            out.flip(i);
        }
        out
    }

    pub fn extend(&mut self, more: impl IntoIterator<Item = bool>) {
        self.bits.extend(more);
    }

    pub fn hamming(&self, other: &Self) -> usize {
        self.bits.iter().zip(&other.bits).filter(|(a, b)| a != b).count()
    }

    /// All configurations at Hamming distance exactly `radius`, ordered by
    /// the lexicographic order of their sorted flip-index sets.
    pub fn hamming_neighbors(&self, radius: usize) -> Result<Vec<Self>> {
        hamming_neighbors(self, radius)
    }
}

impl fmt::Display for Configuration {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for &b in &self.bits {
            f.write_str(if b { "1" } else { "0" })?;
        }
        Ok(())
    }
}

impl FromStr for Configuration {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        s.chars()
            .map(|c| match c {
                '0' => Ok(false),
                '1' => Ok(true),
                other => Err(Error::InvalidParameter(format!("invalid bit {other:?} in configuration"))),
            })
            .collect::<Result<Vec<_>>>()
            .map(Self::from_bits)
    }
}

/// Every `r`-subset of `0..n` in lexicographic order.
pub(crate) fn index_combinations(n: usize, r: usize) -> Vec<Vec<usize>> {
    let mut out = Vec::new();
    if r > n {
        return out;
    }
    let mut idx: Vec<usize> = (0..r).collect();
    loop {
        out.push(idx.clone());
        // rightmost position that can still advance
        let mut pos = r;
        while pos > 0 && idx[pos - 1] == n - r + pos - 1 {
            pos -= 1;
        }
        if pos == 0 {
            return out;
        }
        idx[pos - 1] += 1;
        for j in pos..r {
            idx[j] = idx[j - 1] + 1;
        }
    }
}

pub fn hamming_neighbors(config: &Configuration, radius: usize) -> Result<Vec<Configuration>> {
    let n = config.len();
    if radius == 0 || radius > n {
        return Err(Error::InvalidParameter(format!("radius {radius} must lie in [1, N = {n}]")));
    }
    Ok(index_combinations(n, radius).iter().map(|flips| config.flipped(flips)).collect())
}

/// Local optima found by an exhaustive scan.
#[derive(Debug, Clone, PartialEq)]
pub struct Census<S> {
    pub optima: Vec<(Configuration, S)>,
}

impl<S> Census<S> {
    pub fn count(&self) -> usize {
        self.optima.len()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Landscape<S> {
    spec: LandscapeSpec,
    interactions: Vec<Vec<usize>>,
    tables: Vec<Vec<S>>,
}

impl<S: Scalar> Landscape<S> {
    /// Generate the landscape fully determined by `spec`.
    pub fn generate(spec: LandscapeSpec) -> Result<Self> {
        spec.validate()?;
        let n = spec.n_attributes;
        let k = spec.k_interactions;
        let root = Stream::root(spec.seed);
        let interactions: Vec<Vec<usize>> = match &spec.pattern {
            InteractionPattern::AdjacentCyclic => (0..n).map(|i| (1..=k).map(|off| (i + off) % n).collect()).collect(),
            InteractionPattern::RandomWithoutReplacement => {
                let base = root.child("nk/interactions");
                (0..n)
                    .map(|i| {
                        let mut rng = base.index(i as u64);
                        let mut pool: Vec<usize> = (0..n).filter(|&j| j != i).collect();
                        // partial Fisher-Yates: first k slots become the sample
                        for slot in 0..k {
                            let pick = slot + rng.below(pool.len() - slot);
                            pool.swap(slot, pick);
                        }
                        let mut chosen = pool[..k].to_vec();
                        chosen.sort_unstable();
                        chosen
                    })
                    .collect()
            }
            InteractionPattern::BlockDiagonal { .. } => {
                let mut sets = vec![Vec::new(); n];
                for block in spec.block_ranges() {
                    for i in block.clone() {
                        sets[i] = block.clone().filter(|&j| j != i).collect();
                    }
                }
                sets
            }
        };
        let base = root.child("nk/contributions");
        let tables = interactions
            .iter()
            .enumerate()
            .map(|(i, partners)| {
                let mut rng = base.index(i as u64);
                (0..1usize << (partners.len() + 1)).map(|_| S::of(rng.uniform())).collect()
            })
            .collect();
        Ok(Self { spec, interactions, tables })
    }

    /// Assemble a landscape from explicit tables (used for hand-built
    /// fixtures and for re-reading dumps).
    pub fn from_parts(spec: LandscapeSpec, interactions: Vec<Vec<usize>>, tables: Vec<Vec<S>>) -> Result<Self> {
        spec.validate()?;
        let n = spec.n_attributes;
        if interactions.len() != n || tables.len() != n {
            return Err(Error::InvalidParameter(format!(
                "expected {n} interaction sets and tables, got {} and {}",
                interactions.len(),
                tables.len()
            )));
        }
        for (i, (partners, table)) in interactions.iter().zip(&tables).enumerate() {
            if partners.iter().any(|&j| j >= n || j == i) {
                return Err(Error::InvalidParameter(format!("attribute {i} has an invalid partner")));
            }
            if partners.len() > 30 {
                return Err(Error::InvalidParameter(format!("attribute {i} has too many partners")));
            }
            if table.len() != 1 << (partners.len() + 1) {
                return Err(Error::InvalidParameter(format!(
                    "table of attribute {i} has {} entries, expected {}",
                    table.len(),
                    1usize << (partners.len() + 1)
                )));
            }
            if table.iter().any(|&c| !(c >= S::zero() && c <= S::one())) {
                return Err(Error::InvalidParameter(format!("table of attribute {i} leaves [0, 1]")));
            }
        }
        Ok(Self { spec, interactions, tables })
    }

    /// Landscape in which every contribution equals `value`.
    pub fn constant(spec: LandscapeSpec, value: S) -> Result<Self> {
        let shape = Landscape::<S>::generate(spec.clone())?;
        let tables = shape.tables.iter().map(|t| vec![value; t.len()]).collect();
        Self::from_parts(spec, shape.interactions, tables)
    }

    pub fn spec(&self) -> &LandscapeSpec {
        &self.spec
    }

    pub fn n(&self) -> usize {
        self.spec.n_attributes
    }

    pub fn interactions(&self, i: usize) -> &[usize] {
        &self.interactions[i]
    }

    pub fn table(&self, i: usize) -> &[S] {
        &self.tables[i]
    }

    fn pattern_index(&self, i: usize, bits: &[bool]) -> usize {
        self.interactions[i].iter().fold(usize::from(bits[i]), |acc, &j| (acc << 1) | usize::from(bits[j]))
    }

    /// Contribution `C_i` of attribute `i` under `bits`. Length is not checked.
    pub fn contribution_of(&self, i: usize, bits: &[bool]) -> S {
        self.tables[i][self.pattern_index(i, bits)]
    }

    fn check(&self, config: &Configuration) -> Result<()> {
        if config.len() != self.n() {
            return Err(Error::LengthMismatch { expected: self.n(), got: config.len() });
        }
        Ok(())
    }

    pub fn contributions(&self, config: &Configuration) -> Result<Vec<S>> {
        self.check(config)?;
        Ok((0..self.n()).map(|i| self.contribution_of(i, config.bits())).collect())
    }

    /// Overall fitness: the mean of the `N` contributions.
    pub fn fitness(&self, config: &Configuration) -> Result<S> {
        self.check(config)?;
        Ok(self.fitness_of(config.bits()))
    }

    pub(crate) fn fitness_of(&self, bits: &[bool]) -> S {
        let total: S = (0..self.n()).map(|i| self.contribution_of(i, bits)).sum();
        total / S::of(self.n() as f64)
    }

    /// Mean contribution over the attributes in `range`.
    pub(crate) fn block_mean(&self, bits: &[bool], range: std::ops::Range<usize>) -> S {
        let len = range.len();
        if len == 0 {
            return S::zero();
        }
        let total: S = range.map(|i| self.contribution_of(i, bits)).sum();
        total / S::of(len as f64)
    }

    fn enforce_cap(&self, cap: usize) -> Result<()> {
        if self.n() > cap || self.n() > 62 {
            return Err(Error::EnumerationCap { n: self.n(), cap });
        }
        Ok(())
    }

    /// Fitness of every configuration, indexed by lexicographic rank.
    pub fn enumerate_values(&self, cap: usize) -> Result<Vec<S>> {
        self.enforce_cap(cap)?;
        let n = self.n();
        let mut bits = vec![false; n];
        Ok((0..1u64 << n)
            .map(|m| {
                for (i, b) in bits.iter_mut().enumerate() {
                    *b = (m >> (n - 1 - i)) & 1 == 1;
                }
                self.fitness_of(&bits)
            })
            .collect())
    }

    /// Exhaustive maximizer under the default enumeration cap; ties go to the
    /// lexicographically smallest bit vector.
    pub fn global_optimum(&self) -> Result<(Configuration, S)> {
        self.global_optimum_with_cap(DEFAULT_ENUMERATION_CAP)
    }

    pub fn global_optimum_with_cap(&self, cap: usize) -> Result<(Configuration, S)> {
        let values = self.enumerate_values(cap)?;
        let mut best = 0usize;
        for (m, &v) in values.iter().enumerate() {
            if v > values[best] {
                best = m;
            }
        }
        Ok((Configuration::from_index(best as u64, self.n()), values[best]))
    }

    /// Every configuration strictly fitter than all of its one-flip
    /// neighbours, in lexicographic order.
    pub fn local_optima_census(&self) -> Result<Census<S>> {
        self.local_optima_census_with_cap(DEFAULT_ENUMERATION_CAP)
    }

    pub fn local_optima_census_with_cap(&self, cap: usize) -> Result<Census<S>> {
        let values = self.enumerate_values(cap)?;
        let n = self.n();
        let optima = values
            .iter()
            .enumerate()
            .filter(|&(m, &v)| (0..n).all(|bit| v > values[m ^ (1usize << bit)]))
            .map(|(m, &v)| (Configuration::from_index(m as u64, n), v))
            .collect();
        Ok(Census { optima })
    }

    /// Versioned text dump: one `c` line per (attribute, local pattern,
    /// contribution) triple, contributions at 17 significant digits.
    /// Attribute indices are zero-based; patterns list `d_i` first.
    pub fn dump(&self) -> String {
        let mut out = String::new();
        out.push_str(DUMP_HEADER);
        out.push('\n');
        out.push_str(&format!("n {}\n", self.spec.n_attributes));
        out.push_str(&format!("k {}\n", self.spec.k_interactions));
        out.push_str(&format!("pattern {}\n", self.spec.pattern));
        out.push_str(&format!("seed {}\n", self.spec.seed));
        for (i, partners) in self.interactions.iter().enumerate() {
            out.push_str(&format!("interactions {i}"));
            for j in partners {
                out.push_str(&format!(" {j}"));
            }
            out.push('\n');
        }
        for (i, table) in self.tables.iter().enumerate() {
            let width = self.interactions[i].len() + 1;
            for (pattern, &c) in table.iter().enumerate() {
                out.push_str(&format!("c {i} {pattern:0width$b} {:.16e}\n", c.to_f64_lossy()));
            }
        }
        out
    }

    /// Parse a dump produced by [`Landscape::dump`].
    pub fn parse_dump(text: &str) -> Result<Self> {
        let err = |line: usize, reason: &str| Error::Dump { line, reason: reason.to_string() };
        let mut lines = text.lines().enumerate().map(|(i, l)| (i + 1, l.trim()));
        match lines.next() {
            Some((_, DUMP_HEADER)) => {}
            _ => return Err(err(1, "missing `# nk-landscape v1` header")),
        }
        let mut n = None;
        let mut k = None;
        let mut pattern = None;
        let mut seed = None;
        let mut interactions: Vec<Option<Vec<usize>>> = Vec::new();
        let mut entries: Vec<(usize, usize, usize, f64)> = Vec::new();
        for (no, line) in lines {
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let mut parts = line.split_whitespace();
            let key = parts.next().unwrap_or_default();
            let rest: Vec<&str> = parts.collect();
            let num = |s: &str| s.parse::<usize>().map_err(|_| err(no, "expected an integer"));
            match key {
                "n" => {
                    let v = num(rest.first().copied().unwrap_or(""))?;
                    interactions = vec![None; v];
                    n = Some(v);
                }
                "k" => k = Some(num(rest.first().copied().unwrap_or(""))?),
                "seed" => {
                    seed = Some(
                        rest.first()
                            .and_then(|s| s.parse::<u64>().ok())
                            .ok_or_else(|| err(no, "expected a u64 seed"))?,
                    )
                }
                "pattern" => {
                    pattern = Some(match rest.as_slice() {
                        ["adjacent-cyclic"] => InteractionPattern::AdjacentCyclic,
                        ["random-without-replacement"] => InteractionPattern::RandomWithoutReplacement,
                        ["block-diagonal", sizes] => InteractionPattern::BlockDiagonal {
                            blocks: sizes.split(',').map(num).collect::<Result<_>>()?,
                        },
                        _ => return Err(err(no, "unknown interaction pattern")),
                    })
                }
                "interactions" => {
                    let i = num(rest.first().copied().unwrap_or(""))?;
                    let partners = rest[1..].iter().map(|s| num(s)).collect::<Result<Vec<_>>>()?;
                    let slot = interactions.get_mut(i).ok_or_else(|| err(no, "attribute out of range"))?;
                    *slot = Some(partners);
                }
                "c" => {
                    let [i, pat, val] = rest.as_slice() else {
                        return Err(err(no, "expected `c <attribute> <pattern> <value>`"));
                    };
                    let i = num(i)?;
                    let index = usize::from_str_radix(pat, 2).map_err(|_| err(no, "pattern is not binary"))?;
                    let value = val.parse::<f64>().map_err(|_| err(no, "contribution is not a number"))?;
                    entries.push((no, i, index, value));
                }
                _ => return Err(err(no, "unknown record")),
            }
        }
        let spec = LandscapeSpec {
            n_attributes: n.ok_or_else(|| err(0, "missing `n`"))?,
            k_interactions: k.ok_or_else(|| err(0, "missing `k`"))?,
            pattern: pattern.ok_or_else(|| err(0, "missing `pattern`"))?,
            seed: seed.ok_or_else(|| err(0, "missing `seed`"))?,
        };
        let interactions: Vec<Vec<usize>> = interactions
            .into_iter()
            .enumerate()
            .map(|(i, p)| p.ok_or_else(|| err(0, &format!("missing interactions for attribute {i}"))))
            .collect::<Result<_>>()?;
        let mut tables: Vec<Vec<Option<S>>> =
            interactions.iter().map(|p| vec![None; 1usize << (p.len() + 1).min(31)]).collect();
        for (no, i, index, value) in entries {
            let slot =
                tables.get_mut(i).and_then(|t| t.get_mut(index)).ok_or_else(|| err(no, "entry outside the table"))?;
            if slot.replace(S::of(value)).is_some() {
                return Err(err(no, "duplicate entry"));
            }
        }
        let tables = tables
            .into_iter()
            .enumerate()
            .map(|(i, t)| {
                t.into_iter()
                    .collect::<Option<Vec<S>>>()
                    .ok_or_else(|| err(0, &format!("table of attribute {i} is incomplete")))
            })
            .collect::<Result<_>>()?;
        Self::from_parts(spec, interactions, tables)
    }
}
