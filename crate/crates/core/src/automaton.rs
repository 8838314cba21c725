//! Synchronous cellular automata on lines, rings, rectangles and tori.
//!
//! Every [`step`] computes all next states from the time-`t` grid before
//! writing anything, so the result never depends on cell-visit order.
//! Stochastic rules draw exactly one uniform per cell per step, in cell-index
//! order, before any cell is updated.

use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::Stream;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum Topology {
    Line { len: usize },
    Ring { len: usize },
    Rect { rows: usize, cols: usize },
    Torus { rows: usize, cols: usize },
}

impl Topology {
    pub fn rows(&self) -> usize {
        match *self {
            Self::Line { .. } | Self::Ring { .. } => 1,
            Self::Rect { rows, .. } | Self::Torus { rows, .. } => rows,
        }
    }

    pub fn cols(&self) -> usize {
        match *self {
            Self::Line { len } | Self::Ring { len } => len,
            Self::Rect { cols, .. } | Self::Torus { cols, .. } => cols,
        }
    }

    pub fn cells(&self) -> usize {
        self.rows() * self.cols()
    }

    pub fn is_one_dimensional(&self) -> bool {
        matches!(self, Self::Line { .. } | Self::Ring { .. })
    }

    fn wraps(&self, boundary: Boundary) -> bool {
        match self {
            Self::Ring { .. } | Self::Torus { .. } => true,
            Self::Line { .. } | Self::Rect { .. } => boundary == Boundary::Wrap,
        }
    }
}

/// Edge handling for lines and rectangles; rings and tori always wrap.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum Boundary {
    Fixed { value: u8 },
    Wrap,
}

impl Default for Boundary {
    fn default() -> Self {
        Self::Fixed { value: 0 }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Grid {
    topology: Topology,
    boundary: Boundary,
    alphabet: u8,
    states: Vec<u8>,
}

impl Grid {
    /// Grid with every cell in state 0.
    pub fn new(topology: Topology, boundary: Boundary, alphabet: u8) -> Result<Self> {
        Self::from_states(topology, boundary, alphabet, vec![0; topology.cells()])
    }

    pub fn from_states(topology: Topology, boundary: Boundary, alphabet: u8, states: Vec<u8>) -> Result<Self> {
        if topology.rows() == 0 || topology.cols() == 0 {
            return Err(Error::InvalidParameter("grid dimensions must be positive".into()));
        }
        if alphabet < 2 {
            return Err(Error::InvalidParameter("alphabet needs at least two states".into()));
        }
        if states.len() != topology.cells() {
            return Err(Error::InvalidParameter(format!(
                "{} states given for {} cells",
                states.len(),
                topology.cells()
            )));
        }
        if let Boundary::Fixed { value } = boundary {
            if value >= alphabet {
                return Err(Error::AlphabetMismatch { state: value, alphabet });
            }
        }
        if let Some(&bad) = states.iter().find(|&&s| s >= alphabet) {
            return Err(Error::AlphabetMismatch { state: bad, alphabet });
        }
        Ok(Self { topology, boundary, alphabet, states })
    }

    pub fn topology(&self) -> Topology {
        self.topology
    }

    pub fn boundary(&self) -> Boundary {
        self.boundary
    }

    pub fn alphabet(&self) -> u8 {
        self.alphabet
    }

    pub fn states(&self) -> &[u8] {
        &self.states
    }

    pub fn index(&self, row: usize, col: usize) -> usize {
        row * self.topology.cols() + col
    }

    pub fn get(&self, cell: usize) -> u8 {
        self.states[cell]
    }

    pub fn set(&mut self, cell: usize, state: u8) -> Result<()> {
        if state >= self.alphabet {
            return Err(Error::AlphabetMismatch { state, alphabet: self.alphabet });
        }
        let len = self.states.len();
        let slot = self
            .states
            .get_mut(cell)
            .ok_or_else(|| Error::InvalidParameter(format!("cell {cell} outside a grid of {len} cells")))?;
        *slot = state;
        Ok(())
    }

    /// Number of cells in each state `0..alphabet`.
    pub fn counts(&self) -> Vec<usize> {
        let mut counts = vec![0; usize::from(self.alphabet)];
        for &s in &self.states {
            counts[usize::from(s)] += 1;
        }
        counts
    }

    /// Dense integer CSV, one line per grid row.
    pub fn to_csv(&self) -> String {
        let cols = self.topology.cols();
        let mut out = String::new();
        for row in self.states.chunks(cols) {
            let line: Vec<String> = row.iter().map(|s| s.to_string()).collect();
            out.push_str(&line.join(","));
            out.push('\n');
        }
        out
    }

    /// State seen at offset `(dr, dc)` from `cell`, honouring the boundary.
    fn neighbor_state(&self, cell: usize, dr: isize, dc: isize) -> u8 {
        let rows = self.topology.rows() as isize;
        let cols = self.topology.cols() as isize;
        let r = (cell as isize) / cols + dr;
        let c = (cell as isize) % cols + dc;
        if self.topology.wraps(self.boundary) {
            let r = r.rem_euclid(rows);
            let c = c.rem_euclid(cols);
            return self.states[(r * cols + c) as usize];
        }
        if r < 0 || r >= rows || c < 0 || c >= cols {
            match self.boundary {
                Boundary::Fixed { value } => value,
                Boundary::Wrap => unreachable!("wrapping handled above"),
            }
        } else {
            self.states[(r * cols + c) as usize]
        }
    }
}

impl fmt::Display for Grid {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.to_csv())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum Neighborhood {
    /// Cells within `radius` along the row only.
    LeftRight {
        radius: usize,
    },
    VonNeumann {
        radius: usize,
    },
    Moore {
        radius: usize,
    },
}

impl Default for Neighborhood {
    fn default() -> Self {
        Self::VonNeumann { radius: 1 }
    }
}

impl Neighborhood {
    /// Offsets `(dr, dc)` of the neighbours, excluding the cell itself. On
    /// one-dimensional topologies every kind reduces to left-right.
    pub fn offsets(&self, topology: Topology) -> Vec<(isize, isize)> {
        let (radius, kind) = match *self {
            Self::LeftRight { radius } => (radius as isize, 0),
            Self::VonNeumann { radius } => (radius as isize, 1),
            Self::Moore { radius } => (radius as isize, 2),
        };
        if topology.is_one_dimensional() || kind == 0 {
            return (-radius..=radius).filter(|&d| d != 0).map(|d| (0, d)).collect();
        }
        let mut out = Vec::new();
        for dr in -radius..=radius {
            for dc in -radius..=radius {
                let inside = if kind == 1 { dr.abs() + dc.abs() <= radius } else { true };
                if inside && (dr, dc) != (0, 0) {
                    out.push((dr, dc));
                }
            }
        }
        out
    }
}

/// What an update rule sees of the neighbourhood: the state sum for
/// two-state alphabets, per-state counts otherwise.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Aggregate {
    Sum(u32),
    Counts(Vec<u32>),
}

impl Aggregate {
    /// Number of neighbours in `state`.
    pub fn count(&self, state: u8) -> u32 {
        match self {
            Self::Sum(sum) => match state {
                1 => *sum,
                _ => 0,
            },
            Self::Counts(c) => c.get(usize::from(state)).copied().unwrap_or(0),
        }
    }

    /// Sum of neighbour states.
    pub fn sum(&self) -> u32 {
        match self {
            Self::Sum(sum) => *sum,
            Self::Counts(c) => c.iter().enumerate().map(|(s, &n)| s as u32 * n).sum(),
        }
    }
}

pub type UpdateFn = Arc<dyn Fn(u8, &Aggregate, Option<f64>) -> u8 + Send + Sync>;

#[derive(Clone)]
pub enum Update {
    /// `next[own][neighbour_sum]`.
    Totalistic { next: Vec<Vec<u8>> },
    /// Absorbing adoption: a 0-cell with at least `threshold` neighbours in
    /// state 1 adopts, with probability `probability` when set.
    Adoption { threshold: u32, probability: Option<f64> },
    /// Arbitrary mapping; receives one uniform draw per cell when
    /// `stochastic`.
    Custom { f: UpdateFn, stochastic: bool },
}

impl fmt::Debug for Update {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Totalistic { next } => f.debug_struct("Totalistic").field("next", next).finish(),
            Self::Adoption { threshold, probability } => {
                f.debug_struct("Adoption").field("threshold", threshold).field("probability", probability).finish()
            }
            Self::Custom { stochastic, .. } => {
                f.debug_struct("Custom").field("stochastic", stochastic).finish_non_exhaustive()
            }
        }
    }
}

#[derive(Debug, Clone)]
pub struct Rule {
    pub alphabet: u8,
    pub neighborhood: Neighborhood,
    pub update: Update,
}

impl Rule {
    pub fn totalistic(alphabet: u8, neighborhood: Neighborhood, next: Vec<Vec<u8>>) -> Result<Self> {
        if next.len() != usize::from(alphabet) {
            return Err(Error::InvalidParameter(format!(
                "totalistic table needs one row per state ({alphabet}), got {}",
                next.len()
            )));
        }
        if let Some(&bad) = next.iter().flatten().find(|&&s| s >= alphabet) {
            return Err(Error::AlphabetMismatch { state: bad, alphabet });
        }
        Ok(Self { alphabet, neighborhood, update: Update::Totalistic { next } })
    }

    pub fn custom(alphabet: u8, neighborhood: Neighborhood, stochastic: bool, f: UpdateFn) -> Self {
        Self { alphabet, neighborhood, update: Update::Custom { f, stochastic } }
    }

    pub fn is_stochastic(&self) -> bool {
        match &self.update {
            Update::Totalistic { .. } => false,
            Update::Adoption { probability, .. } => probability.is_some(),
            Update::Custom { stochastic, .. } => *stochastic,
        }
    }

    fn check(&self, grid: &Grid, offsets: usize) -> Result<()> {
        if grid.alphabet() != self.alphabet {
            return Err(Error::InvalidParameter(format!(
                "rule alphabet {} does not match grid alphabet {}",
                self.alphabet,
                grid.alphabet()
            )));
        }
        if let Update::Totalistic { next } = &self.update {
            let max_sum = offsets * usize::from(self.alphabet - 1);
            if next.iter().any(|row| row.len() <= max_sum) {
                return Err(Error::InvalidParameter(format!(
                    "totalistic rows must cover neighbour sums 0..={max_sum}"
                )));
            }
        }
        Ok(())
    }

    fn apply(&self, own: u8, aggregate: &Aggregate, draw: Option<f64>) -> u8 {
        match &self.update {
            Update::Totalistic { next } => next[usize::from(own)][aggregate.sum() as usize],
            Update::Adoption { threshold, probability } => {
                if own == 1 {
                    1
                } else if aggregate.count(1) >= *threshold {
                    match probability {
                        None => 1,
                        Some(p) => u8::from(draw.unwrap_or(1.0) < *p),
                    }
                } else {
                    0
                }
            }
            Update::Custom { f, .. } => f(own, aggregate, draw),
        }
    }
}

fn aggregate_at(grid: &Grid, cell: usize, offsets: &[(isize, isize)]) -> Aggregate {
    if grid.alphabet == 2 {
        Aggregate::Sum(offsets.iter().map(|&(dr, dc)| u32::from(grid.neighbor_state(cell, dr, dc))).sum())
    } else {
        let mut counts = vec![0u32; usize::from(grid.alphabet)];
        for &(dr, dc) in offsets {
            counts[usize::from(grid.neighbor_state(cell, dr, dc))] += 1;
        }
        Aggregate::Counts(counts)
    }
}

/// One synchronous update of every cell.
pub fn step(grid: &Grid, rule: &Rule, rng: &mut Stream) -> Result<Grid> {
    let offsets = rule.neighborhood.offsets(grid.topology);
    rule.check(grid, offsets.len())?;
    let draws: Option<Vec<f64>> = rule.is_stochastic().then(|| (0..grid.states.len()).map(|_| rng.uniform()).collect());
    let states = (0..grid.states.len())
        .map(|cell| {
            let aggregate = aggregate_at(grid, cell, &offsets);
            let next = rule.apply(grid.states[cell], &aggregate, draws.as_ref().map(|d| d[cell]));
            if next >= grid.alphabet {
                Err(Error::AlphabetMismatch { state: next, alphabet: grid.alphabet })
            } else {
                Ok(next)
            }
        })
        .collect::<Result<Vec<u8>>>()?;
    Ok(Grid { states, ..grid.clone() })
}

#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    /// `grids[0]` is the input grid.
    pub grids: Vec<Grid>,
    /// Per-step count of cells in each state.
    pub counts: Vec<Vec<usize>>,
}

impl Trajectory {
    /// `step,state,count` CSV with a header row.
    pub fn summary_csv(&self) -> String {
        let mut out = String::from("step,state,count\n");
        for (t, counts) in self.counts.iter().enumerate() {
            for (state, n) in counts.iter().enumerate() {
                out.push_str(&format!("{t},{state},{n}\n"));
            }
        }
        out
    }

    pub fn last(&self) -> &Grid {
        self.grids.last().expect("trajectory always holds the input grid")
    }
}

pub fn run(grid: &Grid, rule: &Rule, steps: usize, rng: &mut Stream) -> Result<Trajectory> {
    let mut grids = Vec::with_capacity(steps + 1);
    grids.push(grid.clone());
    for _ in 0..steps {
        let next = step(grids.last().expect("non-empty"), rule, rng)?;
        grids.push(next);
    }
    let counts = grids.iter().map(Grid::counts).collect();
    Ok(Trajectory { grids, counts })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum DiffusionVariant {
    Deterministic,
    Stochastic { p: f64 },
}

/// Innovation-diffusion rule plus its seed adopters.
#[derive(Debug, Clone)]
pub struct DiffusionPreset {
    pub rule: Rule,
    pub early_adopters: Vec<usize>,
}

/// Two-state diffusion: 0 = non-adopter, 1 = adopter (absorbing). Uses a
/// radius-1 von Neumann neighbourhood unless replaced afterwards.
pub fn diffusion_preset(
    variant: DiffusionVariant,
    early_adopters: Vec<usize>,
    threshold: u32,
) -> Result<DiffusionPreset> {
    if threshold == 0 {
        return Err(Error::InvalidParameter("adoption threshold must be at least 1".into()));
    }
    let probability = match variant {
        DiffusionVariant::Deterministic => None,
        DiffusionVariant::Stochastic { p } => {
            if !(0.0..=1.0).contains(&p) {
                return Err(Error::InvalidParameter(format!("adoption probability {p} outside [0, 1]")));
            }
            Some(p)
        }
    };
    Ok(DiffusionPreset {
        rule: Rule {
            alphabet: 2,
            neighborhood: Neighborhood::default(),
            update: Update::Adoption { threshold, probability },
        },
        early_adopters,
    })
}

impl DiffusionPreset {
    pub fn with_neighborhood(mut self, neighborhood: Neighborhood) -> Self {
        self.rule.neighborhood = neighborhood;
        self
    }

    /// All-zero grid with the early adopters switched on.
    pub fn initial_grid(&self, topology: Topology, boundary: Boundary) -> Result<Grid> {
        let mut grid = Grid::new(topology, boundary, 2)?;
        for &cell in &self.early_adopters {
            grid.set(cell, 1)?;
        }
        Ok(grid)
    }
}
