//! Domain types, additive valuation and cake normalization.

mod format;
mod ratio;

use serde::{Deserialize, Serialize};

pub use format::{instance_to_json, parse_instance};
pub use ratio::{ParseRatioError, Ratio};

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum ModelError {
    #[error("invalid rational for {context}: {source}")]
    BadRatio { context: String, source: ParseRatioError },
    #[error("malformed document: {0}")]
    Malformed(String),
    #[error("duplicate agent id `{0}`")]
    DuplicateAgent(String),
    #[error("duplicate item id `{0}`")]
    DuplicateItem(String),
    #[error("unknown agent id `{0}`")]
    UnknownAgent(String),
    #[error("item `{item}` has no utility for agent `{agent}`")]
    MissingUtility { item: String, agent: String },
    #[error("agent `{agent}`: segment [{start}, {end}] is empty or outside [0, 1]")]
    BadSegment { agent: String, start: String, end: String },
    #[error("agent `{agent}`: overlapping density segments")]
    OverlappingSegments { agent: String },
    #[error("agent `{agent}`: negative density {density}")]
    NegativeDensity { agent: String, density: String },
    #[error("utility matrix must be {agents} x {items}")]
    Dimension { agents: usize, items: usize },
    #[error("instance needs at least one agent")]
    NoAgents,
    #[error("invalid allocation: {0}")]
    InvalidAllocation(String),
}

/// Piecewise-constant density on `[start, end)`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DensitySegment {
    pub start: Ratio,
    pub end: Ratio,
    pub density: Ratio,
}

impl DensitySegment {
    pub fn new(start: Ratio, end: Ratio, density: Ratio) -> Self {
        DensitySegment { start, end, density }
    }

    /// `density * |[start, end] ∩ [lo, hi]|`
    fn overlap_value(&self, lo: &Ratio, hi: &Ratio) -> Ratio {
        let a = if lo > &self.start { lo } else { &self.start };
        let b = if hi < &self.end { hi } else { &self.end };
        if a < b {
            &self.density * (b - a)
        } else {
            Ratio::zero()
        }
    }
}

/// A set of item indices, kept sorted and duplicate-free.
#[derive(Debug, Clone, Default, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Bundle(Vec<usize>);

impl Bundle {
    pub fn new() -> Self {
        Bundle(Vec::new())
    }

    pub fn singleton(item: usize) -> Self {
        Bundle(vec![item])
    }

    pub fn items(&self) -> &[usize] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn contains(&self, item: usize) -> bool {
        self.0.binary_search(&item).is_ok()
    }

    pub fn insert(&mut self, item: usize) {
        if let Err(pos) = self.0.binary_search(&item) {
            self.0.insert(pos, item);
        }
    }

    pub fn remove(&mut self, item: usize) -> bool {
        match self.0.binary_search(&item) {
            Ok(pos) => {
                self.0.remove(pos);
                true
            }
            Err(_) => false,
        }
    }

    pub fn extend(&mut self, other: &Bundle) {
        for &t in &other.0 {
            self.insert(t);
        }
    }

    pub fn union(&self, other: &Bundle) -> Bundle {
        let mut out = self.clone();
        out.extend(other);
        out
    }

    pub fn without(&self, item: usize) -> Bundle {
        let mut out = self.clone();
        out.remove(item);
        out
    }

    pub fn is_disjoint(&self, other: &Bundle) -> bool {
        self.0.iter().all(|t| !other.contains(*t))
    }

    pub fn iter(&self) -> impl Iterator<Item = usize> + '_ {
        self.0.iter().copied()
    }
}

impl FromIterator<usize> for Bundle {
    fn from_iter<I: IntoIterator<Item = usize>>(iter: I) -> Self {
        let mut v: Vec<usize> = iter.into_iter().collect();
        v.sort_unstable();
        v.dedup();
        Bundle(v)
    }
}

/// A closed interval of the cake `[0, 1]`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Interval {
    pub start: Ratio,
    pub end: Ratio,
}

/// Finite union of disjoint, non-degenerate intervals.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct CakePiece {
    pub intervals: Vec<Interval>,
}

impl CakePiece {
    pub fn empty() -> Self {
        CakePiece::default()
    }

    pub fn whole() -> Self {
        CakePiece {
            intervals: vec![Interval {
                start: Ratio::zero(),
                end: Ratio::one(),
            }],
        }
    }

    pub fn is_empty(&self) -> bool {
        self.intervals.is_empty()
    }

    /// Appends `[start, end]`, coalescing with the last interval when they touch.
    /// Degenerate intervals are dropped.
    pub fn push(&mut self, start: Ratio, end: Ratio) {
        if start >= end {
            return;
        }
        if let Some(last) = self.intervals.last_mut() {
            if last.end == start {
                last.end = end;
                return;
            }
        }
        self.intervals.push(Interval { start, end });
    }

    pub fn append(&mut self, other: &CakePiece) {
        for iv in &other.intervals {
            self.push(iv.start.clone(), iv.end.clone());
        }
        self.canonicalize();
    }

    /// Sorts intervals and merges touching ones.
    pub fn canonicalize(&mut self) {
        let mut ivs = std::mem::take(&mut self.intervals);
        ivs.sort_by(|a, b| a.start.cmp(&b.start));
        for iv in ivs {
            self.push(iv.start, iv.end);
        }
    }

    pub fn length(&self) -> Ratio {
        self.intervals.iter().map(|iv| &iv.end - &iv.start).sum()
    }
}

/// Item allocation: one bundle per agent.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DiscreteAllocation {
    pub bundles: Vec<Bundle>,
}

impl DiscreteAllocation {
    pub fn empty(n: usize) -> Self {
        DiscreteAllocation {
            bundles: vec![Bundle::new(); n],
        }
    }

    pub fn n(&self) -> usize {
        self.bundles.len()
    }

    /// Builds from an owner per item.
    pub fn from_owners(n: usize, owners: &[usize]) -> Self {
        let mut a = DiscreteAllocation::empty(n);
        for (t, &i) in owners.iter().enumerate() {
            a.bundles[i].insert(t);
        }
        a
    }

    /// Checks that the bundles partition the instance's items.
    pub fn validate(&self, inst: &Instance) -> Result<(), ModelError> {
        if self.bundles.len() != inst.n() {
            return Err(ModelError::InvalidAllocation(format!(
                "{} bundles for {} agents",
                self.bundles.len(),
                inst.n()
            )));
        }
        let mut seen = vec![false; inst.m()];
        for b in &self.bundles {
            for t in b.iter() {
                if t >= inst.m() {
                    return Err(ModelError::InvalidAllocation(format!("item index {t} out of range")));
                }
                if std::mem::replace(&mut seen[t], true) {
                    return Err(ModelError::InvalidAllocation(format!(
                        "item `{}` allocated twice",
                        inst.items[t]
                    )));
                }
            }
        }
        if let Some(t) = seen.iter().position(|s| !s) {
            return Err(ModelError::InvalidAllocation(format!(
                "item `{}` is unallocated",
                inst.items[t]
            )));
        }
        Ok(())
    }
}

/// The divisible component of a mixed allocation.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Divisible {
    Payments(Vec<Ratio>),
    Pieces(Vec<CakePiece>),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MixedAllocation {
    pub discrete: DiscreteAllocation,
    pub divisible: Divisible,
}

impl MixedAllocation {
    /// Structural checks: item partition, non-negative payments, or cake
    /// pieces that are pairwise disjoint and cover `[0, 1]`.
    pub fn validate(&self, inst: &Instance) -> Result<(), ModelError> {
        self.discrete.validate(inst)?;
        match &self.divisible {
            Divisible::Payments(p) => {
                if p.len() != inst.n() {
                    return Err(ModelError::InvalidAllocation("payment vector length".into()));
                }
                if p.iter().any(Ratio::is_negative) {
                    return Err(ModelError::InvalidAllocation("negative payment".into()));
                }
            }
            Divisible::Pieces(pieces) => {
                if pieces.len() != inst.n() {
                    return Err(ModelError::InvalidAllocation("piece count".into()));
                }
                let mut all: Vec<&Interval> = pieces.iter().flat_map(|p| &p.intervals).collect();
                if all.iter().any(|iv| iv.start >= iv.end) {
                    return Err(ModelError::InvalidAllocation("degenerate cake interval".into()));
                }
                all.sort_by(|a, b| a.start.cmp(&b.start));
                let mut cursor = Ratio::zero();
                for iv in all {
                    if iv.start != cursor {
                        return Err(ModelError::InvalidAllocation(format!(
                            "cake pieces do not tile [0, 1] at {cursor}"
                        )));
                    }
                    cursor = iv.end.clone();
                }
                if cursor != Ratio::one() {
                    return Err(ModelError::InvalidAllocation(format!(
                        "cake pieces do not tile [0, 1] at {cursor}"
                    )));
                }
            }
        }
        Ok(())
    }
}

/// Agents, items, an additive utility matrix, and optional piecewise-constant cake densities.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Instance {
    agents: Vec<String>,
    items: Vec<String>,
    utilities: Vec<Vec<Ratio>>,
    cake: Option<Vec<Vec<DensitySegment>>>,
}

impl Instance {
    /// Validates and builds an instance. Segments are sorted by start.
    pub fn new(
        agents: Vec<String>,
        items: Vec<String>,
        utilities: Vec<Vec<Ratio>>,
        cake: Option<Vec<Vec<DensitySegment>>>,
    ) -> Result<Self, ModelError> {
        if agents.is_empty() {
            return Err(ModelError::NoAgents);
        }
        for (k, a) in agents.iter().enumerate() {
            if agents[..k].contains(a) {
                return Err(ModelError::DuplicateAgent(a.clone()));
            }
        }
        for (k, t) in items.iter().enumerate() {
            if items[..k].contains(t) {
                return Err(ModelError::DuplicateItem(t.clone()));
            }
        }
        let dim = ModelError::Dimension {
            agents: agents.len(),
            items: items.len(),
        };
        if utilities.len() != agents.len() || utilities.iter().any(|row| row.len() != items.len()) {
            return Err(dim);
        }
        let cake = match cake {
            None => None,
            Some(per_agent) => {
                if per_agent.len() != agents.len() {
                    return Err(dim);
                }
                let mut out = Vec::with_capacity(per_agent.len());
                for (segs, name) in per_agent.into_iter().zip(&agents) {
                    out.push(validate_segments(name, segs)?);
                }
                Some(out)
            }
        };
        Ok(Instance {
            agents,
            items,
            utilities,
            cake,
        })
    }

    /// Item-only instance from an integer matrix `u[agent][item]`, with ids
    /// `a0, a1, ...` and `t0, t1, ...`.
    pub fn from_integers(u: &[Vec<i64>]) -> Self {
        let n = u.len();
        let m = u.first().map_or(0, Vec::len);
        let utilities = u
            .iter()
            .map(|row| row.iter().map(|&x| Ratio::from_integer(x)).collect())
            .collect();
        Instance::new(
            (0..n).map(|i| format!("a{i}")).collect(),
            (0..m).map(|t| format!("t{t}")).collect(),
            utilities,
            None,
        )
        .expect("well-formed integer matrix")
    }

    /// Same agents and items with the given cake densities.
    pub fn with_cake(self, cake: Vec<Vec<DensitySegment>>) -> Result<Self, ModelError> {
        Instance::new(self.agents, self.items, self.utilities, Some(cake))
    }

    pub fn without_cake(&self) -> Self {
        Instance {
            cake: None,
            ..self.clone()
        }
    }

    pub fn n(&self) -> usize {
        self.agents.len()
    }

    pub fn m(&self) -> usize {
        self.items.len()
    }

    pub fn agent_ids(&self) -> &[String] {
        &self.agents
    }

    pub fn item_ids(&self) -> &[String] {
        &self.items
    }

    pub fn utility(&self, agent: usize, item: usize) -> &Ratio {
        &self.utilities[agent][item]
    }

    pub fn utilities(&self) -> &[Vec<Ratio>] {
        &self.utilities
    }

    pub fn cake(&self) -> Option<&[Vec<DensitySegment>]> {
        self.cake.as_deref()
    }

    pub fn has_cake(&self) -> bool {
        self.cake.is_some()
    }

    pub fn agent_index(&self, id: &str) -> Option<usize> {
        self.agents.iter().position(|a| a == id)
    }

    pub fn item_index(&self, id: &str) -> Option<usize> {
        self.items.iter().position(|t| t == id)
    }

    /// `u_i(S) = Σ_{t∈S} u_i(t)` over a slice of item indices.
    pub fn value_of(&self, agent: usize, items: impl IntoIterator<Item = usize>) -> Ratio {
        let row = &self.utilities[agent];
        items.into_iter().map(|t| &row[t]).sum()
    }

    /// `u_i(t) < 0` for every agent.
    pub fn is_objective_chore(&self, item: usize) -> bool {
        self.utilities.iter().all(|row| row[item].is_negative())
    }

    pub fn is_subjective_good(&self, item: usize) -> bool {
        !self.is_objective_chore(item)
    }

    /// Value of the whole cake `[0, 1]` for `agent`; zero without a cake.
    pub fn cake_total(&self, agent: usize) -> Ratio {
        match &self.cake {
            None => Ratio::zero(),
            Some(c) => c[agent].iter().map(|s| &s.density * (&s.end - &s.start)).sum(),
        }
    }
}

fn validate_segments(agent: &str, mut segs: Vec<DensitySegment>) -> Result<Vec<DensitySegment>, ModelError> {
    let zero = Ratio::zero();
    let one = Ratio::one();
    for s in &segs {
        if s.start >= s.end || s.start < zero || s.end > one {
            return Err(ModelError::BadSegment {
                agent: agent.to_string(),
                start: s.start.to_string(),
                end: s.end.to_string(),
            });
        }
        if s.density.is_negative() {
            return Err(ModelError::NegativeDensity {
                agent: agent.to_string(),
                density: s.density.to_string(),
            });
        }
    }
    segs.sort_by(|a, b| a.start.cmp(&b.start));
    if segs.windows(2).any(|w| w[1].start < w[0].end) {
        return Err(ModelError::OverlappingSegments {
            agent: agent.to_string(),
        });
    }
    Ok(segs)
}

/// Additive bundle value; the empty bundle is worth zero.
pub fn bundle_value(inst: &Instance, agent: usize, b: &Bundle) -> Ratio {
    inst.value_of(agent, b.iter())
}

/// Exact integral of `agent`'s density over `piece`.
pub fn cake_value(inst: &Instance, agent: usize, piece: &CakePiece) -> Ratio {
    let Some(cake) = inst.cake() else {
        return Ratio::zero();
    };
    let segs = &cake[agent];
    piece
        .intervals
        .iter()
        .flat_map(|iv| segs.iter().map(move |s| s.overlap_value(&iv.start, &iv.end)))
        .sum()
}

/// Scales every agent with positive cake value `v_i` by `1 / v_i` (items and
/// densities alike), so each agent values the cake at exactly 0 or 1.
/// Item-only instances are returned unchanged.
pub fn normalize(inst: &Instance) -> Instance {
    let Some(cake) = &inst.cake else {
        return inst.clone();
    };
    let mut utilities = inst.utilities.clone();
    let mut cake = cake.clone();
    for i in 0..inst.n() {
        let total = inst.cake_total(i);
        if total.is_zero() || total == Ratio::one() {
            continue;
        }
        let scale = total.recip();
        for u in &mut utilities[i] {
            *u = &*u * &scale;
        }
        for s in &mut cake[i] {
            s.density = &s.density * &scale;
        }
    }
    Instance {
        agents: inst.agents.clone(),
        items: inst.items.clone(),
        utilities,
        cake: Some(cake),
    }
}
