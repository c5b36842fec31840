//! Piggyback placement.
//!
//! The `k` systematic nodes are split into `t` contiguous groups. Group `g`
//! (0-based, so it sits at level `l = g + 1`) has its symbols from instances
//! `0..r - l` piggybacked onto the parities of instance `r - l`. Parity 0
//! (`f_1`) never carries a piggyback, so every column stays decodable by the
//! base code from the other systematic symbols and `f_1`.
//!
//! Indices in this module are 0-based. The canonical text form printed by
//! [`PiggybackPlan::to_canonical`] is 1-based, matching the usual table
//! notation (`col=5 row=2 sources=(1,1),(2,1)`).

use std::collections::{BTreeMap, HashMap};
use std::fmt;
use std::ops::Range;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::mds::CodeParams;

/// How a column's piggybacks are distributed over its parity cells.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
pub enum Strategy {
    /// Source instance `j` of the group goes to parity `j + 1`.
    Baseline,
    /// Summands spread over all `r - 1` piggybackable parities.
    #[default]
    Even,
}

impl fmt::Display for Strategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Strategy::Baseline => "baseline",
            Strategy::Even => "even",
        })
    }
}

impl FromStr for Strategy {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "baseline" => Ok(Strategy::Baseline),
            "even" => Ok(Strategy::Even),
            other => Err(Error::InvalidInput(format!("unknown strategy {other:?}"))),
        }
    }
}

/// Partition of the systematic nodes into contiguous groups `S_1..S_t`.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Grouping {
    sizes: Vec<usize>,
}

impl Grouping {
    pub fn new(sizes: Vec<usize>) -> Result<Self> {
        if sizes.is_empty() {
            return Err(Error::InvalidPartition("at least one group is required".into()));
        }
        if sizes.contains(&0) {
            return Err(Error::InvalidPartition(format!("group sizes must be positive: {sizes:?}")));
        }
        Ok(Grouping { sizes })
    }

    /// Sizes as equal as possible; the first `k mod t` groups get the extra node.
    pub fn equal(k: usize, t: usize) -> Result<Self> {
        if t == 0 || t > k {
            return Err(Error::InvalidPartition(format!("cannot split k = {k} into t = {t} groups")));
        }
        let (q, rem) = (k / t, k % t);
        Grouping::new((0..t).map(|g| if g < rem { q + 1 } else { q }).collect())
    }

    pub fn t(&self) -> usize {
        self.sizes.len()
    }

    pub fn k(&self) -> usize {
        self.sizes.iter().sum()
    }

    pub fn sizes(&self) -> &[usize] {
        &self.sizes
    }

    pub fn size(&self, group: usize) -> usize {
        self.sizes[group]
    }

    /// Node indices of a group.
    pub fn members(&self, group: usize) -> Range<usize> {
        let start: usize = self.sizes[..group].iter().sum();
        start..start + self.sizes[group]
    }

    pub fn group_of(&self, node: usize) -> Option<usize> {
        let mut end = 0;
        for (g, &s) in self.sizes.iter().enumerate() {
            end += s;
            if node < end {
                return Some(g);
            }
        }
        None
    }

    /// Checks `sum(s) = k` and `t <= r - 1`.
    pub fn check(&self, params: CodeParams) -> Result<()> {
        if self.k() != params.k() {
            return Err(Error::InvalidPartition(format!(
                "group sizes {:?} sum to {}, expected k = {}",
                self.sizes,
                self.k(),
                params.k()
            )));
        }
        if params.r() > 1 && self.t() > params.r() - 1 {
            return Err(Error::TooManyGroups { t: self.t(), max: params.r() - 1 });
        }
        Ok(())
    }
}

impl fmt::Display for Grouping {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = self.sizes.iter().map(|s| s.to_string()).collect();
        f.write_str(&parts.join(","))
    }
}

/// A systematic symbol `a_{node, instance}`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Source {
    pub node: usize,
    pub instance: usize,
}

impl Source {
    pub fn new(node: usize, instance: usize) -> Self {
        Source { node, instance }
    }
}

/// A parity cell: instance `column`, parity function `f_{parity + 1}`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Slot {
    pub column: usize,
    pub parity: usize,
}

impl Slot {
    pub fn new(column: usize, parity: usize) -> Self {
        Slot { column, parity }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PiggybackPlan {
    strategy: Strategy,
    k: usize,
    r: usize,
    group_of_node: Vec<usize>,
    entries: BTreeMap<Slot, Vec<Source>>,
    index: HashMap<Source, Slot>,
}

impl PiggybackPlan {
    pub fn build(params: CodeParams, grouping: &Grouping, strategy: Strategy) -> Result<Self> {
        grouping.check(params)?;
        let (k, r) = (params.k(), params.r());
        let group_of_node = (0..k).map(|i| grouping.group_of(i).expect("sizes sum to k")).collect();
        let mut entries = BTreeMap::new();

        if r > 1 {
            for g in 0..grouping.t() {
                let column = r - 1 - g;
                let members = grouping.members(g);
                match strategy {
                    Strategy::Baseline => {
                        for j in 0..column {
                            let sources = members.clone().map(|i| Source::new(i, j)).collect();
                            entries.insert(Slot::new(column, j + 1), sources);
                        }
                    }
                    Strategy::Even => {
                        let ordered: Vec<Source> = (0..column)
                            .flat_map(|j| members.clone().map(move |i| Source::new(i, j)))
                            .collect();
                        let mut rest = &ordered[..];
                        for (p, size) in even_sizes(ordered.len(), r - 1).into_iter().enumerate() {
                            let (head, tail) = rest.split_at(size);
                            rest = tail;
                            if !head.is_empty() {
                                entries.insert(Slot::new(column, p + 1), head.to_vec());
                            }
                        }
                        debug_assert!(rest.is_empty());
                    }
                }
            }
        }
        Ok(Self::from_entries(strategy, params, group_of_node, entries))
    }

    /// Assemble a plan from raw entries without checking it. Use
    /// [`validate_plan`] to inspect the result.
    pub fn from_entries(
        strategy: Strategy,
        params: CodeParams,
        group_of_node: Vec<usize>,
        entries: BTreeMap<Slot, Vec<Source>>,
    ) -> Self {
        let index = entries
            .iter()
            .flat_map(|(&slot, sources)| sources.iter().map(move |&s| (s, slot)))
            .collect();
        PiggybackPlan { strategy, k: params.k(), r: params.r(), group_of_node, entries, index }
    }

    pub fn strategy(&self) -> Strategy {
        self.strategy
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn r(&self) -> usize {
        self.r
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn entries(&self) -> &BTreeMap<Slot, Vec<Source>> {
        &self.entries
    }

    /// Piggyback summands added onto a parity cell.
    pub fn sources_at(&self, slot: Slot) -> &[Source] {
        self.entries.get(&slot).map_or(&[], |v| v.as_slice())
    }

    /// Where a systematic symbol is piggybacked, if anywhere.
    pub fn locate(&self, source: Source) -> Option<Slot> {
        self.index.get(&source).copied()
    }

    pub fn group_of_node(&self, node: usize) -> usize {
        self.group_of_node[node]
    }

    /// Number of piggyback summands placed in a column.
    pub fn summands_in_column(&self, column: usize) -> usize {
        self.entries
            .range(Slot::new(column, 0)..Slot::new(column + 1, 0))
            .map(|(_, v)| v.len())
            .sum()
    }

    /// One line per entry, 1-based: `col=<c> row=<p> sources=(i,j),...`.
    pub fn to_canonical(&self) -> String {
        let mut out = String::new();
        for (slot, sources) in &self.entries {
            let list: Vec<String> = sources
                .iter()
                .map(|s| format!("({},{})", s.node + 1, s.instance + 1))
                .collect();
            out.push_str(&format!(
                "col={} row={} sources={}\n",
                slot.column + 1,
                slot.parity + 1,
                list.join(",")
            ));
        }
        out
    }
}

/// Sizes of `groups` parts splitting `total` items: `total mod groups` parts
/// of the ceiling first, then parts of the floor.
fn even_sizes(total: usize, groups: usize) -> Vec<usize> {
    let floor = total / groups;
    let ceil = total.div_ceil(groups);
    let n_ceil = total - groups * floor;
    (0..groups).map(|p| if p < n_ceil { ceil } else { floor }).collect()
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Violation {
    ShapeMismatch(String),
    OutOfRange { slot: Slot, detail: String },
    PiggybackCondition { slot: Slot, source: Source },
    DuplicateNode { slot: Slot, node: usize },
    EmptyEntry(Slot),
    MissingSymbol(Source),
    DuplicateSymbol(Source),
    UnexpectedSymbol(Source),
    WrongColumn { source: Source, slot: Slot, expected_column: usize },
    BaselineMismatch(Slot),
    Uneven { column: usize, sizes: Vec<usize> },
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::ShapeMismatch(d) => write!(f, "shape mismatch: {d}"),
            Violation::OutOfRange { slot, detail } => {
                write!(f, "out of range at {slot:?}: {detail}")
            }
            Violation::PiggybackCondition { slot, source } => write!(
                f,
                "piggybacking condition: column {} carries instance {} of node {}",
                slot.column + 1,
                source.instance + 1,
                source.node + 1
            ),
            Violation::DuplicateNode { slot, node } => write!(
                f,
                "duplicate node in group: node {} appears twice at col {} row {}",
                node + 1,
                slot.column + 1,
                slot.parity + 1
            ),
            Violation::EmptyEntry(slot) => write!(f, "empty entry at {slot:?}"),
            Violation::MissingSymbol(s) => write!(f, "missing symbol {s:?}"),
            Violation::DuplicateSymbol(s) => write!(f, "symbol {s:?} placed more than once"),
            Violation::UnexpectedSymbol(s) => write!(f, "symbol {s:?} must not be piggybacked"),
            Violation::WrongColumn { source, slot, expected_column } => write!(
                f,
                "symbol {source:?} placed in column {} instead of {}",
                slot.column + 1,
                expected_column + 1
            ),
            Violation::BaselineMismatch(slot) => write!(f, "baseline entry differs at {slot:?}"),
            Violation::Uneven { column, sizes } => {
                write!(f, "uneven placement in column {}: {sizes:?}", column + 1)
            }
        }
    }
}

/// Every broken plan invariant; empty iff the plan is valid.
pub fn validate_plan(params: CodeParams, grouping: &Grouping, plan: &PiggybackPlan) -> Vec<Violation> {
    let mut out = Vec::new();
    let (k, r) = (params.k(), params.r());
    if plan.k != k || plan.r != r {
        out.push(Violation::ShapeMismatch(format!(
            "plan is for (k={}, r={}), code is (k={k}, r={r})",
            plan.k, plan.r
        )));
        return out;
    }
    if let Err(e) = grouping.check(params) {
        out.push(Violation::ShapeMismatch(e.to_string()));
        return out;
    }
    let expected_groups: Vec<usize> = (0..k).filter_map(|i| grouping.group_of(i)).collect();
    if plan.group_of_node != expected_groups {
        out.push(Violation::ShapeMismatch("node-to-group map disagrees with grouping".into()));
    }

    let mut seen: HashMap<Source, usize> = HashMap::new();
    for (&slot, sources) in &plan.entries {
        if slot.column >= r || slot.parity == 0 || slot.parity >= r {
            out.push(Violation::OutOfRange {
                slot,
                detail: "piggybacks live in parities 2..r of an existing column".into(),
            });
        }
        if sources.is_empty() {
            out.push(Violation::EmptyEntry(slot));
        }
        let mut nodes = Vec::new();
        for &s in sources {
            if s.node >= k || s.instance >= r {
                out.push(Violation::OutOfRange { slot, detail: format!("source {s:?}") });
                continue;
            }
            if s.instance >= slot.column {
                out.push(Violation::PiggybackCondition { slot, source: s });
            }
            if nodes.contains(&s.node) {
                out.push(Violation::DuplicateNode { slot, node: s.node });
            }
            nodes.push(s.node);
            *seen.entry(s).or_default() += 1;

            if let Some(g) = grouping.group_of(s.node) {
                let expected_column = r.saturating_sub(1 + g);
                if s.instance < expected_column && slot.column != expected_column {
                    out.push(Violation::WrongColumn { source: s, slot, expected_column });
                }
            }
        }
    }

    if r > 1 {
        for node in 0..k {
            let g = grouping.group_of(node).expect("checked");
            let piggybacked = r - 1 - g;
            for instance in 0..r {
                let s = Source::new(node, instance);
                let count = seen.get(&s).copied().unwrap_or(0);
                match (instance < piggybacked, count) {
                    (true, 0) => out.push(Violation::MissingSymbol(s)),
                    (true, 1) | (false, 0) => {}
                    (true, _) => out.push(Violation::DuplicateSymbol(s)),
                    (false, _) => out.push(Violation::UnexpectedSymbol(s)),
                }
            }
        }
    } else {
        for &s in seen.keys() {
            out.push(Violation::UnexpectedSymbol(s));
        }
    }

    match plan.strategy {
        Strategy::Baseline => {
            if let Ok(reference) = PiggybackPlan::build(params, grouping, Strategy::Baseline) {
                let slots: std::collections::BTreeSet<Slot> =
                    reference.entries.keys().chain(plan.entries.keys()).copied().collect();
                for slot in slots {
                    if reference.sources_at(slot) != plan.sources_at(slot) {
                        out.push(Violation::BaselineMismatch(slot));
                    }
                }
            }
        }
        Strategy::Even => {
            if r > 1 {
                for g in 0..grouping.t() {
                    let column = r - 1 - g;
                    let sizes: Vec<usize> =
                        (1..r).map(|p| plan.sources_at(Slot::new(column, p)).len()).collect();
                    let (lo, hi) = (sizes.iter().min().unwrap(), sizes.iter().max().unwrap());
                    if hi - lo > 1 {
                        out.push(Violation::Uneven { column, sizes });
                    }
                }
            }
        }
    }
    out
}
