//! Stripe encoding, decoding and single-node repair.
//!
//! A stripe is a `(k + r) x r` array of cells. Row `n` is node `n` (systematic
//! for `n < k`, parity `f_{n - k + 1}` otherwise) and column `c` is instance
//! `c`. Every cell is a block of `B` bytes coded lane by lane.
//!
//! Messages are laid out row-major: node `i`'s `r` cells are contiguous, so a
//! stripe's message bytes are exactly the concatenation of its systematic rows.

use std::borrow::Cow;
use std::collections::{BTreeSet, HashMap, HashSet};
use std::ops::{Add, AddAssign};

use crate::error::{Error, FetchError, Result};
use crate::gf;
use crate::layout::{Grouping, PiggybackPlan, Slot, Source, Strategy};
use crate::mds::{CodeParams, ParityMatrix};

/// Read access to the cells of one stripe.
///
/// Implementations must be deterministic for a given stripe and safe to call
/// from concurrent repairs of independent stripes.
pub trait CellSource: Sync {
    fn fetch(&self, node: usize, column: usize) -> Result<Cow<'_, [u8]>, FetchError>;
}

impl<S: CellSource + ?Sized> CellSource for &S {
    fn fetch(&self, node: usize, column: usize) -> Result<Cow<'_, [u8]>, FetchError> {
        (**self).fetch(node, column)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Stripe {
    nodes: usize,
    columns: usize,
    block_size: usize,
    data: Vec<u8>,
}

impl Stripe {
    pub fn zeroed(params: CodeParams, block_size: usize) -> Self {
        let (nodes, columns) = (params.nodes(), params.instances());
        Stripe { nodes, columns, block_size, data: vec![0; nodes * columns * block_size] }
    }

    pub fn block_size(&self) -> usize {
        self.block_size
    }

    pub fn nodes(&self) -> usize {
        self.nodes
    }

    pub fn columns(&self) -> usize {
        self.columns
    }

    fn offset(&self, node: usize, column: usize) -> usize {
        assert!(node < self.nodes && column < self.columns, "cell ({node}, {column}) out of range");
        (node * self.columns + column) * self.block_size
    }

    pub fn cell(&self, node: usize, column: usize) -> &[u8] {
        let o = self.offset(node, column);
        &self.data[o..o + self.block_size]
    }

    pub fn cell_mut(&mut self, node: usize, column: usize) -> &mut [u8] {
        let o = self.offset(node, column);
        &mut self.data[o..o + self.block_size]
    }

    /// All `r` cells of a node, back to back.
    pub fn row(&self, node: usize) -> &[u8] {
        let len = self.columns * self.block_size;
        &self.data[node * len..(node + 1) * len]
    }

    pub fn row_mut(&mut self, node: usize) -> &mut [u8] {
        let len = self.columns * self.block_size;
        &mut self.data[node * len..(node + 1) * len]
    }

    pub fn as_bytes(&self) -> &[u8] {
        &self.data
    }
}

impl CellSource for Stripe {
    fn fetch(&self, node: usize, column: usize) -> Result<Cow<'_, [u8]>, FetchError> {
        if node >= self.nodes || column >= self.columns {
            return Err(FetchError { node, column, reason: "no such cell".into() });
        }
        Ok(Cow::Borrowed(self.cell(node, column)))
    }
}

/// A cell source with some nodes unreachable.
#[derive(Debug, Clone)]
pub struct Masked<S> {
    inner: S,
    missing: HashSet<usize>,
}

impl<S: CellSource> Masked<S> {
    pub fn new(inner: S, missing: impl IntoIterator<Item = usize>) -> Self {
        Masked { inner, missing: missing.into_iter().collect() }
    }
}

impl<S: CellSource> CellSource for Masked<S> {
    fn fetch(&self, node: usize, column: usize) -> Result<Cow<'_, [u8]>, FetchError> {
        if self.missing.contains(&node) {
            return Err(FetchError { node, column, reason: "node unavailable".into() });
        }
        self.inner.fetch(node, column)
    }
}

/// Cells downloaded by one repair.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct TrafficReport {
    pub downloaded_cells: usize,
    pub mds_phase: usize,
    pub piggyback_phase: usize,
    /// Cells fetched from each node, indexed by node.
    pub per_node: Vec<usize>,
}

impl TrafficReport {
    pub fn new(nodes: usize) -> Self {
        TrafficReport { per_node: vec![0; nodes], ..Default::default() }
    }
}

impl AddAssign<&TrafficReport> for TrafficReport {
    fn add_assign(&mut self, rhs: &TrafficReport) {
        self.downloaded_cells += rhs.downloaded_cells;
        self.mds_phase += rhs.mds_phase;
        self.piggyback_phase += rhs.piggyback_phase;
        if self.per_node.len() < rhs.per_node.len() {
            self.per_node.resize(rhs.per_node.len(), 0);
        }
        for (a, b) in self.per_node.iter_mut().zip(&rhs.per_node) {
            *a += b;
        }
    }
}

impl Add for TrafficReport {
    type Output = TrafficReport;
    fn add(mut self, rhs: TrafficReport) -> TrafficReport {
        self += &rhs;
        self
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Phase {
    Mds,
    Piggyback,
}

/// Counts each distinct cell once, however often it is needed.
struct Tracker<'a, S: ?Sized> {
    source: &'a S,
    cache: HashMap<(usize, usize), Vec<u8>>,
    report: TrafficReport,
}

impl<'a, S: CellSource + ?Sized> Tracker<'a, S> {
    fn new(source: &'a S, nodes: usize) -> Self {
        Tracker { source, cache: HashMap::new(), report: TrafficReport::new(nodes) }
    }

    fn get(&mut self, node: usize, column: usize, phase: Phase) -> Result<&[u8]> {
        if !self.cache.contains_key(&(node, column)) {
            let cell = self.source.fetch(node, column)?.into_owned();
            self.report.downloaded_cells += 1;
            match phase {
                Phase::Mds => self.report.mds_phase += 1,
                Phase::Piggyback => self.report.piggyback_phase += 1,
            }
            self.report.per_node[node] += 1;
            self.cache.insert((node, column), cell);
        }
        Ok(&self.cache[&(node, column)])
    }
}

/// A piggybacked systematic MDS code with a fixed cell size.
#[derive(Debug, Clone)]
pub struct PiggybackCode {
    params: CodeParams,
    matrix: ParityMatrix,
    plan: PiggybackPlan,
    block_size: usize,
}

impl PiggybackCode {
    pub fn new(params: CodeParams, grouping: &Grouping, strategy: Strategy, block_size: usize) -> Result<Self> {
        let plan = PiggybackPlan::build(params, grouping, strategy)?;
        Self::with_plan(params, plan, block_size)
    }

    pub fn with_plan(params: CodeParams, plan: PiggybackPlan, block_size: usize) -> Result<Self> {
        if block_size == 0 {
            return Err(Error::InvalidParams("block size must be at least 1".into()));
        }
        if plan.k() != params.k() || plan.r() != params.r() {
            return Err(Error::InvalidPlan("plan was built for different parameters".into()));
        }
        if let Some((slot, _)) = plan.entries().iter().find(|(s, _)| s.parity == 0) {
            return Err(Error::InvalidPlan(format!("first parity carries a piggyback at {slot:?}")));
        }
        Ok(PiggybackCode { params, matrix: ParityMatrix::cauchy(params), plan, block_size })
    }

    pub fn params(&self) -> CodeParams {
        self.params
    }

    pub fn plan(&self) -> &PiggybackPlan {
        &self.plan
    }

    pub fn matrix(&self) -> &ParityMatrix {
        &self.matrix
    }

    pub fn block_size(&self) -> usize {
        self.block_size
    }

    /// Message bytes per stripe: `k * r * B`.
    pub fn stripe_data_len(&self) -> usize {
        self.params.k() * self.params.r() * self.block_size
    }

    /// Parity cell `(k + parity, column)` given the decoded systematic column
    /// and a lookup for the piggyback sources.
    fn parity_cell<'c>(
        &self,
        parity: usize,
        column: usize,
        column_cells: &[&[u8]],
        mut source: impl FnMut(Source) -> &'c [u8],
    ) -> Vec<u8> {
        let mut out = vec![0u8; self.block_size];
        self.matrix.parity_block_into(parity, column_cells, &mut out);
        for &s in self.plan.sources_at(Slot::new(column, parity)) {
            gf::xor_into(&mut out, source(s));
        }
        out
    }

    pub fn encode_stripe(&self, message: &[u8]) -> Result<Stripe> {
        let expected = self.stripe_data_len();
        if message.len() != expected {
            return Err(Error::LengthMismatch { expected, actual: message.len() });
        }
        let (k, r) = (self.params.k(), self.params.r());
        let mut stripe = Stripe::zeroed(self.params, self.block_size);
        stripe.data[..expected].copy_from_slice(message);

        let mut parities = Vec::with_capacity(r * r);
        for i in 0..r {
            for c in 0..r {
                let column: Vec<&[u8]> = (0..k).map(|j| stripe.cell(j, c)).collect();
                parities.push(self.parity_cell(i, c, &column, |s| stripe.cell(s.node, s.instance)));
            }
        }
        for (n, cell) in parities.into_iter().enumerate() {
            stripe.cell_mut(k + n / r, n % r).copy_from_slice(&cell);
        }
        Ok(stripe)
    }

    /// Recover the message from any `k` or more reachable nodes.
    ///
    /// Columns are decoded left to right; piggybacks on a parity cell only
    /// involve earlier columns, so they are stripped before running the base
    /// decoder. The `k` lowest-numbered available nodes are read.
    pub fn decode_stripe<S: CellSource + ?Sized>(&self, source: &S, available: &[usize]) -> Result<Vec<u8>> {
        let (k, r, b) = (self.params.k(), self.params.r(), self.block_size);
        let nodes: BTreeSet<usize> = available.iter().copied().filter(|&n| n < k + r).collect();
        if nodes.len() < k {
            return Err(Error::TooManyErasures { needed: k, available: nodes.len() });
        }
        let chosen: Vec<usize> = nodes.into_iter().take(k).collect();
        let mut message = vec![0u8; k * r * b];
        let at = |node: usize, column: usize| (node * r + column) * b;

        for c in 0..r {
            let mut symbols: Vec<(usize, Vec<u8>)> = Vec::with_capacity(k);
            for &n in &chosen {
                let mut cell = source.fetch(n, c)?.into_owned();
                if cell.len() != b {
                    return Err(Error::LengthMismatch { expected: b, actual: cell.len() });
                }
                if n >= k {
                    for s in self.plan.sources_at(Slot::new(c, n - k)) {
                        let o = at(s.node, s.instance);
                        gf::xor_into(&mut cell, &message[o..o + b]);
                    }
                }
                symbols.push((n, cell));
            }
            let refs: Vec<(usize, &[u8])> = symbols.iter().map(|(n, v)| (*n, &v[..])).collect();
            let column = self.matrix.decode_blocks(&refs)?;
            for (j, cell) in column.iter().enumerate() {
                let o = at(j, c);
                message[o..o + b].copy_from_slice(cell);
            }
        }
        Ok(message)
    }

    /// Rebuild one node's row, dispatching on systematic versus parity.
    pub fn repair<S: CellSource + ?Sized>(&self, failed: usize, source: &S) -> Result<(Vec<u8>, TrafficReport)> {
        let k = self.params.k();
        if failed < k {
            self.repair_systematic(failed, source)
        } else {
            self.repair_parity(failed, source)
        }
    }

    /// Rebuild systematic node `failed`.
    ///
    /// Symbols that are not piggybacked, and the columns holding the
    /// piggybacks of the others, are decoded from the other `k - 1`
    /// systematic cells plus `f_1`. Each remaining symbol is then peeled out
    /// of its piggybacked parity cell using the decoded column and the other
    /// summands of that cell.
    pub fn repair_systematic<S: CellSource + ?Sized>(
        &self,
        failed: usize,
        source: &S,
    ) -> Result<(Vec<u8>, TrafficReport)> {
        let (k, r, b) = (self.params.k(), self.params.r(), self.block_size);
        if failed >= k {
            return Err(Error::InvalidInput(format!("node {failed} is not systematic")));
        }
        let mut tracker = Tracker::new(source, k + r);
        let mut row = vec![0u8; r * b];

        let mut mds_columns = BTreeSet::new();
        for c in 0..r {
            match self.plan.locate(Source::new(failed, c)) {
                Some(slot) => mds_columns.insert(slot.column),
                None => mds_columns.insert(c),
            };
        }

        let mut decoded: HashMap<usize, Vec<Vec<u8>>> = HashMap::new();
        for &c in &mds_columns {
            let mut symbols: Vec<(usize, Vec<u8>)> = Vec::with_capacity(k);
            for j in (0..k).filter(|&j| j != failed) {
                symbols.push((j, tracker.get(j, c, Phase::Mds)?.to_vec()));
            }
            symbols.push((k, tracker.get(k, c, Phase::Mds)?.to_vec()));
            let refs: Vec<(usize, &[u8])> = symbols.iter().map(|(n, v)| (*n, &v[..])).collect();
            let column = self.matrix.decode_blocks(&refs)?;
            row[c * b..(c + 1) * b].copy_from_slice(&column[failed]);
            decoded.insert(c, column);
        }

        for c in (0..r).filter(|c| !mds_columns.contains(c)) {
            let me = Source::new(failed, c);
            let slot = self.plan.locate(me).expect("non-MDS columns are piggybacked");
            let column = decoded
                .get(&slot.column)
                .ok_or_else(|| Error::InvalidPlan(format!("column {} was not decoded", slot.column)))?;
            let mut value = tracker.get(k + slot.parity, slot.column, Phase::Piggyback)?.to_vec();
            let refs: Vec<&[u8]> = column.iter().map(|v| &v[..]).collect();
            self.matrix.parity_block_into(slot.parity, &refs, &mut value);
            for &s in self.plan.sources_at(slot).iter().filter(|&&s| s != me) {
                if s.node == failed {
                    return Err(Error::InvalidPlan(format!(
                        "node {failed} appears twice in the piggyback at {slot:?}"
                    )));
                }
                gf::xor_into(&mut value, tracker.get(s.node, s.instance, Phase::Piggyback)?);
            }
            row[c * b..(c + 1) * b].copy_from_slice(&value);
        }
        Ok((row, tracker.report))
    }

    /// Rebuild parity node `failed` (`k <= failed < k + r`) by downloading all
    /// systematic cells and re-encoding.
    pub fn repair_parity<S: CellSource + ?Sized>(&self, failed: usize, source: &S) -> Result<(Vec<u8>, TrafficReport)> {
        let (k, r, b) = (self.params.k(), self.params.r(), self.block_size);
        if failed < k || failed >= k + r {
            return Err(Error::InvalidInput(format!("node {failed} is not a parity node")));
        }
        let mut tracker = Tracker::new(source, k + r);
        for j in 0..k {
            for c in 0..r {
                tracker.get(j, c, Phase::Mds)?;
            }
        }
        let cells = &tracker.cache;
        let mut row = Vec::with_capacity(r * b);
        for c in 0..r {
            let column: Vec<&[u8]> = (0..k).map(|j| &cells[&(j, c)][..]).collect();
            row.extend(self.parity_cell(failed - k, c, &column, |s| &cells[&(s.node, s.instance)][..]));
        }
        Ok((row, tracker.report))
    }
}
