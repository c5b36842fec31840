//! Repair-bandwidth and complexity analytics.
//!
//! All rates are exact rationals. Bandwidth is counted in cells: one cell is
//! one unit of stored data, and a stripe holds `k * r` units of original data.

use std::fmt::Write as _;

use num::integer::Roots;
use num::rational::Ratio;
use num::ToPrimitive;

use crate::error::{Error, Result};
use crate::layout::{Grouping, PiggybackPlan, Source};

pub type Rate = Ratio<u64>;

/// Largest `k` accepted by [`brute_force_optimum`].
pub const BRUTE_FORCE_MAX_K: usize = 14;
/// Largest `r` accepted by [`brute_force_optimum`].
pub const BRUTE_FORCE_MAX_R: usize = 7;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BandwidthReport {
    /// Cells downloaded to repair each systematic node.
    pub per_node: Vec<u64>,
    pub total_systematic: u64,
    pub average_systematic: Rate,
    pub gamma_systematic: Rate,
    /// Rate over all `k + r` nodes, with parities repaired by full download.
    pub gamma_all: Rate,
}

impl BandwidthReport {
    fn from_per_node(k: usize, r: usize, per_node: Vec<u64>) -> Self {
        let (k64, r64) = (k as u64, r as u64);
        let total: u64 = per_node.iter().sum();
        let average = Rate::new(total, k64);
        let gamma_systematic = average / (k64 * r64);
        let gamma_all = (gamma_systematic * k64 + r64) / (k64 + r64);
        BandwidthReport {
            per_node,
            total_systematic: total,
            average_systematic: average,
            gamma_systematic,
            gamma_all,
        }
    }
}

fn check_grouping(k: usize, r: usize, grouping: &Grouping) -> Result<()> {
    if grouping.k() != k {
        return Err(Error::InvalidPartition(format!(
            "group sizes {grouping} sum to {}, expected k = {k}",
            grouping.k()
        )));
    }
    if r < 2 || grouping.t() > r - 1 {
        return Err(Error::TooManyGroups { t: grouping.t(), max: r.saturating_sub(1) });
    }
    Ok(())
}

/// `k * l + (r - l) * s_l` for a node in group `S_l`.
pub fn group_repair_cost(k: usize, r: usize, level: usize, size: usize) -> u64 {
    (k * level + (r - level) * size) as u64
}

/// `sum_l s_l * (k * l + (r - l) * s_l)`: total systematic repair traffic of
/// the baseline placement.
pub fn total_traffic(k: usize, r: usize, sizes: &[usize]) -> u64 {
    sizes
        .iter()
        .enumerate()
        .map(|(g, &s)| s as u64 * group_repair_cost(k, r, g + 1, s))
        .sum()
}

/// Closed-form repair traffic of the baseline placement.
pub fn average_bandwidth(k: usize, r: usize, grouping: &Grouping) -> Result<BandwidthReport> {
    check_grouping(k, r, grouping)?;
    let per_node = (0..k)
        .map(|i| {
            let g = grouping.group_of(i).expect("checked");
            group_repair_cost(k, r, g + 1, grouping.size(g))
        })
        .collect();
    Ok(BandwidthReport::from_per_node(k, r, per_node))
}

/// Repair traffic read off a plan's structure: `k` cells for each column the
/// node needs decoded, plus the size of every piggyback entry holding one of
/// its symbols.
pub fn plan_bandwidth(plan: &PiggybackPlan) -> BandwidthReport {
    let (k, r) = (plan.k(), plan.r());
    let per_node = (0..k).map(|i| predicted_node_traffic(plan, i)).collect();
    BandwidthReport::from_per_node(k, r, per_node)
}

/// Predicted cells to repair `node` (systematic or parity) under `plan`.
pub fn predicted_node_traffic(plan: &PiggybackPlan, node: usize) -> u64 {
    let (k, r) = (plan.k(), plan.r());
    if node >= k {
        return (k * r) as u64;
    }
    let mut decoded = vec![false; r];
    let mut piggyback = 0;
    for c in 0..r {
        match plan.locate(Source::new(node, c)) {
            Some(slot) => {
                decoded[slot.column] = true;
                piggyback += plan.sources_at(slot).len();
            }
            None => decoded[c] = true,
        }
    }
    (decoded.iter().filter(|&&d| d).count() * k + piggyback) as u64
}

/// `(t / r + (2 - 1 / r) / t) / 2`, the rate of an equal split.
pub fn equal_split_rate(r: usize, t: usize) -> Rate {
    let (r, t) = (r as u64, t as u64);
    (Rate::new(t, r) + (Rate::from(2) - Rate::new(1, r)) / t) / 2
}

/// Rate of the equal split of `k` nodes into `t` groups; requires `t | k`.
pub fn equal_group_rate(k: usize, r: usize, t: usize) -> Result<Rate> {
    if t == 0 || r < 2 || t > r - 1 {
        return Err(Error::TooManyGroups { t, max: r.saturating_sub(1) });
    }
    if !k.is_multiple_of(t) {
        return Err(Error::FormulaRegime { k, t });
    }
    Ok(equal_split_rate(r, t))
}

/// Group count minimizing the equal-split rate: the better of the two
/// integers around `sqrt(2r - 1)`, smaller on ties. Zero when `r < 2`.
pub fn optimal_t(r: usize) -> usize {
    if r < 2 {
        return 0;
    }
    let lo = (2 * r - 1).sqrt();
    let hi = if lo * lo == 2 * r - 1 { lo } else { lo + 1 };
    [lo, hi]
        .into_iter()
        .map(|t| t.clamp(1, r - 1))
        .min_by(|&a, &b| equal_split_rate(r, a).cmp(&equal_split_rate(r, b)).then(a.cmp(&b)))
        .expect("two candidates")
}

/// Grouping used by default: equal split with [`optimal_t`] groups, capped at
/// `k`. `None` when `r < 2` (no piggybacking is possible).
pub fn default_grouping(k: usize, r: usize) -> Option<Grouping> {
    let t = optimal_t(r).min(k);
    if t == 0 {
        return None;
    }
    Grouping::equal(k, t).ok()
}

/// Exhaustive minimum of the baseline total traffic over all group counts
/// `t` in `1..=min(r - 1, k)` and all compositions of `k` into `t` parts.
/// Ties go to the lexicographically smallest size vector.
pub fn brute_force_optimum(k: usize, r: usize) -> Result<(Grouping, u64)> {
    if k > BRUTE_FORCE_MAX_K || r > BRUTE_FORCE_MAX_R {
        return Err(Error::UseHeuristic { k, r });
    }
    if k == 0 || r < 2 {
        return Err(Error::InvalidParams(format!("no piggyback grouping exists for k = {k}, r = {r}")));
    }
    let mut best: Option<(Vec<usize>, u64)> = None;
    let mut parts = Vec::new();
    for t in 1..=(r - 1).min(k) {
        compositions(k, t, &mut parts, &mut |sizes| {
            let total = total_traffic(k, r, sizes);
            let better = match &best {
                None => true,
                Some((b, bt)) => total < *bt || (total == *bt && sizes < &b[..]),
            };
            if better {
                best = Some((sizes.to_vec(), total));
            }
        });
    }
    let (sizes, total) = best.expect("t = 1 always yields a composition");
    Ok((Grouping::new(sizes)?, total))
}

fn compositions(rest: usize, parts_left: usize, prefix: &mut Vec<usize>, visit: &mut impl FnMut(&[usize])) {
    if parts_left == 1 {
        prefix.push(rest);
        visit(prefix);
        prefix.pop();
        return;
    }
    for first in 1..=rest - (parts_left - 1) {
        prefix.push(first);
        compositions(rest - first, parts_left - 1, prefix, visit);
        prefix.pop();
    }
}

/// Counts of elementary binary additions.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ComplexityModel {
    /// Bits per symbol.
    pub e: u64,
    /// Cost of one single-instance MDS repair, `k e^2 + (k - 1) e`.
    pub x: u64,
    /// `r x + (r - l) s_l e` for each systematic node.
    pub per_node_repair: Vec<u64>,
    /// Upper bound on the average repair cost over all `k + r` nodes.
    pub repair_avg_bound: Rate,
    /// `r^2 x + sum_l s_l (r - l) e`.
    pub encoding_cost: u64,
}

pub fn complexity_metrics(k: usize, r: usize, q: u64, grouping: &Grouping) -> Result<ComplexityModel> {
    if q < 2 || !q.is_power_of_two() {
        return Err(Error::InvalidParams(format!("field size q = {q} must be a power of 2")));
    }
    if ((k + r) as u64) > q {
        return Err(Error::InvalidParams(format!("field size q = {q} is smaller than k + r = {}", k + r)));
    }
    check_grouping(k, r, grouping)?;
    let e = q.trailing_zeros() as u64;
    let (k64, r64) = (k as u64, r as u64);
    let x = k64 * e * e + (k64 - 1) * e;

    let per_node_repair = (0..k)
        .map(|i| {
            let g = grouping.group_of(i).expect("checked");
            let l = g as u64 + 1;
            r64 * x + (r64 - l) * grouping.size(g) as u64 * e
        })
        .collect();
    let (mut extra, mut piggyback_adds) = (0u64, 0u64);
    for (g, &s) in grouping.sizes().iter().enumerate() {
        let (l, s) = (g as u64 + 1, s as u64);
        extra += (r64 - l) * s * (s + 1) * e;
        piggyback_adds += s * (r64 - l) * e;
    }
    Ok(ComplexityModel {
        e,
        x,
        per_node_repair,
        repair_avg_bound: Rate::from(r64 * x) + Rate::new(extra, k64 + r64),
        encoding_cost: r64 * r64 * x + piggyback_adds,
    })
}

/// One row of the code comparison.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CodeRow {
    pub code: &'static str,
    pub instances: Option<u64>,
    pub fault_tolerance: Option<u64>,
    pub gamma: Rate,
    pub avg_repair_complexity: String,
    pub encoding_complexity: String,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Comparison {
    pub k: usize,
    pub r: usize,
    pub q: u64,
    pub rows: Vec<CodeRow>,
    /// Rows left out and why.
    pub notices: Vec<String>,
}

pub const COMPARISON_COLUMNS: [&str; 6] =
    ["code", "instances", "fault_tolerance", "gamma", "avg_repair_complexity", "encoding_complexity"];

pub fn format_rate(rate: Rate) -> String {
    format!("{} ({:.4})", rate, rate_to_f64(rate))
}

pub fn rate_to_f64(rate: Rate) -> f64 {
    rate.to_f64().expect("finite rational")
}

fn format_exact(v: Rate) -> String {
    if v.is_integer() {
        v.to_integer().to_string()
    } else {
        format!("{v}")
    }
}

/// MDS, RSR, MSR and the piggyback code side by side. RSR and MSR are
/// analytic rates only.
pub fn compare_codes(k: usize, r: usize, q: u64) -> Result<Comparison> {
    if k == 0 || r < 2 {
        return Err(Error::InvalidParams(format!("comparison needs k >= 1 and r >= 2, got k = {k}, r = {r}")));
    }
    let grouping = default_grouping(k, r).expect("r >= 2");
    let bandwidth = average_bandwidth(k, r, &grouping)?;
    let cx = complexity_metrics(k, r, q, &grouping)?;
    let (k64, r64, x, e) = (k as u64, r as u64, cx.x, cx.e);

    let mut rows = vec![CodeRow {
        code: "MDS",
        instances: Some(1),
        fault_tolerance: Some(r64),
        gamma: Rate::from(1),
        avg_repair_complexity: x.to_string(),
        encoding_complexity: (r64 * x).to_string(),
    }];
    let mut notices = Vec::new();
    if r >= 3 {
        let inst = 2 * r64 - 3;
        rows.push(CodeRow {
            code: "RSR",
            instances: Some(inst),
            fault_tolerance: Some(r64),
            gamma: Rate::new(r64 - 1, inst),
            avg_repair_complexity: format!("O({})", inst * x),
            encoding_complexity: format!("<={}", inst * r64 * x + k64 * r64 * e * e + k64 * r64 * e),
        });
    } else {
        notices.push(format!("RSR row omitted: needs r >= 3, got r = {r}"));
    }
    rows.push(CodeRow {
        code: "MSR",
        instances: None,
        fault_tolerance: None,
        gamma: Rate::new(k64 + r64 - 1, r64 * k64),
        avg_repair_complexity: "n/a".into(),
        encoding_complexity: "n/a".into(),
    });
    rows.push(CodeRow {
        code: "New",
        instances: Some(r64),
        fault_tolerance: Some(r64),
        gamma: bandwidth.gamma_systematic,
        avg_repair_complexity: format_exact(cx.repair_avg_bound),
        encoding_complexity: cx.encoding_cost.to_string(),
    });
    Ok(Comparison { k, r, q, rows, notices })
}

fn opt(v: Option<u64>) -> String {
    v.map_or_else(|| "n/a".to_string(), |v| v.to_string())
}

impl Comparison {
    pub fn row(&self, code: &str) -> Option<&CodeRow> {
        self.rows.iter().find(|r| r.code == code)
    }

    pub fn to_csv(&self) -> String {
        let mut out = COMPARISON_COLUMNS.join(",");
        out.push('\n');
        for row in &self.rows {
            let fields = [
                row.code.to_string(),
                opt(row.instances),
                opt(row.fault_tolerance),
                format_rate(row.gamma),
                row.avg_repair_complexity.clone(),
                row.encoding_complexity.clone(),
            ];
            out.push_str(&fields.join(","));
            out.push('\n');
        }
        out
    }

    /// Fixed-width rendering for terminals.
    pub fn render(&self) -> String {
        let header: Vec<String> = COMPARISON_COLUMNS.iter().map(|s| s.to_string()).collect();
        let body: Vec<Vec<String>> = self
            .rows
            .iter()
            .map(|row| {
                vec![
                    row.code.to_string(),
                    opt(row.instances),
                    opt(row.fault_tolerance),
                    format_rate(row.gamma),
                    row.avg_repair_complexity.clone(),
                    row.encoding_complexity.clone(),
                ]
            })
            .collect();
        let widths: Vec<usize> = (0..header.len())
            .map(|c| body.iter().map(|r| r[c].len()).chain([header[c].len()]).max().unwrap())
            .collect();
        let mut out = String::new();
        for line in std::iter::once(&header).chain(&body) {
            let cells: Vec<String> = line.iter().zip(&widths).map(|(v, w)| format!("{v:<w$}")).collect();
            writeln!(out, "{}", cells.join("  ").trim_end()).unwrap();
        }
        for n in &self.notices {
            writeln!(out, "note: {n}").unwrap();
        }
        out
    }
}

/// One line of the rate sweep over `r`.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow {
    pub r: usize,
    pub t: usize,
    pub gamma_new: Rate,
    /// `sqrt(2r - 1) / r`.
    pub lower_bound: f64,
    /// Worse of the two integer neighbours of `sqrt(2r - 1)`.
    pub upper_envelope: f64,
}

pub fn rate_sweep(r_min: usize, r_max: usize) -> Vec<SweepRow> {
    (r_min.max(2)..=r_max)
        .map(|r| {
            let t = optimal_t(r);
            let root = ((2 * r - 1) as f64).sqrt();
            let lo = (root.floor() as usize).clamp(1, r - 1);
            let hi = (root.ceil() as usize).clamp(1, r - 1);
            let upper = equal_split_rate(r, lo).max(equal_split_rate(r, hi));
            SweepRow {
                r,
                t,
                gamma_new: equal_split_rate(r, t),
                lower_bound: root / r as f64,
                upper_envelope: rate_to_f64(upper),
            }
        })
        .collect()
}

pub const SWEEP_COLUMNS: [&str; 6] = ["r", "t", "gamma_new", "gamma_new_decimal", "sqrt_bound", "upper_envelope"];

pub fn sweep_csv(rows: &[SweepRow]) -> String {
    let mut out = SWEEP_COLUMNS.join(",");
    out.push('\n');
    for row in rows {
        writeln!(
            out,
            "{},{},{},{:.6},{:.6},{:.6}",
            row.r,
            row.t,
            row.gamma_new,
            rate_to_f64(row.gamma_new),
            row.lower_bound,
            row.upper_envelope
        )
        .unwrap();
    }
    out
}
