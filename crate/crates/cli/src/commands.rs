use std::fs;
use std::path::Path;

use piggyback_core::planner::{self, format_rate};
use piggyback_core::store::{self, ShardState};
use piggyback_core::{CodeParams, Error, Grouping, PiggybackPlan, Strategy};

pub const EXIT_USAGE: u8 = 1;
pub const EXIT_IO: u8 = 2;
pub const EXIT_UNRECOVERABLE: u8 = 3;
pub const EXIT_INVARIANT: u8 = 4;

#[derive(Debug)]
pub struct CliError {
    pub code: u8,
    pub message: String,
}

impl CliError {
    fn new(code: u8, message: impl Into<String>) -> Self {
        CliError { code, message: message.into() }
    }
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        let code = match &e {
            Error::Io { .. } | Error::Manifest { .. } => EXIT_IO,
            Error::Unrecoverable { .. }
            | Error::UseReassemble(_)
            | Error::TooManyErasures { .. }
            | Error::RepairDegraded(_) => EXIT_UNRECOVERABLE,
            Error::InvariantMismatch(_) => EXIT_INVARIANT,
            _ => EXIT_USAGE,
        };
        let mut message = e.to_string();
        if let Error::UseReassemble(_) = e {
            message.push_str("; run `piggyback reassemble` to recover the file");
        }
        CliError { code, message }
    }
}

type Result<T> = std::result::Result<T, CliError>;

fn grouping_for(k: usize, r: usize, t: Option<usize>) -> Result<Grouping> {
    if r < 2 {
        return Ok(Grouping::equal(k, 1)?);
    }
    match t {
        Some(t) => {
            if t == 0 || t > r - 1 {
                return Err(Error::TooManyGroups { t, max: r - 1 }.into());
            }
            Ok(Grouping::equal(k, t)?)
        }
        None => Ok(planner::default_grouping(k, r).expect("r >= 2")),
    }
}

pub fn plan(k: usize, r: usize, t: Option<usize>) -> Result<()> {
    let params = CodeParams::new(k, r)?;
    println!("code: k = {k}, r = {r}, n = {}", params.nodes());
    if r < 2 {
        println!("r = 1: plain MDS code, no piggybacking possible");
        println!("gamma = 1");
        return Ok(());
    }
    let grouping = grouping_for(k, r, t)?;
    grouping.check(params)?;
    println!("t = {}", grouping.t());
    println!("sizes = {grouping}");

    let even = PiggybackPlan::build(params, &grouping, Strategy::Even)?;
    let even_report = planner::plan_bandwidth(&even);
    println!("group  size  baseline_cost  even_cost");
    for g in 0..grouping.t() {
        let first = grouping.members(g).start;
        println!(
            "{:>5}  {:>4}  {:>13}  {:>9}",
            g + 1,
            grouping.size(g),
            planner::group_repair_cost(k, r, g + 1, grouping.size(g)),
            even_report.per_node[first]
        );
    }

    let baseline = planner::average_bandwidth(k, r, &grouping)?;
    println!("gamma = {}", format_rate(baseline.gamma_systematic));
    println!("gamma_all = {}", format_rate(baseline.gamma_all));
    println!("gamma_even = {}", format_rate(even_report.gamma_systematic));
    println!("gamma_even_all = {}", format_rate(even_report.gamma_all));

    match planner::brute_force_optimum(k, r) {
        Ok((best, total)) => {
            let report = planner::average_bandwidth(k, r, &best)?;
            println!(
                "optimum: sizes = {best}, total = {total}, gamma = {}",
                format_rate(report.gamma_systematic)
            );
        }
        Err(Error::UseHeuristic { .. }) => println!("optimum: skipped, k or r beyond enumeration bound"),
        Err(e) => return Err(e.into()),
    }
    Ok(())
}

pub fn encode(
    file: &Path,
    out: &Path,
    k: usize,
    r: usize,
    t: Option<usize>,
    strategy: Strategy,
    block_size: usize,
) -> Result<()> {
    let params = CodeParams::new(k, r)?;
    if block_size == 0 {
        return Err(CliError::new(EXIT_USAGE, "block size must be positive"));
    }
    let grouping = grouping_for(k, r, t)?;
    let data = fs::read(file).map_err(|e| Error::io(file, e))?;
    let manifest = store::ingest(&data, params, &grouping, strategy, block_size, out)?;
    println!(
        "encoded {} bytes into {} stripes across {} nodes (sizes = {grouping}, strategy = {strategy})",
        manifest.file_length,
        manifest.stripes,
        manifest.nodes()
    );
    Ok(())
}

pub fn repair(dir: &Path, node: usize) -> Result<()> {
    if node == 0 {
        return Err(CliError::new(EXIT_USAGE, "nodes are numbered from 1"));
    }
    let manifest = store::Manifest::read(dir)?;
    let code = manifest.code()?;
    let predicted = planner::predicted_node_traffic(code.plan(), node - 1);
    let outcome = store::repair_node_dir(dir, node - 1)?;

    let mut mismatched = 0;
    for (s, &measured) in outcome.per_stripe.iter().enumerate() {
        let flag = if measured as u64 == predicted { "" } else { "  MISMATCH" };
        if !flag.is_empty() {
            mismatched += 1;
        }
        println!("stripe {}: measured={measured} predicted={predicted}{flag}", s + 1);
    }
    let total_predicted = predicted * outcome.stripes;
    println!(
        "node {node}: measured={} predicted={total_predicted} cells over {} stripes (mds phase {}, piggyback phase {})",
        outcome.traffic.downloaded_cells, outcome.stripes, outcome.traffic.mds_phase, outcome.traffic.piggyback_phase
    );
    if mismatched > 0 {
        return Err(CliError::new(
            EXIT_INVARIANT,
            format!("{mismatched} stripes downloaded a different number of cells than predicted"),
        ));
    }
    Ok(())
}

pub fn verify(dir: &Path) -> Result<()> {
    let report = store::verify(dir)?;
    for (n, state) in report.states.iter().enumerate() {
        let label = match state {
            ShardState::Intact => "ok",
            ShardState::Missing => "missing",
            ShardState::WrongLength => "wrong length",
            ShardState::ChecksumMismatch => "checksum mismatch",
        };
        println!("node {}: {label}", n + 1);
    }
    if !report.parity_checked {
        println!("parity: not checked, a systematic shard is unavailable");
    } else if report.inconsistent_stripes.is_empty() {
        println!("parity: consistent");
    } else {
        let list: Vec<String> = report.inconsistent_stripes.iter().map(|s| (s + 1).to_string()).collect();
        println!("parity: inconsistent in stripes {}", list.join(","));
    }
    if report.passed() {
        println!("verify: PASS");
        Ok(())
    } else {
        Err(CliError::new(EXIT_INVARIANT, "verify failed"))
    }
}

pub fn reassemble(dir: &Path, out: &Path) -> Result<()> {
    let result = store::reassemble(dir)?;
    fs::write(out, &result.data).map_err(|e| Error::io(out, e))?;
    let missing: Vec<String> = result.unavailable.iter().map(|n| (n + 1).to_string()).collect();
    println!(
        "wrote {} bytes to {} ({}; unavailable nodes: {})",
        result.data.len(),
        out.display(),
        if result.fast_path { "systematic read" } else { "decoded" },
        if missing.is_empty() { "none".to_string() } else { missing.join(",") }
    );
    Ok(())
}

pub fn compare(k: usize, r: usize, q: u64, out: Option<&Path>) -> Result<()> {
    CodeParams::new(k, r)?;
    let cmp = planner::compare_codes(k, r, q)?;
    print!("{}", cmp.render());
    if let Some(path) = out {
        fs::write(path, cmp.to_csv()).map_err(|e| Error::io(path, e))?;
    }
    Ok(())
}

pub fn bench(r_min: usize, r_max: usize, out: Option<&Path>) -> Result<()> {
    if r_min < 2 || r_max < r_min {
        return Err(CliError::new(EXIT_USAGE, format!("need 2 <= r-min <= r-max, got {r_min}..{r_max}")));
    }
    let csv = planner::sweep_csv(&planner::rate_sweep(r_min, r_max));
    match out {
        Some(path) => fs::write(path, csv).map_err(|e| Error::io(path, e))?,
        None => print!("{csv}"),
    }
    Ok(())
}
