//! File-backed storage: one directory per node, one shard file per directory.
//!
//! ```text
//! <root>/manifest.txt
//! <root>/node_1/data.shard      systematic node 1
//! ...
//! <root>/node_<k+r>/data.shard  last parity node
//! ```
//!
//! A shard is the node's `r * B` byte row of every stripe, concatenated in
//! stripe order with no header. Node directories are numbered from 1.

use std::collections::BTreeMap;
use std::fs;
use std::io;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use sha2::{Digest, Sha256};

use crate::codec::{CellSource, PiggybackCode, TrafficReport};
use crate::error::{Error, FetchError, Result};
use crate::gf::FIELD_POLY;
use crate::layout::{Grouping, Strategy};
use crate::mds::CodeParams;

pub const MANIFEST_FILE: &str = "manifest.txt";
pub const SHARD_FILE: &str = "data.shard";
pub const MANIFEST_VERSION: u32 = 1;

pub fn node_dir(root: &Path, node: usize) -> PathBuf {
    root.join(format!("node_{}", node + 1))
}

pub fn shard_path(root: &Path, node: usize) -> PathBuf {
    node_dir(root, node).join(SHARD_FILE)
}

/// First 64 bits of the SHA-256 digest.
pub fn shard_checksum(bytes: &[u8]) -> u64 {
    let digest = Sha256::digest(bytes);
    u64::from_be_bytes(digest[..8].try_into().expect("digest is 32 bytes"))
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Manifest {
    pub k: usize,
    pub r: usize,
    pub sizes: Vec<usize>,
    pub strategy: Strategy,
    pub block_size: usize,
    pub field_poly: u16,
    pub file_length: u64,
    pub stripes: u64,
    /// One checksum per node, indexed from 0.
    pub checksums: Vec<u64>,
}

impl Manifest {
    pub fn params(&self) -> Result<CodeParams> {
        CodeParams::new(self.k, self.r)
    }

    pub fn grouping(&self) -> Result<Grouping> {
        Grouping::new(self.sizes.clone())
    }

    pub fn code(&self) -> Result<PiggybackCode> {
        PiggybackCode::new(self.params()?, &self.grouping()?, self.strategy, self.block_size)
    }

    pub fn nodes(&self) -> usize {
        self.k + self.r
    }

    /// Expected shard length in bytes.
    pub fn shard_len(&self) -> usize {
        self.stripes as usize * self.r * self.block_size
    }

    pub fn to_text(&self) -> String {
        let sizes: Vec<String> = self.sizes.iter().map(|s| s.to_string()).collect();
        let mut out = format!(
            "version = {MANIFEST_VERSION}\nk = {}\nr = {}\nt = {}\nsizes = {}\nstrategy = {}\n\
             block_size = {}\nfield_poly = 0x{:x}\nfile_length = {}\nstripes = {}\n",
            self.k,
            self.r,
            self.sizes.len(),
            sizes.join(","),
            self.strategy,
            self.block_size,
            self.field_poly,
            self.file_length,
            self.stripes,
        );
        for (n, c) in self.checksums.iter().enumerate() {
            out.push_str(&format!("checksum.{} = {c:016x}\n", n + 1));
        }
        out
    }

    pub fn parse(text: &str, path: &Path) -> Result<Manifest> {
        let bad = |msg: String| Error::Manifest { path: path.to_path_buf(), msg };
        let mut fields = BTreeMap::new();
        for (lineno, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| bad(format!("line {}: expected `key = value`", lineno + 1)))?;
            fields.insert(key.trim().to_string(), value.trim().to_string());
        }
        let get = |key: &str| fields.get(key).ok_or_else(|| bad(format!("missing key `{key}`")));
        fn num<T: std::str::FromStr>(v: &str, key: &str, bad: &dyn Fn(String) -> Error) -> Result<T> {
            v.parse().map_err(|_| bad(format!("bad value for `{key}`: {v:?}")))
        }

        let version: u32 = num(get("version")?, "version", &bad)?;
        if version != MANIFEST_VERSION {
            return Err(bad(format!("unsupported version {version}")));
        }
        let k: usize = num(get("k")?, "k", &bad)?;
        let r: usize = num(get("r")?, "r", &bad)?;
        let t: usize = num(get("t")?, "t", &bad)?;
        let sizes = get("sizes")?
            .split(',')
            .map(|s| num(s.trim(), "sizes", &bad))
            .collect::<Result<Vec<usize>>>()?;
        if sizes.len() != t {
            return Err(bad(format!("t = {t} but {} sizes listed", sizes.len())));
        }
        let strategy: Strategy = get("strategy")?.parse().map_err(|e: Error| bad(e.to_string()))?;
        let block_size = num(get("block_size")?, "block_size", &bad)?;
        let poly = get("field_poly")?;
        let field_poly = u16::from_str_radix(poly.trim_start_matches("0x"), 16)
            .map_err(|_| bad(format!("bad field_poly {poly:?}")))?;
        if field_poly != FIELD_POLY {
            return Err(bad(format!("unsupported field polynomial 0x{field_poly:x}")));
        }
        let file_length = num(get("file_length")?, "file_length", &bad)?;
        let stripes = num(get("stripes")?, "stripes", &bad)?;
        let checksums = (1..=k + r)
            .map(|n| {
                let key = format!("checksum.{n}");
                let v = get(&key)?;
                u64::from_str_radix(v, 16).map_err(|_| bad(format!("bad value for `{key}`: {v:?}")))
            })
            .collect::<Result<Vec<u64>>>()?;

        let manifest =
            Manifest { k, r, sizes, strategy, block_size, field_poly, file_length, stripes, checksums };
        let stripe_bytes = (k * r * block_size) as u64;
        if block_size == 0 || manifest.stripes != file_length.div_ceil(stripe_bytes) {
            return Err(bad(format!("stripe count {} does not match file length {file_length}", manifest.stripes)));
        }
        manifest.code().map_err(|e| bad(e.to_string()))?;
        Ok(manifest)
    }

    pub fn read(root: &Path) -> Result<Manifest> {
        let path = root.join(MANIFEST_FILE);
        let text = fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
        Manifest::parse(&text, &path)
    }

    pub fn write(&self, root: &Path) -> Result<()> {
        let path = root.join(MANIFEST_FILE);
        fs::write(&path, self.to_text()).map_err(|e| Error::io(&path, e))
    }
}

/// Split `data` into stripes, encode each one and write the node directories
/// and manifest under `root`.
pub fn ingest(
    data: &[u8],
    params: CodeParams,
    grouping: &Grouping,
    strategy: Strategy,
    block_size: usize,
    root: &Path,
) -> Result<Manifest> {
    let code = PiggybackCode::new(params, grouping, strategy, block_size)?;
    let stripe_bytes = code.stripe_data_len();
    let stripes = data.len().div_ceil(stripe_bytes);

    let encoded = (0..stripes)
        .into_par_iter()
        .map(|s| {
            let chunk = &data[s * stripe_bytes..data.len().min((s + 1) * stripe_bytes)];
            if chunk.len() == stripe_bytes {
                code.encode_stripe(chunk)
            } else {
                let mut padded = chunk.to_vec();
                padded.resize(stripe_bytes, 0);
                code.encode_stripe(&padded)
            }
        })
        .collect::<Result<Vec<_>>>()?;

    let nodes = params.nodes();
    let shards: Vec<Vec<u8>> = (0..nodes)
        .into_par_iter()
        .map(|n| encoded.iter().flat_map(|stripe| stripe.row(n).iter().copied()).collect())
        .collect();

    fs::create_dir_all(root).map_err(|e| Error::io(root, e))?;
    let mut checksums = Vec::with_capacity(nodes);
    for (n, shard) in shards.iter().enumerate() {
        write_shard(root, n, shard)?;
        checksums.push(shard_checksum(shard));
    }
    let manifest = Manifest {
        k: params.k(),
        r: params.r(),
        sizes: grouping.sizes().to_vec(),
        strategy,
        block_size,
        field_poly: FIELD_POLY,
        file_length: data.len() as u64,
        stripes: stripes as u64,
        checksums,
    };
    manifest.write(root)?;
    Ok(manifest)
}

fn write_shard(root: &Path, node: usize, bytes: &[u8]) -> Result<()> {
    let dir = node_dir(root, node);
    fs::create_dir_all(&dir).map_err(|e| Error::io(&dir, e))?;
    let path = dir.join(SHARD_FILE);
    fs::write(&path, bytes).map_err(|e| Error::io(&path, e))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ShardState {
    Intact,
    Missing,
    WrongLength,
    ChecksumMismatch,
}

/// Shards read from disk; damaged ones are treated as absent.
pub struct ShardSet {
    pub states: Vec<ShardState>,
    shards: Vec<Option<Vec<u8>>>,
    row_len: usize,
    block_size: usize,
}

impl ShardSet {
    pub fn load(root: &Path, manifest: &Manifest) -> Result<ShardSet> {
        let mut states = Vec::with_capacity(manifest.nodes());
        let mut shards = Vec::with_capacity(manifest.nodes());
        for n in 0..manifest.nodes() {
            let path = shard_path(root, n);
            let (state, shard) = match fs::read(&path) {
                Err(e) if e.kind() == io::ErrorKind::NotFound => (ShardState::Missing, None),
                Err(e) => return Err(Error::io(&path, e)),
                Ok(bytes) if bytes.len() != manifest.shard_len() => (ShardState::WrongLength, None),
                Ok(bytes) if shard_checksum(&bytes) != manifest.checksums[n] => {
                    (ShardState::ChecksumMismatch, None)
                }
                Ok(bytes) => (ShardState::Intact, Some(bytes)),
            };
            states.push(state);
            shards.push(shard);
        }
        Ok(ShardSet { states, shards, row_len: manifest.r * manifest.block_size, block_size: manifest.block_size })
    }

    pub fn available(&self) -> Vec<usize> {
        (0..self.shards.len()).filter(|&n| self.shards[n].is_some()).collect()
    }

    pub fn unavailable(&self) -> Vec<usize> {
        (0..self.shards.len()).filter(|&n| self.shards[n].is_none()).collect()
    }

    fn row(&self, node: usize, stripe: usize) -> Option<&[u8]> {
        self.shards[node].as_deref().map(|s| &s[stripe * self.row_len..(stripe + 1) * self.row_len])
    }

    pub fn stripe(&self, stripe: usize) -> StripeCells<'_> {
        StripeCells { set: self, stripe }
    }
}

/// Cells of one stripe read out of a [`ShardSet`].
pub struct StripeCells<'a> {
    set: &'a ShardSet,
    stripe: usize,
}

impl CellSource for StripeCells<'_> {
    fn fetch(&self, node: usize, column: usize) -> Result<std::borrow::Cow<'_, [u8]>, FetchError> {
        let b = self.set.block_size;
        let row = (node < self.set.shards.len())
            .then(|| self.set.row(node, self.stripe))
            .flatten()
            .ok_or_else(|| FetchError { node, column, reason: "shard unavailable".into() })?;
        row.get(column * b..(column + 1) * b)
            .map(std::borrow::Cow::Borrowed)
            .ok_or_else(|| FetchError { node, column, reason: "no such column".into() })
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Reassembly {
    pub data: Vec<u8>,
    /// True when every systematic shard was intact and nothing was decoded.
    pub fast_path: bool,
    pub unavailable: Vec<usize>,
}

/// Rebuild the original file from whatever node directories are intact.
pub fn reassemble(root: &Path) -> Result<Reassembly> {
    let manifest = Manifest::read(root)?;
    let code = manifest.code()?;
    let set = ShardSet::load(root, &manifest)?;
    let available = set.available();
    let k = manifest.k;
    if available.len() < k {
        return Err(Error::Unrecoverable { needed: k, available: available.len() });
    }
    let stripes = manifest.stripes as usize;
    let fast_path = (0..k).all(|n| set.shards[n].is_some());

    let mut data = if fast_path {
        let mut out = Vec::with_capacity(stripes * code.stripe_data_len());
        for s in 0..stripes {
            for n in 0..k {
                out.extend_from_slice(set.row(n, s).expect("systematic shard present"));
            }
        }
        out
    } else {
        let decoded = (0..stripes)
            .into_par_iter()
            .map(|s| code.decode_stripe(&set.stripe(s), &available))
            .collect::<Result<Vec<_>>>()?;
        decoded.concat()
    };
    data.truncate(manifest.file_length as usize);
    Ok(Reassembly { data, fast_path, unavailable: set.unavailable() })
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RepairOutcome {
    pub node: usize,
    pub stripes: u64,
    /// Cells downloaded for each stripe.
    pub per_stripe: Vec<usize>,
    pub traffic: TrafficReport,
}

/// Rebuild the shard of `failed` (0-based) from the other `k + r - 1` nodes.
pub fn repair_node_dir(root: &Path, failed: usize) -> Result<RepairOutcome> {
    let manifest = Manifest::read(root)?;
    if failed >= manifest.nodes() {
        return Err(Error::InvalidInput(format!(
            "node {} does not exist; the code has {} nodes",
            failed + 1,
            manifest.nodes()
        )));
    }
    let code = manifest.code()?;
    let set = ShardSet::load(root, &manifest)?;
    let others_missing = set.unavailable().into_iter().filter(|&n| n != failed).count();
    if others_missing > 0 {
        return Err(Error::UseReassemble(others_missing + 1));
    }

    let repaired = (0..manifest.stripes as usize)
        .into_par_iter()
        .map(|s| code.repair(failed, &set.stripe(s)))
        .collect::<Result<Vec<_>>>()?;

    let mut traffic = TrafficReport::new(manifest.nodes());
    let mut per_stripe = Vec::with_capacity(repaired.len());
    let mut shard = Vec::with_capacity(manifest.shard_len());
    for (row, report) in &repaired {
        shard.extend_from_slice(row);
        per_stripe.push(report.downloaded_cells);
        traffic += report;
    }
    if shard_checksum(&shard) != manifest.checksums[failed] {
        return Err(Error::InvariantMismatch(format!(
            "repaired shard of node {} does not match the manifest checksum",
            failed + 1
        )));
    }
    write_shard(root, failed, &shard)?;
    Ok(RepairOutcome { node: failed, stripes: manifest.stripes, per_stripe, traffic })
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct VerifyReport {
    pub states: Vec<ShardState>,
    /// Stripes whose stored parities disagree with a re-encode of the
    /// systematic rows. Empty when not checked.
    pub inconsistent_stripes: Vec<usize>,
    pub parity_checked: bool,
}

impl VerifyReport {
    pub fn passed(&self) -> bool {
        self.states.iter().all(|s| *s == ShardState::Intact) && self.parity_checked && self.inconsistent_stripes.is_empty()
    }
}

/// Check every shard against the manifest and, when the systematic shards are
/// intact, re-encode each stripe and compare the stored parities.
pub fn verify(root: &Path) -> Result<VerifyReport> {
    let manifest = Manifest::read(root)?;
    let code = manifest.code()?;
    let set = ShardSet::load(root, &manifest)?;
    let k = manifest.k;
    let parity_checked = (0..k).all(|n| set.shards[n].is_some());
    let mut inconsistent_stripes = Vec::new();
    if parity_checked {
        inconsistent_stripes = (0..manifest.stripes as usize)
            .into_par_iter()
            .map(|s| -> Result<Option<usize>> {
                let message: Vec<u8> = (0..k).flat_map(|n| set.row(n, s).unwrap().iter().copied()).collect();
                let stripe = code.encode_stripe(&message)?;
                let consistent = (k..manifest.nodes()).all(|n| set.row(n, s).is_none_or(|row| row == stripe.row(n)));
                Ok((!consistent).then_some(s))
            })
            .collect::<Result<Vec<_>>>()?
            .into_iter()
            .flatten()
            .collect();
    }
    Ok(VerifyReport { states: set.states, inconsistent_stripes, parity_checked })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{rngs::StdRng, RngCore, SeedableRng};

    fn random_bytes(n: usize, seed: u64) -> Vec<u8> {
        let mut v = vec![0; n];
        StdRng::seed_from_u64(seed).fill_bytes(&mut v);
        v
    }

    fn eleven_six() -> (CodeParams, Grouping) {
        (CodeParams::new(6, 5).unwrap(), Grouping::equal(6, 3).unwrap())
    }

    #[test]
    fn empty_file() {
        let dir = tempfile::tempdir().unwrap();
        let (p, g) = eleven_six();
        let m = ingest(&[], p, &g, Strategy::Baseline, 16, dir.path()).unwrap();
        assert_eq!(m.stripes, 0);
        assert_eq!(fs::metadata(shard_path(dir.path(), 10)).unwrap().len(), 0);
        let back = reassemble(dir.path()).unwrap();
        assert!(back.data.is_empty());
    }

    #[test]
    fn exact_single_stripe() {
        let dir = tempfile::tempdir().unwrap();
        let (p, g) = eleven_six();
        let b = 32;
        let data = random_bytes(6 * 5 * b, 1);
        let m = ingest(&data, p, &g, Strategy::Even, b, dir.path()).unwrap();
        assert_eq!(m.stripes, 1);
        for n in 0..11 {
            assert_eq!(fs::metadata(shard_path(dir.path(), n)).unwrap().len(), (5 * b) as u64);
        }
        let back = reassemble(dir.path()).unwrap();
        assert!(back.fast_path);
        assert_eq!(back.data, data);
    }

    #[test]
    fn manifest_round_trip_and_format() {
        let dir = tempfile::tempdir().unwrap();
        let (p, g) = eleven_six();
        let m = ingest(&random_bytes(1000, 2), p, &g, Strategy::Baseline, 8, dir.path()).unwrap();
        let text = fs::read_to_string(dir.path().join(MANIFEST_FILE)).unwrap();
        assert!(text.starts_with("version = 1\nk = 6\nr = 5\nt = 3\nsizes = 2,2,2\nstrategy = baseline\n"));
        assert!(text.contains("field_poly = 0x11d\nfile_length = 1000\nstripes = 5\n"));
        assert!(text.contains("\nchecksum.11 = "));
        assert_eq!(Manifest::read(dir.path()).unwrap(), m);

        let broken = text.replace("stripes = 5", "stripes = 4");
        assert!(matches!(Manifest::parse(&broken, Path::new("x")), Err(Error::Manifest { .. })));
        let broken = text.replace("field_poly = 0x11d", "field_poly = 0x11b");
        assert!(Manifest::parse(&broken, Path::new("x")).is_err());
        let broken = text.replace("sizes = 2,2,2", "sizes = 2,2");
        assert!(Manifest::parse(&broken, Path::new("x")).is_err());
    }

    #[test]
    fn decode_path_with_missing_nodes() {
        let dir = tempfile::tempdir().unwrap();
        let (p, g) = eleven_six();
        let data = random_bytes(5000, 3);
        ingest(&data, p, &g, Strategy::Even, 16, dir.path()).unwrap();
        for n in [0, 3, 7, 9, 10] {
            fs::remove_dir_all(node_dir(dir.path(), n)).unwrap();
        }
        let back = reassemble(dir.path()).unwrap();
        assert!(!back.fast_path);
        assert_eq!(back.data, data);

        fs::remove_dir_all(node_dir(dir.path(), 1)).unwrap();
        assert!(matches!(reassemble(dir.path()), Err(Error::Unrecoverable { needed: 6, available: 5 })));
    }

    #[test]
    fn corrupt_shard_counts_as_missing() {
        let dir = tempfile::tempdir().unwrap();
        let (p, g) = eleven_six();
        let data = random_bytes(3000, 4);
        ingest(&data, p, &g, Strategy::Baseline, 16, dir.path()).unwrap();
        let path = shard_path(dir.path(), 2);
        let mut bytes = fs::read(&path).unwrap();
        bytes[7] ^= 0xFF;
        fs::write(&path, bytes).unwrap();

        let report = verify(dir.path()).unwrap();
        assert_eq!(report.states[2], ShardState::ChecksumMismatch);
        assert!(!report.passed());

        let back = reassemble(dir.path()).unwrap();
        assert_eq!(back.data, data);
        assert_eq!(back.unavailable, vec![2]);

        let outcome = repair_node_dir(dir.path(), 2).unwrap();
        assert_eq!(outcome.per_stripe.iter().sum::<usize>(), outcome.traffic.downloaded_cells);
        assert!(verify(dir.path()).unwrap().passed());
    }

    #[test]
    fn repair_aggregates_traffic() {
        let dir = tempfile::tempdir().unwrap();
        let (p, g) = eleven_six();
        let b = 4;
        // 10 stripes exactly
        let data = random_bytes(10 * 6 * 5 * b, 5);
        let m = ingest(&data, p, &g, Strategy::Baseline, b, dir.path()).unwrap();
        assert_eq!(m.stripes, 10);
        let original = fs::read(shard_path(dir.path(), 0)).unwrap();
        fs::remove_dir_all(node_dir(dir.path(), 0)).unwrap();
        let outcome = repair_node_dir(dir.path(), 0).unwrap();
        assert_eq!(outcome.traffic.downloaded_cells, 140);
        assert_eq!(fs::read(shard_path(dir.path(), 0)).unwrap(), original);

        fs::remove_dir_all(node_dir(dir.path(), 8)).unwrap();
        let outcome = repair_node_dir(dir.path(), 8).unwrap();
        assert_eq!(outcome.traffic.downloaded_cells, 300);
    }

    #[test]
    fn repair_refuses_double_failure() {
        let dir = tempfile::tempdir().unwrap();
        let (p, g) = eleven_six();
        ingest(&random_bytes(500, 6), p, &g, Strategy::Even, 8, dir.path()).unwrap();
        fs::remove_dir_all(node_dir(dir.path(), 0)).unwrap();
        fs::remove_dir_all(node_dir(dir.path(), 6)).unwrap();
        assert!(matches!(repair_node_dir(dir.path(), 0), Err(Error::UseReassemble(2))));
        assert!(matches!(repair_node_dir(dir.path(), 11), Err(Error::InvalidInput(_))));
    }

    #[test]
    fn verify_detects_inconsistent_parity() {
        let dir = tempfile::tempdir().unwrap();
        let (p, g) = eleven_six();
        ingest(&random_bytes(2000, 7), p, &g, Strategy::Even, 8, dir.path()).unwrap();
        assert!(verify(dir.path()).unwrap().passed());

        // rewrite a parity shard and its manifest checksum together
        let mut m = Manifest::read(dir.path()).unwrap();
        let path = shard_path(dir.path(), 9);
        let mut bytes = fs::read(&path).unwrap();
        bytes[0] ^= 1;
        m.checksums[9] = shard_checksum(&bytes);
        fs::write(&path, bytes).unwrap();
        m.write(dir.path()).unwrap();
        let report = verify(dir.path()).unwrap();
        assert_eq!(report.inconsistent_stripes, vec![0]);
        assert!(!report.passed());
    }
}
