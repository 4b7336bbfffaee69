//! File formats: fvecs/ivecs/bvecs vector files, the MCI1 index format,
//! the MCIW workload format, and the MCIF feature sidecar.
//!
//! All integers are little-endian. Parse failures report the byte offset
//! where decoding stopped; index loading re-validates structure through
//! the same named checks used after construction.
//!
//! MCI1 persists only live content. Saving an index that still carries
//! deleted nodes is refused because node ids in the file must be dense
//! and aligned with the dataset rows; run compaction first. Cliques
//! retired by updates are silently dropped and clique ids renumbered.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::bits::Bitmap;
use crate::build::CliqueIndex;
use crate::dataset::{Dataset, Features};
use crate::error::{Error, Result};
use crate::eval::{Workload, WorkloadKind};
use crate::predicate::{Predicate, Query};

const INDEX_MAGIC: &[u8; 4] = b"MCI1";
const WORKLOAD_MAGIC: &[u8; 4] = b"MCIW";
const FEATURES_MAGIC: &[u8; 4] = b"MCIF";

/// Byte-slice cursor tracking the absolute offset for error reports.
struct Cur<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Cur<'a> {
    fn new(buf: &'a [u8]) -> Self {
        Cur { buf, pos: 0 }
    }

    fn take(&mut self, len: usize, what: &str) -> Result<&'a [u8]> {
        if self.pos + len > self.buf.len() {
            return Err(Error::Parse {
                offset: self.pos as u64,
                reason: format!("unexpected end of file reading {what}"),
            });
        }
        let s = &self.buf[self.pos..self.pos + len];
        self.pos += len;
        Ok(s)
    }

    fn u32(&mut self, what: &str) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4, what)?.try_into().unwrap()))
    }

    fn i32(&mut self, what: &str) -> Result<i32> {
        Ok(i32::from_le_bytes(self.take(4, what)?.try_into().unwrap()))
    }

    fn u64(&mut self, what: &str) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8, what)?.try_into().unwrap()))
    }

    fn f32(&mut self, what: &str) -> Result<f32> {
        Ok(f32::from_le_bytes(self.take(4, what)?.try_into().unwrap()))
    }

    fn f64(&mut self, what: &str) -> Result<f64> {
        Ok(f64::from_le_bytes(self.take(8, what)?.try_into().unwrap()))
    }

    fn done(&self, what: &str) -> Result<()> {
        if self.pos != self.buf.len() {
            return Err(Error::Parse {
                offset: self.pos as u64,
                reason: format!("{} trailing bytes after {what}", self.buf.len() - self.pos),
            });
        }
        Ok(())
    }
}

fn read_file(path: &Path) -> Result<Vec<u8>> {
    Ok(fs::read(path)?)
}

// ---------------------------------------------------------------- vecs files

/// fvecs: repeated records of a little-endian i32 dimension followed by
/// that many f32 values; every record must share one dimension.
pub fn read_fvecs(path: &Path) -> Result<Dataset> {
    let buf = read_file(path)?;
    let mut cur = Cur::new(&buf);
    let mut dim = 0usize;
    let mut vectors: Vec<f32> = Vec::new();
    while cur.pos < buf.len() {
        let rec_off = cur.pos as u64;
        let d = cur.i32("record dimension")?;
        if d <= 0 {
            return Err(Error::Parse {
                offset: rec_off,
                reason: format!("non-positive record dimension {d}"),
            });
        }
        let d = d as usize;
        if dim == 0 {
            dim = d;
        } else if d != dim {
            return Err(Error::Parse {
                offset: rec_off,
                reason: format!("record dimension {d} differs from first record {dim}"),
            });
        }
        for _ in 0..d {
            vectors.push(cur.f32("vector element")?);
        }
    }
    if dim == 0 {
        return Err(Error::Parse { offset: 0, reason: "empty fvecs file".into() });
    }
    Dataset::new(vectors, dim)
}

pub fn write_fvecs(dataset: &Dataset, path: &Path) -> Result<()> {
    let dim = dataset.dim();
    let mut buf = Vec::with_capacity(dataset.n() * (4 + 4 * dim));
    for i in 0..dataset.n() as u32 {
        buf.extend_from_slice(&(dim as i32).to_le_bytes());
        for &x in dataset.vector(i) {
            buf.extend_from_slice(&x.to_le_bytes());
        }
    }
    fs::write(path, buf)?;
    Ok(())
}

/// ivecs: same record layout with i32 payloads (ground-truth id lists);
/// records may differ in length here, matching common benchmark files.
pub fn read_ivecs(path: &Path) -> Result<Vec<Vec<i32>>> {
    let buf = read_file(path)?;
    let mut cur = Cur::new(&buf);
    let mut rows = Vec::new();
    while cur.pos < buf.len() {
        let rec_off = cur.pos as u64;
        let d = cur.i32("record length")?;
        if d < 0 {
            return Err(Error::Parse {
                offset: rec_off,
                reason: format!("negative record length {d}"),
            });
        }
        let mut row = Vec::with_capacity(d as usize);
        for _ in 0..d {
            row.push(cur.i32("id element")?);
        }
        rows.push(row);
    }
    Ok(rows)
}

pub fn write_ivecs(rows: &[Vec<i32>], path: &Path) -> Result<()> {
    let mut buf = Vec::new();
    for row in rows {
        buf.extend_from_slice(&(row.len() as i32).to_le_bytes());
        for &x in row {
            buf.extend_from_slice(&x.to_le_bytes());
        }
    }
    fs::write(path, buf)?;
    Ok(())
}

/// bvecs: i32 dimension followed by u8 elements; widened to f32.
pub fn read_bvecs(path: &Path) -> Result<Dataset> {
    let buf = read_file(path)?;
    let mut cur = Cur::new(&buf);
    let mut dim = 0usize;
    let mut vectors: Vec<f32> = Vec::new();
    while cur.pos < buf.len() {
        let rec_off = cur.pos as u64;
        let d = cur.i32("record dimension")?;
        if d <= 0 {
            return Err(Error::Parse {
                offset: rec_off,
                reason: format!("non-positive record dimension {d}"),
            });
        }
        let d = d as usize;
        if dim == 0 {
            dim = d;
        } else if d != dim {
            return Err(Error::Parse {
                offset: rec_off,
                reason: format!("record dimension {d} differs from first record {dim}"),
            });
        }
        let bytes = cur.take(d, "byte elements")?;
        vectors.extend(bytes.iter().map(|&b| b as f32));
    }
    if dim == 0 {
        return Err(Error::Parse { offset: 0, reason: "empty bvecs file".into() });
    }
    Dataset::new(vectors, dim)
}

// ---------------------------------------------------------------- MCI1 index

fn bitmap_words_bytes(bits: &Bitmap) -> Vec<u8> {
    let mut out = Vec::with_capacity(bits.words().len() * 8);
    for &w in bits.words() {
        out.extend_from_slice(&w.to_le_bytes());
    }
    out
}

/// Serialize the live portion of the index.
///
/// Layout: magic, u32 n / k' / tau / clique_count, u64 total_members,
/// u64 offsets[cc+1], u32 members[total], u64 kind bitset words
/// (bit set = pseudo-clique), u64 node_to_cliques offsets[n+1],
/// u32 node_to_cliques pool.
pub fn save_index(index: &CliqueIndex, path: &Path) -> Result<()> {
    fs::write(path, encode_index(index)?)?;
    Ok(())
}

fn encode_index(index: &CliqueIndex) -> Result<Vec<u8>> {
    if index.dead_nodes().any() {
        return Err(Error::validation(
            "dead-nodes",
            "index holds deleted nodes; compact before saving",
        ));
    }
    let n = index.n();
    // Dead cliques compact away; surviving cliques renumber in order.
    let mut keep: Vec<u32> = Vec::new();
    for cid in 0..index.clique_count() as u32 {
        if !index.is_dead_clique(cid) {
            keep.push(cid);
        }
    }
    let cc = keep.len();
    let total: u64 = keep.iter().map(|&c| index.live_size(c) as u64).sum();

    let mut buf = Vec::with_capacity(32 + 8 * (cc + 1) + 4 * total as usize);
    buf.extend_from_slice(INDEX_MAGIC);
    buf.extend_from_slice(&(n as u32).to_le_bytes());
    buf.extend_from_slice(&index.k_prime().to_le_bytes());
    buf.extend_from_slice(&index.tau().to_le_bytes());
    buf.extend_from_slice(&(cc as u32).to_le_bytes());
    buf.extend_from_slice(&total.to_le_bytes());

    let mut off = 0u64;
    buf.extend_from_slice(&off.to_le_bytes());
    for &c in &keep {
        off += index.live_size(c) as u64;
        buf.extend_from_slice(&off.to_le_bytes());
    }
    for &c in &keep {
        for m in index.live_members(c) {
            buf.extend_from_slice(&m.to_le_bytes());
        }
    }
    let mut kinds = Bitmap::new(cc);
    for (new_cid, &c) in keep.iter().enumerate() {
        if index.kind(c) == crate::build::CliqueKind::Pseudo {
            kinds.set(new_cid);
        }
    }
    buf.extend_from_slice(&bitmap_words_bytes(&kinds));

    // Inverted index over the renumbered cliques, rebuilt so ids stay
    // ascending per node.
    let mut n2c: Vec<Vec<u32>> = vec![Vec::new(); n];
    for (new_cid, &c) in keep.iter().enumerate() {
        for m in index.live_members(c) {
            n2c[m as usize].push(new_cid as u32);
        }
    }
    let mut o = 0u64;
    buf.extend_from_slice(&o.to_le_bytes());
    for list in &n2c {
        o += list.len() as u64;
        buf.extend_from_slice(&o.to_le_bytes());
    }
    for list in &n2c {
        for &c in list {
            buf.extend_from_slice(&c.to_le_bytes());
        }
    }
    Ok(buf)
}

pub fn load_index(path: &Path) -> Result<CliqueIndex> {
    let buf = read_file(path)?;
    decode_index(&buf)
}

fn decode_index(buf: &[u8]) -> Result<CliqueIndex> {
    let mut cur = Cur::new(buf);
    let magic = cur.take(4, "magic")?;
    if magic != INDEX_MAGIC {
        return Err(Error::validation("magic", format!("bad magic bytes {magic:02x?}")));
    }
    let n = cur.u32("n")? as usize;
    let k_prime = cur.u32("k_prime")?;
    let tau = cur.u32("tau")?;
    let cc = cur.u32("clique_count")? as usize;
    let total = cur.u64("total_members")?;
    if n == 0 || k_prime == 0 || tau == 0 {
        return Err(Error::validation(
            "header-sanity",
            format!("degenerate header: n {n}, k' {k_prime}, tau {tau}"),
        ));
    }

    let mut offsets = Vec::with_capacity(cc + 1);
    for _ in 0..=cc {
        offsets.push(cur.u64("clique offset")?);
    }
    if offsets[cc] != total {
        return Err(Error::validation(
            "header-sanity",
            format!("final offset {} does not match total_members {total}", offsets[cc]),
        ));
    }
    let mut members = Vec::with_capacity(total as usize);
    for _ in 0..total {
        members.push(cur.u32("clique member")?);
    }
    let kind_words = cc.div_ceil(64);
    let mut words = Vec::with_capacity(kind_words);
    for _ in 0..kind_words {
        words.push(cur.u64("kind bitset word")?);
    }
    let pseudo = Bitmap::from_words(words, cc).ok_or_else(|| {
        Error::validation("header-sanity", "kind bitset has stray bits past the clique count")
    })?;

    let mut n2c_offsets = Vec::with_capacity(n + 1);
    for _ in 0..=n {
        n2c_offsets.push(cur.u64("inverted-index offset")?);
    }
    let pool_len = n2c_offsets[n];
    let mut pool = Vec::with_capacity(pool_len as usize);
    for _ in 0..pool_len {
        pool.push(cur.u32("inverted-index entry")?);
    }
    cur.done("index payload")?;

    let mut node_to_cliques: Vec<Vec<u32>> = Vec::with_capacity(n);
    for i in 0..n {
        let (a, b) = (n2c_offsets[i], n2c_offsets[i + 1]);
        if a > b || b > pool_len {
            return Err(Error::validation(
                "header-sanity",
                format!("inverted-index offsets not monotone at node {i}"),
            ));
        }
        node_to_cliques.push(pool[a as usize..b as usize].to_vec());
    }

    let live_sizes: Vec<u32> = (0..cc)
        .map(|c| {
            let (a, b) = (offsets[c], offsets[c + 1]);
            b.checked_sub(a).map(|s| s as u32).ok_or_else(|| {
                Error::validation(
                    "offsets",
                    format!("clique offsets not monotone at clique {c}"),
                )
            })
        })
        .collect::<Result<_>>()?;

    let index = CliqueIndex::from_parts(
        n,
        k_prime,
        tau,
        offsets,
        members,
        pseudo,
        live_sizes,
        node_to_cliques,
    );
    index.validate_structure()?;
    Ok(index)
}

// ------------------------------------------------------------- MCIW workload

/// JSON-friendly predicate descriptor; external-mask predicates have no
/// stable serial form and are rejected.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "kebab-case")]
enum PredDescriptor {
    True,
    Range { lo: f64, hi: f64 },
    Label { label: u32 },
    LabelSubset { labels: Vec<u32> },
}

impl PredDescriptor {
    fn from_predicate(p: &Predicate) -> Result<Self> {
        Ok(match p {
            Predicate::AlwaysTrue => PredDescriptor::True,
            Predicate::ScalarRange { lo, hi } => PredDescriptor::Range { lo: *lo, hi: *hi },
            Predicate::LabelMatch { label } => PredDescriptor::Label { label: *label },
            Predicate::LabelSubset { labels } => {
                PredDescriptor::LabelSubset { labels: labels.clone() }
            }
            Predicate::ExternalMask { .. } => {
                return Err(Error::PredicateType(
                    "external-mask predicates cannot be written to a workload file".into(),
                ))
            }
        })
    }

    fn into_predicate(self) -> Predicate {
        match self {
            PredDescriptor::True => Predicate::AlwaysTrue,
            PredDescriptor::Range { lo, hi } => Predicate::ScalarRange { lo, hi },
            PredDescriptor::Label { label } => Predicate::LabelMatch { label },
            PredDescriptor::LabelSubset { labels } => Predicate::LabelSubset { labels },
        }
    }
}

#[derive(Debug, Serialize, Deserialize)]
struct WorkloadHeader {
    kind: WorkloadKind,
    seed: u64,
    gt_k: usize,
    dim: usize,
    num_queries: usize,
    predicates: Vec<PredDescriptor>,
}

/// Layout: magic, u32 JSON header length, JSON header, then per query:
/// dim f32 vector values; then per query: f64 selectivity; then per
/// query: u32 ground-truth length + that many u32 ids.
pub fn save_workload(workload: &Workload, path: &Path) -> Result<()> {
    let dim = workload.queries.first().map_or(0, |q| q.vector.len());
    let header = WorkloadHeader {
        kind: workload.kind,
        seed: workload.seed,
        gt_k: workload.gt_k,
        dim,
        num_queries: workload.len(),
        predicates: workload
            .queries
            .iter()
            .map(|q| PredDescriptor::from_predicate(&q.predicate))
            .collect::<Result<_>>()?,
    };
    let header_json = serde_json::to_vec(&header)
        .map_err(|e| Error::param("workload", format!("header serialization: {e}")))?;

    let mut buf = Vec::new();
    buf.extend_from_slice(WORKLOAD_MAGIC);
    buf.extend_from_slice(&(header_json.len() as u32).to_le_bytes());
    buf.extend_from_slice(&header_json);
    for q in &workload.queries {
        if q.vector.len() != dim {
            return Err(Error::DimensionMismatch { expected: dim, got: q.vector.len() });
        }
        for &x in &q.vector {
            buf.extend_from_slice(&x.to_le_bytes());
        }
    }
    for &s in &workload.selectivities {
        buf.extend_from_slice(&s.to_le_bytes());
    }
    for gt in &workload.ground_truth {
        buf.extend_from_slice(&(gt.len() as u32).to_le_bytes());
        for &id in gt {
            buf.extend_from_slice(&id.to_le_bytes());
        }
    }
    fs::write(path, buf)?;
    Ok(())
}

pub fn load_workload(path: &Path) -> Result<Workload> {
    let buf = read_file(path)?;
    let mut cur = Cur::new(&buf);
    let magic = cur.take(4, "magic")?;
    if magic != WORKLOAD_MAGIC {
        return Err(Error::Parse {
            offset: 0,
            reason: format!("bad workload magic {magic:02x?}"),
        });
    }
    let hlen = cur.u32("header length")? as usize;
    let hoff = cur.pos as u64;
    let hjson = cur.take(hlen, "JSON header")?;
    let header: WorkloadHeader = serde_json::from_slice(hjson).map_err(|e| Error::Parse {
        offset: hoff,
        reason: format!("header JSON: {e}"),
    })?;
    if header.predicates.len() != header.num_queries {
        return Err(Error::Parse {
            offset: hoff,
            reason: "predicate count differs from query count".into(),
        });
    }

    let mut queries = Vec::with_capacity(header.num_queries);
    for desc in header.predicates.iter().cloned() {
        let mut v = Vec::with_capacity(header.dim);
        for _ in 0..header.dim {
            v.push(cur.f32("query vector element")?);
        }
        queries.push(Query::new(v, desc.into_predicate()));
    }
    let mut selectivities = Vec::with_capacity(header.num_queries);
    for _ in 0..header.num_queries {
        selectivities.push(cur.f64("selectivity")?);
    }
    let mut ground_truth = Vec::with_capacity(header.num_queries);
    for _ in 0..header.num_queries {
        let len = cur.u32("ground-truth length")? as usize;
        if len > header.gt_k {
            return Err(Error::Parse {
                offset: cur.pos as u64 - 4,
                reason: format!("ground-truth length {len} exceeds gt_k {}", header.gt_k),
            });
        }
        let mut ids = Vec::with_capacity(len);
        for _ in 0..len {
            ids.push(cur.u32("ground-truth id")?);
        }
        ground_truth.push(ids);
    }
    cur.done("workload payload")?;
    Ok(Workload {
        kind: header.kind,
        queries,
        ground_truth,
        selectivities,
        gt_k: header.gt_k,
        seed: header.seed,
    })
}

// ------------------------------------------------------------- MCIF features

/// Layout: magic, u8 kind tag (0 none, 1 scalars, 2 label sets, 3 bytes),
/// u32 n, then the kind-specific payload.
pub fn save_features(dataset: &Dataset, path: &Path) -> Result<()> {
    let n = dataset.n();
    let mut buf = Vec::new();
    buf.extend_from_slice(FEATURES_MAGIC);
    match dataset.features() {
        Features::None => {
            buf.push(0);
            buf.extend_from_slice(&(n as u32).to_le_bytes());
        }
        Features::Scalars(values) => {
            buf.push(1);
            buf.extend_from_slice(&(n as u32).to_le_bytes());
            for &v in values {
                buf.extend_from_slice(&v.to_le_bytes());
            }
        }
        Features::LabelSets { offsets, labels } => {
            buf.push(2);
            buf.extend_from_slice(&(n as u32).to_le_bytes());
            for &o in offsets {
                buf.extend_from_slice(&o.to_le_bytes());
            }
            buf.extend_from_slice(&(labels.len() as u32).to_le_bytes());
            for &l in labels {
                buf.extend_from_slice(&l.to_le_bytes());
            }
        }
        Features::Bytes { offsets, bytes } => {
            buf.push(3);
            buf.extend_from_slice(&(n as u32).to_le_bytes());
            for &o in offsets {
                buf.extend_from_slice(&o.to_le_bytes());
            }
            buf.extend_from_slice(&(bytes.len() as u32).to_le_bytes());
            buf.extend_from_slice(bytes);
        }
    }
    fs::write(path, buf)?;
    Ok(())
}

pub fn load_features(path: &Path) -> Result<(usize, Features)> {
    let buf = read_file(path)?;
    let mut cur = Cur::new(&buf);
    let magic = cur.take(4, "magic")?;
    if magic != FEATURES_MAGIC {
        return Err(Error::Parse {
            offset: 0,
            reason: format!("bad features magic {magic:02x?}"),
        });
    }
    let tag = cur.take(1, "kind tag")?[0];
    let n = cur.u32("n")? as usize;
    let features = match tag {
        0 => Features::None,
        1 => {
            let mut values = Vec::with_capacity(n);
            for _ in 0..n {
                values.push(cur.f64("scalar value")?);
            }
            Features::Scalars(values)
        }
        2 => {
            let mut offsets = Vec::with_capacity(n + 1);
            for _ in 0..=n {
                offsets.push(cur.u32("label offset")?);
            }
            let len = cur.u32("label pool length")?;
            let mut labels = Vec::with_capacity(len as usize);
            for _ in 0..len {
                labels.push(cur.u32("label")?);
            }
            Features::LabelSets { offsets, labels }
        }
        3 => {
            let mut offsets = Vec::with_capacity(n + 1);
            for _ in 0..=n {
                offsets.push(cur.u32("byte offset")?);
            }
            let len = cur.u32("byte pool length")?;
            let bytes = cur.take(len as usize, "byte pool")?.to_vec();
            Features::Bytes { offsets, bytes }
        }
        other => {
            return Err(Error::Parse {
                offset: 4,
                reason: format!("unknown feature kind tag {other}"),
            })
        }
    };
    cur.done("features payload")?;
    Ok((n, features))
}
