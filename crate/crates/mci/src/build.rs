//! Index construction: cover every node with maximal cliques of size >= tau,
//! mined from per-node local graphs whose edge threshold is progressively
//! relaxed (geometric densification).
//!
//! Each round processes every still-uncovered node `c`: the candidate set is
//! c's k'-NN list (minus super-centers) plus c itself, the local graph
//! connects candidates within `alpha * d_min` of each other (d_min = distance
//! from c to its closest candidate), and greedy maximal cliques are grown
//! from each uncovered candidate. After a round, alpha is multiplied by the
//! expansion ratio. Once alpha reaches alpha_max, a node whose neighborhood
//! still yields no clique stores the entire candidate set as a single
//! pseudo-clique, which guarantees termination and full coverage.

use std::sync::atomic::{AtomicU32, AtomicU64, Ordering};

use rayon::prelude::*;
use serde::Serialize;

use crate::bits::{AtomicBitmap, Bitmap};
use crate::dataset::Dataset;
use crate::distance::sq_l2;
use crate::error::{Error, Result};
use crate::knng::KnnGraph;

/// Construction parameters.
#[derive(Debug, Clone, Serialize)]
pub struct BuildParams {
    pub k_prime: usize,
    /// Minimum clique size admitted into the cover.
    pub tau: usize,
    /// Initial edge-threshold ratio.
    pub alpha0: f64,
    /// Per-round multiplier on alpha.
    pub alpha_expansion: f64,
    /// Ratio at or beyond which the pseudo-clique fallback arms.
    pub alpha_max: f64,
    /// A node already in more than `supercenter_fraction * n` cliques is
    /// excluded from further candidate sets (hub suppression).
    pub supercenter_fraction: f64,
}

impl Default for BuildParams {
    fn default() -> Self {
        BuildParams {
            k_prime: 200,
            tau: 50,
            alpha0: 1.2,
            alpha_expansion: 2.0,
            alpha_max: 10.0,
            supercenter_fraction: 0.01,
        }
    }
}

impl BuildParams {
    pub fn validate(&self) -> Result<()> {
        if self.alpha0.is_nan() || self.alpha0 <= 1.0 {
            return Err(Error::param("alpha0", "must be > 1"));
        }
        if self.alpha_expansion.is_nan() || self.alpha_expansion <= 1.0 {
            return Err(Error::param("alpha_expansion", "must be > 1"));
        }
        if self.alpha_max.is_nan() || self.alpha_max < self.alpha0 {
            return Err(Error::param("alpha_max", "must be >= alpha0"));
        }
        if self.tau < 2 {
            return Err(Error::param("tau", "must be >= 2"));
        }
        if self.k_prime < self.tau - 1 {
            return Err(Error::param("k_prime", "must be >= tau - 1"));
        }
        if !(self.supercenter_fraction > 0.0 && self.supercenter_fraction <= 1.0) {
            return Err(Error::param("supercenter_fraction", "must be in (0, 1]"));
        }
        Ok(())
    }

    /// Upper bound on densification rounds.
    pub fn max_rounds(&self) -> usize {
        ((self.alpha_max / self.alpha0).log(self.alpha_expansion)).ceil() as usize + 2
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CliqueKind {
    /// Pairwise-complete under the recorded threshold.
    Mined,
    /// Whole candidate set stored as a connectivity bridge; no pairwise
    /// guarantee.
    Pseudo,
}

/// Per-clique provenance, kept in memory for audits and golden tests.
#[derive(Debug, Clone)]
pub struct CliqueAudit {
    pub center: u32,
    pub round: u32,
    pub alpha: f64,
    /// True-distance edge threshold `alpha * d_min` of the local graph the
    /// clique was mined from (also recorded for pseudo-cliques).
    pub threshold: f64,
    /// The candidate set V' the local graph was built over.
    pub candidates: Vec<u32>,
}

#[derive(Debug, Clone, Serialize)]
pub struct RoundStat {
    pub alpha: f64,
    pub uncovered_before: usize,
    pub uncovered_after: usize,
}

/// Construction trace. Not persisted in the index file; the CLI serializes
/// the serializable parts to a JSON sidecar.
#[derive(Debug, Clone)]
pub struct BuildMeta {
    pub n: usize,
    pub rounds: Vec<RoundStat>,
    pub pseudo_cliques: usize,
    pub supercenter_exclusions: u64,
    pub threads: usize,
    pub audit: Vec<CliqueAudit>,
}

/// Uncovered fraction after each round; monotone non-increasing, ending at 0.
pub fn coverage_curve(meta: &BuildMeta) -> Vec<(f64, f64)> {
    meta.rounds
        .iter()
        .map(|r| (r.alpha, r.uncovered_after as f64 / meta.n as f64))
        .collect()
}

/// The clique cover plus its node -> cliques inverted index.
///
/// Cliques live in a flat pool (`offsets` into `members`). Deletions write
/// `u32::MAX` tombstones into the pool and may retire whole cliques; both are
/// compacted on save. `meta` is compared by no equality and never persisted.
#[derive(Debug, Clone)]
pub struct CliqueIndex {
    pub(crate) n: usize,
    pub(crate) k_prime: u32,
    pub(crate) tau: u32,
    pub(crate) offsets: Vec<u64>,
    pub(crate) members: Vec<u32>,
    /// Bit per clique: set = pseudo.
    pub(crate) pseudo: Bitmap,
    pub(crate) dead_cliques: Bitmap,
    pub(crate) live_sizes: Vec<u32>,
    pub(crate) node_to_cliques: Vec<Vec<u32>>,
    pub(crate) dead_nodes: Bitmap,
    pub meta: Option<BuildMeta>,
}

pub const TOMBSTONE: u32 = u32::MAX;

impl PartialEq for CliqueIndex {
    /// Structural equality; the construction trace is ignored.
    fn eq(&self, other: &Self) -> bool {
        self.n == other.n
            && self.k_prime == other.k_prime
            && self.tau == other.tau
            && self.offsets == other.offsets
            && self.members == other.members
            && self.pseudo == other.pseudo
            && self.dead_cliques == other.dead_cliques
            && self.node_to_cliques == other.node_to_cliques
            && self.dead_nodes == other.dead_nodes
    }
}

impl CliqueIndex {
    pub fn n(&self) -> usize {
        self.n
    }

    pub fn k_prime(&self) -> u32 {
        self.k_prime
    }

    pub fn tau(&self) -> u32 {
        self.tau
    }

    /// Total clique slots, including retired ones.
    pub fn clique_count(&self) -> usize {
        self.offsets.len() - 1
    }

    pub fn live_clique_count(&self) -> usize {
        self.clique_count() - self.dead_cliques.count_ones()
    }

    /// Raw member slice; may contain tombstones after deletions.
    #[inline]
    pub fn clique_members(&self, cid: u32) -> &[u32] {
        &self.members[self.offsets[cid as usize] as usize..self.offsets[cid as usize + 1] as usize]
    }

    pub fn live_members(&self, cid: u32) -> impl Iterator<Item = u32> + '_ {
        self.clique_members(cid).iter().copied().filter(|&m| m != TOMBSTONE)
    }

    #[inline]
    pub fn kind(&self, cid: u32) -> CliqueKind {
        if self.pseudo.get(cid as usize) {
            CliqueKind::Pseudo
        } else {
            CliqueKind::Mined
        }
    }

    #[inline]
    pub fn is_dead_clique(&self, cid: u32) -> bool {
        self.dead_cliques.get(cid as usize)
    }

    #[inline]
    pub fn live_size(&self, cid: u32) -> u32 {
        self.live_sizes[cid as usize]
    }

    /// Clique ids containing `node`, ascending.
    #[inline]
    pub fn cliques_of(&self, node: u32) -> &[u32] {
        &self.node_to_cliques[node as usize]
    }

    #[inline]
    pub fn is_dead_node(&self, node: u32) -> bool {
        self.dead_nodes.get(node as usize)
    }

    pub fn dead_nodes(&self) -> &Bitmap {
        &self.dead_nodes
    }

    pub fn live_node_count(&self) -> usize {
        self.n - self.dead_nodes.count_ones()
    }

    pub fn pseudo_count(&self) -> usize {
        (0..self.clique_count() as u32)
            .filter(|&c| !self.is_dead_clique(c) && self.kind(c) == CliqueKind::Pseudo)
            .count()
    }

    /// Assemble an index from decoded parts; everything starts live and
    /// the construction trace is absent. Callers validate afterwards.
    #[allow(clippy::too_many_arguments)]
    pub(crate) fn from_parts(
        n: usize,
        k_prime: u32,
        tau: u32,
        offsets: Vec<u64>,
        members: Vec<u32>,
        pseudo: Bitmap,
        live_sizes: Vec<u32>,
        node_to_cliques: Vec<Vec<u32>>,
    ) -> Self {
        let cc = live_sizes.len();
        CliqueIndex {
            n,
            k_prime,
            tau,
            offsets,
            members,
            pseudo,
            dead_cliques: Bitmap::new(cc),
            live_sizes,
            node_to_cliques,
            dead_nodes: Bitmap::new(n),
            meta: None,
        }
    }

    /// Total live member entries across live cliques.
    pub fn total_members(&self) -> u64 {
        (0..self.clique_count() as u32)
            .filter(|&c| !self.is_dead_clique(c))
            .map(|c| self.live_size(c) as u64)
            .sum()
    }

    /// Mean over live nodes of the number of distinct co-clique neighbors:
    /// the implicit out-degree of the graph the cover encodes.
    pub fn effective_out_degree(&self) -> f64 {
        let live = self.live_node_count();
        if live == 0 {
            return 0.0;
        }
        let mut seen = vec![u32::MAX; self.n];
        let mut total = 0u64;
        for u in 0..self.n as u32 {
            if self.is_dead_node(u) {
                continue;
            }
            let mut deg = 0u64;
            for &cid in self.cliques_of(u) {
                if self.is_dead_clique(cid) {
                    continue;
                }
                for m in self.live_members(cid) {
                    if m != u && seen[m as usize] != u {
                        seen[m as usize] = u;
                        deg += 1;
                    }
                }
            }
            total += deg;
        }
        total as f64 / live as f64
    }

    /// Structural invariants: member ranges and ordering, coverage of live
    /// nodes, the worst-case size bound, and exactness of the inverted
    /// index. Returns the first failed check by name.
    pub fn validate_structure(&self) -> Result<()> {
        let cc = self.clique_count();
        if self.offsets[0] != 0
            || self.offsets.windows(2).any(|w| w[0] > w[1])
            || *self.offsets.last().unwrap() as usize != self.members.len()
        {
            return Err(Error::validation("offsets", "clique offsets are not monotone over the member pool"));
        }
        if self.live_sizes.len() != cc
            || self.pseudo.len() != cc
            || self.dead_cliques.len() != cc
            || self.node_to_cliques.len() != self.n
            || self.dead_nodes.len() != self.n
        {
            return Err(Error::validation("shape", "per-clique or per-node arrays disagree with counts"));
        }
        let mut total: u64 = 0;
        for cid in 0..cc as u32 {
            if self.is_dead_clique(cid) {
                continue;
            }
            let mem = self.clique_members(cid);
            let mut live = 0u32;
            let mut prev: Option<u32> = None;
            for &m in mem {
                if m == TOMBSTONE {
                    continue;
                }
                live += 1;
                if m as usize >= self.n {
                    return Err(Error::validation(
                        "member-range",
                        format!("clique {cid} contains node {m} >= n {}", self.n),
                    ));
                }
                if let Some(p) = prev {
                    if p >= m {
                        return Err(Error::validation(
                            "member-order",
                            format!("clique {cid} members not strictly ascending"),
                        ));
                    }
                }
                prev = Some(m);
            }
            if live != self.live_size(cid) {
                return Err(Error::validation(
                    "live-size",
                    format!("clique {cid} live size cache {} vs actual {live}", self.live_size(cid)),
                ));
            }
            if live == 0 {
                return Err(Error::validation("empty-clique", format!("live clique {cid} has no members")));
            }
            total += live as u64;
        }
        if total > self.n as u64 * self.k_prime as u64 {
            return Err(Error::validation(
                "size-bound",
                format!("total members {total} exceeds n * k' = {}", self.n as u64 * self.k_prime as u64),
            ));
        }
        // Inverted index must match membership exactly, both directions.
        let mut rebuilt: Vec<Vec<u32>> = vec![Vec::new(); self.n];
        for cid in 0..cc as u32 {
            if self.is_dead_clique(cid) {
                continue;
            }
            for m in self.live_members(cid) {
                rebuilt[m as usize].push(cid);
            }
        }
        for (u, built) in rebuilt.iter().enumerate() {
            if *built != self.node_to_cliques[u] {
                return Err(Error::validation(
                    "inverse-index",
                    format!("node {u}: inverted index disagrees with clique membership"),
                ));
            }
        }
        for u in 0..self.n as u32 {
            let covered = !self.node_to_cliques[u as usize].is_empty();
            if self.is_dead_node(u) {
                if covered {
                    return Err(Error::validation(
                        "dead-membership",
                        format!("deleted node {u} still appears in cliques"),
                    ));
                }
            } else if !covered {
                return Err(Error::validation("coverage", format!("live node {u} is in no clique")));
            }
        }
        Ok(())
    }

    /// Geometric invariants, requiring the construction audit: every mined
    /// clique is pairwise-complete under its recorded threshold and maximal
    /// within its local graph.
    pub fn validate_geometry(&self, dataset: &Dataset) -> Result<()> {
        let meta = self.meta.as_ref().ok_or_else(|| {
            Error::validation("audit", "no construction audit attached")
        })?;
        if meta.audit.len() != self.clique_count() {
            return Err(Error::validation("audit", "audit entries do not align with cliques"));
        }
        for cid in 0..self.clique_count() as u32 {
            if self.is_dead_clique(cid) || self.kind(cid) == CliqueKind::Pseudo {
                continue;
            }
            let audit = &meta.audit[cid as usize];
            let members: Vec<u32> = self.live_members(cid).collect();
            for (i, &a) in members.iter().enumerate() {
                for &b in &members[i + 1..] {
                    let d = (sq_l2(dataset.vector(a), dataset.vector(b)) as f64).sqrt();
                    if d > audit.threshold {
                        return Err(Error::validation(
                            "pairwise-validity",
                            format!("clique {cid}: d({a},{b}) = {d} exceeds threshold {}", audit.threshold),
                        ));
                    }
                }
            }
            // Maximality within the recorded local graph: no candidate
            // outside the clique may be adjacent to every member.
            for &x in &audit.candidates {
                if members.contains(&x) {
                    continue;
                }
                let adjacent_to_all = members.iter().all(|&m| {
                    (sq_l2(dataset.vector(x), dataset.vector(m)) as f64).sqrt() <= audit.threshold
                });
                if adjacent_to_all {
                    return Err(Error::validation(
                        "maximality",
                        format!("clique {cid}: candidate {x} is adjacent to every member"),
                    ));
                }
            }
        }
        Ok(())
    }
}

/// Local graph over candidate indices `0..m`, adjacency as bit rows.
#[derive(Debug, Clone)]
pub struct LocalGraph {
    m: usize,
    words: usize,
    adj: Vec<u64>,
}

impl LocalGraph {
    pub fn new(m: usize) -> Self {
        let words = m.div_ceil(64).max(1);
        LocalGraph { m, words, adj: vec![0; m * words] }
    }

    pub fn len(&self) -> usize {
        self.m
    }

    pub fn is_empty(&self) -> bool {
        self.m == 0
    }

    pub fn add_edge(&mut self, a: usize, b: usize) {
        debug_assert!(a != b && a < self.m && b < self.m);
        self.adj[a * self.words + b / 64] |= 1 << (b % 64);
        self.adj[b * self.words + a / 64] |= 1 << (a % 64);
    }

    pub fn has_edge(&self, a: usize, b: usize) -> bool {
        self.adj[a * self.words + b / 64] >> (b % 64) & 1 == 1
    }

    #[inline]
    fn row(&self, v: usize) -> &[u64] {
        &self.adj[v * self.words..(v + 1) * self.words]
    }

    pub fn degree(&self, v: usize) -> usize {
        self.row(v).iter().map(|w| w.count_ones() as usize).sum()
    }
}

fn iter_bits(words: &[u64]) -> impl Iterator<Item = usize> + '_ {
    words.iter().enumerate().flat_map(|(wi, &w)| {
        std::iter::successors(if w == 0 { None } else { Some(w) }, |&w| {
            let w = w & (w - 1);
            if w == 0 {
                None
            } else {
                Some(w)
            }
        })
        .map(move |w| wi * 64 + w.trailing_zeros() as usize)
    })
}

/// Grow a maximal clique from `seed`: repeatedly move the candidate with the
/// most neighbors inside the candidate set (ties to the smallest index) into
/// the clique and intersect the candidates with its neighborhood. The result
/// is maximal in `g`: no node is adjacent to every member. Returned sorted
/// ascending.
pub fn greedy_maximal_clique(g: &LocalGraph, seed: usize) -> Vec<usize> {
    debug_assert!(seed < g.len());
    let mut clique = vec![seed];
    let mut cand: Vec<u64> = g.row(seed).to_vec();
    loop {
        let mut best: Option<(usize, usize)> = None; // (degree, index)
        for v in iter_bits(&cand) {
            let deg = cand
                .iter()
                .zip(g.row(v))
                .map(|(c, r)| (c & r).count_ones() as usize)
                .sum::<usize>();
            match best {
                Some((bd, _)) if deg <= bd => {}
                _ => best = Some((deg, v)),
            }
        }
        let Some((_, v)) = best else { break };
        clique.push(v);
        for (c, r) in cand.iter_mut().zip(g.row(v)) {
            *c &= r;
        }
    }
    clique.sort_unstable();
    clique
}

struct MinedRec {
    members: Vec<u32>,
    pseudo: bool,
    center: u32,
    round: u32,
    alpha: f64,
    threshold: f64,
    candidates: Vec<u32>,
}

struct Shared<'a> {
    dataset: &'a Dataset,
    knng: &'a KnnGraph,
    params: &'a BuildParams,
    coverage: AtomicBitmap,
    counts: Vec<AtomicU32>,
    sc_exclusions: AtomicU64,
}

/// Candidate set, local graph, and greedy mining for one center at one alpha
/// level. Kept cliques are published to the shared coverage mask immediately,
/// so later seeds (and concurrent workers) skip already-covered nodes.
fn mine_for_center(shared: &Shared, center: u32, alpha: f64, round: u32, out: &mut Vec<MinedRec>) {
    let n = shared.dataset.n();
    let sc_cap = shared.params.supercenter_fraction * n as f64;
    let mut vprime: Vec<u32> = Vec::with_capacity(shared.knng.k_prime + 1);
    for &(v, _) in shared.knng.neighbors(center) {
        if shared.counts[v as usize].load(Ordering::Relaxed) as f64 > sc_cap {
            shared.sc_exclusions.fetch_add(1, Ordering::Relaxed);
        } else {
            vprime.push(v);
        }
    }
    vprime.push(center);
    vprime.sort_unstable();
    let m = vprime.len();

    let d_min_sq = vprime
        .iter()
        .filter(|&&v| v != center)
        .map(|&v| sq_l2(shared.dataset.vector(center), shared.dataset.vector(v)))
        .min_by(|a, b| a.total_cmp(b))
        .unwrap_or(0.0);
    let threshold = alpha * (d_min_sq as f64).sqrt();

    let mut g = LocalGraph::new(m);
    for i in 0..m {
        for j in i + 1..m {
            let d = sq_l2(shared.dataset.vector(vprime[i]), shared.dataset.vector(vprime[j]));
            if (d as f64).sqrt() <= threshold {
                g.add_edge(i, j);
            }
        }
    }

    for j in 0..m {
        if shared.coverage.get(vprime[j] as usize) {
            continue;
        }
        let local = greedy_maximal_clique(&g, j);
        if local.len() >= shared.params.tau {
            let members: Vec<u32> = local.into_iter().map(|i| vprime[i]).collect();
            for &u in &members {
                shared.coverage.set(u as usize);
                shared.counts[u as usize].fetch_add(1, Ordering::Relaxed);
            }
            out.push(MinedRec {
                members,
                pseudo: false,
                center,
                round,
                alpha,
                threshold,
                candidates: vprime.clone(),
            });
        }
    }

    if alpha >= shared.params.alpha_max && !shared.coverage.get(center as usize) {
        for &u in &vprime {
            shared.coverage.set(u as usize);
            shared.counts[u as usize].fetch_add(1, Ordering::Relaxed);
        }
        out.push(MinedRec {
            members: vprime.clone(),
            pseudo: true,
            center,
            round,
            alpha,
            threshold,
            candidates: vprime,
        });
    }
}

/// Build the index over `dataset` from its k'-NN graph.
///
/// Lock-free when parallel: workers mine into private pools merged in
/// deterministic chunk order; the only shared state is the atomic coverage
/// mask and per-node clique counts. A single-threaded build is
/// bit-reproducible; parallel builds may differ slightly (benign
/// over-coverage from races) but satisfy the same invariants.
pub fn build(
    dataset: &Dataset,
    knng: &KnnGraph,
    params: &BuildParams,
    threads: usize,
) -> Result<CliqueIndex> {
    params.validate()?;
    let n = dataset.n();
    if knng.n() != n {
        return Err(Error::ShapeMismatch(format!("graph has {} nodes, dataset {n}", knng.n())));
    }
    if knng.k_prime != params.k_prime && !(knng.clamped && knng.k_prime == n - 1) {
        return Err(Error::ShapeMismatch(format!(
            "graph built with k' = {}, params say {}",
            knng.k_prime, params.k_prime
        )));
    }
    if params.tau > knng.k_prime + 1 {
        log::warn!(
            "tau {} exceeds k' + 1 = {}; pseudo-cliques will dominate",
            params.tau,
            knng.k_prime + 1
        );
    }
    let threads = threads.max(1);

    let shared = Shared {
        dataset,
        knng,
        params,
        coverage: AtomicBitmap::new(n),
        counts: (0..n).map(|_| AtomicU32::new(0)).collect(),
        sc_exclusions: AtomicU64::new(0),
    };

    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .map_err(|e| Error::param("threads", e.to_string()))?;

    let mut cliques: Vec<MinedRec> = Vec::new();
    let mut rounds: Vec<RoundStat> = Vec::new();
    let mut alpha = params.alpha0;
    let max_rounds = params.max_rounds();

    for round in 1.. {
        let uncovered: Vec<u32> =
            (0..n as u32).filter(|&u| !shared.coverage.get(u as usize)).collect();
        if uncovered.is_empty() {
            break;
        }
        if round as usize > max_rounds {
            return Err(Error::validation(
                "round-bound",
                format!("exceeded {max_rounds} rounds without convergence"),
            ));
        }
        let before = uncovered.len();
        if threads == 1 {
            for &c in &uncovered {
                if !shared.coverage.get(c as usize) {
                    mine_for_center(&shared, c, alpha, round, &mut cliques);
                }
            }
        } else {
            let chunk = (uncovered.len() / (threads * 16)).max(16);
            let batches: Vec<Vec<MinedRec>> = pool.install(|| {
                uncovered
                    .par_chunks(chunk)
                    .map(|ch| {
                        let mut local = Vec::new();
                        for &c in ch {
                            if !shared.coverage.get(c as usize) {
                                mine_for_center(&shared, c, alpha, round, &mut local);
                            }
                        }
                        local
                    })
                    .collect()
            });
            for b in batches {
                cliques.extend(b);
            }
        }
        let after = n - shared.coverage.count_ones();
        rounds.push(RoundStat { alpha, uncovered_before: before, uncovered_after: after });
        alpha *= params.alpha_expansion;
    }

    // Assemble the flat pool and inverted index; clique ids follow pool order.
    let cc = cliques.len();
    let mut offsets = Vec::with_capacity(cc + 1);
    let mut members = Vec::new();
    let mut pseudo = Bitmap::new(cc);
    let mut live_sizes = Vec::with_capacity(cc);
    let mut node_to_cliques: Vec<Vec<u32>> = vec![Vec::new(); n];
    let mut audit = Vec::with_capacity(cc);
    let mut pseudo_count = 0;
    offsets.push(0u64);
    for (cid, rec) in cliques.iter().enumerate() {
        members.extend_from_slice(&rec.members);
        offsets.push(members.len() as u64);
        live_sizes.push(rec.members.len() as u32);
        if rec.pseudo {
            pseudo.set(cid);
            pseudo_count += 1;
        }
        for &u in &rec.members {
            node_to_cliques[u as usize].push(cid as u32);
        }
        audit.push(CliqueAudit {
            center: rec.center,
            round: rec.round,
            alpha: rec.alpha,
            threshold: rec.threshold,
            candidates: rec.candidates.clone(),
        });
    }

    let index = CliqueIndex {
        n,
        k_prime: knng.k_prime as u32,
        tau: params.tau as u32,
        offsets,
        members,
        pseudo,
        dead_cliques: Bitmap::new(cc),
        live_sizes,
        node_to_cliques,
        dead_nodes: Bitmap::new(n),
        meta: Some(BuildMeta {
            n,
            rounds,
            pseudo_cliques: pseudo_count,
            supercenter_exclusions: shared.sc_exclusions.load(Ordering::Relaxed),
            threads,
            audit,
        }),
    };
    debug_assert!(index.validate_structure().is_ok());
    Ok(index)
}
