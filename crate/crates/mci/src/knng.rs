//! k'-nearest-neighbor graph construction.
//!
//! The graph seeds index construction and is discarded afterwards. Two
//! builders: an exact O(n^2) scan used for ground truth and small datasets,
//! and an iterative neighbor-join refinement (random lists improved by
//! comparing each node's neighbors and reverse neighbors against each other)
//! whose quality is measured, not guaranteed.

use rand::prelude::*;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::dataset::Dataset;
use crate::distance::sq_l2;
use crate::error::{Error, Result};

/// Datasets up to this size get the exact builder from [`auto`];
/// determinism is affordable at desk scale.
pub const EXACT_BUILD_LIMIT: usize = 20_000;

/// One node's neighbor list: `(id, squared distance)` ascending by
/// `(distance, id)`, no self-loops, no duplicates.
#[derive(Debug, Clone, PartialEq)]
pub struct NeighborList {
    pub node: u32,
    pub neighbors: Vec<(u32, f32)>,
}

/// The k'-NN graph: one list per node.
#[derive(Debug, Clone, PartialEq)]
pub struct KnnGraph {
    pub k_prime: usize,
    pub lists: Vec<NeighborList>,
    /// Set when `k_prime >= n` forced a clamp to `n - 1`.
    pub clamped: bool,
}

impl KnnGraph {
    pub fn n(&self) -> usize {
        self.lists.len()
    }

    #[inline]
    pub fn neighbors(&self, node: u32) -> &[(u32, f32)] {
        &self.lists[node as usize].neighbors
    }
}

fn effective_k(k_prime: usize, n: usize) -> Result<(usize, bool)> {
    if k_prime == 0 {
        return Err(Error::param("k_prime", "must be >= 1"));
    }
    if k_prime >= n {
        log::warn!("k_prime {k_prime} >= n {n}; clamping to {}", n - 1);
        Ok((n - 1, true))
    } else {
        Ok((k_prime, false))
    }
}

#[inline]
fn key(d: f32, id: u32) -> (f32, u32) {
    (d, id)
}

#[inline]
fn key_lt(a: (f32, u32), b: (f32, u32)) -> bool {
    match a.0.total_cmp(&b.0) {
        std::cmp::Ordering::Less => true,
        std::cmp::Ordering::Greater => false,
        std::cmp::Ordering::Equal => a.1 < b.1,
    }
}

/// Exact k'-NN graph by full scan; ties broken by smaller index.
pub fn exact_knn(dataset: &Dataset, k_prime: usize) -> Result<KnnGraph> {
    let n = dataset.n();
    let (k, clamped) = effective_k(k_prime, n)?;
    let lists: Vec<NeighborList> = (0..n as u32)
        .into_par_iter()
        .map(|i| {
            let vi = dataset.vector(i);
            // Max-heap of the k smallest (distance, id) keys seen so far.
            let mut heap: Vec<(f32, u32)> = Vec::with_capacity(k + 1);
            for j in 0..n as u32 {
                if j == i {
                    continue;
                }
                let d = sq_l2(vi, dataset.vector(j));
                if heap.len() < k {
                    heap.push(key(d, j));
                    if heap.len() == k {
                        heap.sort_unstable_by(|a, b| b.0.total_cmp(&a.0).then(b.1.cmp(&a.1)));
                    }
                } else if key_lt(key(d, j), heap[0]) {
                    // Replace the current worst, then restore descending order.
                    heap[0] = key(d, j);
                    let mut p = 0;
                    while p + 1 < heap.len() && key_lt(heap[p], heap[p + 1]) {
                        heap.swap(p, p + 1);
                        p += 1;
                    }
                }
            }
            heap.sort_unstable_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
            NeighborList { node: i, neighbors: heap.into_iter().map(|(d, j)| (j, d)).collect() }
        })
        .collect();
    Ok(KnnGraph { k_prime: k, lists, clamped })
}

/// Mean fraction of exact neighbors recovered per node.
pub fn graph_recall(approx: &KnnGraph, exact: &KnnGraph) -> Result<f64> {
    if approx.n() != exact.n() || approx.k_prime != exact.k_prime {
        return Err(Error::ShapeMismatch(format!(
            "graphs differ: n {} vs {}, k' {} vs {}",
            approx.n(),
            exact.n(),
            approx.k_prime,
            exact.k_prime
        )));
    }
    let mut total = 0.0;
    for (al, el) in approx.lists.iter().zip(&exact.lists) {
        if el.neighbors.is_empty() {
            continue;
        }
        let hits = al
            .neighbors
            .iter()
            .filter(|(id, _)| el.neighbors.iter().any(|(e, _)| e == id))
            .count();
        total += hits as f64 / el.neighbors.len() as f64;
    }
    Ok(total / approx.n() as f64)
}

/// Split-mix style hash for deriving independent RNG streams.
fn mix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e3779b97f4a7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58476d1ce4e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d049bb133111eb);
    z ^ (z >> 31)
}

fn derive_rng(seed: u64, iter: u64, node: u64, stream: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(mix(seed ^ mix(iter ^ mix(node ^ mix(stream)))))
}

#[derive(Clone, Copy)]
struct Entry {
    id: u32,
    dist: f32,
    is_new: bool,
}

/// Insert `(id, dist)` keeping the k smallest keys; returns whether the list
/// changed. Duplicates share the exact same key, so the binary search finds
/// them.
fn list_insert(list: &mut Vec<Entry>, owner: u32, id: u32, dist: f32, k: usize) -> bool {
    if id == owner {
        return false;
    }
    let pos = list.partition_point(|e| key_lt(key(e.dist, e.id), key(dist, id)));
    if pos < list.len() && list[pos].id == id && list[pos].dist == dist {
        return false;
    }
    if pos >= k {
        return false;
    }
    list.insert(pos, Entry { id, dist, is_new: true });
    list.truncate(k);
    true
}

fn sample_ids(ids: &[u32], cap: usize, rng: &mut ChaCha8Rng) -> Vec<u32> {
    if ids.len() <= cap {
        return ids.to_vec();
    }
    ids.choose_multiple(rng, cap).copied().collect()
}

/// `sample_rate` of an id list, at least one entry when nonempty; at rate 1
/// the whole list survives, so a full-rate iteration examines every pair.
fn sample_fraction(ids: &[u32], rate: f64, rng: &mut ChaCha8Rng) -> Vec<u32> {
    let cap = ((rate * ids.len() as f64).ceil() as usize).max(1);
    sample_ids(ids, cap, rng)
}

/// Approximate k'-NN graph by iterative neighbor join.
///
/// Each list starts with k' random distinct neighbors. Per iteration, every
/// node samples up to `sample_rate * k'` of its new and old neighbors plus a
/// `sample_rate` fraction of its reverse neighbors; candidate pairs drawn
/// from these local sets are tested and the k' smallest kept. Stops after
/// `iterations` rounds or when an iteration accepts fewer than
/// `0.001 * n * k'` updates. Deterministic for a fixed seed regardless of
/// thread count (updates are applied in node order after each parallel
/// batch).
pub fn nn_descent(
    dataset: &Dataset,
    k_prime: usize,
    iterations: usize,
    sample_rate: f64,
    seed: u64,
) -> Result<KnnGraph> {
    if iterations == 0 {
        return Err(Error::param("iterations", "must be >= 1"));
    }
    if !(sample_rate > 0.0 && sample_rate <= 1.0) {
        return Err(Error::param("sample_rate", "must be in (0, 1]"));
    }
    let n = dataset.n();
    let (k, clamped) = effective_k(k_prime, n)?;

    // Random distinct initial lists.
    let mut lists: Vec<Vec<Entry>> = (0..n as u32)
        .into_par_iter()
        .map(|u| {
            let mut rng = derive_rng(seed, 0, u as u64, 0);
            let mut picked: Vec<u32> = Vec::with_capacity(k);
            if n - 1 <= k {
                picked.extend((0..n as u32).filter(|&v| v != u));
            } else {
                while picked.len() < k {
                    let v = rng.random_range(0..n as u32);
                    if v != u && !picked.contains(&v) {
                        picked.push(v);
                    }
                }
            }
            let vu = dataset.vector(u);
            let mut entries: Vec<Entry> = picked
                .into_iter()
                .map(|v| Entry { id: v, dist: sq_l2(vu, dataset.vector(v)), is_new: true })
                .collect();
            entries.sort_unstable_by(|a, b| a.dist.total_cmp(&b.dist).then(a.id.cmp(&b.id)));
            entries
        })
        .collect();

    let cap = ((sample_rate * k as f64).ceil() as usize).max(1);
    let stop_threshold = (0.001 * n as f64 * k as f64) as u64;
    const CHUNK: usize = 256;

    for it in 1..=iterations {
        // Snapshot phase: sample forward neighbors, marking sampled new
        // entries as old, then build capped reverse samples.
        let mut fwd_new: Vec<Vec<u32>> = Vec::with_capacity(n);
        let mut fwd_old: Vec<Vec<u32>> = Vec::with_capacity(n);
        for (u, list) in lists.iter_mut().enumerate() {
            let mut rng = derive_rng(seed, it as u64, u as u64, 1);
            let news: Vec<u32> = list.iter().filter(|e| e.is_new).map(|e| e.id).collect();
            let olds: Vec<u32> = list.iter().filter(|e| !e.is_new).map(|e| e.id).collect();
            let sampled_new = sample_ids(&news, cap, &mut rng);
            let sampled_old = sample_ids(&olds, cap, &mut rng);
            for e in list.iter_mut() {
                if e.is_new && sampled_new.contains(&e.id) {
                    e.is_new = false;
                }
            }
            fwd_new.push(sampled_new);
            fwd_old.push(sampled_old);
        }
        let mut rev_new: Vec<Vec<u32>> = vec![Vec::new(); n];
        let mut rev_old: Vec<Vec<u32>> = vec![Vec::new(); n];
        for u in 0..n {
            for &v in &fwd_new[u] {
                rev_new[v as usize].push(u as u32);
            }
            for &v in &fwd_old[u] {
                rev_old[v as usize].push(u as u32);
            }
        }

        let mut accepted: u64 = 0;
        let node_ids: Vec<u32> = (0..n as u32).collect();
        for chunk in node_ids.chunks(CHUNK) {
            let proposals: Vec<Vec<(u32, u32, f32)>> = chunk
                .par_iter()
                .map(|&u| {
                    let mut rng = derive_rng(seed, it as u64, u as u64, 2);
                    let rnew = sample_fraction(&rev_new[u as usize], sample_rate, &mut rng);
                    let rold = sample_fraction(&rev_old[u as usize], sample_rate, &mut rng);
                    let mut b_new = fwd_new[u as usize].clone();
                    for &v in &rnew {
                        if !b_new.contains(&v) {
                            b_new.push(v);
                        }
                    }
                    let mut b_old = fwd_old[u as usize].clone();
                    for &v in &rold {
                        if !b_old.contains(&v) {
                            b_old.push(v);
                        }
                    }
                    let mut out = Vec::new();
                    // Reverse edges incorporate u itself as a candidate.
                    for &v in rnew.iter().chain(&rold) {
                        if v != u {
                            let d = sq_l2(dataset.vector(u), dataset.vector(v));
                            out.push((u, v, d));
                            out.push((v, u, d));
                        }
                    }
                    for (ai, &a) in b_new.iter().enumerate() {
                        for &b in b_new[ai + 1..].iter().chain(&b_old) {
                            if a == b {
                                continue;
                            }
                            let d = sq_l2(dataset.vector(a), dataset.vector(b));
                            out.push((a, b, d));
                            out.push((b, a, d));
                        }
                    }
                    out
                })
                .collect();
            for batch in proposals {
                for (owner, id, d) in batch {
                    if list_insert(&mut lists[owner as usize], owner, id, d, k) {
                        accepted += 1;
                    }
                }
            }
        }
        if accepted < stop_threshold {
            break;
        }
    }

    let lists = lists
        .into_iter()
        .enumerate()
        .map(|(u, entries)| NeighborList {
            node: u as u32,
            neighbors: entries.into_iter().map(|e| (e.id, e.dist)).collect(),
        })
        .collect();
    Ok(KnnGraph { k_prime: k, lists, clamped })
}

/// Exact builder up to [`EXACT_BUILD_LIMIT`] points, neighbor-join above.
pub fn auto(dataset: &Dataset, k_prime: usize, seed: u64) -> Result<KnnGraph> {
    if dataset.n() <= EXACT_BUILD_LIMIT {
        exact_knn(dataset, k_prime)
    } else {
        nn_descent(dataset, k_prime, 12, 0.5, seed)
    }
}
