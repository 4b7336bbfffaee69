//! Filtered top-k queries over the clique cover.
//!
//! The search keeps a capped beam R of the closest predicate-true nodes
//! found so far. It starts from a random sample of predicate-true seeds and
//! repeatedly expands the closest unexpanded beam entry: every not-yet-seen
//! clique containing it contributes its predicate-true unvisited members.
//! There is no single entry point; seed count scales with sqrt(n) so sparse
//! predicates still get enough independent starting regions.

use rand::prelude::*;
use rand_chacha::ChaCha8Rng;

use crate::bits::Bitmap;
use crate::build::{CliqueIndex, TOMBSTONE};
use crate::dataset::Dataset;
use crate::distance::sq_l2;
use crate::error::{Error, Result};
use crate::predicate::{evaluate_mask, PredicateMask, Query};

#[derive(Debug, Clone)]
pub struct SearchParams {
    /// Result count.
    pub k: usize,
    /// Beam capacity; must be >= k. Larger widens the explored region.
    pub l_s: usize,
    /// Seed scale: ceil(epsilon * sqrt(n)) predicate-true seeds are sampled.
    pub epsilon: f64,
    pub rng_seed: u64,
}

impl SearchParams {
    pub fn new(k: usize, l_s: usize) -> Self {
        SearchParams { k, l_s, epsilon: 1.0, rng_seed: 0 }
    }

    pub fn validate(&self) -> Result<()> {
        if self.k < 1 {
            return Err(Error::param("k", "must be >= 1"));
        }
        if self.l_s < self.k {
            return Err(Error::param("l_s", "must be >= k"));
        }
        if self.epsilon.is_nan() || self.epsilon < 0.0 {
            return Err(Error::param("epsilon", "must be >= 0"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct SearchStats {
    /// Exact distance evaluations; equals the number of set visited bits.
    pub dist_comps: u64,
    /// Beam entries expanded.
    pub expanded: u64,
    /// Seeds actually sampled (after clamping to the valid population).
    pub seeds: usize,
}

/// Beam state: R (capped, ascending by distance), the visited-node mask I,
/// and the visited-clique mask.
#[derive(Debug)]
pub struct SearchState {
    /// (squared distance, node, expanded) ascending by (distance, node).
    pub beam: Vec<(f32, u32, bool)>,
    pub visited: Bitmap,
    pub visited_cliques: Bitmap,
    pub l_s: usize,
    pub stats: SearchStats,
}

impl SearchState {
    pub fn new(n: usize, clique_count: usize, l_s: usize) -> Self {
        SearchState {
            beam: Vec::with_capacity(l_s + 1),
            visited: Bitmap::new(n),
            visited_cliques: Bitmap::new(clique_count),
            l_s,
            stats: SearchStats::default(),
        }
    }

    /// Insert a predicate-true node at its sorted position; when the beam
    /// exceeds capacity the farthest entry is dropped, expanded or not.
    pub fn insert(&mut self, node: u32, dist: f32) {
        let pos = self
            .beam
            .partition_point(|&(d, id, _)| d.total_cmp(&dist).then(id.cmp(&node)).is_lt());
        self.beam.insert(pos, (dist, node, false));
        if self.beam.len() > self.l_s {
            self.beam.pop();
        }
    }

    fn pop_closest_unexpanded(&mut self) -> Option<u32> {
        for e in self.beam.iter_mut() {
            if !e.2 {
                e.2 = true;
                return Some(e.1);
            }
        }
        None
    }
}

/// Sample `ceil(epsilon * sqrt(n))` distinct predicate-true node ids
/// uniformly, by reservoir sampling over the mask's set bits. Returns all
/// valid ids when fewer exist than requested.
pub fn sample_seeds(
    mask: &PredicateMask,
    epsilon: f64,
    n: usize,
    rng: &mut impl Rng,
) -> Vec<u32> {
    let want = (epsilon * (n as f64).sqrt()).ceil() as usize;
    reservoir_from_bits(&mask.bits, want, rng)
}

fn reservoir_from_bits(bits: &Bitmap, want: usize, rng: &mut impl Rng) -> Vec<u32> {
    if want == 0 {
        return Vec::new();
    }
    let mut reservoir: Vec<u32> = Vec::with_capacity(want);
    for (i, one) in bits.iter_ones().enumerate() {
        if i < want {
            reservoir.push(one as u32);
        } else {
            let j = rng.random_range(0..=i);
            if j < want {
                reservoir[j] = one as u32;
            }
        }
    }
    reservoir
}

/// Filtered top-k search with a precomputed predicate mask.
///
/// Returns up to k `(node, squared distance)` pairs ascending by distance;
/// fewer than k only when the beam exhausts early or fewer than k valid
/// nodes exist. Every distance is computed exactly once per query.
pub fn search_with_mask(
    index: &CliqueIndex,
    dataset: &Dataset,
    vq: &[f32],
    mask: &PredicateMask,
    params: &SearchParams,
) -> Result<(Vec<(u32, f32)>, SearchStats)> {
    params.validate()?;
    if vq.len() != dataset.dim() {
        return Err(Error::DimensionMismatch { expected: dataset.dim(), got: vq.len() });
    }
    let n = index.n();
    if dataset.n() != n || mask.bits.len() != n {
        return Err(Error::ShapeMismatch(format!(
            "index n {n}, dataset n {}, mask length {}",
            dataset.n(),
            mask.bits.len()
        )));
    }

    // Deleted nodes are unreachable through cliques but could still be
    // sampled as seeds, so mask them out once per query.
    let effective: Bitmap;
    let valid = if index.dead_nodes().any() {
        effective = mask.bits.and_not(index.dead_nodes());
        &effective
    } else {
        &mask.bits
    };

    let mut rng = ChaCha8Rng::seed_from_u64(params.rng_seed);
    let want = (params.epsilon * (n as f64).sqrt()).ceil() as usize;
    let seeds = reservoir_from_bits(valid, want, &mut rng);

    let mut state = SearchState::new(n, index.clique_count(), params.l_s);
    state.stats.seeds = seeds.len();
    for s in seeds {
        if !state.visited.get(s as usize) {
            state.visited.set(s as usize);
            let d = sq_l2(vq, dataset.vector(s));
            state.stats.dist_comps += 1;
            state.insert(s, d);
        }
    }

    while let Some(p) = state.pop_closest_unexpanded() {
        state.stats.expanded += 1;
        for &cid in index.cliques_of(p) {
            if index.is_dead_clique(cid) || state.visited_cliques.get(cid as usize) {
                continue;
            }
            state.visited_cliques.set(cid as usize);
            for &m in index.clique_members(cid) {
                if m == TOMBSTONE
                    || !valid.get(m as usize)
                    || state.visited.get(m as usize)
                {
                    continue;
                }
                state.visited.set(m as usize);
                let d = sq_l2(vq, dataset.vector(m));
                state.stats.dist_comps += 1;
                state.insert(m, d);
            }
        }
    }

    debug_assert_eq!(state.stats.dist_comps as usize, state.visited.count_ones());
    let results = state.beam.iter().take(params.k).map(|&(d, id, _)| (id, d)).collect();
    Ok((results, state.stats))
}

/// Filtered top-k search; evaluates the predicate mask and delegates to
/// [`search_with_mask`].
pub fn search(
    index: &CliqueIndex,
    dataset: &Dataset,
    query: &Query,
    params: &SearchParams,
) -> Result<(Vec<(u32, f32)>, SearchStats)> {
    let mask = evaluate_mask(dataset, query)?;
    search_with_mask(index, dataset, &query.vector, &mask, params)
}
