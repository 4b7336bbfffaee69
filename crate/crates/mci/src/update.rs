//! Dynamic updates.
//!
//! Insertion retrieves the new point's approximate neighborhood R with an
//! unfiltered search, joins every clique whose overlap with R reaches
//! ceil(sqrt(|C|)), and otherwise mines a fresh clique from R plus the new
//! point (escalating the edge threshold, with the pseudo-clique fallback).
//! Deletion removes the node everywhere; cliques that fall below tau
//! dissolve, and any survivor left uncovered gets a locally re-mined clique.
//!
//! Mutation invalidates the construction trace (`meta` becomes `None`): the
//! audit describes the original build, not the updated cover.

use crate::bits::Bitmap;
use crate::build::{
    greedy_maximal_clique, BuildParams, CliqueIndex, CliqueKind, LocalGraph, TOMBSTONE,
};
use crate::dataset::{Dataset, FeatureValue};
use crate::distance::sq_l2;
use crate::error::{Error, Result};
use crate::predicate::PredicateMask;
use crate::search::{search_with_mask, SearchParams};

fn check_params(index: &CliqueIndex, params: &BuildParams) -> Result<()> {
    params.validate()?;
    if params.k_prime != index.k_prime() as usize || params.tau != index.tau() as usize {
        return Err(Error::ShapeMismatch(format!(
            "update params (k' {}, tau {}) differ from index (k' {}, tau {})",
            params.k_prime,
            params.tau,
            index.k_prime(),
            index.tau()
        )));
    }
    Ok(())
}

/// Approximate neighborhood of `vq`: unfiltered search with beam = k'.
fn neighborhood(
    index: &CliqueIndex,
    dataset: &Dataset,
    vq: &[f32],
    rng_seed: u64,
) -> Result<Vec<u32>> {
    let n = dataset.n();
    let mut bits = Bitmap::new(n);
    for i in 0..n {
        bits.set(i);
    }
    let mask = PredicateMask::from_bits(bits);
    let k = index.k_prime() as usize;
    let params = SearchParams { k, l_s: k, epsilon: 1.0, rng_seed };
    let (results, _) = search_with_mask(index, dataset, vq, &mask, &params)?;
    Ok(results.into_iter().map(|(id, _)| id).collect())
}

fn append_clique(index: &mut CliqueIndex, members: &[u32], kind: CliqueKind) -> u32 {
    debug_assert!(members.windows(2).all(|w| w[0] < w[1]));
    let cid = index.clique_count() as u32;
    index.members.extend_from_slice(members);
    index.offsets.push(index.members.len() as u64);
    index.pseudo.push(kind == CliqueKind::Pseudo);
    index.dead_cliques.push(false);
    index.live_sizes.push(members.len() as u32);
    for &m in members {
        index.node_to_cliques[m as usize].push(cid);
    }
    cid
}

fn retire_clique(index: &mut CliqueIndex, cid: u32) {
    index.dead_cliques.set(cid as usize);
    let members: Vec<u32> = index.live_members(cid).collect();
    for m in members {
        let list = &mut index.node_to_cliques[m as usize];
        if let Ok(pos) = list.binary_search(&cid) {
            list.remove(pos);
        }
    }
}

/// Mine one clique containing `center` from the candidate set, escalating
/// the threshold ratio from alpha0 up to alpha_max; below tau at every
/// level, the whole set becomes a pseudo-clique. Appends the result and
/// returns its id.
fn mine_from_set(
    index: &mut CliqueIndex,
    dataset: &Dataset,
    center: u32,
    candidates: &[u32],
    params: &BuildParams,
) -> u32 {
    let mut set: Vec<u32> = candidates.to_vec();
    if !set.contains(&center) {
        set.push(center);
    }
    set.sort_unstable();
    set.dedup();
    let m = set.len();
    let center_local = set.binary_search(&center).expect("center in candidate set");

    let d_min_sq = set
        .iter()
        .filter(|&&v| v != center)
        .map(|&v| sq_l2(dataset.vector(center), dataset.vector(v)))
        .min_by(|a, b| a.total_cmp(b))
        .unwrap_or(0.0);
    let d_min = (d_min_sq as f64).sqrt();

    let mut alpha = params.alpha0;
    loop {
        let threshold = alpha * d_min;
        let mut g = LocalGraph::new(m);
        for i in 0..m {
            for j in i + 1..m {
                let d = sq_l2(dataset.vector(set[i]), dataset.vector(set[j]));
                if (d as f64).sqrt() <= threshold {
                    g.add_edge(i, j);
                }
            }
        }
        let clique = greedy_maximal_clique(&g, center_local);
        if clique.len() >= params.tau {
            let members: Vec<u32> = clique.into_iter().map(|i| set[i]).collect();
            return append_clique(index, &members, CliqueKind::Mined);
        }
        if alpha >= params.alpha_max {
            return append_clique(index, &set, CliqueKind::Pseudo);
        }
        alpha *= params.alpha_expansion;
    }
}

/// Insert a vector-feature pair; returns the new node id.
pub fn insert_node(
    index: &mut CliqueIndex,
    dataset: &mut Dataset,
    vector: &[f32],
    feature: FeatureValue,
    params: &BuildParams,
    rng_seed: u64,
) -> Result<u32> {
    check_params(index, params)?;
    if index.n() != dataset.n() {
        return Err(Error::ShapeMismatch(format!(
            "index n {} vs dataset n {}",
            index.n(),
            dataset.n()
        )));
    }
    // Retrieve R over the current contents, then append the row.
    let r = neighborhood(index, dataset, vector, rng_seed)?;
    let u = dataset.push_row(vector, feature)?;
    index.n += 1;
    index.node_to_cliques.push(Vec::new());
    index.dead_nodes.push(false);
    index.meta = None;

    let mut in_r = Bitmap::new(u as usize);
    for &id in &r {
        in_r.set(id as usize);
    }

    // Candidate cliques: those touching R, each tested once.
    let mut candidate_cliques: Vec<u32> = r
        .iter()
        .flat_map(|&id| index.cliques_of(id).iter().copied())
        .collect();
    candidate_cliques.sort_unstable();
    candidate_cliques.dedup();

    let mut joined = false;
    for cid in candidate_cliques {
        if index.is_dead_clique(cid) {
            continue;
        }
        let size = index.live_size(cid) as usize;
        let need = (size as f64).sqrt().ceil() as usize;
        let overlap = index.live_members(cid).filter(|&m| in_r.get(m as usize)).count();
        if overlap >= need {
            let mut members: Vec<u32> = index.live_members(cid).collect();
            members.push(u); // u is the largest id, so order is preserved
            let kind = index.kind(cid);
            retire_clique(index, cid);
            append_clique(index, &members, kind);
            joined = true;
        }
    }
    if !joined {
        mine_from_set(index, dataset, u, &r, params);
    }
    Ok(u)
}

/// Delete a node: tombstone it out of every clique, dissolve cliques that
/// drop below tau, and re-mine coverage for any survivor left uncovered.
pub fn delete_node(
    index: &mut CliqueIndex,
    dataset: &Dataset,
    id: u32,
    params: &BuildParams,
    rng_seed: u64,
) -> Result<()> {
    check_params(index, params)?;
    if id as usize >= index.n() || index.is_dead_node(id) {
        return Err(Error::NotFound(id));
    }
    index.meta = None;
    index.dead_nodes.set(id as usize);
    let cids = std::mem::take(&mut index.node_to_cliques[id as usize]);

    let mut dissolved_survivors: Vec<u32> = Vec::new();
    for cid in cids {
        let range =
            index.offsets[cid as usize] as usize..index.offsets[cid as usize + 1] as usize;
        let pos = index.members[range.clone()]
            .iter()
            .position(|&m| m == id)
            .expect("inverted index names a clique without the node");
        index.members[range.start + pos] = TOMBSTONE;
        index.live_sizes[cid as usize] -= 1;

        if (index.live_size(cid) as usize) < index.tau() as usize {
            let survivors: Vec<u32> = index.live_members(cid).collect();
            retire_clique(index, cid);
            dissolved_survivors.extend(survivors);
        }
    }

    dissolved_survivors.sort_unstable();
    dissolved_survivors.dedup();
    for (i, survivor) in dissolved_survivors.into_iter().enumerate() {
        if !index.node_to_cliques[survivor as usize].is_empty() {
            continue; // still covered by another clique
        }
        let r = neighborhood(index, dataset, dataset.vector(survivor), rng_seed ^ (i as u64 + 1))?;
        mine_from_set(index, dataset, survivor, &r, params);
    }
    Ok(())
}

/// Physically remove deleted rows and retired cliques: rows shift down,
/// node ids are remapped densely, tombstones disappear. Returns the
/// old-id -> new-id map (u32::MAX for removed ids).
pub fn compact(index: &mut CliqueIndex, dataset: &mut Dataset) -> Result<Vec<u32>> {
    if index.n() != dataset.n() {
        return Err(Error::ShapeMismatch(format!(
            "index n {} vs dataset n {}",
            index.n(),
            dataset.n()
        )));
    }
    let remap = dataset.retain_rows(&index.dead_nodes)?;
    let live_n = dataset.n();

    let mut offsets: Vec<u64> = Vec::with_capacity(index.clique_count() + 1);
    let mut members: Vec<u32> = Vec::with_capacity(index.members.len());
    let mut pseudo = Bitmap::new(0);
    let mut live_sizes: Vec<u32> = Vec::new();
    offsets.push(0);
    for cid in 0..index.clique_count() as u32 {
        if index.is_dead_clique(cid) {
            continue;
        }
        let start = members.len();
        for m in index.live_members(cid) {
            let new_id = remap[m as usize];
            debug_assert_ne!(new_id, u32::MAX, "live clique holds a deleted node");
            members.push(new_id);
        }
        debug_assert!(members[start..].windows(2).all(|w| w[0] < w[1]));
        offsets.push(members.len() as u64);
        live_sizes.push((members.len() - start) as u32);
        pseudo.push(index.kind(cid) == CliqueKind::Pseudo);
    }

    let cc = live_sizes.len();
    let mut node_to_cliques: Vec<Vec<u32>> = vec![Vec::new(); live_n];
    for cid in 0..cc {
        for i in offsets[cid] as usize..offsets[cid + 1] as usize {
            node_to_cliques[members[i] as usize].push(cid as u32);
        }
    }

    index.n = live_n;
    index.offsets = offsets;
    index.members = members;
    index.pseudo = pseudo;
    index.dead_cliques = Bitmap::new(cc);
    index.live_sizes = live_sizes;
    index.node_to_cliques = node_to_cliques;
    index.dead_nodes = Bitmap::new(live_n);
    index.meta = None;
    Ok(remap)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::build::build;
    use crate::eval::gen_uniform;
    use crate::knng::exact_knn;
    use crate::predicate::{Predicate, Query};
    use crate::search::search;

    fn setup(n: usize, seed: u64) -> (Dataset, CliqueIndex, BuildParams) {
        let ds = gen_uniform(n, 8, seed).unwrap();
        let knng = exact_knn(&ds, 16).unwrap();
        let params = BuildParams {
            k_prime: 16,
            tau: 4,
            supercenter_fraction: 1.0,
            ..Default::default()
        };
        let index = build(&ds, &knng, &params, 1).unwrap();
        (ds, index, params)
    }

    #[test]
    fn insert_duplicate_joins_overlapping_cliques() {
        let (mut ds, mut index, params) = setup(300, 21);
        let target = 17u32;
        let dup = ds.vector(target).to_vec();
        // Oracle R from the same retrieval the implementation uses.
        let r = neighborhood(&index, &ds, &dup, 33).unwrap();
        let mut in_r = Bitmap::new(300);
        for &id in &r {
            in_r.set(id as usize);
        }
        let expected_joins: Vec<u32> = index
            .cliques_of(target)
            .iter()
            .copied()
            .filter(|&cid| {
                let size = index.live_size(cid) as usize;
                let overlap =
                    index.live_members(cid).filter(|&m| in_r.get(m as usize)).count();
                overlap >= (size as f64).sqrt().ceil() as usize
            })
            .collect();

        let before: Vec<Vec<u32>> = expected_joins
            .iter()
            .map(|&cid| index.live_members(cid).collect())
            .collect();
        let u = insert_node(&mut index, &mut ds, &dup, FeatureValue::None, &params, 33).unwrap();
        index.validate_structure().unwrap();
        // Every expected clique now exists in extended form with u appended.
        for old in before {
            let mut want = old.clone();
            want.push(u);
            let found = index.cliques_of(u).iter().any(|&cid| {
                index.live_members(cid).collect::<Vec<u32>>() == want
            });
            assert!(found, "clique {old:?} was not extended with {u}");
        }
        assert!(!index.cliques_of(u).is_empty());
    }

    #[test]
    fn insert_outlier_still_gets_covered() {
        let (mut ds, mut index, params) = setup(200, 5);
        let far = vec![1000.0f32; 8];
        let u = insert_node(&mut index, &mut ds, &far, FeatureValue::None, &params, 1).unwrap();
        index.validate_structure().unwrap();
        assert!(!index.cliques_of(u).is_empty(), "outlier left uncovered");
    }

    #[test]
    fn delete_restores_coverage_for_survivors() {
        let (ds, mut index, params) = setup(250, 9);
        // Delete nodes until some clique dissolves, then check coverage.
        for id in [3u32, 40, 77, 120, 199] {
            delete_node(&mut index, &ds, id, &params, 7).unwrap();
        }
        index.validate_structure().unwrap();
        for u in 0..250u32 {
            if !index.is_dead_node(u) {
                assert!(!index.cliques_of(u).is_empty(), "live node {u} uncovered");
            }
        }
    }

    #[test]
    fn delete_unknown_or_twice_errors() {
        let (ds, mut index, params) = setup(100, 2);
        assert!(matches!(
            delete_node(&mut index, &ds, 100, &params, 0),
            Err(Error::NotFound(100))
        ));
        delete_node(&mut index, &ds, 5, &params, 0).unwrap();
        assert!(matches!(
            delete_node(&mut index, &ds, 5, &params, 0),
            Err(Error::NotFound(5))
        ));
    }

    #[test]
    fn deleted_ids_never_returned() {
        let (ds, mut index, params) = setup(300, 13);
        let victims: Vec<u32> = (0..40).map(|i| i * 7).collect();
        for &v in &victims {
            delete_node(&mut index, &ds, v, &params, 3).unwrap();
        }
        let q = Query::new(ds.vector(1).to_vec(), Predicate::AlwaysTrue);
        let sp = SearchParams { k: 20, l_s: 60, epsilon: 1.0, rng_seed: 4 };
        let (got, _) = search(&index, &ds, &q, &sp).unwrap();
        for &(id, _) in &got {
            assert!(!victims.contains(&id), "deleted id {id} returned");
        }
    }

    #[test]
    fn compact_remaps_and_validates() {
        let (mut ds, mut index, params) = setup(150, 31);
        for id in [0u32, 10, 20, 30] {
            delete_node(&mut index, &ds, id, &params, 11).unwrap();
        }
        let kept_vec = ds.vector(31).to_vec();
        let remap = compact(&mut index, &mut ds).unwrap();
        assert_eq!(index.n(), 146);
        assert_eq!(ds.n(), 146);
        assert_eq!(remap[0], u32::MAX);
        assert_eq!(ds.vector(remap[31]), kept_vec.as_slice());
        index.validate_structure().unwrap();
        assert_eq!(index.dead_nodes().count_ones(), 0);
        assert!(index.members.iter().all(|&m| m != TOMBSTONE));
    }
}
