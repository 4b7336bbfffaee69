//! Reference strategies: exact pre-filtered scan (the ground-truth oracle)
//! and post-filtering over an unfiltered index search.

use crate::bits::Bitmap;
use crate::build::CliqueIndex;
use crate::dataset::Dataset;
use crate::distance::sq_l2;
use crate::error::Result;
use crate::predicate::{evaluate_mask, Predicate, Query};
use crate::search::{search, SearchParams};

/// Exact filtered top-k by scanning every mask-true node. `(node, squared
/// distance)` ascending, ties to the smaller id.
pub fn prefilter_scan(
    dataset: &Dataset,
    vq: &[f32],
    mask: &Bitmap,
    k: usize,
) -> Vec<(u32, f32)> {
    let mut best: Vec<(f32, u32)> = Vec::with_capacity(k + 1);
    for i in mask.iter_ones() {
        let d = sq_l2(vq, dataset.vector(i as u32));
        let kv = (d, i as u32);
        let pos = best.partition_point(|&(bd, bi)| {
            bd.total_cmp(&kv.0).then(bi.cmp(&kv.1)).is_lt()
        });
        if pos < k {
            best.insert(pos, kv);
            best.truncate(k);
        }
    }
    best.into_iter().map(|(d, i)| (i, d)).collect()
}

/// Exact filtered top-k: evaluates the predicate, then scans the valid
/// subset. This is the recall oracle for the whole crate.
pub fn prefilter_bruteforce(dataset: &Dataset, query: &Query, k: usize) -> Result<Vec<(u32, f32)>> {
    let mask = evaluate_mask(dataset, query)?;
    Ok(prefilter_scan(dataset, &query.vector, &mask.bits, k))
}

/// Post-filtering baseline: run an unfiltered search for
/// `ceil(k * expansion)` candidates, drop predicate-false ones, keep the
/// first k. Collapses when selectivity is small relative to 1/expansion.
pub fn postfilter_search(
    index: &CliqueIndex,
    dataset: &Dataset,
    query: &Query,
    k: usize,
    expansion: f64,
    epsilon: f64,
    rng_seed: u64,
) -> Result<Vec<(u32, f32)>> {
    let wide = ((k as f64 * expansion).ceil() as usize).max(k);
    let unfiltered = Query::new(query.vector.clone(), Predicate::AlwaysTrue);
    let params = SearchParams { k: wide, l_s: wide, epsilon, rng_seed };
    let (candidates, _) = search(index, dataset, &unfiltered, &params)?;
    let mask = evaluate_mask(dataset, query)?;
    Ok(candidates
        .into_iter()
        .filter(|&(id, _)| mask.bits.get(id as usize))
        .take(k)
        .collect())
}
