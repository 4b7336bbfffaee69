//! Synthetic datasets, workload generation with controlled selectivity,
//! recall metrics, the distance-concentration probe, and the QPS benchmark
//! loop.
//!
//! Ground truth always comes from the exact filtered scan
//! ([`crate::baselines::prefilter_bruteforce`]), never from the index under
//! test, and every generator is deterministic in its seed.

use std::collections::HashMap;
use std::time::Instant;

use rand::seq::index::sample as index_sample;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, StandardNormal, Zipf};
use serde::{Deserialize, Serialize};

use crate::baselines::prefilter_bruteforce;
use crate::build::CliqueIndex;
use crate::dataset::{Dataset, Features};
use crate::distance::sq_l2;
use crate::error::{Error, Result};
use crate::predicate::{evaluate_mask, selectivity, Predicate, Query};
use crate::search::{search, SearchParams};

/// Uniform points in the unit cube.
pub fn gen_uniform(n: usize, dim: usize, seed: u64) -> Result<Dataset> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut vectors = vec![0.0f32; n * dim];
    for v in vectors.iter_mut() {
        *v = rng.random_range(0.0..1.0);
    }
    Dataset::new(vectors, dim)
}

/// Standard Gaussian points (used by the concentration probe, where the
/// distance distribution matters more than the support).
pub fn gen_gaussian(n: usize, dim: usize, seed: u64) -> Result<Dataset> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut vectors = vec![0.0f32; n * dim];
    for v in vectors.iter_mut() {
        *v = rng.sample(StandardNormal);
    }
    Dataset::new(vectors, dim)
}

/// Gaussian blobs around uniformly placed centers; each point picks a
/// cluster uniformly and adds N(0, spread) per coordinate.
pub fn gen_clustered(n: usize, dim: usize, clusters: usize, spread: f32, seed: u64) -> Result<Dataset> {
    if clusters == 0 {
        return Err(Error::param("clusters", "must be at least 1"));
    }
    if !spread.is_finite() || spread <= 0.0 {
        return Err(Error::param("spread", "must be finite and positive"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut centers = vec![0.0f32; clusters * dim];
    for c in centers.iter_mut() {
        *c = rng.random_range(0.0..1.0);
    }
    let noise = Normal::new(0.0f32, spread).expect("spread validated above");
    let mut vectors = vec![0.0f32; n * dim];
    for i in 0..n {
        let c = rng.random_range(0..clusters);
        for d in 0..dim {
            vectors[i * dim + d] = centers[c * dim + d] + noise.sample(&mut rng);
        }
    }
    Dataset::new(vectors, dim)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum WorkloadKind {
    #[serde(rename = "mixed-zipf-labels")]
    MixedZipfLabels,
    #[serde(rename = "fixed-range")]
    FixedRange,
    #[serde(rename = "fixed-label")]
    FixedLabel,
}

/// Queries with exact filtered ground truth and recorded selectivities.
#[derive(Debug, Clone)]
pub struct Workload {
    pub kind: WorkloadKind,
    pub queries: Vec<Query>,
    /// Exact filtered top-`gt_k` ids per query, (distance, id) ascending.
    pub ground_truth: Vec<Vec<u32>>,
    pub selectivities: Vec<f64>,
    pub gt_k: usize,
    pub seed: u64,
}

impl Workload {
    pub fn len(&self) -> usize {
        self.queries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.queries.is_empty()
    }
}

/// Query vector: a random data row plus small Gaussian jitter, so queries
/// land in populated regions without duplicating a stored point.
fn jittered_row(dataset: &Dataset, rng: &mut ChaCha8Rng) -> Vec<f32> {
    let row = rng.random_range(0..dataset.n() as u32);
    let noise = Normal::new(0.0f32, 0.01).expect("constant sd");
    dataset
        .vector(row)
        .iter()
        .map(|&x| x + noise.sample(rng))
        .collect()
}

fn finish_workload(
    dataset: &Dataset,
    kind: WorkloadKind,
    queries: Vec<Query>,
    gt_k: usize,
    seed: u64,
) -> Result<Workload> {
    let mut ground_truth = Vec::with_capacity(queries.len());
    let mut selectivities = Vec::with_capacity(queries.len());
    for q in &queries {
        let mask = evaluate_mask(dataset, q)?;
        selectivities.push(selectivity(&mask, dataset.n()));
        let top = prefilter_bruteforce(dataset, q, gt_k)?;
        ground_truth.push(top.into_iter().map(|(id, _)| id).collect());
    }
    Ok(Workload { kind, queries, ground_truth, selectivities, gt_k, seed })
}

/// Assign each point one label drawn from Zipf(`zipf_s`) over
/// `num_labels` ranks (labels are 1-based; label 1 is the heaviest), then
/// generate label-match queries whose labels follow the same law. The
/// resulting selectivities span a wide mixed range.
pub fn gen_zipf_label_workload(
    dataset: &mut Dataset,
    num_labels: usize,
    zipf_s: f64,
    num_queries: usize,
    gt_k: usize,
    seed: u64,
) -> Result<Workload> {
    if num_labels == 0 {
        return Err(Error::param("num_labels", "must be at least 1"));
    }
    if num_queries == 0 || gt_k == 0 {
        return Err(Error::param("num_queries", "queries and gt_k must be at least 1"));
    }
    let zipf = Zipf::new(num_labels as f64, zipf_s)
        .map_err(|e| Error::param("zipf_s", format!("invalid Zipf parameters: {e}")))?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);

    let n = dataset.n();
    let mut offsets = Vec::with_capacity(n + 1);
    let mut labels = Vec::with_capacity(n);
    offsets.push(0u32);
    for _ in 0..n {
        labels.push(zipf.sample(&mut rng) as u32);
        offsets.push(labels.len() as u32);
    }
    dataset.set_features(Features::LabelSets { offsets, labels })?;

    let mut queries = Vec::with_capacity(num_queries);
    for _ in 0..num_queries {
        let label = zipf.sample(&mut rng) as u32;
        let vector = jittered_row(dataset, &mut rng);
        queries.push(Query::new(vector, Predicate::LabelMatch { label }));
    }
    finish_workload(dataset, WorkloadKind::MixedZipfLabels, queries, gt_k, seed)
}

/// Attach a uniform[0,1) scalar to each point and generate range queries
/// whose empirical selectivity hits each target within 10% relative error:
/// the interval spans exactly round(target*n) consecutive values of the
/// sorted scalars, placed uniformly at random. Target 1.0 maps to [0,1).
pub fn gen_range_workload(
    dataset: &mut Dataset,
    target_selectivities: &[f64],
    per_target: usize,
    gt_k: usize,
    seed: u64,
) -> Result<Workload> {
    let n = dataset.n();
    if target_selectivities.is_empty() || per_target == 0 || gt_k == 0 {
        return Err(Error::param("target_selectivities", "need targets, per_target >= 1, gt_k >= 1"));
    }
    for &s in target_selectivities {
        if !(s > 0.0 && s <= 1.0) {
            return Err(Error::param("target_selectivities", "targets must lie in (0, 1]"));
        }
        // round(s*n) is within 10% relative of s*n only when s*n >= 5.
        if s < 1.0 && s * (n as f64) < 5.0 {
            return Err(Error::param(
                "target_selectivities",
                "target * n below 5: not controllable within 10%",
            ));
        }
    }

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let scalars: Vec<f64> = (0..n).map(|_| rng.random_range(0.0..1.0)).collect();
    dataset.set_features(Features::Scalars(scalars.clone()))?;
    let mut sorted = scalars;
    sorted.sort_unstable_by(f64::total_cmp);

    let mut queries = Vec::with_capacity(target_selectivities.len() * per_target);
    for &s in target_selectivities {
        for _ in 0..per_target {
            let (lo, hi) = if s >= 1.0 {
                (0.0, 1.0)
            } else {
                let t = ((s * n as f64).round() as usize).max(1);
                let r = rng.random_range(0..=n - t);
                let lo = sorted[r];
                let hi = if r + t < n { sorted[r + t] } else { 1.0 };
                (lo, hi)
            };
            let vector = jittered_row(dataset, &mut rng);
            queries.push(Query::new(vector, Predicate::ScalarRange { lo, hi }));
        }
    }
    finish_workload(dataset, WorkloadKind::FixedRange, queries, gt_k, seed)
}

/// Recall@k: fraction of the exact top-k recovered. Both lists are
/// truncated to their first k entries; the denominator is always k, so
/// predicates with fewer than k valid points cap recall below 1 by design.
pub fn recall_at_k(result: &[u32], truth: &[u32], k: usize) -> f64 {
    if k == 0 {
        return 0.0;
    }
    let result = &result[..result.len().min(k)];
    let truth = &truth[..truth.len().min(k)];
    let hits = result.iter().filter(|id| truth.contains(id)).count();
    hits as f64 / k as f64
}

/// One benchmark grid point, mirroring the CSV schema.
#[derive(Debug, Clone, Serialize)]
pub struct BenchRow {
    pub dataset: String,
    pub n: usize,
    pub dim: usize,
    pub k_prime: u32,
    pub tau: u32,
    pub l_s: usize,
    pub epsilon: f64,
    pub threads: usize,
    pub recall_at_k: f64,
    pub qps: f64,
    pub mean_dist_comps: f64,
    pub mean_selectivity: f64,
}

pub const CSV_HEADER: &str =
    "dataset,n,dim,k_prime,tau,l_s,epsilon,threads,recall_at_k,qps,mean_dist_comps,mean_selectivity";

impl BenchRow {
    pub fn csv_line(&self) -> String {
        format!(
            "{},{},{},{},{},{},{},{},{:.6},{:.3},{:.3},{:.6}",
            self.dataset,
            self.n,
            self.dim,
            self.k_prime,
            self.tau,
            self.l_s,
            self.epsilon,
            self.threads,
            self.recall_at_k,
            self.qps,
            self.mean_dist_comps,
            self.mean_selectivity,
        )
    }
}

pub fn to_csv(rows: &[BenchRow]) -> String {
    let mut out = String::from(CSV_HEADER);
    for row in rows {
        out.push('\n');
        out.push_str(&row.csv_line());
    }
    out.push('\n');
    out
}

/// Per-query seed: decorrelated from the grid point's base seed so thread
/// scheduling cannot influence results.
fn query_seed(base: u64, qi: usize) -> u64 {
    base.wrapping_add((qi as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15))
}

/// Run the whole workload at each grid point on a pool of `threads`
/// threads. Timing uses a warm pass followed by three measured passes,
/// keeping the best (QPS is throughput under warm caches). Recall is
/// measured once; results are seed-deterministic regardless of threads.
pub fn bench(
    index: &CliqueIndex,
    dataset: &Dataset,
    workload: &Workload,
    grid: &[SearchParams],
    threads: usize,
    dataset_name: &str,
) -> Result<Vec<BenchRow>> {
    if workload.is_empty() {
        return Err(Error::param("workload", "no queries"));
    }
    if threads == 0 {
        return Err(Error::param("threads", "must be at least 1"));
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .map_err(|e| Error::param("threads", format!("failed to build thread pool: {e}")))?;

    let nq = workload.len();
    let mut rows = Vec::with_capacity(grid.len());
    for point in grid {
        if point.k > workload.gt_k {
            return Err(Error::param("k", "grid k exceeds workload gt_k"));
        }
        use rayon::prelude::*;
        // Measured pass: recall and dist-comp tallies (also warms caches).
        let tallies: Vec<(f64, f64)> = pool.install(|| {
            (0..nq)
                .into_par_iter()
                .map(|qi| {
                    let mut p = point.clone();
                    p.rng_seed = query_seed(point.rng_seed, qi);
                    let (res, stats) = search(index, dataset, &workload.queries[qi], &p)?;
                    let ids: Vec<u32> = res.into_iter().map(|(id, _)| id).collect();
                    let r = recall_at_k(&ids, &workload.ground_truth[qi], p.k);
                    Ok((r, stats.dist_comps as f64))
                })
                .collect::<Result<Vec<_>>>()
        })?;

        let mut best = f64::INFINITY;
        for _ in 0..3 {
            let start = Instant::now();
            pool.install(|| {
                (0..nq)
                    .into_par_iter()
                    .map(|qi| {
                        let mut p = point.clone();
                        p.rng_seed = query_seed(point.rng_seed, qi);
                        search(index, dataset, &workload.queries[qi], &p).map(|_| ())
                    })
                    .collect::<Result<Vec<()>>>()
            })?;
            best = best.min(start.elapsed().as_secs_f64());
        }

        let mean_recall = tallies.iter().map(|t| t.0).sum::<f64>() / nq as f64;
        let mean_comps = tallies.iter().map(|t| t.1).sum::<f64>() / nq as f64;
        let mean_sel = workload.selectivities.iter().sum::<f64>() / nq as f64;
        rows.push(BenchRow {
            dataset: dataset_name.to_string(),
            n: dataset.n(),
            dim: dataset.dim(),
            k_prime: index.k_prime(),
            tau: index.tau(),
            l_s: point.l_s,
            epsilon: point.epsilon,
            threads,
            recall_at_k: mean_recall,
            qps: nq as f64 / best,
            mean_dist_comps: mean_comps,
            mean_selectivity: mean_sel,
        });
    }
    Ok(rows)
}

/// Outcome of the distance-concentration probe.
#[derive(Debug, Clone, Serialize)]
pub struct ProbeReport {
    /// Estimated mean over standard deviation of pairwise distances.
    pub mu_over_sigma: f64,
    /// The concentration bound sqrt(2 ln n) the ratio is compared against.
    pub bound: f64,
    /// Whether mu/sigma exceeds the bound.
    pub hypothesis: bool,
    /// Among ordered pairs (v, w) of k-nearest neighbors of a random
    /// center u with d(v,w) <= alpha * d(u, nn(u)): fraction where v is
    /// itself a k-nearest neighbor of w. None when no pair qualified.
    pub transitivity_rate: Option<f64>,
    pub qualifying_pairs: usize,
}

/// k smallest (distance, id) neighbors of `u` by full scan, plus the
/// nearest-neighbor distance. Ties break toward smaller id.
fn knn_scan(dataset: &Dataset, u: u32, k: usize) -> (Vec<u32>, f64) {
    let mut dists: Vec<(f32, u32)> = (0..dataset.n() as u32)
        .filter(|&v| v != u)
        .map(|v| (sq_l2(dataset.vector(u), dataset.vector(v)), v))
        .collect();
    let k = k.min(dists.len());
    dists.select_nth_unstable_by(k - 1, |a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
    let mut head: Vec<(f32, u32)> = dists[..k].to_vec();
    head.sort_unstable_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
    let nn_dist = (head[0].0 as f64).sqrt();
    let mut ids: Vec<u32> = head.into_iter().map(|(_, v)| v).collect();
    ids.sort_unstable();
    (ids, nn_dist)
}

/// Monte Carlo check of the neighbor-transitivity claim on standard
/// Gaussian data: estimates how concentrated pairwise distances are and,
/// for close pairs inside random k-NN neighborhoods, how often closeness
/// promotes to actual k-NN membership.
pub fn concentration_probe(
    dim: usize,
    n: usize,
    k: usize,
    alpha: f64,
    trials: usize,
    seed: u64,
) -> Result<ProbeReport> {
    if dim < 2 {
        return Err(Error::param("dim", "probe needs dim >= 2"));
    }
    if n < 3 || k == 0 || k >= n || trials == 0 {
        return Err(Error::param("n", "need n >= 3, 1 <= k < n, trials >= 1"));
    }
    if alpha.is_nan() || alpha < 0.0 {
        return Err(Error::param("alpha", "must be non-negative"));
    }
    let dataset = gen_gaussian(n, dim, seed)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed.wrapping_add(0x517c_c1b7_2722_0a95));

    // Pairwise-distance moments from sampled pairs.
    let pairs = 100_000usize.min(n * (n - 1) / 2);
    let (mut sum, mut sum_sq) = (0.0f64, 0.0f64);
    for _ in 0..pairs {
        let i = rng.random_range(0..n as u32);
        let mut j = rng.random_range(0..n as u32 - 1);
        if j >= i {
            j += 1;
        }
        let d = (sq_l2(dataset.vector(i), dataset.vector(j)) as f64).sqrt();
        sum += d;
        sum_sq += d * d;
    }
    let mu = sum / pairs as f64;
    let var = (sum_sq / pairs as f64 - mu * mu).max(0.0);
    let sigma = var.sqrt();
    let bound = (2.0 * (n as f64).ln()).sqrt();
    let mu_over_sigma = if sigma > 0.0 { mu / sigma } else { f64::INFINITY };

    let mut knn_cache: HashMap<u32, Vec<u32>> = HashMap::new();
    let centers = index_sample(&mut rng, n, trials.min(n));
    let mut qualifying = 0usize;
    let mut transitive = 0usize;
    for u in centers {
        let u = u as u32;
        let (neigh, nn_dist) = knn_scan(&dataset, u, k);
        let threshold = alpha * nn_dist;
        for &v in &neigh {
            for &w in &neigh {
                if v == w {
                    continue;
                }
                let d = (sq_l2(dataset.vector(v), dataset.vector(w)) as f64).sqrt();
                if d <= threshold {
                    qualifying += 1;
                    let w_neigh = knn_cache
                        .entry(w)
                        .or_insert_with(|| knn_scan(&dataset, w, k).0);
                    if w_neigh.binary_search(&v).is_ok() {
                        transitive += 1;
                    }
                }
            }
        }
    }
    let transitivity_rate = if qualifying > 0 {
        Some(transitive as f64 / qualifying as f64)
    } else {
        None
    };
    Ok(ProbeReport {
        mu_over_sigma,
        bound,
        hypothesis: mu_over_sigma > bound,
        transitivity_rate,
        qualifying_pairs: qualifying,
    })
}
