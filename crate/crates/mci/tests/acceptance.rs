//! Acceptance suite. One test per shipping criterion; the harness line
//! (`criterion_NN_... ok|FAILED`) is the pass/fail verdict for that
//! criterion. Tolerances are pinned as consts below, measured values are
//! printed so a failing line carries its evidence.
//!
//! Most criteria share one 20k-point clustered bundle (built once behind a
//! `LazyLock`): exact 100-NN graph, an index at k' = 100 / tau = 14, a
//! 200-query label workload and three range workloads. The toy criteria
//! use small frozen fixtures with hand-checked covers.

use std::collections::HashSet;
use std::sync::LazyLock;
use std::time::Instant;

use rand::prelude::*;
use rand_chacha::ChaCha8Rng;
use rand_distr::Distribution;

use mci::baselines::prefilter_bruteforce;
use mci::build::coverage_curve;
use mci::eval::{
    concentration_probe, gen_clustered, gen_range_workload, gen_uniform,
    gen_zipf_label_workload, recall_at_k, Workload,
};
use mci::knng::graph_recall;
use mci::update::{compact, delete_node, insert_node};
use mci::{
    build, exact_knn, nn_descent, search, BuildParams, CliqueIndex, Dataset, Error,
    FeatureValue, KnnGraph, SearchParams,
};

// Pinned tolerances. Changing any of these changes what "accepted" means.
const RECALL_FLOOR_ZIPF: f64 = 0.95; // R@10, label workload, l_s=160, eps=1
const RECALL_FLOOR_RANGE: f64 = 0.90; // R@10, selectivity-0.01 range workload
const MONOTONE_SLACK: f64 = 0.005; // allowed recall dip while l_s grows
const COMPS_SLACK: f64 = 0.5; // allowed mean dist-comp dip while l_s grows
const EPS_GAP_MIN_LOW_SEL: f64 = 0.003; // seeds must matter at s=0.005
const EPS_GAP_MAX_HIGH_SEL: f64 = 0.01; // and must not matter at s=0.5
const PROBE_RATE_FLOOR: f64 = 0.95; // neighbor-transitivity rate, dim=512
const COVERAGE_MAX_UNCOVERED_AT_2_4: f64 = 0.40;
const PARALLEL_SPEEDUP_MIN: f64 = 3.0; // 8 threads vs 1, gated on >= 8 cores
const GRAPH_RECALL_FLOOR: f64 = 0.67; // approximate-graph quality gate
const GRAPH_SWAP_TOL: f64 = 0.02; // index recall drift across graph sources
const UPDATE_DEGRADE_TOL: f64 = 0.05; // R@10 drift after +1k/-1k churn

// Shared bundle shape.
const N: usize = 20_000;
const DIM: usize = 64;
const CLUSTERS: usize = 25;
const SPREAD: f32 = 0.5;
const K_PRIME: usize = 100;
const TAU: usize = 14;
const QUERIES: usize = 200;
const GT_K: usize = 10;
const OP_L_S: usize = 160; // operating point for the recall floors
const DATA_SEED: u64 = 0x5EED_DA7A;

fn bundle_params() -> BuildParams {
    BuildParams { k_prime: K_PRIME, tau: TAU, ..BuildParams::default() }
}

struct Bundle {
    base: Dataset,
    knng: KnnGraph,
    index: CliqueIndex,
    ds_zipf: Dataset,
    w_zipf: Workload,
    ds_r001: Dataset,
    w_r001: Workload,
    ds_r0005: Dataset,
    w_r0005: Workload,
    ds_r05: Dataset,
    w_r05: Workload,
}

static BUNDLE: LazyLock<Bundle> = LazyLock::new(|| {
    let base = gen_clustered(N, DIM, CLUSTERS, SPREAD, DATA_SEED).unwrap();
    let knng = exact_knn(&base, K_PRIME).unwrap();
    let index = build(&base, &knng, &bundle_params(), 1).unwrap();

    let mut ds_zipf = base.clone();
    let w_zipf = gen_zipf_label_workload(&mut ds_zipf, 12, 1.0, QUERIES, GT_K, 0x51F7).unwrap();
    let mut ds_r001 = base.clone();
    let w_r001 = gen_range_workload(&mut ds_r001, &[0.01], QUERIES, GT_K, 0xAA01).unwrap();
    let mut ds_r0005 = base.clone();
    let w_r0005 = gen_range_workload(&mut ds_r0005, &[0.005], QUERIES, GT_K, 0xAA02).unwrap();
    let mut ds_r05 = base.clone();
    let w_r05 = gen_range_workload(&mut ds_r05, &[0.5], QUERIES, GT_K, 0xAA03).unwrap();

    Bundle { base, knng, index, ds_zipf, w_zipf, ds_r001, w_r001, ds_r0005, w_r0005, ds_r05, w_r05 }
});

/// Mean (Recall@k, distance computations) of a workload replay.
fn run_workload(
    index: &CliqueIndex,
    dataset: &Dataset,
    workload: &Workload,
    k: usize,
    l_s: usize,
    epsilon: f64,
) -> (f64, f64) {
    let mut recall_sum = 0.0;
    let mut comps_sum = 0.0;
    for (qi, query) in workload.queries.iter().enumerate() {
        let params = SearchParams {
            k,
            l_s,
            epsilon,
            rng_seed: workload.seed.wrapping_add((qi as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15)),
        };
        let (hits, stats) = search(index, dataset, query, &params).unwrap();
        let ids: Vec<u32> = hits.iter().map(|&(id, _)| id).collect();
        recall_sum += recall_at_k(&ids, &workload.ground_truth[qi], k);
        comps_sum += stats.dist_comps as f64;
    }
    (recall_sum / workload.len() as f64, comps_sum / workload.len() as f64)
}

fn knn_row_sets(graph: &KnnGraph) -> Vec<HashSet<u32>> {
    (0..graph.n() as u32)
        .map(|i| graph.neighbors(i).iter().map(|&(id, _)| id).collect())
        .collect()
}

/// (sorted members, center, round) per live clique.
fn clique_summaries(index: &CliqueIndex) -> Vec<(Vec<u32>, u32, u32)> {
    let meta = index.meta.as_ref().expect("fresh build carries its audit");
    let mut out: Vec<(Vec<u32>, u32, u32)> = (0..index.clique_count() as u32)
        .filter(|&cid| !index.is_dead_clique(cid))
        .map(|cid| {
            let mut members: Vec<u32> = index.live_members(cid).collect();
            members.sort_unstable();
            let audit = &meta.audit[cid as usize];
            (members, audit.center, audit.round)
        })
        .collect();
    out.sort();
    out
}

// Six points on a sphere-ish layout: two size-4 cliques sharing the edge
// {2,4}. All coordinates are exact f32 literals; nearest-neighbor margins
// were checked to be > 0.06 so the cover is stable under f32 rounding.
const SIX_POINTS: [[f32; 3]; 6] = [
    [0.513, 0.858_025, 0.005],
    [0.489, 0.295_675, 0.825_497],
    [0.006, 0.012, -0.007],
    [0.491, -0.879_025, 0.004],
    [1.008, 0.005, 0.011],
    [0.488, -0.279_675, -0.822_497],
];

// Nine points exercising both per-center outcomes in one build: center 0
// mines one triangle in round 1, center 2 mines two cliques from one local
// graph, and node 3 is only covered by the widened round-2 threshold.
const NINE_POINTS: [[f32; 3]; 9] = [
    [0.0, 0.0, 0.0],
    [2.471, -0.05, 0.072],
    [1.811, -0.086, 1.123],
    [2.9, 0.751, 2.318],
    [1.0, 0.0, 0.0],
    [1.773, 0.973, 2.362],
    [1.808, 0.92, 0.268],
    [2.688, -0.876, 0.263],
    [0.5, 0.866, 0.0],
];

fn fixture_dataset(points: &[[f32; 3]]) -> Dataset {
    Dataset::new(points.iter().flatten().copied().collect(), 3).unwrap()
}

#[test]
fn criterion_01_six_point_cover_is_exact() {
    let started = Instant::now();
    let ds = fixture_dataset(&SIX_POINTS);
    let knng = exact_knn(&ds, 3).unwrap();

    let expected_rows: [&[u32]; 6] =
        [&[1, 2, 4], &[0, 2, 4], &[0, 4, 5], &[2, 4, 5], &[0, 1, 2], &[2, 3, 4]];
    for (i, row) in knn_row_sets(&knng).into_iter().enumerate() {
        let want: HashSet<u32> = expected_rows[i].iter().copied().collect();
        assert_eq!(row, want, "3-NN set of node {i} drifted; fixture no longer frozen");
    }

    let params = BuildParams { k_prime: 3, tau: 3, supercenter_fraction: 1.0, ..BuildParams::default() };
    let index = build(&ds, &knng, &params, 1).unwrap();
    index.validate_structure().unwrap();
    index.validate_geometry(&ds).unwrap();

    let members: Vec<Vec<u32>> = clique_summaries(&index).into_iter().map(|(m, _, _)| m).collect();
    assert_eq!(members, vec![vec![0, 1, 2, 4], vec![2, 3, 4, 5]]);
    assert_eq!(index.total_members(), 8);
    println!(
        "cover = {{0,1,2,4}}, {{2,3,4,5}}, total members = {}, elapsed = {:?}",
        index.total_members(),
        started.elapsed()
    );
    assert!(started.elapsed().as_secs() < 1);
}

#[test]
fn criterion_02_nine_point_build_trace_is_exact() {
    let started = Instant::now();
    let ds = fixture_dataset(&NINE_POINTS);
    let knng = exact_knn(&ds, 4).unwrap();

    let expected_rows: [&[u32]; 9] = [
        &[8, 4, 6, 2],
        &[7, 6, 2, 4],
        &[1, 6, 4, 7],
        &[5, 2, 6, 1],
        &[8, 0, 6, 2],
        &[3, 2, 6, 1],
        &[1, 4, 2, 8],
        &[1, 2, 4, 6],
        &[0, 4, 6, 2],
    ];
    for (i, row) in knn_row_sets(&knng).into_iter().enumerate() {
        let want: HashSet<u32> = expected_rows[i].iter().copied().collect();
        assert_eq!(row, want, "4-NN set of node {i} drifted; fixture no longer frozen");
    }

    let params = BuildParams { k_prime: 4, tau: 3, supercenter_fraction: 1.0, ..BuildParams::default() };
    let index = build(&ds, &knng, &params, 1).unwrap();
    index.validate_structure().unwrap();
    index.validate_geometry(&ds).unwrap();

    // (members, center, round): node 0's round-1 call yields one triangle,
    // node 2's yields two cliques, node 3 is covered only in round 2.
    let expected: Vec<(Vec<u32>, u32, u32)> = vec![
        (vec![0, 4, 8], 0, 1),
        (vec![1, 2, 3, 5, 6], 3, 2),
        (vec![1, 2, 4, 6], 2, 1),
        (vec![1, 2, 7], 2, 1),
    ];
    assert_eq!(clique_summaries(&index), expected);
    assert_eq!(index.total_members(), 15);

    // Every node covered; pool stays within the n * k' ceiling.
    assert_eq!(index.live_node_count(), 9);
    assert!(index.total_members() <= (9 * 4) as u64);
    println!(
        "4 cliques, total members = {}, effective out-degree = {:.3} (reference figure quotes 40/9 ~ 4.444 from a hand-drawn variant), elapsed = {:?}",
        index.total_members(),
        index.effective_out_degree(),
        started.elapsed()
    );
    assert!(started.elapsed().as_secs() < 1);
}

#[test]
fn criterion_03_invariants_hold_across_twenty_datasets() {
    let started = Instant::now();
    // (n, dim, clustered, seed); sizes weighted small so the sweep stays
    // inside its budget while still touching 20k builds at two dims.
    let grid: [(usize, usize, bool, u64); 20] = [
        (1000, 16, false, 1),
        (1000, 16, true, 2),
        (1000, 64, false, 3),
        (1000, 64, true, 4),
        (1000, 256, false, 5),
        (1000, 256, true, 6),
        (5000, 16, false, 7),
        (5000, 16, true, 8),
        (5000, 64, false, 9),
        (5000, 64, true, 10),
        (5000, 256, false, 11),
        (5000, 256, true, 12),
        (20_000, 16, false, 13),
        (20_000, 16, true, 14),
        (20_000, 64, false, 15),
        (20_000, 64, true, 16),
        (1000, 16, false, 17),
        (1000, 64, true, 18),
        (1000, 32, false, 19),
        (1000, 32, true, 20),
    ];
    let params = BuildParams { k_prime: 16, tau: 4, ..BuildParams::default() };
    for &(n, dim, clustered, seed) in &grid {
        let ds = if clustered {
            gen_clustered(n, dim, 20, SPREAD, seed).unwrap()
        } else {
            gen_uniform(n, dim, seed).unwrap()
        };
        let knng = exact_knn(&ds, params.k_prime).unwrap();
        let index = build(&ds, &knng, &params, 1).unwrap();
        index.validate_structure().unwrap_or_else(|e| {
            panic!("structure violated on n={n} dim={dim} clustered={clustered}: {e}")
        });
        index.validate_geometry(&ds).unwrap_or_else(|e| {
            panic!("geometry violated on n={n} dim={dim} clustered={clustered}: {e}")
        });
        assert!(index.total_members() <= (n * params.k_prime) as u64);
    }
    println!("20 builds validated in {:?}", started.elapsed());
    assert!(started.elapsed().as_secs() < 600);
}

#[test]
fn criterion_04_recall_floors_at_operating_point() {
    let started = Instant::now();
    let b = &*BUNDLE;
    let (zipf_recall, zipf_comps) = run_workload(&b.index, &b.ds_zipf, &b.w_zipf, GT_K, OP_L_S, 1.0);
    let (range_recall, range_comps) =
        run_workload(&b.index, &b.ds_r001, &b.w_r001, GT_K, OP_L_S, 1.0);
    println!(
        "label workload R@10 = {zipf_recall:.4} (comps {zipf_comps:.0}), \
         range-0.01 R@10 = {range_recall:.4} (comps {range_comps:.0}), elapsed = {:?}",
        started.elapsed()
    );
    assert!(
        zipf_recall >= RECALL_FLOOR_ZIPF,
        "label-workload recall {zipf_recall:.4} below floor {RECALL_FLOOR_ZIPF}"
    );
    assert!(
        range_recall >= RECALL_FLOOR_RANGE,
        "range-workload recall {range_recall:.4} below floor {RECALL_FLOOR_RANGE}"
    );
    assert!(started.elapsed().as_secs() < 300);
}

#[test]
fn criterion_05_beam_width_sweep_is_monotone() {
    let b = &*BUNDLE;
    let beams = [10usize, 20, 40, 80, 160];
    let mut rows = Vec::new();
    for &l_s in &beams {
        rows.push(run_workload(&b.index, &b.ds_zipf, &b.w_zipf, GT_K, l_s, 1.0));
    }
    for (&l_s, &(r, c)) in beams.iter().zip(&rows) {
        println!("l_s = {l_s:3}: R@10 = {r:.4}, mean comps = {c:.0}");
    }
    for w in rows.windows(2) {
        let (r0, c0) = w[0];
        let (r1, c1) = w[1];
        assert!(r1 >= r0 - MONOTONE_SLACK, "recall fell from {r0:.4} to {r1:.4} as l_s grew");
        assert!(c1 >= c0 - COMPS_SLACK, "mean comps fell from {c0:.1} to {c1:.1} as l_s grew");
    }
}

#[test]
fn criterion_06_seed_count_matters_only_at_low_selectivity() {
    let b = &*BUNDLE;
    let (low_wide, _) = run_workload(&b.index, &b.ds_r0005, &b.w_r0005, GT_K, OP_L_S, 1.0);
    let (low_narrow, _) = run_workload(&b.index, &b.ds_r0005, &b.w_r0005, GT_K, OP_L_S, 0.01);
    let (high_wide, _) = run_workload(&b.index, &b.ds_r05, &b.w_r05, GT_K, OP_L_S, 1.0);
    let (high_narrow, _) = run_workload(&b.index, &b.ds_r05, &b.w_r05, GT_K, OP_L_S, 0.01);
    let low_gap = low_wide - low_narrow;
    let high_gap = (high_wide - high_narrow).abs();
    println!(
        "s=0.005: R@10 {low_wide:.4} (eps=1) vs {low_narrow:.4} (eps=0.01), gap {low_gap:.4}; \
         s=0.5: {high_wide:.4} vs {high_narrow:.4}, |gap| {high_gap:.4}"
    );
    assert!(
        low_gap >= EPS_GAP_MIN_LOW_SEL,
        "at selectivity 0.005 the seed count should matter: gap {low_gap:.4} < {EPS_GAP_MIN_LOW_SEL}"
    );
    assert!(
        high_gap <= EPS_GAP_MAX_HIGH_SEL,
        "at selectivity 0.5 the seed count should not matter: gap {high_gap:.4} > {EPS_GAP_MAX_HIGH_SEL}"
    );
}

#[test]
fn criterion_07_neighbor_transitivity_probe() {
    let started = Instant::now();
    // Low dimension first: concentration must NOT hold there, and no rate
    // claim is made.
    let low = concentration_probe(2, 10_000, 50, 1.2, 20, 0xBEEF).unwrap();
    println!(
        "dim=2: mu/sigma = {:.2} vs bound {:.2}, hypothesis = {}, rate = {:?}",
        low.mu_over_sigma, low.bound, low.hypothesis, low.transitivity_rate
    );
    assert!(!low.hypothesis, "dim=2 should not satisfy the concentration hypothesis");

    let high = concentration_probe(512, 10_000, 50, 1.2, 20, 0xBEEF).unwrap();
    println!(
        "dim=512: mu/sigma = {:.2} vs bound {:.2}, hypothesis = {}, rate = {:?} over {} qualifying pairs, elapsed = {:?}",
        high.mu_over_sigma,
        high.bound,
        high.hypothesis,
        high.transitivity_rate,
        high.qualifying_pairs,
        started.elapsed()
    );
    assert!(high.hypothesis, "dim=512 should satisfy the concentration hypothesis");
    let rate = high.transitivity_rate.expect("dim=512 probe found no qualifying pairs");
    assert!(started.elapsed().as_secs() < 180);
    // Known-failing claim, kept honest: on real Gaussian clouds two
    // neighbors of u are near-orthogonal around u, so a pair close enough
    // to qualify (d(v,w) <= 1.2 * d(u, nn(u))) still usually sits outside
    // w's 50-NN radius. Measured rate is ~0.05, far from the claimed 0.95.
    assert!(
        rate >= PROBE_RATE_FLOOR,
        "transitivity rate {rate:.4} below claimed floor {PROBE_RATE_FLOOR}"
    );
}

#[test]
fn criterion_08_coverage_tightens_round_by_round() {
    let b = &*BUNDLE;
    let meta = b.index.meta.as_ref().expect("fresh build carries its audit");
    let curve = coverage_curve(meta);
    assert!(!curve.is_empty());
    println!(
        "{} cliques ({} pseudo), total members = {}, effective out-degree = {:.2}",
        b.index.live_clique_count(),
        b.index.pseudo_count(),
        b.index.total_members(),
        b.index.effective_out_degree()
    );
    for (alpha, uncovered) in &curve {
        println!("after alpha = {alpha:.2}: uncovered fraction {uncovered:.4}");
    }
    for w in curve.windows(2) {
        assert!(w[1].1 <= w[0].1 + 1e-12, "uncovered fraction rose between rounds");
    }
    // Fraction left after the alpha = 2.4 round (0 if the build finished
    // before reaching it).
    let at_2_4 = curve
        .iter()
        .find(|(alpha, _)| (*alpha - 2.4).abs() < 1e-9)
        .map_or_else(|| curve.last().unwrap().1, |&(_, u)| u);
    assert!(
        at_2_4 <= COVERAGE_MAX_UNCOVERED_AT_2_4,
        "uncovered fraction {at_2_4:.4} after alpha=2.4 exceeds {COVERAGE_MAX_UNCOVERED_AT_2_4}"
    );
    assert_eq!(curve.last().unwrap().1, 0.0, "build must end fully covered");
}

#[test]
fn criterion_09_parallel_build_is_equivalent_and_scales() {
    let b = &*BUNDLE;
    let params = bundle_params();

    let t1 = Instant::now();
    let single = build(&b.base, &b.knng, &params, 1).unwrap();
    let t1 = t1.elapsed();
    let t8 = Instant::now();
    let parallel = build(&b.base, &b.knng, &params, 8).unwrap();
    let t8 = t8.elapsed();

    // The 8-way build must satisfy every invariant of the sequential one
    // regardless of the machine it runs on.
    parallel.validate_structure().unwrap();
    parallel.validate_geometry(&b.base).unwrap();
    single.validate_structure().unwrap();
    assert_eq!(parallel.live_node_count(), b.base.n());
    assert!(parallel.total_members() <= (N * K_PRIME) as u64);

    let cores = std::thread::available_parallelism().map(|v| v.get()).unwrap_or(1);
    let speedup = t1.as_secs_f64() / t8.as_secs_f64().max(1e-9);
    println!(
        "1-thread build {t1:?}, 8-thread build {t8:?}, speedup {speedup:.2}x on {cores} core(s)"
    );
    if cores >= 8 {
        assert!(
            speedup >= PARALLEL_SPEEDUP_MIN,
            "8-thread speedup {speedup:.2}x below {PARALLEL_SPEEDUP_MIN}x"
        );
    } else {
        println!("speedup floor skipped: needs >= 8 cores, this host has {cores}");
    }
}

#[test]
fn criterion_10_approximate_graph_source_is_interchangeable() {
    let started = Instant::now();
    let b = &*BUNDLE;
    let approx = nn_descent(&b.base, K_PRIME, 8, 0.3, 0x00DD_BA11).unwrap();
    let quality = graph_recall(&approx, &b.knng).unwrap();
    println!("approximate graph recall@{K_PRIME} = {quality:.4} ({:?})", started.elapsed());
    assert!(
        quality >= GRAPH_RECALL_FLOOR,
        "approximate graph recall {quality:.4} below gate {GRAPH_RECALL_FLOOR}"
    );

    let index = build(&b.base, &approx, &bundle_params(), 1).unwrap();
    index.validate_structure().unwrap();
    let (swapped, _) = run_workload(&index, &b.ds_zipf, &b.w_zipf, GT_K, OP_L_S, 1.0);
    let (exact, _) = run_workload(&b.index, &b.ds_zipf, &b.w_zipf, GT_K, OP_L_S, 1.0);
    println!(
        "R@10 from approximate graph = {swapped:.4} vs exact graph = {exact:.4}, elapsed = {:?}",
        started.elapsed()
    );
    assert!(
        swapped >= exact - GRAPH_SWAP_TOL,
        "recall {swapped:.4} fell more than {GRAPH_SWAP_TOL} below the exact-graph index {exact:.4}"
    );
}

#[test]
fn criterion_11_expansion_rate_is_not_load_bearing() {
    let b = &*BUNDLE;
    for expansion in [1.25, 1.5, 2.0] {
        let params = BuildParams { alpha_expansion: expansion, ..bundle_params() };
        let index = if expansion == 2.0 {
            b.index.clone()
        } else {
            build(&b.base, &b.knng, &params, 1).unwrap()
        };
        index.validate_structure().unwrap();
        let (recall, _) = run_workload(&index, &b.ds_zipf, &b.w_zipf, GT_K, OP_L_S, 1.0);
        println!("expansion = {expansion}: R@10 = {recall:.4}");
        assert!(
            recall >= RECALL_FLOOR_ZIPF,
            "expansion {expansion}: recall {recall:.4} below floor {RECALL_FLOOR_ZIPF}"
        );
    }
}

#[test]
fn criterion_12_churn_preserves_coverage_and_recall() {
    let started = Instant::now();
    let b = &*BUNDLE;
    let params = bundle_params();
    let mut index = b.index.clone();
    let mut ds = b.ds_zipf.clone();

    // +1k inserts drawn from a fresh clustered batch, labels by the same
    // skewed law the workload used.
    let batch = gen_clustered(1000, DIM, CLUSTERS, SPREAD, 0x0A55).unwrap();
    let zipf = rand_distr::Zipf::new(12.0, 1.0).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(0x1AB5);
    for i in 0..batch.n() as u32 {
        let label = zipf.sample(&mut rng) as u32;
        insert_node(
            &mut index,
            &mut ds,
            batch.vector(i),
            FeatureValue::Labels(vec![label]),
            &params,
            0x00D0_0000 + i as u64,
        )
        .unwrap();
    }

    // -1k deletes over the original ids.
    let mut ids: Vec<u32> = (0..N as u32).collect();
    let deleted: HashSet<u32> =
        ids.partial_shuffle(&mut rng, 1000).0.iter().copied().collect();
    for (i, &id) in deleted.iter().enumerate() {
        delete_node(&mut index, &ds, id, &params, 0x00DE_0000 + i as u64).unwrap();
    }

    // Coverage over live nodes holds mid-churn, and tombstoned ids never
    // surface in results.
    index.validate_structure().unwrap();
    for (qi, query) in b.w_zipf.queries.iter().enumerate() {
        let sp = SearchParams { k: GT_K, l_s: OP_L_S, epsilon: 1.0, rng_seed: qi as u64 };
        let (hits, _) = search(&index, &ds, query, &sp).unwrap();
        for &(id, _) in &hits {
            assert!(!deleted.contains(&id), "deleted id {id} returned for query {qi}");
        }
    }

    compact(&mut index, &mut ds).unwrap();
    index.validate_structure().unwrap();
    assert_eq!(index.n(), N); // -1k +1k nets out

    // Recall vs a from-scratch rebuild over the post-churn rows.
    let fresh_knng = exact_knn(&ds, K_PRIME).unwrap();
    let fresh = build(&ds, &fresh_knng, &params, 1).unwrap();
    let truth: Vec<Vec<u32>> = b
        .w_zipf
        .queries
        .iter()
        .map(|q| {
            prefilter_bruteforce(&ds, q, GT_K).unwrap().into_iter().map(|(id, _)| id).collect()
        })
        .collect();
    let mut churned_sum = 0.0;
    let mut fresh_sum = 0.0;
    for (qi, query) in b.w_zipf.queries.iter().enumerate() {
        let sp = SearchParams { k: GT_K, l_s: OP_L_S, epsilon: 1.0, rng_seed: 7 + qi as u64 };
        let (hits, _) = search(&index, &ds, query, &sp).unwrap();
        let ids: Vec<u32> = hits.iter().map(|&(id, _)| id).collect();
        churned_sum += recall_at_k(&ids, &truth[qi], GT_K);
        let (hits, _) = search(&fresh, &ds, query, &sp).unwrap();
        let ids: Vec<u32> = hits.iter().map(|&(id, _)| id).collect();
        fresh_sum += recall_at_k(&ids, &truth[qi], GT_K);
    }
    let churned = churned_sum / b.w_zipf.len() as f64;
    let fresh_recall = fresh_sum / b.w_zipf.len() as f64;
    println!(
        "post-churn R@10 = {churned:.4} vs fresh rebuild = {fresh_recall:.4}, elapsed = {:?}",
        started.elapsed()
    );
    assert!(
        churned >= fresh_recall - UPDATE_DEGRADE_TOL,
        "churned index recall {churned:.4} degraded more than {UPDATE_DEGRADE_TOL} vs rebuild {fresh_recall:.4}"
    );
}

#[test]
fn criterion_13_persistence_round_trips_and_rejects_corruption() {
    let b = &*BUNDLE;
    let dir = tempfile::tempdir().unwrap();

    // Toy index through actual files.
    let ds = fixture_dataset(&NINE_POINTS);
    let knng = exact_knn(&ds, 4).unwrap();
    let params = BuildParams { k_prime: 4, tau: 3, supercenter_fraction: 1.0, ..BuildParams::default() };
    let toy = build(&ds, &knng, &params, 1).unwrap();
    let path = dir.path().join("toy.mci");
    mci::io::save_index(&toy, &path).unwrap();
    let loaded = mci::io::load_index(&path).unwrap();
    assert_eq!(loaded, toy);
    let original = std::fs::read(&path).unwrap();
    let resaved_path = dir.path().join("toy2.mci");
    mci::io::save_index(&loaded, &resaved_path).unwrap();
    assert_eq!(std::fs::read(&resaved_path).unwrap(), original, "resave is not byte-identical");

    // The bundle-sized index through the same path.
    let big_path = dir.path().join("bundle.mci");
    mci::io::save_index(&b.index, &big_path).unwrap();
    let big = mci::io::load_index(&big_path).unwrap();
    assert_eq!(big, b.index);

    // Corruption: a flipped magic byte and a flipped member byte must both
    // fail with a named check.
    let bad_path = dir.path().join("bad.mci");
    let mut bad = original.clone();
    bad[0] ^= 0xFF;
    std::fs::write(&bad_path, &bad).unwrap();
    match mci::io::load_index(&bad_path) {
        Err(Error::Validation { check, .. }) => assert_eq!(check, "magic"),
        other => panic!("corrupt magic accepted: {other:?}"),
    }
    let mut bad = original.clone();
    let member_off = 4 + 16 + 8 + 8 * (toy.clique_count() + 1) + 2;
    bad[member_off] ^= 0x40;
    std::fs::write(&bad_path, &bad).unwrap();
    match mci::io::load_index(&bad_path) {
        Err(Error::Validation { check, .. }) => {
            println!("member corruption rejected by check {check:?}");
        }
        Err(Error::Parse { .. }) => {} // out-of-range value caught while decoding
        other => panic!("corrupt member pool accepted: {other:?}"),
    }
}
