//! Command-line driver: build, query, benchmark, inspect, and update
//! clique indexes over fvecs datasets.
//!
//! Exit codes: 0 success, 1 usage error, 2 runtime error.

use std::path::{Path, PathBuf};
use std::process::exit;
use std::time::Instant;

use anyhow::{bail, Context, Result};
use clap::error::ErrorKind;
use clap::{Args, Parser, Subcommand};
use serde::Serialize;

use mci::build::{build, BuildParams, CliqueIndex};
use mci::dataset::{Dataset, FeatureValue};
use mci::eval::{bench, to_csv, Workload};
use mci::io;
use mci::knng;
use mci::predicate::{Predicate, Query};
use mci::search::{search, SearchParams};
use mci::update;

#[derive(Parser)]
#[command(
    name = "mci",
    version,
    about = "Filtered approximate nearest-neighbor search over a maximal clique index"
)]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Build an index from an fvecs dataset.
    Build(BuildArgs),
    /// Run one filtered query against an index.
    Search(SearchArgs),
    /// Sweep search parameters over a stored workload and emit CSV.
    Bench(BenchArgs),
    /// Print structural statistics of an index.
    Stats(StatsArgs),
    /// Attach synthetic features and generate a workload with exact
    /// ground truth.
    GenWorkload(GenWorkloadArgs),
    /// Insert and/or delete points, then write the compacted index and
    /// dataset.
    Update(UpdateArgs),
}

#[derive(Args)]
struct BuildArgs {
    /// Input vectors (fvecs).
    #[arg(long)]
    data: PathBuf,
    /// Optional feature sidecar (mcif) to validate alignment.
    #[arg(long)]
    features: Option<PathBuf>,
    /// Output index path; a <out>.meta.json summary is written next to it.
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value_t = 200)]
    k_prime: usize,
    #[arg(long, default_value_t = 50)]
    tau: usize,
    #[arg(long, default_value_t = 1.2)]
    alpha0: f64,
    #[arg(long, default_value_t = 2.0)]
    expansion: f64,
    #[arg(long, default_value_t = 10.0)]
    alpha_max: f64,
    #[arg(long, default_value_t = 0.01)]
    sc_fraction: f64,
    #[arg(long, default_value_t = 1)]
    threads: usize,
    /// Seed for the approximate graph builder on large inputs.
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(Args)]
struct SearchArgs {
    #[arg(long)]
    index: PathBuf,
    #[arg(long)]
    data: PathBuf,
    #[arg(long)]
    features: Option<PathBuf>,
    /// Comma-separated query vector, e.g. "0.1,0.4,0.9".
    #[arg(long)]
    vector: String,
    /// Predicate: `true`, `range <lo> <hi>`, or `label <id>`.
    #[arg(long, default_value = "true")]
    predicate: String,
    #[arg(long, default_value_t = 10)]
    k: usize,
    #[arg(long, default_value_t = 100)]
    l_s: usize,
    #[arg(long, default_value_t = 1.0)]
    epsilon: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(Args)]
struct BenchArgs {
    #[arg(long)]
    index: PathBuf,
    #[arg(long)]
    data: PathBuf,
    #[arg(long)]
    features: Option<PathBuf>,
    #[arg(long)]
    workload: PathBuf,
    /// Comma-separated beam widths to sweep.
    #[arg(long, default_value = "10,20,40,80,160")]
    l_s: String,
    #[arg(long, default_value_t = 1.0)]
    epsilon: f64,
    #[arg(long, default_value_t = 10)]
    k: usize,
    #[arg(long, default_value_t = 1)]
    threads: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Label for the dataset column of the CSV.
    #[arg(long, default_value = "dataset")]
    name: String,
    /// Write CSV here instead of stdout.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct StatsArgs {
    #[arg(long)]
    index: PathBuf,
}

#[derive(Args)]
struct GenWorkloadArgs {
    #[arg(long)]
    data: PathBuf,
    /// Workload kind: `zipf` (label match) or `range` (scalar interval).
    #[arg(long)]
    kind: String,
    #[arg(long)]
    out: PathBuf,
    /// Where to store the generated features (defaults to <out>.mcif).
    #[arg(long)]
    features_out: Option<PathBuf>,
    #[arg(long, default_value_t = 200)]
    queries: usize,
    #[arg(long, default_value_t = 100)]
    gt_k: usize,
    #[arg(long, default_value_t = 12)]
    num_labels: usize,
    #[arg(long, default_value_t = 1.0)]
    zipf_s: f64,
    /// Comma-separated selectivity targets for `range` workloads.
    #[arg(long, default_value = "0.3,0.15,0.07,0.03,0.015,0.007,0.003,0.001")]
    targets: String,
    #[arg(long, default_value_t = 25)]
    per_target: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(Args)]
struct UpdateArgs {
    #[arg(long)]
    index: PathBuf,
    #[arg(long)]
    data: PathBuf,
    #[arg(long)]
    features: Option<PathBuf>,
    /// fvecs file of vectors to insert (feature-less datasets only).
    #[arg(long)]
    insert: Option<PathBuf>,
    /// Comma-separated node ids to delete.
    #[arg(long)]
    delete: Option<String>,
    #[arg(long)]
    out_index: PathBuf,
    #[arg(long)]
    out_data: PathBuf,
    #[arg(long)]
    out_features: Option<PathBuf>,
    #[arg(long, default_value_t = 1.2)]
    alpha0: f64,
    #[arg(long, default_value_t = 2.0)]
    expansion: f64,
    #[arg(long, default_value_t = 10.0)]
    alpha_max: f64,
    #[arg(long, default_value_t = 0.01)]
    sc_fraction: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

fn main() {
    // Restore default SIGPIPE behavior so piping into `head` terminates
    // the process quietly instead of panicking on a closed stdout.
    #[cfg(unix)]
    unsafe {
        libc::signal(libc::SIGPIPE, libc::SIG_DFL);
    }
    env_logger::init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            // Help and version are successful outcomes, not usage errors.
            if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) {
                print!("{e}");
                exit(0);
            }
            eprint!("{e}");
            exit(1);
        }
    };
    if let Err(e) = run(cli) {
        eprintln!("error: {e:#}");
        exit(2);
    }
}

fn run(cli: Cli) -> Result<()> {
    match cli.cmd {
        Cmd::Build(a) => cmd_build(a),
        Cmd::Search(a) => cmd_search(a),
        Cmd::Bench(a) => cmd_bench(a),
        Cmd::Stats(a) => cmd_stats(a),
        Cmd::GenWorkload(a) => cmd_gen_workload(a),
        Cmd::Update(a) => cmd_update(a),
    }
}

fn load_dataset(data: &Path, features: Option<&Path>) -> Result<Dataset> {
    let mut ds = io::read_fvecs(data)
        .with_context(|| format!("reading dataset {}", data.display()))?;
    if let Some(fp) = features {
        let (n, feats) = io::load_features(fp)
            .with_context(|| format!("reading features {}", fp.display()))?;
        if n != ds.n() {
            bail!("features describe {n} records but dataset has {}", ds.n());
        }
        ds.set_features(feats)?;
    }
    Ok(ds)
}

fn parse_list<T: std::str::FromStr>(s: &str, what: &str) -> Result<Vec<T>>
where
    T::Err: std::error::Error + Send + Sync + 'static,
{
    s.split(',')
        .map(|t| {
            t.trim()
                .parse::<T>()
                .with_context(|| format!("parsing {what} element {t:?}"))
        })
        .collect()
}

fn parse_predicate(s: &str) -> Result<Predicate> {
    let tokens: Vec<&str> = s.split_whitespace().collect();
    match tokens.as_slice() {
        ["true"] => Ok(Predicate::AlwaysTrue),
        ["range", lo, hi] => Ok(Predicate::ScalarRange {
            lo: lo.parse().context("range lower bound")?,
            hi: hi.parse().context("range upper bound")?,
        }),
        ["label", l] => Ok(Predicate::LabelMatch { label: l.parse().context("label id")? }),
        _ => bail!("predicate must be `true`, `range <lo> <hi>`, or `label <id>`"),
    }
}

#[derive(Serialize)]
struct BuildSummary {
    n: usize,
    dim: usize,
    k_prime: usize,
    tau: usize,
    threads: usize,
    cliques: usize,
    pseudo_cliques: usize,
    total_members: u64,
    effective_out_degree: f64,
    supercenter_exclusions: u64,
    graph: &'static str,
    build_seconds: f64,
    rounds: Vec<RoundOut>,
}

#[derive(Serialize)]
struct RoundOut {
    alpha: f64,
    uncovered_before: usize,
    uncovered_after: usize,
}

fn cmd_build(a: BuildArgs) -> Result<()> {
    let ds = load_dataset(&a.data, a.features.as_deref())?;
    let params = BuildParams {
        k_prime: a.k_prime,
        tau: a.tau,
        alpha0: a.alpha0,
        alpha_expansion: a.expansion,
        alpha_max: a.alpha_max,
        supercenter_fraction: a.sc_fraction,
    };
    let start = Instant::now();
    let graph = knng::auto(&ds, a.k_prime, a.seed)?;
    let graph_kind = if ds.n() <= knng::EXACT_BUILD_LIMIT { "exact" } else { "nn-descent" };
    let index = build(&ds, &graph, &params, a.threads)?;
    let secs = start.elapsed().as_secs_f64();

    io::save_index(&index, &a.out)
        .with_context(|| format!("writing index {}", a.out.display()))?;
    let meta = index.meta.as_ref().expect("fresh build carries meta");
    let summary = BuildSummary {
        n: ds.n(),
        dim: ds.dim(),
        k_prime: a.k_prime,
        tau: a.tau,
        threads: a.threads,
        cliques: index.live_clique_count(),
        pseudo_cliques: index.pseudo_count(),
        total_members: index.total_members(),
        effective_out_degree: index.effective_out_degree(),
        supercenter_exclusions: meta.supercenter_exclusions,
        graph: graph_kind,
        build_seconds: secs,
        rounds: meta
            .rounds
            .iter()
            .map(|r| RoundOut {
                alpha: r.alpha,
                uncovered_before: r.uncovered_before,
                uncovered_after: r.uncovered_after,
            })
            .collect(),
    };
    let meta_path = PathBuf::from(format!("{}.meta.json", a.out.display()));
    std::fs::write(&meta_path, serde_json::to_vec_pretty(&summary)?)
        .with_context(|| format!("writing {}", meta_path.display()))?;
    println!(
        "built {} cliques ({} pseudo) over {} points in {:.2}s -> {}",
        summary.cliques,
        summary.pseudo_cliques,
        summary.n,
        secs,
        a.out.display()
    );
    Ok(())
}

fn cmd_search(a: SearchArgs) -> Result<()> {
    let ds = load_dataset(&a.data, a.features.as_deref())?;
    let index = io::load_index(&a.index)?;
    let vector: Vec<f32> = parse_list(&a.vector, "query vector")?;
    let query = Query::new(vector, parse_predicate(&a.predicate)?);
    let params = SearchParams { k: a.k, l_s: a.l_s, epsilon: a.epsilon, rng_seed: a.seed };
    let (hits, stats) = search(&index, &ds, &query, &params)?;
    for (id, dist) in hits {
        println!("{id}\t{dist}");
    }
    eprintln!(
        "# dist_comps={} expanded={} seeds={}",
        stats.dist_comps, stats.expanded, stats.seeds
    );
    Ok(())
}

fn cmd_bench(a: BenchArgs) -> Result<()> {
    let ds = load_dataset(&a.data, a.features.as_deref())?;
    let index = io::load_index(&a.index)?;
    let workload: Workload = io::load_workload(&a.workload)?;
    let beams: Vec<usize> = parse_list(&a.l_s, "beam widths")?;
    let grid: Vec<SearchParams> = beams
        .into_iter()
        .map(|l_s| SearchParams { k: a.k, l_s, epsilon: a.epsilon, rng_seed: a.seed })
        .collect();
    let rows = bench(&index, &ds, &workload, &grid, a.threads, &a.name)?;
    let csv = to_csv(&rows);
    match a.out {
        Some(path) => std::fs::write(&path, csv)
            .with_context(|| format!("writing {}", path.display()))?,
        None => print!("{csv}"),
    }
    Ok(())
}

fn cmd_stats(a: StatsArgs) -> Result<()> {
    let index = io::load_index(&a.index)?;
    let index: CliqueIndex = index;
    println!("n: {}", index.n());
    println!("k_prime: {}", index.k_prime());
    println!("tau: {}", index.tau());
    println!("cliques: {}", index.live_clique_count());
    println!("pseudo_cliques: {}", index.pseudo_count());
    println!("total_members: {}", index.total_members());
    println!(
        "size_bound_usage: {:.4}",
        index.total_members() as f64 / (index.n() as f64 * index.k_prime() as f64)
    );
    println!("effective_out_degree: {:.3}", index.effective_out_degree());
    Ok(())
}

fn cmd_gen_workload(a: GenWorkloadArgs) -> Result<()> {
    let mut ds = load_dataset(&a.data, None)?;
    let workload = match a.kind.as_str() {
        "zipf" => mci::eval::gen_zipf_label_workload(
            &mut ds,
            a.num_labels,
            a.zipf_s,
            a.queries,
            a.gt_k,
            a.seed,
        )?,
        "range" => {
            let targets: Vec<f64> = parse_list(&a.targets, "selectivity targets")?;
            mci::eval::gen_range_workload(&mut ds, &targets, a.per_target, a.gt_k, a.seed)?
        }
        other => bail!("unknown workload kind {other:?}; use `zipf` or `range`"),
    };
    io::save_workload(&workload, &a.out)
        .with_context(|| format!("writing workload {}", a.out.display()))?;
    let fpath = a
        .features_out
        .unwrap_or_else(|| PathBuf::from(format!("{}.mcif", a.out.display())));
    io::save_features(&ds, &fpath)
        .with_context(|| format!("writing features {}", fpath.display()))?;
    println!(
        "wrote {} queries (gt_k {}) -> {}; features -> {}",
        workload.len(),
        workload.gt_k,
        a.out.display(),
        fpath.display()
    );
    Ok(())
}

fn cmd_update(a: UpdateArgs) -> Result<()> {
    let mut ds = load_dataset(&a.data, a.features.as_deref())?;
    let mut index = io::load_index(&a.index)?;
    let params = BuildParams {
        k_prime: index.k_prime() as usize,
        tau: index.tau() as usize,
        alpha0: a.alpha0,
        alpha_expansion: a.expansion,
        alpha_max: a.alpha_max,
        supercenter_fraction: a.sc_fraction,
    };

    let mut inserted = 0usize;
    if let Some(path) = &a.insert {
        if !ds.features().is_none() {
            bail!(
                "--insert requires a feature-less dataset; per-row features \
                 are only supported through the library API"
            );
        }
        let new = io::read_fvecs(path)?;
        if new.dim() != ds.dim() {
            bail!("insert vectors have dim {} but dataset has {}", new.dim(), ds.dim());
        }
        for i in 0..new.n() as u32 {
            update::insert_node(
                &mut index,
                &mut ds,
                new.vector(i),
                FeatureValue::None,
                &params,
                a.seed.wrapping_add(i as u64),
            )?;
            inserted += 1;
        }
    }

    let mut deleted = 0usize;
    if let Some(list) = &a.delete {
        let ids: Vec<u32> = parse_list(list, "delete ids")?;
        for id in ids {
            update::delete_node(&mut index, &ds, id, &params, a.seed)?;
            deleted += 1;
        }
    }
    if inserted == 0 && deleted == 0 {
        bail!("nothing to do: pass --insert and/or --delete");
    }

    update::compact(&mut index, &mut ds)?;
    io::save_index(&index, &a.out_index)?;
    io::write_fvecs(&ds, &a.out_data)?;
    if let Some(fp) = &a.out_features {
        io::save_features(&ds, fp)?;
    }
    println!(
        "inserted {inserted}, deleted {deleted}; compacted to {} live points -> {}",
        ds.n(),
        a.out_index.display()
    );
    Ok(())
}
