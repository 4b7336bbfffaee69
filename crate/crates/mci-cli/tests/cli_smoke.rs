//! End-to-end runs of every subcommand against a small synthetic dataset,
//! plus exit-code conventions: 0 ok, 1 usage, 2 runtime.

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use mci::eval::gen_uniform;
use mci::io::write_fvecs;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_mci"))
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("spawn mci binary")
}

fn assert_ok(out: &Output, what: &str) {
    assert!(
        out.status.success(),
        "{what} failed with {:?}\nstdout: {}\nstderr: {}",
        out.status.code(),
        String::from_utf8_lossy(&out.stdout),
        String::from_utf8_lossy(&out.stderr),
    );
}

fn p(path: &Path) -> String {
    path.to_str().unwrap().to_string()
}

struct Env {
    #[allow(dead_code)]
    dir: tempfile::TempDir,
    data: PathBuf,
    index: PathBuf,
}

fn build_small_index() -> Env {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("d.fvecs");
    let index = dir.path().join("i.mci");
    let ds = gen_uniform(2_000, 16, 11).unwrap();
    write_fvecs(&ds, &data).unwrap();
    let out = run(&[
        "build",
        "--data",
        &p(&data),
        "--out",
        &p(&index),
        "--k-prime",
        "16",
        "--tau",
        "4",
        "--sc-fraction",
        "1.0",
    ]);
    assert_ok(&out, "build");
    Env { dir, data, index }
}

#[test]
fn build_stats_and_meta_sidecar() {
    let env = build_small_index();
    assert!(env.index.exists());
    let meta: serde_json::Value = serde_json::from_slice(
        &std::fs::read(format!("{}.meta.json", p(&env.index))).unwrap(),
    )
    .unwrap();
    assert_eq!(meta["n"], 2000);
    assert!(!meta["rounds"].as_array().unwrap().is_empty());

    let out = run(&["stats", "--index", &p(&env.index)]);
    assert_ok(&out, "stats");
    let text = String::from_utf8_lossy(&out.stdout);
    assert!(text.contains("cliques:"), "stats output: {text}");
    assert!(text.contains("n: 2000"));
}

#[test]
fn range_workload_bench_and_search() {
    let env = build_small_index();
    let dir = env.data.parent().unwrap();
    let workload = dir.join("w.mciw");
    let features = dir.join("w.mcif");
    let out = run(&[
        "gen-workload",
        "--data",
        &p(&env.data),
        "--kind",
        "range",
        "--targets",
        "0.3,0.05",
        "--per-target",
        "5",
        "--gt-k",
        "10",
        "--out",
        &p(&workload),
        "--features-out",
        &p(&features),
        "--seed",
        "7",
    ]);
    assert_ok(&out, "gen-workload");

    let out = run(&[
        "bench",
        "--index",
        &p(&env.index),
        "--data",
        &p(&env.data),
        "--features",
        &p(&features),
        "--workload",
        &p(&workload),
        "--l-s",
        "20,80",
        "--k",
        "10",
        "--name",
        "smoke",
    ]);
    assert_ok(&out, "bench");
    let csv = String::from_utf8_lossy(&out.stdout);
    let mut lines = csv.lines();
    assert_eq!(
        lines.next().unwrap(),
        "dataset,n,dim,k_prime,tau,l_s,epsilon,threads,recall_at_k,qps,mean_dist_comps,mean_selectivity"
    );
    assert_eq!(lines.count(), 2);

    let vector = vec!["0.5"; 16].join(",");
    let out = run(&[
        "search",
        "--index",
        &p(&env.index),
        "--data",
        &p(&env.data),
        "--features",
        &p(&features),
        "--vector",
        &vector,
        "--predicate",
        "range 0.2 0.8",
        "--k",
        "5",
        "--l-s",
        "50",
    ]);
    assert_ok(&out, "search");
    let hits = String::from_utf8_lossy(&out.stdout);
    assert_eq!(hits.lines().count(), 5, "hits: {hits}");
    for line in hits.lines() {
        let mut parts = line.split('\t');
        parts.next().unwrap().parse::<u32>().unwrap();
        parts.next().unwrap().parse::<f32>().unwrap();
    }
}

#[test]
fn zipf_workload_generates() {
    let env = build_small_index();
    let dir = env.data.parent().unwrap();
    let workload = dir.join("z.mciw");
    let out = run(&[
        "gen-workload",
        "--data",
        &p(&env.data),
        "--kind",
        "zipf",
        "--queries",
        "10",
        "--gt-k",
        "10",
        "--num-labels",
        "6",
        "--out",
        &p(&workload),
    ]);
    assert_ok(&out, "gen-workload zipf");
    assert!(workload.exists());
    assert!(dir.join("z.mciw.mcif").exists(), "default features sidecar");
}

#[test]
fn update_inserts_deletes_and_compacts() {
    let env = build_small_index();
    let dir = env.data.parent().unwrap();
    let new = dir.join("new.fvecs");
    write_fvecs(&gen_uniform(20, 16, 12).unwrap(), &new).unwrap();
    let out_index = dir.join("i2.mci");
    let out_data = dir.join("d2.fvecs");
    let out = run(&[
        "update",
        "--index",
        &p(&env.index),
        "--data",
        &p(&env.data),
        "--insert",
        &p(&new),
        "--delete",
        "0,5,9",
        "--out-index",
        &p(&out_index),
        "--out-data",
        &p(&out_data),
    ]);
    assert_ok(&out, "update");

    let out = run(&["stats", "--index", &p(&out_index)]);
    assert_ok(&out, "stats after update");
    let text = String::from_utf8_lossy(&out.stdout);
    assert!(text.contains("n: 2017"), "stats output: {text}");
}

#[test]
fn exit_codes_follow_convention() {
    // Usage errors: missing required argument, unknown subcommand.
    let out = run(&["build", "--data", "x.fvecs"]);
    assert_eq!(out.status.code(), Some(1));
    let out = run(&["frobnicate"]);
    assert_eq!(out.status.code(), Some(1));

    // Help is a successful outcome.
    let out = run(&["--help"]);
    assert_eq!(out.status.code(), Some(0));

    // Runtime error: file does not exist.
    let out = run(&["stats", "--index", "/nonexistent/i.mci"]);
    assert_eq!(out.status.code(), Some(2));

    // Runtime error: bad predicate grammar surfaces after parse.
    let env = build_small_index();
    let vector = vec!["0.5"; 16].join(",");
    let out = run(&[
        "search",
        "--index",
        &p(&env.index),
        "--data",
        &p(&env.data),
        "--vector",
        &vector,
        "--predicate",
        "between 1 2",
    ]);
    assert_eq!(out.status.code(), Some(2));
}
