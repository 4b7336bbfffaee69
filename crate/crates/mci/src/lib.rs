//! Filtered approximate nearest-neighbor search over a maximal clique
//! index.
//!
//! The index covers every point with at least one maximal clique of a
//! locally densified neighborhood graph: a k'-NN graph is built first,
//! then each uncovered point in turn becomes a center whose neighborhood
//! is re-thresholded at a growing distance ratio until greedy mining
//! finds a clique of the required size. Cliques are stored as flat member
//! lists plus an inverted node-to-clique map, so a beam search can expand
//! whole cliques at a time while a per-query predicate mask confines
//! distance work to valid points. Degenerate neighborhoods fall back to
//! pseudo-cliques so coverage always completes.
//!
//! The crate also carries exact baselines and workload generators used to
//! measure the engine against brute force, dynamic insert/delete with
//! local re-mining, and binary formats for datasets, indexes, features,
//! and workloads.
//!
//! ```
//! use mci::build::{build, BuildParams};
//! use mci::eval::gen_uniform;
//! use mci::knng::exact_knn;
//! use mci::predicate::{Predicate, Query};
//! use mci::search::{search, SearchParams};
//!
//! let ds = gen_uniform(400, 8, 7).unwrap();
//! let knng = exact_knn(&ds, 12).unwrap();
//! let params = BuildParams { k_prime: 12, tau: 3, ..Default::default() };
//! let index = build(&ds, &knng, &params, 1).unwrap();
//!
//! let q = Query::new(ds.vector(5).to_vec(), Predicate::AlwaysTrue);
//! let (hits, stats) = search(&index, &ds, &q, &SearchParams::new(3, 40)).unwrap();
//! assert_eq!(hits[0].0, 5); // the point itself is its own nearest hit
//! assert!(stats.dist_comps <= 400);
//! ```

pub mod baselines;
pub mod bits;
pub mod build;
pub mod dataset;
pub mod distance;
pub mod error;
pub mod eval;
pub mod io;
pub mod knng;
pub mod predicate;
pub mod search;
pub mod update;

pub use build::{build, BuildParams, CliqueIndex, CliqueKind};
pub use dataset::{Dataset, FeatureValue, Features};
pub use error::{Error, Result};
pub use knng::{exact_knn, nn_descent, KnnGraph};
pub use predicate::{Predicate, PredicateMask, Query};
pub use search::{search, SearchParams, SearchStats};
