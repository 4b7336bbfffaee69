//! Predicates, queries, and precomputed predicate masks.

use std::sync::Arc;

use crate::bits::Bitmap;
use crate::dataset::{Dataset, Features};
use crate::error::{Error, Result};

/// A feature test applied to every record. Evaluation is a pure function of
/// the record's feature and the predicate's own parameters, so repeated
/// evaluation is deterministic and masks can be precomputed once per query.
#[derive(Debug, Clone, PartialEq)]
pub enum Predicate {
    AlwaysTrue,
    /// Scalar feature in the half-open interval `[lo, hi)`.
    ScalarRange { lo: f64, hi: f64 },
    /// Label set contains `label`.
    LabelMatch { label: u32 },
    /// Label set contains every label in `labels` (sorted, duplicate-free).
    LabelSubset { labels: Vec<u32> },
    /// Arbitrary user-supplied membership, one bit per record.
    ExternalMask { bits: Arc<Bitmap> },
}

impl Predicate {
    /// Evaluate against record `i`. Callers should prefer [`evaluate_mask`]
    /// which amortizes the dispatch over the whole dataset.
    pub fn matches(&self, dataset: &Dataset, i: u32) -> Result<bool> {
        match self {
            Predicate::AlwaysTrue => Ok(true),
            Predicate::ScalarRange { lo, hi } => match dataset.scalar(i) {
                Some(s) => Ok(*lo <= s && s < *hi),
                None => Err(Error::PredicateType("scalar-range over non-scalar features".into())),
            },
            Predicate::LabelMatch { label } => match dataset.labels(i) {
                Some(ls) => Ok(ls.binary_search(label).is_ok()),
                None => Err(Error::PredicateType("label-match over non-label features".into())),
            },
            Predicate::LabelSubset { labels } => match dataset.labels(i) {
                Some(ls) => Ok(labels.iter().all(|l| ls.binary_search(l).is_ok())),
                None => Err(Error::PredicateType("label-subset over non-label features".into())),
            },
            Predicate::ExternalMask { bits } => {
                if bits.len() != dataset.n() {
                    return Err(Error::ShapeMismatch(format!(
                        "external mask length {} vs dataset n {}",
                        bits.len(),
                        dataset.n()
                    )));
                }
                Ok(bits.get(i as usize))
            }
        }
    }

    fn check_kind(&self, features: &Features) -> Result<()> {
        let ok = match self {
            Predicate::AlwaysTrue | Predicate::ExternalMask { .. } => true,
            Predicate::ScalarRange { .. } => matches!(features, Features::Scalars(_)),
            Predicate::LabelMatch { .. } | Predicate::LabelSubset { .. } => {
                matches!(features, Features::LabelSets { .. })
            }
        };
        if ok {
            Ok(())
        } else {
            Err(Error::PredicateType(format!("{self:?} cannot evaluate over stored features")))
        }
    }
}

/// A top-k request: target vector plus the predicate restricting candidates.
#[derive(Debug, Clone, PartialEq)]
pub struct Query {
    pub vector: Vec<f32>,
    pub predicate: Predicate,
}

impl Query {
    pub fn new(vector: Vec<f32>, predicate: Predicate) -> Self {
        Query { vector, predicate }
    }
}

/// Precomputed boolean evaluation of one predicate over the whole dataset.
#[derive(Debug, Clone, PartialEq)]
pub struct PredicateMask {
    pub bits: Bitmap,
    pub true_count: usize,
}

impl PredicateMask {
    pub fn from_bits(bits: Bitmap) -> Self {
        let true_count = bits.count_ones();
        PredicateMask { bits, true_count }
    }
}

/// Evaluate a query's predicate over every record; one predicate evaluation
/// per element.
pub fn evaluate_mask(dataset: &Dataset, query: &Query) -> Result<PredicateMask> {
    query.predicate.check_kind(dataset.features())?;
    let n = dataset.n();
    let mut bits = Bitmap::new(n);
    match &query.predicate {
        Predicate::AlwaysTrue => {
            for i in 0..n {
                bits.set(i);
            }
        }
        Predicate::ExternalMask { bits: ext } => {
            if ext.len() != n {
                return Err(Error::ShapeMismatch(format!(
                    "external mask length {} vs dataset n {n}",
                    ext.len()
                )));
            }
            bits = (**ext).clone();
        }
        pred => {
            for i in 0..n {
                if pred.matches(dataset, i as u32)? {
                    bits.set(i);
                }
            }
        }
    }
    Ok(PredicateMask::from_bits(bits))
}

/// Fraction of records satisfying the predicate.
pub fn selectivity(mask: &PredicateMask, n: usize) -> f64 {
    assert!(n >= 1, "selectivity over an empty dataset");
    mask.true_count as f64 / n as f64
}

#[cfg(test)]
mod tests {
    use super::*;

    fn scalar_ds(values: &[f64]) -> Dataset {
        Dataset::new(vec![0.0; values.len()], 1)
            .unwrap()
            .with_features(Features::Scalars(values.to_vec()))
            .unwrap()
    }

    #[test]
    fn scalar_range_half_open() {
        let ds = scalar_ds(&[0.1, 0.5, 0.9]);
        let q = Query::new(vec![0.0], Predicate::ScalarRange { lo: 0.4, hi: 1.0 });
        let mask = evaluate_mask(&ds, &q).unwrap();
        assert!(!mask.bits.get(0) && mask.bits.get(1) && mask.bits.get(2));
        assert_eq!(mask.true_count, 2);
        assert_eq!(selectivity(&mask, 3), 2.0 / 3.0);
    }

    #[test]
    fn label_match_absent_label_all_false() {
        let ds = Dataset::new(vec![0.0; 3], 1)
            .unwrap()
            .with_features(Features::LabelSets { offsets: vec![0, 1, 3, 4], labels: vec![2, 1, 5, 2] })
            .unwrap();
        let q = Query::new(vec![0.0], Predicate::LabelMatch { label: 9 });
        let mask = evaluate_mask(&ds, &q).unwrap();
        assert_eq!(mask.true_count, 0);
        let q = Query::new(vec![0.0], Predicate::LabelMatch { label: 2 });
        let mask = evaluate_mask(&ds, &q).unwrap();
        assert!(mask.bits.get(0) && !mask.bits.get(1) && mask.bits.get(2));
    }

    #[test]
    fn label_subset_requires_all() {
        let ds = Dataset::new(vec![0.0; 2], 1)
            .unwrap()
            .with_features(Features::LabelSets { offsets: vec![0, 3, 4], labels: vec![1, 4, 7, 4] })
            .unwrap();
        let q = Query::new(vec![0.0], Predicate::LabelSubset { labels: vec![1, 7] });
        let mask = evaluate_mask(&ds, &q).unwrap();
        assert!(mask.bits.get(0) && !mask.bits.get(1));
    }

    #[test]
    fn kind_mismatch_is_error() {
        let ds = scalar_ds(&[0.5]);
        let q = Query::new(vec![0.0], Predicate::LabelMatch { label: 1 });
        assert!(matches!(evaluate_mask(&ds, &q), Err(Error::PredicateType(_))));
    }

    #[test]
    fn external_mask_passthrough_and_shape_check() {
        let ds = scalar_ds(&[0.0, 1.0, 2.0]);
        let mut bits = Bitmap::new(3);
        bits.set(2);
        let q = Query::new(vec![0.0], Predicate::ExternalMask { bits: Arc::new(bits) });
        let mask = evaluate_mask(&ds, &q).unwrap();
        assert_eq!(mask.true_count, 1);
        assert!(mask.bits.get(2));

        let short = Arc::new(Bitmap::new(2));
        let q = Query::new(vec![0.0], Predicate::ExternalMask { bits: short });
        assert!(evaluate_mask(&ds, &q).is_err());
    }

    #[test]
    fn deterministic_masks() {
        let ds = scalar_ds(&[0.3, 0.7, 0.2, 0.9]);
        let q = Query::new(vec![0.0], Predicate::ScalarRange { lo: 0.25, hi: 0.8 });
        let a = evaluate_mask(&ds, &q).unwrap();
        let b = evaluate_mask(&ds, &q).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn always_true_full_count() {
        let ds = scalar_ds(&vec![0.0f64; 100]);
        let q = Query::new(vec![0.0], Predicate::AlwaysTrue);
        let mask = evaluate_mask(&ds, &q).unwrap();
        assert_eq!(mask.true_count, 100);
        assert_eq!(selectivity(&mask, 100), 1.0);
    }
}
