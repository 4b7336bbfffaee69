//! Vector store with per-vector feature payloads.

use crate::error::{Error, Result};

/// Per-vector feature payloads, columnar.
///
/// A tagged union rather than a generic parameter so a single index file
/// format and CLI serve every workload kind.
#[derive(Debug, Clone, PartialEq)]
pub enum Features {
    /// No payloads; only always-true or external-mask predicates apply.
    None,
    /// One scalar per vector.
    Scalars(Vec<f64>),
    /// A sorted label set per vector, CSR layout: labels for vector `i`
    /// live at `labels[offsets[i]..offsets[i+1]]`.
    LabelSets { offsets: Vec<u32>, labels: Vec<u32> },
    /// Opaque bytes per vector, CSR layout; matched only by external-mask
    /// predicates supplied through the library API.
    Bytes { offsets: Vec<u32>, bytes: Vec<u8> },
}

impl Features {
    /// Number of records, or `None` for the payload-free variant.
    pub fn len(&self) -> Option<usize> {
        match self {
            Features::None => None,
            Features::Scalars(v) => Some(v.len()),
            Features::LabelSets { offsets, .. } | Features::Bytes { offsets, .. } => {
                Some(offsets.len().saturating_sub(1))
            }
        }
    }

    /// True when a payload is present but holds zero records.
    pub fn is_empty(&self) -> bool {
        self.len() == Some(0)
    }

    pub fn is_none(&self) -> bool {
        matches!(self, Features::None)
    }

    fn check_csr(offsets: &[u32], pool_len: usize) -> bool {
        !offsets.is_empty()
            && offsets[0] == 0
            && offsets.windows(2).all(|w| w[0] <= w[1])
            && *offsets.last().unwrap() as usize == pool_len
    }

    fn validate(&self, n: usize) -> Result<()> {
        let ok = match self {
            Features::None => true,
            Features::Scalars(v) => v.len() == n,
            Features::LabelSets { offsets, labels } => {
                Self::check_csr(offsets, labels.len())
                    && offsets.len() == n + 1
                    && offsets.windows(2).all(|w| {
                        labels[w[0] as usize..w[1] as usize].windows(2).all(|p| p[0] < p[1])
                    })
            }
            Features::Bytes { offsets, bytes } => {
                Self::check_csr(offsets, bytes.len()) && offsets.len() == n + 1
            }
        };
        if ok {
            Ok(())
        } else {
            Err(Error::ShapeMismatch(format!("features do not describe {n} records")))
        }
    }
}

/// A single record's feature value, used when appending rows.
#[derive(Debug, Clone, PartialEq)]
pub enum FeatureValue {
    None,
    Scalar(f64),
    /// Must be sorted ascending with no duplicates.
    Labels(Vec<u32>),
    Bytes(Vec<u8>),
}

/// Contiguous store of `n` fixed-dimension f32 vectors plus per-vector
/// features. Immutable in normal operation; rows are appended only through
/// the dynamic-update path.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    dim: usize,
    vectors: Vec<f32>,
    features: Features,
}

impl Dataset {
    /// Build from a flat row-major buffer. Rejects empty data, ragged
    /// buffers, and non-finite components.
    pub fn new(vectors: Vec<f32>, dim: usize) -> Result<Self> {
        if dim == 0 {
            return Err(Error::param("dim", "must be >= 1"));
        }
        if vectors.is_empty() {
            return Err(Error::EmptyDataset);
        }
        if !vectors.len().is_multiple_of(dim) {
            return Err(Error::ShapeMismatch(format!(
                "buffer of {} floats is not a multiple of dim {dim}",
                vectors.len()
            )));
        }
        if let Some(index) = vectors.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite { index });
        }
        Ok(Dataset { dim, vectors, features: Features::None })
    }

    /// Attach feature payloads; the record count must equal `n`.
    pub fn with_features(mut self, features: Features) -> Result<Self> {
        features.validate(self.n())?;
        self.features = features;
        Ok(self)
    }

    /// Replace feature payloads in place (workload generators assign them).
    pub fn set_features(&mut self, features: Features) -> Result<()> {
        features.validate(self.n())?;
        self.features = features;
        Ok(())
    }

    #[inline]
    pub fn n(&self) -> usize {
        self.vectors.len() / self.dim
    }

    #[inline]
    pub fn dim(&self) -> usize {
        self.dim
    }

    #[inline]
    pub fn vector(&self, i: u32) -> &[f32] {
        let start = i as usize * self.dim;
        &self.vectors[start..start + self.dim]
    }

    pub fn vectors(&self) -> &[f32] {
        &self.vectors
    }

    pub fn features(&self) -> &Features {
        &self.features
    }

    /// Append one row; feature kind must match the stored features.
    /// Returns the new row id.
    pub fn push_row(&mut self, vector: &[f32], feature: FeatureValue) -> Result<u32> {
        if vector.len() != self.dim {
            return Err(Error::DimensionMismatch { expected: self.dim, got: vector.len() });
        }
        if let Some(index) = vector.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite { index });
        }
        match (&mut self.features, feature) {
            (Features::None, FeatureValue::None) => {}
            (Features::Scalars(v), FeatureValue::Scalar(s)) => v.push(s),
            (Features::LabelSets { offsets, labels }, FeatureValue::Labels(ls)) => {
                if ls.windows(2).any(|w| w[0] >= w[1]) {
                    return Err(Error::param("labels", "must be sorted and duplicate-free"));
                }
                labels.extend_from_slice(&ls);
                offsets.push(labels.len() as u32);
            }
            (Features::Bytes { offsets, bytes }, FeatureValue::Bytes(bs)) => {
                bytes.extend_from_slice(&bs);
                offsets.push(bytes.len() as u32);
            }
            _ => {
                return Err(Error::PredicateType(
                    "appended feature kind differs from stored features".into(),
                ))
            }
        }
        self.vectors.extend_from_slice(vector);
        Ok((self.n() - 1) as u32)
    }

    /// Scalar feature of record `i`, if the dataset stores scalars.
    #[inline]
    pub fn scalar(&self, i: u32) -> Option<f64> {
        match &self.features {
            Features::Scalars(v) => Some(v[i as usize]),
            _ => None,
        }
    }

    /// Label set of record `i`, if the dataset stores label sets.
    #[inline]
    pub fn labels(&self, i: u32) -> Option<&[u32]> {
        match &self.features {
            Features::LabelSets { offsets, labels } => {
                Some(&labels[offsets[i as usize] as usize..offsets[i as usize + 1] as usize])
            }
            _ => None,
        }
    }

    /// Drop the rows whose bit is set in `remove`, preserving order of the
    /// survivors. Returns old-id -> new-id (u32::MAX for removed rows).
    /// Used when compacting after deletions.
    pub fn retain_rows(&mut self, remove: &crate::bits::Bitmap) -> Result<Vec<u32>> {
        let n = self.n();
        assert_eq!(remove.len(), n, "remove mask length");
        if remove.count_ones() == n {
            return Err(Error::EmptyDataset);
        }
        let mut remap = vec![u32::MAX; n];
        let mut vectors = Vec::with_capacity(self.vectors.len());
        let mut next = 0u32;
        for (i, slot) in remap.iter_mut().enumerate() {
            if !remove.get(i) {
                *slot = next;
                next += 1;
                vectors.extend_from_slice(self.vector(i as u32));
            }
        }
        self.features = match std::mem::replace(&mut self.features, Features::None) {
            Features::None => Features::None,
            Features::Scalars(v) => Features::Scalars(
                v.into_iter().enumerate().filter(|(i, _)| !remove.get(*i)).map(|(_, s)| s).collect(),
            ),
            Features::LabelSets { offsets, labels } => {
                let mut new_off = Vec::with_capacity(offsets.len());
                let mut new_lab = Vec::with_capacity(labels.len());
                new_off.push(0u32);
                for i in 0..n {
                    if !remove.get(i) {
                        new_lab.extend_from_slice(
                            &labels[offsets[i] as usize..offsets[i + 1] as usize],
                        );
                        new_off.push(new_lab.len() as u32);
                    }
                }
                Features::LabelSets { offsets: new_off, labels: new_lab }
            }
            Features::Bytes { offsets, bytes } => {
                let mut new_off = Vec::with_capacity(offsets.len());
                let mut new_bytes = Vec::with_capacity(bytes.len());
                new_off.push(0u32);
                for i in 0..n {
                    if !remove.get(i) {
                        new_bytes.extend_from_slice(
                            &bytes[offsets[i] as usize..offsets[i + 1] as usize],
                        );
                        new_off.push(new_bytes.len() as u32);
                    }
                }
                Features::Bytes { offsets: new_off, bytes: new_bytes }
            }
        };
        self.vectors = vectors;
        Ok(remap)
    }
}
