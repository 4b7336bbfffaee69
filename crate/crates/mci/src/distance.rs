//! Distance kernel.
//!
//! All comparisons in the engine are order-based, so squared Euclidean
//! distance is used throughout; it is order-isomorphic to true L2 and avoids
//! a square root per pair. The one place that needs a true distance (the
//! densification threshold, which scales a distance by a ratio) takes the
//! root explicitly at the call site.

use crate::error::{Error, Result};

/// Squared L2 distance with f32 accumulation.
///
/// Lengths must match; this is the unchecked hot-path kernel.
#[inline]
pub fn sq_l2(a: &[f32], b: &[f32]) -> f32 {
    debug_assert_eq!(a.len(), b.len());
    // Four independent accumulators so the loop vectorizes well.
    let mut acc = [0.0f32; 4];
    let chunks = a.len() / 4;
    for i in 0..chunks {
        let j = i * 4;
        for l in 0..4 {
            let d = a[j + l] - b[j + l];
            acc[l] += d * d;
        }
    }
    let mut s = acc[0] + acc[1] + acc[2] + acc[3];
    for i in chunks * 4..a.len() {
        let d = a[i] - b[i];
        s += d * d;
    }
    s
}

/// Squared L2 distance with f64 accumulation, for callers that need the
/// extra precision (statistics, threshold audits).
#[inline]
pub fn sq_l2_f64(a: &[f32], b: &[f32]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    a.iter().zip(b).map(|(x, y)| (*x as f64 - *y as f64).powi(2)).sum()
}

/// Checked squared L2 distance.
pub fn distance(a: &[f32], b: &[f32]) -> Result<f32> {
    if a.len() != b.len() {
        return Err(Error::DimensionMismatch { expected: a.len(), got: b.len() });
    }
    Ok(sq_l2(a, b))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn identity_is_zero() {
        assert_eq!(distance(&[0.0, 0.0], &[0.0, 0.0]).unwrap(), 0.0);
    }

    #[test]
    fn three_four_five() {
        // Squared distance; the true distance is 5.
        assert_eq!(distance(&[0.0, 0.0], &[3.0, 4.0]).unwrap(), 25.0);
    }

    #[test]
    fn length_mismatch_rejected() {
        assert!(matches!(
            distance(&[1.0], &[1.0, 2.0]),
            Err(Error::DimensionMismatch { expected: 1, got: 2 })
        ));
    }

    #[test]
    fn remainder_lanes_counted() {
        // 7 components: exercises both the 4-wide chunks and the tail.
        let a = [1.0f32, 2.0, 3.0, 4.0, 5.0, 6.0, 7.0];
        let b = [0.0f32; 7];
        let expect: f32 = a.iter().map(|x| x * x).sum();
        assert_eq!(sq_l2(&a, &b), expect);
    }

    fn vec_pair(dim: usize) -> impl Strategy<Value = (Vec<f32>, Vec<f32>)> {
        let comp = -100.0f32..100.0f32;
        (
            proptest::collection::vec(comp.clone(), dim),
            proptest::collection::vec(comp, dim),
        )
    }

    proptest! {
        #[test]
        fn symmetric_and_nonnegative((a, b) in vec_pair(13)) {
            let ab = sq_l2(&a, &b);
            let ba = sq_l2(&b, &a);
            prop_assert_eq!(ab, ba);
            prop_assert!(ab >= 0.0);
        }

        #[test]
        fn zero_iff_equal(a in proptest::collection::vec(-100.0f32..100.0, 9)) {
            prop_assert_eq!(sq_l2(&a, &a), 0.0);
        }

        #[test]
        fn triangle_inequality((a, b) in vec_pair(8), c in proptest::collection::vec(-100.0f32..100.0, 8)) {
            let ab = (sq_l2_f64(&a, &b)).sqrt();
            let bc = (sq_l2_f64(&b, &c)).sqrt();
            let ac = (sq_l2_f64(&a, &c)).sqrt();
            prop_assert!(ac <= (ab + bc) * (1.0 + 1e-6));
        }

        #[test]
        fn f32_and_f64_accumulation_agree((a, b) in vec_pair(64)) {
            let s32 = sq_l2(&a, &b) as f64;
            let s64 = sq_l2_f64(&a, &b);
            let scale = s64.max(1.0);
            prop_assert!((s32 - s64).abs() / scale < 1e-4);
        }
    }
}
