use std::cmp::Ordering;

use crate::error::{Result, TensorError};
use crate::real::Real;

/// Indices of the `k` largest values, ties going to the smaller index,
/// returned in ascending index order.
pub fn topk_indices<T: Real>(values: &[T], k: usize) -> Result<Vec<usize>> {
    if k == 0 || k > values.len() {
        return Err(TensorError::Argument(format!(
            "top-k with k = {k} over {} values",
            values.len()
        )));
    }
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&a, &b| {
        values[b]
            .partial_cmp(&values[a])
            .unwrap_or(Ordering::Equal)
            .then(a.cmp(&b))
    });
    order.truncate(k);
    order.sort_unstable();
    Ok(order)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn picks_largest_with_low_index_ties() {
        assert_eq!(topk_indices(&[0.1f64, 0.9, 0.5], 2).unwrap(), vec![1, 2]);
        assert_eq!(topk_indices(&[0.5f64, 0.5], 1).unwrap(), vec![0]);
        assert_eq!(topk_indices(&[3.0f32, -1.0, 2.0, 7.0], 4).unwrap(), vec![0, 1, 2, 3]);
    }

    #[test]
    fn k_out_of_range() {
        assert!(topk_indices(&[1.0f64, 2.0], 0).is_err());
        assert!(topk_indices(&[1.0f64, 2.0], 3).is_err());
    }
}
