//! Deterministic train/validation partitioning.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};

/// Shuffles `items` with a seeded generator and splits them, putting
/// `ceil(fraction * n)` items in the first partition.
pub fn split_train_val<T>(mut items: Vec<T>, fraction: f64, seed: u64) -> Result<(Vec<T>, Vec<T>)> {
    if items.is_empty() {
        return Err(Error::EmptyDataset("nothing to split".to_string()));
    }
    if !(fraction > 0.0 && fraction < 1.0) {
        return Err(Error::InvalidConfig(format!(
            "split fraction {fraction} outside (0, 1)"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for i in (1..items.len()).rev() {
        let j = rng.gen_range(0..=i);
        items.swap(i, j);
    }
    let n_train = ((fraction * items.len() as f64).ceil() as usize).min(items.len());
    let val = items.split_off(n_train);
    Ok((items, val))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ninety_ten() {
        let (train, val) = split_train_val((0..10).collect(), 0.9, 1).unwrap();
        assert_eq!(train.len(), 9);
        assert_eq!(val.len(), 1);
    }

    #[test]
    fn same_seed_same_split() {
        let a = split_train_val((0..100).collect::<Vec<_>>(), 0.9, 42).unwrap();
        let b = split_train_val((0..100).collect::<Vec<_>>(), 0.9, 42).unwrap();
        assert_eq!(a, b);
        let c = split_train_val((0..100).collect::<Vec<_>>(), 0.9, 43).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn even_split() {
        let (train, val) = split_train_val(vec![1, 2, 3, 4], 0.5, 7).unwrap();
        assert_eq!(train.len(), 2);
        assert_eq!(val.len(), 2);
    }

    #[test]
    fn empty_input_errors() {
        assert!(split_train_val(Vec::<u8>::new(), 0.9, 0).is_err());
    }

    #[test]
    fn split_is_a_partition() {
        let (mut train, val) = split_train_val((0..37).collect::<Vec<_>>(), 0.7, 5).unwrap();
        train.extend(val);
        train.sort_unstable();
        assert_eq!(train, (0..37).collect::<Vec<_>>());
    }
}
