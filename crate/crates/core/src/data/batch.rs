use ndarray::{Array1, Array2, Axis};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::{DataError, Dataset};

/// One training minibatch, gathered from a dataset.
#[derive(Debug, Clone, PartialEq)]
pub struct Minibatch {
    pub indices: Vec<usize>,
    pub features: Array2<f64>,
    pub targets: Array1<f64>,
}

/// Row indices for every minibatch of one epoch.
///
/// Each `(seed, epoch)` pair gives its own permutation. With `drop_short` the
/// final partial batch is discarded.
pub fn minibatch_indices(
    n: usize,
    batch_size: usize,
    seed: u64,
    epoch: u64,
    drop_short: bool,
) -> Result<Vec<Vec<usize>>, DataError> {
    if batch_size == 0 {
        return Err(DataError::Config("batch size must be at least 1".into()));
    }
    if batch_size > n {
        return Err(DataError::Config(format!(
            "batch size {batch_size} exceeds the {n} available rows"
        )));
    }
    let mut order: Vec<usize> = (0..n).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(epoch);
    order.shuffle(&mut rng);
    Ok(order
        .chunks(batch_size)
        .filter(|c| !drop_short || c.len() == batch_size)
        .map(<[usize]>::to_vec)
        .collect())
}

pub fn minibatches(
    data: &Dataset,
    batch_size: usize,
    seed: u64,
    epoch: u64,
    drop_short: bool,
) -> Result<Vec<Minibatch>, DataError> {
    Ok(
        minibatch_indices(data.len(), batch_size, seed, epoch, drop_short)?
            .into_iter()
            .map(|indices| Minibatch {
                features: data.features().select(Axis(0), &indices),
                targets: data.targets().select(Axis(0), &indices),
                indices,
            })
            .collect(),
    )
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn drop_and_keep_short() {
        let sizes = |drop| {
            minibatch_indices(10, 4, 1, 0, drop)
                .unwrap()
                .iter()
                .map(Vec::len)
                .collect::<Vec<_>>()
        };
        assert_eq!(sizes(true), vec![4, 4]);
        assert_eq!(sizes(false), vec![4, 4, 2]);
    }

    #[test]
    fn epochs_permute_the_same_rows() {
        let a: Vec<usize> = minibatch_indices(50, 7, 9, 0, false).unwrap().concat();
        let b: Vec<usize> = minibatch_indices(50, 7, 9, 1, false).unwrap().concat();
        assert_ne!(a, b);
        let (mut sa, mut sb) = (a.clone(), b.clone());
        sa.sort_unstable();
        sb.sort_unstable();
        assert_eq!(sa, sb);
        assert_eq!(sa, (0..50).collect::<Vec<_>>());
        assert_eq!(a, minibatch_indices(50, 7, 9, 0, false).unwrap().concat());
    }

    #[test]
    fn oversized_batch_is_config_error() {
        assert!(matches!(
            minibatch_indices(3, 4, 0, 0, false),
            Err(DataError::Config(_))
        ));
        assert!(matches!(
            minibatch_indices(3, 0, 0, 0, false),
            Err(DataError::Config(_))
        ));
    }
}
