//! Class-rebalancing loss masks.

use alloc::vec;
use alloc::vec::Vec;

use rand::seq::index::sample;
use rand::Rng;

use crate::labels::{LabelMap, IGNORE};
use crate::layers::LossMask;

/// Keeps every `minority` pixel and a uniform subset of `majority` pixels
/// at most `ratio` times as large.
fn rebalance<R: Rng + ?Sized>(h: usize, w: usize, minority: &[usize], majority: &[usize], ratio: usize, rng: &mut R) -> LossMask {
    let mut data = vec![0u8; h * w];
    for &i in minority {
        data[i] = 1;
    }
    let keep = minority.len().saturating_mul(ratio);
    if keep >= majority.len() {
        for &i in majority {
            data[i] = 1;
        }
    } else {
        for j in sample(rng, majority.len(), keep) {
            data[majority[j]] = 1;
        }
    }
    LossMask::from_vec(1, h, w, data).expect("mask extents match")
}

/// Mask for the gate loss: all boundary pixels (value 0) plus `ratio`
/// times as many non-boundary ones. Empty when there is no boundary.
pub fn boundary_sampling_mask<R: Rng + ?Sized>(gate_gt: &[u8], h: usize, w: usize, ratio: usize, rng: &mut R) -> LossMask {
    assert_eq!(gate_gt.len(), h * w, "gate map extents");
    let (mut edge, mut flat) = (Vec::new(), Vec::new());
    for (i, &v) in gate_gt.iter().enumerate() {
        match v {
            0 => edge.push(i),
            IGNORE => {}
            _ => flat.push(i),
        }
    }
    if edge.is_empty() {
        return LossMask::empty(1, h, w);
    }
    rebalance(h, w, &edge, &flat, ratio, rng)
}

/// Mask for the label losses: every foreground pixel plus background
/// (class 0) pixels up to `factor` times the foreground count.
pub fn background_sampling_mask<R: Rng + ?Sized>(labels: &LabelMap, factor: usize, rng: &mut R) -> LossMask {
    let (mut fg, mut bg) = (Vec::new(), Vec::new());
    for (i, &v) in labels.data().iter().enumerate() {
        match v {
            0 => bg.push(i),
            IGNORE => {}
            _ => fg.push(i),
        }
    }
    rebalance(labels.height(), labels.width(), &fg, &bg, factor, rng)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::labels::Vocabulary;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn boundary_ratio() {
        let mut gt = vec![1u8; 10_100];
        gt[..100].iter_mut().for_each(|v| *v = 0);
        let m = boundary_sampling_mask(&gt, 101, 100, 5, &mut ChaCha8Rng::seed_from_u64(1));
        assert_eq!(m.count(), 600);
        assert!(m.data()[..100].iter().all(|&v| v == 1));
    }

    #[test]
    fn all_boundary_is_full() {
        let m = boundary_sampling_mask(&[0; 12], 3, 4, 5, &mut ChaCha8Rng::seed_from_u64(1));
        assert_eq!(m.count(), 12);
    }

    #[test]
    fn no_boundary_is_empty() {
        let m = boundary_sampling_mask(&[1; 12], 3, 4, 5, &mut ChaCha8Rng::seed_from_u64(1));
        assert_eq!(m.count(), 0);
    }

    #[test]
    fn background_factor() {
        let mut labels = LabelMap::filled(201, 1000, Vocabulary::Coarse, 0);
        labels.data_mut()[..1000].iter_mut().for_each(|v| *v = 1);
        let m = background_sampling_mask(&labels, 5, &mut ChaCha8Rng::seed_from_u64(2));
        assert_eq!(m.count(), 6000);
    }

    #[test]
    fn small_background_kept_whole() {
        let mut labels = LabelMap::filled(4, 4, Vocabulary::Coarse, 0);
        labels.data_mut()[..8].iter_mut().for_each(|v| *v = 2);
        let m = background_sampling_mask(&labels, 5, &mut ChaCha8Rng::seed_from_u64(2));
        assert_eq!(m.count(), 16);
    }

    #[test]
    fn foreground_free_is_empty() {
        let labels = LabelMap::filled(4, 4, Vocabulary::Coarse, 0);
        assert_eq!(background_sampling_mask(&labels, 5, &mut ChaCha8Rng::seed_from_u64(2)).count(), 0);
    }
}
