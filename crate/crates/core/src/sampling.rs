//! Seeded uniform sampling shared by the negative-pair generators and the
//! dataset reducers.

use std::collections::{BTreeSet, HashSet};

use rand::seq::index;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::kg::{EntityId, Pair};

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Draws up to `count` distinct pairs uniformly from `firsts × seconds`
/// minus `excluded`. Self-pairs are never produced.
///
/// Returns the sample and the number of admissible pairs.
pub fn sample_cross_product(
    firsts: &BTreeSet<EntityId>,
    seconds: &BTreeSet<EntityId>,
    excluded: &HashSet<Pair>,
    count: usize,
    seed: u64,
) -> (BTreeSet<Pair>, usize) {
    let firsts: Vec<EntityId> = firsts.iter().copied().collect();
    let seconds: Vec<EntityId> = seconds.iter().copied().collect();
    let admissible = |p: &Pair| p.0 != p.1 && !excluded.contains(p);
    let total = firsts.len() * seconds.len();
    // Lower bound on the admissible count; selects the sampling strategy.
    let floor = total.saturating_sub(excluded.len() + firsts.len().min(seconds.len()));

    if count == 0 || total == 0 {
        let available = if total == 0 { 0 } else { count_admissible(&firsts, &seconds, &admissible) };
        return (BTreeSet::new(), available);
    }

    let mut rng = rng(seed);
    if count.saturating_mul(4) >= floor {
        let all: Vec<Pair> = firsts
            .iter()
            .flat_map(|&f| seconds.iter().map(move |&s| (f, s)))
            .filter(|p| admissible(p))
            .collect();
        let available = all.len();
        if count >= available {
            return (all.into_iter().collect(), available);
        }
        let picked = index::sample(&mut rng, available, count);
        return (picked.into_iter().map(|i| all[i]).collect(), available);
    }

    let mut out = BTreeSet::new();
    while out.len() < count {
        let i = rng.gen_range(0..total);
        let p = (firsts[i / seconds.len()], seconds[i % seconds.len()]);
        if admissible(&p) {
            out.insert(p);
        }
    }
    (out, count_admissible(&firsts, &seconds, &admissible))
}

fn count_admissible(firsts: &[EntityId], seconds: &[EntityId], admissible: &impl Fn(&Pair) -> bool) -> usize {
    firsts
        .iter()
        .map(|&f| seconds.iter().filter(|&&s| admissible(&(f, s))).count())
        .sum()
}

/// Uniformly chooses `count` of `n` indices, returned ascending.
pub fn choose_indices(n: usize, count: usize, seed: u64) -> Vec<usize> {
    let mut picked = index::sample(&mut rng(seed), n, count.min(n)).into_vec();
    picked.sort_unstable();
    picked
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ids(r: std::ops::Range<u32>) -> BTreeSet<EntityId> {
        r.map(EntityId).collect()
    }

    #[test]
    fn exhaustive_branch_returns_everything() {
        let (s, avail) = sample_cross_product(&ids(0..3), &ids(10..12), &HashSet::new(), 100, 1);
        assert_eq!(avail, 6);
        assert_eq!(s.len(), 6);
    }

    #[test]
    fn rejection_branch_is_deterministic_and_admissible() {
        let excluded: HashSet<Pair> = [(EntityId(0), EntityId(100))].into_iter().collect();
        let a = sample_cross_product(&ids(0..50), &ids(100..150), &excluded, 20, 9);
        let b = sample_cross_product(&ids(0..50), &ids(100..150), &excluded, 20, 9);
        assert_eq!(a, b);
        assert_eq!(a.0.len(), 20);
        assert_eq!(a.1, 2499);
        assert!(!a.0.contains(&(EntityId(0), EntityId(100))));
    }

    #[test]
    fn self_pairs_are_skipped() {
        let (s, avail) = sample_cross_product(&ids(0..3), &ids(0..3), &HashSet::new(), 100, 1);
        assert_eq!(avail, 6);
        assert!(s.iter().all(|p| p.0 != p.1));
    }
}
