use rand::Rng;

use super::{DataError, Dataset, TrainWindow};

/// Uniform negative sampling over the items a user has not interacted with
/// in training (padding excluded).
#[derive(Debug, Clone)]
pub struct NegativeSampler {
    num_items: u32,
    /// Per user: sorted distinct training items.
    consumed: Vec<Vec<u32>>,
    rate: usize,
}

impl NegativeSampler {
    /// `rate` is the number of negatives per target.
    pub fn new(dataset: &Dataset, rate: usize) -> Self {
        let consumed = (0..dataset.num_users)
            .map(|u| {
                let mut items = dataset.train(u).to_vec();
                items.sort_unstable();
                items.dedup();
                items
            })
            .collect();
        Self { num_items: dataset.num_items as u32, consumed, rate }
    }

    pub fn rate(&self) -> usize {
        self.rate
    }

    pub fn candidate_count(&self, user: u32) -> usize {
        self.num_items as usize - self.consumed[user as usize].len()
    }

    /// `rate` negatives for each target of `window`.
    pub fn sample<R: Rng + ?Sized>(&self, window: &TrainWindow, rng: &mut R) -> Result<Vec<u32>, DataError> {
        let mut out = Vec::with_capacity(self.rate * window.targets.len());
        self.sample_into(window.user, self.rate * window.targets.len(), rng, &mut out)?;
        Ok(out)
    }

    pub fn sample_into<R: Rng + ?Sized>(
        &self,
        user: u32,
        count: usize,
        rng: &mut R,
        out: &mut Vec<u32>,
    ) -> Result<(), DataError> {
        let consumed = &self.consumed[user as usize];
        let free = self.num_items as usize - consumed.len();
        if free == 0 {
            return Err(DataError::NoCandidates { user });
        }
        for _ in 0..count {
            let rank = rng.random_range(0..free) as u32;
            out.push(nth_free(consumed, rank));
        }
        Ok(())
    }
}

/// The `rank`-th (0-based) item id in `1..` that is absent from the sorted
/// `taken` list.
fn nth_free(taken: &[u32], rank: u32) -> u32 {
    // smallest f with f - |{t <= f}| == rank + 1; iterate up to the fixed point
    let mut f = rank + 1;
    loop {
        let below = taken.partition_point(|&t| t <= f) as u32;
        let next = rank + 1 + below;
        if next == f {
            return f;
        }
        f = next;
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::DatasetMeta;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn dataset(num_items: usize, seqs: Vec<Vec<u32>>) -> Dataset {
        let boundaries = seqs.iter().map(|s| s.len()).collect();
        Dataset {
            num_users: seqs.len(),
            num_items,
            sequences: seqs,
            boundaries,
            meta: DatasetMeta::default(),
            keys: None,
        }
    }

    #[test]
    fn nth_free_matches_enumeration() {
        let taken = [2, 3, 7, 8, 9];
        let free: Vec<u32> = (1..=12).filter(|i| !taken.contains(i)).collect();
        for (r, &want) in free.iter().enumerate() {
            assert_eq!(nth_free(&taken, r as u32), want);
        }
    }

    #[test]
    fn single_candidate() {
        let ds = dataset(4, vec![vec![1, 2, 4]]);
        let s = NegativeSampler::new(&ds, 3);
        let w = TrainWindow { user: 0, input: vec![0; 5], targets: vec![1, 2, 4] };
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        assert_eq!(s.sample(&w, &mut rng).unwrap(), vec![3; 9]);
    }

    #[test]
    fn user_who_consumed_everything() {
        let ds = dataset(3, vec![vec![3, 1, 2, 1]]);
        let s = NegativeSampler::new(&ds, 1);
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let err = s.sample_into(0, 1, &mut rng, &mut Vec::new()).unwrap_err();
        assert!(matches!(err, DataError::NoCandidates { user: 0 }));
    }

    #[test]
    fn uniform_over_candidates() {
        let ds = dataset(10, vec![vec![2, 5, 5, 9]]);
        let s = NegativeSampler::new(&ds, 1);
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        let draws = 100_000;
        let mut out = Vec::new();
        s.sample_into(0, draws, &mut rng, &mut out).unwrap();
        let mut counts = [0usize; 11];
        for &i in &out {
            counts[i as usize] += 1;
        }
        let p = 1.0 / 7.0;
        let mean = draws as f64 * p;
        let sd = (draws as f64 * p * (1.0 - p)).sqrt();
        for item in 1..=10u32 {
            let c = counts[item as usize] as f64;
            if [2, 5, 9].contains(&item) {
                assert_eq!(c, 0.0);
            } else {
                assert!((c - mean).abs() < 3.0 * sd, "item {item}: {c} vs {mean}");
            }
        }
        assert_eq!(counts[0], 0);
    }
}
