//! Anything that can score every item for a user, plus the popularity
//! baseline.

use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::model::{CosRecModel, ScoreVector};
use crate::tensor::Scalar;

/// Scores all `num_items` items for a user given their recent history.
///
/// `score_many` receives `users.len() * window_len()` window ids.
pub trait Scorer: Sync {
    fn num_items(&self) -> usize;

    /// History length consumed; 0 when history is ignored.
    fn window_len(&self) -> usize;

    fn score(&self, user: u32, window: &[u32]) -> Result<ScoreVector>;

    fn score_many(&self, users: &[u32], windows: &[u32]) -> Result<Vec<ScoreVector>> {
        let l = self.window_len();
        users.iter().enumerate().map(|(i, &u)| self.score(u, &windows[i * l..(i + 1) * l])).collect()
    }
}

/// Ranks items by how often they occur in the training portions.
#[derive(Debug, Clone, PartialEq)]
pub struct PopRec {
    counts: Vec<u64>,
}

impl PopRec {
    pub fn fit(dataset: &Dataset) -> Self {
        let mut counts = vec![0u64; dataset.num_items];
        for u in 0..dataset.num_users {
            for &item in dataset.train(u) {
                counts[item as usize - 1] += 1;
            }
        }
        Self { counts }
    }

    /// Training occurrences of `item` (1-based id).
    pub fn count(&self, item: u32) -> u64 {
        self.counts[item as usize - 1]
    }
}

impl Scorer for PopRec {
    fn num_items(&self) -> usize {
        self.counts.len()
    }

    fn window_len(&self) -> usize {
        0
    }

    fn score(&self, _user: u32, _window: &[u32]) -> Result<ScoreVector> {
        Ok(ScoreVector(self.counts.iter().map(|&c| c as f64).collect()))
    }
}

impl<S: Scalar> Scorer for CosRecModel<S> {
    fn num_items(&self) -> usize {
        self.config().num_items
    }

    fn window_len(&self) -> usize {
        self.config().markov_order
    }

    fn score(&self, user: u32, window: &[u32]) -> Result<ScoreVector> {
        CosRecModel::score(self, user, window)
    }

    fn score_many(&self, users: &[u32], windows: &[u32]) -> Result<Vec<ScoreVector>> {
        if users.is_empty() {
            return Ok(Vec::new());
        }
        let logits = self.score_batch(users, windows)?;
        let n = self.config().num_items;
        if logits.len() != users.len() * n {
            return Err(Error::Config("score batch has unexpected width".into()));
        }
        Ok(logits.data().chunks_exact(n).map(|row| ScoreVector(row.iter().map(|v| v.as_f64()).collect())).collect())
    }
}
