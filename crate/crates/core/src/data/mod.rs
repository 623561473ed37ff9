//! Interaction logs to training windows.

mod format;
mod parse;
mod preprocess;
mod sampler;
mod synthetic;
mod windows;

pub use format::{read_dataset, write_dataset, FORMAT_NAME, FORMAT_VERSION};
pub use parse::{parse_gowalla, parse_movielens};
pub use preprocess::{preprocess, train_len, FilterConfig};
pub use sampler::NegativeSampler;
pub use synthetic::cyclic_patterns;
pub use windows::{generate_windows, last_window, user_windows, TrainWindow};

use serde::Serialize;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum DataError {
    #[error("line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error("filter thresholds must be at least 1")]
    Threshold,
    #[error("no interactions left after filtering")]
    Empty,
    #[error("user {user} has interacted with every item; no negatives to sample")]
    NoCandidates { user: u32 },
    #[error("dataset file: {0}")]
    Format(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// One logged interaction before reindexing.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RawInteraction {
    pub user_key: String,
    pub item_key: String,
    /// Seconds since the epoch; never negative.
    pub timestamp: i64,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct DatasetMeta {
    pub min_user_actions: u32,
    pub min_item_actions: u32,
    pub seed: u64,
}

/// Source identifiers of the reindexed users and items. `items[0]` is the
/// padding placeholder.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Keys {
    pub users: Vec<String>,
    pub items: Vec<String>,
}

/// Reindexed, chronologically ordered interaction sequences.
///
/// Users are `0..num_users`, items `1..=num_items`. The first
/// `boundaries[u]` items of user `u` are training data, the rest test data.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Dataset {
    pub num_users: usize,
    pub num_items: usize,
    pub sequences: Vec<Vec<u32>>,
    pub boundaries: Vec<usize>,
    pub meta: DatasetMeta,
    pub keys: Option<Keys>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DatasetStats {
    pub users: usize,
    pub items: usize,
    pub actions: usize,
    pub avg_actions_per_user: f64,
    pub avg_actions_per_item: f64,
}

impl Dataset {
    pub fn train(&self, user: usize) -> &[u32] {
        &self.sequences[user][..self.boundaries[user]]
    }

    pub fn test(&self, user: usize) -> &[u32] {
        &self.sequences[user][self.boundaries[user]..]
    }

    pub fn num_actions(&self) -> usize {
        self.sequences.iter().map(Vec::len).sum()
    }

    pub fn stats(&self) -> DatasetStats {
        let actions = self.num_actions();
        DatasetStats {
            users: self.num_users,
            items: self.num_items,
            actions,
            avg_actions_per_user: actions as f64 / self.num_users.max(1) as f64,
            avg_actions_per_item: actions as f64 / self.num_items.max(1) as f64,
        }
    }

    /// Carves the last `fraction` (rounded down) of each training portion
    /// off as a held-out set. In the result, the sequences stop at the old
    /// boundary and the "test" portion is the held-out tail.
    pub fn validation_split(&self, fraction: f64) -> Dataset {
        let mut out = self.clone();
        for (seq, b) in out.sequences.iter_mut().zip(out.boundaries.iter_mut()) {
            seq.truncate(*b);
            let held = ((*b as f64) * fraction + 1e-9).floor() as usize;
            *b -= held.min(*b);
        }
        out
    }
}
