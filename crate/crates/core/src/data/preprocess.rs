use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use super::{DataError, Dataset, DatasetMeta, Keys, RawInteraction};

/// Minimum interaction counts for keeping users and items.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct FilterConfig {
    pub min_user_actions: u32,
    pub min_item_actions: u32,
}

impl FilterConfig {
    pub const MOVIELENS: Self = Self { min_user_actions: 5, min_item_actions: 5 };
    pub const GOWALLA: Self = Self { min_user_actions: 15, min_item_actions: 15 };
}

/// Filters rare items then rare users (one pass each), reindexes both
/// densely in order of first appearance, and orders every user's items by
/// timestamp with ties kept in input order.
pub fn preprocess(raw: &[RawInteraction], filter: FilterConfig, seed: u64) -> Result<Dataset, DataError> {
    if filter.min_user_actions == 0 || filter.min_item_actions == 0 {
        return Err(DataError::Threshold);
    }
    let mut item_counts: HashMap<&str, u32> = HashMap::new();
    for r in raw {
        *item_counts.entry(&r.item_key).or_default() += 1;
    }
    let kept: Vec<&RawInteraction> =
        raw.iter().filter(|r| item_counts[r.item_key.as_str()] >= filter.min_item_actions).collect();

    let mut user_counts: HashMap<&str, u32> = HashMap::new();
    for r in &kept {
        *user_counts.entry(&r.user_key).or_default() += 1;
    }
    let kept: Vec<&RawInteraction> =
        kept.into_iter().filter(|r| user_counts[r.user_key.as_str()] >= filter.min_user_actions).collect();
    if kept.is_empty() {
        return Err(DataError::Empty);
    }

    let mut user_ids: HashMap<&str, u32> = HashMap::new();
    let mut item_ids: HashMap<&str, u32> = HashMap::new();
    let mut keys = Keys { users: Vec::new(), items: vec![String::new()] };
    let mut events: Vec<Vec<(i64, u32)>> = Vec::new();
    for r in kept {
        let u = *user_ids.entry(&r.user_key).or_insert_with(|| {
            keys.users.push(r.user_key.clone());
            events.push(Vec::new());
            (keys.users.len() - 1) as u32
        });
        let i = *item_ids.entry(&r.item_key).or_insert_with(|| {
            keys.items.push(r.item_key.clone());
            (keys.items.len() - 1) as u32
        });
        events[u as usize].push((r.timestamp, i));
    }

    let sequences: Vec<Vec<u32>> = events
        .into_iter()
        .map(|mut ev| {
            // stable: equal timestamps keep file order
            ev.sort_by_key(|&(ts, _)| ts);
            ev.into_iter().map(|(_, i)| i).collect()
        })
        .collect();
    let boundaries = sequences.iter().map(|s| train_len(s.len())).collect();
    Ok(Dataset {
        num_users: keys.users.len(),
        num_items: keys.items.len() - 1,
        sequences,
        boundaries,
        meta: DatasetMeta {
            min_user_actions: filter.min_user_actions,
            min_item_actions: filter.min_item_actions,
            seed,
        },
        keys: Some(keys),
    })
}

/// `ceil(0.8 * n)` in exact integer arithmetic.
pub fn train_len(n: usize) -> usize {
    (4 * n).div_ceil(5)
}
