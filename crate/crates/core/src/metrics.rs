//! Ranking metrics over the full candidate list.

use std::collections::HashSet;

use rayon::prelude::*;
use serde::Serialize;

use crate::baselines::Scorer;
use crate::data::{last_window, Dataset};
use crate::error::{Error, Result};

/// Cutoffs reported for precision and recall.
pub const CUTOFFS: [usize; 3] = [1, 5, 10];

/// Users scored per batch during evaluation.
const EVAL_BATCH: usize = 256;

/// Item ids in descending score order.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RankedList(pub Vec<u32>);

impl RankedList {
    pub fn items(&self) -> &[u32] {
        &self.0
    }
}

/// Ranks items `1..=scores.len()` (score `i` belongs to item `i + 1`),
/// dropping `exclude`. Ties go to the smaller id.
pub fn rank_items(scores: &[f64], exclude: &[u32]) -> RankedList {
    let mut skip = vec![false; scores.len() + 1];
    for &e in exclude {
        if let Some(s) = skip.get_mut(e as usize) {
            *s = true;
        }
    }
    let mut items: Vec<u32> = (1..=scores.len() as u32).filter(|&i| !skip[i as usize]).collect();
    items.sort_by(|&a, &b| scores[b as usize - 1].total_cmp(&scores[a as usize - 1]).then(a.cmp(&b)));
    RankedList(items)
}

/// Precision and recall at `n`; `None` when nothing is relevant.
pub fn precision_recall_at(ranked: &[u32], relevant: &HashSet<u32>, n: usize) -> Option<(f64, f64)> {
    if relevant.is_empty() || n == 0 {
        return None;
    }
    let hits = ranked.iter().take(n).filter(|i| relevant.contains(i)).count() as f64;
    Some((hits / n as f64, hits / relevant.len() as f64))
}

/// Average precision over the whole list, normalized by `|relevant|`.
pub fn average_precision(ranked: &[u32], relevant: &HashSet<u32>) -> Option<f64> {
    if relevant.is_empty() {
        return None;
    }
    let mut hits = 0usize;
    let mut sum = 0.0;
    for (pos, item) in ranked.iter().enumerate() {
        if relevant.contains(item) {
            hits += 1;
            sum += hits as f64 / (pos + 1) as f64;
        }
    }
    Some(sum / relevant.len() as f64)
}

/// One user's metrics.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct UserMetrics {
    pub user: u32,
    pub average_precision: f64,
    pub precision: [f64; 3],
    pub recall: [f64; 3],
}

impl UserMetrics {
    pub fn compute(user: u32, ranked: &[u32], relevant: &HashSet<u32>) -> Option<Self> {
        let average_precision = average_precision(ranked, relevant)?;
        let mut precision = [0.0; 3];
        let mut recall = [0.0; 3];
        for (k, &n) in CUTOFFS.iter().enumerate() {
            (precision[k], recall[k]) = precision_recall_at(ranked, relevant, n)?;
        }
        Some(Self { user, average_precision, precision, recall })
    }
}

/// Means over evaluated users.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MetricsReport {
    pub users: usize,
    pub map: f64,
    pub precision: [f64; 3],
    pub recall: [f64; 3],
}

impl MetricsReport {
    /// Means in user order; zeros when `per_user` is empty.
    pub fn from_users(per_user: &[UserMetrics]) -> Self {
        let n = per_user.len();
        let mut r = Self { users: n, map: 0.0, precision: [0.0; 3], recall: [0.0; 3] };
        if n == 0 {
            return r;
        }
        for m in per_user {
            r.map += m.average_precision;
            for k in 0..3 {
                r.precision[k] += m.precision[k];
                r.recall[k] += m.recall[k];
            }
        }
        let nf = n as f64;
        r.map /= nf;
        for k in 0..3 {
            r.precision[k] /= nf;
            r.recall[k] /= nf;
        }
        r
    }

    /// Single-line JSON with four decimals per metric.
    pub fn to_json_line(&self) -> String {
        let f = |v: f64| format!("{v:.4}");
        format!(
            "{{\"users\":{},\"map\":{},\"prec@1\":{},\"prec@5\":{},\"prec@10\":{},\"recall@1\":{},\"recall@5\":{},\"recall@10\":{}}}",
            self.users,
            f(self.map),
            f(self.precision[0]),
            f(self.precision[1]),
            f(self.precision[2]),
            f(self.recall[0]),
            f(self.recall[1]),
            f(self.recall[2]),
        )
    }
}

/// Per-user metrics for every user with a non-empty test portion, in user
/// order. The input window is the last `window_len` training items; the
/// candidates are all items the user did not train on.
///
/// With `threads > 1` batches are scored on a dedicated pool. Results do not
/// depend on the thread count.
pub fn evaluate_users<M: Scorer + ?Sized>(scorer: &M, dataset: &Dataset, threads: usize) -> Result<Vec<UserMetrics>> {
    if scorer.num_items() != dataset.num_items {
        return Err(Error::Config(format!(
            "scorer knows {} items, dataset has {}",
            scorer.num_items(),
            dataset.num_items
        )));
    }
    let users: Vec<u32> = (0..dataset.num_users).filter(|&u| !dataset.test(u).is_empty()).map(|u| u as u32).collect();
    let chunks: Vec<&[u32]> = users.chunks(EVAL_BATCH).collect();
    let run = |chunk: &&[u32]| evaluate_chunk(scorer, dataset, chunk);

    let per_chunk: Vec<Result<Vec<UserMetrics>>> = if threads > 1 {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build()
            .map_err(|e| Error::Config(format!("thread pool: {e}")))?;
        pool.install(|| chunks.par_iter().map(run).collect())
    } else {
        chunks.iter().map(run).collect()
    };
    let mut out = Vec::with_capacity(users.len());
    for r in per_chunk {
        out.extend(r?);
    }
    Ok(out)
}

fn evaluate_chunk<M: Scorer + ?Sized>(scorer: &M, dataset: &Dataset, users: &[u32]) -> Result<Vec<UserMetrics>> {
    let l = scorer.window_len();
    let mut windows = Vec::with_capacity(users.len() * l);
    for &u in users {
        windows.extend(last_window(dataset.train(u as usize), l));
    }
    let scores = scorer.score_many(users, &windows)?;
    let mut out = Vec::with_capacity(users.len());
    for (&u, s) in users.iter().zip(&scores) {
        let ranked = rank_items(s.logits(), dataset.train(u as usize));
        let relevant: HashSet<u32> = dataset.test(u as usize).iter().copied().collect();
        out.extend(UserMetrics::compute(u, ranked.items(), &relevant));
    }
    Ok(out)
}

/// Mean metrics over all users with a test portion.
pub fn evaluate<M: Scorer + ?Sized>(scorer: &M, dataset: &Dataset, threads: usize) -> Result<MetricsReport> {
    Ok(MetricsReport::from_users(&evaluate_users(scorer, dataset, threads)?))
}
