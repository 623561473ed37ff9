use super::{train_len, Dataset, DatasetMeta};

/// Deterministic toy log: items are split into disjoint patterns of
/// `pattern_len`, and user `u` walks pattern `u % patterns` once, starting at
/// rotation `(u / patterns) % pattern_len`. Any user's training window is
/// continued by another user's sequence, so next-item prediction is
/// learnable while test items never occur in the same user's training part.
pub fn cyclic_patterns(num_users: usize, num_items: usize, pattern_len: usize) -> Dataset {
    assert!(pattern_len > 0 && num_items >= pattern_len, "need at least one full pattern");
    let patterns = num_items / pattern_len;
    let mut sequences = Vec::with_capacity(num_users);
    for u in 0..num_users {
        let p = u % patterns;
        let rot = (u / patterns) % pattern_len;
        let seq: Vec<u32> = (0..pattern_len).map(|i| (p * pattern_len + (rot + i) % pattern_len + 1) as u32).collect();
        sequences.push(seq);
    }
    let boundaries = sequences.iter().map(|s| train_len(s.len())).collect();
    Dataset { num_users, num_items, sequences, boundaries, meta: DatasetMeta::default(), keys: None }
}
