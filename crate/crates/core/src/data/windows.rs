use super::Dataset;

/// One training sample: `input` holds `L` item ids (oldest first, left-padded
/// with 0) and `targets` the `T` items that follow.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TrainWindow {
    pub user: u32,
    pub input: Vec<u32>,
    pub targets: Vec<u32>,
}

/// Windows over one training sequence.
///
/// A sequence of at least `L + T` items yields every full window. A shorter
/// one with at least `T + 1` items yields a single window, left-padded, whose
/// targets are its last `T` items. Anything shorter yields nothing.
pub fn user_windows(user: u32, train: &[u32], markov_order: usize, horizon: usize) -> Vec<TrainWindow> {
    let (l, t, n) = (markov_order, horizon, train.len());
    if n >= l + t {
        (l..=n - t)
            .map(|end| TrainWindow { user, input: train[end - l..end].to_vec(), targets: train[end..end + t].to_vec() })
            .collect()
    } else if n > t {
        let end = n - t;
        let mut input = vec![0; l - end];
        input.extend_from_slice(&train[..end]);
        vec![TrainWindow { user, input, targets: train[end..].to_vec() }]
    } else {
        Vec::new()
    }
}

/// All training windows, ordered by user then position.
pub fn generate_windows(dataset: &Dataset, markov_order: usize, horizon: usize) -> Vec<TrainWindow> {
    (0..dataset.num_users).flat_map(|u| user_windows(u as u32, dataset.train(u), markov_order, horizon)).collect()
}

/// The last `L` items of a sequence, left-padded with 0.
pub fn last_window(seq: &[u32], markov_order: usize) -> Vec<u32> {
    let take = seq.len().min(markov_order);
    let mut w = vec![0; markov_order - take];
    w.extend_from_slice(&seq[seq.len() - take..]);
    w
}
