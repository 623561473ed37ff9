use std::io::Cursor;

use cosrec::checkpoint::RngState;
use cosrec::data::{generate_windows, parse_movielens, preprocess, read_dataset, write_dataset, FilterConfig};
use cosrec::export::{export_filters, INDEX_FILE};
use cosrec::*;

fn ratings() -> String {
    let mut s = String::new();
    for u in 0..30u32 {
        for t in 0..12u32 {
            let item = (u % 3) * 12 + (u / 3 + t) % 12 + 1;
            s.push_str(&format!("{}::{}::5::{}\n", u + 1, item * 10, 10_000 + t * 100 + u));
        }
    }
    // a user and an item below the thresholds
    s.push_str("999::10::3::1\n999::20::3::2\n1::7777::1::99999\n");
    s
}

#[test]
fn log_to_checkpoint_to_filters() {
    let raw = parse_movielens(Cursor::new(ratings())).unwrap();
    let d = preprocess(&raw, FilterConfig::MOVIELENS, 1).unwrap();
    assert_eq!((d.num_users, d.num_items, d.num_actions()), (30, 36, 360));

    let mut bytes = Vec::new();
    write_dataset(&d, &mut bytes).unwrap();
    let d = read_dataset(&bytes[..]).unwrap();
    // 12 actions: 10 training, windows at t = 5..=7
    assert_eq!(generate_windows(&d, 5, 3).len(), 30 * 3);

    let mut run = RunConfig::new(DatasetKind::Ml1m);
    run.dim = 6;
    run.block_channels = [4, 6];
    run.batch_size = 16;
    run.epochs = 3;
    run.first_kernel = 3;
    let model = CosRecModel::<f32>::new(run.model_config(30, 36).unwrap(), 0).unwrap();
    let out = train(model, &d, &run, |_| Ok(())).unwrap();
    assert_eq!(out.history.len(), 3);
    assert!(out.history.iter().all(|r| r.val_map.is_some()));

    let before = evaluate(&out.model, &d, 1).unwrap();
    let ckpt =
        Checkpoint { run, model: out.model, optimizer: Some(out.optimizer), rng: Some(RngState::capture(&out.rng)) };
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("m.ckpt");
    ckpt.save_file(&path).unwrap();
    let loaded = Checkpoint::load_file(&path).unwrap();
    assert_eq!(evaluate(&loaded.model, &d, 2).unwrap(), before);
    assert_eq!(loaded.model.config().kernels, [3, 3, 1, 1]);

    let files = export_filters(&loaded.model, "conv1_2", &dir.path().join("f")).unwrap();
    assert_eq!(files.len(), 4 * 4);
    let index = std::fs::read_to_string(dir.path().join("f").join(INDEX_FILE)).unwrap();
    assert_eq!(index.lines().count(), 17);
}

#[test]
fn poprec_metrics_are_consistent() {
    let raw = parse_movielens(Cursor::new(ratings())).unwrap();
    let d = preprocess(&raw, FilterConfig::MOVIELENS, 1).unwrap();
    let r = evaluate(&PopRec::fit(&d), &d, 1).unwrap();
    assert_eq!(r.users, 30);
    assert!((0.0..=1.0).contains(&r.map));
    assert!(r.recall[2] >= r.recall[1] && r.recall[1] >= r.recall[0]);
}
