//! Convolution filters as CSV grids.
//!
//! For layer weights `[out, in, k, k]`, each `(out, in)` pair becomes
//! `filter_<out>_<in>.csv` holding `k` lines of `k` comma-separated values.
//! `index.csv` lists the pairs with header `out_channel,in_channel,kernel,file`.
//! Values are printed in shortest round-trip form.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use crate::error::{Error, Result};
use crate::model::{CosRecModel, CONV_NAMES};
use crate::tensor::Scalar;

pub const INDEX_FILE: &str = "index.csv";

/// One written grid.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FilterFile {
    pub out_channel: usize,
    pub in_channel: usize,
    pub kernel: usize,
    pub path: PathBuf,
}

pub fn filter_file_name(out_channel: usize, in_channel: usize) -> String {
    format!("filter_{out_channel}_{in_channel}.csv")
}

/// Writes every filter of `layer` into `dir` (created if missing) and
/// returns the files in index order.
pub fn export_filters<S: Scalar>(model: &CosRecModel<S>, layer: &str, dir: &Path) -> Result<Vec<FilterFile>> {
    let conv = model.conv_layer(layer).ok_or_else(|| {
        let valid: Vec<&str> = CONV_NAMES.iter().copied().filter(|n| model.conv_layer(n).is_some()).collect();
        let list = if valid.is_empty() { "none".to_string() } else { valid.join(", ") };
        Error::Config(format!("unknown layer {layer:?}; valid layers: {list}"))
    })?;
    let (out, inp, k) = (conv.out_channels(), conv.in_channels(), conv.kernel());
    fs::create_dir_all(dir)?;
    let w = conv.weight.data();
    let mut index = String::from("out_channel,in_channel,kernel,file\n");
    let mut files = Vec::with_capacity(out * inp);
    for o in 0..out {
        for i in 0..inp {
            let grid = &w[(o * inp + i) * k * k..][..k * k];
            let mut text = String::with_capacity(k * k * 12);
            for row in grid.chunks_exact(k) {
                for (c, v) in row.iter().enumerate() {
                    if c > 0 {
                        text.push(',');
                    }
                    write!(text, "{v}").expect("writing to a String");
                }
                text.push('\n');
            }
            let name = filter_file_name(o, i);
            let path = dir.join(&name);
            fs::write(&path, text)?;
            writeln!(index, "{o},{i},{k},{name}").expect("writing to a String");
            files.push(FilterFile { out_channel: o, in_channel: i, kernel: k, path });
        }
    }
    fs::write(dir.join(INDEX_FILE), index)?;
    Ok(files)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{CosRecConfig, Variant};

    fn model(first_kernel: usize) -> CosRecModel<f32> {
        let mut c = CosRecConfig::new(2, 5, 3);
        c.block_channels = [2, 3];
        CosRecModel::new(c.with_first_kernel(first_kernel), 4).unwrap()
    }

    fn parse(path: &Path) -> Vec<Vec<f32>> {
        fs::read_to_string(path).unwrap().lines().map(|l| l.split(',').map(|v| v.parse().unwrap()).collect()).collect()
    }

    #[test]
    fn five_by_five_grids_round_trip() {
        let m = model(5);
        let dir = tempfile::tempdir().unwrap();
        let files = export_filters(&m, "conv1_1", dir.path()).unwrap();
        let conv = m.conv_layer("conv1_1").unwrap();
        assert_eq!(files.len(), 2 * 6);
        for f in &files {
            let grid = parse(&f.path);
            assert_eq!(grid.len(), 5);
            let flat: Vec<u32> = grid.iter().flatten().map(|v| v.to_bits()).collect();
            let want: Vec<u32> = conv.weight.data()[(f.out_channel * 6 + f.in_channel) * 25..][..25]
                .iter()
                .map(|v| v.to_bits())
                .collect();
            assert_eq!(flat, want);
        }
        let index = fs::read_to_string(dir.path().join(INDEX_FILE)).unwrap();
        assert_eq!(index.lines().count(), 13);
        assert_eq!(index.lines().nth(1), Some("0,0,5,filter_0_0.csv"));
    }

    #[test]
    fn one_by_one_layer_and_stable_reexport() {
        let m = model(1);
        let dir = tempfile::tempdir().unwrap();
        let files = export_filters(&m, "conv2_1", dir.path()).unwrap();
        assert_eq!(files.len(), 3 * 2);
        let first: Vec<String> = files.iter().map(|f| fs::read_to_string(&f.path).unwrap()).collect();
        assert!(first.iter().all(|t| t.lines().count() == 1 && !t.contains(',')));
        export_filters(&m, "conv2_1", dir.path()).unwrap();
        let again: Vec<String> = files.iter().map(|f| fs::read_to_string(&f.path).unwrap()).collect();
        assert_eq!(first, again);
    }

    #[test]
    fn unknown_layer_lists_valid_names() {
        let m = model(1);
        let dir = tempfile::tempdir().unwrap();
        let err = export_filters(&m, "conv9", dir.path()).unwrap_err().to_string();
        assert!(err.contains("conv1_1, conv1_2, conv2_1, conv2_2"), "{err}");

        let mut c = CosRecConfig::new(2, 5, 3);
        c.variant = Variant::MlpBase;
        let mlp = CosRecModel::<f32>::new(c, 0).unwrap();
        let err = export_filters(&mlp, "conv1_1", dir.path()).unwrap_err().to_string();
        assert!(err.ends_with("valid layers: none"), "{err}");
    }
}
