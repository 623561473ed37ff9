//! Binary container for preprocessed datasets.
//!
//! Every field is a little-endian `u32`:
//!
//! ```text
//! name_len, name bytes ("cosrec-dataset"), version,
//! num_users, num_items, min_user_actions, min_item_actions, seed_lo, seed_hi,
//! then per user: user_id, seq_len, boundary, item ids...
//! ```
//!
//! Source keys are not stored.

use std::io::{Read, Write};

use super::{DataError, Dataset, DatasetMeta};

pub const FORMAT_NAME: &str = "cosrec-dataset";
pub const FORMAT_VERSION: u32 = 1;

pub fn write_dataset<W: Write>(dataset: &Dataset, mut w: W) -> Result<(), DataError> {
    let mut buf = Vec::with_capacity(64 + 4 * (3 * dataset.num_users + dataset.num_actions()));
    let mut put = |v: u32| buf.extend_from_slice(&v.to_le_bytes());
    put(FORMAT_NAME.len() as u32);
    buf.extend_from_slice(FORMAT_NAME.as_bytes());
    let mut put = |v: u32| buf.extend_from_slice(&v.to_le_bytes());
    put(FORMAT_VERSION);
    put(to_u32(dataset.num_users)?);
    put(to_u32(dataset.num_items)?);
    put(dataset.meta.min_user_actions);
    put(dataset.meta.min_item_actions);
    put(dataset.meta.seed as u32);
    put((dataset.meta.seed >> 32) as u32);
    for (u, (seq, &boundary)) in dataset.sequences.iter().zip(&dataset.boundaries).enumerate() {
        put(u as u32);
        put(to_u32(seq.len())?);
        put(to_u32(boundary)?);
        for &item in seq {
            put(item);
        }
    }
    w.write_all(&buf)?;
    Ok(())
}

pub fn read_dataset<R: Read>(mut r: R) -> Result<Dataset, DataError> {
    let mut bytes = Vec::new();
    r.read_to_end(&mut bytes)?;
    let mut words = Words { bytes: &bytes, pos: 0 };

    let name_len = words.next()? as usize;
    let name = words.take_bytes(name_len)?;
    if name != FORMAT_NAME.as_bytes() {
        return Err(format_err("not a cosrec dataset file"));
    }
    let version = words.next()?;
    if version != FORMAT_VERSION {
        return Err(format_err(format!("unsupported version {version}")));
    }
    let num_users = words.next()? as usize;
    let num_items = words.next()? as usize;
    let min_user_actions = words.next()?;
    let min_item_actions = words.next()?;
    let seed = words.next()? as u64 | ((words.next()? as u64) << 32);

    let mut sequences = Vec::with_capacity(num_users);
    let mut boundaries = Vec::with_capacity(num_users);
    for expected in 0..num_users {
        let user = words.next()? as usize;
        if user != expected {
            return Err(format_err(format!("record {expected} carries user id {user}")));
        }
        let len = words.next()? as usize;
        let boundary = words.next()? as usize;
        if len == 0 || boundary > len {
            return Err(format_err(format!("user {user}: length {len}, boundary {boundary}")));
        }
        let mut seq = Vec::with_capacity(len);
        for _ in 0..len {
            let item = words.next()?;
            if item == 0 || item as usize > num_items {
                return Err(format_err(format!("user {user}: item id {item} outside 1..={num_items}")));
            }
            seq.push(item);
        }
        sequences.push(seq);
        boundaries.push(boundary);
    }
    if words.pos != bytes.len() {
        return Err(format_err("trailing bytes after the last user record"));
    }
    Ok(Dataset {
        num_users,
        num_items,
        sequences,
        boundaries,
        meta: DatasetMeta { min_user_actions, min_item_actions, seed },
        keys: None,
    })
}

struct Words<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Words<'a> {
    fn take_bytes(&mut self, n: usize) -> Result<&'a [u8], DataError> {
        let end = self.pos.checked_add(n).filter(|&e| e <= self.bytes.len());
        let end = end.ok_or_else(|| format_err("unexpected end of file"))?;
        let out = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(out)
    }

    fn next(&mut self) -> Result<u32, DataError> {
        let b = self.take_bytes(4)?;
        Ok(u32::from_le_bytes([b[0], b[1], b[2], b[3]]))
    }
}

fn to_u32(v: usize) -> Result<u32, DataError> {
    u32::try_from(v).map_err(|_| format_err(format!("{v} does not fit in 32 bits")))
}

fn format_err(msg: impl Into<String>) -> DataError {
    DataError::Format(msg.into())
}
