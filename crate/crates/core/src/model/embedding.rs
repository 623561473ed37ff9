use crate::error::{Error, Result};
use crate::tensor::{Scalar, Tensor};

/// Row lookup into a `[rows, d]` table.
pub fn lookup<S: Scalar>(table: &Tensor<S>, ids: &[u32], kind: &'static str) -> Result<Tensor<S>> {
    let (rows, d) = (table.dim(0), table.dim(1));
    let mut out = Vec::with_capacity(ids.len() * d);
    for &id in ids {
        let id = id as usize;
        if id >= rows {
            return Err(Error::IdOutOfRange { kind, id, limit: rows });
        }
        out.extend_from_slice(&table.data()[id * d..][..d]);
    }
    Ok(Tensor::new([ids.len(), d], out)?)
}

/// Adds each row of `grad_rows` into `grad_table` at the looked-up id;
/// repeated ids accumulate.
pub fn scatter_add<S: Scalar>(grad_table: &mut Tensor<S>, ids: &[u32], grad_rows: &[S]) {
    let d = grad_table.dim(1);
    debug_assert_eq!(grad_rows.len(), ids.len() * d);
    let table = grad_table.data_mut();
    for (&id, g) in ids.iter().zip(grad_rows.chunks_exact(d)) {
        for (t, &v) in table[id as usize * d..][..d].iter_mut().zip(g) {
            *t += v;
        }
    }
}
