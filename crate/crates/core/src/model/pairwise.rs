use crate::error::{layer_err, Result};
use crate::tensor::{Scalar, Tensor};

/// Builds the pairwise tensor from window embeddings.
///
/// Input `[L, d]` (or batched `[B, L, d]`); output `[2d, L, L]` (or
/// `[B, 2d, L, L]`) where the channel vector at `(i, j)` is `[e_i; e_j]`.
pub fn pairwise_encode<S: Scalar>(emb: &Tensor<S>) -> Result<Tensor<S>> {
    let (batch, l, d) = dims(emb)?;
    let mut out = vec![S::zero(); batch * 2 * d * l * l];
    let src = emb.data();
    for b in 0..batch {
        let e = &src[b * l * d..][..l * d];
        let o = &mut out[b * 2 * d * l * l..][..2 * d * l * l];
        for c in 0..d {
            let first = &mut o[c * l * l..][..l * l];
            for i in 0..l {
                first[i * l..][..l].fill(e[i * d + c]);
            }
            let second = &mut o[(d + c) * l * l..][..l * l];
            for i in 0..l {
                for j in 0..l {
                    second[i * l + j] = e[j * d + c];
                }
            }
        }
    }
    let shape = if emb.rank() == 2 { vec![2 * d, l, l] } else { vec![batch, 2 * d, l, l] };
    Ok(Tensor::new(shape, out)?)
}

/// Adjoint of [`pairwise_encode`]: row `i` collects the first-half
/// gradients of row `i` of the grid plus the second-half gradients of
/// column `i`.
pub fn pairwise_backward<S: Scalar>(grad: &Tensor<S>) -> Result<Tensor<S>> {
    let s = grad.shape();
    let (batch, c2, l) = match s.len() {
        3 => (1, s[0], s[1]),
        4 => (s[0], s[1], s[2]),
        _ => return Err(layer_err("pairwise", format!("bad gradient shape {s:?}"))),
    };
    if c2 % 2 != 0 || s[s.len() - 1] != l {
        return Err(layer_err("pairwise", format!("bad gradient shape {s:?}")));
    }
    let d = c2 / 2;
    let g = grad.data();
    let mut out = vec![S::zero(); batch * l * d];
    for b in 0..batch {
        let gb = &g[b * c2 * l * l..][..c2 * l * l];
        let ob = &mut out[b * l * d..][..l * d];
        for c in 0..d {
            let first = &gb[c * l * l..][..l * l];
            let second = &gb[(d + c) * l * l..][..l * l];
            for i in 0..l {
                let mut acc = S::zero();
                for j in 0..l {
                    acc += first[i * l + j] + second[j * l + i];
                }
                ob[i * d + c] = acc;
            }
        }
    }
    let shape = if s.len() == 3 { vec![l, d] } else { vec![batch, l, d] };
    Ok(Tensor::new(shape, out)?)
}

fn dims<S: Scalar>(emb: &Tensor<S>) -> Result<(usize, usize, usize)> {
    let s = emb.shape();
    match s.len() {
        2 => Ok((1, s[0], s[1])),
        3 => Ok((s[0], s[1], s[2])),
        _ => Err(layer_err("pairwise", format!("expected [L, d] or [B, L, d], got {s:?}"))),
    }
}
