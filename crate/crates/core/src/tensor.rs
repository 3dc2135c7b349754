//! Dense row-major tensors with per-axis matrix contraction.
//!
//! Evaluating a separable expansion `Σ_k c_k Π_j φ_{k_j}(x_j)` on a tensor
//! lattice is a sequence of mode products, one per axis, which keeps the cost
//! at `O(d · M^d · K)` instead of `O(M^d · K^d)`.

use crate::exec::Exec;

/// Contracts `data` (shape `shape`, row-major) along `axis` with the matrix
/// `mat` of shape `rows × shape[axis]` (row-major). The result has
/// `shape[axis]` replaced by `rows`.
pub(crate) fn mode_product(
    data: &[f64],
    shape: &[usize],
    axis: usize,
    mat: &[f64],
    rows: usize,
    exec: Exec,
) -> (Vec<f64>, Vec<usize>) {
    let cols = shape[axis];
    debug_assert_eq!(mat.len(), rows * cols);
    debug_assert_eq!(data.len(), shape.iter().product::<usize>());
    let outer: usize = shape[..axis].iter().product();
    let inner: usize = shape[axis + 1..].iter().product();
    let mut out = vec![0.0; outer * rows * inner];
    let block = rows * inner;
    // each outer slab is independent
    let work = |o: usize, slab: &mut [f64]| {
        let src = &data[o * cols * inner..(o + 1) * cols * inner];
        for r in 0..rows {
            let row = &mat[r * cols..(r + 1) * cols];
            let dst = &mut slab[r * inner..(r + 1) * inner];
            for (c, &m) in row.iter().enumerate() {
                if m == 0.0 {
                    continue;
                }
                let s = &src[c * inner..(c + 1) * inner];
                for (d, v) in dst.iter_mut().zip(s) {
                    *d += m * v;
                }
            }
        }
    };
    if outer > 1 && exec.is_parallel() && out.len() > 4096 {
        exec.for_each_chunk(&mut out, block, work);
    } else {
        for (o, slab) in out.chunks_mut(block).enumerate() {
            work(o, slab);
        }
    }
    let mut new_shape = shape.to_vec();
    new_shape[axis] = rows;
    (out, new_shape)
}

/// Applies one matrix per axis in turn.
pub(crate) fn contract_all(
    data: Vec<f64>,
    shape: &[usize],
    mats: &[(&[f64], usize)],
    exec: Exec,
) -> Vec<f64> {
    let mut cur = data;
    let mut cur_shape = shape.to_vec();
    for (axis, (mat, rows)) in mats.iter().enumerate() {
        let (next, next_shape) = mode_product(&cur, &cur_shape, axis, mat, *rows, exec);
        cur = next;
        cur_shape = next_shape;
    }
    cur
}

/// Transposes a row-major `rows × cols` matrix.
pub(crate) fn transpose(mat: &[f64], rows: usize, cols: usize) -> Vec<f64> {
    let mut t = vec![0.0; mat.len()];
    for r in 0..rows {
        for c in 0..cols {
            t[c * rows + r] = mat[r * cols + c];
        }
    }
    t
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn mode_product_matches_naive() {
        // 2x3 tensor, contract axis 1 with a 2x3 matrix
        let data = [1.0, 2.0, 3.0, 4.0, 5.0, 6.0];
        let mat = [1.0, 0.0, -1.0, 0.5, 0.5, 0.5];
        let (out, shape) = mode_product(&data, &[2, 3], 1, &mat, 2, Exec::Sequential);
        assert_eq!(shape, vec![2, 2]);
        assert_eq!(out, vec![-2.0, 3.0, -2.0, 7.5]);
        // axis 0 with a 1x2 matrix sums rows
        let (out0, shape0) = mode_product(&data, &[2, 3], 0, &[1.0, 1.0], 1, Exec::Parallel);
        assert_eq!(shape0, vec![1, 3]);
        assert_eq!(out0, vec![5.0, 7.0, 9.0]);
    }

    #[test]
    fn transpose_roundtrip() {
        let m = [1.0, 2.0, 3.0, 4.0, 5.0, 6.0];
        let t = transpose(&m, 2, 3);
        assert_eq!(t, vec![1.0, 4.0, 2.0, 5.0, 3.0, 6.0]);
        assert_eq!(transpose(&t, 3, 2), m.to_vec());
    }
}
