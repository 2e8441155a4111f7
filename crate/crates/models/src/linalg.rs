//! Matrix product variants used by the tape. Each output row is computed by
//! one thread with a fixed summation order, so results are bitwise identical
//! regardless of thread count.

use grl_core::DenseMatrix;
use rayon::prelude::*;

/// Work threshold below which parallel dispatch is not worth it.
const PAR_FLOPS: usize = 1 << 16;

/// `A * B`.
pub fn matmul(a: &DenseMatrix, b: &DenseMatrix) -> DenseMatrix {
    assert_eq!(a.cols(), b.rows(), "matmul shape");
    let mut out = DenseMatrix::zeros(a.rows(), b.cols());
    let work = a.rows() * a.cols() * b.cols();
    let row_op = |(i, out_row): (usize, &mut [f64])| {
        for (k, &av) in a.row(i).iter().enumerate() {
            if av == 0.0 {
                continue;
            }
            for (o, &bv) in out_row.iter_mut().zip(b.row(k)) {
                *o += av * bv;
            }
        }
    };
    if work >= PAR_FLOPS {
        par_rows(&mut out, row_op);
    } else {
        seq_rows(&mut out, row_op);
    }
    out
}

/// `A * B^T`.
pub fn matmul_nt(a: &DenseMatrix, b: &DenseMatrix) -> DenseMatrix {
    assert_eq!(a.cols(), b.cols(), "matmul_nt shape");
    let mut out = DenseMatrix::zeros(a.rows(), b.rows());
    let work = a.rows() * a.cols() * b.rows();
    let row_op = |(i, out_row): (usize, &mut [f64])| {
        let a_row = a.row(i);
        for (j, o) in out_row.iter_mut().enumerate() {
            *o = dot(a_row, b.row(j));
        }
    };
    if work >= PAR_FLOPS {
        par_rows(&mut out, row_op);
    } else {
        seq_rows(&mut out, row_op);
    }
    out
}

/// `A^T * B`. Output rows are independent dot products over columns of `A`.
pub fn matmul_tn(a: &DenseMatrix, b: &DenseMatrix) -> DenseMatrix {
    assert_eq!(a.rows(), b.rows(), "matmul_tn shape");
    let mut out = DenseMatrix::zeros(a.cols(), b.cols());
    let work = a.rows() * a.cols() * b.cols();
    let row_op = |(i, out_row): (usize, &mut [f64])| {
        // out[i, :] = sum_k a[k, i] * b[k, :]
        for k in 0..a.rows() {
            let av = a.get(k, i);
            if av == 0.0 {
                continue;
            }
            for (o, &bv) in out_row.iter_mut().zip(b.row(k)) {
                *o += av * bv;
            }
        }
    };
    if work >= PAR_FLOPS {
        par_rows(&mut out, row_op);
    } else {
        seq_rows(&mut out, row_op);
    }
    out
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn seq_rows<F: Fn((usize, &mut [f64])) + Sync>(m: &mut DenseMatrix, f: F) {
    let cols = m.cols();
    for (i, row) in m.as_mut_slice().chunks_mut(cols).enumerate() {
        f((i, row));
    }
}

fn par_rows<F: Fn((usize, &mut [f64])) + Sync>(m: &mut DenseMatrix, f: F) {
    let cols = m.cols();
    m.as_mut_slice()
        .par_chunks_mut(cols)
        .enumerate()
        .for_each(|(i, row)| f((i, row)));
}

#[cfg(test)]
mod tests {
    use super::*;

    fn m(rows: usize, cols: usize, v: &[f64]) -> DenseMatrix {
        DenseMatrix::from_vec(rows, cols, v.to_vec())
    }

    #[test]
    fn transposed_variants_agree_with_plain() {
        let a = m(2, 3, &[1.0, 2.0, 3.0, 4.0, 5.0, 6.0]);
        let b = m(2, 3, &[0.5, -1.0, 2.0, 1.5, 0.0, -2.0]);
        // A * B^T == matmul(a, transpose(b))
        let nt = matmul_nt(&a, &b);
        let expected = a.matmul(&b.transpose()).unwrap();
        assert_eq!(nt, expected);
        // A^T * B == matmul(transpose(a), b)
        let tn = matmul_tn(&a, &b);
        let expected = a.transpose().matmul(&b).unwrap();
        assert_eq!(tn, expected);
    }
}
