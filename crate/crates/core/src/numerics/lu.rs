use alloc::vec::Vec;

use super::{CMatrix, C64};
use crate::error::{Error, Result};

/// Solves `a x = b` for a square `a` and matrix right-hand side `b` by LU
/// factorisation with partial pivoting.
pub fn solve(a: &CMatrix, b: &CMatrix) -> Result<CMatrix> {
    let n = a.ensure_square()?;
    if b.rows() != n {
        return Err(Error::Dimension(alloc::format!("right-hand side has {} rows, expected {n}", b.rows())));
    }
    let m = b.cols();
    let mut lu: Vec<C64> = a.as_slice().to_vec();
    let mut x: Vec<C64> = b.as_slice().to_vec();
    let scale = a.max_abs().max(f64::MIN_POSITIVE);

    for k in 0..n {
        let (piv, pmax) =
            (k..n).map(|i| (i, lu[i * n + k].norm())).fold((k, -1.0), |acc, it| if it.1 > acc.1 { it } else { acc });
        if pmax <= scale * 1e-300 {
            return Err(Error::Singular);
        }
        if piv != k {
            for j in 0..n {
                lu.swap(k * n + j, piv * n + j);
            }
            for j in 0..m {
                x.swap(k * m + j, piv * m + j);
            }
        }
        let d = lu[k * n + k];
        for i in (k + 1)..n {
            let f = lu[i * n + k] / d;
            if f == C64::new(0.0, 0.0) {
                continue;
            }
            lu[i * n + k] = f;
            for j in (k + 1)..n {
                let t = lu[k * n + j];
                lu[i * n + j] -= f * t;
            }
            for j in 0..m {
                let t = x[k * m + j];
                x[i * m + j] -= f * t;
            }
        }
    }
    for k in (0..n).rev() {
        let d = lu[k * n + k];
        for j in 0..m {
            let mut s = x[k * m + j];
            for l in (k + 1)..n {
                s -= lu[k * n + l] * x[l * m + j];
            }
            x[k * m + j] = s / d;
        }
    }
    CMatrix::new(n, m, x)
}
