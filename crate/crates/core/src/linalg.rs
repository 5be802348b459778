//! Small dense symmetric solves for the per-row least-squares subproblems.
//!
//! Matrices are `k × k`, row-major, with `k` in the single digits, so plain
//! loops beat pulling in a linear-algebra crate.

use crate::scalar::Scalar;

/// Solves `a x = b` for symmetric positive semi-definite `a`.
///
/// Uses a Cholesky factorization when `a` is numerically positive definite,
/// otherwise the minimum-norm solution `pinv(a) b`. `a` is left untouched.
pub fn solve_psd<T: Scalar>(a: &[T], b: &[T], k: usize) -> Vec<T> {
    debug_assert_eq!(a.len(), k * k);
    debug_assert_eq!(b.len(), k);
    match cholesky(a, k) {
        Some(l) => cholesky_solve(&l, b, k),
        None => pinv_solve(a, b, k),
    }
}

/// Lower-triangular factor `l` with `a = l lᵀ`, or `None` if a pivot falls
/// below the rank-deficiency threshold.
pub fn cholesky<T: Scalar>(a: &[T], k: usize) -> Option<Vec<T>> {
    let max_diag = (0..k).map(|i| a[i * k + i]).fold(T::zero(), T::max);
    if max_diag <= T::zero() {
        return None;
    }
    let floor = max_diag * rank_tol::<T>(k);
    let mut l = vec![T::zero(); k * k];
    for i in 0..k {
        for j in 0..=i {
            let mut sum = a[i * k + j];
            for p in 0..j {
                sum -= l[i * k + p] * l[j * k + p];
            }
            if i == j {
                if sum <= floor {
                    return None;
                }
                l[i * k + i] = sum.sqrt();
            } else {
                l[i * k + j] = sum / l[j * k + j];
            }
        }
    }
    Some(l)
}

fn cholesky_solve<T: Scalar>(l: &[T], b: &[T], k: usize) -> Vec<T> {
    let mut y = b.to_vec();
    for i in 0..k {
        for p in 0..i {
            let t = l[i * k + p] * y[p];
            y[i] -= t;
        }
        y[i] /= l[i * k + i];
    }
    for i in (0..k).rev() {
        for p in i + 1..k {
            let t = l[p * k + i] * y[p];
            y[i] -= t;
        }
        y[i] /= l[i * k + i];
    }
    y
}

fn rank_tol<T: Scalar>(k: usize) -> T {
    T::epsilon() * T::from_usize(k.max(1) * 64).unwrap()
}

/// Eigen-decomposition of a symmetric matrix by cyclic Jacobi rotations.
///
/// Returns `(eigenvalues, eigenvectors)` with eigenvectors stored as columns.
pub fn symmetric_eigen<T: Scalar>(a: &[T], k: usize) -> (Vec<T>, Vec<T>) {
    let mut m = a.to_vec();
    let mut v = vec![T::zero(); k * k];
    for i in 0..k {
        v[i * k + i] = T::one();
    }
    let two = T::lit(2.0);
    for _sweep in 0..64 {
        let off: T = (0..k)
            .flat_map(|i| (0..k).filter(move |&j| j != i).map(move |j| (i, j)))
            .map(|(i, j)| m[i * k + j] * m[i * k + j])
            .sum();
        let scale: T = m.iter().map(|&x| x * x).sum();
        if off <= T::epsilon() * T::epsilon() * scale {
            break;
        }
        for p in 0..k {
            for q in p + 1..k {
                let apq = m[p * k + q];
                if apq == T::zero() {
                    continue;
                }
                let theta = (m[q * k + q] - m[p * k + p]) / (two * apq);
                let t = theta.signum() / (theta.abs() + (theta * theta + T::one()).sqrt());
                let c = T::one() / (t * t + T::one()).sqrt();
                let s = t * c;
                for r in 0..k {
                    let mrp = m[r * k + p];
                    let mrq = m[r * k + q];
                    m[r * k + p] = c * mrp - s * mrq;
                    m[r * k + q] = s * mrp + c * mrq;
                }
                for r in 0..k {
                    let mpr = m[p * k + r];
                    let mqr = m[q * k + r];
                    m[p * k + r] = c * mpr - s * mqr;
                    m[q * k + r] = s * mpr + c * mqr;
                }
                for r in 0..k {
                    let vrp = v[r * k + p];
                    let vrq = v[r * k + q];
                    v[r * k + p] = c * vrp - s * vrq;
                    v[r * k + q] = s * vrp + c * vrq;
                }
            }
        }
    }
    let values = (0..k).map(|i| m[i * k + i]).collect();
    (values, v)
}

/// Minimum-norm solution `pinv(a) b` for symmetric positive semi-definite `a`.
pub fn pinv_solve<T: Scalar>(a: &[T], b: &[T], k: usize) -> Vec<T> {
    let (values, vectors) = symmetric_eigen(a, k);
    let max_eig = values.iter().fold(T::zero(), |acc, &v| acc.max(v.abs()));
    let cutoff = max_eig * rank_tol::<T>(k);
    let mut x = vec![T::zero(); k];
    if max_eig == T::zero() {
        return x;
    }
    for (j, &lam) in values.iter().enumerate() {
        if lam <= cutoff {
            continue;
        }
        let proj: T = (0..k).map(|i| vectors[i * k + j] * b[i]).sum::<T>() / lam;
        for (i, xi) in x.iter_mut().enumerate() {
            *xi += proj * vectors[i * k + j];
        }
    }
    x
}
