//! Dense helpers for the small square matrices of the form κ.

use crate::scalar::Real;

/// Determinant by LU factorisation with partial pivoting. `a` is row-major
/// `n x n`.
pub fn determinant<S: Real>(a: &[S], n: usize) -> S {
    assert_eq!(a.len(), n * n, "matrix must be square");
    let mut m = a.to_vec();
    let mut det = S::one();
    for col in 0..n {
        let pivot = (col..n)
            .max_by(|&x, &y| {
                m[x * n + col]
                    .abs()
                    .partial_cmp(&m[y * n + col].abs())
                    .unwrap_or(std::cmp::Ordering::Equal)
            })
            .expect("non-empty range");
        if m[pivot * n + col] == S::zero() {
            return S::zero();
        }
        if pivot != col {
            for k in 0..n {
                m.swap(pivot * n + k, col * n + k);
            }
            det = -det;
        }
        let d = m[col * n + col];
        det = det * d;
        for row in col + 1..n {
            let factor = m[row * n + col] / d;
            if factor != S::zero() {
                for k in col..n {
                    m[row * n + k] = m[row * n + k] - factor * m[col * n + k];
                }
            }
        }
    }
    det
}

/// Eigenvalues of a symmetric matrix by cyclic Jacobi rotations, ascending.
pub fn symmetric_eigenvalues<S: Real>(a: &[S], n: usize) -> Vec<S> {
    assert_eq!(a.len(), n * n, "matrix must be square");
    let mut m = a.to_vec();
    for _sweep in 0..100 {
        let off = (0..n)
            .flat_map(|i| (0..n).filter(move |&j| j != i).map(move |j| (i, j)))
            .fold(S::zero(), |acc, (i, j)| acc + m[i * n + j] * m[i * n + j]);
        let diag = (0..n).fold(S::zero(), |acc, i| acc + m[i * n + i] * m[i * n + i]);
        if off <= S::epsilon() * S::epsilon() * diag.max(S::min_positive_value()) {
            break;
        }
        for p in 0..n {
            for q in p + 1..n {
                let apq = m[p * n + q];
                if apq == S::zero() {
                    continue;
                }
                let theta = (m[q * n + q] - m[p * n + p]) / (S::two() * apq);
                let t = theta.signum() / (theta.abs() + (theta * theta + S::one()).sqrt());
                let c = S::one() / (t * t + S::one()).sqrt();
                let s = t * c;
                for k in 0..n {
                    let (mkp, mkq) = (m[k * n + p], m[k * n + q]);
                    m[k * n + p] = c * mkp - s * mkq;
                    m[k * n + q] = s * mkp + c * mkq;
                }
                for k in 0..n {
                    let (mpk, mqk) = (m[p * n + k], m[q * n + k]);
                    m[p * n + k] = c * mpk - s * mqk;
                    m[q * n + k] = s * mpk + c * mqk;
                }
                m[p * n + q] = S::zero();
                m[q * n + p] = S::zero();
            }
        }
    }
    let mut eig: Vec<S> = (0..n).map(|i| m[i * n + i]).collect();
    eig.sort_by(|a, b| a.partial_cmp(b).unwrap_or(std::cmp::Ordering::Equal));
    eig
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn determinant_small() {
        assert_eq!(determinant(&[2.0, 1.0, 1.0, 3.0], 2), 5.0);
        let a = [0.0, 1.0, 0.0, 1.0, 0.0, 0.0, 0.0, 0.0, 4.0];
        assert_eq!(determinant(&a, 3), -4.0);
        assert_eq!(determinant(&[1.0, 2.0, 2.0, 4.0], 2), 0.0);
    }

    #[test]
    fn jacobi_matches_known_spectrum() {
        // [[2,1,0],[1,2,1],[0,1,2]] has eigenvalues 2-√2, 2, 2+√2.
        let a = [2.0, 1.0, 0.0, 1.0, 2.0, 1.0, 0.0, 1.0, 2.0];
        let e = symmetric_eigenvalues(&a, 3);
        let s2 = 2f64.sqrt();
        for (x, y) in e.iter().zip([2.0 - s2, 2.0, 2.0 + s2]) {
            assert!((x - y).abs() < 1e-13);
        }
        let prod: f64 = e.iter().product();
        assert!((prod - determinant(&a, 3)).abs() < 1e-12);
    }
}
