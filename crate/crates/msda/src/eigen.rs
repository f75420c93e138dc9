//! Small dense eigen routines shared by the classifier: a spectral
//! pseudo-inverse for symmetric PSD matrices, and extraction of the real
//! eigenpairs of a (possibly nonsymmetric) square matrix.

use nalgebra::{DMatrix, DVector};
use ndarray::{Array1, Array2, ArrayView2};

pub(crate) fn to_na(a: &ArrayView2<'_, f64>) -> DMatrix<f64> {
    DMatrix::from_fn(a.nrows(), a.ncols(), |i, j| a[[i, j]])
}

pub(crate) fn to_nd(a: &DMatrix<f64>) -> Array2<f64> {
    Array2::from_shape_fn((a.nrows(), a.ncols()), |(i, j)| a[(i, j)])
}

/// Spectral pseudo-inverse of a symmetric PSD matrix: eigenvalues below
/// `rel_tol` times the largest are treated as zero. Returns the inverse and
/// the numerical rank.
pub(crate) fn sym_pinv(a: &ArrayView2<'_, f64>, rel_tol: f64) -> (Array2<f64>, usize) {
    let n = a.nrows();
    debug_assert_eq!(a.ncols(), n);
    if n == 0 {
        return (Array2::zeros((0, 0)), 0);
    }
    let se = to_na(a).symmetric_eigen();
    let max_eig = se.eigenvalues.iter().fold(0.0f64, |m, &v| m.max(v.abs()));
    if max_eig == 0.0 {
        return (Array2::zeros((n, n)), 0);
    }
    let cut = rel_tol * max_eig;
    let mut pinv = DMatrix::zeros(n, n);
    let mut rank = 0;
    for (idx, &lam) in se.eigenvalues.iter().enumerate() {
        if lam > cut {
            rank += 1;
            let v = se.eigenvectors.column(idx);
            for i in 0..n {
                for j in 0..n {
                    pinv[(i, j)] += v[i] * v[j] / lam;
                }
            }
        }
    }
    (to_nd(&pinv), rank)
}

/// Real eigenpairs of a square matrix: eigenvalues with real part above
/// `re_tol` and imaginary magnitude at most `im_tol` (both absolute, the
/// caller scales them by a matrix norm). Eigenvectors come from inverse
/// iteration at the accepted eigenvalues and are unit length with a
/// deterministic sign. Sorted by descending eigenvalue.
pub(crate) fn real_eigenpairs(
    m: &ArrayView2<'_, f64>,
    re_tol: f64,
    im_tol: f64,
) -> Vec<(f64, Array1<f64>)> {
    let n = m.nrows();
    debug_assert_eq!(m.ncols(), n);
    if n == 0 {
        return Vec::new();
    }
    let a = to_na(m);
    let eigs = a.clone().complex_eigenvalues();
    let mut accepted: Vec<f64> = eigs
        .iter()
        .filter(|z| z.re > re_tol && z.im.abs() <= im_tol)
        .map(|z| z.re)
        .collect();
    accepted.sort_by(|x, y| y.partial_cmp(x).unwrap());

    let scale = a.norm().max(1e-300);
    let mut pairs: Vec<(f64, Array1<f64>)> = Vec::with_capacity(accepted.len());
    for mu in accepted {
        let mut found: Option<DVector<f64>> = None;
        for attempt in 0..3 {
            // nudge repeated shifts so close eigenvalues get distinct vectors
            let shift = mu * (1.0 + attempt as f64 * 1e-10) + attempt as f64 * 1e-12 * scale;
            let mut shifted = a.clone();
            for i in 0..n {
                shifted[(i, i)] -= shift;
            }
            let lu = shifted.lu();
            let mut v = DVector::from_fn(n, |i, _| 1.0 + (i as f64 + 1.0).sqrt());
            v /= v.norm();
            let mut ok = true;
            for _ in 0..4 {
                match lu.solve(&v) {
                    Some(w) => {
                        let norm = w.norm();
                        if !norm.is_finite() || norm == 0.0 {
                            ok = false;
                            break;
                        }
                        v = w / norm;
                        // keep vectors of near-equal eigenvalues independent
                        for (prev_mu, prev_v) in &pairs {
                            if (prev_mu - mu).abs() <= 1e-8 * scale {
                                let pv = DVector::from_iterator(n, prev_v.iter().copied());
                                let proj = pv.dot(&v);
                                v -= pv * proj;
                                let nrm = v.norm();
                                if nrm > 1e-12 {
                                    v /= nrm;
                                }
                            }
                        }
                    }
                    None => {
                        ok = false;
                        break;
                    }
                }
            }
            if ok {
                let residual = (&a * &v - &v * mu).norm();
                if residual <= 1e-6 * scale || attempt == 2 {
                    found = Some(v);
                    break;
                }
                found = Some(v);
            }
        }
        if let Some(mut v) = found {
            // deterministic sign: the largest-magnitude entry is positive
            let lead = (0..n).fold(0, |b, i| if v[i].abs() > v[b].abs() { i } else { b });
            if v[lead] < 0.0 {
                v = -v;
            }
            pairs.push((mu, Array1::from_iter(v.iter().copied())));
        }
    }
    pairs
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use ndarray::array;

    #[test]
    fn pinv_inverts_full_rank_and_zeroes_null_space() {
        let a = array![[2.0, 0.0], [0.0, 0.5]];
        let (pinv, rank) = sym_pinv(&a.view(), 1e-10);
        assert_eq!(rank, 2);
        assert_abs_diff_eq!(pinv[[0, 0]], 0.5, epsilon = 1e-12);
        assert_abs_diff_eq!(pinv[[1, 1]], 2.0, epsilon = 1e-12);

        let b = array![[1.0, 1.0], [1.0, 1.0]]; // rank 1
        let (pinv, rank) = sym_pinv(&b.view(), 1e-10);
        assert_eq!(rank, 1);
        // pseudo-inverse of [[1,1],[1,1]] is the same matrix / 4
        assert_abs_diff_eq!(pinv[[0, 0]], 0.25, epsilon = 1e-12);
        assert_abs_diff_eq!(pinv[[0, 1]], 0.25, epsilon = 1e-12);

        let z = Array2::<f64>::zeros((3, 3));
        let (pinv, rank) = sym_pinv(&z.view(), 1e-10);
        assert_eq!(rank, 0);
        assert!(pinv.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn real_eigenpairs_of_a_nonsymmetric_matrix() {
        // A = P D P^-1 with D = diag(3, 1), known eigenvectors
        let a = array![[3.0, 1.0], [0.0, 1.0]];
        let scale = 10.0f64.sqrt();
        let pairs = real_eigenpairs(&a.view(), 1e-10 * scale, 1e-8 * scale);
        assert_eq!(pairs.len(), 2);
        assert_abs_diff_eq!(pairs[0].0, 3.0, epsilon = 1e-10);
        assert_abs_diff_eq!(pairs[1].0, 1.0, epsilon = 1e-10);
        // eigenvector for 3 is e1; for 1 is (1, -2)/sqrt(5)
        assert_abs_diff_eq!(pairs[0].1[0].abs(), 1.0, epsilon = 1e-8);
        let v = &pairs[1].1;
        assert_abs_diff_eq!(v[0] / v[1], -0.5, epsilon = 1e-8);
    }

    #[test]
    fn complex_pairs_are_rejected() {
        // rotation-like matrix with eigenvalues +-i
        let a = array![[0.0, -1.0], [1.0, 0.0]];
        let pairs = real_eigenpairs(&a.view(), 1e-12, 1e-8);
        assert!(pairs.is_empty());
    }
}
