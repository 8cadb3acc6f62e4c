//! Small dense helpers on top of `nalgebra`.
//!
//! Everything here is deterministic: eigen- and singular vectors come back
//! sorted and sign-normalized so that repeated runs produce identical bytes.

use nalgebra::{DMatrix, DVector};

pub type Mat = DMatrix<f64>;
pub type Vector = DVector<f64>;

/// Absolute floor used together with relative tolerances.
pub const ABS_ZERO: f64 = 1e-10;
/// Relative part of the numerical-zero threshold for eigenvalues.
pub const REL_ZERO: f64 = 1e-8;

/// Eigenvalue zero threshold: `1e-10 + 1e-8 * lambda_max`.
pub fn zero_threshold(lambda_max: f64) -> f64 {
    ABS_ZERO + REL_ZERO * lambda_max.max(0.0)
}

/// Flip the sign of `v` so its largest-magnitude entry is positive.
pub fn canonical_sign(v: &mut [f64]) {
    let mut best = 0usize;
    let mut best_abs = -1.0;
    for (i, x) in v.iter().enumerate() {
        // Small slack so that near ties resolve to the lowest index.
        if x.abs() > best_abs + 1e-12 {
            best_abs = x.abs();
            best = i;
        }
    }
    if best_abs > 0.0 && v[best] < 0.0 {
        v.iter_mut().for_each(|x| *x = -*x);
    }
}

/// Symmetric eigendecomposition, eigenvalues ascending, columns sign-normalized.
pub fn sym_eigen(m: &Mat) -> (Vec<f64>, Mat) {
    let n = m.nrows();
    if n == 0 {
        return (Vec::new(), Mat::zeros(0, 0));
    }
    let sym = (m + m.transpose()) * 0.5;
    let eig = nalgebra::SymmetricEigen::new(sym);
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]).then(a.cmp(&b)));
    let values = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let mut vectors = Mat::zeros(n, n);
    for (k, &i) in order.iter().enumerate() {
        let mut col: Vec<f64> = eig.eigenvectors.column(i).iter().copied().collect();
        canonical_sign(&mut col);
        vectors.set_column(k, &Vector::from_vec(col));
    }
    (values, vectors)
}

/// Thin SVD with singular values descending. Returns `(U, sigma, V)`.
pub fn svd_sorted(m: &Mat) -> (Mat, Vec<f64>, Mat) {
    let (r, c) = m.shape();
    let k = r.min(c);
    if k == 0 {
        return (Mat::zeros(r, 0), Vec::new(), Mat::zeros(c, 0));
    }
    let fm = faer::Mat::<f64>::from_fn(r, c, |i, j| m[(i, j)]);
    let svd = fm.thin_svd().expect("SVD converges on finite input");
    let (u, v, sig) = (svd.U(), svd.V(), svd.S().column_vector());
    let mut uu = Mat::zeros(r, k);
    let mut vv = Mat::zeros(c, k);
    let mut s = Vec::with_capacity(k);
    for j in 0..k {
        let mut ucol: Vec<f64> = (0..r).map(|i| u[(i, j)]).collect();
        let mut vcol: Vec<f64> = (0..c).map(|i| v[(i, j)]).collect();
        let before = ucol.clone();
        canonical_sign(&mut ucol);
        if ucol != before {
            vcol.iter_mut().for_each(|x| *x = -*x);
        }
        uu.set_column(j, &Vector::from_vec(ucol));
        vv.set_column(j, &Vector::from_vec(vcol));
        s.push(sig[j]);
    }
    (uu, s, vv)
}

/// Numerical rank: singular values above `tol * max(1, sigma_max)`.
pub fn numerical_rank(m: &Mat, tol: f64) -> usize {
    if m.nrows() == 0 || m.ncols() == 0 {
        return 0;
    }
    let (_, s, _) = svd_sorted(m);
    let smax = s.iter().cloned().fold(0.0, f64::max);
    let cut = tol * smax.max(1.0);
    s.iter().filter(|&&x| x > cut).count()
}

/// Default rank tolerance used by cohomology computations.
pub const RANK_TOL: f64 = 1e-8;

/// Orthonormal basis of the null space of `m` (columns).
pub fn null_space(m: &Mat, tol: f64) -> Mat {
    let c = m.ncols();
    if c == 0 {
        return Mat::zeros(0, 0);
    }
    if m.nrows() == 0 {
        return Mat::identity(c, c);
    }
    // Zero rows leave the null space alone and make the thin SVD return a
    // full right basis.
    let square = if m.nrows() < c {
        let mut p = Mat::zeros(c, c);
        p.view_mut((0, 0), m.shape()).copy_from(m);
        p
    } else {
        m.clone()
    };
    let (_, s, v) = svd_sorted(&square);
    let cut = tol * s.first().copied().unwrap_or(0.0).max(1.0);
    let keep: Vec<usize> = (0..s.len()).filter(|&i| s[i] <= cut).collect();
    let mut basis = select_columns(&v, &keep);
    for j in 0..basis.ncols() {
        let mut col: Vec<f64> = basis.column(j).iter().copied().collect();
        canonical_sign(&mut col);
        basis.set_column(j, &Vector::from_vec(col));
    }
    basis
}

/// Orthonormal basis of the column space of `m`.
pub fn column_space(m: &Mat, tol: f64) -> Mat {
    let (u, s, _) = svd_sorted(m);
    let smax = s.first().copied().unwrap_or(0.0);
    let cut = tol * smax.max(1.0);
    let keep: Vec<usize> = (0..s.len()).filter(|&i| s[i] > cut).collect();
    select_columns(&u, &keep)
}

pub fn select_columns(m: &Mat, idx: &[usize]) -> Mat {
    let mut out = Mat::zeros(m.nrows(), idx.len());
    for (j, &i) in idx.iter().enumerate() {
        out.set_column(j, &m.column(i));
    }
    out
}

/// Orthogonal projector onto the span of the orthonormal columns of `basis`.
pub fn projector(basis: &Mat) -> Mat {
    basis * basis.transpose()
}

pub fn frobenius(m: &Mat) -> f64 {
    m.iter().map(|x| x * x).sum::<f64>().sqrt()
}

pub fn max_abs(m: &Mat) -> f64 {
    m.iter().fold(0.0, |a, x| a.max(x.abs()))
}

/// Spectral norm via the largest singular value.
pub fn spectral_norm(m: &Mat) -> f64 {
    if m.nrows() == 0 || m.ncols() == 0 {
        return 0.0;
    }
    m.clone().singular_values().iter().cloned().fold(0.0, f64::max)
}

/// Largest deviation of `basis^T basis` from the identity.
pub fn orthonormality_defect(basis: &Mat) -> f64 {
    let g = basis.transpose() * basis;
    let k = g.nrows();
    max_abs(&(g - Mat::identity(k, k)))
}

pub fn max_asymmetry(m: &Mat) -> f64 {
    max_abs(&(m - m.transpose()))
}

/// Block-diagonal assembly.
pub fn block_diag(blocks: &[Mat]) -> Mat {
    let rows: usize = blocks.iter().map(|b| b.nrows()).sum();
    let cols: usize = blocks.iter().map(|b| b.ncols()).sum();
    let mut out = Mat::zeros(rows, cols);
    let (mut r, mut c) = (0, 0);
    for b in blocks {
        out.view_mut((r, c), b.shape()).copy_from(b);
        r += b.nrows();
        c += b.ncols();
    }
    out
}

/// Horizontal concatenation; all blocks must share a row count.
pub fn hstack(rows: usize, blocks: &[Mat]) -> Mat {
    let cols: usize = blocks.iter().map(|b| b.ncols()).sum();
    let mut out = Mat::zeros(rows, cols);
    let mut c = 0;
    for b in blocks {
        assert_eq!(b.nrows(), rows, "hstack row mismatch");
        out.view_mut((0, c), b.shape()).copy_from(b);
        c += b.ncols();
    }
    out
}

/// Vertical concatenation; all blocks must share a column count.
pub fn vstack(cols: usize, blocks: &[Mat]) -> Mat {
    let rows: usize = blocks.iter().map(|b| b.nrows()).sum();
    let mut out = Mat::zeros(rows, cols);
    let mut r = 0;
    for b in blocks {
        assert_eq!(b.ncols(), cols, "vstack column mismatch");
        out.view_mut((r, 0), b.shape()).copy_from(b);
        r += b.nrows();
    }
    out
}

/// Orthonormal basis of `ker a ∩ ker b`, both maps sharing a domain.
pub fn joint_null_space(a: &Mat, b: &Mat, tol: f64) -> Mat {
    null_space(&vstack(a.ncols(), &[a.clone(), b.clone()]), tol)
}

/// Largest entrywise difference between two equally shaped matrices, or
/// `None` when the shapes differ.
pub fn max_diff(a: &Mat, b: &Mat) -> Option<f64> {
    (a.shape() == b.shape()).then(|| max_abs(&(a - b)))
}

/// 2x2 block matrix `[[a, b], [c, d]]`.
pub fn block2(a: &Mat, b: &Mat, c: &Mat, d: &Mat) -> Mat {
    let (r0, c0) = (a.nrows(), a.ncols());
    let (r1, c1) = (d.nrows(), d.ncols());
    let mut out = Mat::zeros(r0 + r1, c0 + c1);
    out.view_mut((0, 0), (r0, c0)).copy_from(a);
    out.view_mut((0, c0), (r0, c1)).copy_from(b);
    out.view_mut((r0, 0), (r1, c0)).copy_from(c);
    out.view_mut((r0, c0), (r1, c1)).copy_from(d);
    out
}

/// Multiset distance between two sorted spectra of equal length.
pub fn spectrum_distance(a: &[f64], b: &[f64]) -> Option<f64> {
    if a.len() != b.len() {
        return None;
    }
    let mut x = a.to_vec();
    let mut y = b.to_vec();
    x.sort_by(f64::total_cmp);
    y.sort_by(f64::total_cmp);
    Some(x.iter().zip(&y).fold(0.0, |m, (p, q)| m.max((p - q).abs())))
}

/// 2x2 rotation by `angle` radians.
pub fn rotation2(angle: f64) -> Mat {
    let (s, c) = angle.sin_cos();
    Mat::from_row_slice(2, 2, &[c, -s, s, c])
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn eigen_sorted_and_signed() {
        let m = Mat::from_row_slice(2, 2, &[2.0, -1.0, -1.0, 2.0]);
        let (vals, vecs) = sym_eigen(&m);
        assert!((vals[0] - 1.0).abs() < 1e-12 && (vals[1] - 3.0).abs() < 1e-12);
        for j in 0..2 {
            let col = vecs.column(j);
            // equal magnitudes here, so the first entry decides the sign
            assert!(col[0] > 0.0);
        }
    }

    #[test]
    fn null_space_of_rank_one() {
        let m = Mat::from_row_slice(1, 3, &[1.0, 1.0, 0.0]);
        let n = null_space(&m, RANK_TOL);
        assert_eq!(n.ncols(), 2);
        assert!(max_abs(&(&m * &n)) < 1e-12);
    }

    #[test]
    fn svd_reconstructs() {
        let m = Mat::from_row_slice(3, 2, &[1.0, 2.0, 0.0, 1.0, 3.0, -1.0]);
        let (u, s, v) = svd_sorted(&m);
        assert!(s[0] >= s[1]);
        let rec = &u * Mat::from_diagonal(&Vector::from_vec(s)) * v.transpose();
        assert!(max_abs(&(rec - m)) < 1e-12);
    }

    #[test]
    fn empty_inputs_are_fine() {
        assert_eq!(numerical_rank(&Mat::zeros(0, 3), RANK_TOL), 0);
        assert_eq!(null_space(&Mat::zeros(0, 3), RANK_TOL).ncols(), 3);
        assert_eq!(sym_eigen(&Mat::zeros(0, 0)).0.len(), 0);
    }
}
