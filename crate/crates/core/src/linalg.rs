//! Small dense linear-algebra helpers shared across the crate.
//!
//! Everything here is deterministic: fixed iteration orders, no threading.

use nalgebra::{Complex, DMatrix, DVector};

pub type CMatrix = DMatrix<Complex<f64>>;
pub type CVector = DVector<Complex<f64>>;

/// Expands a complex matrix into its real dq block form: each entry
/// `g + jb` becomes the 2x2 block `[[g, -b], [b, g]]`, so that complex
/// products map to real products on interleaved (d, q) coordinates.
pub fn dq_expand(m: &CMatrix) -> DMatrix<f64> {
    let (r, c) = m.shape();
    let mut out = DMatrix::zeros(2 * r, 2 * c);
    for i in 0..r {
        for j in 0..c {
            let v = m[(i, j)];
            out[(2 * i, 2 * j)] = v.re;
            out[(2 * i, 2 * j + 1)] = -v.im;
            out[(2 * i + 1, 2 * j)] = v.im;
            out[(2 * i + 1, 2 * j + 1)] = v.re;
        }
    }
    out
}

/// Interleaves a complex vector as (re, im) pairs.
pub fn dq_expand_vec(v: &CVector) -> DVector<f64> {
    let n = v.len();
    let mut out = DVector::zeros(2 * n);
    for i in 0..n {
        out[2 * i] = v[i].re;
        out[2 * i + 1] = v[i].im;
    }
    out
}

pub fn to_complex(m: &DMatrix<f64>) -> CMatrix {
    m.map(|x| Complex::new(x, 0.0))
}

/// Eigenvalues of a real square matrix, sorted by (re, im) for
/// reproducibility.
pub fn eigenvalues(a: &DMatrix<f64>) -> Vec<Complex<f64>> {
    assert_eq!(a.nrows(), a.ncols(), "eigenvalues: matrix must be square");
    if a.nrows() == 0 {
        return Vec::new();
    }
    let mut eig: Vec<Complex<f64>> = a.clone().complex_eigenvalues().iter().copied().collect();
    eig.sort_by(|x, y| {
        x.re.partial_cmp(&y.re)
            .unwrap()
            .then(x.im.partial_cmp(&y.im).unwrap())
    });
    eig
}

/// Largest real part over the spectrum of `a`.
pub fn spectral_abscissa(a: &DMatrix<f64>) -> f64 {
    eigenvalues(a)
        .iter()
        .map(|l| l.re)
        .fold(f64::NEG_INFINITY, f64::max)
}

pub fn is_hurwitz(a: &DMatrix<f64>) -> bool {
    spectral_abscissa(a) < 0.0
}

/// Solves the continuous Lyapunov equation `A P + P A^T + W = 0` for
/// symmetric `W`, via a complex Schur reduction and back-substitution.
/// Requires `A` Hurwitz (more generally: no two eigenvalues summing to zero).
pub fn lyapunov(a: &DMatrix<f64>, w: &DMatrix<f64>) -> DMatrix<f64> {
    let n = a.nrows();
    assert_eq!(a.ncols(), n);
    assert_eq!(w.shape(), (n, n));
    let (q, t) = to_complex(a).schur().unpack();
    let c = q.adjoint() * to_complex(w) * &q;
    // Solve T Y + Y T^H = -C column by column, last column first.
    let mut y = CMatrix::zeros(n, n);
    for k in (0..n).rev() {
        let mut rhs = -c.column(k).clone_owned();
        for j in (k + 1)..n {
            let tkj = t[(k, j)].conj();
            rhs -= y.column(j) * tkj;
        }
        // (T + conj(t_kk) I) y_k = rhs, T upper triangular.
        let shift = t[(k, k)].conj();
        let mut col = CVector::zeros(n);
        for i in (0..n).rev() {
            let mut s = rhs[i];
            for j in (i + 1)..n {
                s -= t[(i, j)] * col[j];
            }
            col[i] = s / (t[(i, i)] + shift);
        }
        y.set_column(k, &col);
    }
    let p = &q * y * q.adjoint();
    let pr = p.map(|z| z.re);
    // Symmetrize against roundoff.
    (&pr + pr.transpose()) * 0.5
}

/// Singular values of a complex matrix, descending. Computed through the
/// real embedding `[[Re, -Im], [Im, Re]]`, whose singular values are those
/// of the complex matrix with doubled multiplicity.
pub fn complex_singular_values(m: &CMatrix) -> Vec<f64> {
    let (r, c) = m.shape();
    let mut e = DMatrix::zeros(2 * r, 2 * c);
    for i in 0..r {
        for j in 0..c {
            let v = m[(i, j)];
            e[(i, j)] = v.re;
            e[(i, j + c)] = -v.im;
            e[(i + r, j)] = v.im;
            e[(i + r, j + c)] = v.re;
        }
    }
    let mut sv: Vec<f64> = e.svd(false, false).singular_values.iter().copied().collect();
    sv.sort_by(|a, b| b.partial_cmp(a).unwrap());
    // Every complex singular value appears twice in the embedding.
    sv.into_iter().step_by(2).collect()
}

/// Minimum eigenvalue of a symmetric matrix (symmetrized before the solve).
pub fn symmetric_eig_min(m: &DMatrix<f64>) -> f64 {
    let s = (m + m.transpose()) * 0.5;
    s.symmetric_eigenvalues()
        .iter()
        .fold(f64::INFINITY, |acc, &x| acc.min(x))
}

/// Maximum eigenvalue of a symmetric matrix.
pub fn symmetric_eig_max(m: &DMatrix<f64>) -> f64 {
    let s = (m + m.transpose()) * 0.5;
    s.symmetric_eigenvalues()
        .iter()
        .fold(f64::NEG_INFINITY, |acc, &x| acc.max(x))
}

/// True when `m` is symmetric positive definite with margin `eps`.
pub fn is_positive_definite(m: &DMatrix<f64>, eps: f64) -> bool {
    symmetric_eig_min(m) > eps
}

/// Infinity norm (max absolute entry) of a real matrix.
pub fn max_abs(m: &DMatrix<f64>) -> f64 {
    m.iter().fold(0.0f64, |acc, &x| acc.max(x.abs()))
}

/// Row-major flattening used by all JSON matrix reports.
pub fn row_major(m: &DMatrix<f64>) -> Vec<f64> {
    let mut out = Vec::with_capacity(m.nrows() * m.ncols());
    for i in 0..m.nrows() {
        for j in 0..m.ncols() {
            out.push(m[(i, j)]);
        }
    }
    out
}

/// Inverse of [`row_major`].
pub fn from_row_major(rows: usize, cols: usize, data: &[f64]) -> DMatrix<f64> {
    assert_eq!(data.len(), rows * cols);
    DMatrix::from_row_slice(rows, cols, data)
}
