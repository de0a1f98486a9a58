//! Dense linear algebra over arbitrary-precision floats.
//!
//! Everything here is deterministic: loops run in a fixed order, reductions
//! are sequential or embarrassingly parallel over independent output
//! entries, and no randomized pivoting is used.  Matrices are dense,
//! row-major [`Mat`] values of [`rug::Float`] entries, all carrying the same
//! precision.
//!
//! The three workhorses are [`cholesky`] (with an optional caller-driven
//! diagonal shift for barely-definite inputs), [`sym_eig`] (Householder
//! tridiagonalization followed by the implicit-shift QL iteration, with
//! accumulated orthogonal vectors), and the triangular solves.  These are
//! classical algorithms; at 256-bit precision their rounding errors are far
//! below every tolerance used by the callers.

use rayon::prelude::*;
use rug::{Assign, Float};
use thiserror::Error;

use crate::hp::Prec;

/// Errors from dense factorizations.
#[derive(Debug, Error)]
pub enum LinalgError {
    #[error("matrix is not positive definite (pivot {pivot:e} at index {index})")]
    NotPositiveDefinite { index: usize, pivot: f64 },
    #[error("eigenvalue iteration failed to converge at index {index}")]
    EigNoConvergence { index: usize },
    #[error("dimension mismatch: {0}")]
    Shape(&'static str),
}

/// Dense row-major matrix of `Float`s sharing one precision.
#[derive(Clone, Debug)]
pub struct Mat {
    pub rows: usize,
    pub cols: usize,
    data: Vec<Float>,
}

impl Mat {
    /// All-zero matrix.
    pub fn zeros(prec: Prec, rows: usize, cols: usize) -> Self {
        Mat {
            rows,
            cols,
            data: (0..rows * cols).map(|_| Float::new(prec)).collect(),
        }
    }

    /// Identity matrix.
    pub fn identity(prec: Prec, n: usize) -> Self {
        let mut m = Mat::zeros(prec, n, n);
        for i in 0..n {
            m[(i, i)] = Float::with_val(prec, 1);
        }
        m
    }

    /// Builds a matrix entry by entry.
    pub fn from_fn<F: FnMut(usize, usize) -> Float>(rows: usize, cols: usize, mut f: F) -> Self {
        let mut data = Vec::with_capacity(rows * cols);
        for i in 0..rows {
            for j in 0..cols {
                data.push(f(i, j));
            }
        }
        Mat { rows, cols, data }
    }

    /// Square matrix from its strict lower/upper mirror: copies the upper
    /// triangle (including diagonal) onto the lower one.
    pub fn symmetrize_from_upper(&mut self) {
        assert_eq!(self.rows, self.cols);
        for i in 0..self.rows {
            for j in 0..i {
                self[(i, j)] = self[(j, i)].clone();
            }
        }
    }

    /// Transposed copy.
    pub fn transpose(&self) -> Mat {
        Mat::from_fn(self.cols, self.rows, |i, j| self[(j, i)].clone())
    }

    /// Matrix product, parallel over output rows, deterministic.
    pub fn matmul(&self, prec: Prec, other: &Mat) -> Mat {
        assert_eq!(self.cols, other.rows, "matmul shape");
        let rows = self.rows;
        let cols = other.cols;
        let inner = self.cols;
        let mut out = Mat::zeros(prec, rows, cols);
        out.data
            .par_chunks_mut(cols)
            .enumerate()
            .for_each(|(i, out_row)| {
                let mut t = Float::new(prec);
                for (k, a) in self.data[i * inner..(i + 1) * inner].iter().enumerate() {
                    if a.is_zero() {
                        continue;
                    }
                    let brow = &other.data[k * cols..(k + 1) * cols];
                    for (o, b) in out_row.iter_mut().zip(brow.iter()) {
                        t.assign(a * b);
                        *o += &t;
                    }
                }
            });
        out
    }

    /// Matrix–vector product.
    pub fn mul_vec(&self, prec: Prec, v: &[Float]) -> Vec<Float> {
        assert_eq!(self.cols, v.len(), "mul_vec shape");
        (0..self.rows)
            .map(|i| {
                let mut acc = Float::new(prec);
                for (a, x) in self.data[i * self.cols..(i + 1) * self.cols]
                    .iter()
                    .zip(v.iter())
                {
                    acc += Float::with_val(prec, a * x);
                }
                acc
            })
            .collect()
    }

    /// Largest absolute entry.
    pub fn max_abs(&self) -> Float {
        let mut m = Float::new(self.data[0].prec());
        for x in &self.data {
            let a = x.clone().abs();
            if a > m {
                m = a;
            }
        }
        m
    }

    /// Raw row slice.
    pub fn row(&self, i: usize) -> &[Float] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }
}

impl std::ops::Index<(usize, usize)> for Mat {
    type Output = Float;
    fn index(&self, (i, j): (usize, usize)) -> &Float {
        debug_assert!(i < self.rows && j < self.cols);
        &self.data[i * self.cols + j]
    }
}

impl std::ops::IndexMut<(usize, usize)> for Mat {
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut Float {
        debug_assert!(i < self.rows && j < self.cols);
        &mut self.data[i * self.cols + j]
    }
}

/// Cholesky factorization `A = L Lᵀ` of a symmetric positive definite
/// matrix; returns the lower factor.  Only the lower triangle of `A` is
/// read.
///
/// A non-positive pivot aborts with [`LinalgError::NotPositiveDefinite`];
/// the caller decides whether to retry with a diagonal shift.
pub fn cholesky(prec: Prec, a: &Mat) -> Result<Mat, LinalgError> {
    assert_eq!(a.rows, a.cols);
    let n = a.rows;
    let mut l = Mat::zeros(prec, n, n);
    for j in 0..n {
        let mut diag = a[(j, j)].clone();
        for k in 0..j {
            diag -= Float::with_val(prec, &l[(j, k)] * &l[(j, k)]);
        }
        if diag <= 0 {
            return Err(LinalgError::NotPositiveDefinite {
                index: j,
                pivot: diag.to_f64(),
            });
        }
        let d = diag.sqrt();
        l[(j, j)] = d.clone();
        // Column below the pivot; rows are independent.
        let lj: Vec<Float> = (0..j).map(|k| l[(j, k)].clone()).collect();
        let updates: Vec<(usize, Float)> = ((j + 1)..n)
            .into_par_iter()
            .map(|i| {
                let mut s = a[(i, j)].clone();
                for (k, ljk) in lj.iter().enumerate() {
                    s -= Float::with_val(prec, &l[(i, k)] * ljk);
                }
                (i, s / &d)
            })
            .collect();
        for (i, v) in updates {
            l[(i, j)] = v;
        }
    }
    Ok(l)
}

/// Solves `L x = b` (forward substitution) for lower-triangular `L`.
pub fn solve_lower(prec: Prec, l: &Mat, b: &[Float]) -> Vec<Float> {
    let n = l.rows;
    assert_eq!(b.len(), n);
    let mut x: Vec<Float> = b.to_vec();
    for i in 0..n {
        for k in 0..i {
            let t = Float::with_val(prec, &l[(i, k)] * &x[k]);
            x[i] -= t;
        }
        x[i] /= &l[(i, i)];
    }
    x
}

/// Solves `Lᵀ x = b` (backward substitution) with the *lower* factor `L`.
pub fn solve_lower_t(prec: Prec, l: &Mat, b: &[Float]) -> Vec<Float> {
    let n = l.rows;
    assert_eq!(b.len(), n);
    let mut x: Vec<Float> = b.to_vec();
    for i in (0..n).rev() {
        for k in (i + 1)..n {
            let t = Float::with_val(prec, &l[(k, i)] * &x[k]);
            x[i] -= t;
        }
        x[i] /= &l[(i, i)];
    }
    x
}

/// Solves `A x = b` given the Cholesky factor `L` of `A`.
pub fn cholesky_solve(prec: Prec, l: &Mat, b: &[Float]) -> Vec<Float> {
    let y = solve_lower(prec, l, b);
    solve_lower_t(prec, l, &y)
}

/// Symmetric eigendecomposition `A = Q diag(d) Qᵀ`.
///
/// Returns the eigenvalues in ascending order and the orthogonal matrix `Q`
/// whose columns are the matching eigenvectors.  Householder reduction to
/// tridiagonal form with accumulation, then the QL algorithm with implicit
/// shifts.  Deterministic; fails only if some eigenvalue needs more than 64
/// QL sweeps (which does not happen for symmetric input).
pub fn sym_eig(prec: Prec, a: &Mat) -> Result<(Vec<Float>, Mat), LinalgError> {
    assert_eq!(a.rows, a.cols);
    let n = a.rows;
    if n == 0 {
        return Ok((Vec::new(), Mat::zeros(prec, 0, 0)));
    }
    let mut z = a.clone();
    let mut d: Vec<Float> = (0..n).map(|_| Float::new(prec)).collect();
    let mut e: Vec<Float> = (0..n).map(|_| Float::new(prec)).collect();
    tred2(prec, &mut z, &mut d, &mut e)?;
    tqli(prec, &mut d, &mut e, &mut z)?;

    // Sort ascending, stable in the original index for determinism.
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| d[i].partial_cmp(&d[j]).unwrap().then(i.cmp(&j)));
    let sorted_d: Vec<Float> = order.iter().map(|&i| d[i].clone()).collect();
    let q = Mat::from_fn(n, n, |i, j| z[(i, order[j])].clone());
    Ok((sorted_d, q))
}

/// Householder reduction of a real symmetric matrix to tridiagonal form
/// with accumulation of the orthogonal transformation in `z`.
fn tred2(prec: Prec, z: &mut Mat, d: &mut [Float], e: &mut [Float]) -> Result<(), LinalgError> {
    let n = z.rows;
    for i in (1..n).rev() {
        let l = i - 1;
        let mut h = Float::new(prec);
        if l > 0 {
            let mut scale = Float::new(prec);
            for k in 0..=l {
                scale += z[(i, k)].clone().abs();
            }
            if scale.is_zero() {
                e[i] = z[(i, l)].clone();
            } else {
                for k in 0..=l {
                    let t = Float::with_val(prec, &z[(i, k)] / &scale);
                    z[(i, k)] = t.clone();
                    h += Float::with_val(prec, &t * &t);
                }
                let f = z[(i, l)].clone();
                let mut g = h.clone().sqrt();
                if f >= 0 {
                    g = -g;
                }
                e[i] = Float::with_val(prec, &scale * &g);
                h -= Float::with_val(prec, &f * &g);
                z[(i, l)] = f.clone() - &g;
                let mut fsum = Float::new(prec);
                for j in 0..=l {
                    z[(j, i)] = Float::with_val(prec, &z[(i, j)] / &h);
                    let mut gg = Float::new(prec);
                    for k in 0..=j {
                        gg += Float::with_val(prec, &z[(j, k)] * &z[(i, k)]);
                    }
                    for k in (j + 1)..=l {
                        gg += Float::with_val(prec, &z[(k, j)] * &z[(i, k)]);
                    }
                    e[j] = Float::with_val(prec, &gg / &h);
                    fsum += Float::with_val(prec, &e[j] * &z[(i, j)]);
                }
                let hh = fsum / (Float::with_val(prec, 2) * &h);
                for j in 0..=l {
                    let fj = z[(i, j)].clone();
                    let gj = Float::with_val(prec, &e[j] - Float::with_val(prec, &hh * &fj));
                    e[j] = gj.clone();
                    for k in 0..=j {
                        let t = Float::with_val(prec, &fj * &e[k])
                            + Float::with_val(prec, &gj * &z[(i, k)]);
                        z[(j, k)] -= t;
                    }
                }
            }
        } else {
            e[i] = z[(i, l)].clone();
        }
        d[i] = h;
    }
    d[0] = Float::new(prec);
    e[0] = Float::new(prec);
    for i in 0..n {
        if !d[i].is_zero() {
            for j in 0..i {
                let mut g = Float::new(prec);
                for k in 0..i {
                    g += Float::with_val(prec, &z[(i, k)] * &z[(k, j)]);
                }
                for k in 0..i {
                    let t = Float::with_val(prec, &g * &z[(k, i)]);
                    z[(k, j)] -= t;
                }
            }
        }
        d[i] = z[(i, i)].clone();
        z[(i, i)] = Float::with_val(prec, 1);
        for j in 0..i {
            z[(j, i)] = Float::new(prec);
            z[(i, j)] = Float::new(prec);
        }
    }
    Ok(())
}

/// QL iteration with implicit shifts on a symmetric tridiagonal matrix,
/// rotating the accumulated vectors in `z` along.
fn tqli(prec: Prec, d: &mut [Float], e: &mut [Float], z: &mut Mat) -> Result<(), LinalgError> {
    let n = d.len();
    if n == 1 {
        return Ok(());
    }
    for i in 1..n {
        e[i - 1] = e[i].clone();
    }
    e[n - 1] = Float::new(prec);
    let eps = Float::with_val(prec, Float::i_exp(1, -(prec as i32) + 6));
    for l in 0..n {
        let mut iter = 0;
        loop {
            let mut m = l;
            while m + 1 < n {
                let dd = Float::with_val(prec, d[m].clone().abs() + d[m + 1].clone().abs());
                if e[m].clone().abs() <= Float::with_val(prec, &eps * &dd) {
                    break;
                }
                m += 1;
            }
            if m == l {
                break;
            }
            iter += 1;
            if iter > 64 {
                return Err(LinalgError::EigNoConvergence { index: l });
            }
            let mut g = (d[l + 1].clone() - &d[l]) / (Float::with_val(prec, 2) * &e[l]);
            let mut r = g.clone().hypot(&Float::with_val(prec, 1));
            let denom = if g >= 0 {
                Float::with_val(prec, &g + &r)
            } else {
                Float::with_val(prec, &g - &r)
            };
            g = d[m].clone() - &d[l] + Float::with_val(prec, &e[l] / &denom);
            let mut s = Float::with_val(prec, 1);
            let mut c = Float::with_val(prec, 1);
            let mut p = Float::new(prec);
            let mut underflow = false;
            for i in (l..m).rev() {
                let mut f = Float::with_val(prec, &s * &e[i]);
                let b = Float::with_val(prec, &c * &e[i]);
                r = f.clone().hypot(&g);
                e[i + 1] = r.clone();
                if r.is_zero() {
                    d[i + 1] -= &p;
                    e[m] = Float::new(prec);
                    underflow = true;
                    break;
                }
                s = Float::with_val(prec, &f / &r);
                c = Float::with_val(prec, &g / &r);
                g = d[i + 1].clone() - &p;
                r = Float::with_val(prec, &(Float::with_val(prec, &d[i] - &g)) * &s)
                    + Float::with_val(prec, 2) * Float::with_val(prec, &c * &b);
                p = Float::with_val(prec, &s * &r);
                d[i + 1] = Float::with_val(prec, &g + &p);
                g = Float::with_val(prec, &c * &r) - &b;
                for k in 0..n {
                    f = z[(k, i + 1)].clone();
                    z[(k, i + 1)] = Float::with_val(prec, &s * &z[(k, i)])
                        + Float::with_val(prec, &c * &f);
                    z[(k, i)] = Float::with_val(prec, &c * &z[(k, i)])
                        - Float::with_val(prec, &s * &f);
                }
            }
            if underflow {
                continue;
            }
            d[l] -= &p;
            e[l] = g;
            e[m] = Float::new(prec);
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hp::float;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha20Rng;

    const P: Prec = 256;

    fn random_sym(rng: &mut ChaCha20Rng, n: usize) -> Mat {
        let mut a = Mat::zeros(P, n, n);
        for i in 0..n {
            for j in 0..=i {
                let v = float(P, rng.gen_range(-1.0..1.0));
                a[(i, j)] = v.clone();
                a[(j, i)] = v;
            }
        }
        a
    }

    fn random_spd(rng: &mut ChaCha20Rng, n: usize) -> Mat {
        let m = Mat::from_fn(n, n, |_, _| float(P, rng.gen_range(-1.0..1.0)));
        let mut a = m.transpose().matmul(P, &m);
        for i in 0..n {
            a[(i, i)] += Float::with_val(P, n as u32);
        }
        a
    }

    #[test]
    fn matmul_and_mul_vec_agree() {
        let mut rng = ChaCha20Rng::seed_from_u64(1);
        let a = Mat::from_fn(4, 6, |_, _| float(P, rng.gen_range(-2.0..2.0)));
        let b = Mat::from_fn(6, 3, |_, _| float(P, rng.gen_range(-2.0..2.0)));
        let ab = a.matmul(P, &b);
        assert_eq!((ab.rows, ab.cols), (4, 3));
        for col in 0..3 {
            let v: Vec<Float> = (0..6).map(|k| b[(k, col)].clone()).collect();
            let av = a.mul_vec(P, &v);
            for i in 0..4 {
                let diff = Float::with_val(P, &ab[(i, col)] - &av[i]).abs();
                assert!(diff < float(P, 1e-70));
            }
        }
    }

    #[test]
    fn cholesky_reconstructs_and_solves() {
        let mut rng = ChaCha20Rng::seed_from_u64(2);
        for n in [1usize, 2, 5, 12, 30] {
            let a = random_spd(&mut rng, n);
            let l = cholesky(P, &a).unwrap();
            let llt = l.matmul(P, &l.transpose());
            for i in 0..n {
                for j in 0..n {
                    let diff = Float::with_val(P, &llt[(i, j)] - &a[(i, j)]).abs();
                    assert!(diff < float(P, 1e-68), "n={n} ({i},{j})");
                }
            }
            let b: Vec<Float> = (0..n).map(|_| float(P, rng.gen_range(-3.0..3.0))).collect();
            let x = cholesky_solve(P, &l, &b);
            let ax = a.mul_vec(P, &x);
            for i in 0..n {
                let diff = Float::with_val(P, &ax[i] - &b[i]).abs();
                assert!(diff < float(P, 1e-65));
            }
        }
    }

    #[test]
    fn cholesky_rejects_indefinite() {
        let mut a = Mat::identity(P, 3);
        a[(2, 2)] = float(P, -1);
        assert!(matches!(
            cholesky(P, &a),
            Err(LinalgError::NotPositiveDefinite { index: 2, .. })
        ));
    }

    #[test]
    fn eig_reconstructs_random_symmetric() {
        let mut rng = ChaCha20Rng::seed_from_u64(3);
        for n in [1usize, 2, 3, 8, 25] {
            let a = random_sym(&mut rng, n);
            let (d, q) = sym_eig(P, &a).unwrap();
            assert_eq!(d.len(), n);
            // Ascending order.
            for w in d.windows(2) {
                assert!(w[0] <= w[1]);
            }
            // A q_j = d_j q_j.
            for j in 0..n {
                let qj: Vec<Float> = (0..n).map(|i| q[(i, j)].clone()).collect();
                let aq = a.mul_vec(P, &qj);
                for i in 0..n {
                    let want = Float::with_val(P, &d[j] * &qj[i]);
                    let diff = Float::with_val(P, &aq[i] - &want).abs();
                    assert!(diff < float(P, 1e-65), "n={n} vec {j} row {i}");
                }
            }
            // Q orthonormal.
            let qtq = q.transpose().matmul(P, &q);
            for i in 0..n {
                for j in 0..n {
                    let want = if i == j { 1 } else { 0 };
                    let diff = Float::with_val(P, &qtq[(i, j)] - want).abs();
                    assert!(diff < float(P, 1e-68));
                }
            }
        }
    }

    #[test]
    fn eig_known_values() {
        // [[2, 1], [1, 2]] has eigenvalues 1 and 3.
        let mut a = Mat::identity(P, 2);
        a[(0, 0)] = float(P, 2);
        a[(1, 1)] = float(P, 2);
        a[(0, 1)] = float(P, 1);
        a[(1, 0)] = float(P, 1);
        let (d, _) = sym_eig(P, &a).unwrap();
        assert!(Float::with_val(P, &d[0] - 1u32).abs() < float(P, 1e-70));
        assert!(Float::with_val(P, &d[1] - 3u32).abs() < float(P, 1e-70));

        // Diagonal input is returned sorted.
        let mut diag = Mat::zeros(P, 4, 4);
        for (i, v) in [3.0, -1.0, 2.0, 0.5].iter().enumerate() {
            diag[(i, i)] = float(P, *v);
        }
        let (d, q) = sym_eig(P, &diag).unwrap();
        let want = [-1.0, 0.5, 2.0, 3.0];
        for (x, w) in d.iter().zip(want.iter()) {
            assert!(Float::with_val(P, x - float(P, *w)).abs() < float(P, 1e-70));
        }
        // Eigenvectors are signed unit basis vectors.
        for j in 0..4 {
            let mut nonzero = 0;
            for i in 0..4 {
                if q[(i, j)].clone().abs() > float(P, 0.5) {
                    nonzero += 1;
                }
            }
            assert_eq!(nonzero, 1);
        }
    }

    #[test]
    fn eig_handles_clustered_and_zero_eigenvalues() {
        // Rank-1 projector: eigenvalues {0, 0, 3}.
        let mut a = Mat::zeros(P, 3, 3);
        for i in 0..3 {
            for j in 0..3 {
                a[(i, j)] = float(P, 1);
            }
        }
        let (d, q) = sym_eig(P, &a).unwrap();
        assert!(d[0].clone().abs() < float(P, 1e-70));
        assert!(d[1].clone().abs() < float(P, 1e-70));
        assert!(Float::with_val(P, &d[2] - 3u32).abs() < float(P, 1e-70));
        let qtq = q.transpose().matmul(P, &q);
        for i in 0..3 {
            for j in 0..3 {
                let want = if i == j { 1 } else { 0 };
                assert!(Float::with_val(P, &qtq[(i, j)] - want).abs() < float(P, 1e-68));
            }
        }
    }

    #[test]
    fn triangular_solves_match_dense() {
        let mut rng = ChaCha20Rng::seed_from_u64(4);
        let n = 9;
        let a = random_spd(&mut rng, n);
        let l = cholesky(P, &a).unwrap();
        let b: Vec<Float> = (0..n).map(|_| float(P, rng.gen_range(-1.0..1.0))).collect();
        let y = solve_lower(P, &l, &b);
        let ly = l.mul_vec(P, &y);
        for i in 0..n {
            assert!(Float::with_val(P, &ly[i] - &b[i]).abs() < float(P, 1e-68));
        }
        let x = solve_lower_t(P, &l, &b);
        let ltx = l.transpose().mul_vec(P, &x);
        for i in 0..n {
            assert!(Float::with_val(P, &ltx[i] - &b[i]).abs() < float(P, 1e-68));
        }
    }
}
