//! Small dense helpers on top of nalgebra.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{check, invalid, Result};

pub type C64 = Complex64;
pub type CMat = DMatrix<C64>;
pub type CVec = DVector<C64>;

pub const ZERO: C64 = C64::new(0.0, 0.0);
pub const ONE: C64 = C64::new(1.0, 0.0);

pub fn c(re: f64) -> C64 {
    C64::new(re, 0.0)
}

pub fn to_complex(m: &DMatrix<f64>) -> CMat {
    m.map(c)
}

pub fn kron(a: &CMat, b: &CMat) -> CMat {
    a.kronecker(b)
}

pub fn identity(n: usize) -> CMat {
    CMat::identity(n, n)
}

/// Largest entry modulus.
pub fn max_abs(m: &CMat) -> f64 {
    m.iter().fold(0.0, |acc, z| acc.max(z.norm()))
}

pub fn max_abs_real(m: &DMatrix<f64>) -> f64 {
    m.iter().fold(0.0, |acc, z| acc.max(z.abs()))
}

/// Spectral norm.
pub fn op_norm(m: &CMat) -> f64 {
    if m.nrows() == 0 || m.ncols() == 0 {
        return 0.0;
    }
    m.clone().singular_values().max()
}

pub fn is_unitary(u: &CMat, tol: f64) -> bool {
    u.is_square() && max_abs(&(u.adjoint() * u - identity(u.nrows()))) <= tol
}

/// Eigen-decomposition of a Hermitian matrix; eigenvalues ascending.
pub fn hermitian_eigen(h: &CMat) -> (Vec<f64>, CMat) {
    let sym = (h + h.adjoint()).scale(0.5);
    let eig = sym.symmetric_eigen();
    let mut order: Vec<usize> = (0..eig.eigenvalues.len()).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    let vals = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let vecs = CMat::from_fn(h.nrows(), order.len(), |r, k| eig.eigenvectors[(r, order[k])]);
    (vals, vecs)
}

/// Applies `f` to the spectrum of a Hermitian matrix.
pub fn hermitian_fn(h: &CMat, f: impl Fn(f64) -> f64) -> CMat {
    let (vals, vecs) = hermitian_eigen(h);
    let scaled = CMat::from_fn(vecs.nrows(), vecs.ncols(), |r, k| vecs[(r, k)] * f(vals[k]));
    scaled * vecs.adjoint()
}

/// Principal square root of a positive semidefinite matrix. Eigenvalues below
/// `1e-13` of the largest are rounding noise and map to zero; otherwise their
/// square roots would show up at the `1e-8` level.
pub fn psd_sqrt(h: &CMat) -> CMat {
    let (vals, _) = hermitian_eigen(h);
    let floor = 1e-13 * vals.iter().fold(0.0f64, |a, &b| a.max(b.abs()));
    hermitian_fn(h, |x| if x > floor { x.sqrt() } else { 0.0 })
}

/// `h^{-1/2}` on the support of `h`, zero on eigenvalues below `rel_tol * λ_max`.
pub fn pinv_sqrt(h: &CMat, rel_tol: f64) -> CMat {
    let (vals, _) = hermitian_eigen(h);
    let top = vals.iter().fold(0.0f64, |a, &b| a.max(b.abs()));
    hermitian_fn(h, |x| if x > rel_tol * top { 1.0 / x.sqrt() } else { 0.0 })
}

/// Multiplies a vector by a phase so that its first entry with modulus above
/// `tol` is real and positive.
pub fn fix_phase(v: &mut [C64], tol: f64) {
    if let Some(z) = v.iter().find(|z| z.norm() > tol).copied() {
        let ph = z.conj() / z.norm();
        for x in v.iter_mut() {
            *x *= ph;
        }
    }
}

/// Greedy pivoted Gram-Schmidt. Starting from the orthonormal columns `fixed`,
/// repeatedly takes the candidate column with the largest residual (ties
/// within `1e-9` relative go to the lowest index) until `want` new vectors are
/// found or the largest residual drops below `tol`. Returns only new vectors.
pub fn pivoted_gram_schmidt(fixed: &CMat, cands: &CMat, want: usize, tol: f64) -> CMat {
    let dim = cands.nrows();
    let mut resid = cands.clone();
    let project_out = |resid: &mut CMat, q: &CVec| {
        for j in 0..resid.ncols() {
            let mut col = resid.column_mut(j);
            let ov = q.dotc(&col);
            col.axpy(-ov, q, ONE);
        }
    };
    for k in 0..fixed.ncols() {
        let q = fixed.column(k).into_owned();
        project_out(&mut resid, &q);
        // second pass keeps the residuals orthogonal to working precision
        project_out(&mut resid, &q);
    }
    let mut out: Vec<CVec> = Vec::new();
    while out.len() < want {
        let norms: Vec<f64> = (0..resid.ncols()).map(|j| resid.column(j).norm()).collect();
        let best = norms.iter().cloned().fold(0.0f64, f64::max);
        if best < tol {
            break;
        }
        let pick = norms.iter().position(|&x| x >= best * (1.0 - 1e-9)).unwrap();
        let mut q: CVec = resid.column(pick).into_owned();
        q.unscale_mut(norms[pick]);
        project_out(&mut resid, &q);
        project_out(&mut resid, &q);
        out.push(q);
    }
    let mut m = CMat::zeros(dim, out.len());
    for (k, q) in out.iter().enumerate() {
        m.set_column(k, q);
    }
    m
}

/// Extends `k` orthonormal rows in `C^m` to an `m × m` unitary. The new rows
/// are built from standard basis vectors by pivoted Gram-Schmidt and have
/// their first nonzero entry real and positive.
pub fn unitary_complete(rows: &CMat) -> Result<CMat> {
    let (k, m) = rows.shape();
    if k > m {
        return invalid(format!("{k} rows cannot be completed in dimension {m}"));
    }
    let gram = rows * rows.adjoint();
    check("unitary_complete: input rows orthonormal", max_abs(&(gram - identity(k))), 1e-10)?;
    let cols = rows.adjoint();
    let extra = pivoted_gram_schmidt(&cols, &identity(m), m - k, 1e-8);
    if extra.ncols() != m - k {
        return Err(crate::error::PbtError::Rank {
            what: "unitary_complete".into(),
            expected: m - k,
            found: extra.ncols(),
        });
    }
    let mut u = CMat::zeros(m, m);
    u.rows_mut(0, k).copy_from(rows);
    for j in 0..extra.ncols() {
        let mut row: Vec<C64> = extra.column(j).iter().map(|z| z.conj()).collect();
        fix_phase(&mut row, 1e-12);
        for (c, z) in row.into_iter().enumerate() {
            u[(k + j, c)] = z;
        }
    }
    Ok(u)
}

/// Haar-random unitary via QR of a complex Ginibre matrix.
pub fn haar_unitary<R: Rng + ?Sized>(d: usize, rng: &mut R) -> CMat {
    let g = CMat::from_fn(d, d, |_, _| {
        let re: f64 = rng.sample(StandardNormal);
        let im: f64 = rng.sample(StandardNormal);
        C64::new(re, im)
    });
    let qr = g.qr();
    let (q, r) = (qr.q(), qr.r());
    let mut u = q;
    for j in 0..d {
        let z = r[(j, j)];
        let ph = if z.norm() > 0.0 { z / z.norm() } else { ONE };
        let mut col = u.column_mut(j);
        col *= ph;
    }
    u
}

/// Haar-random real orthogonal matrix.
pub fn haar_orthogonal<R: Rng + ?Sized>(d: usize, rng: &mut R) -> DMatrix<f64> {
    let g = DMatrix::<f64>::from_fn(d, d, |_, _| rng.sample(StandardNormal));
    let qr = g.qr();
    let (mut q, r) = (qr.q(), qr.r());
    for j in 0..d {
        if r[(j, j)] < 0.0 {
            let mut col = q.column_mut(j);
            col *= -1.0;
        }
    }
    q
}

/// Random density matrix of dimension `d` (normalized Wishart).
pub fn random_density<R: Rng + ?Sized>(d: usize, rng: &mut R) -> CMat {
    let g = CMat::from_fn(d, d, |_, _| {
        let re: f64 = rng.sample(StandardNormal);
        let im: f64 = rng.sample(StandardNormal);
        C64::new(re, im)
    });
    let p = &g * g.adjoint();
    let t = p.trace();
    p / t
}

/// Trace norm of a Hermitian matrix.
pub fn trace_norm_hermitian(h: &CMat) -> f64 {
    hermitian_eigen(h).0.iter().map(|x| x.abs()).sum()
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn completion_conventions() {
        let e1 = CMat::from_row_slice(1, 3, &[ONE, ZERO, ZERO]);
        assert_eq!(unitary_complete(&e1).unwrap(), identity(3));

        let s = 0.5f64.sqrt();
        let plus = CMat::from_row_slice(1, 2, &[c(s), c(s)]);
        let u = unitary_complete(&plus).unwrap();
        assert!((u[(1, 0)] - c(s)).norm() < 1e-15);
        assert!((u[(1, 1)] + c(s)).norm() < 1e-15);

        let bad = CMat::from_row_slice(1, 2, &[ONE, ONE]);
        assert!(unitary_complete(&bad).is_err());
    }

    #[test]
    fn completion_of_random_rows() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let u = haar_unitary(7, &mut rng);
        let rows = u.rows(0, 3).into_owned();
        let w = unitary_complete(&rows).unwrap();
        assert!(is_unitary(&w, 1e-10));
        assert!(max_abs(&(w.rows(0, 3) - rows)) < 1e-15);
    }

    #[test]
    fn square_roots() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let rho = random_density(4, &mut rng);
        let s = psd_sqrt(&rho);
        assert!(max_abs(&(&s * &s - &rho)) < 1e-12);
        let p = pinv_sqrt(&rho, 1e-10);
        assert!(max_abs(&(&s * &p - identity(4))) < 1e-9);
    }
}

/// Uhlmann fidelity `(Tr √(√ρ σ √ρ))²`.
pub fn state_fidelity(rho: &CMat, sigma: &CMat) -> f64 {
    let s = psd_sqrt(rho);
    let m = &s * sigma * &s;
    let m = (&m + m.adjoint()) * c(0.5);
    let (vals, _) = hermitian_eigen(&m);
    vals.iter().map(|v| v.max(0.0).sqrt()).sum::<f64>().powi(2)
}
