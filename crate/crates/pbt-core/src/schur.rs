//! Dense Schur transform on `(C^d)^{⊗m}` whose permutation action is exactly
//! Young's orthogonal form.

use std::collections::HashMap;
use std::sync::Arc;

use nalgebra::DMatrix;
use once_cell::sync::Lazy;
use parking_lot::RwLock;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{invalid, PbtError, Result};
use crate::la::{self, CMat};
use crate::symrep::{tableaux, Perm};
use crate::young::{enumerate_partitions, specht, weyl, Partition};

/// Largest `d^m` accepted by dense constructions.
pub const DENSE_LIMIT: usize = 1 << 20;

fn pow(d: usize, m: usize) -> Result<usize> {
    d.checked_pow(m as u32)
        .ok_or_else(|| PbtError::Overflow(format!("{d}^{m}")))
}

pub(crate) fn guard(what: &str, dim: usize) -> Result<()> {
    if dim > DENSE_LIMIT {
        return Err(PbtError::DimensionGuard {
            what: what.to_string(),
            dim,
            limit: DENSE_LIMIT,
        });
    }
    Ok(())
}

/// `V(σ)` on `m` qudits of dimension `d`, stored as an index map.
///
/// `V(σ)|i_1 .. i_m⟩ = |i_{σ⁻¹(1)} .. i_{σ⁻¹(m)}⟩`, so the content of qudit `a`
/// moves to qudit `σ(a)`. Qudit 1 is the most significant digit.
#[derive(Clone, Debug)]
pub struct PermutationOperator {
    pub m: usize,
    pub d: usize,
    pub sigma: Perm,
    map: Vec<usize>,
}

impl PermutationOperator {
    pub fn new(m: usize, d: usize, sigma: &Perm) -> Result<Self> {
        if sigma.len() != m {
            return invalid(format!("permutation on {} points used on {m} qudits", sigma.len()));
        }
        let dim = pow(d, m)?;
        guard("permutation operator", dim)?;
        let mut strides = vec![1usize; m];
        for a in (0..m.saturating_sub(1)).rev() {
            strides[a] = strides[a + 1] * d;
        }
        let map = (0..dim)
            .map(|idx| {
                let mut out = 0;
                for a in 0..m {
                    let digit = (idx / strides[a]) % d;
                    out += digit * strides[sigma.apply(a)];
                }
                out
            })
            .collect();
        Ok(PermutationOperator {
            m,
            d,
            sigma: sigma.clone(),
            map,
        })
    }

    pub fn dim(&self) -> usize {
        self.map.len()
    }

    /// Image of the basis state `idx`.
    pub fn image(&self, idx: usize) -> usize {
        self.map[idx]
    }

    pub fn apply<T: Copy + Default>(&self, v: &[T]) -> Vec<T> {
        let mut out = vec![T::default(); v.len()];
        for (i, &x) in v.iter().enumerate() {
            out[self.map[i]] = x;
        }
        out
    }

    /// `V(σ) · M`, permuting rows.
    pub fn apply_rows(&self, m: &CMat) -> CMat {
        let mut out = CMat::zeros(m.nrows(), m.ncols());
        for i in 0..m.nrows() {
            out.row_mut(self.map[i]).copy_from(&m.row(i));
        }
        out
    }

    pub fn to_dense(&self) -> CMat {
        let mut out = CMat::zeros(self.dim(), self.dim());
        for (i, &j) in self.map.iter().enumerate() {
            out[(j, i)] = la::ONE;
        }
        out
    }
}

/// Dense `V(σ)` with the same conventions.
pub fn permutation_operator(m: usize, d: usize, sigma: &Perm) -> Result<PermutationOperator> {
    PermutationOperator::new(m, d, sigma)
}

/// Transpose on the last tensor factor.
pub fn partial_transpose_last(op: &CMat, m: usize, d: usize) -> Result<CMat> {
    let dim = pow(d, m)?;
    if op.nrows() != dim || op.ncols() != dim {
        return invalid(format!("operator is {}x{}, expected {dim}x{dim}", op.nrows(), op.ncols()));
    }
    Ok(CMat::from_fn(dim, dim, |r, c| {
        let (rh, rl) = (r / d, r % d);
        let (ch, cl) = (c / d, c % d);
        op[(rh * d + cl, ch * d + rl)]
    }))
}

#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize)]
pub struct SchurLabel {
    pub lambda: Partition,
    /// 0-based multiplicity index.
    pub r: usize,
    /// 0-based tableau index in last-letter order.
    pub path: usize,
}

#[derive(Clone, Debug, Serialize)]
pub struct SchurBlock {
    pub lambda: Partition,
    pub offset: usize,
    pub mult: usize,
    pub dim: usize,
}

/// Rows `(λ, r, j)` ordered by λ (enumeration order), then `r`, then `j`.
#[derive(Debug)]
pub struct SchurTransform {
    pub m: usize,
    pub d: usize,
    pub seed: u64,
    /// The transform is real in this construction.
    pub real: DMatrix<f64>,
    pub index: Vec<SchurLabel>,
    pub blocks: Vec<SchurBlock>,
}

impl SchurTransform {
    pub fn dim(&self) -> usize {
        self.real.nrows()
    }

    pub fn matrix(&self) -> CMat {
        la::to_complex(&self.real)
    }

    pub fn block(&self, lambda: &Partition) -> Option<&SchurBlock> {
        self.blocks.iter().find(|b| &b.lambda == lambda)
    }

    pub fn row_of(&self, lambda: &Partition, r: usize, path: usize) -> Option<usize> {
        let b = self.block(lambda)?;
        (r < b.mult && path < b.dim).then(|| b.offset + r * b.dim + path)
    }

    /// The bra with the given label, as a vector.
    pub fn schur_row(&self, lambda: &Partition, r: usize, path: usize) -> Result<Vec<f64>> {
        let row = self.row_of(lambda, r, path).ok_or_else(|| {
            PbtError::InvalidArgument(format!("no Schur row ({lambda}, {r}, {path})"))
        })?;
        Ok(self.real.row(row).iter().copied().collect())
    }

    /// Maximum entrywise deviation of `U V(σ) U†` from `⊕ I ⊗ yor(λ, σ)`.
    pub fn covariance_residual(&self, sigma: &Perm) -> Result<f64> {
        let v = PermutationOperator::new(self.m, self.d, sigma)?;
        let n = self.dim();
        // U V(σ) U† = U (V(σ) U†); V permutes the rows of U† = Uᵀ
        let ut = self.real.transpose();
        let mut vut = DMatrix::<f64>::zeros(n, n);
        for i in 0..n {
            vut.row_mut(v.image(i)).copy_from(&ut.row(i));
        }
        let got = &self.real * vut;
        let mut want = DMatrix::<f64>::zeros(n, n);
        for b in &self.blocks {
            let y = crate::symrep::yor_matrix(&b.lambda, sigma);
            for r in 0..b.mult {
                let o = b.offset + r * b.dim;
                want.view_mut((o, o), (b.dim, b.dim)).copy_from(&y);
            }
        }
        Ok(la::max_abs_real(&(got - want)))
    }
}

/// First columns of `yor(λ, σ)` for every σ, by breadth-first search over
/// `σ ↦ s_k ∘ σ`.
fn first_columns(lambda: &Partition) -> HashMap<Perm, Vec<f64>> {
    let t = tableaux(lambda);
    let m = lambda.n();
    let dim = t.dim();
    let mut e1 = vec![0.0; dim];
    e1[0] = 1.0;
    let mut out = HashMap::new();
    out.insert(Perm::identity(m), e1);
    let mut frontier = vec![Perm::identity(m)];
    while !frontier.is_empty() {
        let mut next = Vec::new();
        for tau in &frontier {
            let col = out[tau].clone();
            for k in 0..m.saturating_sub(1) {
                let s = Perm::transposition(m, k, k + 1).compose(tau);
                if out.contains_key(&s) {
                    continue;
                }
                let adj = t.adjacent(k);
                let new: Vec<f64> = adj
                    .iter()
                    .enumerate()
                    .map(|(row, &(diag, off))| {
                        diag * col[row] + off.map_or(0.0, |(p, w)| w * col[p])
                    })
                    .collect();
                out.insert(s.clone(), new);
                next.push(s);
            }
        }
        frontier = next;
    }
    out
}

fn factorial(m: usize) -> f64 {
    (1..=m).map(|k| k as f64).product()
}

/// Kets `E_{j1} v_r` for one irrep, as columns ordered `(r, j)`.
fn build_block(
    m: usize,
    d: usize,
    lambda: &Partition,
    perms: &[(Perm, PermutationOperator)],
    seed: u64,
) -> Result<DMatrix<f64>> {
    let dim_total = pow(d, m)?;
    let dl = specht(lambda)?;
    let ml = weyl(lambda, d)?;
    let cols = first_columns(lambda);
    let norm = dl as f64 / factorial(m);

    // E_11 = (d_λ/m!) Σ yor(σ)_{11} V(σ)
    let mut e11 = DMatrix::<f64>::zeros(dim_total, dim_total);
    for (sigma, v) in perms {
        let w = cols[sigma][0];
        if w == 0.0 {
            continue;
        }
        for i in 0..dim_total {
            e11[(v.image(i), i)] += norm * w;
        }
    }
    let basis = la::pivoted_gram_schmidt(
        &CMat::zeros(dim_total, 0),
        &la::to_complex(&e11),
        dim_total,
        1e-9 * e11.diagonal().max().max(1e-300).sqrt(),
    );
    if basis.ncols() != ml {
        return Err(PbtError::Rank {
            what: format!("range of E_11 for {lambda}"),
            expected: ml,
            found: basis.ncols(),
        });
    }
    let mut v = DMatrix::<f64>::from_fn(dim_total, ml, |i, r| basis[(i, r)].re);
    for r in 0..ml {
        let mut col: Vec<la::C64> = v.column(r).iter().map(|&x| la::c(x)).collect();
        la::fix_phase(&mut col, 1e-12);
        for (i, z) in col.iter().enumerate() {
            v[(i, r)] = z.re;
        }
    }
    if seed != 0 && ml > 1 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ (ml as u64).wrapping_mul(0x9e37_79b9));
        let q = la::haar_orthogonal(ml, &mut rng);
        v = v * q;
    }

    // column (r, j) = E_{j1} v_r = (d_λ/m!) Σ_σ yor(σ)_{j1} V(σ) v_r
    let mut out = DMatrix::<f64>::zeros(dim_total, ml * dl);
    for (sigma, op) in perms {
        let y = &cols[sigma];
        for r in 0..ml {
            let moved = op.apply(v.column(r).as_slice());
            for (j, &w) in y.iter().enumerate() {
                if w == 0.0 {
                    continue;
                }
                let mut col = out.column_mut(r * dl + j);
                for (i, &x) in moved.iter().enumerate() {
                    col[i] += norm * w * x;
                }
            }
        }
    }
    Ok(out)
}

/// Builds the Schur transform on `m` qudits. `seed = 0` gives the canonical
/// multiplicity bases; any other seed applies a seeded orthogonal rotation to
/// each multiplicity space.
pub fn build_schur_seeded(m: usize, d: usize, seed: u64) -> Result<SchurTransform> {
    if d == 0 {
        return invalid("local dimension must be positive");
    }
    let dim = pow(d, m)?;
    guard("Schur transform", dim)?;
    let lambdas = enumerate_partitions(m, d);
    let perms: Vec<(Perm, PermutationOperator)> = Perm::all(m)
        .into_iter()
        .map(|s| {
            let op = PermutationOperator::new(m, d, &s)?;
            Ok((s, op))
        })
        .collect::<Result<_>>()?;
    let kets: Vec<DMatrix<f64>> = lambdas
        .par_iter()
        .map(|l| build_block(m, d, l, &perms, seed))
        .collect::<Result<_>>()?;

    let mut real = DMatrix::<f64>::zeros(dim, dim);
    let mut index = Vec::with_capacity(dim);
    let mut blocks = Vec::new();
    let mut row = 0;
    for (l, k) in lambdas.iter().zip(&kets) {
        let dl = specht(l)?;
        let ml = weyl(l, d)?;
        blocks.push(SchurBlock {
            lambda: l.clone(),
            offset: row,
            mult: ml,
            dim: dl,
        });
        for r in 0..ml {
            for j in 0..dl {
                real.row_mut(row).copy_from(&k.column(r * dl + j).transpose());
                index.push(SchurLabel {
                    lambda: l.clone(),
                    r,
                    path: j,
                });
                row += 1;
            }
        }
    }
    if row != dim {
        return Err(PbtError::Rank {
            what: format!("Schur transform on {m} qudits of dimension {d}"),
            expected: dim,
            found: row,
        });
    }
    Ok(SchurTransform {
        m,
        d,
        seed,
        real,
        index,
        blocks,
    })
}

pub fn build_schur(m: usize, d: usize) -> Result<SchurTransform> {
    build_schur_seeded(m, d, 0)
}

type SchurKey = (usize, usize, u64);
static SCHUR_CACHE: Lazy<RwLock<HashMap<SchurKey, Arc<SchurTransform>>>> = Lazy::new(Default::default);

/// Memoized [`build_schur_seeded`].
pub fn schur_cached(m: usize, d: usize, seed: u64) -> Result<Arc<SchurTransform>> {
    if let Some(t) = SCHUR_CACHE.read().get(&(m, d, seed)) {
        return Ok(t.clone());
    }
    let t = Arc::new(build_schur_seeded(m, d, seed)?);
    Ok(SCHUR_CACHE.write().entry((m, d, seed)).or_insert(t).clone())
}

/// Rows of copy `r_nu` of `ν` whose tableau path passes through `α`
/// (`d_α × d^m`).
pub fn submatrix_u_nu_alpha(
    t: &SchurTransform,
    nu: &Partition,
    alpha: &Partition,
    r_nu: usize,
) -> Result<DMatrix<f64>> {
    let b = t
        .block(nu)
        .ok_or_else(|| PbtError::InvalidArgument(format!("{nu} does not occur in the transform")))?;
    if r_nu >= b.mult {
        return invalid(format!("copy {r_nu} out of range for {nu} (multiplicity {})", b.mult));
    }
    let (o, l) = tableaux(nu).block(alpha)?;
    let start = b.offset + r_nu * b.dim + o;
    Ok(t.real.rows(start, l).into_owned())
}

/// All rows of copy `r_ν` for every `ν = α + □` of height at most `d`,
/// stacked in child order (`D_α × d^m`).
pub fn submatrix_u_alpha(
    t: &SchurTransform,
    alpha: &Partition,
    r_nu: &dyn Fn(&Partition) -> usize,
) -> Result<DMatrix<f64>> {
    let add = crate::young::add_box(alpha, t.d);
    let mut rows: Vec<DMatrix<f64>> = Vec::new();
    for nu in &add.children {
        let b = t
            .block(nu)
            .ok_or_else(|| PbtError::InvalidArgument(format!("{nu} does not occur in the transform")))?;
        let r = r_nu(nu);
        if r >= b.mult {
            return invalid(format!("copy {r} out of range for {nu}"));
        }
        rows.push(t.real.rows(b.offset + r * b.dim, b.dim).into_owned());
    }
    let total: usize = rows.iter().map(|r| r.nrows()).sum();
    let mut out = DMatrix::<f64>::zeros(total, t.dim());
    let mut at = 0;
    for r in rows {
        out.rows_mut(at, r.nrows()).copy_from(&r);
        at += r.nrows();
    }
    Ok(out)
}
