//! Irreps of the partially transposed permutation algebra on `H_M`: spanning
//! vectors, Gram spectra, the orthonormal `|f⟩` basis and the matrix elements
//! of `η`, `V(σ)^{t_n}`, `Π̃_i` and `√Π̃_i` in that basis.
//!
//! Everything here is real: the Schur transforms are real and the spanning
//! vectors are built from `|φ₊⟩` and permutations.

use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{check, invalid, PbtError, Result};
use crate::la;
use crate::schur::{self, schur_cached, PermutationOperator};
use crate::symrep::{tableaux, yor_matrix, Perm};
use crate::young::{add_box, enumerate_partitions, specht, weyl, Partition};

pub type RMat = DMatrix<f64>;

/// Dimension bookkeeping for one `α ⊢ n-2`.
#[derive(Clone, Debug, Serialize)]
pub struct AlphaInfo {
    pub n: usize,
    pub d: usize,
    pub alpha: Partition,
    pub d_alpha: usize,
    pub m_alpha: usize,
    /// `ν = α + □` of height at most `d`, in `add_box` order.
    pub children: Vec<Partition>,
    pub d_nu: Vec<usize>,
    pub m_nu: Vec<usize>,
    /// `λ_ν(α) = (n-1) m_ν d_α / (m_α d_ν)`.
    pub lambda: Vec<f64>,
    pub theta: Option<Partition>,
    pub d_theta: usize,
    /// `D_α = Σ d_ν`.
    pub big_d: usize,
}

impl AlphaInfo {
    pub fn new(n: usize, d: usize, alpha: &Partition) -> Result<Self> {
        if n < 2 {
            return invalid(format!("need n >= 2, got {n}"));
        }
        if d == 0 {
            return invalid("local dimension must be positive");
        }
        if alpha.n() != n - 2 || alpha.height() > d {
            return invalid(format!("{alpha} is not a partition of {} with height <= {d}", n - 2));
        }
        let add = add_box(alpha, d);
        let d_alpha = specht(alpha)?;
        let m_alpha = weyl(alpha, d)?;
        let d_nu = add.children.iter().map(specht).collect::<Result<Vec<_>>>()?;
        let m_nu = add.children.iter().map(|nu| weyl(nu, d)).collect::<Result<Vec<_>>>()?;
        let lambda = d_nu
            .iter()
            .zip(&m_nu)
            .map(|(&dn, &mn)| (n - 1) as f64 * mn as f64 * d_alpha as f64 / (m_alpha as f64 * dn as f64))
            .collect();
        let d_theta = match &add.theta {
            Some(t) => specht(t)?,
            None => 0,
        };
        Ok(AlphaInfo {
            n,
            d,
            alpha: alpha.clone(),
            d_alpha,
            m_alpha,
            big_d: d_nu.iter().sum(),
            children: add.children,
            d_nu,
            m_nu,
            lambda,
            theta: add.theta,
            d_theta,
        })
    }

    /// Eigenvalue ratio `1 - d_θ / ((n-1) d_α)` of the pseudoprojectors.
    pub fn pseudo_scale(&self) -> f64 {
        1.0 - self.d_theta as f64 / ((self.n - 1) * self.d_alpha) as f64
    }

    /// Row offset of each `ν` inside the `D_α` block.
    pub fn offsets(&self) -> Vec<usize> {
        let mut o = Vec::with_capacity(self.d_nu.len());
        let mut at = 0;
        for &dn in &self.d_nu {
            o.push(at);
            at += dn;
        }
        o
    }

    /// `λ_ν` repeated `d_ν` times.
    pub fn lambda_diag(&self) -> Vec<f64> {
        self.lambda
            .iter()
            .zip(&self.d_nu)
            .flat_map(|(&l, &dn)| std::iter::repeat_n(l, dn))
            .collect()
    }
}

/// All `α ⊢ n-2` of height at most `d`.
pub fn alphas(n: usize, d: usize) -> Vec<Partition> {
    enumerate_partitions(n.saturating_sub(2), d)
}

/// `π_k = (k n-1)` on `n-1` points, `k` 1-based; `π_{n-1}` is the identity.
pub fn pi_k(n: usize, k: usize) -> Perm {
    Perm::transposition(n - 1, k - 1, n - 2)
}

/// `B_ν(k)`: the `α` rows of `yor(ν, π_k)` (`d_α × d_ν`).
pub fn b_block(n: usize, nu: &Partition, alpha: &Partition, k: usize) -> Result<RMat> {
    let (o, l) = tableaux(nu).block(alpha)?;
    let y = yor_matrix(nu, &pi_k(n, k));
    Ok(y.rows(o, l).into_owned())
}

fn pow(d: usize, m: usize) -> Result<usize> {
    d.checked_pow(m as u32)
        .ok_or_else(|| PbtError::Overflow(format!("{d}^{m}")))
}

/// Columns `|ψ^k_{k_α}(α, r)⟩ = √d V(π_k) |r, α, k_α⟩ |φ₊⟩`, `k` outer.
pub fn psi_vectors_seeded(n: usize, d: usize, alpha: &Partition, r: usize, seed: u64) -> Result<RMat> {
    let info = AlphaInfo::new(n, d, alpha)?;
    if r >= info.m_alpha {
        return invalid(format!("copy {r} out of range for {alpha} (multiplicity {})", info.m_alpha));
    }
    let dim = pow(d, n)?;
    schur::guard("spanning vectors", dim)?;
    let sch = schur_cached(n - 2, d, seed)?;
    let base = RMat::from_fn(dim, info.d_alpha, |idx, ka| {
        let (e, a, b) = (idx / (d * d), (idx / d) % d, idx % d);
        if a != b {
            return 0.0;
        }
        let row = sch.row_of(alpha, r, ka).unwrap();
        sch.real[(row, e)]
    });
    let mut psi = RMat::zeros(dim, (n - 1) * info.d_alpha);
    for k in 1..n {
        let v = PermutationOperator::new(n, d, &pi_k(n, k).extend(n))?;
        for ka in 0..info.d_alpha {
            let moved = v.apply(base.column(ka).as_slice());
            psi.column_mut((k - 1) * info.d_alpha + ka)
                .copy_from_slice(&moved);
        }
    }
    Ok(psi)
}

pub fn psi_vectors(n: usize, d: usize, alpha: &Partition, r: usize) -> Result<RMat> {
    psi_vectors_seeded(n, d, alpha, r, 0)
}

#[derive(Clone, Debug, Serialize)]
pub struct GramSpectrum {
    pub alpha: Partition,
    /// `(ν, λ_ν(α), d_ν)` from the closed form.
    pub closed: Vec<(Partition, f64, usize)>,
    /// Numerically diagonalized spectrum of `ψ†ψ`, ascending.
    pub numeric: Vec<f64>,
    pub residual: f64,
}

/// Closed-form `λ_ν(α)` checked against the spectrum of the Gram matrix.
pub fn gram_spectrum_seeded(n: usize, d: usize, alpha: &Partition, seed: u64) -> Result<GramSpectrum> {
    let info = AlphaInfo::new(n, d, alpha)?;
    let psi = psi_vectors_seeded(n, d, alpha, 0, seed)?;
    let gram = psi.transpose() * &psi;
    let mut numeric: Vec<f64> = gram.symmetric_eigen().eigenvalues.iter().copied().collect();
    numeric.sort_by(f64::total_cmp);
    let mut expect: Vec<f64> = info.lambda_diag();
    expect.extend(std::iter::repeat_n(0.0, info.d_theta));
    expect.sort_by(f64::total_cmp);
    if expect.len() != numeric.len() {
        return Err(PbtError::Rank {
            what: format!("Gram matrix for {alpha}"),
            expected: expect.len(),
            found: numeric.len(),
        });
    }
    let residual = expect
        .iter()
        .zip(&numeric)
        .fold(0.0f64, |acc, (a, b)| acc.max((a - b).abs()));
    check(format!("Gram spectrum for α = {alpha}"), residual, 1e-8)?;
    Ok(GramSpectrum {
        alpha: alpha.clone(),
        closed: info
            .children
            .iter()
            .zip(&info.lambda)
            .zip(&info.d_nu)
            .map(|((nu, &l), &dn)| (nu.clone(), l, dn))
            .collect(),
        numeric,
        residual,
    })
}

pub fn gram_spectrum(n: usize, d: usize, alpha: &Partition) -> Result<GramSpectrum> {
    gram_spectrum_seeded(n, d, alpha, 0)
}

/// Blocks `z̃(α)^k` (`d_α × D_α`), `k = 1..n-1`, with entries
/// `[(n-1)d_α]^{-1/2} √(d_ν/λ_ν) B_ν(k)`.
pub fn z_matrix(n: usize, d: usize, alpha: &Partition) -> Result<Vec<RMat>> {
    let info = AlphaInfo::new(n, d, alpha)?;
    let offs = info.offsets();
    let pre = 1.0 / (((n - 1) * info.d_alpha) as f64).sqrt();
    (1..n)
        .map(|k| {
            let mut z = RMat::zeros(info.d_alpha, info.big_d);
            for (v, nu) in info.children.iter().enumerate() {
                let b = b_block(n, nu, alpha, k)?;
                let s = pre * (info.d_nu[v] as f64 / info.lambda[v]).sqrt();
                z.columns_mut(offs[v], info.d_nu[v]).copy_from(&(b * s));
            }
            Ok(z)
        })
        .collect()
}

/// Stacked `z̃(α)` (`(n-1)d_α × D_α`), rows ordered `(k, k_α)`.
pub fn z_stacked(n: usize, d: usize, alpha: &Partition) -> Result<RMat> {
    let blocks = z_matrix(n, d, alpha)?;
    let rows: usize = blocks.iter().map(|b| b.nrows()).sum();
    let cols = blocks.first().map_or(0, |b| b.ncols());
    let mut z = RMat::zeros(rows, cols);
    let mut at = 0;
    for b in blocks {
        z.rows_mut(at, b.nrows()).copy_from(&b);
        at += b.nrows();
    }
    Ok(z)
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct NuLabel {
    pub nu: Partition,
    pub xi: Partition,
    pub j: usize,
}

fn nu_labels(info: &AlphaInfo) -> Vec<NuLabel> {
    let mut out = Vec::with_capacity(info.big_d);
    for nu in &info.children {
        let t = tableaux(nu);
        for (xi, _, len) in &t.blocks {
            for j in 0..*len {
                out.push(NuLabel {
                    nu: nu.clone(),
                    xi: xi.clone(),
                    j,
                });
            }
        }
    }
    out
}

#[derive(Clone, Debug)]
pub struct IrrepBlock {
    pub info: AlphaInfo,
    pub r: usize,
    pub psi: RMat,
    /// Orthonormal columns `|f^{ξ_ν}_{j}(α, r)⟩`, ordered `(ν, ξ_ν, j)`.
    pub f: RMat,
    pub nu_index: Vec<NuLabel>,
}

impl IrrepBlock {
    pub fn alpha(&self) -> &Partition {
        &self.info.alpha
    }

    /// `U_twSch(α, r) = f†`.
    pub fn u_tw(&self) -> RMat {
        self.f.transpose()
    }
}

pub fn f_basis_seeded(n: usize, d: usize, alpha: &Partition, r: usize, seed: u64) -> Result<IrrepBlock> {
    let info = AlphaInfo::new(n, d, alpha)?;
    let psi = psi_vectors_seeded(n, d, alpha, r, seed)?;
    let z = z_stacked(n, d, alpha)?;
    let f = &psi * &z;
    let ortho = la::max_abs_real(&(f.transpose() * &f - RMat::identity(info.big_d, info.big_d)));
    check(format!("|f> orthonormality for α = {alpha}"), ortho, 1e-9)?;
    Ok(IrrepBlock {
        nu_index: nu_labels(&info),
        info,
        r,
        psi,
        f,
    })
}

pub fn f_basis(n: usize, d: usize, alpha: &Partition, r: usize) -> Result<IrrepBlock> {
    f_basis_seeded(n, d, alpha, r, 0)
}

/// `⊕_ν yor(ν, σ)` for `σ ∈ S(n-1)`.
pub fn nu_sum(info: &AlphaInfo, sigma: &Perm) -> RMat {
    let offs = info.offsets();
    let mut m = RMat::zeros(info.big_d, info.big_d);
    for (v, nu) in info.children.iter().enumerate() {
        let y = yor_matrix(nu, sigma);
        m.view_mut((offs[v], offs[v]), (info.d_nu[v], info.d_nu[v]))
            .copy_from(&y);
    }
    m
}

/// Stacks `scale(ν) · B_ν(k)ᵀ` over `ν` (`D_α × d_α`).
fn stacked_bt(info: &AlphaInfo, k: usize, scale: impl Fn(usize) -> f64) -> Result<RMat> {
    let offs = info.offsets();
    let mut g = RMat::zeros(info.big_d, info.d_alpha);
    for (v, nu) in info.children.iter().enumerate() {
        let b = b_block(info.n, nu, &info.alpha, k)?;
        g.rows_mut(offs[v], info.d_nu[v])
            .copy_from(&(b.transpose() * scale(v)));
    }
    Ok(g)
}

/// Matrix of `V(σ)` (or `V(σ)^{t_n}`) in the `|f⟩` basis of `α`.
pub fn mf_generator(n: usize, d: usize, alpha: &Partition, sigma: &Perm, transposed: bool) -> Result<RMat> {
    let info = AlphaInfo::new(n, d, alpha)?;
    if sigma.len() != n {
        return invalid(format!("permutation on {} points, expected {n}", sigma.len()));
    }
    let i = sigma.inverse().apply(n - 1);
    if i == n - 1 {
        let restricted = Perm::from_images(sigma.images()[..n - 1].to_vec())?;
        return Ok(nu_sum(&info, &restricted));
    }
    if !transposed {
        return invalid("V(σ) with σ moving the last point does not preserve H_M; use the transposed form");
    }
    // σ = σ' (i n) with σ' fixing n
    let sigma_p = sigma.compose(&Perm::transposition(n, i, n - 1));
    let restricted = Perm::from_images(sigma_p.images()[..n - 1].to_vec())?;
    let g = stacked_bt(&info, i + 1, |v| (info.d_nu[v] as f64 * info.lambda[v]).sqrt())?;
    let gen = &g * g.transpose() / ((n - 1) * info.d_alpha) as f64;
    Ok(nu_sum(&info, &restricted) * gen)
}

/// `diag(λ_ν)`: the matrix of `η = Σ_i V[(i n)]^{t_n}` on the block.
pub fn mf_rho(n: usize, d: usize, alpha: &Partition) -> Result<RMat> {
    let info = AlphaInfo::new(n, d, alpha)?;
    Ok(RMat::from_diagonal(&nalgebra::DVector::from_vec(info.lambda_diag())))
}

/// `M_f[Π̃_i] = H Hᵀ / ((n-1) d_α)` with `H` stacking `√d_ν B_ν(i)ᵀ`.
pub fn mf_pi(n: usize, d: usize, alpha: &Partition, i: usize) -> Result<RMat> {
    let info = AlphaInfo::new(n, d, alpha)?;
    if i == 0 || i >= n {
        return invalid(format!("port {i} outside 1..={}", n - 1));
    }
    let h = stacked_bt(&info, i, |v| (info.d_nu[v] as f64).sqrt())?;
    let m = &h * h.transpose() / ((n - 1) * info.d_alpha) as f64;
    let c = info.pseudo_scale();
    let resid = la::max_abs_real(&(&m * &m - &m * c));
    check(format!("pseudoprojector identity for α = {alpha}, i = {i}"), resid, 1e-8)?;
    Ok(m)
}

/// `M_f[√Π̃_i] = M_f[Π̃_i] / √(1 - d_θ/((n-1)d_α))`.
pub fn mf_sqrt_pi(n: usize, d: usize, alpha: &Partition, i: usize) -> Result<RMat> {
    let info = AlphaInfo::new(n, d, alpha)?;
    Ok(mf_pi(n, d, alpha, i)? / info.pseudo_scale().sqrt())
}

/// The factorized form `Σ_ν √d_ν U_α V(π_i) U†_{ν,α}` of `H`, built from the
/// `(n-1)`-qudit Schur transform; returns `H Hᵀ / ((n-1)d_α √c)`.
pub fn mf_sqrt_pi_factored(n: usize, d: usize, alpha: &Partition, i: usize, seed: u64) -> Result<RMat> {
    let info = AlphaInfo::new(n, d, alpha)?;
    let sch = schur_cached(n - 1, d, seed)?;
    let u_alpha = schur::submatrix_u_alpha(&sch, alpha, &|_| 0)?;
    let v = PermutationOperator::new(n - 1, d, &pi_k(n, i))?;
    let mut h = RMat::zeros(info.big_d, info.d_alpha);
    for (idx, nu) in info.children.iter().enumerate() {
        let u_na = schur::submatrix_u_nu_alpha(&sch, nu, alpha, 0)?;
        // V(π_i) U†_{ν,α}: permute the rows of U†
        let ut = u_na.transpose();
        let mut vut = RMat::zeros(ut.nrows(), ut.ncols());
        for row in 0..ut.nrows() {
            vut.row_mut(v.image(row)).copy_from(&ut.row(row));
        }
        h += (&u_alpha * vut) * (info.d_nu[idx] as f64).sqrt();
    }
    let m = &h * h.transpose() / ((n - 1) * info.d_alpha) as f64;
    Ok(m / info.pseudo_scale().sqrt())
}

/// `U_twSch(α, r)` (`D_α × d^n`), checked against the factored form
/// `Σ_k Σ_ν c_ν U_α V(π_k) U†_{ν,α} Φ(α, r) V_L(π_k)`.
pub fn twisted_schur_block_seeded(n: usize, d: usize, alpha: &Partition, r: usize, seed: u64) -> Result<RMat> {
    let block = f_basis_seeded(n, d, alpha, r, seed)?;
    let direct = block.u_tw();
    let factored = twisted_factored(&block, seed)?;
    let resid = la::max_abs_real(&(&direct - factored));
    check(format!("factored twisted Schur block for α = {alpha}"), resid, 1e-10)?;
    Ok(direct)
}

pub fn twisted_schur_block(n: usize, d: usize, alpha: &Partition, r: usize) -> Result<RMat> {
    twisted_schur_block_seeded(n, d, alpha, r, 0)
}

/// `Φ(α, r) = ⟨r, α, ·|^{(n-2)} ⊗ ⟨φ₊|` as a `d_α × d^n` matrix.
pub fn phi_matrix(n: usize, d: usize, alpha: &Partition, r: usize, seed: u64) -> Result<RMat> {
    let info = AlphaInfo::new(n, d, alpha)?;
    let sch = schur_cached(n - 2, d, seed)?;
    let dim = pow(d, n)?;
    let s = 1.0 / (d as f64).sqrt();
    Ok(RMat::from_fn(info.d_alpha, dim, |ka, idx| {
        let (e, a, b) = (idx / (d * d), (idx / d) % d, idx % d);
        if a != b {
            return 0.0;
        }
        sch.real[(sch.row_of(alpha, r, ka).unwrap(), e)] * s
    }))
}

fn twisted_factored(block: &IrrepBlock, seed: u64) -> Result<RMat> {
    let info = &block.info;
    let (n, d) = (info.n, info.d);
    let alpha = &info.alpha;
    let sch = schur_cached(n - 1, d, seed)?;
    let u_alpha = schur::submatrix_u_alpha(&sch, alpha, &|_| 0)?;
    let phi = phi_matrix(n, d, alpha, block.r, seed)?;
    let pre = (d as f64).sqrt() / (((n - 1) * info.d_alpha) as f64).sqrt();
    let mut out = RMat::zeros(info.big_d, phi.ncols());
    for k in 1..n {
        let vk = PermutationOperator::new(n - 1, d, &pi_k(n, k))?;
        let vl = PermutationOperator::new(n, d, &pi_k(n, k).extend(n))?;
        // Φ V_L(π_k): permute the columns of Φ
        let mut phi_v = RMat::zeros(phi.nrows(), phi.ncols());
        for col in 0..phi.ncols() {
            phi_v.column_mut(col).copy_from(&phi.column(vl.image(col)));
        }
        let mut inner = RMat::zeros(info.big_d, info.d_alpha);
        for (v, nu) in info.children.iter().enumerate() {
            let ut = schur::submatrix_u_nu_alpha(&sch, nu, alpha, 0)?.transpose();
            let mut vut = RMat::zeros(ut.nrows(), ut.ncols());
            for row in 0..ut.nrows() {
                vut.row_mut(vk.image(row)).copy_from(&ut.row(row));
            }
            let c = pre * (info.d_nu[v] as f64 / info.lambda[v]).sqrt();
            inner += (&u_alpha * vut) * c;
        }
        out += inner * phi_v;
    }
    Ok(out)
}

/// All `(α, r)` blocks for `(n, d)`.
#[derive(Clone, Debug)]
pub struct TwistedSchur {
    pub n: usize,
    pub d: usize,
    pub seed: u64,
    pub blocks: Vec<IrrepBlock>,
}

impl TwistedSchur {
    pub fn build_seeded(n: usize, d: usize, seed: u64) -> Result<Self> {
        let mut jobs = Vec::new();
        for a in alphas(n, d) {
            let m = weyl(&a, d)?;
            for r in 0..m {
                jobs.push((a.clone(), r));
            }
        }
        let blocks = jobs
            .par_iter()
            .map(|(a, r)| f_basis_seeded(n, d, a, *r, seed))
            .collect::<Result<Vec<_>>>()?;
        Ok(TwistedSchur { n, d, seed, blocks })
    }

    pub fn build(n: usize, d: usize) -> Result<Self> {
        Self::build_seeded(n, d, 0)
    }

    pub fn dim(&self) -> usize {
        self.d.pow(self.n as u32)
    }

    /// `dim H_M = Σ_α m_α D_α`.
    pub fn hm_dim(&self) -> usize {
        self.blocks.iter().map(|b| b.info.big_d).sum()
    }

    pub fn hm_projector(&self) -> RMat {
        let mut p = RMat::zeros(self.dim(), self.dim());
        for b in &self.blocks {
            p += &b.f * b.f.transpose();
        }
        p
    }

    /// `Σ_{α,r} U_twSch† · M(α) · U_twSch` for a per-α block matrix.
    pub fn reconstruct(&self, mut mf: impl FnMut(&AlphaInfo) -> Result<RMat>) -> Result<RMat> {
        let mut out = RMat::zeros(self.dim(), self.dim());
        for b in &self.blocks {
            let m = mf(&b.info)?;
            out += &b.f * m * b.f.transpose();
        }
        Ok(out)
    }

    /// `√Π̃_i` assembled from the blocks.
    pub fn sqrt_pi_tilde(&self, i: usize) -> Result<RMat> {
        let (n, d) = (self.n, self.d);
        self.reconstruct(|info| mf_sqrt_pi(n, d, &info.alpha, i))
    }

    /// Kraus operator `√Π_i = √Π̃_i + (I - P_{H_M})/√(n-1)`.
    pub fn kraus(&self, i: usize) -> Result<RMat> {
        let dim = self.dim();
        let p = self.hm_projector();
        let delta = (RMat::identity(dim, dim) - p) / ((self.n - 1) as f64).sqrt();
        Ok(self.sqrt_pi_tilde(i)? + delta)
    }
}
