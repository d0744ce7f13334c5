//! The register layout and every constituent of `U^c(i)`.
//!
//! Kraus-level registers, most significant first:
//!
//! | name | role |
//! |------|------|
//! | `A4` | selects `√Π̃` terms, `√Δ` terms or identity |
//! | `KL`, `KR` | port indices `k_l`, `k_r` |
//! | `A11`, `A12` | flags marking `(n-1, n)` qudits away from `|00⟩` |
//! | `A13` | with `Q1`, `Q2`: two copies of the `(r_ν, ν)` ancilla |
//! | `A2`, `A3` | flags of the two `Φ` encodings |
//! | `GL`, `GR` | optional `α` guards |
//! | `W` | padding and qudits `1..n-2`, or the `(r, α, k_α)` labels |
//! | `Q1`, `Q2` | qudits `n-1` and `n` |
//!
//! `W` carries two readings of one basis. Physically `w = pad·q^{n-2} + x`
//! with `x` the base-`q` digits of the first `n-2` qudits. After the Schur
//! transform `w = (r·n_α + α)·n_{d_α} + k_α`. The three registers `A13, Q1, Q2`
//! form one index `g` below `A13·q²`; for `g < n_0²`, with `n_0 = n_{r_ν} n_ν`,
//! the left copy is `g / n_0` and the right copy `g % n_0`.

use std::collections::HashMap;
use std::sync::Arc;

use parking_lot::Mutex;
use rayon::prelude::*;
use serde::Serialize;

use super::circuit::{Circuit, Gate, Layout, SparseOp};
use super::{coefficients_of, product, Ancilla, BlockEncoding, LedgerRow};
use crate::error::{check, invalid, PbtError, Result};
use crate::la::{self, CMat, C64, ONE, ZERO};
use crate::schur::{self, schur_cached, PermutationOperator, SchurTransform};
use crate::symrep::{tableaux, Perm};
use crate::twisted::{pi_k, AlphaInfo, TwistedSchur};
use crate::young::{ceil_pow2, enumerate_partitions, weyl};
use crate::Partition;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum Padding {
    /// Exact register dimensions.
    Tight,
    /// Every register rounded up to a power of two.
    Padded,
}

/// Which copy `r_ν` of each `ν` the coefficient injection uses.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum CopyChoice {
    First,
    /// `r_ν = min(1, m_ν - 1)`; collides with the `|1,0⟩`, `|1,1⟩` states of `P_L`, `P_R`.
    Second,
}

/// Coefficients `C` (for `√Π̃`) or `C'` (for `√Δ`).
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize)]
pub enum Variant {
    Pi,
    Delta,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
enum Side {
    Left,
    Right,
}

#[derive(Clone, Debug)]
pub struct Options {
    /// Defaults to `√d`.
    pub x: Option<f64>,
    /// Defaults to `√d`.
    pub x_prime: Option<f64>,
    pub padding: Padding,
    pub seed: u64,
    pub copy: CopyChoice,
    /// Post-select the `α` label as unchanged inside each `O` encoding.
    pub alpha_guard: bool,
    /// Declared error of each leaf encoding and of each completed row.
    pub leaf_tol: f64,
}

impl Default for Options {
    fn default() -> Self {
        Options {
            x: None,
            x_prime: None,
            padding: Padding::Tight,
            seed: 0,
            copy: CopyChoice::First,
            alpha_guard: false,
            leaf_tol: 1e-10,
        }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct Dims {
    pub n: usize,
    pub d: usize,
    /// Qudit register dimension.
    pub q: usize,
    pub n_r: usize,
    pub n_alpha: usize,
    pub n_dalpha: usize,
    pub n_rnu: usize,
    pub n_nu: usize,
    /// `n_{r_ν} n_ν`.
    pub anc0: usize,
    pub a13: usize,
    pub w: usize,
    /// Number of `q^{n-2}` slices in `W`.
    pub pad: usize,
    /// Dimension of `KL`, `KR` and the port register.
    pub k: usize,
}

/// First rows and completed matrices of the injection unitaries on the
/// `(r_ν, ν, α, k_α)` space.
#[derive(Clone, Debug)]
pub struct PMatrices {
    pub p1: CMat,
    pub p2: CMat,
    pub pl: CMat,
    pub pr: CMat,
    /// Per `α`: the basis `[(0,e_ν)…, (1,0), (1,1)]` of the mixing block and
    /// the first rows of `P_L`, `P_R` on it.
    pub rows: Vec<(Vec<(usize, usize)>, Vec<f64>, Vec<f64>)>,
    /// Number of `ν` whose chosen copy lands on `(1,0)` or `(1,1)`.
    pub collisions: usize,
}

/// `U^c(i)` with its ledger.
#[derive(Clone, Debug)]
pub struct KrausEncoding {
    pub i: usize,
    pub encoding: BlockEncoding,
    pub ledger: Vec<LedgerRow>,
}

type OKey = (Variant, usize, usize, Side);

pub struct Encoder {
    pub n: usize,
    pub d: usize,
    pub x: f64,
    pub x_prime: f64,
    pub opts: Options,
    pub dims: Dims,
    pub layout: Arc<Layout>,
    alphas: Vec<Partition>,
    infos: Vec<AlphaInfo>,
    nus: Vec<Partition>,
    s1: Arc<SchurTransform>,
    s2: Arc<SchurTransform>,
    /// Schur(n-1) row → index in the `(r_ν, ν, α, k_α)` space.
    l_of_row: Vec<usize>,
    /// Schur(n-2) row → label value of `W`.
    w_of_row: Vec<usize>,
    phys: Vec<usize>,
    labels: Vec<usize>,
    labels_q: Vec<usize>,
    o_cache: Mutex<HashMap<OKey, Arc<BlockEncoding>>>,
}

fn pow(b: usize, e: usize) -> Result<usize> {
    b.checked_pow(e as u32)
        .ok_or_else(|| PbtError::Overflow(format!("{b}^{e}")))
}

fn kron_size(parts: &[usize]) -> Result<usize> {
    parts.iter().try_fold(1usize, |acc, &p| {
        acc.checked_mul(p)
            .ok_or_else(|| PbtError::Overflow("register sizes".into()))
    })
}

impl Encoder {
    pub fn new(n: usize, d: usize, opts: Options) -> Result<Self> {
        if n < 3 {
            return invalid(format!("block-encodings need n >= 3, got {n}"));
        }
        if d < 2 {
            return invalid(format!("block-encodings need d >= 2, got {d}"));
        }
        let x = opts.x.unwrap_or((d as f64).sqrt());
        let x_prime = opts.x_prime.unwrap_or((d as f64).sqrt());
        if !(x > 0.0 && x_prime > 0.0) {
            return invalid("x and x' must be positive");
        }
        let alphas = enumerate_partitions(n - 2, d);
        let nus = enumerate_partitions(n - 1, d);
        let infos = alphas
            .iter()
            .map(|a| AlphaInfo::new(n, d, a))
            .collect::<Result<Vec<_>>>()?;
        let n_r = infos.iter().map(|i| i.m_alpha).max().unwrap_or(1);
        let n_dalpha = infos.iter().map(|i| i.d_alpha).max().unwrap_or(1);
        let n_rnu = nus.iter().map(|nu| weyl(nu, d)).collect::<Result<Vec<_>>>()?.into_iter().max().unwrap_or(1);
        let round = |v: usize| match opts.padding {
            Padding::Tight => v,
            Padding::Padded => ceil_pow2(v),
        };
        let q = round(d);
        let (n_r, n_alpha, n_dalpha) = (round(n_r), round(alphas.len()), round(n_dalpha));
        // P_L and P_R need the states (1,0) and (1,1)
        let (n_rnu, n_nu) = (round(n_rnu).max(2), round(nus.len()).max(2));
        let anc0 = n_rnu * n_nu;
        let a13 = (anc0 * anc0).div_ceil(q * q);
        let qpow = pow(q, n - 2)?;
        let labels_dim = kron_size(&[n_r, n_alpha, n_dalpha])?;
        let w = labels_dim.max(qpow);
        let k = round(n - 1);
        let dims = Dims {
            n,
            d,
            q,
            n_r,
            n_alpha,
            n_dalpha,
            n_rnu,
            n_nu,
            anc0,
            a13,
            w,
            pad: w / qpow,
            k,
        };
        let mut regs: Vec<(&str, usize)> = vec![
            ("A4", 4),
            ("KL", k),
            ("KR", k),
            ("A11", 2),
            ("A12", 2),
            ("A13", a13),
            ("A2", 2),
            ("A3", 2),
        ];
        if opts.alpha_guard {
            regs.push(("GL", n_alpha));
            regs.push(("GR", n_alpha));
        }
        regs.extend([("W", w), ("Q1", q), ("Q2", q)]);
        let layout = Arc::new(Layout::new(&regs)?);
        schur::guard("Kraus-level register layout", layout.total)?;

        let s1 = schur_cached(n - 1, d, opts.seed)?;
        let s2 = schur_cached(n - 2, d, opts.seed)?;
        let alpha_pos = |p: &Partition| alphas.iter().position(|a| a == p).unwrap();
        let l_of_row = s1
            .index
            .iter()
            .map(|lab| {
                let v = nus.iter().position(|x| x == &lab.lambda).unwrap();
                let tab = tableaux(&lab.lambda);
                let (xi, off, _) = tab
                    .blocks
                    .iter()
                    .find(|(_, o, l)| lab.path >= *o && lab.path < o + l)
                    .unwrap();
                ((lab.r * n_nu + v) * n_alpha + alpha_pos(xi)) * n_dalpha + (lab.path - off)
            })
            .collect();
        let w_of_row: Vec<usize> = s2
            .index
            .iter()
            .map(|lab| (lab.r * n_alpha + alpha_pos(&lab.lambda)) * n_dalpha + lab.path)
            .collect();

        let phys = (0..pow(d, n)?)
            .map(|p| {
                let digits: Vec<usize> = (0..n).map(|j| (p / d.pow((n - 1 - j) as u32)) % d).collect();
                let wv = digits[..n - 2].iter().fold(0, |acc, &x| acc * q + x);
                layout.index(&[("W", wv), ("Q1", digits[n - 2]), ("Q2", digits[n - 1])])
            })
            .collect::<Result<Vec<_>>>()?;
        let labels = w_of_row
            .iter()
            .map(|&wv| layout.index(&[("W", wv)]))
            .collect::<Result<Vec<_>>>()?;
        let mut labels_q = Vec::with_capacity(w_of_row.len() * q * q);
        for &wv in &w_of_row {
            for a in 0..q {
                for b in 0..q {
                    labels_q.push(layout.index(&[("W", wv), ("Q1", a), ("Q2", b)])?);
                }
            }
        }
        Ok(Encoder {
            n,
            d,
            x,
            x_prime,
            opts,
            dims,
            layout,
            alphas,
            infos,
            nus,
            s1,
            s2,
            l_of_row,
            w_of_row,
            phys,
            labels,
            labels_q,
            o_cache: Mutex::new(HashMap::new()),
        })
    }

    /// `α = (n-1)² d x⁴ + (n-1)^{3/2} d x'² + (n-1)^{-1/2}`.
    pub fn alpha_scale(&self) -> f64 {
        let (m, d) = ((self.n - 1) as f64, self.d as f64);
        m * m * d * self.x.powi(4) + m.powf(1.5) * d * self.x_prime.powi(2) + 1.0 / m.sqrt()
    }

    /// `c_{l/r} = [(n-1)^{5/2} d x⁴ + (n-1)² d x'² + 1]^{-1/2}`.
    pub fn c_lr(&self) -> f64 {
        let (m, d) = ((self.n - 1) as f64, self.d as f64);
        (m.powf(2.5) * d * self.x.powi(4) + m * m * d * self.x_prime.powi(2) + 1.0).powf(-0.5)
    }

    /// Flat indices of the physical states of qudits `1..n`, in the order of
    /// the dense `d^n` basis, with every other register at 0.
    pub fn physical_states(&self) -> &[usize] {
        &self.phys
    }

    /// Flat indices of the Schur(n-2) labels on `W`, in Schur row order.
    pub fn label_states(&self) -> &[usize] {
        &self.labels
    }

    pub fn schur_n2(&self) -> &SchurTransform {
        &self.s2
    }

    fn l_dim(&self) -> usize {
        self.dims.anc0 * self.dims.n_alpha * self.dims.n_dalpha
    }

    fn l_index(&self, rn: usize, v: usize, a: usize, j: usize) -> usize {
        let dm = &self.dims;
        ((rn * dm.n_nu + v) * dm.n_alpha + a) * dm.n_dalpha + j
    }

    fn copy_of(&self, v: usize) -> Result<usize> {
        let m = weyl(&self.nus[v], self.d)?;
        Ok(match self.opts.copy {
            CopyChoice::First => 0,
            CopyChoice::Second => 1.min(m - 1),
        })
    }

    fn nu_pos(&self, nu: &Partition) -> usize {
        self.nus.iter().position(|x| x == nu).unwrap()
    }

    /// `U_Sch V(σ) U_Sch†` on the valid labels of the `(r_ν, ν, α, k_α)`
    /// space, identity elsewhere.
    pub fn t_matrix(&self, sigma: &Perm) -> Result<CMat> {
        let v = PermutationOperator::new(self.n - 1, self.d, sigma)?;
        let r = &self.s1.real;
        let rt = r.transpose();
        let mut vrt = rt.clone();
        for i in 0..rt.nrows() {
            vrt.row_mut(v.image(i)).copy_from(&rt.row(i));
        }
        let m = r * vrt;
        let mut t = la::identity(self.l_dim());
        for &la_ in &self.l_of_row {
            t[(la_, la_)] = ZERO;
        }
        for (a, &la_) in self.l_of_row.iter().enumerate() {
            for (b, &lb) in self.l_of_row.iter().enumerate() {
                t[(la_, lb)] = la::c(m[(a, b)]);
            }
        }
        Ok(t)
    }

    /// `P_1`, `P_2`, `P_L[x]`, `P_R[x]` for the chosen coefficient variant.
    pub fn p_matrices(&self, variant: Variant) -> Result<PMatrices> {
        let dm = &self.dims;
        let ld = self.l_dim();
        let scale = match variant {
            Variant::Pi => self.x * self.x,
            Variant::Delta => self.x_prime * self.x_prime,
        };
        let mut p1 = la::identity(ld);
        let mut collisions = 0;
        for v in 0..self.nus.len() {
            let r = self.copy_of(v)?;
            if r == 1 && v <= 1 {
                collisions += 1;
            }
            if r == 0 {
                continue;
            }
            for a in 0..dm.n_alpha {
                for j in 0..dm.n_dalpha {
                    let (x0, x1) = (self.l_index(0, v, a, j), self.l_index(r, v, a, j));
                    p1[(x0, x0)] = ZERO;
                    p1[(x1, x1)] = ZERO;
                    p1[(x0, x1)] = ONE;
                    p1[(x1, x0)] = ONE;
                }
            }
        }
        let mut p2 = la::identity(ld);
        let mut pl = la::identity(ld);
        let mut pr = la::identity(ld);
        let mut rows = Vec::new();
        for (a, info) in self.infos.iter().enumerate() {
            let e1 = self.nu_pos(&info.children[0]);
            if e1 != 0 {
                for j in 0..dm.n_dalpha {
                    let (x0, x1) = (self.l_index(0, 0, a, j), self.l_index(0, e1, a, j));
                    p2[(x0, x0)] = ZERO;
                    p2[(x1, x1)] = ZERO;
                    p2[(x0, x1)] = ONE;
                    p2[(x1, x0)] = ONE;
                }
            }
            let mut basis: Vec<(usize, usize)> = info.children.iter().map(|nu| (0, self.nu_pos(nu))).collect();
            basis.push((1, 0));
            basis.push((1, 1));
            let coef: Vec<f64> = (0..info.children.len())
                .map(|v| {
                    let (c, cp) = coefficients_of(info, v);
                    match variant {
                        Variant::Pi => c,
                        Variant::Delta => cp,
                    }
                })
                .collect();
            let sum: f64 = coef.iter().sum::<f64>() / scale;
            if sum > 1.0 + 1e-12 {
                return invalid(format!(
                    "scale {scale} too small for {}: coefficients sum to {}",
                    info.alpha,
                    sum * scale
                ));
            }
            let rem = (1.0 - sum).max(0.0).sqrt();
            let head: Vec<f64> = coef.iter().map(|c| (c / scale).sqrt()).collect();
            let mut row_l = head.clone();
            row_l.extend([rem, 0.0]);
            let mut row_r = head;
            row_r.extend([0.0, rem]);
            let sub_l = la::unitary_complete(&CMat::from_row_iterator(1, row_l.len(), row_l.iter().map(|&z| la::c(z))))?;
            let sub_r = la::unitary_complete(&CMat::from_row_iterator(1, row_r.len(), row_r.iter().map(|&z| la::c(z))))?;
            for j in 0..dm.n_dalpha {
                let idx: Vec<usize> = basis.iter().map(|&(rn, v)| self.l_index(rn, v, a, j)).collect();
                for (p, &xp) in idx.iter().enumerate() {
                    for (q, &xq) in idx.iter().enumerate() {
                        pl[(xp, xq)] = sub_l[(p, q)];
                        pr[(xp, xq)] = sub_r[(p, q)];
                    }
                }
            }
            rows.push((basis, row_l, row_r));
        }
        Ok(PMatrices {
            p1,
            p2,
            pl,
            pr,
            rows,
            collisions,
        })
    }

    /// `P_2 P_L P_1 T(σ) P_1 P_R† P_2` on the `(r_ν, ν, α, k_α)` space.
    pub fn injection_unitary(&self, variant: Variant, sigma: &Perm) -> Result<CMat> {
        let p = self.p_matrices(variant)?;
        let t = self.t_matrix(sigma)?;
        Ok(&p.p2 * &p.pl * &p.p1 * t * &p.p1 * p.pr.adjoint() * &p.p2)
    }

    /// Dense `O(α, k, i)` (or `O'(α, k_l, k_r)`) from the Schur(n-1) rows of
    /// each child `ν`; one `d_α × d_α` matrix per `α`.
    pub fn o_dense(&self, variant: Variant, k1: usize, k2: usize) -> Result<Vec<CMat>> {
        let sigma = pi_k(self.n, k1).compose(&pi_k(self.n, k2));
        let v = PermutationOperator::new(self.n - 1, self.d, &sigma)?;
        self.infos
            .iter()
            .map(|info| {
                let mut o = CMat::zeros(info.d_alpha, info.d_alpha);
                for (c, nu) in info.children.iter().enumerate() {
                    let u = schur::submatrix_u_nu_alpha(&self.s1, nu, &info.alpha, 0)?;
                    let ut = u.transpose();
                    let mut vut = ut.clone();
                    for r in 0..ut.nrows() {
                        vut.row_mut(v.image(r)).copy_from(&ut.row(r));
                    }
                    let (cc, cp) = coefficients_of(info, c);
                    let coef = match variant {
                        Variant::Pi => cc,
                        Variant::Delta => cp,
                    };
                    o += la::to_complex(&(u * vut)) * la::c(coef);
                }
                Ok(o)
            })
            .collect()
    }

    /// Block-diagonal operator on Schur(n-2) rows: `blocks[α]` on each `(α, r)`.
    fn on_labels(&self, blocks: &[CMat]) -> CMat {
        let lab = &self.s2.index;
        CMat::from_fn(lab.len(), lab.len(), |a, b| {
            let (x, y) = (&lab[a], &lab[b]);
            if x.lambda != y.lambda || x.r != y.r {
                return ZERO;
            }
            let k = self.alphas.iter().position(|p| p == &x.lambda).unwrap();
            blocks[k][(x.path, y.path)]
        })
    }

    /// Lifts an operator on `(r_ν, ν, α, k_α) ⊗ guard` onto `[guard, A13, Q1, Q2, W]`.
    fn lift(&self, u: &CMat, side: Side, guard: Option<&str>) -> Gate {
        let dm = &self.dims;
        let gdim = if guard.is_some() { dm.n_alpha } else { 1 };
        let (qq, wd) = (dm.q * dm.q, dm.w);
        let inner = dm.a13 * qq * wd;
        let labels = dm.n_r * dm.n_alpha * dm.n_dalpha;
        let lab = dm.n_alpha * dm.n_dalpha;
        let decode = |t: usize| -> Option<(usize, usize, usize)> {
            let (gv, rest) = (t / inner, t % inner);
            let (g, w) = (rest / wd, rest % wd);
            if g >= dm.anc0 * dm.anc0 || w >= labels {
                return None;
            }
            let (mine, other) = match side {
                Side::Left => (g / dm.anc0, g % dm.anc0),
                Side::Right => (g % dm.anc0, g / dm.anc0),
            };
            let (r, al) = (w / lab, w % lab);
            Some(((mine * lab + al) * gdim + gv, other, r))
        };
        let encode = |virt: usize, other: usize, r: usize| -> usize {
            let (l, gv) = (virt / gdim, virt % gdim);
            let (mine, al) = (l / lab, l % lab);
            let g = match side {
                Side::Left => mine * dm.anc0 + other,
                Side::Right => other * dm.anc0 + mine,
            };
            gv * inner + g * wd + r * lab + al
        };
        let op = SparseOp::from_columns(gdim * inner, |t| match decode(t) {
            None => vec![(t, ONE)],
            Some((virt, other, r)) => (0..u.nrows())
                .filter(|&row| u[(row, virt)] != ZERO)
                .map(|row| (encode(row, other, r), u[(row, virt)]))
                .collect(),
        });
        let mut targets: Vec<&str> = Vec::new();
        if let Some(g) = guard {
            targets.push(g);
        }
        targets.extend(["A13", "Q1", "Q2", "W"]);
        let name = match side {
            Side::Left => "U[x²]·l",
            Side::Right => "U[x²]·r",
        };
        Gate::new(name, &targets, op)
    }

    /// `SUB · (U ⊗ I) · ADD` where `ADD` adds the `α` label into the guard.
    fn guarded(&self, u: &CMat) -> CMat {
        let dm = &self.dims;
        let g = dm.n_alpha;
        let n = u.nrows();
        let alpha_of = |l: usize| (l / dm.n_dalpha) % dm.n_alpha;
        let mut out = CMat::zeros(n * g, n * g);
        for l in 0..n {
            for gv in 0..g {
                let g_in = (gv + alpha_of(l)) % g;
                for row in 0..n {
                    let z = u[(row, l)];
                    if z == ZERO {
                        continue;
                    }
                    let g_out = (g_in + g - alpha_of(row)) % g;
                    out[(row * g + g_out, l * g + gv)] += z;
                }
            }
        }
        out
    }

    fn ports_perm(&self, k1: usize, k2: usize) -> Result<Perm> {
        for k in [k1, k2] {
            if k == 0 || k >= self.n {
                return invalid(format!("port {k} outside 1..={}", self.n - 1));
            }
        }
        Ok(pi_k(self.n, k1).compose(&pi_k(self.n, k2)))
    }

    /// `U[x²](k, i)` on the left copy of the ancilla (or `U'[x'²](k_l, k_r)`
    /// for [`Variant::Delta`]).
    pub fn encode_o(&self, variant: Variant, k1: usize, k2: usize) -> Result<Arc<BlockEncoding>> {
        self.encode_o_side(variant, k1, k2, Side::Left)
    }

    fn encode_o_side(&self, variant: Variant, k1: usize, k2: usize, side: Side) -> Result<Arc<BlockEncoding>> {
        let key = (variant, k1, k2, side);
        if let Some(e) = self.o_cache.lock().get(&key) {
            return Ok(e.clone());
        }
        let sigma = self.ports_perm(k1, k2)?;
        let mut u = self.injection_unitary(variant, &sigma)?;
        let guard = match (self.opts.alpha_guard, side) {
            (false, _) => None,
            (true, Side::Left) => Some("GL"),
            (true, Side::Right) => Some("GR"),
        };
        if guard.is_some() {
            u = self.guarded(&u);
        }
        let mut circuit = Circuit::new();
        circuit.push(self.lift(&u, side, guard));
        let scale = match variant {
            Variant::Pi => self.x * self.x,
            Variant::Delta => self.x_prime * self.x_prime,
        };
        let mut ancillas = vec![Ancilla::new(
            match side {
                Side::Left => "Anc0.l",
                Side::Right => "Anc0.r",
            },
            self.dims.anc0,
        )];
        if let Some(g) = guard {
            ancillas.push(Ancilla::new(g, self.dims.n_alpha));
        }
        let name = match variant {
            Variant::Pi => format!("U[x²]({k1},{k2})"),
            Variant::Delta => format!("U'[x'²]({k1},{k2})"),
        };
        let enc = BlockEncoding {
            name,
            layout: self.layout.clone(),
            circuit,
            ancillas,
            inputs: self.labels.clone(),
            outputs: self.labels.clone(),
            target: self.on_labels(&self.o_dense(variant, k1, k2)?),
            scale,
            error_bound: self.opts.leaf_tol,
        };
        enc.verify()?;
        let enc = Arc::new(enc);
        self.o_cache.lock().insert(key, enc.clone());
        Ok(enc)
    }

    /// `U_2[x⁴](i, k_l, k_r) = U[x²](k_l, i) · U[x²](k_r, i)†` on the two copies.
    pub fn encode_u2(&self, i: usize, kl: usize, kr: usize) -> Result<BlockEncoding> {
        let l = self.encode_o_side(Variant::Pi, kl, i, Side::Left)?;
        let r = self.encode_o_side(Variant::Pi, kr, i, Side::Right)?;
        let mut e = product(&l, &r.adjoint())?;
        e.name = format!("U_2[x⁴]({i},{kl},{kr})");
        Ok(e)
    }

    /// Gate flipping the qubit `anc` whenever qudits `n-1, n` are not `|00⟩`.
    fn flag(&self, anc: &str) -> Result<Gate> {
        let q = self.dims.q;
        let images: Vec<usize> = (0..2 * q * q)
            .map(|t| {
                let (f, rest) = (t / (q * q), t % (q * q));
                if rest == 0 {
                    t
                } else {
                    (1 - f) * q * q + rest
                }
            })
            .collect();
        Ok(Gate::new(format!("flag {anc}"), &[anc, "Q1", "Q2"], SparseOp::permutation(&images)?))
    }

    /// Schur(n-2) transform on `W`: valid physical states to their labels,
    /// the remaining states to the unused labels in increasing order.
    fn schur_gate(&self) -> Gate {
        let dm = &self.dims;
        let qpow = dm.q.pow((self.n - 2) as u32);
        let dense_of = |w: usize| -> Option<usize> {
            if w >= qpow {
                return None;
            }
            let mut p = 0;
            for j in (0..self.n - 2).rev() {
                let dig = (w / dm.q.pow(j as u32)) % dm.q;
                if dig >= self.d {
                    return None;
                }
                p = p * self.d + dig;
            }
            Some(p)
        };
        let mut used = vec![false; dm.w];
        for &wl in &self.w_of_row {
            used[wl] = true;
        }
        let unused: Vec<usize> = (0..dm.w).filter(|&w| !used[w]).collect();
        let invalid_phys: Vec<usize> = (0..dm.w).filter(|&w| dense_of(w).is_none()).collect();
        let spill: HashMap<usize, usize> = invalid_phys.into_iter().zip(unused).collect();
        let real = &self.s2.real;
        let op = SparseOp::from_columns(dm.w, |w| match dense_of(w) {
            Some(p) => self
                .w_of_row
                .iter()
                .enumerate()
                .map(|(row, &wl)| (wl, la::c(real[(row, p)])))
                .collect(),
            None => vec![(spill[&w], ONE)],
        });
        Gate::new("U_Sch(n-2)", &["W"], op)
    }

    /// `U_S` on qudits `n-1, n`, first row `⟨φ₊|`.
    fn us_matrix(&self) -> Result<CMat> {
        let q = self.dims.q;
        let s = 1.0 / (self.d as f64).sqrt();
        let mut row = CMat::zeros(1, q * q);
        for a in 0..self.d {
            row[(0, a * q + a)] = la::c(s);
        }
        la::unitary_complete(&row)
    }

    /// `V_L(π_k)`: swaps qudit `k` with qudit `n-1`.
    fn vl_gate(&self, k: usize) -> Result<Option<Gate>> {
        if k == 0 || k >= self.n {
            return invalid(format!("port {k} outside 1..={}", self.n - 1));
        }
        if k == self.n - 1 {
            return Ok(None);
        }
        let dm = &self.dims;
        let qpow = dm.q.pow((self.n - 2) as u32);
        let place = dm.q.pow((self.n - 2 - k) as u32);
        let images: Vec<usize> = (0..dm.w * dm.q)
            .map(|t| {
                let (w, q1) = (t / dm.q, t % dm.q);
                if w >= dm.pad * qpow {
                    return t;
                }
                let dig = (w / place) % dm.q;
                let w2 = w - dig * place + q1 * place;
                w2 * dm.q + dig
            })
            .collect();
        Ok(Some(Gate::new(format!("V_L(π_{k})"), &["W", "Q1"], SparseOp::permutation(&images)?)))
    }

    pub fn encode_vl(&self, k: usize) -> Result<BlockEncoding> {
        let mut c = Circuit::new();
        if let Some(g) = self.vl_gate(k)? {
            c.push(g);
        }
        let target = PermutationOperator::new(self.n, self.d, &pi_k(self.n, k).extend(self.n))?.to_dense();
        Ok(BlockEncoding::unitary(
            &format!("V_L(π_{k})"),
            self.layout.clone(),
            c,
            self.phys.clone(),
            target,
        ))
    }

    /// `U^c_Φ` with flag qubit `anc`: encodes `Φ̃ = √d (U_Sch ⊗ |0⟩⟨0| U_S)`.
    pub fn encode_phi(&self, anc: &str) -> Result<BlockEncoding> {
        let mut c = Circuit::new();
        c.push(self.schur_gate());
        c.push(Gate::new("U_S", &["Q1", "Q2"], SparseOp::from_dense(&self.us_matrix()?)?));
        c.push(self.flag(anc)?);
        let (d, q) = (self.d, self.dims.q);
        let real = &self.s2.real;
        let target = CMat::from_fn(self.labels_q.len(), self.phys.len(), |r, p| {
            let (row, qq) = (r / (q * q), r % (q * q));
            let (head, a, b) = (p / (d * d), (p / d) % d, p % d);
            if qq != 0 || a != b {
                ZERO
            } else {
                la::c(real[(row, head)])
            }
        });
        let e = BlockEncoding {
            name: format!("U^c_Φ[{anc}]"),
            layout: self.layout.clone(),
            circuit: c,
            ancillas: vec![Ancilla::new(anc, 2)],
            inputs: self.phys.clone(),
            outputs: self.labels_q.clone(),
            target,
            scale: (d as f64).sqrt(),
            error_bound: self.opts.leaf_tol,
        };
        e.verify()?;
        Ok(e)
    }

    /// `U^c_cen` around an encoding on the two ancilla copies.
    fn cen(&self, inner: &BlockEncoding, name: String) -> Result<BlockEncoding> {
        let c = Circuit::product(&[
            &Circuit {
                gates: vec![self.flag("A11")?],
            },
            &inner.circuit,
            &Circuit {
                gates: vec![self.flag("A12")?],
            },
        ]);
        let qq = self.dims.q * self.dims.q;
        let target = CMat::from_fn(self.labels_q.len(), self.labels_q.len(), |r, s| {
            if r % qq != 0 || s % qq != 0 {
                ZERO
            } else {
                inner.target[(r / qq, s / qq)]
            }
        });
        let mut ancillas = vec![
            Ancilla::new("A11", 2),
            Ancilla::new("A12", 2),
            Ancilla::new("A13", self.dims.a13),
        ];
        ancillas.extend(inner.ancillas.iter().filter(|a| a.name.starts_with('G')).cloned());
        let e = BlockEncoding {
            name,
            layout: self.layout.clone(),
            circuit: c,
            ancillas,
            inputs: self.labels_q.clone(),
            outputs: self.labels_q.clone(),
            target,
            scale: inner.scale,
            error_bound: inner.error_bound,
        };
        e.verify()?;
        Ok(e)
    }

    pub fn encode_cen(&self, i: usize, kl: usize, kr: usize) -> Result<BlockEncoding> {
        let u2 = self.encode_u2(i, kl, kr)?;
        self.cen(&u2, format!("U^c_cen[x⁴]({i},{kl},{kr})"))
    }

    pub fn encode_cen_prime(&self, kl: usize, kr: usize) -> Result<BlockEncoding> {
        let u1 = self.encode_o_side(Variant::Delta, kl, kr, Side::Left)?;
        self.cen(&u1, format!("U^c'_cen[x'²]({kl},{kr})"))
    }

    /// `V_L(π_kl) · U_Φ(A3)† · U_cen · U_Φ(A2) · V_L(π_kr)`.
    pub fn encode_term(&self, variant: Variant, i: usize, kl: usize, kr: usize) -> Result<BlockEncoding> {
        let cen = match variant {
            Variant::Pi => self.encode_cen(i, kl, kr)?,
            Variant::Delta => self.encode_cen_prime(kl, kr)?,
        };
        let phi_in = self.encode_phi("A2")?;
        let phi_out = self.encode_phi("A3")?.adjoint();
        let e = product(
            &product(&product(&product(&self.encode_vl(kl)?, &phi_out)?, &cen)?, &phi_in)?,
            &self.encode_vl(kr)?,
        )?;
        let mut e = BlockEncoding {
            name: match variant {
                Variant::Pi => format!("U^c({i},{kl},{kr})"),
                Variant::Delta => format!("U^c'({kl},{kr})"),
            },
            ..e
        };
        e.ancillas.sort_by(|a, b| a.name.cmp(&b.name));
        e.verify()?;
        Ok(e)
    }

    fn row_unitary(&self, row: &[f64]) -> Result<CMat> {
        la::unitary_complete(&CMat::from_row_iterator(1, row.len(), row.iter().map(|&z| la::c(z))))
    }

    /// First rows `(a, b, c, 0)` of `U_l` and `U_r`.
    pub fn lr_rows(&self) -> ([f64; 4], [f64; 4]) {
        let (m, d) = ((self.n - 1) as f64, self.d as f64);
        let c = self.c_lr();
        let a = m.powf(1.25) * d.sqrt() * self.x * self.x * c;
        let b = m * d.sqrt() * self.x_prime * c;
        ([a, b, c, 0.0], [a, -b, c, 0.0])
    }

    /// `U^c(i)`: an `(α, a, δ)` encoding of `√Π_i`.
    pub fn encode_kraus(&self, tw: &TwistedSchur, i: usize) -> Result<KrausEncoding> {
        if tw.n != self.n || tw.d != self.d {
            return invalid("twisted data built for a different (n, d)");
        }
        if i == 0 || i >= self.n {
            return invalid(format!("port {i} outside 1..={}", self.n - 1));
        }
        let ports: Vec<(usize, usize)> = (1..self.n).flat_map(|a| (1..self.n).map(move |b| (a, b))).collect();
        let terms = ports
            .par_iter()
            .map(|&(kl, kr)| {
                Ok((
                    self.encode_term(Variant::Pi, i, kl, kr)?,
                    self.encode_term(Variant::Delta, i, kl, kr)?,
                ))
            })
            .collect::<Result<Vec<_>>>()?;
        let (rl, rr) = self.lr_rows();
        let ul = self.row_unitary(&rl)?;
        let ur = self.row_unitary(&rr)?;
        let kd = self.dims.k;
        let mut urow = vec![0.0; kd];
        let s = 1.0 / ((self.n - 1) as f64).sqrt();
        urow[..self.n - 1].iter_mut().for_each(|z| *z = s);
        let uk = self.row_unitary(&urow)?;

        let mut c = Circuit::new();
        c.push(Gate::new("U_r†", &["A4"], SparseOp::from_dense(&ur.adjoint())?));
        c.push(Gate::new("U_k†", &["KL"], SparseOp::from_dense(&uk.adjoint())?));
        c.push(Gate::new("U_k†", &["KR"], SparseOp::from_dense(&uk.adjoint())?));
        for (&(kl, kr), (t_pi, t_delta)) in ports.iter().zip(&terms) {
            c = c.then(&t_pi.circuit.controlled(&[("A4", 0), ("KL", kl - 1), ("KR", kr - 1)]));
            c = c.then(&t_delta.circuit.controlled(&[("A4", 1), ("KL", kl - 1), ("KR", kr - 1)]));
        }
        c.push(Gate::new("U_k", &["KL"], SparseOp::from_dense(&uk)?));
        c.push(Gate::new("U_k", &["KR"], SparseOp::from_dense(&uk)?));
        c.push(Gate::new("U_l", &["A4"], SparseOp::from_dense(&ul)?));

        let alpha = self.alpha_scale();
        let m = (self.n - 1) as f64;
        let err: f64 = terms.iter().map(|(p, q)| p.error_bound + q.error_bound / m.sqrt()).sum::<f64>()
            + alpha * self.opts.leaf_tol;
        let mut ancillas = vec![
            Ancilla::new("A4", 4),
            Ancilla::new("KL", kd),
            Ancilla::new("KR", kd),
            Ancilla::new("A11", 2),
            Ancilla::new("A12", 2),
            Ancilla::new("A13", self.dims.a13),
            Ancilla::new("A2", 2),
            Ancilla::new("A3", 2),
        ];
        if self.opts.alpha_guard {
            ancillas.push(Ancilla::new("GL", self.dims.n_alpha));
            ancillas.push(Ancilla::new("GR", self.dims.n_alpha));
        }
        let encoding = BlockEncoding {
            name: format!("U^c({i})"),
            layout: self.layout.clone(),
            circuit: c,
            ancillas,
            inputs: self.phys.clone(),
            outputs: self.phys.clone(),
            target: la::to_complex(&tw.kraus(i)?),
            scale: alpha,
            error_bound: err,
        };
        let resid = encoding.verify()?;
        let ledger = self.ledger(i, &terms, &encoding, resid)?;
        Ok(KrausEncoding { i, encoding, ledger })
    }

    fn ledger(
        &self,
        i: usize,
        terms: &[(BlockEncoding, BlockEncoding)],
        top: &BlockEncoding,
        top_resid: f64,
    ) -> Result<Vec<LedgerRow>> {
        let dm = &self.dims;
        let lg = |x: usize| (x as f64).log2();
        let (x2, d) = (self.x * self.x, self.d as f64);
        let base = 2.0 * lg(dm.n_rnu) + 2.0 * lg(dm.n_nu);
        let mut rows = Vec::new();
        let mut push = |matrix: &str, e: &BlockEncoding, scale_formula: f64, ancilla_formula: f64, residual: f64| {
            rows.push(LedgerRow {
                matrix: matrix.into(),
                encoding: e.name.clone(),
                scale: e.scale,
                scale_formula,
                ancilla_qubits: e.ancilla_qubits(),
                ancilla_formula,
                error_bound: e.error_bound,
                residual,
            });
        };
        let o = self.encode_o(Variant::Pi, 1, i)?;
        push("Σ_α |e_α⟩⟨e_α| ⊗ O(α,k,i)", &o, x2, lg(dm.n_rnu) + lg(dm.n_nu), o.residual()?);
        let u2 = self.encode_u2(i, 1, 1)?;
        push("O_cen(i,k_l,k_r)", &u2, x2 * x2, base, u2.residual()?);
        let phi = self.encode_phi("A2")?;
        push("Φ̃", &phi, d.sqrt(), 1.0, phi.residual()?);
        let cen = self.encode_cen(i, 1, 1)?;
        push("Õ_cen(i,k_l,k_r)", &cen, x2 * x2, base - 2.0 * lg(dm.q) + 2.0, cen.residual()?);
        let t = &terms[0].0;
        push(
            "V_L(π_kl) Φ† O_cen Φ V_L(π_kr)",
            t,
            d * x2 * x2,
            base - 2.0 * lg(dm.q) + 4.0,
            t.residual()?,
        );
        push(
            "√Π_i",
            top,
            self.alpha_scale(),
            base - 2.0 * lg(dm.q) + 2.0 * lg(dm.k) + 6.0,
            top_resid,
        );
        Ok(rows)
    }

    /// Recomputes `‖α⟨0|U^c(i)|0⟩ − √Π_i‖` against a given dense Kraus operator.
    pub fn kraus_residual(&self, enc: &KrausEncoding, dense: &CMat) -> Result<f64> {
        let b = enc.encoding.block()?;
        check("Kraus operator dimension", (b.nrows() as f64 - dense.nrows() as f64).abs(), 0.0)?;
        Ok(la::op_norm(&(b * la::c(enc.encoding.scale) - dense)))
    }

    /// Matrix-free unitarity probe: `‖U†U v − v‖` on random vectors.
    pub fn unitarity_probe(&self, c: &Circuit, samples: usize, seed: u64) -> Result<f64> {
        use rand::{Rng, SeedableRng};
        let fwd = c.compile(&self.layout)?;
        let back = c.adjoint().compile(&self.layout)?;
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let mut worst: f64 = 0.0;
        for _ in 0..samples {
            let v: Vec<C64> = (0..self.layout.total)
                .map(|_| C64::new(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5))
                .collect();
            let mut w = v.clone();
            fwd.apply(&mut w);
            back.apply(&mut w);
            let num: f64 = w.iter().zip(&v).map(|(a, b)| (a - b).norm_sqr()).sum::<f64>().sqrt();
            let den: f64 = v.iter().map(|a| a.norm_sqr()).sum::<f64>().sqrt();
            worst = worst.max(num / den);
        }
        Ok(worst)
    }
}
