//! Brute-force oracles shared by the integration tests. Nothing here calls
//! into the library's numerical code.
#![allow(dead_code)]

use nalgebra::DMatrix;

pub type Real = DMatrix<f64>;

/// All partitions of `n` with at most `h` rows, by filtering every
/// composition of `n`.
pub fn partitions_brute(n: usize, h: usize) -> Vec<Vec<usize>> {
    fn comps(n: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if n == 0 {
            out.push(cur.clone());
            return;
        }
        for x in 1..=n {
            cur.push(x);
            comps(n - x, cur, out);
            cur.pop();
        }
    }
    let mut all = Vec::new();
    comps(n, &mut Vec::new(), &mut all);
    let mut out: Vec<Vec<usize>> = all
        .into_iter()
        .filter(|c| c.len() <= h && c.windows(2).all(|w| w[0] >= w[1]))
        .collect();
    out.sort();
    out.reverse();
    out
}

/// Standard tableaux counted by removing the largest letter from each corner.
pub fn count_syt(rows: &[usize]) -> usize {
    if rows.iter().sum::<usize>() == 0 {
        return 1;
    }
    let mut total = 0;
    for i in 0..rows.len() {
        let corner = rows[i] > 0 && (i + 1 == rows.len() || rows[i + 1] < rows[i]);
        if corner {
            let mut r = rows.to_vec();
            r[i] -= 1;
            while r.last() == Some(&0) {
                r.pop();
            }
            total += count_syt(&r);
        }
    }
    total
}

/// Semistandard tableaux with entries `1..=d`, by backtracking over fillings.
pub fn count_ssyt(rows: &[usize], d: usize) -> usize {
    let cells: Vec<(usize, usize)> = rows
        .iter()
        .enumerate()
        .flat_map(|(i, &l)| (0..l).map(move |j| (i, j)))
        .collect();
    let mut grid: Vec<Vec<usize>> = rows.iter().map(|&l| vec![0; l]).collect();
    fn go(k: usize, cells: &[(usize, usize)], grid: &mut Vec<Vec<usize>>, d: usize) -> usize {
        if k == cells.len() {
            return 1;
        }
        let (i, j) = cells[k];
        let lo_row = if j > 0 { grid[i][j - 1] } else { 1 };
        let lo_col = if i > 0 { grid[i - 1][j] + 1 } else { 1 };
        let mut total = 0;
        for v in lo_row.max(lo_col)..=d {
            grid[i][j] = v;
            total += go(k + 1, cells, grid, d);
        }
        grid[i][j] = 0;
        total
    }
    go(0, &cells, &mut grid, d)
}

/// Character value by the Murnaghan-Nakayama rule on beta-sets.
pub fn mn_character(lambda: &[usize], mu: &[usize]) -> i64 {
    let len = lambda.len();
    let beta: Vec<i64> = lambda
        .iter()
        .enumerate()
        .map(|(i, &l)| l as i64 + (len - 1 - i) as i64)
        .collect();
    fn rec(beta: &[i64], mu: &[usize]) -> i64 {
        let Some((&k, rest)) = mu.split_first() else {
            return 1;
        };
        let k = k as i64;
        let mut total = 0;
        for (idx, &b) in beta.iter().enumerate() {
            let t = b - k;
            if t < 0 || beta.contains(&t) {
                continue;
            }
            let between = beta.iter().filter(|&&x| x > t && x < b).count();
            let sign = if between % 2 == 0 { 1 } else { -1 };
            let mut next = beta.to_vec();
            next[idx] = t;
            total += sign * rec(&next, rest);
        }
        total
    }
    rec(&beta, mu)
}

/// Cycle type of a permutation given by 0-based images.
pub fn cycle_type(img: &[usize]) -> Vec<usize> {
    let mut seen = vec![false; img.len()];
    let mut out = Vec::new();
    for s in 0..img.len() {
        if seen[s] {
            continue;
        }
        let mut len = 0;
        let mut x = s;
        while !seen[x] {
            seen[x] = true;
            x = img[x];
            len += 1;
        }
        out.push(len);
    }
    out.sort_unstable_by(|a, b| b.cmp(a));
    out
}

pub fn digits(x: usize, m: usize, d: usize) -> Vec<usize> {
    (0..m).map(|q| (x / d.pow((m - 1 - q) as u32)) % d).collect()
}

pub fn undigits(v: &[usize], d: usize) -> usize {
    v.iter().fold(0, |acc, &x| acc * d + x)
}

/// Dense `V(σ)`: the qudit in slot `a` moves to slot `σ(a)`; slot 0 is the
/// most significant digit.
pub fn perm_matrix(img: &[usize], d: usize) -> Real {
    let m = img.len();
    let dim = d.pow(m as u32);
    let mut out = Real::zeros(dim, dim);
    for x in 0..dim {
        let i = digits(x, m, d);
        let mut j = vec![0; m];
        for a in 0..m {
            j[img[a]] = i[a];
        }
        out[(undigits(&j, d), x)] = 1.0;
    }
    out
}

pub fn transposition(m: usize, a: usize, b: usize) -> Vec<usize> {
    let mut v: Vec<usize> = (0..m).collect();
    v.swap(a, b);
    v
}

/// Transpose on the last tensor factor.
pub fn partial_transpose_last(op: &Real, m: usize, d: usize) -> Real {
    let dim = op.nrows();
    let mut out = Real::zeros(dim, dim);
    for r in 0..dim {
        for c in 0..dim {
            let (rh, rl) = (r / d, r % d);
            let (ch, cl) = (c / d, c % d);
            out[(rh * d + cl, ch * d + rl)] = op[(r, c)];
        }
    }
    let _ = m;
    out
}

pub fn sym_eigen(h: &Real) -> (Vec<f64>, Real) {
    let e = h.clone().symmetric_eigen();
    let mut idx: Vec<usize> = (0..e.eigenvalues.len()).collect();
    idx.sort_by(|&a, &b| e.eigenvalues[a].total_cmp(&e.eigenvalues[b]));
    let vals = idx.iter().map(|&k| e.eigenvalues[k]).collect();
    let vecs = Real::from_fn(h.nrows(), idx.len(), |r, c| e.eigenvectors[(r, idx[c])]);
    (vals, vecs)
}

pub fn sym_fn(h: &Real, f: impl Fn(f64) -> f64) -> Real {
    let (vals, vecs) = sym_eigen(h);
    let scaled = Real::from_fn(vecs.nrows(), vecs.ncols(), |r, c| vecs[(r, c)] * f(vals[c]));
    scaled * vecs.transpose()
}

pub fn sqrt_psd(h: &Real) -> Real {
    let top = sym_eigen(h).0.iter().fold(0.0f64, |a, &b| a.max(b.abs()));
    sym_fn(h, |x| if x > 1e-12 * top { x.sqrt() } else { 0.0 })
}

pub fn max_abs<R: nalgebra::Dim, C: nalgebra::Dim, S: nalgebra::RawStorage<f64, R, C>>(
    m: &nalgebra::Matrix<f64, R, C, S>,
) -> f64 {
    m.iter().fold(0.0f64, |a, &b| a.max(b.abs()))
}

pub fn op_norm(m: &Real) -> f64 {
    m.clone().singular_values().iter().fold(0.0f64, |a, &b| a.max(b))
}

/// `|φ₊⟩⟨φ₊|` on qudits `a` and `b` of `m`, tensored with the identity.
pub fn phi_plus_projector(m: usize, d: usize, a: usize, b: usize) -> Real {
    let dim = d.pow(m as u32);
    Real::from_fn(dim, dim, |r, c| {
        let (x, y) = (digits(r, m, d), digits(c, m, d));
        let rest = (0..m).filter(|&q| q != a && q != b).all(|q| x[q] == y[q]);
        if rest && x[a] == x[b] && y[a] == y[b] {
            1.0 / d as f64
        } else {
            0.0
        }
    })
}

pub struct Pgm {
    pub rho_i: Vec<Real>,
    pub pi_tilde: Vec<Real>,
    pub delta: Real,
    pub povm: Vec<Real>,
    pub kraus: Vec<Real>,
    /// Projector onto the support of `ρ`.
    pub support: Real,
}

/// Pretty good measurement from first principles.
pub fn pgm(n: usize, d: usize) -> Pgm {
    let dim = d.pow(n as u32);
    let norm = 1.0 / d.pow((n - 2) as u32) as f64;
    let rho_i: Vec<Real> = (0..n - 1).map(|i| phi_plus_projector(n, d, i, n - 1) * norm).collect();
    let rho = rho_i.iter().fold(Real::zeros(dim, dim), |a, b| a + b);
    let top = sym_eigen(&rho).0.last().copied().unwrap();
    let inv = sym_fn(&rho, |x| if x > 1e-10 * top { 1.0 / x.sqrt() } else { 0.0 });
    let support = sym_fn(&rho, |x| if x > 1e-10 * top { 1.0 } else { 0.0 });
    let pi_tilde: Vec<Real> = rho_i.iter().map(|r| &inv * r * &inv).collect();
    let sum = pi_tilde.iter().fold(Real::zeros(dim, dim), |a, b| a + b);
    let delta = (Real::identity(dim, dim) - sum) / (n - 1) as f64;
    let povm: Vec<Real> = pi_tilde.iter().map(|p| p + &delta).collect();
    let kraus = povm.iter().map(sqrt_psd).collect();
    Pgm {
        rho_i,
        pi_tilde,
        delta,
        povm,
        kraus,
        support,
    }
}

/// `(1/d²) Σ Tr[Π_i ρ_i]`.
pub fn fidelity(p: &Pgm, d: usize) -> f64 {
    p.povm.iter().zip(&p.rho_i).map(|(a, b)| (a * b).trace()).sum::<f64>() / (d * d) as f64
}

/// Deterministic xorshift so oracle inputs do not share the library's RNG.
pub struct XorShift(pub u64);

impl XorShift {
    pub fn next(&mut self) -> u64 {
        let mut x = self.0;
        x ^= x << 13;
        x ^= x >> 7;
        x ^= x << 17;
        self.0 = x;
        x
    }

    pub fn below(&mut self, k: usize) -> usize {
        (self.next() % k as u64) as usize
    }

    pub fn unit(&mut self) -> f64 {
        (self.next() >> 11) as f64 / (1u64 << 53) as f64
    }

    pub fn perm(&mut self, m: usize) -> Vec<usize> {
        let mut v: Vec<usize> = (0..m).collect();
        for i in (1..m).rev() {
            let j = self.below(i + 1);
            v.swap(i, j);
        }
        v
    }
}

pub type Z = nalgebra::Complex<f64>;

/// QR of a matrix with uniform entries; enough spread for structure checks.
pub fn random_unitary(d: usize, rng: &mut XorShift) -> DMatrix<Z> {
    let a = DMatrix::from_fn(d, d, |_, _| Z::new(rng.unit() - 0.5, rng.unit() - 0.5));
    a.qr().q()
}

pub fn tensor_power(u: &DMatrix<Z>, m: usize) -> DMatrix<Z> {
    (1..m).fold(u.clone(), |acc, _| acc.kronecker(u))
}

pub fn complexify(m: &Real) -> DMatrix<Z> {
    m.map(|x| Z::new(x, 0.0))
}

/// `Σ_i V[(i n)]^{t_n}` from permutation matrices.
pub fn eta(n: usize, d: usize) -> Real {
    let dim = d.pow(n as u32);
    (0..n - 1).fold(Real::zeros(dim, dim), |acc, i| {
        acc + partial_transpose_last(&perm_matrix(&transposition(n, i, n - 1), d), n, d)
    })
}

/// Orthogonal projector onto the column span.
pub fn span_projector(cols: &Real) -> Real {
    let g = cols * cols.transpose();
    sym_fn(&g, |x| if x > 1e-9 { 1.0 } else { 0.0 })
}

/// Projector onto the span of all `|φ₊⟩_{i n} ⊗ |x⟩` vectors.
pub fn hm_projector(n: usize, d: usize) -> Real {
    let dim = d.pow(n as u32);
    let mut cols = Vec::new();
    for i in 0..n - 1 {
        let p = phi_plus_projector(n, d, i, n - 1);
        for c in 0..dim {
            if p.column(c).iter().any(|&x| x != 0.0) {
                cols.push(p.column(c).into_owned());
            }
        }
    }
    span_projector(&Real::from_columns(&cols))
}
