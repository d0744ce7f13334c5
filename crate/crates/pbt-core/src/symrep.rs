//! Young's orthogonal form of S(m) in the Gelfand-Tsetlin basis.
//!
//! Tableaux are kept in last-letter order: the tableaux of `λ` are grouped by
//! the box holding the largest letter, groups ordered by that box's row
//! descending, and each group recursively in the same order. Consequently the
//! restriction to S(m-1) is block diagonal with contiguous blocks.

use std::collections::HashMap;
use std::sync::Arc;

use nalgebra::DMatrix;
use once_cell::sync::Lazy;
use parking_lot::RwLock;
use rand::Rng;
use serde::Serialize;

use crate::error::{invalid, Result};
use crate::young::Partition;

/// A permutation of `{0, .., m-1}` stored by images: `self.img[i] = σ(i)`.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
pub struct Perm {
    img: Vec<usize>,
}

impl Perm {
    pub fn identity(m: usize) -> Self {
        Perm { img: (0..m).collect() }
    }

    pub fn from_images(img: Vec<usize>) -> Result<Self> {
        let mut seen = vec![false; img.len()];
        for &x in &img {
            if x >= img.len() || seen[x] {
                return invalid(format!("not a permutation: {img:?}"));
            }
            seen[x] = true;
        }
        Ok(Perm { img })
    }

    /// Transposition of two 0-based points.
    pub fn transposition(m: usize, a: usize, b: usize) -> Self {
        let mut img: Vec<usize> = (0..m).collect();
        img.swap(a, b);
        Perm { img }
    }

    /// Builds a permutation from 1-based cycles, e.g. `[[1, 3]]` is (1 3).
    pub fn from_cycles(m: usize, cycles: &[Vec<usize>]) -> Result<Self> {
        let mut img: Vec<usize> = (0..m).collect();
        for c in cycles {
            if c.iter().any(|&x| x == 0 || x > m) {
                return invalid(format!("cycle {c:?} out of range 1..={m}"));
            }
            for w in 0..c.len() {
                img[c[w] - 1] = c[(w + 1) % c.len()] - 1;
            }
        }
        Perm::from_images(img)
    }

    pub fn len(&self) -> usize {
        self.img.len()
    }

    pub fn is_empty(&self) -> bool {
        self.img.is_empty()
    }

    pub fn images(&self) -> &[usize] {
        &self.img
    }

    pub fn apply(&self, i: usize) -> usize {
        self.img[i]
    }

    pub fn is_identity(&self) -> bool {
        self.img.iter().enumerate().all(|(i, &x)| i == x)
    }

    /// `self ∘ other`, i.e. apply `other` first.
    pub fn compose(&self, other: &Perm) -> Perm {
        assert_eq!(self.len(), other.len());
        Perm {
            img: other.img.iter().map(|&x| self.img[x]).collect(),
        }
    }

    pub fn inverse(&self) -> Perm {
        let mut img = vec![0; self.len()];
        for (i, &x) in self.img.iter().enumerate() {
            img[x] = i;
        }
        Perm { img }
    }

    /// Extends to `{0, .., m-1}` by fixing the new points.
    pub fn extend(&self, m: usize) -> Perm {
        let mut img = self.img.clone();
        img.extend(self.len()..m);
        Perm { img }
    }

    /// A reduced word `w` with `self = s_{w[0]} ∘ s_{w[1]} ∘ ...`, where `s_i`
    /// swaps the 0-based points `i` and `i+1`.
    pub fn adjacent_word(&self) -> Vec<usize> {
        let mut p = self.img.clone();
        let mut word = Vec::new();
        loop {
            match (0..p.len().saturating_sub(1)).find(|&i| p[i] > p[i + 1]) {
                Some(i) => {
                    p.swap(i, i + 1);
                    word.push(i);
                }
                None => break,
            }
        }
        word.reverse();
        word
    }

    pub fn random<R: Rng + ?Sized>(m: usize, rng: &mut R) -> Perm {
        let mut img: Vec<usize> = (0..m).collect();
        for i in (1..m).rev() {
            let j = rng.random_range(0..=i);
            img.swap(i, j);
        }
        Perm { img }
    }

    /// All permutations of `m` points in lexicographic order of images.
    pub fn all(m: usize) -> Vec<Perm> {
        let mut out = Vec::new();
        let mut cur: Vec<usize> = (0..m).collect();
        loop {
            out.push(Perm { img: cur.clone() });
            // next lexicographic permutation
            let Some(i) = (0..m.saturating_sub(1)).rev().find(|&i| cur[i] < cur[i + 1]) else {
                break;
            };
            let j = (i + 1..m).rev().find(|&j| cur[j] > cur[i]).unwrap();
            cur.swap(i, j);
            cur[i + 1..].reverse();
        }
        out
    }
}

/// A standard tableau, stored by the row and column of each letter `0..m`.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize)]
pub struct StandardTableau {
    pub row: Vec<u8>,
    pub col: Vec<u8>,
}

impl StandardTableau {
    fn content(&self, letter: usize) -> i64 {
        self.col[letter] as i64 - self.row[letter] as i64
    }

    /// Entries laid out row by row with 1-based letters.
    pub fn rows(&self) -> Vec<Vec<usize>> {
        let h = self.row.iter().map(|&r| r as usize + 1).max().unwrap_or(0);
        let mut out = vec![Vec::new(); h];
        for (letter, &r) in self.row.iter().enumerate() {
            out[r as usize].push(letter + 1);
        }
        out
    }
}

/// The standard tableaux of one shape in last-letter order.
#[derive(Debug)]
pub struct Tableaux {
    pub shape: Partition,
    pub list: Vec<StandardTableau>,
    index: HashMap<Vec<u8>, usize>,
    /// `(ξ, offset, len)`: tableaux whose largest letter sits in the box `shape / ξ`.
    pub blocks: Vec<(Partition, usize, usize)>,
    /// Sparse form of each adjacent transposition: per tableau, the diagonal
    /// entry and the optional partner with its off-diagonal entry.
    adjacent: Vec<Vec<(f64, Option<(usize, f64)>)>>,
}

impl Tableaux {
    pub fn dim(&self) -> usize {
        self.list.len()
    }

    pub fn position(&self, t: &StandardTableau) -> Option<usize> {
        self.index.get(&t.row).copied()
    }

    /// Offset and length of the branching block for `ξ`.
    pub fn block(&self, xi: &Partition) -> Result<(usize, usize)> {
        self.blocks
            .iter()
            .find(|(x, _, _)| x == xi)
            .map(|&(_, o, l)| (o, l))
            .ok_or_else(|| {
                crate::error::PbtError::InvalidArgument(format!(
                    "{xi} is not a one-box removal of {}",
                    self.shape
                ))
            })
    }

    /// Sparse adjacent transposition `s_i` (0-based letters `i`, `i+1`).
    pub fn adjacent(&self, i: usize) -> &[(f64, Option<(usize, f64)>)] {
        &self.adjacent[i]
    }

    /// Left-multiplies `mat` (rows indexed by tableaux) by `yor(s_i)`.
    pub fn left_mul_adjacent(&self, i: usize, mat: &DMatrix<f64>) -> DMatrix<f64> {
        let mut out = DMatrix::zeros(mat.nrows(), mat.ncols());
        for (t, &(diag, off)) in self.adjacent[i].iter().enumerate() {
            for c in 0..mat.ncols() {
                let mut v = diag * mat[(t, c)];
                if let Some((p, w)) = off {
                    v += w * mat[(p, c)];
                }
                out[(t, c)] = v;
            }
        }
        out
    }
}

fn build_tableaux(shape: &Partition) -> Tableaux {
    fn rec(shape: &Partition) -> Vec<StandardTableau> {
        let m = shape.n();
        if m == 0 {
            return vec![StandardTableau { row: vec![], col: vec![] }];
        }
        let mut out = Vec::new();
        for r in (0..shape.height()).rev() {
            if let Some(xi) = shape.without_box_in_row(r) {
                for mut t in rec(&xi) {
                    t.row.push(r as u8);
                    t.col.push((shape.row(r) - 1) as u8);
                    out.push(t);
                }
            }
        }
        out
    }
    let list = rec(shape);
    let index = list.iter().enumerate().map(|(i, t)| (t.row.clone(), i)).collect::<HashMap<_, _>>();

    let mut blocks: Vec<(Partition, usize, usize)> = Vec::new();
    for (pos, t) in list.iter().enumerate() {
        let Some(&r) = t.row.last() else { continue };
        let r = r as usize;
        let xi = shape.without_box_in_row(r).unwrap();
        match blocks.last_mut() {
            Some((x, _, len)) if *x == xi => *len += 1,
            _ => blocks.push((xi, pos, 1)),
        }
    }

    let m = shape.n();
    let adjacent = (0..m.saturating_sub(1))
        .map(|i| {
            list.iter()
                .map(|t| {
                    let r = (t.content(i + 1) - t.content(i)) as f64;
                    let diag = 1.0 / r;
                    let partner = if t.row[i] != t.row[i + 1] && t.col[i] != t.col[i + 1] {
                        let mut rows = t.row.clone();
                        rows.swap(i, i + 1);
                        Some((index[&rows], (1.0 - 1.0 / (r * r)).sqrt()))
                    } else {
                        None
                    };
                    (diag, partner)
                })
                .collect()
        })
        .collect();

    Tableaux {
        shape: shape.clone(),
        list,
        index,
        blocks,
        adjacent,
    }
}

static TABLEAUX: Lazy<RwLock<HashMap<Partition, Arc<Tableaux>>>> = Lazy::new(Default::default);

/// Standard tableaux of `shape` in last-letter order (memoized).
pub fn tableaux(shape: &Partition) -> Arc<Tableaux> {
    if let Some(t) = TABLEAUX.read().get(shape) {
        return t.clone();
    }
    let t = Arc::new(build_tableaux(shape));
    TABLEAUX.write().entry(shape.clone()).or_insert(t).clone()
}

/// Orthogonal matrix of a permutation in an irrep.
#[derive(Clone, Debug)]
pub struct IrrepMatrix {
    pub diagram: Partition,
    pub element: Perm,
    pub matrix: DMatrix<f64>,
}

/// Adjacent transposition `(k k+1)` with 1-based `k`.
pub fn yor_adjacent(lambda: &Partition, k: usize) -> Result<IrrepMatrix> {
    let m = lambda.n();
    if k == 0 || k >= m {
        return invalid(format!("adjacent index {k} outside 1..{m}"));
    }
    let element = Perm::transposition(m, k - 1, k);
    let t = tableaux(lambda);
    let matrix = t.left_mul_adjacent(k - 1, &DMatrix::identity(t.dim(), t.dim()));
    Ok(IrrepMatrix {
        diagram: lambda.clone(),
        element,
        matrix,
    })
}

fn yor_uncached(lambda: &Partition, sigma: &Perm) -> DMatrix<f64> {
    let t = tableaux(lambda);
    let mut mat = DMatrix::identity(t.dim(), t.dim());
    for &i in sigma.adjacent_word().iter().rev() {
        mat = t.left_mul_adjacent(i, &mat);
    }
    mat
}

type TranspositionKey = (Partition, usize);
static TRANSPOSITIONS: Lazy<RwLock<HashMap<TranspositionKey, Arc<DMatrix<f64>>>>> =
    Lazy::new(Default::default);

/// `yor(λ, (i m))` for the transposition of the 0-based point `i` with the
/// last point; these are the only matrices that get memoized.
pub fn yor_last_transposition(lambda: &Partition, i: usize) -> Arc<DMatrix<f64>> {
    let key = (lambda.clone(), i);
    if let Some(m) = TRANSPOSITIONS.read().get(&key) {
        return m.clone();
    }
    let m = lambda.n();
    let mat = Arc::new(yor_uncached(lambda, &Perm::transposition(m, i, m - 1)));
    TRANSPOSITIONS.write().entry(key).or_insert(mat).clone()
}

/// Young's orthogonal matrix of `sigma` in the irrep `lambda`.
pub fn yor(lambda: &Partition, sigma: &Perm) -> Result<IrrepMatrix> {
    if sigma.len() != lambda.n() {
        return invalid(format!(
            "permutation acts on {} points but {lambda} has {} boxes",
            sigma.len(),
            lambda.n()
        ));
    }
    Ok(IrrepMatrix {
        diagram: lambda.clone(),
        element: sigma.clone(),
        matrix: yor_matrix(lambda, sigma),
    })
}

/// Bare matrix form of [`yor`]; uses the transposition cache when it applies.
pub fn yor_matrix(lambda: &Partition, sigma: &Perm) -> DMatrix<f64> {
    let m = sigma.len();
    if m >= 2 {
        let moved: Vec<usize> = (0..m).filter(|&x| sigma.apply(x) != x).collect();
        if moved.len() == 2 && moved[1] == m - 1 {
            return (*yor_last_transposition(lambda, moved[0])).clone();
        }
    }
    yor_uncached(lambda, sigma)
}

/// Sub-block of `yor(ν, σ)` with rows in the branch `ξ_row` and columns in
/// the branch `ξ_col`.
pub fn prir_block(
    nu: &Partition,
    sigma: &Perm,
    xi_row: &Partition,
    xi_col: &Partition,
) -> Result<DMatrix<f64>> {
    let t = tableaux(nu);
    let (r0, rl) = t.block(xi_row)?;
    let (c0, cl) = t.block(xi_col)?;
    let full = yor(nu, sigma)?.matrix;
    Ok(full.view((r0, c0), (rl, cl)).into_owned())
}
