//! The pretty good measurement for port-based teleportation with Bell-pair
//! resources: dense construction, twisted-basis Kraus operators, the channel
//! and its entanglement fidelity.

use serde::Serialize;

use crate::error::{check, invalid, Result};
use crate::la::{self, CMat, C64};
use crate::schur::{self, partial_transpose_last, PermutationOperator};
use crate::symrep::Perm;
use crate::twisted::TwistedSchur;

/// Ordered POVM `Π_1 .. Π_{n-1}` on `(C^d)^{⊗n}`.
#[derive(Clone, Debug)]
pub struct Povm {
    pub n: usize,
    pub d: usize,
    pub operators: Vec<CMat>,
}

#[derive(Clone, Copy, Debug, Serialize)]
pub struct PovmCheck {
    pub completeness: f64,
    pub min_eigenvalue: f64,
}

impl Povm {
    pub fn dim(&self) -> usize {
        self.d.pow(self.n as u32)
    }

    /// Residual of `Σ Π_i = I` and the smallest eigenvalue over all `Π_i`.
    pub fn residuals(&self) -> PovmCheck {
        let dim = self.dim();
        let mut sum = CMat::zeros(dim, dim);
        let mut min_eig = f64::INFINITY;
        for op in &self.operators {
            sum += op;
            let (vals, _) = la::hermitian_eigen(op);
            min_eig = min_eig.min(vals[0]);
        }
        PovmCheck {
            completeness: la::max_abs(&(sum - la::identity(dim))),
            min_eigenvalue: min_eig,
        }
    }

    pub fn validate(&self) -> Result<PovmCheck> {
        let r = self.residuals();
        check("POVM completeness", r.completeness, 1e-9)?;
        check("POVM positivity", (-r.min_eigenvalue).max(0.0), 1e-10)?;
        Ok(r)
    }
}

fn check_nd(n: usize, d: usize) -> Result<usize> {
    if n < 2 {
        return invalid(format!("need at least one port (n >= 2), got n = {n}"));
    }
    if d == 0 {
        return invalid("local dimension must be positive");
    }
    let dim = d
        .checked_pow(n as u32)
        .ok_or_else(|| crate::error::PbtError::Overflow(format!("{d}^{n}")))?;
    schur::guard("dense PGM", dim)?;
    Ok(dim)
}

fn check_port(n: usize, i: usize) -> Result<()> {
    if i == 0 || i >= n {
        return invalid(format!("port {i} outside 1..={}", n - 1));
    }
    Ok(())
}

/// `V[(i n)]^{t_n}`, `i` 1-based.
pub fn v_transposed(n: usize, d: usize, i: usize) -> Result<CMat> {
    check_nd(n, d)?;
    check_port(n, i)?;
    let v = PermutationOperator::new(n, d, &Perm::transposition(n, i - 1, n - 1))?;
    partial_transpose_last(&v.to_dense(), n, d)
}

/// `η = Σ_i V[(i n)]^{t_n} = d^{n-1} ρ`.
pub fn eta_dense(n: usize, d: usize) -> Result<CMat> {
    let dim = check_nd(n, d)?;
    let mut eta = CMat::zeros(dim, dim);
    for i in 1..n {
        eta += v_transposed(n, d, i)?;
    }
    Ok(eta)
}

/// `ρ_i = V[(i n)]^{t_n} / d^{n-1}`.
pub fn rho_i_dense(n: usize, d: usize, i: usize) -> Result<CMat> {
    Ok(v_transposed(n, d, i)? / la::c((d as f64).powi(n as i32 - 1)))
}

/// `ρ_i = |φ₊⟩⟨φ₊|_{i n} ⊗ I/d^{n-2}` built entrywise.
pub fn rho_i_tensor(n: usize, d: usize, i: usize) -> Result<CMat> {
    let dim = check_nd(n, d)?;
    check_port(n, i)?;
    let digit = |x: usize, q: usize| (x / d.pow((n - 1 - q) as u32)) % d;
    let norm = 1.0 / (d as f64).powi(n as i32 - 1);
    Ok(CMat::from_fn(dim, dim, |x, y| {
        let (xi, xn, yi, yn) = (digit(x, i - 1), digit(x, n - 1), digit(y, i - 1), digit(y, n - 1));
        if xi != xn || yi != yn {
            return la::ZERO;
        }
        let rest_equal = (0..n - 1)
            .filter(|&q| q != i - 1)
            .all(|q| digit(x, q) == digit(y, q));
        if rest_equal {
            la::c(norm)
        } else {
            la::ZERO
        }
    }))
}

/// PGM pieces: `Π̃_i`, `Δ` and the POVM `Π_i = Π̃_i + Δ`.
#[derive(Clone, Debug)]
pub struct PgmParts {
    pub pi_tilde: Vec<CMat>,
    pub delta: CMat,
    pub povm: Povm,
}

pub fn pgm_dense_parts(n: usize, d: usize) -> Result<PgmParts> {
    let dim = check_nd(n, d)?;
    let rhos = (1..n).map(|i| rho_i_dense(n, d, i)).collect::<Result<Vec<_>>>()?;
    let mut rho = CMat::zeros(dim, dim);
    for r in &rhos {
        rho += r;
    }
    let inv = la::pinv_sqrt(&rho, 1e-10);
    let pi_tilde: Vec<CMat> = rhos.iter().map(|r| &inv * r * &inv).collect();
    let mut sum = CMat::zeros(dim, dim);
    for p in &pi_tilde {
        sum += p;
    }
    let delta = (la::identity(dim) - sum) / la::c((n - 1) as f64);
    let operators = pi_tilde.iter().map(|p| p + &delta).collect();
    let povm = Povm { n, d, operators };
    povm.validate()?;
    Ok(PgmParts {
        pi_tilde,
        delta,
        povm,
    })
}

pub fn pgm_dense(n: usize, d: usize) -> Result<Povm> {
    Ok(pgm_dense_parts(n, d)?.povm)
}

/// Principal square roots of the POVM elements.
pub fn kraus_dense(povm: &Povm) -> Vec<CMat> {
    povm.operators.iter().map(la::psd_sqrt).collect()
}

/// `√Π_i` from the twisted blocks.
pub fn kraus_from_twisted(tw: &TwistedSchur, i: usize) -> Result<CMat> {
    check_port(tw.n, i)?;
    Ok(la::to_complex(&tw.kraus(i)?))
}

/// POVM `Π_i = (√Π_i)²` from the twisted blocks.
pub fn povm_from_twisted(tw: &TwistedSchur) -> Result<Povm> {
    let operators = (1..tw.n)
        .map(|i| {
            let k = kraus_from_twisted(tw, i)?;
            Ok(&k * &k)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(Povm {
        n: tw.n,
        d: tw.d,
        operators,
    })
}

/// `Tr_{A_{≠i}, A_n}[Π (I ⊗ X_{A_n})]` as an operator on `A_i`.
fn reduce_to_port(op: &CMat, n: usize, d: usize, i: usize, x: &CMat) -> CMat {
    let dim = op.nrows();
    let pos = |q: usize| d.pow((n - 1 - q) as u32);
    let mut out = CMat::zeros(d, d);
    for row in 0..dim {
        let (a, rn) = ((row / pos(i - 1)) % d, row % d);
        for yn in 0..d {
            let xv = x[(yn, rn)];
            if xv == la::ZERO {
                continue;
            }
            for b in 0..d {
                // column agrees with the row off ports i and n
                let col = row - a * pos(i - 1) + b * pos(i - 1) - rn + yn;
                out[(a, b)] += op[(row, col)] * xv;
            }
        }
    }
    out
}

/// `Λ(X) = Σ_i (Tr_{A_{≠i}, A_n}[Π_i (I ⊗ X)])ᵀ / d^{n-1}`.
pub fn channel_apply(povm: &Povm, x: &CMat) -> Result<CMat> {
    let (n, d) = (povm.n, povm.d);
    if x.nrows() != d || x.ncols() != d {
        return invalid(format!("input must be {d}x{d}"));
    }
    let norm = la::c((d as f64).powi(n as i32 - 1));
    let mut out = CMat::zeros(d, d);
    for (k, op) in povm.operators.iter().enumerate() {
        out += reduce_to_port(op, n, d, k + 1, x).transpose() / norm;
    }
    Ok(out)
}

/// Per-port unnormalized output `Tr[...]_{B_i ↦ B_n}`; its trace is the outcome probability.
pub fn channel_branch(povm: &Povm, i: usize, x: &CMat) -> Result<CMat> {
    check_port(povm.n, i)?;
    let norm = la::c((povm.d as f64).powi(povm.n as i32 - 1));
    Ok(reduce_to_port(&povm.operators[i - 1], povm.n, povm.d, i, x).transpose() / norm)
}

/// Entanglement fidelity, computed as `(1/d²) Σ Tr[Π_i ρ_i]` and through the
/// channel acting on half of `|φ₊⟩`; the two must agree to `1e-10`.
pub fn entanglement_fidelity(povm: &Povm) -> Result<f64> {
    let (n, d) = (povm.n, povm.d);
    let mut direct = 0.0;
    for (k, op) in povm.operators.iter().enumerate() {
        let rho = rho_i_dense(n, d, k + 1)?;
        direct += (op * rho).trace().re;
    }
    direct /= (d * d) as f64;
    let mut anc = C64::new(0.0, 0.0);
    for a in 0..d {
        for b in 0..d {
            let mut e = CMat::zeros(d, d);
            e[(a, b)] = la::ONE;
            anc += channel_apply(povm, &e)?[(a, b)];
        }
    }
    let anc = anc.re / (d * d) as f64;
    check("fidelity forms agree", (direct - anc).abs(), 1e-10)?;
    Ok(direct)
}

/// Entanglement fidelity of the dense PGM.
pub fn fidelity(n: usize, d: usize) -> Result<f64> {
    entanglement_fidelity(&pgm_dense(n, d)?)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn single_port() {
        let povm = pgm_dense(2, 2).unwrap();
        assert!(la::max_abs(&(&povm.operators[0] - la::identity(4))) < 1e-12);
        assert!((fidelity(2, 2).unwrap() - 0.25).abs() < 1e-12);
        let mut eta = CMat::zeros(2, 2);
        eta[(0, 0)] = la::ONE;
        let out = channel_apply(&povm, &eta).unwrap();
        assert!(la::max_abs(&(out - la::identity(2) * la::c(0.5))) < 1e-12);
    }

    #[test]
    fn two_rho_constructions() {
        for i in 1..4 {
            let a = rho_i_dense(4, 2, i).unwrap();
            let b = rho_i_tensor(4, 2, i).unwrap();
            assert!(la::max_abs(&(a - b)) < 1e-15);
        }
        assert!(v_transposed(3, 2, 3).is_err());
    }
}
