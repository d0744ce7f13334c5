//! Register-structured, matrix-free unitaries.
//!
//! A [`Layout`] is an ordered list of named registers (first register most
//! significant). A [`Circuit`] is a list of [`Gate`]s, each a sparse local
//! operator on a few target registers, optionally controlled on other
//! registers holding fixed values. Gates are applied to state vectors without
//! ever forming the full matrix.

use std::collections::HashMap;
use std::sync::Arc;

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{invalid, PbtError, Result};
use crate::la::{self, CMat, C64, ZERO};

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct Register {
    pub name: String,
    pub dim: usize,
}

#[derive(Clone, Debug, Serialize)]
pub struct Layout {
    pub registers: Vec<Register>,
    #[serde(skip)]
    strides: Vec<usize>,
    pub total: usize,
}

impl Layout {
    pub fn new(regs: &[(&str, usize)]) -> Result<Self> {
        let mut registers = Vec::with_capacity(regs.len());
        for (name, dim) in regs {
            if *dim == 0 {
                return invalid(format!("register {name} has dimension 0"));
            }
            if registers.iter().any(|r: &Register| r.name == *name) {
                return invalid(format!("duplicate register {name}"));
            }
            registers.push(Register {
                name: name.to_string(),
                dim: *dim,
            });
        }
        let mut strides = vec![1; registers.len()];
        let mut total = 1usize;
        for k in (0..registers.len()).rev() {
            strides[k] = total;
            total = total
                .checked_mul(registers[k].dim)
                .ok_or_else(|| PbtError::Overflow("layout dimension".into()))?;
        }
        Ok(Layout {
            registers,
            strides,
            total,
        })
    }

    pub fn len(&self) -> usize {
        self.registers.len()
    }

    pub fn is_empty(&self) -> bool {
        self.registers.is_empty()
    }

    pub fn position(&self, name: &str) -> Result<usize> {
        self.registers
            .iter()
            .position(|r| r.name == name)
            .ok_or_else(|| PbtError::InvalidArgument(format!("no register named {name}")))
    }

    pub fn has(&self, name: &str) -> bool {
        self.registers.iter().any(|r| r.name == name)
    }

    pub fn dim(&self, name: &str) -> Result<usize> {
        Ok(self.registers[self.position(name)?].dim)
    }

    pub fn stride(&self, pos: usize) -> usize {
        self.strides[pos]
    }

    pub fn digit(&self, idx: usize, pos: usize) -> usize {
        (idx / self.strides[pos]) % self.registers[pos].dim
    }

    /// Flat index from `(name, value)` pairs; missing registers are 0.
    pub fn index(&self, values: &[(&str, usize)]) -> Result<usize> {
        let mut idx = 0;
        for (name, v) in values {
            let p = self.position(name)?;
            if *v >= self.registers[p].dim {
                return invalid(format!("value {v} out of range for register {name}"));
            }
            idx += v * self.strides[p];
        }
        Ok(idx)
    }

    /// Every flat index whose registers named in `zero` hold 0, in increasing order.
    pub fn indices_with_zero(&self, zero: &[&str]) -> Result<Vec<usize>> {
        let pos = zero.iter().map(|n| self.position(n)).collect::<Result<Vec<_>>>()?;
        Ok((0..self.total)
            .filter(|&i| pos.iter().all(|&p| self.digit(i, p) == 0))
            .collect())
    }
}

/// Sparse square operator stored by columns.
#[derive(Clone, Debug)]
pub struct SparseOp {
    pub dim: usize,
    cols: Vec<Vec<(usize, C64)>>,
}

const DROP: f64 = 1e-15;

impl SparseOp {
    pub fn identity(dim: usize) -> Self {
        SparseOp {
            dim,
            cols: (0..dim).map(|j| vec![(j, la::ONE)]).collect(),
        }
    }

    pub fn from_dense(m: &CMat) -> Result<Self> {
        if !m.is_square() {
            return invalid("local operator must be square");
        }
        let dim = m.nrows();
        let cols = (0..dim)
            .map(|j| {
                (0..dim)
                    .filter_map(|i| {
                        let z = m[(i, j)];
                        (z.norm() > DROP).then_some((i, z))
                    })
                    .collect()
            })
            .collect();
        Ok(SparseOp { dim, cols })
    }

    /// Permutation operator `|p(j)⟩⟨j|`.
    pub fn permutation(images: &[usize]) -> Result<Self> {
        let mut seen = vec![false; images.len()];
        for &p in images {
            if p >= images.len() || seen[p] {
                return invalid("not a permutation");
            }
            seen[p] = true;
        }
        Ok(SparseOp {
            dim: images.len(),
            cols: images.iter().map(|&p| vec![(p, la::ONE)]).collect(),
        })
    }

    /// Builds an operator column by column from a closure returning the
    /// nonzero entries of each column.
    pub fn from_columns(dim: usize, col: impl Fn(usize) -> Vec<(usize, C64)>) -> Self {
        let cols = (0..dim)
            .map(|j| col(j).into_iter().filter(|(_, z)| z.norm() > DROP).collect())
            .collect();
        SparseOp { dim, cols }
    }

    pub fn adjoint(&self) -> Self {
        let mut cols: Vec<Vec<(usize, C64)>> = vec![Vec::new(); self.dim];
        for (j, col) in self.cols.iter().enumerate() {
            for &(i, z) in col {
                cols[i].push((j, z.conj()));
            }
        }
        for c in cols.iter_mut() {
            c.sort_by_key(|e| e.0);
        }
        SparseOp { dim: self.dim, cols }
    }

    pub fn nnz(&self) -> usize {
        self.cols.iter().map(Vec::len).sum()
    }

    pub fn to_dense(&self) -> CMat {
        let mut m = CMat::zeros(self.dim, self.dim);
        for (j, col) in self.cols.iter().enumerate() {
            for &(i, z) in col {
                m[(i, j)] += z;
            }
        }
        m
    }

    /// `max |U†U − I|` entrywise.
    pub fn unitarity_residual(&self) -> f64 {
        let m = self.to_dense();
        la::max_abs(&(m.adjoint() * &m - la::identity(self.dim)))
    }
}

/// Sparse local operator on `targets`, applied where every control register
/// holds its control value.
#[derive(Clone, Debug)]
pub struct Gate {
    pub label: String,
    pub targets: Vec<String>,
    pub controls: Vec<(String, usize)>,
    pub op: Arc<SparseOp>,
}

impl Gate {
    pub fn new(label: impl Into<String>, targets: &[&str], op: SparseOp) -> Self {
        Gate {
            label: label.into(),
            targets: targets.iter().map(|s| s.to_string()).collect(),
            controls: Vec::new(),
            op: Arc::new(op),
        }
    }

    pub fn controlled(mut self, ctrl: &[(&str, usize)]) -> Self {
        for (n, v) in ctrl {
            self.controls.push((n.to_string(), *v));
        }
        self
    }

    pub fn adjoint(&self) -> Self {
        Gate {
            label: format!("{}†", self.label),
            targets: self.targets.clone(),
            controls: self.controls.clone(),
            op: Arc::new(self.op.adjoint()),
        }
    }
}

/// Gates in application order: `gates[0]` acts first.
#[derive(Clone, Debug, Default)]
pub struct Circuit {
    pub gates: Vec<Gate>,
}

impl Circuit {
    pub fn new() -> Self {
        Circuit { gates: Vec::new() }
    }

    pub fn push(&mut self, g: Gate) -> &mut Self {
        self.gates.push(g);
        self
    }

    /// Appends `other`, which then acts after `self`.
    pub fn then(mut self, other: &Circuit) -> Self {
        self.gates.extend(other.gates.iter().cloned());
        self
    }

    /// Operator product `ops[0] · ops[1] · …`; the last factor acts first.
    pub fn product(ops: &[&Circuit]) -> Self {
        let mut out = Circuit::new();
        for c in ops.iter().rev() {
            out.gates.extend(c.gates.iter().cloned());
        }
        out
    }

    pub fn adjoint(&self) -> Self {
        Circuit {
            gates: self.gates.iter().rev().map(Gate::adjoint).collect(),
        }
    }

    /// Adds `ctrl` to the controls of every gate.
    pub fn controlled(&self, ctrl: &[(&str, usize)]) -> Self {
        Circuit {
            gates: self.gates.iter().cloned().map(|g| g.controlled(ctrl)).collect(),
        }
    }

    pub fn compile(&self, layout: &Layout) -> Result<Compiled> {
        let gates = self
            .gates
            .iter()
            .map(|g| compile_gate(g, layout))
            .collect::<Result<Vec<_>>>()?;
        Ok(Compiled {
            total: layout.total,
            gates,
        })
    }

    /// Every target and control register name touched.
    pub fn registers(&self) -> Vec<String> {
        let mut out: Vec<String> = Vec::new();
        for g in &self.gates {
            for n in g.targets.iter().chain(g.controls.iter().map(|c| &c.0)) {
                if !out.contains(n) {
                    out.push(n.clone());
                }
            }
        }
        out
    }

    /// Largest unitarity residual over the local operators.
    pub fn local_unitarity_residual(&self) -> f64 {
        let mut cache: HashMap<*const SparseOp, f64> = HashMap::new();
        let mut worst: f64 = 0.0;
        for g in &self.gates {
            let key = Arc::as_ptr(&g.op);
            let r = *cache.entry(key).or_insert_with(|| g.op.unitarity_residual());
            worst = worst.max(r);
        }
        worst
    }
}

struct CompiledGate {
    bases: Vec<usize>,
    offsets: Vec<usize>,
    op: Arc<SparseOp>,
}

/// A circuit bound to a layout, ready to act on state vectors.
pub struct Compiled {
    total: usize,
    gates: Vec<CompiledGate>,
}

fn compile_gate(g: &Gate, layout: &Layout) -> Result<CompiledGate> {
    let tpos = g
        .targets
        .iter()
        .map(|n| layout.position(n))
        .collect::<Result<Vec<_>>>()?;
    let tdim: usize = tpos.iter().map(|&p| layout.registers[p].dim).product();
    if tdim != g.op.dim {
        return invalid(format!(
            "gate {} acts on dimension {} but its targets span {}",
            g.label, g.op.dim, tdim
        ));
    }
    let mut offsets = vec![0usize; tdim];
    for (t, off) in offsets.iter_mut().enumerate() {
        let mut rest = t;
        for &p in tpos.iter().rev() {
            let dim = layout.registers[p].dim;
            *off += (rest % dim) * layout.stride(p);
            rest /= dim;
        }
    }
    let mut fixed = vec![None; layout.len()];
    for &p in &tpos {
        fixed[p] = Some(0);
    }
    let mut base0 = 0;
    for (name, v) in &g.controls {
        let p = layout.position(name)?;
        if tpos.contains(&p) {
            return invalid(format!("gate {} is controlled on its own target {name}", g.label));
        }
        if *v >= layout.registers[p].dim {
            // control value never occurs: the gate is the identity
            return Ok(CompiledGate {
                bases: Vec::new(),
                offsets,
                op: g.op.clone(),
            });
        }
        match fixed[p] {
            Some(prev) if prev != *v => {
                return Ok(CompiledGate {
                    bases: Vec::new(),
                    offsets,
                    op: g.op.clone(),
                })
            }
            Some(_) => {}
            None => {
                fixed[p] = Some(*v);
                base0 += v * layout.stride(p);
            }
        }
    }
    let mut bases = vec![base0];
    for (p, f) in fixed.iter().enumerate() {
        if f.is_none() {
            let (dim, stride) = (layout.registers[p].dim, layout.stride(p));
            bases = bases
                .iter()
                .flat_map(|&b| (0..dim).map(move |v| b + v * stride))
                .collect();
        }
    }
    Ok(CompiledGate {
        bases,
        offsets,
        op: g.op.clone(),
    })
}

impl Compiled {
    pub fn dim(&self) -> usize {
        self.total
    }

    pub fn apply(&self, v: &mut [C64]) {
        assert_eq!(v.len(), self.total, "state length does not match layout");
        let mut xin = Vec::new();
        let mut xout = Vec::new();
        for g in &self.gates {
            let t = g.offsets.len();
            xin.resize(t, ZERO);
            xout.resize(t, ZERO);
            for &b in &g.bases {
                let mut any = false;
                for (k, &o) in g.offsets.iter().enumerate() {
                    xin[k] = v[b + o];
                    any |= xin[k] != ZERO;
                }
                if !any {
                    continue;
                }
                xout.iter_mut().for_each(|z| *z = ZERO);
                for (j, col) in g.op.cols.iter().enumerate() {
                    let x = xin[j];
                    if x == ZERO {
                        continue;
                    }
                    for &(i, z) in col {
                        xout[i] += z * x;
                    }
                }
                for (k, &o) in g.offsets.iter().enumerate() {
                    v[b + o] = xout[k];
                }
            }
        }
    }

    /// `U |inputs[c]⟩` for every column, in parallel.
    pub fn columns(&self, inputs: &[usize]) -> Vec<Vec<C64>> {
        inputs
            .par_iter()
            .map(|&i| {
                let mut v = vec![ZERO; self.total];
                v[i] = la::ONE;
                self.apply(&mut v);
                v
            })
            .collect()
    }

    /// `⟨outputs[r]| U |inputs[c]⟩`.
    pub fn block(&self, outputs: &[usize], inputs: &[usize]) -> CMat {
        let cols = self.columns(inputs);
        CMat::from_fn(outputs.len(), inputs.len(), |r, c| cols[c][outputs[r]])
    }

    /// Full matrix; guarded by the dense limit.
    pub fn to_dense(&self) -> Result<CMat> {
        crate::schur::guard("dense circuit", self.total)?;
        let all: Vec<usize> = (0..self.total).collect();
        Ok(self.block(&all, &all))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn controlled_swap_matches_dense() {
        let layout = Layout::new(&[("a", 2), ("b", 3), ("c", 3)]).unwrap();
        let mut swap = vec![0; 9];
        for x in 0..3 {
            for y in 0..3 {
                swap[x * 3 + y] = y * 3 + x;
            }
        }
        let mut c = Circuit::new();
        c.push(Gate::new("swap", &["b", "c"], SparseOp::permutation(&swap).unwrap()).controlled(&[("a", 1)]));
        let u = c.compile(&layout).unwrap().to_dense().unwrap();
        for i in 0..18 {
            let (a, b, cc) = (i / 9, (i / 3) % 3, i % 3);
            let j = if a == 1 { a * 9 + cc * 3 + b } else { i };
            assert_eq!(u[(j, i)], la::ONE);
        }
        assert!(la::is_unitary(&u, 1e-15));
    }

    #[test]
    fn adjoint_inverts() {
        let layout = Layout::new(&[("a", 2), ("b", 2)]).unwrap();
        let s = 0.5f64.sqrt();
        let h = CMat::from_row_slice(2, 2, &[la::c(s), la::c(s), la::c(s), la::c(-s)]);
        let mut c = Circuit::new();
        c.push(Gate::new("h", &["a"], SparseOp::from_dense(&h).unwrap()));
        c.push(Gate::new("cx", &["b"], SparseOp::permutation(&[1, 0]).unwrap()).controlled(&[("a", 1)]));
        let both = c.clone().then(&c.adjoint());
        let u = both.compile(&layout).unwrap().to_dense().unwrap();
        assert!(la::max_abs(&(u - la::identity(4))) < 1e-15);
    }
}
