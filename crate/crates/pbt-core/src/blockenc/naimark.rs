use std::sync::Arc;

use super::assembly::{Encoder, KrausEncoding};
use super::circuit::{Circuit, Gate, Layout, SparseOp};
use crate::error::{invalid, Result};
use crate::la::{self, CMat};

/// Port-controlled `U^c = Σ_i |i⟩⟨i| ⊗ U^c(i)` (identity on unused port
/// values) and the port preparation `U₀`.
#[derive(Clone, Debug)]
pub struct Naimark {
    pub n: usize,
    pub d: usize,
    pub layout: Arc<Layout>,
    pub uc: Circuit,
    pub u0: Circuit,
    /// Common scale `α` of every `U^c(i)`.
    pub alpha: f64,
    /// Bound on `‖W/(α√(n-1)) − Π̃ U^c U₀ Π‖`.
    pub epsilon: f64,
    /// Registers other than the port register that are ancillas.
    pub ancillas: Vec<String>,
    /// Physical inputs with every ancilla and the port register at 0.
    pub inputs: Vec<usize>,
    /// `outputs[i-1]`: physical states with the port register at `i-1`.
    pub outputs: Vec<Vec<usize>>,
}

pub fn naimark_uc(enc: &Encoder, encodings: &[KrausEncoding]) -> Result<Naimark> {
    let n = enc.n;
    if encodings.len() != n - 1 {
        return invalid(format!("need {} encodings, got {}", n - 1, encodings.len()));
    }
    for (k, e) in encodings.iter().enumerate() {
        if e.i != k + 1 || !Arc::ptr_eq(&e.encoding.layout, &enc.layout) {
            return invalid("encodings must be ordered by port and share the encoder layout");
        }
    }
    let kd = enc.dims.k;
    let mut regs: Vec<(&str, usize)> = vec![("I", kd), ("S", 2)];
    regs.extend(enc.layout.registers.iter().map(|r| (r.name.as_str(), r.dim)));
    let layout = Arc::new(Layout::new(&regs)?);
    crate::schur::guard("Naimark register layout", layout.total)?;

    let mut uc = Circuit::new();
    for e in encodings {
        uc = uc.then(&e.encoding.circuit.controlled(&[("I", e.i - 1)]));
    }
    let s = 1.0 / ((n - 1) as f64).sqrt();
    let mut row = CMat::zeros(1, kd);
    for k in 0..n - 1 {
        row[(0, k)] = la::c(s);
    }
    // U₀|0⟩ is the uniform superposition: the adjoint of a completion of that row
    let u0m = la::unitary_complete(&row)?.adjoint();
    let mut u0 = Circuit::new();
    u0.push(Gate::new("U_0", &["I"], SparseOp::from_dense(&u0m)?));

    let alpha = encodings[0].encoding.scale;
    let tol = 1e-12 * alpha.max(1.0);
    if encodings.iter().any(|e| (e.encoding.scale - alpha).abs() > tol) {
        return invalid("encodings disagree on their scale");
    }
    let worst = encodings.iter().map(|e| e.encoding.error_bound).fold(0.0, f64::max);
    let epsilon = worst / alpha + enc.opts.leaf_tol;

    // prepending registers held at 0 leaves flat indices unchanged
    let inputs = enc.physical_states().to_vec();
    let stride = layout.stride(layout.position("I")?);
    let outputs = (0..n - 1)
        .map(|i| inputs.iter().map(|&p| p + i * stride).collect())
        .collect();
    let mut ancillas: Vec<String> = encodings[0].encoding.ancillas.iter().map(|a| a.name.clone()).collect();
    ancillas.push("S".into());
    Ok(Naimark {
        n,
        d: enc.d,
        layout,
        uc,
        u0,
        alpha,
        epsilon,
        ancillas,
        inputs,
        outputs,
    })
}

impl Naimark {
    /// `U^c U₀`.
    pub fn circuit(&self) -> Circuit {
        self.u0.clone().then(&self.uc)
    }

    /// Stacked blocks `⟨i, 0| U^c U₀ |0, 0⟩` over ports.
    pub fn block(&self) -> Result<CMat> {
        let c = self.circuit().compile(&self.layout)?;
        let cols = c.columns(&self.inputs);
        let rows: Vec<usize> = self.outputs.iter().flatten().copied().collect();
        Ok(CMat::from_fn(rows.len(), self.inputs.len(), |r, k| cols[k][rows[r]]))
    }
}
