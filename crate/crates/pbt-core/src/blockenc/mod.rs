//! Unitary block-encodings of the Kraus operators `√Π_i`, assembled from
//! coefficient-injection unitaries, Schur transforms and permutations, and the
//! port-controlled unitary used for the Naimark dilation.
//!
//! Every encoding is a matrix-free [`Circuit`] on a named-register
//! [`Layout`]. The encoded matrix is read off by applying the circuit to the
//! relevant basis columns, so the full unitary is never formed.

mod assembly;
pub mod circuit;
mod naimark;

use std::sync::Arc;

use serde::Serialize;

use crate::error::{check, invalid, Result};
use crate::la::{self, CMat};
use crate::twisted::AlphaInfo;
use crate::Partition;

pub use assembly::{CopyChoice, Dims, Encoder, KrausEncoding, Options, PMatrices, Padding, Variant};
pub use circuit::{Circuit, Compiled, Gate, Layout, Register, SparseOp};
pub use la::unitary_complete;
pub use naimark::{naimark_uc, Naimark};

/// `(C(α,ν), C'(α,ν))`.
pub fn coefficients(n: usize, d: usize, alpha: &Partition, nu: &Partition) -> Result<(f64, f64)> {
    let info = AlphaInfo::new(n, d, alpha)?;
    let v = info
        .children
        .iter()
        .position(|c| c == nu)
        .ok_or_else(|| crate::PbtError::InvalidArgument(format!("{nu} is not an admissible child of {alpha}")))?;
    Ok(coefficients_of(&info, v))
}

pub(crate) fn coefficients_of(info: &AlphaInfo, v: usize) -> (f64, f64) {
    let nda = ((info.n - 1) * info.d_alpha) as f64;
    let (dn, lam) = (info.d_nu[v] as f64, info.lambda[v]);
    let c = (nda - info.d_theta as f64).powf(-0.25) * nda.powf(-0.75) * dn / lam.sqrt();
    let cp = dn / (nda * lam);
    (c, cp)
}

/// Named ancilla register (possibly a virtual sub-register) with its dimension.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct Ancilla {
    pub name: String,
    pub dim: usize,
}

impl Ancilla {
    pub fn new(name: &str, dim: usize) -> Self {
        Ancilla {
            name: name.into(),
            dim,
        }
    }
}

/// `scale · ⟨outputs| U |inputs⟩ ≈ target` within `error_bound`, where the
/// index lists hold every ancilla at 0.
#[derive(Clone, Debug)]
pub struct BlockEncoding {
    pub name: String,
    pub layout: Arc<Layout>,
    pub circuit: Circuit,
    pub ancillas: Vec<Ancilla>,
    pub inputs: Vec<usize>,
    pub outputs: Vec<usize>,
    pub target: CMat,
    pub scale: f64,
    pub error_bound: f64,
}

impl BlockEncoding {
    pub fn ancilla_dim(&self) -> usize {
        self.ancillas.iter().map(|a| a.dim).product()
    }

    pub fn ancilla_qubits(&self) -> f64 {
        self.ancillas.iter().map(|a| (a.dim as f64).log2()).sum()
    }

    pub fn target_dim(&self) -> usize {
        self.inputs.len()
    }

    /// Post-selected block `⟨0|U|0⟩`.
    pub fn block(&self) -> Result<CMat> {
        let c = self.circuit.compile(&self.layout)?;
        Ok(c.block(&self.outputs, &self.inputs))
    }

    /// `‖A − scale·⟨0|U|0⟩‖` in operator norm.
    pub fn residual(&self) -> Result<f64> {
        let b = self.block()?;
        Ok(la::op_norm(&(&self.target - b * la::c(self.scale))))
    }

    /// Recomputes the residual and checks it against the declared bound.
    pub fn verify(&self) -> Result<f64> {
        let r = self.residual()?;
        check(format!("block-encoding {}", self.name), r, self.error_bound)?;
        let norm = la::op_norm(&self.target);
        check(
            format!("scale of {} covers the target norm", self.name),
            (norm - self.error_bound - self.scale).max(0.0),
            1e-12,
        )?;
        Ok(r)
    }

    pub fn adjoint(&self) -> BlockEncoding {
        BlockEncoding {
            name: format!("{}†", self.name),
            layout: self.layout.clone(),
            circuit: self.circuit.adjoint(),
            ancillas: self.ancillas.clone(),
            inputs: self.outputs.clone(),
            outputs: self.inputs.clone(),
            target: self.target.adjoint(),
            scale: self.scale,
            error_bound: self.error_bound,
        }
    }

    /// Exact unitary (scale 1, no ancilla).
    pub fn unitary(name: &str, layout: Arc<Layout>, circuit: Circuit, basis: Vec<usize>, target: CMat) -> Self {
        BlockEncoding {
            name: name.into(),
            layout,
            circuit,
            ancillas: Vec::new(),
            inputs: basis.clone(),
            outputs: basis,
            target,
            scale: 1.0,
            error_bound: 0.0,
        }
    }
}

/// Encoding of `AB` from encodings of `A` and `B` on disjoint ancillas:
/// scale `αβ`, error `α δ_B + β δ_A`.
pub fn product(a: &BlockEncoding, b: &BlockEncoding) -> Result<BlockEncoding> {
    if !Arc::ptr_eq(&a.layout, &b.layout) && a.layout.registers != b.layout.registers {
        return invalid("product of encodings on different layouts");
    }
    if a.inputs != b.outputs {
        return invalid(format!("{} cannot follow {}: system spaces differ", a.name, b.name));
    }
    if a.ancillas.iter().any(|x| b.ancillas.iter().any(|y| y.name == x.name)) {
        return invalid(format!("{} and {} share an ancilla", a.name, b.name));
    }
    let mut ancillas = a.ancillas.clone();
    ancillas.extend(b.ancillas.iter().cloned());
    Ok(BlockEncoding {
        name: format!("{}·{}", a.name, b.name),
        layout: a.layout.clone(),
        circuit: Circuit::product(&[&a.circuit, &b.circuit]),
        ancillas,
        inputs: b.inputs.clone(),
        outputs: a.outputs.clone(),
        target: &a.target * &b.target,
        scale: a.scale * b.scale,
        error_bound: a.scale * b.error_bound + b.scale * a.error_bound,
    })
}

/// One row of the scale / ancilla ledger.
#[derive(Clone, Debug, Serialize)]
pub struct LedgerRow {
    pub matrix: String,
    pub encoding: String,
    pub scale: f64,
    pub scale_formula: f64,
    pub ancilla_qubits: f64,
    pub ancilla_formula: f64,
    pub error_bound: f64,
    pub residual: f64,
}

impl LedgerRow {
    pub fn matches(&self) -> bool {
        (self.scale - self.scale_formula).abs() <= 1e-12 * self.scale_formula.max(1.0)
            && (self.ancilla_qubits - self.ancilla_formula).abs() <= 1e-9
    }
}
