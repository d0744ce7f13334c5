//! Oblivious amplitude amplification of the port-controlled encoding.

use std::f64::consts::PI;
use std::sync::Arc;

use serde::Serialize;

use crate::blockenc::{self, Circuit, Compiled, Encoder, Gate, Layout, Naimark, Options, SparseOp};
use crate::error::{check, invalid, Result};
use crate::la::{self, CMat, C64, ZERO};
use crate::pbt;
use crate::twisted::TwistedSchur;

#[derive(Clone, Debug, Serialize)]
pub struct AmplificationPlan {
    pub m: usize,
    pub phases: Vec<f64>,
    pub scale_total: f64,
    /// Per-operator scale after inflation: `1 / (√(n-1) sin(π/2m))`.
    pub inflated_scale: f64,
    pub ports: usize,
}

impl AmplificationPlan {
    /// `√(n-1) · inflated_scale = 1 / sin(π/2m)`.
    pub fn inflated_total(&self) -> f64 {
        self.inflated_scale * (self.ports as f64).sqrt()
    }
}

/// Smallest odd `m` with `sin(π/2m) ≤ 1/scale_total`.
pub fn plan(scale_total: f64, ports: usize) -> Result<AmplificationPlan> {
    if !(scale_total >= 1.0) || !scale_total.is_finite() {
        return invalid(format!("scale must be at least 1, got {scale_total}"));
    }
    if ports == 0 {
        return invalid("need at least one port");
    }
    let mut m = 1usize;
    // relative slack absorbs rounding in products like √2·√2
    while (PI / (2 * m) as f64).sin() * scale_total > 1.0 + 1e-12 {
        m += 2;
    }
    let mut phases = vec![PI / 2.0; m];
    phases[0] = (1.0 - m as f64) * PI / 2.0;
    let inflated_scale = 1.0 / ((ports as f64).sqrt() * (PI / (2 * m) as f64).sin());
    Ok(AmplificationPlan {
        m,
        phases,
        scale_total,
        inflated_scale,
        ports,
    })
}

/// Registers that must all hold 0.
#[derive(Clone, Debug)]
pub struct Projector {
    positions: Vec<usize>,
    strides: Vec<(usize, usize)>,
}

impl Projector {
    pub fn new(layout: &Layout, zero: &[String]) -> Result<Self> {
        let positions = zero.iter().map(|n| layout.position(n)).collect::<Result<Vec<_>>>()?;
        let strides = positions
            .iter()
            .map(|&p| (layout.stride(p), layout.registers[p].dim))
            .collect();
        Ok(Projector { positions, strides })
    }

    pub fn contains(&self, idx: usize) -> bool {
        self.strides.iter().all(|&(s, d)| (idx / s) % d == 0)
    }

    pub fn registers(&self) -> &[usize] {
        &self.positions
    }
}

/// `e^{iφ(2P − I)} = cos φ · I + i sin φ · (2P − I)`.
pub fn reflect_phase(v: &mut [C64], p: &Projector, phi: f64) {
    let (c, s) = (phi.cos(), phi.sin());
    let inside = C64::new(c, s);
    let outside = C64::new(c, -s);
    for (idx, z) in v.iter_mut().enumerate() {
        if *z != ZERO {
            *z *= if p.contains(idx) { inside } else { outside };
        }
    }
}

/// A unitary `V` with `Π̃ V Π ≈ W / scale_total`.
#[derive(Clone, Debug)]
pub struct Dilation {
    pub name: String,
    pub n: usize,
    pub d: usize,
    pub layout: Arc<Layout>,
    pub v: Circuit,
    /// Registers held at 0 by `Π` (port register included).
    pub in_zero: Vec<String>,
    /// Registers held at 0 by `Π̃`.
    pub out_zero: Vec<String>,
    pub inputs: Vec<usize>,
    /// Per port, the output indices matching `inputs`.
    pub outputs: Vec<Vec<usize>>,
    pub scale_total: f64,
    pub epsilon: f64,
}

impl Dilation {
    pub fn from_naimark(nk: &Naimark) -> Self {
        let mut in_zero = vec!["I".to_string()];
        in_zero.extend(nk.ancillas.iter().cloned());
        Dilation {
            name: "honest".into(),
            n: nk.n,
            d: nk.d,
            layout: nk.layout.clone(),
            v: nk.circuit(),
            in_zero,
            out_zero: nk.ancillas.clone(),
            inputs: nk.inputs.clone(),
            outputs: nk.outputs.clone(),
            scale_total: nk.alpha * ((nk.n - 1) as f64).sqrt(),
            epsilon: nk.epsilon,
        }
    }

    /// Stacked `Π̃ V Π` over ports.
    pub fn block(&self) -> Result<CMat> {
        let c = self.v.compile(&self.layout)?;
        Ok(stack(&c.columns(&self.inputs), &self.outputs))
    }
}

fn stack(cols: &[Vec<C64>], outputs: &[Vec<usize>]) -> CMat {
    let rows: Vec<usize> = outputs.iter().flatten().copied().collect();
    CMat::from_fn(rows.len(), cols.len(), |r, k| cols[k][rows[r]])
}

/// Stacked `Σ_i |i⟩ ⊗ K_i`.
pub fn stacked_isometry(kraus: &[CMat]) -> CMat {
    let dim = kraus[0].nrows();
    let mut w = CMat::zeros(dim * kraus.len(), kraus[0].ncols());
    for (i, k) in kraus.iter().enumerate() {
        w.rows_mut(i * dim, dim).copy_from(k);
    }
    w
}

/// Compressed dilation: `U(i) = [[A/s, √(I − A²/s²)], [√(I − A²/s²), −A/s]]`
/// with `A = √Π_i` and `s = √d`, controlled on the port register.
pub fn compressed_dilation(tw: &TwistedSchur, dense_kraus: &[CMat]) -> Result<Dilation> {
    let (n, d) = (tw.n, tw.d);
    let dim = tw.dim();
    let s = (d as f64).sqrt();
    let kd = n - 1;
    let layout = Arc::new(Layout::new(&[("I", kd), ("S", 2), ("D", 2), ("X", dim)])?);
    let mut v = Circuit::new();
    v.push(port_prep(kd, n - 1)?);
    let mut eps: f64 = 0.0;
    for i in 1..n {
        let a = pbt::kraus_from_twisted(tw, i)? / la::c(s);
        eps = eps.max(la::op_norm(&(&a * la::c(s) - &dense_kraus[i - 1])) / s);
        let b = la::psd_sqrt(&(la::identity(dim) - &a * &a));
        let mut u = CMat::zeros(2 * dim, 2 * dim);
        u.view_mut((0, 0), (dim, dim)).copy_from(&a);
        u.view_mut((0, dim), (dim, dim)).copy_from(&b);
        u.view_mut((dim, 0), (dim, dim)).copy_from(&b);
        u.view_mut((dim, dim), (dim, dim)).copy_from(&(-&a));
        check("compressed dilation unitary", la::max_abs(&(u.adjoint() * &u - la::identity(2 * dim))), 1e-9)?;
        v.push(Gate::new(format!("U({i})"), &["D", "X"], SparseOp::from_dense(&u)?).controlled(&[("I", i - 1)]));
    }
    let inputs: Vec<usize> = (0..dim).collect();
    let stride = layout.stride(0);
    let outputs = (0..n - 1).map(|i| inputs.iter().map(|&x| x + i * stride).collect()).collect();
    Ok(Dilation {
        name: "compressed".into(),
        n,
        d,
        layout,
        v,
        in_zero: vec!["I".into(), "S".into(), "D".into()],
        out_zero: vec!["S".into(), "D".into()],
        inputs,
        outputs,
        scale_total: s * ((n - 1) as f64).sqrt(),
        epsilon: eps + 1e-12,
    })
}

/// `U₀` on a port register of dimension `kd`: `U₀|0⟩ = Σ_{i<ports} |i⟩/√ports`.
pub fn port_prep(kd: usize, ports: usize) -> Result<Gate> {
    let mut row = CMat::zeros(1, kd);
    for k in 0..ports {
        row[(0, k)] = la::c(1.0 / (ports as f64).sqrt());
    }
    Ok(Gate::new("U_0", &["I"], SparseOp::from_dense(&la::unitary_complete(&row)?.adjoint())?))
}

/// `Ṽ` ready to act on state vectors.
pub struct Amplified {
    pub plan: AmplificationPlan,
    v: Compiled,
    vdag: Compiled,
    pi_in: Projector,
    pi_out: Projector,
}

/// Builds `Ṽ` for `V` deflated by a rotation on `S` to the scale
/// `1/sin(π/2m)`.
pub fn amplified_v(dil: &Dilation, plan: &AmplificationPlan) -> Result<Amplified> {
    let total = plan.inflated_total();
    if total < dil.scale_total * (1.0 - 1e-12) {
        return invalid("inflated scale below the encoding scale");
    }
    let cos = (dil.scale_total / total).min(1.0);
    let sin = (1.0 - cos * cos).max(0.0).sqrt();
    let rot = CMat::from_row_slice(2, 2, &[la::c(cos), la::c(-sin), la::c(sin), la::c(cos)]);
    let mut v = Circuit::new();
    v.push(Gate::new("R_S", &["S"], SparseOp::from_dense(&rot)?));
    let v = v.then(&dil.v);
    Ok(Amplified {
        plan: plan.clone(),
        v: v.compile(&dil.layout)?,
        vdag: v.adjoint().compile(&dil.layout)?,
        pi_in: Projector::new(&dil.layout, &dil.in_zero)?,
        pi_out: Projector::new(&dil.layout, &dil.out_zero)?,
    })
}

impl Amplified {
    /// `Ṽ = (−1)^{(m−1)/2} e^{iφ₁(2Π̃−I)} V ∏_j (e^{iφ_{2j}(2Π−I)} V† e^{iφ_{2j+1}(2Π̃−I)} V)`.
    pub fn apply(&self, state: &mut [C64]) {
        let m = self.plan.m;
        let ph = &self.plan.phases;
        for j in (1..=(m - 1) / 2).rev() {
            self.v.apply(state);
            reflect_phase(state, &self.pi_out, ph[2 * j]);
            self.vdag.apply(state);
            reflect_phase(state, &self.pi_in, ph[2 * j - 1]);
        }
        self.v.apply(state);
        reflect_phase(state, &self.pi_out, ph[0]);
        if ((m - 1) / 2) % 2 == 1 {
            state.iter_mut().for_each(|z| *z = -*z);
        }
    }

    pub fn columns(&self, inputs: &[usize]) -> Vec<Vec<C64>> {
        use rayon::prelude::*;
        inputs
            .par_iter()
            .map(|&i| {
                let mut s = vec![ZERO; self.v.dim()];
                s[i] = la::ONE;
                self.apply(&mut s);
                s
            })
            .collect()
    }
}

/// Trace norm of `Σ_c w_c (|a_c⟩⟨a_c| − |b_c⟩⟨b_c|)`.
fn mixed_trace_distance(a: &[Vec<C64>], b: &[Vec<C64>], w: &[f64]) -> f64 {
    let dim = a[0].len();
    let k = a.len();
    let mut all = CMat::zeros(dim, 2 * k);
    for (c, v) in a.iter().chain(b.iter()).enumerate() {
        for (r, z) in v.iter().enumerate() {
            all[(r, c)] = *z;
        }
    }
    let q = la::pivoted_gram_schmidt(&CMat::zeros(dim, 0), &all, 2 * k, 1e-13);
    let coords = q.adjoint() * &all;
    let r = q.ncols();
    let mut m = CMat::zeros(r, r);
    for c in 0..k {
        let ca = coords.column(c);
        let cb = coords.column(k + c);
        m += (ca * ca.adjoint() - cb * cb.adjoint()) * la::c(w[c]);
    }
    la::trace_norm_hermitian(&m)
}

#[derive(Clone, Debug, Serialize)]
pub struct EndToEnd {
    pub variant: String,
    pub m: usize,
    pub scale_total: f64,
    pub inflated_total: f64,
    pub epsilon: f64,
    /// `‖W/scale − Π̃VΠ‖`.
    pub encoding_error: f64,
    /// `‖W − Π̃ṼΠ‖`.
    pub isometry_error: f64,
    pub bound: f64,
    /// `‖ρ_ref − Ṽ ρ_ini Ṽ†‖₁`.
    pub discrepancy: f64,
    /// Weight left outside the all-zero ancilla subspace.
    pub leakage: f64,
    /// Largest deviation of `‖Ṽ|x⟩‖` from 1.
    pub norm_drift: f64,
    pub probabilities: Vec<f64>,
    pub probabilities_dense: Vec<f64>,
}

/// Runs the amplified engine on `ρ_A = I/d^{n-1} ⊗ η` and compares with the
/// dense isometry `W = Σ_i |i⟩ ⊗ √Π_i`.
pub fn end_to_end_with(dil: &Dilation, dense_kraus: &[CMat], eta: &CMat) -> Result<EndToEnd> {
    let encoding_error = encoding_error(dil, dense_kraus)?;
    let (pl, cols) = amplified_columns(dil)?;
    report_from(dil, &pl, &cols, encoding_error, dense_kraus, eta)
}

/// `‖W/scale − Π̃VΠ‖`, checked against the dilation's `ε`.
pub fn encoding_error(dil: &Dilation, dense_kraus: &[CMat]) -> Result<f64> {
    let w = stacked_isometry(dense_kraus);
    let err = la::op_norm(&(w / la::c(dil.scale_total) - dil.block()?));
    check("Naimark block", err, dil.epsilon)?;
    Ok(err)
}

/// Plans the amplification of `dil` and applies `Ṽ` to every input.
pub fn amplified_columns(dil: &Dilation) -> Result<(AmplificationPlan, Vec<Vec<C64>>)> {
    let pl = plan(dil.scale_total, dil.n - 1)?;
    let amp = amplified_v(dil, &pl)?;
    let cols = amp.columns(&dil.inputs);
    Ok((pl, cols))
}

pub(crate) fn report_from(
    dil: &Dilation,
    pl: &AmplificationPlan,
    cols: &[Vec<C64>],
    encoding_error: f64,
    dense_kraus: &[CMat],
    eta: &CMat,
) -> Result<EndToEnd> {
    let (n, d) = (dil.n, dil.d);
    let w = stacked_isometry(dense_kraus);
    let got = stack(&cols, &dil.outputs);
    let isometry_error = la::op_norm(&(&w - &got));
    let bound = 2.0 * pl.m as f64 * dil.epsilon;
    let norm_drift = cols
        .iter()
        .map(|c| (c.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt() - 1.0).abs())
        .fold(0.0, f64::max);

    // ρ_A eigenbasis: maximally mixed on n-1 qudits times the eigenvectors of η
    let (vals, vecs) = la::hermitian_eigen(eta);
    let base = d.pow((n - 1) as u32);
    let dim = base * d;
    let mut weights = Vec::new();
    let mut ref_states = Vec::new();
    let mut amp_states = Vec::new();
    let total = dil.layout.total;
    let out_rows: Vec<usize> = dil.outputs.iter().flatten().copied().collect();
    for h in 0..base {
        for (e, &lam) in vals.iter().enumerate() {
            if lam <= 1e-14 {
                continue;
            }
            let mut x = la::CVec::zeros(dim);
            for a in 0..d {
                x[h * d + a] = vecs[(a, e)];
            }
            let wx = &w * &x;
            let mut r = vec![ZERO; total];
            for (k, &row) in out_rows.iter().enumerate() {
                r[row] = wx[k];
            }
            let mut b = vec![ZERO; total];
            for (k, col) in cols.iter().enumerate() {
                if x[k] != ZERO {
                    for (t, z) in col.iter().enumerate() {
                        b[t] += z * x[k];
                    }
                }
            }
            weights.push(lam / base as f64);
            ref_states.push(r);
            amp_states.push(b);
        }
    }
    let discrepancy = mixed_trace_distance(&ref_states, &amp_states, &weights);
    let pi_out = Projector::new(&dil.layout, &dil.out_zero)?;
    let leakage = 1.0
        - amp_states
            .iter()
            .zip(&weights)
            .map(|(b, wt)| {
                wt * b
                    .iter()
                    .enumerate()
                    .filter(|(t, _)| pi_out.contains(*t))
                    .map(|(_, z)| z.norm_sqr())
                    .sum::<f64>()
            })
            .sum::<f64>();
    let ipos = dil.layout.position("I")?;
    let probabilities: Vec<f64> = (0..n - 1)
        .map(|i| {
            amp_states
                .iter()
                .zip(&weights)
                .map(|(b, wt)| {
                    wt * b
                        .iter()
                        .enumerate()
                        .filter(|(t, _)| dil.layout.digit(*t, ipos) == i)
                        .map(|(_, z)| z.norm_sqr())
                        .sum::<f64>()
                })
                .sum()
        })
        .collect();
    let rho_a = la::kron(&(la::identity(base) / la::c(base as f64)), eta);
    let probabilities_dense = dense_kraus
        .iter()
        .map(|k| (k.adjoint() * k * &rho_a).trace().re)
        .collect();
    Ok(EndToEnd {
        variant: dil.name.clone(),
        m: pl.m,
        scale_total: dil.scale_total,
        inflated_total: pl.inflated_total(),
        epsilon: dil.epsilon,
        encoding_error,
        isometry_error,
        bound,
        discrepancy,
        leakage,
        norm_drift,
        probabilities,
        probabilities_dense,
    })
}

/// Which dilation [`end_to_end`] amplifies.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum Engine {
    /// The full register-level `U^c U₀`.
    Honest,
    /// One-qubit dilation at scale `√d`.
    Compressed,
}

/// Honest dilation of `(n, d)` from the block-encoding pipeline.
pub fn honest_dilation(n: usize, d: usize, opts: Options) -> Result<Dilation> {
    let tw = TwistedSchur::build_seeded(n, d, opts.seed)?;
    let enc = Encoder::new(n, d, opts)?;
    let encs = (1..n).map(|i| enc.encode_kraus(&tw, i)).collect::<Result<Vec<_>>>()?;
    let nk = blockenc::naimark_uc(&enc, &encs)?;
    Ok(Dilation::from_naimark(&nk))
}

/// End-to-end comparison with `η = I/d`.
pub fn end_to_end(n: usize, d: usize, engine: Engine) -> Result<EndToEnd> {
    let povm = pbt::pgm_dense(n, d)?;
    let dense = pbt::kraus_dense(&povm);
    let dil = match engine {
        Engine::Honest => honest_dilation(n, d, Options::default())?,
        Engine::Compressed => compressed_dilation(&TwistedSchur::build(n, d)?, &dense)?,
    };
    end_to_end_with(&dil, &dense, &(la::identity(d) / la::c(d as f64)))
}
