//! Protocol runs: Alice applies the Naimark isometry to `Φ_AB ⊗ η`, the port
//! register is read out and Bob keeps port `i`.

use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::amplify::{self, Dilation};
use crate::blockenc::Options;
use crate::error::{check, invalid, Result};
use crate::la::{self, CMat, C64, ZERO};
use crate::pbt::{self, Povm};
use crate::twisted::TwistedSchur;

#[derive(Clone, Debug)]
pub enum InputState {
    Density(CMat),
    /// `A_n` is half of `|φ₊⟩` shared with a reference system.
    EntangledWithReference,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Engine {
    DenseW,
    Amplified(amplify::Engine),
}

impl Engine {
    pub fn name(&self) -> &'static str {
        match self {
            Engine::DenseW => "dense-W",
            Engine::Amplified(amplify::Engine::Honest) => "amplified-honest",
            Engine::Amplified(amplify::Engine::Compressed) => "amplified-compressed",
        }
    }
}

impl std::str::FromStr for Engine {
    type Err = crate::PbtError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "dense" | "dense-W" => Ok(Engine::DenseW),
            "amplified" | "amplified-honest" => Ok(Engine::Amplified(amplify::Engine::Honest)),
            "compressed" | "amplified-compressed" => Ok(Engine::Amplified(amplify::Engine::Compressed)),
            _ => invalid(format!("unknown engine {s:?} (dense, amplified, compressed)")),
        }
    }
}

#[derive(Clone, Debug)]
pub struct ProtocolRun {
    pub n: usize,
    pub d: usize,
    pub input_state: InputState,
    pub engine: Engine,
    pub seed: u64,
}

impl ProtocolRun {
    pub fn new(n: usize, d: usize, input_state: InputState, engine: Engine) -> Self {
        ProtocolRun {
            n,
            d,
            input_state,
            engine,
            seed: 0,
        }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct Report {
    pub n: usize,
    pub d: usize,
    pub engine: String,
    pub probabilities: Vec<f64>,
    pub fidelity: f64,
    pub discrepancy: f64,
    /// Normalized state of Bob's port per outcome (joint with the reference in
    /// entangled mode).
    #[serde(skip)]
    pub outputs: Vec<CMat>,
}

/// `K_i |x⟩` for every port and every basis state of Alice's qudits.
struct Branches {
    cols: Vec<Vec<Vec<C64>>>,
}

impl Branches {
    fn dense(kraus: &[CMat]) -> Self {
        let cols = kraus
            .iter()
            .map(|k| (0..k.ncols()).map(|x| k.column(x).iter().copied().collect()).collect())
            .collect();
        Branches { cols }
    }

    fn amplified(dil: &Dilation, full: &[Vec<C64>]) -> Result<Self> {
        let ipos = dil.layout.position("I")?;
        let cols = (0..dil.n - 1)
            .map(|i| {
                full.iter()
                    .map(|v| {
                        v.iter()
                            .enumerate()
                            .filter(|(t, _)| dil.layout.digit(*t, ipos) == i)
                            .map(|(_, z)| *z)
                            .collect()
                    })
                    .collect()
            })
            .collect();
        Ok(Branches { cols })
    }

    /// `K_i (|h⟩ ⊗ |v⟩)`.
    fn apply(&self, i: usize, d: usize, h: usize, v: &[C64]) -> Vec<C64> {
        let cols = &self.cols[i];
        let mut out = vec![ZERO; cols[0].len()];
        for (a, &va) in v.iter().enumerate() {
            if va != ZERO {
                for (o, z) in out.iter_mut().zip(&cols[h * d + a]) {
                    *o += z * va;
                }
            }
        }
        out
    }
}

fn dot(a: &[C64], b: &[C64]) -> C64 {
    a.iter().zip(b).map(|(x, y)| x.conj() * y).sum()
}

/// Unnormalized state of port `i` (times an optional reference) given outcome `i`:
/// `Σ ⟨K x(h',r')|K x(h,r)⟩ |h_i,r⟩⟨h'_i,r'|` over `h, h'` agreeing off port `i`.
fn port_state(br: &Branches, n: usize, d: usize, i: usize, inputs: &[(f64, Vec<C64>)], rdim: usize) -> CMat {
    let base = d.pow((n - 1) as u32);
    let pos = d.pow((n - 2 - i) as u32);
    let mut rho = CMat::zeros(d * rdim, d * rdim);
    for g in 0..base {
        if (g / pos) % d != 0 {
            continue;
        }
        for (w, v) in inputs {
            // v holds rdim consecutive kets on A_n, one per reference index
            let kets: Vec<Vec<Vec<C64>>> = (0..d)
                .map(|b| (0..rdim).map(|r| br.apply(i, d, g + b * pos, &v[r * d..(r + 1) * d])).collect())
                .collect();
            for b in 0..d {
                for r in 0..rdim {
                    for b2 in 0..d {
                        for r2 in 0..rdim {
                            rho[(b * rdim + r, b2 * rdim + r2)] += dot(&kets[b2][r2], &kets[b][r]) * w;
                        }
                    }
                }
            }
        }
    }
    rho / la::c(base as f64)
}

fn check_run(spec: &ProtocolRun) -> Result<()> {
    if spec.n < 2 || spec.d < 2 {
        return invalid(format!("need n >= 2 and d >= 2, got n={}, d={}", spec.n, spec.d));
    }
    if let InputState::Density(eta) = &spec.input_state {
        if eta.nrows() != spec.d || eta.ncols() != spec.d {
            return invalid(format!("input state must be {0}x{0}", spec.d));
        }
        check("input state is Hermitian", la::max_abs(&(eta - eta.adjoint())), 1e-10)?;
        check("input state has unit trace", (eta.trace().re - 1.0).abs(), 1e-10)?;
        let (vals, _) = la::hermitian_eigen(eta);
        check("input state is positive", (-vals[0]).max(0.0), 1e-10)?;
    }
    if matches!(spec.engine, Engine::Amplified(_)) && spec.n < 3 {
        return invalid("the amplified engine needs n >= 3");
    }
    Ok(())
}

pub fn run(spec: &ProtocolRun) -> Result<Report> {
    check_run(spec)?;
    let (n, d) = (spec.n, spec.d);
    let povm = pbt::pgm_dense(n, d)?;
    let dense = pbt::kraus_dense(&povm);
    let eta = match &spec.input_state {
        InputState::Density(e) => e.clone(),
        InputState::EntangledWithReference => la::identity(d) / la::c(d as f64),
    };
    let (branches, discrepancy) = match spec.engine {
        Engine::DenseW => (Branches::dense(&dense), 0.0),
        Engine::Amplified(kind) => {
            let dil = match kind {
                amplify::Engine::Honest => amplify::honest_dilation(
                    n,
                    d,
                    Options {
                        seed: spec.seed,
                        ..Options::default()
                    },
                )?,
                amplify::Engine::Compressed => {
                    amplify::compressed_dilation(&TwistedSchur::build_seeded(n, d, spec.seed)?, &dense)?
                }
            };
            let enc_err = amplify::encoding_error(&dil, &dense)?;
            let (pl, cols) = amplify::amplified_columns(&dil)?;
            let rep = amplify::report_from(&dil, &pl, &cols, enc_err, &dense, &eta)?;
            (Branches::amplified(&dil, &cols)?, rep.discrepancy)
        }
    };

    let (inputs, rdim) = match &spec.input_state {
        InputState::Density(e) => {
            let (vals, vecs) = la::hermitian_eigen(e);
            let comps = vals
                .iter()
                .enumerate()
                .filter(|(_, &l)| l > 1e-14)
                .map(|(k, &l)| (l, vecs.column(k).iter().copied().collect()))
                .collect();
            (comps, 1)
        }
        InputState::EntangledWithReference => {
            let mut v = vec![ZERO; d * d];
            for r in 0..d {
                v[r * d + r] = la::ONE;
            }
            (vec![(1.0 / d as f64, v)], d)
        }
    };
    let raw: Vec<CMat> = (0..n - 1).map(|i| port_state(&branches, n, d, i, &inputs, rdim)).collect();
    let probabilities: Vec<f64> = raw.iter().map(|r| r.trace().re).collect();
    check("probabilities sum to 1", (probabilities.iter().sum::<f64>() - 1.0).abs(), 1e-9)?;
    let outputs: Vec<CMat> = raw
        .iter()
        .zip(&probabilities)
        .map(|(r, &p)| if p > 0.0 { r / la::c(p) } else { r.clone() })
        .collect();

    let fidelity = match &spec.input_state {
        InputState::Density(e) => {
            let mut avg = CMat::zeros(d, d);
            for r in &raw {
                avg += r;
            }
            la::state_fidelity(e, &avg)
        }
        InputState::EntangledWithReference => raw
            .iter()
            .map(|r| {
                let mut f = ZERO;
                for a in 0..d {
                    for b in 0..d {
                        f += r[(a * d + a, b * d + b)];
                    }
                }
                f.re / d as f64
            })
            .sum(),
    };
    Ok(Report {
        n,
        d,
        engine: spec.engine.name().into(),
        probabilities,
        fidelity,
        discrepancy,
        outputs,
    })
}

/// Largest deviation between `Σ_i p_i ρ_i` from [`run`] and the channel formula.
pub fn channel_form_residual(povm: &Povm, report: &Report, eta: &CMat) -> Result<f64> {
    let mut avg = CMat::zeros(povm.d, povm.d);
    for (p, o) in report.probabilities.iter().zip(&report.outputs) {
        avg += o * la::c(*p);
    }
    Ok(la::max_abs(&(avg - pbt::channel_apply(povm, eta)?)))
}

/// Fidelity of teleporting `UηU†` against `U` applied after teleporting `η`
/// (the channel commutes with `U`); returns the largest per-outcome output
/// difference and both fidelities.
pub fn equivariance(n: usize, d: usize, eta: &CMat, u: &CMat) -> Result<(f64, f64, f64)> {
    let plain = run(&ProtocolRun::new(n, d, InputState::Density(eta.clone()), Engine::DenseW))?;
    let rotated_in = u * eta * u.adjoint();
    let rotated = run(&ProtocolRun::new(n, d, InputState::Density(rotated_in.clone()), Engine::DenseW))?;
    let mut worst: f64 = 0.0;
    for (a, b) in plain.outputs.iter().zip(&rotated.outputs) {
        worst = worst.max(la::max_abs(&(u * a * u.adjoint() - b)));
    }
    let mut avg = CMat::zeros(d, d);
    for (p, o) in plain.probabilities.iter().zip(&plain.outputs) {
        avg += u * o * u.adjoint() * la::c(*p);
    }
    let after = la::state_fidelity(&rotated_in, &avg);
    Ok((worst, rotated.fidelity, after))
}

#[derive(Clone, Debug, Serialize)]
pub struct Histogram {
    pub shots: u64,
    pub counts: Vec<u64>,
    pub expected: Vec<f64>,
    pub chi_square: f64,
    /// Largest `|count − shots·p| / σ` with `σ = √(shots·p(1−p))`.
    pub max_sigma: f64,
}

/// Multinomial draws from the outcome probabilities of `spec`.
pub fn sample(spec: &ProtocolRun, shots: u64) -> Result<Histogram> {
    if shots == 0 {
        return invalid("shots must be at least 1");
    }
    let report = run(spec)?;
    sample_from(&report.probabilities, shots, spec.seed)
}

pub fn sample_from(probs: &[f64], shots: u64, seed: u64) -> Result<Histogram> {
    if shots == 0 {
        return invalid("shots must be at least 1");
    }
    let weights: Vec<f64> = probs.iter().map(|p| p.max(0.0)).collect();
    let dist = WeightedIndex::new(&weights).map_err(|e| crate::PbtError::InvalidArgument(e.to_string()))?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut counts = vec![0u64; probs.len()];
    for _ in 0..shots {
        counts[dist.sample(&mut rng)] += 1;
    }
    let total: f64 = weights.iter().sum();
    let s = shots as f64;
    let expected: Vec<f64> = weights.iter().map(|w| s * w / total).collect();
    let mut chi_square = 0.0;
    let mut max_sigma: f64 = 0.0;
    for (&c, &e) in counts.iter().zip(&expected) {
        if e > 0.0 {
            chi_square += (c as f64 - e).powi(2) / e;
            let sigma = (e * (1.0 - e / s)).sqrt();
            if sigma > 0.0 {
                max_sigma = max_sigma.max((c as f64 - e).abs() / sigma);
            }
        }
    }
    Ok(Histogram {
        shots,
        counts,
        expected,
        chi_square,
        max_sigma,
    })
}
