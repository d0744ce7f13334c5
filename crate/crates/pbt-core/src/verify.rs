//! Named verification suites with residuals, shared by the CLI.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::amplify::{self, Engine as AmpEngine};
use crate::blockenc::{Encoder, Options, Padding};
use crate::error::{invalid, Result};
use crate::la::{self, CMat};
use crate::pbt;
use crate::schur::PermutationOperator;
use crate::twisted::{self, AlphaInfo, RMat, TwistedSchur};
use crate::young::{enumerate_partitions, specht};
use crate::Perm;

pub const SUITES: &[&str] = &[
    "gram", "induced", "fbasis", "pseudo", "kraus", "fidelity", "ledger", "amplify", "norm", "gauge",
];

#[derive(Clone, Debug, Serialize)]
pub struct Check {
    pub label: String,
    pub residual: f64,
    pub tol: f64,
    pub pass: bool,
}

impl Check {
    pub fn within(label: impl Into<String>, residual: f64, tol: f64) -> Self {
        Check {
            label: label.into(),
            residual,
            tol,
            pass: residual <= tol,
        }
    }

    pub fn holds(label: impl Into<String>, ok: bool) -> Self {
        Check {
            label: label.into(),
            residual: if ok { 0.0 } else { 1.0 },
            tol: 0.0,
            pass: ok,
        }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct SuiteReport {
    pub suite: String,
    pub checks: Vec<Check>,
}

impl SuiteReport {
    pub fn pass(&self) -> bool {
        !self.checks.is_empty() && self.checks.iter().all(|c| c.pass)
    }

    pub fn max_residual(&self) -> f64 {
        self.checks.iter().map(|c| c.residual).fold(0.0, f64::max)
    }

    pub fn failures(&self) -> impl Iterator<Item = &Check> {
        self.checks.iter().filter(|c| !c.pass)
    }
}

/// Default `(n, d)` ranges per suite.
pub fn default_ranges(suite: &str) -> (Vec<usize>, Vec<usize>) {
    match suite {
        "gram" => ((2..=7).collect(), vec![2, 3]),
        "induced" => ((2..=10).collect(), vec![2, 3, 4, 5]),
        "fbasis" => ((2..=6).collect(), vec![2]),
        "pseudo" | "norm" => ((2..=6).collect(), vec![2, 3]),
        "kraus" => ((2..=6).collect(), vec![2]),
        "fidelity" => ((2..=6).collect(), vec![2]),
        "ledger" | "amplify" => (vec![3], vec![2]),
        _ => ((2..=4).collect(), vec![2]),
    }
}

pub fn run_suite(suite: &str, ns: &[usize], ds: &[usize]) -> Result<SuiteReport> {
    let checks = match suite {
        "gram" => gram(ns, ds)?,
        "induced" => induced(ns, ds)?,
        "fbasis" => fbasis(ns, ds, 20)?,
        "pseudo" => pseudo(ns, ds)?,
        "kraus" => kraus(ns, ds)?,
        "fidelity" => fidelity(ns, ds)?,
        "ledger" => ledger(ns, ds)?,
        "amplify" => amplification(ns, ds)?,
        "norm" => norm(ns, ds)?,
        "gauge" => gauge(ns, ds, 7)?,
        _ => return invalid(format!("unknown suite {suite:?}; available: {}", SUITES.join(", "))),
    };
    Ok(SuiteReport {
        suite: suite.into(),
        checks,
    })
}

fn pairs(ns: &[usize], ds: &[usize]) -> Vec<(usize, usize)> {
    ds.iter().flat_map(|&d| ns.iter().map(move |&n| (n, d))).collect()
}

pub fn gram(ns: &[usize], ds: &[usize]) -> Result<Vec<Check>> {
    let mut out = Vec::new();
    for (n, d) in pairs(ns, ds) {
        for a in twisted::alphas(n, d) {
            let g = twisted::gram_spectrum(n, d, &a)?;
            out.push(Check::within(format!("n={n} d={d} α={a}"), g.residual, 1e-8));
        }
    }
    Ok(out)
}

/// `(n-1) d_α = Σ_{ν=α+□} d_ν` with `ν` unrestricted in height.
pub fn induced(ns: &[usize], ds: &[usize]) -> Result<Vec<Check>> {
    let mut out = Vec::new();
    for &n in ns {
        if n < 2 {
            continue;
        }
        // d only restricts which α appear; the identity itself is height-free
        let h = ds.iter().copied().max().unwrap_or(n).max(n);
        for a in enumerate_partitions(n - 2, h) {
            let lhs = (n - 1) * specht(&a)?;
            let rhs: usize = crate::young::add_box(&a, n)
                .children
                .iter()
                .map(specht)
                .sum::<Result<usize>>()?;
            out.push(Check::holds(format!("n={n} α={a}: {lhs} = {rhs}"), lhs == rhs));
        }
    }
    Ok(out)
}

/// Orthonormality and `V(σ) f = f · ⊕_ν yor(ν, σ)` for random `σ ∈ S(n-1)`.
pub fn fbasis(ns: &[usize], ds: &[usize], samples: usize) -> Result<Vec<Check>> {
    let mut out = Vec::new();
    let mut rng = ChaCha8Rng::seed_from_u64(0x5eed);
    for (n, d) in pairs(ns, ds) {
        let tw = TwistedSchur::build(n, d)?;
        let sigmas: Vec<Perm> = (0..samples).map(|_| Perm::random(n - 1, &mut rng)).collect();
        for b in &tw.blocks {
            let k = b.f.ncols();
            let ortho = la::max_abs_real(&(b.f.transpose() * &b.f - RMat::identity(k, k)));
            out.push(Check::within(format!("n={n} d={d} α={} r={} orthonormal", b.alpha(), b.r), ortho, 1e-10));
            let mut worst: f64 = 0.0;
            for s in &sigmas {
                worst = worst.max(covariance_residual(&b.f, &b.info, s)?);
            }
            out.push(Check::within(format!("n={n} d={d} α={} r={} covariant", b.alpha(), b.r), worst, 1e-9));
        }
    }
    Ok(out)
}

pub fn covariance_residual(f: &RMat, info: &AlphaInfo, sigma: &Perm) -> Result<f64> {
    let v = PermutationOperator::new(info.n, info.d, &sigma.extend(info.n))?;
    let mut vf = RMat::zeros(f.nrows(), f.ncols());
    for r in 0..f.nrows() {
        vf.row_mut(v.image(r)).copy_from(&f.row(r));
    }
    Ok(la::max_abs_real(&(vf - f * twisted::nu_sum(info, sigma))))
}

pub fn pseudo(ns: &[usize], ds: &[usize]) -> Result<Vec<Check>> {
    let mut out = Vec::new();
    for (n, d) in pairs(ns, ds) {
        for a in twisted::alphas(n, d) {
            let info = AlphaInfo::new(n, d, &a)?;
            let mut worst: f64 = 0.0;
            for i in 1..n {
                let m = twisted::mf_pi(n, d, &a, i)?;
                worst = worst.max(la::max_abs_real(&(&m * &m - &m * info.pseudo_scale())));
            }
            out.push(Check::within(format!("n={n} d={d} α={a}"), worst, 1e-9));
        }
    }
    Ok(out)
}

/// Largest `‖√Π_i(twisted) − √Π_i(dense)‖` and `‖Σ Π_i − I‖` (twisted).
pub fn kraus_residuals(n: usize, d: usize, seed: u64) -> Result<(f64, f64)> {
    let tw = TwistedSchur::build_seeded(n, d, seed)?;
    let dense = pbt::kraus_dense(&pbt::pgm_dense(n, d)?);
    let mut worst: f64 = 0.0;
    let mut sum = CMat::zeros(tw.dim(), tw.dim());
    for i in 1..n {
        let k = pbt::kraus_from_twisted(&tw, i)?;
        worst = worst.max(la::max_abs(&(&k - &dense[i - 1])));
        sum += &k * &k;
    }
    Ok((worst, la::max_abs(&(sum - la::identity(tw.dim())))))
}

pub fn kraus(ns: &[usize], ds: &[usize]) -> Result<Vec<Check>> {
    let mut out = Vec::new();
    for (n, d) in pairs(ns, ds) {
        let (k, s) = kraus_residuals(n, d, 0)?;
        out.push(Check::within(format!("n={n} d={d} √Π_i"), k, 1e-8));
        out.push(Check::within(format!("n={n} d={d} Σ Π_i = I"), s, 1e-9));
    }
    Ok(out)
}

pub fn twisted_fidelity(n: usize, d: usize, seed: u64) -> Result<f64> {
    pbt::entanglement_fidelity(&pbt::povm_from_twisted(&TwistedSchur::build_seeded(n, d, seed)?)?)
}

pub fn fidelity(ns: &[usize], ds: &[usize]) -> Result<Vec<Check>> {
    let mut out = Vec::new();
    for &d in ds {
        let mut prev: Option<f64> = None;
        for &n in ns {
            let f = pbt::fidelity(n, d)?;
            if n == 2 {
                out.push(Check::within(format!("F(2,{d}) = 1/d²"), (f - 1.0 / (d * d) as f64).abs(), 1e-12));
            }
            if let Some(p) = prev {
                out.push(Check::holds(format!("F({n},{d}) = {f:.12} > {p:.12}"), f > p));
            }
            prev = Some(f);
            let t = twisted_fidelity(n, d, 0)?;
            out.push(Check::within(format!("n={n} d={d} twisted = dense"), (t - f).abs(), 1e-8));
        }
    }
    Ok(out)
}

pub fn ledger(ns: &[usize], ds: &[usize]) -> Result<Vec<Check>> {
    let mut out = Vec::new();
    for (n, d) in pairs(ns, ds) {
        let tw = TwistedSchur::build(n, d)?;
        let dense = pbt::kraus_dense(&pbt::pgm_dense(n, d)?);
        for padding in [Padding::Tight, Padding::Padded] {
            let enc = Encoder::new(
                n,
                d,
                Options {
                    padding,
                    ..Options::default()
                },
            )?;
            for i in 1..n {
                let k = enc.encode_kraus(&tw, i)?;
                let r = enc.kraus_residual(&k, &dense[i - 1])?;
                out.push(Check::within(format!("n={n} d={d} {padding:?} U^c({i}) block"), r, 1e-6));
                if padding == Padding::Padded {
                    for row in &k.ledger {
                        out.push(Check::holds(
                            format!(
                                "i={i} {}: scale {:.6} ({:.6}), ancilla {} ({})",
                                row.matrix, row.scale, row.scale_formula, row.ancilla_qubits, row.ancilla_formula
                            ),
                            row.matches(),
                        ));
                    }
                }
            }
        }
    }
    Ok(out)
}

pub fn amplification(ns: &[usize], ds: &[usize]) -> Result<Vec<Check>> {
    let mut out = Vec::new();
    for (n, d) in pairs(ns, ds) {
        for engine in [AmpEngine::Compressed, AmpEngine::Honest] {
            let r = amplify::end_to_end(n, d, engine)?;
            let tag = format!("n={n} d={d} {engine:?} m={}", r.m);
            out.push(Check::within(format!("{tag} Naimark block"), r.encoding_error, r.epsilon));
            out.push(Check::within(format!("{tag} amplified isometry"), r.isometry_error, r.bound));
            let dp = r
                .probabilities
                .iter()
                .zip(&r.probabilities_dense)
                .map(|(a, b)| (a - b).abs())
                .fold(0.0, f64::max);
            out.push(Check::within(format!("{tag} probabilities"), dp, 1e-4));
        }
    }
    Ok(out)
}

pub fn norm(ns: &[usize], ds: &[usize]) -> Result<Vec<Check>> {
    let mut out = Vec::new();
    for (n, d) in pairs(ns, ds) {
        let tw = TwistedSchur::build(n, d)?;
        let mut worst: f64 = 0.0;
        for i in 1..n {
            worst = worst.max(la::op_norm(&la::to_complex(&tw.sqrt_pi_tilde(i)?)));
        }
        let bound = (d as f64).sqrt();
        out.push(Check::within(
            format!("n={n} d={d} max ‖√Π̃_i‖ = {worst:.6} ≤ √d"),
            (worst - bound).max(0.0),
            0.0,
        ));
    }
    Ok(out)
}

/// Scalars that must not depend on the multiplicity gauge.
#[derive(Clone, Debug, Serialize)]
pub struct GaugeScalars {
    pub lambdas: Vec<f64>,
    pub fidelity: f64,
    pub kraus_residual: f64,
    pub completeness: f64,
    pub max_norm: f64,
}

pub fn gauge_scalars(n: usize, d: usize, seed: u64) -> Result<GaugeScalars> {
    let mut lambdas = Vec::new();
    for a in twisted::alphas(n, d) {
        lambdas.extend(twisted::gram_spectrum_seeded(n, d, &a, seed)?.numeric);
    }
    let (kraus_residual, completeness) = kraus_residuals(n, d, seed)?;
    let tw = TwistedSchur::build_seeded(n, d, seed)?;
    let mut max_norm: f64 = 0.0;
    for i in 1..n {
        max_norm = max_norm.max(la::op_norm(&la::to_complex(&tw.sqrt_pi_tilde(i)?)));
    }
    Ok(GaugeScalars {
        lambdas,
        fidelity: twisted_fidelity(n, d, seed)?,
        kraus_residual,
        completeness,
        max_norm,
    })
}

impl GaugeScalars {
    pub fn distance(&self, other: &GaugeScalars) -> f64 {
        let mut worst = self
            .lambdas
            .iter()
            .zip(&other.lambdas)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        if self.lambdas.len() != other.lambdas.len() {
            worst = f64::INFINITY;
        }
        [
            (self.fidelity, other.fidelity),
            (self.kraus_residual, other.kraus_residual),
            (self.completeness, other.completeness),
            (self.max_norm, other.max_norm),
        ]
        .iter()
        .fold(worst, |w, (a, b)| w.max((a - b).abs()))
    }
}

pub fn gauge(ns: &[usize], ds: &[usize], alt_seed: u64) -> Result<Vec<Check>> {
    let mut out = Vec::new();
    for (n, d) in pairs(ns, ds) {
        let a = gauge_scalars(n, d, 0)?;
        let b = gauge_scalars(n, d, alt_seed)?;
        out.push(Check::within(format!("n={n} d={d} seed 0 vs {alt_seed}"), a.distance(&b), 1e-8));
    }
    Ok(out)
}
