//! The ten acceptance criteria, one PASS/FAIL line each.
//!
//! Run with `cargo test --release -p pbt-core --test acceptance -- --nocapture`.

mod common;

use std::panic::{catch_unwind, AssertUnwindSafe};
use std::time::{Duration, Instant};

use nalgebra::DMatrix;
use pbt_core::amplify::{compressed_dilation, end_to_end_with, honest_dilation, plan};
use pbt_core::blockenc::{Encoder, Options, Padding};
use pbt_core::la::{self, CMat};
use pbt_core::pbt;
use pbt_core::twisted::{self, alphas, mf_pi, nu_sum, psi_vectors, AlphaInfo, TwistedSchur};
use pbt_core::verify;
use pbt_core::young::Partition;
use pbt_core::Perm;

type Real = DMatrix<f64>;

/// Worst residual of a criterion against its tolerance.
struct Outcome {
    residual: f64,
    tol: f64,
    note: String,
}

impl Outcome {
    fn pass(&self) -> bool {
        self.residual <= self.tol
    }
}

fn track(worst: &mut f64, r: f64) {
    if !(r <= *worst) {
        *worst = r;
    }
}

fn brute_children(rows: &[usize], max_height: usize) -> Vec<Vec<usize>> {
    let mut out = Vec::new();
    for k in 0..=rows.len() {
        let mut c = rows.to_vec();
        if k == rows.len() {
            c.push(1);
        } else {
            c[k] += 1;
        }
        if (k == 0 || c[k - 1] >= c[k]) && c.len() <= max_height {
            out.push(c);
        }
    }
    out
}

fn oracle_kraus(o: &common::Pgm) -> Vec<CMat> {
    o.kraus.iter().map(common::complexify).collect()
}

fn gram_identity() -> Outcome {
    let mut worst: f64 = 0.0;
    let mut count = 0;
    for d in [2, 3] {
        for n in 2..=7 {
            for rows in common::partitions_brute(n - 2, d) {
                let a = Partition::new(rows.clone()).unwrap();
                let psi = psi_vectors(n, d, &a, 0).unwrap();
                let (vals, _) = common::sym_eigen(&(psi.transpose() * &psi));
                let (d_a, m_a) = (common::count_syt(&rows), common::count_ssyt(&rows, d));
                let mut want = Vec::new();
                for nu in brute_children(&rows, d + 1) {
                    let d_nu = common::count_syt(&nu);
                    let l = if nu.len() > d {
                        0.0
                    } else {
                        ((n - 1) * common::count_ssyt(&nu, d) * d_a) as f64 / (m_a * d_nu) as f64
                    };
                    want.extend(std::iter::repeat_n(l, d_nu));
                }
                want.sort_by(f64::total_cmp);
                if want.len() != vals.len() {
                    return Outcome {
                        residual: f64::INFINITY,
                        tol: 1e-8,
                        note: format!("n={n} d={d} α={a}: {} eigenvalues, expected {}", vals.len(), want.len()),
                    };
                }
                for (x, y) in vals.iter().zip(&want) {
                    track(&mut worst, (x - y).abs());
                }
                count += 1;
            }
        }
    }
    Outcome {
        residual: worst,
        tol: 1e-8,
        note: format!("{count} α blocks"),
    }
}

fn induced_dimension() -> Outcome {
    let mut bad = 0;
    let mut count = 0;
    for n in 2..=10 {
        for rows in common::partitions_brute(n - 2, n) {
            let a = Partition::new(rows.clone()).unwrap();
            let lhs = (n - 1) * pbt_core::young::specht(&a).unwrap();
            let rhs: usize = brute_children(&rows, n).iter().map(|c| common::count_syt(c)).sum();
            let lib: usize = pbt_core::young::add_box(&a, n)
                .children
                .iter()
                .map(|c| pbt_core::young::specht(c).unwrap())
                .sum();
            if lhs != rhs || lhs != lib {
                bad += 1;
            }
            count += 1;
        }
    }
    Outcome {
        residual: bad as f64,
        tol: 0.0,
        note: format!("{count} α, {bad} mismatches"),
    }
}

fn f_basis_contract() -> Outcome {
    let mut worst_o: f64 = 0.0;
    let mut worst_c: f64 = 0.0;
    let mut rng = common::XorShift(0xacce);
    for n in 2..=6 {
        let d = 2;
        let tw = TwistedSchur::build(n, d).unwrap();
        let sigmas: Vec<Vec<usize>> = (0..20).map(|_| rng.perm(n - 1)).collect();
        for b in &tw.blocks {
            let k = b.f.ncols();
            track(&mut worst_o, common::max_abs(&(b.f.transpose() * &b.f - Real::identity(k, k))));
            for s in &sigmas {
                let mut img = s.clone();
                img.push(n - 1);
                let v = common::perm_matrix(&img, d);
                let rhs = &b.f * nu_sum(&b.info, &Perm::from_images(s.clone()).unwrap());
                track(&mut worst_c, common::max_abs(&(v * &b.f - rhs)));
            }
        }
    }
    // both tolerances folded into one ratio
    Outcome {
        residual: (worst_o / 1e-10).max(worst_c / 1e-9),
        tol: 1.0,
        note: format!("orthonormality {worst_o:.2e} (≤ 1e-10), covariance {worst_c:.2e} (≤ 1e-9)"),
    }
}

fn pseudoprojector() -> Outcome {
    let mut worst: f64 = 0.0;
    for d in [2, 3] {
        for n in 2..=6 {
            for rows in common::partitions_brute(n - 2, d) {
                let a = Partition::new(rows.clone()).unwrap();
                let d_a = common::count_syt(&rows);
                let d_theta: usize = brute_children(&rows, d + 1)
                    .iter()
                    .filter(|c| c.len() == d + 1)
                    .map(|c| common::count_syt(c))
                    .sum();
                let scale = 1.0 - d_theta as f64 / ((n - 1) * d_a) as f64;
                for i in 1..n {
                    let m = mf_pi(n, d, &a, i).unwrap();
                    track(&mut worst, common::max_abs(&(&m * &m - &m * scale)));
                }
            }
        }
    }
    Outcome {
        residual: worst,
        tol: 1e-9,
        note: String::new(),
    }
}

fn kraus_reconstruction() -> Outcome {
    let mut worst_k: f64 = 0.0;
    let mut worst_s: f64 = 0.0;
    let cases: Vec<(usize, usize)> = (2..=6).map(|n| (n, 2)).chain((2..=4).map(|n| (n, 3))).collect();
    for (n, d) in cases {
        let tw = TwistedSchur::build(n, d).unwrap();
        let oracle = common::pgm(n, d);
        let dim = d.pow(n as u32);
        let mut sum = CMat::zeros(dim, dim);
        for i in 1..n {
            let k = pbt::kraus_from_twisted(&tw, i).unwrap();
            track(&mut worst_k, la::max_abs(&(&k - common::complexify(&oracle.kraus[i - 1]))));
            sum += &k * &k;
        }
        track(&mut worst_s, la::max_abs(&(sum - la::identity(dim))));
    }
    Outcome {
        residual: (worst_k / 1e-8).max(worst_s / 1e-9),
        tol: 1.0,
        note: format!("√Π_i {worst_k:.2e} (≤ 1e-8), Σ Π_i − I {worst_s:.2e} (≤ 1e-9)"),
    }
}

fn fidelity_oracle() -> Outcome {
    let f22 = pbt::fidelity(2, 2).unwrap();
    let table: Vec<f64> = (2..=6).map(|n| common::fidelity(&common::pgm(n, 2), 2)).collect();
    let monotone = table.windows(2).all(|w| w[1] > w[0]);
    let mut worst_t: f64 = 0.0;
    for (n, f) in (2..=6).zip(&table) {
        let tw = TwistedSchur::build(n, 2).unwrap();
        let t = pbt::entanglement_fidelity(&pbt::povm_from_twisted(&tw).unwrap()).unwrap();
        track(&mut worst_t, (t - f).abs());
        track(&mut worst_t, (pbt::fidelity(n, 2).unwrap() - f).abs());
    }
    let e22 = (f22 - 0.25).abs();
    Outcome {
        residual: if monotone { (e22 / 1e-12).max(worst_t / 1e-8) } else { f64::INFINITY },
        tol: 1.0,
        note: format!("F(2,2) − 1/4 = {e22:.1e}, strictly increasing: {monotone}, twisted vs dense {worst_t:.2e}"),
    }
}

fn ledger() -> Outcome {
    let (n, d) = (3, 2);
    let x = 2f64.sqrt();
    let tw = TwistedSchur::build(n, d).unwrap();
    let dense = oracle_kraus(&common::pgm(n, d));
    let k = (n - 1) as f64;
    let want_alpha = k * k * d as f64 * x.powi(4) + k.powf(1.5) * d as f64 * x * x + k.powf(-0.5);
    let mut worst: f64 = 0.0;
    let mut rows_bad = 0;
    let mut alpha_err: f64 = 0.0;
    for padding in [Padding::Tight, Padding::Padded] {
        let enc = Encoder::new(
            n,
            d,
            Options {
                x: Some(x),
                x_prime: Some(x),
                padding,
                ..Options::default()
            },
        )
        .unwrap();
        alpha_err = alpha_err.max((enc.alpha_scale() - want_alpha).abs());
        for i in 1..n {
            let e = enc.encode_kraus(&tw, i).unwrap();
            let blk = e.encoding.block().unwrap() * la::c(want_alpha);
            track(&mut worst, la::op_norm(&(blk - &dense[i - 1])));
            if padding == Padding::Padded {
                rows_bad += e.ledger.iter().filter(|r| !r.matches()).count();
            }
        }
    }
    let ok = alpha_err < 1e-12 && rows_bad == 0;
    Outcome {
        residual: if ok { worst } else { f64::INFINITY },
        tol: 1e-6,
        note: format!("α = {want_alpha} (|Δ| {alpha_err:.1e}), padded ledger mismatches {rows_bad}"),
    }
}

fn naimark_amplification() -> Outcome {
    let (n, d) = (3, 2);
    let dense = oracle_kraus(&common::pgm(n, d));
    let eta = la::identity(d) / la::c(d as f64);
    let tw = TwistedSchur::build(n, d).unwrap();
    let mut worst: f64 = 0.0;
    let mut notes = Vec::new();
    let dils = [
        honest_dilation(n, d, Options::default()).unwrap(),
        compressed_dilation(&tw, &dense).unwrap(),
    ];
    for dil in &dils {
        let t = Instant::now();
        let r = end_to_end_with(dil, &dense, &eta).unwrap();
        let budget = if dil.name == "honest" { 900.0 } else { 60.0 };
        let dp = r
            .probabilities
            .iter()
            .zip(&r.probabilities_dense)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        assert_eq!(r.m, plan(dil.scale_total, n - 1).unwrap().m);
        track(&mut worst, r.encoding_error / r.epsilon);
        track(&mut worst, r.isometry_error / r.bound);
        track(&mut worst, dp / 1e-4);
        track(&mut worst, t.elapsed().as_secs_f64() / budget);
        notes.push(format!(
            "{} m={} ε={:.2e}: block {:.2e}, isometry {:.2e} ≤ {:.2e}, Δp {:.1e}, {:.1?}",
            r.variant,
            r.m,
            r.epsilon,
            r.encoding_error,
            r.isometry_error,
            r.bound,
            dp,
            t.elapsed()
        ));
    }
    Outcome {
        residual: worst,
        tol: 1.0,
        note: notes.join("; "),
    }
}

fn norm_bound() -> Outcome {
    let mut worst = f64::NEG_INFINITY;
    for d in [2usize, 3] {
        for n in 2..=6 {
            let tw = TwistedSchur::build(n, d).unwrap();
            for i in 1..n {
                let s = la::op_norm(&la::to_complex(&tw.sqrt_pi_tilde(i).unwrap()));
                track(&mut worst, s - (d as f64).sqrt());
            }
            if d.pow(n as u32) <= 256 {
                let oracle = common::pgm(n, d);
                for pt in &oracle.pi_tilde {
                    track(&mut worst, common::op_norm(&common::sqrt_psd(pt)) - (d as f64).sqrt());
                }
            }
        }
    }
    Outcome {
        residual: worst.max(0.0),
        tol: 1e-12,
        note: format!("max ‖√Π̃_i‖ − √d = {worst:.3e}"),
    }
}

fn gauge_robustness() -> Outcome {
    let alt = 0x5151;
    let mut worst: f64 = 0.0;
    let cases: Vec<(usize, usize)> = (2..=6).map(|n| (n, 2)).chain((2..=4).map(|n| (n, 3))).collect();
    for (n, d) in cases {
        let a = verify::gauge_scalars(n, d, 0).unwrap();
        let b = verify::gauge_scalars(n, d, alt).unwrap();
        track(&mut worst, a.distance(&b));
        for al in alphas(n, d) {
            let x = twisted::gram_spectrum_seeded(n, d, &al, 0).unwrap();
            let y = twisted::gram_spectrum_seeded(n, d, &al, alt).unwrap();
            for (p, q) in x.closed.iter().zip(&y.closed) {
                track(&mut worst, (p.1 - q.1).abs());
            }
            let ia = AlphaInfo::new(n, d, &al).unwrap();
            for (l, c) in ia.lambda.iter().zip(&x.closed) {
                track(&mut worst, (l - c.1).abs());
            }
        }
    }
    let (n, d) = (3, 2);
    let dense = oracle_kraus(&common::pgm(n, d));
    let residual = |seed: u64| -> Vec<f64> {
        let tw = TwistedSchur::build_seeded(n, d, seed).unwrap();
        let enc = Encoder::new(n, d, Options { seed, ..Options::default() }).unwrap();
        (1..n)
            .map(|i| enc.kraus_residual(&enc.encode_kraus(&tw, i).unwrap(), &dense[i - 1]).unwrap())
            .collect()
    };
    for (p, q) in residual(0).iter().zip(residual(alt)) {
        track(&mut worst, (p - q).abs());
    }
    let eta = la::identity(d) / la::c(d as f64);
    let e2e = |seed: u64| {
        let tw = TwistedSchur::build_seeded(n, d, seed).unwrap();
        let dil = compressed_dilation(&tw, &dense).unwrap();
        end_to_end_with(&dil, &dense, &eta).unwrap()
    };
    let (p, q) = (e2e(0), e2e(alt));
    for (a, b) in [
        (p.isometry_error, q.isometry_error),
        (p.discrepancy, q.discrepancy),
        (p.encoding_error, q.encoding_error),
    ] {
        track(&mut worst, (a - b).abs());
    }
    for (a, b) in p.probabilities.iter().zip(&q.probabilities) {
        track(&mut worst, (a - b).abs());
    }
    Outcome {
        residual: worst,
        tol: 1e-8,
        note: format!("seed 0 vs {alt:#x}"),
    }
}

#[test]
fn acceptance() {
    let criteria: [(&str, fn() -> Outcome, Duration); 10] = [
        ("1 gram spectrum", gram_identity, Duration::from_secs(120)),
        ("2 induced dimension", induced_dimension, Duration::from_secs(1)),
        ("3 f-basis contract", f_basis_contract, Duration::from_secs(120)),
        ("4 pseudoprojector", pseudoprojector, Duration::from_secs(120)),
        ("5 kraus reconstruction", kraus_reconstruction, Duration::from_secs(300)),
        ("6 fidelity oracle", fidelity_oracle, Duration::from_secs(180)),
        ("7 block-encoding ledger", ledger, Duration::from_secs(600)),
        ("8 naimark + amplification", naimark_amplification, Duration::from_secs(960)),
        ("9 norm bound", norm_bound, Duration::from_secs(60)),
        ("10 gauge robustness", gauge_robustness, Duration::from_secs(600)),
    ];
    let mut failed = Vec::new();
    for (name, f, budget) in criteria {
        let t = Instant::now();
        let outcome = catch_unwind(AssertUnwindSafe(f));
        let took = t.elapsed();
        let line = match outcome {
            Ok(o) => {
                let ok = o.pass() && took <= budget;
                if !ok {
                    failed.push(name);
                }
                format!(
                    "{} {name}: residual {:.3e} (tol {:.1e}), {:.2?} (budget {budget:?}) {}",
                    if ok { "PASS" } else { "FAIL" },
                    o.residual,
                    o.tol,
                    took,
                    o.note
                )
            }
            Err(_) => {
                failed.push(name);
                format!("FAIL {name}: panicked after {took:.2?}")
            }
        };
        println!("{line}");
    }
    assert!(failed.is_empty(), "failed criteria: {failed:?}");
}

#[test]
fn plan_matches_alpha_arithmetic() {
    let enc = Encoder::new(3, 2, Options::default()).unwrap();
    let s = enc.alpha_scale() * 2f64.sqrt();
    let p = plan(s, 2).unwrap();
    let rough = (std::f64::consts::PI * s / 2.0).ceil() as usize;
    assert!(p.m.abs_diff(rough) <= 2, "{} vs {rough}", p.m);
    assert!(p.m > 90);
}
