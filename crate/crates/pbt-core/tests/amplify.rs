mod common;

use std::f64::consts::PI;
use std::sync::Arc;

use pbt_core::amplify::{
    amplified_v, compressed_dilation, encoding_error, end_to_end, end_to_end_with, plan, reflect_phase, Dilation,
    Engine, Projector,
};
use pbt_core::blockenc::{Circuit, Gate, Layout, SparseOp};
use pbt_core::la::{self, CMat, C64};
use pbt_core::pbt;
use pbt_core::twisted::TwistedSchur;

fn halmos(a: &CMat) -> CMat {
    let k = a.nrows();
    let i = la::identity(k);
    let mut u = CMat::zeros(2 * k, 2 * k);
    u.view_mut((0, 0), (k, k)).copy_from(a);
    u.view_mut((0, k), (k, k)).copy_from(&la::psd_sqrt(&(&i - a * a.adjoint())));
    u.view_mut((k, 0), (k, k)).copy_from(&la::psd_sqrt(&(&i - a.adjoint() * a)));
    u.view_mut((k, k), (k, k)).copy_from(&(-a.adjoint()));
    u
}

/// One-qubit block `a` on `X`, flagged by `A`, with `S` for the deflation.
fn toy_dilation(a: &CMat, scale: f64, epsilon: f64) -> Dilation {
    let layout = Arc::new(Layout::new(&[("I", 1), ("S", 2), ("A", 2), ("X", 2)]).unwrap());
    let mut v = Circuit::new();
    v.push(Gate::new("U", &["A", "X"], SparseOp::from_dense(&halmos(a)).unwrap()));
    Dilation {
        name: "toy".into(),
        n: 2,
        d: 2,
        layout,
        v,
        in_zero: vec!["I".into(), "S".into(), "A".into()],
        out_zero: vec!["S".into(), "A".into()],
        inputs: vec![0, 1],
        outputs: vec![vec![0, 1]],
        scale_total: scale,
        epsilon,
    }
}

fn amplified_block(dil: &Dilation, m_expect: usize) -> CMat {
    let pl = plan(dil.scale_total, 1).unwrap();
    assert_eq!(pl.m, m_expect);
    let cols = amplified_v(dil, &pl).unwrap().columns(&dil.inputs);
    let rows = &dil.outputs[0];
    CMat::from_fn(rows.len(), cols.len(), |r, k| cols[k][rows[r]])
}

#[test]
fn phase_gadget_matches_controlled_not_construction() {
    let layout = Layout::new(&[("P", 2), ("R", 3), ("Q", 2)]).unwrap();
    let p = Projector::new(&layout, &["P".into(), "R".into()]).unwrap();
    let dim = layout.total;
    let cnot: Vec<usize> = (0..dim).map(|t| if t / 2 == 0 { t ^ 1 } else { t }).collect();
    let mut rng = common::XorShift(41);
    for phi in [0.0, 0.3, PI / 2.0, -2.0 * PI, 1.7] {
        let mut v: Vec<C64> = vec![la::c(0.0); dim];
        for t in (0..dim).step_by(2) {
            v[t] = C64::new(rng.unit() - 0.5, rng.unit() - 0.5);
        }
        let mut direct = v.clone();
        reflect_phase(&mut direct, &p, phi);
        let mut gadget = vec![la::c(0.0); dim];
        for t in 0..dim {
            gadget[cnot[t]] = v[t];
        }
        for (t, z) in gadget.iter_mut().enumerate() {
            *z *= C64::from_polar(1.0, if t % 2 == 0 { -phi } else { phi });
        }
        let back: Vec<C64> = (0..dim).map(|t| gadget[cnot[t]]).collect();
        assert_eq!(direct, back, "φ={phi}");
    }
}

#[test]
fn plan_rounds_scale_up() {
    let p = plan(2.0, 1).unwrap();
    assert_eq!(p.m, 3);
    assert_eq!(p.phases, vec![-PI, PI / 2.0, PI / 2.0]);
    assert_eq!(plan(1.0, 1).unwrap().m, 1);
    assert_eq!(plan(1.0, 1).unwrap().phases, vec![0.0]);
    for (s, ports) in [(2.0, 1), (3.0, 2), (17.5, 2), (250.0, 5)] {
        let p = plan(s, ports).unwrap();
        assert_eq!(p.m % 2, 1);
        assert!(p.inflated_total() >= s * (1.0 - 1e-12));
        assert!(((PI / (2 * p.m) as f64).sin() * p.inflated_scale * (ports as f64).sqrt() - 1.0).abs() < 1e-14);
        if p.m > 1 {
            assert!((PI / (2 * (p.m - 2)) as f64).sin() * s > 1.0);
        }
    }
    assert!(plan(0.9, 1).is_err());
    assert!(plan(f64::NAN, 1).is_err());
    assert!(plan(2.0, 0).is_err());
}

#[test]
fn single_step_is_the_dilation_itself() {
    let mut rng = common::XorShift(8);
    let w = common::random_unitary(2, &mut rng);
    let dil = toy_dilation(&w, 1.0, 0.0);
    assert!(la::max_abs(&(amplified_block(&dil, 1) - &w)) < 1e-14);
}

#[test]
fn exact_encodings_amplify_exactly() {
    let mut rng = common::XorShift(19);
    for (scale, m) in [(2.0, 3), (3.0, 5)] {
        let w = common::random_unitary(2, &mut rng);
        let dil = toy_dilation(&(&w / la::c(scale)), scale, 0.0);
        assert!(la::max_abs(&(dil.block().unwrap() * la::c(scale) - &w)) < 1e-14);
        let got = amplified_block(&dil, m);
        assert!(la::op_norm(&(got - &w)) < 1e-12, "scale {scale}");
    }
}

#[test]
fn perturbed_error_stays_within_budget() {
    let mut rng = common::XorShift(23);
    for scale in [2.0, 3.0, 6.0] {
        for size in [1e-6, 1e-4, 1e-2] {
            let w = common::random_unitary(2, &mut rng);
            let noise = CMat::from_fn(2, 2, |_, _| C64::new(rng.unit() - 0.5, rng.unit() - 0.5));
            let a = &w / la::c(scale) + noise * la::c(size);
            let eps = la::op_norm(&(&w / la::c(scale) - &a));
            let dil = toy_dilation(&a, scale, eps);
            let pl = plan(scale, 1).unwrap();
            let err = la::op_norm(&(amplified_block(&dil, pl.m) - &w));
            assert!(err <= 2.0 * pl.m as f64 * eps, "scale {scale} size {size}: {err}");
        }
    }
}

#[test]
fn amplified_operator_is_unitary() {
    let tw = TwistedSchur::build(3, 2).unwrap();
    let dense = pbt::kraus_dense(&pbt::pgm_dense(3, 2).unwrap());
    let dil = compressed_dilation(&tw, &dense).unwrap();
    let pl = plan(dil.scale_total, 2).unwrap();
    let amp = amplified_v(&dil, &pl).unwrap();
    let all: Vec<usize> = (0..dil.layout.total).collect();
    let cols = amp.columns(&all);
    let u = CMat::from_fn(all.len(), all.len(), |r, k| cols[k][r]);
    assert!(la::max_abs(&(u.adjoint() * &u - la::identity(all.len()))) < 1e-8);
}

#[test]
fn compressed_end_to_end() {
    let r = end_to_end(3, 2, Engine::Compressed).unwrap();
    assert_eq!(r.variant, "compressed");
    assert!((r.scale_total - 2.0).abs() < 1e-12);
    assert_eq!(r.m, 3);
    assert!(r.encoding_error <= r.epsilon);
    assert!(r.isometry_error <= r.bound);
    assert!(r.discrepancy <= r.bound);
    assert!(r.leakage.abs() <= r.bound);
    assert!(r.norm_drift < 1e-10);
    for (a, b) in r.probabilities.iter().zip(&r.probabilities_dense) {
        assert!((a - b).abs() < 1e-4);
    }
    assert!((r.probabilities_dense.iter().sum::<f64>() - 1.0).abs() < 1e-9);
}

#[test]
fn compressed_end_to_end_with_pure_input() {
    let tw = TwistedSchur::build(4, 2).unwrap();
    let dense = pbt::kraus_dense(&pbt::pgm_dense(4, 2).unwrap());
    let dil = compressed_dilation(&tw, &dense).unwrap();
    assert!(encoding_error(&dil, &dense).unwrap() <= dil.epsilon);
    let mut eta = CMat::zeros(2, 2);
    eta[(0, 0)] = la::c(1.0);
    let r = end_to_end_with(&dil, &dense, &eta).unwrap();
    assert!(r.isometry_error <= r.bound && r.discrepancy <= r.bound);
    for (a, b) in r.probabilities.iter().zip(&r.probabilities_dense) {
        assert!((a - b).abs() < 1e-4);
    }
}
