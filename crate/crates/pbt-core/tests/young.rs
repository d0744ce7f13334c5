mod common;

use pbt_core::young::{add_box, enumerate_partitions, remove_box, specht, weyl, Partition};
use proptest::prelude::*;

fn p(rows: &[usize]) -> Partition {
    Partition::new(rows.to_vec()).unwrap()
}

fn rows(v: &[Partition]) -> Vec<Vec<usize>> {
    v.iter().map(|x| x.rows().to_vec()).collect()
}

#[test]
fn enumeration_examples() {
    assert_eq!(rows(&enumerate_partitions(0, 2)), vec![Vec::<usize>::new()]);
    assert_eq!(rows(&enumerate_partitions(2, 2)), vec![vec![2], vec![1, 1]]);
    assert_eq!(rows(&enumerate_partitions(5, 2)), common::partitions_brute(5, 2));
    assert_eq!(rows(&enumerate_partitions(5, 2)), vec![vec![5], vec![4, 1], vec![3, 2]]);
}

#[test]
fn enumeration_matches_brute_force() {
    for n in 0..=9 {
        for h in 1..=4 {
            assert_eq!(rows(&enumerate_partitions(n, h)), common::partitions_brute(n, h), "n={n} h={h}");
        }
    }
}

#[test]
fn dimension_examples() {
    assert_eq!(specht(&p(&[1])).unwrap(), 1);
    assert_eq!(specht(&p(&[2, 1])).unwrap(), common::count_syt(&[2, 1]));
    assert_eq!(specht(&p(&[2, 2, 1])).unwrap(), 5);
    assert_eq!(weyl(&p(&[2]), 2).unwrap(), 3);
    assert_eq!(weyl(&p(&[1]), 5).unwrap(), 5);
    assert_eq!(weyl(&p(&[1, 1, 1]), 2).unwrap(), 0);
}

#[test]
fn add_box_examples() {
    let a = add_box(&p(&[1]), 2);
    assert_eq!(a.children, vec![p(&[2]), p(&[1, 1])]);
    assert_eq!(a.theta, None);
    let a = add_box(&p(&[2, 1]), 2);
    assert_eq!(a.children, vec![p(&[3, 1]), p(&[2, 2])]);
    assert_eq!(a.theta, Some(p(&[2, 1, 1])));
    let a = add_box(&p(&[2]), 1);
    assert_eq!(a.children, vec![p(&[3])]);
    assert_eq!(a.theta, Some(p(&[2, 1])));
}

#[test]
fn remove_box_examples() {
    assert_eq!(remove_box(&p(&[1])).unwrap(), vec![Partition::empty()]);
    assert_eq!(remove_box(&p(&[2, 1])).unwrap(), vec![p(&[1, 1]), p(&[2])]);
    assert_eq!(remove_box(&p(&[3, 3])).unwrap(), vec![p(&[3, 2])]);
    assert!(remove_box(&Partition::empty()).is_err());
}

#[test]
fn induced_dimension_up_to_eight() {
    for n in 2..=8 {
        for a in enumerate_partitions(n - 2, n) {
            let all: usize = add_box(&a, n).children.iter().map(|c| specht(c).unwrap()).sum();
            assert_eq!((n - 1) * specht(&a).unwrap(), all, "α={a}");
            for d in 1..=3 {
                if a.height() > d {
                    continue;
                }
                let b = add_box(&a, d);
                let dt = b.theta.as_ref().map_or(0, |t| specht(t).unwrap());
                let kids: usize = b.children.iter().map(|c| specht(c).unwrap()).sum();
                assert_eq!(kids + dt, all);
            }
        }
    }
}

#[test]
fn schur_weyl_dimension_count() {
    for n in 0..=8 {
        for d in 1..=3 {
            let total: usize = enumerate_partitions(n, d)
                .iter()
                .map(|l| specht(l).unwrap() * weyl(l, d).unwrap())
                .sum();
            assert_eq!(total, d.pow(n as u32), "n={n} d={d}");
        }
    }
}

#[test]
fn large_dimensions_report_overflow() {
    let big = p(&[40, 39, 38, 37, 36, 35, 34, 33, 32, 31]);
    assert!(matches!(specht(&big), Err(pbt_core::PbtError::Overflow(_))));
}

fn partition_strategy() -> impl Strategy<Value = Vec<usize>> {
    (0usize..9, 1usize..5, any::<usize>()).prop_map(|(n, h, pick)| {
        let all = common::partitions_brute(n, h);
        all[pick % all.len()].clone()
    })
}

proptest! {
    #[test]
    fn specht_counts_standard_tableaux(r in partition_strategy()) {
        prop_assert_eq!(specht(&p(&r)).unwrap(), common::count_syt(&r));
    }

    #[test]
    fn weyl_counts_semistandard_tableaux(r in partition_strategy(), d in 1usize..4) {
        prop_assert_eq!(weyl(&p(&r), d).unwrap(), common::count_ssyt(&r, d));
    }

    #[test]
    fn add_and_remove_are_inverse(r in partition_strategy(), extra in 0usize..3) {
        let a = p(&r);
        let d = a.height().max(1) + extra;
        let b = add_box(&a, d);
        prop_assert_eq!(b.theta.is_some(), a.height() == d);
        for c in b.children.iter().chain(b.theta.iter()) {
            prop_assert_eq!(c.n(), a.n() + 1);
            prop_assert!(remove_box(c).unwrap().contains(&a));
            prop_assert!(c.height() <= d || Some(c) == b.theta.as_ref());
        }
        if a.n() > 0 {
            for s in remove_box(&a).unwrap() {
                prop_assert!(add_box(&s, a.n() + 1).children.contains(&a));
            }
        }
    }

    #[test]
    fn display_round_trips(r in partition_strategy()) {
        let a = p(&r);
        prop_assert_eq!(a.to_string().parse::<Partition>().unwrap(), a);
    }
}
