//! Young diagrams: enumeration, Specht and Weyl dimensions, one-box moves.

use std::fmt;
use std::str::FromStr;

use num_bigint::BigUint;
use num_traits::{One, ToPrimitive, Zero};
use serde::{Deserialize, Serialize};

use crate::error::{invalid, PbtError, Result};

/// A Young diagram stored as weakly decreasing positive row lengths.
/// The empty list is the unique partition of 0.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(try_from = "Vec<usize>", into = "Vec<usize>")]
pub struct Partition {
    rows: Vec<usize>,
}

impl Partition {
    pub fn new(rows: Vec<usize>) -> Result<Self> {
        if rows.iter().any(|&r| r == 0) {
            return invalid(format!("partition rows must be positive: {rows:?}"));
        }
        if rows.windows(2).any(|w| w[0] < w[1]) {
            return invalid(format!("partition rows must be weakly decreasing: {rows:?}"));
        }
        Ok(Partition { rows })
    }

    pub fn empty() -> Self {
        Partition { rows: Vec::new() }
    }

    pub fn rows(&self) -> &[usize] {
        &self.rows
    }

    /// Total number of boxes.
    pub fn n(&self) -> usize {
        self.rows.iter().sum()
    }

    pub fn height(&self) -> usize {
        self.rows.len()
    }

    /// Row length, zero past the last row.
    pub fn row(&self, i: usize) -> usize {
        self.rows.get(i).copied().unwrap_or(0)
    }

    /// Adds a box at the end of row `i` if the result is a diagram.
    pub fn with_box_in_row(&self, i: usize) -> Option<Partition> {
        if i > self.rows.len() {
            return None;
        }
        if i > 0 && self.row(i - 1) == self.row(i) {
            return None;
        }
        let mut rows = self.rows.clone();
        if i == rows.len() {
            rows.push(1);
        } else {
            rows[i] += 1;
        }
        Some(Partition { rows })
    }

    /// Removes the last box of row `i` if the result is a diagram.
    pub fn without_box_in_row(&self, i: usize) -> Option<Partition> {
        if i >= self.rows.len() || self.row(i + 1) == self.rows[i] {
            return None;
        }
        let mut rows = self.rows.clone();
        rows[i] -= 1;
        if rows[i] == 0 {
            rows.pop();
        }
        Some(Partition { rows })
    }

    /// Row index of the single box in `self / smaller`, if `smaller` is one box less.
    pub fn removed_row(&self, smaller: &Partition) -> Option<usize> {
        if smaller.n() + 1 != self.n() {
            return None;
        }
        let mut found = None;
        for i in 0..self.height() {
            match self.row(i).checked_sub(smaller.row(i)) {
                Some(0) => {}
                Some(1) if found.is_none() => found = Some(i),
                _ => return None,
            }
        }
        if smaller.height() > self.height() {
            return None;
        }
        found
    }
}

impl TryFrom<Vec<usize>> for Partition {
    type Error = PbtError;
    fn try_from(rows: Vec<usize>) -> Result<Self> {
        Partition::new(rows)
    }
}

impl From<Partition> for Vec<usize> {
    fn from(p: Partition) -> Self {
        p.rows
    }
}

impl fmt::Display for Partition {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "(")?;
        for (i, r) in self.rows.iter().enumerate() {
            if i > 0 {
                write!(f, ",")?;
            }
            write!(f, "{r}")?;
        }
        write!(f, ")")
    }
}

impl FromStr for Partition {
    type Err = PbtError;

    /// Accepts `(2,1)`, `2,1`, `()` and `∅`.
    fn from_str(s: &str) -> Result<Self> {
        let t = s.trim().trim_start_matches('(').trim_end_matches(')').trim();
        if t.is_empty() || t == "∅" {
            return Ok(Partition::empty());
        }
        let rows = t
            .split(',')
            .map(|x| {
                x.trim()
                    .parse::<usize>()
                    .map_err(|_| PbtError::InvalidArgument(format!("bad partition `{s}`")))
            })
            .collect::<Result<Vec<_>>>()?;
        Partition::new(rows)
    }
}

/// One-box additions to a parent diagram under a height bound.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct BoxAddition {
    pub parent: Partition,
    /// Children of height at most `d`, ordered by the row of the added box.
    pub children: Vec<Partition>,
    /// The height-(d+1) addition, present iff the parent has height `d`.
    pub theta: Option<Partition>,
}

/// All partitions of `n` with at most `max_height` rows, lexicographically decreasing.
pub fn enumerate_partitions(n: usize, max_height: usize) -> Vec<Partition> {
    fn rec(left: usize, cap: usize, rows_left: usize, cur: &mut Vec<usize>, out: &mut Vec<Partition>) {
        if left == 0 {
            out.push(Partition { rows: cur.clone() });
            return;
        }
        if rows_left == 0 {
            return;
        }
        for first in (1..=cap.min(left)).rev() {
            cur.push(first);
            rec(left - first, first, rows_left - 1, cur, out);
            cur.pop();
        }
    }
    let mut out = Vec::new();
    rec(n, n, max_height, &mut Vec::new(), &mut out);
    out
}

fn factorial(n: usize) -> BigUint {
    (1..=n).fold(BigUint::one(), |acc, k| acc * BigUint::from(k))
}

/// Number of standard tableaux of shape `lambda` (hook-length formula).
pub fn dim_specht(lambda: &Partition) -> BigUint {
    let mut hooks = BigUint::one();
    for (i, &len) in lambda.rows.iter().enumerate() {
        for j in 0..len {
            let arm = len - j - 1;
            let leg = lambda.rows[i + 1..].iter().filter(|&&r| r > j).count();
            hooks *= BigUint::from(arm + leg + 1);
        }
    }
    factorial(lambda.n()) / hooks
}

/// Number of semistandard tableaux of shape `lambda` with entries in `1..=d`
/// (Weyl dimension formula); zero when the height exceeds `d`.
pub fn dim_weyl(lambda: &Partition, d: usize) -> BigUint {
    if lambda.height() > d {
        return BigUint::zero();
    }
    let mut num = BigUint::one();
    let mut den = BigUint::one();
    for i in 0..d {
        for j in i + 1..d {
            num *= BigUint::from(lambda.row(i) - lambda.row(j) + j - i);
            den *= BigUint::from(j - i);
        }
    }
    num / den
}

pub fn to_u64(x: &BigUint, what: &str) -> Result<u64> {
    x.to_u64().ok_or_else(|| PbtError::Overflow(what.to_string()))
}

/// `dim_specht` narrowed to `usize`, reporting overflow.
pub fn specht(lambda: &Partition) -> Result<usize> {
    Ok(to_u64(&dim_specht(lambda), &format!("d_{lambda}"))? as usize)
}

/// `dim_weyl` narrowed to `usize`, reporting overflow.
pub fn weyl(lambda: &Partition, d: usize) -> Result<usize> {
    Ok(to_u64(&dim_weyl(lambda, d), &format!("m_{lambda}({d})"))? as usize)
}

pub fn add_box(alpha: &Partition, d: usize) -> BoxAddition {
    let mut children = Vec::new();
    let mut theta = None;
    for i in 0..=alpha.height() {
        if let Some(child) = alpha.with_box_in_row(i) {
            if child.height() <= d {
                children.push(child);
            } else if child.height() == d + 1 {
                theta = Some(child);
            }
        }
    }
    BoxAddition {
        parent: alpha.clone(),
        children,
        theta,
    }
}

/// All one-box removals, ordered by the removed row ascending.
pub fn remove_box(nu: &Partition) -> Result<Vec<Partition>> {
    if nu.n() == 0 {
        return invalid("cannot remove a box from the empty partition");
    }
    Ok((0..nu.height()).filter_map(|i| nu.without_box_in_row(i)).collect())
}

/// Smallest power of two that is at least `x` (with `x = 0` mapped to 1).
pub fn ceil_pow2(x: usize) -> usize {
    x.max(1).next_power_of_two()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn p(rows: &[usize]) -> Partition {
        Partition::new(rows.to_vec()).unwrap()
    }

    #[test]
    fn enumerate_small() {
        assert_eq!(enumerate_partitions(0, 2), vec![Partition::empty()]);
        assert_eq!(enumerate_partitions(2, 2), vec![p(&[2]), p(&[1, 1])]);
        assert_eq!(enumerate_partitions(5, 2), vec![p(&[5]), p(&[4, 1]), p(&[3, 2])]);
    }

    #[test]
    fn dims() {
        assert_eq!(specht(&p(&[1])).unwrap(), 1);
        assert_eq!(specht(&p(&[2, 1])).unwrap(), 2);
        assert_eq!(specht(&p(&[2, 2, 1])).unwrap(), 5);
        assert_eq!(weyl(&p(&[2]), 2).unwrap(), 3);
        assert_eq!(weyl(&p(&[1]), 5).unwrap(), 5);
        assert_eq!(weyl(&p(&[1, 1, 1]), 2).unwrap(), 0);
        assert_eq!(weyl(&Partition::empty(), 3).unwrap(), 1);
    }

    #[test]
    fn overflow_is_reported() {
        let big = p(&[40, 30, 20, 10]);
        assert!(matches!(specht(&big), Err(PbtError::Overflow(_))));
    }

    #[test]
    fn box_moves() {
        let a = add_box(&p(&[1]), 2);
        assert_eq!(a.children, vec![p(&[2]), p(&[1, 1])]);
        assert!(a.theta.is_none());
        let a = add_box(&p(&[2, 1]), 2);
        assert_eq!(a.children, vec![p(&[3, 1]), p(&[2, 2])]);
        assert_eq!(a.theta, Some(p(&[2, 1, 1])));
        let a = add_box(&p(&[2]), 1);
        assert_eq!(a.children, vec![p(&[3])]);
        assert_eq!(a.theta, Some(p(&[2, 1])));

        assert_eq!(remove_box(&p(&[1])).unwrap(), vec![Partition::empty()]);
        assert_eq!(remove_box(&p(&[2, 1])).unwrap(), vec![p(&[1, 1]), p(&[2])]);
        assert_eq!(remove_box(&p(&[3, 3])).unwrap(), vec![p(&[3, 2])]);
        assert!(remove_box(&Partition::empty()).is_err());
    }

    #[test]
    fn parse_and_display() {
        assert_eq!("(2,1)".parse::<Partition>().unwrap(), p(&[2, 1]));
        assert_eq!("∅".parse::<Partition>().unwrap(), Partition::empty());
        assert_eq!(p(&[3, 1]).to_string(), "(3,1)");
        assert!("1,2".parse::<Partition>().is_err());
        assert_eq!(p(&[3, 1]).removed_row(&p(&[3])), Some(1));
        assert_eq!(p(&[3, 1]).removed_row(&p(&[2, 1])), Some(0));
        assert_eq!(p(&[3, 1]).removed_row(&p(&[2, 2])), None);
    }
}
