use super::CriticalPointRecord;
use crate::error::{Error, Result};

/// Representative of `t` in `[-1/2, 1/2)`.
fn centered(t: f64) -> f64 {
    let c = (t + 0.5).rem_euclid(1.0) - 0.5;
    if c >= 0.5 {
        -0.5
    } else {
        c
    }
}

/// Number of torus-chart records in `B_r = [-r/2, r/2)^m`, read modulo 1.
pub fn count_in_box(records: &[CriticalPointRecord], r: f64) -> usize {
    if r >= 1.0 {
        return records.len();
    }
    records
        .iter()
        .filter(|rec| rec.position.iter().all(|&t| {
            let c = centered(t);
            c >= -r / 2.0 && c < r / 2.0
        }))
        .count()
}

/// Number of records in the non-periodic box `[-side/2, side/2)^m`.
pub fn count_in_centered_box(records: &[CriticalPointRecord], side: f64) -> usize {
    records
        .iter()
        .filter(|rec| rec.position.iter().all(|&x| x >= -side / 2.0 && x < side / 2.0))
        .count()
}

/// Torus-chart records within `1e-10` of the boundary of `B_r`.
pub fn boundary_hits(records: &[CriticalPointRecord], r: f64) -> usize {
    if r >= 1.0 {
        return 0;
    }
    records
        .iter()
        .filter(|rec| rec.position.iter().any(|&t| (centered(t).abs() - r / 2.0).abs() < 1e-10))
        .count()
}

/// Upper bound `m! (2 nu)^m` on the number of nondegenerate critical points of a trigonometric
/// polynomial whose Newton polytope lies in `[-nu, nu]^m`.
pub fn bk_upper_bound(nu: u64, m: u32) -> u64 {
    let fact: u64 = (1..=m as u64).product();
    fact * (2 * nu).pow(m)
}

/// Outcome of the topological self-checks on a full-torus enumeration.
#[derive(Clone, Debug, PartialEq)]
pub struct MorseCheck {
    pub passed: bool,
    pub total: usize,
    /// Count of points of each Morse index `0..=m`.
    pub per_index: Vec<usize>,
    /// Alternating sum of the index counts.
    pub euler: i64,
    pub detail: String,
}

impl MorseCheck {
    pub fn require(self) -> Result<Self> {
        if self.passed {
            Ok(self)
        } else {
            Err(Error::EnumerationIncomplete(self.detail))
        }
    }
}

fn binomial(n: usize, k: usize) -> usize {
    (0..k).fold(1, |acc, i| acc * (n - i) / (i + 1))
}

/// Checks the Euler characteristic of `T^m` and the Morse inequalities `c_i >= binom(m, i)`.
pub fn morse_lower_bound_check(records: &[CriticalPointRecord], m: usize) -> MorseCheck {
    let mut per_index = vec![0usize; m + 1];
    for r in records {
        if r.morse_index <= m {
            per_index[r.morse_index] += 1;
        }
    }
    let euler: i64 = per_index
        .iter()
        .enumerate()
        .map(|(i, &c)| if i % 2 == 0 { c as i64 } else { -(c as i64) })
        .sum();
    let mut problems = Vec::new();
    if euler != 0 {
        problems.push(format!("alternating sum {euler}"));
    }
    if records.len() < 1 << m {
        problems.push(format!("{} points, fewer than {}", records.len(), 1 << m));
    }
    for (i, &c) in per_index.iter().enumerate() {
        if c < binomial(m, i) {
            problems.push(format!("{c} points of index {i}, fewer than {}", binomial(m, i)));
        }
    }
    MorseCheck {
        passed: problems.is_empty(),
        total: records.len(),
        per_index,
        euler,
        detail: problems.join("; "),
    }
}
