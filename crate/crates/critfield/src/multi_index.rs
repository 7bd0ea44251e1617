//! Multi-index bookkeeping shared by the covariance jets and the chaos coefficients.

use std::collections::HashMap;
use std::sync::{Arc, Mutex, OnceLock};

/// Sum of the entries of a multi-index.
pub fn order(alpha: &[usize]) -> usize {
    alpha.iter().sum()
}

/// All multi-indices of length `m` and total order exactly `q`, lexicographically descending.
pub fn of_order(m: usize, q: usize) -> Vec<Vec<usize>> {
    let mut out = Vec::new();
    let mut cur = vec![0usize; m];
    fill(&mut out, &mut cur, 0, q);
    out
}

fn fill(out: &mut Vec<Vec<usize>>, cur: &mut [usize], pos: usize, left: usize) {
    let m = cur.len();
    if m == 0 {
        if left == 0 {
            out.push(Vec::new());
        }
        return;
    }
    if pos == m - 1 {
        cur[pos] = left;
        out.push(cur.to_vec());
        return;
    }
    for v in (0..=left).rev() {
        cur[pos] = v;
        fill(out, cur, pos + 1, left - v);
    }
    cur[pos] = 0;
}

/// Graded lexicographic enumeration of all multi-indices with order at most `max_order`.
pub fn graded(m: usize, max_order: usize) -> Vec<Vec<usize>> {
    (0..=max_order).flat_map(|q| of_order(m, q)).collect()
}

/// Multi-index of a derivative given as a list of axes, e.g. `[0, 0, 1]` is d1 d1 d2.
pub fn from_axes(m: usize, axes: &[usize]) -> Vec<usize> {
    let mut a = vec![0usize; m];
    for &ax in axes {
        a[ax] += 1;
    }
    a
}

/// Entrywise sum of two multi-indices.
pub fn add(a: &[usize], b: &[usize]) -> Vec<usize> {
    a.iter().zip(b).map(|(x, y)| x + y).collect()
}

/// alpha! as a float.
pub fn factorial(alpha: &[usize]) -> f64 {
    alpha
        .iter()
        .map(|&a| (1..=a).map(|i| i as f64).product::<f64>())
        .product()
}

/// Lookup table from multi-index to a dense position.
#[derive(Debug)]
pub struct MultiIndexTable {
    m: usize,
    max_order: usize,
    list: Vec<Vec<usize>>,
    index: HashMap<Vec<usize>, usize>,
}

impl MultiIndexTable {
    pub fn new(m: usize, max_order: usize) -> Self {
        let list = graded(m, max_order);
        let index = list.iter().cloned().enumerate().map(|(i, a)| (a, i)).collect();
        Self {
            m,
            max_order,
            list,
            index,
        }
    }

    /// Process-wide shared table for `(m, max_order)`.
    pub fn shared(m: usize, max_order: usize) -> Arc<Self> {
        static CACHE: OnceLock<Mutex<HashMap<(usize, usize), Arc<MultiIndexTable>>>> =
            OnceLock::new();
        let cache = CACHE.get_or_init(|| Mutex::new(HashMap::new()));
        let mut guard = cache.lock().unwrap();
        guard
            .entry((m, max_order))
            .or_insert_with(|| Arc::new(Self::new(m, max_order)))
            .clone()
    }

    pub fn dim(&self) -> usize {
        self.m
    }

    pub fn max_order(&self) -> usize {
        self.max_order
    }

    pub fn len(&self) -> usize {
        self.list.len()
    }

    pub fn is_empty(&self) -> bool {
        self.list.is_empty()
    }

    pub fn indices(&self) -> &[Vec<usize>] {
        &self.list
    }

    pub fn position(&self, alpha: &[usize]) -> Option<usize> {
        self.index.get(alpha).copied()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn counts_match_binomials() {
        // number of multi-indices of length m and order <= q is C(m+q, m)
        assert_eq!(graded(1, 6).len(), 7);
        assert_eq!(graded(2, 4).len(), 15);
        assert_eq!(graded(3, 6).len(), 84);
    }

    #[test]
    fn graded_lex_order() {
        let g = graded(2, 2);
        assert_eq!(
            g,
            vec![
                vec![0, 0],
                vec![1, 0],
                vec![0, 1],
                vec![2, 0],
                vec![1, 1],
                vec![0, 2]
            ]
        );
    }

    #[test]
    fn table_roundtrip() {
        let t = MultiIndexTable::new(3, 4);
        for (i, a) in t.indices().iter().enumerate() {
            assert_eq!(t.position(a), Some(i));
        }
        assert_eq!(t.position(&[5, 0, 0]), None);
        assert_eq!(from_axes(3, &[2, 0, 2]), vec![1, 0, 2]);
        assert_eq!(factorial(&[3, 2]), 12.0);
    }
}
