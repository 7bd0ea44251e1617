use crate::scalar::{cst, Real};

/// Probabilists' Hermite polynomial `H_n(x)` by the three-term recurrence.
pub fn hermite<T: Real>(n: usize, x: T) -> T {
    let (mut a, mut b) = (T::one(), x);
    if n == 0 {
        return a;
    }
    for k in 1..n {
        let c = x * b - cst::<T>(k as f64) * a;
        a = b;
        b = c;
    }
    b
}

/// `[H_0(x), ..., H_nmax(x)]`.
pub fn hermite_all<T: Real>(nmax: usize, x: T) -> Vec<T> {
    let mut out = Vec::with_capacity(nmax + 1);
    hermite_fill(x, nmax, &mut out);
    out
}

/// Writes `H_0(x) .. H_nmax(x)` into `out` (cleared first).
#[inline]
pub fn hermite_fill<T: Real>(x: T, nmax: usize, out: &mut Vec<T>) {
    out.clear();
    out.push(T::one());
    if nmax == 0 {
        return;
    }
    out.push(x);
    for k in 1..nmax {
        let c = x * out[k] - cst::<T>(k as f64) * out[k - 1];
        out.push(c);
    }
}

/// `H_alpha(x) = prod_j H_{alpha_j}(x_j)`.
pub fn hermite_multi<T: Real>(alpha: &[usize], x: &[T]) -> T {
    alpha.iter().zip(x).map(|(&a, &xi)| hermite(a, xi)).fold(T::one(), |p, v| p * v)
}
