//! One-dimensional quadrature rules.

use crate::error::{Error, Result};
use crate::scalar::{cst, to_f64, Real};

const XGK: [f64; 8] = [
    0.991_455_371_120_812_6,
    0.949_107_912_342_758_5,
    0.864_864_423_359_769_1,
    0.741_531_185_599_394_4,
    0.586_087_235_467_691_1,
    0.405_845_151_377_397_2,
    0.207_784_955_007_898_5,
    0.0,
];
const WGK: [f64; 8] = [
    0.022_935_322_010_529_22,
    0.063_092_092_629_978_55,
    0.104_790_010_322_250_2,
    0.140_653_259_715_525_9,
    0.169_004_726_639_267_9,
    0.190_350_578_064_785_4,
    0.204_432_940_075_298_9,
    0.209_482_141_084_727_8,
];
const WG: [f64; 4] = [
    0.129_484_966_168_869_7,
    0.279_705_391_489_276_7,
    0.381_830_050_505_118_9,
    0.417_959_183_673_469_4,
];

fn gk15<T: Real, F: Fn(T) -> T>(f: &F, a: T, b: T) -> (T, T) {
    let half = (b - a) / cst(2.0);
    let mid = (a + b) / cst(2.0);
    let fc = f(mid);
    let mut kron = fc * cst(WGK[7]);
    let mut gauss = fc * cst(WG[3]);
    for j in 0..7 {
        let dx = half * cst(XGK[j]);
        let s = f(mid - dx) + f(mid + dx);
        kron += s * cst(WGK[j]);
        if j % 2 == 1 {
            gauss += s * cst(WG[j / 2]);
        }
    }
    (kron * half, ((kron - gauss) * half).abs())
}

/// Adaptive Gauss-Kronrod 7/15 on `[a, b]`; returns the value and an error estimate.
pub fn integrate<T: Real, F: Fn(T) -> T>(f: F, a: T, b: T, rel_tol: T, abs_tol: T) -> Result<(T, T)> {
    let mut stack = vec![(a, b, 0usize)];
    let mut total = T::zero();
    let mut err = T::zero();
    let (whole, _) = gk15(&f, a, b);
    let scale = whole.abs();
    while let Some((lo, hi, depth)) = stack.pop() {
        let (v, e) = gk15(&f, lo, hi);
        let width_share = (hi - lo) / (b - a);
        let local = (rel_tol * scale).max(abs_tol) * width_share;
        let roundoff = cst::<T>(50.0) * T::epsilon() * (v.abs() + scale * width_share);
        if e <= local || e <= roundoff || depth >= 48 {
            if depth >= 48 && e > local {
                return Err(Error::QuadratureNotConverged {
                    what: "adaptive Gauss-Kronrod".into(),
                    achieved: to_f64(e),
                    requested: to_f64(local),
                });
            }
            total += v;
            err += e;
        } else {
            let mid = (lo + hi) / cst(2.0);
            stack.push((mid, hi, depth + 1));
            stack.push((lo, mid, depth + 1));
        }
    }
    Ok((total, err))
}

/// Gauss-Legendre nodes and weights on `[-1, 1]`.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut x = vec![0.0; n];
    let mut w = vec![0.0; n];
    for i in 0..n.div_ceil(2) {
        let mut z = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, z);
            for k in 2..=n {
                let p2 = ((2 * k - 1) as f64 * z * p1 - (k - 1) as f64 * p0) / k as f64;
                p0 = p1;
                p1 = p2;
            }
            dp = n as f64 * (z * p1 - p0) / (z * z - 1.0);
            let dz = p1 / dp;
            z -= dz;
            if dz.abs() < 1e-16 {
                break;
            }
        }
        x[i] = -z;
        x[n - 1 - i] = z;
        let wi = 2.0 / ((1.0 - z * z) * dp * dp);
        w[i] = wi;
        w[n - 1 - i] = wi;
    }
    (x, w)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gk_integrates_gaussian() {
        let (v, e) = integrate(|x: f64| (-x * x / 2.0).exp(), 0.0, 10.0, 1e-12, 0.0).unwrap();
        assert!((v - (std::f64::consts::PI / 2.0).sqrt()).abs() < 1e-12);
        assert!(e < 1e-10);
    }

    #[test]
    fn gauss_legendre_exact_for_polynomials() {
        let (x, w) = gauss_legendre(5);
        let s: f64 = w.iter().sum();
        assert!((s - 2.0).abs() < 1e-14);
        let m8: f64 = x.iter().zip(&w).map(|(x, w)| w * x.powi(8)).sum();
        assert!((m8 - 2.0 / 9.0).abs() < 1e-14);
        let odd: f64 = x.iter().zip(&w).map(|(x, w)| w * x.powi(7)).sum();
        assert!(odd.abs() < 1e-15);
    }
}
