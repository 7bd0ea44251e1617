//! Sample summaries and normality diagnostics for integer counts.

use rand::Rng;
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal};

/// Moments and range of a sample.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Digest {
    pub n: usize,
    pub mean: f64,
    pub mean_se: f64,
    /// Unbiased variance.
    pub var: f64,
    /// Jackknife standard error of `var`.
    pub var_se: f64,
    pub skew: f64,
    pub exkurt: f64,
    pub min: f64,
    pub max: f64,
}

impl Digest {
    pub fn new(xs: &[f64]) -> Self {
        let n = xs.len();
        let nf = n as f64;
        let mean = xs.iter().sum::<f64>() / nf.max(1.0);
        let (mut m2, mut m3, mut m4) = (0.0, 0.0, 0.0);
        let (mut min, mut max) = (f64::INFINITY, f64::NEG_INFINITY);
        for &x in xs {
            let d = x - mean;
            m2 += d * d;
            m3 += d * d * d;
            m4 += d * d * d * d;
            min = min.min(x);
            max = max.max(x);
        }
        let var = if n > 1 { m2 / (nf - 1.0) } else { 0.0 };
        let (skew, exkurt) = if m2 > 0.0 {
            let c2 = m2 / nf;
            (m3 / nf / c2.powf(1.5), m4 / nf / (c2 * c2) - 3.0)
        } else {
            (0.0, 0.0)
        };
        Self {
            n,
            mean,
            mean_se: (var / nf.max(1.0)).sqrt(),
            var,
            var_se: jackknife_variance_se(xs),
            skew,
            exkurt,
            min,
            max,
        }
    }

    pub fn sd(&self) -> f64 {
        self.var.sqrt()
    }
}

/// Jackknife standard error of the unbiased variance, from the closed-form leave-one-out values.
pub fn jackknife_variance_se(xs: &[f64]) -> f64 {
    let n = xs.len();
    if n < 3 {
        return 0.0;
    }
    let nf = n as f64;
    let mean = xs.iter().sum::<f64>() / nf;
    let d: Vec<f64> = xs.iter().map(|x| x - mean).collect();
    let s1: f64 = d.iter().sum();
    let s2: f64 = d.iter().map(|x| x * x).sum();
    let loo: Vec<f64> = d
        .iter()
        .map(|&x| (s2 - x * x - (s1 - x) * (s1 - x) / (nf - 1.0)) / (nf - 2.0))
        .collect();
    let bar = loo.iter().sum::<f64>() / nf;
    ((nf - 1.0) / nf * loo.iter().map(|v| (v - bar) * (v - bar)).sum::<f64>()).sqrt()
}

fn gcd(a: u64, b: u64) -> u64 {
    if b == 0 {
        a
    } else {
        gcd(b, a % b)
    }
}

/// Common spacing of the observed values, at least 1.
pub fn lattice_span(counts: &[usize]) -> usize {
    let lo = counts.iter().copied().min().unwrap_or(0);
    let g = counts.iter().fold(0u64, |g, &c| gcd(g, (c - lo) as u64));
    g.max(1) as usize
}

/// Kolmogorov distance between the empirical law of integer counts and the normal law with the
/// given mean and sd discretized onto the observed lattice: the normal CDF is read at `k + span/2`.
pub fn ks_lattice(counts: &[usize], mean: f64, sd: f64) -> f64 {
    if counts.is_empty() || !(sd > 0.0) {
        return 1.0;
    }
    let normal = Normal::new(mean, sd).expect("positive sd");
    let half = lattice_span(counts) as f64 / 2.0;
    let mut sorted = counts.to_vec();
    sorted.sort_unstable();
    let n = sorted.len() as f64;
    let mut worst: f64 = 0.0;
    let mut i = 0;
    while i < sorted.len() {
        let k = sorted[i];
        let below = i as f64 / n;
        while i < sorted.len() && sorted[i] == k {
            i += 1;
        }
        let upto = i as f64 / n;
        // the discretized CDF is flat between lattice points, so the left limit at k equals its value one span down
        let g_k = normal.cdf(k as f64 + half);
        let g_prev = normal.cdf(k as f64 - half);
        worst = worst.max((upto - g_k).abs()).max((below - g_prev).abs());
    }
    worst
}

/// Linear-interpolation quantile of sorted data at level `p` in `[0, 1]`.
pub fn quantile_sorted(sorted: &[f64], p: f64) -> f64 {
    let h = (sorted.len() - 1) as f64 * p;
    let lo = h.floor() as usize;
    let hi = (lo + 1).min(sorted.len() - 1);
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

pub const QUANTILE_LEVELS: [f64; 7] = [0.01, 0.05, 0.25, 0.5, 0.75, 0.95, 0.99];

/// `(level, empirical quantile of z, standard normal quantile)`.
pub fn quantile_table(z: &[f64]) -> Vec<(f64, f64, f64)> {
    let mut sorted = z.to_vec();
    sorted.sort_by(f64::total_cmp);
    let std = Normal::new(0.0, 1.0).expect("standard normal");
    QUANTILE_LEVELS
        .iter()
        .map(|&p| (p, quantile_sorted(&sorted, p), std.inverse_cdf(p)))
        .collect()
}

/// Ordinary least squares `y = a + b x`; returns `(b, a)`.
pub fn linear_fit(x: &[f64], y: &[f64]) -> (f64, f64) {
    let n = x.len() as f64;
    let xb = x.iter().sum::<f64>() / n;
    let yb = y.iter().sum::<f64>() / n;
    let sxx: f64 = x.iter().map(|v| (v - xb) * (v - xb)).sum();
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - xb) * (b - yb)).sum();
    let b = sxy / sxx;
    (b, yb - b * xb)
}

/// Standard error of the OLS slope when `y_i` carries independent errors `se_i`.
pub fn slope_se(x: &[f64], se: &[f64]) -> f64 {
    let n = x.len() as f64;
    let xb = x.iter().sum::<f64>() / n;
    let sxx: f64 = x.iter().map(|v| (v - xb) * (v - xb)).sum();
    x.iter()
        .zip(se)
        .map(|(v, s)| ((v - xb) / sxx * s).powi(2))
        .sum::<f64>()
        .sqrt()
}

/// Percentile bootstrap interval for the slope of `log var` against `x`, resampling each cell.
pub fn bootstrap_slope_ci<R: Rng + ?Sized>(
    x: &[f64],
    cells: &[Vec<f64>],
    replicates: usize,
    level: f64,
    rng: &mut R,
) -> (f64, f64) {
    let mut slopes = Vec::with_capacity(replicates);
    let mut buf = Vec::new();
    for _ in 0..replicates {
        let ly: Vec<f64> = cells
            .iter()
            .map(|c| {
                buf.clear();
                buf.extend((0..c.len()).map(|_| c[rng.random_range(0..c.len())]));
                Digest::new(&buf).var.ln()
            })
            .collect();
        slopes.push(linear_fit(x, &ly).0);
    }
    slopes.sort_by(f64::total_cmp);
    let a = (1.0 - level) / 2.0;
    (quantile_sorted(&slopes, a), quantile_sorted(&slopes, 1.0 - a))
}

/// `|a - b|` in units of the joint standard error.
pub fn joint_z(a: f64, sa: f64, b: f64, sb: f64) -> f64 {
    let s = (sa * sa + sb * sb).sqrt();
    if s > 0.0 {
        (a - b).abs() / s
    } else if a == b {
        0.0
    } else {
        f64::INFINITY
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, Poisson, StandardNormal};

    #[test]
    fn digest_of_small_sample() {
        let d = Digest::new(&[1.0, 2.0, 3.0, 4.0]);
        assert_eq!(d.mean, 2.5);
        assert!((d.var - 5.0 / 3.0).abs() < 1e-15);
        assert!(d.skew.abs() < 1e-15);
        assert!((d.exkurt - (-1.36)).abs() < 1e-12);
        assert_eq!((d.min, d.max), (1.0, 4.0));
    }

    #[test]
    fn jackknife_matches_brute_force() {
        let xs: Vec<f64> = (0..40).map(|i| ((i * 17) % 13) as f64 + 0.1 * i as f64).collect();
        let n = xs.len() as f64;
        let loo: Vec<f64> = (0..xs.len())
            .map(|i| {
                let v: Vec<f64> = xs.iter().enumerate().filter(|&(j, _)| j != i).map(|(_, &x)| x).collect();
                Digest::new(&v).var
            })
            .collect();
        let bar = loo.iter().sum::<f64>() / n;
        let brute = ((n - 1.0) / n * loo.iter().map(|v| (v - bar).powi(2)).sum::<f64>()).sqrt();
        assert!((jackknife_variance_se(&xs) - brute).abs() < 1e-10 * brute);
    }

    #[test]
    fn jackknife_se_matches_normal_theory() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let xs: Vec<f64> = (0..20000).map(|_| StandardNormal.sample(&mut rng)).collect();
        // Var(s^2) = 2 sigma^4 / (n - 1) for normal data
        let theory = (2.0 / 19999.0f64).sqrt();
        assert!((jackknife_variance_se(&xs) / theory - 1.0).abs() < 0.05);
    }

    #[test]
    fn ks_of_poisson_against_its_normal_limit() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let law = Poisson::new(400.0).unwrap();
        let counts: Vec<usize> = (0..4000).map(|_| law.sample(&mut rng) as usize).collect();
        let d = Digest::new(&counts.iter().map(|&c| c as f64).collect::<Vec<_>>());
        let ks = ks_lattice(&counts, d.mean, d.sd());
        assert!(ks < 1.358 / 4000f64.sqrt() + 0.02, "{ks}");
        // without the half-span shift the distance is of order one lattice step of the density
        let shifted: Vec<usize> = counts.iter().map(|&c| 2 * c).collect();
        assert_eq!(lattice_span(&shifted), 2);
        let ds = ks_lattice(&shifted, 2.0 * d.mean, 2.0 * d.sd());
        assert!((ds - ks).abs() < 1e-12);
    }

    #[test]
    fn quantiles() {
        let s: Vec<f64> = (0..=100).map(|i| i as f64).collect();
        assert_eq!(quantile_sorted(&s, 0.25), 25.0);
        assert_eq!(quantile_sorted(&s, 0.995), 99.5);
        let t = quantile_table(&s);
        assert_eq!(t.len(), 7);
        assert!((t[3].2).abs() < 1e-12);
    }

    #[test]
    fn fit_recovers_line() {
        let x = [1.0, 2.0, 3.0, 4.0];
        let y: Vec<f64> = x.iter().map(|v| 0.5 + 2.0 * v).collect();
        let (b, a) = linear_fit(&x, &y);
        assert!((b - 2.0).abs() < 1e-14 && (a - 0.5).abs() < 1e-14);
        assert!((slope_se(&x, &[1.0; 4]) - 1.0 / 5f64.sqrt()).abs() < 1e-14);
    }

    #[test]
    fn bootstrap_interval_covers_true_slope() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let x: Vec<f64> = [32.0f64, 64.0, 128.0].iter().map(|v| v.ln()).collect();
        let cells: Vec<Vec<f64>> = [32.0f64, 64.0, 128.0]
            .iter()
            .map(|&s| {
                (0..2000)
                    .map(|_| {
                        let g: f64 = StandardNormal.sample(&mut rng);
                        s.sqrt() * g
                    })
                    .collect()
            })
            .collect();
        let (lo, hi) = bootstrap_slope_ci(&x, &cells, 300, 0.95, &mut rng);
        assert!(lo < 1.0 && 1.0 < hi, "{lo} {hi}");
        assert!(hi - lo < 0.3);
    }

    proptest! {
        #[test]
        fn standardized_sample_has_zero_mean_unit_variance(xs in prop::collection::vec(-1e3f64..1e3, 3..200)) {
            let d = Digest::new(&xs);
            prop_assume!(d.var > 1e-6);
            let z: Vec<f64> = xs.iter().map(|x| (x - d.mean) / d.sd()).collect();
            let dz = Digest::new(&z);
            prop_assert!(dz.mean.abs() < 1e-9);
            prop_assert!((dz.var - 1.0).abs() < 1e-9);
            prop_assert!((dz.skew - d.skew).abs() < 1e-6 * (1.0 + d.skew.abs()));
        }

        #[test]
        fn ks_is_a_distance(counts in prop::collection::vec(0usize..50, 1..100), mean in 0.0f64..50.0, sd in 0.1f64..20.0) {
            let k = ks_lattice(&counts, mean, sd);
            prop_assert!((0.0..=1.0).contains(&k));
        }

        #[test]
        fn joint_z_is_symmetric(a in -10.0f64..10.0, b in -10.0f64..10.0, sa in 0.01f64..2.0, sb in 0.01f64..2.0) {
            prop_assert_eq!(joint_z(a, sa, b, sb), joint_z(b, sb, a, sa));
        }
    }
}
