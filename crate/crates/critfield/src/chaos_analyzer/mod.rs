//! Wiener-chaos coefficients of the critical-point density and partial sums of the chaos variance.

use std::collections::HashMap;

use num_rational::Ratio;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::gaussian_toolkit::{det_from_coords, hermite_fill, nu, GaussianSampler, SymmetricMatrix};
use crate::kac_rice_engine::variance::{gl_nodes, radial_nodes};
use crate::kac_rice_engine::{gradient_covariance, hessian_covariance, jet_pair_covariance};
use crate::moments::Welford;
use crate::multi_index;
use crate::spectral_weights::{correlation_scales, jet_at, sphere_area, WeightSpec};

/// Largest order accepted by [`d_alpha`].
pub const MAX_D_ORDER: usize = 40;

/// Fixed number of RNG substreams used for coefficient estimation, independent of the thread count.
const COEFF_CHUNKS: usize = 64;

fn check_d_index(alpha: &[usize]) -> Result<()> {
    if multi_index::order(alpha) > MAX_D_ORDER {
        return Err(Error::InvalidArgument(format!("|alpha| must be at most {MAX_D_ORDER}")));
    }
    Ok(())
}

/// Rational part of `d_alpha`: `prod_k H_{alpha_k}(0) / alpha_k!`.
///
/// `H_{2r}(0) / (2r)! = (-1)^r / (2^r r!)` and odd entries give 0.
pub fn d_alpha_rational(alpha: &[usize]) -> Result<Ratio<i128>> {
    check_d_index(alpha)?;
    let mut out = Ratio::from_integer(1i128);
    for &a in alpha {
        if a % 2 == 1 {
            return Ok(Ratio::from_integer(0));
        }
        let r = (a / 2) as i128;
        let den: i128 = (1..=r).product::<i128>() << r;
        let sign = if r % 2 == 0 { 1 } else { -1 };
        out *= Ratio::new(sign, den);
    }
    Ok(out)
}

/// `d_alpha = H_alpha(0) / alpha! (2 pi)^{-m/2}` with `m = alpha.len()`.
pub fn d_alpha(alpha: &[usize]) -> Result<f64> {
    let r = d_alpha_rational(alpha)?;
    let m = alpha.len() as i32;
    Ok(*r.numer() as f64 / *r.denom() as f64 * (2.0 * std::f64::consts::PI).powf(-m as f64 / 2.0))
}

/// Hermite coefficients of `f(A) = |det(Lambda_2 A)|` and the gradient normalisation.
#[derive(Clone, Debug)]
pub struct ChaosCoefficients {
    pub m: usize,
    pub hbar: f64,
    /// Symmetric square root of the gradient covariance.
    pub lambda1: SymmetricMatrix<f64>,
    /// Symmetric square root of the covariance of the Hessian coordinates.
    pub lambda2: SymmetricMatrix<f64>,
    /// `1 / det Lambda_1`.
    pub omega: f64,
    pub q_max: usize,
    /// `(beta, f_beta, se)` in graded lexicographic order.
    pub f: Vec<(Vec<usize>, f64, f64)>,
    /// `(alpha, d_alpha)` for `|alpha| <= q_max`, graded lexicographic.
    pub d: Vec<(Vec<usize>, f64)>,
    /// Monte-Carlo `E[f(A)^2]` and its standard error.
    pub second_moment: (f64, f64),
    pub samples: usize,
    index: HashMap<Vec<usize>, usize>,
}

impl ChaosCoefficients {
    pub fn f_beta(&self, beta: &[usize]) -> Option<(f64, f64)> {
        self.index.get(beta).map(|&i| (self.f[i].1, self.f[i].2))
    }

    /// `sum_{|beta| <= q} f_beta^2 beta!`, the squared norm of the projection onto chaoses up to `q`.
    pub fn bessel_sum(&self, q: usize) -> f64 {
        self.f
            .iter()
            .filter(|(b, _, _)| multi_index::order(b) <= q)
            .map(|(b, v, _)| v * v * multi_index::factorial(b))
            .sum()
    }

    /// Fails with a tolerance error if any `f_beta` has a standard error above `tol`.
    pub fn require_se(&self, tol: f64) -> Result<()> {
        match self.f.iter().find(|(_, _, se)| *se > tol) {
            Some((b, _, se)) => Err(Error::Tolerance(format!("f_{b:?} has standard error {se:e} above {tol:e}"))),
            None => Ok(()),
        }
    }

    /// Terms `(alpha, beta, omega d_alpha f_beta)` of `rho_q`, dropping the exact zeros.
    ///
    /// `|det|` is even, so `f_beta` vanishes for odd `|beta|`; those estimates are pure noise and are left out.
    fn rho_terms(&self, q: usize) -> Vec<(Vec<usize>, Vec<usize>, f64)> {
        let mut out = Vec::new();
        for (alpha, d) in self.d.iter().filter(|(a, d)| multi_index::order(a) <= q && *d != 0.0) {
            let rest = q - multi_index::order(alpha);
            if rest % 2 == 1 {
                continue;
            }
            for beta in multi_index::of_order(nu(self.m), rest) {
                let (f, _) = self.f_beta(&beta).unwrap();
                out.push((alpha.clone(), beta, self.omega * d * f));
            }
        }
        out
    }
}

fn max_order_for(m: usize) -> usize {
    if m == 1 {
        6
    } else {
        4
    }
}

/// Estimates `f_beta = E[f(A) H_beta(A)] / beta!` for `|beta| <= q_max`, with `A` standard Gaussian in
/// dimension `nu(m)` and `f(A) = |det|` of the Hessian with coordinates `Lambda_2 A`.
pub fn hessian_hermite_coeffs<R: Rng + ?Sized>(
    spec: &WeightSpec<f64>,
    m: usize,
    hbar: f64,
    q_max: usize,
    mc_samples: usize,
    rng: &mut R,
) -> Result<ChaosCoefficients> {
    if !(1..=3).contains(&m) {
        return Err(Error::InvalidArgument(format!("dimension must be 1, 2 or 3, got {m}")));
    }
    if q_max > max_order_for(m) {
        return Err(Error::InvalidArgument(format!(
            "q_max {q_max} above the limit {} for m = {m}",
            max_order_for(m)
        )));
    }
    if mc_samples < 2 {
        return Err(Error::InvalidArgument("need at least two samples".into()));
    }
    let jet = jet_at(spec, m, hbar, &vec![0.0; m], 4)?;
    let lambda1 = gradient_covariance(&jet).sqrt_psd()?;
    let lambda2 = hessian_covariance(&jet).sqrt_psd()?;
    let omega = 1.0 / lambda1.determinant();
    let k = nu(m);
    let betas = multi_index::graded(k, q_max);
    let base: u64 = rng.random();

    let per_chunk: Vec<(Vec<Welford<f64>>, Welford<f64>)> = (0..COEFF_CHUNKS)
        .into_par_iter()
        .map(|c| {
            let n = mc_samples / COEFF_CHUNKS + usize::from(c < mc_samples % COEFF_CHUNKS);
            let mut r = ChaCha8Rng::seed_from_u64(base);
            r.set_stream(c as u64);
            let mut acc = vec![Welford::new(); betas.len()];
            let mut sq = Welford::new();
            let mut a = vec![0.0; k];
            let mut h: Vec<Vec<f64>> = vec![Vec::new(); k];
            for _ in 0..n {
                for x in a.iter_mut() {
                    *x = r.sample(rand_distr::StandardNormal);
                }
                let coords = lambda2.mul_vec(&a);
                let f = det_from_coords(m, &coords).abs();
                for (j, hj) in h.iter_mut().enumerate() {
                    hermite_fill(a[j], q_max, hj);
                }
                for (w, beta) in acc.iter_mut().zip(&betas) {
                    let hb: f64 = beta.iter().enumerate().map(|(j, &bj)| h[j][bj]).product();
                    w.push(f * hb);
                }
                sq.push(f * f);
            }
            (acc, sq)
        })
        .collect();

    let mut acc = vec![Welford::new(); betas.len()];
    let mut sq = Welford::new();
    for (a, s) in &per_chunk {
        for (t, x) in acc.iter_mut().zip(a) {
            t.merge(x);
        }
        sq.merge(s);
    }
    let f: Vec<(Vec<usize>, f64, f64)> = betas
        .iter()
        .zip(&acc)
        .map(|(b, w)| {
            let fac = multi_index::factorial(b);
            (b.clone(), w.mean() / fac, w.std_error() / fac)
        })
        .collect();
    let index = f.iter().enumerate().map(|(i, (b, _, _))| (b.clone(), i)).collect();
    let d = multi_index::graded(m, q_max)
        .into_iter()
        .map(|a| {
            let v = d_alpha(&a)?;
            Ok((a, v))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(ChaosCoefficients {
        m,
        hbar,
        lambda1,
        lambda2,
        omega,
        q_max,
        f,
        d,
        second_moment: (sq.mean(), sq.std_error()),
        samples: mc_samples,
        index,
    })
}

/// Zeroth-chaos mean `(2 pi)^{-m/2} omega f_0 |B|` with its standard error.
pub fn chaos_mean(coeffs: &ChaosCoefficients, volume: f64) -> (f64, f64) {
    let zero = vec![0; nu(coeffs.m)];
    let (f0, se) = coeffs.f_beta(&zero).unwrap();
    let c = (2.0 * std::f64::consts::PI).powf(-(coeffs.m as f64) / 2.0) * coeffs.omega * volume;
    (c * f0, c * se)
}

/// Whitened joint law of `(U(0), U(u), A(0), A(u))`.
fn whitened_pair(spec: &WeightSpec<f64>, coeffs: &ChaosCoefficients, u: &[f64]) -> Result<GaussianSampler<f64>> {
    let m = coeffs.m;
    let k = nu(m);
    let jc = jet_pair_covariance(spec, m, coeffs.hbar, u)?;
    let grads = jc.cov.submatrix(&jc.gradient_indices());
    let pivot = grads.eigenvalues()[0] / grads.max_abs();
    if pivot < crate::gaussian_toolkit::CONDITIONING_TOL {
        return Err(Error::DegenerateConditioning { smallest_pivot: pivot });
    }
    let inv1 = inverse(&coeffs.lambda1)?;
    let inv2 = inverse(&coeffs.lambda2)?;
    let n = 2 * m + 2 * k;
    // block-diagonal whitening T; cov_Xi = T cov T^t
    let t = |i: usize, j: usize| -> f64 {
        let (bi, oi) = block(i, m, k);
        let (bj, oj) = block(j, m, k);
        if bi != bj {
            return 0.0;
        }
        let inv = if bi < 2 { &inv1 } else { &inv2 };
        inv[oi][oj]
    };
    let tm: Vec<Vec<f64>> = (0..n).map(|i| (0..n).map(|j| t(i, j)).collect()).collect();
    let cov = SymmetricMatrix::from_fn(n, |i, j| {
        let mut s = 0.0;
        for a in 0..n {
            if tm[i][a] == 0.0 {
                continue;
            }
            for b in 0..n {
                s += tm[i][a] * jc.cov.get(a, b) * tm[j][b];
            }
        }
        s
    });
    GaussianSampler::with_tolerance(vec![0.0; n], &cov, 1e-9)
}

/// `(block id, offset in block)` of joint slot `i`; blocks 0 and 1 are gradients, 2 and 3 Hessians.
fn block(i: usize, m: usize, k: usize) -> (usize, usize) {
    if i < m {
        (0, i)
    } else if i < 2 * m {
        (1, i - m)
    } else if i < 2 * m + k {
        (2, i - 2 * m)
    } else {
        (3, i - 2 * m - k)
    }
}

fn inverse(s: &SymmetricMatrix<f64>) -> Result<Vec<Vec<f64>>> {
    let (vals, vecs) = s.eigen();
    if vals.iter().any(|&v| !(v > 0.0)) {
        return Err(Error::NotPsd { pivot: vals[0], index: 0 });
    }
    let n = s.dim();
    Ok((0..n)
        .map(|i| (0..n).map(|j| (0..n).map(|l| vecs[l][i] * vecs[l][j] / vals[l]).sum()).collect())
        .collect())
}

/// Per-draw products `rho_q(0) rho_q(u)` for `q = 1..=q_max`, accumulated with the running partial sums.
struct RhoAccumulator {
    terms: Vec<Vec<(Vec<usize>, Vec<usize>, f64)>>,
    per_q: Vec<Welford<f64>>,
    partial: Vec<Welford<f64>>,
}

impl RhoAccumulator {
    fn new(coeffs: &ChaosCoefficients, q_max: usize) -> Self {
        Self {
            terms: (0..=q_max).map(|q| coeffs.rho_terms(q)).collect(),
            per_q: vec![Welford::new(); q_max + 1],
            partial: vec![Welford::new(); q_max + 1],
        }
    }

    fn rho(terms: &[(Vec<usize>, Vec<usize>, f64)], hu: &[Vec<f64>], ha: &[Vec<f64>]) -> f64 {
        terms
            .iter()
            .map(|(a, b, c)| {
                let pa: f64 = a.iter().enumerate().map(|(j, &aj)| hu[j][aj]).product();
                let pb: f64 = b.iter().enumerate().map(|(j, &bj)| ha[j][bj]).product();
                c * pa * pb
            })
            .sum()
    }

    fn push(&mut self, x0: (&[Vec<f64>], &[Vec<f64>]), xu: (&[Vec<f64>], &[Vec<f64>])) {
        let mut cum = 0.0;
        for q in 1..self.terms.len() {
            let p = Self::rho(&self.terms[q], x0.0, x0.1) * Self::rho(&self.terms[q], xu.0, xu.1);
            cum += p;
            self.per_q[q].push(p);
            self.partial[q].push(cum);
        }
    }
}

fn rho_products<R: Rng + ?Sized>(
    spec: &WeightSpec<f64>,
    coeffs: &ChaosCoefficients,
    u: &[f64],
    q_max: usize,
    mc_samples: usize,
    rng: &mut R,
) -> Result<RhoAccumulator> {
    let m = coeffs.m;
    let k = nu(m);
    if u.len() != m {
        return Err(Error::InvalidArgument("separation has the wrong dimension".into()));
    }
    if q_max > coeffs.q_max {
        return Err(Error::InvalidArgument(format!("q = {q_max} exceeds the coefficient order {}", coeffs.q_max)));
    }
    let sampler = whitened_pair(spec, coeffs, u)?;
    let mut acc = RhoAccumulator::new(coeffs, q_max);
    let n = sampler.dim();
    let (mut noise, mut x) = (vec![0.0; n], vec![0.0; n]);
    let mut h: Vec<Vec<f64>> = vec![Vec::new(); n];
    for _ in 0..mc_samples {
        sampler.sample_into(rng, &mut noise, &mut x);
        for (j, hj) in h.iter_mut().enumerate() {
            hermite_fill(x[j], q_max, hj);
        }
        let (u0, rest) = h.split_at(m);
        let (uu, rest) = rest.split_at(m);
        let (a0, au) = rest.split_at(k);
        acc.push((u0, a0), (uu, au));
    }
    Ok(acc)
}

/// Monte-Carlo `E[rho_q(0) rho_q(u)]` and its standard error, from the jointly sampled whitened jets.
pub fn rho_q_correlation<R: Rng + ?Sized>(
    spec: &WeightSpec<f64>,
    coeffs: &ChaosCoefficients,
    q: usize,
    u: &[f64],
    mc_samples: usize,
    rng: &mut R,
) -> Result<(f64, f64)> {
    if q == 0 {
        return Err(Error::InvalidArgument("q must be positive; the zeroth chaos is constant".into()));
    }
    let acc = rho_products(spec, coeffs, u, q, mc_samples, rng)?;
    Ok((acc.per_q[q].mean(), acc.per_q[q].std_error()))
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ChaosSettings {
    pub mc_per_node: usize,
    /// Radius, in correlation lengths, of the innermost panel.
    pub r_sing_rel: f64,
    pub gl_order: usize,
}

impl Default for ChaosSettings {
    fn default() -> Self {
        Self {
            mc_per_node: 20_000,
            r_sing_rel: 1e-3,
            gl_order: 8,
        }
    }
}

/// One row of the chaos variance table.
#[derive(Clone, Debug, PartialEq)]
pub struct ChaosComponent {
    pub q: usize,
    pub s_q: f64,
    pub se: f64,
    /// `sum_{1 <= p <= q} S_p`.
    pub partial: f64,
    pub partial_se: f64,
}

/// `S_q = int_{R^m} E[rho_q(0) rho_q(u)] du` for `1 <= q <= q_max`, integrated radially under isotropy.
///
/// The integrand is bounded at `u = 0`, so the innermost ball is integrated like any other panel.
pub fn variance_chaos_partial<R: Rng + ?Sized>(
    spec: &WeightSpec<f64>,
    coeffs: &ChaosCoefficients,
    q_max: usize,
    settings: &ChaosSettings,
    rng: &mut R,
) -> Result<Vec<ChaosComponent>> {
    let m = coeffs.m;
    if m > 2 {
        return Err(Error::InvalidArgument("chaos variance supports m in {1, 2}".into()));
    }
    let scales = correlation_scales(spec, m)?;
    let corr = scales.correlation_length;
    let r_sing = settings.r_sing_rel * corr;
    let mut upper = scales.decay_radius;
    if coeffs.hbar > 0.0 {
        upper = upper.min(0.5 / coeffs.hbar);
    }
    let mut nodes = gl_nodes(r_sing * 1e-3, r_sing, settings.gl_order);
    nodes.extend(radial_nodes(corr, r_sing, upper, &[], settings.gl_order));
    let base: u64 = rng.random();
    let shell = if m == 1 { 2.0 } else { sphere_area(m) };
    let rows: Vec<RhoAccumulator> = nodes
        .par_iter()
        .enumerate()
        .map(|(i, &(r, _))| {
            let mut u = vec![0.0; m];
            u[0] = r;
            let mut node_rng = ChaCha8Rng::seed_from_u64(base);
            node_rng.set_stream(i as u64);
            rho_products(spec, coeffs, &u, q_max, settings.mc_per_node, &mut node_rng)
        })
        .collect::<Result<Vec<_>>>()?;
    let mut out = Vec::with_capacity(q_max);
    for q in 1..=q_max {
        let (mut s, mut v, mut p, mut pv) = (0.0, 0.0, 0.0, 0.0);
        for (&(r, w), acc) in nodes.iter().zip(&rows) {
            let jac = w * shell * r.powi(m as i32 - 1);
            s += jac * acc.per_q[q].mean();
            v += (jac * acc.per_q[q].std_error()).powi(2);
            p += jac * acc.partial[q].mean();
            pv += (jac * acc.partial[q].std_error()).powi(2);
        }
        out.push(ChaosComponent {
            q,
            s_q: s,
            se: v.sqrt(),
            partial: p,
            partial_se: pv.sqrt(),
        });
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kac_rice_engine::{density_exact_1d, density_route_main1_at};
    use std::f64::consts::PI;

    #[test]
    fn d_alpha_values() {
        let c = (2.0 * PI).powf(-0.5);
        assert!((d_alpha(&[0]).unwrap() - c).abs() < 1e-15);
        assert_eq!(d_alpha(&[1]).unwrap(), 0.0);
        assert!((d_alpha(&[2]).unwrap() + 0.5 * c).abs() < 1e-15);
        assert_eq!(d_alpha_rational(&[4, 2]).unwrap(), Ratio::new(-1, 16));
        assert!(d_alpha(&[40]).is_ok());
        assert!(d_alpha(&[41]).is_err());
        assert!(d_alpha(&[20, 22]).is_err());
    }

    #[test]
    fn d_alpha_signs_and_bound() {
        for r in 0..=20usize {
            let d = d_alpha(&[2 * r]).unwrap();
            assert_eq!(d > 0.0, r % 2 == 0);
            assert_eq!(d_alpha(&[2 * r + 1]).unwrap_or(0.0), 0.0);
        }
        for m in 1..=3 {
            for a in multi_index::graded(m, 12) {
                let d = d_alpha(&a).unwrap();
                assert!(d * d * multi_index::factorial(&a) <= (2.0 * PI).powf(-(m as f64) / 2.0) * (1.0 + 1e-12));
            }
        }
    }

    fn coeffs(m: usize, q: usize, n: usize, seed: u64) -> ChaosCoefficients {
        hessian_hermite_coeffs(&WeightSpec::gaussian(), m, 0.0, q, n, &mut ChaCha8Rng::seed_from_u64(seed)).unwrap()
    }

    #[test]
    fn f0_matches_hessian_law_and_odd_terms_vanish() {
        let c = coeffs(1, 6, 200_000, 1);
        // m = 1: f_0 = E|Y''| = sqrt(2 lambda_4 / pi)
        let l4 = c.lambda2.get(0, 0).powi(2);
        let (f0, se) = c.f_beta(&[0]).unwrap();
        assert!((f0 - (2.0 * l4 / PI).sqrt()).abs() < 3.0 * se);
        for (b, v, se) in &c.f {
            if multi_index::order(b) % 2 == 1 {
                assert!(v.abs() < 3.0 * se + 1e-12, "{b:?} {v} {se}");
            }
        }
        let c2 = coeffs(2, 4, 100_000, 2);
        for (b, v, se) in &c2.f {
            if multi_index::order(b) % 2 == 1 {
                assert!(v.abs() < 4.0 * se, "{b:?} {v} {se}");
            }
        }
    }

    #[test]
    fn bessel_sums_increase_and_stay_below_second_moment() {
        let c = coeffs(1, 6, 100_000, 3);
        let mut prev = 0.0;
        for q in [0, 2, 4, 6] {
            let b = c.bessel_sum(q);
            assert!(b > prev);
            prev = b;
        }
        assert!(prev <= c.second_moment.0 + 3.0 * c.second_moment.1);
    }

    #[test]
    fn chaos_mean_is_kac_rice_mean() {
        let spec = WeightSpec::gaussian();
        let c = coeffs(1, 2, 200_000, 4);
        let (v, se) = chaos_mean(&c, 1.0);
        let exact = density_exact_1d(&spec, 0.0).unwrap().value;
        assert!((v - exact).abs() < 3.0 * se);
        let (v2, _) = chaos_mean(&c, 2.0);
        assert_eq!(v2, 2.0 * v);

        let c2 = coeffs(2, 0, 200_000, 5);
        let (v, se) = chaos_mean(&c2, 1.0);
        let d = density_route_main1_at(&spec, 2, 0.0, 200_000, &mut ChaCha8Rng::seed_from_u64(6)).unwrap();
        assert!((v - d.value).abs() < 3.0 * (se * se + d.se * d.se).sqrt());
        // omega = lambda^-m
        let l2 = c2.lambda1.get(0, 0).powi(2);
        assert!((c2.omega - 1.0 / l2).abs() < 1e-10 * c2.omega);
    }

    #[test]
    fn periodized_mean_matches_plain() {
        let spec = WeightSpec::gaussian();
        let a = hessian_hermite_coeffs(&spec, 1, 1.0 / 32.0, 0, 10_000, &mut ChaCha8Rng::seed_from_u64(7)).unwrap();
        let b = hessian_hermite_coeffs(&spec, 1, 0.0, 0, 10_000, &mut ChaCha8Rng::seed_from_u64(7)).unwrap();
        let (va, _) = chaos_mean(&a, 1.0);
        let (vb, _) = chaos_mean(&b, 1.0);
        assert!((va - vb).abs() < 1e-6 * vb);
    }

    #[test]
    fn whitened_gradient_is_standard() {
        let c = coeffs(2, 0, 1_000, 8);
        let spec = WeightSpec::gaussian();
        let sampler = whitened_pair(&spec, &c, &[50.0, 0.0]).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let n = 100_000;
        let mut s = [[Welford::new(), Welford::new()], [Welford::new(), Welford::new()]];
        for _ in 0..n {
            let x = sampler.sample(&mut rng);
            for i in 0..2 {
                for j in 0..2 {
                    s[i][j].push(x[i] * x[j]);
                }
            }
        }
        for i in 0..2 {
            for j in 0..2 {
                let want = if i == j { 1.0 } else { 0.0 };
                assert!((s[i][j].mean() - want).abs() < 5.0 * s[i][j].std_error());
            }
        }
    }

    #[test]
    fn rho_correlation_decays_and_is_even() {
        let spec = WeightSpec::gaussian();
        let c = coeffs(1, 4, 50_000, 10);
        let corr = correlation_scales(&spec, 1).unwrap().correlation_length;
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let (far, se) = rho_q_correlation(&spec, &c, 2, &[6.5 * corr], 20_000, &mut rng).unwrap();
        assert!(far.abs() < 3.0 * se, "{far} {se}");
        let (a, sa) = rho_q_correlation(&spec, &c, 2, &[0.7], 40_000, &mut rng).unwrap();
        let (b, sb) = rho_q_correlation(&spec, &c, 2, &[-0.7], 40_000, &mut rng).unwrap();
        assert!((a - b).abs() < 3.0 * (sa * sa + sb * sb).sqrt());
        assert!(rho_q_correlation(&spec, &c, 0, &[0.7], 10, &mut rng).is_err());
        let tiny = rho_q_correlation(&spec, &c, 2, &[1e-9], 10, &mut rng);
        assert!(matches!(tiny, Err(Error::DegenerateConditioning { .. })), "{tiny:?}");
    }

    #[test]
    fn chaos_partials_are_nonnegative_and_bounded() {
        let spec = WeightSpec::gaussian();
        let c = coeffs(1, 4, 200_000, 12);
        let settings = ChaosSettings {
            mc_per_node: 5_000,
            ..Default::default()
        };
        let rows = variance_chaos_partial(&spec, &c, 4, &settings, &mut ChaCha8Rng::seed_from_u64(13)).unwrap();
        for r in &rows {
            assert!(r.s_q >= -3.0 * r.se, "{r:?}");
        }
        // odd chaoses vanish identically for m = 1
        assert_eq!(rows[0].s_q, 0.0);
        assert!(rows[1].s_q > 3.0 * rows[1].se);
        assert!(rows[3].partial >= rows[1].partial - 3.0 * rows[3].partial_se);
    }
}
