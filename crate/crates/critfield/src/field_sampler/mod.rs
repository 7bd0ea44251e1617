//! Random trigonometric fields `X^hbar` on the flat torus and their rescaled version `Y^hbar(x) = X^hbar(hbar x)`.
//!
//! Frequencies are stored once per pair `{k, -k}`: `k = 0` plus the half-space of `k` whose first nonzero
//! component is positive. A stored `k != 0` carries amplitude `sqrt(2 w(2 pi hbar |k|)) hbar^(m/2)` so that
//! the covariance is `hbar^m sum_{k in Z^m} w(2 pi hbar |k|) cos(2 pi <k, theta' - theta>)`.

mod dump;
mod eval;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::spectral_weights::WeightSpec;

pub use dump::{read_sample, write_sample};
pub use eval::{GridValues, Jet};

/// Default cap on the number of stored frequencies.
pub const DEFAULT_FREQUENCY_BUDGET: usize = 1_000_000;

/// Lattice points `k` with `w(2 pi hbar |k|) >= eps_cut w(0)`, in half-space form.
#[derive(Clone, Debug, PartialEq)]
pub struct ActiveSet {
    pub m: usize,
    pub hbar: f64,
    /// Flattened `k` vectors, `m` entries each.
    pub k: Vec<i32>,
    /// `w(2 pi hbar |k|)` per stored frequency.
    pub weight: Vec<f64>,
}

impl ActiveSet {
    pub fn len(&self) -> usize {
        self.weight.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weight.is_empty()
    }

    pub fn freq(&self, i: usize) -> &[i32] {
        &self.k[i * self.m..(i + 1) * self.m]
    }

    fn is_zero(&self, i: usize) -> bool {
        self.freq(i).iter().all(|&c| c == 0)
    }

    /// Amplitude in the half-space layout.
    pub fn amplitude(&self, i: usize) -> f64 {
        let base = self.hbar.powf(self.m as f64 / 2.0) * self.weight[i].sqrt();
        if self.is_zero(i) {
            base
        } else {
            std::f64::consts::SQRT_2 * base
        }
    }
}

fn in_half_space(k: &[i32]) -> bool {
    match k.iter().find(|&&c| c != 0) {
        None => true,
        Some(&c) => c > 0,
    }
}

/// Enumerates the active frequencies at scale `hbar`.
pub fn active_frequencies(spec: &WeightSpec<f64>, m: usize, hbar: f64, budget: usize) -> Result<ActiveSet> {
    if !(1..=3).contains(&m) {
        return Err(Error::InvalidArgument(format!("dimension must be 1, 2 or 3, got {m}")));
    }
    if !(hbar > 0.0 && hbar <= 0.25) {
        return Err(Error::InvalidArgument(format!("hbar must lie in (0, 1/4], got {hbar}")));
    }
    let rc = spec.cutoff_radius();
    let two_pi_h = 2.0 * std::f64::consts::PI * hbar;
    let kmax = (rc / two_pi_h).floor() as i64;
    let side = (2 * kmax + 1) as f64;
    let estimate = side.powi(m as i32) / 2.0 * std::f64::consts::PI.powi(m as i32 - 1) / 2f64.powi(m as i32 - 1);
    if estimate > 2.0 * budget as f64 {
        return Err(Error::FrequencyBudget {
            needed: estimate as usize,
            budget,
        });
    }
    let floor = spec.eps_cut() * spec.w(0.0);
    let kmax = kmax as i32;
    let mut k = Vec::new();
    let mut weight = Vec::new();
    let mut cur = vec![-kmax; m];
    loop {
        if in_half_space(&cur) {
            let r2: f64 = cur.iter().map(|&c| (c as f64) * (c as f64)).sum();
            let w = spec.w(two_pi_h * r2.sqrt());
            if w >= floor && w > 0.0 {
                if weight.len() == budget {
                    return Err(Error::FrequencyBudget {
                        needed: budget + 1,
                        budget,
                    });
                }
                k.extend_from_slice(&cur);
                weight.push(w);
            }
        }
        let mut axis = m;
        loop {
            if axis == 0 {
                return Ok(ActiveSet { m, hbar, k, weight });
            }
            axis -= 1;
            if cur[axis] < kmax {
                cur[axis] += 1;
                break;
            }
            cur[axis] = -kmax;
        }
    }
}

/// One realization of the field.
#[derive(Clone, Debug)]
pub struct FieldSample {
    m: usize,
    hbar: f64,
    k: Vec<i32>,
    amp: Vec<f64>,
    a: Vec<f64>,
    b: Vec<f64>,
    /// `(seed, stream)` of the ChaCha8 generator when built by [`build_sample_seeded`].
    pub seed: Option<(u64, u64)>,
    /// `eps_cut w(0)` times the active count, a bound on the truncation bias of the covariance.
    pub truncation_bias: f64,
    // c_k = amp (a - i b), so a term is Re[c_k e^{2 pi i <k, theta>}]
    cre: Vec<f64>,
    cim: Vec<f64>,
    kmax: Vec<i32>,
}

impl PartialEq for FieldSample {
    fn eq(&self, other: &Self) -> bool {
        self.m == other.m
            && self.hbar == other.hbar
            && self.k == other.k
            && self.amp == other.amp
            && self.a == other.a
            && self.b == other.b
            && self.seed == other.seed
    }
}

impl FieldSample {
    /// Deterministic field from explicit terms `amp (a cos + b sin)(2 pi <k, theta>)`.
    pub fn from_terms(m: usize, hbar: f64, terms: &[(Vec<i32>, f64, f64, f64)]) -> Result<Self> {
        if !(1..=3).contains(&m) {
            return Err(Error::InvalidArgument(format!("dimension must be 1, 2 or 3, got {m}")));
        }
        if !(hbar > 0.0) {
            return Err(Error::InvalidArgument(format!("hbar must be positive, got {hbar}")));
        }
        let mut k = Vec::with_capacity(terms.len() * m);
        let (mut amp, mut a, mut b) = (Vec::new(), Vec::new(), Vec::new());
        for (kk, am, aa, bb) in terms {
            if kk.len() != m {
                return Err(Error::InvalidArgument("frequency has the wrong dimension".into()));
            }
            if !(*am > 0.0) {
                return Err(Error::InvalidArgument("amplitudes must be positive".into()));
            }
            k.extend_from_slice(kk);
            amp.push(*am);
            a.push(*aa);
            b.push(*bb);
        }
        Ok(Self::assemble(m, hbar, k, amp, a, b, None, 0.0))
    }

    #[allow(clippy::too_many_arguments)]
    fn assemble(
        m: usize,
        hbar: f64,
        k: Vec<i32>,
        amp: Vec<f64>,
        a: Vec<f64>,
        b: Vec<f64>,
        seed: Option<(u64, u64)>,
        truncation_bias: f64,
    ) -> Self {
        let cre = amp.iter().zip(&a).map(|(p, q)| p * q).collect();
        let cim = amp.iter().zip(&b).map(|(p, q)| -p * q).collect();
        let mut kmax = vec![0; m];
        for kk in k.chunks(m) {
            for (j, &c) in kk.iter().enumerate() {
                kmax[j] = kmax[j].max(c.abs());
            }
        }
        Self {
            m,
            hbar,
            k,
            amp,
            a,
            b,
            seed,
            truncation_bias,
            cre,
            cim,
            kmax,
        }
    }

    pub fn dim(&self) -> usize {
        self.m
    }

    pub fn hbar(&self) -> f64 {
        self.hbar
    }

    pub fn len(&self) -> usize {
        self.amp.len()
    }

    pub fn is_empty(&self) -> bool {
        self.amp.is_empty()
    }

    pub fn freq(&self, i: usize) -> &[i32] {
        &self.k[i * self.m..(i + 1) * self.m]
    }

    pub fn amplitudes(&self) -> &[f64] {
        &self.amp
    }

    pub fn coefficients_a(&self) -> &[f64] {
        &self.a
    }

    pub fn coefficients_b(&self) -> &[f64] {
        &self.b
    }

    /// Largest `|k_j|` per axis.
    pub fn max_frequency(&self) -> &[i32] {
        &self.kmax
    }

    /// `sum_k |c_k| (2 pi |k|_2)^order` in torus coordinates, a global bound on every
    /// directional derivative of that order.
    pub fn derivative_bound(&self, order: u32) -> f64 {
        let tp = 2.0 * std::f64::consts::PI;
        (0..self.len())
            .map(|i| {
                let r2: f64 = self.freq(i).iter().map(|&c| (c as f64).powi(2)).sum();
                self.cre[i].hypot(self.cim[i]) * (tp * r2.sqrt()).powi(order as i32)
            })
            .sum()
    }
}

/// Builds a sample with the default frequency budget.
pub fn build_sample<R: Rng + ?Sized>(spec: &WeightSpec<f64>, m: usize, hbar: f64, rng: &mut R) -> Result<FieldSample> {
    build_sample_with_budget(spec, m, hbar, DEFAULT_FREQUENCY_BUDGET, rng)
}

pub fn build_sample_with_budget<R: Rng + ?Sized>(
    spec: &WeightSpec<f64>,
    m: usize,
    hbar: f64,
    budget: usize,
    rng: &mut R,
) -> Result<FieldSample> {
    let set = active_frequencies(spec, m, hbar, budget)?;
    let n = set.len();
    let (mut amp, mut a, mut b) = (Vec::with_capacity(n), Vec::with_capacity(n), Vec::with_capacity(n));
    for i in 0..n {
        amp.push(set.amplitude(i));
        a.push(rng.sample(StandardNormal));
        if set.is_zero(i) {
            b.push(0.0);
        } else {
            b.push(rng.sample(StandardNormal));
        }
    }
    let bias = spec.eps_cut() * spec.w(0.0) * n as f64;
    Ok(FieldSample::assemble(m, hbar, set.k, amp, a, b, None, bias))
}

/// Builds a sample from a ChaCha8 generator with the given seed and stream, recording both.
pub fn build_sample_seeded(spec: &WeightSpec<f64>, m: usize, hbar: f64, seed: u64, stream: u64) -> Result<FieldSample> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    let mut s = build_sample(spec, m, hbar, &mut rng)?;
    s.seed = Some((seed, stream));
    Ok(s)
}

/// `hbar^m sum_k w(2 pi hbar |k|) cos(2 pi <k, theta' - theta>)` over the active set.
pub fn exact_sample_covariance(
    spec: &WeightSpec<f64>,
    m: usize,
    hbar: f64,
    theta: &[f64],
    theta_prime: &[f64],
) -> Result<f64> {
    if theta.len() != m || theta_prime.len() != m {
        return Err(Error::InvalidArgument("points must have m coordinates".into()));
    }
    let set = active_frequencies(spec, m, hbar, DEFAULT_FREQUENCY_BUDGET)?;
    let tp = 2.0 * std::f64::consts::PI;
    let mut s = 0.0;
    for i in 0..set.len() {
        let phase: f64 = set
            .freq(i)
            .iter()
            .zip(theta.iter().zip(theta_prime))
            .map(|(&k, (t, tq))| k as f64 * (tq - t))
            .sum();
        let a = set.amplitude(i);
        s += a * a * (tp * phase).cos();
    }
    Ok(s)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::moments::Welford;
    use crate::spectral_weights::periodized_covariance_jet_auto;

    #[test]
    fn gaussian_active_radius() {
        let set = active_frequencies(&WeightSpec::gaussian(), 1, 1.0 / 16.0, DEFAULT_FREQUENCY_BUDGET).unwrap();
        let kmax = set.k.iter().map(|c| c.abs()).max().unwrap();
        // scan oracle: first k with weight below the cutoff
        let mut first_out = 0;
        while (-(2.0 * std::f64::consts::PI * first_out as f64 / 16.0).powi(2) / 2.0).exp() >= 1e-12 {
            first_out += 1;
        }
        assert_eq!(kmax, first_out - 1);
        assert!(kmax <= 19);
        assert_eq!(set.len() as i32, kmax + 1);
        assert!((0..set.len()).all(|i| set.amplitude(i) > 0.0));
    }

    #[test]
    fn half_space_layout() {
        let set = active_frequencies(&WeightSpec::gaussian(), 2, 0.25, DEFAULT_FREQUENCY_BUDGET).unwrap();
        let mut seen = std::collections::HashSet::new();
        for i in 0..set.len() {
            let k = set.freq(i).to_vec();
            let neg: Vec<i32> = k.iter().map(|c| -c).collect();
            assert!(!seen.contains(&neg) || k.iter().all(|&c| c == 0));
            seen.insert(k);
        }
    }

    #[test]
    fn budget_is_enforced() {
        let r = active_frequencies(&WeightSpec::gaussian(), 2, 1.0 / 64.0, 1000);
        assert!(matches!(r, Err(Error::FrequencyBudget { .. })));
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let r = build_sample_with_budget(&WeightSpec::gaussian(), 3, 1.0 / 64.0, 10_000, &mut rng);
        assert!(matches!(r, Err(Error::FrequencyBudget { .. })));
    }

    #[test]
    fn rejects_large_hbar() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        assert!(build_sample(&WeightSpec::gaussian(), 1, 0.3, &mut rng).is_err());
    }

    #[test]
    fn same_seed_same_coefficients() {
        let s1 = build_sample_seeded(&WeightSpec::gaussian(), 2, 0.125, 9, 3).unwrap();
        let s2 = build_sample_seeded(&WeightSpec::gaussian(), 2, 0.125, 9, 3).unwrap();
        let s3 = build_sample_seeded(&WeightSpec::gaussian(), 2, 0.125, 9, 4).unwrap();
        assert_eq!(s1, s2);
        assert_ne!(s1.coefficients_a(), s3.coefficients_a());
    }

    #[test]
    fn covariance_matches_periodized_kernel() {
        let spec = WeightSpec::gaussian();
        for (m, hbar) in [(1usize, 1.0 / 16.0), (2, 0.125)] {
            let set = active_frequencies(&spec, m, hbar, DEFAULT_FREQUENCY_BUDGET).unwrap();
            let theta = vec![0.1; m];
            let tp: Vec<f64> = (0..m).map(|j| 0.37 + 0.11 * j as f64).collect();
            let c = exact_sample_covariance(&spec, m, hbar, &theta, &tp).unwrap();
            let z: Vec<f64> = tp.iter().zip(&theta).map(|(a, b)| (a - b) / hbar).collect();
            let v = periodized_covariance_jet_auto(&spec, m, hbar, &z, 0).unwrap().get(&vec![0; m]);
            assert!((c - v).abs() < 1e-12 * set.len() as f64 + 1e-10, "m={m}: {c} vs {v}");
            let c0 = exact_sample_covariance(&spec, m, hbar, &theta, &theta).unwrap();
            let parseval: f64 = (0..set.len()).map(|i| set.amplitude(i).powi(2)).sum();
            assert!(c0 > 0.0 && (c0 - parseval).abs() < 1e-14);
        }
    }

    #[test]
    fn coefficient_law_and_point_variance() {
        let spec = WeightSpec::gaussian();
        let hbar = 0.125;
        let n = 10_000;
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let first = build_sample(&spec, 1, hbar, &mut rng).unwrap();
        let nc = first.len();
        let mut ca: Vec<Welford<f64>> = (0..nc).map(|_| Welford::new()).collect();
        let mut ma: Vec<Welford<f64>> = (0..nc).map(|_| Welford::new()).collect();
        let mut val = Welford::new();
        for _ in 0..n {
            let s = build_sample(&spec, 1, hbar, &mut rng).unwrap();
            for i in 0..nc {
                ca[i].push(s.coefficients_a()[i].powi(2));
                ma[i].push(s.coefficients_a()[i]);
            }
            val.push(s.eval_jet(&[0.3], 0).value.powi(2));
        }
        for i in 0..nc {
            assert!((ca[i].mean() - 1.0).abs() < 5.0 * ca[i].std_error());
            assert!(ma[i].mean().abs() < 5.0 * ma[i].std_error());
        }
        let v0 = exact_sample_covariance(&spec, 1, hbar, &[0.0], &[0.0]).unwrap();
        assert!((val.mean() - v0).abs() < 5.0 * val.std_error(), "{} vs {v0}", val.mean());
    }

    #[test]
    fn stationarity_and_empirical_covariance() {
        let spec = WeightSpec::gaussian();
        let hbar = 0.125;
        let n = 100_000;
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let d = 0.07;
        let starts = [0.0, 0.31, 0.77];
        let mut acc: Vec<Welford<f64>> = (0..3).map(|_| Welford::new()).collect();
        for _ in 0..n {
            let s = build_sample(&spec, 1, hbar, &mut rng).unwrap();
            for (w, &t) in acc.iter_mut().zip(&starts) {
                w.push(s.eval_jet(&[t], 0).value * s.eval_jet(&[t + d], 0).value);
            }
        }
        let truth = exact_sample_covariance(&spec, 1, hbar, &[0.0], &[d]).unwrap();
        for i in 0..3 {
            assert!((acc[i].mean() - truth).abs() < 5.0 * acc[i].std_error());
            for j in 0..i {
                let se = (acc[i].std_error().powi(2) + acc[j].std_error().powi(2)).sqrt();
                assert!((acc[i].mean() - acc[j].mean()).abs() < 5.0 * se);
            }
        }
    }
}
