//! Spectral weights, their radial moments, the covariance function and its periodization.

pub mod quadrature;

mod jet;

pub use jet::{
    correlation_scales, covariance_jet, covariance_jet_pair, envelope_psi, jet_at, jet_pair_at, periodized_covariance_jet,
    periodized_covariance_jet_auto, CorrelationScales, CovarianceJet,
};

use std::sync::OnceLock;

use crate::error::{Error, Result};
use crate::scalar::{cst, to_f64, Real};

/// Shape of the radial weight.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum WeightFamily<T> {
    /// `exp(-r^2/2)`
    Gaussian,
    /// `exp(1 - 1/(1 - (r/R)^2))` on `[0, R)`, zero beyond.
    Bump { radius: T },
    /// `(1 + r^2)^(-p)`
    Rational { exponent: T },
}

/// Threshold on `w(r) r^8 / w(0)` past the truncation radius; `r^8` covers `m <= 3`.
const TRUNCATION_TOL: f64 = 1e-12;
const TRUNCATION_POWER: i32 = 8;

/// Nonnegative even radial weight `w` together with its quadrature settings.
#[derive(Clone, Debug)]
pub struct WeightSpec<T: Real> {
    family: WeightFamily<T>,
    amplitude: T,
    eps_cut: T,
    truncation_radius: T,
    max_doublings: usize,
    pub(crate) scales: [OnceLock<CorrelationScales<T>>; 3],
}

impl<T: Real> PartialEq for WeightSpec<T> {
    fn eq(&self, other: &Self) -> bool {
        self.family == other.family
            && self.amplitude == other.amplitude
            && self.eps_cut == other.eps_cut
            && self.max_doublings == other.max_doublings
    }
}

impl<T: Real> WeightSpec<T> {
    pub fn new(family: WeightFamily<T>, amplitude: T, eps_cut: T) -> Result<Self> {
        if !(amplitude > T::zero()) || !amplitude.is_finite() {
            return Err(Error::InvalidArgument(format!("amplitude must be positive, got {amplitude}")));
        }
        if !(eps_cut > T::zero() && eps_cut < T::one()) {
            return Err(Error::InvalidArgument(format!("eps_cut must lie in (0, 1), got {eps_cut}")));
        }
        match family {
            WeightFamily::Gaussian => {}
            WeightFamily::Bump { radius } => {
                if !(radius > T::zero()) || !radius.is_finite() {
                    return Err(Error::InvalidArgument(format!("bump radius must be positive, got {radius}")));
                }
            }
            WeightFamily::Rational { exponent } => {
                if !(exponent.is_finite()) || to_f64(exponent) * 2.0 <= TRUNCATION_POWER as f64 + 1.0 {
                    return Err(Error::InvalidArgument(format!(
                        "rational exponent must exceed {}, got {exponent}",
                        (TRUNCATION_POWER as f64 + 1.0) / 2.0
                    )));
                }
            }
        }
        let mut spec = Self {
            family,
            amplitude,
            eps_cut,
            truncation_radius: T::zero(),
            max_doublings: 8,
            scales: Default::default(),
        };
        spec.truncation_radius = cst(spec.find_truncation_radius()?);
        Ok(spec)
    }

    pub fn gaussian() -> Self {
        Self::new(WeightFamily::Gaussian, T::one(), cst(1e-12)).expect("gaussian weight is valid")
    }

    pub fn bump(radius: T) -> Result<Self> {
        Self::new(WeightFamily::Bump { radius }, T::one(), cst(1e-12))
    }

    pub fn rational(exponent: T) -> Result<Self> {
        Self::new(WeightFamily::Rational { exponent }, T::one(), cst(1e-12))
    }

    /// Same family multiplied by `amplitude`.
    pub fn with_amplitude(&self, amplitude: T) -> Result<Self> {
        Self::new(self.family, amplitude, self.eps_cut)
    }

    pub fn with_eps_cut(&self, eps_cut: T) -> Result<Self> {
        Self::new(self.family, self.amplitude, eps_cut)
    }

    pub fn family(&self) -> WeightFamily<T> {
        self.family
    }

    pub fn amplitude(&self) -> T {
        self.amplitude
    }

    pub fn eps_cut(&self) -> T {
        self.eps_cut
    }

    /// Radius beyond which `w(r) r^8 < 1e-12 w(0)`.
    pub fn truncation_radius(&self) -> T {
        self.truncation_radius
    }

    pub(crate) fn max_doublings(&self) -> usize {
        self.max_doublings
    }

    /// `w(r)`; rejects negative or non-finite `r`.
    pub fn eval(&self, r: T) -> Result<T> {
        if r < T::zero() || r.is_nan() {
            return Err(Error::InvalidArgument(format!("weight evaluated at negative radius {r}")));
        }
        Ok(self.w(r))
    }

    /// `w(|r|)` without argument checks.
    #[inline]
    pub(crate) fn w(&self, r: T) -> T {
        let r = r.abs();
        match self.family {
            WeightFamily::Gaussian => self.amplitude * (-(r * r) / cst(2.0)).exp(),
            WeightFamily::Bump { radius } => {
                if r >= radius {
                    T::zero()
                } else {
                    let x = r / radius;
                    self.amplitude * (T::one() - T::one() / (T::one() - x * x)).exp()
                }
            }
            WeightFamily::Rational { exponent } => self.amplitude * (T::one() + r * r).powf(-exponent),
        }
    }

    fn w_rel_f64(&self, r: f64) -> f64 {
        match self.family {
            WeightFamily::Gaussian => (-r * r / 2.0).exp(),
            WeightFamily::Bump { radius } => {
                let rad = to_f64(radius);
                if r >= rad {
                    0.0
                } else {
                    let x = r / rad;
                    (1.0 - 1.0 / (1.0 - x * x)).exp()
                }
            }
            WeightFamily::Rational { exponent } => (1.0 + r * r).powf(-to_f64(exponent)),
        }
    }

    fn find_truncation_radius(&self) -> Result<f64> {
        if let WeightFamily::Bump { radius } = self.family {
            return Ok(to_f64(radius));
        }
        let f = |r: f64| self.w_rel_f64(r) * r.powi(TRUNCATION_POWER);
        let mut r = 1.0 / 64.0;
        let mut last_above = 0.0;
        while r < 1e6 {
            if f(r) >= TRUNCATION_TOL {
                last_above = r;
            }
            r *= 1.005;
        }
        if f(1e6) >= TRUNCATION_TOL {
            return Err(Error::InvalidArgument("weight decays too slowly to truncate".into()));
        }
        // refine the last crossing
        let (mut lo, mut hi) = (last_above, last_above * 1.005);
        for _ in 0..60 {
            let mid = 0.5 * (lo + hi);
            if f(mid) >= TRUNCATION_TOL {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        Ok(hi)
    }

    /// Largest `r` with `w(r) >= eps_cut w(0)`; frequencies beyond it are dropped by the sampler.
    pub fn cutoff_radius(&self) -> T {
        let eps = to_f64(self.eps_cut);
        let (mut lo, mut hi) = (0.0, to_f64(self.truncation_radius).max(1.0));
        while self.w_rel_f64(hi) >= eps {
            hi *= 2.0;
        }
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if self.w_rel_f64(mid) >= eps {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        cst(lo)
    }

    /// `I_k(w) = int_0^inf w(r) r^k dr` by adaptive Gauss-Kronrod with doubling tail chunks.
    pub fn radial_moment(&self, k: u32) -> Result<T> {
        if k > 12 {
            return Err(Error::InvalidArgument(format!("radial moment order {k} exceeds 12")));
        }
        let rel = T::tol_floor(1e-9);
        let kk = k as i32;
        let f = |r: T| self.w(r) * r.powi(kk);
        let t = self.truncation_radius;
        let panels = 8usize;
        let mut total = T::zero();
        let mut err = T::zero();
        for p in 0..panels {
            let a = t * cst(p as f64 / panels as f64);
            let b = t * cst((p + 1) as f64 / panels as f64);
            let (v, e) = quadrature::integrate(f, a, b, rel * cst(0.01), T::zero())?;
            total += v;
            err += e;
        }
        if !matches!(self.family, WeightFamily::Bump { .. }) {
            let mut lo = t;
            let mut converged = false;
            for _ in 0..64 {
                let hi = lo * cst(2.0);
                let (v, e) = quadrature::integrate(f, lo, hi, rel * cst(0.01), T::zero())?;
                total += v;
                err += e;
                if v.abs() <= rel * cst(1e-3) * total.abs() {
                    converged = true;
                    break;
                }
                lo = hi;
            }
            if !converged {
                return Err(Error::QuadratureNotConverged {
                    what: format!("radial moment I_{k} tail"),
                    achieved: to_f64(err / total),
                    requested: to_f64(rel),
                });
            }
        }
        if err > rel * total.abs() {
            return Err(Error::QuadratureNotConverged {
                what: format!("radial moment I_{k}"),
                achieved: to_f64(err / total),
                requested: to_f64(rel),
            });
        }
        Ok(total)
    }

    /// Distance beyond which aliasing of the frequency-space trapezoid rule is negligible.
    pub(crate) fn alias_margin(&self) -> T {
        match self.family {
            WeightFamily::Gaussian => cst(12.0),
            WeightFamily::Rational { exponent } => cst::<T>(40.0) + cst::<T>(4.0) * exponent,
            WeightFamily::Bump { radius } => cst::<T>(300.0) / radius,
        }
    }
}

/// Surface area of the unit sphere in R^m.
pub(crate) fn sphere_area(m: usize) -> f64 {
    let mf = m as f64;
    2.0 * std::f64::consts::PI.powf(mf / 2.0) / statrs::function::gamma::gamma(mf / 2.0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use statrs::function::gamma::gamma;

    fn gaussian_moment(k: u32) -> f64 {
        2f64.powf((k as f64 - 1.0) / 2.0) * gamma((k as f64 + 1.0) / 2.0)
    }

    #[test]
    fn eval_examples() {
        let g = WeightSpec::<f64>::gaussian();
        assert_eq!(g.eval(0.0).unwrap(), 1.0);
        assert!((g.eval(1.0).unwrap() - 0.606_530_659_712_633_4).abs() < 1e-15);
        let b = WeightSpec::<f64>::bump(1.0).unwrap();
        assert_eq!(b.eval(2.0).unwrap(), 0.0);
        assert_eq!(b.eval(1.0).unwrap(), 0.0);
        assert!(b.eval(0.999).unwrap() > 0.0);
        assert!(g.eval(-1.0).is_err());
    }

    #[test]
    fn gaussian_moments_match_gamma_formula() {
        let g = WeightSpec::<f64>::gaussian();
        for k in 0..=12 {
            let got = g.radial_moment(k).unwrap();
            let want = gaussian_moment(k);
            assert!(((got - want) / want).abs() < 1e-9, "k={k}: {got} vs {want}");
        }
        assert!((g.radial_moment(1).unwrap() - 1.0).abs() < 1e-9);
        assert!((g.radial_moment(3).unwrap() - 2.0).abs() < 1e-9);
        let i4 = 3.0 * (std::f64::consts::PI / 2.0).sqrt();
        assert!((g.radial_moment(4).unwrap() - i4).abs() < 1e-8);
        assert!(g.radial_moment(13).is_err());
    }

    #[test]
    fn moments_against_dense_trapezoid() {
        for spec in [
            WeightSpec::<f64>::bump(1.5).unwrap(),
            WeightSpec::<f64>::rational(8.0).unwrap(),
        ] {
            for k in [0u32, 2, 5] {
                let t = spec.truncation_radius() * 40.0;
                let n = 400_000;
                let h = t / n as f64;
                let s: f64 = (1..n).map(|i| spec.w(i as f64 * h) * (i as f64 * h).powi(k as i32)).sum::<f64>() * h
                    + 0.5 * h * if k == 0 { spec.w(0.0) } else { 0.0 };
                let got = spec.radial_moment(k).unwrap();
                assert!(((got - s) / s).abs() < 1e-7, "{:?} k={k}: {got} vs {s}", spec.family());
            }
        }
    }

    #[test]
    fn truncation_radius_meets_tail_criterion() {
        for spec in [
            WeightSpec::<f64>::gaussian(),
            WeightSpec::<f64>::rational(6.0).unwrap(),
            WeightSpec::<f64>::bump(2.0).unwrap(),
        ] {
            let t = spec.truncation_radius();
            for i in 0..2000 {
                let r = t * (1.0 + i as f64 * 0.01);
                assert!(spec.w(r) * r.powi(8) < 1e-12 * spec.w(0.0) * (1.0 + 1e-9));
            }
        }
        assert!(WeightSpec::<f64>::rational(4.0).is_err());
    }

    #[test]
    fn cutoff_radius_gaussian() {
        let g = WeightSpec::<f64>::gaussian();
        let want = (2.0 * (1e12f64).ln()).sqrt();
        assert!((g.cutoff_radius() - want).abs() < 1e-9);
    }

    #[test]
    fn f32_moments() {
        let g = WeightSpec::<f32>::gaussian();
        let got = g.radial_moment(2).unwrap() as f64;
        let want = gaussian_moment(2);
        assert!(((got - want) / want).abs() < 1e-5);
    }
}
