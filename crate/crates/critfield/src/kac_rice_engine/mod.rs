//! Kac-Rice predictions: the mean density of critical points by several routes, the two-point
//! intensity and the variance of critical-point counts.

mod pair;
pub(crate) mod variance;

use rand::Rng;
use statrs::function::gamma::gamma;

use crate::error::{Error, Result};
use crate::gaussian_toolkit::{expected_abs_det_goe, gaussian_expectation, hessian_coords, HomogeneousFn, SymmetricMatrix};
use crate::multi_index;
use crate::spectral_weights::{jet_at, CovarianceJet, WeightSpec};

pub use pair::{jet_pair_covariance, two_point_intensity, JetCovariance};
pub use variance::{overlap_sphere_integral, second_factorial_moment, SecondMoment, TwoPointSettings};

/// How a density value was obtained.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Route {
    /// `det(-2 pi Hess V(0))^(-1/2) E|det Hess Y(0)|` with Monte-Carlo `E|det|`.
    Main1,
    /// Closed form `(1/pi) sqrt(lambda_4 / lambda_2)`, `m = 1` only.
    Exact1d,
    /// Moment-ratio formula with a GOE expectation.
    Cmw,
    /// Same with the ratio `h_m / (2 pi d_m)`, `h_m / d_m = I_{m+3} / ((m+2) I_{m+1})`.
    Sdh,
    /// Large-dimension asymptotic formula.
    Asymptotic,
}

impl Route {
    pub fn name(&self) -> &'static str {
        match self {
            Route::Main1 => "main1",
            Route::Exact1d => "exact_1d",
            Route::Cmw => "cmw",
            Route::Sdh => "sdh",
            Route::Asymptotic => "asymptotic",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DensityEstimate {
    pub value: f64,
    /// Zero for deterministic routes.
    pub se: f64,
    pub route: Route,
    /// Scale of the covariance used; 0 for the plain `V`.
    pub hbar: f64,
    pub samples: usize,
}

fn check_dim(m: usize) -> Result<()> {
    if (1..=3).contains(&m) {
        Ok(())
    } else {
        Err(Error::InvalidArgument(format!("dimension must be 1, 2 or 3, got {m}")))
    }
}

/// `-Hess V(0)`, the covariance of the gradient.
pub(crate) fn gradient_covariance(jet: &CovarianceJet<f64>) -> SymmetricMatrix<f64> {
    let m = jet.dim();
    SymmetricMatrix::from_fn(m, |i, j| -jet.d(&[i, j]))
}

/// Covariance of the Hessian coordinates: `E[Y_ij Y_kl] = d_i d_j d_k d_l V(0)`.
pub(crate) fn hessian_covariance(jet: &CovarianceJet<f64>) -> SymmetricMatrix<f64> {
    let m = jet.dim();
    let c = hessian_coords(m);
    SymmetricMatrix::from_fn(c.len(), |p, q| jet.d(&[c[p].0, c[p].1, c[q].0, c[q].1]))
}

fn jet0(spec: &WeightSpec<f64>, m: usize, hbar: f64, order: usize) -> Result<CovarianceJet<f64>> {
    jet_at(spec, m, hbar, &vec![0.0; m], order)
}

/// Mean density by Monte Carlo over the Hessian law; `hbar = 0` uses `V`, otherwise `V^hbar`.
pub fn density_route_main1_at<R: Rng + ?Sized>(
    spec: &WeightSpec<f64>,
    m: usize,
    hbar: f64,
    mc_samples: usize,
    rng: &mut R,
) -> Result<DensityEstimate> {
    check_dim(m)?;
    let jet = jet0(spec, m, hbar, 4)?;
    let grad = gradient_covariance(&jet);
    let hess = hessian_covariance(&jet);
    let (e, se) = gaussian_expectation(HomogeneousFn::AbsDet { m }, &hess, mc_samples, rng)?;
    let det = grad.scaled(2.0 * std::f64::consts::PI).determinant();
    if !(det > 0.0) {
        return Err(Error::NotPsd { pivot: det, index: 0 });
    }
    let norm = det.sqrt();
    Ok(DensityEstimate {
        value: e / norm,
        se: se / norm,
        route: Route::Main1,
        hbar,
        samples: mc_samples,
    })
}

pub fn density_route_main1<R: Rng + ?Sized>(
    spec: &WeightSpec<f64>,
    m: usize,
    mc_samples: usize,
    rng: &mut R,
) -> Result<DensityEstimate> {
    density_route_main1_at(spec, m, 0.0, mc_samples, rng)
}

/// One-dimensional density `E|N(0, lambda_4)| / sqrt(2 pi lambda_2) = sqrt(lambda_4 / lambda_2) / pi`.
pub fn density_exact_1d(spec: &WeightSpec<f64>, hbar: f64) -> Result<DensityEstimate> {
    let jet = jet0(spec, 1, hbar, 4)?;
    let l2 = -jet.d(&[0, 0]);
    let l4 = jet.d(&[0, 0, 0, 0]);
    Ok(DensityEstimate {
        value: (l4 / l2).sqrt() / std::f64::consts::PI,
        se: 0.0,
        route: Route::Exact1d,
        hbar,
        samples: 0,
    })
}

fn moment_ratio(spec: &WeightSpec<f64>, m: usize) -> Result<f64> {
    Ok(spec.radial_moment(m as u32 + 3)? / spec.radial_moment(m as u32 + 1)?)
}

fn goe_route<R: Rng + ?Sized>(
    route: Route,
    prefactor: f64,
    m: usize,
    mc_samples: usize,
    rng: &mut R,
) -> Result<DensityEstimate> {
    let (e, se) = expected_abs_det_goe::<f64, _>(m, mc_samples, rng)?;
    Ok(DensityEstimate {
        value: prefactor * e,
        se: prefactor * se,
        route,
        hbar: 0.0,
        samples: mc_samples,
    })
}

/// `(I_{m+1} / (2 pi (m+2) I_{m+3}))^{m/2} E_GOE|det|`, evaluated literally and reported only.
pub fn density_route_cmw<R: Rng + ?Sized>(
    spec: &WeightSpec<f64>,
    m: usize,
    mc_samples: usize,
    rng: &mut R,
) -> Result<DensityEstimate> {
    check_dim(m)?;
    let ratio = moment_ratio(spec, m)?;
    let pre = (1.0 / (2.0 * std::f64::consts::PI * (m as f64 + 2.0) * ratio)).powf(m as f64 / 2.0);
    goe_route(Route::Cmw, pre, m, mc_samples, rng)
}

/// `(h_m / (2 pi d_m))^{m/2} E_GOE|det|` with `h_m / d_m = I_{m+3} / ((m+2) I_{m+1})`, reported only.
pub fn density_route_sdh<R: Rng + ?Sized>(
    spec: &WeightSpec<f64>,
    m: usize,
    mc_samples: usize,
    rng: &mut R,
) -> Result<DensityEstimate> {
    check_dim(m)?;
    let ratio = moment_ratio(spec, m)?;
    let pre = (ratio / ((m as f64 + 2.0) * 2.0 * std::f64::consts::PI)).powf(m as f64 / 2.0);
    goe_route(Route::Sdh, pre, m, mc_samples, rng)
}

/// `8 / sqrt(pi m) Gamma((m+3)/2) (2 I_{m+3} / (pi (m+2) I_{m+1}))^{m/2}`.
pub fn density_asymptotic(spec: &WeightSpec<f64>, m: usize) -> Result<f64> {
    if m == 0 {
        return Err(Error::InvalidArgument("dimension must be positive".into()));
    }
    let mf = m as f64;
    let ratio = moment_ratio(spec, m)?;
    Ok(8.0 / (std::f64::consts::PI * mf).sqrt()
        * gamma((mf + 3.0) / 2.0)
        * (2.0 * ratio / (std::f64::consts::PI * (mf + 2.0))).powf(mf / 2.0))
}

/// `lambda` with `-Hess V(0) = lambda^2 I`, read off the first diagonal entry.
pub fn gradient_scale(spec: &WeightSpec<f64>, m: usize) -> Result<f64> {
    let jet = jet0(spec, m, 0.0, 2)?;
    Ok((-jet.get(&multi_index::from_axes(m, &[0, 0]))).sqrt())
}
