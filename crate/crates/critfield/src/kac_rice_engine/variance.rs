use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use super::pair::{intensity_from_covariance, jet_pair_covariance};
use super::{density_exact_1d, density_route_main1_at};
use crate::error::{Error, Result};
use crate::spectral_weights::quadrature::gauss_legendre;
use crate::spectral_weights::{correlation_scales, WeightSpec};

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TwoPointSettings {
    /// Conditional draws per quadrature node.
    pub mc_per_node: usize,
    /// Radius of the excised ball around `y = 0`, in correlation lengths.
    pub r_sing_rel: f64,
    /// Gauss-Legendre nodes per radial panel.
    pub gl_order: usize,
    /// Draws for the Monte-Carlo mean density when no closed form exists (`m >= 2`).
    pub density_samples: usize,
}

impl Default for TwoPointSettings {
    fn default() -> Self {
        Self {
            mc_per_node: 20_000,
            r_sing_rel: 1e-3,
            gl_order: 8,
            density_samples: 1_000_000,
        }
    }
}

/// Kac-Rice prediction for the count in a window of side `L`.
#[derive(Clone, Debug, PartialEq)]
pub struct SecondMoment {
    pub window: f64,
    /// `E[Z]`.
    pub mean: f64,
    pub mean_se: f64,
    /// `E[Z (Z - 1)]`.
    pub factorial_moment: f64,
    pub factorial_moment_se: f64,
    pub variance: f64,
    pub variance_se: f64,
    /// Bound on the excised-ball contribution of the intensity.
    pub envelope_bound: f64,
    pub r_sing: f64,
    /// Radius beyond which the intensity is replaced by the product of densities.
    pub upper_radius: f64,
    /// `(r, intensity, se)` at every quadrature node.
    pub profile: Vec<(f64, f64, f64)>,
}

/// `S(r) = int_{|y| = r} prod_k (L - |y_k|)^+ dsigma(y)`.
pub fn overlap_sphere_integral(m: usize, l: f64, r: f64) -> f64 {
    match m {
        1 => 2.0 * (l - r).max(0.0),
        2 => {
            if r <= l {
                r * (2.0 * std::f64::consts::PI * l * l - 8.0 * l * r + 2.0 * r * r)
            } else if r >= l * std::f64::consts::SQRT_2 {
                0.0
            } else {
                let (a, b) = ((l / r).acos(), (l / r).asin());
                let (x, w) = gauss_legendre(16);
                let half = 0.5 * (b - a);
                let mid = 0.5 * (a + b);
                let s: f64 = x
                    .iter()
                    .zip(&w)
                    .map(|(&t, &wt)| {
                        let phi = mid + half * t;
                        wt * (l - r * phi.cos()) * (l - r * phi.sin())
                    })
                    .sum();
                4.0 * r * half * s
            }
        }
        _ => f64::NAN,
    }
}

fn gl_panel<'a>(a: f64, b: f64, x: &'a [f64], w: &'a [f64]) -> impl Iterator<Item = (f64, f64)> + 'a {
    let half = 0.5 * (b - a);
    let mid = 0.5 * (a + b);
    x.iter().zip(w).map(move |(&t, &wt)| (mid + half * t, half * wt))
}

/// Gauss-Legendre `(r, weight)` nodes on `[r_sing, upper]`: panels doubling from `r_sing` up to
/// `corr / 8`, then of width `corr / 8`, with extra breakpoints at `kinks`.
pub(crate) fn radial_nodes(corr: f64, r_sing: f64, upper: f64, kinks: &[f64], gl_order: usize) -> Vec<(f64, f64)> {
    let mut breaks = vec![r_sing];
    let mut r = r_sing;
    while r * 2.0 < corr / 8.0 && r * 2.0 < upper {
        r *= 2.0;
        breaks.push(r);
    }
    let step = corr / 8.0;
    let mut r = *breaks.last().unwrap() + step;
    while r < upper {
        breaks.push(r);
        r += step;
    }
    breaks.push(upper);
    breaks.extend(kinks.iter().copied().filter(|&k| k > r_sing && k < upper));
    breaks.sort_by(|a, b| a.partial_cmp(b).unwrap());
    breaks.dedup_by(|a, b| (*a - *b).abs() < 1e-12 * upper);
    let (gx, gw) = gauss_legendre(gl_order);
    breaks.windows(2).flat_map(|p| gl_panel(p[0], p[1], &gx, &gw).collect::<Vec<_>>()).collect()
}

pub(crate) fn gl_nodes(a: f64, b: f64, gl_order: usize) -> Vec<(f64, f64)> {
    let (gx, gw) = gauss_legendre(gl_order);
    gl_panel(a, b, &gx, &gw).collect()
}

/// Second factorial moment and variance of the critical-point count of `Y^hbar` on `[-L/2, L/2)^m`
/// from the two-point Kac-Rice formula at gradient level 0.
///
/// Uses isotropy: the intensity is evaluated along the first axis and integrated against `S(r)`.
pub fn second_factorial_moment<R: Rng + ?Sized>(
    spec: &WeightSpec<f64>,
    m: usize,
    hbar: f64,
    l: f64,
    settings: &TwoPointSettings,
    rng: &mut R,
) -> Result<SecondMoment> {
    if !(1..=2).contains(&m) {
        return Err(Error::InvalidArgument(format!("variance prediction supports m in {{1, 2}}, got {m}")));
    }
    if !(l > 0.0) {
        return Err(Error::InvalidArgument("window side must be positive".into()));
    }
    if hbar > 0.0 && l > 0.5 / hbar {
        return Err(Error::InvalidArgument(format!("window side {l} exceeds 1/(2 hbar)")));
    }
    let scales = correlation_scales(spec, m)?;
    let corr = scales.correlation_length;
    let r_sing = settings.r_sing_rel * corr;
    let support = l * (m as f64).sqrt();
    let far_product = hbar == 0.0 || 1.0 / hbar - support >= scales.decay_radius;
    if !far_product && m > 1 {
        return Err(Error::InvalidArgument("window too large for the periodized two-dimensional prediction".into()));
    }
    let upper = if far_product { support.min(scales.decay_radius) } else { support };
    // with the far field in force every lattice image of `V` is below 1e-12 psi(0) on [0, upper]
    let jet_hbar = if far_product { 0.0 } else { hbar };

    let nodes = radial_nodes(corr, r_sing, upper, &[l], settings.gl_order);
    let base: u64 = rng.random();
    let mc = settings.mc_per_node;
    let values: Vec<(f64, f64)> = nodes
        .par_iter()
        .enumerate()
        .map(|(i, &(r, _))| {
            let mut y = vec![0.0; m];
            y[0] = r;
            let jc = jet_pair_covariance(spec, m, jet_hbar, &y)?;
            let mut node_rng = ChaCha8Rng::seed_from_u64(base);
            node_rng.set_stream(i as u64 + 1);
            intensity_from_covariance(&jc, &vec![0.0; m], mc, &mut node_rng)
        })
        .collect::<Result<Vec<_>>>()?;

    let (zbar, zbar_se) = if m == 1 {
        (density_exact_1d(spec, hbar)?.value, 0.0)
    } else {
        let mut d_rng = ChaCha8Rng::seed_from_u64(base);
        d_rng.set_stream(0);
        let d = density_route_main1_at(spec, m, hbar, settings.density_samples, &mut d_rng)?;
        (d.value, d.se)
    };
    let z2 = zbar * zbar;

    let mut diff = 0.0;
    let mut diff_var = 0.0;
    let mut s_int = 0.0;
    let mut i_int = 0.0;
    for (&(r, w), &(v, se)) in nodes.iter().zip(&values) {
        let s = overlap_sphere_integral(m, l, r);
        diff += w * s * (v - z2);
        i_int += w * s * v;
        diff_var += (w * s * se).powi(2);
        s_int += w * s;
    }
    let (gx, gw) = gauss_legendre(settings.gl_order);
    // inside the excised ball: the product part exactly, the intensity part only through its envelope
    let inner: f64 = gl_panel(0.0, r_sing, &gx, &gw).map(|(r, w)| w * overlap_sphere_integral(m, l, r)).sum();
    let inner_weighted: f64 = gl_panel(0.0, r_sing, &gx, &gw)
        .map(|(r, w)| w * r.powi(2 - m as i32) * overlap_sphere_integral(m, l, r))
        .sum();
    diff -= z2 * inner;
    let envelope = nodes
        .iter()
        .zip(&values)
        .filter(|((r, _), _)| *r <= 10.0 * r_sing)
        .map(|(&(r, _), &(v, _))| v * r.powi(m as i32 - 2))
        .fold(0.0f64, f64::max)
        * 2.0;
    let envelope_bound = envelope * inner_weighted;
    if envelope_bound > 0.01 * i_int.abs() {
        return Err(Error::Tolerance(format!(
            "excised-ball bound {envelope_bound:e} exceeds 1% of the intensity integral {i_int:e}"
        )));
    }

    let vol = l.powi(m as i32);
    let mean = zbar * vol;
    let variance = mean + diff;
    let factorial = z2 * vol * vol + diff;
    // sensitivity to the mean density through E[Z] and the subtracted product
    let dvar_dz = vol - 2.0 * zbar * (s_int + inner);
    let dfac_dz = 2.0 * zbar * vol * vol - 2.0 * zbar * (s_int + inner);
    Ok(SecondMoment {
        window: l,
        mean,
        mean_se: zbar_se * vol,
        factorial_moment: factorial,
        factorial_moment_se: (diff_var + (dfac_dz * zbar_se).powi(2)).sqrt(),
        variance,
        variance_se: (diff_var + (dvar_dz * zbar_se).powi(2)).sqrt(),
        envelope_bound,
        r_sing,
        upper_radius: upper,
        profile: nodes.iter().zip(&values).map(|(&(r, _), &(v, se))| (r, v, se)).collect(),
    })
}
