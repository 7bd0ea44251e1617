use rand::Rng;

use crate::error::{Error, Result};
use crate::gaussian_toolkit::{condition_gaussian, det_from_coords, hessian_coords, nu, GaussianSampler, SymmetricMatrix};
use crate::moments::Welford;
use crate::spectral_weights::{jet_pair_at, CovarianceJet, WeightSpec};

/// Covariance of `(grad Y(0), grad Y(y), Hess Y(0), Hess Y(y))`, Hessians in `hessian_coords` order.
#[derive(Clone, Debug)]
pub struct JetCovariance {
    pub y: Vec<f64>,
    pub hbar: f64,
    pub m: usize,
    pub cov: SymmetricMatrix<f64>,
}

impl JetCovariance {
    pub fn dim(&self) -> usize {
        self.cov.dim()
    }

    /// Indices of the two gradients.
    pub fn gradient_indices(&self) -> Vec<usize> {
        (0..2 * self.m).collect()
    }

    /// `A = -Hess V(0)`, the self-covariance of a gradient.
    pub fn a_block(&self) -> SymmetricMatrix<f64> {
        self.cov.submatrix(&(0..self.m).collect::<Vec<_>>())
    }

    /// `B(y)[i][j] = E[d_i Y(0) d_j Y(y)] = -d_i d_j V(y)`.
    pub fn b_block(&self) -> Vec<Vec<f64>> {
        let m = self.m;
        (0..m).map(|i| (0..m).map(|j| self.cov.get(i, m + j)).collect()).collect()
    }

    /// Largest entry coupling quantities at `0` with quantities at `y`.
    pub fn cross_norm(&self) -> f64 {
        let m = self.m;
        let v = nu(m);
        let at0: Vec<usize> = (0..m).chain(2 * m..2 * m + v).collect();
        let aty: Vec<usize> = (m..2 * m).chain(2 * m + v..2 * m + 2 * v).collect();
        let mut best = 0.0f64;
        for &i in &at0 {
            for &j in &aty {
                best = best.max(self.cov.get(i, j).abs());
            }
        }
        best
    }
}

/// `(point, axes)`: point 0 is the origin, point 1 is `y`.
fn slots(m: usize) -> Vec<(usize, Vec<usize>)> {
    let mut s = Vec::new();
    for p in 0..2 {
        for i in 0..m {
            s.push((p, vec![i]));
        }
    }
    for p in 0..2 {
        for (i, j) in hessian_coords(m) {
            s.push((p, vec![i, j]));
        }
    }
    s
}

pub(crate) fn assemble(m: usize, y: &[f64], hbar: f64, j0: &CovarianceJet<f64>, jy: &CovarianceJet<f64>) -> JetCovariance {
    let sl = slots(m);
    // E[d^a Y(p) d^b Y(q)] = (-1)^|a| d^(a+b) V(q - p)
    let cov = SymmetricMatrix::from_fn(sl.len(), |s, t| {
        let (p, ref a) = sl[s];
        let (q, ref b) = sl[t];
        let axes: Vec<usize> = a.iter().chain(b).copied().collect();
        let sign = if a.len() % 2 == 1 { -1.0 } else { 1.0 };
        let v = match (p, q) {
            (0, 0) | (1, 1) => j0.d(&axes),
            (0, 1) => jy.d(&axes),
            _ => {
                let parity = if axes.len() % 2 == 1 { -1.0 } else { 1.0 };
                parity * jy.d(&axes)
            }
        };
        sign * v
    });
    JetCovariance {
        y: y.to_vec(),
        hbar,
        m,
        cov,
    }
}

/// Joint covariance of gradients and Hessians at `0` and `y`; `hbar = 0` uses `V`, otherwise `V^hbar`.
pub fn jet_pair_covariance(spec: &WeightSpec<f64>, m: usize, hbar: f64, y: &[f64]) -> Result<JetCovariance> {
    if y.len() != m {
        return Err(Error::InvalidArgument("separation has the wrong dimension".into()));
    }
    if y.iter().all(|&c| c == 0.0) {
        return Err(Error::InvalidArgument("separation must be nonzero".into()));
    }
    if !(0.0..=0.25).contains(&hbar) {
        return Err(Error::InvalidArgument(format!("hbar must lie in [0, 1/4], got {hbar}")));
    }
    if hbar > 0.0 && y.iter().any(|c| c.abs() > 0.5 / hbar) {
        return Err(Error::InvalidArgument("separation exceeds half the rescaled period".into()));
    }
    let (j0, jy) = jet_pair_at(spec, m, hbar, y, 4)?;
    Ok(assemble(m, y, hbar, &j0, &jy))
}

/// Conditional `E[|det Hess Y(0) det Hess Y(y)| | grad Y(0) = grad Y(y) = v]` times the density of
/// the gradients at `(v, v)`, estimated from `mc_samples` conditional draws.
pub fn intensity_from_covariance<R: Rng + ?Sized>(
    jc: &JetCovariance,
    v: &[f64],
    mc_samples: usize,
    rng: &mut R,
) -> Result<(f64, f64)> {
    let m = jc.m;
    if v.len() != m {
        return Err(Error::InvalidArgument("level vector has the wrong dimension".into()));
    }
    let vals: Vec<f64> = v.iter().chain(v).copied().collect();
    let cond = condition_gaussian(&jc.cov, &jc.gradient_indices(), &vals)?;
    // the Schur complement loses about eps |S|^2 / lambda_min(S22) when the two points are close
    let big = jc.cov.max_abs();
    let noise_floor = 1e2 * f64::EPSILON * big * big / (cond.observed_min_eigenvalue * cond.cov.max_abs());
    let sampler = GaussianSampler::with_tolerance(cond.mean.clone(), &cond.cov, noise_floor.max(1e-10))?;
    let k = nu(m);
    let mut noise = vec![0.0; 2 * k];
    let mut draw = vec![0.0; 2 * k];
    let mut acc = Welford::new();
    for _ in 0..mc_samples {
        sampler.sample_into(rng, &mut noise, &mut draw);
        acc.push((det_from_coords(m, &draw[..k]) * det_from_coords(m, &draw[k..])).abs());
    }
    let p = cond.observed_density;
    Ok((acc.mean() * p, acc.std_error() * p))
}

/// Two-point Kac-Rice intensity at separation `y` and gradient level `v`, with its standard error.
pub fn two_point_intensity<R: Rng + ?Sized>(
    spec: &WeightSpec<f64>,
    m: usize,
    hbar: f64,
    y: &[f64],
    v: &[f64],
    mc_samples: usize,
    rng: &mut R,
) -> Result<(f64, f64)> {
    let jc = jet_pair_covariance(spec, m, hbar, y)?;
    intensity_from_covariance(&jc, v, mc_samples, rng)
}
