//! Multivariate normal sampling and conditioning.

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

use super::linalg::{factor_pd, factor_psd, factor_psd_rel, LowerTriangular, SymmetricMatrix};
use crate::error::{Error, Result};
use crate::scalar::{cst, Real};

/// Draws `N(mean, cov)` through a fixed Cholesky factor.
#[derive(Clone, Debug)]
pub struct GaussianSampler<T> {
    mean: Vec<T>,
    factor: LowerTriangular<T>,
}

impl<T: Real> GaussianSampler<T>
where
    StandardNormal: Distribution<T>,
{
    pub fn new(mean: Vec<T>, cov: &SymmetricMatrix<T>) -> Result<Self> {
        if mean.len() != cov.dim() {
            return Err(Error::InvalidArgument("mean and covariance sizes differ".into()));
        }
        Ok(Self {
            mean,
            factor: factor_psd(cov)?.l,
        })
    }

    /// Like [`GaussianSampler::new`] but clamps pivots up to `rel_tol |cov|`, for covariances that
    /// carry rounding error of that size.
    pub fn with_tolerance(mean: Vec<T>, cov: &SymmetricMatrix<T>, rel_tol: f64) -> Result<Self> {
        if mean.len() != cov.dim() {
            return Err(Error::InvalidArgument("mean and covariance sizes differ".into()));
        }
        Ok(Self {
            mean,
            factor: factor_psd_rel(cov, rel_tol)?.l,
        })
    }

    pub fn centered(cov: &SymmetricMatrix<T>) -> Result<Self> {
        Self::new(vec![T::zero(); cov.dim()], cov)
    }

    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    /// Fills `out`, using `noise` as scratch of the same length.
    #[inline]
    pub fn sample_into<R: Rng + ?Sized>(&self, rng: &mut R, noise: &mut [T], out: &mut [T]) {
        for g in noise.iter_mut() {
            *g = StandardNormal.sample(rng);
        }
        self.factor.mul_vec_into(noise, out);
        for (o, m) in out.iter_mut().zip(&self.mean) {
            *o += *m;
        }
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Vec<T> {
        let mut noise = vec![T::zero(); self.dim()];
        let mut out = vec![T::zero(); self.dim()];
        self.sample_into(rng, &mut noise, &mut out);
        out
    }
}

/// One draw of `N(0, cov)`.
pub fn sample_gaussian<T: Real, R: Rng + ?Sized>(cov: &SymmetricMatrix<T>, rng: &mut R) -> Result<Vec<T>>
where
    StandardNormal: Distribution<T>,
{
    Ok(GaussianSampler::centered(cov)?.sample(rng))
}

/// Law of the unobserved coordinates given the observed ones.
#[derive(Clone, Debug)]
pub struct ConditionedGaussian<T> {
    /// Indices of the remaining coordinates in the joint vector.
    pub remaining: Vec<usize>,
    pub mean: Vec<T>,
    pub cov: SymmetricMatrix<T>,
    /// Gaussian density of the observed block at the observed values.
    pub observed_density: T,
    pub observed_min_pivot: T,
    pub observed_min_eigenvalue: T,
}

/// Relative pivot below which the observed block counts as singular.
pub const CONDITIONING_TOL: f64 = 1e-10;

/// Regression formula: mean `S12 S22^-1 v`, covariance `S11 - S12 S22^-1 S21`.
pub fn condition_gaussian<T: Real>(
    joint: &SymmetricMatrix<T>,
    observed_idx: &[usize],
    observed_vals: &[T],
) -> Result<ConditionedGaussian<T>> {
    let n = joint.dim();
    if observed_idx.len() != observed_vals.len() {
        return Err(Error::InvalidArgument("observed indices and values differ in length".into()));
    }
    let mut seen = vec![false; n];
    for &i in observed_idx {
        if i >= n || seen[i] {
            return Err(Error::InvalidArgument(format!("bad observed index {i}")));
        }
        seen[i] = true;
    }
    let remaining: Vec<usize> = (0..n).filter(|&i| !seen[i]).collect();
    if observed_idx.is_empty() {
        return Ok(ConditionedGaussian {
            remaining,
            mean: vec![T::zero(); n],
            cov: joint.clone(),
            observed_density: T::one(),
            observed_min_pivot: T::zero(),
            observed_min_eigenvalue: T::zero(),
        });
    }
    let s22 = joint.submatrix(observed_idx);
    let min_eig = s22.eigenvalues()[0];
    let f = factor_pd(&s22, CONDITIONING_TOL)?;
    let l = &f.l;
    let k = observed_idx.len();
    let a = l.solve(observed_vals);
    // W = L^-1 S21, one column per remaining coordinate
    let w: Vec<Vec<T>> = remaining
        .iter()
        .map(|&r| {
            let col: Vec<T> = observed_idx.iter().map(|&o| joint.get(o, r)).collect();
            l.solve(&col)
        })
        .collect();
    let mean = w.iter().map(|c| c.iter().zip(&a).map(|(&x, &y)| x * y).sum()).collect();
    let cov = SymmetricMatrix::from_fn(remaining.len(), |i, j| {
        let dot: T = w[i].iter().zip(&w[j]).map(|(&x, &y)| x * y).sum();
        joint.get(remaining[i], remaining[j]) - dot
    });
    let quad: T = a.iter().map(|&x| x * x).sum();
    let two_pi: T = T::PI() + T::PI();
    let density = (-quad / cst(2.0)).exp() / (two_pi.powf(cst::<T>(k as f64) / cst(2.0)) * l.diagonal_product());
    Ok(ConditionedGaussian {
        remaining,
        mean,
        cov,
        observed_density: density,
        observed_min_pivot: f.smallest_pivot,
        observed_min_eigenvalue: min_eig,
    })
}
