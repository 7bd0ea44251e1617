//! Monte-Carlo check of the Gaussian comparison bound
//! `|E_A f - E_B f| <= C L_f Lambda^((alpha-1)/2) |A - B|^(1/2)`.

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

use super::linalg::{det_from_coords, factor_psd, nu, SymmetricMatrix};
use crate::error::{Error, Result};
use crate::moments::Welford;
use crate::scalar::{cst, Real};

/// Calibrated constant: twice the largest ratio seen on the calibration suite in the tests below.
pub const COMPARISON_CONSTANT: f64 = 2.0 * 0.78;

/// Positively homogeneous test functions.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum HomogeneousFn {
    /// `|det|` of the symmetric `m x m` matrix with Hessian-vector coordinates; degree `m`.
    AbsDet { m: usize },
}

impl HomogeneousFn {
    pub fn degree(&self) -> usize {
        match *self {
            HomogeneousFn::AbsDet { m } => m,
        }
    }

    /// Dimension of the Gaussian vector the function is applied to.
    pub fn dim(&self) -> usize {
        match *self {
            HomogeneousFn::AbsDet { m } => nu(m),
        }
    }

    /// Lipschitz constant on the unit sphere.
    pub fn lipschitz(&self) -> Result<f64> {
        match *self {
            HomogeneousFn::AbsDet { m: 1 } => Ok(1.0),
            // gradient of a b - c^2 is (b, a, -2c), of norm at most 2 on the sphere
            HomogeneousFn::AbsDet { m: 2 } => Ok(2.0),
            HomogeneousFn::AbsDet { m } => Err(Error::InvalidArgument(format!("no Lipschitz constant for m = {m}"))),
        }
    }

    #[inline]
    pub fn eval<T: Real>(&self, x: &[T]) -> T {
        match *self {
            HomogeneousFn::AbsDet { m } => det_from_coords(m, x).abs(),
        }
    }
}

/// `E f(X)` for `X ~ N(0, cov)` with its standard error.
pub fn gaussian_expectation<T: Real, R: Rng + ?Sized>(
    f: HomogeneousFn,
    cov: &SymmetricMatrix<T>,
    n_samples: usize,
    rng: &mut R,
) -> Result<(T, T)>
where
    StandardNormal: Distribution<T>,
{
    if cov.dim() != f.dim() {
        return Err(Error::InvalidArgument("covariance size does not match the function".into()));
    }
    let l = factor_psd(cov)?.l;
    let d = f.dim();
    let mut g = vec![T::zero(); d];
    let mut x = vec![T::zero(); d];
    let mut acc = Welford::new();
    for _ in 0..n_samples {
        for v in g.iter_mut() {
            *v = StandardNormal.sample(rng);
        }
        l.mul_vec_into(&g, &mut x);
        acc.push(f.eval(&x));
    }
    Ok((acc.mean(), acc.std_error()))
}

/// Both sides of the comparison inequality.
#[derive(Clone, Copy, Debug)]
pub struct ComparisonCheck<T> {
    pub lhs: T,
    pub lhs_se: T,
    pub rhs: T,
}

/// `lhs = |E_A f - E_B f|` from common random numbers; `rhs` uses [`COMPARISON_CONSTANT`].
pub fn gaussian_comparison_check<T: Real, R: Rng + ?Sized>(
    f: HomogeneousFn,
    a: &SymmetricMatrix<T>,
    b: &SymmetricMatrix<T>,
    lambda: T,
    n_samples: usize,
    rng: &mut R,
) -> Result<ComparisonCheck<T>>
where
    StandardNormal: Distribution<T>,
{
    if a.dim() != f.dim() || b.dim() != f.dim() {
        return Err(Error::InvalidArgument("covariance size does not match the function".into()));
    }
    let slack = T::one() + T::tol_floor(1e-12);
    if a.operator_norm() > lambda * slack || b.operator_norm() > lambda * slack {
        return Err(Error::InvalidArgument("operator norm exceeds the stated bound".into()));
    }
    let la = factor_psd(a)?.l;
    let lb = factor_psd(b)?.l;
    let d = f.dim();
    let mut g = vec![T::zero(); d];
    let mut xa = vec![T::zero(); d];
    let mut xb = vec![T::zero(); d];
    let mut acc = Welford::new();
    for _ in 0..n_samples {
        for v in g.iter_mut() {
            *v = StandardNormal.sample(rng);
        }
        la.mul_vec_into(&g, &mut xa);
        lb.mul_vec_into(&g, &mut xb);
        acc.push(f.eval(&xa) - f.eval(&xb));
    }
    let alpha: T = cst(f.degree() as f64);
    let rhs = cst::<T>(COMPARISON_CONSTANT * f.lipschitz()?)
        * lambda.powf((alpha - T::one()) / cst(2.0))
        * a.sub(b).operator_norm().sqrt();
    Ok(ComparisonCheck {
        lhs: acc.mean().abs(),
        lhs_se: acc.std_error(),
        rhs,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn random_psd(rng: &mut ChaCha8Rng, d: usize) -> SymmetricMatrix<f64> {
        let g: Vec<Vec<f64>> = (0..d).map(|_| (0..d).map(|_| StandardNormal.sample(rng)).collect()).collect();
        SymmetricMatrix::from_fn(d, |i, j| (0..d).map(|k| g[i][k] * g[j][k]).sum::<f64>() / d as f64)
    }

    /// Recomputes the calibration ratio on the fixed suite.
    fn calibration_ratio() -> f64 {
        let mut rng = ChaCha8Rng::seed_from_u64(31);
        let mut worst: f64 = 0.0;
        for f in [HomogeneousFn::AbsDet { m: 1 }, HomogeneousFn::AbsDet { m: 2 }] {
            for _ in 0..12 {
                let a = random_psd(&mut rng, f.dim());
                let b = random_psd(&mut rng, f.dim());
                let lambda = a.operator_norm().max(b.operator_norm());
                let c = gaussian_comparison_check(f, &a, &b, lambda, 20_000, &mut rng).unwrap();
                let unit = c.rhs / COMPARISON_CONSTANT;
                worst = worst.max(c.lhs / unit);
            }
        }
        worst
    }

    #[test]
    fn calibrated_constant_covers_suite() {
        let r = calibration_ratio();
        assert!(2.0 * r <= COMPARISON_CONSTANT * 1.05, "ratio {r}");
    }

    #[test]
    fn equal_covariances() {
        let mut rng = ChaCha8Rng::seed_from_u64(32);
        let a = SymmetricMatrix::from_dense(&[vec![3.0f64, 1.0, 0.0], vec![1.0, 3.0, 0.0], vec![0.0, 0.0, 1.0]]).unwrap();
        let c = gaussian_comparison_check(HomogeneousFn::AbsDet { m: 2 }, &a, &a, 4.0, 10_000, &mut rng).unwrap();
        assert!(c.lhs <= 3.0 * c.lhs_se.max(1e-15));
        assert_eq!(c.rhs, 0.0);
    }

    #[test]
    fn one_dimensional_shift() {
        let mut rng = ChaCha8Rng::seed_from_u64(33);
        let delta = 0.01f64;
        let a = SymmetricMatrix::diagonal(&[1.0]);
        let b = SymmetricMatrix::diagonal(&[1.0 + delta]);
        let c = gaussian_comparison_check(HomogeneousFn::AbsDet { m: 1 }, &a, &b, 1.0 + delta, 100_000, &mut rng)
            .unwrap();
        let exact = ((1.0 + delta).sqrt() - 1.0) * (2.0 / std::f64::consts::PI).sqrt();
        assert!((c.lhs - exact).abs() < 3.0 * c.lhs_se + 1e-12, "{} vs {exact}", c.lhs);
        assert!(c.lhs <= c.rhs);
    }

    #[test]
    fn scaling_law() {
        let a = SymmetricMatrix::from_dense(&[vec![3.0f64, 1.0, 0.0], vec![1.0, 3.0, 0.0], vec![0.0, 0.0, 1.0]]).unwrap();
        let f = HomogeneousFn::AbsDet { m: 2 };
        let mut rng = ChaCha8Rng::seed_from_u64(34);
        let (ea, sa) = gaussian_expectation(f, &a, 200_000, &mut rng).unwrap();
        let (e4, s4) = gaussian_expectation(f, &a.scaled(4.0), 200_000, &mut rng).unwrap();
        // degree 2: E_{tA} f = t E_A f
        let joint = (16.0 * sa * sa + s4 * s4).sqrt();
        assert!((e4 - 4.0 * ea).abs() < 3.0 * joint);
        // the Hessian law of the 2-d Gaussian field has E|det| = 4/sqrt(3)
        assert!((ea - 4.0 / 3f64.sqrt()).abs() < 3.0 * sa);
    }
}
