use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

use super::linalg::SymmetricMatrix;
use crate::error::{Error, Result};
use crate::moments::Welford;
use crate::scalar::{cst, Real};

/// GOE draw: independent entries, diagonal variance 2, off-diagonal variance 1.
pub fn sample_goe<T: Real, R: Rng + ?Sized>(m: usize, rng: &mut R) -> SymmetricMatrix<T>
where
    StandardNormal: Distribution<T>,
{
    let sqrt2: T = cst::<T>(2.0).sqrt();
    SymmetricMatrix::from_fn(m, |i, j| {
        let g: T = StandardNormal.sample(rng);
        if i == j {
            g * sqrt2
        } else {
            g
        }
    })
}

/// Monte-Carlo `E|det A|` over the GOE with its standard error.
pub fn expected_abs_det_goe<T: Real, R: Rng + ?Sized>(m: usize, n_samples: usize, rng: &mut R) -> Result<(T, T)>
where
    StandardNormal: Distribution<T>,
{
    if n_samples < 10_000 {
        return Err(Error::InvalidArgument(format!("need at least 10^4 samples, got {n_samples}")));
    }
    if m == 0 {
        return Err(Error::InvalidArgument("dimension must be positive".into()));
    }
    let mut acc = Welford::new();
    for _ in 0..n_samples {
        let a: SymmetricMatrix<T> = sample_goe(m, rng);
        acc.push(a.determinant().abs());
    }
    Ok((acc.mean(), acc.std_error()))
}
