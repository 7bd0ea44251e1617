//! Streaming sample moments.

use crate::scalar::{cst, Real};

/// Welford accumulator for mean and variance.
#[derive(Clone, Copy, Debug, Default)]
pub struct Welford<T> {
    n: usize,
    mean: T,
    m2: T,
}

impl<T: Real> Welford<T> {
    pub fn new() -> Self {
        Self {
            n: 0,
            mean: T::zero(),
            m2: T::zero(),
        }
    }

    #[inline]
    pub fn push(&mut self, x: T) {
        self.n += 1;
        let d = x - self.mean;
        self.mean += d / cst(self.n as f64);
        self.m2 += d * (x - self.mean);
    }

    pub fn merge(&mut self, other: &Self) {
        if other.n == 0 {
            return;
        }
        if self.n == 0 {
            *self = *other;
            return;
        }
        let n = self.n + other.n;
        let d = other.mean - self.mean;
        let (na, nb): (T, T) = (cst(self.n as f64), cst(other.n as f64));
        self.mean += d * nb / cst(n as f64);
        self.m2 += other.m2 + d * d * na * nb / cst(n as f64);
        self.n = n;
    }

    pub fn count(&self) -> usize {
        self.n
    }

    pub fn mean(&self) -> T {
        self.mean
    }

    /// Unbiased sample variance.
    pub fn variance(&self) -> T {
        if self.n < 2 {
            T::zero()
        } else {
            self.m2 / cst((self.n - 1) as f64)
        }
    }

    /// Standard error of the mean.
    pub fn std_error(&self) -> T {
        if self.n < 2 {
            T::zero()
        } else {
            (self.variance() / cst(self.n as f64)).sqrt()
        }
    }
}
