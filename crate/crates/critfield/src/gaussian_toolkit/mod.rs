//! Dense symmetric linear algebra, Gaussian sampling and conditioning, GOE moments,
//! Hermite polynomials and the Gaussian comparison check.

pub mod comparison;
pub mod goe;
pub mod hermite;
pub mod linalg;
pub mod mvn;

pub use comparison::{gaussian_comparison_check, gaussian_expectation, ComparisonCheck, HomogeneousFn};
pub use goe::{expected_abs_det_goe, sample_goe};
pub use hermite::{hermite, hermite_all, hermite_fill, hermite_multi};
pub use linalg::{
    det_from_coords, factor_psd, hessian_coords, nu, sym_from_coords, LowerTriangular, PsdFactor, SymmetricMatrix,
};
pub use mvn::{condition_gaussian, sample_gaussian, ConditionedGaussian, GaussianSampler, CONDITIONING_TOL};
