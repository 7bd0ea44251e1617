pub mod chaos_analyzer;
pub mod critical_finder;
pub mod error;
pub mod experiment_harness;
pub mod field_sampler;
pub mod gaussian_toolkit;
pub mod kac_rice_engine;
pub mod moments;
pub mod multi_index;
pub mod scalar;
pub mod spectral_weights;

pub use error::{Error, Result};
pub use scalar::Real;

pub type WeightSpec = spectral_weights::WeightSpec<f64>;
pub type CovarianceJet = spectral_weights::CovarianceJet<f64>;
pub type SymmetricMatrix = gaussian_toolkit::SymmetricMatrix<f64>;
