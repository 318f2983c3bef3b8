//! Frequency-domain solution of the linear system and the stationary
//! covariance of the filtered output modes.

pub mod covariance;
pub mod filter;
pub mod noise;
pub mod quadrature;

pub use covariance::{
    block_spectrum, integrate_covariance, integrate_intracavity_covariance,
    output_spectral_covariance, output_transfer, response_matrix, CrossTermSign, FilterPair,
    FilteredCovariance, SpectralCovariance,
};
pub use filter::{filter_block, filter_response, FilterSpec};
pub use noise::{noise_blocks, NoiseBlocks, NoiseModel};
pub use quadrature::{integrate_interval, integrate_real_line, Quadrature, QuadratureConfig};
