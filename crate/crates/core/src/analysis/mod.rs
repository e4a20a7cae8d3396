//! Fourier complexity, simplicity-bias scores and plasticity statistics.

mod grid;
mod plasticity;
mod simplicity;
mod spectrum;

pub use grid::{evaluate_on_grid, GridSpec, Image};
pub use plasticity::{
    concat_columns, covariance, dormant_ratio, feature_norm, plasticity, stable_rank, symmetric_eigenvalues,
    PlasticityReport, DEFAULT_DORMANT_EPS, DEFAULT_RANK_TAU,
};
pub use simplicity::{init_complexity, init_seed, report, score_from_complexities, simplicity_score, SimplicityReport, C_FLOOR};
pub use spectrum::{complexity, complexity_from_spectrum, dft2, nyquist, radial_spectrum, signed_frequency, NOISE_FLOOR};
