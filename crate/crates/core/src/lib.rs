//! Numerical direct and inverse scattering for the Wadati–Konno–Ichikawa
//! equation `i q_t + (q / ⟨q⟩)_xx = 0`, `⟨q⟩ = √(1 + |q|²)`.
//!
//! The pipeline runs potential → Jost solutions → reflection coefficient →
//! Riemann–Hilbert problem in the hodograph variable → `q_H` → `q`.
//! Closed-form solitons and a pseudo-spectral integrator act as independent
//! checks.

pub mod direct_scattering;
pub mod error;
pub mod lattice;
pub mod lax;
pub mod pde_oracle;
pub mod reconstruction;
pub mod rhp;
pub mod soliton;

pub use error::{ErrorClass, Result, WkiError};
pub use lattice::{CauchyOperator, Grid, GridFunction, Mat2, SpatialGrid, SpectralGrid, C64};

pub const VERSION: &str = env!("CARGO_PKG_VERSION");
