//! Numerics for the lattice Schrödinger equation with a nonlinearity
//! concentrated at the origin,
//!
//! ```text
//! i ψ̇(x,t) = −Δψ(x,t) − δ(x) a(|ψ(0,t)|²) ψ(0,t),   x ∈ ℤ,
//! ```
//!
//! its solitary waves, the linearization around them, the resolvent of the
//! linearized operator and the long-time behaviour of perturbed solitons.

pub mod dynamics;
pub mod error;
pub mod expm;
pub mod fit;
pub mod lattice;
pub mod linearized;
pub mod model;
pub mod modulation;
pub mod resolvent;
pub mod scattering;
pub mod solitary;

pub use error::{Error, Result};
pub use lattice::{Field, Kernel, NormExponent, WeightSpec};
pub use model::NonlinearityModel;
pub use solitary::{Branch, SolitaryWave};

/// Version of this crate, echoed into run manifests.
pub const VERSION: &str = env!("CARGO_PKG_VERSION");
