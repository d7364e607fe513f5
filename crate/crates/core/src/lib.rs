//! Numerical workbench for Delsarte transmutation operators on finite grids.
//!
//! The crate builds and checks transmutations between discretized linear
//! differential operators: spectral kernels from biorthogonal eigenfamilies,
//! the Lagrange identity and its concomitant forms, Volterra-type operators
//! `Omega_{+/-}`, triangular (Gokhberg-Krein) factorization and the
//! Gelfand-Levitan-Marchenko equation, Darboux/Crum dressing of Schrodinger
//! operators, and generalized de Rham-Hodge complexes on product grids.
//!
//! Runnable walkthroughs live in `examples/`:
//!
//! ```text
//! cargo run --example grid_operators
//! cargo run --example spectral_kernels
//! cargo run --example lagrange_identity
//! cargo run --example soliton_transmutation
//! cargo run --example crum_solitons
//! cargo run --example triangular_factorization
//! cargo run --example glm_equation
//! cargo run --example torus_hodge
//! cargo run --example skrypnik_periods
//! ```

pub mod cli;
pub mod darboux;
pub mod derham;
pub mod error;
pub mod factorize;
pub mod grid;
pub mod io;
pub mod lagrange;
pub mod linalg;
pub mod spectral;
pub mod transmute;
pub mod verify;

pub use num_complex::Complex64 as C64;

pub type CMat = nalgebra::DMatrix<C64>;
pub type CVec = nalgebra::DVector<C64>;

pub use error::{Error, Result};
