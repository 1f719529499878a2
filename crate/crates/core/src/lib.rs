//! Mixed finite element discretization of the four-field (stress, pore pressure,
//! displacement, rotation) Biot consolidation system with weakly imposed stress
//! symmetry, together with block-diagonal preconditioners that are robust in the
//! Lamé parameter, the Biot-Willis constant and the hydraulic conductivity.
//!
//! The pieces, bottom-up:
//!
//! * [`mesh`]: structured triangulations of the unit square and boundary tagging.
//! * [`spaces`]: row-wise BDM1 stresses, piecewise constant displacements and
//!   rotations, continuous P1 pressures.
//! * [`assembly`]: every bilinear form of the coupled system and of the Riesz maps.
//! * [`sparsela`]: CSR storage, sparse LDLᵀ with RCM ordering, dense eigensolvers.
//! * [`precond`]: block-diagonal Riesz preconditioners, including the rank-one
//!   corrected stress block used for clamped boundaries.
//! * [`krylov`]: preconditioned CG, MINRES and Lanczos condition estimates.
//! * [`verify`]: dense eigenvalue checks of spectral equivalence and inf-sup stability.
//! * [`experiments`]: iteration-count sweeps and table output.

pub mod assembly;
pub mod error;
pub mod experiments;
pub mod krylov;
pub mod mesh;
pub mod precond;
pub mod quadrature;
pub mod spaces;
pub mod sparsela;
pub mod verify;

pub use error::{BiotError, Result};

/// Spatial dimension. Everything in this crate is two dimensional.
pub const DIM: usize = 2;

/// Maps `f` over `0..n`, in parallel when the `parallel` feature is on. Output
/// order is always `0..n`.
pub(crate) fn par_map<T, F>(n: usize, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize) -> T + Sync + Send,
{
    #[cfg(feature = "parallel")]
    {
        use rayon::prelude::*;
        (0..n).into_par_iter().map(f).collect()
    }
    #[cfg(not(feature = "parallel"))]
    {
        (0..n).map(f).collect()
    }
}
