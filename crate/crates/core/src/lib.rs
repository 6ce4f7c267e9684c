//! Non-canonical Hamiltonian models of elastic rods.

pub mod cli;
pub mod error;
pub mod integrator;
pub mod lax;
pub mod model;
pub mod poincare;
pub mod poisson;
pub mod reduction;
pub mod roots;
pub mod so3;
pub mod state;
pub mod verify;

pub use error::{Result, RodError};
pub use model::RodParams;
pub use so3::Triple;
pub use state::{FieldState, HierarchyLevel};
