//! Finite-precision Robba-ring calculus: p-adic scalars, truncated Laurent
//! series with the operators φ, ψ, σ_a, ∇, characters of Q_p^*, distributions
//! on Z_p, rank-two trianguline (φ,Γ)-modules and the P^1 sheaf model.

pub mod error;
pub mod characters;
pub mod config;
pub mod growth;
pub mod linalg;
pub mod p1model;
pub mod phigamma;
pub mod distribution;
pub mod io;
pub mod padic;
pub mod par;
pub mod series;
pub mod verify;

pub use error::{Error, Result};
pub use padic::{Padic, Qp, INF};
pub use series::Series;
