//! Direct policy optimization for continuous-time LQR.
//!
//! The crate optimizes the closed-loop cost `f(K) = Tr(X(K)Σ)` over
//! stabilizing feedback gains `u = −Kx` with gradient, natural-gradient and
//! quasi-Newton (Kleinman–Newton) methods, in continuous time ([`flows`]) and
//! as certified discrete iterations ([`descent`]), plus projected gradient
//! descent over sparsity-structured gains ([`structured`]).
//!
//! ```
//! use pglqr::{benchmarks, descent};
//!
//! let preset = benchmarks::preset("path20").unwrap();
//! let trace = descent::kleinman_newton(
//!     &preset.plant,
//!     &preset.k0,
//!     &descent::DescentOptions::kleinman_newton(),
//! )
//! .unwrap();
//! assert!(trace.converged());
//! ```

pub mod benchmarks;
pub mod cli;
pub mod descent;
pub mod error;
pub mod fit;
pub mod flows;
pub mod linalg;
pub mod lqr;
pub mod structured;

pub use error::{Error, Result};
pub use lqr::{evaluate, Evaluation, Plant};
